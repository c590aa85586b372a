//! Deterministic AdamW training loops plus the evaluation entry points:
//! greedy-decode exact match (through plan inversion) and masked perplexity.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::model::{GptTensors, ParamKind, Scalar};
use super::{Gpt, ModelConfig, Result, TinyLmError, TrainConfig, TrainCurve};
use crate::dataio::SeqDataset;
use crate::mi::OrderingPlan;
use crate::permute::{apply_plan, restore_output};

/// One batch of already-shifted training rows.
pub struct Batch {
    /// (B, T) input tokens.
    pub inputs: Array2<u32>,
    /// (B, T) next-token targets, aligned with `inputs`.
    pub targets: Array2<u32>,
    /// (B, T) true where a prediction contributes to the loss.
    pub mask: Array2<bool>,
}

impl Batch {
    fn validate(&self) -> Result<()> {
        if self.inputs.dim() != self.targets.dim() || self.inputs.dim() != self.mask.dim() {
            return Err(TinyLmError::Config("batch shape mismatch".into()));
        }
        if !self.mask.iter().any(|&m| m) {
            return Err(TinyLmError::FullyMasked);
        }
        Ok(())
    }
}

/// Mean cross-entropy over unmasked positions, and the matching dlogits.
fn cross_entropy<F: Scalar>(
    logits: &Array2<F>,
    targets: &Array2<u32>,
    mask: &Array2<bool>,
    want_grad: bool,
) -> (f64, Option<Array2<F>>) {
    let (b, t) = targets.dim();
    let v = logits.ncols();
    let n_live = mask.iter().filter(|&&m| m).count();
    let inv_n = 1.0 / n_live as f64;
    let mut total_nll = 0.0f64;
    let mut dlogits = want_grad.then(|| Array2::<F>::zeros(logits.raw_dim()));

    for bi in 0..b {
        for ti in 0..t {
            if !mask[[bi, ti]] {
                continue;
            }
            let row = logits.row(bi * t + ti);
            let target = targets[[bi, ti]] as usize;
            let mut max = F::neg_infinity();
            for &l in row {
                if l > max {
                    max = l;
                }
            }
            let mut sum = F::zero();
            for &l in row {
                sum = sum + (l - max).exp();
            }
            let lse = max + sum.ln();
            total_nll += (lse - row[target]).to_f64().unwrap();
            if let Some(d) = dlogits.as_mut() {
                let inv_sum = F::one() / sum;
                let scale = super::model::scalar::<F>(inv_n);
                let mut drow = d.row_mut(bi * t + ti);
                for j in 0..v {
                    let p = (row[j] - max).exp() * inv_sum;
                    let delta = if j == target { F::one() } else { F::zero() };
                    drow[j] = (p - delta) * scale;
                }
            }
        }
    }
    (total_nll * inv_n, dlogits)
}

/// Mean cross-entropy of a batch over unmasked positions only.
pub fn loss(model: &Gpt<f32>, batch: &Batch) -> Result<f64> {
    batch.validate()?;
    let logits = model.forward_batch(&batch.inputs)?;
    let (value, _) = cross_entropy(&logits, &batch.targets, &batch.mask, false);
    Ok(value)
}

/// Loss plus the L2 norm of the full parameter gradient, for diagnostics.
pub fn loss_grad_norm(model: &Gpt<f32>, batch: &Batch) -> Result<(f64, f64)> {
    let (value, mut grads) = loss_and_grads(model, batch)?;
    let mut sq = 0.0f64;
    for (view, _) in grads.views_mut() {
        for &g in view.iter() {
            sq += (g as f64) * (g as f64);
        }
    }
    Ok((value, sq.sqrt()))
}

pub(crate) fn loss_and_grads<F: Scalar>(
    model: &Gpt<F>,
    batch: &Batch,
) -> Result<(f64, GptTensors<F>)> {
    batch.validate()?;
    let (logits, cache) = model.forward_cached(&batch.inputs)?;
    let (value, dlogits) = cross_entropy(&logits, &batch.targets, &batch.mask, true);
    let grads = model.backward(&cache, &dlogits.expect("grad requested"));
    Ok((value, grads))
}

struct AdamW {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: u64,
}

impl AdamW {
    fn new(model: &mut Gpt<f32>) -> Self {
        let sizes: Vec<usize> = model.p.views_mut().iter().map(|(s, _)| s.len()).collect();
        AdamW {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut Gpt<f32>, grads: &mut GptTensors<f32>, cfg: &TrainConfig) {
        self.t += 1;
        let lr = cfg.lr as f32;
        let wd = cfg.weight_decay as f32;
        let b1 = cfg.beta1 as f32;
        let b2 = cfg.beta2 as f32;
        let eps = cfg.eps as f32;
        let bc1 = 1.0 - (cfg.beta1 as f32).powi(self.t as i32);
        let bc2 = 1.0 - (cfg.beta2 as f32).powi(self.t as i32);
        for (((pview, kind), (gview, _)), (m, v)) in model
            .p
            .views_mut()
            .into_iter()
            .zip(grads.views_mut())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let decay = kind == ParamKind::Weight;
            for i in 0..pview.len() {
                let g = gview[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let mut upd = lr * m_hat / (v_hat.sqrt() + eps);
                if decay {
                    upd += lr * wd * pview[i];
                }
                pview[i] -= upd;
            }
        }
    }
}

fn seq2seq_rows(dataset: &SeqDataset, plan: &OrderingPlan) -> Result<Vec<Vec<u32>>> {
    dataset
        .examples
        .iter()
        .map(|ex| {
            let mut row = ex.source.clone();
            row.extend(apply_plan(&ex.target, plan)?);
            Ok(row)
        })
        .collect()
}

fn batch_from_rows(rows: &[Vec<u32>], indices: &[usize], l1: usize) -> Batch {
    let t_full = rows[indices[0]].len();
    let t = t_full - 1;
    let b = indices.len();
    let mut inputs = Array2::zeros((b, t));
    let mut targets = Array2::zeros((b, t));
    let mut mask = Array2::from_elem((b, t), false);
    for (bi, &idx) in indices.iter().enumerate() {
        let row = &rows[idx];
        for p in 0..t {
            inputs[[bi, p]] = row[p];
            targets[[bi, p]] = row[p + 1];
            mask[[bi, p]] = p + 1 >= l1;
        }
    }
    Batch {
        inputs,
        targets,
        mask,
    }
}

fn validate_task_setup(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &SeqDataset,
    eval_set: &SeqDataset,
    plan: &OrderingPlan,
) -> Result<()> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if train_set.is_empty() || eval_set.is_empty() {
        return Err(TinyLmError::EmptyDataset);
    }
    let l1 = train_set.source_len();
    let l2 = train_set.target_len();
    if plan.perm.len() != l2 {
        return Err(TinyLmError::PlanMismatch {
            plan: plan.perm.len(),
            target: l2,
        });
    }
    plan.validate()?;
    if l1 + l2 > model_cfg.ctx_len {
        return Err(TinyLmError::CtxOverflow {
            len: l1 + l2,
            ctx: model_cfg.ctx_len,
        });
    }
    if model_cfg.vocab_size != train_set.vocab.len() {
        return Err(TinyLmError::Config(format!(
            "model vocab {} != dataset vocab {}",
            model_cfg.vocab_size,
            train_set.vocab.len()
        )));
    }
    if eval_set.source_len() != l1 || eval_set.target_len() != l2 {
        return Err(TinyLmError::Config("eval set shape mismatch".into()));
    }
    Ok(())
}

/// Trains on `source ++ permuted-target` rows, evaluating exact-match on the
/// held-out set every `eval_every` iterations. Fully deterministic given the
/// configs, datasets, plan and seed.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &SeqDataset,
    eval_set: &SeqDataset,
    plan: &OrderingPlan,
) -> Result<(Checkpoint, TrainCurve)> {
    validate_task_setup(model_cfg, train_cfg, train_set, eval_set, plan)?;
    let l1 = train_set.source_len();
    let rows = seq2seq_rows(train_set, plan)?;

    let mut model = Gpt::<f32>::init(model_cfg, train_cfg.seed)?;
    let mut adam = AdamW::new(&mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed ^ BATCH_SEED_OFFSET);
    let mut curve = TrainCurve::default();
    let mut window_loss = 0.0f64;
    let mut window_count = 0usize;

    for iter in 1..=train_cfg.max_iters {
        let indices: Vec<usize> = (0..train_cfg.batch)
            .map(|_| rng.gen_range(0..rows.len()))
            .collect();
        let batch = batch_from_rows(&rows, &indices, l1);
        let (loss_value, mut grads) = loss_and_grads(&model, &batch)?;
        adam.step(&mut model, &mut grads, train_cfg);
        window_loss += loss_value;
        window_count += 1;

        if iter % train_cfg.eval_every == 0 || iter == train_cfg.max_iters {
            let accuracy = eval_exact_match_model(&model, eval_set, plan)?;
            curve.iters.push(iter);
            curve.test_accuracy.push(accuracy);
            curve.train_loss.push(window_loss / window_count as f64);
            window_loss = 0.0;
            window_count = 0;
            if let Some(stop) = train_cfg.stop_accuracy {
                if accuracy >= stop {
                    break;
                }
            }
        }
    }

    let ckpt = Checkpoint {
        model_cfg: model_cfg.clone(),
        task_name: train_set.task_name.clone(),
        plan: Some(plan.clone()),
        vocab: train_set.vocab.symbols().to_vec(),
        model,
    };
    Ok((ckpt, curve))
}

// Keeps the batch-sampling RNG stream distinct from the init stream.
const BATCH_SEED_OFFSET: u64 = 0x0f5e_ed0f;

/// Tokens plus a label mask aligned to them: `mask[p]` says whether token `p`
/// counts as a prediction target. `mask[0]` must be false (no context).
pub type MaskedRow = (Vec<u32>, Vec<bool>);

/// Standard-perplexity rows: every token is scored except the first.
pub fn plain_text_rows(sentences: &[Vec<u32>]) -> Vec<MaskedRow> {
    sentences
        .iter()
        .map(|s| {
            let mut mask = vec![true; s.len()];
            if !mask.is_empty() {
                mask[0] = false;
            }
            (s.clone(), mask)
        })
        .collect()
}

pub struct TextTrainOutput {
    pub model: Gpt<f32>,
    pub iters: Vec<usize>,
    pub losses: Vec<f64>,
}

fn text_batch(rows: &[MaskedRow], indices: &[usize]) -> Batch {
    let t = indices
        .iter()
        .map(|&i| rows[i].0.len())
        .max()
        .unwrap()
        .saturating_sub(1)
        .max(1);
    let b = indices.len();
    let mut inputs = Array2::zeros((b, t));
    let mut targets = Array2::zeros((b, t));
    let mut mask = Array2::from_elem((b, t), false);
    for (bi, &idx) in indices.iter().enumerate() {
        let (tokens, row_mask) = &rows[idx];
        for p in 0..t.min(tokens.len().saturating_sub(1)) {
            inputs[[bi, p]] = tokens[p];
            targets[[bi, p]] = tokens[p + 1];
            mask[[bi, p]] = row_mask[p + 1];
        }
    }
    Batch {
        inputs,
        targets,
        mask,
    }
}

fn validate_text_rows(rows: &[MaskedRow], model_cfg: &ModelConfig) -> Result<()> {
    if rows.is_empty() {
        return Err(TinyLmError::EmptyDataset);
    }
    for (tokens, mask) in rows {
        if tokens.len() != mask.len() {
            return Err(TinyLmError::Config(
                "mask length does not match token length".into(),
            ));
        }
        if tokens.is_empty() {
            return Err(TinyLmError::EmptyInput);
        }
        if tokens.len() > model_cfg.ctx_len {
            return Err(TinyLmError::CtxOverflow {
                len: tokens.len(),
                ctx: model_cfg.ctx_len,
            });
        }
        if mask[0] {
            return Err(TinyLmError::Config(
                "first token has no context and cannot be scored".into(),
            ));
        }
    }
    Ok(())
}

/// Trains an autoregressive model on variable-length masked text rows.
pub fn train_text(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    rows: &[MaskedRow],
) -> Result<TextTrainOutput> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    validate_text_rows(rows, model_cfg)?;

    let mut model = Gpt::<f32>::init(model_cfg, train_cfg.seed)?;
    let mut adam = AdamW::new(&mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed ^ BATCH_SEED_OFFSET);
    let mut iters = Vec::new();
    let mut losses = Vec::new();
    let mut window_loss = 0.0f64;
    let mut window_count = 0usize;

    for iter in 1..=train_cfg.max_iters {
        let indices: Vec<usize> = (0..train_cfg.batch)
            .map(|_| rng.gen_range(0..rows.len()))
            .collect();
        let batch = text_batch(rows, &indices);
        let (loss_value, mut grads) = loss_and_grads(&model, &batch)?;
        adam.step(&mut model, &mut grads, train_cfg);
        window_loss += loss_value;
        window_count += 1;
        if iter % train_cfg.eval_every == 0 || iter == train_cfg.max_iters {
            iters.push(iter);
            losses.push(window_loss / window_count as f64);
            window_loss = 0.0;
            window_count = 0;
        }
    }
    Ok(TextTrainOutput {
        model,
        iters,
        losses,
    })
}

const DECODE_CHUNK: usize = 256;

fn argmax_row<F: Scalar>(row: ndarray::ArrayView1<F>) -> u32 {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best as u32
}

/// Greedy autoregressive decoding of `steps` tokens from each source prefix.
pub fn greedy_decode_batch(
    model: &Gpt<f32>,
    sources: &[Vec<u32>],
    steps: usize,
) -> Result<Vec<Vec<u32>>> {
    let mut rows: Vec<Vec<u32>> = sources.to_vec();
    for chunk_start in (0..rows.len()).step_by(DECODE_CHUNK) {
        let chunk_end = (chunk_start + DECODE_CHUNK).min(rows.len());
        for _ in 0..steps {
            let t = rows[chunk_start].len();
            let b = chunk_end - chunk_start;
            let mut tokens = Array2::zeros((b, t));
            for (bi, row) in rows[chunk_start..chunk_end].iter().enumerate() {
                for (p, &tok) in row.iter().enumerate() {
                    tokens[[bi, p]] = tok;
                }
            }
            let logits = model.forward_batch(&tokens)?;
            for (bi, row) in rows[chunk_start..chunk_end].iter_mut().enumerate() {
                row.push(argmax_row(logits.row(bi * t + t - 1)));
            }
        }
    }
    Ok(rows)
}

/// Greedy-decodes each source, restores original target order through the
/// plan, and returns the fraction of rows whose full target matches.
pub fn eval_exact_match_model(
    model: &Gpt<f32>,
    dataset_original: &SeqDataset,
    plan: &OrderingPlan,
) -> Result<f64> {
    if dataset_original.is_empty() {
        return Err(TinyLmError::EmptyDataset);
    }
    let l2 = dataset_original.target_len();
    if plan.perm.len() != l2 {
        return Err(TinyLmError::PlanMismatch {
            plan: plan.perm.len(),
            target: l2,
        });
    }
    let l1 = dataset_original.source_len();
    let sources: Vec<Vec<u32>> = dataset_original
        .examples
        .iter()
        .map(|e| e.source.clone())
        .collect();
    let decoded = greedy_decode_batch(model, &sources, l2)?;
    let mut correct = 0usize;
    for (row, ex) in decoded.iter().zip(&dataset_original.examples) {
        let restored = restore_output(&row[l1..], plan)?;
        if restored == ex.target {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset_original.len() as f64)
}

pub fn eval_exact_match(
    checkpoint: &Checkpoint,
    dataset_original: &SeqDataset,
    plan: &OrderingPlan,
) -> Result<f64> {
    eval_exact_match_model(&checkpoint.model, dataset_original, plan)
}

/// exp(mean NLL) over unmasked positions of masked text rows.
pub fn eval_masked_perplexity_model(model: &Gpt<f32>, rows: &[MaskedRow]) -> Result<f64> {
    validate_text_rows(rows, &model.cfg)?;
    let mut total_nll = 0.0f64;
    let mut total_count = 0usize;
    for chunk in rows.chunks(DECODE_CHUNK) {
        let t = chunk
            .iter()
            .map(|(tokens, _)| tokens.len())
            .max()
            .unwrap()
            .saturating_sub(1)
            .max(1);
        let b = chunk.len();
        let mut inputs = Array2::zeros((b, t));
        let mut targets = Array2::zeros((b, t));
        let mut mask = Array2::from_elem((b, t), false);
        for (bi, (tokens, row_mask)) in chunk.iter().enumerate() {
            for p in 0..tokens.len().saturating_sub(1) {
                inputs[[bi, p]] = tokens[p];
                targets[[bi, p]] = tokens[p + 1];
                mask[[bi, p]] = row_mask[p + 1];
            }
        }
        let logits = model.forward_batch(&inputs)?;
        for bi in 0..b {
            for p in 0..t {
                if !mask[[bi, p]] {
                    continue;
                }
                let row = logits.row(bi * t + p);
                let target = targets[[bi, p]] as usize;
                let mut max = f32::NEG_INFINITY;
                for &l in row {
                    max = max.max(l);
                }
                let sum: f64 = row.iter().map(|&l| ((l - max) as f64).exp()).sum();
                total_nll += max as f64 + sum.ln() - row[target] as f64;
                total_count += 1;
            }
        }
    }
    if total_count == 0 {
        return Err(TinyLmError::FullyMasked);
    }
    Ok((total_nll / total_count as f64).exp())
}

pub fn eval_masked_perplexity(checkpoint: &Checkpoint, rows: &[MaskedRow]) -> Result<f64> {
    eval_masked_perplexity_model(&checkpoint.model, rows)
}

/// Number of scored (unmasked) positions across rows.
pub fn unmasked_count(rows: &[MaskedRow]) -> usize {
    rows.iter()
        .map(|(_, mask)| mask.iter().skip(1).filter(|&&m| m).count())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauReport {
    pub iteration: usize,
    pub plateaued: bool,
}

/// First iteration where the moving-average accuracy slope drops below
/// `slope_eps` per eval interval; falls back to the final iteration
/// (flagged) for curves that never flatten.
pub fn detect_plateau(
    curve: &TrainCurve,
    window: usize,
    slope_eps: f64,
) -> Result<PlateauReport> {
    let n = curve.len();
    if window == 0 || n < window {
        return Err(TinyLmError::ShortCurve { len: n, window });
    }
    let moving: Vec<f64> = (window - 1..n)
        .map(|k| {
            curve.test_accuracy[k + 1 - window..=k].iter().sum::<f64>() / window as f64
        })
        .collect();
    for i in 1..moving.len() {
        let slope = moving[i] - moving[i - 1];
        if slope < slope_eps {
            return Ok(PlateauReport {
                // moving[i] covers curve index i + window - 1
                iteration: curve.iters[i + window - 1],
                plateaued: true,
            });
        }
    }
    Ok(PlateauReport {
        iteration: *curve.iters.last().expect("curve nonempty"),
        plateaued: false,
    })
}
