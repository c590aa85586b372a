//! Central finite-difference verification of the analytic backward pass,
//! run in double precision on a toy configuration.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::Gpt;
use super::train::{loss_and_grads, Batch};
use super::{ModelConfig, Result};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub n_params: usize,
    /// Canonical index of the worst parameter tensor.
    pub worst_tensor: usize,
    pub pass: bool,
}

fn f64_loss(model: &Gpt<f64>, batch: &Batch) -> Result<f64> {
    let logits = model.forward_batch(&batch.inputs)?;
    let mut total = 0.0f64;
    let mut count = 0usize;
    let (bs, ts) = batch.targets.dim();
    for bi in 0..bs {
        for ti in 0..ts {
            if !batch.mask[[bi, ti]] {
                continue;
            }
            let row = logits.row(bi * ts + ti);
            let target = batch.targets[[bi, ti]] as usize;
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let sum: f64 = row.iter().map(|&l| (l - max).exp()).sum();
            total += max + sum.ln() - row[target];
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Compares analytic gradients against central differences over every
/// parameter of a model built from `cfg`. The batch is random but fixed by
/// `seed`, so repeated runs are bit-identical.
pub fn grad_check(cfg: &ModelConfig, tolerance: f64, seed: u64) -> Result<GradCheckReport> {
    let mut model = Gpt::<f64>::init(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd1f);
    let b = 2usize;
    let t = cfg.ctx_len.min(8);
    let rand_tokens = |rng: &mut ChaCha8Rng| {
        Array2::from_shape_fn((b, t), |_| rng.gen_range(0..cfg.vocab_size as u32))
    };
    let inputs = rand_tokens(&mut rng);
    let targets = rand_tokens(&mut rng);
    // Mask some positions so masked-loss gradients are exercised too.
    let mask = Array2::from_shape_fn((b, t), |_| rng.gen_bool(0.6));
    let mask = if mask.iter().any(|&m| m) {
        mask
    } else {
        Array2::from_elem((b, t), true)
    };
    let batch = Batch {
        inputs,
        targets,
        mask,
    };

    let (_, mut analytic) = loss_and_grads(&model, &batch)?;
    let analytic_views: Vec<Vec<f64>> = analytic
        .views_mut()
        .into_iter()
        .map(|(v, _)| v.to_vec())
        .collect();

    let h = 1e-5;
    let mut max_rel_err = 0.0f64;
    let mut worst_tensor = 0usize;
    let mut n_params = 0usize;

    for (tensor_idx, tensor) in analytic_views.iter().enumerate() {
        n_params += tensor.len();
        for i in 0..tensor.len() {
            let original = model.p.views_mut()[tensor_idx].0[i];
            model.p.views_mut()[tensor_idx].0[i] = original + h;
            let loss_plus = f64_loss(&model, &batch)?;
            model.p.views_mut()[tensor_idx].0[i] = original - h;
            let loss_minus = f64_loss(&model, &batch)?;
            model.p.views_mut()[tensor_idx].0[i] = original;

            let numeric = (loss_plus - loss_minus) / (2.0 * h);
            let a = tensor[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > max_rel_err {
                max_rel_err = rel;
                worst_tensor = tensor_idx;
            }
        }
    }

    Ok(GradCheckReport {
        max_rel_err,
        n_params,
        worst_tensor,
        pass: max_rel_err < tolerance,
    })
}
