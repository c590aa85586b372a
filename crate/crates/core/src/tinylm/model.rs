//! Decoder-only transformer: embeddings, causal self-attention blocks, and
//! exact manual backpropagation.
//!
//! The layout follows the small-GPT convention: learned token + position
//! embeddings, pre-norm blocks (LayerNorm -> attention -> residual,
//! LayerNorm -> 4x GELU MLP -> residual), a final LayerNorm and an untied
//! linear head. Everything is single threaded and allocation order is fixed,
//! so a given (config, seed) pair always produces bit-identical results.

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, Result, TinyLmError};

/// Float scalar the model is generic over: f32 for training, f64 for
/// finite-difference gradient checks.
pub trait Scalar: ndarray::NdFloat + ndarray::LinalgScalar {}
impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn scalar<F: Scalar>(x: f64) -> F {
    F::from(x).expect("f64 converts to model scalar")
}

const LAYERNORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) struct LayerTensors<F> {
    pub ln1_g: Array1<F>,
    pub ln1_b: Array1<F>,
    pub w_qkv: Array2<F>, // (d, 3d)
    pub b_qkv: Array1<F>,
    pub w_attn_proj: Array2<F>, // (d, d)
    pub b_attn_proj: Array1<F>,
    pub ln2_g: Array1<F>,
    pub ln2_b: Array1<F>,
    pub w_fc: Array2<F>, // (d, 4d)
    pub b_fc: Array1<F>,
    pub w_mlp_proj: Array2<F>, // (4d, d)
    pub b_mlp_proj: Array1<F>,
}

#[derive(Debug, Clone)]
pub(crate) struct GptTensors<F> {
    pub tok_emb: Array2<F>, // (V, d)
    pub pos_emb: Array2<F>, // (ctx, d)
    pub layers: Vec<LayerTensors<F>>,
    pub ln_f_g: Array1<F>,
    pub ln_f_b: Array1<F>,
    pub w_head: Array2<F>, // (d, V)
}

/// Whether AdamW applies decoupled weight decay to a tensor. Matmul weights
/// decay; biases, LayerNorm parameters and embeddings do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ParamKind {
    Weight,
    NoDecay,
}

impl<F: Scalar> GptTensors<F> {
    fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d_model;
        let layer = || LayerTensors {
            ln1_g: Array1::zeros(d),
            ln1_b: Array1::zeros(d),
            w_qkv: Array2::zeros((d, 3 * d)),
            b_qkv: Array1::zeros(3 * d),
            w_attn_proj: Array2::zeros((d, d)),
            b_attn_proj: Array1::zeros(d),
            ln2_g: Array1::zeros(d),
            ln2_b: Array1::zeros(d),
            w_fc: Array2::zeros((d, 4 * d)),
            b_fc: Array1::zeros(4 * d),
            w_mlp_proj: Array2::zeros((4 * d, d)),
            b_mlp_proj: Array1::zeros(d),
        };
        GptTensors {
            tok_emb: Array2::zeros((cfg.vocab_size, d)),
            pos_emb: Array2::zeros((cfg.ctx_len, d)),
            layers: (0..cfg.n_layers).map(|_| layer()).collect(),
            ln_f_g: Array1::zeros(d),
            ln_f_b: Array1::zeros(d),
            w_head: Array2::zeros((d, cfg.vocab_size)),
        }
    }

    /// Flat views over every parameter tensor, in a fixed canonical order
    /// shared by the optimizer, the checkpoint codec, and the grad check.
    pub(crate) fn views_mut(&mut self) -> Vec<(&mut [F], ParamKind)> {
        fn flat<F>(a: &mut Array2<F>) -> &mut [F] {
            a.as_slice_mut().expect("standard layout")
        }
        fn flat1<F>(a: &mut Array1<F>) -> &mut [F] {
            a.as_slice_mut().expect("standard layout")
        }
        let mut out: Vec<(&mut [F], ParamKind)> = Vec::new();
        out.push((flat(&mut self.tok_emb), ParamKind::NoDecay));
        out.push((flat(&mut self.pos_emb), ParamKind::NoDecay));
        for layer in &mut self.layers {
            out.push((flat1(&mut layer.ln1_g), ParamKind::NoDecay));
            out.push((flat1(&mut layer.ln1_b), ParamKind::NoDecay));
            out.push((flat(&mut layer.w_qkv), ParamKind::Weight));
            out.push((flat1(&mut layer.b_qkv), ParamKind::NoDecay));
            out.push((flat(&mut layer.w_attn_proj), ParamKind::Weight));
            out.push((flat1(&mut layer.b_attn_proj), ParamKind::NoDecay));
            out.push((flat1(&mut layer.ln2_g), ParamKind::NoDecay));
            out.push((flat1(&mut layer.ln2_b), ParamKind::NoDecay));
            out.push((flat(&mut layer.w_fc), ParamKind::Weight));
            out.push((flat1(&mut layer.b_fc), ParamKind::NoDecay));
            out.push((flat(&mut layer.w_mlp_proj), ParamKind::Weight));
            out.push((flat1(&mut layer.b_mlp_proj), ParamKind::NoDecay));
        }
        out.push((flat1(&mut self.ln_f_g), ParamKind::NoDecay));
        out.push((flat1(&mut self.ln_f_b), ParamKind::NoDecay));
        out.push((flat(&mut self.w_head), ParamKind::Weight));
        out
    }
}

/// The transformer with its configuration.
#[derive(Debug, Clone)]
pub struct Gpt<F: Scalar> {
    pub cfg: ModelConfig,
    pub(crate) p: GptTensors<F>,
}

impl<F: Scalar> Gpt<F> {
    /// Random initialization: N(0, 0.02) for weights and embeddings, zeros
    /// for biases, ones for LayerNorm gains; residual projections are scaled
    /// down by 1/sqrt(2 * n_layers).
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Normal::new(0.0f64, 0.02).expect("valid std");
        let resid = Normal::new(0.0f64, 0.02 / ((2 * cfg.n_layers) as f64).sqrt())
            .expect("valid std");
        let mut p = GptTensors::zeros(cfg);
        let fill = |a: &mut [F], dist: &Normal<f64>, rng: &mut ChaCha8Rng| {
            for x in a {
                *x = scalar(dist.sample(rng));
            }
        };
        fill(p.tok_emb.as_slice_mut().unwrap(), &base, &mut rng);
        fill(p.pos_emb.as_slice_mut().unwrap(), &base, &mut rng);
        for layer in &mut p.layers {
            layer.ln1_g.fill(F::one());
            fill(layer.w_qkv.as_slice_mut().unwrap(), &base, &mut rng);
            fill(layer.w_attn_proj.as_slice_mut().unwrap(), &resid, &mut rng);
            layer.ln2_g.fill(F::one());
            fill(layer.w_fc.as_slice_mut().unwrap(), &base, &mut rng);
            fill(layer.w_mlp_proj.as_slice_mut().unwrap(), &resid, &mut rng);
        }
        p.ln_f_g.fill(F::one());
        fill(p.w_head.as_slice_mut().unwrap(), &base, &mut rng);
        Ok(Gpt {
            cfg: cfg.clone(),
            p,
        })
    }

    pub fn zeroed(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut p = GptTensors::zeros(cfg);
        for layer in &mut p.layers {
            layer.ln1_g.fill(F::one());
            layer.ln2_g.fill(F::one());
        }
        p.ln_f_g.fill(F::one());
        Ok(Gpt {
            cfg: cfg.clone(),
            p,
        })
    }

    pub fn n_params(&self) -> usize {
        let mut clone = self.p.clone();
        clone.views_mut().iter().map(|(v, _)| v.len()).sum()
    }

    fn check_tokens(&self, tokens: &Array2<u32>) -> Result<()> {
        let t = tokens.ncols();
        if t == 0 {
            return Err(TinyLmError::EmptyInput);
        }
        if t > self.cfg.ctx_len {
            return Err(TinyLmError::CtxOverflow {
                len: t,
                ctx: self.cfg.ctx_len,
            });
        }
        for &id in tokens.iter() {
            if id as usize >= self.cfg.vocab_size {
                return Err(TinyLmError::InvalidToken {
                    id,
                    vocab_size: self.cfg.vocab_size,
                });
            }
        }
        Ok(())
    }

    /// Logits for a single sequence, shape (positions, vocab). Causal: row
    /// `p` depends only on tokens `0..=p`.
    pub fn forward(&self, tokens: &[u32]) -> Result<Array2<F>> {
        let view = Array2::from_shape_vec((1, tokens.len()), tokens.to_vec())
            .expect("shape matches");
        self.forward_batch(&view)
    }

    /// Logits for a batch, shape (B*T, vocab) in row-major (b, t) order.
    pub fn forward_batch(&self, tokens: &Array2<u32>) -> Result<Array2<F>> {
        self.check_tokens(tokens)?;
        Ok(self.run_forward(tokens, None))
    }

    pub(crate) fn forward_cached(&self, tokens: &Array2<u32>) -> Result<(Array2<F>, ForwardCache<F>)> {
        self.check_tokens(tokens)?;
        let mut cache = ForwardCache::default();
        let logits = self.run_forward(tokens, Some(&mut cache));
        Ok((logits, cache))
    }

    fn run_forward(&self, tokens: &Array2<u32>, mut cache: Option<&mut ForwardCache<F>>) -> Array2<F> {
        let (b, t) = tokens.dim();
        let d = self.cfg.d_model;
        let rows = b * t;

        let mut x = Array2::<F>::zeros((rows, d));
        for bi in 0..b {
            for ti in 0..t {
                let tok = tokens[[bi, ti]] as usize;
                let mut row = x.row_mut(bi * t + ti);
                row.assign(&self.p.tok_emb.row(tok));
                row += &self.p.pos_emb.row(ti);
            }
        }

        if let Some(c) = cache.as_deref_mut() {
            c.tokens = tokens.clone();
        }

        for (li, layer) in self.p.layers.iter().enumerate() {
            let x_in = x.clone();
            let (x_ln1, rstd1) = layernorm_forward(&x_in, &layer.ln1_g, &layer.ln1_b);
            let qkv = add_bias(x_ln1.dot(&layer.w_qkv), &layer.b_qkv);
            let (att_concat, att_probs) = attention_forward(&qkv, b, t, self.cfg.n_heads);
            let att_proj = add_bias(att_concat.dot(&layer.w_attn_proj), &layer.b_attn_proj);
            let x_mid = &x_in + &att_proj;

            let (x_ln2, rstd2) = layernorm_forward(&x_mid, &layer.ln2_g, &layer.ln2_b);
            let fc_pre = add_bias(x_ln2.dot(&layer.w_fc), &layer.b_fc);
            let fc_act = fc_pre.mapv(gelu);
            let mlp_proj = add_bias(fc_act.dot(&layer.w_mlp_proj), &layer.b_mlp_proj);
            x = &x_mid + &mlp_proj;

            if let Some(c) = cache.as_deref_mut() {
                c.layers.push(LayerCache {
                    x_in,
                    x_ln1,
                    rstd1,
                    qkv,
                    att_probs,
                    att_concat,
                    x_mid,
                    x_ln2,
                    rstd2,
                    fc_pre,
                    fc_act,
                });
                let _ = li;
            }
        }

        let (x_f, rstd_f) = layernorm_forward(&x, &self.p.ln_f_g, &self.p.ln_f_b);
        let logits = x_f.dot(&self.p.w_head);
        if let Some(c) = cache {
            c.x_pre_lnf = x;
            c.x_f = x_f;
            c.rstd_f = rstd_f;
        }
        logits
    }

    /// Backward pass. `dlogits` has shape (B*T, vocab); returns gradients in
    /// the same canonical layout as the parameters.
    pub(crate) fn backward(&self, cache: &ForwardCache<F>, dlogits: &Array2<F>) -> GptTensors<F> {
        let (b, t) = cache.tokens.dim();
        let mut g = GptTensors::zeros(&self.cfg);

        // Head and final LayerNorm.
        g.w_head = cache.x_f.t().dot(dlogits);
        let dx_f = dlogits.dot(&self.p.w_head.t());
        let (mut dx, dg, db) = layernorm_backward(
            &dx_f,
            &cache.x_pre_lnf,
            &cache.rstd_f,
            &self.p.ln_f_g,
        );
        g.ln_f_g = dg;
        g.ln_f_b = db;

        for (li, layer) in self.p.layers.iter().enumerate().rev() {
            let c = &cache.layers[li];
            let gl = &mut g.layers[li];

            // MLP branch: x_out = x_mid + proj(gelu(fc(ln2(x_mid)))).
            let d_mlp_proj = &dx; // gradient into mlp projection output
            gl.w_mlp_proj = c.fc_act.t().dot(d_mlp_proj);
            gl.b_mlp_proj = sum_rows(d_mlp_proj);
            let mut d_fc_act = d_mlp_proj.dot(&layer.w_mlp_proj.t());
            // GELU derivative uses the cached pre-activation.
            ndarray::Zip::from(&mut d_fc_act)
                .and(&c.fc_pre)
                .for_each(|da, &pre| *da = *da * gelu_grad(pre));
            gl.w_fc = c.x_ln2.t().dot(&d_fc_act);
            gl.b_fc = sum_rows(&d_fc_act);
            let dx_ln2 = d_fc_act.dot(&layer.w_fc.t());
            let (dx_mid_ln, dg2, db2) =
                layernorm_backward(&dx_ln2, &c.x_mid, &c.rstd2, &layer.ln2_g);
            gl.ln2_g = dg2;
            gl.ln2_b = db2;
            let dx_mid = &dx + &dx_mid_ln; // residual join

            // Attention branch: x_mid = x_in + proj(attn(qkv(ln1(x_in)))).
            gl.w_attn_proj = c.att_concat.t().dot(&dx_mid);
            gl.b_attn_proj = sum_rows(&dx_mid);
            let d_att_concat = dx_mid.dot(&layer.w_attn_proj.t());
            let d_qkv = attention_backward(
                &c.qkv,
                &c.att_probs,
                &d_att_concat,
                b,
                t,
                self.cfg.n_heads,
            );
            gl.w_qkv = c.x_ln1.t().dot(&d_qkv);
            gl.b_qkv = sum_rows(&d_qkv);
            let dx_ln1 = d_qkv.dot(&layer.w_qkv.t());
            let (dx_in_ln, dg1, db1) =
                layernorm_backward(&dx_ln1, &c.x_in, &c.rstd1, &layer.ln1_g);
            gl.ln1_g = dg1;
            gl.ln1_b = db1;
            dx = &dx_mid + &dx_in_ln;
        }

        // Embedding scatter-add, sequential for determinism.
        for bi in 0..b {
            for ti in 0..t {
                let tok = cache.tokens[[bi, ti]] as usize;
                let drow = dx.row(bi * t + ti);
                let mut trow = g.tok_emb.row_mut(tok);
                trow += &drow;
                let mut prow = g.pos_emb.row_mut(ti);
                prow += &drow;
            }
        }
        g
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<F> {
    x_in: Array2<F>,
    x_ln1: Array2<F>,
    rstd1: Array1<F>,
    qkv: Array2<F>,
    att_probs: Vec<Array2<F>>, // one (T, T) lower-triangular matrix per (b, head)
    att_concat: Array2<F>,
    x_mid: Array2<F>,
    x_ln2: Array2<F>,
    rstd2: Array1<F>,
    fc_pre: Array2<F>,
    fc_act: Array2<F>,
}

#[derive(Debug)]
pub(crate) struct ForwardCache<F> {
    tokens: Array2<u32>,
    layers: Vec<LayerCache<F>>,
    x_pre_lnf: Array2<F>,
    x_f: Array2<F>,
    rstd_f: Array1<F>,
}

impl<F: Scalar> Default for ForwardCache<F> {
    fn default() -> Self {
        ForwardCache {
            tokens: Array2::zeros((0, 0)),
            layers: Vec::new(),
            x_pre_lnf: Array2::zeros((0, 0)),
            x_f: Array2::zeros((0, 0)),
            rstd_f: Array1::zeros(0),
        }
    }
}

fn add_bias<F: Scalar>(mut x: Array2<F>, b: &Array1<F>) -> Array2<F> {
    for mut row in x.rows_mut() {
        row += b;
    }
    x
}

fn sum_rows<F: Scalar>(x: &Array2<F>) -> Array1<F> {
    let mut out = Array1::zeros(x.ncols());
    for row in x.rows() {
        out += &row;
    }
    out
}

/// Row-wise LayerNorm; returns the normalized-and-scaled output plus the
/// per-row reciprocal standard deviation needed by the backward pass.
fn layernorm_forward<F: Scalar>(
    x: &Array2<F>,
    gamma: &Array1<F>,
    beta: &Array1<F>,
) -> (Array2<F>, Array1<F>) {
    let d = x.ncols();
    let inv_d = scalar::<F>(1.0 / d as f64);
    let eps = scalar::<F>(LAYERNORM_EPS);
    let mut out = Array2::zeros(x.raw_dim());
    let mut rstds = Array1::zeros(x.nrows());
    for (i, row) in x.rows().into_iter().enumerate() {
        let mean = row.sum() * inv_d;
        let mut var = F::zero();
        for &v in row {
            let c = v - mean;
            var = var + c * c;
        }
        var = var * inv_d;
        let rstd = F::one() / (var + eps).sqrt();
        rstds[i] = rstd;
        let mut orow = out.row_mut(i);
        for (j, &v) in row.iter().enumerate() {
            orow[j] = (v - mean) * rstd * gamma[j] + beta[j];
        }
    }
    (out, rstds)
}

/// Gradient of LayerNorm. `x` is the original input and `rstd` the cached
/// reciprocal std; returns (dx, dgamma, dbeta).
fn layernorm_backward<F: Scalar>(
    dout: &Array2<F>,
    x: &Array2<F>,
    rstd: &Array1<F>,
    gamma: &Array1<F>,
) -> (Array2<F>, Array1<F>, Array1<F>) {
    let d = x.ncols();
    let inv_d = scalar::<F>(1.0 / d as f64);
    let mut dx = Array2::zeros(x.raw_dim());
    let mut dgamma = Array1::zeros(d);
    let mut dbeta = Array1::zeros(d);
    for i in 0..x.nrows() {
        let row = x.row(i);
        let dorow = dout.row(i);
        let r = rstd[i];
        let mean = row.sum() * inv_d;
        // Recompute x_hat from the cached statistics (cheaper than storing it).
        let mut sum_dxhat = F::zero();
        let mut sum_dxhat_xhat = F::zero();
        for j in 0..d {
            let xhat = (row[j] - mean) * r;
            let dxhat = dorow[j] * gamma[j];
            sum_dxhat = sum_dxhat + dxhat;
            sum_dxhat_xhat = sum_dxhat_xhat + dxhat * xhat;
            dgamma[j] = dgamma[j] + dorow[j] * xhat;
            dbeta[j] = dbeta[j] + dorow[j];
        }
        let mut dxrow = dx.row_mut(i);
        for j in 0..d {
            let xhat = (row[j] - mean) * r;
            let dxhat = dorow[j] * gamma[j];
            dxrow[j] = r * (dxhat - sum_dxhat * inv_d - xhat * sum_dxhat_xhat * inv_d);
        }
    }
    (dx, dgamma, dbeta)
}

/// GELU, tanh approximation (small-GPT convention).
fn gelu<F: Scalar>(x: F) -> F {
    let c = scalar::<F>(0.7978845608028654); // sqrt(2/pi)
    let k = scalar::<F>(0.044715);
    let half = scalar::<F>(0.5);
    let u = c * (x + k * x * x * x);
    half * x * (F::one() + u.tanh())
}

fn gelu_grad<F: Scalar>(x: F) -> F {
    let c = scalar::<F>(0.7978845608028654);
    let k = scalar::<F>(0.044715);
    let half = scalar::<F>(0.5);
    let three = scalar::<F>(3.0);
    let u = c * (x + k * x * x * x);
    let th = u.tanh();
    let sech2 = F::one() - th * th;
    half * (F::one() + th) + half * x * sech2 * c * (F::one() + three * k * x * x)
}

/// Causal multi-head attention over packed qkv rows.
///
/// `qkv` has shape (B*T, 3d); per head, position `i` attends positions
/// `0..=i`. Returns the concatenated head outputs (B*T, d) and the attention
/// probabilities per (batch, head) for the backward pass.
fn attention_forward<F: Scalar>(
    qkv: &Array2<F>,
    b: usize,
    t: usize,
    n_heads: usize,
) -> (Array2<F>, Vec<Array2<F>>) {
    let d = qkv.ncols() / 3;
    let hd = d / n_heads;
    let scale = scalar::<F>(1.0 / (hd as f64).sqrt());
    let mut out = Array2::zeros((b * t, d));
    let mut probs_all = Vec::with_capacity(b * n_heads);

    for bi in 0..b {
        let rows = qkv.slice(s![bi * t..(bi + 1) * t, ..]);
        for h in 0..n_heads {
            let q = rows.slice(s![.., h * hd..(h + 1) * hd]);
            let k = rows.slice(s![.., d + h * hd..d + (h + 1) * hd]);
            let v = rows.slice(s![.., 2 * d + h * hd..2 * d + (h + 1) * hd]);
            let mut probs = Array2::<F>::zeros((t, t));
            for i in 0..t {
                // Scores over the causal prefix, softmax with max-shift.
                let qi = q.row(i);
                let mut max = F::neg_infinity();
                for j in 0..=i {
                    let s = dot(qi, k.row(j)) * scale;
                    probs[[i, j]] = s;
                    if s > max {
                        max = s;
                    }
                }
                let mut sum = F::zero();
                for j in 0..=i {
                    let e = (probs[[i, j]] - max).exp();
                    probs[[i, j]] = e;
                    sum = sum + e;
                }
                let inv = F::one() / sum;
                for j in 0..=i {
                    probs[[i, j]] = probs[[i, j]] * inv;
                }
                let mut orow = out.row_mut(bi * t + i);
                for j in 0..=i {
                    let p = probs[[i, j]];
                    let vrow = v.row(j);
                    for c in 0..hd {
                        orow[h * hd + c] = orow[h * hd + c] + p * vrow[c];
                    }
                }
            }
            probs_all.push(probs);
        }
    }
    (out, probs_all)
}

fn attention_backward<F: Scalar>(
    qkv: &Array2<F>,
    probs_all: &[Array2<F>],
    d_concat: &Array2<F>,
    b: usize,
    t: usize,
    n_heads: usize,
) -> Array2<F> {
    let d = qkv.ncols() / 3;
    let hd = d / n_heads;
    let scale = scalar::<F>(1.0 / (hd as f64).sqrt());
    let mut d_qkv = Array2::<F>::zeros(qkv.raw_dim());

    for bi in 0..b {
        let rows = qkv.slice(s![bi * t..(bi + 1) * t, ..]);
        for h in 0..n_heads {
            let probs = &probs_all[bi * n_heads + h];
            let q = rows.slice(s![.., h * hd..(h + 1) * hd]);
            let k = rows.slice(s![.., d + h * hd..d + (h + 1) * hd]);
            let v = rows.slice(s![.., 2 * d + h * hd..2 * d + (h + 1) * hd]);
            for i in 0..t {
                let dout = d_concat.slice(s![bi * t + i, h * hd..(h + 1) * hd]);
                // dprobs and the softmax Jacobian, restricted to the prefix.
                let mut dprobs = vec![F::zero(); i + 1];
                let mut dot_pd = F::zero();
                for j in 0..=i {
                    let dp = dot(dout, v.row(j));
                    dprobs[j] = dp;
                    dot_pd = dot_pd + probs[[i, j]] * dp;
                }
                for j in 0..=i {
                    let ds = probs[[i, j]] * (dprobs[j] - dot_pd) * scale;
                    // dq_i += ds * k_j ; dk_j += ds * q_i
                    let krow = k.row(j);
                    let qrow = q.row(i);
                    for c in 0..hd {
                        d_qkv[[bi * t + i, h * hd + c]] =
                            d_qkv[[bi * t + i, h * hd + c]] + ds * krow[c];
                        d_qkv[[bi * t + j, d + h * hd + c]] =
                            d_qkv[[bi * t + j, d + h * hd + c]] + ds * qrow[c];
                    }
                    // dv_j += probs[i,j] * dout
                    let p = probs[[i, j]];
                    for c in 0..hd {
                        d_qkv[[bi * t + j, 2 * d + h * hd + c]] =
                            d_qkv[[bi * t + j, 2 * d + h * hd + c]] + p * dout[c];
                    }
                }
            }
        }
    }
    d_qkv
}

fn dot<F: Scalar>(a: ArrayView1<F>, b: ArrayView1<F>) -> F {
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + *x * *y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 16,
            ctx_len: 12,
            vocab_size: 11,
            dropout: 0.0,
        }
    }

    #[test]
    fn forward_shapes_and_softmax_rows() {
        let model = Gpt::<f32>::init(&tiny_cfg(), 1).unwrap();
        let logits = model.forward(&[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(logits.dim(), (5, 11));
        for row in logits.rows() {
            let max = row.fold(f32::NEG_INFINITY, |a, &b| a.max(b));
            let sum: f32 = row.iter().map(|&l| (l - max).exp()).sum();
            let norm: f32 = row.iter().map(|&l| ((l - max).exp()) / sum).sum();
            assert!((norm - 1.0).abs() < 1e-6, "softmax row sums to {norm}");
        }
    }

    #[test]
    fn causality_is_bitwise() {
        let model = Gpt::<f32>::init(&tiny_cfg(), 2).unwrap();
        let base = vec![1u32, 2, 3, 4, 5, 6, 7];
        let logits_a = model.forward(&base).unwrap();
        for p in 1..base.len() {
            let mut perturbed = base.clone();
            perturbed[p] = (perturbed[p] + 3) % 11;
            let logits_b = model.forward(&perturbed).unwrap();
            for q in 0..p {
                for vidx in 0..11 {
                    assert_eq!(
                        logits_a[[q, vidx]].to_bits(),
                        logits_b[[q, vidx]].to_bits(),
                        "position {q} changed after perturbing {p}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = Gpt::<f32>::init(&tiny_cfg(), 3).unwrap();
        assert!(matches!(
            model.forward(&[]),
            Err(TinyLmError::EmptyInput)
        ));
        assert!(matches!(
            model.forward(&vec![0; 13]),
            Err(TinyLmError::CtxOverflow { .. })
        ));
        assert!(matches!(
            model.forward(&[11]),
            Err(TinyLmError::InvalidToken { .. })
        ));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = Gpt::<f32>::init(&tiny_cfg(), 7).unwrap();
        let b = Gpt::<f32>::init(&tiny_cfg(), 7).unwrap();
        let la = a.forward(&[1, 2, 3]).unwrap();
        let lb = b.forward(&[1, 2, 3]).unwrap();
        assert_eq!(la, lb);
        let c = Gpt::<f32>::init(&tiny_cfg(), 8).unwrap();
        assert_ne!(la, c.forward(&[1, 2, 3]).unwrap());
    }
}
