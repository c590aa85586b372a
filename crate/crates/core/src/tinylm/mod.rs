//! A small decoder-only autoregressive transformer with a deterministic
//! training loop, exact-match evaluation through plan inversion, and masked
//! perplexity.
//!
//! Training rows are `source ++ target` concatenations with source positions
//! excluded from the loss. The defaults mirror the small-GPT setup this
//! artifact studies: 6 layers, 6 heads, 192-dim embeddings, context 32,
//! AdamW at lr 5e-5 / batch 64 / weight decay 0.1.

mod checkpoint;
mod gradcheck;
mod model;
mod train;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{Gpt, Scalar};
pub use train::{
    detect_plateau, eval_exact_match, eval_exact_match_model, eval_masked_perplexity,
    eval_masked_perplexity_model, greedy_decode_batch, loss, loss_grad_norm, plain_text_rows, train, train_text,
    unmasked_count, Batch, MaskedRow, PlateauReport, TextTrainOutput,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TinyLmError {
    #[error("empty input sequence")]
    EmptyInput,
    #[error("input length {len} exceeds context {ctx}")]
    CtxOverflow { len: usize, ctx: usize },
    #[error("token id {id} out of range (vocab {vocab_size})")]
    InvalidToken { id: u32, vocab_size: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("batch is fully masked")]
    FullyMasked,
    #[error("plan length {plan} does not match target length {target}")]
    PlanMismatch { plan: usize, target: usize },
    #[error("curve shorter than window ({len} < {window})")]
    ShortCurve { len: usize, window: usize },
    #[error("mi: {0}")]
    Mi(#[from] crate::mi::MiError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("checkpoint format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TinyLmError>;

/// Transformer architecture settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub ctx_len: usize,
    pub vocab_size: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// The reference setup: 6 blocks, 6 heads, 192-dim embedding, context 32.
    pub fn small_gpt(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 6,
            n_heads: 6,
            d_model: 192,
            ctx_len: 32,
            vocab_size,
            dropout: 0.0,
        }
    }

    /// A one-block toy config for finite-difference gradient checks.
    pub fn tiny(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 1,
            n_heads: 2,
            d_model: 8,
            ctx_len: 16,
            vocab_size,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 || self.ctx_len == 0 {
            return Err(TinyLmError::Config("all dimensions must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(TinyLmError::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.vocab_size < 2 {
            return Err(TinyLmError::Config("vocab_size must be at least 2".into()));
        }
        if self.dropout != 0.0 {
            return Err(TinyLmError::Config(
                "dropout must be 0.0 (training is fully deterministic)".into(),
            ));
        }
        Ok(())
    }
}

/// Optimizer and loop settings. `lr = 0` is permitted as a degenerate
/// control (the optimizer becomes a no-op).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub weight_decay: f64,
    pub max_iters: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Stop once held-out accuracy reaches this level (validation early stop).
    #[serde(default)]
    pub stop_accuracy: Option<f64>,
}

impl TrainConfig {
    pub fn small_gpt(max_iters: usize, seed: u64) -> Self {
        TrainConfig {
            lr: 5e-5,
            batch: 64,
            weight_decay: 0.1,
            max_iters,
            eval_every: 250,
            seed,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            stop_accuracy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr < 0.0 || self.weight_decay < 0.0 {
            return Err(TinyLmError::Config("negative lr or weight decay".into()));
        }
        if self.batch == 0 || self.max_iters == 0 || self.eval_every == 0 {
            return Err(TinyLmError::Config(
                "batch, max_iters and eval_every must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TinyLmError::Config("betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Accuracy/loss trajectory sampled every `eval_every` iterations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainCurve {
    pub iters: Vec<usize>,
    pub test_accuracy: Vec<f64>,
    pub train_loss: Vec<f64>,
}

impl TrainCurve {
    pub fn len(&self) -> usize {
        self.iters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    /// Accuracy at the latest eval point at or before `iter`.
    pub fn accuracy_at(&self, iter: usize) -> Option<f64> {
        self.iters
            .iter()
            .rposition(|&i| i <= iter)
            .map(|idx| self.test_accuracy[idx])
    }

    pub fn max_accuracy(&self) -> f64 {
        self.test_accuracy.iter().copied().fold(0.0, f64::max)
    }
}
