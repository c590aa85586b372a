//! Target-token ordering laboratory.
//!
//! Everything needed to study how the prediction order of target tokens
//! affects autoregressive sequence training at desk scale:
//!
//! - [`dataio`] — aligned (source, target) token datasets and their JSONL codec
//! - [`taskgen`] — seeded generators for arithmetic tasks and a synthetic
//!   multi-label classification task with planted label structure
//! - [`mi`] — plug-in mutual information over discrete token columns and the
//!   greedy information-rich ordering algorithm
//! - [`permute`] — reversible application of ordering plans to datasets and
//!   inversion of model outputs
//! - [`bigram`] — open-vocabulary MI scores from a logistic bigram model, and
//!   the [START]/[END] sentence augmentation pipeline
//! - [`tinylm`] — a from-scratch decoder-only transformer with a deterministic
//!   training loop, exact-match evaluation and masked perplexity

pub mod bigram;
pub mod dataio;
pub mod mi;
pub mod permute;
pub mod taskgen;
pub mod tinylm;

pub use dataio::{SeqDataset, SeqExample, Vocab};
pub use mi::{Estimator, MiEstimate, OrderingPlan};
pub use taskgen::{TaskKind, TaskSpec};
pub use tinylm::{ModelConfig, TrainConfig, TrainCurve};
