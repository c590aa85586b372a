//! Shared fixtures for the criterion benchmarks.

use ordlab_core::taskgen::{generate, TaskKind, TaskSpec};
use ordlab_core::SeqDataset;

pub fn addition_dataset(count: usize) -> SeqDataset {
    generate(&TaskSpec::new(TaskKind::Addition3, count, 1)).expect("valid spec")
}

pub fn mlc_dataset(count: usize) -> SeqDataset {
    generate(&TaskSpec::new(TaskKind::SyntheticMlc, count, 1)).expect("valid spec")
}
