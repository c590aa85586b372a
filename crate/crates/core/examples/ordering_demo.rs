//! Small-scale demonstration of the ordering effect: trains a one-block
//! model on 3-digit addition under plain and reverse target orders and
//! prints both accuracy curves. Takes a couple of minutes on a laptop.
//!
//! Run: cargo run --release --example ordering_demo

use ordlab_core::permute::{identity_plan, reverse_plan};
use ordlab_core::taskgen::{generate, TaskKind, TaskSpec};
use ordlab_core::tinylm::{train, ModelConfig, TrainConfig};

fn main() {
    let ds = generate(&TaskSpec::new(TaskKind::Addition3, 4000, 1)).unwrap();
    let train_set = ds.slice(0..3500);
    let eval_set = ds.slice(3500..4000);

    let model_cfg = ModelConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 64,
        ctx_len: 16,
        vocab_size: ds.vocab.len(),
        dropout: 0.0,
    };
    let mut train_cfg = TrainConfig::small_gpt(1200, 1);
    train_cfg.lr = 1e-3;
    train_cfg.batch = 32;
    train_cfg.eval_every = 150;

    for (name, plan) in [
        ("plain", identity_plan(4).unwrap()),
        ("reverse", reverse_plan(4).unwrap()),
    ] {
        let (_, curve) = train(&model_cfg, &train_cfg, &train_set, &eval_set, &plan).unwrap();
        println!("{name}:");
        for k in 0..curve.len() {
            println!(
                "  iter {:>5}  loss {:.4}  exact-match {:.3}",
                curve.iters[k], curve.train_loss[k], curve.test_accuracy[k]
            );
        }
    }
}
