//! `ordlab` — generate ordering-lab datasets, compute MI ordering plans,
//! permute targets, train and evaluate the small transformer, augment text
//! corpora, run experiment sweeps, and verify the oracle suites.
//!
//! Exit codes: 0 success, 1 validation or I/O error, 2 oracle failure.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ordlab_cli::experiment::{run_experiment, ExperimentConfig};
use ordlab_cli::verify::run_suite;
use ordlab_core::bigram::{
    augment_corpus, document_streams, load_augmented_jsonl, preprocess, save_augmented_jsonl,
    train_bigram, SelectStrategy,
};
use ordlab_core::dataio::{load_jsonl, save_jsonl};
use ordlab_core::mi::{greedy_order, Estimator, OrderingPlan};
use ordlab_core::permute::{apply_to_dataset, identity_plan};
use ordlab_core::taskgen::{generate, TaskKind, TaskSpec};
use ordlab_core::tinylm::{
    eval_exact_match, eval_masked_perplexity, train, Checkpoint, ModelConfig, TrainConfig,
};

#[derive(Parser)]
#[command(name = "ordlab", version, about = "Mutual-information-guided target token ordering lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a task dataset as JSONL.
    Gen {
        #[arg(long)]
        task: TaskKind,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = false)]
        with_operators: bool,
    },
    /// Compute a greedy information-rich ordering plan for a dataset.
    Order {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "factored")]
        estimator: Estimator,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply an ordering plan to a dataset's targets.
    Permute {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the small transformer on a dataset under a plan.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Plan JSON; identity order when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Held-out dataset; defaults to the last 10% of --data.
        #[arg(long)]
        eval_data: Option<PathBuf>,
        #[arg(long)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 250)]
        eval_every: usize,
        #[arg(long, default_value_t = 6)]
        layers: usize,
        #[arg(long, default_value_t = 6)]
        heads: usize,
        #[arg(long, default_value_t = 192)]
        d_model: usize,
        #[arg(long, default_value_t = 32)]
        ctx: usize,
        #[arg(long)]
        stop_accuracy: Option<f64>,
    },
    /// Evaluate a checkpoint: exact match on a dataset, or masked perplexity
    /// on an augmented corpus.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value = "exact", value_parser = ["exact", "ppl"])]
        mode: String,
    },
    /// Train a bigram model on a text corpus and emit the augmented JSONL.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        d: usize,
        #[arg(long, default_value_t = 64)]
        h: usize,
        #[arg(long, default_value_t = 5)]
        neg: usize,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "maxmi")]
        strategy: SelectStrategy,
    },
    /// Run a config-driven strategy sweep.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the module oracle suites and print a machine-readable report.
    Verify {
        #[arg(long, default_value = "all", value_parser = ["mi", "permute", "bigram", "tinylm", "all"])]
        suite: String,
    },
}

fn main() -> ExitCode {
    // Exit 1 for usage/validation problems; clap's default of 2 is reserved
    // for oracle failures here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if err.use_stderr() => {
            eprint!("{err}");
            return ExitCode::from(1);
        }
        Err(help) => {
            print!("{help}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen {
            task,
            count,
            seed,
            out,
            with_operators,
        } => {
            let spec = TaskSpec {
                kind: task,
                count,
                seed,
                with_operators,
            };
            let dataset = generate(&spec)?;
            save_jsonl(&dataset, &out)?;
            println!(
                "{}",
                serde_json::json!({
                    "task": task.name(),
                    "examples": dataset.len(),
                    "l1": dataset.source_len(),
                    "l2": dataset.target_len(),
                    "out": out,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Order {
            input,
            estimator,
            out,
        } => {
            let dataset = load_jsonl(&input)?;
            let plan = greedy_order(&dataset, estimator)?;
            plan.save_json(&out)?;
            println!(
                "{}",
                serde_json::json!({
                    "task_name": plan.task_name,
                    "estimator": estimator.tag(),
                    "perm": plan.perm,
                    "out": out,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Permute { input, plan, out } => {
            let dataset = load_jsonl(&input)?;
            let plan = OrderingPlan::load_json(&plan)?;
            let permuted = apply_to_dataset(&dataset, &plan)?;
            save_jsonl(&permuted, &out)?;
            println!(
                "{}",
                serde_json::json!({"task_name": permuted.task_name, "out": out})
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            data,
            plan,
            eval_data,
            iters,
            seed,
            out,
            eval_every,
            layers,
            heads,
            d_model,
            ctx,
            stop_accuracy,
        } => {
            let dataset = load_jsonl(&data)?;
            let plan = match plan {
                Some(path) => OrderingPlan::load_json(path)?,
                None => identity_plan(dataset.target_len())?,
            };
            let (train_set, eval_set) = match eval_data {
                Some(path) => (dataset, load_jsonl(path)?),
                None => {
                    let held = (dataset.len() / 10).max(1);
                    let split = dataset.len() - held;
                    (dataset.slice(0..split), dataset.slice(split..dataset.len()))
                }
            };
            let model_cfg = ModelConfig {
                n_layers: layers,
                n_heads: heads,
                d_model,
                ctx_len: ctx,
                vocab_size: train_set.vocab.len(),
                dropout: 0.0,
            };
            let mut train_cfg = TrainConfig::small_gpt(iters, seed);
            train_cfg.eval_every = eval_every;
            train_cfg.stop_accuracy = stop_accuracy;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let (ckpt, curve) = train(&model_cfg, &train_cfg, &train_set, &eval_set, &plan)?;
            let ckpt_path = out.join("model.ckpt");
            ckpt.save(&ckpt_path)?;
            let mut csv = String::from("iter,test_accuracy,train_loss\n");
            for k in 0..curve.len() {
                csv.push_str(&format!(
                    "{},{:.6},{:.6}\n",
                    curve.iters[k], curve.test_accuracy[k], curve.train_loss[k]
                ));
            }
            std::fs::write(out.join("curve.csv"), csv)?;
            println!(
                "{}",
                serde_json::json!({
                    "checkpoint": ckpt_path,
                    "final_accuracy": curve.test_accuracy.last(),
                    "iters_run": curve.iters.last(),
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            ckpt,
            data,
            plan,
            mode,
        } => {
            let checkpoint = Checkpoint::load(&ckpt)?;
            match mode.as_str() {
                "exact" => {
                    let dataset = load_jsonl(&data)?;
                    let plan = match plan {
                        Some(path) => OrderingPlan::load_json(path)?,
                        None => checkpoint
                            .plan
                            .clone()
                            .unwrap_or(identity_plan(dataset.target_len())?),
                    };
                    let accuracy = eval_exact_match(&checkpoint, &dataset, &plan)?;
                    println!("{}", serde_json::json!({ "accuracy": accuracy }));
                }
                "ppl" => {
                    let (_vocab, rows) = load_augmented_jsonl(&data)?;
                    let ppl = eval_masked_perplexity(&checkpoint, &rows)?;
                    println!("{}", serde_json::json!({ "perplexity": ppl }));
                }
                other => bail!("unknown mode {other:?}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Augment {
            input,
            out,
            d,
            h,
            neg,
            epochs,
            seed,
            strategy,
        } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            // One document per non-empty line.
            let docs: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            let pre = preprocess(&docs)?;
            let streams = document_streams(&pre);
            let model = train_bigram(&streams, &pre.vocab, d, h, neg, epochs, seed)?;
            let corpus = augment_corpus(&model, &pre, strategy)?;
            save_augmented_jsonl(&corpus, &out)?;
            println!(
                "{}",
                serde_json::json!({
                    "sentences": corpus.sentences.len(),
                    "vocab": corpus.vocab.len(),
                    "joint_evals": corpus.n_joint_evals,
                    "out": out,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let output = run_experiment(&cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "fixed_iter": output.fixed_iter,
                    "ranking": output.ranking,
                    "results_csv": output.results_csv,
                }))?
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let report = run_suite(&suite)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
    }
}
