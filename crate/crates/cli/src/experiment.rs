//! Config-driven strategy sweeps: build plans, permute, train each
//! (strategy, seed) cell, and compare everything at a common fixed
//! iteration set by the plateau of the best strategy.
//!
//! Cells run in parallel; each cell is internally single threaded and
//! deterministic, and the aggregation order is fixed by the config, so a
//! rerun reproduces `results.csv` byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ordlab_core::mi::{greedy_order, Estimator, OrderingPlan};
use ordlab_core::permute::{identity_plan, plan_from_perm, reverse_plan};
use ordlab_core::taskgen::{generate, TaskSpec};
use ordlab_core::tinylm::{detect_plateau, train, ModelConfig, TrainConfig, TrainCurve};

use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Plain,
    Reverse,
    MaxmiJoint,
    MaxmiFactored,
    AllPerms,
    Tfidf,
    Pcond,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Plain => "plain",
            Strategy::Reverse => "reverse",
            Strategy::MaxmiJoint => "maxmi_joint",
            Strategy::MaxmiFactored => "maxmi_factored",
            Strategy::AllPerms => "all_perms",
            Strategy::Tfidf => "tfidf",
            Strategy::Pcond => "pcond",
        }
    }
}

/// Architecture knobs without the vocab size, which always comes from the
/// generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub ctx_len: usize,
    #[serde(default)]
    pub dropout: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n_layers: 6,
            n_heads: 6,
            d_model: 192,
            ctx_len: 32,
            dropout: 0.0,
        }
    }
}

impl ModelParams {
    pub fn with_vocab(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_model: self.d_model,
            ctx_len: self.ctx_len,
            vocab_size,
            dropout: self.dropout,
        }
    }
}

fn default_eval_count() -> usize {
    1000
}
fn default_plateau_window() -> usize {
    4
}
fn default_plateau_slope_eps() -> f64 {
    0.0025
}
fn default_save_checkpoints() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub model: ModelParams,
    pub train: TrainConfig,
    /// Held-out examples taken from the end of the generated set.
    #[serde(default = "default_eval_count")]
    pub eval_count: usize,
    /// Evaluation iteration override; otherwise the plateau of the best
    /// strategy decides.
    #[serde(default)]
    pub fixed_iters: Option<usize>,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(default = "default_plateau_window")]
    pub plateau_window: usize,
    #[serde(default = "default_plateau_slope_eps")]
    pub plateau_slope_eps: f64,
    #[serde(default = "default_save_checkpoints")]
    pub save_checkpoints: bool,
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(factorial(n));
    let mut items: Vec<usize> = (0..n).collect();
    permute_rec(&mut items, 0, &mut out);
    out.sort();
    out
}

fn permute_rec(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute_rec(items, k + 1, out);
        items.swap(k, i);
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| "parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            bail!("strategies must be nonempty");
        }
        if self.seeds.is_empty() {
            bail!("seeds must be nonempty");
        }
        if self.eval_count == 0 || self.eval_count >= self.task.count {
            bail!(
                "eval_count {} must be in 1..count {}",
                self.eval_count,
                self.task.count
            );
        }
        let (_, l2) = self.task.kind.shape();
        for s in &self.strategies {
            match s {
                Strategy::Tfidf | Strategy::Pcond => {
                    bail!(
                        "strategy {:?} selects words for text corpora; use `ordlab augment`",
                        s.name()
                    );
                }
                Strategy::AllPerms => {
                    if factorial(l2) > 720 {
                        bail!("all_perms needs L2! <= 720, got L2 = {l2}");
                    }
                }
                _ => {}
            }
        }
        self.train.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        if self.plateau_window < 2 {
            bail!("plateau_window must be at least 2");
        }
        Ok(())
    }
}

/// One (strategy, seed) outcome at the common fixed iteration.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub strategy: String,
    pub perm: Vec<usize>,
    pub seed: u64,
    pub fixed_iter_accuracy: f64,
    pub max_accuracy: f64,
    pub plateau_iter: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRank {
    pub rank: usize,
    pub strategy: String,
    pub mean_fixed_iter_accuracy: f64,
    pub mean_plateau_iter: f64,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub ranking: Vec<StrategyRank>,
    pub fixed_iter: usize,
    pub results_csv: PathBuf,
}

struct Cell {
    strategy: String,
    perm: Vec<usize>,
    seed: u64,
    plan: OrderingPlan,
}

struct CellResult {
    curve: TrainCurve,
}

/// Mean curve across seeds on the shared eval grid; cells that stopped early
/// (accuracy saturated) carry their final value forward.
fn mean_curve(curves: &[&TrainCurve]) -> TrainCurve {
    let grid: &TrainCurve = curves
        .iter()
        .max_by_key(|c| c.len())
        .expect("at least one curve");
    let mut out = TrainCurve::default();
    for (k, &iter) in grid.iters.iter().enumerate() {
        let mut acc = 0.0;
        let mut loss = 0.0;
        for c in curves {
            let idx = k.min(c.len() - 1);
            acc += c.test_accuracy[idx];
            loss += c.train_loss[idx];
        }
        out.iters.push(iter);
        out.test_accuracy.push(acc / curves.len() as f64);
        out.train_loss.push(loss / curves.len() as f64);
    }
    out
}

fn build_plans(cfg: &ExperimentConfig, train_set: &ordlab_core::SeqDataset) -> Result<Vec<(String, OrderingPlan)>> {
    let l2 = train_set.target_len();
    let mut plans = Vec::new();
    for strategy in &cfg.strategies {
        match strategy {
            Strategy::Plain => plans.push(("plain".to_string(), identity_plan(l2)?)),
            Strategy::Reverse => plans.push(("reverse".to_string(), reverse_plan(l2)?)),
            Strategy::MaxmiJoint => plans.push((
                "maxmi_joint".to_string(),
                greedy_order(train_set, Estimator::JointSource)?,
            )),
            Strategy::MaxmiFactored => plans.push((
                "maxmi_factored".to_string(),
                greedy_order(train_set, Estimator::FactoredSum)?,
            )),
            Strategy::AllPerms => {
                for perm in all_permutations(l2) {
                    let tag: String = perm.iter().map(|p| p.to_string()).collect();
                    plans.push((format!("perm_{tag}"), plan_from_perm(perm)?));
                }
            }
            Strategy::Tfidf | Strategy::Pcond => unreachable!("rejected by validate"),
        }
    }
    Ok(plans)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    fs::create_dir_all(cfg.out_dir.join("plans"))?;
    fs::write(
        cfg.out_dir.join("config.json"),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;

    let dataset = generate(&cfg.task)?;
    let split = dataset.len() - cfg.eval_count;
    let train_set = dataset.slice(0..split);
    let eval_set = dataset.slice(split..dataset.len());
    let model_cfg = cfg.model.with_vocab(dataset.vocab.len());

    let plans = build_plans(cfg, &train_set)?;
    for (name, plan) in &plans {
        plan.save_json(cfg.out_dir.join("plans").join(format!("{name}.json")))?;
    }

    if cfg.save_checkpoints {
        fs::create_dir_all(cfg.out_dir.join("checkpoints"))?;
    }
    let cells: Vec<Cell> = plans
        .iter()
        .flat_map(|(name, plan)| {
            cfg.seeds.iter().map(move |&seed| Cell {
                strategy: name.clone(),
                perm: plan.perm.clone(),
                seed,
                plan: plan.clone(),
            })
        })
        .collect();

    // Independent cells in parallel; each is single-threaded deterministic
    // and the collection preserves input order.
    let results: Vec<Result<CellResult>> = cells
        .par_iter()
        .map(|cell| {
            let mut train_cfg = cfg.train.clone();
            train_cfg.seed = cell.seed;
            let (ckpt, curve) = train(&model_cfg, &train_cfg, &train_set, &eval_set, &cell.plan)
                .map_err(|e| anyhow::anyhow!("cell {}/{}: {e}", cell.strategy, cell.seed))?;
            if cfg.save_checkpoints {
                let path = cfg
                    .out_dir
                    .join("checkpoints")
                    .join(format!("{}_seed{}.ckpt", cell.strategy, cell.seed));
                ckpt.save(&path)
                    .map_err(|e| anyhow::anyhow!("saving checkpoint: {e}"))?;
            }
            Ok(CellResult { curve })
        })
        .collect();
    let results: Vec<CellResult> = results.into_iter().collect::<Result<_>>()?;

    // Fixed iteration: explicit override, else plateau of the strategy with
    // the best mean max accuracy.
    let strategy_names: Vec<String> = plans.iter().map(|(n, _)| n.clone()).collect();
    let curves_of = |name: &str| -> Vec<&TrainCurve> {
        cells
            .iter()
            .zip(&results)
            .filter(|(c, _)| c.strategy == name)
            .map(|(_, r)| &r.curve)
            .collect()
    };
    let fixed_iter = match cfg.fixed_iters {
        Some(it) => it,
        None => {
            let best = strategy_names
                .iter()
                .max_by(|a, b| {
                    let mean = |n: &str| {
                        let cs = curves_of(n);
                        cs.iter().map(|c| c.max_accuracy()).sum::<f64>() / cs.len() as f64
                    };
                    mean(a)
                        .partial_cmp(&mean(b))
                        .expect("accuracies are finite")
                })
                .expect("nonempty strategies")
                .clone();
            let mean = mean_curve(&curves_of(&best));
            detect_plateau(&mean, cfg.plateau_window.min(mean.len()), cfg.plateau_slope_eps)
                .map(|r| r.iteration)
                .unwrap_or_else(|_| *mean.iters.last().expect("nonempty curve"))
        }
    };

    let mut rows = Vec::with_capacity(cells.len());
    for (cell, result) in cells.iter().zip(&results) {
        let plateau = detect_plateau(
            &result.curve,
            cfg.plateau_window.min(result.curve.len()),
            cfg.plateau_slope_eps,
        )
        .map(|r| r.iteration)
        .unwrap_or_else(|_| *result.curve.iters.last().expect("nonempty"));
        rows.push(ResultRow {
            strategy: cell.strategy.clone(),
            perm: cell.perm.clone(),
            seed: cell.seed,
            fixed_iter_accuracy: result
                .curve
                .accuracy_at(fixed_iter)
                .unwrap_or_else(|| result.curve.test_accuracy[0]),
            max_accuracy: result.curve.max_accuracy(),
            plateau_iter: plateau,
        });
    }

    let results_csv = cfg.out_dir.join("results.csv");
    report::write_results_csv(&results_csv, &rows)?;
    report::write_curves_csv(
        cfg.out_dir.join("curves.csv"),
        cells.iter().map(|c| (c.strategy.as_str(), c.seed)),
        results.iter().map(|r| &r.curve),
    )?;

    let mean_curves: Vec<(String, TrainCurve)> = strategy_names
        .iter()
        .map(|n| (n.clone(), mean_curve(&curves_of(n))))
        .collect();
    report::write_curves_svg(cfg.out_dir.join("curves.svg"), &mean_curves, fixed_iter)?;

    let ranking = rank_strategies(&rows);
    let summary = serde_json::json!({
        "fixed_iter": fixed_iter,
        "ranking": ranking,
    });
    fs::write(
        cfg.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    Ok(ExperimentOutput {
        rows,
        ranking,
        fixed_iter,
        results_csv,
    })
}

/// Strategies sorted by mean fixed-iteration accuracy, ties broken by the
/// earlier mean plateau.
pub fn rank_strategies(rows: &[ResultRow]) -> Vec<StrategyRank> {
    let mut order: Vec<String> = Vec::new();
    for row in rows {
        if !order.contains(&row.strategy) {
            order.push(row.strategy.clone());
        }
    }
    let mut ranked: Vec<StrategyRank> = order
        .into_iter()
        .map(|name| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| r.strategy == name).collect();
            let n = group.len() as f64;
            StrategyRank {
                rank: 0,
                strategy: name,
                mean_fixed_iter_accuracy: group.iter().map(|r| r.fixed_iter_accuracy).sum::<f64>()
                    / n,
                mean_plateau_iter: group.iter().map(|r| r.plateau_iter as f64).sum::<f64>() / n,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.mean_fixed_iter_accuracy
            .partial_cmp(&a.mean_fixed_iter_accuracy)
            .expect("finite")
            .then(
                a.mean_plateau_iter
                    .partial_cmp(&b.mean_plateau_iter)
                    .expect("finite"),
            )
    });
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    ranked
}
