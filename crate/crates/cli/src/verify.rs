//! Machine-checkable oracle suites behind `ordlab verify`: brute-force MI
//! equivalence, permutation round-trips, DPI Monte-Carlo, gradient checks,
//! and planted-signal word selection. Every check is deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ordlab_core::bigram::{
    augment_corpus, document_streams, preprocess, select_word_with, train_bigram, MarginalTable,
    SelectStrategy,
};
use ordlab_core::mi::{dpi_check, entropy, entropy_generic, mi_exact, ChainSpec, OrderingPlan};
use ordlab_core::permute::{apply_plan, plan_from_perm, restore_output};
use ordlab_core::tinylm::{grad_check, unmasked_count, Gpt, ModelConfig};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

pub fn run_suite(suite: &str) -> anyhow::Result<VerifyReport> {
    let checks = match suite {
        "mi" => mi_suite(),
        "permute" => permute_suite(),
        "bigram" => bigram_suite(),
        "tinylm" => tinylm_suite(),
        "all" => {
            let mut all = mi_suite();
            all.extend(permute_suite());
            all.extend(bigram_suite());
            all.extend(tinylm_suite());
            all
        }
        other => anyhow::bail!("unknown suite {other:?} (expected mi|permute|bigram|tinylm|all)"),
    };
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        suite: suite.to_string(),
        checks,
        all_pass,
    })
}

// ---------------------------------------------------------------------------
// mi suite
// ---------------------------------------------------------------------------

/// Independent oracle: dense double-sum over the full (value, value) grid,
/// zero cells contributing nothing.
pub fn brute_force_mi(x: &[u32], y: &[u32]) -> f64 {
    let n = x.len() as f64;
    let vx = (*x.iter().max().unwrap() + 1) as usize;
    let vy = (*y.iter().max().unwrap() + 1) as usize;
    let mut joint = vec![vec![0u64; vy]; vx];
    let mut mx = vec![0u64; vx];
    let mut my = vec![0u64; vy];
    for (&a, &b) in x.iter().zip(y.iter()) {
        joint[a as usize][b as usize] += 1;
        mx[a as usize] += 1;
        my[b as usize] += 1;
    }
    let mut mi = 0.0;
    for a in 0..vx {
        for b in 0..vy {
            if joint[a][b] == 0 {
                continue;
            }
            let p_ab = joint[a][b] as f64 / n;
            let p_a = mx[a] as f64 / n;
            let p_b = my[b] as f64 / n;
            mi += p_ab * (p_ab / (p_a * p_b)).ln();
        }
    }
    mi
}

pub fn random_table(rng: &mut ChaCha8Rng, max_v: u32, max_n: usize) -> (Vec<u32>, Vec<u32>) {
    let n = rng.gen_range(2..=max_n);
    let vx = rng.gen_range(1..=max_v);
    let vy = rng.gen_range(1..=max_v);
    let couple = rng.gen_bool(0.5);
    let x: Vec<u32> = (0..n).map(|_| rng.gen_range(0..vx)).collect();
    let y: Vec<u32> = x
        .iter()
        .map(|&a| {
            if couple && rng.gen_bool(0.6) {
                a % vy
            } else {
                rng.gen_range(0..vy)
            }
        })
        .collect();
    (x, y)
}

/// MI oracle equivalence over `n_tables` random tables at `tol`.
pub fn mi_brute_force_check(n_tables: usize, tol: f64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_tables {
        let (x, y) = random_table(&mut rng, 8, 200);
        let fast = mi_exact(&x, &y).expect("valid table").value;
        let brute = brute_force_mi(&x, &y);
        worst = worst.max((fast - brute).abs());

        let sym = mi_exact(&y, &x).expect("valid table").value;
        worst = worst.max((fast - sym).abs());

        let ident = mi_exact(&x, &x).expect("valid table").value;
        let h = entropy(&x).expect("nonempty");
        worst = worst.max((ident - h).abs());
    }
    Check::new(
        "mi_brute_force_equivalence",
        worst < tol,
        format!("{n_tables} tables, worst abs err {worst:.3e} (tol {tol:.0e})"),
    )
}

fn mi_bounds_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    let mut detail = String::from("value in [0, min(H(x), H(y)) + 1e-9]");
    for _ in 0..200 {
        let (x, y) = random_table(&mut rng, 6, 120);
        let est = mi_exact(&x, &y).expect("valid table");
        let hx = entropy_generic(&x).unwrap();
        let hy = entropy_generic(&y).unwrap();
        if est.value < 0.0 || est.value > hx.min(hy) + 1e-9 {
            ok = false;
            detail = format!("violated: mi={} hx={hx} hy={hy}", est.value);
            break;
        }
    }
    Check::new("mi_nonnegativity_and_bound", ok, detail)
}

pub fn random_chain(rng: &mut ChaCha8Rng, max_support: usize) -> ChainSpec {
    let sizes: [usize; 3] = [
        rng.gen_range(2..=max_support),
        rng.gen_range(2..=max_support),
        rng.gen_range(2..=max_support),
    ];
    let mut row = |n: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    };
    ChainSpec {
        input_dist: row(sizes[0]),
        channel_mid: (0..sizes[0]).map(|_| row(sizes[1])).collect(),
        channel_out: (0..sizes[1]).map(|_| row(sizes[2])).collect(),
    }
}

/// DPI holds on `n_chains` random Markov chains sampled at `n_samples`.
pub fn dpi_monte_carlo_check(n_chains: usize, n_samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let mut worst_margin = f64::INFINITY;
    for i in 0..n_chains {
        let chain = random_chain(&mut rng, 6);
        let report = dpi_check(&chain, n_samples, seed.wrapping_add(i as u64)).expect("valid");
        let margin = report.mi_mid_output + report.eps_stat - report.mi_input_output;
        worst_margin = worst_margin.min(margin);
        if !report.holds {
            failures += 1;
        }
    }
    Check::new(
        "dpi_monte_carlo",
        failures == 0,
        format!("{n_chains} chains x {n_samples} samples, failures {failures}, worst margin {worst_margin:.4}"),
    )
}

fn greedy_exhaustive_check() -> Check {
    use ordlab_core::mi::{greedy_order, mi_source_vs_target, Estimator};
    use ordlab_core::taskgen::{gen_synthetic_mlc, TaskKind, TaskSpec};
    let ds = gen_synthetic_mlc(&TaskSpec::new(TaskKind::SyntheticMlc, 600, 31)).unwrap();
    for est in [Estimator::JointSource, Estimator::FactoredSum] {
        let plan = greedy_order(&ds, est).unwrap();
        // Each greedy pick must equal an independent exhaustive argmax over
        // the remaining candidates.
        let mut selected: Vec<usize> = Vec::new();
        for &pick in &plan.perm {
            let mut remaining: Vec<usize> = (0..ds.target_len())
                .filter(|j| !selected.contains(j))
                .collect();
            remaining.sort_unstable();
            let best = remaining
                .iter()
                .map(|&j| {
                    (
                        j,
                        mi_source_vs_target(&ds, &selected, j, est).unwrap().value,
                    )
                })
                .fold((usize::MAX, f64::NEG_INFINITY), |acc, (j, v)| {
                    if v > acc.1 {
                        (j, v)
                    } else {
                        acc
                    }
                });
            if pick != best.0 {
                return Check::new(
                    "greedy_matches_exhaustive_argmax",
                    false,
                    format!("{est:?}: greedy picked {pick}, exhaustive argmax {}", best.0),
                );
            }
            selected.push(pick);
        }
    }
    Check::new(
        "greedy_matches_exhaustive_argmax",
        true,
        "both estimators, every step",
    )
}

pub fn mi_suite() -> Vec<Check> {
    vec![
        mi_brute_force_check(200, 1e-12, 41),
        mi_bounds_check(42),
        dpi_monte_carlo_check(30, 20_000, 43),
        greedy_exhaustive_check(),
    ]
}

// ---------------------------------------------------------------------------
// permute suite
// ---------------------------------------------------------------------------

/// Round-trip and multiset preservation for one plan over random targets.
pub fn plan_roundtrip_check(plan: &OrderingPlan, targets: usize, seed: u64) -> Check {
    if let Err(e) = plan.validate() {
        return Check::new("plan_roundtrip", false, format!("invalid plan: {e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l2 = plan.perm.len();
    for _ in 0..targets {
        let target: Vec<u32> = (0..l2).map(|_| rng.gen_range(0..10)).collect();
        let applied = apply_plan(&target, plan).expect("lengths match");
        let mut sorted_a = applied.clone();
        let mut sorted_t = target.clone();
        sorted_a.sort_unstable();
        sorted_t.sort_unstable();
        if sorted_a != sorted_t {
            return Check::new("plan_roundtrip", false, "token multiset not preserved");
        }
        let restored = restore_output(&applied, plan).expect("lengths match");
        if restored != target {
            return Check::new(
                "plan_roundtrip",
                false,
                format!("restore(apply(x)) != x for perm {:?}", plan.perm),
            );
        }
    }
    Check::new("plan_roundtrip", true, format!("{targets} targets"))
}

fn heap_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            rec(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..n).collect(), 0, &mut out);
    out
}

/// Exhaustive round-trip over every permutation for each L2, with `targets`
/// random targets per plan.
pub fn exhaustive_roundtrip_check(l2_range: std::ops::RangeInclusive<usize>, targets: usize) -> Check {
    let mut plans = 0usize;
    for l2 in l2_range.clone() {
        for perm in heap_permutations(l2) {
            let plan = plan_from_perm(perm).expect("valid permutation");
            let check = plan_roundtrip_check(&plan, targets, 7 + l2 as u64);
            if !check.pass {
                return check;
            }
            plans += 1;
        }
    }
    Check::new(
        "permute_exhaustive_roundtrip",
        true,
        format!(
            "L2 in {:?}, {plans} plans x {targets} targets, zero failures",
            l2_range
        ),
    )
}

pub fn permute_suite() -> Vec<Check> {
    vec![exhaustive_roundtrip_check(2..=5, 100)]
}

// ---------------------------------------------------------------------------
// bigram suite
// ---------------------------------------------------------------------------

/// A corpus where every sentence ends with a context word and the next
/// sentence contains that context's planted collocate once, among common
/// filler words. Returns (documents, context -> collocate pairs).
pub fn planted_collocate_corpus(
    docs: usize,
    chain_len: usize,
    seed: u64,
) -> (Vec<String>, Vec<(String, String)>) {
    let contexts = ["anchor", "basalt", "copper", "dynamo", "ember"];
    let collocates = ["quartz", "violet", "marble", "falcon", "indigo"];
    let fillers = [
        "rock", "tree", "lamp", "door", "fish", "bird", "moon", "star",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::with_capacity(docs);
    for _ in 0..docs {
        let mut sentences = Vec::with_capacity(chain_len + 1);
        let mut ctx_idx = rng.gen_range(0..contexts.len());
        let filler = |rng: &mut ChaCha8Rng| fillers[rng.gen_range(0..fillers.len())];
        sentences.push(format!(
            "{} {} {}",
            filler(&mut rng),
            filler(&mut rng),
            contexts[ctx_idx]
        ));
        for _ in 0..chain_len {
            let next_ctx = rng.gen_range(0..contexts.len());
            // The collocate of the PREVIOUS context opens the sentence body.
            let mut words = vec![collocates[ctx_idx].to_string()];
            for _ in 0..3 {
                words.push(filler(&mut rng).to_string());
            }
            words.push(contexts[next_ctx].to_string());
            sentences.push(words.join(" "));
            ctx_idx = next_ctx;
        }
        corpus.push(sentences.join(". "));
    }
    let pairs = contexts
        .iter()
        .zip(collocates.iter())
        .map(|(c, m)| (c.to_string(), m.to_string()))
        .collect();
    (corpus, pairs)
}

/// Trains a bigram model on the planted corpus and measures how often the
/// MI-score selector picks the planted collocate.
pub fn planted_selection_rate(seed: u64) -> anyhow::Result<(f64, usize)> {
    let (corpus, pairs) = planted_collocate_corpus(12, 24, seed);
    let pre = preprocess(&corpus)?;
    let streams = document_streams(&pre);
    let model = train_bigram(&streams, &pre.vocab, 16, 24, 4, 18, seed)?;
    let table = MarginalTable::build(&model)?;

    let collocate_of: std::collections::HashMap<u32, u32> = pairs
        .iter()
        .map(|(c, m)| {
            (
                pre.vocab.id_of(c).expect("context in vocab"),
                pre.vocab.id_of(m).expect("collocate in vocab"),
            )
        })
        .collect();

    let mut hits = 0usize;
    let mut total = 0usize;
    for pair in pre.sentences.windows(2) {
        let (prev, sentence) = (&pair[0], &pair[1]);
        if prev.doc != sentence.doc {
            continue;
        }
        let context = *prev.lemma_ids.last().unwrap();
        let Some(&planted) = collocate_of.get(&context) else {
            continue;
        };
        if !sentence.lemma_ids.contains(&planted) {
            continue;
        }
        total += 1;
        let picked = select_word_with(&model, &table, context, &sentence.lemma_ids)?;
        if picked == planted {
            hits += 1;
        }
    }
    anyhow::ensure!(total > 50, "corpus too small: {total} eligible sentences");
    Ok((hits as f64 / total as f64, total))
}

fn bigram_planted_check() -> Check {
    match planted_selection_rate(5) {
        Ok((rate, total)) => Check::new(
            "bigram_planted_collocate_selection",
            rate >= 0.95,
            format!("picked planted collocate in {:.1}% of {total} sentences", rate * 100.0),
        ),
        Err(e) => Check::new("bigram_planted_collocate_selection", false, e.to_string()),
    }
}

fn bigram_augment_roundtrip_check() -> Check {
    let (corpus, _) = planted_collocate_corpus(4, 10, 11);
    let pre = preprocess(&corpus).unwrap();
    let streams = document_streams(&pre);
    let model = train_bigram(&streams, &pre.vocab, 8, 12, 3, 6, 11).unwrap();
    let aug = augment_corpus(&model, &pre, SelectStrategy::MaxMi).unwrap();
    for (sentence, orig) in aug.sentences.iter().zip(&pre.sentences) {
        let stripped: Vec<&str> = sentence.augmented[3..]
            .iter()
            .map(|&id| aug.vocab.symbol(id).unwrap())
            .collect();
        let original: Vec<&str> = orig.surfaces.iter().map(String::as_str).collect();
        if stripped != original {
            return Check::new("bigram_augment_strip_roundtrip", false, "strip mismatch");
        }
    }
    // Mask accounting: identical unmasked counts, plain vs augmented.
    let plain = unmasked_count(&aug.plain_rows());
    let augmented = unmasked_count(&aug.masked_rows());
    if plain != augmented {
        return Check::new(
            "bigram_augment_strip_roundtrip",
            false,
            format!("unmasked counts differ: plain {plain}, augmented {augmented}"),
        );
    }
    Check::new(
        "bigram_augment_strip_roundtrip",
        true,
        format!("{} sentences, {} scored positions", aug.sentences.len(), plain),
    )
}

pub fn bigram_suite() -> Vec<Check> {
    vec![bigram_planted_check(), bigram_augment_roundtrip_check()]
}

// ---------------------------------------------------------------------------
// tinylm suite
// ---------------------------------------------------------------------------

fn grad_check_check() -> Check {
    match grad_check(&ModelConfig::tiny(11), 1e-4, 3) {
        Ok(report) => Check::new(
            "tinylm_grad_check",
            report.pass,
            format!(
                "max rel err {:.3e} over {} params",
                report.max_rel_err, report.n_params
            ),
        ),
        Err(e) => Check::new("tinylm_grad_check", false, e.to_string()),
    }
}

fn causality_check() -> Check {
    let cfg = ModelConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 16,
        ctx_len: 12,
        vocab_size: 11,
        dropout: 0.0,
    };
    let model = Gpt::<f32>::init(&cfg, 2).unwrap();
    let base = vec![1u32, 2, 3, 4, 5, 6, 7, 8];
    let logits_a = model.forward(&base).unwrap();
    for p in 1..base.len() {
        let mut perturbed = base.clone();
        perturbed[p] = (perturbed[p] + 5) % 11;
        let logits_b = model.forward(&perturbed).unwrap();
        for q in 0..p {
            for v in 0..11 {
                if logits_a[[q, v]].to_bits() != logits_b[[q, v]].to_bits() {
                    return Check::new(
                        "tinylm_causality_bitwise",
                        false,
                        format!("logits at {q} changed after perturbing {p}"),
                    );
                }
            }
        }
    }
    Check::new("tinylm_causality_bitwise", true, "exact over all prefixes")
}

fn init_loss_check() -> Check {
    use ndarray::Array2;
    let vocab_size = 10usize;
    let cfg = ModelConfig::small_gpt(vocab_size);
    let model = Gpt::<f32>::init(&cfg, 7).unwrap();
    let tokens = Array2::from_shape_fn((16, 10), |(b, t)| ((b * 3 + t) % vocab_size) as u32);
    let targets = Array2::from_shape_fn((16, 10), |(b, t)| ((b + t * 5) % vocab_size) as u32);
    let mask = Array2::from_elem((16, 10), true);
    let batch = ordlab_core::tinylm::Batch {
        inputs: tokens,
        targets,
        mask,
    };
    let loss = ordlab_core::tinylm::loss(&model.clone(), &batch).unwrap();
    let expect = (vocab_size as f64).ln();
    let rel = (loss - expect).abs() / expect;
    Check::new(
        "tinylm_init_loss_near_uniform",
        rel < 0.05,
        format!("loss {loss:.4} vs ln({vocab_size}) = {expect:.4} ({:.2}% off)", rel * 100.0),
    )
}

fn softmax_rows_check() -> Check {
    let cfg = ModelConfig::tiny(13);
    let model = Gpt::<f32>::init(&cfg, 9).unwrap();
    let logits = model.forward(&[1, 2, 3, 4, 5, 6]).unwrap();
    let mut worst = 0.0f64;
    for row in logits.rows() {
        let max = row.fold(f32::NEG_INFINITY, |a, &b| a.max(b));
        let sum: f64 = row.iter().map(|&l| ((l - max) as f64).exp()).sum();
        let norm: f64 = row.iter().map(|&l| ((l - max) as f64).exp() / sum).sum();
        worst = worst.max((norm - 1.0).abs());
    }
    Check::new(
        "tinylm_softmax_rows_normalized",
        worst < 1e-6,
        format!("worst |sum - 1| = {worst:.2e}"),
    )
}

pub fn tinylm_suite() -> Vec<Check> {
    vec![
        grad_check_check(),
        causality_check(),
        init_loss_check(),
        softmax_rows_check(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_checkout_all_suites_pass() {
        for suite in ["mi", "permute", "bigram", "tinylm"] {
            let report = run_suite(suite).unwrap();
            for check in &report.checks {
                assert!(check.pass, "{}: {} — {}", suite, check.name, check.detail);
            }
            assert!(report.all_pass);
        }
    }

    #[test]
    fn corrupted_perm_fails_permute_check() {
        let plan = OrderingPlan {
            task_name: String::new(),
            estimator: None,
            perm: vec![0, 0, 1],
            step_scores: vec![],
        };
        let check = plan_roundtrip_check(&plan, 10, 1);
        assert!(!check.pass);
    }

    #[test]
    fn report_json_schema() {
        let report = run_suite("permute").unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert!(json.get("suite").and_then(|v| v.as_str()).is_some());
        assert!(json.get("all_pass").and_then(|v| v.as_bool()).is_some());
        let checks = json.get("checks").and_then(|v| v.as_array()).unwrap();
        assert!(!checks.is_empty());
        for check in checks {
            assert!(check.get("name").and_then(|v| v.as_str()).is_some());
            assert!(check.get("pass").and_then(|v| v.as_bool()).is_some());
            assert!(check.get("detail").and_then(|v| v.as_str()).is_some());
        }
    }

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_suite("nope").is_err());
    }
}
