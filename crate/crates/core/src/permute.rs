//! Reversible application of ordering plans.
//!
//! A plan's `perm` is read as: position `k` of the reordered sequence holds
//! original index `perm[k]`, so the verbal order "C3 C2 C4 C1" is
//! `perm = [2, 1, 3, 0]`. [`apply_plan`] rearranges a target at train time
//! and [`restore_output`] inverts model output at inference time; the pair
//! composes to the identity for every valid plan.

use crate::dataio::{SeqDataset, SeqExample};
use crate::mi::{MiError, OrderingPlan, Result};

/// The plain left-to-right order.
pub fn identity_plan(l2: usize) -> Result<OrderingPlan> {
    if l2 < 1 {
        return Err(MiError::InvalidPerm(vec![]));
    }
    Ok(OrderingPlan {
        task_name: String::new(),
        estimator: None,
        perm: (0..l2).collect(),
        step_scores: vec![],
    })
}

/// The reversed order, last original token predicted first.
pub fn reverse_plan(l2: usize) -> Result<OrderingPlan> {
    if l2 < 1 {
        return Err(MiError::InvalidPerm(vec![]));
    }
    Ok(OrderingPlan {
        task_name: String::new(),
        estimator: None,
        perm: (0..l2).rev().collect(),
        step_scores: vec![],
    })
}

/// A plan with an explicit permutation and no MI provenance.
pub fn plan_from_perm(perm: Vec<usize>) -> Result<OrderingPlan> {
    let plan = OrderingPlan {
        task_name: String::new(),
        estimator: None,
        perm,
        step_scores: vec![],
    };
    plan.validate()?;
    Ok(plan)
}

/// The plan that undoes `plan`: applying both in sequence is the identity.
pub fn inverse_plan(plan: &OrderingPlan) -> Result<OrderingPlan> {
    plan.validate()?;
    let mut inv = vec![0usize; plan.perm.len()];
    for (k, &p) in plan.perm.iter().enumerate() {
        inv[p] = k;
    }
    plan_from_perm(inv)
}

/// Rearranges a target sequence into prediction order: `out[k] = target[perm[k]]`.
pub fn apply_plan(target: &[u32], plan: &OrderingPlan) -> Result<Vec<u32>> {
    if target.len() != plan.perm.len() {
        return Err(MiError::LengthMismatch {
            x: target.len(),
            y: plan.perm.len(),
        });
    }
    Ok(plan.perm.iter().map(|&p| target[p]).collect())
}

/// Moves model output back to original positions: `out[perm[k]] = predicted[k]`.
pub fn restore_output(predicted: &[u32], plan: &OrderingPlan) -> Result<Vec<u32>> {
    if predicted.len() != plan.perm.len() {
        return Err(MiError::LengthMismatch {
            x: predicted.len(),
            y: plan.perm.len(),
        });
    }
    let mut out = vec![0u32; predicted.len()];
    for (k, &p) in plan.perm.iter().enumerate() {
        out[p] = predicted[k];
    }
    Ok(out)
}

/// Permutes every example's target (and the target labels in lockstep),
/// annotating the task name with the applied permutation.
pub fn apply_to_dataset(dataset: &SeqDataset, plan: &OrderingPlan) -> Result<SeqDataset> {
    plan.validate()?;
    if dataset.target_len() != plan.perm.len() {
        return Err(MiError::LengthMismatch {
            x: dataset.target_len(),
            y: plan.perm.len(),
        });
    }
    let examples = dataset
        .examples
        .iter()
        .map(|ex| {
            Ok(SeqExample {
                source: ex.source.clone(),
                target: apply_plan(&ex.target, plan)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let target_labels = plan
        .perm
        .iter()
        .map(|&p| dataset.target_labels[p].clone())
        .collect();
    let perm_tag = plan
        .perm
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("-");
    let mut out = dataset.clone();
    out.examples = examples;
    out.target_labels = target_labels;
    out.task_name = format!("{}#perm={}", dataset.task_name, perm_tag);
    out.field_meta.insert("perm".into(), perm_tag);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgen::{gen_addition, TaskKind, TaskSpec};

    #[test]
    fn identity_and_reverse_shapes() {
        assert_eq!(identity_plan(4).unwrap().perm, vec![0, 1, 2, 3]);
        assert_eq!(identity_plan(1).unwrap().perm, vec![0]);
        assert_eq!(reverse_plan(4).unwrap().perm, vec![3, 2, 1, 0]);
        assert_eq!(reverse_plan(1).unwrap().perm, vec![0]);
        assert!(identity_plan(0).is_err());
        assert!(reverse_plan(0).is_err());
    }

    #[test]
    fn multiplication_order_from_worked_example() {
        // 79 x 24 = 1896 predicted as "C3 C2 C4 C1".
        let plan = plan_from_perm(vec![2, 1, 3, 0]).unwrap();
        let reordered = apply_plan(&[1, 8, 9, 6], &plan).unwrap();
        assert_eq!(reordered, vec![9, 8, 6, 1]);
        assert_eq!(restore_output(&reordered, &plan).unwrap(), vec![1, 8, 9, 6]);
    }

    #[test]
    fn length_mismatch_errors() {
        let plan = identity_plan(3).unwrap();
        assert!(apply_plan(&[1, 2], &plan).is_err());
        assert!(restore_output(&[1, 2, 3, 4], &plan).is_err());
    }

    #[test]
    fn invalid_perm_rejected() {
        assert!(plan_from_perm(vec![0, 0, 1]).is_err());
        assert!(plan_from_perm(vec![0, 3]).is_err());
    }

    #[test]
    fn dataset_reverse_rowwise() {
        let ds = gen_addition(&TaskSpec::new(TaskKind::Addition3, 50, 2)).unwrap();
        let rev = apply_to_dataset(&ds, &reverse_plan(4).unwrap()).unwrap();
        for (orig, perm) in ds.examples.iter().zip(&rev.examples) {
            let mut expect = orig.target.clone();
            expect.reverse();
            assert_eq!(perm.target, expect);
            assert_eq!(perm.source, orig.source);
        }
        assert_eq!(rev.target_labels, vec!["C4", "C3", "C2", "C1"]);
        assert!(rev.task_name.contains("perm=3-2-1-0"));
    }

    #[test]
    fn dataset_identity_is_noop_modulo_annotation() {
        let ds = gen_addition(&TaskSpec::new(TaskKind::Addition3, 20, 3)).unwrap();
        let same = apply_to_dataset(&ds, &identity_plan(4).unwrap()).unwrap();
        assert_eq!(same.examples, ds.examples);
        assert_eq!(same.target_labels, ds.target_labels);
    }

    #[test]
    fn dataset_round_trip_through_inverse() {
        let ds = gen_addition(&TaskSpec::new(TaskKind::Addition3, 30, 4)).unwrap();
        let plan = plan_from_perm(vec![2, 0, 3, 1]).unwrap();
        let there = apply_to_dataset(&ds, &plan).unwrap();
        let back = apply_to_dataset(&there, &inverse_plan(&plan).unwrap()).unwrap();
        assert_eq!(back.examples, ds.examples);
        assert_eq!(back.target_labels, ds.target_labels);
    }
}
