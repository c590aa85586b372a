//! Property tests for the permutation codec: apply/restore is the identity,
//! token multisets survive, and small target lengths are verified
//! exhaustively over every permutation.

use proptest::prelude::*;

use ordlab_core::permute::{
    apply_plan, apply_to_dataset, identity_plan, inverse_plan, plan_from_perm, restore_output,
    reverse_plan,
};
use ordlab_core::taskgen::{gen_addition, TaskKind, TaskSpec};

fn arb_perm(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    (1..=max_len).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle())
}

proptest! {
    #[test]
    fn restore_inverts_apply(perm in arb_perm(8), seed in any::<u64>()) {
        let plan = plan_from_perm(perm).unwrap();
        let l2 = plan.perm.len();
        let target: Vec<u32> = (0..l2).map(|i| ((seed >> (i * 4)) % 10) as u32).collect();
        let applied = apply_plan(&target, &plan).unwrap();
        prop_assert_eq!(restore_output(&applied, &plan).unwrap(), target);
    }

    #[test]
    fn apply_preserves_multiset(
        (perm, target) in arb_perm(8).prop_flat_map(|perm| {
            let n = perm.len();
            (Just(perm), proptest::collection::vec(0u32..10, n))
        })
    ) {
        let plan = plan_from_perm(perm).unwrap();
        let mut applied = apply_plan(&target, &plan).unwrap();
        let mut original = target;
        applied.sort_unstable();
        original.sort_unstable();
        prop_assert_eq!(applied, original);
    }

    #[test]
    fn identity_is_noop(target in proptest::collection::vec(0u32..10, 1..=8)) {
        let plan = identity_plan(target.len()).unwrap();
        prop_assert_eq!(apply_plan(&target, &plan).unwrap(), target.clone());
        prop_assert_eq!(restore_output(&target, &plan).unwrap(), target);
    }

    #[test]
    fn reverse_is_involution(target in proptest::collection::vec(0u32..10, 1..=8)) {
        let plan = reverse_plan(target.len()).unwrap();
        let once = apply_plan(&target, &plan).unwrap();
        let twice = apply_plan(&once, &plan).unwrap();
        prop_assert_eq!(twice, target);
    }
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

#[test]
fn exhaustive_round_trip_small_lengths() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for l2 in 2..=5 {
        for perm in heap_permutations(l2) {
            let plan = plan_from_perm(perm).unwrap();
            for _ in 0..1000 {
                let target: Vec<u32> = (0..l2).map(|_| rng.gen_range(0..10)).collect();
                let applied = apply_plan(&target, &plan).unwrap();
                assert_eq!(restore_output(&applied, &plan).unwrap(), target);
            }
        }
    }
}

#[test]
fn dataset_permutation_round_trip() {
    let ds = gen_addition(&TaskSpec::new(TaskKind::Addition3, 40, 9)).unwrap();
    for perm in heap_permutations(4) {
        let plan = plan_from_perm(perm).unwrap();
        let there = apply_to_dataset(&ds, &plan).unwrap();
        let back = apply_to_dataset(&there, &inverse_plan(&plan).unwrap()).unwrap();
        assert_eq!(back.examples, ds.examples);
        assert_eq!(back.target_labels, ds.target_labels);
    }
}
