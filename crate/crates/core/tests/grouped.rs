mod common;

use common::*;
use proptest::prelude::*;
use stopkit::exact::solve_exact;
use stopkit::grouped::{
    group_by_identical_distribution, memo_size, solve_grouped, state_count_check, Group, GroupedInstance,
};
use stopkit::{DiscreteDistribution, Instance};

fn groups_of(counts: &[usize]) -> GroupedInstance {
    GroupedInstance::new(
        counts
            .iter()
            .enumerate()
            .map(|(i, &count)| Group { representative: DiscreteDistribution::two_point(1.0 + i as f64, 0.5), count })
            .collect(),
    )
    .unwrap()
}

#[test]
fn memo_size_examples() {
    assert_eq!(memo_size(&groups_of(&[2, 2])), 9);
    assert_eq!(memo_size(&groups_of(&[4])), 5);
    let c = state_count_check(&groups_of(&[4, 4, 4]));
    assert_eq!((c.product_of_counts, c.bound, c.memo_states), (64.0, 64.0, 125.0));
    assert!(c.holds);
}

#[test]
fn mixed_multiset_grouping() {
    let a = DiscreteDistribution::two_point(1.0, 0.25);
    let b = DiscreteDistribution::two_point(2.0, 0.5);
    let inst = Instance::new(vec![a.clone(), b.clone(), a.clone(), b, a]).unwrap();
    let g = group_by_identical_distribution(&inst);
    assert_eq!(g.counts(), vec![3, 2]);
    assert_eq!(g.membership, vec![0, 1, 0, 1, 0]);
}

#[test]
fn deterministic_group_of_any_size() {
    let g = GroupedInstance::new(vec![Group { representative: DiscreteDistribution::point(1.5), count: 6 }]).unwrap();
    assert_eq!(solve_grouped(&g).unwrap().value, 1.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn grouping_is_sound(seed in any::<u64>(), n in 1usize..=12, distinct in 1usize..=4) {
        let inst = repeated_instance(&mut rng(seed), n, distinct, 3);
        let g = group_by_identical_distribution(&inst);
        prop_assert_eq!(g.total_count(), n);
        let grouped = solve_grouped(&g).unwrap().value;
        prop_assert!(close(grouped, solve_exact(&inst).unwrap().value, 1e-9));
        prop_assert!(state_count_check(&g).holds);
    }

    #[test]
    fn singleton_groups_match_exact(inst in arb_instance(8, 3)) {
        let singles = GroupedInstance::from_groups_unchecked(
            inst.variables.iter().map(|v| Group { representative: v.clone(), count: 1 }).collect(),
        );
        prop_assert!(close(solve_grouped(&singles).unwrap().value, solve_exact(&inst).unwrap().value, 1e-9));
    }

    #[test]
    fn splitting_a_group_changes_nothing(d in arb_dist(3), other in arb_dist(3), k in 2usize..6, j in 1usize..4) {
        let whole = GroupedInstance::from_groups_unchecked(vec![
            Group { representative: d.clone(), count: k },
            Group { representative: other.clone(), count: j },
        ]);
        let split = GroupedInstance::from_groups_unchecked(vec![
            Group { representative: d.clone(), count: 1 },
            Group { representative: other, count: j },
            Group { representative: d, count: k - 1 },
        ]);
        prop_assert!(close(solve_grouped(&whole).unwrap().value, solve_grouped(&split).unwrap().value, 1e-9));
    }

    #[test]
    fn count_thresholds_shrink(seed in any::<u64>(), n in 1usize..=10, distinct in 1usize..=3) {
        let inst = repeated_instance(&mut rng(seed), n, distinct, 3);
        let g = group_by_identical_distribution(&inst);
        let dp = solve_grouped(&g).unwrap();
        let limits = g.counts();
        let mut counts = vec![0usize; limits.len()];
        loop {
            let here = dp.value_at(&counts).unwrap();
            prop_assert!(here <= dp.value + 1e-9);
            for i in 0..counts.len() {
                if counts[i] > 0 {
                    counts[i] -= 1;
                    prop_assert!(dp.value_at(&counts).unwrap() <= here + 1e-9);
                    counts[i] += 1;
                }
            }
            let mut i = 0;
            while i < counts.len() && counts[i] == limits[i] {
                counts[i] = 0;
                i += 1;
            }
            if i == counts.len() {
                break;
            }
            counts[i] += 1;
        }
    }
}
