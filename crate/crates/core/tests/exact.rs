mod common;

use common::*;
use proptest::prelude::*;
use stopkit::exact::{brute_force_oracle, solve_exact, SubsetKey};
use stopkit::generate::counterexample_pair;
use stopkit::{DiscreteDistribution, Instance};

fn half() -> DiscreteDistribution {
    DiscreteDistribution::point(0.5)
}

#[test]
fn counterexample_continuations() {
    let (a, b) = counterexample_pair();
    for (x, expect) in [(a, 0.625), (b, 0.5625)] {
        let dp = solve_exact(&Instance::new(vec![x.clone(), half()]).unwrap()).unwrap();
        let theta = dp.threshold_at(SubsetKey::from_indices(&[1])).unwrap();
        assert_eq!(theta, 0.5);
        assert!((e_max_against(&x, theta) - expect).abs() <= 1e-12);
    }
}

#[test]
fn counterexample_pair_value() {
    // Each order is taken with probability 1/2: E[max(X_A, 1/2)] and E[max(X_B, 1/2)].
    let (a, b) = counterexample_pair();
    let dp = solve_exact(&Instance::new(vec![a.clone(), b]).unwrap()).unwrap();
    assert!((dp.value - (0.625 + 0.5625) / 2.0).abs() <= 1e-12);
    assert_eq!(dp.threshold_at(SubsetKey::from_indices(&[0])).unwrap(), 0.5);
    assert_eq!(dp.threshold_at(SubsetKey::empty()).unwrap(), 0.0);
}

#[test]
fn two_coins_by_orders() {
    let coin = DiscreteDistribution::two_point(1.0, 0.5);
    let inst = Instance::new(vec![coin.clone(), coin]).unwrap();
    // Accept a 1; otherwise take the second: 1/2 + 1/2 * 1/2.
    assert_eq!(solve_exact(&inst).unwrap().value, 0.75);
    assert_eq!(brute_force_oracle(&inst).unwrap(), 0.75);
}

#[test]
fn counterexample_with_deterministic_half_matches_brute_force() {
    let (a, _) = counterexample_pair();
    let inst = Instance::new(vec![a, half()]).unwrap();
    // Half the time X_A first against 1/2: 5/8; otherwise 1/2 first against E[X_A] = 1/2: accept, 1/2.
    let by_hand = 0.5 * 0.625 + 0.5 * 0.5;
    assert!((brute_force_oracle(&inst).unwrap() - by_hand).abs() <= 1e-12);
    assert!((solve_exact(&inst).unwrap().value - by_hand).abs() <= 1e-12);
}

#[test]
fn thresholds_of_single_states() {
    let inst =
        Instance::new(vec![DiscreteDistribution::point(3.0), DiscreteDistribution::two_point(2.0, 0.5)]).unwrap();
    let dp = solve_exact(&inst).unwrap();
    assert_eq!(dp.threshold_at(SubsetKey::from_indices(&[0])).unwrap(), 3.0);
    assert_eq!(dp.threshold_at(SubsetKey::from_indices(&[1])).unwrap(), 1.0);
    assert!(dp.threshold_at(SubsetKey(0b100)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_brute_force(inst in arb_instance(5, 3)) {
        let dp = solve_exact(&inst).unwrap();
        let brute = brute_force_oracle(&inst).unwrap();
        prop_assert!(close(dp.value, brute, 1e-9), "{} vs {}", dp.value, brute);
    }

    #[test]
    fn matches_naive_recursion(inst in arb_instance(7, 3)) {
        prop_assert!(close(solve_exact(&inst).unwrap().value, naive_opt(&inst.variables), 1e-9));
    }

    #[test]
    fn thresholds_shrink_along_paths(inst in arb_instance(7, 3)) {
        let dp = solve_exact(&inst).unwrap();
        for mask in 0..(1u64 << inst.n()) {
            let s = SubsetKey(mask);
            for i in s.indices() {
                prop_assert!(dp.thresholds[s.without(i).0 as usize] <= dp.thresholds[mask as usize] + 1e-9);
            }
            prop_assert!(dp.thresholds[mask as usize] <= dp.value + 1e-9);
        }
    }

    #[test]
    fn root_is_the_average_of_continuations(inst in arb_instance(6, 3)) {
        let dp = solve_exact(&inst).unwrap();
        let full = dp.root();
        let avg = (0..inst.n())
            .map(|i| e_max_against(&inst.variables[i], dp.thresholds[full.without(i).0 as usize]))
            .sum::<f64>() / inst.n() as f64;
        prop_assert!(close(dp.value, avg, 1e-12));
        prop_assert_eq!(dp.thresholds[full.0 as usize], dp.value);
    }

    #[test]
    fn adding_a_variable_never_hurts(inst in arb_instance(6, 3), extra in arb_dist(3)) {
        let mut vars = inst.variables.clone();
        vars.push(extra);
        let bigger = Instance::new(vars).unwrap();
        prop_assert!(solve_exact(&bigger).unwrap().value >= solve_exact(&inst).unwrap().value - 1e-9);
    }

    #[test]
    fn permutation_invariant(inst in arb_instance(7, 3)) {
        let order: Vec<usize> = (0..inst.n()).rev().collect();
        let a = solve_exact(&inst).unwrap().value;
        let b = solve_exact(&inst.permuted(&order)).unwrap().value;
        prop_assert!(close(a, b, 1e-9));
    }

    #[test]
    fn value_between_mean_and_prophet(inst in arb_instance(7, 3)) {
        let v = solve_exact(&inst).unwrap().value;
        let best_mean = inst.variables.iter().map(|d| d.mean()).fold(0.0, f64::max);
        prop_assert!(v >= best_mean - 1e-9);
        prop_assert!(v <= inst.expected_max().unwrap() + 1e-9);
    }

    #[test]
    fn random_order_beats_the_known_constant(inst in arb_positive_instance(7, 3)) {
        let norm = inst.normalize().unwrap();
        let v = solve_exact(&norm).unwrap().value;
        prop_assert!((0.669..=1.0 + 1e-9).contains(&v), "normalized OPT {}", v);
    }
}
