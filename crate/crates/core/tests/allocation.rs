mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slotalloc_core::allocation::{
    allocate, allocate_equity_exact, allocate_equity_heuristic, allocate_priority_exact, allocate_priority_heuristic,
    compute_deviation, nearest_available_slot, pareto_bruteforce, result_from_json, result_to_json, AllocatorSpec,
    EquityParams, Method, Move, PriorityOrder, RetimingMap, Rule, TieBreak,
};
use slotalloc_core::{fixtures, Bid, ClockTime, Error, Scenario};

fn all_specs() -> Vec<AllocatorSpec> {
    let mut v = Vec::new();
    for rule in [Rule::Priority, Rule::Equity] {
        for method in [Method::Heuristic, Method::Exact] {
            v.push(AllocatorSpec::new(rule, method));
        }
    }
    v
}

fn bids(s: &Scenario, per: &[&[usize]]) -> Vec<Bid> {
    per.iter().enumerate().map(|(o, r)| Bid::from_indices(s.undertakings[o].id.clone(), vec![r.to_vec()])).collect()
}

#[test]
fn nearest_slot_tie_break() {
    let grid: Vec<ClockTime> = (0..6).map(|i| ClockTime(435 + 30 * i)).collect(); // 07:15..
    let mut occupied = vec![false; 6];
    occupied[2] = true; // 08:15
    assert_eq!(grid[nearest_available_slot(&grid, 2, &occupied, TieBreak::Earlier).unwrap()], ClockTime::hm(7, 45));
    assert_eq!(grid[nearest_available_slot(&grid, 2, &occupied, TieBreak::Later).unwrap()], ClockTime::hm(8, 45));
    let free = vec![false; 6];
    assert_eq!(nearest_available_slot(&grid, 1, &free, TieBreak::Later).unwrap(), 1);
    occupied[0] = true;
    occupied[1] = true;
    assert_eq!(grid[nearest_available_slot(&grid, 1, &occupied, TieBreak::Earlier).unwrap()], ClockTime::hm(8, 45));
    assert!(matches!(nearest_available_slot(&grid, 1, &[true; 6], TieBreak::Later), Err(Error::NoFreeSlot)));
}

#[test]
fn conflict_free_bids_are_granted() {
    let s = common::toy(&[0.5, 0.5], 8);
    let b = bids(&s, &[&[0, 2, 5], &[1, 3, 6]]);
    for spec in all_specs() {
        let r = allocate(&s, &b, &spec).unwrap();
        assert_eq!(r.deviations(), [0, 0], "{spec:?}");
        for (o, bid) in b.iter().enumerate() {
            assert_eq!(r.allocation.assigned[o], bid.requested);
        }
    }
    let single = bids(&common::toy(&[1.0], 8), &[&[0, 4]]);
    for spec in all_specs() {
        assert_eq!(allocate(&common::toy(&[1.0], 8), &single, &spec).unwrap().deviations(), [0]);
    }
}

#[test]
fn disjoint_bids_keep_the_starting_band() {
    let s = common::toy(&[0.5, 0.5], 8);
    let b = bids(&s, &[&[0, 2], &[1, 3]]);
    for eps in [0.0, 2.5] {
        let r = allocate_equity_exact(&s, &b, &EquityParams { epsilon: eps, ..EquityParams::default() }).unwrap();
        assert_eq!(r.epsilon_used, Some(eps));
        assert_eq!(r.total_deviation(), 0);
    }
    let s = fixtures::scenario();
    let r = allocate_equity_exact(&s, &fixtures::disjoint_bids(), &EquityParams::default()).unwrap();
    assert_eq!(r.total_deviation(), 0);
    assert_eq!(r.epsilon_used, Some(0.0));
}

#[test]
fn identical_single_slot_bids() {
    let s = common::toy(&[0.5, 0.5], 6);
    let b = bids(&s, &[&[2], &[2]]);
    let r = allocate_equity_heuristic(&s, &b, None, TieBreak::Later).unwrap();
    assert_eq!(r.deviations(), [0, 30]);
    assert!(r.allocation.holds(0, 0, 2));
    assert!(r.allocation.holds(1, 0, 3));
    let r = allocate_equity_heuristic(&s, &b, None, TieBreak::Earlier).unwrap();
    assert!(r.allocation.holds(1, 0, 1));
    let order = PriorityOrder(vec!["U2".into(), "U1".into()]);
    let r = allocate_equity_heuristic(&s, &b, Some(&order), TieBreak::Later).unwrap();
    assert_eq!(r.deviations(), [30, 0]);
    let r = allocate_priority_heuristic(&s, &b, &order, TieBreak::Later).unwrap();
    assert_eq!(r.deviations(), [30, 0]);
}

#[test]
fn equity_heuristic_serves_least_served_first() {
    // Service alternates U1, U2, U1, U2; U2 always finds its slot just taken.
    let s = common::toy(&[0.5, 0.5], 10);
    let b = bids(&s, &[&[2, 6], &[2, 6]]);
    let r = allocate_equity_heuristic(&s, &b, None, TieBreak::Later).unwrap();
    assert_eq!(r.deviations(), [0, 60]);
    assert!(r.allocation.holds(1, 0, 3) && r.allocation.holds(1, 0, 7));

    // φ = served / k: after one service each, U1 (k = 0.5) is behind U2 (k = 0.25).
    let s = common::toy(&[0.5, 0.25], 8);
    let b = bids(&s, &[&[2, 3, 4], &[2, 3]]);
    let r = allocate_equity_heuristic(&s, &b, None, TieBreak::Later).unwrap();
    assert_eq!(r.allocation.assigned[0][0].iter().copied().collect::<Vec<_>>(), [2, 4, 5]);
    assert_eq!(r.allocation.assigned[1][0].iter().copied().collect::<Vec<_>>(), [1, 3]);
}

#[test]
fn exact_priority_matches_permutations_on_a_small_case() {
    let s = common::toy(&[0.5, 0.5], 6);
    // U1 holds 08:00 and 08:30; U2's three requests must share the four remaining slots.
    let b = bids(&s, &[&[2, 3], &[1, 2, 3]]);
    let r = allocate_priority_exact(&s, &b, &PriorityOrder::declaration(&s), TieBreak::Later).unwrap();
    assert_eq!(r.deviations()[0], 0);
    let times: Vec<u32> = s.slots[0].iter().map(|t| t.0).collect();
    let best = common::min_placement(&[times[1], times[2], times[3]], &[times[0], times[1], times[4], times[5]]);
    assert_eq!(Some(r.deviations()[1]), best);
}

#[test]
fn exact_equity_tiny_instance_matches_enumeration() {
    let s = common::toy(&[0.5, 0.5], 6);
    let b = bids(&s, &[&[1, 3], &[3, 4]]);
    let r = allocate_equity_exact(&s, &b, &EquityParams::default()).unwrap();
    let eps = r.epsilon_used.unwrap();
    let best = common::all_deviation_vectors(&s, &b)
        .into_iter()
        .filter(|v| common::band(&s, &b, v) <= eps + 1e-9)
        .map(|v| v.iter().sum::<u64>())
        .min();
    assert_eq!(Some(r.total_deviation()), best);
    assert!(common::band(&s, &b, r.deviations()) <= eps + 1e-9);
}

#[test]
fn wider_starting_band_never_costs_more() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let c = common::random_case(&mut rng, (2, 3), (1, 2), (4, 8), 8);
        let tight = allocate_equity_exact(&c.scenario, &c.bids, &EquityParams::default()).unwrap();
        let loose =
            allocate_equity_exact(&c.scenario, &c.bids, &EquityParams { epsilon: 1e6, ..EquityParams::default() })
                .unwrap();
        assert!(loose.total_deviation() <= tight.total_deviation());
        assert_eq!(loose.epsilon_used, Some(1e6));
        assert!(tight.epsilon_used.unwrap() >= 0.0);
    }
}

#[test]
fn shortages_are_errors() {
    let s = common::toy(&[1.0, 1.0], 2);
    let b = bids(&s, &[&[0, 1], &[0]]);
    let order = PriorityOrder::declaration(&s);
    assert!(matches!(allocate_priority_heuristic(&s, &b, &order, TieBreak::Later), Err(Error::NoFreeSlot)));
    assert!(matches!(allocate_equity_heuristic(&s, &b, None, TieBreak::Later), Err(Error::NoFreeSlot)));
    assert!(matches!(allocate_priority_exact(&s, &b, &order, TieBreak::Later), Err(Error::InsufficientSlots { .. })));
    assert!(matches!(allocate_equity_exact(&s, &b, &EquityParams::default()), Err(Error::InsufficientSlots { .. })));
}

#[test]
fn bad_parameters_are_errors() {
    let s = common::toy(&[0.5, 0.5], 6);
    let b = bids(&s, &[&[1, 2], &[2, 3]]);
    let bad = |o: Vec<&str>| PriorityOrder(o.into_iter().map(String::from).collect());
    for order in [bad(vec!["U1", "U1"]), bad(vec!["U1", "U9"]), bad(vec!["U1"])] {
        assert!(allocate_priority_heuristic(&s, &b, &order, TieBreak::Later).is_err());
    }
    let neg = EquityParams { epsilon: -1.0, ..EquityParams::default() };
    assert!(matches!(allocate_equity_exact(&s, &b, &neg), Err(Error::InvalidParameter(_))));
    let zero_step = EquityParams { epsilon_search_step: Some(0.0), ..EquityParams::default() };
    assert!(matches!(allocate_equity_exact(&s, &b, &zero_step), Err(Error::InvalidParameter(_))));
    let over = bids(&s, &[&[0, 1, 2, 3], &[]]);
    assert!(matches!(allocate(&s, &over, &AllocatorSpec::new(Rule::Priority, Method::Exact)), Err(Error::Invalid(_))));
}

#[test]
fn tiny_state_budget_is_reported() {
    let s = fixtures::scenario();
    let params = EquityParams { max_states: 4, ..EquityParams::default() };
    assert!(matches!(allocate_equity_exact(&s, &fixtures::equity_bids(2), &params), Err(Error::BudgetExceeded(_))));
}

#[test]
fn deviation_accounting() {
    let s = common::toy(&[0.5, 0.5], 6);
    let b = bids(&s, &[&[1], &[]]);
    let moved = RetimingMap::new(&s, vec![Move { undertaking: 0, od: 0, requested: 1, allocated: 0 }]);
    assert_eq!(compute_deviation(&s, &b, &moved).unwrap(), [30, 0]);
    let identity = RetimingMap::new(&s, vec![Move { undertaking: 0, od: 0, requested: 1, allocated: 1 }]);
    assert_eq!(compute_deviation(&s, &b, &identity).unwrap(), [0, 0]);
    let missing = RetimingMap::new(&s, vec![]);
    assert!(matches!(compute_deviation(&s, &b, &missing), Err(Error::InconsistentRetiming(_))));
    let twice = RetimingMap::new(
        &s,
        vec![
            Move { undertaking: 0, od: 0, requested: 1, allocated: 1 },
            Move { undertaking: 0, od: 0, requested: 1, allocated: 2 },
        ],
    );
    assert!(compute_deviation(&s, &b, &twice).is_err());
}

#[test]
fn pareto_oracle_examples() {
    let s = common::toy(&[0.5, 0.5], 6);
    let disjoint = pareto_bruteforce(&s, &bids(&s, &[&[0, 1], &[2]])).unwrap();
    assert_eq!(disjoint.vectors, vec![vec![0, 0]]);
    let mut shared = pareto_bruteforce(&s, &bids(&s, &[&[0], &[0]])).unwrap().vectors;
    shared.sort();
    assert_eq!(shared, vec![vec![0, 30], vec![30, 0]]);

    // Three undertakings on 08:00 with 07:30, 08:30 and 09:00 free.
    let s3 = common::toy(&[0.25, 0.25, 0.25], 5);
    let b3 = bids(&s3, &[&[2], &[2], &[2]]);
    let got: std::collections::BTreeSet<Vec<u64>> = pareto_bruteforce(&s3, &b3).unwrap().vectors.into_iter().collect();
    assert_eq!(got, common::pareto(&common::all_deviation_vectors(&s3, &b3)));
    assert!(got.contains(&vec![0, 30, 30]));

    let big = common::toy(&[0.5, 0.5], 20);
    let b = bids(&big, &[&(0..10).collect::<Vec<_>>(), &(0..10).collect::<Vec<_>>()]);
    assert!(matches!(pareto_bruteforce(&big, &b), Err(Error::OracleScaleExceeded(_))));
}

#[test]
fn reference_deviations() {
    let s = fixtures::scenario();
    let order = PriorityOrder::declaration(&s);
    let b = fixtures::priority_bids(2);
    assert_eq!(allocate_priority_heuristic(&s, &b, &order, TieBreak::Later).unwrap().deviations(), [0, 390, 810]);
    assert_eq!(allocate_priority_exact(&s, &b, &order, TieBreak::Later).unwrap().deviations(), [0, 390, 780]);
    // The other tie-break finds a placement that dominates the reference exact row.
    assert_eq!(allocate_priority_exact(&s, &b, &order, TieBreak::Earlier).unwrap().deviations(), [0, 390, 750]);
    let r = allocate_equity_exact(&s, &fixtures::equity_bids(2), &EquityParams::default()).unwrap();
    assert_eq!(r.total_deviation(), 990);
}

#[test]
fn priority_order_moves_the_burden() {
    let s = fixtures::scenario();
    let b = fixtures::priority_bids(2);
    let order = PriorityOrder(vec!["RU3".into(), "RU2".into(), "RU1".into()]);
    for r in [
        allocate_priority_heuristic(&s, &b, &order, TieBreak::Later).unwrap(),
        allocate_priority_exact(&s, &b, &order, TieBreak::Later).unwrap(),
    ] {
        assert_eq!(r.deviations()[2], 0);
        assert!(r.deviations()[0] > 0);
    }
}

#[test]
fn runs_are_deterministic() {
    let s = fixtures::scenario();
    for spec in all_specs() {
        for y in [1u8, 2] {
            let b = if spec.rule == Rule::Priority { fixtures::priority_bids(y) } else { fixtures::equity_bids(y) };
            let a = allocate(&s, &b, &spec).unwrap();
            let again = allocate(&s, &b, &spec).unwrap();
            assert_eq!(a, again);
            assert_eq!(result_to_json(&s, &a).unwrap(), result_to_json(&s, &again).unwrap());
        }
    }
}

#[test]
fn swapping_equal_undertakings_keeps_the_equity_total() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let mut c = common::random_case(&mut rng, (2, 3), (1, 2), (4, 8), 8);
        let k = c.scenario.undertakings[0].capacity_share;
        c.scenario.undertakings[1].capacity_share = k;
        let swapped: Vec<Bid> = {
            let mut b = c.bids.clone();
            let (r0, r1) = (b[0].requested.clone(), b[1].requested.clone());
            b[0].requested = r1;
            b[1].requested = r0;
            b
        };
        let valid =
            |b: &[Bid]| b.iter().all(|x| slotalloc_core::model::validate_bid(&c.scenario, x).unwrap().is_empty());
        if slotalloc_core::model::validate_scenario(&c.scenario).is_empty() && valid(&c.bids) && valid(&swapped) {
            let p = EquityParams::default();
            let a = allocate_equity_exact(&c.scenario, &c.bids, &p).unwrap();
            let b = allocate_equity_exact(&c.scenario, &swapped, &p).unwrap();
            assert_eq!(a.total_deviation(), b.total_deviation());
            assert_eq!(a.epsilon_used, b.epsilon_used);
        }
    }
}

#[test]
fn result_json_round_trip() {
    let s = fixtures::scenario();
    for (spec, b) in [
        (AllocatorSpec::new(Rule::Priority, Method::Heuristic), fixtures::priority_bids(1)),
        (AllocatorSpec::new(Rule::Equity, Method::Exact), fixtures::equity_bids(2)),
    ] {
        let r = allocate(&s, &b, &spec).unwrap();
        let (back, bids) = result_from_json(&s, &result_to_json(&s, &r).unwrap()).unwrap();
        assert_eq!(back.allocation, r.allocation);
        assert_eq!(back.retiming, r.retiming);
        assert_eq!(back.epsilon_used, r.epsilon_used);
        assert_eq!(bids, b);
    }
}
