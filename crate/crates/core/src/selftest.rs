//! Randomized invariant and oracle checks, runnable from the command line.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{
    allocate, band_epsilon, compute_deviation, is_non_dominated, pareto_bruteforce, AllocationResult, AllocatorSpec,
    Method, PriorityOrder, Rule,
};
use crate::economics::{min_fleet_for_trips, payoff, Trip};
use crate::equilibrium::{solve_equilibrium, verify_equilibrium, GameTensor, SolverConfig};
use crate::fixtures;
use crate::model::{align_bids, validate_bid, validate_scenario, Bid, OdPair, OperatingCost, Scenario, Undertaking};
use crate::money::Cents;
use crate::time::ClockTime;

/// A random scenario with valid bids.
#[derive(Clone, Debug)]
pub struct Instance {
    pub scenario: Scenario,
    pub bids: Vec<Bid>,
}

/// Bounds for [`random_instance`].
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub undertakings: (usize, usize),
    pub od_pairs: (usize, usize),
    pub slots: (usize, usize),
    /// Upper bound on requests over all bids.
    pub max_requests: usize,
}

impl Shape {
    /// Small enough for exhaustive enumeration.
    pub const ORACLE: Shape = Shape { undertakings: (2, 3), od_pairs: (1, 2), slots: (4, 8), max_requests: 8 };
}

pub fn random_scenario(rng: &mut impl Rng, n_o: usize, n_od: usize, slots: usize) -> Scenario {
    let shares = [0.2, 0.25, 0.3, 1.0 / 3.0, 0.4, 0.5];
    let mut undertakings = Vec::with_capacity(n_o);
    for o in 0..n_o {
        undertakings.push(Undertaking {
            id: format!("U{}", o + 1),
            capacity_share: 0.0,
            daily_rolling_stock_cost: Cents::from_euros(rng.random_range(0..20_000)),
            fixed_access_cost: Cents::from_euros(rng.random_range(0..1_000)),
            per_slot_operating_cost: OperatingCost::Uniform(Cents(rng.random_range(0..400_000))),
        });
    }
    // Shares drawn until the grid is not oversubscribed.
    loop {
        for u in &mut undertakings {
            u.capacity_share = *shares.choose(rng).expect("non-empty");
        }
        let total: usize = undertakings.iter().map(|u| crate::model::capacity_bound(u.capacity_share, slots)).sum();
        if total <= slots {
            break;
        }
    }
    let step = *[15u32, 30, 60].choose(rng).expect("non-empty");
    let start = rng.random_range(300..480);
    let od_pairs: Vec<OdPair> = (0..n_od)
        .map(|i| {
            let (a, b) = if i % 2 == 0 { ("A", "B") } else { ("B", "A") };
            OdPair { id: format!("W{}", i + 1), origin: a.into(), destination: b.into() }
        })
        .collect();
    let grid: Vec<ClockTime> = (0..slots as u32).map(|i| ClockTime(start + step * i)).collect();
    Scenario {
        slots: vec![grid; n_od],
        grid_step_min: step,
        undertakings,
        demand: (0..n_od).map(|_| (0..slots).map(|_| rng.random_range(0..800)).collect()).collect(),
        fare: (0..n_od).map(|_| (0..slots).map(|_| Cents(rng.random_range(0..10_000))).collect()).collect(),
        od_pairs,
        trip_duration_min: rng.random_range(30..200),
        turnaround_min: rng.random_range(0..40),
        demand_profile: None,
    }
}

pub fn random_instance(rng: &mut impl Rng, shape: Shape) -> Instance {
    let n_o = rng.random_range(shape.undertakings.0..=shape.undertakings.1);
    let n_od = rng.random_range(shape.od_pairs.0..=shape.od_pairs.1);
    let slots = rng.random_range(shape.slots.0..=shape.slots.1);
    let scenario = random_scenario(rng, n_o, n_od, slots);
    let mut budget = shape.max_requests;
    let mut bids = Vec::with_capacity(n_o);
    for o in 0..n_o {
        let mut b = Bid::empty(scenario.undertakings[o].id.clone(), n_od);
        for od in 0..n_od {
            let cap = scenario.capacity(o, od).min(budget);
            let k = rng.random_range(0..=cap);
            let mut idx: Vec<usize> = (0..slots).collect();
            idx.shuffle(rng);
            b.requested[od] = idx.into_iter().take(k).collect();
            budget -= k;
        }
        bids.push(b);
    }
    Instance { scenario, bids }
}

/// Recomputes every allocation invariant from the result's moves and the bids.
pub fn audit(s: &Scenario, bids: &[Bid], r: &AllocationResult) -> Vec<String> {
    let mut problems = Vec::new();
    let bids = match align_bids(s, bids) {
        Ok(b) => b,
        Err(e) => return vec![e.to_string()],
    };
    let mut into = BTreeSet::new();
    let mut from = BTreeSet::new();
    for m in &r.retiming.moves {
        if !from.insert((m.undertaking, m.od, m.requested)) {
            problems.push(format!("requested slot re-timed twice: {m:?}"));
        }
        if !into.insert((m.od, m.allocated)) {
            problems.push(format!("slot allocated twice: {m:?}"));
        }
        if !r.allocation.holds(m.undertaking, m.od, m.allocated) {
            problems.push(format!("move target missing from allocation: {m:?}"));
        }
    }
    for (o, b) in bids.iter().enumerate() {
        for od in 0..s.n_od() {
            for &req in &b.requested[od] {
                if !from.contains(&(o, od, req)) {
                    problems.push(format!(
                        "{} slot {} on {} not re-timed",
                        b.undertaking,
                        s.time(od, req),
                        s.od_pairs[od].id
                    ));
                }
            }
            if r.allocation.assigned[o][od].len() != b.requested[od].len() {
                problems.push(format!("{} on {}: count not preserved", b.undertaking, s.od_pairs[od].id));
            }
        }
    }
    if from.len() != r.retiming.moves.len() || into.len() != r.retiming.moves.len() {
        return problems;
    }
    if !r.allocation.conflicts().is_empty() {
        problems.push(format!("conflicting slots {:?}", r.allocation.conflicts()));
    }
    match compute_deviation(s, &bids, &r.retiming) {
        Ok(d) if d != r.retiming.total_deviation => {
            problems.push(format!("deviation {:?} != recomputed {d:?}", r.retiming.total_deviation))
        }
        Ok(_) => {}
        Err(e) => problems.push(e.to_string()),
    }
    if let (Rule::Equity, Method::Exact, Some(eps)) = (r.rule, r.method, r.epsilon_used) {
        let e = band_epsilon(s, &bids, &r.retiming.total_deviation);
        if e > eps + 1e-9 {
            problems.push(format!("band {e} exceeds epsilon {eps}"));
        }
    }
    problems
}

fn min_over_permutations(times: &[u32], req: &[usize], free: &[usize]) -> u64 {
    fn go(times: &[u32], req: &[usize], free: &[usize], i: usize, used: &mut [bool]) -> u64 {
        if i == req.len() {
            return 0;
        }
        let mut best = u64::MAX;
        for j in 0..free.len() {
            if !used[j] {
                used[j] = true;
                let c = u64::from(times[req[i]].abs_diff(times[free[j]]));
                let rest = go(times, req, free, i + 1, used);
                if rest != u64::MAX {
                    best = best.min(c + rest);
                }
                used[j] = false;
            }
        }
        best
    }
    go(times, req, free, 0, &mut vec![false; free.len()])
}

fn chains_by_partition(s: &Scenario, trips: &[Trip]) -> usize {
    let mut t = trips.to_vec();
    t.sort_by_key(|x| x.departure);
    let cycle = s.trip_duration_min + s.turnaround_min;
    fn go(s: &Scenario, t: &[Trip], i: usize, ends: &mut Vec<usize>, cycle: u32, best: &mut usize) {
        if ends.len() >= *best {
            return;
        }
        if i == t.len() {
            *best = ends.len();
            return;
        }
        for c in 0..ends.len() {
            let last = t[ends[c]];
            if s.od_pairs[t[i].od].origin == s.od_pairs[last.od].destination && t[i].departure >= last.departure + cycle
            {
                let keep = ends[c];
                ends[c] = i;
                go(s, t, i + 1, ends, cycle, best);
                ends[c] = keep;
            }
        }
        ends.push(i);
        go(s, t, i + 1, ends, cycle, best);
        ends.pop();
    }
    let mut best = t.len();
    go(s, &t, 0, &mut Vec::new(), cycle, &mut best);
    best
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn specs() -> [AllocatorSpec; 4] {
    [
        AllocatorSpec::new(Rule::Priority, Method::Heuristic),
        AllocatorSpec::new(Rule::Priority, Method::Exact),
        AllocatorSpec::new(Rule::Equity, Method::Heuristic),
        AllocatorSpec::new(Rule::Equity, Method::Exact),
    ]
}

/// Runs every check with `rounds` random instances each, seeded by `seed`.
pub fn run(seed: u64, rounds: usize) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut f = Vec::new();
    let s = fixtures::scenario();
    f.extend(validate_scenario(&s).into_iter().map(|v| v.to_string()));
    for bids in
        [fixtures::priority_bids(1), fixtures::priority_bids(2), fixtures::equity_bids(1), fixtures::equity_bids(2)]
    {
        for b in &bids {
            match validate_bid(&s, b) {
                Ok(v) => f.extend(v.into_iter().map(|v| v.to_string())),
                Err(e) => f.push(e.to_string()),
            }
        }
    }
    out.push(CheckOutcome { name: "shipped fixtures validate", cases: 5, failures: f });

    let mut inv = Vec::new();
    let mut perm = Vec::new();
    let mut pareto = Vec::new();
    let mut pay = Vec::new();
    for i in 0..rounds {
        let inst = random_instance(&mut rng, Shape::ORACLE);
        let (s, bids) = (&inst.scenario, &inst.bids);
        let front = pareto_bruteforce(s, bids);
        for spec in specs() {
            let r = match allocate(s, bids, &spec) {
                Ok(r) => r,
                Err(e) => {
                    inv.push(format!("case {i} {:?}/{:?}: {e}", spec.rule, spec.method));
                    continue;
                }
            };
            inv.extend(
                audit(s, bids, &r).into_iter().map(|p| format!("case {i} {:?}/{:?}: {p}", spec.rule, spec.method)),
            );
            for o in 0..s.n_undertakings() {
                let b = payoff(s, &r.allocation, o);
                if b.profit != b.ticket_revenue - b.operating_cost - b.investment_cost - b.fixed_cost {
                    pay.push(format!("case {i}: profit identity broken for {}", b.undertaking));
                }
            }
            // Sequential priority can be dominated through an earlier undertaking's ties.
            if spec.rule == Rule::Equity && spec.method == Method::Exact {
                match &front {
                    Ok(front) if !is_non_dominated(&r.retiming.total_deviation, front) => pareto.push(format!(
                        "case {i}: {:?} dominated by the front {:?}",
                        r.retiming.total_deviation, front.vectors
                    )),
                    Err(e) => pareto.push(format!("case {i}: {e}")),
                    _ => {}
                }
            }
            if spec.rule == Rule::Priority && spec.method == Method::Exact {
                let order = PriorityOrder::declaration(s).resolve(s).expect("declaration order");
                for od in 0..s.n_od() {
                    let times: Vec<u32> = s.slots[od].iter().map(|t| t.0).collect();
                    let mut taken = vec![false; times.len()];
                    for &o in &order {
                        let req: Vec<usize> = bids[o].requested[od].iter().copied().collect();
                        let free: Vec<usize> = (0..times.len()).filter(|&j| !taken[j]).collect();
                        let best = min_over_permutations(&times, &req, &free);
                        let got: u64 = r
                            .retiming
                            .moves
                            .iter()
                            .filter(|m| m.undertaking == o && m.od == od)
                            .map(|m| u64::from(times[m.requested].abs_diff(times[m.allocated])))
                            .sum();
                        if got != best {
                            perm.push(format!(
                                "case {i}: undertaking {o} on OD {od}: {got} vs permutation minimum {best}"
                            ));
                        }
                        for &a in &r.allocation.assigned[o][od] {
                            taken[a] = true;
                        }
                    }
                }
            }
        }
    }
    out.push(CheckOutcome { name: "allocator invariants and equity band", cases: rounds * 4, failures: inv });
    out.push(CheckOutcome { name: "exact priority equals permutation minimum", cases: rounds, failures: perm });
    out.push(CheckOutcome { name: "exact equity is non-dominated", cases: rounds, failures: pareto });
    out.push(CheckOutcome { name: "payoff identity", cases: rounds * 4, failures: pay });

    let mut fleet = Vec::new();
    for i in 0..rounds {
        let s = random_scenario(&mut rng, 1, 2, 12);
        let n = rng.random_range(1..=8);
        let trips: Vec<Trip> =
            (0..n).map(|_| Trip { od: rng.random_range(0..2), departure: rng.random_range(300..1400) }).collect();
        let (a, b) = (min_fleet_for_trips(&s, &trips), chains_by_partition(&s, &trips));
        if a != b {
            fleet.push(format!("case {i}: matching {a} vs partition {b}"));
        }
    }
    out.push(CheckOutcome { name: "fleet equals chain-partition minimum", cases: rounds, failures: fleet });

    let mut eq = Vec::new();
    let cfg = SolverConfig::default();
    for i in 0..rounds.min(50) {
        let entries = (0..8).map(|_| (0..3).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let t =
            GameTensor::from_entries(vec!["A".into(), "B".into(), "C".into()], vec![2, 2, 2], entries).expect("valid");
        match solve_equilibrium(&t, &cfg).and_then(|r| verify_equilibrium(&t, &r.profile)) {
            Ok(v) if v.epsilon_nash > cfg.tolerance => eq.push(format!("case {i}: epsilon {}", v.epsilon_nash)),
            Ok(_) => {}
            Err(e) => eq.push(format!("case {i}: {e}")),
        }
    }
    out.push(CheckOutcome { name: "equilibrium certificates", cases: rounds.min(50), failures: eq });
    out
}
