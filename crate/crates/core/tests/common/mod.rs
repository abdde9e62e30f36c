//! Independent oracles and a random instance generator for the integration tests.
//! Nothing here calls the allocators or solvers under test.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use slotalloc_core::economics::Trip;
use slotalloc_core::model::{Bid, OdPair, OperatingCost, Scenario, Undertaking};
use slotalloc_core::{Allocation, Cents, ClockTime, GameTensor};

pub struct Case {
    pub scenario: Scenario,
    pub bids: Vec<Bid>,
}

fn bound(k: f64, n: usize) -> usize {
    (k * n as f64 + 1e-9).floor() as usize
}

/// A random valid scenario and bid set.
pub fn random_case(
    rng: &mut impl Rng,
    n_o: (usize, usize),
    n_od: (usize, usize),
    slots: (usize, usize),
    max_req: usize,
) -> Case {
    let n_o = rng.random_range(n_o.0..=n_o.1);
    let n_od = rng.random_range(n_od.0..=n_od.1);
    let n = rng.random_range(slots.0..=slots.1);
    let shares = [0.2, 0.25, 1.0 / 3.0, 0.5];
    let ks: Vec<f64> = loop {
        let ks: Vec<f64> = (0..n_o).map(|_| shares[rng.random_range(0..shares.len())]).collect();
        if ks.iter().map(|&k| bound(k, n)).sum::<usize>() <= n {
            break ks;
        }
    };
    let step = [10u32, 30, 60][rng.random_range(0..3)];
    let start = 360 + 15 * rng.random_range(0..8u32);
    let grid: Vec<ClockTime> = (0..n as u32).map(|i| ClockTime(start + step * i)).collect();
    let scenario = Scenario {
        od_pairs: (0..n_od)
            .map(|i| OdPair {
                id: format!("L{i}"),
                origin: if i % 2 == 0 { "X" } else { "Y" }.into(),
                destination: if i % 2 == 0 { "Y" } else { "X" }.into(),
            })
            .collect(),
        slots: vec![grid; n_od],
        grid_step_min: step,
        undertakings: ks
            .iter()
            .enumerate()
            .map(|(o, &k)| Undertaking {
                id: format!("R{o}"),
                capacity_share: k,
                daily_rolling_stock_cost: Cents(rng.random_range(0..2_000_000)),
                fixed_access_cost: Cents(rng.random_range(0..5_000_000)),
                per_slot_operating_cost: OperatingCost::Uniform(Cents(rng.random_range(0..300_000))),
            })
            .collect(),
        demand: (0..n_od).map(|_| (0..n).map(|_| rng.random_range(0..900)).collect()).collect(),
        fare: (0..n_od).map(|_| (0..n).map(|_| Cents(rng.random_range(1_000..12_000))).collect()).collect(),
        trip_duration_min: rng.random_range(20..240),
        turnaround_min: rng.random_range(0..45),
        demand_profile: None,
    };
    let mut left = max_req;
    let bids = (0..n_o)
        .map(|o| {
            let per_od = (0..n_od)
                .map(|_| {
                    let c = rng.random_range(0..=bound(ks[o], n).min(left));
                    left -= c;
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(rng);
                    idx.truncate(c);
                    idx
                })
                .collect();
            Bid::from_indices(format!("R{o}"), per_od)
        })
        .collect();
    Case { scenario, bids }
}

/// Deviation vector reachable by any conflict-free re-timing, crossed or not.
pub fn all_deviation_vectors(s: &Scenario, bids: &[Bid]) -> BTreeSet<Vec<u64>> {
    let n_o = bids.len();
    let mut acc: BTreeSet<Vec<u64>> = BTreeSet::from([vec![0; n_o]]);
    for od in 0..s.od_pairs.len() {
        let times: Vec<u32> = s.slots[od].iter().map(|t| t.0).collect();
        let reqs: Vec<(usize, u32)> = bids
            .iter()
            .enumerate()
            .flat_map(|(o, b)| b.requested[od].iter().map(move |&r| (o, r)))
            .map(|(o, r)| (o, times[r]))
            .collect();
        let mut here = BTreeSet::new();
        let mut used = vec![false; times.len()];
        let mut d = vec![0u64; n_o];
        fn go(
            i: usize,
            reqs: &[(usize, u32)],
            times: &[u32],
            used: &mut [bool],
            d: &mut [u64],
            out: &mut BTreeSet<Vec<u64>>,
        ) {
            if i == reqs.len() {
                out.insert(d.to_vec());
                return;
            }
            let (o, t) = reqs[i];
            for j in 0..times.len() {
                if !used[j] {
                    used[j] = true;
                    let c = u64::from(t.abs_diff(times[j]));
                    d[o] += c;
                    go(i + 1, reqs, times, used, d, out);
                    d[o] -= c;
                    used[j] = false;
                }
            }
        }
        go(0, &reqs, &times, &mut used, &mut d, &mut here);
        acc =
            acc.iter().flat_map(|a| here.iter().map(move |h| a.iter().zip(h).map(|(x, y)| x + y).collect())).collect();
    }
    acc
}

pub fn dominated_by(v: &[u64], w: &[u64]) -> bool {
    w.iter().zip(v).all(|(a, b)| a <= b) && w != v
}

pub fn pareto(set: &BTreeSet<Vec<u64>>) -> BTreeSet<Vec<u64>> {
    set.iter().filter(|v| !set.iter().any(|w| dominated_by(v, w))).cloned().collect()
}

/// max over bidders of |D_o/(k_o·n_y) − S/n_y|.
pub fn band(s: &Scenario, bids: &[Bid], d: &[u64]) -> f64 {
    let counts: Vec<usize> = bids.iter().map(|b| b.requested.iter().map(|x| x.len()).sum()).collect();
    let n_y: usize = counts.iter().sum();
    if n_y == 0 {
        return 0.0;
    }
    let n = n_y as f64;
    let mean = d.iter().sum::<u64>() as f64 / n;
    let mut e: f64 = 0.0;
    for o in 0..d.len() {
        if counts[o] > 0 {
            e = e.max((d[o] as f64 / (s.undertakings[o].capacity_share * n) - mean).abs());
        }
    }
    e
}

/// Cheapest way to place `req` (times) on distinct `free` times.
pub fn min_placement(req: &[u32], free: &[u32]) -> Option<u64> {
    fn go(i: usize, req: &[u32], free: &[u32], used: &mut [bool]) -> Option<u64> {
        if i == req.len() {
            return Some(0);
        }
        let mut best: Option<u64> = None;
        for j in 0..free.len() {
            if !used[j] {
                used[j] = true;
                if let Some(rest) = go(i + 1, req, free, used) {
                    let c = rest + u64::from(req[i].abs_diff(free[j]));
                    best = Some(best.map_or(c, |b| b.min(c)));
                }
                used[j] = false;
            }
        }
        best
    }
    go(0, req, free, &mut vec![false; free.len()])
}

/// Minimum units by trying every partition of the trips into chains.
pub fn fleet_by_partition(s: &Scenario, trips: &[Trip]) -> usize {
    let cycle = s.trip_duration_min + s.turnaround_min;
    let mut t = trips.to_vec();
    t.sort_by_key(|x| x.departure);
    let n = t.len();
    let follows = |a: &Trip, b: &Trip| {
        s.od_pairs[b.od].origin == s.od_pairs[a.od].destination && b.departure >= a.departure + cycle
    };
    // Restricted growth strings enumerate set partitions.
    let mut best = n;
    let mut label = vec![0usize; n];
    fn rec(
        i: usize,
        blocks: usize,
        label: &mut [usize],
        n: usize,
        best: &mut usize,
        ok: &dyn Fn(&[usize], usize) -> bool,
    ) {
        if blocks >= *best {
            return;
        }
        if i == n {
            if ok(label, blocks) {
                *best = blocks;
            }
            return;
        }
        for b in 0..=blocks {
            label[i] = b;
            rec(i + 1, blocks.max(b + 1), label, n, best, ok);
        }
    }
    let ok = |label: &[usize], blocks: usize| {
        (0..blocks).all(|b| {
            let chain: Vec<&Trip> = (0..n).filter(|&i| label[i] == b).map(|i| &t[i]).collect();
            chain.windows(2).all(|w| follows(w[0], w[1]))
        })
    };
    if n == 0 {
        return 0;
    }
    rec(0, 0, &mut label, n, &mut best, &ok);
    best
}

/// Profit recomputed from holdings: revenue − operating − C_o·units − access.
pub fn profit_cents(s: &Scenario, a: &Allocation, o: usize, units: usize) -> i64 {
    let u = &s.undertakings[o];
    let mut total = 0i64;
    for (od, set) in a.assigned[o].iter().enumerate() {
        for &r in set {
            total += s.demand[od][r] * s.fare[od][r].0;
            total -= match &u.per_slot_operating_cost {
                OperatingCost::Uniform(c) => c.0,
                OperatingCost::PerSlot(m) => m[od][r].0,
            };
        }
    }
    total - u.daily_rolling_stock_cost.0 * units as i64 - u.fixed_access_cost.0
}

/// Expected payoffs and per-player regrets of a mixed profile, by full enumeration.
pub fn regrets(t: &GameTensor, probs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = t.shape.len();
    let size: usize = t.shape.iter().product();
    let decode = |mut j: usize| {
        let mut s = vec![0; n];
        for p in (0..n).rev() {
            s[p] = j % t.shape[p];
            j /= t.shape[p];
        }
        s
    };
    let mut value = vec![0.0; n];
    let mut dev: Vec<Vec<f64>> = t.shape.iter().map(|&k| vec![0.0; k]).collect();
    for j in 0..size {
        let s = decode(j);
        let pay = &t.payoffs[j * n..(j + 1) * n];
        let w: f64 = (0..n).map(|p| probs[p][s[p]]).product();
        for p in 0..n {
            value[p] += w * pay[p];
            let others: f64 = (0..n).filter(|&q| q != p).map(|q| probs[q][s[q]]).product();
            dev[p][s[p]] += others * pay[p];
        }
    }
    let reg = (0..n).map(|p| dev[p].iter().cloned().fold(f64::NEG_INFINITY, f64::max) - value[p]).collect();
    (value, reg)
}

/// One OD pair "A-B", `n` slots from 07:00 every 30 minutes, `shares.len()` undertakings
/// named U1.., zero demand and costs.
pub fn toy(shares: &[f64], n: usize) -> Scenario {
    Scenario {
        od_pairs: vec![OdPair { id: "A-B".into(), origin: "A".into(), destination: "B".into() }],
        slots: vec![(0..n as u32).map(|i| ClockTime(420 + 30 * i)).collect()],
        grid_step_min: 30,
        undertakings: shares
            .iter()
            .enumerate()
            .map(|(o, &k)| Undertaking {
                id: format!("U{}", o + 1),
                capacity_share: k,
                daily_rolling_stock_cost: Cents::ZERO,
                fixed_access_cost: Cents::ZERO,
                per_slot_operating_cost: OperatingCost::Uniform(Cents::ZERO),
            })
            .collect(),
        demand: vec![vec![0; n]],
        fare: vec![vec![Cents::from_euros(70); n]],
        trip_duration_min: 150,
        turnaround_min: 30,
        demand_profile: None,
    }
}
