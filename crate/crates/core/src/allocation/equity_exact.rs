//! Exact equity rule.
//!
//! Per OD pair, a left-to-right scan over the slot grid tracks for every undertaking the
//! signed number of open items: requests still waiting for a later slot (positive) or
//! slots already taken for a later request (negative). Each open item adds the gap to the
//! next slot time to its owner's deviation, so a complete scan prices every uncrossed
//! re-timing exactly. Partial states with equal carries and componentwise larger
//! deviations are dropped; only non-dominated deviation vectors are produced.

use std::collections::{BTreeSet, HashMap};

use super::pareto::pareto_front;
use super::{checked_bids, AllocationResult, EquityParams, Method, Move, Rule};
use crate::error::{Error, Result};
use crate::model::{Bid, Scenario};

const INF: u64 = u64::MAX / 4;
const TOL: f64 = 1e-9;
const NO_SLOT: u8 = u8::MAX;

/// Largest deviation from the capacity-normalized mean, max_o |D_o/(k_o·n_y) − S/n_y|,
/// over undertakings that requested at least one slot.
pub fn band_epsilon(s: &Scenario, bids: &[Bid], d: &[u64]) -> f64 {
    let bids = match crate::model::align_bids(s, bids) {
        Ok(b) => b,
        Err(_) => return f64::NAN,
    };
    let requested: Vec<usize> = bids.iter().map(Bid::len).collect();
    epsilon_star(s, &requested, d)
}

fn epsilon_star(s: &Scenario, requested: &[usize], d: &[u64]) -> f64 {
    let n_y: usize = requested.iter().sum();
    if n_y == 0 {
        return 0.0;
    }
    let n = n_y as f64;
    let mean = d.iter().sum::<u64>() as f64 / n;
    (0..d.len())
        .filter(|&o| requested[o] > 0)
        .map(|o| (d[o] as f64 / (s.undertakings[o].capacity_share * n) - mean).abs())
        .fold(0.0, f64::max)
}

struct OdProblem {
    /// Global index of each local owner.
    owners: Vec<usize>,
    /// Minutes to the next slot; zero after the last.
    gaps: Vec<u64>,
    /// `[local owner][position]`.
    requests: Vec<Vec<bool>>,
}

impl OdProblem {
    fn new(s: &Scenario, bids: &[Bid], od: usize) -> Self {
        let grid = &s.slots[od];
        let owners: Vec<usize> = (0..bids.len()).filter(|&o| !bids[o].requested[od].is_empty()).collect();
        let requests =
            owners.iter().map(|&o| (0..grid.len()).map(|p| bids[o].requested[od].contains(&p)).collect()).collect();
        let gaps = (0..grid.len())
            .map(|p| if p + 1 < grid.len() { u64::from(grid[p + 1].0 - grid[p].0) } else { 0 })
            .collect();
        OdProblem { owners, gaps, requests }
    }

    fn len(&self) -> usize {
        self.gaps.len()
    }

    fn n_owners(&self) -> usize {
        self.owners.len()
    }

    fn n_requests(&self, k: usize) -> usize {
        self.requests[k].iter().filter(|&&b| b).count()
    }
}

#[derive(Clone, Debug)]
struct Constraints {
    /// `[local owner][position]`: the owner may not hold the slot.
    forbid: Vec<Vec<bool>>,
    /// The slot must go to this local owner.
    force: Vec<Option<usize>>,
}

impl Constraints {
    fn none(p: &OdProblem) -> Self {
        Constraints { forbid: vec![vec![false; p.len()]; p.n_owners()], force: vec![None; p.len()] }
    }

    fn allows(&self, k: usize, pos: usize) -> bool {
        !self.forbid[k][pos] && self.force[pos].is_none_or(|f| f == k)
    }

    fn may_skip(&self, pos: usize) -> bool {
        self.force[pos].is_none()
    }
}

/// Suffix lower bounds: `[position][carry + offset]` = least deviation still to come from
/// `position` onward (before its requests arrive) given the carry.
struct Suffix {
    offset: i64,
    table: Vec<Vec<u64>>,
}

impl Suffix {
    fn at(&self, pos: usize, carry: i64) -> u64 {
        let i = carry + self.offset;
        if i < 0 || i as usize >= self.table[pos].len() {
            INF
        } else {
            self.table[pos][i as usize]
        }
    }

    fn build(p: &OdProblem, range: i64, arrivals: impl Fn(usize) -> i64, take: impl Fn(usize) -> (bool, bool)) -> Self {
        let m = p.len();
        let width = (2 * range + 1) as usize;
        let mut table = vec![vec![INF; width]; m + 1];
        table[m][range as usize] = 0;
        for q in (0..m).rev() {
            let (can_skip, can_take) = take(q);
            for i in 0..width {
                let c1 = i as i64 - range + arrivals(q);
                let mut best = INF;
                for (u, ok) in [(0, can_skip), (1, can_take)] {
                    if !ok {
                        continue;
                    }
                    let c2 = c1 - u;
                    let j = c2 + range;
                    if j < 0 || j >= width as i64 {
                        continue;
                    }
                    let rest = table[q + 1][j as usize];
                    if rest >= INF {
                        continue;
                    }
                    best = best.min(c2.unsigned_abs() * p.gaps[q] + rest);
                }
                table[q][i] = best;
            }
        }
        Suffix { offset: range, table }
    }
}

struct Bounds {
    net: Suffix,
    owner: Vec<Suffix>,
}

impl Bounds {
    fn new(p: &OdProblem, c: &Constraints) -> Self {
        let total: i64 = (0..p.n_owners()).map(|k| p.n_requests(k) as i64).sum();
        let net = Suffix::build(
            p,
            total,
            |q| (0..p.n_owners()).filter(|&k| p.requests[k][q]).count() as i64,
            |q| (c.may_skip(q), (0..p.n_owners()).any(|k| c.allows(k, q))),
        );
        let owner = (0..p.n_owners())
            .map(|k| {
                Suffix::build(
                    p,
                    p.n_requests(k) as i64,
                    |q| i64::from(p.requests[k][q]),
                    |q| (c.force[q] != Some(k), c.allows(k, q)),
                )
            })
            .collect();
        Bounds { net, owner }
    }
}

struct Caps {
    total: u64,
    owner: Vec<u64>,
}

/// Completed scan of one OD pair.
struct Run {
    /// Per position: parent state index and the local owner given the slot.
    parents: Vec<Vec<(u32, u8)>>,
    /// Final deviation vectors (local owners) with their state index in the last layer.
    finals: Vec<(Vec<u64>, u32)>,
}

impl Run {
    /// Local owner holding each slot along the path to `finals[i]`.
    fn owners_of(&self, i: usize) -> Vec<u8> {
        let m = self.parents.len();
        let mut out = vec![NO_SLOT; m];
        let mut idx = self.finals[i].1 as usize;
        for pos in (0..m).rev() {
            let (parent, act) = self.parents[pos][idx];
            out[pos] = act;
            idx = parent as usize;
        }
        out
    }
}

fn scan(p: &OdProblem, c: &Constraints, caps: &Caps, max_states: usize, od_name: &str) -> Result<Run> {
    let n = p.n_owners();
    let m = p.len();
    let bounds = Bounds::new(p, c);
    if bounds.net.at(0, 0) > caps.total || (0..n).any(|k| bounds.owner[k].at(0, 0) > caps.owner[k]) {
        return Ok(Run { parents: vec![Vec::new(); m], finals: Vec::new() });
    }

    // Layer states, flattened: carries (n each) and deviations (n each).
    let mut carries: Vec<i16> = vec![0; n];
    let mut devs: Vec<u64> = vec![0; n];
    let mut parents = Vec::with_capacity(m);

    let mut c1 = vec![0i16; n];
    let mut d1 = vec![0u64; n];
    for pos in 0..m {
        let count = devs.len() / n.max(1);
        let count = if n == 0 { 1 } else { count };
        let mut cand_c: Vec<i16> = Vec::new();
        let mut cand_d: Vec<u64> = Vec::new();
        let mut cand_meta: Vec<(u32, u8, u64)> = Vec::new();
        let gap = p.gaps[pos];
        for st in 0..count {
            let base_c = &carries[st * n..st * n + n];
            let base_d = &devs[st * n..st * n + n];
            let base_total: u64 = base_d.iter().sum();
            for k in 0..n {
                c1[k] = base_c[k] + i16::from(p.requests[k][pos]);
            }
            let mut actions: Vec<u8> = Vec::with_capacity(n + 1);
            if c.may_skip(pos) {
                actions.push(NO_SLOT);
            }
            actions.extend((0..n).filter(|&k| c.allows(k, pos)).map(|k| k as u8));
            'act: for act in actions {
                let mut total = base_total;
                let mut lb_owner = 0u64;
                let mut net = 0i64;
                for k in 0..n {
                    let ck = c1[k] - i16::from(act as usize == k);
                    let add = u64::from(ck.unsigned_abs()) * gap;
                    d1[k] = base_d[k] + add;
                    total += add;
                    let rest = bounds.owner[k].at(pos + 1, i64::from(ck));
                    if rest >= INF || d1[k] + rest > caps.owner[k] {
                        continue 'act;
                    }
                    lb_owner += rest;
                    net += i64::from(ck);
                }
                let rest_net = bounds.net.at(pos + 1, net);
                if rest_net >= INF || total + lb_owner.max(rest_net) > caps.total {
                    continue;
                }
                cand_c.extend(c1[..n].iter().enumerate().map(|(k, &c)| c - i16::from(act as usize == k)));
                cand_d.extend_from_slice(&d1[..n]);
                cand_meta.push((st as u32, act, total));
            }
        }

        // Keep, per carry vector, the non-dominated deviation vectors in generation order.
        let k_count = cand_meta.len();
        let mut buckets: HashMap<&[i16], Vec<usize>> = HashMap::new();
        let mut bucket_order: Vec<&[i16]> = Vec::new();
        for i in 0..k_count {
            let key = if n == 0 { &cand_c[0..0] } else { &cand_c[i * n..i * n + n] };
            buckets
                .entry(key)
                .or_insert_with(|| {
                    bucket_order.push(key);
                    Vec::new()
                })
                .push(i);
        }
        let mut keep = vec![false; k_count];
        for key in &bucket_order {
            let mut members = buckets[key].clone();
            members.sort_by_key(|&i| (cand_meta[i].2, i));
            let mut kept: Vec<usize> = Vec::new();
            for i in members {
                let di = &cand_d[i * n..i * n + n];
                let covered = kept.iter().any(|&j| {
                    let dj = &cand_d[j * n..j * n + n];
                    dj.iter().zip(di).all(|(a, b)| a <= b)
                });
                if !covered {
                    kept.push(i);
                    keep[i] = true;
                }
            }
        }
        let survivors: Vec<usize> = (0..k_count).filter(|&i| keep[i]).collect();
        if survivors.len() > max_states {
            return Err(Error::BudgetExceeded(format!(
                "exact equity search holds {} states at slot {} of {od_name} (limit {max_states})",
                survivors.len(),
                pos
            )));
        }
        let mut nc = Vec::with_capacity(survivors.len() * n);
        let mut nd = Vec::with_capacity(survivors.len() * n);
        let mut layer = Vec::with_capacity(survivors.len());
        for &i in &survivors {
            nc.extend_from_slice(&cand_c[i * n..i * n + n]);
            nd.extend_from_slice(&cand_d[i * n..i * n + n]);
            layer.push((cand_meta[i].0, cand_meta[i].1));
        }
        carries = nc;
        devs = nd;
        parents.push(layer);
        if parents.last().is_some_and(Vec::is_empty) {
            return Ok(Run { parents, finals: Vec::new() });
        }
    }

    let count = parents.last().map_or(0, Vec::len);
    let finals = (0..count)
        .filter(|&st| carries[st * n..st * n + n].iter().all(|&x| x == 0))
        .map(|st| (devs[st * n..st * n + n].to_vec(), st as u32))
        .collect();
    Ok(Run { parents, finals })
}

/// Lifts a local deviation vector to all undertakings.
fn lift(p: &OdProblem, local: &[u64], n_o: usize) -> Vec<u64> {
    let mut v = vec![0; n_o];
    for (k, &o) in p.owners.iter().enumerate() {
        v[o] = local[k];
    }
    v
}

/// Non-dominated sums `Σ_i d_i`, one `d_i` from each set, with total ≤ `cap`.
fn combine(sets: &[Vec<Vec<u64>>], n_o: usize, cap: u64) -> Vec<Vec<u64>> {
    let mut acc = vec![vec![0u64; n_o]];
    for set in sets {
        let mut next = Vec::with_capacity(acc.len() * set.len());
        for a in &acc {
            let ta: u64 = a.iter().sum();
            for b in set {
                if ta + b.iter().sum::<u64>() <= cap {
                    next.push(a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>());
                }
            }
        }
        acc = pareto_front(next);
    }
    acc
}

/// Finds one vector per OD pair, from `sets`, summing to a member of `targets`.
/// Returns the index into each set.
fn decompose(sets: &[Vec<Vec<u64>>], targets: &[Vec<u64>]) -> Option<Vec<usize>> {
    let last: HashMap<&[u64], usize> = sets.last()?.iter().enumerate().rev().map(|(i, v)| (v.as_slice(), i)).collect();
    fn go(
        sets: &[Vec<Vec<u64>>],
        last: &HashMap<&[u64], usize>,
        rest: &[u64],
        depth: usize,
        picked: &mut Vec<usize>,
    ) -> bool {
        if depth + 1 == sets.len() {
            if let Some(&i) = last.get(rest) {
                picked.push(i);
                return true;
            }
            return false;
        }
        for (i, d) in sets[depth].iter().enumerate() {
            if d.iter().zip(rest).all(|(a, b)| a <= b) {
                let r: Vec<u64> = rest.iter().zip(d).map(|(a, b)| a - b).collect();
                picked.push(i);
                if go(sets, last, &r, depth + 1, picked) {
                    return true;
                }
                picked.pop();
            }
        }
        false
    }
    for t in targets {
        let mut picked = Vec::new();
        if go(sets, &last, t, 0, &mut picked) {
            return Some(picked);
        }
    }
    None
}

fn lifted_finals(p: &OdProblem, run: &Run, n_o: usize) -> Vec<Vec<u64>> {
    run.finals.iter().map(|(d, _)| lift(p, d, n_o)).collect()
}

/// Minimizes total deviation subject to the equity band
/// Δ − ε ≤ D_o/(k_o·n_y) ≤ Δ + ε for every undertaking with requests, Δ = S/n_y.
///
/// The band starts at `params.epsilon` and widens by the search step until some
/// non-dominated deviation vector fits; ties among minimal totals go to the
/// lexicographically smallest allocation (undertakings in declaration order, then OD
/// pairs, then slots ascending).
pub fn allocate_equity_exact(s: &Scenario, bids: &[Bid], params: &EquityParams) -> Result<AllocationResult> {
    if !params.epsilon.is_finite() || params.epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon must be ≥ 0, got {}", params.epsilon)));
    }
    let bids = checked_bids(s, bids)?;
    let n_o = bids.len();
    let n_od = s.n_od();
    let requested: Vec<usize> = bids.iter().map(Bid::len).collect();
    let n_y: usize = requested.iter().sum();
    let step =
        params.epsilon_search_step.unwrap_or(if n_y == 0 { 1.0 } else { f64::from(s.grid_step_min) / n_y as f64 });
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon search step must be > 0, got {step}")));
    }
    for od in 0..n_od {
        let req: usize = bids.iter().map(|b| b.requested[od].len()).sum();
        if req > s.slots[od].len() {
            return Err(Error::InsufficientSlots {
                od: s.od_pairs[od].id.clone(),
                requests: req,
                free: s.slots[od].len(),
            });
        }
    }

    let probs: Vec<OdProblem> = (0..n_od).map(|od| OdProblem::new(s, &bids, od)).collect();
    let open: Vec<Constraints> = probs.iter().map(Constraints::none).collect();
    let bounds: Vec<Bounds> = probs.iter().zip(&open).map(|(p, c)| Bounds::new(p, c)).collect();
    let od_min: Vec<u64> = bounds.iter().map(|b| b.net.at(0, 0)).collect();
    let min_total: u64 = od_min.iter().sum();
    // Every request can at worst travel to the farther end of its grid.
    let max_total: u64 = (0..n_od)
        .map(|od| {
            let g = &s.slots[od];
            bids.iter()
                .flat_map(|b| b.requested[od].iter())
                .map(|&r| u64::from((g[r].0 - g[0].0).max(g[g.len() - 1].0 - g[r].0)))
                .sum::<u64>()
        })
        .sum();
    let k_sum: f64 = (0..n_o).filter(|&o| requested[o] > 0).map(|o| s.undertakings[o].capacity_share).sum();
    let growth = u64::from(s.grid_step_min.max(1));

    let grid_eps = |e: f64| -> f64 {
        if e <= params.epsilon + TOL {
            params.epsilon
        } else {
            let j = ((e - params.epsilon) / step - TOL).ceil();
            params.epsilon + j * step
        }
    };

    // Widen the deviation budget until no vector beyond it can fit the band in use.
    let mut extra = 0u64;
    let (front, eps_used) = loop {
        let cap = min_total + extra;
        let mut sets = Vec::with_capacity(n_od);
        for (od, p) in probs.iter().enumerate() {
            let caps = Caps { total: cap - (min_total - od_min[od]), owner: vec![INF; p.n_owners()] };
            let run = scan(p, &open[od], &caps, params.max_states, &s.od_pairs[od].id)?;
            sets.push(lifted_finals(p, &run, n_o));
        }
        let front = combine(&sets, n_o, cap);
        let eps_min = front.iter().map(|v| epsilon_star(s, &requested, v)).fold(f64::INFINITY, f64::min);
        let eps_used = grid_eps(eps_min);
        let beyond = (cap + 1) as f64;
        let certified =
            cap >= max_total || (k_sum > 0.0 && (1.0 - k_sum).abs() * beyond / (k_sum * n_y as f64) > eps_used + TOL);
        if certified {
            break (front, eps_used);
        }
        extra = if extra == 0 { growth } else { extra * 2 };
    };

    let feasible: Vec<&Vec<u64>> = front.iter().filter(|v| epsilon_star(s, &requested, v) <= eps_used + TOL).collect();
    let best = feasible.iter().map(|v| v.iter().sum::<u64>()).min().expect("non-empty front");
    let mut targets: Vec<Vec<u64>> = feasible.into_iter().filter(|v| v.iter().sum::<u64>() == best).cloned().collect();
    targets.sort();

    // Per-OD budgets that any decomposition of a target must respect.
    let owner_min: Vec<Vec<u64>> = probs
        .iter()
        .zip(&bounds)
        .map(|(p, b)| lift(p, &b.owner.iter().map(|x| x.at(0, 0)).collect::<Vec<_>>(), n_o))
        .collect();
    let caps: Vec<Caps> = probs
        .iter()
        .enumerate()
        .map(|(od, p)| {
            let owner = p
                .owners
                .iter()
                .map(|&o| {
                    let hi = targets.iter().map(|v| v[o]).max().unwrap_or(0);
                    let elsewhere: u64 = (0..n_od).filter(|&x| x != od).map(|x| owner_min[x][o]).sum();
                    hi.saturating_sub(elsewhere)
                })
                .collect();
            Caps { total: best - (min_total - od_min[od]), owner }
        })
        .collect();

    let mut cons = open.clone();
    let mut runs: Vec<Run> = Vec::with_capacity(n_od);
    let mut sets: Vec<Vec<Vec<u64>>> = Vec::with_capacity(n_od);
    for (od, p) in probs.iter().enumerate() {
        let run = scan(p, &cons[od], &caps[od], params.max_states, &s.od_pairs[od].id)?;
        sets.push(lifted_finals(p, &run, n_o));
        runs.push(run);
    }
    let mut pick = decompose(&sets, &targets).expect("targets are achievable");
    let mut witness: Vec<Vec<u8>> = (0..n_od).map(|od| runs[od].owners_of(pick[od])).collect();

    for o in 0..n_o {
        for od in 0..n_od {
            let Some(k) = probs[od].owners.iter().position(|&x| x == o) else {
                continue;
            };
            // Set when constraints change without a fresh scan behind them.
            let mut stale = false;
            for pos in 0..probs[od].len() {
                if cons[od].forbid[k][pos] || cons[od].force[pos] == Some(k) {
                    continue;
                }
                if witness[od][pos] != k as u8 {
                    cons[od].forbid[k][pos] = true;
                    stale = true;
                    continue;
                }
                let mut trial = cons[od].clone();
                trial.forbid[k][pos] = true;
                let run = scan(&probs[od], &trial, &caps[od], params.max_states, &s.od_pairs[od].id)?;
                let mut trial_sets = sets.clone();
                trial_sets[od] = lifted_finals(&probs[od], &run, n_o);
                match decompose(&trial_sets, &targets) {
                    Some(p) => {
                        cons[od] = trial;
                        runs[od] = run;
                        sets = trial_sets;
                        pick = p;
                        witness = (0..n_od).map(|x| runs[x].owners_of(pick[x])).collect();
                        stale = false;
                    }
                    None => {
                        cons[od].force[pos] = Some(k);
                        stale = true;
                    }
                }
            }
            if stale {
                runs[od] = scan(&probs[od], &cons[od], &caps[od], params.max_states, &s.od_pairs[od].id)?;
                sets[od] = lifted_finals(&probs[od], &runs[od], n_o);
                pick = decompose(&sets, &targets).expect("current witness stays achievable");
                witness = (0..n_od).map(|x| runs[x].owners_of(pick[x])).collect();
            }
        }
    }

    let mut moves = Vec::with_capacity(n_y);
    for (od, p) in probs.iter().enumerate() {
        for (k, &o) in p.owners.iter().enumerate() {
            let held: Vec<usize> = (0..p.len()).filter(|&pos| witness[od][pos] == k as u8).collect();
            let req: BTreeSet<usize> = bids[o].requested[od].clone();
            debug_assert_eq!(held.len(), req.len());
            moves.extend(req.into_iter().zip(held).map(|(r, a)| Move {
                undertaking: o,
                od,
                requested: r,
                allocated: a,
            }));
        }
    }
    let mut result = AllocationResult::from_moves(s, moves, Rule::Equity, Method::Exact);
    result.epsilon_used = Some(eps_used);
    Ok(result)
}
