use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::checked_bids;
use crate::error::{Error, Result};
use crate::model::{Bid, Scenario};

pub const ORACLE_MAX_REQUESTS: usize = 8;
pub const ORACLE_MAX_SLOTS: usize = 10;

/// Non-dominated deviation vectors (minutes, one entry per undertaking), sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoSet {
    pub vectors: Vec<Vec<u64>>,
}

impl ParetoSet {
    pub fn contains(&self, v: &[u64]) -> bool {
        self.vectors.iter().any(|x| x == v)
    }
}

/// `a ≤ b` componentwise with at least one strict inequality.
pub fn dominates(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

pub fn is_non_dominated(v: &[u64], set: &ParetoSet) -> bool {
    !set.vectors.iter().any(|p| dominates(p, v))
}

/// Distinct non-dominated members of `vs`, sorted.
pub(crate) fn pareto_front(mut vs: Vec<Vec<u64>>) -> Vec<Vec<u64>> {
    vs.sort_by_cached_key(|v| (v.iter().sum::<u64>(), v.clone()));
    vs.dedup();
    let mut kept: Vec<Vec<u64>> = Vec::new();
    for v in vs {
        if !kept.iter().any(|k| k.iter().zip(&v).all(|(a, b)| a <= b)) {
            kept.push(v);
        }
    }
    kept.sort();
    kept
}

/// Enumerates every conflict-free complete re-timing and keeps the non-dominated
/// deviation vectors. Refuses instances with more than eight requests in total or more
/// than ten slots on an OD pair.
pub fn pareto_bruteforce(s: &Scenario, bids: &[Bid]) -> Result<ParetoSet> {
    let bids = checked_bids(s, bids)?;
    let n_o = bids.len();
    let total: usize = bids.iter().map(Bid::len).sum();
    if total > ORACLE_MAX_REQUESTS {
        return Err(Error::OracleScaleExceeded(format!("{total} requests, limit {ORACLE_MAX_REQUESTS}")));
    }
    if let Some(g) = s.slots.iter().find(|g| g.len() > ORACLE_MAX_SLOTS) {
        return Err(Error::OracleScaleExceeded(format!("{} slots on one OD pair, limit {ORACLE_MAX_SLOTS}", g.len())));
    }
    let mut acc = vec![vec![0u64; n_o]];
    for od in 0..s.n_od() {
        let req: Vec<(usize, usize)> =
            bids.iter().enumerate().flat_map(|(o, b)| b.requested[od].iter().map(move |&r| (o, r))).collect();
        let grid: Vec<u32> = s.slots[od].iter().map(|t| t.0).collect();
        if req.len() > grid.len() {
            return Ok(ParetoSet { vectors: Vec::new() });
        }
        let mut found = BTreeSet::new();
        let mut used = vec![false; grid.len()];
        let mut d = vec![0u64; n_o];
        enumerate(&req, &grid, 0, &mut used, &mut d, &mut found);
        let set = pareto_front(found.into_iter().collect());
        let mut next = Vec::new();
        for a in &acc {
            for b in &set {
                next.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
            }
        }
        acc = pareto_front(next);
    }
    Ok(ParetoSet { vectors: acc })
}

fn enumerate(
    req: &[(usize, usize)],
    grid: &[u32],
    i: usize,
    used: &mut [bool],
    d: &mut [u64],
    out: &mut BTreeSet<Vec<u64>>,
) {
    if i == req.len() {
        out.insert(d.to_vec());
        return;
    }
    let (o, r) = req[i];
    for j in 0..grid.len() {
        if used[j] {
            continue;
        }
        let c = u64::from(grid[r].abs_diff(grid[j]));
        used[j] = true;
        d[o] += c;
        enumerate(req, grid, i + 1, used, d, out);
        d[o] -= c;
        used[j] = false;
    }
}
