use std::collections::VecDeque;

use super::{checked_bids, nearest_available_slot, AllocationResult, Method, Move, PriorityOrder, Rule, TieBreak};
use crate::error::Result;
use crate::model::{Bid, Scenario};

/// Serves one request per iteration to the pending undertaking with the fewest allocated
/// slots relative to its capacity share, φ = allocated / k. Undertakings not yet served
/// come first. Ties go to `order`, or to declaration order when absent. Each undertaking's
/// requests are taken OD pair by OD pair, earliest first.
pub fn allocate_equity_heuristic(
    s: &Scenario,
    bids: &[Bid],
    order: Option<&PriorityOrder>,
    tie: TieBreak,
) -> Result<AllocationResult> {
    let bids = checked_bids(s, bids)?;
    let rank: Vec<usize> = match order {
        Some(p) => {
            let seq = p.resolve(s)?;
            let mut rank = vec![0; seq.len()];
            for (i, &o) in seq.iter().enumerate() {
                rank[o] = i;
            }
            rank
        }
        None => (0..s.n_undertakings()).collect(),
    };
    let mut pending: Vec<VecDeque<(usize, usize)>> = bids
        .iter()
        .map(|b| b.requested.iter().enumerate().flat_map(|(od, set)| set.iter().map(move |&r| (od, r))).collect())
        .collect();
    let mut served = vec![0usize; bids.len()];
    let mut occupied: Vec<Vec<bool>> = s.slots.iter().map(|g| vec![false; g.len()]).collect();
    let mut moves = Vec::new();

    let n_y: usize = pending.iter().map(VecDeque::len).sum();
    for _ in 0..n_y {
        let o = (0..bids.len())
            .filter(|&o| !pending[o].is_empty())
            .min_by(|&a, &b| {
                let (ka, kb) = (s.undertakings[a].capacity_share, s.undertakings[b].capacity_share);
                // φ_a < φ_b  ⇔  served_a · k_b < served_b · k_a
                let (x, y) = (served[a] as f64 * kb, served[b] as f64 * ka);
                let tol = 1e-12 * x.abs().max(y.abs()).max(1.0);
                if (x - y).abs() <= tol {
                    rank[a].cmp(&rank[b])
                } else {
                    x.partial_cmp(&y).expect("finite")
                }
            })
            .expect("a pending request remains");
        let (od, r) = pending[o].pop_front().expect("pending");
        let a = nearest_available_slot(&s.slots[od], r, &occupied[od], tie)?;
        occupied[od][a] = true;
        served[o] += 1;
        moves.push(Move { undertaking: o, od, requested: r, allocated: a });
    }
    Ok(AllocationResult::from_moves(s, moves, Rule::Equity, Method::Heuristic))
}
