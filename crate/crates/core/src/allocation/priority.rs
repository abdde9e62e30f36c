use super::{checked_bids, min_cost_assignment, nearest_available_slot, Assignment};
use super::{AllocationResult, Method, Move, PriorityOrder, Rule, TieBreak};
use crate::error::{Error, Result};
use crate::model::{Bid, Scenario};
use crate::time::ClockTime;

/// Serves `requests` in ascending order, each to its slot if free or else to the nearest
/// free slot. Marks the chosen slots in `occupied`. Returns `(requested, allocated)` pairs.
pub fn retime_heuristic(
    grid: &[ClockTime],
    requests: &[usize],
    occupied: &mut [bool],
    tie: TieBreak,
) -> Result<Vec<(usize, usize)>> {
    let mut req = requests.to_vec();
    req.sort_unstable();
    let mut out = Vec::with_capacity(req.len());
    for r in req {
        let a = nearest_available_slot(grid, r, occupied, tie)?;
        occupied[a] = true;
        out.push((r, a));
    }
    Ok(out)
}

fn assign(grid: &[ClockTime], req: &[usize], cols: &[usize]) -> Option<Assignment> {
    let cost: Vec<Vec<i64>> =
        req.iter().map(|&r| cols.iter().map(|&c| i64::from(grid[r].0.abs_diff(grid[c].0))).collect()).collect();
    min_cost_assignment(&cost)
}

/// Minimum-total-deviation re-timing of `requests` into unoccupied slots.
///
/// Among optimal slot sets, `TieBreak::Later` keeps the one whose indicator vector over
/// the grid (earliest slot first) is lexicographically smallest, i.e. later slots win;
/// `Earlier` mirrors it. Requests are paired with the chosen slots in time order.
pub fn retime_exact(
    grid: &[ClockTime],
    requests: &[usize],
    occupied: &[bool],
    tie: TieBreak,
) -> Result<Vec<(usize, usize)>> {
    let mut req = requests.to_vec();
    req.sort_unstable();
    if req.is_empty() {
        return Ok(Vec::new());
    }
    let mut cols: Vec<usize> = (0..grid.len()).filter(|&i| !occupied[i]).collect();
    if cols.len() < req.len() {
        return Err(Error::InsufficientSlots { od: String::new(), requests: req.len(), free: cols.len() });
    }
    let first = assign(grid, &req, &cols).expect("enough columns");
    let target = first.cost;
    let mut used: Vec<usize> = first.columns.iter().map(|&j| cols[j]).collect();

    let mut scan = cols.clone();
    if tie == TieBreak::Earlier {
        scan.reverse();
    }
    for f in scan {
        if !used.contains(&f) {
            cols.retain(|&c| c != f);
            continue;
        }
        let trial: Vec<usize> = cols.iter().copied().filter(|&c| c != f).collect();
        if trial.len() < req.len() {
            continue;
        }
        if let Some(a) = assign(grid, &req, &trial) {
            if a.cost == target {
                used = a.columns.iter().map(|&j| trial[j]).collect();
                cols = trial;
            }
        }
    }
    used.sort_unstable();
    Ok(req.into_iter().zip(used).collect())
}

fn run(s: &Scenario, bids: &[Bid], order: &PriorityOrder, method: Method, tie: TieBreak) -> Result<AllocationResult> {
    let bids = checked_bids(s, bids)?;
    let order = order.resolve(s)?;
    let mut occupied: Vec<Vec<bool>> = s.slots.iter().map(|g| vec![false; g.len()]).collect();
    let mut moves = Vec::new();
    for o in order {
        for (od, req) in bids[o].requested.iter().enumerate() {
            let req: Vec<usize> = req.iter().copied().collect();
            let grid = &s.slots[od];
            let pairs = match method {
                Method::Heuristic => retime_heuristic(grid, &req, &mut occupied[od], tie)?,
                Method::Exact => {
                    let p = retime_exact(grid, &req, &occupied[od], tie).map_err(|e| match e {
                        Error::InsufficientSlots { requests, free, .. } => {
                            Error::InsufficientSlots { od: s.od_pairs[od].id.clone(), requests, free }
                        }
                        e => e,
                    })?;
                    for &(_, a) in &p {
                        occupied[od][a] = true;
                    }
                    p
                }
            };
            moves.extend(pairs.into_iter().map(|(r, a)| Move { undertaking: o, od, requested: r, allocated: a }));
        }
    }
    Ok(AllocationResult::from_moves(s, moves, Rule::Priority, method))
}

/// Serves undertakings one after another; each request goes to its slot if still free,
/// otherwise to the nearest free slot.
pub fn allocate_priority_heuristic(
    s: &Scenario,
    bids: &[Bid],
    order: &PriorityOrder,
    tie: TieBreak,
) -> Result<AllocationResult> {
    run(s, bids, order, Method::Heuristic, tie)
}

/// Serves undertakings one after another; each gets the re-timing of minimum total
/// deviation into the slots left by those served before it.
pub fn allocate_priority_exact(
    s: &Scenario,
    bids: &[Bid],
    order: &PriorityOrder,
    tie: TieBreak,
) -> Result<AllocationResult> {
    run(s, bids, order, Method::Exact, tie)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: u32) -> Vec<ClockTime> {
        (0..n).map(|i| ClockTime(360 + 30 * i)).collect()
    }

    fn cost(g: &[ClockTime], p: &[(usize, usize)]) -> u32 {
        p.iter().map(|&(r, a)| g[r].0.abs_diff(g[a].0)).sum()
    }

    #[test]
    fn exact_prefers_later_slots_among_optima() {
        let g = grid(5);
        let mut occ = vec![false; 5];
        occ[2] = true;
        let p = retime_exact(&g, &[2], &occ, TieBreak::Later).unwrap();
        assert_eq!(p, vec![(2, 3)]);
        let p = retime_exact(&g, &[2], &occ, TieBreak::Earlier).unwrap();
        assert_eq!(p, vec![(2, 1)]);
    }

    #[test]
    fn exact_beats_greedy_when_greedy_blocks_itself() {
        // requests at 1 and 2, slot 1 taken: greedy sends 1 -> 2 (later tie) and 2 -> 3
        let g = grid(6);
        let mut occ = vec![false; 6];
        occ[1] = true;
        let mut h = occ.clone();
        let greedy = retime_heuristic(&g, &[1, 2], &mut h, TieBreak::Later).unwrap();
        let exact = retime_exact(&g, &[1, 2], &occ, TieBreak::Later).unwrap();
        assert_eq!(cost(&g, &greedy), 60);
        assert_eq!(cost(&g, &exact), 30);
        assert_eq!(exact, vec![(1, 0), (2, 2)]);
    }

    #[test]
    fn exact_reports_shortage() {
        let g = grid(3);
        let occ = vec![true, true, false];
        assert!(matches!(
            retime_exact(&g, &[0, 1], &occ, TieBreak::Later),
            Err(Error::InsufficientSlots { requests: 2, free: 1, .. })
        ));
    }
}
