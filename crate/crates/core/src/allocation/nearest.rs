use super::TieBreak;
use crate::error::{Error, Result};
use crate::time::ClockTime;

/// Free slot of `grid` closest in time to `grid[target]`.
pub fn nearest_available_slot(grid: &[ClockTime], target: usize, occupied: &[bool], tie: TieBreak) -> Result<usize> {
    if target < grid.len() && !occupied[target] {
        return Ok(target);
    }
    let t = grid.get(target).ok_or(Error::NoFreeSlot)?.0;
    let below = (0..target).rev().find(|&i| !occupied[i]);
    let above = (target + 1..grid.len()).find(|&i| !occupied[i]);
    match (below, above) {
        (None, None) => Err(Error::NoFreeSlot),
        (Some(b), None) => Ok(b),
        (None, Some(a)) => Ok(a),
        (Some(b), Some(a)) => {
            let (db, da) = (t - grid[b].0, grid[a].0 - t);
            Ok(match db.cmp(&da) {
                std::cmp::Ordering::Less => b,
                std::cmp::Ordering::Greater => a,
                std::cmp::Ordering::Equal => match tie {
                    TieBreak::Earlier => b,
                    TieBreak::Later => a,
                },
            })
        }
    }
}
