use std::collections::BTreeSet;

use super::{Bid, OperatingCost, Scenario, Violation};
use crate::error::Result;

/// floor(k · n), tolerant of binary rounding in `k`.
pub fn capacity_bound(k: f64, n: usize) -> usize {
    if k.is_nan() || k <= 0.0 {
        return 0;
    }
    (k * n as f64 + 1e-9).floor() as usize
}

pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut v = Vec::new();
    if s.od_pairs.is_empty() {
        v.push(Violation::new("od_pairs", "at least one OD pair"));
    }
    let mut ids = BTreeSet::new();
    for w in &s.od_pairs {
        if !ids.insert(&w.id) {
            v.push(Violation::new(format!("od_pairs.{}", w.id), "unique id"));
        }
    }
    if s.grid_step_min == 0 {
        v.push(Violation::new("grid_step_min", "grid step > 0"));
    }
    if s.trip_duration_min == 0 {
        v.push(Violation::new("trip_duration_min", "trip duration > 0"));
    }
    let n = s.od_pairs.len();
    for (name, len) in [("slots", s.slots.len()), ("demand", s.demand.len()), ("fare", s.fare.len())] {
        if len != n {
            v.push(Violation::new(name, format!("one entry per OD pair ({n}), found {len}")));
        }
    }
    if !v.is_empty() {
        return v;
    }

    for (od, w) in s.od_pairs.iter().enumerate() {
        let grid = &s.slots[od];
        if grid.is_empty() {
            v.push(Violation::new(format!("slots.{}", w.id), "at least one slot"));
        }
        for (i, p) in grid.windows(2).enumerate() {
            if p[1] <= p[0] {
                v.push(Violation::new(format!("slots.{}[{}]", w.id, i + 1), "slot times strictly increasing"));
            } else if p[1].0 - p[0].0 != s.grid_step_min {
                v.push(Violation::new(
                    format!("slots.{}[{}]", w.id, i + 1),
                    format!("consecutive slots differ by the grid step ({} min)", s.grid_step_min),
                ));
            }
        }
        if s.demand[od].len() != grid.len() {
            v.push(Violation::new(format!("demand.{}", w.id), "demand defined for every slot"));
        } else if let Some(i) = s.demand[od].iter().position(|&g| g < 0) {
            v.push(Violation::new(format!("demand.{}[{i}]", w.id), "demand ≥ 0"));
        }
        if s.fare[od].len() != grid.len() {
            v.push(Violation::new(format!("fare.{}", w.id), "fare defined for every slot"));
        } else if let Some(i) = s.fare[od].iter().position(|z| z.0 < 0) {
            v.push(Violation::new(format!("fare.{}[{i}]", w.id), "fare ≥ 0"));
        }
        let total: usize = (0..s.undertakings.len()).map(|o| s.capacity(o, od)).sum();
        if total > grid.len() {
            v.push(Violation::new(
                format!("undertakings.capacity_share@{}", w.id),
                format!("capacity oversubscription ({total} > {} slots)", grid.len()),
            ));
        }
    }

    let mut ids = BTreeSet::new();
    for u in &s.undertakings {
        let f = |x: &str| format!("undertakings.{}.{x}", u.id);
        if !ids.insert(&u.id) {
            v.push(Violation::new(f("id"), "unique id"));
        }
        if !(u.capacity_share > 0.0 && u.capacity_share <= 1.0) {
            v.push(Violation::new(f("capacity_share"), "capacity_share ∈ (0,1]"));
        }
        if u.daily_rolling_stock_cost.0 < 0 {
            v.push(Violation::new(f("daily_rolling_stock_cost"), "cost ≥ 0"));
        }
        if u.fixed_access_cost.0 < 0 {
            v.push(Violation::new(f("fixed_access_cost"), "cost ≥ 0"));
        }
        match &u.per_slot_operating_cost {
            OperatingCost::Uniform(c) => {
                if c.0 < 0 {
                    v.push(Violation::new(f("per_slot_operating_cost"), "cost ≥ 0"));
                }
            }
            OperatingCost::PerSlot(t) => {
                let shape_ok = t.len() == n && t.iter().zip(&s.slots).all(|(a, b)| a.len() == b.len());
                if !shape_ok {
                    v.push(Violation::new(f("per_slot_operating_cost"), "one cost per slot"));
                } else if t.iter().flatten().any(|c| c.0 < 0) {
                    v.push(Violation::new(f("per_slot_operating_cost"), "cost ≥ 0"));
                }
            }
        }
    }
    v
}

/// Errors only on an unknown undertaking; everything else is reported as violations.
pub fn validate_bid(s: &Scenario, bid: &Bid) -> Result<Vec<Violation>> {
    let o = s.undertaking_index(&bid.undertaking)?;
    let mut v = Vec::new();
    if bid.requested.len() != s.n_od() {
        v.push(Violation::new(
            format!("bids.{}", bid.undertaking),
            format!("one slot list per OD pair ({}), found {}", s.n_od(), bid.requested.len()),
        ));
        return Ok(v);
    }
    for (od, req) in bid.requested.iter().enumerate() {
        let field = format!("bids.{}.{}", bid.undertaking, s.od_pairs[od].id);
        if let Some(&r) = req.iter().find(|&&r| r >= s.slots[od].len()) {
            v.push(Violation::new(&field, format!("slot index {r} outside the grid")));
        }
        let bound = s.capacity(o, od);
        if req.len() > bound {
            v.push(Violation::new(
                field,
                format!("requested {} slots, capacity bound floor(k·|R|) = {bound}", req.len()),
            ));
        }
    }
    Ok(v)
}
