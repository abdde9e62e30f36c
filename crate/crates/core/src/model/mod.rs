//! Scenario, bid and allocation types.

mod io;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Cents;
use crate::time::ClockTime;

pub use io::{bid_from_value, bid_to_value, bids_from_json, bids_to_json, scenario_from_json, scenario_to_json};
pub use validate::{capacity_bound, validate_bid, validate_scenario};

/// A broken invariant, reported as data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OdPair {
    pub id: String,
    pub origin: String,
    pub destination: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeSlot {
    pub index: usize,
    pub time: ClockTime,
    pub od: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatingCost {
    Uniform(Cents),
    /// Indexed `[od][slot]`.
    PerSlot(Vec<Vec<Cents>>),
}

impl OperatingCost {
    pub fn at(&self, od: usize, slot: usize) -> Cents {
        match self {
            OperatingCost::Uniform(c) => *c,
            OperatingCost::PerSlot(v) => v[od][slot],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Undertaking {
    pub id: String,
    pub capacity_share: f64,
    pub daily_rolling_stock_cost: Cents,
    pub fixed_access_cost: Cents,
    pub per_slot_operating_cost: OperatingCost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub od_pairs: Vec<OdPair>,
    /// Departure times, `[od][slot]`.
    pub slots: Vec<Vec<ClockTime>>,
    pub grid_step_min: u32,
    pub undertakings: Vec<Undertaking>,
    /// Passengers, `[od][slot]`.
    pub demand: Vec<Vec<i64>>,
    /// Ticket price, `[od][slot]`.
    pub fare: Vec<Vec<Cents>>,
    pub trip_duration_min: u32,
    pub turnaround_min: u32,
    pub demand_profile: Option<String>,
}

impl Scenario {
    pub fn n_od(&self) -> usize {
        self.od_pairs.len()
    }

    pub fn n_undertakings(&self) -> usize {
        self.undertakings.len()
    }

    pub fn time(&self, od: usize, slot: usize) -> ClockTime {
        self.slots[od][slot]
    }

    pub fn time_slot(&self, od: usize, index: usize) -> TimeSlot {
        TimeSlot { index, time: self.slots[od][index], od }
    }

    pub fn undertaking_index(&self, id: &str) -> Result<usize> {
        self.undertakings.iter().position(|u| u.id == id).ok_or_else(|| Error::UnknownUndertaking(id.to_string()))
    }

    pub fn od_index(&self, id: &str) -> Result<usize> {
        self.od_pairs.iter().position(|w| w.id == id).ok_or_else(|| Error::UnknownOdPair(id.to_string()))
    }

    pub fn slot_index(&self, od: usize, t: ClockTime) -> Result<usize> {
        self.slots[od]
            .binary_search(&t)
            .map_err(|_| Error::UnknownSlot { od: self.od_pairs[od].id.clone(), time: t.to_string() })
    }

    /// Per-OD request bound floor(k_o · |R_w|).
    pub fn capacity(&self, o: usize, od: usize) -> usize {
        capacity_bound(self.undertakings[o].capacity_share, self.slots[od].len())
    }
}

/// Requested slots of one undertaking, as slot indices per OD pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bid {
    pub undertaking: String,
    pub requested: Vec<BTreeSet<usize>>,
}

impl Bid {
    pub fn empty(undertaking: impl Into<String>, n_od: usize) -> Self {
        Bid { undertaking: undertaking.into(), requested: vec![BTreeSet::new(); n_od] }
    }

    pub fn from_indices(undertaking: impl Into<String>, per_od: Vec<Vec<usize>>) -> Self {
        Bid {
            undertaking: undertaking.into(),
            requested: per_od.into_iter().map(|v| v.into_iter().collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.requested.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Slots held by each undertaking, `[undertaking][od]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allocation {
    pub assigned: Vec<Vec<BTreeSet<usize>>>,
}

impl Allocation {
    pub fn empty(n_undertakings: usize, n_od: usize) -> Self {
        Allocation { assigned: vec![vec![BTreeSet::new(); n_od]; n_undertakings] }
    }

    pub fn holds(&self, o: usize, od: usize, slot: usize) -> bool {
        self.assigned[o][od].contains(&slot)
    }

    /// First undertaking holding the slot, if any.
    pub fn owner(&self, od: usize, slot: usize) -> Option<usize> {
        self.assigned.iter().position(|a| a[od].contains(&slot))
    }

    pub fn count(&self, o: usize) -> usize {
        self.assigned[o].iter().map(BTreeSet::len).sum()
    }

    /// Slots held by more than one undertaking, as `(od, slot)`.
    pub fn conflicts(&self) -> Vec<(usize, usize)> {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        for a in &self.assigned {
            for (od, set) in a.iter().enumerate() {
                for &s in set {
                    if !seen.insert((od, s)) {
                        out.insert((od, s));
                    }
                }
            }
        }
        out.into_iter().collect()
    }
}

/// Bids aligned to scenario undertaking order; missing undertakings get an empty bid.
pub fn align_bids(scenario: &Scenario, bids: &[Bid]) -> Result<Vec<Bid>> {
    let n_od = scenario.n_od();
    let mut out: Vec<Option<Bid>> = vec![None; scenario.n_undertakings()];
    for b in bids {
        let o = scenario.undertaking_index(&b.undertaking)?;
        if out[o].is_some() {
            return Err(Error::Invalid(vec![Violation::new(
                format!("bids.{}", b.undertaking),
                "at most one bid per undertaking",
            )]));
        }
        if b.requested.len() != n_od {
            return Err(Error::Invalid(vec![Violation::new(
                format!("bids.{}", b.undertaking),
                format!("expected {n_od} OD pairs, found {}", b.requested.len()),
            )]));
        }
        out[o] = Some(b.clone());
    }
    Ok(out
        .into_iter()
        .zip(&scenario.undertakings)
        .map(|(b, u)| b.unwrap_or_else(|| Bid::empty(u.id.clone(), n_od)))
        .collect())
}
