use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Bid, OdPair, OperatingCost, Scenario, Undertaking, Violation};
use crate::error::{Error, Result};
use crate::money::Cents;
use crate::time::ClockTime;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    od_pairs: Vec<OdPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_step_min: Option<u32>,
    slots: BTreeMap<String, Vec<ClockTime>>,
    undertakings: Vec<RawUndertaking>,
    demand: BTreeMap<String, Vec<i64>>,
    fare: BTreeMap<String, Vec<Cents>>,
    trip_duration_min: u32,
    turnaround_min: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    demand_profile: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUndertaking {
    id: String,
    capacity_share: f64,
    daily_rolling_stock_cost: Cents,
    fixed_access_cost: Cents,
    per_slot_operating_cost: RawCost,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawCost {
    Uniform(Cents),
    PerSlot(BTreeMap<String, Vec<Cents>>),
}

fn per_od<T: Clone>(ods: &[OdPair], field: &str, mut m: BTreeMap<String, Vec<T>>) -> Result<Vec<Vec<T>>> {
    if let Some(k) = m.keys().find(|k| !ods.iter().any(|w| &w.id == *k)) {
        return Err(Error::UnknownOdPair(format!("{k} (in {field})")));
    }
    ods.iter()
        .map(|w| {
            m.remove(&w.id)
                .ok_or_else(|| Error::Invalid(vec![Violation::new(format!("{field}.{}", w.id), "missing OD pair")]))
        })
        .collect()
}

fn by_od<T: Clone>(ods: &[OdPair], v: &[Vec<T>]) -> BTreeMap<String, Vec<T>> {
    ods.iter().zip(v).map(|(w, x)| (w.id.clone(), x.clone())).collect()
}

/// Parses a scenario file. Structural problems are errors; invariants are left to
/// [`validate_scenario`](super::validate_scenario).
pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let raw: RawScenario = serde_json::from_str(text)?;
    let ods = raw.od_pairs;
    let slots = per_od(&ods, "slots", raw.slots)?;
    let grid_step_min = raw
        .grid_step_min
        .unwrap_or_else(|| slots.iter().find(|g| g.len() >= 2).map(|g| g[1].0.saturating_sub(g[0].0)).unwrap_or(30));
    let undertakings = raw
        .undertakings
        .into_iter()
        .map(|u| {
            let per_slot_operating_cost = match u.per_slot_operating_cost {
                RawCost::Uniform(c) => OperatingCost::Uniform(c),
                RawCost::PerSlot(m) => {
                    OperatingCost::PerSlot(per_od(&ods, &format!("undertakings.{}.per_slot_operating_cost", u.id), m)?)
                }
            };
            Ok(Undertaking {
                id: u.id,
                capacity_share: u.capacity_share,
                daily_rolling_stock_cost: u.daily_rolling_stock_cost,
                fixed_access_cost: u.fixed_access_cost,
                per_slot_operating_cost,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario {
        demand: per_od(&ods, "demand", raw.demand)?,
        fare: per_od(&ods, "fare", raw.fare)?,
        od_pairs: ods,
        slots,
        grid_step_min,
        undertakings,
        trip_duration_min: raw.trip_duration_min,
        turnaround_min: raw.turnaround_min,
        demand_profile: raw.demand_profile,
    })
}

pub fn scenario_to_json(s: &Scenario) -> Result<String> {
    let raw = RawScenario {
        od_pairs: s.od_pairs.clone(),
        grid_step_min: Some(s.grid_step_min),
        slots: by_od(&s.od_pairs, &s.slots),
        undertakings: s
            .undertakings
            .iter()
            .map(|u| RawUndertaking {
                id: u.id.clone(),
                capacity_share: u.capacity_share,
                daily_rolling_stock_cost: u.daily_rolling_stock_cost,
                fixed_access_cost: u.fixed_access_cost,
                per_slot_operating_cost: match &u.per_slot_operating_cost {
                    OperatingCost::Uniform(c) => RawCost::Uniform(*c),
                    OperatingCost::PerSlot(t) => RawCost::PerSlot(by_od(&s.od_pairs, t)),
                },
            })
            .collect(),
        demand: by_od(&s.od_pairs, &s.demand),
        fare: by_od(&s.od_pairs, &s.fare),
        trip_duration_min: s.trip_duration_min,
        turnaround_min: s.turnaround_min,
        demand_profile: s.demand_profile.clone(),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

/// Reads one bid given as `{od_id: ["HH:MM", ...]}`. Absent OD pairs mean no request.
pub fn bid_from_value(s: &Scenario, undertaking: &str, v: &Value) -> Result<Bid> {
    let field = format!("bids.{undertaking}");
    let m: BTreeMap<String, Vec<ClockTime>> = serde_json::from_value(v.clone())?;
    let mut bid = Bid::empty(undertaking, s.n_od());
    for (od_id, times) in m {
        let od = s.od_index(&od_id)?;
        for t in times {
            let r = s.slot_index(od, t)?;
            if !bid.requested[od].insert(r) {
                return Err(Error::Invalid(vec![Violation::new(
                    format!("{field}.{od_id}"),
                    format!("slot {t} requested twice"),
                )]));
            }
        }
    }
    Ok(bid)
}

pub fn bid_to_value(s: &Scenario, bid: &Bid) -> Value {
    let m: BTreeMap<String, Vec<ClockTime>> = s
        .od_pairs
        .iter()
        .zip(&bid.requested)
        .enumerate()
        .map(|(od, (w, req))| (w.id.clone(), times(s, od, req)))
        .collect();
    serde_json::to_value(m).expect("string map")
}

fn times(s: &Scenario, od: usize, set: &BTreeSet<usize>) -> Vec<ClockTime> {
    set.iter().map(|&r| s.time(od, r)).collect()
}

/// Parses `{undertaking: {od: [times]}}`, returned in scenario declaration order.
pub fn bids_from_json(s: &Scenario, text: &str) -> Result<Vec<Bid>> {
    let m: BTreeMap<String, Value> = serde_json::from_str(text)?;
    let mut out = Vec::with_capacity(m.len());
    for (id, v) in &m {
        s.undertaking_index(id)?;
        out.push(bid_from_value(s, id, v)?);
    }
    out.sort_by_key(|b| s.undertaking_index(&b.undertaking).unwrap_or(usize::MAX));
    Ok(out)
}

pub fn bids_to_json(s: &Scenario, bids: &[Bid]) -> Result<String> {
    let m: BTreeMap<&str, Value> = bids.iter().map(|b| (b.undertaking.as_str(), bid_to_value(s, b))).collect();
    Ok(serde_json::to_string_pretty(&m)?)
}
