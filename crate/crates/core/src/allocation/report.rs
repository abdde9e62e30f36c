use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AllocationResult, Method, Move, RetimingMap, Rule};
use crate::error::{Error, Result};
use crate::model::{Bid, Scenario, Violation};
use crate::time::{format_duration, ClockTime};

#[derive(Serialize, Deserialize)]
struct MoveJson {
    requested: ClockTime,
    allocated: ClockTime,
    deviation_min: u32,
}

#[derive(Serialize, Deserialize)]
struct UndertakingJson {
    id: String,
    deviation_min: u64,
    slots: BTreeMap<String, Vec<MoveJson>>,
}

#[derive(Serialize, Deserialize)]
struct ResultJson {
    rule: Rule,
    method: Method,
    epsilon_used: Option<f64>,
    total_deviation_min: u64,
    undertakings: Vec<UndertakingJson>,
}

pub fn result_to_json(s: &Scenario, r: &AllocationResult) -> Result<String> {
    let undertakings = s
        .undertakings
        .iter()
        .enumerate()
        .map(|(o, u)| {
            let slots = s
                .od_pairs
                .iter()
                .enumerate()
                .map(|(od, w)| {
                    let moves = r
                        .retiming
                        .moves
                        .iter()
                        .filter(|m| m.undertaking == o && m.od == od)
                        .map(|m| MoveJson {
                            requested: s.time(od, m.requested),
                            allocated: s.time(od, m.allocated),
                            deviation_min: r.retiming.per_slot_deviation[&(o, od, m.requested)],
                        })
                        .collect();
                    (w.id.clone(), moves)
                })
                .collect();
            UndertakingJson { id: u.id.clone(), deviation_min: r.retiming.total_deviation[o], slots }
        })
        .collect();
    let doc = ResultJson {
        rule: r.rule,
        method: r.method,
        epsilon_used: r.epsilon_used,
        total_deviation_min: r.total_deviation(),
        undertakings,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Reads a result written by [`result_to_json`], returning it with the bids it resolves.
pub fn result_from_json(s: &Scenario, text: &str) -> Result<(AllocationResult, Vec<Bid>)> {
    let doc: ResultJson = serde_json::from_str(text)?;
    let mut moves = Vec::new();
    let mut bids: Vec<Bid> = s.undertakings.iter().map(|u| Bid::empty(u.id.clone(), s.n_od())).collect();
    for u in doc.undertakings {
        let o = s.undertaking_index(&u.id)?;
        for (od_id, list) in u.slots {
            let od = s.od_index(&od_id)?;
            for m in list {
                let requested = s.slot_index(od, m.requested)?;
                let allocated = s.slot_index(od, m.allocated)?;
                if !bids[o].requested[od].insert(requested) {
                    return Err(Error::Invalid(vec![Violation::new(
                        format!("undertakings.{}.slots.{od_id}", u.id),
                        format!("slot {} requested twice", m.requested),
                    )]));
                }
                moves.push(Move { undertaking: o, od, requested, allocated });
            }
        }
    }
    let retiming = RetimingMap::new(s, moves);
    let allocation = retiming.allocation(s);
    Ok((
        AllocationResult { allocation, retiming, rule: doc.rule, method: doc.method, epsilon_used: doc.epsilon_used },
        bids,
    ))
}

/// One CSV row per re-timing decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MoveRow {
    pub undertaking: String,
    pub od: String,
    pub requested: ClockTime,
    pub allocated: ClockTime,
    pub deviation_min: u32,
}

impl MoveRow {
    pub fn rows(s: &Scenario, r: &AllocationResult) -> Vec<MoveRow> {
        r.retiming
            .moves
            .iter()
            .map(|m| MoveRow {
                undertaking: s.undertakings[m.undertaking].id.clone(),
                od: s.od_pairs[m.od].id.clone(),
                requested: s.time(m.od, m.requested),
                allocated: s.time(m.od, m.allocated),
                deviation_min: r.retiming.per_slot_deviation[&(m.undertaking, m.od, m.requested)],
            })
            .collect()
    }
}

/// Deviation per undertaking and in total for one rule and method.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationSummary {
    pub rule: Rule,
    pub method: Method,
    pub undertakings: Vec<String>,
    pub deviation_min: Vec<u64>,
    pub epsilon_used: Option<f64>,
}

impl DeviationSummary {
    pub fn new(s: &Scenario, r: &AllocationResult) -> Self {
        DeviationSummary {
            rule: r.rule,
            method: r.method,
            undertakings: s.undertakings.iter().map(|u| u.id.clone()).collect(),
            deviation_min: r.deviations().to_vec(),
            epsilon_used: r.epsilon_used,
        }
    }

    pub fn total(&self) -> u64 {
        self.deviation_min.iter().sum()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["rule".to_string(), "method".to_string()];
        h.extend(self.undertakings.iter().map(|u| format!("{u}_min")));
        h.push("total_min".into());
        h.extend(self.undertakings.iter().cloned());
        h.push("total".into());
        h
    }

    pub fn row(&self) -> Vec<String> {
        let mut r = vec![format!("{:?}", self.rule).to_lowercase(), format!("{:?}", self.method).to_lowercase()];
        r.extend(self.deviation_min.iter().map(u64::to_string));
        r.push(self.total().to_string());
        r.extend(self.deviation_min.iter().map(|&d| format_duration(d)));
        r.push(format_duration(self.total()));
        r
    }
}

impl std::fmt::Display for DeviationSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} {:?}:", self.rule, self.method)?;
        for (u, d) in self.undertakings.iter().zip(&self.deviation_min) {
            write!(f, "  {u} {}", format_duration(*d))?;
        }
        write!(f, "  total {}", format_duration(self.total()))?;
        if let Some(e) = self.epsilon_used {
            write!(f, "  (epsilon {e:.4})")?;
        }
        Ok(())
    }
}
