//! Allocation rules: priority and equity, each heuristic and exact.

mod equity;
mod equity_exact;
mod hungarian;
mod nearest;
mod pareto;
mod priority;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{align_bids, validate_bid, Allocation, Bid, Scenario};

pub use equity::allocate_equity_heuristic;
pub use equity_exact::{allocate_equity_exact, band_epsilon};
pub use hungarian::{min_cost_assignment, Assignment};
pub use nearest::nearest_available_slot;
pub use pareto::{dominates, is_non_dominated, pareto_bruteforce, ParetoSet, ORACLE_MAX_REQUESTS, ORACLE_MAX_SLOTS};
pub use priority::{allocate_priority_exact, allocate_priority_heuristic, retime_exact, retime_heuristic};
pub use report::{result_from_json, result_to_json, DeviationSummary, MoveRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Priority,
    Equity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Heuristic,
    Exact,
}

/// Which of two equidistant free slots wins when a request is re-timed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    Earlier,
    #[default]
    Later,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityOrder(pub Vec<String>);

impl PriorityOrder {
    pub fn declaration(s: &Scenario) -> Self {
        PriorityOrder(s.undertakings.iter().map(|u| u.id.clone()).collect())
    }

    /// Undertaking indices in service order.
    pub fn resolve(&self, s: &Scenario) -> Result<Vec<usize>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(self.0.len());
        for id in &self.0 {
            let o = s
                .undertaking_index(id)
                .map_err(|_| Error::InvalidPriorityOrder(format!("unknown undertaking {id:?}")))?;
            if !seen.insert(o) {
                return Err(Error::InvalidPriorityOrder(format!("{id:?} listed twice")));
            }
            out.push(o);
        }
        if out.len() != s.n_undertakings() {
            let missing: Vec<_> = s
                .undertakings
                .iter()
                .enumerate()
                .filter(|(o, _)| !seen.contains(o))
                .map(|(_, u)| u.id.as_str())
                .collect();
            return Err(Error::InvalidPriorityOrder(format!("missing {}", missing.join(", "))));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquityParams {
    /// Starting band half-width, minutes per normalized slot.
    pub epsilon: f64,
    /// Band growth per step; `None` means one grid step divided by the request count.
    pub epsilon_search_step: Option<f64>,
    /// Upper bound on search states kept per dynamic-programming layer.
    pub max_states: usize,
}

impl Default for EquityParams {
    fn default() -> Self {
        EquityParams { epsilon: 0.0, epsilon_search_step: None, max_states: 2_000_000 }
    }
}

/// One re-timing decision: `requested` slot moved to `allocated` on the same OD pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Move {
    pub undertaking: usize,
    pub od: usize,
    pub requested: usize,
    pub allocated: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetimingMap {
    /// Sorted by undertaking, OD pair, requested slot.
    pub moves: Vec<Move>,
    /// `(undertaking, od, requested slot) -> minutes`.
    pub per_slot_deviation: BTreeMap<(usize, usize, usize), u32>,
    pub total_deviation: Vec<u64>,
}

impl RetimingMap {
    pub fn new(s: &Scenario, mut moves: Vec<Move>) -> Self {
        moves.sort();
        let mut per_slot_deviation = BTreeMap::new();
        let mut total_deviation = vec![0u64; s.n_undertakings()];
        for m in &moves {
            let d = s.time(m.od, m.requested).0.abs_diff(s.time(m.od, m.allocated).0);
            per_slot_deviation.insert((m.undertaking, m.od, m.requested), d);
            total_deviation[m.undertaking] += u64::from(d);
        }
        RetimingMap { moves, per_slot_deviation, total_deviation }
    }

    pub fn allocation(&self, s: &Scenario) -> Allocation {
        let mut a = Allocation::empty(s.n_undertakings(), s.n_od());
        for m in &self.moves {
            a.assigned[m.undertaking][m.od].insert(m.allocated);
        }
        a
    }

    pub fn total(&self) -> u64 {
        self.total_deviation.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationResult {
    pub allocation: Allocation,
    pub retiming: RetimingMap,
    pub rule: Rule,
    pub method: Method,
    pub epsilon_used: Option<f64>,
}

impl AllocationResult {
    pub(crate) fn from_moves(s: &Scenario, moves: Vec<Move>, rule: Rule, method: Method) -> Self {
        let retiming = RetimingMap::new(s, moves);
        AllocationResult { allocation: retiming.allocation(s), retiming, rule, method, epsilon_used: None }
    }

    pub fn deviations(&self) -> &[u64] {
        &self.retiming.total_deviation
    }

    pub fn total_deviation(&self) -> u64 {
        self.retiming.total()
    }
}

/// Everything needed to run one allocation rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocatorSpec {
    pub rule: Rule,
    pub method: Method,
    /// Service order for the priority rule and tie order for the equity heuristic.
    pub order: Option<PriorityOrder>,
    pub tie_break: TieBreak,
    pub equity: EquityParams,
}

impl AllocatorSpec {
    pub fn new(rule: Rule, method: Method) -> Self {
        AllocatorSpec { rule, method, order: None, tie_break: TieBreak::default(), equity: EquityParams::default() }
    }
}

pub fn allocate(s: &Scenario, bids: &[Bid], spec: &AllocatorSpec) -> Result<AllocationResult> {
    let order = spec.order.clone().unwrap_or_else(|| PriorityOrder::declaration(s));
    match (spec.rule, spec.method) {
        (Rule::Priority, Method::Heuristic) => allocate_priority_heuristic(s, bids, &order, spec.tie_break),
        (Rule::Priority, Method::Exact) => allocate_priority_exact(s, bids, &order, spec.tie_break),
        (Rule::Equity, Method::Heuristic) => allocate_equity_heuristic(s, bids, spec.order.as_ref(), spec.tie_break),
        (Rule::Equity, Method::Exact) => allocate_equity_exact(s, bids, &spec.equity),
    }
}

/// Aligns bids to the scenario and rejects any that break their capacity bound.
pub(crate) fn checked_bids(s: &Scenario, bids: &[Bid]) -> Result<Vec<Bid>> {
    let bids = align_bids(s, bids)?;
    let mut v = Vec::new();
    for b in &bids {
        v.extend(validate_bid(s, b)?);
    }
    if v.is_empty() {
        Ok(bids)
    } else {
        Err(Error::Invalid(v))
    }
}

/// Per-undertaking deviation recomputed from the move indicators `h`, checking that
/// every requested slot is re-timed exactly once within its OD pair.
pub fn compute_deviation(s: &Scenario, bids: &[Bid], retiming: &RetimingMap) -> Result<Vec<u64>> {
    let bids = align_bids(s, bids)?;
    let bad = |m: String| Err(Error::InconsistentRetiming(m));
    let mut h: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    for m in &retiming.moves {
        if m.undertaking >= bids.len() || m.od >= s.n_od() {
            return bad(format!("move {m:?} outside the scenario"));
        }
        let n = s.slots[m.od].len();
        if m.requested >= n || m.allocated >= n {
            return bad(format!("move {m:?} outside the slot grid"));
        }
        if !bids[m.undertaking].requested[m.od].contains(&m.requested) {
            return bad(format!("move {m:?} re-times a slot that was not requested"));
        }
        h.entry((m.undertaking, m.od, m.requested)).or_default().push(m.allocated);
    }
    let mut d = vec![0u64; bids.len()];
    for (o, b) in bids.iter().enumerate() {
        for (od, req) in b.requested.iter().enumerate() {
            for &r in req {
                let targets = h.get(&(o, od, r)).map(Vec::as_slice).unwrap_or(&[]);
                if targets.len() != 1 {
                    return bad(format!(
                        "{} slot {} on {} has {} re-timings, expected 1",
                        b.undertaking,
                        s.time(od, r),
                        s.od_pairs[od].id,
                        targets.len()
                    ));
                }
                let t_r = s.time(od, r).0;
                for (r2, &t2) in s.slots[od].iter().enumerate() {
                    let h_rr2 = u64::from(targets.contains(&r2));
                    d[o] += h_rr2 * u64::from(t_r.abs_diff(t2.0));
                }
            }
        }
    }
    Ok(d)
}
