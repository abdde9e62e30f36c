//! The shipped Madrid–Barcelona scenario and its bids.
//!
//! The demand curve is an approximation (`demand_profile: "approximate"`): its shape is
//! realistic, its numbers are not reproduction targets.

use crate::equilibrium::{strategy_sets_from_json, StrategySet};
use crate::model::{bids_from_json, scenario_from_json, Bid, Scenario};

pub const SCENARIO_JSON: &str = include_str!("../data/scenario.json");
pub const BIDS_PRIORITY_Y1: &str = include_str!("../data/bids_priority_y1.json");
pub const BIDS_PRIORITY_Y2: &str = include_str!("../data/bids_priority_y2.json");
pub const BIDS_EQUITY_Y1: &str = include_str!("../data/bids_equity_y1.json");
pub const BIDS_EQUITY_Y2: &str = include_str!("../data/bids_equity_y2.json");
pub const BIDS_DISJOINT: &str = include_str!("../data/bids_disjoint.json");
pub const STRATEGIES_PRIORITY: &str = include_str!("../data/strategies_priority.json");
pub const STRATEGIES_EQUITY: &str = include_str!("../data/strategies_equity.json");

pub fn scenario() -> Scenario {
    scenario_from_json(SCENARIO_JSON).expect("shipped scenario parses")
}

fn bids(text: &str) -> Vec<Bid> {
    bids_from_json(&scenario(), text).expect("shipped bids parse")
}

/// Priority-rule bids; `strategy` 1 or 2 selects RU2's pure strategy.
pub fn priority_bids(strategy: u8) -> Vec<Bid> {
    bids(if strategy == 1 { BIDS_PRIORITY_Y1 } else { BIDS_PRIORITY_Y2 })
}

/// Equity-rule bids; `strategy` 1 or 2 selects RU2's pure strategy.
pub fn equity_bids(strategy: u8) -> Vec<Bid> {
    bids(if strategy == 1 { BIDS_EQUITY_Y1 } else { BIDS_EQUITY_Y2 })
}

pub fn disjoint_bids() -> Vec<Bid> {
    bids(BIDS_DISJOINT)
}

pub fn priority_strategies() -> Vec<StrategySet> {
    strategy_sets_from_json(&scenario(), STRATEGIES_PRIORITY).expect("shipped strategies parse")
}

pub fn equity_strategies() -> Vec<StrategySet> {
    strategy_sets_from_json(&scenario(), STRATEGIES_EQUITY).expect("shipped strategies parse")
}
