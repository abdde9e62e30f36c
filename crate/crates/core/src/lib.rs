//! Railway time-slot allocation in open-access markets.
//!
//! Undertakings bid for departure slots on a shared grid; the infrastructure manager
//! resolves conflicts by re-timing requests, either serving undertakings in a fixed
//! priority order or balancing deviations across them. [`economics`] turns an allocation
//! into operator profit, and [`equilibrium`] studies the bidding game those profits induce.

pub mod allocation;
pub mod economics;
pub mod equilibrium;
mod error;
pub mod fixtures;
pub mod model;
mod money;
pub mod selftest;
mod time;

pub use allocation::{
    allocate, compute_deviation, AllocationResult, AllocatorSpec, EquityParams, Method, Move, PriorityOrder,
    RetimingMap, Rule, TieBreak,
};
pub use economics::{payoff, PayoffBreakdown};
pub use equilibrium::{GameTensor, MixedProfile, SolverConfig, StrategySet};
pub use error::{Error, Result};
pub use model::{Allocation, Bid, Scenario, Violation};
pub use money::Cents;
pub use time::{format_duration, ClockTime};
