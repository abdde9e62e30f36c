//! Finite games induced by strategy sets and an allocation rule, and their mixed
//! equilibria.

mod solver;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::allocation::{allocate, AllocatorSpec, Method, Rule};
use crate::economics::payoff;
use crate::error::{Error, Result};
use crate::model::{bid_from_value, bid_to_value, validate_bid, Bid, Scenario, Violation};

pub use solver::{enumerate_equilibria, solve_equilibrium, SolverConfig, SupportOrder};

/// Candidate bids of one undertaking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategySet {
    pub undertaking: String,
    pub strategies: Vec<Bid>,
}

/// Parses `{undertaking: [bid, ...]}`, returned in scenario declaration order.
pub fn strategy_sets_from_json(s: &Scenario, text: &str) -> Result<Vec<StrategySet>> {
    let m: BTreeMap<String, Vec<Value>> = serde_json::from_str(text)?;
    let mut out = Vec::with_capacity(m.len());
    for (id, list) in &m {
        s.undertaking_index(id)?;
        let strategies = list.iter().map(|v| bid_from_value(s, id, v)).collect::<Result<Vec<_>>>()?;
        out.push(StrategySet { undertaking: id.clone(), strategies });
    }
    out.sort_by_key(|x| s.undertaking_index(&x.undertaking).unwrap_or(usize::MAX));
    Ok(out)
}

pub fn strategy_sets_to_json(s: &Scenario, sets: &[StrategySet]) -> Result<String> {
    let m: BTreeMap<&str, Vec<Value>> = sets
        .iter()
        .map(|x| (x.undertaking.as_str(), x.strategies.iter().map(|b| bid_to_value(s, b)).collect()))
        .collect();
    Ok(serde_json::to_string_pretty(&m)?)
}

/// Payoff of every player at every joint pure strategy. Joint strategies are laid out
/// row-major with the first player most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct GameTensor {
    pub players: Vec<String>,
    pub shape: Vec<usize>,
    /// `payoffs[joint * players + o]`, in euros.
    pub payoffs: Vec<f64>,
    /// Allocation rule and method that produced the outcomes, when built from a scenario.
    pub source: Option<(Rule, Method)>,
}

impl GameTensor {
    /// A tensor from explicit payoffs, `entries[joint][player]`.
    pub fn from_entries(players: Vec<String>, shape: Vec<usize>, entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = players.len();
        let size: usize = shape.iter().product();
        if shape.len() != n || entries.len() != size || entries.iter().any(|e| e.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "tensor needs {size} entries of {n} payoffs for shape {shape:?}"
            )));
        }
        if shape.contains(&0) || entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("tensor must be non-empty and finite".into()));
        }
        Ok(GameTensor { players, shape, payoffs: entries.into_iter().flatten().collect(), source: None })
    }

    pub fn n_players(&self) -> usize {
        self.shape.len()
    }

    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn entry(&self, joint: usize) -> &[f64] {
        let n = self.n_players();
        &self.payoffs[joint * n..joint * n + n]
    }

    pub fn joint_index(&self, strategies: &[usize]) -> usize {
        strategies.iter().zip(&self.shape).fold(0, |acc, (&s, &k)| acc * k + s)
    }

    pub fn strategies_of(&self, mut joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_players()];
        for o in (0..self.n_players()).rev() {
            out[o] = joint % self.shape[o];
            joint /= self.shape[o];
        }
        out
    }
}

/// Builds the game: for every joint strategy, allocates with `spec` and records each
/// player's payoff. Joint strategies are evaluated in parallel.
pub fn build_game(s: &Scenario, sets: &[StrategySet], spec: &AllocatorSpec, budget: usize) -> Result<GameTensor> {
    let mut by_player: Vec<Option<&StrategySet>> = vec![None; s.n_undertakings()];
    for set in sets {
        let o = s.undertaking_index(&set.undertaking)?;
        if by_player[o].replace(set).is_some() {
            return Err(Error::Invalid(vec![Violation::new(
                format!("strategies.{}", set.undertaking),
                "one strategy set per undertaking",
            )]));
        }
    }
    let mut violations = Vec::new();
    for (o, set) in by_player.iter().enumerate() {
        let id = &s.undertakings[o].id;
        let Some(set) = set else {
            violations.push(Violation::new(format!("strategies.{id}"), "strategy set missing"));
            continue;
        };
        if set.strategies.is_empty() {
            violations.push(Violation::new(format!("strategies.{id}"), "at least one strategy"));
        }
        let mut seen = HashSet::new();
        for (i, b) in set.strategies.iter().enumerate() {
            if b.undertaking != *id {
                violations.push(Violation::new(format!("strategies.{id}[{i}]"), "bid belongs to another undertaking"));
            }
            if !seen.insert(&b.requested) {
                violations.push(Violation::new(format!("strategies.{id}[{i}]"), "duplicate strategy"));
            }
            for v in validate_bid(s, b)? {
                violations.push(Violation::new(format!("strategies.{id}[{i}]: {}", v.field), v.rule));
            }
        }
    }
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let sets: Vec<&StrategySet> = by_player.into_iter().map(|x| x.expect("checked")).collect();
    let shape: Vec<usize> = sets.iter().map(|x| x.strategies.len()).collect();
    let size = shape.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k));
    let size = match size {
        Some(n) if n <= budget => n,
        _ => {
            let shown = size.map_or_else(|| "overflow".to_string(), |n| n.to_string());
            return Err(Error::BudgetExceeded(format!("|Y| = {shown} joint strategies, budget {budget}")));
        }
    };
    let mut tensor = GameTensor {
        players: s.undertakings.iter().map(|u| u.id.clone()).collect(),
        shape,
        payoffs: Vec::new(),
        source: Some((spec.rule, spec.method)),
    };
    let entries: Vec<Result<Vec<f64>>> = (0..size)
        .into_par_iter()
        .map(|joint| {
            let pick = tensor.strategies_of(joint);
            let bids: Vec<Bid> = sets.iter().zip(&pick).map(|(set, &i)| set.strategies[i].clone()).collect();
            let r = allocate(s, &bids, spec)?;
            Ok((0..s.n_undertakings()).map(|o| payoff(s, &r.allocation, o).profit.as_euros()).collect())
        })
        .collect();
    let mut payoffs = Vec::with_capacity(size * s.n_undertakings());
    for e in entries {
        payoffs.extend(e?);
    }
    tensor.payoffs = payoffs;
    Ok(tensor)
}

/// One probability vector per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub probs: Vec<Vec<f64>>,
}

impl MixedProfile {
    pub fn uniform(shape: &[usize]) -> Self {
        MixedProfile { probs: shape.iter().map(|&k| vec![1.0 / k as f64; k]).collect() }
    }

    pub fn pure(shape: &[usize], strategies: &[usize]) -> Self {
        MixedProfile {
            probs: shape
                .iter()
                .zip(strategies)
                .map(|(&k, &s)| (0..k).map(|i| if i == s { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    /// Strategies played with probability above `threshold`, per player.
    pub fn support(&self, threshold: f64) -> Vec<Vec<usize>> {
        self.probs.iter().map(|p| (0..p.len()).filter(|&i| p[i] > threshold).collect()).collect()
    }

    pub fn check(&self, tensor: &GameTensor) -> Result<()> {
        let found: Vec<usize> = self.probs.iter().map(Vec::len).collect();
        if found != tensor.shape {
            return Err(Error::ShapeMismatch { expected: tensor.shape.clone(), found });
        }
        for (o, p) in self.probs.iter().enumerate() {
            let sum: f64 = p.iter().sum();
            if p.iter().any(|&x| x.is_nan() || x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "probabilities of {} must be non-negative and sum to 1 (sum {sum})",
                    tensor.players[o]
                )));
            }
        }
        Ok(())
    }
}

/// Sum over joint strategies of the joint probability times the entry, restricted to
/// entries where `fixed` (player, strategy) is played, that player's own probability
/// taken as 1.
fn weighted_sum(t: &GameTensor, p: &MixedProfile, fixed: Option<(usize, usize)>) -> Vec<f64> {
    let n = t.n_players();
    let mut acc = vec![0.0; n];
    let mut idx = vec![0usize; n];
    for joint in 0..t.size() {
        if joint > 0 {
            // advance the mixed-radix counter, last player fastest
            let mut o = n;
            while o > 0 {
                o -= 1;
                idx[o] += 1;
                if idx[o] < t.shape[o] {
                    break;
                }
                idx[o] = 0;
            }
        }
        let mut w = 1.0;
        for (j, &s) in idx.iter().enumerate() {
            match fixed {
                Some((f, fs)) if f == j => {
                    if s != fs {
                        w = 0.0;
                    }
                }
                _ => w *= p.probs[j][s],
            }
            if w == 0.0 {
                break;
            }
        }
        if w != 0.0 {
            for (a, x) in acc.iter_mut().zip(t.entry(joint)) {
                *a += w * x;
            }
        }
    }
    acc
}

/// u_o = Σ_y (Π_s p_{y_s}) F_o(y) for every player.
pub fn expected_payoff(t: &GameTensor, p: &MixedProfile) -> Result<Vec<f64>> {
    p.check(t)?;
    Ok(weighted_sum(t, p, None))
}

/// Payoff to `o` from each of its pure strategies against the others' mix.
pub fn deviation_payoffs(t: &GameTensor, p: &MixedProfile, o: usize) -> Vec<f64> {
    (0..t.shape[o]).map(|s| weighted_sum(t, p, Some((o, s)))[o]).collect()
}

/// Pure strategy maximizing `o`'s payoff against the others (lowest index on ties) and its
/// gain over `o`'s current expected payoff, never negative.
pub fn best_response(t: &GameTensor, p: &MixedProfile, o: usize) -> Result<(usize, f64)> {
    p.check(t)?;
    let u = weighted_sum(t, p, None)[o];
    let values = deviation_payoffs(t, p, o);
    let mut best = 0;
    for (s, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = s;
        }
    }
    Ok((best, (values[best] - u).max(0.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub profile: MixedProfile,
    pub expected_payoffs: Vec<f64>,
    pub regrets: Vec<f64>,
    pub epsilon_nash: f64,
}

/// Largest gain any player gets from a unilateral pure deviation, computed exhaustively
/// from the tensor.
pub fn verify_equilibrium(t: &GameTensor, p: &MixedProfile) -> Result<EquilibriumResult> {
    p.check(t)?;
    let expected = weighted_sum(t, p, None);
    let regrets: Vec<f64> = (0..t.n_players())
        .map(|o| deviation_payoffs(t, p, o).into_iter().map(|v| v - expected[o]).fold(0.0, f64::max))
        .collect();
    let epsilon_nash = regrets.iter().copied().fold(0.0, f64::max);
    Ok(EquilibriumResult { profile: p.clone(), expected_payoffs: expected, regrets, epsilon_nash })
}
