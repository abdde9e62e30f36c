//! Slot revenue, fleet size and operator payoff.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Allocation, Scenario};
use crate::money::Cents;

/// Revenue of one slot: passengers times fare on its OD pair.
pub fn slot_revenue(s: &Scenario, od: usize, slot: usize) -> Result<Cents> {
    let g = s.demand.get(od).and_then(|d| d.get(slot));
    let z = s.fare.get(od).and_then(|f| f.get(slot));
    match (g, z) {
        (Some(&g), Some(&z)) => Ok(z * g),
        _ => Err(Error::UnknownSlot {
            od: s.od_pairs.get(od).map_or_else(|| od.to_string(), |w| w.id.clone()),
            time: format!("#{slot}"),
        }),
    }
}

pub fn ticket_revenue(s: &Scenario, a: &Allocation, o: usize) -> Cents {
    a.assigned[o]
        .iter()
        .enumerate()
        .flat_map(|(od, set)| set.iter().map(move |&r| (od, r)))
        .map(|(od, r)| s.fare[od][r] * s.demand[od][r])
        .sum()
}

/// A departure on one OD pair, for fleet sizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trip {
    pub od: usize,
    pub departure: u32,
}

/// Fewest units covering `trips`: trips minus a maximum matching on the chaining graph.
/// A unit may run `j` after `i` when `j` leaves from where `i` arrives, at least
/// `trip_duration + turnaround` minutes after `i` left. Units start anywhere.
pub fn min_fleet_for_trips(s: &Scenario, trips: &[Trip]) -> usize {
    let n = trips.len();
    let cycle = s.trip_duration_min + s.turnaround_min;
    let chains = |i: usize, j: usize| {
        let (a, b) = (&trips[i], &trips[j]);
        s.od_pairs[b.od].origin == s.od_pairs[a.od].destination && b.departure >= a.departure + cycle
    };
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| i != j && chains(i, j)).collect()).collect();
    let mut next_of: Vec<Option<usize>> = vec![None; n];
    let mut prev_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let mut seen = vec![false; n];
        augment(i, &adj, &mut seen, &mut next_of, &mut prev_of);
    }
    n - next_of.iter().filter(|x| x.is_some()).count()
}

fn augment(
    i: usize,
    adj: &[Vec<usize>],
    seen: &mut [bool],
    next_of: &mut [Option<usize>],
    prev_of: &mut [Option<usize>],
) -> bool {
    for &j in &adj[i] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        let free = match prev_of[j] {
            None => true,
            Some(k) => augment(k, adj, seen, next_of, prev_of),
        };
        if free {
            next_of[i] = Some(j);
            prev_of[j] = Some(i);
            return true;
        }
    }
    false
}

pub fn trips_of(s: &Scenario, a: &Allocation, o: usize) -> Vec<Trip> {
    a.assigned[o]
        .iter()
        .enumerate()
        .flat_map(|(od, set)| set.iter().map(move |&r| Trip { od, departure: s.slots[od][r].0 }))
        .collect()
}

pub fn min_fleet(s: &Scenario, a: &Allocation, o: usize) -> usize {
    min_fleet_for_trips(s, &trips_of(s, a, o))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PayoffBreakdown {
    pub undertaking: String,
    pub ticket_revenue: Cents,
    pub slots_operated: Vec<usize>,
    pub passengers: Vec<i64>,
    pub total_passengers: i64,
    pub fleet_size: usize,
    pub operating_cost: Cents,
    pub investment_cost: Cents,
    pub fixed_cost: Cents,
    pub profit: Cents,
}

/// F_o = J_o − Σ f_or x_or − C_o · n_T − c_a.
pub fn payoff(s: &Scenario, a: &Allocation, o: usize) -> PayoffBreakdown {
    let u = &s.undertakings[o];
    let held = &a.assigned[o];
    let passengers: Vec<i64> =
        held.iter().enumerate().map(|(od, set)| set.iter().map(|&r| s.demand[od][r]).sum()).collect();
    let operating_cost: Cents = held
        .iter()
        .enumerate()
        .flat_map(|(od, set)| set.iter().map(move |&r| (od, r)))
        .map(|(od, r)| u.per_slot_operating_cost.at(od, r))
        .sum();
    let fleet_size = min_fleet(s, a, o);
    let ticket_revenue = ticket_revenue(s, a, o);
    let investment_cost = u.daily_rolling_stock_cost * fleet_size as i64;
    let fixed_cost = u.fixed_access_cost;
    PayoffBreakdown {
        undertaking: u.id.clone(),
        ticket_revenue,
        slots_operated: held.iter().map(|x| x.len()).collect(),
        total_passengers: passengers.iter().sum(),
        passengers,
        fleet_size,
        operating_cost,
        investment_cost,
        fixed_cost,
        profit: ticket_revenue - operating_cost - investment_cost - fixed_cost,
    }
}

pub fn payoffs(s: &Scenario, a: &Allocation) -> Vec<PayoffBreakdown> {
    (0..s.n_undertakings()).map(|o| payoff(s, a, o)).collect()
}

/// One row of the passengers / slots / fleet / revenue table. Pure allocations give whole
/// numbers; probability-weighted rows may be fractional.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffRow {
    pub undertaking: String,
    pub passengers: Vec<f64>,
    pub slots: Vec<f64>,
    pub total_passengers: f64,
    pub rolling_stock: f64,
    /// Profit F_o, in cents.
    pub revenue_cents: f64,
}

impl From<&PayoffBreakdown> for PayoffRow {
    fn from(p: &PayoffBreakdown) -> Self {
        PayoffRow {
            undertaking: p.undertaking.clone(),
            passengers: p.passengers.iter().map(|&x| x as f64).collect(),
            slots: p.slots_operated.iter().map(|&x| x as f64).collect(),
            total_passengers: p.total_passengers as f64,
            rolling_stock: p.fleet_size as f64,
            revenue_cents: p.profit.0 as f64,
        }
    }
}

/// Probability-weighted rows over several pure outcomes, each a full set of breakdowns in
/// the same undertaking order.
pub fn weighted_rows(outcomes: &[(f64, Vec<PayoffBreakdown>)]) -> Result<Vec<PayoffRow>> {
    let Some((_, first)) = outcomes.first() else {
        return Ok(Vec::new());
    };
    let total: f64 = outcomes.iter().map(|(p, _)| p).sum();
    if outcomes.iter().any(|(p, _)| p.is_nan() || *p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("probabilities must be ≥ 0 and sum to 1, got {total}")));
    }
    let mut rows: Vec<PayoffRow> = first
        .iter()
        .map(|b| PayoffRow {
            undertaking: b.undertaking.clone(),
            passengers: vec![0.0; b.passengers.len()],
            slots: vec![0.0; b.slots_operated.len()],
            total_passengers: 0.0,
            rolling_stock: 0.0,
            revenue_cents: 0.0,
        })
        .collect();
    for (p, list) in outcomes {
        if list.len() != rows.len() || list.iter().zip(&rows).any(|(b, r)| b.undertaking != r.undertaking) {
            return Err(Error::InvalidParameter("outcomes list different undertakings".into()));
        }
        for (row, b) in rows.iter_mut().zip(list) {
            let pure = PayoffRow::from(b);
            for (x, y) in row.passengers.iter_mut().zip(&pure.passengers) {
                *x += p * y;
            }
            for (x, y) in row.slots.iter_mut().zip(&pure.slots) {
                *x += p * y;
            }
            row.total_passengers += p * pure.total_passengers;
            row.rolling_stock += p * pure.rolling_stock;
            row.revenue_cents += p * pure.revenue_cents;
        }
    }
    Ok(rows)
}
