use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};
use slotalloc_core::allocation::{
    allocate, result_from_json, result_to_json, AllocatorSpec, DeviationSummary, MoveRow,
};
use slotalloc_core::economics::{payoffs, weighted_rows, PayoffBreakdown, PayoffRow};
use slotalloc_core::equilibrium::{
    build_game, enumerate_equilibria, solve_equilibrium, strategy_sets_from_json, EquilibriumResult, GameTensor,
    SolverConfig,
};
use slotalloc_core::model::{bids_from_json, scenario_from_json, validate_bid, validate_scenario};
use slotalloc_core::{format_duration, selftest, Error, Scenario};

use crate::output::{euros, euros_f64, fixed2, prepare_dir, read, slug, write_csv, write_text};

/// 2 for bad input, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(
            Error::Invalid(_)
            | Error::InvalidTime(_)
            | Error::UnknownUndertaking(_)
            | Error::UnknownOdPair(_)
            | Error::UnknownSlot { .. }
            | Error::InvalidPriorityOrder(_)
            | Error::InvalidParameter(_)
            | Error::InsufficientSlots { .. }
            | Error::ShapeMismatch { .. }
            | Error::Json(_),
        ) => 2,
        _ => 1,
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let s = scenario_from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let v = validate_scenario(&s);
    if !v.is_empty() {
        return Err(Error::Invalid(v)).with_context(|| format!("validating {}", path.display()));
    }
    Ok(s)
}

pub fn allocate_cmd(scenario: &Path, bids: &Path, spec: &AllocatorSpec, out: &Path) -> Result<()> {
    let s = load_scenario(scenario)?;
    let bids = bids_from_json(&s, &read(bids)?).with_context(|| format!("parsing {}", bids.display()))?;
    let mut v = Vec::new();
    for b in &bids {
        v.extend(validate_bid(&s, b)?);
    }
    if !v.is_empty() {
        return Err(Error::Invalid(v)).context("validating bids");
    }
    let r = allocate(&s, &bids, spec)?;
    let problems = selftest::audit(&s, &bids, &r);
    if !problems.is_empty() {
        bail!("allocation failed its audit: {}", problems.join("; "));
    }

    prepare_dir(out)?;
    write_text(out, "allocation.json", &(result_to_json(&s, &r)? + "\n"))?;
    let header: Vec<String> =
        ["undertaking", "od", "requested", "allocated", "deviation_min"].iter().map(|x| x.to_string()).collect();
    let rows: Vec<Vec<String>> = MoveRow::rows(&s, &r)
        .into_iter()
        .map(|m| {
            vec![m.undertaking, m.od, m.requested.to_string(), m.allocated.to_string(), m.deviation_min.to_string()]
        })
        .collect();
    write_csv(out, "moves.csv", &header, &rows)?;
    let summary = DeviationSummary::new(&s, &r);
    let mut sh = summary.header();
    let mut sr = summary.row();
    sh.push("epsilon_used".into());
    sr.push(r.epsilon_used.map(|e| format!("{e}")).unwrap_or_default());
    write_csv(out, "deviation_summary.csv", &sh, &[sr])?;
    println!("{summary}");
    println!("wrote {}", out.display());
    Ok(())
}

fn payoff_header(s: &Scenario, detail: bool) -> Vec<String> {
    let mut h = vec!["undertaking".to_string()];
    h.extend(s.od_pairs.iter().map(|w| format!("{}_passengers", w.id)));
    h.extend(s.od_pairs.iter().map(|w| format!("{}_slots", w.id)));
    h.extend(["total_passengers", "rolling_stock", "revenue_eur"].map(String::from));
    if detail {
        h.extend(
            ["ticket_revenue_eur", "operating_cost_eur", "investment_cost_eur", "fixed_cost_eur"].map(String::from),
        );
    }
    h
}

fn pure_row(p: &PayoffBreakdown) -> Vec<String> {
    let mut r = vec![p.undertaking.clone()];
    r.extend(p.passengers.iter().map(i64::to_string));
    r.extend(p.slots_operated.iter().map(usize::to_string));
    r.push(p.total_passengers.to_string());
    r.push(p.fleet_size.to_string());
    r.push(euros(p.profit));
    for c in [p.ticket_revenue, p.operating_cost, p.investment_cost, p.fixed_cost] {
        r.push(euros(c));
    }
    r
}

fn weighted_row(p: &PayoffRow) -> Vec<String> {
    let mut r = vec![p.undertaking.clone()];
    r.extend(p.passengers.iter().map(|&x| fixed2(x)));
    r.extend(p.slots.iter().map(|&x| fixed2(x)));
    r.push(fixed2(p.total_passengers));
    r.push(fixed2(p.rolling_stock));
    r.push(euros_f64(p.revenue_cents));
    r
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixEntry {
    allocation: std::path::PathBuf,
    probability: f64,
}

pub fn payoff_cmd(scenario: &Path, allocation: Option<&Path>, mix: Option<&Path>, out: &Path) -> Result<()> {
    let s = load_scenario(scenario)?;
    prepare_dir(out)?;
    match (allocation, mix) {
        (Some(a), None) => {
            let (r, _) = result_from_json(&s, &read(a)?).with_context(|| format!("parsing {}", a.display()))?;
            let ps = payoffs(&s, &r.allocation);
            let rows: Vec<Vec<String>> = ps.iter().map(pure_row).collect();
            write_csv(out, "payoff.csv", &payoff_header(&s, true), &rows)?;
            for p in &ps {
                println!("{}: profit {} EUR, fleet {}", p.undertaking, euros(p.profit), p.fleet_size);
            }
        }
        (None, Some(m)) => {
            let entries: Vec<MixEntry> = serde_json::from_str(&read(m)?)
                .map_err(Error::from)
                .with_context(|| format!("parsing {}", m.display()))?;
            let base = m.parent().unwrap_or(Path::new("."));
            let mut outcomes = Vec::with_capacity(entries.len());
            for e in &entries {
                let path = base.join(&e.allocation);
                let (r, _) =
                    result_from_json(&s, &read(&path)?).with_context(|| format!("parsing {}", path.display()))?;
                outcomes.push((e.probability, payoffs(&s, &r.allocation)));
            }
            let rows = weighted_rows(&outcomes)?;
            let csv_rows: Vec<Vec<String>> = rows.iter().map(weighted_row).collect();
            write_csv(out, "payoff_weighted.csv", &payoff_header(&s, false), &csv_rows)?;
            for p in &rows {
                println!("{}: expected profit {} EUR", p.undertaking, euros_f64(p.revenue_cents));
            }
        }
        _ => bail!("pass exactly one of --allocation or --mix"),
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn result_json(t: &GameTensor, r: &EquilibriumResult, threshold: f64) -> Value {
    let support = r.profile.support(threshold);
    let players: Vec<Value> = t
        .players
        .iter()
        .enumerate()
        .map(|(o, id)| {
            json!({
                "id": id,
                "strategies": t.shape[o],
                "probabilities": r.profile.probs[o],
                "support": support[o],
                "expected_payoff_eur": r.expected_payoffs[o],
                "regret_eur": r.regrets[o],
            })
        })
        .collect();
    json!({ "players": players, "epsilon_nash": r.epsilon_nash })
}

fn report_text(t: &GameTensor, spec: &AllocatorSpec, cfg: &SolverConfig, r: &EquilibriumResult, ok: bool) -> String {
    let mut s = String::new();
    s += &format!("rule {:?}, method {:?}\n", spec.rule, spec.method).to_lowercase();
    s += &format!("joint strategies: {}\n", t.size());
    s += &format!("tolerance: {:e}\n", cfg.tolerance);
    s += if ok { "status: equilibrium\n" } else { "status: no equilibrium within tolerance, best candidate shown\n" };
    for (o, id) in t.players.iter().enumerate() {
        let probs: Vec<String> = r.profile.probs[o].iter().map(|p| format!("{p:.6}")).collect();
        s += &format!(
            "{id}: p = [{}]  expected payoff {:.2} EUR  regret {:.3e}\n",
            probs.join(", "),
            r.expected_payoffs[o],
            r.regrets[o]
        );
    }
    s += &format!("epsilon-Nash: {:.3e}\n", r.epsilon_nash);
    s
}

fn tensor_csv(t: &GameTensor) -> (Vec<String>, Vec<Vec<String>>) {
    let mut h: Vec<String> = t.players.iter().map(|p| format!("{p}_strategy")).collect();
    h.extend(t.players.iter().map(|p| format!("{p}_payoff_eur")));
    let rows = (0..t.size())
        .map(|j| {
            let mut r: Vec<String> = t.strategies_of(j).iter().map(usize::to_string).collect();
            r.extend(t.entry(j).iter().map(|&x| fixed2(x)));
            r
        })
        .collect();
    (h, rows)
}

pub fn equilibrium_cmd(
    scenario: &Path,
    strategies: &Path,
    spec: &AllocatorSpec,
    cfg: &SolverConfig,
    budget: usize,
    list_all: bool,
    out: &Path,
) -> Result<()> {
    let s = load_scenario(scenario)?;
    let sets =
        strategy_sets_from_json(&s, &read(strategies)?).with_context(|| format!("parsing {}", strategies.display()))?;
    let t = build_game(&s, &sets, spec, budget)?;
    prepare_dir(out)?;
    let (h, rows) = tensor_csv(&t);
    write_csv(out, "tensor.csv", &h, &rows)?;
    if list_all {
        let all = enumerate_equilibria(&t, cfg)?;
        let v: Vec<Value> = all.iter().map(|r| result_json(&t, r, cfg.tolerance)).collect();
        write_text(out, "equilibria.json", &(serde_json::to_string_pretty(&v)? + "\n"))?;
        println!("{} equilibria by support enumeration", all.len());
    }
    let (r, ok) = match solve_equilibrium(&t, cfg) {
        Ok(r) => (r, true),
        Err(Error::NoEquilibrium { best, .. }) => (*best, false),
        Err(e) => return Err(e.into()),
    };
    let mut v = result_json(&t, &r, cfg.tolerance);
    v["status"] = json!(if ok { "equilibrium" } else { "not-found" });
    v["tolerance"] = json!(cfg.tolerance);
    write_text(out, "equilibrium.json", &(serde_json::to_string_pretty(&v)? + "\n"))?;
    let text = report_text(&t, spec, cfg, &r, ok);
    write_text(out, "equilibrium.txt", &text)?;
    print!("{text}");
    if !ok {
        bail!("no equilibrium within tolerance {:e}; best epsilon {:e}", cfg.tolerance, r.epsilon_nash);
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn report_cmd(scenario: &Path, allocation: &Path, out: &Path) -> Result<()> {
    let s = load_scenario(scenario)?;
    let (r, _) =
        result_from_json(&s, &read(allocation)?).with_context(|| format!("parsing {}", allocation.display()))?;
    prepare_dir(out)?;
    let header: Vec<String> = ["time", "od", "demand", "owner"].iter().map(|x| x.to_string()).collect();
    for (od, w) in s.od_pairs.iter().enumerate() {
        let rows: Vec<Vec<String>> = (0..s.slots[od].len())
            .map(|i| {
                let owner = r.allocation.owner(od, i).map(|o| s.undertakings[o].id.clone()).unwrap_or_default();
                vec![s.time(od, i).to_string(), w.id.clone(), s.demand[od][i].to_string(), owner]
            })
            .collect();
        write_csv(out, &format!("slots_{}.csv", slug(&w.id)), &header, &rows)?;
    }
    println!("total deviation {}", format_duration(r.total_deviation()));
    println!("wrote {}", out.display());
    Ok(())
}

pub fn selftest_cmd(seed: u64, rounds: usize) -> Result<()> {
    let outcomes = selftest::run(seed, rounds);
    let mut failed = 0;
    for c in &outcomes {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!("{status} {} ({} cases)", c.name, c.cases);
        for f in c.failures.iter().take(5) {
            println!("    {f}");
        }
        if !c.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", outcomes.len());
    }
    Ok(())
}
