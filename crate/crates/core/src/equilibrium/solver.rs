use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{deviation_payoffs, verify_equilibrium, weighted_sum, EquilibriumResult, GameTensor, MixedProfile};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportOrder {
    /// Larger total support first, so fully mixed equilibria are preferred.
    #[default]
    LargestFirst,
    SmallestFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Accepted ε-Nash certificate.
    pub tolerance: f64,
    /// Largest per-player support tried by enumeration.
    pub max_support: usize,
    pub support_order: SupportOrder,
    /// Cap on the number of support profiles enumerated.
    pub max_support_profiles: usize,
    /// Starting points per support for the indifference solver.
    pub newton_starts: usize,
    /// Iterations of the dynamics fallback.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            max_support: 8,
            support_order: SupportOrder::LargestFirst,
            max_support_profiles: 100_000,
            newton_starts: 8,
            max_iters: 20_000,
            seed: 0,
        }
    }
}

fn validate(t: &GameTensor, cfg: &SolverConfig) -> Result<()> {
    if t.payoffs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("tensor has non-finite payoffs".into()));
    }
    if cfg.tolerance.is_nan() || cfg.tolerance < 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance must be ≥ 0, got {}", cfg.tolerance)));
    }
    if cfg.max_support == 0 {
        return Err(Error::InvalidParameter("max_support must be ≥ 1".into()));
    }
    Ok(())
}

/// Non-empty subsets of `0..k` of size at most `max`, by size then lexicographically.
fn subsets(k: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let limit = k.min(20);
    for mask in 1u32..(1u32 << limit) {
        if (mask.count_ones() as usize) <= max {
            out.push((0..limit).filter(|&i| mask & (1 << i) != 0).collect::<Vec<_>>());
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn support_profiles(t: &GameTensor, cfg: &SolverConfig) -> Vec<Vec<Vec<usize>>> {
    let mut max = cfg.max_support;
    let per_player = loop {
        let lists: Vec<Vec<Vec<usize>>> = t.shape.iter().map(|&k| subsets(k, max)).collect();
        let count = lists.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.len()));
        match count {
            Some(c) if c <= cfg.max_support_profiles || max == 1 => break lists,
            _ => max -= 1,
        }
    };
    let mut out: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for list in &per_player {
        let mut next = Vec::new();
        for prefix in &out {
            for s in list {
                if next.len() >= cfg.max_support_profiles {
                    break;
                }
                let mut p = prefix.clone();
                p.push(s.clone());
                next.push(p);
            }
        }
        out = next;
    }
    let size = |p: &Vec<Vec<usize>>| p.iter().map(Vec::len).sum::<usize>();
    match cfg.support_order {
        SupportOrder::LargestFirst => out.sort_by(|a, b| size(b).cmp(&size(a)).then_with(|| a.cmp(b))),
        SupportOrder::SmallestFirst => out.sort_by(|a, b| size(a).cmp(&size(b)).then_with(|| a.cmp(b))),
    }
    out
}

/// Indifference system on a fixed support: each mixing player's supported strategies earn
/// the same payoff, and its probabilities sum to one.
struct Indifference<'a> {
    t: &'a GameTensor,
    support: &'a [Vec<usize>],
    mixing: Vec<usize>,
    dim: usize,
}

impl<'a> Indifference<'a> {
    fn new(t: &'a GameTensor, support: &'a [Vec<usize>]) -> Self {
        let mixing: Vec<usize> = (0..support.len()).filter(|&o| support[o].len() > 1).collect();
        let dim = mixing.iter().map(|&o| support[o].len()).sum();
        Indifference { t, support, mixing, dim }
    }

    fn profile(&self, x: &[f64]) -> MixedProfile {
        let mut probs: Vec<Vec<f64>> = self.t.shape.iter().map(|&k| vec![0.0; k]).collect();
        for (o, s) in self.support.iter().enumerate() {
            if s.len() == 1 {
                probs[o][s[0]] = 1.0;
            }
        }
        let mut i = 0;
        for &o in &self.mixing {
            for &s in &self.support[o] {
                probs[o][s] = x[i];
                i += 1;
            }
        }
        MixedProfile { probs }
    }

    fn residual(&self, x: &[f64]) -> DVector<f64> {
        let p = self.profile(x);
        let mut f = Vec::with_capacity(self.dim);
        let mut i = 0;
        for &o in &self.mixing {
            let v = deviation_payoffs(self.t, &p, o);
            let s = &self.support[o];
            for &k in &s[1..] {
                f.push(v[k] - v[s[0]]);
            }
            f.push(x[i..i + s.len()].iter().sum::<f64>() - 1.0);
            i += s.len();
        }
        DVector::from_vec(f)
    }

    /// Gauss-Newton with a pseudo-inverse step. Central differences are exact here since
    /// the system is affine in each coordinate.
    fn solve(&self, start: Vec<f64>, scale: f64) -> Option<Vec<f64>> {
        let mut x = start;
        let h = 1e-3;
        for _ in 0..60 {
            let f = self.residual(&x);
            if f.amax() <= 1e-11 * scale {
                return Some(x);
            }
            let mut j = DMatrix::zeros(self.dim, self.dim);
            for c in 0..self.dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let d = (self.residual(&xp) - self.residual(&xm)) / (2.0 * h);
                j.set_column(c, &d);
            }
            let step = j.svd(true, true).solve(&f, 1e-12 * scale.max(1.0)).ok()?;
            if !step.iter().all(|v| v.is_finite()) {
                return None;
            }
            for (xi, si) in x.iter_mut().zip(step.iter()) {
                *xi -= si;
            }
            if step.amax() < 1e-15 {
                break;
            }
        }
        (self.residual(&x).amax() <= 1e-9 * scale).then_some(x)
    }
}

/// Clips tiny negatives and renormalizes; `None` if any probability is clearly negative.
fn clean(mut p: MixedProfile) -> Option<MixedProfile> {
    for v in &mut p.probs {
        if v.iter().any(|&x| x < -1e-9 || !x.is_finite()) {
            return None;
        }
        for x in v.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let s: f64 = v.iter().sum();
        if s <= 0.0 {
            return None;
        }
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    Some(p)
}

fn payoff_scale(t: &GameTensor) -> f64 {
    t.payoffs.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

/// Candidate equilibria on one support, from the uniform start and then seeded ones.
fn solve_support(
    t: &GameTensor,
    support: &[Vec<usize>],
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<MixedProfile> {
    let sys = Indifference::new(t, support);
    if sys.dim == 0 {
        return vec![sys.profile(&[])];
    }
    let scale = payoff_scale(t);
    let uniform: Vec<f64> =
        sys.mixing.iter().flat_map(|&o| vec![1.0 / support[o].len() as f64; support[o].len()]).collect();
    let mut starts = vec![uniform];
    for _ in 1..cfg.newton_starts.max(1) {
        let mut x = Vec::with_capacity(sys.dim);
        for &o in &sys.mixing {
            let raw: Vec<f64> = (0..support[o].len()).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            x.extend(raw.into_iter().map(|v| v / s));
        }
        starts.push(x);
    }
    let mut out = Vec::new();
    for x0 in starts {
        if let Some(x) = sys.solve(x0, scale) {
            if let Some(p) = clean(sys.profile(&x)) {
                out.push(p);
                break;
            }
        }
    }
    out
}

fn same_profile(a: &MixedProfile, b: &MixedProfile) -> bool {
    a.probs.iter().flatten().zip(b.probs.iter().flatten()).all(|(x, y)| (x - y).abs() <= 1e-7)
}

/// Every certified equilibrium found by support enumeration, in search order.
pub fn enumerate_equilibria(t: &GameTensor, cfg: &SolverConfig) -> Result<Vec<EquilibriumResult>> {
    validate(t, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut found: Vec<EquilibriumResult> = Vec::new();
    for support in support_profiles(t, cfg) {
        for p in solve_support(t, &support, cfg, &mut rng) {
            let r = verify_equilibrium(t, &p)?;
            if r.epsilon_nash <= cfg.tolerance && !found.iter().any(|f| same_profile(&f.profile, &r.profile)) {
                found.push(r);
            }
        }
    }
    Ok(found)
}

/// First profile, in the configured support order, whose certificate meets the
/// tolerance; falls back to exponential-weights dynamics when enumeration finds none.
pub fn solve_equilibrium(t: &GameTensor, cfg: &SolverConfig) -> Result<EquilibriumResult> {
    validate(t, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<EquilibriumResult> = None;
    let keep = |r: EquilibriumResult, best: &mut Option<EquilibriumResult>| {
        if best.as_ref().is_none_or(|b| r.epsilon_nash < b.epsilon_nash) {
            *best = Some(r);
        }
    };
    for support in support_profiles(t, cfg) {
        for p in solve_support(t, &support, cfg, &mut rng) {
            let r = verify_equilibrium(t, &p)?;
            if r.epsilon_nash <= cfg.tolerance {
                return Ok(r);
            }
            keep(r, &mut best);
        }
    }

    let dyn_best = dynamics(t, cfg)?;
    if dyn_best.epsilon_nash <= cfg.tolerance {
        return Ok(dyn_best);
    }
    // Polish on the support the dynamics settled on.
    let support = dyn_best.profile.support(1e-4);
    for p in solve_support(t, &support, cfg, &mut rng) {
        let r = verify_equilibrium(t, &p)?;
        if r.epsilon_nash <= cfg.tolerance {
            return Ok(r);
        }
        keep(r, &mut best);
    }
    keep(dyn_best, &mut best);
    Err(Error::NoEquilibrium { tolerance: cfg.tolerance, best: Box::new(best.expect("at least one candidate")) })
}

fn dynamics(t: &GameTensor, cfg: &SolverConfig) -> Result<EquilibriumResult> {
    let scale = payoff_scale(t);
    let mut p = MixedProfile::uniform(&t.shape);
    let mut best = verify_equilibrium(t, &p)?;
    for it in 0..cfg.max_iters {
        let eta = 2.0 / ((it + 1) as f64).sqrt();
        let u = weighted_sum(t, &p, None);
        let mut next = p.clone();
        for (o, (row, &uo)) in next.probs.iter_mut().zip(&u).enumerate() {
            let v = deviation_payoffs(t, &p, o);
            for (x, vs) in row.iter_mut().zip(v) {
                *x *= (eta * (vs - uo) / scale).exp();
            }
            let z: f64 = row.iter().sum();
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        p = next;
        if it % 16 == 15 || it + 1 == cfg.max_iters {
            let r = verify_equilibrium(t, &p)?;
            if r.epsilon_nash < best.epsilon_nash {
                best = r;
                if best.epsilon_nash <= cfg.tolerance {
                    break;
                }
            }
        }
    }
    Ok(best)
}
