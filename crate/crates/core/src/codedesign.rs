//! EXIT-matched LDPC degree-profile optimization.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{maximize, Kind, LpStatus, Row};
use crate::mmse::fast;
use crate::transfer::DecTarget;

/// Edge-perspective degree distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeProfile {
    pub lambda: BTreeMap<usize, f64>,
    pub eta: BTreeMap<usize, f64>,
}

impl DegreeProfile {
    pub fn new(lambda: BTreeMap<usize, f64>, eta: BTreeMap<usize, f64>) -> Result<Self> {
        let p = Self { lambda, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn from_pairs(lambda: &[(usize, f64)], eta: &[(usize, f64)]) -> Result<Self> {
        Self::new(
            lambda.iter().copied().collect(),
            eta.iter().copied().collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("lambda", &self.lambda), ("eta", &self.eta)] {
            if m.is_empty() {
                return Err(Error::Profile(format!("{name} is empty")));
            }
            if m.keys().any(|&d| d == 0) {
                return Err(Error::Profile(format!("{name} has degree 0")));
            }
            if m.values().any(|&f| !(f.is_finite() && f >= 0.0)) {
                return Err(Error::Profile(format!("{name} has a negative fraction")));
            }
            let s: f64 = m.values().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::Profile(format!("{name} sums to {s}")));
            }
        }
        if self.eta.keys().any(|&d| d < 2) {
            return Err(Error::Profile("check degree below 2".into()));
        }
        Ok(())
    }

    pub fn dv_max(&self) -> usize {
        *self.lambda.keys().next_back().unwrap_or(&0)
    }

    pub fn dc_max(&self) -> usize {
        *self.eta.keys().next_back().unwrap_or(&0)
    }

    /// Node-perspective variable fractions Lambda_i.
    pub fn node_fractions(&self) -> BTreeMap<usize, f64> {
        let z: f64 = self.lambda.iter().map(|(&i, &l)| l / i as f64).sum();
        self.lambda
            .iter()
            .map(|(&i, &l)| (i, l / i as f64 / z))
            .collect()
    }

    /// Node-perspective check fractions.
    pub fn check_node_fractions(&self) -> BTreeMap<usize, f64> {
        let z: f64 = self.eta.iter().map(|(&j, &e)| e / j as f64).sum();
        self.eta
            .iter()
            .map(|(&j, &e)| (j, e / j as f64 / z))
            .collect()
    }

    /// Binary design rate 1 - (sum eta_j/j)/(sum lambda_i/i).
    pub fn design_rate(&self) -> f64 {
        let v: f64 = self.lambda.iter().map(|(&i, &l)| l / i as f64).sum();
        let c: f64 = self.eta.iter().map(|(&j, &e)| e / j as f64).sum();
        1.0 - c / v
    }

    /// Rate in bits per channel use when each symbol carries `bits_per_symbol` coded bits.
    pub fn rate_bpcu(&self, bits_per_symbol: u32) -> f64 {
        bits_per_symbol as f64 * self.design_rate()
    }
}

/// Binary design rate of a profile.
pub fn profile_rate(p: &DegreeProfile) -> f64 {
    p.design_rate()
}

/// Coded bits per QPSK symbol.
pub const QPSK_BITS: u32 = 2;

/// Variable-node update: sum_i lambda_i J(sqrt((i-1) J^{-1}(I_EC)^2 + 4 rho)).
pub fn vnd_step(p: &DegreeProfile, i_ec: f64, rho: f64) -> f64 {
    let s = fast::j_inv(i_ec);
    if s.is_infinite() {
        return 1.0;
    }
    let s2 = s * s;
    p.lambda
        .iter()
        .map(|(&i, &l)| l * fast::j(((i - 1) as f64 * s2 + 4.0 * rho).sqrt()))
        .sum()
}

/// Check-node update: 1 - sum_j eta_j J(sqrt(j-1) J^{-1}(1 - I_EV)).
pub fn cnd_step(p: &DegreeProfile, i_ev: f64) -> f64 {
    cnd_eta(&p.eta, i_ev)
}

fn cnd_eta(eta: &BTreeMap<usize, f64>, i_ev: f64) -> f64 {
    let s = fast::j_inv(1.0 - i_ev);
    if s.is_infinite() {
        return 0.0;
    }
    1.0 - eta
        .iter()
        .map(|(&j, &e)| e * fast::j(((j - 1) as f64).sqrt() * s))
        .sum::<f64>()
}

pub fn combined_step(p: &DegreeProfile, i_ev: f64, rho: f64) -> f64 {
    vnd_step(p, cnd_step(p, i_ev), rho)
}

/// Channel-only extrinsic information J(2 sqrt(rho)).
pub fn initial_iev(_p: &DegreeProfile, rho: f64) -> f64 {
    fast::j(2.0 * rho.max(0.0).sqrt())
}

/// Node-perspective feedback variance sum_i Lambda_i f_Q(i J^{-1}(I_EC)^2 / 4).
pub fn node_variance(node: &BTreeMap<usize, f64>, i_ec: f64) -> f64 {
    let s = fast::j_inv(i_ec);
    if s.is_infinite() {
        return 0.0;
    }
    let s2 = s * s;
    node.iter()
        .map(|(&i, &f)| f * fast::fq(i as f64 * s2 / 4.0))
        .sum()
}

/// Left side of the convergence condition as a function of I_EV.
pub fn feedback_variance(p: &DegreeProfile, i_ev: f64) -> f64 {
    node_variance(&p.node_fractions(), cnd_step(p, i_ev))
}

fn feedback_variance_with(
    node: &BTreeMap<usize, f64>,
    eta: &BTreeMap<usize, f64>,
    i_ev: f64,
) -> f64 {
    node_variance(node, cnd_eta(eta, i_ev))
}

fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if (v - target).abs() <= 1e-12 {
            return mid;
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// I_EV at which the feedback variance reaches psi(rho).
pub fn converged_iev(p: &DegreeProfile, rho: f64, psi: &DecTarget) -> Result<f64> {
    let target = psi.eval(rho);
    converged_iev_for(&p.node_fractions(), &p.eta, rho, target)
}

fn converged_iev_for(
    node: &BTreeMap<usize, f64>,
    eta: &BTreeMap<usize, f64>,
    rho: f64,
    target: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Unreachable { rho });
    }
    let ini = fast::j(2.0 * rho.max(0.0).sqrt());
    if target == 0.0 {
        return Ok(1.0);
    }
    let f = |i: f64| feedback_variance_with(node, eta, i);
    if f(ini) <= target {
        return Ok(ini);
    }
    Ok(bisect_decreasing(f, target, ini, 1.0))
}

/// Optimizer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub degrees: Vec<usize>,
    pub etas: Vec<BTreeMap<usize, f64>>,
    pub rho_points: usize,
    pub rho_margin: f64,
    pub iev_points: usize,
    pub max_trials: usize,
    pub eps: f64,
    pub eps_lp: f64,
    /// Upper end of the I_EV grid when the target requires full convergence.
    pub iev_cap: f64,
    pub allow_degree_one: bool,
    /// Extend each rho's I_EV range to the next grid point's I_EV,fin.
    pub cover_gaps: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            degrees: (2..=30).chain((35..=50).step_by(5)).collect(),
            etas: vec![single_eta(3), single_eta(4), single_eta(5)],
            rho_points: 256,
            rho_margin: 4.0,
            iev_points: 128,
            max_trials: 100,
            eps: 1e-3,
            eps_lp: 1e-4,
            iev_cap: 0.999,
            allow_degree_one: false,
            cover_gaps: false,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_trials == 0 || !(self.eps > 0.0) {
            return Err(Error::Profile("need T >= 1 and eps > 0".into()));
        }
        if self.degrees.is_empty() {
            return Err(Error::Profile("empty degree set".into()));
        }
        if !self.allow_degree_one && self.degrees.contains(&1) {
            return Err(Error::Profile(
                "degree-1 variable nodes are disabled".into(),
            ));
        }
        if self.degrees.contains(&0) {
            return Err(Error::Profile("degree 0 in candidate set".into()));
        }
        if self.etas.is_empty() {
            return Err(Error::Profile("no check distributions".into()));
        }
        if self.rho_points < 2 || self.iev_points < 2 {
            return Err(Error::Profile("grids need at least two points".into()));
        }
        Ok(())
    }

    fn sorted_degrees(&self) -> Vec<usize> {
        let mut d = self.degrees.clone();
        d.sort_unstable();
        d.dedup();
        d
    }
}

pub fn single_eta(j: usize) -> BTreeMap<usize, f64> {
    BTreeMap::from([(j, 1.0)])
}

/// The rho grid: geometric over [rho_min/m, m rho_max] plus both exact bounds.
pub fn rho_grid(s: &OptimizerSettings, psi: &DecTarget) -> Vec<f64> {
    let lo = psi.rho_min() / s.rho_margin;
    let hi = psi.rho_max() * s.rho_margin;
    let n = s.rho_points;
    let mut g: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    g.push(psi.rho_min());
    g.push(psi.rho_max());
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

struct GridRows {
    rho: Vec<f64>,
    iev: Vec<f64>,
    coef: Vec<Vec<f64>>,
}

fn build_rows(
    s: &OptimizerSettings,
    degrees: &[usize],
    eta: &BTreeMap<usize, f64>,
    prev_node: &BTreeMap<usize, f64>,
    psi: &DecTarget,
) -> GridRows {
    let rhos = rho_grid(s, psi);
    let fins: Vec<Option<f64>> = rhos
        .par_iter()
        .map(|&rho| {
            converged_iev_for(prev_node, eta, rho, psi.eval(rho))
                .ok()
                .map(|v| v.min(s.iev_cap))
        })
        .collect();
    let per_rho: Vec<Vec<(f64, f64, Vec<f64>)>> = (0..rhos.len())
        .into_par_iter()
        .map(|j| {
            let rho = rhos[j];
            let ini = fast::j(2.0 * rho.sqrt());
            let Some(mut fin) = fins[j] else {
                return Vec::new();
            };
            // I_EV,fin grows with rho and the VND output grows with rho, so rows at
            // rho_j reaching the next point's I_EV,fin cover the whole gap.
            if s.cover_gaps {
                if let Some(Some(next)) = fins.get(j + 1) {
                    fin = fin.max(*next);
                }
            }
            if fin <= ini {
                return Vec::new();
            }
            let n = s.iev_points;
            (0..n)
                .map(|t| {
                    let i_ev = ini + (fin - ini) * t as f64 / (n - 1) as f64;
                    let sc = fast::j_inv(cnd_eta(eta, i_ev));
                    let s2 = sc * sc;
                    let coef = degrees
                        .iter()
                        .map(|&d| fast::j(((d - 1) as f64 * s2 + 4.0 * rho).sqrt()))
                        .collect();
                    (rho, i_ev, coef)
                })
                .collect()
        })
        .collect();
    let mut rows = GridRows {
        rho: Vec::new(),
        iev: Vec::new(),
        coef: Vec::new(),
    };
    for (r, i, c) in per_rho.into_iter().flatten() {
        rows.rho.push(r);
        rows.iev.push(i);
        rows.coef.push(c);
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub lambda: BTreeMap<usize, f64>,
    pub objective: f64,
    pub grid_rows: usize,
    pub active_rows: usize,
}

/// Solves the tunnel LP for one check distribution, given the previous profile's
/// node fractions (which fix each rho's I_EV,fin).
pub fn optimize_lambda_lp(
    s: &OptimizerSettings,
    eta: &BTreeMap<usize, f64>,
    lambda_prev: &BTreeMap<usize, f64>,
    psi: &DecTarget,
) -> Result<LpOutcome> {
    s.validate()?;
    let degrees = s.sorted_degrees();
    let prev = DegreeProfile {
        lambda: lambda_prev.clone(),
        eta: eta.clone(),
    };
    let rows = build_rows(s, &degrees, eta, &prev.node_fractions(), psi);
    let c: Vec<f64> = degrees.iter().map(|&d| 1.0 / d as f64).collect();
    let n = degrees.len();
    let rhs = |r: usize| rows.iev[r] + s.eps_lp;
    let to_lambda = |x: &[f64]| -> BTreeMap<usize, f64> {
        degrees
            .iter()
            .zip(x)
            .filter(|(_, &v)| v > 1e-12)
            .map(|(&d, &v)| (d, v))
            .collect()
    };
    if rows.coef.is_empty() {
        let st = maximize(&c, &[sum_row(n)]);
        let LpStatus::Optimal { x, objective } = st else {
            return Err(Error::Profile("trivial LP failed".into()));
        };
        return Ok(LpOutcome {
            lambda: to_lambda(&x),
            objective,
            grid_rows: 0,
            active_rows: 0,
        });
    }
    // cutting planes: start from a coarse subset, add the worst violated row of
    // each rho until the full grid is satisfied
    let total = rows.coef.len();
    let stride = (s.iev_points / 4).max(1);
    let mut in_set = vec![false; total];
    let mut active: Vec<usize> = Vec::new();
    let mut r = 0;
    while r < total {
        let mut q = r;
        while q < total && rows.rho[q] == rows.rho[r] {
            q += 1;
        }
        for t in (r..q).step_by(stride).chain(std::iter::once(q - 1)) {
            if !in_set[t] {
                in_set[t] = true;
                active.push(t);
            }
        }
        r = q;
    }
    for _round in 0..500 {
        let mut lp_rows = vec![sum_row(n)];
        lp_rows.extend(active.iter().map(|&r| Row {
            coef: rows.coef[r].clone(),
            kind: Kind::Ge,
            rhs: rhs(r),
        }));
        let (x, objective) = match maximize(&c, &lp_rows) {
            LpStatus::Optimal { x, objective } => (x, objective),
            LpStatus::Infeasible { worst_row } => {
                let g = if worst_row == 0 {
                    active[0]
                } else {
                    active[worst_row - 1]
                };
                return Err(Error::LpInfeasible {
                    rho: rows.rho[g],
                    iev: rows.iev[g],
                });
            }
            LpStatus::Unbounded => return Err(Error::Profile("LP unbounded".into())),
        };
        // worst violation per rho block
        let mut added = 0;
        let mut r = 0;
        while r < total {
            let mut q = r;
            let mut worst = (usize::MAX, 1e-10);
            while q < total && rows.rho[q] == rows.rho[r] {
                let lhs: f64 = rows.coef[q].iter().zip(&x).map(|(a, b)| a * b).sum();
                let v = rhs(q) - lhs;
                if v > worst.1 && !in_set[q] {
                    worst = (q, v);
                }
                q += 1;
            }
            if worst.0 != usize::MAX {
                in_set[worst.0] = true;
                active.push(worst.0);
                added += 1;
            }
            r = q;
        }
        if added == 0 {
            return Ok(LpOutcome {
                lambda: to_lambda(&x),
                objective,
                grid_rows: total,
                active_rows: active.len(),
            });
        }
    }
    Err(Error::Profile("cutting-plane loop did not settle".into()))
}

fn sum_row(n: usize) -> Row {
    Row {
        coef: vec![1.0; n],
        kind: Kind::Eq,
        rhs: 1.0,
    }
}

fn cosine(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>) -> f64 {
    let dot: f64 = a
        .iter()
        .map(|(k, v)| v * b.get(k).copied().unwrap_or(0.0))
        .sum();
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub profile: DegreeProfile,
    /// The iterate whose node fractions set I_EV,fin in the final LP.
    pub fin_lambda: BTreeMap<usize, f64>,
    pub converged: bool,
    pub trials: usize,
    pub objectives: Vec<f64>,
}

impl DesignResult {
    pub fn rate_bpcu(&self) -> f64 {
        self.profile.rate_bpcu(QPSK_BITS)
    }
}

/// Outer loop: re-solve the LP with I_EV,fin from the previous iterate until the
/// cosine stop rule fires or T trials are used.
pub fn run_algorithm1(
    s: &OptimizerSettings,
    eta: &BTreeMap<usize, f64>,
    psi: &DecTarget,
) -> Result<DesignResult> {
    s.validate()?;
    let degrees = s.sorted_degrees();
    let start = if degrees.contains(&2) { 2 } else { degrees[0] };
    let mut lambda = BTreeMap::from([(start, 1.0)]);
    let mut objectives = Vec::new();
    for t in 1..=s.max_trials {
        let out = optimize_lambda_lp(s, eta, &lambda, psi)?;
        let done = 1.0 - cosine(&out.lambda, &lambda) <= s.eps;
        let fin_lambda = std::mem::replace(&mut lambda, out.lambda);
        objectives.push(out.objective);
        if done || t == s.max_trials {
            return Ok(DesignResult {
                profile: DegreeProfile {
                    lambda,
                    eta: eta.clone(),
                },
                fin_lambda,
                converged: done,
                trials: t,
                objectives,
            });
        }
    }
    unreachable!("loop returns on the last trial")
}

/// Runs Algorithm 1 for every candidate check distribution and keeps the feasible
/// design with the highest rate.
pub fn design_best(s: &OptimizerSettings, psi: &DecTarget) -> Result<DesignResult> {
    let results: Vec<Result<DesignResult>> = s
        .etas
        .par_iter()
        .map(|eta| run_algorithm1(s, eta, psi))
        .collect();
    let mut best: Option<DesignResult> = None;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(d) => {
                if best
                    .as_ref()
                    .is_none_or(|b| d.profile.design_rate() > b.profile.design_rate())
                {
                    best = Some(d);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::Profile("no candidates".into())))
}

/// Largest tunnel violation max(I - combined_step(I)) over a grid `density` times
/// finer than the design grid, with I_EV,fin set by `fin_lambda`; negative means
/// the tunnel is open everywhere.
pub fn tunnel_margin(
    p: &DegreeProfile,
    fin_lambda: &BTreeMap<usize, f64>,
    s: &OptimizerSettings,
    psi: &DecTarget,
    density: usize,
) -> f64 {
    let fine = OptimizerSettings {
        rho_points: s.rho_points * density,
        ..s.clone()
    };
    let node = DegreeProfile {
        lambda: fin_lambda.clone(),
        eta: p.eta.clone(),
    }
    .node_fractions();
    let iev_n = s.iev_points * density;
    rho_grid(&fine, psi)
        .par_iter()
        .map(|&rho| {
            let target = psi.eval(rho);
            let ini = fast::j(2.0 * rho.sqrt());
            let fin = converged_iev_for(&node, &p.eta, rho, target)
                .unwrap_or(ini)
                .min(s.iev_cap);
            (0..iev_n.saturating_sub(1))
                .map(|t| {
                    let i = ini + (fin - ini) * t as f64 / (iev_n - 1) as f64;
                    i - combined_step(p, i, rho)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}
