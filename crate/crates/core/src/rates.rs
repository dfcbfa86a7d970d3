//! Achievable rates along MSE paths, sum capacity, region membership and MIMO rates.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::config::{MimoConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::mmse::{CurveKind, MmseCurve};
use crate::path::{MsePath, RateTuple};
use crate::quad::{integrate, integrate_with_points};
use crate::transfer::{check_permutation, denom, mimo_cov_cholesky, mimo_sinr_terms};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMethod {
    ClosedFormGaussian,
    NumericGaussian,
    #[serde(rename = "NumericQPSK")]
    NumericQpsk,
}

impl RateMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::ClosedFormGaussian => "closed_form_gaussian",
            Self::NumericGaussian => "numeric_gaussian",
            Self::NumericQpsk => "numeric_qpsk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rates: Vec<f64>,
    pub sum: f64,
    pub path: MsePath,
    pub method: RateMethod,
}

impl RateReport {
    fn new(rates: Vec<f64>, path: &MsePath, method: RateMethod) -> Self {
        Self {
            sum: rates.iter().sum(),
            rates,
            path: path.clone(),
            method,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("user,rate_bpcu,method\n");
        for (k, r) in self.rates.iter().enumerate() {
            s.push_str(&format!("{},{r:.10},{}\n", k + 1, self.method.name()));
        }
        s.push_str(&format!("sum,{:.10},{}\n", self.sum, self.method.name()));
        s
    }
}

/// log2(1 + sum g / sigma^2).
pub fn sum_rate_capacity(cfg: &SystemConfig) -> f64 {
    (cfg.g_total() / cfg.noise_var).ln_1p() / LN_2
}

fn check_dim(cfg: &SystemConfig, path: &MsePath) -> Result<()> {
    if path.k() != cfg.k {
        return Err(Error::Shape(format!(
            "path dimension {} differs from K={}",
            path.k(),
            cfg.k
        )));
    }
    Ok(())
}

/// Gaussian-signalling rates along a piecewise-linear path, summed per segment.
pub fn user_rates_closed_form(cfg: &SystemConfig, path: &MsePath) -> Result<RateReport> {
    check_dim(cfg, path)?;
    Ok(RateReport::new(
        closed_form_rates(&cfg.g, cfg.noise_var, path.breakpoints()),
        path,
        RateMethod::ClosedFormGaussian,
    ))
}

/// Closed-form rates for raw breakpoints (no validation).
pub fn closed_form_rates(g: &[f64], noise_var: f64, bps: &[Vec<f64>]) -> Vec<f64> {
    let k = g.len();
    let mut r = vec![0.0; k];
    for w in bps.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let d: f64 = (0..k).map(|j| g[j] * (a[j] - b[j])).sum();
        if d == 0.0 {
            continue;
        }
        let sb: f64 = (0..k).map(|j| g[j] * b[j]).sum::<f64>() + noise_var;
        let seg = (d / sb).ln_1p() / LN_2;
        for j in 0..k {
            r[j] += g[j] * (a[j] - b[j]) / d * seg;
        }
    }
    r
}

/// Rates as line integrals of f(rho_k + f^{-1}(v_k)) d rho_k with the matched DEC.
pub fn user_rates_numeric(
    cfg: &SystemConfig,
    path: &MsePath,
    curve: &MmseCurve,
    quad_tol: f64,
) -> Result<RateReport> {
    check_dim(cfg, path)?;
    let method = match curve.kind {
        CurveKind::Gaussian => RateMethod::NumericGaussian,
        CurveKind::Qpsk => RateMethod::NumericQpsk,
    };
    let mut rates = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        rates.push(numeric_user_rate(cfg, path, curve, k, quad_tol)?);
    }
    Ok(RateReport::new(rates, path, method))
}

fn numeric_user_rate(
    cfg: &SystemConfig,
    path: &MsePath,
    curve: &MmseCurve,
    k: usize,
    tol: f64,
) -> Result<f64> {
    let gk = cfg.g[k];
    if gk == 0.0 {
        return Ok(0.0);
    }
    let f = |rho: f64| curve.eval(rho);
    // below rho_min the DEC target is v = 1, so f^{-1}(v) = 0
    let rho_min = gk / (cfg.g_total() - gk + cfg.noise_var);
    let head = integrate(f, 0.0, rho_min, tol, 0.0);
    if !head.converged {
        return Err(Error::Quadrature { segment: 0 });
    }
    let mut total = head.value;
    for (i, (a, b)) in path.segments().enumerate() {
        let d0 = denom(&cfg.g, cfg.noise_var, a, k);
        let d1 = denom(&cfg.g, cfg.noise_var, b, k);
        if d0 == d1 {
            continue;
        }
        let (va, vb) = (a[k], b[k]);
        let integrand = |t: f64| {
            let d = d0 + t * (d1 - d0);
            let v = va + t * (vb - va);
            if v <= 0.0 {
                return 0.0;
            }
            let rho = gk / d;
            let drho = -gk * (d1 - d0) / (d * d);
            let g = match curve.kind {
                CurveKind::Gaussian => v / (1.0 + rho * v),
                CurveKind::Qpsk => f(rho + curve.inverse(v)),
            };
            g * drho
        };
        let r = integrate_with_points(integrand, 0.0, 1.0, &[], tol, 0.0, 2000);
        if !r.converged {
            return Err(Error::Quadrature { segment: i + 1 });
        }
        total += r.value;
    }
    Ok(total / LN_2)
}

/// SIC corner rates for decoding order `pi` (pi[0] decoded first).
pub fn sic_corner_rates(cfg: &SystemConfig, pi: &[usize]) -> Result<Vec<f64>> {
    check_permutation(pi, cfg.k)?;
    let th = crate::transfer::sic_thresholds(cfg, pi)?;
    Ok(th.iter().map(|r| r.ln_1p() / LN_2).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionConstraint {
    /// 0-based user indices in the subset.
    pub users: Vec<usize>,
    pub bound: f64,
    pub lhs: f64,
    pub slack: f64,
}

impl RegionConstraint {
    pub fn label(&self) -> String {
        let names: Vec<String> = self.users.iter().map(|u| format!("R{}", u + 1)).collect();
        format!("{} <= {:.4}", names.join("+"), self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub inside: bool,
    pub constraints: Vec<RegionConstraint>,
    /// Indices into `constraints`: the violated ones if outside, the tight ones if inside.
    pub binding: Vec<usize>,
}

impl RegionReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("subset,bound_bpcu,lhs_bpcu,slack_bpcu\n");
        for c in &self.constraints {
            let names: Vec<String> = c.users.iter().map(|u| (u + 1).to_string()).collect();
            s.push_str(&format!(
                "{},{:.10},{:.10},{:.10}\n",
                names.join("+"),
                c.bound,
                c.lhs,
                c.slack
            ));
        }
        s
    }

    pub fn first_violation(&self) -> Option<&RegionConstraint> {
        if self.inside {
            None
        } else {
            self.binding.first().map(|&i| &self.constraints[i])
        }
    }
}

/// Slack allowed for rounding when a tuple sits exactly on a face.
pub const REGION_TOL: f64 = 1e-12;

/// Checks every subset constraint sum_{k in S} R_k <= log2(1 + sum_{k in S} g_k / sigma^2).
pub fn in_capacity_region(cfg: &SystemConfig, r: &RateTuple) -> Result<RegionReport> {
    if r.rates.len() != cfg.k {
        return Err(Error::Shape(format!(
            "rate tuple has {} entries, expected K={}",
            r.rates.len(),
            cfg.k
        )));
    }
    if cfg.k > 20 {
        return Err(Error::RegionTooLarge(cfg.k));
    }
    let mut constraints = Vec::with_capacity((1usize << cfg.k) - 1);
    for mask in 1usize..(1 << cfg.k) {
        let users: Vec<usize> = (0..cfg.k).filter(|&i| mask >> i & 1 == 1).collect();
        let gs: f64 = users.iter().map(|&i| cfg.g[i]).sum();
        let lhs: f64 = users.iter().map(|&i| r.rates[i]).sum();
        let bound = (gs / cfg.noise_var).ln_1p() / LN_2;
        constraints.push(RegionConstraint {
            users,
            bound,
            lhs,
            slack: bound - lhs,
        });
    }
    // subsets ordered by size, then lexicographically
    constraints.sort_by(|a, b| {
        a.users
            .len()
            .cmp(&b.users.len())
            .then(a.users.cmp(&b.users))
    });
    let violated: Vec<usize> = (0..constraints.len())
        .filter(|&i| constraints[i].slack < -REGION_TOL)
        .collect();
    let inside = violated.is_empty();
    let binding = if inside {
        (0..constraints.len())
            .filter(|&i| constraints[i].slack <= 1e-9)
            .collect()
    } else {
        violated
    };
    Ok(RegionReport {
        inside,
        constraints,
        binding,
    })
}

/// log2 det(I + sum_k P_k H_k H_k^H / sigma^2) via a Cholesky factor.
pub fn mimo_sum_rate(mimo: &MimoConfig) -> Result<f64> {
    mimo.validate()?;
    let hs = mimo.scaled();
    let ones = vec![1.0; mimo.k()];
    let ch = mimo_cov_cholesky(&hs, mimo.noise_var, &ones);
    let l = ch.l();
    let nr = mimo.nr();
    let logdet: f64 = (0..nr).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0;
    Ok((logdet - nr as f64 * mimo.noise_var.ln()) / LN_2)
}

/// Per-user LMMSE rates as -int s_k dv_k along `path`, in bits.
pub fn mimo_user_rates_numeric(mimo: &MimoConfig, path: &MsePath, tol: f64) -> Result<Vec<f64>> {
    mimo.validate()?;
    let k = mimo.k();
    if path.k() != k {
        return Err(Error::Shape(format!(
            "path dimension {} differs from K={k}",
            path.k()
        )));
    }
    let mut rates = vec![0.0; k];
    for (i, (a, b)) in path.segments().enumerate() {
        for u in 0..k {
            let dv = a[u] - b[u];
            if dv == 0.0 {
                continue;
            }
            let f = |t: f64| {
                let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
                mimo_sinr_terms(mimo, &v)
                    .map(|s| s[u] * dv)
                    .unwrap_or(f64::NAN)
            };
            let r = integrate(f, 0.0, 1.0, tol, 0.0);
            if !r.converged || !r.value.is_finite() {
                return Err(Error::Quadrature { segment: i });
            }
            rates[u] += r.value / LN_2;
        }
    }
    Ok(rates)
}
