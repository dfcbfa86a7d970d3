//! Gaussian-approximation density evolution of the joint ESE/decoder loop.

use serde::{Deserialize, Serialize};

use crate::codedesign::{cnd_step, node_variance, vnd_step, DegreeProfile};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::transfer::ese_snr_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeLimits {
    pub max_outer: usize,
    pub n_inner: usize,
    pub converge_v: f64,
    pub stall_tol: f64,
    pub stall_window: usize,
}

impl Default for DeLimits {
    fn default() -> Self {
        Self {
            max_outer: 10_000,
            n_inner: 1,
            converge_v: 1e-6,
            stall_tol: 1e-7,
            stall_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeStep {
    pub v: Vec<f64>,
    pub rho: Vec<f64>,
    pub i_ev: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeTrajectory {
    /// Entry 0 is the starting state v = 1.
    pub steps: Vec<DeStep>,
    pub converged: bool,
    pub iterations: usize,
}

impl DeTrajectory {
    pub fn final_v(&self) -> &[f64] {
        &self.steps.last().expect("trajectory is never empty").v
    }

    pub fn to_csv(&self) -> String {
        let k = self.steps[0].v.len();
        let mut s = String::from("iter");
        for u in 1..=k {
            s.push_str(&format!(",v_{u}"));
        }
        for u in 1..=k {
            s.push_str(&format!(",rho_{u}"));
        }
        s.push('\n');
        for (t, st) in self.steps.iter().enumerate() {
            s.push_str(&t.to_string());
            for x in st.v.iter().chain(&st.rho) {
                s.push_str(&format!(",{x:.10e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Joint iteration: ESE update, `n_inner` decoder DE steps per user, then the
/// feedback variance from the node-perspective f_Q mixture.
/// `snr_scale` multiplies every channel gain.
pub fn run_ga_de(
    cfg: &SystemConfig,
    profiles: &[DegreeProfile],
    snr_scale: f64,
    limits: &DeLimits,
) -> Result<DeTrajectory> {
    if profiles.len() != cfg.k {
        return Err(Error::Shape(format!(
            "{} profiles for K={}",
            profiles.len(),
            cfg.k
        )));
    }
    if !(snr_scale > 0.0) {
        return Err(Error::Domain(format!("snr_scale {snr_scale}")));
    }
    let g: Vec<f64> = cfg.g.iter().map(|x| x * snr_scale).collect();
    let nodes: Vec<_> = profiles.iter().map(|p| p.node_fractions()).collect();
    let k = cfg.k;
    let mut v = vec![1.0; k];
    let mut i_ev = vec![0.0; k];
    let mut steps = vec![DeStep {
        v: v.clone(),
        rho: ese_snr_unchecked(&g, cfg.noise_var, &v),
        i_ev: i_ev.clone(),
    }];
    let mut quiet = 0;
    for it in 1..=limits.max_outer {
        let rho = ese_snr_unchecked(&g, cfg.noise_var, &v);
        let mut next = vec![0.0; k];
        for u in 0..k {
            let p = &profiles[u];
            let mut i = i_ev[u];
            for _ in 0..limits.n_inner.max(1) {
                i = vnd_step(p, cnd_step(p, i), rho[u]);
            }
            i_ev[u] = i;
            next[u] = node_variance(&nodes[u], cnd_step(p, i));
        }
        let dv = v
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        steps.push(DeStep {
            v: v.clone(),
            rho: rho.clone(),
            i_ev: i_ev.clone(),
        });
        if v.iter().all(|&x| x <= limits.converge_v) {
            return Ok(DeTrajectory {
                steps,
                converged: true,
                iterations: it,
            });
        }
        quiet = if dv < limits.stall_tol { quiet + 1 } else { 0 };
        if quiet >= limits.stall_window {
            return Ok(DeTrajectory {
                steps,
                converged: false,
                iterations: it,
            });
        }
    }
    Ok(DeTrajectory {
        steps,
        converged: false,
        iterations: limits.max_outer,
    })
}

/// Bisection on SNR_sum (dB) between a stalling and a converging point.
pub fn threshold_search(
    cfg: &SystemConfig,
    profiles: &[DegreeProfile],
    bracket_db: (f64, f64),
    tol_db: f64,
    limits: &DeLimits,
) -> Result<f64> {
    let converges = |db: f64| -> Result<bool> {
        Ok(run_ga_de(&cfg.at_snr_db(db), profiles, 1.0, limits)?.converged)
    };
    let (mut lo, mut hi) = bracket_db;
    if converges(lo)? || !converges(hi)? {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Decoder transfer curve: feedback variance at the inner fixed point for each rho.
pub fn measure_dec_transfer(p: &DegreeProfile, rho_grid: &[f64]) -> Vec<(f64, f64)> {
    let node = p.node_fractions();
    rho_grid
        .iter()
        .map(|&rho| {
            let mut i = 0.0;
            for _ in 0..100_000 {
                let n = vnd_step(p, cnd_step(p, i), rho);
                let done = (n - i).abs() < 1e-13;
                i = n;
                if done {
                    break;
                }
            }
            (rho, node_variance(&node, cnd_step(p, i)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_single_user_converges_at_once() {
        let cfg = SystemConfig::new(vec![1.0], 1e-12).unwrap();
        let p = DegreeProfile::from_pairs(&[(3, 1.0)], &[(6, 1.0)]).unwrap();
        let t = run_ga_de(&cfg, &[p], 1.0, &DeLimits::default()).unwrap();
        assert!(t.converged);
        assert_eq!(t.iterations, 1);
    }

    #[test]
    fn low_snr_stalls() {
        let cfg = SystemConfig::new(vec![1.0], 10.0).unwrap();
        let p = DegreeProfile::from_pairs(&[(3, 1.0)], &[(6, 1.0)]).unwrap();
        let t = run_ga_de(&cfg, &[p], 1.0, &DeLimits::default()).unwrap();
        assert!(!t.converged);
        assert!(t.final_v()[0] > 0.1);
    }
}
