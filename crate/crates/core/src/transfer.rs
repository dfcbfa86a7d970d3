//! ESE transfer functions: MSE-to-SNR maps, bounds, per-path ESE curves,
//! matched DEC targets and SIC thresholds.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::config::{MimoConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::path::MsePath;

pub(crate) fn check_user(cfg: &SystemConfig, k: usize) -> Result<()> {
    if k >= cfg.k {
        Err(Error::InvalidUser { index: k, k: cfg.k })
    } else {
        Ok(())
    }
}

fn check_v(v: &[f64], k: usize) -> Result<()> {
    if v.len() != k {
        return Err(Error::Shape(format!(
            "v has {} entries, expected {k}",
            v.len()
        )));
    }
    if let Some((i, x)) = v
        .iter()
        .enumerate()
        .find(|(_, x)| !(0.0..=1.0).contains(*x))
    {
        return Err(Error::Domain(format!("v[{i}] = {x} outside [0,1]")));
    }
    Ok(())
}

/// rho_k = g_k / (sum_{i != k} g_i v_i + sigma^2), one shared sum for all users.
pub fn ese_snr(cfg: &SystemConfig, v: &[f64]) -> Result<Vec<f64>> {
    check_v(v, cfg.k)?;
    Ok(ese_snr_unchecked(&cfg.g, cfg.noise_var, v))
}

#[inline]
pub fn ese_snr_unchecked(g: &[f64], noise_var: f64, v: &[f64]) -> Vec<f64> {
    let total: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + noise_var;
    g.iter()
        .zip(v)
        .map(|(&gk, &vk)| gk / (total - gk * vk).max(noise_var))
        .collect()
}

/// (rho_min, rho_max): SNR with full interference and with none.
pub fn snr_bounds(cfg: &SystemConfig, k: usize) -> Result<(f64, f64)> {
    check_user(cfg, k)?;
    let gk = cfg.g[k];
    Ok((
        gk / (cfg.g_total() - gk + cfg.noise_var),
        gk / cfg.noise_var,
    ))
}

/// One piece of a per-user ESE curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EsePiece {
    /// rho = g_k / d(v) for v in [v_lo, v_hi], d linear between `d_lo` at v_lo and `d_hi` at
    /// v_hi; d_hi == d_lo is a flat piece. Endpoint form keeps near-vertical pieces accurate.
    Slope {
        v_hi: f64,
        v_lo: f64,
        d_hi: f64,
        d_lo: f64,
    },
    /// Vertical piece at fixed v: rho moves from `rho_from` to `rho_to`.
    Jump { v: f64, rho_from: f64, rho_to: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EseTransfer {
    pub k: usize,
    pub gk: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub pieces: Vec<EsePiece>,
}

/// Denominator of a slope piece at v, interpolated from its endpoints.
#[inline]
fn slope_denom(v: f64, v_hi: f64, v_lo: f64, d_hi: f64, d_lo: f64) -> f64 {
    let t = ((v - v_lo) / (v_hi - v_lo)).clamp(0.0, 1.0);
    d_lo + t * (d_hi - d_lo)
}

impl EsePiece {
    /// SNR range covered, in increasing order.
    pub fn rho_range(&self, gk: f64) -> (f64, f64) {
        match *self {
            EsePiece::Slope { d_hi, d_lo, .. } => (gk / d_hi, gk / d_lo),
            EsePiece::Jump {
                rho_from, rho_to, ..
            } => (rho_from, rho_to),
        }
    }
}

impl EseTransfer {
    /// rho as a function of v. At a vertical piece the value before the jump is returned.
    pub fn eval(&self, v: f64) -> f64 {
        for p in &self.pieces {
            match *p {
                EsePiece::Slope {
                    v_hi,
                    v_lo,
                    d_hi,
                    d_lo,
                } if v <= v_hi && v >= v_lo => {
                    return self.gk / slope_denom(v, v_hi, v_lo, d_hi, d_lo)
                }
                EsePiece::Jump {
                    v: vj, rho_from, ..
                } if v == vj => return rho_from,
                _ => {}
            }
        }
        if v >= 1.0 {
            self.rho_min
        } else {
            self.rho_max
        }
    }

    /// Samples (v, rho) along the curve, `per_piece` points per piece.
    pub fn sample(&self, per_piece: usize) -> Vec<(f64, f64)> {
        let n = per_piece.max(2);
        let mut out = Vec::new();
        for p in &self.pieces {
            match *p {
                EsePiece::Slope {
                    v_hi,
                    v_lo,
                    d_hi,
                    d_lo,
                } => {
                    for i in 0..n {
                        let v = v_hi + (v_lo - v_hi) * i as f64 / (n - 1) as f64;
                        out.push((v, self.gk / slope_denom(v, v_hi, v_lo, d_hi, d_lo)));
                    }
                }
                EsePiece::Jump {
                    v,
                    rho_from,
                    rho_to,
                } => {
                    out.push((v, rho_from));
                    out.push((v, rho_to));
                }
            }
        }
        out
    }

    pub fn to_csv(&self, per_piece: usize) -> String {
        let mut s = String::from("v,rho\n");
        for (v, r) in self.sample(per_piece) {
            s.push_str(&format!("{v:.10},{r:.10}\n"));
        }
        s
    }
}

/// Interference-plus-noise term seen by user k at MSE vector x.
#[inline]
pub(crate) fn denom(g: &[f64], noise_var: f64, x: &[f64], k: usize) -> f64 {
    g.iter()
        .zip(x)
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, (a, b))| a * b)
        .sum::<f64>()
        + noise_var
}

pub fn ese_transfer_on_path(cfg: &SystemConfig, path: &MsePath, k: usize) -> Result<EseTransfer> {
    check_user(cfg, k)?;
    if path.k() != cfg.k {
        return Err(Error::Shape(format!(
            "path dimension {} differs from K={}",
            path.k(),
            cfg.k
        )));
    }
    let gk = cfg.g[k];
    let (rho_min, rho_max) = snr_bounds(cfg, k)?;
    let mut pieces = Vec::with_capacity(path.n_segments());
    for (a, b) in path.segments() {
        let d0 = denom(&cfg.g, cfg.noise_var, a, k);
        let d1 = denom(&cfg.g, cfg.noise_var, b, k);
        if a[k] == b[k] {
            pieces.push(EsePiece::Jump {
                v: a[k],
                rho_from: gk / d0,
                rho_to: gk / d1,
            });
        } else {
            pieces.push(EsePiece::Slope {
                v_hi: a[k],
                v_lo: b[k],
                d_hi: d0,
                d_lo: d1,
            });
        }
    }
    Ok(EseTransfer {
        k,
        gk,
        rho_min,
        rho_max,
        pieces,
    })
}

/// Matched DEC target psi_k: 1 below rho_min, 0 above rho_max, the inverse ESE
/// curve in between. Vertical ESE pieces become plateaus; flat ESE pieces map to
/// their lower v end.
#[derive(Debug, Clone, PartialEq)]
pub struct DecTarget {
    pub ese: EseTransfer,
}

impl DecTarget {
    pub fn k(&self) -> usize {
        self.ese.k
    }

    pub fn rho_min(&self) -> f64 {
        self.ese.rho_min
    }

    pub fn rho_max(&self) -> f64 {
        self.ese.rho_max
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let e = &self.ese;
        if rho <= e.rho_min {
            return 1.0;
        }
        if rho >= e.rho_max {
            return 0.0;
        }
        for p in &e.pieces {
            let (lo, hi) = p.rho_range(e.gk);
            if rho < lo || rho > hi {
                continue;
            }
            return match *p {
                EsePiece::Jump { v, .. } => v,
                EsePiece::Slope {
                    v_hi,
                    v_lo,
                    d_hi,
                    d_lo,
                } => {
                    if d_hi <= d_lo {
                        v_lo
                    } else {
                        let t = (e.gk / rho - d_lo) / (d_hi - d_lo);
                        (v_lo + t * (v_hi - v_lo)).clamp(v_lo, v_hi)
                    }
                }
            };
        }
        0.0
    }

    pub fn to_csv(&self, rhos: &[f64]) -> String {
        let mut s = String::from("rho,v\n");
        for &r in rhos {
            s.push_str(&format!("{r:.10},{:.10}\n", self.eval(r)));
        }
        s
    }
}

pub fn dec_target(cfg: &SystemConfig, path: &MsePath, k: usize) -> Result<DecTarget> {
    Ok(DecTarget {
        ese: ese_transfer_on_path(cfg, path, k)?,
    })
}

pub fn check_permutation(pi: &[usize], k: usize) -> Result<()> {
    if pi.len() != k {
        return Err(Error::InvalidPermutation {
            k,
            detail: format!("length {}", pi.len()),
        });
    }
    let mut seen = vec![false; k];
    for &p in pi {
        if p >= k || seen[p] {
            return Err(Error::InvalidPermutation {
                k,
                detail: format!("entry {p} out of range or repeated"),
            });
        }
        seen[p] = true;
    }
    Ok(())
}

/// Decoding thresholds for SIC with decoding order `pi` (pi[0] decoded first),
/// indexed by user.
pub fn sic_thresholds(cfg: &SystemConfig, pi: &[usize]) -> Result<Vec<f64>> {
    check_permutation(pi, cfg.k)?;
    let mut out = vec![0.0; cfg.k];
    let mut later: f64 = pi.iter().map(|&u| cfg.g[u]).sum();
    for &u in pi {
        later -= cfg.g[u];
        out[u] = cfg.g[u] / (later.max(0.0) + cfg.noise_var);
    }
    Ok(out)
}

/// Factor R = sigma^2 I + sum_k v_k Ht_k Ht_k^H, with powers folded into Ht.
pub(crate) fn mimo_cov_cholesky(
    hs: &[DMatrix<Complex64>],
    noise_var: f64,
    v: &[f64],
) -> Cholesky<Complex64, nalgebra::Dyn> {
    let nr = hs[0].nrows();
    let mut r = DMatrix::<Complex64>::identity(nr, nr) * Complex64::new(noise_var, 0.0);
    for (h, &vk) in hs.iter().zip(v) {
        if vk > 0.0 {
            r += h * h.adjoint() * Complex64::new(vk, 0.0);
        }
    }
    Cholesky::new(r).expect("noise_var > 0 keeps R positive definite")
}

/// s_k = sum_i h_{k,i}^H R^{-1} h_{k,i} for every user.
pub fn mimo_sinr_terms(mimo: &MimoConfig, v: &[f64]) -> Result<Vec<f64>> {
    check_v(v, mimo.k())?;
    let hs = mimo.scaled();
    let ch = mimo_cov_cholesky(&hs, mimo.noise_var, v);
    let l = ch.l();
    Ok(hs
        .iter()
        .map(|h| {
            let w = l
                .solve_lower_triangular(h)
                .expect("cholesky factor is nonsingular");
            w.iter().map(|z| z.norm_sqr()).sum()
        })
        .collect())
}

/// LMMSE-ESE SNR: rho_k = s_k / (1 - v_k s_k).
pub fn mimo_lmmse_snr(mimo: &MimoConfig, v: &[f64]) -> Result<Vec<f64>> {
    let s = mimo_sinr_terms(mimo, v)?;
    s.iter()
        .zip(v)
        .enumerate()
        .map(|(k, (&sk, &vk))| {
            let d = 1.0 - vk * sk;
            if d <= 0.0 {
                Err(Error::Domain(format!(
                    "user {k}: 1 - v_k s_k = {d:.3e} is not positive"
                )))
            } else {
                Ok(sk / d)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_user_cfg() -> SystemConfig {
        SystemConfig::new(vec![1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0], 1.0).unwrap()
    }

    #[test]
    fn ese_snr_bounds_examples() {
        let c = three_user_cfg();
        let r1 = ese_snr(&c, &[1.0; 3]).unwrap();
        let expect = [1.0 / 13.0, 2.0 / 12.0, 4.0 / 10.0];
        for (a, b) in r1.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let r0 = ese_snr(&c, &[0.0; 3]).unwrap();
        for (a, b) in r0.iter().zip(&c.g) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(ese_snr(&c, &[1.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn ese_snr_matches_naive_loop() {
        let c = three_user_cfg();
        let v = [0.5, 0.2, 0.2];
        let r = ese_snr(&c, &v).unwrap();
        for k in 0..3 {
            let mut d = c.noise_var;
            for i in 0..3 {
                if i != k {
                    d += c.g[i] * v[i];
                }
            }
            assert!((r[k] - c.g[k] / d).abs() < 1e-15);
        }
        let manual = (1.0 / 7.0) / (1.0 + 0.2 * 2.0 / 7.0 + 0.2 * 4.0 / 7.0);
        assert!((r[0] - manual).abs() < 1e-15);
    }

    #[test]
    fn bounds_examples() {
        let c = three_user_cfg();
        let (a, b) = snr_bounds(&c, 0).unwrap();
        assert!((a - 1.0 / 13.0).abs() < 1e-15 && (b - 1.0 / 7.0).abs() < 1e-15);
        let (a, b) = snr_bounds(&c, 2).unwrap();
        assert!((a - 0.4).abs() < 1e-15 && (b - 4.0 / 7.0).abs() < 1e-15);
        let single = SystemConfig::new(vec![2.0], 0.5).unwrap();
        assert_eq!(snr_bounds(&single, 0).unwrap(), (4.0, 4.0));
        assert!(snr_bounds(&c, 3).is_err());
    }

    #[test]
    fn case2_user2_has_vertical_piece() {
        let c = three_user_cfg();
        let p = MsePath::new(vec![
            vec![1.0; 3],
            vec![0.2145, 0.2056, 0.0],
            vec![0.0, 0.0618, 0.0],
            vec![0.0; 3],
        ])
        .unwrap();
        let e = ese_transfer_on_path(&c, &p, 1).unwrap();
        assert_eq!(e.pieces.len(), 3);
        match e.pieces[2] {
            EsePiece::Slope { d_hi, d_lo, .. } => assert_eq!(d_hi, d_lo),
            _ => panic!("expected a flat piece"),
        }
        let e3 = ese_transfer_on_path(&c, &p, 2).unwrap();
        assert!(matches!(e3.pieces[1], EsePiece::Jump { v, .. } if v == 0.0));
        let e1 = ese_transfer_on_path(&c, &p, 0).unwrap();
        assert!(matches!(e1.pieces[2], EsePiece::Jump { v, .. } if v == 0.0));
        let d = dec_target(&c, &p, 1).unwrap();
        assert_eq!(d.eval(e.rho_max), 0.0);
        assert_eq!(d.eval(e.rho_min * 0.5), 1.0);
    }

    #[test]
    fn straight_line_endpoints() {
        let c = SystemConfig::new(vec![0.5, 0.5], 1.0).unwrap();
        let p = MsePath::new(vec![vec![1.0; 2], vec![0.0; 2]]).unwrap();
        for k in 0..2 {
            let e = ese_transfer_on_path(&c, &p, k).unwrap();
            let (lo, hi) = snr_bounds(&c, k).unwrap();
            assert!((e.eval(1.0) - lo).abs() < 1e-15);
            assert!((e.eval(0.0) - hi).abs() < 1e-15);
        }
    }

    #[test]
    fn sic_examples() {
        let c = SystemConfig::new(vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(sic_thresholds(&c, &[0, 1]).unwrap(), vec![0.5, 1.0]);
        let c1 = SystemConfig::new(vec![0.3], 0.5).unwrap();
        assert_eq!(sic_thresholds(&c1, &[0]).unwrap(), vec![0.6]);
        let c3 = three_user_cfg();
        let t = sic_thresholds(&c3, &[2, 1, 0]).unwrap();
        let e = [
            1.0 / 7.0,
            (2.0 / 7.0) / (1.0 + 1.0 / 7.0),
            (4.0 / 7.0) / (1.0 + 3.0 / 7.0),
        ];
        for (a, b) in t.iter().zip(e) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(sic_thresholds(&c3, &[0, 0, 1]).is_err());
        assert!(sic_thresholds(&c3, &[0, 1]).is_err());
    }
}
