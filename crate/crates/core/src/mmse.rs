//! Scalar MMSE curves and the J-function pair.
//!
//! Exact values come from adaptive quadrature. Hot loops use cubic Hermite tables
//! built once from the exact values and their exact derivatives.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::integrate_with_points;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const HALF_WIDTH: f64 = 12.0;
const QUAD_REL: f64 = 1e-13;

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln(ln(1 + e^x)), accurate for very negative x.
#[inline]
fn ln_softplus(x: f64) -> f64 {
    if x < -30.0 {
        x
    } else {
        softplus(x).ln()
    }
}

#[inline]
fn ln_phi(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

fn gauss_expect<F: Fn(f64) -> f64>(center: f64, log_integrand: F) -> f64 {
    let r = integrate_with_points(
        |z| log_integrand(z).exp(),
        center - HALF_WIDTH,
        center + HALF_WIDTH,
        &[center],
        1e-300,
        QUAD_REL,
        4000,
    );
    r.value
}

fn check_nonneg(x: f64, what: &str) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::Domain(format!("{what} = {x} must be nonnegative")))
    } else {
        Ok(())
    }
}

pub fn mmse_gaussian(rho: f64) -> Result<f64> {
    check_nonneg(rho, "rho")?;
    Ok(1.0 / (1.0 + rho))
}

fn fq_exact(rho: f64) -> f64 {
    if rho == 0.0 {
        return 1.0;
    }
    if rho.is_infinite() {
        return 0.0;
    }
    let s = rho.sqrt();
    // 1 - tanh(u) = 2 / (1 + e^{2u})
    gauss_expect(-s, |z| ln_phi(z) + LN_2 - softplus(2.0 * (rho + s * z)))
}

fn fq_deriv_exact(rho: f64) -> f64 {
    if rho == 0.0 {
        return -1.0;
    }
    let s = rho.sqrt();
    // sech^2(u) (1 - tanh u) = 8 / ((1 + e^{2u})^2 (1 + e^{-2u}))
    -gauss_expect(-s, |z| {
        let u2 = 2.0 * (rho + s * z);
        ln_phi(z) + 3.0 * LN_2 - 2.0 * softplus(u2) - softplus(-u2)
    })
}

/// QPSK MMSE at complex SNR `rho`, by quadrature.
pub fn mmse_qpsk(rho: f64) -> Result<f64> {
    check_nonneg(rho, "rho")?;
    Ok(fq_exact(rho))
}

fn one_minus_j_exact(sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let c = -0.5 * sigma;
    gauss_expect(c, |z| {
        let u = 0.5 * sigma * sigma + sigma * z;
        ln_phi(z) + ln_softplus(-u)
    }) / LN_2
}

fn j_deriv_exact(sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let c = -0.5 * sigma;
    sigma / LN_2
        * gauss_expect(c, |z| {
            let u = 0.5 * sigma * sigma + sigma * z;
            ln_phi(z) - 2.0 * softplus(u)
        })
}

/// Mutual information of a consistent Gaussian LLR channel with LLR std `sigma`.
pub fn j_func(sigma: f64) -> Result<f64> {
    check_nonneg(sigma, "sigma")?;
    if sigma.is_infinite() {
        return Ok(1.0);
    }
    Ok(1.0 - one_minus_j_exact(sigma))
}

/// Inverse of [`j_func`], polished against the quadrature values.
pub fn j_inv(info: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&info) {
        return Err(Error::Domain(format!("I = {info} must lie in [0,1)")));
    }
    if info == 0.0 {
        return Ok(0.0);
    }
    let s0 = fast::j_inv(info);
    let tail = 1.0 - info;
    // Compare on the 1-J scale where the tail is resolved.
    let above = |s: f64| one_minus_j_exact(s) < tail;
    let (mut lo, mut hi) = (s0 * (1.0 - 1e-6), s0 * (1.0 + 1e-6) + 1e-12);
    while above(lo) && lo > 1e-300 {
        lo *= 0.5;
    }
    while !above(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    Gaussian,
    #[serde(rename = "QPSK")]
    Qpsk,
}

/// An MMSE curve f(rho). `tol` is the target accuracy of [`mmse_inverse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmseCurve {
    pub kind: CurveKind,
    pub tol: f64,
}

impl MmseCurve {
    pub fn gaussian() -> Self {
        Self {
            kind: CurveKind::Gaussian,
            tol: 1e-10,
        }
    }

    pub fn qpsk() -> Self {
        Self {
            kind: CurveKind::Qpsk,
            tol: 1e-10,
        }
    }

    /// Fast evaluation; closed form for Gaussian, table for QPSK.
    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        match self.kind {
            CurveKind::Gaussian => 1.0 / (1.0 + rho),
            CurveKind::Qpsk => fast::fq(rho),
        }
    }

    pub fn eval_exact(&self, rho: f64) -> f64 {
        match self.kind {
            CurveKind::Gaussian => 1.0 / (1.0 + rho),
            CurveKind::Qpsk => fq_exact(rho),
        }
    }

    /// Fast inverse; `v <= 0` maps to infinity.
    #[inline]
    pub fn inverse(&self, v: f64) -> f64 {
        match self.kind {
            CurveKind::Gaussian => {
                if v <= 0.0 {
                    f64::INFINITY
                } else {
                    (1.0 / v - 1.0).max(0.0)
                }
            }
            CurveKind::Qpsk => fast::fq_inv(v),
        }
    }
}

/// rho with f(rho) = v, by bisection on a geometrically grown bracket.
pub fn mmse_inverse(curve: &MmseCurve, v: f64) -> Result<f64> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Domain(format!("v = {v} must lie in (0,1]")));
    }
    if v == 1.0 {
        return Ok(0.0);
    }
    let f = |r: f64| curve.eval_exact(r);
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > v {
        lo = hi;
        hi *= 2.0;
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm - v).abs() <= curve.tol * 1e-3 || mid <= lo || mid >= hi {
            break;
        }
        if fm > v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Cubic Hermite table on knots x_i = xmax (i/n)^2.
struct Table {
    xmax: f64,
    n: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    quadratic: bool,
    x0: f64,
}

impl Table {
    fn build(x0: f64, xmax: f64, n: usize, quadratic: bool, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let x: Vec<f64> = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                if quadratic {
                    x0 + (xmax - x0) * t * t
                } else {
                    x0 + (xmax - x0) * t
                }
            })
            .collect();
        let (y, dy) = x.iter().map(|&xi| f(xi)).unzip();
        Self {
            xmax,
            n,
            x,
            y,
            dy,
            quadratic,
            x0,
        }
    }

    #[inline]
    fn locate(&self, x: f64) -> usize {
        let t = ((x - self.x0) / (self.xmax - self.x0)).clamp(0.0, 1.0);
        let t = if self.quadratic { t.sqrt() } else { t };
        let mut i = ((t * self.n as f64) as usize).min(self.n - 1);
        while i > 0 && self.x[i] > x {
            i -= 1;
        }
        while i + 1 < self.n && self.x[i + 1] <= x {
            i += 1;
        }
        i
    }

    #[inline]
    fn eval_in(&self, i: usize, x: f64) -> f64 {
        let (xa, xb) = (self.x[i], self.x[i + 1]);
        let h = xb - xa;
        let t = (x - xa) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h * h10 * self.dy[i] + h01 * self.y[i + 1] + h * h11 * self.dy[i + 1]
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.eval_in(self.locate(x), x)
    }

    /// Solve eval(x) = target for a monotone table; `increasing` gives the direction.
    fn solve(&self, target: f64, increasing: bool) -> f64 {
        let above = |v: f64| if increasing { v >= target } else { v <= target };
        // first knot index at which the table has reached the target
        let (mut lo, mut hi) = (0usize, self.n);
        if above(self.y[0]) {
            return self.x[0];
        }
        if !above(self.y[self.n]) {
            return self.x[self.n];
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if above(self.y[mid]) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (mut a, mut b) = (self.x[lo], self.x[hi]);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if above(self.eval_in(lo, m)) {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }
}

const TABLE_N: usize = 4096;
const J_SPLIT: f64 = 3.0;
const J_MAX: f64 = 30.0;
const FQ_MAX: f64 = 600.0;

struct Tables {
    j_lo: Table,
    ln_tail: Table,
    j_split: f64,
    ln_fq: Table,
    ln_fq_end: f64,
    ln_fq_slope: f64,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let j_lo = Table::build(0.0, J_SPLIT, TABLE_N, true, |s| {
            (1.0 - one_minus_j_exact(s), j_deriv_exact(s))
        });
        let ln_tail = Table::build(J_SPLIT, J_MAX, TABLE_N, false, |s| {
            let t = one_minus_j_exact(s);
            (t.ln(), -j_deriv_exact(s) / t)
        });
        let ln_fq = Table::build(0.0, FQ_MAX, TABLE_N, true, |r| {
            let f = fq_exact(r);
            (f.ln(), fq_deriv_exact(r) / f)
        });
        let j_split = j_lo.y[TABLE_N];
        let ln_fq_end = ln_fq.y[TABLE_N];
        let ln_fq_slope = ln_fq.dy[TABLE_N];
        Tables {
            j_lo,
            ln_tail,
            j_split,
            ln_fq,
            ln_fq_end,
            ln_fq_slope,
        }
    })
}

/// Table-backed evaluations for hot loops. Inputs are not validated; the
/// functions saturate instead (J(inf) = 1, J^{-1}(1) = inf, f(inf) = 0).
pub mod fast {
    use super::*;

    /// Force the one-time table build.
    pub fn warm_up() {
        let _ = tables();
    }

    #[inline]
    pub fn j(sigma: f64) -> f64 {
        let t = tables();
        if sigma <= 0.0 {
            0.0
        } else if sigma <= J_SPLIT {
            t.j_lo.eval(sigma)
        } else if sigma < J_MAX {
            -t.ln_tail.eval(sigma).exp_m1()
        } else {
            1.0
        }
    }

    #[inline]
    pub fn j_inv(info: f64) -> f64 {
        let t = tables();
        if info <= 0.0 {
            0.0
        } else if info >= 1.0 {
            f64::INFINITY
        } else if info <= t.j_split {
            t.j_lo.solve(info, true)
        } else {
            t.ln_tail.solve((-info).ln_1p(), false)
        }
    }

    #[inline]
    pub fn fq(rho: f64) -> f64 {
        let t = tables();
        if rho <= 0.0 {
            1.0
        } else if rho <= FQ_MAX {
            t.ln_fq.eval(rho).exp()
        } else if rho.is_finite() {
            (t.ln_fq_end + t.ln_fq_slope * (rho - FQ_MAX)).exp()
        } else {
            0.0
        }
    }

    #[inline]
    pub fn fq_inv(v: f64) -> f64 {
        let t = tables();
        if v >= 1.0 {
            return 0.0;
        }
        if v <= 0.0 {
            return f64::INFINITY;
        }
        let y = v.ln();
        if y < t.ln_fq_end {
            FQ_MAX + (y - t.ln_fq_end) / t.ln_fq_slope
        } else {
            t.ln_fq.solve(y, false)
        }
    }
}
