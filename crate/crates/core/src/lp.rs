//! Dense two-phase primal simplex.
//!
//! Pivoting is deterministic: Dantzig pricing with ties to the lowest column, ratio
//! ties to the lowest basic index, and Bland's rule after a run of degenerate pivots.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coef: Vec<f64>,
    pub kind: Kind,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal {
        x: Vec<f64>,
        objective: f64,
    },
    /// `worst_row` is the constraint with the largest phase-one infeasibility.
    Infeasible {
        worst_row: usize,
    },
    Unbounded,
}

const PIV_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-11;
const DEGENERATE_RUN: usize = 50;
const MAX_PIVOTS: usize = 200_000;

struct Tableau {
    m: usize,
    w: usize,
    a: Vec<f64>,
    basis: Vec<usize>,
    d: Vec<f64>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.w + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * self.w + self.w - 1]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.w;
        let p = self.at(r, e);
        {
            let row = &mut self.a[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
        }
        let pivot_row: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * w + e];
            if f != 0.0 {
                let row = &mut self.a[i * w..(i + 1) * w];
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[e] = 0.0;
            }
        }
        let f = self.d[e];
        if f != 0.0 {
            for (v, pr) in self.d.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.d[e] = 0.0;
        }
        self.basis[r] = e;
    }

    fn set_costs(&mut self, c: &[f64]) {
        let ncol = self.w - 1;
        self.d = vec![0.0; self.w];
        self.d[..ncol].copy_from_slice(&c[..ncol]);
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.w {
                    self.d[j] -= cb * self.a[i * self.w + j];
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    /// Runs simplex iterations on the current costs; returns false if unbounded.
    fn optimize(&mut self, allowed: &[bool]) -> bool {
        let ncol = self.w - 1;
        let mut degenerate = 0usize;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = COST_TOL;
            for j in 0..ncol {
                if !allowed[j] || self.d[j] <= COST_TOL {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if self.d[j] > best {
                    best = self.d[j];
                    enter = Some(j);
                }
            }
            let Some(e) = enter else {
                return true;
            };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let aie = self.at(i, e);
                if aie > PIV_TOL {
                    let ratio = self.rhs(i).max(0.0) / aie;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12 * best_ratio.max(1.0)
                                || (ratio <= best_ratio + 1e-12 * best_ratio.max(1.0)
                                    && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return false;
            };
            if best_ratio <= 1e-13 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, e);
        }
        true
    }
}

/// Maximize c^T x subject to `rows` and x >= 0.
pub fn maximize(c: &[f64], rows: &[Row]) -> LpStatus {
    let n = c.len();
    let m = rows.len();
    // normalise to nonnegative right-hand sides
    let mut kinds = Vec::with_capacity(m);
    let mut signs = Vec::with_capacity(m);
    for r in rows {
        assert_eq!(r.coef.len(), n, "row width must match objective");
        let flip = r.rhs < 0.0;
        signs.push(if flip { -1.0 } else { 1.0 });
        kinds.push(match (r.kind, flip) {
            (Kind::Le, true) => Kind::Ge,
            (Kind::Ge, true) => Kind::Le,
            (k, _) => k,
        });
    }
    let n_slack = kinds.iter().filter(|k| **k != Kind::Eq).count();
    let n_art = kinds.iter().filter(|k| **k != Kind::Le).count();
    let ncol = n + n_slack + n_art;
    let w = ncol + 1;
    let mut a = vec![0.0; m * w];
    let mut basis = vec![0usize; m];
    let mut art_row = vec![usize::MAX; ncol];
    let (mut s_col, mut a_col) = (n, n + n_slack);
    for (i, r) in rows.iter().enumerate() {
        let sg = signs[i];
        for j in 0..n {
            a[i * w + j] = sg * r.coef[j];
        }
        a[i * w + ncol] = sg * r.rhs;
        match kinds[i] {
            Kind::Le => {
                a[i * w + s_col] = 1.0;
                basis[i] = s_col;
                s_col += 1;
            }
            Kind::Ge => {
                a[i * w + s_col] = -1.0;
                s_col += 1;
                a[i * w + a_col] = 1.0;
                basis[i] = a_col;
                art_row[a_col] = i;
                a_col += 1;
            }
            Kind::Eq => {
                a[i * w + a_col] = 1.0;
                basis[i] = a_col;
                art_row[a_col] = i;
                a_col += 1;
            }
        }
    }
    let mut t = Tableau {
        m,
        w,
        a,
        basis,
        d: Vec::new(),
    };
    let is_art = |j: usize| j >= n + n_slack;

    if n_art > 0 {
        let c1: Vec<f64> = (0..ncol)
            .map(|j| if is_art(j) { -1.0 } else { 0.0 })
            .collect();
        t.set_costs(&c1);
        let allowed = vec![true; ncol];
        t.optimize(&allowed);
        let scale = 1.0 + rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        let mut infeas = 0.0;
        let mut worst = (0usize, 0.0f64);
        for i in 0..m {
            let b = t.basis[i];
            if is_art(b) {
                let v = t.rhs(i);
                infeas += v;
                if v > worst.1 {
                    worst = (art_row[b], v);
                }
            }
        }
        if infeas > 1e-9 * scale {
            return LpStatus::Infeasible { worst_row: worst.0 };
        }
        // drive zero-level artificials out of the basis
        for i in 0..m {
            if is_art(t.basis[i]) {
                if let Some(j) = (0..n + n_slack).find(|&j| t.at(i, j).abs() > 1e-9) {
                    t.pivot(i, j);
                }
            }
        }
    }

    let mut c2 = vec![0.0; ncol];
    c2[..n].copy_from_slice(c);
    t.set_costs(&c2);
    let allowed: Vec<bool> = (0..ncol).map(|j| !is_art(j)).collect();
    if !t.optimize(&allowed) {
        return LpStatus::Unbounded;
    }
    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    LpStatus::Optimal { x, objective }
}
