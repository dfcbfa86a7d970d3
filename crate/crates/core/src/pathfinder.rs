//! Decoding-path construction: special paths, rate-targeted path solves and
//! equal-power layer splitting.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::path::{MsePath, RateTuple};
use crate::rates::{closed_form_rates, in_capacity_region, RegionReport};
use crate::transfer::check_permutation;

pub fn straight_line_path(k: usize) -> MsePath {
    MsePath::new(vec![vec![1.0; k], vec![0.0; k]]).expect("valid straight line")
}

/// K-segment staircase; segment j drops user pi[j] from 1 to 0.
pub fn sic_corner_path(k: usize, pi: &[usize]) -> Result<MsePath> {
    check_permutation(pi, k)?;
    let mut x = vec![1.0; k];
    let mut bps = vec![x.clone()];
    for &u in pi {
        x[u] = 0.0;
        bps.push(x.clone());
    }
    MsePath::new(bps)
}

/// One coordinate of an interior breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSolveSpec {
    pub target: RateTuple,
    /// Interior breakpoints x_1 .. x_{n-1}; the path has `template.len() + 1` segments.
    pub template: Vec<Vec<Slot>>,
    pub tol: f64,
    pub max_starts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl PathSolveSpec {
    pub fn new(target: RateTuple, template: Vec<Vec<Slot>>) -> Self {
        Self {
            target,
            template,
            tol: 1e-8,
            max_starts: 64,
            max_iter: 200,
            seed: 0,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.template.len() + 1
    }

    pub fn n_free(&self) -> usize {
        self.template
            .iter()
            .flatten()
            .filter(|s| matches!(s, Slot::Free))
            .count()
    }
}

/// Interior breakpoints where x_i has users `order[..i]` fixed at zero and the rest
/// free. With `order = [2, 0, 1]` and K = 3 this is the pattern
/// x_1 = [*, *, 0], x_2 = [0, *, 0].
pub fn zeroing_template(k: usize, order: &[usize]) -> Result<Vec<Vec<Slot>>> {
    check_permutation(order, k)?;
    Ok((1..k)
        .map(|i| {
            let mut row = vec![Slot::Free; k];
            for &u in &order[..i] {
                row[u] = Slot::Fixed(0.0);
            }
            row
        })
        .collect())
}

/// Default template: users zeroed one per segment in descending-power order.
pub fn default_template(cfg: &SystemConfig) -> Vec<Vec<Slot>> {
    let mut order: Vec<usize> = (0..cfg.k).collect();
    order.sort_by(|&a, &b| cfg.g[b].total_cmp(&cfg.g[a]).then(a.cmp(&b)));
    zeroing_template(cfg.k, &order).expect("order is a permutation")
}

struct Layout {
    k: usize,
    rows: usize,
    /// (row, coord) of every free slot, in row-major order.
    free: Vec<(usize, usize)>,
    fixed: Vec<Vec<Option<f64>>>,
}

impl Layout {
    fn new(template: &[Vec<Slot>], k: usize) -> Result<Self> {
        let mut free = Vec::new();
        let mut fixed = Vec::with_capacity(template.len());
        for (i, row) in template.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Shape(format!(
                    "template row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            let mut fr = Vec::with_capacity(k);
            for (c, s) in row.iter().enumerate() {
                match *s {
                    Slot::Free => {
                        free.push((i, c));
                        fr.push(None);
                    }
                    Slot::Fixed(v) => {
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::InvalidPath {
                                index: i + 1,
                                coord: c,
                                msg: format!("fixed value {v} outside [0,1]"),
                            });
                        }
                        fr.push(Some(v));
                    }
                }
            }
            fixed.push(fr);
        }
        Ok(Self {
            k,
            rows: template.len(),
            free,
            fixed,
        })
    }

    fn breakpoints(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let mut bps = Vec::with_capacity(self.rows + 2);
        bps.push(vec![1.0; self.k]);
        for r in &self.fixed {
            bps.push(r.iter().map(|x| x.unwrap_or(0.0)).collect());
        }
        bps.push(vec![0.0; self.k]);
        for (&(i, c), &x) in self.free.iter().zip(u) {
            bps[i + 1][c] = x;
        }
        bps
    }

    /// Box bounds of each free slot implied by fixed neighbours, then a pass that
    /// makes each column nonincreasing.
    fn project(&self, u: &mut [f64]) {
        let col_bounds = |i: usize, c: usize| {
            let upper = (0..i)
                .filter_map(|j| self.fixed[j][c])
                .fold(1.0f64, f64::min);
            let lower = (i + 1..self.rows)
                .filter_map(|j| self.fixed[j][c])
                .fold(0.0f64, f64::max);
            (lower, upper)
        };
        for (n, &(i, c)) in self.free.iter().enumerate() {
            let (lo, hi) = col_bounds(i, c);
            u[n] = u[n].clamp(lo, hi.max(lo));
        }
        for c in 0..self.k {
            let idx: Vec<usize> = (0..self.free.len())
                .filter(|&n| self.free[n].1 == c)
                .collect();
            for w in idx.windows(2) {
                if u[w[1]] > u[w[0]] {
                    let m = 0.5 * (u[w[0]] + u[w[1]]);
                    u[w[0]] = m;
                    u[w[1]] = m;
                }
            }
            // a second sweep settles chains longer than two
            for w in idx.windows(2) {
                if u[w[1]] > u[w[0]] {
                    u[w[1]] = u[w[0]];
                }
            }
        }
    }

    /// Deterministic start: each free coordinate linearly interpolated between the
    /// nearest known values in its column.
    fn interpolant(&self) -> Vec<f64> {
        let mut col: Vec<Vec<Option<f64>>> = vec![vec![None; self.rows + 2]; self.k];
        for c in 0..self.k {
            col[c][0] = Some(1.0);
            col[c][self.rows + 1] = Some(0.0);
            for i in 0..self.rows {
                col[c][i + 1] = self.fixed[i][c];
            }
        }
        let mut u: Vec<f64> = self
            .free
            .iter()
            .map(|&(i, c)| {
                let pos = i + 1;
                let (mut lo, mut hi) = (pos, pos);
                while col[c][lo].is_none() {
                    lo -= 1;
                }
                while col[c][hi].is_none() {
                    hi += 1;
                }
                let (a, b) = (col[c][lo].unwrap(), col[c][hi].unwrap());
                a + (b - a) * (pos - lo) as f64 / (hi - lo) as f64
            })
            .collect();
        self.project(&mut u);
        u
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut u: Vec<f64> = (0..self.free.len()).map(|_| rng.random::<f64>()).collect();
        // sort each column descending so the staircase is monotone before projection
        for c in 0..self.k {
            let idx: Vec<usize> = (0..self.free.len())
                .filter(|&n| self.free[n].1 == c)
                .collect();
            let mut vals: Vec<f64> = idx.iter().map(|&n| u[n]).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            for (&n, v) in idx.iter().zip(vals) {
                u[n] = v;
            }
        }
        self.project(&mut u);
        u
    }
}

fn residual(cfg: &SystemConfig, lay: &Layout, u: &[f64], target: &[f64]) -> Vec<f64> {
    let r = closed_form_rates(&cfg.g, cfg.noise_var, &lay.breakpoints(u));
    r.iter().zip(target).map(|(a, b)| a - b).collect()
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped minimum-norm Gauss-Newton from one start; returns (u, residual).
fn newton(
    cfg: &SystemConfig,
    lay: &Layout,
    mut u: Vec<f64>,
    target: &[f64],
    spec: &PathSolveSpec,
) -> (Vec<f64>, f64) {
    let m = u.len();
    let k = cfg.k;
    let mut r = residual(cfg, lay, &u, target);
    let mut norm = inf_norm(&r);
    // finer difference step once the coarse one stops making progress
    let mut h = 1e-7;
    for _ in 0..spec.max_iter {
        if norm <= spec.tol || m == 0 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(k, m);
        for j in 0..m {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += h;
            dn[j] -= h;
            let rp = residual(cfg, lay, &up, target);
            let rm = residual(cfg, lay, &dn, target);
            for i in 0..k {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let Ok(pinv) = svd.pseudo_inverse(smax * 1e-10) else {
            break;
        };
        let step = -(pinv * DVector::from_column_slice(&r));
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            let mut trial: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(x, s)| x + alpha * s)
                .collect();
            lay.project(&mut trial);
            let rt = residual(cfg, lay, &trial, target);
            let nt = inf_norm(&rt);
            if nt < norm {
                u = trial;
                r = rt;
                norm = nt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if h < 1e-9 {
                break;
            }
            h *= 1e-2;
        }
    }
    (u, norm)
}

/// Moves an interior target onto the dominant face by greedily raising each rate
/// (user order) by its smallest subset slack.
pub fn lift_to_dominant_face(cfg: &SystemConfig, target: &RateTuple) -> Result<RateTuple> {
    let mut r = target.clone();
    for k in 0..cfg.k {
        let rep = in_capacity_region(cfg, &r)?;
        let slack = rep
            .constraints
            .iter()
            .filter(|c| c.users.contains(&k))
            .map(|c| c.slack)
            .fold(f64::INFINITY, f64::min);
        r.rates[k] += slack.max(0.0);
    }
    Ok(r)
}

fn check_target(cfg: &SystemConfig, target: &RateTuple) -> Result<RegionReport> {
    let rep = in_capacity_region(cfg, target)?;
    if let Some(v) = rep.first_violation() {
        return Err(Error::OutsideRegion {
            constraint: v.label(),
        });
    }
    Ok(rep)
}

/// Finds a path whose Gaussian rates equal the target (after lifting interior
/// targets onto the dominant face).
pub fn solve_path_for_rates(cfg: &SystemConfig, spec: &PathSolveSpec) -> Result<MsePath> {
    if spec.target.rates.len() != cfg.k {
        return Err(Error::Shape(format!(
            "target has {} rates, expected K={}",
            spec.target.rates.len(),
            cfg.k
        )));
    }
    check_target(cfg, &spec.target)?;
    let target = lift_to_dominant_face(cfg, &spec.target)?;
    let lay = Layout::new(&spec.template, cfg.k)?;
    let free = lay.free.len();
    if free > 0 && free + 1 < cfg.k {
        return Err(Error::Template {
            free,
            need: cfg.k.saturating_sub(1),
        });
    }
    let starts = spec.max_starts.max(1);
    let attempt = |s: usize| -> (Vec<f64>, f64) {
        let u0 = if s == 0 {
            lay.interpolant()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(
                spec.seed ^ (s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            lay.random_start(&mut rng)
        };
        newton(cfg, &lay, u0, &target.rates, spec)
    };
    let found = (0..starts).into_par_iter().find_map_first(|s| {
        let (u, res) = attempt(s);
        (res <= spec.tol).then_some(u)
    });
    match found {
        Some(u) => build_path(&lay, &u),
        None => {
            let best = (0..starts)
                .into_par_iter()
                .map(|s| attempt(s).1)
                .reduce(|| f64::INFINITY, f64::min);
            Err(Error::SolverFailed { residual: best })
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Largest K for which [`solve_path_any_order`] enumerates every zeroing order.
pub const MAX_ORDER_SEARCH_K: usize = 6;

/// Tries the spec's template first, then every zeroing template in lexicographic
/// order of the permutation. A single zeroing order does not cover the whole
/// dominant face, so targets near other corners need a different staircase.
pub fn solve_path_any_order(cfg: &SystemConfig, spec: &PathSolveSpec) -> Result<MsePath> {
    let first = solve_path_for_rates(cfg, spec);
    let Err(Error::SolverFailed { residual }) = first else {
        return first;
    };
    if cfg.k > MAX_ORDER_SEARCH_K {
        return Err(Error::SolverFailed { residual });
    }
    let mut best = residual;
    for order in permutations(cfg.k) {
        let template = zeroing_template(cfg.k, &order)?;
        if template == spec.template {
            continue;
        }
        let attempt = PathSolveSpec {
            template,
            ..spec.clone()
        };
        match solve_path_for_rates(cfg, &attempt) {
            Ok(p) => return Ok(p),
            Err(Error::SolverFailed { residual }) => best = best.min(residual),
            Err(e) => return Err(e),
        }
    }
    Err(Error::SolverFailed { residual: best })
}

fn build_path(lay: &Layout, u: &[f64]) -> Result<MsePath> {
    MsePath::new(lay.breakpoints(u))
}

/// Equal-power virtual system obtained by splitting user i into L_i layers of power
/// `layer_power`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSplit {
    pub config: SystemConfig,
    pub path: MsePath,
    pub layers: Vec<usize>,
}

impl LayerSplit {
    /// Original user owning each virtual user.
    pub fn owner(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(u, &l)| std::iter::repeat_n(u, l))
            .collect()
    }

    /// Sum virtual-user values back onto the original users.
    pub fn aggregate(&self, per_layer: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.layers.len()];
        for (v, u) in per_layer.iter().zip(self.owner()) {
            out[u] += v;
        }
        out
    }
}

fn layer_count(g: f64, p: f64) -> Option<usize> {
    let l = g / p;
    let r = l.round();
    (r >= 1.0 && (l - r).abs() <= 1e-9 * r.max(1.0)).then_some(r as usize)
}

pub fn scm_layer_split(cfg: &SystemConfig, path: &MsePath, layer_power: f64) -> Result<LayerSplit> {
    if !(layer_power > 0.0 && layer_power.is_finite()) {
        return Err(Error::Domain(format!(
            "layer power {layer_power} must be positive"
        )));
    }
    if path.k() != cfg.k {
        return Err(Error::Shape("path dimension differs from K".into()));
    }
    let counts: Option<Vec<usize>> = cfg.g.iter().map(|&g| layer_count(g, layer_power)).collect();
    let Some(layers) = counts else {
        let gmin = cfg
            .g
            .iter()
            .copied()
            .filter(|&g| g > 0.0)
            .fold(f64::INFINITY, f64::min);
        let suggest = (1..=1000)
            .map(|q| gmin / q as f64)
            .find(|&p| cfg.g.iter().all(|&g| layer_count(g, p).is_some()))
            .unwrap_or(f64::NAN);
        return Err(Error::LayerSplit { suggest });
    };
    let total: usize = layers.iter().sum();
    let config = SystemConfig {
        k: total,
        g: vec![layer_power; total],
        ..cfg.clone()
    };
    let bps = path
        .breakpoints()
        .iter()
        .map(|x| {
            x.iter()
                .zip(&layers)
                .flat_map(|(&v, &l)| std::iter::repeat_n(v, l))
                .collect()
        })
        .collect();
    Ok(LayerSplit {
        config,
        path: MsePath::new(bps)?,
        layers,
    })
}
