//! Iterative ESE + BP receiver over the real-valued per-dimension AWGN MAC.
//!
//! Each coded bit occupies one real dimension. QPSK carries two bits per complex
//! symbol, so a user of power g has per-dimension amplitude sqrt(g/2) and the noise
//! per dimension is sigma^2/2; BPSK uses a real channel with amplitude sqrt(g) and
//! noise sigma^2. In both cases the ESE SNR is g / (sigma^2 + sum_{j != k} g_j v_j),
//! and the demapped LLR has mean 2 rho and variance 4 rho under the Gaussian model.

use idma_core::pathfinder::LayerSplit;
use idma_core::{Modulation, SystemConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{clip, BpDecoder};
use crate::error::{Result, SimError};
use crate::ldpc::LdpcCode;
use crate::rng::{stream, Role, CHANNEL};
use crate::stats::{wilson, Moments, Z95};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub max_outer: usize,
    /// Flooding BP iterations per outer iteration.
    pub bp_iters: usize,
    /// Feed frame-averaged instead of per-symbol variances to the ESE.
    pub frame_averaged: bool,
    pub block_budget: usize,
    /// Stop once this many bit errors (summed over users) are seen; 0 runs the full budget.
    pub target_errors: u64,
    pub seed: u64,
    /// Blocks simulated between stopping checks; fixed so results do not depend on thread count.
    pub batch: usize,
    pub record_trajectory: bool,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            max_outer: 1000,
            bp_iters: 1,
            frame_averaged: false,
            block_budget: 100,
            target_errors: 100,
            seed: 0,
            batch: 8,
            record_trajectory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStats {
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub frames: u64,
    pub ber: f64,
    pub fer: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl UserStats {
    fn new(bit_errors: u64, bits: u64, frame_errors: u64, frames: u64) -> Self {
        let (ci_lo, ci_hi) = wilson(bit_errors, bits, Z95);
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            bit_errors,
            bits,
            frame_errors,
            frames,
            ber: ratio(bit_errors, bits),
            fer: ratio(frame_errors, frames),
            ci_lo,
            ci_hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRun {
    pub snr_db: f64,
    pub users: Vec<UserStats>,
    pub blocks: usize,
    /// Outer iterations used by each block.
    pub outer_used: Vec<usize>,
    /// Per block, per user frame-error flags.
    pub frame_flags: Vec<Vec<bool>>,
    /// Block-averaged mean soft-symbol variance, `trajectory[t][k]`, t = 0 is the start.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

impl LinkRun {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("snr_db,user,ber,fer,blocks,ci_lo,ci_hi\n");
        for (k, u) in self.users.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{:e},{:e},{},{:e},{:e}\n",
                self.snr_db,
                k + 1,
                u.ber,
                u.fer,
                self.blocks,
                u.ci_lo,
                u.ci_hi
            ));
        }
        s
    }

    pub fn trajectory_csv(&self) -> Option<String> {
        let tr = self.trajectory.as_ref()?;
        let k = tr.first().map_or(0, Vec::len);
        let mut s = String::from("iter");
        for u in 1..=k {
            s.push_str(&format!(",v_{u}"));
        }
        s.push('\n');
        for (t, row) in tr.iter().enumerate() {
            s.push_str(&t.to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        Some(s)
    }
}

/// Per-dimension amplitudes and noise variance.
pub fn dimension_model(cfg: &SystemConfig) -> Result<(Vec<f64>, f64)> {
    let a = match cfg.modulation {
        Modulation::Qpsk => 0.5,
        Modulation::Bpsk => 1.0,
        Modulation::Gaussian => {
            return Err(SimError::Unsupported(
                "link simulation needs a discrete constellation".into(),
            ))
        }
    };
    Ok((
        cfg.g.iter().map(|&g| (g * a).sqrt()).collect(),
        cfg.noise_var * a,
    ))
}

/// ESE demapper using the shared sums mu = sum amp m and V = noise + sum amp^2 v.
/// `means[k][j]`, `vars[k][j]` are user k's soft estimate and variance on chip j.
pub fn ese_llrs(
    y: &[f64],
    amps: &[f64],
    means: &[Vec<f64>],
    vars: &[Vec<f64>],
    noise: f64,
) -> Vec<Vec<f64>> {
    let n = y.len();
    let mut mu = vec![0.0; n];
    let mut tot = vec![noise; n];
    for (k, &a) in amps.iter().enumerate() {
        for j in 0..n {
            mu[j] += a * means[k][j];
            tot[j] += a * a * vars[k][j];
        }
    }
    amps.iter()
        .enumerate()
        .map(|(k, &a)| {
            (0..n)
                .map(|j| {
                    let r = y[j] - mu[j] + a * means[k][j];
                    let v = tot[j] - a * a * vars[k][j];
                    clip(2.0 * a * r / v)
                })
                .collect()
        })
        .collect()
}

/// Direct O(K) per-user recomputation of [`ese_llrs`], for testing.
pub fn ese_llrs_naive(
    y: &[f64],
    amps: &[f64],
    means: &[Vec<f64>],
    vars: &[Vec<f64>],
    noise: f64,
) -> Vec<Vec<f64>> {
    let n = y.len();
    (0..amps.len())
        .map(|k| {
            (0..n)
                .map(|j| {
                    let mut r = y[j];
                    let mut v = noise;
                    for (i, &a) in amps.iter().enumerate() {
                        if i != k {
                            r -= a * means[i][j];
                            v += a * a * vars[i][j];
                        }
                    }
                    clip(2.0 * amps[k] * r / v)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistSpec {
    pub user: usize,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    /// Outer iterations captured; blocks always run this many without early stopping.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlrHistogram {
    pub iteration: usize,
    pub bin_centers: Vec<f64>,
    pub counts: Vec<u64>,
    pub moments: Moments,
}

impl LlrHistogram {
    pub fn bin_width(&self) -> f64 {
        if self.bin_centers.len() < 2 {
            return 1.0;
        }
        self.bin_centers[1] - self.bin_centers[0]
    }

    pub fn densities(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        let w = self.bin_width();
        self.counts
            .iter()
            .map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / (total as f64 * w)
                }
            })
            .collect()
    }
}

pub fn histograms_csv(hs: &[LlrHistogram]) -> String {
    let mut s = String::from("iter,bin_center,density\n");
    for h in hs {
        for (c, d) in h.bin_centers.iter().zip(h.densities()) {
            s.push_str(&format!("{},{},{}\n", h.iteration, c, d));
        }
    }
    s
}

struct BlockOut {
    bit_errors: Vec<u64>,
    bits: Vec<u64>,
    frame_err: Vec<bool>,
    outer: usize,
    trajectory: Vec<Vec<f64>>,
    /// Per iteration, +1-conditioned variable-to-check LLRs of the user under test.
    samples: Vec<Vec<f64>>,
}

fn check_codes(cfg: &SystemConfig, codes: &[LdpcCode]) -> Result<usize> {
    if codes.len() != cfg.k {
        return Err(SimError::Shape(format!(
            "{} codes for K={}",
            codes.len(),
            cfg.k
        )));
    }
    let n = codes[0].n;
    if codes.iter().any(|c| c.n != n) {
        return Err(SimError::Shape(
            "all codes must share the frame length".into(),
        ));
    }
    Ok(n)
}

fn run_block(
    cfg: &SystemConfig,
    codes: &[LdpcCode],
    params: &LinkParams,
    hist: Option<&HistSpec>,
    block: u64,
) -> Result<BlockOut> {
    let k = cfg.k;
    let n = codes[0].n;
    let (amps, noise) = dimension_model(cfg)?;
    let mut infos = Vec::with_capacity(k);
    let mut cws = Vec::with_capacity(k);
    let mut perms = Vec::with_capacity(k);
    for (u, code) in codes.iter().enumerate() {
        let mut rng = stream(params.seed, u as u64, block, Role::Data);
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
        cws.push(code.encode(&info)?);
        infos.push(info);
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(&mut stream(params.seed, u as u64, block, Role::Interleaver));
        perms.push(perm);
    }
    let mut nrng = stream(params.seed, CHANNEL, block, Role::Noise);
    let sd = noise.sqrt();
    let y: Vec<f64> = (0..n)
        .map(|j| {
            let s: f64 = (0..k)
                .map(|u| amps[u] * (1.0 - 2.0 * cws[u][perms[u][j] as usize] as f64))
                .sum();
            let z: f64 = StandardNormal.sample(&mut nrng);
            s + sd * z
        })
        .collect();

    let mut decs: Vec<BpDecoder> = codes.iter().map(BpDecoder::new).collect();
    let mut means = vec![vec![0.0; n]; k];
    let mut vars = vec![vec![1.0; n]; k];
    let mut lch = vec![vec![0.0; n]; k];
    let mut trajectory = vec![vec![1.0; k]];
    let mut samples = Vec::new();
    let fixed = hist.map(|h| h.iterations);
    let max_outer = fixed.unwrap_or(params.max_outer);
    let mut outer = 0;
    while outer < max_outer {
        outer += 1;
        let chips = ese_llrs(&y, &amps, &means, &vars, noise);
        for u in 0..k {
            for (j, &p) in perms[u].iter().enumerate() {
                lch[u][p as usize] = chips[u][j];
            }
        }
        decs.par_iter_mut()
            .zip(codes.par_iter())
            .zip(lch.par_iter())
            .for_each(|((d, c), l)| d.iterate(c, l, params.bp_iters));
        let mut row = Vec::with_capacity(k);
        for u in 0..k {
            let mut acc = 0.0;
            for (j, &p) in perms[u].iter().enumerate() {
                let m = (0.5 * decs[u].ext[p as usize]).tanh();
                means[u][j] = m;
                vars[u][j] = 1.0 - m * m;
                acc += vars[u][j];
            }
            let avg = acc / n as f64;
            if params.frame_averaged {
                vars[u].fill(avg);
            }
            row.push(avg);
        }
        trajectory.push(row);
        if let Some(h) = hist {
            let cw = &cws[h.user];
            let s: Vec<f64> = decs[h.user]
                .v2c()
                .iter()
                .zip(&codes[h.user].edge_var)
                .filter(|(_, &v)| cw[v as usize] == 0)
                .map(|(&l, _)| l)
                .collect();
            samples.push(s);
        }
        if fixed.is_none()
            && decs
                .iter()
                .zip(codes)
                .all(|(d, c)| c.syndrome_ok(&d.hard_decision()))
        {
            break;
        }
    }
    let mut bit_errors = Vec::with_capacity(k);
    let mut frame_err = Vec::with_capacity(k);
    for u in 0..k {
        let est = codes[u].extract_info(&decs[u].hard_decision());
        let e = est.iter().zip(&infos[u]).filter(|(a, b)| a != b).count() as u64;
        bit_errors.push(e);
        frame_err.push(e > 0);
    }
    Ok(BlockOut {
        bit_errors,
        bits: codes.iter().map(|c| c.k() as u64).collect(),
        frame_err,
        outer,
        trajectory,
        samples,
    })
}

fn run_blocks(
    cfg: &SystemConfig,
    codes: &[LdpcCode],
    params: &LinkParams,
    hist: Option<&HistSpec>,
) -> Result<Vec<BlockOut>> {
    check_codes(cfg, codes)?;
    dimension_model(cfg)?;
    if params.max_outer == 0 || params.bp_iters == 0 || params.block_budget == 0 {
        return Err(SimError::Shape(
            "max_outer, bp_iters and block_budget must be positive".into(),
        ));
    }
    let batch = params.batch.max(1);
    let mut out: Vec<BlockOut> = Vec::new();
    let mut errors = 0u64;
    while out.len() < params.block_budget {
        let start = out.len();
        let end = (start + batch).min(params.block_budget);
        let res: Result<Vec<BlockOut>> = (start..end)
            .into_par_iter()
            .map(|b| run_block(cfg, codes, params, hist, b as u64))
            .collect();
        for b in res? {
            errors += b.bit_errors.iter().sum::<u64>();
            out.push(b);
        }
        if params.target_errors > 0 && errors >= params.target_errors {
            break;
        }
    }
    Ok(out)
}

fn summarise(cfg: &SystemConfig, params: &LinkParams, blocks: Vec<BlockOut>) -> LinkRun {
    let k = cfg.k;
    let users = (0..k)
        .map(|u| {
            let be = blocks.iter().map(|b| b.bit_errors[u]).sum();
            let bits = blocks.iter().map(|b| b.bits[u]).sum();
            let fe = blocks.iter().filter(|b| b.frame_err[u]).count() as u64;
            UserStats::new(be, bits, fe, blocks.len() as u64)
        })
        .collect();
    let trajectory = params.record_trajectory.then(|| {
        let len = blocks.iter().map(|b| b.trajectory.len()).max().unwrap_or(1);
        let mut avg = vec![vec![0.0; k]; len];
        for b in &blocks {
            for (t, row) in avg.iter_mut().enumerate() {
                let src = &b.trajectory[t.min(b.trajectory.len() - 1)];
                for (a, s) in row.iter_mut().zip(src) {
                    *a += s / blocks.len() as f64;
                }
            }
        }
        avg
    });
    LinkRun {
        snr_db: 10.0 * (cfg.g_total() / cfg.noise_var).log10(),
        users,
        blocks: blocks.len(),
        outer_used: blocks.iter().map(|b| b.outer).collect(),
        frame_flags: blocks.iter().map(|b| b.frame_err.clone()).collect(),
        trajectory,
    }
}

/// Simulate blocks at the noise level in `cfg` until the error target or block budget.
pub fn run_link(cfg: &SystemConfig, codes: &[LdpcCode], params: &LinkParams) -> Result<LinkRun> {
    let blocks = run_blocks(cfg, codes, params, None)?;
    Ok(summarise(cfg, params, blocks))
}

/// Per-outer-iteration histograms of the variable-node output (variable-to-check)
/// LLRs of `spec.user`, one sample per edge, conditioned on transmitted +1 (bit 0). Runs `block_budget` blocks of exactly
/// `spec.iterations` outer iterations each.
pub fn capture_llr_histograms(
    cfg: &SystemConfig,
    codes: &[LdpcCode],
    params: &LinkParams,
    spec: &HistSpec,
) -> Result<Vec<LlrHistogram>> {
    if spec.user >= cfg.k || spec.bins == 0 || spec.iterations == 0 || !(spec.hi > spec.lo) {
        return Err(SimError::Shape("bad histogram spec".into()));
    }
    let p = LinkParams {
        target_errors: 0,
        ..params.clone()
    };
    let blocks = run_blocks(cfg, codes, &p, Some(spec))?;
    let w = (spec.hi - spec.lo) / spec.bins as f64;
    let centers: Vec<f64> = (0..spec.bins)
        .map(|i| spec.lo + (i as f64 + 0.5) * w)
        .collect();
    Ok((0..spec.iterations)
        .map(|t| {
            let all: Vec<f64> = blocks
                .iter()
                .flat_map(|b| b.samples[t].iter().copied())
                .collect();
            let mut counts = vec![0u64; spec.bins];
            for &x in &all {
                let i = ((x - spec.lo) / w).floor();
                if i >= 0.0 && (i as usize) < spec.bins {
                    counts[i as usize] += 1;
                } else if x == spec.hi {
                    counts[spec.bins - 1] += 1;
                }
            }
            LlrHistogram {
                iteration: t + 1,
                bin_centers: centers.clone(),
                counts,
                moments: Moments::of(&all),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmRun {
    /// Statistics over the virtual (layer) users.
    pub layers: LinkRun,
    /// Statistics aggregated onto the original users.
    pub users: Vec<UserStats>,
}

/// Link simulation over the equal-power virtual users of a layer split; one code per layer.
pub fn run_scm_link(split: &LayerSplit, codes: &[LdpcCode], params: &LinkParams) -> Result<ScmRun> {
    let layers = run_link(&split.config, codes, params)?;
    let owner = split.owner();
    let users = (0..split.layers.len())
        .map(|u| {
            let mine: Vec<usize> = (0..owner.len()).filter(|&l| owner[l] == u).collect();
            let be = mine.iter().map(|&l| layers.users[l].bit_errors).sum();
            let bits = mine.iter().map(|&l| layers.users[l].bits).sum();
            let fe = layers
                .frame_flags
                .iter()
                .filter(|f| mine.iter().any(|&l| f[l]))
                .count() as u64;
            UserStats::new(be, bits, fe, layers.blocks as u64)
        })
        .collect();
    Ok(ScmRun { layers, users })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_llr_scaling() {
        // single user, no interference: LLR = 2 amp y / noise = 4 sqrt(g/2) y / sigma^2
        let cfg = SystemConfig::new(vec![2.0], 0.5).unwrap();
        let (amps, noise) = dimension_model(&cfg).unwrap();
        assert_eq!(amps, vec![1.0]);
        assert_eq!(noise, 0.25);
        let l = ese_llrs(&[0.5], &amps, &[vec![0.0]], &[vec![1.0]], noise);
        assert_eq!(l[0][0], 4.0);
    }

    #[test]
    fn gaussian_is_unsupported() {
        let cfg = SystemConfig::new(vec![1.0], 1.0)
            .unwrap()
            .with_modulation(Modulation::Gaussian);
        assert!(matches!(
            dimension_model(&cfg),
            Err(SimError::Unsupported(_))
        ));
    }
}
