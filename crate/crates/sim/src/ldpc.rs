//! Random LDPC ensembles from degree profiles, 4-cycle removal, and a greedy
//! approximate-lower-triangular encoder.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use idma_core::codedesign::DegreeProfile;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::rng::{stream, Role, CHANNEL};

/// Parity-check structure in compressed form. Edges are numbered check-major:
/// the edges of check `c` are `chk_ptr[c]..chk_ptr[c + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpcCode {
    pub n: usize,
    pub m: usize,
    pub chk_ptr: Vec<u32>,
    /// Variable node of each edge.
    pub edge_var: Vec<u32>,
    pub var_ptr: Vec<u32>,
    /// Edge ids grouped by variable node.
    pub var_edges: Vec<u32>,
    pub encoder: Encoder,
}

/// Greedy triangular encoder. `pivots` determine one column from one row each, in
/// order; `gap_rows` solve the remaining columns densely from the info bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub pivots: Vec<(u32, u32)>,
    pub info_cols: Vec<u32>,
    /// Each entry: the gap column it determines and the info positions (indices
    /// into `info_cols`) whose XOR gives it.
    pub gap_rows: Vec<(u32, Vec<u32>)>,
    pub rank: usize,
}

impl LdpcCode {
    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn k(&self) -> usize {
        self.encoder.info_cols.len()
    }

    /// Realised rate (n - rank) / n.
    pub fn rate(&self) -> f64 {
        (self.n - self.encoder.rank) as f64 / self.n as f64
    }

    /// Nominal rate 1 - m / n.
    pub fn nominal_rate(&self) -> f64 {
        1.0 - self.m as f64 / self.n as f64
    }

    pub fn check_vars(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (a, b) = (self.chk_ptr[c] as usize, self.chk_ptr[c + 1] as usize);
        self.edge_var[a..b].iter().map(|&v| v as usize)
    }

    pub fn var_degree(&self, v: usize) -> usize {
        (self.var_ptr[v + 1] - self.var_ptr[v]) as usize
    }

    pub fn check_degree(&self, c: usize) -> usize {
        (self.chk_ptr[c + 1] - self.chk_ptr[c]) as usize
    }

    /// Variable-node degree histogram.
    pub fn var_degree_counts(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for v in 0..self.n {
            *h.entry(self.var_degree(v)).or_insert(0) += 1;
        }
        h
    }

    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        (0..self.m).all(|c| self.check_vars(c).fold(0u8, |s, v| s ^ bits[v]) == 0)
    }

    /// Number of 4-cycles (pairs of variables sharing two checks, counted once per
    /// extra shared check) plus repeated edges.
    pub fn count_four_cycles(&self) -> usize {
        let edges: Vec<(u32, u32)> = (0..self.m)
            .flat_map(|c| self.check_vars(c).map(move |v| (v as u32, c as u32)))
            .collect();
        bad_edges(&edges, self.m).len()
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        let enc = &self.encoder;
        if info.len() != enc.info_cols.len() {
            return Err(SimError::InfoLength {
                got: info.len(),
                want: enc.info_cols.len(),
            });
        }
        let mut x = vec![0u8; self.n];
        for (&c, &b) in enc.info_cols.iter().zip(info) {
            x[c as usize] = b & 1;
        }
        for (col, deps) in &enc.gap_rows {
            x[*col as usize] = deps.iter().fold(0u8, |s, &i| s ^ info[i as usize]) & 1;
        }
        for &(r, c) in &enc.pivots {
            let (r, c) = (r as usize, c as usize);
            x[c] = self
                .check_vars(r)
                .filter(|&v| v != c)
                .fold(0u8, |s, v| s ^ x[v]);
        }
        Ok(x)
    }

    /// Info bits back out of a codeword.
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.encoder
            .info_cols
            .iter()
            .map(|&c| codeword[c as usize])
            .collect()
    }
}

/// Largest-remainder rounding of `total * fractions` to integers summing to `total`.
fn apportion(fractions: &[(usize, f64)], total: usize) -> Vec<(usize, usize)> {
    let raw: Vec<f64> = fractions.iter().map(|&(_, f)| f * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut left = total.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(raw.len() * 2) {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    fractions.iter().map(|&(d, _)| d).zip(counts).collect()
}

/// Edges that sit on a repeated (var, check) pair or on a 4-cycle; one edge per defect.
fn bad_edges(edges: &[(u32, u32)], m: usize) -> Vec<usize> {
    let mut by_check: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (e, &(_, c)) in edges.iter().enumerate() {
        by_check[c as usize].push(e);
    }
    let mut bad = Vec::new();
    let mut pairs: HashMap<(u32, u32), u32> = HashMap::new();
    for (c, es) in by_check.iter().enumerate() {
        for (i, &a) in es.iter().enumerate() {
            for &b in &es[i + 1..] {
                let (va, vb) = (edges[a].0, edges[b].0);
                if va == vb {
                    bad.push(b);
                    continue;
                }
                let key = (va.min(vb), va.max(vb));
                if let Some(&other) = pairs.get(&key) {
                    if other != c as u32 {
                        bad.push(a);
                    }
                } else {
                    pairs.insert(key, c as u32);
                }
            }
        }
    }
    bad.sort_unstable();
    bad.dedup();
    bad
}

/// Random code from `profile` with `n` variable nodes: configuration-model edges,
/// 4-cycle removal by random check-endpoint swaps (budget 100 |E|), then encoder
/// construction.
pub fn build_ldpc(profile: &DegreeProfile, n: usize, seed: u64) -> Result<LdpcCode> {
    profile.validate()?;
    if n < 4 {
        return Err(SimError::Realise {
            n,
            msg: "n too small".into(),
        });
    }
    let var_frac: Vec<(usize, f64)> = profile.node_fractions().into_iter().collect();
    let var_counts = apportion(&var_frac, n);
    let n_edges: usize = var_counts.iter().map(|(d, c)| d * c).sum();
    let chk_frac: Vec<(usize, f64)> = profile.check_node_fractions().into_iter().collect();
    let mean_dc: f64 = chk_frac.iter().map(|(d, f)| *d as f64 * f).sum();
    let m = ((n_edges as f64 / mean_dc).round() as usize).max(1);
    if m >= n {
        return Err(SimError::Realise {
            n,
            msg: format!("{m} checks for {n} variables"),
        });
    }
    let chk_counts = apportion(&chk_frac, m);
    let mut chk_deg: Vec<usize> = chk_counts
        .iter()
        .flat_map(|&(d, c)| std::iter::repeat_n(d, c))
        .collect();
    // spread the socket mismatch one edge at a time over the checks; if no check can
    // shrink, drop a whole check and redistribute its sockets
    let mut diff = n_edges as i64 - chk_deg.iter().sum::<usize>() as i64;
    let mut i = 0;
    while diff != 0 {
        if diff > 0 {
            let c = i % chk_deg.len();
            chk_deg[c] += 1;
            diff -= 1;
            i += 1;
        } else if let Some(c) = (0..chk_deg.len())
            .map(|j| (i + j) % chk_deg.len())
            .find(|&c| chk_deg[c] > 2)
        {
            chk_deg[c] -= 1;
            diff += 1;
            i = c + 1;
        } else {
            let d = chk_deg.pop().expect("at least one check");
            diff += d as i64;
            if chk_deg.is_empty() {
                return Err(SimError::Realise {
                    n,
                    msg: "cannot match edge counts".into(),
                });
            }
        }
    }
    let m = chk_deg.len();

    let mut rng = stream(seed, CHANNEL, 0, Role::Graph);
    let var_sockets: Vec<u32> = {
        let mut v = 0u32;
        let mut out = Vec::with_capacity(n_edges);
        for &(d, c) in &var_counts {
            for _ in 0..c {
                out.extend(std::iter::repeat_n(v, d));
                v += 1;
            }
        }
        out
    };
    let mut chk_sockets: Vec<u32> = chk_deg
        .iter()
        .enumerate()
        .flat_map(|(c, &d)| std::iter::repeat_n(c as u32, d))
        .collect();
    chk_sockets.shuffle(&mut rng);
    let mut edges: Vec<(u32, u32)> = var_sockets.into_iter().zip(chk_sockets).collect();

    let budget = 100 * n_edges;
    let mut swaps = 0;
    loop {
        let bad = bad_edges(&edges, m);
        if bad.is_empty() {
            break;
        }
        if swaps >= budget {
            return Err(SimError::Cycles {
                remaining: bad.len(),
                swaps,
                suggest_n: 2 * n,
            });
        }
        for e in bad {
            let f = rng.random_range(0..n_edges);
            if f != e {
                let (ce, cf) = (edges[e].1, edges[f].1);
                edges[e].1 = cf;
                edges[f].1 = ce;
            }
            swaps += 1;
        }
    }

    edges.sort_unstable_by_key(|&(v, c)| (c, v));
    let mut chk_ptr = vec![0u32; m + 1];
    for &(_, c) in &edges {
        chk_ptr[c as usize + 1] += 1;
    }
    for c in 0..m {
        chk_ptr[c + 1] += chk_ptr[c];
    }
    let edge_var: Vec<u32> = edges.iter().map(|&(v, _)| v).collect();
    let mut var_ptr = vec![0u32; n + 1];
    for &v in &edge_var {
        var_ptr[v as usize + 1] += 1;
    }
    for v in 0..n {
        var_ptr[v + 1] += var_ptr[v];
    }
    let mut fill = var_ptr.clone();
    let mut var_edges = vec![0u32; n_edges];
    for (e, &v) in edge_var.iter().enumerate() {
        var_edges[fill[v as usize] as usize] = e as u32;
        fill[v as usize] += 1;
    }
    let mut code = LdpcCode {
        n,
        m,
        chk_ptr,
        edge_var,
        var_ptr,
        var_edges,
        encoder: Encoder {
            pivots: Vec::new(),
            info_cols: Vec::new(),
            gap_rows: Vec::new(),
            rank: 0,
        },
    };
    code.encoder = build_encoder(&code);
    Ok(code)
}

fn var_checks(code: &LdpcCode, v: usize) -> impl Iterator<Item = usize> + '_ {
    let (a, b) = (code.var_ptr[v] as usize, code.var_ptr[v + 1] as usize);
    code.var_edges[a..b].iter().map(move |&e| {
        // edges are check-major, so locate the check by binary search
        code.chk_ptr.partition_point(|&p| p <= e) - 1
    })
}

/// Greedy triangularisation: peel rows with one unknown column; when stuck, reveal
/// all but one unknown column of a minimum-degree row. Rows left without a pivot
/// become a small dense system over the revealed columns.
fn build_encoder(code: &LdpcCode) -> Encoder {
    let (n, m) = (code.n, code.m);
    let checks_of: Vec<Vec<usize>> = (0..n).map(|v| var_checks(code, v).collect()).collect();
    let mut known = vec![false; n];
    let mut revealed = vec![false; n];
    let mut rdeg: Vec<usize> = (0..m).map(|c| code.check_degree(c)).collect();
    let mut active = vec![true; m];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..m).map(|c| Reverse((rdeg[c], c))).collect();
    let mut pivots: Vec<(u32, u32)> = Vec::new();

    let mark_known = |v: usize,
                      known: &mut Vec<bool>,
                      rdeg: &mut Vec<usize>,
                      heap: &mut BinaryHeap<Reverse<(usize, usize)>>,
                      active: &[bool]| {
        known[v] = true;
        for &c in &checks_of[v] {
            rdeg[c] -= 1;
            if active[c] {
                heap.push(Reverse((rdeg[c], c)));
            }
        }
    };

    while let Some(Reverse((d, c))) = heap.pop() {
        if !active[c] || d != rdeg[c] {
            continue;
        }
        if d == 0 {
            // every column already fixed: becomes a dense equation
            continue;
        }
        let unknown: Vec<usize> = code.check_vars(c).filter(|&v| !known[v]).collect();
        for &v in &unknown[..unknown.len() - 1] {
            revealed[v] = true;
            mark_known(v, &mut known, &mut rdeg, &mut heap, &active);
        }
        let p = *unknown.last().expect("degree >= 1");
        active[c] = false;
        pivots.push((c as u32, p as u32));
        mark_known(p, &mut known, &mut rdeg, &mut heap, &active);
    }
    for v in 0..n {
        if !known[v] {
            revealed[v] = true;
            known[v] = true;
        }
    }

    // leftover rows expressed over revealed columns only
    let rev_cols: Vec<usize> = (0..n).filter(|&v| revealed[v]).collect();
    let mut rev_index = vec![u32::MAX; n];
    for (i, &v) in rev_cols.iter().enumerate() {
        rev_index[v] = i as u32;
    }
    let leftover: Vec<usize> = (0..m).filter(|&c| active[c]).collect();
    let words = n.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = leftover
        .iter()
        .map(|&c| {
            let mut b = vec![0u64; words];
            for v in code.check_vars(c) {
                b[v / 64] ^= 1 << (v % 64);
            }
            b
        })
        .collect();
    for &(r, p) in pivots.iter().rev() {
        let p = p as usize;
        for b in rows.iter_mut() {
            if b[p / 64] >> (p % 64) & 1 == 1 {
                for v in code.check_vars(r as usize) {
                    b[v / 64] ^= 1 << (v % 64);
                }
            }
        }
    }
    let rw = rev_cols.len().div_ceil(64);
    let mut dense: Vec<Vec<u64>> = rows
        .iter()
        .map(|b| {
            let mut d = vec![0u64; rw.max(1)];
            for (w, &word) in b.iter().enumerate() {
                let mut x = word;
                while x != 0 {
                    let t = x.trailing_zeros() as usize;
                    let v = w * 64 + t;
                    let i = rev_index[v] as usize;
                    debug_assert!(i != u32::MAX as usize, "non-revealed column survived");
                    d[i / 64] |= 1 << (i % 64);
                    x &= x - 1;
                }
            }
            d
        })
        .collect();
    // reduced row echelon form over GF(2)
    let mut pivot_of_row: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..rev_cols.len() {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(sel) = (r..dense.len()).find(|&i| dense[i][w] & bit != 0) else {
            continue;
        };
        dense.swap(r, sel);
        let pivot_row = dense[r].clone();
        for (i, row) in dense.iter_mut().enumerate() {
            if i != r && row[w] & bit != 0 {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
        pivot_of_row.push(col);
        r += 1;
        if r == dense.len() {
            break;
        }
    }
    let mut is_gap = vec![false; rev_cols.len()];
    for &c in &pivot_of_row {
        is_gap[c] = true;
    }
    let info_rev: Vec<usize> = (0..rev_cols.len()).filter(|&i| !is_gap[i]).collect();
    let mut info_pos = vec![u32::MAX; rev_cols.len()];
    for (j, &i) in info_rev.iter().enumerate() {
        info_pos[i] = j as u32;
    }
    let gap_rows: Vec<(u32, Vec<u32>)> = pivot_of_row
        .iter()
        .enumerate()
        .map(|(row, &gc)| {
            let deps: Vec<u32> = info_rev
                .iter()
                .filter(|&&i| dense[row][i / 64] >> (i % 64) & 1 == 1)
                .map(|&i| info_pos[i])
                .collect();
            (rev_cols[gc] as u32, deps)
        })
        .collect();
    Encoder {
        rank: pivots.len() + gap_rows.len(),
        pivots,
        info_cols: info_rev.iter().map(|&i| rev_cols[i] as u32).collect(),
        gap_rows,
    }
}
