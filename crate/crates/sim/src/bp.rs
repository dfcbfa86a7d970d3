//! Flooding sum-product decoder whose check-to-variable messages persist across
//! outer receiver iterations.

use crate::ldpc::LdpcCode;

/// Saturation for all LLRs passing through tanh/atanh.
pub const LLR_CLIP: f64 = 40.0;

#[inline]
pub fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

#[derive(Debug, Clone)]
pub struct BpDecoder {
    c2v: Vec<f64>,
    v2c: Vec<f64>,
    sum: Vec<f64>,
    /// Sum of incoming check messages per variable (extrinsic w.r.t. the channel).
    pub ext: Vec<f64>,
    /// Channel plus extrinsic.
    pub app: Vec<f64>,
}

impl BpDecoder {
    pub fn new(code: &LdpcCode) -> Self {
        Self {
            c2v: vec![0.0; code.n_edges()],
            v2c: vec![0.0; code.n_edges()],
            sum: vec![0.0; code.n],
            ext: vec![0.0; code.n],
            app: vec![0.0; code.n],
        }
    }

    pub fn reset(&mut self) {
        self.c2v.fill(0.0);
        self.ext.fill(0.0);
        self.app.fill(0.0);
    }

    /// `iters` flooding iterations with channel LLRs `lch`; updates `ext` and `app`.
    pub fn iterate(&mut self, code: &LdpcCode, lch: &[f64], iters: usize) {
        let mut prefix: Vec<f64> = Vec::new();
        for _ in 0..iters {
            self.sum.fill(0.0);
            for (e, &v) in code.edge_var.iter().enumerate() {
                self.sum[v as usize] += self.c2v[e];
            }
            for (e, &v) in code.edge_var.iter().enumerate() {
                let v = v as usize;
                self.v2c[e] = clip(lch[v] + self.sum[v] - self.c2v[e]);
            }
            for c in 0..code.m {
                let (a, b) = (code.chk_ptr[c] as usize, code.chk_ptr[c + 1] as usize);
                prefix.clear();
                let mut p = 1.0;
                for e in a..b {
                    prefix.push(p);
                    p *= (0.5 * self.v2c[e]).tanh();
                }
                let mut s = 1.0;
                for e in (a..b).rev() {
                    let t = (prefix[e - a] * s).clamp(-1.0, 1.0);
                    self.c2v[e] = clip(2.0 * t.atanh());
                    s *= (0.5 * self.v2c[e]).tanh();
                }
            }
        }
        self.ext.fill(0.0);
        for (e, &v) in code.edge_var.iter().enumerate() {
            self.ext[v as usize] += self.c2v[e];
        }
        for ((a, &x), &l) in self.app.iter_mut().zip(&self.ext).zip(lch) {
            *a = l + x;
        }
    }

    /// Variable-to-check messages of the last iteration, indexed by edge.
    pub fn v2c(&self) -> &[f64] {
        &self.v2c
    }

    pub fn hard_decision(&self) -> Vec<u8> {
        self.app.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}
