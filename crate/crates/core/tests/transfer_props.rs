use idma_core::transfer::{
    dec_target, ese_snr, ese_transfer_on_path, mimo_lmmse_snr, sic_thresholds, snr_bounds, EsePiece,
};
use idma_core::{MimoConfig, MsePath, SystemConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn three_user_cfg() -> SystemConfig {
    SystemConfig::new(vec![1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0], 1.0).unwrap()
}

fn naive_snr(g: &[f64], noise: f64, v: &[f64]) -> Vec<f64> {
    (0..g.len())
        .map(|k| {
            let mut d = noise;
            for i in 0..g.len() {
                if i != k {
                    d += g[i] * v[i];
                }
            }
            g[k] / d
        })
        .collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1.0))
}

#[test]
fn ese_snr_examples() {
    let cfg = three_user_cfg();
    let r = ese_snr(&cfg, &[1.0; 3]).unwrap();
    assert!(close(&r, &[1.0 / 13.0, 2.0 / 12.0, 4.0 / 10.0], 1e-14));
    let r = ese_snr(&cfg, &[0.0; 3]).unwrap();
    assert!(close(&r, &[1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0], 1e-14));
    let v = [0.5, 0.2, 0.2];
    let r = ese_snr(&cfg, &v).unwrap();
    let want = (1.0 / 7.0) / (1.0 + 0.2 * 2.0 / 7.0 + 0.2 * 4.0 / 7.0);
    assert!((r[0] - want).abs() < 1e-15);
    assert!(close(&r, &naive_snr(&cfg.g, 1.0, &v), 1e-14));
    assert!(ese_snr(&cfg, &[1.2, 0.0, 0.0]).is_err());
}

#[test]
fn snr_bound_examples() {
    let cfg = three_user_cfg();
    let (lo, hi) = snr_bounds(&cfg, 0).unwrap();
    assert!((lo - 1.0 / 13.0).abs() < 1e-15 && (hi - 1.0 / 7.0).abs() < 1e-15);
    let (lo, hi) = snr_bounds(&cfg, 2).unwrap();
    assert!((lo - 0.4).abs() < 1e-15 && (hi - 4.0 / 7.0).abs() < 1e-15);
    let one = SystemConfig::new(vec![2.0], 0.5).unwrap();
    assert_eq!(snr_bounds(&one, 0).unwrap(), (4.0, 4.0));
    assert!(snr_bounds(&cfg, 3).is_err());
}

#[test]
fn straight_line_transfer_is_single_slope() {
    let cfg = three_user_cfg();
    let path = MsePath::new(vec![vec![1.0; 3], vec![0.0; 3]]).unwrap();
    for k in 0..3 {
        let t = ese_transfer_on_path(&cfg, &path, k).unwrap();
        assert_eq!(t.pieces.len(), 1);
        // along the diagonal v_i = v: rho_k = g_k / ((G - g_k) v + sigma^2)
        let gk = cfg.g[k];
        for v in [0.0, 0.3, 0.8, 1.0] {
            let want = gk / ((1.0 - gk) * v + 1.0);
            assert!((t.eval(v) - want).abs() < 1e-14);
        }
    }
}

#[test]
fn case2_pieces() {
    let cfg = three_user_cfg();
    let path = MsePath::new(vec![
        vec![1.0; 3],
        vec![0.2145, 0.2056, 0.0],
        vec![0.0, 0.0618, 0.0],
        vec![0.0; 3],
    ])
    .unwrap();
    let t = ese_transfer_on_path(&cfg, &path, 1).unwrap();
    assert_eq!(t.pieces.len(), 3);
    // last segment: only user 2 moves, so rho_2 sits at g_2 / sigma^2 for v_2 <= 0.0618
    for v in [0.0, 0.03, 0.0618] {
        assert!((t.eval(v) - 2.0 / 7.0).abs() < 1e-15);
    }
    assert!(t.eval(0.07) < 2.0 / 7.0);
    // user 1 is parked at 0 while the others finish: a jump at v_1 = 0
    let t1 = ese_transfer_on_path(&cfg, &path, 0).unwrap();
    let jump = t1
        .pieces
        .iter()
        .find_map(|p| match p {
            EsePiece::Jump { v, rho_to, .. } => Some((*v, *rho_to)),
            _ => None,
        })
        .expect("jump piece");
    assert_eq!(jump.0, 0.0);
    assert!((jump.1 - 1.0 / 7.0).abs() < 1e-15);
}

#[test]
fn equal_power_endpoints_match_bounds() {
    let cfg = SystemConfig::new(vec![1.0, 1.0], 1.0).unwrap();
    let path = MsePath::new(vec![vec![1.0; 2], vec![0.0; 2]]).unwrap();
    for k in 0..2 {
        let t = ese_transfer_on_path(&cfg, &path, k).unwrap();
        let (lo, hi) = snr_bounds(&cfg, k).unwrap();
        assert_eq!(t.eval(1.0), lo);
        assert_eq!(t.eval(0.0), hi);
    }
}

#[test]
fn dec_target_branches() {
    let cfg = three_user_cfg();
    let path = MsePath::new(vec![vec![1.0; 3], vec![0.5, 0.2, 0.2], vec![0.0; 3]]).unwrap();
    for k in 0..3 {
        let psi = dec_target(&cfg, &path, k).unwrap();
        assert_eq!(psi.eval(psi.rho_min() * 0.5), 1.0);
        assert_eq!(psi.eval(psi.rho_min()), 1.0);
        assert_eq!(psi.eval(psi.rho_max()), 0.0);
        assert_eq!(psi.eval(psi.rho_max() * 3.0), 0.0);
    }
}

#[test]
fn sic_threshold_examples() {
    let two = SystemConfig::new(vec![1.0, 1.0], 1.0).unwrap();
    assert_eq!(sic_thresholds(&two, &[0, 1]).unwrap(), vec![0.5, 1.0]);
    let one = SystemConfig::new(vec![3.0], 2.0).unwrap();
    assert_eq!(sic_thresholds(&one, &[0]).unwrap(), vec![1.5]);
    let cfg = three_user_cfg();
    let t = sic_thresholds(&cfg, &[2, 1, 0]).unwrap();
    let want = [
        1.0 / 7.0,
        (2.0 / 7.0) / (1.0 + 1.0 / 7.0),
        (4.0 / 7.0) / (1.0 + 3.0 / 7.0),
    ];
    assert!(close(&t, &want, 1e-15));
    assert!(sic_thresholds(&cfg, &[0, 0, 1]).is_err());
    assert!(sic_thresholds(&cfg, &[0, 1]).is_err());
}

fn cplx_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(r, c, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

// Direct-inverse oracle: rho_k = s_k / (1 - v_k s_k), s_k = sum_i h_ki^H R^-1 h_ki.
fn mimo_oracle(m: &MimoConfig, v: &[f64]) -> Vec<f64> {
    let nr = m.nr();
    let mut r = DMatrix::<Complex64>::identity(nr, nr) * Complex64::new(m.noise_var, 0.0);
    for (k, h) in m.h.iter().enumerate() {
        r += h * h.adjoint() * Complex64::new(m.p[k] * v[k], 0.0);
    }
    let inv = r.try_inverse().unwrap();
    m.h.iter()
        .enumerate()
        .map(|(k, h)| {
            let s = (h.adjoint() * &inv * h).trace().re * m.p[k];
            s / (1.0 - v[k] * s)
        })
        .collect()
}

#[test]
fn mimo_matches_direct_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let m = MimoConfig::new(
            vec![cplx_matrix(&mut rng, 4, 2), cplx_matrix(&mut rng, 4, 2)],
            vec![0.7, 1.3],
            4.0,
        )
        .unwrap();
        let v = [0.3, 0.7];
        let got = mimo_lmmse_snr(&m, &v).unwrap();
        assert!(close(&got, &mimo_oracle(&m, &v), 1e-10), "{got:?}");
    }
}

#[test]
fn mimo_v_zero_is_matched_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = MimoConfig::new(
        vec![cplx_matrix(&mut rng, 3, 1), cplx_matrix(&mut rng, 3, 2)],
        vec![1.0, 2.0],
        0.5,
    )
    .unwrap();
    let got = mimo_lmmse_snr(&m, &[0.0, 0.0]).unwrap();
    for (k, h) in m.h.iter().enumerate() {
        let mf = m.p[k] * h.iter().map(|z| z.norm_sqr()).sum::<f64>() / m.noise_var;
        assert!((got[k] - mf).abs() < 1e-12 * mf);
    }
}

#[test]
fn mimo_shape_mismatch_rejected() {
    let a = DMatrix::from_element(2, 1, Complex64::new(1.0, 0.0));
    let b = DMatrix::from_element(3, 1, Complex64::new(1.0, 0.0));
    assert!(MimoConfig::new(vec![a, b], vec![1.0, 1.0], 1.0).is_err());
}

fn logdet_r(m: &MimoConfig, v: &[f64]) -> f64 {
    let nr = m.nr();
    let mut r = DMatrix::<Complex64>::identity(nr, nr) * Complex64::new(m.noise_var, 0.0);
    for (k, h) in m.h.iter().enumerate() {
        r += h * h.adjoint() * Complex64::new(m.p[k] * v[k], 0.0);
    }
    r.determinant().re.ln()
}

#[test]
fn jacobi_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let m = MimoConfig::new(
            (0..3).map(|_| cplx_matrix(&mut rng, 4, 2)).collect(),
            vec![0.5, 1.0, 2.0],
            0.3,
        )
        .unwrap();
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..0.9)).collect();
        let nr = m.nr();
        let mut r = DMatrix::<Complex64>::identity(nr, nr) * Complex64::new(m.noise_var, 0.0);
        for (k, h) in m.h.iter().enumerate() {
            r += h * h.adjoint() * Complex64::new(m.p[k] * v[k], 0.0);
        }
        let inv = r.try_inverse().unwrap();
        for k in 0..3 {
            let h = 1e-6;
            let mut up = v.clone();
            let mut dn = v.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (logdet_r(&m, &up) - logdet_r(&m, &dn)) / (2.0 * h);
            let an = m.p[k] * (&inv * &m.h[k] * m.h[k].adjoint()).trace().re;
            assert!((fd - an).abs() <= 1e-6 * an.abs(), "{fd} vs {an}");
        }
    }
}

fn monotone_path(k: usize, n: usize) -> impl Strategy<Value = MsePath> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, n - 1), k).prop_map(move |cols| {
        let mut bps = vec![vec![1.0; k]];
        let sorted: Vec<Vec<f64>> = cols
            .into_iter()
            .map(|mut c| {
                c.sort_by(|a, b| b.partial_cmp(a).unwrap());
                c
            })
            .collect();
        for i in 0..n - 1 {
            bps.push(sorted.iter().map(|c| c[i]).collect());
        }
        bps.push(vec![0.0; k]);
        MsePath::new(bps).unwrap()
    })
}

proptest! {
    #[test]
    fn matched_round_trip(path in monotone_path(3, 3), vs in prop::collection::vec(0.0f64..1.0, 50)) {
        let cfg = three_user_cfg();
        for k in 0..3 {
            let ese = ese_transfer_on_path(&cfg, &path, k).unwrap();
            let psi = dec_target(&cfg, &path, k).unwrap();
            for &v in &vs {
                let rho = ese.eval(v);
                let back = psi.eval(rho);
                // a jump in the ESE maps back onto its plateau v
                prop_assert!((back - v).abs() <= 1e-9, "k {} v {} back {}", k, v, back);
            }
        }
    }

    #[test]
    fn ese_transfer_nonincreasing_within_bounds(path in monotone_path(3, 4)) {
        let cfg = three_user_cfg();
        for k in 0..3 {
            let ese = ese_transfer_on_path(&cfg, &path, k).unwrap();
            let (lo, hi) = snr_bounds(&cfg, k).unwrap();
            let mut prev = 0.0;
            for i in 0..=200 {
                let v = 1.0 - i as f64 / 200.0;
                let r = ese.eval(v);
                prop_assert!(r >= prev - 1e-15 && r >= lo - 1e-15 && r <= hi + 1e-15);
                prev = r;
            }
        }
    }

    #[test]
    fn ese_snr_shared_sum_and_monotone(
        g in prop::collection::vec(0.01f64..2.0, 2..6),
        noise in 0.01f64..2.0,
        seed in any::<u64>(),
    ) {
        let k = g.len();
        let cfg = SystemConfig::new(g.clone(), noise).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let base = ese_snr(&cfg, &v).unwrap();
        prop_assert!(close(&base, &naive_snr(&g, noise, &v), 1e-13));
        for i in 0..k {
            let mut w = v.clone();
            w[i] = (w[i] + 0.3).min(1.0);
            let r = ese_snr(&cfg, &w).unwrap();
            for j in 0..k {
                if j == i {
                    prop_assert!((r[j] - base[j]).abs() <= 1e-13 * base[j]);
                } else {
                    prop_assert!(r[j] <= base[j] * (1.0 + 1e-13));
                }
            }
        }
    }

    #[test]
    fn scalar_mimo_matches_siso(
        g in prop::collection::vec(0.01f64..2.0, 1..5),
        noise in 0.05f64..2.0,
        seed in any::<u64>(),
    ) {
        let k = g.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let h = vec![DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)); k];
        let m = MimoConfig::new(h, g.clone(), noise).unwrap();
        let siso = ese_snr(&SystemConfig::new(g, noise).unwrap(), &v).unwrap();
        prop_assert!(close(&mimo_lmmse_snr(&m, &v).unwrap(), &siso, 1e-12));
    }
}
