use idma_core::mmse::{fast, j_func, j_inv, mmse_gaussian, mmse_inverse, mmse_qpsk, MmseCurve};
use idma_core::quad::integrate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

// Plain trapezoid in z over a wide window; independent of the library's adaptive rule.
fn trapezoid_fq(rho: f64) -> f64 {
    let n = 200_000;
    let (a, b) = (-14.0, 14.0);
    let h = (b - a) / n as f64;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let f = |z: f64| phi(z) * (1.0 - (rho + rho.sqrt() * z).tanh());
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

#[test]
fn gaussian_examples() {
    assert_eq!(mmse_gaussian(0.0).unwrap(), 1.0);
    assert_eq!(mmse_gaussian(1.0).unwrap(), 0.5);
    assert!((mmse_gaussian(1.0 / 7.0).unwrap() - 0.875).abs() < 1e-15);
    assert!(mmse_gaussian(-0.1).is_err());
}

#[test]
fn qpsk_examples() {
    assert!((mmse_qpsk(0.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(mmse_qpsk(100.0).unwrap() < 1e-8);
    assert!(mmse_qpsk(-1.0).is_err());
}

#[test]
fn qpsk_at_one_matches_trapezoid() {
    let oracle = trapezoid_fq(1.0);
    let v = mmse_qpsk(1.0).unwrap();
    assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
}

#[test]
fn qpsk_trapezoid_on_grid() {
    for rho in [0.05, 0.3, 2.0, 7.0] {
        let v = mmse_qpsk(rho).unwrap();
        assert!((v - trapezoid_fq(rho)).abs() < 1e-8, "rho {rho}");
    }
}

#[test]
fn inverse_examples() {
    let g = MmseCurve::gaussian();
    assert!((mmse_inverse(&g, 0.5).unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(mmse_inverse(&g, 1.0).unwrap(), 0.0);
    let q = MmseCurve::qpsk();
    let r = mmse_inverse(&q, mmse_qpsk(2.0).unwrap()).unwrap();
    assert!((r - 2.0).abs() < 1e-8, "{r}");
    assert!(mmse_inverse(&q, 0.0).is_err());
    assert!(mmse_inverse(&q, 1.5).is_err());
}

#[test]
fn j_examples() {
    assert_eq!(j_func(0.0).unwrap(), 0.0);
    assert!(1.0 - j_func(100.0).unwrap() < 1e-10);
    assert!(j_func(-1.0).is_err());
    assert_eq!(j_inv(0.0).unwrap(), 0.0);
    assert!((j_inv(j_func(1.5).unwrap()).unwrap() - 1.5).abs() < 1e-6);
    let s = j_inv(0.9999).unwrap();
    assert!(s.is_finite());
    assert!((j_func(s).unwrap() - 0.9999).abs() < 1e-9);
    assert!(j_inv(1.0).is_err());
    assert!(j_inv(-0.1).is_err());
}

#[test]
fn j_at_two_matches_monte_carlo() {
    // L ~ N(s^2/2, s^2) conditioned on +1; I = 1 - E[log2(1 + e^-L)]
    let sigma: f64 = 2.0;
    let n = 10_000_000;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let l = 0.5 * sigma * sigma + sigma * z;
        let x = if l > 0.0 {
            (-l).exp().ln_1p()
        } else {
            -l + l.exp().ln_1p()
        } / std::f64::consts::LN_2;
        sum += x;
        sq += x * x;
    }
    let mean = sum / n as f64;
    let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
    let j = j_func(sigma).unwrap();
    assert!(
        ((1.0 - mean) - j).abs() < 3.0 * se,
        "J {j} mc {} se {se}",
        1.0 - mean
    );
}

#[test]
fn qpsk_below_gaussian_dense_grid() {
    for i in 0..=2000 {
        let rho = i as f64 * 0.05;
        let q = mmse_qpsk(rho).unwrap();
        assert!(q <= 1.0 / (1.0 + rho) + 1e-15, "rho {rho}");
    }
}

// J rounds to 1.0 in f64 beyond sigma ~ 16, so the grid stops at 12.
#[test]
fn curves_strictly_monotone() {
    let mut prev_q = f64::INFINITY;
    let mut prev_j = -1.0;
    for i in 0..240 {
        let x = i as f64 * 0.05;
        let q = mmse_qpsk(x).unwrap();
        let j = j_func(x).unwrap();
        assert!(q < prev_q && j > prev_j, "x {x}");
        prev_q = q;
        prev_j = j;
    }
}

#[test]
fn guo_identity_gaussian() {
    for s in [0.1, 1.0, 5.0, 40.0] {
        let r = integrate(|rho| 1.0 / (1.0 + rho), 0.0, s, 1e-13, 1e-13);
        assert!((r.value - f64::ln_1p(s)).abs() < 1e-11);
    }
}

proptest! {
    #[test]
    fn fast_tables_track_exact(rho in 0.0f64..60.0, sigma in 0.0f64..9.0) {
        let e = mmse_qpsk(rho).unwrap();
        prop_assert!((fast::fq(rho) - e).abs() <= 1e-8 * e);
        let j = j_func(sigma).unwrap();
        prop_assert!((fast::j(sigma) - j).abs() <= 1e-8 * j.max(1e-300) + 1e-15);
    }

    #[test]
    fn inverses_round_trip(rho in 0.0f64..50.0, sigma in 0.01f64..9.0) {
        let q = MmseCurve::qpsk();
        let v = mmse_qpsk(rho).unwrap();
        let back = mmse_inverse(&q, v).unwrap();
        prop_assert!((mmse_qpsk(back).unwrap() - v).abs() <= 1e-10);
        let i = j_func(sigma).unwrap();
        prop_assert!((j_func(j_inv(i).unwrap()).unwrap() - i).abs() <= 1e-9);
    }
}
