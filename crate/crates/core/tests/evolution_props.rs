use idma_core::codedesign::{run_algorithm1, single_eta, DegreeProfile, OptimizerSettings};
use idma_core::evolution::{
    measure_dec_transfer, run_ga_de, threshold_search, DeLimits, DeTrajectory,
};
use idma_core::transfer::dec_target;
use idma_core::{MsePath, SystemConfig};

fn three_user_cfg() -> SystemConfig {
    SystemConfig::new(vec![1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0], 1.0).unwrap()
}

fn case_path(case: usize) -> MsePath {
    let bps = match case {
        1 => vec![vec![1.0; 3], vec![0.0; 3]],
        2 => vec![
            vec![1.0; 3],
            vec![0.2145, 0.2056, 0.0],
            vec![0.0, 0.0618, 0.0],
            vec![0.0; 3],
        ],
        _ => vec![vec![1.0; 3], vec![0.5, 0.2, 0.2], vec![0.0; 3]],
    };
    MsePath::new(bps).unwrap()
}

fn designed(case: usize) -> Vec<DegreeProfile> {
    let cfg = three_user_cfg();
    let mut s = OptimizerSettings::default();
    if case == 1 {
        s.degrees.extend((60..=100).step_by(10));
    }
    (0..3)
        .map(|k| {
            let psi = dec_target(&cfg, &case_path(case), k).unwrap();
            run_algorithm1(&s, &single_eta(3 + k), &psi)
                .unwrap()
                .profile
        })
        .collect()
}

fn assert_monotone(t: &DeTrajectory) {
    for w in t.steps.windows(2) {
        for k in 0..w[0].v.len() {
            assert!(
                w[1].v[k] <= w[0].v[k],
                "v_{k} rose: {} -> {}",
                w[0].v[k],
                w[1].v[k]
            );
            assert!(w[1].rho[k] >= w[0].rho[k], "rho_{k} fell");
        }
    }
}

#[test]
fn noiseless_converges_in_one_iteration() {
    // with K > 1 the initial interference keeps rho finite, so use one user
    let cfg = SystemConfig::new(vec![1.0], 1e-14).unwrap();
    let profs = vec![DegreeProfile::from_pairs(&[(3, 1.0)], &[(6, 1.0)]).unwrap()];
    let t = run_ga_de(&cfg, &profs, 1.0, &DeLimits::default()).unwrap();
    assert!(t.converged);
    assert_eq!(t.iterations, 1);
    assert_eq!(t.steps.len(), 2);
}

#[test]
fn wrong_profile_count_is_an_error() {
    let profs = vec![DegreeProfile::from_pairs(&[(3, 1.0)], &[(6, 1.0)]).unwrap(); 2];
    assert!(run_ga_de(&three_user_cfg(), &profs, 1.0, &DeLimits::default()).is_err());
}

#[test]
fn designed_profiles_bracket_and_trajectories() {
    let lim = DeLimits::default();
    let cfg = three_user_cfg();
    for case in 1..=3 {
        let profs = designed(case);
        let good = run_ga_de(&cfg.at_snr_db(1.0), &profs, 1.0, &lim).unwrap();
        assert!(good.converged, "case {case}");
        assert_monotone(&good);
        let again = run_ga_de(&cfg.at_snr_db(1.0), &profs, 1.0, &lim).unwrap();
        assert_eq!(good, again);
        let bad = run_ga_de(&cfg.at_snr_db(-0.5), &profs, 1.0, &lim).unwrap();
        assert!(!bad.converged, "case {case}");
        assert_monotone(&bad);
        assert!(
            run_ga_de(&cfg.at_snr_db(0.5), &profs, 1.0, &lim)
                .unwrap()
                .converged
        );
        if case == 1 {
            let th = threshold_search(&cfg, &profs, (-2.0, 2.0), 0.01, &lim).unwrap();
            // GA places the threshold a hair below 0 dB
            assert!((-0.02..=0.5).contains(&th), "{th}");
            let wide = threshold_search(&cfg, &profs, (-6.0, 6.0), 0.01, &lim).unwrap();
            assert!((wide - th).abs() <= 0.01);
        }
    }
}

#[test]
fn snr_scale_matches_gain_scaling() {
    let profs = vec![DegreeProfile::from_pairs(&[(3, 1.0)], &[(6, 1.0)]).unwrap(); 3];
    let cfg = three_user_cfg();
    let lim = DeLimits {
        max_outer: 50,
        ..DeLimits::default()
    };
    let a = run_ga_de(&cfg, &profs, 2.0, &lim).unwrap();
    let scaled = SystemConfig::new(cfg.g.iter().map(|g| g * 2.0).collect(), 1.0).unwrap();
    let b = run_ga_de(&scaled, &profs, 1.0, &lim).unwrap();
    assert_eq!(a, b);
}

#[test]
fn threshold_requires_sign_change() {
    let profs = vec![DegreeProfile::from_pairs(&[(3, 1.0)], &[(6, 1.0)]).unwrap(); 3];
    assert!(threshold_search(
        &three_user_cfg(),
        &profs,
        (20.0, 30.0),
        0.01,
        &DeLimits::default()
    )
    .is_err());
}

#[test]
fn dec_transfer_endpoints() {
    let p = DegreeProfile::from_pairs(&[(2, 0.4), (3, 0.3), (10, 0.3)], &[(5, 1.0)]).unwrap();
    let c = measure_dec_transfer(&p, &[0.0, 50.0]);
    // without channel information the decoder cannot start
    assert_eq!(c[0].1, 1.0);
    assert!(c[1].1 < 1e-9);
}
