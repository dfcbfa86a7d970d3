use idma_core::{
    load_config, snr_sum, validate_path, Config, Error, Modulation, MsePath, SystemConfig,
};
use proptest::prelude::*;

#[test]
fn three_user_config_loads() {
    let text = "[users]\nK = 3\ng = [0.14285714285714285, 0.2857142857142857, 0.5714285714285714]\n[channel]\nnoise_var = 1.0\n";
    let Config::System(cfg) = load_config(text).unwrap() else {
        panic!("expected SISO config")
    };
    assert_eq!(cfg.k, 3);
    assert_eq!(cfg.modulation, Modulation::Qpsk);
    assert_eq!(cfg.seed, 0);
    let s = snr_sum(&cfg);
    assert!((s.linear - 1.0).abs() < 1e-15);
    assert!(s.db.abs() < 1e-12);
}

#[test]
fn single_user_config_loads() {
    let text = "[users]\nK = 1\ng = [1.0]\n[channel]\nnoise_var = 1.0\n";
    assert!(matches!(load_config(text), Ok(Config::System(_))));
}

#[test]
fn negative_power_names_key() {
    let text = "[users]\nK = 2\ng = [1.0, -1.0]\n[channel]\nnoise_var = 1.0\n";
    let err = load_config(text).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("g[1]") && msg.contains("negative"), "{msg}");
}

#[test]
fn nonpositive_noise_rejected() {
    let text = "[users]\nK = 1\ng = [1.0]\n[channel]\nnoise_var = 0.0\n";
    assert!(matches!(load_config(text), Err(Error::Config { .. })));
}

#[test]
fn snr_sum_twenty_db() {
    let cfg = SystemConfig::new(vec![0.25; 4], 0.01).unwrap();
    let s = snr_sum(&cfg);
    assert!((s.linear - 100.0).abs() < 1e-9);
    assert!((s.db - 20.0).abs() < 1e-9);
}

#[test]
fn path_examples() {
    assert!(validate_path(&[vec![1.0; 3], vec![0.5, 0.2, 0.2], vec![0.0; 3]]).is_ok());
    assert!(validate_path(&[vec![1.0; 2], vec![0.0; 2]]).is_ok());
    match validate_path(&[vec![1.0; 2], vec![0.2, 0.5], vec![0.3, 0.0]]) {
        Err(Error::InvalidPath { index, coord, .. }) => {
            assert_eq!((index, coord), (2, 0));
        }
        other => panic!("unexpected {other:?}"),
    }
}

fn monotone_path() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 1usize..6).prop_flat_map(|(k, n)| {
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
            bps
        })
    })
}

proptest! {
    #[test]
    fn monotone_paths_accepted(bps in monotone_path()) {
        prop_assert!(validate_path(&bps).is_ok());
        prop_assert!(MsePath::new(bps).is_ok());
    }

    #[test]
    fn arbitrary_sequences_match_definition(
        k in 1usize..4,
        inner in prop::collection::vec(prop::collection::vec(-0.2f64..1.2, 3), 0..4),
    ) {
        let mut bps = vec![vec![1.0; k]];
        bps.extend(inner.iter().map(|r| r[..k].to_vec()));
        bps.push(vec![0.0; k]);
        let ok = bps.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b <= a))
            && bps.iter().flatten().all(|x| (0.0..=1.0).contains(x));
        prop_assert_eq!(validate_path(&bps).is_ok(), ok);
    }

    #[test]
    fn config_round_trip(
        g in prop::collection::vec(1e-3f64..10.0, 1..6),
        noise in 1e-3f64..10.0,
        seed in any::<u64>(),
        m in 0usize..3,
    ) {
        let modulation = [Modulation::Gaussian, Modulation::Qpsk, Modulation::Bpsk][m];
        let cfg = SystemConfig::new(g, noise).unwrap().with_modulation(modulation).with_seed(seed);
        let back = load_config(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, Config::System(cfg));
    }
}
