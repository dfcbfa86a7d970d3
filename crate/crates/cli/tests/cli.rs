use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use idma_wb::manifest::{RunManifest, MANIFEST_FILE};

const CFG: &str = "[users]\nK = 3\ng = [0.14285714285714285, 0.2857142857142857, 0.5714285714285714]\n[channel]\nnoise_var = 1.0\n";

fn wb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idma-wb"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("c.toml"), CFG).unwrap();
    t
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn rates_default_is_straight_line() {
    let t = setup();
    let o = wb(t.path(), &["--config", "c.toml", "--out", "r", "rates"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(t.path().join("r/rates.csv")).unwrap();
    // straight line gives each user its SNR share of the sum capacity: g_k / sum g
    let rates: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (r, want) in rates.iter().zip([1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0]) {
        assert!((r - want).abs() < 1e-9);
    }
    let m = manifest(&t.path().join("r"));
    assert_eq!(m.subcommand, "rates");
    assert!(m.config.is_some());
    assert_eq!(m.inputs.len(), 1);
    assert!(m.outputs.iter().any(|e| e.file == "region.csv"));
}

#[test]
fn sic_flag_gives_corner_rates() {
    let t = setup();
    let o = wb(
        t.path(),
        &[
            "--config", "c.toml", "--out", "r", "rates", "--sic", "3,2,1",
        ],
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(t.path().join("r/rates.csv")).unwrap();
    let r1: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    // user 1 decoded last sees no interference
    assert!((r1 - (1.0f64 + 1.0 / 7.0).log2()).abs() < 1e-9);
}

#[test]
fn missing_or_malformed_config_exits_2() {
    let t = setup();
    assert_eq!(wb(t.path(), &["rates"]).status.code(), Some(2));
    fs::write(
        t.path().join("bad.toml"),
        "[users]\nK = 2\ng = [1, -1]\n[channel]\nnoise_var = 1\n",
    )
    .unwrap();
    let o = wb(t.path(), &["--config", "bad.toml", "rates"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("g"));
    assert_eq!(
        wb(t.path(), &["--config", "nope.toml", "rates"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn malformed_path_exits_2() {
    let t = setup();
    fs::write(t.path().join("p.json"), "{not json").unwrap();
    assert_eq!(
        wb(
            t.path(),
            &["--config", "c.toml", "rates", "--path", "p.json"]
        )
        .status
        .code(),
        Some(2)
    );
    // increasing breakpoint
    fs::write(t.path().join("q.json"), "[[1,1,1],[0.5,1.2,0],[0,0,0]]").unwrap();
    assert_eq!(
        wb(
            t.path(),
            &["--config", "c.toml", "rates", "--path", "q.json"]
        )
        .status
        .code(),
        Some(2)
    );
    // wrong dimension
    fs::write(t.path().join("d.json"), "[[1,1],[0,0]]").unwrap();
    assert_eq!(
        wb(
            t.path(),
            &["--config", "c.toml", "rates", "--path", "d.json"]
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn infeasible_target_exits_1_with_region_report() {
    let t = setup();
    let o = wb(
        t.path(),
        &[
            "--config",
            "c.toml",
            "--out",
            "p",
            "path",
            "--target",
            "0.5,0.5,0.5",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("R1"));
    let region = fs::read_to_string(t.path().join("p/region.csv")).unwrap();
    assert!(region
        .lines()
        .any(|l| l.starts_with("1+2+3,") && l.contains(",-")));
}

#[test]
fn path_solution_hits_target() {
    let t = setup();
    let o = wb(
        t.path(),
        &[
            "--config",
            "c.toml",
            "--out",
            "p",
            "path",
            "--target",
            "0.15,0.3,0.55",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(t.path().join("p/rates.csv")).unwrap();
    let got: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1).and_then(|x| x.parse().ok()))
        .collect();
    for (g, w) in got.iter().zip([0.15, 0.3, 0.55]) {
        assert!((g - w).abs() < 1e-6, "{got:?}");
    }
    for k in 1..=3 {
        assert!(t.path().join(format!("p/ese_user{k}.csv")).exists());
        assert!(t.path().join(format!("p/dec_target_user{k}.csv")).exists());
    }
}

#[test]
fn same_seed_same_outputs() {
    let t = setup();
    fs::write(t.path().join("sl.json"), "[[1,1,1],[0,0,0]]").unwrap();
    let o = wb(
        t.path(),
        &[
            "--config", "c.toml", "--out", "o", "optimize", "--path", "sl.json", "--eta", "3,4,5",
            "--users", "1,2,3",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sim = |out: &str, threads: &str| {
        let o = wb(
            t.path(),
            &[
                "--config",
                "c.toml",
                "--seed",
                "7",
                "--threads",
                threads,
                "--out",
                out,
                "simulate",
                "--profiles",
                "o/profiles.json",
                "--n",
                "2048",
                "--blocks",
                "3",
                "--max-outer",
                "40",
                "--snr-db",
                "0.5,1.5",
                "--trajectory",
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        manifest(&t.path().join(out))
    };
    let a = sim("s1", "1");
    let b = sim("s2", "3");
    assert_eq!(a.seed, 7);
    assert_eq!(a.outputs, b.outputs);
    assert!(a.outputs.iter().any(|e| e.file == "traj_0.5dB.csv"));
}

#[test]
fn dry_run_writes_nothing() {
    let t = setup();
    let o = wb(
        t.path(),
        &[
            "--out",
            "d",
            "pipeline",
            "--target",
            "0.15,0.3,0.55",
            "--dry-run",
        ],
    );
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("capacity-region"));
    assert!(!t.path().join("d").exists());
}

#[test]
fn report_groups_runs_and_flags_corruption() {
    let t = setup();
    let empty = wb(t.path(), &["report", "."]);
    assert!(empty.status.success());
    let v: serde_json::Value = serde_json::from_slice(&empty.stdout).unwrap();
    assert_eq!(v["runs"].as_object().unwrap().len(), 0);
    assert_eq!(v["unreadable"].as_array().unwrap().len(), 0);

    assert!(wb(
        t.path(),
        &["--config", "c.toml", "--out", "runs/a", "rates"]
    )
    .status
    .success());
    assert!(wb(
        t.path(),
        &["--config", "c.toml", "--out", "runs/b", "rates", "--sic", "1,2,3"]
    )
    .status
    .success());
    fs::create_dir_all(t.path().join("runs/c")).unwrap();
    fs::write(t.path().join("runs/c").join(MANIFEST_FILE), "{ truncated").unwrap();
    let o = wb(t.path(), &["report", "runs"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["runs"]["rates"].as_array().unwrap().len(), 2);
    assert_eq!(v["unreadable"].as_array().unwrap().len(), 1);

    assert_eq!(wb(t.path(), &["report", "missing"]).status.code(), Some(2));
}

#[test]
fn bad_flag_exits_2() {
    let t = setup();
    assert_eq!(
        wb(t.path(), &["rates", "--no-such-flag"]).status.code(),
        Some(2)
    );
    assert_eq!(
        wb(t.path(), &["--config", "c.toml", "rates", "--sic", "1,4,2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn pipeline_case2_designs_near_table_rates() {
    let t = setup();
    let o = wb(
        t.path(),
        &[
            "--config",
            "c.toml",
            "--out",
            "pl",
            "pipeline",
            "--target",
            "0.15,0.3,0.55",
            "--eta",
            "3,4,5",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(t.path().join("pl/pipeline.json")).unwrap())
            .unwrap();
    let rates: Vec<f64> = v["designed_rates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    for (r, table) in rates.iter().zip([0.1555, 0.3154, 0.5522]) {
        assert!((r - table).abs() <= 0.03, "{rates:?}");
    }
    assert!(v["de_threshold_db"].as_f64().unwrap() < 1.0);
    let m = manifest(&t.path().join("pl"));
    for f in ["path.json", "profiles.json", "region.csv", "pipeline.json"] {
        assert!(m.outputs.iter().any(|e| e.file == f), "{f}");
    }
}
