use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use idma_core::codedesign::{
    design_best, run_algorithm1, single_eta, DegreeProfile, DesignResult, OptimizerSettings,
};
use idma_core::evolution::{run_ga_de, threshold_search, DeLimits};
use idma_core::mmse::MmseCurve;
use idma_core::pathfinder::{
    default_template, sic_corner_path, solve_path_any_order, straight_line_path, zeroing_template,
    PathSolveSpec,
};
use idma_core::rates::{
    in_capacity_region, mimo_sum_rate, mimo_user_rates_numeric, sum_rate_capacity,
    user_rates_closed_form, user_rates_numeric,
};
use idma_core::transfer::{dec_target, ese_transfer_on_path};
use idma_core::{load_config, Config, MsePath, RateTuple, SystemConfig};
use idma_sim::{
    build_ldpc, capture_llr_histograms, histograms_csv, run_link, HistSpec, LdpcCode, LinkParams,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::error::{CliError, Result};
use crate::manifest::{io_err, read_input, RunDir, RunManifest, MANIFEST_FILE};
use crate::parse;

/// Shared state for one invocation.
pub struct Ctx<'a> {
    pub cli: &'a Cli,
    pub args: Vec<String>,
}

impl Ctx<'_> {
    fn run_dir(&self, name: &str) -> RunDir {
        RunDir::new(
            &self.cli.out,
            name,
            self.args.clone(),
            self.cli.seed.unwrap_or(0),
        )
    }

    fn config(&self, run: &mut RunDir) -> Result<Config> {
        let path = self
            .cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("--config <file> is required".into()))?;
        let text = read_input(path, &mut run.manifest.inputs)?;
        let mut cfg = load_config(&text).map_err(CliError::Config)?;
        if let Config::System(c) = &mut cfg {
            if let Some(s) = self.cli.seed {
                c.seed = s;
            }
            run.manifest.seed = c.seed;
            run.manifest.config = Some(c.to_toml());
        } else if let Config::Mimo(m) = &cfg {
            run.manifest.config = Some(m.to_toml());
        }
        Ok(cfg)
    }

    fn siso(&self, run: &mut RunDir) -> Result<SystemConfig> {
        match self.config(run)? {
            Config::System(c) => Ok(c),
            Config::Mimo(_) => Err(CliError::Usage(
                "this subcommand needs a SISO configuration".into(),
            )),
        }
    }
}

fn load_path(input: &PathInput, k: usize, run: &mut RunDir) -> Result<MsePath> {
    if let Some(order) = &input.sic {
        return Ok(sic_corner_path(k, &parse::users(order, k)?)?);
    }
    match &input.path {
        None => Ok(straight_line_path(k)),
        Some(p) => {
            let text = read_input(p, &mut run.manifest.inputs)?;
            let path: MsePath = serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("malformed path file {}: {e}", p.display()))
            })?;
            if path.k() != k {
                return Err(CliError::Usage(format!(
                    "path has dimension {}, config has K={k}",
                    path.k()
                )));
            }
            Ok(path)
        }
    }
}

pub fn cmd_rates(ctx: &Ctx, a: &RatesArgs) -> Result<RunManifest> {
    let mut run = ctx.run_dir("rates");
    match ctx.config(&mut run)? {
        Config::Mimo(m) => {
            let path = load_path(&a.path, m.k(), &mut run)?;
            let rates = mimo_user_rates_numeric(&m, &path, a.tol)?;
            let sum = mimo_sum_rate(&m)?;
            let mut csv = String::from("user,rate_bpcu\n");
            for (k, r) in rates.iter().enumerate() {
                csv.push_str(&format!("{},{r:.10}\n", k + 1));
            }
            run.write("rates.csv", &csv)?;
            run.write_json(
                "rates.json",
                &json!({"path": path, "rates": rates, "path_sum": rates.iter().sum::<f64>(), "logdet_sum": sum}),
            )?;
        }
        Config::System(cfg) => {
            let path = load_path(&a.path, cfg.k, &mut run)?;
            let closed = user_rates_closed_form(&cfg, &path)?;
            let mut cols = vec![("closed_form_gaussian", closed.rates.clone())];
            if a.numeric {
                cols.push((
                    "numeric_gaussian",
                    user_rates_numeric(&cfg, &path, &MmseCurve::gaussian(), a.tol)?.rates,
                ));
                cols.push((
                    "numeric_qpsk",
                    user_rates_numeric(&cfg, &path, &MmseCurve::qpsk(), a.tol)?.rates,
                ));
            }
            let mut csv = String::from("user");
            for (name, _) in &cols {
                csv.push_str(&format!(",{name}"));
            }
            csv.push('\n');
            for k in 0..cfg.k {
                csv.push_str(&(k + 1).to_string());
                for (_, r) in &cols {
                    csv.push_str(&format!(",{:.10}", r[k]));
                }
                csv.push('\n');
            }
            run.write("rates.csv", &csv)?;
            let region = in_capacity_region(&cfg, &RateTuple::new(closed.rates.clone())?)?;
            run.write("region.csv", &region.to_csv())?;
            let table: BTreeMap<&str, &Vec<f64>> = cols.iter().map(|(n, r)| (*n, r)).collect();
            run.write_json(
                "rates.json",
                &json!({"path": path, "rates": table, "sum_capacity": sum_rate_capacity(&cfg), "region": region}),
            )?;
        }
    }
    run.finish()
}

fn solve_target(
    cfg: &SystemConfig,
    target: &str,
    order: Option<&str>,
    run: &mut RunDir,
) -> Result<MsePath> {
    let rates = parse::floats(target)?;
    if rates.len() != cfg.k {
        return Err(CliError::Usage(format!(
            "{} target rates for K={}",
            rates.len(),
            cfg.k
        )));
    }
    let tuple = RateTuple::new(rates)?;
    let region = in_capacity_region(cfg, &tuple)?;
    run.write("region.csv", &region.to_csv())?;
    if let Some(c) = region.first_violation() {
        return Err(CliError::Numeric(format!(
            "target outside the capacity region: violates {}",
            c.label()
        )));
    }
    let template = match order {
        Some(o) => zeroing_template(cfg.k, &parse::users(o, cfg.k)?)?,
        None => default_template(cfg),
    };
    let mut spec = PathSolveSpec::new(tuple, template);
    spec.seed = cfg.seed;
    let path = solve_path_any_order(cfg, &spec)?;
    run.write_json("path.json", &path)?;
    Ok(path)
}

fn write_transfer_curves(cfg: &SystemConfig, path: &MsePath, run: &mut RunDir) -> Result<()> {
    for k in 0..cfg.k {
        let ese = ese_transfer_on_path(cfg, path, k)?;
        run.write(&format!("ese_user{}.csv", k + 1), &ese.to_csv(64))?;
        let psi = dec_target(cfg, path, k)?;
        let (lo, hi) = (psi.rho_min(), psi.rho_max());
        let rhos: Vec<f64> = (0..=256)
            .map(|i| lo * 0.5 + (hi * 1.5 - lo * 0.5) * i as f64 / 256.0)
            .collect();
        run.write(&format!("dec_target_user{}.csv", k + 1), &psi.to_csv(&rhos))?;
    }
    Ok(())
}

pub fn cmd_path(ctx: &Ctx, a: &PathArgs) -> Result<RunManifest> {
    let mut run = ctx.run_dir("path");
    let cfg = ctx.siso(&mut run)?;
    let path = solve_target(&cfg, &a.target, a.order.as_deref(), &mut run)?;
    let achieved = user_rates_closed_form(&cfg, &path)?;
    run.write("rates.csv", &achieved.to_csv())?;
    write_transfer_curves(&cfg, &path, &mut run)?;
    run.finish()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileEntry {
    /// 1-based user index.
    pub user: usize,
    pub profile: DegreeProfile,
    pub rate_bpcu: f64,
    pub converged: bool,
    pub trials: usize,
}

fn settings(d: &DesignArgs) -> Result<OptimizerSettings> {
    let mut s = OptimizerSettings::default();
    if let Some(spec) = &d.degrees {
        s.degrees = parse::degrees(spec)?;
        s.allow_degree_one = s.degrees.contains(&1);
    }
    s.max_trials = d.max_trials;
    Ok(s)
}

fn design_users(
    cfg: &SystemConfig,
    path: &MsePath,
    d: &DesignArgs,
    users: &[usize],
) -> Result<Vec<ProfileEntry>> {
    let s = settings(d)?;
    let etas = match &d.eta {
        Some(e) => {
            let list: Vec<usize> = e
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Usage(format!("bad check degree `{t}`")))
                })
                .collect::<Result<_>>()?;
            if list.len() != cfg.k {
                return Err(CliError::Usage(format!(
                    "{} check degrees for K={}",
                    list.len(),
                    cfg.k
                )));
            }
            Some(list)
        }
        None => None,
    };
    users
        .iter()
        .map(|&k| {
            let psi = dec_target(cfg, path, k)?;
            let r: DesignResult = match &etas {
                Some(list) => run_algorithm1(&s, &single_eta(list[k]), &psi)?,
                None => design_best(&s, &psi)?,
            };
            Ok(ProfileEntry {
                user: k + 1,
                rate_bpcu: r.rate_bpcu(),
                converged: r.converged,
                trials: r.trials,
                profile: r.profile,
            })
        })
        .collect()
}

fn profiles_csv(entries: &[ProfileEntry]) -> String {
    let mut s = String::from("user,kind,degree,fraction\n");
    for e in entries {
        for (d, f) in &e.profile.lambda {
            s.push_str(&format!("{},lambda,{d},{f:.10}\n", e.user));
        }
        for (d, f) in &e.profile.eta {
            s.push_str(&format!("{},eta,{d},{f:.10}\n", e.user));
        }
    }
    s
}

pub fn cmd_optimize(ctx: &Ctx, a: &OptimizeArgs) -> Result<RunManifest> {
    let mut run = ctx.run_dir("optimize");
    let cfg = ctx.siso(&mut run)?;
    let path = load_path(&a.path, cfg.k, &mut run)?;
    let users = match &a.users {
        Some(u) => parse::users(u, cfg.k)?,
        None => (0..cfg.k).collect(),
    };
    let entries = design_users(&cfg, &path, &a.design, &users)?;
    run.write_json("profiles.json", &entries)?;
    run.write("profiles.csv", &profiles_csv(&entries))?;
    run.finish()
}

fn load_profiles(path: &Path, k: usize, run: &mut RunDir) -> Result<Vec<DegreeProfile>> {
    let text = read_input(path, &mut run.manifest.inputs)?;
    let mut entries: Vec<ProfileEntry> = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed profiles file {}: {e}", path.display())))?;
    entries.sort_by_key(|e| e.user);
    if entries.len() != k || entries.iter().enumerate().any(|(i, e)| e.user != i + 1) {
        return Err(CliError::Usage(format!(
            "profiles file must hold users 1..={k} exactly once"
        )));
    }
    for e in &entries {
        e.profile.validate().map_err(CliError::Config)?;
    }
    Ok(entries.into_iter().map(|e| e.profile).collect())
}

fn de_summary(
    cfg: &SystemConfig,
    profiles: &[DegreeProfile],
    dbs: &[f64],
    limits: &DeLimits,
    run: &mut RunDir,
) -> Result<Vec<serde_json::Value>> {
    let mut out = Vec::new();
    for &db in dbs {
        let t = run_ga_de(&cfg.at_snr_db(db), profiles, 1.0, limits)?;
        run.write(&format!("de_{}.csv", parse::snr_label(db)), &t.to_csv())?;
        out.push(json!({"snr_db": db, "converged": t.converged, "iterations": t.iterations, "final_v": t.final_v()}));
    }
    Ok(out)
}

pub fn cmd_evolve(ctx: &Ctx, a: &EvolveArgs) -> Result<RunManifest> {
    let mut run = ctx.run_dir("evolve");
    let cfg = ctx.siso(&mut run)?;
    let profiles = load_profiles(&a.profiles, cfg.k, &mut run)?;
    let limits = DeLimits {
        max_outer: a.max_outer,
        ..DeLimits::default()
    };
    let points = de_summary(
        &cfg,
        &profiles,
        &parse::floats(&a.snr_db)?,
        &limits,
        &mut run,
    )?;
    let threshold = match &a.threshold {
        Some(b) => {
            let b = parse::floats(b)?;
            if b.len() != 2 {
                return Err(CliError::Usage("--threshold takes lo,hi".into()));
            }
            Some(threshold_search(
                &cfg,
                &profiles,
                (b[0], b[1]),
                1e-3,
                &limits,
            )?)
        }
        None => None,
    };
    run.write_json(
        "evolve.json",
        &json!({"points": points, "threshold_db": threshold}),
    )?;
    run.finish()
}

fn link_params(s: &SimArgs, seed: u64) -> LinkParams {
    LinkParams {
        max_outer: s.max_outer,
        bp_iters: s.bp_iters,
        frame_averaged: s.frame_averaged,
        block_budget: s.blocks,
        target_errors: s.target_errors,
        seed,
        record_trajectory: s.trajectory,
        ..LinkParams::default()
    }
}

fn build_codes(profiles: &[DegreeProfile], n: usize, seed: u64) -> Result<Vec<LdpcCode>> {
    profiles
        .iter()
        .enumerate()
        .map(|(k, p)| Ok(build_ldpc(p, n, seed.wrapping_add(k as u64))?))
        .collect()
}

fn simulate_points(
    cfg: &SystemConfig,
    codes: &[LdpcCode],
    s: &SimArgs,
    dbs: &[f64],
    run: &mut RunDir,
) -> Result<()> {
    let params = link_params(s, cfg.seed);
    let mut csv = String::from("snr_db,user,ber,fer,blocks,ci_lo,ci_hi\n");
    for &db in dbs {
        let r = run_link(&cfg.at_snr_db(db), codes, &params)?;
        for (k, u) in r.users.iter().enumerate() {
            csv.push_str(&format!(
                "{db},{},{:e},{:e},{},{:e},{:e}\n",
                k + 1,
                u.ber,
                u.fer,
                r.blocks,
                u.ci_lo,
                u.ci_hi
            ));
        }
        if let Some(t) = r.trajectory_csv() {
            run.write(&format!("traj_{}.csv", parse::snr_label(db)), &t)?;
        }
    }
    run.write("ber.csv", &csv)
}

pub fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<RunManifest> {
    let mut run = ctx.run_dir("simulate");
    let cfg = ctx.siso(&mut run)?;
    let profiles = load_profiles(&a.profiles, cfg.k, &mut run)?;
    let codes = build_codes(&profiles, a.sim.n, cfg.seed)?;
    let dbs = parse::floats(&a.snr_db)?;
    simulate_points(&cfg, &codes, &a.sim, &dbs, &mut run)?;
    if let Some(u) = a.hist_user {
        if !(1..=cfg.k).contains(&u) {
            return Err(CliError::Usage(format!(
                "--hist-user {u} not in 1..={}",
                cfg.k
            )));
        }
        let spec = HistSpec {
            user: u - 1,
            bins: a.bins,
            lo: -idma_sim::bp::LLR_CLIP,
            hi: idma_sim::bp::LLR_CLIP,
            iterations: a.hist_iterations,
        };
        for &db in &dbs {
            let hs = capture_llr_histograms(
                &cfg.at_snr_db(db),
                &codes,
                &link_params(&a.sim, cfg.seed),
                &spec,
            )?;
            run.write(
                &format!("hist_{}.csv", parse::snr_label(db)),
                &histograms_csv(&hs),
            )?;
        }
    }
    run.finish()
}

const PLAN: [&str; 5] = [
    "check the target against every capacity-region constraint",
    "solve an MSE path achieving the target (zeroing templates)",
    "derive each user's matched decoder target and run the profile optimizer",
    "run density evolution and bisect for the SNR threshold",
    "simulate BER at the requested SNR points (if --simulate-db is given)",
];

pub fn cmd_pipeline(ctx: &Ctx, a: &PipelineArgs) -> Result<Option<RunManifest>> {
    if a.dry_run {
        println!("pipeline plan for target {}:", a.target);
        for (i, step) in PLAN.iter().enumerate() {
            println!("  {}. {step}", i + 1);
        }
        println!("outputs would go to {}", ctx.cli.out.display());
        return Ok(None);
    }
    let mut run = ctx.run_dir("pipeline");
    let cfg = ctx.siso(&mut run)?;
    let path = solve_target(&cfg, &a.target, None, &mut run)?;
    let users: Vec<usize> = (0..cfg.k).collect();
    let entries = design_users(&cfg, &path, &a.design, &users)?;
    run.write_json("profiles.json", &entries)?;
    run.write("profiles.csv", &profiles_csv(&entries))?;
    let profiles: Vec<DegreeProfile> = entries.iter().map(|e| e.profile.clone()).collect();
    let snr0 = 10.0 * (cfg.g_total() / cfg.noise_var).log10();
    let threshold = threshold_search(
        &cfg,
        &profiles,
        (snr0 - 10.0, snr0 + 10.0),
        1e-3,
        &DeLimits::default(),
    )
    .ok();
    if let Some(dbs) = &a.simulate_db {
        let codes = build_codes(&profiles, a.sim.n, cfg.seed)?;
        simulate_points(&cfg, &codes, &a.sim, &parse::floats(dbs)?, &mut run)?;
    }
    run.write_json(
        "pipeline.json",
        &json!({
            "target": parse::floats(&a.target)?,
            "path": path,
            "designed_rates": entries.iter().map(|e| e.rate_bpcu).collect::<Vec<_>>(),
            "de_threshold_db": threshold,
        }),
    )?;
    run.finish().map(Some)
}

fn find_manifests(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_manifests(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == MANIFEST_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

/// Groups readable manifests by subcommand; unreadable ones are listed separately.
pub fn report(dir: &Path) -> Result<serde_json::Value> {
    let mut found = Vec::new();
    find_manifests(dir, &mut found)?;
    let mut groups: BTreeMap<String, Vec<serde_json::Value>> = BTreeMap::new();
    let mut unreadable = Vec::new();
    for p in found {
        let rel = p.strip_prefix(dir).unwrap_or(&p).display().to_string();
        let parsed = fs::read_to_string(&p)
            .ok()
            .and_then(|t| serde_json::from_str::<RunManifest>(&t).ok());
        match parsed {
            Some(m) => groups.entry(m.subcommand.clone()).or_default().push(json!({
                "manifest": rel,
                "seed": m.seed,
                "outputs": m.outputs.iter().map(|o| o.file.clone()).collect::<Vec<_>>(),
                "wall_clock_s": m.wall_clock_s,
            })),
            None => unreadable.push(rel),
        }
    }
    Ok(json!({"runs": groups, "unreadable": unreadable}))
}

pub fn cmd_report(a: &ReportArgs) -> Result<serde_json::Value> {
    if !a.dir.is_dir() {
        return Err(CliError::Usage(format!(
            "{} is not a directory",
            a.dir.display()
        )));
    }
    report(&a.dir)
}
