use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use agnostic_core::bellman::{bayes_value, load_field, save_field, ValueField};
use agnostic_core::extension::extend_strategy;
use agnostic_core::regret::{minimax_prior_search, worst_case_regret, write_profile_csv, RegretEstimate};
use agnostic_core::sim::{estimate_cost, run_paths, Partition, Strategy};
use agnostic_core::{known_a_expected_cost, solve_bellman_shared, ProblemSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    KnownA,
    Bayes,
    RegretProfile,
    Minimax,
    Extend,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::KnownA => "known-a",
            Mode::Bayes => "bayes",
            Mode::RegretProfile => "regret-profile",
            Mode::Minimax => "minimax",
            Mode::Extend => "extend",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub save_field: Option<PathBuf>,
    pub load_field: Option<PathBuf>,
}

/// Paths and hash of a finished run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub config_hash: String,
    pub results_csv: PathBuf,
    pub summary: PathBuf,
    pub provenance: PathBuf,
}

struct Outputs {
    csv: String,
    summary: String,
    field: Option<Arc<ValueField>>,
}

/// SHA-256 over the mode, the configuration without its output directory,
/// and the bytes of any loaded value field.
pub fn config_hash(mode: Mode, cfg: &ExperimentConfig, field_bytes: Option<&[u8]>) -> String {
    let mut canonical = cfg.clone();
    canonical.output.dir = None;
    let mut h = Sha256::new();
    h.update(mode.name().as_bytes());
    h.update([0u8]);
    h.update(serde_json::to_vec(&canonical).expect("config serializes"));
    if let Some(bytes) = field_bytes {
        h.update([1u8]);
        h.update(Sha256::digest(bytes));
    }
    hex::encode(h.finalize())
}

pub fn run_experiment(mode: Mode, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, AppError> {
    let started = Instant::now();
    let field_bytes = opts.load_field.as_deref().map(fs::read).transpose()?;
    let loaded = match &opts.load_field {
        Some(path) => Some(Arc::new(load_field(path)?)),
        None => None,
    };
    let hash = config_hash(mode, cfg, field_bytes.as_deref());
    log::info!("running {} (config {hash})", mode.name());

    let out = match mode {
        Mode::KnownA => known_a(cfg)?,
        Mode::Bayes => bayes(cfg, loaded)?,
        Mode::RegretProfile => regret_profile(cfg, loaded)?,
        Mode::Minimax => minimax(cfg)?,
        Mode::Extend => extend(cfg, loaded)?,
    };

    if let (Some(path), Some(field)) = (&opts.save_field, &out.field) {
        save_field(field, path)?;
    } else if opts.save_field.is_some() {
        log::warn!("--save-field ignored: mode {} produced no value field", mode.name());
    }

    let dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("agnoctl-out"));
    fs::create_dir_all(&dir)?;
    let results_csv = dir.join("results.csv");
    let summary = dir.join("summary.txt");
    let provenance = dir.join("provenance.json");
    fs::write(&results_csv, format!("# config_hash: {hash}\n{}", out.csv))?;
    fs::write(&summary, format!("config_hash: {hash}\nmode: {}\n{}", mode.name(), out.summary))?;
    write_provenance(&provenance, mode, cfg, &hash, opts, started)?;
    Ok(RunReport {
        config_hash: hash,
        results_csv,
        summary,
        provenance,
    })
}

#[derive(Serialize)]
struct Provenance<'a> {
    config_hash: &'a str,
    mode: Mode,
    config: &'a ExperimentConfig,
    master_seed: u64,
    load_field: Option<String>,
    save_field: Option<String>,
    agnoctl_version: &'static str,
    core_version: &'static str,
    field_scheme_version: u32,
    threads: usize,
    wall_time_seconds: f64,
}

fn write_provenance(
    path: &Path,
    mode: Mode,
    cfg: &ExperimentConfig,
    hash: &str,
    opts: &RunOptions,
    started: Instant,
) -> Result<(), AppError> {
    let record = Provenance {
        config_hash: hash,
        mode,
        config: cfg,
        master_seed: cfg.mc.seed,
        load_field: opts.load_field.as_ref().map(|p| p.display().to_string()),
        save_field: opts.save_field.as_ref().map(|p| p.display().to_string()),
        agnoctl_version: env!("CARGO_PKG_VERSION"),
        core_version: agnostic_core::VERSION,
        field_scheme_version: agnostic_core::bellman::SCHEME_VERSION,
        threads: rayon::current_num_threads(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&record).map_err(|e| AppError::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn known_a(cfg: &ExperimentConfig) -> Result<Outputs, AppError> {
    let sc = cfg.scenario()?;
    let mc = cfg.mc_params()?;
    let partition = mc.partition(sc.horizon)?;
    let mut csv = String::from("a,closed_form,mc_mean,mc_stderr\n");
    let mut summary = String::new();
    for a in cfg.net()? {
        let exact = known_a_expected_cost(&ProblemSpec::new(a, sc.horizon, sc.q0)?)?;
        let est = estimate_cost(&Strategy::KnownA(a), a, &partition, sc.q0, mc.n_paths, mc.seed)?;
        let _ = writeln!(csv, "{a},{exact},{},{}", est.mean, est.std_error);
        let z = (est.mean - exact) / est.std_error;
        let _ = writeln!(
            summary,
            "a = {a}: closed form {exact}, Monte Carlo {} ± {} ({z:.2} standard errors, {} blow-ups)",
            est.mean, est.std_error, est.blowups
        );
    }
    Ok(Outputs {
        csv,
        summary,
        field: None,
    })
}

fn solve_or_load(cfg: &ExperimentConfig, loaded: Option<Arc<ValueField>>) -> Result<Arc<ValueField>, AppError> {
    match loaded {
        Some(f) => Ok(f),
        None => Ok(solve_bellman_shared(&cfg.prior()?, &cfg.grid()?)?),
    }
}

fn bayes(cfg: &ExperimentConfig, loaded: Option<Arc<ValueField>>) -> Result<Outputs, AppError> {
    let sc = cfg.scenario()?;
    let mc = cfg.mc_params()?;
    let field = solve_or_load(cfg, loaded)?;
    if (field.horizon() - sc.horizon).abs() > 1e-12 {
        return Err(AppError::Config(format!(
            "value field horizon {} differs from problem.horizon {}",
            field.horizon(),
            sc.horizon
        )));
    }
    let strategy = Strategy::bayes(field.clone());
    let partition = mc.partition(sc.horizon)?;
    let mut csv = String::from("a,prior_weight,ecost,stderr,known_cost\n");
    let mut prior_cost = 0.0;
    for atom in field.prior().atoms() {
        let est = estimate_cost(&strategy, atom.a, &partition, sc.q0, mc.n_paths, mc.seed)?;
        let known = sc.known_cost(atom.a)?;
        prior_cost += atom.p * est.mean;
        let _ = writeln!(csv, "{},{},{},{},{known}", atom.a, atom.p, est.mean, est.std_error);
    }
    let value = bayes_value(&field, sc.q0)?;
    let report = field.report();
    let summary = format!(
        "prior:\n{}value S(q0, 0, 0, 0): {value}\nMonte Carlo prior cost: {prior_cost}\n\
         floored interior nodes: {} of {}\nclamped controls: {}\n",
        field.prior().to_text(),
        report.floored_interior,
        report.interior_updates,
        report.clamped_controls
    );
    Ok(Outputs {
        csv,
        summary,
        field: Some(field),
    })
}

fn resolve_strategy(cfg: &ExperimentConfig, loaded: Option<Arc<ValueField>>) -> Result<(Strategy, Option<Arc<ValueField>>), AppError> {
    let need_a = || {
        cfg.strategy
            .a
            .ok_or_else(|| AppError::Config(format!("strategy.kind = {} needs strategy.a", cfg.strategy.kind)))
    };
    match cfg.strategy.kind.as_str() {
        "bayes" => {
            let field = solve_or_load(cfg, loaded)?;
            Ok((Strategy::bayes(field.clone()), Some(field)))
        }
        "known-a" => Ok((Strategy::KnownA(need_a()?), None)),
        "certainty-equivalent" => Ok((Strategy::certainty_equivalent(cfg.prior()?), None)),
        "zero" => Ok((Strategy::Zero, None)),
        other => Err(AppError::Config(format!("unknown strategy kind '{other}'"))),
    }
}

fn profile_summary(strategy: &Strategy, sup: f64, argmax: &[f64], profile: &[RegretEstimate]) -> String {
    let blowups: usize = profile.iter().map(|r| r.cost.blowups).sum();
    format!(
        "strategy: {}\nsup regret: {sup}\nargmax: {argmax:?}\nnet points: {}\nblow-ups: {blowups}\n",
        strategy.label(),
        profile.len()
    )
}

fn regret_profile(cfg: &ExperimentConfig, loaded: Option<Arc<ValueField>>) -> Result<Outputs, AppError> {
    let net = cfg.bounded_net()?;
    let (strategy, field) = resolve_strategy(cfg, loaded)?;
    let worst = worst_case_regret(&strategy, &net, cfg.regret_kind()?, &cfg.scenario()?, &cfg.mc_params()?)?;
    let mut csv = Vec::new();
    write_profile_csv(&worst.profile, &worst.argmax, &mut csv)?;
    Ok(Outputs {
        csv: String::from_utf8(csv).expect("ascii csv"),
        summary: profile_summary(&strategy, worst.sup, &worst.argmax, &worst.profile),
        field,
    })
}

fn minimax(cfg: &ExperimentConfig) -> Result<Outputs, AppError> {
    let net = cfg.bounded_net()?;
    let sol = minimax_prior_search(&net, cfg.regret_kind()?, &cfg.scenario()?, &cfg.minimax_config()?)?;
    let mut csv = Vec::new();
    sol.write_profile_csv(&mut csv)?;
    let field = match &sol.strategy {
        Strategy::BayesField(f) => Some(f.clone()),
        _ => None,
    };
    Ok(Outputs {
        csv: String::from_utf8(csv).expect("ascii csv"),
        summary: sol.report_text(),
        field,
    })
}

fn extend(cfg: &ExperimentConfig, loaded: Option<Arc<ValueField>>) -> Result<Outputs, AppError> {
    let sc = cfg.scenario()?;
    let mc = cfg.mc_params()?;
    let params = cfg.extension_params()?;
    let (inner, field) = resolve_strategy(cfg, loaded)?;
    let strategy = extend_strategy(inner, params)?;
    let partition = Partition::with_step(sc.horizon, mc.dt)?;
    let mut csv = String::from("a,ecost,stderr,known_cost,ratio,switched_fraction,median_switch_time\n");
    for a in cfg.net()? {
        let batch = run_paths(&strategy, a, &partition, sc.q0, mc.n_paths, mc.seed)?;
        let est = batch.estimate();
        let known = sc.known_cost(a)?;
        let mut times = batch.switch_times.clone();
        times.sort_by(f64::total_cmp);
        let median = if times.is_empty() {
            String::new()
        } else {
            times[times.len() / 2].to_string()
        };
        let _ = writeln!(
            csv,
            "{a},{},{},{known},{},{},{median}",
            est.mean,
            est.std_error,
            est.mean / known,
            batch.switched_paths as f64 / mc.n_paths as f64
        );
    }
    let summary = format!("strategy: {}\nparameters: {params:?}\n", strategy.label());
    Ok(Outputs { csv, summary, field })
}
