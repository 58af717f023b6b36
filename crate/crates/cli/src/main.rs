//! Command-line driver: single runs, sweeps, theory curves, theory comparison
//! and synthetic order generation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use bundling_core::dispatch::SimOptions;
use bundling_core::experiment::{
    self, compare_theory, parse_sweep_csv, scenario_orders, scenario_theory, sweep_csv,
    SweepSpec,
};
use bundling_core::geo::TravelProvider;
use bundling_core::impact::EmissionFactors;
use bundling_core::model::{orders_to_csv, ScenarioConfig};
use bundling_core::synthgen::thin_orders;
use bundling_core::theory::{theory_curve_csv, CliqueNormalizer, Theory, TheoryParams};

#[derive(Parser)]
#[command(name = "bundling", version, about = "Order bundling and batch dispatch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario TOML; the built-in synthetic city when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a scenario field, e.g. `--set T_B=300` or `--set generator.n_vendors=40`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write metrics.json and orders_log.csv.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Also write each batch's shareability graph here.
        #[arg(long)]
        graph_dir: Option<PathBuf>,
        /// Emission factor TOML replacing the built-in table.
        #[arg(long)]
        factors: Option<PathBuf>,
    },
    /// Run a parameter grid and write one CSV row per cell and repetition.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long = "T_B_min", value_delimiter = ',')]
        batch_minutes: Option<Vec<f64>>,
        #[arg(long = "pud_min", value_delimiter = ',')]
        pud_min: Option<Vec<f64>>,
        /// Set the pickup-delay threshold equal to each batch duration.
        #[arg(long, conflicts_with = "pud_min")]
        pud_equals_batch: bool,
        #[arg(long = "k", value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long = "density", value_delimiter = ',')]
        density: Option<Vec<f64>>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        factors: Option<PathBuf>,
    },
    /// Write the model curve (F_S, F_B, F_dm, F_gm, Ω) over a patience grid.
    Theory {
        /// TOML with theory constants; defaults otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Patience values in minutes.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])]
        theta: Vec<f64>,
    },
    /// Compare a k = 2 same-vendor sweep with the model and report R².
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Sweep CSV produced by `sweep`.
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Use the scenario's theory constants as they are.
        #[arg(long)]
        no_recalibrate: bool,
        /// Exit with status 4 when R² is below this value.
        #[arg(long)]
        min_r2: Option<f64>,
        /// Clique-size normaliser, overriding the theory constants.
        #[arg(long, value_enum)]
        normalizer: Option<NormalizerArg>,
    },
    /// Write the scenario's (thinned) synthetic order stream as CSV.
    Gen {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// Repetition index; selects derived seeds as in `sweep`.
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Check(_) => 4,
        }
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Files written by a command; removed again unless the command succeeds.
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn dir(&mut self, dir: &Path) -> anyhow::Result<()> {
        if !dir.exists() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            self.dirs.push(dir.to_path_buf());
        }
        Ok(())
    }

    fn write(&mut self, path: &Path, contents: &str) -> anyhow::Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            self.dir(parent)?;
        }
        self.written.push(path.to_path_buf());
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir_all(d);
        }
    }
}

/// Parses an override value as a TOML literal, falling back to a string.
fn toml_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, spec: &str) -> anyhow::Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override {spec:?} is not KEY=VALUE"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for p in path {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override {key:?}: {p} is not a table"))?;
    }
    table.insert(last.to_string(), toml_literal(raw.trim()));
    Ok(())
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let (mut table, base) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(config_err)?;
            let t: toml::Table = toml::from_str(&text)
                .with_context(|| format!("{}", path.display()))
                .map_err(config_err)?;
            (t, path.parent().map(Path::to_path_buf))
        }
        None => {
            let text = ScenarioConfig::default_synthetic().to_toml_string();
            (toml::from_str(&text).expect("default scenario round-trips"), None)
        }
    };
    for o in &args.overrides {
        apply_override(&mut table, o).map_err(config_err)?;
    }
    let text = toml::to_string(&table).map_err(config_err)?;
    let mut cfg = ScenarioConfig::from_toml_str(&text).map_err(config_err)?;
    if let (Some(p), Some(dir)) = (&cfg.orders_path, base) {
        if p.is_relative() {
            cfg.orders_path = Some(dir.join(p));
        }
    }
    Ok(cfg)
}

fn load_factors(path: Option<&Path>) -> Result<EmissionFactors, Failure> {
    match path {
        Some(p) => EmissionFactors::load(p).map_err(config_err),
        None => Ok(EmissionFactors::default()),
    }
}

fn travel_for(cfg: &ScenarioConfig) -> Result<TravelProvider, Failure> {
    TravelProvider::from_config(&cfg.travel).map_err(config_err)
}

fn save_travel_cache(cfg: &ScenarioConfig, travel: &TravelProvider) -> Result<(), Failure> {
    if let Some(path) = &cfg.travel.cache_file {
        travel.save_cache_file(path).map_err(runtime_err)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut outputs = Outputs::default();
    match cli.command {
        Command::Run {
            scenario,
            out,
            graph_dir,
            factors,
        } => {
            let cfg = load_scenario(&scenario)?;
            let factors = load_factors(factors.as_deref())?;
            let travel = travel_for(&cfg)?;
            outputs.dir(&out).map_err(runtime_err)?;
            if let Some(g) = &graph_dir {
                outputs.dir(g).map_err(runtime_err)?;
            }
            let opts = SimOptions { graph_dir };
            let (report, result) = experiment::run(&cfg, &travel, &factors, &opts).map_err(runtime_err)?;
            outputs.write(&out.join("metrics.json"), &(report.to_json() + "\n")).map_err(runtime_err)?;
            outputs.write(&out.join("orders_log.csv"), &result.order_log_csv()).map_err(runtime_err)?;
            save_travel_cache(&cfg, &travel)?;
        }
        Command::Sweep {
            scenario,
            out,
            batch_minutes,
            pud_min,
            pud_equals_batch,
            k,
            density,
            repetitions,
            workers,
            factors,
        } => {
            let cfg = load_scenario(&scenario)?;
            let factors = load_factors(factors.as_deref())?;
            let mut spec = cfg.sweep.clone().unwrap_or(SweepSpec {
                batch_minutes: vec![cfg.batch_duration as f64 / 60.0],
                pud_min: vec![cfg.max_pickup_delay as f64 / 60.0],
                pud_equals_batch: false,
                k: vec![cfg.k],
                density: vec![cfg.density],
                repetitions: 1,
                workers: None,
            });
            if let Some(v) = batch_minutes {
                spec.batch_minutes = v;
            }
            if let Some(v) = pud_min {
                spec.pud_min = v;
                spec.pud_equals_batch = false;
            }
            if pud_equals_batch {
                spec.pud_equals_batch = true;
            }
            if let Some(v) = k {
                spec.k = v;
            }
            if let Some(v) = density {
                spec.density = v;
            }
            if let Some(v) = repetitions {
                spec.repetitions = v;
            }
            if workers.is_some() {
                spec.workers = workers;
            }
            spec.validate().map_err(config_err)?;
            let travel = travel_for(&cfg)?;
            let rows = experiment::sweep(&cfg, &spec, &travel, &factors).map_err(runtime_err)?;
            outputs.write(&out, &sweep_csv(&rows)).map_err(runtime_err)?;
            save_travel_cache(&cfg, &travel)?;
        }
        Command::Theory { params, out, theta } => {
            let p: TheoryParams = match &params {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))
                        .map_err(config_err)?;
                    toml::from_str(&text)
                        .with_context(|| format!("{}", path.display()))
                        .map_err(config_err)?
                }
                None => TheoryParams::default(),
            };
            let theory = Theory::new(p).map_err(config_err)?;
            let csv = theory_curve_csv(&theory, &theta).map_err(runtime_err)?;
            outputs.write(&out, &csv).map_err(runtime_err)?;
        }
        Command::Compare {
            scenario,
            sweep,
            out,
            no_recalibrate,
            min_r2,
            normalizer,
        } => {
            let cfg = load_scenario(&scenario)?;
            let text = fs::read_to_string(&sweep)
                .with_context(|| format!("reading {}", sweep.display()))
                .map_err(config_err)?;
            let rows = parse_sweep_csv(&text).map_err(config_err)?;
            let data_rows = rows.iter().filter(|r| !r.baseline);
            let reps = data_rows.clone().map(|r| r.rep + 1).max().unwrap_or(1);
            let density = data_rows.map(|r| r.density).next().unwrap_or(1.0);
            let (mut params, popularity) = scenario_theory(&cfg, reps, density).map_err(|e| match e {
                experiment::ExperimentError::Theory(_) => config_err(e),
                other => runtime_err(other),
            })?;
            if let Some(n) = normalizer {
                params.normalizer = n.into();
            }
            let cmp = compare_theory(&rows, &params, popularity, !no_recalibrate).map_err(|e| match e {
                experiment::ExperimentError::Regime(_) => config_err(e),
                other => runtime_err(other),
            })?;
            outputs.write(&out, &(cmp.to_json() + "\n")).map_err(runtime_err)?;
            match (cmp.r2, min_r2) {
                (Some(r2), Some(min)) if r2 < min => {
                    outputs.done = true;
                    return Err(Failure::Check(format!("R² = {r2:.4} is below {min}")));
                }
                (None, Some(_)) => {
                    outputs.done = true;
                    return Err(Failure::Check("R² is undefined for this sweep".into()));
                }
                _ => {}
            }
        }
        Command::Gen { scenario, out, rep } => {
            let cfg = load_scenario(&scenario)?;
            let (_, orders) = scenario_orders(&cfg, rep).map_err(runtime_err)?;
            let (_, _, thin_seed) = experiment::repetition_seeds(cfg.rng_seed, rep);
            let orders = thin_orders(&orders, cfg.density, thin_seed);
            outputs.write(&out, &orders_to_csv(&orders)).map_err(runtime_err)?;
        }
    }
    outputs.done = true;
    Ok(())
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum NormalizerArg {
    Printed,
    Exact,
}

impl From<NormalizerArg> for CliqueNormalizer {
    fn from(n: NormalizerArg) -> Self {
        match n {
            NormalizerArg::Printed => CliqueNormalizer::Printed,
            NormalizerArg::Exact => CliqueNormalizer::Exact,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) => eprintln!("configuration error: {e:#}"),
                Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Check(m) => eprintln!("check failed: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_literals() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "T_B=300").unwrap();
        apply_override(&mut t, "generator.n_vendors=40").unwrap();
        apply_override(&mut t, "bundling_mode=same_vendor").unwrap();
        assert_eq!(t["T_B"].as_integer(), Some(300));
        assert_eq!(t["generator"]["n_vendors"].as_integer(), Some(40));
        assert_eq!(t["bundling_mode"].as_str(), Some("same_vendor"));
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "T_B.x=1").is_err());
    }
}

