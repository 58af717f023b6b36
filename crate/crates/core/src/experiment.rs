//! Scenario runs, parameter sweeps and theory-versus-simulation comparison.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{run_simulation, DispatchError, SimOptions, SimulationResult};
use crate::geo::{straight_line_distance, GeoError, GeoPoint, TravelProvider};
use crate::impact::{lifecycle_emissions, EmissionFactors, FleetKind, ImpactError, Species};
use crate::model::{ingest_orders, BundlingMode, ModelError, Order, RunMetrics, ScenarioConfig, Vendor};
use crate::synthgen::{generate_scenario, thin_orders, SynthError};
use crate::theory::{calibrate, r_squared, CalibrationData, Calibration, Popularity, Theory, TheoryError, TheoryParams};
use crate::Timestamp;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Impact(#[from] ImpactError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Travel(#[from] GeoError),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("sweep file: {0}")]
    SweepFile(String),
    #[error("theory comparison needs {0}")]
    Regime(String),
}

/// The `[sweep]` block: a grid over batch duration, pickup delay, bundle size
/// and order density, each cell repeated with derived seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(rename = "T_B_min")]
    pub batch_minutes: Vec<f64>,
    #[serde(default)]
    pub pud_min: Vec<f64>,
    /// Ties the pickup-delay threshold to the batch duration, replacing the
    /// `pud_min` axis.
    #[serde(default)]
    pub pud_equals_batch: bool,
    pub k: Vec<usize>,
    #[serde(default = "one_density")]
    pub density: Vec<f64>,
    #[serde(default = "one_rep")]
    pub repetitions: usize,
    /// Worker threads; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn one_density() -> Vec<f64> {
    vec![1.0]
}

fn one_rep() -> usize {
    1
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Sweep(m));
        let no_pud = self.pud_min.is_empty() && !self.pud_equals_batch;
        if self.batch_minutes.is_empty() || no_pud || self.k.is_empty() || self.density.is_empty() {
            return bad("every grid axis needs at least one value".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if let Some(t) = self.batch_minutes.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return bad(format!("T_B_min values must be > 0, got {t}"));
        }
        if let Some(p) = self.pud_min.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return bad(format!("pud_min values must be >= 0, got {p}"));
        }
        if self.k.contains(&0) {
            return bad("k values must be >= 1".into());
        }
        if let Some(d) = self.density.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return bad(format!("density values must lie in (0, 1], got {d}"));
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.batch_minutes.len() * self.pud_axis_len() * self.k.len() * self.density.len() * self.repetitions
    }

    fn pud_axis_len(&self) -> usize {
        if self.pud_equals_batch {
            1
        } else {
            self.pud_min.len()
        }
    }

    fn pud_at(&self, t_b: usize, pud: usize) -> f64 {
        if self.pud_equals_batch {
            self.batch_minutes[t_b]
        } else {
            self.pud_min[pud]
        }
    }
}

/// Seeds of repetition `rep`: (vendor layout, order stream, thinning).
pub fn repetition_seeds(base: u64, rep: usize) -> (u64, u64, u64) {
    let s = base.wrapping_add(rep as u64);
    (s, s ^ 0x5bd1_e995_0000_0001, s ^ 0x2545_f491_4f6c_dd1d)
}

fn minutes_to_secs(m: f64) -> Timestamp {
    (m * 60.0).round() as Timestamp
}

/// Vendors and the full order stream of repetition `rep`, before thinning.
pub fn scenario_orders(cfg: &ScenarioConfig, rep: usize) -> Result<(Vec<Vendor>, Vec<Order>), ExperimentError> {
    let (layout, stream, _) = repetition_seeds(cfg.rng_seed, rep);
    if let Some(path) = &cfg.orders_path {
        let orders = ingest_orders(path, cfg.preparation_time)?;
        let vendors = crate::model::vendors_from_orders(&orders, cfg.horizon);
        return Ok((vendors, orders));
    }
    let gen = cfg
        .generator
        .as_ref()
        .ok_or_else(|| ModelError::InvalidConfig("no orders_path and no [generator]".into()))?;
    Ok(generate_scenario(gen, cfg.horizon, cfg.preparation_time, layout, stream)?)
}

/// Impact-annotated result of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub fleet_kind: FleetKind,
    #[serde(flatten)]
    pub metrics: RunMetrics,
    pub co2_g_day: f64,
    pub nox_g_day: f64,
    pub voc_g_day: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn daily_emissions(
    cfg: &ScenarioConfig,
    factors: &EmissionFactors,
    m: &RunMetrics,
    species: Species,
) -> Result<f64, ImpactError> {
    let per_day = if cfg.horizon > 0 { 86_400.0 / cfg.horizon as f64 } else { 1.0 };
    lifecycle_emissions(factors, cfg.fleet_kind, m.fleet_size as f64, m.total_mileage * per_day, species)
}

pub fn report(cfg: &ScenarioConfig, factors: &EmissionFactors, m: RunMetrics) -> Result<RunReport, ExperimentError> {
    Ok(RunReport {
        fleet_kind: cfg.fleet_kind,
        co2_g_day: daily_emissions(cfg, factors, &m, Species::Co2)?,
        nox_g_day: daily_emissions(cfg, factors, &m, Species::Nox)?,
        voc_g_day: daily_emissions(cfg, factors, &m, Species::Voc)?,
        metrics: m,
    })
}

/// Generate or ingest, thin, simulate with the two-pass M_s, and attach emissions.
pub fn run(
    cfg: &ScenarioConfig,
    travel: &TravelProvider,
    factors: &EmissionFactors,
    opts: &SimOptions,
) -> Result<(RunReport, SimulationResult), ExperimentError> {
    let (_, orders) = scenario_orders(cfg, 0)?;
    let (_, _, thin_seed) = repetition_seeds(cfg.rng_seed, 0);
    let orders = thin_orders(&orders, cfg.density, thin_seed);
    let result = run_simulation(cfg, &orders, travel, opts)?;
    Ok((report(cfg, factors, result.metrics.clone())?, result))
}

/// Measured outputs of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub avg_delay_min: f64,
    pub mileage_km: f64,
    pub mileage_saved_frac: f64,
    pub fleet_size: usize,
    pub co2_g_day: f64,
    pub co2_saved_frac: f64,
    pub bundled_frac: f64,
    pub mu_saving: f64,
    pub delivery_saved_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub batch_min: f64,
    pub pud_min: f64,
    pub k: usize,
    pub density: f64,
    pub rep: usize,
    pub mode: BundlingMode,
    /// Unbundled reference cell used for the savings denominators.
    pub baseline: bool,
    pub outcome: Result<CellStats, String>,
}

pub const SWEEP_HEADER: &str = "T_B_min,pud_min,k,density,rep,avg_delay_min,mileage_km,mileage_saved_frac,fleet_size,co2_g_day,co2_saved_frac,bundled_frac,mu_saving,delivery_saved_frac,bundling_mode,status";

fn mode_name(m: BundlingMode) -> &'static str {
    match m {
        BundlingMode::Radius => "radius",
        BundlingMode::SameVendor => "same_vendor",
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{},{},{},", r.batch_min, r.pud_min, r.k, r.density, r.rep);
        match &r.outcome {
            Ok(c) => {
                let _ = write!(
                    s,
                    "{:.6},{:.6},{:.6},{},{:.3},{:.6},{:.6},{:.6},{:.6},{},{}",
                    c.avg_delay_min,
                    c.mileage_km,
                    c.mileage_saved_frac,
                    c.fleet_size,
                    c.co2_g_day,
                    c.co2_saved_frac,
                    c.bundled_frac,
                    c.mu_saving,
                    c.delivery_saved_frac,
                    mode_name(r.mode),
                    if r.baseline { "baseline" } else { "ok" }
                );
            }
            Err(e) => {
                let msg: String = e.chars().map(|c| if matches!(c, ',' | '\n' | '\r' | '"') { ' ' } else { c }).collect();
                let _ = write!(s, ",,,,,,,,,{},error: {msg}", mode_name(r.mode));
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy)]
struct Job {
    t_b: usize,
    pud: usize,
    k: Option<usize>,
    density: usize,
    rep: usize,
}

/// Runs every grid cell plus one unbundled baseline per (T_B, pud, density, rep).
///
/// Rows come out in grid order regardless of scheduling; cell failures are
/// recorded in-row and do not stop the sweep.
pub fn sweep(
    cfg: &ScenarioConfig,
    spec: &SweepSpec,
    travel: &TravelProvider,
    factors: &EmissionFactors,
) -> Result<Vec<SweepRow>, ExperimentError> {
    spec.validate()?;
    // order streams are shared by all cells of a repetition
    let streams: Vec<Result<Vec<Order>, String>> = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| scenario_orders(cfg, rep).map(|(_, o)| o).map_err(|e| e.to_string()))
        .collect();
    let mut jobs = Vec::new();
    for rep in 0..spec.repetitions {
        for density in 0..spec.density.len() {
            for t_b in 0..spec.batch_minutes.len() {
                for pud in 0..spec.pud_axis_len() {
                    jobs.push(Job { t_b, pud, k: None, density, rep });
                    for k in 0..spec.k.len() {
                        jobs.push(Job { t_b, pud, k: Some(k), density, rep });
                    }
                }
            }
        }
    }
    let cell = |j: &Job| -> Result<(RunMetrics, f64), String> {
        let orders = streams[j.rep].as_ref().map_err(Clone::clone)?;
        let (_, _, thin_seed) = repetition_seeds(cfg.rng_seed, j.rep);
        let orders = thin_orders(orders, spec.density[j.density], thin_seed);
        let mut c = cfg.clone();
        c.batch_duration = minutes_to_secs(spec.batch_minutes[j.t_b]);
        c.max_pickup_delay = minutes_to_secs(spec.pud_at(j.t_b, j.pud));
        c.k = j.k.map_or(1, |k| spec.k[k]);
        c.density = spec.density[j.density];
        if c.batch_duration <= 0 {
            return Err("T_B rounds to zero seconds".into());
        }
        let r = run_simulation(&c, &orders, travel, &SimOptions::default()).map_err(|e| e.to_string())?;
        let co2 = daily_emissions(&c, factors, &r.metrics, Species::Co2).map_err(|e| e.to_string())?;
        Ok((r.metrics, co2))
    };
    let run_all = || jobs.par_iter().map(cell).collect::<Vec<_>>();
    let outputs = match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ExperimentError::Sweep(e.to_string()))?
            .install(run_all),
        None => run_all(),
    };

    let mut rows = Vec::with_capacity(jobs.len());
    let mut base: Option<&Result<(RunMetrics, f64), String>> = None;
    for (j, out) in jobs.iter().zip(&outputs) {
        if j.k.is_none() {
            base = Some(out);
        }
        let outcome = match (out, base.expect("baseline precedes its cells")) {
            (Ok((m, co2)), Ok((bm, bco2))) => {
                let frac = |x: f64, b: f64| if b > 0.0 { 1.0 - x / b } else { 0.0 };
                Ok(CellStats {
                    avg_delay_min: m.avg_delivery_delay / 60.0,
                    mileage_km: m.total_mileage,
                    mileage_saved_frac: frac(m.total_mileage, bm.total_mileage),
                    fleet_size: m.fleet_size,
                    co2_g_day: *co2,
                    co2_saved_frac: frac(*co2, *bco2),
                    bundled_frac: m.bundled_fraction,
                    mu_saving: m.mean_bundle_saving,
                    delivery_saved_frac: frac(m.delivery_mileage, m.solo_mileage),
                })
            }
            (Err(e), _) => Err(e.clone()),
            (Ok(_), Err(e)) => Err(format!("baseline failed: {e}")),
        };
        rows.push(SweepRow {
            batch_min: spec.batch_minutes[j.t_b],
            pud_min: spec.pud_at(j.t_b, j.pud),
            k: j.k.map_or(1, |k| spec.k[k]),
            density: spec.density[j.density],
            rep: j.rep,
            mode: cfg.bundling_mode,
            baseline: j.k.is_none(),
            outcome,
        });
    }
    Ok(rows)
}

/// Parses sweep output back into rows.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| ExperimentError::SweepFile(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ExperimentError::SweepFile(format!("missing column {name}")))
    };
    let idx: Vec<usize> = SWEEP_HEADER.split(',').map(col).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ExperimentError::SweepFile(e.to_string()))?;
        let get = |i: usize| rec.get(idx[i]).unwrap_or("").trim();
        let num = |i: usize| -> Result<f64, ExperimentError> {
            get(i)
                .parse::<f64>()
                .map_err(|e| ExperimentError::SweepFile(format!("row {}: {} {:?}: {e}", line + 2, &headers[idx[i]], get(i))))
        };
        let status = get(15);
        let mode = match get(14) {
            "same_vendor" => BundlingMode::SameVendor,
            _ => BundlingMode::Radius,
        };
        let outcome = if let Some(msg) = status.strip_prefix("error: ") {
            Err(msg.to_string())
        } else {
            Ok(CellStats {
                avg_delay_min: num(5)?,
                mileage_km: num(6)?,
                mileage_saved_frac: num(7)?,
                fleet_size: num(8)? as usize,
                co2_g_day: num(9)?,
                co2_saved_frac: num(10)?,
                bundled_frac: num(11)?,
                mu_saving: num(12)?,
                delivery_saved_frac: num(13)?,
            })
        };
        rows.push(SweepRow {
            batch_min: num(0)?,
            pud_min: num(1)?,
            k: num(2)? as usize,
            density: num(3)?,
            rep: num(4)? as usize,
            mode,
            baseline: status == "baseline",
            outcome,
        });
    }
    Ok(rows)
}

/// Averages successful non-baseline rows over repetitions, one point per T_B.
pub fn calibration_data(rows: &[SweepRow]) -> CalibrationData {
    let mut groups: BTreeMap<i64, Vec<&CellStats>> = BTreeMap::new();
    let mut minutes = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.baseline) {
        if let Ok(c) = &r.outcome {
            let key = (r.batch_min * 1e6).round() as i64;
            minutes.insert(key, r.batch_min);
            groups.entry(key).or_default().push(c);
        }
    }
    let mut d = CalibrationData::default();
    for (key, cs) in groups {
        let mean = |f: fn(&CellStats) -> f64| cs.iter().map(|c| f(c)).sum::<f64>() / cs.len() as f64;
        d.delta_min.push(minutes[&key]);
        d.theta_min.push(mean(|c| c.avg_delay_min));
        let fb = mean(|c| c.bundled_frac);
        let dm = mean(|c| c.delivery_saved_frac);
        d.bundled_frac.push(fb);
        d.mu_saving.push(if fb > 0.0 { dm / fb } else { 0.0 });
        d.dm_saved_frac.push(dm);
        d.gm_saved_frac.push(mean(|c| c.mileage_saved_frac));
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonPoint {
    pub delta_min: f64,
    pub theta_min: f64,
    pub simulated_gm: f64,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub points: Vec<ComparisonPoint>,
    /// Absent when fewer than two points or constant observations.
    pub r2: Option<f64>,
    pub max_abs_deviation: f64,
    pub calibration: Option<Calibration>,
}

impl Comparison {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

/// Patience range over which the comparison is scored, minutes.
pub const THETA_RANGE: (f64, f64) = (1.0, 7.0);

/// Aligns simulated saved global mileage with Ω(θ).
///
/// Only sweeps run with `k = 2` in same-vendor mode are accepted. With
/// `recalibrate`, C_b, the μ and θ regressions and w_gm are refit first.
pub fn compare_theory(
    rows: &[SweepRow],
    params: &TheoryParams,
    popularity: Popularity,
    recalibrate: bool,
) -> Result<Comparison, ExperimentError> {
    let data_rows: Vec<&SweepRow> = rows.iter().filter(|r| !r.baseline).collect();
    if data_rows.is_empty() {
        return Err(ExperimentError::Regime("at least one non-baseline sweep row".into()));
    }
    if let Some(r) = data_rows.iter().find(|r| r.k != 2) {
        return Err(ExperimentError::Regime(format!(
            "k = 2 (the model covers pairs only), found k = {}",
            r.k
        )));
    }
    if data_rows.iter().any(|r| r.mode != BundlingMode::SameVendor) {
        return Err(ExperimentError::Regime("same-vendor bundling mode".into()));
    }
    let owned: Vec<SweepRow> = data_rows.into_iter().cloned().collect();
    let data = calibration_data(&owned);
    let base = Theory::with_popularity(params.clone(), popularity.clone())?;
    let calibration = if recalibrate { Some(calibrate(&data, &base)?) } else { None };
    let theory = match &calibration {
        Some(c) => Theory::with_popularity(c.params.clone(), popularity)?,
        None => base,
    };
    let mut points = Vec::new();
    for i in 0..data.delta_min.len() {
        let theta = data.theta_min[i];
        if !(THETA_RANGE.0..=THETA_RANGE.1).contains(&theta) {
            continue;
        }
        points.push(ComparisonPoint {
            delta_min: data.delta_min[i],
            theta_min: theta,
            simulated_gm: data.gm_saved_frac[i],
            omega: theory.omega(theta).ok(),
        });
    }
    let scored: Vec<(f64, f64)> = points.iter().filter_map(|p| Some((p.simulated_gm, p.omega?))).collect();
    let (obs, pred): (Vec<f64>, Vec<f64>) = scored.iter().copied().unzip();
    let r2 = if obs.len() >= 2 { r_squared(&obs, &pred) } else { None };
    Ok(Comparison {
        max_abs_deviation: scored.iter().map(|(o, p)| (o - p).abs()).fold(0.0, f64::max),
        r2,
        points,
        calibration,
    })
}

/// Cluster radius V at which the mean shareable area fraction
/// `s(1 - s/4)`, `s = (δ_c/V)²`, equals the observed share of same-vendor
/// customer pairs within `delta_c`. Each set is grouped by vendor separately.
/// `None` when no pair exists; clamped to `V >= δ_c`.
pub fn fit_cluster_radius(order_sets: &[Vec<Order>], delta_c: f64) -> Option<f64> {
    let (mut near, mut total) = (0u64, 0u64);
    for orders in order_sets {
        let mut by_vendor: HashMap<&str, Vec<&GeoPoint>> = HashMap::new();
        for o in orders {
            by_vendor.entry(o.vendor_id.as_str()).or_default().push(&o.customer_loc);
        }
        for pts in by_vendor.values() {
            for (i, a) in pts.iter().enumerate() {
                for b in &pts[i + 1..] {
                    total += 1;
                    if straight_line_distance(a, b) <= delta_c {
                        near += 1;
                    }
                }
            }
        }
    }
    if total == 0 || near == 0 {
        return None;
    }
    let q = near as f64 / total as f64;
    if q >= 0.75 {
        return Some(delta_c);
    }
    let s = 2.0 - 2.0 * (1.0 - q).sqrt();
    Some(delta_c / s.sqrt())
}

/// Theory inputs for a scenario.
///
/// A `[theory]` block is used as given. Otherwise δ_c = d_c, U is the
/// generator's catchment radius (or the largest vendor-customer distance for
/// ingested orders), V is fitted to the order geography and the popularity is
/// the observed vendor rates at `density`, pooled over `reps` repetitions.
pub fn scenario_theory(
    cfg: &ScenarioConfig,
    reps: usize,
    density: f64,
) -> Result<(TheoryParams, Popularity), ExperimentError> {
    if let Some(p) = &cfg.theory {
        let law = Theory::new(p.clone())?;
        return Ok((p.clone(), law.popularity));
    }
    let reps = if cfg.orders_path.is_some() { 1 } else { reps.max(1) };
    let mut rates = Vec::new();
    let mut sets = Vec::with_capacity(reps);
    for rep in 0..reps {
        let (vendors, orders) = scenario_orders(cfg, rep)?;
        rates.extend(vendors.iter().map(|v| v.popularity * density));
        sets.push(orders);
    }
    let mut p = TheoryParams {
        delta_c: cfg.d_c,
        ..TheoryParams::default()
    };
    p.u = match &cfg.generator {
        Some(g) => g.u_km,
        None => sets
            .iter()
            .flatten()
            .map(|o| straight_line_distance(&o.vendor_loc, &o.customer_loc))
            .fold(0.0, f64::max)
            .max(cfg.d_c),
    };
    p.v = fit_cluster_radius(&sets, cfg.d_c).unwrap_or(cfg.d_c);
    Ok((p, Popularity::Empirical(rates)))
}
