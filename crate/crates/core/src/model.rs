//! Delivery domain objects, scenario configuration and order files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::SweepSpec;
use crate::geo::{GeoError, GeoPoint, TravelConfig, TravelProvider};
use crate::impact::FleetKind;
use crate::synthgen::GeneratorConfig;
use crate::theory::TheoryConfig;
use crate::Timestamp;

/// Column layout of order files.
pub const ORDER_HEADER: [&str; 7] = [
    "id",
    "vendor_id",
    "vendor_lat",
    "vendor_lon",
    "cust_lat",
    "cust_lon",
    "order_epoch_s",
];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("order file line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate order id {0:?}")]
    DuplicateId(String),
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Travel(#[from] GeoError),
}

/// One delivery request: pick up at the vendor, drop at the customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: String,
    pub vendor_id: String,
    pub vendor_loc: GeoPoint,
    pub customer_loc: GeoPoint,
    /// Order time.
    pub t_o: Timestamp,
    /// Ready-for-pickup time, `t_o + T_p`.
    pub t_r: Timestamp,
    /// Pickup time, set when served.
    pub t_p: Option<Timestamp>,
    /// Delivery time, set when served.
    pub t_d: Option<Timestamp>,
}

impl Order {
    pub fn new(
        id: impl Into<String>,
        vendor_id: impl Into<String>,
        vendor_loc: GeoPoint,
        customer_loc: GeoPoint,
        t_o: Timestamp,
        preparation: Timestamp,
    ) -> Self {
        Self {
            id: id.into(),
            vendor_id: vendor_id.into(),
            vendor_loc,
            customer_loc,
            t_o,
            t_r: t_o + preparation,
            t_p: None,
            t_d: None,
        }
    }

    /// Pickup delay, `t_p - t_r`, once picked up.
    pub fn pud(&self) -> Option<Timestamp> {
        self.t_p.map(|t| t - self.t_r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vendor {
    pub id: String,
    pub loc: GeoPoint,
    /// Orders per minute.
    pub popularity: f64,
}

/// A repositioning trip that has been scheduled but not yet settled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepositionLeg {
    pub from: GeoPoint,
    pub to: GeoPoint,
    /// When the vehicle became idle at `from`.
    pub idle_since: Timestamp,
    pub depart: Timestamp,
    pub arrive: Timestamp,
    pub distance_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    /// Last known location (sigma).
    pub lkc_loc: GeoPoint,
    /// Last known time (tau).
    pub lkc_time: Timestamp,
    pub mileage: f64,
    pub generated_at: Timestamp,
    pub repositioned_last: bool,
    /// True once the vehicle has delivered and not been repositioned since.
    pub awaiting_reposition: bool,
    pub pending_leg: Option<RepositionLeg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundlingMode {
    /// Vendors within `d_v` of each other may be bundled.
    #[default]
    Radius,
    /// Only orders from the same vendor id may be bundled.
    SameVendor,
}

fn default_prep() -> Timestamp {
    300
}

fn default_rrl() -> usize {
    10
}

/// Scenario file contents. Durations are seconds, distances km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "T_B")]
    pub batch_duration: Timestamp,
    #[serde(rename = "delta_pud")]
    pub max_pickup_delay: Timestamp,
    pub k: usize,
    pub d_v: f64,
    pub d_c: f64,
    #[serde(rename = "T_p", default = "default_prep")]
    pub preparation_time: Timestamp,
    #[serde(rename = "T_R")]
    pub reposition_threshold: Timestamp,
    #[serde(rename = "T_W")]
    pub reposition_wait: Timestamp,
    #[serde(default)]
    pub travel: TravelConfig,
    #[serde(default)]
    pub rng_seed: u64,
    pub horizon: Timestamp,
    #[serde(default)]
    pub bundling_mode: BundlingMode,
    #[serde(default = "default_rrl")]
    pub rrl_count: usize,
    #[serde(default)]
    pub fleet_kind: FleetKind,
    /// Fraction of orders kept after random thinning.
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheoryConfig>,
}

fn default_density() -> f64 {
    1.0
}

impl ScenarioConfig {
    /// The default synthetic city: 20 vendors, about 5,000 orders over one day.
    pub fn default_synthetic() -> Self {
        Self {
            batch_duration: 600,
            max_pickup_delay: 600,
            k: 4,
            d_v: 1.0,
            d_c: 2.0,
            preparation_time: 300,
            reposition_threshold: 600,
            reposition_wait: 900,
            travel: TravelConfig::default(),
            rng_seed: 42,
            horizon: 86_400,
            bundling_mode: BundlingMode::Radius,
            rrl_count: 10,
            fleet_kind: FleetKind::Motorcycle,
            density: 1.0,
            orders_path: None,
            generator: Some(GeneratorConfig::default()),
            sweep: None,
            theory: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.batch_duration <= 0 {
            return bad(format!("T_B must be positive, got {}", self.batch_duration));
        }
        for (name, v) in [
            ("delta_pud", self.max_pickup_delay),
            ("T_p", self.preparation_time),
            ("T_R", self.reposition_threshold),
            ("T_W", self.reposition_wait),
            ("horizon", self.horizon),
        ] {
            if v < 0 {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if !(self.d_v > 0.0 && self.d_c > 0.0) {
            return bad(format!("d_v and d_c must be > 0, got {} and {}", self.d_v, self.d_c));
        }
        if self.rrl_count == 0 {
            return bad("rrl_count must be >= 1 (empty repositioning set)".into());
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must lie in (0, 1], got {}", self.density));
        }
        if self.orders_path.is_none() && self.generator.is_none() {
            return bad("either orders_path or a [generator] section is required".into());
        }
        if let Some(g) = &self.generator {
            g.validate().map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
        }
        if let Some(s) = &self.sweep {
            s.validate().map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
        }
        TravelProvider::from_config(&self.travel)?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative order files are resolved against the scenario file
        if let (Some(p), Some(dir)) = (&cfg.orders_path, path.parent()) {
            if p.is_relative() {
                cfg.orders_path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Whether the pickup-delay guarantee applies (`T_B <= T_p + delta_pud`).
    pub fn pud_guaranteed(&self) -> bool {
        self.batch_duration <= self.preparation_time + self.max_pickup_delay
    }
}

/// Aggregate outputs of one simulation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n_orders: usize,
    pub n_bundles: usize,
    pub fleet_size: usize,
    pub total_mileage: f64,
    pub delivery_mileage: f64,
    pub service_mileage: f64,
    pub approach_mileage: f64,
    pub reposition_mileage: f64,
    pub starting_mileage_penalty: f64,
    /// Starting mileage charged per generated vehicle.
    pub m_s: f64,
    /// Sum of solo trip lengths over all orders.
    pub solo_mileage: f64,
    pub avg_pud: f64,
    pub max_pud: Timestamp,
    pub avg_delivery_delay: f64,
    pub bundled_fraction: f64,
    /// Mean of `1 - d_b / d_o` over multi-order bundles.
    pub mean_bundle_saving: f64,
    /// Index = bundle size, value = number of bundles of that size.
    pub bundle_size_histogram: Vec<usize>,
    pub n_repositionings: usize,
    /// (orders in batch, seconds spent bundling and dispatching).
    #[serde(skip)]
    pub batch_compute: Vec<(usize, f64)>,
}

impl RunMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, line: u64) -> Result<&'a str, ModelError> {
    rec.get(i).map(str::trim).ok_or(ModelError::MalformedRow {
        line,
        reason: format!("missing field {}", ORDER_HEADER[i]),
    })
}

fn parse_num<T: std::str::FromStr>(s: &str, name: &str, line: u64) -> Result<T, ModelError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| ModelError::MalformedRow {
        line,
        reason: format!("{name} {s:?}: {e}"),
    })
}

/// Reads an order file and returns orders sorted by `(t_o, id)` with `t_r = t_o + preparation`.
pub fn ingest_orders(path: &Path, preparation: Timestamp) -> Result<Vec<Order>, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_orders(&text, preparation)
}

pub fn parse_orders(text: &str, preparation: Timestamp) -> Result<Vec<Order>, ModelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| ModelError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().map(str::trim).ne(ORDER_HEADER.iter().copied()) {
        return Err(ModelError::MalformedRow {
            line: 1,
            reason: format!("expected header {}", ORDER_HEADER.join(",")),
        });
    }
    let mut seen = HashSet::new();
    let mut orders = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ModelError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != ORDER_HEADER.len() {
            return Err(ModelError::MalformedRow {
                line,
                reason: format!("expected {} fields, got {}", ORDER_HEADER.len(), rec.len()),
            });
        }
        let id = field(&rec, 0, line)?.to_string();
        let vendor_id = field(&rec, 1, line)?.to_string();
        let mut nums = [0.0f64; 4];
        for (k, slot) in nums.iter_mut().enumerate() {
            *slot = parse_num(field(&rec, 2 + k, line)?, ORDER_HEADER[2 + k], line)?;
        }
        let t_o: Timestamp = parse_num(field(&rec, 6, line)?, ORDER_HEADER[6], line)?;
        let loc = |lat, lon| {
            GeoPoint::new(lat, lon).map_err(|e| ModelError::MalformedRow {
                line,
                reason: e.to_string(),
            })
        };
        let vendor_loc = loc(nums[0], nums[1])?;
        let customer_loc = loc(nums[2], nums[3])?;
        if !seen.insert(id.clone()) {
            return Err(ModelError::DuplicateId(id));
        }
        orders.push(Order::new(id, vendor_id, vendor_loc, customer_loc, t_o, preparation));
    }
    orders.sort_by(|a, b| a.t_o.cmp(&b.t_o).then_with(|| a.id.cmp(&b.id)));
    Ok(orders)
}

/// Serializes orders in the canonical order-file layout.
pub fn orders_to_csv(orders: &[Order]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ORDER_HEADER).expect("in-memory write");
    for o in orders {
        w.write_record([
            o.id.clone(),
            o.vendor_id.clone(),
            o.vendor_loc.lat.to_string(),
            o.vendor_loc.lon.to_string(),
            o.customer_loc.lat.to_string(),
            o.customer_loc.lon.to_string(),
            o.t_o.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn write_orders(path: &Path, orders: &[Order]) -> Result<(), ModelError> {
    let mut f = fs::File::create(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(orders_to_csv(orders).as_bytes())
        .map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Delivery time of each order under immediate solo service: `t_r + travel time`.
pub fn baseline_unbundled_times(
    orders: &[Order],
    travel: &TravelProvider,
) -> Result<HashMap<String, Timestamp>, GeoError> {
    orders
        .iter()
        .map(|o| {
            let tt = travel.travel_time(&o.vendor_loc, &o.customer_loc, o.t_r)?;
            Ok((o.id.clone(), o.t_r + tt))
        })
        .collect()
}

/// Vendors seen in an order stream, with popularity estimated from order counts.
pub fn vendors_from_orders(orders: &[Order], span_secs: Timestamp) -> Vec<Vendor> {
    let mut acc: BTreeMap<&str, (GeoPoint, usize)> = BTreeMap::new();
    for o in orders {
        acc.entry(&o.vendor_id).or_insert((o.vendor_loc, 0)).1 += 1;
    }
    let minutes = (span_secs.max(60)) as f64 / 60.0;
    acc.into_iter()
        .map(|(id, (loc, n))| Vendor {
            id: id.to_string(),
            loc,
            popularity: n as f64 / minutes,
        })
        .collect()
}
