//! Synthetic order streams: heavy-tailed vendor popularity, Poisson arrivals
//! and disk-shaped customer catchments with optional clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{straight_line_distance, GeoPoint};
use crate::model::{Order, Vendor};
use crate::theory::{PopularityLaw, TheoryError, TheoryParams};
use crate::Timestamp;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator setting: {0}")]
    Invalid(String),
    #[error("clustering coefficient needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }
}

/// The `[generator]` block of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// City rectangle in which vendors are placed.
    pub bbox: BBox,
    pub n_vendors: usize,
    /// Served-area radius around each vendor, km.
    pub u_km: f64,
    /// Cluster radius around an existing customer, km.
    pub v_km: f64,
    /// Probability that a customer is placed near an earlier customer of the same vendor.
    pub cluster_mix: f64,
    /// Rescales sampled popularities to this expected daily total; raw draws when absent.
    pub orders_per_day: Option<f64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            bbox: BBox {
                min_lat: 25.15,
                min_lon: 55.22,
                max_lat: 25.25,
                max_lon: 55.32,
            },
            n_vendors: 20,
            u_km: 3.0,
            v_km: 2.0,
            cluster_mix: 0.5,
            orders_per_day: Some(5000.0),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let b = &self.bbox;
        let coords_ok = GeoPoint::new(b.min_lat, b.min_lon).is_ok() && GeoPoint::new(b.max_lat, b.max_lon).is_ok();
        if !coords_ok || b.min_lat > b.max_lat || b.min_lon > b.max_lon {
            return Err(SynthError::Invalid(format!("bad bounding box {b:?}")));
        }
        if self.n_vendors == 0 {
            return Err(SynthError::Invalid("n_vendors must be >= 1".into()));
        }
        if !(self.u_km > 0.0 && self.v_km > 0.0) {
            return Err(SynthError::Invalid("u_km and v_km must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.cluster_mix) {
            return Err(SynthError::Invalid(format!("cluster_mix must lie in [0, 1], got {}", self.cluster_mix)));
        }
        if let Some(n) = self.orders_per_day {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(SynthError::Invalid(format!("orders_per_day must be >= 0, got {n}")));
            }
        }
        Ok(())
    }
}

fn default_law() -> PopularityLaw {
    let p = TheoryParams::default();
    PopularityLaw::new(p.a, p.b, p.c, p.d, p.z1, p.z2).expect("default law is valid")
}

/// I.i.d. popularities (orders/min) by inverse transform of the law's CDF.
pub fn sample_popularities(n: usize, law: &PopularityLaw, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| law.inverse_cdf(rng.gen::<f64>())).collect()
}

/// Uniform point in a disk of radius `r_km` (local tangent plane).
pub fn uniform_in_disk<R: Rng>(rng: &mut R, center: &GeoPoint, r_km: f64) -> GeoPoint {
    let r = r_km * rng.gen::<f64>().sqrt();
    let a = rng.gen::<f64>() * std::f64::consts::TAU;
    center.offset_km(r * a.cos(), r * a.sin())
}

/// Vendor layout: locations uniform in the box, popularities from the law.
pub fn generate_vendors(cfg: &GeneratorConfig, law: &PopularityLaw, seed: u64) -> Vec<Vendor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut lambdas = sample_popularities(cfg.n_vendors, law, seed);
    if let Some(target) = cfg.orders_per_day {
        let per_day: f64 = lambdas.iter().sum::<f64>() * 1440.0;
        if per_day > 0.0 {
            let s = target / per_day;
            lambdas.iter_mut().for_each(|l| *l *= s);
        }
    }
    let b = cfg.bbox;
    lambdas
        .into_iter()
        .enumerate()
        .map(|(i, popularity)| {
            let lat = b.min_lat + rng.gen::<f64>() * (b.max_lat - b.min_lat);
            let lon = b.min_lon + rng.gen::<f64>() * (b.max_lon - b.min_lon);
            Vendor {
                id: format!("v{i:03}"),
                loc: GeoPoint::new(lat, lon).expect("inside a valid box"),
                popularity,
            }
        })
        .collect()
}

/// Places one customer for `vendor`, clustering around `earlier` with probability `cluster_mix`.
fn place_customer<R: Rng>(rng: &mut R, vendor: &GeoPoint, earlier: &[GeoPoint], cfg: &GeneratorConfig) -> GeoPoint {
    if !earlier.is_empty() && rng.gen::<f64>() < cfg.cluster_mix {
        let anchor = earlier[rng.gen_range(0..earlier.len())];
        for _ in 0..32 {
            let p = uniform_in_disk(rng, &anchor, cfg.v_km);
            if straight_line_distance(vendor, &p) <= cfg.u_km {
                return p;
            }
        }
    }
    loop {
        let p = uniform_in_disk(rng, vendor, cfg.u_km);
        // the tangent-plane offset can overshoot the haversine radius by a hair
        if straight_line_distance(vendor, &p) <= cfg.u_km {
            return p;
        }
    }
}

/// Poisson order stream over `[0, horizon]` seconds, merged and time-sorted.
///
/// Each vendor draws from its own stream of one seeded generator, so adding
/// a vendor does not perturb the others.
pub fn generate_orders(
    cfg: &GeneratorConfig,
    vendors: &[Vendor],
    horizon: Timestamp,
    preparation: Timestamp,
    seed: u64,
) -> Result<Vec<Order>, SynthError> {
    if horizon <= 0 {
        return Err(SynthError::Invalid(format!("horizon must be > 0, got {horizon}")));
    }
    let mut raw: Vec<(Timestamp, usize, usize, GeoPoint)> = Vec::new();
    for (vi, v) in vendors.iter().enumerate() {
        if !(v.popularity > 0.0) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(vi as u64);
        let gaps = Exp::new(v.popularity / 60.0).map_err(|e| SynthError::Invalid(e.to_string()))?;
        let mut t = 0.0;
        let mut customers = Vec::new();
        loop {
            t += gaps.sample(&mut rng);
            if t > horizon as f64 {
                break;
            }
            let c = place_customer(&mut rng, &v.loc, &customers, cfg);
            customers.push(c);
            raw.push(((t.ceil() as Timestamp).min(horizon), vi, customers.len() - 1, c));
        }
    }
    raw.sort_by_key(|r| (r.0, r.1, r.2));
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, (t, vi, _, c))| {
            let v = &vendors[vi];
            Order::new(format!("o{i:07}"), v.id.clone(), v.loc, c, t, preparation)
        })
        .collect())
}

/// Vendors and orders for a scenario: layout fixed by `layout_seed`, orders by `order_seed`.
pub fn generate_scenario(
    cfg: &GeneratorConfig,
    horizon: Timestamp,
    preparation: Timestamp,
    layout_seed: u64,
    order_seed: u64,
) -> Result<(Vec<Vendor>, Vec<Order>), SynthError> {
    cfg.validate()?;
    let vendors = generate_vendors(cfg, &default_law(), layout_seed);
    let orders = generate_orders(cfg, &vendors, horizon, preparation, order_seed)?;
    Ok((vendors, orders))
}

/// Keeps each order independently with probability `density`.
pub fn thin_orders(orders: &[Order], density: f64, seed: u64) -> Vec<Order> {
    if density >= 1.0 {
        return orders.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - 1);
    orders.iter().filter(|_| rng.gen::<f64>() < density).cloned().collect()
}

/// Global clustering coefficient of the graph linking points within `r_km`.
///
/// Returns 0 when no node has two neighbours.
pub fn clustering_coefficient(points: &[GeoPoint], r_km: f64) -> Result<f64, SynthError> {
    let n = points.len();
    if n < 3 {
        return Err(SynthError::TooFewPoints(n));
    }
    let mut adj = vec![false; n * n];
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if straight_line_distance(&points[i], &points[j]) <= r_km {
                adj[i * n + j] = true;
                adj[j * n + i] = true;
                nbrs[i].push(j);
                nbrs[j].push(i);
            }
        }
    }
    let mut closed = 0u64;
    let mut triads = 0u64;
    for ns in &nbrs {
        let k = ns.len() as u64;
        triads += k * k.saturating_sub(1);
        for (a, &j) in ns.iter().enumerate() {
            for &l in &ns[a + 1..] {
                if adj[j * n + l] {
                    closed += 1;
                }
            }
        }
    }
    if triads == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * closed as f64 / triads as f64)
}
