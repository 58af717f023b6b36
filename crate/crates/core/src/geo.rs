//! Locations, great-circle distances and travel providers.
//!
//! A [`TravelProvider`] answers two questions for a pair of locations: how far
//! (`travel_distance`, km) and how long (`travel_time`, s) at a given departure
//! time. Three backends are available: plain haversine, haversine scaled by a
//! detour factor, and an external routing service speaking the OSRM `route`
//! response format. Durations are always derived from distance and the hourly
//! speed profile so that every backend reacts to traffic the same way.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Timestamp;

/// IUGG mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

const KM_PER_DEG_LAT: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid travel configuration: {0}")]
    InvalidConfig(String),
    #[error("routing service {endpoint} failed for {from} -> {to}: {reason}")]
    Routing {
        endpoint: String,
        from: GeoPoint,
        to: GeoPoint,
        reason: String,
    },
    #[error("cache file {path}: {reason}")]
    CacheFile { path: PathBuf, reason: String },
}

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }

    /// Moves the point by a local east/north displacement in km.
    ///
    /// Uses the tangent-plane approximation, which is accurate at city scale.
    pub fn offset_km(&self, east_km: f64, north_km: f64) -> GeoPoint {
        let lat = (self.lat + north_km / KM_PER_DEG_LAT).clamp(-90.0, 90.0);
        let cos_lat = self.lat.to_radians().cos().max(1e-12);
        let mut lon = self.lon + east_km / (KM_PER_DEG_LAT * cos_lat);
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint { lat, lon }
    }

    /// Linear interpolation in coordinate space, `f` in [0, 1].
    pub fn lerp(&self, other: &GeoPoint, f: f64) -> GeoPoint {
        GeoPoint {
            lat: self.lat + (other.lat - self.lat) * f,
            lon: self.lon + (other.lon - self.lon) * f,
        }
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// Great-circle (haversine) distance in km.
pub fn straight_line_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Hour of day (0..24) of a scenario timestamp.
pub fn hour_of_day(t: Timestamp) -> usize {
    (t.div_euclid(3600).rem_euclid(24)) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelKind {
    StraightLine,
    DetourFactor,
    RoutingService,
}

/// Travel section of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TravelConfig {
    pub kind: TravelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detour_factor: Option<f64>,
    /// Flat speed used for every hour when `speed_profile` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<f64>,
    /// 24 hourly speeds in km/h.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_profile: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_profile: Option<String>,
    /// Detour factor used when the routing service cannot be reached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_detour_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_file: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub cache: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TravelConfig {
    fn default() -> Self {
        Self {
            kind: TravelKind::DetourFactor,
            detour_factor: Some(1.3),
            speed_kmh: Some(30.0),
            speed_profile: None,
            service_endpoint: None,
            service_profile: None,
            fallback_detour_factor: None,
            cache_file: None,
            cache: true,
        }
    }
}

#[derive(Debug)]
enum Backend {
    StraightLine,
    Detour(f64),
    Routing(RoutingClient),
}

#[derive(Debug)]
struct RoutingClient {
    endpoint: String,
    profile: String,
    fallback_detour: Option<f64>,
    agent: ureq::Agent,
}

type CacheKey = (i64, i64, i64, i64);

fn round5(x: f64) -> i64 {
    (x * 1e5).round() as i64
}

fn cache_key(a: &GeoPoint, b: &GeoPoint) -> CacheKey {
    (round5(a.lat), round5(a.lon), round5(b.lat), round5(b.lon))
}

fn key_point(lat: i64, lon: i64) -> GeoPoint {
    GeoPoint {
        lat: lat as f64 / 1e5,
        lon: lon as f64 / 1e5,
    }
}

/// Distance/time oracle shared by every component of a run.
///
/// Safe to share across threads: the memo is behind a read-write lock and
/// request counters are atomic.
#[derive(Debug)]
pub struct TravelProvider {
    backend: Backend,
    speed_profile: [f64; 24],
    cache_enabled: bool,
    /// (from, to) -> (distance km, base duration s)
    cache: RwLock<HashMap<CacheKey, (f64, f64)>>,
    requests: AtomicU64,
    cache_hits: AtomicU64,
}

impl TravelProvider {
    pub fn straight_line(speed_kmh: f64) -> Self {
        Self::build(Backend::StraightLine, [speed_kmh; 24], false)
    }

    pub fn detour(factor: f64, speed_kmh: f64) -> Self {
        Self::build(Backend::Detour(factor), [speed_kmh; 24], false)
    }

    fn build(backend: Backend, speed_profile: [f64; 24], cache_enabled: bool) -> Self {
        Self {
            backend,
            speed_profile,
            cache_enabled,
            cache: RwLock::new(HashMap::new()),
            requests: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn from_config(cfg: &TravelConfig) -> Result<Self, GeoError> {
        let profile = match (&cfg.speed_profile, cfg.speed_kmh) {
            (Some(p), _) => {
                let arr: [f64; 24] = p.as_slice().try_into().map_err(|_| {
                    GeoError::InvalidConfig(format!(
                        "speed_profile needs 24 entries, got {}",
                        p.len()
                    ))
                })?;
                arr
            }
            (None, Some(v)) => [v; 24],
            (None, None) => [30.0; 24],
        };
        if let Some(bad) = profile.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(GeoError::InvalidConfig(format!(
                "speeds must be strictly positive, got {bad}"
            )));
        }
        let check_factor = |f: f64| {
            if f >= 1.0 && f.is_finite() {
                Ok(f)
            } else {
                Err(GeoError::InvalidConfig(format!(
                    "detour factor must be >= 1, got {f}"
                )))
            }
        };
        let backend = match cfg.kind {
            TravelKind::StraightLine => Backend::StraightLine,
            TravelKind::DetourFactor => Backend::Detour(check_factor(cfg.detour_factor.unwrap_or(1.3))?),
            TravelKind::RoutingService => {
                let endpoint = cfg.service_endpoint.clone().ok_or_else(|| {
                    GeoError::InvalidConfig("routing_service requires service_endpoint".into())
                })?;
                let fallback_detour = cfg.fallback_detour_factor.map(check_factor).transpose()?;
                Backend::Routing(RoutingClient {
                    endpoint: endpoint.trim_end_matches('/').to_string(),
                    profile: cfg.service_profile.clone().unwrap_or_else(|| "driving".into()),
                    fallback_detour,
                    agent: ureq::AgentBuilder::new()
                        .timeout(Duration::from_secs(10))
                        .build(),
                })
            }
        };
        let provider = Self::build(backend, profile, cfg.cache);
        if let Some(path) = &cfg.cache_file {
            if path.exists() {
                provider.load_cache_file(path)?;
            }
        }
        Ok(provider)
    }

    pub fn speed_profile(&self) -> &[f64; 24] {
        &self.speed_profile
    }

    /// Number of requests sent to the routing service so far.
    pub fn service_requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    /// Road distance in km.
    pub fn travel_distance(&self, a: &GeoPoint, b: &GeoPoint) -> Result<f64, GeoError> {
        match &self.backend {
            Backend::StraightLine => Ok(straight_line_distance(a, b)),
            Backend::Detour(f) => Ok(straight_line_distance(a, b) * f),
            Backend::Routing(client) => {
                if a == b {
                    return Ok(0.0);
                }
                self.routed(client, a, b).map(|(d, _)| d)
            }
        }
    }

    /// Travel time in seconds (unrounded) when departing at `depart`.
    pub fn travel_time_exact(
        &self,
        a: &GeoPoint,
        b: &GeoPoint,
        depart: Timestamp,
    ) -> Result<f64, GeoError> {
        let d = self.travel_distance(a, b)?;
        Ok(d / self.speed_profile[hour_of_day(depart)] * 3600.0)
    }

    /// Travel time rounded to whole seconds.
    pub fn travel_time(
        &self,
        a: &GeoPoint,
        b: &GeoPoint,
        depart: Timestamp,
    ) -> Result<Timestamp, GeoError> {
        Ok(self.travel_time_exact(a, b, depart)?.round() as Timestamp)
    }

    fn routed(&self, client: &RoutingClient, a: &GeoPoint, b: &GeoPoint) -> Result<(f64, f64), GeoError> {
        let key = cache_key(a, b);
        if self.cache_enabled {
            if let Some(hit) = self.cache.read().expect("travel cache poisoned").get(&key) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(*hit);
            }
        }
        let from = key_point(key.0, key.1);
        let to = key_point(key.2, key.3);
        let value = match self.query_service(client, &from, &to) {
            Ok(v) => v,
            Err(err) => match client.fallback_detour {
                Some(f) => {
                    let d = straight_line_distance(&from, &to) * f;
                    (d, d / self.speed_profile[0] * 3600.0)
                }
                None => return Err(err),
            },
        };
        if self.cache_enabled {
            self.cache
                .write()
                .expect("travel cache poisoned")
                .insert(key, value);
        }
        Ok(value)
    }

    fn query_service(
        &self,
        client: &RoutingClient,
        from: &GeoPoint,
        to: &GeoPoint,
    ) -> Result<(f64, f64), GeoError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let url = format!(
            "{}/route/v1/{}/{},{};{},{}?overview=false",
            client.endpoint, client.profile, from.lon, from.lat, to.lon, to.lat
        );
        let fail = |reason: String| GeoError::Routing {
            endpoint: client.endpoint.clone(),
            from: *from,
            to: *to,
            reason,
        };
        let body = client
            .agent
            .get(&url)
            .call()
            .map_err(|e| fail(e.to_string()))?
            .into_string()
            .map_err(|e| fail(e.to_string()))?;
        parse_route_response(&body).map_err(fail)
    }

    /// Loads memo records, one per line: `lat1,lon1,lat2,lon2,distance_m,duration_s`.
    pub fn load_cache_file(&self, path: &Path) -> Result<usize, GeoError> {
        let err = |reason: String| GeoError::CacheFile {
            path: path.to_path_buf(),
            reason,
        };
        let file = fs::File::open(path).map_err(|e| err(e.to_string()))?;
        let mut cache = self.cache.write().expect("travel cache poisoned");
        let mut n = 0;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            if fields.len() != 6 {
                return Err(err(format!("line {}: expected 6 fields", i + 1)));
            }
            let a = GeoPoint::new(fields[0], fields[1]).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            let b = GeoPoint::new(fields[2], fields[3]).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            cache.insert(cache_key(&a, &b), (fields[4] / 1000.0, fields[5]));
            n += 1;
        }
        Ok(n)
    }

    /// Writes the memo in the same format `load_cache_file` reads, sorted by key.
    pub fn save_cache_file(&self, path: &Path) -> Result<(), GeoError> {
        let err = |reason: String| GeoError::CacheFile {
            path: path.to_path_buf(),
            reason,
        };
        let cache = self.cache.read().expect("travel cache poisoned");
        let mut entries: Vec<_> = cache.iter().collect();
        entries.sort_by_key(|(k, _)| **k);
        let mut out = fs::File::create(path).map_err(|e| err(e.to_string()))?;
        for (k, (d, t)) in entries {
            let (a, b) = (key_point(k.0, k.1), key_point(k.2, k.3));
            writeln!(out, "{},{},{},{},{},{}", a.lat, a.lon, b.lat, b.lon, d * 1000.0, t)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RouteResponse {
    code: String,
    #[serde(default)]
    routes: Vec<RouteEntry>,
}

#[derive(Deserialize)]
struct RouteEntry {
    distance: f64,
    duration: f64,
}

/// Extracts (km, s) from an OSRM-style `route` response body.
fn parse_route_response(body: &str) -> Result<(f64, f64), String> {
    let resp: RouteResponse =
        serde_json::from_str(body).map_err(|e| format!("malformed response: {e}"))?;
    if resp.code != "Ok" {
        return Err(format!("service returned code {}", resp.code));
    }
    let route = resp.routes.first().ok_or("response has no routes")?;
    if !(route.distance >= 0.0 && route.duration >= 0.0) {
        return Err("negative distance or duration".into());
    }
    Ok((route.distance / 1000.0, route.duration))
}
