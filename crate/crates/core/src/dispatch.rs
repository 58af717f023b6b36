//! Batch dispatch: bundles are matched to vehicles by minimum-weight bipartite
//! matching, unmatched bundles get a freshly generated vehicle, and idle
//! vehicles are sent back towards popular vendors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use crate::geo::{GeoError, GeoPoint, TravelProvider};
use crate::matching::{min_weight_matching, BipartiteInstance};
use crate::model::{vendors_from_orders, Order, RepositionLeg, RunMetrics, ScenarioConfig, Vehicle};
use crate::shareability::{
    build_graph, clique_cover, route_schedule, split_clique, Bundle, BundleError, EquivalentOrder,
    SplitParams, StopKind,
};
use crate::Timestamp;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("batch {batch}: {source}")]
    Bundling { batch: i64, source: BundleError },
    #[error("batch {batch}: {source}")]
    Travel { batch: i64, source: GeoError },
    #[error("orders must be sorted by order time")]
    Unsorted,
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Batch index `h` with `(h-1) T_B < t_o <= h T_B`.
pub fn batch_index(t_o: Timestamp, batch_duration: Timestamp) -> i64 {
    -((-t_o).div_euclid(batch_duration))
}

/// The orders of batch `h` (orders sorted by `t_o`).
pub fn batch_set(orders: &[Order], h: i64, batch_duration: Timestamp) -> &[Order] {
    let lo = orders.partition_point(|o| o.t_o <= (h - 1) * batch_duration);
    let hi = orders.partition_point(|o| o.t_o <= h * batch_duration);
    &orders[lo..hi.max(lo)]
}

/// Where and when a vehicle can next start moving, as seen at `now`.
///
/// A vehicle on a repositioning leg may be diverted: before departure it is
/// still at the origin, in transit it is at the interpolated position, and
/// after arrival it waits at the destination.
pub fn effective_lkc(v: &Vehicle, now: Timestamp) -> (GeoPoint, Timestamp) {
    match &v.pending_leg {
        None => (v.lkc_loc, v.lkc_time),
        Some(leg) if now <= leg.depart => (leg.from, leg.idle_since),
        Some(leg) if now < leg.arrive => {
            let f = (now - leg.depart) as f64 / (leg.arrive - leg.depart) as f64;
            (leg.from.lerp(&leg.to, f), now)
        }
        Some(leg) => (leg.to, leg.arrive),
    }
}

/// Approach distance to the bundle when the vehicle can make its pickup window.
pub fn feasible_edge(
    loc: &GeoPoint,
    free_at: Timestamp,
    d: &EquivalentOrder,
    h: i64,
    batch_duration: Timestamp,
    travel: &TravelProvider,
) -> Result<Option<f64>, GeoError> {
    let start = free_at.max(h * batch_duration);
    let arrival = start + travel.travel_time(loc, &d.pickup, start)?;
    if arrival <= d.ready + d.effective_pud {
        Ok(Some(travel.travel_distance(loc, &d.pickup)?))
    } else {
        Ok(None)
    }
}

/// Mileage of a pending leg actually driven by `now`, and the vehicle's state after settling.
fn settle_leg(v: &mut Vehicle, now: Option<Timestamp>) -> f64 {
    let Some(leg) = v.pending_leg.take() else { return 0.0 };
    let (loc, time) = match now {
        Some(t) => effective_lkc(
            &Vehicle {
                pending_leg: Some(leg),
                ..v.clone()
            },
            t,
        ),
        None => (leg.to, leg.arrive),
    };
    let driven = match now {
        Some(t) if t <= leg.depart => 0.0,
        Some(t) if t < leg.arrive => leg.distance_km * (t - leg.depart) as f64 / (leg.arrive - leg.depart) as f64,
        _ => leg.distance_km,
    };
    v.lkc_loc = loc;
    v.lkc_time = time;
    v.mileage += driven;
    driven
}

/// Service record of one order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRecord {
    pub order: usize,
    pub bundle_id: usize,
    pub vehicle_id: usize,
    pub t_p: Timestamp,
    pub t_d: Timestamp,
    pub delay: Timestamp,
}

/// One emitted bundle: member indices into the run's order list.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleRecord {
    pub id: usize,
    pub batch: i64,
    pub members: Vec<usize>,
    pub route_length: f64,
    pub solo_length: f64,
    pub vehicle_id: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Writes `batch_<h>_graph.csv` edge lists here when set.
    pub graph_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub metrics: RunMetrics,
    /// Orders with pickup and delivery times filled in.
    pub orders: Vec<Order>,
    pub records: Vec<OrderRecord>,
    pub bundles: Vec<BundleRecord>,
    pub vehicles: Vec<Vehicle>,
}

pub const ORDER_LOG_HEADER: &str = "order_id,bundle_id,vehicle_id,t_o,t_r,t_p,t_d,pud_s,delay_vs_baseline_s";

impl SimulationResult {
    pub fn order_log_csv(&self) -> String {
        let mut s = String::from(ORDER_LOG_HEADER);
        s.push('\n');
        for r in &self.records {
            let o = &self.orders[r.order];
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                o.id,
                r.bundle_id,
                r.vehicle_id,
                o.t_o,
                o.t_r,
                r.t_p,
                r.t_d,
                r.t_p - o.t_r,
                r.delay
            );
        }
        s
    }
}

/// Mutable state of one simulation pass.
pub struct DispatchState<'a> {
    pub cfg: &'a ScenarioConfig,
    pub travel: &'a TravelProvider,
    pub m_s: f64,
    pub vehicles: Vec<Vehicle>,
    pub rrl: Vec<GeoPoint>,
    /// Reposition mileage since each vehicle's last delivery.
    since_delivery: Vec<f64>,
    approach_samples: Vec<f64>,
    pub approach_mileage: f64,
    pub delivery_mileage: f64,
    pub reposition_mileage: f64,
    pub n_repositionings: usize,
}

impl<'a> DispatchState<'a> {
    pub fn new(cfg: &'a ScenarioConfig, travel: &'a TravelProvider, m_s: f64, rrl: Vec<GeoPoint>) -> Self {
        Self {
            cfg,
            travel,
            m_s,
            vehicles: Vec::new(),
            rrl,
            since_delivery: Vec::new(),
            approach_samples: Vec::new(),
            approach_mileage: 0.0,
            delivery_mileage: 0.0,
            reposition_mileage: 0.0,
            n_repositionings: 0,
        }
    }

    /// Adds a vehicle parked at the bundle's pickup when it becomes ready.
    pub fn generate_vehicle(&mut self, d: &EquivalentOrder, now: Timestamp) -> usize {
        let id = self.vehicles.len();
        self.vehicles.push(Vehicle {
            id,
            lkc_loc: d.pickup,
            lkc_time: d.ready,
            mileage: self.m_s,
            generated_at: now,
            repositioned_last: false,
            awaiting_reposition: false,
            pending_leg: None,
        });
        self.since_delivery.push(0.0);
        id
    }

    /// Assigns a bundle to a vehicle at batch `h` and walks its route.
    ///
    /// Returns the service time of every route stop.
    pub fn commit_assignment(
        &mut self,
        vid: usize,
        bundle: &Bundle,
        batch_orders: &[Order],
        h: i64,
        fresh: bool,
    ) -> Result<Vec<Timestamp>, GeoError> {
        let now = h * self.cfg.batch_duration;
        let reposition = settle_leg(&mut self.vehicles[vid], Some(now));
        self.reposition_mileage += reposition;
        self.since_delivery[vid] += reposition;
        let v = &self.vehicles[vid];
        let pickup = bundle.equivalent.pickup;
        let start = v.lkc_time.max(now);
        let arrival = start + self.travel.travel_time(&v.lkc_loc, &pickup, start)?;
        let approach = self.travel.travel_distance(&v.lkc_loc, &pickup)?;
        let sched = route_schedule(&bundle.route, batch_orders, arrival, self.travel)?;
        if !fresh {
            self.approach_samples.push(self.since_delivery[vid] + approach);
        }
        let v = &mut self.vehicles[vid];
        v.lkc_loc = bundle.route.last().expect("non-empty route").loc;
        v.lkc_time = sched.end;
        v.mileage += approach + bundle.route_length;
        v.repositioned_last = false;
        v.awaiting_reposition = true;
        self.since_delivery[vid] = 0.0;
        self.approach_mileage += approach;
        self.delivery_mileage += bundle.route_length;
        Ok(sched.stop_times)
    }

    /// Schedules repositioning legs at the end of batch `h`.
    pub fn reposition(&mut self, h: i64) -> Result<(), GeoError> {
        let next = (h + 1) * self.cfg.batch_duration;
        for v in &mut self.vehicles {
            if !v.awaiting_reposition || v.pending_leg.is_some() || v.repositioned_last {
                continue;
            }
            let mut best: Option<(Timestamp, GeoPoint)> = None;
            for r in &self.rrl {
                let t = self.travel.travel_time(&v.lkc_loc, r, v.lkc_time)?;
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, *r));
                }
            }
            let Some((tt, target)) = best else { continue };
            if tt == 0 {
                v.awaiting_reposition = false;
                continue;
            }
            let depart = if tt > self.cfg.reposition_threshold {
                v.lkc_time
            } else if v.lkc_time + self.cfg.reposition_wait <= next {
                v.lkc_time + self.cfg.reposition_wait
            } else {
                continue;
            };
            let travel_s = self.travel.travel_time(&v.lkc_loc, &target, depart)?;
            v.pending_leg = Some(RepositionLeg {
                from: v.lkc_loc,
                to: target,
                idle_since: v.lkc_time,
                depart,
                arrive: depart + travel_s,
                distance_km: self.travel.travel_distance(&v.lkc_loc, &target)?,
            });
            v.awaiting_reposition = false;
            v.repositioned_last = true;
            self.n_repositionings += 1;
        }
        Ok(())
    }

    /// Completes every outstanding leg at the end of the run.
    pub fn finish(&mut self) {
        for (i, v) in self.vehicles.iter_mut().enumerate() {
            let d = settle_leg(v, None);
            self.reposition_mileage += d;
            self.since_delivery[i] += d;
        }
    }

    /// Average distance between a delivery and the next pickup over the run.
    pub fn mean_approach(&self) -> f64 {
        if self.approach_samples.is_empty() {
            0.0
        } else {
            self.approach_samples.iter().sum::<f64>() / self.approach_samples.len() as f64
        }
    }
}

/// Repositioning return locations: the busiest vendors by order count.
pub fn repositioning_locations(orders: &[Order], count: usize) -> Vec<GeoPoint> {
    let mut vendors = vendors_from_orders(orders, 86_400);
    vendors.sort_by(|a, b| b.popularity.total_cmp(&a.popularity).then_with(|| a.id.cmp(&b.id)));
    vendors.into_iter().take(count).map(|v| v.loc).collect()
}

/// One simulation pass with a fixed starting-mileage penalty.
pub fn simulate_once(
    cfg: &ScenarioConfig,
    orders: &[Order],
    travel: &TravelProvider,
    m_s: f64,
    opts: &SimOptions,
) -> Result<(SimulationResult, f64), DispatchError> {
    if orders.windows(2).any(|w| w[0].t_o > w[1].t_o) {
        return Err(DispatchError::Unsorted);
    }
    let tb = cfg.batch_duration;
    let mut state = DispatchState::new(cfg, travel, m_s, repositioning_locations(orders, cfg.rrl_count));
    let mut served: Vec<Order> = orders.to_vec();
    let mut records: Vec<OrderRecord> = Vec::with_capacity(orders.len());
    let mut bundle_log: Vec<BundleRecord> = Vec::new();
    let mut batch_compute = Vec::new();
    let mut baseline: HashMap<usize, Timestamp> = HashMap::with_capacity(orders.len());

    let (Some(first), Some(last)) = (orders.first(), orders.last()) else {
        return Ok((
            SimulationResult {
                metrics: RunMetrics::default(),
                orders: served,
                records,
                bundles: bundle_log,
                vehicles: Vec::new(),
            },
            0.0,
        ));
    };
    let h_first = batch_index(first.t_o, tb);
    let h_last = batch_index(last.t_o, tb).max(batch_index(cfg.horizon, tb));
    let mut offset = 0usize;

    for h in h_first..=h_last {
        let batch = batch_set(orders, h, tb);
        let travel_err = |source| DispatchError::Travel { batch: h, source };
        let base = offset;
        offset += batch.len();
        let clock = Instant::now();

        let g = build_graph(batch, cfg.d_v, cfg.d_c, cfg.bundling_mode);
        if let Some(dir) = &opts.graph_dir {
            let path = dir.join(format!("batch_{h}_graph.csv"));
            std::fs::write(&path, g.edge_list_csv(batch)).map_err(|source| DispatchError::Io { path, source })?;
        }
        let params = SplitParams {
            k: cfg.k,
            max_pud: cfg.max_pickup_delay,
            dispatch_at: h * tb,
        };
        let mut bundles = Vec::with_capacity(batch.len());
        for clique in clique_cover(&g) {
            bundles.extend(
                split_clique(&clique, batch, &params, travel)
                    .map_err(|source| DispatchError::Bundling { batch: h, source })?,
            );
        }
        bundles.sort_by_key(|b| b.orders[0]);

        let now = h * tb;
        let mut edges = Vec::new();
        for (vi, v) in state.vehicles.iter().enumerate() {
            let (loc, free_at) = effective_lkc(v, now);
            for (bi, b) in bundles.iter().enumerate() {
                if let Some(w) = feasible_edge(&loc, free_at, &b.equivalent, h, tb, travel).map_err(travel_err)? {
                    edges.push((vi, bi, w));
                }
            }
        }
        let matching = min_weight_matching(&BipartiteInstance {
            n_left: state.vehicles.len(),
            n_right: bundles.len(),
            edges,
        });
        let mut assigned: Vec<Option<usize>> = vec![None; bundles.len()];
        for &(vi, bi) in &matching.pairs {
            assigned[bi] = Some(vi);
        }

        for (bi, b) in bundles.iter().enumerate() {
            let (vid, fresh) = match assigned[bi] {
                Some(v) => (v, false),
                None => (state.generate_vehicle(&b.equivalent, now), true),
            };
            let times = state.commit_assignment(vid, b, batch, h, fresh).map_err(travel_err)?;
            let bundle_id = bundle_log.len();
            for (stop, &t) in b.route.iter().zip(&times) {
                let o = &mut served[base + stop.order];
                match stop.kind {
                    StopKind::Pickup => o.t_p = Some(t),
                    StopKind::Drop => o.t_d = Some(t),
                }
            }
            for &m in &b.orders {
                let gi = base + m;
                let o = &served[gi];
                let solo = travel.travel_time(&o.vendor_loc, &o.customer_loc, o.t_r).map_err(travel_err)?;
                baseline.insert(gi, o.t_r + solo);
                records.push(OrderRecord {
                    order: gi,
                    bundle_id,
                    vehicle_id: vid,
                    t_p: o.t_p.expect("picked up"),
                    t_d: o.t_d.expect("delivered"),
                    delay: o.t_d.expect("delivered") - (o.t_r + solo),
                });
            }
            bundle_log.push(BundleRecord {
                id: bundle_id,
                batch: h,
                members: b.orders.iter().map(|&m| base + m).collect(),
                route_length: b.route_length,
                solo_length: b.solo_length,
                vehicle_id: vid,
            });
        }
        batch_compute.push((batch.len(), clock.elapsed().as_secs_f64()));
        state.reposition(h).map_err(travel_err)?;
    }
    state.finish();
    let mean_approach = state.mean_approach();

    let n = served.len();
    let fleet = state.vehicles.len();
    let mut hist = vec![0usize; cfg.k.max(1) + 1];
    let mut savings = Vec::new();
    let mut bundled_orders = 0usize;
    let mut solo_mileage = 0.0;
    for b in &bundle_log {
        if b.members.len() >= hist.len() {
            hist.resize(b.members.len() + 1, 0);
        }
        hist[b.members.len()] += 1;
        solo_mileage += b.solo_length;
        if b.members.len() > 1 {
            bundled_orders += b.members.len();
            savings.push(1.0 - b.route_length / b.solo_length);
        }
    }
    let puds: Vec<Timestamp> = records.iter().map(|r| r.t_p - served[r.order].t_r).collect();
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let penalty = fleet as f64 * m_s;
    let service = state.approach_mileage + state.reposition_mileage + penalty;
    let metrics = RunMetrics {
        n_orders: n,
        n_bundles: bundle_log.len(),
        fleet_size: fleet,
        total_mileage: state.delivery_mileage + service,
        delivery_mileage: state.delivery_mileage,
        service_mileage: service,
        approach_mileage: state.approach_mileage,
        reposition_mileage: state.reposition_mileage,
        starting_mileage_penalty: penalty,
        m_s,
        solo_mileage,
        avg_pud: mean(&puds.iter().map(|&p| p as f64).collect::<Vec<_>>()),
        max_pud: puds.iter().copied().max().unwrap_or(0),
        avg_delivery_delay: mean(&records.iter().map(|r| r.delay as f64).collect::<Vec<_>>()),
        bundled_fraction: if n == 0 { 0.0 } else { bundled_orders as f64 / n as f64 },
        mean_bundle_saving: mean(&savings),
        bundle_size_histogram: hist,
        n_repositionings: state.n_repositionings,
        batch_compute,
    };
    records.sort_by_key(|r| r.order);
    Ok((
        SimulationResult {
            metrics,
            orders: served,
            records,
            bundles: bundle_log,
            vehicles: state.vehicles,
        },
        mean_approach,
    ))
}

/// Full simulation: a first pass without the starting-mileage penalty
/// measures the mean delivery-to-pickup distance, which the second pass
/// charges to every generated vehicle.
pub fn run_simulation(
    cfg: &ScenarioConfig,
    orders: &[Order],
    travel: &TravelProvider,
    opts: &SimOptions,
) -> Result<SimulationResult, DispatchError> {
    let (_, m_s) = simulate_once(cfg, orders, travel, 0.0, &SimOptions::default())?;
    let (result, _) = simulate_once(cfg, orders, travel, m_s, opts)?;
    Ok(result)
}
