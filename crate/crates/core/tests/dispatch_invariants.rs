use std::collections::HashMap;

use bundling_core::dispatch::{run_simulation, SimOptions, SimulationResult};
use bundling_core::experiment::scenario_orders;
use bundling_core::geo::{straight_line_distance, TravelProvider};
use bundling_core::matching::{min_weight_matching, BipartiteInstance};
use bundling_core::model::{BundlingMode, Order, ScenarioConfig};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;

fn scenario(seed: u64, hours: i64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default_synthetic();
    cfg.rng_seed = seed;
    cfg.horizon = hours * 3600;
    cfg
}

fn simulate(cfg: &ScenarioConfig) -> (Vec<Order>, SimulationResult) {
    let (_, orders) = scenario_orders(cfg, 0).unwrap();
    let travel = TravelProvider::from_config(&cfg.travel).unwrap();
    let r = run_simulation(cfg, &orders, &travel, &SimOptions::default()).unwrap();
    (orders, r)
}

#[test]
fn every_order_served_once() {
    for seed in [1, 2, 3] {
        let (orders, r) = simulate(&scenario(seed, 6));
        assert_eq!(r.records.len(), orders.len());
        let mut seen = vec![0usize; orders.len()];
        for b in &r.bundles {
            for &m in &b.members {
                seen[m] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "seed {seed}: order not in exactly one bundle");
        let hist_total: usize = r
            .metrics
            .bundle_size_histogram
            .iter()
            .enumerate()
            .map(|(size, n)| size * n)
            .sum();
        assert_eq!(hist_total, orders.len());
        for (i, rec) in r.records.iter().enumerate() {
            assert_eq!(rec.order, i);
            let o = &r.orders[i];
            assert!(o.t_r <= rec.t_p && rec.t_p <= rec.t_d);
        }
    }
}

#[test]
fn pickup_delay_bound_when_guaranteed() {
    for (t_b, pud) in [(300, 600), (600, 300), (900, 600)] {
        let mut cfg = scenario(7, 6);
        cfg.batch_duration = t_b;
        cfg.max_pickup_delay = pud;
        assert!(cfg.pud_guaranteed());
        let (_, r) = simulate(&cfg);
        assert!(r.metrics.max_pud <= pud, "T_B {t_b}: max PUD {} > {pud}", r.metrics.max_pud);
    }
}

#[test]
fn mileage_decomposes() {
    let (_, r) = simulate(&scenario(11, 6));
    let m = &r.metrics;
    let routes: f64 = r.bundles.iter().map(|b| b.route_length).sum();
    assert!((m.delivery_mileage - routes).abs() < 1e-6 * routes.max(1.0));
    let service = m.approach_mileage + m.reposition_mileage + m.fleet_size as f64 * m.m_s;
    assert!((m.service_mileage - service).abs() < 1e-6 * service.max(1.0));
    assert!((m.total_mileage - m.delivery_mileage - m.service_mileage).abs() < 1e-6 * m.total_mileage);
    let per_vehicle: f64 = r.vehicles.iter().map(|v| v.mileage).sum();
    assert!((per_vehicle - m.total_mileage).abs() < 1e-6 * m.total_mileage);
}

#[test]
fn emitted_bundles_are_sound() {
    let travel_cfg = ScenarioConfig::default_synthetic().travel;
    let travel = TravelProvider::from_config(&travel_cfg).unwrap();
    for mode in [BundlingMode::Radius, BundlingMode::SameVendor] {
        let mut cfg = scenario(5, 8);
        cfg.bundling_mode = mode;
        let (_, r) = simulate(&cfg);
        assert!(r.bundles.iter().any(|b| b.members.len() > 1));
        for b in r.bundles.iter().filter(|b| b.members.len() > 1) {
            let d_o: f64 = b
                .members
                .iter()
                .map(|&m| travel.travel_distance(&r.orders[m].vendor_loc, &r.orders[m].customer_loc).unwrap())
                .sum();
            assert!((d_o - b.solo_length).abs() < 1e-9);
            assert!(b.route_length < d_o);
            for (i, &a) in b.members.iter().enumerate() {
                for &c in &b.members[i + 1..] {
                    let (a, c) = (&r.orders[a], &r.orders[c]);
                    assert!(straight_line_distance(&a.vendor_loc, &c.vendor_loc) <= cfg.d_v);
                    assert!(straight_line_distance(&a.customer_loc, &c.customer_loc) <= cfg.d_c);
                    if mode == BundlingMode::SameVendor {
                        assert_eq!(a.vendor_id, c.vendor_id);
                    }
                }
            }
        }
    }
}

#[test]
fn unbundled_service_is_never_early() {
    let mut cfg = scenario(3, 6);
    cfg.k = 1;
    let (_, r) = simulate(&cfg);
    assert!(r.records.iter().all(|rec| rec.delay >= 0));
    assert_eq!(r.metrics.bundled_fraction, 0.0);
}

#[test]
fn reruns_are_identical() {
    let cfg = scenario(9, 4);
    let (_, a) = simulate(&cfg);
    let (_, b) = simulate(&cfg);
    assert_eq!(a.order_log_csv(), b.order_log_csv());
    let (mut ma, mut mb) = (a.metrics, b.metrics);
    ma.batch_compute.clear();
    mb.batch_compute.clear();
    assert_eq!(ma, mb);
}

#[test]
fn longer_batches_do_not_add_mileage() {
    let cfg = scenario(42, 24);
    let (_, orders) = scenario_orders(&cfg, 0).unwrap();
    let travel = TravelProvider::from_config(&cfg.travel).unwrap();
    let mut prev = f64::INFINITY;
    for minutes in (2..=20).step_by(2) {
        let mut c = cfg.clone();
        c.batch_duration = minutes * 60;
        c.max_pickup_delay = c.max_pickup_delay.max(c.batch_duration);
        let total = run_simulation(&c, &orders, &travel, &SimOptions::default())
            .unwrap()
            .metrics
            .total_mileage;
        assert!(total <= prev * 1.01, "T_B {minutes} min: {total} > {prev}");
        prev = prev.min(total);
    }
}

fn brute_force(n_left: usize, n_right: usize, w: &HashMap<(usize, usize), f64>) -> (usize, f64) {
    fn go(
        l: usize,
        n_left: usize,
        n_right: usize,
        used: &mut Vec<bool>,
        w: &HashMap<(usize, usize), f64>,
        card: usize,
        cost: f64,
        best: &mut (usize, f64),
    ) {
        if l == n_left {
            if card > best.0 || (card == best.0 && cost < best.1) {
                *best = (card, cost);
            }
            return;
        }
        go(l + 1, n_left, n_right, used, w, card, cost, best);
        for r in 0..n_right {
            if !used[r] {
                if let Some(&x) = w.get(&(l, r)) {
                    used[r] = true;
                    go(l + 1, n_left, n_right, used, w, card + 1, cost + x, best);
                    used[r] = false;
                }
            }
        }
    }
    let mut best = (0, 0.0);
    go(0, n_left, n_right, &mut vec![false; n_right], w, 0, 0.0, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: Some(Box::new(FileFailurePersistence::WithSource("regressions"))),
        ..ProptestConfig::default()
    })]

    #[test]
    fn matching_is_optimal(
        n_left in 0usize..=7,
        n_right in 0usize..=7,
        cells in prop::collection::vec(prop::option::weighted(0.6, 0u32..1000), 49),
    ) {
        let mut w = HashMap::new();
        let mut edges = Vec::new();
        for l in 0..n_left {
            for r in 0..n_right {
                if let Some(x) = cells[l * 7 + r] {
                    let x = f64::from(x) / 10.0;
                    w.insert((l, r), x);
                    edges.push((l, r, x));
                }
            }
        }
        let m = min_weight_matching(&BipartiteInstance { n_left, n_right, edges });
        let (card, cost) = brute_force(n_left, n_right, &w);
        prop_assert_eq!(m.len(), card);
        prop_assert!((m.cost - cost).abs() < 1e-9);
        let mut lefts: Vec<usize> = m.pairs.iter().map(|p| p.0).collect();
        let mut rights: Vec<usize> = m.pairs.iter().map(|p| p.1).collect();
        lefts.dedup();
        rights.sort_unstable();
        rights.dedup();
        prop_assert_eq!(lefts.len(), m.len());
        prop_assert_eq!(rights.len(), m.len());
        prop_assert!(m.pairs.iter().all(|p| w.contains_key(p)));
    }
}
