use bundling_core::geo::{straight_line_distance, GeoPoint, TravelConfig, TravelKind, TravelProvider};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;

fn point() -> impl Strategy<Value = GeoPoint> {
    (-60.0f64..60.0, -179.0f64..179.0).prop_map(|(lat, lon)| GeoPoint::new(lat, lon).unwrap())
}

fn local() -> impl Strategy<Value = GeoPoint> {
    (-20.0f64..20.0, -20.0f64..20.0).prop_map(|(e, n)| GeoPoint::new(25.2, 55.27).unwrap().offset_km(e, n))
}

/// Routing config pointed at a closed port, so every uncached query falls back.
fn offline_routing(cache: bool, cache_file: Option<std::path::PathBuf>) -> TravelConfig {
    TravelConfig {
        kind: TravelKind::RoutingService,
        service_endpoint: Some("http://127.0.0.1:9".into()),
        fallback_detour_factor: Some(1.4),
        cache,
        cache_file,
        ..TravelConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: Some(Box::new(FileFailurePersistence::WithSource("regressions"))),
        ..ProptestConfig::default()
    })]

    #[test]
    fn distance_is_a_metric(a in point(), b in point(), c in point()) {
        let ab = straight_line_distance(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - straight_line_distance(&b, &a)).abs() < 1e-9);
        prop_assert!(straight_line_distance(&a, &a) < 1e-9);
        prop_assert!(ab <= straight_line_distance(&a, &c) + straight_line_distance(&c, &b) + 1e-6);
    }

    #[test]
    fn detour_scales_distance(a in local(), b in local(), f in 1.0f64..2.5) {
        let d = TravelProvider::detour(f, 30.0).travel_distance(&a, &b).unwrap();
        prop_assert!((d - f * straight_line_distance(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn time_is_linear_in_distance(a in local(), b in local(), speed in 5.0f64..80.0, t in 0i64..86_400) {
        let p = TravelProvider::straight_line(speed);
        let secs = p.travel_time_exact(&a, &b, t).unwrap();
        prop_assert!((secs - straight_line_distance(&a, &b) / speed * 3600.0).abs() < 1e-6);
        prop_assert!((p.travel_time(&a, &b, t).unwrap() as f64 - secs).abs() <= 0.5);
    }
}

#[test]
fn hourly_profile_selects_speed_by_departure() {
    let cfg = TravelConfig {
        kind: TravelKind::StraightLine,
        speed_profile: Some((0..24).map(|h| 10.0 + h as f64).collect()),
        ..TravelConfig::default()
    };
    let p = TravelProvider::from_config(&cfg).unwrap();
    let a = GeoPoint::new(25.2, 55.27).unwrap();
    let b = a.offset_km(3.0, 4.0);
    let d = straight_line_distance(&a, &b);
    for h in [0i64, 7, 23] {
        let secs = p.travel_time_exact(&a, &b, h * 3600 + 59).unwrap();
        assert!((secs - d / (10.0 + h as f64) * 3600.0).abs() < 1e-6);
    }
}

#[test]
fn cache_does_not_change_answers() {
    let on = TravelProvider::from_config(&offline_routing(true, None)).unwrap();
    let off = TravelProvider::from_config(&offline_routing(false, None)).unwrap();
    let a = GeoPoint::new(25.2, 55.27).unwrap();
    let pts: Vec<GeoPoint> = (0..4).map(|i| a.offset_km(i as f64, 0.5 * i as f64)).collect();
    for _ in 0..2 {
        for p in &pts {
            assert_eq!(on.travel_distance(&a, p).unwrap(), off.travel_distance(&a, p).unwrap());
        }
    }
    assert!(on.cache_hits() > 0);
    assert_eq!(off.cache_hits(), 0);
    assert!(on.service_requests() < off.service_requests());
}

#[test]
fn cache_file_round_trips_and_short_circuits_requests() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.csv");
    std::fs::write(&path, "25.2,55.27,25.21,55.28,1500,240\n").unwrap();
    let p = TravelProvider::from_config(&offline_routing(true, Some(path.clone()))).unwrap();
    let a = GeoPoint::new(25.2, 55.27).unwrap();
    let b = GeoPoint::new(25.21, 55.28).unwrap();
    assert!((p.travel_distance(&a, &b).unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(p.service_requests(), 0);
    let copy = dir.path().join("copy.csv");
    p.save_cache_file(&copy).unwrap();
    let q = TravelProvider::from_config(&offline_routing(true, Some(copy))).unwrap();
    assert_eq!(q.travel_distance(&a, &b).unwrap(), p.travel_distance(&a, &b).unwrap());
    assert_eq!(q.service_requests(), 0);
}

#[test]
fn unreachable_service_without_fallback_errors() {
    let cfg = TravelConfig {
        fallback_detour_factor: None,
        ..offline_routing(true, None)
    };
    let p = TravelProvider::from_config(&cfg).unwrap();
    let a = GeoPoint::new(25.2, 55.27).unwrap();
    assert!(p.travel_distance(&a, &a.offset_km(1.0, 0.0)).is_err());
}
