use bundling_core::geo::GeoPoint;
use bundling_core::model::Vendor;
use bundling_core::synthgen::{
    clustering_coefficient, generate_orders, sample_popularities, thin_orders, uniform_in_disk, GeneratorConfig,
};
use bundling_core::theory::{PopularityLaw, TheoryParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn law() -> PopularityLaw {
    let p = TheoryParams::default();
    PopularityLaw::new(p.a, p.b, p.c, p.d, p.z1, p.z2).unwrap()
}

fn vendor(rate_per_min: f64) -> Vendor {
    Vendor {
        id: "v000".into(),
        loc: GeoPoint::new(25.2, 55.27).unwrap(),
        popularity: rate_per_min,
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn popularity_draws_follow_the_law() {
    let law = law();
    let n = 100_000;
    let draws = sample_popularities(n, &law, 17);
    assert!(ks_statistic(draws.clone(), |x| law.cdf(x)) < ks_critical(n));
    let big = draws.iter().filter(|&&l| l > law.z2).count() as f64 / n as f64;
    let g = law.gamma_b();
    let sigma = (g * (1.0 - g) / n as f64).sqrt();
    assert!((big - g).abs() <= 3.0 * sigma, "big-vendor share {big} vs {g}");
    assert_eq!(draws, sample_popularities(n, &law, 17));
}

#[test]
fn order_count_is_poisson() {
    let cfg = GeneratorConfig::default();
    let horizon = 10_000 * 60;
    let orders = generate_orders(&cfg, &[vendor(1.0)], horizon, 300, 5).unwrap();
    assert!((orders.len() as f64 - 10_000.0).abs() <= 300.0, "{} orders", orders.len());
}

#[test]
fn stream_is_sorted_with_exponential_gaps() {
    let cfg = GeneratorConfig::default();
    let vendors: Vec<Vendor> = (0..3)
        .map(|i| Vendor {
            id: format!("v{i:03}"),
            popularity: 0.05,
            ..vendor(0.0)
        })
        .collect();
    let horizon = 30 * 86_400;
    let orders = generate_orders(&cfg, &vendors, horizon, 300, 9).unwrap();
    assert!(orders.windows(2).all(|w| w[0].t_o <= w[1].t_o));
    for v in &vendors {
        let times: Vec<f64> = orders.iter().filter(|o| o.vendor_id == v.id).map(|o| o.t_o as f64).collect();
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let rate = v.popularity / 60.0;
        let d = ks_statistic(gaps.clone(), |x| 1.0 - (-rate * x).exp());
        assert!(d < ks_critical(gaps.len()), "{}: D = {d}", v.id);
    }
}

#[test]
fn clustering_raises_the_coefficient() {
    let mut wins = 0;
    let (mut sum_mixed, mut sum_uniform) = (0.0, 0.0);
    for seed in 0..20 {
        let coefficient = |mix: f64| {
            let cfg = GeneratorConfig {
                cluster_mix: mix,
                v_km: 0.5,
                ..GeneratorConfig::default()
            };
            let orders = generate_orders(&cfg, &[vendor(0.3)], 1000 * 60, 0, seed).unwrap();
            let pts: Vec<GeoPoint> = orders.iter().take(250).map(|o| o.customer_loc).collect();
            clustering_coefficient(&pts, 0.5).unwrap()
        };
        let (mixed, uniform) = (coefficient(0.5), coefficient(0.0));
        sum_mixed += mixed;
        sum_uniform += uniform;
        if mixed > uniform {
            wins += 1;
        }
    }
    assert!(sum_mixed > sum_uniform);
    assert!(wins >= 17, "clustered sample won {wins} of 20");
}

#[test]
fn coefficient_grows_with_radius_on_a_uniform_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let centre = GeoPoint::new(25.2, 55.27).unwrap();
    let pts: Vec<GeoPoint> = (0..400).map(|_| uniform_in_disk(&mut rng, &centre, 3.0)).collect();
    let gammas: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&r| clustering_coefficient(&pts, r).unwrap())
        .collect();
    assert!(gammas.windows(2).all(|w| w[1] > w[0]), "{gammas:?}");
}

#[test]
fn thinning_is_nested_across_densities() {
    let cfg = GeneratorConfig::default();
    let orders = generate_orders(&cfg, &[vendor(2.0)], 86_400, 300, 2).unwrap();
    let half = thin_orders(&orders, 0.5, 4);
    let tenth = thin_orders(&orders, 0.1, 4);
    assert!(tenth.iter().all(|o| half.iter().any(|h| h.id == o.id)));
    let frac = half.len() as f64 / orders.len() as f64;
    assert!((frac - 0.5).abs() < 0.05);
}
