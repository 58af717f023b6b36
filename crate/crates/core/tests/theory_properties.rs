use bundling_core::quad::Quadrature;
use bundling_core::theory::{
    mean_approx_error, shareability_prob, CliqueNormalizer, PopularityLaw, Theory, TheoryParams,
};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn defaults() -> Theory {
    Theory::new(TheoryParams::default()).unwrap()
}

fn law() -> PopularityLaw {
    let p = TheoryParams::default();
    PopularityLaw::new(p.a, p.b, p.c, p.d, p.z1, p.z2).unwrap()
}

/// Share of orders with at least one shareable partner: the order's customer
/// is uniform in the U-disk, partners arrive as a Poisson count and each is
/// shareable with the disk-overlap probability for that customer distance.
fn shareability_mc(x: f64, delta_c: f64, u: f64, v: f64, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(x).unwrap();
    let mut hits = 0usize;
    for _ in 0..n {
        let r = u * rng.gen::<f64>().sqrt();
        let p = if r > delta_c {
            (delta_c / v).powi(2)
        } else {
            (r * r + delta_c * delta_c) / (2.0 * v * v)
        };
        let partners = poisson.sample(&mut rng) as u64;
        if (0..partners).any(|_| rng.gen::<f64>() < p) {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

#[test]
fn shareability_matches_poisson_geometry_oracle() {
    for (i, &(dc, u, v)) in [(2.0, 3.0, 2.5), (1.0, 4.0, 1.5)].iter().enumerate() {
        for (j, &x) in [0.3, 1.0, 4.0].iter().enumerate() {
            let n = 200_000;
            let p = shareability_prob(x, 1.0, dc, u, v);
            let mc = shareability_mc(x, dc, u, v, n, (i * 10 + j) as u64);
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((mc - p).abs() <= 3.0 * sigma, "x {x}: closed form {p}, oracle {mc}");
        }
    }
}

#[test]
fn fraction_shareable_matches_posterior_sampling() {
    let theory = defaults();
    let law = law();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lambdas: Vec<f64> = (0..1_000_000).map(|_| law.inverse_cdf(rng.gen())).collect();
    let total: f64 = lambdas.iter().sum();
    for delta in [1.0, 5.0, 10.0, 20.0] {
        let mc = lambdas.iter().map(|&l| l * theory.prob(l, delta)).sum::<f64>() / total;
        let fs = theory.fraction_shareable(delta).unwrap();
        assert!((mc - fs).abs() < 0.01, "Delta {delta}: quadrature {fs}, sampling {mc}");
    }
}

#[test]
fn quadrature_tolerance_is_converged() {
    let coarse = defaults();
    let q = Quadrature::default();
    let fine = defaults()
        .with_quadrature(Quadrature {
            abs_tol: q.abs_tol / 2.0,
            rel_tol: q.rel_tol / 2.0,
            ..q
        })
        .unwrap();
    for delta in [0.5, 2.0, 8.0, 20.0] {
        let d = (coarse.fraction_shareable(delta).unwrap() - fine.fraction_shareable(delta).unwrap()).abs();
        assert!(d < 1e-5, "Delta {delta}: {d}");
    }
}

#[test]
fn patience_gains_diminish() {
    let t = defaults();
    let p: Vec<f64> = (1..=7).map(|th| t.patience_prob(th as f64).unwrap()).collect();
    assert!(p.windows(2).all(|w| w[1] > w[0]));
    let diffs: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
    // first differences from θ = 3 onwards
    for w in diffs[2..].windows(2) {
        assert!(w[1] < w[0], "{diffs:?}");
    }
}

#[test]
fn mean_error_decreases_with_served_radius() {
    let values: Vec<f64> = (0..=20).map(|i| mean_approx_error(1.0 + 0.1 * i as f64).unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn patience_maps_invert() {
    let t = defaults();
    for i in 0..=60 {
        let theta = 1.0 + 0.1 * i as f64;
        let delta = t.delta_of_theta(theta).unwrap();
        assert!((t.theta_of_delta(delta) - theta).abs() <= 2e-3 * theta);
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: Some(Box::new(FileFailurePersistence::WithSource("regressions"))),
        ..ProptestConfig::default()
    })]

    #[test]
    fn fractions_are_ordered(
        delta in 0.0f64..40.0,
        c_b in 0.0f64..1.5,
        exact in any::<bool>(),
        (dc, v_over, u) in (0.5f64..3.0, 1.0f64..3.0, 0.5f64..6.0),
    ) {
        let params = TheoryParams {
            c_b,
            delta_c: dc,
            v: dc * v_over,
            u,
            normalizer: if exact { CliqueNormalizer::Exact } else { CliqueNormalizer::Printed },
            ..TheoryParams::default()
        };
        let t = Theory::new(params).unwrap();
        let fs = t.fraction_shareable(delta).unwrap();
        prop_assert!((0.0..=1.0).contains(&fs));
        if let Ok(fb) = t.fraction_bundled(delta) {
            prop_assert!(0.0 <= fb && fb <= fs);
        }
        let fs_more = t.fraction_shareable(delta + 1.0).unwrap();
        prop_assert!(fs_more >= fs - 1e-12);
    }

    #[test]
    fn prior_cdf_is_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let l = law();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(l.cdf(lo) <= l.cdf(hi));
        let u = l.cdf(hi);
        if u < 1.0 && !(hi > l.z1 && hi <= l.z2) {
            prop_assert!((l.inverse_cdf(u) - hi).abs() < 1e-6 * hi.max(1.0));
        }
    }
}
