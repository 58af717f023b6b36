//! Closed-form model of order shareability and mileage savings.
//!
//! Popularities λ are in orders per minute and batch durations Δ in minutes.
//! Radii (δ_c, U, V) are in km; only their ratios matter.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{QuadError, Quadrature};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("p(r) = {0} exceeds 1: V is too small relative to delta_c")]
    InconsistentRadii(f64),
    #[error("psi = {0} exceeds 1: C_b too large")]
    PsiAboveOne(f64),
    #[error("batch duration {0} min from patience inversion is not positive")]
    Domain(f64),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Normaliser used for the clique-size distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliqueNormalizer {
    /// `1 / (1 - e^{-m})`.
    #[default]
    Printed,
    /// `1 / (1 - e^{-m} - m e^{-m})`, which sums to one over n >= 2.
    Exact,
}

/// Linear map `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Model constants. Serialised as the `[theory]` block of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub z1: f64,
    /// Upper cutoff; derived from continuity when absent.
    pub z2: Option<f64>,
    pub delta_c: f64,
    /// Vendor served-area radius.
    pub u: f64,
    /// Customer-cluster radius.
    pub v: f64,
    pub c_b: f64,
    pub w_gm: f64,
    /// μ as a function of Δ.
    pub mu: Line,
    /// θ as a function of Δ.
    pub theta: Line,
    pub normalizer: CliqueNormalizer,
}

pub type TheoryConfig = TheoryParams;

impl Default for TheoryParams {
    fn default() -> Self {
        Self {
            a: 1002.039,
            b: 0.925,
            c: 4.283,
            d: 0.061,
            z1: 0.1389,
            z2: None,
            delta_c: 1.0,
            u: 1.0,
            v: 1.0,
            c_b: 1.0,
            w_gm: 1.325,
            mu: Line {
                slope: 0.0028,
                intercept: 0.2544,
            },
            theta: Line {
                slope: 0.302,
                intercept: 0.677,
            },
            normalizer: CliqueNormalizer::Printed,
        }
    }
}

/// The four-branch popularity law (prior over vendors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopularityLaw {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub z1: f64,
    pub z2: f64,
}

/// Cutoff making the CDF continuous: `(ln d + b ln(1 + a z1)) / c`.
pub fn continuity_z2(a: f64, b: f64, c: f64, d: f64, z1: f64) -> f64 {
    (d.ln() + b * (a * z1).ln_1p()) / c
}

impl PopularityLaw {
    pub fn new(a: f64, b: f64, c: f64, d: f64, z1: f64, z2: Option<f64>) -> Result<Self, TheoryError> {
        if !(a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0 && z1 > 0.0) {
            return Err(TheoryError::Invalid("a, b, c, d, z1 must be > 0".into()));
        }
        let z2 = z2.unwrap_or_else(|| continuity_z2(a, b, c, d, z1));
        if !(z2 >= z1) {
            return Err(TheoryError::Invalid(format!("z2 = {z2} must be >= z1 = {z1}")));
        }
        Ok(Self { a, b, c, d, z1, z2 })
    }

    /// Fraction of big vendors, `1 / (a z1 + 1)^b`.
    pub fn gamma_b(&self) -> f64 {
        (self.a * self.z1 + 1.0).powf(-self.b)
    }

    pub fn cdf(&self, l: f64) -> f64 {
        if l <= 0.0 {
            0.0
        } else if l <= self.z1 {
            1.0 - (self.a * l + 1.0).powf(-self.b)
        } else if l <= self.z2 {
            1.0 - self.gamma_b()
        } else {
            1.0 - self.d * (-self.c * l).exp()
        }
    }

    /// Prior density `f(λ)`; zero on the flat stretch.
    pub fn pdf(&self, l: f64) -> f64 {
        if l < 0.0 || (l > self.z1 && l <= self.z2) {
            0.0
        } else if l <= self.z1 {
            self.a * self.b * (self.a * l + 1.0).powf(-self.b - 1.0)
        } else {
            self.c * self.d * (-self.c * l).exp()
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u <= 1.0 - self.gamma_b() {
            ((1.0 - u).powf(-1.0 / self.b) - 1.0) / self.a
        } else if u >= 1.0 {
            f64::INFINITY
        } else {
            -((1.0 - u) / self.d).ln() / self.c
        }
    }

    /// Integral of `g(λ) f(λ)` over the support, split at the cutoffs.
    pub fn integrate<G: Fn(f64) -> f64>(&self, q: &Quadrature, g: G) -> Result<f64, TheoryError> {
        let low = q.integrate(|l| g(l) * self.pdf(l), 0.0, self.z1)?.value;
        let high = q.integrate_to_inf(|l| g(l) * self.pdf(l), self.z2)?.value;
        Ok(low + high)
    }

    pub fn mean(&self, q: &Quadrature) -> Result<f64, TheoryError> {
        self.integrate(q, |l| l)
    }

    /// Closed-form mean (valid for b != 1 with the continuity cutoff).
    pub fn mean_closed_form(&self) -> f64 {
        let (a, b, c, g) = (self.a, self.b, self.c, self.gamma_b());
        1.0 / (a * (b - 1.0)) + g / a * (1.0 - b * (a * self.z1 + 1.0) / (b - 1.0))
            + g / c * (1.0 - (g / self.d).ln())
    }

    /// Posterior density `λ f(λ) / E[λ]`.
    pub fn posterior_pdf(&self, l: f64, mean: f64) -> f64 {
        l * self.pdf(l) / mean
    }
}

/// Distribution of the popularity of the vendor behind a random order.
#[derive(Debug, Clone, PartialEq)]
pub enum Popularity {
    Law(PopularityLaw),
    /// Observed vendor rates; the posterior weights each by `λ_i / Σλ`.
    Empirical(Vec<f64>),
}

/// Evaluates the model for one parameter set and popularity distribution.
#[derive(Debug, Clone)]
pub struct Theory {
    pub params: TheoryParams,
    pub popularity: Popularity,
    pub quad: Quadrature,
    mean: f64,
}

impl Theory {
    pub fn new(params: TheoryParams) -> Result<Self, TheoryError> {
        let law = PopularityLaw::new(params.a, params.b, params.c, params.d, params.z1, params.z2)?;
        Self::with_popularity(params, Popularity::Law(law))
    }

    pub fn with_popularity(params: TheoryParams, popularity: Popularity) -> Result<Self, TheoryError> {
        if !(params.delta_c > 0.0 && params.u > 0.0 && params.v > 0.0) {
            return Err(TheoryError::Invalid("radii must be > 0".into()));
        }
        if !(params.c_b >= 0.0 && params.w_gm >= 0.0) {
            return Err(TheoryError::Invalid("C_b and w_gm must be >= 0".into()));
        }
        let quad = Quadrature::default();
        let mean = match &popularity {
            Popularity::Law(law) => law.mean(&quad)?,
            Popularity::Empirical(ls) => {
                if ls.is_empty() || ls.iter().any(|l| !(*l >= 0.0)) {
                    return Err(TheoryError::Invalid("empirical rates must be non-empty and >= 0".into()));
                }
                ls.iter().sum::<f64>() / ls.len() as f64
            }
        };
        if !(mean > 0.0) {
            return Err(TheoryError::Invalid("mean popularity must be > 0".into()));
        }
        Ok(Self {
            params,
            popularity,
            quad,
            mean,
        })
    }

    pub fn with_quadrature(mut self, quad: Quadrature) -> Result<Self, TheoryError> {
        if let Popularity::Law(law) = &self.popularity {
            self.mean = law.mean(&quad)?;
        }
        self.quad = quad;
        Ok(self)
    }

    pub fn mean_popularity(&self) -> f64 {
        self.mean
    }

    /// `E_φ[g(λ)]` under the posterior popularity distribution.
    pub fn posterior_expectation<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64, TheoryError> {
        match &self.popularity {
            Popularity::Law(law) => Ok(law.integrate(&self.quad, |l| l * g(l))? / self.mean),
            Popularity::Empirical(ls) => {
                let total: f64 = ls.iter().sum();
                Ok(ls.iter().map(|&l| l * g(l)).sum::<f64>() / total)
            }
        }
    }

    pub fn prob(&self, lambda: f64, delta: f64) -> f64 {
        let p = &self.params;
        shareability_prob(lambda, delta, p.delta_c, p.u, p.v)
    }

    pub fn fraction_shareable(&self, delta: f64) -> Result<f64, TheoryError> {
        if delta <= 0.0 {
            return Ok(0.0);
        }
        self.posterior_expectation(|l| self.prob(l, delta))
    }

    /// Probability that a shareable order stays unbundled, for one vendor rate.
    pub fn psi(&self, lambda: f64, delta: f64) -> Result<f64, TheoryError> {
        let p = &self.params;
        let m = lambda_star(lambda, p.delta_c, p.v) * delta;
        let psi = p.c_b * odd_clique_sum(m, p.normalizer);
        if psi > 1.0 + 1e-12 {
            return Err(TheoryError::PsiAboveOne(psi));
        }
        Ok(psi)
    }

    /// `E_φ[ψ_sum · P]`, the coefficient of C_b in F_B.
    fn psi_weight(&self, delta: f64) -> Result<f64, TheoryError> {
        let norm = self.params.normalizer;
        let (dc, v) = (self.params.delta_c, self.params.v);
        self.posterior_expectation(|l| odd_clique_sum(lambda_star(l, dc, v) * delta, norm) * self.prob(l, delta))
    }

    pub fn fraction_bundled(&self, delta: f64) -> Result<f64, TheoryError> {
        if delta <= 0.0 {
            return Ok(0.0);
        }
        // validate ψ on the support before integrating
        let worst = self.max_psi_sum(delta) * self.params.c_b;
        if worst > 1.0 + 1e-12 {
            return Err(TheoryError::PsiAboveOne(worst));
        }
        let fs = self.fraction_shareable(delta)?;
        Ok((fs - self.params.c_b * self.psi_weight(delta)?).clamp(0.0, fs))
    }

    fn max_psi_sum(&self, delta: f64) -> f64 {
        // the odd-clique sum peaks at small m; scan a grid wide enough to cover it
        let norm = self.params.normalizer;
        let lam_scale = lambda_star(1.0, self.params.delta_c, self.params.v) * delta;
        let mut best: f64 = 0.0;
        for i in 0..400 {
            let l = 1e-4 * 1.05f64.powi(i);
            best = best.max(odd_clique_sum(l * lam_scale, norm));
        }
        best
    }

    pub fn mu(&self, delta: f64) -> f64 {
        self.params.mu.eval(delta)
    }

    pub fn theta_of_delta(&self, delta: f64) -> f64 {
        self.params.theta.eval(delta)
    }

    pub fn delta_of_theta(&self, theta: f64) -> Result<f64, TheoryError> {
        let l = self.params.theta;
        if l.slope == 0.0 {
            return Err(TheoryError::Invalid("theta regression slope is zero".into()));
        }
        let delta = (theta - l.intercept) / l.slope;
        if delta <= 0.0 {
            return Err(TheoryError::Domain(delta));
        }
        Ok(delta)
    }

    pub fn mileage_chain(&self, delta: f64) -> Result<MileageChain, TheoryError> {
        let f_s = self.fraction_shareable(delta)?;
        let f_b = self.fraction_bundled(delta)?;
        let f_dm = self.mu(delta) * f_b;
        let warning = (!(1.0..=20.0).contains(&delta))
            .then(|| format!("Delta = {delta:.3} min is outside the fitted range [1, 20]"));
        Ok(MileageChain {
            delta_min: delta,
            theta_min: self.theta_of_delta(delta),
            f_s,
            f_b,
            f_dm,
            f_gm: self.params.w_gm * f_dm,
            warning,
        })
    }

    /// Saved global mileage fraction as a function of patience.
    pub fn omega(&self, theta: f64) -> Result<f64, TheoryError> {
        Ok(self.mileage_chain(self.delta_of_theta(theta)?)?.f_gm)
    }

    /// Main-text form: `1 - 2/(E[λ] Δ) E_f[e^{-λΔ/2} - e^{-λΔ}]` with `Δ` from θ.
    pub fn patience_prob(&self, theta: f64) -> Result<f64, TheoryError> {
        let delta = self.delta_of_theta(theta)?;
        let e = |l: f64| (-l * delta / 2.0).exp() - (-l * delta).exp();
        let prior_mean = match &self.popularity {
            Popularity::Law(law) => law.integrate(&self.quad, e)?,
            Popularity::Empirical(ls) => ls.iter().map(|&l| e(l)).sum::<f64>() / ls.len() as f64,
        };
        Ok(1.0 - 2.0 / (self.mean * delta) * prior_mean)
    }
}

/// Outputs of the mileage chain at one batch duration.
#[derive(Debug, Clone, PartialEq)]
pub struct MileageChain {
    pub delta_min: f64,
    pub theta_min: f64,
    pub f_s: f64,
    pub f_b: f64,
    pub f_dm: f64,
    pub f_gm: f64,
    pub warning: Option<String>,
}

/// Probability that an order has at least one shareable partner.
pub fn shareability_prob(lambda: f64, delta: f64, delta_c: f64, u: f64, v: f64) -> f64 {
    let x = lambda * delta;
    if x < 1e-8 {
        return 0.0;
    }
    let s = (delta_c / v).powi(2);
    let h = x * s / 2.0;
    1.0 - (1.0 - (delta_c / u).powi(2)) * (-x * s).exp() - 2.0 / x * (v / u).powi(2) * (-h).exp() * -(-h).exp_m1()
}

/// `1 - (2/x)(e^{-x/2} - e^{-x})` for `U = V = δ_c`.
pub fn shareability_prob_simplified(x: f64) -> f64 {
    if x < 1e-8 {
        return 0.0;
    }
    let h = x / 2.0;
    1.0 - 2.0 / x * (-h).exp() * -(-h).exp_m1()
}

/// Area fraction of a customer disk shareable with an order whose customer is `r` from its vendor.
pub fn p_of_r(r: f64, delta_c: f64, v: f64) -> Result<f64, TheoryError> {
    let p = if r > delta_c {
        (delta_c / v).powi(2)
    } else {
        (r * r + delta_c * delta_c) / (2.0 * v * v)
    };
    if p > 1.0 + 1e-12 {
        return Err(TheoryError::InconsistentRadii(p));
    }
    Ok(p)
}

/// Equivalent intensity of orders shareable with a given one.
pub fn lambda_star(lambda: f64, delta_c: f64, v: f64) -> f64 {
    let q = (delta_c / v).powi(2);
    lambda * q * (1.0 - q / 4.0)
}

fn log_normalizer(m: f64, norm: CliqueNormalizer) -> f64 {
    match norm {
        CliqueNormalizer::Printed => (-(-m).exp_m1()).ln(),
        CliqueNormalizer::Exact => {
            // 1 - e^{-m}(1 + m), with a series for small m
            let v = if m < 1e-3 {
                m * m / 2.0 - m * m * m / 3.0 + m.powi(4) / 8.0
            } else {
                -(-m).exp_m1() - m * (-m).exp()
            };
            v.ln()
        }
    }
}

/// Clique-size probability `f_N(n)` for `m = λ* Δ`, n >= 2.
pub fn clique_size_pmf(n: u32, m: f64, norm: CliqueNormalizer) -> f64 {
    if m <= 0.0 || n < 2 {
        return 0.0;
    }
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    (-m + n as f64 * m.ln() - ln_fact - log_normalizer(m, norm)).exp()
}

/// Sums `g(n) f_N(n)` over n >= 2 in log space until terms vanish.
fn clique_series<G: Fn(u32) -> f64>(m: f64, norm: CliqueNormalizer, g: G) -> f64 {
    if m < 1e-12 {
        return 0.0;
    }
    let base = -m - log_normalizer(m, norm);
    let ln_m = m.ln();
    let mut ln_fact = 0.0;
    let mut sum = 0.0;
    let mut n = 2u32;
    ln_fact += 2f64.ln();
    loop {
        let term = (base + n as f64 * ln_m - ln_fact).exp();
        sum += g(n) * term;
        if n as f64 > m && term < 1e-18 * sum.max(1e-300) {
            break;
        }
        if n > 100_000 {
            break;
        }
        n += 1;
        ln_fact += (n as f64).ln();
    }
    sum
}

/// `Σ_{odd n >= 3} f_N(n) / n`.
pub fn odd_clique_sum(m: f64, norm: CliqueNormalizer) -> f64 {
    clique_series(m, norm, |n| if n % 2 == 1 { 1.0 / n as f64 } else { 0.0 })
}

/// `Σ_{n >= 2} f_N(n)`.
pub fn clique_mass(m: f64, norm: CliqueNormalizer) -> f64 {
    clique_series(m, norm, |_| 1.0)
}

/// Relative area error of the approximated shareable region at `η = r / δ_c`.
pub fn approx_error(eta: f64) -> f64 {
    if !(0.0..=1.0).contains(&eta) || eta == 0.0 {
        return 0.0;
    }
    let s = (1.0 - eta * eta / 4.0).sqrt();
    let big = PI * (eta * eta + 1.0);
    let h2 = eta * s + 2.0 * ((eta / 2.0) / s).atan() - 2.0 * eta * eta * (3f64.sqrt() / 4.0 + PI / 6.0);
    1.0 - big / (h2 + big)
}

/// Mean of `ε(η)` when customers are uniform in a disk of radius `ratio · δ_c`.
pub fn mean_approx_error(ratio: f64) -> Result<f64, TheoryError> {
    if !(ratio > 0.0) {
        return Err(TheoryError::Invalid(format!("U/delta_c must be > 0, got {ratio}")));
    }
    let q = Quadrature::with_tolerance(1e-12);
    let i = q.integrate(|x| x * approx_error(x), 0.0, ratio.min(1.0))?.value;
    Ok(2.0 / (ratio * ratio) * i)
}

/// Ordinary least squares fit with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Undefined when the observations have zero variance.
    pub r2: Option<f64>,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, TheoryError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(TheoryError::Degenerate(format!("need >= 2 paired points, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(TheoryError::Degenerate("all x values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let pred: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
    Ok(LinearFit {
        slope,
        intercept,
        r2: r_squared(ys, &pred),
    })
}

/// `1 - SS_res / SS_tot`; `None` for constant observations.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Option<f64> {
    let n = observed.len() as f64;
    if observed.len() < 2 {
        return None;
    }
    let m = observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = observed.iter().map(|y| (y - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = observed.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

/// Least-squares slope of a line through the origin.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> Result<f64, TheoryError> {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if xs.len() != ys.len() || sxx == 0.0 {
        return Err(TheoryError::Degenerate("no non-zero regressor".into()));
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx)
}

/// Simulation observations per batch duration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationData {
    pub delta_min: Vec<f64>,
    pub theta_min: Vec<f64>,
    pub bundled_frac: Vec<f64>,
    /// Relative delivery saving per bundled order, `F_dm / F_B`.
    pub mu_saving: Vec<f64>,
    pub dm_saved_frac: Vec<f64>,
    pub gm_saved_frac: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub c_b: f64,
    pub c_b_r2: Option<f64>,
    pub mu: LinearFit,
    pub theta: LinearFit,
    pub w_gm: f64,
    pub w_gm_r2: Option<f64>,
    pub params: TheoryParams,
}

/// Fits C_b, the μ and θ regressions and w_gm from simulation output.
///
/// F_B is linear in C_b, so its least-squares value has a closed form.
pub fn calibrate(data: &CalibrationData, base: &Theory) -> Result<Calibration, TheoryError> {
    let n = data.delta_min.len();
    let lens = [
        data.theta_min.len(),
        data.bundled_frac.len(),
        data.mu_saving.len(),
        data.dm_saved_frac.len(),
        data.gm_saved_frac.len(),
    ];
    if n < 5 || lens.iter().any(|&l| l != n) {
        return Err(TheoryError::Degenerate(format!(
            "need >= 5 complete observations, got {n} (lengths {lens:?})"
        )));
    }
    let mu = linear_fit(&data.delta_min, &data.mu_saving)?;
    let theta = linear_fit(&data.delta_min, &data.theta_min)?;
    let w_gm = fit_through_origin(&data.dm_saved_frac, &data.gm_saved_frac)?;
    let w_pred: Vec<f64> = data.dm_saved_frac.iter().map(|x| w_gm * x).collect();

    let mut fs = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for &d in &data.delta_min {
        fs.push(base.fraction_shareable(d)?);
        g.push(base.psi_weight(d)?);
    }
    let ggs: f64 = g.iter().map(|x| x * x).sum();
    if ggs == 0.0 {
        return Err(TheoryError::Degenerate("C_b has no effect on F_B at these durations".into()));
    }
    let c_b = (g
        .iter()
        .zip(&fs)
        .zip(&data.bundled_frac)
        .map(|((g, f), o)| g * (f - o))
        .sum::<f64>()
        / ggs)
        .max(0.0);
    let fb_pred: Vec<f64> = fs.iter().zip(&g).map(|(f, g)| f - c_b * g).collect();

    let mut params = base.params.clone();
    params.c_b = c_b;
    params.mu = Line {
        slope: mu.slope,
        intercept: mu.intercept,
    };
    params.theta = Line {
        slope: theta.slope,
        intercept: theta.intercept,
    };
    params.w_gm = w_gm;
    Ok(Calibration {
        c_b,
        c_b_r2: r_squared(&data.bundled_frac, &fb_pred),
        mu,
        theta,
        w_gm,
        w_gm_r2: r_squared(&data.gm_saved_frac, &w_pred),
        params,
    })
}

pub const THEORY_HEADER: &str = "theta_min,Delta_min,F_S,F_B,F_dm,F_gm,Omega";

/// Theory curve over a patience grid, as CSV.
pub fn theory_curve_csv(theory: &Theory, thetas: &[f64]) -> Result<String, TheoryError> {
    let mut s = String::from(THEORY_HEADER);
    s.push('\n');
    for &theta in thetas {
        let delta = theory.delta_of_theta(theta)?;
        let c = theory.mileage_chain(delta)?;
        let _ = writeln!(
            s,
            "{theta:.4},{delta:.4},{:.6},{:.6},{:.6},{:.6},{:.6}",
            c.f_s, c.f_b, c.f_dm, c.f_gm, c.f_gm
        );
    }
    Ok(s)
}
