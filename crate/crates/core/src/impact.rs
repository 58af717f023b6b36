//! Life-cycle emissions, annual delivery cost and global projections.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImpactError {
    #[error("no {what} for fleet kind {kind:?}")]
    UnknownFleet { kind: FleetKind, what: &'static str },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("{0}")]
    Load(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FleetKind {
    #[default]
    Motorcycle,
    Car,
    Van,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Co2,
    Nox,
    Voc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesFactors {
    pub co2: f64,
    pub nox: f64,
    pub voc: f64,
}

impl SpeciesFactors {
    pub fn get(&self, s: Species) -> f64 {
        match s {
            Species::Co2 => self.co2,
            Species::Nox => self.nox,
            Species::Voc => self.voc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetFactors {
    /// Well-to-wheels, grams per km.
    pub wtw_g_per_km: SpeciesFactors,
    /// Vehicle cycle amortised over the lifespan, grams per vehicle per day.
    pub vehicle_cycle_g_per_day: SpeciesFactors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionFactors {
    pub lifespan_years: f64,
    pub fleets: BTreeMap<FleetKind, FleetFactors>,
}

impl Default for EmissionFactors {
    fn default() -> Self {
        let sf = |co2, nox, voc| SpeciesFactors { co2, nox, voc };
        let fleets = BTreeMap::from([
            (
                FleetKind::Motorcycle,
                FleetFactors {
                    wtw_g_per_km: sf(58.2, 0.0189, 0.0216),
                    vehicle_cycle_g_per_day: sf(159.0, 0.192, 0.200),
                },
            ),
            (
                FleetKind::Car,
                FleetFactors {
                    wtw_g_per_km: sf(129.3, 0.0420, 0.0478),
                    vehicle_cycle_g_per_day: sf(907.0, 1.03, 0.772),
                },
            ),
            (
                FleetKind::Van,
                FleetFactors {
                    wtw_g_per_km: sf(323.3, 0.105, 0.119),
                    vehicle_cycle_g_per_day: sf(1821.0, 2.02, 1.44),
                },
            ),
        ]);
        Self {
            lifespan_years: 10.0,
            fleets,
        }
    }
}

impl EmissionFactors {
    pub fn from_toml_str(text: &str) -> Result<Self, ImpactError> {
        let f: Self = toml::from_str(text).map_err(|e| ImpactError::Load(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, ImpactError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ImpactError::Load(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ImpactError> {
        if !(self.lifespan_years > 0.0) {
            return Err(ImpactError::Invalid("lifespan_years must be > 0".into()));
        }
        for (kind, f) in &self.fleets {
            for v in [f.wtw_g_per_km, f.vehicle_cycle_g_per_day]
                .iter()
                .flat_map(|s| [s.co2, s.nox, s.voc])
            {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(ImpactError::Invalid(format!("{kind:?} factor {v} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    pub fn fleet(&self, kind: FleetKind) -> Result<&FleetFactors, ImpactError> {
        self.fleets.get(&kind).ok_or(ImpactError::UnknownFleet {
            kind,
            what: "emission factors",
        })
    }
}

/// Daily vehicle-cycle emissions from a per-vehicle lifetime total in kg.
pub fn vehicle_cycle_per_day(total_kg: f64, lifespan_years: f64) -> f64 {
    1000.0 * total_kg / (365.0 * lifespan_years)
}

/// Grams per day emitted by `n_vehicles` covering `km_per_day` in total.
pub fn lifecycle_emissions(
    factors: &EmissionFactors,
    kind: FleetKind,
    n_vehicles: f64,
    km_per_day: f64,
    species: Species,
) -> Result<f64, ImpactError> {
    let f = factors.fleet(kind)?;
    Ok(n_vehicles * f.vehicle_cycle_g_per_day.get(species) + f.wtw_g_per_km.get(species) * km_per_day)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    pub purchase: f64,
    pub resale: f64,
    /// Maintenance, insurance and similar, per vehicle per year.
    pub annual_other: f64,
    /// Litres per 100 km.
    pub fuel_consumption: f64,
    /// Wage and benefits per driver per year.
    pub wage: f64,
    /// Per litre.
    pub fuel_price: f64,
    pub lifetime_years: f64,
}

impl CostParams {
    pub fn motorcycle() -> Self {
        Self {
            purchase: 2200.0,
            resale: 250.0,
            annual_other: 190.0,
            fuel_consumption: 2.5,
            wage: 17_900.0,
            fuel_price: 2.63,
            lifetime_years: 10.0,
        }
    }

    pub fn car() -> Self {
        Self {
            purchase: 16_400.0,
            resale: 1800.0,
            annual_other: 370.0,
            fuel_consumption: 6.3,
            ..Self::motorcycle()
        }
    }

    pub fn for_kind(kind: FleetKind) -> Result<Self, ImpactError> {
        match kind {
            FleetKind::Motorcycle => Ok(Self::motorcycle()),
            FleetKind::Car => Ok(Self::car()),
            FleetKind::Van => Err(ImpactError::UnknownFleet {
                kind,
                what: "default cost parameters",
            }),
        }
    }

    pub fn validate(&self) -> Result<(), ImpactError> {
        if !(self.purchase >= self.resale && self.resale >= 0.0) {
            return Err(ImpactError::Invalid("need purchase >= resale >= 0".into()));
        }
        if !(self.lifetime_years > 0.0) {
            return Err(ImpactError::Invalid("lifetime_years must be > 0".into()));
        }
        let rest = [self.annual_other, self.fuel_consumption, self.wage, self.fuel_price];
        if rest.iter().any(|v| !(*v >= 0.0)) {
            return Err(ImpactError::Invalid("cost parameters must be >= 0".into()));
        }
        Ok(())
    }
}

/// Itemised annual cost in USD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnualCost {
    pub depreciation: f64,
    pub wages: f64,
    pub fuel: f64,
    pub other: f64,
    pub total: f64,
}

pub fn annual_cost(p: &CostParams, n_max: f64, n_avg: f64, km_per_year: f64) -> Result<AnnualCost, ImpactError> {
    p.validate()?;
    if !(n_max >= n_avg && n_avg >= 0.0 && km_per_year >= 0.0) {
        return Err(ImpactError::Invalid(format!(
            "need N_max >= N_avg >= 0 and M >= 0, got {n_max}, {n_avg}, {km_per_year}"
        )));
    }
    let depreciation = n_max * (p.purchase - p.resale) / p.lifetime_years;
    let wages = n_avg * p.wage;
    let fuel = p.fuel_consumption / 100.0 * km_per_year * p.fuel_price;
    let other = n_max * p.annual_other;
    Ok(AnnualCost {
        depreciation,
        wages,
        fuel,
        other,
        total: depreciation + wages + fuel + other,
    })
}

pub const TREE_KG_PER_YEAR: f64 = 22.0;
pub const SCC_USD_PER_TONNE: f64 = 185.0;

/// Global emissions of private cars and vans, Mt CO2 per year.
pub const GLOBAL_CAR_VAN_MT: f64 = 3740.0;
pub const GROCERY_TRIP_SHARE: f64 = 0.05;
pub const ONLINE_SHARE_2023: f64 = 0.181;
pub const ONLINE_SHARE_2028: f64 = 0.263;
/// Saving share quoted alongside the projection inputs.
pub const BUNDLING_SHARE_STATED: f64 = 0.256;
/// Published 2023 saving, Mt.
pub const SAVINGS_2023_TABLE_MT: f64 = 7.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Projection {
    pub savings_mt: f64,
    pub trees: f64,
    pub scc_usd: f64,
}

impl Projection {
    /// Tree and carbon-cost equivalents of a saving in Mt.
    pub fn from_savings(savings_mt: f64) -> Self {
        Self {
            savings_mt,
            trees: savings_mt * 1e9 / TREE_KG_PER_YEAR,
            scc_usd: savings_mt * 1e6 * SCC_USD_PER_TONNE,
        }
    }
}

pub fn global_projection(
    total_mt: f64,
    r_gro: f64,
    r_online: f64,
    s_bundling: f64,
) -> Result<Projection, ImpactError> {
    for (name, r) in [("r_gro", r_gro), ("r_online", r_online), ("s_bundling", s_bundling)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(ImpactError::Invalid(format!("{name} must lie in [0, 1], got {r}")));
        }
    }
    if !(total_mt >= 0.0) {
        return Err(ImpactError::Invalid(format!("M_CO2 must be >= 0, got {total_mt}")));
    }
    Ok(Projection::from_savings(total_mt * r_gro * r_online * s_bundling))
}

/// Saving share implied by a published saving figure.
pub fn implied_bundling_share(savings_mt: f64, total_mt: f64, r_gro: f64, r_online: f64) -> f64 {
    savings_mt / (total_mt * r_gro * r_online)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifecycle_reference_values() {
        let f = EmissionFactors::default();
        let g = lifecycle_emissions(&f, FleetKind::Motorcycle, 10.0, 1000.0, Species::Co2).unwrap();
        assert!((g - 59_790.0).abs() < 1e-9);
        assert_eq!(lifecycle_emissions(&f, FleetKind::Car, 0.0, 0.0, Species::Nox).unwrap(), 0.0);
        let van = lifecycle_emissions(&f, FleetKind::Van, 0.0, 1.0, Species::Co2).unwrap();
        assert!((van - 323.3).abs() < 1e-12);
    }

    #[test]
    fn missing_fleet_is_an_error() {
        let mut f = EmissionFactors::default();
        f.fleets.remove(&FleetKind::Van);
        assert!(matches!(
            lifecycle_emissions(&f, FleetKind::Van, 1.0, 1.0, Species::Co2),
            Err(ImpactError::UnknownFleet { .. })
        ));
        assert!(CostParams::for_kind(FleetKind::Van).is_err());
    }

    #[test]
    fn cycle_per_day_conversion() {
        // 580.35 kg over 10 years is 159 g/day
        assert!((vehicle_cycle_per_day(580.35, 10.0) - 159.0).abs() < 1e-9);
    }

    #[test]
    fn cost_reference_value() {
        let c = annual_cost(&CostParams::motorcycle(), 100.0, 80.0, 1e6).unwrap();
        assert!((c.depreciation - 19_500.0).abs() < 1e-9);
        assert!((c.wages - 1_432_000.0).abs() < 1e-9);
        assert!((c.fuel - 65_750.0).abs() < 1e-6);
        assert!((c.other - 19_000.0).abs() < 1e-9);
        assert!((c.total - 1_536_250.0).abs() < 1e-6);
        assert_eq!(annual_cost(&CostParams::car(), 0.0, 0.0, 0.0).unwrap().total, 0.0);
        assert!(annual_cost(&CostParams::car(), 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn doubling_mileage_only_moves_fuel() {
        let p = CostParams::car();
        let a = annual_cost(&p, 50.0, 40.0, 2e5).unwrap();
        let b = annual_cost(&p, 50.0, 40.0, 4e5).unwrap();
        assert_eq!(a.depreciation, b.depreciation);
        assert_eq!(a.wages, b.wages);
        assert!((b.fuel - 2.0 * a.fuel).abs() < 1e-9);
    }

    #[test]
    fn projection_values() {
        let p = Projection::from_savings(SAVINGS_2023_TABLE_MT);
        assert!((p.scc_usd - 1.4726e9).abs() < 1e3);
        assert!((p.trees / 366e6 - 1.0).abs() < 0.02);
        let z = global_projection(GLOBAL_CAR_VAN_MT, 0.05, 0.181, 0.0).unwrap();
        assert_eq!((z.savings_mt, z.trees, z.scc_usd), (0.0, 0.0, 0.0));
        let stated =
            global_projection(GLOBAL_CAR_VAN_MT, GROCERY_TRIP_SHARE, ONLINE_SHARE_2023, BUNDLING_SHARE_STATED)
                .unwrap();
        assert!((stated.savings_mt - 8.6648).abs() < 1e-3);
        let s = implied_bundling_share(SAVINGS_2023_TABLE_MT, GLOBAL_CAR_VAN_MT, 0.05, 0.181);
        assert!((s - 0.2352).abs() < 1e-3);
        assert!(global_projection(1.0, 1.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn factors_round_trip_toml() {
        let f = EmissionFactors::default();
        let text = toml::to_string(&f).unwrap();
        assert_eq!(EmissionFactors::from_toml_str(&text).unwrap(), f);
    }
}
