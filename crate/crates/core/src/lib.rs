//! Order bundling and batch dispatch for on-demand delivery fleets, together
//! with a closed-form model of how customer patience translates into bundled
//! orders and saved mileage.
//!
//! The operational pipeline runs per batch: [`shareability`] builds the order
//! graph and bundles, [`dispatch`] matches bundles to vehicles and repositions
//! idle ones. [`theory`] evaluates the analytical model, [`synthgen`] produces
//! synthetic order streams, [`impact`] converts fleet outputs into emissions
//! and costs, and [`experiment`] ties runs, sweeps and comparisons together.

pub mod dispatch;
pub mod experiment;
pub mod geo;
pub mod impact;
pub mod matching;
pub mod model;
pub mod quad;
pub mod shareability;
pub mod synthgen;
pub mod theory;

/// Integer seconds since scenario start.
pub type Timestamp = i64;
