//! Large deviations for Gaussian measures on finite coordinate systems.
//!
//! The crate covers Gaussian models with their samplers, Cameron-Martin rate
//! functions and their infima over sets, Monte-Carlo decay estimation,
//! exponential-tightness constants and a collection of reproducible scenarios.

pub mod error;
pub mod gauss;
pub mod mc;
pub mod normal;
pub mod rkhs;
pub mod scenarios;
pub mod seed;
pub mod sets;
pub mod tightness;

pub use error::{LdpError, Result};
pub use gauss::{Coords, GaussianModel, ModelDocument, Sampler, SpeedFunction, TimeGrid};
pub use mc::{DecayFit, Estimate, McParams};
pub use rkhs::{RateFunctional, RateInfimum, Representer};
pub use scenarios::{DecayReport, DecayRow, ScenarioKind, ScenarioSpec, Verdict};
pub use sets::{CompactSetSpec, Constraint, HalfSpace, LinearForm, Region, Seminorm};
pub use tightness::FerniqueConstants;
