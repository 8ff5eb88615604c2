//! Radial epiderivatives of nonsmooth functions, feasible and descent
//! direction cones, and Fritz John / KKT global-optimality certificates.
//!
//! Values are exact rationals wherever the data and the applicable rule
//! allow, and sampled floats otherwise; every value carries the method
//! that produced it.

pub mod certificates;
pub mod cli;
pub mod cones;
pub mod descent;
pub mod epiderivative;
pub mod error;
pub mod expr;
pub mod lp;
pub mod number;
pub mod point;
pub mod problem;

pub use epiderivative::{radial_epiderivative, EpiderivativeValue, EstimatorConfig, Method, Rule};
pub use error::{Error, Result};
pub use expr::{AffineForm, Expression, NormKind, RealFunction, Structure};
pub use number::{Number, Q};
pub use point::{Direction, Point};
pub use problem::{Domain, Problem};
