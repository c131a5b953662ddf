//! Fractional energies of mollified piecewise-constant BV fields.
//!
//! The pipeline: build a [`fields::PiecewiseConstantField`], mollify it at
//! scale `ε` with a [`kernel::Mollifier`], evaluate the `W^{1/q,q}` energy of
//! the result with [`seminorm`], and fit the growth in `|ln ε|` with
//! [`asymptotics`]. [`perturbation`] adds a potential term and the two-scale
//! recovery sequences.
//!
//! Every numerical type is generic over [`Scalar`]; the aliases below fix it
//! to `f64`.

// NaN must fail the range checks, which `!(a < b)` expresses directly
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod constants;
pub mod error;
pub mod fields;
pub mod kernel;
pub mod mollify;
pub mod perturbation;
pub mod quadrature;
pub mod scalar;
pub mod seminorm;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Aabb = fields::Aabb<f64>;
pub type Domain = fields::Domain<f64>;
pub type JumpGeometry = fields::JumpGeometry<f64>;
pub type Field = fields::PiecewiseConstantField<f64>;
pub type Mollifier = kernel::Mollifier<f64>;
pub type Grid = mollify::Grid<f64>;
pub type SampledField = mollify::SampledField<f64>;
pub type SeminormResult = seminorm::SeminormResult<f64>;
pub type Schedule = asymptotics::Schedule<f64>;
pub type SweepSeries = asymptotics::SweepSeries<f64>;
pub type LimitReport = asymptotics::LimitReport<f64>;
pub type Potential = perturbation::Potential<f64>;
pub type DoubleLimitReport = perturbation::DoubleLimitReport<f64>;
pub type DimensionalConstant = constants::DimensionalConstant<f64>;
