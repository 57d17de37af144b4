//! Exact discrete measures on the real line.
//!
//! * [`measure`]: finite atomic measures on faithful windows, shifts,
//!   averaging, restriction and sliding-window statistics.
//! * [`construction`]: a positive almost periodic measure whose masses tend
//!   to zero at infinity, built stage by stage with certificates.
//! * [`pwl`] and [`ap`]: piecewise-linear test functions, exact convolution
//!   with measures and almost-period defects.
//! * [`uniqueness`]: matching of nearby supports, lumps, and the bump
//!   product `Ψ` with its zero-point identity and far-field bound.

pub mod ap;
pub mod construction;
pub mod error;
pub mod interval;
pub mod io;
pub mod measure;
pub mod pwl;
pub mod scalar;
pub mod uniqueness;

pub use error::{Error, Result};
pub use interval::Interval;
pub use measure::{combine, make_measure, Atom, DiscreteMeasure, MeasureSource};
pub use scalar::Rational;
