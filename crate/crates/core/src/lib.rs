//! Magnetic micro-guides and beam splitters built from current-carrying wires
//! on an atom chip.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] wire circuits (filament segments plus a homogeneous bias)
//!   and builders for the Y splitter and its two-wire variants;
//! * [`field`] closed-form Biot–Savart fields and Jacobians;
//! * [`potential`] the adiabatic potential `V = μ|B|`, transverse minima,
//!   minima tracing through the splitter, saddles and trap frequencies;
//! * [`dynamics`] Monte Carlo transport of thermal ensembles;
//! * [`modes`] transverse Schrödinger modes on slice grids;
//! * [`io`] layout files, CSV/JSON emission and run manifests.
//!
//! Everything is SI internally. Micrometres, gauss and microkelvin only
//! appear at file and command-line boundaries (see [`units`]).

// `!(x > 0.0)` is the NaN-rejecting form used for parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod modes;
mod parallel;
pub mod potential;
pub mod units;

pub use error::{Error, Result};
pub use geometry::{Circuit, Vec3, WireSegment, YSplitterParams};
pub use parallel::with_threads;
pub use potential::AtomSpecies;
