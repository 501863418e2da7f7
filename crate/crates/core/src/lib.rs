//! Exact local zeta functions `Z(s, f, v)` of polynomials in two variables over
//! p-adic fields, computed from the geometric Newton polygon, the arithmetic
//! Newton polygons of its degenerate facets, and a conical subdivision of the
//! first quadrant.
//!
//! Results are rational functions in the formal quantities `Q = q^-1` and
//! `T = q^-s` with factored denominators ([`algebra::ZetaRat`]). Every assembled
//! result can be checked against brute-force congruence counts through the
//! Poincaré series identity ([`oracle`]).

pub mod algebra;
pub mod arith;
pub mod cli;
pub mod engine;
pub mod error;
pub mod geom;
pub mod oracle;
pub mod poly;

pub use algebra::{DenFactor, PolyQT, Rat, SeriesT, ZetaRat};
pub use error::{Error, Result};
