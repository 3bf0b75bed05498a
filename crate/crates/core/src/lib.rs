//! Dynamical degrees, invariant classes, Green functions, canonical heights and periodic
//! points for loxodromic automorphisms of the affine plane, the algebraic torus and
//! Markov surfaces.

pub mod arith;
pub mod equidist;
pub mod error;
pub mod green;
pub mod heights;
pub mod io;
pub mod maps;
pub mod periodic;
pub mod picard_manin;

pub use error::{Error, Result};
pub use maps::{
    AutoOver, Coords, FactorOver, Generator, HenonComposition, HenonFactor, HenonFamily,
    HenonOver, MarkovOver, MarkovWord, Matrix2, MonomialAuto, MonomialOver, NumericMap, Point,
    Surface, SurfaceAutomorphism,
};
