//! Reconstruction of truncated density matrices from displaced
//! photon-number statistics.
//!
//! A photon-number state `|s>` probed at displaced phase-space points
//! generates a distribution over the complex plane whose radial Fourier
//! components are linear images of the density-matrix diagonals. This
//! crate implements the forward model (displacement matrix elements,
//! phase-space densities, rejection sampling), the formal inversion of
//! infinite upper-triangular systems that undoes the linear map, and two
//! end-to-end reconstruction routes:
//!
//! * [`recon::tomogram`]: combines observables for every probe index
//!   `s = 0..dim-1`; off-diagonals come from small-radius limits inverted
//!   through a banded Toeplitz system.
//! * [`recon::single`]: uses a single probe index `s`; each diagonal band
//!   is recovered from derivative moments of one radial profile through a
//!   triangular coefficient system.
//!
//! Exact rational arithmetic backs the inversion engine wherever the
//! algebra is exact; the physics pipeline runs on `f64`/complex scalars.
//! Numeric code is generic over [`scalar::Scalar`], with the concrete
//! aliases [`C64`] and [`Exact`] exported at the crate root.

pub mod error;
pub mod estimate;
pub mod fit;
pub mod forward;
pub mod pipeline;
pub mod quadrature;
pub mod recon;
pub mod scalar;
pub mod special;
pub mod states;
pub mod tomogram;
pub mod triinv;

pub use error::{Error, Result};

/// Complex double-precision scalar used throughout the physics pipeline.
pub type C64 = num_complex::Complex64;

/// Arbitrary-precision rational scalar used by the exact inversion routes.
pub type Exact = num_rational::BigRational;
