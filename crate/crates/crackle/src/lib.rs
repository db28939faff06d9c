//! A simulation laboratory for the geometry and topology of extreme sample clouds.
//!
//! The crate samples Poisson point clouds whose radial density has either a
//! polynomial (heavy) or von Mises (light) tail, builds geometric graphs and
//! Čech complexes over them, counts isolated structures far from the origin,
//! and compares the observed counts, maxima, and partial sums against their
//! limiting Poisson, Fréchet, Gumbel, and stable laws.
//!
//! Modules:
//! - [`distributions`]: radial density families, quantiles, Poisson cloud sampling
//! - [`geometry`]: geometric graphs, connected components, minimum enclosing
//!   balls, Čech complexes
//! - [`topology`]: Betti numbers over GF(2), small-graph isomorphism, and the
//!   geometric indicator functions evaluated on tuples
//! - [`scaling`]: normalizing radii `R_{k,n}`, regime classification, and
//!   contractibility radii
//! - [`limits`]: limiting intensity measures, Fréchet/Gumbel finite-dimensional
//!   laws, and the stable series sampler
//! - [`census`]: replicated experiments, goodness-of-fit, and the Palm
//!   cross-check estimator
//! - [`cli`]: config files, run manifests, and the command-line front end

pub mod census;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod geometry;
pub mod limits;
mod quad;
pub mod scaling;
pub mod topology;

pub use error::{Error, Result};
