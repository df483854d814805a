//! Whitening, directional whitening, zero-temperature min-sum and survey
//! propagation for q-coloring of random graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: simple undirected graphs with contiguous directed-edge
//!   indexing, random `G(N, M)` generation, balls and tree tests.
//! * [`coloring`]: legality, energy, exhaustive enumeration and a noisy
//!   local-search recolorer.
//! * [`whitening`]: node and directional whitening, the local equations
//!   they satisfy, fingerprints, and the naive forced-recolor iteration.
//! * [`local_minima`]: k-stable configurations, ball-restricted energy
//!   shifts, cavity fields, the factorization test and min-sum residuals.
//! * [`survey`]: survey propagation messages, the exact update, its
//!   sampling oracle, fixed-point iteration and the complexity.
//! * [`experiments`]: reproducible campaigns built on top of the above.

pub mod coloring;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod local_minima;
pub mod seed;
pub mod stats;
pub mod survey;
pub mod whitening;

pub use coloring::{Coloring, Energy, EntropyEstimate};
pub use error::{Error, Result};
pub use graph::{Ball, Graph};
pub use whitening::{DirectionalAssignment, Fingerprint, Whitening};

/// Largest supported number of colors. Color sets are kept in `u64` masks.
pub const MAX_COLORS: usize = 63;

/// Version string embedded in every experiment output.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
