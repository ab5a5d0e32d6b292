//! Capacity bounds, user-identification cost and N-COMP group-testing
//! active-device discovery for the Rayleigh-fading many-access channel.
//!
//! * [`capacity`]: binary entropy, low-SNR non-coherent capacity, the
//!   message-length capacity bound and the identification-cost bound.
//! * [`channel`]: signature matrices, activity, fading, energy detection.
//! * [`ncomp`]: the N-COMP decision rule and error accounting.
//! * [`bounds`]: closed-form `q1`/`q2`, error bounds, `n_GT`, the gap and
//!   the threshold search.
//! * [`montecarlo`]: repeated-trial validation of the bounds.
//! * [`experiments`]: sweeps and CSV output used by the CLI.
//! * [`validate`]: the built-in oracle suite.

pub mod binomial;
pub mod bounds;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod montecarlo;
pub mod ncomp;
pub mod params;
pub mod rng;
pub mod validate;

pub use bounds::{BoundReport, DiscoveryConfig, ErrorTarget, Q1Mode};
pub use capacity::{CapacityFn, LowSnrRayleigh};
pub use error::{Error, Result};
pub use exec::Exec;
pub use params::SystemParams;
pub use rng::Seed;
