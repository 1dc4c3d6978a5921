//! Link-level simulator for the uplink of a massive MU-MIMO system whose
//! baseband processing is decentralized across antenna clusters.
//!
//! The receive array is split into clusters that never exchange raw samples.
//! Each cluster runs a Gaussian message-passing (GMP) detector locally on its
//! own antennas; a fusion step then combines the per-cluster soft outputs
//! into global symbol beliefs. The crate provides
//!
//! * the detector itself ([`gmp`]) together with the fusion rule ([`fusion`]),
//! * linear MMSE and MRC baselines ([`baselines`]),
//! * a state-evolution model of the detector's convergence plus partition and
//!   complexity analysis ([`analysis`]),
//! * channel/modem plumbing ([`channel`], [`modem`]) and a reproducible
//!   Monte Carlo BER harness ([`harness`]) on top of seeded, splittable
//!   random streams ([`rng`]).
//!
//! All randomness is keyed by `(master seed, stream id)` so that every
//! experiment is reproducible bit for bit regardless of execution order.

pub mod analysis;
pub mod baselines;
pub mod channel;
pub mod coding;
pub mod fusion;
pub mod gmp;
pub mod harness;
pub mod modem;
pub mod numerics;
pub mod rng;

pub use num_complex::Complex64;

/// Crate-wide error type.
///
/// The variants mirror how failures are reported to callers: bad call-site
/// values (`Argument`), invalid experiment descriptions (`Config`), runtime
/// numerical breakdowns (`Numerical`), broken cross-component expectations
/// (`Contract`) and I/O (`Io`).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
