//! Level-MSM short-rate toolkit.
//!
//! Fits, simulates and compares discrete-time short-rate models of the form
//!
//! ```text
//! r_t - r_{t-1} = alpha0 + alpha1 * r_{t-1} + r_{t-1}^gamma * x_t
//! ```
//!
//! where the innovation process `x_t` is a binomial Markov-switching
//! multifractal (MSM), iid normal / student-t (pure CEV), GARCH(1,1),
//! EGARCH(1,1), or a GARCH jump-diffusion. Models are estimated by maximum
//! likelihood and compared with per-observation BIC and (HAC-adjusted)
//! Vuong statistics. The [`cascades`] and [`scaling`] modules provide the
//! multifractal random measures behind the MSM together with structure
//! function diagnostics.

// Negated comparisons like `!(x > 0.0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascades;
pub mod error;
pub mod export;
pub mod fitting;
pub mod garch;
pub mod jump;
pub mod level;
pub mod loglik;
pub mod market_data;
pub mod models;
pub mod msm;
pub mod scaling;
pub mod selection;
pub mod stats;

pub use error::{Error, Result};
pub use loglik::LogDensities;

use rand::SeedableRng;

/// Random number generator used by every stochastic routine in the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Deterministic generator for a given seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
