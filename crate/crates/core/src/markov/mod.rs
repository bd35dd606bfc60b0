//! Analysis of the X chain of a single node.
//!
//! With constant `p` the chain on `{1, ..., m}` moves from `X = k + 1` to
//! `X = k` with probability `k * p` and is absorbed at `X = 1`.
//!
//! Vectors over the chain use *positions* `1..=m` with position `j`
//! standing for state `X = m - j + 1`: position 1 is the worst start
//! `X = m` and position `m` is the absorbing state. Under this convention
//! the transition matrix is upper bidiagonal, its left eigenvectors are
//! signed binomial rows, and the limit distribution is `e_m`. In code
//! positions are zero-based.

mod classify;
mod dd;
mod distribution;
mod eigen;
mod evolve;
mod hitting;
mod transition;

pub use classify::{classify_schedule, ScheduleClassification, Verdict};
pub use dd::Dd;
pub use distribution::Distribution;
pub use eigen::{
    decompose_initial, eigen_system, eigenvectors, Coefficients, EigenSystem, MAX_EXACT_STATES,
};
pub use evolve::{evolve_exact, evolve_spectral, relative_sup_distance, ExactEvolution};
pub use hitting::{expected_hitting_time, hitting_time_bound};
pub use transition::{transition_matrix, TransitionMatrix};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("p = 0 gives a repeated eigenvalue 1; the eigenbasis needs p != 0")]
    DegenerateSpectrum,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("schedule invalid at t={t}: p_t = {p} ({reason})")]
    Schedule { t: u64, p: f64, reason: String },
    #[error("{m} states exceed the exact integer range of the eigenvectors (max {max})")]
    TooManyStates { m: usize, max: usize },
}

/// Checks `m >= 2`, `p > 0` and `(m - 1) p < 1`.
fn check_chain(m: usize, p: f64) -> Result<(), MarkovError> {
    if m < 2 {
        return Err(MarkovError::InvalidArgument(format!(
            "need at least 2 states, got {m}"
        )));
    }
    if !(p.is_finite() && p > 0.0) {
        return Err(MarkovError::InvalidArgument(format!(
            "sampling probability {p} must be positive"
        )));
    }
    if (m - 1) as f64 * p >= 1.0 {
        return Err(MarkovError::InvalidArgument(format!(
            "(m - 1) p = {} must stay below 1",
            (m - 1) as f64 * p
        )));
    }
    Ok(())
}

/// Diagonal and superdiagonal entry of the row at zero-based `pos`.
#[inline]
fn row_entries(m: usize, pos: usize, p: f64) -> (f64, f64) {
    let leave = (m - 1 - pos) as f64 * p;
    (1.0 - leave, leave)
}
