//! Constructive equilibrium solvers: circle configurations, pinned segments,
//! monotone sweep relaxation, zero-centered shooting and right extensions.
//!
//! Every solver verifies its output with the residuals module before
//! returning it.

mod chain;
mod circle;
mod extend;
mod segment;
mod zero;

use serde::{Deserialize, Serialize};

use crate::error::{EquilibError, Result};

pub use circle::{solve_circle_equilibrium, CircleInit, CircleSolution};
pub use extend::{extend_right, probe_extensions, Extension, ExtensionProbe, ProbeCluster};
pub use segment::{solve_pinned_segment, sweep_relax, Direction, PinnedSolution, SweepStats};
pub use zero::{solve_zero_centered, ZeroCenteredProblem, ZeroCenteredSolution};

/// Truncation levels for the right-extension solver: the window length
/// starts at `initial_n` and is multiplied by `growth` up to `max_levels`
/// times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationSchedule {
    pub initial_n: usize,
    pub growth: usize,
    pub max_levels: usize,
    /// Number of particles at the truncated end that are excluded from the
    /// reported equilibrium and level comparison.
    pub guard: usize,
}

impl Default for TruncationSchedule {
    fn default() -> Self {
        Self {
            initial_n: 8,
            growth: 2,
            max_levels: 5,
            guard: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub residual_tol: f64,
    pub position_tol: f64,
    pub max_sweeps: usize,
    pub max_outer_iters: usize,
    pub rng_seed: u64,
    pub truncation: TruncationSchedule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            position_tol: 1e-10,
            max_sweeps: 10_000,
            max_outer_iters: 200,
            rng_seed: 0,
            truncation: TruncationSchedule::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || !(self.position_tol > 0.0) {
            return Err(EquilibError::invalid("options: tolerances must be positive"));
        }
        if self.max_sweeps == 0 || self.max_outer_iters == 0 {
            return Err(EquilibError::invalid("options: iteration limits must be positive"));
        }
        let t = &self.truncation;
        if t.initial_n < 2 || t.growth < 2 || t.max_levels < 2 || t.guard >= t.initial_n {
            return Err(EquilibError::invalid(
                "options: truncation needs initial_n >= 2, growth >= 2, max_levels >= 2, guard < initial_n",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn options_validation() {
        assert!(SolverOptions::default().validate().is_ok());
        let o = SolverOptions {
            residual_tol: 0.0,
            ..Default::default()
        };
        assert!(o.validate().is_err());
        let o: SolverOptions = serde_json::from_str(r#"{"residual_tol": 1e-8}"#).unwrap();
        assert_eq!(o.residual_tol, 1e-8);
        assert_eq!(o.max_sweeps, 10_000);
    }
}
