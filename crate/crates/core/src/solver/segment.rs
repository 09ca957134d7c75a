use serde::{Deserialize, Serialize};

use super::chain::Chain;
use super::SolverOptions;
use crate::config::LineConfig;
use crate::error::{EquilibError, Result};
use crate::law::ForceLaw;
use crate::residual::residual_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    /// Signed displacement of every particle in this pass (0 when fixed).
    pub displacements: Vec<f64>,
    pub max_displacement: f64,
    /// Particles whose net force kept one sign on the whole bracket.
    pub flagged: Vec<usize>,
}

pub(crate) fn sweep(chain: &mut Chain, direction: Direction, mut trace: Option<&mut Vec<f64>>) -> Result<SweepStats> {
    let mut free = chain.free();
    if direction == Direction::RightToLeft {
        free.reverse();
    }
    let mut displacements = vec![0.0; chain.x.len()];
    let mut flagged = Vec::new();
    for i in free {
        let p = chain.place(i)?;
        displacements[i] = p.displacement;
        if p.flagged {
            flagged.push(i);
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(chain.energy()?);
        }
    }
    let max_displacement = displacements.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(SweepStats {
        displacements,
        max_displacement,
        flagged,
    })
}

/// Alternates Gauss-Seidel sweeps with Newton polishing until every free
/// particle has `|net| <= target`. Returns the number of sweeps used.
pub(crate) fn relax(chain: &mut Chain, target: f64, max_sweeps: usize, mut trace: Option<&mut Vec<f64>>) -> Result<usize> {
    let energy_merit = chain.left_tail.is_none() && chain.right_tail.is_none();
    let mut sweeps = 0;
    let mut burst = 2;
    loop {
        if chain.max_residual()? <= target {
            return Ok(sweeps);
        }
        let accepted = chain.newton(target, 50, energy_merit)?;
        if let Some(t) = trace.as_deref_mut() {
            t.extend(accepted);
        }
        let r = chain.max_residual()?;
        if r <= target {
            return Ok(sweeps);
        }
        if sweeps >= max_sweeps {
            return Err(EquilibError::NoConvergence {
                iterations: sweeps,
                residual: r,
            });
        }
        for _ in 0..burst.min(max_sweeps - sweeps) {
            sweep(chain, Direction::LeftToRight, trace.as_deref_mut())?;
            sweeps += 1;
        }
        burst = (burst * 2).min(64);
    }
}

/// One Gauss-Seidel pass over the particles not listed in `fixed`.
pub fn sweep_relax(
    config: &LineConfig,
    fixed: &[usize],
    law: &ForceLaw,
    direction: Direction,
) -> Result<(LineConfig, SweepStats)> {
    let n = config.len();
    let mut mask = vec![false; n];
    for &i in fixed {
        if i >= n {
            return Err(EquilibError::invalid(format!("fixed index {i} outside window")));
        }
        mask[i] = true;
    }
    if !mask[0] || !mask[n - 1] {
        return Err(EquilibError::invalid("both extreme particles must be fixed"));
    }
    let mut chain = Chain::new(law, config.window.clone(), mask);
    chain.left_tail = config.left_tail.clone();
    chain.right_tail = config.right_tail.clone();
    let stats = sweep(&mut chain, direction, None)?;
    let out = LineConfig::with_bounds(chain.x, config.left_tail.clone(), config.right_tail.clone(), None, None)?;
    Ok((out, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedSolution {
    pub interior: Vec<f64>,
    /// Energy after every coordinate update and every accepted Newton step.
    pub energy_trace: Vec<f64>,
    pub sweeps: usize,
    /// Largest |net| over interior particles, from the residuals module.
    pub max_residual: f64,
}

/// Equilibrium of `n_interior` free particles between two fixed groups,
/// by minimizing the energy of all pairs involving a free particle.
pub fn solve_pinned_segment(
    fixed_left: &[f64],
    fixed_right: &[f64],
    n_interior: usize,
    law: &ForceLaw,
    opts: &SolverOptions,
) -> Result<PinnedSolution> {
    opts.validate()?;
    if n_interior == 0 {
        return Err(EquilibError::invalid("n_interior must be at least 1"));
    }
    if fixed_left.is_empty() || fixed_right.is_empty() {
        return Err(EquilibError::InvalidPins("both pin groups must be nonempty".into()));
    }
    let mut left = fixed_left.to_vec();
    let mut right = fixed_right.to_vec();
    left.sort_by(f64::total_cmp);
    right.sort_by(f64::total_cmp);
    let (a, b) = (left[left.len() - 1], right[0]);
    if !(a < b) || left.iter().chain(&right).any(|x| !x.is_finite()) {
        return Err(EquilibError::InvalidPins(format!("max(left) = {a} must be below min(right) = {b}")));
    }
    let h = (b - a) / (n_interior + 1) as f64;
    let mut x = left.clone();
    x.extend((1..=n_interior).map(|k| a + k as f64 * h));
    x.extend(&right);
    let mut fixed = vec![true; x.len()];
    for f in &mut fixed[left.len()..left.len() + n_interior] {
        *f = false;
    }
    let mut chain = Chain::new(law, x, fixed);
    let mut trace = vec![chain.energy()?];
    let sweeps = relax(&mut chain, opts.residual_tol * 1e-2, opts.max_sweeps, Some(&mut trace))?;

    let config = LineConfig::finite(chain.x.clone())?;
    let report = residual_report(&config, law, 1e-15)?;
    let interior_range = left.len()..left.len() + n_interior;
    let mut max_residual = 0.0f64;
    for p in &report.particles[interior_range.clone()] {
        max_residual = max_residual.max(p.net.abs());
        if p.net.abs() > opts.residual_tol + p.error_bound {
            return Err(EquilibError::NoConvergence {
                iterations: sweeps,
                residual: p.net.abs(),
            });
        }
    }
    Ok(PinnedSolution {
        interior: chain.x[interior_range].to_vec(),
        energy_trace: trace,
        sweeps,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bisect_decreasing;

    #[test]
    fn single_interior_sits_midway() {
        let opts = SolverOptions::default();
        for law in [ForceLaw::coulomb(), ForceLaw::stretched_exp(1.0).unwrap()] {
            let s = solve_pinned_segment(&[0.0], &[2.0], 1, &law, &opts).unwrap();
            assert!((s.interior[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_interior_match_reduced_balance() {
        // symmetric pair 1.5 -/+ s: F(1.5 - s) = F(2s) + F(1.5 + s)
        let law = ForceLaw::coulomb();
        let f = |d: f64| 1.0 / (d * d);
        let s = bisect_decreasing(1e-9, 1.5 - 1e-9, 0.0, 200, |s| {
            Ok::<_, ()>(f(2.0 * s) + f(1.5 + s) - f(1.5 - s))
        })
        .unwrap();
        let sol = solve_pinned_segment(&[0.0], &[3.0], 2, &law, &SolverOptions::default()).unwrap();
        assert!((sol.interior[0] - (1.5 - s)).abs() < 1e-10);
        assert!((sol.interior[1] - (1.5 + s)).abs() < 1e-10);
    }

    #[test]
    fn energy_never_increases() {
        let law = ForceLaw::inverse_power(3.0).unwrap();
        let sol = solve_pinned_segment(&[-1.0, 0.0], &[7.0, 8.5], 6, &law, &SolverOptions::default()).unwrap();
        for w in sol.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn bad_pins_rejected() {
        let law = ForceLaw::coulomb();
        let r = solve_pinned_segment(&[0.0, 3.0], &[2.0], 1, &law, &SolverOptions::default());
        assert!(matches!(r, Err(EquilibError::InvalidPins(_))));
    }

    #[test]
    fn sweep_examples() {
        let law = ForceLaw::coulomb();
        let c = LineConfig::finite(vec![0.0, 0.5, 2.0]).unwrap();
        let (c1, s1) = sweep_relax(&c, &[0, 2], &law, Direction::LeftToRight).unwrap();
        assert!((c1.window[1] - 1.0).abs() < 1e-15);
        assert!((s1.max_displacement - 0.5).abs() < 1e-15);
        let (c2, s2) = sweep_relax(&c1, &[0, 2], &law, Direction::RightToLeft).unwrap();
        assert!(s2.max_displacement <= 1e-15);
        assert_eq!(c1.window, c2.window);
        assert!(sweep_relax(&c, &[0], &law, Direction::LeftToRight).is_err());
    }
}
