use serde::{Deserialize, Serialize};

use super::chain::Chain;
use super::segment::relax;
use super::SolverOptions;
use crate::config::LineConfig;
use crate::error::{EquilibError, Result};
use crate::law::ForceLaw;
use crate::residual::residual_report;
use crate::special::bisect_decreasing;

/// Targets `x_{-1} = a < 0 < b = x_1` for a configuration of `2n+1`
/// particles with `x_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCenteredProblem {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub law: ForceLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCenteredSolution {
    pub config: LineConfig,
    pub outer_iterations: usize,
    /// Largest |net| over particles other than `x_{-n}, x_0, x_n`.
    pub max_residual: f64,
}

const MAX_EXPANSIONS: usize = 60;

struct Shooter<'a> {
    chain: Chain<'a>,
    n: usize,
    target: f64,
    max_sweeps: usize,
}

impl Shooter<'_> {
    /// Moves an endpoint to `value`, rescales that side's interior onto
    /// the new span and re-relaxes.
    fn set_endpoint(&mut self, left: bool, value: f64) -> Result<()> {
        let n = self.n;
        let (end, range) = if left { (0, 1..n) } else { (2 * n, n + 1..2 * n) };
        let scale = value / self.chain.x[end];
        self.chain.x[end] = value;
        for i in range {
            self.chain.x[i] *= scale;
        }
        relax(&mut self.chain, self.target, self.max_sweeps, None)?;
        Ok(())
    }

    /// Signed target error, positive while the endpoint is too close:
    /// `x_{-1} - a` on the left, `b - x_1` on the right.
    fn miss(&self, left: bool, goal: f64) -> f64 {
        if left {
            self.chain.x[self.n - 1] - goal
        } else {
            goal - self.chain.x[self.n + 1]
        }
    }

    /// Places one endpoint so that its neighbour of 0 hits `goal`. The
    /// endpoint is parametrized by its distance `p` beyond the goal, and
    /// the miss is decreasing in `p`.
    fn shoot(&mut self, left: bool, goal: f64, tol: f64) -> Result<()> {
        let n = self.n;
        let end = if left { 0 } else { 2 * n };
        let at = |p: f64| if left { goal - p } else { goal + p };
        let beyond = if left { goal - self.chain.x[end] } else { self.chain.x[end] - goal };
        let mut p = if beyond > 0.0 { beyond } else { goal.abs() };
        let h0 = self.miss(left, goal);
        let (mut lo, mut hi) = (p, p);
        if h0 > 0.0 {
            let mut k = 0;
            loop {
                hi *= 2.0;
                self.set_endpoint(left, at(hi))?;
                if self.miss(left, goal) <= 0.0 {
                    break;
                }
                lo = hi;
                k += 1;
                if k > MAX_EXPANSIONS {
                    return Err(EquilibError::InfeasibleBracket(format!(
                        "no endpoint places the neighbour of 0 at {goal}"
                    )));
                }
            }
        } else {
            let mut k = 0;
            loop {
                lo *= 0.5;
                self.set_endpoint(left, at(lo))?;
                if self.miss(left, goal) >= 0.0 {
                    break;
                }
                hi = lo;
                k += 1;
                if k > MAX_EXPANSIONS {
                    return Err(EquilibError::InfeasibleBracket(format!(
                        "endpoint cannot approach {goal} closely enough"
                    )));
                }
            }
        }
        p = bisect_decreasing(lo, hi, tol, 200, |q| {
            self.set_endpoint(left, at(q))?;
            Ok::<_, EquilibError>(self.miss(left, goal))
        })?;
        self.set_endpoint(left, at(p))
    }
}

/// Nested shooting: the endpoints `x_{-n}`, `x_n` are adjusted in turn by
/// bisection, the one with the larger target error first, while the
/// interior is relaxed to equilibrium for every trial endpoint.
pub fn solve_zero_centered(problem: &ZeroCenteredProblem, opts: &SolverOptions) -> Result<ZeroCenteredSolution> {
    opts.validate()?;
    let ZeroCenteredProblem { a, b, n, ref law } = *problem;
    if !(a < 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(EquilibError::invalid(format!("targets need a < 0 < b, got a={a}, b={b}")));
    }
    if n == 0 {
        return Err(EquilibError::invalid("n must be at least 1"));
    }
    if n == 1 {
        return Ok(ZeroCenteredSolution {
            config: LineConfig::finite(vec![a, 0.0, b])?,
            outer_iterations: 0,
            max_residual: 0.0,
        });
    }

    let mut x = vec![0.0; 2 * n + 1];
    for k in 1..=n {
        x[n - k] = a * k as f64;
        x[n + k] = b * k as f64;
    }
    let mut fixed = vec![false; 2 * n + 1];
    fixed[0] = true;
    fixed[n] = true;
    fixed[2 * n] = true;
    let mut s = Shooter {
        chain: Chain::new(law, x, fixed),
        n,
        target: opts.residual_tol * 1e-3,
        max_sweeps: opts.max_sweeps,
    };
    relax(&mut s.chain, s.target, s.max_sweeps, None)?;

    let tol = opts.position_tol;
    let mut iterations = 0;
    loop {
        let el = s.miss(true, a).abs();
        let er = s.miss(false, b).abs();
        if el <= 0.5 * tol && er <= 0.5 * tol {
            break;
        }
        if iterations >= opts.max_outer_iters {
            return Err(EquilibError::NoConvergence {
                iterations,
                residual: el.max(er),
            });
        }
        s.shoot(el >= er, if el >= er { a } else { b }, 1e-2 * tol)?;
        iterations += 1;
    }

    let config = LineConfig::finite(s.chain.x.clone())?;
    let report = residual_report(&config, law, 1e-15)?;
    let mut max_residual = 0.0f64;
    for p in &report.particles {
        if p.index == 0 || p.index == n || p.index == 2 * n {
            continue;
        }
        max_residual = max_residual.max(p.net.abs());
        if p.net.abs() > opts.residual_tol + p.error_bound {
            return Err(EquilibError::NoConvergence {
                iterations,
                residual: p.net.abs(),
            });
        }
    }
    Ok(ZeroCenteredSolution {
        config,
        outer_iterations: iterations,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(a: f64, b: f64, n: usize) -> ZeroCenteredProblem {
        ZeroCenteredProblem {
            a,
            b,
            n,
            law: ForceLaw::coulomb(),
        }
    }

    #[test]
    fn single_layer_is_the_targets() {
        let s = solve_zero_centered(&problem(-1.0, 1.0, 1), &SolverOptions::default()).unwrap();
        assert_eq!(s.config.window, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn symmetric_two_layer_matches_scalar_root() {
        let f = |d: f64| 1.0 / (d * d);
        // F(x2 - 1) = F(1) + F(2) + F(x2 + 1)
        let x2 = bisect_decreasing(1.0 + 1e-9, 100.0, 0.0, 300, |x| {
            Ok::<_, ()>(f(x - 1.0) - f(1.0) - f(2.0) - f(x + 1.0))
        })
        .unwrap();
        let s = solve_zero_centered(&problem(-1.0, 1.0, 2), &SolverOptions::default()).unwrap();
        let w = &s.config.window;
        assert!((w[4] - x2).abs() < 1e-10, "{} vs {}", w[4], x2);
        assert!((w[0] + x2).abs() < 1e-10);
    }

    #[test]
    fn asymmetric_targets() {
        let s = solve_zero_centered(&problem(-1.0, 2.0, 3), &SolverOptions::default()).unwrap();
        let w = &s.config.window;
        assert!((w[2] + 1.0).abs() < 1e-8);
        assert!((w[4] - 2.0).abs() < 1e-8);
        assert!(s.max_residual < 1e-8);
    }

    #[test]
    fn invalid_targets() {
        assert!(solve_zero_centered(&problem(1.0, 2.0, 2), &SolverOptions::default()).is_err());
    }
}
