use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SolverOptions;
use crate::config::CircleConfig;
use crate::error::{EquilibError, Result};
use crate::law::ForceLaw;
use crate::residual::circle_residual_report;
use crate::special::CompensatedSum;

/// Minimum separation between random initial angles.
const MIN_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircleInit {
    Random,
    Given(CircleConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleSolution {
    pub config: CircleConfig,
    pub iterations: usize,
    pub max_residual: f64,
}

fn random_angles(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut angles: Vec<f64> = Vec::with_capacity(n);
    while angles.len() < n {
        let t = rng.gen_range(0.0..TAU);
        let clear = angles.iter().all(|&a| {
            let d = (t - a).rem_euclid(TAU);
            d.min(TAU - d) >= MIN_SEPARATION
        });
        if clear {
            angles.push(t);
        }
    }
    angles.sort_by(f64::total_cmp);
    let a0 = angles[0];
    angles.iter().map(|a| a - a0).collect()
}

/// Pair energy as a function of the ccw offset `delta` in `(0, 2 pi)`.
/// Inside `|delta - pi| < s` the kink of `E(geodesic)` at pi is replaced
/// by the C^1 quadratic with matching value and slope at `pi -/+ s`.
struct PairEnergy<'a> {
    law: &'a ForceLaw,
    s: f64,
    curv: f64,
    base: f64,
}

impl<'a> PairEnergy<'a> {
    fn new(law: &'a ForceLaw, s: f64) -> Result<Self> {
        let f = law.force(PI - s)?;
        let curv = f / s;
        Ok(Self {
            law,
            s,
            curv,
            base: law.potential(PI - s)? - 0.5 * f * s,
        })
    }

    /// `(value, first derivative, second derivative)` in `delta`.
    fn eval(&self, delta: f64) -> Result<(f64, f64, f64)> {
        let off = delta - PI;
        if off.abs() < self.s {
            return Ok((self.base + 0.5 * self.curv * off * off, self.curv * off, self.curv));
        }
        let (u, sign) = if delta < PI { (delta, -1.0) } else { (TAU - delta, 1.0) };
        Ok((self.law.potential(u)?, sign * self.law.force(u)?, -self.law.slope(u)?))
    }
}

struct State {
    energy: f64,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

fn evaluate(pe: &PairEnergy, theta: &[f64]) -> Result<State> {
    let n = theta.len();
    let mut energy = CompensatedSum::new();
    let mut grad = vec![CompensatedSum::new(); n];
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let (e, d1, d2) = pe.eval(theta[j] - theta[i])?;
            energy.add(e);
            grad[j].add(d1);
            grad[i].add(-d1);
            hess[(i, i)] += d2;
            hess[(j, j)] += d2;
            hess[(i, j)] -= d2;
            hess[(j, i)] -= d2;
        }
    }
    // particle 0 is pinned at angle 0
    let grad: Vec<f64> = grad.iter().skip(1).map(|g| g.value()).collect();
    let hess = hess.view((1, 1), (n - 1, n - 1)).into_owned();
    Ok(State {
        energy: energy.value(),
        grad,
        hess,
    })
}

fn ordered(theta: &[f64]) -> bool {
    theta.windows(2).all(|w| w[1] > w[0]) && theta[theta.len() - 1] < TAU
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes the total pair energy over ordered angle vectors with
/// particle 0 pinned at 0, by damped Newton steps (gradient steps when the
/// Hessian is not positive definite) with backtracking.
pub fn solve_circle_equilibrium(
    n: usize,
    law: &ForceLaw,
    init: &CircleInit,
    opts: &SolverOptions,
) -> Result<CircleSolution> {
    opts.validate()?;
    if n < 2 {
        return Err(EquilibError::invalid("circle solver needs n >= 2"));
    }
    let mut theta = match init {
        CircleInit::Random => random_angles(n, opts.rng_seed),
        CircleInit::Given(c) => {
            if c.len() != n {
                return Err(EquilibError::invalid(format!("init has {} particles, expected {n}", c.len())));
            }
            c.canonicalize().angles
        }
    };
    let pe = PairEnergy::new(law, 0.5 * PI / n as f64)?;
    let mut st = evaluate(&pe, &theta)?;
    let mut iterations = 0;
    while iterations < opts.max_outer_iters {
        let g = max_abs(&st.grad);
        if g <= 1e-3 * opts.residual_tol {
            break;
        }
        iterations += 1;
        let rhs = DVector::from_iterator(n - 1, st.grad.iter().map(|v| -v));
        let step = match st.hess.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => rhs,
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let mut trial = theta.clone();
            for k in 1..n {
                trial[k] += t * step[k - 1];
            }
            if ordered(&trial) {
                let ts = evaluate(&pe, &trial)?;
                let lower = ts.energy < st.energy;
                let flat = ts.energy <= st.energy + 1e-14 * st.energy.abs() && max_abs(&ts.grad) < g;
                if lower || flat {
                    theta = trial;
                    st = ts;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let config = CircleConfig::new(theta)?;
    let report = circle_residual_report(&config, law)?;
    if report.max_abs_net > opts.residual_tol {
        return Err(EquilibError::NoConvergence {
            iterations,
            residual: report.max_abs_net,
        });
    }
    Ok(CircleSolution {
        config,
        iterations,
        max_residual: report.max_abs_net,
    })
}
