//! A line window with some particles held fixed, plus fixed analytic tails.
//! Provides per-particle net forces, exact one-dimensional placement by
//! bisection, Gauss-Seidel sweeps and a Newton polish.

use nalgebra::{DMatrix, DVector};

use crate::config::{Side, TailModel};
use crate::error::{EquilibError, Result};
use crate::law::ForceLaw;
use crate::residual::{tail_force, tail_slope};
use crate::special::CompensatedSum;

/// Relative margin by which a placement bracket is shrunk away from the
/// neighbouring particles.
const BRACKET_MARGIN: f64 = 1e-9;
const BISECTION_CAP: usize = 200;

#[derive(Debug, Clone)]
pub(crate) struct Chain<'a> {
    pub law: &'a ForceLaw,
    pub x: Vec<f64>,
    pub fixed: Vec<bool>,
    pub left_tail: TailModel,
    pub right_tail: TailModel,
    pub tail_tol: f64,
}

/// Outcome of placing one particle.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Placement {
    pub displacement: f64,
    pub flagged: bool,
}

impl<'a> Chain<'a> {
    pub fn new(law: &'a ForceLaw, x: Vec<f64>, fixed: Vec<bool>) -> Self {
        Self {
            law,
            x,
            fixed,
            left_tail: TailModel::None,
            right_tail: TailModel::None,
            tail_tol: 1e-15,
        }
    }

    pub fn free(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&i| !self.fixed[i]).collect()
    }

    /// Net force on particle `i` if it were at `xi`.
    pub fn net_at(&self, i: usize, xi: f64) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (j, &y) in self.x.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = (xi - y).abs();
            if d == 0.0 {
                return Err(EquilibError::domain(format!("coincident particles at {xi}")));
            }
            let f = self.law.force(d)?;
            acc.add(if j < i { f } else { -f });
        }
        acc.add(tail_force(self.law, xi, &self.left_tail, Side::Left, self.tail_tol)?.0);
        acc.add(-tail_force(self.law, xi, &self.right_tail, Side::Right, self.tail_tol)?.0);
        Ok(acc.value())
    }

    pub fn net(&self, i: usize) -> Result<f64> {
        self.net_at(i, self.x[i])
    }

    pub fn residuals(&self, free: &[usize]) -> Result<Vec<f64>> {
        free.iter().map(|&i| self.net(i)).collect()
    }

    pub fn max_residual(&self) -> Result<f64> {
        Ok(self.residuals(&self.free())?.iter().fold(0.0, |m, r| m.max(r.abs())))
    }

    fn neighbours(&self, i: usize) -> Result<(f64, f64)> {
        let lo = if i > 0 { Some(self.x[i - 1]) } else { self.left_tail.start() };
        let hi = if i + 1 < self.x.len() { Some(self.x[i + 1]) } else { self.right_tail.start() };
        match (lo, hi) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            _ => Err(EquilibError::invalid(format!("free particle {i} has no neighbour on one side"))),
        }
    }

    /// Moves particle `i` to the root of its net force between its current
    /// neighbours. If the force has one sign on the whole bracket the
    /// particle goes to the corresponding end and is flagged.
    pub fn place(&mut self, i: usize) -> Result<Placement> {
        let (lo, hi) = self.neighbours(i)?;
        let margin = BRACKET_MARGIN * (hi - lo);
        let (lo, hi) = (lo + margin, hi - margin);
        let old = self.x[i];
        let (new, flagged) = if self.net_at(i, lo)? <= 0.0 {
            (lo, true)
        } else if self.net_at(i, hi)? >= 0.0 {
            (hi, true)
        } else {
            let this = &*self;
            (crate::special::bisect_decreasing(lo, hi, 0.0, BISECTION_CAP, |t| this.net_at(i, t))?, false)
        };
        self.x[i] = new;
        Ok(Placement {
            displacement: new - old,
            flagged,
        })
    }

    /// Energy of all pairs with at least one free particle; tails excluded.
    pub fn energy(&self) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for i in 0..self.x.len() {
            for j in i + 1..self.x.len() {
                if self.fixed[i] && self.fixed[j] {
                    continue;
                }
                acc.add(self.law.potential(self.x[j] - self.x[i])?);
            }
        }
        Ok(acc.value())
    }

    fn ordered(&self, x: &[f64]) -> bool {
        let left_ok = self.left_tail.start().is_none_or(|s| s < x[0]);
        let right_ok = self.right_tail.start().is_none_or(|s| s > x[x.len() - 1]);
        left_ok && right_ok && x.windows(2).all(|w| w[1] > w[0])
    }

    /// `-J` for the free particles, where `J` is the Jacobian of the net
    /// forces. It is symmetric and diagonally dominant.
    fn stiffness(&self, free: &[usize]) -> Result<DMatrix<f64>> {
        let m = free.len();
        let mut a = DMatrix::zeros(m, m);
        let mut pos = vec![usize::MAX; self.x.len()];
        for (k, &i) in free.iter().enumerate() {
            pos[i] = k;
        }
        for (k, &i) in free.iter().enumerate() {
            let mut diag = 0.0;
            for j in 0..self.x.len() {
                if j == i {
                    continue;
                }
                let s = self.law.slope((self.x[i] - self.x[j]).abs())?;
                diag -= s;
                if pos[j] != usize::MAX {
                    a[(k, pos[j])] = s;
                }
            }
            diag -= tail_slope(self.law, self.x[i], &self.left_tail, Side::Left, self.tail_tol)?.0;
            diag -= tail_slope(self.law, self.x[i], &self.right_tail, Side::Right, self.tail_tol)?.0;
            a[(k, k)] = diag;
        }
        Ok(a)
    }

    /// Damped Newton on the free particles. With `energy_merit` the step is
    /// accepted only if the energy does not increase; otherwise the max
    /// residual must decrease. Returns the energies of accepted iterates.
    pub fn newton(&mut self, target: f64, max_iter: usize, energy_merit: bool) -> Result<Vec<f64>> {
        let free = self.free();
        let mut accepted = Vec::new();
        if free.is_empty() {
            return Ok(accepted);
        }
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut r = self.residuals(&free)?;
        let mut merit = if energy_merit { self.energy()? } else { norm(&r) };
        for _ in 0..max_iter {
            if norm(&r) <= target {
                break;
            }
            let a = self.stiffness(&free)?;
            let Some(chol) = a.cholesky() else { break };
            let step = chol.solve(&DVector::from_vec(r.clone()));
            let mut t = 1.0;
            let mut done = false;
            while t > 1e-10 {
                let mut trial = self.clone();
                for (k, &i) in free.iter().enumerate() {
                    trial.x[i] += t * step[k];
                }
                if trial.ordered(&trial.x) {
                    if let Ok(rt) = trial.residuals(&free) {
                        let m = if energy_merit { trial.energy()? } else { norm(&rt) };
                        if m <= merit {
                            let progressed = m < merit || norm(&rt) < norm(&r);
                            self.x = trial.x;
                            r = rt;
                            merit = m;
                            if energy_merit {
                                accepted.push(m);
                            }
                            done = progressed;
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            if !done {
                break;
            }
        }
        Ok(accepted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placement_finds_symmetric_root() {
        let law = ForceLaw::coulomb();
        let mut c = Chain::new(&law, vec![0.0, 0.5, 2.0], vec![true, false, true]);
        let p = c.place(1).unwrap();
        assert!((c.x[1] - 1.0).abs() < 1e-15);
        assert!((p.displacement - 0.5).abs() < 1e-15);
        assert!(!p.flagged);
    }

    #[test]
    fn newton_converges_from_offset() {
        let law = ForceLaw::coulomb();
        let mut c = Chain::new(&law, vec![0.0, 0.7, 1.1, 1.3, 3.0], vec![true, false, false, false, true]);
        c.newton(1e-13, 50, true).unwrap();
        assert!(c.max_residual().unwrap() < 1e-12);
        assert!((c.x[2] - 1.5).abs() < 1e-12);
    }
}
