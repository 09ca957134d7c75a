//! One-sided and net forces on particles of line and circle configurations.
//!
//! Sign convention: a force pushing a particle rightward (counterclockwise
//! on the circle) is positive. `F_minus` is the total force exerted by
//! particles on the left (clockwise half), which pushes rightward, so
//! `net = F_minus - F_plus`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CircleConfig, LineConfig, Side, TailModel};
use crate::error::{EquilibError, Result};
use crate::law::ForceLaw;
use crate::special::{CompensatedSum, ROUNDING};

/// Half-width of the band around pi inside which a circle pair counts as
/// antipodal and contributes no tangential force.
pub const ANTIPODAL_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleResidual {
    pub index: usize,
    #[serde(rename = "F_minus")]
    pub f_minus: f64,
    #[serde(rename = "F_plus")]
    pub f_plus: f64,
    pub net: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub particles: Vec<ParticleResidual>,
    pub max_abs_net: f64,
    pub max_error_bound: f64,
}

impl ResidualReport {
    fn from_particles(particles: Vec<ParticleResidual>) -> Self {
        let max_abs_net = particles.iter().map(|p| p.net.abs()).fold(0.0, f64::max);
        let max_error_bound = particles.iter().map(|p| p.error_bound).fold(0.0, f64::max);
        Self {
            particles,
            max_abs_net,
            max_error_bound,
        }
    }

    /// `max |net| <= tol + max error_bound`.
    pub fn in_equilibrium(&self, tol: f64) -> bool {
        self.max_abs_net <= tol + self.max_error_bound
    }

    /// Particles whose net force is nonzero beyond its error bound.
    pub fn out_of_equilibrium(&self) -> impl Iterator<Item = &ParticleResidual> {
        self.particles.iter().filter(|p| p.net.abs() > p.error_bound)
    }
}

/// One-sided force of a set of particles at positions `others` on a particle
/// at `x`, summed in the given order.
pub(crate) fn direct_sum(law: &ForceLaw, x: f64, others: impl IntoIterator<Item = f64>) -> Result<CompensatedSum> {
    let mut acc = CompensatedSum::new();
    for y in others {
        let d = (x - y).abs();
        if d == 0.0 {
            return Err(EquilibError::domain(format!("coincident particles at {x}")));
        }
        acc.add(law.force(d)?);
    }
    Ok(acc)
}

/// Force of a whole tail on a particle at `x`, `(value, error_bound)`.
pub(crate) fn tail_force(law: &ForceLaw, x: f64, tail: &TailModel, side: Side, tol: f64) -> Result<(f64, f64)> {
    tail_sum(law, x, tail, side, tol, false)
}

/// `sum F'(d)` over a tail, `(value, error_bound)`.
pub(crate) fn tail_slope(law: &ForceLaw, x: f64, tail: &TailModel, side: Side, tol: f64) -> Result<(f64, f64)> {
    tail_sum(law, x, tail, side, tol, true)
}

fn tail_sum(law: &ForceLaw, x: f64, tail: &TailModel, side: Side, tol: f64, slope: bool) -> Result<(f64, f64)> {
    let progs = tail.progressions(side);
    if progs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let share = tol / progs.len() as f64;
    let mut acc = CompensatedSum::new();
    let mut err = 0.0;
    for (first, step) in progs {
        let d = match side {
            Side::Left => x - first,
            Side::Right => first - x,
        };
        if !(d > 0.0) {
            return Err(EquilibError::domain(format!("tail particle at {first} not beyond {x}")));
        }
        let (v, e) = if slope {
            law.progression_slope_sum(d, step, share)?
        } else {
            law.progression_sum(d, step, share)?
        };
        acc.add(v);
        err += e;
    }
    Ok((acc.value(), err + ROUNDING * acc.magnitude()))
}

/// `(F_minus, F_plus, error_bound)` on window particle `index`. Window terms
/// are summed directly in increasing distance; tails use closed-form or
/// truncated progression sums accurate to `tol`.
pub fn side_forces(config: &LineConfig, index: usize, law: &ForceLaw, tol: f64) -> Result<(f64, f64, f64)> {
    if index >= config.len() {
        return Err(EquilibError::invalid(format!(
            "index {index} outside window of {} particles",
            config.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(EquilibError::invalid("tolerance must be positive"));
    }
    let x = config.window[index];
    let left = direct_sum(law, x, config.window[..index].iter().rev().copied())?;
    let right = direct_sum(law, x, config.window[index + 1..].iter().copied())?;
    let (lt, le) = tail_force(law, x, &config.left_tail, Side::Left, tol / 2.0)?;
    let (rt, re) = tail_force(law, x, &config.right_tail, Side::Right, tol / 2.0)?;
    let f_minus = left.value() + lt;
    let f_plus = right.value() + rt;
    let err = le + re + ROUNDING * (left.magnitude() + right.magnitude() + lt.abs() + rt.abs() + f_minus + f_plus);
    Ok((f_minus, f_plus, err))
}

pub fn residual_report(config: &LineConfig, law: &ForceLaw, tol: f64) -> Result<ResidualReport> {
    let particles = (0..config.len())
        .into_par_iter()
        .map(|i| {
            let (f_minus, f_plus, error_bound) = side_forces(config, i, law, tol)?;
            Ok(ParticleResidual {
                index: i,
                f_minus,
                f_plus,
                net: f_minus - f_plus,
                error_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualReport::from_particles(particles))
}

/// Tangential contribution of particle `q` on particle `p`: positive when
/// it pushes `p` counterclockwise. Returns `(force, from_clockwise_side)`.
/// The arc length is computed from the ordered pair so that the two
/// directions of a pair round identically and cancel exactly.
pub(crate) fn circle_pair(law: &ForceLaw, p: f64, q: f64) -> Result<(f64, bool)> {
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let s = (hi - lo).rem_euclid(TAU);
    if s == 0.0 {
        return Err(EquilibError::domain(format!("coincident particles at angle {p}")));
    }
    if (s - PI).abs() <= ANTIPODAL_BAND {
        return Ok((0.0, false));
    }
    let (arc, hi_is_ccw_of_lo) = if s < PI { (s, true) } else { (TAU - s, false) };
    let f = law.force(arc)?;
    // q lies counterclockwise of p along the short arc
    let q_ccw = (p == lo) == hi_is_ccw_of_lo;
    if q_ccw {
        Ok((-f, false))
    } else {
        Ok((f, true))
    }
}

pub fn circle_residual_report(config: &CircleConfig, law: &ForceLaw) -> Result<ResidualReport> {
    let a = &config.angles;
    let particles = (0..a.len())
        .map(|i| {
            let mut minus = CompensatedSum::new();
            let mut plus = CompensatedSum::new();
            for (j, &q) in a.iter().enumerate() {
                if j == i {
                    continue;
                }
                let (f, cw) = circle_pair(law, a[i], q)?;
                if cw {
                    minus.add(f);
                } else {
                    plus.add(-f);
                }
            }
            let (f_minus, f_plus) = (minus.value(), plus.value());
            Ok(ParticleResidual {
                index: i,
                f_minus,
                f_plus,
                net: f_minus - f_plus,
                error_bound: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualReport::from_particles(particles))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coulomb() -> ForceLaw {
        ForceLaw::coulomb()
    }

    #[test]
    fn three_point_example() {
        let c = LineConfig::finite(vec![0.0, 1.0, 3.0]).unwrap();
        let (m, p, e) = side_forces(&c, 1, &coulomb(), 1e-13).unwrap();
        assert_eq!(m, 1.0);
        assert_eq!(p, 0.25);
        assert!(e < 1e-14);
        let r = residual_report(&c, &coulomb(), 1e-13).unwrap();
        assert!((r.particles[1].net - 0.75).abs() < 1e-15);
        assert!((r.particles[0].net + (1.0 + 1.0 / 9.0)).abs() < 1e-15);
        assert!((r.max_abs_net - (1.0 + 1.0 / 9.0)).abs() < 1e-15);
        let total: f64 = r.particles.iter().map(|p| p.net).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn trivial_config_balances() {
        let c = LineConfig::trivial(41, 1.0, 0.0).unwrap();
        let r = residual_report(&c, &coulomb(), 1e-13).unwrap();
        assert!(r.max_abs_net <= r.max_error_bound);
        assert!(r.max_error_bound <= 1e-12);
        assert!(r.in_equilibrium(0.0));
    }

    #[test]
    fn nontrivial_periodic_config_is_not_balanced() {
        let c = LineConfig::periodic(&[1.0, 2.0], 5, 0.0).unwrap();
        let r = residual_report(&c, &coulomb(), 1e-13).unwrap();
        assert!(r.max_abs_net > 1e-3);
        assert!(!r.in_equilibrium(1e-10));
    }

    #[test]
    fn strict_max_gap_orders_left_forces() {
        // gaps 1, 3, 1.5: maximal gap [x, y] = [1, 4], left neighbour gap 1 smaller
        let c = LineConfig::finite(vec![0.0, 1.0, 4.0, 5.5]).unwrap();
        let (fx, _, _) = side_forces(&c, 1, &coulomb(), 1e-13).unwrap();
        let (fy, _, _) = side_forces(&c, 2, &coulomb(), 1e-13).unwrap();
        assert!(fy < fx);
    }

    #[test]
    fn coincident_particles_rejected() {
        let law = coulomb();
        assert!(direct_sum(&law, 1.0, [1.0]).is_err());
        let c = CircleConfig { angles: vec![0.0, 0.0] };
        assert!(circle_residual_report(&c, &law).is_err());
    }

    #[test]
    fn circle_examples() {
        let law = coulomb();
        let r = circle_residual_report(&CircleConfig::equally_spaced(4).unwrap(), &law).unwrap();
        assert!(r.max_abs_net < 1e-15);
        let r = circle_residual_report(&CircleConfig::new(vec![0.0, PI]).unwrap(), &law).unwrap();
        assert_eq!(r.max_abs_net, 0.0);

        let c = CircleConfig::new(vec![0.0, PI / 2.0, PI]).unwrap();
        let r = circle_residual_report(&c, &law).unwrap();
        assert!(r.particles[1].net.abs() < 1e-15);
        // particle at 0: pushed clockwise by pi/2, antipode contributes 0
        let f = law.force(PI / 2.0).unwrap();
        assert!((r.particles[0].net + f).abs() < 1e-15);
        assert!((r.particles[2].net - f).abs() < 1e-15);
        let total: f64 = r.particles.iter().map(|p| p.net).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn mirror_negates_nets() {
        let c = LineConfig::periodic(&[1.0, 1.7, 0.6], 3, 0.2).unwrap();
        let law = ForceLaw::stretched_exp(1.0).unwrap();
        let r = residual_report(&c, &law, 1e-14).unwrap();
        let m = residual_report(&c.mirrored(0.3), &law, 1e-14).unwrap();
        let n = c.len();
        for i in 0..n {
            assert!((r.particles[i].net + m.particles[n - 1 - i].net).abs() < 1e-12);
        }
    }
}
