//! Numerical diagnostics around left-tail uniqueness: the difference force
//! field of two left configurations, the Mobius map of the right half
//! plane onto the disc, Blaschke partial sums, and a multi-start
//! reconstruction of unknown left particles from observed equilibrium.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LineConfig, Side, TailModel};
use crate::error::{EquilibError, Result};
use crate::law::ForceLaw;
use crate::residual::tail_force;
use crate::solver::SolverOptions;
use crate::special::{CompensatedSum, ROUNDING};

/// `f(w) = sum_{p in X \ Y} F(w - p) - sum_{p in Y \ X} F(w - p)` for two
/// left configurations (all points below 0) and `w >= 0`. Window points are
/// matched exactly; identical tails cancel, other tails are summed with
/// their error bounds. Returns `(value, error_bound)`.
pub fn eval_difference_field(x: &LineConfig, y: &LineConfig, w: f64, law: &ForceLaw) -> Result<(f64, f64)> {
    if !(w >= 0.0) || !w.is_finite() {
        return Err(EquilibError::domain(format!("field point must be >= 0, got {w}")));
    }
    for c in [x, y] {
        if c.window.iter().any(|&p| p >= 0.0) || !c.right_tail.is_none() {
            return Err(EquilibError::invalid("X and Y must lie strictly left of 0"));
        }
    }
    let mut acc = CompensatedSum::new();
    let (mut i, mut j) = (0, 0);
    let (a, b) = (&x.window, &y.window);
    while i < a.len() || j < b.len() {
        let take_x = j >= b.len() || (i < a.len() && a[i] < b[j]);
        let take_y = i >= a.len() || (j < b.len() && b[j] < a[i]);
        if take_x {
            acc.add(law.force(w - a[i])?);
            i += 1;
        } else if take_y {
            acc.add(-law.force(w - b[j])?);
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    let mut err = 0.0;
    if x.left_tail != y.left_tail {
        let (vx, ex) = tail_force(law, w, &x.left_tail, Side::Left, 1e-15)?;
        let (vy, ey) = tail_force(law, w, &y.left_tail, Side::Left, 1e-15)?;
        acc.add(vx);
        acc.add(-vy);
        err += ex + ey;
    }
    Ok((acc.value(), err + ROUNDING * acc.magnitude()))
}

/// `z = (w - 1)/(w + 1)`, mapping `[0, inf)` onto `[-1, 1)`.
pub fn mobius_map(w: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(EquilibError::domain(format!("Mobius map needs w >= 0, got {w}")));
    }
    if w.is_infinite() {
        return Ok(1.0);
    }
    Ok((w - 1.0) / (w + 1.0))
}

/// `w = (1 + z)/(1 - z)` for `z in [-1, 1)`.
pub fn inverse_mobius_map(z: f64) -> Result<f64> {
    if !(-1.0..1.0).contains(&z) {
        return Err(EquilibError::domain(format!("inverse Mobius map needs -1 <= z < 1, got {z}")));
    }
    Ok((1.0 + z) / (1.0 - z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeReport {
    /// Number of terms, `N + 1` (indices `0..=N`).
    pub terms: usize,
    /// `sum (1 - z_n) = sum 2/(1 + w_n)`.
    pub partial_sum: f64,
    /// `sum (1 - |z_n|)`.
    pub abs_partial_sum: f64,
    /// `sum_{n <= N} 2/(1 + C n)`.
    pub lower_bound_sum: f64,
    pub dominates: bool,
    /// Shift applied so that `w_0 = 0`.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeRow {
    pub n: usize,
    pub w_n: f64,
    pub z_n: f64,
    pub one_minus_z: f64,
    pub cumulative: f64,
}

/// The first `n + 1` points of `w` (window, then right tail), shifted so
/// the first is 0.
fn observed_points(w: &LineConfig, n: usize) -> Result<(Vec<f64>, f64)> {
    let need = n + 1;
    let mut pts: Vec<f64> = w.window.iter().take(need).copied().collect();
    if pts.len() < need {
        pts.extend(w.right_tail.positions(Side::Right, need - pts.len()));
    }
    if pts.len() < need {
        return Err(EquilibError::invalid(format!(
            "W has {} points, {need} needed for N = {n}",
            pts.len()
        )));
    }
    let shift = pts[0];
    Ok((pts.iter().map(|p| p - shift).collect(), shift))
}

/// Partial Blaschke sums over `w_0..w_N` after translating `w_0` to 0,
/// compared against `sum 2/(1 + C n)`, which they dominate whenever every
/// gap is at most `C`.
pub fn blaschke_partial_sum(w: &LineConfig, n: usize, upper_gap: Option<f64>) -> Result<BlaschkeReport> {
    let c = upper_gap.ok_or_else(|| EquilibError::invalid("C: required for the lower-bound curve"))?;
    if !(c > 0.0) {
        return Err(EquilibError::invalid("C must be positive"));
    }
    let (pts, shift) = observed_points(w, n)?;
    let mut sum = CompensatedSum::new();
    let mut abs_sum = CompensatedSum::new();
    let mut lower = CompensatedSum::new();
    for (k, &p) in pts.iter().enumerate() {
        let z = mobius_map(p)?;
        sum.add(2.0 / (1.0 + p));
        abs_sum.add(1.0 - z.abs());
        lower.add(2.0 / (1.0 + c * k as f64));
    }
    let partial_sum = sum.value();
    let lower_bound_sum = lower.value();
    Ok(BlaschkeReport {
        terms: pts.len(),
        partial_sum,
        abs_partial_sum: abs_sum.value(),
        lower_bound_sum,
        dominates: partial_sum >= lower_bound_sum * (1.0 - 4.0 * f64::EPSILON),
        shift,
    })
}

/// Per-term table of the Blaschke partial sums.
pub fn blaschke_table(w: &LineConfig, n: usize) -> Result<Vec<BlaschkeRow>> {
    let (pts, _) = observed_points(w, n)?;
    let mut cum = CompensatedSum::new();
    pts.iter()
        .enumerate()
        .map(|(k, &p)| {
            let z = mobius_map(p)?;
            let one_minus_z = 2.0 / (1.0 + p);
            cum.add(one_minus_z);
            Ok(BlaschkeRow {
                n: k,
                w_n: p,
                z_n: z,
                one_minus_z,
                cumulative: cum.value(),
            })
        })
        .collect()
}

/// Unknown left particles `u_1 > ... > u_m` between a known far tail and
/// the observed set `W`, which is assumed to be in equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionProblem {
    /// Observed particles: window starting at `w_0 >= 0`, plus right tail.
    pub observed: LineConfig,
    pub m: usize,
    /// Known particles left of the unknowns.
    #[serde(default)]
    pub far_left_tail: TailModel,
    pub law: ForceLaw,
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Range of initial gaps; defaults to the observed `[c, C]`.
    #[serde(default)]
    pub gap_range: Option<(f64, f64)>,
}

fn default_starts() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionCluster {
    pub center: Vec<f64>,
    pub members: usize,
    /// Smallest max-norm residual among the members.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub clusters: Vec<ReconstructionCluster>,
    pub starts: usize,
    pub converged_count: usize,
    pub equations: usize,
    pub unknowns: usize,
}

impl ReconstructionReport {
    /// Center of the most populated cluster.
    pub fn estimate(&self) -> Option<&[f64]> {
        self.clusters.iter().max_by_key(|c| c.members).map(|c| c.center.as_slice())
    }
}

/// Number of equations beyond the unknown count.
const SLACK: usize = 2;

struct Reconstruction<'a> {
    law: &'a ForceLaw,
    /// Observed points `w_j` carrying an equation.
    targets: Vec<f64>,
    observed: &'a LineConfig,
    far: &'a TailModel,
    w0: f64,
}

impl Reconstruction<'_> {
    fn residuals(&self, u: &[f64]) -> Result<Vec<f64>> {
        let all = &self.observed.window;
        self.targets
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                let mut acc = CompensatedSum::new();
                for &p in u {
                    acc.add(self.law.force(w - p)?);
                }
                acc.add(tail_force(self.law, w, self.far, Side::Left, 1e-15)?.0);
                for (k, &p) in all.iter().enumerate() {
                    if k < j {
                        acc.add(self.law.force(w - p)?);
                    } else if k > j {
                        acc.add(-self.law.force(p - w)?);
                    }
                }
                acc.add(-tail_force(self.law, w, &self.observed.right_tail, Side::Right, 1e-15)?.0);
                Ok(acc.value())
            })
            .collect()
    }

    fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.targets.len(), u.len());
        for (j, &w) in self.targets.iter().enumerate() {
            for (k, &p) in u.iter().enumerate() {
                jac[(j, k)] = -self.law.slope(w - p)?;
            }
        }
        Ok(jac)
    }

    fn ordered(&self, u: &[f64]) -> bool {
        let far_ok = self.far.start().is_none_or(|s| u[u.len() - 1] > s);
        far_ok && u[0] < self.w0 && u.windows(2).all(|p| p[0] > p[1])
    }

    /// Levenberg-Marquardt from `u`; returns the final point and its
    /// max-norm residual.
    fn solve(&self, mut u: Vec<f64>, opts: &SolverOptions) -> Result<(Vec<f64>, f64)> {
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        let mut r = self.residuals(&u)?;
        let mut lambda = 1e-3;
        for _ in 0..opts.max_outer_iters {
            if norm(&r) <= 1e-3 * opts.residual_tol {
                break;
            }
            let jac = self.jacobian(&u)?;
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let g = &jt * DVector::from_column_slice(&r);
            let mut improved = false;
            while lambda < 1e12 {
                let mut a = jtj.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
                }
                let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                if self.ordered(&trial) {
                    if let Ok(rt) = self.residuals(&trial) {
                        if sq(&rt) < sq(&r) {
                            u = trial;
                            r = rt;
                            lambda = (lambda * 0.3).max(1e-12);
                            improved = true;
                            break;
                        }
                    }
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        Ok((u, norm(&r)))
    }
}

/// Multi-start least-squares reconstruction of `m` unknown left particles
/// from the equilibrium equations at the first `m + 2` observed particles.
/// Converged starts are grouped into clusters of radius `position_tol`.
pub fn reconstruct_left_tail(problem: &ReconstructionProblem, opts: &SolverOptions) -> Result<ReconstructionReport> {
    opts.validate()?;
    let m = problem.m;
    if m == 0 {
        return Err(EquilibError::invalid("m must be at least 1"));
    }
    let obs = &problem.observed;
    let w0 = obs.window[0];
    if !(w0 >= 0.0) {
        return Err(EquilibError::invalid("observed set must start at w_0 >= 0"));
    }
    let equations = (m + SLACK).min(obs.len());
    if equations < m {
        return Err(EquilibError::InsufficientEquations { equations, unknowns: m });
    }
    let recon = Reconstruction {
        law: &problem.law,
        targets: obs.window[..equations].to_vec(),
        observed: obs,
        far: &problem.far_left_tail,
        w0,
    };
    let (lo, hi) = problem.gap_range.unwrap_or((obs.c, obs.big_c));
    if !(lo > 0.0 && hi >= lo) {
        return Err(EquilibError::invalid("gap range needs 0 < lo <= hi"));
    }
    // initial gaps must leave room above the far tail
    let room = problem.far_left_tail.start().map(|s| 0.999 * (w0 - s) / m as f64);

    let results: Vec<Option<(Vec<f64>, f64)>> = (0..problem.starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed.wrapping_add(k as u64));
            let mut h = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            if let Some(r) = room {
                h = h.min(r);
            }
            let init: Vec<f64> = (1..=m).map(|i| w0 - i as f64 * h).collect();
            match recon.solve(init, opts) {
                Ok((u, res)) if res <= opts.residual_tol => Some((u, res)),
                Ok((_, res)) => {
                    log::debug!("start {k}: residual {res:e}, not converged");
                    None
                }
                Err(e) => {
                    log::debug!("start {k}: {e}");
                    None
                }
            }
        })
        .collect();

    let mut clusters: Vec<ReconstructionCluster> = Vec::new();
    let mut converged_count = 0;
    for (u, res) in results.into_iter().flatten() {
        converged_count += 1;
        let near = clusters.iter_mut().find(|c| {
            c.center.iter().zip(&u).all(|(a, b)| (a - b).abs() <= opts.position_tol)
        });
        match near {
            Some(c) => {
                c.members += 1;
                c.residual = c.residual.min(res);
            }
            None => clusters.push(ReconstructionCluster {
                center: u,
                members: 1,
                residual: res,
            }),
        }
    }
    Ok(ReconstructionReport {
        clusters,
        starts: problem.starts,
        converged_count,
        equations,
        unknowns: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bisect_decreasing;

    fn left(window: Vec<f64>, tail: TailModel) -> LineConfig {
        LineConfig::with_bounds(window, tail, TailModel::None, None, None).unwrap()
    }

    #[test]
    fn difference_field_examples() {
        let law = ForceLaw::coulomb();
        let x = left(vec![-3.0, -1.0], TailModel::Arithmetic { first: -4.0, gap: 1.0 });
        assert_eq!(eval_difference_field(&x, &x, 0.5, &law).unwrap().0, 0.0);
        let x = left(vec![-1.0], TailModel::None);
        let y = left(vec![-2.0], TailModel::None);
        let (v, _) = eval_difference_field(&x, &y, 0.0, &law).unwrap();
        assert_eq!(v, 0.75);
        let (r, _) = eval_difference_field(&y, &x, 0.0, &law).unwrap();
        assert_eq!(r, -v);
        assert!(eval_difference_field(&x, &y, -0.5, &law).is_err());
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(mobius_map(1.0).unwrap(), 0.0);
        assert_eq!(mobius_map(0.0).unwrap(), -1.0);
        for w in [0.5, 2.0, 100.0] {
            let back = inverse_mobius_map(mobius_map(w).unwrap()).unwrap();
            assert!((back - w).abs() < 1e-12 * w.max(1.0));
        }
        assert!(mobius_map(-0.1).is_err());
    }

    #[test]
    fn blaschke_on_integers_is_harmonic() {
        let w = LineConfig::trivial(3, 1.0, 0.0).unwrap();
        let n = 1000;
        let r = blaschke_partial_sum(&w, n, Some(1.0)).unwrap();
        let h: f64 = (1..=n + 1).map(|k| 1.0 / k as f64).sum();
        assert!((r.partial_sum - 2.0 * h).abs() < 1e-12 * h);
        assert!(r.dominates);
        assert!((r.abs_partial_sum - (2.0 * h - 2.0)).abs() < 1e-10);
        assert!(blaschke_partial_sum(&w, n, None).is_err());
        let table = blaschke_table(&w, 3).unwrap();
        assert_eq!(table.len(), 4);
        assert_eq!(table[0].one_minus_z, 2.0);
    }

    #[test]
    fn planted_trivial_tail_is_recovered() {
        let observed = LineConfig::trivial(13, 1.0, 0.0).unwrap();
        let observed = LineConfig::new(observed.window, TailModel::None, observed.right_tail, 1.0, 1.0).unwrap();
        let problem = ReconstructionProblem {
            observed,
            m: 3,
            far_left_tail: TailModel::Arithmetic { first: -4.0, gap: 1.0 },
            law: ForceLaw::coulomb(),
            starts: 8,
            gap_range: Some((0.6, 1.3)),
        };
        let opts = SolverOptions {
            position_tol: 1e-6,
            ..Default::default()
        };
        let r = reconstruct_left_tail(&problem, &opts).unwrap();
        assert_eq!(r.clusters.len(), 1, "{r:?}");
        let est = r.estimate().unwrap();
        for (k, u) in est.iter().enumerate() {
            assert!((u + (k + 1) as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn single_unknown_matches_scalar_root() {
        // W = {0, 1, ...} with unit right tail, far tail from -2.5 leftward
        let observed = LineConfig::new(
            (0..6).map(f64::from).collect(),
            TailModel::None,
            TailModel::Arithmetic { first: 6.0, gap: 1.0 },
            1.0,
            1.0,
        )
        .unwrap();
        let far = TailModel::Arithmetic { first: -2.5, gap: 1.0 };
        let law = ForceLaw::coulomb();
        // balance at w_0 alone fixes u
        let right = tail_force(&law, 0.0, &observed.right_tail, Side::Right, 1e-15).unwrap().0
            + (1..6).map(|k| 1.0 / (k * k) as f64).sum::<f64>();
        let far_f = tail_force(&law, 0.0, &far, Side::Left, 1e-15).unwrap().0;
        let u = -bisect_decreasing(1e-6, 2.5 - 1e-9, 0.0, 200, |d| Ok::<_, ()>(1.0 / (d * d) + far_f - right)).unwrap();
        let mut obs = observed.clone();
        obs.window.truncate(1);
        obs.right_tail = TailModel::Arithmetic { first: 1.0, gap: 1.0 };
        let problem = ReconstructionProblem {
            observed: obs,
            m: 1,
            far_left_tail: far,
            law,
            starts: 4,
            gap_range: Some((0.5, 2.0)),
        };
        let r = reconstruct_left_tail(&problem, &SolverOptions::default()).unwrap();
        let est = r.estimate().unwrap();
        assert!((est[0] - u).abs() < 1e-8, "{} vs {u}", est[0]);
    }

    #[test]
    fn inconsistent_data_gives_no_clusters() {
        // gaps shrink to the right: no left completion balances w_0..w_2
        let observed = LineConfig::finite(vec![0.0, 3.0, 4.0, 4.5, 4.7]).unwrap();
        let problem = ReconstructionProblem {
            observed,
            m: 2,
            far_left_tail: TailModel::None,
            law: ForceLaw::coulomb(),
            starts: 5,
            gap_range: None,
        };
        let r = reconstruct_left_tail(&problem, &SolverOptions::default()).unwrap();
        assert_eq!(r.converged_count, 0);
        assert!(r.clusters.is_empty());
    }
}
