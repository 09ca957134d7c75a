use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::Chain;
use super::segment::relax;
use super::SolverOptions;
use crate::config::{LineConfig, TailModel};
use crate::error::{EquilibError, Result};
use crate::law::ForceLaw;
use crate::residual::residual_report;
use crate::special::bisect_decreasing;

/// Absolute slack on the gap-interval postcondition.
const GAP_SLACK: f64 = 1e-9;
const MAX_EXPANSIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    /// `x_0, ..., x_N`.
    pub positions: Vec<f64>,
    /// Gap of the arithmetic continuation beyond `x_N`.
    pub tail_gap: f64,
    pub levels: usize,
    /// Largest |net| over `x_0 .. x_{N-K}` in the full configuration.
    pub max_residual: f64,
    /// Interval every output gap must lie in.
    pub gap_bounds: (f64, f64),
}

impl Extension {
    pub fn gaps(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

struct Level<'a> {
    chain: Chain<'a>,
    start: usize,
    n: usize,
    gap: f64,
    target: f64,
    max_sweeps: usize,
}

impl Level<'_> {
    fn x0(&self) -> f64 {
        self.chain.x[self.start]
    }

    /// Puts `x_n` at `x_0 + span`, stretching the free particles
    /// proportionally, and re-relaxes them.
    fn set_span(&mut self, span: f64) -> Result<()> {
        let (s, n, x0) = (self.start, self.n, self.x0());
        let ratio = span / (self.chain.x[s + n] - x0);
        for i in s + 1..=s + n {
            self.chain.x[i] = x0 + (self.chain.x[i] - x0) * ratio;
        }
        self.chain.right_tail = TailModel::Arithmetic {
            first: self.chain.x[s + n] + self.gap,
            gap: self.gap,
        };
        relax(&mut self.chain, self.target, self.max_sweeps, None)?;
        Ok(())
    }

    /// Minus the net force on `x_0`; decreasing in the span.
    fn push_left(&self) -> Result<f64> {
        Ok(-self.chain.net(self.start)?)
    }

    fn solve(&mut self) -> Result<()> {
        let mut span = self.chain.x[self.start + self.n] - self.x0();
        self.set_span(span)?;
        let (mut lo, mut hi) = (span, span);
        let mut k = 0;
        if self.push_left()? > 0.0 {
            while self.push_left()? > 0.0 {
                lo = hi;
                hi *= 2.0;
                self.set_span(hi)?;
                k += 1;
                if k > MAX_EXPANSIONS {
                    return Err(EquilibError::InfeasibleBracket("extension span cannot balance x_0".into()));
                }
            }
        } else {
            while self.push_left()? < 0.0 {
                hi = lo;
                lo *= 0.5;
                self.set_span(lo)?;
                k += 1;
                if k > MAX_EXPANSIONS {
                    return Err(EquilibError::InfeasibleBracket("extension span cannot balance x_0".into()));
                }
            }
        }
        span = bisect_decreasing(lo, hi, 0.0, 200, |t| {
            self.set_span(t)?;
            self.push_left()
        })?;
        self.set_span(span)
    }
}

fn extend_with_gap(s_minus: &LineConfig, x0: f64, law: &ForceLaw, gap: f64, init_gap: f64, opts: &SolverOptions) -> Result<Extension> {
    opts.validate()?;
    let w = &s_minus.window;
    if w.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(EquilibError::invalid("S_minus: gaps must be positive"));
    }
    let last = w[w.len() - 1];
    if !(x0 > last) {
        return Err(EquilibError::invalid(format!("x0 = {x0} must exceed the last point {last} of S_minus")));
    }
    if !s_minus.right_tail.is_none() {
        return Err(EquilibError::invalid("S_minus must not have a right tail"));
    }
    let junction = x0 - last;
    let bounds = (s_minus.c.min(junction), s_minus.big_c.max(junction));
    let sched = opts.truncation;
    let start = w.len();

    let mut positions: Vec<f64> = vec![x0];
    let mut previous: Option<Vec<f64>> = None;
    let mut change = f64::INFINITY;
    let mut n = sched.initial_n;
    for level in 1..=sched.max_levels {
        while positions.len() <= n {
            let p = *positions.last().unwrap();
            positions.push(p + init_gap);
        }
        positions.truncate(n + 1);
        let mut x = w.clone();
        x.extend(&positions);
        let mut fixed = vec![true; x.len()];
        for f in &mut fixed[start + 1..start + n] {
            *f = false;
        }
        let mut chain = Chain::new(law, x, fixed);
        chain.left_tail = s_minus.left_tail.clone();
        let mut lv = Level {
            chain,
            start,
            n,
            gap,
            target: opts.residual_tol * 1e-3,
            max_sweeps: opts.max_sweeps,
        };
        lv.solve()?;
        positions = lv.chain.x[start..].to_vec();

        if let Some(prev) = &previous {
            let m = sched.initial_n - sched.guard;
            change = (0..=m).map(|i| (prev[i] - positions[i]).abs()).fold(0.0, f64::max);
            log::debug!("extension level {level}: n = {n}, change {change:e}");
            if change <= opts.position_tol {
                return finish(s_minus, law, positions, gap, level, bounds, opts);
            }
        }
        previous = Some(positions.clone());
        n *= sched.growth;
    }
    Err(EquilibError::NoConvergence {
        iterations: sched.max_levels,
        residual: change,
    })
}

fn finish(
    s_minus: &LineConfig,
    law: &ForceLaw,
    positions: Vec<f64>,
    gap: f64,
    levels: usize,
    bounds: (f64, f64),
    opts: &SolverOptions,
) -> Result<Extension> {
    let start = s_minus.len();
    let n = positions.len() - 1;
    let mut window = s_minus.window.clone();
    window.extend(&positions);
    let right = TailModel::Arithmetic {
        first: positions[n] + gap,
        gap,
    };
    let full = LineConfig::with_bounds(window, s_minus.left_tail.clone(), right, None, None)?;
    let report = residual_report(&full, law, 1e-15)?;
    let mut max_residual = 0.0f64;
    for p in &report.particles[start..=start + n - opts.truncation.guard] {
        max_residual = max_residual.max(p.net.abs());
        if p.net.abs() > opts.residual_tol + p.error_bound {
            return Err(EquilibError::NoConvergence {
                iterations: levels,
                residual: p.net.abs(),
            });
        }
    }
    let ext = Extension {
        positions,
        tail_gap: gap,
        levels,
        max_residual,
        gap_bounds: bounds,
    };
    if let Some(g) = ext.gaps().into_iter().find(|&g| g < bounds.0 - GAP_SLACK || g > bounds.1 + GAP_SLACK) {
        return Err(EquilibError::Postcondition(format!(
            "extension gap {g} outside [{}, {}]",
            bounds.0, bounds.1
        )));
    }
    Ok(ext)
}

/// Right extension of `S_minus` starting at `x0`: every output particle
/// but the last `guard` is in equilibrium with `S_minus`, the output and an
/// arithmetic continuation of gap `(c + C)/2` beyond the last one.
/// Truncation levels grow until the leading positions stop moving.
pub fn extend_right(s_minus: &LineConfig, x0: f64, law: &ForceLaw, opts: &SolverOptions) -> Result<Extension> {
    let gap = 0.5 * (s_minus.c + s_minus.big_c);
    extend_with_gap(s_minus, x0, law, gap, gap, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCluster {
    pub center: Vec<f64>,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionProbe {
    pub starts: usize,
    pub converged: usize,
    /// Clusters of the leading `initial_n - guard + 1` positions.
    pub clusters: Vec<ProbeCluster>,
}

/// Multi-start exploration: reruns the extension with continuation gaps
/// and initial spacings drawn from `[c, C]` and groups the results. Reports
/// what it finds and makes no uniqueness claim.
pub fn probe_extensions(
    s_minus: &LineConfig,
    x0: f64,
    law: &ForceLaw,
    starts: usize,
    radius: f64,
    opts: &SolverOptions,
) -> Result<ExtensionProbe> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let (c, big_c) = (s_minus.c, s_minus.big_c);
    let keep = opts.truncation.initial_n - opts.truncation.guard + 1;
    let mut clusters: Vec<ProbeCluster> = Vec::new();
    let mut converged = 0;
    for _ in 0..starts {
        let gap = if big_c > c { rng.gen_range(c..big_c) } else { c };
        let init = rng.gen_range(c..=big_c);
        match extend_with_gap(s_minus, x0, law, gap, init, opts) {
            Ok(ext) => {
                converged += 1;
                let head = ext.positions[..keep].to_vec();
                let near = clusters.iter_mut().find(|cl| {
                    cl.center.iter().zip(&head).all(|(a, b)| (a - b).abs() <= radius)
                });
                match near {
                    Some(cl) => cl.members += 1,
                    None => clusters.push(ProbeCluster { center: head, members: 1 }),
                }
            }
            Err(e) => log::debug!("probe start failed: {e}"),
        }
    }
    Ok(ExtensionProbe {
        starts,
        converged,
        clusters,
    })
}
