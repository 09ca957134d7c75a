//! Particle configurations: finite windows of bi-infinite line
//! configurations with analytic tail models, and finite circle
//! configurations.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{EquilibError, Result};

/// Relative tolerance under which two gaps count as tied.
pub const GAP_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Analytic continuation of a window beyond its stored particles.
///
/// Positions are listed outward: a left tail starts at `first`/`anchor`
/// and moves left, a right tail moves right. Periodic gap patterns are
/// given in that outward order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    #[default]
    None,
    Arithmetic { first: f64, gap: f64 },
    Periodic { anchor: f64, gaps: Vec<f64> },
}

impl TailModel {
    fn validate(&self) -> Result<()> {
        match self {
            TailModel::None => Ok(()),
            TailModel::Arithmetic { first, gap } => {
                if !(*gap > 0.0) || !gap.is_finite() || !first.is_finite() {
                    return Err(EquilibError::invalid("arithmetic tail needs a finite gap > 0"));
                }
                Ok(())
            }
            TailModel::Periodic { anchor, gaps } => {
                if gaps.is_empty() || gaps.iter().any(|g| !(*g > 0.0) || !g.is_finite()) || !anchor.is_finite() {
                    return Err(EquilibError::invalid(
                        "periodic tail needs a nonempty pattern of positive gaps",
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, TailModel::None)
    }

    /// First tail position (the one adjacent to the window).
    pub fn start(&self) -> Option<f64> {
        match self {
            TailModel::None => None,
            TailModel::Arithmetic { first, .. } => Some(*first),
            TailModel::Periodic { anchor, .. } => Some(*anchor),
        }
    }

    /// Gap pattern in outward order (empty for `None`).
    pub fn pattern(&self) -> Vec<f64> {
        match self {
            TailModel::None => Vec::new(),
            TailModel::Arithmetic { gap, .. } => vec![*gap],
            TailModel::Periodic { gaps, .. } => gaps.clone(),
        }
    }

    /// The first `count` tail positions, moving away from the window.
    pub fn positions(&self, side: Side, count: usize) -> Vec<f64> {
        let Some(start) = self.start() else {
            return Vec::new();
        };
        let pattern = self.pattern();
        let dir = match side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        };
        let period: f64 = pattern.iter().sum();
        let mut offsets = Vec::with_capacity(pattern.len());
        let mut acc = 0.0;
        for g in &pattern {
            offsets.push(acc);
            acc += g;
        }
        (0..count)
            .map(|j| {
                let (q, r) = (j / pattern.len(), j % pattern.len());
                start + dir * (q as f64 * period + offsets[r])
            })
            .collect()
    }

    /// The tail split into arithmetic progressions `(first position, step)`,
    /// one per residue class of the period.
    pub fn progressions(&self, side: Side) -> Vec<(f64, f64)> {
        let Some(start) = self.start() else {
            return Vec::new();
        };
        let pattern = self.pattern();
        let period: f64 = pattern.iter().sum();
        let dir = match side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        };
        let mut acc = 0.0;
        pattern
            .iter()
            .map(|g| {
                let p = (start + dir * acc, period);
                acc += g;
                p
            })
            .collect()
    }
}

/// A sorted finite window of a line configuration plus tail models and
/// uniform-discreteness constants `c <= gap <= C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LineConfigSpec")]
pub struct LineConfig {
    pub window: Vec<f64>,
    #[serde(default)]
    pub left_tail: TailModel,
    #[serde(default)]
    pub right_tail: TailModel,
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
}

#[derive(Deserialize)]
struct LineConfigSpec {
    window: Vec<f64>,
    #[serde(default)]
    left_tail: TailModel,
    #[serde(default)]
    right_tail: TailModel,
    c: Option<f64>,
    #[serde(rename = "C")]
    big_c: Option<f64>,
}

impl TryFrom<LineConfigSpec> for LineConfig {
    type Error = EquilibError;

    fn try_from(s: LineConfigSpec) -> Result<Self> {
        LineConfig::with_bounds(s.window, s.left_tail, s.right_tail, s.c, s.big_c)
    }
}

impl LineConfig {
    /// Validated configuration with explicit gap bounds.
    pub fn new(window: Vec<f64>, left_tail: TailModel, right_tail: TailModel, c: f64, big_c: f64) -> Result<Self> {
        Self::with_bounds(window, left_tail, right_tail, Some(c), Some(big_c))
    }

    /// Missing bounds default to the extreme observed gaps.
    pub fn with_bounds(
        window: Vec<f64>,
        left_tail: TailModel,
        right_tail: TailModel,
        c: Option<f64>,
        big_c: Option<f64>,
    ) -> Result<Self> {
        if window.is_empty() {
            return Err(EquilibError::invalid("window: must contain at least one particle"));
        }
        if window.iter().any(|x| !x.is_finite()) {
            return Err(EquilibError::invalid("window: positions must be finite"));
        }
        if let Some(i) = window.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(EquilibError::invalid(format!(
                "window: not strictly increasing at index {}",
                i + 1
            )));
        }
        left_tail.validate()?;
        right_tail.validate()?;
        let mut cfg = LineConfig {
            window,
            left_tail,
            right_tail,
            c: 0.0,
            big_c: 0.0,
        };
        let gaps = cfg.all_gaps();
        if gaps.iter().any(|g| !(*g > 0.0)) {
            return Err(EquilibError::invalid("tail overlaps the window"));
        }
        let (lo, hi) = gaps
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &g| (lo.min(g), hi.max(g)));
        let c = c.unwrap_or(if gaps.is_empty() { 1.0 } else { lo });
        let big_c = big_c.unwrap_or(if gaps.is_empty() { c } else { hi });
        if !(c > 0.0) || !(big_c >= c) {
            return Err(EquilibError::invalid(format!("gap bounds need 0 < c <= C, got c={c}, C={big_c}")));
        }
        let slack = GAP_TIE_TOL * big_c;
        if let Some(g) = gaps.iter().find(|&&g| g < c - slack || g > big_c + slack) {
            return Err(EquilibError::invalid(format!("gap {g} outside [c, C] = [{c}, {big_c}]")));
        }
        cfg.c = c;
        cfg.big_c = big_c;
        Ok(cfg)
    }

    /// A finite configuration; bounds are the extreme gaps.
    pub fn finite(window: Vec<f64>) -> Result<Self> {
        Self::with_bounds(window, TailModel::None, TailModel::None, None, None)
    }

    /// Arithmetic progression with `n` stored particles starting at `start`
    /// and arithmetic tails on both sides.
    pub fn trivial(n: usize, gap: f64, start: f64) -> Result<Self> {
        if n == 0 {
            return Err(EquilibError::invalid("window: must contain at least one particle"));
        }
        let window: Vec<f64> = (0..n).map(|i| start + i as f64 * gap).collect();
        let last = window[n - 1];
        Self::new(
            window,
            TailModel::Arithmetic { first: start - gap, gap },
            TailModel::Arithmetic { first: last + gap, gap },
            gap,
            gap,
        )
    }

    /// Periodic configuration: `periods` repetitions of the gap `pattern`
    /// stored from `start`, continued periodically on both sides.
    pub fn periodic(pattern: &[f64], periods: usize, start: f64) -> Result<Self> {
        if pattern.is_empty() || periods == 0 {
            return Err(EquilibError::invalid("periodic configuration needs a pattern and periods >= 1"));
        }
        let p = pattern.len();
        let mut window = vec![start];
        for j in 0..p * periods {
            let last = *window.last().unwrap();
            window.push(last + pattern[j % p]);
        }
        let last = *window.last().unwrap();
        // right: next gap is pattern[0]; left: previous gap is pattern[p-1]
        let right_gaps: Vec<f64> = (1..=p).map(|j| pattern[j % p]).collect();
        let left_gaps: Vec<f64> = (0..p).map(|j| pattern[(2 * p - 2 - j) % p]).collect();
        let lo = pattern.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = pattern.iter().cloned().fold(0.0, f64::max);
        Self::new(
            window,
            TailModel::Periodic {
                anchor: start - pattern[p - 1],
                gaps: left_gaps,
            },
            TailModel::Periodic {
                anchor: last + pattern[0],
                gaps: right_gaps,
            },
            lo,
            hi,
        )
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.left_tail.is_none() && self.right_tail.is_none()
    }

    /// Successive differences of the window.
    pub fn gaps(&self) -> Vec<f64> {
        self.window.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Every distinct gap of the configuration: window gaps, the two
    /// junction gaps and the tail patterns.
    pub fn all_gaps(&self) -> Vec<f64> {
        let mut gaps = self.gaps();
        let first = self.window[0];
        let last = *self.window.last().unwrap();
        if let Some(s) = self.left_tail.start() {
            gaps.push(first - s);
            gaps.extend(self.left_tail.pattern());
        }
        if let Some(s) = self.right_tail.start() {
            gaps.push(s - last);
            gaps.extend(self.right_tail.pattern());
        }
        gaps
    }

    /// Gap between window particle `i` and its outer neighbour on `side`,
    /// which may be a tail particle.
    pub fn neighbour_gap(&self, i: usize, side: Side) -> Option<f64> {
        let x = self.window[i];
        match side {
            Side::Left => {
                if i > 0 {
                    Some(x - self.window[i - 1])
                } else {
                    self.left_tail.start().map(|s| x - s)
                }
            }
            Side::Right => {
                if i + 1 < self.window.len() {
                    Some(self.window[i + 1] - x)
                } else {
                    self.right_tail.start().map(|s| s - x)
                }
            }
        }
    }

    /// Particles on `side` of window index `i`, nearest first: remaining
    /// window particles, then up to `tail_count` tail particles.
    pub fn neighbours(&self, i: usize, side: Side, tail_count: usize) -> Vec<f64> {
        match side {
            Side::Left => {
                let mut v: Vec<f64> = self.window[..i].iter().rev().copied().collect();
                v.extend(self.left_tail.positions(Side::Left, tail_count));
                v
            }
            Side::Right => {
                let mut v: Vec<f64> = self.window[i + 1..].to_vec();
                v.extend(self.right_tail.positions(Side::Right, tail_count));
                v
            }
        }
    }

    /// Reflection `x -> 2 center - x`; window order and tails are swapped.
    pub fn mirrored(&self, center: f64) -> LineConfig {
        let reflect_tail = |t: &TailModel| match t {
            TailModel::None => TailModel::None,
            TailModel::Arithmetic { first, gap } => TailModel::Arithmetic {
                first: 2.0 * center - first,
                gap: *gap,
            },
            TailModel::Periodic { anchor, gaps } => TailModel::Periodic {
                anchor: 2.0 * center - anchor,
                gaps: gaps.clone(),
            },
        };
        LineConfig {
            window: self.window.iter().rev().map(|x| 2.0 * center - x).collect(),
            left_tail: reflect_tail(&self.right_tail),
            right_tail: reflect_tail(&self.left_tail),
            c: self.c,
            big_c: self.big_c,
        }
    }
}

/// `n >= 2` distinct points on the unit circle, by angle in `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircleConfigSpec")]
pub struct CircleConfig {
    pub angles: Vec<f64>,
}

#[derive(Deserialize)]
struct CircleConfigSpec {
    angles: Vec<f64>,
}

impl TryFrom<CircleConfigSpec> for CircleConfig {
    type Error = EquilibError;

    fn try_from(s: CircleConfigSpec) -> Result<Self> {
        CircleConfig::new(s.angles)
    }
}

impl CircleConfig {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.len() < 2 {
            return Err(EquilibError::invalid("circle configuration needs n >= 2"));
        }
        if angles.iter().any(|a| !(*a >= 0.0 && *a < TAU)) {
            return Err(EquilibError::invalid("angles must lie in [0, 2 pi)"));
        }
        if angles.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(EquilibError::invalid("angles must be strictly increasing"));
        }
        Ok(Self { angles })
    }

    /// Reduces arbitrary angles mod 2 pi and sorts them.
    pub fn from_unsorted(angles: &[f64]) -> Result<Self> {
        let mut a: Vec<f64> = angles
            .iter()
            .map(|x| {
                let r = x.rem_euclid(TAU);
                if r >= TAU {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        a.sort_by(|x, y| x.total_cmp(y));
        Self::new(a)
    }

    /// `n` equally spaced points starting at angle 0.
    pub fn equally_spaced(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| TAU * i as f64 / n as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Cyclic arc gaps; gap `i` runs from particle `i` to `i+1 mod n`.
    pub fn gaps(&self) -> Vec<f64> {
        let n = self.angles.len();
        (0..n)
            .map(|i| {
                if i + 1 < n {
                    self.angles[i + 1] - self.angles[i]
                } else {
                    TAU - self.angles[n - 1] + self.angles[0]
                }
            })
            .collect()
    }

    /// Rotation putting particle 0 at angle 0.
    pub fn canonicalize(&self) -> CircleConfig {
        let a0 = self.angles[0];
        if a0 == 0.0 {
            return self.clone();
        }
        let angles = self.angles.iter().map(|a| a - a0).collect();
        CircleConfig { angles }
    }

    /// Largest angular deviation from `other`, comparing particle by
    /// particle after canonicalizing both.
    pub fn max_deviation(&self, other: &CircleConfig) -> f64 {
        let a = self.canonicalize();
        let b = other.canonicalize();
        a.angles
            .iter()
            .zip(&b.angles)
            .map(|(x, y)| {
                let d = (x - y).rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(0.0, f64::max)
    }
}

/// Either kind of configuration. In JSON a circle is recognized by its
/// `angles` field, a line by `window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Configuration {
    Circle(CircleConfig),
    Line(LineConfig),
}

impl From<LineConfig> for Configuration {
    fn from(c: LineConfig) -> Self {
        Configuration::Line(c)
    }
}

impl From<CircleConfig> for Configuration {
    fn from(c: CircleConfig) -> Self {
        Configuration::Circle(c)
    }
}

/// Shorter-arc distance between two angles.
pub fn geodesic(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(TAU);
    d.min(TAU - d).min(PI)
}

/// Location of the extremal gaps of a gap sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapExtremes {
    pub max_value: f64,
    pub max_indices: Vec<usize>,
    pub min_value: f64,
    pub min_indices: Vec<usize>,
    /// Some maximal gap has a strictly smaller adjacent gap.
    pub max_strict: bool,
    /// Some minimal gap has a strictly larger adjacent gap.
    pub min_strict: bool,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= GAP_TIE_TOL * a.abs().max(b.abs())
}

fn extremes(gaps: &[f64], cyclic: bool) -> Option<GapExtremes> {
    if gaps.is_empty() {
        return None;
    }
    let max_value = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_value = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_indices: Vec<usize> = (0..gaps.len()).filter(|&i| tied(gaps[i], max_value)).collect();
    let min_indices: Vec<usize> = (0..gaps.len()).filter(|&i| tied(gaps[i], min_value)).collect();
    let n = gaps.len();
    let adjacent = |i: usize| -> Vec<f64> {
        let mut v = Vec::new();
        if i > 0 {
            v.push(gaps[i - 1]);
        } else if cyclic && n > 1 {
            v.push(gaps[n - 1]);
        }
        if i + 1 < n {
            v.push(gaps[i + 1]);
        } else if cyclic && n > 1 {
            v.push(gaps[0]);
        }
        v
    };
    let max_strict = max_indices
        .iter()
        .any(|&i| adjacent(i).iter().any(|&g| g < max_value && !tied(g, max_value)));
    let min_strict = min_indices
        .iter()
        .any(|&i| adjacent(i).iter().any(|&g| g > min_value && !tied(g, min_value)));
    Some(GapExtremes {
        max_value,
        max_indices,
        min_value,
        min_indices,
        max_strict,
        min_strict,
    })
}

impl LineConfig {
    /// Extremal window gaps (`None` for a single-particle window).
    pub fn extremal_gaps(&self) -> Option<GapExtremes> {
        extremes(&self.gaps(), false)
    }
}

impl CircleConfig {
    pub fn extremal_gaps(&self) -> GapExtremes {
        extremes(&self.gaps(), true).expect("n >= 2")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_gaps() {
        let c = LineConfig::finite(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(c.gaps(), vec![1.0, 1.0]);
        assert!(LineConfig::finite(vec![0.0, 0.0]).is_err());
        assert!(LineConfig::finite(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn circle_gaps() {
        let c = CircleConfig::new(vec![0.0, PI / 2.0, PI, 1.5 * PI]).unwrap();
        for g in c.gaps() {
            assert!((g - PI / 2.0).abs() < 1e-15);
        }
        let c = CircleConfig::new(vec![0.0, 1.0, 4.0]).unwrap();
        let g = c.gaps();
        assert_eq!(g[0], 1.0);
        assert_eq!(g[1], 3.0);
        assert!((g[2] - (TAU - 4.0)).abs() < 1e-15);
        assert!(CircleConfig::new(vec![1.0]).is_err());
        assert!(CircleConfig::new(vec![0.0, 7.0]).is_err());
    }

    #[test]
    fn extremal_gap_examples() {
        let c = LineConfig::finite(vec![0.0, 1.0, 3.0, 4.0]).unwrap();
        let e = c.extremal_gaps().unwrap();
        assert_eq!(e.max_indices, vec![1]);
        assert_eq!(e.max_value, 2.0);
        assert!(e.max_strict);

        let t = LineConfig::trivial(6, 1.0, 0.0).unwrap();
        let e = t.extremal_gaps().unwrap();
        assert_eq!(e.max_indices.len(), 5);
        assert!(!e.max_strict && !e.min_strict);

        let c = CircleConfig::new(vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let e = c.extremal_gaps();
        assert_eq!(e.max_indices, vec![3]);
        assert!((e.max_value - (TAU - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_examples() {
        let c = CircleConfig::new(vec![0.3, 0.3 + PI]).unwrap().canonicalize();
        assert_eq!(c.angles[0], 0.0);
        assert!((c.angles[1] - PI).abs() < 1e-15);
        let c = CircleConfig::new(vec![1.0, 2.0, 3.0]).unwrap().canonicalize();
        assert_eq!(c.angles, vec![0.0, 1.0, 2.0]);
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn periodic_constructor_continues_pattern() {
        let c = LineConfig::periodic(&[1.0, 2.0, 0.5], 2, 0.0).unwrap();
        let left = c.neighbours(0, Side::Left, 4);
        // gaps going left from 0: 0.5, 2, 1, 0.5
        assert_eq!(left, vec![-0.5, -2.5, -3.5, -4.0]);
        let right = c.neighbours(c.len() - 1, Side::Right, 4);
        let last = *c.window.last().unwrap();
        let d: Vec<f64> = right.iter().map(|x| x - last).collect();
        assert_eq!(d, vec![1.0, 3.0, 3.5, 4.5]);
        assert_eq!(c.c, 0.5);
        assert_eq!(c.big_c, 2.0);
    }

    #[test]
    fn tail_progressions_cover_tail_positions() {
        let t = TailModel::Periodic { anchor: -1.0, gaps: vec![1.0, 2.0] };
        let prog = t.progressions(Side::Left);
        assert_eq!(prog, vec![(-1.0, 3.0), (-2.0, 3.0)]);
        assert_eq!(t.positions(Side::Left, 4), vec![-1.0, -2.0, -4.0, -5.0]);
    }

    #[test]
    fn bounds_are_checked() {
        let r = LineConfig::new(vec![0.0, 1.0, 3.0], TailModel::None, TailModel::None, 1.0, 1.5);
        assert!(r.is_err());
        let r = LineConfig::new(
            vec![0.0, 1.0],
            TailModel::Arithmetic { first: 0.5, gap: 1.0 },
            TailModel::None,
            0.1,
            2.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn json_shapes() {
        let c: LineConfig = serde_json::from_str(
            r#"{"window": [0, 1, 2], "left_tail": {"kind": "arithmetic", "first": -1, "gap": 1},
                "right_tail": {"kind": "none"}, "c": 1, "C": 1}"#,
        )
        .unwrap();
        assert_eq!(c.window.len(), 3);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"C\":1"));
        let c: CircleConfig = serde_json::from_str(r#"{"angles": [0, 1, 4]}"#).unwrap();
        assert_eq!(c.len(), 3);
        assert!(serde_json::from_str::<CircleConfig>(r#"{"angles": [1, 0]}"#).is_err());
    }
}
