//! Checkable certificates: extremal-gap non-equilibrium on the line and the
//! circle, monotonicity of internal forces, gap ratios and periodic tails.
//!
//! An extremal-gap certificate for a gap `[x, y]` compares, term by term,
//! the one-sided force sums on `x` and `y` after sorting each by distance.
//! For a maximal gap every pair satisfies `F(y-side term) <= F(x-side
//! term)`, so `F_minus(y) <= F_minus(x)` and `F_plus(y) >= F_plus(x)`; a
//! strictly smaller neighbouring gap makes one comparison strict and then
//! `net(x) > net(y)`, so `x` and `y` cannot both be balanced. For a minimal
//! gap every inequality flips.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::config::{CircleConfig, Configuration, LineConfig, Side, TailModel, GAP_TIE_TOL};
use crate::error::{EquilibError, Result};
use crate::law::ForceLaw;
use crate::residual::ANTIPODAL_BAND;
use crate::special::{CompensatedSum, ROUNDING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    ExtremalGapLine,
    ExtremalGapCircle,
    MonotoneInternalForces,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
    /// Every termwise inequality held but the margins did not clear the
    /// error bounds.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        })
    }
}

/// One termwise comparison `lhs relation rhs`. `margin` is the signed slack
/// of the claimed relation (nonnegative when it holds) and `error` bounds
/// the floating-point error of `margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub label: String,
    pub term: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub margin: f64,
    pub error: f64,
    /// The row pairs a term with a missing one (counted as 0); it takes
    /// part in the aggregate but is not a termwise claim.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub padding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conclusion {
    pub statement: String,
    /// Certified lower bound on the quantity in `statement`.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub evidence: Vec<EvidenceRow>,
    pub conclusions: Vec<Conclusion>,
    /// First violating pair of particle indices, for a failed check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<(usize, usize)>,
}

impl Certificate {
    fn inapplicable(kind: CertificateKind, reason: impl Into<String>) -> Self {
        Self {
            kind,
            verdict: Verdict::Inapplicable,
            reason: Some(reason.into()),
            evidence: Vec::new(),
            conclusions: Vec::new(),
            violation: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certificate {:?}: {:?}", self.kind, self.verdict)?;
        if let Some(r) = &self.reason {
            writeln!(f, "  reason: {r}")?;
        }
        if !self.evidence.is_empty() {
            writeln!(
                f,
                "  {:<8} {:>5}  {:>22} {:>2} {:<22}  {:>12}  {:>9}",
                "label", "term", "lhs", "", "rhs", "margin", "error"
            )?;
        }
        for r in &self.evidence {
            writeln!(
                f,
                "  {:<8} {:>5}  {:>22.15e} {:>2} {:<22.15e}  {:>12.4e}  {:>9.2e}{}",
                r.label,
                r.term,
                r.lhs,
                r.relation.to_string(),
                r.rhs,
                r.margin,
                r.error,
                if r.padding { "  (padding)" } else { "" }
            )?;
        }
        for c in &self.conclusions {
            writeln!(f, "  {} >= {:.6e}", c.statement, c.lower_bound)?;
        }
        if let Some((i, j)) = self.violation {
            writeln!(f, "  first violation at particles ({i}, {j})")?;
        }
        Ok(())
    }
}

/// Floating-point error of `F(a) - F(b)` where the distances come from
/// subtracting coordinates of magnitude up to `scale`.
fn diff_error(law: &ForceLaw, a: f64, b: f64, scale: f64) -> Result<f64> {
    let term = |d: f64| -> Result<f64> {
        if d > 0.0 {
            Ok(ROUNDING * law.force(d)? + law.slope(d)?.abs() * 4.0 * f64::EPSILON * scale)
        } else {
            Ok(0.0)
        }
    };
    Ok(term(a)? + term(b)?)
}

/// Termwise comparison rows of one side, pairing sorted distances
/// `big[k]` with `small[k]`; a missing entry counts as zero force.
struct SideRows {
    rows: Vec<EvidenceRow>,
    /// Sum of all row margins minus their errors.
    lower: f64,
    violated: Option<usize>,
}

fn pair_rows(
    law: &ForceLaw,
    label: &str,
    big: &[f64],
    small: &[f64],
    s: f64,
    scale: f64,
    strict_first: bool,
) -> Result<SideRows> {
    // claim per row: s * (F(small[k]) - F(big[k])) >= 0; lhs is the term
    // with the larger nominal distance
    let force = |d: Option<&f64>| -> Result<f64> { d.map_or(Ok(0.0), |&d| law.force(d)) };
    let len = big.len().max(small.len());
    let mut rows = Vec::with_capacity(len);
    let mut lower = CompensatedSum::new();
    let mut violated = None;
    for k in 0..len {
        let (b, sm) = (big.get(k), small.get(k));
        let fb = force(b)?;
        let fs = force(sm)?;
        let margin = s * (fs - fb);
        let error = diff_error(law, b.copied().unwrap_or(0.0), sm.copied().unwrap_or(0.0), scale)?;
        let padding = b.is_none() || sm.is_none();
        let strict = k == 0 && strict_first;
        let relation = match (s > 0.0, strict) {
            (true, false) => Relation::Le,
            (true, true) => Relation::Lt,
            (false, false) => Relation::Ge,
            (false, true) => Relation::Gt,
        };
        if !padding && margin < -error && violated.is_none() {
            violated = Some(k);
        }
        lower.add(margin - error);
        rows.push(EvidenceRow {
            label: label.to_string(),
            term: k,
            lhs: fb,
            rhs: fs,
            relation,
            margin,
            error,
            padding,
        });
    }
    Ok(SideRows {
        rows,
        lower: lower.value(),
        violated,
    })
}

/// Gap kind relative to all gaps: `+1` maximal, `-1` minimal.
fn extremal_sign(g: f64, all: &[f64]) -> std::result::Result<f64, &'static str> {
    let max = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let is_max = g >= max - GAP_TIE_TOL * max;
    let is_min = g <= min + GAP_TIE_TOL * min;
    match (is_max, is_min) {
        (true, true) => Err("all gaps are equal; no strict extremal gap"),
        (true, false) => Ok(1.0),
        (false, true) => Ok(-1.0),
        (false, false) => Err("gap is neither maximal nor minimal"),
    }
}

fn strictly_beyond(s: f64, g: f64, neighbour: Option<f64>) -> bool {
    neighbour.is_some_and(|v| s * (g - v) > GAP_TIE_TOL * g)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    kind: CertificateKind,
    s: f64,
    left: SideRows,
    right: SideRows,
    left_rest: f64,
    right_rest: f64,
    strict_left: bool,
    strict_right: bool,
) -> Certificate {
    let left_lb = left.lower - left_rest;
    let right_lb = right.lower - right_rest;
    let total = left_lb + right_lb;
    let word = if s > 0.0 { "" } else { "-" };
    let conclusions = vec![
        Conclusion {
            statement: format!("{word}(F_minus(x) - F_minus(y))"),
            lower_bound: left_lb,
        },
        Conclusion {
            statement: format!("{word}(F_plus(y) - F_plus(x))"),
            lower_bound: right_lb,
        },
        Conclusion {
            statement: format!("{word}(net(x) - net(y))"),
            lower_bound: total,
        },
    ];
    let strict_ok = (strict_left && left.rows.first().is_some_and(|r| r.margin > r.error))
        || (strict_right && right.rows.first().is_some_and(|r| r.margin > r.error));
    let (verdict, reason, violation) = if let Some(k) = left.violated {
        (Verdict::Fail, Some(format!("left comparison {k} violated")), None)
    } else if let Some(k) = right.violated {
        (Verdict::Fail, Some(format!("right comparison {k} violated")), None)
    } else if strict_ok && total > 0.0 {
        (Verdict::Pass, None, None)
    } else {
        (
            Verdict::Inconclusive,
            Some("strict margin does not clear the error bounds".to_string()),
            None,
        )
    };
    let mut evidence = left.rows;
    evidence.extend(right.rows);
    Certificate {
        kind,
        verdict,
        reason,
        evidence,
        conclusions,
        violation,
    }
}

/// Lower bound on the unlisted rows of a side whose lists continue into a
/// tail: each such row is off by at most `|F'| delta`, where `delta` is how
/// far the tail's extreme gap overshoots `g`.
fn tail_rest(law: &ForceLaw, next: f64, tail: &TailModel, s: f64, g: f64) -> Result<f64> {
    let pattern = tail.pattern();
    if pattern.is_empty() {
        return Ok(0.0);
    }
    let extreme = if s > 0.0 {
        pattern.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        pattern.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let delta = (s * (extreme - g)).max(0.0);
    if delta == 0.0 {
        return Ok(0.0);
    }
    let c = pattern.iter().cloned().fold(f64::INFINITY, f64::min);
    let d = next - delta;
    Ok(delta * (law.slope(d)?.abs() + law.potential(d)? / c))
}

fn certify_line(config: &LineConfig, law: &ForceLaw, gap_index: usize) -> Result<Certificate> {
    let kind = CertificateKind::ExtremalGapLine;
    let gaps = config.gaps();
    if gap_index >= gaps.len() {
        return Err(EquilibError::invalid(format!("gap index {gap_index} outside window")));
    }
    let g = gaps[gap_index];
    let s = match extremal_sign(g, &config.all_gaps()) {
        Ok(s) => s,
        Err(r) => return Ok(Certificate::inapplicable(kind, r)),
    };
    let (ix, iy) = (gap_index, gap_index + 1);
    let (x, y) = (config.window[ix], config.window[iy]);
    let strict_left = strictly_beyond(s, g, config.neighbour_gap(ix, Side::Left));
    let strict_right = strictly_beyond(s, g, config.neighbour_gap(iy, Side::Right));
    if !strict_left && !strict_right {
        return Ok(Certificate::inapplicable(kind, "no strictly smaller/larger neighbouring gap"));
    }

    let envelope = law.slope_envelope_start();
    // enough tail terms that the unlisted distances lie where |F'| decreases
    let tail_terms = |tail: &TailModel| -> usize {
        let p = tail.pattern();
        if p.is_empty() {
            return 0;
        }
        let c = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let b = p.iter().cloned().fold(0.0, f64::max);
        2 * p.len() + ((envelope + 2.0 * b) / c).ceil() as usize
    };
    let tl = tail_terms(&config.left_tail);
    let tr = tail_terms(&config.right_tail);
    let left_pos = config.neighbours(ix, Side::Left, tl + 1);
    let right_pos = config.neighbours(iy, Side::Right, tr + 1);
    let scale = config
        .window
        .iter()
        .chain(&left_pos)
        .chain(&right_pos)
        .fold(0.0f64, |m, v| m.max(v.abs()));

    // left: F_minus(y) terms vs F_minus(x) terms
    let mut from_y: Vec<f64> = vec![y - x];
    from_y.extend(left_pos.iter().map(|w| y - w));
    let mut from_x: Vec<f64> = left_pos.iter().map(|w| x - w).collect();
    let (mut left_rest, mut right_rest) = (0.0, 0.0);
    if !config.left_tail.is_none() {
        let next = from_x.pop().unwrap();
        from_y.truncate(from_x.len());
        left_rest = tail_rest(law, next, &config.left_tail, s, g)?;
    }
    let left = pair_rows(law, "left", &from_y, &from_x, s, scale, strict_left)?;

    // right: F_plus(x) terms vs F_plus(y) terms
    let mut from_x: Vec<f64> = vec![y - x];
    from_x.extend(right_pos.iter().map(|z| z - x));
    let mut from_y: Vec<f64> = right_pos.iter().map(|z| z - y).collect();
    if !config.right_tail.is_none() {
        let next = from_y.pop().unwrap();
        from_x.truncate(from_y.len());
        right_rest = tail_rest(law, next, &config.right_tail, s, g)?;
    }
    let right = pair_rows(law, "right", &from_x, &from_y, s, scale, strict_right)?;
    Ok(finish(kind, s, left, right, left_rest, right_rest, strict_left, strict_right))
}

fn certify_circle(config: &CircleConfig, law: &ForceLaw, gap_index: usize) -> Result<Certificate> {
    let kind = CertificateKind::ExtremalGapCircle;
    let gaps = config.gaps();
    let n = gaps.len();
    if gap_index >= n {
        return Err(EquilibError::invalid(format!("gap index {gap_index} outside 0..{n}")));
    }
    let g = gaps[gap_index];
    let s = match extremal_sign(g, &gaps) {
        Ok(s) => s,
        Err(r) => return Ok(Certificate::inapplicable(kind, r)),
    };
    let (ix, iy) = (gap_index, (gap_index + 1) % n);
    let strict_left = strictly_beyond(s, g, Some(gaps[(gap_index + n - 1) % n]));
    let strict_right = strictly_beyond(s, g, Some(gaps[(gap_index + 1) % n]));
    if !strict_left && !strict_right {
        return Ok(Certificate::inapplicable(kind, "no strictly smaller/larger neighbouring gap"));
    }
    let a = &config.angles;
    // distances to the particles on the clockwise (or counterclockwise)
    // half circle, sorted; antipodes contribute nothing
    let half = |p: usize, ccw: bool| -> Vec<f64> {
        let mut d: Vec<f64> = (0..n)
            .filter(|&q| q != p)
            .map(|q| if ccw { (a[q] - a[p]).rem_euclid(TAU) } else { (a[p] - a[q]).rem_euclid(TAU) })
            .filter(|&d| d < PI - ANTIPODAL_BAND && d > 0.0)
            .collect();
        d.sort_by(f64::total_cmp);
        d
    };
    let (ax, bx) = (half(ix, false), half(ix, true));
    let (ay, by) = (half(iy, false), half(iy, true));
    let left = pair_rows(law, "cw", &ay, &ax, s, TAU, strict_left)?;
    let right = pair_rows(law, "ccw", &bx, &by, s, TAU, strict_right)?;
    let mut cert = finish(kind, s, left, right, 0.0, 0.0, strict_left, strict_right);
    // summand counts: the x-side half circle must have at least as many
    // terms as the y-side one (max gap), or at most as many (min gap)
    let counts = [("cw summands", ax.len(), ay.len()), ("ccw summands", by.len(), bx.len())];
    for (label, xs, ys) in counts {
        let (lhs, rhs) = (ys as f64, xs as f64);
        let margin = s * (rhs - lhs);
        cert.conclusions.push(Conclusion {
            statement: format!("{label}: {xs} vs {ys}"),
            lower_bound: margin,
        });
    }
    Ok(cert)
}

/// Certificate that the configuration is not in equilibrium, built from
/// an extremal gap with a strictly smaller (for a maximal gap) or larger
/// (for a minimal gap) neighbour. Gap `i` runs from particle `i` to the next.
pub fn certify_extremal_gap(config: &Configuration, law: &ForceLaw, gap_index: usize) -> Result<Certificate> {
    match config {
        Configuration::Line(c) => certify_line(c, law, gap_index),
        Configuration::Circle(c) => certify_circle(c, law, gap_index),
    }
}

/// Signed forces exerted on each particle of `range` by particles of
/// `range` only. Passes iff they are nondecreasing left to right, up to
/// rounding plus `tol`.
pub fn check_internal_force_monotonicity(
    config: &LineConfig,
    law: &ForceLaw,
    range: Range<usize>,
    tol: f64,
) -> Result<Certificate> {
    if range.end > config.len() || range.len() < 2 {
        return Err(EquilibError::invalid(format!(
            "window {}..{} must select at least two of {} particles",
            range.start,
            range.end,
            config.len()
        )));
    }
    let pts = &config.window[range.clone()];
    let mut forces = Vec::with_capacity(pts.len());
    let mut errs = Vec::with_capacity(pts.len());
    for (i, &p) in pts.iter().enumerate() {
        let mut acc = CompensatedSum::new();
        for (j, &q) in pts.iter().enumerate() {
            if j != i {
                let f = law.force((p - q).abs())?;
                acc.add(if j < i { f } else { -f });
            }
        }
        forces.push(acc.value());
        errs.push(ROUNDING * acc.magnitude());
    }
    let mut evidence = Vec::new();
    let mut violation = None;
    for k in 0..pts.len() - 1 {
        let margin = forces[k + 1] - forces[k];
        let error = errs[k] + errs[k + 1] + tol;
        if margin < -error && violation.is_none() {
            violation = Some((range.start + k, range.start + k + 1));
        }
        evidence.push(EvidenceRow {
            label: "pair".into(),
            term: range.start + k,
            lhs: forces[k],
            rhs: forces[k + 1],
            relation: Relation::Le,
            margin,
            error,
            padding: false,
        });
    }
    Ok(Certificate {
        kind: CertificateKind::MonotoneInternalForces,
        verdict: if violation.is_some() { Verdict::Fail } else { Verdict::Pass },
        reason: violation.map(|(i, j)| format!("internal force decreases from particle {i} to {j}")),
        evidence,
        conclusions: Vec::new(),
        violation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRatioReport {
    pub max_ratio: f64,
    /// The pair of window gaps `(i, i+1)` attaining the maximum.
    pub gap_pair: (usize, usize),
    /// `max(g_i / g_{i+1}, g_{i+1} / g_i)` for every consecutive pair.
    pub ratios: Vec<f64>,
}

/// Largest ratio between consecutive window gaps, in either orientation.
pub fn gap_ratio_report(config: &LineConfig) -> Result<GapRatioReport> {
    if config.len() < 3 {
        return Err(EquilibError::invalid("gap ratios need at least 3 particles"));
    }
    let gaps = config.gaps();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| (w[0] / w[1]).max(w[1] / w[0])).collect();
    let (i, &max_ratio) = ratios
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one pair");
    Ok(GapRatioReport {
        max_ratio,
        gap_pair: (i, i + 1),
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicTail {
    pub side: Side,
    pub period: usize,
    /// Gap pattern, left to right.
    pub pattern: Vec<f64>,
}

/// Smallest period `p <= max_period` with which the outermost `2p` window
/// gaps on `side` repeat within `tol`.
pub fn detect_periodic_tail(config: &LineConfig, side: Side, max_period: usize, tol: f64) -> Option<PeriodicTail> {
    let gaps = config.gaps();
    (1..=max_period).filter(|&p| 2 * p <= gaps.len()).find_map(|p| {
        let seg = match side {
            Side::Left => &gaps[..2 * p],
            Side::Right => &gaps[gaps.len() - 2 * p..],
        };
        let repeats = (0..p).all(|j| (seg[j] - seg[j + p]).abs() <= tol);
        repeats.then(|| PeriodicTail {
            side,
            period: p,
            pattern: seg[p..].to_vec(),
        })
    })
}
