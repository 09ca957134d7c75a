//! Repulsive force laws `F(d)`, their pair potentials `E(d) = int_d^inf F`,
//! slopes, and certified sums over arithmetic progressions of distances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{EquilibError, Result};
use crate::special::{hurwitz_zeta, up, upper_incomplete_gamma, CompensatedSum, ROUNDING};

/// Hard cap on explicit terms when a progression has no closed form.
const MAX_EXPLICIT_TERMS: usize = 10_000_000;

/// A strictly decreasing, positive force profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub enum ForceLaw {
    /// `F(d) = d^{-k}`, `k >= 2`.
    InversePower { k: f64 },
    /// `F(d) = exp(-d^k)`, `k >= 1`.
    StretchedExp { k: f64 },
    Tabulated(TabulatedLaw),
}

/// Analytic tail shapes usable beyond a tabulated grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    InversePower,
    Exp,
}

/// `scale * base(d)` where `base` is `d^{-k}` or `exp(-d^k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticLaw {
    pub kind: TailKind,
    pub k: f64,
    pub scale: f64,
}

/// Monotone piecewise-cubic (Fritsch-Carlson) interpolant with an optional
/// declared analytic tail beyond the last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLaw {
    dist: Vec<f64>,
    force: Vec<f64>,
    slope: Vec<f64>,
    tail: Option<AnalyticLaw>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LawSpec {
    InversePower {
        k: f64,
    },
    Exp {
        k: f64,
    },
    Tabulated {
        samples: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<TailSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TailSpec {
    kind: TailKind,
    k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

impl TryFrom<LawSpec> for ForceLaw {
    type Error = EquilibError;

    fn try_from(spec: LawSpec) -> Result<Self> {
        match spec {
            LawSpec::InversePower { k } => ForceLaw::inverse_power(k),
            LawSpec::Exp { k } => ForceLaw::stretched_exp(k),
            LawSpec::Tabulated { samples, tail } => ForceLaw::tabulated(
                &samples.iter().map(|s| (s[0], s[1])).collect::<Vec<_>>(),
                tail.map(|t| (t.kind, t.k, t.scale)),
            ),
        }
    }
}

impl From<ForceLaw> for LawSpec {
    fn from(law: ForceLaw) -> Self {
        match law {
            ForceLaw::InversePower { k } => LawSpec::InversePower { k },
            ForceLaw::StretchedExp { k } => LawSpec::Exp { k },
            ForceLaw::Tabulated(t) => LawSpec::Tabulated {
                samples: t.dist.iter().zip(&t.force).map(|(&d, &f)| [d, f]).collect(),
                tail: t.tail.map(|a| TailSpec {
                    kind: a.kind,
                    k: a.k,
                    scale: Some(a.scale),
                }),
            },
        }
    }
}

impl fmt::Display for ForceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForceLaw::InversePower { k } => write!(f, "inverse_power:{k}"),
            ForceLaw::StretchedExp { k } => write!(f, "exp:{k}"),
            ForceLaw::Tabulated(t) => write!(f, "tabulated[{} samples]", t.dist.len()),
        }
    }
}

/// Parses the CLI shorthand `inverse_power:2` / `exp:1` (also `coulomb`).
impl FromStr for ForceLaw {
    type Err = EquilibError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "coulomb" {
            return Ok(ForceLaw::coulomb());
        }
        let (kind, param) = s
            .split_once(':')
            .ok_or_else(|| EquilibError::invalid(format!("law: expected KIND:PARAM, got '{s}'")))?;
        let k: f64 = param
            .parse()
            .map_err(|_| EquilibError::invalid(format!("law: bad parameter '{param}'")))?;
        match kind {
            "inverse_power" => ForceLaw::inverse_power(k),
            "exp" => ForceLaw::stretched_exp(k),
            other => Err(EquilibError::invalid(format!("law: unknown kind '{other}'"))),
        }
    }
}

impl AnalyticLaw {
    fn base_force(&self, d: f64) -> f64 {
        match self.kind {
            TailKind::InversePower => {
                if self.k == 2.0 {
                    1.0 / (d * d)
                } else {
                    d.powf(-self.k)
                }
            }
            TailKind::Exp => {
                if self.k == 1.0 {
                    (-d).exp()
                } else {
                    (-d.powf(self.k)).exp()
                }
            }
        }
    }

    pub fn force(&self, d: f64) -> f64 {
        self.scale * self.base_force(d)
    }

    pub fn slope(&self, d: f64) -> f64 {
        let k = self.k;
        match self.kind {
            TailKind::InversePower => -k * self.force(d) / d,
            TailKind::Exp => {
                if k == 1.0 {
                    -self.force(d)
                } else {
                    -k * d.powf(k - 1.0) * self.force(d)
                }
            }
        }
    }

    pub fn integrable(&self) -> bool {
        match self.kind {
            TailKind::InversePower => self.k > 1.0,
            TailKind::Exp => self.k > 0.0,
        }
    }

    pub fn potential(&self, d: f64) -> Result<f64> {
        if !self.integrable() {
            return Err(EquilibError::NotIntegrable(format!(
                "tail exponent k = {} gives a divergent integral",
                self.k
            )));
        }
        let k = self.k;
        let v = match self.kind {
            TailKind::InversePower => d.powf(1.0 - k) / (k - 1.0),
            TailKind::Exp => {
                if k == 1.0 {
                    (-d).exp()
                } else {
                    upper_incomplete_gamma(1.0 / k, d.powf(k)) / k
                }
            }
        };
        Ok(self.scale * v)
    }

    /// Distance beyond which `|F'|` is nonincreasing.
    fn slope_envelope_start(&self) -> f64 {
        match self.kind {
            TailKind::InversePower => 0.0,
            TailKind::Exp if self.k <= 1.0 => 0.0,
            TailKind::Exp => ((self.k - 1.0) / self.k).powf(1.0 / self.k),
        }
    }

    /// `sum_{j>=0} F(t + j g)` and an error bound.
    fn progression_force(&self, t: f64, g: f64, tol: f64) -> Result<(f64, f64)> {
        if !self.integrable() {
            return Err(EquilibError::NotIntegrable(
                "force sum over a uniformly discrete tail diverges".into(),
            ));
        }
        match self.kind {
            TailKind::InversePower => {
                let (z, e) = hurwitz_zeta(self.k, t / g);
                let pref = self.scale * g.powf(-self.k);
                Ok((pref * z, pref * e + ROUNDING * (pref * z).abs()))
            }
            TailKind::Exp if self.k == 1.0 => {
                let v = self.scale * (-t).exp() / (-(-g).exp_m1());
                Ok((v, ROUNDING * v))
            }
            TailKind::Exp => self.explicit_progression(t, g, tol, false),
        }
    }

    /// `sum_{j>=0} F'(t + j g)` and an error bound.
    fn progression_slope(&self, t: f64, g: f64, tol: f64) -> Result<(f64, f64)> {
        match self.kind {
            TailKind::InversePower => {
                let k = self.k;
                let (z, e) = hurwitz_zeta(k + 1.0, t / g);
                let pref = -k * self.scale * g.powf(-k - 1.0);
                Ok((pref * z, (pref * e).abs() + ROUNDING * (pref * z).abs()))
            }
            TailKind::Exp if self.k == 1.0 => {
                let v = -self.scale * (-t).exp() / (-(-g).exp_m1());
                Ok((v, ROUNDING * v.abs()))
            }
            TailKind::Exp => self.explicit_progression(t, g, tol, true),
        }
    }

    fn explicit_progression(&self, t: f64, g: f64, tol: f64, slope: bool) -> Result<(f64, f64)> {
        let env = self.slope_envelope_start();
        let mut acc = CompensatedSum::new();
        let mut j = 0usize;
        loop {
            let d = t + j as f64 * g;
            let rest = if slope {
                if d >= env {
                    self.slope(d).abs() + self.force(d) / g
                } else {
                    f64::INFINITY
                }
            } else {
                self.force(d) + self.potential(d)? / g
            };
            if rest <= tol || j >= MAX_EXPLICIT_TERMS {
                let err = rest + ROUNDING * acc.magnitude();
                return Ok((acc.value(), err));
            }
            acc.add(if slope { self.slope(d) } else { self.force(d) });
            j += 1;
        }
    }
}

impl TabulatedLaw {
    fn new(samples: &[(f64, f64)], tail: Option<(TailKind, f64, Option<f64>)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(EquilibError::invalid("tabulated law needs at least 2 samples"));
        }
        let dist: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let force: Vec<f64> = samples.iter().map(|s| s.1).collect();
        if dist[0] <= 0.0 || dist.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EquilibError::invalid(
                "tabulated distances must be positive and strictly increasing",
            ));
        }
        if force.iter().any(|f| !f.is_finite()) || dist.iter().any(|d| !d.is_finite()) {
            return Err(EquilibError::invalid("tabulated samples must be finite"));
        }
        let slope = pchip_slopes(&dist, &force);
        let last = *dist.last().unwrap();
        let f_last = *force.last().unwrap();
        let tail = match tail {
            None => None,
            Some((kind, k, scale)) => {
                if !(k > 0.0) {
                    return Err(EquilibError::invalid("tail exponent must be positive"));
                }
                let unit = AnalyticLaw { kind, k, scale: 1.0 };
                let scale = scale.unwrap_or_else(|| f_last / unit.base_force(last));
                Some(AnalyticLaw { kind, k, scale })
            }
        };
        Ok(Self {
            dist,
            force,
            slope,
            tail,
        })
    }

    fn first(&self) -> f64 {
        self.dist[0]
    }

    fn last(&self) -> f64 {
        *self.dist.last().unwrap()
    }

    pub fn tail(&self) -> Option<&AnalyticLaw> {
        self.tail.as_ref()
    }

    fn segment(&self, d: f64) -> usize {
        match self.dist.partition_point(|&x| x <= d) {
            0 => 0,
            i => (i - 1).min(self.dist.len() - 2),
        }
    }

    fn check(&self, d: f64) -> Result<()> {
        if !(d > 0.0) {
            return Err(EquilibError::domain(format!("distance must be positive, got {d}")));
        }
        if d < self.first() {
            return Err(EquilibError::domain(format!(
                "distance {d} below tabulated range [{}, ..]",
                self.first()
            )));
        }
        if d > self.last() && self.tail.is_none() {
            return Err(EquilibError::domain(format!(
                "distance {d} beyond tabulated range and no tail declared"
            )));
        }
        Ok(())
    }

    fn hermite(&self, i: usize, d: f64) -> (f64, f64) {
        let h = self.dist[i + 1] - self.dist[i];
        let t = (d - self.dist[i]) / h;
        let (y0, y1) = (self.force[i], self.force[i + 1]);
        let (m0, m1) = (self.slope[i], self.slope[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1;
        let dv = (6.0 * t2 - 6.0 * t) * y0 / h
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1 / h
            + (3.0 * t2 - 2.0 * t) * m1;
        (v, dv)
    }

    // integral of the segment-i cubic from t = ta to t = 1
    fn segment_integral(&self, i: usize, ta: f64) -> f64 {
        let h = self.dist[i + 1] - self.dist[i];
        let anti = |t: f64| {
            let t2 = t * t;
            let t3 = t2 * t;
            let t4 = t3 * t;
            (t4 / 2.0 - t3 + t) * self.force[i]
                + (t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0) * h * self.slope[i]
                + (-t4 / 2.0 + t3) * self.force[i + 1]
                + (t4 / 4.0 - t3 / 3.0) * h * self.slope[i + 1]
        };
        h * (anti(1.0) - anti(ta))
    }

    fn force(&self, d: f64) -> Result<f64> {
        self.check(d)?;
        if d > self.last() {
            return Ok(self.tail.unwrap().force(d));
        }
        Ok(self.hermite(self.segment(d), d).0)
    }

    fn slope_at(&self, d: f64) -> Result<f64> {
        self.check(d)?;
        if d > self.last() {
            return Ok(self.tail.unwrap().slope(d));
        }
        Ok(self.hermite(self.segment(d), d).1)
    }

    fn potential(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || d < self.first() {
            return Err(EquilibError::domain(format!("distance {d} outside tabulated range")));
        }
        let tail = self.tail.ok_or_else(|| {
            EquilibError::NotIntegrable("tabulated law declares no analytic tail".into())
        })?;
        if d >= self.last() {
            return tail.potential(d);
        }
        let mut acc = CompensatedSum::new();
        let i0 = self.segment(d);
        let h = self.dist[i0 + 1] - self.dist[i0];
        acc.add(self.segment_integral(i0, (d - self.dist[i0]) / h));
        for i in i0 + 1..self.dist.len() - 1 {
            acc.add(self.segment_integral(i, 0.0));
        }
        acc.add(tail.potential(self.last())?);
        Ok(acc.value())
    }
}

/// Fritsch-Carlson slopes: weighted harmonic mean of neighbouring secants,
/// zero at local extrema of the data, secant at the endpoints.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        let (d0, d1) = (delta[i - 1], delta[i]);
        if d0 * d1 <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m
}

/// Outcome of [`ForceLaw::verify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub positive: bool,
    pub strictly_decreasing: bool,
    pub integrable: bool,
    pub failures: Vec<String>,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.positive && self.strictly_decreasing && self.integrable
    }
}

impl ForceLaw {
    /// `F(d) = 1/d^2`.
    pub fn coulomb() -> Self {
        ForceLaw::InversePower { k: 2.0 }
    }

    pub fn inverse_power(k: f64) -> Result<Self> {
        if !(k >= 2.0) || !k.is_finite() {
            return Err(EquilibError::invalid(format!("inverse_power needs k >= 2, got {k}")));
        }
        Ok(ForceLaw::InversePower { k })
    }

    pub fn stretched_exp(k: f64) -> Result<Self> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(EquilibError::invalid(format!("exp needs k >= 1, got {k}")));
        }
        Ok(ForceLaw::StretchedExp { k })
    }

    /// Tabulated law from `(distance, force)` samples. `tail` is
    /// `(kind, k, scale)`; a missing scale is fitted to the last sample.
    /// Monotonicity is not enforced here, see [`ForceLaw::verify`].
    pub fn tabulated(samples: &[(f64, f64)], tail: Option<(TailKind, f64, Option<f64>)>) -> Result<Self> {
        Ok(ForceLaw::Tabulated(TabulatedLaw::new(samples, tail)?))
    }

    fn analytic(&self) -> Option<AnalyticLaw> {
        match *self {
            ForceLaw::InversePower { k } => Some(AnalyticLaw {
                kind: TailKind::InversePower,
                k,
                scale: 1.0,
            }),
            ForceLaw::StretchedExp { k } => Some(AnalyticLaw {
                kind: TailKind::Exp,
                k,
                scale: 1.0,
            }),
            ForceLaw::Tabulated(_) => None,
        }
    }

    fn check_distance(d: f64) -> Result<()> {
        if d > 0.0 && d.is_finite() {
            Ok(())
        } else {
            Err(EquilibError::domain(format!("distance must be positive, got {d}")))
        }
    }

    pub fn force(&self, d: f64) -> Result<f64> {
        match self {
            ForceLaw::Tabulated(t) => t.force(d),
            _ => {
                Self::check_distance(d)?;
                Ok(self.analytic().unwrap().force(d))
            }
        }
    }

    pub fn potential(&self, d: f64) -> Result<f64> {
        match self {
            ForceLaw::Tabulated(t) => t.potential(d),
            _ => {
                Self::check_distance(d)?;
                self.analytic().unwrap().potential(d)
            }
        }
    }

    /// `F'(d)`, negative for a valid law.
    pub fn slope(&self, d: f64) -> Result<f64> {
        match self {
            ForceLaw::Tabulated(t) => t.slope_at(d),
            _ => {
                Self::check_distance(d)?;
                Ok(self.analytic().unwrap().slope(d))
            }
        }
    }

    /// Upper bound on `sum_{j>=0} F(start + j c)` by the integral test,
    /// `F(start) + E(start)/c`, rounded outward.
    pub fn tail_force_bound(&self, start: f64, c: f64) -> Result<f64> {
        if !(c > 0.0) {
            return Err(EquilibError::domain(format!("gap lower bound must be positive, got {c}")));
        }
        let f = up(self.force(start)? * (1.0 + ROUNDING));
        let e = up(self.potential(start)? * (1.0 + ROUNDING));
        Ok(up(f + up(e / c)))
    }

    /// Distance beyond which `|F'|` is nonincreasing.
    pub fn slope_envelope_start(&self) -> f64 {
        match self {
            ForceLaw::Tabulated(t) => t.last().max(t.tail.map_or(0.0, |a| a.slope_envelope_start())),
            _ => self.analytic().unwrap().slope_envelope_start(),
        }
    }

    /// `sum_{j>=0} F(t + j g)` with a certified absolute error bound.
    /// Closed forms are used where available; otherwise terms are summed
    /// until the remaining integral-test bound drops below `tol`.
    pub fn progression_sum(&self, t: f64, g: f64, tol: f64) -> Result<(f64, f64)> {
        self.progression(t, g, tol, false)
    }

    /// `sum_{j>=0} F'(t + j g)` with an error bound.
    pub fn progression_slope_sum(&self, t: f64, g: f64, tol: f64) -> Result<(f64, f64)> {
        self.progression(t, g, tol, true)
    }

    fn progression(&self, t: f64, g: f64, tol: f64, slope: bool) -> Result<(f64, f64)> {
        Self::check_distance(t)?;
        if !(g > 0.0) {
            return Err(EquilibError::domain(format!("progression step must be positive, got {g}")));
        }
        match self {
            ForceLaw::Tabulated(tab) => {
                let mut acc = CompensatedSum::new();
                let mut j = 0usize;
                let mut d = t;
                while d <= tab.last() {
                    acc.add(if slope { tab.slope_at(d)? } else { tab.force(d)? });
                    j += 1;
                    d = t + j as f64 * g;
                }
                let tail = tab.tail.ok_or_else(|| {
                    EquilibError::NotIntegrable("tabulated law declares no analytic tail".into())
                })?;
                let (v, e) = if slope {
                    tail.progression_slope(d, g, tol)?
                } else {
                    tail.progression_force(d, g, tol)?
                };
                acc.add(v);
                Ok((acc.value(), e + ROUNDING * acc.magnitude()))
            }
            _ => {
                let a = self.analytic().unwrap();
                if slope {
                    a.progression_slope(t, g, tol)
                } else {
                    a.progression_force(t, g, tol)
                }
            }
        }
    }

    /// Distance at which `F` takes the value `y` (found by bisection).
    pub fn inverse_force(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(EquilibError::domain("inverse force needs a positive value"));
        }
        let lower = match self {
            ForceLaw::Tabulated(t) => t.first(),
            _ => 1e-300,
        };
        let mut lo = lower.max(1e-12);
        let mut hi = 1.0_f64.max(lo * 2.0);
        while self.force(lo)? < y {
            if lo <= lower {
                return Ok(lower);
            }
            lo = (lo * 0.5).max(lower);
        }
        while self.force(hi)? > y {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(EquilibError::domain("force never drops to the requested value"));
            }
        }
        crate::special::bisect_decreasing(lo, hi, 0.0, 200, |d| self.force(d).map(|f| f - y))
    }

    /// Positivity and strict monotonicity on `grid`, plus tail integrability.
    pub fn verify(&self, grid: &[f64]) -> LawReport {
        let mut failures = Vec::new();
        let mut positive = true;
        let mut strictly_decreasing = true;
        let mut values = Vec::with_capacity(grid.len());
        for &d in grid {
            match self.force(d) {
                Ok(f) => {
                    if !(f > 0.0) {
                        positive = false;
                        failures.push(format!("F({d}) = {f} is not positive"));
                    }
                    values.push((d, f));
                }
                Err(e) => {
                    positive = false;
                    failures.push(format!("F({d}) undefined: {e}"));
                }
            }
        }
        for w in values.windows(2) {
            if w[1].0 > w[0].0 && !(w[1].1 < w[0].1) {
                strictly_decreasing = false;
                failures.push(format!(
                    "not strictly decreasing: F({}) = {} <= F({}) = {}",
                    w[0].0, w[0].1, w[1].0, w[1].1
                ));
                break;
            }
        }
        if let ForceLaw::Tabulated(t) = self {
            if t.force.iter().any(|&f| !(f > 0.0)) {
                positive = false;
                failures.push("tabulated samples contain a non-positive force".into());
            }
            if let Some(i) = t.force.windows(2).position(|w| !(w[1] < w[0])) {
                strictly_decreasing = false;
                failures.push(format!(
                    "not strictly decreasing: samples {} and {} (flat or rising segment)",
                    i,
                    i + 1
                ));
            }
        }
        let integrable = match self {
            ForceLaw::Tabulated(t) => match t.tail {
                None => {
                    failures.push("tail not integrable: no analytic tail declared".into());
                    false
                }
                Some(a) if !a.integrable() => {
                    failures.push(format!("tail not integrable: exponent k = {}", a.k));
                    false
                }
                Some(_) => true,
            },
            _ => true,
        };
        LawReport {
            positive,
            strictly_decreasing,
            integrable,
            failures,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn force_examples() {
        let c = ForceLaw::coulomb();
        assert_eq!(c.force(2.0).unwrap(), 0.25);
        assert_eq!(ForceLaw::inverse_power(3.0).unwrap().force(1.0).unwrap(), 1.0);
        let e = ForceLaw::stretched_exp(1.0).unwrap();
        assert!(close(e.force(LN_2).unwrap(), 0.5, 1e-15));
        assert!(matches!(c.force(0.0), Err(EquilibError::Domain(_))));
        assert!(matches!(e.force(-1.0), Err(EquilibError::Domain(_))));
    }

    #[test]
    fn potential_examples() {
        assert!(close(ForceLaw::coulomb().potential(2.0).unwrap(), 0.5, 1e-15));
        let cube = ForceLaw::inverse_power(3.0).unwrap();
        assert!(close(cube.potential(1.0).unwrap(), 0.5, 1e-15));
        let e = ForceLaw::stretched_exp(1.0).unwrap();
        assert!(close(e.potential(1.0).unwrap(), (-1.0f64).exp(), 1e-15));
    }

    #[test]
    fn slope_examples() {
        let c = ForceLaw::coulomb();
        assert!(close(c.slope(1.0).unwrap(), -2.0, 1e-15));
        assert!(close(c.slope(2.0).unwrap(), -0.25, 1e-15));
        let e = ForceLaw::stretched_exp(1.0).unwrap();
        assert!(close(e.slope(0.5).unwrap(), -(-0.5f64).exp(), 1e-15));
    }

    #[test]
    fn constructor_ranges() {
        assert!(ForceLaw::inverse_power(1.5).is_err());
        assert!(ForceLaw::stretched_exp(0.5).is_err());
        assert!("inverse_power:2".parse::<ForceLaw>().is_ok());
        assert_eq!("exp:1".parse::<ForceLaw>().unwrap(), ForceLaw::StretchedExp { k: 1.0 });
        assert!("foo:2".parse::<ForceLaw>().is_err());
    }

    #[test]
    fn tail_bound_examples() {
        let c = ForceLaw::coulomb();
        let b = c.tail_force_bound(1.0, 1.0).unwrap();
        assert!(close(b, 2.0, 1e-14) && b >= 2.0);
        // true sum pi^2/6, from 10^6 partial terms plus integral remainder
        let partial: CompensatedSum = (0..1_000_000).map(|k| 1.0 / ((1.0 + k as f64).powi(2))).collect();
        let truth_upper = partial.value() + 1.0 / 1_000_000.0 + 1e-12;
        assert!(truth_upper < b);
        let b10 = c.tail_force_bound(10.0, 1.0).unwrap();
        assert!(close(b10, 0.11, 1e-14) && b10 >= 0.11);
        assert!(c.tail_force_bound(3.0, 0.5).unwrap() < c.tail_force_bound(2.0, 0.5).unwrap());
    }

    #[test]
    fn verify_builtin_and_tabulated() {
        let grid: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
        assert!(ForceLaw::coulomb().verify(&grid).passed());
        assert!(ForceLaw::stretched_exp(2.0).unwrap().verify(&grid).passed());

        let flat = ForceLaw::tabulated(
            &[(0.5, 4.0), (1.0, 1.0), (2.0, 1.0), (3.0, 0.1)],
            Some((TailKind::InversePower, 2.0, None)),
        )
        .unwrap();
        let r = flat.verify(&[0.5, 1.0, 1.5, 2.0, 2.5]);
        assert!(!r.strictly_decreasing && !r.passed());

        let samples: Vec<(f64, f64)> = (1..=20).map(|i| (i as f64 * 0.5, 1.0 / (i as f64 * 0.5))).collect();
        let harmonic = ForceLaw::tabulated(&samples, Some((TailKind::InversePower, 1.0, None))).unwrap();
        let r = harmonic.verify(&[0.5, 1.0, 5.0, 20.0]);
        assert!(r.strictly_decreasing && !r.integrable);
        assert!(r.failures.iter().any(|f| f.contains("tail not integrable")));
        assert!(matches!(harmonic.potential(1.0), Err(EquilibError::NotIntegrable(_))));
    }

    #[test]
    fn tabulated_coulomb_tracks_closed_form() {
        let samples: Vec<(f64, f64)> = (0..=200)
            .map(|i| {
                let d = 0.2 * 1.02f64.powi(i);
                (d, 1.0 / (d * d))
            })
            .collect();
        let tab = ForceLaw::tabulated(&samples, Some((TailKind::InversePower, 2.0, None))).unwrap();
        let c = ForceLaw::coulomb();
        for &d in &[0.3, 1.0, 2.7, 9.0, 50.0] {
            assert!(close(tab.force(d).unwrap(), c.force(d).unwrap(), 1e-5), "F({d})");
            assert!(close(tab.potential(d).unwrap(), c.potential(d).unwrap(), 1e-5), "E({d})");
            assert!(tab.slope(d).unwrap() < 0.0);
        }
        assert!(tab.force(0.1).is_err());
        let (s, e) = tab.progression_sum(1.0, 1.0, 1e-12).unwrap();
        assert!((s - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-4 + e);
    }

    #[test]
    fn progression_sums_match_brute_force() {
        let laws = [
            ForceLaw::coulomb(),
            ForceLaw::inverse_power(3.5).unwrap(),
            ForceLaw::stretched_exp(1.0).unwrap(),
            ForceLaw::stretched_exp(2.0).unwrap(),
        ];
        for law in &laws {
            for &(t, g) in &[(0.7, 1.3), (2.0, 0.4), (5.0, 2.0)] {
                let (v, e) = law.progression_sum(t, g, 1e-14).unwrap();
                let n = 1_000_000;
                let brute: CompensatedSum = (0..n).map(|j| law.force(t + j as f64 * g).unwrap()).collect();
                // remainder enclosure by the integral test
                let tail_start = t + n as f64 * g;
                let lo = brute.value() + law.potential(tail_start).unwrap() / g;
                let hi = lo + law.force(tail_start).unwrap();
                assert!(v + e >= lo - 1e-15 && v - e <= hi + 1e-15, "{law} t={t} g={g}: {v}±{e} vs [{lo},{hi}]");
                let (sv, _) = law.progression_slope_sum(t, g, 1e-14).unwrap();
                assert!(sv < 0.0);
            }
        }
    }

    #[test]
    fn inverse_force_round_trip() {
        for law in [ForceLaw::coulomb(), ForceLaw::stretched_exp(1.5).unwrap()] {
            for &d in &[0.2, 1.0, 3.0] {
                let y = law.force(d).unwrap();
                assert!(close(law.inverse_force(y).unwrap(), d, 1e-12));
            }
        }
    }

    #[test]
    fn json_schema_round_trip() {
        let law: ForceLaw = serde_json::from_str(r#"{"kind": "inverse_power", "k": 2.0}"#).unwrap();
        assert_eq!(law, ForceLaw::coulomb());
        let law: ForceLaw = serde_json::from_str(r#"{"kind": "exp", "k": 1.0}"#).unwrap();
        assert_eq!(law, ForceLaw::StretchedExp { k: 1.0 });
        let tab: ForceLaw = serde_json::from_str(
            r#"{"kind": "tabulated", "samples": [[1, 1], [2, 0.25]], "tail": {"kind": "inverse_power", "k": 2}}"#,
        )
        .unwrap();
        let back: ForceLaw = serde_json::from_str(&serde_json::to_string(&tab).unwrap()).unwrap();
        assert_eq!(tab, back);
        assert!(serde_json::from_str::<ForceLaw>(r#"{"kind": "inverse_power", "k": 1.0}"#).is_err());
    }
}
