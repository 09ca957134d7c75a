//! Numerical building blocks: compensated summation, the Hurwitz zeta
//! function with a truncation bound, and the upper incomplete gamma function.

use statrs::function::gamma::gamma;

/// Neumaier's variant of Kahan summation. Also tracks the sum of absolute
/// values so callers can derive a rounding bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
    abs: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Sum of the absolute values of everything added so far.
    pub fn magnitude(&self) -> f64 {
        self.abs
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Relative rounding allowance applied to every force evaluation.
pub(crate) const ROUNDING: f64 = 8.0 * f64::EPSILON;

/// Round a nonnegative bound outward by one unit in the last place.
pub(crate) fn up(x: f64) -> f64 {
    x.next_up()
}

// B_2, B_4, ..., B_22
const BERNOULLI: [f64; 11] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
];

/// Hurwitz zeta `sum_{n>=0} (q+n)^{-s}` for real `s > 1`, `q > 0`, by
/// Euler-Maclaurin summation. Returns `(value, error_bound)`; the bound
/// covers the truncated Euler-Maclaurin remainder and rounding.
pub fn hurwitz_zeta(s: f64, q: f64) -> (f64, f64) {
    debug_assert!(s > 1.0 && q > 0.0);
    const SHIFT: f64 = 20.0;
    const M: usize = 10;

    let n_direct = if q < SHIFT { (SHIFT - q).ceil() as usize } else { 0 };
    let mut acc = CompensatedSum::new();
    for n in 0..n_direct {
        acc.add((q + n as f64).powf(-s));
    }
    let a = q + n_direct as f64;
    let a_pow = a.powf(-s);
    acc.add(a * a_pow / (s - 1.0));
    acc.add(0.5 * a_pow);

    // term_j = B_2j / (2j)! * s(s+1)...(s+2j-2) * a^{-s-2j+1}
    let mut rising = s; // s(s+1)...(s+2j-2)
    let mut fact = 2.0; // (2j)!
    let mut a_term = a_pow / a; // a^{-s-2j+1}
    let inv_a2 = 1.0 / (a * a);
    for (j, b) in BERNOULLI.iter().take(M).enumerate() {
        if j > 0 {
            let jj = (2 * j) as f64;
            rising *= (s + jj - 1.0) * (s + jj);
            fact *= (jj + 1.0) * (jj + 2.0);
            a_term *= inv_a2;
        }
        acc.add(b / fact * rising * a_term);
    }
    // First omitted correction bounds the remainder for real s.
    let jj = (2 * M) as f64;
    let next = BERNOULLI[M] / (fact * (jj + 1.0) * (jj + 2.0))
        * rising
        * (s + jj - 1.0)
        * (s + jj)
        * a_term
        * inv_a2;
    let err = next.abs() + ROUNDING * acc.magnitude();
    (acc.value(), err)
}

/// Upper incomplete gamma `Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt` for
/// `a > 0`, `x >= 0`. Series below `x = a + 1`, Lentz continued fraction
/// above.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return gamma(a);
    }
    if x < a + 1.0 {
        // lower gamma by series, then complement
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let lower = sum * (-x + a * x.ln()).exp();
        gamma(a) - lower
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x + a * x.ln()).exp() * h
    }
}

/// Bisection for the sign change of a decreasing function on `[lo, hi]`.
/// Stops when the bracket is narrower than `tol` or cannot be split further.
pub(crate) fn bisect_decreasing<E>(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
    mut f: impl FnMut(f64) -> std::result::Result<f64, E>,
) -> std::result::Result<f64, E> {
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeta_two_is_basel() {
        let (v, e) = hurwitz_zeta(2.0, 1.0);
        assert!((v - PI * PI / 6.0).abs() < 1e-15);
        assert!(e < 1e-14);
    }

    #[test]
    fn zeta_matches_direct_sum_with_remainder() {
        // brute force plus integral remainder at large q
        for &(s, q) in &[(3.0, 0.3), (2.5, 7.0), (4.0, 123.4)] {
            let n = 200_000;
            let direct: CompensatedSum = (0..n).map(|k| (q + k as f64).powf(-s)).collect();
            let t = q + n as f64;
            let rem = t.powf(1.0 - s) / (s - 1.0) + 0.5 * t.powf(-s);
            let (v, _) = hurwitz_zeta(s, q);
            assert!(((direct.value() + rem) - v).abs() < 1e-13 * v.max(1.0), "s={s} q={q}");
        }
    }

    #[test]
    fn incomplete_gamma_closed_forms() {
        // Gamma(1, x) = e^{-x}
        for &x in &[0.0, 0.3, 1.0, 2.5, 30.0] {
            let g = upper_incomplete_gamma(1.0, x);
            assert!((g - (-x).exp()).abs() <= 1e-14 * (-x).exp().max(1e-300) + 1e-300);
        }
        // Gamma(1/2, x) = sqrt(pi) erfc(sqrt x); at x = 0 it is sqrt(pi)
        assert!((upper_incomplete_gamma(0.5, 0.0) - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-16).abs() < 1e-30);
    }
}
