//! Generalized Laguerre polynomials and factorial scalars.
//!
//! Every kernel and basis formula in the crate reduces to `L_k^α(x)` with
//! integer `α` and to ratios of factorials. Laguerre values come from the
//! forward three-term recurrence in the degree; factorials are always handled
//! in log form so that nothing overflows past `170!`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Default largest degree (and upper index) accepted by [`laguerre`].
pub const DEFAULT_MAX_DEGREE: usize = 512;

/// Arguments of a single Laguerre evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaguerreParams {
    pub k: usize,
    pub alpha: usize,
    pub x: f64,
}

impl LaguerreParams {
    pub fn new(k: i64, alpha: i64, x: f64) -> Result<Self> {
        if k < 0 {
            return Err(Error::Domain(format!("Laguerre degree must be >= 0, got {k}")));
        }
        if alpha < 0 {
            return Err(Error::Domain(format!("Laguerre upper index must be >= 0, got {alpha}")));
        }
        if !x.is_finite() {
            return Err(Error::Domain(format!("Laguerre argument must be finite, got {x}")));
        }
        Ok(Self { k: k as usize, alpha: alpha as usize, x })
    }
}

/// Laguerre evaluator with a configurable degree ceiling.
#[derive(Debug, Clone, Copy)]
pub struct Laguerre {
    max_degree: usize,
}

impl Default for Laguerre {
    fn default() -> Self {
        Self { max_degree: DEFAULT_MAX_DEGREE }
    }
}

impl Laguerre {
    pub fn with_max_degree(max_degree: usize) -> Self {
        Self { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn eval(&self, k: i64, alpha: i64, x: f64) -> Result<f64> {
        let p = LaguerreParams::new(k, alpha, x)?;
        if p.k > self.max_degree || p.alpha > self.max_degree {
            return Err(Error::Capability(format!(
                "Laguerre L_{}^{} exceeds the configured max degree {}",
                p.k, p.alpha, self.max_degree
            )));
        }
        Ok(laguerre_compensated(p.k, p.alpha as f64, p.x))
    }
}

/// Double-double value `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd::renorm(s, err)
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd { hi: s, lo: lo - (s - hi) }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::from_sum(self.hi, o.hi);
        Dd::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, err + self.hi * o.lo + self.lo * o.hi)
    }

    fn div_f64(self, d: f64) -> Dd {
        let q = self.hi / d;
        // remainder self - q·d evaluated exactly to first order
        let p = q * d;
        let perr = q.mul_add(d, -p);
        let r = (self.hi - p - perr + self.lo) / d;
        Dd::renorm(q, r)
    }
}

/// Forward recurrence carried in double-double arithmetic, so that values
/// near a zero of `L_k^α` keep their relative accuracy.
fn laguerre_compensated(k: usize, alpha: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = Dd { hi: 1.0, lo: 0.0 };
    let mut cur = Dd::from_sum(1.0 + alpha, -x);
    for m in 2..=k {
        let mf = m as f64;
        let a = Dd::from_sum(2.0 * mf - 1.0 + alpha, -x);
        let b = Dd { hi: mf - 1.0 + alpha, lo: 0.0 };
        let next = a.mul(cur).add(b.mul(prev).neg()).div_f64(mf);
        prev = cur;
        cur = next;
    }
    cur.hi + cur.lo
}

/// `L_k^α(x)` with the default degree ceiling.
pub fn laguerre(k: i64, alpha: i64, x: f64) -> Result<f64> {
    Laguerre::default().eval(k, alpha, x)
}

/// Unchecked forward recurrence
/// `m L_m = (2m - 1 + α - x) L_{m-1} - (m - 1 + α) L_{m-2}`.
pub(crate) fn laguerre_raw(k: usize, alpha: f64, x: f64) -> f64 {
    laguerre_pair(k, alpha, x).0
}

/// Returns `(L_k^α(x), L_{k-1}^α(x))`; the second entry is 0 for `k = 0`.
pub(crate) fn laguerre_pair(k: usize, alpha: f64, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for m in 2..=k {
        let mf = m as f64;
        let next = ((2.0 * mf - 1.0 + alpha - x) * cur - (mf - 1.0 + alpha) * prev) / mf;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

const EXACT_FACTORIAL_LIMIT: usize = 170;
const LOG_FACTORIAL_TABLE: usize = 4096;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LOG_FACTORIAL_TABLE);
        let mut fact = 1.0f64;
        for m in 0..LOG_FACTORIAL_TABLE {
            if m > 0 && m <= EXACT_FACTORIAL_LIMIT {
                fact *= m as f64;
            }
            if m <= EXACT_FACTORIAL_LIMIT {
                table.push(fact.ln());
            } else {
                table.push(stirling(m as f64));
            }
        }
        table
    })
}

fn stirling(m: f64) -> f64 {
    let inv = 1.0 / m;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    m * m.ln() - m + 0.5 * (2.0 * std::f64::consts::PI * m).ln() + series
}

/// `ln(m!)`.
pub fn log_factorial(m: i64) -> Result<f64> {
    if m < 0 {
        return Err(Error::Domain(format!("factorial of negative integer {m}")));
    }
    Ok(ln_factorial(m as usize))
}

/// Infallible variant for internal callers with unsigned arguments.
pub(crate) fn ln_factorial(m: usize) -> f64 {
    if m < LOG_FACTORIAL_TABLE {
        log_factorial_table()[m]
    } else {
        stirling(m as f64)
    }
}

/// Natural log of the Poisson mass `e^{-x} x^j / j!`; `x = 0` gives the point mass at 0.
pub(crate) fn ln_poisson(j: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -x + j as f64 * x.ln() - ln_factorial(j)
}

/// Upper Poisson tail `Σ_{j ≥ from} e^{-x} x^j / j!`, summed term by term.
pub(crate) fn poisson_upper_tail(from: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if from == 0 { 1.0 } else { 0.0 };
    }
    let mut total = 0.0;
    let mut j = from;
    loop {
        let term = ln_poisson(j, x).exp();
        total += term;
        if (j as f64) > x && term <= total * 1e-18 {
            break;
        }
        if term == 0.0 && (j as f64) > x {
            break;
        }
        j += 1;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};

    /// Direct summation of the defining series
    /// `Σ_j (-1)^j C(k+α, k-j) x^j / j!` in exact rational arithmetic.
    fn laguerre_series(k: usize, alpha: usize, x: f64) -> f64 {
        let xr = BigRational::from_float(x).unwrap();
        let mut sum = BigRational::zero();
        let mut xpow = BigRational::one();
        let mut jfact = BigInt::one();
        for j in 0..=k {
            if j > 0 {
                xpow *= &xr;
                jfact *= BigInt::from(j);
            }
            let mut binom = BigInt::one();
            for i in 0..(k - j) {
                binom *= BigInt::from(alpha + j + 1 + i);
            }
            let mut den = BigInt::one();
            for i in 1..=(k - j) {
                den *= BigInt::from(i);
            }
            let term = BigRational::new(binom, den * &jfact) * &xpow;
            if j % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        sum.to_f64().unwrap()
    }

    #[test]
    fn spot_values() {
        assert_eq!(laguerre(0, 0, 7.3).unwrap(), 1.0);
        assert!((laguerre(1, 0, 2.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((laguerre(2, 0, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert!((laguerre(1, 1, 0.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(laguerre(-1, 0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(laguerre(1, -2, 1.0), Err(Error::Domain(_))));
        assert!(matches!(laguerre(1, 0, f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(laguerre(1, 0, f64::INFINITY), Err(Error::Domain(_))));
        assert!(matches!(laguerre(513, 0, 1.0), Err(Error::Capability(_))));
        assert!(Laguerre::with_max_degree(1024).eval(513, 0, 1.0).is_ok());
    }

    #[test]
    fn recurrence_matches_series() {
        let mut worst = 0.0f64;
        for k in 0..=64usize {
            for alpha in [0usize, 1, 3, 10] {
                for &x in &[0.0, 0.1, 1.0, 2.5, 10.0, 30.0, 60.0, 100.0] {
                    let rec = laguerre(k as i64, alpha as i64, x).unwrap();
                    let exact = laguerre_series(k, alpha, x);
                    let rel = if exact == 0.0 { rec.abs() } else { (rec - exact).abs() / exact.abs() };
                    worst = worst.max(rel);
                    assert!(rel <= 1e-12, "k={k} alpha={alpha} x={x}: {rec} vs {exact}");
                }
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn compensated_and_plain_recurrences_agree_away_from_zeros() {
        for k in 0..=40usize {
            for &x in &[0.0, 0.7, 3.0, 20.0] {
                let a = laguerre_compensated(k, 2.0, x);
                let b = laguerre_raw(k, 2.0, x);
                assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn value_at_zero_is_one() {
        for k in 0..=128 {
            assert_eq!(laguerre(k, 0, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn sum_identity() {
        for n in 1..=32i64 {
            for &x in &[0.0, 0.5, 1.0, 4.0, 10.0] {
                let lhs: f64 = (0..n).map(|k| laguerre(k, 0, x).unwrap()).sum();
                let rhs = laguerre(n - 1, 1, x).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn derivative_identity() {
        let h = 1e-5;
        for k in 2..=16i64 {
            for &x in &[0.3, 1.0, 3.0] {
                let fd = (laguerre(k - 1, 0, x + h).unwrap() - laguerre(k - 1, 0, x - h).unwrap()) / (2.0 * h);
                let exact = -laguerre(k - 2, 1, x).unwrap();
                assert!((fd - exact).abs() <= 1e-6, "k={k} x={x}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn log_factorial_values() {
        assert_eq!(log_factorial(0).unwrap(), 0.0);
        assert_eq!(log_factorial(1).unwrap(), 0.0);
        let expected = 3628800f64.ln();
        assert!((log_factorial(10).unwrap() - expected).abs() <= 1e-14 * expected);
        assert!(matches!(log_factorial(-1), Err(Error::Domain(_))));
        // continuity across the exact/Stirling switch
        let a = log_factorial(170).unwrap();
        let b = log_factorial(171).unwrap();
        assert!(((b - a) - 171f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn log_factorial_monotone() {
        let mut prev = -1.0;
        for m in 0..5000 {
            let v = log_factorial(m).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn poisson_tail_sums_to_one() {
        for &x in &[0.5, 4.0, 32.0] {
            assert!((poisson_upper_tail(0, x) - 1.0).abs() < 1e-13);
        }
        // tail beyond 64 for mean 9 is minuscule but positive
        let t = poisson_upper_tail(64, 9.0);
        assert!(t > 0.0 && t < 1e-25);
    }
}
