//! The complex-Hermite basis `e_{k,j}` of `L²(ℂ, μ)`, organized by level.
//!
//! `e_{k,j} = ((k−1)! j!)^{-1/2} (𝔞†)^{k−1} z^j` with `𝔞† = −∂_z + z̄`. Level `k`
//! spans the true-polyanalytic space `F²₍ₖ₎`; the analytic degree `j` runs over
//! `0..J`. Flat ordering is level-major: `(k, j) ↦ (k − 1)·J + j`.
//!
//! Two representations coexist. [`BivariatePoly`] holds exact coefficient
//! tables built by the ladder, and is the reference. Pointwise values use the
//! equivalent Laguerre form
//! `e_{k,j}(√t e^{iθ}) = e^{idθ} ρ_{k,j}(t)`, `d = j − (k − 1)`,
//! which stays accurate at large `|z|` where monomial sums cancel.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{laguerre_raw, ln_factorial, poisson_upper_tail};

/// Largest exponent of `z` or `z̄` a [`BivariatePoly`] may carry.
pub const MAX_POLY_DEGREE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    /// `K`: levels `1..=K`.
    pub levels: usize,
    /// `J`: analytic degrees `0..J`.
    pub degrees: usize,
    pub margin_levels: usize,
    pub margin_degrees: usize,
}

impl TruncationSpec {
    pub fn new(levels: usize, degrees: usize, margin_levels: usize, margin_degrees: usize) -> Result<Self> {
        if levels == 0 || degrees == 0 {
            return Err(Error::Domain(format!(
                "truncation needs K, J >= 1, got K={levels}, J={degrees}"
            )));
        }
        Ok(Self { levels, degrees, margin_levels, margin_degrees })
    }

    pub fn dim(&self) -> usize {
        self.levels * self.degrees
    }

    pub fn flat_index(&self, k: usize, j: usize) -> Result<usize> {
        self.layout()
            .index(k, j)
            .ok_or_else(|| Error::Domain(format!("(k={k}, j={j}) outside K={}, J={}", self.levels, self.degrees)))
    }

    pub fn layout(&self) -> Layout {
        Layout::new(1, self.levels, self.degrees)
    }

    /// Layout including both margins.
    pub fn margined_layout(&self) -> Layout {
        Layout::new(1, self.levels + self.margin_levels, self.degrees + self.margin_degrees)
    }

    /// Spec with the margins folded into the kept range.
    pub fn margined(&self) -> TruncationSpec {
        TruncationSpec {
            levels: self.levels + self.margin_levels,
            degrees: self.degrees + self.margin_degrees,
            margin_levels: 0,
            margin_degrees: 0,
        }
    }

    /// Largest `|z|²` for which coherent vectors are trusted: `J − 4√J`.
    pub fn tail_gate(&self) -> f64 {
        tail_gate(self.degrees)
    }

    pub fn check_gate(&self, z: Complex64) -> Result<()> {
        check_gate(self.degrees, z)
    }
}

pub(crate) fn tail_gate(degrees: usize) -> f64 {
    let j = degrees as f64;
    j - 4.0 * j.sqrt()
}

pub(crate) fn check_gate(degrees: usize, z: Complex64) -> Result<()> {
    let gate = tail_gate(degrees);
    let x = z.norm_sqr();
    if !x.is_finite() || x > gate {
        return Err(Error::Range(format!(
            "|z|^2 = {x:.4} exceeds the tail gate J - 4 sqrt(J) = {gate:.4} for J = {degrees}; increase J"
        )));
    }
    Ok(())
}

/// Rectangular index window `first_level..first_level+levels` × `0..degrees`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub first_level: usize,
    pub levels: usize,
    pub degrees: usize,
}

impl Layout {
    pub fn new(first_level: usize, levels: usize, degrees: usize) -> Self {
        Self { first_level, levels, degrees }
    }

    pub fn dim(&self) -> usize {
        self.levels * self.degrees
    }

    pub fn last_level(&self) -> usize {
        self.first_level + self.levels - 1
    }

    pub fn contains(&self, k: usize, j: usize) -> bool {
        k >= self.first_level && k < self.first_level + self.levels && j < self.degrees
    }

    pub fn index(&self, k: usize, j: usize) -> Option<usize> {
        self.contains(k, j).then(|| (k - self.first_level) * self.degrees + j)
    }

    /// Inverse of [`Layout::index`].
    pub fn level_degree(&self, idx: usize) -> (usize, usize) {
        (self.first_level + idx / self.degrees, idx % self.degrees)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dim()).map(|i| self.level_degree(i))
    }
}

/// Subspace on which a Toeplitz or Hankel operator acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// `F²₍ₖ₎`.
    Level(usize),
    /// `F²ₙ = F²₍₁₎ ⊕ … ⊕ F²₍ₙ₎`.
    FirstN(usize),
}

impl Domain {
    pub fn layout(&self, degrees: usize) -> Layout {
        match *self {
            Domain::Level(k) => Layout::new(k, 1, degrees),
            Domain::FirstN(n) => Layout::new(1, n, degrees),
        }
    }

    pub fn top_level(&self) -> usize {
        match *self {
            Domain::Level(k) => k,
            Domain::FirstN(n) => n,
        }
    }

    pub fn validate(&self, max_level: usize) -> Result<()> {
        let top = self.top_level();
        if top == 0 || top > max_level {
            return Err(Error::Domain(format!("domain {self:?} outside levels 1..={max_level}")));
        }
        Ok(())
    }
}

/// `Σ c[a][b] z^a z̄^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePoly {
    coeffs: Vec<Vec<Complex64>>,
}

impl BivariatePoly {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(a: usize, b: usize, c: Complex64) -> Self {
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); b + 1]; a + 1];
        coeffs[a][b] = c;
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    /// Builds from a dense table `table[a][b]`.
    pub fn from_table(table: Vec<Vec<Complex64>>) -> Result<Self> {
        let mut p = Self { coeffs: table };
        p.trim();
        p.check_capacity()?;
        Ok(p)
    }

    pub fn coeff(&self, a: usize, b: usize) -> Complex64 {
        self.coeffs
            .get(a)
            .and_then(|row| row.get(b))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Nonzero terms as `(a, b, c)`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.coeffs.iter().enumerate().flat_map(|(a, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
                .map(move |(b, c)| (a, b, *c))
        })
    }

    /// `max{a + b : c[a][b] ≠ 0}`; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms().map(|(a, b, _)| a + b).max()
    }

    /// Polyanalytic order `1 + max{b : c[a][b] ≠ 0}`; 0 for the zero polynomial.
    pub fn order(&self) -> usize {
        self.terms().map(|(_, b, _)| b + 1).max().unwrap_or(0)
    }

    fn trim(&mut self) {
        let zero = Complex64::new(0.0, 0.0);
        for row in &mut self.coeffs {
            while row.last() == Some(&zero) {
                row.pop();
            }
        }
        while self.coeffs.last().is_some_and(|r| r.is_empty()) {
            self.coeffs.pop();
        }
    }

    fn check_capacity(&self) -> Result<()> {
        let a_max = self.coeffs.len();
        let b_max = self.coeffs.iter().map(Vec::len).max().unwrap_or(0);
        if a_max > MAX_POLY_DEGREE || b_max > MAX_POLY_DEGREE {
            return Err(Error::Capability(format!(
                "polynomial exponents exceed capacity {MAX_POLY_DEGREE}"
            )));
        }
        Ok(())
    }

    fn from_terms(terms: impl Iterator<Item = (usize, usize, Complex64)>) -> Result<Self> {
        let mut coeffs: Vec<Vec<Complex64>> = Vec::new();
        for (a, b, c) in terms {
            if a >= MAX_POLY_DEGREE || b >= MAX_POLY_DEGREE {
                return Err(Error::Capability(format!(
                    "term z^{a} conj(z)^{b} exceeds capacity {MAX_POLY_DEGREE}"
                )));
            }
            if coeffs.len() <= a {
                coeffs.resize(a + 1, Vec::new());
            }
            if coeffs[a].len() <= b {
                coeffs[a].resize(b + 1, Complex64::new(0.0, 0.0));
            }
            coeffs[a][b] += c;
        }
        let mut p = Self { coeffs };
        p.trim();
        Ok(p)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::from_terms(self.terms().chain(other.terms()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::from_terms(self.terms().chain(other.terms().map(|(a, b, c)| (a, b, -c))))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_terms(self.terms().map(|(a, b, c)| (a, b, c * s))).expect("scaling keeps capacity")
    }

    /// `(−∂_z + z̄) p`.
    pub fn raise(&self) -> Result<Self> {
        let d = self.terms().filter(|(a, _, _)| *a > 0).map(|(a, b, c)| (a - 1, b, -c * a as f64));
        let m = self.terms().map(|(a, b, c)| (a, b + 1, c));
        Self::from_terms(d.chain(m))
    }

    /// `∂_z̄ p`.
    pub fn lower(&self) -> Result<Self> {
        Self::from_terms(self.terms().filter(|(_, b, _)| *b > 0).map(|(a, b, c)| (a, b - 1, c * b as f64)))
    }

    /// Horner in `z̄` over Horner-evaluated rows in `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let zb = z.conj();
        let b_max = self.coeffs.iter().map(Vec::len).max().unwrap_or(0);
        let mut acc = Complex64::new(0.0, 0.0);
        for b in (0..b_max).rev() {
            let mut col = Complex64::new(0.0, 0.0);
            for a in (0..self.coeffs.len()).rev() {
                col = col * z + self.coeff(a, b);
            }
            acc = acc * zb + col;
        }
        acc
    }

    /// Largest coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other)
            .map(|d| d.terms().map(|(_, _, c)| c.norm()).fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY)
    }
}

/// `ladder_raise`.
pub fn ladder_raise(p: &BivariatePoly) -> Result<BivariatePoly> {
    p.raise()
}

/// `ladder_lower`.
pub fn ladder_lower(p: &BivariatePoly) -> Result<BivariatePoly> {
    p.lower()
}

/// `e_{k,j}` as an exact coefficient table.
pub fn basis_poly(k: usize, j: usize) -> Result<BivariatePoly> {
    if k == 0 {
        return Err(Error::Domain("levels start at k = 1".into()));
    }
    if j + k > MAX_POLY_DEGREE {
        return Err(Error::Capability(format!(
            "basis element (k={k}, j={j}) exceeds polynomial capacity {MAX_POLY_DEGREE}"
        )));
    }
    let norm = (-0.5 * ln_factorial(j)).exp();
    let mut p = BivariatePoly::monomial(j, 0, Complex64::new(norm, 0.0));
    for m in 1..k {
        p = p.raise()?.scale(Complex64::new(1.0 / (m as f64).sqrt(), 0.0));
    }
    Ok(p)
}

/// Sign and log-magnitude of `ρ_{k,j}(t)`; magnitude `-∞` marks an exact zero.
///
/// `d ≥ 0`: `ρ = (−1)^{k−1} √((k−1)!/j!) t^{d/2} L_{k−1}^{(d)}(t)`;
/// `d < 0`: `ρ = (−1)^j √(j!/(k−1)!) t^{−d/2} L_j^{(−d)}(t)`.
pub fn radial_log_profile(k: usize, j: usize, t: f64) -> (f64, f64) {
    debug_assert!(k >= 1);
    let km1 = k - 1;
    let (deg, alpha, base_sign, log_pref) = if j >= km1 {
        let s = if km1.is_multiple_of(2) { 1.0 } else { -1.0 };
        (km1, j - km1, s, 0.5 * (ln_factorial(km1) - ln_factorial(j)))
    } else {
        let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        (j, km1 - j, s, 0.5 * (ln_factorial(j) - ln_factorial(km1)))
    };
    if t == 0.0 {
        if alpha > 0 {
            return (0.0, f64::NEG_INFINITY);
        }
        // L_n^0(0) = 1
        return (base_sign, log_pref);
    }
    let l = laguerre_raw(deg, alpha as f64, t);
    if l == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let sign = base_sign * l.signum();
    (sign, log_pref + 0.5 * alpha as f64 * t.ln() + l.abs().ln())
}

/// `d = j − (k − 1)`: the angular frequency of `e_{k,j}`.
pub fn angular_index(k: usize, j: usize) -> i64 {
    j as i64 - (k as i64 - 1)
}

/// `e_{k,j}(z) · e^{−|z|²/2}`, finite for every `z`.
pub fn scaled_basis_value(k: usize, j: usize, z: Complex64) -> Complex64 {
    let t = z.norm_sqr();
    let (sign, log_mag) = radial_log_profile(k, j, t);
    if sign == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mag = (log_mag - 0.5 * t).exp();
    let d = angular_index(k, j) as f64;
    Complex64::from_polar(sign * mag, d * z.arg())
}

/// `e_{k,j}(z)`; overflows to a range error once `|z|` is very large.
pub fn basis_value(k: usize, j: usize, z: Complex64) -> Result<Complex64> {
    let t = z.norm_sqr();
    let (sign, log_mag) = radial_log_profile(k, j, t);
    if sign == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if log_mag > 700.0 {
        return Err(Error::Range(format!(
            "e_({k},{j})({z}) overflows; use scaled_basis_value"
        )));
    }
    let d = angular_index(k, j) as f64;
    Ok(Complex64::from_polar(sign * log_mag.exp(), d * z.arg()))
}

/// Reproducing kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `K₍ₖ₎(z, w) = L_{k−1}^0(|z−w|²) e^{z w̄}`.
    Level(usize),
    /// `Kₙ(z, w) = L_{n−1}^1(|z−w|²) e^{z w̄}`.
    Order(usize),
}

impl KernelKind {
    fn laguerre_part(&self, x: f64) -> Result<f64> {
        match *self {
            KernelKind::Level(k) if k >= 1 => Ok(laguerre_raw(k - 1, 0.0, x)),
            KernelKind::Order(n) if n >= 1 => Ok(laguerre_raw(n - 1, 1.0, x)),
            _ => Err(Error::Domain(format!("kernel index must be >= 1, got {self:?}"))),
        }
    }
}

pub fn kernel_eval(kind: KernelKind, z: Complex64, w: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite() && w.re.is_finite() && w.im.is_finite()) {
        return Err(Error::Domain("kernel arguments must be finite".into()));
    }
    let l = kind.laguerre_part((z - w).norm_sqr())?;
    let e = z * w.conj();
    if e.re > 700.0 {
        return Err(Error::Range(format!(
            "e^(z conj(w)) overflows at Re = {:.1}; use kernel_eval_scaled",
            e.re
        )));
    }
    Ok(e.exp() * l)
}

/// `K(z, w) e^{−(|z|² + |w|²)/2}`, bounded in modulus by `|L(|z−w|²)| e^{−|z−w|²/2}`.
pub fn kernel_eval_scaled(kind: KernelKind, z: Complex64, w: Complex64) -> Result<Complex64> {
    let l = kind.laguerre_part((z - w).norm_sqr())?;
    let e = z * w.conj() - 0.5 * (z.norm_sqr() + w.norm_sqr());
    Ok(e.exp() * l)
}

/// Coefficients of an `L²(ℂ, μ)` element against `e_{k,j}` over a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefVec {
    pub layout: Layout,
    pub values: DVector<Complex64>,
    /// Bound on the `L²` norm of the part outside the layout.
    pub tail_bound: f64,
}

impl CoefVec {
    pub fn zeros(layout: Layout) -> Self {
        Self { layout, values: DVector::zeros(layout.dim()), tail_bound: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    /// `⟨self, other⟩ = Σ self_i conj(other_i)`.
    pub fn inner(&self, other: &CoefVec) -> Complex64 {
        self.values.iter().zip(other.values.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.layout.index(k, j).map_or(Complex64::new(0.0, 0.0), |i| self.values[i])
    }
}

/// Named coherent-type vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coherent {
    /// `l_{z,k} = (𝔄†)^{k−1} k_z`.
    L(usize),
    /// Normalized reproducing kernel of `F²ₙ` at `z`.
    K(usize),
    /// The monomial `w^{k−1}/√((k−1)!)`.
    M(usize),
    /// `W_z m_k`.
    LHat(usize),
}

/// Coefficient of `l_{z,k}` at degree `j`: `e^{−|z|²/2} z̄^j / √j!`.
pub(crate) fn coherent_coefficient(z: Complex64, j: usize) -> Complex64 {
    let x = z.norm_sqr();
    if x == 0.0 {
        return if j == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    let log_mag = -0.5 * x + 0.5 * j as f64 * x.ln() - 0.5 * ln_factorial(j);
    Complex64::from_polar(log_mag.exp(), -(j as f64) * z.arg())
}

/// Squared `L²` mass of `e_{k,j} e^{−|z|²/2}` summed over `j ≥ from`.
fn level_tail_mass(k: usize, from: usize, z: Complex64) -> f64 {
    let x = z.norm_sqr();
    let mut total = 0.0;
    let mut j = from;
    loop {
        let v = scaled_basis_value(k, j, z).norm_sqr();
        total += v;
        if j as f64 > x + k as f64 + 10.0 && v <= 1e-32 * total.max(1e-300) {
            break;
        }
        if j > from + 100_000 {
            break;
        }
        j += 1;
    }
    total
}

pub fn coherent_vector(kind: Coherent, z: Complex64, spec: &TruncationSpec) -> Result<CoefVec> {
    let layout = spec.layout();
    let mut out = CoefVec::zeros(layout);
    match kind {
        Coherent::L(k) => {
            check_level(k, spec)?;
            spec.check_gate(z)?;
            for j in 0..spec.degrees {
                out.values[layout.index(k, j).unwrap()] = coherent_coefficient(z, j);
            }
            out.tail_bound = poisson_upper_tail(spec.degrees, z.norm_sqr()).sqrt();
        }
        Coherent::K(n) => {
            check_level(n, spec)?;
            spec.check_gate(z)?;
            let s = 1.0 / (n as f64).sqrt();
            let mut tail = 0.0;
            for k in 1..=n {
                for j in 0..spec.degrees {
                    out.values[layout.index(k, j).unwrap()] = scaled_basis_value(k, j, z).conj() * s;
                }
                tail += level_tail_mass(k, spec.degrees, z);
            }
            out.tail_bound = (tail / n as f64).sqrt();
        }
        Coherent::M(k) => {
            if k == 0 || k > spec.degrees {
                return Err(Error::Domain(format!("m_k needs 1 <= k <= J, got {k}")));
            }
            out.values[layout.index(1, k - 1).unwrap()] = Complex64::new(1.0, 0.0);
        }
        Coherent::LHat(k) => {
            let m = coherent_vector(Coherent::M(k), z, spec)?;
            let w = crate::operators::weyl_matrix(z, spec)?;
            out.values = &w.entries * &m.values;
            out.tail_bound = (1.0 - out.values.norm_squared()).max(0.0).sqrt();
        }
    }
    Ok(out)
}

fn check_level(k: usize, spec: &TruncationSpec) -> Result<()> {
    if k == 0 || k > spec.levels {
        return Err(Error::Domain(format!("level {k} outside 1..={}", spec.levels)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_rule, default_rule, integrate};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ladder_examples() {
        let one = BivariatePoly::constant(c(1.0));
        let z = BivariatePoly::monomial(1, 0, c(1.0));
        let zb = BivariatePoly::monomial(0, 1, c(1.0));
        assert_eq!(one.raise().unwrap(), zb);
        let zzb_minus_1 = BivariatePoly::monomial(1, 1, c(1.0)).sub(&one).unwrap();
        assert_eq!(z.raise().unwrap(), zzb_minus_1);
        assert_eq!(zb.raise().unwrap(), BivariatePoly::monomial(0, 2, c(1.0)));
        assert_eq!(zb.lower().unwrap(), one);
        for j in 0..10 {
            assert!(BivariatePoly::monomial(j, 0, c(1.0)).lower().unwrap().is_zero());
        }
        assert_eq!(zzb_minus_1.lower().unwrap(), z);
    }

    #[test]
    fn basis_examples() {
        assert_eq!(basis_poly(1, 0).unwrap(), BivariatePoly::constant(c(1.0)));
        assert_eq!(basis_poly(2, 0).unwrap(), BivariatePoly::monomial(0, 1, c(1.0)));
        let e21 = BivariatePoly::monomial(1, 1, c(1.0)).sub(&BivariatePoly::constant(c(1.0))).unwrap();
        assert!(basis_poly(2, 1).unwrap().max_abs_diff(&e21) < 1e-15);
        let e12 = BivariatePoly::monomial(2, 0, c(1.0 / 2f64.sqrt()));
        assert!(basis_poly(1, 2).unwrap().max_abs_diff(&e12) < 1e-15);
    }

    #[test]
    fn order_is_level() {
        for k in 1..=8 {
            for j in [0usize, 1, 5, 17] {
                let p = basis_poly(k, j).unwrap();
                assert_eq!(p.order(), k);
                assert_eq!(p.degree(), Some(j + k - 1));
                for (a, b, _) in p.terms() {
                    assert_eq!(a as i64 - b as i64, angular_index(k, j));
                }
            }
        }
    }

    #[test]
    fn capacity_error() {
        assert!(matches!(basis_poly(3, MAX_POLY_DEGREE), Err(Error::Capability(_))));
        let top = BivariatePoly::monomial(0, MAX_POLY_DEGREE - 1, c(1.0));
        assert!(matches!(top.raise(), Err(Error::Capability(_))));
    }

    #[test]
    fn closed_form_matches_ladder() {
        let pts = [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.3, -0.2),
            Complex64::new(-1.1, 0.7),
            Complex64::new(1.4, 1.4),
        ];
        for k in 1..=6 {
            for j in 0..24 {
                let p = basis_poly(k, j).unwrap();
                for &z in &pts {
                    let a = p.eval(z);
                    let b = basis_value(k, j, z).unwrap();
                    let scale: f64 = p.terms().map(|(a, b, c)| c.norm() * z.norm().powi((a + b) as i32)).sum();
                    assert!((a - b).norm() <= 1e-13 * scale.max(1.0), "k={k} j={j} z={z}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn gram_is_identity() {
        let (kk, jj) = (6usize, 24usize);
        let rule = default_rule(kk, jj).unwrap();
        let polys: Vec<BivariatePoly> = (1..=kk)
            .flat_map(|k| (0..jj).map(move |j| basis_poly(k, j).unwrap()))
            .collect();
        assert_eq!(polys.len(), 144);
        // ring-major samples of every basis polynomial
        let mut nodes = Vec::new();
        for &t in &rule.radial_nodes {
            for m in 0..rule.angular_count {
                nodes.push(Complex64::from_polar(t.sqrt(), rule.angle(m)));
            }
        }
        let vals: Vec<Vec<Complex64>> = polys.iter().map(|p| nodes.iter().map(|&z| p.eval(z)).collect()).collect();
        let wts: Vec<f64> = rule
            .radial_weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w / rule.angular_count as f64, rule.angular_count))
            .collect();
        let mut worst = 0.0f64;
        for r in 0..polys.len() {
            for s in 0..polys.len() {
                let g: Complex64 = (0..nodes.len()).map(|i| vals[s][i] * vals[r][i].conj() * wts[i]).sum();
                let e = if r == s { 1.0 } else { 0.0 };
                worst = worst.max((g - e).norm());
            }
        }
        assert!(worst < 1e-10, "Gram defect {worst}");
    }

    #[test]
    fn reproducing_property() {
        let rule = build_rule(60, 80).unwrap();
        let zs = [Complex64::new(0.5, -1.0), Complex64::new(-1.5, 1.2), Complex64::new(2.0, 0.0)];
        for k in 1..=3 {
            for j in [0usize, 1, 4] {
                let p = basis_poly(k, j).unwrap();
                for &z in &zs {
                    let v = integrate(&rule, |w| {
                        p.eval(w) * kernel_eval(KernelKind::Level(k), w, z).unwrap().conj()
                    })
                    .unwrap();
                    let e = p.eval(z);
                    assert!((v - e).norm() < 1e-8, "k={k} j={j} z={z}: {v} vs {e}");
                }
            }
        }
    }

    #[test]
    fn kernel_sum_identity() {
        let pts = [Complex64::new(0.0, 0.0), Complex64::new(1.0, -2.0), Complex64::new(-2.5, 1.5), Complex64::new(2.0, 2.0)];
        for n in 1..=8 {
            for &z in &pts {
                for &w in &pts {
                    let lhs = kernel_eval(KernelKind::Order(n), z, w).unwrap();
                    let rhs: Complex64 = (1..=n).map(|k| kernel_eval(KernelKind::Level(k), z, w).unwrap()).sum();
                    assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1e-300), "n={n} z={z} w={w}");
                }
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let v = kernel_eval(KernelKind::Level(1), c(1.0), Complex64::new(0.0, 1.0)).unwrap();
        assert!((v - Complex64::from_polar(1.0, -1.0)).norm() < 1e-15);
        for k in 1..6 {
            let z = Complex64::new(0.7, -1.3);
            let v = kernel_eval(KernelKind::Level(k), z, z).unwrap();
            assert!((v - z.norm_sqr().exp()).norm() < 1e-13 * v.norm());
        }
        let v = kernel_eval(KernelKind::Order(2), c(1.0), c(0.0)).unwrap();
        assert!((v - 1.0).norm() < 1e-15);
        assert!(matches!(kernel_eval(KernelKind::Level(1), c(40.0), c(40.0)), Err(Error::Range(_))));
        assert!(kernel_eval_scaled(KernelKind::Level(1), c(40.0), c(40.0)).unwrap().norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn kernel_hermitian() {
        let z = Complex64::new(0.4, 1.9);
        let w = Complex64::new(-1.2, 0.3);
        for k in 1..5 {
            let a = kernel_eval(KernelKind::Level(k), z, w).unwrap();
            let b = kernel_eval(KernelKind::Level(k), w, z).unwrap();
            assert!((a - b.conj()).norm() < 1e-13 * a.norm());
        }
    }

    #[test]
    fn kernel_matches_basis_sum() {
        let pts = [Complex64::new(0.0, 0.0), Complex64::new(1.2, -1.5), Complex64::new(-2.0, 0.3)];
        for k in 1..=4 {
            for &z in &pts {
                for &w in &pts {
                    let s: Complex64 = (0..64).map(|j| scaled_basis_value(k, j, z) * scaled_basis_value(k, j, w).conj()).sum();
                    let kv = kernel_eval_scaled(KernelKind::Level(k), z, w).unwrap();
                    assert!((s - kv).norm() < 1e-8, "k={k} z={z} w={w}: {s} vs {kv}");
                }
            }
        }
    }

    #[test]
    fn commutator_on_basis() {
        for k in 1..=5 {
            for j in [0usize, 3, 9] {
                let p = basis_poly(k, j).unwrap();
                let lhs = p.raise().unwrap().lower().unwrap().sub(&p.lower().unwrap().raise().unwrap()).unwrap();
                assert!(lhs.max_abs_diff(&p) < 1e-12);
            }
        }
    }

    #[test]
    fn large_radius_values_stay_finite() {
        let z = Complex64::from_polar(64.0, 0.3);
        let v = scaled_basis_value(3, 4096, z);
        assert!(v.norm().is_finite() && v.norm() > 0.0);
        assert!(matches!(basis_value(1, 4096, z), Err(Error::Range(_))));
    }

    #[test]
    fn coherent_examples() {
        let spec = TruncationSpec::new(4, 64, 0, 0).unwrap();
        let l0 = coherent_vector(Coherent::L(1), c(0.0), &spec).unwrap();
        assert_eq!(l0.values[0], c(1.0));
        assert_eq!(l0.tail_bound, 0.0);
        assert!((l0.norm() - 1.0).abs() < 1e-15);
        for k in 1..=4 {
            for &z in &[Complex64::new(1.0, 2.0), Complex64::from_polar(3.0, 0.7)] {
                let l = coherent_vector(Coherent::L(k), z, &spec).unwrap();
                assert!((l.norm() - 1.0).abs() <= l.tail_bound + 1e-14);
                assert!(l.norm() <= 1.0 + 1e-14);
            }
        }
    }

    #[test]
    fn kernel_vector_level_masses() {
        let spec = TruncationSpec::new(4, 64, 0, 0).unwrap();
        for n in 1..=4 {
            for &z in &[Complex64::new(0.0, 0.0), Complex64::new(-1.0, 2.0), Complex64::from_polar(3.0, 2.0)] {
                let kv = coherent_vector(Coherent::K(n), z, &spec).unwrap();
                for k in 1..=n {
                    let mass: f64 = (0..64).map(|j| kv.get(k, j).norm_sqr()).sum();
                    assert!((mass - 1.0 / n as f64).abs() < 1e-8, "n={n} k={k} z={z}: {mass}");
                }
            }
        }
    }

    #[test]
    fn kernel_vector_matches_closed_form() {
        // reconstruct K_n(w, z)/√(n K_n(z,z)) from coefficients at a few w
        let spec = TruncationSpec::new(3, 64, 0, 0).unwrap();
        let z = Complex64::new(0.8, -1.1);
        let n = 3;
        let kv = coherent_vector(Coherent::K(n), z, &spec).unwrap();
        for &w in &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.5), Complex64::new(-0.3, -2.0)] {
            let recon: Complex64 = spec
                .layout()
                .iter()
                .enumerate()
                .map(|(i, (k, j))| kv.values[i] * scaled_basis_value(k, j, w))
                .sum();
            let exact = kernel_eval_scaled(KernelKind::Order(n), w, z).unwrap() / (n as f64).sqrt();
            assert!((recon - exact).norm() < 1e-10, "w={w}: {recon} vs {exact}");
        }
    }

    #[test]
    fn lhat_one_is_l_one() {
        let spec = TruncationSpec::new(3, 64, 0, 0).unwrap();
        let z = Complex64::new(1.3, -0.4);
        let a = coherent_vector(Coherent::LHat(1), z, &spec).unwrap();
        let b = coherent_vector(Coherent::L(1), z, &spec).unwrap();
        assert!((&a.values - &b.values).camax() < 1e-12);
    }

    #[test]
    fn gate_enforced() {
        let spec = TruncationSpec::new(2, 64, 0, 0).unwrap();
        assert!(coherent_vector(Coherent::L(1), c(5.6), &spec).is_ok());
        assert!(matches!(coherent_vector(Coherent::L(1), c(5.7), &spec), Err(Error::Range(_))));
        let small = TruncationSpec::new(2, 4, 0, 0).unwrap();
        assert!(matches!(coherent_vector(Coherent::L(1), c(3.0), &small), Err(Error::Range(_))));
    }

    proptest! {
        #[test]
        fn flat_index_bijective(kk in 1usize..8, jj in 1usize..40) {
            let spec = TruncationSpec::new(kk, jj, 0, 0).unwrap();
            let layout = spec.layout();
            for idx in 0..spec.dim() {
                let (k, j) = layout.level_degree(idx);
                prop_assert_eq!(spec.flat_index(k, j).unwrap(), idx);
                prop_assert_eq!(idx, (k - 1) * jj + j);
            }
        }

        #[test]
        fn canonical_commutation(entries in proptest::collection::vec((0usize..6, 0usize..6, -2.0f64..2.0, -2.0f64..2.0), 1..12)) {
            let p = BivariatePoly::from_table({
                let mut t = vec![vec![Complex64::new(0.0, 0.0); 6]; 6];
                for (a, b, re, im) in &entries { t[*a][*b] += Complex64::new(*re, *im); }
                t
            }).unwrap();
            let comm = p.raise().unwrap().lower().unwrap().sub(&p.lower().unwrap().raise().unwrap()).unwrap();
            prop_assert!(comm.max_abs_diff(&p) < 1e-12);
        }

        #[test]
        fn raise_lifts_order(entries in proptest::collection::vec((0usize..6, 0usize..6, 0.5f64..2.0), 1..8)) {
            let p = BivariatePoly::from_table({
                let mut t = vec![vec![Complex64::new(0.0, 0.0); 6]; 6];
                for (a, b, re) in &entries { t[*a][*b] += Complex64::new(*re, 0.0); }
                t
            }).unwrap();
            let q = p.raise().unwrap();
            prop_assert_eq!(q.order(), p.order() + 1);
            prop_assert!(q.degree().unwrap() <= p.degree().unwrap() + 1);
            prop_assert_eq!(p.lower().unwrap().order(), p.order() - 1);
        }

        #[test]
        fn scaled_values_bounded(k in 1usize..6, j in 0usize..200, r in 0.0f64..20.0, th in 0.0f64..6.3) {
            // |e_{k,j}|² e^{-|z|²} ≤ K_(k)(z,z) e^{-|z|²} = 1
            let v = scaled_basis_value(k, j, Complex64::from_polar(r, th));
            prop_assert!(v.norm() <= 1.0 + 1e-12);
        }
    }
}
