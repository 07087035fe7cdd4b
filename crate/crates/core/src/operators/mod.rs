//! Dense matrices of operators on the truncated model.
//!
//! Every matrix carries the [`Layout`] of its row and column index sets. The
//! truncation drops whatever an operator sends outside the row layout; ladder
//! identities therefore hold exactly only away from the top level, and callers
//! that need exactness build on a margined layout and compare leading blocks.

mod multiplication;
mod radial;
mod weyl;

pub use multiplication::{
    hankel_gram_window, shifted_hankel_gram, shifted_symbol_matrix, hankel_matrix, hankel_matrix_with_threshold, multiplication_matrix, symbol_matrix,
    symbol_matrix_generic, toeplitz_matrix, HankelMatrix, DEFAULT_LEAK_THRESHOLD,
};
pub use radial::{
    displaced_columns, radial_eigenvalues, radial_heat_level, radial_moment, DisplacedColumns,
    RadialMoments,
};
pub use weyl::{conjugate_by_weyl, displacement_block, weyl_matrix, weyl_on_layout};

use nalgebra::linalg::{Schur, SVD};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{Domain, Layout, TruncationSpec};
use crate::error::{Error, Result};
use crate::quadrature::{CompositeLegendre, laguerre_roots};
use crate::specfun::laguerre_raw;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub rows: Layout,
    pub cols: Layout,
    pub entries: DMatrix<Complex64>,
    pub label: String,
}

impl OperatorMatrix {
    pub fn new(rows: Layout, cols: Layout, entries: DMatrix<Complex64>, label: impl Into<String>) -> Result<Self> {
        if entries.nrows() != rows.dim() || entries.ncols() != cols.dim() {
            return Err(Error::Domain(format!(
                "matrix is {}x{} but layouts need {}x{}",
                entries.nrows(),
                entries.ncols(),
                rows.dim(),
                cols.dim()
            )));
        }
        Ok(Self { rows, cols, entries, label: label.into() })
    }

    pub fn zeros(rows: Layout, cols: Layout, label: impl Into<String>) -> Self {
        Self { rows, cols, entries: DMatrix::zeros(rows.dim(), cols.dim()), label: label.into() }
    }

    pub fn identity(layout: Layout) -> Self {
        Self { rows: layout, cols: layout, entries: DMatrix::identity(layout.dim(), layout.dim()), label: "I".into() }
    }

    /// Same matrix under a new label.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            entries: self.entries.adjoint(),
            label: format!("({})*", self.label),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Domain(format!(
                "cannot compose {} (cols {:?}) with {} (rows {:?})",
                self.label, self.cols, other.label, other.rows
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            entries: &self.entries * &other.entries,
            label: format!("{} {}", self.label, other.label),
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Domain(format!("layouts of {} and {} differ", self.label, other.label)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries: &self.entries + &other.entries,
            label: format!("{} + {}", self.label, other.label),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries: &self.entries - &other.entries,
            label: format!("{} - {}", self.label, other.label),
        })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: &self.entries * s, label: format!("{s} {}", self.label) }
    }

    /// Entries for a sub-window of both layouts.
    pub fn restrict(&self, rows: Layout, cols: Layout) -> Result<Self> {
        let map = |outer: &Layout, inner: &Layout| -> Result<Vec<usize>> {
            inner
                .iter()
                .map(|(k, j)| {
                    outer.index(k, j).ok_or_else(|| {
                        Error::Domain(format!("({k},{j}) of {inner:?} not inside {outer:?}"))
                    })
                })
                .collect()
        };
        let ri = map(&self.rows, &rows)?;
        let ci = map(&self.cols, &cols)?;
        let entries = DMatrix::from_fn(ri.len(), ci.len(), |r, c| self.entries[(ri[r], ci[c])]);
        Ok(Self { rows, cols, entries, label: self.label.clone() })
    }

    /// Zero-padded copy on larger layouts.
    pub fn embed(&self, rows: Layout, cols: Layout) -> Result<Self> {
        let mut out = Self::zeros(rows, cols, self.label.clone());
        for (r, (k, j)) in self.rows.iter().enumerate() {
            let rr = rows
                .index(k, j)
                .ok_or_else(|| Error::Domain(format!("({k},{j}) not inside {rows:?}")))?;
            for (c, (k2, j2)) in self.cols.iter().enumerate() {
                let cc = cols
                    .index(k2, j2)
                    .ok_or_else(|| Error::Domain(format!("({k2},{j2}) not inside {cols:?}")))?;
                out.entries[(rr, cc)] = self.entries[(r, c)];
            }
        }
        Ok(out)
    }

    /// Spectral norm (largest singular value).
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s = singular_values(&self.entries);
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Eigenvalues of a square matrix, sorted by modulus then argument.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        if self.entries.nrows() != self.entries.ncols() {
            return Err(Error::Domain("eigenvalues need a square matrix".into()));
        }
        let n = self.entries.nrows();
        let mut ev: Vec<Complex64> = ITERATION_TOLERANCES
            .iter()
            .find_map(|&eps| Schur::try_new(self.entries.clone(), eps, ITERATIONS_PER_ROW * n.max(1)))
            .and_then(|s| s.eigenvalues())
            .ok_or_else(|| Error::Numeric(format!("Schur iteration did not converge for {}", self.label)))?
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
        Ok(ev)
    }
}

/// Convergence tolerances tried in order. At machine epsilon the shifted QR
/// iterations can cycle on nearly scalar matrices; each retry relaxes the
/// deflation test by a decade.
const ITERATION_TOLERANCES: [f64; 5] = [f64::EPSILON, 1e-15, 1e-14, 1e-13, 1e-12];
const ITERATIONS_PER_ROW: usize = 200;

/// Singular values (unordered) with bounded SVD iterations; falls back to the
/// Hermitian eigenvalues of `m* m` when no tolerance converges.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let cap = ITERATIONS_PER_ROW * m.nrows().max(m.ncols());
    ITERATION_TOLERANCES
        .iter()
        .find_map(|&eps| SVD::try_new(m.clone(), false, false, eps, cap))
        .map(|svd| svd.singular_values.iter().copied().collect())
        .unwrap_or_else(|| {
            (m.adjoint() * m).symmetric_eigenvalues().iter().map(|&e| e.max(0.0).sqrt()).collect()
        })
}

pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).iter().copied().fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Ladder operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    /// `𝔞 = ∂_z̄`: `e_{k+1,j} ↦ √k e_{k,j}`.
    Lower,
    /// `𝔞† = −∂_z + z̄`: `e_{k,j} ↦ √k e_{k+1,j}`.
    Raise,
    /// `𝔄`: `e_{k+1,j} ↦ e_{k,j}`.
    Down,
    /// `𝔄†`: `e_{k,j} ↦ e_{k+1,j}`.
    Up,
    /// `N`: `e_{k,j} ↦ (k − 1) e_{k,j}`.
    Number,
}

pub fn ladder_matrix(layout: Layout, which: Ladder) -> OperatorMatrix {
    let mut m = OperatorMatrix::zeros(layout, layout, format!("{which:?}"));
    for (c, (k, j)) in layout.iter().enumerate() {
        let (target, value) = match which {
            Ladder::Lower => (k.checked_sub(1).filter(|&k2| k2 >= 1), ((k - 1) as f64).sqrt()),
            Ladder::Raise => (Some(k + 1), (k as f64).sqrt()),
            Ladder::Down => (k.checked_sub(1).filter(|&k2| k2 >= 1), 1.0),
            Ladder::Up => (Some(k + 1), 1.0),
            Ladder::Number => (Some(k), (k - 1) as f64),
        };
        if let Some(r) = target.and_then(|k2| layout.index(k2, j)) {
            m.entries[(r, c)] = Complex64::new(value, 0.0);
        }
    }
    m
}

/// Orthogonal projection onto a level or onto the first `n` levels.
pub fn projection_matrix(layout: Layout, target: Domain) -> Result<OperatorMatrix> {
    target.validate(layout.last_level())?;
    let keep = |k: usize| match target {
        Domain::Level(t) => k == t,
        Domain::FirstN(n) => k <= n,
    };
    let mut m = OperatorMatrix::zeros(layout, layout, format!("P{target:?}"));
    for (i, (k, _)) in layout.iter().enumerate() {
        if keep(k) {
            m.entries[(i, i)] = Complex64::new(1.0, 0.0);
        }
    }
    Ok(m)
}

/// `(‖𝔄P₍ₖ₎‖, 2‖g‖_{L¹(ν)})` with `g(z) = −(k−1)^{-1/2} z L_{k−2}^1(|z|²)`.
pub fn banded_kernel_norm_bound(k: usize, spec: &TruncationSpec) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(Error::Domain(format!("the kernel bound needs k >= 2 (A P_(1) = 0), got {k}")));
    }
    if k > spec.levels {
        return Err(Error::Domain(format!("level {k} outside 1..={}", spec.levels)));
    }
    let layout = spec.layout();
    let op = ladder_matrix(layout, Ladder::Down).matmul(&projection_matrix(layout, Domain::Level(k))?)?;
    let norm = op.norm();

    // ∫|g| dν = ∫₀^∞ r e^{−r²/2} |g(r)| dr; split at the zeros of L_{k−2}^1(r²)
    let n = k - 2;
    let scale = 1.0 / ((k - 1) as f64).sqrt();
    let integrand = |r: f64| {
        let v = scale * r * laguerre_raw(n, 1.0, r * r).abs() * r * (-0.5 * r * r).exp();
        Complex64::new(v, 0.0)
    };
    let mut breaks = vec![0.0];
    breaks.extend(laguerre_roots(n, 1.0)?.into_iter().map(f64::sqrt));
    let r_max = breaks.last().copied().unwrap_or(0.0) + 40.0;
    breaks.push(r_max);
    let quad = CompositeLegendre::default();
    let mut l1 = 0.0;
    for w in breaks.windows(2) {
        l1 += quad.integrate(w[0], w[1], 1e-3, integrand)?.re;
    }
    Ok((norm, 2.0 * l1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &OperatorMatrix, b: &OperatorMatrix, tol: f64) {
        let d = a.sub(b).unwrap().max_abs();
        assert!(d <= tol, "{} vs {}: {d}", a.label, b.label);
    }

    #[test]
    fn shift_identities_on_leading_block() {
        let spec = TruncationSpec::new(6, 16, 2, 0).unwrap();
        let big = spec.margined_layout();
        let inner = spec.layout();
        let up = ladder_matrix(big, Ladder::Up);
        let down = ladder_matrix(big, Ladder::Down);
        let dd = down.matmul(&up).unwrap().restrict(inner, inner).unwrap();
        assert_close(&dd, &OperatorMatrix::identity(inner), 0.0);
        let ud = up.matmul(&down).unwrap().restrict(inner, inner).unwrap();
        let p1 = projection_matrix(inner, Domain::Level(1)).unwrap();
        assert_close(&ud, &OperatorMatrix::identity(inner).sub(&p1).unwrap(), 0.0);
        for k in 1..=5 {
            let pk = projection_matrix(big, Domain::Level(k)).unwrap();
            let lhs = up.matmul(&pk).unwrap().matmul(&down).unwrap().restrict(inner, inner).unwrap();
            let rhs = projection_matrix(inner, Domain::Level(k + 1)).unwrap();
            assert_close(&lhs, &rhs, 0.0);
        }
    }

    #[test]
    fn top_level_defect_is_localized() {
        let layout = Layout::new(1, 3, 4);
        let dd = ladder_matrix(layout, Ladder::Down).matmul(&ladder_matrix(layout, Ladder::Up)).unwrap();
        for (i, (k, _)) in layout.iter().enumerate() {
            let expected = if k < 3 { 1.0 } else { 0.0 };
            assert_eq!(dd.entries[(i, i)].re, expected);
        }
    }

    #[test]
    fn number_and_commutator() {
        let layout = Layout::new(1, 6, 8);
        let a = ladder_matrix(layout, Ladder::Lower);
        let ad = ladder_matrix(layout, Ladder::Raise);
        assert_close(&ad.matmul(&a).unwrap(), &ladder_matrix(layout, Ladder::Number), 1e-14);
        let comm = a.matmul(&ad).unwrap().sub(&ad.matmul(&a).unwrap()).unwrap();
        let inner = Layout::new(1, 5, 8);
        assert_close(&comm.restrict(inner, inner).unwrap(), &OperatorMatrix::identity(inner), 1e-14);
        assert_eq!(ladder_matrix(layout, Ladder::Down), ladder_matrix(layout, Ladder::Up).adjoint().with_label("Down"));
        let n = ladder_matrix(layout, Ladder::Number);
        let idx = layout.index(3, 5).unwrap();
        assert_eq!(n.entries[(idx, idx)].re, 2.0);
    }

    #[test]
    fn projections() {
        let layout = Layout::new(1, 5, 6);
        let sum = (1..=3)
            .map(|k| projection_matrix(layout, Domain::Level(k)).unwrap())
            .reduce(|a, b| a.add(&b).unwrap())
            .unwrap();
        assert_close(&sum, &projection_matrix(layout, Domain::FirstN(3)).unwrap(), 0.0);
        let p = projection_matrix(layout, Domain::Level(2)).unwrap();
        assert_close(&p.matmul(&p).unwrap(), &p, 0.0);
        assert_close(&p.adjoint(), &p.with_label("P"), 0.0);
        assert!(matches!(projection_matrix(layout, Domain::Level(6)), Err(Error::Domain(_))));
    }

    #[test]
    fn norm_bound_examples() {
        let spec = TruncationSpec::new(6, 32, 0, 0).unwrap();
        let (n2, b2) = banded_kernel_norm_bound(2, &spec).unwrap();
        assert!((n2 - 1.0).abs() < 1e-12);
        // 2 √(π/2)
        assert!((b2 - 2.0 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10, "{b2}");
        for k in 3..=6 {
            let (n, b) = banded_kernel_norm_bound(k, &spec).unwrap();
            assert!((n - 1.0).abs() < 1e-12);
            assert!(b.is_finite() && b >= 1.0 && n <= b, "k={k}: {n} {b}");
        }
        assert!(matches!(banded_kernel_norm_bound(1, &spec), Err(Error::Domain(_))));
    }

    #[test]
    fn restrict_and_embed_roundtrip() {
        let big = Layout::new(1, 3, 5);
        let small = Layout::new(2, 1, 3);
        let m = ladder_matrix(big, Ladder::Raise);
        let r = m.restrict(small, small).unwrap();
        let e = r.embed(big, big).unwrap();
        assert_eq!(e.restrict(small, small).unwrap(), r);
        assert!(m.restrict(Layout::new(1, 4, 5), small).is_err());
    }
}
