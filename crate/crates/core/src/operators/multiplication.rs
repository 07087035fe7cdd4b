//! Multiplication, Toeplitz and Hankel matrices by quadrature.
//!
//! Entries `⟨f e_c, e_r⟩` are assembled ring by ring: on the ring `|z|² = t_i`
//! the basis functions are `e^{idθ} ρ(t_i)`, so only the angular Fourier
//! coefficient `f̂_i[d_r − d_c]` of the symbol enters. Radial symbols have a
//! single coefficient and give matrices that are diagonal in `j` per level pair.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::OperatorMatrix;
use crate::basis::{angular_index, radial_log_profile, scaled_basis_value, Domain, Layout, TruncationSpec};
use crate::error::{Error, Result};
use crate::quadrature::{ring_fourier, PlaneIntegrator, QuadratureRule};
use crate::symbol::{Symbol, SymbolSpec};

/// Largest relative Hankel column leak accepted by [`hankel_matrix`].
pub const DEFAULT_LEAK_THRESHOLD: f64 = 1e-3;

fn max_poly_degree(l: &Layout) -> usize {
    l.last_level() - 1 + l.degrees - 1
}

fn angular_range(l: &Layout) -> (i64, i64) {
    (angular_index(l.last_level(), 0), angular_index(l.first_level, l.degrees - 1))
}

fn check_rule(rule: &QuadratureRule, rows: &Layout, cols: &Layout) -> Result<()> {
    let deg = max_poly_degree(rows) + max_poly_degree(cols);
    if deg > rule.max_exact_degree {
        return Err(Error::Capability(format!(
            "rule exact to degree {} but basis products reach degree {deg}",
            rule.max_exact_degree
        )));
    }
    let (rlo, rhi) = angular_range(rows);
    let (clo, chi) = angular_range(cols);
    let spread = (rhi - clo).max(chi - rlo);
    if spread >= rule.angular_count as i64 {
        return Err(Error::Capability(format!(
            "angular differences reach {spread} but the rule has {} angles",
            rule.angular_count
        )));
    }
    Ok(())
}

fn check_bound(f: &Symbol, rule: &QuadratureRule) -> Result<()> {
    for &t in &rule.radial_nodes {
        for m in 0..rule.angular_count {
            f.checked_eval(Complex64::from_polar(t.sqrt(), rule.angle(m)))?;
        }
    }
    Ok(())
}

/// `√w_i ρ_{k,j}(t_i)` for every basis element of the layout, node-major per element.
fn weighted_profiles(layout: &Layout, rule: &QuadratureRule) -> Vec<Vec<f64>> {
    layout
        .iter()
        .map(|(k, j)| {
            rule.radial_nodes
                .iter()
                .zip(&rule.log_weights)
                .map(|(&t, &lw)| {
                    let (sign, lr) = radial_log_profile(k, j, t);
                    if sign == 0.0 { 0.0 } else { sign * (lr + 0.5 * lw).exp() }
                })
                .collect()
        })
        .collect()
}

fn assemble(
    f: &Symbol,
    rows: Layout,
    cols: Layout,
    rule: &QuadratureRule,
    allow_radial: bool,
) -> Result<OperatorMatrix> {
    check_rule(rule, &rows, &cols)?;
    check_bound(f, rule)?;
    let pr = weighted_profiles(&rows, rule);
    let pc = if rows == cols { pr.clone() } else { weighted_profiles(&cols, rule) };
    let dr: Vec<i64> = rows.iter().map(|(k, j)| angular_index(k, j)).collect();
    let dc: Vec<i64> = cols.iter().map(|(k, j)| angular_index(k, j)).collect();
    let m = rule.angular_count as i64;

    let radial = if allow_radial { f.radial_profile() } else { None };
    let row_values: Vec<Vec<Complex64>> = match radial {
        Some(g) => {
            let gi: Vec<Complex64> = rule.radial_nodes.iter().map(|&t| g(t)).collect();
            (0..rows.dim())
                .into_par_iter()
                .map(|r| {
                    (0..cols.dim())
                        .map(|c| {
                            if dr[r] != dc[c] {
                                return Complex64::new(0.0, 0.0);
                            }
                            let mut acc = Complex64::new(0.0, 0.0);
                            for i in 0..gi.len() {
                                acc += gi[i] * (pr[r][i] * pc[c][i]);
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        }
        None => {
            let fh = ring_fourier(rule, |z| f.eval(z))?;
            (0..rows.dim())
                .into_par_iter()
                .map(|r| {
                    (0..cols.dim())
                        .map(|c| {
                            let n = (dr[r] - dc[c]).rem_euclid(m) as usize;
                            let mut acc = Complex64::new(0.0, 0.0);
                            for i in 0..fh.len() {
                                acc += fh[i][n] * (pr[r][i] * pc[c][i]);
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        }
    };
    let entries = DMatrix::from_fn(rows.dim(), cols.dim(), |r, c| row_values[r][c]);
    OperatorMatrix::new(rows, cols, entries, format!("M[{}]", f.label()))
}

/// `⟨f e_c, e_r⟩` for `e_c` in `cols`, `e_r` in `rows`; radial symbols take the fast path.
pub fn symbol_matrix(f: &Symbol, rows: Layout, cols: Layout, rule: &QuadratureRule) -> Result<OperatorMatrix> {
    assemble(f, rows, cols, rule, true)
}

/// As [`symbol_matrix`] but always through the angular Fourier coefficients.
pub fn symbol_matrix_generic(f: &Symbol, rows: Layout, cols: Layout, rule: &QuadratureRule) -> Result<OperatorMatrix> {
    assemble(f, rows, cols, rule, false)
}

pub fn multiplication_matrix(f: &Symbol, spec: &TruncationSpec, rule: &QuadratureRule) -> Result<OperatorMatrix> {
    let l = spec.layout();
    symbol_matrix(f, l, l, rule)
}

/// `T_f = P M_f` restricted to the domain.
pub fn toeplitz_matrix(f: &Symbol, domain: Domain, spec: &TruncationSpec, rule: &QuadratureRule) -> Result<OperatorMatrix> {
    domain.validate(spec.levels)?;
    let l = domain.layout(spec.degrees);
    Ok(symbol_matrix(f, l, l, rule)?.with_label(format!("T[{}; {domain:?}]", f.label())))
}

/// `H_f = (I − P) M_f` on the domain, with rows on the margined layout.
#[derive(Debug, Clone)]
pub struct HankelMatrix {
    pub matrix: OperatorMatrix,
    /// `‖M_f e‖² − ‖M_f e‖²_{margined}` per column.
    pub leaks: Vec<f64>,
    /// `leaks` divided by `‖f‖²_∞`.
    pub relative_leaks: Vec<f64>,
}

impl HankelMatrix {
    pub fn max_relative_leak(&self) -> f64 {
        self.relative_leaks.iter().copied().fold(0.0, f64::max)
    }
}

pub fn hankel_matrix(f: &Symbol, domain: Domain, spec: &TruncationSpec, rule: &QuadratureRule) -> Result<HankelMatrix> {
    hankel_matrix_with_threshold(f, domain, spec, rule, DEFAULT_LEAK_THRESHOLD)
}

pub fn hankel_matrix_with_threshold(
    f: &Symbol,
    domain: Domain,
    spec: &TruncationSpec,
    rule: &QuadratureRule,
    threshold: f64,
) -> Result<HankelMatrix> {
    domain.validate(spec.levels)?;
    if spec.margin_levels < 2 {
        return Err(Error::Config(format!(
            "Hankel matrices need margin_K >= 2, got {}",
            spec.margin_levels
        )));
    }
    if let Some(SymbolSpec::Monomial { a, b, .. }) = f.descriptor().map(|d| &d.spec) {
        if spec.margin_degrees < (a + b) as usize {
            return Err(Error::Config(format!(
                "monomial of degree {} needs margin_J >= {}, got {}",
                a + b,
                a + b,
                spec.margin_degrees
            )));
        }
    }
    let rows = spec.margined_layout();
    let cols = domain.layout(spec.degrees);
    let full = symbol_matrix(f, rows, cols, rule)?;
    let sq = symbol_matrix(&f.abs_squared(), cols, cols, rule)?;
    // leaks are measured against ‖f‖²_∞, the largest possible column mass
    let scale = (f.bound() * f.bound()).max(f64::MIN_POSITIVE);
    let mut leaks = Vec::with_capacity(cols.dim());
    let mut relative = Vec::with_capacity(cols.dim());
    for c in 0..cols.dim() {
        let total = sq.entries[(c, c)].re;
        let kept = full.entries.column(c).norm_squared();
        let leak = total - kept;
        leaks.push(leak);
        relative.push(leak.max(0.0) / scale);
    }
    let mut entries = full.entries;
    for (r, (k, _)) in rows.iter().enumerate() {
        let inside = match domain {
            Domain::Level(t) => k == t,
            Domain::FirstN(n) => k <= n,
        };
        if inside {
            entries.row_mut(r).fill(Complex64::new(0.0, 0.0));
        }
    }
    let out = HankelMatrix {
        matrix: OperatorMatrix::new(rows, cols, entries, format!("H[{}; {domain:?}]", f.label()))?,
        leaks,
        relative_leaks: relative,
    };
    let worst = out.max_relative_leak();
    if worst > threshold {
        return Err(Error::Accuracy(format!(
            "Hankel column leak {worst:.3e} exceeds {threshold:.1e}; enlarge the margins"
        )));
    }
    Ok(out)
}

/// Windowed `H*H` on level `k`: `P_W M_{|f|²} P_W − (P_k M_f P_W)*(P_k M_f P_W)`.
///
/// `P_k M_f P_W` is kept on `degrees` analytic degrees; the returned leak is the
/// squared mass in its last four rows, which bounds what the cut discards.
pub fn hankel_gram_window(
    f: &Symbol,
    level: usize,
    window: usize,
    degrees: usize,
    rule: &QuadratureRule,
) -> Result<(DMatrix<Complex64>, f64)> {
    if window == 0 || window > degrees {
        return Err(Error::Domain(format!("window {window} must lie in 1..={degrees}")));
    }
    let w = Layout::new(level, 1, window);
    let a = symbol_matrix(&f.abs_squared(), w, w, rule)?;
    let b = symbol_matrix(f, Layout::new(level, 1, degrees), w, rule)?;
    Ok(gram_and_leak(&a.entries, &b.entries, window, degrees))
}

/// Matrix of `f(· + z)` between two layouts, integrated in the plane around `z`
/// with panel edges on the kink curves of `f`.
pub fn shifted_symbol_matrix(
    f: &Symbol,
    z: Complex64,
    rows: Layout,
    cols: Layout,
    plane: &PlaneIntegrator,
) -> Result<DMatrix<Complex64>> {
    let (nr, nc) = (rows.dim(), cols.dim());
    let top = (rows.last_level() + rows.degrees).max(cols.last_level() + cols.degrees);
    let reach = (top as f64).sqrt() + 9.0;
    let row_idx: Vec<(usize, usize)> = rows.iter().collect();
    let col_idx: Vec<(usize, usize)> = cols.iter().collect();
    let v = plane.integrate_vec(z, reach, f.kinks(), nr * nc, |w| f.eval(w), |u, out| {
        let er: Vec<Complex64> = row_idx.iter().map(|&(k, j)| scaled_basis_value(k, j, u).conj()).collect();
        let ec: Vec<Complex64> = col_idx.iter().map(|&(k, j)| scaled_basis_value(k, j, u)).collect();
        for (r, a) in er.iter().enumerate() {
            for (c, b) in ec.iter().enumerate() {
                out[r * nc + c] = a * b;
            }
        }
    })?;
    Ok(DMatrix::from_row_slice(nr, nc, &v))
}

/// [`hankel_gram_window`] for `f(· + z)`, by plane integration.
pub fn shifted_hankel_gram(
    f: &Symbol,
    z: Complex64,
    level: usize,
    window: usize,
    degrees: usize,
    plane: &PlaneIntegrator,
) -> Result<(DMatrix<Complex64>, f64)> {
    if window == 0 || window > degrees {
        return Err(Error::Domain(format!("window {window} must lie in 1..={degrees}")));
    }
    let w = Layout::new(level, 1, window);
    let a = shifted_symbol_matrix(&f.abs_squared(), z, w, w, plane)?;
    let b = shifted_symbol_matrix(f, z, Layout::new(level, 1, degrees), w, plane)?;
    Ok(gram_and_leak(&a, &b, window, degrees))
}

fn gram_and_leak(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, window: usize, degrees: usize) -> (DMatrix<Complex64>, f64) {
    let gram = a - b.adjoint() * b;
    let tail_rows = degrees.min(4);
    let leak = (0..window)
        .map(|c| (degrees - tail_rows..degrees).map(|r| b[(r, c)].norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    (gram, leak)
}
