//! The identity-verification suite: every structural identity of the model,
//! evaluated on the configured truncation with its measured residual.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{kernel_eval_scaled, Domain, KernelKind, Layout, TruncationSpec};
use crate::berezin::{berezin_matrix, berezin_standard};
use crate::config::RunConfig;
use crate::diagnostics::{transfer_pair, REPORT_SCHEMA};
use crate::error::Result;
use crate::operators::{
    conjugate_by_weyl, displacement_block, hankel_matrix, ladder_matrix, multiplication_matrix, projection_matrix,
    spectral_norm, symbol_matrix, symbol_matrix_generic, toeplitz_matrix, weyl_on_layout, Ladder, OperatorMatrix,
};
use crate::quadrature::default_rule;
use crate::symbol::{library, Symbol};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema: String,
    pub kind: String,
    pub config: RunConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerifyReport {
    /// Fixed-width residual table, one line per check.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{} {:<58} residual {:.3e} tolerance {:.1e}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance
            ));
        }
        s
    }
}

struct Suite<'a> {
    cfg: &'a RunConfig,
    checks: Vec<CheckResult>,
}

impl Suite<'_> {
    fn push(&mut self, name: &str, residual: f64, default_tol: f64, detail: impl Into<String>) {
        let tolerance = self.cfg.tolerance.unwrap_or(default_tol);
        self.checks.push(CheckResult {
            name: name.into(),
            residual,
            tolerance,
            passed: residual.is_finite() && residual <= tolerance,
            detail: detail.into(),
        });
    }
}

fn diff(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    Ok(a.sub(b)?.max_abs())
}

/// Columns of `D(z)` whose mass inside the truncation is within `tol` of 1.
fn interior_columns(d: &DMatrix<Complex64>, tol: f64) -> Vec<usize> {
    (0..d.ncols()).filter(|&c| 1.0 - d.column(c).norm_squared() <= tol).collect()
}

/// Uniform point of the disk of radius `r`.
fn disk_point(rng: &mut ChaCha8Rng, r: f64) -> Complex64 {
    let u: f64 = rng.gen();
    let t: f64 = rng.gen();
    Complex64::from_polar(r * u.sqrt(), 2.0 * std::f64::consts::PI * t)
}

fn ladder_checks(s: &mut Suite, spec: &TruncationSpec) -> Result<()> {
    // ladder products are formed on a layout one level taller, then read on the truncation
    let inner = spec.layout();
    let big = Layout::new(1, spec.levels + 1, spec.degrees);
    let up = ladder_matrix(big, Ladder::Up);
    let down = ladder_matrix(big, Ladder::Down);
    let id = OperatorMatrix::identity(inner);
    let dd = down.matmul(&up)?.restrict(inner, inner)?;
    s.push("ladder: A A^dag = I", diff(&dd, &id)?, 1e-12, "");
    let ud = up.matmul(&down)?.restrict(inner, inner)?;
    let p1 = projection_matrix(inner, Domain::Level(1))?;
    s.push("ladder: A^dag A = I - P(1)", diff(&ud, &id.sub(&p1)?)?, 1e-12, "");
    let mut worst: f64 = 0.0;
    for k in 1..spec.levels {
        let pk = projection_matrix(big, Domain::Level(k))?;
        let lhs = up.matmul(&pk)?.matmul(&down)?.restrict(inner, inner)?;
        worst = worst.max(diff(&lhs, &projection_matrix(inner, Domain::Level(k + 1))?)?);
    }
    s.push("ladder: A^dag P(k) A = P(k+1)", worst, 1e-12, format!("k = 1..{}", spec.levels - 1));
    let a = ladder_matrix(big, Ladder::Lower);
    let ad = ladder_matrix(big, Ladder::Raise);
    let n = ladder_matrix(inner, Ladder::Number);
    s.push("ladder: N = a^dag a", diff(&ad.matmul(&a)?.restrict(inner, inner)?, &n)?, 1e-12, "");
    let comm = a.matmul(&ad)?.sub(&ad.matmul(&a)?)?.restrict(inner, inner)?;
    s.push("ladder: [a, a^dag] = I", diff(&comm, &id)?, 1e-12, "levels 1..K");
    Ok(())
}

fn basis_checks(s: &mut Suite) -> Result<()> {
    let l = Layout::new(1, 6, 24);
    let rule = default_rule(6, 24)?;
    let one = Symbol::constant(Complex64::new(1.0, 0.0));
    let g = symbol_matrix_generic(&one, l, l, &rule)?;
    s.push("basis: Gram matrix of 144 elements = I", diff(&g, &OperatorMatrix::identity(l))?, 1e-10, "");
    let pts = [Complex64::new(0.0, 0.0), Complex64::new(1.0, -2.0), Complex64::new(-2.5, 1.5), Complex64::new(2.0, 2.0)];
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        for &z in &pts {
            for &w in &pts {
                let lhs = kernel_eval_scaled(KernelKind::Order(n), z, w)?;
                let mut rhs = Complex64::new(0.0, 0.0);
                for k in 1..=n {
                    rhs += kernel_eval_scaled(KernelKind::Level(k), z, w)?;
                }
                worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1e-300));
            }
        }
    }
    s.push("kernel: K_n = sum of K_(k), n <= 8 (relative)", worst, 1e-10, "");
    Ok(())
}

fn weyl_checks(s: &mut Suite, spec: &TruncationSpec, rng: &mut ChaCha8Rng) -> Result<()> {
    let l = spec.layout();
    let jj = spec.degrees;
    let w0 = weyl_on_layout(Complex64::new(0.0, 0.0), l)?;
    s.push("weyl: W_0 = I", diff(&w0, &OperatorMatrix::identity(l))?, 0.0, "exact");
    let mut worst: f64 = 0.0;
    let mut used = usize::MAX;
    for _ in 0..4 {
        let z = disk_point(rng, 2.0);
        let d = displacement_block(z, jj, jj);
        let cols = interior_columns(&d, 1e-12);
        used = used.min(cols.len());
        let prod = displacement_block(-z, jj, jj) * &d;
        for &c in &cols {
            for &r in &cols {
                let e = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod[(r, c)] - e).norm());
            }
        }
    }
    s.push("weyl: W_-z W_z = I on interior columns, |z| <= 2", worst, 1e-7, format!("at least {used} interior columns"));
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let (z, w) = (disk_point(rng, 1.5), disk_point(rng, 1.5));
        let dz = displacement_block(z, jj, jj);
        let dw = displacement_block(w, jj, jj);
        let dzw = displacement_block(z + w, jj, jj);
        let phase = Complex64::from_polar(1.0, -(z * w.conj()).im);
        let lhs = &dz * &dw;
        let cols = interior_columns(&dw, 1e-16);
        let rows = interior_columns(&displacement_block(-z, jj, jj), 1e-16);
        for &c in &cols {
            for &r in &rows {
                worst = worst.max((lhs[(r, c)] - phase * dzw[(r, c)]).norm());
            }
        }
    }
    s.push("weyl: W_z W_w = exp(-i Im(z conj w)) W_(z+w), |z|,|w| <= 1.5", worst, 1e-7, "interior entries");
    let z = disk_point(rng, 2.0);
    let w = weyl_on_layout(z, l)?;
    let block = w.entries.view((0, 0), (jj, jj)).clone_owned();
    let mut defect: f64 = 0.0;
    for a in 0..spec.levels {
        for b in 0..spec.levels {
            let blk = w.entries.view((a * jj, b * jj), (jj, jj));
            let d = if a == b { (blk - &block).camax() } else { blk.camax() };
            defect = defect.max(d);
        }
    }
    s.push("weyl: block diagonal with identical blocks", defect, 0.0, "exact");
    let lv = spec.levels.min(2);
    let sub = TruncationSpec::new(lv, jj, 0, 0)?;
    let rule = default_rule(lv, jj)?;
    let f = library("monomial:1,1,16")?;
    let m = multiplication_matrix(&f, &sub, &rule)?;
    let inner = Layout::new(1, lv, jj * 3 / 8);
    let mut worst: f64 = 0.0;
    for _ in 0..2 {
        let z = disk_point(rng, 1.0);
        let conj = conjugate_by_weyl(&m, z)?.restrict(inner, inner)?;
        let shifted = multiplication_matrix(&f.shifted(z), &sub, &rule)?.restrict(inner, inner)?;
        worst = worst.max(diff(&conj, &shifted)?);
    }
    s.push("weyl: W_-z M_f W_z = M_f(.+z), f = |w|^2 clipped, |z| <= 1", worst, 1e-6, format!("first {} degrees", jj * 3 / 8));
    Ok(())
}

fn radial_checks(s: &mut Suite, spec: &TruncationSpec) -> Result<()> {
    let jj = spec.degrees;
    let sub = TruncationSpec::new(1, jj, 0, 0)?;
    let rule = default_rule(1, jj)?;
    let sorted_moduli = |t: &OperatorMatrix| -> Result<Vec<f64>> {
        let mut v: Vec<f64> = t.eigenvalues()?.iter().map(|e| e.norm()).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        Ok(v)
    };
    let count = 33.min(jj);
    let g = toeplitz_matrix(&library("gaussian:1")?, Domain::Level(1), &sub, &rule)?;
    let ev = sorted_moduli(&g)?;
    let worst = (0..count).map(|j| (ev[j] - 0.5f64.powi(j as i32 + 1)).abs()).fold(0.0, f64::max);
    s.push("radial: gaussian eigenvalues 2^-(j+1), j <= 32", worst, 1e-8, "");
    let p = toeplitz_matrix(&library("phase")?, Domain::Level(1), &sub, &rule)?;
    let ev = sorted_moduli(&p)?;
    let worst = (0..count).map(|j| (ev[j] - 0.5f64.powf((j as f64 + 1.0) / 2.0)).abs()).fold(0.0, f64::max);
    s.push("radial: phase |eigenvalues| 2^-(j+1)/2, j <= 32", worst, 1e-6, "");
    Ok(())
}

fn counterexample_checks(s: &mut Suite, spec: &TruncationSpec) -> Result<()> {
    let lv = spec.levels.max(2);
    let l = Layout::new(1, lv, spec.degrees);
    let t = projection_matrix(l, Domain::Level(1))?.sub(&projection_matrix(l, Domain::Level(2))?)?;
    let e = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]));
    let r = s.cfg.probe_radius;
    let mut std_worst: f64 = 0.0;
    let mut mat_worst: f64 = 0.0;
    for ring in 0..=4 {
        for m in 0..8 {
            let z = Complex64::from_polar(r * ring as f64 / 4.0, std::f64::consts::PI * m as f64 / 4.0);
            std_worst = std_worst.max(berezin_standard(&t, 2, z)?.norm());
            mat_worst = mat_worst.max((berezin_matrix(&t, 2, z)? - &e).camax());
        }
    }
    s.push("counterexample: standard transform of P(1) - P(2) vanishes", std_worst, 1e-8, format!("|z| <= {r}"));
    s.push("counterexample: matrix transform of P(1) - P(2) = diag(1, -1)", mat_worst, 1e-10, format!("|z| <= {r}"));
    s.push("counterexample: norm of P(1) - P(2) = 1", (t.norm() - 1.0).abs(), 1e-12, "");
    Ok(())
}

fn covariance_check(s: &mut Suite, spec: &TruncationSpec, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = spec.levels.min(3);
    let sub = TruncationSpec::new(n, spec.degrees, 0, 0)?;
    let rule = default_rule(n, spec.degrees)?;
    let t = toeplitz_matrix(&library("gaussian:0.2")?, Domain::FirstN(n), &sub, &rule)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (z, zeta) = (disk_point(rng, 1.5), disk_point(rng, 1.5));
        let lhs = berezin_matrix(&conjugate_by_weyl(&t, zeta)?, n, z)?;
        let rhs = berezin_matrix(&t, n, z + zeta)?;
        worst = worst.max(spectral_norm(&(lhs - rhs)));
    }
    s.push("shift covariance: B_n(W_-zeta T W_zeta)(z) = B_n(T)(z + zeta)", worst, 1e-6, format!("20 pairs, n = {n}"));
    Ok(())
}

fn hankel_check(s: &mut Suite, spec: &TruncationSpec) -> Result<()> {
    // wide margins keep the discarded rows below the tolerance
    let wide = TruncationSpec::new(1, spec.degrees, 40, 40)?;
    let m = wide.margined_layout();
    let rule = default_rule(m.levels, m.degrees)?;
    let l1 = Layout::new(1, 1, wide.degrees);
    let l1m = Layout::new(1, 1, wide.degrees + wide.margin_degrees);
    let f = library("gaussian:0.5")?;
    let h = hankel_matrix(&f, Domain::Level(1), &wide, &rule)?;
    let hh = h.matrix.entries.adjoint() * &h.matrix.entries;
    let tsq = symbol_matrix(&f.abs_squared(), l1, l1, &rule)?;
    let tfb = symbol_matrix(&f.conj(), l1, l1m, &rule)?;
    let tf = symbol_matrix(&f, l1m, l1, &rule)?;
    let res = spectral_norm(&(hh - (&tsq.entries - &tfb.entries * &tf.entries)));
    let leak: f64 = h.leaks.iter().map(|v| v.max(0.0)).sum();
    s.push(
        "hankel: H*H = T_|f|^2 - T_conj(f) T_f on F(1)",
        res,
        1e-6,
        format!("gaussian:0.5, margins 40/40, total leak {leak:.3e}"),
    );
    Ok(())
}

fn transfer_check(s: &mut Suite, spec: &TruncationSpec, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = spec.levels.min(3);
    let sub = TruncationSpec::new(n, spec.degrees, 0, 0)?;
    let rule = default_rule(n, spec.degrees)?;
    let pairs = [(1, 2), (2, 1), (n, 1), (2, n)];
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for text in ["gaussian:0.5", "phase", "monomial:2,1,3"] {
        let f = library(text)?;
        let tn = toeplitz_matrix(&f, Domain::FirstN(n), &sub, &rule)?;
        let t1 = toeplitz_matrix(&f, Domain::Level(1), &sub, &rule)?;
        for &(j, k) in &pairs {
            let z = disk_point(rng, 1.5);
            worst = worst.max(transfer_pair(&tn, &t1, z, j, k)?.difference);
            cases += 1;
        }
    }
    s.push(
        "transfer: <T_(f,n) l_(z,j), l_(z,k)> = <T_(f,1) W_z m_k, W_z m_j>",
        worst,
        1e-6,
        format!("{cases} cases, n = {n}"),
    );
    Ok(())
}

/// Runs every identity check; deterministic for a given configuration.
pub fn run_suite(cfg: &RunConfig) -> Result<VerifyReport> {
    cfg.validate_for_verify()?;
    let spec = cfg.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = Suite { cfg, checks: Vec::new() };
    ladder_checks(&mut s, &spec)?;
    basis_checks(&mut s)?;
    weyl_checks(&mut s, &spec, &mut rng)?;
    radial_checks(&mut s, &spec)?;
    counterexample_checks(&mut s, &spec)?;
    covariance_check(&mut s, &spec, &mut rng)?;
    hankel_check(&mut s, &spec)?;
    transfer_check(&mut s, &spec, &mut rng)?;
    let passed = s.checks.iter().all(|c| c.passed);
    Ok(VerifyReport { schema: REPORT_SCHEMA.into(), kind: "verify".into(), config: cfg.clone(), checks: s.checks, passed })
}
