//! Radial symbols far from the origin.
//!
//! For `f(z) = g(|z|²)` the multiplication operator only couples `e_{k,j}` to
//! `e_{k',j+k'−k}`, with moments
//! `μ(k',k,j) = ∫₀^∞ g(t) ρ_{k,j}(t) ρ_{k',j+k'−k}(t) e^{−t} dt`.
//! Conjugating by `W_z` then only needs the displacement block columns on the
//! degrees where they carry mass, so displaced windows are computed at radii
//! far beyond what a truncated quadrature rule can resolve.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{radial_log_profile, scaled_basis_value};
use crate::error::{Error, Result};
use crate::quadrature::CompositeLegendre;
use crate::specfun::ln_poisson;
use crate::symbol::{RadialProfile, Symbol};

/// Integration half-width in `s = √t` around the oscillatory region.
const S_MARGIN: f64 = 8.0;

/// `μ(k_row, k_col, j) = ⟨g e_{k_col,j}, e_{k_row,j+k_row−k_col}⟩`, zero when that degree is negative.
pub fn radial_moment(
    g: &RadialProfile,
    breaks: &[f64],
    k_row: usize,
    k_col: usize,
    j: usize,
    quad: &CompositeLegendre,
) -> Result<Complex64> {
    if k_row == 0 || k_col == 0 {
        return Err(Error::Domain("levels start at 1".into()));
    }
    let Some(j_row) = (j + k_row).checked_sub(k_col) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let reach = ((k_row.max(k_col) - 1) as f64).sqrt();
    let lo = ((j.min(j_row) as f64).sqrt() - reach - S_MARGIN).max(0.0);
    let hi = (j.max(j_row) as f64).sqrt() + reach + S_MARGIN;
    let integrand = |s: f64| {
        let t = s * s;
        let (s1, l1) = radial_log_profile(k_col, j, t);
        let (s2, l2) = radial_log_profile(k_row, j_row, t);
        if s1 == 0.0 || s2 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let w = s1 * s2 * 2.0 * s * (l1 + l2 - t).exp();
        if w == 0.0 { Complex64::new(0.0, 0.0) } else { g(t) * w }
    };
    let mut cuts = vec![lo];
    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    let mut total = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        total += quad.integrate(w[0], w[1], 1.0, integrand)?;
    }
    Ok(total)
}

/// Moment table of one radial symbol, filled on demand.
pub struct RadialMoments {
    g: RadialProfile,
    breaks: Vec<f64>,
    quad: CompositeLegendre,
    cache: Mutex<HashMap<(usize, usize, usize), Complex64>>,
}

impl std::fmt::Debug for RadialMoments {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialMoments").field("breaks", &self.breaks).finish()
    }
}

impl RadialMoments {
    pub fn new(f: &Symbol) -> Result<Self> {
        let g = f
            .radial_profile()
            .ok_or_else(|| Error::Domain(format!("symbol '{}' is not radial", f.label())))?
            .clone();
        Ok(Self { g, breaks: f.breaks().to_vec(), quad: CompositeLegendre::default(), cache: Mutex::new(HashMap::new()) })
    }

    pub fn moment(&self, k_row: usize, k_col: usize, j: usize) -> Result<Complex64> {
        if let Some(v) = self.cache.lock().unwrap().get(&(k_row, k_col, j)) {
            return Ok(*v);
        }
        let v = radial_moment(&self.g, &self.breaks, k_row, k_col, j, &self.quad)?;
        self.cache.lock().unwrap().insert((k_row, k_col, j), v);
        Ok(v)
    }

    /// Fills the cache for many keys in parallel.
    fn prefetch(&self, keys: &[(usize, usize, usize)]) -> Result<()> {
        let missing: Vec<_> = {
            let cache = self.cache.lock().unwrap();
            keys.iter().copied().filter(|k| !cache.contains_key(k)).collect()
        };
        let values: Vec<Result<Complex64>> = missing
            .par_iter()
            .map(|&(a, b, j)| radial_moment(&self.g, &self.breaks, a, b, j, &self.quad))
            .collect();
        let mut cache = self.cache.lock().unwrap();
        for (key, v) in missing.into_iter().zip(values) {
            cache.insert(key, v?);
        }
        Ok(())
    }

    /// Eigenvalues `λ_j = μ(k,k,j)`, `j < count`, of the Toeplitz operator on level `k`.
    pub fn eigenvalues(&self, level: usize, count: usize) -> Result<Vec<Complex64>> {
        let keys: Vec<_> = (0..count).map(|j| (level, level, j)).collect();
        self.prefetch(&keys)?;
        keys.iter().map(|&(a, b, j)| self.moment(a, b, j)).collect()
    }

    /// `Σ_j Poisson_{|z|²}(j) λ_j`: the Berezin transform on level `k` at `z`.
    pub fn heat_level(&self, level: usize, z: Complex64) -> Result<Complex64> {
        let x = z.norm_sqr();
        let (lo, hi) = poisson_window(x);
        let keys: Vec<_> = (lo..=hi).map(|j| (level, level, j)).collect();
        self.prefetch(&keys)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in lo..=hi {
            acc += self.moment(level, level, j)? * ln_poisson(j, x).exp();
        }
        Ok(acc)
    }

    /// `W_{−z} T W_z` on the first `window` degrees of each level in `levels`,
    /// where `T` is the compression of `M_f` to those levels. Rows and columns are level-major.
    pub fn snapshot(&self, z: Complex64, levels: &[usize], window: usize) -> Result<DMatrix<Complex64>> {
        let top = levels.iter().copied().max().unwrap_or(1);
        let cols = displaced_columns(z, window, top);
        let keys: Vec<_> = levels
            .iter()
            .flat_map(|&kr| levels.iter().map(move |&kc| (kr, kc)))
            .flat_map(|(kr, kc)| cols.active.iter().map(move |&j| (kr, kc, j)))
            .filter(|&(kr, kc, j)| j + kr >= kc)
            .collect();
        self.prefetch(&keys)?;
        let n = levels.len() * window;
        let mut out = DMatrix::zeros(n, n);
        for (li, &kr) in levels.iter().enumerate() {
            for (lj, &kc) in levels.iter().enumerate() {
                for &j in &cols.active {
                    let Some(jr) = (j + kr).checked_sub(kc) else { continue };
                    let mu = self.moment(kr, kc, j)?;
                    for b in 0..window {
                        let db = cols.value(j, b) * mu;
                        if db == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for a in 0..window {
                            out[(li * window + a, lj * window + b)] += db * cols.value(jr, a).conj();
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `W_{−z} H*H W_z` on the first `window` degrees of level `k`, with
    /// `H = (I − P_k) M_f P_k`: `D* diag(λ_j(|g|²) − |λ_j(g)|²) D`.
    pub fn hankel_gram(&self, abs_sq: &RadialMoments, level: usize, z: Complex64, window: usize) -> Result<DMatrix<Complex64>> {
        let cols = displaced_columns(z, window, level);
        let keys: Vec<_> = cols.active.iter().map(|&j| (level, level, j)).collect();
        self.prefetch(&keys)?;
        abs_sq.prefetch(&keys)?;
        let mut out = DMatrix::zeros(window, window);
        for &j in &cols.active {
            let lam = self.moment(level, level, j)?;
            let d = abs_sq.moment(level, level, j)?.re - lam.norm_sqr();
            for b in 0..window {
                let vb = cols.value(j, b) * d;
                for a in 0..window {
                    out[(a, b)] += cols.value(j, a).conj() * vb;
                }
            }
        }
        Ok(out)
    }
}

fn poisson_window(x: f64) -> (usize, usize) {
    let s = x.sqrt();
    let lo = (x - 12.0 * s - 20.0).max(0.0).floor() as usize;
    let hi = (x + 12.0 * s + 40.0).ceil() as usize;
    (lo, hi)
}

/// `λ_j^{(k)}` for `j < count`.
pub fn radial_eigenvalues(f: &Symbol, level: usize, count: usize) -> Result<Vec<Complex64>> {
    RadialMoments::new(f)?.eigenvalues(level, count)
}

/// Level-`k` Berezin transform of a radial symbol at `z`.
pub fn radial_heat_level(f: &Symbol, level: usize, z: Complex64) -> Result<Complex64> {
    RadialMoments::new(f)?.heat_level(level, z)
}

/// Columns `0..window` of `D(z)`, kept on the degrees where they carry mass.
#[derive(Debug, Clone)]
pub struct DisplacedColumns {
    pub z: Complex64,
    pub window: usize,
    /// First stored degree.
    pub j_lo: usize,
    /// Rows `j_lo..j_lo + nrows`, columns `0..window`.
    pub values: DMatrix<Complex64>,
    /// Degrees where some column has modulus above `1e−18`.
    pub active: Vec<usize>,
}

impl DisplacedColumns {
    /// `D(z)[j, b]`, zero outside the stored rows.
    pub fn value(&self, j: usize, b: usize) -> Complex64 {
        if j < self.j_lo || j >= self.j_lo + self.values.nrows() {
            return Complex64::new(0.0, 0.0);
        }
        self.values[(j - self.j_lo, b)]
    }
}

/// `reach_levels` widens the stored band so level shifts up to that many stay inside.
pub fn displaced_columns(z: Complex64, window: usize, reach_levels: usize) -> DisplacedColumns {
    let x = z.norm_sqr();
    let spread = ((window + reach_levels) as f64).sqrt();
    let lo = (x.sqrt() - spread - 9.0).max(0.0);
    let hi = x.sqrt() + spread + 9.0;
    let j_lo = (lo * lo).floor() as usize;
    let j_hi = (hi * hi).ceil() as usize + reach_levels;
    let j_lo = j_lo.saturating_sub(reach_levels);
    let values = DMatrix::from_fn(j_hi - j_lo, window, |r, b| {
        let v = scaled_basis_value(b + 1, j_lo + r, z).conj();
        if b % 2 == 0 { v } else { -v }
    });
    let active = (0..values.nrows())
        .filter(|&r| values.row(r).iter().any(|v| v.norm() > 1e-18))
        .map(|r| r + j_lo)
        .collect();
    DisplacedColumns { z, window, j_lo, values, active }
}
