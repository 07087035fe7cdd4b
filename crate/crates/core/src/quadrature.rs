//! Integration against the Gaussian probability measure `dμ = π⁻¹ e^{-|z|²} dz`.
//!
//! A rule is a tensor product of Gauss–Laguerre nodes in `t = |z|²` and
//! uniform angles. With `R` radial nodes and `M` angles it integrates
//! `z^a z̄^b` exactly whenever `a + b ≤ 2R − 1` and `|a − b| < M`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::laguerre_pair;

/// Largest radial node count; beyond it the smallest weights underflow.
pub const MAX_RADIAL_COUNT: usize = 170;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub radial_nodes: Vec<f64>,
    pub radial_weights: Vec<f64>,
    /// `ln w_i`, kept so that products with huge basis values stay finite.
    pub log_weights: Vec<f64>,
    pub angular_count: usize,
    pub max_exact_degree: usize,
}

impl QuadratureRule {
    pub fn radial_count(&self) -> usize {
        self.radial_nodes.len()
    }

    /// Angle of the `m`-th uniform node.
    pub fn angle(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.angular_count as f64
    }

    /// Whether `z^a z̄^b` is integrated exactly.
    pub fn is_exact_for(&self, a: usize, b: usize) -> bool {
        a + b <= self.max_exact_degree && a.abs_diff(b) < self.angular_count
    }

    /// Rule with twice the radial and angular counts.
    pub fn doubled(&self) -> Result<QuadratureRule> {
        build_rule(
            (2 * self.radial_count()).min(MAX_RADIAL_COUNT),
            2 * self.angular_count,
        )
    }
}

/// Zeros of `L_n^α`, ascending. Golub–Welsch eigenvalues refined by Newton steps.
pub fn laguerre_roots(n: usize, alpha: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(alpha > -1.0) {
        return Err(Error::Domain(format!("Laguerre roots need alpha > -1, got {alpha}")));
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let fi = i as f64;
        jacobi[(i, i)] = 2.0 * fi + 1.0 + alpha;
        if i + 1 < n {
            let off = ((fi + 1.0) * (fi + 1.0 + alpha)).sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
    }
    let mut roots: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    roots.sort_by(|a, b| a.total_cmp(b));

    let nf = n as f64;
    for (i, root) in roots.iter_mut().enumerate() {
        let mut x = *root;
        let mut last_step = f64::INFINITY;
        for _ in 0..20 {
            let (ln, lnm1) = laguerre_pair(n, alpha, x);
            let deriv = (nf * ln - (nf + alpha) * lnm1) / x;
            let step = ln / deriv;
            if !step.is_finite() {
                break;
            }
            x -= step;
            last_step = step.abs();
            if last_step <= 4.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        // rounding in L_n near its zero limits the attainable step size
        if !(last_step <= 1e-11 * x.abs()) || !x.is_finite() || x <= 0.0 {
            return Err(Error::Numeric(format!(
                "Newton refinement of Laguerre root {i} of L_{n}^{alpha} did not converge (last iterate {x})"
            )));
        }
        *root = x;
    }
    for w in roots.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Numeric(format!(
                "Laguerre roots of degree {n} not strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
    }
    Ok(roots)
}

/// Gauss–Laguerre in `t` combined with `angular_count` uniform angles.
pub fn build_rule(radial_count: usize, angular_count: usize) -> Result<QuadratureRule> {
    if radial_count == 0 || angular_count == 0 {
        return Err(Error::Domain(format!(
            "quadrature counts must be positive, got radial {radial_count}, angular {angular_count}"
        )));
    }
    if radial_count > MAX_RADIAL_COUNT {
        return Err(Error::Capability(format!(
            "radial_count {radial_count} exceeds {MAX_RADIAL_COUNT}; smallest weights would underflow"
        )));
    }
    let nodes = laguerre_roots(radial_count, 0.0)?;
    let n = radial_count as f64;
    let mut log_weights = Vec::with_capacity(radial_count);
    let mut weights = Vec::with_capacity(radial_count);
    for &t in &nodes {
        let (_, lnm1) = laguerre_pair(radial_count, 0.0, t);
        // w = t / (n L_{n-1}(t))²
        let lw = t.ln() - 2.0 * n.ln() - 2.0 * lnm1.abs().ln();
        let w = lw.exp();
        if !(w > f64::MIN_POSITIVE) || !lw.is_finite() {
            return Err(Error::Numeric(format!(
                "Gauss-Laguerre weight at node {t} underflows for radial_count {radial_count}"
            )));
        }
        log_weights.push(lw);
        weights.push(w);
    }
    // recurrence rounding leaves the mass off by ~1e-13 at large n; the rule is
    // rescaled to integrate constants exactly
    let mass: f64 = weights.iter().sum();
    let log_mass = mass.ln();
    for (w, lw) in weights.iter_mut().zip(log_weights.iter_mut()) {
        *w /= mass;
        *lw -= log_mass;
    }
    Ok(QuadratureRule {
        radial_nodes: nodes,
        radial_weights: weights,
        log_weights,
        angular_count,
        max_exact_degree: 2 * radial_count - 1,
    })
}

/// Rule sized for Gram integrands of a `levels × degrees` block of the basis.
pub fn default_rule(levels: usize, degrees: usize) -> Result<QuadratureRule> {
    build_rule(levels + degrees + 8, 2 * (levels + degrees) + 9)
}

/// `Σ_i w_i (1/M) Σ_m g(√t_i e^{iθ_m})`, summed in a fixed order.
pub fn integrate<G>(rule: &QuadratureRule, g: G) -> Result<Complex64>
where
    G: Fn(Complex64) -> Complex64,
{
    let m_count = rule.angular_count;
    let mut total = Complex64::new(0.0, 0.0);
    for (i, (&t, &w)) in rule.radial_nodes.iter().zip(&rule.radial_weights).enumerate() {
        let r = t.sqrt();
        let mut ring = Complex64::new(0.0, 0.0);
        for m in 0..m_count {
            let z = Complex64::from_polar(r, rule.angle(m));
            let v = g(z);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric(format!(
                    "integrand is not finite at node (ring {i}, angle {m}) z = {z}"
                )));
            }
            ring += v;
        }
        total += ring * (w / m_count as f64);
    }
    Ok(total)
}

/// Integral against `dν = (2π)⁻¹ e^{-|z|²/2} dz`, via `z = √2 u`.
pub fn integrate_nu<G>(rule: &QuadratureRule, g: G) -> Result<Complex64>
where
    G: Fn(Complex64) -> Complex64,
{
    let s = std::f64::consts::SQRT_2;
    integrate(rule, |u| g(u * s))
}

/// Discrete angular Fourier coefficients on every ring:
/// `out[i][n] = (1/M) Σ_m g(√t_i e^{iθ_m}) e^{-inθ_m}` for `n` in `0..M` (read modulo `M`).
pub fn ring_fourier<G>(rule: &QuadratureRule, g: G) -> Result<Vec<Vec<Complex64>>>
where
    G: Fn(Complex64) -> Complex64,
{
    let m_count = rule.angular_count;
    let twiddle: Vec<Complex64> = (0..m_count)
        .map(|p| Complex64::from_polar(1.0, -rule.angle(p)))
        .collect();
    let mut out = Vec::with_capacity(rule.radial_count());
    for (i, &t) in rule.radial_nodes.iter().enumerate() {
        let r = t.sqrt();
        let mut samples = Vec::with_capacity(m_count);
        for m in 0..m_count {
            let z = Complex64::from_polar(r, rule.angle(m));
            let v = g(z);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric(format!(
                    "integrand is not finite at node (ring {i}, angle {m}) z = {z}"
                )));
            }
            samples.push(v);
        }
        let inv = 1.0 / m_count as f64;
        let coeffs = (0..m_count)
            .map(|n| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, v) in samples.iter().enumerate() {
                    acc += v * twiddle[(n * m) % m_count];
                }
                acc * inv
            })
            .collect();
        out.push(coeffs);
    }
    Ok(out)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pnm1) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre on `[a, b]`; panels double until two successive
/// estimates agree to `rel_tol` (relative to `scale` or the value itself).
#[derive(Debug, Clone)]
pub struct CompositeLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    pub initial_panels: usize,
    pub max_panels: usize,
    pub rel_tol: f64,
}

impl Default for CompositeLegendre {
    fn default() -> Self {
        let (nodes, weights) = gauss_legendre(20);
        Self { nodes, weights, initial_panels: 8, max_panels: 1 << 13, rel_tol: 1e-13 }
    }
}

impl CompositeLegendre {
    fn fixed<G>(&self, a: f64, b: f64, panels: usize, g: &G) -> Complex64
    where
        G: Fn(f64) -> Complex64,
    {
        let h = (b - a) / panels as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += g(mid + 0.5 * h * x) * *w;
            }
            total += acc * (0.5 * h);
        }
        total
    }

    /// Integral of `g` over `[a, b]`. `scale` is a floor for the convergence test.
    pub fn integrate<G>(&self, a: f64, b: f64, scale: f64, g: G) -> Result<Complex64>
    where
        G: Fn(f64) -> Complex64,
    {
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
        }
        if a == b {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut panels = self.initial_panels;
        let mut prev = self.fixed(a, b, panels, &g);
        while panels < self.max_panels {
            panels *= 2;
            let cur = self.fixed(a, b, panels, &g);
            if !(cur.re.is_finite() && cur.im.is_finite()) {
                return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
            }
            if (cur - prev).norm() <= self.rel_tol * cur.norm().max(scale) {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::Accuracy(format!(
            "composite Gauss-Legendre on [{a}, {b}] did not settle with {panels} panels"
        )))
    }
}

/// Evaluates an integral on a rule and on its doubled rule and insists they agree.
#[derive(Debug, Clone)]
pub struct CheckedIntegrator {
    pub base: QuadratureRule,
    pub doubled: QuadratureRule,
    pub tolerance: f64,
}

impl CheckedIntegrator {
    pub fn new(base: QuadratureRule, tolerance: f64) -> Result<Self> {
        let doubled = base.doubled()?;
        Ok(Self { base, doubled, tolerance })
    }

    /// Default for shifted-Gaussian integrands of bounded symbols.
    pub fn standard() -> Result<Self> {
        Self::new(build_rule(64, 96)?, 1e-8)
    }

    /// Returns the doubled-rule value; errors when the two rules disagree.
    pub fn integrate<G>(&self, g: G) -> Result<Complex64>
    where
        G: Fn(Complex64) -> Complex64,
    {
        let coarse = integrate(&self.base, &g)?;
        let fine = integrate(&self.doubled, &g)?;
        let diff = (fine - coarse).norm();
        if diff > self.tolerance * fine.norm().max(1.0) {
            return Err(Error::Accuracy(format!(
                "quadrature doubling changed the value by {diff:.3e} (tolerance {:.1e})",
                self.tolerance
            )));
        }
        Ok(fine)
    }
}

/// Curves where an integrand may fail to be smooth: circles `|w| = r` and the
/// lines `Re w = x`, `Im w = y`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Kinks {
    pub circles: Vec<f64>,
    pub lines_re: Vec<f64>,
    pub lines_im: Vec<f64>,
}

impl Kinks {
    pub fn is_empty(&self) -> bool {
        self.circles.is_empty() && self.lines_re.is_empty() && self.lines_im.is_empty()
    }
}

/// Vector-valued composite Gauss–Legendre with panel doubling.
fn adaptive_vec<G>(cl: &CompositeLegendre, a: f64, b: f64, dim: usize, g: &G) -> Result<Vec<Complex64>>
where
    G: Fn(f64, &mut [Complex64]) -> Result<()>,
{
    let zero = Complex64::new(0.0, 0.0);
    if b <= a {
        return Ok(vec![zero; dim]);
    }
    let mut buf = vec![zero; dim];
    let fixed = |panels: usize, buf: &mut [Complex64]| -> Result<Vec<Complex64>> {
        let h = (b - a) / panels as f64;
        let mut total = vec![zero; dim];
        for p in 0..panels {
            let mid = a + h * (p as f64 + 0.5);
            for (x, w) in cl.nodes.iter().zip(&cl.weights) {
                buf.iter_mut().for_each(|v| *v = zero);
                g(mid + 0.5 * h * x, buf)?;
                let s = 0.5 * h * w;
                for (t, v) in total.iter_mut().zip(buf.iter()) {
                    *t += v * s;
                }
            }
        }
        Ok(total)
    };
    let mut panels = cl.initial_panels.max(1);
    let mut prev = fixed(panels, &mut buf)?;
    while panels < cl.max_panels {
        panels *= 2;
        let cur = fixed(panels, &mut buf)?;
        let size = cur.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !size.is_finite() {
            return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
        }
        let diff = cur.iter().zip(&prev).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        if diff <= cl.rel_tol * size.max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Accuracy(format!("plane quadrature on [{a}, {b}] did not settle with {panels} panels")))
}

/// Sorted cut points of `[lo, hi]`, including both ends.
fn cut_points(lo: f64, hi: f64, inner: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    let tiny = 1e-12 * (hi - lo).abs().max(1e-300);
    pts.extend(inner.into_iter().filter(|&x| x > lo + tiny && x < hi - tiny));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    pts
}

/// Angles in `[lo, hi]` congruent to `phi` modulo `2π`.
fn wrap_into(phi: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let tau = 2.0 * PI;
    let mut x = phi + tau * ((lo - phi) / tau).ceil();
    while x <= hi {
        out.push(x);
        x += tau;
    }
}

/// `∫ f(w) h(w − z) dA(w) / π` over the disk `|w − z| ≤ reach`, in polar
/// coordinates about the origin so that circle kinks become panel edges.
///
/// `h` writes a smooth weight vector, which must be negligible outside the disk.
#[derive(Debug, Clone)]
pub struct PlaneIntegrator {
    pub radial: CompositeLegendre,
    pub angular: CompositeLegendre,
}

impl Default for PlaneIntegrator {
    fn default() -> Self {
        let cl = CompositeLegendre { initial_panels: 2, max_panels: 1 << 12, rel_tol: 1e-12, ..Default::default() };
        Self { radial: cl.clone(), angular: cl }
    }
}

impl PlaneIntegrator {
    pub fn integrate_vec<F, H>(&self, z: Complex64, reach: f64, kinks: &Kinks, dim: usize, f: F, h: H) -> Result<Vec<Complex64>>
    where
        F: Fn(Complex64) -> Complex64,
        H: Fn(Complex64, &mut [Complex64]),
    {
        if !(reach > 0.0 && reach.is_finite() && z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain(format!("invalid plane integral centre {z} or reach {reach}")));
        }
        let rz = z.norm();
        let theta = z.arg();
        let lo = (rz - reach).max(0.0);
        let hi = rz + reach;
        let mut rho_cuts: Vec<f64> = kinks.circles.clone();
        rho_cuts.extend(kinks.lines_re.iter().chain(&kinks.lines_im).map(|v| v.abs()));
        rho_cuts.push(reach - rz);
        let rho_pts = cut_points(lo, hi, rho_cuts);
        let mut hbuf = vec![Complex64::new(0.0, 0.0); dim];
        let hbuf = std::cell::RefCell::new(&mut hbuf);
        let inner = |rho: f64, out: &mut [Complex64]| -> Result<()> {
            if rho == 0.0 {
                return Ok(());
            }
            // angles where |ρ e^{iφ} − z| ≤ reach
            let (alo, ahi) = if rz == 0.0 || rho <= reach - rz {
                (theta - PI, theta + PI)
            } else {
                let c = ((rho * rho + rz * rz - reach * reach) / (2.0 * rho * rz)).clamp(-1.0, 1.0);
                let half = c.acos();
                (theta - half, theta + half)
            };
            let mut cuts = Vec::new();
            for &y in &kinks.lines_im {
                if y.abs() < rho {
                    let s = (y / rho).asin();
                    wrap_into(s, alo, ahi, &mut cuts);
                    wrap_into(PI - s, alo, ahi, &mut cuts);
                }
            }
            for &x in &kinks.lines_re {
                if x.abs() < rho {
                    let c = (x / rho).acos();
                    wrap_into(c, alo, ahi, &mut cuts);
                    wrap_into(-c, alo, ahi, &mut cuts);
                }
            }
            let pts = cut_points(alo, ahi, cuts);
            for w in pts.windows(2) {
                let part = adaptive_vec(&self.angular, w[0], w[1], dim, &|phi: f64, acc: &mut [Complex64]| {
                    let pt = Complex64::from_polar(rho, phi);
                    let fv = f(pt) * (rho / PI);
                    let mut hb = hbuf.borrow_mut();
                    hb.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                    h(pt - z, &mut hb);
                    for (a, v) in acc.iter_mut().zip(hb.iter()) {
                        *a += fv * v;
                    }
                    Ok(())
                })?;
                for (o, p) in out.iter_mut().zip(part) {
                    *o += p;
                }
            }
            Ok(())
        };
        let mut total = vec![Complex64::new(0.0, 0.0); dim];
        // a line at distance y cuts circles of radius ρ along an arc with a √(ρ − |y|) edge;
        // the smoothstep substitution ρ = a + (b − a)(3s² − 2s³) removes it at both ends
        let graded = !(kinks.lines_re.is_empty() && kinks.lines_im.is_empty());
        for w in rho_pts.windows(2) {
            let (a, len) = (w[0], w[1] - w[0]);
            let part = if graded {
                adaptive_vec(&self.radial, 0.0, 1.0, dim, &|s: f64, out: &mut [Complex64]| {
                    let jac = len * 6.0 * s * (1.0 - s);
                    if jac == 0.0 {
                        return Ok(());
                    }
                    inner(a + len * s * s * (3.0 - 2.0 * s), out)?;
                    out.iter_mut().for_each(|v| *v *= jac);
                    Ok(())
                })?
            } else {
                adaptive_vec(&self.radial, a, w[1], dim, &inner)?
            };
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        Ok(total)
    }

    /// Scalar form of [`PlaneIntegrator::integrate_vec`].
    pub fn integrate<F, H>(&self, z: Complex64, reach: f64, kinks: &Kinks, f: F, h: H) -> Result<Complex64>
    where
        F: Fn(Complex64) -> Complex64,
        H: Fn(Complex64) -> Complex64,
    {
        Ok(self.integrate_vec(z, reach, kinks, 1, f, |u, out| out[0] = h(u))?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::ln_factorial;
    use proptest::prelude::*;

    fn mono(a: i32, b: i32) -> impl Fn(Complex64) -> Complex64 {
        move |z: Complex64| z.powi(a) * z.conj().powi(b)
    }

    #[test]
    fn spot_moments() {
        let rule = build_rule(8, 16).unwrap();
        let one = integrate(&rule, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!((one - 1.0).norm() < 1e-13);
        let r2 = integrate(&rule, |z| Complex64::new(z.norm_sqr(), 0.0)).unwrap();
        assert!((r2 - 1.0).norm() < 1e-12);
        assert!(integrate(&rule, mono(2, 1)).unwrap().norm() < 1e-12);
        assert!((integrate(&rule, mono(3, 3)).unwrap() - 6.0).norm() < 1e-11);
    }

    #[test]
    fn oscillatory_radial_moment() {
        // ∫₀^∞ e^{it} e^{-t} dt = 1/(1-i)
        let rule = build_rule(32, 4).unwrap();
        let v = integrate(&rule, |z| Complex64::from_polar(1.0, z.norm_sqr())).unwrap();
        assert!((v - Complex64::new(0.5, 0.5)).norm() < 1e-8);
    }

    #[test]
    fn normalized_monomials() {
        let rule = build_rule(20, 4).unwrap();
        for j in 0..20 {
            let v = integrate(&rule, |z| {
                Complex64::new((j as f64 * z.norm_sqr().ln() - ln_factorial(j)).exp(), 0.0)
            })
            .unwrap();
            assert!((v - 1.0).norm() < 1e-10, "j={j}: {v}");
        }
    }

    #[test]
    fn weights_and_nodes() {
        for r in [1usize, 2, 5, 33, 78, 150, MAX_RADIAL_COUNT] {
            let rule = build_rule(r, 3).unwrap();
            let s: f64 = rule.radial_weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-13, "r={r}: sum {s}");
            assert!(rule.radial_weights.iter().all(|&w| w > 0.0));
            assert!(rule.radial_nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn counts_validated() {
        assert!(matches!(build_rule(0, 4), Err(Error::Domain(_))));
        assert!(matches!(build_rule(4, 0), Err(Error::Domain(_))));
        assert!(matches!(build_rule(MAX_RADIAL_COUNT + 1, 4), Err(Error::Capability(_))));
    }

    #[test]
    fn non_finite_integrand_reported() {
        let rule = build_rule(4, 4).unwrap();
        let err = integrate(&rule, |z| if z.re > 1.0 { Complex64::new(f64::NAN, 0.0) } else { z }).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn exactness_table() {
        let (r, m) = (10usize, 7usize);
        let rule = build_rule(r, m).unwrap();
        for a in 0..2 * r {
            for b in 0..2 * r - a {
                if a.abs_diff(b) >= m {
                    continue;
                }
                let v = integrate(&rule, mono(a as i32, b as i32)).unwrap();
                let fact = ln_factorial(a).exp();
                let expected = if a == b { fact } else { 0.0 };
                assert!((v - expected).norm() <= 1e-10 * fact, "a={a} b={b}: {v}");
            }
        }
    }

    #[test]
    fn nu_measure_mass() {
        // ν has total mass 1 and ∫|z|² dν = 2
        let rule = build_rule(6, 4).unwrap();
        assert!((integrate_nu(&rule, |_| Complex64::new(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-13);
        let v = integrate_nu(&rule, |z| Complex64::new(z.norm_sqr(), 0.0)).unwrap();
        assert!((v - 2.0).norm() < 1e-12);
    }

    #[test]
    fn fourier_coefficients_of_monomial_ring() {
        let rule = build_rule(3, 9).unwrap();
        let f = ring_fourier(&rule, |z| z * z).unwrap();
        for (i, ring) in f.iter().enumerate() {
            let t = rule.radial_nodes[i];
            assert!((ring[2] - t).norm() < 1e-12);
            assert!(ring[0].norm() < 1e-12 && ring[1].norm() < 1e-12);
        }
    }

    #[test]
    fn legendre_exactness() {
        for n in [1usize, 2, 7, 20] {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let e = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                assert!((v - e).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn composite_handles_oscillation() {
        let cl = CompositeLegendre::default();
        let v = cl.integrate(0.0, 40.0, 1.0, |t| Complex64::from_polar((-t).exp(), t)).unwrap();
        assert!((v - Complex64::new(0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn checked_integrator_flags_rough_integrands() {
        let ci = CheckedIntegrator::new(build_rule(6, 8).unwrap(), 1e-8).unwrap();
        assert!(ci.integrate(|z| z * z.conj()).is_ok());
        let err = ci.integrate(|z| Complex64::from_polar(1.0, 20.0 * z.norm_sqr()));
        assert!(matches!(err, Err(Error::Accuracy(_))));
    }

    proptest! {
        #[test]
        fn linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.1f64..2.0) {
            let rule = build_rule(12, 10).unwrap();
            let f = |z: Complex64| Complex64::new((-c * z.norm_sqr()).exp(), 0.0);
            let g = |z: Complex64| z * z.conj() * z;
            let lhs = integrate(&rule, |z| f(z) * a + g(z) * b).unwrap();
            let rhs = integrate(&rule, f).unwrap() * a + integrate(&rule, g).unwrap() * b;
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn constant_integrand(re in -5.0f64..5.0, im in -5.0f64..5.0, r in 1usize..40, m in 1usize..20) {
            let rule = build_rule(r, m).unwrap();
            let c = Complex64::new(re, im);
            prop_assert!((integrate(&rule, |_| c).unwrap() - c).norm() < 1e-12 * (1.0 + c.norm()));
        }
    }

    fn gauss_weight(u: Complex64) -> Complex64 {
        Complex64::new((-u.norm_sqr()).exp(), 0.0)
    }

    #[test]
    fn plane_integrator_strip_matches_one_dimensional_integral() {
        let p = PlaneIntegrator::default();
        let h = 0.5;
        let kinks = Kinks { lines_im: vec![-h, h], ..Kinks::default() };
        let strip = |w: Complex64| Complex64::new(if w.im.abs() <= h { 1.0 } else { 0.0 }, 0.0);
        for z in [Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.3), Complex64::new(-1.0, 1.7)] {
            let v = p.integrate(z, 9.0, &kinks, strip, gauss_weight).unwrap();
            let e = CompositeLegendre::default()
                .integrate(-h - z.im, h - z.im, 1.0, |y| Complex64::new((-y * y).exp() / PI.sqrt(), 0.0))
                .unwrap();
            assert!((v - e).norm() < 1e-11, "{z}: {v} vs {e}");
        }
    }

    #[test]
    fn plane_integrator_clipped_circle() {
        // ∫ min(|w|², c²) dμ(w) = 1 − e^{−c²}
        let p = PlaneIntegrator::default();
        let c = 1.3f64;
        let kinks = Kinks { circles: vec![c], ..Kinks::default() };
        let f = |w: Complex64| Complex64::new(w.norm_sqr().min(c * c), 0.0);
        let v = p.integrate(Complex64::new(0.0, 0.0), 9.0, &kinks, f, gauss_weight).unwrap();
        assert!((v - (1.0 - (-c * c).exp())).norm() < 1e-12, "{v}");
        let ones = p.integrate(Complex64::new(3.0, -4.0), 9.0, &Kinks::default(), |_| Complex64::new(1.0, 0.0), gauss_weight).unwrap();
        assert!((ones - 1.0).norm() < 1e-12);
    }

    #[test]
    fn plane_integrator_vector_output() {
        let p = PlaneIntegrator::default();
        let z = Complex64::new(0.4, 0.2);
        let v = p
            .integrate_vec(z, 9.0, &Kinks::default(), 3, |_| Complex64::new(1.0, 0.0), |u, out| {
                let g = (-u.norm_sqr()).exp();
                out[0] = Complex64::new(g, 0.0);
                out[1] = u * g;
                out[2] = Complex64::new(u.norm_sqr() * g, 0.0);
            })
            .unwrap();
        assert!((v[0] - 1.0).norm() < 1e-12 && v[1].norm() < 1e-12 && (v[2] - 1.0).norm() < 1e-12);
    }
}
