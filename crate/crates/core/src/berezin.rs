//! Scalar, matrix and standard Berezin transforms, and the heat transform.
//!
//! For an operator `T` on a truncated layout:
//! - `B_(k)(T)(z) = ⟨T l_{z,k}, l_{z,k}⟩`,
//! - `B_n(T)(z)[k][j] = ⟨T l_{z,j}, l_{z,k}⟩` for `j, k ≤ n`,
//! - `B̃_n(T)(z) = ⟨T k_{z,n}, k_{z,n}⟩` with the normalized kernel of `F²_n`.
//!
//! The heat transform `f̃(z) = ∫ f(u + z) dμ(u)` and its level analogues
//! `∫ f(u + z) |u|^{2(k−1)}/(k−1)! dμ(u)` are computed from the symbol, never
//! from a truncated matrix, so they stay valid beyond the coherent tail gate.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::basis::{check_gate, coherent_coefficient, scaled_basis_value, Layout};
use crate::error::{Error, Result};
use crate::operators::{OperatorMatrix, RadialMoments};
use crate::quadrature::{CheckedIntegrator, PlaneIntegrator};
use crate::specfun::ln_factorial;
use crate::symbol::Symbol;

fn require_square(t: &OperatorMatrix) -> Result<Layout> {
    if !t.is_square() {
        return Err(Error::Domain(format!("Berezin transforms need a square operator, {} is not", t.label)));
    }
    Ok(t.rows)
}

fn require_levels(layout: &Layout, lo: usize, hi: usize) -> Result<()> {
    if lo < layout.first_level || hi > layout.last_level() {
        return Err(Error::Domain(format!(
            "levels {lo}..={hi} are not all inside {:?}",
            layout
        )));
    }
    Ok(())
}

/// `l_{z,k}` on a layout that contains level `k`.
fn level_coherent(layout: &Layout, k: usize, z: Complex64) -> DVector<Complex64> {
    let mut v = DVector::zeros(layout.dim());
    for j in 0..layout.degrees {
        v[layout.index(k, j).unwrap()] = coherent_coefficient(z, j);
    }
    v
}

/// `T l_{z,k}` for `k = 1..=n`, as columns.
fn images(t: &OperatorMatrix, n: usize, z: Complex64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let layout = require_square(t)?;
    require_levels(&layout, 1, n)?;
    check_gate(layout.degrees, z)?;
    let mut l = DMatrix::zeros(layout.dim(), n);
    for k in 1..=n {
        l.set_column(k - 1, &level_coherent(&layout, k, z));
    }
    let tl = &t.entries * &l;
    Ok((l, tl))
}

/// `⟨T l_{z,k}, l_{z,k}⟩`.
pub fn berezin_scalar(t: &OperatorMatrix, level: usize, z: Complex64) -> Result<Complex64> {
    let layout = require_square(t)?;
    require_levels(&layout, level, level)?;
    check_gate(layout.degrees, z)?;
    let l = level_coherent(&layout, level, z);
    Ok(l.dotc(&(&t.entries * &l)))
}

/// The `n×n` matrix with entry `[k−1][j−1] = ⟨T l_{z,j}, l_{z,k}⟩`.
pub fn berezin_matrix(t: &OperatorMatrix, n: usize, z: Complex64) -> Result<DMatrix<Complex64>> {
    if n == 0 {
        return Err(Error::Domain("the matrix Berezin transform needs n >= 1".into()));
    }
    let (l, tl) = images(t, n, z)?;
    Ok(l.adjoint() * tl)
}

/// `k_{z,n}`: coefficients `conj(e_{k,j}(z)) e^{−|z|²/2}/√n` for `k ≤ n`.
fn normalized_kernel(layout: &Layout, n: usize, z: Complex64) -> DVector<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    let mut v = DVector::zeros(layout.dim());
    for k in 1..=n {
        for j in 0..layout.degrees {
            v[layout.index(k, j).unwrap()] = scaled_basis_value(k, j, z).conj() * s;
        }
    }
    v
}

/// `⟨T k_{z,n}, k_{z,n}⟩`.
pub fn berezin_standard(t: &OperatorMatrix, n: usize, z: Complex64) -> Result<Complex64> {
    let layout = require_square(t)?;
    if n == 0 {
        return Err(Error::Domain("the standard Berezin transform needs n >= 1".into()));
    }
    require_levels(&layout, 1, n)?;
    check_gate(layout.degrees, z)?;
    let k = normalized_kernel(&layout, n, z);
    Ok(k.dotc(&(&t.entries * &k)))
}

/// Heat transforms of one symbol, on every level.
///
/// Radial symbols use the moment expansion `Σ_j Poisson_{|z|²}(j) λ_j^{(k)}`.
/// Other symbols are integrated in the plane with panel edges on their kink curves.
pub struct HeatTransform {
    symbol: Symbol,
    route: HeatRoute,
}

enum HeatRoute {
    Moments(RadialMoments),
    Plane(PlaneIntegrator),
    Product(CheckedIntegrator),
}

/// Past this distance the level weight `|u|^{2(k−1)} e^{−|u|²}/(k−1)!` is below `e^{−60}`.
fn heat_reach(k: usize) -> f64 {
    ((k - 1) as f64).sqrt() + 9.0
}

/// `|u|^{2(k−1)}/(k−1)! · e^{−damping·|u|²}`.
fn level_weight(k: usize, lf: f64, u: Complex64, damping: f64) -> f64 {
    let t = u.norm_sqr();
    if k == 1 {
        (-damping * t).exp()
    } else if t == 0.0 {
        0.0
    } else {
        ((k - 1) as f64 * t.ln() - lf - damping * t).exp()
    }
}

impl HeatTransform {
    pub fn new(f: &Symbol) -> Result<Self> {
        let route = if f.is_radial() {
            HeatRoute::Moments(RadialMoments::new(f)?)
        } else {
            HeatRoute::Plane(PlaneIntegrator::default())
        };
        Ok(Self { symbol: f.clone(), route })
    }

    /// Integrates `f(u + z)` on a product Gauss rule and its doubling, for any symbol.
    pub fn by_quadrature(f: &Symbol, integrator: CheckedIntegrator) -> Self {
        Self { symbol: f.clone(), route: HeatRoute::Product(integrator) }
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    /// `∫ f(u + z) |u|^{2(k−1)}/(k−1)! dμ(u)`.
    pub fn level(&self, k: usize, z: Complex64) -> Result<Complex64> {
        if k == 0 {
            return Err(Error::Domain("levels start at 1".into()));
        }
        let lf = ln_factorial(k - 1);
        let f = &self.symbol;
        match &self.route {
            HeatRoute::Moments(m) => m.heat_level(k, z),
            HeatRoute::Plane(p) => {
                p.integrate(z, heat_reach(k), f.kinks(), |w| f.eval(w), |u| Complex64::new(level_weight(k, lf, u, 1.0), 0.0))
            }
            HeatRoute::Product(q) => q.integrate(|u| f.eval(u + z) * level_weight(k, lf, u, 0.0)),
        }
    }

    /// `f̃(z)`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.level(1, z)
    }
}

/// `f̃(z) = ∫ f(w) |k_z(w)|² dμ(w)`.
pub fn heat_transform(f: &Symbol, z: Complex64) -> Result<Complex64> {
    HeatTransform::new(f)?.eval(z)
}

/// Level-`k` heat transform, equal to `B_(k)(T_{f,(k)})(z)`.
pub fn heat_level(f: &Symbol, k: usize, z: Complex64) -> Result<Complex64> {
    HeatTransform::new(f)?.level(k, z)
}

/// Which transform a field samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "index", rename_all = "kebab-case")]
pub enum BerezinMode {
    /// `B_(k)` on level `k`.
    Scalar(usize),
    /// `B_n`.
    Matrix(usize),
    /// `B̃_n`.
    Standard(usize),
    /// `f̃`; needs a symbol source.
    Heat,
}

impl BerezinMode {
    pub fn parse(text: &str) -> Result<Self> {
        let (name, idx) = match text.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (text, None),
        };
        let index = || -> Result<usize> {
            let s = idx.ok_or_else(|| Error::Config(format!("mode '{name}' needs an index, e.g. {name}:1")))?;
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::Config(format!("mode index '{s}' is not a positive integer")))
        };
        match name {
            "scalar" => Ok(Self::Scalar(index()?)),
            "matrix" => Ok(Self::Matrix(index()?)),
            "standard" => Ok(Self::Standard(index()?)),
            "heat" => Ok(Self::Heat),
            _ => Err(Error::Config(format!("unknown Berezin mode '{name}' (scalar|matrix|standard|heat)"))),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Self::Matrix(n) => *n,
            _ => 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Scalar(k) => format!("scalar:{k}"),
            Self::Matrix(n) => format!("matrix:{n}"),
            Self::Standard(n) => format!("standard:{n}"),
            Self::Heat => "heat".into(),
        }
    }
}

/// What a field is sampled from.
pub enum FieldSource<'a> {
    Operator(&'a OperatorMatrix),
    Symbol(&'a HeatTransform),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerezinMeta {
    pub source: String,
    pub mode: BerezinMode,
    /// Layout of the source operator; absent for heat fields.
    pub layout: Option<Layout>,
}

/// A sampled transform: one `n×n` value per point (`n = 1` for scalar modes).
#[derive(Debug, Clone, PartialEq)]
pub struct BerezinSample {
    pub points: Vec<Complex64>,
    pub values: Vec<DMatrix<Complex64>>,
    pub n: usize,
    pub meta: BerezinMeta,
}

impl BerezinSample {
    /// Largest spectral norm over the sampled values.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(crate::operators::spectral_norm).fold(0.0, f64::max)
    }

    /// Rows `re_z,im_z,k,j,re_value,im_value`, indices 1-based, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re_z,im_z,k,j,re_value,im_value")?;
        for (z, v) in self.points.iter().zip(&self.values) {
            for k in 0..self.n {
                for j in 0..self.n {
                    let e = v[(k, j)];
                    writeln!(out, "{:.16e},{:.16e},{},{},{:.16e},{:.16e}", z.re, z.im, k + 1, j + 1, e.re, e.im)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let samples: Vec<Value> = self
            .points
            .iter()
            .zip(&self.values)
            .map(|(z, v)| {
                let rows: Vec<Value> = (0..self.n)
                    .map(|k| Value::Array((0..self.n).map(|j| json!([v[(k, j)].re, v[(k, j)].im])).collect()))
                    .collect();
                json!({ "z": [z.re, z.im], "value": rows })
            })
            .collect();
        json!({ "n": self.n, "meta": self.meta, "samples": samples })
    }
}

/// Points on concentric circles, radius-major, angles `2πm/angles`.
pub fn circle_grid(radii: &[f64], angles: usize) -> Vec<Complex64> {
    radii
        .iter()
        .flat_map(|&r| {
            (0..angles).map(move |m| Complex64::from_polar(r, 2.0 * std::f64::consts::PI * m as f64 / angles as f64))
        })
        .collect()
}

/// Evaluates a transform over a grid, in parallel, in grid order.
pub fn berezin_field(source: FieldSource<'_>, grid: &[Complex64], mode: BerezinMode) -> Result<BerezinSample> {
    let n = mode.size();
    let (label, layout) = match &source {
        FieldSource::Operator(t) => (t.label.clone(), Some(t.rows)),
        FieldSource::Symbol(h) => (h.symbol().label().to_string(), None),
    };
    let point = |z: Complex64| -> Result<DMatrix<Complex64>> {
        match (&source, mode) {
            (FieldSource::Operator(t), BerezinMode::Scalar(k)) => Ok(DMatrix::from_element(1, 1, berezin_scalar(t, k, z)?)),
            (FieldSource::Operator(t), BerezinMode::Matrix(m)) => berezin_matrix(t, m, z),
            (FieldSource::Operator(t), BerezinMode::Standard(m)) => {
                Ok(DMatrix::from_element(1, 1, berezin_standard(t, m, z)?))
            }
            (FieldSource::Symbol(h), BerezinMode::Heat) => Ok(DMatrix::from_element(1, 1, h.eval(z)?)),
            (FieldSource::Symbol(h), BerezinMode::Scalar(k)) => Ok(DMatrix::from_element(1, 1, h.level(k, z)?)),
            (FieldSource::Operator(_), BerezinMode::Heat) => {
                Err(Error::Config("heat mode needs a symbol, not an operator".into()))
            }
            (FieldSource::Symbol(_), m) => Err(Error::Config(format!("mode {} needs an operator", m.label()))),
        }
    };
    let values: Vec<Result<DMatrix<Complex64>>> = grid.par_iter().map(|&z| point(z)).collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BerezinSample { points: grid.to_vec(), values, n, meta: BerezinMeta { source: label, mode, layout } })
}

/// Value at `z` of the matrix-valued function sampled by `mode`, for probes that need it pointwise.
pub fn berezin_at(t: &OperatorMatrix, mode: BerezinMode, z: Complex64) -> Result<DMatrix<Complex64>> {
    match mode {
        BerezinMode::Scalar(k) => Ok(DMatrix::from_element(1, 1, berezin_scalar(t, k, z)?)),
        BerezinMode::Matrix(n) => berezin_matrix(t, n, z),
        BerezinMode::Standard(n) => Ok(DMatrix::from_element(1, 1, berezin_standard(t, n, z)?)),
        BerezinMode::Heat => Err(Error::Config("heat mode needs a symbol, not an operator".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Domain, TruncationSpec};
    use crate::operators::{conjugate_by_weyl, hankel_matrix, projection_matrix, toeplitz_matrix};
    use crate::quadrature::default_rule;
    use crate::symbol::library;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn integ() -> CheckedIntegrator {
        CheckedIntegrator::standard().unwrap()
    }

    fn counterexample(spec: &TruncationSpec) -> OperatorMatrix {
        let l = spec.layout();
        projection_matrix(l, Domain::Level(1))
            .unwrap()
            .sub(&projection_matrix(l, Domain::Level(2)).unwrap())
            .unwrap()
            .with_label("P1 - P2")
    }

    #[test]
    fn identity_transforms() {
        let spec = TruncationSpec::new(3, 64, 0, 0).unwrap();
        let id = OperatorMatrix::identity(spec.layout());
        let z = c(1.5, -2.0);
        assert!((berezin_scalar(&id, 2, z).unwrap() - 1.0).norm() < 1e-12);
        let b = berezin_matrix(&id, 3, z).unwrap();
        assert!((b - DMatrix::identity(3, 3)).iter().all(|v| v.norm() < 1e-12));
        assert!((berezin_standard(&id, 3, z).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn projection_on_own_level() {
        let spec = TruncationSpec::new(3, 64, 0, 0).unwrap();
        let p = projection_matrix(spec.layout(), Domain::Level(2)).unwrap();
        assert!((berezin_scalar(&p, 2, c(2.0, 1.0)).unwrap() - 1.0).norm() < 1e-12);
        assert!(berezin_scalar(&p, 1, c(2.0, 1.0)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn toeplitz_modulus_squared_at_two() {
        let spec = TruncationSpec::new(1, 64, 0, 0).unwrap();
        let rule = default_rule(1, 64).unwrap();
        let t = toeplitz_matrix(&library("monomial:1,1").unwrap(), Domain::Level(1), &spec, &rule).unwrap();
        assert!((berezin_scalar(&t, 1, c(2.0, 0.0)).unwrap() - 5.0).norm() < 1e-6);
    }

    #[test]
    fn counterexample_disagreement() {
        let spec = TruncationSpec::new(3, 64, 0, 0).unwrap();
        let t = counterexample(&spec);
        for &z in &[c(0.0, 0.0), c(1.0, 1.0), c(-2.5, 1.2), c(0.0, 3.0)] {
            assert!(berezin_standard(&t, 2, z).unwrap().norm() < 1e-8, "{z}");
            let b = berezin_matrix(&t, 2, z).unwrap();
            let e = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
            assert!((b - e).iter().all(|v| v.norm() < 1e-10));
        }
        assert!((t.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flip_operator_standard_transform() {
        let layout = Layout::new(1, 1, 64);
        let mut flip = OperatorMatrix::zeros(layout, layout, "flip");
        for j in 0..64 {
            flip.entries[(j, j)] = c(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
        }
        for r in [0.0, 0.5, 1.0, 2.0] {
            let z = Complex64::from_polar(r, 0.7);
            let v = berezin_standard(&flip, 1, z).unwrap();
            assert!((v - (-2.0 * r * r).exp()).norm() < 1e-12);
        }
    }

    #[test]
    fn gate_is_enforced() {
        let spec = TruncationSpec::new(2, 16, 0, 0).unwrap();
        let id = OperatorMatrix::identity(spec.layout());
        assert!(matches!(berezin_scalar(&id, 1, c(3.0, 0.0)), Err(Error::Range(_))));
        assert!(matches!(berezin_matrix(&id, 3, c(0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn heat_examples() {
        let i = integ();
        let k = c(0.3, -0.2);
        let cst = Symbol::constant(k);
        assert!((heat_transform(&cst, c(4.0, 1.0)).unwrap() - k).norm() < 1e-14);
        let sq = library("monomial:1,1").unwrap();
        for z in [c(0.0, 0.0), c(1.0, 2.0), c(3.0, -1.0)] {
            let v = heat_transform(&sq, z).unwrap();
            assert!((v - (z.norm_sqr() + 1.0)).norm() < 1e-9, "{z}: {v}");
            let q = HeatTransform::by_quadrature(&sq, i.clone()).eval(z).unwrap();
            assert!((q - (z.norm_sqr() + 1.0)).norm() < 1e-9);
        }
        let ph = library("phase").unwrap();
        for r in [0.0, 1.0, 3.0, 8.0] {
            let z = Complex64::from_polar(r, 1.1);
            let v = heat_transform(&ph, z).unwrap();
            // ∫ e^{i|u+z|²} dμ(u) = e^{i|z|²/(1−i)}/(1−i)
            let one_minus_i = c(1.0, -1.0);
            let e = (c(0.0, 1.0) * r * r / one_minus_i).exp() / one_minus_i;
            assert!((v - e).norm() < 1e-12, "r={r}");
            assert!((v.norm() - 0.5f64.sqrt() * (-0.5 * r * r).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_radial_routes_agree() {
        let i = integ();
        for text in ["gaussian:0.3", "phase", "radial-table:0,1;1,0.5;2,-1"] {
            let f = library(text).unwrap();
            let h = HeatTransform::new(&f).unwrap();
            let q = HeatTransform::by_quadrature(&f, i.clone());
            for k in 1..=3 {
                for z in [c(0.4, 0.3), c(-1.0, 1.2)] {
                    let a = h.level(k, z).unwrap();
                    match q.level(k, z) {
                        Ok(b) => assert!((a - b).norm() < 1e-7, "{text} k={k} z={z}: {a} vs {b}"),
                        // the piecewise-linear table has kinks the shifted rule does not resolve
                        Err(Error::Accuracy(_)) => assert!(text.starts_with("radial-table")),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn level_heat_is_level_berezin_of_toeplitz() {
        let spec = TruncationSpec::new(3, 64, 0, 0).unwrap();
        let rule = default_rule(3, 64).unwrap();
        let f = library("monomial:1,0").unwrap();
        let h = HeatTransform::new(&f).unwrap();
        for k in 1..=3 {
            let t = toeplitz_matrix(&f, Domain::Level(k), &spec, &rule).unwrap();
            let z = c(0.7, -1.1);
            let a = berezin_scalar(&t, k, z).unwrap();
            let b = h.level(k, z).unwrap();
            assert!((a - b).norm() < 1e-8, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn shift_covariance() {
        let spec = TruncationSpec::new(3, 64, 0, 0).unwrap();
        let rule = default_rule(3, 64).unwrap();
        let t = toeplitz_matrix(&library("gaussian:0.2").unwrap(), Domain::FirstN(3), &spec, &rule).unwrap();
        let z = c(0.8, -0.6);
        let zeta = c(-0.9, 1.1);
        let lhs = berezin_matrix(&conjugate_by_weyl(&t, zeta).unwrap(), 3, z).unwrap();
        let rhs = berezin_matrix(&t, 3, z + zeta).unwrap();
        assert!(crate::operators::spectral_norm(&(lhs - rhs)) < 1e-6);
    }

    #[test]
    fn sandwich_bound() {
        let spec = TruncationSpec::new(1, 64, 4, 8).unwrap();
        let m = spec.margined_layout();
        let rule = default_rule(m.levels, m.degrees).unwrap();
        for text in ["gaussian:0.5", "radial-table:0,1;3,-1"] {
            let f = library(text).unwrap();
            let h = hankel_matrix(&f, Domain::Level(1), &spec, &rule).unwrap();
            let hh = h.matrix.adjoint().matmul(&h.matrix).unwrap();
            let ht = HeatTransform::new(&f).unwrap();
            let hsq = HeatTransform::new(&f.abs_squared()).unwrap();
            for z in [c(0.0, 0.0), c(1.0, 0.5), c(-2.0, 1.0)] {
                let b = berezin_scalar(&hh, 1, z).unwrap();
                let gap = hsq.eval(z).unwrap().re - ht.eval(z).unwrap().norm_sqr();
                assert!(b.im.abs() < 1e-10 && b.re >= -1e-12, "{text} {z}: {b}");
                assert!(b.re <= gap + 1e-6, "{text} {z}: {b} vs {gap}");
            }
        }
    }

    #[test]
    fn field_ordering_and_csv() {
        let spec = TruncationSpec::new(2, 48, 0, 0).unwrap();
        let t = counterexample(&spec);
        let grid = circle_grid(&[1.0, 2.0], 4);
        assert_eq!(grid.len(), 8);
        assert!((grid[5] - c(0.0, 2.0)).norm() < 1e-15);
        let s = berezin_field(FieldSource::Operator(&t), &grid, BerezinMode::Matrix(2)).unwrap();
        assert_eq!(s.values.len(), 8);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8 * 4);
        assert!(text.lines().nth(1).unwrap().starts_with("1.0000000000000000e0,0.0000000000000000e0,1,1,"));
        let j = s.to_json();
        assert_eq!(j["samples"].as_array().unwrap().len(), 8);
        assert!(matches!(
            berezin_field(FieldSource::Operator(&t), &grid, BerezinMode::Heat),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn phase_toeplitz_field_decays() {
        let spec = TruncationSpec::new(1, 64, 0, 0).unwrap();
        let rule = default_rule(1, 64).unwrap();
        let t = toeplitz_matrix(&library("phase").unwrap(), Domain::Level(1), &spec, &rule).unwrap();
        let mut last = f64::INFINITY;
        for r in 1..=5 {
            let s = berezin_field(FieldSource::Operator(&t), &circle_grid(&[r as f64], 16), BerezinMode::Scalar(1)).unwrap();
            let m = s.max_norm();
            assert!(m < last, "r={r}");
            last = m;
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(BerezinMode::parse("matrix:3").unwrap(), BerezinMode::Matrix(3));
        assert_eq!(BerezinMode::parse("heat").unwrap(), BerezinMode::Heat);
        assert!(BerezinMode::parse("scalar").is_err());
        assert!(BerezinMode::parse("scalar:0").is_err());
        assert!(BerezinMode::parse("bogus:1").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn adjoint_symmetry_and_boundedness(re in -1.5f64..1.5, im in -1.5f64..1.5, s in 0.05f64..1.0, a in 0usize..3, b in 0usize..3) {
            let spec = TruncationSpec::new(3, 48, 0, 0).unwrap();
            let rule = default_rule(3, 48).unwrap();
            let f = library(&format!("monomial:{a},{b},2")).unwrap();
            let g = library(&format!("gaussian:{s}")).unwrap();
            let t = toeplitz_matrix(&f, Domain::FirstN(3), &spec, &rule).unwrap()
                .add(&toeplitz_matrix(&g, Domain::FirstN(3), &spec, &rule).unwrap()).unwrap();
            let z = c(re, im);
            let bt = berezin_matrix(&t.adjoint(), 3, z).unwrap();
            let b = berezin_matrix(&t, 3, z).unwrap();
            prop_assert!((bt - b.adjoint()).iter().all(|v| v.norm() < 1e-10));
            prop_assert!(crate::operators::spectral_norm(&b) <= t.norm() + 1e-8);
        }
    }

    #[test]
    fn heat_is_stable_under_panel_doubling_for_library_symbols() {
        let texts = ["constant:0.5,0.5", "monomial:2,1,3", "monomial:1,1,2", "gaussian:0.7", "phase", "angular", "heaviside-strip:0.5", "radial-table:0,1;1,0.5;2,-1"];
        let mut fine = PlaneIntegrator::default();
        fine.radial.initial_panels = 6;
        fine.angular.initial_panels = 6;
        for text in texts {
            let f = library(text).unwrap();
            let h = HeatTransform::new(&f).unwrap();
            let q = HeatTransform { symbol: f.clone(), route: HeatRoute::Plane(fine.clone()) };
            for k in 1..=2 {
                for z in [c(0.0, 0.0), c(0.9, -0.4), c(-2.5, 1.5)] {
                    let a = h.level(k, z).unwrap();
                    let b = q.level(k, z).unwrap();
                    assert!((a - b).norm() <= 1e-8, "{text} k={k} z={z}: {a} vs {b}");
                }
            }
        }
    }
}
