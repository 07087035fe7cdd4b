//! Bounded symbols `f ∈ L^∞(ℂ)` and the built-in symbol library.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Kinks;

pub type Evaluator = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;
/// Radial profile `g(t)` with `f(z) = g(|z|²)`.
pub type RadialProfile = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub struct Symbol {
    eval: Evaluator,
    radial: Option<RadialProfile>,
    bound: f64,
    descriptor: Option<SymbolDescriptor>,
    /// Curves where the symbol has a kink or a jump.
    kinks: Kinks,
    label: String,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("bound", &self.bound)
            .field("radial", &self.radial.is_some())
            .finish()
    }
}

impl Symbol {
    pub fn new<F>(label: impl Into<String>, bound: f64, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f), radial: None, bound, descriptor: None, kinks: Kinks::default(), label: label.into() }
    }

    pub fn radial<G>(label: impl Into<String>, bound: f64, g: G) -> Self
    where
        G: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        let g: RadialProfile = Arc::new(g);
        let g2 = g.clone();
        Self {
            eval: Arc::new(move |z: Complex64| g2(z.norm_sqr())),
            radial: Some(g),
            bound,
            descriptor: None,
            kinks: Kinks::default(),
            label: label.into(),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::radial(format!("constant {c}"), c.norm(), move |_| c)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.eval)(z)
    }

    pub fn radial_profile(&self) -> Option<&RadialProfile> {
        self.radial.as_ref()
    }

    pub fn is_radial(&self) -> bool {
        self.radial.is_some()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn descriptor(&self) -> Option<&SymbolDescriptor> {
        self.descriptor.as_ref()
    }

    /// Radii of the circles where the symbol is not smooth.
    pub fn breaks(&self) -> &[f64] {
        &self.kinks.circles
    }

    pub fn kinks(&self) -> &Kinks {
        &self.kinks
    }

    /// Declares radii where the symbol is not smooth.
    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.kinks.circles = breaks;
        self
    }

    pub fn with_kinks(mut self, kinks: Kinks) -> Self {
        self.kinks = kinks;
        self
    }

    /// Value at `z`, failing when it is not finite or exceeds the declared bound.
    pub fn checked_eval(&self, z: Complex64) -> Result<Complex64> {
        let v = self.eval(z);
        if !(v.re.is_finite() && v.im.is_finite()) || v.norm() > self.bound * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Domain(format!(
                "symbol '{}' gives |f({z})| = {} above its bound {}",
                self.label,
                v.norm(),
                self.bound
            )));
        }
        Ok(v)
    }

    /// `w ↦ f(w + z)`.
    pub fn shifted(&self, z: Complex64) -> Symbol {
        if z == Complex64::new(0.0, 0.0) {
            return self.clone();
        }
        let e = self.eval.clone();
        Symbol {
            eval: Arc::new(move |w| e(w + z)),
            radial: None,
            bound: self.bound,
            descriptor: None,
            kinks: Kinks::default(),
            label: format!("{}(. + {z})", self.label),
        }
    }

    /// `|f|²`.
    pub fn abs_squared(&self) -> Symbol {
        let e = self.eval.clone();
        let label = format!("|{}|^2", self.label);
        let bound = self.bound * self.bound;
        match &self.radial {
            Some(g) => {
                let g = g.clone();
                Symbol::radial(label, bound, move |t| Complex64::new(g(t).norm_sqr(), 0.0))
                    .with_kinks(self.kinks.clone())
            }
            None => Symbol::new(label, bound, move |w| Complex64::new(e(w).norm_sqr(), 0.0)).with_kinks(self.kinks.clone()),
        }
    }

    /// `f̄`.
    pub fn conj(&self) -> Symbol {
        let e = self.eval.clone();
        let label = format!("conj({})", self.label);
        match &self.radial {
            Some(g) => {
                let g = g.clone();
                Symbol::radial(label, self.bound, move |t| g(t).conj()).with_kinks(self.kinks.clone())
            }
            None => Symbol::new(label, self.bound, move |w| e(w).conj()).with_kinks(self.kinks.clone()),
        }
    }

    pub fn from_descriptor(desc: &SymbolDescriptor) -> Result<Symbol> {
        let mut s = desc.spec.build()?;
        s.kinks = match &desc.spec {
            SymbolSpec::Monomial { clip, .. } => Kinks { circles: vec![*clip], ..Kinks::default() },
            SymbolSpec::RadialTable { points } => {
                Kinks { circles: points.iter().map(|p| p.0).filter(|&r| r > 0.0).collect(), ..Kinks::default() }
            }
            SymbolSpec::Angular => Kinks { circles: vec![1.0], ..Kinks::default() },
            SymbolSpec::HeavisideStrip { half_width } => {
                Kinks { lines_im: vec![-half_width, *half_width], ..Kinks::default() }
            }
            SymbolSpec::UserGrid { grid, .. } => grid.kinks(),
            _ => Kinks::default(),
        };
        s.descriptor = Some(desc.clone());
        Ok(s)
    }
}

/// Advisory class membership flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SymbolFlags {
    pub radial: bool,
    pub vo: bool,
    pub vmo: bool,
}

/// Sampled symbol on a rectangular grid; values row-major in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridData {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl GridData {
    pub fn validate(&self) -> Result<()> {
        let n = self.nx * self.ny;
        if self.nx < 2 || self.ny < 2 || self.re.len() != n || self.im.len() != n {
            return Err(Error::Format(format!(
                "grid needs nx, ny >= 2 and {n} values, got nx={}, ny={}, re {}, im {}",
                self.nx,
                self.ny,
                self.re.len(),
                self.im.len()
            )));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::Format("grid extents must be increasing".into()));
        }
        if self.re.iter().chain(&self.im).any(|v| !v.is_finite()) {
            return Err(Error::Format("grid values must be finite".into()));
        }
        Ok(())
    }

    pub fn value(&self, ix: usize, iy: usize) -> Complex64 {
        let i = iy * self.nx + ix;
        Complex64::new(self.re[i], self.im[i])
    }

    /// Bilinear interpolation; points outside the grid take the nearest boundary value.
    pub fn interpolate(&self, z: Complex64) -> Complex64 {
        let locate = |v: f64, lo: f64, hi: f64, n: usize| -> (usize, f64) {
            let s = ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        };
        let (ix, fx) = locate(z.re, self.x_min, self.x_max, self.nx);
        let (iy, fy) = locate(z.im, self.y_min, self.y_max, self.ny);
        let v00 = self.value(ix, iy);
        let v10 = self.value(ix + 1, iy);
        let v01 = self.value(ix, iy + 1);
        let v11 = self.value(ix + 1, iy + 1);
        v00 * ((1.0 - fx) * (1.0 - fy)) + v10 * (fx * (1.0 - fy)) + v01 * ((1.0 - fx) * fy) + v11 * (fx * fy)
    }

    /// Grid lines, where the bilinear interpolant has kinks.
    pub fn kinks(&self) -> Kinks {
        let line = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        Kinks {
            circles: Vec::new(),
            lines_re: line(self.x_min, self.x_max, self.nx),
            lines_im: line(self.y_min, self.y_max, self.ny),
        }
    }

    pub fn max_modulus(&self) -> f64 {
        (0..self.re.len()).map(|i| Complex64::new(self.re[i], self.im[i]).norm()).fold(0.0, f64::max)
    }
}

/// Library symbol with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum SymbolSpec {
    Constant { re: f64, im: f64 },
    /// `z^a z̄^b` for `|z| ≤ clip`, continued radially by its value on `|z| = clip`.
    Monomial { a: u32, b: u32, clip: f64 },
    /// Piecewise-linear in `r = |z|` through `(r, value)`; constant beyond the ends.
    RadialTable { points: Vec<(f64, f64)> },
    /// `e^{−s|z|²}`.
    Gaussian { s: f64 },
    /// `e^{i|z|²}`.
    Phase,
    /// `z / max(1, |z|)`.
    Angular,
    /// Indicator of `|Im z| ≤ half_width`.
    HeavisideStrip { half_width: f64 },
    /// Bilinear interpolation of a sampled grid.
    UserGrid { path: String, grid: GridData },
}

/// Default clipping radius of monomial symbols.
pub const DEFAULT_MONOMIAL_CLIP: f64 = 16.0;

impl SymbolSpec {
    /// Parses `TAG[:params]`, e.g. `gaussian:1`, `monomial:1,0,12`, `radial-table:0,1;2,0`.
    pub fn parse(text: &str) -> Result<SymbolSpec> {
        let (tag, params) = match text.split_once(':') {
            Some((t, p)) => (t.trim(), p.trim()),
            None => (text.trim(), ""),
        };
        let nums = |p: &str| -> Result<Vec<f64>> {
            if p.is_empty() {
                return Ok(Vec::new());
            }
            p.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number '{s}' in '{text}': {e}"))))
                .collect()
        };
        let spec = match tag {
            "constant" => {
                let v = nums(params)?;
                match v.as_slice() {
                    [re] => SymbolSpec::Constant { re: *re, im: 0.0 },
                    [re, im] => SymbolSpec::Constant { re: *re, im: *im },
                    _ => return Err(Error::Config(format!("constant expects 1 or 2 numbers, got '{params}'"))),
                }
            }
            "monomial" => {
                let v = nums(params)?;
                let int = |x: f64| -> Result<u32> {
                    if x >= 0.0 && x.fract() == 0.0 && x <= 64.0 {
                        Ok(x as u32)
                    } else {
                        Err(Error::Config(format!("monomial exponents must be integers in 0..=64, got {x}")))
                    }
                };
                match v.as_slice() {
                    [a, b] => SymbolSpec::Monomial { a: int(*a)?, b: int(*b)?, clip: DEFAULT_MONOMIAL_CLIP },
                    [a, b, c] => SymbolSpec::Monomial { a: int(*a)?, b: int(*b)?, clip: *c },
                    _ => return Err(Error::Config(format!("monomial expects a,b[,clip], got '{params}'"))),
                }
            }
            "radial-table" => {
                let mut points = Vec::new();
                for pair in params.split(';').filter(|s| !s.trim().is_empty()) {
                    match nums(pair)?.as_slice() {
                        [r, v] => points.push((*r, *v)),
                        _ => return Err(Error::Config(format!("radial-table pairs are r,value; got '{pair}'"))),
                    }
                }
                SymbolSpec::RadialTable { points }
            }
            "gaussian" => match nums(params)?.as_slice() {
                [] => SymbolSpec::Gaussian { s: 1.0 },
                [s] => SymbolSpec::Gaussian { s: *s },
                _ => return Err(Error::Config(format!("gaussian expects one parameter, got '{params}'"))),
            },
            "phase" => SymbolSpec::Phase,
            "angular" => SymbolSpec::Angular,
            "heaviside-strip" => match nums(params)?.as_slice() {
                [] => SymbolSpec::HeavisideStrip { half_width: 1.0 },
                [h] => SymbolSpec::HeavisideStrip { half_width: *h },
                _ => return Err(Error::Config(format!("heaviside-strip expects one parameter, got '{params}'"))),
            },
            "user-grid" => {
                if params.is_empty() {
                    return Err(Error::Config("user-grid needs a file path".into()));
                }
                let grid = load_grid(Path::new(params))?;
                SymbolSpec::UserGrid { path: params.to_string(), grid }
            }
            other => return Err(Error::Config(format!("unknown symbol tag '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self {
            SymbolSpec::Constant { re, im } if !(re.is_finite() && im.is_finite()) => bad("constant must be finite".into()),
            SymbolSpec::Monomial { clip, .. } if !(clip.is_finite() && *clip > 0.0) => {
                bad(format!("monomial clip radius must be positive, got {clip}"))
            }
            SymbolSpec::RadialTable { points } => {
                if points.is_empty() {
                    return bad("radial-table needs at least one point".into());
                }
                if points.iter().any(|(r, v)| !(r.is_finite() && v.is_finite()) || *r < 0.0) {
                    return bad("radial-table entries must be finite with r >= 0".into());
                }
                if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return bad("radial-table radii must increase".into());
                }
                Ok(())
            }
            SymbolSpec::Gaussian { s } if !(s.is_finite() && *s >= 0.0) => bad(format!("gaussian needs s >= 0, got {s}")),
            SymbolSpec::HeavisideStrip { half_width } if !(half_width.is_finite() && *half_width >= 0.0) => {
                bad(format!("strip half-width must be >= 0, got {half_width}"))
            }
            SymbolSpec::UserGrid { grid, .. } => grid.validate(),
            _ => Ok(()),
        }
    }

    pub fn flags(&self) -> SymbolFlags {
        match self {
            SymbolSpec::Constant { .. } | SymbolSpec::Gaussian { .. } | SymbolSpec::RadialTable { .. } => {
                SymbolFlags { radial: true, vo: true, vmo: true }
            }
            SymbolSpec::Monomial { a, b, .. } => SymbolFlags { radial: a == b, vo: true, vmo: true },
            SymbolSpec::Phase => SymbolFlags { radial: true, vo: false, vmo: false },
            SymbolSpec::Angular => SymbolFlags { radial: false, vo: true, vmo: true },
            SymbolSpec::HeavisideStrip { .. } | SymbolSpec::UserGrid { .. } => SymbolFlags::default(),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            SymbolSpec::Constant { re, im } => Complex64::new(*re, *im).norm(),
            SymbolSpec::Monomial { a, b, clip } => clip.powi((a + b) as i32),
            SymbolSpec::RadialTable { points } => points.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max),
            SymbolSpec::Gaussian { .. } | SymbolSpec::Phase | SymbolSpec::Angular | SymbolSpec::HeavisideStrip { .. } => 1.0,
            SymbolSpec::UserGrid { grid, .. } => grid.max_modulus(),
        }
    }

    fn build(&self) -> Result<Symbol> {
        self.validate()?;
        let label = self.label();
        let bound = self.bound();
        Ok(match self.clone() {
            SymbolSpec::Constant { re, im } => {
                let c = Complex64::new(re, im);
                Symbol::radial(label, bound, move |_| c)
            }
            SymbolSpec::Monomial { a, b, clip } => {
                let eval = move |z: Complex64| {
                    let r = z.norm();
                    let w = if r > clip { z * (clip / r) } else { z };
                    w.powu(a) * w.conj().powu(b)
                };
                if a == b {
                    let c2 = clip * clip;
                    Symbol::radial(label, bound, move |t: f64| Complex64::new(t.min(c2).powi(a as i32), 0.0))
                } else {
                    Symbol::new(label, bound, eval)
                }
            }
            SymbolSpec::RadialTable { points } => Symbol::radial(label, bound, move |t: f64| {
                Complex64::new(interp_table(&points, t.sqrt()), 0.0)
            }),
            SymbolSpec::Gaussian { s } => Symbol::radial(label, bound, move |t: f64| Complex64::new((-s * t).exp(), 0.0)),
            SymbolSpec::Phase => Symbol::radial(label, bound, |t: f64| Complex64::from_polar(1.0, t)),
            SymbolSpec::Angular => Symbol::new(label, bound, |z: Complex64| {
                let r = z.norm();
                if r > 1.0 { z / r } else { z }
            }),
            SymbolSpec::HeavisideStrip { half_width } => Symbol::new(label, bound, move |z: Complex64| {
                Complex64::new(if z.im.abs() <= half_width { 1.0 } else { 0.0 }, 0.0)
            }),
            SymbolSpec::UserGrid { grid, .. } => Symbol::new(label, bound, move |z| grid.interpolate(z)),
        })
    }

    pub fn label(&self) -> String {
        match self {
            SymbolSpec::Constant { re, im } => format!("constant:{re},{im}"),
            SymbolSpec::Monomial { a, b, clip } => format!("monomial:{a},{b},{clip}"),
            SymbolSpec::RadialTable { points } => format!(
                "radial-table:{}",
                points.iter().map(|(r, v)| format!("{r},{v}")).collect::<Vec<_>>().join(";")
            ),
            SymbolSpec::Gaussian { s } => format!("gaussian:{s}"),
            SymbolSpec::Phase => "phase".into(),
            SymbolSpec::Angular => "angular".into(),
            SymbolSpec::HeavisideStrip { half_width } => format!("heaviside-strip:{half_width}"),
            SymbolSpec::UserGrid { path, .. } => format!("user-grid:{path}"),
        }
    }
}

fn interp_table(points: &[(f64, f64)], r: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if r <= first.0 {
        return first.1;
    }
    if r >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= r);
    let (r0, v0) = points[i - 1];
    let (r1, v1) = points[i];
    v0 + (v1 - v0) * (r - r0) / (r1 - r0)
}

pub fn load_grid(path: &Path) -> Result<GridData> {
    let text = std::fs::read_to_string(path)?;
    let grid: GridData = serde_json::from_str(&text)?;
    grid.validate()?;
    Ok(grid)
}

/// Library entry: parameters plus derived bound and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDescriptor {
    pub spec: SymbolSpec,
    pub bound: f64,
    pub flags: SymbolFlags,
}

impl SymbolDescriptor {
    pub fn new(spec: SymbolSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { bound: spec.bound(), flags: spec.flags(), spec })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(SymbolSpec::parse(text)?)
    }

    pub fn symbol(&self) -> Result<Symbol> {
        Symbol::from_descriptor(self)
    }
}

/// Library symbol by tag string.
pub fn library(text: &str) -> Result<Symbol> {
    SymbolDescriptor::parse(text)?.symbol()
}
