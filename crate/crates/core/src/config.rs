//! Resolved run configuration shared by all commands.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{check_gate, TruncationSpec};
use crate::diagnostics::{default_radii, Thresholds};
use crate::error::{Error, Result};
use crate::quadrature::{build_rule, QuadratureRule, MAX_RADIAL_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::Config(format!("format must be csv or json, got '{text}'"))),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spec: TruncationSpec,
    /// Radial and angular node counts for matrix assembly on the margined layout.
    pub quad: (usize, usize),
    pub radii: Vec<f64>,
    /// Directions per circle in profiles and grids.
    pub angles: usize,
    /// Angles per ring in oscillation sampling.
    pub samples: usize,
    /// Degrees kept per level in ray and Hankel windows.
    pub window: usize,
    pub thresholds: Thresholds,
    /// Overrides every identity tolerance of the verification suite.
    pub tolerance: Option<f64>,
    /// Largest `|z|` at which the verification suite probes coherent vectors.
    pub probe_radius: f64,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: u64,
}

/// Quadrature sizes that integrate every basis product on `spec`'s margined layout.
pub fn required_quadrature(spec: &TruncationSpec) -> (usize, usize) {
    let m = spec.margined();
    (m.levels + m.degrees + 8, 2 * (m.levels + m.degrees) + 9)
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = TruncationSpec::new(6, 64, 4, 8).expect("static truncation");
        Self {
            spec,
            quad: required_quadrature(&spec),
            radii: default_radii(),
            angles: 16,
            samples: 16,
            window: 4,
            thresholds: Thresholds::default(),
            tolerance: None,
            probe_radius: 3.0,
            out_dir: None,
            format: OutputFormat::Json,
            seed: 7,
        }
    }
}

impl RunConfig {
    /// Config for `spec` with matching quadrature and the remaining defaults.
    pub fn with_spec(spec: TruncationSpec) -> Self {
        Self { spec, quad: required_quadrature(&spec), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.spec.margined();
        // z^a z̄^b with a + b up to twice the top polynomial degree, |a − b| up to the angular spread
        let degree = 2 * (m.levels - 1 + m.degrees - 1);
        let spread = m.levels - 1 + m.degrees - 1;
        let (r, a) = self.quad;
        if r > MAX_RADIAL_COUNT {
            return Err(Error::Config(format!("at most {MAX_RADIAL_COUNT} radial nodes are supported, got {r}")));
        }
        if 2 * r < degree + 1 || a <= spread {
            return Err(Error::Config(format!(
                "quadrature ({r}, {a}) is not exact for the margined basis: need radial >= {} and angular > {spread}",
                degree.div_ceil(2).max(1)
            )));
        }
        if self.radii.is_empty()
            || self.radii.iter().any(|x| !x.is_finite() || *x < 0.0)
            || self.radii.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(format!("radii must be nonnegative and increasing: {:?}", self.radii)));
        }
        if self.angles == 0 || self.samples < 8 || self.window == 0 || self.window > self.spec.degrees {
            return Err(Error::Config(format!(
                "need angles >= 1, samples >= 8 and 1 <= window <= J; got {}, {}, {}",
                self.angles, self.samples, self.window
            )));
        }
        let th = &self.thresholds;
        if !(th.consistent > 0.0 && th.consistent <= th.inconsistent && th.vo > 0.0 && th.monotone_slack >= 0.0) {
            return Err(Error::Config(format!("inconsistent thresholds {th:?}")));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tolerance must be finite and >= 0, got {t}")));
            }
        }
        if !(self.probe_radius >= 0.0 && self.probe_radius.is_finite()) {
            return Err(Error::Config(format!("invalid probe radius {}", self.probe_radius)));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the tail gate at the verification probe radius.
    pub fn validate_for_verify(&self) -> Result<()> {
        self.validate()?;
        check_gate(self.spec.degrees, Complex64::new(self.probe_radius, 0.0))
            .map_err(|e| Error::Config(format!("probe radius {} is inconsistent with the truncation: {e}", self.probe_radius)))?;
        Ok(())
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        build_rule(self.quad.0, self.quad.1)
    }
}
