//! Experiment drivers behind the command-line front end.
//!
//! Each command returns an [`Outcome`]: an exit code, the document for standard
//! output, and named files for the output directory. Outputs are deterministic
//! functions of the resolved configuration, which every document embeds (CSV
//! documents carry it in a `.json` sidecar).

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::basis::{check_gate, Domain, Layout};
use crate::berezin::{berezin_field, circle_grid, BerezinMode, FieldSource, HeatTransform};
use crate::config::{OutputFormat, RunConfig};
use crate::diagnostics::{
    compactness_score, ell2_band_profile, ess_spectrum_estimate, hankel_k_independence_probe, ray_probe,
    toeplitz_k_sibling_probe, vmo_profile, vo_profile, DiagnosticsReport, LevelProbeSettings, REPORT_SCHEMA,
};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, load_container, load_csv, write_container, write_csv};
use crate::operators::{
    hankel_matrix, multiplication_matrix, projection_matrix, radial_eigenvalues, toeplitz_matrix, OperatorMatrix,
};
use crate::symbol::{Symbol, SymbolDescriptor};
use crate::verify::run_suite;

/// Exit codes shared by every command.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Exit code for an error: configuration-class errors give 2, numerical failures 1.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Range(_) | Error::Capability(_) | Error::Format(_) | Error::Io(_) => {
            EXIT_CONFIG
        }
        Error::Numeric(_) | Error::Accuracy(_) | Error::Json(_) => EXIT_CHECK_FAILED,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    /// `(file name, contents)` for the output directory.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    /// Writes the files into `dir`, creating it if needed; returns their paths.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (name, bytes) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, bytes)?;
            out.push(p);
        }
        Ok(out)
    }
}

fn pretty(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// A CSV document with its config sidecar.
fn csv_outcome(exit_code: i32, stem: &str, csv: String, meta: Value) -> Result<Outcome> {
    let sidecar = pretty(&meta)?;
    Ok(Outcome {
        exit_code,
        stdout: csv.clone(),
        files: vec![(format!("{stem}.csv"), csv.into_bytes()), (format!("{stem}.csv.json"), sidecar.into_bytes())],
    })
}

fn json_outcome(exit_code: i32, stem: &str, doc: Value) -> Result<Outcome> {
    let s = pretty(&doc)?;
    Ok(Outcome { exit_code, stdout: s.clone(), files: vec![(format!("{stem}.json"), s.into_bytes())] })
}

/// Runs the identity suite; exit 1 when any check misses its tolerance.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate_for_verify()?;
    let report = run_suite(cfg)?;
    let code = if report.passed { EXIT_PASS } else { EXIT_CHECK_FAILED };
    match cfg.format {
        OutputFormat::Json => {
            let mut out = json_outcome(code, "verify", serde_json::to_value(&report)?)?;
            out.files.push(("verify.txt".into(), report.table().into_bytes()));
            Ok(out)
        }
        OutputFormat::Csv => {
            let mut csv = String::from("name,residual,tolerance,passed\n");
            for c in &report.checks {
                csv.push_str(&format!("\"{}\",{},{},{}\n", c.name, fmt_f64(c.residual), fmt_f64(c.tolerance), c.passed));
            }
            let meta = json!({ "schema": REPORT_SCHEMA, "kind": "verify", "config": cfg, "passed": report.passed });
            csv_outcome(code, "verify", csv, meta)
        }
    }
}

/// Sort key: descending modulus, then argument, then real part.
fn spectral_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())).then(a.re.total_cmp(&b.re))
}

/// Eigenvalues and singular values of `T_{f,domain}` on the configured truncation;
/// on a single level of a radial symbol, also the one-dimensional moments.
pub fn cmd_spectrum(desc: &SymbolDescriptor, domain: Domain, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    domain.validate(cfg.spec.levels)?;
    let f = desc.symbol()?;
    let rule = cfg.rule()?;
    let t = toeplitz_matrix(&f, domain, &cfg.spec, &rule)?;
    let mut ev = t.eigenvalues()?;
    ev.sort_by(spectral_order);
    let sv = t.singular_values();
    let radial = match domain {
        Domain::Level(k) if f.is_radial() => {
            let mut mu = radial_eigenvalues(&f, k, cfg.spec.degrees)?;
            mu.sort_by(spectral_order);
            Some(mu)
        }
        _ => None,
    };
    let diffs: Option<Vec<f64>> = radial.as_ref().map(|mu| ev.iter().zip(mu).map(|(a, b)| (a - b).norm()).collect());
    let meta = json!({
        "schema": REPORT_SCHEMA,
        "kind": "spectrum",
        "symbol": f.label(),
        "domain": domain,
        "config": cfg,
        "max_radial_difference": diffs.as_ref().map(|d| d.iter().copied().fold(0.0, f64::max)),
    });
    match cfg.format {
        OutputFormat::Csv => {
            let mut csv = String::from("index,re,im,modulus,singular_value");
            if radial.is_some() {
                csv.push_str(",radial_re,radial_im,difference");
            }
            csv.push('\n');
            for (i, e) in ev.iter().enumerate() {
                csv.push_str(&format!("{i},{},{},{},{}", fmt_f64(e.re), fmt_f64(e.im), fmt_f64(e.norm()), fmt_f64(sv[i])));
                if let (Some(mu), Some(d)) = (&radial, &diffs) {
                    csv.push_str(&format!(",{},{},{}", fmt_f64(mu[i].re), fmt_f64(mu[i].im), fmt_f64(d[i])));
                }
                csv.push('\n');
            }
            csv_outcome(EXIT_PASS, "spectrum", csv, meta)
        }
        OutputFormat::Json => {
            let mut doc = meta;
            doc["eigenvalues"] = json!(ev.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>());
            doc["singular_values"] = json!(sv);
            if let Some(mu) = &radial {
                doc["radial_eigenvalues"] = json!(mu.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>());
                doc["differences"] = json!(diffs);
            }
            json_outcome(EXIT_PASS, "spectrum", doc)
        }
    }
}

/// Operators the Berezin and export commands can build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorSource {
    Identity,
    Projection(Domain),
    /// `P₍₁₎ − P₍₂₎`.
    LevelDifference,
    /// `T_{f,domain}` for the command's symbol.
    Toeplitz,
    /// `M_f` compressed to the truncation.
    Multiplication,
    /// `H_{f,domain}` on the margined rows.
    Hankel,
    /// A `PFOK` container, or a CSV with its `.json` sidecar.
    File(PathBuf),
}

impl OperatorSource {
    /// `identity | projection:k | projection-poly:n | counterexample | toeplitz | multiplication | hankel | file:PATH`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, arg) = text.split_once(':').map_or((text, None), |(a, b)| (a, Some(b)));
        let index = |what: &str| -> Result<usize> {
            arg.and_then(|s| s.trim().parse::<usize>().ok())
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::Config(format!("operator '{what}' needs a positive index, e.g. {what}:1")))
        };
        Ok(match name {
            "identity" => Self::Identity,
            "projection" => Self::Projection(Domain::Level(index(name)?)),
            "projection-poly" => Self::Projection(Domain::FirstN(index(name)?)),
            "counterexample" => Self::LevelDifference,
            "toeplitz" => Self::Toeplitz,
            "multiplication" => Self::Multiplication,
            "hankel" => Self::Hankel,
            "file" => Self::File(PathBuf::from(arg.filter(|s| !s.is_empty()).ok_or_else(|| {
                Error::Config("operator 'file' needs a path, e.g. file:op.pfok".into())
            })?)),
            _ => return Err(Error::Config(format!("unknown operator '{name}'"))),
        })
    }

    pub fn build(&self, symbol: Option<&Symbol>, domain: Domain, cfg: &RunConfig) -> Result<OperatorMatrix> {
        let layout = cfg.spec.layout();
        let need = || symbol.ok_or_else(|| Error::Config("this operator needs --symbol".into()));
        match self {
            Self::Identity => Ok(OperatorMatrix::identity(layout)),
            Self::Projection(d) => projection_matrix(layout, *d),
            Self::LevelDifference => {
                if cfg.spec.levels < 2 {
                    return Err(Error::Config("P(1) - P(2) needs at least two levels".into()));
                }
                Ok(projection_matrix(layout, Domain::Level(1))?
                    .sub(&projection_matrix(layout, Domain::Level(2))?)?
                    .with_label("P(1) - P(2)"))
            }
            Self::Toeplitz => toeplitz_matrix(need()?, domain, &cfg.spec, &cfg.rule()?),
            Self::Multiplication => multiplication_matrix(need()?, &cfg.spec, &cfg.rule()?),
            Self::Hankel => Ok(hankel_matrix(need()?, domain, &cfg.spec, &cfg.rule()?)?.matrix),
            Self::File(p) => {
                let is_csv = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
                Ok(if is_csv { load_csv(p)?.0 } else { load_container(p)?.0 })
            }
        }
    }
}

/// Evaluation points: `circles` (configured radii × angles) or a file of `re,im` lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpec {
    Circles,
    File(PathBuf),
}

impl GridSpec {
    pub fn parse(text: &str) -> Self {
        if text == "circles" { Self::Circles } else { Self::File(PathBuf::from(text)) }
    }

    pub fn points(&self, cfg: &RunConfig) -> Result<Vec<Complex64>> {
        match self {
            Self::Circles => Ok(circle_grid(&cfg.radii, cfg.angles)),
            Self::File(p) => {
                let text = std::fs::read_to_string(p)?;
                let mut pts = Vec::new();
                for (n, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
                        continue;
                    }
                    let bad = || Error::Format(format!("grid line {}: expected 're,im', got '{line}'", n + 1));
                    let (a, b) = line.split_once(',').ok_or_else(bad)?;
                    let re: f64 = a.trim().parse().map_err(|_| bad())?;
                    let im: f64 = b.trim().parse().map_err(|_| bad())?;
                    pts.push(Complex64::new(re, im));
                }
                if pts.is_empty() {
                    return Err(Error::Format(format!("grid file {} has no points", p.display())));
                }
                Ok(pts)
            }
        }
    }
}

/// Samples a Berezin or heat transform over a grid.
pub fn cmd_berezin(
    source: &OperatorSource,
    symbol: Option<&SymbolDescriptor>,
    domain: Domain,
    mode: BerezinMode,
    grid: &GridSpec,
    cfg: &RunConfig,
) -> Result<Outcome> {
    cfg.validate()?;
    let points = grid.points(cfg)?;
    let f = symbol.map(|d| d.symbol()).transpose()?;
    let sample = if mode == BerezinMode::Heat {
        let f = f.as_ref().ok_or_else(|| Error::Config("heat mode needs --symbol".into()))?;
        berezin_field(FieldSource::Symbol(&HeatTransform::new(f)?), &points, mode)?
    } else {
        let t = source.build(f.as_ref(), domain, cfg)?;
        if let Some(z) = points.iter().find(|z| check_gate(t.rows.degrees, **z).is_err()) {
            return Err(Error::Config(format!(
                "grid point {z} lies beyond the tail gate for J = {}; reduce the radii or raise J",
                t.rows.degrees
            )));
        }
        berezin_field(FieldSource::Operator(&t), &points, mode)?
    };
    let meta = json!({
        "schema": REPORT_SCHEMA,
        "kind": "berezin",
        "operator": source,
        "symbol": f.as_ref().map(|s| s.label().to_string()),
        "config": cfg,
    });
    match cfg.format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            sample.write_csv(&mut buf)?;
            let mut meta = meta;
            meta["meta"] = serde_json::to_value(&sample.meta)?;
            csv_outcome(EXIT_PASS, "berezin", String::from_utf8(buf).expect("ascii csv"), meta)
        }
        OutputFormat::Json => {
            let mut doc = meta;
            doc["sample"] = sample.to_json();
            json_outcome(EXIT_PASS, "berezin", doc)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Probe {
    Vo,
    Vmo,
    Compactness,
    Ray,
    EssSpec,
    HankelK,
    ToeplitzK,
    Ell2Band,
}

impl Probe {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(match text {
            "vo" => Self::Vo,
            "vmo" => Self::Vmo,
            "compactness" => Self::Compactness,
            "ray" => Self::Ray,
            "ess-spec" => Self::EssSpec,
            "hankel-k" => Self::HankelK,
            "toeplitz-k" => Self::ToeplitzK,
            "ell2-band" => Self::Ell2Band,
            _ => {
                return Err(Error::Config(format!(
                    "unknown probe '{text}' (vo|vmo|compactness|ray|ess-spec|hankel-k|toeplitz-k|ell2-band)"
                )))
            }
        })
    }
}

fn first_level(domain: Domain) -> usize {
    match domain {
        Domain::Level(k) => k,
        Domain::FirstN(_) => 1,
    }
}

/// Runs one diagnostic probe and emits its report and profile.
pub fn cmd_diagnose(desc: &SymbolDescriptor, probe: Probe, domain: Domain, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    domain.validate(cfg.spec.levels)?;
    let f = desc.symbol()?;
    let th = &cfg.thresholds;
    let levels: Vec<usize> = (1..=cfg.spec.levels.min(3)).collect();
    let mut report: DiagnosticsReport = match probe {
        Probe::Vo => vo_profile(&f, &cfg.radii, cfg.angles, cfg.samples, th)?,
        Probe::Vmo => vmo_profile(&f, &cfg.radii, cfg.angles, th)?,
        Probe::Compactness => {
            let t = toeplitz_matrix(&f, domain, &cfg.spec, &cfg.rule()?)?;
            let mode = match domain {
                Domain::Level(k) => BerezinMode::Scalar(k),
                Domain::FirstN(n) => BerezinMode::Matrix(n),
            };
            compactness_score(&t, mode, &cfg.radii, cfg.angles, th)?
        }
        Probe::Ray => ray_probe(&f, domain, Complex64::new(1.0, 0.0), &cfg.radii, cfg.window)?.to_report(f.label(), th),
        Probe::EssSpec => {
            ess_spectrum_estimate(&f, first_level(domain), &cfg.radii, cfg.angles, None, th)?.to_report(f.label(), th)
        }
        Probe::HankelK => {
            let settings = LevelProbeSettings { window: cfg.window, angle_count: cfg.angles.min(4), ..Default::default() };
            hankel_k_independence_probe(&f, &levels, &cfg.radii, &settings, th)?
        }
        Probe::ToeplitzK => toeplitz_k_sibling_probe(&f, &levels, &cfg.radii, cfg.angles, th)?,
        Probe::Ell2Band => {
            let n = match domain {
                Domain::Level(k) | Domain::FirstN(k) => k,
            };
            let t = multiplication_matrix(&f, &cfg.spec, &cfg.rule()?)?;
            ell2_band_profile(&t, n, cfg.spec.levels - n, th)?
        }
    };
    report.config = serde_json::to_value(cfg)?;
    let stem = format!("diagnose-{}", serde_json::to_value(probe)?.as_str().unwrap_or("probe"));
    match cfg.format {
        OutputFormat::Json => {
            let mut out = json_outcome(EXIT_PASS, &stem, serde_json::to_value(&report)?)?;
            out.files.push((format!("{stem}-profile.csv"), report.profile_csv().into_bytes()));
            Ok(out)
        }
        OutputFormat::Csv => {
            let mut out = csv_outcome(EXIT_PASS, &stem, report.profile_csv(), serde_json::to_value(&report)?)?;
            out.files.truncate(1);
            out.files.push((format!("{stem}.csv.json"), pretty(&report)?.into_bytes()));
            Ok(out)
        }
    }
}

/// Exports an operator as a `PFOK` container (JSON format selected) or CSV with sidecar.
pub fn cmd_operator(source: &OperatorSource, symbol: Option<&SymbolDescriptor>, domain: Domain, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let f = symbol.map(|d| d.symbol()).transpose()?;
    let t = source.build(f.as_ref(), domain, cfg)?;
    let spec = matches!(t.rows, Layout { first_level: 1, .. }).then_some(cfg.spec);
    let summary = pretty(&json!({
        "schema": REPORT_SCHEMA,
        "kind": "operator",
        "label": t.label,
        "rows": t.rows,
        "cols": t.cols,
        "norm": t.norm(),
        "config": cfg,
    }))?;
    let mut files = Vec::new();
    match cfg.format {
        OutputFormat::Json => {
            let mut buf = Vec::new();
            write_container(&mut buf, &t, spec.as_ref())?;
            files.push(("operator.pfok".to_string(), buf));
        }
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(&mut buf, &t)?;
            files.push(("operator.csv".to_string(), buf));
            let header = crate::io::ContainerHeader::for_operator(&t, spec.as_ref());
            files.push(("operator.csv.json".to_string(), pretty(&header)?.into_bytes()));
        }
    }
    files.push(("operator-summary.json".to_string(), summary.clone().into_bytes()));
    Ok(Outcome { exit_code: EXIT_PASS, stdout: summary, files })
}
