//! `polyfock`: command-line front end for the polyfock toolkit.
//!
//! Exit codes: 0 pass, 1 failed checks or numerical failure, 2 configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyfock::basis::{Domain, TruncationSpec};
use polyfock::berezin::BerezinMode;
use polyfock::commands::{
    cmd_berezin, cmd_diagnose, cmd_operator, cmd_spectrum, cmd_verify, exit_code_for, GridSpec, OperatorSource,
    Outcome, Probe, EXIT_CONFIG,
};
use polyfock::config::{required_quadrature, OutputFormat, RunConfig};
use polyfock::symbol::SymbolDescriptor;
use polyfock::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "polyfock", version, about = "Truncated polyanalytic Fock space experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the identity-verification suite and list every residual.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Sorted eigenvalues and singular values of a truncated Toeplitz operator.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        domain: DomainArgs,
    },
    /// Sample a Berezin or heat transform over a grid.
    Berezin {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        domain: DomainArgs,
        /// identity | projection:k | projection-poly:n | counterexample | toeplitz | multiplication | hankel | file:PATH
        #[arg(long, default_value = "toeplitz")]
        operator: String,
        /// scalar:k | matrix:n | standard:n | heat
        #[arg(long, default_value = "scalar:1")]
        mode: String,
        /// `circles` (radii x angles) or a file of `re,im` lines
        #[arg(long, default_value = "circles")]
        grid: String,
    },
    /// Run a compactness diagnostic and write its report and profile.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        domain: DomainArgs,
        /// vo | vmo | compactness | ray | ess-spec | hankel-k | toeplitz-k | ell2-band
        #[arg(long)]
        probe: String,
    },
    /// Export an operator matrix as a PFOK container (json format) or CSV with sidecar.
    Operator {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value = "toeplitz")]
        operator: String,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// K,J[,mK,mJ]
    #[arg(long)]
    spec: Option<String>,
    /// R,M radial and angular node counts
    #[arg(long)]
    quad: Option<String>,
    /// TAG[:params], e.g. gaussian:1, monomial:2,1, phase, angular
    #[arg(long)]
    symbol: Option<String>,
    /// Comma-separated increasing radii
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// Largest |z| probed by the verification suite
    #[arg(long)]
    probe_radius: Option<f64>,
    /// Override every verification tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; files are written there and the document is still printed
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args, Debug)]
struct DomainArgs {
    /// Single level F²₍ₖ₎
    #[arg(long, conflicts_with = "poly")]
    level: Option<usize>,
    /// Polyanalytic space F²ₙ
    #[arg(long)]
    poly: Option<usize>,
}

impl DomainArgs {
    fn domain(&self) -> Result<Domain> {
        match (self.level, self.poly) {
            (Some(0), _) | (_, Some(0)) => Err(Error::Config("--level and --poly start at 1".into())),
            (Some(k), _) => Ok(Domain::Level(k)),
            (_, Some(n)) => Ok(Domain::FirstN(n)),
            _ => Ok(Domain::Level(1)),
        }
    }
}

fn numbers<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| Error::Config(format!("{what}: cannot parse '{s}'"))))
        .collect()
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.spec {
            Some(text) => {
                let v: Vec<usize> = numbers(text, "--spec")?;
                let spec = match v[..] {
                    [k, j] => TruncationSpec::new(k, j, 0, 0),
                    [k, j, mk, mj] => TruncationSpec::new(k, j, mk, mj),
                    _ => return Err(Error::Config(format!("--spec expects K,J or K,J,mK,mJ, got '{text}'"))),
                }
                .map_err(|e| Error::Config(e.to_string()))?;
                RunConfig::with_spec(spec)
            }
            None => RunConfig::default(),
        };
        cfg.quad = match &self.quad {
            Some(text) => match numbers::<usize>(text, "--quad")?[..] {
                [r, m] => (r, m),
                _ => return Err(Error::Config(format!("--quad expects R,M, got '{text}'"))),
            },
            None => required_quadrature(&cfg.spec),
        };
        if let Some(text) = &self.radii {
            cfg.radii = numbers(text, "--radii")?;
        }
        if let Some(a) = self.angles {
            cfg.angles = a;
        }
        if let Some(s) = self.samples {
            cfg.samples = s;
        }
        if let Some(w) = self.window {
            cfg.window = w;
        }
        if let Some(p) = self.probe_radius {
            cfg.probe_radius = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.tolerance = self.tol;
        cfg.out_dir = self.out.clone();
        cfg.format = OutputFormat::parse(&self.format)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn symbol(&self) -> Result<Option<SymbolDescriptor>> {
        self.symbol.as_deref().map(SymbolDescriptor::parse).transpose()
    }

    fn required_symbol(&self) -> Result<SymbolDescriptor> {
        self.symbol()?.ok_or_else(|| Error::Config("this command needs --symbol".into()))
    }
}

fn run(cli: &Cli) -> Result<(Outcome, Option<PathBuf>)> {
    let (outcome, common) = match &cli.command {
        Command::Verify { common } => (cmd_verify(&common.config()?)?, common),
        Command::Spectrum { common, domain } => {
            (cmd_spectrum(&common.required_symbol()?, domain.domain()?, &common.config()?)?, common)
        }
        Command::Berezin { common, domain, operator, mode, grid } => {
            let cfg = common.config()?;
            let source = OperatorSource::parse(operator)?;
            let mode = BerezinMode::parse(mode)?;
            let out = cmd_berezin(&source, common.symbol()?.as_ref(), domain.domain()?, mode, &GridSpec::parse(grid), &cfg)?;
            (out, common)
        }
        Command::Diagnose { common, domain, probe } => {
            let cfg = common.config()?;
            (cmd_diagnose(&common.required_symbol()?, Probe::parse(probe)?, domain.domain()?, &cfg)?, common)
        }
        Command::Operator { common, domain, operator } => {
            let cfg = common.config()?;
            (cmd_operator(&OperatorSource::parse(operator)?, common.symbol()?.as_ref(), domain.domain()?, &cfg)?, common)
        }
    };
    Ok((outcome, common.out.clone()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((outcome, out_dir)) => {
            print!("{}", outcome.stdout);
            if let Some(dir) = out_dir {
                match outcome.write_files(&dir) {
                    Ok(paths) => {
                        for p in paths {
                            eprintln!("wrote {}", p.display());
                        }
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(EXIT_CONFIG as u8);
                    }
                }
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
