//! Flags, the optional JSON config file, and their merge into one resolved config.

use std::path::{Path, PathBuf};

use clap::{value_parser, Args, Parser, Subcommand, ValueEnum};
use haartrunc::ensembles::EnsembleKind;
use haartrunc::processes::{GridSpec, ProcessKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(
    name = "haartrunc",
    version,
    about = "Monte Carlo checks for random truncations of Haar-distributed matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// unitary, orthogonal, dft or permutation
    #[arg(long, global = true)]
    pub ensemble: Option<EnsembleKind>,
    /// Matrix orders, comma separated
    #[arg(long, global = true, value_delimiter = ',', value_parser = value_parser!(u64).range(1..))]
    pub n: Vec<u64>,
    #[arg(long, global = true, value_parser = value_parser!(u64).range(1..))]
    pub replicas: Option<u64>,
    #[arg(long, global = true, env = "HAARTRUNC_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true, value_parser = value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// `default`, or `s1,s2,...` optionally followed by `:t1,t2,...`
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Output file (a directory for `suite`); stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON file whose fields override the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Draw matrices, weight matrices or process paths
    Sample {
        /// Write a process on the grid instead of the matrix
        #[arg(long)]
        process: Option<ProcessKind>,
        /// Write |u_ij|^2 instead of the complex entries
        #[arg(long)]
        weights: bool,
    },
    /// Compare Monte Carlo entry moments with their exact values
    VerifyMoments,
    /// Covariances of Z and calT at pairs of grid points
    Covariance,
    /// KS tests of the one-point laws of Z and calT
    Marginal {
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Bernoulli-to-Gaussian swap comparison
    Lindeberg {
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Exact decomposition and monotone splitting of calT
    DecomposeCheck,
    /// Window counts and the spacings identity
    Spacings {
        #[arg(long)]
        gap_n: Option<u64>,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        r: Option<u64>,
        #[arg(long)]
        gap_replicas: Option<u64>,
    },
    /// The full acceptance battery
    Suite {
        /// Multiplier on every replica count
        #[arg(long)]
        scale: Option<f64>,
        /// Run only these sections
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Sample { .. } => "sample",
            Verb::VerifyMoments => "verify-moments",
            Verb::Covariance => "covariance",
            Verb::Marginal { .. } => "marginal",
            Verb::Lindeberg { .. } => "lindeberg",
            Verb::DecomposeCheck => "decompose-check",
            Verb::Spacings { .. } => "spacings",
            Verb::Suite { .. } => "suite",
        }
    }
}

/// Contents of `--config`. Every field is optional and wins over its flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub ensemble: Option<EnsembleKind>,
    pub n: Option<Vec<u64>>,
    pub replicas: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<u64>,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub process: Option<ProcessKind>,
    pub weights: Option<bool>,
    pub gap_n: Option<u64>,
    pub k: Option<u64>,
    pub r: Option<u64>,
    pub gap_replicas: Option<u64>,
    pub scale: Option<f64>,
    pub only: Option<Vec<u32>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

/// The configuration a run actually used. Serialized into every output;
/// the thread count and output path are left out so that they cannot make
/// otherwise identical runs produce different files.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub verb: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleKind>,
    pub n: Vec<usize>,
    pub replicas: u64,
    pub seed: u64,
    pub grid: GridSpec,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessKind>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub weights: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<(usize, usize, usize, u64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub only: Vec<u32>,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub grid_given: bool,
}

pub fn parse_grid(spec: &str) -> Result<GridSpec, CliError> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("default") {
        return Ok(GridSpec::default_grid());
    }
    let list = |part: &str| -> Result<Vec<f64>, CliError> {
        part.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad grid value `{x}`")))
            })
            .collect()
    };
    let (s, t) = match spec.split_once(':') {
        Some((s, t)) => (list(s)?, list(t)?),
        None => {
            let s = list(spec)?;
            (s.clone(), s)
        }
    };
    GridSpec::new(s, t).map_err(|e| CliError::Usage(e.to_string()))
}

struct Defaults {
    ensemble: Option<EnsembleKind>,
    n: &'static [u64],
    replicas: u64,
    format: Format,
}

fn defaults(verb: &Verb) -> Defaults {
    let d = |ensemble, n, replicas, format| Defaults {
        ensemble,
        n,
        replicas,
        format,
    };
    let u = Some(EnsembleKind::HaarUnitary);
    match verb {
        Verb::Sample { .. } => d(u, &[4], 1, Format::Csv),
        Verb::VerifyMoments => d(u, &[8], 100_000, Format::Json),
        Verb::Covariance => d(u, &[32], 20_000, Format::Json),
        Verb::Marginal { .. } => d(u, &[200], 5000, Format::Json),
        Verb::Lindeberg { .. } => d(u, &[16, 64, 256], 5000, Format::Json),
        Verb::DecomposeCheck => d(None, &[8, 32, 128], 100, Format::Json),
        Verb::Spacings { .. } => d(None, &[100, 1000, 10_000], 10_000, Format::Json),
        Verb::Suite { .. } => d(None, &[], 1, Format::Json),
    }
}

fn positive(name: &str, v: u64) -> Result<u64, CliError> {
    if v == 0 {
        Err(CliError::Usage(format!("{name} must be at least 1")))
    } else {
        Ok(v)
    }
}

impl Cli {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let file = match &self.common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let c = &self.common;
        let d = defaults(&self.verb);
        let n: Vec<u64> = file
            .n
            .clone()
            .or_else(|| (!c.n.is_empty()).then(|| c.n.clone()))
            .unwrap_or_else(|| d.n.to_vec());
        if n.contains(&0) {
            return Err(CliError::Usage("every n must be at least 1".into()));
        }
        let grid_spec = file.grid.as_deref().or(c.grid.as_deref());
        let grid = match grid_spec {
            Some(g) => parse_grid(g)?,
            None => GridSpec::default_grid(),
        };
        let threads = positive(
            "threads",
            file.threads.or(c.threads).unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |p| p.get() as u64)
            }),
        )?;
        let mut r = Resolved {
            verb: self.verb.name(),
            ensemble: file.ensemble.or(c.ensemble).or(d.ensemble),
            n: n.iter().map(|&x| x as usize).collect(),
            replicas: positive("replicas", file.replicas.or(c.replicas).unwrap_or(d.replicas))?,
            seed: file.seed.or(c.seed).unwrap_or(DEFAULT_SEED),
            grid,
            format: file.format.or(c.format).unwrap_or(d.format),
            s: None,
            t: None,
            process: None,
            weights: false,
            gap: None,
            scale: None,
            only: Vec::new(),
            threads: threads as usize,
            out: file.out.clone().or_else(|| c.out.clone()),
            grid_given: grid_spec.is_some(),
        };
        match &self.verb {
            Verb::Sample { process, weights } => {
                r.process = file.process.or(*process);
                r.weights = file.weights.unwrap_or(*weights);
            }
            Verb::Marginal { s, t } => {
                r.s = Some(file.s.or(*s).unwrap_or(0.5));
                r.t = Some(file.t.or(*t).unwrap_or(0.5));
            }
            Verb::Lindeberg { s, t } => {
                r.s = Some(file.s.or(*s).unwrap_or(0.03));
                r.t = Some(file.t.or(*t).unwrap_or(0.03));
            }
            Verb::Spacings {
                gap_n,
                k,
                r: gap_r,
                gap_replicas,
            } => {
                let gn = file.gap_n.or(*gap_n).unwrap_or(20) as usize;
                let k = file.k.or(*k).unwrap_or(3) as usize;
                let gr = file.r.or(*gap_r).unwrap_or(4) as usize;
                let m = positive("gap-replicas", file.gap_replicas.or(*gap_replicas).unwrap_or(100_000))?;
                r.gap = Some((gn, k, gr, m));
            }
            Verb::Suite { scale, only } => {
                r.scale = Some(file.scale.or(*scale).unwrap_or(1.0));
                r.only = file.only.clone().unwrap_or_else(|| only.clone());
            }
            Verb::VerifyMoments | Verb::Covariance | Verb::DecomposeCheck => {}
        }
        Ok(r)
    }
}
