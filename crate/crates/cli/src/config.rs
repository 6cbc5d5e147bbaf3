//! Run configuration: command-line flags layered over an optional TOML file
//! layered over built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use secluster_core::{ConstraintKind, Hyperparams, Kernel};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Gaussian,
    Cosine,
}

impl FromStr for KernelName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "cosine" => Ok(Self::Cosine),
            _ => Err(format!(
                "unknown kernel {s:?} (expected gaussian or cosine)"
            )),
        }
    }
}

/// Neighbor count: fixed, or derived from the expected number of clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PSpec {
    Auto,
    Fixed(usize),
}

impl FromStr for PSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        match s.parse::<usize>() {
            Ok(p) if p >= 1 => Ok(Self::Fixed(p)),
            _ => Err(format!(
                "p must be a positive integer or \"auto\", got {s:?}"
            )),
        }
    }
}

impl fmt::Display for PSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(p) => write!(f, "{p}"),
        }
    }
}

impl Serialize for PSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(p) => s.serialize_u64(*p as u64),
        }
    }
}

impl<'de> Deserialize<'de> for PSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(p) => format!("{p}").parse(),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Flags shared by `partition` and `hierarchy`. Every field is optional so
/// that an unset flag falls through to the config file.
#[derive(Args, Debug, Default)]
pub struct RunFlags {
    /// Feature matrix, one CSV row per point.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// The last CSV column holds integer class labels.
    #[arg(long)]
    pub label_column: bool,
    /// Ground-truth labels, one per line (used for metrics, constraint
    /// sampling and `--p auto`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub kernel: Option<KernelName>,
    /// Gaussian kernel width.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Neighbors per point in the sparsified graph, or `auto`.
    #[arg(short, long)]
    pub p: Option<PSpec>,
    /// Expected number of clusters, for `--p auto`.
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Constraint file (ML/CL/PL/NL lines).
    #[arg(short, long, conflicts_with = "generate")]
    pub constraints: Option<PathBuf>,
    /// Sample constraints of this kind from the ground truth.
    #[arg(long)]
    pub generate: Option<ConstraintKind>,
    /// Sampled constraints per polarity, as a fraction of n.
    #[arg(long)]
    pub amount: Option<f64>,
    /// Constraint penalty weight.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Maximum number of moving sweeps.
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Seed for constraint sampling; repeat r uses seed + r.
    #[arg(short, long)]
    pub seed: Option<u64>,
    /// Runs with reseeded constraints, reported as mean and std.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// JSON result path; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Same knobs as [`RunFlags`], read from TOML.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub label_column: Option<bool>,
    pub truth: Option<PathBuf>,
    pub kernel: Option<KernelName>,
    pub sigma: Option<f64>,
    pub p: Option<PSpec>,
    pub k: Option<usize>,
    pub constraints: Option<PathBuf>,
    pub generate: Option<ConstraintKind>,
    pub amount: Option<f64>,
    pub phi: Option<f64>,
    pub height: Option<usize>,
    pub t_max: Option<usize>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub output: Option<PathBuf>,
    pub newick: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Self =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // relative paths are taken from the config file's directory
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.input,
            &mut config.truth,
            &mut config.constraints,
            &mut config.output,
            &mut config.newick,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum ConstraintSource {
    None,
    File { path: PathBuf },
    Generate { kind: ConstraintKind, amount: f64 },
}

/// Fully resolved settings for one `partition` or `hierarchy` invocation.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub label_column: bool,
    pub truth: Option<PathBuf>,
    pub kernel: KernelName,
    pub sigma: f64,
    pub p: PSpec,
    pub k: Option<usize>,
    pub constraints: ConstraintSource,
    pub phi: f64,
    pub height: usize,
    pub t_max: usize,
    pub seed: u64,
    pub repeats: usize,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

pub fn default_amount(kind: ConstraintKind) -> f64 {
    match kind {
        ConstraintKind::Pairwise => 0.2,
        ConstraintKind::Label => 0.1,
    }
}

impl RunConfig {
    pub fn resolve(flags: RunFlags, height: Option<usize>, file: FileConfig) -> Result<Self> {
        let defaults = Hyperparams::default();
        let Some(input) = flags.input.or(file.input) else {
            bail!("no input file given (use --input or `input` in the config file)");
        };

        // the constraint source is taken as a whole from the flags when they
        // name one, otherwise from the file
        let (constraints, generate) = if flags.constraints.is_some() || flags.generate.is_some() {
            (flags.constraints, flags.generate)
        } else {
            (file.constraints, file.generate)
        };
        let constraints = match (constraints, generate) {
            (Some(_), Some(_)) => {
                bail!("give either a constraint file or a generation kind, not both")
            }
            (Some(path), None) => ConstraintSource::File { path },
            (None, Some(kind)) => ConstraintSource::Generate {
                kind,
                amount: flags
                    .amount
                    .or(file.amount)
                    .unwrap_or_else(|| default_amount(kind)),
            },
            (None, None) => ConstraintSource::None,
        };

        let config = Self {
            input,
            label_column: flags.label_column || file.label_column.unwrap_or(false),
            truth: flags.truth.or(file.truth),
            kernel: flags.kernel.or(file.kernel).unwrap_or(KernelName::Gaussian),
            sigma: flags.sigma.or(file.sigma).unwrap_or(Kernel::DEFAULT_SIGMA),
            p: flags.p.or(file.p).unwrap_or(PSpec::Auto),
            k: flags.k.or(file.k),
            constraints,
            phi: flags.phi.or(file.phi).unwrap_or(defaults.phi),
            height: height.or(file.height).unwrap_or(defaults.height),
            t_max: flags.t_max.or(file.t_max).unwrap_or(defaults.t_max),
            seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
            repeats: flags.repeats.or(file.repeats).unwrap_or(1),
            output: flags.output.or(file.output),
        };
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        if self.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        if self.k == Some(0) {
            bail!("k must be at least 1");
        }
        if let ConstraintSource::Generate { amount, .. } = self.constraints {
            if !(0.0..=1.0).contains(&amount) {
                bail!("constraint amount must be in [0, 1], got {amount}");
            }
        }
        self.kernel().validate()?;
        self.hyperparams().validate()?;
        Ok(())
    }

    pub fn kernel(&self) -> Kernel {
        match self.kernel {
            KernelName::Gaussian => Kernel::Gaussian { sigma: self.sigma },
            KernelName::Cosine => Kernel::Cosine,
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            phi: self.phi,
            height: self.height,
            t_max: self.t_max,
            seed: self.seed,
            ..Hyperparams::default()
        }
    }
}
