use std::path::{Path, PathBuf};

use elliptic_rmt::ensemble::{EnsembleConfig, PairFamily, ShiftConfig, ShiftKindTag};
use elliptic_rmt::EnsembleSpec;
use serde::Deserialize;

use crate::args::{parse_seed, EnsembleArgs, Format, OutputArgs, SpectrumKind};
use crate::failure::Failure;

pub const SEED_ENV: &str = "ELLIPTIC_RMT_SEED";

/// Contents of a `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<SeedValue>,
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub command: CommandConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// TOML integers stop at `i64::MAX`, so large seeds may be given as strings.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SeedValue {
    Int(u64),
    Text(String),
}

/// Subcommand parameters; each subcommand reads the keys it understands.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandConfig {
    pub trials: Option<usize>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub z_re: Option<f64>,
    pub z_im: Option<f64>,
    pub kind: Option<SpectrumKind>,
    pub dilation: Option<f64>,
    pub input: Option<PathBuf>,
    pub terms: Option<usize>,
    pub samples: Option<usize>,
    pub lambda: Option<f64>,
    pub family: Option<PairFamily>,
    pub delta: Option<f64>,
    pub r: Option<f64>,
    pub tau: Option<f64>,
    pub support: Option<usize>,
    pub n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
    }

    /// Flag, then config file, then environment, then [`elliptic_rmt::DEFAULT_SEED`].
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, Failure> {
        if let Some(s) = flag {
            return Ok(s);
        }
        match &self.seed {
            Some(SeedValue::Int(s)) => return Ok(*s),
            Some(SeedValue::Text(t)) => return parse_seed(t).map_err(|e| Failure::usage(format!("config seed: {e}"))),
            None => {}
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => parse_seed(&v).map_err(|e| Failure::usage(format!("{SEED_ENV}: {e}"))),
            Err(_) => Ok(elliptic_rmt::DEFAULT_SEED),
        }
    }

    /// Merges `[ensemble]` with command-line overrides. `default_shift` is the
    /// scaled-identity shift used when neither source sets one.
    pub fn ensemble(&self, args: &EnsembleArgs, default_shift: Option<f64>) -> Result<EnsembleSpec, Failure> {
        let mut cfg = match &self.ensemble {
            Some(c) => c.clone(),
            None => EnsembleConfig {
                n: args.n.ok_or_else(|| Failure::usage("--n is required (or an [ensemble] section)"))?,
                family: PairFamily::Gaussian,
                rho: 0.0,
                diag_family: None,
                atoms: Vec::new(),
                shift: match default_shift {
                    Some(scale) => ShiftConfig {
                        kind: ShiftKindTag::ScaledIdentity,
                        scale: Some(scale),
                        ..ShiftConfig::default()
                    },
                    None => ShiftConfig::default(),
                },
            },
        };
        if let Some(n) = args.n {
            cfg.n = n;
        }
        if let Some(f) = args.family {
            cfg.family = f.into();
        }
        if let Some(rho) = args.rho {
            cfg.rho = rho;
        }
        if let Some(d) = args.diag_family {
            cfg.diag_family = Some(d.into());
        }
        if let Some(scale) = args.shift_scale {
            cfg.shift.kind = ShiftKindTag::ScaledIdentity;
            cfg.shift.scale = Some(scale);
        }
        EnsembleSpec::try_from(&cfg).map_err(Failure::from)
    }

    pub fn output(&self, args: &OutputArgs, default_format: Format) -> (Option<PathBuf>, Format) {
        (
            args.out.clone().or_else(|| self.output.path.clone()),
            args.format.or(self.output.format).unwrap_or(default_format),
        )
    }
}
