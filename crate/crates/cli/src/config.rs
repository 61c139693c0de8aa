//! Run configuration: built-in defaults, overridden by a flat TOML file,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub levels: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub significance: Option<f64>,
    pub tolerance_se: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Values every subcommand can draw on. `None` means "use the command's
/// own default".
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub n: Option<usize>,
    pub seed: u64,
    pub levels: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub significance: f64,
    pub tolerance_se: f64,
}

pub const DEFAULT_SEED: u64 = 20_240_229;

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub levels: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub significance: Option<f64>,
    pub tolerance_se: Option<f64>,
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Self> {
        let cfg = Self {
            dt: flags.dt.or(file.dt),
            horizon: flags.horizon.or(file.horizon),
            n: flags.n.or(file.n),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            levels: flags.levels.or(file.levels),
            output_dir: flags.output_dir.or(file.output_dir).unwrap_or_else(|| PathBuf::from(".")),
            significance: flags.significance.or(file.significance).unwrap_or(0.001),
            tolerance_se: flags.tolerance_se.or(file.tolerance_se).unwrap_or(4.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("horizon", self.horizon)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("{name} must be positive and finite, got {v}");
                }
            }
        }
        if self.n == Some(0) {
            bail!("n must be at least 1");
        }
        if let Some(levels) = &self.levels {
            if levels.is_empty() {
                bail!("levels must not be empty");
            }
            if levels.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                bail!("levels must be positive and finite");
            }
            if levels.windows(2).any(|w| !(w[1] > w[0])) {
                bail!("levels must be strictly increasing");
            }
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            bail!("significance must lie in (0, 1)");
        }
        if !(self.tolerance_se > 0.0 && self.tolerance_se.is_finite()) {
            bail!("tolerance_se must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("dt = 0.01\nn = 300\nseed = 5\nlevels = [0.5, 1.0]").unwrap();
        let flags = Overrides {
            n: Some(200),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(file, flags).unwrap();
        assert_eq!(cfg.dt, Some(0.01));
        assert_eq!(cfg.n, Some(200));
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.levels, Some(vec![0.5, 1.0]));
        assert_eq!(cfg.output_dir, PathBuf::from("."));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(toml::from_str::<FileConfig>("colour = 3").is_err());
        let unsorted = FileConfig {
            levels: Some(vec![1.0, 0.5]),
            ..FileConfig::default()
        };
        assert!(RunConfig::resolve(unsorted, Overrides::default()).is_err());
        let neg = Overrides {
            dt: Some(-1.0),
            ..Overrides::default()
        };
        assert!(RunConfig::resolve(FileConfig::default(), neg).is_err());
    }
}
