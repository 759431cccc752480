use std::path::{Path, PathBuf};

use serde::Deserialize;

use miqpcert::measure::MeasureRegistry;
use miqpcert::pwq::DominanceConfig;
use miqpcert::{Error, Result};

/// Optional run settings read from a TOML file. Command-line flags take
/// precedence over every value here.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub n_c: Option<usize>,
    pub n_b: Option<usize>,
    pub m: Option<usize>,
    pub n_theta: Option<usize>,
    pub measure: Option<String>,
    pub grid: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub dominance_margin: Option<f64>,
    pub dominance_max_depth: Option<usize>,
}

fn invalid(key: &str, why: &str) -> Error {
    Error::Parse {
        line: 0,
        column: 0,
        message: format!("config key `{key}`: {why}"),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(&text, s.start))
                .unwrap_or((0, 0));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            ("count", self.count),
            ("n_theta", self.n_theta),
            ("m", self.m),
            ("grid", self.grid),
            ("workers", self.workers),
        ];
        for (key, v) in positive {
            if v == Some(0) {
                return Err(invalid(key, "must be at least 1"));
            }
        }
        if self.n_c.unwrap_or(0) + self.n_b.unwrap_or(0) > 64 {
            return Err(invalid("n_c", "n_c + n_b must not exceed 64"));
        }
        if self.n_b.is_some_and(|v| v > 16) {
            return Err(invalid("n_b", "at most 16 binaries are supported"));
        }
        if self.grid.is_some_and(|g| g > 100_000) {
            return Err(invalid("grid", "at most 100000 points per axis"));
        }
        if let Some(m) = &self.measure {
            MeasureRegistry::with_builtins()
                .get(m)
                .map_err(|_| invalid("measure", &format!("unknown measure `{m}`")))?;
        }
        if let Some(margin) = self.tolerances.dominance_margin {
            if !(0.0..=1e-3).contains(&margin) {
                return Err(invalid("tolerances.dominance_margin", "must lie in [0, 1e-3]"));
            }
        }
        if self.tolerances.dominance_max_depth.is_some_and(|d| d > 30) {
            return Err(invalid("tolerances.dominance_max_depth", "must not exceed 30"));
        }
        Ok(())
    }

    pub fn dominance(&self) -> DominanceConfig {
        let d = DominanceConfig::default();
        DominanceConfig {
            margin: self.tolerances.dominance_margin.unwrap_or(d.margin),
            max_depth: self.tolerances.dominance_max_depth.unwrap_or(d.max_depth),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        let err = toml::from_str::<RunConfig>("seed = 1\nsede = 2\n").unwrap_err();
        assert!(err.message().contains("sede"));
    }

    #[test]
    fn ranges_checked() {
        let cfg: RunConfig = toml::from_str("grid = 0").unwrap();
        assert!(cfg.check().is_err());
        let cfg: RunConfig = toml::from_str("measure = \"flops\"").unwrap();
        assert!(cfg.check().is_err());
        let cfg: RunConfig = toml::from_str("[tolerances]\ndominance_margin = 1.0").unwrap();
        assert!(cfg.check().is_err());
        let cfg: RunConfig = toml::from_str("seed = 3\nmeasure = \"nodes\"\n[tolerances]\ndominance_max_depth = 4").unwrap();
        cfg.check().unwrap();
        assert_eq!(cfg.dominance().max_depth, 4);
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
