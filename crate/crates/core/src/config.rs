//! Run configuration: built-in defaults, optionally overridden by a
//! line-based `key = value` file, optionally overridden by flags.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::{Background, FusionConfig, DEFAULT_LAMBDA_PRIOR};
use crate::prior::{AggregationKind, AggregationMode, NormalizeOrder, PriorConfig, DEFAULT_TAU_S};
use crate::prompts::DEFAULT_CHUNK;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub lambda_prior: f64,
    pub tau_s: f64,
    pub aggregation: AggregationKind,
    pub chunk: usize,
    pub background_threshold: Option<f64>,
    pub normalize_order: NormalizeOrder,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda_prior: DEFAULT_LAMBDA_PRIOR,
            tau_s: DEFAULT_TAU_S,
            aggregation: AggregationKind::LogSumExp,
            chunk: DEFAULT_CHUNK,
            background_threshold: None,
            normalize_order: NormalizeOrder::Both,
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("cannot parse {key} = {value:?}"),
    })
}

impl RunConfig {
    /// Applies a config document on top of `self`. Blank lines and lines
    /// starting with `#` are skipped; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(Error::Config {
                line,
                message: format!("expected `key = value`, got {trimmed:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let wrap = |e: Error| Error::Config {
                line,
                message: e.to_string(),
            };
            match key {
                "lambda_prior" => self.lambda_prior = parse_num(line, key, value)?,
                "tau_s" => self.tau_s = parse_num(line, key, value)?,
                "aggregation" => self.aggregation = value.parse().map_err(wrap)?,
                "chunk" => self.chunk = parse_num(line, key, value)?,
                "background_threshold" => {
                    self.background_threshold = match value {
                        "" | "none" | "off" => None,
                        v => Some(parse_num(line, key, v)?),
                    }
                }
                "normalize_order" => self.normalize_order = value.parse().map_err(wrap)?,
                other => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior_config().mode.validate()?;
        self.fusion_config().validate()?;
        if self.chunk == 0 {
            return Err(Error::InvalidArgument("chunk must be >= 1".into()));
        }
        Ok(())
    }

    pub fn aggregation_mode(&self) -> AggregationMode {
        self.aggregation.with_tau(self.tau_s)
    }

    pub fn prior_config(&self) -> PriorConfig {
        PriorConfig {
            mode: self.aggregation_mode(),
            chunk: self.chunk,
            normalize_order: self.normalize_order,
        }
    }

    pub fn fusion_config(&self) -> FusionConfig {
        FusionConfig {
            lambda_prior: self.lambda_prior,
            background: self.background_threshold.map(|threshold| Background {
                threshold,
                index: None,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.lambda_prior, 0.7);
        assert_eq!(cfg.tau_s, 0.10);
        assert_eq!(cfg.chunk, 16);
        assert_eq!(cfg.aggregation_mode(), AggregationMode::LogSumExp { tau_s: 0.1 });
        assert_eq!(cfg.normalize_order, NormalizeOrder::Both);
        assert!(cfg.background_threshold.is_none());
    }

    #[test]
    fn file_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# run\nlambda_prior = 0.3\n aggregation=max\nbackground_threshold = -1.5\nnormalize_order = after\nchunk = 4\n")
            .unwrap();
        assert_eq!(cfg.lambda_prior, 0.3);
        assert_eq!(cfg.aggregation, AggregationKind::Max);
        assert_eq!(cfg.background_threshold, Some(-1.5));
        assert_eq!(cfg.normalize_order, NormalizeOrder::After);
        assert_eq!(cfg.chunk, 4);
        cfg.apply_text("background_threshold = none").unwrap();
        assert!(cfg.background_threshold.is_none());
    }

    #[test]
    fn bad_lines_name_the_line() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("tau_s = 0.1\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        assert!(cfg.apply_text("tau_s 0.1").is_err());
        assert!(cfg.apply_text("chunk = many").is_err());
        let zero_tau = RunConfig { tau_s: 0.0, ..RunConfig::default() };
        assert!(zero_tau.validate().is_err());
    }
}
