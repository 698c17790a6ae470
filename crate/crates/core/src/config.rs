use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kv;
use crate::lexicon::{ConceptId, LanguageTag};

#[derive(Debug, Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

/// Tunable thresholds of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub wsd: WsdConfig,
    /// Minimum concept similarity for a schema match suggestion.
    pub match_floor: f64,
    /// Minimum share of equal values for a merge suggestion.
    pub merge_floor: f64,
    pub merge_min_shared: usize,
    /// Concepts whose columns count as identifying when their values are unique.
    pub identifying: BTreeSet<ConceptId>,
    pub default_language: LanguageTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WsdConfig {
    pub context_weight: f64,
    pub rank_weight: f64,
    pub auto_score: f64,
    pub auto_margin: f64,
}

impl Default for WsdConfig {
    fn default() -> Self {
        WsdConfig {
            context_weight: 0.7,
            rank_weight: 0.3,
            auto_score: 0.6,
            auto_margin: 0.2,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            wsd: WsdConfig::default(),
            match_floor: 0.5,
            merge_floor: 0.5,
            merge_min_shared: 2,
            identifying: BTreeSet::new(),
            default_language: LanguageTag::new("en").unwrap(),
        }
    }
}

impl Config {
    /// Reads `key = value` overrides on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let entries = kv::parse(text).map_err(|(line, message)| ConfigError { line, message })?;
        for e in entries {
            let err = |message: String| ConfigError {
                line: e.line,
                message,
            };
            let unit = |v: &str| -> Result<f64, ConfigError> {
                let x: f64 = v.parse().map_err(|_| err(format!("'{v}' is not a number")))?;
                if (0.0..=1.0).contains(&x) {
                    Ok(x)
                } else {
                    Err(err(format!("{} must lie in [0, 1]", e.key)))
                }
            };
            match e.key.as_str() {
                "wsd.context_weight" => cfg.wsd.context_weight = unit(&e.value)?,
                "wsd.rank_weight" => cfg.wsd.rank_weight = unit(&e.value)?,
                "wsd.auto_score" => cfg.wsd.auto_score = unit(&e.value)?,
                "wsd.auto_margin" => cfg.wsd.auto_margin = unit(&e.value)?,
                "match.floor" => cfg.match_floor = unit(&e.value)?,
                "merge.floor" => cfg.merge_floor = unit(&e.value)?,
                "merge.min_shared" => {
                    cfg.merge_min_shared = e
                        .value
                        .parse()
                        .map_err(|_| err(format!("'{}' is not a count", e.value)))?
                }
                "identifying" => {
                    cfg.identifying = e
                        .value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<ConceptId>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err(format!("bad concept id list '{}'", e.value)))?
                }
                "language" => {
                    cfg.default_language =
                        LanguageTag::new(e.value.clone()).map_err(|x| err(x.to_string()))?
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        Ok(cfg)
    }
}
