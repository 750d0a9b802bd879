//! Run configuration: a flat `key = value` text file plus overrides.
//!
//! ```text
//! # training run
//! target = tvc
//! cycles = 100
//! learn_rate = 0.1
//! selection = topk:80
//! smoothing = off
//! ```
//!
//! Blank lines and `#` comments are ignored. Every value is validated as soon
//! as it is set, so a bad file fails before any data is read.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feature_select::{BoostParams, SelectionPolicy};
use crate::ingest::{AxisUnit, Target};
use crate::pls::{CurveKind, CvSpec, PipelineConfig, DEFAULT_SMOOTHING_WEIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spectra: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub target: Target,
    pub axis_unit: AxisUnit,
    pub boost: BoostParams,
    pub selection: SelectionPolicy,
    pub feature_selection: bool,
    pub folds: usize,
    pub repartitions: usize,
    pub max_components: Option<usize>,
    pub smoothing: bool,
    pub smoothing_weight: f64,
    pub curve_kind: CurveKind,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pipeline = PipelineConfig::default();
        RunConfig {
            spectra: None,
            metadata: None,
            model: None,
            out_dir: PathBuf::from("."),
            target: Target::Tvc,
            axis_unit: AxisUnit::Nm,
            boost: pipeline.boost,
            selection: pipeline.selection,
            feature_selection: true,
            folds: pipeline.cv.folds,
            repartitions: pipeline.cv.repartitions,
            max_components: None,
            smoothing: true,
            smoothing_weight: DEFAULT_SMOOTHING_WEIGHT,
            curve_kind: pipeline.curve_kind,
            seed: pipeline.cv.seed,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected on/off, got {value:?}"))),
    }
}

fn positive(key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(Error::Config(format!("{key} must be at least 1")))
    } else {
        Ok(v)
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 19] = [
        "spectra",
        "metadata",
        "model",
        "out",
        "target",
        "axis_unit",
        "cycles",
        "learn_rate",
        "max_depth",
        "min_leaf",
        "selection",
        "feature_selection",
        "folds",
        "repartitions",
        "max_components",
        "smoothing",
        "smoothing_weight",
        "curve",
        "seed",
    ];

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Sets one option from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "spectra" => self.spectra = Some(value.into()),
            "metadata" => self.metadata = Some(value.into()),
            "model" => self.model = Some(value.into()),
            "out" => self.out_dir = value.into(),
            "target" => self.target = value.parse()?,
            "axis_unit" => self.axis_unit = value.parse()?,
            "cycles" => self.boost.n_cycles = positive(&key, parse_num(&key, value)?)?,
            "learn_rate" => {
                let lr: f64 = parse_num(&key, value)?;
                if !(lr > 0.0 && lr <= 1.0) {
                    return Err(Error::Config(format!("learn_rate {lr} is not in (0, 1]")));
                }
                self.boost.learn_rate = lr;
            }
            "max_depth" => {
                self.boost.tree.max_depth = match value.to_ascii_lowercase().as_str() {
                    "none" | "unlimited" => None,
                    _ => Some(positive(&key, parse_num(&key, value)?)?),
                }
            }
            "min_leaf" => self.boost.tree.min_leaf = positive(&key, parse_num(&key, value)?)?,
            "selection" => self.selection = value.parse()?,
            "feature_selection" => self.feature_selection = parse_bool(&key, value)?,
            "folds" => {
                let folds: usize = parse_num(&key, value)?;
                if folds < 2 {
                    return Err(Error::Config("folds must be at least 2".into()));
                }
                self.folds = folds;
            }
            "repartitions" => self.repartitions = positive(&key, parse_num(&key, value)?)?,
            "max_components" => {
                self.max_components = match value.to_ascii_lowercase().as_str() {
                    "auto" | "none" => None,
                    _ => Some(positive(&key, parse_num(&key, value)?)?),
                }
            }
            "smoothing" => self.smoothing = parse_bool(&key, value)?,
            "smoothing_weight" => {
                let w: f64 = parse_num(&key, value)?;
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::Config(format!("smoothing_weight {w} must be finite and non-negative")));
                }
                self.smoothing_weight = w;
            }
            "curve" => self.curve_kind = value.parse()?,
            "seed" => self.seed = parse_num(&key, value)?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown key {key:?} (known: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            boost: self.boost,
            selection: self.selection,
            feature_selection: self.feature_selection,
            cv: CvSpec {
                folds: self.folds,
                repartitions: self.repartitions,
                seed: self.seed,
            },
            max_components: self.max_components,
            smoothing: self.smoothing.then_some(self.smoothing_weight),
            curve_kind: self.curve_kind,
        }
    }

    /// Model-relevant settings in `key -> value` form, stored in model files.
    /// Paths are left out so moving inputs does not change the output.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("target", self.target.to_string());
        put("axis_unit", self.axis_unit.to_string());
        put("cycles", self.boost.n_cycles.to_string());
        put("learn_rate", self.boost.learn_rate.to_string());
        put(
            "max_depth",
            self.boost.tree.max_depth.map_or("none".into(), |d| d.to_string()),
        );
        put("min_leaf", self.boost.tree.min_leaf.to_string());
        put("selection", self.selection.to_string());
        put("feature_selection", self.feature_selection.to_string());
        put("folds", self.folds.to_string());
        put("repartitions", self.repartitions.to_string());
        put(
            "max_components",
            self.max_components.map_or("auto".into(), |k| k.to_string()),
        );
        put("smoothing", self.smoothing.to_string());
        put("smoothing_weight", self.smoothing_weight.to_string());
        put("curve", self.curve_kind.to_string());
        put("seed", self.seed.to_string());
        m
    }
}
