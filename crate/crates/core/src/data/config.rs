use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{gen_shift, load_bundle, load_idx, DatasetBundle, ShiftScenario};
use crate::collab::TrainConfig;
use crate::cost::LabeledFeatureSet;
use crate::{Error, Result};

/// IDX digit files for a source→target pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitsSource {
    pub source_images: PathBuf,
    pub source_labels: PathBuf,
    pub target_images: PathBuf,
    pub target_labels: PathBuf,
    pub max_source: Option<usize>,
    pub max_target: Option<usize>,
    pub downsample_to: Option<usize>,
}

/// Where an experiment's data comes from. Exactly one of the fields of
/// [`RunConfig`] selecting data must be set.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource<'a> {
    Synthetic(&'a ShiftScenario),
    Bundle(&'a Path),
    Digits(&'a DigitsSource),
}

/// Contents of a run configuration file (TOML).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<ShiftScenario>,
    pub bundle: Option<PathBuf>,
    pub digits: Option<DigitsSource>,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let sources = usize::from(self.scenario.is_some()) + usize::from(self.bundle.is_some()) + usize::from(self.digits.is_some());
        if sources != 1 {
            p.push(format!(
                "exactly one of [scenario], bundle or [digits] must be given, found {sources}"
            ));
        }
        if let Some(s) = &self.scenario {
            p.extend(s.problems().into_iter().map(|m| format!("scenario: {m}")));
        }
        p.extend(self.train.problems().into_iter().map(|m| format!("train: {m}")));
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    pub fn data_source(&self) -> Result<DataSource<'_>> {
        match (&self.scenario, &self.bundle, &self.digits) {
            (Some(s), None, None) => Ok(DataSource::Synthetic(s)),
            (None, Some(b), None) => Ok(DataSource::Bundle(b)),
            (None, None, Some(d)) => Ok(DataSource::Digits(d)),
            _ => Err(Error::InvalidConfig(vec!["exactly one data source must be given".into()])),
        }
    }

    /// Generates or reads the configured data.
    pub fn load_data(&self) -> Result<DatasetBundle> {
        match self.data_source()? {
            DataSource::Synthetic(s) => gen_shift(s),
            DataSource::Bundle(p) => load_bundle(p),
            DataSource::Digits(d) => {
                let s = load_idx(&d.source_images, &d.source_labels, d.max_source, d.downsample_to)?;
                let t = load_idx(&d.target_images, &d.target_labels, d.max_target, d.downsample_to)?;
                let labels = t.hard_labels().map(<[usize]>::to_vec);
                DatasetBundle::new(s, LabeledFeatureSet::new(t.features().to_owned())?, labels)
            }
        }
    }

    /// Resolves relative data paths against `base`.
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(b) = &mut self.bundle {
            fix(b);
        }
        if let Some(d) = &mut self.digits {
            for p in [&mut d.source_images, &mut d.source_labels, &mut d.target_images, &mut d.target_labels] {
                fix(p);
            }
        }
    }
}

/// Parses and validates a configuration, reporting every problem at once.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(vec![e.to_string()]))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a configuration file; relative data paths are taken relative to it.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let mut cfg = parse_run_config(&text)?;
    cfg.resolve(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

/// Hex SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_run_config("[scenario]\nseed = 3\n").unwrap();
        assert_eq!(cfg.scenario.as_ref().unwrap().seed, 3);
        assert_eq!(cfg.train, TrainConfig::default());
    }

    #[test]
    fn all_problems_reported() {
        let text = "[scenario]\nsigma = -1.0\nsamples_per_class = 0\n[train.collab]\nalpha_plan = 3.0\n[train.sgd]\nlearning_rate = 0.0\nmomentum = 0.9\nbatch_size = 8\n";
        match parse_run_config(text) {
            Err(Error::InvalidConfig(p)) => assert_eq!(p.len(), 4, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_missing_source() {
        assert!(matches!(parse_run_config("[scenario]\nbogus = 1\n"), Err(Error::InvalidConfig(_))));
        assert!(matches!(parse_run_config(""), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn hash_changes_with_config() {
        let a = parse_run_config("[scenario]\nseed = 1\n").unwrap();
        let b = parse_run_config("[scenario]\nseed = 2\n").unwrap();
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
