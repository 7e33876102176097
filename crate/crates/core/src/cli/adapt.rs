use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::default_out_dir;
use crate::collab::{evaluate, train_adaptation_with, EpochMetrics};
use crate::data::{config_hash, load_run_config, RunConfig};
use crate::models::Checkpoint;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, Args)]
pub struct AdaptArgs {
    /// Run configuration (TOML).
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub config: Option<PathBuf>,
    /// Replay the configuration recorded in an earlier run's manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Run directory; defaults to `$GEOCOT_OUT_ROOT/adapt-<config hash>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

/// Record of one run; written once when the run ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub status: RunStatus,
    pub metrics_path: PathBuf,
    pub checkpoint_path: Option<PathBuf>,
    pub source_acc: Option<f64>,
    pub target_acc: Option<f64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs one adaptation experiment. The run directory receives
/// `metrics.jsonl` (one record per epoch), `checkpoint.json` and, last,
/// `manifest.json`.
pub fn cmd_adapt(args: &AdaptArgs) -> Result<RunManifest> {
    let config = match (&args.config, &args.manifest) {
        (Some(p), _) => load_run_config(p)?,
        (None, Some(m)) => {
            let cfg = RunManifest::load(m)?.config;
            cfg.validate()?;
            cfg
        }
        (None, None) => return Err(Error::InvalidParameter("one of --config or --manifest is required".into())),
    };
    let hash = config_hash(&config);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_out_dir(&format!("adapt-{}", &hash[..12])));
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.exists() {
        return Err(Error::InvalidParameter(format!(
            "{} already holds a finished run",
            out.display()
        )));
    }
    let bundle = config.load_data()?;
    fs::create_dir_all(&out)?;
    let started_at = now();
    let metrics_path = out.join(METRICS_FILE);
    let mut metrics = BufWriter::new(File::create(&metrics_path)?);
    let mut write_err: Option<std::io::Error> = None;
    let target_eval = bundle.target_eval();
    let result = train_adaptation_with(&bundle.training_view(), target_eval.as_ref(), &config.train, |m: &EpochMetrics| {
        let line = serde_json::to_string(m).expect("metrics serialize");
        if let Err(e) = writeln!(metrics, "{line}").and_then(|_| metrics.flush()) {
            write_err.get_or_insert(e);
        }
    });
    drop(metrics);
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let seed = config.train.collab.seed;
    let mut manifest = RunManifest {
        config: config.clone(),
        config_hash: hash.clone(),
        seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: String::new(),
        status: RunStatus::Completed,
        metrics_path: PathBuf::from(METRICS_FILE),
        checkpoint_path: None,
        source_acc: None,
        target_acc: None,
    };
    match result {
        Ok(outcome) => {
            let model = &outcome.model;
            let src = bundle.source_eval();
            manifest.source_acc =
                Some(evaluate(&model.embedding, &model.classifier, src.features(), src.labels())?.accuracy);
            manifest.target_acc = outcome.history.last().and_then(|m| m.target_acc);
            let epochs = outcome.history.len();
            Checkpoint::new(outcome.model, seed, hash, epochs).save(&out.join(CHECKPOINT_FILE))?;
            manifest.checkpoint_path = Some(PathBuf::from(CHECKPOINT_FILE));
            manifest.finished_at = now();
            fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
            println!("{}", serde_json::to_string(&manifest)?);
            Ok(manifest)
        }
        Err(e) => {
            if matches!(e, Error::Diverged { .. } | Error::NonFinite(_)) {
                manifest.status = RunStatus::Diverged;
                manifest.finished_at = now();
                fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
            }
            Err(e)
        }
    }
}
