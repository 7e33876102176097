use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::default_out_dir;
use crate::collab::{train_adaptation, Method, TrainConfig};
use crate::data::{gen_shift, load_idx, DatasetBundle, GeneratorKind, ShiftScenario};
use crate::cost::LabeledFeatureSet;
use crate::{Error, Result};

/// Printed under every table; never compared against.
pub const REFERENCE_NOTE: &str = "Context only: the original full-scale MNIST->USPS experiment (LeNet-5, full datasets, tuned hyperparameters) reports 97.1% target accuracy. These desk-scale suites are not comparable and that number is not asserted.";

/// Environment variable pointing at the IDX files of the digits suite.
pub const DIGITS_DIR_ENV: &str = "GEOCOT_DIGITS_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Synthetic,
    DigitsSmall,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::Synthetic)]
    pub suite: Suite,
    /// Keep only scenarios whose name contains this string.
    #[arg(long)]
    pub filter: Option<String>,
    /// Output directory for `bench.csv` and `bench.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Override the number of training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Directory holding `mnist-{images,labels}.idx` and `usps-{images,labels}.idx`.
    #[arg(long, env = DIGITS_DIR_ENV)]
    pub digits_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
struct BenchReport<'a> {
    suite: Suite,
    rows: &'a [BenchRow],
    note: &'static str,
}

type Loader = Box<dyn Fn(u64) -> Result<DatasetBundle>>;

struct Scenario {
    name: String,
    load: Loader,
    train: TrainConfig,
}

/// Base seed of every suite; seed `i` of a row is `BASE_SEED + i`.
pub const BASE_SEED: u64 = 17;

fn synthetic_scenarios() -> Vec<Scenario> {
    let gaussian = ShiftScenario::default();
    let moons = ShiftScenario {
        kind: GeneratorKind::TwoMoons,
        classes: 2,
        samples_per_class: 200,
        rotation: 0.5,
        sigma: 0.1,
        ..ShiftScenario::default()
    };
    [("rotated-gaussians", gaussian), ("rotated-moons", moons)]
        .into_iter()
        .map(|(name, s)| Scenario {
            name: name.to_string(),
            load: Box::new(move |seed| gen_shift(&ShiftScenario { seed, ..s.clone() })),
            train: TrainConfig::default(),
        })
        .collect()
}

fn subsample(set: &LabeledFeatureSet, n: usize, seed: u64) -> LabeledFeatureSet {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, set.len(), n.min(set.len())).into_vec();
    idx.sort_unstable();
    set.subset(&idx)
}

fn digits_scenarios(dir: Option<PathBuf>) -> Vec<Scenario> {
    let load: Loader = Box::new(move |seed| {
        let dir = dir
            .clone()
            .ok_or_else(|| Error::InvalidParameter(format!("missing assets: set --digits-dir or {DIGITS_DIR_ENV}")))?;
        let file = |name: &str| -> Result<PathBuf> {
            let p = dir.join(name);
            if p.exists() {
                Ok(p)
            } else {
                Err(Error::InvalidParameter(format!("missing assets: {}", p.display())))
            }
        };
        let mnist = load_idx(&file("mnist-images.idx")?, &file("mnist-labels.idx")?, None, Some(16))?;
        let usps = load_idx(&file("usps-images.idx")?, &file("usps-labels.idx")?, None, Some(16))?;
        let source = subsample(&mnist, 2000, seed);
        let target = subsample(&usps, 1800, seed.wrapping_add(1));
        let labels = target.hard_labels().map(<[usize]>::to_vec);
        DatasetBundle::new(source, LabeledFeatureSet::new(target.features().to_owned())?, labels)
    });
    let mut train = TrainConfig::default();
    train.collab.epochs = 20;
    vec![Scenario {
        name: "mnist-to-usps-small".into(),
        load,
        train,
    }]
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

fn write_outputs(out: &Path, suite: Suite, rows: &[BenchRow]) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("bench.csv")).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["scenario", "method", "seeds", "acc_mean", "acc_std", "status"]).map_err(io)?;
    for r in rows {
        let seeds = r.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        w.write_record([
            r.scenario.as_str(),
            r.method.name(),
            seeds.as_str(),
            fmt_opt(r.mean).as_str(),
            fmt_opt(r.std).as_str(),
            r.status.as_str(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    let report = BenchReport {
        suite,
        rows,
        note: REFERENCE_NOTE,
    };
    fs::write(out.join("bench.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

/// Runs every (scenario, method) pair over `seeds` seeds. Scenarios whose
/// data cannot be loaded are reported row by row and the suite continues.
pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.seeds == 0 {
        return Err(Error::InvalidParameter("--seeds must be at least 1".into()));
    }
    let scenarios = match args.suite {
        Suite::Synthetic => synthetic_scenarios(),
        Suite::DigitsSmall => digits_scenarios(args.digits_dir.clone()),
    };
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|i| BASE_SEED + i).collect();
    let mut rows = Vec::new();
    for sc in scenarios
        .iter()
        .filter(|s| args.filter.as_deref().is_none_or(|f| s.name.contains(f)))
    {
        let data: Vec<Result<DatasetBundle>> = seeds.iter().map(|&s| (sc.load)(s)).collect();
        for method in Method::ALL {
            let mut accs = Vec::new();
            let mut status = "ok".to_string();
            for (&seed, bundle) in seeds.iter().zip(&data) {
                let bundle = match bundle {
                    Ok(b) => b,
                    Err(e) => {
                        status = e.to_string();
                        break;
                    }
                };
                let mut cfg = sc.train.clone();
                cfg.method = method;
                cfg.collab.seed = seed;
                if let Some(e) = args.epochs {
                    cfg.collab.epochs = e;
                }
                let eval = bundle.target_eval();
                match train_adaptation(&bundle.training_view(), eval.as_ref(), &cfg) {
                    Ok(o) => accs.push(o.history.last().and_then(|m| m.target_acc).unwrap_or(f64::NAN)),
                    Err(e) => {
                        status = format!("seed {seed}: {e}");
                        break;
                    }
                }
            }
            let (mean, std) = if status == "ok" && !accs.is_empty() {
                let (m, s) = mean_std(&accs);
                (Some(m), Some(s))
            } else {
                (None, None)
            };
            rows.push(BenchRow {
                scenario: sc.name.clone(),
                method,
                seeds: seeds.clone(),
                accuracies: accs,
                mean,
                std,
                status,
            });
        }
    }
    let out = args.out.clone().unwrap_or_else(|| default_out_dir("bench"));
    write_outputs(&out, args.suite, &rows)?;
    println!("{:<22} {:<14} {:>18}  status", "scenario", "method", "target acc");
    for r in &rows {
        let acc = match (r.mean, r.std) {
            (Some(m), Some(s)) => format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * s),
            _ => "-".into(),
        };
        println!("{:<22} {:<14} {:>18}  {}", r.scenario, r.method.name(), acc, r.status);
    }
    println!("\n{REFERENCE_NOTE}");
    Ok(rows)
}
