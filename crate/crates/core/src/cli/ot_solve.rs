use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::default_out_dir;
use crate::cost::squared_euclidean_cost;
use crate::data::load_bundle;
use crate::ot::{marginal_violation, transport_cost, CostMatrix, DiscreteMeasure, ExactSolver, SinkhornParams, TransportPlan};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, Args)]
pub struct OtSolveArgs {
    /// Cost matrix as CSV, one row per source point.
    #[arg(long, conflicts_with = "bundle", required_unless_present = "bundle")]
    pub cost: Option<PathBuf>,
    /// Dataset bundle; the cost is squared Euclidean between source and target features.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Source weights (comma or newline separated); uniform when omitted.
    #[arg(long)]
    pub mu: Option<PathBuf>,
    /// Target weights; uniform when omitted.
    #[arg(long)]
    pub nu: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SolveMethod::Exact)]
    pub method: SolveMethod,
    #[arg(long, default_value_t = 0.1)]
    pub reg: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Output directory for `plan.csv` and `summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub method: SolveMethod,
    pub rows: usize,
    pub cols: usize,
    pub objective: f64,
    pub marginal_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reg: Option<f64>,
    pub plan_path: PathBuf,
}

fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("{}: row {}, column {}: {field:?} is not a number", path.display(), r + 1, c + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(Error::Parse(format!("{}: empty matrix", path.display())));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, m), flat).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_weights(path: &Path) -> Result<Array1<f64>> {
    let text = fs::read_to_string(path)?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("{}: {s:?} is not a number", path.display())))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Array1::from(values))
}

fn write_plan_csv(path: &Path, plan: &TransportPlan) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for row in plan.entries().outer_iter() {
        w.write_record(row.iter().map(|v| format!("{v:e}")))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Solves the instance, writes `plan.csv` and `summary.json` into the output
/// directory and prints the summary on stdout.
pub fn cmd_ot_solve(args: &OtSolveArgs) -> Result<SolveSummary> {
    let cost = match (&args.cost, &args.bundle) {
        (Some(p), _) => CostMatrix::new(read_csv_matrix(p)?)?,
        (None, Some(b)) => {
            let bundle = load_bundle(b)?;
            squared_euclidean_cost(bundle.source(), bundle.target())?
        }
        (None, None) => return Err(Error::InvalidParameter("one of --cost or --bundle is required".into())),
    };
    let (n, m) = cost.shape();
    let mu = match &args.mu {
        Some(p) => DiscreteMeasure::new(read_weights(p)?)?,
        None => DiscreteMeasure::uniform(n),
    };
    let nu = match &args.nu {
        Some(p) => DiscreteMeasure::new(read_weights(p)?)?,
        None => DiscreteMeasure::uniform(m),
    };
    let (plan, iterations, converged, reg) = match args.method {
        SolveMethod::Exact => {
            let sol = ExactSolver::default().solve(&cost, &mu, &nu)?;
            (sol.plan, sol.pivots, true, None)
        }
        SolveMethod::Sinkhorn => {
            let sol = SinkhornParams::new(args.reg, args.max_iter, args.tol).solve(&cost, &mu, &nu)?;
            (sol.plan, sol.iterations, sol.converged, Some(args.reg))
        }
    };
    let out = args.out.clone().unwrap_or_else(|| default_out_dir("ot-solve"));
    fs::create_dir_all(&out)?;
    let plan_path = out.join("plan.csv");
    write_plan_csv(&plan_path, &plan)?;
    let summary = SolveSummary {
        method: args.method,
        rows: n,
        cols: m,
        objective: transport_cost(&plan, &cost)?,
        marginal_violation: marginal_violation(&plan),
        iterations,
        converged,
        reg,
        plan_path,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(out.join("summary.json"), &text)?;
    println!("{text}");
    Ok(summary)
}
