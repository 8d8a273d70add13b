//! `compare`: SPL against plain ridge on seeded synthetic data with outliers.

use anyhow::{bail, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use spl_conjugacy::trainer::{compare_suite, CompareSpec, OutlierSpec};

use crate::config::Globals;
use crate::fit::ScheduleArgs;
use crate::output::{num, write_csv, write_json};
use crate::Status;

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub outlier_fraction: Option<f64>,
    /// Outlier shift in noise units.
    #[arg(long)]
    pub outlier_scale: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Number of seeds, counting up from `--seed`.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub regularizers: Option<Vec<String>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
}

pub fn run(args: CompareArgs, globals: &Globals) -> Result<Status> {
    let base = CompareSpec::default();
    let count = args.seeds.unwrap_or(base.seeds.len());
    if count == 0 {
        bail!("`seeds` must be at least 1");
    }
    let spec = CompareSpec {
        data: OutlierSpec {
            n: args.n.unwrap_or(base.data.n),
            d: args.d.unwrap_or(base.data.d),
            outlier_fraction: args.outlier_fraction.unwrap_or(base.data.outlier_fraction),
            outlier_scale: args.outlier_scale.unwrap_or(base.data.outlier_scale),
            noise: args.noise.unwrap_or(base.data.noise),
        },
        seeds: (0..count as u64).map(|i| globals.seed + i).collect(),
        regularizers: args.regularizers.clone().unwrap_or(base.regularizers),
        alpha: args.schedule.alpha()?,
        schedule: args.schedule.schedule()?,
    };
    if spec.regularizers.is_empty() {
        bail!("`regularizers` must name at least one regularizer");
    }
    if !(spec.data.outlier_scale.is_finite() && spec.data.noise.is_finite()) {
        bail!("`outlier_scale` and `noise` must be finite");
    }
    let (rows, summary) = compare_suite(&spec)?;
    write_csv(
        &globals.out,
        "compare.csv",
        &["seed", "method", "param_error", "final_lambda", "included"],
        rows.iter().map(|r| {
            vec![
                r.seed.to_string(),
                r.method.clone(),
                num(r.param_error),
                num(r.final_lambda),
                r.included.to_string(),
            ]
        }),
    )?;
    let per_seed: Vec<_> = spec
        .seeds
        .iter()
        .map(|&seed| {
            let ridge = rows
                .iter()
                .find(|r| r.seed == seed && r.method == "ridge")
                .map(|r| r.param_error);
            let methods: serde_json::Map<_, _> = rows
                .iter()
                .filter(|r| r.seed == seed && r.method != "ridge")
                .map(|r| {
                    let win = ridge.is_some_and(|e| r.param_error < e);
                    (
                        r.method.clone(),
                        json!({"param_error": r.param_error, "beats_ridge": win}),
                    )
                })
                .collect();
            json!({"seed": seed, "ridge_error": ridge, "methods": methods})
        })
        .collect();
    write_json(
        &globals.out,
        "compare.json",
        &json!({
            "config": json!({"command": "compare", "globals": globals, "compare": spec}),
            "summary": summary,
            "per_seed": per_seed,
        }),
    )?;
    Ok(Status::Ok)
}
