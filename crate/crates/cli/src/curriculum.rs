//! `curriculum`: latent objective with and without a curriculum region over a
//! 2-D loss lattice.

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use spl_conjugacy::curriculum::{CurriculumAction, RegionSpec, Side};
use spl_conjugacy::regularizers::by_name;
use spl_conjugacy::sampled::uniform_grid;
use spl_conjugacy::CurriculumError;

use crate::config::{parse_json, Globals};
use crate::output::{num, write_csv, write_json};
use crate::{MathFailure, Status};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumArgs {
    #[arg(long)]
    pub regularizer: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Region as JSON, e.g. `{"kind":"halfspace","k":[1,-1]}`.
    #[arg(long, value_parser = parse_json)]
    pub region: Option<Value>,
    /// Losses run over `[0, l_max]` on both axes.
    #[arg(long)]
    pub l_max: Option<f64>,
    /// Points per axis.
    #[arg(long)]
    pub lattice: Option<usize>,
    /// Skip the nonsingularity check.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub no_check: Option<bool>,
    /// Evaluate by dense grid search only.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub numeric: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
struct CurriculumConfig {
    regularizer: String,
    lambda: f64,
    region: RegionSpec,
    l_max: f64,
    lattice: usize,
    no_check: bool,
    numeric: bool,
}

pub fn curriculum_error(e: CurriculumError) -> anyhow::Error {
    match e {
        CurriculumError::SingularRegion(_)
        | CurriculumError::EmptyFeasible
        | CurriculumError::Infeasible
        | CurriculumError::NoRoot => MathFailure(e.to_string()).into(),
        other => other.into(),
    }
}

pub fn run(args: CurriculumArgs, globals: &Globals) -> Result<Status> {
    let region: RegionSpec =
        serde_json::from_value(args.region.context("`region` is required")?).context("invalid region spec")?;
    let cfg = CurriculumConfig {
        regularizer: args.regularizer.unwrap_or_else(|| "exp".into()),
        lambda: args.lambda.unwrap_or(1.0),
        region,
        l_max: args.l_max.unwrap_or(4.0),
        lattice: args.lattice.unwrap_or(21),
        no_check: args.no_check.unwrap_or(false),
        numeric: args.numeric.unwrap_or(false),
    };
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) || !(cfg.l_max > 0.0 && cfg.l_max.is_finite()) {
        bail!("`lambda` and `l_max` must be positive and finite");
    }
    if cfg.lattice < 2 {
        bail!("`lattice` must be at least 2");
    }
    let reg = by_name::<f64>(&cfg.regularizer)?;
    let region = cfg.region.build::<f64>(Some(2)).map_err(curriculum_error)?;
    let mut action = CurriculumAction::new(reg, cfg.lambda, region, !cfg.no_check).map_err(curriculum_error)?;
    if cfg.numeric {
        action = action.numeric_only();
    }

    let axis: Vec<f64> = uniform_grid(0.0, cfg.l_max, cfg.lattice);
    let m = axis.len();
    let mut sides = Vec::with_capacity(m * m);
    let mut rows = Vec::with_capacity(m * m);
    let mut max_excess = f64::NEG_INFINITY;
    let mut routes = std::collections::BTreeMap::<String, usize>::new();
    for &l1 in &axis {
        for &l2 in &axis {
            let l = [l1, l2];
            let f = action.latent(&l);
            let point = action.evaluate(&l).map_err(curriculum_error)?;
            max_excess = max_excess.max(point.value - f);
            let route = match serde_json::to_value(point.route)? {
                Value::String(s) => s,
                other => other.to_string(),
            };
            *routes.entry(route).or_default() += 1;
            sides.push(point.side);
            rows.push(vec![
                num(l1),
                num(l2),
                num(f),
                num(point.value),
                point.side.as_str().to_string(),
            ]);
        }
    }
    write_csv(&globals.out, "lattice.csv", &["l1", "l2", "F", "Fnew", "side"], rows)?;

    // lattice points with a neighbour on the other side of the critical boundary
    let mut boundary = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let s = sides[i * m + j];
            let differs = (i + 1 < m && sides[(i + 1) * m + j] != s)
                || (j + 1 < m && sides[i * m + j + 1] != s)
                || (i > 0 && sides[(i - 1) * m + j] != s)
                || (j > 0 && sides[i * m + j - 1] != s);
            if differs {
                boundary.push(json!({"l": [axis[i], axis[j]], "side": s.as_str()}));
            }
        }
    }
    let penalized = sides.iter().filter(|&&s| s == Side::Penalized).count();
    write_json(
        &globals.out,
        "summary.json",
        &json!({
            "config": json!({"command": "curriculum", "globals": globals, "curriculum": cfg}),
            "points": m * m,
            "penalized": penalized,
            "unaffected": m * m - penalized,
            "max_excess": max_excess,
            "routes": routes,
            "boundary_samples": boundary,
        }),
    )?;
    Ok(Status::Ok)
}
