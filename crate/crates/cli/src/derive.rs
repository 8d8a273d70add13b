//! `derive` and `validate`: build a regularizer from a weight or a penalty,
//! dump its triple and check it.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use spl_conjugacy::regularizers::{
    by_name, design_from_regularizer, design_from_weight, validate_sp_regularizer, DesignOptions, ValidationOptions,
    ValidationReport,
};
use spl_conjugacy::sampled::uniform_grid;
use spl_conjugacy::{SPRegularizer, SampledFunction};

use crate::config::Globals;
use crate::output::{num, write_csv, write_json};
use crate::Status;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    FromWeight,
    FromRegularizer,
}

type Curve = Box<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveArgs {
    #[arg(long, value_enum)]
    pub pipeline: Option<Pipeline>,
    /// Named curve (`step`, `linear-clamp`, `exp-decay`, `inverse`, `neg-log`,
    /// `half-square`, `entropy`, `zero`, or a catalog name) or an `x,value` CSV.
    #[arg(long)]
    pub input: Option<String>,
    /// Age used for the dumped tables.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Top of the loss grid for the weight pipeline and the tables.
    #[arg(long)]
    pub l_max: Option<f64>,
    /// Resolution of the design grids.
    #[arg(long)]
    pub points: Option<usize>,
    /// Rows in each dumped table.
    #[arg(long)]
    pub table_points: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
struct DeriveConfig {
    pipeline: Pipeline,
    input: String,
    lambda: f64,
    l_max: f64,
    points: usize,
    table_points: usize,
}

impl DeriveArgs {
    fn resolve(self) -> Result<DeriveConfig> {
        let cfg = DeriveConfig {
            pipeline: self
                .pipeline
                .context("`pipeline` is required (from-weight or from-regularizer)")?,
            input: self.input.context("`input` is required")?,
            lambda: self.lambda.unwrap_or(1.0),
            l_max: self.l_max.unwrap_or(8.0),
            points: self.points.unwrap_or(2049),
            table_points: self.table_points.unwrap_or(101),
        };
        if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
            bail!("`lambda` must be positive and finite");
        }
        if !(cfg.l_max > 0.0 && cfg.l_max.is_finite()) || cfg.points < 3 || cfg.table_points < 2 {
            bail!("`l_max` must be positive, `points` at least 3 and `table_points` at least 2");
        }
        Ok(cfg)
    }
}

fn samples(path: &Path, outside: Option<f64>) -> Result<Curve> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let f =
        SampledFunction::<f64>::from_csv(&text).with_context(|| format!("malformed samples in {}", path.display()))?;
    let (lo, hi) = f.domain();
    let (first, last) = (f.eval(lo), f.eval(hi));
    Ok(Box::new(move |x| {
        if x < lo {
            outside.unwrap_or(first)
        } else if x > hi {
            outside.unwrap_or(last)
        } else {
            f.eval(x)
        }
    }))
}

fn is_file(input: &str) -> bool {
    input.ends_with(".csv") || Path::new(input).is_file()
}

fn weight_curve(input: &str) -> Result<Curve> {
    if is_file(input) {
        return samples(Path::new(input), None);
    }
    Ok(match input {
        "step" => Box::new(|l: f64| if l < 1.0 { 1.0 } else { 0.0 }),
        "linear-clamp" => Box::new(|l: f64| (1.0 - l).clamp(0.0, 1.0)),
        "exp-decay" => Box::new(|l: f64| (-l.max(0.0)).exp()),
        "inverse" => Box::new(|l: f64| if l <= 1.0 { 1.0 } else { 1.0 / l }),
        name => {
            let reg = by_name::<f64>(name).with_context(|| format!("unknown weight input `{name}`"))?;
            Box::new(move |l| reg.weight_base(l))
        }
    })
}

fn penalty_curve(input: &str) -> Result<Curve> {
    if is_file(input) {
        return samples(Path::new(input), Some(f64::INFINITY));
    }
    Ok(match input {
        "neg-log" => Box::new(|v: f64| if v > 0.0 { -v.ln() } else { f64::INFINITY }),
        "half-square" => Box::new(|v: f64| 0.5 * (1.0 - v) * (1.0 - v)),
        "entropy" => Box::new(|v: f64| if v > 0.0 { v * v.ln() - v + 1.0 } else { 1.0 }),
        "zero" => Box::new(|_| 0.0),
        name => {
            let reg = by_name::<f64>(name).with_context(|| format!("unknown regularizer input `{name}`"))?;
            Box::new(move |v| reg.r_sp_base(v))
        }
    })
}

fn build(pipeline: Pipeline, input: &str, opts: &DesignOptions<f64>) -> Result<(SPRegularizer<f64>, Vec<String>)> {
    let designed = match pipeline {
        Pipeline::FromWeight => design_from_weight(weight_curve(input)?, opts),
        Pipeline::FromRegularizer => design_from_regularizer(penalty_curve(input)?, opts),
    }
    .map_err(|e| crate::MathFailure(format!("design pipeline rejected `{input}`: {e}")))?;
    Ok((designed.regularizer, designed.warnings))
}

pub fn derive(args: DeriveArgs, globals: &Globals) -> Result<Status> {
    let cfg = args.resolve()?;
    let opts = DesignOptions {
        l_max: cfg.l_max,
        points: cfg.points,
    };
    let (reg, warnings) = build(cfg.pipeline, &cfg.input, &opts)?;
    let lambda = cfg.lambda;
    let vs: Vec<f64> = uniform_grid(0.0, 1.0, cfg.table_points);
    let ls: Vec<f64> = uniform_grid(0.0, cfg.l_max * lambda, cfg.table_points);
    write_csv(
        &globals.out,
        "r_sp.csv",
        &["v", "r_sp"],
        vs.iter().map(|&v| vec![num(v), num(reg.r_sp(v, lambda))]),
    )?;
    write_csv(
        &globals.out,
        "weight.csv",
        &["l", "weight"],
        ls.iter().map(|&l| vec![num(l), num(reg.weight_ext(lambda, l))]),
    )?;
    write_csv(
        &globals.out,
        "latent.csv",
        &["l", "latent"],
        ls.iter().map(|&l| vec![num(l), num(reg.latent_ext(lambda, l))]),
    )?;
    let report = validate_sp_regularizer(&reg, &ValidationOptions::default());
    let verdict = report.verdict;
    write_json(
        &globals.out,
        "validation.json",
        &json!({
            "config": json!({"command": "derive", "globals": globals, "derive": cfg}),
            "design_warnings": warnings,
            "report": report,
        }),
    )?;
    print_failures(&report);
    Ok(if verdict { Status::Ok } else { Status::Invalid })
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    /// Catalog regularizer to check.
    #[arg(long, conflicts_with_all = ["pipeline", "input"])]
    pub regularizer: Option<String>,
    /// Check a designed regularizer instead.
    #[arg(long, value_enum, requires = "input")]
    pub pipeline: Option<Pipeline>,
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
struct ValidateConfig {
    regularizer: Option<String>,
    pipeline: Option<Pipeline>,
    input: Option<String>,
    lambdas: Vec<f64>,
    grid_points: usize,
    tolerance: f64,
}

pub fn validate(args: ValidateArgs, globals: &Globals) -> Result<Status> {
    let defaults = ValidationOptions::default();
    let cfg = ValidateConfig {
        regularizer: args.regularizer,
        pipeline: args.pipeline,
        input: args.input,
        lambdas: args.lambdas.unwrap_or(defaults.lambdas.clone()),
        grid_points: args.grid_points.unwrap_or(defaults.grid_points),
        tolerance: args.tolerance.unwrap_or(defaults.tolerance),
    };
    let reg = match (&cfg.regularizer, cfg.pipeline, &cfg.input) {
        (Some(name), None, None) => by_name::<f64>(name)?,
        (None, Some(p), Some(input)) => build(p, input, &DesignOptions::default())?.0,
        _ => bail!("give either `regularizer` or both `pipeline` and `input`"),
    };
    if cfg.lambdas.is_empty() || cfg.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        bail!("`lambdas` must be positive and finite");
    }
    if cfg.grid_points < 3 || !(cfg.tolerance > 0.0) {
        bail!("`grid_points` must be at least 3 and `tolerance` positive");
    }
    let opts = ValidationOptions {
        grid_points: cfg.grid_points,
        lambdas: cfg.lambdas.clone(),
        tolerance: cfg.tolerance,
        ..defaults
    };
    let report = validate_sp_regularizer(&reg, &opts);
    write_json(
        &globals.out,
        "validation.json",
        &json!({
            "config": json!({"command": "validate", "globals": globals, "validate": cfg}),
            "report": report,
        }),
    )?;
    print_failures(&report);
    Ok(if report.verdict { Status::Ok } else { Status::Invalid })
}

fn print_failures(report: &ValidationReport) {
    for check in report.failed() {
        eprintln!(
            "check `{}` failed: residual {:e}{}",
            check.name,
            check.residual,
            check
                .location
                .as_deref()
                .map(|l| format!(" at {l}"))
                .unwrap_or_default()
        );
    }
    for check in report.checks.iter().filter_map(|c| c.warning.as_ref().map(|w| (c, w))) {
        eprintln!("warning in `{}`: {}", check.0.name, check.1);
    }
}
