//! `fit`: self-paced training on a CSV dataset.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use spl_conjugacy::curriculum::{CurriculumRegion, RegionSpec};
use spl_conjugacy::regularizers::by_name;
use spl_conjugacy::trainer::{
    latent_descent_fit, latent_gradient, spl_fit, Dataset, LossKind, Schedule, TrainConfig, POSITIVE_WEIGHT,
};
use spl_conjugacy::TrainError;

use crate::config::{parse_json, Globals};
use crate::curriculum::curriculum_error;
use crate::output::{num, write_csv, write_json};
use crate::{MathFailure, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Kumar,
    Portion,
    Fixed,
}

/// Schedule and model flags shared by `fit` and `compare`.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct ScheduleArgs {
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleKind>,
    /// Kumar growth factor.
    #[arg(long)]
    pub growth: Option<f64>,
    #[arg(long)]
    pub max_stages: Option<usize>,
    /// Portion schedule: increasing fractions of admitted samples.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Fixed schedule: non-decreasing ages.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Ridge coefficient.
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl ScheduleArgs {
    pub fn schedule(&self) -> Result<Schedule> {
        let kind = self.schedule.unwrap_or(match (&self.fractions, &self.lambdas) {
            (Some(_), None) => ScheduleKind::Portion,
            (None, Some(_)) => ScheduleKind::Fixed,
            _ => ScheduleKind::Kumar,
        });
        let schedule = match kind {
            ScheduleKind::Kumar => {
                if self.fractions.is_some() || self.lambdas.is_some() {
                    bail!("the kumar schedule takes `growth` and `max_stages`, not `fractions` or `lambdas`");
                }
                let Schedule::Kumar { growth, max_stages } = Schedule::default() else {
                    unreachable!()
                };
                Schedule::Kumar {
                    growth: self.growth.unwrap_or(growth),
                    max_stages: self.max_stages.unwrap_or(max_stages),
                }
            }
            ScheduleKind::Portion => Schedule::Portion {
                fractions: self
                    .fractions
                    .clone()
                    .context("the portion schedule needs `fractions`")?,
            },
            ScheduleKind::Fixed => Schedule::Fixed {
                lambdas: self.lambdas.clone().context("the fixed schedule needs `lambdas`")?,
            },
        };
        if kind != ScheduleKind::Kumar && (self.growth.is_some() || self.max_stages.is_some()) {
            bail!("`growth` and `max_stages` only apply to the kumar schedule");
        }
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn alpha(&self) -> Result<f64> {
        let alpha = self.alpha.unwrap_or(1e-3);
        if !(alpha >= 0.0 && alpha.is_finite()) {
            bail!("`alpha` must be non-negative and finite");
        }
        Ok(alpha)
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct FitArgs {
    /// Dataset CSV: feature columns, then the target; optional `group` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub regularizer: Option<String>,
    #[arg(long, value_parser = ["squared", "logistic"])]
    pub loss: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
    /// Curriculum region over the sample weights, as JSON.
    #[arg(long, value_parser = parse_json, conflicts_with = "group_curriculum")]
    pub region: Option<Value>,
    /// Tie the weights of samples sharing a `group` label.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub group_curriculum: Option<bool>,
    /// Inner iterations per stage.
    #[arg(long)]
    pub max_inner: Option<usize>,
    /// Also minimize the latent objective directly at the final age and
    /// report the gradient norm at the alternating fixed point.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub cross_check: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
struct FitConfig {
    data: PathBuf,
    regularizer: String,
    loss: LossKind,
    schedule: Schedule,
    alpha: f64,
    region: Option<RegionSpec>,
    group_curriculum: bool,
    max_inner: usize,
    cross_check: bool,
}

fn train_error(e: TrainError) -> anyhow::Error {
    match e {
        TrainError::SingularSystem | TrainError::InfeasibleCurriculum(_) => MathFailure(e.to_string()).into(),
        TrainError::Curriculum(c) => curriculum_error(c),
        other => other.into(),
    }
}

pub fn run(args: FitArgs, globals: &Globals) -> Result<Status> {
    if args.region.is_some() && args.group_curriculum == Some(true) {
        bail!("give at most one of `region` and `group_curriculum`");
    }
    let cfg = FitConfig {
        data: args.data.clone().context("`data` is required")?,
        regularizer: args.regularizer.clone().unwrap_or_else(|| "hard".into()),
        loss: match args.loss.as_deref() {
            None | Some("squared") => LossKind::Squared,
            Some("logistic") => LossKind::Logistic,
            Some(other) => bail!("unknown loss `{other}`"),
        },
        schedule: args.schedule.schedule()?,
        alpha: args.schedule.alpha()?,
        region: args
            .region
            .clone()
            .map(serde_json::from_value)
            .transpose()
            .context("invalid region spec")?,
        group_curriculum: args.group_curriculum.unwrap_or(false),
        max_inner: args.max_inner.unwrap_or(500),
        cross_check: args.cross_check.unwrap_or(false),
    };
    let text = fs::read_to_string(&cfg.data).with_context(|| format!("cannot read {}", cfg.data.display()))?;
    let data = Dataset::<f64>::from_csv(&text).with_context(|| format!("bad dataset {}", cfg.data.display()))?;

    let mut config = TrainConfig::new(by_name::<f64>(&cfg.regularizer)?);
    config.loss = cfg.loss;
    config.schedule = cfg.schedule.clone();
    config.alpha = cfg.alpha;
    config.max_inner = cfg.max_inner;
    config.curriculum = if let Some(spec) = &cfg.region {
        Some(spec.build::<f64>(Some(data.len())).map_err(curriculum_error)?)
    } else if cfg.group_curriculum {
        let partition = data.partition().context("`group_curriculum` needs a `group` column")?;
        Some(CurriculumRegion::groups(data.len(), partition).map_err(curriculum_error)?)
    } else {
        None
    };
    config.validate(&data).map_err(train_error)?;
    let state = spl_fit(&data, &config).map_err(train_error)?;

    write_csv(
        &globals.out,
        "trace.csv",
        &["iter", "lambda", "spl_objective", "latent_objective"],
        state.trace.iter().map(|t| {
            vec![
                t.iter.to_string(),
                num(t.lambda),
                num(t.spl_objective),
                num(t.latent_objective),
            ]
        }),
    )?;

    let cross_check = if cfg.cross_check {
        let g = latent_gradient(
            &data,
            &state.w,
            state.lambda,
            &config.regularizer,
            config.curriculum.as_ref(),
            config.alpha,
            config.loss,
        )
        .map_err(train_error)?;
        let descent =
            latent_descent_fit(&data, &config, state.lambda, Some(&state.w), 20_000, 1e-10).map_err(train_error)?;
        let gap = descent
            .w
            .iter()
            .zip(&state.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Some(json!({
            "lambda": state.lambda,
            "gradient_norm": g.iter().map(|x| x * x).sum::<f64>().sqrt(),
            "descent_objective": descent.objective,
            "descent_gradient_norm": descent.gradient_norm,
            "descent_iterations": descent.iterations,
            "max_parameter_gap": gap,
        }))
    } else {
        None
    };
    let included: Vec<usize> = (0..data.len()).filter(|&i| state.v[i] > POSITIVE_WEIGHT).collect();
    let excluded: Vec<usize> = (0..data.len()).filter(|&i| state.v[i] <= POSITIVE_WEIGHT).collect();
    let last = state.trace.last();
    write_json(
        &globals.out,
        "result.json",
        &json!({
            "config": json!({"command": "fit", "globals": globals, "fit": cfg}),
            "converged": !state.hit_cap,
            "hit_cap": state.hit_cap,
            "lambda": state.lambda,
            "stage_lambdas": state.stage_lambdas,
            "w": state.w,
            "v": state.v,
            "losses": state.losses,
            "included": included,
            "excluded": excluded,
            "spl_objective": last.map(|t| t.spl_objective),
            "latent_objective": last.map(|t| t.latent_objective),
            "iterations": state.trace.len(),
            "cross_check": cross_check,
        }),
    )?;
    if state.hit_cap {
        eprintln!("inner iteration cap of {} reached in at least one stage", cfg.max_inner);
        return Ok(Status::Capped);
    }
    Ok(Status::Ok)
}
