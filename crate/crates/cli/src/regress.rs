//! `regress`: run the toy regression harness from a JSON config.
//!
//! ```json
//! {
//!   "target": {"type":"gbb","x":0,"y":0,"a":1,"b":1,"c":0},
//!   "init":   {"type":"gbb","x":2,"y":0,"a":1,"b":1,"c":0},
//!   "schedule": {"omega1":1,"omega2":5,"switch_fraction":0.5,"total_steps":400},
//!   "optimizer": {"step_size":0.1,"grad_clip":10,"parametrization":"constrained5"}
//! }
//! ```
//!
//! `schedule`, `optimizer` and each of their fields are optional.

use std::io::Write;

use gbbkit::{fit_gbb, FitError, FitTrajectory, GaussBox, LossKind, LossSchedule, OptimizerConfig, Parametrization};
use serde::{Deserialize, Serialize};

use crate::shapes::ShapeSpec;
use crate::{CliError, CliResult};

pub const HEADER: &str = "step,loss_kind,x0,y0,a,b,c,loss,grad_norm,prob_iou,iou";

pub const STALLED: &str = "stalled: gradient underflow";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ParamName {
    Hbb4,
    Angle5,
    Constrained5,
}

impl From<ParamName> for Parametrization {
    fn from(p: ParamName) -> Self {
        match p {
            ParamName::Hbb4 => Parametrization::Hbb4,
            ParamName::Angle5 => Parametrization::Angle5,
            ParamName::Constrained5 => Parametrization::Constrained5,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleConfig {
    omega1: Option<f64>,
    omega2: Option<f64>,
    switch_fraction: Option<f64>,
    total_steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSection {
    step_size: Option<f64>,
    grad_clip: Option<f64>,
    parametrization: Option<ParamName>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    target: ShapeSpec,
    init: ShapeSpec,
    schedule: Option<ScheduleConfig>,
    optimizer: Option<OptimizerSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressConfig {
    pub target: GaussBox,
    pub init: GaussBox,
    pub schedule: LossSchedule,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressSummary {
    pub final_prob_iou: f64,
    pub final_iou: f64,
    pub steps_to_0_9: Option<usize>,
    pub total_steps: usize,
    pub status: String,
}

/// Parses and checks a config. Every failure is a usage error naming the
/// offending field.
pub fn parse_config(text: &str) -> CliResult<RegressConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    let target = raw.target.to_gbb().map_err(|e| CliError::Usage(format!("config.target: {e}")))?;
    let init = raw.init.to_gbb().map_err(|e| CliError::Usage(format!("config.init: {e}")))?;

    let mut schedule = LossSchedule::default();
    if let Some(s) = raw.schedule {
        schedule.omega1 = s.omega1.unwrap_or(schedule.omega1);
        schedule.omega2 = s.omega2.unwrap_or(schedule.omega2);
        schedule.switch_fraction = s.switch_fraction.unwrap_or(schedule.switch_fraction);
        schedule.total_steps = s.total_steps.unwrap_or(schedule.total_steps);
    }
    schedule.validate().map_err(|e| CliError::Usage(format!("config.schedule: {e}")))?;

    let mut optimizer = OptimizerConfig::default();
    if let Some(o) = raw.optimizer {
        optimizer.step_size = o.step_size.unwrap_or(optimizer.step_size);
        optimizer.grad_clip = o.grad_clip.unwrap_or(optimizer.grad_clip);
        optimizer.parametrization = o.parametrization.map(Into::into).unwrap_or(optimizer.parametrization);
    }
    optimizer.validate().map_err(|e| CliError::Usage(format!("config.optimizer: {e}")))?;
    if optimizer.parametrization == Parametrization::Hbb4 && init.c != 0.0 {
        return Err(CliError::Usage("config.init: hbb4 needs an axis-aligned init (c = 0)".into()));
    }
    Ok(RegressConfig { target, init, schedule, optimizer })
}

pub fn summarize(t: &FitTrajectory, total_steps: usize) -> RegressSummary {
    let last = t.last().expect("trajectory holds the initial state");
    let status = if t.is_stalled() {
        STALLED
    } else if last.prob_iou >= 0.99 {
        "converged"
    } else {
        "not converged"
    };
    RegressSummary {
        final_prob_iou: last.prob_iou,
        final_iou: last.iou,
        steps_to_0_9: t.steps_to(0.9),
        total_steps,
        status: status.to_string(),
    }
}

pub fn write_trajectory<W: Write>(t: &FitTrajectory, out: &mut W) -> CliResult<()> {
    writeln!(out, "{HEADER}")?;
    for s in &t.steps {
        let kind = match s.loss_kind {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
        };
        let p = &s.params;
        writeln!(
            out,
            "{},{kind},{},{},{},{},{},{},{},{},{}",
            s.step, p.x0, p.y0, p.a, p.b, p.c, s.loss, s.grad_norm, s.prob_iou, s.iou
        )?;
    }
    Ok(())
}

/// Runs the fit; the trajectory goes to `csv`, and the summary is returned.
pub fn run_regress<W: Write>(config: &RegressConfig, csv: &mut W) -> CliResult<RegressSummary> {
    let t = match fit_gbb(&config.target, &config.init, &config.schedule, &config.optimizer) {
        Ok(t) => t,
        Err(FitError::Diverged { step, trajectory }) => {
            write_trajectory(&trajectory, csv)?;
            return Err(CliError::Runtime(format!("fit diverged at step {step}")));
        }
        Err(e) => return Err(CliError::Runtime(e.to_string())),
    };
    write_trajectory(&t, csv)?;
    Ok(summarize(&t, config.schedule.total_steps))
}
