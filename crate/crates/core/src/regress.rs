//! Toy regression harness: fit one GBB to a target by plain gradient descent
//! under the two-stage schedule (`L2` first, then `L1`).

use thiserror::Error;

use crate::error::{GbbError, Result};
use crate::gauss::{
    constrained_to_cov, cov_from_angles, gbb_to_angle_cov, gbb_to_ellipse, validate_gbb, AngleCov,
    ConstrainedCovParams, GaussBox, DEFAULT_LEVEL_RADIUS,
};
use crate::metrics::{grad_general, norm, similarity, LossKind};
use crate::raster::{iou_raster, Shape};

/// Lower bound on principal variances in the unconstrained
/// parametrizations. Keeps `a*b - c^2` above the validity threshold.
pub const VARIANCE_FLOOR: f64 = 1e-5;

/// Gradient norm under which a fit that has not converged counts as stalled.
pub const STALL_GRAD_NORM: f64 = 1e-8;

/// Two-stage loss configuration: `omega2 * L2` for the first
/// `switch_fraction * total_steps` steps, then `omega1 * L1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSchedule {
    pub omega1: f64,
    pub omega2: f64,
    pub switch_fraction: f64,
    pub total_steps: usize,
}

impl Default for LossSchedule {
    fn default() -> Self {
        Self::with_weight(1.0, 400)
    }
}

impl LossSchedule {
    /// `omega1 = omega`, `omega2 = 5 * omega`, switching halfway.
    pub fn with_weight(omega: f64, total_steps: usize) -> Self {
        Self {
            omega1: omega,
            omega2: 5.0 * omega,
            switch_fraction: 0.5,
            total_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega1 > 0.0 && self.omega1.is_finite()) {
            return Err(out_of_range("omega1", self.omega1, "omega1 > 0"));
        }
        if !(self.omega2 > 0.0 && self.omega2.is_finite()) {
            return Err(out_of_range("omega2", self.omega2, "omega2 > 0"));
        }
        if !(0.0..=1.0).contains(&self.switch_fraction) {
            return Err(out_of_range("switch_fraction", self.switch_fraction, "0 <= switch_fraction <= 1"));
        }
        if self.total_steps == 0 {
            return Err(out_of_range("total_steps", 0.0, "total_steps >= 1"));
        }
        Ok(())
    }
}

fn out_of_range(name: &'static str, value: f64, expected: &'static str) -> GbbError {
    GbbError::OutOfRange { name, value, expected }
}

/// Parameter space the optimizer moves in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parametrization {
    /// `(x, y, w, h)` of an axis-aligned box, mapped through `w^2/12, h^2/12`.
    Hbb4,
    /// `(x, y, a', b', theta)`, re-canonicalized after every step.
    Angle5,
    /// `(x, y, alpha, beta, c)` with `a = e^alpha`, `b = e^-alpha c^2 + e^beta`.
    Constrained5,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub grad_clip: f64,
    pub parametrization: Parametrization,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            grad_clip: 10.0,
            parametrization: Parametrization::Constrained5,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(out_of_range("step_size", self.step_size, "step_size > 0"));
        }
        if !(self.grad_clip > 0.0) {
            return Err(out_of_range("grad_clip", self.grad_clip, "grad_clip > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub step: usize,
    pub loss_kind: LossKind,
    pub params: GaussBox,
    /// Unweighted value of the active loss.
    pub loss: f64,
    /// Norm of the weighted gradient in parameter space, before clipping.
    pub grad_norm: f64,
    pub prob_iou: f64,
    /// Raster IoU of the default-radius ellipses; zero when one ellipse is
    /// below the grid resolution.
    pub iou: f64,
}

/// One record per state, the initial one included.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitTrajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl FitTrajectory {
    pub fn last(&self) -> Option<&TrajectoryStep> {
        self.steps.last()
    }

    /// First step index whose ProbIoU reaches `threshold`.
    pub fn steps_to(&self, threshold: f64) -> Option<usize> {
        self.steps.iter().find(|s| s.prob_iou >= threshold).map(|s| s.step)
    }

    /// No progress and a vanishing gradient: the signature of `L1` far from
    /// the target.
    pub fn is_stalled(&self) -> bool {
        match (self.steps.first(), self.steps.last()) {
            (Some(first), Some(last)) => {
                last.prob_iou < 0.99
                    && last.prob_iou - first.prob_iou < 1e-12
                    && last.grad_norm < STALL_GRAD_NORM
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error(transparent)]
    Invalid(#[from] GbbError),
    #[error("loss became non-finite at step {step}")]
    Diverged { step: usize, trajectory: FitTrajectory },
}

/// Active loss and weight at `step`.
pub fn schedule_loss(step: usize, schedule: &LossSchedule) -> Result<(LossKind, f64)> {
    schedule.validate()?;
    if step >= schedule.total_steps {
        return Err(out_of_range("step", step as f64, "0 <= step < total_steps"));
    }
    let switch = schedule.switch_fraction * schedule.total_steps as f64;
    Ok(if (step as f64) < switch {
        (LossKind::L2, schedule.omega2)
    } else {
        (LossKind::L1, schedule.omega1)
    })
}

#[derive(Debug, Clone, Copy)]
struct State {
    kind: Parametrization,
    v: [f64; 5],
    // the starting box, kept until the first nonzero step so that the
    // parameter round trip does not perturb it
    exact: Option<GaussBox>,
}

impl State {
    fn from_gauss(g: &GaussBox, kind: Parametrization) -> Result<Self> {
        let v = match kind {
            Parametrization::Hbb4 => {
                if g.c != 0.0 {
                    return Err(GbbError::NotAxisAligned { c: g.c });
                }
                [g.x0, g.y0, (12.0 * g.a).sqrt(), (12.0 * g.b).sqrt(), 0.0]
            }
            Parametrization::Angle5 => {
                let ac = gbb_to_angle_cov(g)?;
                [g.x0, g.y0, ac.a_prime, ac.b_prime, ac.theta]
            }
            Parametrization::Constrained5 => {
                let p = ConstrainedCovParams::from_cov(g.a, g.b, g.c)?;
                [g.x0, g.y0, p.alpha, p.beta, p.c]
            }
        };
        Ok(Self { kind, v, exact: Some(*g) })
    }

    fn to_gauss(&self) -> Result<GaussBox> {
        if let Some(g) = self.exact {
            return Ok(g);
        }
        let [x0, y0, p, q, r] = self.v;
        let (a, b, c) = match self.kind {
            Parametrization::Hbb4 => (p * p / 12.0, q * q / 12.0, 0.0),
            Parametrization::Angle5 => cov_from_angles(AngleCov { a_prime: p, b_prime: q, theta: r })?,
            Parametrization::Constrained5 => constrained_to_cov(ConstrainedCovParams { alpha: p, beta: q, c: r }),
        };
        Ok(GaussBox { x0, y0, a, b, c })
    }

    /// Pulls a gradient w.r.t. `(x0, y0, a, b, c)` back to the parameters.
    fn pull_back(&self, g: [f64; 5]) -> [f64; 5] {
        let [gx, gy, ga, gb, gc] = g;
        let [_, _, p, q, r] = self.v;
        match self.kind {
            Parametrization::Hbb4 => [gx, gy, ga * p / 6.0, gb * q / 6.0, 0.0],
            Parametrization::Angle5 => {
                let (s, c) = r.sin_cos();
                let (s2, c2) = (s * s, c * c);
                let (sin2, cos2) = (2.0 * s * c, c2 - s2);
                let d_ap = ga * c2 + gb * s2 + gc * 0.5 * sin2;
                let d_bp = ga * s2 + gb * c2 - gc * 0.5 * sin2;
                let d_theta = (q - p) * sin2 * ga + (p - q) * sin2 * gb + (p - q) * cos2 * gc;
                [gx, gy, d_ap, d_bp, d_theta]
            }
            Parametrization::Constrained5 => {
                let e_neg_alpha = (-p).exp();
                let d_alpha = ga * p.exp() - gb * e_neg_alpha * r * r;
                let d_beta = gb * q.exp();
                let d_c = gc + gb * 2.0 * r * e_neg_alpha;
                [gx, gy, d_alpha, d_beta, d_c]
            }
        }
    }

    fn step(&mut self, delta: [f64; 5]) -> Result<()> {
        if delta.iter().all(|d| *d == 0.0) {
            return Ok(());
        }
        self.exact = None;
        for (v, d) in self.v.iter_mut().zip(delta) {
            *v -= d;
        }
        match self.kind {
            Parametrization::Hbb4 => {
                let min_side = (12.0 * VARIANCE_FLOOR).sqrt();
                // the sign of w is irrelevant to w^2/12
                self.v[2] = self.v[2].abs().max(min_side);
                self.v[3] = self.v[3].abs().max(min_side);
            }
            Parametrization::Angle5 => {
                if self.v.iter().any(|v| !v.is_finite()) {
                    return Ok(());
                }
                self.v[2] = self.v[2].max(VARIANCE_FLOOR);
                self.v[3] = self.v[3].max(VARIANCE_FLOOR);
                let g = self.to_gauss()?;
                let ac = gbb_to_angle_cov(&g)?;
                self.v[2] = ac.a_prime;
                self.v[3] = ac.b_prime;
                self.v[4] = ac.theta;
            }
            Parametrization::Constrained5 => {
                let lo = VARIANCE_FLOOR.ln();
                self.v[2] = self.v[2].clamp(lo, crate::gauss::EXPONENT_CLAMP);
                self.v[3] = self.v[3].clamp(lo, crate::gauss::EXPONENT_CLAMP);
            }
        }
        Ok(())
    }
}

fn ellipse_iou(p: &GaussBox, q: &GaussBox) -> Result<f64> {
    let ep = gbb_to_ellipse(p, DEFAULT_LEVEL_RADIUS)?;
    let eq = gbb_to_ellipse(q, DEFAULT_LEVEL_RADIUS)?;
    match iou_raster(&Shape::Ellipse(ep), &Shape::Ellipse(eq), None) {
        Err(GbbError::EmptyRaster { .. }) => Ok(0.0),
        other => other,
    }
}

/// Gradient descent from `init` toward `target` under `schedule`.
///
/// Each step applies `params -= step_size * clip(weight * dLoss/dparams)`,
/// with the gradient clipped by norm to `grad_clip`. The trajectory holds
/// `total_steps + 1` records; the final record uses the second-stage loss.
pub fn fit_gbb(
    target: &GaussBox,
    init: &GaussBox,
    schedule: &LossSchedule,
    opt: &OptimizerConfig,
) -> std::result::Result<FitTrajectory, FitError> {
    target.check()?;
    init.check()?;
    schedule.validate()?;
    opt.validate()?;

    let mut state = State::from_gauss(init, opt.parametrization)?;
    let mut trajectory = FitTrajectory {
        steps: Vec::with_capacity(schedule.total_steps + 1),
    };
    for k in 0..=schedule.total_steps {
        let (kind, weight) = schedule_loss(k.min(schedule.total_steps - 1), schedule)?;
        let g = state.to_gauss()?;
        if ![g.x0, g.y0, g.a, g.b, g.c].iter().all(|v| v.is_finite()) {
            return Err(FitError::Diverged { step: k, trajectory });
        }
        let validity = validate_gbb(&g);
        if !validity.valid {
            return Err(FitError::Invalid(GbbError::NotPositiveDefinite(
                validity.diagnostic.unwrap_or_default(),
            )));
        }
        let report = similarity(&g, target)?;
        let loss = match kind {
            LossKind::L1 => report.h_d,
            LossKind::L2 => report.b_d,
        };
        let grad = grad_general(&g, target, kind)?.grad;
        let pulled = state.pull_back(grad).map(|v| weight * v);
        let grad_norm = norm(&pulled);
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(FitError::Diverged { step: k, trajectory });
        }
        trajectory.steps.push(TrajectoryStep {
            step: k,
            loss_kind: kind,
            params: g,
            loss,
            grad_norm,
            prob_iou: report.prob_iou,
            iou: ellipse_iou(&g, target)?,
        });
        if k == schedule.total_steps {
            break;
        }
        let scale = if grad_norm > opt.grad_clip { opt.grad_clip / grad_norm } else { 1.0 };
        state.step(pulled.map(|v| opt.step_size * scale * v))?;
    }
    Ok(trajectory)
}

/// Gradient magnitudes of both losses alongside the two overlap measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientProbe {
    pub norm_l2_grad: f64,
    pub norm_l1_grad: f64,
    /// Set when `p == q`, where the `L1` gradient is undefined and reported
    /// as zero.
    pub l1_singular: bool,
    pub iou: f64,
    pub prob_iou: f64,
}

pub fn gradient_probe(p: &GaussBox, q: &GaussBox) -> Result<GradientProbe> {
    let l2 = grad_general(p, q, LossKind::L2)?;
    let l1 = grad_general(p, q, LossKind::L1)?;
    Ok(GradientProbe {
        norm_l2_grad: norm(&l2.grad),
        norm_l1_grad: norm(&l1.grad),
        l1_singular: l1.singular,
        iou: ellipse_iou(p, q)?,
        prob_iou: similarity(p, q)?.prob_iou,
    })
}
