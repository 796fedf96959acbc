//! Encoder-side tuning of the per-frame interpolation weights.
//!
//! Each intermediate frame gets its own `(wi, wl)`, initialised from the
//! linear schedule and refined by plain gradient descent on the mean squared
//! error (samples scaled to `[0, 1]`) against the original frame. Gradients
//! are central finite differences of the backend's real-valued output, so any
//! backend can be tuned without knowing its internals.

use std::io::Write;

use serde::Serialize;

use crate::backend::{blend_real, Backend, FrameQuery, LinearBackend};
use crate::codec::{TextRepr, WeightTrack};
use crate::error::{Error, Result};
use crate::model::{Frame, RealFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub training_steps: usize,
    pub fd_step: f64,
    pub update_wi: bool,
    pub update_wl: bool,
    pub convergence_eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.001,
            training_steps: 100,
            fd_step: 1e-4,
            update_wi: true,
            update_wl: true,
            convergence_eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.training_steps == 0 {
            return Err(Error::Config("training steps must be at least 1".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::Config(format!("finite-difference step {} must be positive", self.fd_step)));
        }
        // Also rejects NaN.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.convergence_eps >= 0.0) {
            return Err(Error::Config("convergence epsilon must be non-negative".into()));
        }
        Ok(())
    }
}

fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y) / 255.0;
            d * d
        })
        .sum();
    sum / a.len() as f64
}

/// Mean squared error with samples scaled to `[0, 1]`.
pub fn frame_loss(candidate: &Frame, target: &Frame) -> Result<f64> {
    candidate.check_same_geometry(target)?;
    Ok(mean_sq(&candidate.to_real().samples, &target.to_real().samples))
}

/// [`frame_loss`] on real-valued frames.
pub fn real_frame_loss(candidate: &RealFrame, target: &RealFrame) -> Result<f64> {
    if candidate.geometry != target.geometry {
        return Err(Error::contract(format!("geometry mismatch: {} vs {}", candidate.geometry, target.geometry)));
    }
    Ok(mean_sq(&candidate.samples, &target.samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub frame: usize,
    pub step: usize,
    pub wi: f64,
    pub wl: f64,
    pub loss: f64,
}

/// Outcome for one intermediate frame. `losses[0]` is the loss at the
/// initial weights; `losses[k]` follows the k-th update.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFit {
    pub wi: f64,
    pub wl: f64,
    pub losses: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub weights: WeightTrack,
    pub fits: Vec<FrameFit>,
}

impl Optimized {
    pub fn loss_histories(&self) -> Vec<&[f64]> {
        self.fits.iter().map(|f| f.losses.as_slice()).collect()
    }

    /// Writes `frame,step,wi,wl,loss` rows.
    pub fn write_trace_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "frame,step,wi,wl,loss")?;
        for row in self.fits.iter().flat_map(|f| &f.trace) {
            writeln!(out, "{},{},{},{},{}", row.frame, row.step, row.wi, row.wl, row.loss)?;
        }
        Ok(())
    }
}

/// Everything held fixed while one frame's weights are tuned.
pub struct FrameProblem<'a> {
    pub left: &'a Frame,
    pub right: &'a Frame,
    pub motion_text: &'a TextRepr,
    pub target: &'a RealFrame,
    pub t_frac: f64,
}

impl FrameProblem<'_> {
    fn loss(&self, backend: &mut dyn Backend, wi: f64, wl: f64) -> Result<f64> {
        let q = FrameQuery {
            left: self.left,
            right: self.right,
            motion_text: self.motion_text,
            wi,
            wl,
            t_frac: self.t_frac,
        };
        let d = real_frame_loss(&backend.render(&q)?, self.target)?;
        if !d.is_finite() {
            return Err(Error::NumericalFailure(format!("loss is {d} at wi={wi}, wl={wl}")));
        }
        Ok(d)
    }
}

/// Gradient descent on one frame's `(wi, wl)` starting from `init`.
pub fn optimize_frame(
    backend: &mut dyn Backend,
    problem: &FrameProblem<'_>,
    init: (f64, f64),
    frame: usize,
    cfg: &OptimizerConfig,
) -> Result<FrameFit> {
    cfg.validate()?;
    let (mut wi, mut wl) = init;
    let mut loss = problem.loss(backend, wi, wl)?;
    let mut losses = vec![loss];
    let mut trace = vec![TraceRow { frame, step: 0, wi, wl, loss }];
    let h = cfg.fd_step;

    if (cfg.update_wi || cfg.update_wl) && loss > 0.0 {
        for step in 1..=cfg.training_steps {
            let grad_i = if cfg.update_wi {
                (problem.loss(backend, wi + h, wl)? - problem.loss(backend, wi - h, wl)?) / (2.0 * h)
            } else {
                0.0
            };
            let grad_l = if cfg.update_wl {
                (problem.loss(backend, wi, wl + h)? - problem.loss(backend, wi, wl - h)?) / (2.0 * h)
            } else {
                0.0
            };
            wi = (wi - cfg.learning_rate * grad_i).clamp(0.0, 1.0);
            wl = (wl - cfg.learning_rate * grad_l).clamp(0.0, 1.0);

            let next = problem.loss(backend, wi, wl)?;
            losses.push(next);
            trace.push(TraceRow { frame, step, wi, wl, loss: next });
            let delta = (next - loss).abs();
            loss = next;
            if delta < cfg.convergence_eps || loss == 0.0 {
                break;
            }
        }
    }
    Ok(FrameFit { wi, wl, losses, trace })
}

/// Tunes every intermediate frame of a clip. `targets` are the original
/// frames strictly between the two keyframes.
pub fn optimize_weights(
    backend: &mut dyn Backend,
    left: &Frame,
    right: &Frame,
    motion_text: &TextRepr,
    targets: &[RealFrame],
    cfg: &OptimizerConfig,
) -> Result<Optimized> {
    cfg.validate()?;
    left.check_same_geometry(right)?;
    let init = WeightTrack::linear(targets.len());
    let count = targets.len();
    let fits = targets
        .iter()
        .enumerate()
        .map(|(t, target)| {
            let problem =
                FrameProblem { left, right, motion_text, target, t_frac: (t + 1) as f64 / (count + 1) as f64 };
            optimize_frame(backend, &problem, (init.wi()[t], init.wl()[t]), t, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = WeightTrack::new(fits.iter().map(|f| f.wi).collect(), fits.iter().map(|f| f.wl).collect())?;
    Ok(Optimized { weights, fits })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientReport {
    pub finite_difference: f64,
    pub analytic: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

/// Closed-form `dD/dwi` for the linear backend:
/// `(2/S) * sum((blend - target) * (left - right)) / 255^2`.
pub fn analytic_gradient_linear(left: &Frame, right: &Frame, target: &RealFrame, wi: f64) -> Result<f64> {
    let blend = blend_real(left, right, wi)?;
    if blend.geometry != target.geometry {
        return Err(Error::contract("target geometry differs from keyframes"));
    }
    let s = blend.samples.len() as f64;
    let sum: f64 = blend
        .samples
        .iter()
        .zip(&target.samples)
        .zip(left.samples().iter().zip(right.samples()))
        .map(|((b, t), (&l, &r))| (b - t) * (l as f64 - r as f64))
        .sum();
    Ok(2.0 / s * sum / (255.0 * 255.0))
}

/// Compares the finite-difference `dD/dwi` of the linear backend with the
/// closed form. The relative error is taken against the larger gradient
/// magnitude, floored at 1e-12 so two vanishing gradients compare equal.
pub fn gradient_check(
    left: &Frame,
    right: &Frame,
    target: &RealFrame,
    w: (f64, f64),
    fd_step: f64,
) -> Result<GradientReport> {
    let empty = TextRepr::default();
    let problem = FrameProblem { left, right, motion_text: &empty, target, t_frac: 0.5 };
    let mut backend = LinearBackend;
    let (wi, wl) = w;
    let fd = (problem.loss(&mut backend, wi + fd_step, wl)? - problem.loss(&mut backend, wi - fd_step, wl)?)
        / (2.0 * fd_step);
    let analytic = analytic_gradient_linear(left, right, target, wi)?;
    let abs_error = (fd - analytic).abs();
    let scale = fd.abs().max(analytic.abs()).max(1e-12);
    Ok(GradientReport { finite_difference: fd, analytic, abs_error, rel_error: abs_error / scale })
}
