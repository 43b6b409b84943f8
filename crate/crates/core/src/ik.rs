//! Newton-Raphson inverse kinematics on the tip pose.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{jacobian, tip_pose};
use crate::liegroup::{log_se3, Pose};
use crate::linalg::pseudo_inverse;
use crate::rod::{RodSpec, StrainVector};

/// Maximum number of step halvings per iteration when the error grows.
const MAX_BACKTRACKS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkSettings {
    /// Stop once the unweighted norm of the pose-error twist is below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_scale: f64,
    /// Singular values below `pinv_cutoff * sigma_max` are dropped.
    pub pinv_cutoff: f64,
}

impl Default for IkSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 200,
            step_scale: 1.0,
            pinv_cutoff: 1e-8,
        }
    }
}

impl IkSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("ik.tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("ik.max_iterations must be at least 1".into()));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return Err(Error::Config(format!(
                "ik.step_scale must lie in (0, 1], got {}",
                self.step_scale
            )));
        }
        if !(self.pinv_cutoff >= 0.0 && self.pinv_cutoff < 1.0) {
            return Err(Error::Config(format!(
                "ik.pinv_cutoff must lie in [0, 1), got {}",
                self.pinv_cutoff
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IkResult {
    pub q: StrainVector,
    pub iterations: usize,
    pub final_error: f64,
    pub converged: bool,
    /// Error norm before each iteration and after the last one.
    pub error_history: Vec<f64>,
}

impl IkResult {
    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                error: self.final_error,
            })
        }
    }
}

/// Body-frame pose error `vee(log(g(L)^{-1} g_d))`.
pub fn pose_error(spec: &RodSpec, q: &StrainVector, target: &Pose) -> Result<DVector<f64>> {
    let g = tip_pose(spec, q)?;
    let v = log_se3(&(g.inverse() * *target))?.to_vector();
    Ok(DVector::from_column_slice(v.as_slice()))
}

/// Iterates `q <- q + step * pinv(J(L, q)) V` from `q0` until `|V| < tolerance`.
///
/// A step that increases the error is halved up to four times before being
/// taken anyway. Running out of iterations is not an error here; the best
/// iterate is returned with `converged == false`.
pub fn solve_ik(spec: &RodSpec, target: &Pose, q0: &StrainVector, settings: &IkSettings) -> Result<IkResult> {
    settings.validate()?;
    q0.check_sections(spec)?;
    let mut q = q0.clone();
    let mut err = pose_error(spec, &q, target)?;
    let mut norm = err.norm();
    let mut history = vec![norm];
    let mut iterations = 0;

    while norm >= settings.tolerance && iterations < settings.max_iterations {
        let j = jacobian(spec, &q, spec.length())?;
        let (pinv, _) = pseudo_inverse(&j, settings.pinv_cutoff);
        let dq = pinv * &err;

        let mut step = settings.step_scale;
        let mut accepted = None;
        for attempt in 0..=MAX_BACKTRACKS {
            let trial = StrainVector::new(q.as_vector() + &dq * step)?;
            match pose_error(spec, &trial, target) {
                Ok(e) if e.norm() < norm || attempt == MAX_BACKTRACKS => {
                    accepted = Some((trial, e));
                    break;
                }
                Ok(_) => step *= 0.5,
                Err(Error::RotationNearPi { .. }) if attempt < MAX_BACKTRACKS => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let (next, next_err) = accepted.expect("the last attempt is always accepted");
        q = next;
        err = next_err;
        norm = err.norm();
        history.push(norm);
        iterations += 1;
    }

    Ok(IkResult {
        q,
        iterations,
        final_error: norm,
        converged: norm < settings.tolerance,
        error_history: history,
    })
}

/// Warm-started solve for consecutive samples of a slowly moving target.
pub fn solve_ik_tracking(
    spec: &RodSpec,
    target: &Pose,
    q_warm: &StrainVector,
    settings: &IkSettings,
) -> Result<IkResult> {
    solve_ik(spec, target, q_warm, settings)
}
