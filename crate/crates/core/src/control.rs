//! Quasi-static feedback linearization in strain space and in task space.
//!
//! Strain space: with `e = q_bar - q_bar_d`,
//! `u = D(-Kbar e - A e - A q_bar_d + q_bar_d_dot) - N G` turns the strain
//! dynamics into `e_dot = -Kbar e`; the section-end wrenches are recovered from
//! `Jbar^T Fbar = u`.
//!
//! Task space: with tip coordinates `y = (r, x)`, `y_dot = Abar q_bar + Bbar F + Cbar G`
//! and `P = [0 I]`, the tip wrench
//! `F = (P Bbar)^+ (-P Abar q_bar - P Cbar G + x_d_dot - Kt e)` gives `e_dot = -Kt e`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x6, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::liegroup::{log_so3, log_so3_unchecked, w_map_inverse, Pose, Wrench};
use crate::linalg::pseudo_inverse;
use crate::rod::StrainVector;
use crate::statics::{solve_wrench_from_u, ModelTerms, StaticsWorkspace};

/// Relative singular-value cutoff for `(P Bbar)^+`.
pub const TASK_PINV_CUTOFF: f64 = 1e-8;

fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Config(format!("{what} gain matrix must be square")));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(Error::Config(format!("{what} gain matrix is not symmetric ({asym:e})")));
    }
    let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
    if !(min_eig > 0.0) {
        return Err(Error::Config(format!(
            "{what} gain matrix is not positive definite (min eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrainGains {
    kbar: DMatrix<f64>,
}

impl StrainGains {
    pub fn new(kbar: DMatrix<f64>) -> Result<Self> {
        check_spd(&kbar, "strain")?;
        Ok(Self { kbar })
    }

    /// `k * I`.
    pub fn scalar(k: f64, dof: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dof, dof) * k)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.kbar
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskGains {
    kt: Matrix3<f64>,
}

impl TaskGains {
    pub fn new(kt: Matrix3<f64>) -> Result<Self> {
        check_spd(&DMatrix::from_column_slice(3, 3, kt.as_slice()), "task")?;
        Ok(Self { kt })
    }

    pub fn scalar(k: f64) -> Result<Self> {
        Self::new(Matrix3::identity() * k)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.kt
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrainCommand {
    /// Generalized force `u = Jbar^T Fbar`.
    pub u: DVector<f64>,
    /// Stacked section-end wrenches `Fbar`.
    pub wrenches: DVector<f64>,
}

pub fn strain_control(
    ws: &StaticsWorkspace,
    q_bar: &DVector<f64>,
    q_bar_d: &DVector<f64>,
    q_bar_d_dot: &DVector<f64>,
    gains: &StrainGains,
) -> Result<StrainCommand> {
    let terms = ws.evaluate(&StrainVector::from_offset(q_bar)?)?;
    strain_control_with(ws, &terms, q_bar, q_bar_d, q_bar_d_dot, gains)
}

/// [`strain_control`] with the model terms at `q_bar` already evaluated.
pub fn strain_control_with(
    ws: &StaticsWorkspace,
    terms: &ModelTerms,
    q_bar: &DVector<f64>,
    q_bar_d: &DVector<f64>,
    q_bar_d_dot: &DVector<f64>,
    gains: &StrainGains,
) -> Result<StrainCommand> {
    let dof = ws.spec().dof();
    for (name, v) in [("q_bar", q_bar), ("q_bar_d", q_bar_d), ("q_bar_d_dot", q_bar_d_dot)] {
        if v.len() != dof {
            return Err(Error::InvalidInput(format!("{name} has length {}, expected {dof}", v.len())));
        }
    }
    if gains.matrix().nrows() != dof {
        return Err(Error::InvalidInput(format!(
            "strain gain is {0}x{0}, expected {dof}x{dof}",
            gains.matrix().nrows()
        )));
    }
    let a = ws.relaxation_rates();
    let d = &ws.generalized().damping;
    let e = q_bar - q_bar_d;
    let inner = -(gains.matrix() * &e) - e.component_mul(a) - q_bar_d.component_mul(a) + q_bar_d_dot;
    let u = inner.component_mul(d) - &terms.gravity_force;
    let wrenches = solve_wrench_from_u(&terms.stacked_jacobian, &u)?;
    Ok(StrainCommand { u, wrenches })
}

/// Exponential coordinates of the tip orientation and the tip position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskCoordinates {
    pub r: Vector3<f64>,
    pub x_tip: Vector3<f64>,
}

/// Tip coordinates `y = (r, x(L))`. Without `r_prev` the principal logarithm
/// is used; with it, `r` is moved by a multiple of `2 pi` along its axis to
/// the branch nearest `r_prev`.
pub fn task_coordinates(pose_tip: &Pose, r_prev: Option<&Vector3<f64>>) -> Result<TaskCoordinates> {
    let r = match r_prev {
        None => log_so3(&pose_tip.rotation)?,
        Some(prev) => {
            let principal = log_so3_unchecked(&pose_tip.rotation);
            let angle = principal.norm();
            if angle == 0.0 {
                principal
            } else {
                let axis = principal / angle;
                [-2.0, -1.0, 0.0, 1.0, 2.0]
                    .iter()
                    .map(|k| axis * (angle + 2.0 * PI * k))
                    .min_by(|a, b| (a - prev).norm().total_cmp(&(b - prev).norm()))
                    .expect("non-empty candidate list")
            }
        }
    };
    Ok(TaskCoordinates {
        r,
        x_tip: pose_tip.position,
    })
}

/// `T = diag(W(r)^{-1}, R(L))`, so that `y_dot = T eta(L)`.
pub fn task_t_matrix(tc: &TaskCoordinates, rotation_tip: &Matrix3<f64>) -> Result<Matrix6<f64>> {
    let mut t = Matrix6::zeros();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&w_map_inverse(&tc.r)?);
    t.fixed_view_mut::<3, 3>(3, 3).copy_from(rotation_tip);
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskMatrices {
    /// `T J(L) A`, 6 x 6n.
    pub a_bar: DMatrix<f64>,
    /// `T J(L) D^{-1} J(L)^T`.
    pub b_bar: Matrix6<f64>,
    /// `T J(L) D^{-1} N`.
    pub c_bar: Matrix6<f64>,
}

pub fn task_matrices(
    ws: &StaticsWorkspace,
    terms: &ModelTerms,
    tc: &TaskCoordinates,
) -> Result<TaskMatrices> {
    let t = task_t_matrix(tc, &terms.tip_pose.rotation)?;
    let n = ws.spec().num_sections();
    let rates = ws.relaxation_rates();
    let dinv = ws.damping_inverse();
    let mut a_bar = DMatrix::zeros(6, 6 * n);
    let mut b_bar = Matrix6::zeros();
    let mut c_bar = Matrix6::zeros();
    for j in 0..n {
        let block = terms.tip_jacobian.fixed_view::<6, 6>(0, 6 * j);
        let mut tj = t * block;
        let mut tj_dinv = tj;
        for c in 0..6 {
            tj.column_mut(c).scale_mut(rates[6 * j + c]);
            tj_dinv.column_mut(c).scale_mut(dinv[6 * j + c]);
        }
        a_bar.fixed_view_mut::<6, 6>(0, 6 * j).copy_from(&tj);
        b_bar += tj_dinv * block.transpose();
        c_bar += tj_dinv * terms.gravity_matrix.fixed_view::<6, 6>(6 * j, 0);
    }
    Ok(TaskMatrices { a_bar, b_bar, c_bar })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskCommand {
    pub wrench: Wrench,
    /// Tip position error `e = x(L) - x_d`.
    pub error: Vector3<f64>,
    /// Requested tip velocity contribution `-P Abar q_bar - P Cbar G + x_d_dot - Kt e`.
    pub demand: Vector3<f64>,
    /// `P Bbar`.
    pub pb: Matrix3x6<f64>,
}

impl TaskCommand {
    /// `|P Bbar F - demand|`; zero up to rounding whenever `P Bbar` has full row rank.
    pub fn residual(&self) -> f64 {
        (self.pb * self.wrench.to_vector() - self.demand).norm()
    }
}

pub fn task_control(
    ws: &StaticsWorkspace,
    q_bar: &DVector<f64>,
    tc: &TaskCoordinates,
    x_d: &Vector3<f64>,
    x_d_dot: &Vector3<f64>,
    gains: &TaskGains,
) -> Result<TaskCommand> {
    let terms = ws.evaluate(&StrainVector::from_offset(q_bar)?)?;
    task_control_with(ws, &terms, q_bar, tc, x_d, x_d_dot, gains)
}

/// [`task_control`] with the model terms at `q_bar` already evaluated.
pub fn task_control_with(
    ws: &StaticsWorkspace,
    terms: &ModelTerms,
    q_bar: &DVector<f64>,
    tc: &TaskCoordinates,
    x_d: &Vector3<f64>,
    x_d_dot: &Vector3<f64>,
    gains: &TaskGains,
) -> Result<TaskCommand> {
    let m = task_matrices(ws, terms, tc)?;
    let pb: Matrix3x6<f64> = m.b_bar.fixed_view::<3, 6>(3, 0).into();
    let pa_q = (m.a_bar.rows(3, 3) * q_bar).fixed_rows::<3>(0).into_owned();
    let pc_g: Vector3<f64> = m.c_bar.fixed_view::<3, 6>(3, 0) * ws.spec().gravity.to_vector();
    let error = tc.x_tip - x_d;
    let demand = -pa_q - pc_g + x_d_dot - gains.matrix() * error;

    let (pinv, sigma) = pseudo_inverse(&DMatrix::from_column_slice(3, 6, pb.as_slice()), TASK_PINV_CUTOFF);
    let ratio = if sigma[0] > 0.0 { sigma[2] / sigma[0] } else { 0.0 };
    if ratio < TASK_PINV_CUTOFF {
        return Err(Error::RankDeficient { ratio });
    }
    let d = DVector::from_column_slice(demand.as_slice());
    let mut f = &pinv * &d;
    // one step of iterative refinement; the correction lies in the row space,
    // so the minimum-norm property is kept
    let pb_dyn = DMatrix::from_column_slice(3, 6, pb.as_slice());
    let correction = &pinv * (&d - &pb_dyn * &f);
    f += correction;
    Ok(TaskCommand {
        wrench: Wrench::from_vector(&Vector6::from_column_slice(f.as_slice())),
        error,
        demand,
        pb,
    })
}
