//! Fixed-step RK4 integration of the closed-loop strain dynamics and the
//! three experiment drivers (inverse kinematics, shape regulation, tip tracking).

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::{
    strain_control_with, task_control_with, task_coordinates, StrainGains, TaskGains,
};
use crate::error::{Error, Result};
use crate::ik::{solve_ik, solve_ik_tracking, IkResult, IkSettings};
use crate::kinematics::{fk_shape, ShapeSample};
use crate::liegroup::{exp_so3, Pose, Twist};
use crate::rod::{potential_energy, RodSpec, StrainVector};
use crate::statics::StaticsWorkspace;

/// One classical RK4 step of `x' = f(t, x)`.
pub fn rk4_step<F>(mut f: F, state: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let half = 0.5 * dt;
    let k1 = f(t, state)?;
    let k2 = f(t + half, &(state + &k1 * half))?;
    let k3 = f(t + half, &(state + &k2 * half))?;
    let k4 = f(t + dt, &(state + &k3 * dt))?;
    Ok(state + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    #[default]
    Strain,
    Task,
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strain" => Ok(Self::Strain),
            "task" => Ok(Self::Task),
            other => Err(Error::Config(format!("unknown controller `{other}`, expected strain or task"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Time step, s.
    pub dt: f64,
    /// Simulated time span, s.
    pub duration: f64,
    pub controller: ControllerKind,
    /// Record every this many steps; the last step is always recorded.
    pub record_every: usize,
    /// Centerline samples per section for shape output.
    pub samples_per_section: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 5.0,
            controller: ControllerKind::Strain,
            record_every: 1,
            samples_per_section: 40,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("sim.dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::Config(format!(
                "sim.duration must be at least sim.dt, got {}",
                self.duration
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("sim.record_every must be at least 1".into()));
        }
        if self.samples_per_section == 0 {
            return Err(Error::Config("sim.samples_per_section must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps, `duration / dt` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round().max(1.0) as usize
    }

    fn records(&self, k: usize) -> bool {
        k.is_multiple_of(self.record_every) || k == self.steps()
    }
}

/// Recorded closed-loop samples. All vectors have the same length.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub strains: Vec<StrainVector>,
    pub tip_poses: Vec<Pose>,
    /// Exponential coordinates of the tip rotation, unwrapped along the trace.
    pub tip_rotvecs: Vec<Vector3<f64>>,
    /// Control wrenches at the recorded state: stacked section-end wrenches
    /// in strain mode, the single tip wrench in task mode.
    pub wrenches: Vec<DVector<f64>>,
    /// Tracking error norm: strain error in strain mode, tip position error in task mode.
    pub errors: Vec<f64>,
    /// Strain potential energy, J.
    pub energies: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(
        &mut self,
        spec: &RodSpec,
        t: f64,
        q: StrainVector,
        tip: Pose,
        wrench: DVector<f64>,
        error: f64,
    ) -> Result<()> {
        let r = task_coordinates(&tip, self.tip_rotvecs.last())?.r;
        self.energies.push(potential_energy(spec, &q)?);
        self.times.push(t);
        self.strains.push(q);
        self.tip_poses.push(tip);
        self.tip_rotvecs.push(r);
        self.wrenches.push(wrench);
        self.errors.push(error);
        Ok(())
    }

    /// Index of the sample closest to time `t`.
    pub fn index_near(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
    }
}

fn time_at(k: usize, dt: f64) -> f64 {
    k as f64 * dt
}

/// Integrates the unforced strain dynamics `q_bar' = A q_bar + D^{-1} N G`.
pub fn simulate_unforced(ws: &StaticsWorkspace, q_bar0: &DVector<f64>, cfg: &SimConfig) -> Result<Trace> {
    cfg.validate()?;
    let spec = ws.spec();
    let zero_wrench = DVector::zeros(spec.dof());
    let rhs = |_t: f64, q_bar: &DVector<f64>| ws.strain_rhs_distributed(q_bar, &zero_wrench);

    let mut trace = Trace::default();
    let mut q_bar = q_bar0.clone();
    for k in 0..=cfg.steps() {
        let t = time_at(k, cfg.dt);
        if cfg.records(k) {
            let q = StrainVector::from_offset(&q_bar)?;
            let tip = crate::kinematics::tip_pose(spec, &q)?;
            let norm = q_bar.norm();
            trace
                .push(spec, t, q, tip, zero_wrench.clone(), norm)
                .map_err(|e| e.at_time(t))?;
        }
        if k < cfg.steps() {
            q_bar = rk4_step(rhs, &q_bar, t, cfg.dt).map_err(|e| e.at_time(t))?;
        }
    }
    Ok(trace)
}

/// Strain-space regulation or tracking towards `q_bar_d(t)` with wrenches at
/// every section end. `desired(t)` returns `(q_bar_d, q_bar_d_dot)`.
pub fn simulate_strain_control<D>(
    ws: &StaticsWorkspace,
    q_bar0: &DVector<f64>,
    gains: &StrainGains,
    cfg: &SimConfig,
    mut desired: D,
) -> Result<Trace>
where
    D: FnMut(f64) -> Result<(DVector<f64>, DVector<f64>)>,
{
    cfg.validate()?;
    let spec = ws.spec();
    let mut trace = Trace::default();
    let mut q_bar = q_bar0.clone();
    for k in 0..=cfg.steps() {
        let t = time_at(k, cfg.dt);
        let mut step = |trace: &mut Trace, q_bar: &DVector<f64>| -> Result<Option<DVector<f64>>> {
            if cfg.records(k) {
                let q = StrainVector::from_offset(q_bar)?;
                let terms = ws.evaluate(&q)?;
                let (qd, qd_dot) = desired(t)?;
                let cmd = strain_control_with(ws, &terms, q_bar, &qd, &qd_dot, gains)?;
                let err = (q_bar - &qd).norm();
                trace.push(spec, t, q, terms.tip_pose, cmd.wrenches, err)?;
            }
            if k == cfg.steps() {
                return Ok(None);
            }
            let rhs = |s: f64, x: &DVector<f64>| {
                let terms = ws.evaluate(&StrainVector::from_offset(x)?)?;
                let (qd, qd_dot) = desired(s)?;
                let cmd = strain_control_with(ws, &terms, x, &qd, &qd_dot, gains)?;
                Ok(ws.rhs_distributed_with(&terms, x, &cmd.wrenches))
            };
            rk4_step(rhs, q_bar, t, cfg.dt).map(Some)
        };
        match step(&mut trace, &q_bar).map_err(|e| e.at_time(t))? {
            Some(next) => q_bar = next,
            None => break,
        }
    }
    Ok(trace)
}

/// Circular tip path `center + radius (0, cos(2 pi t / period), sin(2 pi t / period))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleTrajectory {
    /// m
    pub center: [f64; 3],
    /// m
    pub radius: f64,
    /// s
    pub period: f64,
}

impl Default for CircleTrajectory {
    fn default() -> Self {
        Self {
            center: [0.25, 0.0, 0.0],
            radius: 0.1,
            period: 20.0,
        }
    }
}

impl CircleTrajectory {
    pub fn validate(&self) -> Result<()> {
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::Config("trajectory.center must be finite".into()));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!("trajectory.radius must be non-negative, got {}", self.radius)));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::Config(format!("trajectory.period must be positive, got {}", self.period)));
        }
        Ok(())
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        let phase = 2.0 * PI * t / self.period;
        Vector3::from(self.center) + self.radius * Vector3::new(0.0, phase.cos(), phase.sin())
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let omega = 2.0 * PI / self.period;
        let phase = omega * t;
        self.radius * omega * Vector3::new(0.0, -phase.sin(), phase.cos())
    }
}

/// Summary statistics gathered during a tip-tracking run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackingStats {
    /// Largest `|P Bbar F - demand|` over all control evaluations (task mode).
    pub max_residual: f64,
    /// Largest residual divided by `max(1, |demand|)`.
    pub max_relative_residual: f64,
    /// Tip position error `|x(L) - x_d|` at every step.
    pub step_errors: Vec<f64>,
    /// Newton iterations of each per-step IK solve (strain mode).
    pub ik_iterations: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingReport {
    pub trace: Trace,
    pub stats: TrackingStats,
    pub desired: Vec<Vector3<f64>>,
}

/// Tip tracking with a single tip wrench computed by the task-space law.
pub fn simulate_task_control(
    ws: &StaticsWorkspace,
    q_bar0: &DVector<f64>,
    gains: &TaskGains,
    cfg: &SimConfig,
    path: &CircleTrajectory,
) -> Result<TrackingReport> {
    cfg.validate()?;
    path.validate()?;
    let spec = ws.spec();
    let mut trace = Trace::default();
    let mut stats = TrackingStats::default();
    let mut desired = Vec::new();
    let mut q_bar = q_bar0.clone();
    let mut r_prev: Option<Vector3<f64>> = None;

    for k in 0..=cfg.steps() {
        let t = time_at(k, cfg.dt);
        let mut step = || -> Result<Option<DVector<f64>>> {
            let q = StrainVector::from_offset(&q_bar)?;
            let terms = ws.evaluate(&q)?;
            let tc = task_coordinates(&terms.tip_pose, r_prev.as_ref())?;
            let x_d = path.position(t);
            let cmd = task_control_with(ws, &terms, &q_bar, &tc, &x_d, &path.velocity(t), gains)?;
            let anchor = tc.r;
            stats.step_errors.push(cmd.error.norm());
            let mut note = |residual: f64, demand: f64| {
                stats.max_residual = stats.max_residual.max(residual);
                stats.max_relative_residual = stats.max_relative_residual.max(residual / demand.max(1.0));
            };
            note(cmd.residual(), cmd.demand.norm());
            if cfg.records(k) {
                let wrench = DVector::from_column_slice(cmd.wrench.to_vector().as_slice());
                trace.push(spec, t, q, terms.tip_pose, wrench, cmd.error.norm())?;
                desired.push(x_d);
            }
            r_prev = Some(anchor);
            if k == cfg.steps() {
                return Ok(None);
            }
            // the first RK4 stage is the state and time evaluated above
            let mut first_stage = Some(ws.rhs_tip_with(&terms, &q_bar, &cmd.wrench));
            let rhs = |s: f64, x: &DVector<f64>| {
                if let Some(k1) = first_stage.take() {
                    return Ok(k1);
                }
                let terms = ws.evaluate(&StrainVector::from_offset(x)?)?;
                let tc = task_coordinates(&terms.tip_pose, Some(&anchor))?;
                let cmd = task_control_with(ws, &terms, x, &tc, &path.position(s), &path.velocity(s), gains)?;
                note(cmd.residual(), cmd.demand.norm());
                Ok(ws.rhs_tip_with(&terms, x, &cmd.wrench))
            };
            rk4_step(rhs, &q_bar, t, cfg.dt).map(Some)
        };
        match step().map_err(|e| e.at_time(t))? {
            Some(next) => q_bar = next,
            None => break,
        }
    }
    Ok(TrackingReport { trace, stats, desired })
}

/// Tip tracking through strain-space control: at every step a warm-started
/// IK solve turns the desired tip pose into a desired strain, whose rate is
/// the backward difference of consecutive solutions (zero at the first step).
/// Within a step the desired strain is extrapolated linearly.
#[allow(clippy::too_many_arguments)]
pub fn simulate_strain_tracking(
    ws: &StaticsWorkspace,
    q_bar0: &DVector<f64>,
    gains: &StrainGains,
    cfg: &SimConfig,
    path: &CircleTrajectory,
    target_rotation: &Matrix3<f64>,
    ik: &IkSettings,
) -> Result<TrackingReport> {
    cfg.validate()?;
    path.validate()?;
    let spec = ws.spec();
    let n = spec.num_sections();
    let mut trace = Trace::default();
    let mut stats = TrackingStats::default();
    let mut desired = Vec::new();
    let mut q_bar = q_bar0.clone();
    let mut warm = StrainVector::reference(n);
    let mut qd_prev: Option<DVector<f64>> = None;

    for k in 0..=cfg.steps() {
        let t = time_at(k, cfg.dt);
        let mut step = || -> Result<Option<DVector<f64>>> {
            let x_d = path.position(t);
            let target = Pose::new(*target_rotation, x_d)?;
            let sol = solve_ik_tracking(spec, &target, &warm, ik)?.into_converged()?;
            stats.ik_iterations.push(sol.iterations);
            let qd = sol.q.offset();
            let qd_dot = match &qd_prev {
                Some(prev) => (&qd - prev) / cfg.dt,
                None => DVector::zeros(qd.len()),
            };
            warm = sol.q;
            qd_prev = Some(qd.clone());

            let q = StrainVector::from_offset(&q_bar)?;
            let terms = ws.evaluate(&q)?;
            stats.step_errors.push((terms.tip_pose.position - x_d).norm());
            if cfg.records(k) {
                let cmd = strain_control_with(ws, &terms, &q_bar, &qd, &qd_dot, gains)?;
                let err = (&q_bar - &qd).norm();
                trace.push(spec, t, q, terms.tip_pose, cmd.wrenches, err)?;
                desired.push(x_d);
            }
            if k == cfg.steps() {
                return Ok(None);
            }
            let rhs = |s: f64, x: &DVector<f64>| {
                let terms = ws.evaluate(&StrainVector::from_offset(x)?)?;
                let qd_s = &qd + &qd_dot * (s - t);
                let cmd = strain_control_with(ws, &terms, x, &qd_s, &qd_dot, gains)?;
                Ok(ws.rhs_distributed_with(&terms, x, &cmd.wrenches))
            };
            rk4_step(rhs, &q_bar, t, cfg.dt).map(Some)
        };
        match step().map_err(|e| e.at_time(t))? {
            Some(next) => q_bar = next,
            None => break,
        }
    }
    Ok(TrackingReport { trace, stats, desired })
}

/// Desired tip pose of the two-section inverse kinematics experiment:
/// rotated by `pi/4` about `e3` and placed at `(0.25, 0.2, 0)` m.
pub fn ik_experiment_target() -> Pose {
    Pose::from_parts(
        exp_so3(&Vector3::new(0.0, 0.0, FRAC_PI_4)),
        Vector3::new(0.25, 0.2, 0.0),
    )
}

/// The two initial guesses of the inverse kinematics experiment: the
/// reference strain, and a first section bent with curvature 10 rad/m about `e2`.
pub fn ik_experiment_guesses(num_sections: usize) -> [StrainVector; 2] {
    let mut bent = vec![Twist::reference_strain(); num_sections];
    bent[0] = Twist::new(Vector3::new(0.0, 10.0, 0.0), Vector3::x());
    [StrainVector::reference(num_sections), StrainVector::from_twists(&bent)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct IkSolution {
    pub initial: StrainVector,
    pub result: IkResult,
    pub shape: Vec<ShapeSample>,
    /// Strain potential energy, J.
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IkReport {
    pub target: Pose,
    pub solutions: Vec<IkSolution>,
}

impl IkReport {
    /// Largest pointwise centerline distance between the first two shapes.
    pub fn shape_separation(&self) -> f64 {
        match &self.solutions[..] {
            [a, b, ..] => a
                .shape
                .iter()
                .zip(&b.shape)
                .map(|(p, q)| (p.pose.position - q.pose.position).norm())
                .fold(0.0, f64::max),
            _ => 0.0,
        }
    }
}

/// Solves the inverse kinematics experiment from both initial guesses.
pub fn run_ik_experiment(spec: &RodSpec, settings: &IkSettings, samples_per_section: usize) -> Result<IkReport> {
    let target = ik_experiment_target();
    let solutions = ik_experiment_guesses(spec.num_sections())
        .into_iter()
        .map(|initial| {
            let result = solve_ik(spec, &target, &initial, settings)?.into_converged()?;
            let shape = fk_shape(spec, &result.q, samples_per_section)?;
            let energy = potential_energy(spec, &result.q)?;
            Ok(IkSolution {
                initial,
                result,
                shape,
                energy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IkReport { target, solutions })
}

/// Desired strains of the shape regulation experiment (full strain twists of section 1 and 2).
pub fn shape_regulation_targets() -> [Twist; 2] {
    [
        Twist::new(Vector3::new(0.0, -5.0, 0.0), Vector3::x()),
        Twist::new(Vector3::new(0.0, 10.0, 0.0), Vector3::x()),
    ]
}

/// Instants at which shape snapshots are taken, s.
pub const SHAPE_SNAPSHOT_TIMES: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeRegulationReport {
    pub trace: Trace,
    pub q_bar_d: DVector<f64>,
    /// `(t, centerline)` at [`SHAPE_SNAPSHOT_TIMES`] that fall inside the run.
    pub snapshots: Vec<(f64, Vec<ShapeSample>)>,
}

/// Set-point strain regulation from the straight rod towards `q_d`.
pub fn run_shape_regulation(
    spec: &RodSpec,
    q_d: &StrainVector,
    gains: &StrainGains,
    cfg: &SimConfig,
) -> Result<ShapeRegulationReport> {
    q_d.check_sections(spec)?;
    let ws = StaticsWorkspace::new(spec);
    let q_bar_d = q_d.offset();
    let zero = DVector::zeros(spec.dof());
    let trace = simulate_strain_control(&ws, &zero, gains, cfg, |_| Ok((q_bar_d.clone(), zero.clone())))?;
    let mut snapshots = Vec::new();
    for t in SHAPE_SNAPSHOT_TIMES {
        if t > cfg.duration + 0.5 * cfg.dt {
            continue;
        }
        if let Some(i) = trace.index_near(t) {
            if (trace.times[i] - t).abs() <= 0.5 * cfg.dt {
                snapshots.push((t, fk_shape(spec, &trace.strains[i], cfg.samples_per_section)?));
            }
        }
    }
    Ok(ShapeRegulationReport {
        trace,
        q_bar_d,
        snapshots,
    })
}

/// Tip tracking of a circle from the straight rod.
pub fn run_tip_tracking(
    spec: &RodSpec,
    cfg: &SimConfig,
    path: &CircleTrajectory,
    strain_gains: &StrainGains,
    task_gains: &TaskGains,
    ik: &IkSettings,
) -> Result<TrackingReport> {
    let ws = StaticsWorkspace::new(spec);
    let zero = DVector::zeros(spec.dof());
    match cfg.controller {
        ControllerKind::Task => simulate_task_control(&ws, &zero, task_gains, cfg, path),
        ControllerKind::Strain => {
            simulate_strain_tracking(&ws, &zero, strain_gains, cfg, path, &Matrix3::identity(), ik)
        }
    }
}
