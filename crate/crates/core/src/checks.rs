//! Numerical self-checks of the model and the control laws against
//! independent oracles: analytic arcs, finite differences, quadrature and
//! the closed-loop error identities. Used by the `check` subcommand.

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{
    strain_control_with, task_control_with, task_coordinates, StrainGains, TaskGains,
};
use crate::error::Result;
use crate::kinematics::{fk_pose, jacobian, tip_pose};
use crate::liegroup::{exp_se3, log_se3, tangent_closed_form, tangent_quadrature, Twist};
use crate::quadrature::GaussLegendre;
use crate::rod::{cross_section, RodSpec, StrainVector};
use crate::sim::{simulate_strain_control, SimConfig};
use crate::statics::StaticsWorkspace;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Worst observed discrepancy.
    pub value: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<24} worst {:.3e} (tolerance {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

/// Random strain vector with curvatures in `[-k, k]` rad/m and stretch/shear
/// offsets in `[-0.1, 0.1]`.
pub fn random_strain(rng: &mut impl Rng, num_sections: usize, k: f64) -> StrainVector {
    let twists: Vec<Twist> = (0..num_sections)
        .map(|_| {
            let ang = Vector3::from_fn(|_, _| rng.random_range(-k..=k));
            let lin = Vector3::new(1.0, 0.0, 0.0) + Vector3::from_fn(|_, _| rng.random_range(-0.1..=0.1));
            Twist::new(ang, lin)
        })
        .collect();
    StrainVector::from_twists(&twists)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn exp_log_roundtrip(rng: &mut impl Rng, samples: usize) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let dir = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0)).normalize();
        let angle = rng.random_range(0.0..3.0);
        let lin = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
        let xi = Twist::new(dir * angle, lin);
        let back = log_se3(&exp_se3(&xi, 1.0))?;
        worst = worst.max((back - xi).norm());
    }
    Ok(CheckOutcome {
        name: "exp-log-roundtrip",
        value: worst,
        tolerance: 1e-10,
    })
}

/// Bending about `e2` with curvature `kappa` traces
/// `x(X) = (sin(kappa X), 0, cos(kappa X) - 1) / kappa`.
pub fn constant_curvature_arc(spec: &RodSpec, kappa: f64) -> Result<CheckOutcome> {
    let xi = Twist::new(Vector3::new(0.0, kappa, 0.0), Vector3::x());
    let q = StrainVector::from_twists(&vec![xi; spec.num_sections()]);
    let mut worst: f64 = 0.0;
    let steps = 200;
    for i in 0..=steps {
        let x = spec.length() * i as f64 / steps as f64;
        let g = fk_pose(spec, &q, x)?;
        let a = kappa * x;
        let expected = Vector3::new(a.sin(), 0.0, a.cos() - 1.0) / kappa;
        worst = worst.max((g.position - expected).norm());
    }
    Ok(CheckOutcome {
        name: "constant-curvature-arc",
        value: worst,
        tolerance: 1e-10,
    })
}

/// Column `j` of the tip Jacobian against the central difference of the body-frame pose.
pub fn jacobian_finite_difference(spec: &RodSpec, rng: &mut impl Rng, samples: usize) -> Result<CheckOutcome> {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let q = random_strain(rng, spec.num_sections(), 5.0);
        let x = rng.random_range(0.0..=spec.length());
        let g = fk_pose(spec, &q, x)?;
        let g_inv = g.inverse();
        let jac = jacobian(spec, &q, x)?;
        for j in 0..spec.dof() {
            let mut plus = q.as_vector().clone();
            plus[j] += h;
            let mut minus = q.as_vector().clone();
            minus[j] -= h;
            let vp = log_se3(&(g_inv * fk_pose(spec, &StrainVector::new(plus)?, x)?))?.to_vector();
            let vm = log_se3(&(g_inv * fk_pose(spec, &StrainVector::new(minus)?, x)?))?.to_vector();
            let fd = (vp - vm) / (2.0 * h);
            worst = worst.max((fd - jac.column(j)).amax());
        }
    }
    Ok(CheckOutcome {
        name: "jacobian-fd",
        value: worst,
        tolerance: 1e-6,
    })
}

/// Gravitational potential `-rho A int g . x(X) dX` with the workspace quadrature.
pub fn gravity_potential(ws: &StaticsWorkspace, q: &StrainVector) -> Result<f64> {
    let spec = ws.spec();
    let gl = GaussLegendre::new(ws.quadrature_nodes());
    let g_lin = spec.gravity.linear;
    let rho_a = spec.density * cross_section(spec).area;
    let mut u = 0.0;
    let mut start = 0.0;
    for end in spec.section_ends() {
        for (x, w) in gl.on_interval(start, end) {
            u -= w * rho_a * g_lin.dot(&fk_pose(spec, q, x)?.position);
        }
        start = end;
    }
    Ok(u)
}

/// `N(q) G` against the negative finite-difference gradient of the potential.
pub fn gravity_finite_difference(ws: &StaticsWorkspace, rng: &mut impl Rng, samples: usize) -> Result<CheckOutcome> {
    let spec = ws.spec();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let q = random_strain(rng, spec.num_sections(), 5.0);
        let force = ws.evaluate(&q)?.gravity_force;
        let mut grad = DVector::zeros(spec.dof());
        for j in 0..spec.dof() {
            let mut plus = q.as_vector().clone();
            plus[j] += h;
            let mut minus = q.as_vector().clone();
            minus[j] -= h;
            grad[j] = (gravity_potential(ws, &StrainVector::new(plus)?)?
                - gravity_potential(ws, &StrainVector::new(minus)?)?)
                / (2.0 * h);
        }
        worst = worst.max((&force + &grad).norm() / force.norm().max(f64::MIN_POSITIVE));
    }
    Ok(CheckOutcome {
        name: "gravity-fd",
        value: worst,
        tolerance: 1e-6,
    })
}

pub fn tangent_vs_quadrature(rng: &mut impl Rng, samples: usize) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let xi = Twist::new(
            Vector3::from_fn(|_, _| rng.random_range(-10.0..=10.0)),
            Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0)),
        );
        let s = rng.random_range(0.0..=0.3);
        let closed = tangent_closed_form(&xi, s);
        worst = worst.max((closed - tangent_quadrature(&xi, s, 64)).norm() / closed.norm().max(1e-300));
    }
    Ok(CheckOutcome {
        name: "tangent-quadrature",
        value: worst,
        tolerance: 1e-10,
    })
}

/// `d/dt 1/2 |e|^2 = -e^T Kbar e` under the strain law at random states.
pub fn strain_lyapunov(ws: &StaticsWorkspace, gains: &StrainGains, rng: &mut impl Rng, samples: usize) -> Result<CheckOutcome> {
    let n = ws.spec().num_sections();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let q_bar = random_strain(rng, n, 5.0).offset();
        let q_bar_d = random_strain(rng, n, 5.0).offset();
        let q_bar_d_dot = random_strain(rng, n, 1.0).offset();
        let terms = ws.evaluate(&StrainVector::from_offset(&q_bar)?)?;
        let cmd = strain_control_with(ws, &terms, &q_bar, &q_bar_d, &q_bar_d_dot, gains)?;
        let rate = ws.rhs_distributed_with(&terms, &q_bar, &cmd.wrenches);
        let e = &q_bar - &q_bar_d;
        let v_dot = e.dot(&(rate - &q_bar_d_dot));
        worst = worst.max(rel_err(v_dot, -e.dot(&(gains.matrix() * &e))));
    }
    Ok(CheckOutcome {
        name: "strain-lyapunov",
        value: worst,
        tolerance: 1e-6,
    })
}

/// `d/dt 1/2 |e|^2 = -e^T Kt e` under the task law at random states, with
/// the tip rate obtained from `x_dot = R(L) nu(L)`. Also reports the worst
/// residual of the pseudoinverse solve.
pub fn task_lyapunov(
    ws: &StaticsWorkspace,
    gains: &TaskGains,
    rng: &mut impl Rng,
    samples: usize,
) -> Result<(CheckOutcome, CheckOutcome)> {
    let spec = ws.spec();
    let mut worst: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for _ in 0..samples {
        let q = random_strain(rng, spec.num_sections(), 3.0);
        let q_bar = q.offset();
        let terms = ws.evaluate(&q)?;
        let tc = task_coordinates(&terms.tip_pose, None)?;
        let x_d = tc.x_tip + Vector3::from_fn(|_, _| rng.random_range(-0.05..=0.05));
        let x_d_dot = Vector3::from_fn(|_, _| rng.random_range(-0.05..=0.05));
        let cmd = task_control_with(ws, &terms, &q_bar, &tc, &x_d, &x_d_dot, gains)?;
        worst_residual = worst_residual.max(cmd.residual() / cmd.demand.norm().max(1.0));
        let rate = ws.rhs_tip_with(&terms, &q_bar, &cmd.wrench);
        let eta = &terms.tip_jacobian * rate;
        let x_dot = terms.tip_pose.rotation * Vector3::new(eta[3], eta[4], eta[5]);
        let v_dot = cmd.error.dot(&(x_dot - x_d_dot));
        worst = worst.max(rel_err(v_dot, -cmd.error.dot(&(gains.matrix() * cmd.error))));
    }
    Ok((
        CheckOutcome {
            name: "task-lyapunov",
            value: worst,
            tolerance: 1e-6,
        },
        CheckOutcome {
            name: "task-residual",
            value: worst_residual,
            tolerance: 1e-9,
        },
    ))
}

/// Short strain-space regulation: `|e(t)| / |e(0)|` against `exp(-k t)`.
pub fn strain_decay(ws: &StaticsWorkspace, gain: f64, rng: &mut impl Rng) -> Result<CheckOutcome> {
    let spec = ws.spec();
    let gains = StrainGains::scalar(gain, spec.dof())?;
    let q_bar_d = random_strain(rng, spec.num_sections(), 5.0).offset();
    let zero = DVector::zeros(spec.dof());
    let cfg = SimConfig {
        duration: 0.5,
        record_every: 50,
        ..SimConfig::default()
    };
    let trace = simulate_strain_control(ws, &zero, &gains, &cfg, |_| Ok((q_bar_d.clone(), zero.clone())))?;
    let e0 = trace.errors[0];
    let worst = trace
        .times
        .iter()
        .zip(&trace.errors)
        .map(|(t, e)| (e / e0 - (-gain * t).exp()).abs())
        .fold(0.0, f64::max);
    Ok(CheckOutcome {
        name: "strain-decay",
        value: worst,
        tolerance: 1e-6,
    })
}

/// Runs every check on `spec` with a fixed seed.
pub fn run_all(spec: &RodSpec, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws = StaticsWorkspace::new(spec);
    let strain_gains = StrainGains::scalar(2.0, spec.dof())?;
    let task_gains = TaskGains::scalar(2.0)?;
    let mut out = vec![
        exp_log_roundtrip(&mut rng, 1000)?,
        tangent_vs_quadrature(&mut rng, 200)?,
        constant_curvature_arc(spec, 5.0)?,
        jacobian_finite_difference(spec, &mut rng, 100)?,
        gravity_finite_difference(&ws, &mut rng, 50)?,
        strain_lyapunov(&ws, &strain_gains, &mut rng, 1000)?,
    ];
    let (lyap, residual) = task_lyapunov(&ws, &task_gains, &mut rng, 1000)?;
    out.push(lyap);
    out.push(residual);
    out.push(strain_decay(&ws, 2.0, &mut rng)?);
    // tip of the reference configuration lies at (L, 0, 0)
    let tip = tip_pose(spec, &StrainVector::reference(spec.num_sections()))?;
    out.push(CheckOutcome {
        name: "reference-tip",
        value: (tip.position - Vector3::new(spec.length(), 0.0, 0.0)).norm(),
        tolerance: 1e-12,
    });
    Ok(out)
}
