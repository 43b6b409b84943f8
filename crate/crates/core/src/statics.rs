//! Discrete quasi-static model
//!
//! `D q_dot + K (q - q*) = Jbar(q)^T Fbar_ext + N(q) G`
//!
//! written for the offset `q_bar = q - q*` as
//! `q_bar_dot = A q_bar + D^{-1} (Jbar^T Fbar_ext + N G)` with `A = -D^{-1} K`.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::kinematics::JacobianBlocks;
use crate::liegroup::{adjoint_inverse, exp_se3, tangent, Pose, Wrench};
use crate::quadrature::GaussLegendre;
use crate::rod::{generalized_matrices, section_matrices, GeneralizedMatrices, RodSpec, StrainVector};

pub const DEFAULT_QUADRATURE_NODES: usize = 5;

/// Condition estimate above which the stacked Jacobian counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Configuration-independent data of the quasi-static model.
#[derive(Clone, Debug)]
pub struct StaticsWorkspace {
    spec: RodSpec,
    generalized: GeneralizedMatrices,
    relaxation: DVector<f64>,
    damping_inv: DVector<f64>,
    screw_inertia: Matrix6<f64>,
    rule: GaussLegendre,
}

/// Configuration-dependent terms, computed in one sweep along the rod.
#[derive(Clone, Debug)]
pub struct ModelTerms {
    /// `Jbar(q)`, row block i is `J(L_i, q)`.
    pub stacked_jacobian: DMatrix<f64>,
    /// `J(L, q)`.
    pub tip_jacobian: DMatrix<f64>,
    /// `N(q)`, 6n x 6.
    pub gravity_matrix: DMatrix<f64>,
    /// `N(q) G`.
    pub gravity_force: DVector<f64>,
    pub tip_pose: Pose,
}

impl StaticsWorkspace {
    pub fn new(spec: &RodSpec) -> Self {
        Self::with_quadrature(spec, DEFAULT_QUADRATURE_NODES)
    }

    pub fn with_quadrature(spec: &RodSpec, nodes_per_section: usize) -> Self {
        let generalized = generalized_matrices(spec);
        let relaxation = generalized.relaxation_rates();
        let damping_inv = generalized.damping.map(|d| 1.0 / d);
        Self {
            spec: spec.clone(),
            screw_inertia: section_matrices(spec).screw_inertia_matrix(),
            generalized,
            relaxation,
            damping_inv,
            rule: GaussLegendre::new(nodes_per_section.max(1)),
        }
    }

    pub fn spec(&self) -> &RodSpec {
        &self.spec
    }

    pub fn generalized(&self) -> &GeneralizedMatrices {
        &self.generalized
    }

    /// Diagonal of `A = -D^{-1} K`; every entry is negative.
    pub fn relaxation_rates(&self) -> &DVector<f64> {
        &self.relaxation
    }

    /// Diagonal of `D^{-1}`.
    pub fn damping_inverse(&self) -> &DVector<f64> {
        &self.damping_inv
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.rule.len()
    }

    fn check_offset(&self, q_bar: &DVector<f64>) -> Result<()> {
        if q_bar.len() != self.spec.dof() {
            return Err(Error::InvalidInput(format!(
                "strain offset has length {}, expected {}",
                q_bar.len(),
                self.spec.dof()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, q: &StrainVector) -> Result<ModelTerms> {
        q.check_sections(&self.spec)?;
        let n = self.spec.num_sections();
        let mut gravity_matrix = DMatrix::zeros(6 * n, 6);
        let mut stacked = DMatrix::zeros(6 * n, 6 * n);
        let mut base = Pose::identity();
        let mut at_start = JacobianBlocks::zeros(n);

        for (m, l) in self.spec.section_lengths().iter().enumerate() {
            let xi = q.section(m);
            // Inside section m the blocks of earlier sections are
            // Ad(g_m(x))^{-1} B_j, so their contribution factors through
            // sum_k w_k Ad(g_m(x_k))^{-T} M Ad(g(X_k))^{-1}.
            let mut transported = Matrix6::zeros();
            let mut own = Matrix6::zeros();
            for (x, w) in self.rule.on_interval(0.0, *l) {
                let local = exp_se3(&xi, x);
                let weighted = self.screw_inertia * adjoint_inverse(&(base * local)) * w;
                transported += adjoint_inverse(&local).transpose() * weighted;
                own += tangent(&xi, x).transpose() * weighted;
            }
            for (j, b) in at_start.0.iter().enumerate().take(m) {
                let mut rows = gravity_matrix.fixed_view_mut::<6, 6>(6 * j, 0);
                rows += b.transpose() * transported;
            }
            let mut rows = gravity_matrix.fixed_view_mut::<6, 6>(6 * m, 0);
            rows += own;

            at_start.advance(m, &xi, *l);
            for (j, b) in at_start.0.iter().enumerate().take(m + 1) {
                stacked.fixed_view_mut::<6, 6>(6 * m, 6 * j).copy_from(b);
            }
            base = base * exp_se3(&xi, *l);
        }

        let gravity_force = &gravity_matrix * self.spec.gravity.to_vector();
        Ok(ModelTerms {
            tip_jacobian: stacked.rows(6 * (n - 1), 6).into_owned(),
            stacked_jacobian: stacked,
            gravity_matrix,
            gravity_force,
            tip_pose: base,
        })
    }

    pub fn gravity_matrix(&self, q: &StrainVector) -> Result<DMatrix<f64>> {
        Ok(self.evaluate(q)?.gravity_matrix)
    }

    pub fn stacked_jacobian(&self, q: &StrainVector) -> Result<DMatrix<f64>> {
        Ok(self.evaluate(q)?.stacked_jacobian)
    }

    /// `A q_bar + D^{-1} f` for a generalized force `f`.
    pub fn relax(&self, q_bar: &DVector<f64>, generalized_force: &DVector<f64>) -> DVector<f64> {
        q_bar.component_mul(&self.relaxation) + generalized_force.component_mul(&self.damping_inv)
    }

    /// Strain rate with a wrench applied at every section end.
    pub fn strain_rhs_distributed(
        &self,
        q_bar: &DVector<f64>,
        wrenches: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.check_offset(q_bar)?;
        self.check_offset(wrenches)?;
        let terms = self.evaluate(&StrainVector::from_offset(q_bar)?)?;
        Ok(self.rhs_distributed_with(&terms, q_bar, wrenches))
    }

    pub fn rhs_distributed_with(
        &self,
        terms: &ModelTerms,
        q_bar: &DVector<f64>,
        wrenches: &DVector<f64>,
    ) -> DVector<f64> {
        let f = terms.stacked_jacobian.tr_mul(wrenches) + &terms.gravity_force;
        self.relax(q_bar, &f)
    }

    /// Strain rate with a single wrench applied at the tip.
    pub fn strain_rhs_tip(&self, q_bar: &DVector<f64>, tip: &Wrench) -> Result<DVector<f64>> {
        self.check_offset(q_bar)?;
        let terms = self.evaluate(&StrainVector::from_offset(q_bar)?)?;
        Ok(self.rhs_tip_with(&terms, q_bar, tip))
    }

    pub fn rhs_tip_with(&self, terms: &ModelTerms, q_bar: &DVector<f64>, tip: &Wrench) -> DVector<f64> {
        let f = terms.tip_jacobian.tr_mul(&DVector::from_column_slice(tip.to_vector().as_slice()))
            + &terms.gravity_force;
        self.relax(q_bar, &f)
    }

    /// Stacked section-end wrenches realizing the generalized force `u`.
    pub fn solve_wrench_from_u(&self, q: &StrainVector, u: &DVector<f64>) -> Result<DVector<f64>> {
        solve_wrench_from_u(&self.stacked_jacobian(q)?, u)
    }
}

/// Solves `Jbar^T F = u` by LU with partial pivoting.
pub fn solve_wrench_from_u(stacked: &DMatrix<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != stacked.nrows() {
        return Err(Error::InvalidInput(format!(
            "generalized force has length {}, expected {}",
            u.len(),
            stacked.nrows()
        )));
    }
    let jt = stacked.transpose();
    let lu = jt.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or(Error::SingularJacobian { condition: f64::INFINITY })?;
    let condition = norm1(&jt) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularJacobian { condition });
    }
    lu.solve(u).ok_or(Error::SingularJacobian { condition })
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Stacks per-section wrenches `[F(L_1); ...; F(L_n)]`.
pub fn stack_wrenches(wrenches: &[Wrench]) -> DVector<f64> {
    let mut v = DVector::zeros(6 * wrenches.len());
    for (i, w) in wrenches.iter().enumerate() {
        v.fixed_rows_mut::<6>(6 * i).copy_from(&w.to_vector());
    }
    v
}

pub fn unstack_wrench(v: &DVector<f64>, i: usize) -> Wrench {
    Wrench::from_vector(&Vector6::from_column_slice(&v.as_slice()[6 * i..6 * i + 6]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::jacobian;
    use crate::liegroup::Twist;
    use nalgebra::Vector3;

    fn bent(n: usize) -> (RodSpec, StrainVector) {
        let spec = RodSpec::soft_cantilever(n).unwrap();
        let twists: Vec<Twist> = (0..n)
            .map(|i| {
                let s = i as f64;
                Twist::new(
                    Vector3::new(0.4 - 0.2 * s, 3.0 + s, -1.5 * s),
                    Vector3::new(1.02, 0.01 * s, -0.02),
                )
            })
            .collect();
        (spec, StrainVector::from_twists(&twists))
    }

    #[test]
    fn zero_gravity_gives_zero_force() {
        let (spec, q) = bent(3);
        let spec = spec.with_gravity(Twist::zero());
        let ws = StaticsWorkspace::new(&spec);
        let terms = ws.evaluate(&q).unwrap();
        assert_eq!(terms.gravity_force, DVector::zeros(18));
    }

    #[test]
    fn straight_rod_gravity_is_planar() {
        let spec = RodSpec::soft_cantilever(2).unwrap();
        let ws = StaticsWorkspace::new(&spec);
        let f = ws.evaluate(&StrainVector::reference(2)).unwrap().gravity_force;
        for i in 0..2 {
            let b = f.fixed_rows::<6>(6 * i);
            for k in [0, 2, 3, 4] {
                assert!(b[k].abs() < 1e-15, "component {k} of block {i}: {}", b[k]);
            }
            assert!(b[1].abs() > 1e-6);
            assert!(b[5].abs() > 1e-6);
        }
    }

    #[test]
    fn stacked_jacobian_structure() {
        let (spec, q) = bent(3);
        let ws = StaticsWorkspace::new(&spec);
        let jb = ws.stacked_jacobian(&q).unwrap();
        let ends = spec.section_ends();
        for (i, x) in ends.iter().enumerate() {
            let j = jacobian(&spec, &q, *x).unwrap();
            assert!((jb.rows(6 * i, 6) - j).norm() < 1e-14);
            for c in (i + 1)..3 {
                assert!(jb.view((6 * i, 6 * c), (6, 6)).iter().all(|v| *v == 0.0));
            }
        }
        let spec1 = RodSpec::soft_cantilever(1).unwrap();
        let q1 = StrainVector::from_slice(&[0.1, 2.0, -1.0, 1.1, 0.0, 0.05]).unwrap();
        let jb1 = StaticsWorkspace::new(&spec1).stacked_jacobian(&q1).unwrap();
        assert_eq!(jb1, jacobian(&spec1, &q1, 0.3).unwrap());
    }

    #[test]
    fn reference_configuration_is_equilibrium_without_gravity() {
        let spec = RodSpec::soft_cantilever(2).unwrap().with_gravity(Twist::zero());
        let ws = StaticsWorkspace::new(&spec);
        let zero = DVector::zeros(12);
        assert_eq!(ws.strain_rhs_distributed(&zero, &zero).unwrap(), zero);
    }

    #[test]
    fn free_relaxation_is_diagonal() {
        let spec = RodSpec::soft_cantilever(2).unwrap().with_gravity(Twist::zero());
        let ws = StaticsWorkspace::new(&spec);
        let q_bar = DVector::from_fn(12, |i, _| 0.1 * i as f64 - 0.4);
        let rhs = ws.strain_rhs_distributed(&q_bar, &DVector::zeros(12)).unwrap();
        assert_eq!(rhs, q_bar.component_mul(ws.relaxation_rates()));
        let tip = ws.strain_rhs_tip(&q_bar, &Wrench::zero()).unwrap();
        assert_eq!(tip, rhs);
    }

    #[test]
    fn tip_wrench_is_last_block_of_distributed() {
        let (spec, q) = bent(3);
        let ws = StaticsWorkspace::new(&spec);
        let q_bar = q.offset();
        let tip = Wrench::new(Vector3::new(0.01, -0.02, 0.005), Vector3::new(0.3, 0.1, -0.2));
        let stacked = stack_wrenches(&[Wrench::zero(), Wrench::zero(), tip]);
        let a = ws.strain_rhs_tip(&q_bar, &tip).unwrap();
        let b = ws.strain_rhs_distributed(&q_bar, &stacked).unwrap();
        assert!((a - &b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn wrench_solve_roundtrip() {
        let (spec, q) = bent(3);
        let ws = StaticsWorkspace::new(&spec);
        let jb = ws.stacked_jacobian(&q).unwrap();
        let u = DVector::from_fn(18, |i, _| (i as f64 * 0.37).sin());
        let f = solve_wrench_from_u(&jb, &u).unwrap();
        assert!((jb.tr_mul(&f) - &u).norm() <= 1e-9 * u.norm());
        assert_eq!(solve_wrench_from_u(&jb, &DVector::zeros(18)).unwrap(), DVector::zeros(18));
    }

    #[test]
    fn wrench_solve_on_straight_single_section() {
        // J = [[l I, 0], [-(l^2/2) e1~, l I]]  =>  J^{-T} in closed form.
        let spec = RodSpec::soft_cantilever(1).unwrap();
        let ws = StaticsWorkspace::new(&spec);
        let l = 0.3;
        let u = DVector::from_column_slice(&[0.1, -0.2, 0.3, 0.4, -0.5, 0.6]);
        let f = ws.solve_wrench_from_u(&StrainVector::reference(1), &u).unwrap();
        // J^T = [[l I, (l^2/2) e1~], [0, l I]]: n = u_lin / l, m = (u_ang - (l^2/2) e1 x n) / l
        let n = Vector3::new(u[3], u[4], u[5]) / l;
        let m = (Vector3::new(u[0], u[1], u[2]) - Vector3::x().cross(&n) * (l * l / 2.0)) / l;
        let expected = [m.x, m.y, m.z, n.x, n.y, n.z];
        for k in 0..6 {
            assert!((f[k] - expected[k]).abs() < 1e-12, "{k}: {} vs {}", f[k], expected[k]);
        }
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let mut jb = DMatrix::identity(6, 6);
        jb[(5, 5)] = 1e-14;
        assert!(matches!(
            solve_wrench_from_u(&jb, &DVector::from_element(6, 1.0)),
            Err(Error::SingularJacobian { .. })
        ));
    }

    #[test]
    fn rhs_is_affine_in_wrenches() {
        let (spec, q) = bent(2);
        let ws = StaticsWorkspace::new(&spec);
        let q_bar = q.offset();
        let f1 = DVector::from_fn(12, |i, _| (i as f64).cos());
        let f2 = DVector::from_fn(12, |i, _| (2.0 * i as f64).sin());
        let r0 = ws.strain_rhs_distributed(&q_bar, &DVector::zeros(12)).unwrap();
        let r1 = ws.strain_rhs_distributed(&q_bar, &f1).unwrap();
        let r12 = ws.strain_rhs_distributed(&q_bar, &(&f1 * 2.0 + &f2 * 3.0)).unwrap();
        let r2 = ws.strain_rhs_distributed(&q_bar, &f2).unwrap();
        let lin = (&r1 - &r0) * 2.0 + (&r2 - &r0) * 3.0 + &r0;
        assert!((r12 - &lin).norm() <= 1e-12 * lin.norm());
    }
}
