//! Product-of-exponentials forward kinematics and body-frame geometric Jacobians.

use nalgebra::{DMatrix, DVector, Matrix6};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::liegroup::{adjoint_inverse, exp_se3, tangent, Pose, Twist};
use crate::rod::{RodSpec, StrainVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShapeSample {
    pub arclength: f64,
    pub pose: Pose,
}

/// Section containing `x` and the local arc length inside it. A point on a
/// section boundary belongs to the proximal section.
pub(crate) fn locate(spec: &RodSpec, x: f64) -> Result<(usize, f64)> {
    let length = spec.length();
    if !(0.0..=length).contains(&x) {
        return Err(Error::OutOfRange { x, length });
    }
    let mut start = 0.0;
    let lengths = spec.section_lengths();
    for (i, l) in lengths.iter().enumerate() {
        let end = start + l;
        if x <= end + 1e-12 * length || i + 1 == lengths.len() {
            return Ok((i, (x - start).clamp(0.0, *l)));
        }
        start = end;
    }
    unreachable!("rod has at least one section")
}

/// `g(X) = exp(l_1 xi_1) ... exp((X - L_{m-1}) xi_m)`, with `g(0) = I`.
pub fn fk_pose(spec: &RodSpec, q: &StrainVector, x: f64) -> Result<Pose> {
    q.check_sections(spec)?;
    let (m, local) = locate(spec, x)?;
    let lengths = spec.section_lengths();
    let mut g = Pose::identity();
    for (i, l) in lengths.iter().enumerate().take(m) {
        g = g * exp_se3(&q.section(i), *l);
    }
    Ok(g * exp_se3(&q.section(m), local))
}

/// Tip pose `g(L)`.
pub fn tip_pose(spec: &RodSpec, q: &StrainVector) -> Result<Pose> {
    fk_pose(spec, q, spec.length())
}

/// `samples_per_section + 1` evenly spaced poses per section, section ends
/// included; neighbouring sections share their boundary sample.
pub fn fk_shape(
    spec: &RodSpec,
    q: &StrainVector,
    samples_per_section: usize,
) -> Result<Vec<ShapeSample>> {
    q.check_sections(spec)?;
    if samples_per_section == 0 {
        return Err(Error::InvalidInput("samples_per_section must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(spec.num_sections() * samples_per_section + 1);
    out.push(ShapeSample {
        arclength: 0.0,
        pose: Pose::identity(),
    });
    let mut base = Pose::identity();
    let mut start = 0.0;
    for (i, l) in spec.section_lengths().iter().enumerate() {
        let xi = q.section(i);
        for k in 1..=samples_per_section {
            let local = *l * k as f64 / samples_per_section as f64;
            out.push(ShapeSample {
                arclength: start + local,
                pose: base * exp_se3(&xi, local),
            });
        }
        base = base * exp_se3(&xi, *l);
        start += l;
    }
    if let Some(last) = out.last_mut() {
        last.arclength = spec.length();
    }
    Ok(out)
}

/// Column blocks of a body Jacobian, one 6x6 block per section.
#[derive(Clone, Debug)]
pub(crate) struct JacobianBlocks(pub Vec<Matrix6<f64>>);

impl JacobianBlocks {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Matrix6::zeros(); n])
    }

    /// Moves the Jacobian from the start of section `m` across a local arc
    /// length `s` of it: blocks of earlier sections are transported by
    /// `Ad(g_m(s))^{-1}` and block `m` becomes `T(xi_m, s)`.
    pub fn advanced(&self, m: usize, xi: &Twist, s: f64) -> Self {
        let mut out = self.clone();
        out.advance(m, xi, s);
        out
    }

    /// In-place form of [`JacobianBlocks::advanced`].
    pub fn advance(&mut self, m: usize, xi: &Twist, s: f64) {
        let transport = adjoint_inverse(&exp_se3(xi, s));
        for b in &mut self.0[..m] {
            *b = transport * *b;
        }
        self.0[m] = tangent(xi, s);
        for b in &mut self.0[m + 1..] {
            *b = Matrix6::zeros();
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(6, 6 * self.0.len());
        for (i, b) in self.0.iter().enumerate() {
            j.fixed_view_mut::<6, 6>(0, 6 * i).copy_from(b);
        }
        j
    }
}

/// Body-frame geometric Jacobian, `eta(X) = J(X, q) q_dot`, of size 6 x 6n.
pub fn jacobian(spec: &RodSpec, q: &StrainVector, x: f64) -> Result<DMatrix<f64>> {
    q.check_sections(spec)?;
    let (m, local) = locate(spec, x)?;
    let n = spec.num_sections();
    let mut current = JacobianBlocks::zeros(n);
    for (i, l) in spec.section_lengths().iter().enumerate().take(m) {
        current = current.advanced(i, &q.section(i), *l);
    }
    Ok(current.advanced(m, &q.section(m), local).to_matrix())
}

pub fn body_velocity(
    spec: &RodSpec,
    q: &StrainVector,
    q_dot: &DVector<f64>,
    x: f64,
) -> Result<Twist> {
    if q_dot.len() != spec.dof() {
        return Err(Error::InvalidInput(format!(
            "strain rate has length {}, expected {}",
            q_dot.len(),
            spec.dof()
        )));
    }
    let eta = jacobian(spec, q, x)? * q_dot;
    Ok(Twist::new(
        eta.fixed_rows::<3>(0).into(),
        eta.fixed_rows::<3>(3).into(),
    ))
}
