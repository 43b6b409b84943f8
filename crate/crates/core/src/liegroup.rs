//! SO(3) / SE(3) primitives.
//!
//! Every 6-vector in this crate is stored angular part first: a strain twist
//! is `[K; Gamma]`, a velocity twist `[omega; nu]`, a wrench `[m; n]`. The
//! adjoint matrices below use the same ordering.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this angle the closed forms switch to their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Margin below pi at which the principal logarithm is refused.
pub const PI_MARGIN: f64 = 1e-6;

/// Orthogonality tolerance applied to raw rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub angular: Vector3<f64>,
    pub linear: Vector3<f64>,
}

impl Twist {
    pub fn new(angular: Vector3<f64>, linear: Vector3<f64>) -> Self {
        Self { angular, linear }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    /// Strain of the straight, unstretched reference configuration.
    pub fn reference_strain() -> Self {
        Self::new(Vector3::zeros(), Vector3::x())
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into())
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.angular);
        v.fixed_rows_mut::<3>(3).copy_from(&self.linear);
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

impl Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.angular + rhs.angular, self.linear + rhs.linear)
    }
}

impl Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist::new(self.angular - rhs.angular, self.linear - rhs.linear)
    }
}

impl Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        Twist::new(-self.angular, -self.linear)
    }
}

impl Mul<f64> for Twist {
    type Output = Twist;
    fn mul(self, s: f64) -> Twist {
        Twist::new(self.angular * s, self.linear * s)
    }
}

/// Moment first, force last; dual to [`Twist`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub moment: Vector3<f64>,
    pub force: Vector3<f64>,
}

impl Wrench {
    pub fn new(moment: Vector3<f64>, force: Vector3<f64>) -> Self {
        Self { moment, force }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.moment);
        v.fixed_rows_mut::<3>(3).copy_from(&self.force);
        v
    }

    /// Power pairing with a twist.
    pub fn pair(&self, twist: &Twist) -> f64 {
        self.moment.dot(&twist.angular) + self.force.dot(&twist.linear)
    }
}

/// Rigid transformation `(R, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
}

impl Pose {
    /// Checked constructor for rotation matrices coming from outside the crate.
    pub fn new(rotation: Matrix3<f64>, position: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let det = rotation.determinant();
        if !ortho.is_finite() || ortho > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE
        {
            return Err(Error::InvalidInput(format!(
                "rotation is not in SO(3): |R^T R - I| = {ortho:e}, det = {det}"
            )));
        }
        Ok(Self { rotation, position })
    }

    pub(crate) fn from_parts(rotation: Matrix3<f64>, position: Vector3<f64>) -> Self {
        Self { rotation, position }
    }

    pub fn identity() -> Self {
        Self::from_parts(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into(),
            m.fixed_view::<3, 1>(0, 3).into(),
        )
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::from_parts(rt, -(rt * self.position))
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::from_parts(
            self.rotation * other.rotation,
            self.rotation * other.position + self.position,
        )
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

pub fn hat3(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee3(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

pub fn hat6(xi: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&xi.angular));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.linear);
    m
}

pub fn vee6(m: &Matrix4<f64>) -> Twist {
    Twist::new(
        vee3(&m.fixed_view::<3, 3>(0, 0).into()),
        m.fixed_view::<3, 1>(0, 3).into(),
    )
}

// sin(t)/t
fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        t.sin() / t
    }
}

// (1 - cos t)/t^2, written with the half angle so it never cancels.
fn versine_coeff(t: f64) -> f64 {
    if t.abs() < SMALL_ANGLE {
        let t2 = t * t;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0
    } else {
        let s = (0.5 * t).sin();
        2.0 * s * s / (t * t)
    }
}

// (t - sin t)/t^3
fn cubic_coeff(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362_880.0
    } else {
        (t - t.sin()) / (t * t * t)
    }
}

// (1 - (t/2) cot(t/2)) / t^2
fn inverse_jacobian_coeff(t: f64) -> f64 {
    if t.abs() < 1e-3 {
        let t2 = t * t;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30_240.0
    } else {
        (1.0 - t * t.sin() / (2.0 * (1.0 - t.cos()))) / (t * t)
    }
}

/// Rodrigues' formula.
pub fn exp_so3(phi: &Vector3<f64>) -> Matrix3<f64> {
    let t = phi.norm();
    let k = hat3(phi);
    Matrix3::identity() + k * sinc(t) + k * k * versine_coeff(t)
}

/// Left Jacobian of SO(3): maps `s * v` to the translation of `exp(s * xi)`.
fn left_jacobian_so3(phi: &Vector3<f64>) -> Matrix3<f64> {
    let t = phi.norm();
    let k = hat3(phi);
    Matrix3::identity() + k * versine_coeff(t) + k * k * cubic_coeff(t)
}

fn left_jacobian_so3_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let t = phi.norm();
    let k = hat3(phi);
    Matrix3::identity() - k * 0.5 + k * k * inverse_jacobian_coeff(t)
}

/// `W(r) = I - (1 - cos|r|)/|r|^2 r~ + (|r| - sin|r|)/|r|^3 r~^2`, the map from
/// `r_dot` to the body angular velocity of `exp_so3(r)`.
pub fn w_map(r: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let t = r.norm();
    if (t - 2.0 * PI).abs() < SMALL_ANGLE {
        return Err(Error::NearSingular { norm: t });
    }
    let k = hat3(r);
    Ok(Matrix3::identity() - k * versine_coeff(t) + k * k * cubic_coeff(t))
}

/// Closed-form inverse of [`w_map`].
pub fn w_map_inverse(r: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let t = r.norm();
    if (t - 2.0 * PI).abs() < SMALL_ANGLE {
        return Err(Error::NearSingular { norm: t });
    }
    let k = hat3(r);
    Ok(Matrix3::identity() + k * 0.5 + k * k * inverse_jacobian_coeff(t))
}

fn rotation_angle(rotation: &Matrix3<f64>) -> (f64, Vector3<f64>) {
    // axis * sin(angle)
    let s = 0.5 * vee3(&(rotation - rotation.transpose()));
    let c = 0.5 * (rotation.trace() - 1.0);
    (s.norm().atan2(c), s)
}

/// Principal rotation logarithm, refusing angles within [`PI_MARGIN`] of pi.
pub fn log_so3(rotation: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let (angle, s) = rotation_angle(rotation);
    if angle > PI - PI_MARGIN {
        return Err(Error::RotationNearPi { angle });
    }
    Ok(s / sinc(angle))
}

/// Rotation logarithm that stays defined up to and including pi; the sign of
/// the axis at exactly pi is arbitrary.
pub(crate) fn log_so3_unchecked(rotation: &Matrix3<f64>) -> Vector3<f64> {
    let (angle, s) = rotation_angle(rotation);
    if angle < PI - 1e-3 {
        return s / sinc(angle);
    }
    // Near pi: R + R^T = 2 cos(a) I + 2 (1 - cos a) n n^T.
    let c = angle.cos();
    let b = (rotation + rotation.transpose()) * 0.5 - Matrix3::identity() * c;
    let (mut best, mut col) = (0usize, f64::MIN);
    for i in 0..3 {
        if b[(i, i)] > col {
            col = b[(i, i)];
            best = i;
        }
    }
    let mut axis: Vector3<f64> = b.column(best).into();
    axis /= axis.norm();
    if axis.dot(&s) < 0.0 {
        axis = -axis;
    }
    axis * angle
}

/// `exp(s * hat6(xi))` in closed form.
pub fn exp_se3(xi: &Twist, s: f64) -> Pose {
    let phi = xi.angular * s;
    Pose::from_parts(exp_so3(&phi), left_jacobian_so3(&phi) * (xi.linear * s))
}

/// Principal logarithm, so that `exp_se3(log_se3(g), 1) == g`.
pub fn log_se3(g: &Pose) -> Result<Twist> {
    let r = log_so3(&g.rotation)?;
    Ok(Twist::new(r, left_jacobian_so3_inverse(&r) * g.position))
}

fn block6(
    a: &Matrix3<f64>,
    b: &Matrix3<f64>,
    c: &Matrix3<f64>,
    d: &Matrix3<f64>,
) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(b);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(c);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(d);
    m
}

/// `Ad_g = [[R, 0], [x~ R, R]]`.
pub fn adjoint(g: &Pose) -> Matrix6<f64> {
    let r = &g.rotation;
    block6(r, &Matrix3::zeros(), &(hat3(&g.position) * r), r)
}

/// `Ad_g^{-1} = Ad_{g^{-1}}`, formed without inverting anything.
pub fn adjoint_inverse(g: &Pose) -> Matrix6<f64> {
    let rt = g.rotation.transpose();
    block6(&rt, &Matrix3::zeros(), &(-(rt * hat3(&g.position))), &rt)
}

/// `ad_xi = [[K~, 0], [Gamma~, K~]]`.
pub fn ad(xi: &Twist) -> Matrix6<f64> {
    let k = hat3(&xi.angular);
    block6(&k, &Matrix3::zeros(), &hat3(&xi.linear), &k)
}

// Coefficients of the tangent polynomial as functions of x = |K| s, each
// divided by the power of s it multiplies; power series for small x.
fn tangent_series(x: f64) -> [f64; 4] {
    let x2 = x * x;
    let mut out = [0.0; 4];
    let mut fact_even = 2.0; // (2m)!
    let mut p = 1.0; // x^(2(m-1))
    let mut p_prev = 0.0; // x^(2(m-2))
    for m in 1..=14i32 {
        let mf = f64::from(m);
        let fact_odd = fact_even * (2.0 * mf + 1.0);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        out[0] += sign * (mf - 2.0) * p / fact_even;
        out[1] += sign * (mf - 2.0) * p / fact_odd;
        if m >= 2 {
            out[2] += sign * (mf - 1.0) * p_prev / fact_even;
            out[3] += sign * (mf - 1.0) * p_prev / fact_odd;
        }
        p_prev = p;
        p *= x2;
        fact_even *= (2.0 * mf + 1.0) * (2.0 * mf + 2.0);
    }
    out
}

fn tangent_closed(x: f64) -> [f64; 4] {
    let (s, c) = x.sin_cos();
    let x2 = x * x;
    [
        (4.0 - 4.0 * c - x * s) / (2.0 * x2),
        (4.0 * x - 5.0 * s + x * c) / (2.0 * x2 * x),
        (2.0 - 2.0 * c - x * s) / (2.0 * x2 * x2),
        (2.0 * x - 3.0 * s + x * c) / (2.0 * x2 * x2 * x),
    ]
}

/// Tangent operator of a constant-strain section,
/// `T(xi, s) = int_0^s Ad(exp_se3(xi, u))^{-1} du`.
///
/// It maps a strain rate to the body velocity it induces at the far end of a
/// section of length `s` whose base is held still.
pub fn tangent(xi: &Twist, s: f64) -> Matrix6<f64> {
    if cfg!(feature = "quadrature-tangent") {
        return tangent_quadrature(xi, s, 64);
    }
    tangent_closed_form(xi, s)
}

/// Closed form of [`tangent`]: `ad` satisfies `ad^5 + 2|K|^2 ad^3 + |K|^4 ad = 0`,
/// so the integral of `exp(-u ad)` is a quartic polynomial in `ad`.
pub fn tangent_closed_form(xi: &Twist, s: f64) -> Matrix6<f64> {
    let x = xi.angular.norm() * s;
    let phi = if x < 1.0 {
        tangent_series(x)
    } else {
        tangent_closed(x)
    };
    let s2 = s * s;
    let c = [s, -s2 * phi[0], s2 * s * phi[1], -s2 * s2 * phi[2], s2 * s2 * s * phi[3]];
    // ad^k = [[K^k, 0], [L_k, K^k]] with L_{k+1} = L_k K + K^k G, so the
    // polynomial is assembled from 3x3 blocks.
    let k = hat3(&xi.angular);
    let g = hat3(&xi.linear);
    let mut k_pow = k;
    let mut l = g;
    let mut diag = Matrix3::identity() * c[0] + k * c[1];
    let mut lower = g * c[1];
    for ck in &c[2..] {
        l = l * k + k_pow * g;
        k_pow *= k;
        diag += k_pow * *ck;
        lower += l * *ck;
    }
    block6(&diag, &Matrix3::zeros(), &lower, &diag)
}

/// [`tangent`] by `nodes`-point Gauss-Legendre quadrature of its defining integral.
pub fn tangent_quadrature(xi: &Twist, s: f64, nodes: usize) -> Matrix6<f64> {
    let rule = crate::quadrature::GaussLegendre::new(nodes);
    rule.on_interval(0.0, s)
        .fold(Matrix6::zeros(), |acc, (u, w)| {
            acc + adjoint_inverse(&exp_se3(xi, u)) * w
        })
}
