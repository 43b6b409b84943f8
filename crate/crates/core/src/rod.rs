//! Rod geometry, material model and the generalized stiffness and damping.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::Twist;

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Cantilever rod with a uniform circular cross-section, SI units throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RodSpecFile", into = "RodSpecFile")]
pub struct RodSpec {
    length: f64,
    section_lengths: Vec<f64>,
    pub radius: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    pub shear_viscosity: f64,
    /// Gravity twist in the inertial frame, `[0, 0, 0, 0, 0, -9.81]` by default.
    pub gravity: Twist,
}

/// On-disk form of [`RodSpec`]; `section_lengths` may be omitted for a
/// uniform split.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RodSpecFile {
    length: f64,
    num_sections: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    section_lengths: Option<Vec<f64>>,
    radius: f64,
    youngs_modulus: f64,
    poisson_ratio: f64,
    density: f64,
    shear_viscosity: f64,
    #[serde(default = "default_gravity")]
    gravity: [f64; 6],
}

fn default_gravity() -> [f64; 6] {
    [0.0, 0.0, 0.0, 0.0, 0.0, -STANDARD_GRAVITY]
}

impl TryFrom<RodSpecFile> for RodSpec {
    type Error = Error;

    fn try_from(f: RodSpecFile) -> Result<Self> {
        let mut spec = match f.section_lengths {
            Some(lengths) => {
                if lengths.len() != f.num_sections {
                    return Err(Error::InvalidSpec(format!(
                        "num_sections is {} but {} section lengths were given",
                        f.num_sections,
                        lengths.len()
                    )));
                }
                RodSpec::with_sections(
                    f.length,
                    lengths,
                    f.radius,
                    f.youngs_modulus,
                    f.poisson_ratio,
                    f.density,
                    f.shear_viscosity,
                )?
            }
            None => RodSpec::uniform(
                f.length,
                f.num_sections,
                f.radius,
                f.youngs_modulus,
                f.poisson_ratio,
                f.density,
                f.shear_viscosity,
            )?,
        };
        spec.gravity = Twist::from_slice(&f.gravity);
        Ok(spec)
    }
}

impl From<RodSpec> for RodSpecFile {
    fn from(s: RodSpec) -> Self {
        let g = s.gravity.to_vector();
        RodSpecFile {
            length: s.length,
            num_sections: s.section_lengths.len(),
            section_lengths: Some(s.section_lengths),
            radius: s.radius,
            youngs_modulus: s.youngs_modulus,
            poisson_ratio: s.poisson_ratio,
            density: s.density,
            shear_viscosity: s.shear_viscosity,
            gravity: [g[0], g[1], g[2], g[3], g[4], g[5]],
        }
    }
}

impl RodSpec {
    pub fn uniform(
        length: f64,
        num_sections: usize,
        radius: f64,
        youngs_modulus: f64,
        poisson_ratio: f64,
        density: f64,
        shear_viscosity: f64,
    ) -> Result<Self> {
        if num_sections == 0 {
            return Err(Error::InvalidSpec("num_sections must be positive".into()));
        }
        let l = length / num_sections as f64;
        Self::with_sections(
            length,
            vec![l; num_sections],
            radius,
            youngs_modulus,
            poisson_ratio,
            density,
            shear_viscosity,
        )
    }

    pub fn with_sections(
        length: f64,
        section_lengths: Vec<f64>,
        radius: f64,
        youngs_modulus: f64,
        poisson_ratio: f64,
        density: f64,
        shear_viscosity: f64,
    ) -> Result<Self> {
        let spec = Self {
            length,
            section_lengths,
            radius,
            youngs_modulus,
            poisson_ratio,
            density,
            shear_viscosity,
            gravity: Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, -STANDARD_GRAVITY)),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 0.3 m silicone-like cantilever used throughout the experiments:
    /// radius 1 cm, E = 1 MPa, nu = 0.5, rho = 1000 kg/m^3, shear viscosity 100 Pa s.
    pub fn soft_cantilever(num_sections: usize) -> Result<Self> {
        Self::uniform(0.3, num_sections, 0.01, 1e6, 0.5, 1e3, 1e2)
    }

    pub fn with_gravity(mut self, gravity: Twist) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("radius", self.radius),
            ("youngs_modulus", self.youngs_modulus),
            ("density", self.density),
            ("shear_viscosity", self.shear_viscosity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if self.section_lengths.is_empty() {
            return Err(Error::InvalidSpec("num_sections must be positive".into()));
        }
        if let Some(l) = self
            .section_lengths
            .iter()
            .find(|l| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::InvalidSpec(format!("section length must be positive, got {l}")));
        }
        let total: f64 = self.section_lengths.iter().sum();
        if (total - self.length).abs() > 1e-12 * self.length {
            return Err(Error::InvalidSpec(format!(
                "section lengths sum to {total} but the rod is {} m long",
                self.length
            )));
        }
        let nu = self.poisson_ratio;
        if !(nu > -1.0 && nu <= 0.5) {
            return Err(Error::InvalidSpec(format!("poisson_ratio must lie in (-1, 0.5], got {nu}")));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn num_sections(&self) -> usize {
        self.section_lengths.len()
    }

    pub fn section_lengths(&self) -> &[f64] {
        &self.section_lengths
    }

    /// Arc lengths of the section ends `L_1, ..., L_n`; the last entry is exactly `L`.
    pub fn section_ends(&self) -> Vec<f64> {
        let n = self.num_sections();
        let mut acc = 0.0;
        let mut ends: Vec<f64> = self
            .section_lengths
            .iter()
            .map(|l| {
                acc += l;
                acc
            })
            .collect();
        ends[n - 1] = self.length;
        ends
    }

    pub fn dof(&self) -> usize {
        6 * self.num_sections()
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }
}

/// Area and second moments `(J_x, J_y, J_z)` of the cross-section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossSection {
    pub area: f64,
    pub inertia: Vector3<f64>,
}

pub fn cross_section(spec: &RodSpec) -> CrossSection {
    let area = PI * spec.radius * spec.radius;
    let j = area * area / (4.0 * PI);
    CrossSection {
        area,
        inertia: Vector3::new(2.0 * j, j, j),
    }
}

/// Diagonals of the per-section stiffness, damping and screw inertia.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionMatrices {
    pub stiffness: Vector6<f64>,
    pub damping: Vector6<f64>,
    pub screw_inertia: Vector6<f64>,
}

impl SectionMatrices {
    pub fn stiffness_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&self.stiffness)
    }

    pub fn damping_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&self.damping)
    }

    pub fn screw_inertia_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&self.screw_inertia)
    }
}

pub fn section_matrices(spec: &RodSpec) -> SectionMatrices {
    let CrossSection { area: a, inertia: j } = cross_section(spec);
    let e = spec.youngs_modulus;
    let g = spec.shear_modulus();
    let v = spec.shear_viscosity;
    let rho = spec.density;
    SectionMatrices {
        stiffness: Vector6::new(g * j.x, e * j.y, e * j.z, e * a, g * a, g * a),
        damping: Vector6::new(j.x, 3.0 * j.y, 3.0 * j.z, 3.0 * a, a, a) * v,
        screw_inertia: Vector6::new(j.x, j.y, j.z, a, a, a) * rho,
    }
}

/// Concatenated per-section strain twists `q = [xi_1; ...; xi_n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainVector(DVector<f64>);

impl StrainVector {
    pub fn new(q: DVector<f64>) -> Result<Self> {
        if q.is_empty() || !q.len().is_multiple_of(6) {
            return Err(Error::InvalidInput(format!(
                "strain vector length {} is not a positive multiple of 6",
                q.len()
            )));
        }
        Ok(Self(q))
    }

    pub fn from_slice(q: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(q))
    }

    pub fn from_twists(twists: &[Twist]) -> Self {
        let mut q = DVector::zeros(6 * twists.len());
        for (i, t) in twists.iter().enumerate() {
            q.fixed_rows_mut::<6>(6 * i).copy_from(&t.to_vector());
        }
        Self(q)
    }

    /// `q* = [xi_0; ...; xi_0]`, the straight reference configuration.
    pub fn reference(num_sections: usize) -> Self {
        Self::from_twists(&vec![Twist::reference_strain(); num_sections])
    }

    /// `q = q_bar + q*`.
    pub fn from_offset(offset: &DVector<f64>) -> Result<Self> {
        let mut q = Self::new(offset.clone())?;
        for i in 0..q.num_sections() {
            q.0[6 * i + 3] += 1.0;
        }
        Ok(q)
    }

    /// `q_bar = q - q*`.
    pub fn offset(&self) -> DVector<f64> {
        let mut d = self.0.clone();
        for i in 0..self.num_sections() {
            d[6 * i + 3] -= 1.0;
        }
        d
    }

    pub fn num_sections(&self) -> usize {
        self.0.len() / 6
    }

    pub fn section(&self, i: usize) -> Twist {
        Twist::from_vector(&self.0.fixed_rows::<6>(6 * i).into())
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub(crate) fn check_sections(&self, spec: &RodSpec) -> Result<()> {
        if self.num_sections() != spec.num_sections() {
            return Err(Error::InvalidInput(format!(
                "strain vector has {} sections, rod has {}",
                self.num_sections(),
                spec.num_sections()
            )));
        }
        Ok(())
    }
}

/// Block-diagonal `K = diag(l_i Sigma)` and `D = diag(l_i Upsilon)`, stored
/// as their diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedMatrices {
    pub stiffness: DVector<f64>,
    pub damping: DVector<f64>,
    pub reference: StrainVector,
}

impl GeneralizedMatrices {
    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.stiffness)
    }

    pub fn damping_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.damping)
    }

    /// Diagonal of `A = -D^{-1} K`.
    pub fn relaxation_rates(&self) -> DVector<f64> {
        -self.stiffness.component_div(&self.damping)
    }
}

pub fn generalized_matrices(spec: &RodSpec) -> GeneralizedMatrices {
    let sm = section_matrices(spec);
    let n = spec.num_sections();
    let mut k = DVector::zeros(6 * n);
    let mut d = DVector::zeros(6 * n);
    for (i, l) in spec.section_lengths().iter().enumerate() {
        k.fixed_rows_mut::<6>(6 * i).copy_from(&(sm.stiffness * *l));
        d.fixed_rows_mut::<6>(6 * i).copy_from(&(sm.damping * *l));
    }
    GeneralizedMatrices {
        stiffness: k,
        damping: d,
        reference: StrainVector::reference(n),
    }
}

/// Discrete strain energy `1/2 (q - q*)^T K (q - q*)`.
pub fn potential_energy(spec: &RodSpec, q: &StrainVector) -> Result<f64> {
    q.check_sections(spec)?;
    let gm = generalized_matrices(spec);
    let d = q.offset();
    Ok(0.5 * d.component_mul(&gm.stiffness).dot(&d))
}
