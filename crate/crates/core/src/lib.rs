//! Piecewise constant strain (PCS) model of a static Cosserat rod with
//! quasi-static feedback control through external wrenches.
//!
//! The crate is organised bottom-up:
//!
//! * [`liegroup`]: SE(3) exponential/logarithm, adjoints, section tangent operator.
//! * [`rod`]: geometry and material, stiffness/damping, strain energy.
//! * [`kinematics`]: product-of-exponentials poses and geometric Jacobians.
//! * [`statics`]: gravity matrix, stacked Jacobian, strain-rate dynamics.
//! * [`ik`]: Newton-Raphson inverse kinematics.
//! * [`control`]: strain-space and task-space feedback linearization.
//! * [`sim`]: RK4 closed-loop simulation and the experiment drivers.
//! * [`cli`]: configuration, CSV/SVG output and the command line front end.



pub mod checks;
pub mod cli;
pub mod control;
pub mod error;
pub mod ik;
pub mod kinematics;
pub mod liegroup;
mod linalg;
pub mod quadrature;
pub mod rod;
pub mod sim;
pub mod statics;

pub use error::{Error, Result};
pub use liegroup::{Pose, Twist, Wrench};
pub use rod::{RodSpec, StrainVector};
