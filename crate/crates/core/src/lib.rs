//! Time-minimal synthesis near a target manifold for single-input
//! control-affine systems in ℝ³, with a mass-action reaction-network front
//! end.

pub mod ad;
pub mod crn;
pub mod error;
pub mod extremal;
pub mod liealg;
pub mod linalg;
pub mod models;
pub mod ode;
pub mod series;
pub mod singular;
pub mod synthesis;

pub use error::{Error, Result};

pub use liealg::{ControlAffine, Costate, SmoothField, Target};
pub use models::{HyperbolicUnfolding, McKeithanSystem, SemiNormalForm, Tutorial};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
