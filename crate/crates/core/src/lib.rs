// negated float comparisons are used on purpose: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod law;
pub mod residual;
pub mod solver;
pub mod special;

pub use config::{CircleConfig, Configuration, LineConfig, Side, TailModel};
pub use error::{EquilibError, Result};
pub use law::ForceLaw;
pub use residual::{circle_residual_report, residual_report, side_forces, ParticleResidual, ResidualReport};
