//! Inverse problems with layered generative priors.
//!
//! * [`numkit`]: dense linear algebra and seeded sampling.
//! * [`generators`]: layered generators with intermediate injections and
//!   multi-code composition, plus exact gradients.
//! * [`operators`]: measurement operators (compressed sensing, circulant,
//!   inpainting, super-resolution).
//! * [`supervised`]: population training of the two-layer linear model.
//! * [`inversion`]: CSGM, intermediate layer optimization, multi-code
//!   inversion, and closed-form layered least squares.
//! * [`gantrain`]: adversarial training with regularized intermediate layers.
//! * [`theory`]: expected reconstruction errors of the linear model.

pub mod error;
pub mod gantrain;
pub mod generators;
pub mod inversion;
pub mod numkit;
pub mod operators;
pub mod optim;
pub mod supervised;
pub mod theory;

pub use error::{Error, Result};
