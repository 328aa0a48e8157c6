//! Basin-of-attraction boundary reconstruction for low-dimensional ODE models.
//!
//! The pipeline locates points on the separatrix between stable equilibria
//! by bisection along boundary seed segments ([`detect`]), thins the cloud on
//! a bounding-box grid ([`refine`]) and interpolates the result as a curve or
//! surface with a partition-of-unity scheme built on compactly supported
//! radial basis functions ([`puinterp`]).

pub mod detect;
pub mod dynsys;
pub mod error;
pub mod integrate;
pub mod pipeline;
pub mod puinterp;
pub mod refine;

pub use error::{Error, Result};
