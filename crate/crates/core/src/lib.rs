//! Reduced-order models for periodic 3D advection–diffusion: P1 finite
//! elements with implicit Euler, static and adaptive POD, and a posteriori
//! error indicators.

pub mod adaptive;
pub mod cli;
pub mod error;
pub mod fem;
pub mod indicators;
pub mod linalg;
pub mod mesh3d;
pub mod pod;
pub mod problems;

pub use error::{Error, Result};
