//! Numerical laboratory for cavity-modified ground-state chemistry of a 1D
//! charge-transfer model: exact quantum reaction rates for the coupled
//! electron-nucleus-photon system, cavity Born-Oppenheimer surfaces with
//! transition-state theory, second-order (Casimir-Polder) perturbation
//! theory, image-charge nanocavity electrostatics, and collective
//! many-molecule scaling.

pub mod cache;
pub mod cboa;
pub mod collective;
pub mod coupled;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod npom;
pub mod pert;
pub mod rates;
pub mod shin_metiu;
pub mod table_io;
pub mod units;
pub mod vec3;

pub use error::{Error, Result};
