//! Numerical paracontrolled calculus on the flat torus.

pub mod correctors;
pub mod error;
pub mod littlewood_paley;
pub mod paraproducts;
pub mod pcf;
pub mod qpam_solver;
pub mod reference_data;
pub mod synthetic;
pub mod torus_fields;
pub mod word_algebra;

pub use error::{Error, Result};
