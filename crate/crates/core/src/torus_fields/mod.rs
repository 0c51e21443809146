//! Periodic grids, spectral transforms, Fourier multipliers, heat operators
//! and the Duhamel inverse of the parabolic operator d_t + L.

pub mod fft;
mod field;
mod grid;
mod operator;

pub use field::{
    apply_complex_multiplier, apply_multiplier, transform, Direction, Field, SpaceTimeField,
    TimeGrid,
};
pub use grid::{norm2, Freq, SpaceGrid};
pub use operator::{
    apply_parabolic, derivative, duhamel_inverse, free_propagation, phi12, q_composition_constant, heat_symbol, HeatKind,
    OperatorL,
};
