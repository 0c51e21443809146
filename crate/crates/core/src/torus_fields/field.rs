use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use super::fft;
use super::grid::{Freq, SpaceGrid};
use crate::error::{Error, Result};

/// Real samples on a [`SpaceGrid`] with a lazily computed spectrum.
///
/// Fields are values: every operation returns a new field, so the spectrum
/// cache never goes stale.
#[derive(Clone, Debug)]
pub struct Field {
    grid: SpaceGrid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Field {
    pub fn new(grid: SpaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field values must be finite".into()));
        }
        Ok(Self::from_vec(grid, values))
    }

    pub(crate) fn from_vec(grid: SpaceGrid, values: Vec<f64>) -> Self {
        Field { grid, values, spectrum: OnceLock::new() }
    }

    pub fn zeros(grid: SpaceGrid) -> Self {
        Self::from_vec(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: SpaceGrid, c: f64) -> Self {
        Self::from_vec(grid, vec![c; grid.len()])
    }

    pub fn from_fn(grid: SpaceGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::from_vec(grid, values)
    }

    /// Field whose spectrum is `spectrum`; any anti-Hermitian part is dropped.
    pub fn from_spectrum(grid: SpaceGrid, spectrum: &[Complex64]) -> Self {
        Self::from_vec(grid, fft::inverse(&grid, spectrum))
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| fft::forward(&self.grid, &self.values))
    }

    pub fn check_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field::from_vec(self.grid, values)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// Collocation (grid-pointwise) product.
    pub fn mul_pointwise(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a * b)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Root-mean-square norm (discrete L^2 on the unit torus).
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Forward or inverse transform; the forward image is returned as a field
/// holding the same samples with its spectrum cache filled, the inverse as the
/// field reconstructed from the cached spectrum.
pub fn transform(field: &Field, direction: Direction) -> Field {
    match direction {
        Direction::Forward => {
            let _ = field.spectrum();
            field.clone()
        }
        Direction::Inverse => Field::from_spectrum(field.grid, field.spectrum()),
    }
}

/// Multiply the spectrum by a real symbol.
pub fn apply_multiplier(field: &Field, symbol: impl Fn(Freq) -> f64) -> Result<Field> {
    let grid = *field.grid();
    let spec = field.spectrum();
    let mut out = Vec::with_capacity(spec.len());
    for (idx, &c) in spec.iter().enumerate() {
        let s = symbol(grid.freq(idx));
        if s.is_nan() {
            return Err(Error::Domain(format!("symbol is NaN at k = {:?}", grid.freq(idx))));
        }
        out.push(c * s);
    }
    Ok(Field::from_spectrum(grid, &out))
}

/// Multiply the spectrum by a complex symbol. Symbols that are odd in k must
/// vanish on Nyquist modes for the result to stay real; callers zero them.
pub fn apply_complex_multiplier(field: &Field, symbol: impl Fn(Freq) -> Complex64) -> Field {
    let grid = *field.grid();
    let out: Vec<Complex64> = field
        .spectrum()
        .iter()
        .enumerate()
        .map(|(idx, &c)| c * symbol(grid.freq(idx)))
        .collect();
    Field::from_spectrum(grid, &out)
}

/// Uniform time grid 0 = t_0 < ... < t_M = T.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("time horizon must be positive, got {t_end}")));
        }
        if steps < 2 {
            return Err(Error::Config(format!("need at least 2 time steps, got {steps}")));
        }
        Ok(TimeGrid { t_end, steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn slices(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }
}

/// One [`Field`] per time slice on a shared space grid.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: SpaceGrid,
    times: TimeGrid,
    slices: Vec<Field>,
}

impl SpaceTimeField {
    pub fn new(times: TimeGrid, slices: Vec<Field>) -> Result<Self> {
        if slices.len() != times.slices() {
            return Err(Error::Config(format!(
                "expected {} slices, got {}",
                times.slices(),
                slices.len()
            )));
        }
        let grid = *slices[0].grid();
        if slices.iter().any(|s| *s.grid() != grid) {
            return Err(Error::GridMismatch("slices live on different grids".into()));
        }
        Ok(SpaceTimeField { grid, times, slices })
    }

    pub fn zeros(grid: SpaceGrid, times: TimeGrid) -> Self {
        SpaceTimeField { grid, times, slices: vec![Field::zeros(grid); times.slices()] }
    }

    /// The same field at every slice.
    pub fn constant_in_time(field: &Field, times: TimeGrid) -> Self {
        SpaceTimeField { grid: *field.grid(), times, slices: vec![field.clone(); times.slices()] }
    }

    pub fn from_fn(grid: SpaceGrid, times: TimeGrid, f: impl Fn(f64, [f64; 2]) -> f64 + Sync + Send) -> Self {
        let slices = (0..times.slices())
            .map(|m| Field::from_fn(grid, |x| f(times.time(m), x)))
            .collect();
        SpaceTimeField { grid, times, slices }
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn slices(&self) -> &[Field] {
        &self.slices
    }

    pub fn slice(&self, m: usize) -> &Field {
        &self.slices[m]
    }

    pub fn last(&self) -> &Field {
        self.slices.last().expect("at least two slices")
    }

    pub fn check_compatible(&self, other: &SpaceTimeField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        if self.times != other.times {
            return Err(Error::Config(format!(
                "time grids differ: {:?} vs {:?}",
                self.times, other.times
            )));
        }
        Ok(())
    }

    /// Apply `f` slice by slice (in parallel).
    pub fn map_slices(&self, f: impl Fn(&Field) -> Field + Sync + Send) -> SpaceTimeField {
        let slices = self.slices.par_iter().map(f).collect();
        SpaceTimeField { grid: self.grid, times: self.times, slices }
    }

    pub fn try_map_slices(&self, f: impl Fn(&Field) -> Result<Field> + Sync + Send) -> Result<SpaceTimeField> {
        let slices = self.slices.par_iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(SpaceTimeField { grid: self.grid, times: self.times, slices })
    }

    pub fn zip_slices(
        &self,
        other: &SpaceTimeField,
        f: impl Fn(&Field, &Field) -> Field + Sync + Send,
    ) -> SpaceTimeField {
        debug_assert_eq!(self.slices.len(), other.slices.len());
        let slices = self.slices.par_iter().zip(&other.slices).map(|(a, b)| f(a, b)).collect();
        SpaceTimeField { grid: self.grid, times: self.times, slices }
    }

    pub fn add(&self, other: &SpaceTimeField) -> SpaceTimeField {
        self.zip_slices(other, Field::add)
    }

    pub fn sub(&self, other: &SpaceTimeField) -> SpaceTimeField {
        self.zip_slices(other, Field::sub)
    }

    pub fn scale(&self, s: f64) -> SpaceTimeField {
        self.map_slices(|f| f.scale(s))
    }

    pub fn sup_norm(&self) -> f64 {
        self.slices.iter().fold(0.0, |m, s| m.max(s.sup_norm()))
    }

    pub fn max_abs_diff(&self, other: &SpaceTimeField) -> f64 {
        self.slices
            .iter()
            .zip(&other.slices)
            .fold(0.0, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }

    /// All samples, time-major then row-major.
    pub fn flat_values(&self) -> Vec<f64> {
        self.slices.iter().flat_map(|s| s.values().iter().copied()).collect()
    }
}
