//! Thin wrappers around rustfft for 1-d and 2-d periodic grids.
//!
//! Spectra are normalised so that `c(k) = N^{-d} sum_x f(x) e^{-2 pi i k.x}`;
//! `cos(2 pi x)` therefore has coefficient 1/2 at k = +-1.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::grid::SpaceGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, dir))
}

fn transform_in_place(grid: &SpaceGrid, data: &mut [Complex64], dir: FftDirection) {
    let n = grid.n();
    let fft = plan(n, dir);
    if grid.dim() == 1 {
        fft.process(data);
        return;
    }
    // rows (axis 1, contiguous)
    fft.process(data);
    // columns (axis 0)
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

pub fn forward(grid: &SpaceGrid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_in_place(grid, &mut data, FftDirection::Forward);
    let scale = 1.0 / grid.len() as f64;
    for c in data.iter_mut() {
        *c *= scale;
    }
    data
}

/// Inverse transform; the imaginary part (rounding, or an odd symbol) is dropped.
pub fn inverse(grid: &SpaceGrid, spectrum: &[Complex64]) -> Vec<f64> {
    let mut data = spectrum.to_vec();
    transform_in_place(grid, &mut data, FftDirection::Inverse);
    data.into_iter().map(|c| c.re).collect()
}

/// Embed an N-grid spectrum into the 2N grid. Nyquist coefficients are split
/// evenly between +N/2 and -N/2 so the padded field stays real.
pub fn pad(grid: &SpaceGrid, spectrum: &[Complex64]) -> Vec<Complex64> {
    let big = grid.doubled();
    let n = grid.n() as i64;
    let nb = big.n() as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); big.len()];
    let wrap = |k: i64| -> usize { k.rem_euclid(nb) as usize };
    for (idx, &c) in spectrum.iter().enumerate() {
        let k = grid.freq(idx);
        // each Nyquist axis doubles the number of targets
        let axis_targets = |kc: i64| -> Vec<(i64, f64)> {
            if kc.abs() == n / 2 {
                vec![(n / 2, 0.5), (-n / 2, 0.5)]
            } else {
                vec![(kc, 1.0)]
            }
        };
        if grid.dim() == 1 {
            for (k0, w) in axis_targets(k[0]) {
                out[wrap(k0)] += c * w;
            }
        } else {
            for (k0, w0) in axis_targets(k[0]) {
                for (k1, w1) in axis_targets(k[1]) {
                    out[wrap(k0) * big.n() + wrap(k1)] += c * (w0 * w1);
                }
            }
        }
    }
    out
}

/// Restrict a 2N-grid spectrum to the band |k_i| <= N/2 of the N grid.
/// The two Nyquist components fold onto the single N-grid Nyquist slot,
/// which is what sampling the band-limited function on the N grid gives.
pub fn truncate(grid: &SpaceGrid, big_spectrum: &[Complex64]) -> Vec<Complex64> {
    let big = grid.doubled();
    let half = (grid.n() / 2) as i64;
    let n = grid.n() as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    let wrap = |k: i64| -> usize { k.rem_euclid(n) as usize };
    for (idx, &c) in big_spectrum.iter().enumerate() {
        let k = big.freq(idx);
        if k[..grid.dim()].iter().any(|kc| kc.abs() > half) {
            continue;
        }
        let target = if grid.dim() == 1 {
            wrap(k[0])
        } else {
            wrap(k[0]) * grid.n() + wrap(k[1])
        };
        out[target] += c;
    }
    out
}
