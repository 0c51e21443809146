//! Seeded test fields with a known dyadic profile.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::torus_fields::{Field, SpaceGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// sum_{j=1}^{J-1} 2^{-j alpha} eps_j cos(2 pi 2^j x_{axis_j} + phi_j): one mode
/// per block, so ||Delta_j f||_inf = 2^{-j alpha} exactly. Works
/// for any sign of alpha. In 2-d the axis of each mode is drawn at random.
pub fn lacunary(grid: SpaceGrid, alpha: f64, seed: u64) -> Field {
    lacunary_series(grid, alpha, seed, false)
}

/// As `lacunary`, but mode j sits at a random integer frequency in
/// (3 * 2^{j-2}, 2^j] instead of on the block edge 2^j, so smooth cutoffs
/// see it inside their transition band. Still one mode per sharp block.
pub fn lacunary_jittered(grid: SpaceGrid, alpha: f64, seed: u64) -> Field {
    lacunary_series(grid, alpha, seed, true)
}

fn lacunary_series(grid: SpaceGrid, alpha: f64, seed: u64, jitter: bool) -> Field {
    let mut r = rng(seed);
    let terms: Vec<(f64, f64, usize, f64)> = (1..grid.finest_block())
        .map(|j| {
            let top = 1i64 << j;
            let k = if jitter && j >= 2 { r.gen_range(3 * top / 4 + 1..=top) } else { top } as f64;
            let sign = if r.gen::<bool>() { 1.0 } else { -1.0 };
            // a random grid shift, so every mode attains its peak on the grid
            let shift = r.gen_range(0..grid.n()) as f64 / grid.n() as f64;
            let phase = 2.0 * PI * k * shift;
            let axis = if grid.dim() == 2 { r.gen_range(0..2) } else { 0 };
            (2f64.powf(-alpha * j as f64) * sign, k, axis, phase)
        })
        .collect();
    Field::from_fn(grid, |x| {
        terms.iter().map(|&(amp, k, axis, ph)| amp * (2.0 * PI * k * x[axis] + ph).cos()).sum()
    })
}

/// `lacunary` shifted by twice the bound sum_j 2^{-j alpha} on its sup norm, so
/// the low-pass partial sums S_j a stay within a factor 2 of each other and a
/// paraproduct with this left factor reaches its asymptotic profile early.
pub fn lacunary_with_mean(grid: SpaceGrid, alpha: f64, seed: u64) -> Field {
    let bound: f64 = (1..grid.finest_block()).map(|j| 2f64.powf(-alpha * j as f64)).sum();
    lacunary(grid, alpha, seed).map(|v| v + 2.0 * bound)
}

/// Random trigonometric polynomial on |k_i| <= kmax with amplitudes decaying
/// like (1+|k|)^{-2}; a generic smooth seeded field.
pub fn smooth(grid: SpaceGrid, kmax: i64, seed: u64) -> Field {
    let mut r = rng(seed);
    let ky = if grid.dim() == 2 { kmax } else { 0 };
    let mut terms = Vec::new();
    for k0 in 0..=kmax {
        for k1 in -ky..=ky {
            let amp = r.gen_range(-1.0..1.0) / (1.0 + ((k0 * k0 + k1 * k1) as f64).sqrt()).powi(2);
            let phase = r.gen_range(0.0..2.0 * PI);
            terms.push((amp, k0 as f64, k1 as f64, phase));
        }
    }
    Field::from_fn(grid, |x| {
        terms.iter().map(|&(a, k0, k1, ph)| a * (2.0 * PI * (k0 * x[0] + k1 * x[1]) + ph).cos()).sum()
    })
}

/// Band-limited periodic surrogate of the ramp x_axis: partial Fourier sum of
/// the sawtooth with `modes` terms, smoothed by a Fejer taper.
pub fn ramp(grid: SpaceGrid, axis: usize, modes: usize) -> Field {
    Field::from_fn(grid, |x| {
        (1..=modes)
            .map(|k| {
                let taper = 1.0 - k as f64 / (modes + 1) as f64;
                -taper * (2.0 * PI * k as f64 * x[axis]).sin() / (PI * k as f64)
            })
            .sum()
    })
}
