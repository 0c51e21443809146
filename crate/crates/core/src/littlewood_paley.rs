//! Sharp dyadic Fourier blocks, Besov norms and regularity-exponent fits.
//!
//! Block -1 holds |k| <= 1 and block j >= 0 holds 2^{j-1} < |k| <= 2^j, with
//! |k| Euclidean in 2-d. Block 0 is therefore empty on the integer lattice.
//! In 2-d the corner modes beyond 2^J are folded into the finest block J.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus_fields::{apply_multiplier, norm2, Field, Freq, SpaceGrid, SpaceTimeField};

pub const REGRESSION_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Cutoff {
    #[default]
    Sharp,
    /// Smooth radial bumps; a partition of unity but without block orthogonality.
    Smooth,
}

/// Index of the sharp block containing frequency `k`.
pub fn block_index(grid: &SpaceGrid, k: Freq) -> i32 {
    let r2 = norm2(k);
    if r2 <= 1 {
        return -1;
    }
    let mut j = 1;
    while r2 > 1i64 << (2 * j) {
        j += 1;
    }
    j.min(grid.finest_block())
}

fn smooth_chi(r: f64) -> f64 {
    // 1 on [0,1], 0 on [2,inf), C^infinity transition
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let s = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    let x = 2.0 - r;
    s(x) / (s(x) + s(1.0 - x))
}

fn smooth_weight(grid: &SpaceGrid, k: Freq, j: i32) -> f64 {
    smooth_low_pass(grid, k, j) - smooth_low_pass(grid, k, j - 1)
}

fn smooth_low_pass(grid: &SpaceGrid, k: Freq, m: i32) -> f64 {
    if m < -1 {
        return 0.0;
    }
    if m >= grid.finest_block() {
        return 1.0;
    }
    smooth_chi((norm2(k) as f64).sqrt() / 2f64.powi(m.max(0)))
}

/// Symbol of Delta_j at frequency `k`.
pub fn block_weight(grid: &SpaceGrid, k: Freq, j: i32, cutoff: Cutoff) -> f64 {
    match cutoff {
        Cutoff::Sharp => f64::from(u8::from(block_index(grid, k) == j)),
        Cutoff::Smooth => smooth_weight(grid, k, j),
    }
}

/// Symbol of S_m = sum_{i <= m} Delta_i at frequency `k`.
pub fn low_pass_weight(grid: &SpaceGrid, k: Freq, m: i32, cutoff: Cutoff) -> f64 {
    match cutoff {
        Cutoff::Sharp => f64::from(u8::from(block_index(grid, k) <= m)),
        Cutoff::Smooth => smooth_low_pass(grid, k, m),
    }
}

/// Delta_j f.
pub fn block(f: &Field, j: i32) -> Field {
    block_with(f, j, Cutoff::Sharp)
}

pub fn block_with(f: &Field, j: i32, cutoff: Cutoff) -> Field {
    let grid = *f.grid();
    match cutoff {
        Cutoff::Sharp => apply_multiplier(f, |k| if block_index(&grid, k) == j { 1.0 } else { 0.0 }),
        Cutoff::Smooth => apply_multiplier(f, |k| smooth_weight(&grid, k, j)),
    }
    .expect("indicator symbol is finite")
}

/// S_j f = sum_{i <= j} Delta_i f (zero when j < -1).
pub fn low_pass(f: &Field, j: i32) -> Field {
    let grid = *f.grid();
    apply_multiplier(f, |k| if block_index(&grid, k) <= j { 1.0 } else { 0.0 })
        .expect("indicator symbol is finite")
}

/// Blocks Delta_{-1} .. Delta_J of a field with their sup norms.
#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub blocks: Vec<Field>,
    pub block_sups: Vec<f64>,
}

impl DyadicDecomposition {
    /// Block j (j >= -1).
    pub fn get(&self, j: i32) -> &Field {
        &self.blocks[(j + 1) as usize]
    }

    pub fn sup(&self, j: i32) -> f64 {
        self.block_sups[(j + 1) as usize]
    }

    pub fn finest(&self) -> i32 {
        self.blocks.len() as i32 - 2
    }

    pub fn reconstruct(&self) -> Field {
        let mut acc = Field::zeros(*self.blocks[0].grid());
        for b in &self.blocks {
            acc = acc.add(b);
        }
        acc
    }
}

pub fn decompose(f: &Field) -> DyadicDecomposition {
    decompose_with(f, Cutoff::Sharp)
}

pub fn decompose_with(f: &Field, cutoff: Cutoff) -> DyadicDecomposition {
    let jmax = f.grid().finest_block();
    let blocks: Vec<Field> = (-1..=jmax).map(|j| block_with(f, j, cutoff)).collect();
    let block_sups = blocks.iter().map(Field::sup_norm).collect();
    DyadicDecomposition { blocks, block_sups }
}

/// max_j 2^{j alpha} ||Delta_j f||_inf.
pub fn besov_norm(f: &Field, alpha: f64) -> f64 {
    let d = decompose(f);
    besov_from_sups(&d.block_sups, alpha)
}

pub fn besov_from_sups(sups: &[f64], alpha: f64) -> f64 {
    sups.iter()
        .enumerate()
        .map(|(i, s)| 2f64.powf((i as f64 - 1.0) * alpha) * s)
        .fold(0.0, f64::max)
}

/// Parabolic Hoelder-type norm: worst spatial Besov norm over slices plus the
/// time increments measured with exponent alpha/2 (sup over slice pairs).
pub fn parabolic_norm(u: &SpaceTimeField, alpha: f64) -> f64 {
    let space = u.slices().iter().map(|s| besov_norm(s, alpha)).fold(0.0, f64::max);
    if alpha <= 0.0 {
        return space;
    }
    let dt = u.times().dt();
    let s = u.slices();
    let mut time = 0.0f64;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let gap = ((j - i) as f64 * dt).powf(alpha.min(2.0) / 2.0);
            time = time.max(s[i].max_abs_diff(&s[j]) / gap);
        }
    }
    space + time
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityEstimate {
    pub exponent: f64,
    pub r2: f64,
    pub j_min: i32,
    pub j_max: i32,
    pub intercept: f64,
    /// (j, log2 ||Delta_j f||_inf) for the blocks used in the fit.
    pub points: Vec<(i32, f64)>,
}

impl RegularityEstimate {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,log2_block_sup,fitted_line\n");
        for &(j, y) in &self.points {
            let fit = self.intercept - self.exponent * j as f64;
            s.push_str(&format!("{j},{y:.12e},{fit:.12e}\n"));
        }
        s
    }
}

/// Default fit window [1, J-2]: drops the aliasing-prone finest blocks.
pub fn default_window(grid: &SpaceGrid) -> (i32, i32) {
    (1, grid.finest_block() - 2)
}

/// Least-squares fit of log2 ||Delta_j f||_inf against j; the exponent is
/// minus the slope. Blocks below the floor are skipped.
pub fn estimate_regularity(f: &Field, j_min: i32, j_max: i32) -> Result<RegularityEstimate> {
    let d = decompose(f);
    estimate_from_sups(&d.block_sups, j_min, j_max)
}

pub fn estimate_from_sups(sups: &[f64], j_min: i32, j_max: i32) -> Result<RegularityEstimate> {
    if j_max - j_min < 3 {
        return Err(Error::Config(format!(
            "fit window [{j_min}, {j_max}] must span at least 4 blocks"
        )));
    }
    let finest = sups.len() as i32 - 2;
    if j_min < -1 || j_max > finest {
        return Err(Error::Config(format!(
            "fit window [{j_min}, {j_max}] outside available blocks [-1, {finest}]"
        )));
    }
    let points: Vec<(i32, f64)> = (j_min..=j_max)
        .filter_map(|j| {
            let s = sups[(j + 1) as usize];
            (s > REGRESSION_FLOOR).then(|| (j, s.log2()))
        })
        .collect();
    if points.len() < 4 {
        return Err(Error::Degenerate(format!(
            "only {} blocks above the floor {REGRESSION_FLOOR:e} in [{j_min}, {j_max}]",
            points.len()
        )));
    }
    let (slope, intercept, r2) = linear_fit(&points.iter().map(|&(j, y)| (j as f64, y)).collect::<Vec<_>>());
    Ok(RegularityEstimate { exponent: -slope, r2, j_min, j_max, intercept, points })
}

/// Ordinary least squares y = intercept + slope x; returns (slope, intercept, r^2).
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g1(n: usize) -> SpaceGrid {
        SpaceGrid::new(1, n).unwrap()
    }

    #[test]
    fn block_rule() {
        let g = g1(64);
        let idx: Vec<i32> = [0, 1, 2, 3, 4, 5, 8, 9, 32].iter().map(|&k| block_index(&g, [k, 0])).collect();
        assert_eq!(idx, vec![-1, -1, 1, 2, 2, 3, 3, 4, 5]);
    }

    #[test]
    fn cos4_lives_in_block_two() {
        let f = Field::from_fn(g1(32), |x| (2.0 * PI * 4.0 * x[0]).cos());
        let d = decompose(&f);
        for j in -1..=d.finest() {
            let s = d.sup(j);
            if j == 2 {
                assert!((s - 1.0).abs() < 1e-12);
            } else {
                assert!(s < 1e-13);
            }
        }
        assert!((besov_norm(&f, 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_only_in_low_block() {
        let d = decompose(&Field::constant(g1(16), 3.0));
        assert!((d.sup(-1) - 3.0).abs() < 1e-14);
        assert!(d.block_sups[1..].iter().all(|&s| s < 1e-14));
    }

    #[test]
    fn synthetic_decay_is_recovered() {
        let f = Field::from_fn(g1(256), |x| {
            (2..=6).map(|j| 2f64.powf(-0.7 * j as f64) * (2.0 * PI * 2f64.powi(j) * x[0]).cos()).sum()
        });
        let est = estimate_regularity(&f, 2, 6).unwrap();
        assert!((est.exponent - 0.7).abs() < 0.05);
        assert!(est.r2 > 0.99);
    }

    #[test]
    fn single_mode_is_degenerate() {
        let f = Field::from_fn(g1(256), |x| (2.0 * PI * 8.0 * x[0]).sin());
        assert!(matches!(estimate_regularity(&f, 1, 5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gaussian_bump_is_smooth() {
        let f = Field::from_fn(g1(256), |x| {
            (-1..=1).map(|p| (-((x[0] - 0.5 + p as f64) / 0.08).powi(2)).exp()).sum()
        });
        let est = estimate_regularity(&f, 1, 5).unwrap();
        assert!(est.exponent >= 2.0, "exponent {}", est.exponent);
    }

    #[test]
    fn smooth_cutoffs_partition_unity() {
        let g = SpaceGrid::new(2, 32).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * (3.0 * x[0] + 5.0 * x[1])).cos() + x[0].sin());
        let d = decompose_with(&f, Cutoff::Smooth);
        assert!(d.reconstruct().max_abs_diff(&f) < 1e-12);
    }
}
