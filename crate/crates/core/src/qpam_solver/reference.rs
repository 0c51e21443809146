//! Direct pseudo-spectral oracle: second-order exponential Runge-Kutta with
//! d0(-Delta) integrated exactly and (d(u) - d0) Delta u + f(u) zeta explicit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{reformulate, ProblemSpec, Reformulation};
use crate::error::{Error, Result};
use crate::reference_data::sample_noise;
use crate::torus_fields::{phi12, Field, OperatorL, SpaceTimeField, TimeGrid};

/// f(u) zeta + eps(u) L u at one instant, collocation products.
pub fn pointwise_rhs(spec: &ProblemSpec, reform: &Reformulation, u: &Field, zeta: &Field) -> Field {
    let fz = u.map(|v| spec.f.eval(0, v)).mul_pointwise(zeta);
    if spec.semilinear {
        return fz;
    }
    let lu = reform.op.apply(u);
    fz.add(&u.map(|v| reform.eps(0, v)).mul_pointwise(&lu))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceRun {
    #[serde(skip)]
    pub solution: Option<SpaceTimeField>,
    /// Substeps per solver step at the finest level.
    pub refine: usize,
    /// sup distance between the two finest levels.
    pub disagreement: f64,
    /// Observed order from three step-halving levels.
    pub order: f64,
    /// Richardson estimate of the finest level's error.
    pub error_estimate: f64,
}

fn etd2(spec: &ProblemSpec, reform: &Reformulation, refine: usize) -> Result<SpaceTimeField> {
    let grid = spec.grid()?;
    let coarse = spec.times()?;
    let fine = TimeGrid::new(coarse.t_end, coarse.steps * refine)?;
    let noise = sample_noise(&spec.noise, grid, fine)?;
    let h = fine.dt();
    let d0 = reform.d0;
    let weights: Vec<(f64, f64, f64)> = (0..grid.len())
        .map(|i| {
            let x = h * OperatorL::symbol(d0, grid.freq(i));
            let (p1, p2) = phi12(x);
            ((-x).exp(), h * p1, h * p2)
        })
        .collect();
    let mut u = spec.u0.field(grid);
    let mut slices = vec![u.clone()];
    for n in 0..fine.steps {
        let nu = pointwise_rhs(spec, reform, &u, noise.slice(n));
        let a_hat: Vec<Complex64> = u
            .spectrum()
            .iter()
            .zip(nu.spectrum())
            .zip(&weights)
            .map(|((&uh, &nh), &(e, w1, _))| e * uh + w1 * nh)
            .collect();
        let a = Field::from_spectrum(grid, &a_hat);
        let na = pointwise_rhs(spec, reform, &a, noise.slice(n + 1));
        let next: Vec<Complex64> = a_hat
            .iter()
            .zip(na.spectrum().iter().zip(nu.spectrum()))
            .zip(&weights)
            .map(|((&ah, (&nah, &nuh)), &(_, _, w2))| ah + w2 * (nah - nuh))
            .collect();
        u = Field::from_spectrum(grid, &next);
        if u.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("direct solver blew up at t = {:.4}", fine.time(n + 1))));
        }
        if (n + 1) % refine == 0 {
            slices.push(u.clone());
        }
    }
    SpaceTimeField::new(coarse, slices)
}

/// Runs at dt/r, dt/2r and dt/4r; the finest is returned.
pub fn reference_solver(spec: &ProblemSpec) -> Result<ReferenceRun> {
    let reform = reformulate(spec)?;
    let r = spec.reference_refine.max(1);
    let levels = [r, 2 * r, 4 * r]
        .iter()
        .map(|&k| etd2(spec, &reform, k))
        .collect::<Result<Vec<_>>>()?;
    let d1 = levels[0].max_abs_diff(&levels[1]);
    let d2 = levels[1].max_abs_diff(&levels[2]);
    let limit = 10.0 * spec.reference_tol;
    if d2 > limit {
        return Err(Error::OracleUnreliable { disagreement: d2, limit });
    }
    let order = if d2 > 0.0 && d1 > 0.0 { (d1 / d2).log2() } else { f64::NAN };
    Ok(ReferenceRun {
        solution: levels.into_iter().nth(2),
        refine: 4 * r,
        disagreement: d2,
        order,
        error_estimate: d2 / 3.0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CompareReport {
    pub sup: Vec<f64>,
    pub l2: Vec<f64>,
    pub max_sup: f64,
    pub final_sup: f64,
}

pub fn compare(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<CompareReport> {
    a.check_compatible(b)?;
    let sup: Vec<f64> = a.slices().iter().zip(b.slices()).map(|(x, y)| x.max_abs_diff(y)).collect();
    let l2 = a.slices().iter().zip(b.slices()).map(|(x, y)| x.sub(y).l2_norm()).collect();
    Ok(CompareReport { max_sup: sup.iter().cloned().fold(0.0, f64::max), final_sup: *sup.last().unwrap_or(&0.0), sup, l2 })
}
