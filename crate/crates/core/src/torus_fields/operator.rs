use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{apply_complex_multiplier, apply_multiplier, Field, SpaceTimeField};
use super::grid::{norm2, Freq};
use crate::error::{Error, Result};

/// L = -sum_i V_i^2 with V_i = sqrt(c) d_i.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum OperatorL {
    Constant(f64),
    /// Experimental: applied pseudo-spectrally, no inverse or propagator.
    #[serde(skip)]
    Variable(Field),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeatKind {
    P,
    Q,
}

impl OperatorL {
    pub fn constant(c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Domain(format!("diffusivity must be positive, got {c0}")));
        }
        Ok(OperatorL::Constant(c0))
    }

    pub fn variable(c: Field) -> Result<Self> {
        if c.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::Domain("variable diffusivity must be positive".into()));
        }
        Ok(OperatorL::Variable(c))
    }

    pub fn c0(&self) -> Result<f64> {
        match self {
            OperatorL::Constant(c) => Ok(*c),
            OperatorL::Variable(_) => {
                Err(Error::Unsupported("operation needs a constant-coefficient L".into()))
            }
        }
    }

    /// m(k) = c0 (2 pi |k|)^2.
    pub fn symbol(c0: f64, k: Freq) -> f64 {
        c0 * 4.0 * PI * PI * norm2(k) as f64
    }

    pub fn apply(&self, f: &Field) -> Field {
        match self {
            OperatorL::Constant(c0) => {
                apply_multiplier(f, |k| Self::symbol(*c0, k)).expect("finite symbol")
            }
            OperatorL::Variable(c) => {
                let sq = c.map(f64::sqrt);
                let mut acc = Field::zeros(*f.grid());
                for axis in 0..f.grid().dim() {
                    let vi = sq.mul_pointwise(&derivative(f, axis));
                    let vv = sq.mul_pointwise(&derivative(&vi, axis));
                    acc = acc.sub(&vv);
                }
                acc
            }
        }
    }

    /// V_i = sqrt(c0) d_i.
    pub fn apply_v(&self, f: &Field, axis: usize) -> Result<Field> {
        match self {
            OperatorL::Constant(c0) => Ok(derivative(f, axis).scale(c0.sqrt())),
            OperatorL::Variable(c) => Ok(c.map(f64::sqrt).mul_pointwise(&derivative(f, axis))),
        }
    }

    /// L^{-1} on nonzero modes; the mean is passed through unchanged.
    pub fn apply_inverse_nonzero(&self, f: &Field) -> Result<Field> {
        let c0 = self.c0()?;
        apply_multiplier(f, |k| if norm2(k) == 0 { 1.0 } else { 1.0 / Self::symbol(c0, k) })
    }

    pub fn semigroup(&self, f: &Field, t: f64) -> Result<Field> {
        let c0 = self.c0()?;
        apply_multiplier(f, |k| (-t * Self::symbol(c0, k)).exp())
    }

    /// P_t^{(b)} or Q_t^{(b)} as Fourier multipliers.
    pub fn heat(&self, f: &Field, t: f64, b: u32, kind: HeatKind) -> Result<Field> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("heat parameter t must be positive, got {t}")));
        }
        if b < 1 {
            return Err(Error::Domain("heat order b must be >= 1".into()));
        }
        let c0 = self.c0()?;
        apply_multiplier(f, |k| heat_symbol(t * Self::symbol(c0, k), b, kind))
    }
}

/// Symbol of P^{(b)} or Q^{(b)} at x = t m(k).
///
/// P has p_b(x) = sum_{n<b} x^n/n!: with P = p e^{-x}, -x d/dx P = x(p - p') e^{-x}
/// = x^b/(b-1)! e^{-x}, which is Q, and p_b(0) = 1.
pub fn heat_symbol(x: f64, b: u32, kind: HeatKind) -> f64 {
    let e = (-x).exp();
    match kind {
        HeatKind::Q => {
            let mut fact = 1.0;
            for i in 1..b {
                fact *= i as f64;
            }
            x.powi(b as i32) * e / fact
        }
        HeatKind::P => {
            let mut term = 1.0;
            let mut sum = 1.0;
            for n in 1..b {
                term *= x / n as f64;
                sum += term;
            }
            sum * e
        }
    }
}

/// Constant kappa_b in Q_t^{(b)} Q_s^{(b)} = kappa_b (ts/(t+s)^2)^b Q_{t+s}^{(2b)}
/// under the (b-1)! normalisation: (2b-1)!/((b-1)!)^2, equal to 1 for b = 1.
pub fn q_composition_constant(b: u32) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    fact(2 * b - 1) / (fact(b - 1) * fact(b - 1))
}

/// Spectral partial derivative along `axis`; zero on the Nyquist mode.
pub fn derivative(f: &Field, axis: usize) -> Field {
    let grid = *f.grid();
    apply_complex_multiplier(f, |k| {
        if grid.is_nyquist(k) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * k[axis] as f64)
        }
    })
}

/// (d_t + L) u: spectral L per slice, second-order differences in time.
pub fn apply_parabolic(op: &OperatorL, u: &SpaceTimeField) -> Result<SpaceTimeField> {
    let ns = u.slices().len();
    if ns < 3 {
        return Err(Error::Config(format!("need at least 3 time slices, got {ns}")));
    }
    let dt = u.times().dt();
    let s = u.slices();
    let out: Vec<Field> = (0..ns)
        .into_par_iter()
        .map(|m| {
            let dtu = if m == 0 {
                s[0].scale(-3.0).add(&s[1].scale(4.0)).sub(&s[2])
            } else if m == ns - 1 {
                s[m].scale(3.0).sub(&s[m - 1].scale(4.0)).add(&s[m - 2])
            } else {
                s[m + 1].sub(&s[m - 1])
            }
            .scale(0.5 / dt);
            op.apply(&s[m]).add(&dtu)
        })
        .collect();
    SpaceTimeField::new(*u.times(), out)
}

/// Mild solution of (d_t + L) u = source, u(0) = u0: exact propagator per step,
/// source linearly interpolated over each step and integrated exactly against
/// the kernel, u_{m+1} = E u_m + dt ((phi1 - phi2) s_m + phi2 s_{m+1}).
/// For dt L -> 0 the weights reduce to the trapezoidal rule.
pub fn duhamel_inverse(op: &OperatorL, source: &SpaceTimeField, u0: &Field) -> Result<SpaceTimeField> {
    let c0 = op.c0()?;
    let grid = *source.grid();
    if *u0.grid() != grid {
        return Err(Error::Config(format!(
            "initial datum grid {:?} differs from source grid {:?}",
            u0.grid(),
            grid
        )));
    }
    let dt = source.times().dt();
    let weights: Vec<(f64, f64, f64)> = (0..grid.len())
        .map(|i| {
            let x = dt * OperatorL::symbol(c0, grid.freq(i));
            let (p1, p2) = phi12(x);
            ((-x).exp(), dt * (p1 - p2), dt * p2)
        })
        .collect();
    let mut cur: Vec<Complex64> = u0.spectrum().to_vec();
    let mut slices = Vec::with_capacity(source.slices().len());
    slices.push(Field::from_spectrum(grid, &cur));
    for m in 0..source.slices().len() - 1 {
        let sm = source.slice(m).spectrum();
        let sn = source.slice(m + 1).spectrum();
        for i in 0..cur.len() {
            let (e, w0, w1) = weights[i];
            cur[i] = e * cur[i] + w0 * sm[i] + w1 * sn[i];
        }
        slices.push(Field::from_spectrum(grid, &cur));
    }
    SpaceTimeField::new(*source.times(), slices)
}

/// phi1(x) = (1 - e^{-x})/x and phi2(x) = (x - 1 + e^{-x})/x^2.
pub fn phi12(x: f64) -> (f64, f64) {
    if x < 1e-3 {
        let p1 = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
        let p2 = 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0;
        (p1, p2)
    } else {
        let p1 = -(-x).exp_m1() / x;
        (p1, (1.0 - p1) / x)
    }
}

/// Free heat flow t -> e^{-tL} u0 sampled on `times`.
pub fn free_propagation(
    op: &OperatorL,
    u0: &Field,
    times: super::field::TimeGrid,
) -> Result<SpaceTimeField> {
    let slices = (0..times.slices())
        .map(|m| op.semigroup(u0, times.time(m)))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(times, slices)
}

#[cfg(test)]
mod tests {
    use super::super::field::TimeGrid;
    use super::super::grid::SpaceGrid;
    use super::*;

    fn cosine(n: usize) -> Field {
        Field::from_fn(SpaceGrid::new(1, n).unwrap(), |x| (2.0 * PI * x[0]).cos())
    }

    #[test]
    fn p_symbol_solves_defining_relation() {
        for b in 1..5 {
            for &x in &[0.0, 0.3, 1.7, 6.0] {
                let h = 1e-5;
                let dp = (heat_symbol(x + h, b, HeatKind::P) - heat_symbol(x - h, b, HeatKind::P))
                    / (2.0 * h);
                assert!((-x * dp - heat_symbol(x, b, HeatKind::Q)).abs() < 1e-8);
            }
            assert_eq!(heat_symbol(0.0, b, HeatKind::P), 1.0);
        }
    }

    #[test]
    fn heat_domain_checks() {
        let f = cosine(16);
        let l = OperatorL::constant(1.0).unwrap();
        assert!(l.heat(&f, 0.0, 1, HeatKind::P).is_err());
        let var = OperatorL::variable(Field::constant(*f.grid(), 1.0)).unwrap();
        assert!(matches!(var.heat(&f, 0.1, 1, HeatKind::Q), Err(Error::Unsupported(_))));
    }

    #[test]
    fn p_near_zero_is_identity_and_q_kills_constants() {
        let f = cosine(32);
        let l = OperatorL::constant(0.7).unwrap();
        assert!(l.heat(&f, 1e-8, 2, HeatKind::P).unwrap().max_abs_diff(&f) < 1e-6);
        let one = Field::constant(*f.grid(), 1.0);
        assert!(l.heat(&one, 0.3, 1, HeatKind::Q).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn variable_mode_with_constant_coefficient_matches_constant_mode() {
        let f = Field::from_fn(SpaceGrid::new(2, 16).unwrap(), |x| {
            (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos()
        });
        let a = OperatorL::constant(1.3).unwrap().apply(&f);
        let b = OperatorL::variable(Field::constant(*f.grid(), 1.3)).unwrap().apply(&f);
        assert!(a.max_abs_diff(&b) < 1e-9);
    }

    #[test]
    fn parabolic_of_linear_in_time_is_one() {
        let g = SpaceGrid::new(1, 16).unwrap();
        let times = TimeGrid::new(0.5, 8).unwrap();
        let u = SpaceTimeField::from_fn(g, times, |t, _| t);
        let l = OperatorL::constant(1.0).unwrap();
        let r = apply_parabolic(&l, &u).unwrap();
        let one = SpaceTimeField::from_fn(g, times, |_, _| 1.0);
        assert!(r.max_abs_diff(&one) < 1e-10);
    }

    #[test]
    fn duhamel_free_flow_and_constant_source() {
        let f = cosine(16);
        let g = *f.grid();
        let c0 = 0.5;
        let l = OperatorL::constant(c0).unwrap();
        let times = TimeGrid::new(0.1, 10).unwrap();
        let u = duhamel_inverse(&l, &SpaceTimeField::zeros(g, times), &f).unwrap();
        for m in 0..times.slices() {
            let want = f.scale((-c0 * 4.0 * PI * PI * times.time(m)).exp());
            assert!(u.slice(m).max_abs_diff(&want) <= 1e-8 * want.sup_norm().max(1e-300));
        }
        let one = SpaceTimeField::from_fn(g, times, |_, _| 1.0);
        let v = duhamel_inverse(&l, &one, &Field::zeros(g)).unwrap();
        let t = SpaceTimeField::from_fn(g, times, |t, _| t);
        assert!(v.max_abs_diff(&t) < 1e-10);
    }

    #[test]
    fn duhamel_residual_is_second_order() {
        let g = SpaceGrid::new(1, 16).unwrap();
        let l = OperatorL::constant(0.2).unwrap();
        let src = |t: f64, x: [f64; 2]| {
            (6.0 * PI * t).cos() * (2.0 * PI * x[0]).sin() + t * t * (4.0 * PI * x[0]).cos()
        };
        let pts: Vec<(f64, f64)> = [20usize, 40, 80, 160]
            .iter()
            .map(|&steps| {
                let times = TimeGrid::new(0.5, steps).unwrap();
                let s = SpaceTimeField::from_fn(g, times, src);
                let u = duhamel_inverse(&l, &s, &Field::zeros(g)).unwrap();
                let r = apply_parabolic(&l, &u).unwrap().max_abs_diff(&s);
                (times.dt().log2(), r.log2())
            })
            .collect();
        let (slope, _, _) = crate::littlewood_paley::linear_fit(&pts);
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn heat_mode_is_in_parabolic_kernel() {
        let g = SpaceGrid::new(1, 16).unwrap();
        let c0 = 0.3;
        let l = OperatorL::constant(c0).unwrap();
        let err = |steps: usize| {
            let times = TimeGrid::new(0.2, steps).unwrap();
            let u = SpaceTimeField::from_fn(g, times, |t, x| {
                (-c0 * 4.0 * PI * PI * t).exp() * (2.0 * PI * x[0]).cos()
            });
            apply_parabolic(&l, &u).unwrap().sup_norm()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn q_composition_law() {
        let g = SpaceGrid::new(2, 16).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).sin() + (6.0 * PI * x[0]).cos());
        let l = OperatorL::constant(0.05).unwrap();
        for b in 1..4 {
            let (t, s) = (0.3, 0.7);
            let lhs = l.heat(&l.heat(&f, s, b, HeatKind::Q).unwrap(), t, b, HeatKind::Q).unwrap();
            let rhs = l.heat(&f, t + s, 2 * b, HeatKind::Q).unwrap().scale(
                q_composition_constant(b) * (t * s / ((t + s) * (t + s))).powi(b as i32),
            );
            assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * lhs.sup_norm(), "b = {b}");
        }
        assert_eq!(q_composition_constant(1), 1.0);
        assert_eq!(q_composition_constant(2), 6.0);
    }
}
