//! Correctors and commutators as compositions of paraproduct primitives, the
//! refined (first-order Taylor) variants, the high-order paracontrolled
//! expansion of f(u)v, and the regularity-gain harness.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::littlewood_paley::{estimate_regularity, Cutoff};
use crate::paraproducts::{product, Calculus, Operand, TildeModel};
use crate::synthetic::{lacunary, lacunary_jittered};
use crate::torus_fields::{derivative, fft, Field, SpaceGrid};

/// Which paraproduct slot carries the defect in the C_L / C_V families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Low,
    High,
    Resonant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expand {
    First,
    Second,
}

/// The differential operator inside a C_L / C_V corrector.
#[derive(Clone, Copy, Debug)]
enum Derivation {
    L,
    V(usize),
}

impl Derivation {
    fn apply<T: Operand>(self, calc: &Calculus, f: &T) -> Result<T> {
        match self {
            Derivation::L => Ok(T::apply_l(calc, f)),
            Derivation::V(axis) => T::apply_v(calc, f, axis),
        }
    }
}

/// C(a,b,c) = Pi(P~_a b, c) - a Pi(b,c).
pub fn corrector_c<T: Operand>(calc: &Calculus, a: &T, b: &T, c: &T) -> Result<T> {
    let first = T::resonant(calc, &T::tilde(calc, a, b)?, c)?;
    Ok(first.minus(&T::mul(calc, a, &T::resonant(calc, b, c)?)?))
}

/// D(a,b,c) = Pi(P~_a b, c) - P_a Pi(b,c).
pub fn commutator_d<T: Operand>(calc: &Calculus, a: &T, b: &T, c: &T) -> Result<T> {
    let first = T::resonant(calc, &T::tilde(calc, a, b)?, c)?;
    Ok(first.minus(&T::para(calc, a, &T::resonant(calc, b, c)?)?))
}

/// R(a,b,c) = P_a P~_b c - P_{ab} c.
pub fn merge_r<T: Operand>(calc: &Calculus, a: &T, b: &T, c: &T) -> Result<T> {
    let first = T::para(calc, a, &T::tilde(calc, b, c)?)?;
    Ok(first.minus(&T::para(calc, &T::mul(calc, a, b)?, c)?))
}

/// R°(a,b,c) = P_a P_b c - P_{ab} c.
pub fn merge_r_circ<T: Operand>(calc: &Calculus, a: &T, b: &T, c: &T) -> Result<T> {
    let first = T::para(calc, a, &T::para(calc, b, c)?)?;
    Ok(first.minus(&T::para(calc, &T::mul(calc, a, b)?, c)?))
}

/// First: R°((a1,a2),b,c) = R°(P~_{a1}a2, b, c) - P_{a1} R°(a2,b,c), arguments (a1,a2,b,c).
/// Second: R°(a,(b1,b2),c) = R°(a, P~_{b1}b2, c) - R°(a b1, b2, c), arguments (a,b1,b2,c).
pub fn iterated_r_circ<T: Operand>(calc: &Calculus, variant: Expand, x: &T, y: &T, z: &T, w: &T) -> Result<T> {
    match variant {
        Expand::First => {
            let outer = merge_r_circ(calc, &T::tilde(calc, x, y)?, z, w)?;
            Ok(outer.minus(&T::para(calc, x, &merge_r_circ(calc, y, z, w)?)?))
        }
        Expand::Second => {
            let outer = merge_r_circ(calc, x, &T::tilde(calc, y, z)?, w)?;
            Ok(outer.minus(&merge_r_circ(calc, &T::mul(calc, x, y)?, z, w)?))
        }
    }
}

fn corrector_e<T: Operand>(calc: &Calculus, d: Derivation, variant: Variant, x: &T, y: &T, z: &T) -> Result<T> {
    match variant {
        // P_{D P~_{a1} a2} b - a1 P_{D a2} b
        Variant::Low => {
            let first = T::para(calc, &d.apply(calc, &T::tilde(calc, x, y)?)?, z)?;
            Ok(first.minus(&T::mul(calc, x, &T::para(calc, &d.apply(calc, y)?, z)?)?))
        }
        // P_{D a}(P~_{b1} b2) - b1 P_{D a} b2
        Variant::High => {
            let da = d.apply(calc, x)?;
            let first = T::para(calc, &da, &T::tilde(calc, y, z)?)?;
            Ok(first.minus(&T::mul(calc, y, &T::para(calc, &da, z)?)?))
        }
        // Pi(D P~_{a1} a2, b) - a1 Pi(D a2, b)
        Variant::Resonant => {
            let first = T::resonant(calc, &d.apply(calc, &T::tilde(calc, x, y)?)?, z)?;
            Ok(first.minus(&T::mul(calc, x, &T::resonant(calc, &d.apply(calc, y)?, z)?)?))
        }
    }
}

/// C_L^< ((a1,a2),b), C_L^> (a,(b1,b2)) or C_L ((a1,a2),b).
pub fn corrector_cl<T: Operand>(calc: &Calculus, variant: Variant, x: &T, y: &T, z: &T) -> Result<T> {
    corrector_e(calc, Derivation::L, variant, x, y, z)
}

/// The C_L family with V_i = sqrt(c0) d_i in place of L.
pub fn corrector_cv<T: Operand>(calc: &Calculus, variant: Variant, axis: usize, x: &T, y: &T, z: &T) -> Result<T> {
    corrector_e(calc, Derivation::V(axis), variant, x, y, z)
}

/// L(a,b) = L P~_a b - P_a L b for `a = [a]`; for longer `a` the nested
/// defects L((a1,a2),b) = L(P_{a1}a2, b) - P_{a1} L(a2, b) and
/// L(((a1,a2),a3),b) = L((P_{a1}a2, a3), b) - P_{a1} L((a2,a3), b).
pub fn commutator_l<T: Operand>(calc: &Calculus, a: &[T], b: &T) -> Result<T> {
    match a {
        [] => Err(Error::Config("commutator_l needs at least one left argument".into())),
        [a] => {
            let first = T::apply_l(calc, &T::tilde(calc, a, b)?);
            Ok(first.minus(&T::para(calc, a, &T::apply_l(calc, b))?))
        }
        [a1, a2, rest @ ..] if rest.len() <= 1 => {
            let mut merged = vec![T::para(calc, a1, a2)?];
            merged.extend(rest.iter().cloned());
            let inner: Vec<T> = a[1..].to_vec();
            let outer = commutator_l(calc, &merged, b)?;
            Ok(outer.minus(&T::para(calc, a1, &commutator_l(calc, &inner, b)?)?))
        }
        _ => Err(Error::Config(format!("commutator_l depth must be 1..=3, got {}", a.len()))),
    }
}

/// V_i(a,b) = V_i(P~_a b) - P_a V_i b, and
/// V_i((a1,a2),b) = V_i(P~_{a1}a2, b) - P_{a1} V_i(a2,b).
pub fn commutator_v<T: Operand>(calc: &Calculus, axis: usize, a: &[T], b: &T) -> Result<T> {
    match a {
        [a] => {
            let first = T::apply_v(calc, &T::tilde(calc, a, b)?, axis)?;
            Ok(first.minus(&T::para(calc, a, &T::apply_v(calc, b, axis)?)?))
        }
        [a1, a2] => {
            let outer = commutator_v(calc, axis, &[T::tilde(calc, a1, a2)?], b)?;
            Ok(outer.minus(&T::para(calc, a1, &commutator_v(calc, axis, std::slice::from_ref(a2), b)?)?))
        }
        _ => Err(Error::Config(format!("commutator_v depth must be 1 or 2, got {}", a.len()))),
    }
}

/// sum_i (d_i a)(x) * op(w_{x,i})(x) with the frozen weight
/// w_{x,i}(y) = sin(2 pi (y_i - x_i)) / (2 pi), a periodic stand-in for y_i - x_i.
/// By linearity op(w_x)(x) = (cos(2 pi x_i) op(sin) - sin(2 pi x_i) op(cos))(x) / (2 pi).
fn frozen_taylor_term(calc: &Calculus, a: &Field, op: impl Fn(&Field) -> Result<Field>) -> Result<Field> {
    let grid = *a.grid();
    let mut acc = Field::zeros(grid);
    for axis in 0..grid.dim() {
        let grad = derivative(a, axis);
        if grad.is_zero() {
            continue;
        }
        let sin = Field::from_fn(grid, |x| (2.0 * PI * x[axis]).sin());
        let cos = Field::from_fn(grid, |x| (2.0 * PI * x[axis]).cos());
        let frozen = product(calc.rule, &cos, &op(&sin)?)
            .sub(&product(calc.rule, &sin, &op(&cos)?))
            .scale(0.5 / PI);
        acc = acc.add(&product(calc.rule, &grad, &frozen));
    }
    Ok(acc)
}

/// C_(1)(a,b,c) = C(a,b,c) - sum_i d_i a . Pi(P~_{w_i} b, c) at the frozen point.
pub fn corrector_c_refined(calc: &Calculus, a: &Field, b: &Field, c: &Field) -> Result<Field> {
    let base = corrector_c(calc, a, b, c)?;
    let comp = frozen_taylor_term(calc, a, |w| Field::resonant(calc, &Field::tilde(calc, w, b)?, c))?;
    Ok(base.sub(&comp))
}

/// C_{L,(1)} family: the refined slot is a1 for `Low`/`Resonant` and b1 for `High`.
pub fn corrector_cl_refined(calc: &Calculus, variant: Variant, x: &Field, y: &Field, z: &Field) -> Result<Field> {
    let base = corrector_cl(calc, variant, x, y, z)?;
    let comp = match variant {
        Variant::Low => frozen_taylor_term(calc, x, |w| {
            Field::para(calc, &calc.op.apply(&Field::tilde(calc, w, y)?), z)
        })?,
        Variant::Resonant => frozen_taylor_term(calc, x, |w| {
            Field::resonant(calc, &calc.op.apply(&Field::tilde(calc, w, y)?), z)
        })?,
        Variant::High => {
            let la = calc.op.apply(x);
            frozen_taylor_term(calc, y, |w| Field::para(calc, &la, &Field::tilde(calc, w, z)?))?
        }
    };
    Ok(base.sub(&comp))
}

/// L_(1)(a,b) = L(a,b) - sum_i d_i a . L(w_i, b) at the frozen point.
pub fn commutator_l_refined(calc: &Calculus, a: &Field, b: &Field) -> Result<Field> {
    let base = commutator_l(calc, std::slice::from_ref(a), b)?;
    let comp = frozen_taylor_term(calc, a, |w| commutator_l(calc, std::slice::from_ref(w), b))?;
    Ok(base.sub(&comp))
}

/// A scalar map with its first three derivatives.
pub struct SmoothMap<'a> {
    pub derivatives: Vec<&'a (dyn Fn(f64) -> f64 + Sync)>,
}

impl<'a> SmoothMap<'a> {
    fn get(&self, k: usize) -> &(dyn Fn(f64) -> f64 + Sync) {
        self.derivatives[k]
    }
}

/// Pointwise g(u_1(x), ..., u_m(x)) evaluated on a 4x oversampled grid and
/// truncated back to the band of `grid`; polynomial maps of total degree <= 4
/// in band-limited inputs are reproduced without aliasing.
pub fn oversampled_map(inputs: &[&Field], g: impl Fn(&[f64]) -> f64) -> Field {
    let grid = *inputs[0].grid();
    let mid = grid.doubled();
    let big = mid.doubled();
    let up: Vec<Vec<f64>> = inputs
        .iter()
        .map(|f| fft::inverse(&big, &fft::pad(&mid, &fft::pad(&grid, f.spectrum()))))
        .collect();
    let mut buf = vec![0.0; inputs.len()];
    let vals: Vec<f64> = (0..big.len())
        .map(|i| {
            for (b, u) in buf.iter_mut().zip(&up) {
                *b = u[i];
            }
            g(&buf)
        })
        .collect();
    let spec = fft::truncate(&grid, &fft::truncate(&mid, &fft::forward(&big, &vals)));
    Field::from_spectrum(grid, &spec)
}

/// Third-order paracontrolled expansion of f(u)v:
/// P_{f'(u)v}u + 1/2 {P_{f''(u)v}u^2 - 2 P_{f''(u)uv}u}
/// + 1/6 {P_{f'''(u)v}u^3 - 3 P_{f'''(u)uv}u^2 + 3 P_{f'''(u)u^2v}u} + remainder.
/// Returns the six paraproduct terms (with their prefactors applied) and the remainder.
pub fn paracontrolled_expansion(calc: &Calculus, f: &SmoothMap, u: &Field, v: &Field) -> Result<(Vec<Field>, Field)> {
    if f.derivatives.len() != 4 {
        return Err(Error::Config(format!(
            "expansion needs f, f', f'', f''' ({} closures given)",
            f.derivatives.len()
        )));
    }
    u.check_grid(v)?;
    let coef = |k: usize, upow: i32| oversampled_map(&[u, v], |x| f.get(k)(x[0]) * x[0].powi(upow) * x[1]);
    let upow = |p: i32| oversampled_map(&[u], |x| x[0].powi(p));
    let (u2, u3) = (upow(2), upow(3));
    let p = |g: &Field, h: &Field| Field::para(calc, g, h);
    let terms = vec![
        p(&coef(1, 0), u)?,
        p(&coef(2, 0), &u2)?.scale(0.5),
        p(&coef(2, 1), u)?.scale(-1.0),
        p(&coef(3, 0), &u3)?.scale(1.0 / 6.0),
        p(&coef(3, 1), &u2)?.scale(-0.5),
        p(&coef(3, 2), u)?.scale(0.5),
    ];
    let total = oversampled_map(&[u, v], |x| f.get(0)(x[0]) * x[1]);
    let remainder = terms.iter().fold(total, |acc, t| acc.sub(t));
    Ok((terms, remainder))
}

/// Every operator covered by the regularity-gain harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorId {
    C,
    CRefined,
    D,
    R,
    RCirc,
    IteratedRCirc(Expand),
    Cl(Variant),
    ClRefined(Variant),
    Cv(Variant),
    L(u8),
    LRefined,
    V(u8),
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Low => "low",
        Variant::High => "high",
        Variant::Resonant => "resonant",
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorId::C => write!(f, "corrector_c"),
            OperatorId::CRefined => write!(f, "corrector_c_refined"),
            OperatorId::D => write!(f, "commutator_d"),
            OperatorId::R => write!(f, "merge_r"),
            OperatorId::RCirc => write!(f, "merge_r_circ"),
            OperatorId::IteratedRCirc(Expand::First) => write!(f, "iterated_r_circ:expand_first"),
            OperatorId::IteratedRCirc(Expand::Second) => write!(f, "iterated_r_circ:expand_second"),
            OperatorId::Cl(v) => write!(f, "corrector_cl:{}", variant_name(*v)),
            OperatorId::ClRefined(v) => write!(f, "corrector_cl_refined:{}", variant_name(*v)),
            OperatorId::Cv(v) => write!(f, "corrector_cv:{}", variant_name(*v)),
            OperatorId::L(d) => write!(f, "commutator_l:{d}"),
            OperatorId::LRefined => write!(f, "commutator_l_refined"),
            OperatorId::V(d) => write!(f, "commutator_v:{d}"),
        }
    }
}

impl FromStr for OperatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorId::catalogue()
            .into_iter()
            .find(|id| id.to_string() == s)
            .ok_or_else(|| {
                let names: Vec<String> = OperatorId::catalogue().iter().map(|i| i.to_string()).collect();
                Error::Config(format!("unknown operator '{s}'; known: {}", names.join(", ")))
            })
    }
}

/// Outcome of a hypothesis check: Ok(target exponent) or the violated condition.
type Hypothesis = std::result::Result<f64, String>;

fn within(x: f64, lo: f64, hi: f64, name: &str) -> std::result::Result<(), String> {
    if x > lo && x < hi {
        Ok(())
    } else {
        Err(format!("{name} = {x} not in ({lo}, {hi})"))
    }
}

fn holds(cond: bool, what: &str) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(format!("{what} fails"))
    }
}

impl OperatorId {
    pub fn catalogue() -> Vec<OperatorId> {
        use OperatorId::*;
        use Variant::*;
        vec![
            C,
            CRefined,
            D,
            R,
            RCirc,
            IteratedRCirc(Expand::First),
            IteratedRCirc(Expand::Second),
            Cl(Low),
            Cl(High),
            Cl(Resonant),
            ClRefined(Low),
            ClRefined(High),
            ClRefined(Resonant),
            Cv(Low),
            Cv(High),
            Cv(Resonant),
            L(1),
            L(2),
            L(3),
            LRefined,
            V(1),
            V(2),
        ]
    }

    pub fn arity(&self) -> usize {
        match self {
            OperatorId::IteratedRCirc(_) => 4,
            OperatorId::L(d) => *d as usize + 1,
            OperatorId::V(d) => *d as usize + 1,
            OperatorId::LRefined => 2,
            _ => 3,
        }
    }

    /// Intertwining model used when the harness evaluates the operator on
    /// time-constant fields. The L-family under the elliptic conjugation is
    /// identically zero, so the flat-torus model P~ = P is used there.
    pub fn tilde_model(&self) -> TildeModel {
        match self {
            OperatorId::C | OperatorId::CRefined | OperatorId::D | OperatorId::R => TildeModel::Conjugated,
            OperatorId::RCirc | OperatorId::IteratedRCirc(_) => TildeModel::Conjugated,
            _ => TildeModel::Flat,
        }
    }

    /// Unrefined counterpart of a refined operator, for the A/B comparison.
    pub fn baseline(&self) -> Option<OperatorId> {
        match self {
            OperatorId::CRefined => Some(OperatorId::C),
            OperatorId::ClRefined(v) => Some(OperatorId::Cl(*v)),
            OperatorId::LRefined => Some(OperatorId::L(1)),
            _ => None,
        }
    }

    /// Exponents at which the acceptance suite exercises the operator.
    pub fn default_exponents(&self) -> Vec<f64> {
        use OperatorId::*;
        use Variant::*;
        match self {
            C => vec![0.6, -0.4, -0.1],
            CRefined => vec![1.4, -0.6, -0.5],
            D => vec![0.4, 0.5, 0.6],
            R => vec![0.9, 0.3, 0.0],
            RCirc => vec![0.4, 0.4, -0.5],
            IteratedRCirc(Expand::First) => vec![0.4, 0.5, 0.5, -0.6],
            IteratedRCirc(Expand::Second) => vec![0.9, 0.45, 0.45, -0.5],
            Cl(Low) | Cl(Resonant) => vec![0.8, -0.3, 1.6],
            Cl(High) => vec![1.6, 0.8, -0.3],
            ClRefined(Low) | ClRefined(Resonant) => vec![1.4, -0.3, 1.2],
            ClRefined(High) => vec![1.2, 1.4, -0.3],
            Cv(Low) | Cv(Resonant) => vec![0.8, -0.3, 0.6],
            Cv(High) => vec![0.6, 0.8, -0.3],
            L(1) => vec![0.7, 0.9],
            L(2) => vec![0.45, 0.45, 1.5],
            L(_) => vec![0.3, 0.3, 0.4, 1.5],
            LRefined => vec![1.4, 0.9],
            V(1) => vec![0.7, 0.5],
            V(_) => vec![0.45, 0.45, 1.0],
        }
    }

    pub fn hypotheses_text(&self) -> &'static str {
        use OperatorId::*;
        match self {
            C => "a in (0,1), b+c < 0, 0 < a+b+c < 1; target a+b+c",
            CRefined => "a in (1,2), b+c < 0, a+b+c > 0; target a+b+c",
            D => "a, b, c in (0,3); target a+b+c",
            R => "a > 0 (bounded), b in (0,1); target b+c",
            RCirc => "a > 0 (bounded), b in (0,1); target a+b+c if a, b in (0,1/2), else b+c",
            IteratedRCirc(Expand::First) => "a1, a2 in (0,1), b > 0; target a1+a2+c",
            IteratedRCirc(Expand::Second) => "a > 0, b1, b2 in (0,1); target b1+b2+c",
            Cl(Variant::High) => "b1 in (0,1), a+b2-2 < 0, a+b1+b2-2 > 0; target a+b1+b2-2",
            Cl(_) => "a1 in (0,1), a2+b-2 < 0, a1+a2+b-2 > 0; target a1+a2+b-2",
            ClRefined(Variant::High) => "b1 in (1,2), a+b2-2 < 0, a+b1+b2-2 > 0; target a+b1+b2-2",
            ClRefined(_) => "a1 in (1,2), a2+b-2 < 0, a1+a2+b-2 > 0; target a1+a2+b-2",
            Cv(Variant::High) => "b1 in (0,1), a+b2-1 < 0, a+b1+b2-1 > 0; target a+b1+b2-1",
            Cv(_) => "a1 in (0,1), a2+b-1 < 0, a1+a2+b-1 > 0; target a1+a2+b-1",
            L(1) => "a in (0,1), a+b < 3; target a+b-2",
            L(2) => "a1, a2 in (0,1), a1+b < 3; target a1+a2+b-2",
            L(_) => "a1, a2, a3 in (0,1), a1+a2+b < 3, a2+b < 3; target a1+a2+a3+b-2",
            LRefined => "a in (1,2), a+b < 3; target a+b-2",
            V(1) => "a, b in (-3,3), a+b-1 in (-3,3); target a+b-1",
            V(_) => "a1, a2 in (0,1), a1+b < 3; target a1+a2+b-1",
        }
    }

    /// Checks the theorem's exponent hypotheses and returns the predicted
    /// output exponent.
    pub fn check_hypotheses(&self, e: &[f64]) -> Hypothesis {
        use OperatorId::*;
        if e.len() != self.arity() {
            return Err(format!("{self} takes {} exponents, got {}", self.arity(), e.len()));
        }
        let sum: f64 = e.iter().sum();
        match self {
            C => {
                within(e[0], 0.0, 1.0, "a")?;
                holds(e[1] + e[2] < 0.0, "b+c < 0")?;
                within(sum, 0.0, 1.0, "a+b+c")?;
                Ok(sum)
            }
            CRefined => {
                within(e[0], 1.0, 2.0, "a")?;
                holds(e[1] + e[2] < 0.0, "b+c < 0")?;
                holds(sum > 0.0, "a+b+c > 0")?;
                Ok(sum)
            }
            D => {
                for (x, n) in e.iter().zip(["a", "b", "c"]) {
                    within(*x, 0.0, 3.0, n)?;
                }
                Ok(sum)
            }
            R => {
                holds(e[0] > 0.0, "a > 0")?;
                within(e[1], 0.0, 1.0, "b")?;
                Ok(e[1] + e[2])
            }
            RCirc => {
                holds(e[0] > 0.0, "a > 0")?;
                within(e[1], 0.0, 1.0, "b")?;
                if e[0] < 0.5 && e[1] < 0.5 {
                    Ok(sum)
                } else {
                    Ok(e[1] + e[2])
                }
            }
            IteratedRCirc(Expand::First) => {
                within(e[0], 0.0, 1.0, "a1")?;
                within(e[1], 0.0, 1.0, "a2")?;
                holds(e[2] > 0.0, "b > 0")?;
                Ok(e[0] + e[1] + e[3])
            }
            IteratedRCirc(Expand::Second) => {
                holds(e[0] > 0.0, "a > 0")?;
                within(e[1], 0.0, 1.0, "b1")?;
                within(e[2], 0.0, 1.0, "b2")?;
                Ok(e[1] + e[2] + e[3])
            }
            Cl(v) | ClRefined(v) | Cv(v) => {
                let order = if matches!(self, Cv(_)) { 1.0 } else { 2.0 };
                let (lo, hi) = if matches!(self, ClRefined(_)) { (1.0, 2.0) } else { (0.0, 1.0) };
                match v {
                    Variant::High => {
                        within(e[1], lo, hi, "b1")?;
                        holds(e[0] + e[2] - order < 0.0, "a+b2-order < 0")?;
                    }
                    _ => {
                        within(e[0], lo, hi, "a1")?;
                        holds(e[1] + e[2] - order < 0.0, "a2+b-order < 0")?;
                    }
                }
                holds(sum - order > 0.0, "total-order > 0")?;
                Ok(sum - order)
            }
            L(1) => {
                within(e[0], 0.0, 1.0, "a")?;
                holds(sum < 3.0, "a+b < 3")?;
                Ok(sum - 2.0)
            }
            L(2) => {
                within(e[0], 0.0, 1.0, "a1")?;
                within(e[1], 0.0, 1.0, "a2")?;
                holds(e[0] + e[2] < 3.0, "a1+b < 3")?;
                Ok(sum - 2.0)
            }
            L(_) => {
                for (x, n) in e[..3].iter().zip(["a1", "a2", "a3"]) {
                    within(*x, 0.0, 1.0, n)?;
                }
                holds(e[0] + e[1] + e[3] < 3.0, "a1+a2+b < 3")?;
                holds(e[1] + e[3] < 3.0, "a2+b < 3")?;
                Ok(sum - 2.0)
            }
            LRefined => {
                within(e[0], 1.0, 2.0, "a")?;
                holds(sum < 3.0, "a+b < 3")?;
                Ok(sum - 2.0)
            }
            V(1) => {
                within(e[0], -3.0, 3.0, "a")?;
                within(e[1], -3.0, 3.0, "b")?;
                within(sum - 1.0, -3.0, 3.0, "a+b-1")?;
                Ok(sum - 1.0)
            }
            V(_) => {
                within(e[0], 0.0, 1.0, "a1")?;
                within(e[1], 0.0, 1.0, "a2")?;
                holds(e[0] + e[2] < 3.0, "a1+b < 3")?;
                Ok(sum - 1.0)
            }
        }
    }

    pub fn evaluate(&self, calc: &Calculus, x: &[Field]) -> Result<Field> {
        use OperatorId::*;
        if x.len() != self.arity() {
            return Err(Error::Config(format!("{self} takes {} arguments, got {}", self.arity(), x.len())));
        }
        match self {
            C => corrector_c(calc, &x[0], &x[1], &x[2]),
            CRefined => corrector_c_refined(calc, &x[0], &x[1], &x[2]),
            D => commutator_d(calc, &x[0], &x[1], &x[2]),
            R => merge_r(calc, &x[0], &x[1], &x[2]),
            RCirc => merge_r_circ(calc, &x[0], &x[1], &x[2]),
            IteratedRCirc(v) => iterated_r_circ(calc, *v, &x[0], &x[1], &x[2], &x[3]),
            Cl(v) => corrector_cl(calc, *v, &x[0], &x[1], &x[2]),
            ClRefined(v) => corrector_cl_refined(calc, *v, &x[0], &x[1], &x[2]),
            Cv(v) => corrector_cv(calc, *v, 0, &x[0], &x[1], &x[2]),
            L(_) => commutator_l(calc, &x[..x.len() - 1], &x[x.len() - 1]),
            LRefined => commutator_l_refined(calc, &x[0], &x[1]),
            V(_) => commutator_v(calc, 0, &x[..x.len() - 1], &x[x.len() - 1]),
        }
    }
}

/// Family of random inputs fed to the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputCorpus {
    /// One mode per block, on the block edge 2^j.
    Lacunary,
    /// One mode per block at a random frequency in (3 2^{j-2}, 2^j].
    JitteredLacunary,
}

impl InputCorpus {
    fn sample(self, grid: SpaceGrid, alpha: f64, seed: u64) -> Field {
        match self {
            InputCorpus::Lacunary => lacunary(grid, alpha, seed),
            InputCorpus::JitteredLacunary => lacunary_jittered(grid, alpha, seed),
        }
    }

    fn describe(self) -> &'static str {
        match self {
            InputCorpus::Lacunary => "sum_j 2^{-j s} eps_j cos(2 pi 2^j x + phi_j), one series per slot",
            InputCorpus::JitteredLacunary => {
                "sum_j 2^{-j s} eps_j cos(2 pi k_j x + phi_j), k_j uniform in (3 2^{j-2}, 2^j], one series per slot"
            }
        }
    }
}

/// Harness parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GainConfig {
    pub dim: usize,
    pub n: usize,
    pub j_min: i32,
    pub tolerance: f64,
    pub min_refined_gain: f64,
    pub c0: f64,
    /// Dyadic cutoffs inside the paraproducts; the commutator gains need smooth ones.
    pub cutoff: Cutoff,
    pub corpus: InputCorpus,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig { dim: 1, n: 1 << 16, j_min: 7, tolerance: 0.15, min_refined_gain: 0.3, c0: 1.0, cutoff: Cutoff::Smooth, corpus: InputCorpus::JitteredLacunary }
    }
}

impl GainConfig {
    fn window(&self, grid: &SpaceGrid) -> (i32, i32) {
        (self.j_min, grid.finest_block() - 2)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trial {
    pub seed: u64,
    pub exponent: Option<f64>,
    pub r2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesisViolated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub operator: String,
    pub trials: Vec<Trial>,
    pub mean: f64,
    pub gain: f64,
    pub required_gain: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GainReport {
    pub note: String,
    pub operator: String,
    pub hypotheses: String,
    pub tilde_model: TildeModel,
    pub config: GainConfig,
    pub window: (i32, i32),
    pub input_exponents: Vec<f64>,
    pub input_construction: String,
    pub target: Option<f64>,
    pub violation: Option<String>,
    pub trials: Vec<Trial>,
    pub mean: Option<f64>,
    pub spread: Option<f64>,
    pub baseline: Option<BaselineComparison>,
    pub verdict: Verdict,
}

impl GainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64)
}

fn run_trials(
    id: OperatorId,
    calc: &Calculus,
    grid: SpaceGrid,
    window: (i32, i32),
    exps: &[f64],
    seed: u64,
    trials: usize,
    corpus: InputCorpus,
) -> Vec<Trial> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            let inputs: Vec<Field> =
                exps.iter().enumerate().map(|(k, &e)| corpus.sample(grid, e, s.wrapping_mul(8).wrapping_add(k as u64))).collect();
            match id.evaluate(calc, &inputs).and_then(|out| estimate_regularity(&out, window.0, window.1)) {
                Ok(est) => Trial { seed: s, exponent: Some(est.exponent), r2: Some(est.r2), error: None },
                Err(e) => Trial { seed: s, exponent: None, r2: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

fn mean_spread(trials: &[Trial]) -> Option<(f64, f64)> {
    let xs: Vec<f64> = trials.iter().map(|t| t.exponent).collect::<Option<Vec<_>>>()?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Some((mean, var.sqrt()))
}

/// Measure the output exponent of `id` on `trials` independent lacunary input
/// tuples with the given exponents and compare with the predicted gain.
pub fn regularity_gain_report(
    id: OperatorId,
    input_exponents: &[f64],
    seed: u64,
    trials: usize,
    config: &GainConfig,
) -> Result<GainReport> {
    if trials < 5 {
        return Err(Error::Config(format!("at least 5 trials are required, got {trials}")));
    }
    let grid = SpaceGrid::new(config.dim, config.n)?;
    let window = config.window(&grid);
    let calc = Calculus::new(config.c0)?.with_tilde(id.tilde_model()).with_cutoff(config.cutoff);
    let mut report = GainReport {
        note: format!(
            "pass when the mean measured exponent is at least the predicted one minus {} (the regression \
             noise floor on lacunary inputs); refined operators must also beat their unrefined form by {}",
            config.tolerance, config.min_refined_gain
        ),
        operator: id.to_string(),
        hypotheses: id.hypotheses_text().to_string(),
        tilde_model: id.tilde_model(),
        config: config.clone(),
        window,
        input_exponents: input_exponents.to_vec(),
        input_construction: config.corpus.describe().into(),
        target: None,
        violation: None,
        trials: vec![],
        mean: None,
        spread: None,
        baseline: None,
        verdict: Verdict::HypothesisViolated,
    };
    let target = match id.check_hypotheses(input_exponents) {
        Ok(t) => t,
        Err(why) => {
            report.violation = Some(why);
            return Ok(report);
        }
    };
    report.target = Some(target);
    report.trials = run_trials(id, &calc, grid, window, input_exponents, seed, trials, config.corpus);
    let stats = mean_spread(&report.trials);
    report.mean = stats.map(|s| s.0);
    report.spread = stats.map(|s| s.1);
    let mut pass = matches!(report.mean, Some(m) if m >= target - config.tolerance);
    if let Some(base) = id.baseline() {
        let bcalc = Calculus::new(config.c0)?.with_tilde(base.tilde_model()).with_cutoff(config.cutoff);
        let btrials = run_trials(base, &bcalc, grid, window, input_exponents, seed, trials, config.corpus);
        let bmean = mean_spread(&btrials).map(|s| s.0).unwrap_or(f64::NAN);
        let gain = report.mean.unwrap_or(f64::NAN) - bmean;
        let passed = gain >= config.min_refined_gain;
        pass &= passed;
        report.baseline = Some(BaselineComparison {
            operator: base.to_string(),
            trials: btrials,
            mean: bmean,
            gain,
            required_gain: config.min_refined_gain,
            passed,
        });
    }
    report.verdict = if pass { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}
