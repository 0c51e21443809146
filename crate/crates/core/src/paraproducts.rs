//! Bony paraproduct and resonant operators on dyadic blocks, the
//! continuous-parameter (heat semigroup) paraproduct, and the intertwined
//! paraproduct P~ = L^{-1} P L.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use num_complex::Complex64;

use crate::littlewood_paley::{block_index, block_weight, low_pass_weight, Cutoff};
use crate::torus_fields::{
    apply_parabolic, duhamel_inverse, fft, Field, Freq, HeatKind, OperatorL, SpaceGrid, SpaceTimeField,
};

/// How pointwise products are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ProductRule {
    /// 2x zero padding then truncation to the grid band.
    #[default]
    Dealiased,
    /// Plain grid-pointwise product: aliased, but associative.
    Collocation,
}

/// Realisation of the intertwined paraproduct.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TildeModel {
    /// L^{-1} P (L .) on space fields, (d_t+L)^{-1} P (d_t+L) on space-time fields.
    #[default]
    Conjugated,
    /// P~ replaced by P itself, the time-independent flat-torus model.
    Flat,
}

/// The operator L together with the product and intertwining conventions.
#[derive(Clone, Debug)]
pub struct Calculus {
    pub op: OperatorL,
    pub rule: ProductRule,
    pub tilde: TildeModel,
    /// Dyadic cutoffs used inside P and Pi.
    pub cutoff: Cutoff,
}

impl Calculus {
    pub fn new(c0: f64) -> Result<Self> {
        Ok(Calculus { op: OperatorL::constant(c0)?, rule: ProductRule::Dealiased, tilde: TildeModel::Conjugated, cutoff: Cutoff::Sharp })
    }

    pub fn with_rule(mut self, rule: ProductRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_tilde(mut self, tilde: TildeModel) -> Self {
        self.tilde = tilde;
        self
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn c0(&self) -> f64 {
        self.op.c0().expect("calculus is built on a constant-coefficient L")
    }
}

/// Product of two fields on the same grid under `rule`.
pub fn product(rule: ProductRule, a: &Field, b: &Field) -> Field {
    match rule {
        ProductRule::Collocation => a.mul_pointwise(b),
        ProductRule::Dealiased => dealiased_product(a, b),
    }
}

pub fn dealiased_product(a: &Field, b: &Field) -> Field {
    let grid = *a.grid();
    let big = grid.doubled();
    let pa = Field::from_spectrum(big, &fft::pad(&grid, a.spectrum()));
    let pb = Field::from_spectrum(big, &fft::pad(&grid, b.spectrum()));
    let prod = pa.mul_pointwise(&pb);
    Field::from_spectrum(grid, &fft::truncate(&grid, prod.spectrum()))
}

fn check(a: &Field, b: &Field) -> Result<()> {
    a.check_grid(b)
}

/// Fourier-side selection of dyadic blocks.
#[derive(Clone, Copy, Debug)]
enum Blocks {
    /// S_m.
    UpTo(i32),
    /// Delta_j.
    Only(i32),
    /// Delta_{j-1} + Delta_j + Delta_{j+1}.
    Near(i32),
}

impl Blocks {
    fn weight(self, grid: &SpaceGrid, cutoff: Cutoff, k: Freq, sharp_index: i32) -> f64 {
        if cutoff == Cutoff::Sharp {
            let keep = match self {
                Blocks::UpTo(m) => sharp_index <= m,
                Blocks::Only(j) => sharp_index == j,
                Blocks::Near(j) => (sharp_index - j).abs() <= 1,
            };
            return f64::from(u8::from(keep));
        }
        match self {
            Blocks::UpTo(m) => low_pass_weight(grid, k, m, cutoff),
            Blocks::Only(j) => block_weight(grid, k, j, cutoff),
            Blocks::Near(j) => low_pass_weight(grid, k, j + 1, cutoff) - low_pass_weight(grid, k, j - 2, cutoff),
        }
    }
}

/// sum over `pairs` of (a restricted to its blocks) x (b restricted to its
/// blocks). Products are accumulated on the working grid (doubled when
/// de-aliasing) and brought back with a single transform.
fn block_pair_products(rule: ProductRule, cutoff: Cutoff, a: &Field, b: &Field, pairs: &[(Blocks, Blocks)]) -> Field {
    let grid = *a.grid();
    let freqs: Vec<(Freq, i32)> = (0..grid.len())
        .map(|i| {
            let k = grid.freq(i);
            (k, block_index(&grid, k))
        })
        .collect();
    let work = match rule {
        ProductRule::Dealiased => grid.doubled(),
        ProductRule::Collocation => grid,
    };
    let realise = |spec: &[Complex64], sel: Blocks| -> Option<Vec<f64>> {
        let masked: Vec<Complex64> =
            spec.iter().zip(&freqs).map(|(&c, &(k, j))| c * sel.weight(&grid, cutoff, k, j)).collect();
        if masked.iter().all(|c| c.norm_sqr() == 0.0) {
            return None;
        }
        Some(match rule {
            ProductRule::Dealiased => fft::inverse(&work, &fft::pad(&grid, &masked)),
            ProductRule::Collocation => fft::inverse(&grid, &masked),
        })
    };
    let (sa, sb) = (a.spectrum(), b.spectrum());
    let acc = pairs
        .par_iter()
        .filter_map(|&(ka, kb)| {
            let x = realise(sa, ka)?;
            let y = realise(sb, kb)?;
            Some(x.iter().zip(&y).map(|(p, q)| p * q).collect::<Vec<f64>>())
        })
        .reduce(
            || vec![0.0; work.len()],
            |mut u, v| {
                u.iter_mut().zip(&v).for_each(|(p, q)| *p += q);
                u
            },
        );
    match rule {
        ProductRule::Collocation => Field::from_vec(grid, acc),
        ProductRule::Dealiased => {
            let big = fft::forward(&work, &acc);
            Field::from_spectrum(grid, &fft::truncate(&grid, &big))
        }
    }
}

/// P_a b = sum_{i < j-1} Delta_i a Delta_j b = sum_j S_{j-2} a Delta_j b.
pub fn para(rule: ProductRule, a: &Field, b: &Field) -> Result<Field> {
    para_with(rule, Cutoff::Sharp, a, b)
}

pub fn para_with(rule: ProductRule, cutoff: Cutoff, a: &Field, b: &Field) -> Result<Field> {
    check(a, b)?;
    let jmax = a.grid().finest_block();
    let pairs: Vec<(Blocks, Blocks)> = (1..=jmax).map(|j| (Blocks::UpTo(j - 2), Blocks::Only(j))).collect();
    Ok(block_pair_products(rule, cutoff, a, b, &pairs))
}

/// Pi(a,b) = sum_{|i-j| <= 1} Delta_i a Delta_j b.
pub fn resonant(rule: ProductRule, a: &Field, b: &Field) -> Result<Field> {
    resonant_with(rule, Cutoff::Sharp, a, b)
}

pub fn resonant_with(rule: ProductRule, cutoff: Cutoff, a: &Field, b: &Field) -> Result<Field> {
    check(a, b)?;
    let jmax = a.grid().finest_block();
    let pairs: Vec<(Blocks, Blocks)> = (-1..=jmax).map(|i| (Blocks::Only(i), Blocks::Near(i))).collect();
    Ok(block_pair_products(rule, cutoff, a, b, &pairs))
}

/// (P_a b, Pi(a,b), P_b a); the parts sum to the product under `rule`.
pub fn decompose_product(rule: ProductRule, a: &Field, b: &Field) -> Result<(Field, Field, Field)> {
    Ok((para(rule, a, b)?, resonant(rule, a, b)?, para(rule, b, a)?))
}

/// Elliptic stand-in for P~ on time-constant fields: L^{-1} P_a (L b) on the
/// nonzero modes, with the mean taken from P_a b.
pub fn para_tilde_elliptic(calc: &Calculus, a: &Field, b: &Field) -> Result<Field> {
    match calc.tilde {
        TildeModel::Flat => para_with(calc.rule, calc.cutoff, a, b),
        TildeModel::Conjugated => {
            let lb = calc.op.apply(b);
            let inner = para_with(calc.rule, calc.cutoff, a, &lb)?;
            let t = calc.op.apply_inverse_nonzero(&inner)?;
            let mean_fix = para_with(calc.rule, calc.cutoff, a, b)?.mean() - t.mean();
            Ok(t.map(|v| v + mean_fix))
        }
    }
}

/// P~_a b := (d_t+L)^{-1} P_a ((d_t+L) b), slice-wise paraproduct, zero
/// initial slice for the inversion.
pub fn para_tilde(calc: &Calculus, a: &SpaceTimeField, b: &SpaceTimeField) -> Result<SpaceTimeField> {
    a.check_compatible(b)?;
    match calc.tilde {
        TildeModel::Flat => para_st(calc, a, b),
        TildeModel::Conjugated => {
            let lb = apply_parabolic(&calc.op, b)?;
            let inner = para_st(calc, a, &lb)?;
            duhamel_inverse(&calc.op, &inner, &Field::zeros(*a.grid()))
        }
    }
}

pub fn para_st(calc: &Calculus, a: &SpaceTimeField, b: &SpaceTimeField) -> Result<SpaceTimeField> {
    a.check_compatible(b)?;
    let slices = a
        .slices()
        .par_iter()
        .zip(b.slices())
        .map(|(x, y)| para_with(calc.rule, calc.cutoff, x, y))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(*a.times(), slices)
}

pub fn resonant_st(calc: &Calculus, a: &SpaceTimeField, b: &SpaceTimeField) -> Result<SpaceTimeField> {
    a.check_compatible(b)?;
    let slices = a
        .slices()
        .par_iter()
        .zip(b.slices())
        .map(|(x, y)| resonant_with(calc.rule, calc.cutoff, x, y))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(*a.times(), slices)
}

pub fn product_st(rule: ProductRule, a: &SpaceTimeField, b: &SpaceTimeField) -> SpaceTimeField {
    a.zip_slices(b, |x, y| product(rule, x, y))
}

/// Fields the corrector algebra can act on: space fields use the elliptic
/// stand-in for P~, space-time fields the parabolic conjugation.
pub trait Operand: Clone + Send + Sync + Sized {
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn times(&self, s: f64) -> Self;
    fn mul(calc: &Calculus, a: &Self, b: &Self) -> Result<Self>;
    fn para(calc: &Calculus, a: &Self, b: &Self) -> Result<Self>;
    fn resonant(calc: &Calculus, a: &Self, b: &Self) -> Result<Self>;
    fn tilde(calc: &Calculus, a: &Self, b: &Self) -> Result<Self>;
    fn apply_l(calc: &Calculus, a: &Self) -> Self;
    fn apply_v(calc: &Calculus, a: &Self, axis: usize) -> Result<Self>;
}

impl Operand for Field {
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn minus(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn times(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn mul(calc: &Calculus, a: &Self, b: &Self) -> Result<Self> {
        check(a, b)?;
        Ok(product(calc.rule, a, b))
    }
    fn para(calc: &Calculus, a: &Self, b: &Self) -> Result<Self> {
        para_with(calc.rule, calc.cutoff, a, b)
    }
    fn resonant(calc: &Calculus, a: &Self, b: &Self) -> Result<Self> {
        resonant_with(calc.rule, calc.cutoff, a, b)
    }
    fn tilde(calc: &Calculus, a: &Self, b: &Self) -> Result<Self> {
        para_tilde_elliptic(calc, a, b)
    }
    fn apply_l(calc: &Calculus, a: &Self) -> Self {
        calc.op.apply(a)
    }
    fn apply_v(calc: &Calculus, a: &Self, axis: usize) -> Result<Self> {
        check_axis(a.grid(), axis)?;
        calc.op.apply_v(a, axis)
    }
}

impl Operand for SpaceTimeField {
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn minus(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn times(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn mul(calc: &Calculus, a: &Self, b: &Self) -> Result<Self> {
        a.check_compatible(b)?;
        Ok(product_st(calc.rule, a, b))
    }
    fn para(calc: &Calculus, a: &Self, b: &Self) -> Result<Self> {
        para_st(calc, a, b)
    }
    fn resonant(calc: &Calculus, a: &Self, b: &Self) -> Result<Self> {
        resonant_st(calc, a, b)
    }
    fn tilde(calc: &Calculus, a: &Self, b: &Self) -> Result<Self> {
        para_tilde(calc, a, b)
    }
    fn apply_l(calc: &Calculus, a: &Self) -> Self {
        a.map_slices(|f| calc.op.apply(f))
    }
    fn apply_v(calc: &Calculus, a: &Self, axis: usize) -> Result<Self> {
        check_axis(a.grid(), axis)?;
        a.try_map_slices(|f| calc.op.apply_v(f, axis))
    }
}

fn check_axis(grid: &SpaceGrid, axis: usize) -> Result<()> {
    if axis >= grid.dim() {
        return Err(Error::Config(format!("axis {axis} out of range for a {}-d grid", grid.dim())));
    }
    Ok(())
}

/// Geometric quadrature parameters for the semigroup paraproduct.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SemigroupQuadrature {
    pub order: u32,
    pub levels: usize,
    pub t_min: f64,
}

/// Parts of the semigroup decomposition of a product.
#[derive(Clone, Debug)]
pub struct SemigroupParts {
    /// int Q_t(P_t a . P_t b) dt/t
    pub outer: Field,
    /// int P_t(Q_t a . P_t b) dt/t
    pub left: Field,
    /// int P_t(P_t a . Q_t b) dt/t
    pub right: Field,
    /// P_1(P_1 a . P_1 b)
    pub smooth: Field,
}

impl SemigroupParts {
    pub fn sum(&self) -> Field {
        self.outer.add(&self.left).add(&self.right).add(&self.smooth)
    }
}

/// Discretised continuous-parameter decomposition of a.b:
/// int_{t_min}^1 {Q(P.P) + P(Q.P) + P(P.Q)} dt/t + P_1(P_1 a . P_1 b),
/// trapezoidal in log t on `levels` geometric nodes.
pub fn semigroup_para(calc: &Calculus, a: &Field, b: &Field, q: SemigroupQuadrature) -> Result<SemigroupParts> {
    check(a, b)?;
    if q.levels < 8 {
        return Err(Error::Config(format!("need at least 8 quadrature levels, got {}", q.levels)));
    }
    if !(q.t_min > 0.0 && q.t_min < 1.0) {
        return Err(Error::Config(format!("t_min must lie in (0,1), got {}", q.t_min)));
    }
    let op = &calc.op;
    let rule = calc.rule;
    let lmin = q.t_min.ln();
    let h = -lmin / (q.levels - 1) as f64;
    let grid = *a.grid();
    let terms: Vec<(Field, Field, Field)> = (0..q.levels)
        .into_par_iter()
        .map(|i| -> Result<(Field, Field, Field)> {
            let t = (lmin + i as f64 * h).exp();
            let w = if i == 0 || i == q.levels - 1 { 0.5 * h } else { h };
            let pa = op.heat(a, t, q.order, HeatKind::P)?;
            let pb = op.heat(b, t, q.order, HeatKind::P)?;
            let qa = op.heat(a, t, q.order, HeatKind::Q)?;
            let qb = op.heat(b, t, q.order, HeatKind::Q)?;
            let outer = op.heat(&product(rule, &pa, &pb), t, q.order, HeatKind::Q)?;
            let left = op.heat(&product(rule, &qa, &pb), t, q.order, HeatKind::P)?;
            let right = op.heat(&product(rule, &pa, &qb), t, q.order, HeatKind::P)?;
            Ok((outer.scale(w), left.scale(w), right.scale(w)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut outer = Field::zeros(grid);
    let mut left = Field::zeros(grid);
    let mut right = Field::zeros(grid);
    for (o, l, r) in terms {
        outer = outer.add(&o);
        left = left.add(&l);
        right = right.add(&r);
    }
    let p1a = op.heat(a, 1.0, q.order, HeatKind::P)?;
    let p1b = op.heat(b, 1.0, q.order, HeatKind::P)?;
    let smooth = op.heat(&product(rule, &p1a, &p1b), 1.0, q.order, HeatKind::P)?;
    Ok(SemigroupParts { outer, left, right, smooth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::littlewood_paley::decompose;
    use std::f64::consts::PI;

    fn g(n: usize) -> SpaceGrid {
        SpaceGrid::new(1, n).unwrap()
    }

    /// Brute-force oracle: explicit double sum over block pairs.
    fn block_pair_sum(a: &Field, b: &Field, keep: impl Fn(i32, i32) -> bool) -> Field {
        let da = decompose(a);
        let db = decompose(b);
        let mut acc = Field::zeros(*a.grid());
        for i in -1..=da.finest() {
            for j in -1..=db.finest() {
                if keep(i, j) {
                    acc = acc.add(&dealiased_product(da.get(i), db.get(j)));
                }
            }
        }
        acc
    }

    fn wiggly(grid: SpaceGrid, s: f64) -> Field {
        Field::from_fn(grid, |x| {
            (1..8).map(|k| ((k as f64 * s).sin() / k as f64) * (2.0 * PI * (k * k) as f64 * x[0] + s).cos()).sum()
        })
    }

    #[test]
    fn para_with_constant_drops_two_lowest_blocks() {
        let grid = g(16);
        let b = wiggly(grid, 0.3);
        let one = Field::constant(grid, 1.0);
        let p = para(ProductRule::Dealiased, &one, &b).unwrap();
        let d = decompose(&b);
        let want = b.sub(d.get(-1)).sub(d.get(0));
        assert!(p.max_abs_diff(&want) < 1e-12);
        let oracle = block_pair_sum(&one, &b, |i, j| i < j - 1);
        assert!(p.max_abs_diff(&oracle) < 1e-12);
        let r = resonant(ProductRule::Dealiased, &one, &b).unwrap();
        assert!(r.max_abs_diff(&d.get(-1).add(d.get(0))) < 1e-12);
    }

    #[test]
    fn resonant_matches_block_oracle() {
        let grid = g(32);
        let a = Field::from_fn(grid, |x| (2.0 * PI * 4.0 * x[0]).cos());
        let r = resonant(ProductRule::Dealiased, &a, &a).unwrap();
        let oracle = block_pair_sum(&a, &a, |i, j| (i - j).abs() <= 1);
        assert!(r.max_abs_diff(&oracle) < 1e-12);
        let want = a.mul_pointwise(&a);
        assert!(r.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn cosine_square_reconstructs() {
        let grid = g(32);
        let a = Field::from_fn(grid, |x| (2.0 * PI * x[0]).cos());
        let (p, r, q) = decompose_product(ProductRule::Dealiased, &a, &a).unwrap();
        let want = Field::from_fn(grid, |x| 0.5 + 0.5 * (4.0 * PI * x[0]).cos());
        assert!(p.add(&r).add(&q).max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn smooth_cutoff_parts_sum_to_product() {
        let grid = SpaceGrid::new(2, 32).unwrap();
        let a = Field::from_fn(grid, |x| (2.0 * PI * (x[0] - x[1])).sin() + (2.0 * PI * 11.0 * x[1]).cos());
        let b = Field::from_fn(grid, |x| (2.0 * PI * (6.0 * x[0] + x[1])).cos() + 0.3);
        let s = Cutoff::Smooth;
        let p = para_with(ProductRule::Dealiased, s, &a, &b).unwrap();
        let r = resonant_with(ProductRule::Dealiased, s, &a, &b).unwrap();
        let q = para_with(ProductRule::Dealiased, s, &b, &a).unwrap();
        assert!(p.add(&r).add(&q).max_abs_diff(&dealiased_product(&a, &b)) < 1e-12);
        // smooth and sharp splittings differ on these inputs
        assert!(p.max_abs_diff(&para(ProductRule::Dealiased, &a, &b).unwrap()) > 1e-3);
    }

    #[test]
    fn dealiased_product_is_band_limited_truncation() {
        let grid = g(16);
        let a = Field::from_fn(grid, |x| (2.0 * PI * 5.0 * x[0]).cos());
        // cos^2(10 pi x) = 1/2 + 1/2 cos(20 pi x); mode 10 lies outside |k| <= 8
        let p = dealiased_product(&a, &a);
        assert!(p.max_abs_diff(&Field::constant(grid, 0.5)) < 1e-14);
    }

    #[test]
    fn semigroup_constant_product() {
        let calc = Calculus::new(1.0).unwrap();
        let one = Field::constant(g(16), 1.0);
        let q = SemigroupQuadrature { order: 2, levels: 32, t_min: 1e-4 };
        let parts = semigroup_para(&calc, &one, &one, q).unwrap();
        assert!(parts.sum().max_abs_diff(&one) < 1e-3);
        let bad = SemigroupQuadrature { levels: 4, ..q };
        assert!(semigroup_para(&calc, &one, &one, bad).is_err());
    }

    use crate::littlewood_paley::{default_window, estimate_regularity, linear_fit};
    use crate::synthetic::{lacunary, lacunary_with_mean, smooth};
    use crate::torus_fields::TimeGrid;

    fn exponent(f: &Field) -> f64 {
        let (_, hi) = default_window(f.grid());
        estimate_regularity(f, 3, hi).unwrap().exponent
    }

    #[test]
    fn resonant_symmetric_and_bilinear() {
        let grid = SpaceGrid::new(2, 32).unwrap();
        let a = smooth(grid, 9, 1);
        let b = lacunary(grid, 0.3, 2);
        let r1 = resonant(ProductRule::Dealiased, &a, &b).unwrap();
        let r2 = resonant(ProductRule::Dealiased, &b, &a).unwrap();
        assert!(r1.max_abs_diff(&r2) < 1e-12);
        let p = para(ProductRule::Dealiased, &a, &b).unwrap();
        let p3 = para(ProductRule::Dealiased, &a.scale(3.0), &b).unwrap();
        assert!(p3.max_abs_diff(&p.scale(3.0)) < 1e-12);
        let c = Field::constant(grid, 2.0);
        assert!(para(ProductRule::Dealiased, &a, &c).unwrap().sup_norm() < 1e-14);
        let other = Field::zeros(SpaceGrid::new(2, 16).unwrap());
        assert!(matches!(para(ProductRule::Dealiased, &a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn bony_continuity_measured() {
        let grid = g(1 << 16);
        for seed in 0..5 {
            let a = lacunary_with_mean(grid, 0.6, 2 * seed);
            let b = lacunary(grid, 0.4, 2 * seed + 1);
            let p = exponent(&para(ProductRule::Dealiased, &a, &b).unwrap());
            assert!((0.3..=0.55).contains(&p), "para exponent {p}");
            let r = exponent(&resonant(ProductRule::Dealiased, &a, &b).unwrap());
            assert!(r >= 0.85, "resonant exponent {r}");
        }
    }

    #[test]
    fn tilde_minus_para_gains() {
        let grid = g(1 << 16);
        let calc = Calculus::new(1.0).unwrap();
        let a = lacunary(grid, 0.6, 11);
        let b = lacunary(grid, 0.4, 12);
        let p = para(calc.rule, &a, &b).unwrap();
        let t = para_tilde_elliptic(&calc, &a, &b).unwrap();
        let gain = exponent(&t.sub(&p)) - exponent(&p);
        assert!(gain >= 0.3, "gain {gain}");
    }

    #[test]
    fn time_constant_tilde_matches_elliptic_stand_in() {
        let grid = g(32);
        let calc = Calculus::new(1.0).unwrap();
        let times = TimeGrid::new(1.0, 40).unwrap();
        let a = smooth(grid, 6, 3);
        let b = smooth(grid, 12, 4);
        let ast = SpaceTimeField::constant_in_time(&a, times);
        let bst = SpaceTimeField::constant_in_time(&b, times);
        let t = para_tilde(&calc, &ast, &bst).unwrap();
        let e = para_tilde_elliptic(&calc, &a, &b).unwrap();
        let err = t.last().max_abs_diff(&e);
        assert!(err < 1e-8, "err {err}");
        let zero = SpaceTimeField::zeros(grid, times);
        assert!(para_tilde(&calc, &zero, &bst).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn intertwining_residual_is_second_order() {
        let grid = g(16);
        let calc = Calculus::new(0.1).unwrap();
        let a0 = smooth(grid, 3, 5);
        let g0 = smooth(grid, 7, 6);
        let pts: Vec<(f64, f64)> = [128usize, 256, 512, 1024]
            .iter()
            .map(|&steps| {
                let times = TimeGrid::new(0.5, steps).unwrap();
                let a = SpaceTimeField::from_fn(grid, times, |t, x| (1.0 + t) * a0.values()[idx(x, 16)]);
                let gf = SpaceTimeField::from_fn(grid, times, |t, x| (3.0 * t).sin() * g0.values()[idx(x, 16)]);
                let zero = Field::zeros(grid);
                let lhs = duhamel_inverse(&calc.op, &para_st(&calc, &a, &gf).unwrap(), &zero).unwrap();
                let inv = duhamel_inverse(&calc.op, &gf, &zero).unwrap();
                let rhs = para_tilde(&calc, &a, &inv).unwrap();
                (times.dt().log2(), lhs.max_abs_diff(&rhs).log2())
            })
            .collect();
        let (slope, _, _) = linear_fit(&pts);
        assert!(slope > 1.8, "slope {slope}: {pts:?}");
    }

    fn idx(x: [f64; 2], n: usize) -> usize {
        (x[0] * n as f64).round() as usize % n
    }

    #[test]
    fn semigroup_error_shrinks_with_t_min() {
        let grid = g(16);
        let calc = Calculus::new(1.0).unwrap();
        let a = Field::from_fn(grid, |x| 1.0 + (2.0 * PI * x[0]).cos() + 0.5 * (4.0 * PI * x[0]).sin());
        let b = Field::from_fn(grid, |x| 0.3 - (2.0 * PI * x[0]).sin() + 0.2 * (4.0 * PI * x[0]).cos());
        let exact = dealiased_product(&a, &b);
        let h = 0.02;
        let pts: Vec<(f64, f64)> = (0..4)
            .map(|i| {
                let t_min = 1e-4 / 2f64.powi(i);
                let levels = (-t_min.ln() / h).round() as usize + 1;
                let q = SemigroupQuadrature { order: 1, levels, t_min };
                let err = semigroup_para(&calc, &a, &b, q).unwrap().sum().max_abs_diff(&exact);
                (t_min.log2(), err.log2())
            })
            .collect();
        let (slope, _, _) = linear_fit(&pts);
        assert!(slope > 0.5, "order {slope}: {pts:?}");
    }
}
