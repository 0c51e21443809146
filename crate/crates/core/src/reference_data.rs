//! Mollified noise and the evaluated reference letters with their source
//! terms, computed classically from a smooth sample.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::littlewood_paley::{decompose, linear_fit};
use crate::paraproducts::{Calculus, Operand};
use crate::pcf::{self, Stored};
use crate::synthetic::rng;
use crate::torus_fields::{duhamel_inverse, Field, SpaceGrid, SpaceTimeField, TimeGrid};
use crate::word_algebra::{Alphabet, Measured, Recipe};
use crate::correctors::merge_r;

/// Temporal harmonics of time-dependent noise.
const TIME_HARMONICS: usize = 2;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct NoiseSpec {
    pub seed: u64,
    /// Mollification scale: modes with |k| >= 1/mol are cut.
    pub mol: f64,
    pub amplitude: f64,
    pub time_dependent: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { seed: 0, mol: 0.125, amplitude: 1.0, time_dependent: false }
    }
}

/// C^infinity step: 1 on [0, 1/2], 0 on [1, inf).
fn roll_off(r: f64) -> f64 {
    let bump = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let s = 2.0 * (1.0 - r);
    bump(s) / (bump(s) + bump(1.0 - s))
}

fn spatial_sample(grid: SpaceGrid, mol: f64, r: &mut impl Rng) -> Field {
    let kmax = (1.0 / mol).ceil() as i64;
    let ky = if grid.dim() == 2 { kmax } else { 0 };
    let mut terms = Vec::new();
    // half lattice {k0 > 0} u {k0 = 0, k1 >= 0}, row by row
    for k0 in 0..=kmax {
        for k1 in -ky..=ky {
            if k0 == 0 && k1 < 0 {
                continue;
            }
            let w = roll_off((((k0 * k0 + k1 * k1) as f64).sqrt()) * mol);
            let (g1, g2): (f64, f64) = (r.sample(StandardNormal), r.sample(StandardNormal));
            if w == 0.0 {
                continue;
            }
            if k0 == 0 && k1 == 0 {
                terms.push((w * g1, 0.0, 0.0, 0.0));
            } else {
                terms.push((w * 2f64.sqrt() * g1, w * 2f64.sqrt() * g2, k0 as f64, k1 as f64));
            }
        }
    }
    Field::from_fn(grid, |x| {
        terms
            .iter()
            .map(|&(a, b, k0, k1)| {
                let th = 2.0 * PI * (k0 * x[0] + k1 * x[1]);
                a * th.cos() + b * th.sin()
            })
            .sum()
    })
}

/// Spectral synthesis with independent unit Gaussians under a smooth
/// roll-off; ChaCha stream keyed by the seed, fixed traversal order.
pub fn sample_noise(spec: &NoiseSpec, grid: SpaceGrid, times: TimeGrid) -> Result<SpaceTimeField> {
    if !(spec.mol > 0.0 && spec.mol.is_finite()) {
        return Err(Error::Config(format!("mollification scale must be positive, got {}", spec.mol)));
    }
    if 1.0 / spec.mol >= (grid.n() / 2) as f64 {
        return Err(Error::Config(format!(
            "noise cutoff 1/mol = {} reaches the grid band N/2 = {}",
            1.0 / spec.mol,
            grid.n() / 2
        )));
    }
    if !spec.amplitude.is_finite() {
        return Err(Error::Config("noise amplitude must be finite".into()));
    }
    let mut r = rng(spec.seed);
    if !spec.time_dependent {
        let f = spatial_sample(grid, spec.mol, &mut r).scale(spec.amplitude);
        return Ok(SpaceTimeField::constant_in_time(&f, times));
    }
    let mut parts = vec![(spatial_sample(grid, spec.mol, &mut r), 0usize, false)];
    for q in 1..=TIME_HARMONICS {
        parts.push((spatial_sample(grid, spec.mol, &mut r), q, false));
        parts.push((spatial_sample(grid, spec.mol, &mut r), q, true));
    }
    let norm = spec.amplitude / (parts.len() as f64).sqrt();
    let slices = (0..times.slices())
        .map(|m| {
            let t = times.time(m) / times.t_end;
            parts.iter().fold(Field::zeros(grid), |acc, (f, q, sine)| {
                let th = 2.0 * PI * *q as f64 * t;
                acc.add(&f.scale(norm * if *sine { th.sin() } else { th.cos() }))
            })
        })
        .collect();
    SpaceTimeField::new(times, slices)
}

/// N(x, xi) = x xi - P_x xi: everything but the paraproduct.
pub fn non_para<T: Operand>(calc: &Calculus, x: &T, xi: &T) -> Result<T> {
    Ok(T::mul(calc, x, xi)?.minus(&T::para(calc, x, xi)?))
}

/// K(x, a, xi) = N(P~_x a, xi) - x N(a, xi).
pub fn tilde_defect<T: Operand>(calc: &Calculus, x: &T, a: &T, xi: &T) -> Result<T> {
    let lhs = non_para(calc, &T::tilde(calc, x, a)?, xi)?;
    Ok(lhs.minus(&T::mul(calc, x, &non_para(calc, a, xi)?)?))
}

/// Nested L-commutators with intertwined inner paraproducts:
/// L_1(x; b) = L P~_x b - P_x L b and
/// L_k(x, y_2, ..; b) = L_{k-1}(P~_x y_2, y_3, ..; b) - P_x L_{k-1}(y_2, ..; b).
pub fn l_defect<T: Operand>(calc: &Calculus, chain: &[&T], b: &T) -> Result<T> {
    match chain {
        [] => Err(Error::Config("L-defect needs at least one argument".into())),
        [x] => {
            let lhs = T::apply_l(calc, &T::tilde(calc, x, b)?);
            Ok(lhs.minus(&T::para(calc, x, &T::apply_l(calc, b))?))
        }
        [x, y, rest @ ..] => {
            let merged = T::tilde(calc, x, y)?;
            let mut outer: Vec<&T> = vec![&merged];
            outer.extend(rest.iter().copied());
            let mut inner: Vec<&T> = vec![*y];
            inner.extend(rest.iter().copied());
            Ok(l_defect(calc, &outer, b)?.minus(&T::para(calc, x, &l_defect(calc, &inner, b)?)?))
        }
    }
}

/// V_i P~_x b - P_x V_i b.
pub fn v_defect<T: Operand>(calc: &Calculus, axis: usize, x: &T, b: &T) -> Result<T> {
    let lhs = T::apply_v(calc, &T::tilde(calc, x, b)?, axis)?;
    Ok(lhs.minus(&T::para(calc, x, &T::apply_v(calc, b, axis)?)?))
}

/// The L-reference xi_a of a word in the expansion L u = sum_a P_{u_a} xi_a + ..:
/// L tau for (tau), L_1(sigma; tau) for (tau, sigma), L_2(gamma, sigma; tau)
/// for (tau, sigma, gamma).
pub fn l_reference<T: Operand>(calc: &Calculus, word: &[&T]) -> Result<T> {
    match word {
        [t] => Ok(T::apply_l(calc, t)),
        [t, rest @ ..] if rest.len() <= 2 => {
            let chain: Vec<&T> = rest.iter().rev().copied().collect();
            l_defect(calc, &chain, t)
        }
        _ => Err(Error::Config(format!("no L-reference for words of {} letters", word.len()))),
    }
}

pub fn nominal_source(alphabet: &Alphabet, recipe: &Recipe) -> Option<f64> {
    let a = alphabet.alpha();
    let h = |ids: &[usize]| ids.iter().map(|&i| alphabet.level(i) as f64).sum::<f64>() * a;
    match recipe {
        Recipe::Seed => Some(a - 2.0),
        Recipe::Chain(t) => Some(h(&[*t]) - 2.0),
        Recipe::NoiseResonance(w) => Some(h(w) + a - 2.0),
        Recipe::LCommutator(w) => Some(h(w) - 2.0),
        Recipe::Product { word, with } => Some(h(word) + h(&[*with]) - 2.0),
        Recipe::SecondProduct { word, first, second } => Some(h(&[*word, *first, *second]) - 2.0),
        Recipe::Gradient { of, .. } => Some(h(&[*of]) - 1.0),
        Recipe::Resonant(..) | Recipe::Merge(..) => None,
    }
}

/// Source term of an L^{-1}-letter, or the letter itself for Pi and R letters.
fn evaluate_recipe(
    calc: &Calculus,
    recipe: &Recipe,
    noise: &SpaceTimeField,
    done: &[Option<SpaceTimeField>],
) -> Result<SpaceTimeField> {
    let get = |i: usize| {
        done.get(i)
            .and_then(|x| x.as_ref())
            .ok_or_else(|| Error::Ordering(format!("letter {i} is not evaluated yet")))
    };
    let gets = |ids: &[usize]| ids.iter().map(|&i| get(i)).collect::<Result<Vec<_>>>();
    match recipe {
        Recipe::Seed => Ok(noise.clone()),
        Recipe::Chain(t) => Ok(Operand::apply_l(calc, get(*t)?)),
        Recipe::NoiseResonance(w) => match gets(w)?.as_slice() {
            [a] => non_para(calc, *a, noise),
            [a, r] => tilde_defect(calc, *r, *a, noise),
            _ => Err(Error::Unsupported(format!("noise term of a {}-letter word", w.len()))),
        },
        Recipe::LCommutator(w) => l_reference(calc, &gets(w)?),
        Recipe::Product { word, with } => non_para(calc, get(*with)?, &l_reference(calc, &gets(word)?)?),
        Recipe::SecondProduct { word, first, second } => {
            tilde_defect(calc, get(*second)?, get(*first)?, &Operand::apply_l(calc, get(*word)?))
        }
        Recipe::Gradient { axis, of } => Operand::apply_v(calc, get(*of)?, *axis),
        Recipe::Resonant(a, b) => Operand::resonant(calc, get(*a)?, get(*b)?),
        Recipe::Merge(a, b) => {
            let one = SpaceTimeField::zeros(*noise.grid(), *noise.times()).map_slices(|f| f.map(|_| 1.0));
            merge_r(calc, &one, get(*a)?, get(*b)?)
        }
    }
}

/// Evaluates one letter; returns (letter, source) with source = None for Pi and R letters.
pub fn evaluate_letter(
    calc: &Calculus,
    alphabet: &Alphabet,
    id: usize,
    noise: &SpaceTimeField,
    done: &[Option<SpaceTimeField>],
) -> Result<(SpaceTimeField, Option<SpaceTimeField>)> {
    let recipe = &alphabet.letters[id].recipe;
    if recipe.children().iter().any(|&c| c >= id) {
        return Err(Error::Ordering(format!("letter {id} refers forward in the alphabet")));
    }
    let v = evaluate_recipe(calc, recipe, noise, done)?;
    if recipe.is_inverse() {
        let letter = duhamel_inverse(&calc.op, &v, &Field::zeros(*noise.grid()))?;
        Ok((letter, Some(v)))
    } else {
        Ok((v, None))
    }
}

/// Exponent read off the block sups of a band-limited field: minus the slope
/// of log2 ||Delta_j f|| over the blocks j >= 1 that carry content.
pub fn measured_exponent(f: &Field) -> Option<f64> {
    let sups = decompose(f).block_sups;
    let top = sups.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = sups
        .iter()
        .enumerate()
        .skip(2)
        .filter(|(_, &s)| s > 1e-10 * top && s > 0.0)
        .map(|(i, &s)| (i as f64 - 1.0, s.log2()))
        .collect();
    (pts.len() >= 2).then(|| -linear_fit(&pts).0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefEntry {
    pub id: usize,
    pub label: String,
    pub skeleton: String,
    pub n: u32,
    pub level: u8,
    pub nominal: f64,
    pub measured: Option<f64>,
    pub norm: f64,
    pub source_nominal: Option<f64>,
    pub source_measured: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ReferenceData {
    pub noise: SpaceTimeField,
    pub letters: Vec<SpaceTimeField>,
    pub sources: Vec<Option<SpaceTimeField>>,
    /// ||tau||_{C^{|tau|}}, the worst spatial Besov norm over slices.
    pub letter_norms: Vec<f64>,
    pub entries: Vec<RefEntry>,
}

fn depths(alphabet: &Alphabet) -> Vec<usize> {
    let mut d = vec![0usize; alphabet.len()];
    for l in &alphabet.letters {
        d[l.id] = l.recipe.children().iter().map(|&c| d[c] + 1).max().unwrap_or(0);
    }
    d
}

/// Evaluates every letter, layer by layer in dependency depth.
pub fn build_reference_data(calc: &Calculus, alphabet: &Alphabet, noise: &SpaceTimeField) -> Result<ReferenceData> {
    let depth = depths(alphabet);
    let max_depth = depth.iter().copied().max().unwrap_or(0);
    let mut letters: Vec<Option<SpaceTimeField>> = vec![None; alphabet.len()];
    let mut sources: Vec<Option<SpaceTimeField>> = vec![None; alphabet.len()];
    for layer in 0..=max_depth {
        let ids: Vec<usize> = (0..alphabet.len()).filter(|&i| depth[i] == layer).collect();
        let out = ids
            .par_iter()
            .map(|&i| evaluate_letter(calc, alphabet, i, noise, &letters))
            .collect::<Result<Vec<_>>>()?;
        for (&i, (l, s)) in ids.iter().zip(out) {
            letters[i] = Some(l);
            sources[i] = s;
        }
    }
    let letters: Vec<SpaceTimeField> = letters.into_iter().map(|l| l.expect("all layers evaluated")).collect();
    let a = alphabet.alpha();
    let letter_norms: Vec<f64> =
        letters.par_iter().enumerate().map(|(i, l)| l.holder_norm(alphabet.level(i) as f64 * a)).collect();
    let entries = alphabet
        .letters
        .iter()
        .map(|l| RefEntry {
            id: l.id,
            label: l.label.clone(),
            skeleton: l.skeleton.clone(),
            n: l.n(),
            level: l.level,
            nominal: l.level as f64 * a,
            measured: measured_exponent(letters[l.id].last()),
            norm: letter_norms[l.id],
            source_nominal: nominal_source(alphabet, &l.recipe),
            source_measured: sources[l.id].as_ref().and_then(|s| measured_exponent(s.last())),
        })
        .collect();
    Ok(ReferenceData { noise: noise.clone(), letters, sources, letter_norms, entries })
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    noise: NoiseSpec,
    c0: f64,
    alphabet: Alphabet,
    entries: Vec<RefEntry>,
}

/// One PCF file per letter and per source term plus `manifest.json`.
pub fn write_store(dir: &Path, spec: &NoiseSpec, c0: f64, alphabet: &Alphabet, refs: &ReferenceData) -> Result<()> {
    fs::create_dir_all(dir)?;
    pcf::write(&dir.join("noise.pcf"), &Stored::SpaceTime(refs.noise.clone()))?;
    for (i, l) in refs.letters.iter().enumerate() {
        pcf::write(&dir.join(format!("letter_{i:04}.pcf")), &Stored::SpaceTime(l.clone()))?;
        if let Some(s) = &refs.sources[i] {
            pcf::write(&dir.join(format!("term_{i:04}.pcf")), &Stored::SpaceTime(s.clone()))?;
        }
    }
    let m = Manifest { noise: *spec, c0, alphabet: alphabet.clone(), entries: refs.entries.clone() };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m).expect("manifest serialises"))?;
    Ok(())
}

pub fn read_store(dir: &Path) -> Result<(NoiseSpec, f64, Alphabet, ReferenceData)> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    let mut alphabet = m.alphabet;
    alphabet.reindex();
    let noise = pcf::read(&dir.join("noise.pcf"))?.into_space_time()?;
    let mut letters = Vec::new();
    let mut sources = Vec::new();
    for i in 0..alphabet.len() {
        letters.push(pcf::read(&dir.join(format!("letter_{i:04}.pcf")))?.into_space_time()?);
        let p = dir.join(format!("term_{i:04}.pcf"));
        sources.push(if p.exists() { Some(pcf::read(&p)?.into_space_time()?) } else { None });
    }
    let letter_norms = m.entries.iter().map(|e| e.norm).collect();
    Ok((m.noise, m.c0, alphabet, ReferenceData { noise, letters, sources, letter_norms, entries: m.entries }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassFit {
    pub skeleton: String,
    /// (n_tau, ||tau||) for every letter of the class.
    pub points: Vec<(u32, f64)>,
    /// Upper envelope k C^n with the least-squares growth rate C.
    pub k: f64,
    pub c: f64,
    pub r2: f64,
    pub satisfied: bool,
    /// All norms vanish; the bound holds trivially.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionFit {
    /// Fit of the seed chain (L^{-1}L)^k L^{-1} zeta.
    pub k_fit: f64,
    pub c_fit: f64,
    pub r2: f64,
    pub satisfied: bool,
    pub classes: Vec<ClassFit>,
}

fn fit_class(skeleton: &str, points: Vec<(u32, f64)>) -> ClassFit {
    if points.iter().all(|p| p.1 == 0.0) {
        return ClassFit { skeleton: skeleton.into(), points, k: 0.0, c: 1.0, r2: 1.0, satisfied: true, degenerate: true };
    }
    let logs: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(n, v)| (n as f64, v.ln())).collect();
    let (slope, _, r2) = linear_fit(&logs);
    let c = slope.exp();
    let k = points.iter().map(|&(n, v)| v / c.powi(n as i32)).fold(0.0, f64::max);
    let satisfied = points.iter().all(|&(n, v)| v <= k * c.powi(n as i32) * 1.1);
    ClassFit { skeleton: skeleton.into(), points, k, c, r2, satisfied, degenerate: false }
}

/// Fits log ||tau|| against n_tau per skeleton class holding at least three
/// distinct chain counts.
pub fn verify_assumption_a(alphabet: &Alphabet, refs: &ReferenceData) -> Result<AssumptionFit> {
    if alphabet.params.chain_cap < 2 {
        return Err(Error::InsufficientData(format!(
            "need chain cap >= 2 for three chain counts, got {}",
            alphabet.params.chain_cap
        )));
    }
    let mut skeletons: Vec<&str> = alphabet.letters.iter().map(|l| l.skeleton.as_str()).collect();
    skeletons.sort();
    skeletons.dedup();
    let classes: Vec<ClassFit> = skeletons
        .into_iter()
        .filter_map(|s| {
            let pts: Vec<(u32, f64)> = alphabet
                .letters
                .iter()
                .filter(|l| l.skeleton == s)
                .map(|l| (l.n(), refs.letter_norms[l.id]))
                .collect();
            let mut ns: Vec<u32> = pts.iter().map(|p| p.0).collect();
            ns.sort();
            ns.dedup();
            (ns.len() >= 3).then(|| fit_class(s, pts))
        })
        .collect();
    let seed = alphabet.letters[alphabet.seed()].skeleton.clone();
    let head = classes.iter().find(|c| c.skeleton == seed).expect("the seed chain spans the cap");
    Ok(AssumptionFit {
        k_fit: head.k,
        c_fit: head.c,
        r2: head.r2,
        satisfied: classes.iter().all(|c| c.satisfied),
        classes,
    })
}
