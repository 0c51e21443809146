//! Letters, words and paracontrolled systems over a truncated alphabet.
//!
//! A letter is a recipe tree over L^{-1}, L, Pi, R and products with the
//! noise. Levels are homogeneities in units of alpha. Every application of
//! L^{-1}L is a chain step; the chain cap K bounds the total count per letter.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::littlewood_paley::besov_norm;
use crate::paraproducts::{Calculus, Operand};
use crate::torus_fields::{Field, SpaceTimeField};

pub const BETA_FLOOR: f64 = 0.4;

/// Construction recipe of a letter; indices refer to earlier letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    /// L^{-1} zeta.
    Seed,
    /// L^{-1} L tau.
    Chain(usize),
    /// L^{-1} of the noise term of a word of one or two letters:
    /// N(a, zeta) for (a), K(rho, a, zeta) for (a, rho).
    NoiseResonance(Vec<usize>),
    /// L^{-1} of the L-commutator attached to a word of two or three letters.
    LCommutator(Vec<usize>),
    /// L^{-1} N(b, xi_a), xi_a the L-reference of the word a.
    Product { word: Vec<usize>, with: usize },
    /// L^{-1} K(c, b, L a).
    SecondProduct { word: usize, first: usize, second: usize },
    /// L^{-1} V_axis tau.
    Gradient { axis: usize, of: usize },
    /// Pi(tau, sigma).
    Resonant(usize, usize),
    /// R(1, tau, sigma).
    Merge(usize, usize),
}

impl Recipe {
    pub fn children(&self) -> Vec<usize> {
        match self {
            Recipe::Seed => vec![],
            Recipe::Chain(t) => vec![*t],
            Recipe::NoiseResonance(w) | Recipe::LCommutator(w) => w.clone(),
            Recipe::Product { word, with } => word.iter().copied().chain([*with]).collect(),
            Recipe::SecondProduct { word, first, second } => vec![*word, *first, *second],
            Recipe::Gradient { of, .. } => vec![*of],
            Recipe::Resonant(a, b) | Recipe::Merge(a, b) => vec![*a, *b],
        }
    }

    /// Whether the letter is L^{-1} of a source term.
    pub fn is_inverse(&self) -> bool {
        !matches!(self, Recipe::Resonant(..) | Recipe::Merge(..))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Letter {
    pub id: usize,
    pub recipe: Recipe,
    /// |tau| = level * alpha.
    pub level: u8,
    /// Chain steps per constructor node, root first, depth-first.
    pub chain_powers: Vec<u32>,
    pub label: String,
    /// Label of the chain-free skeleton symbol.
    pub skeleton: String,
}

impl Letter {
    pub fn n(&self) -> u32 {
        self.chain_powers.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AlphabetParams {
    pub alpha: f64,
    pub order: u8,
    pub chain_cap: i64,
    /// Number of vector fields V_i, one per space axis on the torus.
    pub axes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alphabet {
    pub params: AlphabetParams,
    pub letters: Vec<Letter>,
    /// Labels of rule outputs dropped because they exceed the chain cap.
    pub excluded: Vec<String>,
    #[serde(skip)]
    index: HashMap<Recipe, usize>,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > BETA_FLOOR && alpha < 0.5) {
        return Err(Error::Domain(format!("alpha must lie in (2/5, 1/2), got {alpha}")));
    }
    Ok(())
}

impl Alphabet {
    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn level(&self, id: usize) -> u8 {
        self.letters[id].level
    }

    pub fn of_level(&self, level: u8) -> Vec<usize> {
        self.letters.iter().filter(|l| l.level == level).map(|l| l.id).collect()
    }

    pub fn find(&self, recipe: &Recipe) -> Option<usize> {
        self.index.get(recipe).copied()
    }

    pub fn seed(&self) -> usize {
        self.find(&Recipe::Seed).expect("every alphabet holds the seed")
    }

    /// Rebuilds the recipe index after deserialisation.
    pub fn reindex(&mut self) {
        self.index = self.letters.iter().map(|l| (l.recipe.clone(), l.id)).collect();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("alphabet serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut a: Alphabet = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        a.reindex();
        Ok(a)
    }

    fn describe(&self, recipe: &Recipe) -> (u8, Vec<u32>, String, String) {
        let lab = |i: usize| self.letters[i].label.clone();
        let sk = |i: usize| self.letters[i].skeleton.clone();
        let lv = |i: usize| self.letters[i].level;
        let join = |ids: &[usize], f: &dyn Fn(usize) -> String| ids.iter().map(|&i| f(i)).collect::<Vec<_>>().join(",");
        let nested = |ids: &[usize]| {
            let mut p = vec![0u32];
            for &i in ids {
                p.extend(&self.letters[i].chain_powers);
            }
            p
        };
        match recipe {
            Recipe::Seed => (1, vec![0], "I(z)".into(), "I(z)".into()),
            Recipe::Chain(t) => {
                let mut p = self.letters[*t].chain_powers.clone();
                p[0] += 1;
                (lv(*t), p, format!("IL({})", lab(*t)), sk(*t))
            }
            Recipe::NoiseResonance(w) => {
                let level = w.iter().map(|&i| lv(i)).sum::<u8>() + 1;
                (level, nested(w), format!("I(z1[{}])", join(w, &lab)), format!("I(z1[{}])", join(w, &sk)))
            }
            Recipe::LCommutator(w) => {
                let level = w.iter().map(|&i| lv(i)).sum::<u8>();
                (level, nested(w), format!("I(zL[{}])", join(w, &lab)), format!("I(zL[{}])", join(w, &sk)))
            }
            Recipe::Product { word, with } => {
                let level = word.iter().map(|&i| lv(i)).sum::<u8>() + lv(*with);
                let mut ids = word.clone();
                ids.push(*with);
                (
                    level,
                    nested(&ids),
                    format!("I(z2[{};{}])", join(word, &lab), lab(*with)),
                    format!("I(z2[{};{}])", join(word, &sk), sk(*with)),
                )
            }
            Recipe::SecondProduct { word, first, second } => (
                lv(*word) + lv(*first) + lv(*second),
                nested(&[*word, *first, *second]),
                format!("I(z2[{};{};{}])", lab(*word), lab(*first), lab(*second)),
                format!("I(z2[{};{};{}])", sk(*word), sk(*first), sk(*second)),
            ),
            Recipe::Gradient { axis, of } => (
                3,
                nested(&[*of]),
                format!("I(zV{axis}[{}])", lab(*of)),
                format!("I(zV{axis}[{}])", sk(*of)),
            ),
            Recipe::Resonant(a, b) => {
                (2, nested(&[*a, *b]), format!("Pi({},{})", lab(*a), lab(*b)), format!("Pi({},{})", sk(*a), sk(*b)))
            }
            Recipe::Merge(a, b) => {
                (2, nested(&[*a, *b]), format!("R(1,{},{})", lab(*a), lab(*b)), format!("R(1,{},{})", sk(*a), sk(*b)))
            }
        }
    }

    /// Every recipe the constraint rules produce from the current letters.
    fn rule_outputs(&self) -> Vec<Recipe> {
        let l1 = self.of_level(1);
        let l2 = self.of_level(2);
        let mut out = vec![Recipe::Seed];
        out.extend(self.letters.iter().map(|l| Recipe::Chain(l.id)));
        for &a in l1.iter().chain(&l2) {
            out.push(Recipe::NoiseResonance(vec![a]));
        }
        for &a in &l1 {
            for &r in &l1 {
                out.push(Recipe::NoiseResonance(vec![a, r]));
            }
        }
        // words of two or three letters with homogeneity <= 3 alpha
        let mut words: Vec<Vec<usize>> = Vec::new();
        for &a in &l1 {
            for &b in l1.iter().chain(&l2) {
                words.push(vec![a, b]);
            }
        }
        for &a in &l2 {
            for &b in &l1 {
                words.push(vec![a, b]);
            }
        }
        for &a in &l1 {
            for &b in &l1 {
                for &c in &l1 {
                    words.push(vec![a, b, c]);
                }
            }
        }
        out.extend(words.into_iter().map(Recipe::LCommutator));
        for &a in l1.iter().chain(&l2) {
            for &b in self.letters.iter().map(|l| &l.id) {
                if self.level(a) + self.level(b) <= 3 {
                    out.push(Recipe::Product { word: vec![a], with: b });
                }
            }
        }
        for &a in &l1 {
            for &b in &l1 {
                for &c in &l1 {
                    out.push(Recipe::Product { word: vec![a, b], with: c });
                }
            }
        }
        for &a in &l1 {
            for &b in &l1 {
                for &c in &l1 {
                    out.push(Recipe::SecondProduct { word: a, first: b, second: c });
                }
            }
        }
        for &t in &l1 {
            for axis in 0..self.params.axes {
                out.push(Recipe::Gradient { axis, of: t });
            }
        }
        for &a in &l1 {
            for &b in &l1 {
                if a <= b {
                    out.push(Recipe::Resonant(a, b));
                }
                out.push(Recipe::Merge(a, b));
            }
        }
        out
    }

    /// Rule outputs that are neither letters nor recorded as cap exclusions.
    pub fn closure_violations(&self) -> Vec<String> {
        let excluded: BTreeSet<&String> = self.excluded.iter().collect();
        self.rule_outputs()
            .into_iter()
            .filter(|r| self.find(r).is_none())
            .map(|r| self.describe(&r).2)
            .filter(|label| !excluded.contains(label))
            .collect()
    }
}

/// Least fixpoint of the constraint rules from the seed, truncated at n_tau <= K.
pub fn generate_alphabet(params: AlphabetParams) -> Result<Alphabet> {
    check_alpha(params.alpha)?;
    if params.chain_cap < 0 {
        return Err(Error::Domain(format!("chain cap must be >= 0, got {}", params.chain_cap)));
    }
    if params.order != 3 {
        return Err(Error::Unsupported(format!(
            "the constraint rules are those of a third-order expansion; order {} requested",
            params.order
        )));
    }
    let cap = params.chain_cap as u32;
    let mut a = Alphabet { params, letters: Vec::new(), excluded: Vec::new(), index: HashMap::new() };
    let mut excluded = BTreeSet::new();
    loop {
        let mut added = false;
        for recipe in a.rule_outputs() {
            if a.index.contains_key(&recipe) {
                continue;
            }
            let (level, chain_powers, label, skeleton) = a.describe(&recipe);
            if chain_powers.iter().sum::<u32>() > cap {
                excluded.insert(label);
                continue;
            }
            let id = a.letters.len();
            a.index.insert(recipe.clone(), id);
            a.letters.push(Letter { id, recipe, level, chain_powers, label, skeleton });
            added = true;
        }
        if !added {
            break;
        }
    }
    a.excluded = excluded.into_iter().collect();
    Ok(a)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    pub letters: Vec<usize>,
    /// |a| = level * alpha.
    pub level: u8,
}

/// The word set A together with the concatenation table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WordSet {
    pub order: u8,
    pub words: Vec<Word>,
    /// (tau, index of a tau) for every letter tau with |a tau| <= n alpha.
    pub extensions: Vec<Vec<(usize, usize)>>,
    #[serde(skip)]
    index: HashMap<Vec<usize>, usize>,
}

impl WordSet {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn find(&self, letters: &[usize]) -> Option<usize> {
        self.index.get(letters).copied()
    }

    pub fn label(&self, alphabet: &Alphabet, w: usize) -> String {
        let ls = &self.words[w].letters;
        if ls.is_empty() {
            return "()".into();
        }
        format!("({})", ls.iter().map(|&i| alphabet.letters[i].label.as_str()).collect::<Vec<_>>().join(","))
    }

    /// Indices ordered so that every extension a tau precedes a.
    pub fn bottom_up(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.len()).collect();
        ids.sort_by_key(|&w| std::cmp::Reverse((self.words[w].level, self.words[w].letters.len())));
        ids
    }
}

/// All words of homogeneity <= order * alpha, the empty word first, then by
/// length and lexicographically in letter ids.
pub fn generate_words(alphabet: &Alphabet, order: u8) -> WordSet {
    let mut words = vec![Word { letters: vec![], level: 0 }];
    let mut frontier = vec![0usize];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &w in &frontier {
            for l in &alphabet.letters {
                let level = words[w].level + l.level;
                if level <= order {
                    let mut letters = words[w].letters.clone();
                    letters.push(l.id);
                    words.push(Word { letters, level });
                    next.push(words.len() - 1);
                }
            }
        }
        frontier = next;
    }
    let index: HashMap<Vec<usize>, usize> = words.iter().enumerate().map(|(i, w)| (w.letters.clone(), i)).collect();
    let extensions = words
        .iter()
        .map(|w| {
            alphabet
                .letters
                .iter()
                .filter_map(|l| {
                    let mut ext = w.letters.clone();
                    ext.push(l.id);
                    index.get(&ext).map(|&i| (l.id, i))
                })
                .collect()
        })
        .collect();
    WordSet { order, words, extensions, index }
}

impl WordSet {
    pub fn reindex(&mut self) {
        self.index = self.words.iter().enumerate().map(|(i, w)| (w.letters.clone(), i)).collect();
    }
}

/// beta_a for every word, one value per (letter count, level) class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaTable {
    pub interval: (f64, f64),
    /// (letter count, level, beta), ascending in beta.
    pub classes: Vec<(usize, u8, f64)>,
    pub betas: Vec<f64>,
}

/// Midpoints of equal bins of (2/5, alpha), ranked by letter count
/// ascending, then by homogeneity descending.
pub fn assign_betas(words: &WordSet, alpha: f64) -> Result<BetaTable> {
    if !(alpha > BETA_FLOOR) {
        return Err(Error::Domain(format!("beta interval (2/5, {alpha}) is empty")));
    }
    check_alpha(alpha)?;
    let mut classes: Vec<(usize, u8)> = words.words.iter().map(|w| (w.letters.len(), w.level)).collect();
    classes.sort_by_key(|&(c, l)| (c, std::cmp::Reverse(l)));
    classes.dedup();
    let width = (alpha - BETA_FLOOR) / classes.len() as f64;
    let classes: Vec<(usize, u8, f64)> = classes
        .iter()
        .enumerate()
        .map(|(i, &(c, l))| (c, l, BETA_FLOOR + width * (i as f64 + 0.5)))
        .collect();
    let betas = words
        .words
        .iter()
        .map(|w| classes.iter().find(|c| c.0 == w.letters.len() && c.1 == w.level).expect("class listed").2)
        .collect();
    Ok(BetaTable { interval: (BETA_FLOOR, alpha), classes, betas })
}

/// Hoelder-type size of a field at a given exponent.
pub trait Measured {
    fn holder_norm(&self, exponent: f64) -> f64;
}

impl Measured for Field {
    fn holder_norm(&self, exponent: f64) -> f64 {
        besov_norm(self, exponent)
    }
}

impl Measured for SpaceTimeField {
    /// Worst spatial Besov norm over the time slices.
    fn holder_norm(&self, exponent: f64) -> f64 {
        self.slices().iter().map(|s| besov_norm(s, exponent)).fold(0.0, f64::max)
    }
}

/// The product of letter norms over a word; 1 for the empty word.
pub fn word_weight(words: &WordSet, w: usize, letter_norms: &[f64]) -> f64 {
    words.words[w].letters.iter().map(|&l| letter_norms[l]).product()
}

/// A paracontrolled system, determined by its remainders u_a^#.
#[derive(Clone, Debug)]
pub struct ParacontrolledSystem<T> {
    pub remainders: Vec<T>,
}

impl<T: Operand + Measured> ParacontrolledSystem<T> {
    pub fn from_map(words: &WordSet, mut map: HashMap<usize, T>) -> Result<Self> {
        let remainders = (0..words.len())
            .map(|w| {
                map.remove(&w).ok_or_else(|| Error::IncompleteSystem(format!("{:?}", words.words[w].letters)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParacontrolledSystem { remainders })
    }

    /// u_a = sum_tau P~_{u_{a tau}} tau + u_a^#, longest words first.
    pub fn coefficients(&self, calc: &Calculus, words: &WordSet, letters: &[T]) -> Result<Vec<T>> {
        let mut out: Vec<Option<T>> = vec![None; words.len()];
        for w in words.bottom_up() {
            let mut acc = self.remainders[w].clone();
            for &(tau, ext) in &words.extensions[w] {
                let coef = out[ext].as_ref().expect("extensions are computed first");
                acc = acc.plus(&T::tilde(calc, coef, &letters[tau])?);
            }
            out[w] = Some(acc);
        }
        Ok(out.into_iter().map(|c| c.expect("every word visited")).collect())
    }

    /// sum_b ||u_b^#||_{n alpha + beta_b - |b|} [[b]].
    pub fn norm(&self, words: &WordSet, betas: &BetaTable, alpha: f64, letter_norms: &[f64]) -> f64 {
        remainder_norm(&self.remainders, words, betas, alpha, letter_norms)
    }
}

pub fn remainder_norm<T: Measured>(
    remainders: &[T],
    words: &WordSet,
    betas: &BetaTable,
    alpha: f64,
    letter_norms: &[f64],
) -> f64 {
    remainders
        .iter()
        .enumerate()
        .map(|(w, r)| {
            let e = words.order as f64 * alpha + betas.betas[w] - words.words[w].level as f64 * alpha;
            r.holder_norm(e) * word_weight(words, w, letter_norms)
        })
        .sum()
}

/// Coefficient sizes against the system norm.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCheck {
    pub system_norm: f64,
    /// sum_a ||u_a||_{beta_a} [[a]].
    pub weighted_coefficients: f64,
    /// Smallest C with sum_a ||u_a||_{beta_a} [[a]] <= C |||u|||.
    pub sum_constant: f64,
    /// Smallest C with ||u_a||_{beta_a} <= C |||u||| for every a.
    pub word_constant: f64,
    pub coefficient_norms: Vec<f64>,
}

pub fn coefficient_bound_check<T: Operand + Measured>(
    calc: &Calculus,
    system: &ParacontrolledSystem<T>,
    words: &WordSet,
    betas: &BetaTable,
    alpha: f64,
    letters: &[T],
    letter_norms: &[f64],
) -> Result<BoundCheck> {
    let coefs = system.coefficients(calc, words, letters)?;
    let norms: Vec<f64> = coefs.iter().enumerate().map(|(w, c)| c.holder_norm(betas.betas[w])).collect();
    let weighted: f64 = norms.iter().enumerate().map(|(w, n)| n * word_weight(words, w, letter_norms)).sum();
    let system_norm = system.norm(words, betas, alpha, letter_norms);
    let ratio = |x: f64| if system_norm > 0.0 { x / system_norm } else { 0.0 };
    Ok(BoundCheck {
        system_norm,
        weighted_coefficients: weighted,
        sum_constant: ratio(weighted),
        word_constant: ratio(norms.iter().cloned().fold(0.0, f64::max)),
        coefficient_norms: norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_fields::SpaceGrid;

    fn params(k: i64) -> AlphabetParams {
        AlphabetParams { alpha: 0.45, order: 3, chain_cap: k, axes: 1 }
    }

    #[test]
    fn level_one_is_the_seed_chain() {
        for k in 0..4 {
            let a = generate_alphabet(params(k)).unwrap();
            assert_eq!(a.of_level(1).len(), k as usize + 1);
            for &i in &a.of_level(1) {
                assert_eq!(a.letters[i].skeleton, "I(z)");
            }
        }
    }

    #[test]
    fn cap_zero_is_chain_free_and_closed() {
        let a = generate_alphabet(params(0)).unwrap();
        assert!(a.letters.iter().all(|l| l.n() == 0 && l.label == l.skeleton));
        assert!(a.closure_violations().is_empty());
        assert_eq!(a.of_level(2).len(), 5);
        assert_eq!(a.of_level(3).len(), 30);
        for k in 1..3 {
            assert!(generate_alphabet(params(k)).unwrap().closure_violations().is_empty());
        }
    }

    #[test]
    fn truncation_is_monotone() {
        let small = generate_alphabet(params(1)).unwrap();
        let big = generate_alphabet(params(2)).unwrap();
        let labels: BTreeSet<&str> = big.letters.iter().map(|l| l.label.as_str()).collect();
        for l in &small.letters {
            assert!(labels.contains(l.label.as_str()), "{} lost", l.label);
        }
        // every chain-free letter keeps all-zero powers at any cap
        for l in big.letters.iter().filter(|l| l.label == l.skeleton) {
            assert!(l.chain_powers.iter().all(|&p| p == 0));
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(generate_alphabet(params(-1)), Err(Error::Domain(_))));
        let mut p = params(0);
        p.alpha = 0.4;
        assert!(matches!(generate_alphabet(p), Err(Error::Domain(_))));
        let a = generate_alphabet(params(0)).unwrap();
        let w = generate_words(&a, 3);
        assert!(matches!(assign_betas(&w, 0.39), Err(Error::Domain(_))));
    }

    #[test]
    fn unary_alphabet_words() {
        let mut a = generate_alphabet(params(0)).unwrap();
        a.letters.truncate(1);
        a.reindex();
        let w = generate_words(&a, 3);
        let got: Vec<Vec<usize>> = w.words.iter().map(|w| w.letters.clone()).collect();
        assert_eq!(got, vec![vec![], vec![0], vec![0, 0], vec![0, 0, 0]]);
        assert_eq!(word_weight(&w, 0, &[7.0]), 1.0);
    }

    #[test]
    fn beta_rules_hold() {
        let a = generate_alphabet(params(1)).unwrap();
        let w = generate_words(&a, 3);
        let t = assign_betas(&w, 0.45).unwrap();
        assert_eq!(t.classes.len(), 7);
        for (i, x) in w.words.iter().enumerate() {
            assert!(t.betas[i] > 0.4 && t.betas[i] < 0.45);
            for (j, y) in w.words.iter().enumerate() {
                if x.letters.len() > y.letters.len() {
                    assert!(t.betas[i] > t.betas[j]);
                }
                if x.letters.len() == y.letters.len() && x.level < y.level {
                    assert!(t.betas[i] > t.betas[j]);
                }
            }
        }
    }

    #[test]
    fn zero_and_single_remainder_systems() {
        let a = generate_alphabet(params(0)).unwrap();
        let w = generate_words(&a, 3);
        let t = assign_betas(&w, 0.45).unwrap();
        let g = SpaceGrid::new(1, 32).unwrap();
        let calc = Calculus::new(1.0).unwrap();
        let letters: Vec<Field> = (0..a.len()).map(|i| crate::synthetic::smooth(g, 4, i as u64)).collect();
        let norms = vec![1.0; a.len()];
        let zero = ParacontrolledSystem { remainders: vec![Field::zeros(g); w.len()] };
        let c = coefficient_bound_check(&calc, &zero, &w, &t, 0.45, &letters, &norms).unwrap();
        assert_eq!(c.system_norm, 0.0);
        assert!(c.coefficient_norms.iter().all(|&n| n == 0.0));

        let mut one = zero.clone();
        one.remainders[0] = crate::synthetic::smooth(g, 3, 9);
        let e = 3.0 * 0.45 + t.betas[0];
        assert_eq!(one.norm(&w, &t, 0.45, &norms), one.remainders[0].holder_norm(e));

        let mut map: HashMap<usize, Field> = (1..w.len()).map(|i| (i, Field::zeros(g))).collect();
        assert!(matches!(ParacontrolledSystem::from_map(&w, map.clone()), Err(Error::IncompleteSystem(_))));
        map.insert(0, Field::zeros(g));
        assert!(ParacontrolledSystem::from_map(&w, map).is_ok());
    }

    #[test]
    fn json_round_trip_keeps_index() {
        let a = generate_alphabet(params(1)).unwrap();
        let b = Alphabet::from_json(&a.to_json()).unwrap();
        assert_eq!(b.find(&Recipe::Chain(0)), a.find(&Recipe::Chain(0)));
        assert_eq!(b.len(), a.len());
    }
}
