//! Canonical decomposition of f(u) zeta + eps(u) L u into paraproducts hosted
//! by letters plus a remainder, and the map Phi built on it.
//!
//! Every split is an identity by construction: N, K, the L-defects and R°
//! are defined as differences, so the term sum reproduces the direct
//! right-hand side up to rounding. Products are collocation products, which
//! keeps y (e_b xi) = (y e_b) xi exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expr::{Closure, Expr};
use super::Solver;
use crate::error::Result;
use crate::paraproducts::Operand;
use crate::reference_data::{l_defect, nominal_source, non_para, tilde_defect};
use crate::torus_fields::{duhamel_inverse, Field, SpaceTimeField};
use crate::word_algebra::{ParacontrolledSystem, Recipe};

/// Highest closure derivative the coefficient algebra reaches at order 3.
const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Truncation {
    pub label: String,
    pub magnitude: f64,
}

/// P_c xi with xi the source term of the host letter.
#[derive(Clone, Debug)]
pub struct RhsTerm {
    pub host: usize,
    pub label: String,
    pub coefficient: Expr,
    pub nominal: f64,
    pub field: SpaceTimeField,
}

#[derive(Clone, Debug)]
pub struct CanonicalRhs {
    pub terms: Vec<RhsTerm>,
    /// Remainder pieces summed per family, in a fixed order.
    pub remainder: Vec<(String, SpaceTimeField)>,
    pub remainder_nominal: f64,
    pub truncations: Vec<Truncation>,
    pub notes: Vec<String>,
}

impl CanonicalRhs {
    pub fn remainder_sum(&self) -> SpaceTimeField {
        let mut it = self.remainder.iter().map(|r| &r.1);
        let first = it.next().expect("remainder has at least one family").clone();
        it.fold(first, |a, f| a.add(f))
    }

    pub fn sum(&self) -> SpaceTimeField {
        self.terms.iter().fold(self.remainder_sum(), |a, t| a.add(&t.field))
    }
}

fn is_zero(f: &SpaceTimeField) -> bool {
    f.slices().iter().all(Field::is_zero)
}

fn times(a: &SpaceTimeField, b: &SpaceTimeField) -> SpaceTimeField {
    a.zip_slices(b, Field::mul_pointwise)
}

#[derive(Default)]
struct Part {
    terms: Vec<RhsTerm>,
    pieces: Vec<(&'static str, SpaceTimeField)>,
    truncations: Vec<Truncation>,
}

impl Part {
    fn piece(&mut self, family: &'static str, f: SpaceTimeField) {
        self.pieces.push((family, f));
    }
}

/// Closures f^{(k)}(u), eps^{(k)}(u) and the coefficients of the current system.
struct State<'a> {
    coeffs: &'a [SpaceTimeField],
    f: Vec<SpaceTimeField>,
    e: Vec<SpaceTimeField>,
    zero: &'a SpaceTimeField,
}

impl<'a> State<'a> {
    fn new(s: &'a Solver, coeffs: &'a [SpaceTimeField]) -> Self {
        let u = &coeffs[0];
        let f = (0..=MAX_ORDER as u8).map(|k| u.map_slices(|x| x.map(|v| s.spec.f.eval(k, v)))).collect();
        let e = (0..=MAX_ORDER as u8).map(|k| u.map_slices(|x| x.map(|v| s.reform.eps(k, v)))).collect();
        State { coeffs, f, e, zero: &s.zero }
    }

    fn eval(&self, x: &Expr) -> SpaceTimeField {
        assert!(x.max_order() as usize <= MAX_ORDER, "closure derivative beyond order {MAX_ORDER}");
        let get = |c: Closure, k: u8| match c {
            Closure::F => &self.f[k as usize],
            Closure::Eps => &self.e[k as usize],
        };
        x.eval(&get, self.coeffs, self.zero)
    }
}

impl Solver {
    /// Adds P_c xi as a term hosted by the letter with this recipe, or to the
    /// remainder when the letter lies beyond the truncation.
    fn named(&self, p: &mut Part, recipe: Recipe, coef: Expr, cv: &SpaceTimeField, xi: &SpaceTimeField) -> Result<SpaceTimeField> {
        let field = Operand::para(&self.calc, cv, xi)?;
        match self.alphabet.find(&recipe) {
            Some(host) => p.terms.push(RhsTerm {
                host,
                label: self.alphabet.letters[host].label.clone(),
                coefficient: coef,
                nominal: nominal_source(&self.alphabet, &recipe).expect("hosts are inverse letters"),
                field: field.clone(),
            }),
            None => {
                p.truncations.push(Truncation { label: format!("{recipe:?}"), magnitude: field.sup_norm() });
                p.piece("truncated", field.clone());
            }
        }
        Ok(field)
    }

    fn tilde(&self, x: &SpaceTimeField, letter: usize) -> Result<SpaceTimeField> {
        Operand::tilde(&self.calc, x, self.letter(letter))
    }

    /// f(u) zeta = P_{f(u)} zeta + sum_a P_{f'(u) u_a} N(a, zeta)
    ///   + sum_{a, rho} P_{(f'(u) u_a)_rho} K(rho, a, zeta) + remainder.
    fn noise_branch(&self, st: &State) -> Result<Vec<Part>> {
        let calc = &self.calc;
        let zeta = self.noise();
        let fe = Expr::closure(Closure::F);
        let fv = st.eval(&fe);
        let l1 = self.alphabet.of_level(1);
        let out = self
            .level_at_most(2)
            .par_iter()
            .map(|&a| -> Result<(Part, SpaceTimeField)> {
                let mut p = Part::default();
                let ga = fe.derive(&self.words, a);
                let gv = st.eval(&ga);
                let nz = &self.noise_n[&a];
                self.named(&mut p, Recipe::NoiseResonance(vec![a]), ga.clone(), &gv, nz)?;
                p.piece("noise", non_para(calc, &gv, nz)?);
                if self.alphabet.level(a) == 1 {
                    let mut sharp = gv.clone();
                    for &r in &l1 {
                        let gar = ga.derive(&self.words, r);
                        let v = st.eval(&gar);
                        let kz = &self.noise_k[&(a, r)];
                        self.named(&mut p, Recipe::NoiseResonance(vec![a, r]), gar, &v, kz)?;
                        p.piece("noise", non_para(calc, &v, kz)?);
                        let tv = self.tilde(&v, r)?;
                        p.piece("noise", tilde_defect(calc, &tv, self.letter(a), zeta)?.sub(&times(&v, kz)));
                        sharp = sharp.sub(&tv);
                    }
                    p.piece("noise", tilde_defect(calc, &sharp, self.letter(a), zeta)?);
                } else {
                    p.piece("noise", tilde_defect(calc, &gv, self.letter(a), zeta)?);
                }
                Ok((p, self.tilde(&gv, a)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g_sharp = fv.clone();
        let mut parts = Vec::new();
        for (p, t) in out {
            g_sharp = g_sharp.sub(&t);
            parts.push(p);
        }
        let mut p = Part::default();
        self.named(&mut p, Recipe::Seed, fe, &fv, zeta)?;
        p.piece("noise", non_para(calc, &g_sharp, zeta)?);
        parts.push(p);
        Ok(parts)
    }

    /// eps L u with L u = sum_w P_{u_w} xi_w + sharp_L, split into P_{eps u_w} xi_w,
    /// P_{u_w eps_b} N(b, xi_w), P_{u_a eps_bc} K(c, b, L a) and a remainder.
    fn quasilinear_branch(&self, st: &State, remainders: &[SpaceTimeField]) -> Result<Vec<Part>> {
        let calc = &self.calc;
        let ws = &self.words;
        let ee = Expr::closure(Closure::Eps);
        let ev = &st.e[0];
        let low = self.level_at_most(2);
        let l1 = self.alphabet.of_level(1);
        let eb: Vec<(usize, Expr, SpaceTimeField, SpaceTimeField)> = low
            .par_iter()
            .map(|&b| {
                let x = ee.derive(ws, b);
                let v = st.eval(&x);
                let t = self.tilde(&v, b)?;
                Ok((b, x, v, t))
            })
            .collect::<Result<_>>()?;
        let find_eb = |b: usize| eb.iter().find(|e| e.0 == b).expect("level <= 2 letter");
        // eps minus its expansion over letters of level <= m
        let e_sharp: Vec<SpaceTimeField> = (0..3u8)
            .map(|m| {
                eb.iter().filter(|e| self.alphabet.level(e.0) <= m).fold(ev.clone(), |acc, e| acc.sub(&e.3))
            })
            .collect();
        let out = (0..ws.len())
            .into_par_iter()
            .map(|w| -> Result<(Part, Option<SpaceTimeField>)> {
                let ls = &ws.words[w].letters;
                let r = &remainders[w];
                let sharp_l = if is_zero(r) {
                    None
                } else if ls.is_empty() {
                    Some(Operand::apply_l(calc, r))
                } else {
                    let mut chain: Vec<&SpaceTimeField> = vec![r];
                    chain.extend(ls[1..].iter().rev().map(|&s| self.letter(s)));
                    Some(l_defect(calc, &chain, self.letter(ls[0]))?)
                };
                let mut p = Part::default();
                let y = &st.coeffs[w];
                if ls.is_empty() || is_zero(y) {
                    return Ok((p, sharp_l));
                }
                let xi = self.xi[w].as_ref().expect("non-empty word");
                let lp = Operand::para(calc, y, xi)?;
                let pe = Operand::para(calc, ev, &lp)?;
                let host = if ls.len() == 1 { Recipe::Chain(ls[0]) } else { Recipe::LCommutator(ls.clone()) };
                let t = self.named(&mut p, host, ee.mul(&Expr::word(w)), &times(ev, y), xi)?;
                p.piece("merge", pe.sub(&t));
                let nexi = non_para(calc, ev, xi)?;
                p.piece("defect", non_para(calc, ev, &lp)?.sub(&times(y, &nexi)));
                let lvl = ws.words[w].level;
                let m = 3u8.saturating_sub(lvl);
                for &b in low.iter().filter(|&&b| self.alphabet.level(b) <= m) {
                    let (_, ebx, ebv, _) = find_eb(b);
                    let yeb = times(y, ebv);
                    let nb = &self.prod_n[&(w, b)];
                    let coef = Expr::word(w).mul(ebx);
                    self.named(&mut p, Recipe::Product { word: ls.clone(), with: b }, coef, &yeb, nb)?;
                    p.piece("product", non_para(calc, &yeb, nb)?);
                    if ls.len() == 1 && lvl == 1 && self.alphabet.level(b) == 1 {
                        let a = ls[0];
                        let mut sharp = ebv.clone();
                        for &c in &l1 {
                            let ebc = ebx.derive(ws, c);
                            let v = st.eval(&ebc);
                            let yv = times(y, &v);
                            let kc = &self.second_k[&(a, b, c)];
                            let coef = Expr::word(w).mul(&ebc);
                            self.named(&mut p, Recipe::SecondProduct { word: a, first: b, second: c }, coef, &yv, kc)?;
                            p.piece("product", non_para(calc, &yv, kc)?);
                            let tv = self.tilde(&v, c)?;
                            let k2 = tilde_defect(calc, &tv, self.letter(b), xi)?.sub(&times(&v, kc));
                            p.piece("product", times(y, &k2));
                            sharp = sharp.sub(&tv);
                        }
                        p.piece("product", times(y, &tilde_defect(calc, &sharp, self.letter(b), xi)?));
                    } else {
                        p.piece("product", times(y, &tilde_defect(calc, ebv, self.letter(b), xi)?));
                    }
                }
                p.piece("product", times(y, &non_para(calc, &e_sharp[m as usize], xi)?));
                Ok((p, sharp_l))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sharp_l = st.zero.clone();
        let mut parts = Vec::new();
        for (p, s) in out {
            if let Some(s) = s {
                sharp_l = sharp_l.add(&s);
            }
            parts.push(p);
        }
        let mut p = Part::default();
        p.piece("commutator", Operand::para(calc, ev, &sharp_l)?);
        p.piece("commutator", non_para(calc, ev, &sharp_l)?);
        parts.push(p);
        Ok(parts)
    }

    /// Canonical decomposition of the right-hand side at the system's coefficients.
    pub fn rhs_canonical_at(&self, coeffs: &[SpaceTimeField], remainders: &[SpaceTimeField]) -> Result<CanonicalRhs> {
        let st = State::new(self, coeffs);
        let mut parts = self.noise_branch(&st)?;
        let mut notes = vec!["drift terms a_i V_i u vanish for a constant reference state".to_string()];
        if self.spec.semilinear {
            notes.push("quasilinear branches disabled".into());
        } else {
            parts.extend(self.quasilinear_branch(&st, remainders)?);
        }
        let mut terms = Vec::new();
        let mut truncations = Vec::new();
        let mut remainder: Vec<(String, SpaceTimeField)> = Vec::new();
        for p in parts {
            terms.extend(p.terms);
            truncations.extend(p.truncations);
            for (name, f) in p.pieces {
                match remainder.iter_mut().find(|r| r.0 == name) {
                    Some(r) => r.1 = r.1.add(&f),
                    None => remainder.push((name.to_string(), f)),
                }
            }
        }
        let remainder_nominal = 3.0 * self.spec.alpha + self.betas.betas[0] - 2.0;
        Ok(CanonicalRhs { terms, remainder, remainder_nominal, truncations, notes })
    }

    pub fn rhs_canonical(&self, system: &ParacontrolledSystem<SpaceTimeField>) -> Result<CanonicalRhs> {
        let coeffs = system.coefficients(&self.calc, &self.words, &self.refs.letters)?;
        self.rhs_canonical_at(&coeffs, &system.remainders)
    }

    /// New coefficients h_w: the hosted coefficient for a letter, its letter
    /// derivatives for longer words.
    pub fn coefficient_exprs(&self, rhs: &CanonicalRhs) -> Vec<Option<Expr>> {
        let ws = &self.words;
        let mut h: Vec<Option<Expr>> = vec![None; ws.len()];
        for t in &rhs.terms {
            let w = ws.find(&[t.host]).expect("every letter is a word");
            h[w] = Some(match h[w].take() {
                Some(e) => e.add(&t.coefficient),
                None => t.coefficient.clone(),
            });
        }
        // parents precede their extensions in the breadth-first word order
        for w in 1..ws.len() {
            if let Some(e) = h[w].clone() {
                for &(s, ext) in &ws.extensions[w] {
                    let d = e.derive(ws, s);
                    if !d.is_zero() {
                        h[ext] = Some(d);
                    }
                }
            }
        }
        h
    }

    /// Phi: Duhamel inversion of the canonical RHS, then new remainders
    /// u_()^# = u - sum P~_{h_tau} tau and u_a^# = h_a - sum P~_{h_{a sigma}} sigma.
    pub fn phi_map(
        &self,
        system: &ParacontrolledSystem<SpaceTimeField>,
    ) -> Result<(ParacontrolledSystem<SpaceTimeField>, CanonicalRhs)> {
        let coeffs = system.coefficients(&self.calc, &self.words, &self.refs.letters)?;
        let rhs = self.rhs_canonical_at(&coeffs, &system.remainders)?;
        let u = duhamel_inverse(&self.reform.op, &rhs.sum(), &self.u0)?;
        let st = State::new(self, &coeffs);
        let h = self.coefficient_exprs(&rhs);
        let hv: Vec<Option<SpaceTimeField>> = h.par_iter().map(|e| e.as_ref().map(|e| st.eval(e))).collect();
        let remainders = (0..self.words.len())
            .into_par_iter()
            .map(|w| {
                let base = if w == 0 { u.clone() } else { hv[w].clone().unwrap_or_else(|| self.zero.clone()) };
                let mut acc = base;
                for &(s, ext) in &self.words.extensions[w] {
                    if let Some(c) = &hv[ext] {
                        acc = acc.sub(&self.tilde(c, s)?);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((ParacontrolledSystem { remainders }, rhs))
    }
}
