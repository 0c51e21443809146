//! Coefficient expressions: sums of c * G^{(k)}(u) * prod u_w, differentiated
//! along letters by the chain rule on the paracontrolled expansion.

use serde::Serialize;

use crate::torus_fields::{Field, SpaceTimeField};
use crate::word_algebra::WordSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Closure {
    /// Derivatives of the nonlinearity f.
    F,
    /// Derivatives of the quasilinear coefficient eps.
    Eps,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Monomial {
    pub coef: f64,
    /// (closure, derivative order), sorted.
    pub closures: Vec<(Closure, u8)>,
    /// Word ids of the system coefficients u_w, sorted.
    pub words: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Expr(pub Vec<Monomial>);

impl Expr {
    pub fn closure(c: Closure) -> Expr {
        Expr(vec![Monomial { coef: 1.0, closures: vec![(c, 0)], words: vec![] }])
    }

    pub fn word(w: usize) -> Expr {
        Expr(vec![Monomial { coef: 1.0, closures: vec![], words: vec![w] }])
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_order(&self) -> u8 {
        self.0.iter().flat_map(|m| m.closures.iter().map(|c| c.1)).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut out = self.clone();
        out.0.extend(other.0.iter().cloned());
        out.normalise()
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        let mut out = Vec::new();
        for a in &self.0 {
            for b in &other.0 {
                let mut closures = a.closures.clone();
                closures.extend(&b.closures);
                let mut words = a.words.clone();
                words.extend(&b.words);
                out.push(Monomial { coef: a.coef * b.coef, closures, words });
            }
        }
        Expr(out).normalise()
    }

    /// Derivative along the letter rho: G^{(k)}(u) -> G^{(k+1)}(u) u_rho and
    /// u_w -> u_{w rho}; factors whose extended word leaves the word set drop.
    pub fn derive(&self, words: &WordSet, rho: usize) -> Expr {
        let single = words.find(&[rho]);
        let mut out = Vec::new();
        for m in &self.0 {
            if let Some(s) = single {
                for i in 0..m.closures.len() {
                    let mut closures = m.closures.clone();
                    closures[i].1 += 1;
                    let mut ws = m.words.clone();
                    ws.push(s);
                    out.push(Monomial { coef: m.coef, closures, words: ws });
                }
            }
            for i in 0..m.words.len() {
                let mut ext = words.words[m.words[i]].letters.clone();
                ext.push(rho);
                if let Some(e) = words.find(&ext) {
                    let mut ws = m.words.clone();
                    ws[i] = e;
                    out.push(Monomial { coef: m.coef, closures: m.closures.clone(), words: ws });
                }
            }
        }
        Expr(out).normalise()
    }

    fn normalise(mut self) -> Expr {
        for m in &mut self.0 {
            m.closures.sort();
            m.words.sort();
        }
        self.0.sort_by(|a, b| (&a.closures, &a.words).cmp(&(&b.closures, &b.words)));
        let mut out: Vec<Monomial> = Vec::with_capacity(self.0.len());
        for m in self.0 {
            match out.last_mut() {
                Some(l) if l.closures == m.closures && l.words == m.words => l.coef += m.coef,
                _ => out.push(m),
            }
        }
        out.retain(|m| m.coef != 0.0);
        Expr(out)
    }

    /// Collocation evaluation; `closure(c, k)` returns G^{(k)}(u).
    pub fn eval<'a>(
        &self,
        closure: &(dyn Fn(Closure, u8) -> &'a SpaceTimeField + Sync),
        coeffs: &[SpaceTimeField],
        zero: &SpaceTimeField,
    ) -> SpaceTimeField {
        let mut acc: Option<SpaceTimeField> = None;
        for m in &self.0 {
            let factors: Vec<&SpaceTimeField> =
                m.closures.iter().map(|&(c, k)| closure(c, k)).chain(m.words.iter().map(|&w| &coeffs[w])).collect();
            let term = match factors.split_first() {
                None => zero.map_slices(|f| f.map(|_| m.coef)),
                Some((first, rest)) => {
                    let p = rest.iter().fold((*first).clone(), |p, f| p.zip_slices(f, Field::mul_pointwise));
                    if m.coef == 1.0 { p } else { p.scale(m.coef) }
                }
            };
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term),
            });
        }
        acc.unwrap_or_else(|| zero.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word_algebra::{generate_alphabet, generate_words, AlphabetParams};

    #[test]
    fn chain_rule_on_words() {
        let a = generate_alphabet(AlphabetParams { alpha: 0.45, order: 3, chain_cap: 0, axes: 1 }).unwrap();
        let ws = generate_words(&a, 3);
        let z = a.seed();
        let wz = ws.find(&[z]).unwrap();
        let wzz = ws.find(&[z, z]).unwrap();
        let wzzz = ws.find(&[z, z, z]).unwrap();
        // d_z (eps u_z) = eps' u_z u_z + eps u_zz
        let e = Expr::closure(Closure::Eps).mul(&Expr::word(wz));
        let d = e.derive(&ws, z);
        assert_eq!(d.0.len(), 2);
        assert!(d.0.contains(&Monomial { coef: 1.0, closures: vec![(Closure::Eps, 1)], words: vec![wz, wz] }));
        assert!(d.0.contains(&Monomial { coef: 1.0, closures: vec![(Closure::Eps, 0)], words: vec![wzz] }));
        // second derivative: eps'' u_z^3 + 3 eps' u_z u_zz + eps u_zzz
        let d2 = d.derive(&ws, z);
        let coef = |c: (Closure, u8), w: Vec<usize>| {
            d2.0.iter().find(|m| m.closures == vec![c] && m.words == w).map(|m| m.coef)
        };
        assert_eq!(coef((Closure::Eps, 2), vec![wz, wz, wz]), Some(1.0));
        let mut mixed = vec![wz, wzz];
        mixed.sort();
        assert_eq!(coef((Closure::Eps, 1), mixed), Some(3.0));
        assert_eq!(coef((Closure::Eps, 0), vec![wzzz]), Some(1.0));
        // words beyond the set drop out
        assert!(Expr::word(wzzz).derive(&ws, z).is_zero());
    }
}
