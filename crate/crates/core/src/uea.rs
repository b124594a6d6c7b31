//! Universal enveloping algebra in PBW coordinates.
//!
//! A PBW monomial is a weakly increasing tuple of basis indices. Products
//! are straightened with `x_j x_i = x_i x_j + [x_j, x_i]` for `j > i`;
//! straightening results are memoized per algebra behind a lock, so a
//! shared `Uea` may be used from several threads.

use std::collections::{BTreeMap, HashMap};
use std::ops::Deref;
use std::sync::{Arc, RwLock};

use num_traits::{One, Zero};

use crate::element::{mismatch, Key, Mono, SparseElement, Space};
use crate::error::{Error, Result};
use crate::hseries::{factorial, HSeries, Q};
use crate::lie::{Idx, LieData};

/// ħ-free element of U𝔤 keyed by PBW monomial.
pub type Pbw = BTreeMap<Mono, Q>;

pub fn pbw_add(acc: &mut Pbw, m: &Mono, c: &Q) {
    if c.is_zero() {
        return;
    }
    match acc.get_mut(m) {
        Some(e) => {
            *e += c;
            if e.is_zero() {
                acc.remove(m);
            }
        }
        None => {
            acc.insert(m.clone(), c.clone());
        }
    }
}

fn pbw_axpy(acc: &mut Pbw, c: &Q, v: &Pbw) {
    for (m, x) in v {
        pbw_add(acc, m, &(c * x));
    }
}

/// Splittings of a PBW monomial under the iterated coproduct into `r`
/// slots: every slot receives a sorted sub-multiset, weighted by the
/// product of binomial counts.
pub fn split_mono(m: &[Idx], r: usize) -> Vec<(Vec<Mono>, Q)> {
    // group equal letters
    let mut groups: Vec<(Idx, usize)> = Vec::new();
    for &x in m {
        match groups.last_mut() {
            Some((y, n)) if *y == x => *n += 1,
            _ => groups.push((x, 1)),
        }
    }
    let mut out = vec![(vec![Vec::new(); r], Q::one())];
    for (x, mu) in groups {
        let dists = compositions(mu, r);
        let mut next = Vec::with_capacity(out.len() * dists.len());
        for (slots, c) in &out {
            for d in &dists {
                let mut s = slots.clone();
                let mut coef = c.clone();
                let mut left = mu;
                for (j, &k) in d.iter().enumerate() {
                    s[j].extend(std::iter::repeat(x).take(k));
                    coef *= binomial(left, k);
                    left -= k;
                }
                next.push((s, coef));
            }
        }
        out = next;
    }
    out
}

fn binomial(n: usize, k: usize) -> Q {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// All ways to write `n` as an ordered sum of `r` nonnegative parts.
fn compositions(n: usize, r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    if r == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, r - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

type InsertMemo = HashMap<(Mono, Idx), Arc<Pbw>>;
type MulMemo = HashMap<(Mono, Mono), Arc<Pbw>>;

#[derive(Debug)]
pub struct Uea {
    lie: Arc<LieData>,
    degree_bound: usize,
    insert_memo: RwLock<InsertMemo>,
    mul_memo: RwLock<MulMemo>,
    sym_memo: RwLock<HashMap<Mono, Arc<Pbw>>>,
}

impl Deref for Uea {
    type Target = LieData;
    fn deref(&self) -> &LieData {
        &self.lie
    }
}

impl Uea {
    pub fn new(lie: Arc<LieData>, degree_bound: usize) -> Self {
        Uea {
            lie,
            degree_bound,
            insert_memo: RwLock::default(),
            mul_memo: RwLock::default(),
            sym_memo: RwLock::default(),
        }
    }

    pub fn lie(&self) -> &Arc<LieData> {
        &self.lie
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    /// `m · x_y` straightened.
    pub fn insert_right(&self, m: &[Idx], y: Idx) -> Arc<Pbw> {
        match m.last() {
            None => return Arc::new([(vec![y], Q::one())].into()),
            Some(&x) if x <= y => {
                let mut w = m.to_vec();
                w.push(y);
                return Arc::new([(w, Q::one())].into());
            }
            _ => {}
        }
        let key = (m.to_vec(), y);
        if let Some(r) = self.insert_memo.read().unwrap().get(&key) {
            return r.clone();
        }
        let (w, x) = (&m[..m.len() - 1], m[m.len() - 1]);
        // w x y = (w y) x + w [x, y]
        let mut out = Pbw::new();
        for (t, c) in self.insert_right(w, y).iter() {
            pbw_axpy(&mut out, c, &self.insert_right(t, x));
        }
        for (l, c) in self.lie.bracket(x, y) {
            pbw_axpy(&mut out, c, &self.insert_right(w, *l));
        }
        let out = Arc::new(out);
        self.insert_memo.write().unwrap().insert(key, out.clone());
        out
    }

    pub fn mul_mono(&self, a: &[Idx], b: &[Idx]) -> Arc<Pbw> {
        if b.is_empty() {
            return Arc::new([(a.to_vec(), Q::one())].into());
        }
        if a.is_empty() {
            return Arc::new([(b.to_vec(), Q::one())].into());
        }
        if a.last() <= b.first() {
            let mut w = a.to_vec();
            w.extend_from_slice(b);
            return Arc::new([(w, Q::one())].into());
        }
        let key = (a.to_vec(), b.to_vec());
        if let Some(r) = self.mul_memo.read().unwrap().get(&key) {
            return r.clone();
        }
        let mut cur: Pbw = [(a.to_vec(), Q::one())].into();
        for &y in b {
            let mut next = Pbw::new();
            for (t, c) in &cur {
                pbw_axpy(&mut next, c, &self.insert_right(t, y));
            }
            cur = next;
        }
        let out = Arc::new(cur);
        self.mul_memo.write().unwrap().insert(key, out.clone());
        out
    }

    pub fn mul_pbw(&self, a: &Pbw, b: &Pbw) -> Pbw {
        let mut out = Pbw::new();
        for (ma, ca) in a {
            for (mb, cb) in b {
                pbw_axpy(&mut out, &(ca * cb), &self.mul_mono(ma, mb));
            }
        }
        out
    }

    /// Product of a word of letters, in the given order.
    pub fn word_product(&self, word: &[Idx]) -> Pbw {
        let mut cur: Pbw = [(Vec::new(), Q::one())].into();
        for &y in word {
            let mut next = Pbw::new();
            for (t, c) in &cur {
                pbw_axpy(&mut next, c, &self.insert_right(t, y));
            }
            cur = next;
        }
        cur
    }

    /// Symmetrization of a symmetric monomial.
    pub fn sym_mono(&self, s: &[Idx]) -> Arc<Pbw> {
        if s.len() <= 1 || s.first() == s.last() {
            return Arc::new([(s.to_vec(), Q::one())].into());
        }
        if let Some(r) = self.sym_memo.read().unwrap().get(s) {
            return r.clone();
        }
        let mut out = Pbw::new();
        let words = distinct_arrangements(s);
        let w = Q::from_integer((words.len() as u64).into()).recip();
        for word in &words {
            pbw_axpy(&mut out, &w, &self.word_product(word));
        }
        let out = Arc::new(out);
        self.sym_memo.write().unwrap().insert(s.to_vec(), out.clone());
        out
    }

    pub fn sym_pbw(&self, s: &Pbw) -> Pbw {
        let mut out = Pbw::new();
        for (m, c) in s {
            pbw_axpy(&mut out, c, &self.sym_mono(m));
        }
        out
    }

    /// Inverse of symmetrization by degree-descending elimination.
    pub fn sym_inv_pbw(&self, v: &Pbw) -> Pbw {
        let mut v = v.clone();
        let mut out = Pbw::new();
        while let Some(d) = v.keys().map(|m| m.len()).max() {
            let top: Vec<(Mono, Q)> =
                v.iter().filter(|(m, _)| m.len() == d).map(|(m, c)| (m.clone(), c.clone())).collect();
            for (m, c) in top {
                pbw_add(&mut out, &m, &c);
                pbw_axpy(&mut v, &-c, &self.sym_mono(&m));
            }
        }
        out
    }

    /// Decompose `a = ideal + um` with `ideal ∈ U𝔤·𝔥` and `um ∈ sym(S𝔪)`.
    pub fn split_um_pbw(&self, a: &Pbw) -> (Pbw, Pbw) {
        let mut v = a.clone();
        let mut ideal = Pbw::new();
        let mut um = Pbw::new();
        while let Some(d) = v.keys().map(|m| m.len()).max() {
            let top: Vec<(Mono, Q)> =
                v.iter().filter(|(m, _)| m.len() == d).map(|(m, c)| (m.clone(), c.clone())).collect();
            for (m, c) in top {
                let r = match m.iter().rposition(|&x| self.lie.is_h(x)) {
                    Some(p) => {
                        let mut rest = m.clone();
                        let x = rest.remove(p);
                        let r = self.mul_pbw(&self.sym_mono(&rest), &[(vec![x], Q::one())].into());
                        pbw_axpy(&mut ideal, &c, &r);
                        r
                    }
                    None => {
                        let r = (*self.sym_mono(&m)).clone();
                        pbw_axpy(&mut um, &c, &r);
                        r
                    }
                };
                pbw_axpy(&mut v, &-c, &r);
            }
        }
        (ideal, um)
    }

    /// Adjoint action of a basis vector on a PBW monomial.
    pub fn ad_mono(&self, x: Idx, m: &[Idx]) -> Pbw {
        let mut out = (*self.mul_mono(&[x], m)).clone();
        pbw_axpy(&mut out, &-Q::one(), &self.mul_mono(m, &[x]));
        out
    }

    /// Raise `DegreeOverflow` if any U𝔤 slot exceeds the degree bound.
    pub fn check_degree(&self, e: &SparseElement) -> Result<()> {
        let deg = match e.space() {
            Space::Pbw | Space::UgTensor | Space::Adt => {
                e.terms().keys().flat_map(|k| k.iter().map(|m| m.len())).max().unwrap_or(0)
            }
            Space::Formal => e
                .terms()
                .keys()
                .flat_map(|k| k[..k.len() - 1].iter().map(|m| m.len()))
                .max()
                .unwrap_or(0),
            _ => 0,
        };
        if deg > self.degree_bound {
            return Err(Error::DegreeOverflow { degree: deg, bound: self.degree_bound });
        }
        Ok(())
    }

    /// Product in U𝔤.
    pub fn pbw_multiply(&self, a: &SparseElement, b: &SparseElement) -> Result<SparseElement> {
        expect(a, Space::Pbw)?;
        expect(b, Space::Pbw)?;
        let mut out = SparseElement::zero(Space::Pbw);
        for (ka, va) in a.terms() {
            for (kb, vb) in b.terms() {
                let c = va * vb;
                for (m, x) in self.mul_mono(&ka[0], &kb[0]).iter() {
                    out.add_term(vec![m.clone()], &c.scale(x));
                }
            }
        }
        self.check_degree(&out)?;
        Ok(out)
    }

    /// Δ: U𝔤 → U𝔤 ⊗ U𝔤.
    pub fn coproduct(&self, a: &SparseElement) -> Result<SparseElement> {
        expect(a, Space::Pbw)?;
        let out = a.flat_map(Space::UgTensor, |k| split_mono(&k[0], 2));
        self.check_degree(&out)?;
        Ok(out)
    }

    /// U𝔥 → U𝔤 ⊗ U𝔥, x ↦ x⊗1 + 1⊗x on 𝔥.
    pub fn coaction(&self, v: &SparseElement) -> Result<SparseElement> {
        expect(v, Space::Pbw)?;
        if let Some(x) = v.terms().keys().flat_map(|k| k[0].iter()).find(|x| !self.lie.is_h(**x)) {
            return Err(Error::SpaceMismatch {
                expected: "an element of Uh".into(),
                got: format!("a term containing {}", self.lie.name(*x)),
            });
        }
        let out = v.flat_map(Space::Adt, |k| split_mono(&k[0], 2));
        self.check_degree(&out)?;
        Ok(out)
    }

    /// sym: S𝔤 → U𝔤.
    pub fn symmetrize(&self, s: &SparseElement) -> Result<SparseElement> {
        expect(s, Space::Sym)?;
        let out = s.flat_map(Space::Pbw, |k| {
            self.sym_mono(&k[0]).iter().map(|(m, c)| (vec![m.clone()], c.clone())).collect()
        });
        self.check_degree(&out)?;
        Ok(out)
    }

    /// sym⁻¹: U𝔤 → S𝔤. With `h_only`, the result must lie in S𝔥.
    pub fn sym_inverse(&self, v: &SparseElement, h_only: bool) -> Result<SparseElement> {
        expect(v, Space::Pbw)?;
        let mut out = SparseElement::zero(Space::Sym);
        // coefficients are series: invert layer by layer
        let top = v.hbar_degree().unwrap_or(0);
        for n in 0..=top {
            let layer: Pbw = v
                .terms()
                .iter()
                .map(|(k, c)| (k[0].clone(), c.coeff(n)))
                .filter(|(_, c)| !c.is_zero())
                .collect();
            for (m, c) in self.sym_inv_pbw(&layer) {
                out.add_term(vec![m], &HSeries::monomial(c, n));
            }
        }
        if h_only {
            if let Some(x) = out.terms().keys().flat_map(|k| k[0].iter()).find(|x| !self.lie.is_h(**x)) {
                return Err(Error::NotInImage(format!(
                    "preimage involves {} outside h",
                    self.lie.name(*x)
                )));
            }
        }
        Ok(out)
    }

    pub fn split_um(&self, a: &SparseElement) -> Result<(SparseElement, SparseElement)> {
        expect(a, Space::Pbw)?;
        let mut ideal = SparseElement::zero(Space::Pbw);
        let mut um = SparseElement::zero(Space::Pbw);
        let top = a.hbar_degree().unwrap_or(0);
        for n in 0..=top {
            let layer: Pbw = a
                .terms()
                .iter()
                .map(|(k, c)| (k[0].clone(), c.coeff(n)))
                .filter(|(_, c)| !c.is_zero())
                .collect();
            let (i, u) = self.split_um_pbw(&layer);
            for (m, c) in i {
                ideal.add_term(vec![m], &HSeries::monomial(c, n));
            }
            for (m, c) in u {
                um.add_term(vec![m], &HSeries::monomial(c, n));
            }
        }
        Ok((ideal, um))
    }

    /// Slotwise product of two keys of equal length (every slot in U𝔤).
    pub fn mul_keys(&self, a: &Key, b: &Key) -> Vec<(Key, Q)> {
        let mut acc: Vec<(Key, Q)> = vec![(Vec::with_capacity(a.len()), Q::one())];
        for (ma, mb) in a.iter().zip(b.iter()) {
            let p = self.mul_mono(ma, mb);
            if p.len() == 1 {
                let (m, c) = p.iter().next().unwrap();
                for (k, x) in acc.iter_mut() {
                    k.push(m.clone());
                    if !c.is_one() {
                        *x *= c;
                    }
                }
                continue;
            }
            let mut next = Vec::with_capacity(acc.len() * p.len());
            for (k, x) in &acc {
                for (m, c) in p.iter() {
                    let mut nk = k.clone();
                    nk.push(m.clone());
                    next.push((nk, x * c));
                }
            }
            acc = next;
        }
        acc
    }

    /// Slotwise product of two elements with keys of equal length.
    pub fn slotwise(&self, a: &SparseElement, b: &SparseElement) -> Result<SparseElement> {
        a.same_space(b)?;
        let mut out = SparseElement::zero(a.space());
        for (ka, va) in a.terms() {
            for (kb, vb) in b.terms() {
                if ka.len() != kb.len() {
                    return Err(Error::SpaceMismatch {
                        expected: format!("{} slots", ka.len()),
                        got: format!("{} slots", kb.len()),
                    });
                }
                let c = va * vb;
                for (k, x) in self.mul_keys(ka, kb) {
                    out.add_term(k, &c.scale(&x));
                }
            }
        }
        self.check_degree(&out)?;
        Ok(out)
    }
}

fn expect(e: &SparseElement, s: Space) -> Result<()> {
    if e.space() != s {
        return Err(mismatch(s, e.space()));
    }
    Ok(())
}

/// Distinct orderings of a multiset given as a sorted monomial.
fn distinct_arrangements(s: &[Idx]) -> Vec<Mono> {
    fn go(rest: &mut Vec<(Idx, usize)>, cur: &mut Mono, n: usize, out: &mut Vec<Mono>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..rest.len() {
            if rest[i].1 == 0 {
                continue;
            }
            rest[i].1 -= 1;
            cur.push(rest[i].0);
            go(rest, cur, n, out);
            cur.pop();
            rest[i].1 += 1;
        }
    }
    let mut groups: Vec<(Idx, usize)> = Vec::new();
    for &x in s {
        match groups.last_mut() {
            Some((y, n)) if *y == x => *n += 1,
            _ => groups.push((x, 1)),
        }
    }
    let mut out = Vec::new();
    go(&mut groups, &mut Vec::new(), s.len(), &mut out);
    out
}

/// Filtration degree of an element of U𝔥: the largest PBW length.
pub fn uh_filtration_degree(v: &SparseElement) -> usize {
    v.terms().keys().map(|k| k[0].len()).max().unwrap_or(0)
}

/// Whether `(id − ηε)^{⊗n+1} ∘ Δ^{(n)}` annihilates `v`.
pub fn reduced_coproduct_vanishes(v: &SparseElement, n: usize) -> bool {
    let img = v.flat_map(Space::UgTensor, |k| {
        split_mono(&k[0], n + 1).into_iter().filter(|(s, _)| s.iter().all(|m| !m.is_empty())).collect()
    });
    img.is_zero()
}
