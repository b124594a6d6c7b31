//! Adjoint action of 𝔤 on the derived spaces and enumeration of bases of
//! finite slices, including their 𝔥-invariant subspaces.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::element::{sym_canon, wedge_canon, Key, Mono, SparseElement, Space};
use crate::error::{Error, Result};
use crate::hseries::Q;
use crate::lie::{Idx, LieData};
use crate::linalg::{kernel, SVec};
use crate::uea::Uea;

/// A finite slice of one of the graded spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceDescriptor {
    /// ∧^k𝔤 ⊗ S^l𝔥
    WedgeSym { k: usize, l: usize },
    /// ∧^k𝔤
    Wedge { k: usize },
    /// ∧^k𝔪
    WedgeM { k: usize },
    /// U𝔤 up to PBW degree `max_degree`
    Ug { max_degree: usize },
    /// U𝔤^{⊗arity} ⊗ U𝔥 with total PBW degree ≤ `max_total` and U𝔥 leg ≤ `max_uh`
    Adt { arity: usize, max_total: usize, max_uh: usize },
    /// U𝔤^{⊗arity} ⊗ S^l𝔥 with total U𝔤 degree ≤ `max_total`
    Formal { arity: usize, max_total: usize, l: usize },
}

impl SpaceDescriptor {
    pub fn space(&self) -> Space {
        match self {
            SpaceDescriptor::WedgeSym { .. } => Space::WedgeSym,
            SpaceDescriptor::Wedge { .. } | SpaceDescriptor::WedgeM { .. } => Space::Wedge,
            SpaceDescriptor::Ug { .. } => Space::Pbw,
            SpaceDescriptor::Adt { .. } => Space::Adt,
            SpaceDescriptor::Formal { .. } => Space::Formal,
        }
    }
}

/// All weakly increasing tuples of length `d` over `alphabet` (sorted).
pub fn sym_monos(alphabet: &[Idx], d: usize) -> Vec<Mono> {
    fn go(alpha: &[Idx], start: usize, d: usize, cur: &mut Mono, out: &mut Vec<Mono>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..alpha.len() {
            cur.push(alpha[i]);
            go(alpha, i, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(alphabet, 0, d, &mut Vec::new(), &mut out);
    out
}

/// All strictly increasing tuples of length `d` over `alphabet` (sorted).
pub fn wedge_monos(alphabet: &[Idx], d: usize) -> Vec<Mono> {
    fn go(alpha: &[Idx], start: usize, d: usize, cur: &mut Mono, out: &mut Vec<Mono>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..alpha.len() {
            cur.push(alpha[i]);
            go(alpha, i + 1, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(alphabet, 0, d, &mut Vec::new(), &mut out);
    out
}

/// Keys of `slots` PBW slots (over `alphabet`) with total degree exactly `total`.
fn slot_keys(alphabet: &[Idx], slots: usize, total: usize) -> Vec<Key> {
    if slots == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for d in 0..=total {
        let heads = sym_monos(alphabet, d);
        let tails = slot_keys(alphabet, slots - 1, total - d);
        for h in &heads {
            for t in &tails {
                let mut k = Vec::with_capacity(slots);
                k.push(h.clone());
                k.extend(t.iter().cloned());
                out.push(k);
            }
        }
    }
    out
}

/// Ordered basis of a slice with a reverse index.
#[derive(Clone, Debug)]
pub struct Basis {
    pub space: Space,
    pub keys: Vec<Key>,
    index: HashMap<Key, usize>,
}

impl Basis {
    pub fn new(space: Space, mut keys: Vec<Key>) -> Self {
        keys.sort();
        keys.dedup();
        let index = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Basis { space, keys, index }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn index(&self, k: &Key) -> Option<usize> {
        self.index.get(k).copied()
    }

    /// Coordinates of the ħ^n layer of an element; fails when a term lies
    /// outside the slice.
    pub fn coords(&self, e: &SparseElement, n: usize) -> Result<SVec> {
        let mut v = SVec::new();
        for (k, c) in e.terms() {
            let x = c.coeff(n);
            if x.is_zero() {
                continue;
            }
            let i = self.index(k).ok_or_else(|| Error::SpaceMismatch {
                expected: "a term inside the truncated slice".into(),
                got: format!("key {k:?}"),
            })?;
            v.insert(i, x);
        }
        Ok(v)
    }

    pub fn element(&self, v: &SVec) -> SparseElement {
        let mut e = SparseElement::zero(self.space);
        for (i, c) in v {
            e.add_rational(self.keys[*i].clone(), c);
        }
        e
    }
}

pub fn enumerate(lie: &LieData, desc: &SpaceDescriptor) -> Basis {
    let all: Vec<Idx> = (0..lie.dim() as Idx).collect();
    let h = lie.h_indices();
    let keys = match *desc {
        SpaceDescriptor::WedgeSym { k, l } => {
            let ws = wedge_monos(&all, k);
            let ss = sym_monos(h, l);
            ws.iter().flat_map(|w| ss.iter().map(move |s| vec![w.clone(), s.clone()])).collect()
        }
        SpaceDescriptor::Wedge { k } => wedge_monos(&all, k).into_iter().map(|w| vec![w]).collect(),
        SpaceDescriptor::WedgeM { k } => wedge_monos(lie.m_indices(), k).into_iter().map(|w| vec![w]).collect(),
        SpaceDescriptor::Ug { max_degree } => {
            (0..=max_degree).flat_map(|d| sym_monos(&all, d)).map(|m| vec![m]).collect()
        }
        SpaceDescriptor::Adt { arity, max_total, max_uh } => {
            let mut out = Vec::new();
            for t in 0..=max_total {
                for u in 0..=max_uh.min(t) {
                    let heads = slot_keys(&all, arity, t - u);
                    for leg in sym_monos(h, u) {
                        for hd in &heads {
                            let mut k = hd.clone();
                            k.push(leg.clone());
                            out.push(k);
                        }
                    }
                }
            }
            out
        }
        SpaceDescriptor::Formal { arity, max_total, l } => {
            let mut out = Vec::new();
            for t in 0..=max_total {
                let heads = slot_keys(&all, arity, t);
                for leg in sym_monos(h, l) {
                    for hd in &heads {
                        let mut k = hd.clone();
                        k.push(leg.clone());
                        out.push(k);
                    }
                }
            }
            out
        }
    };
    Basis::new(desc.space(), keys)
}

fn derivation_on_sym(lie: &LieData, x: Idx, m: &[Idx]) -> Vec<(Mono, Q)> {
    let mut out = Vec::new();
    for i in 0..m.len() {
        if i > 0 && m[i] == m[i - 1] {
            // equal letters: fold multiplicity below
            continue;
        }
        let mult = m.iter().filter(|&&y| y == m[i]).count();
        for (l, c) in lie.bracket(x, m[i]) {
            let mut w = m.to_vec();
            w[i] = *l;
            out.push((sym_canon(&w), c * Q::from_integer((mult as i64).into())));
        }
    }
    out
}

fn derivation_on_wedge(lie: &LieData, x: Idx, m: &[Idx]) -> Vec<(Mono, Q)> {
    let mut out = Vec::new();
    for i in 0..m.len() {
        for (l, c) in lie.bracket(x, m[i]) {
            let mut w = m.to_vec();
            w[i] = *l;
            if let Some((odd, w)) = wedge_canon(&w) {
                out.push((w, if odd { -c } else { c.clone() }));
            }
        }
    }
    out
}

/// Image of a single key under ad(x).
pub fn ad_key(u: &Uea, space: Space, x: Idx, k: &Key) -> Result<Vec<(Key, Q)>> {
    let lie: &LieData = u;
    let mut out = Vec::new();
    let replace = |slot: usize, parts: Vec<(Mono, Q)>, out: &mut Vec<(Key, Q)>| {
        for (m, c) in parts {
            let mut nk = k.clone();
            nk[slot] = m;
            out.push((nk, c));
        }
    };
    match space {
        Space::WedgeSym => {
            replace(0, derivation_on_wedge(lie, x, &k[0]), &mut out);
            replace(1, derivation_on_sym(lie, x, &k[1]), &mut out);
        }
        Space::Wedge => replace(0, derivation_on_wedge(lie, x, &k[0]), &mut out),
        Space::Sym => replace(0, derivation_on_sym(lie, x, &k[0]), &mut out),
        Space::Tensor => {
            for i in 0..k[0].len() {
                for (l, c) in lie.bracket(x, k[0][i]) {
                    let mut w = k[0].clone();
                    w[i] = *l;
                    out.push((vec![w], c.clone()));
                }
            }
        }
        Space::Pbw | Space::Adt | Space::UgTensor => {
            for s in 0..k.len() {
                replace(s, u.ad_mono(x, &k[s]).into_iter().collect(), &mut out);
            }
        }
        Space::Formal => {
            let last = k.len() - 1;
            for s in 0..last {
                replace(s, u.ad_mono(x, &k[s]).into_iter().collect(), &mut out);
            }
            replace(last, derivation_on_sym(lie, x, &k[last]), &mut out);
        }
    }
    Ok(out)
}

/// x·elt for a basis vector x, extended as a derivation on products and
/// diagonally on tensor factors.
pub fn ad_action(u: &Uea, x: Idx, elt: &SparseElement) -> Result<SparseElement> {
    if x as usize >= u.dim() {
        return Err(Error::SpaceMismatch {
            expected: format!("a basis index below {}", u.dim()),
            got: x.to_string(),
        });
    }
    let mut out = SparseElement::zero(elt.space());
    for (k, c) in elt.terms() {
        for (nk, f) in ad_key(u, elt.space(), x, k)? {
            out.add_term(nk, &c.scale(&f));
        }
    }
    Ok(out)
}

/// Whether every 𝔥 basis vector annihilates `elt`.
pub fn is_invariant(u: &Uea, elt: &SparseElement) -> Result<bool> {
    for &x in u.h_indices() {
        if !ad_action(u, x, elt)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn require_invariant(u: &Uea, elt: &SparseElement, what: &str) -> Result<()> {
    if !is_invariant(u, elt)? {
        return Err(Error::NotInvariant(what.to_string()));
    }
    Ok(())
}

fn key_weight_is_zero(w: &[Vec<Q>], nh: usize, k: &Key) -> bool {
    (0..nh).all(|a| {
        let mut s = Q::zero();
        for m in k {
            for &x in m {
                s += &w[x as usize][a];
            }
        }
        s.is_zero()
    })
}

/// Invariant subspace of a basis, as canonical reduced-echelon vectors in
/// its coordinates.
pub fn invariant_coords(u: &Uea, basis: &Basis) -> Result<Vec<SVec>> {
    let nh = u.h_indices().len();
    if let Some(w) = u.weights() {
        return Ok(basis
            .keys
            .iter()
            .enumerate()
            .filter(|(_, k)| key_weight_is_zero(w, nh, k))
            .map(|(i, _)| [(i, Q::one())].into())
            .collect());
    }
    let n = basis.len();
    let mut cols = Vec::with_capacity(n);
    for k in &basis.keys {
        let mut col = SVec::new();
        for (a, &x) in u.h_indices().iter().enumerate() {
            for (nk, c) in ad_key(u, basis.space, x, k)? {
                let i = basis.index(&nk).ok_or_else(|| Error::SpaceMismatch {
                    expected: "a slice stable under the adjoint action".into(),
                    got: format!("key {nk:?}"),
                })?;
                let e = col.entry(a * n + i).or_insert_with(Q::zero);
                *e += c;
                if e.is_zero() {
                    col.remove(&(a * n + i));
                }
            }
        }
        cols.push(col);
    }
    Ok(kernel(&cols))
}

/// Deterministic basis of the 𝔥-invariants of a slice.
pub fn invariant_basis(u: &Uea, desc: &SpaceDescriptor) -> Result<Vec<SparseElement>> {
    let basis = enumerate(u, desc);
    Ok(invariant_coords(u, &basis)?.iter().map(|v| basis.element(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::{multiply, Product};
    use crate::hseries::q;
    use crate::uea::tests::sl2_uea;
    use proptest::prelude::*;

    fn ws(w: &[Idx], s: &[Idx], c: i64) -> SparseElement {
        SparseElement::rational_term(Space::WedgeSym, vec![w.to_vec(), s.to_vec()], q(c))
    }

    #[test]
    fn ad_h_kills_e_wedge_f() {
        let u = sl2_uea();
        assert!(ad_action(&u, 1, &ws(&[0, 2], &[], 1)).unwrap().is_zero());
        for x in 0..3 {
            assert!(ad_action(&u, x, &ws(&[], &[], 1)).unwrap().is_zero());
            assert!(ad_action(&u, x, &SparseElement::unit(Space::Adt, 3)).unwrap().is_zero());
        }
    }

    #[test]
    fn sl2_invariants() {
        let u = sl2_uea();
        let b = invariant_basis(&u, &SpaceDescriptor::Wedge { k: 2 }).unwrap();
        assert_eq!(b, vec![SparseElement::rational_term(Space::Wedge, vec![vec![0, 2]], q(1))]);
        let b = invariant_basis(&u, &SpaceDescriptor::Wedge { k: 1 }).unwrap();
        assert_eq!(b, vec![SparseElement::rational_term(Space::Wedge, vec![vec![1]], q(1))]);
    }

    #[test]
    fn trivial_h_keeps_everything() {
        let l = LieData::new(vec!["a".into(), "b".into()], &[], &[], crate::lie::Mode::Reductive).unwrap();
        let u = Uea::new(std::sync::Arc::new(l), 4);
        let d = SpaceDescriptor::Adt { arity: 2, max_total: 2, max_uh: 0 };
        assert_eq!(invariant_basis(&u, &d).unwrap().len(), enumerate(&u, &d).len());
    }

    #[test]
    fn generic_path_agrees_with_weights() {
        // the kernel computation must give the same basis as the weight shortcut
        let u = sl2_uea();
        for d in [
            SpaceDescriptor::WedgeSym { k: 2, l: 1 },
            SpaceDescriptor::Adt { arity: 2, max_total: 2, max_uh: 1 },
        ] {
            let basis = enumerate(&u, &d);
            let fast = invariant_coords(&u, &basis).unwrap();
            let mut cols = Vec::new();
            let n = basis.len();
            for k in &basis.keys {
                let mut col = SVec::new();
                for (nk, c) in ad_key(&u, basis.space, 1, k).unwrap() {
                    let i = basis.index(&nk).unwrap();
                    *col.entry(i).or_insert_with(Q::zero) += c;
                }
                col.retain(|_, c| !c.is_zero());
                cols.push(col);
            }
            assert_eq!(kernel(&cols), fast, "{d:?} ({n})");
            for v in &fast {
                assert!(is_invariant(&u, &basis.element(v)).unwrap());
            }
        }
    }

    fn arb_ws() -> impl Strategy<Value = SparseElement> {
        prop::collection::vec(
            (prop::collection::btree_set(0..3u8, 0..3), prop::collection::vec(Just(1u8), 0..2), -3i64..4),
            0..4,
        )
        .prop_map(|ts| {
            let mut e = SparseElement::zero(Space::WedgeSym);
            for (w, s, c) in ts {
                e.add_rational(vec![w.into_iter().collect(), s], &q(c));
            }
            e
        })
    }

    proptest! {
        #[test]
        fn leibniz_for_wedge(a in arb_ws(), b in arb_ws(), x in 0..3u8) {
            let u = sl2_uea();
            let lhs = ad_action(&u, x, &multiply(&a, &b, Product::Wedge).unwrap()).unwrap();
            let r1 = multiply(&ad_action(&u, x, &a).unwrap(), &b, Product::Wedge).unwrap();
            let r2 = multiply(&a, &ad_action(&u, x, &b).unwrap(), Product::Wedge).unwrap();
            prop_assert_eq!(lhs, r1.add(&r2).unwrap());
        }
    }
}
