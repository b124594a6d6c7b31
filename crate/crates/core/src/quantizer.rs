//! From formal classical dynamical r-matrices to dynamical twists.
//!
//! The solver works on the algebraic side: K = 1 + Σ ħⁿKₙ with Kₙ an
//! invariant element of U𝔤⊗U𝔤⊗U𝔥 of leg filtration ≤ n−1. At each order
//! the top filtration part of Kₙ is pinned to the symmetrized r-matrix and
//! the rest is found by a linear solve for `b`. The formal twist J lives in
//! `Space::Formal` with keys `[u₁, u₂, s]`, `s` a monomial of S𝔥.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adt::{
    adte_residual, differential_b, invariant_cocycles, invariant_slice, kappa_solve, kappa_solve_affine, m_element, with_prec,
};
use crate::cdyb::mc_residual;
use crate::element::{mismatch, sym_canon, Key, Mono, SparseElement, Space};
use crate::error::{Error, Result};
use crate::hseries::{factorial, HSeries, Q};
use crate::invariant::require_invariant;
use crate::lie::Idx;
use crate::uea::{pbw_add, Pbw, Uea};

/// A formal classical dynamical r-matrix, truncated at S𝔥-degree `truncation`.
#[derive(Clone, Debug, PartialEq)]
pub struct RMatrix {
    body: SparseElement,
    truncation: usize,
}

impl RMatrix {
    pub fn new(u: &Uea, body: SparseElement, truncation: usize) -> Result<Self> {
        if body.space() != Space::WedgeSym {
            return Err(mismatch(Space::WedgeSym, body.space()));
        }
        for k in body.terms().keys() {
            if k[0].len() != 2 {
                return Err(Error::SpaceMismatch {
                    expected: "exterior degree 2".into(),
                    got: format!("exterior degree {}", k[0].len()),
                });
            }
            if k[1].len() > truncation {
                return Err(Error::Schema {
                    line: 0,
                    msg: format!("S(h)-degree {} exceeds the truncation {truncation}", k[1].len()),
                });
            }
            if let Some(&x) = k[1].iter().find(|&&x| !u.is_h(x)) {
                return Err(Error::Schema { line: 0, msg: format!("{} is not in h", u.name(x)) });
            }
        }
        require_invariant(u, &body, "r-matrix")?;
        Ok(RMatrix { body, truncation })
    }

    pub fn body(&self) -> &SparseElement {
        &self.body
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// dρ + ½[ρ,ρ] split into the part that the truncation determines
    /// (S𝔥-degree < D) and the tail that it does not.
    pub fn cdybe_split(&self, u: &Uea) -> Result<(SparseElement, SparseElement)> {
        let r = mc_residual(u, &self.body)?;
        let d = self.truncation;
        Ok((r.filter(|k| k[1].len() < d), r.filter(|k| k[1].len() >= d)))
    }

    /// The ħ⁰ layer of an ħ-dependent family.
    pub fn classical_limit(&self) -> SparseElement {
        self.body.hbar_layer(0)
    }
}

/// α = ħρ(ħλ) modulo ħ^{n+1}: the S𝔥-degree-d part picks up ħ^{d+1}.
pub fn taylor_rescale(u: &Uea, rho: &RMatrix, n: usize) -> Result<SparseElement> {
    let mut a = SparseElement::zero(Space::WedgeSym);
    for (k, c) in rho.body.terms() {
        a.add_term(k.clone(), &c.shift(k[1].len() + 1));
    }
    let a = a.truncate(n);
    let r = mc_residual(u, &with_prec(&a, n))?.truncate(n);
    if !r.is_zero() {
        return Err(Error::NotMaurerCartan(format!("residual modulo hbar^{} has {} terms", n + 1, r.len())));
    }
    Ok(a)
}

/// (alt ⊗ sym): x∧y ⊗ s ↦ ½(x⊗y − y⊗x) ⊗ sym(s).
pub fn alt_sym(u: &Uea, x: &SparseElement) -> Result<SparseElement> {
    if x.space() != Space::WedgeSym {
        return Err(mismatch(Space::WedgeSym, x.space()));
    }
    let half = Q::new(1.into(), 2.into());
    let mut out = SparseElement::zero(Space::Adt);
    for (k, c) in x.terms() {
        let (a, b) = (k[0][0], k[0][1]);
        for (leg, y) in u.sym_mono(&k[1]).iter() {
            let w = c.scale(&(y * &half));
            out.add_term(vec![vec![a], vec![b], leg.clone()], &w);
            out.add_term(vec![vec![b], vec![a], leg.clone()], &-&w);
        }
    }
    Ok(out)
}

/// A solved twist in both forms.
#[derive(Clone, Debug)]
pub struct TwistPair {
    pub k: SparseElement,
    pub j: SparseElement,
    /// leg filtration of Kₙ for n = 1..=N
    pub certificate: Vec<usize>,
    /// orders at which the greedy solve needed repair
    pub repaired: Vec<usize>,
}

fn total_degree(k: &Key) -> usize {
    k.iter().map(|m| m.len()).sum()
}

fn assemble(orders: &[SparseElement]) -> SparseElement {
    let mut k = m_element();
    for (n, x) in orders.iter().enumerate().skip(1) {
        k.add_assign(&x.shift_hbar(n)).expect("adt elements");
    }
    k
}

/// Solver settings.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub order: usize,
    pub repair_depth: usize,
    pub choices: Choices,
}

impl SolveOptions {
    pub fn new(order: usize) -> Self {
        SolveOptions { order, repair_depth: 2, choices: Choices::Canonical }
    }
}

/// How the particular solution at each order is picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Choices {
    /// The minimal-support solution of the linear solve.
    Canonical,
    /// A seeded point of the gauge orbit of the canonical choice: every
    /// order moves by a random coboundary b(yₙ) and the later corrections
    /// keep their class in the canonical frame. Seeds give different but
    /// gauge-equivalent twists.
    Regauged(u64),
    /// Add a seeded coboundary b(yₙ) to Kₙ and solve later orders
    /// canonically from there. The later corrections can change class, so
    /// runs are in general not gauge-equivalent.
    Coboundary(u64),
}

/// Order-by-order solver state: `orders[n]` is the ħ-free Kₙ.
struct Solver<'a> {
    u: &'a Uea,
    pinned: Vec<SparseElement>,
    depth: usize,
    perturb: Option<u64>,
}

/// Seeded invariant arity-1 y of leg ≤ n−2 and PBW degree ≤ min(hi, n).
fn random_gauge_term(u: &Uea, seed: u64, n: usize, hi: usize) -> Result<SparseElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(n as u64));
    let (basis, inv) = invariant_slice(u, 1, 0, hi.min(n), n - 2)?;
    let mut y = SparseElement::zero(Space::Adt);
    for v in &inv {
        let c: i64 = rng.gen_range(-2..=2);
        y.add_assign(&basis.element(v).scale(&Q::from_integer(c.into())))?;
    }
    Ok(y)
}

impl Solver<'_> {
    /// Order-n residual with Kₙ set to its pinned part.
    fn rhs(&self, orders: &[SparseElement], n: usize) -> Result<SparseElement> {
        let mut trial = orders[..n].to_vec();
        trial.push(self.pinned[n].clone());
        Ok(adte_residual(self.u, &assemble(&trial), n)?.hbar_layer(n))
    }

    fn step(&self, orders: &[SparseElement], n: usize) -> Result<SparseElement> {
        let z = self.rhs(orders, n)?;
        let c = if n < 2 {
            if !z.is_zero() {
                return Err(Error::NoSolution(format!("order {n} residual has {} terms", z.len())));
            }
            SparseElement::zero(Space::Adt)
        } else {
            kappa_solve(self.u, &z, n - 2)?
        };
        let kn = self.pinned[n].add(&c)?;
        match self.perturb {
            Some(seed) if n >= 2 => kn.add(&self.random_cocycle(seed, n, &kn)?),
            _ => Ok(kn),
        }
    }

    fn random_cocycle(&self, seed: u64, n: usize, kn: &SparseElement) -> Result<SparseElement> {
        // low-degree y keeps later slices small
        let hi = kn.terms().keys().map(total_degree).max().unwrap_or(2);
        differential_b(self.u, &random_gauge_term(self.u, seed, n, hi)?)
    }

    /// Greedily fill orders `orders.len()..=to`.
    fn greedy(&self, orders: &mut Vec<SparseElement>, to: usize) -> Result<()> {
        while orders.len() <= to {
            let x = self.step(orders, orders.len())?;
            orders.push(x);
        }
        Ok(())
    }

    /// Re-open order m = n−k by cocycles, k = 1..=depth, treating the
    /// order-n right-hand side as affine in their coefficients.
    fn repair(&self, orders: &mut Vec<SparseElement>, n: usize, stuck: &Error) -> Result<()> {
        let z0 = self.rhs(orders, n)?;
        let hi = z0.terms().keys().map(total_degree).max().unwrap_or(0);
        for k in 1..=self.depth.min(n.saturating_sub(2)) {
            let m = n - k;
            let cocycles = invariant_cocycles(self.u, 2, 0, hi, m - 2)?;
            let mut dirs = Vec::new();
            let mut extras = Vec::new();
            for zc in &cocycles {
                let mut o = orders[..m].to_vec();
                o.push(orders[m].add(zc)?);
                if self.greedy(&mut o, n - 1).is_err() {
                    continue;
                }
                extras.push(self.rhs(&o, n)?.sub(&z0)?);
                dirs.push(zc);
            }
            let Ok((_, cs)) = kappa_solve_affine(self.u, &z0, &extras, n - 2) else {
                continue;
            };
            let mut o = orders[..m].to_vec();
            let mut km = orders[m].clone();
            for (c, zc) in cs.iter().zip(&dirs) {
                km.add_assign(&zc.scale(c))?;
            }
            o.push(km);
            if self.greedy(&mut o, n).is_ok() {
                *orders = o;
                return Ok(());
            }
        }
        Err(Error::ObstructionNotRepaired { order: n, depth: self.depth, detail: format!("{stuck}; class with {} terms", z0.len()) })
    }
}

/// Solve ADTE to order `n` with semiclassical pinning to ρ.
pub fn solve_adte(u: &Uea, rho: &RMatrix, opts: &SolveOptions) -> Result<TwistPair> {
    let (n, repair_depth) = (opts.order, opts.repair_depth);
    let (determined, _) = rho.cdybe_split(u)?;
    if !determined.is_zero() {
        return Err(Error::NotMaurerCartan(format!(
            "CDYBE residual has {} terms below the truncation degree",
            determined.len()
        )));
    }
    let rho0 = rho.classical_limit();
    let mut pinned = vec![m_element()];
    for d in 0..n {
        pinned.push(alt_sym(u, &rho0.filter(|k| k[1].len() == d))?);
    }
    let perturb = match opts.choices {
        Choices::Coboundary(seed) => Some(seed),
        _ => None,
    };
    let solver = Solver { u, pinned, depth: repair_depth, perturb };
    let mut orders = vec![m_element()];
    let mut repaired = Vec::new();
    for order in 1..=n {
        match solver.step(&orders, order) {
            Ok(x) => orders.push(x),
            Err(e @ Error::NoSolution(_)) => {
                solver.repair(&mut orders, order, &e)?;
                repaired.push(order);
            }
            Err(e) => return Err(e),
        }
    }
    let mut k = assemble(&orders).truncate(n);
    if let Choices::Regauged(seed) = opts.choices {
        let mut g = SparseElement::unit(Space::Adt, 2);
        for m in 2..=n {
            let hi = orders[m].terms().keys().map(total_degree).max().unwrap_or(2);
            let y = random_gauge_term(u, seed, m, hi)?;
            g = u.slotwise(&with_prec(&g, n), &with_prec(&SparseElement::unit(Space::Adt, 2).add(&y.shift_hbar(m))?, n))?.truncate(n);
        }
        k = crate::gauge::gauge_act_algebraic(u, &g, &k, n)?;
    }
    let certificate = valuation_certificate(&k, n)?;
    if !adte_residual(u, &k, n)?.is_zero() {
        return Err(Error::ObstructionNotRepaired {
            order: n,
            depth: repair_depth,
            detail: "recomputed residual is nonzero".into(),
        });
    }
    let j = k_to_j(u, &k, n)?;
    Ok(TwistPair { k, j, certificate, repaired })
}

/// Leg filtration of each Kₙ, checked against n−1.
pub fn valuation_certificate(k: &SparseElement, n: usize) -> Result<Vec<usize>> {
    (1..=n)
        .map(|i| {
            let f = k.hbar_layer(i).uh_filtration();
            if !k.hbar_layer(i).is_zero() && f + 1 > i {
                return Err(Error::ValuationViolated(format!("K_{i} has filtration {f}")));
            }
            Ok(f)
        })
        .collect()
}

/// J from K: Kₙ = Σ_{m+d=n} sym(J_{m,d}), solved by sym⁻¹ on the leg.
pub fn k_to_j(u: &Uea, k: &SparseElement, n: usize) -> Result<SparseElement> {
    if k.space() != Space::Adt {
        return Err(mismatch(Space::Adt, k.space()));
    }
    valuation_certificate(k, n)?;
    let mut out = SparseElement::zero(Space::Formal);
    for layer in 0..=n {
        let mut legs: BTreeMap<Key, Pbw> = BTreeMap::new();
        for (key, c) in k.terms() {
            let x = c.coeff(layer);
            if !x.is_zero() {
                let (slots, leg) = key.split_at(key.len() - 1);
                pbw_add(legs.entry(slots.to_vec()).or_default(), &leg[0], &x);
            }
        }
        for (slots, leg) in legs {
            for (s, x) in u.sym_inv_pbw(&leg) {
                if s.len() > layer {
                    return Err(Error::ValuationViolated(format!("order {layer} has S(h)-degree {}", s.len())));
                }
                let mut nk = slots.clone();
                nk.push(s.clone());
                out.add_term(nk, &HSeries::monomial(x, layer - s.len()));
            }
        }
    }
    Ok(out)
}

/// K = (id ⊗ sym)(J(ħλ)) modulo ħ^{n+1}.
pub fn j_to_k(u: &Uea, j: &SparseElement, n: usize) -> Result<SparseElement> {
    if j.space() != Space::Formal {
        return Err(mismatch(Space::Formal, j.space()));
    }
    let mut out = SparseElement::zero(Space::Adt);
    for (key, c) in j.terms() {
        let (slots, s) = key.split_at(key.len() - 1);
        let c = c.shift(s[0].len()).truncate(n);
        if c.is_zero() {
            continue;
        }
        for (leg, x) in u.sym_mono(&s[0]).iter() {
            let mut nk = slots.to_vec();
            nk.push(leg.clone());
            out.add_term(nk, &c.scale(x));
        }
    }
    Ok(out.truncate(n))
}

/// s ⋆ t as (monomial, coefficient, power of ħ).
fn star_mono(u: &Uea, s: &[Idx], t: &[Idx]) -> Vec<(Mono, Q, usize)> {
    let prod = u.mul_pbw(&u.sym_mono(s), &u.sym_mono(t));
    let deg = s.len() + t.len();
    u.sym_inv_pbw(&prod).into_iter().map(|(r, c)| {
        let p = deg - r.len();
        (r, c, p)
    }).collect()
}

/// The PBW star product on S𝔥[[ħ]] modulo ħ^{n+1}.
pub fn pbw_star(u: &Uea, f: &SparseElement, g: &SparseElement, n: usize) -> Result<SparseElement> {
    for e in [f, g] {
        if e.space() != Space::Sym {
            return Err(mismatch(Space::Sym, e.space()));
        }
    }
    let mut out = SparseElement::zero(Space::Sym);
    for (ka, a) in f.terms() {
        for (kb, b) in g.terms() {
            let ab = (a * b).with_prec(n);
            for (r, c, p) in star_mono(u, &ka[0], &kb[0]) {
                out.add_term(vec![r], &ab.shift(p).scale(&c));
            }
        }
    }
    Ok(out.truncate(n))
}

/// Product on U𝔤^{⊗k} ⊗ S𝔥[[ħ]]: slotwise in U𝔤, star on the last slot.
pub fn formal_product(u: &Uea, a: &SparseElement, b: &SparseElement, n: usize) -> Result<SparseElement> {
    for e in [a, b] {
        if e.space() != Space::Formal {
            return Err(mismatch(Space::Formal, e.space()));
        }
    }
    let mut out = SparseElement::zero(Space::Formal);
    let mut stars: BTreeMap<(Mono, Mono), Vec<(Mono, Q, usize)>> = BTreeMap::new();
    for (ka, va) in a.terms() {
        for (kb, vb) in b.terms() {
            if ka.len() != kb.len() {
                return Err(Error::SpaceMismatch {
                    expected: format!("{} slots", ka.len()),
                    got: format!("{} slots", kb.len()),
                });
            }
            let c = (va * vb).with_prec(n);
            let l = ka.len() - 1;
            let st = stars
                .entry((ka[l].clone(), kb[l].clone()))
                .or_insert_with(|| star_mono(u, &ka[l], &kb[l]));
            for (k, x) in u.mul_keys(&ka[..l].to_vec(), &kb[..l].to_vec()) {
                for (r, y, p) in st.iter() {
                    let mut nk = k.clone();
                    nk.push(r.clone());
                    out.add_term(nk, &c.shift(*p).scale(&(&x * y)));
                }
            }
        }
    }
    let out = out.truncate(n);
    u.check_degree(&out)?;
    Ok(out)
}

/// ∂/∂λ^i on the S𝔥 slot.
fn derivative(e: &SparseElement, i: Idx) -> SparseElement {
    e.flat_map(Space::Formal, |k| {
        let s = k.last().unwrap();
        let mult = s.iter().filter(|&&x| x == i).count();
        if mult == 0 {
            return vec![];
        }
        let mut nk = k.clone();
        let last = nk.last_mut().unwrap();
        let p = last.iter().position(|&x| x == i).unwrap();
        last.remove(p);
        vec![(nk, Q::from_integer((mult as i64).into()))]
    })
}

/// Insert a U𝔤 slot before the S𝔥 slot.
fn with_third_slot(e: &SparseElement, slot: &Pbw, weight: &HSeries, out: &mut SparseElement) {
    for (k, c) in e.terms() {
        let (slots, s) = k.split_at(k.len() - 1);
        for (m, x) in slot {
            let mut nk = slots.to_vec();
            nk.push(m.clone());
            nk.push(s[0].clone());
            out.add_term(nk, &(c * weight).scale(x));
        }
    }
}

/// J^{12}(λ + ħh³) by the Taylor sum over ordered index tuples.
fn shift_taylor(u: &Uea, j: &SparseElement, n: usize) -> SparseElement {
    let mut out = SparseElement::zero(Space::Formal);
    let one: Pbw = [(Vec::new(), Q::one())].into();
    with_third_slot(j, &one, &HSeries::one(), &mut out);
    let mut level: Vec<(Mono, SparseElement)> = vec![(Vec::new(), j.clone())];
    for k in 1..=n {
        let mut next = Vec::new();
        for (word, d) in &level {
            for &i in u.h_indices() {
                let di = derivative(d, i);
                if di.is_zero() {
                    continue;
                }
                let mut w = word.clone();
                w.push(i);
                let weight = HSeries::monomial(factorial(k).recip(), k);
                with_third_slot(&di, &u.word_product(&w), &weight, &mut out);
                next.push((w, di));
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    out.truncate(n)
}

/// (id ⊗ id ⊗ Δ̃)(J) with Δ̃ the symmetrized extension of x ↦ ħx⊗1 + 1⊗x.
fn shift_coproduct(u: &Uea, j: &SparseElement, n: usize) -> SparseElement {
    let mut memo: BTreeMap<Mono, Vec<(Pbw, Mono, usize, Q)>> = BTreeMap::new();
    let mut out = SparseElement::zero(Space::Formal);
    for (k, c) in j.terms() {
        let (slots, s) = k.split_at(k.len() - 1);
        let parts = memo.entry(s[0].clone()).or_insert_with(|| shift_parts(u, &s[0]));
        for (slot, rest, p, w) in parts.iter() {
            for (m, x) in slot {
                let mut nk = slots.to_vec();
                nk.push(m.clone());
                nk.push(rest.clone());
                out.add_term(nk, &c.shift(*p).scale(&(x * w)));
            }
        }
    }
    out.truncate(n)
}

/// Average over orderings of s of Π(ħx⊗1 + 1⊗x), as (U𝔤 part, S𝔥 part,
/// ħ power, weight).
fn shift_parts(u: &Uea, s: &[Idx]) -> Vec<(Pbw, Mono, usize, Q)> {
    let k = s.len();
    let mut words: Vec<Mono> = Vec::new();
    permute(s.to_vec(), 0, &mut words);
    let w = Q::from_integer((words.len() as i64).into()).recip();
    let mut out = Vec::new();
    for word in &words {
        for mask in 0u32..(1 << k) {
            let left: Mono = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| word[i]).collect();
            let right: Mono = (0..k).filter(|i| mask >> i & 1 == 0).map(|i| word[i]).collect();
            let p = left.len();
            out.push((u.word_product(&left), sym_canon(&right), p, w.clone()));
        }
    }
    out
}

fn permute(mut s: Mono, i: usize, out: &mut Vec<Mono>) {
    if i == s.len() {
        out.push(s);
        return;
    }
    for j in i..s.len() {
        s.swap(i, j);
        permute(s.clone(), i + 1, out);
        s.swap(i, j);
    }
}

/// J^{1,2}(λ + ħh³) modulo ħ^{n+1}. Both the Taylor sum and the Δ̃ form
/// are computed; a disagreement is an error.
pub fn shift_argument(u: &Uea, j: &SparseElement, n: usize) -> Result<SparseElement> {
    if j.space() != Space::Formal {
        return Err(mismatch(Space::Formal, j.space()));
    }
    let a = shift_taylor(u, j, n);
    let b = shift_coproduct(u, j, n);
    if a != b {
        return Err(Error::ContractFailure("Taylor and coproduct forms of the shift differ".into()));
    }
    u.check_degree(&a)?;
    Ok(a)
}

/// Split a U𝔤 slot by Δ.
fn formal_dup(j: &SparseElement, i: usize) -> SparseElement {
    crate::adt::dup(j, i)
}

/// 1 ⊗ J.
fn formal_pad(j: &SparseElement) -> SparseElement {
    j.flat_map(Space::Formal, |k| {
        let mut nk = vec![Vec::new()];
        nk.extend(k.iter().cloned());
        vec![(nk, Q::one())]
    })
}

/// Keep ħ^m λ^s with m + |s| ≤ n, the part of a formal element that a
/// K truncated at ħⁿ determines. Products, the star product and the shift
/// all preserve this weight.
pub fn weight_truncate(e: &SparseElement, n: usize) -> SparseElement {
    let mut out = SparseElement::zero(e.space());
    for (k, c) in e.terms() {
        let d = k.last().map_or(0, |s| s.len());
        if d <= n {
            out.add_term(k.clone(), &HSeries::new(c.coeffs().iter().take(n - d + 1).cloned().collect(), None));
        }
    }
    out
}

/// J^{12,3} ⋆ J^{12}(λ+ħh³) − J^{1,23} ⋆ J^{23} in weight ≤ n.
pub fn dte_residual(u: &Uea, j: &SparseElement, n: usize) -> Result<SparseElement> {
    let j = &weight_truncate(j, n);
    if j.space() != Space::Formal || j.arity() != Some(2) {
        return Err(Error::SpaceMismatch { expected: "a two-slot formal twist".into(), got: format!("{:?}", j.arity()) });
    }
    let lhs = formal_product(u, &formal_dup(j, 0), &shift_argument(u, j, n)?, n)?;
    let rhs = formal_product(u, &formal_dup(j, 1), &formal_pad(j), n)?;
    Ok(weight_truncate(&lhs.sub(&rhs)?, n))
}

/// (J − J²¹)/ħ mod ħ against ρ read as a tensor through x∧y ↦ x⊗y − y⊗x,
/// on S𝔥-degrees ≤ `degree`. Returns the flag and the difference.
pub fn semiclassical_check(j: &SparseElement, rho: &RMatrix, degree: usize) -> Result<(bool, SparseElement)> {
    if j.space() != Space::Formal {
        return Err(mismatch(Space::Formal, j.space()));
    }
    let first = j.hbar_layer(1).filter(|k| k.len() == 3 && k[2].len() <= degree);
    let swapped = first.flat_map(Space::Formal, |k| vec![(vec![k[1].clone(), k[0].clone(), k[2].clone()], Q::one())]);
    let lhs = first.sub(&swapped)?;
    let mut r = SparseElement::zero(Space::Formal);
    for (k, c) in rho.classical_limit().terms() {
        if k[1].len() > degree {
            continue;
        }
        let (a, b) = (k[0][0], k[0][1]);
        r.add_term(vec![vec![a], vec![b], k[1].clone()], c);
        r.add_term(vec![vec![b], vec![a], k[1].clone()], &-c);
    }
    let diff = lhs.sub(&r)?;
    Ok((diff.is_zero(), diff))
}

/// Taylor coefficients of 1/(1−λ) times e∧f, S𝔥-degree ≤ d (h = index 1).
#[cfg(test)]
pub(crate) fn sl2_rho(u: &Uea, d: usize) -> RMatrix {
    let mut body = SparseElement::zero(Space::WedgeSym);
    for k in 0..=d {
        body.add_rational(vec![vec![0, 2], vec![1; k]], &Q::one());
    }
    RMatrix::new(u, body, d).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hseries::q;
    use crate::lie::{LieData, Mode};
    use crate::uea::tests::sl2_uea;
    use std::sync::Arc;

    fn abelian2() -> Uea {
        let l = LieData::new(vec!["a".into(), "b".into()], &[], &[], Mode::Reductive).unwrap();
        Uea::new(Arc::new(l), 8)
    }

    fn formal(terms: &[(&[&[Idx]], i64, usize)]) -> SparseElement {
        let mut e = SparseElement::zero(Space::Formal);
        for (k, c, p) in terms {
            e.add_term(k.iter().map(|m| m.to_vec()).collect(), &HSeries::monomial(q(*c), *p));
        }
        e
    }

    #[test]
    fn rescale_examples() {
        let u = sl2_uea();
        let zero = RMatrix::new(&u, SparseElement::zero(Space::WedgeSym), 0).unwrap();
        assert!(taylor_rescale(&u, &zero, 3).unwrap().is_zero());
        let rho = sl2_rho(&u, 3);
        let a = taylor_rescale(&u, &rho, 3).unwrap();
        assert_eq!(a.coeff(&[vec![0, 2], vec![]]), HSeries::monomial(q(1), 1));
        assert_eq!(a.coeff(&[vec![0, 2], vec![1, 1]]), HSeries::monomial(q(1), 3));
        assert!(a.coeff(&[vec![0, 2], vec![1, 1, 1]]).is_zero());
    }

    #[test]
    fn wrong_family_is_not_maurer_cartan() {
        let u = sl2_uea();
        let mut body = SparseElement::zero(Space::WedgeSym);
        body.add_rational(vec![vec![0, 2], vec![]], &q(1));
        body.add_rational(vec![vec![0, 2], vec![1]], &q(2));
        let rho = RMatrix::new(&u, body, 1).unwrap();
        assert!(matches!(taylor_rescale(&u, &rho, 2), Err(Error::NotMaurerCartan(_))));
    }

    #[test]
    fn zero_rmatrix_gives_unit() {
        let u = sl2_uea();
        let zero = RMatrix::new(&u, SparseElement::zero(Space::WedgeSym), 2).unwrap();
        let t = solve_adte(&u, &zero, &SolveOptions::new(3)).unwrap();
        assert_eq!(t.k, m_element());
    }

    #[test]
    fn sl2_pipeline() {
        let u = sl2_uea();
        let rho = sl2_rho(&u, 3);
        let t = solve_adte(&u, &rho, &SolveOptions::new(3)).unwrap();
        assert!(adte_residual(&u, &t.k, 3).unwrap().is_zero());
        assert!(t.certificate.iter().enumerate().all(|(i, &f)| f <= i));
        // pinned top part
        for n in 1..=3 {
            let kn = t.k.hbar_layer(n);
            let top = kn.filter(|k| k[2].len() == n - 1);
            let want = alt_sym(&u, &rho.body().filter(|k| k[1].len() == n - 1)).unwrap();
            assert_eq!(top, want.filter(|k| k[2].len() == n - 1), "order {n}");
        }
        assert_eq!(j_to_k(&u, &t.j, 3).unwrap(), t.k);
        assert!(semiclassical_check(&t.j, &rho, 2).unwrap().0);
        assert!(dte_residual(&u, &t.j, 3).unwrap().is_zero());
        for n in 1..3 {
            assert!(adte_residual(&u, &t.k.truncate(n), n).unwrap().is_zero());
        }
    }

    #[test]
    fn abelian_matches_exponential_up_to_cocycles() {
        let u = abelian2();
        let mut body = SparseElement::zero(Space::WedgeSym);
        body.add_rational(vec![vec![0, 1], vec![]], &q(1));
        let rho = RMatrix::new(&u, body, 0).unwrap();
        let t = solve_adte(&u, &rho, &SolveOptions::new(3)).unwrap();
        // exp(ħr/2), r = a⊗b − b⊗a
        let r = alt_sym(&u, rho.body()).unwrap();
        let mut e = m_element();
        let mut pow = m_element();
        for n in 1..=3 {
            pow = u.slotwise(&pow, &r).unwrap().scale(&Q::from_integer((n as i64).into()).recip());
            e.add_assign(&pow.shift_hbar(n)).unwrap();
        }
        assert!(adte_residual(&u, &e, 3).unwrap().is_zero());
        assert_eq!(t.k.hbar_layer(1), e.hbar_layer(1));
        let d2 = t.k.hbar_layer(2).sub(&e.hbar_layer(2)).unwrap();
        assert!(crate::adt::differential_b(&u, &d2).unwrap().is_zero());
    }

    #[test]
    fn k_j_conversion() {
        let u = sl2_uea();
        assert_eq!(k_to_j(&u, &m_element(), 3).unwrap(), formal(&[(&[&[], &[], &[]], 1, 0)]));
        let mut k = m_element();
        k.add_term(vec![vec![0], vec![2], vec![]], &HSeries::monomial(q(1), 1));
        let j = k_to_j(&u, &k, 2).unwrap();
        assert_eq!(j, formal(&[(&[&[], &[], &[]], 1, 0), (&[&[0], &[2], &[]], 1, 1)]));
        let mut bad = m_element();
        bad.add_term(vec![vec![0], vec![2], vec![1]], &HSeries::monomial(q(1), 1));
        assert!(matches!(k_to_j(&u, &bad, 2), Err(Error::ValuationViolated(_))));
    }

    #[test]
    fn star_products() {
        let u = sl2_uea();
        let h = SparseElement::rational_term(Space::Sym, vec![vec![1]], q(1));
        assert_eq!(pbw_star(&u, &h, &h, 2).unwrap(), SparseElement::rational_term(Space::Sym, vec![vec![1, 1]], q(1)));
        // nonabelian 𝔥 = ⟨x, y⟩ with [x, y] = y
        let l = LieData::new(vec!["x".into(), "y".into()], &[(0, 1, 1, q(1))], &[0, 1], Mode::Reductive).unwrap();
        let u2 = Uea::new(Arc::new(l), 6);
        let x = SparseElement::rational_term(Space::Sym, vec![vec![0]], q(1));
        let y = SparseElement::rational_term(Space::Sym, vec![vec![1]], q(1));
        let c = pbw_star(&u2, &x, &y, 2).unwrap().sub(&pbw_star(&u2, &y, &x, 2).unwrap()).unwrap();
        assert_eq!(c, SparseElement::term(Space::Sym, vec![vec![1]], HSeries::monomial(q(1), 1)));
        // associativity on a few monomials
        let xy = SparseElement::rational_term(Space::Sym, vec![vec![0, 1]], q(1));
        let l1 = pbw_star(&u2, &pbw_star(&u2, &x, &xy, 4).unwrap(), &y, 4).unwrap();
        let r1 = pbw_star(&u2, &x, &pbw_star(&u2, &xy, &y, 4).unwrap(), 4).unwrap();
        assert_eq!(l1, r1);
    }

    #[test]
    fn shift_examples() {
        let u = sl2_uea();
        let c = formal(&[(&[&[], &[], &[]], 1, 0), (&[&[0], &[2], &[]], 1, 1)]);
        let s = shift_argument(&u, &c, 3).unwrap();
        assert_eq!(s, formal(&[(&[&[], &[], &[], &[]], 1, 0), (&[&[0], &[2], &[], &[]], 1, 1)]));
        let lin = formal(&[(&[&[], &[], &[]], 1, 0), (&[&[0], &[2], &[1]], 1, 1)]);
        let s = shift_argument(&u, &lin, 3).unwrap();
        assert_eq!(
            s,
            formal(&[
                (&[&[], &[], &[], &[]], 1, 0),
                (&[&[0], &[2], &[], &[1]], 1, 1),
                (&[&[0], &[2], &[1], &[]], 1, 2)
            ])
        );
    }

    #[test]
    fn dte_negative_control() {
        let u = sl2_uea();
        assert!(dte_residual(&u, &formal(&[(&[&[], &[], &[]], 1, 0)]), 3).unwrap().is_zero());
        let rho = sl2_rho(&u, 3);
        let t = solve_adte(&u, &rho, &SolveOptions::new(3)).unwrap();
        let mut j = t.j.clone();
        j.add_term(vec![vec![0], vec![2], vec![]], &HSeries::monomial(q(1), 1));
        let r = dte_residual(&u, &j, 3).unwrap();
        assert!(r.hbar_layer(1).is_zero() && !r.hbar_layer(2).is_zero());
    }
}

#[cfg(test)]
mod repair_tests {
    use super::*;
    use crate::uea::tests::sl2_uea;

    fn sl2_solver(u: &Uea, depth: usize) -> Solver<'_> {
        let rho0 = sl2_rho(u, 3).classical_limit();
        let mut pinned = vec![m_element()];
        for d in 0..3 {
            pinned.push(alt_sym(u, &rho0.filter(|k| k[1].len() == d)).unwrap());
        }
        Solver { u, pinned, depth, perturb: None }
    }

    #[test]
    fn repair_reopens_previous_order() {
        let u = sl2_uea();
        let s = sl2_solver(&u, 2);
        let mut orders = vec![m_element()];
        s.greedy(&mut orders, 2).unwrap();
        let stuck = Error::NoSolution("forced".into());
        s.repair(&mut orders, 3, &stuck).unwrap();
        assert_eq!(orders.len(), 4);
        assert!(adte_residual(&u, &assemble(&orders), 3).unwrap().is_zero());
    }

    #[test]
    fn depth_zero_reports_the_obstruction() {
        let u = sl2_uea();
        let s = sl2_solver(&u, 0);
        let mut orders = vec![m_element()];
        s.greedy(&mut orders, 2).unwrap();
        let stuck = Error::NoSolution("forced".into());
        let e = s.repair(&mut orders, 3, &stuck).unwrap_err();
        assert!(matches!(e, Error::ObstructionNotRepaired { order: 3, depth: 0, .. }));
    }

    #[test]
    fn perturbed_runs_differ_and_still_solve() {
        let u = sl2_uea();
        let rho = sl2_rho(&u, 3);
        let a = solve_adte(&u, &rho, &SolveOptions::new(3)).unwrap();
        for choices in [Choices::Regauged(7), Choices::Coboundary(7)] {
            let b = solve_adte(&u, &rho, &SolveOptions { choices, ..SolveOptions::new(3) }).unwrap();
            assert_ne!(a.k, b.k);
            assert!(adte_residual(&u, &b.k, 3).unwrap().is_zero());
            assert!(dte_residual(&u, &b.j, 3).unwrap().is_zero());
            assert!(semiclassical_check(&b.j, &rho, 2).unwrap().0);
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::hseries::q;
    use crate::lie::{LieData, Mode};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn nonabelian_h() -> Uea {
        let names = ["x", "y", "p", "q"].map(String::from).to_vec();
        let l = LieData::new(names, &[(0, 1, 1, q(1)), (0, 2, 2, q(1)), (1, 3, 2, q(1))], &[0, 1], Mode::Reductive)
            .unwrap();
        Uea::new(Arc::new(l), 10)
    }

    fn mono(max: usize, letters: u8) -> impl Strategy<Value = Mono> {
        prop::collection::vec(0..letters, 0..=max).prop_map(|mut m| {
            m.sort_unstable();
            m
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn shift_forms_agree(terms in prop::collection::vec((mono(2, 4), mono(2, 4), mono(3, 2), -3i64..=3, 0usize..=2), 1..5)) {
            let u = nonabelian_h();
            let mut j = SparseElement::zero(Space::Formal);
            for (a, b, s, c, p) in terms {
                j.add_term(vec![a, b, s], &HSeries::monomial(q(c), p));
            }
            // shift_argument errors when the two forms differ
            prop_assert!(shift_argument(&u, &j, 4).is_ok());
        }

        #[test]
        fn star_is_associative(f in mono(2, 2), g in mono(2, 2), h in mono(2, 2)) {
            let u = nonabelian_h();
            let e = |m: Mono| SparseElement::rational_term(Space::Sym, vec![m], q(1));
            let l = pbw_star(&u, &pbw_star(&u, &e(f.clone()), &e(g.clone()), 6).unwrap(), &e(h.clone()), 6).unwrap();
            let r = pbw_star(&u, &e(f), &pbw_star(&u, &e(g), &e(h), 6).unwrap(), 6).unwrap();
            prop_assert_eq!(l, r);
        }
    }
}
