//! The quantum side: (T U𝔤 ⊗ U𝔥)^𝔥 with the Hochschild-type differential
//! `b`, cup product, braces, Gerstenhaber bracket, the ADTE residual, the
//! projection `p₂` and the solver realizing the homotopy `κ`.
//!
//! An arity-k element has keys of length k+1: k U𝔤 slots followed by the
//! U𝔥 leg. Splitting slot `i` means Δ for `i < k` and the coaction
//! U𝔥 → U𝔤⊗U𝔥 for the leg; both act on a sorted PBW monomial by
//! distributing its letters, so `b` preserves the total PBW degree.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::element::{mismatch, Key, Mono, SparseElement, Space};
use crate::error::{Error, Result};
use crate::hseries::{HSeries, Q};
use crate::invariant::{enumerate, invariant_coords, require_invariant, Basis, SpaceDescriptor};
use crate::linalg::{axpy, kernel, unit, Eliminator, FiniteComplex, SVec};
use crate::uea::{split_mono, Pbw, Uea};

fn expect_adt(p: &SparseElement) -> Result<()> {
    if p.space() != Space::Adt {
        return Err(mismatch(Space::Adt, p.space()));
    }
    Ok(())
}

fn neg_if(odd: bool, c: Q) -> Q {
    if odd {
        -c
    } else {
        c
    }
}

/// Coefficients restricted to ħ-order ≤ n during products.
pub fn with_prec(e: &SparseElement, n: usize) -> SparseElement {
    e.map_coeffs(|c| c.clone().with_prec(n))
}

/// m = 1⊗1⊗1, the arity-2 unit.
pub fn m_element() -> SparseElement {
    SparseElement::unit(Space::Adt, 3)
}

/// The unit of arity 0.
pub fn one_element() -> SparseElement {
    SparseElement::unit(Space::Adt, 1)
}

/// 1 ⊗ P.
pub fn pad(p: &SparseElement) -> SparseElement {
    p.flat_map(Space::Adt, |k| {
        let mut nk = Vec::with_capacity(k.len() + 1);
        nk.push(Vec::new());
        nk.extend(k.iter().cloned());
        vec![(nk, Q::one())]
    })
}

/// Split slot `i` in two (Δ on a U𝔤 slot, the coaction on the leg).
pub fn dup(p: &SparseElement, i: usize) -> SparseElement {
    p.flat_map(p.space(), |k| {
        if i >= k.len() {
            return vec![];
        }
        split_mono(&k[i], 2)
            .into_iter()
            .map(|(parts, c)| {
                let mut nk = Vec::with_capacity(k.len() + 1);
                nk.extend(k[..i].iter().cloned());
                nk.extend(parts);
                nk.extend(k[i + 1..].iter().cloned());
                (nk, c)
            })
            .collect()
    })
}

/// b(P) = 1⊗P + Σ_{i=1}^{k+1} (−1)^i P^{1,…,i i+1,…,k+2}.
pub fn differential_b(u: &Uea, p: &SparseElement) -> Result<SparseElement> {
    expect_adt(p)?;
    let out = p.flat_map(Space::Adt, |k| {
        let mut out = Vec::new();
        let mut nk = Vec::with_capacity(k.len() + 1);
        nk.push(Vec::new());
        nk.extend(k.iter().cloned());
        out.push((nk, Q::one()));
        for i in 0..k.len() {
            for (parts, c) in split_mono(&k[i], 2) {
                let mut nk = Vec::with_capacity(k.len() + 1);
                nk.extend(k[..i].iter().cloned());
                nk.extend(parts);
                nk.extend(k[i + 1..].iter().cloned());
                out.push((nk, neg_if(i % 2 == 0, c)));
            }
        }
        out
    });
    u.check_degree(&out)?;
    Ok(out)
}

/// Multiply placed keys: `acc` and `other` hold alternatives with weights.
fn mul_alternatives(u: &Uea, acc: &[(Key, Q)], other: &[(Key, Q)]) -> Vec<(Key, Q)> {
    let mut out = Vec::with_capacity(acc.len() * other.len());
    for (ka, ca) in acc {
        for (kb, cb) in other {
            let c = ca * cb;
            for (k, x) in u.mul_keys(ka, kb) {
                out.push((k, &c * &x));
            }
        }
    }
    out
}

fn accumulate(out: &mut SparseElement, alts: Vec<(Key, Q)>, coeff: &HSeries) {
    let mut merged: BTreeMap<Key, Q> = BTreeMap::new();
    for (k, c) in alts {
        *merged.entry(k).or_insert_with(Q::zero) += c;
    }
    for (k, c) in merged {
        if !c.is_zero() {
            out.add_term(k, &coeff.scale(&c));
        }
    }
}

/// P ∪ Q = P^{1,…,k,k+1…k+l+1} Q^{k+1,…,k+l+1}.
pub fn cup(u: &Uea, p: &SparseElement, q: &SparseElement) -> Result<SparseElement> {
    expect_adt(p)?;
    expect_adt(q)?;
    let mut out = SparseElement::zero(Space::Adt);
    for (kp, vp) in p.terms() {
        let k = kp.len() - 1;
        for (kq, vq) in q.terms() {
            let l = kq.len() - 1;
            let c = vp * vq;
            if c.is_zero() {
                continue;
            }
            let left: Vec<(Key, Q)> = split_mono(&kp[k], l + 1)
                .into_iter()
                .map(|(spread, x)| {
                    let mut nk = kp[..k].to_vec();
                    nk.extend(spread);
                    (nk, x)
                })
                .collect();
            let mut right = vec![Vec::new(); k];
            right.extend(kq.iter().cloned());
            accumulate(&mut out, mul_alternatives(u, &left, &[(right, Q::one())]), &c);
        }
    }
    u.check_degree(&out)?;
    Ok(out)
}

/// Split an element into its homogeneous arity components.
pub fn by_arity(p: &SparseElement) -> BTreeMap<usize, SparseElement> {
    let mut out: BTreeMap<usize, SparseElement> = BTreeMap::new();
    for (k, c) in p.terms() {
        out.entry(k.len() - 1).or_insert_with(|| SparseElement::zero(p.space())).add_term(k.clone(), c);
    }
    out
}

/// Increasing maps {0..m} → {0..p}.
fn injections(m: usize, p: usize) -> Vec<Vec<usize>> {
    fn go(m: usize, p: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for j in start..p {
            cur.push(j);
            go(m, p, j + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(m, p, 0, &mut Vec::new(), &mut out);
    out
}

/// Brace of homogeneous arguments.
fn brace_homogeneous(u: &Uea, p: &SparseElement, qs: &[(usize, &SparseElement)], pa: usize) -> SparseElement {
    let m = qs.len();
    let ktot: usize = qs.iter().map(|(k, _)| *k).sum();
    let mut out = SparseElement::zero(Space::Adt);
    if pa + ktot < m {
        return out;
    }
    let n = pa + ktot - m;
    for js in injections(m, pa) {
        // output offsets i_s
        let mut is = Vec::with_capacity(m);
        let mut shift = 0isize;
        for (s, &j) in js.iter().enumerate() {
            is.push((j as isize + shift) as usize);
            shift += qs[s].0 as isize - 1;
        }
        let eps: usize = qs.iter().zip(&is).map(|((k, _), i)| (k + 1) * i).sum::<usize>() % 2;
        for (kp, vp) in p.terms() {
            // place P: split the receiving slots
            let mut placed: Vec<(Key, Q)> = vec![(Vec::with_capacity(n + 1), Q::one())];
            let mut ok = true;
            for (j, slot) in kp[..pa].iter().enumerate() {
                match js.iter().position(|&x| x == j) {
                    None => {
                        for (k, _) in placed.iter_mut() {
                            k.push(slot.clone());
                        }
                    }
                    Some(s) => {
                        let ks = qs[s].0;
                        if ks == 0 {
                            if !slot.is_empty() {
                                ok = false;
                                break;
                            }
                            continue;
                        }
                        let parts = split_mono(slot, ks);
                        let mut next = Vec::with_capacity(placed.len() * parts.len());
                        for (k, c) in &placed {
                            for (pp, x) in &parts {
                                let mut nk = k.clone();
                                nk.extend(pp.iter().cloned());
                                next.push((nk, c * x));
                            }
                        }
                        placed = next;
                    }
                }
            }
            if !ok {
                continue;
            }
            for (k, _) in placed.iter_mut() {
                k.push(kp[pa].clone());
            }
            // multiply in each Q_s placed at i_s, legs spread to the end
            let mut partial: Vec<(Key, HSeries, Vec<(Key, Q)>)> = vec![(Vec::new(), vp.clone(), placed)];
            for (s, (ks, q)) in qs.iter().enumerate() {
                let i = is[s];
                let mut next = Vec::new();
                for (_, coeff, alts) in &partial {
                    for (kq, vq) in q.terms() {
                        let c = coeff * vq;
                        if c.is_zero() {
                            continue;
                        }
                        let qalts: Vec<(Key, Q)> = split_mono(&kq[*ks], n - i - ks + 1)
                            .into_iter()
                            .map(|(spread, x)| {
                                let mut nk = vec![Vec::new(); i];
                                nk.extend(kq[..*ks].iter().cloned());
                                nk.extend(spread);
                                (nk, x)
                            })
                            .collect();
                        next.push((Vec::new(), c, mul_alternatives(u, alts, &qalts)));
                    }
                }
                partial = next;
            }
            for (_, coeff, alts) in partial {
                let coeff = if eps == 1 { -&coeff } else { coeff };
                accumulate(&mut out, alts, &coeff);
            }
        }
    }
    out
}

/// {P | Q₁, …, Q_m} without the invariance check.
pub fn brace_raw(u: &Uea, p: &SparseElement, qs: &[SparseElement]) -> Result<SparseElement> {
    expect_adt(p)?;
    for q in qs {
        expect_adt(q)?;
    }
    let mut out = SparseElement::zero(Space::Adt);
    let pparts = by_arity(p);
    let qparts: Vec<BTreeMap<usize, SparseElement>> = qs.iter().map(by_arity).collect();
    // iterate over arity choices for each argument
    let mut choices: Vec<Vec<(usize, &SparseElement)>> = vec![vec![]];
    for qp in &qparts {
        let mut next = Vec::new();
        for c in &choices {
            for (k, e) in qp {
                let mut c2 = c.clone();
                c2.push((*k, e));
                next.push(c2);
            }
        }
        choices = next;
    }
    for (pa, pe) in &pparts {
        for c in &choices {
            out.add_assign(&brace_homogeneous(u, pe, c, *pa))?;
        }
    }
    u.check_degree(&out)?;
    Ok(out)
}

/// {P | Q₁, …, Q_m} on 𝔥-invariant arguments.
pub fn brace(u: &Uea, p: &SparseElement, qs: &[SparseElement]) -> Result<SparseElement> {
    require_invariant(u, p, "brace argument")?;
    for q in qs {
        require_invariant(u, q, "brace argument")?;
    }
    brace_raw(u, p, qs)
}

/// [P, Q]_G = {P|Q} − (−1)^{(|P|−1)(|Q|−1)} {Q|P}, unchecked.
pub fn gerstenhaber_raw(u: &Uea, p: &SparseElement, q: &SparseElement) -> Result<SparseElement> {
    let mut out = SparseElement::zero(Space::Adt);
    for (a, pe) in by_arity(p) {
        for (b, qe) in by_arity(q) {
            let pq = brace_raw(u, &pe, std::slice::from_ref(&qe))?;
            let qp = brace_raw(u, &qe, std::slice::from_ref(&pe))?;
            let odd = (a + 1) * (b + 1) % 2 == 1;
            out.add_assign(&pq)?;
            out.add_assign(&if odd { qp } else { qp.neg() })?;
        }
    }
    Ok(out)
}

/// [P, Q]_G on invariant arguments.
pub fn gerstenhaber_bracket(u: &Uea, p: &SparseElement, q: &SparseElement) -> Result<SparseElement> {
    require_invariant(u, p, "bracket argument")?;
    require_invariant(u, q, "bracket argument")?;
    gerstenhaber_raw(u, p, q)
}

/// D(P) = [m, P]_G = (−1)^{|P|−1} b(P), the differential for which the
/// Gerstenhaber bracket is a derivation.
pub fn dgla_differential(u: &Uea, p: &SparseElement) -> Result<SparseElement> {
    let mut out = SparseElement::zero(Space::Adt);
    for (a, pe) in by_arity(p) {
        let bp = differential_b(u, &pe)?;
        out.add_assign(&if a % 2 == 1 { bp } else { bp.neg() })?;
    }
    Ok(out)
}

fn check_unit_mod_hbar(k: &SparseElement) -> Result<()> {
    expect_adt(k)?;
    if k.hbar_layer(0) != m_element() {
        return Err(Error::SpaceMismatch {
            expected: "an arity-2 element congruent to 1 modulo hbar".into(),
            got: "a different constant term".into(),
        });
    }
    Ok(())
}

/// K^{12,3,4}K^{1,2,34} − K^{1,23,4}K^{2,3,4} modulo ħ^{n+1}.
pub fn adte_residual(u: &Uea, k: &SparseElement, n: usize) -> Result<SparseElement> {
    check_unit_mod_hbar(k)?;
    let kp = with_prec(k, n);
    let a = u.slotwise(&dup(&kp, 0), &dup(&kp, 2))?;
    let b = u.slotwise(&dup(&kp, 1), &pad(&kp))?;
    Ok(a.sub(&b)?.truncate(n))
}

/// Residual of K = 1 + X in the dgla form D X + ½[X, X]_G modulo ħ^{n+1},
/// together with whether it agrees with [`adte_residual`].
pub fn adte_residual_dgla(u: &Uea, k: &SparseElement, n: usize) -> Result<(SparseElement, bool)> {
    check_unit_mod_hbar(k)?;
    let x = k.sub(&m_element())?;
    let xp = with_prec(&x, n);
    let half = Q::new(1.into(), 2.into());
    let mc = dgla_differential(u, &x)?.add(&gerstenhaber_raw(u, &xp, &xp)?.scale(&half))?.truncate(n);
    let direct = adte_residual(u, k, n)?;
    let agree = mc == direct;
    Ok((mc, agree))
}

/// p₂ = (⊗p) ⊗ ε: the U𝔪-component of every U𝔤 slot and the counit on the
/// leg. The result lives in `Space::UgTensor`.
pub fn p2_project(u: &Uea, p: &SparseElement) -> Result<SparseElement> {
    expect_adt(p)?;
    let mut memo: HashMap<Mono, Pbw> = HashMap::new();
    let mut out = SparseElement::zero(Space::UgTensor);
    for (k, c) in p.terms() {
        let (slots, leg) = k.split_at(k.len() - 1);
        if !leg[0].is_empty() {
            continue;
        }
        let mut alts: Vec<(Key, Q)> = vec![(Vec::new(), Q::one())];
        for m in slots {
            let um = memo
                .entry(m.clone())
                .or_insert_with(|| u.split_um_pbw(&[(m.clone(), Q::one())].into()).1)
                .clone();
            let mut next = Vec::with_capacity(alts.len() * um.len());
            for (ak, ac) in &alts {
                for (mm, x) in &um {
                    let mut nk = ak.clone();
                    nk.push(mm.clone());
                    next.push((nk, ac * x));
                }
            }
            alts = next;
        }
        for (nk, x) in alts {
            out.add_term(nk, &c.scale(&x));
        }
    }
    Ok(out)
}

/// T U𝔪 → 𝔤₂, appending the unit leg.
pub fn include_um(t: &SparseElement) -> Result<SparseElement> {
    if t.space() != Space::UgTensor {
        return Err(mismatch(Space::UgTensor, t.space()));
    }
    Ok(t.flat_map(Space::Adt, |k| {
        let mut nk = k.clone();
        nk.push(Vec::new());
        vec![(nk, Q::one())]
    }))
}

fn total_degree(k: &Key) -> usize {
    k.iter().map(|m| m.len()).sum()
}

/// Invariant vectors of an arity slice with total PBW degree in
/// `lo..=hi` and leg ≤ `leg`. With diagonal 𝔥-weights exact degrees are
/// used, otherwise the filtered slice.
pub fn invariant_slice(u: &Uea, arity: usize, lo: usize, hi: usize, leg: usize) -> Result<(Basis, Vec<SVec>)> {
    let full = enumerate(u, &SpaceDescriptor::Adt { arity, max_total: hi, max_uh: leg });
    let keys: Vec<Key> = full.keys.into_iter().filter(|k| total_degree(k) >= lo).collect();
    let basis = Basis::new(Space::Adt, keys);
    let inv = invariant_coords(u, &basis)?;
    Ok((basis, inv))
}

/// Solve b(x) = z for an 𝔥-invariant x with U𝔥-filtration ≤ `bound`.
pub fn kappa_solve(u: &Uea, z: &SparseElement, bound: usize) -> Result<SparseElement> {
    expect_adt(z)?;
    if z.is_zero() {
        return Ok(SparseElement::zero(Space::Adt));
    }
    let arity = z.arity().ok_or_else(|| Error::NoSolution("right-hand side is not homogeneous".into()))?;
    if arity == 0 {
        return Err(Error::NoSolution("arity-0 elements are not coboundaries".into()));
    }
    let degrees: Vec<usize> = {
        let mut d: Vec<usize> = z.terms().keys().map(total_degree).collect();
        d.sort_unstable();
        d.dedup();
        d
    };
    let layers: Vec<usize> = {
        let mut l: Vec<usize> = z
            .terms()
            .values()
            .flat_map(|c| c.coeffs().iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, _)| i))
            .collect();
        l.sort_unstable();
        l.dedup();
        l
    };
    let groups: Vec<(usize, usize)> = if u.weights().is_some() {
        degrees.iter().map(|&d| (d, d)).collect()
    } else {
        vec![(0, *degrees.last().unwrap())]
    };
    let mut x = SparseElement::zero(Space::Adt);
    for (lo, hi) in groups {
        let zpart = z.filter(|k| (lo..=hi).contains(&total_degree(k)));
        let (basis, inv) = invariant_slice(u, arity - 1, lo, hi, bound)?;
        // columns b(v) over a growing target index
        let mut target: HashMap<Key, usize> = HashMap::new();
        let mut elim = Eliminator::new();
        for (j, v) in inv.iter().enumerate() {
            let img = differential_b(u, &basis.element(v))?;
            let mut col = SVec::new();
            for (k, c) in img.terms() {
                let n = target.len();
                let i = *target.entry(k.clone()).or_insert(n);
                col.insert(i, c.coeff(0));
            }
            let _ = elim.insert(col, unit(j));
        }
        for &layer in &layers {
            let mut rhs = SVec::new();
            for (k, c) in zpart.terms() {
                let v = c.coeff(layer);
                if v.is_zero() {
                    continue;
                }
                let Some(&i) = target.get(k) else {
                    return Err(Error::NoSolution(format!(
                        "term {k:?} of the right-hand side is outside the image slice"
                    )));
                };
                rhs.insert(i, v);
            }
            if rhs.is_empty() {
                continue;
            }
            let sol = elim.solve(&rhs).ok_or_else(|| {
                Error::NoSolution(format!(
                    "no invariant preimage with U(h)-filtration <= {bound} at hbar^{layer}, total degree {lo}..={hi}"
                ))
            })?;
            for (j, c) in sol {
                for (i, y) in &inv[j] {
                    x.add_term(basis.keys[*i].clone(), &HSeries::monomial(&c * y, layer));
                }
            }
        }
    }
    if differential_b(u, &x)? != *z {
        return Err(Error::NoSolution("recomputed b(x) differs from the right-hand side".into()));
    }
    Ok(x)
}

fn degree_range<'a>(es: impl Iterator<Item = &'a SparseElement>) -> Option<(usize, usize)> {
    let degs: Vec<usize> = es.flat_map(|e| e.terms().keys().map(total_degree)).collect();
    Some((*degs.iter().min()?, *degs.iter().max()?))
}

/// Images b(v) of the invariant vectors of a slice, as columns over a
/// shared key index.
fn image_columns(
    u: &Uea,
    basis: &Basis,
    inv: &[SVec],
    target: &mut HashMap<Key, usize>,
) -> Result<Vec<SVec>> {
    inv.iter()
        .map(|v| {
            let img = differential_b(u, &basis.element(v))?;
            Ok(column(&img, target))
        })
        .collect()
}

fn column(e: &SparseElement, target: &mut HashMap<Key, usize>) -> SVec {
    let mut col = SVec::new();
    for (k, c) in e.terms() {
        let n = target.len();
        let i = *target.entry(k.clone()).or_insert(n);
        col.insert(i, c.coeff(0));
    }
    col
}

/// Invariant b-cocycles of the given arity, total degree in `lo..=hi`
/// and leg ≤ `leg`.
pub fn invariant_cocycles(u: &Uea, arity: usize, lo: usize, hi: usize, leg: usize) -> Result<Vec<SparseElement>> {
    let (basis, inv) = invariant_slice(u, arity, lo, hi, leg)?;
    let mut target = HashMap::new();
    let cols = image_columns(u, &basis, &inv, &mut target)?;
    Ok(kernel(&cols)
        .iter()
        .map(|k| {
            let mut v = SVec::new();
            for (j, c) in k {
                axpy(&mut v, c, &inv[*j]);
            }
            basis.element(&v)
        })
        .collect())
}

/// Solve b(x) − Σ c_j w_j = z on a single ħ-layer for an invariant x with
/// leg ≤ `bound` and scalars c_j. All inputs are ħ-free.
pub fn kappa_solve_affine(
    u: &Uea,
    z: &SparseElement,
    extras: &[SparseElement],
    bound: usize,
) -> Result<(SparseElement, Vec<Q>)> {
    expect_adt(z)?;
    let all = || std::iter::once(z).chain(extras.iter());
    let Some((lo, hi)) = degree_range(all()) else {
        return Ok((SparseElement::zero(Space::Adt), vec![Q::zero(); extras.len()]));
    };
    let arity = all()
        .find_map(|e| e.arity())
        .ok_or_else(|| Error::NoSolution("right-hand side is not homogeneous".into()))?;
    if arity == 0 {
        return Err(Error::NoSolution("arity-0 elements are not coboundaries".into()));
    }
    let (basis, inv) = invariant_slice(u, arity - 1, lo, hi, bound)?;
    let mut target = HashMap::new();
    let mut cols = image_columns(u, &basis, &inv, &mut target)?;
    cols.extend(extras.iter().map(|w| column(&w.neg(), &mut target)));
    let mut elim = Eliminator::new();
    for (j, c) in cols.into_iter().enumerate() {
        let _ = elim.insert(c, unit(j));
    }
    let mut rhs = SVec::new();
    for (k, c) in z.terms() {
        let Some(&i) = target.get(k) else {
            return Err(Error::NoSolution(format!("term {k:?} is outside the image slice")));
        };
        rhs.insert(i, c.coeff(0));
    }
    let sol = elim
        .solve(&rhs)
        .ok_or_else(|| Error::NoSolution(format!("affine system unsolvable with leg <= {bound}")))?;
    let mut x = SVec::new();
    let mut cs = vec![Q::zero(); extras.len()];
    for (j, c) in sol {
        if j < inv.len() {
            axpy(&mut x, &c, &inv[j]);
        } else {
            cs[j - inv.len()] = c;
        }
    }
    Ok((basis.element(&x), cs))
}

/// A finite subspace of an arity slice given by spanning vectors in key
/// coordinates, with a solver for coordinates in that spanning set.
struct Subspace {
    basis: Basis,
    vecs: Vec<SVec>,
    coords: Eliminator,
}

impl Subspace {
    fn new(basis: Basis, vecs: Vec<SVec>) -> Self {
        let mut coords = Eliminator::new();
        for (j, v) in vecs.iter().enumerate() {
            let _ = coords.insert(v.clone(), unit(j));
        }
        Subspace { basis, vecs, coords }
    }

    fn coords_of(&self, e: &SparseElement, layer: usize) -> Option<SVec> {
        let v = self.basis.coords(e, layer).ok()?;
        self.coords.solve(&v)
    }

    fn element(&self, c: &SVec) -> SparseElement {
        let mut v = SVec::new();
        for (j, x) in c {
            crate::linalg::axpy(&mut v, x, &self.vecs[*j]);
        }
        self.basis.element(&v)
    }
}

/// Invariant part of ker p₂ on the slice (arity, total ≤ t, leg ≤ leg).
fn kernel_p2_slice(u: &Uea, arity: usize, t: usize, leg: usize) -> Result<Subspace> {
    let (basis, inv) = invariant_slice(u, arity, 0, t, leg)?;
    let mut target: HashMap<Key, usize> = HashMap::new();
    let mut cols = Vec::with_capacity(inv.len());
    for v in &inv {
        let img = p2_project(u, &basis.element(v))?;
        let mut col = SVec::new();
        for (k, c) in img.terms() {
            let n = target.len();
            col.insert(*target.entry(k.clone()).or_insert(n), c.coeff(0));
        }
        cols.push(col);
    }
    let mut vecs: Vec<SVec> = crate::linalg::kernel(&cols)
        .into_iter()
        .map(|c| {
            let mut v = SVec::new();
            for (j, x) in &c {
                crate::linalg::axpy(&mut v, x, &inv[*j]);
            }
            v
        })
        .collect();
    // low U𝔥-filtration first, so preimages prefer it
    let filt = |v: &SVec| v.keys().map(|&i| basis.keys[i].last().map_or(0, |m| m.len())).max().unwrap_or(0);
    vecs.sort_by_key(|v| filt(v));
    Ok(Subspace::new(basis, vecs))
}

struct NComplex {
    lo: usize,
    slices: Vec<Subspace>,
    complex: FiniteComplex,
}

/// A contracting homotopy κ on N = ker p₂ ⊂ 𝔤₂ with bκ + κb = id, realized
/// by exact linear algebra on invariant filtered slices that are b-stable.
pub struct NHomotopy {
    u: std::sync::Arc<Uea>,
    cache: std::sync::Mutex<HashMap<(usize, usize, usize), std::sync::Arc<NComplex>>>,
}

impl NHomotopy {
    pub fn new(u: std::sync::Arc<Uea>) -> Self {
        NHomotopy { u, cache: Default::default() }
    }

    fn complex(&self, arity: usize, t: usize, leg: usize) -> Result<std::sync::Arc<NComplex>> {
        if let Some(c) = self.cache.lock().unwrap().get(&(arity, t, leg)) {
            return Ok(c.clone());
        }
        let lo = arity.saturating_sub(1);
        let slices: Vec<Subspace> =
            (lo..=arity + 1).map(|j| kernel_p2_slice(&self.u, j, t, leg)).collect::<Result<_>>()?;
        let mut maps = Vec::new();
        for w in slices.windows(2) {
            let mut cols = Vec::with_capacity(w[0].vecs.len());
            for v in &w[0].vecs {
                let img = differential_b(&self.u, &w[0].basis.element(v))?;
                cols.push(w[1].coords_of(&img, 0).ok_or_else(|| {
                    Error::ContractFailure("b left the kernel of p2 on a truncated slice".into())
                })?);
            }
            maps.push(cols);
        }
        let complex = FiniteComplex::new(lo, slices.iter().map(|s| s.vecs.len()).collect(), maps);
        let c = std::sync::Arc::new(NComplex { lo, slices, complex });
        self.cache.lock().unwrap().insert((arity, t, leg), c.clone());
        Ok(c)
    }

    /// κ(z) for homogeneous z ∈ N; ħ-layers are treated independently.
    pub fn apply(&self, z: &SparseElement) -> Result<SparseElement> {
        expect_adt(z)?;
        if z.is_zero() {
            return Ok(SparseElement::zero(Space::Adt));
        }
        let arity = z.arity().ok_or_else(|| Error::ContractFailure("inhomogeneous arity".into()))?;
        let t = z.terms().keys().map(total_degree).max().unwrap_or(0);
        // one slice per total degree keeps κ(z) and κ(bz) consistent
        self.apply_in(z, arity, t, t)
    }

    fn apply_in(&self, z: &SparseElement, arity: usize, t: usize, leg: usize) -> Result<SparseElement> {
        let c = self.complex(arity, t, leg)?;
        let here = &c.slices[arity - c.lo];
        let mut out = SparseElement::zero(Space::Adt);
        let layers = z.hbar_degree().unwrap_or(0);
        for layer in 0..=layers {
            let Some(v) = here.coords_of(z, layer) else {
                return Err(Error::ContractFailure("element is not in the invariant kernel of p2".into()));
            };
            if v.is_empty() {
                continue;
            }
            let (h, harm) = c.complex.contract(arity, &v);
            if !harm.is_empty() {
                return Err(Error::ContractFailure(format!(
                    "truncated kernel of p2 is not acyclic at arity {arity} (total degree {t}, leg {leg})"
                )));
            }
            if arity > c.lo {
                let below = &c.slices[arity - 1 - c.lo];
                out.add_assign(&below.element(&h).shift_hbar(layer))?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::hseries::{q, qf};
    use crate::invariant::is_invariant;
    use crate::lie::{Idx, LieData, Mode};
    use crate::uea::tests::sl2_uea;
    use std::sync::Arc;

    pub fn adt(terms: &[(&[&[Idx]], i64)]) -> SparseElement {
        let mut e = SparseElement::zero(Space::Adt);
        for (k, c) in terms {
            e.add_rational(k.iter().map(|m| m.to_vec()).collect(), &q(*c));
        }
        e
    }

    #[test]
    fn b_examples() {
        let u = sl2_uea();
        assert_eq!(differential_b(&u, &adt(&[(&[&[1]], 1)])).unwrap(), adt(&[(&[&[1], &[]], -1)]));
        assert_eq!(differential_b(&u, &adt(&[(&[&[], &[]], 1)])).unwrap(), adt(&[(&[&[], &[], &[]], 1)]));
    }

    #[test]
    fn b_squared_vanishes_on_basis() {
        let u = sl2_uea();
        for arity in 0..=2 {
            let basis = enumerate(&u, &SpaceDescriptor::Adt { arity, max_total: 4, max_uh: 2 });
            for k in &basis.keys {
                if k[..arity].iter().any(|m| m.len() > 2) {
                    continue;
                }
                let p = SparseElement::rational_term(Space::Adt, k.clone(), q(1));
                let bb = differential_b(&u, &differential_b(&u, &p).unwrap()).unwrap();
                assert!(bb.is_zero(), "{k:?}");
            }
        }
    }

    #[test]
    fn cup_example() {
        let u = sl2_uea();
        let p = adt(&[(&[&[0], &[]], 1)]);
        let q_ = adt(&[(&[&[2], &[]], 1)]);
        assert_eq!(cup(&u, &p, &q_).unwrap(), adt(&[(&[&[0], &[2], &[]], 1)]));
        let x = adt(&[(&[&[0, 2], &[1]], 2)]);
        assert_eq!(cup(&u, &one_element(), &x).unwrap(), x);
    }

    #[test]
    fn brace_with_no_arguments_is_identity() {
        let u = sl2_uea();
        let p = adt(&[(&[&[0], &[2], &[1]], 1), (&[&[1], &[], &[]], 3)]);
        assert_eq!(brace_raw(&u, &p, &[]).unwrap(), p);
    }

    #[test]
    fn m_bracket_m_vanishes() {
        let u = sl2_uea();
        assert!(gerstenhaber_bracket(&u, &m_element(), &m_element()).unwrap().is_zero());
    }

    #[test]
    fn non_invariant_brace_is_rejected() {
        let u = sl2_uea();
        let p = adt(&[(&[&[0], &[]], 1)]);
        assert!(matches!(brace(&u, &m_element(), &[p.clone(), p]), Err(Error::NotInvariant(_))));
    }

    fn abelian2() -> Uea {
        let l = LieData::new(vec!["a".into(), "b".into()], &[], &[], Mode::Reductive).unwrap();
        Uea::new(Arc::new(l), 8)
    }

    #[test]
    fn exponential_twist_solves_adte() {
        let u = abelian2();
        let mut k = m_element();
        k.add_term(vec![vec![0], vec![1], vec![]], &HSeries::monomial(q(1), 1));
        k.add_term(vec![vec![0, 0], vec![1, 1], vec![]], &HSeries::monomial(qf(1, 2), 2));
        assert!(adte_residual(&u, &k, 2).unwrap().is_zero());
        let (mc, agree) = adte_residual_dgla(&u, &k, 2).unwrap();
        assert!(mc.is_zero() && agree);
    }

    #[test]
    fn naive_sl2_twist_fails_adte() {
        let l = LieData::new(
            vec!["e".into(), "h".into(), "f".into()],
            &[(1, 0, 0, q(2)), (1, 2, 2, q(-2)), (0, 2, 1, q(1))],
            &[],
            Mode::Reductive,
        )
        .unwrap();
        let u = Uea::new(Arc::new(l), 8);
        let mut k = m_element();
        k.add_term(vec![vec![0], vec![2], vec![]], &HSeries::monomial(q(1), 1));
        let r = adte_residual(&u, &k, 2).unwrap();
        assert!(!r.hbar_layer(2).is_zero());
        assert!(r.hbar_layer(1).is_zero());
        let (_, agree) = adte_residual_dgla(&u, &k, 2).unwrap();
        assert!(agree);
    }

    #[test]
    fn p2_examples() {
        let u = sl2_uea();
        let t = p2_project(&u, &adt(&[(&[&[0], &[2], &[]], 1)])).unwrap();
        assert_eq!(t, SparseElement::rational_term(Space::UgTensor, vec![vec![0], vec![2]], q(1)));
        assert!(p2_project(&u, &adt(&[(&[&[0], &[2], &[1]], 1)])).unwrap().is_zero());
        let t = p2_project(&u, &adt(&[(&[&[0, 2], &[], &[]], 1)])).unwrap();
        let mut expect = SparseElement::zero(Space::UgTensor);
        expect.add_rational(vec![vec![0, 2], vec![]], &q(1));
        expect.add_rational(vec![vec![1], vec![]], &qf(-1, 2));
        assert_eq!(t, expect);
    }

    #[test]
    fn n_homotopy_contracts() {
        let u = Arc::new(sl2_uea());
        let kap = NHomotopy::new(u.clone());
        // x = h⊗h-leg-ish invariant element of N
        let zs = [
            adt(&[(&[&[1], &[]], 1)]),
            adt(&[(&[&[0, 2], &[1]], 1), (&[&[1], &[1]], 2)]),
            adt(&[(&[&[0], &[2], &[]], 1), (&[&[2], &[0], &[1]], -1)]),
        ];
        for z in zs {
            let z = z.sub(&include_um(&p2_project(&u, &z).unwrap()).unwrap()).unwrap();
            let bz = differential_b(&u, &z).unwrap();
            let lhs = differential_b(&u, &kap.apply(&z).unwrap()).unwrap().add(&kap.apply(&bz).unwrap()).unwrap();
            assert_eq!(lhs, z);
        }
    }

    #[test]
    fn kappa_on_h() {
        let u = sl2_uea();
        let z = adt(&[(&[&[1], &[]], -1)]);
        assert!(kappa_solve(&u, &SparseElement::zero(Space::Adt), 1).unwrap().is_zero());
        let x = kappa_solve(&u, &z, 2).unwrap();
        assert_eq!(differential_b(&u, &x).unwrap(), z);
        assert!(x.uh_filtration() <= 2);
        assert!(is_invariant(&u, &x).unwrap());
    }
}

#[cfg(test)]
mod identities {
    use super::*;
    use crate::invariant::invariant_basis;
    use crate::uea::tests::sl2_uea;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_invariant(u: &Uea, arity: usize, rng: &mut ChaCha8Rng) -> SparseElement {
        let basis = invariant_basis(u, &SpaceDescriptor::Adt { arity, max_total: 2, max_uh: 1 }).unwrap();
        let mut e = SparseElement::zero(Space::Adt);
        for b in basis {
            let c: i64 = rng.gen_range(-2..=2);
            e.add_assign(&b.scale(&Q::from_integer(c.into()))).unwrap();
        }
        e
    }

    fn sign(odd: bool, e: SparseElement) -> SparseElement {
        if odd {
            e.neg()
        } else {
            e
        }
    }

    #[test]
    fn b_is_bracket_with_m() {
        let u = sl2_uea();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for a in 0..=3 {
            let p = random_invariant(&u, a, &mut rng);
            let mp = gerstenhaber_bracket(&u, &m_element(), &p).unwrap();
            assert_eq!(differential_b(&u, &p).unwrap(), sign(a % 2 == 0, mp));
        }
    }

    #[test]
    fn m_brace_is_signed_cup() {
        let u = sl2_uea();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for a in 0..=2 {
            for c in 0..=2 {
                let p = random_invariant(&u, a, &mut rng);
                let q_ = random_invariant(&u, c, &mut rng);
                let lhs = brace(&u, &m_element(), &[p.clone(), q_.clone()]).unwrap();
                let odd = a * (c + 1) % 2 == 1;
                assert_eq!(lhs, sign(odd, cup(&u, &p, &q_).unwrap()));
            }
        }
    }

    #[test]
    fn cup_leibniz() {
        let u = sl2_uea();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for a in 0..=2 {
            for c in 0..=2 {
                let p = random_invariant(&u, a, &mut rng);
                let q_ = random_invariant(&u, c, &mut rng);
                let lhs = differential_b(&u, &cup(&u, &p, &q_).unwrap()).unwrap();
                let r1 = cup(&u, &differential_b(&u, &p).unwrap(), &q_).unwrap();
                let r2 = cup(&u, &p, &differential_b(&u, &q_).unwrap()).unwrap();
                assert_eq!(lhs, r1.add(&sign(a % 2 == 1, r2)).unwrap());
            }
        }
    }

    #[test]
    fn d_is_a_derivation_and_jacobi_holds() {
        let u = sl2_uea();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for a in 0..=2 {
            for c in 0..=2 {
                let p = random_invariant(&u, a, &mut rng);
                let q_ = random_invariant(&u, c, &mut rng);
                let lhs = dgla_differential(&u, &gerstenhaber_bracket(&u, &p, &q_).unwrap()).unwrap();
                let r1 = gerstenhaber_bracket(&u, &dgla_differential(&u, &p).unwrap(), &q_).unwrap();
                let r2 = gerstenhaber_bracket(&u, &p, &dgla_differential(&u, &q_).unwrap()).unwrap();
                assert_eq!(lhs, r1.add(&sign(a % 2 == 0, r2)).unwrap(), "{a} {c}");
                // graded Jacobi in the shifted degrees |P| − 1
                let r = random_invariant(&u, 1, &mut rng);
                let g = |x: &SparseElement, y: &SparseElement| gerstenhaber_bracket(&u, x, y).unwrap();
                let (dp, dq) = (a + 1, c + 1);
                let lhs = g(&p, &g(&q_, &r));
                let rhs = g(&g(&p, &q_), &r).add(&sign(dp * dq % 2 == 1, g(&q_, &g(&p, &r)))).unwrap();
                assert_eq!(lhs, rhs, "jacobi {a} {c}");
            }
        }
    }
}
