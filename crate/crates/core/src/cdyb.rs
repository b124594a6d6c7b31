//! The classical side: (∧𝔤 ⊗ S𝔥)^𝔥 with differential `d`, the degree −1
//! bracket, the CDYBE residual, the projection `p₁` and the homotopy `δ`.

use num_traits::One;

use crate::element::{mismatch, sym_canon, sym_merge, wedge2_as_tensor, wedge_canon, Key, Mono, SparseElement, Space};
use crate::error::{Error, Result};
use crate::hseries::Q;
use crate::invariant::require_invariant;
use crate::lie::{Idx, LieData};
use crate::uea::Uea;

fn expect_ws(a: &SparseElement) -> Result<()> {
    if a.space() != Space::WedgeSym {
        return Err(mismatch(Space::WedgeSym, a.space()));
    }
    Ok(())
}

fn sign(odd: bool) -> Q {
    if odd {
        -Q::one()
    } else {
        Q::one()
    }
}

/// Distinct letters of a symmetric monomial with multiplicities, and the
/// monomial with one copy removed.
fn partials(s: &[Idx]) -> Vec<(Idx, usize, Mono)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let x = s[i];
        let mut j = i;
        while j < s.len() && s[j] == x {
            j += 1;
        }
        let mut rest = s.to_vec();
        rest.remove(i);
        out.push((x, j - i, rest));
        i = j;
    }
    out
}

/// d(x₁∧…∧x_k ⊗ h₁⋯h_l) = −Σᵢ hᵢ∧x₁∧…∧x_k ⊗ h₁⋯ĥᵢ⋯h_l.
pub fn differential_d(a: &SparseElement) -> Result<SparseElement> {
    expect_ws(a)?;
    Ok(a.flat_map(Space::WedgeSym, |k| {
        let mut out = Vec::new();
        for (x, mult, rest) in partials(&k[1]) {
            let mut w = vec![x];
            w.extend_from_slice(&k[0]);
            if let Some((odd, w)) = wedge_canon(&w) {
                let c = Q::from_integer((mult as i64).into());
                out.push((vec![w, rest], if odd { c } else { -c }));
            }
        }
        out
    }))
}

/// Bracket of two wedge monomials, as (wedge monomial, coefficient) pairs.
pub fn schouten_mono(lie: &LieData, x: &[Idx], y: &[Idx]) -> Vec<(Mono, Q)> {
    let p = x.len();
    let mut out = Vec::new();
    for (j, &yj) in y.iter().enumerate() {
        // (−1)^{(p−1) j} with j counted from 0
        let sj = p % 2 == 0 && j % 2 == 1;
        for (i, &xi) in x.iter().enumerate() {
            for (l, c) in lie.bracket(xi, yj) {
                let mut word = Vec::with_capacity(p + y.len() - 1);
                word.extend_from_slice(&y[..j]);
                word.extend_from_slice(&x[..i]);
                word.push(*l);
                word.extend_from_slice(&x[i + 1..]);
                word.extend_from_slice(&y[j + 1..]);
                if let Some((odd, w)) = wedge_canon(&word) {
                    out.push((w, if odd ^ sj { -c } else { c.clone() }));
                }
            }
        }
    }
    out
}

/// The degree −1 bracket extending the Lie bracket as a biderivation,
/// trivial on S𝔥 factors. No invariance is required here; see
/// [`bracket_invariant`].
pub fn bracket(lie: &LieData, a: &SparseElement, b: &SparseElement) -> Result<SparseElement> {
    expect_ws(a)?;
    expect_ws(b)?;
    let mut out = SparseElement::zero(Space::WedgeSym);
    for (ka, va) in a.terms() {
        for (kb, vb) in b.terms() {
            let terms = schouten_mono(lie, &ka[0], &kb[0]);
            if terms.is_empty() {
                continue;
            }
            let c = va * vb;
            let s = sym_merge(&ka[1], &kb[1]);
            for (w, x) in terms {
                out.add_term(vec![w, s.clone()], &c.scale(&x));
            }
        }
    }
    Ok(out)
}

/// Bracket restricted to 𝔥-invariant arguments.
pub fn bracket_invariant(u: &Uea, a: &SparseElement, b: &SparseElement) -> Result<SparseElement> {
    require_invariant(u, a, "bracket argument")?;
    require_invariant(u, b, "bracket argument")?;
    bracket(u, a, b)
}

/// Maurer-Cartan form of the CDYBE: dρ + ½[ρ,ρ].
pub fn cdybe_residual(u: &Uea, rho: &SparseElement) -> Result<SparseElement> {
    expect_ws(rho)?;
    require_invariant(u, rho, "r-matrix")?;
    mc_residual(u, rho)
}

/// dα + ½[α,α] without the invariance check.
pub fn mc_residual(lie: &LieData, a: &SparseElement) -> Result<SparseElement> {
    let half = Q::new(1.into(), 2.into());
    differential_d(a)?.add(&bracket(lie, a, a)?.scale(&half))
}

/// Terms of a 2-tensor placed into two of three slots.
fn place(t: &SparseElement, slots: (usize, usize)) -> Vec<([Option<Idx>; 3], Mono, crate::hseries::HSeries)> {
    t.terms()
        .iter()
        .map(|(k, c)| {
            let mut w = [None; 3];
            w[slots.0] = Some(k[0][0]);
            w[slots.1] = Some(k[0][1]);
            (w, k[1].clone(), c.clone())
        })
        .collect()
}

/// CYB(r) − Alt(dr) evaluated on 𝔤^{⊗3} ⊗ S𝔥 through x∧y ↦ x⊗y − y⊗x.
/// Keys are `[word, sym]` with the word in tensor order.
pub fn cdybe_literal(lie: &LieData, rho: &SparseElement) -> Result<SparseElement> {
    expect_ws(rho)?;
    // r as Σ c (x⊗y) ⊗ s, keys [word, sym]
    let mut r = SparseElement::zero(Space::Formal);
    for (k, c) in rho.terms() {
        if k[0].len() != 2 {
            return Err(Error::GradingMismatch { grading: "exterior degree 2".into(), space: "r-matrix".into() });
        }
        let w = SparseElement::rational_term(Space::Wedge, vec![k[0].clone()], Q::one());
        for (tk, tc) in wedge2_as_tensor(&w)?.terms() {
            r.add_term(vec![tk[0].clone(), k[1].clone()], &c.scale(&tc.coeff(0)));
        }
    }
    let mut out = SparseElement::zero(Space::Formal);
    // [r^{ab}, r^{cd}] where the two placements share exactly one slot
    let pairs = [((0, 1), (0, 2)), ((0, 1), (1, 2)), ((0, 2), (1, 2))];
    for (pa, pb) in pairs {
        for (wa, sa, ca) in place(&r, pa) {
            for (wb, sb, cb) in place(&r, pb) {
                let shared = (0..3).find(|&i| wa[i].is_some() && wb[i].is_some()).unwrap();
                let c = &ca * &cb;
                for (l, x) in lie.bracket(wa[shared].unwrap(), wb[shared].unwrap()) {
                    let word: Mono =
                        (0..3).map(|i| if i == shared { *l } else { wa[i].or(wb[i]).unwrap() }).collect();
                    out.add_term(vec![word, sym_merge(&sa, &sb)], &c.scale(x));
                }
            }
        }
    }
    // − Σ_i (h_i^1 ∂_i r^{23} − h_i^2 ∂_i r^{13} + h_i^3 ∂_i r^{12})
    for (k, c) in r.terms() {
        for (x, mult, rest) in partials(&k[1]) {
            let m = Q::from_integer((mult as i64).into());
            let (a, b) = (k[0][0], k[0][1]);
            for (word, sg) in [(vec![x, a, b], -Q::one()), (vec![a, x, b], Q::one()), (vec![a, b, x], -Q::one())] {
                out.add_term(vec![word, rest.clone()], &c.scale(&(&m * &sg)));
            }
        }
    }
    Ok(out)
}

/// ∧³𝔤⊗S𝔥 → 𝔤^{⊗3}⊗S𝔥, x∧y∧z ↦ Σ_σ sgn(σ) x_σ⊗y_σ⊗z_σ, in the layout of
/// [`cdybe_literal`].
pub fn wedge3_as_tensor(a: &SparseElement) -> Result<SparseElement> {
    expect_ws(a)?;
    let perms: [([usize; 3], bool); 6] = [
        ([0, 1, 2], false),
        ([0, 2, 1], true),
        ([1, 0, 2], true),
        ([1, 2, 0], false),
        ([2, 0, 1], false),
        ([2, 1, 0], true),
    ];
    Ok(a.flat_map(Space::Formal, |k| {
        if k[0].len() != 3 {
            return vec![];
        }
        perms
            .iter()
            .map(|(p, odd)| (vec![p.iter().map(|&i| k[0][i]).collect(), k[1].clone()], sign(*odd)))
            .collect()
    }))
}

/// Both forms of the CDYBE residual and whether they agree under the
/// tensor embedding.
pub fn cdybe_residual_both(u: &Uea, rho: &SparseElement) -> Result<(SparseElement, SparseElement, bool)> {
    let mc = cdybe_residual(u, rho)?;
    let lit = cdybe_literal(u, rho)?;
    let agree = wedge3_as_tensor(&mc)? == lit;
    Ok((mc, lit, agree))
}

/// p₁ = (∧p) ⊗ ε, landing in ∧𝔪 (as `Space::Wedge`).
pub fn p1_project(lie: &LieData, a: &SparseElement) -> Result<SparseElement> {
    expect_ws(a)?;
    Ok(a.flat_map(Space::Wedge, |k| {
        if k[1].is_empty() && k[0].iter().all(|x| !lie.is_h(*x)) {
            vec![(vec![k[0].clone()], Q::one())]
        } else {
            vec![]
        }
    }))
}

/// ∧𝔪 → ∧𝔤⊗S𝔥, w ↦ w⊗1.
pub fn include_wedge(a: &SparseElement) -> Result<SparseElement> {
    if a.space() != Space::Wedge {
        return Err(mismatch(Space::Wedge, a.space()));
    }
    Ok(a.flat_map(Space::WedgeSym, |k| vec![(vec![k[0].clone(), vec![]], Q::one())]))
}

/// Homotopy δ with δd + dδ = id − p₁ and δ² = 0. Writing a wedge
/// monomial as (𝔪-part)∧(𝔥-part) with p letters in the 𝔪-part,
/// δ(m∧x₁…xₙ⊗s) = −(−1)^p m ∧ (1/(n+|s|)) Σᵢ (−1)^{i−1} x₁…x̂ᵢ…xₙ ⊗ s·xᵢ.
pub fn delta_homotopy(lie: &LieData, a: &SparseElement) -> Result<SparseElement> {
    expect_ws(a)?;
    Ok(a.flat_map(Space::WedgeSym, |k| delta_key(lie, k)))
}

fn delta_key(lie: &LieData, k: &Key) -> Vec<(Key, Q)> {
    let (w, s) = (&k[0], &k[1]);
    let m: Mono = w.iter().copied().filter(|x| !lie.is_h(*x)).collect();
    let hs: Mono = w.iter().copied().filter(|x| lie.is_h(*x)).collect();
    let n = hs.len();
    if n == 0 {
        return vec![];
    }
    // sign of w → m ∧ hs
    let mut odd = false;
    for (i, &x) in w.iter().enumerate() {
        if lie.is_h(x) {
            odd ^= w[i + 1..].iter().filter(|y| !lie.is_h(**y)).count() % 2 == 1;
        }
    }
    let p = m.len();
    // −(−1)^p
    odd ^= p % 2 == 0;
    let weight = Q::from_integer(((n + s.len()) as i64).into()).recip();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rest = hs.clone();
        let x = rest.remove(i);
        let mut word = m.clone();
        word.extend_from_slice(&rest);
        let (o2, wc) = wedge_canon(&word).expect("distinct letters");
        let sg = odd ^ o2 ^ (i % 2 == 1);
        let mut ns = s.clone();
        ns.push(x);
        out.push((vec![wc, sym_canon(&ns)], if sg { -weight.clone() } else { weight.clone() }));
    }
    out
}

/// Components of S𝔥-degree ≤ d.
pub fn truncate_sh(a: &SparseElement, d: usize) -> SparseElement {
    a.filter(|k| k[1].len() <= d)
}

/// Components of S𝔥-degree < d.
pub fn below_sh(a: &SparseElement, d: usize) -> SparseElement {
    a.filter(|k| k[1].len() < d)
}

pub fn is_zero_below(a: &SparseElement, d: usize) -> bool {
    a.terms().keys().all(|k| k[1].len() >= d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hseries::q;
    use crate::invariant::{enumerate, invariant_coords, SpaceDescriptor};
    use crate::uea::tests::sl2_uea;

    fn ws(w: &[Idx], s: &[Idx], c: i64) -> SparseElement {
        SparseElement::rational_term(Space::WedgeSym, vec![w.to_vec(), s.to_vec()], q(c))
    }

    #[test]
    fn d_examples() {
        assert_eq!(differential_d(&ws(&[], &[1], 1)).unwrap(), ws(&[1], &[], -1));
        assert!(differential_d(&ws(&[0, 2], &[], 1)).unwrap().is_zero());
    }

    #[test]
    fn bracket_examples() {
        let u = sl2_uea();
        assert_eq!(bracket(&u, &ws(&[0], &[], 1), &ws(&[2], &[], 1)).unwrap(), ws(&[1], &[], 1));
        assert!(bracket(&u, &ws(&[1], &[], 1), &ws(&[0, 2], &[], 1)).unwrap().is_zero());
        // [e∧f, e∧f] = 2 e∧h∧f ordering e<h<f: h∧e∧f = −e∧h∧f
        let ef = ws(&[0, 2], &[], 1);
        assert_eq!(bracket(&u, &ef, &ef).unwrap(), ws(&[0, 1, 2], &[], -2));
    }

    #[test]
    fn delta_of_h() {
        let u = sl2_uea();
        assert_eq!(delta_homotopy(&u, &ws(&[1], &[], 1)).unwrap(), ws(&[], &[1], -1));
        assert!(delta_homotopy(&u, &ws(&[0, 2], &[], 1)).unwrap().is_zero());
    }

    #[test]
    fn p1_examples() {
        let u = sl2_uea();
        let w = |m: &[Idx]| SparseElement::rational_term(Space::Wedge, vec![m.to_vec()], q(1));
        assert_eq!(p1_project(&u, &ws(&[0, 2], &[], 1)).unwrap(), w(&[0, 2]));
        assert!(p1_project(&u, &ws(&[0, 1], &[], 1)).unwrap().is_zero());
        assert!(p1_project(&u, &ws(&[0, 2], &[1], 1)).unwrap().is_zero());
    }

    #[test]
    fn homotopy_identity_on_all_basis_elements() {
        let u = sl2_uea();
        for k in 0..=3 {
            for l in 0..=3 {
                let b = enumerate(&u, &SpaceDescriptor::WedgeSym { k, l });
                for key in &b.keys {
                    let x = SparseElement::rational_term(Space::WedgeSym, key.clone(), q(1));
                    let lhs = delta_homotopy(&u, &differential_d(&x).unwrap())
                        .unwrap()
                        .add(&differential_d(&delta_homotopy(&u, &x).unwrap()).unwrap())
                        .unwrap();
                    let rhs = x.sub(&include_wedge(&p1_project(&u, &x).unwrap()).unwrap()).unwrap();
                    assert_eq!(lhs, rhs, "{key:?}");
                    assert!(delta_homotopy(&u, &delta_homotopy(&u, &x).unwrap()).unwrap().is_zero());
                }
            }
        }
    }

    #[test]
    fn literal_and_dgla_forms_agree() {
        let u = sl2_uea();
        for rho in [ws(&[0, 2], &[], 1), ws(&[0, 2], &[1, 1], 3).add(&ws(&[0, 2], &[1], -2)).unwrap()] {
            let (_, _, agree) = cdybe_residual_both(&u, &rho).unwrap();
            assert!(agree);
        }
    }

    #[test]
    fn leibniz_needs_invariance() {
        let u = sl2_uea();
        // invariant pairs
        let mut inv = Vec::new();
        for k in 0..=3 {
            for l in 0..=2 {
                let b = enumerate(&u, &SpaceDescriptor::WedgeSym { k, l });
                for v in invariant_coords(&u, &b).unwrap() {
                    inv.push((k, b.element(&v)));
                }
            }
        }
        for (k, a) in &inv {
            for (_, b) in &inv {
                let lhs = differential_d(&bracket(&u, a, b).unwrap()).unwrap();
                let r1 = bracket(&u, &differential_d(a).unwrap(), b).unwrap();
                let r2 = bracket(&u, a, &differential_d(b).unwrap()).unwrap();
                let r2 = if (k + 1) % 2 == 1 { r2.neg() } else { r2 };
                assert_eq!(lhs, r1.add(&r2).unwrap());
            }
        }
        // e ⊗ h and f are not invariant
        let a = ws(&[0], &[1], 1);
        let b = ws(&[2], &[], 1);
        let lhs = differential_d(&bracket(&u, &a, &b).unwrap()).unwrap();
        let rhs = bracket(&u, &differential_d(&a).unwrap(), &b)
            .unwrap()
            .add(&bracket(&u, &a, &differential_d(&b).unwrap()).unwrap())
            .unwrap();
        assert_ne!(lhs, rhs);
    }
}
