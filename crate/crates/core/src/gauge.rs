//! Gauge actions on algebraic and formal twists, the classical affine
//! action on Maurer-Cartan elements, equivalence testing and the classical
//! reduction to invariant bivectors on 𝔪.
//!
//! Gauge elements are truncated series: Q ∈ (U𝔤⊗U𝔥)^𝔥[[ħ]] as an arity-1
//! `Adt` element, T ∈ U𝔤⊗S𝔥[[ħ]] as an arity-1 `Formal` element and q as
//! a `WedgeSym` element of exterior degree 1.

use std::sync::Arc;

use crate::adt::{
    dup, invariant_cocycles, kappa_solve, kappa_solve_affine, pad, with_prec,
};
use crate::cdyb::{self, delta_homotopy, differential_d, p1_project};
use crate::element::{mismatch, SparseElement, Space};
use crate::error::{Error, Result};
use crate::hseries::{factorial, Q};
use crate::invariant::require_invariant;
use crate::lie::Mode;
use crate::linf::{invert_contraction, mc_transport, Contraction, Dgla, WedgeMDgla};
use crate::quantizer::{formal_product, shift_argument, weight_truncate};
use crate::uea::Uea;

fn algebraic_unit() -> SparseElement {
    SparseElement::unit(Space::Adt, 2)
}

/// Inverse of 1 + Y with Y of positive ħ-valuation, modulo ħ^{n+1}.
fn inverse_adt(u: &Uea, x: &SparseElement, n: usize) -> Result<SparseElement> {
    let slots = x.slots().ok_or_else(|| Error::NotInvertible("mixed arities".into()))?;
    let one = SparseElement::unit(Space::Adt, slots);
    if x.hbar_layer(0) != one.hbar_layer(0) {
        return Err(Error::NotInvertible("constant term is not 1".into()));
    }
    let y = with_prec(&x.sub(&one)?.neg(), n);
    let mut out = one.clone();
    let mut pow = one;
    for _ in 1..=n {
        pow = u.slotwise(&pow, &y)?.truncate(n);
        if pow.is_zero() {
            break;
        }
        out.add_assign(&pow)?;
    }
    Ok(out.truncate(n))
}

/// K′ = Q^{12,3} K (Q^{2,3})⁻¹ (Q^{1,23})⁻¹ modulo ħ^{n+1}.
pub fn gauge_act_algebraic(u: &Uea, q: &SparseElement, k: &SparseElement, n: usize) -> Result<SparseElement> {
    if q.space() != Space::Adt || q.arity() != Some(1) {
        return Err(Error::SpaceMismatch { expected: "an arity-1 gauge element".into(), got: format!("{:?}", q.arity()) });
    }
    let qp = with_prec(q, n);
    let left = dup(&qp, 0);
    let mid = inverse_adt(u, &pad(&qp), n)?;
    let right = inverse_adt(u, &dup(&qp, 1), n)?;
    let kp = with_prec(k, n);
    let a = u.slotwise(&left, &kp)?;
    let b = u.slotwise(&with_prec(&a, n), &with_prec(&mid, n))?;
    Ok(u.slotwise(&with_prec(&b, n), &with_prec(&right, n))?.truncate(n))
}

/// The composite gauge acting first by `q` then by `q2`.
pub fn compose_algebraic(u: &Uea, q2: &SparseElement, q: &SparseElement, n: usize) -> Result<SparseElement> {
    Ok(u.slotwise(&with_prec(q2, n), &with_prec(q, n))?.truncate(n))
}

/// Inverse of 1 + Y in U𝔤^{⊗k}⊗S𝔥[[ħ]] with Y of positive weight.
fn inverse_formal(u: &Uea, x: &SparseElement, n: usize) -> Result<SparseElement> {
    let slots = x.slots().ok_or_else(|| Error::NotInvertible("mixed arities".into()))?;
    let one = SparseElement::unit(Space::Formal, slots);
    let y = weight_truncate(&x.sub(&one)?, n).neg();
    if !weight_truncate(&y, 0).is_zero() {
        return Err(Error::NotInvertible("weight-zero part is not 1".into()));
    }
    let mut out = one.clone();
    let mut pow = one;
    for _ in 1..=n {
        pow = weight_truncate(&formal_product(u, &pow, &y, n)?, n);
        if pow.is_zero() {
            break;
        }
        out.add_assign(&pow)?;
    }
    Ok(out)
}

fn formal_pad(t: &SparseElement) -> SparseElement {
    t.flat_map(Space::Formal, |k| {
        let mut nk = vec![Vec::new()];
        nk.extend(k.iter().cloned());
        vec![(nk, Q::from_integer(1.into()))]
    })
}

/// J′ = T^{12} ⋆ J ⋆ (T²)⁻¹ ⋆ T¹(λ + ħh²)⁻¹ in weight ≤ n.
pub fn gauge_act_formal(u: &Uea, t: &SparseElement, j: &SparseElement, n: usize) -> Result<SparseElement> {
    if t.space() != Space::Formal || t.arity() != Some(1) {
        return Err(Error::SpaceMismatch { expected: "an arity-1 formal gauge".into(), got: format!("{:?}", t.arity()) });
    }
    let t = weight_truncate(t, n);
    let w = |e: Result<SparseElement>| e.map(|e| weight_truncate(&e, n));
    let left = w(Ok(dup(&t, 0)))?;
    let mid = inverse_formal(u, &formal_pad(&t), n)?;
    let right = inverse_formal(u, &shift_argument(u, &t, n)?, n)?;
    let a = w(formal_product(u, &left, &weight_truncate(j, n), n))?;
    let b = w(formal_product(u, &a, &mid, n))?;
    w(formal_product(u, &b, &right, n))
}

fn expect_vector(q: &SparseElement) -> Result<()> {
    if q.space() != Space::WedgeSym {
        return Err(mismatch(Space::WedgeSym, q.space()));
    }
    if q.terms().keys().any(|k| k[0].len() != 1) {
        return Err(Error::SpaceMismatch { expected: "exterior degree 1".into(), got: "higher exterior degree".into() });
    }
    Ok(())
}

/// q·α = dq + [q, α]. On an r-matrix ρ_ħ this is −Σ hᵢ∧∂q/∂λⁱ + [q, ρ_ħ],
/// since d = −Σ hᵢ∧∂/∂λⁱ.
pub fn classical_gauge_inf(u: &Uea, q: &SparseElement, a: &SparseElement) -> Result<SparseElement> {
    expect_vector(q)?;
    require_invariant(u, q, "gauge generator")?;
    differential_d(q)?.add(&cdyb::bracket(u, q, a)?)
}

/// exp(q)·α = Σₘ ad_q^m(α)/m! + Σ_{m≥1} ad_q^{m−1}(dq)/m! modulo ħ^{n+1}.
pub fn classical_gauge_act(u: &Uea, q: &SparseElement, a: &SparseElement, n: usize) -> Result<SparseElement> {
    expect_vector(q)?;
    require_invariant(u, q, "gauge generator")?;
    if q.hbar_valuation() == Some(0) {
        return Err(Error::NotInvertible("gauge generator must vanish modulo hbar".into()));
    }
    let qp = with_prec(q, n);
    let mut out = a.truncate(n);
    let mut ad = with_prec(a, n);
    let mut aff = differential_d(&qp)?.truncate(n);
    for m in 1..=n {
        let fm = factorial(m).recip();
        ad = cdyb::bracket(u, &qp, &ad)?.truncate(n);
        out.add_assign(&ad.scale(&fm))?;
        out.add_assign(&aff.scale(&fm))?;
        aff = cdyb::bracket(u, &qp, &with_prec(&aff, n))?.truncate(n);
        if ad.is_zero() && aff.is_zero() {
            break;
        }
    }
    Ok(out.truncate(n))
}

/// Result of an equivalence test.
#[derive(Clone, Debug, PartialEq)]
pub enum GaugeOutcome {
    Equivalent(SparseElement),
    /// The order at which no gauge correction exists and the right-hand
    /// side that is not a coboundary.
    NotEquivalent { order: usize, obstruction: SparseElement },
}

/// Order-o right-hand side b(Q_o) = [K^{Q_{<o}}]_o − K′_o.
fn gauge_rhs(u: &Uea, q: &SparseElement, k: &SparseElement, k2: &SparseElement, o: usize) -> Result<SparseElement> {
    let cur = gauge_act_algebraic(u, q, k, o)?;
    let diff = cur.sub(&k2.truncate(o))?;
    if (0..o).any(|i| !diff.hbar_layer(i).is_zero()) {
        return Err(Error::NoSolution(format!("lower orders disagree at order {o}")));
    }
    Ok(diff.hbar_layer(o))
}

fn leg_bound(z: &SparseElement) -> usize {
    z.terms().keys().map(|k| k.iter().map(|m| m.len()).sum::<usize>()).max().unwrap_or(0)
}

/// Solve K′ = Q·K for Q order by order. A stuck order re-opens the
/// previous one by arity-1 cocycles before giving up.
pub fn find_gauge(u: &Uea, k: &SparseElement, k2: &SparseElement, n: usize) -> Result<GaugeOutcome> {
    let mut orders: Vec<SparseElement> = vec![algebraic_unit()];
    let assemble = |orders: &[SparseElement]| {
        let mut q = algebraic_unit();
        for (i, x) in orders.iter().enumerate().skip(1) {
            q.add_assign(&x.shift_hbar(i)).expect("adt");
        }
        q
    };
    for o in 1..=n {
        let z = gauge_rhs(u, &assemble(&orders), k, k2, o)?;
        match kappa_solve(u, &z, leg_bound(&z)) {
            Ok(x) => orders.push(x),
            Err(Error::NoSolution(_)) if o >= 2 => {
                let hi = leg_bound(&z);
                let cocycles = invariant_cocycles(u, 1, 0, hi, hi)?;
                let mut extras = Vec::new();
                for c in &cocycles {
                    let mut t = orders.clone();
                    t[o - 1] = t[o - 1].add(c)?;
                    extras.push(gauge_rhs(u, &assemble(&t), k, k2, o)?.sub(&z)?);
                }
                match kappa_solve_affine(u, &z, &extras, hi) {
                    Ok((_, cs)) => {
                        for (c, zc) in cs.iter().zip(&cocycles) {
                            orders[o - 1].add_assign(&zc.scale(c))?;
                        }
                        // the order-o solve is recomputed on the repaired prefix
                        let z = gauge_rhs(u, &assemble(&orders), k, k2, o)?;
                        orders.push(kappa_solve(u, &z, leg_bound(&z))?);
                    }
                    Err(_) => return Ok(GaugeOutcome::NotEquivalent { order: o, obstruction: z }),
                }
            }
            Err(Error::NoSolution(_)) => return Ok(GaugeOutcome::NotEquivalent { order: o, obstruction: z }),
            Err(e) => return Err(e),
        }
    }
    let q = assemble(&orders);
    if gauge_act_algebraic(u, &q, k, n)? != k2.truncate(n) {
        return Err(Error::NoSolution("recomputed gauge action differs from the target".into()));
    }
    Ok(GaugeOutcome::Equivalent(q))
}

impl GaugeOutcome {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, GaugeOutcome::Equivalent(_))
    }
}

/// Output of the classical reduction.
#[derive(Clone, Debug)]
pub struct Reduction {
    /// π ∈ ħ(∧²𝔪)^𝔥[[ħ]], as a `Wedge` element
    pub pi: SparseElement,
    /// gauge generators applied in order
    pub gauges: Vec<SparseElement>,
    /// exp(q_N)⋯exp(q_1)·α, equal to the transport of π
    pub straightened: SparseElement,
}

/// Straighten α against the transport of π along 𝒬₁ one order at a time,
/// killing the d-exact part of the discrepancy with q = −ħᵏδ(·).
pub fn reduce_classical(u: Arc<Uea>, alpha: &SparseElement, n: usize) -> Result<Reduction> {
    if u.mode() != Mode::Reductive {
        return Err(Error::Decomposition("classical reduction needs a reductive pair".into()));
    }
    let r = cdyb::mc_residual(&u, &with_prec(alpha, n))?.truncate(n);
    if !r.is_zero() {
        return Err(Error::NotMaurerCartan(format!("{} residual terms", r.len())));
    }
    let inv = invert_contraction(&Contraction::classical(u.clone()), n.max(1));
    let mut pi = SparseElement::zero(Space::Wedge);
    let mut cur = alpha.truncate(n);
    let mut gauges = Vec::new();
    for k in 1..=n {
        let beta = if pi.is_zero() {
            SparseElement::zero(Space::WedgeSym)
        } else {
            mc_transport(&inv.quasi_inverse, &pi, k)?
        };
        let diff = cur.truncate(k).sub(&beta)?;
        if (0..k).any(|i| !diff.hbar_layer(i).is_zero()) {
            return Err(Error::StraighteningStalled { order: k, detail: "lower orders drifted".into() });
        }
        let dk = diff.hbar_layer(k);
        if !differential_d(&dk)?.is_zero() {
            return Err(Error::StraighteningStalled { order: k, detail: format!("discrepancy is not closed ({} terms)", dk.len()) });
        }
        pi.add_assign(&p1_project(&u, &dk)?.shift_hbar(k))?;
        let q = delta_homotopy(&u, &dk)?.neg().shift_hbar(k);
        if !q.is_zero() {
            cur = classical_gauge_act(&u, &q, &cur, n)?;
            gauges.push(q);
        }
    }
    let target = mc_transport(&inv.quasi_inverse, &pi, n)?;
    if cur != target {
        return Err(Error::StraighteningStalled { order: n, detail: "result differs from the transport of pi".into() });
    }
    let wm = WedgeMDgla(u.clone());
    let pp = with_prec(&pi, n);
    if !wm.bracket(&pp, &pp)?.truncate(n).is_zero() {
        return Err(Error::StraighteningStalled { order: n, detail: "[pi, pi]_m does not vanish".into() });
    }
    Ok(Reduction { pi, gauges, straightened: cur })
}
