//! Truncated L∞ machinery between dglas, in the shifted (décalage)
//! convention: on 𝔤[1] the structure maps are Q₁(x) = −dx and
//! Q₂(x, y) = (−1)^{|x|}[x, y], both graded symmetric in the shifted
//! degree |x| − 1. A morphism is a tower of graded symmetric maps
//! Fₙ : Sⁿ(𝔤[1]) → 𝔥[1] of degree 0. With this convention an element α
//! of degree 1 is Maurer–Cartan iff Q₁α + ½Q₂(α, α) = 0.

use std::sync::Arc;

use crate::adt::{self, dgla_differential, gerstenhaber_raw, include_um, p2_project, NHomotopy};
use crate::cdyb;
use crate::element::{SparseElement, Space};
use crate::error::{Error, Result};
use crate::hseries::{factorial, Q};
use crate::uea::Uea;

/// A differential graded Lie algebra given by its operations.
pub trait Dgla: Send + Sync {
    fn space(&self) -> Space;
    /// Degree of a homogeneous element.
    fn degree_of_key(&self, key: &crate::element::Key) -> i64;
    fn d(&self, x: &SparseElement) -> Result<SparseElement>;
    fn bracket(&self, x: &SparseElement, y: &SparseElement) -> Result<SparseElement>;
    /// Filtration degree used for bookkeeping.
    fn filtration(&self, _x: &SparseElement) -> usize {
        0
    }
}

/// Homogeneous components of an element, keyed by degree.
pub fn homogeneous_parts(g: &dyn Dgla, x: &SparseElement) -> Vec<(i64, SparseElement)> {
    let mut out: std::collections::BTreeMap<i64, SparseElement> = Default::default();
    for (k, c) in x.terms() {
        out.entry(g.degree_of_key(k)).or_insert_with(|| SparseElement::zero(x.space())).add_term(k.clone(), c);
    }
    out.into_iter().collect()
}

/// Degree of a homogeneous nonzero element (0 for zero).
pub fn degree(g: &dyn Dgla, x: &SparseElement) -> i64 {
    x.terms().keys().next().map_or(0, |k| g.degree_of_key(k))
}

fn odd(n: i64) -> bool {
    n.rem_euclid(2) == 1
}

/// Q₁ on 𝔤[1].
pub fn q1(g: &dyn Dgla, x: &SparseElement) -> Result<SparseElement> {
    Ok(g.d(x)?.neg())
}

/// Q₂ on 𝔤[1]; `dx` is the (unshifted) degree of `x`.
pub fn q2(g: &dyn Dgla, dx: i64, x: &SparseElement, y: &SparseElement) -> Result<SparseElement> {
    let b = g.bracket(x, y)?;
    Ok(if odd(dx) { b.neg() } else { b })
}

/// Classical side (∧𝔤 ⊗ S𝔥)^𝔥 with d and the Schouten bracket.
pub struct ClassicalDgla(pub Arc<Uea>);

impl Dgla for ClassicalDgla {
    fn space(&self) -> Space {
        Space::WedgeSym
    }
    fn degree_of_key(&self, key: &crate::element::Key) -> i64 {
        key[0].len() as i64 - 1
    }
    fn d(&self, x: &SparseElement) -> Result<SparseElement> {
        cdyb::differential_d(x)
    }
    fn bracket(&self, x: &SparseElement, y: &SparseElement) -> Result<SparseElement> {
        cdyb::bracket(&self.0, x, y)
    }
    fn filtration(&self, x: &SparseElement) -> usize {
        x.terms().keys().map(|k| k[1].len()).max().unwrap_or(0)
    }
}

/// (∧𝔪)^𝔥 with zero differential and [x, y]_𝔪 = p₁[x, y].
pub struct WedgeMDgla(pub Arc<Uea>);

impl Dgla for WedgeMDgla {
    fn space(&self) -> Space {
        Space::Wedge
    }
    fn degree_of_key(&self, key: &crate::element::Key) -> i64 {
        key[0].len() as i64 - 1
    }
    fn d(&self, _x: &SparseElement) -> Result<SparseElement> {
        Ok(SparseElement::zero(Space::Wedge))
    }
    fn bracket(&self, x: &SparseElement, y: &SparseElement) -> Result<SparseElement> {
        let b = cdyb::bracket(&self.0, &cdyb::include_wedge(x)?, &cdyb::include_wedge(y)?)?;
        cdyb::p1_project(&self.0, &b)
    }
}

/// Quantum side 𝔤₂[1] = (T U𝔤 ⊗ U𝔥)^𝔥 with D = [m, ·]_G and [·,·]_G.
pub struct QuantumDgla(pub Arc<Uea>);

impl Dgla for QuantumDgla {
    fn space(&self) -> Space {
        Space::Adt
    }
    fn degree_of_key(&self, key: &crate::element::Key) -> i64 {
        key.len() as i64 - 2
    }
    fn d(&self, x: &SparseElement) -> Result<SparseElement> {
        dgla_differential(&self.0, x)
    }
    fn bracket(&self, x: &SparseElement, y: &SparseElement) -> Result<SparseElement> {
        gerstenhaber_raw(&self.0, x, y)
    }
    fn filtration(&self, x: &SparseElement) -> usize {
        x.uh_filtration()
    }
}

/// (T U𝔪)^𝔥 with the structure transported through p₂ and its section.
pub struct UmDgla(pub Arc<Uea>);

impl Dgla for UmDgla {
    fn space(&self) -> Space {
        Space::UgTensor
    }
    fn degree_of_key(&self, key: &crate::element::Key) -> i64 {
        key.len() as i64 - 1
    }
    fn d(&self, x: &SparseElement) -> Result<SparseElement> {
        p2_project(&self.0, &dgla_differential(&self.0, &include_um(x)?)?)
    }
    fn bracket(&self, x: &SparseElement, y: &SparseElement) -> Result<SparseElement> {
        p2_project(&self.0, &gerstenhaber_raw(&self.0, &include_um(x)?, &include_um(y)?)?)
    }
}

pub type LinMap = Arc<dyn Fn(&SparseElement) -> Result<SparseElement> + Send + Sync>;

/// (proj, incl, H) with proj∘incl = id and DH + HD = id on ker proj, D the
/// dgla differential of `big`.
#[derive(Clone)]
pub struct Contraction {
    pub big: Arc<dyn Dgla>,
    pub small: Arc<dyn Dgla>,
    pub proj: LinMap,
    pub incl: LinMap,
    pub homotopy: LinMap,
}

impl Contraction {
    /// (p₁, inclusion, δ) between 𝔤₁ and (∧𝔪)^𝔥.
    pub fn classical(u: Arc<Uea>) -> Self {
        let (a, c) = (u.clone(), u.clone());
        Contraction {
            big: Arc::new(ClassicalDgla(u.clone())),
            small: Arc::new(WedgeMDgla(u)),
            proj: Arc::new(move |x| cdyb::p1_project(&a, x)),
            incl: Arc::new(cdyb::include_wedge),
            homotopy: Arc::new(move |x| cdyb::delta_homotopy(&c, x)),
        }
    }

    /// (p₂, inclusion, ±κ) between 𝔤₂ and (T U𝔪)^𝔥.
    pub fn quantum(u: Arc<Uea>) -> Self {
        let kappa = Arc::new(NHomotopy::new(u.clone()));
        let a = u.clone();
        Contraction {
            big: Arc::new(QuantumDgla(u.clone())),
            small: Arc::new(UmDgla(u)),
            proj: Arc::new(move |x| p2_project(&a, x)),
            incl: Arc::new(include_um),
            homotopy: Arc::new(move |x| {
                // D = (−1)^{k−1} b on arity k, so H = (−1)^k κ
                let mut out = SparseElement::zero(Space::Adt);
                for (ar, part) in adt::by_arity(x) {
                    let h = kappa.apply(&part)?;
                    out.add_assign(&if ar % 2 == 1 { h.neg() } else { h })?;
                }
                Ok(out)
            }),
        }
    }

    /// Checks proj∘incl = id on `small_samples` and DH + HD = id on the
    /// kernel parts of `big_samples`.
    pub fn check(&self, small_samples: &[SparseElement], big_samples: &[SparseElement]) -> Result<()> {
        for y in small_samples {
            if (self.proj)(&(self.incl)(y)?)? != *y {
                return Err(Error::ContractFailure("proj∘incl differs from the identity".into()));
            }
        }
        for x in big_samples {
            let n = x.sub(&(self.incl)(&(self.proj)(x)?)?)?;
            let lhs = self.big.d(&(self.homotopy)(&n)?)?.add(&(self.homotopy)(&self.big.d(&n)?)?)?;
            if lhs != n {
                return Err(Error::ContractFailure("DH + HD differs from the identity on ker proj".into()));
            }
        }
        Ok(())
    }
}

/// The big dgla with bracket incl∘[·,·]_small∘proj: the target of ℱ,
/// identified with small ⊕ ker proj through ℱ¹ = id.
pub struct SplitDgla(pub Contraction);

impl Dgla for SplitDgla {
    fn space(&self) -> Space {
        self.0.big.space()
    }
    fn degree_of_key(&self, key: &crate::element::Key) -> i64 {
        self.0.big.degree_of_key(key)
    }
    fn d(&self, x: &SparseElement) -> Result<SparseElement> {
        self.0.big.d(x)
    }
    fn bracket(&self, x: &SparseElement, y: &SparseElement) -> Result<SparseElement> {
        let c = &self.0;
        let b = c.small.bracket(&(c.proj)(x)?, &(c.proj)(y)?)?;
        (c.incl)(&b)
    }
    fn filtration(&self, x: &SparseElement) -> usize {
        self.0.big.filtration(x)
    }
}

/// Structure maps of a tower, called on nonzero homogeneous inputs.
pub trait Structure: Send + Sync {
    fn component(&self, xs: &[SparseElement]) -> Result<SparseElement>;
}

/// An L∞-morphism truncated at `arity_bound`.
#[derive(Clone)]
pub struct Tower {
    pub source: Arc<dyn Dgla>,
    pub target: Arc<dyn Dgla>,
    pub arity_bound: usize,
    maps: Arc<dyn Structure>,
}

/// Sign of the permutation `order` acting on elements with the given
/// shifted-degree parities.
pub fn koszul(parities: &[bool], order: &[usize]) -> bool {
    let mut s = false;
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            if order[a] > order[b] && parities[order[a]] && parities[order[b]] {
                s = !s;
            }
        }
    }
    s
}

fn shifted_parities(g: &dyn Dgla, xs: &[SparseElement]) -> Vec<bool> {
    xs.iter().map(|x| odd(degree(g, x) - 1)).collect()
}

fn pick(xs: &[SparseElement], idx: &[usize]) -> Vec<SparseElement> {
    idx.iter().map(|&i| xs[i].clone()).collect()
}

/// All splittings of 0..n into (I, Iᶜ) with I nonempty, as index lists.
fn subsets(n: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (1..(1u32 << n))
        .map(|mask| {
            let (a, b): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| mask >> i & 1 == 1);
            (a, b)
        })
        .collect()
}

fn concat(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().chain(b).copied().collect()
}

fn signed(neg: bool, e: SparseElement) -> SparseElement {
    if neg {
        e.neg()
    } else {
        e
    }
}

impl Tower {
    pub fn new(source: Arc<dyn Dgla>, target: Arc<dyn Dgla>, arity_bound: usize, maps: Arc<dyn Structure>) -> Self {
        Tower { source, target, arity_bound, maps }
    }

    /// Fₙ(x₁, …, xₙ), extended multilinearly over homogeneous components.
    pub fn apply(&self, xs: &[SparseElement]) -> Result<SparseElement> {
        let mut out = SparseElement::zero(self.target.space());
        if xs.is_empty() || xs.len() > self.arity_bound || xs.iter().any(|x| x.is_zero()) {
            return Ok(out);
        }
        let parts: Vec<Vec<(i64, SparseElement)>> =
            xs.iter().map(|x| homogeneous_parts(self.source.as_ref(), x)).collect();
        let mut choice = vec![0usize; xs.len()];
        loop {
            let args: Vec<SparseElement> = choice.iter().zip(&parts).map(|(&c, p)| p[c].1.clone()).collect();
            out.add_assign(&self.maps.component(&args)?)?;
            let mut i = 0;
            loop {
                if i == choice.len() {
                    return Ok(out);
                }
                choice[i] += 1;
                if choice[i] < parts[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }

    /// Residual of the morphism relation at arity n = xs.len():
    /// F(Q x) − Q'(F x), projected to the target.
    pub fn relation_residual(&self, xs: &[SparseElement]) -> Result<SparseElement> {
        let src = self.source.as_ref();
        let tgt = self.target.as_ref();
        let n = xs.len();
        let par = shifted_parities(src, xs);
        let sdeg: Vec<i64> = xs.iter().map(|x| degree(src, x) - 1).collect();
        let mut lhs = SparseElement::zero(tgt.space());
        for (i_set, rest) in subsets(n) {
            let sign = koszul(&par, &concat(&i_set, &rest));
            let q = match i_set.len() {
                1 => q1(src, &xs[i_set[0]])?,
                2 => q2(src, sdeg[i_set[0]] + 1, &xs[i_set[0]], &xs[i_set[1]])?,
                _ => continue,
            };
            let mut args = vec![q];
            args.extend(pick(xs, &rest));
            lhs.add_assign(&signed(sign, self.apply(&args)?))?;
        }
        let mut rhs = q1(tgt, &self.apply(xs)?)?;
        let half = Q::new(1.into(), 2.into());
        for (i_set, rest) in subsets(n) {
            if rest.is_empty() {
                continue;
            }
            let sign = koszul(&par, &concat(&i_set, &rest));
            let a = self.apply(&pick(xs, &i_set))?;
            let b = self.apply(&pick(xs, &rest))?;
            if a.is_zero() || b.is_zero() {
                continue;
            }
            let da: i64 = i_set.iter().map(|&i| sdeg[i]).sum::<i64>() + 1;
            rhs.add_assign(&signed(sign, q2(tgt, da, &a, &b)?).scale(&half))?;
        }
        lhs.sub(&rhs)
    }
}

/// Outcome of [`check_morphism`].
#[derive(Clone, Debug, Default)]
pub struct MorphismReport {
    /// Number of input tuples checked per arity (index 0 is arity 1).
    pub checked: Vec<usize>,
    /// First failing arity and the size of its residual.
    pub failure: Option<(usize, usize)>,
}

impl MorphismReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(n, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Evaluates the morphism relations on all multisets of `samples` up to
/// `arity`; the residuals must vanish exactly.
pub fn check_morphism(t: &Tower, samples: &[SparseElement], arity: usize) -> Result<MorphismReport> {
    let mut report = MorphismReport::default();
    for n in 1..=arity.min(t.arity_bound) {
        let mut count = 0;
        for idx in multisets(samples.len(), n) {
            let xs = pick(samples, &idx);
            let r = t.relation_residual(&xs)?;
            count += 1;
            if !r.is_zero() && report.failure.is_none() {
                report.failure = Some((n, r.len()));
            }
        }
        report.checked.push(count);
    }
    Ok(report)
}

struct Strict(LinMap, Space);

impl Structure for Strict {
    fn component(&self, xs: &[SparseElement]) -> Result<SparseElement> {
        if xs.len() == 1 {
            (self.0)(&xs[0])
        } else {
            Ok(SparseElement::zero(self.1))
        }
    }
}

/// A strict dgla morphism as a tower (F¹ = f, higher maps zero).
pub fn strict(source: Arc<dyn Dgla>, target: Arc<dyn Dgla>, f: LinMap, arity_bound: usize) -> Tower {
    let space = target.space();
    let f2: LinMap = Arc::new(move |x| Ok(f(x)?.with_space(space)));
    Tower::new(source, target, arity_bound, Arc::new(Strict(f2, space)))
}

pub fn identity(g: Arc<dyn Dgla>, arity_bound: usize) -> Tower {
    strict(g.clone(), g, Arc::new(|x| Ok(x.clone())), arity_bound)
}

/// Set partitions of 0..n, blocks ordered by their least element.
fn partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for i in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for b in 0..p.len() {
                let mut q = p.clone();
                q[b].push(i);
                next.push(q);
            }
            let mut q = p.clone();
            q.push(vec![i]);
            next.push(q);
        }
        out = next;
    }
    out
}

/// Σ over set partitions with ≥ `min_blocks` blocks of
/// ε · outer(inner(x_{B₁}), …, inner(x_{B_k})).
fn substitute(outer: &Tower, inner: &Tower, xs: &[SparseElement], min_blocks: usize) -> Result<SparseElement> {
    let par = shifted_parities(inner.source.as_ref(), xs);
    let mut out = SparseElement::zero(outer.target.space());
    for p in partitions(xs.len()) {
        if p.len() < min_blocks || p.len() > outer.arity_bound {
            continue;
        }
        let order: Vec<usize> = p.iter().flatten().copied().collect();
        let sign = koszul(&par, &order);
        let mut args = Vec::with_capacity(p.len());
        let mut zero = false;
        for b in &p {
            let v = inner.apply(&pick(xs, b))?;
            zero |= v.is_zero();
            args.push(v);
        }
        if zero {
            continue;
        }
        out.add_assign(&signed(sign, outer.apply(&args)?))?;
    }
    Ok(out)
}

struct Composite {
    outer: Tower,
    inner: Tower,
}

impl Structure for Composite {
    fn component(&self, xs: &[SparseElement]) -> Result<SparseElement> {
        substitute(&self.outer, &self.inner, xs, 1)
    }
}

/// G ∘ F.
pub fn compose(g: &Tower, f: &Tower) -> Tower {
    let bound = g.arity_bound.min(f.arity_bound);
    Tower::new(
        f.source.clone(),
        g.target.clone(),
        bound,
        Arc::new(Composite { outer: g.clone(), inner: f.clone() }),
    )
}

/// ℱ: the tower out of `big` with ℱ¹ = id and ℱⁿ = H(Rₙ) for n ≥ 2.
struct Straighten {
    c: Contraction,
    me: std::sync::OnceLock<Tower>,
}

impl Structure for Straighten {
    fn component(&self, xs: &[SparseElement]) -> Result<SparseElement> {
        let me = self.me.get().expect("tower initialized");
        let n = xs.len();
        if n == 1 {
            return Ok(xs[0].clone());
        }
        // Rₙ = Σ ε ℱ_{n−1}(Q₂(x_i, x_j), …) − ½ Σ ε Q₂'(ℱ(x_I), ℱ(x_{Iᶜ}))
        let big = self.c.big.as_ref();
        let tgt = me.target.as_ref();
        let par = shifted_parities(big, xs);
        let sdeg: Vec<i64> = xs.iter().map(|x| degree(big, x) - 1).collect();
        let half = Q::new(1.into(), 2.into());
        let mut r = SparseElement::zero(big.space());
        for (i_set, rest) in subsets(n) {
            let sign = koszul(&par, &concat(&i_set, &rest));
            if i_set.len() == 2 {
                let q = q2(big, sdeg[i_set[0]] + 1, &xs[i_set[0]], &xs[i_set[1]])?;
                let mut args = vec![q];
                args.extend(pick(xs, &rest));
                r.add_assign(&signed(sign, me.apply(&args)?))?;
            }
            if !rest.is_empty() {
                let a = me.apply(&pick(xs, &i_set))?;
                let b = me.apply(&pick(xs, &rest))?;
                if !a.is_zero() && !b.is_zero() {
                    let da: i64 = i_set.iter().map(|&i| sdeg[i]).sum::<i64>() + 1;
                    r.add_assign(&signed(!sign, q2(tgt, da, &a, &b)?).scale(&half))?;
                }
            }
        }
        if !(self.c.proj)(&r)?.is_zero() {
            return Err(Error::ContractFailure(format!("arity-{n} remainder has a component outside ker proj")));
        }
        // shifted homotopy H' = −H
        Ok((self.c.homotopy)(&r)?.neg())
    }
}

struct Inverse {
    f: Tower,
    me: std::sync::OnceLock<Tower>,
}

impl Structure for Inverse {
    fn component(&self, xs: &[SparseElement]) -> Result<SparseElement> {
        if xs.len() == 1 {
            return Ok(xs[0].clone());
        }
        let me = self.me.get().expect("tower initialized");
        Ok(substitute(&self.f, me, xs, 2)?.neg())
    }
}

/// The inverse of a tower whose first map is the identity.
pub fn invert_unipotent(f: &Tower) -> Tower {
    let s = Arc::new(Inverse { f: f.clone(), me: Default::default() });
    let t = Tower::new(f.target.clone(), f.source.clone(), f.arity_bound, s.clone());
    let _ = s.me.set(Tower { maps: s.clone(), ..t.clone() });
    t
}

/// The towers built from a contraction: ℱ (big → split), its inverse ℋ and
/// 𝒬 = ℋ ∘ incl (small → big), with 𝒬¹ = incl.
pub struct Inverted {
    pub straighten: Tower,
    pub inverse: Tower,
    pub quasi_inverse: Tower,
}

pub fn invert_contraction(c: &Contraction, arity_bound: usize) -> Inverted {
    let split: Arc<dyn Dgla> = Arc::new(SplitDgla(c.clone()));
    let s = Arc::new(Straighten { c: c.clone(), me: Default::default() });
    let f = Tower::new(c.big.clone(), split.clone(), arity_bound, s.clone());
    let _ = s.me.set(f.clone());
    let h = invert_unipotent(&f);
    let space = c.big.space();
    let incl = c.incl.clone();
    let inc = strict(c.small.clone(), split, Arc::new(move |x| Ok(incl(x)?.with_space(space))), arity_bound);
    let q = compose(&h, &inc);
    Inverted { straighten: f, inverse: h, quasi_inverse: q }
}

/// Ψ = F + Q'∘V + V∘Q for a degree −1 map V, per the coalgebra extension
/// of V with corestriction V itself.
struct Twisted {
    f: Tower,
    v: LinMap,
    me: std::sync::OnceLock<Tower>,
}

impl Twisted {
    /// Ψₙ − Fₙ.
    fn excess(&self, xs: &[SparseElement]) -> Result<SparseElement> {
        let me = self.me.get().expect("tower initialized");
        Ok(me.apply(xs)?.sub(&self.f.apply(xs)?)?)
    }
}

impl Structure for Twisted {
    fn component(&self, xs: &[SparseElement]) -> Result<SparseElement> {
        let src = self.f.source.as_ref();
        let tgt = self.f.target.as_ref();
        let n = xs.len();
        let mut out = self.f.apply(xs)?;
        if n == 1 {
            out.add_assign(&q1(tgt, &(self.v)(&xs[0])?)?)?;
            out.add_assign(&(self.v)(&q1(src, &xs[0])?)?)?;
            return Ok(out);
        }
        let par = shifted_parities(src, xs);
        let sdeg: Vec<i64> = xs.iter().map(|x| degree(src, x) - 1).collect();
        if n == 2 {
            out.add_assign(&(self.v)(&q2(src, sdeg[0] + 1, &xs[0], &xs[1])?)?)?;
        }
        let half = Q::new(1.into(), 2.into());
        // (1,1)-part of Δ(V(x)) as pairs (first, second, weight)
        for (i_set, rest) in subsets(n) {
            if rest.is_empty() {
                continue;
            }
            let sign = koszul(&par, &concat(&i_set, &rest));
            let s_i: i64 = i_set.iter().map(|&i| sdeg[i]).sum();
            let xi = pick(xs, &i_set);
            let xr = pick(xs, &rest);
            let mut pairs: Vec<(SparseElement, i64, SparseElement, Q)> = Vec::new();
            if rest.len() == 1 {
                let vr = (self.v)(&xr[0])?;
                let pass = odd(s_i);
                // F ⊗ V and ½ E ⊗ V, V passing x_I
                pairs.push((signed(pass, self.f.apply(&xi)?), s_i + 1, vr.clone(), Q::from_integer(1.into())));
                pairs.push((signed(pass, self.excess(&xi)?), s_i + 1, vr, half.clone()));
            }
            if i_set.len() == 1 {
                let vi = (self.v)(&xi[0])?;
                let dv = sdeg[i_set[0]];
                pairs.push((vi.clone(), dv, self.f.apply(&xr)?, Q::from_integer(1.into())));
                pairs.push((vi, dv, self.excess(&xr)?, half.clone()));
            }
            for (a, da, b, w) in pairs {
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                let term = q2(tgt, da, &a, &b)?.scale(&(&w * &half));
                out.add_assign(&signed(sign, term))?;
            }
        }
        Ok(out)
    }
}

pub fn twist_by_homotopy(f: &Tower, v: LinMap) -> Tower {
    let s = Arc::new(Twisted { f: f.clone(), v, me: Default::default() });
    let t = Tower::new(f.source.clone(), f.target.clone(), f.arity_bound, s.clone());
    let _ = s.me.set(t.clone());
    t
}

/// α̃ = Σₙ (1/n!) Fⁿ(α, …, α) mod ħ^{order+1}; the Maurer–Cartan residual
/// of α̃ is recomputed.
pub fn mc_transport(t: &Tower, alpha: &SparseElement, order: usize) -> Result<SparseElement> {
    if alpha.hbar_valuation().is_some_and(|v| v == 0) {
        return Err(Error::NotMaurerCartan("input must have positive hbar-valuation".into()));
    }
    let mut out = SparseElement::zero(t.target.space());
    for n in 1..=order.min(t.arity_bound) {
        let args = vec![adt::with_prec(alpha, order); n];
        let inv = Q::from_integer(1.into()) / factorial(n);
        out.add_assign(&t.apply(&args)?.truncate(order).scale(&inv))?;
    }
    let out = out.truncate(order);
    let r = mc_residual(t.target.as_ref(), &out, order)?;
    if !r.is_zero() {
        return Err(Error::MorphismUnsound(format!("transported element has a Maurer-Cartan residual of {} terms", r.len())));
    }
    Ok(out)
}

/// dα + ½[α, α] mod ħ^{order+1}.
pub fn mc_residual(g: &dyn Dgla, a: &SparseElement, order: usize) -> Result<SparseElement> {
    let half = Q::new(1.into(), 2.into());
    let ap = adt::with_prec(a, order);
    Ok(g.d(a)?.add(&g.bracket(&ap, &ap)?.scale(&half))?.truncate(order))
}

/// Largest filtration excess max(filtration(Fⁿ(X)) − (n + k − 1)) over the
/// sampled tuples, where k is the total input filtration.
pub fn filtration_excess(t: &Tower, samples: &[SparseElement], arity: usize) -> Result<i64> {
    let mut worst = i64::MIN;
    for n in 1..=arity.min(t.arity_bound) {
        for idx in multisets(samples.len(), n) {
            let xs = pick(samples, &idx);
            let k: usize = xs.iter().map(|x| t.source.filtration(x)).sum();
            let y = t.apply(&xs)?;
            if y.is_zero() {
                continue;
            }
            worst = worst.max(t.target.filtration(&y) as i64 - (n + k) as i64 + 1);
        }
    }
    Ok(worst)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::hseries::{q, qf};
    use crate::uea::tests::sl2_uea;

    pub fn ws(w: &[u8], s: &[u8], c: Q) -> SparseElement {
        SparseElement::rational_term(Space::WedgeSym, vec![w.to_vec(), s.to_vec()], c)
    }

    /// invariant sl₂ samples in 𝔤₁ of several degrees
    pub fn classical_samples() -> Vec<SparseElement> {
        vec![
            ws(&[1], &[], q(1)),
            ws(&[0, 2], &[1], q(1)),
            ws(&[1], &[1, 1], q(2)).add(&ws(&[0, 2], &[], q(-1))).unwrap(),
            ws(&[0, 1, 2], &[], q(1)),
            ws(&[], &[1], q(3)),
        ]
    }

    struct Corrupt(Tower);
    impl Structure for Corrupt {
        fn component(&self, xs: &[SparseElement]) -> Result<SparseElement> {
            if xs.len() == 2 {
                Ok(xs[0].clone())
            } else {
                self.0.apply(xs)
            }
        }
    }

    #[test]
    fn identity_and_strict_towers_pass() {
        let u = Arc::new(sl2_uea());
        let g: Arc<dyn Dgla> = Arc::new(ClassicalDgla(u.clone()));
        let samples = classical_samples();
        assert!(check_morphism(&identity(g.clone(), 3), &samples, 3).unwrap().passed());
        let c = Contraction::classical(u.clone());
        let p1 = strict(c.big.clone(), c.small.clone(), c.proj.clone(), 3);
        assert!(check_morphism(&p1, &samples, 3).unwrap().passed());
        let bad = Tower::new(g.clone(), g.clone(), 3, Arc::new(Corrupt(identity(g, 3))));
        let r = check_morphism(&bad, &samples, 3).unwrap();
        assert_eq!(r.failure.map(|f| f.0), Some(2));
    }

    #[test]
    fn classical_contraction_inverts() {
        let u = Arc::new(sl2_uea());
        let c = Contraction::classical(u.clone());
        c.check(&[], &classical_samples()).unwrap();
        let inv = invert_contraction(&c, 3);
        let ef = SparseElement::rational_term(Space::Wedge, vec![vec![0, 2]], q(1));
        let one = SparseElement::rational_term(Space::Wedge, vec![vec![]], q(1));
        let small = vec![ef, one];
        let r = check_morphism(&inv.quasi_inverse, &small, 3).unwrap();
        assert!(r.passed(), "{r:?}");
        let samples = classical_samples();
        let r = check_morphism(&inv.straighten, &samples, 3).unwrap();
        assert!(r.passed(), "{r:?}");
        let nonzero = multisets(samples.len(), 2)
            .iter()
            .filter(|i| !inv.straighten.apply(&pick(&samples, i)).unwrap().is_zero())
            .count();
        assert!(nonzero > 0);
        // ℱ ∘ ℋ = id
        let fh = compose(&inv.straighten, &inv.inverse);
        for n in 1..=3 {
            for i in multisets(samples.len(), n) {
                let xs = pick(&samples, &i);
                let expect = if n == 1 { xs[0].clone() } else { SparseElement::zero(Space::WedgeSym) };
                assert_eq!(fh.apply(&xs).unwrap(), expect);
            }
        }
    }

    #[test]
    fn twisting_a_strict_morphism() {
        let u = Arc::new(sl2_uea());
        let g: Arc<dyn Dgla> = Arc::new(ClassicalDgla(u.clone()));
        let uu = u.clone();
        let v: LinMap = Arc::new(move |x| Ok(cdyb::delta_homotopy(&uu, x)?.scale(&qf(1, 3))));
        let f = identity(g, 3);
        let psi = twist_by_homotopy(&f, v.clone());
        let samples = classical_samples();
        let r = check_morphism(&psi, &samples, 3).unwrap();
        assert!(r.passed(), "{r:?}");
        let higher = multisets(samples.len(), 2)
            .iter()
            .filter(|i| !psi.apply(&pick(&samples, i)).unwrap().is_zero())
            .count();
        assert!(higher > 0);
        // Ψ¹ = F¹ + Q'V + VQ
        for x in &samples {
            let lhs = psi.apply(std::slice::from_ref(x)).unwrap();
            let d = cdyb::differential_d;
            let rhs = x.sub(&d(&v(x).unwrap()).unwrap()).unwrap().sub(&v(&d(x).unwrap()).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
        let zero: LinMap = Arc::new(|x| Ok(SparseElement::zero(x.space())));
        let same = twist_by_homotopy(&f, zero);
        for x in &samples {
            assert_eq!(same.apply(std::slice::from_ref(x)).unwrap(), *x);
        }
    }

    fn ut(terms: &[(&[&[u8]], Q)]) -> SparseElement {
        let mut e = SparseElement::zero(Space::UgTensor);
        for (k, c) in terms {
            e.add_rational(k.iter().map(|m| m.to_vec()).collect(), c);
        }
        e
    }

    #[test]
    fn quantum_contraction_inverts() {
        let u = Arc::new(sl2_uea());
        let c = Contraction::quantum(u.clone());
        let small = vec![
            ut(&[(&[&[0], &[2]], q(1)), (&[&[2], &[0]], q(-1))]),
            ut(&[(&[&[0, 2]], q(1)), (&[&[1]], qf(-1, 2))]),
            ut(&[(&[], q(1))]),
        ];
        c.check(&small, &[]).unwrap();
        let inv = invert_contraction(&c, 3);
        let r = check_morphism(&inv.quasi_inverse, &small, 3).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(filtration_excess(&inv.quasi_inverse, &small, 3).unwrap() <= 0);
        let q2 = inv.quasi_inverse.apply(&[small[0].clone(), small[1].clone()]).unwrap();
        assert!(!q2.is_zero());
    }
}
