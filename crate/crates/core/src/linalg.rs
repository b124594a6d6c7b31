//! Sparse exact linear algebra over ℚ: echelon elimination with provenance,
//! kernels, particular solutions and explicit contractions of finite
//! cochain complexes.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::hseries::Q;

pub type SVec = BTreeMap<usize, Q>;

pub fn unit(i: usize) -> SVec {
    let mut v = SVec::new();
    v.insert(i, Q::one());
    v
}

/// `acc += c * v`
pub fn axpy(acc: &mut SVec, c: &Q, v: &SVec) {
    if c.is_zero() {
        return;
    }
    for (k, x) in v {
        let e = acc.entry(*k).or_insert_with(Q::zero);
        *e += c * x;
        if e.is_zero() {
            acc.remove(k);
        }
    }
}

pub fn scaled(v: &SVec, c: &Q) -> SVec {
    if c.is_zero() {
        return SVec::new();
    }
    v.iter().map(|(k, x)| (*k, x * c)).collect()
}

/// Echelon basis of a subspace. Every stored row has pivot equal to its
/// smallest index and pivot coefficient 1; each row remembers the
/// combination of inserted vectors that produced it.
#[derive(Clone, Debug, Default)]
pub struct Eliminator {
    rows: BTreeMap<usize, (SVec, SVec)>,
}

impl Eliminator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> impl Iterator<Item = &usize> {
        self.rows.keys()
    }

    pub fn rows(&self) -> impl Iterator<Item = &SVec> {
        self.rows.values().map(|(r, _)| r)
    }

    /// Reduce `v` against the stored rows. Returns the remainder and the
    /// combination `c` (over inserted vectors) with `v = remainder + Σ c·inputs`.
    pub fn reduce(&self, v: &SVec) -> (SVec, SVec) {
        let mut v = v.clone();
        let mut combo = SVec::new();
        let mut from = 0usize;
        loop {
            let next = v.range(from..).map(|(k, _)| *k).find(|k| self.rows.contains_key(k));
            let Some(k) = next else { break };
            let c = v[&k].clone();
            let (row, prov) = &self.rows[&k];
            axpy(&mut v, &(-&c), row);
            axpy(&mut combo, &c, prov);
            from = k + 1;
        }
        (v, combo)
    }

    /// Insert a vector tagged with its provenance. On dependence returns the
    /// provenance combination that vanishes.
    pub fn insert(&mut self, v: SVec, prov: SVec) -> Result<usize, SVec> {
        let (rem, combo) = self.reduce(&v);
        let mut p = prov;
        axpy(&mut p, &-Q::one(), &combo);
        match rem.keys().next().copied() {
            None => Err(p),
            Some(piv) => {
                let inv = rem[&piv].recip();
                let row = scaled(&rem, &inv);
                let prov = scaled(&p, &inv);
                self.rows.insert(piv, (row, prov));
                Ok(piv)
            }
        }
    }

    /// Coefficients `x` (over inserted vectors) with `Σ x·inputs = b`.
    pub fn solve(&self, b: &SVec) -> Option<SVec> {
        let (rem, combo) = self.reduce(b);
        if rem.is_empty() {
            Some(combo)
        } else {
            None
        }
    }

    pub fn contains(&self, b: &SVec) -> bool {
        self.reduce(b).0.is_empty()
    }
}

/// Fully reduced row echelon form of a list of vectors (zero rows dropped),
/// sorted by pivot.
pub fn rref(rows: Vec<SVec>) -> Vec<SVec> {
    let mut e = Eliminator::new();
    for r in rows {
        let _ = e.insert(r, SVec::new());
    }
    let mut out: BTreeMap<usize, SVec> = e.rows.into_iter().map(|(k, (r, _))| (k, r)).collect();
    let pivots: Vec<usize> = out.keys().rev().copied().collect();
    for &p in &pivots {
        let prow = out[&p].clone();
        for (&k, row) in out.iter_mut() {
            if k >= p {
                break;
            }
            if let Some(c) = row.get(&p).cloned() {
                axpy(row, &-c, &prow);
            }
        }
    }
    out.into_values().collect()
}

/// Canonical basis of the kernel of the linear map whose `j`-th column is
/// `cols[j]`, as vectors over the column index set.
pub fn kernel(cols: &[SVec]) -> Vec<SVec> {
    let mut e = Eliminator::new();
    let mut ker = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        if let Err(k) = e.insert(c.clone(), unit(j)) {
            ker.push(k);
        }
    }
    rref(ker)
}

pub fn rank(cols: &[SVec]) -> usize {
    let mut e = Eliminator::new();
    for c in cols {
        let _ = e.insert(c.clone(), SVec::new());
    }
    e.rank()
}

/// Coordinates of `v` in a fully reduced echelon basis (read off at pivots).
/// Returns `None` when `v` is not in the span.
pub fn coords_in_rref(basis: &[SVec], v: &SVec) -> Option<SVec> {
    let mut rest = v.clone();
    let mut out = SVec::new();
    for (i, b) in basis.iter().enumerate() {
        let piv = *b.keys().next()?;
        if let Some(c) = rest.get(&piv).cloned() {
            axpy(&mut rest, &-c.clone(), b);
            out.insert(i, c);
        }
    }
    if rest.is_empty() {
        Some(out)
    } else {
        None
    }
}

/// A finite cochain complex `C^lo → … → C^hi` given by matrices, together
/// with an explicit linear contraction `h` satisfying
/// `d h + h d = id − π_harm`, where `π_harm` projects onto a fixed
/// complement of the coboundaries inside the cocycles.
pub struct FiniteComplex {
    lo: usize,
    dims: Vec<usize>,
    /// `maps[i]`: columns of `d: C^{lo+i} → C^{lo+i+1}`
    maps: Vec<Vec<SVec>>,
    elim: Vec<Eliminator>,
}

impl FiniteComplex {
    /// `maps.len() == dims.len() - 1`; the differential out of the top
    /// degree is taken to be zero.
    pub fn new(lo: usize, dims: Vec<usize>, maps: Vec<Vec<SVec>>) -> Self {
        assert_eq!(maps.len() + 1, dims.len());
        let elim = maps
            .iter()
            .map(|cols| {
                let mut e = Eliminator::new();
                for (j, c) in cols.iter().enumerate() {
                    let _ = e.insert(c.clone(), unit(j));
                }
                e
            })
            .collect();
        FiniteComplex { lo, dims, maps, elim }
    }

    pub fn dim(&self, k: usize) -> usize {
        k.checked_sub(self.lo).and_then(|i| self.dims.get(i)).copied().unwrap_or(0)
    }

    pub fn apply_d(&self, k: usize, v: &SVec) -> SVec {
        let Some(cols) = k.checked_sub(self.lo).and_then(|i| self.maps.get(i)) else {
            return SVec::new();
        };
        let mut out = SVec::new();
        for (j, c) in v {
            axpy(&mut out, c, &cols[*j]);
        }
        out
    }

    fn elim_out(&self, k: usize) -> Option<&Eliminator> {
        k.checked_sub(self.lo).and_then(|i| self.elim.get(i))
    }

    pub fn rank_d(&self, k: usize) -> usize {
        self.elim_out(k).map_or(0, |e| e.rank())
    }

    /// Dimension of the cohomology in degree `k` (degrees strictly inside the
    /// range are meaningful; the top degree sees `d = 0`).
    pub fn cohomology_dim(&self, k: usize) -> usize {
        let z = self.dim(k) - self.rank_d(k);
        let b = if k > self.lo { self.rank_d(k - 1) } else { 0 };
        z - b
    }

    /// Split `v ∈ C^k` as `v = d(h v) + h(d v) + harm`; returns `(h v, harm)`.
    pub fn contract(&self, k: usize, v: &SVec) -> (SVec, SVec) {
        // part of v outside the cocycles, on the independent columns of d_k
        let l = match self.elim_out(k) {
            Some(e) => e.solve(&self.apply_d(k, v)).expect("image of d lies in its span"),
            None => SVec::new(),
        };
        let mut z = v.clone();
        axpy(&mut z, &-Q::one(), &l);
        if k == self.lo {
            return (SVec::new(), z);
        }
        let e = self.elim_out(k - 1).expect("degree in range");
        let (harm, x) = e.reduce(&z);
        (x, harm)
    }

    pub fn homotopy(&self, k: usize, v: &SVec) -> SVec {
        self.contract(k, v).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hseries::q;

    fn sv(pairs: &[(usize, i64)]) -> SVec {
        pairs.iter().map(|&(k, x)| (k, q(x))).filter(|(_, x)| !x.is_zero()).collect()
    }

    #[test]
    fn kernel_of_small_matrix() {
        // columns (1,0), (0,1), (1,1)
        let cols = vec![sv(&[(0, 1)]), sv(&[(1, 1)]), sv(&[(0, 1), (1, 1)])];
        let k = kernel(&cols);
        assert_eq!(k, vec![sv(&[(0, 1), (1, 1), (2, -1)])]);
        assert_eq!(rank(&cols), 2);
    }

    #[test]
    fn solve_returns_preimage() {
        let mut e = Eliminator::new();
        let cols = vec![sv(&[(0, 2), (1, 1)]), sv(&[(1, 3)])];
        for (j, c) in cols.iter().enumerate() {
            e.insert(c.clone(), unit(j)).unwrap();
        }
        let b = sv(&[(0, 4), (1, 5)]);
        let x = e.solve(&b).unwrap();
        let mut img = SVec::new();
        for (j, c) in &x {
            axpy(&mut img, c, &cols[*j]);
        }
        assert_eq!(img, b);
        assert!(e.solve(&sv(&[(2, 1)])).is_none());
    }

    #[test]
    fn contraction_identity_on_a_short_complex() {
        // C^0 = k, C^1 = k^2, C^2 = k; d0 = (1,1), d1 = (1,-1): exact at 1, H^2 = 0
        let d0 = vec![sv(&[(0, 1), (1, 1)])];
        let d1 = vec![sv(&[(0, 1)]), sv(&[(0, -1)])];
        let c = FiniteComplex::new(0, vec![1, 2, 1], vec![d0, d1]);
        assert_eq!(c.cohomology_dim(0), 0);
        assert_eq!(c.cohomology_dim(1), 0);
        for k in 0..3 {
            for i in 0..c.dim(k) {
                let v = unit(i);
                let (hv, harm) = c.contract(k, &v);
                let mut lhs = if k > 0 { c.apply_d(k - 1, &hv) } else { SVec::new() };
                let dv = c.apply_d(k, &v);
                let hdv = if k + 1 < 3 { c.homotopy(k + 1, &dv) } else { SVec::new() };
                axpy(&mut lhs, &Q::one(), &hdv);
                axpy(&mut lhs, &Q::one(), &harm);
                assert_eq!(lhs, v, "degree {k} basis {i}");
            }
        }
    }

    #[test]
    fn rref_is_canonical() {
        let a = rref(vec![sv(&[(0, 1), (1, 1)]), sv(&[(0, 1), (1, 2)])]);
        assert_eq!(a, vec![sv(&[(0, 1)]), sv(&[(1, 1)])]);
    }
}
