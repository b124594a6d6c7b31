//! Cohomology dimensions of truncated invariant complexes on both sides,
//! and the expected answer computed from the exterior algebra.

use std::collections::HashSet;

use crate::adt::{differential_b, invariant_slice};
use crate::cdyb::differential_d;
use crate::element::SparseElement;
use crate::error::{Error, Result};
use crate::invariant::{enumerate, invariant_coords, Basis, SpaceDescriptor};
use crate::lie::Mode;
use crate::linalg::{kernel, unit, Eliminator, FiniteComplex, SVec};
use crate::uea::Uea;

/// Which side of the correspondence to compute on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// (∧𝔤 ⊗ S𝔥)^𝔥 with d
    Classical,
    /// (T U𝔤 ⊗ U𝔥)^𝔥 with b
    Quantum,
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g1" | "classical" => Ok(Side::Classical),
            "g2" | "quantum" => Ok(Side::Quantum),
            _ => Err(Error::Schema { line: 0, msg: format!("unknown complex {s:?}") }),
        }
    }
}

/// One invariant slice with a way to read coordinates of invariant images.
struct Slice {
    basis: Basis,
    inv: Vec<SVec>,
    coords: Eliminator,
}

impl Slice {
    fn new(basis: Basis, inv: Vec<SVec>) -> Self {
        let mut coords = Eliminator::new();
        for (j, v) in inv.iter().enumerate() {
            let _ = coords.insert(v.clone(), unit(j));
        }
        Slice { basis, inv, coords }
    }

    fn coords_of(&self, e: &SparseElement) -> Result<SVec> {
        let v = self.basis.coords(e, 0)?;
        self.coords.solve(&v).ok_or_else(|| Error::NotInvariant("image left the invariant slice".into()))
    }
}

fn complex(slices: &[Slice], d: impl Fn(&SparseElement) -> Result<SparseElement>) -> Result<FiniteComplex> {
    let dims = slices.iter().map(|s| s.inv.len()).collect();
    let mut maps = Vec::new();
    for w in slices.windows(2) {
        let mut cols = Vec::with_capacity(w[0].inv.len());
        for v in &w[0].inv {
            cols.push(w[1].coords_of(&d(&w[0].basis.element(v))?)?);
        }
        maps.push(cols);
    }
    Ok(FiniteComplex::new(0, dims, maps))
}

/// dim H^k of the classical complex restricted to total degree k + l = s.
fn classical_piece(u: &Uea, s: usize, degrees: usize) -> Result<Vec<usize>> {
    let top = (degrees + 1).min(s);
    let mut slices = Vec::new();
    for k in 0..=top {
        let basis = enumerate(u, &SpaceDescriptor::WedgeSym { k, l: s - k });
        let inv = invariant_coords(u, &basis)?;
        slices.push(Slice::new(basis, inv));
    }
    let c = complex(&slices, differential_d)?;
    Ok((0..=degrees).map(|k| if k <= top { c.cohomology_dim(k) } else { 0 }).collect())
}

/// dim H^k of the quantum complex on the slice of total PBW degree in
/// `lo..=hi`.
fn quantum_piece(u: &Uea, lo: usize, hi: usize, degrees: usize) -> Result<Vec<usize>> {
    let mut slices = Vec::new();
    for arity in 0..=degrees + 1 {
        let (basis, inv) = invariant_slice(u, arity, lo, hi, hi)?;
        slices.push(Slice::new(basis, inv));
    }
    let c = complex(&slices, |e| differential_b(u, e))?;
    Ok((0..=degrees).map(|k| c.cohomology_dim(k)).collect())
}

fn add(acc: &mut [usize], v: &[usize]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

/// dim H^k for k = 0..=degrees, truncating at total degree `bound` and
/// checking that `bound + 1` gives the same answer.
pub fn cohomology_dims(u: &Uea, side: Side, degrees: usize, bound: usize) -> Result<Vec<usize>> {
    let compute = |t: usize| -> Result<Vec<usize>> {
        let mut acc = vec![0; degrees + 1];
        match side {
            Side::Classical => {
                for s in 0..=t {
                    add(&mut acc, &classical_piece(u, s, degrees)?);
                }
            }
            Side::Quantum if u.weights().is_some() => {
                for s in 0..=t {
                    add(&mut acc, &quantum_piece(u, s, s, degrees)?);
                }
            }
            Side::Quantum => acc = quantum_piece(u, 0, t, degrees)?,
        }
        Ok(acc)
    };
    let a = compute(bound)?;
    let b = compute(bound + 1)?;
    if a != b {
        return Err(Error::TruncationTooSmall(format!("bound {bound} gives {a:?}, bound {} gives {b:?}", bound + 1)));
    }
    Ok(a)
}

/// dim (∧^k𝔪)^𝔥 in reductive mode, dim ((∧^k𝔤)^𝔥 ∩ ∧^k𝔪) in abelian-base mode.
pub fn expected_dims(u: &Uea, degrees: usize) -> Result<Vec<usize>> {
    (0..=degrees)
        .map(|k| match u.mode() {
            Mode::Reductive => {
                let basis = enumerate(u, &SpaceDescriptor::WedgeM { k });
                Ok(invariant_coords(u, &basis)?.len())
            }
            Mode::AbelianBase => {
                let basis = enumerate(u, &SpaceDescriptor::Wedge { k });
                let inv = invariant_coords(u, &basis)?;
                // coordinates off ∧𝔪 must cancel
                let outside: HashSet<usize> = basis
                    .keys
                    .iter()
                    .enumerate()
                    .filter(|(_, k)| k[0].iter().any(|&x| u.is_h(x)))
                    .map(|(i, _)| i)
                    .collect();
                let cols: Vec<SVec> = inv
                    .iter()
                    .map(|v| v.iter().filter(|(i, _)| outside.contains(i)).map(|(i, c)| (*i, c.clone())).collect())
                    .collect();
                Ok(kernel(&cols).len())
            }
        })
        .collect()
}

/// Representatives of (∧^k𝔪)^𝔥 as elements of ∧^k𝔤.
pub fn invariant_m_wedges(u: &Uea, k: usize) -> Result<Vec<SparseElement>> {
    let basis = enumerate(u, &SpaceDescriptor::WedgeM { k });
    Ok(invariant_coords(u, &basis)?.iter().map(|v| basis.element(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hseries::q;
    use crate::lie::LieData;
    use crate::uea::tests::sl2_uea;
    use std::sync::Arc;

    #[test]
    fn sl2_both_sides() {
        let u = sl2_uea();
        assert_eq!(expected_dims(&u, 3).unwrap(), vec![1, 0, 1, 0]);
        assert_eq!(cohomology_dims(&u, Side::Classical, 3, 4).unwrap(), vec![1, 0, 1, 0]);
        assert_eq!(cohomology_dims(&u, Side::Quantum, 3, 3).unwrap(), vec![1, 0, 1, 0]);
    }

    #[test]
    fn abelian_with_trivial_h() {
        let l = LieData::new(vec!["a".into(), "b".into()], &[], &[], Mode::Reductive).unwrap();
        let u = Uea::new(Arc::new(l), 8);
        assert_eq!(expected_dims(&u, 3).unwrap(), vec![1, 2, 1, 0]);
        assert_eq!(cohomology_dims(&u, Side::Classical, 3, 3).unwrap(), vec![1, 2, 1, 0]);
        assert_eq!(cohomology_dims(&u, Side::Quantum, 3, 3).unwrap(), vec![1, 2, 1, 0]);
    }

    fn semidirect() -> Uea {
        let names = ["a", "b", "u", "v"].map(String::from).to_vec();
        let l = LieData::new(names, &[(0, 2, 2, q(1)), (0, 3, 3, q(-1))], &[0, 1], Mode::AbelianBase).unwrap();
        Uea::new(Arc::new(l), 10)
    }

    fn nonabelian_h() -> Uea {
        let names = ["x", "y", "p", "q"].map(String::from).to_vec();
        let l = LieData::new(names, &[(0, 1, 1, q(1)), (0, 2, 2, q(1)), (1, 3, 2, q(1))], &[0, 1], Mode::Reductive)
            .unwrap();
        Uea::new(Arc::new(l), 10)
    }

    #[test]
    fn semidirect_abelian_base() {
        let u = semidirect();
        let e = expected_dims(&u, 3).unwrap();
        assert_eq!(e, vec![1, 0, 1, 0]);
        assert_eq!(cohomology_dims(&u, Side::Classical, 3, 4).unwrap(), e);
        assert_eq!(cohomology_dims(&u, Side::Quantum, 3, 3).unwrap(), e);
    }

    #[test]
    fn nonabelian_base() {
        let u = nonabelian_h();
        let e = expected_dims(&u, 3).unwrap();
        assert_eq!(e, vec![1, 0, 0, 0]);
        assert_eq!(cohomology_dims(&u, Side::Classical, 3, 4).unwrap(), e);
        assert_eq!(cohomology_dims(&u, Side::Quantum, 3, 3).unwrap(), e);
    }
}
