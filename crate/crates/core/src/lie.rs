//! Finite-dimensional Lie algebras over ℚ with a splitting 𝔤 = 𝔥 ⊕ 𝔪.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::hseries::{fmt_q, Q};

/// Index of a basis vector of 𝔤.
pub type Idx = u8;

/// Sparse vector of 𝔤 in basis coordinates.
pub type GVec = BTreeMap<Idx, Q>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// [𝔥, 𝔪] ⊂ 𝔪
    Reductive,
    /// 𝔥 abelian, 𝔪 a subalgebra
    AbelianBase,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Reductive => "reductive",
            Mode::AbelianBase => "abelian_base",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "reductive" => Ok(Mode::Reductive),
            "abelian_base" => Ok(Mode::AbelianBase),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LieData {
    names: Vec<String>,
    /// `table[i][j]`: sparse expansion of [x_i, x_j]
    table: Vec<Vec<Vec<(Idx, Q)>>>,
    is_h: Vec<bool>,
    h: Vec<Idx>,
    m: Vec<Idx>,
    mode: Mode,
    /// `weights[b][a]`: eigenvalue of ad(h_a) on x_b when 𝔥 acts diagonally
    weights: Option<Vec<Vec<Q>>>,
}

fn add_into(v: &mut GVec, k: Idx, c: &Q) {
    if c.is_zero() {
        return;
    }
    let e = v.entry(k).or_insert_with(Q::zero);
    *e += c;
    if e.is_zero() {
        v.remove(&k);
    }
}

impl LieData {
    /// Build and validate. `brackets` lists `(i, j, k, c)` meaning the
    /// coefficient of x_k in [x_i, x_j]; entries for (j, i) are implied by
    /// antisymmetry but may be given explicitly.
    pub fn new(
        names: Vec<String>,
        brackets: &[(usize, usize, usize, Q)],
        h_indices: &[usize],
        mode: Mode,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::Algebra("dimension must be positive".into()));
        }
        if n > Idx::MAX as usize {
            return Err(Error::Algebra(format!("dimension {n} is too large")));
        }
        let mut given: BTreeMap<(usize, usize, usize), Q> = BTreeMap::new();
        for (i, j, k, c) in brackets {
            if *i >= n || *j >= n || *k >= n {
                return Err(Error::Algebra(format!("bracket index out of range: ({i}, {j}, {k})")));
            }
            *given.entry((*i, *j, *k)).or_insert_with(Q::zero) += c;
        }
        let mut full: BTreeMap<(usize, usize, usize), Q> = BTreeMap::new();
        for (&(i, j, k), c) in &given {
            if c.is_zero() {
                continue;
            }
            if i == j {
                return Err(Error::Algebra(format!(
                    "antisymmetry fails: [{0}, {0}] has a nonzero {1}-component",
                    names[i], names[k]
                )));
            }
            if let Some(other) = given.get(&(j, i, k)) {
                if other != &(-c) {
                    return Err(Error::Algebra(format!(
                        "antisymmetry fails for ({}, {}, {}): {} vs {}",
                        names[i],
                        names[j],
                        names[k],
                        fmt_q(c),
                        fmt_q(other)
                    )));
                }
            }
            full.insert((i, j, k), c.clone());
            full.insert((j, i, k), -c);
        }
        let mut table = vec![vec![Vec::new(); n]; n];
        for ((i, j, k), c) in full {
            table[i][j].push((k as Idx, c));
        }
        let mut is_h = vec![false; n];
        for &i in h_indices {
            if i >= n {
                return Err(Error::Decomposition(format!("h index {i} out of range")));
            }
            if is_h[i] {
                return Err(Error::Decomposition(format!("h index {} listed twice", names[i])));
            }
            is_h[i] = true;
        }
        let h: Vec<Idx> = (0..n).filter(|&i| is_h[i]).map(|i| i as Idx).collect();
        let m: Vec<Idx> = (0..n).filter(|&i| !is_h[i]).map(|i| i as Idx).collect();
        let mut lie = LieData { names, table, is_h, h, m, mode, weights: None };
        lie.check_jacobi()?;
        lie.check_decomposition()?;
        lie.weights = lie.compute_weights();
        Ok(lie)
    }

    fn check_jacobi(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, c) = (i as Idx, j as Idx, k as Idx);
                    let mut r = GVec::new();
                    for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
                        for (l, cl) in self.bracket(x, y) {
                            for (t, ct) in self.bracket(*l, z) {
                                add_into(&mut r, *t, &(cl * ct));
                            }
                        }
                    }
                    if !r.is_empty() {
                        return Err(Error::Algebra(format!(
                            "Jacobi identity fails on ({}, {}, {})",
                            self.names[i], self.names[j], self.names[k]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_decomposition(&self) -> Result<()> {
        let closed = |set: &[Idx], target: &dyn Fn(Idx) -> bool, what: &str| -> Result<()> {
            for &a in set {
                for &b in set {
                    if let Some((k, _)) = self.bracket(a, b).iter().find(|(k, _)| !target(*k)) {
                        return Err(Error::Decomposition(format!(
                            "[{}, {}] has a {}-component outside {what}",
                            self.name(a),
                            self.name(b),
                            self.name(*k)
                        )));
                    }
                }
            }
            Ok(())
        };
        closed(&self.h, &|k| self.is_h(k), "h")?;
        match self.mode {
            Mode::Reductive => {
                for &a in &self.h {
                    for &b in &self.m {
                        if let Some((k, _)) = self.bracket(a, b).iter().find(|(k, _)| self.is_h(*k)) {
                            return Err(Error::Decomposition(format!(
                                "reductive mode: [{}, {}] has an h-component {}",
                                self.name(a),
                                self.name(b),
                                self.name(*k)
                            )));
                        }
                    }
                }
            }
            Mode::AbelianBase => {
                for &a in &self.h {
                    for &b in &self.h {
                        if !self.bracket(a, b).is_empty() {
                            return Err(Error::Decomposition(format!(
                                "abelian_base mode: [{}, {}] ≠ 0",
                                self.name(a),
                                self.name(b)
                            )));
                        }
                    }
                }
                closed(&self.m, &|k| !self.is_h(k), "m")?;
            }
        }
        Ok(())
    }

    fn compute_weights(&self) -> Option<Vec<Vec<Q>>> {
        let mut w = vec![Vec::with_capacity(self.h.len()); self.dim()];
        for &a in &self.h {
            for b in 0..self.dim() {
                let br = self.bracket(a, b as Idx);
                match br {
                    [] => w[b].push(Q::zero()),
                    [(k, c)] if *k as usize == b => w[b].push(c.clone()),
                    _ => return None,
                }
            }
        }
        Some(w)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: Idx) -> &str {
        &self.names[i as usize]
    }

    pub fn index_of(&self, name: &str) -> Option<Idx> {
        self.names.iter().position(|n| n == name).map(|i| i as Idx)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_h(&self, i: Idx) -> bool {
        self.is_h[i as usize]
    }

    pub fn h_indices(&self) -> &[Idx] {
        &self.h
    }

    pub fn m_indices(&self) -> &[Idx] {
        &self.m
    }

    /// [x_i, x_j] as a sparse list.
    pub fn bracket(&self, i: Idx, j: Idx) -> &[(Idx, Q)] {
        &self.table[i as usize][j as usize]
    }

    pub fn bracket_vec(&self, a: &GVec, b: &GVec) -> GVec {
        let mut r = GVec::new();
        for (i, ca) in a {
            for (j, cb) in b {
                let c = ca * cb;
                for (k, ck) in self.bracket(*i, *j) {
                    add_into(&mut r, *k, &(&c * ck));
                }
            }
        }
        r
    }

    /// Projection onto 𝔪 along 𝔥.
    pub fn project_m(&self, v: &GVec) -> GVec {
        v.iter().filter(|(i, _)| !self.is_h(**i)).map(|(i, c)| (*i, c.clone())).collect()
    }

    /// Eigenvalues of ad(h_a) on each basis vector when every 𝔥 basis
    /// element acts diagonally; `None` otherwise.
    pub fn weights(&self) -> Option<&Vec<Vec<Q>>> {
        self.weights.as_ref()
    }

    pub fn is_abelian(&self) -> bool {
        self.table.iter().all(|row| row.iter().all(|b| b.is_empty()))
    }
}

impl fmt::Display for LieData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lie algebra of dimension {} ({}), h = {{", self.dim(), self.mode.name())?;
        let hs: Vec<&str> = self.h.iter().map(|&i| self.name(i)).collect();
        write!(f, "{}}}", hs.join(", "))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::hseries::q;

    pub fn sl2() -> LieData {
        // order e < h < f
        let names = vec!["e".to_string(), "h".to_string(), "f".to_string()];
        let br = vec![(1, 0, 0, q(2)), (1, 2, 2, q(-2)), (0, 2, 1, q(1))];
        LieData::new(names, &br, &[1], Mode::Reductive).unwrap()
    }

    fn brute_jacobi(l: &LieData) -> bool {
        let n = l.dim() as Idx;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let ua: GVec = [(a, q(1))].into();
                    let ub: GVec = [(b, q(1))].into();
                    let uc: GVec = [(c, q(1))].into();
                    let t1 = l.bracket_vec(&l.bracket_vec(&ua, &ub), &uc);
                    let t2 = l.bracket_vec(&l.bracket_vec(&ub, &uc), &ua);
                    let t3 = l.bracket_vec(&l.bracket_vec(&uc, &ua), &ub);
                    let mut s = t1;
                    for (k, x) in t2.iter().chain(t3.iter()) {
                        add_into(&mut s, *k, x);
                    }
                    if !s.is_empty() {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn sl2_is_valid() {
        let l = sl2();
        assert!(brute_jacobi(&l));
        assert_eq!(l.bracket(2, 0), &[(1, q(-1))]);
        assert_eq!(l.weights().unwrap()[0], vec![q(2)]);
    }

    #[test]
    fn abelian_with_trivial_h() {
        let l = LieData::new(vec!["a".into(), "b".into()], &[], &[], Mode::Reductive).unwrap();
        assert!(l.h_indices().is_empty());
        assert!(l.is_abelian());
    }

    #[test]
    fn symmetric_bracket_is_rejected() {
        let err = LieData::new(
            vec!["a".into(), "b".into()],
            &[(0, 1, 0, q(1)), (1, 0, 0, q(1))],
            &[],
            Mode::Reductive,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Algebra(_)));
    }

    #[test]
    fn jacobi_failure_is_reported() {
        // [a,b] = c, [b,c] = a, [c,a] = c is not a Lie algebra
        let names = vec!["a".into(), "b".into(), "c".into()];
        let br = vec![(0, 1, 2, q(1)), (1, 2, 0, q(1)), (2, 0, 2, q(1))];
        assert!(matches!(LieData::new(names, &br, &[], Mode::Reductive), Err(Error::Algebra(_))));
    }

    #[test]
    fn reductive_condition_is_checked() {
        // sl2 with h = {e}: [e, f] = h is not in m = {h, f}... and [e,h] = -2e ∈ h
        let names = vec!["e".to_string(), "h".to_string(), "f".to_string()];
        let br = vec![(1, 0, 0, q(2)), (1, 2, 2, q(-2)), (0, 2, 1, q(1))];
        let err = LieData::new(names, &br, &[0], Mode::Reductive).unwrap_err();
        assert!(matches!(err, Error::Decomposition(_)));
    }

    #[test]
    fn projection_onto_m() {
        let l = sl2();
        let v: GVec = [(0, q(1)), (1, q(3))].into();
        assert_eq!(l.project_m(&v), [(0, q(1))].into());
        assert!(l.project_m(&[(1, q(1))].into()).is_empty());
        assert_eq!(l.project_m(&l.project_m(&v)), l.project_m(&v));
    }

    #[test]
    fn projection_is_equivariant() {
        let l = sl2();
        for &x in l.h_indices() {
            for b in 0..3 {
                let ux: GVec = [(x, q(1))].into();
                let ub: GVec = [(b, q(1))].into();
                let lhs = l.project_m(&l.bracket_vec(&ux, &ub));
                let rhs = l.bracket_vec(&ux, &l.project_m(&ub));
                assert_eq!(lhs, rhs);
            }
        }
    }
}
