//! Rototranslations `(S, a)` with `S` a signed permutation matrix and `a` a
//! half-period translation, their action on fields, and symmetry discovery.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::fields::{StaticCoeff, StaticField, TimeCoeff, TimeField, WaveVector};
use crate::timebasis::TimePoly;

pub type Matrix = [[i8; 3]; 3];

pub const IDENTITY: Matrix = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

fn transpose(a: &Matrix) -> Matrix {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

/// The 48 signed permutation matrices, in a fixed order.
pub fn octahedral_group() -> Vec<Matrix> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for p in PERMS {
        for signs in 0..8u8 {
            let mut m = [[0i8; 3]; 3];
            for i in 0..3 {
                m[i][p[i]] = if signs >> i & 1 == 1 { -1 } else { 1 };
            }
            out.push(m);
        }
    }
    out
}

/// `(S, a)` with the translation stored as bits in units of `pi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    pub s: Matrix,
    pub a: [u8; 3],
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement {
        s: IDENTITY,
        a: [0, 0, 0],
    };

    pub fn new(s: Matrix, a: [u8; 3]) -> Result<Self> {
        let g = GroupElement {
            s,
            a: a.map(|b| b & 1),
        };
        if mat_mul(&transpose(&s), &s) != IDENTITY || s.iter().flatten().any(|x| x.abs() > 1) {
            return Err(Error::InvalidArgument(format!("{s:?} is not a signed permutation")));
        }
        Ok(g)
    }

    /// Element labelled `(alpha, beta, gamma)` in the standard tables:
    /// `(D_alpha Q_beta, a_gamma)`.
    pub fn from_labels(alpha: usize, beta: usize, gamma: usize) -> Result<Self> {
        let d: [i8; 3] = match alpha {
            1 => [1, 1, 1],
            2 => [-1, 1, 1],
            3 => [1, -1, 1],
            4 => [1, 1, -1],
            5 => [1, -1, -1],
            6 => [-1, 1, -1],
            7 => [-1, -1, 1],
            8 => [-1, -1, -1],
            _ => return Err(Error::InvalidArgument(format!("alpha label {alpha} out of 1..=8"))),
        };
        let q: Matrix = match beta {
            1 => [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            2 => [[0, 1, 0], [0, 0, 1], [1, 0, 0]],
            3 => [[0, 0, 1], [1, 0, 0], [0, 1, 0]],
            4 => [[0, 1, 0], [1, 0, 0], [0, 0, 1]],
            5 => [[1, 0, 0], [0, 0, 1], [0, 1, 0]],
            6 => [[0, 0, 1], [0, 1, 0], [1, 0, 0]],
            _ => return Err(Error::InvalidArgument(format!("beta label {beta} out of 1..=6"))),
        };
        let a: [u8; 3] = match gamma {
            1 => [0, 0, 0],
            2 => [1, 0, 0],
            3 => [0, 1, 0],
            4 => [0, 0, 1],
            5 => [1, 1, 0],
            6 => [1, 0, 1],
            7 => [0, 1, 1],
            8 => [1, 1, 1],
            _ => return Err(Error::InvalidArgument(format!("gamma label {gamma} out of 1..=8"))),
        };
        let s = std::array::from_fn(|i| std::array::from_fn(|j| d[i] * q[i][j]));
        GroupElement::new(s, a)
    }

    /// `(S, a)(U, b) = (SU, a + Sb)`, translations mod `2 pi`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let sb = apply_bits(&self.s, &other.a);
        GroupElement {
            s: mat_mul(&self.s, &other.s),
            a: std::array::from_fn(|i| (self.a[i] + sb[i]) & 1),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        let st = transpose(&self.s);
        GroupElement {
            a: apply_bits(&st, &self.a),
            s: st,
        }
    }

    pub fn apply(&self, k: &WaveVector) -> WaveVector {
        apply_matrix(&self.s, k)
    }

    /// `e^{-i a.k}`, which is `+-1` for half-period translations.
    pub fn phase(&self, k: &WaveVector) -> i64 {
        let parity: i32 = (0..3).map(|i| self.a[i] as i32 * k.0[i]).sum();
        if parity.rem_euclid(2) == 0 {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pi = |b: u8| if b == 1 { "pi" } else { "0" };
        write!(
            f,
            "({:?}, ({},{},{}))",
            self.s,
            pi(self.a[0]),
            pi(self.a[1]),
            pi(self.a[2])
        )
    }
}

fn apply_bits(s: &Matrix, a: &[u8; 3]) -> [u8; 3] {
    std::array::from_fn(|i| ((0..3).map(|j| (s[i][j] as i32 * a[j] as i32).abs()).sum::<i32>() & 1) as u8)
}

pub fn apply_matrix(s: &Matrix, k: &WaveVector) -> WaveVector {
    WaveVector(std::array::from_fn(|i| (0..3).map(|j| s[i][j] as i32 * k.0[j]).sum()))
}

fn matrix_on_coeff(s: &Matrix, v: &TimeCoeff) -> TimeCoeff {
    std::array::from_fn(|i| {
        let mut out = TimePoly::zero();
        for j in 0..3 {
            if s[i][j] != 0 {
                out += &v[j].scale_int(s[i][j] as i64);
            }
        }
        out
    })
}

fn matrix_on_static(s: &Matrix, v: &StaticCoeff) -> StaticCoeff {
    std::array::from_fn(|i| {
        let j = (0..3).find(|&j| s[i][j] != 0).expect("signed permutation");
        v[j].scale_int(s[i][j] as i64)
    })
}

/// `(E_*(S,a) v)_k = e^{-i a.k} S v_{S^T k}`.
pub fn push_forward(g: &GroupElement, v: &TimeField) -> TimeField {
    let mut out = TimeField::zero();
    for (h, c) in v.iter() {
        let k = g.apply(h);
        let mut w = matrix_on_coeff(&g.s, c);
        if g.phase(&k) < 0 {
            w = crate::fields::coeff_neg(&w);
        }
        out.add_coeff(k, &w).expect("image of a nonzero wave vector is nonzero");
    }
    out
}

pub fn push_forward_static(g: &GroupElement, v: &StaticField) -> StaticField {
    let mut out = StaticField::zero();
    for (h, c) in v.iter() {
        let k = g.apply(h);
        let sign = g.phase(&k);
        let w = matrix_on_static(&g.s, c).map(|x| x.scale_int(sign));
        out.add_coeff(k, &w).expect("image of a nonzero wave vector is nonzero");
    }
    out
}

/// Coefficient of `u_j` at `S k` from the one at `k`, for `g = (S, a)` in
/// `H^sigma`: `sigma^{j+1} e^{-i a.Sk} S u_{j,k}`.
pub fn propagate_coefficient(
    u_jk: &TimeCoeff,
    k: &WaveVector,
    g: &GroupElement,
    sigma: i8,
    j: usize,
) -> (WaveVector, TimeCoeff) {
    let sk = g.apply(k);
    let mut sign = g.phase(&sk);
    if sigma < 0 && j.is_multiple_of(2) {
        sign = -sign;
    }
    let mut w = matrix_on_coeff(&g.s, u_jk);
    if sign < 0 {
        w = crate::fields::coeff_neg(&w);
    }
    (sk, w)
}

/// Symmetries (`plus`) and pseudo-symmetries (`minus`) of a datum.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymmetryData {
    pub plus: BTreeSet<GroupElement>,
    pub minus: BTreeSet<GroupElement>,
    pub reduced_plus: BTreeSet<Matrix>,
    pub reduced_minus: BTreeSet<Matrix>,
}

impl SymmetryData {
    /// Only the identity: no pruning.
    pub fn trivial() -> Self {
        SymmetryData {
            plus: [GroupElement::IDENTITY].into(),
            minus: BTreeSet::new(),
            reduced_plus: [IDENTITY].into(),
            reduced_minus: BTreeSet::new(),
        }
    }

    pub fn from_sets(plus: BTreeSet<GroupElement>, minus: BTreeSet<GroupElement>) -> Self {
        let reduced_plus = plus.iter().map(|g| g.s).collect();
        let reduced_minus = minus.iter().map(|g| g.s).collect();
        SymmetryData {
            plus,
            minus,
            reduced_plus,
            reduced_minus,
        }
    }

    pub fn reduced_union(&self) -> BTreeSet<Matrix> {
        self.reduced_plus.union(&self.reduced_minus).copied().collect()
    }

    pub fn reduced_coincide(&self) -> bool {
        self.reduced_plus == self.reduced_minus
    }

    pub fn reduced_disjoint(&self) -> bool {
        self.reduced_plus.is_disjoint(&self.reduced_minus)
    }

    /// One representative `(g, sigma)` for each matrix of the reduced union.
    pub fn actions(&self) -> BTreeMap<Matrix, (GroupElement, i8)> {
        let mut out = BTreeMap::new();
        for g in &self.plus {
            out.entry(g.s).or_insert((*g, 1));
        }
        for g in &self.minus {
            out.entry(g.s).or_insert((*g, -1));
        }
        out
    }

    /// Checks closure of `plus` and `minus = plus o g` for a `g` in `minus`.
    pub fn check(&self) -> Result<()> {
        if !self.plus.contains(&GroupElement::IDENTITY) {
            return Err(Error::Invariant("symmetry group lacks the identity".into()));
        }
        for g in &self.plus {
            for h in &self.plus {
                if !self.plus.contains(&g.compose(h)) {
                    return Err(Error::Invariant("symmetry group is not closed".into()));
                }
            }
        }
        if let Some(gbar) = self.minus.iter().next() {
            let coset: BTreeSet<GroupElement> = self.plus.iter().map(|h| h.compose(gbar)).collect();
            if coset != self.minus {
                return Err(Error::Invariant("pseudo-symmetries are not a coset".into()));
            }
        }
        Ok(())
    }

    /// Parses a label table: lines `alpha beta gamma` for the group and an
    /// optional `minus-generator alpha beta gamma` line; `#` starts a comment.
    pub fn from_label_table(text: &str) -> Result<Self> {
        let mut plus = BTreeSet::new();
        let mut generator = None;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (is_gen, rest) = match line.strip_prefix("minus-generator") {
                Some(r) => (true, r),
                None => (false, line),
            };
            let nums: Vec<usize> = rest
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format(format!("bad label line {line:?}")))?;
            if nums.len() != 3 {
                return Err(Error::Format(format!("bad label line {line:?}")));
            }
            let g = GroupElement::from_labels(nums[0], nums[1], nums[2])?;
            if is_gen {
                generator = Some(g);
            } else if !plus.insert(g) {
                return Err(Error::Format(format!("duplicate label line {line:?}")));
            }
        }
        let minus = match generator {
            Some(gbar) => plus.iter().map(|h| h.compose(&gbar)).collect(),
            None => BTreeSet::new(),
        };
        Ok(SymmetryData::from_sets(plus, minus))
    }
}

/// Brute-force search over the 48 x 8 half-period rototranslations.
pub fn find_symmetries(u: &StaticField) -> Result<SymmetryData> {
    if u.is_zero() {
        return Err(Error::InvalidArgument("symmetry search needs a nonzero datum".into()));
    }
    let mut neg = StaticField::zero();
    for (k, c) in u.iter() {
        neg.add_coeff(*k, &c.clone().map(|x| x.scale_int(-1)))?;
    }
    let mut plus = BTreeSet::new();
    let mut minus = BTreeSet::new();
    for s in octahedral_group() {
        for bits in 0..8u8 {
            let g = GroupElement {
                s,
                a: [bits & 1, bits >> 1 & 1, bits >> 2 & 1],
            };
            let w = push_forward_static(&g, u);
            if w == *u {
                plus.insert(g);
            } else if w == neg {
                minus.insert(g);
            }
        }
    }
    Ok(SymmetryData::from_sets(plus, minus))
}

/// Orbits of `keys` under the matrices `r` (assumed to form a group),
/// each sorted with its smallest element (the representative) first.
pub fn orbit_partition(keys: &BTreeSet<WaveVector>, r: &BTreeSet<Matrix>) -> Result<Vec<Vec<WaveVector>>> {
    if r.is_empty() {
        return Err(Error::InvalidArgument("orbit partition needs a nonempty group".into()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for k in keys {
        if seen.contains(k) {
            continue;
        }
        let orbit: BTreeSet<WaveVector> = r.iter().map(|s| apply_matrix(s, k)).collect();
        for m in &orbit {
            seen.insert(*m);
        }
        out.push(orbit.into_iter().filter(|m| keys.contains(m)).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_law_examples() {
        let g = GroupElement::new([[-1, 0, 0], [0, 1, 0], [0, 0, 1]], [1, 0, 0]).unwrap();
        assert_eq!(g.compose(&g), GroupElement::IDENTITY);
        for s in octahedral_group() {
            for bits in 0..8u8 {
                let g = GroupElement::new(s, [bits & 1, bits >> 1 & 1, bits >> 2 & 1]).unwrap();
                assert_eq!(GroupElement::IDENTITY.compose(&g), g);
                assert_eq!(g.compose(&g.inverse()), GroupElement::IDENTITY);
                assert_eq!(g.inverse().compose(&g), GroupElement::IDENTITY);
            }
        }
    }

    #[test]
    fn octahedral_group_is_complete() {
        let all: BTreeSet<Matrix> = octahedral_group().into_iter().collect();
        assert_eq!(all.len(), 48);
        let labelled: BTreeSet<Matrix> = (1..=8)
            .flat_map(|a| (1..=6).map(move |b| GroupElement::from_labels(a, b, 1).unwrap().s))
            .collect();
        assert_eq!(labelled, all);
    }

    #[test]
    fn rejects_non_orthogonal() {
        assert!(GroupElement::new([[1, 1, 0], [0, 1, 0], [0, 0, 1]], [0; 3]).is_err());
        assert!(GroupElement::from_labels(9, 1, 1).is_err());
    }

    #[test]
    fn singleton_orbits() {
        let keys: BTreeSet<WaveVector> =
            [WaveVector::new(1, 2, 3), WaveVector::new(-1, 0, 2)].into_iter().collect();
        let orbits = orbit_partition(&keys, &[IDENTITY].into()).unwrap();
        assert_eq!(orbits.len(), 2);
        assert!(orbits.iter().all(|o| o.len() == 1));
        assert!(orbit_partition(&keys, &BTreeSet::new()).is_err());
    }
}
