//! Named fixture algebras, product constructors and the JSON algebra format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::{BracketEntry, GradedAlgebra};
use crate::error::{Error, Result};
use crate::scalar::{q, qi, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixtureName {
    Heisenberg3,
    Engel4,
    EngelHeis7,
    Heisprod4,
    Ladder5,
    Ladder8,
    /// Free step-two algebra on `k >= 2` generators.
    FreeStep2(usize),
}

impl FixtureName {
    /// Every fixed-size fixture plus `free_step2_3`.
    pub const ALL: [FixtureName; 7] = [
        FixtureName::Heisenberg3,
        FixtureName::Engel4,
        FixtureName::EngelHeis7,
        FixtureName::Heisprod4,
        FixtureName::Ladder5,
        FixtureName::Ladder8,
        FixtureName::FreeStep2(3),
    ];
}

impl fmt::Display for FixtureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureName::Heisenberg3 => write!(f, "heisenberg3"),
            FixtureName::Engel4 => write!(f, "engel4"),
            FixtureName::EngelHeis7 => write!(f, "engel_heis7"),
            FixtureName::Heisprod4 => write!(f, "heisprod4"),
            FixtureName::Ladder5 => write!(f, "ladder5"),
            FixtureName::Ladder8 => write!(f, "ladder8"),
            FixtureName::FreeStep2(k) => write!(f, "free_step2_{k}"),
        }
    }
}

impl FromStr for FixtureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "heisenberg3" => FixtureName::Heisenberg3,
            "engel4" => FixtureName::Engel4,
            "engel_heis7" => FixtureName::EngelHeis7,
            "heisprod4" => FixtureName::Heisprod4,
            "ladder5" => FixtureName::Ladder5,
            "ladder8" => FixtureName::Ladder8,
            other => {
                let k = other
                    .strip_prefix("free_step2_")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 2)
                    .ok_or_else(|| Error::UnknownFixture(other.to_string()))?;
                FixtureName::FreeStep2(k)
            }
        })
    }
}

pub fn fixture(name: FixtureName) -> GradedAlgebra {
    let built = match name {
        FixtureName::Heisenberg3 => GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("y", qi(1))
            .basis("z", qi(2))
            .bracket("x", "y", "z", qi(1))
            .build(),
        FixtureName::Engel4 => GradedAlgebra::builder()
            .basis("e0", qi(1))
            .basis("e1", qi(1))
            .basis("e2", qi(2))
            .basis("e3", qi(3))
            .bracket("e0", "e1", "e2", qi(1))
            .bracket("e0", "e2", "e3", qi(1))
            .build(),
        FixtureName::EngelHeis7 => GradedAlgebra::builder()
            .basis("e0", qi(1))
            .basis("e1", qi(1))
            .basis("e2", qi(2))
            .basis("e3", qi(3))
            .basis("X", qi(2))
            .basis("Y", qi(2))
            .basis("Z", qi(4))
            .bracket("e0", "e1", "e2", qi(1))
            .bracket("e0", "e2", "e3", qi(1))
            .bracket("X", "Y", "Z", qi(1))
            .bracket("X", "e0", "e3", qi(1))
            .bracket("Y", "e1", "e3", qi(1))
            .build(),
        FixtureName::Heisprod4 => GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("y", qi(1))
            .basis("z", qi(2))
            .basis("h", qi(2))
            .bracket("x", "y", "z", qi(1))
            .build(),
        FixtureName::Ladder5 => GradedAlgebra::builder()
            .basis("a", qi(1))
            .basis("b", qi(1))
            .basis("z1", qi(1))
            .basis("w2", qi(2))
            .basis("h", qi(2))
            .basis("z3", qi(3))
            .bracket("a", "b", "w2", qi(1))
            .bracket("a", "w2", "z3", qi(1))
            .bracket("h", "z1", "z3", qi(1))
            .build(),
        FixtureName::Ladder8 => GradedAlgebra::builder()
            .basis("a", qi(1))
            .basis("b", qi(1))
            .basis("z", qi(1))
            .basis("w", qi(2))
            .basis("h1", qi(2))
            .basis("h2", qi(2))
            .basis("u1", qi(3))
            .basis("u2", qi(3))
            .bracket("a", "b", "w", qi(1))
            .bracket("a", "w", "u1", qi(1))
            .bracket("b", "w", "u2", qi(1))
            .bracket("h1", "z", "u1", qi(1))
            .bracket("h2", "z", "u2", qi(1))
            .build(),
        FixtureName::FreeStep2(k) => return free_step2(k),
    };
    built.expect("fixture tables are well formed")
}

/// Free step-two nilpotent algebra on `k` generators `x1..xk`, with
/// `[xi, xj] = yij` for `i < j`.
pub fn free_step2(k: usize) -> GradedAlgebra {
    let mut b = GradedAlgebra::builder();
    for i in 1..=k {
        b = b.basis(&format!("x{i}"), qi(1));
    }
    for i in 1..=k {
        for j in i + 1..=k {
            b = b.basis(&format!("y{i}{j}"), qi(2));
        }
    }
    for i in 1..=k {
        for j in i + 1..=k {
            b = b.bracket(&format!("x{i}"), &format!("x{j}"), &format!("y{i}{j}"), qi(1));
        }
    }
    b.build().expect("free step-two table is well formed")
}

fn second_labels(a1: &GradedAlgebra, a2: &GradedAlgebra) -> Vec<String> {
    a2.labels()
        .iter()
        .map(|l| {
            if a1.labels().contains(l) {
                format!("{l}_2")
            } else {
                l.clone()
            }
        })
        .collect()
}

/// `a1 ⊕ a2` with the weights of `a2` multiplied by `scale2`.
pub fn direct_product(a1: &GradedAlgebra, a2: &GradedAlgebra, scale2: &Q) -> Result<GradedAlgebra> {
    if *scale2 <= Q::zero() {
        return Err(Error::InvalidAlgebra(format!(
            "scale {scale2} must be positive"
        )));
    }
    let n1 = a1.dim();
    let mut labels = a1.labels().to_vec();
    labels.extend(second_labels(a1, a2));
    let mut weights = a1.weights().to_vec();
    weights.extend(a2.weights().iter().map(|w| w.clone() * scale2.clone()));
    let mut entries = a1.entries().to_vec();
    entries.extend(a2.entries().iter().map(|e| BracketEntry {
        i: e.i + n1,
        j: e.j + n1,
        k: e.k + n1,
        coeff: e.coeff.clone(),
    }));
    GradedAlgebra::new(labels, weights, entries)
}

fn is_central(a: &GradedAlgebra, i: usize) -> bool {
    a.entries().iter().all(|e| e.i != i && e.j != i)
}

/// Central product identifying basis vector `p.0` of `a1` with `p.1` of `a2`
/// for each pair `p`; both sides must be central and of equal weight.
pub fn central_product(
    a1: &GradedAlgebra,
    a2: &GradedAlgebra,
    pairing: &[(usize, usize)],
) -> Result<GradedAlgebra> {
    let mut seen1 = vec![false; a1.dim()];
    let mut target = vec![None; a2.dim()];
    for &(i, j) in pairing {
        if i >= a1.dim() || j >= a2.dim() {
            return Err(Error::InvalidPairing(format!("pair ({i}, {j}) out of range")));
        }
        if seen1[i] || target[j].is_some() {
            return Err(Error::InvalidPairing(format!("pair ({i}, {j}) is not bijective")));
        }
        if !is_central(a1, i) || !is_central(a2, j) {
            return Err(Error::InvalidPairing(format!("pair ({i}, {j}) is not central")));
        }
        if a1.weight(i) != a2.weight(j) {
            return Err(Error::InvalidPairing(format!(
                "pair ({i}, {j}) joins weights {} and {}",
                a1.weight(i),
                a2.weight(j)
            )));
        }
        seen1[i] = true;
        target[j] = Some(i);
    }
    let labels2 = second_labels(a1, a2);
    let mut labels = a1.labels().to_vec();
    let mut weights = a1.weights().to_vec();
    let mut index2 = vec![0; a2.dim()];
    for j in 0..a2.dim() {
        match target[j] {
            Some(i) => index2[j] = i,
            None => {
                index2[j] = labels.len();
                labels.push(labels2[j].clone());
                weights.push(a2.weight(j).clone());
            }
        }
    }
    let mut entries = a1.entries().to_vec();
    for e in a2.entries() {
        let (i, j) = (index2[e.i], index2[e.j]);
        let (i, j, coeff) = if i < j {
            (i, j, e.coeff.clone())
        } else {
            (j, i, -e.coeff.clone())
        };
        entries.push(BracketEntry {
            i,
            j,
            k: index2[e.k],
            coeff,
        });
    }
    GradedAlgebra::new(labels, weights, entries)
}

/// Direct sum carrying the derivation `(D1, -D2)`: weights are positive on the
/// first factor and negated on the second.
#[derive(Clone, Debug)]
pub struct SolLike {
    algebra: GradedAlgebra,
    split: usize,
}

impl SolLike {
    /// The direct sum, graded by the signed weights.
    pub fn algebra(&self) -> &GradedAlgebra {
        &self.algebra
    }

    pub fn signed_weights(&self) -> &[Q] {
        self.algebra.weights()
    }

    /// Number of basis vectors from the first factor.
    pub fn first_factor_dim(&self) -> usize {
        self.split
    }
}

pub fn sol_like(a1: &GradedAlgebra, a2: &GradedAlgebra) -> Result<SolLike> {
    let neg = direct_product(a1, a2, &qi(1))?;
    let n1 = a1.dim();
    let weights: Vec<Q> = neg
        .weights()
        .iter()
        .enumerate()
        .map(|(i, w)| if i < n1 { w.clone() } else { -w.clone() })
        .collect();
    let algebra = GradedAlgebra::new(neg.labels().to_vec(), weights, neg.entries().to_vec())?;
    Ok(SolLike { algebra, split: n1 })
}

#[derive(Serialize, Deserialize)]
struct AlgebraFile {
    dim: usize,
    labels: Vec<String>,
    weights: Vec<[i64; 2]>,
    brackets: Vec<[i64; 5]>,
}

fn rational(num: i64, den: i64) -> Result<Q> {
    if den == 0 {
        return Err(Error::Format(format!("zero denominator in {num}/{den}")));
    }
    Ok(q(num, den))
}

fn index(i: i64, dim: usize) -> Result<usize> {
    usize::try_from(i)
        .ok()
        .filter(|&u| u < dim)
        .ok_or_else(|| Error::Format(format!("index {i} out of range 0..{dim}")))
}

/// Parses the JSON algebra format. Loading is syntactic; grading and Jacobi
/// are left to `validate_algebra`.
pub fn parse_algebra(text: &str) -> Result<GradedAlgebra> {
    let file: AlgebraFile = serde_json::from_str(text)?;
    if file.labels.len() != file.dim || file.weights.len() != file.dim {
        return Err(Error::Format(format!(
            "dim is {} but there are {} labels and {} weights",
            file.dim,
            file.labels.len(),
            file.weights.len()
        )));
    }
    let weights = file
        .weights
        .iter()
        .map(|&[n, d]| rational(n, d))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(file.brackets.len());
    for &[i, j, k, n, d] in &file.brackets {
        let (i, j, k) = (index(i, file.dim)?, index(j, file.dim)?, index(k, file.dim)?);
        if i >= j {
            return Err(Error::Format(format!(
                "bracket entry ({i}, {j}) must have i < j"
            )));
        }
        entries.push(BracketEntry {
            i,
            j,
            k,
            coeff: rational(n, d)?,
        });
    }
    GradedAlgebra::new(file.labels, weights, entries)
}

fn pair(x: &Q) -> Result<[i64; 2]> {
    match (x.numer().to_i64(), x.denom().to_i64()) {
        (Some(n), Some(d)) => Ok([n, d]),
        _ => Err(Error::Format(format!("{x} does not fit in 64-bit integers"))),
    }
}

pub fn algebra_to_json(alg: &GradedAlgebra) -> Result<String> {
    let file = AlgebraFile {
        dim: alg.dim(),
        labels: alg.labels().to_vec(),
        weights: alg.weights().iter().map(pair).collect::<Result<_>>()?,
        brackets: alg
            .entries()
            .iter()
            .map(|e| {
                let [n, d] = pair(&e.coeff)?;
                Ok([e.i as i64, e.j as i64, e.k as i64, n, d])
            })
            .collect::<Result<_>>()?,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn load_algebra(path: impl AsRef<Path>) -> Result<GradedAlgebra> {
    parse_algebra(&std::fs::read_to_string(path)?)
}

pub fn save_algebra(alg: &GradedAlgebra, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, algebra_to_json(alg)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::validate_algebra;
    use crate::carnot::decompose;

    #[test]
    fn fixtures_validate() {
        for name in FixtureName::ALL {
            let a = fixture(name);
            assert!(validate_algebra(&a).is_valid(), "{name}");
        }
        assert_eq!(fixture(FixtureName::Heisenberg3).step(), Some(2));
    }

    #[test]
    fn names_round_trip() {
        for name in FixtureName::ALL {
            assert_eq!(name.to_string().parse::<FixtureName>().unwrap(), name);
        }
        assert!("nope".parse::<FixtureName>().is_err());
        assert!("free_step2_1".parse::<FixtureName>().is_err());
    }

    #[test]
    fn alphas() {
        for name in [FixtureName::EngelHeis7, FixtureName::Ladder5, FixtureName::Heisprod4, FixtureName::Ladder8] {
            assert_eq!(*decompose(&fixture(name)).unwrap().alpha(), qi(2), "{name}");
        }
        let d = decompose(&fixture(FixtureName::EngelHeis7)).unwrap();
        assert_eq!(d.w().dim(), 4);
    }

    #[test]
    fn products() {
        let h = fixture(FixtureName::Heisenberg3);
        let p = direct_product(&h, &h, &qi(2)).unwrap();
        assert_eq!(p.dim(), 6);
        assert_eq!(*decompose(&p).unwrap().alpha(), qi(2));
        let c = central_product(&h, &h, &[(2, 2)]).unwrap();
        assert_eq!(c.dim(), 5);
        assert!(validate_algebra(&c).is_valid());
        assert!(central_product(&h, &h, &[(0, 0)]).is_err());
        let e = fixture(FixtureName::EngelHeis7);
        let s = sol_like(&e, &e).unwrap();
        assert_eq!(s.signed_weights()[6], qi(4));
        assert_eq!(s.signed_weights()[13], qi(-4));
        assert!(validate_algebra(s.algebra()).graded);
    }

    #[test]
    fn json_round_trip() {
        let h = fixture(FixtureName::EngelHeis7);
        let back = parse_algebra(&algebra_to_json(&h).unwrap()).unwrap();
        assert_eq!(back.entries(), h.entries());
        assert_eq!(back.weights(), h.weights());
        assert_eq!(back.labels(), h.labels());
        let bad = r#"{"dim":3,"labels":["x","y","z"],"weights":[[1,1],[1,1],[2,1]],"brackets":[[0,0,2,1,1]]}"#;
        assert!(parse_algebra(bad).is_err());
        let ungraded = r#"{"dim":3,"labels":["x","y","z"],"weights":[[1,1],[1,1],[3,1]],"brackets":[[0,1,2,1,1]]}"#;
        let a = parse_algebra(ungraded).unwrap();
        assert!(!validate_algebra(&a).graded);
    }
}
