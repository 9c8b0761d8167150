//! Periodized tensor-product Chui-Wang basis on the torus `[-1/2, 1/2)^d` and
//! hyperbolic index sets split into ANOVA terms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::spline::{chui_wang_wavelet, SplineError};
use crate::Rational;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("subset {subset} has coordinates outside 1..={d}")]
    InvalidSubset { subset: String, d: usize },
    #[error("cannot parse subset label '{0}'")]
    SubsetSyntax(String),
    #[error("index set must contain the empty subset")]
    MissingConstant,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("term {0} is not part of the index set")]
    UnknownTerm(String),
}

/// Fast floating-point evaluation of the (non-periodized) wavelet `ψ`, stored
/// as one polynomial per half-integer cell of `[0, 2m-1)`.
#[derive(Debug, Clone)]
pub struct WaveletKernel {
    m: u32,
    cells: Vec<Vec<f64>>,
}

/// Active translates of one level at one point: `(k, ψ^per_{j,k}(x))`.
pub type Active = SmallVec<[(u32, f64); 8]>;

impl WaveletKernel {
    pub fn new(m: i64) -> Result<Self, BasisError> {
        let psi = chui_wang_wavelet(m)?;
        let cells = (0..2 * (2 * m - 1))
            .map(|c| {
                let left = Rational::from_ratio(c, 2);
                psi.coefficients_at(&left).iter().map(|v| v.to_f64()).collect()
            })
            .collect();
        Ok(Self { m: m as u32, cells })
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    /// Support length `2m - 1` of `ψ`.
    pub fn support_len(&self) -> u32 {
        2 * self.m - 1
    }

    /// `ψ(x)`, zero outside `[0, 2m-1)`.
    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        let c2 = 2.0 * x;
        if !(c2 >= 0.0) || c2 >= self.cells.len() as f64 {
            return 0.0;
        }
        let c = c2 as usize;
        let dx = x - 0.5 * c as f64;
        self.cells[c].iter().rev().fold(0.0, |acc, a| acc * dx + a)
    }

    /// All translates `k` with nonzero `ψ^per_{j,k}(x)` at level `j ≥ 0`, with
    /// their values, in increasing `p` order before wrapping. Level `-1` yields
    /// the constant one.
    pub fn active(&self, j: i32, x: f64, out: &mut Active) {
        out.clear();
        if j < 0 {
            out.push((0, 1.0));
            return;
        }
        let count = 1i64 << j;
        let scale = (count as f64).sqrt();
        let t = x * count as f64;
        let p_max = t.floor() as i64;
        let len = self.support_len() as i64;
        for p in (p_max - len + 1)..=p_max {
            let v = self.psi(t - p as f64);
            if v == 0.0 {
                continue;
            }
            let k = p.rem_euclid(count) as u32;
            match out.iter_mut().find(|(kk, _)| *kk == k) {
                Some(entry) => entry.1 += scale * v,
                None => out.push((k, scale * v)),
            }
        }
    }

    /// `ψ^per_{j,k}(x)` for a single index.
    pub fn periodic(&self, j: i32, k: u32, x: f64) -> f64 {
        let mut a = Active::new();
        self.active(j, x, &mut a);
        a.iter().find(|(kk, _)| *kk == k).map_or(0.0, |e| e.1)
    }

    /// Tensor-product basis function at a point of the torus.
    pub fn eval_basis(&self, idx: &WaveletIndex, x: &[f64]) -> f64 {
        idx.j
            .iter()
            .zip(&idx.k)
            .zip(x)
            .map(|((&j, &k), &xi)| self.periodic(j, k, xi))
            .product()
    }
}

/// Ordered set of 0-based coordinates; rendered 1-based as `{1,5}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Subset(Vec<usize>);

impl Subset {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// From 0-based coordinates.
    pub fn new(mut coords: Vec<usize>) -> Self {
        coords.sort_unstable();
        coords.dedup();
        Self(coords)
    }

    /// From 1-based coordinates as written in labels.
    pub fn from_one_based(coords: &[usize]) -> Result<Self, BasisError> {
        if coords.contains(&0) {
            return Err(BasisError::SubsetSyntax(format!("{coords:?}")));
        }
        Ok(Self::new(coords.iter().map(|c| c - 1).collect()))
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Ordering used for index sets: cardinality first, then lexicographic.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }

    /// All subsets of `{0..d}` with at most `nu` elements in canonical order.
    pub fn all_up_to(d: usize, nu: usize) -> Vec<Subset> {
        let mut out = vec![Subset::empty()];
        let mut frontier = vec![Subset::empty()];
        for _ in 0..nu.min(d) {
            let mut next = Vec::new();
            for s in &frontier {
                let start = s.0.last().map_or(0, |l| l + 1);
                for c in start..d {
                    let mut v = s.0.clone();
                    v.push(c);
                    next.push(Subset(v));
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| (c + 1).to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl FromStr for Subset {
    type Err = BasisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .unwrap_or(t);
        let inner = inner.trim();
        if inner.is_empty() || inner == "∅" {
            return Ok(Subset::empty());
        }
        let coords = inner
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| BasisError::SubsetSyntax(s.to_string()))?;
        Subset::from_one_based(&coords)
    }
}

impl Serialize for Subset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A single basis index: level and translation per coordinate of the full
/// dimension, with `j = -1`, `k = 0` marking inactive coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WaveletIndex {
    pub j: Vec<i32>,
    pub k: Vec<u32>,
}

/// Coordinates with a nonnegative level.
pub fn anova_class(j: &[i32]) -> Subset {
    Subset(
        j.iter()
            .enumerate()
            .filter(|(_, &l)| l >= 0)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// One level vector inside a term, occupying `len = 2^{|j|}` consecutive columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBlock {
    pub levels: Vec<u32>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub subset: Subset,
    pub max_level: u32,
    pub offset: usize,
    pub len: usize,
    pub blocks: Vec<LevelBlock>,
}

/// Serializable description from which an [`IndexSet`] is rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSetSpec {
    pub d: usize,
    pub n: u32,
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub u: Subset,
    pub max_level: u32,
}

/// Hyperbolic index set partitioned into ANOVA terms.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    d: usize,
    n: u32,
    terms: Vec<Term>,
    size: usize,
}

/// Level vectors in `N_0^k` with `|j|_1 <= budget`, lexicographic.
fn level_vectors(k: usize, budget: u32) -> Vec<Vec<u32>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..=budget {
        for rest in level_vectors(k - 1, budget - first) {
            let mut v = Vec::with_capacity(k);
            v.push(first);
            v.extend(rest);
            out.push(v);
        }
    }
    out
}

impl IndexSet {
    /// All subsets in `subsets` share the maximal level `n`.
    pub fn new(d: usize, n: u32, subsets: &[Subset]) -> Result<Self, BasisError> {
        let terms: Vec<TermSpec> = subsets
            .iter()
            .map(|u| TermSpec {
                u: u.clone(),
                max_level: n,
            })
            .collect();
        Self::from_spec(&IndexSetSpec { d, n, terms })
    }

    /// Every subset of order at most `nu`.
    pub fn full(d: usize, n: u32, nu: usize) -> Result<Self, BasisError> {
        Self::new(d, n, &Subset::all_up_to(d, nu))
    }

    /// Levels chosen per term order: `levels[&order]`; orders without an entry
    /// use `default_level`.
    pub fn with_order_levels(
        d: usize,
        subsets: &[Subset],
        levels: &BTreeMap<usize, u32>,
        default_level: u32,
    ) -> Result<Self, BasisError> {
        let terms: Vec<TermSpec> = subsets
            .iter()
            .map(|u| TermSpec {
                u: u.clone(),
                max_level: levels.get(&u.len()).copied().unwrap_or(default_level),
            })
            .collect();
        let n = terms.iter().map(|t| t.max_level).max().unwrap_or(0);
        Self::from_spec(&IndexSetSpec { d, n, terms })
    }

    pub fn from_spec(spec: &IndexSetSpec) -> Result<Self, BasisError> {
        if spec.d == 0 {
            return Err(BasisError::ZeroDimension);
        }
        let mut specs = spec.terms.clone();
        for t in &specs {
            if t.u.coords().iter().any(|&c| c >= spec.d) {
                return Err(BasisError::InvalidSubset {
                    subset: t.u.to_string(),
                    d: spec.d,
                });
            }
        }
        specs.sort_by(|a, b| a.u.canonical_cmp(&b.u));
        specs.dedup_by(|a, b| a.u == b.u);
        if specs.first().is_none_or(|t| !t.u.is_empty()) {
            return Err(BasisError::MissingConstant);
        }
        let mut offset = 0;
        let terms = specs
            .into_iter()
            .map(|t| {
                let start = offset;
                let blocks = level_vectors(t.u.len(), t.max_level)
                    .into_iter()
                    .map(|levels| {
                        let len = 1usize << levels.iter().sum::<u32>();
                        let b = LevelBlock {
                            levels,
                            offset,
                            len,
                        };
                        offset += len;
                        b
                    })
                    .collect();
                Term {
                    subset: t.u,
                    max_level: t.max_level,
                    offset: start,
                    len: offset - start,
                    blocks,
                }
            })
            .collect();
        Ok(Self {
            d: spec.d,
            n: spec.n,
            terms,
            size: offset,
        })
    }

    pub fn spec(&self) -> IndexSetSpec {
        IndexSetSpec {
            d: self.d,
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| TermSpec {
                    u: t.subset.clone(),
                    max_level: t.max_level,
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_level(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, u: &Subset) -> Result<&Term, BasisError> {
        self.terms
            .iter()
            .find(|t| &t.subset == u)
            .ok_or_else(|| BasisError::UnknownTerm(u.to_string()))
    }

    pub fn subsets(&self) -> Vec<Subset> {
        self.terms.iter().map(|t| t.subset.clone()).collect()
    }

    /// Largest level used along any coordinate.
    pub fn finest_level(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| !t.subset.is_empty())
            .map(|t| t.max_level)
            .max()
            .unwrap_or(0)
    }

    /// Index stored in column `col`.
    pub fn entry(&self, col: usize) -> Option<WaveletIndex> {
        let term = self
            .terms
            .iter()
            .find(|t| col >= t.offset && col < t.offset + t.len)?;
        let block = term
            .blocks
            .iter()
            .find(|b| col >= b.offset && col < b.offset + b.len)?;
        let mut rem = col - block.offset;
        let mut j = vec![-1; self.d];
        let mut k = vec![0u32; self.d];
        for (pos, &c) in term.subset.coords().iter().enumerate().rev() {
            let l = block.levels[pos];
            j[c] = l as i32;
            k[c] = (rem & ((1 << l) - 1)) as u32;
            rem >>= l;
        }
        Some(WaveletIndex { j, k })
    }

    /// All entries in column order.
    pub fn entries(&self) -> Vec<WaveletIndex> {
        (0..self.size).filter_map(|c| self.entry(c)).collect()
    }

    pub fn column_of(&self, idx: &WaveletIndex) -> Option<usize> {
        if idx.j.len() != self.d || idx.k.len() != self.d {
            return None;
        }
        let u = anova_class(&idx.j);
        let term = self.terms.iter().find(|t| t.subset == u)?;
        let levels: Vec<u32> = u.coords().iter().map(|&c| idx.j[c] as u32).collect();
        let block = term.blocks.iter().find(|b| b.levels == levels)?;
        let mut col = 0usize;
        for (pos, &c) in u.coords().iter().enumerate() {
            let l = block.levels[pos];
            if idx.k[c] >= 1 << l {
                return None;
            }
            col = (col << l) | idx.k[c] as usize;
        }
        if idx.j.iter().zip(&idx.k).any(|(&j, &k)| j < -1 || (j == -1 && k != 0)) {
            return None;
        }
        Some(block.offset + col)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(IndexSet::full(1, 3, 1).unwrap().len(), 16);
        let s = IndexSet::full(3, 3, 3).unwrap();
        assert_eq!(s.len(), 304);
        let sizes: Vec<usize> = s.terms().iter().map(|t| t.len).collect();
        assert_eq!(sizes, vec![1, 15, 15, 15, 49, 49, 49, 111]);
        assert_eq!(IndexSet::new(5, 4, &[Subset::empty()]).unwrap().len(), 1);
    }

    #[test]
    fn subset_labels() {
        let u: Subset = "{1,5}".parse().unwrap();
        assert_eq!(u.coords(), &[0, 4]);
        assert_eq!(u.to_string(), "{1,5}");
        assert_eq!("{}".parse::<Subset>().unwrap(), Subset::empty());
        assert!("{0}".parse::<Subset>().is_err());
        assert_eq!(anova_class(&[2, -1, 0]).to_string(), "{1,3}");
        assert!(anova_class(&[-1, -1, -1]).is_empty());
    }

    #[test]
    fn invalid_subset_rejected() {
        let err = IndexSet::new(2, 1, &[Subset::empty(), Subset::new(vec![2])]);
        assert!(matches!(err, Err(BasisError::InvalidSubset { .. })));
        let err = IndexSet::new(2, 1, &[Subset::new(vec![0])]);
        assert_eq!(err, Err(BasisError::MissingConstant));
    }

    #[test]
    fn haar_values() {
        let k = WaveletKernel::new(1).unwrap();
        assert_eq!(k.psi(0.25), 1.0);
        assert_eq!(k.psi(0.75), -1.0);
        assert_eq!(k.psi(1.0), 0.0);
        let mut a = Active::new();
        k.active(2, 0.1, &mut a);
        assert_eq!(a.len(), 1);
        k.active(0, -0.3, &mut a);
        assert_eq!(a.as_slice(), &[(0, -1.0)]);
    }

    #[test]
    fn column_roundtrip() {
        let s = IndexSet::full(3, 3, 2).unwrap();
        for c in 0..s.len() {
            let e = s.entry(c).unwrap();
            assert_eq!(s.column_of(&e), Some(c));
        }
    }
}
