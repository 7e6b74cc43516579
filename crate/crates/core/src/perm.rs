//! Permutations of `{0, .., n-1}` stored as forward maps, together with
//! cycle-type bookkeeping, the overlap metric and exact counting of
//! permutations by number of fixed points.
//!
//! Storage is 0-based; every textual or serialized form is 1-based, so the
//! permutation `[2,1,4,3]` swaps the first two and the last two elements.
//!
//! A permutation `pi` acts on vectors by `(pi v)[i] = v[pi(i)]`, matching the
//! permutation matrix with a one in entry `(i, pi(i))` of every row.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    /// Builds a permutation from a 0-based image array, checking bijectivity.
    pub fn from_zero_based(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::InvalidArgument("permutation must be non-empty".into()));
        }
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::InvalidArgument(format!(
                    "not a bijection of 1..{n}: {}",
                    one_based_string(&map)
                )));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    /// Builds a permutation from the 1-based image array `(pi(1), .., pi(n))`.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::InvalidArgument(
                "1-based permutation entries must be >= 1".into(),
            ));
        }
        Self::from_zero_based(images.iter().map(|&v| v - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Image of `i` (0-based).
    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|&v| v + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        check_same_len(self, other)?;
        Ok(Permutation {
            map: other.map.iter().map(|&j| self.map[j]).collect(),
        })
    }

    /// `(pi v)[i] = v[pi(i)]`.
    pub fn apply<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.len() {
            return Err(Error::Dimension(format!(
                "permutation of size {} applied to vector of length {}",
                self.len(),
                v.len()
            )));
        }
        Ok(self.map.iter().map(|&j| v[j]).collect())
    }

    /// `(pi^T v)[pi(i)] = v[i]`; the inverse action of [`Permutation::apply`].
    pub fn apply_transpose<T: Copy + Default>(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.len() {
            return Err(Error::Dimension(format!(
                "permutation of size {} applied to vector of length {}",
                self.len(),
                v.len()
            )));
        }
        let mut out = vec![T::default(); v.len()];
        for (i, &j) in self.map.iter().enumerate() {
            out[j] = v[i];
        }
        Ok(out)
    }

    /// Dense permutation matrix with `M[(i, pi(i))] = 1`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &j) in self.map.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        m
    }

    /// Row-permuted copy of `x`: row `i` of the result is row `pi(i)` of `x`.
    pub fn permute_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.len() {
            return Err(Error::Dimension(format!(
                "permutation of size {} applied to matrix with {} rows",
                self.len(),
                x.nrows()
            )));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(self.map[i], j)]))
    }

    pub fn fixed_points(&self) -> usize {
        self.map.iter().enumerate().filter(|(i, &v)| *i == v).count()
    }

    /// Lengths of the disjoint cycles, in order of their smallest element.
    pub fn cycle_lengths(&self) -> Vec<usize> {
        let n = self.len();
        let mut visited = vec![false; n];
        let mut lengths = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                i = self.map[i];
                len += 1;
            }
            lengths.push(len);
        }
        lengths
    }

    pub fn cycle_type(&self) -> CycleType {
        let mut counts = BTreeMap::new();
        for len in self.cycle_lengths() {
            *counts.entry(len).or_insert(0) += 1;
        }
        CycleType {
            n: self.len(),
            counts,
        }
    }
}

fn check_same_len(a: &Permutation, b: &Permutation) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "permutation sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn one_based_string(map: &[usize]) -> String {
    let items: Vec<String> = map.iter().map(|v| (v + 1).to_string()).collect();
    format!("[{}]", items.join(","))
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&one_based_string(&self.map))
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{}", self)
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Parses `"[2,1,4,3]"` or `"2,1,4,3"` (1-based).
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let images = inner
            .split(',')
            .map(|tok| {
                tok.trim().parse::<usize>().map_err(|e| {
                    Error::InvalidArgument(format!("bad permutation entry {tok:?}: {e}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Permutation::from_one_based(&images)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Permutation::from_one_based(&images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.to_one_based()
    }
}

/// Multiset of cycle lengths `{k: n_k}` of a permutation on `n` points.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CycleType {
    n: usize,
    counts: BTreeMap<usize, usize>,
}

impl CycleType {
    /// Validates `Σ k n_k = n`; zero counts are dropped.
    pub fn new(n: usize, counts: BTreeMap<usize, usize>) -> Result<Self> {
        let counts: BTreeMap<usize, usize> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        if counts.keys().any(|&k| k == 0 || k > n) {
            return Err(Error::Invariant(format!(
                "cycle lengths must lie in 1..={n}: {counts:?}"
            )));
        }
        let total: usize = counts.iter().map(|(k, c)| k * c).sum();
        if total != n || n == 0 {
            return Err(Error::Invariant(format!(
                "cycle type {counts:?} covers {total} points, expected {n}"
            )));
        }
        Ok(CycleType { n, counts })
    }

    /// Builds the cycle type from counts alone, with `n = Σ k n_k`.
    pub fn from_counts(counts: BTreeMap<usize, usize>) -> Result<Self> {
        let n = counts.iter().map(|(k, c)| k * c).sum();
        Self::new(n, counts)
    }

    pub fn identity(n: usize) -> Self {
        CycleType {
            n,
            counts: BTreeMap::from([(1, n)]),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `n_k`, zero when no cycle has length `k`.
    pub fn count(&self, k: usize) -> usize {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<usize, usize> {
        &self.counts
    }

    pub fn fixed_points(&self) -> usize {
        self.count(1)
    }

    /// Total number of cycles, fixed points included.
    pub fn num_cycles(&self) -> usize {
        self.counts.values().sum()
    }

    /// A permutation with this cycle type: consecutive blocks, shortest cycles first.
    pub fn representative(&self) -> Permutation {
        let mut map = Vec::with_capacity(self.n);
        let mut offset = 0;
        for (&k, &c) in &self.counts {
            for _ in 0..c {
                for j in 0..k {
                    map.push(offset + (j + 1) % k);
                }
                offset += k;
            }
        }
        Permutation { map }
    }
}

impl fmt::Display for CycleType {
    /// `"1:2,3:1"` style listing.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(|(k, c)| format!("{k}:{c}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for CycleType {
    type Err = Error;

    /// Parses `"k:n_k,k:n_k,..."`; `n` is inferred as `Σ k n_k`.
    fn from_str(s: &str) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, c) = part.split_once(':').ok_or_else(|| {
                Error::InvalidArgument(format!("cycle type entry {part:?} is not k:count"))
            })?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidArgument(format!("bad cycle type entry {part:?}: {e}")))
            };
            *counts.entry(parse(k)?).or_insert(0) += parse(c)?;
        }
        CycleType::from_counts(counts)
    }
}

/// Fraction of indices on which the two permutations agree.
pub fn overlap(a: &Permutation, b: &Permutation) -> Result<f64> {
    check_same_len(a, b)?;
    let agree = a.map.iter().zip(&b.map).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.len() as f64)
}

/// Uniformly random permutation (Fisher–Yates over the supplied generator).
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(rng);
    Permutation { map }
}

/// Uniformly random derangement by rejection; about `e` draws on average.
pub fn sample_derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Permutation> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("no derangement of {n} points")));
    }
    loop {
        let p = sample_uniform(n, rng);
        if p.fixed_points() == 0 {
            return Ok(p);
        }
    }
}

/// Derangement number `D(m)` via `D(m) = (m-1)(D(m-1) + D(m-2))`.
pub fn derangements(m: usize) -> BigUint {
    let (mut prev, mut cur) = (BigUint::one(), BigUint::zero());
    if m == 0 {
        return prev;
    }
    for k in 2..=m {
        let next = BigUint::from(k - 1) * (&cur + &prev);
        prev = cur;
        cur = next;
    }
    cur
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

pub fn factorial(n: usize) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// Number of permutations of `n` points with exactly `n1` fixed points,
/// `C(n, n1) · D(n - n1)`.
pub fn count_with_fixed_points(n: usize, n1: usize) -> Result<BigUint> {
    if n == 0 || n1 > n {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= n1 <= n with n >= 1, got n={n}, n1={n1}"
        )));
    }
    if n1 + 1 == n {
        return Err(Error::InvalidArgument(format!(
            "no permutation of {n} points has exactly {n1} fixed points"
        )));
    }
    Ok(binomial(n, n1) * derangements(n - n1))
}

/// Crude union-bound count `C(n, n1) · (n - n1)!`, an upper bound on
/// [`count_with_fixed_points`].
pub fn count_with_fixed_points_upper(n: usize, n1: usize) -> Result<BigUint> {
    if n1 > n {
        return Err(Error::InvalidArgument(format!("n1={n1} exceeds n={n}")));
    }
    Ok(binomial(n, n1) * factorial(n - n1))
}

/// All permutations of `n` points in lexicographic order.
pub fn lexicographic(n: usize) -> LexPermutations {
    LexPermutations {
        next: Some((0..n).collect()),
    }
}

pub struct LexPermutations {
    next: Option<Vec<usize>>,
}

impl Iterator for LexPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation { map: current })
    }
}

fn next_lexicographic(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}
