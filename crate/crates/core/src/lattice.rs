//! Subset-lattice combinatorics over a set of `n` monitor paths.
//!
//! Path sets are bitmasks; bit `j` marks monitor path `j`. The empty set is
//! never part of a lattice, so a full lattice over `n` paths has `2^n - 1`
//! entries. Dense vectors over the full lattice are indexed by bitmask and
//! carry an unused slot at index 0.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::ops::{AddAssign, SubAssign};

use nalgebra::DMatrix;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of monitor paths a [`PathSet`] can address.
pub const MAX_PATHS: usize = 64;

/// A set of monitor paths, stored as a bitmask.
///
/// Ordering is by cardinality first, then by numeric bitmask. This is the
/// canonical ordering used for every vector and matrix layout in the crate.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathSet(u64);

impl PathSet {
    pub const EMPTY: PathSet = PathSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        PathSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(path: usize) -> Self {
        assert!(path < MAX_PATHS, "path index {path} out of range");
        PathSet(1 << path)
    }

    /// All `n` paths.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_PATHS, "{n} paths exceed the bitmask width");
        if n == MAX_PATHS {
            PathSet(u64::MAX)
        } else {
            PathSet((1u64 << n) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(paths: I) -> Self {
        paths
            .into_iter()
            .fold(PathSet::EMPTY, |acc, p| acc.with(p))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, path: usize) -> bool {
        path < MAX_PATHS && self.0 & (1 << path) != 0
    }

    pub fn is_subset_of(self, other: PathSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_superset_of(self, other: PathSet) -> bool {
        other.is_subset_of(self)
    }

    pub fn is_proper_subset_of(self, other: PathSet) -> bool {
        self != other && self.is_subset_of(other)
    }

    pub fn union(self, other: PathSet) -> Self {
        PathSet(self.0 | other.0)
    }

    pub fn intersection(self, other: PathSet) -> Self {
        PathSet(self.0 & other.0)
    }

    pub fn difference(self, other: PathSet) -> Self {
        PathSet(self.0 & !other.0)
    }

    pub fn with(self, path: usize) -> Self {
        self.union(PathSet::singleton(path))
    }

    pub fn without(self, path: usize) -> Self {
        self.difference(PathSet::singleton(path))
    }

    /// True when every member indexes one of `n` paths.
    pub fn fits(self, n: usize) -> bool {
        n >= MAX_PATHS || self.0 >> n == 0
    }

    pub fn check_fits(self, n: usize) -> Result<()> {
        if self.fits(n) {
            Ok(())
        } else {
            Err(Error::OutOfUniverse { set: self, n })
        }
    }

    /// Member path indices in ascending order.
    pub fn iter(self) -> Members {
        Members(self.0)
    }

    /// Lowest member, if any.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// All nonempty subsets (including `self`), in decreasing bitmask order.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(self.0).filter(|&b| b != 0),
        }
    }

    /// All subsets with exactly `k` members, in ascending bitmask order.
    pub fn subsets_of_size(self, k: usize) -> Vec<PathSet> {
        let members: Vec<usize> = self.iter().collect();
        let mut out = Vec::new();
        if k == 0 || k > members.len() {
            return out;
        }
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(PathSet::from_indices(idx.iter().map(|&i| members[i])));
            // advance the combination
            let mut pos = k;
            while pos > 0 && idx[pos - 1] == members.len() - k + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for j in pos..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
        out.sort_unstable_by_key(|s| s.0);
        out
    }

    /// 0/1 membership vector of length `n`.
    pub fn characteristic_vector(self, n: usize) -> Vec<u8> {
        (0..n).map(|j| u8::from(self.contains(j))).collect()
    }

    pub fn from_characteristic(column: &[u8]) -> Self {
        PathSet::from_indices(
            column
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(j, _)| j),
        )
    }
}

impl Ord for PathSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for PathSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PathSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, p) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "p{}", p + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for PathSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let j = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(j)
    }
}

pub struct Subsets {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = PathSet;

    fn next(&mut self) -> Option<PathSet> {
        let cur = self.next?;
        let following = cur.wrapping_sub(1) & self.mask;
        self.next = (following != 0).then_some(following);
        Some(PathSet(cur))
    }
}

/// All nonempty path sets over `n` paths in canonical order.
pub fn lattice(n: usize) -> Vec<PathSet> {
    assert!(n < 32, "full lattice over {n} paths is too large to enumerate");
    let mut sets: Vec<PathSet> = (1u64..(1u64 << n)).map(PathSet).collect();
    sets.sort_unstable();
    sets
}

/// Union of the power sets of `tops`, without the empty set, in canonical order.
pub fn downward_closure(tops: &[PathSet]) -> Vec<PathSet> {
    let mut seen = HashSet::new();
    for top in tops {
        for s in top.subsets() {
            seen.insert(s);
        }
    }
    let mut out: Vec<PathSet> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Binomial coefficient, saturating at `u64::MAX`. Negative-style arguments
/// (`k > n`) give zero.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * u128::from(n - j) / u128::from(j + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// A multiset of monitor paths, stored as a multiplicity per path.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(mult: Vec<u32>) -> Self {
        MultiIndex(mult)
    }

    /// The multi-index with multiplicity one on each listed path.
    pub fn unit(n: usize, paths: &[usize]) -> Self {
        let mut mult = vec![0; n];
        for &p in paths {
            mult[p] += 1;
        }
        MultiIndex(mult)
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.0
    }

    /// Number of paths the index is defined over.
    pub fn width(&self) -> usize {
        self.0.len()
    }

    /// Total multiplicity, i.e. the cumulant order.
    pub fn size(&self) -> usize {
        self.0.iter().map(|&m| m as usize).sum()
    }

    pub fn support(&self) -> PathSet {
        PathSet::from_indices(
            self.0
                .iter()
                .enumerate()
                .filter(|(_, &m)| m >= 1)
                .map(|(j, _)| j),
        )
    }

    /// Path indices repeated by multiplicity, ascending.
    pub fn expand(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(j, &m)| std::iter::repeat_n(j, m as usize))
            .collect()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, m) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

/// Every multi-index over `n` paths whose support is `set` and whose size is
/// `order`. Compositions are listed with the first member's multiplicity
/// descending, so the first entry puts all excess multiplicity on the lowest
/// path.
pub fn representative_multi_indices(set: PathSet, order: usize, n: usize) -> Result<Vec<MultiIndex>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    set.check_fits(n)?;
    let members: Vec<usize> = set.iter().collect();
    if order < members.len() {
        return Err(Error::NoRepresentative {
            order,
            size: members.len(),
        });
    }
    let mut out = Vec::new();
    let mut parts = vec![0u32; members.len()];
    compositions(order as u32, 0, &mut parts, &mut |parts| {
        let mut mult = vec![0u32; n];
        for (&p, &m) in members.iter().zip(parts) {
            mult[p] = m;
        }
        out.push(MultiIndex(mult));
    });
    Ok(out)
}

fn compositions(remaining: u32, pos: usize, parts: &mut [u32], emit: &mut impl FnMut(&[u32])) {
    let slots_after = (parts.len() - pos - 1) as u32;
    if slots_after == 0 {
        parts[pos] = remaining;
        emit(parts);
        return;
    }
    for m in (1..=remaining - slots_after).rev() {
        parts[pos] = m;
        compositions(remaining - m, pos + 1, parts, emit);
    }
}

/// The deterministic representative: excess multiplicity on the lowest path.
pub fn canonical_representative(set: PathSet, order: usize, n: usize) -> Result<MultiIndex> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    set.check_fits(n)?;
    if order < set.len() {
        return Err(Error::NoRepresentative {
            order,
            size: set.len(),
        });
    }
    let mut mult = vec![0u32; n];
    for p in set.iter() {
        mult[p] = 1;
    }
    let lowest = set.first().expect("nonempty");
    mult[lowest] += (order - set.len()) as u32;
    Ok(MultiIndex(mult))
}

/// Where a cumulant vector is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Full,
    Restricted(BTreeSet<PathSet>),
}

/// A real-valued map over path sets, tagged with its cumulant order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantVector {
    order: usize,
    n: usize,
    domain: Domain,
    entries: BTreeMap<PathSet, f64>,
}

impl CumulantVector {
    /// All-zero vector over the full lattice.
    pub fn zeros(order: usize, n: usize) -> Self {
        let entries = lattice(n).into_iter().map(|s| (s, 0.0)).collect();
        CumulantVector {
            order,
            n,
            domain: Domain::Full,
            entries,
        }
    }

    /// Full-lattice vector from a dense bitmask-indexed slice of length `2^n`.
    /// Slot 0 is ignored.
    pub fn from_dense(order: usize, n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != 1usize << n {
            return Err(Error::Dimension(format!(
                "dense vector has {} slots, expected {}",
                dense.len(),
                1usize << n
            )));
        }
        let entries = (1..dense.len())
            .map(|b| (PathSet(b as u64), dense[b]))
            .collect();
        Ok(CumulantVector {
            order,
            n,
            domain: Domain::Full,
            entries,
        })
    }

    /// Vector on an explicit list of path sets; values must cover exactly
    /// the listed sets.
    pub fn restricted(order: usize, n: usize, values: impl IntoIterator<Item = (PathSet, f64)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (set, v) in values {
            if set.is_empty() {
                return Err(Error::EmptySet);
            }
            set.check_fits(n)?;
            if entries.insert(set, v).is_some() {
                return Err(Error::DuplicateSet(set));
            }
        }
        let domain = Domain::Restricted(entries.keys().copied().collect());
        Ok(CumulantVector {
            order,
            n,
            domain,
            entries,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn is_full(&self) -> bool {
        matches!(self.domain, Domain::Full)
    }

    /// Value at `set`; zero when the set has no entry.
    pub fn get(&self, set: PathSet) -> f64 {
        self.entries.get(&set).copied().unwrap_or(0.0)
    }

    /// Overwrite an entry. The set must lie in the declared domain.
    pub fn set(&mut self, set: PathSet, value: f64) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        set.check_fits(self.n)?;
        if let Domain::Restricted(dom) = &self.domain {
            if !dom.contains(&set) {
                return Err(Error::invalid(format!("{set} is outside the vector's domain")));
            }
        }
        self.entries.insert(set, value);
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<PathSet, f64> {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (PathSet, f64)> + '_ {
        self.entries.iter().map(|(&s, &v)| (s, v))
    }

    /// Bitmask-indexed dense copy of length `2^n`.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; 1usize << self.n];
        for (&s, &v) in &self.entries {
            dense[s.0 as usize] = v;
        }
        dense
    }

    /// Sets whose magnitude exceeds `tol`.
    pub fn support(&self, tol: f64) -> Vec<PathSet> {
        self.entries
            .iter()
            .filter(|(_, v)| v.abs() > tol)
            .map(|(&s, _)| s)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Superset sums in place on a bitmask-indexed slice of length `2^n`:
/// `a[P] <- sum over Q ⊇ P of a[Q]`. Runs in `O(n 2^n)`.
pub fn superset_sum_in_place<T>(values: &mut [T])
where
    T: Clone + AddAssign,
{
    let len = values.len();
    assert!(len.is_power_of_two(), "dense lattice length must be a power of two");
    let mut bit = 1;
    while bit < len {
        for mask in 0..len {
            if mask & bit == 0 {
                let hi = values[mask | bit].clone();
                values[mask] += hi;
            }
        }
        bit <<= 1;
    }
}

/// Inverse of [`superset_sum_in_place`]:
/// `a[P] <- sum over Q ⊇ P of (-1)^{|Q|-|P|} a[Q]`.
pub fn superset_mobius_in_place<T>(values: &mut [T])
where
    T: Clone + SubAssign,
{
    let len = values.len();
    assert!(len.is_power_of_two(), "dense lattice length must be a power of two");
    let mut bit = 1;
    while bit < len {
        for mask in 0..len {
            if mask & bit == 0 {
                let hi = values[mask | bit].clone();
                values[mask] -= hi;
            }
        }
        bit <<= 1;
    }
}

/// Direct `O(3^n)` transforms that enumerate supersets explicitly.
pub mod naive {
    use super::*;

    fn supersets(mask: u64, full: u64) -> impl Iterator<Item = u64> {
        let free = full & !mask;
        let mut sub = free;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = mask | sub;
            if sub == 0 {
                done = true;
            } else {
                sub = (sub - 1) & free;
            }
            Some(out)
        })
    }

    pub fn superset_sum<T>(values: &[T]) -> Vec<T>
    where
        T: Clone + Zero + AddAssign,
    {
        let len = values.len();
        let full = (len - 1) as u64;
        let mut out = vec![T::zero(); len];
        for mask in 1..len {
            let mut acc = T::zero();
            for q in supersets(mask as u64, full) {
                acc += values[q as usize].clone();
            }
            out[mask] = acc;
        }
        out
    }

    pub fn superset_mobius<T>(values: &[T]) -> Vec<T>
    where
        T: Clone + Zero + AddAssign + SubAssign,
    {
        let len = values.len();
        let full = (len - 1) as u64;
        let mut out = vec![T::zero(); len];
        for mask in 1..len {
            let base = (mask as u64).count_ones();
            let mut acc = T::zero();
            for q in supersets(mask as u64, full) {
                if (q.count_ones() - base).is_multiple_of(2) {
                    acc += values[q as usize].clone();
                } else {
                    acc -= values[q as usize].clone();
                }
            }
            out[mask] = acc;
        }
        out
    }
}

fn require_full(v: &CumulantVector) -> Result<()> {
    if v.is_full() {
        Ok(())
    } else {
        Err(Error::invalid("Mobius transforms on a vector need the full lattice"))
    }
}

/// Common cumulants from exact cumulants: `f(P) = sum over Q ⊇ P of g(Q)`.
pub fn mobius_forward(g: &CumulantVector) -> Result<CumulantVector> {
    require_full(g)?;
    let mut dense = g.to_dense();
    superset_sum_in_place(&mut dense);
    dense[0] = 0.0;
    CumulantVector::from_dense(g.order, g.n, &dense)
}

/// Exact cumulants from common cumulants:
/// `g(P) = sum over Q ⊇ P of (-1)^{|Q|-|P|} f(Q)`.
pub fn mobius_inverse(f: &CumulantVector) -> Result<CumulantVector> {
    require_full(f)?;
    let mut dense = f.to_dense();
    superset_mobius_in_place(&mut dense);
    dense[0] = 0.0;
    CumulantVector::from_dense(f.order, f.n, &dense)
}

fn check_domain(domain: &[PathSet]) -> Result<()> {
    let mut seen = HashSet::with_capacity(domain.len());
    for &s in domain {
        if s.is_empty() {
            return Err(Error::EmptySet);
        }
        if !seen.insert(s) {
            return Err(Error::DuplicateSet(s));
        }
    }
    Ok(())
}

/// Mobius inversion restricted to `domain`: entry `(P, Q)` is
/// `(-1)^{|Q|-|P|}` when `Q ⊇ P` and zero otherwise. Rows and columns follow
/// the order of `domain`.
pub fn inversion_matrix(domain: &[PathSet]) -> Result<DMatrix<f64>> {
    check_domain(domain)?;
    let k = domain.len();
    Ok(DMatrix::from_fn(k, k, |r, c| {
        let (p, q) = (domain[r], domain[c]);
        if q.is_superset_of(p) {
            sign(q.len() - p.len())
        } else {
            0.0
        }
    }))
}

/// Zeta matrix on `domain`: entry `(P, Q)` is 1 when `Q ⊇ P`.
pub fn zeta_matrix(domain: &[PathSet]) -> Result<DMatrix<f64>> {
    check_domain(domain)?;
    let k = domain.len();
    Ok(DMatrix::from_fn(k, k, |r, c| {
        if domain[c].is_superset_of(domain[r]) {
            1.0
        } else {
            0.0
        }
    }))
}

fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Mobius inversion specialised to a support estimate under a size cap.
#[derive(Clone, Debug)]
pub struct ModifiedInversion {
    /// Path sets of the support estimate with at most `s` members.
    pub rows: Vec<PathSet>,
    /// `rows` followed by the bounding sets larger than `s`.
    pub cols: Vec<PathSet>,
    pub matrix: DMatrix<f64>,
}

impl ModifiedInversion {
    pub fn col_index(&self) -> HashMap<PathSet, usize> {
        self.cols.iter().enumerate().map(|(j, &s)| (s, j)).collect()
    }
}

/// Builds the inversion matrix that recovers exact cumulants on the small
/// sets of a support estimate from common cumulants on those sets and on the
/// bounding sets.
///
/// The reconstruction is exact whenever exact cumulants vanish outside the
/// support estimate and on every set larger than `s` that is not itself a
/// bounding set. Bounding sets of size at most `s` are ordinary columns; each
/// larger bounding set `B` contributes
/// `-(-1)^{s-|P|} C(|B|-|P|-1, s-|P|)` to every row `P ⊆ B`.
pub fn modified_inversion_matrix(
    support_estimate: &[PathSet],
    bounding: &[PathSet],
    s: usize,
) -> Result<ModifiedInversion> {
    if s == 0 {
        return Err(Error::invalid("size threshold s must be at least 1"));
    }
    check_domain(support_estimate)?;
    check_domain(bounding)?;
    check_antichain(bounding)?;

    let mut rows: Vec<PathSet> = support_estimate
        .iter()
        .copied()
        .filter(|p| p.len() <= s)
        .collect();
    rows.sort_unstable();
    let mut large: Vec<PathSet> = bounding.iter().copied().filter(|b| b.len() > s).collect();
    large.sort_unstable();

    let row_set: HashSet<PathSet> = rows.iter().copied().collect();
    for b in bounding.iter().filter(|b| b.len() <= s) {
        if !row_set.contains(b) {
            return Err(Error::invalid(format!(
                "bounding set {b} is missing from the support estimate"
            )));
        }
    }

    let mut cols = rows.clone();
    cols.extend(large.iter().copied());
    let nrows = rows.len();
    let mut matrix = DMatrix::zeros(nrows, cols.len());
    for (r, &p) in rows.iter().enumerate() {
        for (c, &q) in rows.iter().enumerate() {
            if q.is_superset_of(p) {
                matrix[(r, c)] = sign(q.len() - p.len());
            }
        }
        for (k, &b) in large.iter().enumerate() {
            if b.is_superset_of(p) {
                let gap = (s - p.len()) as u64;
                let coeff = binomial((b.len() - p.len() - 1) as u64, gap) as f64;
                matrix[(r, nrows + k)] = -sign(gap as usize) * coeff;
            }
        }
    }
    Ok(ModifiedInversion { rows, cols, matrix })
}

/// Fails unless no set in `sets` strictly contains another.
pub fn check_antichain(sets: &[PathSet]) -> Result<()> {
    for &a in sets {
        for &b in sets {
            if a.is_proper_subset_of(b) {
                return Err(Error::NotAntichain { inner: a, outer: b });
            }
        }
    }
    Ok(())
}
