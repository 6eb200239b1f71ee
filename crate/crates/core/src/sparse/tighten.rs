use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::cumulants::special::binomial_cdf;
use crate::error::{Error, Result};
use crate::lattice::{binomial, check_antichain, downward_closure, PathSet};

/// A family of path sets whose subsets cover every set with a nonzero
/// common cumulant. Stored sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundingTopology {
    sets: Vec<PathSet>,
}

impl BoundingTopology {
    pub fn new(sets: impl IntoIterator<Item = PathSet>) -> Result<Self> {
        let mut sets: Vec<PathSet> = sets.into_iter().collect();
        if sets.iter().any(|s| s.is_empty()) {
            return Err(Error::EmptySet);
        }
        sets.sort_unstable();
        sets.dedup();
        Ok(BoundingTopology { sets })
    }

    /// The single set of all `n` paths.
    pub fn full(n: usize) -> Self {
        BoundingTopology {
            sets: vec![PathSet::full(n)],
        }
    }

    pub fn sets(&self) -> &[PathSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn is_antichain(&self) -> bool {
        check_antichain(&self.sets).is_ok()
    }

    /// Drops every set strictly contained in another one. The support
    /// estimate is unchanged.
    pub fn maximal(&self) -> Self {
        let sets = self
            .sets
            .iter()
            .copied()
            .filter(|a| !self.sets.iter().any(|b| a.is_proper_subset_of(*b)))
            .collect();
        BoundingTopology { sets }
    }

    /// Every nonempty subset of some member.
    pub fn support_estimate(&self) -> Vec<PathSet> {
        downward_closure(&self.sets)
    }

    pub fn covers(&self, set: PathSet) -> bool {
        self.sets.iter().any(|b| set.is_subset_of(*b))
    }

    /// Largest member size.
    pub fn max_size(&self) -> usize {
        self.sets.iter().map(|s| s.len()).max().unwrap_or(0)
    }
}

/// How many of the `C(q, i)` size-`i` subsets of a size-`q` set must test
/// nonzero for the set to be retained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Tolerates type II errors: each true nonzero is missed with
    /// probability `beta`. `t` is one less than the `gamma`-quantile of
    /// `Binomial(C(q, i), 1 - beta)`; see [`threshold`].
    Binomial { beta: f64, gamma: f64 },
    /// All subsets must pass. Right for an oracle with no type II errors.
    Strict,
    Constant { value: i64 },
    /// Same model, but `t` is the largest value with
    /// `P(count < t) < gamma`, so a set whose subsets are all truly nonzero
    /// is split with probability below `gamma`. One more than
    /// [`ThresholdRule::Binomial`].
    BinomialTail { beta: f64, gamma: f64 },
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<()> {
        if let ThresholdRule::Binomial { beta, gamma } | ThresholdRule::BinomialTail { beta, gamma } = *self {
            if !(beta > 0.0 && beta < 1.0 && gamma > 0.0 && gamma < 1.0) {
                return Err(Error::invalid(format!(
                    "threshold beta and gamma must lie in (0, 1), got {beta} and {gamma}"
                )));
            }
        }
        Ok(())
    }

    pub fn t(&self, q: usize, i: usize) -> i64 {
        match *self {
            ThresholdRule::Binomial { beta, gamma } => threshold(q, i, beta, gamma),
            ThresholdRule::Strict => binomial(q as u64, i as u64) as i64,
            ThresholdRule::Constant { value } => value,
            ThresholdRule::BinomialTail { beta, gamma } => threshold(q, i, beta, gamma) + 1,
        }
    }
}

/// A threshold rule per test order, with a fallback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFunction {
    pub default: ThresholdRule,
    #[serde(default)]
    pub per_order: BTreeMap<usize, ThresholdRule>,
}

impl ThresholdFunction {
    pub fn uniform(rule: ThresholdRule) -> Self {
        ThresholdFunction {
            default: rule,
            per_order: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate()?;
        self.per_order.values().try_for_each(|r| r.validate())
    }

    pub fn rule(&self, i: usize) -> ThresholdRule {
        self.per_order.get(&i).copied().unwrap_or(self.default)
    }

    pub fn t(&self, q: usize, i: usize) -> i64 {
        self.rule(i).t(q, i)
    }
}

/// `max { t : F(t) < gamma }` where `F` is the CDF of
/// `Binomial(C(q, i), 1 - beta)`. Can be `-1`, in which case every set is
/// retained.
pub fn threshold(q: usize, i: usize, beta: f64, gamma: f64) -> i64 {
    let trials = binomial(q as u64, i as u64);
    let p = 1.0 - beta;
    // F is nondecreasing with F(-1) = 0 < gamma and F(trials) = 1.
    let (mut lo, mut hi) = (-1i64, trials as i64);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binomial_cdf(mid, trials, p) < gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if gamma > 1.0 || (gamma == 1.0 && trials == 0) {
        return trials as i64;
    }
    lo
}

/// Bookkeeping from one [`tighten`] pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightenReport {
    pub order: usize,
    /// Distinct size-`order` sets sent to the oracle.
    pub tested: usize,
    /// How many of them tested nonzero.
    pub nonzero: usize,
    /// Sets that were split.
    pub split: usize,
    pub output: BoundingTopology,
}

/// Refines `b` using order-`i` nonzero tests.
///
/// Every distinct size-`i` subset of a member is tested once (the oracle is
/// called once with all of them, in canonical order). Sets are then
/// processed first-in first-out: a set is retained when it has fewer than
/// `i` paths or at least `t(|B|, i)` of its size-`i` subsets tested nonzero;
/// otherwise each of its one-smaller subsets is queued unless it was already
/// visited or is contained in a queued or retained set. A final pass keeps
/// only maximal sets.
pub fn tighten<O>(b: &BoundingTopology, i: usize, tf: &ThresholdFunction, oracle: O) -> Result<TightenReport>
where
    O: FnOnce(&[PathSet], usize) -> Result<Vec<bool>>,
{
    if i == 0 {
        return Err(Error::invalid("tighten order must be at least 1"));
    }
    let candidates: Vec<PathSet> = b
        .sets()
        .iter()
        .filter(|s| s.len() >= i)
        .flat_map(|s| s.subsets_of_size(i))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let decisions = if candidates.is_empty() {
        Vec::new()
    } else {
        oracle(&candidates, i)?
    };
    if decisions.len() != candidates.len() {
        return Err(Error::Dimension(format!(
            "oracle returned {} decisions for {} sets",
            decisions.len(),
            candidates.len()
        )));
    }
    let passing: Vec<PathSet> = candidates
        .iter()
        .zip(&decisions)
        .filter(|(_, &d)| d)
        .map(|(&p, _)| p)
        .collect();

    let count = |set: PathSet| -> i64 {
        if binomial(set.len() as u64, i as u64) < passing.len() as u64 {
            let lookup: &[PathSet] = &passing;
            set.subsets_of_size(i)
                .into_iter()
                .filter(|p| lookup.binary_search(p).is_ok())
                .count() as i64
        } else {
            passing.iter().filter(|p| p.is_subset_of(set)).count() as i64
        }
    };

    let mut queue: VecDeque<PathSet> = b.sets().iter().copied().collect();
    let mut visited: HashSet<PathSet> = HashSet::new();
    let mut retained: Vec<PathSet> = Vec::new();
    let mut split = 0;
    while let Some(set) = queue.pop_front() {
        visited.insert(set);
        if set.len() < i || count(set) >= tf.t(set.len(), i) {
            retained.push(set);
            continue;
        }
        split += 1;
        for p in set.iter() {
            let sub = set.without(p);
            if sub.is_empty() || visited.contains(&sub) {
                continue;
            }
            let covered = queue.iter().chain(retained.iter()).any(|q| sub.is_subset_of(*q));
            if !covered {
                queue.push_back(sub);
            }
        }
    }
    Ok(TightenReport {
        order: i,
        tested: candidates.len(),
        nonzero: passing.len(),
        split,
        output: BoundingTopology::new(retained)?.maximal(),
    })
}

/// Applies [`tighten`] for orders `i0..=i_f` in turn.
pub fn bounding_topology<O>(
    b0: &BoundingTopology,
    i0: usize,
    i_f: usize,
    tf: &ThresholdFunction,
    mut oracle: O,
) -> Result<Vec<TightenReport>>
where
    O: FnMut(&[PathSet], usize) -> Result<Vec<bool>>,
{
    if i0 == 0 || i0 > i_f {
        return Err(Error::invalid(format!("need 1 <= i0 <= i_f, got i0 = {i0}, i_f = {i_f}")));
    }
    let mut reports: Vec<TightenReport> = Vec::new();
    for i in i0..=i_f {
        let current = reports.last().map_or(b0, |r| &r.output);
        let report = tighten(current, i, tf, &mut oracle)?;
        reports.push(report);
    }
    Ok(reports)
}
