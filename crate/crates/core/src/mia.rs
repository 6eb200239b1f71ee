//! Full-lattice inference: estimate common cumulants of every path set,
//! invert them to exact cumulants, and read routing-matrix columns off the
//! support.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cumulants::{
    map_replicates, mixture_cumulant, mixture_cumulant_exact, nonzero_test, DelaySample, EstimateWithSpread,
    LinkDistribution, NonzeroDecision, NonzeroTestConfig,
};
use crate::error::{Error, Result};
use crate::lattice::{
    canonical_representative, lattice, superset_mobius_in_place, CumulantVector, MultiIndex, PathSet,
};
use crate::netmodel::RoutingMatrix;

/// Largest path count for data mode: its order equals the path count and
/// k-statistics stop at order 4.
pub const MAX_DATA_PATHS: usize = 4;

/// Relative tolerance deciding `g(P) != 0` in floating-point exact mode.
pub const EXACT_ZERO_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiaMode {
    Exact,
    Data,
    Sparse,
}

/// Replicate statistics and the verdict for one path set in data mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetTest {
    pub set: PathSet,
    pub f_mean: f64,
    pub f_stderr: f64,
    pub g_mean: f64,
    pub g_stderr: f64,
    pub p_value: f64,
    pub nonzero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiaResult {
    pub mode: MiaMode,
    pub f: CumulantVector,
    pub g: CumulantVector,
    /// Columns are the characteristic vectors of the accepted sets, in
    /// canonical order.
    pub r_hat: RoutingMatrix,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<SetTest>,
}

impl MiaResult {
    pub fn column_sets(&self) -> Vec<PathSet> {
        self.r_hat.column_sets()
    }
}

/// Estimated routing matrix whose columns are `sets` (deduplicated, in
/// canonical order). Columns are labelled `c1, c2, ...`.
pub fn routing_from_sets(path_ids: &[String], sets: &[PathSet]) -> Result<RoutingMatrix> {
    let mut cols: Vec<PathSet> = sets.to_vec();
    cols.sort_unstable();
    cols.dedup();
    let ids = (1..=cols.len()).map(|j| format!("c{j}")).collect();
    RoutingMatrix::new(path_ids.to_vec(), ids, cols)
}

fn check_order(n: usize, order: usize) -> Result<()> {
    if n == 0 || n > 64 {
        return Err(Error::invalid(format!("path count must be in 1..=64, got {n}")));
    }
    if n > 24 {
        return Err(Error::invalid(format!(
            "full-lattice inference over {n} paths is infeasible; use the sparse pipeline"
        )));
    }
    if order < n {
        return Err(Error::NoRepresentative { order, size: n });
    }
    Ok(())
}

/// Exact mode with a floating-point cumulant oracle. `f(P)` is the oracle at
/// the canonical representative of `P` at `order` (at least `n`); `g(P)` is
/// called nonzero when `|g(P)| > 1e-9 max(1, max|g|)`.
pub fn mia_exact<O>(path_ids: &[String], order: usize, oracle: O) -> Result<MiaResult>
where
    O: Fn(&MultiIndex) -> Result<f64>,
{
    let n = path_ids.len();
    check_order(n, order)?;
    let mut dense = vec![0.0; 1usize << n];
    for p in lattice(n) {
        dense[p.bits() as usize] = oracle(&canonical_representative(p, order, n)?)?;
    }
    let f = CumulantVector::from_dense(order, n, &dense)?;
    superset_mobius_in_place(&mut dense);
    dense[0] = 0.0;
    let g = CumulantVector::from_dense(order, n, &dense)?;
    let tol = EXACT_ZERO_TOL * g.max_abs().max(1.0);
    let r_hat = routing_from_sets(path_ids, &g.support(tol))?;
    Ok(MiaResult {
        mode: MiaMode::Exact,
        f,
        g,
        r_hat,
        tests: Vec::new(),
    })
}

/// Exact cumulant vectors in rational arithmetic, keyed by path set.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalCumulants {
    pub f: BTreeMap<PathSet, BigRational>,
    pub g: BTreeMap<PathSet, BigRational>,
}

/// Exact mode in rational arithmetic: the support of `g` is decided with no
/// tolerance at all.
pub fn mia_exact_rational<O>(path_ids: &[String], order: usize, oracle: O) -> Result<(MiaResult, RationalCumulants)>
where
    O: Fn(&MultiIndex) -> Result<BigRational>,
{
    let n = path_ids.len();
    check_order(n, order)?;
    let mut dense = vec![BigRational::zero(); 1usize << n];
    let sets = lattice(n);
    for &p in &sets {
        dense[p.bits() as usize] = oracle(&canonical_representative(p, order, n)?)?;
    }
    let f_exact: BTreeMap<PathSet, BigRational> = sets.iter().map(|&p| (p, dense[p.bits() as usize].clone())).collect();
    superset_mobius_in_place(&mut dense);
    let g_exact: BTreeMap<PathSet, BigRational> = sets.iter().map(|&p| (p, dense[p.bits() as usize].clone())).collect();

    let to_f64 = |m: &BTreeMap<PathSet, BigRational>| -> Result<CumulantVector> {
        let mut d = vec![0.0; 1usize << n];
        for (p, v) in m {
            d[p.bits() as usize] = v.to_f64().unwrap_or(f64::NAN);
        }
        CumulantVector::from_dense(order, n, &d)
    };
    let support: Vec<PathSet> = g_exact.iter().filter(|(_, v)| !v.is_zero()).map(|(&p, _)| p).collect();
    let result = MiaResult {
        mode: MiaMode::Exact,
        f: to_f64(&f_exact)?,
        g: to_f64(&g_exact)?,
        r_hat: routing_from_sets(path_ids, &support)?,
        tests: Vec::new(),
    };
    Ok((
        result,
        RationalCumulants {
            f: f_exact,
            g: g_exact,
        },
    ))
}

/// Exact mode driven by a known routing matrix and link distributions, at
/// order `n`. Runs in rational arithmetic, which is always possible because
/// every finite float is a rational.
pub fn mia_ground_truth(r: &RoutingMatrix, links: &[LinkDistribution]) -> Result<MiaResult> {
    let order = r.n();
    let exact = mia_exact_rational(r.path_ids(), order, |alpha| {
        mixture_cumulant_exact(r, links, alpha)?.ok_or_else(|| Error::invalid("non-finite link parameter"))
    });
    match exact {
        Ok((res, _)) => Ok(res),
        Err(Error::InvalidParameter(_)) => mia_exact(r.path_ids(), order, |alpha| mixture_cumulant(r, links, alpha)),
        Err(e) => Err(e),
    }
}

/// Data mode. For each replicate of `sample` (splits or bootstrap
/// resamples per `cfg`), estimates `f` on the full lattice at order `n` by
/// averaged k-statistics and inverts it; the replicate values of each
/// `g(P)` then go through `test`.
pub fn mia_data_with_test<T>(sample: &DelaySample, cfg: &NonzeroTestConfig, test: T) -> Result<MiaResult>
where
    T: Fn(PathSet, &EstimateWithSpread) -> Result<NonzeroDecision>,
{
    let n = sample.paths();
    if n > MAX_DATA_PATHS {
        return Err(Error::TooManyPaths(n));
    }
    let order = n;
    let sets = lattice(n);
    let reps = map_replicates(sample, cfg, |c| {
        let mut f = vec![0.0; 1usize << n];
        for &p in &sets {
            f[p.bits() as usize] = c.common_cumulant(p, order)?;
        }
        let mut g = f.clone();
        superset_mobius_in_place(&mut g);
        Ok((f, g))
    })?;

    let mut f_mean = vec![0.0; 1usize << n];
    let mut g_mean = vec![0.0; 1usize << n];
    let mut tests = Vec::with_capacity(sets.len());
    let mut accepted = Vec::new();
    for &p in &sets {
        let b = p.bits() as usize;
        let fe = EstimateWithSpread::from_replicates(reps.iter().map(|(f, _)| f[b]).collect());
        let ge = EstimateWithSpread::from_replicates(reps.iter().map(|(_, g)| g[b]).collect());
        let d = test(p, &ge)?;
        if d.decision {
            accepted.push(p);
        }
        f_mean[b] = fe.mean;
        g_mean[b] = ge.mean;
        tests.push(SetTest {
            set: p,
            f_mean: fe.mean,
            f_stderr: fe.stderr,
            g_mean: ge.mean,
            g_stderr: ge.stderr,
            p_value: d.p_value,
            nonzero: d.decision,
        });
    }
    Ok(MiaResult {
        mode: MiaMode::Data,
        f: CumulantVector::from_dense(order, n, &f_mean)?,
        g: CumulantVector::from_dense(order, n, &g_mean)?,
        r_hat: routing_from_sets(sample.path_ids(), &accepted)?,
        tests,
    })
}

/// Data mode with the two-sided t-test on replicate `g` values.
pub fn mia_data(sample: &DelaySample, cfg: &NonzeroTestConfig) -> Result<MiaResult> {
    mia_data_with_test(sample, cfg, |_, est| nonzero_test(est, cfg))
}
