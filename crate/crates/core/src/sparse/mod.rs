//! Sparse pipeline for many monitor paths.
//!
//! 1. Bounding topology: start from the maximal cliques of pairwise
//!    nonzero tests (or from the full path set) and refine with
//!    [`tighten`] at orders `i0..=i_f`.
//! 2. Estimate common cumulants at order `i_max` on the small sets of the
//!    support estimate.
//! 3. Solve a generalized lasso over the support estimate whose L1 term
//!    rewards sparse exact cumulants, then read `R` off their support.

mod clique;
mod problem;
mod tighten;

pub use clique::{clique_init, maximal_cliques};
pub use problem::{assemble_problem, Observed, SparseProblem};
pub use tighten::{
    bounding_topology, threshold, tighten, BoundingTopology, ThresholdFunction, ThresholdRule, TightenReport,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cumulants::{
    analytic_cumulant, nonzero_test, replicate_estimates, CenteredSample, DelaySample, LinkDistribution,
    NonzeroTestConfig, ResampleMethod, MAX_ORDER,
};
use crate::error::{Error, Result};
use crate::lattice::{CumulantVector, PathSet};
use crate::mia::{routing_from_sets, MiaMode, MiaResult};
use crate::netmodel::{true_common_cumulant, RoutingMatrix};
use crate::solver::{solve, SolveDiagnostics, SolverOptions};

/// Largest bounding set the support estimate may be enumerated for.
pub const MAX_BOUNDING_SET: usize = 24;

/// Nonzero-test level and threshold parameters for one cumulant order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Which binomial threshold the per-order `beta` and `gamma` feed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinomialForm {
    /// [`ThresholdRule::Binomial`]: one less than the `gamma`-quantile.
    Quantile,
    /// [`ThresholdRule::BinomialTail`]: split probability of a fully
    /// nonzero set below `gamma`.
    Tail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Maximal cliques of the pairwise (order-2) test graph.
    Cliques,
    /// The single set of all paths.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub init: InitMode,
    pub i0: usize,
    pub i_f: usize,
    /// Size cap for the modified inversion; defaults to `i_f`.
    pub s: Option<usize>,
    pub i_max: usize,
    pub lambda: f64,
    pub b: f64,
    /// Bootstrap resamples behind every nonzero test and standard deviation.
    pub resamples: usize,
    pub seed: u64,
    pub orders: BTreeMap<usize, OrderParams>,
    pub binomial: BinomialForm,
    /// Overrides the binomial thresholds built from `orders`.
    pub threshold: Option<ThresholdFunction>,
    pub solver: SolverOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::for_sample_size(50_000)
    }
}

impl PipelineConfig {
    /// Test parameters tuned for roughly `n` samples (10k, 50k and 100k
    /// presets; the nearest one is used).
    pub fn for_sample_size(n: usize) -> Self {
        let p = |alpha, beta, gamma| OrderParams { alpha, beta, gamma };
        let orders: BTreeMap<usize, OrderParams> = if n < 30_000 {
            [(2, p(1e-20, 0.1, 0.15)), (3, p(1e-10, 0.1, 0.15)), (4, p(1e-2, 0.25, 0.3))].into()
        } else if n < 75_000 {
            [(2, p(1e-40, 0.05, 0.15)), (3, p(1e-30, 0.05, 0.15)), (4, p(1e-5, 0.05, 0.15))].into()
        } else {
            [(2, p(1e-40, 0.05, 0.15)), (3, p(1e-30, 0.05, 0.15)), (4, p(1e-10, 0.05, 0.15))].into()
        };
        PipelineConfig {
            init: InitMode::Cliques,
            i0: 3,
            i_f: 3,
            s: None,
            i_max: 3,
            lambda: 1.0,
            b: 0.5,
            resamples: 50,
            seed: 0,
            orders,
            binomial: BinomialForm::Tail,
            threshold: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn s(&self) -> usize {
        self.s.unwrap_or(self.i_f)
    }

    fn test_orders(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (self.i0..=self.i_f).collect();
        if self.init == InitMode::Cliques && !v.contains(&2) {
            v.insert(0, 2);
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.i0 == 0 || self.i0 > self.i_f {
            return Err(Error::invalid(format!(
                "need 1 <= i0 <= i_f, got i0 = {}, i_f = {}",
                self.i0, self.i_f
            )));
        }
        if self.i_f > MAX_ORDER || self.i_max > MAX_ORDER || self.i_max == 0 {
            return Err(Error::invalid(format!(
                "i_f and i_max must lie in 1..={MAX_ORDER}, got {} and {}",
                self.i_f, self.i_max
            )));
        }
        if self.s() == 0 {
            return Err(Error::invalid("s must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite() && self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda and b must be nonnegative, got {} and {}",
                self.lambda, self.b
            )));
        }
        if self.resamples < 2 {
            return Err(Error::invalid("need at least 2 bootstrap resamples"));
        }
        for i in self.test_orders() {
            let o = self
                .orders
                .get(&i)
                .ok_or_else(|| Error::invalid(format!("no test parameters for order {i}")))?;
            if !(o.alpha > 0.0 && o.alpha < 1.0) {
                return Err(Error::invalid(format!("alpha for order {i} must lie in (0, 1)")));
            }
            if i >= self.i0 && self.threshold.is_none() {
                ThresholdRule::Binomial {
                    beta: o.beta,
                    gamma: o.gamma,
                }
                .validate()?;
            }
        }
        if let Some(tf) = &self.threshold {
            tf.validate()?;
        }
        Ok(())
    }

    pub fn threshold_function(&self) -> ThresholdFunction {
        if let Some(tf) = &self.threshold {
            return tf.clone();
        }
        let per_order = self
            .orders
            .iter()
            .map(|(&i, o)| {
                let (beta, gamma) = (o.beta, o.gamma);
                let rule = match self.binomial {
                    BinomialForm::Quantile => ThresholdRule::Binomial { beta, gamma },
                    BinomialForm::Tail => ThresholdRule::BinomialTail { beta, gamma },
                };
                (i, rule)
            })
            .collect();
        ThresholdFunction {
            default: ThresholdRule::Strict,
            per_order,
        }
    }

    fn test_config(&self, order: usize) -> NonzeroTestConfig {
        NonzeroTestConfig {
            method: ResampleMethod::Bootstrap {
                resamples: self.resamples,
            },
            p_threshold: self.orders.get(&order).map_or(0.5, |o| o.alpha),
            rng_seed: self.seed,
        }
    }
}

/// Nonzero tests of common cumulants from a delay sample: bootstrap
/// replicates of the k-statistic estimate and a t-test at the order's alpha.
pub struct SampleOracle<'a> {
    pub sample: &'a DelaySample,
    pub cfg: &'a PipelineConfig,
}

impl SampleOracle<'_> {
    pub fn decide(&self, sets: &[PathSet], order: usize) -> Result<Vec<bool>> {
        let cfg = self.cfg.test_config(order);
        replicate_estimates(self.sample, sets, order, &cfg)?
            .iter()
            .map(|e| nonzero_test(e, &cfg).map(|d| d.decision))
            .collect()
    }
}

/// Error-free nonzero tests from the true routing matrix and link laws.
pub struct TruthOracle<'a> {
    pub routing: &'a RoutingMatrix,
    pub links: &'a [LinkDistribution],
}

impl TruthOracle<'_> {
    pub fn decide(&self, sets: &[PathSet], order: usize) -> Result<Vec<bool>> {
        let scale = self
            .links
            .iter()
            .map(|d| analytic_cumulant(d, order).abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        Ok(sets
            .iter()
            .map(|&p| true_common_cumulant(self.routing, self.links, p, order).abs() > 1e-12 * scale)
            .collect())
    }
}

/// Initial bounding topology and every tightening pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage1 {
    pub init: BoundingTopology,
    pub passes: Vec<TightenReport>,
}

impl Stage1 {
    pub fn output(&self) -> &BoundingTopology {
        self.passes.last().map_or(&self.init, |r| &r.output)
    }
}

/// Runs the bounding-topology stage with `oracle`.
pub fn run_stage1<O>(n: usize, cfg: &PipelineConfig, tf: &ThresholdFunction, mut oracle: O) -> Result<Stage1>
where
    O: FnMut(&[PathSet], usize) -> Result<Vec<bool>>,
{
    cfg.validate()?;
    let init = match cfg.init {
        InitMode::Cliques => clique_init(n, &mut oracle)?,
        InitMode::Full => BoundingTopology::full(n),
    };
    let passes = bounding_topology(&init, cfg.i0, cfg.i_f, tf, oracle)?;
    Ok(Stage1 { init, passes })
}

/// Everything up to the lasso, which is the only part that depends on
/// `lambda` and `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prepared {
    pub path_ids: Vec<String>,
    pub stage1: Stage1,
    pub problem: SparseProblem,
    /// Observed values are exact and pinned rather than penalized.
    pub equality: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseResult {
    pub result: MiaResult,
    pub stage1: Stage1,
    pub lambda: f64,
    pub b: f64,
    pub variables: usize,
    pub observed: usize,
    pub diagnostics: SolveDiagnostics,
}

fn check_bounding(b: &BoundingTopology) -> Result<()> {
    if b.max_size() > MAX_BOUNDING_SET {
        return Err(Error::invalid(format!(
            "bounding set with {} paths is too large to enumerate (limit {MAX_BOUNDING_SET}); \
             use clique initialization or a higher i_f",
            b.max_size()
        )));
    }
    Ok(())
}

/// Stages 1 and 2 from a delay sample. Observed values are full-sample
/// estimates at order `i_max`; their standard deviations come from the
/// bootstrap replicates.
pub fn prepare_from_sample(sample: &DelaySample, cfg: &PipelineConfig) -> Result<Prepared> {
    let stage1 = stage1_from_sample(sample, cfg)?;
    problem_from_sample(sample, cfg, stage1)
}

pub fn stage1_from_sample(sample: &DelaySample, cfg: &PipelineConfig) -> Result<Stage1> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(Error::SampleTooSmall { needed: 1, got: 0 });
    }
    let oracle = SampleOracle { sample, cfg };
    run_stage1(sample.paths(), cfg, &cfg.threshold_function(), |s, i| oracle.decide(s, i))
}

/// Stage 2 on top of an existing Stage 1 (which does not depend on
/// `i_max`, `s`, `lambda` or `b`).
pub fn problem_from_sample(sample: &DelaySample, cfg: &PipelineConfig, stage1: Stage1) -> Result<Prepared> {
    cfg.validate()?;
    let bounding = stage1.output();
    check_bounding(bounding)?;
    let sets = SparseProblem::observed_sets(bounding, cfg.s(), cfg.i_max);
    let full = CenteredSample::new(sample);
    let reps = replicate_estimates(sample, &sets, cfg.i_max, &cfg.test_config(cfg.i_max))?;
    let observed = sets
        .iter()
        .zip(&reps)
        .map(|(&p, e)| {
            Ok((
                p,
                Observed {
                    value: full.common_cumulant(p, cfg.i_max)?,
                    sigma: e.std_dev(),
                },
            ))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let problem = assemble_problem(bounding, cfg.s(), cfg.i_max, &observed)?;
    Ok(Prepared {
        path_ids: sample.path_ids().to_vec(),
        stage1,
        problem,
        equality: false,
    })
}

/// Stages 1 and 2 from the true model: error-free tests with strict
/// thresholds, exact common cumulants, and observed values pinned.
pub fn prepare_ground_truth(r: &RoutingMatrix, links: &[LinkDistribution], cfg: &PipelineConfig) -> Result<Prepared> {
    let mut cfg = cfg.clone();
    cfg.threshold = Some(ThresholdFunction::uniform(ThresholdRule::Strict));
    cfg.validate()?;
    if links.len() != r.m() {
        return Err(Error::Dimension(format!("{} link laws for {} links", links.len(), r.m())));
    }
    let oracle = TruthOracle { routing: r, links };
    let stage1 = run_stage1(r.n(), &cfg, &cfg.threshold_function(), |s, i| oracle.decide(s, i))?;
    let bounding = stage1.output();
    check_bounding(bounding)?;
    let observed = SparseProblem::observed_sets(bounding, cfg.s(), cfg.i_max)
        .into_iter()
        .map(|p| {
            (
                p,
                Observed {
                    value: true_common_cumulant(r, links, p, cfg.i_max),
                    sigma: 1.0,
                },
            )
        })
        .collect();
    let problem = assemble_problem(bounding, cfg.s(), cfg.i_max, &observed)?;
    Ok(Prepared {
        path_ids: r.path_ids().to_vec(),
        stage1,
        problem,
        equality: true,
    })
}

/// Relative cutoff for calling an exact cumulant of the lasso solution
/// nonzero.
pub const SUPPORT_TOL: f64 = 1e-6;

/// Stage 3: solves the lasso at `(lambda, b)` and reads off `R`.
pub fn solve_prepared(prep: &Prepared, lambda: f64, b: f64, opts: &SolverOptions) -> Result<SparseResult> {
    if !(lambda >= 0.0 && b >= 0.0) {
        return Err(Error::invalid(format!("lambda and b must be nonnegative, got {lambda} and {b}")));
    }
    let p = &prep.problem;
    let sol = solve(&p.lasso(lambda, b, prep.equality), opts)?;
    let n = prep.path_ids.len();
    let gmax = sol.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = SUPPORT_TOL * gmax.max(1.0);
    let support: Vec<PathSet> = p
        .rows
        .iter()
        .zip(&sol.g)
        .filter(|(_, v)| v.abs() > tol)
        .map(|(&s, _)| s)
        .collect();
    let f = CumulantVector::restricted(p.i_max, n, p.cols.iter().copied().zip(sol.f.iter().copied()))?;
    let g = CumulantVector::restricted(p.i_max, n, p.rows.iter().copied().zip(sol.g.iter().copied()))?;
    Ok(SparseResult {
        result: MiaResult {
            mode: MiaMode::Sparse,
            f,
            g,
            r_hat: routing_from_sets(&prep.path_ids, &support)?,
            tests: Vec::new(),
        },
        stage1: prep.stage1.clone(),
        lambda,
        b,
        variables: p.cols.len(),
        observed: p.n_obs,
        diagnostics: sol.diagnostics,
    })
}

/// The full pipeline on a delay sample.
pub fn run_sparse_pipeline(sample: &DelaySample, cfg: &PipelineConfig) -> Result<SparseResult> {
    let prep = prepare_from_sample(sample, cfg)?;
    solve_prepared(&prep, cfg.lambda, cfg.b, &cfg.solver)
}

/// The full pipeline on the true model, with exact cumulants.
pub fn run_ground_truth_pipeline(
    r: &RoutingMatrix,
    links: &[LinkDistribution],
    cfg: &PipelineConfig,
) -> Result<SparseResult> {
    let prep = prepare_ground_truth(r, links, cfg)?;
    solve_prepared(&prep, cfg.lambda, cfg.b, &cfg.solver)
}
