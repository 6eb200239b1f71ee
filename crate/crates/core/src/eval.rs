//! Scoring recovered routing matrices, hyperparameter grid search and
//! experiment campaigns over synthetic scenarios.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::LinkDistribution;
use crate::error::{Error, Result};
use crate::io::{from_json_str, write_json};
use crate::lattice::{downward_closure, PathSet};
use crate::netmodel::{
    generate_scenario, random_topology, sample_delays, sparsity_report, true_common_cumulants, DelayConfig,
    RoutingMatrix, Scenario, SparsityReport, Topology,
};
use crate::solver::SolverOptions;
use crate::sparse::{
    prepare_ground_truth, problem_from_sample, solve_prepared, stage1_from_sample, BoundingTopology, PipelineConfig,
    Prepared, SparseResult, Stage1,
};

/// Column-set comparison of an estimated routing matrix with the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    /// Geometric mean of precision and recall.
    pub f1: f64,
    /// Harmonic mean, for comparison with the usual F1.
    pub f1_harmonic: f64,
    pub matched: Vec<PathSet>,
    pub missed: Vec<PathSet>,
    pub spurious: Vec<PathSet>,
}

/// Scores estimated columns against true ones. Duplicates and empty sets
/// are ignored. An empty estimate has precision 1 when the truth is empty
/// too and 0 otherwise; recall follows the same rule with roles swapped.
pub fn score_sets(estimate: &[PathSet], truth: &[PathSet]) -> ScoreReport {
    let est: BTreeSet<PathSet> = estimate.iter().copied().filter(|s| !s.is_empty()).collect();
    let tru: BTreeSet<PathSet> = truth.iter().copied().filter(|s| !s.is_empty()).collect();
    let matched: Vec<PathSet> = est.intersection(&tru).copied().collect();
    let missed: Vec<PathSet> = tru.difference(&est).copied().collect();
    let spurious: Vec<PathSet> = est.difference(&tru).copied().collect();
    let ratio = |num: usize, den: usize, other_empty: bool| {
        if den == 0 {
            if other_empty {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(matched.len(), est.len(), tru.is_empty());
    let recall = ratio(matched.len(), tru.len(), est.is_empty());
    let f1_harmonic = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ScoreReport {
        precision,
        recall,
        f1: (precision * recall).sqrt(),
        f1_harmonic,
        matched,
        missed,
        spurious,
    }
}

pub fn score(r_hat: &RoutingMatrix, r_true: &RoutingMatrix) -> Result<ScoreReport> {
    if r_hat.n() != r_true.n() {
        return Err(Error::Dimension(format!(
            "estimate has {} paths, truth has {}",
            r_hat.n(),
            r_true.n()
        )));
    }
    Ok(score_sets(r_hat.columns(), r_true.columns()))
}

/// Precision and recall of a bounding topology's support estimate against
/// the support of the true common cumulants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportAccuracy {
    pub precision: f64,
    pub recall: f64,
    pub estimate_size: usize,
    pub truth_size: usize,
}

pub fn support_accuracy(bounding: &BoundingTopology, true_support: &[PathSet]) -> SupportAccuracy {
    let est = bounding.support_estimate();
    let r = score_sets(&est, true_support);
    SupportAccuracy {
        precision: r.precision,
        recall: r.recall,
        estimate_size: est.len(),
        truth_size: r.matched.len() + r.missed.len(),
    }
}

/// `supp(f_i)` for the true model.
pub fn true_support(r: &RoutingMatrix, links: &[LinkDistribution], order: usize) -> Vec<PathSet> {
    true_common_cumulants(r, links, order).into_keys().collect()
}

/// `0, 0.2, ..., 4`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 5.0).collect()
}

/// `0, 0.1, ..., 1`.
pub fn default_b_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub b: f64,
    pub mean_f1: f64,
    pub f1: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub lambda: f64,
    pub b: f64,
    pub mean_f1: f64,
    /// Every grid point, by increasing `lambda` then `b`.
    pub table: Vec<GridPoint>,
}

/// A prepared problem and the true columns it should recover.
#[derive(Clone, Debug)]
pub struct GridCase {
    pub prepared: Prepared,
    pub truth: Vec<PathSet>,
}

/// Solves every case at every `(lambda, b)` and picks the highest mean F1;
/// ties go to the smaller `lambda`, then the smaller `b`.
pub fn grid_search(cases: &[GridCase], lambdas: &[f64], bs: &[f64], opts: &SolverOptions) -> Result<GridResult> {
    if cases.is_empty() || lambdas.is_empty() || bs.is_empty() {
        return Err(Error::invalid("grid search needs at least one case, lambda and b"));
    }
    let sorted = |v: &[f64]| -> Result<Vec<f64>> {
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("grid values must be finite and nonnegative"));
        }
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    };
    let (lambdas, bs) = (sorted(lambdas)?, sorted(bs)?);
    let combos: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| bs.iter().map(move |&b| (l, b))).collect();
    let table = combos
        .par_iter()
        .map(|&(lambda, b)| {
            let f1 = cases
                .iter()
                .map(|c| {
                    let out = solve_prepared(&c.prepared, lambda, b, opts)?;
                    Ok(score_sets(&out.result.column_sets(), &c.truth).f1)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean_f1 = f1.iter().sum::<f64>() / f1.len() as f64;
            Ok(GridPoint { lambda, b, mean_f1, f1 })
        })
        .collect::<Result<Vec<GridPoint>>>()?;
    let mut best = &table[0];
    for p in &table[1..] {
        if p.mean_f1 > best.mean_f1 {
            best = p;
        }
    }
    Ok(GridResult {
        lambda: best.lambda,
        b: best.b,
        mean_f1: best.mean_f1,
        table,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySource {
    /// A topology JSON file, relative to the campaign config.
    File { path: PathBuf },
    Random { nodes: usize, avg_degree: f64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CumulantSource {
    /// Estimate from sampled delays.
    Data,
    /// Exact cumulants of the true model.
    GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub topologies: Vec<TopologySource>,
    pub monitors: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_i_max")]
    pub i_max: Vec<usize>,
    #[serde(default = "default_source")]
    pub source: CumulantSource,
    #[serde(default)]
    pub delay: DelayConfig,
    /// Pipeline settings; when absent, the preset for each sample size.
    #[serde(default)]
    pub pipeline: Option<PipelineConfig>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_b")]
    pub b: f64,
}

fn default_i_max() -> Vec<usize> {
    vec![2, 3, 4]
}

fn default_source() -> CumulantSource {
    CumulantSource::Data
}

fn default_lambda() -> f64 {
    1.0
}

fn default_b() -> f64 {
    0.5
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Input {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let cfg: CampaignConfig = from_json_str(&text).map_err(|msg| Error::Input {
            path: path.to_path_buf(),
            msg,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topologies.is_empty() || self.monitors.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("campaign needs topologies, monitor counts and seeds"));
        }
        if self.source == CumulantSource::Data && self.sample_sizes.is_empty() {
            return Err(Error::invalid("data campaigns need at least one sample size"));
        }
        if self.i_max.is_empty() {
            return Err(Error::invalid("campaign needs at least one i_max"));
        }
        Ok(())
    }

    /// Pipeline settings for one case.
    pub fn pipeline_for(&self, n_samples: usize, i_max: usize) -> PipelineConfig {
        let mut cfg = match &self.pipeline {
            Some(p) => p.clone(),
            None => PipelineConfig {
                lambda: self.lambda,
                b: self.b,
                ..PipelineConfig::for_sample_size(n_samples)
            },
        };
        cfg.i_max = i_max;
        cfg
    }
}

/// Seed of the delay sample for a scenario seed. Kept apart from the
/// scenario's own RNG streams.
pub fn sample_seed(scenario_seed: u64) -> u64 {
    scenario_seed ^ 0x5851_f42d_4c95_7f2d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: String,
    pub topology: String,
    pub monitors: usize,
    /// Zero for ground-truth campaigns.
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImaxOutcome {
    pub i_max: usize,
    pub score: ScoreReport,
    pub result: SparseResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub spec: CaseSpec,
    pub error: Option<String>,
    pub scenario: Option<Scenario>,
    pub sparsity: Vec<SparsityReport>,
    /// Stage-1 support accuracy after the initial topology and each pass.
    pub stage1: Vec<(String, SupportAccuracy)>,
    pub runs: Vec<ImaxOutcome>,
}

/// Outcomes sorted by case id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub cases: Vec<CaseOutcome>,
}

fn topology_name(src: &TopologySource, k: usize) -> String {
    match src {
        TopologySource::File { path } => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("topology{k}")),
        TopologySource::Random { nodes, seed, .. } => format!("random{nodes}x{seed}"),
    }
}

fn load_topology(src: &TopologySource, base_dir: &Path) -> Result<Topology> {
    match src {
        TopologySource::File { path } => Topology::load(&base_dir.join(path)),
        TopologySource::Random {
            nodes,
            avg_degree,
            seed,
        } => random_topology(*nodes, *avg_degree, *seed),
    }
}

/// Enumerates the cases of a campaign in a fixed order.
pub fn campaign_cases(cfg: &CampaignConfig) -> Vec<(usize, CaseSpec)> {
    let sizes: Vec<usize> = match cfg.source {
        CumulantSource::Data => cfg.sample_sizes.clone(),
        CumulantSource::GroundTruth => vec![0],
    };
    let mut out = Vec::new();
    for (k, t) in cfg.topologies.iter().enumerate() {
        let name = topology_name(t, k);
        for &m in &cfg.monitors {
            for &n in &sizes {
                for &seed in &cfg.seeds {
                    out.push((
                        k,
                        CaseSpec {
                            id: format!("{name}-m{m}-n{n}-s{seed}"),
                            topology: name.clone(),
                            monitors: m,
                            n_samples: n,
                            seed,
                        },
                    ));
                }
            }
        }
    }
    out
}

fn stage1_accuracy(stage1: &Stage1, truth: &[PathSet]) -> Vec<(String, SupportAccuracy)> {
    let mut v = vec![("init".to_string(), support_accuracy(&stage1.init, truth))];
    for p in &stage1.passes {
        v.push((format!("order{}", p.order), support_accuracy(&p.output, truth)));
    }
    v
}

fn run_case(cfg: &CampaignConfig, topo: &Topology, spec: &CaseSpec, out: &mut CaseOutcome) -> Result<()> {
    let sc = generate_scenario(topo, spec.monitors, &cfg.delay, spec.seed)?;
    let links = sc.link_distributions()?;
    let r = &sc.routing_matrix;
    let truth = r.column_sets();
    for &i in &cfg.i_max {
        out.sparsity.push(sparsity_report(r, &links, i)?);
    }
    let support = downward_closure(&truth);
    match cfg.source {
        CumulantSource::Data => {
            let sample = sample_delays(&sc, spec.n_samples, sample_seed(spec.seed))?;
            let base = cfg.pipeline_for(spec.n_samples, cfg.i_max[0]);
            let stage1 = stage1_from_sample(&sample, &base)?;
            out.stage1 = stage1_accuracy(&stage1, &support);
            for &i in &cfg.i_max {
                let pcfg = cfg.pipeline_for(spec.n_samples, i);
                let prep = problem_from_sample(&sample, &pcfg, stage1.clone())?;
                let result = solve_prepared(&prep, pcfg.lambda, pcfg.b, &pcfg.solver)?;
                out.runs.push(ImaxOutcome {
                    i_max: i,
                    score: score_sets(&result.result.column_sets(), &truth),
                    result,
                });
            }
        }
        CumulantSource::GroundTruth => {
            for &i in &cfg.i_max {
                let pcfg = cfg.pipeline_for(1, i);
                let prep = prepare_ground_truth(r, &links, &pcfg)?;
                if out.stage1.is_empty() {
                    out.stage1 = stage1_accuracy(&prep.stage1, &support);
                }
                let result = solve_prepared(&prep, pcfg.lambda, pcfg.b, &pcfg.solver)?;
                out.runs.push(ImaxOutcome {
                    i_max: i,
                    score: score_sets(&result.result.column_sets(), &truth),
                    result,
                });
            }
        }
    }
    out.scenario = Some(sc);
    Ok(())
}

/// Prepared problems for every case of `cfg` at one `i_max`, for
/// [`grid_search`]. Unlike [`run_campaign`], any failing case is an error.
pub fn grid_cases(cfg: &CampaignConfig, base_dir: &Path, i_max: usize) -> Result<Vec<GridCase>> {
    cfg.validate()?;
    let topologies = cfg
        .topologies
        .iter()
        .map(|t| load_topology(t, base_dir))
        .collect::<Result<Vec<_>>>()?;
    campaign_cases(cfg)
        .into_par_iter()
        .map(|(k, spec)| {
            let sc = generate_scenario(&topologies[k], spec.monitors, &cfg.delay, spec.seed)?;
            let pcfg = cfg.pipeline_for(spec.n_samples.max(1), i_max);
            let prepared = match cfg.source {
                CumulantSource::Data => {
                    let sample = sample_delays(&sc, spec.n_samples, sample_seed(spec.seed))?;
                    crate::sparse::prepare_from_sample(&sample, &pcfg)?
                }
                CumulantSource::GroundTruth => prepare_ground_truth(&sc.routing_matrix, &sc.link_distributions()?, &pcfg)?,
            };
            Ok(GridCase {
                prepared,
                truth: sc.routing_matrix.column_sets(),
            })
        })
        .collect()
}

/// Runs every case in parallel. Failures are recorded per case and do not
/// stop the campaign.
pub fn run_campaign(cfg: &CampaignConfig, base_dir: &Path) -> Result<CampaignReport> {
    cfg.validate()?;
    let topologies: Vec<Result<Topology>> = cfg.topologies.iter().map(|t| load_topology(t, base_dir)).collect();
    let mut cases: Vec<CaseOutcome> = campaign_cases(cfg)
        .into_par_iter()
        .map(|(k, spec)| {
            let mut out = CaseOutcome {
                spec,
                error: None,
                scenario: None,
                sparsity: Vec::new(),
                stage1: Vec::new(),
                runs: Vec::new(),
            };
            let res = match &topologies[k] {
                Ok(t) => run_case(cfg, t, &out.spec.clone(), &mut out),
                Err(e) => Err(Error::invalid(format!("topology unavailable: {e}"))),
            };
            if let Err(e) = res {
                out.error = Some(e.to_string());
            }
            out
        })
        .collect();
    cases.sort_by(|a, b| a.spec.id.cmp(&b.spec.id));
    Ok(CampaignReport { cases })
}

impl CampaignReport {
    pub fn failures(&self) -> usize {
        self.cases.iter().filter(|c| c.error.is_some()).count()
    }

    /// Writes `cases.csv`, `stage1.csv`, `sparsity.csv` (long format: one
    /// row per case and metric) and `cases/<id>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("cases"))?;
        let key = |c: &CaseOutcome| {
            vec![
                c.spec.id.clone(),
                c.spec.topology.clone(),
                c.spec.monitors.to_string(),
                c.spec.n_samples.to_string(),
                c.spec.seed.to_string(),
            ]
        };
        let head = ["case", "topology", "monitors", "n_samples", "seed"];

        let mut w = csv::Writer::from_path(dir.join("cases.csv"))?;
        w.write_record(head.iter().chain(&["i_max", "metric", "value", "error"]))?;
        for c in &self.cases {
            if let Some(e) = &c.error {
                let mut row = key(c);
                row.extend(["".into(), "error".into(), "".into(), e.clone()]);
                w.write_record(&row)?;
            }
            for r in &c.runs {
                let metrics = [
                    ("precision", r.score.precision),
                    ("recall", r.score.recall),
                    ("f1", r.score.f1),
                    ("f1_harmonic", r.score.f1_harmonic),
                    ("columns", r.result.result.r_hat.m() as f64),
                    ("variables", r.result.variables as f64),
                    ("objective", r.result.diagnostics.objective),
                ];
                for (name, v) in metrics {
                    let mut row = key(c);
                    row.extend([r.i_max.to_string(), name.into(), v.to_string(), "".into()]);
                    w.write_record(&row)?;
                }
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("stage1.csv"))?;
        w.write_record(head.iter().chain(&["stage", "metric", "value"]))?;
        for c in &self.cases {
            for (stage, acc) in &c.stage1 {
                let metrics = [
                    ("precision", acc.precision),
                    ("recall", acc.recall),
                    ("estimate_size", acc.estimate_size as f64),
                    ("truth_size", acc.truth_size as f64),
                ];
                for (name, v) in metrics {
                    let mut row = key(c);
                    row.extend([stage.clone(), name.into(), v.to_string()]);
                    w.write_record(&row)?;
                }
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("sparsity.csv"))?;
        w.write_record(head.iter().chain(&["order", "metric", "value"]))?;
        for c in &self.cases {
            for s in &c.sparsity {
                let metrics = [
                    ("supp_g", s.supp_g as f64),
                    ("supp_f", s.supp_f as f64),
                    ("density", s.density),
                    ("largest_f", s.largest_f as f64),
                ];
                for (name, v) in metrics {
                    let mut row = key(c);
                    row.extend([s.order.to_string(), name.into(), v.to_string()]);
                    w.write_record(&row)?;
                }
            }
        }
        w.flush()?;

        for c in &self.cases {
            write_json(&dir.join("cases").join(format!("{}.json", c.spec.id)), c)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(paths: &[usize]) -> PathSet {
        PathSet::from_indices(paths.iter().copied())
    }

    #[test]
    fn score_examples() {
        let truth = vec![ps(&[0]), ps(&[1]), ps(&[0, 1]), ps(&[2])];
        let r = score_sets(&truth.iter().rev().copied().collect::<Vec<_>>(), &truth);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r = score_sets(&truth[..2], &truth);
        assert_eq!((r.precision, r.recall), (1.0, 0.5));
        assert!((r.f1 - 0.5f64.sqrt()).abs() < 1e-15);
        let r = score_sets(&[], &truth);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = score_sets(&[], &[]);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        // duplicates collapse
        let r = score_sets(&[ps(&[0]), ps(&[0]), ps(&[5])], &truth);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.spurious, vec![ps(&[5])]);
    }

    #[test]
    fn score_checks_row_dimension() {
        let a = RoutingMatrix::from_rows(&[vec![1], vec![1]]).unwrap();
        let b = RoutingMatrix::from_rows(&[vec![1], vec![1], vec![0]]).unwrap();
        assert!(matches!(score(&a, &b), Err(Error::Dimension(_))));
    }

    proptest! {
        #[test]
        fn score_properties(a in proptest::collection::vec(1u64..64, 0..8), b in proptest::collection::vec(1u64..64, 0..8)) {
            let a: Vec<PathSet> = a.into_iter().map(PathSet::from_bits).collect();
            let b: Vec<PathSet> = b.into_iter().map(PathSet::from_bits).collect();
            let ab = score_sets(&a, &b);
            let ba = score_sets(&b, &a);
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(ab.recall, ba.precision);
            prop_assert!((ab.f1 - (ab.precision * ab.recall).sqrt()).abs() < 1e-15);
            let mut rev = a.clone();
            rev.reverse();
            prop_assert_eq!(score_sets(&rev, &b).f1, ab.f1);
        }
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_lambda_grid().len() * default_b_grid().len(), 231);
        assert_eq!(default_lambda_grid()[3], 0.6);
        assert_eq!(*default_b_grid().last().unwrap(), 1.0);
    }

    fn small_case() -> GridCase {
        let r = RoutingMatrix::from_rows(&[
            vec![1, 1, 0, 0, 0],
            vec![1, 0, 1, 0, 0],
            vec![0, 0, 0, 1, 0],
            vec![0, 0, 0, 1, 1],
        ])
        .unwrap();
        let links: Vec<LinkDistribution> = (0..5)
            .map(|j| LinkDistribution::Gamma {
                shape: 1.0 + j as f64,
                rate: 0.5,
            })
            .collect();
        let prepared = prepare_ground_truth(&r, &links, &PipelineConfig::default()).unwrap();
        GridCase {
            prepared,
            truth: r.column_sets(),
        }
    }

    #[test]
    fn grid_search_picks_best_with_tie_break() {
        let case = small_case();
        let g = grid_search(std::slice::from_ref(&case), &[1.0, 0.0], &[0.5, 0.0], &SolverOptions::default()).unwrap();
        assert_eq!(g.table.len(), 4);
        assert_eq!((g.table[0].lambda, g.table[0].b), (0.0, 0.0));
        let best = g.table.iter().map(|p| p.mean_f1).fold(f64::MIN, f64::max);
        assert_eq!(g.mean_f1, best);
        let first = g.table.iter().find(|p| p.mean_f1 == best).unwrap();
        assert_eq!((g.lambda, g.b), (first.lambda, first.b));
        let d = grid_search(&[case], &[0.0], &[0.0], &SolverOptions::default()).unwrap();
        assert_eq!((d.lambda, d.b), (0.0, 0.0));
    }

    #[test]
    fn campaign_enumeration_and_outputs() {
        let cfg = CampaignConfig {
            topologies: vec![TopologySource::Random {
                nodes: 12,
                avg_degree: 2.5,
                seed: 1,
            }],
            monitors: vec![4],
            sample_sizes: vec![5_000],
            seeds: vec![1, 2],
            i_max: vec![2, 3],
            source: CumulantSource::Data,
            delay: DelayConfig::default(),
            pipeline: None,
            lambda: 1.0,
            b: 0.5,
        };
        assert_eq!(campaign_cases(&cfg).len(), 2);
        let report = run_campaign(&cfg, Path::new(".")).unwrap();
        assert_eq!(report.failures(), 0, "{:?}", report.cases[0].error);
        assert_eq!(report.cases[0].runs.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        report.write(dir.path()).unwrap();
        let cases = fs::read_to_string(dir.path().join("cases.csv")).unwrap();
        assert!(cases.starts_with("case,topology,monitors,n_samples,seed,i_max,metric,value,error"));
        assert!(dir.path().join("cases").join(format!("{}.json", report.cases[0].spec.id)).exists());
        let again = run_campaign(&cfg, Path::new(".")).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn campaign_records_failures() {
        let cfg: CampaignConfig = serde_json::from_str(
            r#"{"topologies": [{"kind": "file", "path": "does/not/exist.json"}],
                "monitors": [3], "sample_sizes": [1000], "seeds": [1]}"#,
        )
        .unwrap();
        let report = run_campaign(&cfg, Path::new(".")).unwrap();
        assert_eq!(report.failures(), 1);
    }
}
