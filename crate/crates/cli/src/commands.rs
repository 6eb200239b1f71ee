use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mobitomo_core::cumulants::{
    mixture_cumulant, mixture_cumulant_exact, DelaySample, NonzeroTestConfig, ResampleMethod,
};
use mobitomo_core::eval::{
    default_b_grid, default_lambda_grid, grid_cases, grid_search, run_campaign, sample_seed, score, CampaignConfig,
};
use mobitomo_core::io::{read_json, write_json};
use mobitomo_core::mia::{mia_data, mia_exact, mia_exact_rational, MiaResult};
use mobitomo_core::netmodel::{generate_scenario, random_topology, sample_delays, DelayConfig};
use mobitomo_core::sparse::{prepare_ground_truth, run_sparse_pipeline, solve_prepared, PipelineConfig, SparseResult};
use mobitomo_core::{Error, RoutingMatrix, Scenario, Topology};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::{CampaignArgs, Command, EvalArgs, GenerateArgs, GridArgs, MiaArgs, SparseArgs};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Mia(a) => mia(a),
        Command::Sparse(a) => sparse(a),
        Command::Eval(a) => eval(a),
        Command::Campaign(a) => campaign(a),
        Command::GridSearch(a) => grid(a),
    }
}

/// 2 for bad parameters or unreadable inputs, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::InvalidParameter(_) | Error::Input { .. } | Error::Json(_) | Error::Csv(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn put<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T, outputs: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    write_json(&path, value)?;
    outputs.push(path);
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let (skeleton, inputs) = match (&a.topology, a.random_nodes) {
        (Some(path), _) => (Topology::load(path)?, vec![path.clone()]),
        (None, Some(nodes)) => (random_topology(nodes, a.avg_degree, a.seed)?, vec![]),
        (None, None) => unreachable!("clap requires a topology source"),
    };
    let mut inputs = inputs;
    let delay = match &a.delay_config {
        Some(path) => {
            inputs.push(path.clone());
            read_json::<DelayConfig>(path)?
        }
        None => DelayConfig::default(),
    };
    let sc = generate_scenario(&skeleton, a.monitors, &delay, a.seed)?;
    out_dir(&a.out)?;
    let mut outputs = Vec::new();
    put(&a.out, "scenario.json", &sc, &mut outputs)?;
    if a.samples > 0 {
        let sample = sample_delays(&sc, a.samples, sample_seed(a.seed))?;
        let path = a.out.join("samples.csv");
        sample.save(&path)?;
        outputs.push(path);
    }
    RunManifest::new("generate", Some(a.seed), &inputs, &outputs)?.write(&a.out)?;
    eprintln!(
        "{} monitor paths, {} links; wrote {}",
        sc.routing_matrix.n(),
        sc.routing_matrix.m(),
        a.out.display()
    );
    Ok(())
}

/// Rational cumulants as `"num/den"` strings keyed by path set.
#[derive(Serialize)]
struct ExactValues {
    f: BTreeMap<String, String>,
    g: BTreeMap<String, String>,
}

fn mia(a: MiaArgs) -> Result<()> {
    out_dir(&a.out)?;
    let mut outputs = Vec::new();
    let (result, input, seed) = if let Some(path) = &a.scenario {
        let sc = Scenario::load(path)?;
        let r = &sc.routing_matrix;
        let links = sc.link_distributions()?;
        let order = a.order.unwrap_or(r.n());
        let exact = mia_exact_rational(r.path_ids(), order, |alpha| {
            mixture_cumulant_exact(r, &links, alpha)?.ok_or_else(|| Error::InvalidParameter("non-finite link".into()))
        });
        let result = match exact {
            Ok((result, values)) => {
                let show = |m: &BTreeMap<mobitomo_core::PathSet, num_rational::BigRational>| -> BTreeMap<String, String> {
                    m.iter().map(|(p, v)| (p.to_string(), v.to_string())).collect()
                };
                let values = ExactValues {
                    f: show(&values.f),
                    g: show(&values.g),
                };
                put(&a.out, "exact.json", &values, &mut outputs)?;
                result
            }
            Err(Error::InvalidParameter(_)) => mia_exact(r.path_ids(), order, |alpha| mixture_cumulant(r, &links, alpha))?,
            Err(e) => return Err(e.into()),
        };
        (result, path.clone(), None)
    } else {
        let path = a.samples.clone().expect("clap requires an input");
        let sample = DelaySample::load(&path)?;
        let method = match a.bootstrap {
            Some(resamples) => ResampleMethod::Bootstrap { resamples },
            None => ResampleMethod::SampleSplit { splits: a.splits },
        };
        let cfg = NonzeroTestConfig {
            method,
            p_threshold: a.alpha,
            rng_seed: a.seed,
        };
        cfg.validate()?;
        (mia_data(&sample, &cfg)?, path, Some(a.seed))
    };
    put(&a.out, "result.json", &result, &mut outputs)?;
    RunManifest::new("mia", seed, &[input], &outputs)?.write(&a.out)?;
    eprintln!("{} columns inferred", result.r_hat.m());
    Ok(())
}

fn sparse(a: SparseArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let file_cfg = match &a.config {
        Some(path) => {
            inputs.push(path.clone());
            Some(read_json::<PipelineConfig>(path)?)
        }
        None => None,
    };
    let with_overrides = |mut cfg: PipelineConfig| -> Result<PipelineConfig> {
        if let Some(v) = a.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = a.b {
            cfg.b = v;
        }
        if let Some(v) = a.i_max {
            cfg.i_max = v;
        }
        if let Some(v) = a.i_f {
            cfg.i_f = v;
            cfg.i0 = cfg.i0.min(v);
        }
        if a.s.is_some() {
            cfg.s = a.s;
        }
        if let Some(v) = a.resamples {
            cfg.resamples = v;
        }
        if let Some(v) = a.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    };
    let (result, cfg): (SparseResult, PipelineConfig) = if let Some(path) = &a.scenario {
        inputs.push(path.clone());
        let sc = Scenario::load(path)?;
        let cfg = with_overrides(file_cfg.unwrap_or_default())?;
        let prep = prepare_ground_truth(&sc.routing_matrix, &sc.link_distributions()?, &cfg)?;
        (solve_prepared(&prep, cfg.lambda, cfg.b, &cfg.solver)?, cfg)
    } else {
        let path = a.samples.clone().expect("clap requires an input");
        inputs.push(path.clone());
        let sample = DelaySample::load(&path)?;
        let cfg = with_overrides(file_cfg.unwrap_or_else(|| PipelineConfig::for_sample_size(sample.len())))?;
        (run_sparse_pipeline(&sample, &cfg)?, cfg)
    };
    out_dir(&a.out)?;
    let mut outputs = Vec::new();
    put(&a.out, "result.json", &result, &mut outputs)?;
    put(&a.out, "routing.json", &result.result.r_hat, &mut outputs)?;
    put(&a.out, "config.json", &cfg, &mut outputs)?;
    RunManifest::new("sparse", Some(cfg.seed), &inputs, &outputs)?.write(&a.out)?;
    eprintln!(
        "{} columns from {} variables ({} observed), objective {:.6e}",
        result.result.r_hat.m(),
        result.variables,
        result.observed,
        result.diagnostics.objective
    );
    Ok(())
}

fn load_value(path: &Path) -> Result<serde_json::Value> {
    Ok(read_json::<serde_json::Value>(path)?)
}

fn parse_as<T: serde::de::DeserializeOwned>(path: &Path, value: serde_json::Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| {
        Error::Input {
            path: path.to_path_buf(),
            msg: e.to_string(),
        }
        .into()
    })
}

/// Accepts `sparse` results, `mia` results or a bare routing matrix.
fn estimate_matrix(path: &Path) -> Result<RoutingMatrix> {
    let v = load_value(path)?;
    if v.get("result").is_some() {
        Ok(parse_as::<SparseResult>(path, v)?.result.r_hat)
    } else if v.get("r_hat").is_some() {
        Ok(parse_as::<MiaResult>(path, v)?.r_hat)
    } else {
        parse_as::<RoutingMatrix>(path, v)
    }
}

/// Accepts a scenario or a bare routing matrix.
fn truth_matrix(path: &Path) -> Result<RoutingMatrix> {
    let v = load_value(path)?;
    if v.get("routing_matrix").is_some() {
        Ok(Scenario::load(path)?.routing_matrix)
    } else {
        parse_as::<RoutingMatrix>(path, v)
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let est = estimate_matrix(&a.estimate)?;
    let truth = truth_matrix(&a.truth)?;
    let report = score(&est, &truth)?;
    out_dir(&a.out)?;
    let mut outputs = Vec::new();
    put(&a.out, "score.json", &report, &mut outputs)?;
    RunManifest::new("eval", None, &[a.estimate.clone(), a.truth.clone()], &outputs)?.write(&a.out)?;
    println!(
        "precision {:.4}  recall {:.4}  f1 {:.4}",
        report.precision, report.recall, report.f1
    );
    Ok(())
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn files_under(dir: &Path, acc: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            files_under(&p, acc)?;
        } else if p.file_name().is_some_and(|n| n != "manifest.json") {
            acc.push(p);
        }
    }
    Ok(())
}

fn topology_inputs(cfg: &CampaignConfig, base: &Path) -> Vec<PathBuf> {
    use mobitomo_core::eval::TopologySource;
    cfg.topologies
        .iter()
        .filter_map(|t| match t {
            TopologySource::File { path } => Some(base.join(path)),
            TopologySource::Random { .. } => None,
        })
        .collect()
}

fn campaign(a: CampaignArgs) -> Result<()> {
    let cfg = CampaignConfig::load(&a.config)?;
    let base = base_dir(&a.config);
    let report = run_campaign(&cfg, &base)?;
    out_dir(&a.out)?;
    report.write(&a.out)?;
    let mut outputs = Vec::new();
    files_under(&a.out, &mut outputs)?;
    let mut inputs = vec![a.config.clone()];
    inputs.extend(topology_inputs(&cfg, &base));
    RunManifest::new("campaign", None, &inputs, &outputs)?.write(&a.out)?;
    let failures = report.failures();
    eprintln!("{} cases, {failures} failed; wrote {}", report.cases.len(), a.out.display());
    if failures == report.cases.len() && failures > 0 {
        bail!("every campaign case failed");
    }
    Ok(())
}

fn grid(a: GridArgs) -> Result<()> {
    let cfg = CampaignConfig::load(&a.config)?;
    let base = base_dir(&a.config);
    let lambdas = a.lambdas.clone().unwrap_or_else(default_lambda_grid);
    let bs = a.bs.clone().unwrap_or_else(default_b_grid);
    if lambdas.is_empty() || bs.is_empty() || lambdas.iter().chain(&bs).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("grid values must be finite and nonnegative".into()).into());
    }
    out_dir(&a.out)?;
    let mut outputs = Vec::new();
    let mut summary = BTreeMap::new();
    for &i in &cfg.i_max {
        let cases = grid_cases(&cfg, &base, i)?;
        let solver = cfg.pipeline_for(1, i).solver;
        let res = grid_search(&cases, &lambdas, &bs, &solver)?;
        put(&a.out, &format!("grid_imax{i}.json"), &res, &mut outputs)?;
        let csv_path = a.out.join(format!("grid_imax{i}.csv"));
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(["lambda", "b", "mean_f1"])?;
        for p in &res.table {
            w.write_record([p.lambda.to_string(), p.b.to_string(), p.mean_f1.to_string()])?;
        }
        w.flush()?;
        outputs.push(csv_path);
        println!("i_max {i}: lambda {} b {} mean f1 {:.4}", res.lambda, res.b, res.mean_f1);
        summary.insert(format!("i_max_{i}"), (res.lambda, res.b, res.mean_f1));
    }
    put(&a.out, "grid.json", &summary, &mut outputs)?;
    let mut inputs = vec![a.config.clone()];
    inputs.extend(topology_inputs(&cfg, &base));
    RunManifest::new("grid-search", None, &inputs, &outputs)?.write(&a.out)?;
    Ok(())
}
