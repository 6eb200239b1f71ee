use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{modified_inversion_matrix, PathSet};
use crate::solver::GenLassoSpec;

use super::BoundingTopology;

/// An estimate of a common cumulant with its standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observed {
    pub value: f64,
    pub sigma: f64,
}

/// The lasso over the support estimate of a bounding topology.
///
/// Variables are common cumulants `f(P)` for the small sets (`|P| <= s`)
/// and the bounding sets larger than `s`; those with `|P| <= i_max` are
/// observed and come first. Rows are exact cumulants: the modified
/// inversion rows for the small sets, then `g(B) = f(B)` for each large
/// bounding set (nothing in the support estimate lies above it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseProblem {
    pub s: usize,
    pub i_max: usize,
    pub rows: Vec<PathSet>,
    /// Observed variables first, each group in canonical order.
    pub cols: Vec<PathSet>,
    pub n_obs: usize,
    pub matrix: DMatrix<f64>,
    pub observed: Vec<Observed>,
    /// Per row `P`: rows with a nonzero entry in the column of `P`.
    pub activity: Vec<usize>,
}

impl SparseProblem {
    /// `d(P) = lambda * a(P)^b` for every row.
    pub fn weights(&self, lambda: f64, b: f64) -> Vec<f64> {
        self.activity.iter().map(|&a| lambda * (a as f64).powf(b)).collect()
    }

    /// The solver input; `equality` pins the observed values.
    pub fn lasso(&self, lambda: f64, b: f64, equality: bool) -> GenLassoSpec {
        GenLassoSpec {
            quad_weights: self.observed.iter().map(|o| 1.0 / o.sigma).collect(),
            target: self.observed.iter().map(|o| o.value).collect(),
            matrix: self.matrix.clone(),
            weights: self.weights(lambda, b),
            equality,
        }
    }

    /// The sets that need an estimate before calling [`assemble_problem`].
    pub fn observed_sets(bounding: &BoundingTopology, s: usize, i_max: usize) -> Vec<PathSet> {
        let mut sets: Vec<PathSet> = bounding
            .support_estimate()
            .into_iter()
            .filter(|p| p.len() <= i_max && (p.len() <= s || bounding.sets().contains(p)))
            .collect();
        sets.sort_unstable();
        sets
    }
}

/// Builds the lasso for `bounding` with size cap `s`, using the estimates in
/// `observed` for every variable with at most `i_max` paths. Standard
/// deviations are floored at `1e-12 max(1, |value|)` so the quadratic
/// weights stay finite.
pub fn assemble_problem(
    bounding: &BoundingTopology,
    s: usize,
    i_max: usize,
    observed: &BTreeMap<PathSet, Observed>,
) -> Result<SparseProblem> {
    if i_max == 0 {
        return Err(Error::invalid("i_max must be at least 1"));
    }
    if !bounding.is_antichain() {
        return Err(Error::invalid("bounding topology must be an antichain"));
    }
    let est = bounding.support_estimate();
    let inv = modified_inversion_matrix(&est, bounding.sets(), s)?;
    let n_small = inv.rows.len();
    let n_vars = inv.cols.len();

    // square system: small rows, then identity rows for the large sets
    let mut full = DMatrix::zeros(n_vars, n_vars);
    full.view_mut((0, 0), (n_small, n_vars)).copy_from(&inv.matrix);
    for k in n_small..n_vars {
        full[(k, k)] = 1.0;
    }
    let rows = inv.cols.clone();
    let activity: Vec<usize> = (0..n_vars)
        .map(|c| (0..n_vars).filter(|&r| full[(r, c)] != 0.0).count())
        .collect();

    // reorder columns: observed first
    let mut order: Vec<usize> = (0..n_vars).filter(|&c| inv.cols[c].len() <= i_max).collect();
    let n_obs = order.len();
    order.extend((0..n_vars).filter(|&c| inv.cols[c].len() > i_max));
    let cols: Vec<PathSet> = order.iter().map(|&c| inv.cols[c]).collect();
    let matrix = DMatrix::from_fn(n_vars, n_vars, |r, c| full[(r, order[c])]);

    let observed = cols[..n_obs]
        .iter()
        .map(|p| {
            let o = observed.get(p).ok_or(Error::MissingEstimate(*p))?;
            if !o.value.is_finite() || !(o.sigma >= 0.0) {
                return Err(Error::invalid(format!("bad estimate for {p}: {o:?}")));
            }
            Ok(Observed {
                value: o.value,
                sigma: o.sigma.max(1e-12 * o.value.abs().max(1.0)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SparseProblem {
        s,
        i_max,
        rows,
        cols,
        n_obs,
        matrix,
        observed,
        activity,
    })
}
