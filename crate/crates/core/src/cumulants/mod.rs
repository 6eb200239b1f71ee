//! Cumulants: closed forms for link-delay distributions, multivariate
//! k-statistics, resampled estimates, and the nonzero test.

mod kstat;
mod resample;
mod sample;
pub mod special;
mod ttest;

pub use kstat::{common_cumulant_estimate, k_statistic, CenteredSample, MAX_ORDER};
pub use resample::{
    map_replicates, replicate_estimates, resample_estimates, EstimateWithSpread, NonzeroTestConfig, ResampleMethod,
};
pub use sample::DelaySample;
pub use ttest::{nonzero_test, student_t_two_sided_p, NonzeroDecision};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::MultiIndex;
use crate::netmodel::RoutingMatrix;

/// Delay distribution of a single link. Units are milliseconds; rates are
/// per millisecond.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkDistribution {
    Normal { mean: f64, variance: f64 },
    /// Exponential with the given rate, so the mean is `1 / rate`.
    Exponential { rate: f64 },
    /// Gamma with shape and rate, so the mean is `shape / rate`.
    Gamma { shape: f64, rate: f64 },
}

impl LinkDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LinkDistribution::Normal { mean, variance } => mean.is_finite() && variance > 0.0 && variance.is_finite(),
            LinkDistribution::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            LinkDistribution::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid link distribution {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        analytic_cumulant(self, 1)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Closed-form `i`-th cumulant. Exponential and gamma follow the rate
/// convention: `κ_i = (i-1)! / rate^i` and `κ_i = shape (i-1)! / rate^i`.
pub fn analytic_cumulant(dist: &LinkDistribution, order: usize) -> f64 {
    assert!(order >= 1, "cumulant order starts at 1");
    match *dist {
        LinkDistribution::Normal { mean, variance } => match order {
            1 => mean,
            2 => variance,
            _ => 0.0,
        },
        LinkDistribution::Exponential { rate } => factorial(order - 1) / rate.powi(order as i32),
        LinkDistribution::Gamma { shape, rate } => shape * factorial(order - 1) / rate.powi(order as i32),
    }
}

/// The same closed forms in exact rational arithmetic. Every finite float
/// parameter is converted to the rational it represents exactly.
pub fn analytic_cumulant_exact(dist: &LinkDistribution, order: usize) -> Option<BigRational> {
    assert!(order >= 1, "cumulant order starts at 1");
    let fact = (1..order).fold(BigRational::one(), |acc, j| acc * BigRational::from_integer(BigInt::from(j)));
    match *dist {
        LinkDistribution::Normal { mean, variance } => match order {
            1 => BigRational::from_float(mean),
            2 => BigRational::from_float(variance),
            _ => Some(BigRational::zero()),
        },
        LinkDistribution::Exponential { rate } => {
            let r = BigRational::from_float(rate)?;
            Some(fact / num_traits::pow(r, order))
        }
        LinkDistribution::Gamma { shape, rate } => {
            let a = BigRational::from_float(shape)?;
            let r = BigRational::from_float(rate)?;
            Some(a * fact / num_traits::pow(r, order))
        }
    }
}

/// Cumulant `κ_α(R U)` of path delays built from independent link delays:
/// the sum of `κ_{|α|}(U_ℓ)` over links shared by every path in `supp(α)`.
pub fn mixture_cumulant(routing: &RoutingMatrix, links: &[LinkDistribution], alpha: &MultiIndex) -> Result<f64> {
    check_mixture_dims(routing, links, alpha)?;
    let support = alpha.support();
    let order = alpha.size();
    Ok(routing
        .columns()
        .iter()
        .zip(links)
        .filter(|(col, _)| support.is_subset_of(**col))
        .map(|(_, d)| analytic_cumulant(d, order))
        .sum())
}

/// Exact-arithmetic variant of [`mixture_cumulant`].
pub fn mixture_cumulant_exact(
    routing: &RoutingMatrix,
    links: &[LinkDistribution],
    alpha: &MultiIndex,
) -> Result<Option<BigRational>> {
    check_mixture_dims(routing, links, alpha)?;
    let support = alpha.support();
    let order = alpha.size();
    let mut acc = BigRational::zero();
    for (col, d) in routing.columns().iter().zip(links) {
        if support.is_subset_of(*col) {
            match analytic_cumulant_exact(d, order) {
                Some(v) => acc += v,
                None => return Ok(None),
            }
        }
    }
    Ok(Some(acc))
}

fn check_mixture_dims(routing: &RoutingMatrix, links: &[LinkDistribution], alpha: &MultiIndex) -> Result<()> {
    if alpha.size() == 0 {
        return Err(Error::invalid("multi-index must have positive size"));
    }
    if alpha.width() != routing.n() {
        return Err(Error::Dimension(format!(
            "multi-index over {} paths, routing matrix has {}",
            alpha.width(),
            routing.n()
        )));
    }
    if links.len() != routing.m() {
        return Err(Error::Dimension(format!(
            "{} link distributions for {} routing-matrix columns",
            links.len(),
            routing.m()
        )));
    }
    Ok(())
}
