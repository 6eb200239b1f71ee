use crate::error::{Error, Result};
use crate::lattice::{representative_multi_indices, MultiIndex, PathSet};

use super::DelaySample;

/// Highest k-statistic order implemented.
pub const MAX_ORDER: usize = 4;

/// A sample with column means removed, ready for repeated k-statistic
/// evaluation over different multi-indices.
#[derive(Clone, Debug)]
pub struct CenteredSample {
    rows: usize,
    means: Vec<f64>,
    centered: Vec<Vec<f64>>,
}

impl CenteredSample {
    pub fn new(sample: &DelaySample) -> Self {
        Self::from_columns(sample.columns().iter().map(|c| c.as_slice()))
    }

    /// Center the rows `indices` of `sample` (with repetition allowed).
    pub fn from_indices(sample: &DelaySample, indices: &[usize]) -> Self {
        let cols: Vec<Vec<f64>> = sample
            .columns()
            .iter()
            .map(|c| indices.iter().map(|&i| c[i]).collect())
            .collect();
        Self::from_owned(cols)
    }

    /// Center the contiguous row range `start..end`.
    pub fn from_range(sample: &DelaySample, start: usize, end: usize) -> Self {
        Self::from_columns(sample.columns().iter().map(|c| &c[start..end]))
    }

    fn from_columns<'a>(cols: impl Iterator<Item = &'a [f64]>) -> Self {
        Self::from_owned(cols.map(|c| c.to_vec()).collect())
    }

    fn from_owned(mut cols: Vec<Vec<f64>>) -> Self {
        let rows = cols.first().map_or(0, |c| c.len());
        let mut means = Vec::with_capacity(cols.len());
        for col in &mut cols {
            let mean = col.iter().sum::<f64>() / rows as f64;
            col.iter_mut().for_each(|v| *v -= mean);
            means.push(mean);
        }
        CenteredSample {
            rows,
            means,
            centered: cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn paths(&self) -> usize {
        self.centered.len()
    }

    fn check(&self, alpha: &MultiIndex) -> Result<()> {
        if alpha.width() != self.paths() {
            return Err(Error::Dimension(format!(
                "multi-index over {} paths, sample has {}",
                alpha.width(),
                self.paths()
            )));
        }
        let order = alpha.size();
        if order == 0 || order > MAX_ORDER {
            return Err(Error::OrderNotSupported(order));
        }
        if self.rows <= order {
            return Err(Error::SampleTooSmall {
                needed: order,
                got: self.rows,
            });
        }
        Ok(())
    }

    pub fn k_statistic(&self, alpha: &MultiIndex) -> Result<f64> {
        self.check(alpha)?;
        Ok(self.k_statistic_of(&alpha.expand()))
    }

    /// k-statistic for a list of column indices (a multi-index expanded by
    /// multiplicity). The caller guarantees `1 <= cols.len() <= 4` and
    /// enough rows.
    fn k_statistic_of(&self, cols: &[usize]) -> f64 {
        let n = self.rows as f64;
        let c = |j: usize| self.centered[cols[j]].as_slice();
        match cols.len() {
            1 => self.means[cols[0]],
            2 => dot2(c(0), c(1)) / (n - 1.0),
            3 => n / ((n - 1.0) * (n - 2.0)) * dot3(c(0), c(1), c(2)),
            4 => {
                let s4 = dot4(c(0), c(1), c(2), c(3));
                let pairs = dot2(c(0), c(1)) * dot2(c(2), c(3))
                    + dot2(c(0), c(2)) * dot2(c(1), c(3))
                    + dot2(c(0), c(3)) * dot2(c(1), c(2));
                (n * (n + 1.0) * s4 - (n - 1.0) * pairs) / ((n - 1.0) * (n - 2.0) * (n - 3.0))
            }
            k => unreachable!("k-statistic of order {k}"),
        }
    }

    /// Average of the k-statistics over every representative multi-index of
    /// `set` at the given order.
    pub fn common_cumulant(&self, set: PathSet, order: usize) -> Result<f64> {
        if order > MAX_ORDER {
            return Err(Error::OrderNotSupported(order));
        }
        let reps = representative_multi_indices(set, order, self.paths())?;
        self.check(&reps[0])?;
        let total: f64 = reps.iter().map(|a| self.k_statistic_of(&a.expand())).sum();
        Ok(total / reps.len() as f64)
    }
}

fn dot2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).sum()
}

fn dot4(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(c)
        .zip(d)
        .map(|(((x, y), z), w)| x * y * z * w)
        .sum()
}

/// Unbiased estimate of the joint cumulant `κ_α` from an i.i.d. sample.
/// Order 1 is the sample mean; orders 2 to 4 are supported.
pub fn k_statistic(sample: &DelaySample, alpha: &MultiIndex) -> Result<f64> {
    CenteredSample::new(sample).k_statistic(alpha)
}

/// Estimate of the order-`order` common cumulant of `set`: the mean of the
/// k-statistics over all representative multi-indices of `set`.
pub fn common_cumulant_estimate(sample: &DelaySample, set: PathSet, order: usize) -> Result<f64> {
    CenteredSample::new(sample).common_cumulant(set, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(seed: u64, rows: usize, paths: usize) -> DelaySample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = (0..paths)
            .map(|_| (0..rows).map(|_| rng.random_range(0.0..5.0f64).powi(2)).collect())
            .collect();
        DelaySample::from_columns((0..paths).map(|j| format!("p{j}")).collect(), cols).unwrap()
    }

    #[test]
    fn order_two_is_sample_covariance() {
        for seed in 0..50 {
            let s = random_sample(seed, 7 + seed as usize, 3);
            let (a, b) = (s.column(0), s.column(2));
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
            let k = k_statistic(&s, &MultiIndex::new(vec![1, 0, 1])).unwrap();
            assert!((k - cov).abs() <= 1e-12 * cov.abs().max(1.0));
        }
    }

    #[test]
    fn constant_sample_has_zero_cumulants() {
        let s = DelaySample::from_rows(vec!["a".into(), "b".into()], &vec![vec![3.0, 4.5]; 10]).unwrap();
        for alpha in [vec![2, 0], vec![1, 1], vec![2, 1], vec![1, 3], vec![0, 4]] {
            assert_eq!(k_statistic(&s, &MultiIndex::new(alpha)).unwrap(), 0.0);
        }
        assert_eq!(k_statistic(&s, &MultiIndex::new(vec![0, 1])).unwrap(), 4.5);
    }

    #[test]
    fn order_and_size_errors() {
        let s = random_sample(1, 5, 2);
        assert!(matches!(
            k_statistic(&s, &MultiIndex::new(vec![3, 2])),
            Err(Error::OrderNotSupported(5))
        ));
        assert!(k_statistic(&s, &MultiIndex::new(vec![3, 1])).is_ok());
        let tiny = random_sample(2, 4, 2);
        assert!(matches!(
            k_statistic(&tiny, &MultiIndex::new(vec![2, 2])),
            Err(Error::SampleTooSmall { needed: 4, got: 4 })
        ));
    }

    #[test]
    fn common_estimate_averages_representatives() {
        let s = random_sample(3, 40, 3);
        let pair = PathSet::from_indices([0, 1]);
        let k21 = k_statistic(&s, &MultiIndex::new(vec![2, 1, 0])).unwrap();
        let k12 = k_statistic(&s, &MultiIndex::new(vec![1, 2, 0])).unwrap();
        let est = common_cumulant_estimate(&s, pair, 3).unwrap();
        assert!((est - 0.5 * (k21 + k12)).abs() < 1e-12);

        let triple = PathSet::full(3);
        let k111 = k_statistic(&s, &MultiIndex::new(vec![1, 1, 1])).unwrap();
        assert!((common_cumulant_estimate(&s, triple, 3).unwrap() - k111).abs() < 1e-12);
    }

    #[test]
    fn common_estimate_ignores_enumeration_order() {
        let s = random_sample(4, 30, 4);
        let c = CenteredSample::new(&s);
        let set = PathSet::from_indices([1, 3]);
        let mut reps = representative_multi_indices(set, 4, 4).unwrap();
        let forward: f64 = reps.iter().map(|a| c.k_statistic(a).unwrap()).sum::<f64>() / reps.len() as f64;
        reps.reverse();
        let backward: f64 = reps.iter().map(|a| c.k_statistic(a).unwrap()).sum::<f64>() / reps.len() as f64;
        let est = c.common_cumulant(set, 4).unwrap();
        assert!((forward - est).abs() < 1e-9 * est.abs().max(1.0));
        assert!((backward - est).abs() < 1e-9 * est.abs().max(1.0));
    }

    #[test]
    fn common_estimate_precondition() {
        let s = random_sample(5, 30, 3);
        assert!(common_cumulant_estimate(&s, PathSet::full(3), 2).is_err());
        assert!(matches!(
            common_cumulant_estimate(&s, PathSet::full(3), 5),
            Err(Error::OrderNotSupported(5))
        ));
    }
}
