use serde::{Deserialize, Serialize};

use super::special::regularized_incomplete_beta;
use super::{EstimateWithSpread, NonzeroTestConfig};
use crate::error::{Error, Result};

/// Outcome of a nonzero-mean test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonzeroDecision {
    pub decision: bool,
    pub p_value: f64,
}

/// Two-sided tail probability `P(|T| >= |t|)` for Student's t with `df`
/// degrees of freedom. Computed as `I_{df/(df+t^2)}(df/2, 1/2)`, which stays
/// accurate deep in the tail.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, 0.5 * df, 0.5).clamp(0.0, 1.0)
}

/// Two-sided one-sample t-test of "replicate mean is zero".
///
/// Constant replicates have no spread: a zero mean is then never called
/// nonzero (p = 1) and any other mean always is (p = 0).
pub fn nonzero_test(est: &EstimateWithSpread, cfg: &NonzeroTestConfig) -> Result<NonzeroDecision> {
    cfg.validate()?;
    let m = est.replicates.len();
    if m < 2 {
        return Err(Error::invalid(format!("t-test needs at least 2 replicates, got {m}")));
    }
    if est.stderr == 0.0 {
        return Ok(if est.mean == 0.0 {
            NonzeroDecision {
                decision: false,
                p_value: 1.0,
            }
        } else {
            NonzeroDecision {
                decision: true,
                p_value: 0.0,
            }
        });
    }
    let t = est.mean / est.stderr;
    let p_value = student_t_two_sided_p(t, (m - 1) as f64);
    Ok(NonzeroDecision {
        decision: p_value < cfg.p_threshold,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::ResampleMethod;

    fn cfg(alpha: f64) -> NonzeroTestConfig {
        NonzeroTestConfig {
            method: ResampleMethod::Bootstrap { resamples: 50 },
            p_threshold: alpha,
            rng_seed: 0,
        }
    }

    #[test]
    fn tabulated_quantiles_give_five_percent() {
        for &(df, q) in &[
            (1.0, 12.706_204_736_432_095),
            (5.0, 2.570_581_835_636_314),
            (29.0, 2.045_229_642_132_703),
            (49.0, 2.009_575_237_129_24),
        ] {
            let p = student_t_two_sided_p(q, df);
            assert!((p - 0.05).abs() < 1e-10, "df={df}: p={p}");
        }
    }

    #[test]
    fn matches_reference_cdf() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &df in &[1.0, 3.0, 9.0, 29.0, 49.0, 120.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for k in 0..60 {
                let t = k as f64 * 0.25;
                let want = 2.0 * (1.0 - dist.cdf(t));
                let got = student_t_two_sided_p(t, df);
                assert!((got - want).abs() < 1e-10, "df={df} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn deep_tail_is_resolved() {
        let p = student_t_two_sided_p(60.0, 49.0);
        assert!(p > 0.0 && p < 1e-40);
        assert!(student_t_two_sided_p(80.0, 49.0) < p);
    }

    #[test]
    fn strong_signal_is_nonzero() {
        let reps: Vec<f64> = (0..30).map(|k| 2.0 + 1e-3 * ((k % 5) as f64 - 2.0)).collect();
        let d = nonzero_test(&EstimateWithSpread::from_replicates(reps), &cfg(0.01)).unwrap();
        assert!(d.decision);
        assert!(d.p_value < 1e-30);
    }

    #[test]
    fn symmetric_replicates_are_zero() {
        let reps: Vec<f64> = (0..30).map(|k| if k % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let d = nonzero_test(&EstimateWithSpread::from_replicates(reps), &cfg(0.01)).unwrap();
        assert!(!d.decision);
        assert!(d.p_value > 0.99);
    }

    #[test]
    fn degenerate_spread_convention() {
        let zero = EstimateWithSpread::from_replicates(vec![0.0; 5]);
        assert_eq!(
            nonzero_test(&zero, &cfg(0.05)).unwrap(),
            NonzeroDecision {
                decision: false,
                p_value: 1.0
            }
        );
        let nonzero = EstimateWithSpread::from_replicates(vec![0.5; 5]);
        assert_eq!(
            nonzero_test(&nonzero, &cfg(0.05)).unwrap(),
            NonzeroDecision {
                decision: true,
                p_value: 0.0
            }
        );
    }

    #[test]
    fn p_value_decreases_with_signal() {
        let mut last = 1.0;
        for k in 1..40 {
            let p = student_t_two_sided_p(k as f64 * 0.3, 29.0);
            assert!((0.0..=1.0).contains(&p));
            assert!(p < last);
            last = p;
        }
    }
}
