//! Reference solvers for the generalized lasso, written independently of the
//! ADMM solver in `mobitomo_core::solver`.

use mobitomo_core::solver::GenLassoSpec;
use nalgebra::{DMatrix, DVector};

fn soft(v: f64, k: f64) -> f64 {
    v.signum() * (v.abs() - k).max(0.0)
}

/// Accelerated proximal gradient with function-value restart, run over
/// `g = M f`. Needs a square invertible `M` and the penalized form. Returns
/// the final objective in the original variables.
pub fn fista_g_space(spec: &GenLassoSpec, iters: usize) -> Option<f64> {
    assert!(!spec.equality, "g-space reference covers the penalized form only");
    let m = &spec.matrix;
    if !m.is_square() {
        return None;
    }
    let z = m.clone().try_inverse()?;
    let k = spec.n_obs();
    let z_obs = z.rows(0, k).into_owned();
    let a2 = DVector::from_iterator(k, spec.quad_weights.iter().map(|a| a * a));
    let t = DVector::from_column_slice(&spec.target);
    let h = z_obs.transpose() * DMatrix::from_diagonal(&a2) * &z_obs * 2.0;
    let lip = h.symmetric_eigenvalues().max().max(1e-300);
    let step = 1.0 / lip;
    let lin = z_obs.transpose() * a2.component_mul(&t) * 2.0;
    let obj = |g: &DVector<f64>| {
        let f = &z * g;
        spec.objective(f.as_slice())
    };
    let prox = |v: DVector<f64>| DVector::from_iterator(v.len(), v.iter().zip(&spec.weights).map(|(x, w)| soft(*x, w * step)));

    let mut g = m * DVector::from_column_slice(&spec.trivial_point());
    let mut y = g.clone();
    let mut theta = 1.0f64;
    let mut best = obj(&g);
    let mut prev = best;
    for _ in 0..iters {
        let grad = &h * &y - &lin;
        let next = prox(&y - grad * step);
        let cur = obj(&next);
        if cur > prev {
            // restart momentum
            theta = 1.0;
            y = g.clone();
            continue;
        }
        let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        y = &next + (&next - &g) * ((theta - 1.0) / theta_next);
        theta = theta_next;
        g = next;
        best = best.min(cur);
        if prev - cur <= 1e-16 * cur.abs().max(1.0) {
            break;
        }
        prev = cur;
    }
    Some(best)
}

/// Projected subgradient in `f`, with normalized steps `r / sqrt(k)` and the
/// best iterate kept. In equality mode the projection pins the observed
/// variables. Slow, but free of any shared machinery.
pub fn projected_subgradient(spec: &GenLassoSpec, iters: usize) -> f64 {
    let k = spec.n_obs();
    let m = &spec.matrix;
    let mut f = DVector::from_column_slice(&spec.trivial_point());
    let mut best = spec.objective(f.as_slice());
    let radius = f.norm().max(1.0);
    for it in 1..=iters {
        let g = m * &f;
        let sgn = DVector::from_iterator(g.len(), g.iter().zip(&spec.weights).map(|(v, w)| w * v.signum()));
        let mut sub = m.transpose() * sgn;
        if !spec.equality {
            for j in 0..k {
                let a = spec.quad_weights[j];
                sub[j] += 2.0 * a * a * (f[j] - spec.target[j]);
            }
        } else {
            for j in 0..k {
                sub[j] = 0.0;
            }
        }
        let norm = sub.norm();
        if norm == 0.0 {
            break;
        }
        f -= sub * (radius / (norm * (it as f64).sqrt()));
        if spec.equality {
            for j in 0..k {
                f[j] = spec.target[j];
            }
        }
        best = best.min(spec.objective(f.as_slice()));
    }
    best
}
