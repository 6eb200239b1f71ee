//! Generalized lasso:
//!
//! ```text
//! J(f) = sum_k a_k^2 (f_k - t_k)^2 + sum_r w_r |(M f)_r|
//! ```
//!
//! where the quadratic term covers the first `n_obs` ("observed") variables
//! only. Solved by ADMM on the split `z = M f`, followed by a polish step
//! that re-solves the smooth problem on the support ADMM found.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenLassoSpec {
    /// `a_k = 1 / sigma_k` for each observed variable.
    pub quad_weights: Vec<f64>,
    /// Target values for the observed variables.
    pub target: Vec<f64>,
    /// `rows x vars`; the first `target.len()` columns are observed.
    pub matrix: DMatrix<f64>,
    /// Nonnegative L1 weight per row.
    pub weights: Vec<f64>,
    /// Pin the observed variables to `target` instead of penalizing them.
    #[serde(default)]
    pub equality: bool,
}

impl GenLassoSpec {
    pub fn n_obs(&self) -> usize {
        self.target.len()
    }

    pub fn n_vars(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (rows, vars) = self.matrix.shape();
        if self.quad_weights.len() != self.target.len() {
            return Err(Error::Dimension(format!(
                "{} quadratic weights for {} targets",
                self.quad_weights.len(),
                self.target.len()
            )));
        }
        if self.target.len() > vars {
            return Err(Error::Dimension(format!("{} observed of {vars} variables", self.target.len())));
        }
        if self.weights.len() != rows {
            return Err(Error::Dimension(format!("{} weights for {rows} rows", self.weights.len())));
        }
        if self.quad_weights.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("quadratic weights must be positive and finite"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("L1 weights must be nonnegative and finite"));
        }
        if self.target.iter().chain(self.matrix.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite entry in lasso data"));
        }
        Ok(())
    }

    /// `J(f)`. In equality mode the quadratic term is dropped (it is zero on
    /// the feasible set).
    pub fn objective(&self, f: &[f64]) -> f64 {
        let quad = if self.equality {
            0.0
        } else {
            self.quad_weights
                .iter()
                .zip(&self.target)
                .zip(f)
                .map(|((a, t), x)| (a * (x - t)).powi(2))
                .sum()
        };
        let g = &self.matrix * DVector::from_column_slice(f);
        quad + self.weights.iter().zip(g.iter()).map(|(w, v)| w * v.abs()).sum::<f64>()
    }

    /// `(target, 0, ..., 0)`: the starting point and the trivial feasible
    /// point in either mode.
    pub fn trivial_point(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.n_vars()];
        f[..self.n_obs()].copy_from_slice(&self.target);
        f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub rho: f64,
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            tol: 1e-8,
            rho: 1.0,
            polish: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub rho: f64,
    /// Variables in no quadratic term and no weighted row; fixed at 0.
    pub pinned: Vec<usize>,
    pub polished: bool,
    /// Best objective so far after each iteration, so non-increasing.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub f: Vec<f64>,
    /// `M f` over every row, including zero-weight rows.
    pub g: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

fn soft_threshold(x: f64, k: f64) -> f64 {
    if x > k {
        x - k
    } else if x < -k {
        x + k
    } else {
        0.0
    }
}

/// The reduced problem ADMM works on:
/// `min 1/2 f'Qf - q'f + sum_r w_r |(M f + c)_r|` with `Q` diagonal.
struct Reduced {
    q_diag: DVector<f64>,
    q_lin: DVector<f64>,
    m: DMatrix<f64>,
    c: DVector<f64>,
    w: DVector<f64>,
}

impl Reduced {
    fn objective(&self, f: &DVector<f64>) -> f64 {
        let smooth: f64 = (0..f.len())
            .map(|k| 0.5 * self.q_diag[k] * f[k] * f[k] - self.q_lin[k] * f[k])
            .sum();
        let z = &self.m * f + &self.c;
        smooth + self.w.iter().zip(z.iter()).map(|(w, v)| w * v.abs()).sum::<f64>()
    }

    /// Factor `Q + rho M'M`; adds a vanishing ridge if the matrix is only
    /// semidefinite, which selects a minimum-norm point along flat directions.
    fn factor(&self, rho: f64) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
        let mut h = self.m.transpose() * &self.m * rho;
        for k in 0..h.nrows() {
            h[(k, k)] += self.q_diag[k];
        }
        let scale = (0..h.nrows()).map(|k| h[(k, k)]).fold(0.0, f64::max).max(1.0);
        let mut ridge = 0.0;
        loop {
            let mut hr = h.clone();
            for k in 0..hr.nrows() {
                hr[(k, k)] += ridge;
            }
            if let Some(ch) = hr.cholesky() {
                return ch;
            }
            ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 10.0 };
        }
    }
}

pub fn solve(spec: &GenLassoSpec, opts: &SolverOptions) -> Result<Solution> {
    spec.validate()?;
    if !(opts.rho > 0.0 && opts.tol > 0.0) {
        return Err(Error::invalid("solver rho and tol must be positive"));
    }
    let n_obs = spec.n_obs();
    let n_vars = spec.n_vars();
    let rows: Vec<usize> = (0..spec.matrix.nrows()).filter(|&r| spec.weights[r] > 0.0).collect();

    // Free variables: observed ones unless pinned by equality, plus
    // unobserved ones touched by some weighted row.
    let touched = |j: usize| rows.iter().any(|&r| spec.matrix[(r, j)] != 0.0);
    let free: Vec<usize> = (0..n_vars)
        .filter(|&j| if j < n_obs { !spec.equality } else { touched(j) })
        .collect();
    let pinned: Vec<usize> = (n_obs..n_vars).filter(|&j| !touched(j)).collect();

    let base = spec.trivial_point();
    let mut f_full = base.clone();

    let mut diag = SolveDiagnostics {
        iterations: 0,
        converged: true,
        objective: 0.0,
        rho: opts.rho,
        pinned,
        polished: false,
        objective_trace: Vec::new(),
    };

    if !free.is_empty() && !rows.is_empty() {
        // Fixed variables (pinned observed values in equality mode) fold
        // into the offset c.
        let fixed: Vec<usize> = (0..n_vars).filter(|j| !free.contains(j)).collect();
        let m = DMatrix::from_fn(rows.len(), free.len(), |r, k| spec.matrix[(rows[r], free[k])]);
        let c = DVector::from_fn(rows.len(), |r, _| {
            fixed.iter().map(|&j| spec.matrix[(rows[r], j)] * base[j]).sum()
        });
        let q_diag = DVector::from_fn(free.len(), |k, _| {
            let j = free[k];
            if j < n_obs {
                2.0 * spec.quad_weights[j].powi(2)
            } else {
                0.0
            }
        });
        let q_lin = DVector::from_fn(free.len(), |k, _| {
            let j = free[k];
            if j < n_obs {
                2.0 * spec.quad_weights[j].powi(2) * spec.target[j]
            } else {
                0.0
            }
        });
        let w = DVector::from_fn(rows.len(), |r, _| spec.weights[rows[r]]);
        let red = Reduced { q_diag, q_lin, m, c, w };
        let x0 = DVector::from_fn(free.len(), |k, _| base[free[k]]);
        let (x, iters, converged, rho, polished, trace) = admm(&red, x0, opts);
        for (k, &j) in free.iter().enumerate() {
            f_full[j] = x[k];
        }
        diag.iterations = iters;
        diag.converged = converged;
        diag.rho = rho;
        diag.polished = polished;
        diag.objective_trace = trace;
    }

    let g = (&spec.matrix * DVector::from_column_slice(&f_full)).as_slice().to_vec();
    diag.objective = spec.objective(&f_full);
    Ok(Solution { f: f_full, g, diagnostics: diag })
}

type AdmmOutcome = (DVector<f64>, usize, bool, f64, bool, Vec<f64>);

fn admm(red: &Reduced, x0: DVector<f64>, opts: &SolverOptions) -> AdmmOutcome {
    let (nr, nv) = red.m.shape();
    let mut rho = opts.rho;
    let mut chol = red.factor(rho);
    let mut x = x0;
    let mut z = &red.m * &x + &red.c;
    let mut u = DVector::zeros(nr);
    let mut best_x = x.clone();
    let mut best = red.objective(&x);
    let mut trace = Vec::with_capacity(opts.max_iters.min(4096));
    let mut converged = false;
    let mut iters = 0;
    let abs_scale = (nr.max(nv) as f64).sqrt();

    for k in 0..opts.max_iters {
        iters = k + 1;
        let rhs = &red.q_lin + red.m.transpose() * ((&z - &u - &red.c) * rho);
        x = chol.solve(&rhs);
        let mx = &red.m * &x + &red.c;
        let z_old = z.clone();
        let v = &mx + &u;
        z = DVector::from_fn(nr, |r, _| soft_threshold(v[r], red.w[r] / rho));
        u += &mx - &z;

        let obj = red.objective(&x);
        if obj < best {
            best = obj;
            best_x.copy_from(&x);
        }
        trace.push(best);

        let r_norm = (&mx - &z).norm();
        let s_norm = rho * (red.m.transpose() * (&z - &z_old)).norm();
        let scale_p = mx.norm().max(z.norm()).max(1.0);
        let scale_d = (rho * (red.m.transpose() * &u).norm()).max(1.0);
        if r_norm <= opts.tol * abs_scale * scale_p && s_norm <= opts.tol * abs_scale * scale_d {
            converged = true;
            break;
        }
        if k % 10 == 9 {
            let new_rho = if r_norm > 10.0 * s_norm {
                rho * 2.0
            } else if s_norm > 10.0 * r_norm {
                rho / 2.0
            } else {
                rho
            };
            if new_rho != rho {
                u *= rho / new_rho;
                rho = new_rho;
                chol = red.factor(rho);
            }
        }
    }

    let mut polished = false;
    if opts.polish {
        if let Some(px) = polish(red, &z) {
            let obj = red.objective(&px);
            // The polished point is exact on its support; prefer it unless
            // it is worse by more than rounding.
            if obj <= best + 1e-12 * (1.0 + best.abs()) {
                best = obj;
                best_x = px;
                polished = true;
                if let Some(last) = trace.last_mut() {
                    *last = last.min(best);
                }
            }
        }
    }
    let _ = best;
    (best_x, iters, converged, rho, polished, trace)
}

/// Minimize the smooth part plus the linearized L1 term on the sign
/// pattern of `z`, with rows outside the support forced to zero.
fn polish(red: &Reduced, z: &DVector<f64>) -> Option<DVector<f64>> {
    let nv = red.m.ncols();
    let zmax = z.amax().max(1e-300);
    let on: Vec<usize> = (0..z.len()).filter(|&r| z[r].abs() > 1e-9 * zmax).collect();
    let off: Vec<usize> = (0..z.len()).filter(|r| !on.contains(r)).collect();

    // Particular solution of C x = d, and the null space of C.
    let c_mat = DMatrix::from_fn(off.len(), nv, |r, j| red.m[(off[r], j)]);
    let d = DVector::from_fn(off.len(), |r, _| -red.c[off[r]]);
    let (xp, null) = if off.is_empty() {
        (DVector::zeros(nv), DMatrix::identity(nv, nv))
    } else {
        let ctc = c_mat.transpose() * &c_mat;
        let eig = SymmetricEigen::new(ctc);
        let top = eig.eigenvalues.amax().max(1e-300);
        let keep: Vec<usize> = (0..nv).filter(|&k| eig.eigenvalues[k] <= 1e-10 * top).collect();
        let null = DMatrix::from_fn(nv, keep.len(), |i, k| eig.eigenvectors[(i, keep[k])]);
        let xp = c_mat.clone().svd(true, true).solve(&d, 1e-12).ok()?;
        if (&c_mat * &xp - &d).norm() > 1e-8 * d.norm().max(1.0) {
            return None;
        }
        (xp, null)
    };
    if null.ncols() == 0 {
        return Some(xp);
    }
    let signs = DVector::from_fn(z.len(), |r, _| if on.contains(&r) { z[r].signum() * red.w[r] } else { 0.0 });
    let grad0 = DVector::from_fn(nv, |k, _| red.q_diag[k] * xp[k] - red.q_lin[k]) + red.m.transpose() * signs;
    let qn = DMatrix::from_fn(nv, null.ncols(), |i, k| red.q_diag[i] * null[(i, k)]);
    let h = null.transpose() * qn;
    let rhs = -(null.transpose() * grad0);
    let y = h.svd(true, true).solve(&rhs, 1e-12).ok()?;
    Some(xp + null * y)
}
