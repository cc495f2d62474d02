//! Operation-point search and fixed-step implicit integration of `M·ẋ = F(x)`.
//!
//! Each integration step solves, for the new state `y`,
//!
//! ```text
//! differential rows:  (y − x)/h − θ F(y) − (1 − θ) F(x) = 0
//! algebraic rows:     F(y) = 0
//! ```
//!
//! with θ = 1 (implicit Euler) or θ = 1/2 (trapezoidal), by damped Newton on the
//! iteration matrix `M/h − θ J` (θ = 1 on algebraic rows).

use log::debug;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::assembly::{GridModel, ResidualScratch, StateVector};
use crate::error::{Error, Result};

/// Tolerance on algebraic rows for an initial condition to count as consistent.
pub const CONSISTENCY_TOL: f64 = 1e-6;

/// Maximum number of step-size halvings before a step is declared failed.
const MAX_STEP_HALVINGS: usize = 5;

/// Maximum number of Newton step halvings on residual increase.
const MAX_DAMPING_HALVINGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ImplicitEuler,
    Trapezoidal,
}

impl Method {
    fn theta(self) -> f64 {
        match self {
            Method::ImplicitEuler => 1.0,
            Method::Trapezoidal => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub step_size: f64,
    pub method: Method,
    pub fd_epsilon: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            step_size: 1e-3,
            method: Method::Trapezoidal,
            fd_epsilon: 1e-7,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.newton_tol) || !positive(self.step_size) || !positive(self.fd_epsilon) {
            return Err(Error::Parameter(
                "solver tolerances and step size must be positive".into(),
            ));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Parameter(
                "newton_max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step_size = h;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

/// Solves square dense systems `A x = b`.
pub trait LinearSolver {
    fn solve(&self, a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>>;
}

/// Partial-pivoting LU. A pivot below `1e-13` times the largest one is treated as singular.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseLu;

impl LinearSolver for DenseLu {
    fn solve(&self, a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
        let lu = a.lu();
        let diag = lu.u().diagonal();
        let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if max.is_nan() || max <= 0.0 || min <= 1e-13 * max {
            return Err(Error::SingularJacobian);
        }
        lu.solve(&DVector::from_column_slice(b))
            .map(|x| x.as_slice().to_vec())
            .ok_or(Error::SingularJacobian)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Forward-difference Jacobian of `f` at `x`, column step `eps · max(1, |x_k|)`.
pub fn fd_jacobian<F>(mut f: F, x: &[f64], eps: f64) -> DMatrix<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut f0 = vec![0.0; n];
    f(x, &mut f0);
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    for k in 0..n {
        let step = eps * x[k].abs().max(1.0);
        xp[k] = x[k] + step;
        let actual = xp[k] - x[k];
        f(&xp, &mut fp);
        for r in 0..n {
            jac[(r, k)] = (fp[r] - f0[r]) / actual;
        }
        xp[k] = x[k];
    }
    jac
}

/// Forward-difference Jacobian of the full residual.
pub fn jacobian(model: &GridModel, x: &StateVector, opts: &SolverOptions) -> Result<DMatrix<f64>> {
    // Validates length and finiteness.
    model.full_residual(x)?;
    let mut scratch = ResidualScratch::default();
    Ok(fd_jacobian(
        |z, out| model.residual_with(z, &mut scratch, out),
        x.as_slice(),
        opts.fd_epsilon,
    ))
}

/// Damped Newton on `f(x) = 0` with a finite-difference Jacobian.
fn newton<F>(mut f: F, x0: Vec<f64>, opts: &SolverOptions) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0;
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    f(&x, &mut r);
    let mut norm = inf_norm(&r);
    for iter in 0..opts.newton_max_iter {
        if norm <= opts.newton_tol {
            return Ok(x);
        }
        if !norm.is_finite() {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: norm,
            });
        }
        let jac = fd_jacobian(&mut f, &x, opts.fd_epsilon);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = DenseLu.solve(jac, &rhs)?;
        let mut lambda = 1.0;
        let mut trial_norm = f64::INFINITY;
        for _ in 0..=MAX_DAMPING_HALVINGS {
            for k in 0..n {
                trial[k] = x[k] + lambda * dx[k];
            }
            f(&trial, &mut r_trial);
            trial_norm = inf_norm(&r_trial);
            if trial_norm < norm {
                break;
            }
            lambda *= 0.5;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        norm = trial_norm;
    }
    if norm <= opts.newton_tol {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        iterations: opts.newton_max_iter,
        residual: norm,
    })
}

/// Residual used for the operation-point search: `F(x)` with the voltage rows of
/// gauged nodes replaced by `Im(conj(u)·du)/|u|²` and `|u|² − v²`.
fn operation_point_residual(
    model: &GridModel,
    x: &[f64],
    scratch: &mut ResidualScratch,
    out: &mut [f64],
) {
    model.residual_with(x, scratch, out);
    for (node, &o) in model.nodes().iter().zip(model.offsets()) {
        if let Some(v) = node.voltage_gauge() {
            let u = Complex64::new(x[o], x[o + 1]);
            let du = Complex64::new(out[o], out[o + 1]);
            let mag2 = u.norm_sqr();
            out[o] = if mag2 > f64::MIN_POSITIVE {
                (u.conj() * du).im / mag2
            } else {
                du.norm()
            };
            out[o + 1] = mag2 - v * v;
        }
    }
}

/// Fixed point of the grid, from initial guess `x0`.
pub fn operation_point(
    model: &GridModel,
    x0: &StateVector,
    opts: &SolverOptions,
) -> Result<StateVector> {
    opts.validate()?;
    model.full_residual(x0)?;
    let mut scratch = ResidualScratch::default();
    let x = newton(
        |z, out| operation_point_residual(model, z, &mut scratch, out),
        x0.0.clone(),
        opts,
    )?;
    let fp = StateVector(x);
    let residual = inf_norm(&model.full_residual(&fp)?);
    if residual > opts.newton_tol {
        return Err(Error::NoConvergence {
            iterations: opts.newton_max_iter,
            residual,
        });
    }
    Ok(fp)
}

/// Largest algebraic-row residual at `x`.
pub fn algebraic_residual(model: &GridModel, x: &StateVector) -> Result<f64> {
    let f = model.full_residual(x)?;
    Ok(f.iter()
        .zip(model.mass())
        .filter(|(_, &m)| m == 0.0)
        .fold(0.0, |acc, (v, _)| acc.max(v.abs())))
}

/// Re-solves the algebraic variables of `x` with the differential ones held fixed.
///
/// Used when a state is handed to a model it is not consistent with, e.g. right
/// after a topology change.
pub fn initialize_algebraic(
    model: &GridModel,
    x: &StateVector,
    opts: &SolverOptions,
) -> Result<StateVector> {
    opts.validate()?;
    model.full_residual(x)?;
    let alg: Vec<usize> = (0..x.len()).filter(|&k| model.mass()[k] == 0.0).collect();
    if alg.is_empty() {
        return Ok(x.clone());
    }
    let mut full = x.0.clone();
    let mut f = vec![0.0; x.len()];
    let mut scratch = ResidualScratch::default();
    let z0: Vec<f64> = alg.iter().map(|&k| x.0[k]).collect();
    let z = newton(
        |z, out| {
            for (&k, &v) in alg.iter().zip(z) {
                full[k] = v;
            }
            model.residual_with(&full, &mut scratch, &mut f);
            for (o, &k) in out.iter_mut().zip(&alg) {
                *o = f[k];
            }
        },
        z0,
        opts,
    )?;
    let mut out = x.clone();
    for (&k, v) in alg.iter().zip(z) {
        out.0[k] = v;
    }
    Ok(out)
}

/// Time-stamped states of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub model: GridModel,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    /// Largest deviation of any state from `reference`.
    pub fn max_deviation(&self, reference: &StateVector) -> f64 {
        self.states
            .iter()
            .map(|s| s.max_abs_diff(reference))
            .fold(0.0, f64::max)
    }
}

struct Stepper<'a> {
    model: &'a GridModel,
    opts: &'a SolverOptions,
    theta: f64,
}

impl Stepper<'_> {
    fn step(&self, x: &[f64], fx: &[f64], h: f64) -> Result<Vec<f64>> {
        let mass = self.model.mass();
        let theta = self.theta;
        let mut fy = vec![0.0; x.len()];
        let mut scratch = ResidualScratch::default();
        newton(
            |y, out| {
                self.model.residual_with(y, &mut scratch, &mut fy);
                for k in 0..y.len() {
                    out[k] = if mass[k] == 0.0 {
                        -fy[k]
                    } else {
                        (y[k] - x[k]) / h - theta * fy[k] - (1.0 - theta) * fx[k]
                    };
                }
            },
            x.to_vec(),
            self.opts,
        )
    }
}

/// Integrates from a consistent `x0` over `t_span` with a fixed step.
///
/// A step whose Newton solve fails is retried with the step halved, at most
/// five times. The final step is shortened to land on `t_span.1`.
pub fn integrate(
    model: &GridModel,
    x0: &StateVector,
    t_span: (f64, f64),
    opts: &SolverOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::Parameter(format!("invalid time span ({t0}, {t1})")));
    }
    let alg = algebraic_residual(model, x0)?;
    if alg > CONSISTENCY_TOL {
        return Err(Error::Inconsistent(alg));
    }
    let stepper = Stepper {
        model,
        opts,
        theta: opts.method.theta(),
    };
    let h = opts.step_size;
    let mut times = vec![t0];
    let mut states = vec![x0.clone()];
    let mut x = x0.0.clone();
    let mut fx = vec![0.0; x.len()];
    model.residual_into(&x, &mut fx);
    let mut t = t0;
    let mut k: u64 = 0;
    while t < t1 {
        let mut target = (t0 + (k + 1) as f64 * h).min(t1);
        if t1 - target <= 1e-9 * h {
            target = t1;
        }
        let mut sub = target - t;
        let mut halvings = 0;
        while t < target {
            let dt = sub.min(target - t);
            match stepper.step(&x, &fx, dt) {
                Ok(y) => {
                    let next = t + dt;
                    t = if target - next <= 1e-12 * h {
                        target
                    } else {
                        next
                    };
                    x = y;
                    model.residual_into(&x, &mut fx);
                    times.push(t);
                    states.push(StateVector(x.clone()));
                }
                Err(e) => {
                    halvings += 1;
                    if halvings > MAX_STEP_HALVINGS {
                        return Err(Error::Integration {
                            t,
                            reason: e.to_string(),
                        });
                    }
                    debug!("step at t={t} failed ({e}); halving to {}", sub / 2.0);
                    sub *= 0.5;
                }
            }
        }
        k += 1;
    }
    Ok(Trajectory {
        times,
        states,
        model: model.clone(),
    })
}
