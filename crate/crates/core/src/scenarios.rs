//! Fault experiments on a solved grid: frequency perturbation and line tripping.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::assembly::{GridModel, StateVector};
use crate::error::{Error, Result};
use crate::grid::{build_admittance_laplacian, ensure_connected, remove_line, LineSpec};
use crate::solver::{initialize_algebraic, integrate, SolverOptions, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioKind {
    /// Add `delta` (rad/s) to the first internal variable of `bus`.
    FrequencyPerturbation { bus: usize, delta: f64 },
    /// Remove line number `line` (1-based) at t0.
    LineTripping { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub t_span: (f64, f64),
}

impl ScenarioSpec {
    /// Runs the scenario starting from the operation point `fp` of `model`.
    ///
    /// `lines` must be the line list `model`'s Laplacian was built from.
    pub fn run(
        &self,
        model: &GridModel,
        lines: &[LineSpec],
        fp: &StateVector,
        opts: &SolverOptions,
    ) -> Result<Trajectory> {
        match self.kind {
            ScenarioKind::FrequencyPerturbation { bus, delta } => {
                run_frequency_perturbation(model, fp, bus, delta, self.t_span, opts)
            }
            ScenarioKind::LineTripping { line } => {
                run_line_tripping(model, lines, fp, line, self.t_span, opts)
            }
        }
    }
}

pub fn run_frequency_perturbation(
    model: &GridModel,
    fp: &StateVector,
    bus: usize,
    delta: f64,
    t_span: (f64, f64),
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if !delta.is_finite() {
        return Err(Error::Parameter("perturbation must be finite".into()));
    }
    if model.node(bus)?.internal_count() == 0 {
        return Err(Error::Selector(format!(
            "bus {bus} has no internal variable to perturb"
        )));
    }
    let mut x0 = fp.clone();
    let omega = model.internal(&x0, bus, 1)?;
    model.set_internal(&mut x0, bus, 1, omega + delta)?;
    integrate(model, &x0, t_span, opts)
}

/// Trips `line_number` and integrates the post-trip grid from `fp`.
///
/// The recorded t0 sample is `fp` itself. The algebraic variables are re-solved
/// against the post-trip network before the first step.
pub fn run_line_tripping(
    model: &GridModel,
    lines: &[LineSpec],
    fp: &StateVector,
    line_number: usize,
    t_span: (f64, f64),
    opts: &SolverOptions,
) -> Result<Trajectory> {
    let n = model.bus_count();
    let remaining = remove_line(lines, line_number)?;
    ensure_connected(&remaining, n)?;
    let post = model.with_laplacian(build_admittance_laplacian(&remaining, n)?)?;
    let start = initialize_algebraic(&post, fp, opts)?;
    let mut traj = integrate(&post, &start, t_span, opts)?;
    traj.states[0] = fp.clone();
    Ok(traj)
}

/// Per-bus observables over time.
#[derive(Debug, Clone, PartialEq)]
pub struct BusSeries {
    pub v: Vec<f64>,
    /// Voltage angle, unwrapped along the trajectory.
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Present only for buses with an internal frequency variable.
    pub omega: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSeries {
    pub buses: Vec<BusSeries>,
}

impl DerivedSeries {
    /// Largest `|ω|` over all buses and samples with `t >= t_from`.
    pub fn max_abs_omega(&self, times: &[f64], t_from: f64) -> f64 {
        self.buses
            .iter()
            .filter_map(|b| b.omega.as_ref())
            .flat_map(|w| {
                w.iter()
                    .zip(times)
                    .filter(|(_, &t)| t >= t_from)
                    .map(|(w, _)| w.abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn max_frequency_deviation_hz(&self, times: &[f64]) -> f64 {
        self.max_abs_omega(times, f64::NEG_INFINITY) / (2.0 * PI)
    }
}

fn unwrap_angle(prev: f64, raw: f64) -> f64 {
    let two_pi = 2.0 * PI;
    raw + two_pi * ((prev - raw) / two_pi).round()
}

/// v, φ, p, q and (where present) ω for every bus, recomputing currents from the
/// trajectory's own Laplacian.
pub fn derived_series(trajectory: &Trajectory) -> DerivedSeries {
    let model = &trajectory.model;
    let n_t = trajectory.len();
    let mut buses: Vec<BusSeries> = model
        .nodes()
        .iter()
        .map(|node| BusSeries {
            v: Vec::with_capacity(n_t),
            phi: Vec::with_capacity(n_t),
            p: Vec::with_capacity(n_t),
            q: Vec::with_capacity(n_t),
            omega: (node.internal_count() > 0 && node.internal_masses()[0])
                .then(|| Vec::with_capacity(n_t)),
        })
        .collect();
    for state in &trajectory.states {
        let u = model.voltages(state.as_slice());
        let i = model.currents(state.as_slice());
        for (bus, series) in buses.iter_mut().enumerate() {
            let s: Complex64 = u[bus] * i[bus].conj();
            let raw = u[bus].arg();
            let phi = series
                .phi
                .last()
                .map_or(raw, |&prev| unwrap_angle(prev, raw));
            series.v.push(u[bus].norm());
            series.phi.push(phi);
            series.p.push(s.re);
            series.q.push(s.im);
            if let Some(w) = series.omega.as_mut() {
                w.push(state.0[model.offsets()[bus] + 2]);
            }
        }
    }
    DerivedSeries { buses }
}
