//! Bus dynamics.
//!
//! Each node contributes `m_u · du = f(u, x, i)` for its complex voltage and
//! `m_x · dx = g(u, x, i)` for its internal variables. Masses are binary; a
//! zero mass turns the row into an algebraic residual that must vanish.

use std::any::Any;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::BusRow;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Dynamics of a single bus.
pub trait NodeModel: Debug + Send + Sync {
    /// Type name, as used by the bus table.
    fn type_name(&self) -> &'static str;

    fn internal_count(&self) -> usize;

    /// `true` for `m_u = 1`.
    fn voltage_mass(&self) -> bool;

    /// One flag per internal variable.
    fn internal_masses(&self) -> &[bool];

    /// Writes `g(u, x, i)` into `dx` and returns `f(u, x, i)`.
    ///
    /// `x` and `dx` must both have length [`internal_count`](Self::internal_count).
    fn residual(&self, u: Complex64, i: Complex64, x: &[f64], dx: &mut [f64]) -> Complex64;

    /// Voltage magnitude to pin when searching for an operation point.
    ///
    /// Nodes whose voltage dynamics only rotate `u` leave `|u|` undetermined at
    /// a fixed point. Such nodes return `Some(v)`; the operation-point search then
    /// replaces the two voltage rows by `Im(conj(u)·du)/|u|² = 0` and `|u|² = v²`.
    fn voltage_gauge(&self) -> Option<f64> {
        None
    }

    fn as_any(&self) -> &dyn Any;

    /// Checked evaluation returning `(du, dx)`.
    fn evaluate(&self, u: Complex64, i: Complex64, x: &[f64]) -> Result<(Complex64, Vec<f64>)> {
        if x.len() != self.internal_count() {
            return Err(Error::Dimension {
                expected: self.internal_count(),
                actual: x.len(),
            });
        }
        let mut dx = vec![0.0; x.len()];
        let du = self.residual(u, i, x, &mut dx);
        Ok((du, dx))
    }
}

/// Algebraic slack bus: `0 = u − U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackAlgebraic {
    pub u: Complex64,
}

impl SlackAlgebraic {
    pub fn new(u: Complex64) -> Self {
        Self { u }
    }
}

impl NodeModel for SlackAlgebraic {
    fn type_name(&self) -> &'static str {
        "SlackAlgebraic"
    }
    fn internal_count(&self) -> usize {
        0
    }
    fn voltage_mass(&self) -> bool {
        false
    }
    fn internal_masses(&self) -> &[bool] {
        &[]
    }
    fn residual(&self, u: Complex64, _i: Complex64, _x: &[f64], _dx: &mut [f64]) -> Complex64 {
        u - self.u
    }
    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Algebraic constant-power bus: `0 = S − u·conj(i)`.
///
/// `S` is the power flowing from the node into the grid, so loads are negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PQAlgebraic {
    pub s: Complex64,
}

impl PQAlgebraic {
    pub fn new(s: Complex64) -> Self {
        Self { s }
    }
}

impl NodeModel for PQAlgebraic {
    fn type_name(&self) -> &'static str {
        "PQAlgebraic"
    }
    fn internal_count(&self) -> usize {
        0
    }
    fn voltage_mass(&self) -> bool {
        false
    }
    fn internal_masses(&self) -> &[bool] {
        &[]
    }
    fn residual(&self, u: Complex64, i: Complex64, _x: &[f64], _dx: &mut [f64]) -> Complex64 {
        self.s - u * i.conj()
    }
    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Second-order synchronous machine (swing equation).
///
/// `du = j·ω·u` and `dω = (P − D·ω − Re(u·conj(i))) · 2πΩ/H`, with ω in rad/s
/// relative to the frame rotating at the rated frequency Ω (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingEq {
    pub h: f64,
    pub p: f64,
    pub d: f64,
    pub omega_rated: f64,
    /// Voltage magnitude used as the operation-point gauge.
    pub v_nominal: f64,
    omega_h: f64,
}

impl SwingEq {
    pub fn new(h: f64, p: f64, d: f64, omega_rated: f64) -> Result<Self> {
        if d.is_nan() || d <= 0.0 {
            return Err(Error::Parameter(format!(
                "damping (D) should be >0, got {d}"
            )));
        }
        if h.is_nan() || h <= 0.0 {
            return Err(Error::Parameter(format!(
                "inertia (H) should be >0, got {h}"
            )));
        }
        if !(omega_rated > 0.0 && omega_rated.is_finite())
            || !p.is_finite()
            || !h.is_finite()
            || !d.is_finite()
        {
            return Err(Error::Parameter(
                "swing parameters must be finite, Ω > 0".into(),
            ));
        }
        Ok(Self {
            h,
            p,
            d,
            omega_rated,
            v_nominal: 1.0,
            omega_h: 2.0 * PI * omega_rated / h,
        })
    }

    pub fn with_nominal_voltage(mut self, v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!(
                "nominal voltage must be > 0, got {v}"
            )));
        }
        self.v_nominal = v;
        Ok(self)
    }

    /// The precomputed factor `2πΩ/H`.
    pub fn omega_h(&self) -> f64 {
        self.omega_h
    }
}

impl NodeModel for SwingEq {
    fn type_name(&self) -> &'static str {
        "SwingEq"
    }
    fn internal_count(&self) -> usize {
        1
    }
    fn voltage_mass(&self) -> bool {
        true
    }
    fn internal_masses(&self) -> &[bool] {
        &[true]
    }
    fn residual(&self, u: Complex64, i: Complex64, x: &[f64], dx: &mut [f64]) -> Complex64 {
        let omega = x[0];
        let p = (u * i.conj()).re;
        dx[0] = (self.p - self.d * omega - p) * self.omega_h;
        u * J * omega
    }
    fn voltage_gauge(&self) -> Option<f64> {
        Some(self.v_nominal)
    }
    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Builds a node model from a bus-table row.
pub type NodeConstructor = Box<dyn Fn(&BusRow) -> Result<Arc<dyn NodeModel>> + Send + Sync>;

/// Maps bus-table type names to node constructors.
#[derive(Default)]
pub struct NodeRegistry {
    entries: BTreeMap<String, NodeConstructor>,
}

impl Debug for NodeRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}

/// Rated frequency assigned to machines loaded from a bus table.
pub const DEFAULT_RATED_FREQUENCY: f64 = 50.0;

fn required(row: &BusRow, field: &str, value: Option<f64>) -> Result<f64> {
    value.ok_or_else(|| {
        Error::Schema(format!(
            "bus {}: type {} requires field {field}",
            row.bus, row.kind
        ))
    })
}

fn swing_from_row(row: &BusRow) -> Result<Arc<dyn NodeModel>> {
    let p = required(row, "P", row.p)?;
    let d = required(row, "D", row.d)?;
    let h = required(row, "H", row.h)?;
    let node = SwingEq::new(h, p, d, DEFAULT_RATED_FREQUENCY)
        .map_err(|e| Error::Schema(format!("bus {}: {e}", row.bus)))?;
    Ok(Arc::new(node))
}

fn slack_from_row(row: &BusRow) -> Result<Arc<dyn NodeModel>> {
    let u = required(row, "U", row.u)?;
    Ok(Arc::new(SlackAlgebraic::new(Complex64::new(u, 0.0))))
}

fn load_from_row(row: &BusRow) -> Result<Arc<dyn NodeModel>> {
    let p = required(row, "P", row.p)?;
    let q = required(row, "Q", row.q)?;
    Ok(Arc::new(PQAlgebraic::new(Complex64::new(p, q))))
}

impl NodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with `Generator`, `SynComp`, `Slack` and `Load`.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.register("Generator", swing_from_row).unwrap();
        reg.register("SynComp", swing_from_row).unwrap();
        reg.register("Slack", slack_from_row).unwrap();
        reg.register("Load", load_from_row).unwrap();
        reg
    }

    pub fn register<F>(&mut self, name: &str, constructor: F) -> Result<()>
    where
        F: Fn(&BusRow) -> Result<Arc<dyn NodeModel>> + Send + Sync + 'static,
    {
        if self.entries.contains_key(name) {
            return Err(Error::DuplicateNodeType(name.to_string()));
        }
        self.entries.insert(name.to_string(), Box::new(constructor));
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn instantiate(&self, row: &BusRow) -> Result<Arc<dyn NodeModel>> {
        let ctor = self
            .entries
            .get(&row.kind)
            .ok_or_else(|| Error::UnknownNodeType(row.kind.clone()))?;
        ctor(row)
    }
}
