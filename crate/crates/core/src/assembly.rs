//! Flattening a node list and a Laplacian into one residual system `M·ẋ = F(x)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::AdmittanceLaplacian;
use crate::nodes::NodeModel;

/// Flat real state: per bus `[Re u, Im u, internals...]`, buses in order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Reusable buffers for repeated residual evaluation.
#[derive(Debug, Default, Clone)]
pub(crate) struct ResidualScratch {
    u: Vec<Complex64>,
    i: Vec<Complex64>,
}

/// Which part of a bus's state block to address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// The complex voltage.
    Voltage,
    /// The k-th internal variable, 1-based.
    Internal(usize),
}

impl Selector {
    /// Parses `"u"` or `"int"` (with a 1-based `k` for the latter).
    pub fn parse(name: &str, k: Option<usize>) -> Result<Self> {
        match (name, k) {
            ("u", None) => Ok(Selector::Voltage),
            ("int", Some(k)) => Ok(Selector::Internal(k)),
            ("int", None) => Err(Error::Selector("`int` needs an index".into())),
            ("u", Some(_)) => Err(Error::Selector("`u` takes no index".into())),
            (other, _) => Err(Error::Selector(format!("unknown selector `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateValue {
    Complex(Complex64),
    Real(f64),
}

/// Node list, Laplacian and the derived flat state layout.
#[derive(Debug, Clone)]
pub struct GridModel {
    nodes: Vec<Arc<dyn NodeModel>>,
    laplacian: AdmittanceLaplacian,
    offsets: Vec<usize>,
    mass: Vec<f64>,
    dim: usize,
}

pub fn assemble(
    nodes: Vec<Arc<dyn NodeModel>>,
    laplacian: AdmittanceLaplacian,
) -> Result<GridModel> {
    if nodes.is_empty() || nodes.len() != laplacian.n() {
        return Err(Error::Dimension {
            expected: laplacian.n(),
            actual: nodes.len(),
        });
    }
    let mut offsets = Vec::with_capacity(nodes.len());
    let mut mass = Vec::new();
    for node in &nodes {
        if node.internal_masses().len() != node.internal_count() {
            return Err(Error::Parameter(format!(
                "{}: {} internal masses for {} internal variables",
                node.type_name(),
                node.internal_masses().len(),
                node.internal_count()
            )));
        }
        offsets.push(mass.len());
        let mu = if node.voltage_mass() { 1.0 } else { 0.0 };
        mass.extend([mu, mu]);
        mass.extend(
            node.internal_masses()
                .iter()
                .map(|&m| if m { 1.0 } else { 0.0 }),
        );
    }
    let dim = mass.len();
    Ok(GridModel {
        nodes,
        laplacian,
        offsets,
        mass,
        dim,
    })
}

impl GridModel {
    pub fn system_size(&self) -> usize {
        self.dim
    }

    pub fn bus_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Arc<dyn NodeModel>] {
        &self.nodes
    }

    /// Node at 1-based `bus`.
    pub fn node(&self, bus: usize) -> Result<&Arc<dyn NodeModel>> {
        self.check_bus(bus)?;
        Ok(&self.nodes[bus - 1])
    }

    pub fn laplacian(&self) -> &AdmittanceLaplacian {
        &self.laplacian
    }

    /// Same nodes over a different network.
    pub fn with_laplacian(&self, laplacian: AdmittanceLaplacian) -> Result<GridModel> {
        assemble(self.nodes.clone(), laplacian)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// 0-based offset of each bus block in the flat state.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// All-ones state, the default Newton start.
    pub fn ones(&self) -> StateVector {
        StateVector(vec![1.0; self.dim])
    }

    fn check_bus(&self, bus: usize) -> Result<()> {
        if bus == 0 || bus > self.nodes.len() {
            return Err(Error::Selector(format!(
                "bus {bus} out of range 1..={}",
                self.nodes.len()
            )));
        }
        Ok(())
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn slot(&self, bus: usize, sel: Selector) -> Result<usize> {
        self.check_bus(bus)?;
        let off = self.offsets[bus - 1];
        match sel {
            Selector::Voltage => Ok(off),
            Selector::Internal(k) => {
                let count = self.nodes[bus - 1].internal_count();
                if k == 0 || k > count {
                    return Err(Error::Selector(format!(
                        "bus {bus} has {count} internal variables, asked for {k}"
                    )));
                }
                Ok(off + 1 + k)
            }
        }
    }

    pub fn state_get(&self, x: &StateVector, bus: usize, sel: Selector) -> Result<StateValue> {
        self.check_len(&x.0)?;
        let at = self.slot(bus, sel)?;
        Ok(match sel {
            Selector::Voltage => StateValue::Complex(Complex64::new(x.0[at], x.0[at + 1])),
            Selector::Internal(_) => StateValue::Real(x.0[at]),
        })
    }

    pub fn state_set(
        &self,
        x: &mut StateVector,
        bus: usize,
        sel: Selector,
        value: StateValue,
    ) -> Result<()> {
        self.check_len(&x.0)?;
        let at = self.slot(bus, sel)?;
        match (sel, value) {
            (Selector::Voltage, StateValue::Complex(u)) => {
                x.0[at] = u.re;
                x.0[at + 1] = u.im;
            }
            (Selector::Internal(_), StateValue::Real(v)) => x.0[at] = v,
            _ => return Err(Error::Selector("value kind does not match selector".into())),
        }
        Ok(())
    }

    pub fn voltage(&self, x: &StateVector, bus: usize) -> Result<Complex64> {
        match self.state_get(x, bus, Selector::Voltage)? {
            StateValue::Complex(u) => Ok(u),
            StateValue::Real(_) => unreachable!(),
        }
    }

    pub fn internal(&self, x: &StateVector, bus: usize, k: usize) -> Result<f64> {
        match self.state_get(x, bus, Selector::Internal(k))? {
            StateValue::Real(v) => Ok(v),
            StateValue::Complex(_) => unreachable!(),
        }
    }

    pub fn set_internal(
        &self,
        x: &mut StateVector,
        bus: usize,
        k: usize,
        value: f64,
    ) -> Result<()> {
        self.state_set(x, bus, Selector::Internal(k), StateValue::Real(value))
    }

    /// Complex voltages of all buses.
    pub fn voltages(&self, x: &[f64]) -> Vec<Complex64> {
        self.offsets
            .iter()
            .map(|&o| Complex64::new(x[o], x[o + 1]))
            .collect()
    }

    /// Bus currents `LY · u` for a flat state.
    pub fn currents(&self, x: &[f64]) -> Vec<Complex64> {
        let u = self.voltages(x);
        let mut i = vec![Complex64::new(0.0, 0.0); u.len()];
        self.laplacian.currents_into(&u, &mut i);
        i
    }

    /// `F(x)`, checked for length and finiteness.
    pub fn full_residual(&self, x: &StateVector) -> Result<Vec<f64>> {
        self.check_len(&x.0)?;
        if let Some(k) = x.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        let mut out = vec![0.0; self.dim];
        self.residual_into(&x.0, &mut out);
        Ok(out)
    }

    /// Unchecked `F(x)` into `out`.
    pub(crate) fn residual_into(&self, x: &[f64], out: &mut [f64]) {
        self.residual_with(x, &mut ResidualScratch::default(), out);
    }

    /// Unchecked `F(x)` into `out`, reusing `scratch` for voltages and currents.
    pub(crate) fn residual_with(&self, x: &[f64], scratch: &mut ResidualScratch, out: &mut [f64]) {
        let n = self.nodes.len();
        let ResidualScratch { u, i } = scratch;
        u.clear();
        u.extend(self.offsets.iter().map(|&o| Complex64::new(x[o], x[o + 1])));
        i.resize(n, Complex64::new(0.0, 0.0));
        self.laplacian.currents_into(u, i);
        for bus in 0..n {
            self.node_block(bus, u, i, x, out);
        }
    }

    #[cfg(test)]
    fn residual_in_order(&self, x: &[f64], order: &[usize]) -> Vec<f64> {
        let u = self.voltages(x);
        let i = self.currents(x);
        let mut out = vec![0.0; self.dim];
        for &bus in order {
            self.node_block(bus, &u, &i, x, &mut out);
        }
        out
    }

    fn node_block(&self, bus: usize, u: &[Complex64], i: &[Complex64], x: &[f64], out: &mut [f64]) {
        let node = &self.nodes[bus];
        let off = self.offsets[bus];
        let n_int = node.internal_count();
        let (head, tail) = out[off..off + 2 + n_int].split_at_mut(2);
        let du = node.residual(u[bus], i[bus], &x[off + 2..off + 2 + n_int], tail);
        head[0] = du.re;
        head[1] = du.im;
    }
}
