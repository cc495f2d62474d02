//! Line lists and the admittance Laplacian.
//!
//! Every line is a pure series admittance `Y = 1/(R + jX)`. The Laplacian is
//! `LY[a][b] = δ_ab Σ_c Y[a][c] − Y[a][b]`, so rows and columns sum to zero and
//! bus currents follow from `i = LY · u`.

use std::collections::HashSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use petgraph::graph::UnGraph;

use crate::error::{Error, Result};

/// A transmission line between two buses (1-based indices), in p.u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSpec {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

impl LineSpec {
    pub fn new(from: usize, to: usize, r: f64, x: f64) -> Self {
        Self { from, to, r, x }
    }

    pub fn admittance(&self) -> Complex64 {
        Complex64::new(self.r, self.x).inv()
    }

    fn validate(&self, n: usize) -> Result<()> {
        let (from, to) = (self.from, self.to);
        if from == 0 || to == 0 || from > n || to > n {
            return Err(Error::Topology { from, to, n });
        }
        if from == to {
            return Err(Error::SelfLoop { from, to });
        }
        if !(self.r.is_finite() && self.x.is_finite()) || self.r < 0.0 {
            return Err(Error::InvalidLine { from, to });
        }
        if self.r == 0.0 && self.x == 0.0 {
            return Err(Error::SingularLine { from, to });
        }
        Ok(())
    }
}

/// Dense complex admittance Laplacian over `n` buses.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceLaplacian {
    entries: DMatrix<Complex64>,
}

impl AdmittanceLaplacian {
    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Entry at 1-based `(a, b)`.
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.entries[(a - 1, b - 1)]
    }

    /// `i = LY · u` into a caller-owned buffer. Lengths are not checked.
    pub(crate) fn currents_into(&self, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.n();
        out[..n].fill(Complex64::new(0.0, 0.0));
        if n == 0 {
            return;
        }
        // column-major storage
        for (col, ub) in self.entries.as_slice().chunks_exact(n).zip(u) {
            for (slot, y) in out.iter_mut().zip(col) {
                *slot += y * ub;
            }
        }
    }
}

/// Builds LY from a line list over `n` buses.
pub fn build_admittance_laplacian(lines: &[LineSpec], n: usize) -> Result<AdmittanceLaplacian> {
    let mut seen = HashSet::with_capacity(lines.len());
    let mut lap = AdmittanceLaplacian::zeros(n);
    for line in lines {
        line.validate(n)?;
        let key = (line.from.min(line.to), line.from.max(line.to));
        if !seen.insert(key) {
            return Err(Error::DuplicateLine(key.0, key.1));
        }
        let y = line.admittance();
        let (a, b) = (line.from - 1, line.to - 1);
        let m = &mut lap.entries;
        m[(a, b)] -= y;
        m[(b, a)] -= y;
        m[(a, a)] += y;
        m[(b, b)] += y;
    }
    Ok(lap)
}

/// Returns `lines` without the line numbered `index` (1-based, table order).
pub fn remove_line(lines: &[LineSpec], index: usize) -> Result<Vec<LineSpec>> {
    if index == 0 || index > lines.len() {
        return Err(Error::LineIndex {
            index,
            count: lines.len(),
        });
    }
    let mut out = lines.to_vec();
    out.remove(index - 1);
    Ok(out)
}

/// Complex bus currents `i = LY · u`.
pub fn node_currents(lap: &AdmittanceLaplacian, u: &[Complex64]) -> Result<Vec<Complex64>> {
    if u.len() != lap.n() {
        return Err(Error::Dimension {
            expected: lap.n(),
            actual: u.len(),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    lap.currents_into(u, &mut out);
    Ok(out)
}

/// Number of connected components of the bus graph induced by `lines`.
pub fn connected_components(lines: &[LineSpec], n: usize) -> usize {
    let mut graph = UnGraph::<(), ()>::with_capacity(n, lines.len());
    let idx: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for l in lines {
        if (1..=n).contains(&l.from) && (1..=n).contains(&l.to) {
            graph.add_edge(idx[l.from - 1], idx[l.to - 1], ());
        }
    }
    petgraph::algo::connected_components(&graph)
}

/// Errors unless the bus graph is a single component.
pub fn ensure_connected(lines: &[LineSpec], n: usize) -> Result<()> {
    match connected_components(lines, n) {
        1 => Ok(()),
        components => Err(Error::Disconnected { components }),
    }
}
