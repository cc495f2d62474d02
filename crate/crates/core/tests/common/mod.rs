//! Oracles shared by the integration tests. None of these go through the
//! Laplacian or residual code they are used to check.
#![allow(dead_code)]

use std::sync::Arc;

use gridwell::prelude::*;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Table I as (bus, type, U, P, Q, D, H), blanks as `None`.
pub type TableRow = (
    usize,
    &'static str,
    Option<f64>,
    Option<f64>,
    Option<f64>,
    Option<f64>,
    Option<f64>,
);

pub const TABLE_I: [TableRow; 14] = [
    (
        1,
        "Generator",
        None,
        Some(2.32),
        None,
        Some(2.0),
        Some(5.148),
    ),
    (2, "Slack", Some(1.0), None, None, None, None),
    (
        3,
        "SynComp",
        None,
        Some(-0.942),
        None,
        Some(2.0),
        Some(6.54),
    ),
    (4, "Load", None, Some(-0.478), Some(0.0), None, None),
    (5, "Load", None, Some(-0.076), Some(-0.016), None, None),
    (
        6,
        "SynComp",
        None,
        Some(-0.112),
        None,
        Some(2.0),
        Some(5.06),
    ),
    (7, "Load", None, Some(0.0), Some(0.0), None, None),
    (8, "SynComp", None, Some(0.0), None, Some(2.0), Some(5.06)),
    (9, "Load", None, Some(-0.295), Some(-0.166), None, None),
    (10, "Load", None, Some(-0.09), Some(-0.058), None, None),
    (11, "Load", None, Some(-0.035), Some(-0.018), None, None),
    (12, "Load", None, Some(-0.061), Some(-0.016), None, None),
    (13, "Load", None, Some(-0.135), Some(-0.058), None, None),
    (14, "Load", None, Some(-0.149), Some(-0.05), None, None),
];

/// Table II as (from, to, R, X).
pub const TABLE_II: [(usize, usize, f64, f64); 20] = [
    (1, 2, 0.01938, 0.05917),
    (1, 5, 0.05403, 0.22304),
    (2, 3, 0.04699, 0.19797),
    (2, 4, 0.05811, 0.17632),
    (2, 5, 0.05695, 0.17388),
    (3, 4, 0.06701, 0.17103),
    (4, 5, 0.01335, 0.04211),
    (4, 7, 0.0, 0.20912),
    (4, 9, 0.0, 0.55618),
    (5, 6, 0.0, 0.25202),
    (6, 11, 0.09498, 0.1989),
    (6, 12, 0.12291, 0.25581),
    (6, 13, 0.06615, 0.13027),
    (7, 8, 0.0, 0.17615),
    (7, 9, 0.0, 0.11001),
    (9, 10, 0.03181, 0.0845),
    (9, 14, 0.12711, 0.27038),
    (10, 11, 0.08205, 0.19207),
    (12, 13, 0.22092, 0.19988),
    (13, 14, 0.17093, 0.34802),
];

pub const SWING_BUSES: [usize; 4] = [1, 3, 6, 8];

pub fn ieee14() -> (GridModel, Vec<LineSpec>) {
    let nodes = load_bus_table(IEEE14_BUSES).unwrap();
    let lines = load_line_table(IEEE14_LINES).unwrap();
    let lap = build_admittance_laplacian(&lines, nodes.len()).unwrap();
    (assemble(nodes, lap).unwrap(), lines)
}

/// Bus currents summed line by line from raw (from, to, R, X) data.
pub fn raw_currents(lines: &[(usize, usize, f64, f64)], u: &[Complex64]) -> Vec<Complex64> {
    let mut i = vec![Complex64::new(0.0, 0.0); u.len()];
    for &(a, b, r, x) in lines {
        let flow = (u[a - 1] - u[b - 1]) / Complex64::new(r, x);
        i[a - 1] += flow;
        i[b - 1] -= flow;
    }
    i
}

/// Resistive losses Σ R·|i_line|².
pub fn raw_losses(lines: &[(usize, usize, f64, f64)], u: &[Complex64]) -> f64 {
    lines
        .iter()
        .map(|&(a, b, r, x)| r * ((u[a - 1] - u[b - 1]) / Complex64::new(r, x)).norm_sqr())
        .sum()
}

/// Swing machine (P = 0) behind a lossless line of reactance `x` to a unit slack.
pub struct Oscillator {
    pub h: f64,
    pub d: f64,
    pub omega_rated: f64,
    pub x: f64,
}

impl Oscillator {
    pub fn reference() -> Self {
        Self {
            h: 5.148,
            d: 0.1,
            omega_rated: 50.0,
            x: 0.1,
        }
    }

    pub fn model(&self) -> GridModel {
        let lap = build_admittance_laplacian(&[LineSpec::new(1, 2, 0.0, self.x)], 2).unwrap();
        let nodes: Vec<Arc<dyn NodeModel>> = vec![
            Arc::new(SlackAlgebraic::new(Complex64::new(1.0, 0.0))),
            Arc::new(SwingEq::new(self.h, 0.0, self.d, self.omega_rated).unwrap()),
        ];
        assemble(nodes, lap).unwrap()
    }

    /// Linearised about φ = 0: φ'' + cD φ' + (c/X) φ = 0 with c = 2πΩ/H.
    fn rates(&self) -> (f64, f64) {
        let c = 2.0 * std::f64::consts::PI * self.omega_rated / self.h;
        let alpha = c * self.d / 2.0;
        let beta = (c / self.x - alpha * alpha).sqrt();
        (alpha, beta)
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.rates().1
    }

    /// ω(t) for φ(0) = 0, ω(0) = ω0.
    pub fn omega(&self, omega0: f64, t: f64) -> f64 {
        let (alpha, beta) = self.rates();
        omega0 * (-alpha * t).exp() * ((beta * t).cos() - alpha / beta * (beta * t).sin())
    }
}

/// Connected random grid: a random spanning tree plus extra edges.
pub fn random_lines(rng: &mut StdRng, n: usize) -> Vec<LineSpec> {
    let mut lines = Vec::new();
    let mut pairs = std::collections::HashSet::new();
    for b in 2..=n {
        let a = rng.gen_range(1..b);
        pairs.insert((a, b));
        lines.push(LineSpec::new(
            a,
            b,
            rng.gen_range(0.0..0.2),
            rng.gen_range(0.01..0.5),
        ));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        let key = (a.min(b), a.max(b));
        if a != b && pairs.insert(key) {
            lines.push(LineSpec::new(
                a,
                b,
                rng.gen_range(0.0..0.2),
                rng.gen_range(0.01..0.5),
            ));
        }
    }
    lines
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}
