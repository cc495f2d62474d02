//! Transient dynamics of power grids.
//!
//! A grid is a list of bus models coupled through an admittance Laplacian `LY`.
//! Bus currents are `i = LY · u`, and each bus contributes
//!
//! ```text
//! m_u · du/dt = f(u, x, i)
//! m_x · dx/dt = g(u, x, i)
//! ```
//!
//! with binary masses. The crate finds operation points by Newton's method,
//! integrates the resulting DAE with implicit Euler or the trapezoidal rule, and
//! runs frequency-perturbation and line-tripping experiments on top.
//!
//! ```no_run
//! use gridwell::prelude::*;
//!
//! let nodes = load_bus_table(IEEE14_BUSES)?;
//! let lines = load_line_table(IEEE14_LINES)?;
//! let model = assemble(nodes, build_admittance_laplacian(&lines, 14)?)?;
//! let opts = SolverOptions::default();
//! let fp = operation_point(&model, &model.ones(), &opts)?;
//! let traj = run_line_tripping(&model, &lines, &fp, 2, (0.0, 5.0), &opts)?;
//! let derived = derived_series(&traj);
//! println!("{:.4} Hz", derived.max_frequency_deviation_hz(&traj.times));
//! # Ok::<(), gridwell::Error>(())
//! ```

pub mod assembly;
pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod nodes;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::assembly::{assemble, GridModel, Selector, StateValue, StateVector};
    pub use crate::error::{Error, Result};
    pub use crate::grid::{
        build_admittance_laplacian, node_currents, remove_line, AdmittanceLaplacian, LineSpec,
    };
    pub use crate::io::{
        load_bus_table, load_line_table, write_timeseries, IEEE14_BUSES, IEEE14_LINES,
    };
    pub use crate::nodes::{NodeModel, NodeRegistry, PQAlgebraic, SlackAlgebraic, SwingEq};
    pub use crate::scenarios::{
        derived_series, run_frequency_perturbation, run_line_tripping, DerivedSeries, ScenarioKind,
        ScenarioSpec,
    };
    pub use crate::solver::{
        integrate, jacobian, operation_point, Method, SolverOptions, Trajectory,
    };
}
