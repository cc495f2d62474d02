//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 input schema, 3 operation-point failure,
//! 4 integration failure.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::assembly::{assemble, GridModel, StateVector};
use crate::error::Error;
use crate::grid::{build_admittance_laplacian, connected_components, LineSpec};
use crate::io::{self, load_bus_table, load_line_table, write_timeseries};
use crate::scenarios::{derived_series, DerivedSeries, ScenarioKind, ScenarioSpec};
use crate::solver::{operation_point, Method, SolverOptions, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_OPERATION_POINT: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;

/// Environment variable naming a directory with `ieee14_buses.csv` and `ieee14_lines.csv`.
pub const DATA_ENV: &str = "GRIDWELL_DATA";

#[derive(Debug, Parser)]
#[command(name = "gridwell", version, about = "Power-grid transient dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GridArgs {
    /// Bus table CSV (defaults to the bundled IEEE 14-bus data).
    #[arg(long)]
    pub buses: Option<PathBuf>,
    /// Line table CSV (defaults to the bundled IEEE 14-bus data).
    #[arg(long)]
    pub lines: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    FreqPerturb,
    LineTrip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Trapezoidal,
    ImplicitEuler,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Trapezoidal => Method::Trapezoidal,
            MethodArg::ImplicitEuler => Method::ImplicitEuler,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the operation point and write it as a one-timestep CSV.
    Operationpoint {
        #[command(flatten)]
        grid: GridArgs,
        /// Output path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find the operation point, run a fault scenario and write the time series.
    Simulate {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Bus (freq-perturb) or line number (line-trip).
        #[arg(long)]
        target: usize,
        /// Frequency perturbation in rad/s (freq-perturb only, default 0.2).
        #[arg(long, allow_negative_numbers = true)]
        delta: Option<f64>,
        #[arg(long = "t-end")]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Trapezoidal)]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG of p(t) and ω(t) per bus.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn read_table(
    path: Option<&Path>,
    file_name: &str,
    bundled: &'static str,
) -> std::result::Result<String, Failure> {
    let path = match path {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(DATA_ENV).map(|dir| PathBuf::from(dir).join(file_name)),
    };
    match path {
        Some(p) => fs::read_to_string(&p)
            .map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", p.display()))),
        None => Ok(bundled.to_string()),
    }
}

fn load_grid(
    args: &GridArgs,
    err: &mut dyn Write,
) -> std::result::Result<(GridModel, Vec<LineSpec>), Failure> {
    let schema = |e: Error| Failure::new(EXIT_SCHEMA, e.to_string());
    let buses = read_table(args.buses.as_deref(), io::BUS_FILE_NAME, io::IEEE14_BUSES)?;
    let lines = read_table(args.lines.as_deref(), io::LINE_FILE_NAME, io::IEEE14_LINES)?;
    let nodes = load_bus_table(&buses).map_err(schema)?;
    let lines = load_line_table(&lines).map_err(schema)?;
    let n = nodes.len();
    let lap = build_admittance_laplacian(&lines, n).map_err(schema)?;
    let components = connected_components(&lines, n);
    if components > 1 {
        let _ = writeln!(
            err,
            "warning: grid has {components} disconnected components"
        );
    }
    let model = assemble(nodes, lap).map_err(schema)?;
    Ok((model, lines))
}

fn solve_operation_point(
    model: &GridModel,
    opts: &SolverOptions,
) -> std::result::Result<StateVector, Failure> {
    operation_point(model, &model.ones(), opts)
        .map_err(|e| Failure::new(EXIT_OPERATION_POINT, format!("operation point failed: {e}")))
}

fn open_sink<'a>(
    path: Option<&Path>,
    stdout: &'a mut dyn Write,
) -> std::result::Result<Box<dyn Write + 'a>, Failure> {
    match path {
        Some(p) => fs::File::create(p)
            .map(|f| Box::new(std::io::BufWriter::new(f)) as Box<dyn Write + 'a>)
            .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", p.display()))),
        None => Ok(Box::new(stdout)),
    }
}

fn cmd_operationpoint(
    grid: &GridArgs,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let (model, _) = load_grid(grid, err)?;
    let fp = solve_operation_point(&model, &SolverOptions::default())?;
    let traj = Trajectory {
        times: vec![0.0],
        states: vec![fp],
        model,
    };
    let derived = derived_series(&traj);
    let sink = open_sink(out, stdout)?;
    write_timeseries(&traj, &derived, sink).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    grid: &GridArgs,
    scenario: ScenarioArg,
    target: usize,
    delta: Option<f64>,
    t_end: f64,
    h: f64,
    method: MethodArg,
    out: &Path,
    plot: Option<&Path>,
    stdout: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let kind = match (scenario, delta) {
        (ScenarioArg::LineTrip, Some(_)) => {
            return Err(Failure::new(
                EXIT_USAGE,
                "--delta is only valid with --scenario freq-perturb",
            ))
        }
        (ScenarioArg::LineTrip, None) => ScenarioKind::LineTripping { line: target },
        (ScenarioArg::FreqPerturb, d) => ScenarioKind::FrequencyPerturbation {
            bus: target,
            delta: d.unwrap_or(0.2),
        },
    };
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Failure::new(EXIT_USAGE, "--t-end must be positive"));
    }
    let opts = SolverOptions::default()
        .with_step(h)
        .with_method(method.into());
    opts.validate()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;

    let (model, lines) = load_grid(grid, err)?;
    let fp = solve_operation_point(&model, &opts)?;
    let spec = ScenarioSpec {
        kind,
        t_span: (0.0, t_end),
    };
    let traj = spec.run(&model, &lines, &fp, &opts).map_err(|e| match e {
        Error::Integration { .. }
        | Error::NoConvergence { .. }
        | Error::SingularJacobian
        | Error::Inconsistent(_) => Failure::new(EXIT_INTEGRATION, e.to_string()),
        other => Failure::new(EXIT_USAGE, other.to_string()),
    })?;
    let derived = derived_series(&traj);
    let sink = open_sink(Some(out), stdout)?;
    write_timeseries(&traj, &derived, sink).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    if let Some(p) = plot {
        fs::write(p, render_svg(&traj.times, &derived))
            .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", p.display())))?;
    }
    let max_omega = derived.max_abs_omega(&traj.times, f64::NEG_INFINITY);
    let _ = writeln!(
        stdout,
        "max_abs_omega={max_omega:.6} rad/s, max_freq_dev={:.6} Hz",
        max_omega / (2.0 * PI)
    );
    Ok(())
}

const PALETTE: [&str; 7] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#17becf",
];

fn polyline_panel(
    svg: &mut String,
    times: &[f64],
    series: &[(usize, &[f64])],
    y0: f64,
    height: f64,
    label: &str,
) {
    let (width, left) = (760.0, 60.0);
    let t_min = times.first().copied().unwrap_or(0.0);
    let t_max = times
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(t_min + f64::EPSILON);
    let (mut lo, mut hi) = series
        .iter()
        .flat_map(|(_, s)| s.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{y0}" width="{width}" height="{height}" fill="none" stroke="#888"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12">{label} [{lo:.4}, {hi:.4}]</text>"#,
        left,
        y0 - 4.0
    );
    for (bus, s) in series {
        let pts: Vec<String> = times
            .iter()
            .zip(s.iter())
            .map(|(&t, &v)| {
                let px = left + (t - t_min) / (t_max - t_min) * width;
                let py = y0 + height - (v - lo) / (hi - lo) * height;
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"><title>bus {}</title></polyline>"#,
            PALETTE[(bus - 1) % PALETTE.len()],
            pts.join(" "),
            bus
        );
    }
}

/// Two stacked panels: p(t) for every bus and ω(t) for buses that have it.
pub fn render_svg(times: &[f64], derived: &DerivedSeries) -> String {
    let mut svg = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" height=\"640\" font-family=\"sans-serif\">\n",
    );
    let p: Vec<(usize, &[f64])> = derived
        .buses
        .iter()
        .enumerate()
        .map(|(k, b)| (k + 1, b.p.as_slice()))
        .collect();
    let w: Vec<(usize, &[f64])> = derived
        .buses
        .iter()
        .enumerate()
        .filter_map(|(k, b)| b.omega.as_deref().map(|w| (k + 1, w)))
        .collect();
    polyline_panel(&mut svg, times, &p, 30.0, 260.0, "p [p.u.]");
    polyline_panel(&mut svg, times, &w, 350.0, 260.0, "omega [rad/s]");
    svg.push_str("</svg>\n");
    svg
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Operationpoint { grid, out } => {
            cmd_operationpoint(grid, out.as_deref(), stdout, stderr)
        }
        Command::Simulate {
            grid,
            scenario,
            target,
            delta,
            t_end,
            h,
            method,
            out,
            plot,
        } => cmd_simulate(
            grid,
            *scenario,
            *target,
            *delta,
            *t_end,
            *h,
            *method,
            out,
            plot.as_deref(),
            stdout,
            stderr,
        ),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
