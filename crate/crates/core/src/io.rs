//! CSV bus and line tables, the bundled IEEE 14-bus dataset, and time-series output.
//!
//! Bus table header: `bus,type,U,P,Q,D,H` (blank cell = absent).
//! Line table header: `line,from,to,R,X`.
//! Time-series header: `t,bus,re_u,im_u,v,phi,p,q,omega`.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::LineSpec;
use crate::nodes::{NodeModel, NodeRegistry};
use crate::scenarios::DerivedSeries;
use crate::solver::Trajectory;

pub const BUS_HEADER: [&str; 7] = ["bus", "type", "U", "P", "Q", "D", "H"];
pub const LINE_HEADER: [&str; 5] = ["line", "from", "to", "R", "X"];
pub const TIMESERIES_HEADER: &str = "t,bus,re_u,im_u,v,phi,p,q,omega";

pub const IEEE14_BUSES: &str = include_str!("../data/ieee14_buses.csv");
pub const IEEE14_LINES: &str = include_str!("../data/ieee14_lines.csv");

pub const BUS_FILE_NAME: &str = "ieee14_buses.csv";
pub const LINE_FILE_NAME: &str = "ieee14_lines.csv";

/// One row of the bus table.
#[derive(Debug, Clone, PartialEq)]
pub struct BusRow {
    pub bus: usize,
    pub kind: String,
    pub u: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub d: Option<f64>,
    pub h: Option<f64>,
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?;
    let ok = header.len() == expected.len() && header.iter().zip(expected).all(|(a, b)| a == *b);
    if !ok {
        return Err(Error::Schema(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn records(rdr: &mut csv::Reader<&[u8]>) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Schema(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_decimal(cell: &str, line: u64, field: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| {
        Error::Schema(format!(
            "line {line}: malformed decimal `{cell}` in {field}"
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::Schema(format!("line {line}: non-finite {field}")));
    }
    Ok(v)
}

fn parse_optional(cell: &str, line: u64, field: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        Ok(None)
    } else {
        parse_decimal(cell, line, field).map(Some)
    }
}

fn parse_index(cell: &str, line: u64, field: &str) -> Result<usize> {
    match cell.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(Error::Schema(format!("line {line}: bad {field} `{cell}`"))),
    }
}

/// Parses bus rows, ordered by bus id. Ids must be exactly `1..=n`.
pub fn parse_bus_rows(text: &str) -> Result<Vec<BusRow>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &BUS_HEADER)?;
    let mut rows = Vec::new();
    for (line, rec) in records(&mut rdr)? {
        if rec.len() != BUS_HEADER.len() {
            return Err(Error::Schema(format!(
                "line {line}: expected 7 fields, got {}",
                rec.len()
            )));
        }
        rows.push(BusRow {
            bus: parse_index(&rec[0], line, "bus")?,
            kind: rec[1].to_string(),
            u: parse_optional(&rec[2], line, "U")?,
            p: parse_optional(&rec[3], line, "P")?,
            q: parse_optional(&rec[4], line, "Q")?,
            d: parse_optional(&rec[5], line, "D")?,
            h: parse_optional(&rec[6], line, "H")?,
        });
    }
    rows.sort_by_key(|r| r.bus);
    for (k, row) in rows.iter().enumerate() {
        if row.bus != k + 1 {
            let what = if k > 0 && rows[k - 1].bus == row.bus {
                format!("duplicate bus id {}", row.bus)
            } else {
                format!("missing bus id {}", k + 1)
            };
            return Err(Error::Schema(what));
        }
    }
    if rows.is_empty() {
        return Err(Error::Schema("bus table has no rows".into()));
    }
    Ok(rows)
}

/// Bus table to node models with the built-in types.
pub fn load_bus_table(text: &str) -> Result<Vec<Arc<dyn NodeModel>>> {
    load_bus_table_with(&NodeRegistry::builtin(), text)
}

pub fn load_bus_table_with(registry: &NodeRegistry, text: &str) -> Result<Vec<Arc<dyn NodeModel>>> {
    parse_bus_rows(text)?
        .iter()
        .map(|row| registry.instantiate(row))
        .collect()
}

/// Line table in table order. Line numbers must run `1, 2, ...`.
pub fn load_line_table(text: &str) -> Result<Vec<LineSpec>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &LINE_HEADER)?;
    let mut lines = Vec::new();
    for (line, rec) in records(&mut rdr)? {
        if rec.len() != LINE_HEADER.len() {
            return Err(Error::Schema(format!(
                "line {line}: expected 5 fields, got {}",
                rec.len()
            )));
        }
        let number = parse_index(&rec[0], line, "line number")?;
        if number != lines.len() + 1 {
            return Err(Error::Schema(format!(
                "line {line}: line number {number}, expected {}",
                lines.len() + 1
            )));
        }
        let from = parse_index(&rec[1], line, "from")?;
        let to = parse_index(&rec[2], line, "to")?;
        if from == to {
            return Err(Error::Schema(format!(
                "line {line}: from and to are both bus {from}"
            )));
        }
        let r = parse_decimal(&rec[3], line, "R")?;
        let x = parse_decimal(&rec[4], line, "X")?;
        if r < 0.0 {
            return Err(Error::Schema(format!("line {line}: negative resistance")));
        }
        if r == 0.0 && x == 0.0 {
            return Err(Error::Schema(format!("line {line}: zero impedance")));
        }
        lines.push(LineSpec::new(from, to, r, x));
    }
    Ok(lines)
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn write_bus_table(rows: &[BusRow]) -> String {
    let mut out = BUS_HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.bus,
            r.kind,
            fmt_opt(r.u),
            fmt_opt(r.p),
            fmt_opt(r.q),
            fmt_opt(r.d),
            fmt_opt(r.h)
        ));
    }
    out
}

pub fn write_line_table(lines: &[LineSpec]) -> String {
    let mut out = LINE_HEADER.join(",");
    out.push('\n');
    for (k, l) in lines.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            k + 1,
            l.from,
            l.to,
            fmt_num(l.r),
            fmt_num(l.x)
        ));
    }
    out
}

/// Writes one row per (time, bus), time-major. `omega` is blank for buses without it.
pub fn write_timeseries<W: Write>(
    trajectory: &Trajectory,
    derived: &DerivedSeries,
    mut sink: W,
) -> Result<()> {
    writeln!(sink, "{TIMESERIES_HEADER}")?;
    let offsets = trajectory.model.offsets();
    for (n, (t, state)) in trajectory.times.iter().zip(&trajectory.states).enumerate() {
        for (bus, series) in derived.buses.iter().enumerate() {
            let o = offsets[bus];
            let omega = series
                .omega
                .as_ref()
                .map(|w| fmt_num(w[n]))
                .unwrap_or_default();
            writeln!(
                sink,
                "{},{},{},{},{},{},{},{},{}",
                fmt_num(*t),
                bus + 1,
                fmt_num(state.0[o]),
                fmt_num(state.0[o + 1]),
                fmt_num(series.v[n]),
                fmt_num(series.phi[n]),
                fmt_num(series.p[n]),
                fmt_num(series.q[n]),
                omega
            )?;
        }
    }
    sink.flush()?;
    Ok(())
}
