//! Columnar text formats and CSV rows.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma::{StepFunction, TimeGrid, Weight};
use crate::space::{Exponent, SpaceModel};

/// 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

/// Parses `# <kind> v1; k=v; ...` into its key-value pairs.
pub fn parse_header(line: &str, kind: &str) -> Result<HashMap<String, String>> {
    let body = match line.trim().strip_prefix('#') {
        Some(b) => b.trim(),
        None => return perr(1, "missing header line"),
    };
    let mut parts = body.split(';').map(str::trim);
    let first = parts.next().unwrap_or("");
    if first != format!("{kind} v1") {
        return perr(1, format!("expected '{kind} v1' header, found '{first}'"));
    }
    let mut out = HashMap::new();
    for p in parts.filter(|p| !p.is_empty()) {
        let Some((k, v)) = p.split_once('=') else {
            return perr(1, format!("malformed header field '{p}'"));
        };
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn header_field<T: std::str::FromStr>(h: &HashMap<String, String>, key: &str) -> Result<T> {
    match h.get(key) {
        Some(v) => v.parse().or_else(|_| perr(1, format!("bad value '{v}' for {key}"))),
        None => perr(1, format!("header lacks '{key}'")),
    }
}

fn parse_q(s: &str) -> Option<f64> {
    match s {
        "inf" | "infinity" => Some(f64::INFINITY),
        _ => s.parse().ok(),
    }
}

/// Numeric rows after the header, with 1-based line numbers.
pub fn data_rows(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for tok in l.split_whitespace() {
            match tok.parse::<f64>() {
                Ok(x) => row.push(x),
                Err(_) => return perr(i + 1, format!("not a number: '{tok}'")),
            }
        }
        out.push((i + 1, row));
    }
    Ok(out)
}

pub fn write_step(f: &StepFunction) -> String {
    let mut s = format!(
        "# gamma-step v1; dim={}; q={}; weight={}; m={}\n",
        f.dim(),
        f.space().exponent,
        f.grid().weight(),
        f.width()
    );
    for (i, (a, b)) in f.grid().intervals().enumerate() {
        s.push_str(&num(a));
        s.push(' ');
        s.push_str(&num(b));
        let v = f.value(i);
        for r in 0..v.nrows() {
            for c in 0..v.ncols() {
                let _ = write!(s, " {}", num(v[(r, c)]));
            }
        }
        s.push('\n');
    }
    s
}

pub fn read_step(text: &str) -> Result<StepFunction> {
    let h = parse_header(text.lines().next().unwrap_or(""), "gamma-step")?;
    let dim: usize = header_field(&h, "dim")?;
    let q = h.get("q").and_then(|s| parse_q(s)).ok_or(Error::Parse { line: 1, msg: "bad or missing q".into() })?;
    let weight = match h.get("weight") {
        Some(w) => Weight::parse(w).ok_or(Error::Parse { line: 1, msg: format!("unknown weight '{w}'") })?,
        None => Weight::Lebesgue,
    };
    let m: usize = if h.contains_key("m") { header_field(&h, "m")? } else { 1 };
    let space = SpaceModel::new(dim, q).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    let rows = data_rows(text)?;
    if rows.is_empty() {
        return perr(1, "no intervals");
    }
    let mut knots = Vec::with_capacity(rows.len() + 1);
    let mut values = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        if row.len() != 2 + dim * m {
            return perr(*line, format!("expected {} columns, found {}", 2 + dim * m, row.len()));
        }
        match knots.last() {
            None => knots.push(row[0]),
            Some(&last) if last != row[0] => return perr(*line, "interval does not start at previous end"),
            _ => {}
        }
        knots.push(row[1]);
        values.push(DMatrix::from_row_slice(dim, m, &row[2..]));
    }
    let grid = TimeGrid::new(knots, weight).map_err(|e| Error::Parse { line: rows[0].0, msg: e.to_string() })?;
    StepFunction::new(grid, values, space).map_err(|e| Error::Parse { line: rows[0].0, msg: e.to_string() })
}

pub fn write_matrix(a: &DMatrix<f64>) -> String {
    let mut s = format!("# sect-op v1; dim={}\n", a.nrows());
    for r in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|c| num(a[(r, c)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn read_matrix(text: &str) -> Result<DMatrix<f64>> {
    let h = parse_header(text.lines().next().unwrap_or(""), "sect-op")?;
    let dim: usize = header_field(&h, "dim")?;
    let rows = data_rows(text)?;
    if rows.len() != dim {
        return perr(rows.last().map_or(1, |r| r.0), format!("expected {dim} rows, found {}", rows.len()));
    }
    let mut flat = Vec::with_capacity(dim * dim);
    for (line, row) in &rows {
        if row.len() != dim {
            return perr(*line, format!("expected {dim} columns, found {}", row.len()));
        }
        flat.extend_from_slice(row);
    }
    Ok(DMatrix::from_row_slice(dim, dim, &flat))
}

/// One result row: `op, dim, q, theta, seed, value, bound, margin`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub op: String,
    pub dim: usize,
    pub q: f64,
    pub theta: f64,
    pub seed: u64,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
}

pub const CSV_HEADER: &str = "op,dim,q,theta,seed,value,bound,margin";

impl CsvRow {
    pub fn new(op: &str, dim: usize, q: Exponent, theta: f64, seed: u64, value: f64, bound: f64) -> Self {
        CsvRow { op: op.into(), dim, q: q.as_f64(), theta, seed, value, bound, margin: bound - value }
    }

    pub fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.op,
            self.dim,
            num(self.q),
            num(self.theta),
            self.seed,
            num(self.value),
            num(self.bound),
            num(self.margin)
        )
    }
}

pub fn write_csv(header: &str, lines: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for l in lines {
        s.push_str(&l);
        s.push('\n');
    }
    s
}
