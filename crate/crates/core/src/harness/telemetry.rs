//! Telemetry rows and their CSV encoding.

use std::io::{Read, Write};

use thiserror::Error;

use crate::agent::AgentId;
use crate::so3::Vec3;

pub const HEADER: [&str; 11] = ["t", "id", "x", "y", "z", "xd", "yd", "zd", "phi", "omega_zdi", "flags"];

/// Significant digits for every float column.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Per-row condition bits.
pub mod flags {
    /// Phase could not be read (agent on the embedding axis).
    pub const DEGENERATE: u8 = 1;
    /// Agent shares its phase with a neighbor.
    pub const COINCIDENT: u8 = 2;
    /// A deformation expression produced a non-finite value.
    pub const EVALUATION: u8 = 4;
    /// Agent is ahead of its lead in phase.
    pub const OVERTAKE: u8 = 8;
    /// First row of an agent added by an event.
    pub const INSERTED: u8 = 16;
}

/// One agent at one tick. `x` is the plant position at `t`; `x_d` the target
/// issued at that tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub id: AgentId,
    pub x: Vec3,
    pub x_d: Vec3,
    pub phi: f64,
    pub omega_zdi: f64,
    pub flags: u8,
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("telemetry header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: bad value `{value}` in column `{column}`")]
    Value { line: u64, column: &'static str, value: String },
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_g(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub struct TelemetryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TelemetryWriter<W> {
    pub fn new(w: W) -> Result<Self, TelemetryError> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        inner.write_record(HEADER)?;
        Ok(TelemetryWriter { inner })
    }

    pub fn write(&mut self, r: &TelemetryRecord) -> Result<(), TelemetryError> {
        let g = |v: f64| format_g(v, SIGNIFICANT_DIGITS);
        self.inner.write_record([
            g(r.t),
            r.id.to_string(),
            g(r.x.x),
            g(r.x.y),
            g(r.x.z),
            g(r.x_d.x),
            g(r.x_d.y),
            g(r.x_d.z),
            g(r.phi),
            g(r.omega_zdi),
            r.flags.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(self) -> Result<W, TelemetryError> {
        self.inner.into_inner().map_err(|e| TelemetryError::Io(e.into_error()))
    }
}

pub fn write_csv<W: Write>(w: W, records: &[TelemetryRecord]) -> Result<W, TelemetryError> {
    let mut tw = TelemetryWriter::new(w)?;
    for r in records {
        tw.write(r)?;
    }
    tw.finish()
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<TelemetryRecord>, TelemetryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != HEADER {
        return Err(TelemetryError::Header { expected: HEADER.join(","), found: found.join(",") });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64, TelemetryError> {
            let s = row.get(i).unwrap_or("");
            s.trim().parse::<f64>().map_err(|_| TelemetryError::Value { line, column: HEADER[i], value: s.into() })
        };
        let id = row.get(1).unwrap_or("");
        let id = id.parse().map_err(|_| TelemetryError::Value { line, column: "id", value: id.into() })?;
        let fl = row.get(10).unwrap_or("");
        let fl = fl.parse().map_err(|_| TelemetryError::Value { line, column: "flags", value: fl.into() })?;
        out.push(TelemetryRecord {
            t: field(0)?,
            id,
            x: Vec3::new(field(2)?, field(3)?, field(4)?),
            x_d: Vec3::new(field(5)?, field(6)?, field(7)?),
            phi: field(8)?,
            omega_zdi: field(9)?,
            flags: fl,
        });
    }
    Ok(out)
}
