//! Phase traces on disk.
//!
//! CSV: an optional `# dt=<s> f0=<hz>` header (further `key=value` tokens are
//! ignored), an optional row of column names, then one row per sample.
//! Raw: bare little-endian `f64`, with `dt` and `f0` supplied by the caller.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTrace {
    /// Sampling interval (s).
    pub dt: f64,
    /// Phase samples (rad).
    pub samples: Vec<f64>,
    /// Nominal oscillator frequency (Hz).
    pub f0: Option<f64>,
    pub source: String,
}

impl PhaseTrace {
    pub fn new(
        dt: f64,
        samples: Vec<f64>,
        f0: Option<f64>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(domain(format!("dt must be finite and > 0, got {dt}")));
        }
        if let Some(f) = f0 {
            if !(f > 0.0 && f.is_finite()) {
                return Err(domain(format!("f0 must be finite and > 0, got {f}")));
            }
        }
        if samples.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "a trace needs at least 3 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!(
                "non-finite sample {} at index {i}",
                samples[i]
            )));
        }
        Ok(Self {
            dt,
            samples,
            f0,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    RawF64Le,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "raw_f64_le" | "raw" => Ok(Self::RawF64Le),
            other => Err(domain(format!(
                "unknown trace format '{other}' (csv, raw_f64_le)"
            ))),
        }
    }
}

/// Metadata supplied outside the file. For CSV these fill in whatever the
/// header leaves out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReadOptions {
    pub dt: Option<f64>,
    pub f0: Option<f64>,
    /// CSV column holding the phase (0-based).
    pub column: usize,
}

pub fn read_trace(
    path: impl AsRef<Path>,
    format: TraceFormat,
    opts: &ReadOptions,
) -> Result<PhaseTrace> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let file = fs::File::open(path)?;
    match format {
        TraceFormat::Csv => parse_csv(BufReader::new(file), source, opts),
        TraceFormat::RawF64Le => parse_raw(BufReader::new(file), source, opts),
    }
}

pub fn parse_raw(mut reader: impl Read, source: String, opts: &ReadOptions) -> Result<PhaseTrace> {
    let dt = opts
        .dt
        .ok_or_else(|| domain("raw traces carry no metadata: dt must be given"))?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(domain(format!(
            "raw trace length {} is not a multiple of 8 bytes",
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    PhaseTrace::new(dt, samples, opts.f0, source)
}

fn header_value(line: usize, token: &str, key: &str) -> Result<Option<f64>> {
    match token.strip_prefix(key).and_then(|r| r.strip_prefix('=')) {
        None => Ok(None),
        Some(v) => v.parse::<f64>().map(Some).map_err(|_| Error::Parse {
            line,
            msg: format!("bad {key} value '{v}'"),
        }),
    }
}

pub fn parse_csv(reader: impl BufRead, source: String, opts: &ReadOptions) -> Result<PhaseTrace> {
    let (mut dt, mut f0) = (None, None);
    let mut samples = Vec::new();
    let mut seen_data = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for token in comment.split_whitespace() {
                if let Some(v) = header_value(lineno, token, "dt")? {
                    dt = Some(v);
                }
                if let Some(v) = header_value(lineno, token, "f0")? {
                    f0 = Some(v);
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !seen_data && fields.iter().all(|f| f.parse::<f64>().is_err()) {
            // column names
            seen_data = true;
            continue;
        }
        seen_data = true;
        let field = fields.get(opts.column).ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("no column {} ({} fields)", opts.column, fields.len()),
        })?;
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("'{field}' is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("non-finite sample {v} at index {}", samples.len()),
            });
        }
        samples.push(v);
    }
    let dt = dt
        .or(opts.dt)
        .ok_or_else(|| domain("trace has no '# dt=' header and no dt was given"))?;
    PhaseTrace::new(dt, samples, f0.or(opts.f0), source)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &PhaseTrace, format: TraceFormat) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    match format {
        TraceFormat::Csv => write_csv(&mut out, trace)?,
        TraceFormat::RawF64Le => {
            for v in &trace.samples {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Shortest round-trip decimal formatting, so reading back is bit-exact.
pub fn write_csv(out: &mut impl Write, trace: &PhaseTrace) -> Result<()> {
    write!(out, "# dt={:e}", trace.dt)?;
    if let Some(f) = trace.f0 {
        write!(out, " f0={f:e}")?;
    }
    writeln!(out)?;
    for v in &trace.samples {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}
