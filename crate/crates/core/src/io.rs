//! Plain-text contrast, measurement and trace files.
//!
//! Numbers are written with 17 significant digits so a write/read cycle
//! reproduces every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::inversion::{InversionTrace, TraceRow};
use crate::linalg::C64;
use crate::model::{ContrastImage, MeasurementSet};

pub const TRACE_HEADER: &str = "iter,time_s,F,F1,F2,Freg,lambda,grad_x_norm,mse,op_count";

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn write_complex(out: &mut impl Write, z: C64) -> Result<()> {
    writeln!(out, "{} {}", num(z.re), num(z.im))?;
    Ok(())
}

/// Numbered non-empty lines, 1-based.
struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self { inner: r.lines(), line: 0 }
    }

    fn next_line(&mut self, what: &str) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                None => return Err(Error::parse(self.line, format!("unexpected end of file, expected {what}"))),
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
            }
        }
    }

    fn expect_end(&mut self) -> Result<()> {
        for l in self.inner.by_ref() {
            self.line += 1;
            if !l?.trim().is_empty() {
                return Err(Error::parse(self.line, "unexpected trailing content"));
            }
        }
        Ok(())
    }

    fn complex(&mut self) -> Result<C64> {
        let l = self.next_line("a `re im` line")?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::parse(self.line, format!("expected `re im`, found {l:?}")));
        }
        Ok(C64::new(parse_f64(parts[0], self.line)?, parse_f64(parts[1], self.line)?))
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::parse(line, format!("invalid number {s:?}")))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::parse(line, format!("invalid integer {s:?}")))
}

/// Reads `key value` pairs after a leading tag, in the given order.
fn header_fields<'l>(l: &'l str, line: usize, tag: &str, keys: &[&str]) -> Result<Vec<&'l str>> {
    let tokens: Vec<&str> = l.split_whitespace().collect();
    if tokens.first() != Some(&tag) || tokens.len() != 1 + 2 * keys.len() {
        return Err(Error::parse(line, format!("expected header `{tag} {}`", keys.join(" <..> ") + " <..>")));
    }
    keys.iter()
        .enumerate()
        .map(|(j, key)| {
            if tokens[1 + 2 * j] == *key {
                Ok(tokens[2 + 2 * j])
            } else {
                Err(Error::parse(line, format!("expected key `{key}`, found `{}`", tokens[1 + 2 * j])))
            }
        })
        .collect()
}

pub fn write_contrast(out: &mut impl Write, x: &ContrastImage) -> Result<()> {
    let side = x.grid_side().ok_or_else(|| Error::config("contrast image is not square"))?;
    writeln!(out, "contrast n_side {side}")?;
    for z in &x.values {
        write_complex(out, *z)?;
    }
    Ok(())
}

pub fn read_contrast(r: impl BufRead) -> Result<ContrastImage> {
    let mut lines = Lines::new(r);
    let head = lines.next_line("a contrast header")?;
    let side = parse_usize(header_fields(&head, lines.line, "contrast", &["n_side"])?[0], lines.line)?;
    let values = (0..side * side).map(|_| lines.complex()).collect::<Result<_>>()?;
    lines.expect_end()?;
    Ok(ContrastImage { values })
}

pub fn write_measurements(out: &mut impl Write, m: &MeasurementSet) -> Result<()> {
    let n = m.data.first().map_or(0, Vec::len);
    if m.data.iter().any(|b| b.len() != n) {
        return Err(Error::config("measurement blocks have different lengths"));
    }
    writeln!(
        out,
        "measurements M {} N {} freq_hz {} snr_db {}",
        m.data.len(),
        n,
        num(m.frequency),
        num(m.snr_db)
    )?;
    for block in &m.data {
        for z in block {
            write_complex(out, *z)?;
        }
    }
    Ok(())
}

/// The seed is not part of the file and comes back as `None`.
pub fn read_measurements(r: impl BufRead) -> Result<MeasurementSet> {
    let mut lines = Lines::new(r);
    let head = lines.next_line("a measurements header")?;
    let at = lines.line;
    let f = header_fields(&head, at, "measurements", &["M", "N", "freq_hz", "snr_db"])?;
    let (m, n) = (parse_usize(f[0], at)?, parse_usize(f[1], at)?);
    let frequency = parse_f64(f[2], at)?;
    let snr_db = parse_f64(f[3], at)?;
    let data = (0..m)
        .map(|_| (0..n).map(|_| lines.complex()).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    lines.expect_end()?;
    Ok(MeasurementSet { data, frequency, snr_db, seed: None })
}

/// A missing `mse` is written as an empty field.
pub fn write_trace(out: &mut impl Write, trace: &InversionTrace) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in &trace.rows {
        let mse = r.mse.map(num).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.iter,
            num(r.time_s),
            num(r.f),
            num(r.f1),
            num(r.f2),
            num(r.f_reg),
            num(r.lambda),
            num(r.grad_x_norm),
            mse,
            r.op_count
        )?;
    }
    Ok(())
}

pub fn read_trace(r: impl BufRead) -> Result<InversionTrace> {
    let mut lines = Lines::new(r);
    let head = lines.next_line("the trace header")?;
    if head.trim() != TRACE_HEADER {
        return Err(Error::parse(lines.line, format!("expected header `{TRACE_HEADER}`")));
    }
    let mut rows = Vec::new();
    for l in lines.inner {
        lines.line += 1;
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let at = lines.line;
        let c: Vec<&str> = l.split(',').collect();
        if c.len() != 10 {
            return Err(Error::parse(at, format!("expected 10 fields, found {}", c.len())));
        }
        let mse = if c[8].trim().is_empty() { None } else { Some(parse_f64(c[8], at)?) };
        rows.push(TraceRow {
            iter: parse_usize(c[0], at)?,
            time_s: parse_f64(c[1], at)?,
            f: parse_f64(c[2], at)?,
            f1: parse_f64(c[3], at)?,
            f2: parse_f64(c[4], at)?,
            f_reg: parse_f64(c[5], at)?,
            lambda: parse_f64(c[6], at)?,
            grad_x_norm: parse_f64(c[7], at)?,
            mse,
            op_count: c[9].trim().parse().map_err(|_| Error::parse(at, format!("invalid integer {:?}", c[9])))?,
        });
    }
    Ok(InversionTrace { rows, contrasts: Vec::new() })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn save_contrast(path: &Path, x: &ContrastImage) -> Result<()> {
    let mut out = create(path)?;
    write_contrast(&mut out, x)?;
    out.flush()?;
    Ok(())
}

pub fn load_contrast(path: &Path) -> Result<ContrastImage> {
    read_contrast(open(path)?)
}

pub fn save_measurements(path: &Path, m: &MeasurementSet) -> Result<()> {
    let mut out = create(path)?;
    write_measurements(&mut out, m)?;
    out.flush()?;
    Ok(())
}

pub fn load_measurements(path: &Path) -> Result<MeasurementSet> {
    read_measurements(open(path)?)
}

pub fn save_trace(path: &Path, trace: &InversionTrace) -> Result<()> {
    let mut out = create(path)?;
    write_trace(&mut out, trace)?;
    out.flush()?;
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<InversionTrace> {
    read_trace(open(path)?)
}
