//! CSV import and export of waveforms, fundamental series and metrics.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a file written
//! here reads back bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::{FundamentalSeries, ResponseMetrics};
use crate::circuit::WaveformSet;
use crate::error::{Error, Result};

/// Columns expected in a waveform file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub time: String,
    pub columns: Vec<String>,
}

impl CsvSchema {
    pub fn new(time: &str, columns: &[&str]) -> Self {
        Self {
            time: time.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_table(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{}", header.join(","))?;
    let n = columns.first().map_or(0, |c| c.len());
    let mut line = String::new();
    for k in 0..n {
        line.clear();
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&c[k].to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_waveforms(path: &Path, set: &WaveformSet) -> Result<()> {
    let mut header = vec!["t"];
    header.extend(set.names());
    let mut cols: Vec<&[f64]> = vec![&set.time];
    cols.extend(set.channels.iter().map(|(_, v)| v.as_slice()));
    write_table(path, &header, &cols)
}

pub fn write_fundamentals(path: &Path, s: &FundamentalSeries) -> Result<()> {
    write_table(
        path,
        &["t", "p1", "q1", "p1_pu", "q1_pu"],
        &[&s.t, &s.p1, &s.q1, &s.p1_pu, &s.q1_pu],
    )
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub delta_u: f64,
    pub t_fault: f64,
    pub metrics: ResponseMetrics,
}

pub const SUMMARY_HEADER: &str = "delta_u,t_fault,pf_pre,restored,p_intermediate_pu,p_peak_pu,q_peak_pu,t_recover_s,n_disconnects";

pub fn summary_line(row: &SummaryRow) -> String {
    let m = &row.metrics;
    format!(
        "{},{},{},{},{},{},{},{},{}",
        row.delta_u,
        row.t_fault,
        m.pf_pre,
        m.restored,
        m.p_intermediate,
        m.p_peak,
        m.q_peak,
        m.t_recover.map_or_else(|| "NaN".to_string(), |t| t.to_string()),
        m.disconnects.len()
    )
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", summary_line(r))?;
    }
    w.flush()?;
    Ok(())
}

fn row_error(line: u64, message: impl Into<String>) -> Error {
    Error::CsvRow {
        row: line,
        message: message.into(),
    }
}

/// Reads the named columns of a CSV file; returns time and data columns.
fn read_columns(path: &Path, time: &str, names: &[String]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| row_error(1, format!("missing column `{name}`")))
    };
    let ti = find(time)?;
    let idx = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let mut t = Vec::new();
    let mut data = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse = |j: usize, name: &str| -> Result<f64> {
            let field = rec
                .get(j)
                .ok_or_else(|| row_error(line, format!("missing value for `{name}`")))?;
            field
                .parse::<f64>()
                .map_err(|_| row_error(line, format!("`{field}` in column `{name}` is not a number")))
        };
        let tv = parse(ti, time)?;
        if let Some(&prev) = t.last() {
            if !(tv > prev) {
                return Err(row_error(line, format!("time {tv} does not increase after {prev}")));
            }
        }
        t.push(tv);
        for (d, (&j, n)) in data.iter_mut().zip(idx.iter().zip(names)) {
            d.push(parse(j, n)?);
        }
    }
    Ok((t, data))
}

fn is_uniform(t: &[f64], dt: f64) -> bool {
    t.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt)
}

/// Linear resampling onto `t0 + k/fs` covering the input span.
pub fn resample(t: &[f64], y: &[f64], fs: f64) -> (Vec<f64>, Vec<f64>) {
    if t.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let t0 = t[0];
    let n = ((t[t.len() - 1] - t0) * fs + 1e-9).floor() as usize + 1;
    let mut out_t = Vec::with_capacity(n);
    let mut out_y = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let x = t0 + k as f64 / fs;
        while j + 2 < t.len() && t[j + 1] < x {
            j += 1;
        }
        let y = if t.len() == 1 {
            y[0]
        } else {
            let (a, b) = (j, (j + 1).min(t.len() - 1));
            let w = ((x - t[a]) / (t[b] - t[a])).clamp(0.0, 1.0);
            y[a] + w * (y[b] - y[a])
        };
        out_t.push(x);
        out_y.push(y);
    }
    (out_t, out_y)
}

/// Reads a waveform file, resampling to `fs` (with a warning) if its time axis is not uniform at `fs`.
pub fn ingest_waveform_csv(path: &Path, schema: &CsvSchema, fs: f64) -> Result<WaveformSet> {
    if !(fs > 0.0) {
        return Err(Error::Analysis("sample rate must be positive".into()));
    }
    let (t, data) = read_columns(path, &schema.time, &schema.columns)?;
    if t.len() > 1 && !is_uniform(&t, 1.0 / fs) {
        log::warn!(
            "{}: time axis is not uniform at {fs} Hz, resampling",
            path.display()
        );
        let mut set = WaveformSet::default();
        for (name, y) in schema.columns.iter().zip(&data) {
            let (rt, ry) = resample(&t, y, fs);
            set.time = rt;
            set.push_channel(name.clone(), ry);
        }
        return Ok(set);
    }
    let mut set = WaveformSet {
        time: t,
        ..WaveformSet::default()
    };
    for (name, y) in schema.columns.iter().zip(data) {
        set.push_channel(name.clone(), y);
    }
    Ok(set)
}

pub fn read_fundamentals(path: &Path, p_base: Option<f64>) -> Result<FundamentalSeries> {
    let names: Vec<String> = ["p1", "q1", "p1_pu", "q1_pu"].map(String::from).to_vec();
    let (t, mut d) = read_columns(path, "t", &names)?;
    let q_pu = d.pop().unwrap();
    let p_pu = d.pop().unwrap();
    let q = d.pop().unwrap();
    let p = d.pop().unwrap();
    let base = p_base.unwrap_or_else(|| {
        p.iter()
            .zip(&p_pu)
            .find(|(_, pu)| **pu != 0.0)
            .map_or(1.0, |(p, pu)| p / pu)
    });
    Ok(FundamentalSeries {
        t,
        p1: p,
        q1: q,
        p1_pu: p_pu,
        q1_pu: q_pu,
        p_base: base,
    })
}
