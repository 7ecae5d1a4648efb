//! CSV trace files.
//!
//! ```text
//! # kind = HoleArea
//! # temperature_K = 1.8
//! # burn_power_mW = 5
//! t_s,y,sigma_y
//! 0,1.02,0.01
//! ```
//!
//! `# key = value` comment lines form the metadata block. The header names
//! the abscissa with its unit suffix, then `y` and an optional `sigma_y`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DecayTrace, Sample, TraceKind};

/// Abscissa header used for chirp profiles expressed against frequency.
pub const FREQUENCY_COLUMN: &str = "f_Hz";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Splits a `# key = value` line. Returns `None` for other comments.
pub fn parse_metadata_line(line: &str) -> Option<(String, String)> {
    let body = line.trim_start().strip_prefix('#')?;
    let (k, v) = body.split_once('=')?;
    let k = k.trim();
    if k.is_empty() || k.contains(char::is_whitespace) {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

fn accepted_abscissas(kind: TraceKind) -> Vec<&'static str> {
    let mut v = vec![kind.abscissa_column()];
    if kind == TraceKind::HoleProfile {
        v.push(FREQUENCY_COLUMN);
    }
    v
}

fn quantity(col: &str) -> &str {
    col.split_once('_').map_or(col, |(q, _)| q)
}

fn check_header(kind: TraceKind, header: &csv::StringRecord, line: usize) -> Result<bool> {
    let cols: Vec<&str> = header.iter().collect();
    let accepted = accepted_abscissas(kind);
    let first = cols.first().copied().unwrap_or("");
    if !accepted.contains(&first) {
        if let Some(want) = accepted.iter().find(|a| quantity(a) == quantity(first)) {
            return Err(parse_err(
                line,
                format!("unit mismatch in column {first:?}: {kind} traces use {want:?}"),
            ));
        }
        return Err(parse_err(
            line,
            format!("missing column {:?} (found {first:?})", accepted[0]),
        ));
    }
    match cols.get(1) {
        Some(&"y") => {}
        Some(other) => {
            return Err(parse_err(
                line,
                format!("second column must be \"y\", found {other:?}"),
            ));
        }
        None => return Err(parse_err(line, "missing column \"y\"")),
    }
    match cols.get(2) {
        None => {}
        Some(&"sigma_y") => {}
        Some(other) => {
            return Err(parse_err(
                line,
                format!("third column must be \"sigma_y\", found {other:?}"),
            ));
        }
    }
    if cols.len() > 3 {
        return Err(parse_err(line, format!("unexpected column {:?}", cols[3])));
    }
    Ok(cols.len() == 3)
}

/// Parses a trace from CSV text. Errors name the 1-based line.
pub fn parse_trace(text: &str) -> Result<DecayTrace> {
    let mut metadata = BTreeMap::new();
    let mut header_line = None;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some((k, v)) = parse_metadata_line(trimmed) {
                if metadata.insert(k.clone(), v).is_some() {
                    return Err(parse_err(i + 1, format!("duplicate metadata key {k:?}")));
                }
            }
            continue;
        }
        header_line.get_or_insert(i + 1);
    }
    let header_line = header_line.ok_or_else(|| parse_err(1, "no header row"))?;

    let kind_str = metadata
        .remove("kind")
        .ok_or_else(|| parse_err(header_line, "metadata block lacks \"kind\""))?;
    let kind = TraceKind::parse(&kind_str)
        .ok_or_else(|| parse_err(header_line, format!("unknown kind {kind_str:?}")))?;
    let temperature = match metadata.remove("temperature_K") {
        None => f64::NAN,
        Some(v) => v
            .parse::<f64>()
            .ok()
            .filter(|t| *t >= 0.0 && t.is_finite())
            .ok_or_else(|| {
                parse_err(
                    header_line,
                    format!("temperature_K = {v:?} is not a temperature"),
                )
            })?,
    };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(header_line, e.to_string()))?
        .clone();
    let has_sigma = check_header(kind, &header, header_line)?;
    if header.get(0) == Some(FREQUENCY_COLUMN) {
        metadata.insert("axis".into(), "frequency".into());
    }

    let mut samples: Vec<Sample> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            let f = &rec[k];
            f.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    parse_err(
                        line,
                        format!("column {:?}: {f:?} is not a finite number", &header[k]),
                    )
                })
        };
        let t = num(0)?;
        let y = num(1)?;
        let sigma = if has_sigma {
            let s = num(2)?;
            if !(s > 0.0) {
                return Err(parse_err(
                    line,
                    format!("sigma_y must be positive, got {s}"),
                ));
            }
            Some(s)
        } else {
            None
        };
        if let Some(prev) = samples.last() {
            if !(t > prev.t) {
                return Err(parse_err(
                    line,
                    format!(
                        "{} not strictly increasing ({t} after {})",
                        &header[0], prev.t
                    ),
                ));
            }
        }
        samples.push(Sample { t, y, sigma });
    }
    if samples.is_empty() {
        return Err(parse_err(header_line, "no data rows"));
    }
    let mut trace = DecayTrace::new(kind, temperature, samples)?;
    trace.metadata = metadata;
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<DecayTrace> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_trace(&text)
}

/// Renders a trace in the format read by [`parse_trace`]. Floats use the
/// shortest representation that round-trips exactly.
pub fn format_trace(trace: &DecayTrace) -> String {
    let mut out = String::new();
    out.push_str(&format!("# kind = {}\n", trace.kind));
    if trace.temperature.is_finite() {
        out.push_str(&format!("# temperature_K = {}\n", trace.temperature));
    }
    for (k, v) in &trace.metadata {
        if k == "kind" || k == "temperature_K" {
            continue;
        }
        out.push_str(&format!("# {k} = {v}\n"));
    }
    let abscissa = if trace.kind == TraceKind::HoleProfile
        && trace.metadata.get("axis").map(String::as_str) == Some("frequency")
    {
        FREQUENCY_COLUMN
    } else {
        trace.kind.abscissa_column()
    };
    let has_sigma = !trace.samples.is_empty() && trace.samples.iter().all(|s| s.sigma.is_some());
    if has_sigma {
        out.push_str(&format!("{abscissa},y,sigma_y\n"));
    } else {
        out.push_str(&format!("{abscissa},y\n"));
    }
    for s in &trace.samples {
        match s.sigma.filter(|_| has_sigma) {
            Some(sig) => out.push_str(&format!("{},{},{}\n", s.t, s.y, sig)),
            None => out.push_str(&format!("{},{}\n", s.t, s.y)),
        }
    }
    out
}

pub fn write_trace(path: &Path, trace: &DecayTrace) -> Result<()> {
    std::fs::write(path, format_trace(trace))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
