//! CSV input and output: experiment tables and complex matrices.
//!
//! Floats are written with 17 significant digits in scientific notation so
//! that values round-trip exactly and two runs can be compared byte for byte.
//! Complex entries use `a+bj` / `a-bj` literals, one matrix row per line.

use std::io::{Read, Write};

use bdris_core::evaluation::ExperimentResult;
use bdris_core::CMatrix;
use num_complex::Complex64;

use crate::CliError;

pub const RESULT_HEADER: [&str; 7] = [
    "strategy",
    "N",
    "metric",
    "mean",
    "std",
    "mean_time_s",
    "trials",
];

/// `{:.16e}` rendering, `NaN`/`inf` spelled out.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_results<W: Write>(out: W, result: &ExperimentResult) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for row in &result.rows {
        w.write_record([
            row.strategy.clone(),
            row.n.to_string(),
            row.metric.clone(),
            format_f64(row.mean),
            format_f64(row.std),
            format_f64(row.mean_time_s),
            row.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", format_f64(z.re), sign, format_f64(z.im.abs()))
}

/// Parses `a+bj`, `a-bj`, `a`, `bj` (also accepting `i` for the unit).
pub fn parse_complex(text: &str) -> Result<Complex64, CliError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CliError::Parse(format!("invalid complex literal `{text}`"));
    if s.is_empty() {
        return Err(bad());
    }
    let parse_real = |t: &str| t.parse::<f64>().map_err(|_| bad());
    let parse_imag = |t: &str| match t {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        other => parse_real(other),
    };

    let Some(body) = s.strip_suffix(['j', 'i', 'J', 'I']) else {
        return Ok(Complex64::new(parse_real(&s)?, 0.0));
    };
    // Split at the last sign that is not the leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => Ok(Complex64::new(
            parse_real(&body[..i])?,
            parse_imag(&body[i..])?,
        )),
        None => Ok(Complex64::new(0.0, parse_imag(body)?)),
    }
}

pub fn read_matrix<R: Read>(input: R) -> Result<CMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(parse_complex)
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Parse(format!(
                    "row {} has {} entries, expected {}",
                    rows.len() + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Parse("matrix file is empty".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(CMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn write_matrix<W: Write>(out: W, m: &CMatrix) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|z| format_complex(*z)))?;
    }
    w.flush()?;
    Ok(())
}
