//! Matrix CSV files and trace/JSON output.
//!
//! Matrices are plain CSV, one matrix row per line, no header. Floats are
//! written in shortest round-trip form so re-reading gives identical bits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SignalMatrix;
use crate::outlier::OutlierRecord;
use crate::pursuit::IterationRecord;

pub fn parse_matrix<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: cannot parse '{f}' as a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} values, expected {}",
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("matrix file is empty".into()));
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_matrix(File::open(path)?)
}

/// `X` from a CSV whose rows are the `d` coordinates and columns the signals.
pub fn read_signals(path: &Path) -> Result<SignalMatrix> {
    SignalMatrix::from_rows(&read_matrix(path)?)
}

pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_matrix_to<W: Write>(out: W, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in rows {
        w.write_record(r.iter().map(|v| format_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    write_matrix_to(BufWriter::new(File::create(path)?), rows)
}

pub fn write_signals(path: &Path, x: &SignalMatrix) -> Result<()> {
    write_matrix(path, &x.to_rows())
}

pub fn write_json_to<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_json_to(BufWriter::new(File::create(path)?), value)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

pub fn write_learn_trace_to<W: Write>(out: W, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "psi", "phi", "tc_objective", "atoms", "max_support"])?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            format_float(r.psi),
            format_float(r.phi),
            format_float(r.tc_objective),
            r.atoms.to_string(),
            r.max_support.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_outlier_trace_to<W: Write>(out: W, records: &[OutlierRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "phi", "psi_hat", "phi_drop"])?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            format_float(r.phi),
            format_float(r.psi_hat),
            format_float(r.phi_drop),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `ψ` column of a learn trace file.
pub fn read_trace_psi(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "psi")
        .ok_or_else(|| Error::Parse("trace has no 'psi' column".into()))?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let f = rec.get(col).unwrap_or("");
            f.parse::<f64>()
                .map_err(|_| Error::Parse(format!("cannot parse psi value '{f}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_whitespace_and_blank_lines() {
        let rows = parse_matrix("1, 2.5,-3\n\n 4e-3,5,6 \n".as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.5, -3.0], vec![0.004, 5.0, 6.0]]);
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(matches!(parse_matrix("1,2\n3\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix("1,x\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix("".as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn float_round_trip_is_bit_exact() {
        let rows = vec![
            vec![0.1, 1.0 / 3.0, -2.0f64.sqrt(), 1e-300],
            vec![f64::MIN_POSITIVE, 123_456_789.123_456_79, -0.0, 5e-324],
        ];
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &rows).unwrap();
        let back = parse_matrix(buf.as_slice()).unwrap();
        for (a, b) in rows.iter().flatten().zip(back.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut again = Vec::new();
        write_matrix_to(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn trace_header() {
        let rec = IterationRecord {
            t: 1,
            psi: 0.5,
            phi: 2.0,
            tc_objective: 2.0,
            atoms: 1,
            max_support: 1,
        };
        let mut buf = Vec::new();
        write_learn_trace_to(&mut buf, &[rec]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,psi,phi,tc_objective,atoms,max_support\n1,0.5,2.0,2.0,1,1\n");
    }
}
