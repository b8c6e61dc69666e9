//! Counts CSV: one row per cell with columns
//! `l_index, r_index, n, m, N_sent, n_success`.
//!
//! Intensity indices are 0 = signal, 1 = first decoy, 2 = second decoy,
//! 3 = vacuum; `n`, `m` are the state indices 0..4. Counts may be fractional
//! so that expected counts use the same format.

use std::io::{Read, Write};
use std::path::Path;

use mdiqkd_core::channel::{CellCounts, GainTensor};
use mdiqkd_core::decoy::Intensity;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const HEADER: [&str; 6] = ["l_index", "r_index", "n", "m", "N_sent", "n_success"];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    l_index: usize,
    r_index: usize,
    n: usize,
    m: usize,
    #[serde(rename = "N_sent")]
    sent: f64,
    n_success: f64,
}

pub fn write_counts<W: Write>(tensor: &GainTensor, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER).map_err(|e| AppError::Data(e.to_string()))?;
    for (ix, c) in tensor.iter() {
        w.serialize(Row {
            l_index: ix.l.index(),
            r_index: ix.r.index(),
            n: ix.n,
            m: ix.m,
            sent: c.sent,
            n_success: c.detected,
        })
        .map_err(|e| AppError::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| AppError::io("<counts>", e))
}

pub fn save_counts(tensor: &GainTensor, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    write_counts(tensor, std::io::BufWriter::new(f))
}

pub fn load_counts(path: &Path) -> Result<GainTensor> {
    let f = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    read_counts(f, path)
}

/// Parses counts; `source` names the input in error messages.
pub fn read_counts<R: Read>(input: R, source: &Path) -> Result<GainTensor> {
    let fail = |line: u64, message: String| AppError::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| fail(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(fail(1, format!("expected header {}", HEADER.join(","))));
    }
    let mut tensor = GainTensor::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            fail(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| fail(line, e.to_string()))?;
        let intensity = |i: usize| {
            Intensity::from_index(i).ok_or_else(|| fail(line, format!("intensity index {i} outside 0..4")))
        };
        let (l, r) = (intensity(row.l_index)?, intensity(row.r_index)?);
        if tensor.get(l, r, row.n, row.m).is_some() {
            return Err(fail(line, "duplicate cell".into()));
        }
        let counts = CellCounts::new(row.sent, row.n_success).map_err(|e| fail(line, e.to_string()))?;
        tensor
            .insert(l, r, row.n, row.m, counts)
            .map_err(|e| fail(line, e.to_string()))?;
    }
    Ok(tensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<GainTensor> {
        read_counts(text.as_bytes(), Path::new("counts.csv"))
    }

    #[test]
    fn malformed_row_names_its_line() {
        let text = "l_index,r_index,n,m,N_sent,n_success\n0,0,0,1,100,3\n1,1,2,x,100,3\n";
        match parse(text) {
            Err(AppError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse("l_index,r_index,n,m,N_sent,n_success\n0,0,0,1,100,300\n") {
            Err(AppError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("n_success"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("l,r\n"), Err(AppError::Parse { line: 1, .. })));
        assert!(matches!(
            parse("l_index,r_index,n,m,N_sent,n_success\n0,0,2,0,1,0\n"),
            Err(AppError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("l_index,r_index,n,m,N_sent,n_success\n0,0,0,0,1,0\n0,0,0,0,1,0\n"),
            Err(AppError::Parse { line: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(rows in proptest::collection::vec((0usize..4, 0usize..4, 0usize..4, 0usize..4, 0.0..1e12f64, 0.0..1.0f64), 0..40)) {
            let mut t = GainTensor::new();
            for (l, r, n, m, sent, q) in rows {
                let (l, r) = (Intensity::from_index(l).unwrap(), Intensity::from_index(r).unwrap());
                let _ = t.insert(l, r, n, m, CellCounts::new(sent, sent * q).unwrap());
            }
            let mut buf = Vec::new();
            write_counts(&t, &mut buf).unwrap();
            prop_assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), t);
        }
    }
}
