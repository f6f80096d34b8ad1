use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    /// The method's declared buffers exceeded the byte budget.
    Capacity,
}

/// One `(method, token count)` benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub method: String,
    /// Sequence length the method processed.
    pub tokens: usize,
    /// Median over the timed runs; absent when the cell hit capacity.
    pub median_seconds: Option<f64>,
    /// Largest declared transient buffer (or the one that tripped the budget).
    pub peak_bytes: u64,
    pub status: RecordStatus,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BenchRow {
    method: String,
    tokens: usize,
    median_seconds: Option<f64>,
    peak_bytes: u64,
    status: RecordStatus,
}

/// Sorts by method name, then token count.
pub fn sort_records(records: &mut [BenchmarkRecord]) {
    records.sort_by(|a, b| a.method.cmp(&b.method).then(a.tokens.cmp(&b.tokens)));
}

/// Columns: `method,tokens,median_seconds,peak_bytes,status`.
pub fn write_bench_csv<W: Write>(records: &[BenchmarkRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(BenchRow {
            method: r.method.clone(),
            tokens: r.tokens,
            median_seconds: r.median_seconds,
            peak_bytes: r.peak_bytes,
            status: r.status,
        })?;
    }
    if records.is_empty() {
        w.write_record(["method", "tokens", "median_seconds", "peak_bytes", "status"])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_bench_csv<R: Read>(input: R) -> Result<Vec<BenchmarkRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize::<BenchRow>()
        .map(|row| {
            let row = row?;
            Ok(BenchmarkRecord {
                method: row.method,
                tokens: row.tokens,
                median_seconds: row.median_seconds,
                peak_bytes: row.peak_bytes,
                status: row.status,
                accuracy: None,
            })
        })
        .collect()
}

/// One needle-evaluation result.
#[derive(Debug, Clone, PartialEq)]
pub struct NeedleRow {
    pub method: String,
    pub seed: u64,
    pub accuracy: f64,
    pub per_position: Vec<f64>,
}

/// Columns: `method,seed,accuracy,pos_0..pos_{k-1}`.
pub fn write_needle_csv<W: Write>(rows: &[NeedleRow], out: W) -> Result<()> {
    let k = rows.first().map_or(0, |r| r.per_position.len());
    if rows.iter().any(|r| r.per_position.len() != k) {
        return Err(Error::shape("needle rows have different position counts"));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["method".to_string(), "seed".into(), "accuracy".into()];
    header.extend((0..k).map(|i| format!("pos_{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.method.clone(), r.seed.to_string(), r.accuracy.to_string()];
        rec.extend(r.per_position.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_needle_csv<R: Read>(input: R) -> Result<Vec<NeedleRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let parse = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::invalid(format!("bad number {s:?}")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(Error::invalid("needle csv row has fewer than 3 columns"));
        }
        rows.push(NeedleRow {
            method: rec[0].to_string(),
            seed: rec[1]
                .parse()
                .map_err(|_| Error::invalid(format!("bad seed {:?}", &rec[1])))?,
            accuracy: parse(&rec[2])?,
            per_position: rec.iter().skip(3).map(parse).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}
