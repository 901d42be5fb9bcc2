//! Transaction dataset ingestion.
//!
//! CSV with a header row and columns `timestamp_unix,value_satoshi,size_bytes`.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exp2::stream::ValueSource;
use crate::stats;
use crate::tx::{FeeRate, Transaction, TxId};

pub const COLUMNS: [&str; 3] = ["timestamp_unix", "value_satoshi", "size_bytes"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetRecord {
    pub timestamp_unix: u64,
    pub value: u64,
    pub size_bytes: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub tail_threshold: f64,
    pub tail_fraction: f64,
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file, path)
}

/// Parses dataset CSV from any reader; `origin` names the source in errors.
pub fn read_dataset<R: Read>(reader: R, origin: &Path) -> Result<Dataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names != COLUMNS {
        return Err(parse_err(
            1,
            format!(
                "expected header {}, found {}",
                COLUMNS.join(","),
                names.join(",")
            ),
        ));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<i128> {
            row[i].parse::<i128>().map_err(|_| {
                parse_err(
                    line,
                    format!("{} is not an integer: {:?}", COLUMNS[i], &row[i]),
                )
            })
        };
        let (ts, value, size) = (field(0)?, field(1)?, field(2)?);
        if ts < 0 || ts > u64::MAX as i128 {
            return Err(parse_err(line, format!("timestamp {ts} out of range")));
        }
        if value < 0 {
            return Err(parse_err(line, format!("negative value {value}")));
        }
        if value > u64::MAX as i128 {
            return Err(parse_err(line, format!("value {value} out of range")));
        }
        if size <= 0 || size > u32::MAX as i128 {
            return Err(parse_err(
                line,
                format!("size {size} must be a positive 32-bit integer"),
            ));
        }
        records.push(DatasetRecord {
            timestamp_unix: ts as u64,
            value: value as u64,
            size_bytes: size as u32,
        });
    }
    Ok(Dataset { records })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn stats(&self, tail_threshold: f64) -> DatasetStats {
        let v: Vec<f64> = self.records.iter().map(|r| r.value as f64).collect();
        let tail = v.iter().filter(|&&x| x > tail_threshold).count();
        DatasetStats {
            count: v.len(),
            mean: stats::mean(&v),
            median: stats::median(&v),
            tail_threshold,
            tail_fraction: if v.is_empty() {
                0.0
            } else {
                tail as f64 / v.len() as f64
            },
        }
    }

    /// Replays values in file order.
    pub fn source(&self) -> ValueSource {
        ValueSource::Replay(Arc::from(self.values()))
    }

    /// Transactions with ids derived from `(seed, row index)` and fees at `fee_rate`.
    pub fn transactions(&self, fee_rate: FeeRate, seed: u64) -> Vec<Transaction> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| Transaction {
                txid: TxId::derive(seed, i as u64),
                value: r.value,
                size_bytes: r.size_bytes,
                fee: fee_rate.fee_for(r.value),
                arrival_ms: r.timestamp_unix.saturating_mul(1000),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        read_dataset(text.as_bytes(), Path::new("fixture.csv"))
    }

    #[test]
    fn three_rows() {
        let d = parse("timestamp_unix,value_satoshi,size_bytes\n1,100,250\n2,200,300\n3,300,400\n")
            .unwrap();
        assert_eq!(d.len(), 3);
        let s = d.stats(250.0);
        assert_eq!((s.count, s.mean, s.median), (3, 200.0, 200.0));
        assert!((s.tail_fraction - 1.0 / 3.0).abs() < 1e-12);
        let txs = d.transactions(FeeRate::from_fraction(0.01).unwrap(), 0);
        assert_eq!(txs[2].fee, 3);
        assert_eq!(txs[1].arrival_ms, 2000);
    }

    #[test]
    fn engineered_mean_and_median() {
        // five values: median 10, mean 100
        let d = parse(
            "timestamp_unix,value_satoshi,size_bytes\n0,1,1\n0,5,1\n0,10,1\n0,20,1\n0,464,1\n",
        )
        .unwrap();
        let s = d.stats(5e11);
        assert_eq!(s.mean, 100.0);
        assert_eq!(s.median, 10.0);
        assert_eq!(s.tail_fraction, 0.0);
    }

    #[test]
    fn negative_value_names_line() {
        let err =
            parse("timestamp_unix,value_satoshi,size_bytes\n1,5,250\n2,-7,250\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("negative"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            parse("a,b,c\n1,2,3\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("timestamp_unix,value_satoshi,size_bytes\n1,x,3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("timestamp_unix,value_satoshi,size_bytes\n1,2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("timestamp_unix,value_satoshi,size_bytes\n1,2,0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = load_dataset(Path::new("/nonexistent/blockpress.csv"));
        assert!(matches!(r, Err(Error::Io { .. })));
    }
}
