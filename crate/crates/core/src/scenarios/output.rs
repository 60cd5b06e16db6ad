//! CSV output: header row, comma separated, floats in shortest round-trip
//! form.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One CSV field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            // Debug formatting of f64 is the shortest string that parses back
            // to the same bits
            Cell::Real(x) => write!(f, "{x:?}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = Cell>,
{
    let file = BufWriter::new(File::create(path)?);
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    let mut buf = Vec::new();
    for row in rows {
        buf.clear();
        buf.extend(row.into_iter().map(|c| c.to_string()));
        if buf.len() != header.len() {
            return Err(Error::SizeMismatch {
                expected: header.len(),
                got: buf.len(),
            });
        }
        w.write_record(&buf).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

/// Reads a numeric CSV file back as `(header, rows)`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("non-numeric CSV field `{s}` in {}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Time-indexed rows with a fixed column schema.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    pub t: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(columns: &[&str]) -> Self {
        TimeSeries {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            t: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Appends a row. Times must increase strictly.
    pub fn push(&mut self, t: f64, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        assert!(self.t.last().is_none_or(|&last| t > last), "times must increase");
        self.t.push(t);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["t"];
        header.extend(self.columns.iter().map(String::as_str));
        write_csv(
            path,
            &header,
            self.t
                .iter()
                .zip(&self.rows)
                .map(|(&t, r)| std::iter::once(Cell::Real(t)).chain(r.iter().map(|&x| Cell::Real(x)))),
        )
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let (header, rows) = read_csv(path)?;
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Config(format!("{} has no leading t column", path.display())));
        }
        let mut s = TimeSeries {
            columns: header[1..].to_vec(),
            ..Default::default()
        };
        for r in rows {
            s.t.push(r[0]);
            s.rows.push(r[1..].to_vec());
        }
        Ok(s)
    }
}

/// Probe values at fixed locations over time, written in long format
/// (`t, location, u[, tau12, n1]`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeSeries {
    pub locations: Vec<f64>,
    pub t: Vec<f64>,
    /// `u[k][j]`: time `k`, location `j`.
    pub u: Vec<Vec<f64>>,
    pub tau12: Option<Vec<Vec<f64>>>,
    pub n1: Option<Vec<Vec<f64>>>,
}

impl ProbeSeries {
    pub fn new(locations: &[f64], with_stress: bool) -> Self {
        ProbeSeries {
            locations: locations.to_vec(),
            tau12: with_stress.then(Vec::new),
            n1: with_stress.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn push(&mut self, t: f64, u: Vec<f64>, stress: Option<(Vec<f64>, Vec<f64>)>) {
        assert!(self.t.last().is_none_or(|&last| t > last), "times must increase");
        assert_eq!(u.len(), self.locations.len());
        self.t.push(t);
        self.u.push(u);
        match (stress, &mut self.tau12, &mut self.n1) {
            (Some((s, n)), Some(ts), Some(ns)) => {
                ts.push(s);
                ns.push(n);
            }
            (None, None, None) => {}
            _ => panic!("stress columns must be given on every row or never"),
        }
    }

    /// Velocity history at location index `j`.
    pub fn u_at(&self, j: usize) -> Vec<f64> {
        self.u.iter().map(|r| r[j]).collect()
    }

    pub fn tau12_at(&self, j: usize) -> Option<Vec<f64>> {
        self.tau12.as_ref().map(|s| s.iter().map(|r| r[j]).collect())
    }

    pub fn n1_at(&self, j: usize) -> Option<Vec<f64>> {
        self.n1.as_ref().map(|s| s.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: &[&str] = if self.tau12.is_some() {
            &["t", "location", "u", "tau12", "n1"]
        } else {
            &["t", "location", "u"]
        };
        let mut rows = Vec::with_capacity(self.t.len() * self.locations.len());
        for (k, &t) in self.t.iter().enumerate() {
            for (j, &y) in self.locations.iter().enumerate() {
                let mut row = vec![Cell::Real(t), Cell::Real(y), Cell::Real(self.u[k][j])];
                if let (Some(s), Some(n)) = (&self.tau12, &self.n1) {
                    row.push(Cell::Real(s[k][j]));
                    row.push(Cell::Real(n[k][j]));
                }
                rows.push(row);
            }
        }
        write_csv(path, header, rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let (header, rows) = read_csv(path)?;
        let with_stress = header.len() == 5;
        let mut locations: Vec<f64> = Vec::new();
        for r in &rows {
            if locations.contains(&r[1]) {
                break;
            }
            locations.push(r[1]);
        }
        let mut s = ProbeSeries::new(&locations, with_stress);
        for chunk in rows.chunks(locations.len().max(1)) {
            let u = chunk.iter().map(|r| r[2]).collect();
            let stress = with_stress.then(|| (chunk.iter().map(|r| r[3]).collect(), chunk.iter().map(|r| r[4]).collect()));
            s.push(chunk[0][0], u, stress);
        }
        Ok(s)
    }
}

/// File-name label of an output time: `3.0` gives `3`, `0.5` gives `0.5`.
pub fn time_label(t: f64) -> String {
    let rounded = (t * 1e6).round() / 1e6;
    format!("{rounded}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn series_round_trips_bitwise(vals in proptest::collection::vec(-1e300f64..1e300, 1..40)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.csv");
            let mut s = TimeSeries::new(&["a", "b"]);
            for (k, v) in vals.iter().enumerate() {
                s.push(k as f64 * 0.1, vec![*v, v * 1e-7 + 1.0 / 3.0]);
            }
            s.write_csv(&path).unwrap();
            let back = TimeSeries::read_csv(&path).unwrap();
            prop_assert_eq!(back, s);
        }
    }

    #[test]
    fn probes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("probes.csv");
        let mut p = ProbeSeries::new(&[0.2, 0.5], true);
        p.push(0.0, vec![0.0, 1e-17], Some((vec![0.1, 0.2], vec![0.3, f64::MIN_POSITIVE])));
        p.push(0.01, vec![1.0 / 3.0, 2.0], Some((vec![-0.1, 0.2], vec![0.3, 0.4])));
        p.write_csv(&path).unwrap();
        assert_eq!(ProbeSeries::read_csv(&path).unwrap(), p);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,location,u,tau12,n1\n"));
    }

    #[test]
    fn labels() {
        assert_eq!(time_label(3.0), "3");
        assert_eq!(time_label(8.000000000001), "8");
        assert_eq!(time_label(0.5), "0.5");
    }
}
