use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solvers::TraceRecord;

const FLUSH_EVERY: usize = 1000;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_header(n_constraints: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "obj_est".into(), "obj_avg".into()];
    h.extend((1..=n_constraints).map(|i| format!("h{i}")));
    h.extend((1..=n_constraints).map(|i| format!("h{i}_avg")));
    h.extend(["lambda_norm".into(), "eta".into(), "upsilon".into()]);
    h
}

/// Streams trace rows to CSV, flushing every thousand rows.
pub struct TraceWriter {
    inner: csv::Writer<BufWriter<File>>,
    n_constraints: usize,
    rows: usize,
}

impl TraceWriter {
    pub fn create(path: &Path, n_constraints: usize) -> Result<Self> {
        let file = File::create(path)?;
        let mut inner = csv::WriterBuilder::new().from_writer(BufWriter::new(file));
        inner.write_record(trace_header(n_constraints))?;
        inner.flush()?;
        Ok(Self {
            inner,
            n_constraints,
            rows: 0,
        })
    }

    pub fn write(&mut self, r: &TraceRecord) -> Result<()> {
        if r.h.len() != self.n_constraints {
            return Err(Error::dim("trace row constraints", self.n_constraints, r.h.len()));
        }
        let mut fields = Vec::with_capacity(6 + 2 * self.n_constraints);
        fields.push(r.t.to_string());
        fields.push(fmt_f64(r.obj_est));
        fields.push(fmt_f64(r.obj_avg));
        fields.extend(r.h.iter().map(|v| fmt_f64(*v)));
        fields.extend(r.h_avg.iter().map(|v| fmt_f64(*v)));
        fields.push(fmt_f64(r.lambda_norm));
        fields.push(fmt_f64(r.eta));
        fields.push(fmt_f64(r.upsilon));
        self.inner.write_record(&fields)?;
        self.rows += 1;
        if self.rows.is_multiple_of(FLUSH_EVERY) {
            self.inner.flush()?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        self.inner.flush()?;
        Ok(self.rows)
    }
}

/// A trace CSV read back as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), i + 1)))?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn n_constraints(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.starts_with('h') && !c.ends_with("_avg") && c[1..].parse::<usize>().is_ok())
            .count()
    }

    pub fn records(&self) -> Result<Vec<TraceRecord>> {
        let n = self.n_constraints();
        if self.columns != trace_header(n) {
            return Err(Error::Data(format!(
                "trace columns {:?} do not match the expected schema {:?}",
                self.columns,
                trace_header(n)
            )));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| TraceRecord {
                t: r[0] as usize,
                obj_est: r[1],
                obj_avg: r[2],
                h: r[3..3 + n].to_vec(),
                h_avg: r[3 + n..3 + 2 * n].to_vec(),
                lambda_norm: r[3 + 2 * n],
                eta: r[4 + 2 * n],
                upsilon: r[5 + 2 * n],
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rec = TraceRecord {
            t: 3,
            obj_est: 0.1 + 0.2,
            obj_avg: 1.0 / 3.0,
            h: vec![-1e-300, 2.5],
            h_avg: vec![std::f64::consts::PI, -0.0],
            lambda_norm: 7.0,
            eta: 1e-3,
            upsilon: 0.0,
        };
        let mut w = TraceWriter::create(&path, 2).unwrap();
        w.write(&rec).unwrap();
        assert_eq!(w.finish().unwrap(), 1);
        let table = TraceTable::read(&path).unwrap();
        assert_eq!(table.columns[3], "h1");
        assert_eq!(table.records().unwrap(), vec![rec]);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }
}
