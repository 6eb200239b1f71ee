use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An i.i.d. sample of path delays: `N` observations of `n` monitor paths.
///
/// Stored column-major; column `j` holds every observation of path `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaySample {
    path_ids: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl DelaySample {
    pub fn from_columns(path_ids: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if path_ids.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} path labels for {} columns",
                path_ids.len(),
                columns.len()
            )));
        }
        if columns.is_empty() {
            return Err(Error::invalid("sample has no paths"));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("sample columns differ in length".into()));
        }
        if rows < 2 {
            return Err(Error::SampleTooSmall { needed: 1, got: rows });
        }
        for (j, col) in columns.iter().enumerate() {
            if let Some(r) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite delay at row {}, path {}",
                    r + 1,
                    path_ids[j]
                )));
            }
        }
        Ok(DelaySample { path_ids, columns })
    }

    /// Build from row-major observations.
    pub fn from_rows(path_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = path_ids.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); n];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!("row {} has {} values, expected {n}", r + 1, row.len())));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        DelaySample::from_columns(path_ids, columns)
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of monitor paths.
    pub fn paths(&self) -> usize {
        self.columns.len()
    }

    pub fn path_ids(&self) -> &[String] {
        &self.path_ids
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Rows `indices` in the given order, as a new sample.
    pub fn select_rows(&self, indices: &[usize]) -> Result<DelaySample> {
        let columns = self
            .columns
            .iter()
            .map(|c| indices.iter().map(|&i| c[i]).collect())
            .collect();
        DelaySample::from_columns(self.path_ids.clone(), columns)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let path_ids: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let row = rec
                .iter()
                .enumerate()
                .map(|(j, field)| {
                    field.trim().parse::<f64>().map_err(|_| {
                        Error::invalid(format!("line {line}, column {}: cannot parse {field:?} as a number", j + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        DelaySample::from_rows(path_ids, &rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let input = |msg: String| Error::Input {
            path: path.to_path_buf(),
            msg,
        };
        let file = std::fs::File::open(path).map_err(|e| input(e.to_string()))?;
        DelaySample::read_csv(std::io::BufReader::new(file)).map_err(|e| input(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        w.write_record(&self.path_ids)?;
        let mut buf = Vec::with_capacity(self.paths());
        for r in 0..self.len() {
            buf.clear();
            buf.extend(self.columns.iter().map(|c| c[r].to_string()));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
