use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// A numeric table destined for one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    /// Extra `#` lines written after the provenance line.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<&'static str>) -> Self {
        Table {
            name: name.into(),
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Writes `<dir>/<name>.csv` and returns its path.
    pub fn write(&self, dir: &Path, provenance: &str) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.name));
        let io = |source| CliError::Output {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(dir).map_err(io)?;
        let mut file = BufWriter::new(File::create(&path).map_err(io)?);
        writeln!(file, "# {provenance}").map_err(io)?;
        for note in &self.notes {
            writeln!(file, "# {note}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |e: csv::Error| io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.12e}")))
                .map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(path)
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}
