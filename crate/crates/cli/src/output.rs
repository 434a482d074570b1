use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// One CSV cell: integers as such, reals with 17 significant digits.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(usize),
    Real(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(n) => n.to_string(),
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// CSV file flushed after every row, so a failed run keeps what it finished.
pub struct CsvSink {
    writer: csv::Writer<File>,
    path: PathBuf,
    width: usize,
    rows: usize,
}

impl CsvSink {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        let cols: Vec<&str> = header.split(',').collect();
        writer.write_record(&cols)?;
        writer.flush()?;
        Ok(Self {
            writer,
            path: path.to_path_buf(),
            width: cols.len(),
            rows: 0,
        })
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        assert_eq!(cells.len(), self.width, "row width does not match the header of {}", self.path.display());
        self.writer.write_record(cells.iter().map(|c| c.render()))?;
        self.writer.flush()?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Ordered `key = value` lines written to `<out>/meta`.
#[derive(Debug, Default)]
pub struct Meta {
    lines: Vec<(String, String)>,
}

impl Meta {
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("meta");
        let mut f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        for (k, v) in &self.lines {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
