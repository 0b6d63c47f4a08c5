//! Whitespace-separated text tables with `#` header lines, used for every
//! plotting/debug export (trajectories, polylines, corridors, logs).

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Table {
    comments: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            comments: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "# {}", self.columns.join(" "));
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    /// Parses a table written by [`Table::render`]. The last `#` line before
    /// the data is taken as the column header.
    pub fn parse(text: &str) -> Option<Table> {
        let mut comments = Vec::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if !rows.is_empty() {
                    return None;
                }
                comments.push(c.trim().to_string());
            } else {
                let row: Option<Vec<f64>> =
                    line.split_whitespace().map(|t| t.parse().ok()).collect();
                rows.push(row?);
            }
        }
        let header = comments.pop()?;
        let columns: Vec<String> = header.split_whitespace().map(String::from).collect();
        if rows.iter().any(|r| r.len() != columns.len()) {
            return None;
        }
        Some(Table {
            comments,
            columns,
            rows,
        })
    }
}
