//! Fixed-schema CSV tables: header row, '.' radix, newline-terminated rows.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Shortest round-trip decimal; negative zero prints as 0.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// A rectangular table of optional numbers; `None` is an empty cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push(row.iter().copied().map(Some).collect());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, idx: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if let Some(x) = cell {
                    let _ = write!(out, "{}", format_f64(*x));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse(text: &str, path: &str) -> Result<Table> {
        let err = |message: String| Error::Csv { path: path.to_string(), message };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some(h) => h.split(',').map(|s| s.trim().to_string()).collect(),
            None => return Err(err("missing header row".into())),
        };
        if header.iter().any(|h| h.is_empty()) {
            return Err(err("empty column name in header".into()));
        }
        let mut table = Table::new(header);
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != table.header.len() {
                return Err(err(format!("row {} has {} cells, expected {}", i + 1, cells.len(), table.header.len())));
            }
            let row = cells
                .iter()
                .map(|c| {
                    let c = c.trim();
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>().map(Some).map_err(|_| err(format!("row {}: `{c}` is not a number", i + 1)))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Csv { path: path.display().to_string(), message: e.to_string() })?;
        Table::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(format_f64(-0.0), "0");
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(60.0), "60");
        assert_eq!(format_f64(-1.5), "-1.5");
        let x = 0.1 + 0.2;
        assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn round_trip_with_empty_cells() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec![Some(1.0), None]);
        t.push(vec![Some(-0.25), Some(3.0)]);
        let text = t.to_csv();
        assert_eq!(text, "a,b\n1,\n-0.25,3\n");
        assert_eq!(Table::parse(&text, "x").unwrap(), t);
    }

    #[test]
    fn malformed() {
        assert!(Table::parse("", "x").is_err());
        assert!(Table::parse("a,b\n1\n", "x").is_err());
        assert!(Table::parse("a,b\n1,zz\n", "x").is_err());
    }
}
