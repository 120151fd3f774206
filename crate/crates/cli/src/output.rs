//! Tabular output in CSV or JSON, written through a temporary file and renamed
//! into place.

use crate::config::Format;
use crate::CliError;
use serde_json::{Map, Value};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.14e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => number(*x),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

/// JSON has no infinities; non-finite values are written as strings.
pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or_else(|| Value::from(format!("{x}")))
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let records: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut text = serde_json::to_string_pretty(&records).expect("records serialize");
                text.push('\n');
                text
            }
        }
    }

    /// Write as `<stem>.<ext>` and return the file name.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<String, CliError> {
        let name = format!("{stem}.{}", format.extension());
        write_atomic(dir, &name, self.render(format).as_bytes())?;
        Ok(name)
    }
}

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(&target)
        .map_err(|e| CliError::io(&target, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_cells_keep_fifteen_digits() {
        let mut t = Table::new(vec!["a", "b", "c"]);
        t.push(vec![
            Cell::Num(1.0 / 3.0),
            Cell::Int(-4),
            Cell::Text("x".into()),
        ]);
        t.push(vec![
            Cell::Num(f64::INFINITY),
            Cell::Int(0),
            Cell::Text("y".into()),
        ]);
        assert_eq!(
            t.render(Format::Csv),
            "a,b,c\n3.33333333333333e-1,-4,x\ninf,0,y\n"
        );
        let back: f64 = "3.33333333333333e-1".parse().unwrap();
        assert!((back - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn json_records_encode_infinity_as_text() {
        let mut t = Table::new(vec!["depth_db"]);
        t.push(vec![Cell::Num(f64::INFINITY)]);
        let v: Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(v[0]["depth_db"], Value::from("inf"));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "f.txt", b"one").unwrap();
        write_atomic(dir.path(), "f.txt", b"two").unwrap();
        assert_eq!(std::fs::read(dir.path().join("f.txt")).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
