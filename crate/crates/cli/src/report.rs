//! Tabular results rendered as CSV (17 significant digits, `#` comment header) or JSON.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    /// No value, e.g. for an order whose resonance was not found.
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(i64::from(x))
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_owned())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// Round-trip representation of a double.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => number(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json!(x),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

pub struct Report {
    pub command: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra top-level entries; in CSV each becomes a trailing comment line.
    pub summary: Map<String, Value>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, columns: Vec<&'static str>) -> Self {
        Report {
            command,
            columns,
            rows: Vec::new(),
            summary: Map::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn summarize(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_owned(), value);
    }

    fn units(config: &RunConfig) -> String {
        format!(
            "hbar = c = k_B = 1; radius R = {}; frequencies and temperatures in the inverse length unit of R",
            config.radius
        )
    }

    pub fn write(&self, config: &RunConfig, out: &mut dyn Write) -> std::io::Result<()> {
        match config.format {
            Format::Csv => self.write_csv(config, out),
            Format::Json => self.write_json(config, out),
        }
    }

    fn write_csv(&self, config: &RunConfig, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(
            out,
            "# plasmashell {} {}",
            plasmashell::VERSION,
            self.command
        )?;
        writeln!(out, "# units: {}", Self::units(config))?;
        writeln!(
            out,
            "# config: {}",
            serde_json::to_string(config).unwrap_or_default()
        )?;
        for note in &self.notes {
            writeln!(out, "# note: {note}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        for (key, value) in &self.summary {
            writeln!(out, "# {key}: {value}")?;
        }
        Ok(())
    }

    fn write_json(&self, config: &RunConfig, out: &mut dyn Write) -> std::io::Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| ((*c).to_owned(), v.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert(
            "meta".into(),
            json!({
                "command": self.command,
                "version": plasmashell::VERSION,
                "units": Self::units(config),
                "config": config,
                "notes": self.notes,
            }),
        );
        doc.insert("columns".into(), json!(self.columns));
        doc.insert("rows".into(), Value::Array(rows));
        for (k, v) in &self.summary {
            doc.insert(k.clone(), v.clone());
        }
        serde_json::to_writer_pretty(&mut *out, &Value::Object(doc))?;
        writeln!(out)
    }
}
