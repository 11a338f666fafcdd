// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Result tables and their CSV, schema and SVG renderings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, ScenarioConfig};
use crate::error::CliError;
use crate::svg;

pub const VERSION: &str = env!("EITLAB_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub description: String,
}

pub fn col(name: &str, unit: &str, description: &str) -> Column {
    Column {
        name: name.into(),
        unit: unit.into(),
        description: description.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    /// Undefined for this row (see the status column).
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }

    pub fn text(s: &str) -> Cell {
        Cell::Text(s.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) if *v == 0.0 || (1e-4..1e6).contains(&v.abs()) => format!("{v}"),
            Cell::Num(v) => format!("{v:e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// Shortest round-trip text of `v`, in exponent form outside `[1e-4, 1e6)`.
pub fn num(v: f64) -> String {
    Cell::Num(v).render()
}

/// Series to draw: `x` column against `ys` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub x: String,
    pub ys: Vec<String>,
    pub y_label: String,
    pub log_y: bool,
    /// Column whose distinct values split each series.
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key: value` metadata lines.
    pub notes: Vec<(String, String)>,
    pub plot: Option<Plot>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<Column>) -> Self {
        Table {
            name: name.into(),
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
            plot: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric values of column `name`, `None` for empty cells.
    pub fn values(&self, name: &str) -> Vec<Option<f64>> {
        let k = self.column(name).unwrap_or_else(|| panic!("no column {name} in {}", self.name));
        self.rows.iter().map(|r| r[k].as_f64()).collect()
    }

    pub fn texts(&self, name: &str) -> Vec<String> {
        let k = self.column(name).unwrap_or_else(|| panic!("no column {name} in {}", self.name));
        self.rows.iter().map(|r| r[k].render()).collect()
    }

    pub fn note_value(&self, key: &str) -> Option<&str> {
        self.notes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// RFC 4180 CSV preceded by `#` metadata lines.
    pub fn to_csv(&self, config: &ScenarioConfig) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        // the output location does not change the numbers
        let mut resolved = serde_json::to_value(config).map_err(|e| CliError::Output(e.to_string()))?;
        if let Some(obj) = resolved.as_object_mut() {
            obj.remove("output");
        }
        let mut meta = vec![
            ("eitlab".to_string(), VERSION.to_string()),
            ("mode".to_string(), config.run.mode.to_string()),
            ("seed".to_string(), config.run.seed.to_string()),
            ("config".to_string(), resolved.to_string()),
        ];
        meta.extend(self.notes.iter().cloned());
        for (k, v) in meta {
            out.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        w.write_record(&header).map_err(|e| CliError::Output(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .map_err(|e| CliError::Output(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn schema_json(&self) -> String {
        #[derive(Serialize)]
        struct Schema<'a> {
            table: &'a str,
            metadata_prefix: &'a str,
            empty_cell: &'a str,
            columns: &'a [Column],
        }
        serde_json::to_string_pretty(&Schema {
            table: &self.name,
            metadata_prefix: "#",
            empty_cell: "value undefined for this row; see the status column",
            columns: &self.columns,
        })
        .expect("schema is serializable")
    }
}

/// Writes every table plus the resolved configuration into the output
/// directory and returns the paths written.
pub fn write_outputs(config: &ScenarioConfig, tables: &[Table]) -> Result<Vec<PathBuf>, CliError> {
    let dir = Path::new(&config.output.directory);
    fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        written.push(path);
        Ok(())
    };
    let mut resolved = serde_json::to_string_pretty(config).map_err(|e| CliError::Output(e.to_string()))?;
    resolved.push('\n');
    put(format!("{}.resolved.json", config.run.mode), resolved.as_bytes())?;
    for t in tables {
        put(format!("{}.csv", t.name), &t.to_csv(config)?)?;
        put(format!("{}.schema.json", t.name), t.schema_json().as_bytes())?;
        if config.output.formats.contains(&Format::Svg) {
            if let Some(doc) = svg::render(t) {
                put(format!("{}.svg", t.name), doc.as_bytes())?;
            }
        }
    }
    Ok(written)
}
