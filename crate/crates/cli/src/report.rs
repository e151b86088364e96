//! Self-describing experiment output. Every file starts with a metadata
//! header (subcommand, config echo, seed, library version) so a result can
//! be traced back to the exact invocation that produced it. Reruns with the
//! same config and seed are byte-identical.

use std::io::Write;
use std::path::Path;

/// One table cell. Floats print with Rust's shortest round-trip formatting,
/// so parsing the output back recovers the exact f64.
#[derive(Debug, Clone)]
pub enum Cell {
    U(u64),
    F(f64),
    S(String),
    Empty,
}

impl Cell {
    pub fn b(v: bool) -> Cell {
        Cell::S(v.to_string())
    }

    fn csv(&self) -> String {
        match self {
            Cell::U(v) => v.to_string(),
            Cell::F(v) => v.to_string(),
            Cell::S(v) => csv_escape(v),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::U(v) => serde_json::Value::from(*v),
            Cell::F(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Cell::S(v) => serde_json::Value::from(v.as_str()),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Report {
    pub subcommand: &'static str,
    pub seed: u64,
    pub config: Vec<(&'static str, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Trailing summary lines (fitted slopes and the like); rendered as
    /// `# key: value` after the rows in CSV, and as a "notes" object in JSON.
    pub notes: Vec<(&'static str, String)>,
}

impl Report {
    pub fn new(subcommand: &'static str, seed: u64) -> Report {
        Report {
            subcommand,
            seed,
            config: Vec::new(),
            columns: Vec::new(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &'static str, value: impl std::fmt::Display) {
        self.config.push((key, value.to_string()));
    }

    pub fn note(&mut self, key: &'static str, value: impl std::fmt::Display) {
        self.notes.push((key, value.to_string()));
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# subcommand: {}\n", self.subcommand));
        for (k, v) in &self.config {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str(&format!("# seed: {}\n", self.seed));
        s.push_str(&format!("# version: {}\n", kerndual::VERSION));
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        for (k, v) in &self.notes {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s
    }

    fn render_json(&self) -> String {
        let config: serde_json::Map<String, serde_json::Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::Value::from(v.as_str())))
            .collect();
        let notes: serde_json::Map<String, serde_json::Value> = self
            .notes
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::Value::from(v.as_str())))
            .collect();
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| serde_json::Value::Array(row.iter().map(Cell::json).collect()))
            .collect();
        let doc = serde_json::json!({
            "subcommand": self.subcommand,
            "config": config,
            "seed": self.seed,
            "version": kerndual::VERSION,
            "columns": self.columns,
            "rows": rows,
            "notes": notes,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn write(&self, format: Format, out: Option<&Path>) -> std::io::Result<()> {
        let body = self.render(format);
        match out {
            Some(path) => std::fs::write(path, body),
            None => std::io::stdout().write_all(body.as_bytes()),
        }
    }
}
