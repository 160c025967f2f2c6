//! Tabular output with a provenance header, as CSV or JSON lines.

use std::io::Write;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => format_float(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::F(x) if x.is_finite() => serde_json::Value::from(*x),
            Cell::F(_) => serde_json::Value::Null,
            Cell::I(i) => serde_json::Value::from(*i),
            Cell::S(s) => serde_json::Value::from(s.as_str()),
            Cell::B(b) => serde_json::Value::from(*b),
        }
    }
}

/// Shortest round-trip representation in scientific notation.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Ordered `key = value` provenance entries.
pub type Header = Vec<(String, String)>;

pub fn write_table<W: Write>(
    out: W,
    table: &Table,
    header: &Header,
    format: Format,
) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(out, table, header),
        Format::Jsonl => write_jsonl(out, table, header),
    }
}

fn write_csv<W: Write>(mut out: W, table: &Table, header: &Header) -> Result<(), CliError> {
    for (k, v) in header {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_jsonl<W: Write>(mut out: W, table: &Table, header: &Header) -> Result<(), CliError> {
    let mut meta = serde_json::Map::new();
    for (k, v) in header {
        meta.insert(k.clone(), serde_json::Value::from(v.as_str()));
    }
    let mut first = serde_json::Map::new();
    first.insert("meta".into(), serde_json::Value::Object(meta));
    writeln!(out, "{}", serde_json::Value::Object(first))?;
    for row in &table.rows {
        // Built by hand to keep column order.
        let fields: Vec<String> = table
            .columns
            .iter()
            .zip(row)
            .map(|(c, v)| format!("{}:{}", serde_json::Value::from(*c), v.json()))
            .collect();
        writeln!(out, "{{{}}}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}
