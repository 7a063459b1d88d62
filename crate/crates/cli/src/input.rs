//! CSV ingestion for contingency tables and raw respondent-by-item data.

use std::collections::BTreeSet;
use std::path::Path;

use clap::ValueEnum;
use polycor::matrix::OrdinalDataset;
use polycor::ContingencyTable;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Header row of item names, one row per respondent.
    Raw,
    /// Grid of counts with an optional header row.
    Table,
}

/// Raw data with category codes renumbered to `1..=K` per item.
#[derive(Debug, Clone)]
pub struct RawData {
    pub dataset: OrdinalDataset,
    /// Original code of each normalized category, per item.
    pub labels: Vec<Vec<i64>>,
}

#[derive(Debug, Clone)]
pub enum Input {
    Table(ContingencyTable),
    Raw(RawData),
}

struct Row {
    line: u64,
    fields: Vec<String>,
}

fn records(text: &str) -> Result<Vec<Row>, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Input(format!("parse error at line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<String> = rec.iter().map(|f| f.trim().to_string()).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(Row { line, fields });
    }
    if rows.is_empty() {
        return Err(CliError::Input("input is empty".into()));
    }
    Ok(rows)
}

fn is_numeric_row(row: &Row) -> bool {
    row.fields.iter().all(|f| f.parse::<i64>().is_ok())
}

pub fn read(path: &Path, format: Option<Format>) -> Result<Input, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse(&text, format)
}

/// Without an explicit format, an all-integer first row means a table and
/// anything else is taken as the header of raw data.
pub fn parse(text: &str, format: Option<Format>) -> Result<Input, CliError> {
    let rows = records(text)?;
    let format = format.unwrap_or(if is_numeric_row(&rows[0]) { Format::Table } else { Format::Raw });
    match format {
        Format::Table => parse_table(rows).map(Input::Table),
        Format::Raw => parse_raw(rows).map(Input::Raw),
    }
}

fn check_width(row: &Row, width: usize) -> Result<(), CliError> {
    if row.fields.len() != width {
        return Err(CliError::Input(format!(
            "parse error at line {}: expected {width} fields, found {}",
            row.line,
            row.fields.len()
        )));
    }
    Ok(())
}

fn parse_table(mut rows: Vec<Row>) -> Result<ContingencyTable, CliError> {
    if !is_numeric_row(&rows[0]) {
        rows.remove(0);
    }
    let Some(first) = rows.first() else {
        return Err(CliError::Input("table has a header but no rows".into()));
    };
    let width = first.fields.len();
    let mut grid = Vec::with_capacity(rows.len());
    for row in &rows {
        check_width(row, width)?;
        let counts = row
            .fields
            .iter()
            .enumerate()
            .map(|(k, f)| {
                f.parse::<u64>().map_err(|_| {
                    CliError::Input(format!("line {}, column {}: '{f}' is not a nonnegative integer count", row.line, k + 1))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        grid.push(counts);
    }
    let table = ContingencyTable::from_rows(&grid).map_err(CliError::from)?;
    Ok(table)
}

fn parse_raw(rows: Vec<Row>) -> Result<RawData, CliError> {
    let header = &rows[0];
    let names = header.fields.clone();
    if names.iter().any(|n| n.is_empty()) {
        return Err(CliError::Input(format!("line {}: empty item name in header", header.line)));
    }
    if names.iter().collect::<BTreeSet<_>>().len() != names.len() {
        return Err(CliError::Input(format!("line {}: duplicate item names in header", header.line)));
    }
    let q = names.len();
    let mut codes: Vec<Vec<Option<i64>>> = vec![Vec::with_capacity(rows.len()); q];
    for row in &rows[1..] {
        check_width(row, q)?;
        for (k, f) in row.fields.iter().enumerate() {
            let v = if f.is_empty() || f == "NA" {
                None
            } else {
                Some(f.parse::<i64>().map_err(|_| {
                    CliError::Input(format!("line {}, item '{}': '{f}' is not an integer code", row.line, names[k]))
                })?)
            };
            codes[k].push(v);
        }
    }
    let mut labels = Vec::with_capacity(q);
    let mut columns = Vec::with_capacity(q);
    for col in codes {
        let observed: Vec<i64> = col.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let normalized = col
            .iter()
            .map(|v| v.map(|c| observed.binary_search(&c).expect("observed") as u32 + 1))
            .collect();
        labels.push(observed);
        columns.push(normalized);
    }
    let dataset = OrdinalDataset::new(names, columns).map_err(CliError::from)?;
    Ok(RawData { dataset, labels })
}

/// Category counts and a note on empty categories, for stderr.
pub fn describe_table(table: &ContingencyTable) -> Vec<String> {
    let mut notes = vec![format!(
        "note: {}x{} table with N = {}; frequencies are counts divided by N",
        table.kx(),
        table.ky(),
        table.total()
    )];
    for (margin, totals) in [("row", table.row_totals()), ("column", table.col_totals())] {
        for (k, t) in totals.iter().enumerate() {
            if *t == 0 {
                notes.push(format!("warning: {margin} category {} has no observations", k + 1));
            }
        }
    }
    notes
}
