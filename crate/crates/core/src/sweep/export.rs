use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Cell, SweepResult};
use crate::error::{Error, Result};
use crate::format::{fmt_f64, to_json_bytes};
use crate::methods::MethodId;

pub const CSV_HEADER: [&str; 10] = [
    "axis_param",
    "axis_value",
    "method",
    "se",
    "sp",
    "delta_se",
    "delta_sp",
    "clamped",
    "skipped",
    "skip_reason",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Format(format!("unknown format '{other}'"))),
        }
    }
}

/// One line of the flat export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub axis_param: String,
    pub axis_value: f64,
    pub method: MethodId,
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub delta_se: Option<f64>,
    pub delta_sp: Option<f64>,
    pub clamped: Option<bool>,
    pub skipped: bool,
    pub skip_reason: Option<String>,
}

/// The flat form of a sweep: one row per grid point and method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    pub rows: Vec<TableRow>,
}

impl SweepResult {
    pub fn to_table(&self) -> SweepTable {
        let axis_param = self.axis.parameter.name().to_string();
        let mut rows = Vec::with_capacity(self.rows.len() * self.methods.len());
        for row in &self.rows {
            for (method, cell) in self.methods.iter().zip(&row.cells) {
                let mut line = TableRow {
                    axis_param: axis_param.clone(),
                    axis_value: row.axis_value,
                    method: *method,
                    se: None,
                    sp: None,
                    delta_se: None,
                    delta_sp: None,
                    clamped: None,
                    skipped: false,
                    skip_reason: None,
                };
                match cell {
                    Cell::Ok { result } => {
                        line.se = Some(result.se);
                        line.sp = Some(result.sp);
                        line.delta_se = Some(result.delta_se);
                        line.delta_sp = Some(result.delta_sp);
                        line.clamped = Some(result.clamped);
                    }
                    Cell::Skipped { reason, .. } => {
                        line.skipped = true;
                        line.skip_reason = Some(reason.clone());
                    }
                }
                rows.push(line);
            }
        }
        SweepTable { rows }
    }
}

/// Either form that `import` can read back.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepData {
    Full(SweepResult),
    Table(SweepTable),
}

impl SweepData {
    pub fn to_table(&self) -> SweepTable {
        match self {
            SweepData::Full(r) => r.to_table(),
            SweepData::Table(t) => t.clone(),
        }
    }

    pub fn export(&self, format: ExportFormat) -> Vec<u8> {
        match self {
            SweepData::Full(r) => export(r, format),
            SweepData::Table(t) => export_table(t, format),
        }
    }
}

pub fn export(result: &SweepResult, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => to_json_bytes(result),
        ExportFormat::Csv => write_csv(&result.to_table()),
    }
}

pub fn export_table(table: &SweepTable, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => to_json_bytes(table),
        ExportFormat::Csv => write_csv(table),
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_csv(table: &SweepTable) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in &table.rows {
        w.write_record([
            r.axis_param.clone(),
            fmt_f64(r.axis_value),
            r.method.tag().to_string(),
            opt_num(r.se),
            opt_num(r.sp),
            opt_num(r.delta_se),
            opt_num(r.delta_sp),
            r.clamped.map(|b| b.to_string()).unwrap_or_default(),
            r.skipped.to_string(),
            r.skip_reason.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn parse_num(field: &str, name: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Format(format!("line {line}: {name} '{field}' is not a number")))
}

fn parse_bool(field: &str, name: &str, line: usize) -> Result<Option<bool>> {
    match field {
        "" => Ok(None),
        "true" => Ok(Some(true)),
        "false" => Ok(Some(false)),
        other => Err(Error::Format(format!(
            "line {line}: {name} '{other}' is not a boolean"
        ))),
    }
}

fn read_csv(bytes: &[u8]) -> Result<SweepTable> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Format(format!(
            "unexpected header, expected {}",
            CSV_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let rec = record.map_err(|e| Error::Format(e.to_string()))?;
        let f = |k: usize| rec.get(k).unwrap_or("");
        let axis_value = parse_num(f(1), "axis_value", line)?
            .ok_or_else(|| Error::Format(format!("line {line}: missing axis_value")))?;
        let skipped = parse_bool(f(8), "skipped", line)?
            .ok_or_else(|| Error::Format(format!("line {line}: missing skipped flag")))?;
        rows.push(TableRow {
            axis_param: f(0).to_string(),
            axis_value,
            method: f(2).parse()?,
            se: parse_num(f(3), "se", line)?,
            sp: parse_num(f(4), "sp", line)?,
            delta_se: parse_num(f(5), "delta_se", line)?,
            delta_sp: parse_num(f(6), "delta_sp", line)?,
            clamped: parse_bool(f(7), "clamped", line)?,
            skipped,
            skip_reason: Some(f(9)).filter(|s| !s.is_empty()).map(str::to_string),
        });
    }
    Ok(SweepTable { rows })
}

/// Read a JSON sweep (full or flat) or a CSV export.
pub fn import(bytes: &[u8]) -> Result<SweepData> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
    if text.trim_start().starts_with('{') {
        let full_err = match serde_json::from_str::<SweepResult>(text) {
            Ok(r) => return Ok(SweepData::Full(r)),
            Err(e) => e,
        };
        return serde_json::from_str::<SweepTable>(text)
            .map(SweepData::Table)
            .map_err(|e| Error::Format(format!("not a sweep result ({full_err}) or table ({e})")));
    }
    read_csv(bytes).map(SweepData::Table)
}
