//! Run records, tolerance checks and their serialized forms.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

use crate::error::RunError;

/// One tolerance verdict inside a run record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn compare(
        name: impl Into<String>,
        value: f64,
        relation: &'static str,
        limit: f64,
        pass: bool,
    ) -> Self {
        Self {
            name: name.into(),
            pass,
            value: Some(value),
            relation: Some(relation),
            limit: Some(limit),
            detail: None,
        }
    }

    /// value <= limit
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::compare(name, value, "<=", limit, value <= limit)
    }

    /// value < limit
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::compare(name, value, "<", limit, value < limit)
    }

    /// value > limit
    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::compare(name, value, ">", limit, value > limit)
    }

    /// value >= limit
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::compare(name, value, ">=", limit, value >= limit)
    }

    pub fn holds(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            value: None,
            relation: None,
            limit: None,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name)?;
        if let (Some(v), Some(r), Some(l)) = (self.value, self.relation, self.limit) {
            write!(f, ": {v:e} {r} {l:e} does not hold")?;
        }
        if let Some(d) = &self.detail {
            write!(f, " ({d})")?;
        }
        Ok(())
    }
}

/// Configuration as actually used: defaults, flags and file overrides merged.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig<P> {
    pub seed: u64,
    pub workers: usize,
    pub shards: u32,
    pub params: P,
}

/// Top-level JSON document of one run.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a, P, R> {
    pub command: &'static str,
    pub config: &'a ResolvedConfig<P>,
    #[serde(flatten)]
    pub result: &'a R,
    pub checks: &'a [Check],
    pub pass: bool,
}

/// Rows of numbers with named columns, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| format_float(v)))?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV of ASCII numbers"))
    }
}

/// One plotted point with its error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub yerr: f64,
}

impl PlotPoint {
    pub fn exact(x: f64, y: f64) -> Self {
        Self { x, y, yerr: 0.0 }
    }
}

/// CSV with columns x, y, yerr, ready for an external plotting tool.
pub fn emit_plotdata(points: &[PlotPoint]) -> Result<String, RunError> {
    let mut table = Table::new(vec!["x", "y", "yerr"]);
    for p in points {
        table.push(vec![p.x, p.y, p.yerr]);
    }
    table.to_csv()
}

/// 17 significant digits in scientific notation; non-finite values spelled out.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn write_null<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(writer)
    }
}

/// Compact JSON with every float written to 17 significant digits.
/// Non-finite floats become null.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, RunError> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SeventeenDigits);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}
