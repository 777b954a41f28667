//! Series and panel handling: FRED-style CSV snapshots, calendar alignment,
//! differencing, and scaling.
//!
//! Every model downstream consumes either a [`TimeSeries`] (one named,
//! date-indexed column) or a [`Panel`] (several series on a shared calendar).
//! Transforms here are pure; the differencing and scaling operations carry
//! exact inverses and the tests hold them to round-trip identities.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How missing observations ("." or empty in FRED files) are handled at load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop the row entirely.
    Drop,
    /// Carry the last observed value forward. Leading missing rows are dropped.
    ForwardFill,
}

/// Record of what cleaning did to a loaded series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningStats {
    pub dropped: usize,
    pub filled: usize,
}

/// A named, date-indexed sequence of observations.
///
/// Invariants: dates strictly increasing, one value per date, all values
/// finite. Constructors enforce them.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    cleaning: CleaningStats,
}

impl TimeSeries {
    pub fn new(
        name: impl Into<String>,
        dates: Vec<NaiveDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if dates.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "series `{name}`: {} dates vs {} values",
                dates.len(),
                values.len()
            )));
        }
        if dates.is_empty() {
            return Err(Error::EmptySeries(name));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                if w[1] == w[0] {
                    return Err(Error::DuplicateDate {
                        name,
                        date: w[0].to_string(),
                    });
                }
                return Err(Error::InvalidParameter(format!(
                    "series `{name}`: dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "series `{name}`: non-finite value {bad}"
            )));
        }
        Ok(TimeSeries {
            name,
            dates,
            values,
            cleaning: CleaningStats::default(),
        })
    }

    /// Convenience constructor with a synthetic daily calendar, for model code
    /// that operates on plain vectors (residuals, simulations).
    pub fn from_values(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let dates = (0..values.len() as i64)
            .map(|i| start + chrono::Duration::days(i))
            .collect();
        TimeSeries::new(name, dates, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cleaning(&self) -> CleaningStats {
        self.cleaning
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Restrict to dates in [start, end] (inclusive); `None` leaves that side open.
    pub fn window(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Result<Self> {
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for (d, v) in self.dates.iter().zip(self.values.iter()) {
            if start.is_some_and(|s| *d < s) || end.is_some_and(|e| *d > e) {
                continue;
            }
            dates.push(*d);
            values.push(*v);
        }
        if dates.is_empty() {
            return Err(Error::EmptySeries(format!("{} (window)", self.name)));
        }
        TimeSeries::new(self.name.clone(), dates, values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// Loads a two-column FRED-style CSV: header then `date,value` rows,
/// ISO-8601 dates, "." or empty for missing observations.
///
/// The series name is taken from the second header field when present
/// (FRED's `observation_date,<SERIES_ID>` layout), otherwise from the file
/// stem. Rows are sorted by date; cleaning counts land in the metadata.
pub fn load_fred_csv(path: impl AsRef<Path>, policy: MissingPolicy) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "series".to_string());
    parse_fred_csv(&text, &stem, &path.display().to_string(), policy)
}

fn parse_fred_csv(
    text: &str,
    fallback_name: &str,
    path: &str,
    policy: MissingPolicy,
) -> Result<TimeSeries> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => break (i, l),
            None => return Err(Error::EmptySeries(fallback_name.to_string())),
        }
    };
    let header_fields: Vec<&str> = header.1.split(',').map(str::trim).collect();
    if header_fields.len() != 2 {
        return Err(Error::Csv {
            path: path.to_string(),
            line: header.0 + 1,
            message: format!("expected two header columns, got {}", header_fields.len()),
        });
    }
    let name = match header_fields[1] {
        "" | "VALUE" | "value" => fallback_name.to_string(),
        other => other.to_string(),
    };

    let mut rows: Vec<(NaiveDate, Option<f64>)> = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let date_str = parts.next().unwrap_or("").trim();
        let value_str = parts.next().unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|e| Error::Csv {
            path: path.to_string(),
            line: i + 1,
            message: format!("bad date `{date_str}`: {e}"),
        })?;
        let value = if value_str.is_empty() || value_str == "." {
            None
        } else {
            Some(value_str.parse::<f64>().map_err(|e| Error::Csv {
                path: path.to_string(),
                line: i + 1,
                message: format!("bad value `{value_str}`: {e}"),
            })?)
        };
        rows.push((date, value));
    }
    rows.sort_by_key(|(d, _)| *d);

    let mut dates = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    let mut stats = CleaningStats::default();
    let mut last: Option<f64> = None;
    for (date, value) in rows {
        match value {
            Some(v) => {
                last = Some(v);
                dates.push(date);
                values.push(v);
            }
            None => match policy {
                MissingPolicy::Drop => stats.dropped += 1,
                MissingPolicy::ForwardFill => match last {
                    Some(v) => {
                        stats.filled += 1;
                        dates.push(date);
                        values.push(v);
                    }
                    None => stats.dropped += 1,
                },
            },
        }
    }
    if dates.is_empty() {
        return Err(Error::EmptySeries(name));
    }
    let mut series = TimeSeries::new(name, dates, values)?;
    series.cleaning = stats;
    Ok(series)
}

/// Several series aligned on a shared calendar. Column names are unique and
/// values correspond positionally to the calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    calendar: Vec<NaiveDate>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(calendar: Vec<NaiveDate>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names vs {} columns",
                names.len(),
                columns.len()
            )));
        }
        for (n, c) in names.iter().zip(columns.iter()) {
            if c.len() != calendar.len() {
                return Err(Error::DimensionMismatch(format!(
                    "column `{n}` has {} rows, calendar has {}",
                    c.len(),
                    calendar.len()
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(Error::DuplicateColumn(n.clone()));
            }
        }
        Ok(Panel {
            calendar,
            names,
            columns,
        })
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.calendar.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let idx = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))?;
        Ok(&self.columns[idx])
    }

    pub fn column_at(&self, idx: usize) -> &[f64] {
        &self.columns[idx]
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    /// The column as a standalone series on the panel calendar.
    pub fn series(&self, name: &str) -> Result<TimeSeries> {
        let col = self.column(name)?.to_vec();
        TimeSeries::new(name, self.calendar.clone(), col)
    }

    /// Reorder / subset columns by name.
    pub fn select(&self, names: &[&str]) -> Result<Panel> {
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            cols.push(self.column(n)?.to_vec());
        }
        Panel::new(
            self.calendar.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            cols,
        )
    }

    /// Restrict rows to [start, end] inclusive.
    pub fn window(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Result<Panel> {
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&i| {
                let d = self.calendar[i];
                !(start.is_some_and(|s| d < s) || end.is_some_and(|e| d > e))
            })
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyIntersection);
        }
        let calendar = keep.iter().map(|&i| self.calendar[i]).collect();
        let columns = self
            .columns
            .iter()
            .map(|c| keep.iter().map(|&i| c[i]).collect())
            .collect();
        Panel::new(calendar, self.names.clone(), columns)
    }

    /// Rows [from, to) as a new panel.
    pub fn slice_rows(&self, from: usize, to: usize) -> Panel {
        Panel {
            calendar: self.calendar[from..to].to_vec(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[from..to].to_vec()).collect(),
        }
    }

    /// Serializes as CSV: first column `date`, then one named column per series.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("date");
        for n in &self.names {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for (i, d) in self.calendar.iter().enumerate() {
            let _ = write!(out, "{d}");
            for c in &self.columns {
                let _ = write!(out, ",{}", format_float(c[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the `to_csv` format back.
    pub fn from_csv(text: &str, path: &str) -> Result<Panel> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::EmptyIntersection)?;
        let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let mut calendar = Vec::new();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != names.len() + 1 {
                return Err(Error::Csv {
                    path: path.to_string(),
                    line: i + 1,
                    message: format!("expected {} fields, got {}", names.len() + 1, fields.len()),
                });
            }
            let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d").map_err(|e| Error::Csv {
                path: path.to_string(),
                line: i + 1,
                message: format!("bad date `{}`: {e}", fields[0]),
            })?;
            calendar.push(date);
            for (j, f) in fields[1..].iter().enumerate() {
                columns[j].push(f.parse::<f64>().map_err(|e| Error::Csv {
                    path: path.to_string(),
                    line: i + 1,
                    message: format!("bad value `{f}`: {e}"),
                })?);
            }
        }
        Panel::new(calendar, names, columns)
    }
}

fn format_float(v: f64) -> String {
    // Shortest representation that round-trips exactly.
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Inner-joins the series onto their shared calendar.
pub fn align_panel(series: &[TimeSeries]) -> Result<Panel> {
    if series.len() < 2 {
        return Err(Error::InvalidParameter(
            "align_panel needs at least two series".to_string(),
        ));
    }
    let mut shared: BTreeSet<NaiveDate> = series[0].dates().iter().copied().collect();
    for s in &series[1..] {
        let dates: BTreeSet<NaiveDate> = s.dates().iter().copied().collect();
        shared = shared.intersection(&dates).copied().collect();
    }
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let calendar: Vec<NaiveDate> = shared.into_iter().collect();
    let mut columns = Vec::with_capacity(series.len());
    let mut names = Vec::with_capacity(series.len());
    for s in series {
        let mut col = Vec::with_capacity(calendar.len());
        let mut cursor = 0usize;
        for d in &calendar {
            while s.dates()[cursor] < *d {
                cursor += 1;
            }
            debug_assert_eq!(s.dates()[cursor], *d);
            col.push(s.values()[cursor]);
        }
        columns.push(col);
        names.push(s.name().to_string());
    }
    Panel::new(calendar, names, columns)
}

/// Applies `order` rounds of first differencing. The output keeps the
/// trailing dates: value_t = x_t - x_{t-1}, applied `order` times.
pub fn difference(series: &TimeSeries, order: usize) -> Result<TimeSeries> {
    if order == 0 {
        return Ok(series.clone());
    }
    if series.len() <= order {
        return Err(Error::SeriesTooShort {
            name: series.name().to_string(),
            len: series.len(),
            need: order + 1,
        });
    }
    let mut values = series.values().to_vec();
    for _ in 0..order {
        values = values.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let dates = series.dates()[order..].to_vec();
    TimeSeries::new(series.name().to_string(), dates, values)
}

/// Inverts `difference`. `initial` must hold the `d` leading values that the
/// differencing consumed, oldest first.
pub fn invert_difference(diff: &TimeSeries, initial: &[f64]) -> Result<TimeSeries> {
    let d = initial.len();
    if d == 0 {
        return Ok(diff.clone());
    }
    // Rebuild one order at a time: the head values of each intermediate level
    // are recovered by forward differencing of `initial`.
    let mut heads: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut cur = initial.to_vec();
    heads.push(cur.clone());
    for _ in 1..d {
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
        heads.push(cur.clone());
    }
    let mut values = diff.values().to_vec();
    for level in (0..d).rev() {
        let head = heads[level][d - level - 1]; // last value of this level's consumed prefix
        let mut rebuilt = Vec::with_capacity(values.len());
        let mut acc = head;
        for v in &values {
            acc += v;
            rebuilt.push(acc);
        }
        values = rebuilt;
    }
    TimeSeries::new(diff.name().to_string(), diff.dates().to_vec(), values)
}

/// Scaling family: min-max to a target range, or standardization to zero
/// mean and unit variance (population variance, matching the PCA convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    MinMax,
    Standardize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub kind: ScalerKind,
    pub columns: Vec<ColumnScale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    /// Transform is (x - offset) / scale * span + shift.
    pub offset: f64,
    pub scale: f64,
    pub span: f64,
    pub shift: f64,
}

impl ScalerParams {
    pub fn column(&self, name: &str) -> Result<&ColumnScale> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))
    }

    pub fn apply_value(&self, name: &str, x: f64) -> Result<f64> {
        let c = self.column(name)?;
        Ok((x - c.offset) / c.scale * c.span + c.shift)
    }

    pub fn invert_value(&self, name: &str, y: f64) -> Result<f64> {
        let c = self.column(name)?;
        Ok((y - c.shift) / c.span * c.scale + c.offset)
    }
}

/// Fits per-column scaling parameters. `range` applies to min-max only and
/// defaults to (0, 1).
pub fn fit_scaler(panel: &Panel, kind: ScalerKind, range: Option<(f64, f64)>) -> Result<ScalerParams> {
    let (lo, hi) = range.unwrap_or((0.0, 1.0));
    if hi <= lo {
        return Err(Error::InvalidParameter(format!(
            "scaler range ({lo}, {hi}) is empty"
        )));
    }
    let mut columns = Vec::with_capacity(panel.n_cols());
    for (name, col) in panel.names().iter().zip(0..panel.n_cols()) {
        let values = panel.column_at(col);
        let c = match kind {
            ScalerKind::MinMax => {
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max - min <= 0.0 {
                    return Err(Error::ConstantColumn(name.clone()));
                }
                ColumnScale {
                    name: name.clone(),
                    offset: min,
                    scale: max - min,
                    span: hi - lo,
                    shift: lo,
                }
            }
            ScalerKind::Standardize => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                if var <= 0.0 {
                    return Err(Error::ConstantColumn(name.clone()));
                }
                ColumnScale {
                    name: name.clone(),
                    offset: mean,
                    scale: var.sqrt(),
                    span: 1.0,
                    shift: 0.0,
                }
            }
        };
        columns.push(c);
    }
    Ok(ScalerParams { kind, columns })
}

/// Applies fitted scaling to a panel with the same column names.
pub fn apply_scaler(panel: &Panel, params: &ScalerParams) -> Result<Panel> {
    transform_panel(panel, params, false)
}

/// Inverts fitted scaling.
pub fn invert_scaler(panel: &Panel, params: &ScalerParams) -> Result<Panel> {
    transform_panel(panel, params, true)
}

fn transform_panel(panel: &Panel, params: &ScalerParams, invert: bool) -> Result<Panel> {
    let mut columns = Vec::with_capacity(panel.n_cols());
    for (i, name) in panel.names().iter().enumerate() {
        let c = params.column(name)?;
        let col = panel
            .column_at(i)
            .iter()
            .map(|&x| {
                if invert {
                    (x - c.shift) / c.span * c.scale + c.offset
                } else {
                    (x - c.offset) / c.scale * c.span + c.shift
                }
            })
            .collect();
        columns.push(col);
    }
    Panel::new(panel.calendar().to_vec(), panel.names().to_vec(), columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn write_temp(name: &str, content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("yieldcast-data-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn load_drop_policy_removes_missing() {
        let p = write_temp(
            "drop.csv",
            "DATE,VALUE\n2020-01-01,1.0\n2020-01-02,.\n2020-01-03,2.0\n",
        );
        let s = load_fred_csv(&p, MissingPolicy::Drop).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.values(), &[1.0, 2.0]);
        assert_eq!(s.cleaning().dropped, 1);
    }

    #[test]
    fn load_forward_fill_reuses_last_value() {
        let p = write_temp(
            "fill.csv",
            "DATE,VALUE\n2020-01-01,1.0\n2020-01-02,.\n2020-01-03,2.0\n",
        );
        let s = load_fred_csv(&p, MissingPolicy::ForwardFill).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.values(), &[1.0, 1.0, 2.0]);
        assert_eq!(s.cleaning().filled, 1);
    }

    #[test]
    fn load_sorts_shuffled_dates() {
        // Hand-sorted oracle for a shuffled 10-row fixture.
        let mut rows = vec![
            ("2020-01-08", 8.0),
            ("2020-01-03", 3.0),
            ("2020-01-10", 10.0),
            ("2020-01-01", 1.0),
            ("2020-01-07", 7.0),
            ("2020-01-05", 5.0),
            ("2020-01-02", 2.0),
            ("2020-01-09", 9.0),
            ("2020-01-04", 4.0),
            ("2020-01-06", 6.0),
        ];
        let mut text = "observation_date,YIELDSP\n".to_string();
        for (dt, v) in &rows {
            text.push_str(&format!("{dt},{v}\n"));
        }
        let p = write_temp("shuffled.csv", &text);
        let s = load_fred_csv(&p, MissingPolicy::Drop).unwrap();
        assert_eq!(s.name(), "YIELDSP");
        rows.sort_by_key(|(dt, _)| d(dt));
        let want: Vec<f64> = rows.iter().map(|(_, v)| *v).collect();
        assert_eq!(s.values(), want.as_slice());
        assert!(s.dates().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn load_is_deterministic() {
        let text = "DATE,VALUE\n2020-01-01,1.5\n2020-01-02,2.5\n";
        let p1 = write_temp("det1.csv", text);
        let p2 = write_temp("det2.csv", text);
        let s1 = load_fred_csv(&p1, MissingPolicy::Drop).unwrap();
        let s2 = load_fred_csv(&p2, MissingPolicy::Drop).unwrap();
        assert_eq!(s1.values(), s2.values());
        assert_eq!(s1.dates(), s2.dates());
    }

    #[test]
    fn load_rejects_no_usable_rows() {
        let p = write_temp("empty.csv", "DATE,VALUE\n2020-01-01,.\n");
        assert!(matches!(
            load_fred_csv(&p, MissingPolicy::Drop),
            Err(Error::EmptySeries(_))
        ));
    }

    #[test]
    fn align_identity_and_intersection() {
        let a = TimeSeries::new("a", vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")],
            vec![1.0, 2.0, 3.0]).unwrap();
        let b = TimeSeries::new("b", vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")],
            vec![4.0, 5.0, 6.0]).unwrap();
        let p = align_panel(&[a.clone(), b]).unwrap();
        assert_eq!(p.n_rows(), 3);

        let c = TimeSeries::new("c", vec![d("2020-01-02"), d("2020-01-03"), d("2020-01-04")],
            vec![7.0, 8.0, 9.0]).unwrap();
        let p2 = align_panel(&[a, c]).unwrap();
        assert_eq!(p2.calendar(), &[d("2020-01-02"), d("2020-01-03")]);
        assert_eq!(p2.column("a").unwrap(), &[2.0, 3.0]);
        assert_eq!(p2.column("c").unwrap(), &[7.0, 8.0]);
    }

    #[test]
    fn align_matches_brute_force_intersection() {
        let mut rng = Rng64::new(11);
        let base = d("2020-01-01");
        let mk = |rng: &mut Rng64, name: &str| {
            let mut dates: Vec<NaiveDate> = Vec::new();
            for off in 0..60 {
                if rng.uniform() < 0.7 {
                    dates.push(base + chrono::Duration::days(off));
                }
            }
            let values: Vec<f64> = dates.iter().map(|_| rng.normal()).collect();
            TimeSeries::new(name, dates, values).unwrap()
        };
        let s1 = mk(&mut rng, "x");
        let s2 = mk(&mut rng, "y");
        let s3 = mk(&mut rng, "z");
        let brute: Vec<NaiveDate> = s1
            .dates()
            .iter()
            .filter(|dt| s2.dates().contains(dt) && s3.dates().contains(dt))
            .copied()
            .collect();
        let p = align_panel(&[s1, s2, s3]).unwrap();
        assert_eq!(p.calendar(), brute.as_slice());
    }

    #[test]
    fn align_empty_intersection_errors() {
        let a = TimeSeries::new("a", vec![d("2020-01-01")], vec![1.0]).unwrap();
        let b = TimeSeries::new("b", vec![d("2020-01-02")], vec![2.0]).unwrap();
        assert!(matches!(align_panel(&[a, b]), Err(Error::EmptyIntersection)));
    }

    #[test]
    fn difference_basics() {
        let s = TimeSeries::from_values("c", vec![5.0; 6]).unwrap();
        let diff = difference(&s, 1).unwrap();
        assert!(diff.values().iter().all(|&v| v == 0.0));
        assert_eq!(diff.len(), 5);

        let s = TimeSeries::from_values("x", vec![1.0, 3.0, 6.0, 10.0]).unwrap();
        let diff = difference(&s, 1).unwrap();
        assert_eq!(diff.values(), &[2.0, 3.0, 4.0]);
        assert_eq!(diff.dates(), &s.dates()[1..]);
    }

    #[test]
    fn difference_order_two_composes() {
        let mut rng = Rng64::new(3);
        let values: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let s = TimeSeries::from_values("r", values).unwrap();
        let d2 = difference(&s, 2).unwrap();
        let composed = difference(&difference(&s, 1).unwrap(), 1).unwrap();
        assert_eq!(d2.values(), composed.values());
        assert_eq!(d2.dates(), composed.dates());
    }

    #[test]
    fn difference_too_short_errors() {
        let s = TimeSeries::from_values("s", vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            difference(&s, 2),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn invert_difference_hand_cases() {
        let diff = TimeSeries::from_values("z", vec![0.0, 0.0, 0.0]).unwrap();
        let inv = invert_difference(&diff, &[5.0]).unwrap();
        assert_eq!(inv.values(), &[5.0, 5.0, 5.0]);

        let diff = TimeSeries::from_values("c", vec![2.0, 3.0, 4.0]).unwrap();
        let inv = invert_difference(&diff, &[1.0]).unwrap();
        assert_eq!(inv.values(), &[3.0, 6.0, 10.0]);
    }

    #[test]
    fn difference_round_trip_orders_one_and_two() {
        let mut rng = Rng64::new(9);
        let values: Vec<f64> = (0..200).map(|_| rng.normal() * 3.0 + 1.0).collect();
        let s = TimeSeries::from_values("rt", values).unwrap();
        for order in [1usize, 2] {
            let diff = difference(&s, order).unwrap();
            let inv = invert_difference(&diff, &s.values()[..order]).unwrap();
            assert_eq!(inv.len() + order, s.len());
            for (a, b) in inv.values().iter().zip(&s.values()[order..]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn minmax_endpoints_and_two_point_standardize() {
        let cal = vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")];
        let p = Panel::new(cal, vec!["a".into()], vec![vec![0.0, 5.0, 10.0]]).unwrap();
        let sc = fit_scaler(&p, ScalerKind::MinMax, Some((0.0, 1.0))).unwrap();
        let scaled = apply_scaler(&p, &sc).unwrap();
        assert_eq!(scaled.column("a").unwrap(), &[0.0, 0.5, 1.0]);

        let cal2 = vec![d("2020-01-01"), d("2020-01-02")];
        let p2 = Panel::new(cal2, vec!["b".into()], vec![vec![2.0, 4.0]]).unwrap();
        let sc2 = fit_scaler(&p2, ScalerKind::Standardize, None).unwrap();
        let scaled2 = apply_scaler(&p2, &sc2).unwrap();
        // Population SD of {2, 4} is 1, so the standardized pair is +/-1.
        assert!((scaled2.column("b").unwrap()[0] + 1.0).abs() < 1e-12);
        assert!((scaled2.column("b").unwrap()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaler_round_trip() {
        let mut rng = Rng64::new(21);
        let cal: Vec<NaiveDate> = (0..40).map(|i| d("2020-01-01") + chrono::Duration::days(i)).collect();
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..40).map(|_| rng.normal() * 4.0 + 2.0).collect())
            .collect();
        let p = Panel::new(cal, vec!["a".into(), "b".into(), "c".into()], cols).unwrap();
        for (kind, range) in [
            (ScalerKind::MinMax, Some((-1.0, 1.0))),
            (ScalerKind::Standardize, None),
        ] {
            let sc = fit_scaler(&p, kind, range).unwrap();
            let fwd = apply_scaler(&p, &sc).unwrap();
            let back = invert_scaler(&fwd, &sc).unwrap();
            for c in 0..3 {
                for (a, b) in back.column_at(c).iter().zip(p.column_at(c)) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn scaler_rejects_constant_column() {
        let cal = vec![d("2020-01-01"), d("2020-01-02")];
        let p = Panel::new(cal, vec!["k".into()], vec![vec![3.0, 3.0]]).unwrap();
        assert!(matches!(
            fit_scaler(&p, ScalerKind::MinMax, None),
            Err(Error::ConstantColumn(_))
        ));
        assert!(matches!(
            fit_scaler(&p, ScalerKind::Standardize, None),
            Err(Error::ConstantColumn(_))
        ));
    }

    #[test]
    fn panel_csv_round_trip() {
        let cal = vec![d("2020-01-01"), d("2020-01-02")];
        let p = Panel::new(
            cal,
            vec!["x".into(), "y".into()],
            vec![vec![1.25, -0.5], vec![3.0, 4.125]],
        )
        .unwrap();
        let csv = p.to_csv();
        let back = Panel::from_csv(&csv, "mem").unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn alignment_preserves_date_value_pairing() {
        // Values tagged by their dates: after alignment each value must still
        // sit at its own date.
        let mut rng = Rng64::new(5);
        let base = d("2021-06-01");
        let mk = |rng: &mut Rng64, name: &str, every: i64| {
            let dates: Vec<NaiveDate> = (0..90)
                .filter(|i| i % every == 0 || rng.uniform() < 0.5)
                .map(|i| base + chrono::Duration::days(i))
                .collect();
            let values: Vec<f64> = dates
                .iter()
                .map(|dt| (*dt - base).num_days() as f64)
                .collect();
            TimeSeries::new(name, dates, values).unwrap()
        };
        let s1 = mk(&mut rng, "p", 2);
        let s2 = mk(&mut rng, "q", 3);
        let panel = align_panel(&[s1, s2]).unwrap();
        for (i, dt) in panel.calendar().iter().enumerate() {
            let day = (*dt - base).num_days() as f64;
            assert_eq!(panel.column("p").unwrap()[i], day);
            assert_eq!(panel.column("q").unwrap()[i], day);
        }
    }
}
