//! Time-indexed result tables and their CSV form.
//!
//! Every solver in this crate produces a [`TrajectoryTable`]: a strictly
//! increasing time axis starting at zero plus named columns of equal length.
//! The CSV encoding is the single output format of the whole artifact, and it
//! round-trips exactly: writing uses the shortest representation that parses
//! back to the identical float, and metadata rides along as `# key=value`
//! comment lines ahead of the header.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTable<R: Real = f64> {
    times: Vec<R>,
    columns: Vec<(String, Vec<R>)>,
    metadata: BTreeMap<String, String>,
}

impl<R: Real> TrajectoryTable<R> {
    /// Creates a table over the given time axis with no columns yet.
    pub fn new(times: Vec<R>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Table("time axis must be non-empty".into()));
        }
        if times[0] != R::zero() {
            return Err(Error::Table(format!("time axis must start at 0, got {}", times[0])));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Table("time axis must be strictly increasing".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Table("time axis must be finite".into()));
        }
        Ok(Self { times, columns: Vec::new(), metadata: BTreeMap::new() })
    }

    pub fn with_columns(times: Vec<R>, columns: Vec<(&str, Vec<R>)>) -> Result<Self> {
        let mut table = Self::new(times)?;
        for (name, values) in columns {
            table.push_column(name, values)?;
        }
        Ok(table)
    }

    pub fn push_column(&mut self, name: &str, values: Vec<R>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::Table(format!(
                "column '{name}' has {} values for {} time points",
                values.len(),
                self.times.len()
            )));
        }
        if name.is_empty() || name == "t" || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Table(format!("invalid column name '{name}'")));
        }
        if self.columns.iter().any(|(existing, _)| existing == name) {
            return Err(Error::Table(format!("duplicate column name '{name}'")));
        }
        self.columns.push((name.to_string(), values));
        Ok(())
    }

    pub fn set_metadata(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn times(&self) -> &[R] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(name, _)| name.as_str())
    }

    pub fn column(&self, name: &str) -> Result<&[R]> {
        self.columns
            .iter()
            .find(|(existing, _)| existing == name)
            .map(|(_, values)| values.as_slice())
            .ok_or_else(|| Error::Table(format!("no column named '{name}'")))
    }

    /// Checks that another table shares this table's time axis exactly.
    pub fn require_same_grid(&self, other: &Self) -> Result<()> {
        if self.times != other.times {
            return Err(Error::Grid("tables are on different time grids".into()));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (key, value) in &self.metadata {
            writeln!(w, "# {key}={value}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.columns.iter().map(|(name, _)| name.clone()));
        csv.write_record(&header).map_err(csv_err)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut record = vec![format!("{t}")];
            record.extend(self.columns.iter().map(|(_, values)| format!("{}", values[k])));
            csv.write_record(&record).map_err(csv_err)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<Rd: Read>(reader: Rd) -> Result<Self> {
        let mut buf = BufReader::new(reader);
        let mut metadata = BTreeMap::new();
        loop {
            let peek = buf.fill_buf()?;
            if !peek.starts_with(b"#") {
                break;
            }
            let mut line = String::new();
            buf.read_line(&mut line)?;
            let body = line.trim_start_matches('#').trim();
            match body.split_once('=') {
                Some((key, value)) => metadata.insert(key.trim().to_string(), value.trim().to_string()),
                None => return Err(Error::CsvFormat(format!("malformed metadata line '{line}'"))),
            };
        }
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(buf);
        let header = csv.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::CsvFormat("first column must be 't'".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut columns: Vec<Vec<R>> = vec![Vec::new(); names.len()];
        for record in csv.records() {
            let record = record.map_err(csv_err)?;
            if record.len() != names.len() + 1 {
                return Err(Error::CsvFormat(format!(
                    "row has {} fields, expected {}",
                    record.len(),
                    names.len() + 1
                )));
            }
            times.push(parse_scalar(record.get(0).unwrap())?);
            for (j, column) in columns.iter_mut().enumerate() {
                column.push(parse_scalar(record.get(j + 1).unwrap())?);
            }
        }
        let mut table = Self::new(times)?;
        for (name, values) in names.iter().zip(columns) {
            table.push_column(name, values)?;
        }
        table.metadata = metadata;
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }
}

fn parse_scalar<R: Real>(field: &str) -> Result<R> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::CsvFormat(format!("'{field}' is not a number")))?;
    R::from_f64(value).ok_or_else(|| Error::CsvFormat(format!("'{field}' out of scalar range")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::CsvFormat(e.to_string())
}

/// Builds the grid `0, dt, 2 dt, ..., t_end`.
///
/// `t_end` must be an integral multiple of `dt` (to within roundoff); the
/// final point is pinned to `t_end` exactly so grids built from the same
/// arguments always compare equal.
pub fn uniform_grid<R: Real>(t_end: R, dt: R) -> Result<Vec<R>> {
    if !(t_end > R::zero()) || !t_end.is_finite() {
        return Err(Error::Grid(format!("t_end = {t_end} must be positive and finite")));
    }
    if !(dt > R::zero()) || dt > t_end {
        return Err(Error::Grid(format!("dt = {dt} must lie in (0, t_end]")));
    }
    let steps_real = (t_end / dt).round();
    let steps = steps_real
        .to_usize()
        .ok_or_else(|| Error::Grid("grid has too many points".into()))?;
    if ((t_end / dt) - steps_real).abs() > R::of(1e-6) {
        return Err(Error::Grid(format!("t_end = {t_end} is not a multiple of dt = {dt}")));
    }
    let mut grid: Vec<R> = (0..=steps).map(|k| R::of(k as f64) * dt).collect();
    grid[steps] = t_end;
    Ok(grid)
}

/// Verifies the grid is uniform to within a relative tolerance and returns
/// its step.
pub fn uniform_step<R: Real>(times: &[R]) -> Result<R> {
    if times.len() < 2 {
        return Err(Error::Grid("grid needs at least two points".into()));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        let step = w[1] - w[0];
        if ((step - dt) / dt).abs() > R::of(crate::tolerances::GRID_REL_TOL) {
            return Err(Error::Grid(format!(
                "grid is not uniform: step {step} differs from {dt}"
            )));
        }
    }
    Ok(dt)
}
