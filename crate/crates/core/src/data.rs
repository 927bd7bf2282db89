//! Time-series ingestion: CSV loading, validation, resampling, household load
//! derivation and construction of the real-time price series.

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, FixedOffset, NaiveDateTime, TimeDelta, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while ingesting or transforming series data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-uniform spacing at row {row}: expected {expected_s} s, found {found_s} s")]
    NonUniformSpacing {
        row: usize,
        expected_s: i64,
        found_s: i64,
    },
    #[error("negative power value {value} in column `{column}` at row {row}")]
    NegativePower {
        column: String,
        row: usize,
        value: f64,
    },
    #[error("negative price {value} at row {row}")]
    NegativePrice { row: usize, value: f64 },
    #[error("missing or non-finite value in column `{column}` at row {row}")]
    MissingValue { column: String, row: usize },
    #[error("unparseable timestamp `{value}` at row {row}")]
    BadTimestamp { row: usize, value: String },
    #[error("series is empty")]
    Empty,
    #[error("series length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid resolution of {0} minutes (must be a positive divisor of 60)")]
    InvalidResolution(u32),
    #[error("cannot resample {from} to {to}: target is not an integer multiple of the source")]
    NonIntegerRatio { from: Resolution, to: Resolution },
    #[error("series of {len} steps cannot be split into blocks of {ratio}")]
    IndivisibleLength { len: usize, ratio: usize },
    #[error("invalid tariff: {0}")]
    InvalidTariff(String),
    #[error("power {value:.3} kW in `{column}` exceeds the {limit} kW limit")]
    AboveLimit { column: String, value: f64, limit: f64 },
    #[error("timestamp {0} is outside the tariff definition range")]
    OutsideTariff(DateTime<FixedOffset>),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Sampling period of a uniformly sampled series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Resolution {
    step_minutes: u32,
}

impl Resolution {
    pub const MIN_5: Resolution = Resolution { step_minutes: 5 };
    pub const MIN_15: Resolution = Resolution { step_minutes: 15 };
    pub const MIN_30: Resolution = Resolution { step_minutes: 30 };
    pub const MIN_60: Resolution = Resolution { step_minutes: 60 };

    /// The resolutions compared by the time-resolution study.
    pub const STUDY: [Resolution; 4] = [Self::MIN_5, Self::MIN_15, Self::MIN_30, Self::MIN_60];

    pub fn new(step_minutes: u32) -> Result<Self> {
        if step_minutes == 0 || 60 % step_minutes != 0 {
            return Err(DataError::InvalidResolution(step_minutes));
        }
        Ok(Self { step_minutes })
    }

    pub fn step_minutes(self) -> u32 {
        self.step_minutes
    }

    /// Step length `t_s` in hours.
    pub fn step_hours(self) -> f64 {
        f64::from(self.step_minutes) / 60.0
    }

    pub fn step_seconds(self) -> f64 {
        f64::from(self.step_minutes) * 60.0
    }

    pub fn steps_per_day(self) -> usize {
        (24 * 60 / self.step_minutes) as usize
    }
}

impl TryFrom<u32> for Resolution {
    type Error = DataError;

    fn try_from(value: u32) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Resolution> for u32 {
    fn from(value: Resolution) -> Self {
        value.step_minutes
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} min", self.step_minutes)
    }
}

/// A validated, uniformly sampled set of input series.
///
/// Powers are in kW, prices in €/kWh, temperatures in °C. The frame is
/// immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFrame {
    start: DateTime<FixedOffset>,
    resolution: Resolution,
    pv_dc: Vec<f64>,
    load_ac: Vec<f64>,
    price: Vec<f64>,
    battery_temp: Option<Vec<f64>>,
}

impl SeriesFrame {
    pub fn new(
        start: DateTime<FixedOffset>,
        resolution: Resolution,
        pv_dc: Vec<f64>,
        load_ac: Vec<f64>,
        price: Vec<f64>,
        battery_temp: Option<Vec<f64>>,
    ) -> Result<Self> {
        if pv_dc.is_empty() {
            return Err(DataError::Empty);
        }
        let n = pv_dc.len();
        for other in [&load_ac, &price].into_iter().chain(battery_temp.as_ref()) {
            if other.len() != n {
                return Err(DataError::LengthMismatch {
                    expected: n,
                    found: other.len(),
                });
            }
        }
        check_power("pv_dc_kw", &pv_dc)?;
        check_power("load_ac_kw", &load_ac)?;
        for (row, &p) in price.iter().enumerate() {
            if !p.is_finite() {
                return Err(DataError::MissingValue {
                    column: "price".into(),
                    row,
                });
            }
            if p < 0.0 {
                return Err(DataError::NegativePrice { row, value: p });
            }
        }
        if let Some(temp) = &battery_temp {
            if let Some(row) = temp.iter().position(|t| !t.is_finite() || *t <= -273.15) {
                return Err(DataError::MissingValue {
                    column: "temp_c".into(),
                    row,
                });
            }
        }
        Ok(Self {
            start,
            resolution,
            pv_dc,
            load_ac,
            price,
            battery_temp,
        })
    }

    pub fn start(&self) -> DateTime<FixedOffset> {
        self.start
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.pv_dc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pv_dc.is_empty()
    }

    pub fn pv_dc(&self) -> &[f64] {
        &self.pv_dc
    }

    pub fn load_ac(&self) -> &[f64] {
        &self.load_ac
    }

    pub fn price(&self) -> &[f64] {
        &self.price
    }

    pub fn battery_temp(&self) -> Option<&[f64]> {
        self.battery_temp.as_deref()
    }

    pub fn timestamp(&self, index: usize) -> DateTime<FixedOffset> {
        self.start + TimeDelta::seconds(index as i64 * i64::from(self.resolution.step_minutes) * 60)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = DateTime<FixedOffset>> + '_ {
        (0..self.len()).map(|i| self.timestamp(i))
    }

    /// Replaces the price series, e.g. after building it from a tariff.
    pub fn with_price(self, price: Vec<f64>) -> Result<Self> {
        Self::new(
            self.start,
            self.resolution,
            self.pv_dc,
            self.load_ac,
            price,
            self.battery_temp,
        )
    }

    pub fn apply_tariff(self, tariff: &TariffSpec) -> Result<Self> {
        let price = build_price_series(tariff, self.timestamps())?;
        self.with_price(price)
    }

    /// Extracts `len` steps starting at `offset`, wrapping around the end of
    /// the frame so that the data repeats as a block of its own length.
    pub fn window(&self, offset: usize, len: usize) -> Window {
        let n = self.len();
        let pick = |s: &[f64]| (0..len).map(|j| s[(offset + j) % n]).collect::<Vec<_>>();
        Window {
            resolution: self.resolution,
            pv_dc: pick(&self.pv_dc),
            load_ac: pick(&self.load_ac),
            price: pick(&self.price),
            battery_temp: self.battery_temp.as_deref().map(pick),
        }
    }

    /// Whole frame as a single window.
    pub fn as_window(&self) -> Window {
        self.window(0, self.len())
    }
}

fn check_power(column: &str, values: &[f64]) -> Result<()> {
    for (row, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(DataError::MissingValue {
                column: column.into(),
                row,
            });
        }
        if v < 0.0 {
            return Err(DataError::NegativePower {
                column: column.into(),
                row,
                value: v,
            });
        }
    }
    Ok(())
}

/// One optimisation period worth of input data.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub resolution: Resolution,
    pub pv_dc: Vec<f64>,
    pub load_ac: Vec<f64>,
    pub price: Vec<f64>,
    pub battery_temp: Option<Vec<f64>>,
}

impl Window {
    /// Builds a window without temperature data, validating lengths and signs.
    pub fn new(resolution: Resolution, pv_dc: Vec<f64>, load_ac: Vec<f64>, price: Vec<f64>) -> Result<Self> {
        let n = pv_dc.len();
        for other in [&load_ac, &price] {
            if other.len() != n {
                return Err(DataError::LengthMismatch {
                    expected: n,
                    found: other.len(),
                });
            }
        }
        check_power("pv_dc_kw", &pv_dc)?;
        check_power("load_ac_kw", &load_ac)?;
        if let Some((row, &value)) = price.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
            return Err(DataError::NegativePrice { row, value });
        }
        Ok(Self {
            resolution,
            pv_dc,
            load_ac,
            price,
            battery_temp: None,
        })
    }

    pub fn len(&self) -> usize {
        self.pv_dc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pv_dc.is_empty()
    }

    /// Step length in hours.
    pub fn t_s(&self) -> f64 {
        self.resolution.step_hours()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 * self.resolution.step_seconds()
    }

    /// Mean battery temperature, or the 25 °C reference when unmeasured.
    pub fn mean_temperature(&self) -> f64 {
        match &self.battery_temp {
            Some(t) if !t.is_empty() => t.iter().sum::<f64>() / t.len() as f64,
            _ => 25.0,
        }
    }
}

/// Household load from AC PV output and signed grid exchange
/// (import positive): `P_L = P_PV,ac + P_G`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedLoad {
    pub load: Vec<f64>,
    /// Steps where measurement noise made the balance negative; clipped to 0.
    pub clipped: usize,
}

pub fn derive_load(pv_ac: &[f64], grid_exchange: &[f64]) -> Result<DerivedLoad> {
    if pv_ac.len() != grid_exchange.len() {
        return Err(DataError::LengthMismatch {
            expected: pv_ac.len(),
            found: grid_exchange.len(),
        });
    }
    let mut clipped = 0;
    let load = pv_ac
        .iter()
        .zip(grid_exchange)
        .map(|(pv, grid)| {
            let l = pv + grid;
            if l < 0.0 {
                clipped += 1;
                0.0
            } else {
                l
            }
        })
        .collect();
    if clipped > 0 {
        log::warn!("derived load was negative at {clipped} steps; clipped to zero");
    }
    Ok(DerivedLoad { load, clipped })
}

/// Aggregates a frame to a coarser resolution by block averaging, which keeps
/// the energy of every power series.
pub fn resample(frame: &SeriesFrame, target: Resolution) -> Result<SeriesFrame> {
    let from = frame.resolution;
    if target.step_minutes % from.step_minutes != 0 {
        return Err(DataError::NonIntegerRatio { from, to: target });
    }
    let ratio = (target.step_minutes / from.step_minutes) as usize;
    if ratio == 1 {
        return Ok(frame.clone());
    }
    if frame.len() % ratio != 0 {
        return Err(DataError::IndivisibleLength {
            len: frame.len(),
            ratio,
        });
    }
    let mean = |s: &[f64]| {
        s.chunks_exact(ratio)
            .map(|block| block.iter().sum::<f64>() / ratio as f64)
            .collect::<Vec<_>>()
    };
    SeriesFrame::new(
        frame.start,
        target,
        mean(&frame.pv_dc),
        mean(&frame.load_ac),
        mean(&frame.price),
        frame.battery_temp.as_deref().map(mean),
    )
}

/// Column names of the input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSchema {
    pub timestamp: String,
    pub pv_dc: String,
    pub load_ac: String,
    /// Signed grid exchange, import positive.
    pub grid: String,
    /// AC PV output, only needed to derive the load when `load_ac` is absent.
    pub pv_ac: String,
    pub temp: String,
    pub price: String,
    /// Declared sampling period; inferred from the first two timestamps if unset.
    pub resolution: Option<Resolution>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            pv_dc: "pv_dc_kw".into(),
            load_ac: "load_ac_kw".into(),
            grid: "grid_kw".into(),
            pv_ac: "pv_ac_kw".into(),
            temp: "temp_c".into(),
            price: "price_eur_kwh".into(),
            resolution: None,
        }
    }
}

/// Reads `timestamp,pv_dc_kw,load_ac_kw[,grid_kw][,temp_c]` (names per
/// `schema`). An optional price column is used directly; otherwise the price
/// series is zero until a tariff is applied. When the load column is missing
/// it is derived from `pv_ac_kw` and `grid_kw`.
pub fn load_series(path: &Path, schema: &ColumnSchema) -> Result<SeriesFrame> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |e: csv::Error| DataError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| find(name).ok_or_else(|| DataError::MissingColumn(name.to_string()));

    let ts_col = required(&schema.timestamp)?;
    let pv_col = required(&schema.pv_dc)?;
    let load_col = find(&schema.load_ac);
    let grid_col = find(&schema.grid);
    let pv_ac_col = find(&schema.pv_ac);
    let temp_col = find(&schema.temp);
    let price_col = find(&schema.price);
    if load_col.is_none() && (grid_col.is_none() || pv_ac_col.is_none()) {
        return Err(DataError::MissingColumn(schema.load_ac.clone()));
    }

    let mut stamps = Vec::new();
    let mut pv = Vec::new();
    let mut load = Vec::new();
    let mut grid = Vec::new();
    let mut pv_ac = Vec::new();
    let mut temp = Vec::new();
    let mut price = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let field = |col: usize, name: &str| -> Result<f64> {
            record
                .get(col)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::MissingValue {
                    column: name.to_string(),
                    row,
                })
        };
        let raw_ts = record.get(ts_col).unwrap_or_default();
        stamps.push(parse_timestamp(raw_ts).ok_or_else(|| DataError::BadTimestamp {
            row,
            value: raw_ts.to_string(),
        })?);
        pv.push(field(pv_col, &schema.pv_dc)?);
        if let Some(c) = load_col {
            load.push(field(c, &schema.load_ac)?);
        } else {
            grid.push(field(grid_col.unwrap_or_default(), &schema.grid)?);
            pv_ac.push(field(pv_ac_col.unwrap_or_default(), &schema.pv_ac)?);
        }
        if let Some(c) = temp_col {
            temp.push(field(c, &schema.temp)?);
        }
        if let Some(c) = price_col {
            price.push(field(c, &schema.price)?);
        }
    }
    if stamps.is_empty() {
        return Err(DataError::Empty);
    }
    let resolution = match schema.resolution {
        Some(r) => r,
        None if stamps.len() >= 2 => {
            let secs = (stamps[1] - stamps[0]).num_seconds();
            if secs <= 0 || secs % 60 != 0 {
                return Err(DataError::NonUniformSpacing {
                    row: 1,
                    expected_s: 0,
                    found_s: secs,
                });
            }
            Resolution::new(u32::try_from(secs / 60).map_err(|_| DataError::InvalidResolution(0))?)?
        }
        None => return Err(DataError::InvalidResolution(0)),
    };
    let expected_s = i64::from(resolution.step_minutes) * 60;
    for (row, pair) in stamps.windows(2).enumerate() {
        let found_s = (pair[1] - pair[0]).num_seconds();
        if found_s != expected_s {
            return Err(DataError::NonUniformSpacing {
                row: row + 1,
                expected_s,
                found_s,
            });
        }
    }
    if load_col.is_none() {
        check_power(&schema.pv_ac, &pv_ac)?;
        load = derive_load(&pv_ac, &grid)?.load;
    }
    let n = stamps.len();
    let price = if price_col.is_some() { price } else { vec![0.0; n] };
    let temp = temp_col.map(|_| temp);
    SeriesFrame::new(stamps[0], resolution, pv, load, price, temp)
}

/// Accepts RFC 3339 timestamps with an offset, or naive ISO-8601 date-times
/// which are taken as UTC.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<FixedOffset>> {
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts);
    }
    const NAIVE: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
    NAIVE.iter().find_map(|fmt| {
        NaiveDateTime::parse_from_str(raw, fmt)
            .ok()
            .map(|naive| naive.and_utc().fixed_offset())
    })
}

/// Generation cost and tolls/charges for one tariff hour, €/kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TariffRate {
    pub generation: f64,
    pub tolls_and_charges: f64,
}

/// Whether tariff rows are indexed by hour of day (a repeating daily profile)
/// or by hour of year (a full real-time price table).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HourBasis {
    OfDay,
    OfYear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffSpec {
    pub basis: HourBasis,
    pub rates: Vec<TariffRate>,
    pub vat_rate: f64,
}

impl TariffSpec {
    pub fn new(basis: HourBasis, rates: Vec<TariffRate>, vat_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&vat_rate) {
            return Err(DataError::InvalidTariff(format!("vat_rate {vat_rate} outside [0, 1)")));
        }
        if basis == HourBasis::OfDay && rates.len() != 24 {
            return Err(DataError::InvalidTariff(format!(
                "daily profile needs 24 hours, found {}",
                rates.len()
            )));
        }
        if rates.is_empty() {
            return Err(DataError::InvalidTariff("no tariff rows".into()));
        }
        if let Some(r) = rates
            .iter()
            .find(|r| !(r.generation >= 0.0 && r.tolls_and_charges >= 0.0) || !r.generation.is_finite())
        {
            return Err(DataError::InvalidTariff(format!("negative or non-finite rate {r:?}")));
        }
        Ok(Self { basis, rates, vat_rate })
    }

    /// A flat tariff, mostly for tests.
    pub fn flat(generation: f64, tolls_and_charges: f64, vat_rate: f64) -> Result<Self> {
        Self::new(
            HourBasis::OfDay,
            vec![
                TariffRate {
                    generation,
                    tolls_and_charges
                };
                24
            ],
            vat_rate,
        )
    }

    /// Reads `hour_of_day,gc_eur_kwh,tc_eur_kwh` (or `hour_of_year,...`).
    pub fn load(path: &Path, vat_rate: f64) -> Result<Self> {
        let csv_err = |e: csv::Error| DataError::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader.headers().map_err(csv_err)?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let (basis, hour_col) = match (find("hour_of_day"), find("hour_of_year")) {
            (Some(c), _) => (HourBasis::OfDay, c),
            (None, Some(c)) => (HourBasis::OfYear, c),
            (None, None) => return Err(DataError::MissingColumn("hour_of_day".into())),
        };
        let gc_col = find("gc_eur_kwh").ok_or_else(|| DataError::MissingColumn("gc_eur_kwh".into()))?;
        let tc_col = find("tc_eur_kwh").ok_or_else(|| DataError::MissingColumn("tc_eur_kwh".into()))?;
        let mut rows: Vec<(usize, TariffRate)> = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let num = |col: usize, name: &str| -> Result<f64> {
                record
                    .get(col)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| DataError::MissingValue {
                        column: name.into(),
                        row,
                    })
            };
            let hour = record
                .get(hour_col)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| DataError::MissingValue {
                    column: "hour".into(),
                    row,
                })?;
            rows.push((
                hour,
                TariffRate {
                    generation: num(gc_col, "gc_eur_kwh")?,
                    tolls_and_charges: num(tc_col, "tc_eur_kwh")?,
                },
            ));
        }
        rows.sort_by_key(|(h, _)| *h);
        if rows.iter().enumerate().any(|(i, (h, _))| *h != i) {
            return Err(DataError::InvalidTariff(
                "hours must be contiguous from 0 and unique".into(),
            ));
        }
        Self::new(basis, rows.into_iter().map(|(_, r)| r).collect(), vat_rate)
    }

    fn rate_at(&self, ts: DateTime<FixedOffset>) -> Result<TariffRate> {
        let index = match self.basis {
            HourBasis::OfDay => ts.hour() as usize,
            HourBasis::OfYear => ts.ordinal0() as usize * 24 + ts.hour() as usize,
        };
        self.rates
            .get(index)
            .copied()
            .ok_or(DataError::OutsideTariff(ts))
    }
}

/// Grid purchase price per timestamp: `(GC + TC)·(1 + VAT)`.
pub fn build_price_series(
    tariff: &TariffSpec,
    timestamps: impl IntoIterator<Item = DateTime<FixedOffset>>,
) -> Result<Vec<f64>> {
    timestamps
        .into_iter()
        .map(|ts| {
            let rate = tariff.rate_at(ts)?;
            Ok(price_with_vat(rate, tariff.vat_rate))
        })
        .collect()
}

/// VAT applied as a rate on top of generation cost plus tolls.
pub fn price_with_vat(rate: TariffRate, vat_rate: f64) -> f64 {
    (rate.generation + rate.tolls_and_charges) * (1.0 + vat_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn t0() -> DateTime<FixedOffset> {
        parse_timestamp("2023-01-01T00:00:00+01:00").unwrap()
    }

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn csv_rows(n: usize, step_min: i64, pv: impl Fn(usize) -> f64) -> String {
        let mut s = String::from("timestamp,pv_dc_kw,load_ac_kw,price_eur_kwh\n");
        for i in 0..n {
            let ts = t0() + TimeDelta::minutes(step_min * i as i64);
            s.push_str(&format!("{},{},{},0.2\n", ts.to_rfc3339(), pv(i), 0.5));
        }
        s
    }

    #[test]
    fn resolution_rejects_non_divisors() {
        assert!(Resolution::new(7).is_err());
        assert!(Resolution::new(0).is_err());
        assert_eq!(Resolution::new(15).unwrap().step_hours(), 0.25);
        assert_eq!(Resolution::MIN_5.steps_per_day(), 288);
    }

    #[test]
    fn loads_a_day_at_five_minutes() {
        let f = write_csv(&csv_rows(288, 5, |i| (i % 7) as f64));
        let frame = load_series(f.path(), &ColumnSchema::default()).unwrap();
        assert_eq!(frame.len(), 288);
        assert_eq!(frame.resolution(), Resolution::MIN_5);
        assert_eq!(frame.pv_dc()[3], 3.0);
        assert_eq!(frame.price()[0], 0.2);
    }

    #[test]
    fn duplicated_timestamp_is_non_uniform() {
        let mut body = csv_rows(4, 5, |_| 1.0);
        let lines: Vec<&str> = body.lines().collect();
        body = format!("{}\n{}\n{}\n{}\n{}\n", lines[0], lines[1], lines[2], lines[2], lines[3]);
        let f = write_csv(&body);
        let err = load_series(f.path(), &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, DataError::NonUniformSpacing { row: 2, .. }), "{err}");
        assert!(err.to_string().contains("non-uniform spacing"));
    }

    #[test]
    fn negative_pv_is_rejected() {
        let f = write_csv(&csv_rows(5, 5, |i| if i == 3 { -0.1 } else { 1.0 }));
        let err = load_series(f.path(), &ColumnSchema::default()).unwrap_err();
        assert!(err.to_string().contains("negative power value"), "{err}");
    }

    #[test]
    fn missing_column_and_bad_timestamp() {
        let f = write_csv("timestamp,load_ac_kw\n2023-01-01T00:00:00Z,1\n");
        assert!(matches!(
            load_series(f.path(), &ColumnSchema::default()),
            Err(DataError::MissingColumn(c)) if c == "pv_dc_kw"
        ));
        let f = write_csv("timestamp,pv_dc_kw,load_ac_kw\nyesterday,1,1\n");
        assert!(matches!(
            load_series(f.path(), &ColumnSchema::default()),
            Err(DataError::BadTimestamp { row: 0, .. })
        ));
    }

    #[test]
    fn load_is_derived_when_absent() {
        let f = write_csv(
            "timestamp,pv_dc_kw,pv_ac_kw,grid_kw\n\
             2023-01-01 00:00,2.1,2.0,1.0\n\
             2023-01-01 01:00,0.6,0.5,-1.0\n",
        );
        let frame = load_series(f.path(), &ColumnSchema::default()).unwrap();
        assert_eq!(frame.load_ac(), &[3.0, 0.0]);
        assert_eq!(frame.resolution(), Resolution::MIN_60);
    }

    #[test]
    fn derive_load_examples() {
        assert_eq!(derive_load(&[2.0], &[1.0]).unwrap().load, vec![3.0]);
        assert_eq!(derive_load(&[2.0], &[-2.0]).unwrap().load, vec![0.0]);
        let clipped = derive_load(&[0.5], &[-1.0]).unwrap();
        assert_eq!(clipped.load, vec![0.0]);
        assert_eq!(clipped.clipped, 1);
        assert!(derive_load(&[1.0, 2.0], &[1.0]).is_err());
    }

    fn frame(pv: Vec<f64>) -> SeriesFrame {
        let n = pv.len();
        SeriesFrame::new(t0(), Resolution::MIN_5, pv, vec![1.0; n], vec![0.1; n], None).unwrap()
    }

    #[test]
    fn resample_averages_blocks() {
        let f = frame((1..=12).map(f64::from).collect());
        let hourly = resample(&f, Resolution::MIN_60).unwrap();
        assert_eq!(hourly.pv_dc(), &[6.5]);
        assert_eq!(hourly.resolution(), Resolution::MIN_60);

        let constant = frame(vec![3.0; 24]);
        for target in [Resolution::MIN_15, Resolution::MIN_30, Resolution::MIN_60] {
            assert!(resample(&constant, target).unwrap().pv_dc().iter().all(|&p| p == 3.0));
        }
        assert_eq!(resample(&constant, Resolution::MIN_5).unwrap(), constant);
    }

    #[test]
    fn resample_errors() {
        let f = frame(vec![1.0; 10]);
        assert!(matches!(
            resample(&f, Resolution::MIN_60),
            Err(DataError::IndivisibleLength { len: 10, ratio: 12 })
        ));
        let quarter = resample(&frame(vec![1.0; 12]), Resolution::MIN_15).unwrap();
        assert!(matches!(
            resample(&quarter, Resolution::new(20).unwrap()),
            Err(DataError::NonIntegerRatio { .. })
        ));
    }

    #[test]
    fn price_series_examples() {
        let stamps = [t0()];
        let tariff = TariffSpec::flat(0.10, 0.05, 0.21).unwrap();
        let p = build_price_series(&tariff, stamps).unwrap()[0];
        assert!((p - 0.1815).abs() < 1e-12);
        let tariff = TariffSpec::flat(0.10, 0.05, 0.0).unwrap();
        assert!((build_price_series(&tariff, stamps).unwrap()[0] - 0.15).abs() < 1e-12);
        let tariff = TariffSpec::flat(0.0, 0.0, 0.5).unwrap();
        assert_eq!(build_price_series(&tariff, stamps).unwrap()[0], 0.0);
    }

    #[test]
    fn annual_tariff_range_is_enforced() {
        let rates = vec![
            TariffRate {
                generation: 0.1,
                tolls_and_charges: 0.0
            };
            48
        ];
        let tariff = TariffSpec::new(HourBasis::OfYear, rates, 0.0).unwrap();
        let inside = parse_timestamp("2023-01-02T23:00:00Z").unwrap();
        let outside = parse_timestamp("2023-01-03T00:00:00Z").unwrap();
        assert!(build_price_series(&tariff, [inside]).is_ok());
        assert!(matches!(
            build_price_series(&tariff, [outside]),
            Err(DataError::OutsideTariff(_))
        ));
    }

    #[test]
    fn tariff_file_round_trip() {
        let mut body = String::from("hour_of_day,gc_eur_kwh,tc_eur_kwh\n");
        for h in (0..24).rev() {
            body.push_str(&format!("{h},{},0.03\n", 0.01 * h as f64));
        }
        let f = write_csv(&body);
        let tariff = TariffSpec::load(f.path(), 0.21).unwrap();
        assert_eq!(tariff.basis, HourBasis::OfDay);
        assert!((tariff.rates[5].generation - 0.05).abs() < 1e-15);
    }

    #[test]
    fn window_wraps_around_the_frame() {
        let f = frame(vec![0.0, 1.0, 2.0]);
        let w = f.window(2, 4);
        assert_eq!(w.pv_dc, vec![2.0, 0.0, 1.0, 2.0]);
        assert_eq!(w.t_s(), 5.0 / 60.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn resampling_preserves_energy(
                pv in proptest::collection::vec(0.0f64..8.0, 1..20usize),
                target in prop::sample::select(vec![15u32, 30, 60]),
            ) {
                let ratio = (target / 5) as usize;
                let pv: Vec<f64> = pv.iter().cycle().take(ratio * 12).copied().collect();
                let f = frame(pv);
                let coarse = resample(&f, Resolution::new(target).unwrap()).unwrap();
                let e_in: f64 = f.pv_dc().iter().sum::<f64>() * f.resolution().step_hours();
                let e_out: f64 = coarse.pv_dc().iter().sum::<f64>() * coarse.resolution().step_hours();
                prop_assert!((e_in - e_out).abs() <= 1e-9);
            }

            #[test]
            fn price_is_monotone(gc in 0.0f64..1.0, tc in 0.0f64..1.0, vat in 0.0f64..0.9, bump in 0.0f64..0.5) {
                let base = price_with_vat(TariffRate { generation: gc, tolls_and_charges: tc }, vat);
                let rate = |g: f64, t: f64| TariffRate { generation: g, tolls_and_charges: t };
                let more_gc = price_with_vat(rate(gc + bump, tc), vat);
                let more_tc = price_with_vat(rate(gc, tc + bump), vat);
                let more_vat = price_with_vat(rate(gc, tc), (vat + bump).min(0.99));
                prop_assert!(more_gc >= base && more_tc >= base && more_vat >= base);
            }

            #[test]
            fn derived_load_is_nonnegative(
                pv in proptest::collection::vec(0.0f64..5.0, 1..50usize),
                seed_grid in proptest::collection::vec(-6.0f64..6.0, 50),
            ) {
                let grid = &seed_grid[..pv.len()];
                prop_assert!(derive_load(&pv, grid).unwrap().load.iter().all(|&l| l >= 0.0));
            }
        }
    }
}
