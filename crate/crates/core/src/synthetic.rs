//! Seeded synthetic household data, used for the shipped fixtures and tests.
//!
//! Four weeks stand in for the four seasons. PV follows a clear-sky bell
//! scaled by season and a daily cloud factor; load is a sum of smooth daily
//! bumps. The ripple variant multiplies the load by a zero-mean pattern that
//! repeats every 15 minutes, so any coarser block average removes it exactly.

use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, FixedOffset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataError, Resolution, SeriesFrame, TariffRate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub days: usize,
    pub seed: u64,
    /// Relative amplitude of the 5-minute load ripple; 0 gives a smooth load.
    pub ripple: f64,
    /// Total PV energy over total load energy.
    pub generation_ratio: f64,
    /// Upper bound on PV power, kW.
    pub pv_cap: f64,
}

impl FixtureSpec {
    pub fn smooth() -> Self {
        Self {
            days: 28,
            seed: 7,
            ripple: 0.0,
            generation_ratio: 1.5,
            pv_cap: 5.8,
        }
    }

    pub fn ripple() -> Self {
        Self { ripple: 0.6, ..Self::smooth() }
    }
}

pub const SEASON_PV: [f64; 4] = [0.6, 1.0, 1.15, 0.85];
const SEASON_DAYLIGHT: [(f64, f64); 4] = [(8.5, 18.0), (7.0, 20.5), (6.5, 21.5), (7.5, 19.0)];
const SEASON_LOAD: [f64; 4] = [1.25, 1.0, 1.1, 1.05];

pub fn fixture_start() -> DateTime<FixedOffset> {
    DateTime::parse_from_rfc3339("2023-01-02T00:00:00+01:00").expect("valid literal")
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((h - centre) / width).powi(2)).exp()
}

/// Five-minute PV and load; prices are zero until a tariff is applied.
pub fn generate(spec: &FixtureSpec) -> Result<SeriesFrame, DataError> {
    let res = Resolution::MIN_5;
    let per_day = res.steps_per_day();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pv = Vec::with_capacity(spec.days * per_day);
    let mut load = Vec::with_capacity(spec.days * per_day);
    for day in 0..spec.days {
        let season = (day / 7) % 4;
        let (rise, set) = SEASON_DAYLIGHT[season];
        let cloud: f64 = rng.gen_range(0.35..1.0);
        let usage: f64 = rng.gen_range(0.8..1.2);
        let evening_peak: f64 = rng.gen_range(0.1..1.2);
        let evening: f64 = rng.gen_range(19.0..21.0);
        for k in 0..per_day {
            let h = (k as f64 + 0.5) * res.step_hours();
            let sun = if h > rise && h < set {
                (std::f64::consts::PI * (h - rise) / (set - rise)).sin().powf(1.5)
            } else {
                0.0
            };
            pv.push(SEASON_PV[season] * cloud * sun);
            let l = 0.05 + 0.3 * bump(h, 7.5, 0.8) + 0.9 * bump(h, 13.0, 2.5) + evening_peak * bump(h, evening, 1.0);
            load.push(SEASON_LOAD[season] * usage * l);
        }
    }
    if spec.ripple > 0.0 {
        // zero-mean over every 15-minute block
        for block in load.chunks_mut(3) {
            let r = spec.ripple * rng.gen_range(0.2..1.0);
            if block.len() == 3 {
                let base = block[0];
                block[0] += r * base;
                block[1] -= r * base;
            }
        }
    }
    let scale = spec.generation_ratio * load.iter().sum::<f64>() / pv.iter().sum::<f64>();
    for p in &mut pv {
        *p *= scale;
    }
    let peak = pv.iter().cloned().fold(0.0, f64::max);
    if peak > spec.pv_cap {
        return Err(DataError::AboveLimit {
            column: "pv_dc_kw".into(),
            value: peak,
            limit: spec.pv_cap,
        });
    }
    let n = pv.len();
    SeriesFrame::new(fixture_start(), res, pv, load, vec![0.0; n], None)
}

/// A daily time-of-use profile: cheap nights, dear evenings.
pub fn fixture_tariff() -> Vec<TariffRate> {
    (0..24)
        .map(|h| {
            let (generation, tolls_and_charges) = match h {
                0..=7 => (0.17, 0.05),
                8..=9 | 14..=17 | 22..=23 => (0.19, 0.05),
                _ => (0.21, 0.09),
            };
            TariffRate {
                generation,
                tolls_and_charges,
            }
        })
        .collect()
}

/// Writes `timestamp,pv_dc_kw,load_ac_kw` with fixed six-decimal values.
pub fn write_series_csv(frame: &SeriesFrame, path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "timestamp,pv_dc_kw,load_ac_kw")?;
    let step = Duration::minutes(i64::from(frame.resolution().step_minutes()));
    let mut ts = frame.start();
    for (pv, load) in frame.pv_dc().iter().zip(frame.load_ac()) {
        writeln!(out, "{},{pv:.6},{load:.6}", ts.to_rfc3339())?;
        ts += step;
    }
    out.flush()
}

pub fn write_tariff_csv(rates: &[TariffRate], path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "hour_of_day,gc_eur_kwh,tc_eur_kwh")?;
    for (h, r) in rates.iter().enumerate() {
        writeln!(out, "{h},{},{}", r.generation, r.tolls_and_charges)?;
    }
    out.flush()
}

/// A constant frame, handy for tests.
pub fn flat_frame(resolution: Resolution, steps: usize, pv: f64, load: f64, price: f64) -> SeriesFrame {
    SeriesFrame::new(
        fixture_start(),
        resolution,
        vec![pv; steps],
        vec![load; steps],
        vec![price; steps],
        None,
    )
    .expect("constant series are valid")
}
