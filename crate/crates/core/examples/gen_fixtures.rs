//! Regenerates the shipped fixtures: `cargo run -p bess-core --example gen_fixtures -- <dir>`.

use std::path::PathBuf;

use bess_core::synthetic::{fixture_tariff, generate, write_series_csv, write_tariff_csv, FixtureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    write_series_csv(&generate(&FixtureSpec::ripple())?, &dir.join("seasonal_ripple_5min.csv"))?;
    write_series_csv(&generate(&FixtureSpec::smooth())?, &dir.join("seasonal_smooth_5min.csv"))?;
    write_tariff_csv(&fixture_tariff(), &dir.join("tariff_hourly.csv"))?;
    Ok(())
}
