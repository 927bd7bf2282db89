//! Shared inputs for the criterion benchmarks.

use bess_core::data::{resample, HourBasis, Resolution, SeriesFrame, TariffSpec};
use bess_core::degradation::initial_degradation_cost;
use bess_core::dispatch::{build_window_problem, BatterySpec, PlantSpec, WindowProblem};
use bess_core::economics::{battery_capital_cost, CostModel};
use bess_core::synthetic::{fixture_tariff, generate, FixtureSpec};

/// The ripple fixture with its tariff, at `resolution`.
pub fn fixture(resolution: Resolution) -> SeriesFrame {
    let tariff = TariffSpec::new(HourBasis::OfDay, fixture_tariff(), 0.21).expect("valid tariff");
    let frame = generate(&FixtureSpec::ripple())
        .expect("fixture generates")
        .apply_tariff(&tariff)
        .expect("tariff applies");
    resample(&frame, resolution).expect("resolution divides an hour")
}

/// The 2 kWh / 1 kW battery used throughout the benchmarks.
pub fn battery() -> BatterySpec {
    BatterySpec::from_rating(2.0, 1.0)
}

pub fn initial_c_bd(battery: &BatterySpec, power: f64) -> f64 {
    let capital = battery_capital_cost(battery, power, &CostModel::default());
    initial_degradation_cost(battery, capital).expect("positive throughput")
}

/// One week starting at `week`, fresh battery at half charge.
pub fn week_problem(frame: &SeriesFrame, week: usize, steps: Option<usize>) -> WindowProblem {
    let len = steps.unwrap_or(7 * frame.resolution().steps_per_day());
    let window = frame.window(week * 7 * frame.resolution().steps_per_day(), len);
    let bat = battery();
    build_window_problem(
        &window,
        &PlantSpec::default(),
        &bat,
        bat.e_nominal,
        initial_c_bd(&bat, 1.0),
        0.5 * bat.e_nominal,
    )
    .expect("fixture week is feasible")
}
