//! Semi-empirical capacity fade: stress factors, cycle and calendar ageing,
//! the two-exponential loss curve and the degradation cost it implies.

use serde::{Deserialize, Serialize};

use crate::dispatch::BatterySpec;
use crate::rainflow::CycleRecord;

const KELVIN: f64 = 273.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationParams {
    pub alpha_sei: f64,
    pub beta_sei: f64,
    #[serde(rename = "k_T")]
    pub k_temp: f64,
    pub k_d1: f64,
    pub k_d2: f64,
    pub k_d3: f64,
    pub k_sigma: f64,
    /// Calendar ageing rate, 1/s.
    #[serde(rename = "k_t")]
    pub k_time: f64,
    #[serde(rename = "T_ref")]
    pub t_ref: f64,
    pub sigma_ref: f64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        Self {
            alpha_sei: 5.75e-2,
            beta_sei: 121.0,
            k_temp: 6.93e-2,
            k_d1: 1.40e5,
            k_d2: -5.01e-1,
            k_d3: -1.23e5,
            k_sigma: 1.04,
            k_time: 4.14e-10,
            t_ref: 25.0,
            sigma_ref: 0.5,
        }
    }
}

impl DegradationParams {
    /// Every stress coefficient set to zero: no fade at all.
    pub fn zeroed() -> Self {
        Self {
            k_temp: 0.0,
            k_d1: 0.0,
            k_d2: 0.0,
            k_d3: 0.0,
            k_sigma: 0.0,
            k_time: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DegradationError> {
        if !(self.alpha_sei > 0.0 && self.alpha_sei < 1.0) {
            return Err(DegradationError::InvalidParams(format!("alpha_sei must be in (0, 1), got {}", self.alpha_sei)));
        }
        if !(self.beta_sei > 0.0) {
            return Err(DegradationError::InvalidParams(format!("beta_sei must be positive, got {}", self.beta_sei)));
        }
        if !(self.k_time >= 0.0) {
            return Err(DegradationError::InvalidParams(format!("k_t must be >= 0, got {}", self.k_time)));
        }
        if !(self.t_ref > -KELVIN) {
            return Err(DegradationError::InvalidParams("T_ref below absolute zero".into()));
        }
        let finite = [self.k_temp, self.k_d1, self.k_d2, self.k_d3, self.k_sigma, self.sigma_ref];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(DegradationError::InvalidParams("stress coefficients must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DegradationError {
    #[error("invalid degradation parameters: {0}")]
    InvalidParams(String),
    #[error("depth of discharge must be in (0, 1], got {0}")]
    InvalidDod(f64),
    #[error("warranted throughput must be positive, got {0}")]
    InvalidThroughput(f64),
}

/// Temperature stress; the ratio term uses absolute temperatures.
pub fn stress_temperature(t_b: f64, p: &DegradationParams) -> f64 {
    (p.k_temp * (t_b - p.t_ref) * ((p.t_ref + KELVIN) / (t_b + KELVIN))).exp()
}

pub fn stress_dod(dod: f64, p: &DegradationParams) -> Result<f64, DegradationError> {
    if !(dod > 0.0 && dod <= 1.0) {
        return Err(DegradationError::InvalidDod(dod));
    }
    if p.k_d1 == 0.0 && p.k_d3 == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (p.k_d1 * dod.powf(p.k_d2) + p.k_d3))
}

pub fn stress_soc(sigma: f64, p: &DegradationParams) -> f64 {
    (p.k_sigma * (sigma - p.sigma_ref)).exp()
}

/// `Σ weight · S^T · S^δ · S^σ`; zero-depth records contribute nothing.
pub fn cycle_degradation(cycles: &[CycleRecord], t_b: f64, p: &DegradationParams) -> f64 {
    let st = stress_temperature(t_b, p);
    cycles
        .iter()
        .filter(|c| c.dod > 0.0)
        .map(|c| c.weight * st * stress_dod(c.dod.min(1.0), p).unwrap_or(0.0) * stress_soc(c.mean_soc, p))
        .sum()
}

/// Calendar ageing over `dt` seconds, linear in time.
pub fn calendar_degradation(dt: f64, mean_sigma: f64, t_b: f64, p: &DegradationParams) -> f64 {
    stress_temperature(t_b, p) * stress_soc(mean_sigma, p) * p.k_time * dt
}

pub fn capacity_loss(f_b: f64, p: &DegradationParams) -> f64 {
    1.0 - p.alpha_sei * (-p.beta_sei * f_b).exp() - (1.0 - p.alpha_sei) * (-f_b).exp()
}

/// Solves `capacity_loss(f) = target` for `f` by bisection.
pub fn factor_for_loss(target: f64, p: &DegradationParams) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while capacity_loss(hi, p) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capacity_loss(mid, p) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Capital divided by the warranted discharge throughput.
pub fn initial_degradation_cost(battery: &BatterySpec, capital: f64) -> Result<f64, DegradationError> {
    if !(battery.warranted_throughput > 0.0) {
        return Err(DegradationError::InvalidThroughput(battery.warranted_throughput));
    }
    Ok(capital / battery.warranted_throughput)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationState {
    pub f_b: f64,
    pub loss: f64,
    /// Current capacity, kWh.
    pub e_b: f64,
    /// Degradation cost, €/kWh discharged.
    pub c_bd: f64,
    /// Cumulative DC discharge, kWh.
    pub discharged_total: f64,
    pub elapsed_s: f64,
}

impl DegradationState {
    pub fn new(battery: &BatterySpec, c_bd: f64) -> Self {
        Self {
            f_b: 0.0,
            loss: 0.0,
            e_b: battery.e_nominal,
            c_bd,
            discharged_total: 0.0,
            elapsed_s: 0.0,
        }
    }

    pub fn soh(&self) -> f64 {
        1.0 - self.loss
    }

    pub fn is_end_of_life(&self, battery: &BatterySpec) -> bool {
        self.loss >= 1.0 - battery.soh_eol
    }
}

/// What one period did to the battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodStress<'a> {
    pub cycles: &'a [CycleRecord],
    pub dt_s: f64,
    pub temperature: f64,
    pub mean_soc: f64,
    pub discharged_kwh: f64,
}

/// Applies one period's ageing and refreshes capacity and degradation cost.
pub fn advance_state(
    state: &DegradationState,
    period: &PeriodStress<'_>,
    battery: &BatterySpec,
    capital: f64,
    p: &DegradationParams,
) -> DegradationState {
    let f_b = state.f_b
        + cycle_degradation(period.cycles, period.temperature, p)
        + calendar_degradation(period.dt_s, period.mean_soc, period.temperature, p);
    let loss = capacity_loss(f_b, p);
    let discharged_total = state.discharged_total + period.discharged_kwh;
    let c_bd = if discharged_total > 0.0 {
        let f_bd = loss / (1.0 - battery.soh_eol);
        f_bd * capital / discharged_total
    } else {
        state.c_bd
    };
    DegradationState {
        f_b,
        loss,
        e_b: (1.0 - loss) * battery.e_nominal,
        c_bd,
        discharged_total,
        elapsed_s: state.elapsed_s + period.dt_s,
    }
}
