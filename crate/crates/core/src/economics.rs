//! Capital cost, self-consumption and self-sufficiency ratios, discounted
//! cash flows, NPV and discounted payback.

use serde::{Deserialize, Serialize};

use crate::dispatch::BatterySpec;
use crate::lifetime::{EnergyTallies, LifetimeResult, SECONDS_PER_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// €/kWh of nominal capacity.
    pub cost_per_kwh: f64,
    /// €/kW of rated power.
    pub cost_per_kw: f64,
    /// Annual discount rate, fraction.
    pub discount_rate: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            cost_per_kwh: 252.37,
            cost_per_kw: 503.30,
            discount_rate: 0.0558,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), EconomicsError> {
        for (name, v) in [
            ("cost_per_kwh", self.cost_per_kwh),
            ("cost_per_kw", self.cost_per_kw),
            ("discount_rate", self.discount_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EconomicsError::InvalidModel(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EconomicsError {
    #[error("invalid cost model: {0}")]
    InvalidModel(String),
    #[error("no PV generation over the lifetime")]
    NoGeneration,
    #[error("no load over the lifetime")]
    NoLoad,
    #[error("series lengths differ: {0}")]
    Misaligned(String),
}

pub fn battery_capital_cost(battery: &BatterySpec, power_kw: f64, model: &CostModel) -> f64 {
    battery.e_nominal * model.cost_per_kwh + power_kw * model.cost_per_kw
}

/// PV used on site (directly or via the battery) over total PV.
pub fn scr(tallies: &EnergyTallies) -> Result<f64, EconomicsError> {
    if !(tallies.pv_total > 0.0) {
        return Err(EconomicsError::NoGeneration);
    }
    Ok(((tallies.pv_to_load + tallies.pv_to_battery) / tallies.pv_total).clamp(0.0, 1.0))
}

/// PV used on site over total load.
pub fn ssr(tallies: &EnergyTallies) -> Result<f64, EconomicsError> {
    if !(tallies.load_total > 0.0) {
        return Err(EconomicsError::NoLoad);
    }
    Ok(((tallies.pv_to_load + tallies.pv_to_battery) / tallies.load_total).clamp(0.0, 1.0))
}

fn discount(year: u32, rate: f64) -> f64 {
    (1.0 + rate).powi(year as i32)
}

/// Discounted savings of one window and the time span it covers, in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcfPoint {
    pub window: usize,
    pub start_years: f64,
    pub end_years: f64,
    pub value: f64,
}

/// Per-window discounted cash flows, with each step discounted by the whole
/// years completed when it occurs.
pub fn dcf_series(result: &LifetimeResult, rate: f64) -> Vec<DcfPoint> {
    let mut out: Vec<DcfPoint> = result
        .windows
        .iter()
        .enumerate()
        .map(|(i, w)| DcfPoint {
            window: w.window,
            start_years: w.start_years,
            end_years: result
                .windows
                .get(i + 1)
                .map_or(result.t_eol_years, |n| n.start_years),
            value: 0.0,
        })
        .collect();
    for cf in &result.cash_flows {
        if let Some(p) = out.get_mut(cf.window) {
            p.value += cf.savings / discount(cf.year, rate);
        }
    }
    out
}

pub fn npv(result: &LifetimeResult, model: &CostModel) -> f64 {
    let dcf: f64 = dcf_series(result, model.discount_rate).iter().map(|p| p.value).sum();
    dcf - result.capital
}

/// NPV from aligned per-step series. `years[k]` is the whole years elapsed
/// at step k.
pub fn npv_from_series(
    import_baseline_kw: &[f64],
    import_bess_kw: &[f64],
    price: &[f64],
    years: &[u32],
    t_s: f64,
    capital: f64,
    rate: f64,
) -> Result<f64, EconomicsError> {
    let n = import_baseline_kw.len();
    for (name, len) in [("with-battery import", import_bess_kw.len()), ("price", price.len()), ("year index", years.len())] {
        if len != n {
            return Err(EconomicsError::Misaligned(format!("{name} has {len} steps, baseline has {n}")));
        }
    }
    let savings: f64 = (0..n)
        .map(|k| (import_baseline_kw[k] - import_bess_kw[k]) * t_s * price[k] / discount(years[k], rate))
        .sum();
    Ok(savings - capital)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payback {
    Years(f64),
    Never,
}

impl Payback {
    pub fn years(self) -> Option<f64> {
        match self {
            Self::Years(y) => Some(y),
            Self::Never => None,
        }
    }
}

impl std::fmt::Display for Payback {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Years(y) => write!(f, "{y:.3}"),
            Self::Never => f.write_str("never"),
        }
    }
}

impl Serialize for Payback {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Years(y) => s.serialize_f64(*y),
            Self::Never => s.serialize_str("never"),
        }
    }
}

impl<'de> Deserialize<'de> for Payback {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Years(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Years(y) => Ok(Self::Years(y)),
            Raw::Tag(t) if t == "never" => Ok(Self::Never),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("expected a number or \"never\", got {t:?}"))),
        }
    }
}

/// First time the cumulative DCF reaches `capital`, interpolated linearly
/// inside the crossing window.
pub fn dpb(dcf: &[DcfPoint], capital: f64) -> Payback {
    if capital <= 0.0 {
        return Payback::Years(0.0);
    }
    let mut cum = 0.0;
    for p in dcf {
        let next = cum + p.value;
        if next >= capital {
            let frac = if p.value > 0.0 { (capital - cum) / p.value } else { 1.0 };
            return Payback::Years(p.start_years + frac * (p.end_years - p.start_years));
        }
        cum = next;
    }
    Payback::Never
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicReport {
    pub capital: f64,
    pub npv: f64,
    pub dpb: Payback,
    pub scr: f64,
    pub ssr: f64,
    /// Discounted savings per window, €.
    pub dcf_series: Vec<f64>,
}

impl EconomicReport {
    pub const CSV_HEADER: &'static str = "capital_eur,npv_eur,dpb_years,scr,ssr";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.capital, self.npv, self.dpb, self.scr, self.ssr)
    }
}

pub fn evaluate(result: &LifetimeResult, model: &CostModel) -> Result<EconomicReport, EconomicsError> {
    model.validate()?;
    let dcf = dcf_series(result, model.discount_rate);
    let npv = dcf.iter().map(|p| p.value).sum::<f64>() - result.capital;
    Ok(EconomicReport {
        capital: result.capital,
        npv,
        dpb: dpb(&dcf, result.capital),
        scr: scr(&result.tallies)?,
        ssr: ssr(&result.tallies)?,
        dcf_series: dcf.iter().map(|p| p.value).collect(),
    })
}

/// Years elapsed at the start of step `k` of a run with `step_seconds`
/// steps, rounded down.
pub fn whole_years(k: usize, step_seconds: f64) -> u32 {
    (k as f64 * step_seconds / SECONDS_PER_YEAR).floor() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn capital_examples() {
        let m = CostModel::default();
        assert_eq!(battery_capital_cost(&BatterySpec::from_rating(2.0, 1.0), 1.0, &m), 1008.04);
        let c10 = battery_capital_cost(&BatterySpec::from_rating(10.0, 5.0), 5.0, &m);
        assert!((c10 - 5040.2).abs() < 1e-9);
        let zero = CostModel { cost_per_kwh: 0.0, cost_per_kw: 0.0, discount_rate: 0.0 };
        assert_eq!(battery_capital_cost(&BatterySpec::from_rating(2.0, 1.0), 1.0, &zero), 0.0);
    }

    fn tallies(pv_to_load: f64, pv_to_battery: f64, pv_total: f64, load_total: f64) -> EnergyTallies {
        EnergyTallies { pv_to_load, pv_to_battery, pv_total, load_total, ..Default::default() }
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(scr(&tallies(400.0, 200.0, 1000.0, 2000.0)).unwrap(), 0.6);
        assert_eq!(scr(&tallies(700.0, 300.0, 1000.0, 2000.0)).unwrap(), 1.0);
        assert_eq!(ssr(&tallies(300.0, 200.0, 900.0, 1000.0)).unwrap(), 0.5);
        assert_eq!(ssr(&tallies(0.0, 0.0, 0.0, 1000.0)).unwrap(), 0.0);
        assert_eq!(scr(&tallies(0.0, 0.0, 0.0, 1000.0)), Err(EconomicsError::NoGeneration));
        assert_eq!(ssr(&tallies(0.0, 0.0, 10.0, 0.0)), Err(EconomicsError::NoLoad));
    }

    #[test]
    fn npv_examples() {
        let zero = npv_from_series(&[1.0, 2.0], &[1.0, 2.0], &[0.2, 0.3], &[0, 1], 1.0, 1008.04, 0.0558).unwrap();
        assert_eq!(zero, -1008.04);
        let lump = npv_from_series(&[200.0], &[0.0], &[1.0], &[1], 1.0, 1008.04, 0.0558).unwrap();
        assert!((lump - (-1008.04 + 200.0 / 1.0558)).abs() < 1e-9);
        assert!((lump - -818.6101837469217).abs() < 1e-9);
        let flat = npv_from_series(&[3.0, 1.0], &[1.0, 0.0], &[0.5, 2.0], &[0, 7], 1.0, 1.0, 0.0).unwrap();
        assert_eq!(flat, 2.0);
        assert!(matches!(
            npv_from_series(&[1.0], &[1.0, 2.0], &[0.1], &[0], 1.0, 0.0, 0.0),
            Err(EconomicsError::Misaligned(_))
        ));
    }

    fn yearly(values: &[f64]) -> Vec<DcfPoint> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| DcfPoint { window: i, start_years: i as f64, end_years: i as f64 + 1.0, value: v })
            .collect()
    }

    #[test]
    fn dpb_examples() {
        assert_eq!(dpb(&yearly(&[100.0, 100.0, 100.0, 100.0]), 250.0), Payback::Years(2.5));
        assert_eq!(dpb(&yearly(&[0.0; 5]), 10.0), Payback::Never);
        assert_eq!(dpb(&yearly(&[]), 0.0), Payback::Years(0.0));
        assert_eq!(dpb(&yearly(&[50.0, 50.0]), 100.0), Payback::Years(2.0));
    }

    #[test]
    fn payback_json() {
        assert_eq!(serde_json::to_string(&Payback::Never).unwrap(), "\"never\"");
        assert_eq!(serde_json::to_string(&Payback::Years(3.5)).unwrap(), "3.5");
        let back: Payback = serde_json::from_str("3.5").unwrap();
        assert_eq!(back, Payback::Years(3.5));
        assert_eq!(serde_json::from_str::<Payback>("\"never\"").unwrap(), Payback::Never);
        assert!(serde_json::from_str::<Payback>("\"soon\"").is_err());
    }

    #[test]
    fn whole_year_index() {
        assert_eq!(whole_years(0, 3600.0), 0);
        assert_eq!(whole_years(8759, 3600.0), 0);
        assert_eq!(whole_years(8760, 3600.0), 1);
    }

    proptest! {
        #[test]
        fn never_iff_negative_npv(values in prop::collection::vec(0.0f64..50.0, 0..30), capital in 0.0f64..600.0) {
            let dcf = yearly(&values);
            let npv = values.iter().sum::<f64>() - capital;
            prop_assert_eq!(dpb(&dcf, capital) == Payback::Never, npv < 0.0);
        }

        #[test]
        fn npv_monotone_in_capital_and_rate(
            savings in prop::collection::vec(0.0f64..10.0, 1..40),
            c1 in 0.0f64..100.0, dc in 0.0f64..100.0,
            r1 in 0.0f64..0.2, dr in 0.0f64..0.2,
        ) {
            let n = savings.len();
            let zeros = vec![0.0; n];
            let price = vec![1.0; n];
            let years: Vec<u32> = (0..n as u32).map(|k| k / 4).collect();
            let f = |c, r| npv_from_series(&savings, &zeros, &price, &years, 1.0, c, r).unwrap();
            prop_assert!(f(c1 + dc, r1) <= f(c1, r1));
            prop_assert!(f(c1, r1 + dr) <= f(c1, r1) + 1e-12);
        }

        #[test]
        fn dpb_lies_inside_the_crossing_window(values in prop::collection::vec(0.0f64..50.0, 1..30), capital in 1.0f64..600.0) {
            if let Payback::Years(y) = dpb(&yearly(&values), capital) {
                let k = y.ceil().max(1.0) as usize - 1;
                let before: f64 = values[..k].iter().sum();
                prop_assert!(before < capital + 1e-9);
                prop_assert!(before + values[k] >= capital - 1e-9);
            }
        }
    }
}
