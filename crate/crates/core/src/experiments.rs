//! The three case studies: sizing sweep over a battery catalog, time
//! resolution sensitivity, and optimal dispatch against the greedy policy.
//!
//! Independent simulations run on the rayon pool; results keep catalog
//! order whatever the completion order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{resample, DataError, Resolution, SeriesFrame};
use crate::degradation::{initial_degradation_cost, DegradationParams};
use crate::dispatch::{build_window_problem, solve_window, BatterySpec, PlantSpec, SolverConfig};
use crate::economics::{battery_capital_cost, evaluate, CostModel, EconomicReport, Payback};
use crate::lifetime::{simulate_lifetime, LifetimeConfig, LifetimeResult, Policy, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryModel {
    pub e_nominal: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelCatalog {
    pub models: Vec<BatteryModel>,
}

impl Default for ModelCatalog {
    fn default() -> Self {
        const TABLE: [(f64, f64); 10] = [
            (1.0, 0.5),
            (2.0, 1.0),
            (3.0, 1.5),
            (4.0, 2.0),
            (5.0, 2.5),
            (6.9, 3.5),
            (10.0, 5.0),
            (13.8, 7.0),
            (15.0, 5.0),
            (21.7, 10.5),
        ];
        Self {
            models: TABLE.iter().map(|&(e_nominal, power)| BatteryModel { e_nominal, power }).collect(),
        }
    }
}

impl ModelCatalog {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.models.is_empty() {
            return Err(ExperimentError::InvalidInput("battery catalog is empty".into()));
        }
        if let Some(m) = self.models.iter().find(|m| !(m.e_nominal > 0.0 && m.power > 0.0)) {
            return Err(ExperimentError::InvalidInput(format!(
                "catalog entry {} kWh / {} kW must be positive",
                m.e_nominal, m.power
            )));
        }
        Ok(())
    }
}

/// Chemistry and warranty settings shared by every catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryTemplate {
    pub eta_roundtrip: f64,
    pub soc_min_frac: f64,
    pub soc_max_frac: f64,
    pub soh_eol: f64,
    /// Warranted discharge throughput per kWh of nominal capacity.
    pub throughput_per_kwh: f64,
}

impl Default for BatteryTemplate {
    fn default() -> Self {
        let b = BatterySpec::from_rating(1.0, 1.0);
        Self {
            eta_roundtrip: b.eta_roundtrip,
            soc_min_frac: b.soc_min_frac,
            soc_max_frac: b.soc_max_frac,
            soh_eol: b.soh_eol,
            throughput_per_kwh: b.warranted_throughput,
        }
    }
}

impl BatteryTemplate {
    pub fn spec(&self, model: &BatteryModel) -> BatterySpec {
        BatterySpec {
            e_nominal: model.e_nominal,
            p_discharge_max: model.power,
            p_charge_max: model.power,
            eta_roundtrip: self.eta_roundtrip,
            soc_min_frac: self.soc_min_frac,
            soc_max_frac: self.soc_max_frac,
            soh_eol: self.soh_eol,
            warranted_throughput: self.throughput_per_kwh * model.e_nominal,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Everything except the data and the battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Study {
    pub plant: PlantSpec,
    pub template: BatteryTemplate,
    pub params: DegradationParams,
    pub lifetime: LifetimeConfig,
    pub solver: SolverConfig,
    pub costs: CostModel,
}

/// Condensed lifetime outcome for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeSummary {
    pub t_eol_years: f64,
    pub termination: Termination,
    pub windows: usize,
    pub cycle_count: f64,
    pub cycle_degradation: f64,
    pub calendar_degradation: f64,
    pub final_loss: f64,
    pub discharged_kwh: f64,
    pub import_with_bess_kwh: f64,
    pub import_baseline_kwh: f64,
    /// Import plus degradation cost per simulated year, €.
    pub dispatch_cost_per_year: f64,
    /// Weighted cycles per depth-of-discharge decile.
    pub cycles_by_dod: Vec<f64>,
}

impl LifetimeSummary {
    pub fn of(result: &LifetimeResult) -> Self {
        let sum = |f: fn(&crate::lifetime::WindowRecord) -> f64| result.windows.iter().fold(0.0, |acc, w| acc + f(w));
        let cost = sum(|w| w.objective);
        Self {
            t_eol_years: result.t_eol_years,
            termination: result.termination,
            windows: result.windows.len(),
            cycle_count: sum(|w| w.cycle_count),
            cycle_degradation: sum(|w| w.cycle_degradation),
            calendar_degradation: sum(|w| w.calendar_degradation),
            final_loss: result.final_state.loss,
            discharged_kwh: result.tallies.discharged,
            import_with_bess_kwh: result.tallies.import_with_bess,
            import_baseline_kwh: result.tallies.import_baseline,
            dispatch_cost_per_year: if result.t_eol_years > 0.0 { cost / result.t_eol_years } else { 0.0 },
            cycles_by_dod: result.histogram.by_dod(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub lifetime: LifetimeSummary,
    pub economics: EconomicReport,
}

/// Outcome of one simulation; failures are kept, not dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Ok(ModelOutcome),
    Failed { error: String },
}

impl RunOutcome {
    pub fn ok(&self) -> Option<&ModelOutcome> {
        match self {
            Self::Ok(o) => Some(o),
            Self::Failed { .. } => None,
        }
    }
}

impl Study {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |e: String| ExperimentError::InvalidInput(e);
        self.plant.inverter.validate().map_err(|e| bad(e.to_string()))?;
        self.plant.grid.validate().map_err(|e| bad(e.to_string()))?;
        self.params.validate().map_err(|e| bad(e.to_string()))?;
        self.lifetime.validate().map_err(|e| bad(e.to_string()))?;
        self.costs.validate().map_err(|e| bad(e.to_string()))?;
        self.template
            .spec(&BatteryModel { e_nominal: 1.0, power: 1.0 })
            .validate()
            .map_err(|e| bad(e.to_string()))
    }

    /// Full lifetime of one battery under `policy`.
    pub fn simulate(&self, frame: &SeriesFrame, model: &BatteryModel, policy: Policy) -> Result<LifetimeResult, String> {
        let battery = self.template.spec(model);
        let capital = battery_capital_cost(&battery, model.power, &self.costs);
        let c_bd = initial_degradation_cost(&battery, capital).map_err(|e| e.to_string())?;
        let cfg = LifetimeConfig { policy, ..self.lifetime };
        simulate_lifetime(frame, &self.plant, &battery, &self.params, &cfg, &self.solver, capital, c_bd)
            .map_err(|e| e.to_string())
    }

    pub fn run(&self, frame: &SeriesFrame, model: &BatteryModel, policy: Policy) -> RunOutcome {
        let outcome = self.simulate(frame, model, policy).and_then(|r| {
            let economics = evaluate(&r, &self.costs).map_err(|e| e.to_string())?;
            Ok(ModelOutcome {
                lifetime: LifetimeSummary::of(&r),
                economics,
            })
        });
        match outcome {
            Ok(o) => RunOutcome::Ok(o),
            Err(error) => {
                log::warn!("{} kWh / {} kW failed: {error}", model.e_nominal, model.power);
                RunOutcome::Failed { error }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub index: usize,
    pub model: BatteryModel,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub resolution_minutes: u32,
    pub entries: Vec<SweepEntry>,
    /// Catalog indices by NPV, best first; failed entries come last.
    pub ranking: Vec<usize>,
    pub best: Option<usize>,
    /// False when any entry failed.
    pub complete: bool,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str =
        "index,e_nominal_kwh,power_kw,status,t_eol_years,termination,cycles,capital_eur,npv_eur,dpb_years,scr,ssr";

    /// One row per catalog entry, in catalog order.
    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let head = format!("{},{},{}", e.index, e.model.e_nominal, e.model.power);
            match &e.outcome {
                RunOutcome::Ok(o) => out.push_str(&format!(
                    "{head},ok,{},{},{},{}\n",
                    o.lifetime.t_eol_years,
                    termination_name(o.lifetime.termination),
                    o.lifetime.cycle_count,
                    o.economics.csv_row()
                )),
                RunOutcome::Failed { .. } => out.push_str(&format!("{head},failed,,,,,,,,\n")),
            }
        }
        out
    }
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::EndOfLife => "end_of_life",
        Termination::CapHit => "cap_hit",
    }
}

/// NPV ranking, best first; ties go to the smaller battery, then the earlier
/// catalog entry.
fn rank(entries: &[SweepEntry]) -> Vec<usize> {
    let mut ok: Vec<(usize, f64, f64)> = entries
        .iter()
        .filter_map(|e| e.outcome.ok().map(|o| (e.index, o.economics.npv, e.model.e_nominal)))
        .collect();
    ok.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)));
    let mut ranking: Vec<usize> = ok.into_iter().map(|(i, _, _)| i).collect();
    ranking.extend(entries.iter().filter(|e| e.outcome.ok().is_none()).map(|e| e.index));
    ranking
}

/// Simulates every catalog entry under the configured policy.
pub fn size_sweep(frame: &SeriesFrame, study: &Study, catalog: &ModelCatalog) -> Result<SweepReport, ExperimentError> {
    study.validate()?;
    catalog.validate()?;
    let entries: Vec<SweepEntry> = catalog
        .models
        .par_iter()
        .enumerate()
        .map(|(index, model)| SweepEntry {
            index,
            model: *model,
            outcome: study.run(frame, model, study.lifetime.policy),
        })
        .collect();
    let ranking = rank(&entries);
    let complete = entries.iter().all(|e| e.outcome.ok().is_some());
    let best = ranking.first().copied().filter(|&i| entries[i].outcome.ok().is_some());
    Ok(SweepReport {
        resolution_minutes: frame.resolution().step_minutes(),
        entries,
        ranking,
        best,
        complete,
    })
}

/// Differences of a run against the base-resolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub t_eol_years: f64,
    /// Relative to the base lifetime, percent.
    pub t_eol_pct: f64,
    pub npv: f64,
    /// `None` when either run never pays back.
    pub dpb_years: Option<f64>,
    pub scr: f64,
    pub ssr: f64,
    pub cycle_count: f64,
}

impl Deltas {
    fn between(run: &ModelOutcome, base: &ModelOutcome) -> Self {
        let (a, b) = (&run.lifetime, &base.lifetime);
        let dpb = match (run.economics.dpb, base.economics.dpb) {
            (Payback::Years(x), Payback::Years(y)) => Some(x - y),
            _ => None,
        };
        Self {
            t_eol_years: a.t_eol_years - b.t_eol_years,
            t_eol_pct: 100.0 * (a.t_eol_years - b.t_eol_years) / b.t_eol_years,
            npv: run.economics.npv - base.economics.npv,
            dpb_years: dpb,
            scr: run.economics.scr - base.economics.scr,
            ssr: run.economics.ssr - base.economics.ssr,
            cycle_count: a.cycle_count - b.cycle_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRow {
    pub resolution_minutes: u32,
    pub outcome: RunOutcome,
    pub deltas: Option<Deltas>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub model: BatteryModel,
    pub base_minutes: u32,
    pub rows: Vec<ResolutionRow>,
}

impl SensitivityReport {
    pub const CSV_HEADER: &'static str =
        "resolution_min,status,t_eol_years,cycles,npv_eur,dpb_years,scr,ssr,d_t_eol_pct,d_npv_eur,d_scr,d_ssr";

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            match (&r.outcome, &r.deltas) {
                (RunOutcome::Ok(o), d) => {
                    let d = d.as_ref().map_or_else(
                        || ",,,".to_string(),
                        |d| format!("{},{},{},{}", d.t_eol_pct, d.npv, d.scr, d.ssr),
                    );
                    out.push_str(&format!(
                        "{},ok,{},{},{},{},{},{},{d}\n",
                        r.resolution_minutes,
                        o.lifetime.t_eol_years,
                        o.lifetime.cycle_count,
                        o.economics.npv,
                        o.economics.dpb,
                        o.economics.scr,
                        o.economics.ssr
                    ));
                }
                (RunOutcome::Failed { .. }, _) => out.push_str(&format!("{},failed,,,,,,,,,,\n", r.resolution_minutes)),
            }
        }
        out
    }
}

/// Re-runs one battery at each resolution, aggregating the base data by
/// block averaging. Deltas are taken against the base resolution.
pub fn resolution_sensitivity(
    base: &SeriesFrame,
    study: &Study,
    model: &BatteryModel,
    resolutions: &[Resolution],
) -> Result<SensitivityReport, ExperimentError> {
    study.validate()?;
    if resolutions.is_empty() {
        return Err(ExperimentError::InvalidInput("no resolutions requested".into()));
    }
    let frames = resolutions
        .iter()
        .map(|&r| resample(base, r))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes: Vec<RunOutcome> = frames
        .par_iter()
        .map(|f| study.run(f, model, study.lifetime.policy))
        .collect();
    let base_outcome = outcomes
        .iter()
        .zip(resolutions)
        .find(|(_, r)| **r == base.resolution())
        .and_then(|(o, _)| o.ok().cloned());
    let base_outcome = match base_outcome {
        Some(o) => Some(o),
        None => study.run(base, model, study.lifetime.policy).ok().cloned(),
    };
    let rows = outcomes
        .into_iter()
        .zip(resolutions)
        .map(|(outcome, r)| {
            let deltas = match (outcome.ok(), &base_outcome) {
                (Some(o), Some(b)) => Some(Deltas::between(o, b)),
                _ => None,
            };
            ResolutionRow {
                resolution_minutes: r.step_minutes(),
                outcome,
                deltas,
            }
        })
        .collect();
    Ok(SensitivityReport {
        model: *model,
        base_minutes: base.resolution().step_minutes(),
        rows,
    })
}

/// Window-by-window check that the optimiser never costs more than the
/// greedy policy from the same starting state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub windows_checked: usize,
    pub violations: usize,
    /// Largest `optimal − greedy` objective seen, €; ≤ 0 when dominant.
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemsComparison {
    pub model: BatteryModel,
    pub optimal: RunOutcome,
    pub greedy: RunOutcome,
    /// Optimal lifetime over greedy lifetime minus one, percent.
    pub lifetime_extension_pct: Option<f64>,
    pub npv_gain: Option<f64>,
    pub dominance: Option<Dominance>,
}

fn dominance(frame: &SeriesFrame, study: &Study, model: &BatteryModel, greedy: &LifetimeResult) -> Result<Dominance, String> {
    let battery = study.template.spec(model);
    let len = greedy_window_len(frame, &study.lifetime);
    let rows: Vec<Result<f64, String>> = greedy
        .windows
        .par_iter()
        .map(|w| {
            let window = frame.window(w.data_offset, len);
            let problem = build_window_problem(&window, &study.plant, &battery, w.e_b_start, w.c_bd_start, w.soc_start)
                .map_err(|e| e.to_string())?;
            let opt = solve_window(&problem, &study.solver).map_err(|e| e.to_string())?;
            Ok(opt.objective - w.objective)
        })
        .collect();
    let mut d = Dominance {
        windows_checked: 0,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for r in rows {
        let excess = r?;
        d.windows_checked += 1;
        if excess > 1e-9 * (1.0 + excess.abs()) {
            d.violations += 1;
        }
        d.max_excess = d.max_excess.max(excess);
    }
    Ok(d)
}

fn greedy_window_len(frame: &SeriesFrame, cfg: &LifetimeConfig) -> usize {
    cfg.window_days as usize * frame.resolution().steps_per_day()
}

/// Runs the optimiser and the greedy policy side by side.
pub fn compare_hems(frame: &SeriesFrame, study: &Study, model: &BatteryModel) -> Result<HemsComparison, ExperimentError> {
    study.validate()?;
    let (opt, greedy) = rayon::join(
        || study.simulate(frame, model, Policy::Optimal),
        || study.simulate(frame, model, Policy::Greedy),
    );
    let dominance = greedy.as_ref().ok().and_then(|g| match dominance(frame, study, model, g) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("dominance check failed: {e}");
            None
        }
    });
    let wrap = |r: Result<LifetimeResult, String>| match r.and_then(|r| {
        let economics = evaluate(&r, &study.costs).map_err(|e| e.to_string())?;
        Ok(ModelOutcome {
            lifetime: LifetimeSummary::of(&r),
            economics,
        })
    }) {
        Ok(o) => RunOutcome::Ok(o),
        Err(error) => RunOutcome::Failed { error },
    };
    let optimal = wrap(opt);
    let greedy = wrap(greedy);
    let (lifetime_extension_pct, npv_gain) = match (optimal.ok(), greedy.ok()) {
        (Some(o), Some(g)) => (
            Some(100.0 * (o.lifetime.t_eol_years / g.lifetime.t_eol_years - 1.0)),
            Some(o.economics.npv - g.economics.npv),
        ),
        _ => (None, None),
    };
    Ok(HemsComparison {
        model: *model,
        optimal,
        greedy,
        lifetime_extension_pct,
        npv_gain,
        dominance,
    })
}
