//! Rolling weekly dispatch coupled to capacity fade, run until end of life.
//!
//! Each window is dispatched with the battery's current capacity and
//! degradation cost, its SOC trace is rainflow-counted, and the degradation
//! state is advanced before the next window. Input data are recycled
//! cyclically, so a single year drives a multi-year simulation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{SeriesFrame, Window};
use crate::degradation::{
    advance_state, calendar_degradation, cycle_degradation, DegradationParams, DegradationState, PeriodStress,
};
use crate::dispatch::{
    baseline_import_no_battery, build_window_problem, greedy_self_consumption_dispatch, solve_window,
    verify_solution, BatterySpec, ConstraintClass, DispatchError, DispatchSolution, PlantSpec, SolverConfig,
};
use crate::rainflow::{extract_cycles, CycleRecord};

pub const SECONDS_PER_YEAR: f64 = 365.0 * 24.0 * 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Optimal,
    Greedy,
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(Self::Optimal),
            "greedy" => Ok(Self::Greedy),
            other => Err(format!("unknown policy '{other}' (expected optimal or greedy)")),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Optimal => "optimal",
            Self::Greedy => "greedy",
        })
    }
}

/// How the degradation cost used by the dispatch evolves between windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostRule {
    /// Consumed life times capital over cumulative discharge, refreshed
    /// every window. Early capacity fade is dominated by SEI formation and
    /// calendar ageing, so after the first window this cost usually exceeds
    /// any grid price and the battery stops discharging for good.
    Cumulative,
    /// Keep the initial capital-over-warranted-throughput cost for the whole
    /// life.
    #[default]
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifetimeConfig {
    pub window_days: u32,
    pub max_years: f64,
    pub policy: Policy,
    /// Initial SOC as a fraction of nominal capacity.
    pub initial_soc_frac: f64,
    pub cost_rule: CostRule,
}

impl Default for LifetimeConfig {
    fn default() -> Self {
        Self {
            window_days: 7,
            max_years: 30.0,
            policy: Policy::Optimal,
            initial_soc_frac: 0.5,
            cost_rule: CostRule::Fixed,
        }
    }
}

impl LifetimeConfig {
    pub fn validate(&self) -> Result<(), LifetimeError> {
        if self.window_days < 1 {
            return Err(LifetimeError::InvalidConfig("window_days must be >= 1".into()));
        }
        if !(self.max_years > 0.0 && self.max_years.is_finite()) {
            return Err(LifetimeError::InvalidConfig(format!("max_years must be positive, got {}", self.max_years)));
        }
        if !(0.0..=1.0).contains(&self.initial_soc_frac) {
            return Err(LifetimeError::InvalidConfig("initial_soc_frac must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LifetimeError {
    #[error("invalid lifetime configuration: {0}")]
    InvalidConfig(String),
    #[error("window {window}: {source}")]
    Dispatch {
        window: usize,
        #[source]
        source: DispatchError,
    },
    #[error("window {window}: solution violates {class} by {residual:.3e}")]
    Verification {
        window: usize,
        class: ConstraintClass,
        residual: f64,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Capacity reached the end-of-life threshold.
    EndOfLife,
    /// The simulation horizon cap was reached first.
    CapHit,
}

/// One row of the window log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window: usize,
    /// First step of the window within the input data.
    pub data_offset: usize,
    pub start_years: f64,
    pub soc_start: f64,
    pub e_b_start: f64,
    pub c_bd_start: f64,
    pub objective: f64,
    pub optimal: bool,
    pub imported_kwh: f64,
    pub exported_kwh: f64,
    pub discharged_kwh: f64,
    pub charged_kwh: f64,
    pub baseline_import_kwh: f64,
    pub savings_eur: f64,
    pub cycle_count: f64,
    pub cycle_degradation: f64,
    pub calendar_degradation: f64,
    pub f_b: f64,
    pub loss: f64,
    pub e_b: f64,
    pub c_bd: f64,
    pub soc_end: f64,
}

/// Lifetime energy totals, kWh. PV terms are on the DC side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyTallies {
    pub pv_to_load: f64,
    pub pv_to_battery: f64,
    pub pv_export: f64,
    pub pv_total: f64,
    pub load_total: f64,
    pub import_with_bess: f64,
    pub import_baseline: f64,
    pub export: f64,
    pub grid_to_battery: f64,
    pub discharged: f64,
}

impl EnergyTallies {
    fn add(&mut self, other: &EnergyTallies) {
        self.pv_to_load += other.pv_to_load;
        self.pv_to_battery += other.pv_to_battery;
        self.pv_export += other.pv_export;
        self.pv_total += other.pv_total;
        self.load_total += other.load_total;
        self.import_with_bess += other.import_with_bess;
        self.import_baseline += other.import_baseline;
        self.export += other.export;
        self.grid_to_battery += other.grid_to_battery;
        self.discharged += other.discharged;
    }
}

/// Undiscounted savings of one window that fall in one whole year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CashFlow {
    pub window: usize,
    pub year: u32,
    pub savings: f64,
}

/// Weighted cycle counts binned by depth and mean SOC (tenths).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DodHistogram {
    pub bins: usize,
    /// `counts[dod_bin][soc_bin]`.
    pub counts: Vec<Vec<f64>>,
}

impl Default for DodHistogram {
    fn default() -> Self {
        Self {
            bins: 10,
            counts: vec![vec![0.0; 10]; 10],
        }
    }
}

impl DodHistogram {
    fn bin(&self, x: f64) -> usize {
        ((x * self.bins as f64).floor().max(0.0) as usize).min(self.bins - 1)
    }

    pub fn add(&mut self, cycles: &[CycleRecord]) {
        for c in cycles {
            let (i, j) = (self.bin(c.dod), self.bin(c.mean_soc));
            self.counts[i][j] += c.weight;
        }
    }

    /// Weighted cycle count per depth bin.
    pub fn by_dod(&self) -> Vec<f64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

/// PV split of one window, kWh.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowAttribution {
    pub pv_to_load: f64,
    pub pv_to_battery: f64,
    pub pv_export: f64,
    pub import: f64,
    pub export: f64,
    pub grid_to_battery: f64,
}

/// Splits PV between battery, load and export: the battery is fed from PV
/// first, PV then serves the load, the rest is exported.
pub fn attribute_flows(solution: &DispatchSolution, window: &Window, eta_inv: f64) -> FlowAttribution {
    let t_s = window.t_s();
    let mut out = FlowAttribution::default();
    for (k, s) in solution.steps.iter().enumerate() {
        let pv = window.pv_dc[k];
        let load_dc = window.load_ac[k] / eta_inv;
        let charge = -s.p_ts;
        let to_bat = charge.min(pv);
        let to_load = (pv - to_bat).min(load_dc);
        out.pv_to_battery += to_bat * t_s;
        out.pv_to_load += to_load * t_s;
        out.pv_export += (pv - to_bat - to_load) * t_s;
        out.grid_to_battery += (charge - to_bat).max(0.0) * t_s;
        out.import += s.p_fg * t_s;
        out.export += -s.p_tg * t_s;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeResult {
    pub t_eol_years: f64,
    pub termination: Termination,
    pub battery: BatterySpec,
    pub capital: f64,
    pub windows: Vec<WindowRecord>,
    pub tallies: EnergyTallies,
    pub cash_flows: Vec<CashFlow>,
    pub histogram: DodHistogram,
    pub final_state: DegradationState,
}

impl LifetimeResult {
    /// Total weighted cycle count.
    pub fn cycle_count(&self) -> f64 {
        self.windows.iter().map(|w| w.cycle_count).sum()
    }
}

/// Mutable progress of a simulation; everything needed to resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub next_window: usize,
    pub soc: f64,
    pub degradation: DegradationState,
    pub windows: Vec<WindowRecord>,
    pub tallies: EnergyTallies,
    pub cash_flows: Vec<CashFlow>,
    pub histogram: DodHistogram,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Hash of every simulation input; resuming requires a match.
    pub fingerprint: String,
    pub state: SimState,
}

/// Step-by-step lifetime simulation.
pub struct LifetimeSimulator<'a> {
    frame: &'a SeriesFrame,
    plant: PlantSpec,
    battery: BatterySpec,
    params: DegradationParams,
    cfg: LifetimeConfig,
    solver: SolverConfig,
    capital: f64,
    steps_per_window: usize,
    fingerprint: String,
    state: SimState,
}

impl<'a> LifetimeSimulator<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        frame: &'a SeriesFrame,
        plant: PlantSpec,
        battery: BatterySpec,
        params: DegradationParams,
        cfg: LifetimeConfig,
        solver: SolverConfig,
        capital: f64,
        initial_c_bd: f64,
    ) -> Result<Self, LifetimeError> {
        cfg.validate()?;
        params.validate().map_err(|e| LifetimeError::InvalidConfig(e.to_string()))?;
        battery.validate().map_err(|e| LifetimeError::InvalidConfig(e.to_string()))?;
        if !(capital >= 0.0 && capital.is_finite()) {
            return Err(LifetimeError::InvalidConfig(format!("capital must be >= 0, got {capital}")));
        }
        let steps_per_window = cfg.window_days as usize * frame.resolution().steps_per_day();
        if frame.len() < steps_per_window {
            return Err(LifetimeError::InvalidConfig(format!(
                "input covers {} steps, one window needs {steps_per_window}",
                frame.len()
            )));
        }
        let fingerprint = fingerprint(frame, &plant, &battery, &params, &cfg, &solver, capital, initial_c_bd);
        let state = SimState {
            next_window: 0,
            soc: cfg.initial_soc_frac * battery.e_nominal,
            degradation: DegradationState::new(&battery, initial_c_bd),
            windows: Vec::new(),
            tallies: EnergyTallies::default(),
            cash_flows: Vec::new(),
            histogram: DodHistogram::default(),
            termination: None,
        };
        Ok(Self {
            frame,
            plant,
            battery,
            params,
            cfg,
            solver,
            capital,
            steps_per_window,
            fingerprint,
            state,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.termination.is_some()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            fingerprint: self.fingerprint.clone(),
            state: self.state.clone(),
        }
    }

    /// Continues from `checkpoint`; fails if it was taken with other inputs.
    pub fn resume(&mut self, checkpoint: Checkpoint) -> Result<(), LifetimeError> {
        if checkpoint.fingerprint != self.fingerprint {
            return Err(LifetimeError::Checkpoint("inputs differ from the checkpointed run".into()));
        }
        if checkpoint.state.windows.len() != checkpoint.state.next_window {
            return Err(LifetimeError::Checkpoint("window log does not match the window counter".into()));
        }
        self.state = checkpoint.state;
        Ok(())
    }

    fn window_seconds(&self) -> f64 {
        self.steps_per_window as f64 * self.frame.resolution().step_seconds()
    }

    /// Simulates the next window. Returns `None` once the run has ended.
    pub fn step(&mut self) -> Result<Option<&WindowRecord>, LifetimeError> {
        if self.state.termination.is_some() {
            return Ok(None);
        }
        let dt = self.window_seconds();
        let cap_s = self.cfg.max_years * SECONDS_PER_YEAR;
        let st = &self.state.degradation;
        if st.elapsed_s + dt > cap_s * (1.0 + 1e-12) {
            self.state.termination = Some(Termination::CapHit);
            return Ok(None);
        }
        let w_idx = self.state.next_window;
        let n = self.frame.len();
        let offset = ((w_idx as u128 * self.steps_per_window as u128) % n as u128) as usize;
        let window = self.frame.window(offset, self.steps_per_window);
        let e_b = st.e_b;
        let soc_start = self
            .state
            .soc
            .clamp(self.battery.soc_min_frac * e_b, self.battery.soc_max_frac * e_b);
        let wrap = |source| LifetimeError::Dispatch { window: w_idx, source };
        let problem = build_window_problem(&window, &self.plant, &self.battery, e_b, st.c_bd, soc_start).map_err(wrap)?;
        let solution = match self.cfg.policy {
            Policy::Optimal => solve_window(&problem, &self.solver),
            Policy::Greedy => greedy_self_consumption_dispatch(&problem),
        }
        .map_err(wrap)?;
        let report = verify_solution(&solution, &problem, self.solver.feasibility_tol);
        if let Some(v) = report.violations().next() {
            return Err(LifetimeError::Verification {
                window: w_idx,
                class: v.class,
                residual: v.max,
            });
        }

        let e0 = self.battery.e_nominal;
        let trace: Vec<f64> = solution.soc_trace().iter().map(|s| (s / e0).clamp(0.0, 1.0)).collect();
        let cycles = extract_cycles(&trace).expect("trace clamped to [0, 1]");
        let mean_soc = trace[1..].iter().sum::<f64>() / (trace.len() - 1) as f64;
        let temperature = window.mean_temperature();
        let t_s = window.t_s();
        let discharged = solution.discharged(t_s);
        let period = PeriodStress {
            cycles: &cycles,
            dt_s: dt,
            temperature,
            mean_soc,
            discharged_kwh: discharged,
        };
        let mut next = advance_state(st, &period, &self.battery, self.capital, &self.params);
        if self.cfg.cost_rule == CostRule::Fixed {
            next.c_bd = st.c_bd;
        }
        let cyc = cycle_degradation(&cycles, temperature, &self.params);
        let cal = calendar_degradation(dt, mean_soc, temperature, &self.params);

        // energy and money
        let flows = attribute_flows(&solution, &window, self.plant.inverter.eta_inv);
        let baseline = baseline_import_no_battery(&window, &self.plant.inverter, &self.plant.grid);
        let step_s = self.frame.resolution().step_seconds();
        let mut savings_total = 0.0;
        for (k, s) in solution.steps.iter().enumerate() {
            let saving = (baseline.import_kw[k] - s.p_fg) * t_s * window.price[k];
            let year = ((st.elapsed_s + k as f64 * step_s) / SECONDS_PER_YEAR).floor() as u32;
            savings_total += saving;
            match self.state.cash_flows.last_mut() {
                Some(cf) if cf.window == w_idx && cf.year == year => cf.savings += saving,
                _ => self.state.cash_flows.push(CashFlow {
                    window: w_idx,
                    year,
                    savings: saving,
                }),
            }
        }
        let baseline_kwh = baseline.energy(t_s);
        self.state.tallies.add(&EnergyTallies {
            pv_to_load: flows.pv_to_load,
            pv_to_battery: flows.pv_to_battery,
            pv_export: flows.pv_export,
            pv_total: window.pv_dc.iter().sum::<f64>() * t_s,
            load_total: window.load_ac.iter().sum::<f64>() * t_s,
            import_with_bess: flows.import,
            import_baseline: baseline_kwh,
            export: flows.export,
            grid_to_battery: flows.grid_to_battery,
            discharged,
        });
        self.state.histogram.add(&cycles);

        let record = WindowRecord {
            window: w_idx,
            data_offset: offset,
            start_years: st.elapsed_s / SECONDS_PER_YEAR,
            soc_start,
            e_b_start: e_b,
            c_bd_start: st.c_bd,
            objective: solution.objective,
            optimal: solution.is_optimal(),
            imported_kwh: flows.import,
            exported_kwh: flows.export,
            discharged_kwh: discharged,
            charged_kwh: solution.charged(t_s),
            baseline_import_kwh: baseline_kwh,
            savings_eur: savings_total,
            cycle_count: cycles.iter().fold(0.0, |acc, c| acc + c.weight),
            cycle_degradation: cyc,
            calendar_degradation: cal,
            f_b: next.f_b,
            loss: next.loss,
            e_b: next.e_b,
            c_bd: next.c_bd,
            soc_end: solution.final_soc(),
        };
        log::debug!(
            "window {w_idx}: objective {:.4} EUR, loss {:.5}, c_bd {:.4}",
            record.objective,
            record.loss,
            record.c_bd
        );
        self.state.soc = record.soc_end;
        self.state.degradation = next;
        self.state.windows.push(record);
        self.state.next_window += 1;
        if next.is_end_of_life(&self.battery) {
            self.state.termination = Some(Termination::EndOfLife);
        }
        Ok(self.state.windows.last())
    }

    /// Runs to completion, calling `on_window` after each window.
    pub fn run_with(mut self, mut on_window: impl FnMut(&WindowRecord)) -> Result<LifetimeResult, LifetimeError> {
        while let Some(record) = self.step()? {
            on_window(record);
        }
        Ok(self.finish())
    }

    /// Final result; call once `is_done()`.
    pub fn finish(self) -> LifetimeResult {
        let state = self.state;
        LifetimeResult {
            t_eol_years: state.degradation.elapsed_s / SECONDS_PER_YEAR,
            termination: state.termination.unwrap_or(Termination::CapHit),
            battery: self.battery,
            capital: self.capital,
            windows: state.windows,
            tallies: state.tallies,
            cash_flows: state.cash_flows,
            histogram: state.histogram,
            final_state: state.degradation,
        }
    }
}

/// Runs a whole lifetime.
#[allow(clippy::too_many_arguments)]
pub fn simulate_lifetime(
    frame: &SeriesFrame,
    plant: &PlantSpec,
    battery: &BatterySpec,
    params: &DegradationParams,
    cfg: &LifetimeConfig,
    solver: &SolverConfig,
    capital: f64,
    initial_c_bd: f64,
) -> Result<LifetimeResult, LifetimeError> {
    LifetimeSimulator::new(frame, *plant, *battery, *params, *cfg, *solver, capital, initial_c_bd)?.run_with(|_| {})
}

#[allow(clippy::too_many_arguments)]
fn fingerprint(
    frame: &SeriesFrame,
    plant: &PlantSpec,
    battery: &BatterySpec,
    params: &DegradationParams,
    cfg: &LifetimeConfig,
    solver: &SolverConfig,
    capital: f64,
    initial_c_bd: f64,
) -> String {
    let mut h = Sha256::new();
    h.update(frame.resolution().step_minutes().to_le_bytes());
    for series in [frame.pv_dc(), frame.load_ac(), frame.price()] {
        h.update((series.len() as u64).to_le_bytes());
        for v in series {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    if let Some(t) = frame.battery_temp() {
        for v in t {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    let settings = serde_json::json!({
        "plant": plant,
        "battery": battery,
        "params": params,
        "lifetime": cfg,
        "solver": solver,
        "capital": capital,
        "initial_c_bd": initial_c_bd,
    });
    h.update(settings.to_string().as_bytes());
    hex::encode(h.finalize())
}
