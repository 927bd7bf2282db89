//! Weekly battery dispatch: the MILP model, its exact solver and the
//! rule-based reference policies.
//!
//! Sign conventions follow the inverter's point of view: power leaving a
//! node is negative, power entering it positive. Battery discharge `p_fs` is
//! positive, charge `p_ts` negative; grid import `p_fg` positive, export
//! `p_tg` negative.

mod branch_bound;
mod chain;
mod milp;
mod policy;
mod problem;
mod pwl;
mod simplex;
mod solution;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use branch_bound::{solve_milp, BnbConfig, MilpOutcome, MilpStatus};
pub use milp::{MilpModel, RowSense, Variable, Constraint};
pub use policy::{baseline_import_no_battery, greedy_self_consumption_dispatch, BaselineImport};
pub use problem::{build_window_problem, WindowProblem, VARS_PER_STEP};
pub use solution::{verify_solution, DispatchSolution, ResidualReport, SolveStatus, StepFlows};

/// Inverter ratings. `p_dc_min` is the largest DC draw when charging the
/// battery from the AC side and is stored as a negative number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterSpec {
    pub eta_inv: f64,
    pub p_ac_max: f64,
    pub p_dc_max: f64,
    pub p_dc_min: f64,
}

impl Default for InverterSpec {
    fn default() -> Self {
        Self {
            eta_inv: 0.978,
            p_ac_max: 6.0,
            p_dc_max: 9.0,
            p_dc_min: -5.0,
        }
    }
}

impl InverterSpec {
    pub fn validate(&self) -> Result<(), DispatchError> {
        if !(self.eta_inv > 0.0 && self.eta_inv <= 1.0) {
            return Err(DispatchError::InvalidSpec(format!("eta_inv must be in (0, 1], got {}", self.eta_inv)));
        }
        if !(self.p_ac_max > 0.0 && self.p_dc_max > 0.0) {
            return Err(DispatchError::InvalidSpec("inverter power limits must be positive".into()));
        }
        if !(self.p_dc_min <= 0.0) {
            return Err(DispatchError::InvalidSpec(format!("p_dc_min must be <= 0, got {}", self.p_dc_min)));
        }
        Ok(())
    }
}

/// Grid connection limits. Import is positive, export is stored negative.
/// The default import limit is a typical residential contracted power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub p_import_max: f64,
    pub p_export_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            p_import_max: 5.75,
            p_export_max: -6.0,
        }
    }
}

impl GridSpec {
    pub fn new(p_import_max: f64, p_export_max: f64) -> Self {
        Self { p_import_max, p_export_max }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        if !(self.p_import_max >= 0.0) {
            return Err(DispatchError::InvalidSpec(format!("p_import_max must be >= 0, got {}", self.p_import_max)));
        }
        if !(self.p_export_max <= 0.0) {
            return Err(DispatchError::InvalidSpec(format!("p_export_max must be <= 0, got {}", self.p_export_max)));
        }
        Ok(())
    }
}

/// Battery ratings. `e_nominal` is the beginning-of-life capacity in kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    pub e_nominal: f64,
    pub p_discharge_max: f64,
    pub p_charge_max: f64,
    pub eta_roundtrip: f64,
    pub soc_min_frac: f64,
    pub soc_max_frac: f64,
    pub soh_eol: f64,
    /// Lifetime energy throughput covered by the warranty, kWh.
    pub warranted_throughput: f64,
}

impl BatterySpec {
    /// A battery with default chemistry parameters and symmetric power.
    pub fn from_rating(e_nominal: f64, p_max: f64) -> Self {
        Self {
            e_nominal,
            p_discharge_max: p_max,
            p_charge_max: p_max,
            eta_roundtrip: 0.94,
            soc_min_frac: 0.2,
            soc_max_frac: 0.8,
            soh_eol: 0.8,
            warranted_throughput: 4800.0 * e_nominal,
        }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let bad = |msg: String| Err(DispatchError::InvalidSpec(msg));
        if !(self.e_nominal > 0.0) {
            return bad(format!("battery capacity must be positive, got {}", self.e_nominal));
        }
        if !(self.p_discharge_max >= 0.0 && self.p_charge_max >= 0.0) {
            return bad("battery power limits must be >= 0".into());
        }
        if !(self.eta_roundtrip > 0.0 && self.eta_roundtrip <= 1.0) {
            return bad(format!("eta_roundtrip must be in (0, 1], got {}", self.eta_roundtrip));
        }
        if !(0.0 <= self.soc_min_frac && self.soc_min_frac < self.soc_max_frac && self.soc_max_frac <= 1.0) {
            return bad(format!(
                "soc limits must satisfy 0 <= min < max <= 1, got {} and {}",
                self.soc_min_frac, self.soc_max_frac
            ));
        }
        if !(self.soh_eol > 0.0 && self.soh_eol < 1.0) {
            return bad(format!("soh_eol must be in (0, 1), got {}", self.soh_eol));
        }
        if !(self.warranted_throughput > 0.0) {
            return bad("warranted_throughput must be positive".into());
        }
        Ok(())
    }
}

/// Everything on the household side of the battery.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSpec {
    pub inverter: InverterSpec,
    pub grid: GridSpec,
}

/// Which engine solves the window MILP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Exact dynamic programme over convex piecewise-linear value functions.
    #[default]
    Chain,
    /// Dense simplex with branch and bound on the full model.
    BranchBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_mip_gap: f64,
    pub time_limit_s: f64,
    pub feasibility_tol: f64,
    pub backend: Backend,
    pub max_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_mip_gap: 1e-4,
            time_limit_s: 60.0,
            feasibility_tol: 1e-6,
            backend: Backend::Chain,
            max_nodes: 200_000,
        }
    }
}

/// Constraint families of the window model, used for residual reports and
/// infeasibility diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintClass {
    DcBalance,
    AcBalance,
    Conversion,
    SocRecursion,
    InverterDc,
    InverterAc,
    GridImport,
    GridExport,
    BatteryPower,
    SocBounds,
    Exclusivity,
}

impl ConstraintClass {
    pub const ALL: [ConstraintClass; 11] = [
        Self::DcBalance,
        Self::AcBalance,
        Self::Conversion,
        Self::SocRecursion,
        Self::InverterDc,
        Self::InverterAc,
        Self::GridImport,
        Self::GridExport,
        Self::BatteryPower,
        Self::SocBounds,
        Self::Exclusivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DcBalance => "dc balance",
            Self::AcBalance => "ac balance",
            Self::Conversion => "inverter conversion",
            Self::SocRecursion => "soc recursion",
            Self::InverterDc => "inverter dc limits",
            Self::InverterAc => "inverter ac limits",
            Self::GridImport => "grid import limit",
            Self::GridExport => "grid export limit",
            Self::BatteryPower => "battery power limits",
            Self::SocBounds => "soc bounds",
            Self::Exclusivity => "exclusivity",
        }
    }
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DispatchError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("window has no steps")]
    EmptyWindow,
    #[error("initial soc {soc_init} kWh outside [{min}, {max}]")]
    SocInitOutOfBounds { soc_init: f64, min: f64, max: f64 },
    #[error("infeasible: {class} cannot be met{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Infeasible { class: ConstraintClass, step: Option<usize> },
    #[error("solver stopped without a feasible point: {0}")]
    NoIncumbent(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Solves one window with the configured backend.
pub fn solve_window(problem: &WindowProblem, config: &SolverConfig) -> Result<DispatchSolution, DispatchError> {
    match config.backend {
        Backend::Chain => chain::solve(problem, config),
        Backend::BranchBound => problem::solve_with_branch_bound(problem, config),
    }
}
