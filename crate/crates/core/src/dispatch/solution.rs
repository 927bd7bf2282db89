use serde::{Deserialize, Serialize};

use super::problem::WindowProblem;
use super::ConstraintClass;

/// Decision values for one step. Powers in kW, `soc` in kWh at the end of
/// the step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepFlows {
    pub p_fp: f64,
    pub p_tp: f64,
    pub p_fpac: f64,
    pub p_tpac: f64,
    pub p_fg: f64,
    pub p_tg: f64,
    pub p_fs: f64,
    pub p_ts: f64,
    pub soc: f64,
    pub i_p: bool,
    pub i_g: bool,
    pub i_s: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven optimal within the configured gap.
    Optimal,
    /// Stopped at a time or node limit with a feasible incumbent.
    TimeLimit,
    /// Produced by a rule-based policy, not an optimiser.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub steps: Vec<StepFlows>,
    pub soc_init: f64,
    pub objective: f64,
    /// Proven lower bound on the window optimum.
    pub bound: f64,
    pub status: SolveStatus,
    pub solve_seconds: f64,
}

impl DispatchSolution {
    /// Relative optimality gap; 0 when the bound meets the objective.
    pub fn gap(&self) -> f64 {
        let abs = self.objective - self.bound;
        if abs <= 1e-9 {
            0.0
        } else {
            abs / self.objective.abs().max(1e-9)
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// `[soc_init, soc_1, ..., soc_n]` in kWh.
    pub fn soc_trace(&self) -> Vec<f64> {
        std::iter::once(self.soc_init).chain(self.steps.iter().map(|s| s.soc)).collect()
    }

    pub fn final_soc(&self) -> f64 {
        self.steps.last().map_or(self.soc_init, |s| s.soc)
    }

    /// Energy taken from the grid, kWh.
    pub fn grid_import(&self, t_s: f64) -> f64 {
        self.steps.iter().map(|s| s.p_fg).sum::<f64>() * t_s
    }

    /// Energy fed into the grid, kWh (positive).
    pub fn grid_export(&self, t_s: f64) -> f64 {
        -self.steps.iter().map(|s| s.p_tg).sum::<f64>() * t_s
    }

    /// DC energy delivered by the battery, kWh.
    pub fn discharged(&self, t_s: f64) -> f64 {
        self.steps.iter().map(|s| s.p_fs).sum::<f64>() * t_s
    }

    /// DC energy put into the battery, kWh (positive).
    pub fn charged(&self, t_s: f64) -> f64 {
        -self.steps.iter().map(|s| s.p_ts).sum::<f64>() * t_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyResidual {
    pub class: ConstraintClass,
    pub max: f64,
    /// Step where the largest residual occurs.
    pub step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub families: Vec<FamilyResidual>,
    pub tol: f64,
    pub objective_recomputed: f64,
}

impl ResidualReport {
    pub fn residual(&self, class: ConstraintClass) -> f64 {
        self.families.iter().find(|f| f.class == class).map_or(0.0, |f| f.max)
    }

    pub fn violations(&self) -> impl Iterator<Item = &FamilyResidual> {
        self.families.iter().filter(move |f| !(f.max <= self.tol))
    }

    pub fn is_feasible(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn max_residual(&self) -> f64 {
        self.families.iter().map(|f| if f.max.is_nan() { f64::INFINITY } else { f.max }).fold(0.0, f64::max)
    }
}

fn outside(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        (lo - x).max(x - hi).max(0.0)
    }
}

/// Recomputes every constraint family of the window model for `solution`.
pub fn verify_solution(solution: &DispatchSolution, problem: &WindowProblem, tol: f64) -> ResidualReport {
    let w = &problem.window;
    let inv = &problem.plant.inverter;
    let grid = &problem.plant.grid;
    let bat = &problem.battery;
    let eta = inv.eta_inv;
    let t_s = w.t_s();
    let root = bat.eta_roundtrip.sqrt();
    let mut worst: Vec<FamilyResidual> = ConstraintClass::ALL
        .iter()
        .map(|&class| FamilyResidual { class, max: 0.0, step: None })
        .collect();
    let mut record = |class: ConstraintClass, value: f64, step: usize| {
        let value = if value.is_nan() { f64::INFINITY } else { value };
        let slot = worst.iter_mut().find(|f| f.class == class).expect("class listed");
        if value > slot.max {
            slot.max = value;
            slot.step = Some(step);
        }
    };
    if solution.steps.len() != w.len() {
        record(ConstraintClass::SocRecursion, f64::INFINITY, solution.steps.len().min(w.len()));
    }
    let mut prev = solution.soc_init;
    let mut objective = 0.0;
    for (k, s) in solution.steps.iter().enumerate().take(w.len()) {
        let (ip, ig, is) = (f64::from(u8::from(s.i_p)), f64::from(u8::from(s.i_g)), f64::from(u8::from(s.i_s)));
        record(ConstraintClass::DcBalance, (s.p_fp + s.p_tp - s.p_fs - s.p_ts - w.pv_dc[k]).abs(), k);
        record(ConstraintClass::AcBalance, (s.p_fpac + s.p_tpac + s.p_fg + s.p_tg - w.load_ac[k]).abs(), k);
        record(
            ConstraintClass::Conversion,
            (s.p_fpac - eta * s.p_tp).abs().max((s.p_tpac - s.p_fp / eta).abs()),
            k,
        );
        let expected = prev - root * t_s * s.p_ts - t_s * s.p_fs / root;
        record(ConstraintClass::SocRecursion, (s.soc - expected).abs(), k);
        record(
            ConstraintClass::InverterDc,
            outside(s.p_fp, inv.p_dc_min * (1.0 - ip), 0.0).max(outside(s.p_tp, 0.0, inv.p_dc_max * ip)),
            k,
        );
        record(
            ConstraintClass::InverterAc,
            outside(s.p_fpac, 0.0, inv.p_ac_max * ip).max(outside(s.p_tpac, -inv.p_ac_max * (1.0 - ip), 0.0)),
            k,
        );
        record(ConstraintClass::GridImport, outside(s.p_fg, 0.0, grid.p_import_max * ig), k);
        record(ConstraintClass::GridExport, outside(s.p_tg, grid.p_export_max * (1.0 - ig), 0.0), k);
        record(
            ConstraintClass::BatteryPower,
            outside(s.p_fs, 0.0, bat.p_discharge_max * is).max(outside(s.p_ts, -bat.p_charge_max * (1.0 - is), 0.0)),
            k,
        );
        record(ConstraintClass::SocBounds, outside(s.soc, problem.soc_min, problem.soc_max), k);
        let overlap = s
            .p_fs
            .min(-s.p_ts)
            .max(s.p_tp.min(-s.p_fp))
            .max(s.p_fg.min(-s.p_tg))
            .max(0.0);
        record(ConstraintClass::Exclusivity, overlap, k);
        objective += w.price[k] * t_s * s.p_fg + problem.c_bd * t_s * s.p_fs;
        prev = s.soc;
    }
    ResidualReport {
        families: worst,
        tol,
        objective_recomputed: objective,
    }
}
