use std::time::Instant;

use super::branch_bound::{solve_milp, BnbConfig, MilpStatus};
use super::milp::{MilpModel, RowSense};
use super::solution::{DispatchSolution, SolveStatus, StepFlows};
use super::{chain, BatterySpec, DispatchError, PlantSpec, SolverConfig};
use crate::data::Window;

/// Columns per step in the MILP layout.
pub const VARS_PER_STEP: usize = 12;

const P_FP: usize = 0;
const P_TP: usize = 1;
const P_FPAC: usize = 2;
const P_TPAC: usize = 3;
const P_FG: usize = 4;
const P_TG: usize = 5;
const P_FS: usize = 6;
const P_TS: usize = 7;
const SOC: usize = 8;
const I_P: usize = 9;
const I_G: usize = 10;
const I_S: usize = 11;

/// One window's dispatch problem with the battery's current state.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowProblem {
    pub window: Window,
    pub plant: PlantSpec,
    pub battery: BatterySpec,
    /// Usable capacity after fade, kWh.
    pub e_b: f64,
    /// Degradation cost per kWh discharged.
    pub c_bd: f64,
    pub soc_init: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

pub fn build_window_problem(
    window: &Window,
    plant: &PlantSpec,
    battery: &BatterySpec,
    e_b: f64,
    c_bd: f64,
    soc_init: f64,
) -> Result<WindowProblem, DispatchError> {
    plant.inverter.validate()?;
    plant.grid.validate()?;
    battery.validate()?;
    if window.is_empty() {
        return Err(DispatchError::EmptyWindow);
    }
    if !(e_b > 0.0 && e_b.is_finite()) {
        return Err(DispatchError::InvalidSpec(format!("usable capacity must be positive, got {e_b}")));
    }
    if !(c_bd >= 0.0 && c_bd.is_finite()) {
        return Err(DispatchError::InvalidSpec(format!("degradation cost must be finite and >= 0, got {c_bd}")));
    }
    let soc_min = battery.soc_min_frac * e_b;
    let soc_max = battery.soc_max_frac * e_b;
    let slack = 1e-9 * e_b;
    if !(soc_init >= soc_min - slack && soc_init <= soc_max + slack) {
        return Err(DispatchError::SocInitOutOfBounds {
            soc_init,
            min: soc_min,
            max: soc_max,
        });
    }
    Ok(WindowProblem {
        window: window.clone(),
        plant: *plant,
        battery: *battery,
        e_b,
        c_bd,
        soc_init: soc_init.clamp(soc_min, soc_max),
        soc_min,
        soc_max,
    })
}

impl WindowProblem {
    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Overrides the energy bounds without validation.
    pub fn with_soc_bounds(mut self, soc_min: f64, soc_max: f64) -> Self {
        self.soc_min = soc_min;
        self.soc_max = soc_max;
        self
    }

    /// Objective value of `solution` under this problem's prices.
    pub fn objective_of(&self, solution: &DispatchSolution) -> f64 {
        let t_s = self.window.t_s();
        solution
            .steps
            .iter()
            .zip(&self.window.price)
            .map(|(s, p)| p * t_s * s.p_fg + self.c_bd * t_s * s.p_fs)
            .sum()
    }

    /// The full MILP in column layout `VARS_PER_STEP * k + offset`.
    pub fn to_milp(&self) -> MilpModel {
        let inv = &self.plant.inverter;
        let grid = &self.plant.grid;
        let bat = &self.battery;
        let t_s = self.window.t_s();
        let root = bat.eta_roundtrip.sqrt();
        let mut m = MilpModel::default();
        for k in 0..self.len() {
            let price = self.window.price[k];
            m.add_var(format!("p_fp_{k}"), inv.p_dc_min, 0.0, false, 0.0);
            m.add_var(format!("p_tp_{k}"), 0.0, inv.p_dc_max, false, 0.0);
            m.add_var(format!("p_fpac_{k}"), 0.0, inv.p_ac_max, false, 0.0);
            m.add_var(format!("p_tpac_{k}"), -inv.p_ac_max, 0.0, false, 0.0);
            m.add_var(format!("p_fg_{k}"), 0.0, grid.p_import_max, false, price * t_s);
            m.add_var(format!("p_tg_{k}"), grid.p_export_max, 0.0, false, 0.0);
            m.add_var(format!("p_fs_{k}"), 0.0, bat.p_discharge_max, false, self.c_bd * t_s);
            m.add_var(format!("p_ts_{k}"), -bat.p_charge_max, 0.0, false, 0.0);
            m.add_var(format!("soc_{k}"), self.soc_min, self.soc_max, false, 0.0);
            m.add_var(format!("i_p_{k}"), 0.0, 1.0, true, 0.0);
            m.add_var(format!("i_g_{k}"), 0.0, 1.0, true, 0.0);
            m.add_var(format!("i_s_{k}"), 0.0, 1.0, true, 0.0);
        }
        for k in 0..self.len() {
            let c = |off: usize| VARS_PER_STEP * k + off;
            m.add_row(
                format!("dc_{k}"),
                vec![(c(P_FP), 1.0), (c(P_TP), 1.0), (c(P_FS), -1.0), (c(P_TS), -1.0)],
                RowSense::Eq,
                self.window.pv_dc[k],
            );
            m.add_row(
                format!("ac_{k}"),
                vec![(c(P_FPAC), 1.0), (c(P_TPAC), 1.0), (c(P_FG), 1.0), (c(P_TG), 1.0)],
                RowSense::Eq,
                self.window.load_ac[k],
            );
            m.add_row(format!("inv_out_{k}"), vec![(c(P_FPAC), 1.0), (c(P_TP), -inv.eta_inv)], RowSense::Eq, 0.0);
            m.add_row(format!("inv_in_{k}"), vec![(c(P_TPAC), 1.0), (c(P_FP), -1.0 / inv.eta_inv)], RowSense::Eq, 0.0);
            let mut soc_row = vec![(c(SOC), 1.0), (c(P_TS), root * t_s), (c(P_FS), t_s / root)];
            let rhs = if k == 0 {
                self.soc_init
            } else {
                soc_row.push((VARS_PER_STEP * (k - 1) + SOC, -1.0));
                0.0
            };
            m.add_row(format!("soc_{k}"), soc_row, RowSense::Eq, rhs);
            m.add_row(format!("dcmin_{k}"), vec![(c(P_FP), 1.0), (c(I_P), inv.p_dc_min)], RowSense::Ge, inv.p_dc_min);
            m.add_row(format!("dcmax_{k}"), vec![(c(P_TP), 1.0), (c(I_P), -inv.p_dc_max)], RowSense::Le, 0.0);
            m.add_row(format!("acout_{k}"), vec![(c(P_FPAC), 1.0), (c(I_P), -inv.p_ac_max)], RowSense::Le, 0.0);
            m.add_row(format!("acin_{k}"), vec![(c(P_TPAC), 1.0), (c(I_P), -inv.p_ac_max)], RowSense::Ge, -inv.p_ac_max);
            m.add_row(format!("imp_{k}"), vec![(c(P_FG), 1.0), (c(I_G), -grid.p_import_max)], RowSense::Le, 0.0);
            m.add_row(
                format!("exp_{k}"),
                vec![(c(P_TG), 1.0), (c(I_G), grid.p_export_max)],
                RowSense::Ge,
                grid.p_export_max,
            );
            m.add_row(format!("dis_{k}"), vec![(c(P_FS), 1.0), (c(I_S), -bat.p_discharge_max)], RowSense::Le, 0.0);
            m.add_row(
                format!("chg_{k}"),
                vec![(c(P_TS), 1.0), (c(I_S), -bat.p_charge_max)],
                RowSense::Ge,
                -bat.p_charge_max,
            );
        }
        m
    }

    /// Unpacks a column vector in the MILP layout.
    pub fn solution_from_columns(&self, x: &[f64]) -> Vec<StepFlows> {
        x.chunks(VARS_PER_STEP)
            .map(|v| StepFlows {
                p_fp: v[P_FP],
                p_tp: v[P_TP],
                p_fpac: v[P_FPAC],
                p_tpac: v[P_TPAC],
                p_fg: v[P_FG],
                p_tg: v[P_TG],
                p_fs: v[P_FS],
                p_ts: v[P_TS],
                soc: v[SOC],
                i_p: v[I_P] > 0.5,
                i_g: v[I_G] > 0.5,
                i_s: v[I_S] > 0.5,
            })
            .collect()
    }
}

/// Rounds the binaries to the direction of the dominant flow in each pair.
fn sign_rounding(x: &[f64]) -> Option<Vec<f64>> {
    let mut out = x.to_vec();
    for v in out.chunks_mut(VARS_PER_STEP) {
        v[I_P] = if v[P_TP] >= -v[P_FP] { 1.0 } else { 0.0 };
        v[I_G] = if v[P_FG] >= -v[P_TG] { 1.0 } else { 0.0 };
        v[I_S] = if v[P_FS] >= -v[P_TS] { 1.0 } else { 0.0 };
    }
    Some(out)
}

pub(crate) fn solve_with_branch_bound(
    problem: &WindowProblem,
    config: &SolverConfig,
) -> Result<DispatchSolution, DispatchError> {
    let start = Instant::now();
    let model = problem.to_milp();
    let bnb = BnbConfig {
        rel_gap: config.rel_mip_gap,
        time_limit_s: config.time_limit_s,
        max_nodes: config.max_nodes,
        feasibility_tol: config.feasibility_tol,
    };
    let out = solve_milp(&model, &bnb, Some(&sign_rounding));
    let status = match out.status {
        MilpStatus::Optimal => SolveStatus::Optimal,
        MilpStatus::Feasible => SolveStatus::TimeLimit,
        MilpStatus::Infeasible => {
            // the chain engine pinpoints the family that fails
            return Err(match chain::solve(problem, config) {
                Err(e) => e,
                Ok(_) => DispatchError::Numerical("branch and bound found no feasible point".into()),
            });
        }
        MilpStatus::NoSolution => {
            return Err(DispatchError::NoIncumbent(format!("{} nodes explored", out.nodes)));
        }
        MilpStatus::Unbounded => return Err(DispatchError::Numerical("relaxation unbounded".into())),
    };
    let x = out.x.as_deref().unwrap_or_default();
    Ok(DispatchSolution {
        steps: problem.solution_from_columns(x),
        soc_init: problem.soc_init,
        objective: out.objective,
        bound: out.bound,
        status,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}
