//! Reference dispatch rules without optimisation.

use std::time::Instant;

use super::chain::StepPhysics;
use super::solution::{DispatchSolution, SolveStatus};
use super::{DispatchError, GridSpec, InverterSpec, WindowProblem};
use crate::data::Window;

/// Import the household would need with no battery.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineImport {
    /// Grid import per step, kW, capped at the contracted power.
    pub import_kw: Vec<f64>,
    /// Steps where the load exceeds what PV plus the capped import can serve.
    pub over_cap_steps: Vec<usize>,
}

impl BaselineImport {
    pub fn energy(&self, t_s: f64) -> f64 {
        self.import_kw.iter().sum::<f64>() * t_s
    }
}

pub fn baseline_import_no_battery(window: &Window, inverter: &InverterSpec, grid: &GridSpec) -> BaselineImport {
    let mut over_cap_steps = Vec::new();
    let import_kw = window
        .pv_dc
        .iter()
        .zip(&window.load_ac)
        .enumerate()
        .map(|(k, (&pv, &load))| {
            let pv_ac = (inverter.eta_inv * pv).min(inverter.p_ac_max);
            let need = (load - pv_ac).max(0.0);
            if need > grid.p_import_max {
                over_cap_steps.push(k);
            }
            need.min(grid.p_import_max)
        })
        .collect();
    BaselineImport { import_kw, over_cap_steps }
}

/// Self-consumption rule: charge from PV surplus, discharge to cover the
/// load deficit, never charge from the grid.
pub fn greedy_self_consumption_dispatch(problem: &WindowProblem) -> Result<DispatchSolution, DispatchError> {
    let start = Instant::now();
    let mut s = problem.soc_init;
    let mut steps = Vec::with_capacity(problem.len());
    let mut objective = 0.0;
    for k in 0..problem.len() {
        let ph = StepPhysics::new(problem, k);
        let (lo, hi) = ph
            .b_range()
            .map_err(|class| DispatchError::Infeasible { class, step: Some(k) })?;
        // energy headroom expressed as battery power
        let max_charge = ((problem.soc_max - s) / (ph.root_eta_b * ph.t_s)).max(0.0);
        let max_discharge = ((s - problem.soc_min) * ph.root_eta_b / ph.t_s).max(0.0);
        let (lo_e, hi_e) = (lo.max(-max_charge), hi.min(max_discharge));
        if lo_e > hi_e + 1e-9 {
            return Err(DispatchError::Infeasible {
                class: super::ConstraintClass::SocBounds,
                step: Some(k),
            });
        }
        let surplus = ph.pv - ph.load / ph.eta;
        let b = (-surplus).clamp(lo_e, hi_e.max(lo_e));
        let mut flow = ph.flows(b, s);
        flow.soc = flow.soc.clamp(problem.soc_min, problem.soc_max);
        objective += ph.cost(b);
        s = flow.soc;
        steps.push(flow);
    }
    Ok(DispatchSolution {
        steps,
        soc_init: problem.soc_init,
        objective,
        bound: f64::NEG_INFINITY,
        status: SolveStatus::Heuristic,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}
