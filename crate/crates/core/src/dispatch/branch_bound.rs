//! Best-first branch and bound over the simplex relaxation.

use std::time::Instant;

use super::milp::MilpModel;
use super::simplex::{solve_lp, LpOutcome};

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbConfig {
    pub rel_gap: f64,
    pub time_limit_s: f64,
    pub max_nodes: usize,
    pub feasibility_tol: f64,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            rel_gap: 1e-4,
            time_limit_s: 60.0,
            max_nodes: 200_000,
            feasibility_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    /// A limit was hit; the incumbent is feasible but not proven optimal.
    Feasible,
    Infeasible,
    /// A limit was hit before any feasible point was found.
    NoSolution,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
}

impl MilpOutcome {
    pub fn gap(&self) -> f64 {
        rel_gap(self.objective, self.bound)
    }
}

fn rel_gap(primal: f64, bound: f64) -> f64 {
    let abs = primal - bound;
    if abs <= 1e-9 {
        0.0
    } else {
        abs / primal.abs().max(1e-9)
    }
}

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bound: f64,
}

/// Heuristic hook: given a fractional relaxation point, propose values for
/// the integer variables. The continuous part is re-optimised.
pub type RoundingHook<'a> = &'a dyn Fn(&[f64]) -> Option<Vec<f64>>;

pub fn solve_milp(model: &MilpModel, config: &BnbConfig, hook: Option<RoundingHook<'_>>) -> MilpOutcome {
    let start = Instant::now();
    let ints: Vec<usize> = (0..model.vars.len()).filter(|&j| model.vars[j].integer).collect();
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut open = vec![Node {
        lower: model.vars.iter().map(|v| v.lower).collect(),
        upper: model.vars.iter().map(|v| v.upper).collect(),
        bound: f64::NEG_INFINITY,
    }];
    let mut nodes = 0usize;

    let try_candidate = |lower: &[f64], upper: &[f64], point: &[f64], incumbent: &mut Option<(Vec<f64>, f64)>| {
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        for &j in &ints {
            let v = point[j].round().clamp(lo[j], hi[j]);
            lo[j] = v;
            hi[j] = v;
        }
        if let LpOutcome::Optimal { x, objective } = solve_lp(model, &lo, &hi) {
            if model.max_violation(&x) <= config.feasibility_tol
                && incumbent.as_ref().map_or(true, |(_, best)| objective < *best)
            {
                *incumbent = Some((x, objective));
            }
        }
    };

    let mut limit_hit = false;
    while !open.is_empty() {
        // best-first: lowest bound
        let idx = open
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.bound.total_cmp(&b.1.bound))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let global_bound = open[idx].bound;
        if let Some((_, best)) = &incumbent {
            if rel_gap(*best, global_bound) <= config.rel_gap {
                break;
            }
        }
        if nodes >= config.max_nodes || start.elapsed().as_secs_f64() > config.time_limit_s {
            limit_hit = true;
            break;
        }
        let node = open.swap_remove(idx);
        nodes += 1;
        let (x, obj) = match solve_lp(model, &node.lower, &node.upper) {
            LpOutcome::Optimal { x, objective } => (x, objective),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                return MilpOutcome {
                    status: MilpStatus::Unbounded,
                    x: None,
                    objective: f64::NEG_INFINITY,
                    bound: f64::NEG_INFINITY,
                    nodes,
                }
            }
            LpOutcome::IterationLimit => continue,
        };
        if let Some((_, best)) = &incumbent {
            if rel_gap(*best, obj) <= config.rel_gap {
                continue;
            }
        }
        let branch_var = ints
            .iter()
            .copied()
            .map(|j| (j, (x[j] - x[j].round()).abs()))
            .filter(|&(_, frac)| frac > INT_TOL)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j);
        match branch_var {
            None => try_candidate(&node.lower, &node.upper, &x, &mut incumbent),
            Some(j) => {
                if let Some(h) = hook {
                    if let Some(guess) = h(&x) {
                        try_candidate(&node.lower, &node.upper, &guess, &mut incumbent);
                    }
                }
                let floor = x[j].floor();
                let mut down = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    bound: obj,
                };
                down.upper[j] = floor;
                let mut up = Node {
                    lower: node.lower,
                    upper: node.upper,
                    bound: obj,
                };
                up.lower[j] = floor + 1.0;
                open.push(down);
                open.push(up);
            }
        }
    }

    let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    match incumbent {
        Some((x, objective)) => {
            let bound = open_bound.min(objective);
            let status = if limit_hit && rel_gap(objective, bound) > config.rel_gap {
                MilpStatus::Feasible
            } else {
                MilpStatus::Optimal
            };
            MilpOutcome {
                status,
                x: Some(x),
                objective,
                bound,
                nodes,
            }
        }
        None => MilpOutcome {
            status: if limit_hit { MilpStatus::NoSolution } else { MilpStatus::Infeasible },
            x: None,
            objective: f64::INFINITY,
            bound: open_bound,
            nodes,
        },
    }
}
