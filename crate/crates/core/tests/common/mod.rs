//! Independent references shared by the integration tests.

#![allow(dead_code)]

use bess_core::data::{Resolution, Window};
use bess_core::dispatch::{build_window_problem, BatterySpec, GridSpec, InverterSpec, PlantSpec, WindowProblem};

pub fn plant() -> PlantSpec {
    PlantSpec {
        inverter: InverterSpec::default(),
        grid: GridSpec::new(5.75, -6.0),
    }
}

/// Cheapest way to realise net battery power `b` in one step, enumerating
/// the eight direction patterns. `None` if no pattern is feasible.
pub fn step_cost_by_enumeration(p: &WindowProblem, k: usize, b: f64) -> Option<f64> {
    let inv = &p.plant.inverter;
    let grid = &p.plant.grid;
    let bat = &p.battery;
    let (pv, load, price) = (p.window.pv_dc[k], p.window.load_ac[k], p.window.price[k]);
    let t_s = p.window.t_s();
    let eps = 1e-12;
    let mut best: Option<f64> = None;
    for i_s in [false, true] {
        let (p_fs, p_ts) = if i_s { (b, 0.0) } else { (0.0, b) };
        if p_fs < -eps || p_fs > bat.p_discharge_max + eps || p_ts > eps || p_ts < -bat.p_charge_max - eps {
            continue;
        }
        for i_p in [false, true] {
            // DC balance: p_fp + p_tp = pv + p_fs + p_ts
            let dc = pv + p_fs + p_ts;
            let (p_fp, p_tp) = if i_p { (0.0, dc) } else { (dc, 0.0) };
            if p_tp < -eps || p_tp > inv.p_dc_max + eps || p_fp > eps || p_fp < inv.p_dc_min - eps {
                continue;
            }
            let p_fpac = inv.eta_inv * p_tp;
            let p_tpac = p_fp / inv.eta_inv;
            if p_fpac > inv.p_ac_max + eps || p_tpac < -inv.p_ac_max - eps {
                continue;
            }
            for i_g in [false, true] {
                let rest = load - p_fpac - p_tpac;
                let (p_fg, p_tg) = if i_g { (rest, 0.0) } else { (0.0, rest) };
                if p_fg < -eps || p_fg > grid.p_import_max + eps || p_tg > eps || p_tg < grid.p_export_max - eps {
                    continue;
                }
                let cost = price * t_s * p_fg + p.c_bd * t_s * p_fs;
                best = Some(best.map_or(cost, |c: f64| c.min(cost)));
            }
        }
    }
    best
}

fn b_for_delta(p: &WindowProblem, delta: f64) -> f64 {
    let r = p.battery.eta_roundtrip.sqrt();
    let t_s = p.window.t_s();
    if delta <= 0.0 {
        -delta * r / t_s
    } else {
        -delta / (r * t_s)
    }
}

/// Feasible range of net battery power found by scanning and bisection.
fn feasible_b_range(p: &WindowProblem, k: usize) -> Option<(f64, f64)> {
    let lo0 = -p.battery.p_charge_max;
    let hi0 = p.battery.p_discharge_max;
    let n = 20_000;
    let inside = (0..=n)
        .map(|i| lo0 + (hi0 - lo0) * i as f64 / n as f64)
        .find(|&b| step_cost_by_enumeration(p, k, b).is_some())?;
    let bisect = |mut good: f64, mut bad: f64| {
        for _ in 0..100 {
            let mid = 0.5 * (good + bad);
            if step_cost_by_enumeration(p, k, mid).is_some() {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let lo = if step_cost_by_enumeration(p, k, lo0).is_some() { lo0 } else { bisect(inside, lo0) };
    let hi = if step_cost_by_enumeration(p, k, hi0).is_some() { hi0 } else { bisect(inside, hi0) };
    Some((lo, hi))
}

pub struct DpResult {
    pub objective: f64,
    pub bound: f64,
}

/// Discretised DP with 1 Wh states anchored at the initial SOC. The step
/// cost depends only on the state offset, so it is tabulated once per step.
pub fn dp_oracle(p: &WindowProblem) -> DpResult {
    let h = 1e-3;
    let s0 = p.soc_init;
    let j_lo = -(((s0 - p.soc_min) / h + 1e-9).floor() as i64);
    let j_hi = ((p.soc_max - s0) / h + 1e-9).floor() as i64;
    let g = (j_hi - j_lo + 1) as usize;
    let start = (-j_lo) as usize;
    let n = p.len();
    let r = p.battery.eta_roundtrip.sqrt();
    let t_s = p.window.t_s();
    let delta_of = |b: f64| if b >= 0.0 { -b * t_s / r } else { -b * r * t_s };
    let mut value = vec![0.0; g];
    for k in (0..n).rev() {
        let (b_lo, b_hi) = feasible_b_range(p, k).expect("step infeasible");
        let (d_lo, d_hi) = (delta_of(b_hi), delta_of(b_lo));
        // cost[m + g - 1] for an SOC move of m grid cells
        let cost: Vec<f64> = (-(g as i64 - 1)..=(g as i64 - 1))
            .map(|m| {
                let d = m as f64 * h;
                let dc = d.clamp(d_lo, d_hi);
                if (dc - d).abs() > h {
                    return f64::INFINITY;
                }
                let b = b_for_delta(p, dc).clamp(b_lo, b_hi);
                step_cost_by_enumeration(p, k, b).unwrap_or(f64::INFINITY)
            })
            .collect();
        let mut next = vec![f64::INFINITY; g];
        for (i, slot) in next.iter_mut().enumerate() {
            let row = &cost[g - 1 - i..2 * g - 1 - i];
            *slot = row.iter().zip(&value).fold(f64::INFINITY, |best, (c, v)| best.min(c + v));
        }
        value = next;
    }
    let lip = (0..n)
        .map(|k| (p.window.price[k] / p.plant.inverter.eta_inv + p.c_bd) / r)
        .fold(0.0, f64::max);
    DpResult {
        objective: value[start],
        bound: 2.0 * n as f64 * lip * h + 1e-9,
    }
}

pub fn random_problem(
    pv: Vec<f64>,
    load: Vec<f64>,
    price: Vec<f64>,
    e: f64,
    p_max: f64,
    init_frac: f64,
    c_bd: f64,
) -> WindowProblem {
    let w = Window::new(Resolution::MIN_60, pv, load, price).unwrap();
    let bat = BatterySpec::from_rating(e, p_max);
    let soc_init = e * (0.2 + 0.6 * init_frac);
    build_window_problem(&w, &plant(), &bat, e, c_bd, soc_init).unwrap()
}
