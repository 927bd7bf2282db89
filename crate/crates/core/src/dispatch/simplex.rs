//! Dense two-phase primal simplex with bounded variables.
//!
//! Every row gets a slack whose bounds encode the row sense, so the working
//! system is `A x + s = b`. Rows whose slack cannot absorb the initial
//! residual get an artificial column; phase I drives those to zero.

use super::milp::{MilpModel, RowSense};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    /// `B⁻¹ A`, row-major, `m × ncols`.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.x.len()
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for (i, row) in self.t.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                d -= cb * row[j];
            }
        }
        d
    }

    /// Runs the primal simplex for `cost`. Returns `false` when unbounded.
    fn optimise(&mut self, cost: &[f64], max_iter: usize) -> Result<bool, ()> {
        let m = self.t.len();
        let n = self.ncols();
        let mut is_basic = vec![false; n];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run > 50;
            // pricing
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            #[allow(clippy::needless_range_loop)]
            for j in 0..n {
                if is_basic[j] || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let d = self.reduced_cost(cost, j);
                let at_lower = self.x[j] <= self.lower[j];
                let at_upper = self.x[j] >= self.upper[j];
                let dir = if d < -COST_TOL && !at_upper {
                    1.0
                } else if d > COST_TOL && !at_lower {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((j, dir)) = entering else {
                return Ok(true);
            };
            // ratio test
            let mut theta = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let alpha = self.t[i][j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * alpha;
                let b = self.basis[i];
                let limit = if rate < 0.0 {
                    if self.lower[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((self.x[b] - self.lower[b]) / -rate).max(0.0)
                } else {
                    if self.upper[b] == f64::INFINITY {
                        continue;
                    }
                    ((self.upper[b] - self.x[b]) / rate).max(0.0)
                };
                let better = match leave {
                    None => limit < theta,
                    Some((li, _)) => {
                        limit < theta - 1e-12
                            || (limit <= theta + 1e-12
                                && if bland {
                                    b < self.basis[li]
                                } else {
                                    alpha.abs() > self.t[li][j].abs()
                                })
                    }
                };
                if better {
                    theta = limit.min(theta);
                    leave = Some((i, if rate < 0.0 { self.lower[b] } else { self.upper[b] }));
                }
            }
            if theta == f64::INFINITY {
                return Ok(false);
            }
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            // move
            self.x[j] += dir * theta;
            for i in 0..m {
                let alpha = self.t[i][j];
                if alpha != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir * theta * alpha;
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, bound)) => {
                    let old = self.basis[r];
                    self.x[old] = bound;
                    self.pivot(r, j);
                    is_basic[old] = false;
                    is_basic[j] = true;
                }
            }
        }
        Err(())
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j];
        let pivot_row: Vec<f64> = self.t[r].iter().map(|v| v / p).collect();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f == 0.0 {
                continue;
            }
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            row[j] = 0.0;
        }
        self.t[r] = pivot_row;
        self.basis[r] = j;
    }
}

/// Solves the LP relaxation of `model` with structural bounds overridden by
/// `lower`/`upper`.
pub(crate) fn solve_lp(model: &MilpModel, lower: &[f64], upper: &[f64]) -> LpOutcome {
    let m = model.rows.len();
    let n = model.vars.len();
    for j in 0..n {
        if lower[j] > upper[j] {
            return LpOutcome::Infeasible;
        }
    }
    let mut lo: Vec<f64> = lower.to_vec();
    let mut hi: Vec<f64> = upper.to_vec();
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            if lo[j].is_finite() {
                lo[j]
            } else if hi[j].is_finite() {
                hi[j]
            } else {
                0.0
            }
        })
        .collect();
    // slack columns n..n+m
    for row in &model.rows {
        let (l, h) = match row.sense {
            RowSense::Le => (0.0, f64::INFINITY),
            RowSense::Ge => (f64::NEG_INFINITY, 0.0),
            RowSense::Eq => (0.0, 0.0),
        };
        lo.push(l);
        hi.push(h);
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_values = Vec::with_capacity(m);
    let mut artificials: Vec<(usize, f64, f64)> = Vec::new(); // (row, sign, value)
    for (i, row) in model.rows.iter().enumerate() {
        let mut dense = vec![0.0; n + m];
        for &(j, a) in &row.coeffs {
            dense[j] += a;
        }
        dense[n + i] = 1.0;
        let residual = row.rhs - row.activity(&x);
        let s_lo = lo[n + i];
        let s_hi = hi[n + i];
        if residual >= s_lo && residual <= s_hi {
            slack_values.push(residual);
            basis.push(n + i);
        } else {
            let s = residual.clamp(s_lo, s_hi);
            slack_values.push(s);
            let gap = residual - s;
            artificials.push((i, gap.signum(), gap.abs()));
            basis.push(usize::MAX);
        }
        rows.push(dense);
    }
    x.extend(slack_values);
    let n_art = artificials.len();
    let ncols = n + m + n_art;
    for row in rows.iter_mut() {
        row.resize(ncols, 0.0);
    }
    for (k, &(i, sign, value)) in artificials.iter().enumerate() {
        let col = n + m + k;
        rows[i][col] = sign;
        lo.push(0.0);
        hi.push(f64::INFINITY);
        x.push(value);
        basis[i] = col;
        if sign < 0.0 {
            for v in rows[i].iter_mut() {
                *v = -*v;
            }
        }
    }
    let mut tab = Tableau {
        t: rows,
        basis,
        x,
        lower: lo,
        upper: hi,
    };
    let max_iter = 200 * (m + ncols) + 1000;

    if n_art > 0 {
        let mut phase1 = vec![0.0; ncols];
        for c in phase1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        if tab.optimise(&phase1, max_iter).is_err() {
            return LpOutcome::IterationLimit;
        }
        let infeas: f64 = tab.x[n + m..].iter().sum();
        let scale = 1.0 + model.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeas > PHASE1_TOL * scale {
            return LpOutcome::Infeasible;
        }
        for c in n + m..ncols {
            tab.upper[c] = 0.0;
            tab.x[c] = 0.0;
        }
    }
    let mut cost = vec![0.0; ncols];
    for (j, v) in model.vars.iter().enumerate() {
        cost[j] = v.cost;
    }
    match tab.optimise(&cost, max_iter) {
        Err(()) => LpOutcome::IterationLimit,
        Ok(false) => LpOutcome::Unbounded,
        Ok(true) => {
            let xs: Vec<f64> = (0..n).map(|j| tab.x[j].clamp(lower[j], upper[j])).collect();
            let objective = model.objective(&xs);
            LpOutcome::Optimal { x: xs, objective }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(m: &MilpModel) -> (Vec<f64>, Vec<f64>) {
        (m.vars.iter().map(|v| v.lower).collect(), m.vars.iter().map(|v| v.upper).collect())
    }

    #[test]
    fn textbook_lp() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, f64::INFINITY, false, -3.0);
        let y = m.add_var("y", 0.0, f64::INFINITY, false, -5.0);
        m.add_row("a", vec![(x, 1.0)], RowSense::Le, 4.0);
        m.add_row("b", vec![(y, 2.0)], RowSense::Le, 12.0);
        m.add_row("c", vec![(x, 3.0), (y, 2.0)], RowSense::Le, 18.0);
        let (lo, hi) = bounds(&m);
        match solve_lp(&m, &lo, &hi) {
            LpOutcome::Optimal { x, objective } => {
                assert!((objective + 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // min x + 2y s.t. x + y = 3, x - y >= -1, x <= 1.5, y free
        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, 1.5, false, 1.0);
        let y = m.add_var("y", f64::NEG_INFINITY, f64::INFINITY, false, 2.0);
        m.add_row("s", vec![(x, 1.0), (y, 1.0)], RowSense::Eq, 3.0);
        m.add_row("d", vec![(x, 1.0), (y, -1.0)], RowSense::Ge, -1.0);
        let (lo, hi) = bounds(&m);
        match solve_lp(&m, &lo, &hi) {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 1.5).abs() < 1e-9, "{x:?}");
                assert!((objective - 4.5).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, 1.0, false, 1.0);
        m.add_row("r", vec![(x, 1.0)], RowSense::Ge, 2.0);
        let (lo, hi) = bounds(&m);
        assert_eq!(solve_lp(&m, &lo, &hi), LpOutcome::Infeasible);

        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, f64::INFINITY, false, -1.0);
        m.add_row("r", vec![(x, 1.0)], RowSense::Ge, 2.0);
        let (lo, hi) = bounds(&m);
        assert_eq!(solve_lp(&m, &lo, &hi), LpOutcome::Unbounded);
    }
}
