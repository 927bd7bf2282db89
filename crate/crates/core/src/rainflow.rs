//! Rainflow cycle counting on state-of-charge traces (ASTM E1049 three-point
//! method; unmatched reversals become half cycles).

use serde::{Deserialize, Serialize};

/// One counted cycle. `dod` and `mean_soc` are fractions of nominal capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub dod: f64,
    pub mean_soc: f64,
    pub weight: f64,
}

impl CycleRecord {
    fn between(a: f64, b: f64, weight: f64) -> Self {
        Self {
            dod: (a - b).abs(),
            mean_soc: 0.5 * (a + b),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RainflowError {
    #[error("soc value {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

/// Local extrema including both endpoints; plateaus collapse to one point.
pub fn turning_points(trace: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(trace.len());
    for &x in trace {
        match out.len() {
            0 => out.push(x),
            1 => {
                if x != out[0] {
                    out.push(x);
                }
            }
            n => {
                let (a, b) = (out[n - 2], out[n - 1]);
                if x == b {
                    continue;
                }
                if (b - a) * (x - b) > 0.0 {
                    // same direction: extend the run
                    out[n - 1] = x;
                } else {
                    out.push(x);
                }
            }
        }
    }
    out
}

/// Counts cycles in a trace of fractional SOC values.
pub fn extract_cycles(trace: &[f64]) -> Result<Vec<CycleRecord>, RainflowError> {
    if let Some((index, &value)) = trace.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(RainflowError::OutOfRange { index, value });
    }
    let mut cycles = Vec::new();
    let mut stack: Vec<f64> = Vec::new();
    for p in turning_points(trace) {
        stack.push(p);
        while stack.len() >= 3 {
            let n = stack.len();
            let x = (stack[n - 1] - stack[n - 2]).abs();
            let y = (stack[n - 2] - stack[n - 3]).abs();
            if x < y {
                break;
            }
            if n == 3 {
                cycles.push(CycleRecord::between(stack[0], stack[1], 0.5));
                stack.remove(0);
            } else {
                cycles.push(CycleRecord::between(stack[n - 3], stack[n - 2], 1.0));
                stack.drain(n - 3..n - 1);
            }
        }
    }
    cycles.extend(stack.windows(2).map(|w| CycleRecord::between(w[0], w[1], 0.5)));
    Ok(cycles)
}

/// Converts a kWh trace to fractions of `e_nominal`.
pub fn normalise_trace(soc_kwh: &[f64], e_nominal: f64) -> Vec<f64> {
    soc_kwh.iter().map(|s| s / e_nominal).collect()
}

/// `Σ weight · dod`.
pub fn weighted_throughput(cycles: &[CycleRecord]) -> f64 {
    cycles.iter().map(|c| c.weight * c.dod).sum()
}
