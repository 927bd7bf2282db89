//! A small mixed-integer linear model container with an LP-format writer.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Minimisation model: `min cᵀx` subject to rows and variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
}

impl MilpModel {
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, integer: bool, cost: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer,
            cost,
        });
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64) {
        self.rows.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Writes the model in CPLEX LP format.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        out.push_str("Minimize\n obj:");
        let mut any = false;
        for v in &self.vars {
            if v.cost != 0.0 {
                write_term(&mut out, v.cost, &v.name);
                any = true;
            }
        }
        if !any {
            out.push_str(" 0 ");
            out.push_str(self.vars.first().map_or("x", |v| v.name.as_str()));
        }
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.name);
            for &(j, a) in &row.coeffs {
                write_term(&mut out, a, &self.vars[j].name);
            }
            let op = match row.sense {
                RowSense::Le => "<=",
                RowSense::Ge => ">=",
                RowSense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for v in self.vars.iter().filter(|v| !v.integer) {
            let lo = if v.lower == f64::NEG_INFINITY { "-inf".to_string() } else { v.lower.to_string() };
            let hi = if v.upper == f64::INFINITY { "+inf".to_string() } else { v.upper.to_string() };
            let _ = writeln!(out, " {lo} <= {} <= {hi}", v.name);
        }
        let binaries: Vec<&str> = self.vars.iter().filter(|v| v.integer).map(|v| v.name.as_str()).collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for chunk in binaries.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

fn write_term(out: &mut String, coeff: f64, name: &str) {
    if coeff < 0.0 {
        let _ = write!(out, " - {} {name}", -coeff);
    } else {
        let _ = write!(out, " + {coeff} {name}");
    }
}
