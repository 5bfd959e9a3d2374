//! Linear programming: a small modelling layer, a dense revised simplex
//! solver, and the builder for the relaxed joint routing/allocation program.

mod cos;
mod simplex;

use std::fmt::Write as _;

use thiserror::Error;

pub use cos::{build_cos_relax_cvx, canonicalize, recover_relaxed, solve_relaxation, CosLayout, CosProgram, RelaxedSolution};
pub use simplex::{solve_lp, solve_lp_with, Pricing, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} references variable {var}, but only {count} exist")]
    InvalidVariable { row: usize, var: usize, count: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("variable {0} has an empty or invalid bound interval")]
    InvalidBounds(String),
    #[error("simplex stopped after {0} iterations")]
    IterationLimit(usize),
    #[error("basis matrix became singular")]
    Singular,
    #[error("solution violates the constraints by {0:e}")]
    Inaccurate(f64),
    #[error("no flow with data to send")]
    EmptyCoflow,
    #[error("flow {0} has an endpoint outside the network")]
    UnknownEndpoint(usize),
    #[error("program is {0:?}, not optimal")]
    NotOptimal(LpStatus),
    #[error("relaxation has a zero completion time")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c^T x` subject to row constraints and variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    vars: Vec<Variable>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(cost);
        self.vars.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for (i, v) in self.vars.iter().enumerate() {
            let ok = !v.lower.is_nan()
                && !v.upper.is_nan()
                && v.lower <= v.upper
                && v.lower < f64::INFINITY
                && v.upper > f64::NEG_INFINITY;
            if !ok {
                return Err(LpError::InvalidBounds(v.name.clone()));
            }
            if !self.objective[i].is_finite() {
                return Err(LpError::NonFinite(format!("objective of {}", v.name)));
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of row {row}")));
            }
            for &(var, a) in &c.coeffs {
                if var >= self.vars.len() {
                    return Err(LpError::InvalidVariable {
                        row,
                        var,
                        count: self.vars.len(),
                    });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row {row}")));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest absolute violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &val) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - val).max(val - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let gap = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    /// Human-readable dump, one constraint per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("minimize");
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {:+} {}", c, self.vars[j].name);
            }
        }
        out.push('\n');
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, "r{i}:");
            for &(j, a) in &c.coeffs {
                let _ = write!(out, " {:+} {}", a, self.vars[j].name);
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs);
        }
        for v in &self.vars {
            let _ = writeln!(out, "{} <= {} <= {}", v.lower, v.name, v.upper);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; meaningful only when optimal.
    pub objective: f64,
    /// Primal values of the structural variables.
    pub values: Vec<f64>,
    pub iterations: usize,
}
