//! External-variable model, the BMI problem abstraction, Pareto dominance and
//! the augmented objective that turns a BMI-constrained problem into an
//! unconstrained vector problem over the external variable alone.
//!
//! For a fixed external variable `α` the inner convex problem
//! `min λ s.t. BMI(α, X) ≺ λI` yields `λ*(α)`; the point is feasible iff
//! `λ*(α) < 0`. The search then minimizes `[F(α); max{0, λ*(α)}]` without
//! constraints and discards points with a positive last entry at the end.

mod layout;
mod pareto;

use std::fmt;
use std::sync::Arc;

pub use layout::{ExternalVariable, GainBlock, PoleChannel, ScalarEntry, StructuredParts, VariableLayout};
pub use pareto::{dominates, nondominated_indices};
pub(crate) use pareto::dominates_unchecked;

use crate::error::{Error, Result};
use crate::lmi::{solve_evp, AffineMatrixFunction, EvpOptions, EvpStatus};

pub type ObjectiveFn = dyn Fn(&ExternalVariable) -> Result<Vec<f64>> + Send + Sync;
pub type LmiAssemblerFn = dyn Fn(&ExternalVariable) -> Result<AffineMatrixFunction> + Send + Sync;
pub type DirectFeasibilityFn = dyn Fn(&ExternalVariable) -> Result<f64> + Send + Sync;

/// How `λ*(α)` is obtained for a problem.
#[derive(Clone)]
pub enum Feasibility {
    /// Assemble the LMI in the internal variable and solve the EVP.
    Lmi(Arc<LmiAssemblerFn>),
    /// Closed form, used when there is no internal variable.
    Direct(Arc<DirectFeasibilityFn>),
}

impl Feasibility {
    pub fn lmi<F>(f: F) -> Self
    where
        F: Fn(&ExternalVariable) -> Result<AffineMatrixFunction> + Send + Sync + 'static,
    {
        Feasibility::Lmi(Arc::new(f))
    }

    pub fn direct<F>(f: F) -> Self
    where
        F: Fn(&ExternalVariable) -> Result<f64> + Send + Sync + 'static,
    {
        Feasibility::Direct(Arc::new(f))
    }
}

/// A BMI-constrained problem after variable classification.
#[derive(Clone)]
pub struct BmiProblem {
    pub name: String,
    layout: VariableLayout,
    objective_arity: usize,
    objective: Arc<ObjectiveFn>,
    feasibility: Feasibility,
    evp_options: EvpOptions,
}

impl fmt::Debug for BmiProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BmiProblem")
            .field("name", &self.name)
            .field("layout", &self.layout)
            .field("objective_arity", &self.objective_arity)
            .field(
                "feasibility",
                &match self.feasibility {
                    Feasibility::Lmi(_) => "lmi",
                    Feasibility::Direct(_) => "direct",
                },
            )
            .finish()
    }
}

impl BmiProblem {
    pub fn new<F>(
        name: impl Into<String>,
        layout: VariableLayout,
        objective_arity: usize,
        objective: F,
        feasibility: Feasibility,
    ) -> Self
    where
        F: Fn(&ExternalVariable) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            layout,
            objective_arity,
            objective: Arc::new(objective),
            feasibility,
            evp_options: EvpOptions::default(),
        }
    }

    /// Pure feasibility problem (`N = 0`).
    pub fn feasibility(name: impl Into<String>, layout: VariableLayout, feasibility: Feasibility) -> Self {
        Self::new(name, layout, 0, |_| Ok(Vec::new()), feasibility)
    }

    pub fn with_evp_options(mut self, options: EvpOptions) -> Self {
        self.evp_options = options;
        self
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn objective_arity(&self) -> usize {
        self.objective_arity
    }

    pub fn feasibility_kind(&self) -> &Feasibility {
        &self.feasibility
    }

    pub fn evp_options(&self) -> &EvpOptions {
        &self.evp_options
    }

    pub fn objective(&self, alpha: &ExternalVariable) -> Result<Vec<f64>> {
        self.layout.check(alpha)?;
        let f = (self.objective)(alpha)?;
        if f.len() != self.objective_arity {
            return Err(Error::structural(format!(
                "objective of `{}` returned {} values, arity is {}",
                self.name,
                f.len(),
                self.objective_arity
            )));
        }
        Ok(f)
    }

    /// The inner matrix function at `α`, when the problem has one.
    pub fn assemble(&self, alpha: &ExternalVariable) -> Option<Result<AffineMatrixFunction>> {
        match &self.feasibility {
            Feasibility::Lmi(assemble) => Some(assemble(alpha)),
            Feasibility::Direct(_) => None,
        }
    }

    /// `λ*(α)` together with the EVP status when an EVP was solved.
    pub fn lambda_star(&self, alpha: &ExternalVariable) -> Result<(f64, Option<EvpStatus>)> {
        self.layout.check(alpha)?;
        match &self.feasibility {
            Feasibility::Direct(f) => Ok((f(alpha)?, None)),
            Feasibility::Lmi(assemble) => {
                let amf = assemble(alpha)?;
                let res = solve_evp(&amf, &self.evp_options).map_err(|e| tag_with_alpha(e, alpha))?;
                Ok((res.lambda_star, Some(res.status)))
            }
        }
    }
}

fn tag_with_alpha(err: Error, alpha: &ExternalVariable) -> Error {
    match err {
        Error::Solver { message, dump } => Error::Solver {
            message: format!("{message} (alpha = {:?})", alpha.values),
            dump,
        },
        other => other,
    }
}

/// Feasibility is strict: `λ* < 0`.
pub fn is_feasible(lambda_star: f64) -> bool {
    lambda_star < 0.0
}

/// `[F(α); max{0, λ*(α)}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedObjective {
    values: Vec<f64>,
}

impl AugmentedObjective {
    pub fn new(objective: Vec<f64>, lambda_star: f64) -> Self {
        // λ* = 0 exactly is not feasible, so it must not read as a zero penalty
        let penalty = if is_feasible(lambda_star) {
            0.0
        } else if lambda_star > 0.0 {
            lambda_star
        } else {
            f64::MIN_POSITIVE
        };
        let mut values = objective;
        values.push(penalty);
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The objective part `F(α)`.
    pub fn objective(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }

    pub fn violation(&self) -> f64 {
        *self.values.last().expect("augmented objective is never empty")
    }

    pub fn is_feasible(&self) -> bool {
        self.violation() == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub augmented: AugmentedObjective,
    pub lambda_star: f64,
    pub evp_status: Option<EvpStatus>,
}

pub fn augmented_objective(problem: &BmiProblem, alpha: &ExternalVariable) -> Result<Evaluation> {
    let (lambda_star, evp_status) = problem.lambda_star(alpha)?;
    let f = problem.objective(alpha)?;
    Ok(Evaluation {
        augmented: AugmentedObjective::new(f, lambda_star),
        lambda_star,
        evp_status,
    })
}
