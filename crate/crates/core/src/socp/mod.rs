//! Second-order cone programs in standard form and a bundled interior-point solver.
//!
//! ```text
//! minimize  cᵀx
//! s.t.      A x = b
//!           G x + s = h,   s ∈ K
//! ```
//!
//! `K` is a product of nonnegative orthants and second-order cones
//! `{(t, u) : ‖u‖ ≤ t}`. Programs are assembled row by row from [`Affine`]
//! expressions; the [`ConicSolver`] trait is the seam for swapping in an
//! external solver.

mod cones;
mod dump;
mod ipm;
mod program;

pub use dump::write_standard_form;
pub use ipm::{InteriorPoint, SolverSettings};
pub use program::{quadratic_leq_as_cone, Affine, ConeBlock, ConeKind, ConicProgram, VariableBlock};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Terminal state of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalFailure,
}

/// Primal/dual point returned by a solver, with its quality measures.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub status: SolveStatus,
    pub x: Vec<T>,
    /// Equality multipliers.
    pub y: Vec<T>,
    /// Cone multipliers.
    pub z: Vec<T>,
    /// Cone slacks `h − Gx`.
    pub s: Vec<T>,
    pub primal_objective: T,
    pub dual_objective: T,
    pub iterations: usize,
    /// `max(‖Ax − b‖, ‖Gx + s − h‖) / max(1, ‖(b, h)‖)`.
    pub primal_residual: T,
    /// `‖Aᵀy + Gᵀz + c‖ / max(1, ‖c‖)`.
    pub dual_residual: T,
    /// Complementary slackness `sᵀz`.
    pub complementarity: T,
}

impl<T: Real> Solution<T> {
    /// Duality gap relative to the objective magnitude.
    pub fn relative_gap(&self) -> T {
        let scale = T::one().max(self.primal_objective.abs().min(self.dual_objective.abs()));
        self.complementarity.abs() / scale
    }
}

/// Failure modes of a solve; each carries what the solver knows.
#[derive(Clone, Debug, thiserror::Error)]
pub enum SolveError<T: Real> {
    #[error("problem is primal infeasible (certificate residual {residual:?})")]
    Infeasible { residual: T },
    #[error("problem is unbounded (certificate residual {residual:?})")]
    Unbounded { residual: T },
    /// Stopped early (iteration limit or stall); carries the last iterate,
    /// whose status tells which.
    #[error("stopped before convergence ({:?})", .0.status)]
    MaxIter(Box<Solution<T>>),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl<T: Real> SolveError<T> {
    pub fn status(&self) -> SolveStatus {
        match self {
            SolveError::Infeasible { .. } => SolveStatus::Infeasible,
            SolveError::Unbounded { .. } => SolveStatus::Unbounded,
            SolveError::MaxIter(sol) => sol.status,
            SolveError::Numerical(_) => SolveStatus::NumericalFailure,
        }
    }
}

/// Anything that can solve a [`ConicProgram`].
pub trait ConicSolver<T: Real> {
    fn solve(&self, program: &ConicProgram<T>) -> Result<Solution<T>, SolveError<T>>;
}

/// Solves with the bundled interior-point method at relative tolerance `tol`.
pub fn solve<T: Real>(program: &ConicProgram<T>, tol: T) -> Result<Solution<T>, SolveError<T>> {
    InteriorPoint::new(SolverSettings {
        tol,
        ..SolverSettings::default()
    })
    .solve(program)
}
