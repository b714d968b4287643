//! Second-order cone programming and the generalized Rayleigh-quotient solver.

mod eig;
mod ipm;
mod socp;

pub use eig::{generalized_rayleigh_max, normalize_phase};
pub use ipm::IpmSettings;
pub use socp::{
    ConeConstraint, Infeasibility, LinearEquality, SocpProblem, SocpSolution, SocpStatus,
    SparseRow,
};

use crate::Result;

/// Solves `p` to tolerance `tol` (primal residual, dual residual and relative gap).
///
/// An unbounded objective is reported as [`SocpStatus::Infeasible`] with
/// [`Infeasibility::Dual`]; hitting the iteration cap yields
/// [`SocpStatus::MaxIterations`]. Malformed problems and `tol <= 0` are errors.
pub fn solve_socp(p: &SocpProblem, tol: f64) -> Result<SocpSolution> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(crate::Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let settings = IpmSettings {
        tol,
        ..IpmSettings::default()
    };
    solve_socp_with(p, &settings)
}

pub fn solve_socp_with(p: &SocpProblem, settings: &IpmSettings) -> Result<SocpSolution> {
    ipm::solve(p, settings)
}
