use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sparse row: `(variable index, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// `‖A x + b‖₂ ≤ cᵀx + d`.
///
/// With no `a_rows` this is the scalar inequality `cᵀx + d ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConeConstraint {
    pub a_rows: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub c: SparseRow,
    pub d: f64,
}

impl ConeConstraint {
    /// Scalar linear inequality `cᵀx + d ≥ 0`.
    pub fn nonnegative(c: SparseRow, d: f64) -> Self {
        ConeConstraint {
            a_rows: Vec::new(),
            b: Vec::new(),
            c,
            d,
        }
    }

    pub fn dim(&self) -> usize {
        self.a_rows.len() + 1
    }
}

/// `aᵀx = rhs`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearEquality {
    pub a: SparseRow,
    pub rhs: f64,
}

/// `minimize objectiveᵀ x` subject to second-order cone and linear equality constraints.
///
/// Complex unknowns are lifted to consecutive `(Re, Im)` real pairs by every
/// builder in this crate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SocpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub cone_constraints: Vec<ConeConstraint>,
    pub linear_eqs: Vec<LinearEquality>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SocpStatus {
    Optimal,
    /// Certified infeasible. [`SocpSolution::infeasibility`] tells whether
    /// the primal is infeasible or the objective is unbounded below (dual infeasible).
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Infeasibility {
    Primal,
    /// The primal objective is unbounded below.
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocpSolution {
    pub x: Vec<f64>,
    pub status: SocpStatus,
    pub infeasibility: Option<Infeasibility>,
    pub objective_value: f64,
    /// Largest violation of any cone or equality constraint at `x`, measured
    /// with each constraint's coefficient rows normalised to unit norm.
    pub max_violation: f64,
    pub iterations: usize,
}

fn check_row(row: &SparseRow, n: usize, what: &str) -> Result<()> {
    for &(j, v) in row {
        if j >= n {
            return Err(Error::invalid(format!("{what}: variable index {j} >= {n}")));
        }
        if !v.is_finite() {
            return Err(Error::invalid(format!("{what}: non-finite coefficient")));
        }
    }
    Ok(())
}

fn row_dot(row: &SparseRow, x: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * x[j]).sum()
}

impl SocpProblem {
    pub fn new(n_vars: usize) -> Self {
        SocpProblem {
            n_vars,
            objective: vec![0.0; n_vars],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars;
        if self.objective.len() != n {
            return Err(Error::invalid(format!(
                "objective has {} entries for {n} variables",
                self.objective.len()
            )));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("objective has non-finite entries"));
        }
        for (i, cone) in self.cone_constraints.iter().enumerate() {
            if cone.a_rows.len() != cone.b.len() {
                return Err(Error::invalid(format!("cone {i}: {} rows but {} offsets", cone.a_rows.len(), cone.b.len())));
            }
            for row in &cone.a_rows {
                check_row(row, n, &format!("cone {i}"))?;
            }
            check_row(&cone.c, n, &format!("cone {i}"))?;
            if !cone.d.is_finite() || cone.b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("cone {i}: non-finite offset")));
            }
        }
        for (i, eq) in self.linear_eqs.iter().enumerate() {
            check_row(&eq.a, n, &format!("equality {i}"))?;
            if !eq.rhs.is_finite() {
                return Err(Error::invalid(format!("equality {i}: non-finite rhs")));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation `max(‖Ax+b‖ − (cᵀx+d), |aᵀx − rhs|)` over all constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for cone in &self.cone_constraints {
            let t = row_dot(&cone.c, x) + cone.d;
            let norm = cone
                .a_rows
                .iter()
                .zip(&cone.b)
                .map(|(r, b)| (row_dot(r, x) + b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(norm - t);
        }
        for eq in &self.linear_eqs {
            worst = worst.max((row_dot(&eq.a, x) - eq.rhs).abs());
        }
        worst
    }

    /// Sparse triplet dump for cross-checking with external solvers.
    ///
    /// Layout, one record per line, whitespace separated:
    ///
    /// ```text
    /// # socp n_vars <n> cones <m> equalities <p>
    /// obj <var> <coef>
    /// cone <id> dim <d> offset <d_scalar>
    /// t <id> <var> <coef>            (the cᵀx row of cone <id>)
    /// a <id> <row> <var> <coef>      (row <row> of A, 0-based)
    /// b <id> <row> <value>
    /// eq <id> <var> <coef>
    /// rhs <id> <value>
    /// ```
    pub fn to_triplet_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# socp n_vars {} cones {} equalities {}",
            self.n_vars,
            self.cone_constraints.len(),
            self.linear_eqs.len()
        );
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "obj {j} {c:e}");
            }
        }
        for (i, cone) in self.cone_constraints.iter().enumerate() {
            let _ = writeln!(out, "cone {i} dim {} offset {:e}", cone.dim(), cone.d);
            for &(j, v) in &cone.c {
                let _ = writeln!(out, "t {i} {j} {v:e}");
            }
            for (r, (row, b)) in cone.a_rows.iter().zip(&cone.b).enumerate() {
                for &(j, v) in row {
                    let _ = writeln!(out, "a {i} {r} {j} {v:e}");
                }
                if *b != 0.0 {
                    let _ = writeln!(out, "b {i} {r} {b:e}");
                }
            }
        }
        for (i, eq) in self.linear_eqs.iter().enumerate() {
            for &(j, v) in &eq.a {
                let _ = writeln!(out, "eq {i} {j} {v:e}");
            }
            let _ = writeln!(out, "rhs {i} {:e}", eq.rhs);
        }
        out
    }

    pub fn dump_triplets(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        f.write_all(self.to_triplet_string().as_bytes())
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })
    }
}
