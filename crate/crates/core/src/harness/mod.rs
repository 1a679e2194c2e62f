//! Plumbing behind the command line: expressions, studies, audits and reports.

pub mod checks;
pub mod convergence;
pub mod expr;
pub mod report;

use crate::error::{Error, Result};
use crate::grid::{Axis, Field};
use crate::laplace::{friedrichs_pair, poincare_pair};
use crate::linalg::SolverConfig;
use crate::operators::OperatorCatalog;
use serde::Serialize;
use std::f64::consts::PI;

pub use checks::{run_checks, CheckOutcome};
pub use convergence::{run_convergence, ConvergenceProblem, ConvergenceTable, Manufactured};
pub use expr::{parse_expression, Expr};
pub use report::{read_field_csv, write_field_csv, SolveReport};

/// Discrete Friedrichs and Poincaré constants against `d/π`.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsAudit {
    pub c_f_h: f64,
    pub c_p_h: f64,
    pub d: f64,
    pub d_over_pi: f64,
    pub bound_ok: bool,
}

/// Samples `(fx, fy)` at interior-face midpoints: the normal component per face,
/// laid out like the gradient's edge space.
pub fn edge_field(cat: &OperatorCatalog, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Result<Field> {
    let d = cat.domain();
    let values = d
        .interior_faces()
        .iter()
        .map(|f| {
            let ((xa, ya), (xb, yb)) = (d.center(f.a), d.center(f.b));
            let (x, y) = (0.5 * (xa + xb), 0.5 * (ya + yb));
            match f.axis {
                Axis::X => fx(x, y),
                Axis::Y => fy(x, y),
            }
        })
        .collect();
    Field::new(cat.gradient().codomain().clone(), values)
}

pub fn constants_audit(cat: &OperatorCatalog, cfg: &SolverConfig) -> Result<ConstantsAudit> {
    let domain = cat.domain();
    if domain.components() != 1 {
        return Err(Error::InvalidDomain(format!(
            "constants audit needs a connected domain, found {} components",
            domain.components()
        )));
    }
    let c_f_h = friedrichs_pair(cat)?.best_constant(cfg)?;
    let c_p_h = poincare_pair(cat)?.best_constant(cfg)?;
    let d = domain.diameter();
    let d_over_pi = d / PI;
    Ok(ConstantsAudit {
        c_f_h,
        c_p_h,
        d,
        d_over_pi,
        bound_ok: c_f_h <= d_over_pi && c_p_h <= d_over_pi,
    })
}
