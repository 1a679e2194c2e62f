//! Manufactured solutions and grid-convergence tables on the unit square.

use crate::error::{Error, Result};
use crate::grid::{GridDomain, Shape};
use crate::laplace::{solve_laplace, LaplacianKind};
use crate::linalg::SolverConfig;
use crate::operators::OperatorCatalog;
use crate::zoo::{solve_zoo, ZooProblem};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

pub const ALLOWED_LEVELS: [usize; 5] = [8, 16, 32, 64, 128];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Manufactured {
    /// `u = sin πx sin πy`, `f = 4π⁴u`.
    NavierSine,
    /// `u = sin²πx sin²πy`, `f = Δ²u`.
    ClampedSine2,
    /// `u = sin πx sin πy`, `f = 2π²u` for `−Δu = f`.
    PoissonDirichlet,
}

impl Manufactured {
    pub const ALL: [Manufactured; 3] = [
        Manufactured::NavierSine,
        Manufactured::ClampedSine2,
        Manufactured::PoissonDirichlet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Manufactured::NavierSine => "navier_sine",
            Manufactured::ClampedSine2 => "clamped_sine2",
            Manufactured::PoissonDirichlet => "poisson_dirichlet",
        }
    }

    pub fn parse(s: &str) -> Result<Manufactured> {
        Manufactured::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown manufactured solution '{s}' (navier_sine, clamped_sine2, poisson_dirichlet)"
                ))
            })
    }

    pub fn exact(self, x: f64, y: f64) -> f64 {
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        match self {
            Manufactured::NavierSine | Manufactured::PoissonDirichlet => sx * sy,
            Manufactured::ClampedSine2 => sx * sx * sy * sy,
        }
    }

    pub fn rhs(self, x: f64, y: f64) -> f64 {
        let pi4 = PI.powi(4);
        match self {
            Manufactured::NavierSine => 4.0 * pi4 * self.exact(x, y),
            Manufactured::PoissonDirichlet => 2.0 * PI * PI * self.exact(x, y),
            Manufactured::ClampedSine2 => {
                let (cx, cy) = ((2.0 * PI * x).cos(), (2.0 * PI * y).cos());
                let (ax, ay) = ((PI * x).sin().powi(2), (PI * y).sin().powi(2));
                -8.0 * pi4 * (cx * ay + ax * cy) + 8.0 * pi4 * cx * cy
            }
        }
    }

    /// Problem whose solution is [`Manufactured::exact`].
    pub fn default_problem(self) -> ConvergenceProblem {
        match self {
            Manufactured::NavierSine => ConvergenceProblem::Zoo(ZooProblem::Composition {
                outer: LaplacianKind::Dirichlet,
                inner: LaplacianKind::Dirichlet,
            }),
            Manufactured::ClampedSine2 => ConvergenceProblem::Zoo(ZooProblem::Composition {
                outer: LaplacianKind::Underdetermined,
                inner: LaplacianKind::Overdetermined,
            }),
            Manufactured::PoissonDirichlet => ConvergenceProblem::Laplace(LaplacianKind::Dirichlet),
        }
    }
}

/// What a convergence study solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergenceProblem {
    Zoo(ZooProblem),
    Laplace(LaplacianKind),
}

impl ConvergenceProblem {
    /// Accepts `poisson`, `laplace_<kind>` and every zoo name.
    pub fn parse(s: &str) -> Result<ConvergenceProblem> {
        let t = s.trim().to_ascii_lowercase();
        let laplace = match t.as_str() {
            "poisson" | "laplace_dirichlet" | "laplace_d" => Some(LaplacianKind::Dirichlet),
            "laplace_neumann" | "laplace_n" => Some(LaplacianKind::Neumann),
            "laplace_mixed" => Some(LaplacianKind::Mixed),
            _ => None,
        };
        match laplace {
            Some(k) => Ok(ConvergenceProblem::Laplace(k)),
            None => ZooProblem::parse(&t).map(ConvergenceProblem::Zoo),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConvergenceProblem::Zoo(p) => p.label(),
            ConvergenceProblem::Laplace(k) => format!("laplace_{}", k.as_str()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub cells: usize,
    pub l2_error: f64,
    pub max_error: f64,
    /// Order against the previous row; `None` on the first.
    pub l2_order: Option<f64>,
    pub max_order: Option<f64>,
    pub iterations: usize,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub problem: String,
    pub manufactured: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn l2_orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.l2_order).collect()
    }

    pub fn errors_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].l2_error < w[0].l2_error)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{} with {}\n", self.problem, self.manufactured);
        s.push_str(&format!(
            "{:>5} {:>8} {:>12} {:>12} {:>7} {:>7} {:>7}\n",
            "n", "cells", "L2 error", "max error", "L2 ord", "max ord", "iters"
        ));
        let ord = |o: Option<f64>| o.map_or("-".to_string(), |v| format!("{v:.3}"));
        for r in &self.rows {
            s.push_str(&format!(
                "{:>5} {:>8} {:>12.4e} {:>12.4e} {:>7} {:>7} {:>7}\n",
                r.n,
                r.cells,
                r.l2_error,
                r.max_error,
                ord(r.l2_order),
                ord(r.max_order),
                r.iterations
            ));
        }
        s
    }
}

/// Solves on every level in parallel and tabulates errors against the exact solution.
pub fn run_convergence(
    problem: ConvergenceProblem,
    manufactured: Manufactured,
    levels: &[usize],
    cfg: &SolverConfig,
) -> Result<ConvergenceTable> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no levels given".into()));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(bad) = sorted.iter().find(|n| !ALLOWED_LEVELS.contains(n)) {
        return Err(Error::InvalidArgument(format!(
            "level {bad} not in {ALLOWED_LEVELS:?}"
        )));
    }
    let mut rows = sorted
        .par_iter()
        .map(|&n| solve_level(problem, manufactured, n, cfg))
        .collect::<Result<Vec<_>>>()?;
    for k in 1..rows.len() {
        let ratio = (rows[k].n as f64 / rows[k - 1].n as f64).ln();
        rows[k].l2_order = Some((rows[k - 1].l2_error / rows[k].l2_error).ln() / ratio);
        rows[k].max_order = Some((rows[k - 1].max_error / rows[k].max_error).ln() / ratio);
    }
    Ok(ConvergenceTable {
        problem: problem.label(),
        manufactured: manufactured.as_str().into(),
        rows,
    })
}

fn solve_level(problem: ConvergenceProblem, m: Manufactured, n: usize, cfg: &SolverConfig) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let domain = Arc::new(GridDomain::build(&Shape::Square, n, &[])?);
    let cat = OperatorCatalog::new(domain.clone())?;
    let f = domain.sample(|x, y| m.rhs(x, y));
    let (u, iterations) = match problem {
        ConvergenceProblem::Zoo(p) => {
            let r = solve_zoo(p, &cat, &f, cfg)?;
            (r.solution, r.iterations)
        }
        ConvergenceProblem::Laplace(k) => {
            // the Laplacians here are positive semidefinite: −Δu = f
            let r = solve_laplace(k, &cat, &f, cfg)?;
            (r.solution, r.iterations)
        }
    };
    let err = u.sub(&domain.sample(|x, y| m.exact(x, y)))?;
    Ok(ConvergenceRow {
        n,
        h: domain.h(),
        cells: domain.num_cells(),
        l2_error: err.norm(),
        max_error: err.max_abs(),
        l2_order: None,
        max_order: None,
        iterations,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_rhs_is_the_bilaplacian() {
        // fourth-order central differences of the exact solution
        let m = Manufactured::ClampedSine2;
        let d = 1e-2;
        let u = |x: f64, y: f64| m.exact(x, y);
        let lap = |x: f64, y: f64| (u(x + d, y) + u(x - d, y) + u(x, y + d) + u(x, y - d) - 4.0 * u(x, y)) / (d * d);
        for &(x, y) in &[(0.3, 0.6), (0.5, 0.5), (0.1, 0.8)] {
            let bl = (lap(x + d, y) + lap(x - d, y) + lap(x, y + d) + lap(x, y - d) - 4.0 * lap(x, y)) / (d * d);
            let f = m.rhs(x, y);
            assert!((bl - f).abs() < 1e-2 * f.abs().max(100.0), "{bl} vs {f}");
        }
    }

    #[test]
    fn rejects_foreign_levels() {
        let cfg = SolverConfig::default();
        let p = Manufactured::PoissonDirichlet.default_problem();
        assert!(run_convergence(p, Manufactured::PoissonDirichlet, &[12], &cfg).is_err());
        assert!(run_convergence(p, Manufactured::PoissonDirichlet, &[], &cfg).is_err());
    }

    #[test]
    fn poisson_is_second_order() {
        let cfg = SolverConfig::default();
        let m = Manufactured::PoissonDirichlet;
        let t = run_convergence(m.default_problem(), m, &[16, 8], &cfg).unwrap();
        assert_eq!(t.rows[0].n, 8);
        assert!(t.errors_decrease());
        assert!(t.l2_orders()[0] > 1.8, "{}", t.render());
    }

    #[test]
    fn problem_names() {
        assert_eq!(
            ConvergenceProblem::parse("poisson").unwrap(),
            ConvergenceProblem::Laplace(LaplacianKind::Dirichlet)
        );
        assert_eq!(
            ConvergenceProblem::parse("navier").unwrap(),
            Manufactured::NavierSine.default_problem()
        );
        assert!(Manufactured::parse("nope").is_err());
    }
}
