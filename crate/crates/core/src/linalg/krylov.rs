use super::sparse::SparseOperator;
use crate::error::{Error, Result};
use crate::grid::{wdot, Field};

/// Environment variable overriding the default relative tolerance.
pub const TOLERANCE_ENV: &str = "BIZOO_TOL";

/// Settings shared by the Krylov solvers.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Relative residual target, in (0, 1).
    pub rel_tolerance: f64,
    /// `None` means 20 × dimension.
    pub max_iterations: Option<usize>,
    /// Kernel vectors to deflate; orthonormalized internally.
    pub deflation_basis: Vec<Field>,
    /// Relative size of the out-of-range part above which data is rejected.
    pub compat_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tolerance: 1e-10,
            max_iterations: None,
            deflation_basis: Vec::new(),
            compat_tolerance: 1e-8,
        }
    }
}

impl SolverConfig {
    /// Defaults, with `BIZOO_TOL` applied when set to a valid number.
    pub fn from_env() -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(t) = std::env::var(TOLERANCE_ENV).ok().and_then(|s| s.trim().parse::<f64>().ok()) {
            if t > 0.0 && t < 1.0 {
                cfg.rel_tolerance = t;
            }
        }
        cfg
    }

    pub fn with_tolerance(mut self, tol: f64) -> SolverConfig {
        self.rel_tolerance = tol;
        self
    }

    pub fn with_deflation(mut self, basis: Vec<Field>) -> SolverConfig {
        self.deflation_basis = basis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} outside (0,1)",
                self.rel_tolerance
            )));
        }
        if self.compat_tolerance.is_nan() || self.compat_tolerance <= 0.0 {
            return Err(Error::InvalidArgument("compatibility tolerance must be positive".into()));
        }
        Ok(())
    }

    fn iteration_cap(&self, dim: usize) -> usize {
        self.max_iterations.unwrap_or(20 * dim.max(1))
    }
}

/// Result of an iterative solve.
#[derive(Clone, Debug)]
pub struct Solution {
    pub field: Field,
    pub iterations: usize,
    /// Relative residual recomputed from the returned field.
    pub residual: f64,
    /// Relative size of the removed kernel component of the data.
    pub compatibility_defect: f64,
}

/// Which normal-equation solve to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalSide {
    /// `x = argmin ‖A x − b‖`, `b` in the codomain.
    LeastSquares,
    /// `x = A (A*A)⁻¹ b`, `b` in the domain: minimal-norm solution of `A* x = b`.
    MinNorm,
}

/// Orthonormalizes in the weighted inner product (two Gram–Schmidt passes).
/// Vectors whose norm falls below `1e-8` of the original are dropped.
pub fn orthonormalize(basis: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in basis {
        let mut q = v.clone();
        let n0 = wdot(w, &q, &q).sqrt();
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for e in &out {
                let c = wdot(w, &q, e);
                q.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = wdot(w, &q, &q).sqrt();
        if n > 1e-8 * n0 {
            q.iter_mut().for_each(|a| *a /= n);
            out.push(q);
        }
    }
    out
}

/// Removes the span of an orthonormal `basis` from `v`.
pub fn project_out(v: &mut [f64], basis: &[Vec<f64>], w: &[f64]) {
    for e in basis {
        let c = wdot(w, v, e);
        v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// Conjugate gradients for an operator self-adjoint in the weights `w`.
/// Iterates stay orthogonal to `deflate` (orthonormal); `b` must already be.
pub(crate) fn cg_core(
    apply: &dyn Fn(&[f64], &mut [f64]),
    w: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
    deflate: &[Vec<f64>],
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = wdot(w, b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut q = vec![0.0; n];
    let mut rr = wdot(w, &r, &r);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        apply(&p, &mut q);
        let pq = wdot(w, &p, &q);
        if pq.is_nan() || pq <= 0.0 {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: rr.sqrt() / bnorm,
                history,
            });
        }
        let alpha = rr / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        if !deflate.is_empty() {
            project_out(&mut r, deflate, w);
        }
        let rr_new = wdot(w, &r, &r);
        let rel = rr_new.sqrt() / bnorm;
        history.push(rel);
        if rel <= tol {
            if !deflate.is_empty() {
                project_out(&mut x, deflate, w);
            }
            return Ok((x, it));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
        history,
    })
}

/// Runs CG, then one residual-correction pass so the true residual meets `tol`.
fn cg_refined(
    apply: &dyn Fn(&[f64], &mut [f64]),
    w: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
    deflate: &[Vec<f64>],
) -> Result<(Vec<f64>, usize, f64)> {
    let bnorm = wdot(w, b, b).sqrt();
    let (mut x, mut iters) = cg_core(apply, w, b, tol, max_iter, deflate)?;
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut ax = vec![0.0; b.len()];
    let mut rel = f64::INFINITY;
    for _ in 0..3 {
        apply(&x, &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        if !deflate.is_empty() {
            project_out(&mut r, deflate, w);
        }
        rel = wdot(w, &r, &r).sqrt() / bnorm;
        if rel <= tol {
            break;
        }
        let rnorm = rel * bnorm;
        let target = (tol * bnorm / rnorm).min(0.5);
        let (dx, k) = cg_core(apply, w, &r, target, max_iter, deflate)?;
        iters += k;
        axpy(1.0, &dx, &mut x);
    }
    if rel > tol {
        apply(&x, &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        if !deflate.is_empty() {
            project_out(&mut r, deflate, w);
        }
        rel = wdot(w, &r, &r).sqrt() / bnorm;
        if rel > tol {
            return Err(Error::NonConvergence {
                iterations: iters,
                residual: rel,
                history: vec![rel],
            });
        }
    }
    Ok((x, iters, rel))
}

fn check_square(m: &SparseOperator, b: &Field) -> Result<()> {
    m.domain().ensure_same(m.codomain())?;
    m.codomain().ensure_same(b.space())
}

/// Solves `M u = b` for `M` symmetric positive definite in the weights.
/// A non-empty `cfg.deflation_basis` switches to [`deflated_cg_solve`].
pub fn cg_solve(m: &SparseOperator, b: &Field, cfg: &SolverConfig) -> Result<Solution> {
    if !cfg.deflation_basis.is_empty() {
        return deflated_cg_solve(m, b, &cfg.deflation_basis, cfg);
    }
    cfg.validate()?;
    check_square(m, b)?;
    let w = m.domain().weights();
    let apply = |x: &[f64], y: &mut [f64]| m.apply_slice(x, y);
    let (x, iterations, residual) = cg_refined(
        &apply,
        w,
        b.values(),
        cfg.rel_tolerance,
        cfg.iteration_cap(b.dim()),
        &[],
    )?;
    Ok(Solution {
        field: Field::new(m.domain().clone(), x)?,
        iterations,
        residual,
        compatibility_defect: 0.0,
    })
}

/// Solves `M u = π b` with `u ⊥ ker M` for `M` positive semidefinite,
/// rejecting `b` whose kernel component exceeds the compatibility tolerance.
pub fn deflated_cg_solve(
    m: &SparseOperator,
    b: &Field,
    kernel: &[Field],
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    check_square(m, b)?;
    let space = m.domain();
    for k in kernel {
        space.ensure_same(k.space())?;
    }
    let w = space.weights();
    let basis = orthonormalize(&kernel.iter().map(|k| k.values().to_vec()).collect::<Vec<_>>(), w);
    let mut pb = b.values().to_vec();
    project_out(&mut pb, &basis, w);
    let bnorm = b.norm();
    let defect_abs = {
        let d: Vec<f64> = b.values().iter().zip(&pb).map(|(a, c)| a - c).collect();
        wdot(w, &d, &d).sqrt()
    };
    let defect = if bnorm > 0.0 { defect_abs / bnorm } else { 0.0 };
    if defect > cfg.compat_tolerance {
        return Err(Error::Compatibility {
            subspace: format!("orthogonal complement of ker {}", m.name()),
            defect,
            tolerance: cfg.compat_tolerance,
        });
    }
    let apply = |x: &[f64], y: &mut [f64]| m.apply_slice(x, y);
    let (x, iterations, residual) = cg_refined(
        &apply,
        w,
        &pb,
        cfg.rel_tolerance,
        cfg.iteration_cap(b.dim()),
        &basis,
    )?;
    Ok(Solution {
        field: Field::new(space.clone(), x)?,
        iterations,
        residual,
        compatibility_defect: defect,
    })
}

/// Least-squares or minimal-norm solve through the normal operator `A*A`.
/// `cfg.deflation_basis`, when given, must span `ker A`.
pub fn normal_cg_solve(
    a: &SparseOperator,
    b: &Field,
    side: NormalSide,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    let adj = a.adjoint();
    let wd = a.domain().weights();
    let basis = orthonormalize(
        &cfg.deflation_basis.iter().map(|k| k.values().to_vec()).collect::<Vec<_>>(),
        wd,
    );
    let n = a.ncols();
    let cap = cfg.iteration_cap(n.max(a.nrows()));
    match side {
        NormalSide::LeastSquares => {
            a.codomain().ensure_same(b.space())?;
            let bnorm = b.norm();
            if bnorm == 0.0 {
                return Ok(Solution {
                    field: Field::zeros(a.domain().clone()),
                    iterations: 0,
                    residual: 0.0,
                    compatibility_defect: 0.0,
                });
            }
            let (x, iterations) = cgls(a, &adj, b.values(), cfg.rel_tolerance, cap, &basis)?;
            let ax = a.apply_vec(&x);
            let r: Vec<f64> = b.values().iter().zip(&ax).map(|(b, ax)| b - ax).collect();
            let residual = a.codomain().norm(&r) / bnorm;
            Ok(Solution {
                field: Field::new(a.domain().clone(), x)?,
                iterations,
                residual,
                compatibility_defect: residual,
            })
        }
        NormalSide::MinNorm => {
            a.domain().ensure_same(b.space())?;
            let mut pb = b.values().to_vec();
            project_out(&mut pb, &basis, wd);
            let bnorm = b.norm();
            let defect = if bnorm > 0.0 {
                let d: Vec<f64> = b.values().iter().zip(&pb).map(|(x, y)| x - y).collect();
                a.domain().norm(&d) / bnorm
            } else {
                0.0
            };
            if defect > cfg.compat_tolerance {
                return Err(Error::Compatibility {
                    subspace: format!("range of {}*", a.name()),
                    defect,
                    tolerance: cfg.compat_tolerance,
                });
            }
            let (x, iterations, _) = cgme_refined(a, &adj, &pb, cfg.rel_tolerance, cap, &basis)?;
            let back = adj.apply_vec(&x);
            let r: Vec<f64> = b.values().iter().zip(&back).map(|(b, v)| b - v).collect();
            let residual = if bnorm > 0.0 { a.domain().norm(&r) / bnorm } else { 0.0 };
            Ok(Solution {
                field: Field::new(a.codomain().clone(), x)?,
                iterations,
                residual,
                compatibility_defect: defect,
            })
        }
    }
}

/// Craig's method: minimal-norm `x = A y` with `A* x = b`, iterating on
/// `A` and `A*` separately so the attainable residual scales with the
/// condition of `A` rather than of `A*A`. `b` must be orthogonal to `ker A`.
fn cgme(
    a: &SparseOperator,
    adj: &SparseOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    deflate: &[Vec<f64>],
) -> Result<(Vec<f64>, usize)> {
    let wd = a.domain().weights();
    let wc = a.codomain().weights();
    let mut x = vec![0.0; a.nrows()];
    let bnorm = wdot(wd, b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut p = a.apply_vec(&r);
    let mut q = vec![0.0; a.ncols()];
    let mut ar = vec![0.0; a.nrows()];
    let mut rr = wdot(wd, &r, &r);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let pp = wdot(wc, &p, &p);
        if pp.is_nan() || pp <= 0.0 {
            return Err(Error::SingularNormal(format!(
                "{} annihilates a search direction; supply its kernel",
                a.name()
            )));
        }
        let alpha = rr / pp;
        adj.apply_slice(&p, &mut q);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        project_out(&mut r, deflate, wd);
        let rr_new = wdot(wd, &r, &r);
        let rel = rr_new.sqrt() / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok((x, it));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        a.apply_slice(&r, &mut ar);
        p.iter_mut().zip(&ar).for_each(|(p, s)| *p = s + beta * *p);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: history.last().copied().unwrap_or(1.0),
        history,
    })
}

/// [`cgme`] followed by up to three residual-correction passes.
fn cgme_refined(
    a: &SparseOperator,
    adj: &SparseOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    deflate: &[Vec<f64>],
) -> Result<(Vec<f64>, usize, f64)> {
    let wd = a.domain().weights();
    let bnorm = wdot(wd, b, b).sqrt();
    let (mut x, mut iters) = cgme(a, adj, b, tol, max_iter, deflate)?;
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut rel = f64::INFINITY;
    for pass in 0..4 {
        let back = adj.apply_vec(&x);
        let mut r: Vec<f64> = b.iter().zip(&back).map(|(b, v)| b - v).collect();
        project_out(&mut r, deflate, wd);
        let rnorm = wdot(wd, &r, &r).sqrt();
        rel = rnorm / bnorm;
        if rel <= tol || pass == 3 {
            break;
        }
        let (dx, k) = cgme(a, adj, &r, (tol * bnorm / rnorm).min(0.5), max_iter, deflate)?;
        iters += k;
        axpy(1.0, &dx, &mut x);
    }
    if rel > tol {
        return Err(Error::NonConvergence {
            iterations: iters,
            residual: rel,
            history: vec![rel],
        });
    }
    Ok((x, iters, rel))
}

/// CGLS: CG on `A*A x = A* b` without forming the product.
/// Stops when `‖b − A x‖ ≤ tol ‖b‖` (consistent data) or when
/// `‖A* r‖ ≤ tol ‖A‖ ‖r‖` (least-squares optimality).
fn cgls(
    a: &SparseOperator,
    adj: &SparseOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    deflate: &[Vec<f64>],
) -> Result<(Vec<f64>, usize)> {
    let wd = a.domain().weights();
    let wc = a.codomain().weights();
    let n = a.ncols();
    let anorm = a.norm_estimate(30).max(f64::MIN_POSITIVE);
    let bnorm = wdot(wc, b, b).sqrt();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut s = adj.apply_vec(&r);
    project_out(&mut s, deflate, wd);
    let mut p = s.clone();
    let mut gamma = wdot(wd, &s, &s);
    let mut q = vec![0.0; a.nrows()];
    let mut history = Vec::new();
    if gamma.sqrt() <= tol * anorm * bnorm {
        return Ok((x, 0));
    }
    for it in 1..=max_iter {
        a.apply_slice(&p, &mut q);
        let qq = wdot(wc, &q, &q);
        if qq.is_nan() || qq <= 0.0 {
            return Err(Error::SingularNormal(format!(
                "{} annihilates a search direction; supply its kernel",
                a.name()
            )));
        }
        let alpha = gamma / qq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        adj.apply_slice(&r, &mut s);
        project_out(&mut s, deflate, wd);
        let gamma_new = wdot(wd, &s, &s);
        let rnorm = wdot(wc, &r, &r).sqrt();
        history.push(rnorm / bnorm);
        if rnorm <= tol * bnorm || gamma_new.sqrt() <= tol * anorm * rnorm {
            project_out(&mut x, deflate, wd);
            return Ok((x, it));
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.iter_mut().zip(&s).for_each(|(p, s)| *p = s + beta * *p);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: history.last().copied().unwrap_or(1.0),
        history,
    })
}
