//! Laplacian solution operators on the ambient cell space `ℝ^{C0}`.
//!
//! | kind            | operator           | data        | solution            |
//! |-----------------|--------------------|-------------|---------------------|
//! | Dirichlet       | `L_D`              | any         | `L_D⁻¹ f`           |
//! | Neumann         | `L_N`              | `⊥ ℝ`       | `L_N⁺ f`, `⊥ ℝ`     |
//! | Overdetermined  | `A r`              | `⊥ ℍ`       | `pad K⁻¹ Aᵀ f`      |
//! | Underdetermined | `pad Aᵀ`           | any         | `A K⁻¹ (f|C1)`      |
//! | Mixed           | `L_mixed`          | any / `⊥ ℝ` | by labels           |
//!
//! with `K = AᵀA` and `ℍ = ker Aᵀ` the discrete harmonic functions.

use crate::error::{Error, Result};
use crate::grid::{Bc, Field, GridDomain};
use crate::linalg::{cg_solve, deflated_cg_solve, normal_cg_solve, NormalSide, SolverConfig};
use crate::operators::OperatorCatalog;
use crate::toolbox::{make_pair_with_kernel, DualPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LaplacianKind {
    Dirichlet,
    Neumann,
    /// Both boundary conditions; injective, range `ℍ^⊥`.
    Overdetermined,
    /// No boundary conditions; surjective, kernel `ℍ`.
    Underdetermined,
    /// Dirichlet on faces labelled so, Neumann elsewhere.
    Mixed,
}

impl LaplacianKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LaplacianKind::Dirichlet => "dirichlet",
            LaplacianKind::Neumann => "neumann",
            LaplacianKind::Overdetermined => "overdetermined",
            LaplacianKind::Underdetermined => "underdetermined",
            LaplacianKind::Mixed => "mixed",
        }
    }
}

/// Output of one inverse application, before measurement.
#[derive(Clone, Debug)]
pub struct InverseApplication {
    pub field: Field,
    pub iterations: usize,
    pub compatibility_defect: f64,
    /// `‖f|ring0‖`, dropped by the underdetermined inverse.
    pub discarded_ring_mass: f64,
}

#[derive(Clone, Debug)]
pub struct LaplaceSolveReport {
    pub kind: LaplacianKind,
    pub solution: Field,
    pub pde_residual_norm: f64,
    /// Named boundary and orthogonality conditions with their measured norms.
    pub constraint_norms: Vec<(String, f64)>,
    pub compatibility_defect: f64,
    pub discarded_ring_mass: f64,
    pub iterations: usize,
}

/// Solves `𝓛 u = f` and measures every condition from the returned `u`.
pub fn solve_laplace(
    kind: LaplacianKind,
    cat: &OperatorCatalog,
    f: &Field,
    cfg: &SolverConfig,
) -> Result<LaplaceSolveReport> {
    let inv = apply_inverse(kind, cat, f, cfg)?;
    let m = measure(kind, cat, &inv.field, f, "u", cfg)?;
    Ok(LaplaceSolveReport {
        kind,
        solution: inv.field,
        pde_residual_norm: m.pde_residual,
        constraint_norms: m.constraints,
        compatibility_defect: inv.compatibility_defect,
        discarded_ring_mass: inv.discarded_ring_mass,
        iterations: inv.iterations,
    })
}

fn compat(e: Error, subspace: &str) -> Error {
    match e {
        Error::Compatibility { defect, tolerance, .. } => Error::Compatibility {
            subspace: subspace.to_string(),
            defect,
            tolerance,
        },
        other => other,
    }
}

/// Indicators of the components that carry no Dirichlet-labelled face.
fn floating_components(domain: &GridDomain) -> Vec<Field> {
    let mut pinned = vec![false; domain.components()];
    for (k, face) in domain.boundary_faces().iter().enumerate() {
        if domain.label(k) == Bc::Dirichlet {
            pinned[domain.component_of(face.cell)] = true;
        }
    }
    domain
        .component_indicators()
        .into_iter()
        .zip(pinned)
        .filter(|(_, p)| !p)
        .map(|(f, _)| f)
        .collect()
}

/// Applies the inverse of the chosen Laplacian to `f ∈ ℝ^{C0}`.
pub fn apply_inverse(
    kind: LaplacianKind,
    cat: &OperatorCatalog,
    f: &Field,
    cfg: &SolverConfig,
) -> Result<InverseApplication> {
    let domain = cat.domain();
    domain.cell_space().ensure_same(f.space())?;
    let plain = |field: Field, iterations: usize, defect: f64| InverseApplication {
        field,
        iterations,
        compatibility_defect: defect,
        discarded_ring_mass: 0.0,
    };
    match kind {
        LaplacianKind::Dirichlet => {
            let s = cg_solve(cat.laplace_dirichlet(), f, &SolverConfig { deflation_basis: Vec::new(), ..cfg.clone() })?;
            Ok(plain(s.field, s.iterations, 0.0))
        }
        LaplacianKind::Neumann => {
            let s = deflated_cg_solve(cat.laplace_neumann(), f, &domain.component_indicators(), cfg)
                .map_err(|e| compat(e, "⊥ℝ (constants)"))?;
            Ok(plain(s.field, s.iterations, s.compatibility_defect))
        }
        LaplacianKind::Mixed => {
            let kernel = floating_components(domain);
            let s = deflated_cg_solve(cat.laplace_mixed(), f, &kernel, cfg)
                .map_err(|e| compat(e, "⊥ℝ (constants)"))?;
            Ok(plain(s.field, s.iterations, s.compatibility_defect))
        }
        LaplacianKind::Overdetermined => {
            let a = cat.over()?;
            let s = normal_cg_solve(a, f, NormalSide::LeastSquares, &SolverConfig { deflation_basis: Vec::new(), ..cfg.clone() })?;
            if s.compatibility_defect > cfg.compat_tolerance {
                return Err(Error::Compatibility {
                    subspace: "⊥ℍ (range of A)".into(),
                    defect: s.compatibility_defect,
                    tolerance: cfg.compat_tolerance,
                });
            }
            let u = cat.pad(1)?.apply(&s.field)?;
            Ok(plain(u, s.iterations, s.compatibility_defect))
        }
        LaplacianKind::Underdetermined => {
            let a = cat.over()?;
            let inner = restrict(cat, 1, f)?;
            let s = normal_cg_solve(a, &inner, NormalSide::MinNorm, &SolverConfig { deflation_basis: Vec::new(), ..cfg.clone() })?;
            Ok(InverseApplication {
                field: s.field,
                iterations: s.iterations,
                compatibility_defect: 0.0,
                discarded_ring_mass: ring_norms(domain, f).0,
            })
        }
    }
}

/// Restriction `C0 → C_k`.
pub fn restrict(cat: &OperatorCatalog, k: usize, f: &Field) -> Result<Field> {
    cat.pad(k)?.adjoint().apply(f)
}

/// `(‖v|ring0‖, ‖v|C1‖)` for a field on `C0`.
pub fn ring_norms(domain: &GridDomain, v: &Field) -> (f64, f64) {
    let w = v.space().weights();
    let (mut outer, mut inner) = (0.0, 0.0);
    for (c, (x, wi)) in v.values().iter().zip(w).enumerate() {
        if domain.depth(c) == 0 {
            outer += wi * x * x;
        } else {
            inner += wi * x * x;
        }
    }
    (outer.sqrt(), inner.sqrt())
}

/// Largest `|⟨v, 1_K⟩| / ‖1_K‖` over the given indicators.
pub fn constant_component(v: &Field, indicators: &[Field]) -> Result<f64> {
    indicators
        .iter()
        .map(|k| Ok(v.dot(k)?.abs() / k.norm()))
        .try_fold(0.0f64, |m, x: Result<f64>| Ok(m.max(x?)))
}

/// `‖(1 − π_A) v‖`: the part of `v` in `ℍ`.
pub fn harmonic_component(cat: &OperatorCatalog, v: &Field, cfg: &SolverConfig) -> Result<f64> {
    if v.norm() == 0.0 {
        return Ok(0.0);
    }
    let a = cat.over()?;
    let tight = SolverConfig { deflation_basis: Vec::new(), ..cfg.clone() }.with_tolerance(cfg.rel_tolerance.min(1e-12));
    let s = normal_cg_solve(a, v, NormalSide::LeastSquares, &tight)?;
    Ok(s.compatibility_defect * v.norm())
}

/// Residual and condition norms of `𝓛 z = g` for one stage.
#[derive(Clone, Debug)]
pub struct StageMeasure {
    pub pde_residual: f64,
    pub constraints: Vec<(String, f64)>,
}

/// Measures `𝓛 z = g`: interior rows give the residual, ring-0 rows and
/// orthogonality tests give the constraints. `var` names the unknown.
pub fn measure(
    kind: LaplacianKind,
    cat: &OperatorCatalog,
    z: &Field,
    g: &Field,
    var: &str,
    cfg: &SolverConfig,
) -> Result<StageMeasure> {
    let domain = cat.domain();
    let c = |s: String, v: f64| (s, v);
    match kind {
        LaplacianKind::Dirichlet => {
            let r = cat.laplace_dirichlet().apply(z)?.sub(g)?;
            let (outer, inner) = ring_norms(domain, &r);
            Ok(StageMeasure {
                pde_residual: inner,
                constraints: vec![c(format!("{var}=0"), outer)],
            })
        }
        LaplacianKind::Neumann => {
            let kernel = domain.component_indicators();
            let r = cat.laplace_neumann().apply(z)?.sub(&project_constants(g, &kernel)?)?;
            let (outer, inner) = ring_norms(domain, &r);
            Ok(StageMeasure {
                pde_residual: inner,
                constraints: vec![
                    c(format!("∂ₙ{var}=0"), outer),
                    c(format!("{var}⊥ℝ"), constant_component(z, &kernel)?),
                ],
            })
        }
        LaplacianKind::Mixed => {
            let kernel = floating_components(domain);
            let r = cat.laplace_mixed().apply(z)?.sub(&project_constants(g, &kernel)?)?;
            let mut on_dirichlet = vec![false; domain.num_cells()];
            for (k, face) in domain.boundary_faces().iter().enumerate() {
                if domain.label(k) == Bc::Dirichlet {
                    on_dirichlet[face.cell] = true;
                }
            }
            let (mut dn, mut nn, mut inner) = (0.0, 0.0, 0.0);
            let w = r.space().weights();
            for (cell, (x, wi)) in r.values().iter().zip(w).enumerate() {
                let s = wi * x * x;
                if domain.depth(cell) > 0 {
                    inner += s;
                } else if on_dirichlet[cell] {
                    dn += s;
                } else {
                    nn += s;
                }
            }
            let mut constraints = vec![
                c(format!("{var}=0 on Γ_D"), dn.sqrt()),
                c(format!("∂ₙ{var}=0 on Γ_N"), nn.sqrt()),
            ];
            if !kernel.is_empty() {
                constraints.push(c(format!("{var}⊥ℝ"), constant_component(z, &kernel)?));
            }
            Ok(StageMeasure {
                pde_residual: inner.sqrt(),
                constraints,
            })
        }
        LaplacianKind::Overdetermined => {
            let a = cat.over()?;
            let r = a.apply(&restrict(cat, 1, z)?)?.sub(g)?;
            let (outer, inner) = ring_norms(domain, &r);
            Ok(StageMeasure {
                pde_residual: inner,
                constraints: vec![
                    c(format!("{var}=0"), ring_norms(domain, z).0),
                    c(format!("∂ₙ{var}=0"), outer),
                ],
            })
        }
        LaplacianKind::Underdetermined => {
            let a = cat.over()?;
            let r = a.adjoint().apply(z)?.sub(&restrict(cat, 1, g)?)?;
            Ok(StageMeasure {
                pde_residual: r.norm(),
                constraints: vec![c(format!("{var}⊥ℍ"), harmonic_component(cat, z, cfg)?)],
            })
        }
    }
}

fn project_constants(g: &Field, kernel: &[Field]) -> Result<Field> {
    let mut out = g.clone();
    for k in kernel {
        let coef = out.dot(k)? / k.dot(k)?;
        out = out.add_scaled(-coef, k)?;
    }
    Ok(out)
}

/// `(G̊, G̊*)`: its best constant is the discrete Friedrichs constant.
pub fn friedrichs_pair(cat: &OperatorCatalog) -> Result<DualPair> {
    make_pair_with_kernel(cat.gradient_dirichlet().clone(), Vec::new())
}

/// `(G, G*)` with the component indicators as kernel: the Poincaré constant.
pub fn poincare_pair(cat: &OperatorCatalog) -> Result<DualPair> {
    make_pair_with_kernel(cat.gradient().clone(), cat.domain().component_indicators())
}

/// `(A, Aᵀ)` for the overdetermined Laplacian on `C1`.
pub fn over_pair(cat: &OperatorCatalog) -> Result<DualPair> {
    make_pair_with_kernel(cat.over()?.clone(), Vec::new())
}

/// Worst ratios of the chain `‖φ‖ ≤ c‖Gφ‖ ≤ c²‖Lφ‖` over random samples.
#[derive(Clone, Debug)]
pub struct ChainReport {
    pub kind: LaplacianKind,
    pub constant: f64,
    pub samples: usize,
    /// max `‖φ‖ / (c‖Gφ‖)`
    pub worst_first: f64,
    /// max `‖Gφ‖ / (c‖Lφ‖)`
    pub worst_second: f64,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.worst_first <= 1.0 + 1e-10 && self.worst_second <= 1.0 + 1e-10
    }
}

/// The two chain ratios for one `φ`; Neumann fields must have a nonzero
/// part outside the constants, which is what gets measured.
pub fn chain_ratios(kind: LaplacianKind, cat: &OperatorCatalog, c: f64, phi: &Field) -> Result<(f64, f64)> {
    let (g, l, phi) = match kind {
        LaplacianKind::Dirichlet => (cat.gradient_dirichlet(), cat.laplace_dirichlet(), phi.clone()),
        LaplacianKind::Neumann => {
            let p = project_constants(phi, &cat.domain().component_indicators())?;
            if p.norm() <= 1e-12 * phi.norm() || p.norm() == 0.0 {
                return Err(Error::InvalidArgument(
                    "field lies in the kernel of the Neumann Laplacian".into(),
                ));
            }
            (cat.gradient(), cat.laplace_neumann(), p)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "estimate chain is defined for the dirichlet and neumann kinds, not {}",
                other.as_str()
            )))
        }
    };
    let n0 = phi.norm();
    let n1 = g.apply(&phi)?.norm();
    let n2 = l.apply(&phi)?.norm();
    if n0 == 0.0 {
        return Err(Error::InvalidArgument("zero field".into()));
    }
    Ok((n0 / (c * n1), n1 / (c * n2)))
}

fn random_field(space: &std::sync::Arc<crate::grid::DofSpace>, rng: &mut ChaCha8Rng) -> Field {
    let v = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::new(space.clone(), v).expect("length matches")
}

/// Checks the Friedrichs (Dirichlet) or Poincaré (Neumann) chain on random fields.
pub fn estimate_chain_check(
    kind: LaplacianKind,
    cat: &OperatorCatalog,
    cfg: &SolverConfig,
    samples: usize,
    seed: u64,
) -> Result<ChainReport> {
    let constant = match kind {
        LaplacianKind::Dirichlet => friedrichs_pair(cat)?.best_constant(cfg)?,
        LaplacianKind::Neumann => poincare_pair(cat)?.best_constant(cfg)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "estimate chain is defined for the dirichlet and neumann kinds, not {}",
                other.as_str()
            )))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = cat.domain().cell_space();
    let (mut worst_first, mut worst_second) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let phi = random_field(&space, &mut rng);
        let (a, b) = chain_ratios(kind, cat, constant, &phi)?;
        worst_first = worst_first.max(a);
        worst_second = worst_second.max(b);
    }
    Ok(ChainReport {
        kind,
        constant,
        samples,
        worst_first,
        worst_second,
    })
}

/// Second-order estimates for `u` supported on `C1`.
#[derive(Clone, Debug)]
pub struct H2Report {
    /// Best constant of the `A`-pair.
    pub c_over: f64,
    /// Discrete Friedrichs constant.
    pub c_f: f64,
    /// max `‖u‖ / (c_over ‖Au‖)`
    pub worst_over: f64,
    /// max `‖u‖ / (c_f² ‖Au‖)`
    pub worst_friedrichs_squared: f64,
    /// max `(‖u‖² + ‖Gu‖²) / ((c_f² + c_f⁴) ‖Au‖²)`
    pub worst_h1: f64,
    /// max `(‖u‖² + ‖Gu‖² + ‖Hu‖²) / ((1 + c_f² + c_f⁴) ‖Au‖²)`; expected ≤ 2, not asserted.
    pub worst_full: f64,
    pub samples: usize,
}

impl H2Report {
    pub fn exact_bounds_hold(&self) -> bool {
        let ok = |x: f64| x <= 1.0 + 1e-10;
        ok(self.worst_over) && ok(self.worst_friedrichs_squared) && ok(self.worst_h1)
    }

    pub fn full_within_slack(&self) -> bool {
        self.worst_full <= 2.0
    }
}

pub fn h2_estimate_check(cat: &OperatorCatalog, cfg: &SolverConfig, samples: usize, seed: u64) -> Result<H2Report> {
    let c_over = over_pair(cat)?.best_constant(cfg)?;
    let c_f = friedrichs_pair(cat)?.best_constant(cfg)?;
    let a = cat.over()?;
    let pad = cat.pad(1)?;
    let hess = cat.hessian()?;
    let g = cat.gradient();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = H2Report {
        c_over,
        c_f,
        worst_over: 0.0,
        worst_friedrichs_squared: 0.0,
        worst_h1: 0.0,
        worst_full: 0.0,
        samples,
    };
    for _ in 0..samples {
        let u = random_field(a.domain(), &mut rng);
        let full = pad.apply(&u)?;
        let n0 = u.norm();
        let na = a.apply(&u)?.norm();
        let ng = g.apply(&full)?.norm();
        let nh = hess.apply(&full)?.norm();
        let (c2, c4) = (c_f * c_f, c_f.powi(4));
        report.worst_over = report.worst_over.max(n0 / (c_over * na));
        report.worst_friedrichs_squared = report.worst_friedrichs_squared.max(n0 / (c2 * na));
        report.worst_h1 = report.worst_h1.max((n0 * n0 + ng * ng) / ((c2 + c4) * na * na));
        report.worst_full = report
            .worst_full
            .max((n0 * n0 + ng * ng + nh * nh) / ((1.0 + c2 + c4) * na * na));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridDomain, LabelRule, Shape};
    use crate::linalg::dense;
    use crate::linalg::smallest_eigenpairs;
    use nalgebra::DVector;
    use std::sync::Arc;

    fn cat(shape: Shape, n: usize, rules: &[LabelRule]) -> OperatorCatalog {
        OperatorCatalog::new(Arc::new(GridDomain::build(&shape, n, rules).unwrap())).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn zero_data_gives_zero() {
        let c = cat(Shape::Square, 8, &[]);
        let f = Field::zeros(c.domain().cell_space());
        for kind in [
            LaplacianKind::Dirichlet,
            LaplacianKind::Neumann,
            LaplacianKind::Overdetermined,
            LaplacianKind::Underdetermined,
            LaplacianKind::Mixed,
        ] {
            let r = solve_laplace(kind, &c, &f, &cfg()).unwrap();
            assert_eq!(r.solution.max_abs(), 0.0, "{kind:?}");
            assert!(r.constraint_norms.iter().all(|(_, v)| *v == 0.0));
        }
    }

    #[test]
    fn membrane_peak() {
        let c = cat(Shape::Square, 64, &[]);
        let f = Field::constant(c.domain().cell_space(), 1.0);
        let r = solve_laplace(LaplacianKind::Dirichlet, &c, &f, &cfg()).unwrap();
        assert!((r.solution.max_abs() - 0.07367).abs() < 1e-3, "{}", r.solution.max_abs());
        assert!(r.pde_residual_norm < 1e-8 * f.norm());
    }

    #[test]
    fn neumann_rejects_constants() {
        let c = cat(Shape::Square, 8, &[]);
        let f = Field::constant(c.domain().cell_space(), 1.0);
        match solve_laplace(LaplacianKind::Neumann, &c, &f, &cfg()) {
            Err(Error::Compatibility { subspace, .. }) => assert!(subspace.contains('ℝ')),
            other => panic!("expected compatibility error, got {other:?}"),
        }
    }

    #[test]
    fn neumann_mean_free_data() {
        let c = cat(Shape::LShape, 12, &[]);
        let d = c.domain();
        let raw = d.sample(|x, _| x);
        let mean = raw.dot(&Field::constant(d.cell_space(), 1.0)).unwrap() / (d.num_cells() as f64 * d.h() * d.h());
        let f = raw.add_scaled(-mean, &Field::constant(d.cell_space(), 1.0)).unwrap();
        let r = solve_laplace(LaplacianKind::Neumann, &c, &f, &cfg()).unwrap();
        assert!(r.pde_residual_norm < 1e-8 * f.norm());
        for (name, v) in &r.constraint_norms {
            assert!(*v < 1e-8 * f.norm(), "{name} = {v}");
        }
        // reading back gives π f only
        let back = c.laplace_neumann().apply(&r.solution).unwrap();
        assert!(back.sub(&f).unwrap().norm() < 1e-8 * f.norm());
    }

    #[test]
    fn mixed_without_dirichlet_is_neumann() {
        let c = cat(Shape::Square, 8, &[LabelRule::All(Bc::Neumann)]);
        let f = Field::constant(c.domain().cell_space(), 1.0);
        assert!(matches!(
            solve_laplace(LaplacianKind::Mixed, &c, &f, &cfg()),
            Err(Error::Compatibility { .. })
        ));
    }

    #[test]
    fn mixed_all_dirichlet_is_dirichlet() {
        let c = cat(Shape::Square, 8, &[LabelRule::All(Bc::Dirichlet)]);
        let d = c.domain();
        let f = d.sample(|x, y| (3.0 * x).sin() + y);
        let a = solve_laplace(LaplacianKind::Mixed, &c, &f, &cfg()).unwrap();
        let b = solve_laplace(LaplacianKind::Dirichlet, &c, &f, &cfg()).unwrap();
        assert!(a.solution.sub(&b.solution).unwrap().norm() < 1e-9 * b.solution.norm());
        assert_eq!(c.laplace_mixed().to_dense(), c.laplace_dirichlet().to_dense());
    }

    #[test]
    fn mixed_constraints_split_by_label() {
        let c = cat(Shape::Square, 10, &[LabelRule::Side(crate::grid::Dir::MinusX, Bc::Dirichlet)]);
        let f = c.domain().sample(|x, y| x * y + 1.0);
        let r = solve_laplace(LaplacianKind::Mixed, &c, &f, &cfg()).unwrap();
        assert_eq!(r.constraint_norms.len(), 2);
        assert!(r.pde_residual_norm < 1e-8 * f.norm());
    }

    #[test]
    fn overdetermined_roundtrip_and_rejection() {
        let c = cat(Shape::Square, 8, &[]);
        let a = c.over().unwrap();
        let x = Field::new(a.domain().clone(), (0..a.ncols()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect()).unwrap();
        let f = a.apply(&x).unwrap();
        let r = solve_laplace(LaplacianKind::Overdetermined, &c, &f, &cfg()).unwrap();
        let back = restrict(&c, 1, &r.solution).unwrap();
        assert!(back.sub(&x).unwrap().norm() < 1e-8 * x.norm());
        assert!(r.constraint_norms.iter().all(|(_, v)| *v < 1e-8 * f.norm()));
        let one = Field::constant(c.domain().cell_space(), 1.0);
        assert!(matches!(
            solve_laplace(LaplacianKind::Overdetermined, &c, &one, &cfg()),
            Err(Error::Compatibility { .. })
        ));
    }

    #[test]
    fn underdetermined_matches_dense_min_norm() {
        let c = cat(Shape::Square, 8, &[]);
        let d = c.domain();
        let a = c.over().unwrap();
        let x0 = Field::new(a.domain().clone(), (0..a.ncols()).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        // A x0 with arbitrary ring-0 values
        let mut f = a.apply(&x0).unwrap();
        for cell in 0..d.num_cells() {
            if d.depth(cell) == 0 {
                f.values_mut()[cell] = (cell as f64).cos() * 5.0;
            }
        }
        let r = solve_laplace(LaplacianKind::Underdetermined, &c, &f, &cfg()).unwrap();
        // dense oracle: minimal weighted-norm u with Aᵀ u = f|C1; weights are uniform
        let at = a.adjoint().to_dense();
        let rhs = DVector::from_vec(restrict(&c, 1, &f).unwrap().into_values());
        let oracle = dense::pinv(&at) * rhs;
        let got = DVector::from_vec(r.solution.values().to_vec());
        assert!((got - &oracle).norm() < 1e-8 * oracle.norm());
        assert!(r.pde_residual_norm < 1e-8 * f.norm());
        assert!(r.constraint_norms[0].1 < 1e-9 * f.norm());
        assert!(r.discarded_ring_mass > 0.0);
    }

    #[test]
    fn empty_inner_ring_is_rejected() {
        let c = cat(Shape::Square, 2, &[]);
        let f = Field::constant(c.domain().cell_space(), 1.0);
        assert!(matches!(
            solve_laplace(LaplacianKind::Underdetermined, &c, &f, &cfg()),
            Err(Error::EmptyDomain(_))
        ));
    }

    #[test]
    fn chain_tight_on_ground_state() {
        let c = cat(Shape::Square, 12, &[]);
        let p = friedrichs_pair(&c).unwrap();
        let k = p.best_constant(&cfg()).unwrap();
        let ground = smallest_eigenpairs(c.laplace_dirichlet(), 1, &[], &cfg()).unwrap();
        let (a, b) = chain_ratios(LaplacianKind::Dirichlet, &c, k, &ground[0].vector).unwrap();
        assert!((a - 1.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn chains_hold_on_random_fields() {
        let c = cat(Shape::LShape, 12, &[]);
        for kind in [LaplacianKind::Dirichlet, LaplacianKind::Neumann] {
            let r = estimate_chain_check(kind, &c, &cfg(), 20, 3).unwrap();
            assert!(r.holds(), "{r:?}");
        }
    }

    #[test]
    fn neumann_chain_rejects_constants() {
        let c = cat(Shape::Square, 6, &[]);
        let one = Field::constant(c.domain().cell_space(), 1.0);
        assert!(chain_ratios(LaplacianKind::Neumann, &c, 1.0, &one).is_err());
    }

    #[test]
    fn second_order_estimates() {
        let c = cat(Shape::Square, 12, &[]);
        let r = h2_estimate_check(&c, &cfg(), 20, 11).unwrap();
        assert!(r.exact_bounds_hold(), "{r:?}");
        assert!(r.c_over <= r.c_f * r.c_f * (1.0 + 1e-10));
    }
}
