//! Biharmonic problems built from two Laplacian realizations.
//!
//! A composition `B = 𝓛_a 𝓛_b` is inverted as `u = 𝓛_b⁻¹ 𝓛_a⁻¹ f`. It is
//! well-posed when the range of `𝓛_a⁻¹` lies in the data class of `𝓛_b⁻¹`:
//! `𝓛̊⁻¹` needs data `⊥ ℍ` and `𝓛_N⁻¹` needs data `⊥ ℝ`.
//!
//! Symbols: `𝓛̊` overdetermined (`circ`), `𝓛` underdetermined (`dot`),
//! `𝓛_D`, `𝓛_N`.

use crate::error::{Error, Result};
use crate::grid::{Field, GridDomain};
use crate::laplace::{apply_inverse, friedrichs_pair, measure, restrict, InverseApplication, LaplacianKind};
use crate::linalg::dense::{self, DENSE_LIMIT};
use crate::linalg::{cg_solve, deflated_cg_solve, normal_cg_solve, NormalSide, SolverConfig, SparseOperator};
use crate::operators::OperatorCatalog;
use crate::toolbox::{make_pair_with_kernel, DualPair};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use LaplacianKind::{Dirichlet as D, Neumann as N, Overdetermined as Over, Underdetermined as Under};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ZooProblem {
    /// `B = 𝓛_outer 𝓛_inner`; `inner` acts on `u` directly.
    Composition { outer: LaplacianKind, inner: LaplacianKind },
    /// `A_B : C2 → C0`, solved by least squares.
    Overdetermined,
    /// `pad A_Bᵀ`, solved with minimal norm.
    Underdetermined,
    /// `(A Aᵀ + 1) u = f`.
    Regularized,
    /// `HᵀH` with natural boundary conditions, kernel `P₁`.
    HessianNeumann,
    /// `H_0ᵀH_0` with `H_0` the Hessian of the zero extension of `C1` fields.
    HessianDirichlet,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    WellPosed,
    Forbidden(String),
}

/// One row of [`classify_zoo`].
#[derive(Clone, Debug)]
pub struct ZooRow {
    pub problem: ZooProblem,
    pub label: String,
    pub item: Option<&'static str>,
    pub composition: String,
    pub data_class: &'static str,
    pub constraints: Vec<String>,
    pub status: Status,
    /// Label of the problem whose inverse matrix is the transpose of this one.
    pub adjoint_partner: String,
}

const WELL_POSED: [(LaplacianKind, LaplacianKind, &str); 11] = [
    (Under, Over, "i"),
    (Over, Under, "ii"),
    (Under, Under, "iii"),
    (D, Under, "iv"),
    (N, Under, "v"),
    (Under, N, "vi"),
    (N, N, "vii"),
    (Over, D, "viii"),
    (Under, D, "ix"),
    (D, D, "x"),
    (N, D, "xi"),
];

const FORBIDDEN: [(LaplacianKind, LaplacianKind); 5] = [(Over, Over), (D, Over), (N, Over), (Over, N), (D, N)];

fn code(k: LaplacianKind) -> &'static str {
    match k {
        Over => "circ",
        Under => "dot",
        D => "D",
        N => "N",
        LaplacianKind::Mixed => "mixed",
    }
}

fn symbol(k: LaplacianKind) -> &'static str {
    match k {
        Over => "𝓛̊",
        Under => "𝓛",
        D => "𝓛_D",
        N => "𝓛_N",
        LaplacianKind::Mixed => "𝓛_mixed",
    }
}

fn range_name(k: LaplacianKind) -> &'static str {
    match k {
        Over => "H̊²",
        Under => "ℍ^⊥",
        D => "D(Δ_D)",
        N => "D(Δ_N) ∩ ℝ^⊥",
        LaplacianKind::Mixed => "D(Δ_mixed)",
    }
}

fn star(k: LaplacianKind) -> LaplacianKind {
    match k {
        Over => Under,
        Under => Over,
        other => other,
    }
}

fn is_zoo_kind(k: LaplacianKind) -> bool {
    matches!(k, Over | Under | D | N)
}

/// Why `𝓛_outer 𝓛_inner` cannot be inverted, if it cannot.
fn forbidden_reason(outer: LaplacianKind, inner: LaplacianKind) -> Option<String> {
    let needs = match inner {
        Over => "⊥ ℍ",
        N => "⊥ ℝ",
        _ => return None,
    };
    let ok = match inner {
        Over => outer == Under,
        _ => matches!(outer, Under | N),
    };
    (!ok).then(|| {
        format!(
            "range of {}⁻¹ is {} and not {needs} as {}⁻¹ requires",
            symbol(outer),
            range_name(outer),
            symbol(inner)
        )
    })
}

impl ZooProblem {
    /// The 18 classified problems: 13 well-posed, then 5 forbidden.
    pub fn classified() -> Vec<ZooProblem> {
        let mut out: Vec<ZooProblem> = WELL_POSED
            .iter()
            .map(|&(outer, inner, _)| ZooProblem::Composition { outer, inner })
            .collect();
        out.push(ZooProblem::Overdetermined);
        out.push(ZooProblem::Underdetermined);
        out.extend(FORBIDDEN.iter().map(|&(outer, inner)| ZooProblem::Composition { outer, inner }));
        out
    }

    /// Everything `solve` accepts by name.
    pub fn all() -> Vec<ZooProblem> {
        let mut out = ZooProblem::classified();
        out.extend([ZooProblem::Regularized, ZooProblem::HessianNeumann, ZooProblem::HessianDirichlet]);
        out
    }

    pub fn label(&self) -> String {
        match *self {
            ZooProblem::Composition { outer, inner } => {
                if forbidden_reason(outer, inner).is_some() {
                    let c = |k: LaplacianKind| if k == Over { "c" } else { code(k) };
                    format!("L{}L{}", c(outer), c(inner))
                } else if matches!(outer, D | N) && matches!(inner, D | N) {
                    format!("B_{}{}", code(outer), code(inner))
                } else {
                    format!("B_{}_{}", code(outer), code(inner))
                }
            }
            ZooProblem::Overdetermined => "B_over".into(),
            ZooProblem::Underdetermined => "B_under".into(),
            ZooProblem::Regularized => "Regularized".into(),
            ZooProblem::HessianNeumann => "HessianNeumann".into(),
            ZooProblem::HessianDirichlet => "HessianDirichlet".into(),
        }
    }

    pub fn item(&self) -> Option<&'static str> {
        match *self {
            ZooProblem::Composition { outer, inner } => WELL_POSED
                .iter()
                .find(|(o, i, _)| *o == outer && *i == inner)
                .map(|(_, _, r)| *r),
            ZooProblem::Overdetermined => Some("xii"),
            ZooProblem::Underdetermined => Some("xiii"),
            _ => None,
        }
    }

    /// Common name of the boundary value problem, where it has one.
    pub fn common_name(&self) -> Option<&'static str> {
        match *self {
            ZooProblem::Composition { outer: Under, inner: Over } => Some("dirichlet"),
            ZooProblem::Composition { outer: Over, inner: Under } => Some("neumann"),
            ZooProblem::Composition { outer: D, inner: D } => Some("navier"),
            ZooProblem::Composition { outer: N, inner: N } => Some("riquier"),
            ZooProblem::Overdetermined => Some("overdetermined"),
            ZooProblem::Underdetermined => Some("underdetermined"),
            ZooProblem::Regularized => Some("regularized"),
            ZooProblem::HessianNeumann => Some("hessian_neumann"),
            ZooProblem::HessianDirichlet => Some("hessian_dirichlet"),
            _ => None,
        }
    }

    /// Accepts labels (any case), common names, item numerals, and
    /// `outer_inner` pairs of the codes `circ|c`, `dot|u`, `d`, `n`.
    pub fn parse(s: &str) -> Result<ZooProblem> {
        let key = s.trim().to_lowercase();
        for p in ZooProblem::all() {
            if p.label().to_lowercase() == key || p.common_name() == Some(key.as_str()) || p.item() == Some(key.as_str()) {
                return Ok(p);
            }
        }
        let kind = |t: &str| match t {
            "circ" | "c" => Some(Over),
            "dot" | "u" => Some(Under),
            "d" => Some(D),
            "n" => Some(N),
            _ => None,
        };
        let body = key.strip_prefix("b_").unwrap_or(&key);
        let parts: Vec<&str> = body.split('_').collect();
        if let [a, b] = parts.as_slice() {
            if let (Some(outer), Some(inner)) = (kind(a), kind(b)) {
                return Ok(ZooProblem::Composition { outer, inner });
            }
        }
        Err(Error::InvalidArgument(format!("unknown problem '{s}'")))
    }

    pub fn composition(&self) -> String {
        match *self {
            ZooProblem::Composition { outer, inner } => format!("{}{}", symbol(outer), symbol(inner)),
            ZooProblem::Overdetermined => "A_B".into(),
            ZooProblem::Underdetermined => "pad A_Bᵀ".into(),
            ZooProblem::Regularized => "AAᵀ + 1".into(),
            ZooProblem::HessianNeumann => "HᵀH".into(),
            ZooProblem::HessianDirichlet => "H_0ᵀH_0".into(),
        }
    }

    pub fn status(&self) -> Status {
        match *self {
            ZooProblem::Composition { outer, inner } => match forbidden_reason(outer, inner) {
                Some(r) => Status::Forbidden(r),
                None => Status::WellPosed,
            },
            _ => Status::WellPosed,
        }
    }

    /// Data class: `L²`, `L̂²` (⊥ℝ), `L̃²` (⊥ℍ) or `L̆²` (⊥𝔹ℍ).
    pub fn data_class(&self) -> &'static str {
        match *self {
            ZooProblem::Composition { outer: Over, .. } => "L̃² (⊥ℍ)",
            ZooProblem::Composition { outer: N, .. } => "L̂² (⊥ℝ)",
            ZooProblem::Overdetermined => "L̆² (⊥𝔹ℍ)",
            ZooProblem::HessianNeumann => "⊥P₁",
            _ => "L²",
        }
    }

    /// Boundary and orthogonality conditions of the classical formulation.
    pub fn constraints(&self) -> Vec<String> {
        match *self {
            ZooProblem::Composition { outer, inner } => {
                let bcs = |k: LaplacianKind, v: &str| -> Vec<String> {
                    match k {
                        Over => vec![format!("{v}=0"), format!("∂ₙ{v}=0")],
                        D => vec![format!("{v}=0")],
                        N => vec![format!("∂ₙ{v}=0")],
                        _ => vec![],
                    }
                };
                let orth = |k: LaplacianKind, v: &str| -> Vec<String> {
                    match k {
                        N => vec![format!("{v}⊥ℝ")],
                        Under => vec![format!("{v}⊥ℍ")],
                        _ => vec![],
                    }
                };
                let mut out = bcs(inner, "u");
                out.extend(bcs(outer, "Δu"));
                out.extend(orth(inner, "u"));
                out.extend(orth(outer, "Δu"));
                out
            }
            ZooProblem::Overdetermined => ["u=0", "∂ₙu=0", "Δu=0", "∂ₙΔu=0"].map(String::from).to_vec(),
            ZooProblem::Underdetermined => vec!["u⊥𝔹ℍ".into()],
            ZooProblem::Regularized => vec![],
            ZooProblem::HessianNeumann => vec!["natural".into(), "u⊥P₁".into()],
            // support in C1 encodes both clamped conditions at once
            ZooProblem::HessianDirichlet => vec!["u=∂ₙu=0".into()],
        }
    }

    /// Problem whose inverse is the transpose of this one's: `(a, b) ↦ (b*, a*)`
    /// with `𝓛̊* = 𝓛` and the Dirichlet and Neumann Laplacians selfadjoint.
    pub fn adjoint_partner(&self) -> ZooProblem {
        match *self {
            ZooProblem::Composition { outer, inner } => ZooProblem::Composition {
                outer: star(inner),
                inner: star(outer),
            },
            ZooProblem::Overdetermined => ZooProblem::Underdetermined,
            ZooProblem::Underdetermined => ZooProblem::Overdetermined,
            other => other,
        }
    }
}

/// The 18-row classification table.
pub fn classify_zoo() -> Vec<ZooRow> {
    ZooProblem::classified()
        .into_iter()
        .map(|p| ZooRow {
            problem: p,
            label: p.label(),
            item: p.item(),
            composition: p.composition(),
            data_class: p.data_class(),
            constraints: p.constraints(),
            status: p.status(),
            adjoint_partner: p.adjoint_partner().label(),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BiharmonicSolveReport {
    pub problem: ZooProblem,
    pub solution: Field,
    /// `Δu` of the intermediate stage.
    pub intermediate: Field,
    /// `‖Δ²_h u − f‖` over `C2`, where the 13-point stencil applies.
    pub pde_residual: f64,
    pub constraint_norms: Vec<(String, f64)>,
    /// Stage residuals, transfer losses and problem-specific diagnostics.
    pub residuals: Vec<(String, f64)>,
    pub compatibility_defect: f64,
    pub rhs_norm: f64,
    pub iterations: usize,
}

/// Stage solves use the caller's tolerance; deflation is set per stage.
fn stage_config(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        deflation_basis: Vec::new(),
        ..cfg.clone()
    }
}

/// `‖A_Bᵀ u − f|C2‖`.
fn biharmonic_residual(cat: &OperatorCatalog, u: &Field, f: &Field) -> Result<f64> {
    let ab = cat.over_biharmonic()?;
    Ok(ab.adjoint().apply(u)?.sub(&restrict(cat, 2, f)?)?.norm())
}

/// Solves any named problem; forbidden compositions are rejected.
pub fn solve_zoo(problem: ZooProblem, cat: &OperatorCatalog, f: &Field, cfg: &SolverConfig) -> Result<BiharmonicSolveReport> {
    cfg.validate()?;
    cat.domain().cell_space().ensure_same(f.space())?;
    match problem {
        ZooProblem::Composition { outer, inner } => solve_composition(outer, inner, cat, f, cfg),
        ZooProblem::Overdetermined => solve_over(cat, f, cfg),
        ZooProblem::Underdetermined => solve_under(cat, f, cfg),
        ZooProblem::Regularized => solve_regularized(cat, f, cfg).map(|r| r.into_report(cat, f)),
        ZooProblem::HessianNeumann => solve_hessian(HessianKind::Neumann, cat, f, cfg).map(|r| r.into_report(cat, f)),
        ZooProblem::HessianDirichlet => {
            solve_hessian(HessianKind::Dirichlet, cat, f, cfg).map(|r| r.into_report(cat, f))
        }
    }?
    .finish(cat, f)
}

impl BiharmonicSolveReport {
    fn finish(mut self, cat: &OperatorCatalog, f: &Field) -> Result<BiharmonicSolveReport> {
        self.rhs_norm = f.norm();
        if self.pde_residual.is_nan() {
            self.pde_residual = biharmonic_residual(cat, &self.solution, f)?;
        }
        Ok(self)
    }
}

fn ensure_zoo_kinds(outer: LaplacianKind, inner: LaplacianKind) -> Result<()> {
    if is_zoo_kind(outer) && is_zoo_kind(inner) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("the mixed Laplacian is not part of the zoo".into()))
    }
}

fn solve_composition(
    outer: LaplacianKind,
    inner: LaplacianKind,
    cat: &OperatorCatalog,
    f: &Field,
    cfg: &SolverConfig,
) -> Result<BiharmonicSolveReport> {
    ensure_zoo_kinds(outer, inner)?;
    let problem = ZooProblem::Composition { outer, inner };
    if let Some(reason) = forbidden_reason(outer, inner) {
        return Err(Error::ForbiddenComposition {
            label: problem.label(),
            reason,
        });
    }
    let scfg = stage_config(cfg);
    let w = apply_inverse(outer, cat, f, &scfg)?;
    let u = apply_inverse(inner, cat, &w.field, &scfg)?;
    let mw = measure(outer, cat, &w.field, f, "Δu", cfg)?;
    let mu = measure(inner, cat, &u.field, &w.field, "u", cfg)?;
    let orth = |(name, _): &(String, f64)| name.contains('⊥');
    let mut constraint_norms: Vec<(String, f64)> = mu.constraints.iter().filter(|c| !orth(c)).cloned().collect();
    constraint_norms.extend(mw.constraints.iter().filter(|c| !orth(c)).cloned());
    constraint_norms.extend(mu.constraints.iter().filter(|c| orth(c)).cloned());
    constraint_norms.extend(mw.constraints.iter().filter(|c| orth(c)).cloned());
    let mut residuals = vec![
        ("stage_Δu".to_string(), mw.pde_residual),
        ("stage_u".to_string(), mu.pde_residual),
        ("stage_u_compatibility".to_string(), u.compatibility_defect),
    ];
    for (name, stage) in [("Δu", &w), ("u", &u)] {
        if stage.discarded_ring_mass > 0.0 {
            residuals.push((format!("discarded_ring_mass_{name}"), stage.discarded_ring_mass));
        }
    }
    let pde_residual = biharmonic_residual(cat, &u.field, f)?;
    Ok(BiharmonicSolveReport {
        problem,
        intermediate: w.field.scaled(-1.0),
        solution: u.field,
        pde_residual,
        constraint_norms,
        residuals,
        compatibility_defect: w.compatibility_defect,
        rhs_norm: f.norm(),
        iterations: w.iterations + u.iterations,
    })
}

/// Per-depth norms of a `C0` field: `[depth 0, depth 1, depth ≥ 2]`.
fn depth_norms(domain: &GridDomain, v: &Field) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for (c, (x, w)) in v.values().iter().zip(v.space().weights()).enumerate() {
        acc[domain.depth(c).min(2)] += w * x * x;
    }
    acc.map(f64::sqrt)
}

fn solve_over(cat: &OperatorCatalog, f: &Field, cfg: &SolverConfig) -> Result<BiharmonicSolveReport> {
    let ab = cat.over_biharmonic()?;
    let s = normal_cg_solve(ab, f, NormalSide::LeastSquares, &stage_config(cfg))?;
    if s.compatibility_defect > cfg.compat_tolerance {
        return Err(Error::Compatibility {
            subspace: "⊥𝔹ℍ (range of A_B)".into(),
            defect: s.compatibility_defect,
            tolerance: cfg.compat_tolerance,
        });
    }
    let u = cat.pad(2)?.apply(&s.field)?;
    let domain = cat.domain();
    let r = ab.apply(&s.field)?.sub(f)?;
    let [r0, r1, _] = depth_norms(domain, &r);
    let [u0, u1, _] = depth_norms(domain, &u);
    let intermediate = cat.laplace_dirichlet().apply(&u)?.scaled(-1.0);
    Ok(BiharmonicSolveReport {
        problem: ZooProblem::Overdetermined,
        solution: u.clone(),
        intermediate,
        pde_residual: biharmonic_residual(cat, &u, f)?,
        constraint_norms: vec![
            ("u=0".into(), u0),
            ("∂ₙu=0".into(), u1),
            ("Δu=0".into(), r0),
            ("∂ₙΔu=0".into(), r1),
        ],
        residuals: vec![],
        compatibility_defect: s.compatibility_defect,
        rhs_norm: f.norm(),
        iterations: s.iterations,
    })
}

/// `‖(1 − π_{A_B}) v‖`: the part of `v` in `𝔹ℍ`.
pub fn biharmonic_component(cat: &OperatorCatalog, v: &Field, cfg: &SolverConfig) -> Result<f64> {
    if v.norm() == 0.0 {
        return Ok(0.0);
    }
    let s = normal_cg_solve(cat.over_biharmonic()?, v, NormalSide::LeastSquares, &stage_config(cfg))?;
    Ok(s.compatibility_defect * v.norm())
}

fn solve_under(cat: &OperatorCatalog, f: &Field, cfg: &SolverConfig) -> Result<BiharmonicSolveReport> {
    let ab = cat.over_biharmonic()?;
    let inner = restrict(cat, 2, f)?;
    let s = normal_cg_solve(ab, &inner, NormalSide::MinNorm, &stage_config(cfg))?;
    let u = s.field;
    let [d0, d1, _] = depth_norms(cat.domain(), f);
    let lap = cat.over()?.adjoint().apply(&u)?;
    let intermediate = cat.pad(1)?.apply(&lap)?.scaled(-1.0);
    Ok(BiharmonicSolveReport {
        problem: ZooProblem::Underdetermined,
        intermediate,
        pde_residual: biharmonic_residual(cat, &u, f)?,
        constraint_norms: vec![("u⊥𝔹ℍ".into(), biharmonic_component(cat, &u, cfg)?)],
        residuals: vec![("discarded_ring_mass".into(), d0.hypot(d1))],
        solution: u,
        compatibility_defect: 0.0,
        rhs_norm: f.norm(),
        iterations: s.iterations,
    })
}

/// Solution of `(LᵀL + 1) u = f` with `L = Aᵀ`.
#[derive(Clone, Debug)]
pub struct RegularizedReport {
    pub solution: Field,
    pub residual: f64,
    /// `√(‖u‖² + ‖Lu‖²)`
    pub h_delta_norm: f64,
    pub rhs_norm: f64,
    /// `‖u‖² + ‖Lu‖² ≤ ‖f‖²`
    pub bound_ok: bool,
    pub iterations: usize,
}

impl RegularizedReport {
    fn into_report(self, cat: &OperatorCatalog, f: &Field) -> BiharmonicSolveReport {
        let intermediate = cat
            .over()
            .and_then(|a| cat.pad(1)?.apply(&a.adjoint().apply(&self.solution)?))
            .map(|x| x.scaled(-1.0))
            .unwrap_or_else(|_| Field::zeros(f.space().clone()));
        BiharmonicSolveReport {
            problem: ZooProblem::Regularized,
            intermediate,
            pde_residual: f64::NAN,
            constraint_norms: vec![],
            residuals: vec![
                ("equation".into(), self.residual),
                ("h_delta_norm".into(), self.h_delta_norm),
                ("bound_slack".into(), self.rhs_norm - self.h_delta_norm),
            ],
            solution: self.solution,
            compatibility_defect: 0.0,
            rhs_norm: self.rhs_norm,
            iterations: self.iterations,
        }
    }
}

/// `A Aᵀ + 1` on `C0`.
pub fn regularized_operator(cat: &OperatorCatalog) -> Result<SparseOperator> {
    let a = cat.over()?;
    let space = cat.domain().cell_space();
    Ok(a.compose(&a.adjoint())?
        .combine(1.0, &SparseOperator::identity(space), 1.0)?
        .with_name("AAᵀ+1"))
}

pub fn solve_regularized(cat: &OperatorCatalog, f: &Field, cfg: &SolverConfig) -> Result<RegularizedReport> {
    let m = regularized_operator(cat)?;
    let s = cg_solve(&m, f, &stage_config(cfg))?;
    let u = s.field;
    let residual = m.apply(&u)?.sub(f)?.norm();
    let lu = cat.over()?.adjoint().apply(&u)?.norm();
    let h_delta_norm = u.norm().hypot(lu);
    let rhs_norm = f.norm();
    Ok(RegularizedReport {
        bound_ok: h_delta_norm <= rhs_norm * (1.0 + 1e-12),
        solution: u,
        residual,
        h_delta_norm,
        rhs_norm,
        iterations: s.iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianKind {
    Neumann,
    Dirichlet,
}

#[derive(Clone, Debug)]
pub struct HessianReport {
    pub kind: HessianKind,
    pub solution: Field,
    pub residual: f64,
    /// Neumann: largest `|⟨u, p⟩|/‖p‖` over `P₁`.
    pub kernel_component: f64,
    /// Dirichlet: `‖u − u_D‖` against the clamped solution of the same data.
    pub difference_from_clamped: Option<f64>,
    pub compatibility_defect: f64,
    pub iterations: usize,
}

impl HessianReport {
    fn into_report(self, cat: &OperatorCatalog, f: &Field) -> BiharmonicSolveReport {
        let intermediate = cat
            .laplace_neumann()
            .apply(&self.solution)
            .map(|x| x.scaled(-1.0))
            .unwrap_or_else(|_| Field::zeros(f.space().clone()));
        let (problem, constraint_norms) = match self.kind {
            HessianKind::Neumann => (
                ZooProblem::HessianNeumann,
                vec![("natural".into(), self.residual), ("u⊥P₁".into(), self.kernel_component)],
            ),
            HessianKind::Dirichlet => {
                let [u0, _, _] = depth_norms(cat.domain(), &self.solution);
                (ZooProblem::HessianDirichlet, vec![("u=∂ₙu=0".into(), u0)])
            }
        };
        let mut residuals = vec![("equation".into(), self.residual)];
        if let Some(d) = self.difference_from_clamped {
            residuals.push(("difference_from_clamped".into(), d));
        }
        BiharmonicSolveReport {
            problem,
            intermediate,
            pde_residual: f64::NAN,
            constraint_norms,
            residuals,
            solution: self.solution,
            compatibility_defect: self.compatibility_defect,
            rhs_norm: f.norm(),
            iterations: self.iterations,
        }
    }
}

/// `1, x, y` on each component: the kernel of the Hessian.
pub fn affine_fields(domain: &GridDomain) -> Vec<Field> {
    let mut out = Vec::new();
    for ind in domain.component_indicators() {
        let x = domain.sample(|x, _| x);
        let y = domain.sample(|_, y| y);
        for g in [None, Some(&x), Some(&y)] {
            let mut v = ind.clone();
            if let Some(g) = g {
                v.values_mut().iter_mut().zip(g.values()).for_each(|(a, b)| *a *= b);
            }
            out.push(v);
        }
    }
    out
}

/// `(H, Hᵀ)` with `P₁` as kernel.
pub fn hessian_pair(cat: &OperatorCatalog) -> Result<DualPair> {
    make_pair_with_kernel(cat.hessian()?.clone(), affine_fields(cat.domain()))
}

/// `(A_B, A_Bᵀ)`.
pub fn over_biharmonic_pair(cat: &OperatorCatalog) -> Result<DualPair> {
    make_pair_with_kernel(cat.over_biharmonic()?.clone(), Vec::new())
}

pub fn solve_hessian(kind: HessianKind, cat: &OperatorCatalog, f: &Field, cfg: &SolverConfig) -> Result<HessianReport> {
    let scfg = stage_config(cfg);
    match kind {
        HessianKind::Neumann => {
            let hess = cat.hessian()?;
            let m = hess.adjoint().compose(hess)?.with_name("HᵀH");
            let kernel = affine_fields(cat.domain());
            let s = deflated_cg_solve(&m, f, &kernel, &scfg).map_err(|e| match e {
                Error::Compatibility { defect, .. } => Error::Compatibility {
                    subspace: "⊥P₁ (affine functions)".into(),
                    defect,
                    tolerance: cfg.compat_tolerance,
                },
                other => other,
            })?;
            let w = f.space().weights();
            let basis = crate::linalg::orthonormalize(&kernel.iter().map(|k| k.values().to_vec()).collect::<Vec<_>>(), w);
            let mut pf = f.values().to_vec();
            crate::linalg::krylov::project_out(&mut pf, &basis, w);
            let target = Field::new(f.space().clone(), pf)?;
            let residual = m.apply(&s.field)?.sub(&target)?.norm();
            let kernel_component = basis
                .iter()
                .map(|b| f.space().dot(s.field.values(), b).abs())
                .fold(0.0, f64::max);
            Ok(HessianReport {
                kind,
                solution: s.field,
                residual,
                kernel_component,
                difference_from_clamped: None,
                compatibility_defect: s.compatibility_defect,
                iterations: s.iterations,
            })
        }
        HessianKind::Dirichlet => {
            let pad = cat.pad(1)?;
            let hp = cat.hessian_clamped()?;
            let m = hp.adjoint().compose(hp)?.with_name("H_0ᵀH_0");
            let rhs = restrict(cat, 1, f)?;
            let s = cg_solve(&m, &rhs, &scfg)?;
            let residual = m.apply(&s.field)?.sub(&rhs)?.norm();
            let u = pad.apply(&s.field)?;
            let clamped = solve_composition(Under, Over, cat, f, cfg)?;
            let difference = u.sub(&clamped.solution)?.norm();
            Ok(HessianReport {
                kind,
                solution: u,
                residual,
                kernel_component: 0.0,
                difference_from_clamped: Some(difference),
                compatibility_defect: 0.0,
                iterations: s.iterations + clamped.iterations,
            })
        }
    }
}

/// The three exchange identities between the zoo inverses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExchangeIdentity {
    /// `𝓑_N⁻¹ = 𝓛̊ 𝓑_D⁻¹ 𝓛̊⁻¹`, data `⊥ ℍ`.
    NeumannFromDirichlet,
    /// `𝓑_D⁻¹ = 𝓛 𝓑_N⁻¹ 𝓛⁻¹`, any data.
    DirichletFromNeumann,
    /// `𝓑_{N,D}⁻¹ = 𝓛_D 𝓑_{DD}⁻¹ 𝓛_N⁻¹`, data `⊥ ℝ`.
    MixedFromNavier,
}

impl ExchangeIdentity {
    pub const ALL: [ExchangeIdentity; 3] = [
        ExchangeIdentity::NeumannFromDirichlet,
        ExchangeIdentity::DirichletFromNeumann,
        ExchangeIdentity::MixedFromNavier,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            ExchangeIdentity::NeumannFromDirichlet => "𝓑_N⁻¹ = 𝓛̊ 𝓑_D⁻¹ 𝓛̊⁻¹",
            ExchangeIdentity::DirichletFromNeumann => "𝓑_D⁻¹ = 𝓛 𝓑_N⁻¹ 𝓛⁻¹",
            ExchangeIdentity::MixedFromNavier => "𝓑_ND⁻¹ = 𝓛_D 𝓑_DD⁻¹ 𝓛_N⁻¹",
        }
    }
}

/// `‖left − right‖` for one identity applied to `f`.
pub fn exchange_identity_check(
    identity: ExchangeIdentity,
    cat: &OperatorCatalog,
    f: &Field,
    cfg: &SolverConfig,
) -> Result<f64> {
    let scfg = stage_config(cfg);
    let inv = |k: LaplacianKind, g: &Field| -> Result<Field> { apply_inverse(k, cat, g, &scfg).map(|s: InverseApplication| s.field) };
    let b_inv = |outer: LaplacianKind, inner: LaplacianKind, g: &Field| inv(inner, &inv(outer, g)?);
    let a = cat.over()?;
    let (left, right) = match identity {
        ExchangeIdentity::NeumannFromDirichlet => {
            let left = b_inv(Over, Under, f)?;
            let mid = b_inv(Under, Over, &inv(Over, f)?)?;
            (left, a.apply(&restrict(cat, 1, &mid)?)?)
        }
        ExchangeIdentity::DirichletFromNeumann => {
            let left = b_inv(Under, Over, f)?;
            let mid = b_inv(Over, Under, &inv(Under, f)?)?;
            (left, cat.pad(1)?.apply(&a.adjoint().apply(&mid)?)?)
        }
        ExchangeIdentity::MixedFromNavier => {
            let left = b_inv(N, D, f)?;
            let mid = b_inv(D, D, &inv(N, f)?)?;
            (left, cat.laplace_dirichlet().apply(&mid)?)
        }
    };
    Ok(left.sub(&right)?.norm())
}

fn dense_limit(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        Err(Error::InvalidArgument(format!(
            "dense inverse matrices need at most {DENSE_LIMIT} cells, got {n}"
        )))
    } else {
        Ok(())
    }
}

fn invert(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.try_inverse()
        .ok_or_else(|| Error::SingularNormal(format!("{what} is singular")))
}

/// Dense matrix of one Laplacian inverse on `ℝ^{C0}`; the restricted-data
/// inverses are extended by their least-squares or pseudo-inverse formula.
pub fn dense_laplace_inverse(kind: LaplacianKind, cat: &OperatorCatalog) -> Result<DMatrix<f64>> {
    dense_limit(cat.domain().num_cells())?;
    match kind {
        D => invert(cat.laplace_dirichlet().to_dense(), "L_D"),
        N => Ok(dense::pinv(&cat.laplace_neumann().to_dense())),
        Over | Under => {
            let a = cat.over()?;
            let ad = a.to_dense();
            let at = a.adjoint().to_dense();
            let kinv = invert(&at * &ad, "AᵀA")?;
            let pad = cat.pad(1)?.to_dense();
            Ok(if kind == Over {
                pad * kinv * at
            } else {
                ad * kinv * pad.transpose()
            })
        }
        LaplacianKind::Mixed => Err(Error::InvalidArgument("the mixed Laplacian is not part of the zoo".into())),
    }
}

/// Dense inverse matrix of a composition (formal for forbidden ones) or of
/// the two `A_B` problems. Cell weights are uniform, so transposes are adjoints.
pub fn dense_zoo_inverse(problem: ZooProblem, cat: &OperatorCatalog) -> Result<DMatrix<f64>> {
    match problem {
        ZooProblem::Composition { outer, inner } => {
            ensure_zoo_kinds(outer, inner)?;
            Ok(dense_laplace_inverse(inner, cat)? * dense_laplace_inverse(outer, cat)?)
        }
        ZooProblem::Overdetermined | ZooProblem::Underdetermined => {
            dense_limit(cat.domain().num_cells())?;
            let ab = cat.over_biharmonic()?;
            let bd = ab.to_dense();
            let bt = ab.adjoint().to_dense();
            let kinv = invert(&bt * &bd, "A_BᵀA_B")?;
            let pad = cat.pad(2)?.to_dense();
            Ok(if problem == ZooProblem::Overdetermined {
                pad * kinv * bt
            } else {
                bd * kinv * pad.transpose()
            })
        }
        ZooProblem::Regularized => {
            dense_limit(cat.domain().num_cells())?;
            invert(regularized_operator(cat)?.to_dense(), "AAᵀ+1")
        }
        ZooProblem::HessianNeumann => {
            dense_limit(cat.domain().num_cells())?;
            let h = cat.hessian()?;
            Ok(dense::pinv(&h.adjoint().compose(h)?.to_dense()))
        }
        ZooProblem::HessianDirichlet => {
            dense_limit(cat.domain().num_cells())?;
            let hp = cat.hessian_clamped()?;
            let kinv = invert(hp.adjoint().compose(hp)?.to_dense(), "H_0ᵀH_0")?;
            let p = cat.pad(1)?.to_dense();
            Ok(&p * kinv * p.transpose())
        }
    }
}

/// `max_{i,j} |M_ij − N_ji| / max |M|`.
pub fn transpose_mismatch(m: &DMatrix<f64>, n: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - n.transpose()).amax() / scale
}

/// Worst ratios along `‖φ‖ ≤ c‖∇φ‖ ≤ c²‖Δφ‖ ≤ c³‖∇Δφ‖ ≤ c⁴‖Δ²φ‖` for `φ` on `C2`,
/// with `c` the discrete Friedrichs constant.
#[derive(Clone, Debug)]
pub struct BiharmonicChainReport {
    pub c_f: f64,
    /// Best constant of the `A_B`-pair; at most `c_f⁴`.
    pub c_biharmonic: f64,
    /// Worst value of each of the four consecutive ratios.
    pub worst: [f64; 4],
    /// max `‖φ‖ / (c_biharmonic ‖A_B φ‖)`.
    pub worst_direct: f64,
    pub samples: usize,
}

impl BiharmonicChainReport {
    pub fn holds(&self) -> bool {
        self.worst.iter().chain([&self.worst_direct]).all(|&r| r <= 1.0 + 1e-10)
            && self.c_biharmonic <= self.c_f.powi(4) * (1.0 + 1e-10)
    }
}

pub fn biharmonic_chain_check(cat: &OperatorCatalog, cfg: &SolverConfig, samples: usize, seed: u64) -> Result<BiharmonicChainReport> {
    let c_f = friedrichs_pair(cat)?.best_constant(cfg)?;
    let c_biharmonic = over_biharmonic_pair(cat)?.best_constant(cfg)?;
    let ab = cat.over_biharmonic()?;
    let pad = cat.pad(2)?;
    let g = cat.gradient_dirichlet();
    let l = cat.laplace_dirichlet();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];
    let mut worst_direct = 0.0f64;
    for _ in 0..samples {
        let x = Field::new(ab.domain().clone(), (0..ab.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let phi = pad.apply(&x)?;
        let lphi = l.apply(&phi)?;
        let norms = [
            phi.norm(),
            g.apply(&phi)?.norm(),
            lphi.norm(),
            g.apply(&lphi)?.norm(),
            l.apply(&lphi)?.norm(),
        ];
        for k in 0..4 {
            worst[k] = worst[k].max(norms[k] / (c_f * norms[k + 1]));
        }
        worst_direct = worst_direct.max(norms[0] / (c_biharmonic * ab.apply(&x)?.norm()));
    }
    Ok(BiharmonicChainReport {
        c_f,
        c_biharmonic,
        worst,
        worst_direct,
        samples,
    })
}
