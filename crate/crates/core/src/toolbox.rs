//! Dual pairs `(A, A*)`: kernels, projectors, best constants and reduced solves.

use crate::error::{Error, Result};
use crate::grid::{DofSpace, Field};
use crate::linalg::dense::{self, DENSE_LIMIT};
use crate::linalg::krylov::{orthonormalize, project_out};
use crate::linalg::{
    deflated_cg_solve, normal_cg_solve, smallest_eigenpairs, NormalSide, SolverConfig,
    SparseOperator,
};
use std::sync::OnceLock;

/// Relative tolerance for kernel vectors and swapped-constant agreement.
const KERNEL_CHECK: f64 = 1e-10;
const CONSTANT_AGREEMENT: f64 = 1e-8;

/// An operator with its weighted adjoint and cached kernel data.
#[derive(Debug)]
pub struct DualPair {
    forward: SparseOperator,
    adjoint: SparseOperator,
    gram: SparseOperator,
    kernel_forward: Option<Vec<Field>>,
    kernel_adjoint: Option<Vec<Field>>,
    constant: OnceLock<std::result::Result<f64, Error>>,
}

/// Equation solved by [`DualPair::reduced_solve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReducedTask {
    /// `𝒜 x = g`
    Forward,
    /// `𝒜* y = f`
    Adjoint,
    /// `𝒜*𝒜 x = f`
    Normal,
    /// `𝒜𝒜* y = g`
    Conormal,
}

/// Solution of a reduced equation with its diagnostics.
#[derive(Clone, Debug)]
pub struct ReducedSolve {
    pub solution: Field,
    /// Relative equation residual, recomputed.
    pub residual: f64,
    pub compatibility_defect: f64,
    /// `‖x‖` and the bound `c_A‖rhs‖` (or `c_A²‖rhs‖`).
    pub norm: f64,
    pub bound: f64,
    pub bound_ok: bool,
}

/// Three-way orthogonal splitting of an edge field.
#[derive(Clone, Debug)]
pub struct HelmholtzSplit {
    pub input: Field,
    pub range: Field,
    pub cohomology: Field,
    pub corange: Field,
    pub dim_range: usize,
    pub dim_cohomology: usize,
    pub dim_corange: usize,
}

impl HelmholtzSplit {
    /// Largest pairwise inner product, relative to `‖g‖²`.
    pub fn orthogonality_defect(&self) -> f64 {
        let g2 = self.input.norm().powi(2).max(f64::MIN_POSITIVE);
        let pairs = [
            (&self.range, &self.cohomology),
            (&self.range, &self.corange),
            (&self.cohomology, &self.corange),
        ];
        pairs
            .iter()
            .map(|(a, b)| a.dot(b).unwrap().abs() / g2)
            .fold(0.0, f64::max)
    }

    /// `‖g − Σ components‖ / ‖g‖`.
    pub fn reconstruction_defect(&self) -> f64 {
        let sum = self
            .range
            .add_scaled(1.0, &self.cohomology)
            .and_then(|s| s.add_scaled(1.0, &self.corange))
            .unwrap();
        let gn = self.input.norm().max(f64::MIN_POSITIVE);
        self.input.sub(&sum).unwrap().norm() / gn
    }
}

fn to_fields(space: &std::sync::Arc<DofSpace>, vecs: Vec<Vec<f64>>) -> Vec<Field> {
    vecs.into_iter()
        .map(|v| Field::new(space.clone(), v).expect("kernel vector length"))
        .collect()
}

/// Dense weighted nullspace when the operator is small enough.
fn dense_kernel(op: &SparseOperator) -> Option<Vec<Field>> {
    (op.ncols() <= DENSE_LIMIT && op.nrows() <= 4 * DENSE_LIMIT)
        .then(|| to_fields(op.domain(), dense::nullspace(op)))
}

/// Builds the pair; kernels come from a dense nullspace where feasible.
pub fn make_pair(forward: SparseOperator) -> Result<DualPair> {
    let adjoint = forward.adjoint();
    let kernel_forward = dense_kernel(&forward);
    let kernel_adjoint = dense_kernel(&adjoint);
    build(forward, adjoint, kernel_forward, kernel_adjoint)
}

/// Builds the pair with a known kernel of `forward`, verified on entry.
/// Completeness is confirmed when the best constant is computed: a missing
/// kernel direction makes the deflated inner solves fail.
pub fn make_pair_with_kernel(forward: SparseOperator, kernel: Vec<Field>) -> Result<DualPair> {
    let adjoint = forward.adjoint();
    let w = forward.domain().weights().to_vec();
    for k in &kernel {
        forward.domain().ensure_same(k.space())?;
    }
    let basis = orthonormalize(&kernel.iter().map(|k| k.values().to_vec()).collect::<Vec<_>>(), &w);
    let kernel_forward = to_fields(forward.domain(), basis);
    let kernel_adjoint = dense_kernel(&adjoint);
    build(forward, adjoint, Some(kernel_forward), kernel_adjoint)
}

fn build(
    forward: SparseOperator,
    adjoint: SparseOperator,
    kernel_forward: Option<Vec<Field>>,
    kernel_adjoint: Option<Vec<Field>>,
) -> Result<DualPair> {
    let gram = adjoint.compose(&forward)?;
    let pair = DualPair {
        forward,
        adjoint,
        gram,
        kernel_forward,
        kernel_adjoint,
        constant: OnceLock::new(),
    };
    pair.check_kernels()?;
    Ok(pair)
}

impl DualPair {
    pub fn forward(&self) -> &SparseOperator {
        &self.forward
    }

    pub fn adjoint(&self) -> &SparseOperator {
        &self.adjoint
    }

    /// `A*A` on the domain of `A`.
    pub fn gram(&self) -> &SparseOperator {
        &self.gram
    }

    pub fn kernel_forward(&self) -> Result<&[Field]> {
        self.kernel_forward
            .as_deref()
            .ok_or_else(|| Error::Kernel(format!("kernel of {} is not materialized", self.forward.name())))
    }

    pub fn kernel_adjoint(&self) -> Result<&[Field]> {
        self.kernel_adjoint
            .as_deref()
            .ok_or_else(|| Error::Kernel(format!("kernel of {} is not materialized", self.adjoint.name())))
    }

    fn check_kernels(&self) -> Result<()> {
        let scale = self.forward.norm_estimate(30).max(f64::MIN_POSITIVE);
        for (op, ker) in [
            (&self.forward, &self.kernel_forward),
            (&self.adjoint, &self.kernel_adjoint),
        ] {
            for k in ker.iter().flatten() {
                let r = op.apply(k)?.norm();
                if r > KERNEL_CHECK * scale * k.norm() {
                    return Err(Error::Kernel(format!(
                        "{} does not annihilate a supplied kernel vector (‖Ak‖ = {r:.3e})",
                        op.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The pair `(A*, A)`.
    pub fn swapped(&self) -> Result<DualPair> {
        build(
            self.adjoint.clone(),
            self.forward.clone(),
            self.kernel_adjoint.clone(),
            self.kernel_forward.clone(),
        )
    }

    fn deflation(&self, cfg: &SolverConfig) -> Result<SolverConfig> {
        Ok(cfg.clone().with_deflation(self.kernel_forward()?.to_vec()))
    }

    /// Constant from `A*A` alone, without the swapped check.
    fn raw_constant(&self, cfg: &SolverConfig) -> Result<f64> {
        let kernel = self.kernel_forward()?;
        if kernel.len() == self.forward.ncols() {
            return Err(Error::Kernel(format!("{} is zero", self.forward.name())));
        }
        let pairs = smallest_eigenpairs(&self.gram, 1, kernel, cfg)?;
        let lambda = pairs[0].value;
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(Error::Kernel(format!(
                "{} has a kernel direction outside the supplied basis",
                self.forward.name()
            )));
        }
        Ok(1.0 / lambda.sqrt())
    }

    /// Best constant `c_A = 1/√λ_min⁺(A*A)`, cached.
    ///
    /// When the swapped Gram matrix is small enough its constant is computed
    /// too and must agree to `1e-8` relative.
    pub fn best_constant(&self, cfg: &SolverConfig) -> Result<f64> {
        self.constant
            .get_or_init(|| {
                let c = self.raw_constant(cfg)?;
                if self.kernel_adjoint.is_some() && self.adjoint.ncols() <= DENSE_LIMIT {
                    let c2 = self.swapped()?.raw_constant(cfg)?;
                    if (c - c2).abs() > CONSTANT_AGREEMENT * c {
                        return Err(Error::Kernel(format!(
                            "constants of {} and its adjoint differ: {c} vs {c2}",
                            self.forward.name()
                        )));
                    }
                }
                Ok(c)
            })
            .clone()
    }

    /// Constants of `(A, A*)` and `(A*, A)`, computed independently.
    pub fn constant_pair(&self, cfg: &SolverConfig) -> Result<(f64, f64)> {
        Ok((self.raw_constant(cfg)?, self.swapped()?.raw_constant(cfg)?))
    }

    /// `(π_A g, (1 − π_A) g)` with `π_A` the orthogonal projector onto `R(A)`.
    pub fn project_range(&self, g: &Field, cfg: &SolverConfig) -> Result<(Field, Field)> {
        self.forward.codomain().ensure_same(g.space())?;
        let x = normal_cg_solve(&self.forward, g, NormalSide::LeastSquares, &self.deflation(cfg)?)?;
        let pg = self.forward.apply(&x.field)?;
        let rest = g.sub(&pg)?;
        Ok((pg, rest))
    }

    /// Orthogonal projection onto `R(A*) = N(A)^⊥` using the kernel basis.
    pub fn project_corange(&self, f: &Field) -> Result<Field> {
        self.forward.domain().ensure_same(f.space())?;
        let w = self.forward.domain().weights();
        let basis: Vec<Vec<f64>> = self.kernel_forward()?.iter().map(|k| k.values().to_vec()).collect();
        let mut v = f.values().to_vec();
        project_out(&mut v, &basis, w);
        Field::new(f.space().clone(), v)
    }

    /// Solves one of the reduced equations, checking data compatibility and
    /// the norm bound from the best constant.
    pub fn reduced_solve(&self, task: ReducedTask, rhs: &Field, cfg: &SolverConfig) -> Result<ReducedSolve> {
        let c = self.best_constant(cfg)?;
        let rn = rhs.norm();
        let (solution, defect, power) = match task {
            ReducedTask::Forward => {
                let (x, defect) = self.solve_forward(rhs, cfg)?;
                (x, defect, 1)
            }
            ReducedTask::Adjoint => {
                let s = normal_cg_solve(&self.forward, rhs, NormalSide::MinNorm, &self.deflation(cfg)?)?;
                (s.field, s.compatibility_defect, 1)
            }
            ReducedTask::Normal => {
                let s = deflated_cg_solve(&self.gram, rhs, self.kernel_forward()?, cfg)?;
                (s.field, s.compatibility_defect, 2)
            }
            ReducedTask::Conormal => {
                let (x, defect) = self.solve_forward(rhs, cfg)?;
                let s = normal_cg_solve(&self.forward, &x, NormalSide::MinNorm, &self.deflation(cfg)?)?;
                (s.field, defect, 2)
            }
        };
        let image = match task {
            ReducedTask::Forward => self.forward.apply(&solution)?,
            ReducedTask::Adjoint => self.adjoint.apply(&solution)?,
            ReducedTask::Normal => self.gram.apply(&solution)?,
            ReducedTask::Conormal => self.forward.apply(&self.adjoint.apply(&solution)?)?,
        };
        let target = match task {
            ReducedTask::Adjoint | ReducedTask::Normal => self.project_corange(rhs)?,
            _ => rhs.clone(),
        };
        let residual = if rn > 0.0 { image.sub(&target)?.norm() / rn } else { 0.0 };
        let norm = solution.norm();
        let bound = c.powi(power) * rn;
        Ok(ReducedSolve {
            solution,
            residual,
            compatibility_defect: defect,
            norm,
            bound,
            bound_ok: norm <= bound * (1.0 + 1e-9),
        })
    }

    /// Least-squares preimage and the relative size of `(1 − π_A) g`.
    fn solve_forward(&self, g: &Field, cfg: &SolverConfig) -> Result<(Field, f64)> {
        let s = normal_cg_solve(&self.forward, g, NormalSide::LeastSquares, &self.deflation(cfg)?)?;
        if s.residual > cfg.compat_tolerance {
            return Err(Error::Compatibility {
                subspace: format!("R({})", self.forward.name()),
                defect: s.residual,
                tolerance: cfg.compat_tolerance,
            });
        }
        Ok((s.field, s.residual))
    }
}

/// Dimension of `N(A₁) ∩ N(A₀*)` via the nullspace of the stacked `[A₁; A₀*]`.
pub fn cohomology_dimension(pair0: &DualPair, pair1: &DualPair) -> Result<usize> {
    let a1 = pair1.forward();
    let a0s = pair0.adjoint();
    a1.domain().ensure_same(a0s.domain())?;
    let edges = a1.domain();
    if edges.dim() <= DENSE_LIMIT {
        let mut weights = a1.codomain().weights().to_vec();
        weights.extend_from_slice(a0s.codomain().weights());
        let stacked_space = DofSpace::new("Stacked", weights, edges.origin())?;
        let mut t = a1.triplets();
        let off = a1.nrows();
        t.extend(a0s.triplets().into_iter().map(|(r, c, v)| (r + off, c, v)));
        let stacked = SparseOperator::from_triplets("[A1;A0*]", edges.clone(), stacked_space, &t)?;
        Ok(dense::nullspace(&stacked).len())
    } else {
        // rank–nullity with the orthogonal splitting of the edge space
        let rank0 = pair0.forward().ncols() - pair0.kernel_forward()?.len();
        let rank1 = a1.nrows() - pair1.kernel_adjoint()?.len();
        Ok(edges.dim() - rank0 - rank1)
    }
}

/// Splits `g` into `R(A₀) ⊕ N₀,₁ ⊕ R(A₁*)`.
pub fn helmholtz_decompose(
    pair0: &DualPair,
    pair1: &DualPair,
    g: &Field,
    cfg: &SolverConfig,
) -> Result<HelmholtzSplit> {
    let product = pair1.forward().compose(pair0.forward())?;
    let scale = pair1.forward().max_abs() * pair0.forward().max_abs();
    if product.max_abs() > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!(
            "{} ∘ {} is not zero; the complex property fails",
            pair1.forward().name(),
            pair0.forward().name()
        )));
    }
    let (range, _) = pair0.project_range(g, cfg)?;
    let (corange, _) = pair1.swapped()?.project_range(g, cfg)?;
    let cohomology = g.sub(&range)?.sub(&corange)?;
    let dim_cohomology = cohomology_dimension(pair0, pair1)?;
    let dim_range = pair0.forward().ncols() - pair0.kernel_forward()?.len();
    let dim_corange = g.dim() - dim_range - dim_cohomology;
    Ok(HelmholtzSplit {
        input: g.clone(),
        range,
        cohomology,
        corange,
        dim_range,
        dim_cohomology,
        dim_corange,
    })
}
