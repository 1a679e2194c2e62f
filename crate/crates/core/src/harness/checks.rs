//! Invariant suite behind the `check` command. Small grids, fixed seeds.

use super::constants_audit;
use super::expr::parse_expression;
use super::report::{read_field_csv, write_field_csv};
use crate::error::Result;
use crate::grid::{DofSpace, Field, GridDomain, Shape};
use crate::laplace::{apply_inverse, estimate_chain_check, h2_estimate_check, LaplacianKind};
use crate::linalg::{dense, SolverConfig};
use crate::operators::OperatorCatalog;
use crate::toolbox::{helmholtz_decompose, make_pair};
use crate::zoo::{
    biharmonic_chain_check, classify_zoo, dense_zoo_inverse, exchange_identity_check, solve_regularized, solve_zoo,
    transpose_mismatch, ExchangeIdentity, Status, ZooProblem,
};
use crate::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 14] = [
    ("expression", expression),
    ("csv_round_trip", csv_round_trip),
    ("zoo_table", zoo_table),
    ("kernel_dimensions", kernel_dimensions),
    ("cohomology", cohomology),
    ("helmholtz", helmholtz),
    ("constants_square", constants_square),
    ("fredholm_neumann", fredholm_neumann),
    ("zoo_solves", zoo_solves),
    ("exchange_identities", exchange_identities),
    ("selfadjoint_items", selfadjoint_items),
    ("regularized_bound", regularized_bound),
    ("laplace_chains", laplace_chains),
    ("biharmonic_chains", biharmonic_chains),
];

/// Runs every check in a fixed order; errors count as failures.
pub fn run_checks() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, check)| match check() {
            Ok((passed, detail)) => CheckOutcome { name, passed, detail },
            Err(e) => CheckOutcome {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn catalog(shape: Shape, n: usize) -> Result<OperatorCatalog> {
    OperatorCatalog::new(Arc::new(GridDomain::build(&shape, n, &[])?))
}

fn random(space: &Arc<DofSpace>, rng: &mut ChaCha8Rng) -> Result<Field> {
    Field::new(space.clone(), (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn cfg() -> SolverConfig {
    SolverConfig::default().with_tolerance(1e-12)
}

fn expression() -> Result<(bool, String)> {
    let v = parse_expression("4*pi^4*sin(pi*x)*sin(pi*y)")?.eval(0.5, 0.5);
    Ok(((v - 389.6364).abs() < 1e-4, format!("value {v:.6}")))
}

fn csv_round_trip() -> Result<(bool, String)> {
    let d = GridDomain::build(&Shape::LShape, 8, &[])?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = Field::new(d.cell_space(), (0..d.num_cells()).map(|_| rng.gen_range(-1e6..1e6) / 3.0).collect())?;
    let mut buf = Vec::new();
    write_field_csv(&d, &f, &mut buf)?;
    let g = read_field_csv(&d, buf.as_slice())?;
    let same = f.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits());
    Ok((same, format!("{} values", f.dim())))
}

fn zoo_table() -> Result<(bool, String)> {
    let rows = classify_zoo();
    let good = rows.iter().filter(|r| r.status == Status::WellPosed).count();
    Ok((
        rows.len() == 18 && good == 13,
        format!("{} rows, {good} well-posed, {} forbidden", rows.len(), rows.len() - good),
    ))
}

fn kernel_dimensions() -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for (shape, name) in [(Shape::Square, "square"), (Shape::LShape, "L"), (Shape::Annulus, "annulus")] {
        let c = catalog(shape, 10)?;
        let d = c.domain();
        let c0 = d.num_cells();
        let (c1, c2) = (d.ring_space(1)?.dim(), d.ring_space(2)?.dim());
        let harm = dense::nullspace(&c.over()?.adjoint()).len();
        let biharm = dense::nullspace(&c.over_biharmonic()?.adjoint()).len();
        let hess = dense::nullspace(c.hessian()?).len();
        ok &= harm == c0 - c1 && biharm == c0 - c2 && hess == 3;
        detail.push(format!("{name}: ℍ {harm}, 𝔹ℍ {biharm}, ker H {hess}"));
    }
    Ok((ok, detail.join("; ")))
}

fn cohomology() -> Result<(bool, String)> {
    let dims = [Shape::Square, Shape::Annulus]
        .into_iter()
        .map(|s| {
            let c = catalog(s, 8)?;
            crate::toolbox::cohomology_dimension(&make_pair(c.gradient().clone())?, &make_pair(c.curl().clone())?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dims == [0, 1], format!("square {}, annulus {}", dims[0], dims[1])))
}

fn helmholtz() -> Result<(bool, String)> {
    let c = catalog(Shape::Annulus, 10)?;
    let p0 = make_pair(c.gradient().clone())?;
    let p1 = make_pair(c.curl().clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut rec, mut orth) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let g = random(c.gradient().codomain(), &mut rng)?;
        let s = helmholtz_decompose(&p0, &p1, &g, &cfg())?;
        rec = rec.max(s.reconstruction_defect());
        orth = orth.max(s.orthogonality_defect());
    }
    Ok((rec <= 1e-10 && orth <= 1e-10, format!("reconstruction {rec:.1e}, orthogonality {orth:.1e}")))
}

fn constants_square() -> Result<(bool, String)> {
    let a = constants_audit(&catalog(Shape::Square, 16)?, &cfg())?;
    Ok((
        a.bound_ok,
        format!("c_f {:.6}, c_p {:.6}, d/π {:.6}", a.c_f_h, a.c_p_h, a.d_over_pi),
    ))
}

fn fredholm_neumann() -> Result<(bool, String)> {
    let c = catalog(Shape::Square, 12)?;
    let d = c.domain();
    let one = d.sample(|_, _| 1.0);
    let rejected = matches!(
        apply_inverse(LaplacianKind::Neumann, &c, &one, &cfg()),
        Err(Error::Compatibility { .. })
    );
    let mean = one.dot(&d.sample(|x, _| x))? / one.dot(&one)?;
    let f = d.sample(|x, _| x - mean);
    let u = apply_inverse(LaplacianKind::Neumann, &c, &f, &cfg())?.field;
    let m = u.dot(&one)?.abs();
    Ok((rejected && m <= 1e-10, format!("f = 1 rejected: {rejected}, ⟨u,1⟩ = {m:.1e}")))
}

fn zoo_solves() -> Result<(bool, String)> {
    let c = catalog(Shape::Square, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // A x is ⊥ ℍ, hence ⊥ ℝ and ⊥ P₁; A_B x is ⊥ 𝔹ℍ
    let f = c.over()?.apply(&random(c.over()?.domain(), &mut rng)?)?;
    let fb = c.over_biharmonic()?.apply(&random(c.over_biharmonic()?.domain(), &mut rng)?)?;
    let mut worst = 0.0f64;
    let mut ok = true;
    for row in classify_zoo() {
        let forbidden = matches!(row.status, Status::Forbidden(_));
        let data = if row.problem == ZooProblem::Overdetermined { &fb } else { &f };
        match solve_zoo(row.problem, &c, data, &cfg()) {
            Err(Error::ForbiddenComposition { .. }) if forbidden => {}
            Ok(r) if !forbidden => {
                let w = r.constraint_norms.iter().fold(r.pde_residual, |a, (_, v)| a.max(*v));
                worst = worst.max(w / data.norm());
            }
            _ => ok = false,
        }
    }
    Ok((ok && worst <= 1e-8, format!("worst relative residual {worst:.1e}")))
}

fn exchange_identities() -> Result<(bool, String)> {
    let c = catalog(Shape::Square, 10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for id in ExchangeIdentity::ALL {
        for _ in 0..3 {
            let x = random(c.over()?.domain(), &mut rng)?;
            let f = c.over()?.apply(&x)?;
            worst = worst.max(exchange_identity_check(id, &c, &f, &cfg())? / f.norm());
        }
    }
    Ok((worst <= 1e-9, format!("worst relative deviation {worst:.1e}")))
}

fn selfadjoint_items() -> Result<(bool, String)> {
    let c = catalog(Shape::Square, 6)?;
    let mut worst = 0.0f64;
    for row in classify_zoo().into_iter().filter(|r| r.status == Status::WellPosed) {
        let partner = ZooProblem::parse(&row.adjoint_partner)?;
        if matches!(partner.status(), Status::Forbidden(_)) {
            continue;
        }
        let m = dense_zoo_inverse(row.problem, &c)?;
        let n = dense_zoo_inverse(partner, &c)?;
        worst = worst.max(transpose_mismatch(&m, &n));
    }
    Ok((worst <= 1e-10, format!("worst transpose mismatch {worst:.1e}")))
}

fn regularized_bound() -> Result<(bool, String)> {
    let c = catalog(Shape::Square, 10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    for _ in 0..5 {
        let f = random(&c.domain().cell_space(), &mut rng)?;
        // κ(AAᵀ+1) ~ h⁻⁴ puts the attainable residual near 1e-12
        ok &= solve_regularized(&c, &f, &SolverConfig::default())?.bound_ok;
    }
    Ok((ok, "5 samples".into()))
}

fn laplace_chains() -> Result<(bool, String)> {
    let c = catalog(Shape::LShape, 10)?;
    let dir = estimate_chain_check(LaplacianKind::Dirichlet, &c, &cfg(), 10, 5)?;
    let neu = estimate_chain_check(LaplacianKind::Neumann, &c, &cfg(), 10, 6)?;
    let h2 = h2_estimate_check(&c, &cfg(), 10, 7)?;
    Ok((
        dir.holds() && neu.holds() && h2.exact_bounds_hold(),
        format!(
            "Friedrichs {:.3}, Poincaré {:.3}, H² {:.3}",
            dir.worst_first.max(dir.worst_second),
            neu.worst_first.max(neu.worst_second),
            h2.worst_h1
        ),
    ))
}

fn biharmonic_chains() -> Result<(bool, String)> {
    let c = catalog(Shape::Square, 10)?;
    let r = biharmonic_chain_check(&c, &cfg(), 10, 8)?;
    let worst = r.worst.iter().fold(r.worst_direct, |a, &b| a.max(b));
    Ok((r.holds(), format!("worst ratio {worst:.3}")))
}
