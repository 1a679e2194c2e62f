//! Assembly of the discrete differential operators on a [`GridDomain`].

use crate::error::{Error, Result};
use crate::grid::{Axis, Bc, DofSpace, GridDomain};
use crate::linalg::SparseOperator;
use std::collections::HashMap;
use std::sync::Arc;

/// Which boundary faces carry a Dirichlet row in a gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientKind {
    /// No boundary rows: the maximal gradient.
    Neumann,
    /// A row on every boundary face.
    Dirichlet,
    /// Rows on the faces labelled Dirichlet.
    Mixed,
}

/// Operators of one domain, assembled once.
///
/// ```text
/// G   : C0 -> Edges          interior faces, (u_b - u_a)/h
/// G°  : C0 -> EdgesD         plus half-cell rows -2u/h on boundary faces
/// L_N = G* G,  L_D = G°* G°,  L_mixed likewise on labelled faces
/// A   : C1 -> C0             5-point -Δ_h of the zero extension
/// A_B : C2 -> C0             13-point Δ²_h of the zero extension
/// Curl: Edges -> Nodes       circulation around interior grid nodes
/// H   : C0 -> Hess           (xx, xy, yy) second differences per cell
/// H_0 : C1 -> Hess           centred differences of the zero extension
/// ```
#[derive(Clone, Debug)]
pub struct OperatorCatalog {
    domain: Arc<GridDomain>,
    gradient: SparseOperator,
    gradient_dirichlet: SparseOperator,
    gradient_mixed: SparseOperator,
    laplace_neumann: SparseOperator,
    laplace_dirichlet: SparseOperator,
    laplace_mixed: SparseOperator,
    over: Result<SparseOperator>,
    over_biharmonic: Result<SparseOperator>,
    curl: SparseOperator,
    hessian: Result<SparseOperator>,
    hessian_clamped: Result<SparseOperator>,
    pads: [SparseOperator; 3],
}

impl OperatorCatalog {
    pub fn new(domain: Arc<GridDomain>) -> Result<OperatorCatalog> {
        let gradient = assemble_gradient(&domain, GradientKind::Neumann)?;
        let gradient_dirichlet = assemble_gradient(&domain, GradientKind::Dirichlet)?;
        let gradient_mixed = assemble_gradient(&domain, GradientKind::Mixed)?;
        let laplace_neumann = gradient.adjoint().compose(&gradient)?.with_name("L_N");
        let laplace_dirichlet = gradient_dirichlet
            .adjoint()
            .compose(&gradient_dirichlet)?
            .with_name("L_D");
        let laplace_mixed = gradient_mixed.adjoint().compose(&gradient_mixed)?.with_name("L_mixed");
        let over = assemble_overdetermined_laplacian(&domain);
        let over_biharmonic = assemble_overdetermined_biharmonic(&domain);
        let curl = assemble_curl(&domain)?;
        let hessian = assemble_hessian(&domain);
        let hessian_clamped = assemble_clamped_hessian(&domain);
        let pads = [0, 1, 2].map(|k| assemble_pad(&domain, k).expect("ring spaces exist"));
        Ok(OperatorCatalog {
            domain,
            gradient,
            gradient_dirichlet,
            gradient_mixed,
            laplace_neumann,
            laplace_dirichlet,
            laplace_mixed,
            over,
            over_biharmonic,
            curl,
            hessian,
            hessian_clamped,
            pads,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    /// Maximal gradient `G` on interior faces.
    pub fn gradient(&self) -> &SparseOperator {
        &self.gradient
    }

    /// Gradient with half-cell Dirichlet rows on every boundary face.
    pub fn gradient_dirichlet(&self) -> &SparseOperator {
        &self.gradient_dirichlet
    }

    pub fn gradient_mixed(&self) -> &SparseOperator {
        &self.gradient_mixed
    }

    pub fn laplace_neumann(&self) -> &SparseOperator {
        &self.laplace_neumann
    }

    pub fn laplace_dirichlet(&self) -> &SparseOperator {
        &self.laplace_dirichlet
    }

    /// Penalty only on Dirichlet-labelled faces.
    pub fn laplace_mixed(&self) -> &SparseOperator {
        &self.laplace_mixed
    }

    /// Overdetermined Laplacian `A : C1 → C0`.
    pub fn over(&self) -> Result<&SparseOperator> {
        self.over.as_ref().map_err(Clone::clone)
    }

    /// Overdetermined bi-Laplacian `A_B : C2 → C0`.
    pub fn over_biharmonic(&self) -> Result<&SparseOperator> {
        self.over_biharmonic.as_ref().map_err(Clone::clone)
    }

    pub fn curl(&self) -> &SparseOperator {
        &self.curl
    }

    pub fn hessian(&self) -> Result<&SparseOperator> {
        self.hessian.as_ref().map_err(Clone::clone)
    }

    /// Hessian of the zero extension of `C1` fields, on `C0`.
    pub fn hessian_clamped(&self) -> Result<&SparseOperator> {
        self.hessian_clamped.as_ref().map_err(Clone::clone)
    }

    /// Zero extension `C_k → C_0`.
    pub fn pad(&self, k: usize) -> Result<&SparseOperator> {
        self.pads
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("ring index {k} out of range 0..=2")))
    }

    /// Whether any boundary face is labelled Dirichlet.
    pub fn has_dirichlet_labels(&self) -> bool {
        self.domain.labels().contains(&Bc::Dirichlet)
    }
}

/// Face index of each `(cell, axis)` pair whose `+axis` neighbour exists.
fn face_lookup(domain: &GridDomain) -> HashMap<(usize, Axis), usize> {
    domain
        .interior_faces()
        .iter()
        .enumerate()
        .map(|(k, f)| ((f.a, f.axis), k))
        .collect()
}

pub fn assemble_gradient(domain: &GridDomain, kind: GradientKind) -> Result<SparseOperator> {
    let h = domain.h();
    let faces = domain.interior_faces();
    let boundary: Vec<usize> = (0..domain.boundary_faces().len())
        .filter(|&k| match kind {
            GradientKind::Neumann => false,
            GradientKind::Dirichlet => true,
            GradientKind::Mixed => domain.label(k) == Bc::Dirichlet,
        })
        .collect();
    let mut weights = vec![h * h; faces.len()];
    weights.extend(std::iter::repeat_n(0.5 * h * h, boundary.len()));
    let name = match kind {
        GradientKind::Neumann => "Edges",
        GradientKind::Dirichlet => "EdgesD",
        GradientKind::Mixed => "EdgesMixed",
    };
    let edges = DofSpace::new(name, weights, domain.fingerprint())?;
    let mut t = Vec::with_capacity(2 * faces.len() + boundary.len());
    for (k, f) in faces.iter().enumerate() {
        t.push((k, f.a, -1.0 / h));
        t.push((k, f.b, 1.0 / h));
    }
    for (r, &bf) in boundary.iter().enumerate() {
        // ghost value −u half a cell outside: (0 − u)/(h/2)
        t.push((faces.len() + r, domain.boundary_faces()[bf].cell, -2.0 / h));
    }
    let label = match kind {
        GradientKind::Neumann => "G",
        GradientKind::Dirichlet => "G°",
        GradientKind::Mixed => "G_mixed",
    };
    SparseOperator::from_triplets(label, domain.cell_space(), edges, &t)
}

/// 5-point `−Δ_h` stencil of the zero extension of `C_from` cells, evaluated on `C_to`.
fn zero_extension_laplacian(domain: &GridDomain, from: usize, to: usize) -> Result<SparseOperator> {
    let src = domain.ring_cells(from)?;
    if src.is_empty() {
        return Err(Error::EmptyDomain(format!("ring C{from} is empty")));
    }
    let dst = domain.ring_cells(to)?;
    let mut row_of = vec![usize::MAX; domain.num_cells()];
    for (r, &c) in dst.iter().enumerate() {
        row_of[c] = r;
    }
    let h2 = domain.h() * domain.h();
    let mut t = Vec::with_capacity(5 * src.len());
    for (col, &c) in src.iter().enumerate() {
        let (i, j) = domain.cells()[c];
        let mut push = |cell: Option<usize>, v: f64| -> Result<()> {
            match cell.map(|x| row_of[x]) {
                Some(r) if r != usize::MAX => {
                    t.push((r, col, v));
                    Ok(())
                }
                _ => Err(Error::StencilReach(format!(
                    "stencil of cell ({i},{j}) leaves ring C{to}"
                ))),
            }
        };
        push(Some(c), 4.0 / h2)?;
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            push(domain.cell_index(i + di, j + dj), -1.0 / h2)?;
        }
    }
    SparseOperator::from_triplets(
        format!("A{to}{from}"),
        domain.ring_space(from)?,
        domain.ring_space(to)?,
        &t,
    )
}

pub fn assemble_overdetermined_laplacian(domain: &GridDomain) -> Result<SparseOperator> {
    Ok(zero_extension_laplacian(domain, 1, 0)?.with_name("A"))
}

pub fn assemble_overdetermined_biharmonic(domain: &GridDomain) -> Result<SparseOperator> {
    let inner = zero_extension_laplacian(domain, 2, 1)?;
    let outer = zero_extension_laplacian(domain, 1, 0)?;
    Ok(outer.compose(&inner)?.with_name("A_B"))
}

pub fn assemble_curl(domain: &GridDomain) -> Result<SparseOperator> {
    let h = domain.h();
    let faces = face_lookup(domain);
    let mut t = Vec::new();
    let mut nodes = 0;
    for (a, &(i, j)) in domain.cells().iter().enumerate() {
        let (Some(b), Some(c), Some(_d)) = (
            domain.cell_index(i + 1, j),
            domain.cell_index(i, j + 1),
            domain.cell_index(i + 1, j + 1),
        ) else {
            continue;
        };
        let ab = faces[&(a, Axis::X)];
        let bd = faces[&(b, Axis::Y)];
        let cd = faces[&(c, Axis::X)];
        let ac = faces[&(a, Axis::Y)];
        t.push((nodes, ab, 1.0 / h));
        t.push((nodes, bd, 1.0 / h));
        t.push((nodes, cd, -1.0 / h));
        t.push((nodes, ac, -1.0 / h));
        nodes += 1;
    }
    let edges = DofSpace::new("Edges", vec![h * h; faces.len()], domain.fingerprint())?;
    let node_space = DofSpace::new("Nodes", vec![h * h; nodes], domain.fingerprint())?;
    SparseOperator::from_triplets("Curl", edges, node_space, &t)
}

/// Three-point second-difference stencil along one axis, as `(offset, weight)`.
fn second_difference(domain: &GridDomain, i: i64, j: i64, axis: Axis) -> Option<[(i64, f64); 3]> {
    let has = |k: i64| match axis {
        Axis::X => domain.cell_index(i + k, j).is_some(),
        Axis::Y => domain.cell_index(i, j + k).is_some(),
    };
    if has(-1) && has(1) {
        Some([(-1, 1.0), (0, -2.0), (1, 1.0)])
    } else if has(1) && has(2) {
        Some([(0, 1.0), (1, -2.0), (2, 1.0)])
    } else if has(-1) && has(-2) {
        Some([(-2, 1.0), (-1, -2.0), (0, 1.0)])
    } else {
        None
    }
}

/// First-derivative stencils (centered, forward, backward) times `2h`.
const FIRST_DIFFS: [&[(i64, f64)]; 3] = [
    &[(-1, -1.0), (1, 1.0)],
    &[(0, -3.0), (1, 4.0), (2, -1.0)],
    &[(0, 3.0), (-1, -4.0), (-2, 1.0)],
];

/// Mixed derivative as `outer(inner(u))`, both exact on quadratics.
fn mixed_difference(domain: &GridDomain, i: i64, j: i64) -> Option<Vec<(usize, f64)>> {
    let h = domain.h();
    for outer_axis in [Axis::Y, Axis::X] {
        let at = |a: i64, b: i64| match outer_axis {
            // outer offset b along outer axis, inner offset a along the other
            Axis::Y => domain.cell_index(i + a, j + b),
            Axis::X => domain.cell_index(i + b, j + a),
        };
        'outer: for outer in FIRST_DIFFS {
            let mut entries = Vec::new();
            for &(ob, ow) in outer {
                let inner = FIRST_DIFFS
                    .iter()
                    .find(|st| st.iter().all(|&(ia, _)| at(ia, ob).is_some()));
                let Some(inner) = inner else { continue 'outer };
                for &(ia, iw) in inner.iter() {
                    entries.push((at(ia, ob).unwrap(), ow * iw / (4.0 * h * h)));
                }
            }
            return Some(entries);
        }
    }
    None
}

pub fn assemble_hessian(domain: &GridDomain) -> Result<SparseOperator> {
    let h = domain.h();
    let h2 = h * h;
    let n = domain.num_cells();
    let mut weights = Vec::with_capacity(3 * n);
    for _ in 0..n {
        weights.extend([h2, 2.0 * h2, h2]);
    }
    let space = DofSpace::new("Hess", weights, domain.fingerprint())?;
    let mut t = Vec::with_capacity(3 * n * 4);
    for (c, &(i, j)) in domain.cells().iter().enumerate() {
        for (comp, axis) in [(0, Axis::X), (2, Axis::Y)] {
            let st = second_difference(domain, i, j, axis).ok_or_else(|| {
                Error::StencilReach(format!(
                    "grid line through cell ({i},{j}) along {axis:?} has fewer than 3 cells"
                ))
            })?;
            for (k, wgt) in st {
                let cell = match axis {
                    Axis::X => domain.cell_index(i + k, j),
                    Axis::Y => domain.cell_index(i, j + k),
                }
                .expect("checked by second_difference");
                t.push((3 * c + comp, cell, wgt / h2));
            }
        }
        let mixed = mixed_difference(domain, i, j).ok_or_else(|| {
            Error::StencilReach(format!("no mixed-derivative stencil fits at cell ({i},{j})"))
        })?;
        for (cell, wgt) in mixed {
            t.push((3 * c + 1, cell, wgt));
        }
    }
    SparseOperator::from_triplets("H", domain.cell_space(), space, &t)
}

/// Centred `(xx, xy, yy)` differences of the zero extension of `C1` fields,
/// on every `C0` cell. Like `A`, the rows on depth-0 cells clamp the field.
/// Cross-difference rows that would fall outside the grid are dropped.
pub fn assemble_clamped_hessian(domain: &GridDomain) -> Result<SparseOperator> {
    let src = domain.ring_cells(1)?;
    if src.is_empty() {
        return Err(Error::EmptyDomain("ring C1 is empty".into()));
    }
    let h2 = domain.h() * domain.h();
    let n = domain.num_cells();
    let mut weights = Vec::with_capacity(3 * n);
    for _ in 0..n {
        weights.extend([h2, 2.0 * h2, h2]);
    }
    let space = DofSpace::new("Hess", weights, domain.fingerprint())?;
    let mut t = Vec::with_capacity(16 * src.len());
    for (col, &c) in src.iter().enumerate() {
        let (i, j) = domain.cells()[c];
        for (comp, (di, dj)) in [(0, (1, 0)), (2, (0, 1))] {
            t.push((3 * c + comp, col, -2.0 / h2));
            for s in [-1, 1] {
                let row = domain.cell_index(i + s * di, j + s * dj).expect("C1 cells have all four neighbours");
                t.push((3 * row + comp, col, 1.0 / h2));
            }
        }
        for (si, sj) in [(-1i64, -1i64), (-1, 1), (1, -1), (1, 1)] {
            if let Some(row) = domain.cell_index(i + si, j + sj) {
                // row cell sees this one at offset (−si, −sj)
                t.push((3 * row + 1, col, (si * sj) as f64 / (4.0 * h2)));
            }
        }
    }
    SparseOperator::from_triplets("H_0", domain.ring_space(1)?, space, &t)
}

fn assemble_pad(domain: &GridDomain, k: usize) -> Result<SparseOperator> {
    let cells = domain.ring_cells(k)?;
    let t: Vec<_> = cells.iter().enumerate().map(|(col, &c)| (c, col, 1.0)).collect();
    SparseOperator::from_triplets(
        format!("pad{k}"),
        domain.ring_space(k)?,
        domain.cell_space(),
        &t,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Dir, Field, LabelRule, Shape};
    use crate::linalg::dense;

    fn catalog(shape: Shape, n: usize) -> OperatorCatalog {
        OperatorCatalog::new(Arc::new(GridDomain::build(&shape, n, &[]).unwrap())).unwrap()
    }

    fn two_cells(rules: &[LabelRule]) -> OperatorCatalog {
        let d = GridDomain::build(&Shape::Mask(vec![(0, 0), (1, 0)]), 4, rules).unwrap();
        OperatorCatalog::new(Arc::new(d)).unwrap()
    }

    #[test]
    fn two_cell_neumann_and_dirichlet() {
        let cat = two_cells(&[]);
        let h2 = 1.0 / 16.0;
        let ln = cat.laplace_neumann().to_dense();
        assert!((ln[(0, 0)] - 1.0 / h2).abs() < 1e-12);
        assert!((ln[(0, 1)] + 1.0 / h2).abs() < 1e-12);
        assert!((ln[(1, 1)] - 1.0 / h2).abs() < 1e-12);
        let ld = cat.laplace_dirichlet().to_dense();
        // three boundary faces per cell
        assert!((ld[(0, 0)] - (1.0 + 6.0) / h2).abs() < 1e-12);
        assert!((ld[(0, 1)] + 1.0 / h2).abs() < 1e-12);
    }

    #[test]
    fn neumann_row_sums_vanish() {
        let cat = catalog(Shape::Square, 6);
        let one = vec![1.0; 36];
        let r = cat.laplace_neumann().apply_vec(&one);
        assert!(r.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn dirichlet_is_neumann_plus_penalty() {
        let cat = catalog(Shape::LShape, 8);
        let d = cat.domain();
        let h2 = d.h() * d.h();
        let mut expected = cat.laplace_neumann().to_dense();
        for f in d.boundary_faces() {
            expected[(f.cell, f.cell)] += 2.0 / h2;
        }
        assert!((cat.laplace_dirichlet().to_dense() - expected).amax() < 1e-9);
    }

    #[test]
    fn mixed_limits() {
        let d = GridDomain::build(&Shape::Square, 5, &[]).unwrap();
        let cat = OperatorCatalog::new(Arc::new(d)).unwrap();
        assert!((cat.laplace_mixed().to_dense() - cat.laplace_dirichlet().to_dense()).amax() == 0.0);
        let d = GridDomain::build(&Shape::Square, 5, &[LabelRule::All(Bc::Neumann)]).unwrap();
        let cat = OperatorCatalog::new(Arc::new(d)).unwrap();
        assert!((cat.laplace_mixed().to_dense() - cat.laplace_neumann().to_dense()).amax() == 0.0);
    }

    #[test]
    fn mixed_rows_depend_on_adjacent_labels_only() {
        let d0 = GridDomain::build(&Shape::Square, 6, &[]).unwrap();
        let d1 = GridDomain::build(&Shape::Square, 6, &[LabelRule::Side(Dir::PlusX, Bc::Neumann)])
            .unwrap();
        let m0 = OperatorCatalog::new(Arc::new(d0.clone())).unwrap().laplace_mixed().to_dense();
        let m1 = OperatorCatalog::new(Arc::new(d1)).unwrap().laplace_mixed().to_dense();
        for c in 0..36 {
            let touches = d0.cells()[c].0 == 5;
            let same = (0..36).all(|k| m0[(c, k)] == m1[(c, k)]);
            assert_eq!(same, !touches);
        }
    }

    #[test]
    fn over_columns_are_zero_extension_stencils() {
        let cat = catalog(Shape::Square, 6);
        let a = cat.over().unwrap();
        assert_eq!((a.nrows(), a.ncols()), (36, 16));
        assert_eq!(dense::rank(a), 16);
        let d = cat.domain();
        let h2 = d.h() * d.h();
        let c1 = d.ring_cells(1).unwrap();
        for (col, &c) in c1.iter().enumerate() {
            // oracle: −Δ_h of the unit function at c, with exterior zeros
            let (ci, cj) = d.cells()[c];
            for r in 0..36 {
                let (i, j) = d.cells()[r];
                let e = |a: i64, b: i64| if (a, b) == (ci, cj) { 1.0 } else { 0.0 };
                let lap = (4.0 * e(i, j) - e(i + 1, j) - e(i - 1, j) - e(i, j + 1) - e(i, j - 1)) / h2;
                assert!((a.get(r, col) - lap).abs() < 1e-9);
            }
        }
        let kernel = dense::nullspace(&a.adjoint());
        assert_eq!(kernel.len(), 20);
    }

    #[test]
    fn realizations_agree_on_c1_support() {
        let cat = catalog(Shape::Annulus, 8);
        let d = cat.domain();
        let a = cat.over().unwrap();
        let u: Vec<f64> = (0..d.num_cells()).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let lu = a.adjoint().apply_vec(&u);
        let c1 = d.ring_cells(1).unwrap();
        let ld = cat.laplace_dirichlet().apply_vec(&u);
        let ln = cat.laplace_neumann().apply_vec(&u);
        for (r, &c) in c1.iter().enumerate() {
            assert!((ld[c] - lu[r]).abs() < 1e-9);
            assert!((ln[c] - lu[r]).abs() < 1e-9);
        }
    }

    #[test]
    fn biharmonic_is_thirteen_point() {
        let cat = catalog(Shape::Square, 9);
        let d = cat.domain();
        let ab = cat.over_biharmonic().unwrap();
        let h4 = d.h().powi(4);
        let c2 = d.ring_cells(2).unwrap();
        let stencil = |di: i64, dj: i64| -> f64 {
            match (di.abs(), dj.abs()) {
                (0, 0) => 20.0,
                (1, 0) | (0, 1) => -8.0,
                (1, 1) => 2.0,
                (2, 0) | (0, 2) => 1.0,
                _ => 0.0,
            }
        };
        for (col, &c) in c2.iter().enumerate() {
            let (ci, cj) = d.cells()[c];
            for r in 0..d.num_cells() {
                let (i, j) = d.cells()[r];
                let expect = stencil(i - ci, j - cj) / h4;
                assert!((ab.get(r, col) - expect).abs() < 1e-6 * (1.0 / h4));
            }
        }
        assert_eq!(dense::nullspace(&ab.adjoint()).len(), d.num_cells() - c2.len());
    }

    #[test]
    fn empty_rings_are_errors() {
        let cat = catalog(Shape::Square, 4);
        assert!(matches!(cat.over_biharmonic(), Err(Error::EmptyDomain(_))));
        let cat = catalog(Shape::Square, 2);
        assert!(matches!(cat.over(), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn complex_property() {
        for shape in [Shape::Square, Shape::Annulus, Shape::LShape] {
            let cat = catalog(shape, 8);
            let cg = cat.curl().compose(cat.gradient()).unwrap();
            assert!(cg.max_abs() < 1e-9);
        }
    }

    #[test]
    fn single_block_has_one_cycle() {
        let d = GridDomain::build(&Shape::Square, 2, &[]).unwrap();
        let cat = OperatorCatalog::new(Arc::new(d)).unwrap();
        assert_eq!(cat.curl().nrows(), 1);
        assert_eq!(dense::rank(cat.curl()), 1);
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        for shape in [Shape::Square, Shape::LShape, Shape::Annulus] {
            let cat = catalog(shape, 8);
            let d = cat.domain();
            let hs = cat.hessian().unwrap();
            for p in [|_: f64, _: f64| 1.0, |x: f64, _: f64| x, |_: f64, y: f64| y] {
                let hp = hs.apply_vec(d.sample(p).values());
                assert!(hp.iter().all(|v| v.abs() < 1e-9));
            }
            let q = d.sample(|x, y| x * x + 3.0 * x * y - 2.0 * y * y);
            let hq = hs.apply_vec(q.values());
            for c in 0..d.num_cells() {
                assert!((hq[3 * c] - 2.0).abs() < 1e-8);
                assert!((hq[3 * c + 1] - 3.0).abs() < 1e-8);
                assert!((hq[3 * c + 2] + 4.0).abs() < 1e-8);
            }
            assert_eq!(dense::nullspace(hs).len(), 3);
        }
    }

    #[test]
    fn hessian_rejects_short_lines() {
        let d = GridDomain::build(&Shape::Mask(vec![(0, 0), (1, 0)]), 4, &[]).unwrap();
        let err = assemble_hessian(&d).unwrap_err();
        assert!(matches!(err, Error::StencilReach(_)));
    }

    #[test]
    fn deterministic_assembly() {
        let a = catalog(Shape::LShape, 8);
        let b = catalog(Shape::LShape, 8);
        assert_eq!(a.laplace_dirichlet().triplets(), b.laplace_dirichlet().triplets());
        assert_eq!(a.hessian().unwrap().triplets(), b.hessian().unwrap().triplets());
    }

    #[test]
    fn pad_is_adjoint_of_restriction() {
        let cat = catalog(Shape::Square, 6);
        let p = cat.pad(1).unwrap();
        let f = Field::constant(cat.domain().cell_space(), 1.0);
        let r = p.adjoint().apply(&f).unwrap();
        assert_eq!(r.dim(), 16);
        assert!(r.values().iter().all(|&v| v == 1.0));
    }
}
