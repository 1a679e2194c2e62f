//! Masked cell grids, DOF spaces and weighted fields.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet, VecDeque};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Outward direction of a face, seen from the owning cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::PlusX, Dir::MinusX, Dir::PlusY, Dir::MinusY];

    pub fn offset(self) -> (i64, i64) {
        match self {
            Dir::PlusX => (1, 0),
            Dir::MinusX => (-1, 0),
            Dir::PlusY => (0, 1),
            Dir::MinusY => (0, -1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dir::PlusX => "+x",
            Dir::MinusX => "-x",
            Dir::PlusY => "+y",
            Dir::MinusY => "-y",
        }
    }

    pub fn parse(s: &str) -> Result<Dir> {
        match s {
            "+x" => Ok(Dir::PlusX),
            "-x" => Ok(Dir::MinusX),
            "+y" => Ok(Dir::PlusY),
            "-y" => Ok(Dir::MinusY),
            _ => Err(Error::InvalidArgument(format!("unknown face direction '{s}'"))),
        }
    }
}

/// Boundary condition carried by a boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

impl Bc {
    pub fn as_str(self) -> &'static str {
        match self {
            Bc::Dirichlet => "dirichlet",
            Bc::Neumann => "neumann",
        }
    }

    pub fn parse(s: &str) -> Result<Bc> {
        match s {
            "dirichlet" => Ok(Bc::Dirichlet),
            "neumann" => Ok(Bc::Neumann),
            _ => Err(Error::InvalidArgument(format!("unknown boundary condition '{s}'"))),
        }
    }
}

/// Axis of an interior face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Face between two cells; `b` is the `+axis` neighbour of `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteriorFace {
    pub a: usize,
    pub b: usize,
    pub axis: Axis,
}

/// Face between a cell and the exterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub dir: Dir,
}

/// Shape descriptor accepted by [`GridDomain::build`].
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Unit square, `n × n` cells.
    Square,
    /// `width × height` units.
    Rectangle { width: usize, height: usize },
    /// Unit square minus its top-right quadrant.
    LShape,
    /// Unit square minus a centred block of side `max(n/4, 1)` cells.
    Annulus,
    /// Explicit cell coordinates; `n` only fixes the cell width.
    Mask(Vec<(i64, i64)>),
}

/// Boundary-label rule, applied in order (later rules win).
#[derive(Clone, Debug, PartialEq)]
pub enum LabelRule {
    All(Bc),
    /// Every boundary face with the given outward direction.
    Side(Dir, Bc),
    /// One face; must be a boundary face.
    Face { cell: (i64, i64), dir: Dir, bc: Bc },
}

/// Named DOF space with positive inner-product weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DofSpace {
    name: String,
    weights: Vec<f64>,
    /// Identifies the grid the space was built on.
    origin: u64,
}

impl DofSpace {
    pub fn new(name: impl Into<String>, weights: Vec<f64>, origin: u64) -> Result<Arc<DofSpace>> {
        if weights.iter().any(|w| w.is_nan() || *w <= 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument("space weights must be positive".into()));
        }
        Ok(Arc::new(DofSpace {
            name: name.into(),
            weights,
            origin,
        }))
    }

    /// Space with `dim` unit weights, for small algebraic tests.
    pub fn euclidean(name: impl Into<String>, dim: usize) -> Arc<DofSpace> {
        Arc::new(DofSpace {
            name: name.into(),
            weights: vec![1.0; dim],
            origin: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn origin(&self) -> u64 {
        self.origin
    }

    pub fn describe(&self) -> String {
        format!("{}[{}]", self.name, self.dim())
    }

    /// Errors unless `other` is the same space.
    pub fn ensure_same(&self, other: &DofSpace) -> Result<()> {
        if std::ptr::eq(self, other) || self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                expected: self.describe(),
                found: other.describe(),
            })
        }
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        wdot(&self.weights, a, b)
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }
}

/// Weighted inner product `Σ w_i a_i b_i`.
pub fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Vector of values living in a [`DofSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    space: Arc<DofSpace>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(space: Arc<DofSpace>, values: Vec<f64>) -> Result<Field> {
        if values.len() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "field of length {} does not fit space {}",
                values.len(),
                space.describe()
            )));
        }
        Ok(Field { space, values })
    }

    pub fn zeros(space: Arc<DofSpace>) -> Field {
        let values = vec![0.0; space.dim()];
        Field { space, values }
    }

    pub fn constant(space: Arc<DofSpace>, c: f64) -> Field {
        let values = vec![c; space.dim()];
        Field { space, values }
    }

    pub fn space(&self) -> &Arc<DofSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.space.ensure_same(&other.space)?;
        Ok(self.space.dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        self.space.norm(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Field) -> Result<Field> {
        self.space.ensure_same(&other.space)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(Field {
            space: self.space.clone(),
            values,
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.add_scaled(-1.0, other)
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            space: self.space.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }
}

/// Masked uniform cell grid with boundary labels and depth rings.
#[derive(Clone, Debug)]
pub struct GridDomain {
    h: f64,
    cells: Vec<(i64, i64)>,
    index: HashMap<(i64, i64), usize>,
    interior_faces: Vec<InteriorFace>,
    boundary_faces: Vec<BoundaryFace>,
    labels: Vec<Bc>,
    depth: Vec<usize>,
    components: usize,
    component_of: Vec<usize>,
    holes: usize,
    diameter: f64,
    anomalies: Vec<String>,
    fingerprint: u64,
    rings: [Arc<DofSpace>; 3],
    ring_cells: [Vec<usize>; 3],
}

impl GridDomain {
    /// Builds a domain with `n` cells per unit length.
    pub fn build(shape: &Shape, n: usize, rules: &[LabelRule]) -> Result<GridDomain> {
        if n < 2 {
            return Err(Error::InvalidDomain(format!("n must be at least 2, got {n}")));
        }
        let n64 = n as i64;
        let cells: Vec<(i64, i64)> = match shape {
            Shape::Square => grid_cells(n64, n64, |_, _| true),
            Shape::Rectangle { width, height } => {
                grid_cells(*width as i64 * n64, *height as i64 * n64, |_, _| true)
            }
            Shape::LShape => {
                if !n.is_multiple_of(2) {
                    return Err(Error::InvalidDomain("L-shape needs an even n".into()));
                }
                let m = n64 / 2;
                grid_cells(n64, n64, |i, j| !(i >= m && j >= m))
            }
            Shape::Annulus => {
                if n < 4 {
                    return Err(Error::InvalidDomain("annulus needs n ≥ 4".into()));
                }
                let k = (n64 / 4).max(1);
                let o = (n64 - k) / 2;
                grid_cells(n64, n64, |i, j| !(i >= o && i < o + k && j >= o && j < o + k))
            }
            Shape::Mask(cells) => cells.clone(),
        };
        GridDomain::from_cells(1.0 / n as f64, cells, rules)
    }

    /// Builds a domain from explicit cells of width `h`.
    pub fn from_cells(h: f64, cells: Vec<(i64, i64)>, rules: &[LabelRule]) -> Result<GridDomain> {
        if h.is_nan() || h <= 0.0 || !h.is_finite() {
            return Err(Error::InvalidDomain(format!("cell width must be positive, got {h}")));
        }
        let mut cells = cells;
        cells.sort_by_key(|&(i, j)| (j, i));
        cells.dedup();
        if cells.is_empty() {
            return Err(Error::EmptyDomain("mask has no cells".into()));
        }
        let index: HashMap<(i64, i64), usize> =
            cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();

        let mut interior_faces = Vec::new();
        let mut boundary_faces = Vec::new();
        for (k, &(i, j)) in cells.iter().enumerate() {
            if let Some(&b) = index.get(&(i + 1, j)) {
                interior_faces.push(InteriorFace { a: k, b, axis: Axis::X });
            }
            if let Some(&b) = index.get(&(i, j + 1)) {
                interior_faces.push(InteriorFace { a: k, b, axis: Axis::Y });
            }
            for dir in Dir::ALL {
                let (di, dj) = dir.offset();
                if !index.contains_key(&(i + di, j + dj)) {
                    boundary_faces.push(BoundaryFace { cell: k, dir });
                }
            }
        }

        let mut labels = vec![Bc::Dirichlet; boundary_faces.len()];
        for rule in rules {
            match *rule {
                LabelRule::All(bc) => labels.iter_mut().for_each(|l| *l = bc),
                LabelRule::Side(dir, bc) => {
                    for (f, l) in boundary_faces.iter().zip(labels.iter_mut()) {
                        if f.dir == dir {
                            *l = bc;
                        }
                    }
                }
                LabelRule::Face { cell, dir, bc } => {
                    let pos = index.get(&cell).and_then(|&c| {
                        boundary_faces.iter().position(|f| f.cell == c && f.dir == dir)
                    });
                    match pos {
                        Some(p) => labels[p] = bc,
                        None => {
                            return Err(Error::NotABoundaryFace {
                                i: cell.0,
                                j: cell.1,
                                dir: dir.as_str().into(),
                            })
                        }
                    }
                }
            }
        }

        // depth by multi-source BFS from cells owning a boundary face
        let mut depth = vec![usize::MAX; cells.len()];
        let mut queue = VecDeque::new();
        for f in &boundary_faces {
            if depth[f.cell] != 0 {
                depth[f.cell] = 0;
                queue.push_back(f.cell);
            }
        }
        while let Some(c) = queue.pop_front() {
            let (i, j) = cells[c];
            for dir in Dir::ALL {
                let (di, dj) = dir.offset();
                if let Some(&nb) = index.get(&(i + di, j + dj)) {
                    if depth[nb] == usize::MAX {
                        depth[nb] = depth[c] + 1;
                        queue.push_back(nb);
                    }
                }
            }
        }

        let component_of = label_components(&cells, &index);
        let components = component_of.iter().max().map_or(0, |m| m + 1);
        let holes = count_holes(&cells, &index);
        let diameter = corner_diameter(&cells, &depth, h);
        let anomalies = find_anomalies(&cells, &index, components);

        let mut hasher = DefaultHasher::new();
        h.to_bits().hash(&mut hasher);
        cells.hash(&mut hasher);
        let fingerprint = hasher.finish();

        let ring_cells: [Vec<usize>; 3] = std::array::from_fn(|k| {
            (0..cells.len()).filter(|&c| depth[c] >= k).collect::<Vec<_>>()
        });
        let rings: [Arc<DofSpace>; 3] = std::array::from_fn(|k| {
            Arc::new(DofSpace {
                name: format!("C{k}"),
                weights: vec![h * h; ring_cells[k].len()],
                origin: fingerprint,
            })
        });

        Ok(GridDomain {
            h,
            cells,
            index,
            interior_faces,
            boundary_faces,
            labels,
            depth,
            components,
            component_of,
            holes,
            diameter,
            anomalies,
            fingerprint,
            rings,
            ring_cells,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Cells in row-major order (row `j` outer, column `i` inner).
    pub fn cells(&self) -> &[(i64, i64)] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_index(&self, i: i64, j: i64) -> Option<usize> {
        self.index.get(&(i, j)).copied()
    }

    pub fn center(&self, c: usize) -> (f64, f64) {
        let (i, j) = self.cells[c];
        ((i as f64 + 0.5) * self.h, (j as f64 + 0.5) * self.h)
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior_faces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn label(&self, face: usize) -> Bc {
        self.labels[face]
    }

    pub fn labels(&self) -> &[Bc] {
        &self.labels
    }

    pub fn depth(&self, c: usize) -> usize {
        self.depth[c]
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Component index of each cell.
    pub fn component_of(&self, c: usize) -> usize {
        self.component_of[c]
    }

    /// Indicator functions of the components (the kernel of the Neumann Laplacian).
    pub fn component_indicators(&self) -> Vec<Field> {
        (0..self.components)
            .map(|k| {
                let values = self
                    .component_of
                    .iter()
                    .map(|&c| if c == k { 1.0 } else { 0.0 })
                    .collect();
                Field {
                    space: self.cell_space(),
                    values,
                }
            })
            .collect()
    }

    pub fn holes(&self) -> usize {
        self.holes
    }

    /// Exact diameter of the closed cell union.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Non-fatal irregularities, such as cells touching only at a corner.
    pub fn anomalies(&self) -> &[String] {
        &self.anomalies
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// The space `C_k` of cells with depth at least `k`, for `k ≤ 2`.
    pub fn ring_space(&self, k: usize) -> Result<Arc<DofSpace>> {
        self.rings
            .get(k)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("ring index {k} out of range 0..=2")))
    }

    /// Indices into `C_0` of the cells in `C_k`, in row-major order.
    pub fn ring_cells(&self, k: usize) -> Result<&[usize]> {
        self.ring_cells
            .get(k)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("ring index {k} out of range 0..=2")))
    }

    /// Ambient cell space `C_0`.
    pub fn cell_space(&self) -> Arc<DofSpace> {
        self.rings[0].clone()
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = (0..self.num_cells())
            .map(|c| {
                let (x, y) = self.center(c);
                f(x, y)
            })
            .collect();
        Field {
            space: self.cell_space(),
            values,
        }
    }

    /// Serializable description; only Neumann labels are listed.
    pub fn to_file(&self) -> DomainFile {
        let labels = self
            .boundary_faces
            .iter()
            .zip(&self.labels)
            .filter(|(_, bc)| **bc == Bc::Neumann)
            .map(|(f, bc)| {
                let (i, j) = self.cells[f.cell];
                LabelEntry {
                    cell: [i, j],
                    dir: f.dir.as_str().into(),
                    bc: bc.as_str().into(),
                }
            })
            .collect();
        DomainFile {
            h: self.h,
            cells: self.cells.iter().map(|&(i, j)| [i, j]).collect(),
            labels,
        }
    }

    pub fn from_file(file: &DomainFile) -> Result<GridDomain> {
        let mut rules = Vec::with_capacity(file.labels.len());
        for l in &file.labels {
            rules.push(LabelRule::Face {
                cell: (l.cell[0], l.cell[1]),
                dir: Dir::parse(&l.dir)?,
                bc: Bc::parse(&l.bc)?,
            });
        }
        let cells = file.cells.iter().map(|c| (c[0], c[1])).collect();
        GridDomain::from_cells(file.h, cells, &rules)
    }
}

/// On-disk domain description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainFile {
    pub h: f64,
    pub cells: Vec<[i64; 2]>,
    #[serde(default)]
    pub labels: Vec<LabelEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub cell: [i64; 2],
    pub dir: String,
    pub bc: String,
}

fn grid_cells(w: i64, h: i64, keep: impl Fn(i64, i64) -> bool) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for j in 0..h {
        for i in 0..w {
            if keep(i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

fn label_components(cells: &[(i64, i64)], index: &HashMap<(i64, i64), usize>) -> Vec<usize> {
    let mut label = vec![usize::MAX; cells.len()];
    let mut count = 0;
    for start in 0..cells.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            let (i, j) = cells[c];
            for dir in Dir::ALL {
                let (di, dj) = dir.offset();
                if let Some(&nb) = index.get(&(i + di, j + dj)) {
                    if label[nb] == usize::MAX {
                        label[nb] = count;
                        stack.push(nb);
                    }
                }
            }
        }
        count += 1;
    }
    label
}

/// Components of the complement inside the padded bounding box, minus the outer one.
fn count_holes(cells: &[(i64, i64)], index: &HashMap<(i64, i64), usize>) -> usize {
    let imin = cells.iter().map(|c| c.0).min().unwrap() - 1;
    let imax = cells.iter().map(|c| c.0).max().unwrap() + 1;
    let jmin = cells.iter().map(|c| c.1).min().unwrap() - 1;
    let jmax = cells.iter().map(|c| c.1).max().unwrap() + 1;
    let mut seen: HashSet<(i64, i64)> = HashSet::new();
    let mut regions = 0;
    for j in jmin..=jmax {
        for i in imin..=imax {
            if index.contains_key(&(i, j)) || seen.contains(&(i, j)) {
                continue;
            }
            regions += 1;
            seen.insert((i, j));
            let mut stack = vec![(i, j)];
            while let Some((a, b)) = stack.pop() {
                for dir in Dir::ALL {
                    let (di, dj) = dir.offset();
                    let p = (a + di, b + dj);
                    if p.0 < imin || p.0 > imax || p.1 < jmin || p.1 > jmax {
                        continue;
                    }
                    if !index.contains_key(&p) && seen.insert(p) {
                        stack.push(p);
                    }
                }
            }
        }
    }
    regions - 1
}

/// Farthest pair of points of the union is a pair of corners of boundary cells.
fn corner_diameter(cells: &[(i64, i64)], depth: &[usize], h: f64) -> f64 {
    let mut corners: Vec<(i64, i64)> = cells
        .iter()
        .zip(depth)
        .filter(|(_, &d)| d == 0)
        .flat_map(|(&(i, j), _)| [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)])
        .collect();
    corners.sort_unstable();
    corners.dedup();
    let mut best: i64 = 0;
    for (k, a) in corners.iter().enumerate() {
        for b in &corners[k + 1..] {
            let (dx, dy) = (a.0 - b.0, a.1 - b.1);
            best = best.max(dx * dx + dy * dy);
        }
    }
    (best as f64).sqrt() * h
}

fn find_anomalies(
    cells: &[(i64, i64)],
    index: &HashMap<(i64, i64), usize>,
    components: usize,
) -> Vec<String> {
    let mut out = Vec::new();
    if components > 1 {
        out.push(format!("mask has {components} face-connected components"));
    }
    for &(i, j) in cells {
        for (di, dj) in [(1, 1), (1, -1)] {
            if index.contains_key(&(i + di, j + dj))
                && !index.contains_key(&(i + di, j))
                && !index.contains_key(&(i, j + dj))
            {
                out.push(format!(
                    "cells ({i},{j}) and ({},{}) touch only at a corner",
                    i + di,
                    j + dj
                ));
            }
        }
    }
    out
}
