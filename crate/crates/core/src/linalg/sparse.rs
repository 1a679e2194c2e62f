use crate::error::{Error, Result};
use crate::grid::{DofSpace, Field};
use nalgebra::DMatrix;
use std::io::Write;
use std::sync::Arc;

/// Compressed-row sparse matrix mapping `domain` into `codomain`.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    name: String,
    domain: Arc<DofSpace>,
    codomain: Arc<DofSpace>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        name: impl Into<String>,
        domain: Arc<DofSpace>,
        codomain: Arc<DofSpace>,
        triplets: &[(usize, usize, f64)],
    ) -> Result<SparseOperator> {
        let (m, n) = (codomain.dim(), domain.dim());
        let mut counts = vec![0usize; m + 1];
        for &(r, c, _) in triplets {
            if r >= m || c >= n {
                return Err(Error::InvalidArgument(format!(
                    "entry ({r},{c}) outside {m}×{n} operator"
                )));
            }
            counts[r + 1] += 1;
        }
        for r in 0..m {
            counts[r + 1] += counts[r];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        }
        // sort each row and merge duplicates
        let mut row_ptr = vec![0usize; m + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..m {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    col_idx.push(c);
                    out_vals.push(v);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Ok(SparseOperator {
            name: name.into(),
            domain,
            codomain,
            row_ptr,
            col_idx,
            vals: out_vals,
        })
    }

    /// Identity on `space`.
    pub fn identity(space: Arc<DofSpace>) -> SparseOperator {
        let t: Vec<_> = (0..space.dim()).map(|i| (i, i, 1.0)).collect();
        SparseOperator::from_triplets("I", space.clone(), space, &t).expect("valid identity")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> SparseOperator {
        self.name = name.into();
        self
    }

    pub fn domain(&self) -> &Arc<DofSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<DofSpace> {
        &self.codomain
    }

    pub fn nrows(&self) -> usize {
        self.codomain.dim()
    }

    pub fn ncols(&self) -> usize {
        self.domain.dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_square_on_one_space(&self) -> bool {
        self.domain.ensure_same(&self.codomain).is_ok()
    }

    /// Stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows())
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|e| e.0 == c).map(|e| e.1).unwrap_or(0.0)
    }

    /// `y = M x` on raw slices.
    pub fn apply_slice(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols());
        debug_assert_eq!(y.len(), self.nrows());
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            *out = s;
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply_slice(x, &mut y);
        y
    }

    pub fn apply(&self, x: &Field) -> Result<Field> {
        self.domain.ensure_same(x.space())?;
        Field::new(self.codomain.clone(), self.apply_vec(x.values()))
    }

    /// Weighted transpose: `⟨M u, v⟩_codomain = ⟨u, M* v⟩_domain`.
    pub fn adjoint(&self) -> SparseOperator {
        let wd = self.domain.weights();
        let wc = self.codomain.weights();
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v * wc[r] / wd[c]))
            .collect();
        SparseOperator::from_triplets(
            format!("{}*", self.name),
            self.codomain.clone(),
            self.domain.clone(),
            &t,
        )
        .expect("transpose of a valid operator")
    }

    /// `self ∘ inner`; needs `codomain(inner) = domain(self)`.
    pub fn compose(&self, inner: &SparseOperator) -> Result<SparseOperator> {
        self.domain.ensure_same(&inner.codomain)?;
        let mut t = Vec::new();
        let mut acc = vec![0.0; inner.ncols()];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; inner.ncols()];
        for r in 0..self.nrows() {
            for (k, a) in self.row(r) {
                for (c, b) in inner.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                t.push((r, c, acc[c]));
                acc[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
        }
        SparseOperator::from_triplets(
            format!("{}∘{}", self.name, inner.name),
            inner.domain.clone(),
            self.codomain.clone(),
            &t,
        )
    }

    /// `a·self + b·other` on identical spaces.
    pub fn combine(&self, a: f64, other: &SparseOperator, b: f64) -> Result<SparseOperator> {
        self.domain.ensure_same(&other.domain)?;
        self.codomain.ensure_same(&other.codomain)?;
        let mut t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (r, c, a * v)).collect();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, b * v)));
        SparseOperator::from_triplets(
            self.name.clone(),
            self.domain.clone(),
            self.codomain.clone(),
            &t,
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// `W_c^{1/2} M W_d^{-1/2}`, whose plain transpose is the weighted adjoint.
    pub fn to_dense_balanced(&self) -> DMatrix<f64> {
        let wd = self.domain.weights();
        let wc = self.codomain.weights();
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v * (wc[r] / wd[c]).sqrt();
        }
        m
    }

    /// Largest absolute entry, zero for an empty operator.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spectral norm estimate by power iteration on `M* M`.
    pub fn norm_estimate(&self, iterations: usize) -> f64 {
        let n = self.ncols();
        if n == 0 || self.nnz() == 0 {
            return 0.0;
        }
        let wd = self.domain.weights().to_vec();
        let wc = self.codomain.weights().to_vec();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut sigma = 0.0;
        let adj = self.adjoint();
        for _ in 0..iterations {
            let nx = crate::grid::wdot(&wd, &x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            let y = self.apply_vec(&x);
            sigma = crate::grid::wdot(&wc, &y, &y).sqrt();
            x = adj.apply_vec(&y);
        }
        sigma
    }

    /// Coordinate-triplet dump with a header naming the spaces.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# operator {}", self.name)?;
        writeln!(out, "# domain {} {}", self.domain.name(), self.domain.dim())?;
        writeln!(out, "# codomain {} {}", self.codomain.name(), self.codomain.dim())?;
        writeln!(out, "# nnz {}", self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}
