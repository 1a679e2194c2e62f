use super::dense::{fix_sign, symmetric_eigen, DENSE_LIMIT};
use super::krylov::{cg_core, orthonormalize, project_out, SolverConfig};
use super::sparse::SparseOperator;
use crate::error::{Error, Result};
use crate::grid::{wdot, Field};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalue with its weighted-unit eigenvector.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Field,
    /// `‖M v − λ v‖ / λ`, recomputed from the returned pair.
    pub residual: f64,
}

/// The `count` smallest eigenpairs of `M` on the complement of `kernel`.
///
/// Dimensions up to [`DENSE_LIMIT`] use a dense symmetric eigensolver;
/// larger ones run Lanczos on `M⁻¹` with inner (deflated) CG solves.
pub fn smallest_eigenpairs(
    m: &SparseOperator,
    count: usize,
    kernel: &[Field],
    cfg: &SolverConfig,
) -> Result<Vec<EigenPair>> {
    cfg.validate()?;
    m.domain().ensure_same(m.codomain())?;
    for k in kernel {
        m.domain().ensure_same(k.space())?;
    }
    let w = m.domain().weights();
    let kb = orthonormalize(&kernel.iter().map(|k| k.values().to_vec()).collect::<Vec<_>>(), w);
    let n = m.ncols();
    if count == 0 || count + kb.len() > n {
        return Err(Error::InvalidArgument(format!(
            "cannot return {count} eigenpairs from a {n}-dimensional space with {} kernel vectors",
            kb.len()
        )));
    }
    let pairs = if n <= DENSE_LIMIT {
        dense_pairs(m, count, &kb)
    } else {
        lanczos_inverse(m, count, &kb, cfg)?
    };
    pairs
        .into_iter()
        .map(|(value, v)| {
            let mv = m.apply_vec(&v);
            let r: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a - value * b).collect();
            let rn = m.domain().norm(&r);
            let residual = if value != 0.0 { rn / value.abs() } else { rn };
            Ok(EigenPair {
                value,
                vector: Field::new(m.domain().clone(), v)?,
                residual,
            })
        })
        .collect()
}

fn dense_pairs(m: &SparseOperator, count: usize, kb: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    let n = m.ncols();
    let w = m.domain().weights();
    let s = m.to_dense_balanced();
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    // orthonormal basis Q of the complement of the (balanced) kernel
    let q = if kb.is_empty() {
        DMatrix::identity(n, n)
    } else {
        let mut p = DMatrix::identity(n, n);
        for k in kb {
            let kt = DVector::from_iterator(n, k.iter().zip(&sqrt_w).map(|(a, b)| a * b));
            p -= &kt * kt.transpose();
        }
        let cols: Vec<DVector<f64>> = symmetric_eigen(&p)
            .into_iter()
            .filter(|(l, _)| *l > 0.5)
            .map(|(_, v)| v)
            .collect();
        DMatrix::from_columns(&cols)
    };
    let t = q.transpose() * &s * &q;
    symmetric_eigen(&t)
        .into_iter()
        .take(count)
        .map(|(l, y)| {
            let v = fix_sign(&q * y);
            let x: Vec<f64> = v.iter().zip(&sqrt_w).map(|(a, b)| a / b).collect();
            (l, x)
        })
        .collect()
}

/// Lanczos with full reorthogonalization on `M⁻¹` restricted to `kb^⊥`.
fn lanczos_inverse(
    m: &SparseOperator,
    count: usize,
    kb: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = m.ncols();
    let w = m.domain().weights();
    let inner_tol = (cfg.rel_tolerance * 1e-2).max(1e-13);
    let outer_tol = cfg.rel_tolerance.max(1e-11);
    let cap = cfg.max_iterations.unwrap_or(20 * n);
    let apply = |x: &[f64], y: &mut [f64]| m.apply_slice(x, y);
    let max_steps = (n - kb.len()).min(300);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    project_out(&mut q0, kb, w);
    let nq = wdot(w, &q0, &q0).sqrt();
    q0.iter_mut().for_each(|x| *x /= nq);

    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut ritz: Vec<(f64, DVector<f64>)> = Vec::new();
    for j in 0..max_steps {
        let (mut z, _) = cg_core(&apply, w, &basis[j], inner_tol, cap, kb)?;
        let a = wdot(w, &basis[j], &z);
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = wdot(w, &z, q);
                z.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            project_out(&mut z, kb, w);
        }
        let b = wdot(w, &z, &z).sqrt();
        let k = alpha.len();
        if k >= count && (k.is_multiple_of(5) || b < 1e-14 * a.abs() || k == max_steps) {
            let mut t = DMatrix::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alpha[i];
                if i + 1 < k {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let mut pairs = symmetric_eigen(&t);
            pairs.reverse(); // largest θ first
            ritz = pairs.into_iter().take(count).collect();
            let done = ritz.iter().all(|(theta, s)| (b * s[k - 1]).abs() <= outer_tol * theta.abs());
            if done || b < 1e-14 * a.abs() {
                break;
            }
        }
        if j + 1 == max_steps {
            return Err(Error::NonConvergence {
                iterations: k,
                residual: b,
                history: Vec::new(),
            });
        }
        beta.push(b);
        z.iter_mut().for_each(|x| *x /= b);
        basis.push(z);
    }
    let k = alpha.len();
    let mut out = Vec::with_capacity(count);
    for (_, s) in ritz {
        let mut v = vec![0.0; n];
        for i in 0..k {
            v.iter_mut().zip(&basis[i]).for_each(|(x, q)| *x += s[i] * q);
        }
        project_out(&mut v, kb, w);
        let nv = wdot(w, &v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let fixed = fix_sign(DVector::from_vec(v));
        let v: Vec<f64> = fixed.iter().copied().collect();
        let rq = wdot(w, &m.apply_vec(&v), &v);
        out.push((rq, v));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DofSpace;

    #[test]
    fn diagonal_pairs() {
        let s = DofSpace::euclidean("E", 3);
        let m = SparseOperator::from_triplets("D", s.clone(), s, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)])
            .unwrap();
        let p = smallest_eigenpairs(&m, 2, &[], &SolverConfig::default()).unwrap();
        assert!((p[0].value - 1.0).abs() < 1e-14);
        assert!((p[1].value - 2.0).abs() < 1e-14);
        assert!((p[0].vector.values()[0] - 1.0).abs() < 1e-14);
        assert!((p[1].vector.values()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn too_many_requested() {
        let s = DofSpace::euclidean("E", 2);
        let m = SparseOperator::identity(s);
        assert!(smallest_eigenpairs(&m, 3, &[], &SolverConfig::default()).is_err());
    }

    fn path_laplacian(n: usize) -> SparseOperator {
        let s = DofSpace::euclidean("P", n);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseOperator::from_triplets("T", s.clone(), s, &t).unwrap()
    }

    #[test]
    fn lanczos_matches_closed_form() {
        // 1D Dirichlet path: λ_k = 2 − 2 cos(kπ/(n+1))
        let n = 600;
        let m = path_laplacian(n);
        let p = smallest_eigenpairs(&m, 3, &[], &SolverConfig::default()).unwrap();
        for (k, pair) in p.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((pair.value - exact).abs() <= 1e-8 * exact, "{} vs {}", pair.value, exact);
        }
    }
}
