//! Lowest-eigenpair solvers for real symmetric Pauli sums.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{HamiltonianSpec, PauliSum};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::statevec::StateVector;

/// Chains up to this length use the dense solver under [`Solver::Auto`].
pub const DENSE_MAX_SITES: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Convergence target on the residual estimate, relative to max(1, |E|).
    pub tol: f64,
    /// Largest accepted true residual ‖Hψ − Eψ‖.
    pub accept: f64,
    pub check_every: usize,
}

impl LanczosOptions {
    pub fn for_precision<T: Real>() -> Self {
        Self {
            max_iter: 600,
            tol: T::SOLVER_TOL,
            accept: T::SOLVER_TOL * 10.0,
            check_every: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult<T> {
    pub value: T,
    pub vector: Vec<T>,
    /// Distance from the lowest to the second Ritz value, when one exists.
    pub gap: Option<T>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    y.iter_mut().zip(x).for_each(|(yi, &xi)| *yi += alpha * xi);
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit QL
/// iterations with Wilkinson-style shifts.
///
/// `diag` has length n and `off` length n − 1. Returns eigenvalues in
/// ascending order and, when requested, the matching eigenvectors as
/// columns of a row-major n×n matrix (`vectors[row][col]`).
pub fn tridiagonal_eigen<T: Real>(
    diag: &[T],
    off: &[T],
    want_vectors: bool,
) -> Result<(Vec<T>, Option<Vec<Vec<T>>>)> {
    let n = diag.len();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(Vec::new)));
    }
    if off.len() + 1 != n {
        return Err(Error::Dimension {
            expected: n - 1,
            actual: off.len(),
        });
    }
    let mut d = diag.to_vec();
    let mut e: Vec<T> = off.iter().copied().chain(std::iter::once(T::zero())).collect();
    let mut z: Vec<Vec<T>> = if want_vectors {
        (0..n)
            .map(|r| (0..n).map(|c| if r == c { T::one() } else { T::zero() }).collect())
            .collect()
    } else {
        Vec::new()
    };
    let two = T::lit(2.0);
    let eps = T::epsilon();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Convergence {
                    iterations: iter,
                    residual: e[l].abs().as_f64(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let signed = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + signed);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if want_vectors {
                    for row in z.iter_mut() {
                        let f = row[i + 1];
                        row[i + 1] = s * row[i] + c * f;
                        row[i] = c * row[i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = want_vectors.then(|| {
        z.iter()
            .map(|row| order.iter().map(|&k| row[k]).collect())
            .collect()
    });
    Ok((values, vectors))
}

/// Lowest eigenpair of a real symmetric operator by Lanczos iteration with
/// full reorthogonalization, started from a seeded Gaussian vector.
pub fn lanczos_lowest<T, F>(
    op: F,
    dim: usize,
    seed: u64,
    opts: &LanczosOptions,
) -> Result<LanczosResult<T>>
where
    T: Real,
    F: Fn(&[T], &mut [T]) -> Result<()>,
{
    if dim == 0 {
        return Err(Error::Size("empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<T> = (0..dim)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= norm);

    let max_m = opts.max_iter.min(dim).max(1);
    let mut basis: Vec<Vec<T>> = vec![q];
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let mut w = vec![T::zero(); dim];
    let mut hpsi = vec![T::zero(); dim];
    let mut last_residual = f64::INFINITY;
    let breakdown = T::epsilon().sqrt().as_f64() * 1e-3;

    loop {
        let j = basis.len() - 1;
        op(&basis[j], &mut w)?;
        let a = dot(&basis[j], &w);
        alpha.push(a);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let o = dot(v, &w);
                axpy(-o, v, &mut w);
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = j + 1;
        let exhausted = b.as_f64() < breakdown || m == max_m;

        if m.is_multiple_of(opts.check_every) || exhausted {
            let (vals, vecs) = tridiagonal_eigen(&alpha, &beta, true)?;
            let vecs = vecs.expect("vectors requested");
            let theta = vals[0];
            let estimate = (b * vecs[m - 1][0].abs()).as_f64();
            if estimate < opts.tol * theta.abs().as_f64().max(1.0) || exhausted {
                let mut psi = vec![T::zero(); dim];
                for (k, v) in basis.iter().enumerate() {
                    axpy(vecs[k][0], v, &mut psi);
                }
                let pn = dot(&psi, &psi).sqrt();
                psi.iter_mut().for_each(|x| *x /= pn);
                op(&psi, &mut hpsi)?;
                let residual = hpsi
                    .iter()
                    .zip(&psi)
                    .map(|(&hx, &x)| {
                        let r = hx - theta * x;
                        r * r
                    })
                    .sum::<T>()
                    .sqrt()
                    .as_f64();
                last_residual = residual;
                if residual < opts.accept {
                    return Ok(LanczosResult {
                        value: theta,
                        vector: psi,
                        gap: (vals.len() > 1).then(|| vals[1] - vals[0]),
                        iterations: m,
                        residual,
                    });
                }
            }
        }
        if exhausted {
            return Err(Error::Convergence {
                iterations: m,
                residual: last_residual,
            });
        }
        beta.push(b);
        let inv = T::one() / b;
        basis.push(w.iter().map(|&x| x * inv).collect());
    }
}

/// Lowest eigenpair and gap of a cluster-Ising Hamiltonian.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector<f64>,
    pub gap: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Dense symmetric eigendecomposition of a real Pauli sum.
pub fn dense_ground_state(h: &PauliSum<f64>) -> Result<(f64, Vec<f64>, f64)> {
    let dim = h.dim();
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    let mut unit = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for b in 0..dim {
        unit[b] = 1.0;
        h.apply_real(&unit, &mut col)?;
        unit[b] = 0.0;
        mat.column_mut(b).copy_from_slice(&col);
    }
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lo = order[0];
    let gap = if dim > 1 {
        eig.eigenvalues[order[1]] - eig.eigenvalues[lo]
    } else {
        f64::INFINITY
    };
    Ok((eig.eigenvalues[lo], eig.eigenvectors.column(lo).iter().copied().collect(), gap))
}

/// Ground state of `spec`. The Lanczos start vector is drawn from `seed`;
/// the dense path ignores it. The returned vector is real with its
/// largest-magnitude amplitude positive.
pub fn ground_state(spec: &HamiltonianSpec, seed: u64, solver: Solver) -> Result<GroundState> {
    let h = spec.build_terms::<f64>()?;
    let use_dense = match solver {
        Solver::Dense => true,
        Solver::Lanczos => false,
        Solver::Auto => spec.n_sites <= DENSE_MAX_SITES,
    };
    let (energy, mut vec, gap, iterations) = if use_dense {
        let (e, v, g) = dense_ground_state(&h)?;
        (e, v, g, h.dim())
    } else {
        let r = lanczos_lowest(
            |x: &[f64], y: &mut [f64]| h.apply_real(x, y),
            h.dim(),
            seed,
            &LanczosOptions::for_precision::<f64>(),
        )?;
        (r.value, r.vector, r.gap.unwrap_or(f64::INFINITY), r.iterations)
    };

    let pivot = vec
        .iter()
        .copied()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        vec.iter_mut().for_each(|x| *x = -*x);
    }
    let state = StateVector::from_unnormalized(vec.iter().map(|&x| Complex::new(x, 0.0)).collect())?;
    let hv = h.matvec(&state)?;
    let residual = hv
        .iter()
        .zip(state.amplitudes())
        .map(|(a, b)| (a - b * energy).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if residual >= 1e-8 {
        return Err(Error::Convergence { iterations, residual });
    }
    Ok(GroundState {
        energy,
        state,
        gap,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 5, 17, 40] {
            let d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let e: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.sample(StandardNormal)).collect();
            let (vals, vecs) = tridiagonal_eigen(&d, &e, true).unwrap();
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = d[i];
                if i + 1 < n {
                    m[(i, i + 1)] = e[i];
                    m[(i + 1, i)] = e[i];
                }
            }
            let mut reference: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (a, b) in vals.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
            }
            let vecs = vecs.unwrap();
            for k in 0..n {
                let v = nalgebra::DVector::from_iterator(n, (0..n).map(|r| vecs[r][k]));
                let r = &m * &v - &v * vals[k];
                assert!(r.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lanczos_on_diagonal_operator() {
        let diag: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let lowest = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let r = lanczos_lowest(
            |x: &[f64], y: &mut [f64]| {
                y.iter_mut().zip(x).zip(&diag).for_each(|((yi, xi), di)| *yi = xi * di);
                Ok(())
            },
            diag.len(),
            3,
            &LanczosOptions::for_precision::<f64>(),
        )
        .unwrap();
        assert!((r.value - lowest).abs() < 1e-9);
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn lanczos_reports_nonconvergence() {
        let diag: Vec<f64> = (0..300).map(|i| i as f64 / 300.0).collect();
        let opts = LanczosOptions {
            max_iter: 4,
            ..LanczosOptions::for_precision::<f64>()
        };
        let err = lanczos_lowest(
            |x: &[f64], y: &mut [f64]| {
                y.iter_mut().zip(x).zip(&diag).for_each(|((yi, xi), di)| *yi = xi * di);
                Ok(())
            },
            diag.len(),
            1,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Convergence { iterations: 4, .. }));
    }

    #[test]
    fn small_chain_energy() {
        let spec = HamiltonianSpec::new(3, 0.0, 0.0).unwrap();
        for solver in [Solver::Dense, Solver::Lanczos] {
            let g = ground_state(&spec, 0, solver).unwrap();
            assert!((g.energy + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_lanczos_runs() {
        let spec = HamiltonianSpec::new(5, 0.4, 0.2).unwrap();
        let h32 = spec.build_terms::<f32>().unwrap();
        let r = lanczos_lowest(|x: &[f32], y: &mut [f32]| h32.apply_real(x, y), h32.dim(), 9, &LanczosOptions::for_precision::<f32>()).unwrap();
        let (e64, _, _) = dense_ground_state(&spec.build_terms::<f64>().unwrap()).unwrap();
        assert!((r.value as f64 - e64).abs() < 1e-3);
    }
}
