//! Thin wrappers over faer for the dense Hermitian problems that appear per
//! fiber, plus a few small helpers for Gram matrices.

use crate::error::{Error, Result};
use faer::{Mat, Par, Side};
use num_complex::Complex64 as C64;
use std::sync::Once;

static INIT: Once = Once::new();

/// faer runs single-threaded; parallelism lives one level up (stencil points,
/// base samples), which keeps every eigensolve bitwise reproducible.
pub fn init() {
    INIT.call_once(|| faer::set_global_parallelism(Par::Seq));
}

pub type DMat = Mat<C64>;

pub fn from_columns(rows: usize, cols: &[Vec<C64>]) -> DMat {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

pub fn column(m: &DMat, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn adjoint(m: &DMat) -> DMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn mul(a: &DMat, b: &DMat) -> DMat {
    init();
    a * b
}

/// Eigenpairs of a Hermitian matrix, ascending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: DMat,
}

pub fn herm_eig(m: &DMat) -> Result<HermEig> {
    init();
    let n = m.nrows();
    // symmetrize against roundoff before handing to the solver
    let h = Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let e = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = e.S().column_vector();
    let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let vectors = e.U().to_owned();
    Ok(HermEig { values, vectors })
}

pub fn herm_eigenvalues(m: &DMat) -> Result<Vec<f64>> {
    init();
    let n = m.nrows();
    let h = Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let v = h.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(v)
}

/// Solve a small dense system A x = b (column vector).
pub fn solve(a: &[Vec<C64>], b: &[C64]) -> Result<Vec<C64>> {
    init();
    let n = a.len();
    let am = Mat::from_fn(n, n, |i, j| a[i][j]);
    let bm = Mat::from_fn(n, 1, |i, _| b[i]);
    let lu = am.partial_piv_lu();
    let x = faer::linalg::solvers::Solve::solve(&lu, &bm);
    let out: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Linalg("singular system".into()));
    }
    Ok(out)
}

/// Least-squares solution of an overdetermined A x = b via the normal
/// equations with an SVD-free pseudo-inverse (A is tall and well conditioned
/// wherever this is used).
pub fn lstsq(a: &[Vec<C64>], b: &[C64]) -> Result<Vec<C64>> {
    let rows = a.len();
    let cols = a[0].len();
    let mut ata = vec![vec![C64::new(0.0, 0.0); cols]; cols];
    let mut atb = vec![C64::new(0.0, 0.0); cols];
    for r in 0..rows {
        for i in 0..cols {
            atb[i] += a[r][i].conj() * b[r];
            for j in 0..cols {
                ata[i][j] += a[r][i].conj() * a[r][j];
            }
        }
    }
    solve(&ata, &atb)
}

/// Small dense complex matrices as nested rows (r ≤ a handful).
pub type Small = Vec<Vec<C64>>;

pub fn small_zeros(r: usize, c: usize) -> Small {
    vec![vec![C64::new(0.0, 0.0); c]; r]
}

pub fn small_identity(r: usize) -> Small {
    let mut m = small_zeros(r, r);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C64::new(1.0, 0.0);
    }
    m
}

pub fn small_mul(a: &Small, b: &Small) -> Small {
    let (r, k, c) = (a.len(), b.len(), b.first().map_or(0, |x| x.len()));
    let mut m = small_zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            m[i][j] = (0..k).map(|l| a[i][l] * b[l][j]).sum();
        }
    }
    m
}

pub fn small_adjoint(a: &Small) -> Small {
    let (r, c) = (a.len(), a.first().map_or(0, |x| x.len()));
    let mut m = small_zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            m[j][i] = a[i][j].conj();
        }
    }
    m
}

pub fn small_add(a: &Small, b: &Small, s: C64) -> Small {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + s * q).collect()).collect()
}

pub fn small_scale(a: &Small, s: C64) -> Small {
    a.iter().map(|x| x.iter().map(|p| p * s).collect()).collect()
}

pub fn small_inverse(a: &Small) -> Result<Small> {
    let n = a.len();
    let mut out = small_zeros(n, n);
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let x = solve(a, &e)?;
        for i in 0..n {
            out[i][j] = x[i];
        }
    }
    Ok(out)
}

pub fn small_max_abs(a: &Small) -> f64 {
    a.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a small Hermitian matrix.
pub fn small_min_eig(a: &Small) -> Result<f64> {
    let n = a.len();
    let m = Mat::from_fn(n, n, |i, j| a[i][j]);
    Ok(herm_eigenvalues(&m)?.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenpairs_of_two_by_two() {
        let m = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => C64::new(2.0, 0.0),
            (1, 1) => C64::new(2.0, 0.0),
            (0, 1) => C64::new(0.0, 1.0),
            _ => C64::new(0.0, -1.0),
        });
        let e = herm_eig(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);
        let v = column(&e.vectors, 0);
        let mv: Vec<C64> = (0..2).map(|i| (0..2).map(|k| m[(i, k)] * v[k]).sum()).collect();
        assert!((mv[0] - v[0]).norm() < 1e-13 && (mv[1] - v[1]).norm() < 1e-13);
    }

    #[test]
    fn small_solve_and_inverse() {
        let a = vec![vec![C64::new(3.0, 0.0), C64::new(1.0, 1.0)], vec![C64::new(1.0, -1.0), C64::new(2.0, 0.0)]];
        let inv = small_inverse(&a).unwrap();
        let p = small_mul(&a, &inv);
        assert!((small_add(&p, &small_identity(2), C64::new(-1.0, 0.0))).iter().flatten().all(|v| v.norm() < 1e-14));
        let x = lstsq(&a, &[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        let y = solve(&a, &[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        assert!((x[0] - y[0]).norm() < 1e-12 && (x[1] - y[1]).norm() < 1e-12);
    }
}
