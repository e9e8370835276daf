//! Thin helpers over the dense backend.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

/// Inputs whose Hermitian deviation is below this are symmetrized, larger
/// deviations are rejected.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    Mat::from_fn(n, rows[0].len(), |i, j| c64::new(rows[i][j], 0.0))
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { c64::new(0.0, 0.0) })
}

/// Largest entry of `|M - M*|`.
pub fn hermitian_deviation(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(M + M*) / 2`
pub fn hermitian_part(m: MatRef<'_, c64>) -> CMat {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut out: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `M^p` by binary powering; `p = 0` gives the identity.
pub fn matrix_power(m: MatRef<'_, c64>, mut p: u32) -> CMat {
    let n = m.nrows();
    let mut result = identity(n);
    let mut base = m.to_owned();
    while p > 0 {
        if p & 1 == 1 {
            result = &result * &base;
        }
        p >>= 1;
        if p > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Checks Hermiticity within [`HERMITIAN_TOL`] and returns the symmetrized copy.
pub fn guarded_hermitian(m: MatRef<'_, c64>) -> Result<CMat> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(hermitian_part(m))
}

/// Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((vec![m[(0, 0)].re], identity(1)));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values = (0..n).map(|k| evd.S()[k].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)].re]);
    }
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// `U diag(f(lambda)) U*` for a matrix already known to be Hermitian.
pub fn apply_spectral<F>(m: MatRef<'_, c64>, mut f: F) -> Result<CMat>
where
    F: FnMut(f64) -> Result<f64>,
{
    let n = m.nrows();
    let (values, u) = hermitian_eigen(m)?;
    let fvals = values.iter().map(|&l| f(l)).collect::<Result<Vec<_>>>()?;
    Ok(Mat::from_fn(n, n, |i, j| {
        let mut acc = c64::new(0.0, 0.0);
        for k in 0..n {
            acc += u[(i, k)] * u[(j, k)].conj() * fvals[k];
        }
        acc
    }))
}

/// Trace of `f(M)` for Hermitian `M`, which only needs the eigenvalues.
pub fn trace_spectral<F>(m: MatRef<'_, c64>, mut f: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut acc = 0.0;
    for l in hermitian_eigenvalues(m)? {
        acc += f(l)?;
    }
    Ok(acc)
}
