//! Asymptotic coefficients: the volume coefficient `W0`, the surface
//! coefficient `W1`, and the singular integrals `A(g; b)` and
//! `U(g; B1, B2)` that feed `W1`.
//!
//! The `t`-integrals over `(0, 1)` use the tanh-sinh rule, which never
//! touches the endpoints and handles both bounded integrands (for `C^2`
//! test functions) and `t^{γ-1}` endpoint singularities (Hölder test
//! functions).

use std::f64::consts::PI;

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::Serialize;

use crate::domains::{BoundaryQuadrature, Domain, MomentumRegion, VolumeQuadrature};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::quadrature::{composite_gauss_legendre, tanh_sinh_unit, QuadResult, TanhSinhOptions, UnitNode};
use crate::spectra::TestFunction;
use crate::symbols::{Dependence, MatrixSymbol};

/// `(2π)^{-2}`, the prefactor of both singular integrals.
pub const FRAK_PREFACTOR: f64 = 1.0 / (4.0 * PI * PI);

/// Spectra may overshoot the test function's domain by this much before the
/// evaluation is rejected.
const SPECTRAL_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefficientResult {
    pub value: f64,
    pub est_error: f64,
    pub nodes_used: usize,
}

impl From<QuadResult> for CoefficientResult {
    fn from(q: QuadResult) -> Self {
        Self {
            value: q.value,
            est_error: q.est_error,
            nodes_used: q.nodes_used,
        }
    }
}

fn eval_with_slack(h: &TestFunction, l: f64) -> Result<f64> {
    match h.domain() {
        Some((lo, _hi)) if l < lo && l >= lo - SPECTRAL_SLACK => h.try_eval(lo),
        Some((_lo, hi)) if l > hi && l <= hi + SPECTRAL_SLACK => h.try_eval(hi),
        _ => h.try_eval(l),
    }
}

/// `h(M) = U diag(h(λ)) U*` for Hermitian `M`.
pub fn matrix_function(h: &TestFunction, m: MatRef<'_, c64>) -> Result<CMat> {
    let m = linalg::guarded_hermitian(m)?;
    let fm = linalg::apply_spectral(m.as_ref(), |l| eval_with_slack(h, l))?;
    Ok(linalg::hermitian_part(fm.as_ref()))
}

fn trace_function(h: &TestFunction, m: MatRef<'_, c64>) -> Result<f64> {
    linalg::trace_spectral(m, |l| eval_with_slack(h, l))
}

/// Integrand scale for the roundoff floor of a singular integral.
fn noise_options(scale: f64) -> TanhSinhOptions {
    TanhSinhOptions {
        noise_scale: scale,
        ..TanhSinhOptions::default()
    }
}

/// `A(g; b) = (2π)^{-2} ∫_0^1 [g(t b) - t g(b)] / (t (1 - t)) dt`.
pub fn frak_a_quad(g: &TestFunction, b: f64) -> Result<QuadResult> {
    g.covers(b.min(0.0), b.max(0.0))?;
    let gb = g.try_eval(b)?;
    let scale = gb.abs() + g.eval(0.5 * b).abs() + 1.0;
    let q = tanh_sinh_unit(
        |n: UnitNode| Ok((g.eval(n.t * b) - n.t * gb) / (n.t * n.one_minus_t)),
        &noise_options(scale),
    )?;
    Ok(QuadResult {
        value: FRAK_PREFACTOR * q.value,
        est_error: FRAK_PREFACTOR * q.est_error,
        nodes_used: q.nodes_used,
    })
}

pub fn frak_a(g: &TestFunction, b: f64) -> Result<f64> {
    Ok(frak_a_quad(g, b)?.value)
}

fn spectral_bounds(m: MatRef<'_, c64>) -> Result<(f64, f64)> {
    let eigs = linalg::hermitian_eigenvalues(m)?;
    Ok((eigs[0], eigs[eigs.len() - 1]))
}

/// `U(g; B1, B2) = (2π)^{-2} ∫_0^1 tr[g(B1 t + B2 (1-t)) - g(B1) t - g(B2) (1-t)] / (t (1-t)) dt`.
///
/// `g` must be defined on the joint spectral hull of `B1` and `B2`, which
/// contains the spectrum of every convex combination.
pub fn frak_u_quad(g: &TestFunction, b1: MatRef<'_, c64>, b2: MatRef<'_, c64>) -> Result<QuadResult> {
    if b1.nrows() != b2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "U needs matrices of equal size, got {} and {}",
            b1.nrows(),
            b2.nrows()
        )));
    }
    let b1 = linalg::guarded_hermitian(b1)?;
    let b2 = linalg::guarded_hermitian(b2)?;
    let (lo1, hi1) = spectral_bounds(b1.as_ref())?;
    let (lo2, hi2) = spectral_bounds(b2.as_ref())?;
    let (lo, hi) = (lo1.min(lo2), hi1.max(hi2));
    g.covers(lo + SPECTRAL_SLACK, hi - SPECTRAL_SLACK).or_else(|e| {
        if hi - lo <= 2.0 * SPECTRAL_SLACK {
            g.covers(lo, lo).map_err(|_| e)
        } else {
            Err(e)
        }
    })?;
    if b1 == b2 {
        return Ok(QuadResult {
            value: 0.0,
            est_error: 0.0,
            nodes_used: 0,
        });
    }
    let g1 = trace_function(g, b1.as_ref())?;
    let g2 = trace_function(g, b2.as_ref())?;
    let n = b1.nrows();
    let mid = Mat::from_fn(n, n, |i, j| (b1[(i, j)] + b2[(i, j)]) * 0.5);
    let scale = g1.abs() + g2.abs() + trace_function(g, mid.as_ref())?.abs() + n as f64;
    let q = tanh_sinh_unit(
        |node: UnitNode| {
            let (t, s) = (node.t, node.one_minus_t);
            let tr = if n == 1 {
                eval_with_slack(g, b1[(0, 0)].re * t + b2[(0, 0)].re * s)?
            } else {
                let m = Mat::from_fn(n, n, |i, j| b1[(i, j)] * t + b2[(i, j)] * s);
                trace_function(g, m.as_ref())?
            };
            Ok((tr - g1 * t - g2 * s) / (t * s))
        },
        &noise_options(scale),
    )?;
    Ok(QuadResult {
        value: FRAK_PREFACTOR * q.value,
        est_error: FRAK_PREFACTOR * q.est_error,
        nodes_used: q.nodes_used,
    })
}

pub fn frak_u(g: &TestFunction, b1: MatRef<'_, c64>, b2: MatRef<'_, c64>) -> Result<f64> {
    Ok(frak_u_quad(g, b1, b2)?.value)
}

/// `U(g; Re A1(x, ξ), Re A2(x, ξ))`.
pub fn frak_u_symbolfield(g: &TestFunction, a1: &MatrixSymbol, a2: &MatrixSymbol, x: &[f64], xi: &[f64]) -> Result<f64> {
    let b1 = linalg::hermitian_part(a1.eval(x, xi).as_ref());
    let b2 = linalg::hermitian_part(a2.eval(x, xi).as_ref());
    frak_u(g, b1.as_ref(), b2.as_ref())
}

fn require_scalar(b: &MatrixSymbol) -> Result<()> {
    if b.dim_n() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "coefficient needs a scalar symbol, got n = {}",
            b.dim_n()
        )));
    }
    Ok(())
}

fn real_value(b: &MatrixSymbol, x: &[f64], xi: &[f64]) -> f64 {
    b.eval(x, xi)[(0, 0)].re
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonIntegrable(format!("{what} integrand is not finite")))
    }
}

/// Composite rule on boxes so that windows which are smooth but not analytic
/// still converge quickly; other shapes use their own volume rule.
fn momentum_quadrature(g: &Domain, res: usize) -> VolumeQuadrature {
    match g {
        Domain::Interval { .. } | Domain::Box(_) => {
            let bb = g.bounding_box();
            let axes: Vec<Vec<(f64, f64)>> =
                (0..bb.dim()).map(|k| composite_gauss_legendre(bb.lo[k], bb.hi[k], res, 8)).collect();
            let mut q = VolumeQuadrature { points: Vec::new(), weights: Vec::new() };
            if axes.len() == 1 {
                for &(x, w) in &axes[0] {
                    q.points.push(vec![x]);
                    q.weights.push(w);
                }
            } else {
                for &(x, wx) in &axes[0] {
                    for &(y, wy) in &axes[1] {
                        q.points.push(vec![x, y]);
                        q.weights.push(wx * wy);
                    }
                }
            }
            q
        }
        _ => g.volume_quadrature(res),
    }
}

/// `W0(b; Λ, Γ) = (2π)^{-d} ∫_Λ ∫_Γ b(x, ξ) dξ dx`.
///
/// For `Γ^c` the symbol must declare a compact momentum support `S`, and the
/// integral is taken as `∫_S - ∫_Γ`. The error estimate compares
/// `resolution` with `2 · resolution`.
pub fn w0(b: &MatrixSymbol, lambda: &Domain, gamma: &MomentumRegion, resolution: usize) -> Result<CoefficientResult> {
    require_scalar(b)?;
    let d = lambda.dim_d();
    if gamma.domain().dim_d() != d || b.dim_d() != d {
        return Err(Error::DimensionMismatch(format!(
            "W0: Λ has d = {d}, Γ has d = {}, symbol has d = {}",
            gamma.domain().dim_d(),
            b.dim_d()
        )));
    }
    if b.is_zero() {
        return Ok(CoefficientResult {
            value: 0.0,
            est_error: 0.0,
            nodes_used: 0,
        });
    }
    // Signed list of momentum regions to integrate over.
    let regions: Vec<(f64, Domain)> = match gamma {
        MomentumRegion::Inside(g) => vec![(1.0, g.clone())],
        MomentumRegion::Complement(g) => {
            let Some(s) = b.support_xi() else {
                return Err(Error::NonIntegrable(
                    "W0 over a complement needs a symbol with compact momentum support".into(),
                ));
            };
            vec![(1.0, Domain::Box(s.clone())), (-1.0, g.clone())]
        }
    };
    let norm = (2.0 * PI).powi(d as i32);
    if let Some(m) = b.constant_value() {
        let area: f64 = regions.iter().map(|(sgn, g)| sgn * g.measure()).sum();
        return Ok(CoefficientResult {
            value: m[(0, 0)].re * lambda.measure() * area / norm,
            est_error: 0.0,
            nodes_used: 1,
        });
    }
    let integrate = |res: usize| -> Result<(f64, usize)> {
        let qx = lambda.volume_quadrature(res);
        let mut total = 0.0;
        let mut nodes = 0;
        for (sgn, g) in &regions {
            let qxi = momentum_quadrature(g, res);
            nodes += qxi.len();
            let part = match b.dependence() {
                Dependence::XiOnly => {
                    let x0 = &qx.points[0];
                    let s: f64 = qxi.points.iter().zip(&qxi.weights).map(|(xi, w)| w * real_value(b, x0, xi)).sum();
                    s * lambda.measure()
                }
                Dependence::XOnly => {
                    let xi0 = &qxi.points[0];
                    let s: f64 = qx.points.iter().zip(&qx.weights).map(|(x, w)| w * real_value(b, x, xi0)).sum();
                    s * g.measure()
                }
                Dependence::Both => {
                    let rows: Vec<f64> = qx
                        .points
                        .par_iter()
                        .zip(qx.weights.par_iter())
                        .map(|(x, wx)| {
                            wx * qxi
                                .points
                                .iter()
                                .zip(&qxi.weights)
                                .map(|(xi, w)| w * real_value(b, x, xi))
                                .sum::<f64>()
                        })
                        .collect();
                    nodes += qx.len() * qxi.len();
                    rows.iter().sum()
                }
            };
            total += sgn * part;
        }
        Ok((check_finite(total, "W0")? / norm, nodes + qx.len()))
    };
    let (coarse, n1) = integrate(resolution.max(2))?;
    let (fine, n2) = integrate(2 * resolution.max(2))?;
    Ok(CoefficientResult {
        value: fine,
        est_error: (fine - coarse).abs(),
        nodes_used: n1 + n2,
    })
}

/// `1` for `d = 1`, `(2π)^{-(d-1)}` otherwise.
fn w1_prefactor(dl: &BoundaryQuadrature, dg: &BoundaryQuadrature) -> Result<f64> {
    if dl.dim_d != dg.dim_d {
        return Err(Error::DimensionMismatch(format!(
            "W1: boundary quadratures have d = {} and d = {}",
            dl.dim_d, dg.dim_d
        )));
    }
    Ok(if dl.dim_d == 1 {
        1.0
    } else {
        (2.0 * PI).powi(1 - dl.dim_d as i32)
    })
}

/// `w_i w_j |n_i · n_j|` in `d >= 2`, `1` in `d = 1`.
fn pair_weight(dl: &BoundaryQuadrature, i: usize, dg: &BoundaryQuadrature, j: usize) -> f64 {
    if dl.dim_d == 1 {
        return 1.0;
    }
    let (a, b) = (&dl.nodes[i], &dg.nodes[j]);
    let dot: f64 = a.normal.iter().zip(&b.normal).map(|(u, v)| u * v).sum();
    a.weight * b.weight * dot.abs()
}

/// Sums `f(i, j) · ω_ij` over all boundary pairs, row-parallel with a
/// deterministic reduction order.
fn boundary_sum<F>(dl: &BoundaryQuadrature, dg: &BoundaryQuadrature, f: F) -> Result<(f64, f64)>
where
    F: Fn(usize, usize) -> Result<(f64, f64)> + Sync,
{
    let rows: Vec<(f64, f64)> = (0..dl.nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = (0.0, 0.0);
            for j in 0..dg.nodes.len() {
                let w = pair_weight(dl, i, dg, j);
                if w == 0.0 {
                    continue;
                }
                let (v, e) = f(i, j)?;
                acc.0 += w * v;
                acc.1 += w * e;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(rows.iter().fold((0.0, 0.0), |a, r| (a.0 + r.0, a.1 + r.1)))
}

/// `W1(b; ∂Λ, ∂Γ)`: the sum of `b` over endpoint pairs for `d = 1`, and
/// `(2π)^{-(d-1)} ∫∫ b(x, ξ) |n(x) · n(ξ)| dS dS` for `d >= 2`.
pub fn w1(b: &MatrixSymbol, dl: &BoundaryQuadrature, dg: &BoundaryQuadrature) -> Result<CoefficientResult> {
    require_scalar(b)?;
    let pre = w1_prefactor(dl, dg)?;
    let pairs = dl.nodes.len() * dg.nodes.len();
    if let Some(m) = b.constant_value() {
        let (s, _) = boundary_sum(dl, dg, |_, _| Ok((1.0, 0.0)))?;
        return Ok(CoefficientResult {
            value: check_finite(pre * m[(0, 0)].re * s, "W1")?,
            est_error: 0.0,
            nodes_used: pairs,
        });
    }
    let (s, _) = boundary_sum(dl, dg, |i, j| Ok((real_value(b, &dl.nodes[i].point, &dg.nodes[j].point), 0.0)))?;
    Ok(CoefficientResult {
        value: check_finite(pre * s, "W1")?,
        est_error: 0.0,
        nodes_used: pairs,
    })
}

/// `W1(U(g; Re A1, Re A2); ∂Λ, ∂Γ)` with quadrature errors propagated. For
/// constant symbols `U` is evaluated once.
pub fn w1_frak_u(
    g: &TestFunction,
    a1: &MatrixSymbol,
    a2: &MatrixSymbol,
    dl: &BoundaryQuadrature,
    dg: &BoundaryQuadrature,
) -> Result<CoefficientResult> {
    if a1.dim_n() != a2.dim_n() {
        return Err(Error::DimensionMismatch(format!(
            "A1 has n = {}, A2 has n = {}",
            a1.dim_n(),
            a2.dim_n()
        )));
    }
    let pre = w1_prefactor(dl, dg)?;
    let pairs = dl.nodes.len() * dg.nodes.len();
    if let (Some(m1), Some(m2)) = (a1.constant_value(), a2.constant_value()) {
        let b1 = linalg::hermitian_part(m1.as_ref());
        let b2 = linalg::hermitian_part(m2.as_ref());
        let u = frak_u_quad(g, b1.as_ref(), b2.as_ref())?;
        let (s, _) = boundary_sum(dl, dg, |_, _| Ok((1.0, 0.0)))?;
        return Ok(CoefficientResult {
            value: pre * s * u.value,
            est_error: pre * s * u.est_error,
            nodes_used: pairs * u.nodes_used,
        });
    }
    let (s, e) = boundary_sum(dl, dg, |i, j| {
        let (x, xi) = (&dl.nodes[i].point, &dg.nodes[j].point);
        let b1 = linalg::hermitian_part(a1.eval(x, xi).as_ref());
        let b2 = linalg::hermitian_part(a2.eval(x, xi).as_ref());
        let u = frak_u_quad(g, b1.as_ref(), b2.as_ref())?;
        Ok((u.value, u.est_error))
    })?;
    Ok(CoefficientResult {
        value: pre * s,
        est_error: pre * e,
        nodes_used: pairs,
    })
}
