//! One-dimensional quadrature rules: Gauss-Legendre for smooth integrands and
//! the double-exponential (tanh-sinh) rule for integrands with endpoint
//! singularities on `(0, 1)`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

/// Composite Gauss-Legendre rule with `panels` equal panels of `order` nodes each.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let mid = lo + 0.5 * width;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + 0.5 * width * xi, 0.5 * width * wi));
        }
    }
    out
}

/// A node of the tanh-sinh rule on `(0, 1)`. Both `t` and `1 - t` are stored
/// so integrands can avoid cancellation near the right endpoint.
#[derive(Clone, Copy, Debug)]
pub struct UnitNode {
    pub t: f64,
    pub one_minus_t: f64,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct TanhSinhOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the number of integrand evaluations.
    pub max_nodes: usize,
    /// Refinement levels always performed before testing convergence.
    pub min_level: usize,
    /// Magnitude of the terms that cancel in the integrand numerator. The
    /// convergence test allows for their roundoff, which the `1/(t(1-t))`
    /// factor amplifies near the endpoints.
    pub noise_scale: f64,
}

impl Default for TanhSinhOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_nodes: 1 << 16,
            min_level: 3,
            noise_scale: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub est_error: f64,
    pub nodes_used: usize,
}

// Abscissae beyond this leave t or 1 - t below ~1e-300.
const TANH_SINH_SPAN: f64 = 6.2;

fn unit_node(x: f64) -> Option<UnitNode> {
    let u = FRAC_PI_2 * x.sinh();
    // t = 1/(1+e^{-2u}), 1-t = 1/(1+e^{2u})
    let e = (-2.0 * u.abs()).exp();
    let small = e / (1.0 + e);
    let large = 1.0 / (1.0 + e);
    let (t, one_minus_t) = if u >= 0.0 { (large, small) } else { (small, large) };
    // dt/dx = (pi/2) cosh(x) * t (1 - t) * 2
    let weight = FRAC_PI_2 * x.cosh() * 2.0 * t * one_minus_t;
    if t <= 0.0 || one_minus_t <= 0.0 || weight == 0.0 || !weight.is_finite() {
        return None;
    }
    Some(UnitNode {
        t,
        one_minus_t,
        weight,
    })
}

/// Integrates `f` over `(0, 1)` by the tanh-sinh rule, halving the step until
/// two successive levels agree. The endpoints are never evaluated.
pub fn tanh_sinh_unit<F>(mut f: F, opts: &TanhSinhOptions) -> Result<QuadResult>
where
    F: FnMut(UnitNode) -> Result<f64>,
{
    let mut h = 0.5;
    let mut sum = 0.0;
    let mut nodes = 0usize;
    // Σ w / (t (1 - t)) over the nodes, for the roundoff floor.
    let mut amplification = 0.0;

    // Level 0: all integer multiples of h.
    let k_max = (TANH_SINH_SPAN / h).ceil() as i64;
    for k in -k_max..=k_max {
        if let Some(node) = unit_node(k as f64 * h) {
            sum += node.weight * f(node)?;
            amplification += node.weight / (node.t * node.one_minus_t);
            nodes += 1;
        }
    }
    let mut estimate = sum * h;
    let mut level = 0usize;
    loop {
        h *= 0.5;
        level += 1;
        // New nodes are the odd multiples of the halved step.
        let k_max = (TANH_SINH_SPAN / h).ceil() as i64;
        let mut k = -k_max | 1;
        while k <= k_max {
            if let Some(node) = unit_node(k as f64 * h) {
                sum += node.weight * f(node)?;
                amplification += node.weight / (node.t * node.one_minus_t);
                nodes += 1;
            }
            k += 2;
        }
        let refined = sum * h;
        let diff = (refined - estimate).abs();
        estimate = refined;
        if !estimate.is_finite() {
            return Err(Error::Quadrature {
                value: estimate,
                est_error: f64::INFINITY,
                nodes,
            });
        }
        let roundoff = 64.0 * f64::EPSILON * opts.noise_scale * amplification * h;
        let tol = opts.abs_tol.max(opts.rel_tol * estimate.abs()).max(roundoff);
        if level >= opts.min_level && diff <= tol {
            return Ok(QuadResult {
                value: estimate,
                est_error: diff,
                nodes_used: nodes,
            });
        }
        if 2 * nodes > opts.max_nodes {
            return Err(Error::Quadrature {
                value: estimate,
                est_error: diff,
                nodes,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert_abs_diff_eq!(q, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn composite_rule_total_weight() {
        let rule = composite_gauss_legendre(-2.0, 3.0, 7, 5);
        let total: f64 = rule.iter().map(|p| p.1).sum();
        assert_abs_diff_eq!(total, 5.0, epsilon = 1e-13);
    }

    #[test]
    fn tanh_sinh_log_singularity() {
        // int_0^1 ln t dt = -1
        let r = tanh_sinh_unit(|n| Ok(n.t.ln()), &TanhSinhOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn tanh_sinh_algebraic_singularity() {
        // int_0^1 t^{-1/2} (1-t)^{-1/2} dt = pi
        let r = tanh_sinh_unit(
            |n| Ok(1.0 / (n.t.sqrt() * n.one_minus_t.sqrt())),
            &TanhSinhOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(r.value, std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn tanh_sinh_reports_non_convergence() {
        let opts = TanhSinhOptions {
            max_nodes: 64,
            ..Default::default()
        };
        let err = tanh_sinh_unit(|n| Ok((50.0 * n.t).sin() / n.t.powf(0.9)), &opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
