//! Test functions `h` with `h(0) = 0` and spectral traces `tr h(op)` of
//! discretized operators.

use std::fmt;
use std::sync::Arc;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::DiscretizedOperator;

/// Regularity class of a test function.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionClass {
    /// Coefficients in ascending order, constant term zero.
    Polynomial { coeffs: Vec<f64> },
    /// Entire or analytic in a disc of the declared radius around 0.
    Analytic { radius: f64 },
    Smooth,
    /// Twice differentiable away from `singular`, Hölder with exponent
    /// `gamma` at each singular point.
    Hoelder { singular: Vec<f64>, gamma: f64 },
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real test function, normalized so that `h(0) = 0`.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    class: FunctionClass,
    raw: ScalarFn,
    shift: f64,
    domain: Option<(f64, f64)>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("class", &self.class)
            .field("shift", &self.shift)
            .field("domain", &self.domain)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionDesc {
    Identity,
    Monomial { p: u32 },
    Polynomial { coeffs: Vec<f64> },
    Renyi { alpha: f64 },
    VonNeumann,
    AnalyticExp { scale: f64 },
    SmoothBump { center: f64, width: f64 },
}

impl TryFrom<&TestFunctionDesc> for TestFunction {
    type Error = Error;

    fn try_from(desc: &TestFunctionDesc) -> Result<Self> {
        match desc {
            TestFunctionDesc::Identity => Ok(TestFunction::identity()),
            TestFunctionDesc::Monomial { p } => TestFunction::monomial(*p),
            TestFunctionDesc::Polynomial { coeffs } => TestFunction::polynomial(coeffs.clone()),
            TestFunctionDesc::Renyi { alpha } => TestFunction::renyi(*alpha),
            TestFunctionDesc::VonNeumann => Ok(TestFunction::von_neumann()),
            TestFunctionDesc::AnalyticExp { scale } => Ok(TestFunction::analytic_exp(*scale)),
            TestFunctionDesc::SmoothBump { center, width } => TestFunction::smooth_bump(*center, *width),
        }
    }
}

fn xlogx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

impl TestFunction {
    /// Wraps an arbitrary function. A nonzero `f(0)` is subtracted and logged.
    pub fn custom<F>(name: impl Into<String>, class: FunctionClass, domain: Option<(f64, f64)>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let at_zero = f(0.0);
        let shift = if at_zero != 0.0 && at_zero.is_finite() {
            log::info!("test function {name}: subtracting h(0) = {at_zero:e} to enforce h(0) = 0");
            at_zero
        } else {
            0.0
        };
        Self {
            name,
            class,
            raw: Arc::new(f),
            shift,
            domain,
        }
    }

    pub fn identity() -> Self {
        Self::polynomial(vec![0.0, 1.0]).expect("identity is a valid polynomial")
    }

    /// `t ↦ t^p`
    pub fn monomial(p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidFunction("monomial degree must be at least 1".into()));
        }
        let mut coeffs = vec![0.0; p as usize + 1];
        coeffs[p as usize] = 1.0;
        let mut h = Self::polynomial(coeffs)?;
        h.name = format!("id^{p}");
        Ok(h)
    }

    /// Polynomial with ascending coefficients. A constant term is dropped.
    pub fn polynomial(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFunction(format!("polynomial needs degree >= 1, got {coeffs:?}")));
        }
        if coeffs[0] != 0.0 {
            log::info!("polynomial test function: dropping constant term {} to enforce h(0) = 0", coeffs[0]);
            coeffs[0] = 0.0;
        }
        while coeffs.len() > 2 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        let c = coeffs.clone();
        Ok(Self {
            name: format!("poly{coeffs:?}"),
            class: FunctionClass::Polynomial { coeffs },
            raw: Arc::new(move |t| c.iter().rev().fold(0.0, |acc, a| acc * t + a)),
            shift: 0.0,
            domain: None,
        })
    }

    /// Rényi entropy function `(1-α)^{-1} ln(t^α + (1-t)^α)` on `[0, 1]`.
    pub fn renyi(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidFunction(format!("Renyi index must be positive, got {alpha}")));
        }
        if alpha == 1.0 {
            return Err(Error::InvalidFunction(
                "Renyi index 1 is the von Neumann entropy; use von_neumann()".into(),
            ));
        }
        let gamma = if alpha < 1.0 { alpha } else { 1.0 };
        Ok(Self {
            name: format!("renyi({alpha})"),
            class: FunctionClass::Hoelder {
                singular: vec![0.0, 1.0],
                gamma,
            },
            raw: Arc::new(move |t| (t.powf(alpha) + (1.0 - t).powf(alpha)).ln() / (1.0 - alpha)),
            shift: 0.0,
            domain: Some((0.0, 1.0)),
        })
    }

    /// `-t ln t - (1-t) ln(1-t)` on `[0, 1]`.
    pub fn von_neumann() -> Self {
        Self {
            name: "von_neumann".into(),
            class: FunctionClass::Hoelder {
                singular: vec![0.0, 1.0],
                gamma: 0.9,
            },
            raw: Arc::new(|t| -xlogx(t) - xlogx(1.0 - t)),
            shift: 0.0,
            domain: Some((0.0, 1.0)),
        }
    }

    /// `e^{scale t} - 1`, entire.
    pub fn analytic_exp(scale: f64) -> Self {
        Self {
            name: format!("exp({scale} t) - 1"),
            class: FunctionClass::Analytic { radius: f64::INFINITY },
            raw: Arc::new(move |t| (scale * t).exp_m1()),
            shift: 0.0,
            domain: None,
        }
    }

    /// Gaussian bump `exp(-((t-c)/w)^2)`, shifted to vanish at 0.
    pub fn smooth_bump(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidFunction(format!("bump width must be positive, got {width}")));
        }
        Ok(Self::custom(
            format!("bump({center}, {width})"),
            FunctionClass::Smooth,
            None,
            move |t| (-((t - center) / width).powi(2)).exp(),
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> &FunctionClass {
        &self.class
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        self.domain
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self.class, FunctionClass::Polynomial { .. })
    }

    /// Ascending coefficients when the function is a polynomial.
    pub fn polynomial_coeffs(&self) -> Option<&[f64]> {
        match &self.class {
            FunctionClass::Polynomial { coeffs } => Some(coeffs),
            _ => None,
        }
    }

    /// Evaluates `h(t)` without a domain check.
    pub fn eval(&self, t: f64) -> f64 {
        (self.raw)(t) - self.shift
    }

    /// Evaluates `h(t)`, failing outside the declared domain.
    pub fn try_eval(&self, t: f64) -> Result<f64> {
        if let Some((lo, hi)) = self.domain {
            if !(lo <= t && t <= hi) {
                return Err(Error::OutsideFunctionDomain { value: t, lo, hi });
            }
        }
        Ok(self.eval(t))
    }

    /// Checks that `[lo, hi]` lies in the declared domain.
    pub fn covers(&self, lo: f64, hi: f64) -> Result<()> {
        if let Some((a, b)) = self.domain {
            if lo < a {
                return Err(Error::OutsideFunctionDomain { value: lo, lo: a, hi: b });
            }
            if hi > b {
                return Err(Error::OutsideFunctionDomain { value: hi, lo: a, hi: b });
            }
        }
        Ok(())
    }

    /// Smallest log-log slope of `|h(x+δ) - h(x)|` over `δ ∈ {1e-2, …, 1e-6}`,
    /// stepping into the domain from `x`.
    pub fn measured_hoelder_exponent(&self, x: f64) -> f64 {
        let dir = match self.domain {
            Some((_, hi)) if x >= hi => -1.0,
            _ => 1.0,
        };
        let deltas = [1e-5, 1e-6, 1e-7, 1e-8, 1e-9];
        let hx = self.eval(x);
        let incr: Vec<f64> = deltas.iter().map(|d| (self.eval(x + dir * d) - hx).abs()).collect();
        incr.windows(2)
            .zip(deltas.windows(2))
            .map(|(i, d)| (i[0].ln() - i[1].ln()) / (d[0].ln() - d[1].ln()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Finite-difference Hölder check at every declared singular point:
    /// `|h(x+δ) - h(x)| / δ^γ` must not grow as `δ` shrinks.
    pub fn verify_hoelder(&self) -> bool {
        let FunctionClass::Hoelder { singular, gamma } = &self.class else {
            return true;
        };
        singular.iter().all(|&x| {
            let dir = match self.domain {
                Some((_, hi)) if x >= hi => -1.0,
                _ => 1.0,
            };
            let hx = self.eval(x);
            let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
                .iter()
                .map(|d: &f64| (self.eval(x + dir * d) - hx).abs() / d.powf(*gamma))
                .collect();
            let c = ratios[0].max(1e-300);
            ratios.iter().all(|r| r.is_finite() && *r <= 2.0 * c + 1e-12)
        })
    }
}

/// Result of [`trace_of_function`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralTrace {
    pub value: f64,
    /// Sum of `|λ - clamp(λ)|` over all eigenvalues.
    pub clamp_total: f64,
    pub clamp_max: f64,
    pub eigen_count: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// `tr h(op) = Σ_k h(λ_k)` from a full Hermitian eigendecomposition.
///
/// Eigenvalues are clamped into `clamp_range` (when given) before `h` is
/// applied; the clamp magnitude is reported.
pub fn trace_of_function(
    op: &DiscretizedOperator,
    h: &TestFunction,
    clamp_range: Option<(f64, f64)>,
) -> Result<SpectralTrace> {
    if !op.hermitian {
        return Err(Error::NotHermitian {
            deviation: linalg::hermitian_deviation(op.matrix.as_ref()),
        });
    }
    let eigs = linalg::hermitian_eigenvalues(op.matrix.as_ref())?;
    trace_from_eigenvalues(&eigs, h, clamp_range)
}

/// The clamping and summation part of [`trace_of_function`].
pub fn trace_from_eigenvalues(eigs: &[f64], h: &TestFunction, clamp_range: Option<(f64, f64)>) -> Result<SpectralTrace> {
    let mut value = 0.0;
    let mut clamp_total = 0.0;
    let mut clamp_max: f64 = 0.0;
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = f64::NEG_INFINITY;
    // Kahan summation.
    let mut compensation = 0.0;
    for &l in eigs {
        lambda_min = lambda_min.min(l);
        lambda_max = lambda_max.max(l);
        let c = match clamp_range {
            Some((lo, hi)) => l.clamp(lo, hi),
            None => l,
        };
        let delta = (l - c).abs();
        clamp_total += delta;
        clamp_max = clamp_max.max(delta);
        let term = h.try_eval(c)? - compensation;
        let next = value + term;
        compensation = (next - value) - term;
        value = next;
    }
    Ok(SpectralTrace {
        value,
        clamp_total,
        clamp_max,
        eigen_count: eigs.len(),
        lambda_min,
        lambda_max,
    })
}

/// `Σ_m ω_m tr(op^m)` by explicit matrix powers; `coeffs` is ascending and
/// must have a zero constant term. Works for non-Hermitian operators.
pub fn trace_poly_direct_complex(op: &DiscretizedOperator, coeffs: &[f64]) -> Result<c64> {
    if coeffs.first().is_some_and(|c| *c != 0.0) {
        return Err(Error::InvalidFunction(
            "polynomial trace requires a zero constant term".into(),
        ));
    }
    let m = op.matrix.as_ref();
    let degree = coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0);
    let mut total = c64::new(0.0, 0.0);
    if degree == 0 {
        return Ok(total);
    }
    total += linalg::trace(m) * coeffs[1];
    if degree == 1 {
        return Ok(total);
    }
    // tr(M^2) = Σ_ij M_ij M_ji without forming the product.
    if coeffs[2] != 0.0 {
        let n = m.nrows();
        let mut t2 = c64::new(0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                t2 += m[(i, j)] * m[(j, i)];
            }
        }
        total += t2 * coeffs[2];
    }
    if degree >= 3 {
        let mut power = m * m;
        for &w in coeffs.iter().take(degree + 1).skip(3) {
            power = &power * m;
            if w != 0.0 {
                total += linalg::trace(power.as_ref()) * w;
            }
        }
    }
    Ok(total)
}

/// Real part of [`trace_poly_direct_complex`].
pub fn trace_poly_direct(op: &DiscretizedOperator, coeffs: &[f64]) -> Result<f64> {
    Ok(trace_poly_direct_complex(op, coeffs)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn catalog_values() {
        assert_abs_diff_eq!(TestFunction::von_neumann().eval(0.5), LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(TestFunction::renyi(2.0).unwrap().eval(0.5), LN_2, epsilon = 1e-15);
        let m3 = TestFunction::monomial(3).unwrap();
        assert_eq!(m3.eval(2.0), 8.0);
        assert_eq!(m3.eval(0.0), 0.0);
        assert_eq!(TestFunction::von_neumann().eval(0.0), 0.0);
        assert_eq!(TestFunction::von_neumann().eval(1.0), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TestFunction::renyi(0.0).is_err());
        assert!(TestFunction::renyi(-1.0).is_err());
        assert!(TestFunction::renyi(1.0).is_err());
        assert!(TestFunction::monomial(0).is_err());
        assert!(TestFunction::polynomial(vec![1.0]).is_err());
    }

    #[test]
    fn normalization_enforces_zero_at_zero() {
        let p = TestFunction::polynomial(vec![3.0, 1.0, -1.0]).unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(1.0), 0.0);
        let b = TestFunction::smooth_bump(0.5, 0.2).unwrap();
        assert_eq!(b.eval(0.0), 0.0);
        assert!(b.eval(0.5) > 0.9);
    }

    #[test]
    fn entropy_symmetry() {
        let fns = [
            TestFunction::von_neumann(),
            TestFunction::renyi(0.5).unwrap(),
            TestFunction::renyi(2.0).unwrap(),
            TestFunction::renyi(3.7).unwrap(),
        ];
        for h in &fns {
            for k in 0..=1000 {
                let t = k as f64 / 1000.0;
                assert_abs_diff_eq!(h.eval(t), h.eval(1.0 - t), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hoelder_exponents_at_singular_points() {
        for alpha in [0.25, 0.5, 0.75] {
            let h = TestFunction::renyi(alpha).unwrap();
            for x in [0.0, 1.0] {
                assert!(h.measured_hoelder_exponent(x) >= alpha - 0.05, "alpha {alpha} at {x}");
            }
            assert!(h.verify_hoelder());
        }
        let gamma = 0.9;
        for h in [TestFunction::von_neumann(), TestFunction::renyi(2.0).unwrap(), TestFunction::renyi(1.5).unwrap()] {
            for x in [0.0, 1.0] {
                assert!(h.measured_hoelder_exponent(x) >= gamma, "{} at {x}", h.name());
            }
            assert!(h.verify_hoelder(), "{}", h.name());
        }
    }

    #[test]
    fn domain_checks() {
        let h = TestFunction::von_neumann();
        assert!(matches!(h.try_eval(-1e-3), Err(Error::OutsideFunctionDomain { .. })));
        assert!(h.covers(0.0, 1.0).is_ok());
        assert!(h.covers(-0.1, 0.5).is_err());
        assert!(TestFunction::identity().covers(-5.0, 5.0).is_ok());
    }

    #[test]
    fn clamping_is_reported() {
        let eigs = [-1e-4, 0.3, 1.0 + 2e-4];
        let r = trace_from_eigenvalues(&eigs, &TestFunction::von_neumann(), Some((0.0, 1.0))).unwrap();
        assert_abs_diff_eq!(r.clamp_total, 3e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(r.clamp_max, 2e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(r.value, TestFunction::von_neumann().eval(0.3), epsilon = 1e-15);
        let err = trace_from_eigenvalues(&eigs, &TestFunction::von_neumann(), None).unwrap_err();
        assert!(matches!(err, Error::OutsideFunctionDomain { value, .. } if value == -1e-4));
    }

    #[test]
    fn descriptors() {
        let d: TestFunctionDesc = serde_json::from_str(r#"{"kind":"renyi","alpha":0.5}"#).unwrap();
        assert_eq!(d, TestFunctionDesc::Renyi { alpha: 0.5 });
        let d: TestFunctionDesc = serde_json::from_str(r#"{"kind":"polynomial","coeffs":[0,1,-1]}"#).unwrap();
        let h = TestFunction::try_from(&d).unwrap();
        assert_abs_diff_eq!(h.eval(0.5), 0.25);
        let d: TestFunctionDesc = serde_json::from_str(r#"{"kind":"von_neumann"}"#).unwrap();
        assert!(TestFunction::try_from(&d).is_ok());
    }
}
