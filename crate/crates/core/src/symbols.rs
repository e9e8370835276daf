//! Matrix-valued symbols `A(x, ξ)` and their pointwise algebra.
//!
//! Symbols are evaluable objects rather than sampled grids, so the same
//! symbol can be discretized at every scale `L`. Smoothness is assumed;
//! only the Hermiticity, dependence and support declarations are checked,
//! by sampling.

use std::fmt;
use std::sync::Arc;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::domains::Aabb;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::spectra::TestFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    XiOnly,
    XOnly,
    Both,
}

/// `C^∞` step: 0 for `u <= 0`, 1 for `u >= 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// Scalar profile in one of the two variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    One,
    /// Smooth cutoff: 1 where every `|v_i - center| <= inner`, 0 where some
    /// `|v_i - center| >= outer`.
    Plateau {
        #[serde(default)]
        center: f64,
        inner: f64,
        outer: f64,
    },
    /// `cos(freq · Σ v_i)` times a plateau cutoff.
    CosPlateau {
        freq: f64,
        #[serde(default)]
        center: f64,
        inner: f64,
        outer: f64,
    },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::One => Ok(()),
            Profile::Plateau { inner, outer, .. } | Profile::CosPlateau { inner, outer, .. } => {
                if !(0.0 <= *inner && inner < outer) {
                    Err(Error::InvalidSymbol(format!(
                        "plateau needs 0 <= inner < outer, got {inner}, {outer}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Profile::One => 1.0,
            Profile::Plateau { center, inner, outer } => plateau(v, *center, *inner, *outer),
            Profile::CosPlateau {
                freq,
                center,
                inner,
                outer,
            } => (freq * v.iter().sum::<f64>()).cos() * plateau(v, *center, *inner, *outer),
        }
    }

    pub fn support(&self, dim: usize) -> Option<Aabb> {
        match self {
            Profile::One => None,
            Profile::Plateau { center, outer, .. } | Profile::CosPlateau { center, outer, .. } => Some(Aabb {
                lo: vec![center - outer; dim],
                hi: vec![center + outer; dim],
            }),
        }
    }
}

fn plateau(v: &[f64], center: f64, inner: f64, outer: f64) -> f64 {
    v.iter()
        .map(|c| smooth_step((outer - (c - center).abs()) / (outer - inner)))
        .product()
}

type SymbolFn = Arc<dyn Fn(&[f64], &[f64]) -> CMat + Send + Sync>;

#[derive(Clone)]
enum SymbolKind {
    Constant(CMat),
    /// `f(x) · M · g(ξ)`
    Separable { x: Profile, matrix: CMat, xi: Profile },
    Func(SymbolFn),
}

/// An evaluable map `(x, ξ) ↦ A(x, ξ) ∈ C^{n×n}` with metadata.
#[derive(Clone)]
pub struct MatrixSymbol {
    dim_d: usize,
    dim_n: usize,
    dependence: Dependence,
    hermitian: bool,
    support_xi: Option<Aabb>,
    support_x: Option<Aabb>,
    kind: SymbolKind,
}

impl fmt::Debug for MatrixSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            SymbolKind::Constant(_) => "constant",
            SymbolKind::Separable { .. } => "separable",
            SymbolKind::Func(_) => "function",
        };
        f.debug_struct("MatrixSymbol")
            .field("kind", &kind)
            .field("dim_d", &self.dim_d)
            .field("dim_n", &self.dim_n)
            .field("dependence", &self.dependence)
            .field("hermitian", &self.hermitian)
            .field("support_xi", &self.support_xi)
            .field("support_x", &self.support_x)
            .finish()
    }
}

/// Matrix entry in a JSON descriptor: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> c64 {
        match self {
            Entry::Real(r) => c64::new(r, 0.0),
            Entry::Complex([re, im]) => c64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolDesc {
    Constant { matrix: Vec<Vec<Entry>> },
    Zero { n: usize },
    Identity { n: usize },
    /// `M · χ(ξ)` with a smooth plateau cutoff `χ`.
    Windowed { matrix: Vec<Vec<Entry>>, inner: f64, outer: f64 },
    Separable {
        matrix: Vec<Vec<Entry>>,
        x_profile: Profile,
        xi_profile: Profile,
    },
    /// Member 1 or 2 of the built-in non-commuting Pauli pair.
    Noncommuting { member: u8 },
}

fn matrix_from_entries(rows: &[Vec<Entry>]) -> Result<CMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidSymbol("matrix must be square and non-empty".into()));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j].value()))
}

fn check_symbol_dim(d: usize) -> Result<()> {
    if d == 0 || d > 2 {
        return Err(Error::InvalidSymbol(format!("dimension {d} not supported (only 1 and 2)")));
    }
    Ok(())
}

const HERMITIAN_FLAG_TOL: f64 = 1e-12;

impl MatrixSymbol {
    pub fn from_desc(desc: &SymbolDesc, dim_d: usize) -> Result<Self> {
        match desc {
            SymbolDesc::Constant { matrix } => Self::constant(dim_d, matrix_from_entries(matrix)?),
            SymbolDesc::Zero { n } => Self::zero(dim_d, *n),
            SymbolDesc::Identity { n } => Self::constant(dim_d, linalg::identity(*n)),
            SymbolDesc::Windowed { matrix, inner, outer } => {
                Self::windowed(dim_d, matrix_from_entries(matrix)?, *inner, *outer)
            }
            SymbolDesc::Separable {
                matrix,
                x_profile,
                xi_profile,
            } => Self::separable(dim_d, x_profile.clone(), matrix_from_entries(matrix)?, xi_profile.clone()),
            SymbolDesc::Noncommuting { member } => {
                let (b1, b2) = Self::noncommuting_pair(dim_d)?;
                match member {
                    1 => Ok(b1),
                    2 => Ok(b2),
                    m => Err(Error::InvalidSymbol(format!("noncommuting member must be 1 or 2, got {m}"))),
                }
            }
        }
    }

    pub fn constant(dim_d: usize, matrix: CMat) -> Result<Self> {
        check_symbol_dim(dim_d)?;
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidSymbol("constant symbol needs a square matrix".into()));
        }
        Ok(Self {
            dim_d,
            dim_n: matrix.nrows(),
            dependence: Dependence::XiOnly,
            hermitian: linalg::hermitian_deviation(matrix.as_ref()) <= HERMITIAN_FLAG_TOL,
            support_xi: None,
            support_x: None,
            kind: SymbolKind::Constant(matrix),
        })
    }

    pub fn zero(dim_d: usize, n: usize) -> Result<Self> {
        Self::constant(dim_d, linalg::zeros(n))
    }

    pub fn identity(dim_d: usize, n: usize) -> Result<Self> {
        Self::constant(dim_d, linalg::identity(n))
    }

    /// `f(x) · M · g(ξ)`.
    pub fn separable(dim_d: usize, x: Profile, matrix: CMat, xi: Profile) -> Result<Self> {
        x.validate()?;
        xi.validate()?;
        if x == Profile::One && xi == Profile::One {
            return Self::constant(dim_d, matrix);
        }
        let mut s = Self::constant(dim_d, matrix.clone())?;
        s.dependence = match (x == Profile::One, xi == Profile::One) {
            (true, false) => Dependence::XiOnly,
            (false, true) => Dependence::XOnly,
            _ => Dependence::Both,
        };
        s.support_xi = xi.support(dim_d);
        s.support_x = x.support(dim_d);
        s.kind = SymbolKind::Separable { x, matrix, xi };
        Ok(s)
    }

    /// `M · χ(ξ)` with `χ = 1` on `|ξ_i| <= inner` and `χ = 0` for `|ξ_i| >= outer`.
    pub fn windowed(dim_d: usize, matrix: CMat, inner: f64, outer: f64) -> Result<Self> {
        Self::separable(dim_d, Profile::One, matrix, Profile::Plateau { center: 0.0, inner, outer })
    }

    /// Constant Pauli pair `σ_x`, `σ_z`, which do not commute.
    pub fn noncommuting_pair(dim_d: usize) -> Result<(Self, Self)> {
        Ok((
            Self::constant(dim_d, linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]))?,
            Self::constant(dim_d, linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]))?,
        ))
    }

    /// General symbol from a closure. The declarations are verified by sampling.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn<F>(
        dim_d: usize,
        dim_n: usize,
        dependence: Dependence,
        hermitian: bool,
        support_xi: Option<Aabb>,
        support_x: Option<Aabb>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> CMat + Send + Sync + 'static,
    {
        check_symbol_dim(dim_d)?;
        let s = Self {
            dim_d,
            dim_n,
            dependence,
            hermitian,
            support_xi,
            support_x,
            kind: SymbolKind::Func(Arc::new(f)),
        };
        s.verify_declarations()?;
        Ok(s)
    }

    fn derived<F>(&self, dim_n: usize, hermitian: bool, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> CMat + Send + Sync + 'static,
    {
        Self {
            dim_d: self.dim_d,
            dim_n,
            dependence: self.dependence,
            hermitian,
            support_xi: self.support_xi.clone(),
            support_x: self.support_x.clone(),
            kind: SymbolKind::Func(Arc::new(f)),
        }
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    pub fn dependence(&self) -> Dependence {
        self.dependence
    }

    pub fn hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn support_xi(&self) -> Option<&Aabb> {
        self.support_xi.as_ref()
    }

    pub fn support_x(&self) -> Option<&Aabb> {
        self.support_x.as_ref()
    }

    pub fn is_xi_only(&self) -> bool {
        self.dependence == Dependence::XiOnly
    }

    pub fn constant_value(&self) -> Option<&CMat> {
        match &self.kind {
            SymbolKind::Constant(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn is_zero(&self) -> bool {
        self.constant_value().is_some_and(|m| linalg::max_abs(m.as_ref()) == 0.0)
    }

    /// `(f, M, g)` for separable symbols `f(x) M g(ξ)`.
    pub fn as_separable(&self) -> Option<(&Profile, &CMat, &Profile)> {
        match &self.kind {
            SymbolKind::Separable { x, matrix, xi } => Some((x, matrix, xi)),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> CMat {
        match &self.kind {
            SymbolKind::Constant(m) => m.clone(),
            SymbolKind::Separable { x: f, matrix, xi: g } => {
                let s = f.eval(x) * g.eval(xi);
                Mat::from_fn(self.dim_n, self.dim_n, |i, j| matrix[(i, j)] * s)
            }
            SymbolKind::Func(f) => f(x, xi),
        }
    }

    /// Pointwise `Re A = (A + A*) / 2`.
    pub fn real_part(&self) -> MatrixSymbol {
        match &self.kind {
            SymbolKind::Constant(m) => {
                Self::constant(self.dim_d, linalg::hermitian_part(m.as_ref())).expect("same shape as input")
            }
            SymbolKind::Separable { x, matrix, xi } => {
                // Profiles are real, so Re(f M g) = f Re(M) g.
                let mut s = self.clone();
                s.kind = SymbolKind::Separable {
                    x: x.clone(),
                    matrix: linalg::hermitian_part(matrix.as_ref()),
                    xi: xi.clone(),
                };
                s.hermitian = true;
                s
            }
            SymbolKind::Func(_) => {
                let inner = self.clone();
                self.derived(self.dim_n, true, move |x, xi| linalg::hermitian_part(inner.eval(x, xi).as_ref()))
            }
        }
    }

    /// Pointwise matrix power `A(x, ξ)^p`, `p >= 1`.
    pub fn power(&self, p: u32) -> Result<MatrixSymbol> {
        if p == 0 {
            return Err(Error::InvalidSymbol(
                "symbol power needs p >= 1; use an explicit identity symbol for p = 0".into(),
            ));
        }
        if p == 1 {
            return Ok(self.clone());
        }
        if let SymbolKind::Constant(m) = &self.kind {
            let mut s = Self::constant(self.dim_d, linalg::matrix_power(m.as_ref(), p))?;
            s.hermitian |= self.hermitian;
            return Ok(s);
        }
        let inner = self.clone();
        Ok(self.derived(self.dim_n, self.hermitian, move |x, xi| {
            linalg::matrix_power(inner.eval(x, xi).as_ref(), p)
        }))
    }

    /// The scalar symbol `tr_{C^n} A(x, ξ)` as a 1×1 matrix symbol.
    pub fn scalar_trace(&self) -> MatrixSymbol {
        match &self.kind {
            SymbolKind::Constant(m) => {
                let t = linalg::trace(m.as_ref());
                Self::constant(self.dim_d, Mat::from_fn(1, 1, |_, _| t)).expect("1x1")
            }
            SymbolKind::Separable { x, matrix, xi } => {
                let t = linalg::trace(matrix.as_ref());
                let mut s = self.clone();
                s.dim_n = 1;
                s.hermitian = t.im == 0.0;
                s.kind = SymbolKind::Separable {
                    x: x.clone(),
                    matrix: Mat::from_fn(1, 1, |_, _| t),
                    xi: xi.clone(),
                };
                s
            }
            SymbolKind::Func(_) => {
                let inner = self.clone();
                self.derived(1, self.hermitian, move |x, xi| {
                    let t = linalg::trace(inner.eval(x, xi).as_ref());
                    Mat::from_fn(1, 1, |_, _| t)
                })
            }
        }
    }

    /// Pointwise functional calculus `h(Re A(x, ξ))`. Since `h(0) = 0`, the
    /// support declarations carry over. Points where `h` is undefined on the
    /// spectrum evaluate to NaN.
    pub fn apply_function(&self, h: &TestFunction) -> Result<MatrixSymbol> {
        let re = self.real_part();
        if let SymbolKind::Constant(m) = &re.kind {
            let fm = linalg::apply_spectral(m.as_ref(), |l| h.try_eval(l))?;
            let mut s = Self::constant(self.dim_d, linalg::hermitian_part(fm.as_ref()))?;
            s.hermitian = true;
            return Ok(s);
        }
        let h = h.clone();
        let n = self.dim_n;
        let inner = re.clone();
        Ok(re.derived(n, true, move |x, xi| {
            let m = inner.eval(x, xi);
            linalg::apply_spectral(m.as_ref(), |l| h.try_eval(l))
                .unwrap_or_else(|_| Mat::from_fn(n, n, |_, _| c64::new(f64::NAN, f64::NAN)))
        }))
    }

    /// Samples the symbol on a deterministic point set and checks the
    /// Hermiticity, ξ-independence-of-x and support declarations.
    pub fn verify_declarations(&self) -> Result<()> {
        let d = self.dim_d;
        let extent = |b: Option<&Aabb>| b.map_or(4.0, |b| 1.5 * b.max_abs_coordinate().max(1.0));
        let rx = extent(self.support_x.as_ref());
        let rxi = extent(self.support_xi.as_ref());
        let samples = sample_points(2 * d, 64);
        for s in &samples {
            let x: Vec<f64> = s[..d].iter().map(|u| rx * (2.0 * u - 1.0)).collect();
            let xi: Vec<f64> = s[d..].iter().map(|u| rxi * (2.0 * u - 1.0)).collect();
            let a = self.eval(&x, &xi);
            if a.nrows() != self.dim_n || a.ncols() != self.dim_n {
                return Err(Error::InvalidSymbol(format!(
                    "symbol returned a {}x{} matrix, declared n = {}",
                    a.nrows(),
                    a.ncols(),
                    self.dim_n
                )));
            }
            if self.hermitian {
                let dev = linalg::hermitian_deviation(a.as_ref());
                if dev > HERMITIAN_FLAG_TOL {
                    return Err(Error::InvalidSymbol(format!(
                        "declared Hermitian but deviation {dev:e} at x = {x:?}, xi = {xi:?}"
                    )));
                }
            }
            if self.dependence == Dependence::XiOnly {
                let x2: Vec<f64> = x.iter().map(|v| 0.37 - 0.5 * v).collect();
                let diff = linalg::max_abs((&a - &self.eval(&x2, &xi)).as_ref());
                if diff > 0.0 {
                    return Err(Error::InvalidSymbol(format!("declared xi-only but varies in x at xi = {xi:?}")));
                }
            }
            if let Some(b) = &self.support_xi {
                if !b.contains_closed(&xi) && linalg::max_abs(a.as_ref()) != 0.0 {
                    return Err(Error::InvalidSymbol(format!("nonzero outside declared momentum support at xi = {xi:?}")));
                }
            }
            if let Some(b) = &self.support_x {
                if !b.contains_closed(&x) && linalg::max_abs(a.as_ref()) != 0.0 {
                    return Err(Error::InvalidSymbol(format!("nonzero outside declared spatial support at x = {x:?}")));
                }
            }
        }
        Ok(())
    }
}

/// Halton points in `[0, 1)^dim`.
pub(crate) fn sample_points(dim: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 4] = [2, 3, 5, 7];
    (1..=count as u64)
        .map(|i| {
            PRIMES[..dim]
                .iter()
                .map(|&b| {
                    let (mut f, mut r, mut k) = (1.0, 0.0, i);
                    while k > 0 {
                        f /= b as f64;
                        r += f * (k % b) as f64;
                        k /= b;
                    }
                    r
                })
                .collect()
        })
        .collect()
}
