//! Experiment configs, L-sweeps, the two-term least-squares fit and the
//! comparison of fitted coefficients with the theoretical ones.

use std::io::Write;
use std::path::Path;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{w0, w1, w1_frak_u};
use crate::domains::{Aabb, Domain, DomainDesc, MomentumRegion};
use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{self, momentum_extent, DiscretizedOperator, GridSpec};
use crate::spectra::{trace_of_function, trace_poly_direct_complex, TestFunction, TestFunctionDesc};
use crate::symbols::{sample_points, MatrixSymbol, SymbolDesc};

pub const SCHEMA_VERSION: u32 = 1;

/// Inflation of the symbol's numerical range used as the clamp range.
pub const CLAMP_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    #[default]
    GL,
    DL,
}

/// How `tr h(op)` is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMethod {
    /// Matrix powers for polynomial `h`, eigenvalues otherwise.
    #[default]
    Auto,
    Eigen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridRule {
    /// Upper bound on `h · L · ξ_max`.
    pub phase_step: f64,
    pub min_points: usize,
    /// Builds needing more points per axis are rejected.
    pub max_points: usize,
}

impl Default for GridRule {
    fn default() -> Self {
        Self {
            phase_step: operators::DEFAULT_PHASE_STEP,
            min_points: 8,
            max_points: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureParams {
    /// Minimum ξ-quadrature panels per unit length in kernel integrals.
    pub xi_density: usize,
    pub volume_resolution: usize,
    pub boundary_nodes: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        Self {
            xi_density: 32,
            volume_resolution: 64,
            boundary_nodes: 400,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitRange {
    #[default]
    Full,
    UpperHalf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub w0_rel: f64,
    pub w1_rel: f64,
    /// Threshold for coefficients whose theoretical value vanishes.
    pub abs: f64,
    pub fit_range: FitRange,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            w0_rel: 0.01,
            w1_rel: 0.05,
            abs: 1e-3,
            fit_range: FitRange::Full,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub table: Option<String>,
    pub report: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dimension: usize,
    pub lambda: DomainDesc,
    pub gamma: DomainDesc,
    /// Momentum box for the `Γ^c` part; must contain `Γ` and the support of `A2`.
    #[serde(default)]
    pub complement_window: Option<DomainDesc>,
    pub a1: SymbolDesc,
    /// Defaults to the zero symbol of the size of `A1`.
    #[serde(default)]
    pub a2: Option<SymbolDesc>,
    pub test_function: TestFunctionDesc,
    /// Scalar symbol `b` for evaluating `W0(b)` and `W1(b)` directly.
    #[serde(default)]
    pub coefficient_symbol: Option<SymbolDesc>,
    pub l_values: Vec<f64>,
    #[serde(default)]
    pub operator: OperatorKind,
    #[serde(default)]
    pub trace_method: TraceMethod,
    #[serde(default)]
    pub grid: GridRule,
    #[serde(default)]
    pub quadrature: QuadratureParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputPaths,
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            pointer: json_pointer(e.path()),
            message: e.inner().to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn config_error(pointer: &str, message: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// A validated config with all descriptors resolved.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub lambda: Domain,
    pub gamma: Domain,
    pub a1: MatrixSymbol,
    pub a2: MatrixSymbol,
    pub h: TestFunction,
    pub coefficient_symbol: Option<MatrixSymbol>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        if config.schema_version != SCHEMA_VERSION {
            return Err(config_error(
                "/schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", config.schema_version),
            ));
        }
        let d = config.dimension;
        if d != 1 && d != 2 {
            return Err(config_error("/dimension", format!("dimension must be 1 or 2, got {d}")));
        }
        let resolve_domain = |desc: &DomainDesc, ptr: &str| -> Result<Domain> {
            let dom = Domain::try_from(desc.clone()).map_err(|e| config_error(ptr, e.to_string()))?;
            if dom.dim_d() != d {
                return Err(config_error(ptr, format!("domain has d = {}, config has d = {d}", dom.dim_d())));
            }
            Ok(dom)
        };
        let lambda = resolve_domain(&config.lambda, "/lambda")?;
        let gamma = resolve_domain(&config.gamma, "/gamma")?;
        let a1 = MatrixSymbol::from_desc(&config.a1, d).map_err(|e| config_error("/a1", e.to_string()))?;
        let a2 = match &config.a2 {
            Some(desc) => MatrixSymbol::from_desc(desc, d).map_err(|e| config_error("/a2", e.to_string()))?,
            None => MatrixSymbol::zero(d, a1.dim_n())?,
        };
        if a1.dim_n() != a2.dim_n() {
            return Err(config_error(
                "/a2",
                format!("A1 is {0}x{0}, A2 is {1}x{1}", a1.dim_n(), a2.dim_n()),
            ));
        }
        if let Some(desc) = &config.complement_window {
            let w = resolve_domain(desc, "/complement_window")?.bounding_box();
            let mut need = gamma.bounding_box();
            if let Some(s) = a2.support_xi().filter(|_| !a2.is_zero()) {
                need = need.union(s);
            }
            if !contains_box(&w, &need) {
                return Err(config_error(
                    "/complement_window",
                    "window must contain Γ and the momentum support of A2",
                ));
            }
        }
        let h = TestFunction::try_from(&config.test_function).map_err(|e| config_error("/test_function", e.to_string()))?;
        let coefficient_symbol = match &config.coefficient_symbol {
            Some(desc) => Some(MatrixSymbol::from_desc(desc, d).map_err(|e| config_error("/coefficient_symbol", e.to_string()))?),
            None => None,
        };
        validate_l_values(&config.l_values)?;
        let g = &config.grid;
        if !(g.phase_step > 0.0) || g.max_points < g.min_points.max(1) {
            return Err(config_error("/grid", "need phase_step > 0 and max_points >= min_points"));
        }
        let q = &config.quadrature;
        if q.volume_resolution < 2 || q.boundary_nodes == 0 || q.xi_density == 0 {
            return Err(config_error("/quadrature", "resolutions must be positive"));
        }
        if config.operator == OperatorKind::DL && (!h.is_polynomial() || config.trace_method == TraceMethod::Eigen) {
            return Err(config_error(
                "/operator",
                "D_L is not self-adjoint; only polynomial test functions are supported",
            ));
        }
        Ok(Self {
            config,
            lambda,
            gamma,
            a1,
            a2,
            h,
            coefficient_symbol,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::new(ExperimentConfig::from_file(path)?)
    }

    pub fn dim_d(&self) -> usize {
        self.config.dimension
    }

    /// Grid for a given `L` under the configured resolution rule.
    pub fn grid_for(&self, scale_l: f64) -> Result<GridSpec> {
        let rule = &self.config.grid;
        let xi_max = momentum_extent(&self.a2, &self.gamma);
        let grid = GridSpec::for_scale(&self.lambda, scale_l, xi_max, rule.phase_step, rule.min_points)?;
        if grid.points_per_axis > rule.max_points {
            return Err(config_error(
                "/grid/max_points",
                format!("L = {scale_l} needs {} points per axis", grid.points_per_axis),
            ));
        }
        Ok(grid)
    }

    /// `G_L` or `D_L` at scale `L`.
    pub fn build_operator(&self, scale_l: f64) -> Result<DiscretizedOperator> {
        let grid = self.grid_for(scale_l)?;
        let density = self.config.quadrature.xi_density;
        match self.config.operator {
            OperatorKind::GL => operators::build_gl(&self.a1, &self.a2, &self.lambda, &self.gamma, scale_l, &grid, density),
            OperatorKind::DL => operators::build_dl(&self.a1, &self.a2, &self.lambda, &self.gamma, scale_l, &grid, density),
        }
    }

    /// Numerical range of `Re A1` and `Re A2` (sampled, with 0 adjoined),
    /// inflated by [`CLAMP_SLACK`] and intersected with the domain of `h`.
    pub fn clamp_range(&self) -> Result<(f64, f64)> {
        let d = self.dim_d();
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 0.0;
        let xbox = self.lambda.bounding_box();
        for (a, region) in [(&self.a1, self.gamma.bounding_box()), (&self.a2, momentum_box(&self.a2, &self.gamma))] {
            let re = a.real_part();
            let points: Vec<(Vec<f64>, Vec<f64>)> = if re.is_constant() {
                vec![(vec![0.0; d], vec![0.0; d])]
            } else {
                sample_points(2 * d, 256)
                    .into_iter()
                    .map(|u| (scale_into(&u[..d], &xbox), scale_into(&u[d..], &region)))
                    .collect()
            };
            for (x, xi) in points {
                let m = linalg::hermitian_part(re.eval(&x, &xi).as_ref());
                for l in linalg::hermitian_eigenvalues(m.as_ref())? {
                    lo = lo.min(l);
                    hi = hi.max(l);
                }
            }
        }
        let (mut lo, mut hi) = (lo - CLAMP_SLACK, hi + CLAMP_SLACK);
        if let Some((dlo, dhi)) = self.h.domain() {
            lo = lo.max(dlo);
            hi = hi.min(dhi);
        }
        Ok((lo, hi))
    }
}

fn contains_box(outer: &Aabb, inner: &Aabb) -> bool {
    outer.lo.iter().zip(&inner.lo).all(|(o, i)| o <= i) && outer.hi.iter().zip(&inner.hi).all(|(o, i)| o >= i)
}

fn momentum_box(a: &MatrixSymbol, gamma: &Domain) -> Aabb {
    let g = gamma.bounding_box();
    match a.support_xi() {
        Some(s) => g.union(s),
        None => g,
    }
}

fn scale_into(u: &[f64], b: &Aabb) -> Vec<f64> {
    u.iter().enumerate().map(|(k, t)| b.lo[k] + t * (b.hi[k] - b.lo[k])).collect()
}

fn validate_l_values(ls: &[f64]) -> Result<()> {
    if ls.is_empty() {
        return Err(config_error("/l_values", "at least one L value is required"));
    }
    if let Some(k) = ls.iter().position(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(config_error(&format!("/l_values/{k}"), "L values must be positive"));
    }
    if let Some(k) = ls.windows(2).position(|w| w[1] <= w[0]) {
        return Err(config_error(&format!("/l_values/{}", k + 1), "L values must be strictly increasing"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sweep

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub scale_l: f64,
    pub trace: f64,
    /// Grid points per axis.
    #[serde(rename = "N")]
    pub grid_n: usize,
    /// Total eigenvalue displacement caused by clamping.
    pub clamp: f64,
}

/// Worker count from `WIDOMLAB_THREADS`, defaulting to the available
/// parallelism.
pub fn worker_count() -> usize {
    std::env::var("WIDOMLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// `tr h(op)`: matrix powers for polynomial `h`, a full eigensolve otherwise.
pub fn trace_row(exp: &Experiment, op: &DiscretizedOperator, clamp: Option<(f64, f64)>) -> Result<(f64, f64)> {
    if let (TraceMethod::Auto, Some(coeffs)) = (exp.config.trace_method, exp.h.polynomial_coeffs()) {
        let t = trace_poly_direct_complex(op, coeffs)?;
        if t.im.abs() > 1e-8 * t.re.abs().max(1.0) {
            log::warn!("L = {}: polynomial trace has imaginary part {:e}", op.scale_l, t.im);
        }
        return Ok((t.re, 0.0));
    }
    let st = trace_of_function(op, &exp.h, clamp)?;
    Ok((st.value, st.clamp_total))
}

fn sweep_row(exp: &Experiment, scale_l: f64, clamp: Option<(f64, f64)>) -> Result<SweepRow> {
    let op = exp.build_operator(scale_l)?;
    let (trace, clamp_total) = trace_row(exp, &op, clamp)?;
    log::info!("L = {scale_l}: trace = {trace}, N = {}", op.grid.points_per_axis);
    Ok(SweepRow {
        scale_l,
        trace,
        grid_n: op.grid.points_per_axis,
        clamp: clamp_total,
    })
}

/// One row per `L`, in config order. Rows run in parallel on a pool bounded
/// by [`worker_count`].
pub fn run_sweep(exp: &Experiment) -> Result<Vec<SweepRow>> {
    let clamp = if exp.h.is_polynomial() && exp.config.trace_method == TraceMethod::Auto {
        None
    } else {
        Some(exp.clamp_range()?)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Eigensolver(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        exp.config
            .l_values
            .par_iter()
            .map(|&l| {
                sweep_row(exp, l, clamp).map_err(|e| Error::AtScale {
                    l,
                    source: Box::new(e),
                })
            })
            .collect()
    })
}

/// CSV with header `L,trace,N,clamp`.
pub fn write_table_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Fit

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitCoefficients {
    pub c_d: f64,
    pub c_log: f64,
    pub c_1: f64,
    /// Condition number of the column-scaled design matrix.
    pub condition_number: f64,
    pub rows: usize,
}

/// Least-squares fit of `c_d L^d + c_log L^{d-1} log L + c_1 L^{d-1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub dim_d: usize,
    pub full: FitCoefficients,
    /// Refit on the upper half of the L range.
    pub upper_half: FitCoefficients,
    /// Residuals of the full fit, one per row.
    pub residuals: Vec<f64>,
}

impl AsymptoticFit {
    pub fn select(&self, range: FitRange) -> &FitCoefficients {
        match range {
            FitRange::Full => &self.full,
            FitRange::UpperHalf => &self.upper_half,
        }
    }
}

fn design_row(l: f64, d: usize) -> [f64; 3] {
    let p = l.powi(d as i32 - 1);
    [p * l, p * l.ln(), p]
}

fn least_squares(ls: &[f64], ts: &[f64], d: usize) -> Result<(FitCoefficients, Vec<f64>)> {
    let m = ls.len();
    let raw = Mat::from_fn(m, 3, |i, j| design_row(ls[i], d)[j]);
    let scale: Vec<f64> = (0..3)
        .map(|j| (0..m).map(|i| raw[(i, j)].abs()).fold(0.0, f64::max))
        .collect();
    if scale.contains(&0.0) {
        return Err(Error::RankDeficient("design matrix has a zero column".into()));
    }
    let a = Mat::from_fn(m, 3, |i, j| raw[(i, j)] / scale[j]);
    let sv = a
        .singular_values()
        .map_err(|e| Error::Eigensolver(format!("SVD of the design matrix failed: {e:?}")))?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin > 1e-12 * smax) {
        return Err(Error::RankDeficient(format!("design matrix singular values {sv:?}")));
    }
    let rhs = Mat::from_fn(m, 1, |i, _| ts[i]);
    let sol = a.qr().solve_lstsq(&rhs);
    let c: Vec<f64> = (0..3).map(|j| sol[(j, 0)] / scale[j]).collect();
    let residuals = (0..m)
        .map(|i| {
            let r = design_row(ls[i], d);
            ts[i] - (c[0] * r[0] + c[1] * r[1] + c[2] * r[2])
        })
        .collect();
    Ok((
        FitCoefficients {
            c_d: c[0],
            c_log: c[1],
            c_1: c[2],
            condition_number: smax / smin,
            rows: m,
        },
        residuals,
    ))
}

/// Fits the two-term model to `(L, trace)` pairs; needs at least four rows
/// with distinct `L`. The upper-half refit uses the last `max(3, ⌈m/2⌉)`
/// rows in increasing `L`.
pub fn fit_two_term(table: &[(f64, f64)], dim_d: usize) -> Result<AsymptoticFit> {
    if table.len() < 4 {
        return Err(Error::RankDeficient(format!("need at least 4 rows, got {}", table.len())));
    }
    let mut sorted = table.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::RankDeficient("duplicated L values".into()));
    }
    if sorted.iter().any(|(l, t)| !(l.is_finite() && *l > 0.0 && t.is_finite())) {
        return Err(Error::RankDeficient("non-finite or non-positive entries".into()));
    }
    let ls: Vec<f64> = table.iter().map(|r| r.0).collect();
    let ts: Vec<f64> = table.iter().map(|r| r.1).collect();
    let (full, residuals) = least_squares(&ls, &ts, dim_d)?;
    let k = 3usize.max(sorted.len().div_ceil(2));
    let upper = &sorted[sorted.len() - k..];
    let ul: Vec<f64> = upper.iter().map(|r| r.0).collect();
    let ut: Vec<f64> = upper.iter().map(|r| r.1).collect();
    let (upper_half, _) = least_squares(&ul, &ut, dim_d)?;
    Ok(AsymptoticFit {
        dim_d,
        full,
        upper_half,
        residuals,
    })
}

pub fn fit_rows(rows: &[SweepRow], dim_d: usize) -> Result<AsymptoticFit> {
    let table: Vec<(f64, f64)> = rows.iter().map(|r| (r.scale_l, r.trace)).collect();
    fit_two_term(&table, dim_d)
}

// ---------------------------------------------------------------------------
// Theory

/// `W0` and `W1` with quadrature error estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoryCoefficients {
    #[serde(rename = "W0")]
    pub w0: f64,
    #[serde(rename = "W1")]
    pub w1: f64,
    pub est_error: f64,
}

/// `W0(tr h(Re A1); Λ, Γ) + W0(tr h(Re A2); Λ, Γ^c)` and
/// `W1(U(h; Re A1, Re A2); ∂Λ, ∂Γ)`.
pub fn theory_coefficients(exp: &Experiment) -> Result<TheoryCoefficients> {
    let q = &exp.config.quadrature;
    let b1 = exp.a1.apply_function(&exp.h)?.scalar_trace();
    let b2 = exp.a2.apply_function(&exp.h)?.scalar_trace();
    let r1 = w0(&b1, &exp.lambda, &MomentumRegion::Inside(exp.gamma.clone()), q.volume_resolution)?;
    let r2 = w0(&b2, &exp.lambda, &MomentumRegion::Complement(exp.gamma.clone()), q.volume_resolution)?;
    let dl = exp.lambda.boundary_quadrature(q.boundary_nodes);
    let dg = exp.gamma.boundary_quadrature(q.boundary_nodes);
    let s = w1_frak_u(&exp.h, &exp.a1, &exp.a2, &dl, &dg)?;
    Ok(TheoryCoefficients {
        w0: r1.value + r2.value,
        w1: s.value,
        est_error: r1.est_error + r2.est_error + s.est_error,
    })
}

/// `W0(b; Λ, Γ)` and `W1(b; ∂Λ, ∂Γ)` for the config's coefficient symbol.
pub fn symbol_coefficients(exp: &Experiment, b: &MatrixSymbol) -> Result<TheoryCoefficients> {
    let q = &exp.config.quadrature;
    let r0 = w0(b, &exp.lambda, &MomentumRegion::Inside(exp.gamma.clone()), q.volume_resolution)?;
    let dl = exp.lambda.boundary_quadrature(q.boundary_nodes);
    let dg = exp.gamma.boundary_quadrature(q.boundary_nodes);
    let r1 = w1(b, &dl, &dg)?;
    Ok(TheoryCoefficients {
        w0: r0.value,
        w1: r1.value,
        est_error: r0.est_error + r1.est_error,
    })
}

/// The `coeff` subcommand: coefficients of the coefficient symbol when one
/// is configured, otherwise the theoretical coefficients of the experiment.
pub fn config_coefficients(exp: &Experiment) -> Result<TheoryCoefficients> {
    match &exp.coefficient_symbol {
        Some(b) => symbol_coefficients(exp, b),
        None => theory_coefficients(exp),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    Relative,
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    PASS,
    FAIL,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub fitted: f64,
    pub theory: f64,
    pub mode: ErrorMode,
    /// Relative error, or absolute error when the theory value vanishes.
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn compare(fitted: f64, theory: f64, rel_tol: f64, abs_tol: f64) -> Comparison {
    if theory.abs() < 1e-14 {
        let error = fitted.abs();
        Comparison {
            fitted,
            theory,
            mode: ErrorMode::Absolute,
            error,
            tolerance: abs_tol,
            pass: error <= abs_tol,
        }
    } else {
        let error = (fitted - theory).abs() / theory.abs();
        Comparison {
            fitted,
            theory,
            mode: ErrorMode::Relative,
            error,
            tolerance: rel_tol,
            pass: error <= rel_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub fit: AsymptoticFit,
    pub fit_range: FitRange,
    #[serde(rename = "theory_W0")]
    pub theory_w0: f64,
    #[serde(rename = "theory_W1")]
    pub theory_w1: f64,
    pub theory_est_error: f64,
    #[serde(rename = "rel_err_W0")]
    pub rel_err_w0: f64,
    #[serde(rename = "rel_err_W1")]
    pub rel_err_w1: f64,
    #[serde(rename = "W0")]
    pub w0: Comparison,
    #[serde(rename = "W1")]
    pub w1: Comparison,
    pub verdict: Verdict,
}

pub fn compare_with_theory(fit: &AsymptoticFit, exp: &Experiment) -> Result<Report> {
    let theory = theory_coefficients(exp)?;
    let tol = &exp.config.tolerances;
    let chosen = fit.select(tol.fit_range);
    let cw0 = compare(chosen.c_d, theory.w0, tol.w0_rel, tol.abs);
    let cw1 = compare(chosen.c_log, theory.w1, tol.w1_rel, tol.abs);
    let verdict = if cw0.pass && cw1.pass { Verdict::PASS } else { Verdict::FAIL };
    Ok(Report {
        fit: fit.clone(),
        fit_range: tol.fit_range,
        theory_w0: theory.w0,
        theory_w1: theory.w1,
        theory_est_error: theory.est_error,
        rel_err_w0: cw0.error,
        rel_err_w1: cw1.error,
        w0: cw0,
        w1: cw1,
        verdict,
    })
}

/// Sweep, fit and compare.
pub fn verify(exp: &Experiment) -> Result<(Vec<SweepRow>, Report)> {
    let rows = run_sweep(exp)?;
    let fit = fit_rows(&rows, exp.dim_d())?;
    let report = compare_with_theory(&fit, exp)?;
    Ok((rows, report))
}
