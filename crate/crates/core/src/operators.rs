//! Dense Nyström discretizations of truncated Wiener-Hopf operators on a
//! uniform grid over `Λ`.
//!
//! Every kernel is sampled at cell centers of a uniform lattice and weighted
//! by the cell volume `h^d`, so the matrix trace equals the midpoint sum of
//! the kernel diagonal. Kernels of ξ-only symbols depend on `x - y` only and
//! are tabulated once per lattice offset.
//!
//! Momentum projections and ξ-only symbols are Fourier multipliers, so
//! `Op(1_Γ) Op(A) Op(1_Γ) = Op(1_Γ A)` is assembled as a single kernel.
//! Symbols depending on `x` use `Op^l(A) Op(1_Γ) = Op^l(A 1_Γ)` and an
//! intermediate lattice over the spatial support of `A` for the remaining
//! outer projection.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::Serialize;

use crate::domains::{Aabb, Domain, MomentumRegion};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::quadrature::composite_gauss_legendre;
use crate::symbols::{MatrixSymbol, Profile};

/// Largest `h · L · ξ_max` allowed by the default grid rule (8 points per
/// kernel oscillation).
pub const DEFAULT_PHASE_STEP: f64 = PI / 4.0;

const GL_ORDER: usize = 16;

/// Uniform lattice of cell centers over the bounding box of `Λ`, restricted
/// to the nodes inside `Λ`. Nodes are ordered with the first axis slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub dim_d: usize,
    pub points_per_axis: usize,
    pub cell: Aabb,
    pub spacing: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    /// Integer lattice coordinates of each node; node = lo + (k + 1/2) h.
    pub lattice: Vec<Vec<i64>>,
}

impl GridSpec {
    pub fn new(lambda: &Domain, points_per_axis: usize) -> Result<Self> {
        if points_per_axis == 0 {
            return Err(Error::InvalidDomain("grid needs at least one point per axis".into()));
        }
        let cell = lambda.bounding_box();
        let d = cell.dim();
        let spacing: Vec<f64> = (0..d).map(|k| (cell.hi[k] - cell.lo[k]) / points_per_axis as f64).collect();
        let n = points_per_axis as i64;
        let mut nodes = Vec::new();
        let mut lattice = Vec::new();
        let mut push = |idx: Vec<i64>| {
            let p: Vec<f64> = idx
                .iter()
                .enumerate()
                .map(|(k, &i)| cell.lo[k] + (i as f64 + 0.5) * spacing[k])
                .collect();
            if lambda.contains(&p) {
                nodes.push(p);
                lattice.push(idx);
            }
        };
        if d == 1 {
            (0..n).for_each(|i| push(vec![i]));
        } else {
            for i in 0..n {
                for j in 0..n {
                    push(vec![i, j]);
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidDomain("grid has no nodes inside the domain".into()));
        }
        Ok(Self {
            dim_d: d,
            points_per_axis,
            cell,
            spacing,
            nodes,
            lattice,
        })
    }

    /// Grid satisfying `h · L · xi_max <= phase_step` on every axis.
    pub fn for_scale(lambda: &Domain, scale_l: f64, xi_max: f64, phase_step: f64, min_points: usize) -> Result<Self> {
        let bb = lambda.bounding_box();
        let extent = bb.lo.iter().zip(&bb.hi).map(|(l, h)| h - l).fold(0.0, f64::max);
        let n = (extent * scale_l * xi_max / phase_step).ceil() as usize;
        Self::new(lambda, n.max(min_points).max(1))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `h^d`
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lattice points (same origin and spacing) inside the closed box.
    fn lattice_in(&self, region: &Aabb) -> (Vec<Vec<f64>>, Vec<Vec<i64>>) {
        let d = self.dim_d;
        let ranges: Vec<(i64, i64)> = (0..d)
            .map(|k| {
                let lo = ((region.lo[k] - self.cell.lo[k]) / self.spacing[k] - 0.5).ceil() as i64;
                let hi = ((region.hi[k] - self.cell.lo[k]) / self.spacing[k] - 0.5).floor() as i64;
                (lo, hi)
            })
            .collect();
        let mut idx_list = Vec::new();
        if d == 1 {
            for i in ranges[0].0..=ranges[0].1 {
                idx_list.push(vec![i]);
            }
        } else {
            for i in ranges[0].0..=ranges[0].1 {
                for j in ranges[1].0..=ranges[1].1 {
                    idx_list.push(vec![i, j]);
                }
            }
        }
        let pts = idx_list
            .iter()
            .map(|idx| {
                idx.iter()
                    .enumerate()
                    .map(|(k, &i)| self.cell.lo[k] + (i as f64 + 0.5) * self.spacing[k])
                    .collect()
            })
            .collect();
        (pts, idx_list)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    TL,
    SL,
    DL,
    GL,
    RawKernel,
}

/// A dense `(m·n) × (m·n)` matrix, `m` grid nodes with `n × n` blocks.
#[derive(Clone, Debug)]
pub struct DiscretizedOperator {
    pub matrix: CMat,
    pub scale_l: f64,
    pub grid: GridSpec,
    pub block_n: usize,
    pub hermitian: bool,
    pub provenance: Provenance,
}

impl DiscretizedOperator {
    fn new(matrix: CMat, scale_l: f64, grid: &GridSpec, block_n: usize, provenance: Provenance) -> Self {
        let hermitian = matches!(provenance, Provenance::SL | Provenance::GL);
        Self {
            matrix,
            scale_l,
            grid: grid.clone(),
            block_n,
            hermitian,
            provenance,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(self.matrix.as_ref())
    }
}

// ---------------------------------------------------------------------------
// Momentum integration

/// Signed union of bounded momentum regions: `Σ_k sign_k ∫_{W_k}`.
#[derive(Clone, Debug)]
struct MomentumParts(Vec<(f64, Domain)>);

impl MomentumParts {
    /// The region seen by a symbol `A` paired with `region`: `Γ` itself, or
    /// `S - Γ` for `Γ^c` where `S` is the momentum support of `A`.
    fn for_symbol(region: &MomentumRegion, a: &MatrixSymbol) -> Result<Self> {
        match region {
            MomentumRegion::Inside(g) => Ok(Self(vec![(1.0, g.clone())])),
            MomentumRegion::Complement(g) => {
                let s = a.support_xi().ok_or_else(|| {
                    Error::TraceClassViolated(
                        "a symbol paired with a complement momentum region must be compactly supported in ξ".into(),
                    )
                })?;
                Ok(Self(vec![(1.0, Domain::Box(s.clone())), (-1.0, g.clone())]))
            }
        }
    }

    fn all_boxes(&self) -> bool {
        self.0.iter().all(|(_, d)| matches!(d, Domain::Interval { .. } | Domain::Box(_)))
    }

    /// Quadrature nodes with signed weights, fine enough for phases up to
    /// `L · s_max` and `density` panels per unit length.
    fn rule(&self, scale_l: f64, s_max: f64, density: usize) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for (sgn, dom) in &self.0 {
            match dom {
                Domain::Interval { .. } | Domain::Box(_) => {
                    let bb = dom.bounding_box();
                    let axes: Vec<Vec<(f64, f64)>> = (0..bb.dim())
                        .map(|k| {
                            let width = bb.hi[k] - bb.lo[k];
                            let panels = (scale_l * s_max * width / (2.0 * PI)).ceil() as usize
                                + (density as f64 * width).ceil() as usize;
                            composite_gauss_legendre(bb.lo[k], bb.hi[k], panels, GL_ORDER)
                        })
                        .collect();
                    if axes.len() == 1 {
                        out.extend(axes[0].iter().map(|&(x, w)| (vec![x], sgn * w)));
                    } else {
                        for &(x, wx) in &axes[0] {
                            for &(y, wy) in &axes[1] {
                                out.push((vec![x, y], sgn * wx * wy));
                            }
                        }
                    }
                }
                Domain::Disk { .. } | Domain::Polygon { .. } => {
                    let bb = dom.bounding_box();
                    let diam = ((bb.hi[0] - bb.lo[0]).powi(2) + (bb.hi[1] - bb.lo[1]).powi(2)).sqrt();
                    let res = (scale_l * s_max * diam / 2.0).ceil() as usize + 16 + (density as f64 * diam / 2.0) as usize;
                    let q = dom.volume_quadrature(res);
                    out.extend(q.points.into_iter().zip(q.weights).map(|(p, w)| (p, sgn * w)));
                }
            }
        }
        out
    }
}

/// `(L/2π) ∫_a^b e^{iLξs} dξ`
fn interval_factor(a: f64, b: f64, scale_l: f64, s: f64) -> c64 {
    let c = 0.5 * (a + b);
    let w = 0.5 * (b - a);
    if s == 0.0 {
        return c64::new(scale_l * w / PI, 0.0);
    }
    let amp = (scale_l * w * s).sin() / (PI * s);
    let (sn, cs) = (scale_l * c * s).sin_cos();
    c64::new(amp * cs, amp * sn)
}

/// `(L/2π)^d ∫_W e^{iLξ·s} dξ` in closed form for boxes.
fn closed_form_indicator(parts: &MomentumParts, scale_l: f64, s: &[f64]) -> c64 {
    let mut total = c64::new(0.0, 0.0);
    for (sgn, dom) in &parts.0 {
        let bb = dom.bounding_box();
        let mut f = c64::new(*sgn, 0.0);
        for k in 0..bb.dim() {
            f *= interval_factor(bb.lo[k], bb.hi[k], scale_l, s[k]);
        }
        total += f;
    }
    total
}

fn phase_sum(rule: &[(Vec<f64>, f64)], weights: &[f64], scale_l: f64, s: &[f64]) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for ((xi, _), w) in rule.iter().zip(weights) {
        let phase: f64 = xi.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() * scale_l;
        let (sn, cs) = phase.sin_cos();
        acc += c64::new(w * cs, w * sn);
    }
    acc
}

/// Scalar momentum kernel `k(s) = (L/2π)^d ∫_W e^{iLξ·s} g(ξ) dξ` over
/// a set of offsets.
fn scalar_kernel_values(
    parts: &MomentumParts,
    profile: &Profile,
    scale_l: f64,
    offsets: &[Vec<f64>],
    density: usize,
) -> Vec<c64> {
    if *profile == Profile::One && parts.all_boxes() {
        return offsets.par_iter().map(|s| closed_form_indicator(parts, scale_l, s)).collect();
    }
    let d = offsets.first().map_or(1, Vec::len);
    let s_max = offsets.iter().map(|s| norm(s)).fold(0.0, f64::max);
    let rule = parts.rule(scale_l, s_max, density);
    let norm_factor = (scale_l / (2.0 * PI)).powi(d as i32);
    let weights: Vec<f64> = rule.iter().map(|(xi, w)| w * profile.eval(xi) * norm_factor).collect();
    offsets.par_iter().map(|s| phase_sum(&rule, &weights, scale_l, s)).collect()
}

/// Matrix momentum kernel for a general ξ-only symbol.
fn matrix_kernel_values(
    parts: &MomentumParts,
    a: &MatrixSymbol,
    x0: &[f64],
    scale_l: f64,
    offsets: &[Vec<f64>],
    density: usize,
) -> Vec<CMat> {
    let n = a.dim_n();
    let d = x0.len();
    let s_max = offsets.iter().map(|s| norm(s)).fold(0.0, f64::max);
    let rule = parts.rule(scale_l, s_max, density);
    let norm_factor = (scale_l / (2.0 * PI)).powi(d as i32);
    let values: Vec<CMat> = rule.par_iter().map(|(xi, _)| a.eval(x0, xi)).collect();
    offsets
        .par_iter()
        .map(|s| {
            let mut acc = Mat::<c64>::zeros(n, n);
            for ((xi, w), v) in rule.iter().zip(&values) {
                let phase: f64 = xi.iter().zip(s).map(|(p, q)| p * q).sum::<f64>() * scale_l;
                let (sn, cs) = phase.sin_cos();
                let z = c64::new(cs, sn) * (w * norm_factor);
                for j in 0..n {
                    for i in 0..n {
                        acc[(i, j)] += v[(i, j)] * z;
                    }
                }
            }
            acc
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Offset tables

/// Kernel values for every lattice offset between a row and a column node
/// set, indexed densely.
struct OffsetTable<T> {
    lo: Vec<i64>,
    extent: Vec<i64>,
    values: Vec<T>,
}

impl<T> OffsetTable<T> {
    fn index(&self, delta: &[i64]) -> usize {
        let mut idx = 0usize;
        for k in 0..delta.len() {
            idx = idx * self.extent[k] as usize + (delta[k] - self.lo[k]) as usize;
        }
        idx
    }

    fn get(&self, row: &[i64], col: &[i64]) -> &T {
        let delta: Vec<i64> = row.iter().zip(col).map(|(a, b)| a - b).collect();
        &self.values[self.index(&delta)]
    }
}

fn offset_range(rows: &[Vec<i64>], cols: &[Vec<i64>]) -> (Vec<i64>, Vec<i64>) {
    let d = rows[0].len();
    let mut lo = vec![0i64; d];
    let mut extent = vec![0i64; d];
    for k in 0..d {
        let rmin = rows.iter().map(|r| r[k]).min().unwrap();
        let rmax = rows.iter().map(|r| r[k]).max().unwrap();
        let cmin = cols.iter().map(|c| c[k]).min().unwrap();
        let cmax = cols.iter().map(|c| c[k]).max().unwrap();
        lo[k] = rmin - cmax;
        extent[k] = rmax - cmin - lo[k] + 1;
    }
    (lo, extent)
}

fn offset_vectors(lo: &[i64], extent: &[i64], spacing: &[f64]) -> Vec<Vec<f64>> {
    let total: i64 = extent.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut delta = vec![0i64; lo.len()];
            for k in (0..lo.len()).rev() {
                delta[k] = lo[k] + flat % extent[k];
                flat /= extent[k];
            }
            delta.iter().zip(spacing).map(|(d, h)| *d as f64 * h).collect()
        })
        .collect()
}

fn scalar_table(
    parts: &MomentumParts,
    profile: &Profile,
    scale_l: f64,
    rows: &[Vec<i64>],
    cols: &[Vec<i64>],
    spacing: &[f64],
    density: usize,
) -> OffsetTable<c64> {
    let (lo, extent) = offset_range(rows, cols);
    let offsets = offset_vectors(&lo, &extent, spacing);
    let values = scalar_kernel_values(parts, profile, scale_l, &offsets, density);
    OffsetTable { lo, extent, values }
}

/// Assembles a `(rows·n) × (cols·n)` matrix from `n × n` blocks.
fn assemble<F>(n_rows: usize, n_cols: usize, n: usize, block: F) -> CMat
where
    F: Fn(usize, usize, &mut [c64]) + Sync,
{
    let dim_r = n_rows * n;
    let dim_c = n_cols * n;
    let mut data = vec![c64::new(0.0, 0.0); dim_r * dim_c];
    // Column-major: each chunk holds the `n` columns of one column node.
    data.par_chunks_mut(dim_r * n).enumerate().for_each(|(j, chunk)| {
        let mut buf = vec![c64::new(0.0, 0.0); n * n];
        for i in 0..n_rows {
            block(i, j, &mut buf);
            for b in 0..n {
                for a in 0..n {
                    chunk[b * dim_r + i * n + a] = buf[a * n + b];
                }
            }
        }
    });
    Mat::from_fn(dim_r, dim_c, |r, c| data[c * dim_r + r])
}

fn mat_to_row_major(m: &CMat) -> Vec<c64> {
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

// ---------------------------------------------------------------------------
// Public builders

fn check_scale(scale_l: f64) -> Result<()> {
    if !(scale_l > 0.0) || !scale_l.is_finite() {
        return Err(Error::InvalidSymbol(format!("scaling parameter must be positive, got {scale_l}")));
    }
    Ok(())
}

fn check_dims(grid: &GridSpec, d: usize, what: &str) -> Result<()> {
    if grid.dim_d != d {
        return Err(Error::DimensionMismatch(format!("{what} has d = {d}, grid has d = {}", grid.dim_d)));
    }
    Ok(())
}

/// Largest `|ξ|` coordinate over the momentum windows of `D_L(A1, A2)` or
/// `G_L(A1, A2)`: `Γ` for `A1` and the support of `A2` for `Γ^c`.
pub fn momentum_extent(a2: &MatrixSymbol, gamma: &Domain) -> f64 {
    let g = gamma.bounding_box().max_abs_coordinate();
    match a2.support_xi() {
        Some(s) if !a2.is_zero() => g.max(s.max_abs_coordinate()),
        _ => g,
    }
}

/// Nyström matrix of `1_Λ Op_L(1_Γ) 1_Λ`: `K_xy = h^d (L/2π)^d ∫_Γ e^{iLξ(x-y)} dξ`.
pub fn kernel_indicator(gamma: &Domain, scale_l: f64, grid: &GridSpec) -> Result<DiscretizedOperator> {
    check_scale(scale_l)?;
    check_dims(grid, gamma.dim_d(), "Γ")?;
    let parts = MomentumParts(vec![(1.0, gamma.clone())]);
    let table = scalar_table(&parts, &Profile::One, scale_l, &grid.lattice, &grid.lattice, &grid.spacing, 32);
    let hd = grid.cell_volume();
    let m = assemble(grid.len(), grid.len(), 1, |i, j, out| {
        out[0] = *table.get(&grid.lattice[i], &grid.lattice[j]) * hd;
    });
    let mut op = DiscretizedOperator::new(m, scale_l, grid, 1, Provenance::RawKernel);
    op.hermitian = true;
    Ok(op)
}

/// Nyström matrix of `1_Λ Op_L^l(A 1_W) 1_Λ`, with `W` the given momentum
/// window or, when absent, the declared momentum support of `A`.
/// `xi_density` is the minimum number of quadrature panels per unit of
/// momentum length.
pub fn kernel_symbol(
    a: &MatrixSymbol,
    scale_l: f64,
    grid: &GridSpec,
    window: Option<&MomentumRegion>,
    xi_density: usize,
) -> Result<DiscretizedOperator> {
    check_scale(scale_l)?;
    check_dims(grid, a.dim_d(), "symbol")?;
    let parts = match window {
        Some(w) => MomentumParts::for_symbol(w, a)?,
        None => {
            let s = a.support_xi().ok_or_else(|| {
                Error::MomentumWindowRequired("symbol has no declared momentum support and no window was given".into())
            })?;
            MomentumParts(vec![(1.0, Domain::Box(s.clone()))])
        }
    };
    let m = symbol_kernel(a, &parts, scale_l, grid, &grid.nodes, &grid.lattice, xi_density)?;
    Ok(DiscretizedOperator::new(m, scale_l, grid, a.dim_n(), Provenance::RawKernel))
}

/// `h^d k_A(z, y)` for rows `z` (with lattice indices) and columns `y` from
/// the grid.
fn symbol_kernel(
    a: &MatrixSymbol,
    parts: &MomentumParts,
    scale_l: f64,
    grid: &GridSpec,
    row_nodes: &[Vec<f64>],
    row_lattice: &[Vec<i64>],
    density: usize,
) -> Result<CMat> {
    let n = a.dim_n();
    let hd = grid.cell_volume();
    if a.is_zero() {
        return Ok(Mat::zeros(row_nodes.len() * n, grid.len() * n));
    }
    let separable = a
        .constant_value()
        .map(|m| (Profile::One, m.clone(), Profile::One))
        .or_else(|| a.as_separable().map(|(f, m, g)| (f.clone(), m.clone(), g.clone())));
    if let Some((fx, m, gxi)) = separable {
        let table = scalar_table(parts, &gxi, scale_l, row_lattice, &grid.lattice, &grid.spacing, density);
        let row_factor: Vec<f64> = row_nodes.iter().map(|z| fx.eval(z)).collect();
        let mr = mat_to_row_major(&m);
        return Ok(assemble(row_nodes.len(), grid.len(), n, |i, j, out| {
            let k = *table.get(&row_lattice[i], &grid.lattice[j]) * (hd * row_factor[i]);
            for (o, v) in out.iter_mut().zip(&mr) {
                *o = v * k;
            }
        }));
    }
    if a.is_xi_only() {
        let (lo, extent) = offset_range(row_lattice, &grid.lattice);
        let offsets = offset_vectors(&lo, &extent, &grid.spacing);
        let x0 = vec![0.0; grid.dim_d];
        let values = matrix_kernel_values(parts, a, &x0, scale_l, &offsets, density);
        let table = OffsetTable { lo, extent, values };
        return Ok(assemble(row_nodes.len(), grid.len(), n, |i, j, out| {
            let blk = table.get(&row_lattice[i], &grid.lattice[j]);
            for (k, o) in out.iter_mut().enumerate() {
                *o = blk[(k / n, k % n)] * hd;
            }
        }));
    }
    // General x-dependent symbol: quadrature per row node.
    let s_max = {
        let (lo, extent) = offset_range(row_lattice, &grid.lattice);
        let far: Vec<f64> = (0..grid.dim_d)
            .map(|k| (lo[k].abs().max((lo[k] + extent[k] - 1).abs())) as f64 * grid.spacing[k])
            .collect();
        norm(&far)
    };
    let rule = parts.rule(scale_l, s_max, density);
    let norm_factor = (scale_l / (2.0 * PI)).powi(grid.dim_d as i32) * hd;
    let rows: Vec<Vec<CMat>> = row_nodes
        .par_iter()
        .map(|z| {
            let vals: Vec<CMat> = rule.iter().map(|(xi, _)| a.eval(z, xi)).collect();
            grid.nodes
                .iter()
                .map(|y| {
                    let mut acc = Mat::<c64>::zeros(n, n);
                    for ((xi, w), v) in rule.iter().zip(&vals) {
                        let phase: f64 = xi.iter().zip(z.iter().zip(y)).map(|(p, (a, b))| p * (a - b)).sum::<f64>() * scale_l;
                        let (sn, cs) = phase.sin_cos();
                        let c = c64::new(cs, sn) * (w * norm_factor);
                        for jj in 0..n {
                            for ii in 0..n {
                                acc[(ii, jj)] += v[(ii, jj)] * c;
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok(assemble(row_nodes.len(), grid.len(), n, |i, j, out| {
        let blk = &rows[i][j];
        for (k, o) in out.iter_mut().enumerate() {
            *o = blk[(k / n, k % n)];
        }
    }))
}

fn check_sandwich(a: &MatrixSymbol, lambda: &Domain, region: &MomentumRegion, grid: &GridSpec) -> Result<()> {
    check_dims(grid, a.dim_d(), "symbol")?;
    check_dims(grid, lambda.dim_d(), "Λ")?;
    check_dims(grid, region.domain().dim_d(), "Γ")?;
    if region.is_complement() && !a.is_zero() && a.support_xi().is_none() {
        return Err(Error::TraceClassViolated(
            "the symbol paired with Γ^c must be compactly supported in ξ".into(),
        ));
    }
    if !a.is_xi_only() && !a.is_zero() && a.support_x().is_none() {
        return Err(Error::TraceClassViolated(
            "an x-dependent symbol needs a declared spatial support".into(),
        ));
    }
    Ok(())
}

/// `T_L(A; Λ, Γ) = 1_Λ Op_L(1_Γ) Op_L^l(A) Op_L(1_Γ) 1_Λ` (or with `Γ^c`).
pub fn build_tl(
    a: &MatrixSymbol,
    lambda: &Domain,
    region: &MomentumRegion,
    scale_l: f64,
    grid: &GridSpec,
    xi_density: usize,
) -> Result<DiscretizedOperator> {
    check_scale(scale_l)?;
    check_sandwich(a, lambda, region, grid)?;
    let n = a.dim_n();
    if a.is_zero() {
        let dim = grid.len() * n;
        return Ok(DiscretizedOperator::new(Mat::zeros(dim, dim), scale_l, grid, n, Provenance::TL));
    }
    let parts = MomentumParts::for_symbol(region, a)?;
    if a.is_xi_only() {
        let m = symbol_kernel(a, &parts, scale_l, grid, &grid.nodes, &grid.lattice, xi_density)?;
        return Ok(DiscretizedOperator::new(m, scale_l, grid, n, Provenance::TL));
    }
    // x-dependent: outer projection times Op^l(A 1_W) through an
    // intermediate lattice over supp_x(A).
    let support = a.support_x().expect("checked in check_sandwich");
    let (mid_nodes, mid_lattice) = grid.lattice_in(support);
    if mid_nodes.is_empty() {
        let dim = grid.len() * n;
        return Ok(DiscretizedOperator::new(Mat::zeros(dim, dim), scale_l, grid, n, Provenance::TL));
    }
    let inner = symbol_kernel(a, &parts, scale_l, grid, &mid_nodes, &mid_lattice, xi_density)?;
    let gamma_parts = MomentumParts(vec![(1.0, region.domain().clone())]);
    let table = scalar_table(&gamma_parts, &Profile::One, scale_l, &grid.lattice, &mid_lattice, &grid.spacing, xi_density);
    let hd = grid.cell_volume();
    let complement = region.is_complement();
    let outer = assemble(grid.len(), mid_nodes.len(), n, |i, j, out| {
        let mut k = *table.get(&grid.lattice[i], &mid_lattice[j]) * hd;
        if complement {
            k = -k;
            if grid.lattice[i] == mid_lattice[j] {
                k += c64::new(1.0, 0.0);
            }
        }
        out.fill(c64::new(0.0, 0.0));
        for a in 0..n {
            out[a * n + a] = k;
        }
    });
    let m = &outer * &inner;
    Ok(DiscretizedOperator::new(m, scale_l, grid, n, Provenance::TL))
}

/// `S_L(A; Λ, Γ) = 1_Λ Op_L(1_Γ) Re[Op_L^l(Re A)] Op_L(1_Γ) 1_Λ`, realized as
/// the Hermitian part of `T_L(Re A)`.
pub fn build_sl(
    a: &MatrixSymbol,
    lambda: &Domain,
    region: &MomentumRegion,
    scale_l: f64,
    grid: &GridSpec,
    xi_density: usize,
) -> Result<DiscretizedOperator> {
    let t = build_tl(&a.real_part(), lambda, region, scale_l, grid, xi_density)?;
    let m = linalg::hermitian_part(t.matrix.as_ref());
    Ok(DiscretizedOperator::new(m, scale_l, grid, t.block_n, Provenance::SL))
}

fn check_pair(a1: &MatrixSymbol, a2: &MatrixSymbol) -> Result<()> {
    if a1.dim_n() != a2.dim_n() || a1.dim_d() != a2.dim_d() {
        return Err(Error::DimensionMismatch(format!(
            "A1 is {}x{} in d = {}, A2 is {}x{} in d = {}",
            a1.dim_n(),
            a1.dim_n(),
            a1.dim_d(),
            a2.dim_n(),
            a2.dim_n(),
            a2.dim_d()
        )));
    }
    Ok(())
}

/// `D_L(A1, A2) = T_L(A1; Λ, Γ) + T_L(A2; Λ, Γ^c)`.
pub fn build_dl(
    a1: &MatrixSymbol,
    a2: &MatrixSymbol,
    lambda: &Domain,
    gamma: &Domain,
    scale_l: f64,
    grid: &GridSpec,
    xi_density: usize,
) -> Result<DiscretizedOperator> {
    check_pair(a1, a2)?;
    let t1 = build_tl(a1, lambda, &MomentumRegion::Inside(gamma.clone()), scale_l, grid, xi_density)?;
    let t2 = build_tl(a2, lambda, &MomentumRegion::Complement(gamma.clone()), scale_l, grid, xi_density)?;
    let m = &t1.matrix + &t2.matrix;
    Ok(DiscretizedOperator::new(m, scale_l, grid, a1.dim_n(), Provenance::DL))
}

/// `G_L(A1, A2) = S_L(A1; Λ, Γ) + S_L(A2; Λ, Γ^c)`.
pub fn build_gl(
    a1: &MatrixSymbol,
    a2: &MatrixSymbol,
    lambda: &Domain,
    gamma: &Domain,
    scale_l: f64,
    grid: &GridSpec,
    xi_density: usize,
) -> Result<DiscretizedOperator> {
    check_pair(a1, a2)?;
    let s1 = build_sl(a1, lambda, &MomentumRegion::Inside(gamma.clone()), scale_l, grid, xi_density)?;
    let s2 = build_sl(a2, lambda, &MomentumRegion::Complement(gamma.clone()), scale_l, grid, xi_density)?;
    let m = &s1.matrix + &s2.matrix;
    Ok(DiscretizedOperator::new(m, scale_l, grid, a1.dim_n(), Provenance::GL))
}

// ---------------------------------------------------------------------------
// Binary dump

pub const DUMP_MAGIC: &[u8; 4] = b"WHOP";

/// Header of the binary operator dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumpHeader {
    pub rows: u32,
    pub cols: u32,
    pub block_n: u32,
    pub dim_d: u32,
    pub scale_l: f64,
}

/// Writes the 32-byte header (`"WHOP"`, rows, cols, block n, d, reserved
/// word, L; little-endian) followed by the row-major matrix as `f32` pairs.
pub fn write_dump<W: Write>(op: &DiscretizedOperator, mut w: W) -> Result<()> {
    let m = &op.matrix;
    let mut buf = Vec::with_capacity(32 + 8 * m.nrows() * m.ncols());
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    buf.extend_from_slice(&(op.block_n as u32).to_le_bytes());
    buf.extend_from_slice(&(op.grid.dim_d as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&op.scale_l.to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&(m[(i, j)].re as f32).to_le_bytes());
            buf.extend_from_slice(&(m[(i, j)].im as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_dump_file(op: &DiscretizedOperator, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_dump(op, std::io::BufWriter::new(f))
}

/// Reads a dump written by [`write_dump`]; entries come back at `f32`
/// precision.
pub fn read_dump<R: Read>(mut r: R) -> Result<(DumpHeader, CMat)> {
    let mut head = [0u8; 32];
    r.read_exact(&mut head)?;
    if &head[0..4] != DUMP_MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(head[k..k + 4].try_into().unwrap());
    let header = DumpHeader {
        rows: word(4),
        cols: word(8),
        block_n: word(12),
        dim_d: word(16),
        scale_l: f64::from_le_bytes(head[24..32].try_into().unwrap()),
    };
    let (rows, cols) = (header.rows as usize, header.cols as usize);
    let mut body = vec![0u8; rows * cols * 8];
    r.read_exact(&mut body).map_err(|_| Error::Dump("truncated body".into()))?;
    let f = |k: usize| f32::from_le_bytes(body[k..k + 4].try_into().unwrap()) as f64;
    let m = Mat::from_fn(rows, cols, |i, j| {
        let k = 8 * (i * cols + j);
        c64::new(f(k), f(k + 4))
    });
    Ok((header, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_interval() -> Domain {
        Domain::interval(0.0, 1.0).unwrap()
    }

    fn sym_interval(r: f64) -> Domain {
        Domain::interval(-r, r).unwrap()
    }

    #[test]
    fn grid_rule_resolves_oscillation() {
        let g = GridSpec::for_scale(&unit_interval(), 200.0, 1.0, DEFAULT_PHASE_STEP, 4).unwrap();
        assert!(g.spacing[0] * 200.0 <= DEFAULT_PHASE_STEP + 1e-15);
        assert_eq!(g.len(), 255);
        assert!(g.nodes.iter().all(|x| unit_interval().contains(x)));
        let disk = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let g = GridSpec::new(&disk, 20).unwrap();
        assert!(g.len() < 400 && g.nodes.iter().all(|x| disk.contains(x)));
    }

    #[test]
    fn sine_kernel_entries() {
        let l = 40.0;
        let grid = GridSpec::new(&unit_interval(), 64).unwrap();
        let k = kernel_indicator(&sym_interval(1.0), l, &grid).unwrap();
        let h = grid.spacing[0];
        assert_abs_diff_eq!(k.matrix[(3, 3)].re, h * l / PI, epsilon = 1e-14);
        for (i, j) in [(0, 5), (10, 2), (7, 40)] {
            let s = grid.nodes[i][0] - grid.nodes[j][0];
            let expected = h * (l * s).sin() / (PI * s);
            assert_abs_diff_eq!(k.matrix[(i, j)].re, expected, epsilon = 1e-14);
            assert_abs_diff_eq!(k.matrix[(i, j)].im, 0.0, epsilon = 1e-14);
        }
        assert!(linalg::hermitian_deviation(k.matrix.as_ref()) < 1e-14);
    }

    #[test]
    fn sine_kernel_vanishes_at_first_zero() {
        // With h L = π the neighbour offset is π / L.
        let l = 10.0 * PI;
        let grid = GridSpec::new(&unit_interval(), 10).unwrap();
        let k = kernel_indicator(&sym_interval(1.0), l, &grid).unwrap();
        assert_abs_diff_eq!(k.matrix[(0, 1)].re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_symbol_reduces_to_indicator() {
        let grid = GridSpec::new(&unit_interval(), 30).unwrap();
        let g = sym_interval(1.0);
        let ind = kernel_indicator(&g, 25.0, &grid).unwrap();
        let id = MatrixSymbol::identity(1, 1).unwrap();
        let k = kernel_symbol(&id, 25.0, &grid, Some(&MomentumRegion::Inside(g.clone())), 32).unwrap();
        assert_abs_diff_eq!(linalg::max_abs((&k.matrix - &ind.matrix).as_ref()), 0.0, epsilon = 1e-12);

        let diag = MatrixSymbol::constant(1, linalg::diag_real(&[2.0, 3.0])).unwrap();
        let k = kernel_symbol(&diag, 25.0, &grid, Some(&MomentumRegion::Inside(g)), 32).unwrap();
        for bi in 0..grid.len() {
            for bj in 0..grid.len() {
                assert_eq!(k.matrix[(2 * bi, 2 * bj + 1)], c64::new(0.0, 0.0));
                assert_eq!(k.matrix[(2 * bi + 1, 2 * bj)], c64::new(0.0, 0.0));
                assert_abs_diff_eq!(k.matrix[(2 * bi + 1, 2 * bj + 1)].re, 3.0 * ind.matrix[(bi, bj)].re, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn kernel_symbol_needs_window() {
        let grid = GridSpec::new(&unit_interval(), 8).unwrap();
        let id = MatrixSymbol::identity(1, 1).unwrap();
        assert!(matches!(
            kernel_symbol(&id, 10.0, &grid, None, 32),
            Err(Error::MomentumWindowRequired(_))
        ));
    }

    #[test]
    fn zero_symbol_gives_zero_operator() {
        let grid = GridSpec::new(&unit_interval(), 16).unwrap();
        let z = MatrixSymbol::zero(1, 1).unwrap();
        let t = build_tl(&z, &unit_interval(), &MomentumRegion::Inside(sym_interval(1.0)), 20.0, &grid, 32).unwrap();
        assert_eq!(linalg::max_abs(t.matrix.as_ref()), 0.0);
    }

    #[test]
    fn complement_needs_compact_support() {
        let grid = GridSpec::new(&unit_interval(), 16).unwrap();
        let one = MatrixSymbol::identity(1, 1).unwrap();
        let err = build_tl(&one, &unit_interval(), &MomentumRegion::Complement(sym_interval(1.0)), 20.0, &grid, 32);
        assert!(matches!(err, Err(Error::TraceClassViolated(_))));
    }

    #[test]
    fn sl_is_hermitian_and_matches_tl_for_identity() {
        let grid = GridSpec::new(&unit_interval(), 40).unwrap();
        let one = MatrixSymbol::identity(1, 1).unwrap();
        let region = MomentumRegion::Inside(sym_interval(1.0));
        let t = build_tl(&one, &unit_interval(), &region, 30.0, &grid, 32).unwrap();
        let s = build_sl(&one, &unit_interval(), &region, 30.0, &grid, 32).unwrap();
        assert!(s.hermitian);
        assert_eq!(s.provenance, Provenance::SL);
        assert_abs_diff_eq!(linalg::max_abs((&t.matrix - &s.matrix).as_ref()), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gl_with_anti_hermitian_symbols_vanishes() {
        let grid = GridSpec::new(&unit_interval(), 20).unwrap();
        let anti = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c64::new(1.0, 0.0),
            (1, 0) => c64::new(-1.0, 0.0),
            (0, 0) => c64::new(0.0, 2.0),
            _ => c64::new(0.0, 0.0),
        });
        let a1 = MatrixSymbol::constant(1, anti.clone()).unwrap();
        let a2 = MatrixSymbol::windowed(1, anti, 1.5, 2.0).unwrap();
        let g = build_gl(&a1, &a2, &unit_interval(), &sym_interval(1.0), 15.0, &grid, 32).unwrap();
        assert!(linalg::max_abs(g.matrix.as_ref()) < 1e-14);
    }

    #[test]
    fn dl_with_zero_outer_symbol_is_tl() {
        let grid = GridSpec::new(&unit_interval(), 30).unwrap();
        let (sx, _) = MatrixSymbol::noncommuting_pair(1).unwrap();
        let z = MatrixSymbol::zero(1, 2).unwrap();
        let d = build_dl(&sx, &z, &unit_interval(), &sym_interval(1.0), 20.0, &grid, 32).unwrap();
        let t = build_tl(&sx, &unit_interval(), &MomentumRegion::Inside(sym_interval(1.0)), 20.0, &grid, 32).unwrap();
        assert_eq!(d.matrix, t.matrix);
        assert_eq!(d.provenance, Provenance::DL);
    }

    #[test]
    fn dump_round_trip() {
        let grid = GridSpec::new(&unit_interval(), 12).unwrap();
        let k = kernel_indicator(&sym_interval(1.0), 10.0, &grid).unwrap();
        let mut bytes = Vec::new();
        write_dump(&k, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 32 + 8 * 144);
        assert_eq!(&bytes[..4], b"WHOP");
        let (head, m) = read_dump(bytes.as_slice()).unwrap();
        assert_eq!(head.rows, 12);
        assert_eq!(head.block_n, 1);
        assert_eq!(head.scale_l, 10.0);
        assert!(linalg::max_abs((&m - &k.matrix).as_ref()) < 1e-6);
        assert!(read_dump(&bytes[..40]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_dump(bad.as_slice()).is_err());
    }
}
