//! Concrete spatial and momentum regions: intervals, boxes, disks and simple
//! polygons, with volume and boundary quadratures.
//!
//! Corners of piecewise-linear boundaries carry no boundary node; edges are
//! sampled in their interiors only. All shipped kinds are bounded. A
//! complement `Γ^c` is never materialized as a [`Domain`]; see
//! [`MomentumRegion`].
//!
//! Piecewise C¹ and piecewise C³ boundaries are treated alike, since none of
//! the quadratures here use more than the outward normal.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;

/// Axis-aligned box in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidDomain(format!(
                "box corners have mismatched lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidDomain(format!("box needs lo < hi on every axis, got {lo:?}, {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// Symmetric box `(-r, r)^d`.
    pub fn centered(dim: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; dim],
            hi: vec![r; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Largest `|ξ_i|` over the box, per axis.
    pub fn max_abs_coordinate(&self) -> f64 {
        self.lo.iter().chain(&self.hi).fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }
}

/// JSON descriptor of a domain, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainDesc {
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Disk { center: Vec<f64>, radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Box(Aabb),
    Disk { center: [f64; 2], radius: f64 },
    /// Simple polygon with counter-clockwise vertices.
    Polygon { vertices: Vec<[f64; 2]> },
}

/// A momentum region paired with a symbol: either a bounded domain `Γ` or
/// its complement `Γ^c`.
#[derive(Clone, Debug, PartialEq)]
pub enum MomentumRegion {
    Inside(Domain),
    Complement(Domain),
}

impl MomentumRegion {
    pub fn domain(&self) -> &Domain {
        match self {
            MomentumRegion::Inside(d) | MomentumRegion::Complement(d) => d,
        }
    }

    pub fn is_complement(&self) -> bool {
        matches!(self, MomentumRegion::Complement(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryNode {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryQuadrature {
    pub dim_d: usize,
    pub nodes: Vec<BoundaryNode>,
    pub total_measure: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VolumeQuadrature {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl VolumeQuadrature {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl TryFrom<DomainDesc> for Domain {
    type Error = Error;

    fn try_from(desc: DomainDesc) -> Result<Self> {
        match desc {
            DomainDesc::Interval { a, b } => Domain::interval(a, b),
            DomainDesc::Box { lo, hi } => Domain::boxed(lo, hi),
            DomainDesc::Disk { center, radius } => {
                let c: [f64; 2] = center.as_slice().try_into().map_err(|_| {
                    Error::InvalidDomain(format!("disk center must have 2 coordinates, got {}", center.len()))
                })?;
                Domain::disk(c, radius)
            }
            DomainDesc::Polygon { vertices } => Domain::polygon(vertices),
        }
    }
}

impl From<&Domain> for DomainDesc {
    fn from(d: &Domain) -> Self {
        match d {
            Domain::Interval { a, b } => DomainDesc::Interval { a: *a, b: *b },
            Domain::Box(bx) => DomainDesc::Box {
                lo: bx.lo.clone(),
                hi: bx.hi.clone(),
            },
            Domain::Disk { center, radius } => DomainDesc::Disk {
                center: center.to_vec(),
                radius: *radius,
            },
            Domain::Polygon { vertices } => DomainDesc::Polygon {
                vertices: vertices.clone(),
            },
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > 2 {
        return Err(Error::InvalidDomain(format!("dimension {d} not supported (only 1 and 2)")));
    }
    Ok(())
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidDomain(format!("interval needs a < b, got ({a}, {b})")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len())?;
        Ok(Domain::Box(Aabb::new(lo, hi)?))
    }

    pub fn unit_square() -> Self {
        Domain::Box(Aabb {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        })
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Domain::Disk { center, radius })
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidDomain(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let area = signed_area(&vertices);
        if !(area > 0.0) {
            return Err(Error::InvalidDomain(
                "polygon vertices must be in counter-clockwise order".into(),
            ));
        }
        if !is_simple(&vertices) {
            return Err(Error::InvalidDomain("polygon is self-intersecting".into()));
        }
        Ok(Domain::Polygon { vertices })
    }

    pub fn dim_d(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box(b) => b.dim(),
            Domain::Disk { .. } | Domain::Polygon { .. } => 2,
        }
    }

    pub fn bounded(&self) -> bool {
        true
    }

    pub fn bounding_box(&self) -> Aabb {
        match self {
            Domain::Interval { a, b } => Aabb {
                lo: vec![*a],
                hi: vec![*b],
            },
            Domain::Box(b) => b.clone(),
            Domain::Disk { center, radius } => Aabb {
                lo: vec![center[0] - radius, center[1] - radius],
                hi: vec![center[0] + radius, center[1] + radius],
            },
            Domain::Polygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                Aabb { lo, hi }
            }
        }
    }

    /// Lebesgue measure of the region.
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Box(b) => b.volume(),
            Domain::Disk { radius, .. } => PI * radius * radius,
            Domain::Polygon { vertices } => signed_area(vertices),
        }
    }

    /// Surface measure of the boundary; the endpoint count for `d = 1`.
    pub fn boundary_measure(&self) -> f64 {
        match self {
            Domain::Interval { .. } => 2.0,
            Domain::Box(b) if b.dim() == 1 => 2.0,
            Domain::Disk { radius, .. } => 2.0 * PI * radius,
            _ => {
                let v = self.polygon_vertices();
                edges(&v).map(|(p, q)| dist(p, q)).sum()
            }
        }
    }

    fn polygon_vertices(&self) -> Vec<[f64; 2]> {
        match self {
            Domain::Box(b) if b.dim() == 2 => vec![
                [b.lo[0], b.lo[1]],
                [b.hi[0], b.lo[1]],
                [b.hi[0], b.hi[1]],
                [b.lo[0], b.hi[1]],
            ],
            Domain::Polygon { vertices } => vertices.clone(),
            _ => unreachable!("only 2D boxes and polygons have vertex lists"),
        }
    }

    /// 1 on the open region, 0 elsewhere (boundary points included).
    pub fn indicator(&self, x: &[f64]) -> u8 {
        u8::from(self.contains(x))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim_d());
        match self {
            Domain::Interval { a, b } => *a < x[0] && x[0] < *b,
            Domain::Box(b) => x.iter().zip(b.lo.iter().zip(&b.hi)).all(|(v, (l, h))| *l < *v && *v < *h),
            Domain::Disk { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
            Domain::Polygon { vertices } => point_in_polygon(vertices, [x[0], x[1]]),
        }
    }

    /// Volume quadrature whose weights sum to the measure of the region.
    /// `resolution` is the number of Gauss nodes per axis (radial nodes for
    /// disks, per triangle axis for polygons).
    pub fn volume_quadrature(&self, resolution: usize) -> VolumeQuadrature {
        let res = resolution.max(2);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match self {
            Domain::Interval { a, b } => {
                for (x, w) in gauss_legendre_on(res, *a, *b) {
                    points.push(vec![x]);
                    weights.push(w);
                }
            }
            Domain::Box(bx) => {
                let rules: Vec<_> = (0..bx.dim()).map(|k| gauss_legendre_on(res, bx.lo[k], bx.hi[k])).collect();
                if bx.dim() == 1 {
                    for &(x, w) in &rules[0] {
                        points.push(vec![x]);
                        weights.push(w);
                    }
                } else {
                    for &(x, wx) in &rules[0] {
                        for &(y, wy) in &rules[1] {
                            points.push(vec![x, y]);
                            weights.push(wx * wy);
                        }
                    }
                }
            }
            Domain::Disk { center, radius } => {
                let n_theta = 2 * res;
                let dtheta = 2.0 * PI / n_theta as f64;
                for (r, wr) in gauss_legendre_on(res, 0.0, *radius) {
                    for k in 0..n_theta {
                        let th = dtheta * (k as f64 + 0.5);
                        points.push(vec![center[0] + r * th.cos(), center[1] + r * th.sin()]);
                        weights.push(r * wr * dtheta);
                    }
                }
            }
            Domain::Polygon { vertices } => {
                let rule = gauss_legendre_on(res, 0.0, 1.0);
                for [a, b, c] in triangulate(vertices) {
                    let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                    // Collapsed square: a + u (b - a) + u v (c - b), Jacobian u * area2.
                    for &(u, wu) in &rule {
                        for &(v, wv) in &rule {
                            points.push(vec![
                                a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]),
                                a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1]),
                            ]);
                            weights.push(wu * wv * u * area2);
                        }
                    }
                }
            }
        }
        VolumeQuadrature { points, weights }
    }

    /// Boundary nodes with outward unit normals and surface weights. In
    /// `d = 1` this is the endpoint set with unit weights; `n_nodes` is then
    /// ignored.
    pub fn boundary_quadrature(&self, n_nodes: usize) -> BoundaryQuadrature {
        let d = self.dim_d();
        let nodes = if d == 1 {
            let (a, b) = match self {
                Domain::Interval { a, b } => (*a, *b),
                Domain::Box(bx) => (bx.lo[0], bx.hi[0]),
                _ => unreachable!(),
            };
            vec![
                BoundaryNode {
                    point: vec![a],
                    normal: vec![-1.0],
                    weight: 1.0,
                },
                BoundaryNode {
                    point: vec![b],
                    normal: vec![1.0],
                    weight: 1.0,
                },
            ]
        } else {
            let n_nodes = n_nodes.max(4);
            match self {
                Domain::Disk { center, radius } => {
                    let dtheta = 2.0 * PI / n_nodes as f64;
                    (0..n_nodes)
                        .map(|k| {
                            let th = dtheta * (k as f64 + 0.5);
                            let (s, c) = th.sin_cos();
                            BoundaryNode {
                                point: vec![center[0] + radius * c, center[1] + radius * s],
                                normal: vec![c, s],
                                weight: radius * dtheta,
                            }
                        })
                        .collect()
                }
                _ => polygon_boundary(&self.polygon_vertices(), n_nodes),
            }
        };
        let total_measure = nodes.iter().map(|n| n.weight).sum();
        BoundaryQuadrature {
            dim_d: d,
            nodes,
            total_measure,
        }
    }
}

fn dist(p: &[f64; 2], q: &[f64; 2]) -> f64 {
    (q[0] - p[0]).hypot(q[1] - p[1])
}

fn edges(v: &[[f64; 2]]) -> impl Iterator<Item = (&[f64; 2], &[f64; 2])> {
    v.iter().zip(v.iter().cycle().skip(1))
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    0.5 * edges(v).map(|(p, q)| p[0] * q[1] - q[0] * p[1]).sum::<f64>()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: f64| {
        d == 0.0 && c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn is_simple(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn point_in_polygon(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let scale = v.iter().fold(1.0f64, |m, q| m.max(q[0].abs()).max(q[1].abs()));
    let tol = 1e-14 * scale;
    let mut inside = false;
    for (a, b) in edges(v) {
        // Points on an edge count as outside.
        let len = dist(a, b);
        if cross(*a, *b, p).abs() <= tol * len
            && p[0] >= a[0].min(b[0]) - tol
            && p[0] <= a[0].max(b[0]) + tol
            && p[1] >= a[1].min(b[1]) - tol
            && p[1] <= a[1].max(b[1]) + tol
        {
            return false;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
fn triangulate(v: &[[f64; 2]]) -> Vec<[[f64; 2]; 3]> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    let mut out = Vec::with_capacity(v.len().saturating_sub(2));
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (v[ia], v[ib], v[ic]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ia && j != ib && j != ic && {
                    let p = v[j];
                    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
                }
            });
            if !blocked {
                out.push([a, b, c]);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // Degenerate (collinear) remainder: drop a zero-area vertex.
            let k = (0..m)
                .find(|&k| cross(v[idx[(k + m - 1) % m]], v[idx[k]], v[idx[(k + 1) % m]]).abs() < 1e-300)
                .unwrap_or(0);
            idx.remove(k);
        }
    }
    if idx.len() == 3 && cross(v[idx[0]], v[idx[1]], v[idx[2]]) > 0.0 {
        out.push([v[idx[0]], v[idx[1]], v[idx[2]]]);
    }
    out
}

fn polygon_boundary(v: &[[f64; 2]], n_nodes: usize) -> Vec<BoundaryNode> {
    let perimeter: f64 = edges(v).map(|(p, q)| dist(p, q)).sum();
    let mut nodes = Vec::with_capacity(n_nodes + v.len());
    for (p, q) in edges(v) {
        let len = dist(p, q);
        let k = ((n_nodes as f64 * len / perimeter).round() as usize).max(1);
        let normal = vec![(q[1] - p[1]) / len, -(q[0] - p[0]) / len];
        let w = len / k as f64;
        for j in 0..k {
            let s = (j as f64 + 0.5) / k as f64;
            nodes.push(BoundaryNode {
                point: vec![p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])],
                normal: normal.clone(),
                weight: w,
            });
        }
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_disk() -> Domain {
        Domain::disk([0.0, 0.0], 1.0).unwrap()
    }

    fn l_shape() -> Domain {
        Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap()
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(Domain::interval(0.0, 1.0).unwrap().indicator(&[0.5]), 1);
        assert_eq!(unit_disk().indicator(&[2.0, 0.0]), 0);
        assert_eq!(Domain::unit_square().indicator(&[1.0, 0.5]), 0);
        let sq = Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(sq.indicator(&[1.0, 0.5]), 0);
        assert_eq!(sq.indicator(&[0.5, 0.5]), 1);
        assert_eq!(l_shape().indicator(&[1.5, 1.5]), 0);
        assert_eq!(l_shape().indicator(&[0.5, 1.5]), 1);
    }

    #[test]
    fn rejects_invalid_domains() {
        assert!(Domain::interval(1.0, 0.0).is_err());
        assert!(Domain::disk([0.0, 0.0], 0.0).is_err());
        assert!(Domain::boxed(vec![0.0; 3], vec![1.0; 3]).is_err());
        assert!(Domain::boxed(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        // clockwise
        assert!(Domain::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err());
        // bow tie
        assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn volume_totals() {
        for res in [2, 5, 17] {
            assert_abs_diff_eq!(
                Domain::interval(0.0, 1.0).unwrap().volume_quadrature(res).total_weight(),
                1.0,
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(unit_disk().volume_quadrature(512).total_weight(), PI, epsilon = 1e-4);
        let sq = Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(sq.volume_quadrature(8).total_weight(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(l_shape().volume_quadrature(6).total_weight(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn volume_quadrature_integrates_moments() {
        // int_disk x^2 = pi/4
        let q = unit_disk().volume_quadrature(16);
        let m: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0] * p[0]).sum();
        assert_abs_diff_eq!(m, PI / 4.0, epsilon = 1e-12);
        // int over L-shape of x = 1*0.5*... : squares [0,1]^2, [1,2]x[0,1], [0,1]x[1,2]
        let q = l_shape().volume_quadrature(4);
        let m: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0]).sum();
        assert_abs_diff_eq!(m, 0.5 + 1.5 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn boundary_examples() {
        let bq = Domain::interval(0.0, 1.0).unwrap().boundary_quadrature(0);
        assert_eq!(bq.nodes.len(), 2);
        assert_eq!(bq.nodes[0].point, vec![0.0]);
        assert_eq!(bq.nodes[0].normal, vec![-1.0]);
        assert_eq!(bq.nodes[1].normal, vec![1.0]);
        assert_eq!(bq.total_measure, 2.0);

        assert_abs_diff_eq!(Domain::unit_square().boundary_quadrature(400).total_measure, 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(unit_disk().boundary_quadrature(1000).total_measure, 2.0 * PI, epsilon = 1e-6);
    }

    #[test]
    fn normals_are_unit_and_outward() {
        let domains = [
            Domain::unit_square(),
            unit_disk(),
            l_shape(),
            Domain::polygon(vec![[0.0, 0.0], [3.0, 0.5], [1.0, 2.0]]).unwrap(),
        ];
        for d in &domains {
            let bq = d.boundary_quadrature(200);
            let mut ok = 0;
            for n in &bq.nodes {
                let len = n.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((len - 1.0).abs() < 1e-12);
                let out: Vec<f64> = n.point.iter().zip(&n.normal).map(|(p, v)| p + 1e-6 * v).collect();
                let inn: Vec<f64> = n.point.iter().zip(&n.normal).map(|(p, v)| p - 1e-6 * v).collect();
                if d.indicator(&out) == 0 && d.indicator(&inn) == 1 {
                    ok += 1;
                }
            }
            assert!(ok as f64 >= 0.95 * bq.nodes.len() as f64, "{d:?}: {ok}/{}", bq.nodes.len());
        }
    }

    #[test]
    fn divergence_theorem() {
        let domains = [
            Domain::unit_square(),
            unit_disk(),
            l_shape(),
            Domain::boxed(vec![-1.0, 2.0], vec![3.0, 2.5]).unwrap(),
        ];
        for d in &domains {
            let bq = d.boundary_quadrature(1000);
            let flux: f64 = bq
                .nodes
                .iter()
                .map(|n| (n.point[0] * n.normal[0] + n.point[1] * n.normal[1]) * n.weight)
                .sum();
            assert_abs_diff_eq!(flux, 2.0 * d.measure(), epsilon = 1e-3);
        }
    }

    #[test]
    fn disk_perimeter_refinement_does_not_degrade() {
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64, 128, 256] {
            let err = (unit_disk().boundary_quadrature(n).total_measure - 2.0 * PI).abs();
            assert!(err <= prev + 1e-13);
            prev = err;
        }
    }

    #[test]
    fn descriptor_round_trip() {
        let json = r#"{"kind":"polygon","vertices":[[0,0],[1,0],[0,1]]}"#;
        let desc: DomainDesc = serde_json::from_str(json).unwrap();
        let d = Domain::try_from(desc.clone()).unwrap();
        assert_eq!(DomainDesc::from(&d), desc);
        let bad: DomainDesc = serde_json::from_str(r#"{"kind":"disk","center":[0,0,0],"radius":1}"#).unwrap();
        assert!(Domain::try_from(bad).is_err());
    }
}
