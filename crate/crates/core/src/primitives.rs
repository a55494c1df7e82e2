//! Axis-aligned scaffolding primitives and their least-squares fits.
//!
//! Residues are RMS distances from the segment's surface samples (vertices
//! plus triangle centroids) to the primitive surface. A fit is only
//! accepted by [`fit_all`] when the primitive's intervals, inflated by the
//! residue, contain every vertex and the mesh covers at least half of the
//! primitive's surface; otherwise a thin wire would happily "fit" the
//! cylinder it winds around.

use std::cmp::Ordering;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, Axis, Interval, Side, Vec3};
use crate::model_io::{Segment, SegmentedModel};

pub type PartId = u32;

/// Fraction of the bounding-box height used for the pyramid cap slabs.
pub const PYRAMID_SLAB_FRACTION: f64 = 0.10;
/// Minimum fraction of primitive surface samples lying near the mesh.
pub const MIN_SURFACE_COVERAGE: f64 = 0.5;
/// Coverage distance, as a fraction of the segment's bbox diagonal.
pub const COVERAGE_TOLERANCE: f64 = 0.02;
/// Residues within this fraction of the model diagonal count as ties.
pub const TIE_TOLERANCE: f64 = 1e-6;

/// Primitive types, declared in simplicity order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrimitiveKind {
    Plane,
    Cylinder,
    Cuboid,
    TruncatedPyramid,
    Custom,
}

impl PrimitiveKind {
    pub const FITTABLE: [PrimitiveKind; 4] = [
        PrimitiveKind::Plane,
        PrimitiveKind::Cylinder,
        PrimitiveKind::Cuboid,
        PrimitiveKind::TruncatedPyramid,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PrimitiveKind::Plane => "plane",
            PrimitiveKind::Cylinder => "cylinder",
            PrimitiveKind::Cuboid => "box",
            PrimitiveKind::TruncatedPyramid => "truncated pyramid",
            PrimitiveKind::Custom => "shape",
        }
    }
}

/// Which cross-section of a primitive an interval belongs to. Only
/// truncated pyramids distinguish their bottom and top rectangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Section {
    Whole,
    Bottom,
    Top,
}

/// An adjustable dimension: an axis, optionally restricted to a section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dim {
    pub axis: Axis,
    pub section: Section,
}

impl Dim {
    pub fn whole(axis: Axis) -> Dim {
        Dim {
            axis,
            section: Section::Whole,
        }
    }
}

/// Bottom and top rectangles of a truncated pyramid. Rectangles are listed
/// on the two remaining axes in ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PyramidSections {
    pub axis: Axis,
    pub bottom: [Interval; 2],
    pub top: [Interval; 2],
}

impl PyramidSections {
    fn slot(&self, axis: Axis) -> usize {
        let [a, _] = self.axis.others();
        if axis == a {
            0
        } else {
            1
        }
    }

    pub fn rect(&self, section: Section) -> &[Interval; 2] {
        match section {
            Section::Top => &self.top,
            _ => &self.bottom,
        }
    }

    /// Cross-section at parameter `t` in `[0, 1]` from bottom to top.
    pub fn at(&self, t: f64) -> [Interval; 2] {
        [0, 1].map(|k| {
            Interval::new(
                self.bottom[k].lo + t * (self.top[k].lo - self.bottom[k].lo),
                self.bottom[k].hi + t * (self.top[k].hi - self.bottom[k].hi),
            )
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub part_id: PartId,
    pub kind: PrimitiveKind,
    /// Bounding intervals on x, y, z.
    pub intervals: [Interval; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pyramid: Option<PyramidSections>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyl_axis: Option<Axis>,
    pub residue: f64,
    pub level: u8,
}

impl Primitive {
    pub fn interval(&self, axis: Axis) -> Interval {
        self.intervals[axis.index()]
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_intervals(&self.intervals)
    }

    pub fn face(&self, axis: Axis, side: Side) -> f64 {
        self.interval(axis).end(side)
    }

    pub fn mid(&self, axis: Axis) -> f64 {
        self.interval(axis).mid()
    }

    pub fn center(&self) -> Vec3 {
        self.bbox().center()
    }

    /// The flat axis of a plane primitive.
    pub fn flat_axis(&self) -> Option<Axis> {
        if self.kind != PrimitiveKind::Plane {
            return None;
        }
        Axis::ALL.into_iter().find(|a| self.interval(*a).len() == 0.0)
    }

    /// Whether the primitive owns a face perpendicular to `normal`.
    pub fn has_face(&self, normal: Axis) -> bool {
        match self.flat_axis() {
            Some(flat) => flat == normal,
            None => true,
        }
    }

    /// Area of the (bounding) face perpendicular to `normal`.
    pub fn face_area(&self, normal: Axis) -> f64 {
        let [a, b] = normal.others();
        self.interval(a).len() * self.interval(b).len()
    }

    pub fn max_face_area(&self) -> f64 {
        Axis::ALL
            .into_iter()
            .filter(|n| self.has_face(*n))
            .map(|n| self.face_area(n))
            .fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(Interval::len).product()
    }

    /// Adjustable dimensions. Planes skip their flat axis; pyramids expose
    /// their height plus both rectangles on each remaining axis.
    pub fn dims(&self) -> Vec<Dim> {
        match self.kind {
            PrimitiveKind::Custom => Vec::new(),
            PrimitiveKind::Plane => Axis::ALL
                .into_iter()
                .filter(|a| Some(*a) != self.flat_axis())
                .map(Dim::whole)
                .collect(),
            PrimitiveKind::TruncatedPyramid => {
                let p = self.pyramid.as_ref().expect("pyramid sections");
                let mut dims = vec![Dim::whole(p.axis)];
                for axis in p.axis.others() {
                    for section in [Section::Bottom, Section::Top] {
                        dims.push(Dim { axis, section });
                    }
                }
                dims
            }
            PrimitiveKind::Cuboid | PrimitiveKind::Cylinder => Axis::ALL.into_iter().map(Dim::whole).collect(),
        }
    }

    pub fn dim_interval(&self, dim: Dim) -> Interval {
        match (dim.section, &self.pyramid) {
            (Section::Whole, _) | (_, None) => self.interval(dim.axis),
            (section, Some(p)) => p.rect(section)[p.slot(dim.axis)],
        }
    }

    /// Copy with one dimension replaced; pyramid bounds follow their
    /// rectangles.
    pub fn with_dim_interval(&self, dim: Dim, iv: Interval) -> Primitive {
        let mut out = self.clone();
        match (dim.section, out.pyramid.as_mut()) {
            (Section::Whole, _) | (_, None) => out.intervals[dim.axis.index()] = iv,
            (section, Some(p)) => {
                let k = p.slot(dim.axis);
                match section {
                    Section::Top => p.top[k] = iv,
                    _ => p.bottom[k] = iv,
                }
                out.intervals[dim.axis.index()] = p.top[k].union(&p.bottom[k]);
            }
        }
        out
    }

    /// Rigid translation along one axis.
    pub fn translated(&self, axis: Axis, by: f64) -> Primitive {
        let mut out = self.clone();
        out.intervals[axis.index()] = out.intervals[axis.index()].translate(by);
        if let Some(p) = out.pyramid.as_mut() {
            if p.axis != axis {
                let k = p.slot(axis);
                p.top[k] = p.top[k].translate(by);
                p.bottom[k] = p.bottom[k].translate(by);
            }
        }
        out
    }

    /// Scaffold edges: box edges, plane outline, or pyramid frame.
    pub fn edges(&self) -> Vec<[Vec3; 2]> {
        if let Some(flat) = self.flat_axis() {
            let b = self.bbox();
            return b
                .edges()
                .into_iter()
                .filter(|e| (e[0][flat.index()] - e[1][flat.index()]).abs() == 0.0)
                .fold(Vec::new(), |mut acc, e| {
                    if !acc.iter().any(|f: &[Vec3; 2]| same_segment(f, &e)) {
                        acc.push(e);
                    }
                    acc
                });
        }
        match (&self.kind, &self.pyramid) {
            (PrimitiveKind::TruncatedPyramid, Some(p)) => {
                let h = self.interval(p.axis);
                let ring = |height: f64, rect: &[Interval; 2]| -> [Vec3; 4] {
                    let [a, b] = p.axis.others();
                    [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(i, j)| {
                        let mut v = Vec3::zeros();
                        v[p.axis.index()] = height;
                        v[a.index()] = if i == 0 { rect[0].lo } else { rect[0].hi };
                        v[b.index()] = if j == 0 { rect[1].lo } else { rect[1].hi };
                        v
                    })
                };
                let lo = ring(h.lo, &p.bottom);
                let hi = ring(h.hi, &p.top);
                let mut out = Vec::with_capacity(12);
                for k in 0..4 {
                    out.push([lo[k], lo[(k + 1) % 4]]);
                    out.push([hi[k], hi[(k + 1) % 4]]);
                    out.push([lo[k], hi[k]]);
                }
                out
            }
            _ => self.bbox().edges(),
        }
    }
}

fn same_segment(a: &[Vec3; 2], b: &[Vec3; 2]) -> bool {
    (a[0] == b[0] && a[1] == b[1]) || (a[0] == b[1] && a[1] == b[0])
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("degenerate geometry for a {kind:?} fit: {reason}")]
    Degenerate { kind: PrimitiveKind, reason: String },
}

fn degenerate(kind: PrimitiveKind, reason: impl Into<String>) -> FitError {
    FitError::Degenerate {
        kind,
        reason: reason.into(),
    }
}

/// Points the residue is measured on: vertices and triangle centroids.
pub fn surface_samples(segment: &Segment) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = segment.vertices.iter().map(|v| Vec3::from(*v)).collect();
    for t in &segment.triangles {
        let c = t
            .iter()
            .map(|&i| Vec3::from(segment.vertices[i as usize]))
            .sum::<Vec3>()
            / 3.0;
        out.push(c);
    }
    out
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), d| (s + d * d, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Fits one primitive kind. `up` is the vertical axis used by pyramids.
pub fn fit_primitive(segment: &Segment, kind: PrimitiveKind, up: Axis) -> Result<Primitive, FitError> {
    let samples = surface_samples(segment);
    let bbox = segment.bbox();
    if bbox.is_empty() {
        return Err(degenerate(kind, "segment has no vertices"));
    }
    if kind != PrimitiveKind::Plane && kind != PrimitiveKind::Custom && !has_three_noncollinear(segment) {
        return Err(degenerate(kind, "fewer than three non-collinear vertices"));
    }
    let base = Primitive {
        part_id: segment.id,
        kind,
        intervals: bbox.intervals(),
        pyramid: None,
        cyl_axis: None,
        residue: 0.0,
        level: 0,
    };
    match kind {
        PrimitiveKind::Custom => Ok(base),
        PrimitiveKind::Plane => Ok(fit_plane(base, &samples)),
        PrimitiveKind::Cuboid => {
            let residue = rms(samples.iter().map(|p| box_surface_distance(&bbox, p)));
            Ok(Primitive { residue, ..base })
        }
        PrimitiveKind::Cylinder => fit_cylinder(base, segment, &samples),
        PrimitiveKind::TruncatedPyramid => fit_pyramid(base, &samples, up),
    }
}

fn has_three_noncollinear(segment: &Segment) -> bool {
    let v: Vec<Vec3> = segment.vertices.iter().map(|p| Vec3::from(*p)).collect();
    let scale = segment.bbox().diagonal().max(f64::MIN_POSITIVE);
    let Some(a) = v.first() else { return false };
    let Some(b) = v.iter().find(|p| (*p - a).norm() > 1e-9 * scale) else {
        return false;
    };
    let ab = (b - a).normalize();
    v.iter().any(|p| (p - a).cross(&ab).norm() > 1e-9 * scale)
}

fn fit_plane(base: Primitive, samples: &[Vec3]) -> Primitive {
    let mut best: Option<(f64, Axis, f64)> = None;
    for axis in Axis::ALL {
        let k = axis.index();
        let c = samples.iter().map(|p| p[k]).sum::<f64>() / samples.len() as f64;
        let r = rms(samples.iter().map(|p| p[k] - c));
        if best.is_none_or(|(br, _, _)| r < br) {
            best = Some((r, axis, c));
        }
    }
    let (residue, axis, c) = best.expect("three axes");
    let mut intervals = base.intervals;
    intervals[axis.index()] = Interval::point(c);
    Primitive {
        intervals,
        residue,
        ..base
    }
}

pub(crate) fn box_surface_distance(b: &Aabb, p: &Vec3) -> f64 {
    let mut outside = 0.0;
    let mut inside = f64::INFINITY;
    for k in 0..3 {
        let below = b.min[k] - p[k];
        let above = p[k] - b.max[k];
        let excess = below.max(above);
        if excess > 0.0 {
            outside += excess * excess;
        } else {
            inside = inside.min(-excess);
        }
    }
    if outside > 0.0 {
        outside.sqrt()
    } else {
        inside
    }
}

/// Circle through 2D points by the algebraic (Kasa) least-squares fit.
fn kasa_circle(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let mut m = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for &(x, y) in points {
        let row = Vector3::new(x, y, 1.0);
        let z = -(x * x + y * y);
        m += row * row.transpose();
        rhs += row * z;
    }
    let sol = m.lu().solve(&rhs)?;
    let (cx, cy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = cx * cx + cy * cy - sol[2];
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Some((cx, cy, r2.sqrt()))
}

/// Circle fit with one trimming pass so cap-centre vertices and other
/// interior points do not drag the radius.
fn robust_circle(points: &[(f64, f64)], scale: f64) -> Option<(f64, f64, f64)> {
    let (cx, cy, r) = kasa_circle(points)?;
    let mut residuals: Vec<f64> = points
        .iter()
        .map(|&(x, y)| ((x - cx).hypot(y - cy) - r).abs())
        .collect();
    let mut sorted = residuals.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let cut = 3.0 * median + 1e-9 * scale;
    let kept: Vec<(f64, f64)> = points
        .iter()
        .zip(residuals.drain(..))
        .filter(|(_, d)| *d <= cut)
        .map(|(p, _)| *p)
        .collect();
    if kept.len() == points.len() {
        return Some((cx, cy, r));
    }
    kasa_circle(&kept).or(Some((cx, cy, r)))
}

#[derive(Clone, Copy, Debug)]
struct CylinderShape {
    axis: Axis,
    center: (f64, f64),
    radius: f64,
    extent: Interval,
}

impl CylinderShape {
    fn distance(&self, p: &Vec3) -> f64 {
        let [a, b] = self.axis.others();
        let r = (p[a.index()] - self.center.0).hypot(p[b.index()] - self.center.1);
        let h = p[self.axis.index()];
        let dh = (self.extent.lo - h).max(h - self.extent.hi);
        let dr = r - self.radius;
        if dh <= 0.0 && dr <= 0.0 {
            (-dr).min(-dh)
        } else {
            dh.max(0.0).hypot(dr.max(0.0))
        }
    }
}

fn fit_cylinder(base: Primitive, segment: &Segment, samples: &[Vec3]) -> Result<Primitive, FitError> {
    let scale = segment.bbox().diagonal();
    let bbox = segment.bbox();
    let mut best: Option<(f64, CylinderShape)> = None;
    for axis in Axis::ALL {
        let [a, b] = axis.others();
        let pts: Vec<(f64, f64)> = segment
            .vertices
            .iter()
            .map(|v| (v[a.index()], v[b.index()]))
            .collect();
        let Some((cx, cy, radius)) = robust_circle(&pts, scale) else {
            continue;
        };
        let shape = CylinderShape {
            axis,
            center: (cx, cy),
            radius,
            extent: bbox.interval(axis),
        };
        let r = rms(samples.iter().map(|p| shape.distance(p)));
        if best.is_none_or(|(br, _)| r < br) {
            best = Some((r, shape));
        }
    }
    let (residue, shape) = best.ok_or_else(|| degenerate(PrimitiveKind::Cylinder, "no axis admits a circle fit"))?;
    let [a, b] = shape.axis.others();
    let mut intervals = base.intervals;
    intervals[a.index()] = Interval::new(shape.center.0 - shape.radius, shape.center.0 + shape.radius)
        .union(&bbox.interval(a));
    intervals[b.index()] = Interval::new(shape.center.1 - shape.radius, shape.center.1 + shape.radius)
        .union(&bbox.interval(b));
    Ok(Primitive {
        intervals,
        cyl_axis: Some(shape.axis),
        residue,
        ..base
    })
}

/// Least-squares rectangle: each side is the mean coordinate of the points
/// nearest to it; points deep inside the rectangle are ignored.
fn fit_rectangle(points: &[(f64, f64)]) -> [Interval; 2] {
    let mut rect = [
        Interval::new(f64::INFINITY, f64::NEG_INFINITY),
        Interval::new(f64::INFINITY, f64::NEG_INFINITY),
    ];
    for &(u, v) in points {
        rect[0] = rect[0].union(&Interval::point(u));
        rect[1] = rect[1].union(&Interval::point(v));
    }
    let band = 0.1 * rect[0].len().max(rect[1].len());
    for _ in 0..3 {
        let mut sums = [[(0.0, 0usize); 2]; 2];
        for &(u, v) in points {
            let c = [u, v];
            let mut nearest = (f64::INFINITY, 0usize, 0usize);
            for k in 0..2 {
                for (s, end) in [rect[k].lo, rect[k].hi].into_iter().enumerate() {
                    let d = (c[k] - end).abs();
                    if d < nearest.0 {
                        nearest = (d, k, s);
                    }
                }
            }
            if nearest.0 <= band {
                let slot = &mut sums[nearest.1][nearest.2];
                slot.0 += c[nearest.1];
                slot.1 += 1;
            }
        }
        for k in 0..2 {
            if sums[k][0].1 > 0 {
                rect[k].lo = sums[k][0].0 / sums[k][0].1 as f64;
            }
            if sums[k][1].1 > 0 {
                rect[k].hi = sums[k][1].0 / sums[k][1].1 as f64;
            }
        }
    }
    rect
}

fn pyramid_distance(p: &PyramidSections, h: Interval, q: &Vec3) -> f64 {
    let height = h.len();
    let [a, b] = p.axis.others();
    let z = q[p.axis.index()];
    let t = ((z - h.lo) / height).clamp(0.0, 1.0);
    let rect = p.at(t);
    let c = [q[a.index()], q[b.index()]];
    let mut inside = (z - h.lo).min(h.hi - z);
    let mut outside = (h.lo - z).max(z - h.hi).max(0.0).powi(2);
    for k in 0..2 {
        let slope_lo = (p.top[k].lo - p.bottom[k].lo) / height;
        let slope_hi = (p.top[k].hi - p.bottom[k].hi) / height;
        let d_lo = (c[k] - rect[k].lo) / (1.0 + slope_lo * slope_lo).sqrt();
        let d_hi = (rect[k].hi - c[k]) / (1.0 + slope_hi * slope_hi).sqrt();
        for d in [d_lo, d_hi] {
            if d < 0.0 {
                outside += d * d;
            } else {
                inside = inside.min(d);
            }
        }
    }
    if outside > 0.0 {
        outside.sqrt()
    } else {
        inside
    }
}

fn fit_pyramid(base: Primitive, samples: &[Vec3], up: Axis) -> Result<Primitive, FitError> {
    let h = base.interval(up);
    if !(h.len() > 0.0) {
        return Err(degenerate(PrimitiveKind::TruncatedPyramid, "zero height"));
    }
    let [a, b] = up.others();
    let slab = PYRAMID_SLAB_FRACTION * h.len();
    let project = |p: &Vec3| (p[a.index()], p[b.index()]);
    let bottom_pts: Vec<_> = samples.iter().filter(|p| p[up.index()] <= h.lo + slab).map(project).collect();
    let top_pts: Vec<_> = samples.iter().filter(|p| p[up.index()] >= h.hi - slab).map(project).collect();
    if bottom_pts.len() < 2 || top_pts.len() < 2 {
        return Err(degenerate(PrimitiveKind::TruncatedPyramid, "empty cap slab"));
    }
    let sections = PyramidSections {
        axis: up,
        bottom: fit_rectangle(&bottom_pts),
        top: fit_rectangle(&top_pts),
    };
    if sections.bottom.iter().chain(sections.top.iter()).any(|r| !(r.len() >= 0.0)) {
        return Err(degenerate(PrimitiveKind::TruncatedPyramid, "inverted cap rectangle"));
    }
    let residue = rms(samples.iter().map(|q| pyramid_distance(&sections, h, q)));
    Ok(Primitive {
        pyramid: Some(sections),
        residue,
        ..base
    })
}

/// Closest distance from `p` to triangle `abc`.
pub(crate) fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + v * ab)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + w * ac)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + w * (c - b))).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

/// Sample points spread over the primitive's surface.
fn primitive_surface_points(prim: &Primitive) -> Vec<Vec3> {
    const N: usize = 10;
    let grid = |f: &mut dyn FnMut(f64, f64)| {
        for i in 0..N {
            for j in 0..N {
                f((i as f64 + 0.5) / N as f64, (j as f64 + 0.5) / N as f64);
            }
        }
    };
    let mut out = Vec::new();
    let lerp = |iv: Interval, t: f64| iv.lo + t * iv.len();
    match prim.kind {
        PrimitiveKind::Cylinder => {
            let axis = prim.cyl_axis.expect("cylinder axis");
            let [a, b] = axis.others();
            let (ia, ib) = (prim.interval(a), prim.interval(b));
            let (cx, cy) = (ia.mid(), ib.mid());
            let radius = 0.5 * ia.len().min(ib.len());
            let h = prim.interval(axis);
            let mut put = |hh: f64, u: f64, v: f64| {
                let mut p = Vec3::zeros();
                p[axis.index()] = hh;
                p[a.index()] = u;
                p[b.index()] = v;
                out.push(p);
            };
            for i in 0..24 {
                let ang = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / 24.0;
                for j in 0..8 {
                    put(lerp(h, (j as f64 + 0.5) / 8.0), cx + radius * ang.cos(), cy + radius * ang.sin());
                }
                for ring in [0.3, 0.6, 0.9] {
                    for hh in [h.lo, h.hi] {
                        put(hh, cx + ring * radius * ang.cos(), cy + ring * radius * ang.sin());
                    }
                }
            }
        }
        PrimitiveKind::TruncatedPyramid => {
            let p = prim.pyramid.as_ref().expect("pyramid sections");
            let h = prim.interval(p.axis);
            let [a, b] = p.axis.others();
            let mk = |hh: f64, u: f64, v: f64| {
                let mut q = Vec3::zeros();
                q[p.axis.index()] = hh;
                q[a.index()] = u;
                q[b.index()] = v;
                q
            };
            grid(&mut |s, t| {
                out.push(mk(h.lo, lerp(p.bottom[0], s), lerp(p.bottom[1], t)));
                out.push(mk(h.hi, lerp(p.top[0], s), lerp(p.top[1], t)));
                let r = p.at(t);
                let hh = lerp(h, t);
                out.push(mk(hh, r[0].lo, lerp(r[1], s)));
                out.push(mk(hh, r[0].hi, lerp(r[1], s)));
                out.push(mk(hh, lerp(r[0], s), r[1].lo));
                out.push(mk(hh, lerp(r[0], s), r[1].hi));
            });
        }
        _ => {
            for normal in Axis::ALL {
                if !prim.has_face(normal) {
                    continue;
                }
                let [a, b] = normal.others();
                let sides: &[Side] = if prim.flat_axis().is_some() { &[Side::Lo] } else { &Side::BOTH };
                for side in sides {
                    grid(&mut |s, t| {
                        let mut q = Vec3::zeros();
                        q[normal.index()] = prim.face(normal, *side);
                        q[a.index()] = lerp(prim.interval(a), s);
                        q[b.index()] = lerp(prim.interval(b), t);
                        out.push(q);
                    });
                }
            }
        }
    }
    out
}

/// Fraction of the primitive's surface lying within `tol` of the mesh.
pub fn surface_coverage(prim: &Primitive, segment: &Segment, tol: f64) -> f64 {
    let tris: Vec<([Vec3; 3], Aabb)> = segment
        .triangles
        .iter()
        .map(|t| {
            let v = t.map(|i| Vec3::from(segment.vertices[i as usize]));
            let mut bb = Aabb::empty();
            for p in &v {
                bb.include(&[p.x, p.y, p.z]);
            }
            (v, bb)
        })
        .collect();
    let points = primitive_surface_points(prim);
    if points.is_empty() {
        return 0.0;
    }
    let near = points
        .iter()
        .filter(|p| {
            tris.iter().any(|(v, bb)| {
                let gap = (0..3)
                    .map(|k| (bb.min[k] - p[k]).max(p[k] - bb.max[k]).max(0.0))
                    .fold(0.0f64, f64::max);
                gap <= tol && point_triangle_distance(p, &v[0], &v[1], &v[2]) <= tol
            })
        })
        .count();
    near as f64 / points.len() as f64
}

fn contains_vertices(prim: &Primitive, segment: &Segment) -> bool {
    let slack = prim.residue + 1e-9;
    segment
        .vertices
        .iter()
        .all(|v| (0..3).all(|k| prim.intervals[k].contains(v[k], slack)))
}

/// Fits every segment and keeps, per segment, the accepted fit with the
/// smallest residue (simplest kind on ties). Segments without an accepted
/// fit become `Custom` bounding boxes.
pub fn fit_all(model: &SegmentedModel) -> Vec<Primitive> {
    let tie = TIE_TOLERANCE * model.bbox_diagonal;
    model
        .segments
        .iter()
        .map(|seg| {
            let tol = COVERAGE_TOLERANCE * seg.bbox().diagonal();
            let accepted: Vec<Primitive> = PrimitiveKind::FITTABLE
                .into_iter()
                .filter_map(|kind| fit_primitive(seg, kind, model.up_axis).ok())
                .filter(|p| contains_vertices(p, seg) && surface_coverage(p, seg, tol) >= MIN_SURFACE_COVERAGE)
                .collect();
            let best = accepted.iter().map(|p| p.residue).fold(f64::INFINITY, f64::min);
            accepted
                .into_iter()
                .filter(|p| p.residue <= best + tie)
                .min_by(|a, b| a.kind.cmp(&b.kind).then(Ordering::Equal))
                .unwrap_or_else(|| {
                    fit_primitive(seg, PrimitiveKind::Custom, model.up_axis).expect("custom always fits")
                })
        })
        .collect()
}
