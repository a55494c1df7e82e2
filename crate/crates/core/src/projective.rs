//! Pinhole camera, vanishing points, and straightedge constructions.
//!
//! Constructions only join points and intersect lines, so the same code runs
//! in a face's affine chart (then lifted to 3D) and on projected pixel
//! coordinates; the two agree because incidence survives projection.

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Axis, Interval, Side, Vec3};

/// Homogeneous 2D point or line.
pub type H2 = Vector3<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("point lies on or behind the eye plane")]
    BehindEye,
    #[error("degenerate construction: {0}")]
    Construction(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    pub up: [f64; 3],
    /// Vertical field of view in degrees.
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

/// Orthonormal camera frame: right, up, forward.
#[derive(Clone, Copy, Debug)]
struct Frame {
    r: Vec3,
    u: Vec3,
    f: Vec3,
    fpx: f64,
}

impl Camera {
    pub fn validate(&self) -> Result<(), ProjectionError> {
        let finite = self
            .eye
            .iter()
            .chain(&self.target)
            .chain(&self.up)
            .chain(std::iter::once(&self.vertical_fov))
            .all(|v| v.is_finite());
        if !finite {
            return Err(ProjectionError::Camera("non-finite parameter".into()));
        }
        if !(self.vertical_fov > 10.0 && self.vertical_fov < 120.0) {
            return Err(ProjectionError::Camera(format!(
                "vertical_fov {} outside (10, 120) degrees",
                self.vertical_fov
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ProjectionError::Camera("image size must be positive".into()));
        }
        let f = Vec3::from(self.target) - Vec3::from(self.eye);
        let scale = Vec3::from(self.eye).norm().max(Vec3::from(self.target).norm()).max(1.0);
        if f.norm() <= 1e-12 * scale {
            return Err(ProjectionError::Camera("eye coincides with target".into()));
        }
        let up = Vec3::from(self.up);
        if up.norm() <= 1e-12 || f.normalize().cross(&up.normalize()).norm() <= 1e-9 {
            return Err(ProjectionError::Camera("up vector parallel to gaze".into()));
        }
        Ok(())
    }

    fn frame(&self) -> Frame {
        let f = (Vec3::from(self.target) - Vec3::from(self.eye)).normalize();
        let r = f.cross(&Vec3::from(self.up)).normalize();
        let u = r.cross(&f);
        let fpx = 0.5 * self.height as f64 / (0.5 * self.vertical_fov.to_radians()).tan();
        Frame { r, u, f, fpx }
    }

    pub fn eye_point(&self) -> Vec3 {
        Vec3::from(self.eye)
    }

    pub fn image_area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    /// Camera-space coordinates (right, up, depth).
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        let fr = self.frame();
        let d = p - self.eye_point();
        Vec3::new(d.dot(&fr.r), d.dot(&fr.u), d.dot(&fr.f))
    }

    /// Pixel coordinates, y pointing down.
    pub fn project(&self, p: &Vec3) -> Result<[f64; 2], ProjectionError> {
        let c = self.to_camera(p);
        let scale = (p - self.eye_point()).norm().max(1.0);
        if c.z <= 1e-9 * scale {
            return Err(ProjectionError::BehindEye);
        }
        let fpx = self.frame().fpx;
        Ok([
            0.5 * self.width as f64 + fpx * c.x / c.z,
            0.5 * self.height as f64 - fpx * c.y / c.z,
        ])
    }

    /// 3x4 matrix taking homogeneous world points to homogeneous pixels.
    pub fn matrix(&self) -> Matrix3x4<f64> {
        let fr = self.frame();
        let (cx, cy) = (0.5 * self.width as f64, 0.5 * self.height as f64);
        let k = Matrix3::new(fr.fpx, 0.0, cx, 0.0, -fr.fpx, cy, 0.0, 0.0, 1.0);
        let rot = Matrix3::from_rows(&[fr.r.transpose(), fr.u.transpose(), fr.f.transpose()]);
        let t = -(rot * self.eye_point());
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
        rt.set_column(3, &t);
        k * rt
    }

    /// Image of a world direction: `None` when parallel to the image plane.
    pub fn vanishing_point(&self, dir: &Vec3) -> Option<[f64; 2]> {
        let fr = self.frame();
        let d = dir.normalize();
        let z = d.dot(&fr.f);
        if z.abs() <= 1e-12 {
            return None;
        }
        Some([
            0.5 * self.width as f64 + fr.fpx * d.dot(&fr.r) / z,
            0.5 * self.height as f64 - fr.fpx * d.dot(&fr.u) / z,
        ])
    }

    pub fn on_canvas(&self, p: &[f64; 2]) -> bool {
        p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= self.width as f64 && p[1] <= self.height as f64
    }

    /// Image of the plane through the eye perpendicular to `up_axis`, as a
    /// homogeneous line `a x + b y + c = 0`.
    pub fn horizon(&self, up_axis: Axis) -> Option<H2> {
        let fr = self.frame();
        let n = up_axis.unit();
        // Ray direction for pixel (x, y) is r*(x-cx)/fpx - u*(y-cy)/fpx + f.
        let (cx, cy) = (0.5 * self.width as f64, 0.5 * self.height as f64);
        let a = n.dot(&fr.r) / fr.fpx;
        let b = -n.dot(&fr.u) / fr.fpx;
        let c = n.dot(&fr.f) - a * cx - b * cy;
        if a.abs() + b.abs() <= 1e-15 {
            return None;
        }
        Some(H2::new(a, b, c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishingPoint {
    pub axis: Axis,
    pub x: f64,
    pub y: f64,
    pub on_canvas: bool,
}

/// Vanishing points of the three world axes, `None` where an axis is
/// parallel to the image plane.
pub fn vanishing_points(camera: &Camera) -> [Option<VanishingPoint>; 3] {
    Axis::ALL.map(|axis| {
        camera.vanishing_point(&axis.unit()).map(|p| VanishingPoint {
            axis,
            x: p[0],
            y: p[1],
            on_canvas: camera.on_canvas(&p),
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ability {
    Novice,
    Apprentice,
    Master,
}

impl std::str::FromStr for Ability {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "novice" => Ok(Ability::Novice),
            "apprentice" => Ok(Ability::Apprentice),
            "master" => Ok(Ability::Master),
            other => Err(format!("unknown ability '{other}' (novice|apprentice|master)")),
        }
    }
}

/// Lowest ability that still sees a line. Construction lines are shown to
/// novices only, result lines to novices and apprentices, essential lines
/// to everybody.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Construction,
    Result,
    Essential,
}

impl Tier {
    pub fn visible_to(self, ability: Ability) -> bool {
        match ability {
            Ability::Novice => true,
            Ability::Apprentice => self != Tier::Construction,
            Ability::Master => self == Tier::Essential,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GuideKind {
    Diagonal,
    HalfLine,
    ThirdLine,
    QuarterLine,
    ExtensionRay,
    AlignmentRay,
    VanishingRay,
    EllipseTangentPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtendFactor {
    Half,
    One,
    Two,
}

impl ExtendFactor {
    pub fn value(self) -> f64 {
        match self {
            ExtendFactor::Half => 0.5,
            ExtendFactor::One => 1.0,
            ExtendFactor::Two => 2.0,
        }
    }
}

/// A straightedge recipe locating one ratio along the quad's `AB` edge,
/// measured from `A` (or from `B` when mirrored).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Recipe {
    Align,
    Half,
    Third,
    Quarter,
    Extend(ExtendFactor),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConLine {
    pub kind: GuideKind,
    pub tier: Tier,
    pub ends: [H2; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Construction {
    pub lines: Vec<ConLine>,
    /// The constructed point on line `AB`.
    pub point: H2,
}

pub fn join(p: &H2, q: &H2) -> H2 {
    normalized(p.cross(q))
}

pub fn meet(l: &H2, m: &H2) -> H2 {
    normalized(l.cross(m))
}

fn normalized(h: H2) -> H2 {
    let n = h.norm();
    if n > 0.0 {
        h / n
    } else {
        h
    }
}

/// Euclidean coordinates of a finite homogeneous point.
pub fn dehomogenize(h: &H2) -> Option<[f64; 2]> {
    if h.z.abs() <= 1e-300 {
        return None;
    }
    Some([h.x / h.z, h.y / h.z])
}

pub fn point(x: f64, y: f64) -> H2 {
    H2::new(x, y, 1.0)
}

/// Quad corners `A, B, C, D` in order; `AB` runs along the measured axis.
pub type Quad = [H2; 4];

fn check_quad(q: &Quad) -> Result<(), ProjectionError> {
    for i in 0..4 {
        if q[i].z.abs() <= 1e-300 {
            return Err(ProjectionError::Construction("quad corner at infinity"));
        }
    }
    let p: Vec<[f64; 2]> = q.iter().map(|h| dehomogenize(h).unwrap()).collect();
    let area = 0.5
        * (0..4)
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % 4]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>();
    let scale = (0..4)
        .map(|i| (p[i][0] - p[(i + 2) % 4][0]).hypot(p[i][1] - p[(i + 2) % 4][1]))
        .fold(0.0, f64::max);
    if !(area.abs() > 1e-12 * scale * scale) {
        return Err(ProjectionError::Construction("quad has no area"));
    }
    Ok(())
}

fn line(kind: GuideKind, tier: Tier, a: H2, b: H2) -> ConLine {
    ConLine { kind, tier, ends: [a, b] }
}

struct Halving {
    ac: ConLine,
    bd: ConLine,
    center: H2,
    /// Ends of the line through the centre toward the vanishing point of
    /// `AD`, on `AB` and `DC`.
    mid_v: [H2; 2],
}

fn halve(q: &Quad) -> Halving {
    let [a, b, c, d] = *q;
    let center = meet(&join(&a, &c), &join(&b, &d));
    let vp_v = meet(&join(&a, &d), &join(&b, &c));
    let l = join(&center, &vp_v);
    Halving {
        ac: line(GuideKind::Diagonal, Tier::Construction, a, c),
        bd: line(GuideKind::Diagonal, Tier::Construction, b, d),
        center,
        mid_v: [meet(&l, &join(&a, &b)), meet(&l, &join(&d, &c))],
    }
}

pub fn construct_half(q: &Quad) -> Result<Construction, ProjectionError> {
    check_quad(q)?;
    let h = halve(q);
    Ok(Construction {
        point: h.mid_v[0],
        lines: vec![
            h.ac,
            h.bd,
            line(GuideKind::HalfLine, Tier::Result, h.mid_v[0], h.mid_v[1]),
        ],
    })
}

/// Quarter from `A`: halve, then halve the half next to `A`.
pub fn construct_quarter(q: &Quad) -> Result<Construction, ProjectionError> {
    check_quad(q)?;
    let h = halve(q);
    let sub = [q[0], h.mid_v[0], h.mid_v[1], q[3]];
    let s = halve(&sub);
    Ok(Construction {
        point: s.mid_v[0],
        lines: vec![
            h.ac,
            h.bd,
            line(GuideKind::HalfLine, Tier::Result, h.mid_v[0], h.mid_v[1]),
            s.ac,
            s.bd,
            line(GuideKind::QuarterLine, Tier::Result, s.mid_v[0], s.mid_v[1]),
        ],
    })
}

/// Third from `A`. `E` halves `AD`; `CE` meets `BD` and `BE` meets `AC` on
/// the one-third line.
pub fn construct_third(q: &Quad) -> Result<Construction, ProjectionError> {
    check_quad(q)?;
    let [a, b, c, d] = *q;
    let h = halve(q);
    let vp_u = meet(&join(&a, &b), &join(&d, &c));
    let l = join(&h.center, &vp_u);
    let e = meet(&l, &join(&a, &d));
    let e2 = meet(&l, &join(&b, &c));
    let i = meet(&join(&c, &e), &join(&b, &d));
    let vp_v = meet(&join(&a, &d), &join(&b, &c));
    let third = join(&i, &vp_v);
    let ends = [meet(&third, &join(&a, &b)), meet(&third, &join(&d, &c))];
    Ok(Construction {
        point: ends[0],
        lines: vec![
            h.ac,
            h.bd,
            line(GuideKind::HalfLine, Tier::Construction, e, e2),
            line(GuideKind::Diagonal, Tier::Construction, c, e),
            line(GuideKind::Diagonal, Tier::Construction, b, e),
            line(GuideKind::ThirdLine, Tier::Result, ends[0], ends[1]),
        ],
    })
}

/// Reflection beyond `B`: returns the far corners `K` on ray `AB` and `L`
/// on ray `DC` plus the lines used, given the quad's horizontal midline.
fn reflect(
    q: &Quad,
    mid_u: &H2,
    vp_v: &H2,
    tier_diag: Tier,
    tier_close: Tier,
) -> (H2, H2, ConLine, ConLine) {
    let [a, b, c, d] = *q;
    let n = meet(mid_u, &join(&b, &c));
    let k = meet(&join(&d, &n), &join(&a, &b));
    let l = meet(&join(&k, vp_v), &join(&d, &c));
    (
        k,
        l,
        line(GuideKind::Diagonal, tier_diag, d, k),
        line(GuideKind::ExtensionRay, tier_close, k, l),
    )
}

/// Extension of the quad beyond `B` by the given multiple of `AB`.
pub fn construct_extend(q: &Quad, factor: ExtendFactor) -> Result<Construction, ProjectionError> {
    check_quad(q)?;
    let [a, b, c, d] = *q;
    let h = halve(q);
    let vp_u = meet(&join(&a, &b), &join(&d, &c));
    let vp_v = meet(&join(&a, &d), &join(&b, &c));
    let mid_u = join(&h.center, &vp_u);
    let close_tier = if factor == ExtendFactor::One { Tier::Essential } else { Tier::Result };
    let (k, l, diag, close) = reflect(q, &mid_u, &vp_v, Tier::Result, close_tier);
    let mut extra = Vec::new();
    let (point, far_k, far_l) = match factor {
        ExtendFactor::One => (k, k, l),
        ExtendFactor::Half => {
            extra.push(line(GuideKind::Diagonal, Tier::Construction, b, l));
            let center = meet(&join(&b, &l), &mid_u);
            let half = join(&center, &vp_v);
            let ends = [meet(&half, &join(&a, &b)), meet(&half, &join(&d, &c))];
            extra.push(line(GuideKind::HalfLine, Tier::Essential, ends[0], ends[1]));
            (ends[0], k, l)
        }
        ExtendFactor::Two => {
            let (k2, l2, diag2, close2) = reflect(&[b, k, l, c], &mid_u, &vp_v, Tier::Result, Tier::Essential);
            extra.push(line(GuideKind::Diagonal, Tier::Construction, b, l));
            extra.push(line(GuideKind::Diagonal, Tier::Construction, c, k));
            extra.push(diag2);
            extra.push(close2);
            (k2, k2, l2)
        }
    };
    let mut lines = vec![
        line(GuideKind::ExtensionRay, Tier::Essential, b, far_k),
        line(GuideKind::ExtensionRay, Tier::Essential, c, far_l),
        h.ac,
        h.bd,
        line(
            GuideKind::HalfLine,
            Tier::Result,
            meet(&mid_u, &join(&a, &d)),
            meet(&mid_u, &join(&far_k, &far_l)),
        ),
        diag,
        close,
    ];
    lines.extend(extra);
    Ok(Construction { lines, point })
}

/// A single line along the edge `AD`.
pub fn construct_align(q: &Quad) -> Result<Construction, ProjectionError> {
    check_quad(q)?;
    Ok(Construction {
        point: q[0],
        lines: vec![line(GuideKind::AlignmentRay, Tier::Result, q[0], q[3])],
    })
}

pub fn construct(recipe: Recipe, q: &Quad) -> Result<Construction, ProjectionError> {
    match recipe {
        Recipe::Align => construct_align(q),
        Recipe::Half => construct_half(q),
        Recipe::Third => construct_third(q),
        Recipe::Quarter => construct_quarter(q),
        Recipe::Extend(f) => construct_extend(q, f),
    }
}

/// The quad with `A` and `B` (and `D`, `C`) swapped, so a recipe measures
/// from the other end.
pub fn mirror(q: &Quad) -> Quad {
    [q[1], q[0], q[3], q[2]]
}

/// Tangency points of the inscribed ellipse plus the lines locating them:
/// two diagonals, both centre lines, then the four edge midpoints.
pub fn ellipse_guides(q: &Quad) -> Result<Construction, ProjectionError> {
    check_quad(q)?;
    let [a, b, c, d] = *q;
    let h = halve(q);
    let vp_u = meet(&join(&a, &b), &join(&d, &c));
    let l = join(&h.center, &vp_u);
    let across = [meet(&l, &join(&a, &d)), meet(&l, &join(&b, &c))];
    let mut lines = vec![
        h.ac,
        h.bd,
        line(GuideKind::HalfLine, Tier::Result, h.mid_v[0], h.mid_v[1]),
        line(GuideKind::HalfLine, Tier::Result, across[0], across[1]),
    ];
    for p in [h.mid_v[0], across[1], h.mid_v[1], across[0]] {
        lines.push(line(GuideKind::EllipseTangentPoint, Tier::Result, p, p));
    }
    Ok(Construction { lines, point: h.center })
}

/// An axis-perpendicular rectangle used as the affine chart of a face:
/// chart coordinates are `(u, v)` world coordinates on the in-plane axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceChart {
    pub normal: Axis,
    pub offset: f64,
    pub u: Axis,
    pub v: Axis,
    pub u_range: Interval,
    pub v_range: Interval,
}

impl FaceChart {
    /// Chart for the face perpendicular to `normal` whose measured axis is
    /// `u` (the remaining in-plane axis becomes `v`).
    pub fn new(normal: Axis, offset: f64, u: Axis, ranges: [Interval; 3]) -> FaceChart {
        assert_ne!(normal, u, "measured axis lies in the face");
        let v = Axis::ALL.into_iter().find(|a| *a != normal && *a != u).unwrap();
        FaceChart {
            normal,
            offset,
            u,
            v,
            u_range: ranges[u.index()],
            v_range: ranges[v.index()],
        }
    }

    /// Corners `A=(lo,lo) B=(hi,lo) C=(hi,hi) D=(lo,hi)`; mirrored along
    /// `u` when measuring from the high side.
    pub fn quad(&self, from: Side) -> Quad {
        let (u, v) = (self.u_range, self.v_range);
        let q = [point(u.lo, v.lo), point(u.hi, v.lo), point(u.hi, v.hi), point(u.lo, v.hi)];
        match from {
            Side::Lo => q,
            Side::Hi => mirror(&q),
        }
    }

    pub fn lift(&self, h: &H2) -> Result<Vec3, ProjectionError> {
        let [x, y] = dehomogenize(h).ok_or(ProjectionError::Construction("point at infinity"))?;
        let mut p = Vec3::zeros();
        p[self.normal.index()] = self.offset;
        p[self.u.index()] = x;
        p[self.v.index()] = y;
        Ok(p)
    }

    pub fn corners_3d(&self) -> [Vec3; 4] {
        self.quad(Side::Lo).map(|h| self.lift(&h).expect("finite corner"))
    }

    /// Homography taking chart coordinates to homogeneous pixels.
    pub fn homography(&self, camera: &Camera) -> Matrix3<f64> {
        let m = camera.matrix();
        let mut basis = nalgebra::Matrix4x3::zeros();
        basis[(self.u.index(), 0)] = 1.0;
        basis[(self.v.index(), 1)] = 1.0;
        basis[(self.normal.index(), 2)] = self.offset;
        basis[(3, 2)] = 1.0;
        m * basis
    }
}

/// A construction lifted onto a face, as 3D segments.
#[derive(Clone, Debug, PartialEq)]
pub struct Lifted {
    pub kind: GuideKind,
    pub tier: Tier,
    pub ends: [Vec3; 2],
}

pub fn lift_construction(chart: &FaceChart, c: &Construction) -> Result<Vec<Lifted>, ProjectionError> {
    c.lines
        .iter()
        .map(|l| {
            Ok(Lifted {
                kind: l.kind,
                tier: l.tier,
                ends: [chart.lift(&l.ends[0])?, chart.lift(&l.ends[1])?],
            })
        })
        .collect()
}

/// Signed area of a projected polygon in square pixels.
pub fn polygon_area(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Quad {
        [point(0.0, 0.0), point(1.0, 0.0), point(1.0, 1.0), point(0.0, 1.0)]
    }

    fn xy(h: &H2) -> [f64; 2] {
        dehomogenize(h).unwrap()
    }

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
    }

    fn camera() -> Camera {
        Camera {
            eye: [4.0, 3.0, 5.0],
            target: [0.0, 0.0, 0.0],
            up: [0.0, 1.0, 0.0],
            vertical_fov: 45.0,
            width: 1000,
            height: 800,
        }
    }

    #[test]
    fn target_projects_to_image_center() {
        let p = camera().project(&Vec3::zeros()).unwrap();
        assert!((p[0] - 500.0).abs() < 1e-9 && (p[1] - 400.0).abs() < 1e-9);
    }

    #[test]
    fn eye_plane_point_is_rejected() {
        let cam = camera();
        assert_eq!(cam.project(&cam.eye_point()), Err(ProjectionError::BehindEye));
        let behind = cam.eye_point() * 2.0;
        assert_eq!(cam.project(&behind), Err(ProjectionError::BehindEye));
    }

    #[test]
    fn camera_validation() {
        let mut c = camera();
        c.vertical_fov = 120.0;
        assert!(c.validate().is_err());
        let mut c = camera();
        c.target = c.eye;
        assert!(c.validate().is_err());
        let mut c = camera();
        c.up = [4.0, 3.0, 5.0];
        assert!(c.validate().is_err());
        camera().validate().unwrap();
    }

    #[test]
    fn level_camera_has_two_point_perspective() {
        let cam = Camera {
            eye: [5.0, 0.5, 4.0],
            target: [0.0, 0.5, 0.0],
            ..camera()
        };
        let vps = vanishing_points(&cam);
        assert!(vps[1].is_none());
        assert!(vps[0].is_some() && vps[2].is_some());
        let tilted = vanishing_points(&camera());
        assert!(tilted.iter().all(Option::is_some));
    }

    #[test]
    fn horizontal_vanishing_points_lie_on_horizon() {
        let cam = camera();
        let h = cam.horizon(Axis::Y).unwrap();
        for axis in [Axis::X, Axis::Z] {
            let p = cam.vanishing_point(&axis.unit()).unwrap();
            let r = h.dot(&point(p[0], p[1])) / h.xy().norm();
            assert!(r.abs() < 1e-9, "{axis}: {r}");
        }
    }

    #[test]
    fn half_of_unit_square() {
        let c = construct_half(&unit_square()).unwrap();
        assert_eq!(c.lines.len(), 3);
        assert!(close(xy(&c.point), [0.5, 0.0]));
        assert!(close(xy(&c.lines[2].ends[1]), [0.5, 1.0]));
    }

    #[test]
    fn third_meets_at_one_third() {
        let c = construct_third(&unit_square()).unwrap();
        assert_eq!(c.lines.len(), 6);
        let ce = join(&c.lines[3].ends[0], &c.lines[3].ends[1]);
        let bd = join(&c.lines[1].ends[0], &c.lines[1].ends[1]);
        assert!(close(xy(&meet(&ce, &bd)), [1.0 / 3.0, 2.0 / 3.0]));
        let wide = [point(0.0, 0.0), point(2.0, 0.0), point(2.0, 1.0), point(0.0, 1.0)];
        assert!(close(xy(&construct_third(&wide).unwrap().point), [2.0 / 3.0, 0.0]));
    }

    #[test]
    fn quarter_is_half_of_half() {
        let q = unit_square();
        let c = construct_quarter(&q).unwrap();
        let h = construct_half(&q).unwrap();
        let left = [q[0], h.lines[2].ends[0], h.lines[2].ends[1], q[3]];
        let hh = construct_half(&left).unwrap();
        assert!(close(xy(&c.point), xy(&hh.point)));
        assert!(close(xy(&c.point), [0.25, 0.0]));
    }

    #[test]
    fn extensions_reach_reflected_corners() {
        let q = unit_square();
        for (f, x) in [(ExtendFactor::Half, 1.5), (ExtendFactor::One, 2.0), (ExtendFactor::Two, 3.0)] {
            let c = construct_extend(&q, f).unwrap();
            assert!(close(xy(&c.point), [x, 0.0]), "{f:?}");
        }
        let one = construct_extend(&q, ExtendFactor::One).unwrap();
        let close_edge = one.lines.iter().find(|l| l.kind == GuideKind::ExtensionRay && l.ends[0] != q[1] && l.ends[0] != q[2]).unwrap();
        assert!(close(xy(&close_edge.ends[1]), [2.0, 1.0]));
    }

    #[test]
    fn recipe_tiers_match_ability_counts() {
        let q = unit_square();
        let count = |r: Recipe, a: Ability| construct(r, &q).unwrap().lines.iter().filter(|l| l.tier.visible_to(a)).count();
        assert_eq!([Ability::Novice, Ability::Apprentice, Ability::Master].map(|a| count(Recipe::Half, a)), [3, 1, 0]);
        assert_eq!(
            [Ability::Novice, Ability::Apprentice, Ability::Master].map(|a| count(Recipe::Extend(ExtendFactor::Half), a)),
            [9, 6, 3]
        );
        assert_eq!(count(Recipe::Extend(ExtendFactor::One), Ability::Novice), 7);
        assert_eq!(count(Recipe::Extend(ExtendFactor::Two), Ability::Novice), 11);
        assert_eq!(count(Recipe::Third, Ability::Novice), 6);
        assert_eq!(count(Recipe::Quarter, Ability::Novice), 6);
        assert_eq!(count(Recipe::Align, Ability::Novice), 1);
    }

    #[test]
    fn ellipse_tangency_at_edge_midpoints() {
        let c = ellipse_guides(&unit_square()).unwrap();
        let pts: Vec<[f64; 2]> = c
            .lines
            .iter()
            .filter(|l| l.kind == GuideKind::EllipseTangentPoint)
            .map(|l| xy(&l.ends[0]))
            .collect();
        let want = [[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]];
        assert_eq!(pts.len(), 4);
        for (p, w) in pts.iter().zip(want) {
            assert!(close(*p, w), "{p:?} vs {w:?}");
        }
    }

    #[test]
    fn degenerate_quad_is_rejected() {
        let flat = [point(0.0, 0.0), point(1.0, 0.0), point(2.0, 0.0), point(3.0, 0.0)];
        assert!(construct_half(&flat).is_err());
    }

    #[test]
    fn face_chart_lifts_onto_face() {
        let ranges = [Interval::new(0.0, 2.0), Interval::new(1.0, 1.0), Interval::new(-1.0, 1.0)];
        let chart = FaceChart::new(Axis::Y, 1.0, Axis::Z, ranges);
        let c = construct_half(&chart.quad(Side::Lo)).unwrap();
        for l in lift_construction(&chart, &c).unwrap() {
            assert_eq!(l.ends[0].y, 1.0);
            assert_eq!(l.ends[1].y, 1.0);
        }
        let p = chart.lift(&c.point).unwrap();
        assert_eq!(p, Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn homography_agrees_with_projection() {
        let cam = camera();
        let ranges = [Interval::new(0.0, 2.0), Interval::new(0.0, 1.0), Interval::new(-1.0, 1.0)];
        let chart = FaceChart::new(Axis::X, 2.0, Axis::Y, ranges);
        let hmat = chart.homography(&cam);
        for c in chart.quad(Side::Lo) {
            let via_h = xy(&(hmat * c));
            let via_p = cam.project(&chart.lift(&c).unwrap()).unwrap();
            assert!((via_h[0] - via_p[0]).abs() < 1e-9 && (via_h[1] - via_p[1]).abs() < 1e-9);
        }
    }
}
