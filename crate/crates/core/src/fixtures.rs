//! Procedural test models. Used by the test suites, the acceptance run and
//! the `h2s fixture` helper; every builder is deterministic.

use std::f64::consts::PI;

use crate::geom::{Axis, Vec3};
use crate::model_io::{Segment, SegmentedModel};

/// Collects triangles and orients each one away from `inside(p)`.
struct MeshBuilder {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
}

impl MeshBuilder {
    fn new() -> Self {
        MeshBuilder {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    fn vertex(&mut self, p: Vec3) -> u32 {
        self.vertices.push([p.x, p.y, p.z]);
        (self.vertices.len() - 1) as u32
    }

    fn tri(&mut self, a: u32, b: u32, c: u32, inside: Vec3) {
        let pa = Vec3::from(self.vertices[a as usize]);
        let pb = Vec3::from(self.vertices[b as usize]);
        let pc = Vec3::from(self.vertices[c as usize]);
        let n = (pb - pa).cross(&(pc - pa));
        let centroid = (pa + pb + pc) / 3.0;
        if n.dot(&(centroid - inside)) >= 0.0 {
            self.triangles.push([a, b, c]);
        } else {
            self.triangles.push([a, c, b]);
        }
    }

    fn quad(&mut self, q: [u32; 4], inside: Vec3) {
        self.tri(q[0], q[1], q[2], inside);
        self.tri(q[0], q[2], q[3], inside);
    }

    fn finish(self, id: u32, name: &str) -> Segment {
        Segment {
            id,
            name: name.to_string(),
            vertices: self.vertices,
            triangles: self.triangles,
            contours: None,
        }
    }
}

pub fn cuboid(id: u32, name: &str, min: [f64; 3], max: [f64; 3]) -> Segment {
    let mut m = MeshBuilder::new();
    let idx: Vec<u32> = (0..8)
        .map(|i| {
            m.vertex(Vec3::new(
                if i & 1 == 0 { min[0] } else { max[0] },
                if i & 2 == 0 { min[1] } else { max[1] },
                if i & 4 == 0 { min[2] } else { max[2] },
            ))
        })
        .collect();
    let center = (Vec3::from(min) + Vec3::from(max)) / 2.0;
    let faces = [
        [0, 2, 6, 4],
        [1, 3, 7, 5],
        [0, 1, 5, 4],
        [2, 3, 7, 6],
        [0, 1, 3, 2],
        [4, 5, 7, 6],
    ];
    for f in faces {
        m.quad(f.map(|k| idx[k]), center);
    }
    m.finish(id, name)
}

/// Closed cylinder with fan-triangulated caps around a center vertex.
pub fn cylinder(
    id: u32,
    name: &str,
    axis: Axis,
    center: [f64; 2],
    radius: f64,
    extent: [f64; 2],
    sides: usize,
) -> Segment {
    let [a, b] = axis.others();
    let point = |h: f64, u: f64, v: f64| {
        let mut p = Vec3::zeros();
        p[axis.index()] = h;
        p[a.index()] = u;
        p[b.index()] = v;
        p
    };
    let mut m = MeshBuilder::new();
    let mut rings = [Vec::new(), Vec::new()];
    for (r, h) in extent.iter().enumerate() {
        for k in 0..sides {
            let t = 2.0 * PI * k as f64 / sides as f64;
            rings[r].push(m.vertex(point(*h, center[0] + radius * t.cos(), center[1] + radius * t.sin())));
        }
    }
    let caps = [
        m.vertex(point(extent[0], center[0], center[1])),
        m.vertex(point(extent[1], center[0], center[1])),
    ];
    let mid = point(0.5 * (extent[0] + extent[1]), center[0], center[1]);
    for k in 0..sides {
        let n = (k + 1) % sides;
        m.quad([rings[0][k], rings[0][n], rings[1][n], rings[1][k]], mid);
        m.tri(caps[0], rings[0][k], rings[0][n], mid);
        m.tri(caps[1], rings[1][k], rings[1][n], mid);
    }
    m.finish(id, name)
}

/// Frustum of a rectangular pyramid along `axis`; rectangles are given as
/// `[lo, hi]` pairs on the two remaining axes in ascending order.
pub fn frustum(
    id: u32,
    name: &str,
    axis: Axis,
    extent: [f64; 2],
    bottom: [[f64; 2]; 2],
    top: [[f64; 2]; 2],
) -> Segment {
    let [a, b] = axis.others();
    let point = |h: f64, u: f64, v: f64| {
        let mut p = Vec3::zeros();
        p[axis.index()] = h;
        p[a.index()] = u;
        p[b.index()] = v;
        p
    };
    let mut m = MeshBuilder::new();
    let ring = |h: f64, r: [[f64; 2]; 2], m: &mut MeshBuilder| -> [u32; 4] {
        [
            m.vertex(point(h, r[0][0], r[1][0])),
            m.vertex(point(h, r[0][1], r[1][0])),
            m.vertex(point(h, r[0][1], r[1][1])),
            m.vertex(point(h, r[0][0], r[1][1])),
        ]
    };
    let lo = ring(extent[0], bottom, &mut m);
    let hi = ring(extent[1], top, &mut m);
    let inside = point(
        0.5 * (extent[0] + extent[1]),
        0.25 * (bottom[0][0] + bottom[0][1] + top[0][0] + top[0][1]),
        0.25 * (bottom[1][0] + bottom[1][1] + top[1][0] + top[1][1]),
    );
    m.quad(lo, inside);
    m.quad(hi, inside);
    for k in 0..4 {
        let n = (k + 1) % 4;
        m.quad([lo[k], lo[n], hi[n], hi[k]], inside);
    }
    m.finish(id, name)
}

/// Axis-perpendicular rectangle at `offset` along `normal`.
pub fn quad(id: u32, name: &str, normal: Axis, offset: f64, u: [f64; 2], v: [f64; 2]) -> Segment {
    let [a, b] = normal.others();
    let mut m = MeshBuilder::new();
    let mut ids = [0u32; 4];
    for (k, (uu, vv)) in [(u[0], v[0]), (u[1], v[0]), (u[1], v[1]), (u[0], v[1])].into_iter().enumerate() {
        let mut p = Vec3::zeros();
        p[normal.index()] = offset;
        p[a.index()] = uu;
        p[b.index()] = vv;
        ids[k] = m.vertex(p);
    }
    let mut below = Vec3::zeros();
    below[a.index()] = 0.5 * (u[0] + u[1]);
    below[b.index()] = 0.5 * (v[0] + v[1]);
    below[normal.index()] = offset - 1.0;
    m.quad(ids, below);
    m.finish(id, name)
}

/// Thin tube swept along a helix around the Y axis.
pub fn helix(id: u32, name: &str, radius: f64, pitch: f64, turns: f64, tube: f64) -> Segment {
    let steps = (turns * 48.0).ceil() as usize;
    let sides = 8;
    let mut m = MeshBuilder::new();
    let mut rings: Vec<Vec<u32>> = Vec::new();
    let mut centers = Vec::new();
    for s in 0..=steps {
        let t = turns * 2.0 * PI * s as f64 / steps as f64;
        let c = Vec3::new(radius * t.cos(), pitch * t / (2.0 * PI), radius * t.sin());
        let tangent = Vec3::new(-radius * t.sin(), pitch / (2.0 * PI), radius * t.cos()).normalize();
        let n1 = Vec3::new(t.cos(), 0.0, t.sin());
        let n2 = tangent.cross(&n1).normalize();
        let ring = (0..sides)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / sides as f64;
                m.vertex(c + tube * (a.cos() * n1 + a.sin() * n2))
            })
            .collect();
        rings.push(ring);
        centers.push(c);
    }
    for s in 0..steps {
        let inside = 0.5 * (centers[s] + centers[s + 1]);
        for k in 0..sides {
            let n = (k + 1) % sides;
            m.quad([rings[s][k], rings[s][n], rings[s + 1][n], rings[s + 1][k]], inside);
        }
    }
    m.finish(id, name)
}

fn model(segments: Vec<Segment>) -> SegmentedModel {
    SegmentedModel::new(segments, Axis::Y).expect("fixture is valid")
}

pub fn unit_cube() -> SegmentedModel {
    model(vec![cuboid(0, "cube", [0.0; 3], [1.0; 3])])
}

pub fn two_cuboids() -> SegmentedModel {
    model(vec![
        cuboid(0, "left", [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
        cuboid(1, "right", [1.5, 0.0, 0.2], [2.3, 0.6, 0.8]),
    ])
}

/// Stand mixer built from six axis-aligned parts. The bowl and blade share
/// a vertical axis, the switch sits flush on the base, and the remaining
/// parts share the mid-plane z = 0.
pub fn mixer() -> SegmentedModel {
    model(vec![
        cuboid(0, "base", [-1.0, 0.0, -0.6], [1.0, 0.2, 0.6]),
        cylinder(1, "bowl", Axis::Y, [0.25, 0.0], 0.45, [0.2, 0.75], 48),
        cylinder(2, "blade", Axis::Y, [0.25, 0.0], 0.12, [0.35, 0.95], 32),
        cuboid(3, "column", [-0.9, 0.2, -0.15], [-0.6, 1.2, 0.15]),
        cuboid(4, "head", [-0.9, 1.05, -0.22], [0.55, 1.4, 0.22]),
        cuboid(5, "switch", [0.72, 0.2, 0.32], [0.9, 0.3, 0.5]),
    ])
}

/// Four stacked blocks whose proportions only become easy after two
/// rounds of anchoring: the tower's best placement is relative to the
/// adjusted shelf, which itself is relative to the base.
pub fn chain4() -> SegmentedModel {
    model(vec![
        cuboid(0, "base", [0.0, 0.0, 0.0], [2.0, 0.5, 1.0]),
        cuboid(1, "shelf", [0.0, 0.5, 0.0], [1.04, 0.9, 1.0]),
        cuboid(2, "tower", [0.0, 0.9, 0.0], [0.54, 1.5, 1.0]),
        cuboid(3, "cap", [0.0, 1.5, 0.0], [0.275, 1.6, 1.0]),
    ])
}

/// Four-part desk lamp: base, post, arm and shade.
pub fn lamp() -> SegmentedModel {
    model(vec![
        cuboid(0, "base", [0.0, 0.0, 0.0], [1.0, 0.1, 0.7]),
        cuboid(1, "post", [0.45, 0.1, 0.3], [0.55, 1.0, 0.4]),
        cuboid(2, "arm", [0.45, 0.92, 0.3], [1.3, 1.0, 0.4]),
        frustum(
            3,
            "shade",
            Axis::Y,
            [0.6, 0.92],
            [[1.05, 1.55], [0.1, 0.6]],
            [[1.2, 1.4], [0.25, 0.45]],
        ),
    ])
}

/// Eight-part toaster-like appliance.
pub fn appliance8() -> SegmentedModel {
    model(vec![
        cuboid(0, "body", [0.0, 0.0, 0.0], [2.0, 1.0, 1.2]),
        cuboid(1, "lid", [0.05, 1.0, 0.05], [1.95, 1.12, 1.15]),
        cuboid(2, "slot_a", [0.3, 1.12, 0.2], [1.7, 1.16, 0.45]),
        cuboid(3, "slot_b", [0.3, 1.12, 0.75], [1.7, 1.16, 1.0]),
        cuboid(4, "lever", [2.0, 0.62, 0.52], [2.18, 0.72, 0.68]),
        cylinder(5, "dial", Axis::X, [0.3, 0.6], 0.12, [2.0, 2.08], 24),
        cuboid(6, "foot_l", [0.1, -0.1, 0.1], [0.5, 0.0, 1.1]),
        cuboid(7, "foot_r", [1.5, -0.1, 0.1], [1.9, 0.0, 1.1]),
    ])
}

/// All multi-part fixtures, by name.
pub fn all() -> Vec<(&'static str, SegmentedModel)> {
    vec![
        ("two_cuboids", two_cuboids()),
        ("mixer", mixer()),
        ("chain4", chain4()),
        ("lamp", lamp()),
        ("appliance8", appliance8()),
    ]
}

pub fn by_name(name: &str) -> Option<SegmentedModel> {
    match name {
        "unit_cube" => Some(unit_cube()),
        _ => all().into_iter().find(|(n, _)| *n == name).map(|(_, m)| m),
    }
}
