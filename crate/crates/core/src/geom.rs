//! Small axis-aligned geometry vocabulary shared by every stage.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// One of the three world axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            2 => Axis::Z,
            _ => panic!("axis index out of range: {i}"),
        }
    }

    /// The two remaining axes, in ascending order.
    pub fn others(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::X, Axis::Z],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }

    pub fn unit(self) -> Vec3 {
        let mut v = Vec3::zeros();
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        f.write_str(s)
    }
}

/// Low or high end of an interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Lo,
    Hi,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Lo, Side::Hi];

    pub fn flip(self) -> Side {
        match self {
            Side::Lo => Side::Hi,
            Side::Hi => Side::Lo,
        }
    }

    /// Outward direction of a face on this side.
    pub fn sign(self) -> f64 {
        match self {
            Side::Lo => -1.0,
            Side::Hi => 1.0,
        }
    }
}

/// Closed interval `[lo, hi]` in model units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn end(&self, side: Side) -> f64 {
        match side {
            Side::Lo => self.lo,
            Side::Hi => self.hi,
        }
    }

    pub fn translate(&self, by: f64) -> Interval {
        Interval::new(self.lo + by, self.hi + by)
    }

    pub fn union(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.lo - slack && v <= self.hi + slack
    }

    /// Affine map taking `self` onto `to`; degenerate sources translate.
    pub fn map_to(&self, to: &Interval, v: f64) -> f64 {
        let len = self.len();
        if len.abs() <= f64::EPSILON * self.lo.abs().max(self.hi.abs()).max(1.0) {
            v + (to.mid() - self.mid())
        } else {
            to.lo + (v - self.lo) * (to.len() / len)
        }
    }
}

/// Axis-aligned box as three intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn from_intervals(iv: &[Interval; 3]) -> Self {
        Aabb {
            min: [iv[0].lo, iv[1].lo, iv[2].lo],
            max: [iv[0].hi, iv[1].hi, iv[2].hi],
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a [f64; 3]>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.include(p);
        }
        b
    }

    pub fn include(&mut self, p: &[f64; 3]) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|k| self.min[k] > self.max[k])
    }

    pub fn interval(&self, axis: Axis) -> Interval {
        let k = axis.index();
        Interval::new(self.min[k], self.max[k])
    }

    pub fn intervals(&self) -> [Interval; 3] {
        [self.interval(Axis::X), self.interval(Axis::Y), self.interval(Axis::Z)]
    }

    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..3)
            .map(|k| (self.max[k] - self.min[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Vec3::new(
                if i & 1 == 0 { self.min[0] } else { self.max[0] },
                if i & 2 == 0 { self.min[1] } else { self.max[1] },
                if i & 4 == 0 { self.min[2] } else { self.max[2] },
            );
        }
        out
    }

    /// Centers of the six faces, ordered (axis, side).
    pub fn face_centers(&self) -> [Vec3; 6] {
        let c = self.center();
        let mut out = [c; 6];
        for axis in Axis::ALL {
            for (s, side) in Side::BOTH.iter().enumerate() {
                let k = axis.index();
                out[2 * k + s][k] = match side {
                    Side::Lo => self.min[k],
                    Side::Hi => self.max[k],
                };
            }
        }
        out
    }

    /// The twelve edges as segment endpoints.
    pub fn edges(&self) -> Vec<[Vec3; 2]> {
        let c = self.corners();
        let mut out = Vec::with_capacity(12);
        for i in 0..8usize {
            for bit in [1usize, 2, 4] {
                if i & bit == 0 {
                    out.push([c[i], c[i | bit]]);
                }
            }
        }
        out
    }

    /// Parametric entry distance of the segment `origin + t*dir`, `t` in
    /// `[0, t_max]`, into the closed box. `None` when it misses.
    pub fn ray_entry(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            if dir[k].abs() < 1e-300 {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
            } else {
                let inv = 1.0 / dir[k];
                let mut a = (self.min[k] - origin[k]) * inv;
                let mut b = (self.max[k] - origin[k]) * inv;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some(t0)
    }
}

pub fn to_vec3(p: &[f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}
