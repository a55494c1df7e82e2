//! Pairwise relations between fitted primitives.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::geom::{Axis, Side};
use crate::primitives::{PartId, Primitive, PrimitiveKind};

/// Relation kinds, declared in increasing priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationKind {
    Coplanar,
    Coaxial,
    CommonBisectorPlane,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RelationDetail {
    /// Face of `i` perpendicular to `axis` on `side_i` shares a plane with
    /// the face of `j` on `side_j`.
    Faces { axis: Axis, side_i: Side, side_j: Side },
    /// Shared centre-line direction (coaxial) or bisector-plane normal.
    Axis { axis: Axis },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub id: usize,
    pub i: PartId,
    pub j: PartId,
    pub kind: RelationKind,
    pub detail: RelationDetail,
}

impl Relation {
    /// Whether geometries `gi` (for part `i`) and `gj` (for part `j`) still
    /// satisfy this relation within `tol` model units.
    pub fn holds(&self, gi: &Primitive, gj: &Primitive, tol: f64) -> bool {
        match self.detail {
            RelationDetail::Faces { axis, side_i, side_j } => {
                (gi.face(axis, side_i) - gj.face(axis, side_j)).abs() <= tol
            }
            RelationDetail::Axis { axis } => match self.kind {
                RelationKind::Coaxial => axis.others().iter().all(|a| (gi.mid(*a) - gj.mid(*a)).abs() <= tol),
                _ => (gi.mid(axis) - gj.mid(axis)).abs() <= tol,
            },
        }
    }

    pub fn involves(&self, part: PartId) -> bool {
        self.i == part || self.j == part
    }

    pub fn other(&self, part: PartId) -> PartId {
        if self.i == part {
            self.j
        } else {
            self.i
        }
    }
}

pub fn distance_tolerance(config: &EngineConfig, bbox_diagonal: f64) -> f64 {
    config.relation_distance_tol * bbox_diagonal
}

fn face_sides(p: &Primitive) -> &'static [Side] {
    if p.kind == PrimitiveKind::Plane {
        &[Side::Lo]
    } else {
        &Side::BOTH
    }
}

fn coplanar(a: &Primitive, b: &Primitive, tol: f64) -> Option<RelationDetail> {
    let mut best: Option<(f64, RelationDetail)> = None;
    for axis in Axis::ALL {
        if !a.has_face(axis) || !b.has_face(axis) {
            continue;
        }
        for &side_i in face_sides(a) {
            for &side_j in face_sides(b) {
                let d = (a.face(axis, side_i) - b.face(axis, side_j)).abs();
                if d <= tol && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, RelationDetail::Faces { axis, side_i, side_j }));
                }
            }
        }
    }
    best.map(|(_, d)| d)
}

fn mids_match(a: &Primitive, b: &Primitive, axis: Axis, tol: f64) -> bool {
    (a.mid(axis) - b.mid(axis)).abs() <= tol
}

fn coaxial(a: &Primitive, b: &Primitive, tol: f64) -> Option<Axis> {
    let matching: Vec<Axis> = Axis::ALL
        .into_iter()
        .filter(|axis| axis.others().iter().all(|o| mids_match(a, b, *o, tol)))
        .collect();
    let preferred = [a.cyl_axis, b.cyl_axis].into_iter().flatten().find(|ax| matching.contains(ax));
    preferred.or_else(|| matching.first().copied())
}

/// A bisector plane that is not already implied by a coaxial centre line:
/// the mid-planes through a shared centre line coincide automatically.
fn bisector(a: &Primitive, b: &Primitive, line: Option<Axis>, tol: f64) -> Option<Axis> {
    Axis::ALL.into_iter().find(|axis| {
        mids_match(a, b, *axis, tol) && line.is_none_or(|l| !l.others().contains(axis))
    })
}

/// Detects at most one relation per unordered pair of non-custom
/// primitives, preferring a common bisector plane over a coaxial line over
/// coplanar faces.
pub fn detect_relations(primitives: &[Primitive], config: &EngineConfig, bbox_diagonal: f64) -> Vec<Relation> {
    let tol = distance_tolerance(config, bbox_diagonal);
    let mut sorted: Vec<&Primitive> = primitives.iter().filter(|p| p.kind != PrimitiveKind::Custom).collect();
    sorted.sort_by_key(|p| p.part_id);
    let mut out = Vec::new();
    for (n, a) in sorted.iter().enumerate() {
        for b in &sorted[n + 1..] {
            let line = coaxial(a, b, tol);
            let found = if let Some(axis) = bisector(a, b, line, tol) {
                Some((RelationKind::CommonBisectorPlane, RelationDetail::Axis { axis }))
            } else if let Some(axis) = line {
                Some((RelationKind::Coaxial, RelationDetail::Axis { axis }))
            } else {
                coplanar(a, b, tol).map(|d| (RelationKind::Coplanar, d))
            };
            if let Some((kind, detail)) = found {
                out.push(Relation {
                    id: out.len(),
                    i: a.part_id,
                    j: b.part_id,
                    kind,
                    detail,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geom::Interval;
    use crate::primitives::fit_all;

    fn cuboid(id: PartId, lo: [f64; 3], hi: [f64; 3]) -> Primitive {
        Primitive {
            part_id: id,
            kind: PrimitiveKind::Cuboid,
            intervals: [0, 1, 2].map(|k| Interval::new(lo[k], hi[k])),
            pyramid: None,
            cyl_axis: None,
            residue: 0.0,
            level: 0,
        }
    }

    #[test]
    fn flush_bottoms_are_coplanar() {
        let a = cuboid(0, [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let b = cuboid(1, [2.0, 0.0, 3.0], [2.5, 0.4, 3.7]);
        let rels = detect_relations(&[a, b], &EngineConfig::default(), 10.0);
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].kind, RelationKind::Coplanar);
        assert_eq!(
            rels[0].detail,
            RelationDetail::Faces {
                axis: Axis::Y,
                side_i: Side::Lo,
                side_j: Side::Lo
            }
        );
    }

    #[test]
    fn concentric_pair_reports_bisector_only() {
        let a = cuboid(0, [0.0, 0.0, 0.0], [2.0, 2.0, 2.0]);
        let b = cuboid(1, [0.5, 0.5, 0.5], [1.5, 1.5, 1.5]);
        let rels = detect_relations(&[b.clone(), a.clone()], &EngineConfig::default(), 10.0);
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].kind, RelationKind::CommonBisectorPlane);
        assert_eq!((rels[0].i, rels[0].j), (0, 1));
    }

    #[test]
    fn mixer_bowl_and_blade_are_coaxial() {
        let m = fixtures::mixer();
        let prims = fit_all(&m);
        let rels = detect_relations(&prims, &EngineConfig::default(), m.bbox_diagonal);
        let r = rels.iter().find(|r| (r.i, r.j) == (1, 2)).unwrap();
        assert_eq!(r.kind, RelationKind::Coaxial);
        assert_eq!(r.detail, RelationDetail::Axis { axis: Axis::Y });
        let kinds: std::collections::BTreeSet<_> = rels.iter().map(|r| r.kind).collect();
        assert_eq!(kinds.len(), 3, "{rels:?}");
    }

    #[test]
    fn perturbation_thresholds() {
        let diag = 10.0;
        let tol = 0.01 * diag;
        let a = cuboid(0, [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        for (shift, expect) in [(0.49 * tol, true), (2.01 * tol, false)] {
            let b = cuboid(1, [3.0, shift, 4.0], [3.6, 0.3 + shift, 4.9]);
            let rels = detect_relations(&[a.clone(), b], &EngineConfig::default(), diag);
            assert_eq!(rels.iter().any(|r| r.kind == RelationKind::Coplanar), expect, "shift {shift}");
        }
    }
}
