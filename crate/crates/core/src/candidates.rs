//! Candidate primitives: copies of each part's primitive whose axis
//! intervals snap to easy-to-construct features of other parts.
//!
//! Generation runs in stages. Level-1 candidates anchor on the fitted
//! originals; relation restoration adds counterparts that keep a related
//! part flush, coaxial or bisected with a moved candidate; a second pass
//! anchors on the cheapest level-1 candidates. Every stage is sorted
//! canonically before ids are handed out, so the result does not depend on
//! enumeration order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::geom::{Axis, Interval, Side};
use crate::primitives::{Dim, PartId, Primitive, PrimitiveKind, Section};
use crate::projective::{ExtendFactor, Recipe};
use crate::relations::{Relation, RelationDetail, RelationKind};

pub type CandId = u32;

/// Pyramid cap slots considered when completing a truncated pyramid.
const PYRAMID_OPTIONS: usize = 6;
/// Third-axis anchors kept per dimension when completing a plane.
const THIRD_AXIS_OPTIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnchorRatio {
    Half,
    Third,
    Quarter,
    ExtendHalf,
    ExtendOne,
    ExtendTwo,
    Align,
}

impl AnchorRatio {
    pub const ALL: [AnchorRatio; 7] = [
        AnchorRatio::Half,
        AnchorRatio::Third,
        AnchorRatio::Quarter,
        AnchorRatio::ExtendHalf,
        AnchorRatio::ExtendOne,
        AnchorRatio::ExtendTwo,
        AnchorRatio::Align,
    ];

    /// Number of lines a novice draws for the recipe. Must equal the line
    /// count of [`crate::projective::construct`] for [`Self::recipe`].
    pub const fn guide_count(self) -> usize {
        match self {
            AnchorRatio::Half => 3,
            AnchorRatio::Third => 6,
            AnchorRatio::Quarter => 6,
            AnchorRatio::ExtendHalf => 9,
            AnchorRatio::ExtendOne => 7,
            AnchorRatio::ExtendTwo => 11,
            AnchorRatio::Align => 1,
        }
    }

    pub fn recipe(self) -> Recipe {
        match self {
            AnchorRatio::Half => Recipe::Half,
            AnchorRatio::Third => Recipe::Third,
            AnchorRatio::Quarter => Recipe::Quarter,
            AnchorRatio::ExtendHalf => Recipe::Extend(ExtendFactor::Half),
            AnchorRatio::ExtendOne => Recipe::Extend(ExtendFactor::One),
            AnchorRatio::ExtendTwo => Recipe::Extend(ExtendFactor::Two),
            AnchorRatio::Align => Recipe::Align,
        }
    }
}

/// A feature line of a parent along one of its dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    LoEdge,
    HiEdge,
    HalfLine,
    ThirdLine,
    TwoThirdLine,
    QuarterLine,
    ThreeQuarterLine,
    /// Reflection of the face beyond `side`, scaled by `factor`.
    ExtendReflection { factor: ExtendFactor, side: Side },
}

impl Feature {
    pub const ALL: [Feature; 13] = [
        Feature::LoEdge,
        Feature::HiEdge,
        Feature::HalfLine,
        Feature::ThirdLine,
        Feature::TwoThirdLine,
        Feature::QuarterLine,
        Feature::ThreeQuarterLine,
        Feature::ExtendReflection { factor: ExtendFactor::Half, side: Side::Lo },
        Feature::ExtendReflection { factor: ExtendFactor::Half, side: Side::Hi },
        Feature::ExtendReflection { factor: ExtendFactor::One, side: Side::Lo },
        Feature::ExtendReflection { factor: ExtendFactor::One, side: Side::Hi },
        Feature::ExtendReflection { factor: ExtendFactor::Two, side: Side::Lo },
        Feature::ExtendReflection { factor: ExtendFactor::Two, side: Side::Hi },
    ];

    pub fn ratio(self) -> AnchorRatio {
        match self {
            Feature::LoEdge | Feature::HiEdge => AnchorRatio::Align,
            Feature::HalfLine => AnchorRatio::Half,
            Feature::ThirdLine | Feature::TwoThirdLine => AnchorRatio::Third,
            Feature::QuarterLine | Feature::ThreeQuarterLine => AnchorRatio::Quarter,
            Feature::ExtendReflection { factor, .. } => match factor {
                ExtendFactor::Half => AnchorRatio::ExtendHalf,
                ExtendFactor::One => AnchorRatio::ExtendOne,
                ExtendFactor::Two => AnchorRatio::ExtendTwo,
            },
        }
    }

    /// Coordinate of the feature on a parent interval.
    pub fn position(self, iv: Interval) -> f64 {
        let l = iv.len();
        match self {
            Feature::LoEdge => iv.lo,
            Feature::HiEdge => iv.hi,
            Feature::HalfLine => iv.mid(),
            Feature::ThirdLine => iv.lo + l / 3.0,
            Feature::TwoThirdLine => iv.hi - l / 3.0,
            Feature::QuarterLine => iv.lo + l / 4.0,
            Feature::ThreeQuarterLine => iv.hi - l / 4.0,
            Feature::ExtendReflection { factor, side } => match side {
                Side::Lo => iv.lo - factor.value() * l,
                Side::Hi => iv.hi + factor.value() * l,
            },
        }
    }

    /// Recipe and the face end it is measured from.
    pub fn recipe(self) -> (Recipe, Side) {
        let from = match self {
            Feature::HiEdge | Feature::TwoThirdLine | Feature::ThreeQuarterLine => Side::Hi,
            Feature::ExtendReflection { side: Side::Lo, .. } => Side::Hi,
            _ => Side::Lo,
        };
        (self.ratio().recipe(), from)
    }

    pub fn describe(self) -> &'static str {
        match self {
            Feature::LoEdge | Feature::HiEdge => "align with the edge",
            Feature::HalfLine => "divide the face in half",
            Feature::ThirdLine | Feature::TwoThirdLine => "divide the face into thirds",
            Feature::QuarterLine | Feature::ThreeQuarterLine => "divide the face into quarters",
            Feature::ExtendReflection { factor, .. } => match factor {
                ExtendFactor::Half => "extend the face by half its length",
                ExtendFactor::One => "extend the face by its own length",
                ExtendFactor::Two => "extend the face by twice its length",
            },
        }
    }
}

/// Face of a parent that hosts a construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HostFace {
    pub normal: Axis,
    pub side: Side,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureRef {
    pub parent: CandId,
    pub parent_part: PartId,
    /// Parent dimension the feature lies on.
    pub dim: Dim,
    pub feature: Feature,
    pub host: HostFace,
}

impl FeatureRef {
    pub fn ratio(&self) -> AnchorRatio {
        self.feature.ratio()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pin {
    Lo,
    Hi,
    Mid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Placement {
    Unguided,
    /// Ends snapped to features; `None` keeps the original coordinate.
    Edges { lo: Option<FeatureRef>, hi: Option<FeatureRef> },
    /// Rigid shift so the pinned point lands on the feature.
    Translate { by: FeatureRef, pin: Pin },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AxisAnchor {
    pub dim: Dim,
    pub placement: Placement,
}

impl AxisAnchor {
    pub fn unguided(dim: Dim) -> AxisAnchor {
        AxisAnchor {
            dim,
            placement: Placement::Unguided,
        }
    }

    pub fn is_guided(&self) -> bool {
        self.placement != Placement::Unguided
    }

    pub fn refs(&self) -> Vec<FeatureRef> {
        match self.placement {
            Placement::Unguided => Vec::new(),
            Placement::Edges { lo, hi } => lo.into_iter().chain(hi).collect(),
            Placement::Translate { by, .. } => vec![by],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandId,
    pub part_id: PartId,
    pub geometry: Primitive,
    pub anchors: Vec<AxisAnchor>,
    pub parents: Vec<CandId>,
    pub level: u8,
    pub e_d: f64,
    pub e_e: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub restored_relations: Vec<usize>,
}

impl Candidate {
    pub fn cost(&self) -> f64 {
        self.e_d + self.e_e
    }

    /// Distinct feature references, in anchor order.
    pub fn feature_refs(&self) -> Vec<FeatureRef> {
        let mut seen = BTreeSet::new();
        self.anchors
            .iter()
            .flat_map(AxisAnchor::refs)
            .filter(|r| seen.insert(*r))
            .collect()
    }

    pub fn is_original(&self) -> bool {
        self.level == 0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("part {part}: zero-length axis {axis} changed")]
    Degenerate { part: PartId, axis: Axis },
}

/// Deviation cost: per guided dimension, length change plus midpoint
/// shift, both over the original length; each unguided dimension costs the
/// configured penalty. Pyramid rectangles count half per section so a
/// transverse axis weighs the same as any other axis.
pub fn cost_e_d(
    geometry: &Primitive,
    original: &Primitive,
    anchors: &[AxisAnchor],
    config: &EngineConfig,
) -> Result<f64, CostError> {
    let mut total = 0.0;
    for a in anchors {
        let weight = if a.dim.section == Section::Whole { 1.0 } else { 0.5 };
        let term = if a.is_guided() {
            let before = original.dim_interval(a.dim);
            let after = geometry.dim_interval(a.dim);
            let l0 = before.len();
            if l0 == 0.0 {
                if after != before {
                    return Err(CostError::Degenerate {
                        part: original.part_id,
                        axis: a.dim.axis,
                    });
                }
                0.0
            } else {
                ((after.len() - l0).abs() + (after.mid() - before.mid()).abs()) / l0
            }
        } else {
            config.unguided_axis_penalty
        };
        total += weight * term;
    }
    Ok(total)
}

/// Difficulty cost: weighted guide counts, each scaled by how much smaller
/// the host face is than the model's largest face. Degenerate host faces
/// cost infinity.
pub fn cost_e_e(
    refs: &[FeatureRef],
    host_area: impl Fn(&FeatureRef) -> f64,
    model_max_face_area: f64,
    bbox_diagonal: f64,
    config: &EngineConfig,
) -> f64 {
    let floor = 1e-12 * bbox_diagonal * bbox_diagonal;
    let mut total = 0.0;
    for r in refs {
        let area = host_area(r);
        if !(area > floor) {
            return f64::INFINITY;
        }
        total += r.ratio().guide_count() as f64 * model_max_face_area / area;
    }
    config.difficulty_weight * total
}

/// Area of the face of `parent` hosting a construction.
pub fn host_face_area(parent: &Primitive, host: HostFace) -> f64 {
    match &parent.pyramid {
        Some(p) if p.axis == host.normal => {
            let rect = p.rect(if host.side == Side::Lo { Section::Bottom } else { Section::Top });
            rect[0].len() * rect[1].len()
        }
        Some(p) => {
            let h = parent.interval(p.axis).len();
            let across = host.normal.others().into_iter().find(|a| *a != p.axis).unwrap();
            let k = if p.axis.others()[0] == across { 0 } else { 1 };
            0.5 * (p.bottom[k].len() + p.top[k].len()) * h
        }
        None => parent.face_area(host.normal),
    }
}

/// Intervals of the host face of `parent`, with pyramid caps replaced by
/// their rectangles.
pub fn host_face_ranges(parent: &Primitive, host: HostFace) -> [Interval; 3] {
    let mut ranges = parent.intervals;
    if let Some(p) = &parent.pyramid {
        if p.axis == host.normal {
            let rect = p.rect(if host.side == Side::Lo { Section::Bottom } else { Section::Top });
            let [a, b] = p.axis.others();
            ranges[a.index()] = rect[0];
            ranges[b.index()] = rect[1];
        }
    }
    ranges
}

/// Parent dimension carrying features on `axis` within `host`.
fn parent_dim(parent: &Primitive, host: HostFace, axis: Axis) -> Option<Dim> {
    match &parent.pyramid {
        Some(p) if p.axis == host.normal => Some(Dim {
            axis,
            section: if host.side == Side::Lo { Section::Bottom } else { Section::Top },
        }),
        // A slanted side only offers features along the height.
        Some(p) if axis != p.axis => None,
        _ => Some(Dim::whole(axis)),
    }
}

fn within_prune(before: Interval, after: Interval, p: f64) -> bool {
    let l0 = before.len();
    l0 > 0.0
        && after.lo <= after.hi
        && (after.len() - l0).abs() / l0 <= p
        && (after.mid() - before.mid()).abs() / l0 <= p
}

/// Interval produced by an anchor on the child's original interval.
pub fn apply_placement(placement: &Placement, original: Interval, feature_pos: impl Fn(&FeatureRef) -> f64) -> Interval {
    match placement {
        Placement::Unguided => original,
        Placement::Edges { lo, hi } => Interval::new(
            lo.as_ref().map_or(original.lo, &feature_pos),
            hi.as_ref().map_or(original.hi, &feature_pos),
        ),
        Placement::Translate { by, pin } => {
            let target = feature_pos(by);
            let current = match pin {
                Pin::Lo => original.lo,
                Pin::Hi => original.hi,
                Pin::Mid => original.mid(),
            };
            original.translate(target - current)
        }
    }
}

/// All `(lo, hi)` feature pairs of `parent` on `parent_dim` that move the
/// child's `child_dim` by at most the prune fraction, with either side
/// possibly unguided.
pub fn generate_axis_anchors(
    child: &Primitive,
    child_dim: Dim,
    parent: &Candidate,
    parent_dim: Dim,
    host: HostFace,
    config: &EngineConfig,
) -> Vec<(AxisAnchor, Interval)> {
    let before = child.dim_interval(child_dim);
    let piv = parent.geometry.dim_interval(parent_dim);
    if before.len() <= 0.0 || piv.len() <= 0.0 || parent.part_id == child.part_id {
        return Vec::new();
    }
    let refs: Vec<(FeatureRef, f64)> = Feature::ALL
        .into_iter()
        .filter(|f| config.allows(f.ratio()))
        .map(|feature| {
            (
                FeatureRef {
                    parent: parent.id,
                    parent_part: parent.part_id,
                    dim: parent_dim,
                    feature,
                    host,
                },
                feature.position(piv),
            )
        })
        .collect();
    let options: Vec<Option<&(FeatureRef, f64)>> = std::iter::once(None).chain(refs.iter().map(Some)).collect();
    let mut out = Vec::new();
    for lo in &options {
        for hi in &options {
            if lo.is_none() && hi.is_none() {
                continue;
            }
            let after = Interval::new(lo.map_or(before.lo, |r| r.1), hi.map_or(before.hi, |r| r.1));
            if !within_prune(before, after, config.prune_fraction) {
                continue;
            }
            let anchor = AxisAnchor {
                dim: child_dim,
                placement: Placement::Edges {
                    lo: lo.map(|r| r.0),
                    hi: hi.map(|r| r.0),
                },
            };
            out.push((anchor, after));
        }
    }
    out
}

/// Partially assembled candidate: anchors on some of the child's dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePlane {
    pub child_part: PartId,
    pub parent: CandId,
    pub normal: Axis,
    pub section: Section,
    pub anchors: Vec<(AxisAnchor, Interval)>,
}

fn nearest_side(parent: &Primitive, normal: Axis, toward: f64) -> Side {
    let lo = (parent.face(normal, Side::Lo) - toward).abs();
    let hi = (parent.face(normal, Side::Hi) - toward).abs();
    if hi < lo {
        Side::Hi
    } else {
        Side::Lo
    }
}

/// Planes anchoring `child` on `parent`: for each face normal the two share,
/// every combination of in-plane axis anchors (at least one guided).
pub fn generate_candidate_planes(child: &Primitive, parent: &Candidate, config: &EngineConfig) -> Vec<CandidatePlane> {
    if child.kind == PrimitiveKind::Custom || parent.geometry.kind == PrimitiveKind::Custom || child.part_id == parent.part_id {
        return Vec::new();
    }
    let pg = &parent.geometry;
    let mut out = Vec::new();
    for normal in Axis::ALL {
        if !child.has_face(normal) || !pg.has_face(normal) {
            continue;
        }
        let host = HostFace {
            normal,
            side: nearest_side(pg, normal, child.mid(normal)),
        };
        let sections: &[Section] = match &child.pyramid {
            Some(p) if p.axis == normal => &[Section::Bottom, Section::Top],
            _ => &[Section::Whole],
        };
        for &section in sections {
            let mut per_dim: Vec<Vec<Option<(AxisAnchor, Interval)>>> = Vec::new();
            for axis in normal.others() {
                let child_dim = match &child.pyramid {
                    Some(p) if p.axis == normal => Dim { axis, section },
                    // Slanted pyramid sides only anchor the height.
                    Some(p) if axis != p.axis => continue,
                    _ => Dim::whole(axis),
                };
                let mut opts: Vec<Option<(AxisAnchor, Interval)>> = vec![None];
                if let Some(pd) = parent_dim(pg, host, axis) {
                    opts.extend(generate_axis_anchors(child, child_dim, parent, pd, host, config).into_iter().map(Some));
                }
                per_dim.push(opts);
            }
            for combo in cartesian(&per_dim) {
                let anchors: Vec<(AxisAnchor, Interval)> = combo.into_iter().flatten().collect();
                if anchors.is_empty() {
                    continue;
                }
                out.push(CandidatePlane {
                    child_part: child.part_id,
                    parent: parent.id,
                    normal,
                    section,
                    anchors,
                });
            }
        }
    }
    out
}

fn cartesian<T: Clone>(lists: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut acc: Vec<Vec<T>> = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(acc.len() * list.len());
        for prefix in &acc {
            for item in list {
                let mut v = prefix.clone();
                v.push(item.clone());
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

/// Working record before ids are assigned.
#[derive(Clone, Debug)]
struct Draft {
    part: PartId,
    geometry: Primitive,
    anchors: Vec<AxisAnchor>,
    parents: Vec<CandId>,
    level: u8,
    e_d: f64,
    e_e: f64,
    restored: Vec<usize>,
}

/// Generated candidates plus bookkeeping needed downstream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    /// Largest face area over the original primitives (cost normalizer).
    pub model_max_face_area: f64,
}

impl CandidateSet {
    pub fn get(&self, id: CandId) -> &Candidate {
        &self.candidates[id as usize]
    }

    pub fn per_part(&self) -> BTreeMap<PartId, Vec<CandId>> {
        let mut m: BTreeMap<PartId, Vec<CandId>> = BTreeMap::new();
        for c in &self.candidates {
            m.entry(c.part_id).or_default().push(c.id);
        }
        m
    }

    pub fn original(&self, part: PartId) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.part_id == part && c.level == 0)
    }
}

struct Generator<'a> {
    originals: BTreeMap<PartId, &'a Primitive>,
    config: &'a EngineConfig,
    diag: f64,
    max_face: f64,
    quantum: f64,
}

impl<'a> Generator<'a> {
    fn geometry_key(&self, g: &Primitive) -> Vec<i64> {
        let q = |v: f64| (v / self.quantum).round() as i64;
        let mut key: Vec<i64> = g.intervals.iter().flat_map(|iv| [q(iv.lo), q(iv.hi)]).collect();
        if let Some(p) = &g.pyramid {
            for iv in p.bottom.iter().chain(p.top.iter()) {
                key.push(q(iv.lo));
                key.push(q(iv.hi));
            }
        }
        key
    }

    fn finish(&self, part: PartId, geometry: Primitive, anchors: Vec<AxisAnchor>, level: u8, pool: &Pool, restored: Vec<usize>) -> Option<Draft> {
        let original = self.originals[&part];
        let refs = {
            let mut seen = BTreeSet::new();
            anchors.iter().flat_map(AxisAnchor::refs).filter(|r| seen.insert(*r)).collect::<Vec<_>>()
        };
        let parents: Vec<CandId> = refs.iter().map(|r| r.parent).collect::<BTreeSet<_>>().into_iter().collect();
        if !pool.consistent(part, &parents) {
            return None;
        }
        let e_d = cost_e_d(&geometry, original, &anchors, self.config).ok()?;
        let e_e = cost_e_e(
            &refs,
            |r| host_face_area(&pool.get(r.parent).geometry, r.host),
            self.max_face,
            self.diag,
            self.config,
        );
        if !e_e.is_finite() {
            return None;
        }
        Some(Draft {
            part,
            geometry,
            anchors,
            parents,
            level,
            e_d,
            e_e,
            restored,
        })
    }

    /// Canonical order, duplicate removal (cheapest first), then id
    /// assignment from `next_id`.
    fn commit(&self, mut drafts: Vec<Draft>, next_id: CandId) -> Vec<Candidate> {
        let mut keyed: Vec<(Vec<i64>, Draft)> = drafts.drain(..).map(|d| (self.geometry_key(&d.geometry), d)).collect();
        keyed.sort_by(|(ka, a), (kb, b)| {
            (a.part, a.level, ka, &a.parents)
                .cmp(&(b.part, b.level, kb, &b.parents))
                .then((a.e_d + a.e_e).total_cmp(&(b.e_d + b.e_e)))
                .then(a.e_e.total_cmp(&b.e_e))
                .then(a.anchors.cmp(&b.anchors))
                .then(a.restored.cmp(&b.restored))
        });
        keyed.dedup_by(|(kb, b), (ka, a)| a.part == b.part && a.level == b.level && ka == kb && a.parents == b.parents);
        keyed
            .into_iter()
            .enumerate()
            .map(|(n, (_, d))| Candidate {
                id: next_id + n as CandId,
                part_id: d.part,
                geometry: d.geometry,
                anchors: d.anchors,
                parents: d.parents,
                level: d.level,
                e_d: d.e_d,
                e_e: d.e_e,
                restored_relations: d.restored,
            })
            .collect()
    }

    /// Candidates anchored on `parents`. With `same_parent_height`, the
    /// completing axis must come from the plane's own parent.
    fn anchored(&self, pool: &Pool, parents: &[CandId], level: u8, same_parent_height: bool) -> Vec<Draft> {
        let mut drafts = Vec::new();
        for (&part, child) in &self.originals {
            let mut planes = Vec::new();
            for &pid in parents {
                planes.extend(generate_candidate_planes(child, pool.get(pid), self.config));
            }
            // Anchors per child dimension gathered from every plane.
            let mut dim_pool: BTreeMap<Dim, Vec<(CandId, AxisAnchor, Interval)>> = BTreeMap::new();
            for pl in &planes {
                for (a, iv) in &pl.anchors {
                    dim_pool.entry(a.dim).or_default().push((pl.parent, *a, *iv));
                }
            }
            for list in dim_pool.values_mut() {
                list.sort_by(|x, y| {
                    let cx = partial_cost(child.dim_interval(x.1.dim), x.2);
                    let cy = partial_cost(child.dim_interval(y.1.dim), y.2);
                    cx.total_cmp(&cy).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1))
                });
                list.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);
            }
            let options_for = |dim: Dim, parent: Option<CandId>| -> Vec<Option<(AxisAnchor, Interval)>> {
                let mut v = vec![None];
                if let Some(list) = dim_pool.get(&dim) {
                    v.extend(
                        list.iter()
                            .filter(|(p, _, _)| !same_parent_height || parent.is_none_or(|q| *p == q))
                            .take(THIRD_AXIS_OPTIONS)
                            .map(|(_, a, iv)| Some((*a, *iv))),
                    );
                }
                v
            };
            match child.kind {
                PrimitiveKind::Custom => {}
                PrimitiveKind::Plane => {
                    for pl in &planes {
                        let mut anchors = Vec::new();
                        let mut g = (*child).clone();
                        for dim in child.dims() {
                            match pl.anchors.iter().find(|(a, _)| a.dim == dim) {
                                Some((a, iv)) => {
                                    g = g.with_dim_interval(dim, *iv);
                                    anchors.push(*a);
                                }
                                None => anchors.push(AxisAnchor::unguided(dim)),
                            }
                        }
                        drafts.extend(self.finish(part, with_level(g, level), anchors, level, pool, Vec::new()));
                    }
                }
                PrimitiveKind::Cuboid | PrimitiveKind::Cylinder => {
                    for pl in &planes {
                        for third in options_for(Dim::whole(pl.normal), Some(pl.parent)) {
                            let mut chosen: Vec<(AxisAnchor, Interval)> = pl.anchors.clone();
                            chosen.extend(third);
                            drafts.extend(self.assemble(pool, part, child, &chosen, level));
                        }
                    }
                }
                PrimitiveKind::TruncatedPyramid => {
                    let h = child.pyramid.as_ref().unwrap().axis;
                    let mut caps: BTreeMap<Section, Vec<(CandId, Vec<(AxisAnchor, Interval)>)>> = BTreeMap::new();
                    for pl in planes.iter().filter(|pl| pl.normal == h) {
                        caps.entry(pl.section).or_default().push((pl.parent, pl.anchors.clone()));
                    }
                    for list in caps.values_mut() {
                        list.sort_by(|x, y| {
                            let cost = |anchors: &[(AxisAnchor, Interval)]| -> f64 {
                                anchors.iter().map(|(a, iv)| partial_cost(child.dim_interval(a.dim), *iv)).sum::<f64>()
                                    - anchors.len() as f64 * self.config.unguided_axis_penalty
                            };
                            cost(&x.1).total_cmp(&cost(&y.1)).then(x.0.cmp(&y.0)).then(x.1.iter().map(|a| a.0).cmp(y.1.iter().map(|a| a.0)))
                        });
                        list.truncate(PYRAMID_OPTIONS);
                    }
                    let cap_options = |s: Section| -> Vec<Option<(CandId, Vec<(AxisAnchor, Interval)>)>> {
                        std::iter::once(None).chain(caps.get(&s).into_iter().flatten().cloned().map(Some)).collect()
                    };
                    for bottom in cap_options(Section::Bottom) {
                        for top in cap_options(Section::Top) {
                            let parent = bottom.as_ref().or(top.as_ref()).map(|x| x.0);
                            let heights = options_for(Dim::whole(h), parent);
                            for height in heights {
                                if same_parent_height {
                                    let ps: BTreeSet<CandId> = [bottom.as_ref().map(|x| x.0), top.as_ref().map(|x| x.0)].into_iter().flatten().collect();
                                    if ps.len() > 1 {
                                        continue;
                                    }
                                }
                                let mut chosen: Vec<(AxisAnchor, Interval)> = Vec::new();
                                chosen.extend(bottom.iter().flat_map(|x| x.1.clone()));
                                chosen.extend(top.iter().flat_map(|x| x.1.clone()));
                                chosen.extend(height);
                                if !chosen.is_empty() {
                                    drafts.extend(self.assemble(pool, part, child, &chosen, level));
                                }
                            }
                        }
                    }
                }
            }
        }
        drafts
    }

    fn assemble(&self, pool: &Pool, part: PartId, child: &Primitive, chosen: &[(AxisAnchor, Interval)], level: u8) -> Option<Draft> {
        let mut g = child.clone();
        let mut anchors = Vec::new();
        for dim in child.dims() {
            match chosen.iter().find(|(a, _)| a.dim == dim) {
                Some((a, iv)) => {
                    g = g.with_dim_interval(dim, *iv);
                    anchors.push(*a);
                }
                None => anchors.push(AxisAnchor::unguided(dim)),
            }
        }
        self.finish(part, with_level(g, level), anchors, level, pool, Vec::new())
    }

    /// Counterparts of related parts that follow each level-1 candidate.
    fn restorations(&self, pool: &Pool, relations: &[Relation], level1: &[CandId]) -> Vec<Draft> {
        let mut drafts = Vec::new();
        for r in relations {
            for &cid in level1 {
                let c = pool.get(cid);
                if !r.involves(c.part_id) {
                    continue;
                }
                let other = r.other(c.part_id);
                let Some(orig) = self.originals.get(&other) else { continue };
                if pool.ancestor_parts(cid).contains(&other) {
                    continue;
                }
                if let Some(d) = self.restore_one(pool, r, c, orig) {
                    drafts.push(d);
                }
            }
        }
        drafts
    }

    fn restore_one(&self, pool: &Pool, r: &Relation, c: &Candidate, orig: &Primitive) -> Option<Draft> {
        let cg = &c.geometry;
        // (axis moved, feature of c, pin on the counterpart)
        let moves: Vec<(Axis, Feature, Pin)> = match (r.kind, r.detail) {
            (RelationKind::Coplanar, RelationDetail::Faces { axis, side_i, side_j }) => {
                let (sc, so) = if c.part_id == r.i { (side_i, side_j) } else { (side_j, side_i) };
                let feature = if sc == Side::Lo { Feature::LoEdge } else { Feature::HiEdge };
                let pin = if so == Side::Lo { Pin::Lo } else { Pin::Hi };
                vec![(axis, feature, pin)]
            }
            (RelationKind::Coaxial, RelationDetail::Axis { axis }) => {
                axis.others().into_iter().map(|t| (t, Feature::HalfLine, Pin::Mid)).collect()
            }
            (_, RelationDetail::Axis { axis }) => vec![(axis, Feature::HalfLine, Pin::Mid)],
            _ => return None,
        };
        let mut g = orig.clone();
        let mut guided: BTreeMap<Dim, Placement> = BTreeMap::new();
        for (axis, feature, pin) in moves {
            let civ = cg.interval(axis);
            let oiv = orig.interval(axis);
            if civ.len() <= 0.0 || oiv.len() <= 0.0 {
                return None;
            }
            // Host: a face of c containing the feature line.
            let normal = axis.others().into_iter().find(|n| cg.has_face(*n))?;
            let host = HostFace {
                normal,
                side: nearest_side(cg, normal, orig.mid(normal)),
            };
            let fref = FeatureRef {
                parent: c.id,
                parent_part: c.part_id,
                dim: Dim::whole(axis),
                feature,
                host,
            };
            let placement = Placement::Translate { by: fref, pin };
            let moved = apply_placement(&placement, oiv, |f| f.feature.position(civ));
            if (moved.mid() - oiv.mid()).abs() / oiv.len() > self.config.prune_fraction {
                return None;
            }
            g = g.translated(axis, moved.lo - oiv.lo);
            for dim in orig.dims().into_iter().filter(|d| d.axis == axis) {
                guided.insert(dim, placement);
            }
            if !orig.dims().iter().any(|d| d.axis == axis) {
                return None;
            }
        }
        let anchors: Vec<AxisAnchor> = orig
            .dims()
            .into_iter()
            .map(|dim| AxisAnchor {
                dim,
                placement: guided.get(&dim).copied().unwrap_or(Placement::Unguided),
            })
            .collect();
        let level = c.level + 1;
        self.finish(orig.part_id, with_level(g, level), anchors, level, pool, vec![r.id])
    }
}

fn with_level(mut g: Primitive, level: u8) -> Primitive {
    g.level = level;
    g
}

/// Deviation of one dimension relative to its unguided penalty-free
/// baseline; used only to rank partial options.
fn partial_cost(before: Interval, after: Interval) -> f64 {
    let l0 = before.len();
    if l0 <= 0.0 {
        return 0.0;
    }
    ((after.len() - l0).abs() + (after.mid() - before.mid()).abs()) / l0
}

/// Committed candidates with ancestry lookups.
struct Pool {
    cands: Vec<Candidate>,
    ancestors: HashMap<CandId, BTreeMap<PartId, CandId>>,
}

impl Pool {
    fn get(&self, id: CandId) -> &Candidate {
        &self.cands[id as usize]
    }

    fn push_all(&mut self, cands: Vec<Candidate>) {
        for c in cands {
            assert_eq!(c.id as usize, self.cands.len());
            let mut anc: BTreeMap<PartId, CandId> = BTreeMap::new();
            anc.insert(c.part_id, c.id);
            for p in &c.parents {
                for (part, id) in &self.ancestors[p] {
                    anc.insert(*part, *id);
                }
            }
            self.ancestors.insert(c.id, anc);
            self.cands.push(c);
        }
    }

    fn ancestor_parts(&self, id: CandId) -> BTreeSet<PartId> {
        self.ancestors[&id].keys().copied().collect()
    }

    /// The union of the parents' ancestries uses at most one candidate per
    /// part and does not include `part` itself.
    fn consistent(&self, part: PartId, parents: &[CandId]) -> bool {
        let mut seen: BTreeMap<PartId, CandId> = BTreeMap::new();
        for p in parents {
            for (q, id) in &self.ancestors[p] {
                if *q == part {
                    return false;
                }
                if let Some(prev) = seen.insert(*q, *id) {
                    if prev != *id {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Keeps at most `cap` candidates per part among `ids` (cheapest first,
/// originals always kept).
fn cap_per_part(cands: &[Candidate], cap: usize) -> BTreeSet<CandId> {
    let mut by_part: BTreeMap<PartId, Vec<&Candidate>> = BTreeMap::new();
    for c in cands {
        by_part.entry(c.part_id).or_default().push(c);
    }
    let mut keep = BTreeSet::new();
    for (_, mut list) in by_part {
        list.sort_by(|a, b| b.is_original().cmp(&a.is_original()).then(a.cost().total_cmp(&b.cost())).then(a.id.cmp(&b.id)));
        for c in list.into_iter().take(cap.max(1)) {
            keep.insert(c.id);
        }
    }
    keep
}

/// Full candidate generation for all non-custom primitives.
pub fn generate_candidates(
    primitives: &[Primitive],
    relations: &[Relation],
    config: &EngineConfig,
    bbox_diagonal: f64,
) -> CandidateSet {
    let originals: BTreeMap<PartId, &Primitive> = primitives
        .iter()
        .filter(|p| p.kind != PrimitiveKind::Custom)
        .map(|p| (p.part_id, p))
        .collect();
    let max_face = originals.values().map(|p| p.max_face_area()).fold(0.0, f64::max);
    let gen = Generator {
        originals,
        config,
        diag: bbox_diagonal,
        max_face,
        quantum: 1e-9 * bbox_diagonal.max(f64::MIN_POSITIVE),
    };
    let mut pool = Pool {
        cands: Vec::new(),
        ancestors: HashMap::new(),
    };

    let level0: Vec<Draft> = gen
        .originals
        .iter()
        .filter_map(|(&part, p)| {
            let anchors = p.dims().into_iter().map(AxisAnchor::unguided).collect();
            gen.finish(part, with_level((*p).clone(), 0), anchors, 0, &pool, Vec::new())
        })
        .collect();
    pool.push_all(gen.commit(level0, 0));
    let originals_ids: Vec<CandId> = pool.cands.iter().map(|c| c.id).collect();

    // Stage i: anchors on originals.
    let level1 = gen.anchored(&pool, &originals_ids, 1, false);
    let level1 = gen.commit(level1, pool.cands.len() as CandId);
    let keep = cap_per_part(&level1, config.candidate_cap);
    let level1: Vec<Candidate> = level1.into_iter().filter(|c| keep.contains(&c.id)).collect();
    let level1 = renumber_from(level1, pool.cands.len() as CandId, &BTreeMap::new());
    pool.push_all(level1);
    let level1_ids: Vec<CandId> = pool.cands.iter().filter(|c| c.level == 1).map(|c| c.id).collect();

    // Stages ii and iii: restoration counterparts and second-level anchors.
    let mut second = gen.restorations(&pool, relations, &level1_ids);
    let mut parents2: Vec<CandId> = Vec::new();
    let mut by_part: BTreeMap<PartId, Vec<&Candidate>> = BTreeMap::new();
    for id in &level1_ids {
        let c = pool.get(*id);
        by_part.entry(c.part_id).or_default().push(c);
    }
    for list in by_part.values_mut() {
        list.sort_by(|a, b| a.cost().total_cmp(&b.cost()).then(a.id.cmp(&b.id)));
        parents2.extend(list.iter().take(config.second_level_parents).map(|c| c.id));
    }
    parents2.sort_unstable();
    second.extend(gen.anchored(&pool, &parents2, 2, true));
    let second = gen.commit(second, pool.cands.len() as CandId);

    // Per-part cap over everything, then drop orphans.
    let mut all: Vec<Candidate> = pool.cands.clone();
    all.extend(second);
    let mut keep = cap_per_part(&all, config.candidate_cap);
    loop {
        let before = keep.len();
        keep = keep
            .iter()
            .copied()
            .filter(|id| all[*id as usize].parents.iter().all(|p| keep.contains(p)))
            .collect();
        if keep.len() == before {
            break;
        }
    }
    let kept: Vec<Candidate> = all.into_iter().filter(|c| keep.contains(&c.id)).collect();
    CandidateSet {
        candidates: renumber_from(kept, 0, &BTreeMap::new()),
        model_max_face_area: max_face,
    }
}

/// Dense renumbering from `start`, rewriting parent references. Ids not
/// present in `cands` are looked up in `outside` (or kept as is).
fn renumber_from(cands: Vec<Candidate>, start: CandId, outside: &BTreeMap<CandId, CandId>) -> Vec<Candidate> {
    let mut map: BTreeMap<CandId, CandId> = outside.clone();
    for (n, c) in cands.iter().enumerate() {
        map.insert(c.id, start + n as CandId);
    }
    let remap = |id: CandId| *map.get(&id).unwrap_or(&id);
    cands
        .into_iter()
        .map(|mut c| {
            c.id = remap(c.id);
            c.parents = c.parents.iter().map(|p| remap(*p)).collect();
            c.parents.sort_unstable();
            for a in &mut c.anchors {
                match &mut a.placement {
                    Placement::Unguided => {}
                    Placement::Edges { lo, hi } => {
                        for r in [lo, hi].into_iter().flatten() {
                            r.parent = remap(r.parent);
                        }
                    }
                    Placement::Translate { by, .. } => by.parent = remap(by.parent),
                }
            }
            c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::primitives::fit_all;
    use crate::projective::{construct, point};
    use crate::relations::detect_relations;

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

    fn original(id: CandId, p: Primitive) -> Candidate {
        let anchors = p.dims().into_iter().map(AxisAnchor::unguided).collect();
        Candidate {
            id,
            part_id: p.part_id,
            geometry: p,
            anchors,
            parents: vec![],
            level: 0,
            e_d: 6.0,
            e_e: 0.0,
            restored_relations: vec![],
        }
    }

    #[test]
    fn guide_counts_match_recipe_line_counts() {
        let sq = [point(0.0, 0.0), point(1.0, 0.0), point(1.0, 1.0), point(0.0, 1.0)];
        for r in AnchorRatio::ALL {
            assert_eq!(construct(r.recipe(), &sq).unwrap().lines.len(), r.guide_count(), "{r:?}");
        }
    }

    #[test]
    fn feature_positions() {
        let iv = Interval::new(0.0, 1.0);
        assert_eq!(Feature::TwoThirdLine.position(iv), 1.0 - 1.0 / 3.0);
        assert_eq!(Feature::ExtendReflection { factor: ExtendFactor::Half, side: Side::Hi }.position(iv), 1.5);
        assert_eq!(Feature::ExtendReflection { factor: ExtendFactor::Two, side: Side::Lo }.position(iv), -2.0);
    }

    fn anchors_on_x(child_x: [f64; 2]) -> Vec<(AxisAnchor, Interval)> {
        let child = cuboid(0, [child_x[0], 0.0, 0.0], [child_x[1], 1.0, 1.0]);
        let parent = original(7, cuboid(1, [0.0, -1.0, 0.0], [1.0, 0.0, 1.0]));
        let host = HostFace {
            normal: Axis::Y,
            side: Side::Hi,
        };
        generate_axis_anchors(&child, Dim::whole(Axis::X), &parent, Dim::whole(Axis::X), host, &EngineConfig::default())
    }

    fn has(anchors: &[(AxisAnchor, Interval)], lo: Feature, hi: Feature) -> Option<Interval> {
        anchors.iter().find_map(|(a, iv)| match a.placement {
            Placement::Edges { lo: Some(l), hi: Some(h) } if l.feature == lo && h.feature == hi => Some(*iv),
            _ => None,
        })
    }

    #[test]
    fn half_to_edge_anchor_within_bound_is_kept() {
        let a = anchors_on_x([0.48, 1.0]);
        assert_eq!(has(&a, Feature::HalfLine, Feature::HiEdge), Some(Interval::new(0.5, 1.0)));
    }

    #[test]
    fn anchor_beyond_bound_is_discarded() {
        let a = anchors_on_x([0.3, 1.0]);
        assert_eq!(has(&a, Feature::HalfLine, Feature::HiEdge), None);
    }

    #[test]
    fn identical_axis_aligns_edges_with_zero_deviation() {
        let a = anchors_on_x([0.0, 1.0]);
        assert_eq!(has(&a, Feature::LoEdge, Feature::HiEdge), Some(Interval::new(0.0, 1.0)));
    }

    #[test]
    fn unguided_sides_keep_original_coordinates() {
        for (a, iv) in anchors_on_x([0.48, 1.0]) {
            if let Placement::Edges { lo: None, .. } = a.placement {
                assert_eq!(iv.lo, 0.48);
            }
            if let Placement::Edges { hi: None, .. } = a.placement {
                assert_eq!(iv.hi, 1.0);
            }
        }
    }

    #[test]
    fn centered_small_face_snaps_to_half_and_quarter() {
        let parent = original(0, cuboid(0, [0.0, -1.0, 0.0], [1.0, 0.0, 1.0]));
        // 0.52 x 0.26 footprint on the parent's top face.
        let child = cuboid(1, [0.24, 0.0, 0.49], [0.76, 0.5, 0.75]);
        let planes = generate_candidate_planes(&child, &parent, &EngineConfig::default());
        let found = planes.iter().any(|pl| {
            pl.normal == Axis::Y
                && pl.anchors.len() == 2
                && (pl.anchors[0].1.len() - 0.5).abs() < 1e-12
                && (pl.anchors[1].1.len() - 0.25).abs() < 1e-12
        });
        assert!(found);
        let custom = Primitive {
            kind: PrimitiveKind::Custom,
            ..child
        };
        assert!(generate_candidate_planes(&custom, &parent, &EngineConfig::default()).is_empty());
    }

    #[test]
    fn e_d_examples() {
        let cfg = EngineConfig::default();
        let orig = cuboid(0, [0.0; 3], [1.0; 3]);
        let unguided: Vec<AxisAnchor> = orig.dims().into_iter().map(AxisAnchor::unguided).collect();
        assert_eq!(cost_e_d(&orig, &orig, &unguided, &cfg).unwrap(), 6.0);
        let fref = FeatureRef {
            parent: 0,
            parent_part: 1,
            dim: Dim::whole(Axis::X),
            feature: Feature::LoEdge,
            host: HostFace { normal: Axis::Y, side: Side::Lo },
        };
        let guided = AxisAnchor {
            dim: Dim::whole(Axis::X),
            placement: Placement::Edges { lo: Some(fref), hi: None },
        };
        let moved = orig.with_dim_interval(Dim::whole(Axis::X), Interval::new(0.1, 1.0));
        let e = cost_e_d(&moved, &orig, &[guided, unguided[1], unguided[2]], &cfg).unwrap();
        assert!((e - (0.1 + 0.05 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn e_e_scales_inversely_with_host_area() {
        let cfg = EngineConfig::default();
        let fref = FeatureRef {
            parent: 0,
            parent_part: 1,
            dim: Dim::whole(Axis::X),
            feature: Feature::HalfLine,
            host: HostFace { normal: Axis::Y, side: Side::Lo },
        };
        let full = cost_e_e(&[fref], |_| 2.0, 2.0, 1.0, &cfg);
        let half = cost_e_e(&[fref], |_| 1.0, 2.0, 1.0, &cfg);
        assert!((full - 0.15).abs() < 1e-12);
        assert!((half - 0.30).abs() < 1e-12);
        assert_eq!(cost_e_e(&[fref], |_| 0.0, 2.0, 1.0, &cfg), f64::INFINITY);
    }

    fn set_for(m: &crate::model_io::SegmentedModel) -> (Vec<Primitive>, Vec<Relation>, CandidateSet) {
        let cfg = EngineConfig::default();
        let prims = fit_all(m);
        let rels = detect_relations(&prims, &cfg, m.bbox_diagonal);
        let set = generate_candidates(&prims, &rels, &cfg, m.bbox_diagonal);
        (prims, rels, set)
    }

    #[test]
    fn structural_invariants_on_fixtures() {
        for (name, m) in [("two_cuboids", fixtures::two_cuboids()), ("mixer", fixtures::mixer())] {
            let (prims, _, set) = set_for(&m);
            for p in prims.iter().filter(|p| p.kind != PrimitiveKind::Custom) {
                assert!(set.original(p.part_id).is_some(), "{name}: part {} lacks original", p.part_id);
            }
            for (n, c) in set.candidates.iter().enumerate() {
                assert_eq!(c.id as usize, n);
                assert_eq!(c.level == 0, c.parents.is_empty() && c.anchors.iter().all(|a| !a.is_guided()));
                for p in &c.parents {
                    assert!(set.get(*p).level < c.level);
                    assert_ne!(set.get(*p).part_id, c.part_id);
                }
                assert!(c.level <= 2);
            }
        }
    }

    #[test]
    fn single_part_has_only_its_original() {
        let (_, _, set) = set_for(&fixtures::unit_cube());
        assert_eq!(set.candidates.len(), 1);
        assert_eq!(set.candidates[0].e_d, 6.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let m = fixtures::mixer();
        let (_, _, a) = set_for(&m);
        let (_, _, b) = set_for(&m);
        assert_eq!(a, b);
    }

    #[test]
    fn restoration_lifts_coplanar_partner() {
        let cfg = EngineConfig::default();
        // Part 1 rests on part 2 and is nearly flush with part 0's bottom.
        let prims = vec![
            cuboid(0, [0.0; 3], [1.0; 3]),
            cuboid(1, [1.5, 0.02, 0.1], [2.3, 0.6, 0.8]),
            cuboid(2, [1.3, -1.0, 0.05], [2.4, 0.0, 0.95]),
        ];
        let diag = 3.6;
        let rels = detect_relations(&prims, &cfg, diag);
        let set = generate_candidates(&prims, &rels, &cfg, diag);
        let rel = rels.iter().find(|r| (r.i, r.j) == (0, 1)).unwrap();
        assert_eq!(rel.kind, RelationKind::Coplanar);
        let restored: Vec<&Candidate> = set.candidates.iter().filter(|c| c.restored_relations.contains(&rel.id)).collect();
        assert!(!restored.is_empty());
        for c in restored {
            let parent = set.get(c.parents[0]);
            let (gi, gj) = if parent.part_id == rel.i { (&parent.geometry, &c.geometry) } else { (&c.geometry, &parent.geometry) };
            assert!(rel.holds(gi, gj, 1e-12), "{c:?}");
        }
    }
}
