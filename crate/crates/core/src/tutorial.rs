//! Per-view compilation of a plan into drawing steps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{host_face_ranges, CandId, Candidate, CandidateSet, FeatureRef};
use crate::config::EngineConfig;
use crate::geom::{to_array, to_vec3, Aabb, Axis, Side, Vec3};
use crate::model_io::Segment;
use crate::plan::Plan;
use crate::primitives::{PartId, Primitive};
use crate::projective::{
    construct, ellipse_guides, lift_construction, polygon_area, vanishing_points, Ability, Camera, FaceChart,
    GuideKind, Lifted, ProjectionError, Tier, VanishingPoint,
};
use crate::selection::PartialOrder;

pub const TUTORIAL_VERSION: u32 = 1;
/// Occlusion rays stop this fraction short of the sample so the sample's
/// own surface never counts as an occluder.
const OCCLUSION_EPS: f64 = 1e-9;
const CIRCLE_SEGMENTS: usize = 48;
const CLIP_SAMPLES: usize = 16;
const CLIP_BISECTIONS: usize = 48;
/// Mesh edges whose faces meet at more than 30 degrees are sharp.
const SHARP_EDGE_COS: f64 = 0.866_025_403_784_438_6;

pub type P3 = [f64; 3];

#[derive(Debug, Error)]
pub enum TutorialError {
    #[error(transparent)]
    Camera(#[from] ProjectionError),
    #[error("plan has no geometry for part {0}")]
    MissingPart(PartId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepKind {
    DrawVanishingSetup,
    DrawGuide,
    DrawPrimitiveEdge,
    DrawEllipse,
    EraseGuides,
    DrawContours,
    EyeballPrimitive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Guide {
    pub id: usize,
    pub kind: GuideKind,
    pub tier: Tier,
    /// Part whose construction first needed the guide.
    pub part_id: PartId,
    pub ends: [P3; 2],
    pub first_step: usize,
    pub last_step: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    /// Guides drawn or used by the step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guides: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub erased: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[P3; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub polylines: Vec<Vec<P3>>,
    /// Highlighted faces, as four corners.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faces: Vec<[P3; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub kind: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part_id: Option<PartId>,
    /// Candidate highlighted in the inset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inset_hint: Option<CandId>,
    pub instruction: String,
    pub payload: Payload,
}

/// Scaffold of one drawn part, for the inset thumbnail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaffoldPart {
    pub part_id: PartId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<CandId>,
    pub edges: Vec<[P3; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tutorial {
    pub version: u32,
    pub camera: Camera,
    pub ability: Ability,
    pub up_axis: Axis,
    pub bbox_diagonal: f64,
    pub config_hash: String,
    pub vanishing_points: Vec<VanishingPoint>,
    /// Horizon as a homogeneous pixel line `a x + b y + c = 0`.
    pub horizon: Option<P3>,
    /// Parts in drawing order.
    pub order: Vec<PartId>,
    pub skipped_parts: Vec<PartId>,
    pub eyeballed_parts: Vec<PartId>,
    pub guides: Vec<Guide>,
    pub steps: Vec<Step>,
    pub scaffold: Vec<ScaffoldPart>,
}

impl Tutorial {
    pub fn count(&self, kind: StepKind) -> usize {
        self.steps.iter().filter(|s| s.kind == kind).count()
    }
}

/// Topological order of `order.parts`; among available parts the one
/// whose center is nearest the eye goes first, then the lower id.
pub fn break_ties(order: &PartialOrder, centers: &BTreeMap<PartId, Vec3>, eye: &Vec3) -> Vec<PartId> {
    let mut indegree: BTreeMap<PartId, usize> = order.parts.iter().map(|p| (*p, 0)).collect();
    for (_, t) in &order.edges {
        *indegree.get_mut(t).expect("edge within parts") += 1;
    }
    let dist = |p: &PartId| centers.get(p).map_or(f64::INFINITY, |c| (c - eye).norm());
    let mut out = Vec::with_capacity(order.parts.len());
    while out.len() < order.parts.len() {
        let next = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(p, _)| *p)
            .min_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.cmp(b)))
            .expect("order is acyclic");
        indegree.remove(&next);
        for (s, t) in &order.edges {
            if *s == next {
                *indegree.get_mut(t).expect("edge within parts") -= 1;
            }
        }
        out.push(next);
    }
    out
}

fn sample_points(b: &Aabb) -> Vec<Vec3> {
    b.corners().into_iter().chain(b.face_centers()).collect()
}

fn occluded(p: &Vec3, eye: &Vec3, boxes: &[&Aabb]) -> bool {
    let dir = p - eye;
    boxes.iter().any(|b| b.ray_entry(eye, &dir, 1.0 - OCCLUSION_EPS).is_some())
}

/// Parts hidden behind the others at every sample point that no visible
/// part depends on, directly or through a chain of ancestors.
pub fn cull_occluded(
    boxes: &BTreeMap<PartId, Aabb>,
    ancestors: &BTreeMap<PartId, BTreeSet<PartId>>,
    eye: &Vec3,
) -> Vec<PartId> {
    let hidden: BTreeSet<PartId> = boxes
        .iter()
        .filter(|(part, b)| {
            let others: Vec<&Aabb> = boxes.iter().filter(|(q, _)| q != part).map(|(_, ob)| ob).collect();
            sample_points(b).iter().all(|p| occluded(p, eye, &others))
        })
        .map(|(p, _)| *p)
        .collect();
    let needed: BTreeSet<PartId> = boxes
        .keys()
        .filter(|p| !hidden.contains(p))
        .flat_map(|p| ancestors.get(p).into_iter().flatten().copied())
        .collect();
    hidden.into_iter().filter(|p| !needed.contains(p)).collect()
}

/// Whether a construction of `guide_count` lines on a face covering
/// `projected_area` square pixels is too cramped to draw.
pub fn should_eyeball(projected_area: f64, guide_count: usize, image_area: f64, config: &EngineConfig) -> bool {
    guide_count > 0 && projected_area / (guide_count as f64) < config.eyeball_fraction * image_area
}

pub fn ability_filter(lines: &[Lifted], ability: Ability) -> Vec<Lifted> {
    lines.iter().filter(|l| l.tier.visible_to(ability)).cloned().collect()
}

/// Host-face chart of a feature reference and the construction locating
/// the feature on it.
pub fn reference_construction(set: &CandidateSet, r: &FeatureRef) -> Result<(FaceChart, Vec<Lifted>), ProjectionError> {
    let parent = &set.get(r.parent).geometry;
    let chart = FaceChart::new(
        r.host.normal,
        parent.face(r.host.normal, r.host.side),
        r.dim.axis,
        host_face_ranges(parent, r.host),
    );
    let (recipe, from) = r.feature.recipe();
    let c = construct(recipe, &chart.quad(from))?;
    Ok((chart, lift_construction(&chart, &c)?))
}

fn projected_area(camera: &Camera, corners: &[Vec3; 4]) -> f64 {
    let mut pts = Vec::with_capacity(4);
    for c in corners {
        match camera.project(c) {
            Ok(p) => pts.push(p),
            Err(_) => return 0.0,
        }
    }
    polygon_area(&pts).abs()
}

/// A step before guide ids and erase steps are assigned.
#[derive(Clone, Debug)]
pub struct DraftStep {
    pub kind: StepKind,
    pub part_id: Option<PartId>,
    pub inset_hint: Option<CandId>,
    pub instruction: String,
    /// Guide lines the step draws or relies on.
    pub lines: Vec<(PartId, Lifted)>,
    pub payload: Payload,
}

impl DraftStep {
    fn new(kind: StepKind, part_id: Option<PartId>, inset_hint: Option<CandId>, instruction: String) -> DraftStep {
        DraftStep {
            kind,
            part_id,
            inset_hint,
            instruction,
            lines: Vec::new(),
            payload: Payload::default(),
        }
    }
}

fn same_segment(a: &[Vec3; 2], b: &[Vec3; 2], tol: f64) -> bool {
    let close = |p: &Vec3, q: &Vec3| (p - q).norm() <= tol;
    (close(&a[0], &b[0]) && close(&a[1], &b[1])) || (close(&a[0], &b[1]) && close(&a[1], &b[0]))
}

/// Merges coincident guide lines, records first and last use, and inserts
/// an erase step right after each step that is some guide's last use.
pub fn compute_lifetimes(drafts: Vec<DraftStep>, merge_tol: f64) -> (Vec<Guide>, Vec<Step>) {
    let mut merged: Vec<(Lifted, PartId)> = Vec::new();
    let mut uses: Vec<Vec<usize>> = Vec::with_capacity(drafts.len());
    for d in &drafts {
        let mut ids = Vec::new();
        for (part, line) in &d.lines {
            let id = match merged.iter().position(|(m, _)| same_segment(&m.ends, &line.ends, merge_tol)) {
                Some(id) => id,
                None => {
                    merged.push((line.clone(), *part));
                    merged.len() - 1
                }
            };
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        uses.push(ids);
    }
    let mut first = vec![usize::MAX; merged.len()];
    let mut last = vec![0usize; merged.len()];
    for (i, ids) in uses.iter().enumerate() {
        for &g in ids {
            first[g] = first[g].min(i);
            last[g] = last[g].max(i);
        }
    }
    let mut steps = Vec::new();
    let mut final_index = vec![0usize; drafts.len()];
    for (i, (d, ids)) in drafts.into_iter().zip(uses).enumerate() {
        final_index[i] = steps.len();
        let mut payload = d.payload;
        payload.guides = ids;
        steps.push(Step {
            index: steps.len(),
            kind: d.kind,
            part_id: d.part_id,
            inset_hint: d.inset_hint,
            instruction: d.instruction,
            payload,
        });
        let done: Vec<usize> = (0..merged.len()).filter(|g| last[*g] == i).collect();
        if !done.is_empty() {
            let n = done.len();
            steps.push(Step {
                index: steps.len(),
                kind: StepKind::EraseGuides,
                part_id: d.part_id,
                inset_hint: None,
                instruction: format!(
                    "Erase {n} guide{} no longer needed",
                    if n == 1 { "" } else { "s" }
                ),
                payload: Payload {
                    erased: done,
                    ..Payload::default()
                },
            });
        }
    }
    let guides = merged
        .into_iter()
        .enumerate()
        .map(|(id, (line, part))| Guide {
            id,
            kind: line.kind,
            tier: line.tier,
            part_id: part,
            ends: line.ends.map(|e| to_array(&e)),
            first_step: final_index[first[id]],
            last_step: final_index[last[id]],
        })
        .collect();
    (guides, steps)
}

/// Per-axis affine map taking `from`'s box onto `to`'s box.
pub fn box_map(from: &Primitive, to: &Primitive) -> impl Fn(&Vec3) -> Vec3 {
    let (a, b) = (from.intervals, to.intervals);
    move |p: &Vec3| Vec3::new(a[0].map_to(&b[0], p[0]), a[1].map_to(&b[1], p[1]), a[2].map_to(&b[2], p[2]))
}

/// Sharp, boundary and silhouette edges of a mesh seen from `eye`, as
/// two-point polylines.
pub fn silhouette_edges(vertices: &[Vec3], triangles: &[[u32; 3]], eye: &Vec3) -> Vec<Vec<Vec3>> {
    let mut normals = Vec::with_capacity(triangles.len());
    let mut facing = Vec::with_capacity(triangles.len());
    for t in triangles {
        let [a, b, c] = t.map(|i| vertices[i as usize]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let n = if len > 0.0 { n / len } else { Vec3::zeros() };
        facing.push(n.dot(&(eye - (a + b + c) / 3.0)) > 0.0);
        normals.push(n);
    }
    let mut adjacency: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (k, t) in triangles.iter().enumerate() {
        if normals[k] == Vec3::zeros() {
            continue;
        }
        for e in 0..3 {
            let (i, j) = (t[e], t[(e + 1) % 3]);
            adjacency.entry((i.min(j), i.max(j))).or_default().push(k);
        }
    }
    adjacency
        .into_iter()
        .filter(|(_, tris)| match tris.as_slice() {
            [k] => facing[*k],
            [k, l] => {
                let (fk, fl) = (facing[*k], facing[*l]);
                fk != fl || ((fk || fl) && normals[*k].dot(&normals[*l]) < SHARP_EDGE_COS)
            }
            _ => tris.iter().any(|k| facing[*k]),
        })
        .map(|((i, j), _)| vec![vertices[i as usize], vertices[j as usize]])
        .collect()
}

/// Contour polylines of a segment carried onto the chosen geometry.
pub fn mapped_contours(segment: &Segment, map: &impl Fn(&Vec3) -> Vec3, eye: &Vec3) -> Vec<Vec<Vec3>> {
    match &segment.contours {
        Some(lines) if !lines.is_empty() => lines
            .iter()
            .map(|l| l.iter().map(|p| map(&to_vec3(p))).collect())
            .collect(),
        _ => {
            let verts: Vec<Vec3> = segment.vertices.iter().map(|p| map(&to_vec3(p))).collect();
            silhouette_edges(&verts, &segment.triangles, eye)
        }
    }
}

/// Visible pieces of a polyline. Original vertices are kept; cut points
/// are located by bisection between samples.
pub fn clip_polyline(poly: &[Vec3], visible: &impl Fn(&Vec3) -> bool) -> Vec<Vec<Vec3>> {
    let mut out = Vec::new();
    if poly.len() < 2 {
        return out;
    }
    let mut cur: Vec<Vec3> = Vec::new();
    let mut prev = poly[0];
    let mut prev_vis = visible(&prev);
    if prev_vis {
        cur.push(prev);
    }
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        for k in 1..=CLIP_SAMPLES {
            let p = if k == CLIP_SAMPLES { b } else { a + (b - a) * (k as f64 / CLIP_SAMPLES as f64) };
            let vis = visible(&p);
            if vis != prev_vis {
                let (mut lo, mut hi) = (prev, p);
                for _ in 0..CLIP_BISECTIONS {
                    let m = (lo + hi) * 0.5;
                    if visible(&m) == prev_vis {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                if prev_vis {
                    cur.push(lo);
                    if cur.len() >= 2 {
                        out.push(std::mem::take(&mut cur));
                    }
                    cur.clear();
                } else {
                    cur = vec![hi];
                }
            }
            if vis && k == CLIP_SAMPLES {
                cur.push(p);
            }
            prev = p;
            prev_vis = vis;
        }
    }
    if cur.len() >= 2 {
        out.push(cur);
    }
    out
}

fn part_ancestors(plan: &Plan) -> BTreeMap<PartId, BTreeSet<PartId>> {
    let mut out = BTreeMap::new();
    for (part, cand) in &plan.selection.chosen {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<CandId> = plan.candidates.get(*cand).parents.clone();
        while let Some(c) = stack.pop() {
            let cand = plan.candidates.get(c);
            if seen.insert(cand.part_id) {
                stack.extend(cand.parents.iter().copied());
            }
        }
        out.insert(*part, seen);
    }
    out
}

/// Geometry drawn for each part: chosen candidates, and custom parts
/// shifted with their nearest scaffold part.
fn drawn_geometry(plan: &Plan) -> Result<BTreeMap<PartId, Primitive>, TutorialError> {
    let mut out = BTreeMap::new();
    for (part, cand) in &plan.selection.chosen {
        out.insert(*part, plan.candidates.get(*cand).geometry.clone());
    }
    for part in plan.custom_parts() {
        let prim = plan.primitive(part).ok_or(TutorialError::MissingPart(part))?;
        let nearest = plan
            .selection
            .chosen
            .keys()
            .filter_map(|q| plan.primitive(*q).map(|p| (*q, p)))
            .min_by(|(qa, a), (qb, b)| {
                let da = (a.center() - prim.center()).norm();
                let db = (b.center() - prim.center()).norm();
                da.total_cmp(&db).then(qa.cmp(qb))
            });
        let mut g = prim.clone();
        if let Some((q, original)) = nearest {
            let chosen = &out[&q];
            for axis in Axis::ALL {
                g = g.translated(axis, chosen.mid(axis) - original.mid(axis));
            }
        }
        out.insert(part, g);
    }
    Ok(out)
}

fn edges_of(g: &Primitive) -> Vec<[P3; 2]> {
    g.edges().into_iter().map(|e| e.map(|p| to_array(&p))).collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Cap faces of a cylinder turned toward the eye.
fn front_caps(g: &Primitive, eye: &Vec3) -> Vec<(Axis, Side)> {
    let Some(axis) = g.cyl_axis else { return Vec::new() };
    Side::BOTH
        .into_iter()
        .filter(|side| {
            let mut c = g.center();
            c[axis.index()] = g.face(axis, *side);
            (eye - c).dot(&(axis.unit() * side.sign())) > 0.0
        })
        .map(|side| (axis, side))
        .collect()
}

fn ellipse_polyline(chart: &FaceChart) -> Vec<P3> {
    let (u, v) = (chart.u_range, chart.v_range);
    (0..=CIRCLE_SEGMENTS)
        .map(|k| {
            let t = std::f64::consts::TAU * (k % CIRCLE_SEGMENTS) as f64 / CIRCLE_SEGMENTS as f64;
            let mut p = Vec3::zeros();
            p[chart.normal.index()] = chart.offset;
            p[chart.u.index()] = u.mid() + 0.5 * u.len() * t.cos();
            p[chart.v.index()] = v.mid() + 0.5 * v.len() * t.sin();
            to_array(&p)
        })
        .collect()
}

fn corners_array(chart: &FaceChart) -> [P3; 4] {
    chart.corners_3d().map(|p| to_array(&p))
}

struct Compiler<'a> {
    plan: &'a Plan,
    camera: &'a Camera,
    ability: Ability,
    eye: Vec3,
    geometry: BTreeMap<PartId, Primitive>,
    drafts: Vec<DraftStep>,
    eyeballed: Vec<PartId>,
}

impl Compiler<'_> {
    fn name(&self, part: PartId) -> &str {
        self.plan.part_name(part)
    }

    fn scaffold_steps(&mut self, part: PartId, cand: &Candidate) {
        let g = &cand.geometry;
        let label = g.kind.label();
        let refs = cand.feature_refs();
        let mut constructions = Vec::new();
        for r in &refs {
            match reference_construction(&self.plan.candidates, r) {
                Ok(c) => constructions.push((*r, c)),
                Err(e) => tracing::warn!(part, error = %e, "construction skipped"),
            }
        }
        let k: usize = refs.iter().map(|r| r.ratio().guide_count()).sum();
        let area = constructions
            .iter()
            .map(|(_, (chart, _))| projected_area(self.camera, &chart.corners_3d()))
            .fold(f64::INFINITY, f64::min);
        let eyeball = !constructions.is_empty()
            && should_eyeball(area, k, self.camera.image_area(), &self.plan.config);
        let mut used: Vec<(PartId, Lifted)> = Vec::new();
        let mut by_eye: Vec<String> = Vec::new();
        let mut faces = Vec::new();
        if eyeball {
            self.eyeballed.push(part);
            let mut d = DraftStep::new(
                StepKind::EyeballPrimitive,
                Some(part),
                Some(cand.id),
                format!(
                    "Place the {label} for the {} by eye; its guides would be too small to draw",
                    self.name(part)
                ),
            );
            d.payload.faces = constructions.iter().map(|(_, (c, _))| corners_array(c)).collect();
            self.drafts.push(d);
        } else {
            for (r, (chart, lines)) in &constructions {
                let parent = self.name(r.parent_part).to_string();
                let visible = ability_filter(lines, self.ability);
                if visible.is_empty() {
                    by_eye.push(format!("{} on the highlighted face of the {parent}", r.feature.describe()));
                    faces.push(corners_array(chart));
                    continue;
                }
                let mut d = DraftStep::new(
                    StepKind::DrawGuide,
                    Some(part),
                    Some(cand.id),
                    format!(
                        "{} on the highlighted face of the {parent} to place the {}",
                        capitalize(r.feature.describe()),
                        self.name(part)
                    ),
                );
                d.lines = visible.iter().map(|l| (part, l.clone())).collect();
                d.payload.faces = vec![corners_array(chart)];
                used.extend(d.lines.iter().cloned());
                self.drafts.push(d);
            }
        }
        let draw = format!("draw the {label} for the {}", self.name(part));
        let instruction = if by_eye.is_empty() {
            capitalize(&draw)
        } else {
            format!("By eye, {}; then {draw}", by_eye.join("; "))
        };
        let mut d = DraftStep::new(StepKind::DrawPrimitiveEdge, Some(part), Some(cand.id), instruction);
        d.lines = used;
        d.payload.edges = edges_of(g);
        d.payload.faces = faces;
        self.drafts.push(d);
        for (axis, side) in front_caps(g, &self.eye) {
            let chart = FaceChart::new(axis, g.face(axis, side), axis.others()[0], g.intervals);
            let mut d = DraftStep::new(
                StepKind::DrawEllipse,
                Some(part),
                Some(cand.id),
                format!("Draw the ellipse inscribed in the marked face of the {}", self.name(part)),
            );
            match ellipse_guides(&chart.quad(Side::Lo)).and_then(|c| lift_construction(&chart, &c)) {
                Ok(lines) if !eyeball => {
                    d.lines = ability_filter(&lines, self.ability).into_iter().map(|l| (part, l)).collect();
                }
                Ok(_) => {}
                Err(e) => tracing::warn!(part, error = %e, "ellipse guides skipped"),
            }
            d.payload.polylines = vec![ellipse_polyline(&chart)];
            d.payload.faces = vec![corners_array(&chart)];
            self.drafts.push(d);
        }
    }

    fn custom_step(&mut self, part: PartId) {
        let mut d = DraftStep::new(
            StepKind::DrawPrimitiveEdge,
            Some(part),
            None,
            format!("Sketch the bounding box of the {} by eye", self.name(part)),
        );
        d.payload.edges = edges_of(&self.geometry[&part]);
        self.drafts.push(d);
    }

    fn contour_step(&mut self, part: PartId, drawn_before: &[PartId]) {
        let mut d = DraftStep::new(
            StepKind::DrawContours,
            Some(part),
            self.plan.selection.chosen.get(&part).copied(),
            format!("Draw the contours of the {}", self.name(part)),
        );
        let (Some(segment), Some(original)) = (self.plan.model.segment(part), self.plan.primitive(part)) else {
            tracing::warn!(part, "no segment for contours");
            self.drafts.push(d);
            return;
        };
        let map = box_map(original, &self.geometry[&part]);
        let occluders: Vec<Aabb> = drawn_before.iter().map(|q| self.geometry[q].bbox()).collect();
        let refs: Vec<&Aabb> = occluders.iter().collect();
        let eye = self.eye;
        let visible = |p: &Vec3| !occluded(p, &eye, &refs);
        let lines: Vec<Vec<P3>> = mapped_contours(segment, &map, &eye)
            .iter()
            .flat_map(|l| clip_polyline(l, &visible))
            .map(|l| l.iter().map(to_array).collect())
            .collect();
        if lines.is_empty() {
            tracing::warn!(part, "contours empty after clipping");
        }
        d.payload.polylines = lines;
        self.drafts.push(d);
    }
}

/// Compiles the plan for one view and ability.
pub fn compile(plan: &Plan, camera: &Camera, ability: Ability) -> Result<Tutorial, TutorialError> {
    camera.validate()?;
    let eye = camera.eye_point();
    let geometry = drawn_geometry(plan)?;
    let boxes: BTreeMap<PartId, Aabb> = geometry.iter().map(|(p, g)| (*p, g.bbox())).collect();
    let skipped = cull_occluded(&boxes, &part_ancestors(plan), &eye);
    let centers: BTreeMap<PartId, Vec3> = geometry.iter().map(|(p, g)| (*p, g.center())).collect();
    let mut order: Vec<PartId> = break_ties(&plan.selection.order, &centers, &eye)
        .into_iter()
        .filter(|p| !skipped.contains(p))
        .collect();
    let customs = PartialOrder {
        parts: plan.custom_parts().into_iter().filter(|p| !skipped.contains(p)).collect(),
        edges: Vec::new(),
    };
    let custom_order = break_ties(&customs, &centers, &eye);
    order.extend(custom_order.iter().copied());

    let mut c = Compiler {
        plan,
        camera,
        ability,
        eye,
        geometry,
        drafts: Vec::new(),
        eyeballed: Vec::new(),
    };
    c.drafts.push(DraftStep::new(
        StepKind::DrawVanishingSetup,
        None,
        None,
        "Mark the horizon and the vanishing points".into(),
    ));
    for &part in &order {
        match plan.chosen(part) {
            Some(cand) => c.scaffold_steps(part, cand),
            None => c.custom_step(part),
        }
    }
    for (n, &part) in order.iter().enumerate() {
        c.contour_step(part, &order[..n]);
    }
    let scaffold = order
        .iter()
        .map(|p| ScaffoldPart {
            part_id: *p,
            candidate: plan.selection.chosen.get(p).copied(),
            edges: edges_of(&c.geometry[p]),
        })
        .collect();
    let eyeballed = std::mem::take(&mut c.eyeballed);
    let merge_tol = plan.config.guide_merge_tol * plan.model.bbox_diagonal;
    let (guides, steps) = compute_lifetimes(std::mem::take(&mut c.drafts), merge_tol);
    Ok(Tutorial {
        version: TUTORIAL_VERSION,
        camera: *camera,
        ability,
        up_axis: plan.model.up_axis,
        bbox_diagonal: plan.model.bbox_diagonal,
        config_hash: plan.config_hash.clone(),
        vanishing_points: vanishing_points(camera).into_iter().flatten().collect(),
        horizon: camera.horizon(plan.model.up_axis).map(|h| [h.x, h.y, h.z]),
        order,
        skipped_parts: skipped,
        eyeballed_parts: eyeballed,
        guides,
        steps,
        scaffold,
    })
}
