//! Loading, validating and normalizing part-segmented triangle meshes.
//!
//! The native format is a versioned JSON document:
//!
//! ```json
//! { "version": 1, "up_axis": "Y",
//!   "segments": [ { "id": 0, "name": "base",
//!                   "vertices": [x0, y0, z0, ...],
//!                   "triangles": [i0, i1, i2, ...],
//!                   "contours": [[x0, y0, z0, ...], ...] } ] }
//! ```
//!
//! OBJ files are also accepted; each `g`/`o` group (or `usemtl` material
//! when no groups are present) becomes one segment.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, Axis};

pub const DOCUMENT_VERSION: u32 = 1;

/// Vertices closer than this (absolute, model units) are merged by [`normalize`].
pub const DEDUP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model{}: {message}", segment.map(|s| format!(" (segment {s})")).unwrap_or_default())]
    Validation { segment: Option<u32>, message: String },
}

impl ModelError {
    fn invalid(segment: Option<u32>, message: impl Into<String>) -> Self {
        ModelError::Validation {
            segment,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelFormat {
    Document,
    Obj,
}

impl ModelFormat {
    /// `.obj` files are OBJ, everything else is the native document.
    pub fn from_path(path: &Path) -> ModelFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("obj") => ModelFormat::Obj,
            _ => ModelFormat::Document,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub id: u32,
    pub name: String,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub contours: Option<Vec<Vec<[f64; 3]>>>,
}

impl Segment {
    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentedModel {
    pub segments: Vec<Segment>,
    pub bbox_diagonal: f64,
    pub up_axis: Axis,
}

impl SegmentedModel {
    /// Validates the segments and computes the bounding-box diagonal.
    pub fn new(segments: Vec<Segment>, up_axis: Axis) -> Result<Self, ModelError> {
        if segments.is_empty() {
            return Err(ModelError::invalid(None, "model has no segments"));
        }
        let mut seen = BTreeMap::new();
        for seg in &segments {
            if seen.insert(seg.id, ()).is_some() {
                return Err(ModelError::invalid(Some(seg.id), "duplicate segment id"));
            }
            if seg.triangles.is_empty() {
                return Err(ModelError::invalid(Some(seg.id), "segment has no triangles"));
            }
            if seg.vertices.iter().flatten().any(|c| !c.is_finite()) {
                return Err(ModelError::invalid(Some(seg.id), "non-finite vertex coordinate"));
            }
            let n = seg.vertices.len() as u32;
            if let Some(t) = seg.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
                return Err(ModelError::invalid(
                    Some(seg.id),
                    format!("triangle {t:?} indexes past {n} vertices"),
                ));
            }
            if let Some(contours) = &seg.contours {
                if contours.iter().flatten().flatten().any(|c| !c.is_finite()) {
                    return Err(ModelError::invalid(Some(seg.id), "non-finite contour coordinate"));
                }
            }
        }
        let bbox_diagonal = union_bbox(&segments).diagonal();
        if !(bbox_diagonal > 0.0) {
            return Err(ModelError::invalid(None, "model bounding box is degenerate"));
        }
        Ok(SegmentedModel {
            segments,
            bbox_diagonal,
            up_axis,
        })
    }

    pub fn bbox(&self) -> Aabb {
        union_bbox(&self.segments)
    }

    pub fn segment(&self, id: u32) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }

    pub fn triangle_count(&self) -> usize {
        self.segments.iter().map(|s| s.triangles.len()).sum()
    }
}

fn union_bbox(segments: &[Segment]) -> Aabb {
    Aabb::from_points(segments.iter().flat_map(|s| s.vertices.iter()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    version: u32,
    up_axis: Axis,
    segments: Vec<SegmentDocument>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDocument {
    id: u32,
    name: String,
    vertices: Vec<f64>,
    triangles: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contours: Option<Vec<Vec<f64>>>,
}

pub fn load_model(path: &Path, format: ModelFormat) -> Result<SegmentedModel, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        ModelFormat::Document => parse_document(&text),
        ModelFormat::Obj => parse_obj(&text),
    }
}

pub fn parse_document(text: &str) -> Result<SegmentedModel, ModelError> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_document(doc)
}

/// Parses a model embedded in a larger JSON value (plan documents).
pub fn from_json_value(value: serde_json::Value) -> Result<SegmentedModel, ModelError> {
    let doc: ModelDocument = serde_json::from_value(value).map_err(|e| ModelError::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    from_document(doc)
}

fn from_document(doc: ModelDocument) -> Result<SegmentedModel, ModelError> {
    if doc.version != DOCUMENT_VERSION {
        return Err(ModelError::invalid(
            None,
            format!("unsupported document version {}", doc.version),
        ));
    }
    let mut segments = Vec::with_capacity(doc.segments.len());
    for s in doc.segments {
        let vertices = triples(&s.vertices).ok_or_else(|| {
            ModelError::invalid(Some(s.id), "vertex array length is not a multiple of 3")
        })?;
        if s.triangles.len() % 3 != 0 {
            return Err(ModelError::invalid(
                Some(s.id),
                "triangle array length is not a multiple of 3",
            ));
        }
        let triangles = s.triangles.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        let contours = match s.contours {
            None => None,
            Some(cs) => Some(
                cs.iter()
                    .map(|c| triples(c))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        ModelError::invalid(Some(s.id), "contour length is not a multiple of 3")
                    })?,
            ),
        };
        segments.push(Segment {
            id: s.id,
            name: s.name,
            vertices,
            triangles,
            contours,
        });
    }
    SegmentedModel::new(segments, doc.up_axis)
}

fn triples(flat: &[f64]) -> Option<Vec<[f64; 3]>> {
    if !flat.len().is_multiple_of(3) {
        return None;
    }
    Some(flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

fn to_document(model: &SegmentedModel) -> ModelDocument {
    ModelDocument {
        version: DOCUMENT_VERSION,
        up_axis: model.up_axis,
        segments: model
            .segments
            .iter()
            .map(|s| SegmentDocument {
                id: s.id,
                name: s.name.clone(),
                vertices: s.vertices.iter().flatten().copied().collect(),
                triangles: s.triangles.iter().flatten().copied().collect(),
                contours: s
                    .contours
                    .as_ref()
                    .map(|cs| cs.iter().map(|c| c.iter().flatten().copied().collect()).collect()),
            })
            .collect(),
    }
}

pub fn to_json_value(model: &SegmentedModel) -> serde_json::Value {
    serde_json::to_value(to_document(model)).expect("model serializes")
}

/// Canonical document text for a model.
pub fn serialize_model(model: &SegmentedModel) -> String {
    let mut s = serde_json::to_string_pretty(&to_document(model)).expect("model serializes");
    s.push('\n');
    s
}

/// Serde adapter embedding a model as its document form.
pub mod as_document {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::SegmentedModel;

    pub fn serialize<S: Serializer>(model: &SegmentedModel, s: S) -> Result<S::Ok, S::Error> {
        super::to_document(model).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SegmentedModel, D::Error> {
        let doc = super::ModelDocument::deserialize(d)?;
        super::from_document(doc).map_err(serde::de::Error::custom)
    }
}

pub fn parse_obj(text: &str) -> Result<SegmentedModel, ModelError> {
    struct Building {
        name: String,
        local: HashMap<usize, u32>,
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[u32; 3]>,
    }

    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut segments: Vec<Building> = Vec::new();
    let mut by_name: HashMap<String, usize> = HashMap::new();
    let mut group: Option<String> = None;
    let mut material: Option<String> = None;
    let mut saw_group = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let err = |column: usize, message: String| ModelError::Parse {
            line: lineno + 1,
            column,
            message,
        };
        match tag {
            "v" => {
                let mut p = [0.0; 3];
                for (k, slot) in p.iter_mut().enumerate() {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| err(raw.len(), "vertex needs three coordinates".into()))?;
                    *slot = tok
                        .parse()
                        .map_err(|_| err(column_of(raw, tok), format!("bad coordinate {tok:?} (#{k})")))?;
                }
                positions.push(p);
            }
            "g" | "o" => {
                saw_group = true;
                let name = tokens.collect::<Vec<_>>().join(" ");
                group = Some(if name.is_empty() { "default".into() } else { name });
            }
            "usemtl" => {
                material = tokens.next().map(str::to_string);
            }
            "f" => {
                let mut idx = Vec::new();
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let v: i64 = head
                        .parse()
                        .map_err(|_| err(column_of(raw, tok), format!("bad face index {tok:?}")))?;
                    let resolved = if v > 0 {
                        v - 1
                    } else if v < 0 {
                        positions.len() as i64 + v
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved as usize >= positions.len() {
                        return Err(err(column_of(raw, tok), format!("face index {v} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(err(1, "face needs at least three vertices".into()));
                }
                let name = if saw_group {
                    group.clone().unwrap_or_else(|| "default".into())
                } else {
                    material.clone().unwrap_or_else(|| "default".into())
                };
                let slot = *by_name.entry(name.clone()).or_insert_with(|| {
                    segments.push(Building {
                        name,
                        local: HashMap::new(),
                        vertices: Vec::new(),
                        triangles: Vec::new(),
                    });
                    segments.len() - 1
                });
                let seg = &mut segments[slot];
                let local: Vec<u32> = idx
                    .iter()
                    .map(|&g| {
                        *seg.local.entry(g).or_insert_with(|| {
                            seg.vertices.push(positions[g]);
                            (seg.vertices.len() - 1) as u32
                        })
                    })
                    .collect();
                for k in 1..local.len() - 1 {
                    seg.triangles.push([local[0], local[k], local[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let segments = segments
        .into_iter()
        .enumerate()
        .map(|(i, b)| Segment {
            id: i as u32,
            name: b.name,
            vertices: b.vertices,
            triangles: b.triangles,
            contours: None,
        })
        .collect();
    SegmentedModel::new(segments, Axis::Y)
}

fn column_of(line: &str, token: &str) -> usize {
    line.find(token).map(|c| c + 1).unwrap_or(1)
}

/// Merges near-coincident vertices, recomputes the diagonal and renumbers
/// segments densely in input order. Idempotent.
pub fn normalize(model: &SegmentedModel) -> SegmentedModel {
    let segments: Vec<Segment> = model
        .segments
        .iter()
        .enumerate()
        .map(|(new_id, seg)| {
            let (vertices, remap) = dedup_vertices(&seg.vertices, DEDUP_TOLERANCE);
            Segment {
                id: new_id as u32,
                name: seg.name.clone(),
                vertices,
                triangles: seg
                    .triangles
                    .iter()
                    .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
                    .collect(),
                contours: seg.contours.clone(),
            }
        })
        .collect();
    let bbox_diagonal = union_bbox(&segments).diagonal();
    SegmentedModel {
        segments,
        bbox_diagonal,
        up_axis: model.up_axis,
    }
}

/// Greedy merge against already-kept vertices; a hash grid with cell size
/// `tol` limits the comparisons to the 27 neighbouring cells.
fn dedup_vertices(vertices: &[[f64; 3]], tol: f64) -> (Vec<[f64; 3]>, Vec<u32>) {
    let cell = |p: &[f64; 3]| -> [i64; 3] { [0, 1, 2].map(|k| (p[k] / tol).floor() as i64) };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut kept: Vec<[f64; 3]> = Vec::with_capacity(vertices.len());
    let mut remap = Vec::with_capacity(vertices.len());
    for p in vertices {
        let c = cell(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &k in list {
                            let q = &kept[k as usize];
                            let d2: f64 = (0..3).map(|i| (p[i] - q[i]).powi(2)).sum();
                            if d2 <= tol * tol {
                                found = Some(k);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let idx = match found {
            Some(k) => k,
            None => {
                kept.push(*p);
                let k = (kept.len() - 1) as u32;
                grid.entry(c).or_default().push(k);
                k
            }
        };
        remap.push(idx);
    }
    (kept, remap)
}
