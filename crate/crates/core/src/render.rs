//! SVG step sheets and the tutorial document.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::doc;
use crate::geom::to_vec3;
use crate::projective::Camera;
use crate::tutorial::{StepKind, Tutorial, P3, TUTORIAL_VERSION};

pub const FRESH: &str = "#E8860C";
pub const RETAINED: &str = "#2B6CB0";
pub const PRIOR: &str = "#BBBBBB";
pub const CORNERS: &str = "#2F855A";
pub const INK: &str = "#000000";

/// Layer names in paint order.
pub const LAYERS: [&str; 6] = ["prior_art", "fresh_guides", "retained_guides", "new_edges", "vanishing", "labels"];

const CONTACT_COLUMNS: usize = 4;
const CONTACT_SCALE: f64 = 0.25;
const INSET_FRACTION: f64 = 0.22;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("step {index} out of range ({count} steps)")]
    StepOutOfRange { index: usize, count: usize },
    #[error("malformed tutorial document: {0}")]
    Document(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSheet {
    pub step_index: usize,
    pub svg: String,
}

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Layers {
    body: Vec<Vec<String>>,
    skipped: usize,
}

impl Layers {
    fn new() -> Layers {
        Layers {
            body: vec![Vec::new(); LAYERS.len()],
            skipped: 0,
        }
    }

    fn push(&mut self, layer: &str, element: String) {
        let k = LAYERS.iter().position(|l| *l == layer).expect("known layer");
        self.body[k].push(element);
    }

    fn segment(&mut self, camera: &Camera, layer: &str, ends: &[P3; 2]) {
        match (camera.project(&to_vec3(&ends[0])), camera.project(&to_vec3(&ends[1]))) {
            (Ok(a), Ok(b)) if a == b => {
                self.push(layer, format!(r#"<circle cx="{}" cy="{}" r="3"/>"#, num(a[0]), num(a[1])));
            }
            (Ok(a), Ok(b)) => self.push(
                layer,
                format!(
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                    num(a[0]),
                    num(a[1]),
                    num(b[0]),
                    num(b[1])
                ),
            ),
            _ => self.skipped += 1,
        }
    }

    fn polyline(&mut self, camera: &Camera, layer: &str, points: &[P3]) {
        let mut run: Vec<[f64; 2]> = Vec::new();
        let flush = |run: &mut Vec<[f64; 2]>, layers: &mut Layers| {
            if run.len() >= 2 {
                let pts: Vec<String> = run.iter().map(|p| format!("{},{}", num(p[0]), num(p[1]))).collect();
                layers.push(layer, format!(r#"<polyline points="{}"/>"#, pts.join(" ")));
            }
            run.clear();
        };
        for p in points {
            match camera.project(&to_vec3(p)) {
                Ok(q) => run.push(q),
                Err(_) => {
                    self.skipped += 1;
                    flush(&mut run, self);
                }
            }
        }
        flush(&mut run, self);
    }

    fn face(&mut self, camera: &Camera, corners: &[P3; 4]) {
        let pts: Result<Vec<[f64; 2]>, _> = corners.iter().map(|c| camera.project(&to_vec3(c))).collect();
        match pts {
            Ok(pts) => {
                let s: Vec<String> = pts.iter().map(|p| format!("{},{}", num(p[0]), num(p[1]))).collect();
                self.push(
                    "labels",
                    format!(
                        r#"<polygon class="highlight" points="{}" fill="{FRESH}" fill-opacity="0.15" stroke="none"/>"#,
                        s.join(" ")
                    ),
                );
            }
            Err(_) => self.skipped += 1,
        }
    }
}

/// Point where the ray from `from` toward `to` leaves the canvas.
fn clip_to_canvas(from: [f64; 2], to: [f64; 2], w: f64, h: f64) -> [f64; 2] {
    let d = [to[0] - from[0], to[1] - from[1]];
    let mut t = 1.0f64;
    for k in 0..2 {
        let limit = if k == 0 { w } else { h };
        if d[k] > 0.0 {
            t = t.min((limit - from[k]) / d[k]);
        } else if d[k] < 0.0 {
            t = t.min(-from[k] / d[k]);
        }
    }
    [from[0] + t * d[0], from[1] + t * d[1]]
}

/// Horizon segment across the canvas, if it crosses it.
fn horizon_segment(line: &P3, w: f64, h: f64) -> Option<[[f64; 2]; 2]> {
    let [a, b, c] = *line;
    let mut pts: Vec<[f64; 2]> = Vec::new();
    if b.abs() > 1e-15 {
        for x in [0.0, w] {
            let y = -(a * x + c) / b;
            if (0.0..=h).contains(&y) {
                pts.push([x, y]);
            }
        }
    }
    if a.abs() > 1e-15 {
        for y in [0.0, h] {
            let x = -(b * y + c) / a;
            if (0.0..=w).contains(&x) {
                pts.push([x, y]);
            }
        }
    }
    pts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    pts.dedup();
    (pts.len() >= 2).then(|| [pts[0], pts[pts.len() - 1]])
}

fn vanishing_layer(t: &Tutorial, layers: &mut Layers) {
    let (w, h) = (t.camera.width as f64, t.camera.height as f64);
    let arm = 0.04 * w.min(h);
    for (x, y, dx, dy) in [(0.0, 0.0, 1.0, 1.0), (w, 0.0, -1.0, 1.0), (w, h, -1.0, -1.0), (0.0, h, 1.0, -1.0)] {
        layers.push(
            "vanishing",
            format!(
                r#"<polyline class="corner" points="{},{} {},{} {},{}"/>"#,
                num(x + dx * arm),
                num(y),
                num(x),
                num(y),
                num(x),
                num(y + dy * arm)
            ),
        );
    }
    if let Some(seg) = t.horizon.as_ref().and_then(|l| horizon_segment(l, w, h)) {
        layers.push(
            "vanishing",
            format!(
                r#"<line class="horizon" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                num(seg[0][0]),
                num(seg[0][1]),
                num(seg[1][0]),
                num(seg[1][1])
            ),
        );
    }
    let center = [0.5 * w, 0.5 * h];
    for vp in &t.vanishing_points {
        let p = [vp.x, vp.y];
        let end = if vp.on_canvas { p } else { clip_to_canvas(center, p, w, h) };
        layers.push(
            "vanishing",
            format!(
                r#"<line class="vp-ray" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                num(center[0]),
                num(center[1]),
                num(end[0]),
                num(end[1])
            ),
        );
        layers.push(
            "vanishing",
            format!(
                r#"<circle class="vp" cx="{}" cy="{}" r="4"/><text x="{}" y="{}">{}</text>"#,
                num(end[0]),
                num(end[1]),
                num(end[0] + 6.0),
                num(end[1] - 6.0),
                vp.axis
            ),
        );
    }
}

fn inset(t: &Tutorial, index: usize, layers: &mut Layers) {
    let step = &t.steps[index];
    let mut projected: Vec<(bool, [f64; 2], [f64; 2])> = Vec::new();
    for part in &t.scaffold {
        let active = step.part_id == Some(part.part_id);
        for e in &part.edges {
            if let (Ok(a), Ok(b)) = (t.camera.project(&to_vec3(&e[0])), t.camera.project(&to_vec3(&e[1]))) {
                projected.push((active, a, b));
            }
        }
    }
    if projected.is_empty() {
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for (_, a, b) in &projected {
        for p in [a, b] {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
    }
    let (w, h) = (t.camera.width as f64, t.camera.height as f64);
    let size = INSET_FRACTION * w.min(h);
    let (ox, oy) = (w - size - 8.0, h - size - 8.0);
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let s = 0.9 * size / span;
    let map = |p: &[f64; 2]| [ox + 0.05 * size + s * (p[0] - lo[0]), oy + 0.05 * size + s * (p[1] - lo[1])];
    let mut out = format!(
        r##"<g class="inset"><rect x="{}" y="{}" width="{}" height="{}" fill="#FFFFFF" stroke="{PRIOR}"/>"##,
        num(ox),
        num(oy),
        num(size),
        num(size)
    );
    for (active, a, b) in &projected {
        let (a, b) = (map(a), map(b));
        let color = if *active { FRESH } else { PRIOR };
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}"/>"#,
            num(a[0]),
            num(a[1]),
            num(b[0]),
            num(b[1])
        );
    }
    out.push_str("</g>");
    layers.push("labels", out);
}

fn sheet_body(t: &Tutorial, index: usize) -> String {
    let cam = &t.camera;
    let step = &t.steps[index];
    let mut layers = Layers::new();
    for prior in &t.steps[..index] {
        if matches!(prior.kind, StepKind::DrawPrimitiveEdge | StepKind::DrawEllipse | StepKind::DrawContours) {
            for e in &prior.payload.edges {
                layers.segment(cam, "prior_art", e);
            }
            for p in &prior.payload.polylines {
                layers.polyline(cam, "prior_art", p);
            }
        }
    }
    for g in &t.guides {
        if g.first_step == index {
            layers.segment(cam, "fresh_guides", &g.ends);
        } else if g.first_step < index && g.last_step >= index {
            layers.segment(cam, "retained_guides", &g.ends);
        }
    }
    for e in &step.payload.edges {
        layers.segment(cam, "new_edges", e);
    }
    for p in &step.payload.polylines {
        layers.polyline(cam, "new_edges", p);
    }
    vanishing_layer(t, &mut layers);
    for f in &step.payload.faces {
        layers.face(cam, f);
    }
    layers.push(
        "labels",
        format!(
            r#"<text class="step" x="12" y="24">Step {} of {}</text><text class="instruction" x="12" y="46">{}</text>"#,
            index + 1,
            t.steps.len(),
            escape(&step.instruction)
        ),
    );
    if !step.payload.erased.is_empty() {
        let ids: Vec<String> = step.payload.erased.iter().map(|g| format!("g{g}")).collect();
        layers.push(
            "labels",
            format!(r#"<text class="erased" x="12" y="68">Erase: {}</text>"#, ids.join(", ")),
        );
    }
    inset(t, index, &mut layers);

    let style = |name: &str| match name {
        "prior_art" => format!(r#"stroke="{PRIOR}" stroke-width="1.5" fill="none""#),
        "fresh_guides" => format!(r#"stroke="{FRESH}" stroke-width="1.5" fill="{FRESH}""#),
        "retained_guides" => format!(r#"stroke="{RETAINED}" stroke-width="1.5" fill="{RETAINED}""#),
        "new_edges" => format!(r#"stroke="{INK}" stroke-width="2" fill="none""#),
        "vanishing" => format!(r#"stroke="{CORNERS}" stroke-width="1" fill="none""#),
        _ => format!(r#"font-family="sans-serif" font-size="16" fill="{INK}""#),
    };
    let mut out = String::new();
    out.push_str(&format!(
        r##"<rect width="{}" height="{}" fill="#FFFFFF"/>"##,
        cam.width, cam.height
    ));
    out.push('\n');
    for (name, elements) in LAYERS.iter().zip(&layers.body) {
        let _ = writeln!(out, r#"<g id="{name}" {}>"#, style(name));
        for e in elements {
            out.push_str(e);
            out.push('\n');
        }
        out.push_str("</g>\n");
    }
    if layers.skipped > 0 {
        tracing::warn!(step = index, skipped = layers.skipped, "elements behind the eye were skipped");
        let _ = writeln!(out, "<!-- warning: {} elements behind the eye skipped -->", layers.skipped);
    }
    out
}

pub fn render_step(t: &Tutorial, index: usize) -> Result<StepSheet, RenderError> {
    if index >= t.steps.len() {
        return Err(RenderError::StepOutOfRange {
            index,
            count: t.steps.len(),
        });
    }
    let (w, h) = (t.camera.width, t.camera.height);
    let svg = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
        sheet_body(t, index)
    );
    Ok(StepSheet { step_index: index, svg })
}

pub fn render_all(t: &Tutorial) -> Vec<StepSheet> {
    (0..t.steps.len()).map(|i| render_step(t, i).expect("index in range")).collect()
}

/// All steps tiled on one page.
pub fn contact_sheet(t: &Tutorial) -> String {
    let (w, h) = (t.camera.width as f64, t.camera.height as f64);
    let (tw, th) = (w * CONTACT_SCALE, h * CONTACT_SCALE);
    let n = t.steps.len();
    let rows = n.div_ceil(CONTACT_COLUMNS).max(1);
    let cols = CONTACT_COLUMNS.min(n.max(1));
    let (pw, ph) = (cols as f64 * tw, rows as f64 * th);
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        num(pw),
        num(ph),
        num(pw),
        num(ph)
    );
    for i in 0..n {
        let (x, y) = ((i % CONTACT_COLUMNS) as f64 * tw, (i / CONTACT_COLUMNS) as f64 * th);
        let _ = writeln!(
            out,
            r#"<svg id="step_{i:03}" x="{}" y="{}" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            num(x),
            num(y),
            num(tw),
            num(th),
            t.camera.width,
            t.camera.height
        );
        out.push_str(&sheet_body(t, i));
        out.push_str("</svg>\n");
    }
    out.push_str("</svg>\n");
    out
}

pub fn step_file_name(index: usize) -> String {
    format!("step_{index:03}.svg")
}

/// Writes every step sheet plus the contact sheet into `dir`.
pub fn write_sheets(t: &Tutorial, dir: &Path) -> Result<Vec<PathBuf>, RenderError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| RenderError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for sheet in render_all(t) {
        let path = dir.join(step_file_name(sheet.step_index));
        std::fs::write(&path, sheet.svg).map_err(io(&path))?;
        written.push(path);
    }
    let path = dir.join("contact_sheet.svg");
    std::fs::write(&path, contact_sheet(t)).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

pub fn export_tutorial(t: &Tutorial) -> String {
    doc::to_canonical_string(t)
}

pub fn import_tutorial(text: &str) -> Result<Tutorial, RenderError> {
    let t: Tutorial = serde_json::from_str(text).map_err(|e| RenderError::Document(e.to_string()))?;
    if t.version != TUTORIAL_VERSION {
        return Err(RenderError::Document(format!("unsupported version {}", t.version)));
    }
    t.camera.validate().map_err(|e| RenderError::Document(e.to_string()))?;
    for (i, s) in t.steps.iter().enumerate() {
        if s.index != i {
            return Err(RenderError::Document(format!("step {i} has index {}", s.index)));
        }
        if s.payload.guides.iter().chain(&s.payload.erased).any(|g| *g >= t.guides.len()) {
            return Err(RenderError::Document(format!("step {i} references an unknown guide")));
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;
    use crate::fixtures;
    use crate::plan::{build_plan, PlanOptions};
    use crate::projective::Ability;
    use crate::tutorial::compile;

    fn tutorial(name: &str, ability: Ability) -> Tutorial {
        let plan = build_plan(&fixtures::by_name(name).unwrap(), &EngineConfig::default(), PlanOptions::default()).unwrap();
        let cam = Camera {
            eye: [3.5, 3.0, 4.5],
            target: [0.3, 0.5, 0.3],
            up: [0.0, 1.0, 0.0],
            vertical_fov: 45.0,
            width: 1000,
            height: 800,
        };
        doc_round(&compile(&plan, &cam, ability).unwrap())
    }

    fn doc_round(t: &Tutorial) -> Tutorial {
        import_tutorial(&export_tutorial(t)).unwrap()
    }

    fn layer<'a>(svg: &'a str, name: &str) -> &'a str {
        let start = svg.find(&format!(r#"<g id="{name}""#)).unwrap();
        let end = start + svg[start..].find("</g>\n").unwrap();
        &svg[start..end]
    }

    #[test]
    fn setup_sheet_only_has_vanishing_content() {
        let t = tutorial("two_cuboids", Ability::Novice);
        let svg = render_step(&t, 0).unwrap().svg;
        for name in ["prior_art", "fresh_guides", "retained_guides", "new_edges"] {
            assert!(!layer(&svg, name).contains("<line"), "{name}");
        }
        assert_eq!(layer(&svg, "vanishing").matches("class=\"corner\"").count(), 4);
    }

    #[test]
    fn guide_strokes_follow_lifetimes() {
        let t = tutorial("mixer", Ability::Novice);
        for (i, sheet) in render_all(&t).iter().enumerate() {
            let fresh = t.guides.iter().filter(|g| g.first_step == i).count();
            let shown = layer(&sheet.svg, "fresh_guides").matches("<line").count()
                + layer(&sheet.svg, "fresh_guides").matches("<circle").count();
            assert_eq!(shown, fresh, "step {i}");
            let alive = t.guides.iter().filter(|g| g.first_step < i && g.last_step >= i).count();
            let kept = layer(&sheet.svg, "retained_guides").matches("<line").count()
                + layer(&sheet.svg, "retained_guides").matches("<circle").count();
            assert_eq!(kept, alive, "step {i}");
        }
    }

    #[test]
    fn export_round_trip_is_byte_stable() {
        let t = tutorial("lamp", Ability::Apprentice);
        let text = export_tutorial(&t);
        let back = import_tutorial(&text).unwrap();
        assert_eq!(export_tutorial(&back), text);
        assert!(import_tutorial("{\"version\": 1}").is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = tutorial("mixer", Ability::Novice);
        let b = tutorial("mixer", Ability::Novice);
        assert_eq!(contact_sheet(&a), contact_sheet(&b));
        assert!(render_step(&a, a.steps.len()).is_err());
    }

    #[test]
    fn horizon_crosses_canvas() {
        let seg = horizon_segment(&[0.0, 1.0, -400.0], 1000.0, 800.0).unwrap();
        assert_eq!(seg, [[0.0, 400.0], [1000.0, 400.0]]);
        assert!(horizon_segment(&[0.0, 1.0, 100.0], 1000.0, 800.0).is_none());
        assert_eq!(clip_to_canvas([500.0, 400.0], [3000.0, 400.0], 1000.0, 800.0), [1000.0, 400.0]);
    }
}
