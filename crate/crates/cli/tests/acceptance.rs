//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use h2s_cli::commands::default_camera;
use h2s_core::candidates::CandId;
use h2s_core::config::EngineConfig;
use h2s_core::fixtures;
use h2s_core::geom::{to_vec3, Axis, Vec3};
use h2s_core::model_io::{serialize_model, SegmentedModel};
use h2s_core::plan::{build_plan, Plan, PlanOptions};
use h2s_core::primitives::{PartId, PrimitiveKind};
use h2s_core::projective::{
    construct, dehomogenize, ellipse_guides, mirror, point, Ability, Camera, ExtendFactor, GuideKind, Quad, Recipe,
};
use h2s_core::selection::{greedy_baseline, solve, SelectionError, SelectionProblem, SolveOptions};
use h2s_core::tutorial::{compile, StepKind, Tutorial};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Fixture {
    name: &'static str,
    model: SegmentedModel,
    plan: Plan,
    problem: SelectionProblem,
}

fn fixtures_with_plans() -> Vec<Fixture> {
    fixtures::all()
        .into_iter()
        .map(|(name, model)| {
            let plan = build_plan(&model, &EngineConfig::default(), PlanOptions::default()).expect("plan builds");
            let problem = plan.problem();
            Fixture {
                name,
                model,
                plan,
                problem,
            }
        })
        .collect()
}

// Brute-force oracle shared by the solver checks.

fn quadratic_ok(p: &SelectionProblem, x: &[i64]) -> bool {
    let parts: BTreeSet<PartId> = p.part_of.iter().copied().collect();
    let one_each = parts.iter().all(|part| {
        let s: i64 = (0..x.len()).filter(|&c| p.part_of[c] == *part).map(|c| x[c]).sum();
        s == 1
    });
    one_each
        && p.dependency_pairs
            .iter()
            .all(|&(c, q)| x[c as usize] * x[q as usize] - x[c as usize] >= 0)
        && p.conflict_pairs.iter().all(|&(a, b)| x[a as usize] * x[b as usize] == 0)
}

fn indicator(n: usize, chosen: &BTreeMap<PartId, CandId>) -> Vec<i64> {
    let mut x = vec![0; n];
    for c in chosen.values() {
        x[*c as usize] = 1;
    }
    x
}

fn brute_force(p: &SelectionProblem) -> Option<f64> {
    let parts: Vec<Vec<usize>> = {
        let mut m: BTreeMap<PartId, Vec<usize>> = BTreeMap::new();
        for (c, part) in p.part_of.iter().enumerate() {
            m.entry(*part).or_default().push(c);
        }
        m.into_values().collect()
    };
    let n = p.part_of.len();
    let mut best: Option<f64> = None;
    let mut idx = vec![0usize; parts.len()];
    loop {
        let mut x = vec![0i64; n];
        for (k, i) in idx.iter().enumerate() {
            x[parts[k][*i]] = 1;
        }
        if quadratic_ok(p, &x) {
            let cost: f64 = (0..n).filter(|c| x[*c] == 1).map(|c| p.costs[c]).sum();
            best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
        let mut k = 0;
        loop {
            if k == parts.len() {
                return best;
            }
            idx[k] += 1;
            if idx[k] < parts[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Candidates arrive in random part order. The first candidate of a part
/// is its original; later ones anchor on one or more earlier candidates of
/// other parts, which keeps the anchoring graph acyclic.
fn random_instance(rng: &mut ChaCha8Rng) -> SelectionProblem {
    let parts = rng.random_range(3..=5u32);
    let total = rng.random_range(parts as usize + 1..=14);
    let mut part_of: Vec<PartId> = (0..parts).collect();
    while part_of.len() < total {
        part_of.push(rng.random_range(0..parts));
    }
    for i in (1..part_of.len()).rev() {
        part_of.swap(i, rng.random_range(0..=i));
    }
    let n = part_of.len();
    let mut levels = vec![0u8; n];
    let mut costs = vec![0.0; n];
    let mut deps = Vec::new();
    let mut seen = BTreeSet::new();
    for c in 0..n {
        let earlier: Vec<usize> = (0..c).filter(|q| part_of[*q] != part_of[c]).collect();
        if seen.insert(part_of[c]) || earlier.is_empty() {
            costs[c] = rng.random_range(2.0..8.0);
            continue;
        }
        let k = rng.random_range(1..=earlier.len().min(3));
        let mut parents: Vec<usize> = (0..k).map(|_| earlier[rng.random_range(0..earlier.len())]).collect();
        parents.sort_unstable();
        parents.dedup();
        levels[c] = 1 + parents.iter().map(|q| levels[*q]).max().unwrap();
        costs[c] = rng.random_range(0.0..6.0);
        deps.extend(parents.iter().map(|q| (c as CandId, *q as CandId)));
    }
    let mut conflicts = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if part_of[a] != part_of[b] && rng.random_bool(0.15) {
                conflicts.push((a as CandId, b as CandId));
            }
        }
    }
    let volumes = (0..parts).map(|p| (p, 1.0 + p as f64)).collect();
    SelectionProblem::new(part_of, costs, levels, deps, conflicts, volumes).unwrap()
}

fn solver_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut infeasible = 0;
    for i in 0..100 {
        let p = random_instance(&mut rng);
        match (solve(&p, SolveOptions::default()), brute_force(&p)) {
            (Ok(s), Some(best)) => {
                ensure((s.objective - best).abs() <= 1e-9, || {
                    format!("instance {i}: solver {} vs oracle {best}", s.objective)
                })?;
                ensure(quadratic_ok(&p, &indicator(p.part_of.len(), &s.chosen)), || {
                    format!("instance {i}: solver output violates constraints")
                })?;
            }
            (Err(SelectionError::Infeasible), None) => infeasible += 1,
            (got, want) => return Err(format!("instance {i}: solver {got:?} vs oracle {want:?}")),
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("100 instances ({infeasible} infeasible) in {elapsed:.2?}"))
}

fn validity_suite(fx: &[Fixture]) -> Outcome {
    let mut checked = 0;
    for f in fx {
        let exact = solve(&f.problem, SolveOptions::default()).map_err(|e| format!("{}: {e}", f.name))?;
        let greedy = greedy_baseline(&f.problem);
        for (method, s) in [("solve", &exact), ("greedy", &greedy), ("plan", &f.plan.selection)] {
            let x = indicator(f.problem.part_of.len(), &s.chosen);
            ensure(quadratic_ok(&f.problem, &x), || format!("{}: {method} output violates constraints", f.name))?;
            ensure(f.problem.violations(&s.chosen).is_empty(), || {
                format!("{}: {method} violations reported", f.name)
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} selections, 0 violations"))
}

fn linearization_equivalence(fx: &[Fixture]) -> Outcome {
    let mut pairs = 0usize;
    for f in fx {
        pairs += f.problem.dependency_pairs.len() + f.problem.conflict_pairs.len();
    }
    for (xc, xp) in [(0i64, 0i64), (0, 1), (1, 0), (1, 1)] {
        ensure((xc * xp - xc >= 0) == (xc <= xp), || format!("dependency form differs at ({xc}, {xp})"))?;
        ensure((xc * xp == 0) == (xc + xp <= 1), || format!("conflict form differs at ({xc}, {xp})"))?;
    }
    // The same equivalence over every pair of every fixture, evaluated on
    // the pair's own indicator values inside a full assignment.
    for f in fx {
        let n = f.problem.part_of.len();
        for &(c, q) in &f.problem.dependency_pairs {
            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let mut x = vec![0i64; n];
                x[c as usize] = a;
                x[q as usize] = b;
                let quad = x[c as usize] * x[q as usize] - x[c as usize] >= 0;
                ensure(quad == (x[c as usize] <= x[q as usize]), || format!("{}: dep ({c}, {q})", f.name))?;
            }
        }
        for &(c, q) in &f.problem.conflict_pairs {
            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let mut x = vec![0i64; n];
                x[c as usize] = a;
                x[q as usize] = b;
                let quad = x[c as usize] * x[q as usize] == 0;
                ensure(quad == (x[c as usize] + x[q as usize] <= 1), || format!("{}: conflict ({c}, {q})", f.name))?;
            }
        }
    }
    Ok(format!("{pairs} constraint pairs x 4 assignments"))
}

fn greedy_gap(fx: &[Fixture]) -> Outcome {
    let f = fx.iter().find(|f| f.name == "chain4").ok_or("chain4 fixture missing")?;
    let opt = solve(&f.problem, SolveOptions::default()).map_err(|e| e.to_string())?;
    let greedy = greedy_baseline(&f.problem);
    ensure(greedy.objective > opt.objective, || {
        format!("greedy {} not above optimum {}", greedy.objective, opt.objective)
    })?;
    let second_level = opt.chosen.values().any(|c| f.problem.levels[*c as usize] >= 2);
    Ok(format!(
        "greedy {:.4} > optimal {:.4} (optimum uses second level: {second_level})",
        greedy.objective, opt.objective
    ))
}

fn pruning_bound(fx: &[Fixture]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for f in fx {
        for c in &f.plan.candidates.candidates {
            let original = f.plan.primitive(c.part_id).ok_or("missing original")?;
            for dim in original.dims() {
                let before = original.dim_interval(dim);
                let after = c.geometry.dim_interval(dim);
                let l0 = before.len();
                if l0 == 0.0 {
                    ensure(after == before, || format!("{}: candidate {} moves a flat axis", f.name, c.id))?;
                    continue;
                }
                let change = (after.len() - l0).abs() / l0;
                let shift = (after.mid() - before.mid()).abs() / l0;
                worst = worst.max(change).max(shift);
            }
            count += 1;
        }
    }
    ensure(worst <= 0.10 + 1e-12, || format!("max normalized change {worst}"))?;
    Ok(format!("{count} candidates, max normalized change {worst:.6}"))
}

fn unguided_penalty(fx: &[Fixture]) -> Outcome {
    let plate = SegmentedModel::new(
        vec![
            fixtures::cuboid(0, "block", [0.0, 0.0, 0.0], [1.0, 0.6, 0.8]),
            fixtures::quad(1, "sign", Axis::Z, 0.8, [0.2, 0.7], [0.1, 0.5]),
        ],
        Axis::Y,
    )
    .map_err(|e| e.to_string())?;
    let plate_plan = build_plan(&plate, &EngineConfig::default(), PlanOptions::default()).map_err(|e| e.to_string())?;
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let plans = fx.iter().map(|f| (f.name, &f.plan)).chain([("plate", &plate_plan)]);
    for (name, plan) in plans {
        for c in plan.candidates.candidates.iter().filter(|c| c.level == 0) {
            let (label, want) = match c.geometry.kind {
                PrimitiveKind::Cuboid => ("cuboid", 3.0 * 2.0),
                PrimitiveKind::Plane => ("plane", 2.0 * 2.0),
                _ => continue,
            };
            ensure(c.e_d == want, || format!("{name}: {label} original {} has e_d {}", c.id, c.e_d))?;
            *seen.entry(label).or_default() += 1;
        }
    }
    ensure(seen.contains_key("cuboid") && seen.contains_key("plane"), || format!("saw {seen:?}"))?;
    Ok(format!("{} cuboid originals at 6, {} plane originals at 4", seen["cuboid"], seen["plane"]))
}

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

struct Face {
    camera: Camera,
    corners: [Vec3; 4],
}

fn project(camera: &Camera, p: &Vec3) -> Option<[f64; 2]> {
    camera.project(p).ok()
}

fn within(p: &[f64; 2]) -> bool {
    p.iter().all(|v| (-500.0..=1500.0).contains(v))
}

/// A random camera looking at a random rectangle that is in front of the
/// eye, not seen edge-on, and whose constructed points all land near the
/// 1000 px canvas.
fn random_face(rng: &mut ChaCha8Rng) -> Face {
    loop {
        let target = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let eye = target + unit(rng) * rng.random_range(3.0..9.0);
        let camera = Camera {
            eye: eye.into(),
            target: target.into(),
            up: unit(rng).into(),
            vertical_fov: rng.random_range(25.0..75.0),
            width: 1000,
            height: 1000,
        };
        if camera.validate().is_err() {
            continue;
        }
        let forward = (target - eye).normalize();
        if forward.cross(&to_vec3(&camera.up)).norm() < 0.2 {
            continue;
        }
        let u = unit(rng);
        let v = u.cross(&unit(rng));
        if v.norm() < 0.2 {
            continue;
        }
        let v = v.normalize();
        let (a, b) = (rng.random_range(0.2..1.2), rng.random_range(0.2..1.2));
        let origin = target + (unit(rng) * rng.random_range(0.0..0.8));
        let corners = [origin, origin + u * a, origin + u * a + v * b, origin + v * b];
        let normal = u.cross(&v);
        let to_eye = (eye - origin).normalize();
        if normal.dot(&to_eye).abs() < 0.1 {
            continue;
        }
        let mut probes: Vec<Vec3> = corners.to_vec();
        for t in [-2.0, 3.0] {
            probes.push(corners[0] + (corners[1] - corners[0]) * t);
            probes.push(corners[3] + (corners[2] - corners[3]) * t);
        }
        if probes.iter().all(|p| project(&camera, p).is_some_and(|q| within(&q))) {
            return Face { camera, corners };
        }
    }
}

fn image_quad(face: &Face) -> Quad {
    face.corners.map(|c| {
        let [x, y] = project(&face.camera, &c).unwrap();
        point(x, y)
    })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Pixel homography of the face's unit parameter square.
fn face_homography(face: &Face) -> Matrix3<f64> {
    let m = face.camera.matrix();
    let [a, b, _, d] = face.corners;
    let col = |v: Vec3, w: f64| m * nalgebra::Vector4::new(v.x, v.y, v.z, w);
    Matrix3::from_columns(&[col(b - a, 0.0), col(d - a, 0.0), col(a, 1.0)])
}

fn projective_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let recipes = [
        (Recipe::Half, 0.5),
        (Recipe::Third, 1.0 / 3.0),
        (Recipe::Quarter, 0.25),
        (Recipe::Extend(ExtendFactor::Half), 1.5),
        (Recipe::Extend(ExtendFactor::One), 2.0),
        (Recipe::Extend(ExtendFactor::Two), 3.0),
    ];
    let mut worst_point: f64 = 0.0;
    let mut worst_conic: f64 = 0.0;
    for trial in 0..1000 {
        let face = random_face(&mut rng);
        let q = image_quad(&face);
        let [a, b, _, _] = face.corners;
        for (recipe, t) in recipes {
            for (quad, from, to) in [(q, a, b), (mirror(&q), b, a)] {
                let c = construct(recipe, &quad).map_err(|e| format!("camera {trial}: {recipe:?}: {e}"))?;
                let got = dehomogenize(&c.point).ok_or("constructed point at infinity")?;
                let want = project(&face.camera, &(from + (to - from) * t)).unwrap();
                let err = dist(got, want);
                worst_point = worst_point.max(err);
                ensure(err <= 1e-6, || format!("camera {trial}: {recipe:?} off by {err:e} px"))?;
            }
        }
        let h = face_homography(&face);
        let inv = h.try_inverse().ok_or("singular face homography")?;
        let conic = |p: [f64; 2]| {
            let st = inv * nalgebra::Vector3::new(p[0], p[1], 1.0);
            let (s, t) = (st.x / st.z, st.y / st.z);
            (2.0 * s - 1.0).powi(2) + (2.0 * t - 1.0).powi(2) - 1.0
        };
        let guides = ellipse_guides(&q).map_err(|e| format!("camera {trial}: ellipse: {e}"))?;
        let tangents: Vec<[f64; 2]> = guides
            .lines
            .iter()
            .filter(|l| l.kind == GuideKind::EllipseTangentPoint)
            .map(|l| dehomogenize(&l.ends[0]).unwrap())
            .collect();
        ensure(tangents.len() == 4, || format!("camera {trial}: {} tangency points", tangents.len()))?;
        for p in tangents {
            let e = 1e-3;
            let gx = (conic([p[0] + e, p[1]]) - conic([p[0] - e, p[1]])) / (2.0 * e);
            let gy = (conic([p[0], p[1] + e]) - conic([p[0], p[1] - e])) / (2.0 * e);
            let d = conic(p).abs() / gx.hypot(gy);
            worst_conic = worst_conic.max(d);
            ensure(d <= 1e-6, || format!("camera {trial}: tangency point {d:e} px off the conic"))?;
        }
    }
    Ok(format!(
        "1000 cameras, max point error {worst_point:.2e} px, max conic distance {worst_conic:.2e} px"
    ))
}

fn relation_preservation(fx: &[Fixture]) -> Outcome {
    let f = fx.iter().find(|f| f.name == "mixer").ok_or("mixer fixture missing")?;
    let kinds: BTreeSet<String> = f.plan.relations.iter().map(|r| format!("{:?}", r.kind)).collect();
    ensure(kinds.len() == 3, || format!("mixer relation kinds {kinds:?}"))?;
    let tol = f.plan.relation_tolerance();
    for r in &f.plan.relations {
        let (ci, cj) = (f.plan.chosen(r.i), f.plan.chosen(r.j));
        let (Some(ci), Some(cj)) = (ci, cj) else { continue };
        ensure(r.holds(&ci.geometry, &cj.geometry, tol), || {
            format!("relation {} ({:?}) broken between parts {} and {}", r.id, r.kind, r.i, r.j)
        })?;
    }
    let moved = f.plan.selection.chosen.values().filter(|c| f.problem.levels[**c as usize] > 0).count();
    Ok(format!(
        "{} relations over {} kinds intact, {moved} parts adjusted",
        f.plan.relations.len(),
        kinds.len()
    ))
}

fn optimality_sanity(fx: &[Fixture]) -> Outcome {
    let mut report = Vec::new();
    for f in fx {
        let originals = f.problem.originals().ok_or_else(|| format!("{}: no original per part", f.name))?;
        let base = f.problem.objective(&originals);
        let s = &f.plan.selection;
        ensure(s.objective <= base + 1e-12, || format!("{}: {} > originals {base}", f.name, s.objective))?;
        report.push(format!("{} {:.3}<={:.3}", f.name, s.objective, base));
    }
    Ok(report.join(", "))
}

fn orbit(model: &SegmentedModel, k: usize) -> Camera {
    let mut cam = default_camera(model, (1000, 800));
    let target = to_vec3(&cam.target);
    let offset = to_vec3(&cam.eye) - target;
    let up = model.up_axis.unit();
    let angle = 0.9 * k as f64;
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(up), angle);
    cam.eye = (target + rot * offset).into();
    cam
}

fn scan_lifetimes(t: &Tutorial) -> Result<(), String> {
    let n = t.guides.len();
    let mut first: Vec<Option<usize>> = vec![None; n];
    let mut last: Vec<Option<usize>> = vec![None; n];
    let mut erased_at: Vec<Option<usize>> = vec![None; n];
    for (s, step) in t.steps.iter().enumerate() {
        ensure(step.index == s, || format!("step {s} has index {}", step.index))?;
        for &g in &step.payload.guides {
            ensure(g < n, || format!("step {s} references unknown guide {g}"))?;
            ensure(erased_at[g].is_none(), || format!("guide {g} used at step {s} after erasure"))?;
            first[g].get_or_insert(s);
            last[g] = Some(s);
        }
        for &g in &step.payload.erased {
            ensure(step.kind == StepKind::EraseGuides, || format!("step {s} erases without being an erase step"))?;
            ensure(erased_at[g].is_none(), || format!("guide {g} erased twice"))?;
            erased_at[g] = Some(s);
        }
    }
    for (g, guide) in t.guides.iter().enumerate() {
        let (Some(f), Some(l), Some(e)) = (first[g], last[g], erased_at[g]) else {
            return Err(format!("guide {g} never drawn or never erased"));
        };
        ensure(e == l + 1, || format!("guide {g} last used at {l} but erased at {e}"))?;
        ensure(guide.first_step == f && guide.last_step == l, || format!("guide {g} lifetime metadata"))?;
        ensure(t.steps[f].kind == StepKind::DrawGuide || t.steps[f].kind == StepKind::DrawEllipse, || {
            format!("guide {g} first appears in a {:?} step", t.steps[f].kind)
        })?;
    }
    let tol = h2s_core::config::EngineConfig::default().guide_merge_tol * t.bbox_diagonal;
    for a in 0..n {
        for b in a + 1..n {
            let (p, q) = (t.guides[a].ends.map(|e| to_vec3(&e)), t.guides[b].ends.map(|e| to_vec3(&e)));
            let same = ((p[0] - q[0]).norm() <= tol && (p[1] - q[1]).norm() <= tol)
                || ((p[0] - q[1]).norm() <= tol && (p[1] - q[0]).norm() <= tol);
            ensure(!same, || format!("guides {a} and {b} coincide"))?;
        }
    }
    Ok(())
}

fn lifetime_correctness(fx: &[Fixture]) -> Outcome {
    let mut tutorials = 0;
    let mut guides = 0;
    for f in fx {
        for k in 0..4 {
            let camera = orbit(&f.model, k);
            for ability in [Ability::Novice, Ability::Apprentice, Ability::Master] {
                let t = compile(&f.plan, &camera, ability).map_err(|e| format!("{} view {k}: {e}", f.name))?;
                scan_lifetimes(&t).map_err(|e| format!("{} view {k} {ability:?}: {e}", f.name))?;
                tutorials += 1;
                guides += t.guides.len();
            }
        }
    }
    Ok(format!("{tutorials} tutorials, {guides} guides scanned"))
}

fn h2s() -> Command {
    Command::new(env!("CARGO_BIN_EXE_h2s"))
}

fn run_pipeline(input: &Path, outdir: &Path, extra: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let out = h2s()
        .arg("pipeline")
        .arg("--input")
        .arg(input)
        .arg("--outdir")
        .arg(outdir)
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(out.status.success(), || {
        format!("pipeline failed: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(elapsed)
}

fn read_dir_sorted(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn determinism(tmp: &Path) -> Outcome {
    let mut files = 0;
    for (name, model) in fixtures::all() {
        let input = tmp.join(format!("{name}.seg.json"));
        std::fs::write(&input, serialize_model(&model)).map_err(|e| e.to_string())?;
        let runs: Vec<_> = (0..2).map(|k| tmp.join(format!("{name}_run{k}"))).collect();
        for dir in &runs {
            run_pipeline(&input, dir, &["--ability", "novice"])?;
        }
        let (a, b) = (read_dir_sorted(&runs[0])?, read_dir_sorted(&runs[1])?);
        ensure(a.keys().eq(b.keys()), || format!("{name}: file sets differ"))?;
        for (file, bytes) in &a {
            ensure(&b[file] == bytes, || format!("{name}: {file} differs between runs"))?;
        }
        for required in ["plan.json", "tutorial.json", "step_000.svg", "contact_sheet.svg"] {
            ensure(a.contains_key(required), || format!("{name}: {required} missing"))?;
        }
        files += a.len();
    }
    Ok(format!("{files} files byte-identical across two cold runs"))
}

fn runtime_envelope(tmp: &Path) -> Outcome {
    let input = tmp.join("appliance8.seg.json");
    std::fs::write(&input, serialize_model(&fixtures::appliance8())).map_err(|e| e.to_string())?;
    let config = tmp.join("cap75.json");
    std::fs::write(&config, r#"{"candidate_cap": 75}"#).map_err(|e| e.to_string())?;
    let outdir = tmp.join("envelope");
    let elapsed = run_pipeline(&input, &outdir, &["--config", config.to_str().unwrap()])?;
    let plan = Plan::from_document(&std::fs::read_to_string(outdir.join("plan.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let parts = plan.primitives.len();
    let candidates = plan.candidates.candidates.len();
    ensure(parts == 8, || format!("fixture has {parts} parts"))?;
    ensure(candidates <= 600, || format!("{candidates} candidates"))?;
    ensure(plan.selection.optimal, || "solver did not prove optimality".into())?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("{parts} parts, {candidates} candidates, optimal, {elapsed:.2?}"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let fx = fixtures_with_plans();
    let criteria: Vec<(&str, Check)> = vec![
        ("solver exactness", Box::new(solver_exactness)),
        ("validity suite", Box::new(|| validity_suite(&fx))),
        ("linearization equivalence", Box::new(|| linearization_equivalence(&fx))),
        ("greedy gap", Box::new(|| greedy_gap(&fx))),
        ("10% pruning", Box::new(|| pruning_bound(&fx))),
        ("unguided penalty", Box::new(|| unguided_penalty(&fx))),
        ("projective construction suite", Box::new(projective_suite)),
        ("relation preservation", Box::new(|| relation_preservation(&fx))),
        ("optimality sanity", Box::new(|| optimality_sanity(&fx))),
        ("lifetime correctness", Box::new(|| lifetime_correctness(&fx))),
        ("determinism", Box::new(|| determinism(tmp.path()))),
        ("runtime envelope", Box::new(|| runtime_envelope(tmp.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
