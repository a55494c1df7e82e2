//! Command-line surface. Each subcommand is a thin wrapper over the core
//! library; parsing and file handling live here.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use h2s_core::config::EngineConfig;
use h2s_core::doc;
use h2s_core::model_io::{load_model, ModelFormat, SegmentedModel};
use h2s_core::plan::{build_plan, Plan, PlanOptions};
use h2s_core::primitives::fit_all;
use h2s_core::projective::{Ability, Camera};
use h2s_core::relations::detect_relations;
use h2s_core::render::{export_tutorial, import_tutorial, write_sheets};
use h2s_core::tutorial::compile;
use serde_json::json;

use crate::service::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "h2s", version, about = "Construction-line drawing tutorials from segmented 3D models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit primitives to each segment and detect relations.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate candidates and select one per part.
    Plan {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        plan: PlanArgs,
        /// Print detected relations to stdout.
        #[arg(long)]
        dump_relations: bool,
        /// Write the candidate set document to this path.
        #[arg(long)]
        dump_candidates: Option<PathBuf>,
    },
    /// Compile a plan for one camera and ability level.
    Compile {
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render every step of a tutorial to SVG.
    Render {
        #[arg(long)]
        tutorial: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// fit, plan, compile and render in one go.
    Pipeline {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Serve plans over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, required_unless_present = "model")]
        plan: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        plan_args: PlanArgs,
    },
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Use the greedy baseline instead of the exact solver.
    #[arg(long)]
    pub greedy: bool,
    /// Solver budget in seconds; the best incumbent is kept on expiry.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Engine configuration document (JSON); missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    /// eye_x,eye_y,eye_z,target_x,target_y,target_z,up_x,up_y,up_z,fov_degrees
    #[arg(long, value_parser = parse_view)]
    pub view: Option<[f64; 10]>,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size, default_value = "1000x1000")]
    pub size: (u32, u32),
    #[arg(long, default_value = "novice")]
    pub ability: Ability,
}

pub fn parse_view(s: &str) -> Result<[f64; 10], String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}")))
        .collect::<Result<_, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 10 comma-separated numbers, got {}", v.len()))
}

pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    Ok((w, h))
}

/// Three-quarter view from above, framing the whole model.
pub fn default_camera(model: &SegmentedModel, size: (u32, u32)) -> Camera {
    let bbox = model.bbox();
    let center: [f64; 3] = std::array::from_fn(|k| 0.5 * (bbox.min[k] + bbox.max[k]));
    let up = model.up_axis.index();
    let (a, b) = match up {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let d = 1.6 * model.bbox_diagonal;
    let mut eye = center;
    eye[a] += 0.62 * d;
    eye[b] += 0.71 * d;
    eye[up] += 0.45 * d;
    let mut up_vec = [0.0; 3];
    up_vec[up] = 1.0;
    Camera {
        eye,
        target: center,
        up: up_vec,
        vertical_fov: 35.0,
        width: size.0,
        height: size.1,
    }
}

impl ViewArgs {
    pub fn camera(&self, model: &SegmentedModel) -> Camera {
        match self.view {
            Some(v) => Camera {
                eye: [v[0], v[1], v[2]],
                target: [v[3], v[4], v[5]],
                up: [v[6], v[7], v[8]],
                vertical_fov: v[9],
                width: self.size.0,
                height: self.size.1,
            },
            None => default_camera(model, self.size),
        }
    }
}

impl PlanArgs {
    pub fn config(&self) -> Result<EngineConfig> {
        let config = match &self.config {
            Some(path) => {
                let text = read(path)?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => EngineConfig::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn options(&self) -> Result<PlanOptions> {
        let time_limit = match self.time_limit {
            Some(s) if !(s.is_finite() && s >= 0.0) => bail!("--time-limit must be a non-negative number"),
            Some(s) => Some(Duration::from_secs_f64(s)),
            None => None,
        };
        Ok(PlanOptions {
            greedy: self.greedy,
            time_limit,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(input: &Path) -> Result<SegmentedModel> {
    Ok(load_model(input, ModelFormat::from_path(input))?)
}

pub fn load_plan(path: &Path) -> Result<Plan> {
    Ok(Plan::from_document(&read(path)?)?)
}

fn make_plan(input: &Path, args: &PlanArgs) -> Result<Plan> {
    let model = load(input)?;
    let plan = build_plan(&model, &args.config()?, args.options()?)?;
    if !plan.selection.optimal {
        tracing::warn!(objective = plan.selection.objective, "time limit reached; keeping best incumbent");
    }
    Ok(plan)
}

pub fn fit_document(model: &SegmentedModel, config: &EngineConfig) -> String {
    let primitives = fit_all(model);
    let relations = detect_relations(&primitives, config, model.bbox_diagonal);
    doc::to_canonical_string(&json!({
        "version": 1,
        "up_axis": model.up_axis,
        "primitives": primitives,
        "relations": relations,
    }))
}

/// fit → plan → compile → render into `outdir`.
pub fn run_pipeline(input: &Path, plan_args: &PlanArgs, view: &ViewArgs, outdir: &Path) -> Result<()> {
    let plan = make_plan(input, plan_args)?;
    std::fs::create_dir_all(outdir).with_context(|| format!("creating {}", outdir.display()))?;
    std::fs::write(outdir.join("plan.json"), plan.to_document())?;
    let camera = view.camera(&plan.model);
    let tutorial = compile(&plan, &camera, view.ability)?;
    std::fs::write(outdir.join("tutorial.json"), export_tutorial(&tutorial))?;
    let written = write_sheets(&tutorial, outdir)?;
    tracing::info!(steps = tutorial.steps.len(), files = written.len() + 2, "pipeline done");
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { input, output } => {
            let model = load(&input)?;
            emit(&fit_document(&model, &EngineConfig::default()), output.as_deref())
        }
        Command::Plan {
            input,
            output,
            plan,
            dump_relations,
            dump_candidates,
        } => {
            let plan = make_plan(&input, &plan)?;
            if dump_relations {
                println!("{}", doc::to_canonical_string(&plan.relations).trim_end());
            }
            if let Some(path) = dump_candidates {
                emit(&doc::to_canonical_string(&plan.candidates), Some(&path))?;
            }
            emit(&plan.to_document(), output.as_deref())
        }
        Command::Compile { plan, view, output } => {
            let plan = load_plan(&plan)?;
            let camera = view.camera(&plan.model);
            let tutorial = compile(&plan, &camera, view.ability)?;
            emit(&export_tutorial(&tutorial), output.as_deref())
        }
        Command::Render { tutorial, outdir } => {
            let tutorial = import_tutorial(&read(&tutorial)?)?;
            write_sheets(&tutorial, &outdir)?;
            Ok(())
        }
        Command::Pipeline {
            input,
            plan,
            view,
            outdir,
        } => run_pipeline(&input, &plan, &view, &outdir),
        Command::Serve {
            port,
            plan,
            model,
            plan_args,
        } => {
            let plan = match (plan, model) {
                (Some(path), _) => load_plan(&path)?,
                (None, Some(model)) => make_plan(&model, &plan_args)?,
                (None, None) => bail!("either --plan or --model is required"),
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(service::serve(AppState::new(plan), port))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_view_and_size() {
        let v = parse_view("1,2,3, 0,0,0,0,1,0,40").unwrap();
        assert_eq!(v[2], 3.0);
        assert_eq!(v[9], 40.0);
        assert!(parse_view("1,2,3").is_err());
        assert!(parse_view("a,2,3,0,0,0,0,1,0,40").is_err());
        assert_eq!(parse_size("640x480").unwrap(), (640, 480));
        assert!(parse_size("640").is_err());
    }

    #[test]
    fn default_camera_is_valid_for_fixtures() {
        for (_, model) in h2s_core::fixtures::all() {
            default_camera(&model, (800, 600)).validate().unwrap();
        }
    }
}
