//! View-independent planning: fit, relate, generate candidates, select.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{generate_candidates, Candidate, CandidateSet};
use crate::config::{ConfigError, EngineConfig};
use crate::doc;
use crate::model_io::{self, SegmentedModel};
use crate::primitives::{fit_all, PartId, Primitive, PrimitiveKind};
use crate::relations::{detect_relations, distance_tolerance, Relation};
use crate::selection::{build_problem, greedy_baseline, solve, Selection, SelectionError, SelectionProblem, SolveOptions};

pub const PLAN_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("malformed plan document: {0}")]
    Document(String),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PlanOptions {
    pub greedy: bool,
    pub time_limit: Option<Duration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub version: u32,
    pub config: EngineConfig,
    pub config_hash: String,
    #[serde(with = "model_io::as_document")]
    pub model: SegmentedModel,
    /// Fitted primitive per segment, custom parts included.
    pub primitives: Vec<Primitive>,
    pub relations: Vec<Relation>,
    pub candidates: CandidateSet,
    pub selection: Selection,
}

impl Plan {
    pub fn primitive(&self, part: PartId) -> Option<&Primitive> {
        self.primitives.iter().find(|p| p.part_id == part)
    }

    pub fn chosen(&self, part: PartId) -> Option<&Candidate> {
        self.selection.chosen.get(&part).map(|c| self.candidates.get(*c))
    }

    pub fn custom_parts(&self) -> Vec<PartId> {
        self.primitives
            .iter()
            .filter(|p| p.kind == PrimitiveKind::Custom)
            .map(|p| p.part_id)
            .collect()
    }

    pub fn part_name(&self, part: PartId) -> &str {
        self.model.segment(part).map_or("part", |s| s.name.as_str())
    }

    pub fn relation_tolerance(&self) -> f64 {
        distance_tolerance(&self.config, self.model.bbox_diagonal)
    }

    pub fn problem(&self) -> SelectionProblem {
        build_problem(&self.candidates, &self.relations, self.relation_tolerance())
    }

    pub fn to_document(&self) -> String {
        doc::to_canonical_string(self)
    }

    pub fn from_document(text: &str) -> Result<Plan, PlanError> {
        let plan: Plan = serde_json::from_str(text).map_err(|e| PlanError::Document(e.to_string()))?;
        if plan.version != PLAN_VERSION {
            return Err(PlanError::Document(format!("unsupported version {}", plan.version)));
        }
        plan.config.validate()?;
        let n = plan.candidates.candidates.len();
        for (i, c) in plan.candidates.candidates.iter().enumerate() {
            if c.id as usize != i || c.parents.iter().any(|p| *p as usize >= n) {
                return Err(PlanError::Document(format!("candidate {i} has bad ids")));
            }
        }
        if plan.selection.chosen.iter().any(|(part, c)| {
            plan.candidates.candidates.get(*c as usize).is_none_or(|cand| cand.part_id != *part)
        }) {
            return Err(PlanError::Document("selection references unknown candidates".into()));
        }
        Ok(plan)
    }
}

/// Runs the view-independent pipeline. The returned plan is already in
/// canonical (rounded) form, so it equals its own document round trip.
pub fn build_plan(model: &SegmentedModel, config: &EngineConfig, options: PlanOptions) -> Result<Plan, PlanError> {
    config.validate()?;
    let diag = model.bbox_diagonal;
    let primitives = fit_all(model);
    let relations = detect_relations(&primitives, config, diag);
    let candidates = generate_candidates(&primitives, &relations, config, diag);
    let problem = build_problem(&candidates, &relations, distance_tolerance(config, diag));
    let selection = if options.greedy {
        greedy_baseline(&problem)
    } else {
        solve(&problem, SolveOptions { time_limit: options.time_limit })?
    };
    tracing::info!(
        parts = primitives.len(),
        relations = relations.len(),
        candidates = candidates.candidates.len(),
        objective = selection.objective,
        optimal = selection.optimal,
        "plan ready"
    );
    let plan = Plan {
        version: PLAN_VERSION,
        config_hash: config.hash(),
        config: config.clone(),
        model: model.clone(),
        primitives,
        relations,
        candidates,
        selection,
    };
    Ok(doc::canonicalize(&plan))
}
