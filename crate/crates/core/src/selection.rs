//! Choosing one candidate per part.
//!
//! Variables are binary, so the dependency constraint `x_c * x_p - x_c >= 0`
//! is exactly `x_c <= x_p` and the conflict constraint `x_a * x_b = 0` is
//! exactly `x_a + x_b <= 1`. The exact solver is a depth-first branch and
//! bound over parts with unit propagation of both forms plus the
//! exactly-one rule; returned selections are re-checked against the
//! quadratic forms.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::candidates::{cost_e_d, cost_e_e};
use crate::candidates::{CandId, CandidateSet};
use crate::primitives::PartId;
use crate::relations::Relation;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("malformed selection problem: {0}")]
    Malformed(String),
    #[error("no valid selection exists")]
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionProblem {
    /// Owning part of each candidate, indexed by candidate id.
    pub part_of: Vec<PartId>,
    pub costs: Vec<f64>,
    pub levels: Vec<u8>,
    pub per_part: BTreeMap<PartId, Vec<CandId>>,
    /// `(child, parent)`: choosing the child requires the parent.
    pub dependency_pairs: Vec<(CandId, CandId)>,
    /// Candidates that cannot be chosen together, smaller id first.
    pub conflict_pairs: Vec<(CandId, CandId)>,
    /// Volume of each part's original primitive (greedy order).
    pub volumes: BTreeMap<PartId, f64>,
}

impl SelectionProblem {
    pub fn new(
        part_of: Vec<PartId>,
        costs: Vec<f64>,
        levels: Vec<u8>,
        dependency_pairs: Vec<(CandId, CandId)>,
        conflict_pairs: Vec<(CandId, CandId)>,
        volumes: BTreeMap<PartId, f64>,
    ) -> Result<Self, SelectionError> {
        let n = part_of.len();
        if costs.len() != n || levels.len() != n {
            return Err(SelectionError::Malformed("per-candidate vectors differ in length".into()));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(SelectionError::Malformed("non-finite cost".into()));
        }
        let in_range = |id: CandId| (id as usize) < n;
        for &(a, b) in dependency_pairs.iter().chain(&conflict_pairs) {
            if !in_range(a) || !in_range(b) {
                return Err(SelectionError::Malformed(format!("pair ({a}, {b}) out of range")));
            }
        }
        let mut per_part: BTreeMap<PartId, Vec<CandId>> = BTreeMap::new();
        for (id, part) in part_of.iter().enumerate() {
            per_part.entry(*part).or_default().push(id as CandId);
        }
        let mut conflict_pairs: Vec<(CandId, CandId)> =
            conflict_pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        conflict_pairs.sort_unstable();
        conflict_pairs.dedup();
        let mut dependency_pairs = dependency_pairs;
        dependency_pairs.sort_unstable();
        dependency_pairs.dedup();
        Ok(SelectionProblem {
            part_of,
            costs,
            levels,
            per_part,
            dependency_pairs,
            conflict_pairs,
            volumes,
        })
    }

    pub fn objective(&self, chosen: &BTreeMap<PartId, CandId>) -> f64 {
        chosen.values().map(|c| self.costs[*c as usize]).sum()
    }

    /// Constraint violations of an assignment, evaluated on the quadratic
    /// forms over the indicator vector.
    pub fn violations(&self, chosen: &BTreeMap<PartId, CandId>) -> Vec<String> {
        let mut x = vec![0i64; self.part_of.len()];
        for c in chosen.values() {
            x[*c as usize] = 1;
        }
        let mut out = Vec::new();
        for (part, ids) in &self.per_part {
            let s: i64 = ids.iter().map(|c| x[*c as usize]).sum();
            if s != 1 {
                out.push(format!("part {part}: {s} candidates chosen"));
            }
        }
        for &(c, p) in &self.dependency_pairs {
            let (xc, xp) = (x[c as usize], x[p as usize]);
            if xc * xp - xc < 0 {
                out.push(format!("candidate {c} chosen without parent {p}"));
            }
        }
        for &(a, b) in &self.conflict_pairs {
            if x[a as usize] * x[b as usize] != 0 {
                out.push(format!("conflicting candidates {a} and {b} both chosen"));
            }
        }
        out
    }

    /// The level-0 candidate of every part, if each part has exactly one.
    pub fn originals(&self) -> Option<BTreeMap<PartId, CandId>> {
        let mut out = BTreeMap::new();
        for (part, ids) in &self.per_part {
            let roots: Vec<CandId> = ids.iter().copied().filter(|c| self.levels[*c as usize] == 0).collect();
            if roots.len() != 1 {
                return None;
            }
            out.insert(*part, roots[0]);
        }
        Some(out)
    }
}

/// Selection constraints for a candidate set: parent edges and, for every
/// relation, each cross pair that breaks it.
pub fn build_problem(set: &CandidateSet, relations: &[Relation], relation_tol: f64) -> SelectionProblem {
    let part_of = set.candidates.iter().map(|c| c.part_id).collect();
    let costs = set.candidates.iter().map(|c| c.cost()).collect();
    let levels = set.candidates.iter().map(|c| c.level).collect();
    let deps = set
        .candidates
        .iter()
        .flat_map(|c| c.parents.iter().map(move |p| (c.id, *p)))
        .collect();
    let per_part = set.per_part();
    let mut conflicts = Vec::new();
    for r in relations {
        let (Some(ci), Some(cj)) = (per_part.get(&r.i), per_part.get(&r.j)) else { continue };
        for a in ci {
            for b in cj {
                if !r.holds(&set.get(*a).geometry, &set.get(*b).geometry, relation_tol) {
                    conflicts.push((*a, *b));
                }
            }
        }
    }
    let volumes = set
        .candidates
        .iter()
        .filter(|c| c.level == 0)
        .map(|c| (c.part_id, c.geometry.volume()))
        .collect();
    SelectionProblem::new(part_of, costs, levels, deps, conflicts, volumes).expect("generated problem is well formed")
}

/// Parts and `(before, after)` edges of the anchoring DAG.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialOrder {
    pub parts: Vec<PartId>,
    pub edges: Vec<(PartId, PartId)>,
}

impl PartialOrder {
    /// Parts with no incoming edge.
    pub fn roots(&self) -> Vec<PartId> {
        let targets: BTreeSet<PartId> = self.edges.iter().map(|e| e.1).collect();
        self.parts.iter().copied().filter(|p| !targets.contains(p)).collect()
    }

    /// Whether `a` must precede `b`.
    pub fn precedes(&self, a: PartId, b: PartId) -> bool {
        let mut stack = vec![a];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            for &(s, t) in &self.edges {
                if s == x && seen.insert(t) {
                    if t == b {
                        return true;
                    }
                    stack.push(t);
                }
            }
        }
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: BTreeMap<PartId, CandId>,
    pub objective: f64,
    pub order: PartialOrder,
    pub optimal: bool,
    pub method: Method,
}

/// Anchoring DAG induced by the chosen candidates' parents.
pub fn extract_order(problem: &SelectionProblem, chosen: &BTreeMap<PartId, CandId>) -> PartialOrder {
    let picked: BTreeSet<CandId> = chosen.values().copied().collect();
    let mut edges: Vec<(PartId, PartId)> = problem
        .dependency_pairs
        .iter()
        .filter(|(c, _)| picked.contains(c))
        .map(|&(c, p)| (problem.part_of[p as usize], problem.part_of[c as usize]))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let order = PartialOrder {
        parts: chosen.keys().copied().collect(),
        edges,
    };
    for p in &order.parts {
        assert!(!order.precedes(*p, *p), "anchoring cycle through part {p}");
    }
    order
}

fn check_selection(problem: &SelectionProblem, chosen: &BTreeMap<PartId, CandId>) {
    let v = problem.violations(chosen);
    assert!(v.is_empty(), "selection violates constraints: {v:?}");
    let anchored = chosen.values().any(|c| problem.levels[*c as usize] > 0);
    if anchored {
        assert!(
            chosen.values().any(|c| problem.levels[*c as usize] == 0),
            "anchored selection without a level-0 root"
        );
    }
}

fn finish(problem: &SelectionProblem, chosen: BTreeMap<PartId, CandId>, optimal: bool, method: Method) -> Selection {
    check_selection(problem, &chosen);
    Selection {
        objective: problem.objective(&chosen),
        order: extract_order(problem, &chosen),
        chosen,
        optimal,
        method,
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
}

struct Graph {
    parts: Vec<PartId>,
    part_idx: Vec<usize>,
    /// Candidates of each part by ascending (cost, id).
    by_part: Vec<Vec<CandId>>,
    parents: Vec<Vec<CandId>>,
    children: Vec<Vec<CandId>>,
    conflicts: Vec<Vec<CandId>>,
}

impl Graph {
    fn new(p: &SelectionProblem) -> Graph {
        let parts: Vec<PartId> = p.per_part.keys().copied().collect();
        let index: BTreeMap<PartId, usize> = parts.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let n = p.part_of.len();
        let part_idx = p.part_of.iter().map(|q| index[q]).collect();
        let by_part = p
            .per_part
            .values()
            .map(|ids| {
                let mut v = ids.clone();
                v.sort_by(|a, b| p.costs[*a as usize].total_cmp(&p.costs[*b as usize]).then(a.cmp(b)));
                v
            })
            .collect();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(c, q) in &p.dependency_pairs {
            parents[c as usize].push(q);
            children[q as usize].push(c);
        }
        let mut conflicts = vec![Vec::new(); n];
        for &(a, b) in &p.conflict_pairs {
            conflicts[a as usize].push(b);
            conflicts[b as usize].push(a);
        }
        Graph {
            parts,
            part_idx,
            by_part,
            parents,
            children,
            conflicts,
        }
    }
}

#[derive(Clone)]
struct State {
    assigned: Vec<Option<CandId>>,
    allowed: Vec<bool>,
    remaining: Vec<usize>,
}

impl State {
    fn choose(&mut self, g: &Graph, c: CandId) -> bool {
        let k = g.part_idx[c as usize];
        match self.assigned[k] {
            Some(x) => return x == c,
            None if !self.allowed[c as usize] => return false,
            None => {}
        }
        self.assigned[k] = Some(c);
        for &x in &g.by_part[k] {
            if x != c && !self.forbid(g, x) {
                return false;
            }
        }
        for &x in &g.conflicts[c as usize] {
            if !self.forbid(g, x) {
                return false;
            }
        }
        for &p in &g.parents[c as usize] {
            if !self.choose(g, p) {
                return false;
            }
        }
        true
    }

    fn forbid(&mut self, g: &Graph, x: CandId) -> bool {
        if !self.allowed[x as usize] {
            return true;
        }
        let k = g.part_idx[x as usize];
        if self.assigned[k] == Some(x) {
            return false;
        }
        self.allowed[x as usize] = false;
        self.remaining[k] -= 1;
        if self.remaining[k] == 0 {
            return false;
        }
        for &c in &g.children[x as usize] {
            if !self.forbid(g, c) {
                return false;
            }
        }
        if self.remaining[k] == 1 && self.assigned[k].is_none() {
            let last = *g.by_part[k].iter().find(|c| self.allowed[**c as usize]).unwrap();
            return self.choose(g, last);
        }
        true
    }
}

struct Search<'a> {
    p: &'a SelectionProblem,
    g: Graph,
    best: Option<(f64, Vec<CandId>)>,
    deadline: Option<Instant>,
    timed_out: bool,
    nodes: u64,
}

fn tie_eps(best: f64) -> f64 {
    1e-9 * best.abs().max(1.0)
}

impl Search<'_> {
    fn offer(&mut self, obj: f64, vec: Vec<CandId>) {
        let better = match &self.best {
            None => true,
            Some((b, bv)) => obj < b - tie_eps(*b) || ((obj - b).abs() <= tie_eps(*b) && vec < *bv),
        };
        if better {
            self.best = Some((obj, vec));
        }
    }

    fn dfs(&mut self, s: State) {
        self.nodes += 1;
        if self.nodes % 1024 == 1 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                }
            }
        }
        if self.timed_out {
            return;
        }
        let mut bound = 0.0;
        let mut branch: Option<usize> = None;
        for k in 0..self.g.parts.len() {
            match s.assigned[k] {
                Some(c) => bound += self.p.costs[c as usize],
                None => {
                    let first = self.g.by_part[k].iter().find(|c| s.allowed[**c as usize]).unwrap();
                    bound += self.p.costs[*first as usize];
                    if branch.is_none_or(|b| s.remaining[k] < s.remaining[b]) {
                        branch = Some(k);
                    }
                }
            }
        }
        if let Some((b, _)) = &self.best {
            if bound > b + tie_eps(*b) {
                return;
            }
        }
        let Some(k) = branch else {
            let vec: Vec<CandId> = s.assigned.iter().map(|c| c.unwrap()).collect();
            let obj = vec.iter().map(|c| self.p.costs[*c as usize]).sum();
            self.offer(obj, vec);
            return;
        };
        let options: Vec<CandId> = self.g.by_part[k].iter().copied().filter(|c| s.allowed[*c as usize]).collect();
        for c in options {
            let mut next = s.clone();
            if next.choose(&self.g, c) {
                self.dfs(next);
            }
            if self.timed_out {
                return;
            }
        }
    }
}

fn to_map(g: &Graph, vec: &[CandId]) -> BTreeMap<PartId, CandId> {
    g.parts.iter().copied().zip(vec.iter().copied()).collect()
}

/// Globally optimal selection; ties resolve to the lexicographically
/// smallest vector of chosen ids (ordered by part). With a time limit the
/// best incumbent is returned with `optimal = false` once it expires.
pub fn solve(problem: &SelectionProblem, options: SolveOptions) -> Result<Selection, SelectionError> {
    let g = Graph::new(problem);
    let mut search = Search {
        p: problem,
        best: None,
        deadline: options.time_limit.map(|t| Instant::now() + t),
        timed_out: false,
        nodes: 0,
        g,
    };
    let mut seeds: Vec<BTreeMap<PartId, CandId>> = Vec::new();
    if let Some(o) = problem.originals() {
        seeds.push(o);
    }
    if let Some(gr) = greedy_assignment(problem) {
        seeds.push(gr);
    }
    for seed in seeds {
        if problem.violations(&seed).is_empty() {
            let vec: Vec<CandId> = seed.values().copied().collect();
            search.offer(problem.objective(&seed), vec);
        }
    }
    let start = State {
        assigned: vec![None; search.g.parts.len()],
        allowed: vec![true; problem.part_of.len()],
        remaining: search.g.by_part.iter().map(Vec::len).collect(),
    };
    // Parts whose single candidate is forced.
    let mut root = start;
    let mut feasible = true;
    for k in 0..search.g.parts.len() {
        if search.g.by_part[k].len() == 1 && !root.choose(&search.g, search.g.by_part[k][0]) {
            feasible = false;
        }
    }
    if feasible {
        search.dfs(root);
    }
    tracing::debug!(nodes = search.nodes, timed_out = search.timed_out, "branch and bound finished");
    let (_, vec) = search.best.clone().ok_or(SelectionError::Infeasible)?;
    let chosen = to_map(&search.g, &vec);
    Ok(finish(problem, chosen, !search.timed_out, Method::Exact))
}

fn greedy_assignment(problem: &SelectionProblem) -> Option<BTreeMap<PartId, CandId>> {
    let g = Graph::new(problem);
    let mut order: Vec<usize> = (0..g.parts.len()).collect();
    let vol = |k: usize| problem.volumes.get(&g.parts[k]).copied().unwrap_or(0.0);
    order.sort_by(|a, b| vol(*b).total_cmp(&vol(*a)).then(a.cmp(b)));
    let mut chosen: Vec<Option<CandId>> = vec![None; g.parts.len()];
    let mut done = vec![false; g.parts.len()];
    let compatible = |chosen: &[Option<CandId>], done: &[bool], c: CandId, strict_parents: bool| -> bool {
        let picked = |x: CandId| chosen[g.part_idx[x as usize]] == Some(x);
        g.conflicts[c as usize].iter().all(|x| !picked(*x))
            && g.parents[c as usize].iter().all(|p| {
                let k = g.part_idx[*p as usize];
                picked(*p) || (!strict_parents && !done[k])
            })
    };
    for (step, &k) in order.iter().enumerate() {
        let pick = g.by_part[k].iter().copied().find(|&c| {
            if !compatible(&chosen, &done, c, true) {
                return false;
            }
            let mut trial = chosen.clone();
            trial[k] = Some(c);
            let mut trial_done = done.clone();
            trial_done[k] = true;
            // Every later part must keep at least one usable candidate.
            order[step + 1..]
                .iter()
                .all(|&q| g.by_part[q].iter().any(|&x| compatible(&trial, &trial_done, x, false)))
        })?;
        chosen[k] = Some(pick);
        done[k] = true;
    }
    let map: BTreeMap<PartId, CandId> = g.parts.iter().copied().zip(chosen.into_iter().map(Option::unwrap)).collect();
    problem.violations(&map).is_empty().then_some(map)
}

/// Part-by-part greedy choice in descending original volume: each part
/// takes its cheapest candidate compatible with earlier picks. Falls back
/// to all originals if it paints itself into a corner.
pub fn greedy_baseline(problem: &SelectionProblem) -> Selection {
    let chosen = greedy_assignment(problem)
        .or_else(|| problem.originals())
        .expect("originals exist for every part");
    finish(problem, chosen, false, Method::Greedy)
}
