//! Superpixel grouping as a multicut with mask incentives.
//!
//! Every superpixel edge `e` carries a contour indicator `d_e ∈ {0, 1}` and
//! every propagated mask `c` a reward `h_c`. A grouping is scored as
//!
//! ```text
//! Σ_e (d_e − θ) · [e joined]  −  Σ_c h_c · [all superpixels of c in one region]
//! ```
//!
//! and minimised. The merge bias `θ` makes contour-free edges attractive; the
//! unbiased objective is minimised by cutting everything.
//!
//! The solver relaxes the edge indicators to `[0, 1]`, adds violated cycle
//! inequalities and mask connectivity cuts lazily, and branches on
//! fractional variables while the node budget lasts. Whatever bound it
//! ends with, the incumbent is polished by local merge/move search.

use std::collections::{BTreeSet, HashMap};

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, Variable};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    DisjointSets, ImageRecord, Partition, PropagationRecord, Superpixel, SuperpixelGraph,
};
use crate::error::{Error, Result};
use crate::graphcut::{max_flow, FlowNetwork};
use crate::raster::Grid;

pub const DEFAULT_MERGE_BIAS: f64 = 0.5;
/// A superpixel counts as covered by a mask when at least this fraction of
/// its pixels lies under it.
pub const COVERAGE_THRESHOLD: f64 = 0.5;

const MAX_SEPARATION_ROUNDS: usize = 50;
const MAX_BRANCH_NODES: usize = 400;
const MAX_CUTS_PER_ROUND: usize = 400;
const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub u: usize,
    pub v: usize,
    /// Contour indicator, 0 or 1.
    pub d: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskConstraint {
    pub members: Vec<usize>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticutInstance {
    pub node_count: usize,
    pub edges: Vec<WeightedEdge>,
    pub masks: Vec<MaskConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticutSolution {
    pub partition: Partition,
    /// Biased objective of `partition`.
    pub objective: f64,
    /// Per mask: all members share one region.
    pub mask_active: Vec<bool>,
    /// The search closed the gap (as opposed to stopping at the node budget).
    pub proven_optimal: bool,
}

impl MulticutInstance {
    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::malformed("multicut instance has no nodes"));
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if e.u == e.v || e.u >= self.node_count || e.v >= self.node_count {
                return Err(Error::malformed(format!("invalid edge ({}, {})", e.u, e.v)));
            }
            if e.d > 1 {
                return Err(Error::malformed(format!(
                    "edge ({}, {}) has d = {}",
                    e.u, e.v, e.d
                )));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::malformed(format!(
                    "duplicate edge ({}, {})",
                    e.u, e.v
                )));
            }
        }
        for (i, m) in self.masks.iter().enumerate() {
            let uniq: BTreeSet<_> = m.members.iter().collect();
            if uniq.len() < 2 || uniq.len() != m.members.len() {
                return Err(Error::malformed(format!(
                    "mask {i} needs at least two distinct members"
                )));
            }
            if m.members.iter().any(|&s| s >= self.node_count) {
                return Err(Error::malformed(format!("mask {i} member out of range")));
            }
            if !m.reward.is_finite() || m.reward < 0.0 {
                return Err(Error::malformed(format!(
                    "mask {i} reward must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.u, e.v)).collect()
    }

    /// Objective and mask activity of `partition` after splitting its
    /// regions into connected pieces; returns the refined partition too.
    pub fn evaluate(&self, partition: &Partition, theta: f64) -> (Partition, f64, Vec<bool>) {
        let refined = partition.connected_refinement(&self.pairs());
        let (obj, active) = self.score_connected(&refined, theta);
        (refined, obj, active)
    }

    fn score_connected(&self, p: &Partition, theta: f64) -> (f64, Vec<bool>) {
        let mut obj = 0.0;
        for e in &self.edges {
            if p.same_region(e.u, e.v) {
                obj += e.d as f64 - theta;
            }
        }
        let active: Vec<bool> = self
            .masks
            .iter()
            .map(|m| m.members.iter().all(|&s| p.same_region(s, m.members[0])))
            .collect();
        for (m, &a) in self.masks.iter().zip(&active) {
            if a {
                obj -= m.reward;
            }
        }
        (obj, active)
    }

    fn solution(
        &self,
        partition: &Partition,
        theta: f64,
        proven_optimal: bool,
    ) -> MulticutSolution {
        let (partition, objective, mask_active) = self.evaluate(partition, theta);
        MulticutSolution {
            partition,
            objective,
            mask_active,
            proven_optimal,
        }
    }
}

/// 1 when a contour pixel lies on the shared boundary of `u` and `v`.
///
/// The shared boundary is every pixel of `u` 4-adjacent to a pixel of `v`,
/// together with that neighbour.
pub fn edge_dissimilarity(image: &ImageRecord, u: &Superpixel, v: &Superpixel) -> Result<u8> {
    let map = &image.superpixel_map;
    let (uid, vid) = (u.id as u32, v.id as u32);
    let mut adjacent = false;
    for row in u.bbox.top..u.bbox.bottom {
        for col in u.bbox.left..u.bbox.right {
            if *map.get(row, col) != uid {
                continue;
            }
            for (nr, nc) in map.neighbors4(row, col) {
                if *map.get(nr, nc) == vid {
                    adjacent = true;
                    if *image.contour_map.get(row, col) || *image.contour_map.get(nr, nc) {
                        return Ok(1);
                    }
                }
            }
        }
    }
    if adjacent {
        Ok(0)
    } else {
        Err(Error::InvalidEdge(
            u.id,
            v.id,
            "superpixels are not 4-adjacent".into(),
        ))
    }
}

/// Contour indicators for every edge of `graph`, in edge order.
pub fn edge_dissimilarities(image: &ImageRecord, graph: &SuperpixelGraph) -> Vec<u8> {
    let index: HashMap<(usize, usize), usize> = graph
        .edges
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();
    let mut d = vec![0u8; graph.edges.len()];
    let map = &image.superpixel_map;
    let (h, w) = (map.height(), map.width());
    for row in 0..h {
        for col in 0..w {
            let s = *map.get(row, col) as usize;
            for (nr, nc) in [(row + 1, col), (row, col + 1)] {
                if nr >= h || nc >= w {
                    continue;
                }
                let t = *map.get(nr, nc) as usize;
                if t != s && (*image.contour_map.get(row, col) || *image.contour_map.get(nr, nc)) {
                    d[index[&(s.min(t), s.max(t))]] = 1;
                }
            }
        }
    }
    d
}

/// Superpixels with at least half of their pixels under `mask`.
pub fn covered_superpixels(graph: &SuperpixelGraph, mask: &Grid<bool>) -> Vec<usize> {
    graph
        .pixels
        .iter()
        .enumerate()
        .filter(|(_, pix)| {
            let under = pix.iter().filter(|&&p| mask.as_slice()[p]).count();
            under as f64 >= COVERAGE_THRESHOLD * pix.len() as f64
        })
        .map(|(s, _)| s)
        .collect()
}

/// Normalised total area of the covered superpixels.
pub fn mask_consistency(graph: &SuperpixelGraph, covered: &[usize]) -> f64 {
    let area: usize = covered
        .iter()
        .map(|&s| graph.superpixels[s].pixel_count)
        .sum();
    area as f64 / (graph.width * graph.height) as f64
}

/// The grouping instance of one image under the given propagations.
/// Masks covering fewer than two superpixels are dropped.
pub fn build_instance(
    image: &ImageRecord,
    graph: &SuperpixelGraph,
    propagations: &[&PropagationRecord],
) -> MulticutInstance {
    let d = edge_dissimilarities(image, graph);
    let edges = graph
        .edges
        .iter()
        .zip(&d)
        .map(|(&(u, v), &d)| WeightedEdge { u, v, d })
        .collect();
    let masks = propagations
        .iter()
        .filter_map(|p| {
            let placed = p.placed_mask(graph.width, graph.height);
            let covered = covered_superpixels(graph, &placed);
            (covered.len() >= 2).then(|| MaskConstraint {
                reward: mask_consistency(graph, &covered),
                members: covered,
            })
        })
        .collect();
    MulticutInstance {
        node_count: graph.len(),
        edges,
        masks,
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::malformed(format!(
            "merge bias {theta} must lie in (0, 1)"
        )))
    }
}

/// Largest instance [`brute_force_multicut`] accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 10;

/// Exact optimum by enumerating every set partition (restricted growth
/// strings). Ties keep the first partition in enumeration order.
pub fn brute_force_multicut(instance: &MulticutInstance, theta: f64) -> Result<MulticutSolution> {
    instance.validate()?;
    check_theta(theta)?;
    let n = instance.node_count;
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::OracleTooLarge(format!(
            "{n} nodes exceeds the {BRUTE_FORCE_MAX_NODES}-node enumeration limit"
        )));
    }
    let pairs = instance.pairs();
    let mut rgs = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    let mut best: Option<(f64, Partition)> = None;
    loop {
        let p = Partition::from_assignment(&rgs).connected_refinement(&pairs);
        let (obj, _) = instance.score_connected(&p, theta);
        if best.as_ref().is_none_or(|(b, _)| obj < *b - 1e-12) {
            best = Some((obj, p));
        }
        // next restricted growth string
        let mut i = n;
        loop {
            if i <= 1 {
                let (_, p) = best.expect("at least one partition");
                return Ok(instance.solution(&p, theta, true));
            }
            i -= 1;
            if rgs[i] <= maxes[i - 1] {
                rgs[i] += 1;
                let m = maxes[i - 1].max(rgs[i]);
                maxes[i] = m;
                for j in i + 1..n {
                    rgs[j] = 0;
                    maxes[j] = m;
                }
                break;
            }
        }
    }
}

/// Solves the grouping problem; see the module docs for the method.
pub fn solve_multicut(instance: &MulticutInstance, theta: f64) -> Result<MulticutSolution> {
    instance.validate()?;
    check_theta(theta)?;
    if instance.edges.is_empty() {
        return Ok(instance.solution(&Partition::singletons(instance.node_count), theta, true));
    }
    let mut search = Search::new(instance, theta);
    let proven = search.run();
    let best = search.incumbent.clone();
    let polished = local_search(instance, theta, best);
    Ok(instance.solution(&polished, theta, proven))
}

struct Search<'a> {
    inst: &'a MulticutInstance,
    theta: f64,
    adj: Vec<Vec<(usize, usize)>>,
    edge_index: HashMap<(usize, usize), usize>,
    x: Vec<Variable>,
    z: Vec<Variable>,
    constant: f64,
    incumbent: Partition,
    incumbent_obj: f64,
    nodes: usize,
}

enum NodeOutcome {
    Infeasible,
    Bounded(Box<Solution>),
}

impl<'a> Search<'a> {
    fn new(inst: &'a MulticutInstance, theta: f64) -> Self {
        let mut adj = vec![Vec::new(); inst.node_count];
        let mut edge_index = HashMap::new();
        for (i, e) in inst.edges.iter().enumerate() {
            adj[e.u].push((e.v, i));
            adj[e.v].push((e.u, i));
            edge_index.insert((e.u.min(e.v), e.u.max(e.v)), i);
        }
        // warm start: join every contour-free edge
        let joined: Vec<bool> = inst.edges.iter().map(|e| e.d == 0).collect();
        let start = Partition::from_edge_labels(inst.node_count, &inst.pairs(), &joined);
        let start = local_search(inst, theta, start);
        let (start, obj, _) = inst.evaluate(&start, theta);
        Search {
            inst,
            theta,
            adj,
            edge_index,
            x: Vec::new(),
            z: Vec::new(),
            constant: 0.0,
            incumbent: start,
            incumbent_obj: obj,
            nodes: 0,
        }
    }

    fn offer(&mut self, p: Partition) {
        let p = local_search(self.inst, self.theta, p);
        let (p, obj, _) = self.inst.evaluate(&p, self.theta);
        if obj < self.incumbent_obj - 1e-12 {
            self.incumbent = p;
            self.incumbent_obj = obj;
        }
    }

    /// Branch and cut; returns whether optimality was proven.
    fn run(&mut self) -> bool {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        // x_e = 1 means the edge is cut: Σ (d−θ)(1−x) = const + Σ (θ−d) x
        for e in &self.inst.edges {
            self.constant += e.d as f64 - self.theta;
            self.x
                .push(problem.add_var(self.theta - e.d as f64, (0.0, 1.0)));
        }
        let comps = self.components();
        for m in &self.inst.masks {
            let reachable = m.members.iter().all(|&s| comps[s] == comps[m.members[0]]);
            let ub = if reachable { 1.0 } else { 0.0 };
            self.z.push(problem.add_var(-m.reward, (0.0, ub)));
        }
        let root = match problem.solve() {
            Ok(s) => s,
            Err(_) => return false,
        };
        let mut stack = vec![root];
        let mut proven = true;
        while let Some(sol) = stack.pop() {
            if self.nodes >= MAX_BRANCH_NODES {
                proven = false;
                break;
            }
            self.nodes += 1;
            let (sol, converged) = match self.cut_loop(sol) {
                NodeOutcome::Infeasible => continue,
                NodeOutcome::Bounded(s) => {
                    let converged = self.separate(&s).is_empty();
                    (s, converged)
                }
            };
            let bound = sol.objective() + self.constant;
            if bound >= self.incumbent_obj - 1e-9 {
                continue;
            }
            let xs: Vec<f64> = self.x.iter().map(|&v| sol[v]).collect();
            let zs: Vec<f64> = self.z.iter().map(|&v| sol[v]).collect();
            let rounded = self.round(&xs);
            let integral = xs.iter().chain(&zs).all(|&v| v.min(1.0 - v) < EPS);
            if integral && converged {
                // the LP optimum is a feasible grouping: node solved
                self.offer(rounded);
                continue;
            }
            self.offer(rounded);
            if bound >= self.incumbent_obj - 1e-9 {
                continue;
            }
            let Some((var, value)) = self.branch_variable(&xs, &zs) else {
                // integral but cuts still violated after the round cap
                proven = false;
                continue;
            };
            // explore the side nearer the LP value first (pushed last)
            let near = if value >= 0.5 { 1.0 } else { 0.0 };
            for side in [1.0 - near, near] {
                if let Ok(child) = sol.clone().fix_var(var, side) {
                    stack.push(child);
                }
            }
        }
        proven
    }

    fn components(&self) -> Vec<usize> {
        let mut dsu = DisjointSets::new(self.inst.node_count);
        for e in &self.inst.edges {
            dsu.union(e.u, e.v);
        }
        (0..self.inst.node_count).map(|i| dsu.find(i)).collect()
    }

    fn cut_loop(&self, mut sol: Solution) -> NodeOutcome {
        for _ in 0..MAX_SEPARATION_ROUNDS {
            let cuts = self.separate(&sol);
            if cuts.is_empty() {
                break;
            }
            for (expr, rhs) in cuts {
                match sol.add_constraint(expr, ComparisonOp::Le, rhs) {
                    Ok(s) => sol = s,
                    Err(_) => return NodeOutcome::Infeasible,
                }
            }
        }
        NodeOutcome::Bounded(Box::new(sol))
    }

    fn separate(&self, sol: &Solution) -> Vec<(LinearExpr, f64)> {
        let xs: Vec<f64> = self.x.iter().map(|&v| sol[v]).collect();
        let zs: Vec<f64> = self.z.iter().map(|&v| sol[v]).collect();
        let mut cuts = self.short_cycle_cuts(&xs);
        if cuts.is_empty() {
            cuts = self.path_cycle_cuts(&xs);
        }
        cuts.extend(self.mask_cuts(&xs, &zs));
        cuts
    }

    fn cycle_cut(&self, e: usize, path: &[usize]) -> (LinearExpr, f64) {
        // x_e − Σ_path x_f ≤ 0
        let mut expr = LinearExpr::empty();
        expr.add(self.x[e], 1.0);
        for &f in path {
            expr.add(self.x[f], -1.0);
        }
        (expr, 0.0)
    }

    /// Violated cycle inequalities on cycles of length 3 and 4.
    fn short_cycle_cuts(&self, xs: &[f64]) -> Vec<(LinearExpr, f64)> {
        let mut cuts = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, e) in self.inst.edges.iter().enumerate() {
            if xs[i] < EPS {
                continue;
            }
            let mut best: Option<(f64, Vec<usize>)> = None;
            for &(a, ua) in &self.adj[e.u] {
                if a == e.v {
                    continue;
                }
                if let Some(&av) = self.edge_index.get(&(a.min(e.v), a.max(e.v))) {
                    let len = xs[ua] + xs[av];
                    if best.as_ref().is_none_or(|(b, _)| len < *b) {
                        best = Some((len, vec![ua, av]));
                    }
                }
                for &(b, bv) in &self.adj[e.v] {
                    if b == e.u || b == a {
                        continue;
                    }
                    if let Some(&ab) = self.edge_index.get(&(a.min(b), a.max(b))) {
                        let len = xs[ua] + xs[ab] + xs[bv];
                        if best.as_ref().is_none_or(|(bl, _)| len < *bl) {
                            best = Some((len, vec![ua, ab, bv]));
                        }
                    }
                }
            }
            if let Some((len, path)) = best {
                if len < xs[i] - EPS {
                    let mut key = path.clone();
                    key.push(i);
                    key.sort_unstable();
                    if seen.insert(key) {
                        cuts.push(self.cycle_cut(i, &path));
                        if cuts.len() >= MAX_CUTS_PER_ROUND {
                            break;
                        }
                    }
                }
            }
        }
        cuts
    }

    /// Violated cycle inequalities found by shortest paths under weights `x`.
    fn path_cycle_cuts(&self, xs: &[f64]) -> Vec<(LinearExpr, f64)> {
        let mut cuts = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, e) in self.inst.edges.iter().enumerate() {
            if xs[i] < EPS {
                continue;
            }
            if let Some((len, path)) = self.shortest_path(e.u, e.v, i, xs) {
                if len < xs[i] - EPS {
                    let mut key = path.clone();
                    key.push(i);
                    key.sort_unstable();
                    if seen.insert(key) {
                        cuts.push(self.cycle_cut(i, &path));
                        if cuts.len() >= MAX_CUTS_PER_ROUND {
                            break;
                        }
                    }
                }
            }
        }
        cuts
    }

    /// Dijkstra from `from` to `to` avoiding edge `skip`; returns the edge path.
    fn shortest_path(
        &self,
        from: usize,
        to: usize,
        skip: usize,
        xs: &[f64],
    ) -> Option<(f64, Vec<usize>)> {
        let n = self.inst.node_count;
        let mut dist = vec![f64::INFINITY; n];
        let mut via = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut heap = std::collections::BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(HeapItem(0.0, from));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == to {
                break;
            }
            for &(v, e) in &self.adj[u] {
                if e == skip {
                    continue;
                }
                let nd = d + xs[e].max(0.0);
                if nd < dist[v] {
                    dist[v] = nd;
                    via[v] = e;
                    heap.push(HeapItem(nd, v));
                }
            }
        }
        if !dist[to].is_finite() {
            return None;
        }
        let mut path = Vec::new();
        let mut v = to;
        while v != from {
            let e = via[v];
            path.push(e);
            let edge = &self.inst.edges[e];
            v = if edge.u == v { edge.v } else { edge.u };
        }
        Some((dist[to], path))
    }

    /// `z_c + Σ_{e∈δ} x_e ≤ |δ|` for member pairs separated by a cut `δ`
    /// whose joined capacity `Σ (1 − x_e)` is below `z_c`.
    fn mask_cuts(&self, xs: &[f64], zs: &[f64]) -> Vec<(LinearExpr, f64)> {
        let mut cuts = Vec::new();
        let n = self.inst.node_count;
        for (c, m) in self.inst.masks.iter().enumerate() {
            if zs[c] < EPS {
                continue;
            }
            let root = m.members[0];
            for &other in &m.members[1..] {
                let Ok(mut net) = FlowNetwork::new(n, root, other) else {
                    continue;
                };
                for (i, e) in self.inst.edges.iter().enumerate() {
                    let cap = (1.0 - xs[i]).clamp(0.0, 1.0);
                    let _ = net.add_arc(e.u, e.v, cap);
                    let _ = net.add_arc(e.v, e.u, cap);
                }
                let Ok(cut) = max_flow(&net) else { continue };
                if cut.cut_capacity < zs[c] - EPS {
                    let mut expr = LinearExpr::empty();
                    expr.add(self.z[c], 1.0);
                    let mut size = 0.0;
                    for (i, e) in self.inst.edges.iter().enumerate() {
                        if cut.source_side[e.u] != cut.source_side[e.v] {
                            expr.add(self.x[i], 1.0);
                            size += 1.0;
                        }
                    }
                    cuts.push((expr, size));
                    break;
                }
            }
        }
        cuts
    }

    fn round(&self, xs: &[f64]) -> Partition {
        let joined: Vec<bool> = xs.iter().map(|&x| x < 0.5).collect();
        Partition::from_edge_labels(self.inst.node_count, &self.inst.pairs(), &joined)
    }

    fn branch_variable(&self, xs: &[f64], zs: &[f64]) -> Option<(Variable, f64)> {
        let frac = |v: f64| v.min(1.0 - v);
        let mut best: Option<(f64, Variable, f64)> = None;
        for (&var, &val) in self.x.iter().zip(xs).chain(self.z.iter().zip(zs)) {
            let f = frac(val);
            if f >= EPS && best.is_none_or(|(bf, _, _)| f > bf + 1e-12) {
                best = Some((f, var, val));
            }
        }
        best.map(|(_, var, val)| (var, val))
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // min-heap on distance, then node id
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// First-improvement local search over single-node moves (to a neighbouring
/// region or a fresh one) and merges of adjacent regions.
pub fn local_search(instance: &MulticutInstance, theta: f64, start: Partition) -> Partition {
    let pairs = instance.pairs();
    let (mut current, mut obj, _) = instance.evaluate(&start, theta);
    let mut adj = vec![Vec::new(); instance.node_count];
    for &(u, v) in &pairs {
        adj[u].push(v);
        adj[v].push(u);
    }
    loop {
        let mut improved = false;
        // single-node moves
        for v in 0..instance.node_count {
            let own = current.assignment[v];
            let mut targets: Vec<usize> = adj[v]
                .iter()
                .map(|&u| current.assignment[u])
                .filter(|&r| r != own)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            targets.push(current.region_count); // fresh region
            for r in targets {
                let mut raw = current.assignment.clone();
                raw[v] = r;
                let (cand, cand_obj, _) =
                    instance.evaluate(&Partition::from_assignment(&raw), theta);
                if cand_obj < obj - 1e-12 {
                    current = cand;
                    obj = cand_obj;
                    improved = true;
                    break;
                }
            }
        }
        // merges of adjacent regions
        for (a, b) in current.region_adjacency(&pairs) {
            let raw: Vec<usize> = current
                .assignment
                .iter()
                .map(|&r| if r == b { a } else { r })
                .collect();
            let (cand, cand_obj, _) = instance.evaluate(&Partition::from_assignment(&raw), theta);
            if cand_obj < obj - 1e-12 {
                current = cand;
                obj = cand_obj;
                improved = true;
                break;
            }
        }
        if !improved {
            return current;
        }
    }
}

/// Groups the superpixels of one image under the given propagations.
pub fn group_image(
    image: &ImageRecord,
    graph: &SuperpixelGraph,
    propagations: &[&PropagationRecord],
    theta: f64,
) -> Result<MulticutSolution> {
    solve_multicut(&build_instance(image, graph, propagations), theta)
}
