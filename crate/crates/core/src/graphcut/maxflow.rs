//! Max-flow / min-cut with the two-tree augmenting-path scheme of Boykov
//! and Kolmogorov: search trees grown from both terminals are kept across
//! augmentations and repaired by orphan adoption instead of being rebuilt.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    node_count: usize,
    source: usize,
    sink: usize,
    arcs: Vec<Arc>,
}

impl FlowNetwork {
    pub fn new(node_count: usize, source: usize, sink: usize) -> Result<Self> {
        if source >= node_count || sink >= node_count {
            return Err(Error::malformed("terminal out of range"));
        }
        if source == sink {
            return Err(Error::malformed("source and sink coincide"));
        }
        Ok(FlowNetwork {
            node_count,
            source,
            sink,
            arcs: Vec::new(),
        })
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: f64) -> Result<()> {
        if from >= self.node_count || to >= self.node_count {
            return Err(Error::malformed(format!("arc ({from}, {to}) out of range")));
        }
        if !capacity.is_finite() || capacity < 0.0 {
            return Err(Error::malformed(format!(
                "arc ({from}, {to}) has invalid capacity {capacity}"
            )));
        }
        self.arcs.push(Arc { from, to, capacity });
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Capacity of the arcs leaving `source_side`.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        self.arcs
            .iter()
            .filter(|a| source_side[a.from] && !source_side[a.to])
            .map(|a| a.capacity)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCut {
    pub flow: f64,
    /// Capacity of the returned cut, recomputed from the original arcs.
    pub cut_capacity: f64,
    /// `true` for nodes on the source side of the minimum cut.
    pub source_side: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

const NO_ARC: usize = usize::MAX;

struct Residual {
    head: Vec<usize>,
    cap: Vec<f64>,
    // adjacency: arcs leaving each node, in insertion order
    out: Vec<Vec<usize>>,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let mut head = Vec::with_capacity(2 * net.arcs.len());
        let mut cap = Vec::with_capacity(2 * net.arcs.len());
        let mut out = vec![Vec::new(); net.node_count];
        for a in &net.arcs {
            out[a.from].push(head.len());
            head.push(a.to);
            cap.push(a.capacity);
            out[a.to].push(head.len());
            head.push(a.from);
            cap.push(0.0);
        }
        Residual { head, cap, out }
    }
}

#[inline]
fn sister(a: usize) -> usize {
    a ^ 1
}

struct Solver<'a> {
    g: Residual,
    net: &'a FlowNetwork,
    tree: Vec<Tree>,
    // arc from the node towards its parent; NO_ARC for terminals / free / orphans
    parent: Vec<usize>,
    active: VecDeque<usize>,
    in_active: Vec<bool>,
    orphans: VecDeque<usize>,
    flow: f64,
}

impl<'a> Solver<'a> {
    fn new(net: &'a FlowNetwork) -> Self {
        let n = net.node_count;
        let mut s = Solver {
            g: Residual::new(net),
            net,
            tree: vec![Tree::Free; n],
            parent: vec![NO_ARC; n],
            active: VecDeque::new(),
            in_active: vec![false; n],
            orphans: VecDeque::new(),
            flow: 0.0,
        };
        s.tree[net.source] = Tree::Source;
        s.tree[net.sink] = Tree::Sink;
        s.activate(net.source);
        s.activate(net.sink);
        s
    }

    fn activate(&mut self, v: usize) {
        if !self.in_active[v] {
            self.in_active[v] = true;
            self.active.push_back(v);
        }
    }

    fn is_terminal(&self, v: usize) -> bool {
        v == self.net.source || v == self.net.sink
    }

    /// Residual capacity usable by the tree of `p` along arc `a` leaving `p`.
    #[inline]
    fn tree_cap(&self, p: usize, a: usize) -> f64 {
        match self.tree[p] {
            Tree::Source => self.g.cap[a],
            Tree::Sink => self.g.cap[sister(a)],
            Tree::Free => 0.0,
        }
    }

    /// Grows trees until they touch; returns the connecting arc oriented
    /// from the source tree to the sink tree.
    fn grow(&mut self) -> Option<usize> {
        while let Some(&p) = self.active.front() {
            if self.tree[p] == Tree::Free {
                self.active.pop_front();
                self.in_active[p] = false;
                continue;
            }
            for i in 0..self.g.out[p].len() {
                let a = self.g.out[p][i];
                if self.tree_cap(p, a) <= 0.0 {
                    continue;
                }
                let q = self.g.head[a];
                match self.tree[q] {
                    Tree::Free => {
                        self.tree[q] = self.tree[p];
                        self.parent[q] = sister(a);
                        self.activate(q);
                    }
                    t if t != self.tree[p] => {
                        return Some(if self.tree[p] == Tree::Source {
                            a
                        } else {
                            sister(a)
                        });
                    }
                    _ => {}
                }
            }
            self.active.pop_front();
            self.in_active[p] = false;
        }
        None
    }

    fn augment(&mut self, bridge: usize) {
        let (s, t) = (self.net.source, self.net.sink);
        let mut bottleneck = self.g.cap[bridge];
        // source side: arcs parent -> v
        let mut v = self.g.head[sister(bridge)];
        while v != s {
            let a = sister(self.parent[v]);
            bottleneck = bottleneck.min(self.g.cap[a]);
            v = self.g.head[self.parent[v]];
        }
        // sink side: arcs v -> parent
        let mut v = self.g.head[bridge];
        while v != t {
            let a = self.parent[v];
            bottleneck = bottleneck.min(self.g.cap[a]);
            v = self.g.head[a];
        }

        self.push(bridge, bottleneck);
        let mut v = self.g.head[sister(bridge)];
        while v != s {
            let up = self.parent[v];
            let a = sister(up);
            self.push(a, bottleneck);
            let next = self.g.head[up];
            if self.g.cap[a] <= 0.0 {
                self.parent[v] = NO_ARC;
                self.orphans.push_back(v);
            }
            v = next;
        }
        let mut v = self.g.head[bridge];
        while v != t {
            let a = self.parent[v];
            self.push(a, bottleneck);
            let next = self.g.head[a];
            if self.g.cap[a] <= 0.0 {
                self.parent[v] = NO_ARC;
                self.orphans.push_back(v);
            }
            v = next;
        }
        self.flow += bottleneck;
    }

    #[inline]
    fn push(&mut self, a: usize, amount: f64) {
        self.g.cap[a] -= amount;
        self.g.cap[sister(a)] += amount;
    }

    /// True when following parent arcs from `v` reaches a terminal.
    fn rooted(&self, mut v: usize) -> bool {
        loop {
            if self.is_terminal(v) {
                return true;
            }
            let a = self.parent[v];
            if a == NO_ARC {
                return false;
            }
            v = self.g.head[a];
        }
    }

    fn adopt(&mut self) {
        while let Some(v) = self.orphans.pop_front() {
            let tree = self.tree[v];
            // a valid parent u: same tree, residual towards v (source tree) or
            // from v (sink tree), and still connected to its terminal
            let mut new_parent = NO_ARC;
            for &a in &self.g.out[v] {
                let u = self.g.head[a];
                if self.tree[u] != tree {
                    continue;
                }
                let cap = match tree {
                    Tree::Source => self.g.cap[sister(a)],
                    _ => self.g.cap[a],
                };
                if cap > 0.0 && self.rooted(u) {
                    new_parent = a;
                    break;
                }
            }
            if new_parent != NO_ARC {
                self.parent[v] = new_parent;
                continue;
            }
            for i in 0..self.g.out[v].len() {
                let a = self.g.out[v][i];
                let u = self.g.head[a];
                if self.tree[u] != tree {
                    continue;
                }
                let cap = match tree {
                    Tree::Source => self.g.cap[sister(a)],
                    _ => self.g.cap[a],
                };
                if cap > 0.0 {
                    self.activate(u);
                }
                let pu = self.parent[u];
                if pu != NO_ARC && self.g.head[pu] == v {
                    self.parent[u] = NO_ARC;
                    self.orphans.push_back(u);
                }
            }
            self.tree[v] = Tree::Free;
        }
    }

    fn run(mut self) -> MinCut {
        while let Some(bridge) = self.grow() {
            self.augment(bridge);
            self.adopt();
        }
        let source_side: Vec<bool> = self.tree.iter().map(|&t| t == Tree::Source).collect();
        MinCut {
            flow: self.flow,
            cut_capacity: self.net.cut_capacity(&source_side),
            source_side,
        }
    }
}

/// Maximum flow from source to sink and a minimum cut certifying it.
///
/// The source side of the cut is the set of nodes reachable from the source
/// in the final residual graph. With integer-valued capacities the flow and
/// cut capacity agree exactly; in general they agree to rounding.
pub fn max_flow(network: &FlowNetwork) -> Result<MinCut> {
    let cut = Solver::new(network).run();
    let scale = cut.flow.abs().max(1.0);
    if (cut.flow - cut.cut_capacity).abs() > 1e-9 * scale {
        return Err(Error::malformed(format!(
            "flow {} differs from cut capacity {}",
            cut.flow, cut.cut_capacity
        )));
    }
    Ok(cut)
}
