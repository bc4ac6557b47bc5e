//! Negotiated-congestion (PathFinder-style) routing on a [`RoutingGraph`].

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::netlist::Netlist;
use super::place::Placement;
use super::PlaceRouteError;
use crate::fabric::{Axis, Fabric, FabricParams, NodeId, NodeKind, RoutingGraph, UNLIMITED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub max_iters: usize,
    pub initial_pres_fac: f64,
    pub pres_fac_mult: f64,
    pub hist_increment: f64,
    /// Tiles of slack around a net's bounding box before the search widens.
    pub bbox_margin: usize,
    pub astar_fac: f64,
    /// Rip up every net each iteration instead of only congested ones.
    pub reroute_all: bool,
    /// Give up early when the overuse trend predicts no convergence within
    /// twice `max_iters`.
    pub predict_failure: bool,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            initial_pres_fac: 0.5,
            pres_fac_mult: 1.8,
            hist_increment: 1.0,
            bbox_margin: 3,
            astar_fac: 1.2,
            reroute_all: false,
            predict_failure: true,
        }
    }
}

/// A node of a net's route tree. `parent` indexes into the same tree and
/// always precedes the child; the root (the net's source) has none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteNode {
    pub id: NodeId,
    pub parent: Option<u32>,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteTree {
    pub net: usize,
    pub spin: usize,
    pub nodes: Vec<RouteNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedDesign {
    pub placement: Placement,
    pub channel_width: usize,
    pub iterations: usize,
    pub routes: Vec<RouteTree>,
}

impl RoutedDesign {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("design serialization is infallible")
    }

    pub fn wire_count(&self) -> usize {
        self.routes
            .iter()
            .flat_map(|r| r.nodes.iter())
            .filter(|n| matches!(n.kind, NodeKind::Wire { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverusedNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub occupancy: u32,
    pub capacity: u32,
}

/// Remaining congestion when routing gives up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionReport {
    pub channel_width: usize,
    pub iterations: usize,
    /// True when some sink has no path at all (not a congestion problem).
    pub disconnected: bool,
    pub overused: Vec<OverusedNode>,
}

impl CongestionReport {
    /// Heatmap rows `axis,channel,pos,overuse`: total overuse of the wires
    /// covering each channel position.
    pub fn to_csv(&self) -> String {
        let mut cells: BTreeMap<(char, usize, usize), u32> = BTreeMap::new();
        for o in &self.overused {
            if let NodeKind::Wire {
                axis,
                channel,
                start,
                end,
                ..
            } = o.kind
            {
                let a = if axis == Axis::Horizontal { 'H' } else { 'V' };
                for pos in start..=end {
                    *cells.entry((a, channel, pos)).or_insert(0) += o.occupancy - o.capacity;
                }
            }
        }
        let mut out = String::from("axis,channel,pos,overuse\n");
        for ((a, c, p), v) in cells {
            let _ = writeln!(out, "{a},{c},{p},{v}");
        }
        out
    }
}

fn is_limited(cap: u32) -> bool {
    cap != UNLIMITED
}

fn base_cost(kind: &NodeKind) -> f64 {
    match kind {
        NodeKind::Wire { .. } | NodeKind::OutputPin { .. } => 1.0,
        NodeKind::InputPin { .. } => 0.95,
        NodeKind::Source { .. } | NodeKind::Sink { .. } => 0.0,
    }
}

/// Tile-space extent used for bounding-box pruning and the A* estimate.
/// A channel between tile rows `c-1` and `c` touches both rows.
fn tile_extent(kind: &NodeKind, bbox: (u16, u16, u16, u16), grid: usize) -> (i32, i32, i32, i32) {
    let (xl, yl, xh, yh) = (bbox.0 as i32, bbox.1 as i32, bbox.2 as i32, bbox.3 as i32);
    let top = grid as i32 - 1;
    match kind {
        NodeKind::Wire {
            axis: Axis::Horizontal,
            ..
        } => (xl, (yl - 1).max(0), xh, yh.min(top)),
        NodeKind::Wire {
            axis: Axis::Vertical,
            ..
        } => ((xl - 1).max(0), yl, xh.min(top), yh),
        _ => (xl, yl, xh, yh),
    }
}

struct Router<'a> {
    graph: &'a RoutingGraph,
    cfg: RouterConfig,
    extent: Vec<(i32, i32, i32, i32)>,
    base: Vec<f64>,
    occ: Vec<u32>,
    hist: Vec<f64>,
    pres_fac: f64,
    // Search scratch space.
    best: Vec<f64>,
    prev: Vec<NodeId>,
    touched: Vec<NodeId>,
    tree_index: Vec<u32>,
}

const NO_PREV: NodeId = NodeId::MAX;

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Entry {
    f: u64,
    node: NodeId,
}

impl<'a> Router<'a> {
    fn new(graph: &'a RoutingGraph, cfg: RouterConfig) -> Self {
        let n = graph.num_nodes();
        let extent = graph
            .nodes()
            .iter()
            .map(|nd| tile_extent(&nd.kind, nd.bbox, graph.grid))
            .collect();
        let base = graph.nodes().iter().map(|nd| base_cost(&nd.kind)).collect();
        Self {
            graph,
            cfg,
            extent,
            base,
            occ: vec![0; n],
            hist: vec![0.0; n],
            pres_fac: cfg.initial_pres_fac,
            best: vec![f64::INFINITY; n],
            prev: vec![NO_PREV; n],
            touched: Vec::new(),
            tree_index: vec![0; n],
        }
    }

    fn node_cost(&self, id: NodeId) -> f64 {
        let i = id as usize;
        let cap = self.graph.node(id).capacity;
        if !is_limited(cap) {
            return self.base[i];
        }
        let over = (self.occ[i] + 1).saturating_sub(cap) as f64;
        self.base[i] * (1.0 + self.pres_fac * over) * (1.0 + self.hist[i])
    }

    fn heuristic(&self, id: NodeId, target: (i32, i32)) -> f64 {
        let (xl, yl, xh, yh) = self.extent[id as usize];
        let dx = (xl - target.0).max(target.0 - xh).max(0);
        let dy = (yl - target.1).max(target.1 - yh).max(0);
        self.cfg.astar_fac * (dx + dy) as f64 / self.graph.r_tile as f64
    }

    fn reset_search(&mut self) {
        for &t in &self.touched {
            self.best[t as usize] = f64::INFINITY;
            self.prev[t as usize] = NO_PREV;
        }
        self.touched.clear();
    }

    /// Routes one net from scratch; `None` when some sink is unreachable.
    fn route_net(
        &mut self,
        net: usize,
        netlist: &Netlist,
        placement: &Placement,
    ) -> Option<Vec<RouteNode>> {
        let g = self.graph;
        let n = &netlist.nets[net];
        let src_tile = placement.tile_of(n.source);
        let (sx, sy) = placement.sites[n.source];
        let mut sinks: Vec<(usize, usize)> = n
            .sinks
            .iter()
            .map(|&b| {
                let (x, y) = placement.sites[b];
                (x.abs_diff(sx) + y.abs_diff(sy), b)
            })
            .collect();
        sinks.sort_unstable();

        let (mut bx0, mut by0, mut bx1, mut by1) = (sx as i32, sy as i32, sx as i32, sy as i32);
        for &(_, b) in &sinks {
            let (x, y) = placement.sites[b];
            bx0 = bx0.min(x as i32);
            by0 = by0.min(y as i32);
            bx1 = bx1.max(x as i32);
            by1 = by1.max(y as i32);
        }
        let m = self.cfg.bbox_margin as i32;
        let bbox = (bx0 - m, by0 - m, bx1 + m, by1 + m);

        let root = g.source(src_tile);
        let mut tree = vec![RouteNode {
            id: root,
            parent: None,
            kind: g.node(root).kind,
        }];
        self.tree_index[root as usize] = 1;

        for &(_, b) in &sinks {
            let target = g.sink(placement.tile_of(b));
            let (tx, ty) = placement.sites[b];
            let found = self.search(&tree, target, (tx as i32, ty as i32), Some(bbox))
                || self.search(&tree, target, (tx as i32, ty as i32), None);
            if !found {
                for rn in &tree {
                    self.tree_index[rn.id as usize] = 0;
                }
                self.reset_search();
                return None;
            }
            // Walk back to the tree, then append outward.
            let mut path = Vec::new();
            let mut cur = target;
            while self.tree_index[cur as usize] == 0 {
                path.push(cur);
                cur = self.prev[cur as usize];
            }
            let mut parent = self.tree_index[cur as usize] - 1;
            for &id in path.iter().rev() {
                tree.push(RouteNode {
                    id,
                    parent: Some(parent),
                    kind: g.node(id).kind,
                });
                parent = (tree.len() - 1) as u32;
                self.tree_index[id as usize] = tree.len() as u32;
            }
            self.reset_search();
        }
        for rn in &tree {
            self.tree_index[rn.id as usize] = 0;
        }
        Some(tree)
    }

    fn search(
        &mut self,
        tree: &[RouteNode],
        target: NodeId,
        tpos: (i32, i32),
        bbox: Option<(i32, i32, i32, i32)>,
    ) -> bool {
        self.reset_search();
        let g = self.graph;
        let NodeKind::Sink { tile: target_tile } = g.node(target).kind else {
            unreachable!("route targets are sinks")
        };
        let mut heap = BinaryHeap::new();
        // A net leaves its block through a single output pin, so the source
        // only seeds the first connection.
        let seeds = if tree.len() > 1 { &tree[1..] } else { tree };
        for rn in seeds {
            self.best[rn.id as usize] = 0.0;
            self.touched.push(rn.id);
            let h = self.heuristic(rn.id, tpos);
            heap.push(Reverse(Entry {
                f: h.to_bits(),
                node: rn.id,
            }));
        }
        while let Some(Reverse(Entry { f, node })) = heap.pop() {
            if node == target {
                return true;
            }
            let g_here = self.best[node as usize];
            if f64::from_bits(f) > g_here + self.heuristic(node, tpos) + 1e-12 {
                continue;
            }
            for (next, _) in g.edges(node) {
                let ni = next as usize;
                if self.tree_index[ni] != 0 {
                    continue;
                }
                match g.node(next).kind {
                    NodeKind::Source { .. } => continue,
                    NodeKind::Sink { .. } if next != target => continue,
                    // Input pins lead only to their own block's sink.
                    NodeKind::InputPin { tile, .. } if tile != target_tile => continue,
                    _ => {}
                }
                if let Some((x0, y0, x1, y1)) = bbox {
                    let (xl, yl, xh, yh) = self.extent[ni];
                    if xh < x0 || xl > x1 || yh < y0 || yl > y1 {
                        continue;
                    }
                }
                let cand = g_here + self.node_cost(next);
                if cand < self.best[ni] {
                    if self.best[ni].is_infinite() {
                        self.touched.push(next);
                    }
                    self.best[ni] = cand;
                    self.prev[ni] = node;
                    let f = cand + self.heuristic(next, tpos);
                    heap.push(Reverse(Entry {
                        f: f.to_bits(),
                        node: next,
                    }));
                }
            }
        }
        false
    }

    fn add_occupancy(&mut self, tree: &[RouteNode], delta: i32) {
        for rn in tree {
            let o = &mut self.occ[rn.id as usize];
            *o = (*o as i32 + delta) as u32;
        }
    }

    fn overused(&self) -> Vec<NodeId> {
        (0..self.occ.len() as NodeId)
            .filter(|&id| {
                let cap = self.graph.node(id).capacity;
                is_limited(cap) && self.occ[id as usize] > cap
            })
            .collect()
    }
}

/// Routes every net of `netlist` under `placement`. Succeeds when no node
/// is used beyond its capacity.
pub fn route(
    netlist: &Netlist,
    placement: &Placement,
    graph: &RoutingGraph,
    cfg: &RouterConfig,
) -> Result<RoutedDesign, PlaceRouteError> {
    if placement.grid != graph.grid {
        return Err(PlaceRouteError::GridMismatch {
            placement: placement.grid,
            graph: graph.grid,
        });
    }
    let mut router = Router::new(graph, *cfg);
    let mut trees: Vec<Vec<RouteNode>> = vec![Vec::new(); netlist.nets.len()];
    let fail = |router: &Router, iterations, disconnected| {
        let overused = router
            .overused()
            .into_iter()
            .map(|id| OverusedNode {
                id,
                kind: graph.node(id).kind,
                occupancy: router.occ[id as usize],
                capacity: graph.node(id).capacity,
            })
            .collect();
        PlaceRouteError::Unroutable(Box::new(CongestionReport {
            channel_width: graph.channel_width,
            iterations,
            disconnected,
            overused,
        }))
    };
    if netlist.nets.is_empty() {
        return Ok(RoutedDesign {
            placement: placement.clone(),
            channel_width: graph.channel_width,
            iterations: 0,
            routes: Vec::new(),
        });
    }
    let mut congested_nodes: Vec<bool> = vec![false; graph.num_nodes()];
    let mut overuse_trend: Vec<f64> = Vec::new();
    for iter in 1..=cfg.max_iters {
        for net in 0..netlist.nets.len() {
            let reroute = iter == 1
                || cfg.reroute_all
                || trees[net].iter().any(|rn| congested_nodes[rn.id as usize]);
            if !reroute {
                continue;
            }
            let old = std::mem::take(&mut trees[net]);
            router.add_occupancy(&old, -1);
            match router.route_net(net, netlist, placement) {
                Some(tree) => {
                    router.add_occupancy(&tree, 1);
                    trees[net] = tree;
                }
                None => return Err(fail(&router, iter, true)),
            }
        }
        let over = router.overused();
        if over.is_empty() {
            let routes = trees
                .into_iter()
                .enumerate()
                .map(|(net, nodes)| RouteTree {
                    net,
                    spin: netlist.nets[net].spin,
                    nodes,
                })
                .collect();
            return Ok(RoutedDesign {
                placement: placement.clone(),
                channel_width: graph.channel_width,
                iterations: iter,
                routes,
            });
        }
        let total: u32 = over
            .iter()
            .map(|&id| router.occ[id as usize] - graph.node(id).capacity)
            .sum();
        overuse_trend.push(total as f64);
        if cfg.predict_failure
            && predicts_failure(&overuse_trend, cfg.max_iters, netlist.nets.len())
        {
            return Err(fail(&router, iter, false));
        }
        congested_nodes.iter_mut().for_each(|c| *c = false);
        for id in over {
            congested_nodes[id as usize] = true;
            router.hist[id as usize] += cfg.hist_increment;
        }
        router.pres_fac *= cfg.pres_fac_mult;
    }
    Err(fail(&router, cfg.max_iters, false))
}

/// Extrapolates the geometric decay of total overuse over the last few
/// iterations. A small residue is left to the growing present-cost factor.
fn predicts_failure(trend: &[f64], max_iters: usize, nets: usize) -> bool {
    const WINDOW: usize = 4;
    let iter = trend.len();
    if iter < 10 {
        return false;
    }
    let (now, then) = (trend[iter - 1], trend[iter - 1 - WINDOW]);
    if now <= (nets as f64 / 200.0).max(2.0) {
        return false;
    }
    let rate = (now / then).powf(1.0 / WINDOW as f64);
    if rate >= 0.999 {
        return true;
    }
    let remaining = now.ln() / -rate.ln();
    iter as f64 + remaining > 2.0 * max_iters as f64
}

/// Builds the routing graph for `params` at width `w` and routes on it.
pub fn route_at_width(
    netlist: &Netlist,
    placement: &Placement,
    params: &FabricParams,
    w: usize,
    cfg: &RouterConfig,
) -> Result<RoutedDesign, PlaceRouteError> {
    let fabric = Fabric::build(params.with_grid(placement.grid).with_channel_width(w))?;
    let graph = RoutingGraph::build(&fabric);
    route(netlist, placement, &graph, cfg)
}

pub const DEFAULT_WIDTH_CAP: usize = 1024;

/// Smallest channel width the router succeeds at, together with the
/// witness design. The returned width `w` always satisfies: routing at
/// `w - 1` was attempted and failed (or `w == 1`). A netlist without nets
/// reports width 1.
pub fn min_channel_width(
    netlist: &Netlist,
    placement: &Placement,
    params: &FabricParams,
    cfg: &RouterConfig,
    cap: usize,
) -> Result<(usize, RoutedDesign), PlaceRouteError> {
    if netlist.nets.is_empty() {
        return Ok((
            1,
            RoutedDesign {
                placement: placement.clone(),
                channel_width: 1,
                iterations: 0,
                routes: Vec::new(),
            },
        ));
    }
    let attempt = |w: usize| route_at_width(netlist, placement, params, w, cfg);
    // Largest width known to fail (width 0 trivially does) and smallest
    // known to succeed.
    let mut fail = 0usize;
    let mut best: Option<(usize, RoutedDesign)> = None;
    let mut w = width_estimate(netlist, placement).clamp(1, cap.max(1));
    loop {
        match attempt(w) {
            Ok(d) => best = Some((w, d)),
            Err(PlaceRouteError::Unroutable(_)) => fail = w,
            Err(e) => return Err(e),
        }
        w = match &best {
            None if fail >= cap => return Err(PlaceRouteError::WidthCapExceeded { cap }),
            None => (2 * fail).min(cap),
            Some((ok, _)) if ok - fail <= 1 => break,
            Some((ok, _)) => fail + (ok - fail) / 2,
        };
    }
    Ok(best.expect("loop exits only with a success"))
}

/// Starting guess for the width search: total source-to-sink Manhattan
/// distance spread over every channel position.
fn width_estimate(netlist: &Netlist, placement: &Placement) -> usize {
    let demand: usize = netlist
        .nets
        .iter()
        .flat_map(|n| {
            let (sx, sy) = placement.sites[n.source];
            n.sinks.iter().map(move |&b| {
                let (x, y) = placement.sites[b];
                x.abs_diff(sx) + y.abs_diff(sy)
            })
        })
        .sum();
    let m = placement.grid;
    demand.div_ceil(2 * m * (m + 1)).max(1)
}

/// Per-hop delays, in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams {
    pub segment_ps: f64,
    pub switch_ps: f64,
    pub conn_ps: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        Self {
            segment_ps: 80.0,
            switch_ps: 60.0,
            conn_ps: 40.0,
        }
    }
}

impl DelayParams {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            segment_ps: self.segment_ps * k,
            switch_ps: self.switch_ps * k,
            conn_ps: self.conn_ps * k,
        }
    }
}

fn hop_delay(from: &NodeKind, to: &NodeKind, d: &DelayParams) -> f64 {
    use NodeKind::*;
    let edge = match (from, to) {
        (Wire { .. }, Wire { .. }) => d.switch_ps,
        (OutputPin { .. }, Wire { .. }) | (Wire { .. }, InputPin { .. }) => d.conn_ps,
        _ => 0.0,
    };
    let node = if matches!(to, Wire { .. }) {
        d.segment_ps
    } else {
        0.0
    };
    edge + node
}

/// Longest source-to-sink delay over all nets, in picoseconds.
pub fn critical_path_delay(design: &RoutedDesign, d: &DelayParams) -> f64 {
    let mut worst: f64 = 0.0;
    for r in &design.routes {
        let mut arrival = vec![0.0f64; r.nodes.len()];
        for (k, rn) in r.nodes.iter().enumerate() {
            if let Some(p) = rn.parent {
                let p = p as usize;
                arrival[k] = arrival[p] + hop_delay(&r.nodes[p].kind, &rn.kind, d);
            }
            if matches!(rn.kind, NodeKind::Sink { .. }) {
                worst = worst.max(arrival[k]);
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditViolation {
    MissingRoute {
        net: usize,
    },
    WrongRoot {
        net: usize,
    },
    BadParent {
        net: usize,
        index: usize,
    },
    MissingEdge {
        net: usize,
        from: NodeId,
        to: NodeId,
    },
    RepeatedNode {
        net: usize,
        node: NodeId,
    },
    SinkNotReached {
        net: usize,
        block: usize,
    },
    OverCapacity {
        node: NodeId,
        occupancy: usize,
    },
}

/// Independent legality check of a routed design against the graph it was
/// routed on: trees rooted at the right source, built from real edges,
/// acyclic, reaching every sink, and within node capacities overall.
pub fn audit(
    design: &RoutedDesign,
    netlist: &Netlist,
    graph: &RoutingGraph,
) -> Vec<AuditViolation> {
    let mut v = Vec::new();
    let mut occupancy: BTreeMap<NodeId, usize> = BTreeMap::new();
    let pl = &design.placement;
    for (k, net) in netlist.nets.iter().enumerate() {
        let Some(r) = design.routes.iter().find(|r| r.net == k) else {
            v.push(AuditViolation::MissingRoute { net: k });
            continue;
        };
        let root_ok = r
            .nodes
            .first()
            .is_some_and(|n| n.parent.is_none() && n.id == graph.source(pl.tile_of(net.source)));
        if !root_ok {
            v.push(AuditViolation::WrongRoot { net: k });
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, rn) in r.nodes.iter().enumerate() {
            if !seen.insert(rn.id) {
                v.push(AuditViolation::RepeatedNode {
                    net: k,
                    node: rn.id,
                });
            }
            *occupancy.entry(rn.id).or_insert(0) += 1;
            if i == 0 {
                continue;
            }
            match rn.parent {
                Some(p) if (p as usize) < i => {
                    let from = r.nodes[p as usize].id;
                    if graph.edge_kind(from, rn.id).is_none() {
                        v.push(AuditViolation::MissingEdge {
                            net: k,
                            from,
                            to: rn.id,
                        });
                    }
                }
                _ => v.push(AuditViolation::BadParent { net: k, index: i }),
            }
        }
        for &b in &net.sinks {
            if !seen.contains(&graph.sink(pl.tile_of(b))) {
                v.push(AuditViolation::SinkNotReached { net: k, block: b });
            }
        }
    }
    for (node, occ) in occupancy {
        let cap = graph.node(node).capacity;
        if is_limited(cap) && occ > cap as usize {
            v.push(AuditViolation::OverCapacity {
                node,
                occupancy: occ,
            });
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::place_route::netlist::Net;

    fn small_params() -> FabricParams {
        FabricParams {
            inputs: 4,
            outputs: 4,
            f_in: 0.5,
            f_out: 0.5,
            r_tile: 4,
            fs: 3,
            grid: 2,
            channel_width: 2,
        }
    }

    fn one_net() -> (Netlist, Placement) {
        let nl = Netlist {
            num_blocks: 2,
            nets: vec![Net {
                spin: 0,
                source: 0,
                sinks: vec![1],
            }],
        };
        let pl = Placement {
            grid: 2,
            sites: vec![(0, 0), (1, 0)],
        };
        (nl, pl)
    }

    #[test]
    fn zero_nets_route_trivially() {
        let nl = Netlist {
            num_blocks: 1,
            nets: vec![],
        };
        let pl = Placement {
            grid: 2,
            sites: vec![(0, 0)],
        };
        let g = RoutingGraph::build(&Fabric::build(small_params()).unwrap());
        let d = route(&nl, &pl, &g, &RouterConfig::default()).unwrap();
        assert!(d.routes.is_empty());
        assert_eq!(critical_path_delay(&d, &DelayParams::default()), 0.0);
        let (w, _) =
            min_channel_width(&nl, &pl, &small_params(), &RouterConfig::default(), 8).unwrap();
        assert_eq!(w, 1);
    }

    #[test]
    fn adjacent_pair_routes_in_one_iteration() {
        let (nl, pl) = one_net();
        let g = RoutingGraph::build(&Fabric::build(small_params()).unwrap());
        let d = route(&nl, &pl, &g, &RouterConfig::default()).unwrap();
        assert_eq!(d.iterations, 1);
        assert!(d.wire_count() <= 2);
        assert!(audit(&d, &nl, &g).is_empty());
    }

    #[test]
    fn zero_width_fails_immediately() {
        let (nl, pl) = one_net();
        let g = RoutingGraph::build(&Fabric::build(small_params().with_channel_width(0)).unwrap());
        match route(&nl, &pl, &g, &RouterConfig::default()) {
            Err(PlaceRouteError::Unroutable(r)) => {
                assert!(r.disconnected);
                assert_eq!(r.iterations, 1);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn pair_needs_one_track() {
        let (nl, pl) = one_net();
        let (w, d) =
            min_channel_width(&nl, &pl, &small_params(), &RouterConfig::default(), 16).unwrap();
        assert_eq!(w, 1);
        assert_eq!(d.channel_width, 1);
        let g = RoutingGraph::build(&Fabric::build(small_params().with_channel_width(1)).unwrap());
        assert!(audit(&d, &nl, &g).is_empty());
    }

    #[test]
    fn direct_route_delay() {
        let (nl, pl) = one_net();
        let g = RoutingGraph::build(&Fabric::build(small_params()).unwrap());
        let d = route(&nl, &pl, &g, &RouterConfig::default()).unwrap();
        let dp = DelayParams::default();
        let wires = d.wire_count();
        let t = critical_path_delay(&d, &dp);
        if wires == 1 {
            assert_eq!(t, dp.segment_ps + 2.0 * dp.conn_ps);
        }
        assert_eq!(critical_path_delay(&d, &dp.scaled(2.0)), 2.0 * t);
    }

    #[test]
    fn audit_flags_tampering() {
        let (nl, pl) = one_net();
        let g = RoutingGraph::build(&Fabric::build(small_params()).unwrap());
        let mut d = route(&nl, &pl, &g, &RouterConfig::default()).unwrap();
        let mut dup = d.clone();
        dup.routes.push(RouteTree {
            net: 0,
            spin: 0,
            nodes: d.routes[0].nodes.clone(),
        });
        dup.routes[0].net = 0;
        let extra = Netlist {
            num_blocks: 2,
            nets: vec![nl.nets[0].clone(), nl.nets[0].clone()],
        };
        dup.routes[1].net = 1;
        assert!(audit(&dup, &extra, &g)
            .iter()
            .any(|v| matches!(v, AuditViolation::OverCapacity { .. })));
        d.routes[0].nodes.pop();
        assert!(audit(&d, &nl, &g)
            .iter()
            .any(|v| matches!(v, AuditViolation::SinkNotReached { .. })));
    }

    #[test]
    fn congestion_csv_header() {
        let r = CongestionReport {
            channel_width: 2,
            iterations: 3,
            disconnected: false,
            overused: vec![OverusedNode {
                id: 9,
                kind: NodeKind::Wire {
                    axis: Axis::Vertical,
                    channel: 1,
                    track: 0,
                    start: 0,
                    end: 1,
                },
                occupancy: 3,
                capacity: 1,
            }],
        };
        assert_eq!(r.to_csv(), "axis,channel,pos,overuse\nV,1,0,2\nV,1,1,2\n");
    }
}
