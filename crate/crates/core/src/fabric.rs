//! Island-style FPIA fabric and its routing-resource graph.
//!
//! Geometry: an `M×M` grid of tiles, each one IMC block. Horizontal
//! channels `y = 0..=M` run below/above tile rows, vertical channels
//! `x = 0..=M` run left/right of tile columns; each channel has `M` unit
//! positions and `W` tracks. Track `t` is cut into wires of `R_tile`
//! positions, with cut points where `(pos + t) % R_tile == 0` so wire ends are
//! staggered across tracks. Wires meet at switch points `(x, y)`, where each
//! wire end connects to the other three sides using the Wilton track
//! permutation. A wire passing through a switch point can also turn onto the
//! perpendicular channel there.
//!
//! Block pins are logically equivalent: every output pin hangs off one
//! per-block source and every input pin drains into one per-block sink.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FabricError {
    #[error("fabric grid must have at least one tile per side")]
    ZeroGrid,
    #[error("invalid fabric parameter: {0}")]
    InvalidParam(String),
}

/// Architecture parameters. Serialized field names follow the usual
/// notation (`I`, `O`, `F_I`, `F_O`, `R_tile`, `Fs`, `grid`, `W`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FabricParams {
    #[serde(rename = "I")]
    pub inputs: usize,
    #[serde(rename = "O")]
    pub outputs: usize,
    #[serde(rename = "F_I")]
    pub f_in: f64,
    #[serde(rename = "F_O")]
    pub f_out: f64,
    #[serde(rename = "R_tile")]
    pub r_tile: usize,
    #[serde(rename = "Fs")]
    pub fs: usize,
    pub grid: usize,
    #[serde(rename = "W")]
    pub channel_width: usize,
}

impl FabricParams {
    /// The shared architecture: I=140, O=40, F_I=0.15, F_O=0.2, R_tile=4, Fs=3.
    pub fn shared(grid: usize, channel_width: usize) -> Self {
        Self {
            inputs: 140,
            outputs: 40,
            f_in: 0.15,
            f_out: 0.2,
            r_tile: 4,
            fs: 3,
            grid,
            channel_width,
        }
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_channel_width(mut self, w: usize) -> Self {
        self.channel_width = w;
        self
    }

    /// Tracks reached by each input pin: `ceil(F_I · W)`.
    pub fn input_tracks(&self) -> usize {
        fraction_tracks(self.f_in, self.channel_width)
    }

    /// Tracks reached by each output pin: `ceil(F_O · W)`.
    pub fn output_tracks(&self) -> usize {
        fraction_tracks(self.f_out, self.channel_width)
    }

    pub fn check(&self) -> Result<(), FabricError> {
        if self.grid == 0 {
            return Err(FabricError::ZeroGrid);
        }
        if self.inputs == 0 || self.outputs == 0 {
            return Err(FabricError::InvalidParam("I and O must be positive".into()));
        }
        for (name, f) in [("F_I", self.f_in), ("F_O", self.f_out)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(FabricError::InvalidParam(format!(
                    "{name}={f} outside (0, 1]"
                )));
            }
        }
        if self.r_tile == 0 {
            return Err(FabricError::InvalidParam("R_tile must be positive".into()));
        }
        if self.fs != 3 {
            return Err(FabricError::InvalidParam(format!(
                "only the Wilton Fs=3 switch block is modeled, got Fs={}",
                self.fs
            )));
        }
        Ok(())
    }
}

/// `ceil(f·w)` clamped to `[1, w]`, guarding against `0.15·20 = 3.0000000000000004`.
pub fn fraction_tracks(f: f64, w: usize) -> usize {
    if w == 0 {
        return 0;
    }
    let raw = (f * w as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    /// Round-robin side of the `k`-th pin of a block.
    pub fn of_pin(k: usize) -> Side {
        Self::ALL[k % 4]
    }
}

/// Wilton switch-block track permutation for a wire entering on `from` and
/// leaving on `to`. Each `(from, to)` pair is a bijection on `0..w`, and the
/// reverse pair is its inverse.
pub fn wilton_track(from: Side, to: Side, track: usize, w: usize) -> usize {
    use Side::*;
    let (t, w) = (track as i64, w as i64);
    let r = match (from, to) {
        (Left, Right) | (Right, Left) | (Bottom, Top) | (Top, Bottom) => t,
        (Left, Top) | (Top, Left) => w - t,
        (Left, Bottom) => t - 1,
        (Bottom, Left) => t + 1,
        (Right, Top) => t - 1,
        (Top, Right) => t + 1,
        (Right, Bottom) | (Bottom, Right) => 2 * w - 2 - t,
        _ => t,
    };
    r.rem_euclid(w) as usize
}

#[derive(Debug, Clone)]
pub struct Fabric {
    pub params: FabricParams,
}

impl Fabric {
    pub fn build(params: FabricParams) -> Result<Self, FabricError> {
        params.check()?;
        Ok(Self { params })
    }

    pub fn grid(&self) -> usize {
        self.params.grid
    }

    pub fn num_tiles(&self) -> usize {
        self.params.grid * self.params.grid
    }

    pub fn total_input_pins(&self) -> usize {
        self.num_tiles() * self.params.inputs
    }

    pub fn total_output_pins(&self) -> usize {
        self.num_tiles() * self.params.outputs
    }

    /// Horizontal channel rows (also the vertical channel column count).
    pub fn channels_per_axis(&self) -> usize {
        self.params.grid + 1
    }

    pub fn tile_coord(&self, tile: usize) -> (usize, usize) {
        (tile % self.params.grid, tile / self.params.grid)
    }

    pub fn tile_index(&self, x: usize, y: usize) -> usize {
        y * self.params.grid + x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Source {
        tile: usize,
    },
    OutputPin {
        tile: usize,
        pin: usize,
    },
    InputPin {
        tile: usize,
        pin: usize,
    },
    /// Covers channel positions `start..=end` of channel `channel`.
    Wire {
        axis: Axis,
        channel: usize,
        track: usize,
        start: usize,
        end: usize,
    },
    Sink {
        tile: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    /// Source to output pin, input pin to sink.
    Internal,
    /// Pin to track or track to pin through a connection block.
    Connection,
    /// Track to track through a switch block.
    Switch,
}

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub capacity: u32,
    /// Bounding box in tile units `(xlo, ylo, xhi, yhi)`; channel `c` sits
    /// between tile rows/columns `c-1` and `c` and is assigned coordinate `c`.
    pub bbox: (u16, u16, u16, u16),
}

pub const UNLIMITED: u32 = u32::MAX;

/// Directed routing-resource graph in compressed adjacency form.
#[derive(Debug, Clone)]
pub struct RoutingGraph {
    pub grid: usize,
    pub channel_width: usize,
    pub r_tile: usize,
    pub inputs: usize,
    pub outputs: usize,
    nodes: Vec<Node>,
    offsets: Vec<u32>,
    targets: Vec<NodeId>,
    kinds: Vec<EdgeKind>,
    /// `wire_lookup[axis][channel][track][pos]`.
    wire_lookup: [Vec<Vec<Vec<NodeId>>>; 2],
    first_wire: usize,
}

fn axis_index(a: Axis) -> usize {
    match a {
        Axis::Horizontal => 0,
        Axis::Vertical => 1,
    }
}

impl RoutingGraph {
    pub fn build(fabric: &Fabric) -> Self {
        let p = &fabric.params;
        let m = p.grid;
        let w = p.channel_width;
        let per_tile = 2 + p.outputs + p.inputs;
        let mut nodes = Vec::new();
        for tile in 0..m * m {
            let (x, y) = fabric.tile_coord(tile);
            let b = (x as u16, y as u16, x as u16, y as u16);
            nodes.push(Node {
                kind: NodeKind::Source { tile },
                capacity: UNLIMITED,
                bbox: b,
            });
            nodes.push(Node {
                kind: NodeKind::Sink { tile },
                capacity: UNLIMITED,
                bbox: b,
            });
            for pin in 0..p.outputs {
                nodes.push(Node {
                    kind: NodeKind::OutputPin { tile, pin },
                    capacity: 1,
                    bbox: b,
                });
            }
            for pin in 0..p.inputs {
                nodes.push(Node {
                    kind: NodeKind::InputPin { tile, pin },
                    capacity: 1,
                    bbox: b,
                });
            }
        }
        let first_wire = nodes.len();
        let mut wire_lookup: [Vec<Vec<Vec<NodeId>>>; 2] = [
            vec![vec![vec![0; m]; w]; m + 1],
            vec![vec![vec![0; m]; w]; m + 1],
        ];
        for axis in [Axis::Horizontal, Axis::Vertical] {
            for channel in 0..=m {
                for track in 0..w {
                    let mut start = 0;
                    while start < m {
                        let mut end = start;
                        while end + 1 < m && (end + 1 + track) % p.r_tile != 0 {
                            end += 1;
                        }
                        let id = nodes.len() as NodeId;
                        let (c, s, e) = (channel as u16, start as u16, end as u16);
                        let bbox = match axis {
                            Axis::Horizontal => (s, c, e, c),
                            Axis::Vertical => (c, s, c, e),
                        };
                        nodes.push(Node {
                            kind: NodeKind::Wire {
                                axis,
                                channel,
                                track,
                                start,
                                end,
                            },
                            capacity: 1,
                            bbox,
                        });
                        for pos in start..=end {
                            wire_lookup[axis_index(axis)][channel][track][pos] = id;
                        }
                        start = end + 1;
                    }
                }
            }
        }

        let mut adj: Vec<BTreeSet<(NodeId, u8)>> = vec![BTreeSet::new(); nodes.len()];
        let edge_code = |k: EdgeKind| match k {
            EdgeKind::Internal => 0u8,
            EdgeKind::Connection => 1,
            EdgeKind::Switch => 2,
        };
        let fc_out = p.output_tracks();
        let fc_in = p.input_tracks();
        let wire_at = |axis: Axis, channel: usize, track: usize, pos: usize| -> NodeId {
            wire_lookup[axis_index(axis)][channel][track][pos]
        };
        let side_channel = |x: usize, y: usize, side: Side| -> (Axis, usize, usize) {
            match side {
                Side::Bottom => (Axis::Horizontal, y, x),
                Side::Top => (Axis::Horizontal, y + 1, x),
                Side::Left => (Axis::Vertical, x, y),
                Side::Right => (Axis::Vertical, x + 1, y),
            }
        };
        let spread = |pin: usize, count: usize, j: usize| -> usize { (pin + j * w / count) % w };

        for tile in 0..m * m {
            let (x, y) = fabric.tile_coord(tile);
            let base = tile * per_tile;
            let source = base as NodeId;
            let sink = (base + 1) as NodeId;
            for pin in 0..p.outputs {
                let id = (base + 2 + pin) as NodeId;
                adj[source as usize].insert((id, edge_code(EdgeKind::Internal)));
                let (axis, channel, pos) = side_channel(x, y, Side::of_pin(pin));
                for j in 0..fc_out {
                    let wire = wire_at(axis, channel, spread(pin, fc_out, j), pos);
                    adj[id as usize].insert((wire, edge_code(EdgeKind::Connection)));
                }
            }
            for pin in 0..p.inputs {
                let id = (base + 2 + p.outputs + pin) as NodeId;
                adj[id as usize].insert((sink, edge_code(EdgeKind::Internal)));
                let (axis, channel, pos) = side_channel(x, y, Side::of_pin(pin));
                for j in 0..fc_in {
                    let wire = wire_at(axis, channel, spread(pin, fc_in, j), pos);
                    adj[wire as usize].insert((id, edge_code(EdgeKind::Connection)));
                }
            }
        }

        let graph_stub = SwitchGeometry {
            grid: m,
            channel_width: w,
            lookup: &wire_lookup,
        };
        for id in first_wire..nodes.len() {
            for end in [WireEnd::Low, WireEnd::High] {
                for target in graph_stub.end_targets(&nodes[id].kind, end) {
                    adj[id].insert((target, edge_code(EdgeKind::Switch)));
                }
            }
            for target in graph_stub.passing_targets(&nodes[id].kind) {
                adj[id].insert((target, edge_code(EdgeKind::Switch)));
            }
        }

        let mut offsets = Vec::with_capacity(nodes.len() + 1);
        let mut targets = Vec::new();
        let mut kinds = Vec::new();
        offsets.push(0);
        for set in adj {
            for (t, k) in set {
                targets.push(t);
                kinds.push(match k {
                    0 => EdgeKind::Internal,
                    1 => EdgeKind::Connection,
                    _ => EdgeKind::Switch,
                });
            }
            offsets.push(targets.len() as u32);
        }
        Self {
            grid: m,
            channel_width: w,
            r_tile: p.r_tile,
            inputs: p.inputs,
            outputs: p.outputs,
            nodes,
            offsets,
            targets,
            kinds,
            wire_lookup,
            first_wire,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self, id: NodeId) -> impl Iterator<Item = (NodeId, EdgeKind)> + '_ {
        let (a, b) = (
            self.offsets[id as usize] as usize,
            self.offsets[id as usize + 1] as usize,
        );
        self.targets[a..b]
            .iter()
            .copied()
            .zip(self.kinds[a..b].iter().copied())
    }

    pub fn edge_kind(&self, from: NodeId, to: NodeId) -> Option<EdgeKind> {
        self.edges(from).find(|&(t, _)| t == to).map(|(_, k)| k)
    }

    fn per_tile(&self) -> usize {
        2 + self.outputs + self.inputs
    }

    pub fn source(&self, tile: usize) -> NodeId {
        (tile * self.per_tile()) as NodeId
    }

    pub fn sink(&self, tile: usize) -> NodeId {
        (tile * self.per_tile() + 1) as NodeId
    }

    pub fn output_pin(&self, tile: usize, pin: usize) -> NodeId {
        (tile * self.per_tile() + 2 + pin) as NodeId
    }

    pub fn input_pin(&self, tile: usize, pin: usize) -> NodeId {
        (tile * self.per_tile() + 2 + self.outputs + pin) as NodeId
    }

    pub fn wire_ids(&self) -> std::ops::Range<usize> {
        self.first_wire..self.nodes.len()
    }

    pub fn wire_at(&self, axis: Axis, channel: usize, track: usize, pos: usize) -> NodeId {
        self.wire_lookup[axis_index(axis)][channel][track][pos]
    }

    /// Wires reached from one end of `wire` through its switch block.
    pub fn wire_end_targets(&self, wire: NodeId, end: WireEnd) -> Vec<NodeId> {
        SwitchGeometry {
            grid: self.grid,
            channel_width: self.channel_width,
            lookup: &self.wire_lookup,
        }
        .end_targets(&self.nodes[wire as usize].kind, end)
    }

    /// Switch point of a wire end, or `None` for non-wire nodes.
    pub fn wire_end_point(&self, wire: NodeId, end: WireEnd) -> Option<(usize, usize)> {
        wire_end(&self.nodes[wire as usize].kind, end).map(|(pt, _)| pt)
    }

    /// Plain-text dump for audits: one line per node followed by its edges.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "rr_graph grid={} W={} R_tile={} nodes={} edges={}\n",
            self.grid,
            self.channel_width,
            self.r_tile,
            self.num_nodes(),
            self.num_edges()
        );
        for (id, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "node {id} {:?} cap={}", n.kind, n.capacity);
            for (t, k) in self.edges(id as NodeId) {
                let _ = writeln!(out, "  -> {t} {k:?}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireEnd {
    Low,
    High,
}

/// Switch point and the side of it the wire occupies.
fn wire_end(kind: &NodeKind, end: WireEnd) -> Option<((usize, usize), Side)> {
    let NodeKind::Wire {
        axis,
        channel,
        start,
        end: last,
        ..
    } = *kind
    else {
        return None;
    };
    Some(match (axis, end) {
        (Axis::Horizontal, WireEnd::Low) => ((start, channel), Side::Right),
        (Axis::Horizontal, WireEnd::High) => ((last + 1, channel), Side::Left),
        (Axis::Vertical, WireEnd::Low) => ((channel, start), Side::Top),
        (Axis::Vertical, WireEnd::High) => ((channel, last + 1), Side::Bottom),
    })
}

struct SwitchGeometry<'a> {
    grid: usize,
    channel_width: usize,
    lookup: &'a [Vec<Vec<Vec<NodeId>>>; 2],
}

impl SwitchGeometry<'_> {
    /// The wire occupying `side` of switch point `(x, y)` on `track`.
    fn wire_on_side(&self, (x, y): (usize, usize), side: Side, track: usize) -> Option<NodeId> {
        let m = self.grid;
        let (axis, channel, pos) = match side {
            Side::Left if x >= 1 => (Axis::Horizontal, y, x - 1),
            Side::Right if x < m => (Axis::Horizontal, y, x),
            Side::Bottom if y >= 1 => (Axis::Vertical, x, y - 1),
            Side::Top if y < m => (Axis::Vertical, x, y),
            _ => return None,
        };
        Some(self.lookup[axis_index(axis)][channel][track][pos])
    }

    /// Turns taken at switch points a wire passes through (every point
    /// strictly inside its span). Both halves of the wire act as an entering
    /// side; the straight-through direction is the wire itself.
    fn passing_targets(&self, kind: &NodeKind) -> Vec<NodeId> {
        let NodeKind::Wire {
            axis,
            channel,
            track,
            start,
            end,
        } = *kind
        else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for k in start + 1..=end {
            let (point, halves, turns) = match axis {
                Axis::Horizontal => (
                    (k, channel),
                    [Side::Left, Side::Right],
                    [Side::Top, Side::Bottom],
                ),
                Axis::Vertical => (
                    (channel, k),
                    [Side::Bottom, Side::Top],
                    [Side::Left, Side::Right],
                ),
            };
            for from in halves {
                for to in turns {
                    let t = wilton_track(from, to, track, self.channel_width);
                    if let Some(id) = self.wire_on_side(point, to, t) {
                        if !out.contains(&id) {
                            out.push(id);
                        }
                    }
                }
            }
        }
        out
    }

    fn end_targets(&self, kind: &NodeKind, end: WireEnd) -> Vec<NodeId> {
        let Some((point, from)) = wire_end(kind, end) else {
            return Vec::new();
        };
        let NodeKind::Wire { track, .. } = *kind else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(3);
        for to in Side::ALL {
            if to == from {
                continue;
            }
            let t = wilton_track(from, to, track, self.channel_width);
            if let Some(id) = self.wire_on_side(point, to, t) {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
        }
        out
    }
}
