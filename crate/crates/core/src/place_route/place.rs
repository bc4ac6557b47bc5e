//! Simulated-annealing placement minimizing total half-perimeter wirelength.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::netlist::Netlist;
use super::PlaceRouteError;

/// Block-to-tile assignment; `sites[b] = (x, y)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub grid: usize,
    pub sites: Vec<(usize, usize)>,
}

impl Placement {
    pub fn tile_of(&self, block: usize) -> usize {
        let (x, y) = self.sites[block];
        y * self.grid + x
    }

    /// Injective and inside the grid.
    pub fn is_legal(&self) -> bool {
        let mut used = vec![false; self.grid * self.grid];
        for &(x, y) in &self.sites {
            if x >= self.grid || y >= self.grid || used[y * self.grid + x] {
                return false;
            }
            used[y * self.grid + x] = true;
        }
        true
    }
}

fn net_hpwl(netlist: &Netlist, net: usize, sites: &[(usize, usize)]) -> u64 {
    let n = &netlist.nets[net];
    let (mut xl, mut yl) = sites[n.source];
    let (mut xh, mut yh) = (xl, yl);
    for &s in &n.sinks {
        let (x, y) = sites[s];
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    ((xh - xl) + (yh - yl)) as u64
}

/// Sum over nets of the bounding-box half perimeter, in tiles.
pub fn hpwl(netlist: &Netlist, placement: &Placement) -> u64 {
    (0..netlist.nets.len())
        .map(|k| net_hpwl(netlist, k, &placement.sites))
        .sum()
}

/// Default grid side: `ceil(sqrt(blocks / 0.9))`, about 90% tile occupancy.
pub fn default_grid(num_blocks: usize) -> usize {
    ((num_blocks as f64 / 0.9).sqrt().ceil() as usize).max(1)
}

struct Move {
    block: usize,
    origin: (usize, usize),
    other: Option<usize>,
    delta: i64,
}

struct Annealer<'a> {
    netlist: &'a Netlist,
    block_nets: Vec<Vec<usize>>,
    grid: usize,
    sites: Vec<(usize, usize)>,
    occupant: Vec<Option<usize>>,
    net_cost: Vec<u64>,
    cost: u64,
    stamp: Vec<u32>,
    epoch: u32,
    touched: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Annealer<'_> {
    fn tile(&self, (x, y): (usize, usize)) -> usize {
        y * self.grid + x
    }

    /// Swaps `b` into `to`, moving the occupant (if any) to `b`'s old site.
    fn apply(&mut self, b: usize, to: (usize, usize), other: Option<usize>) {
        let from = self.sites[b];
        let (ft, tt) = (self.tile(from), self.tile(to));
        self.sites[b] = to;
        self.occupant[tt] = Some(b);
        self.occupant[ft] = other;
        if let Some(o) = other {
            self.sites[o] = from;
        }
    }

    /// Moves a random block to a random site within `rlim` (swapping with
    /// the occupant) and returns the applied move with its cost delta.
    fn propose(&mut self, rlim: usize) -> Option<Move> {
        let b = self.rng.gen_range(0..self.sites.len());
        let origin = self.sites[b];
        let (x, y) = origin;
        let to = (
            self.rng
                .gen_range(x.saturating_sub(rlim)..=(x + rlim).min(self.grid - 1)),
            self.rng
                .gen_range(y.saturating_sub(rlim)..=(y + rlim).min(self.grid - 1)),
        );
        if to == origin {
            return None;
        }
        let other = self.occupant[self.tile(to)];
        self.apply(b, to, other);

        self.epoch = self.epoch.wrapping_add(1);
        self.touched.clear();
        let mut delta = 0i64;
        for blk in [Some(b), other].into_iter().flatten() {
            for &k in &self.block_nets[blk] {
                if self.stamp[k] == self.epoch {
                    continue;
                }
                self.stamp[k] = self.epoch;
                self.touched.push(k);
                delta += net_hpwl(self.netlist, k, &self.sites) as i64 - self.net_cost[k] as i64;
            }
        }
        Some(Move {
            block: b,
            origin,
            other,
            delta,
        })
    }

    fn commit(&mut self, mv: &Move) {
        for &k in &self.touched {
            self.net_cost[k] = net_hpwl(self.netlist, k, &self.sites);
        }
        self.cost = (self.cost as i64 + mv.delta) as u64;
    }

    fn undo(&mut self, mv: &Move) {
        self.apply(mv.block, mv.origin, mv.other);
    }
}

/// Anneals a placement of `netlist` onto a `grid × grid` fabric.
///
/// Schedule: initial temperature is 20× the standard deviation of the cost
/// over 100 unconditionally accepted random moves; `10·blocks^(4/3)` moves
/// per temperature; cooling factor and move range adapt to the acceptance
/// ratio; a final greedy pass runs once the temperature falls below
/// `0.005 · cost / nets`. Deterministic for a given `seed`.
pub fn place(netlist: &Netlist, grid: usize, seed: u64) -> Result<Placement, PlaceRouteError> {
    let nb = netlist.num_blocks;
    if grid == 0 || nb > grid * grid {
        return Err(PlaceRouteError::GridTooSmall {
            blocks: nb,
            tiles: grid * grid,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tiles: Vec<usize> = (0..grid * grid).collect();
    for i in (1..tiles.len()).rev() {
        let j = rng.gen_range(0..=i);
        tiles.swap(i, j);
    }
    let sites: Vec<(usize, usize)> = tiles[..nb].iter().map(|&t| (t % grid, t / grid)).collect();
    if netlist.nets.is_empty() || nb < 2 || grid < 2 {
        return Ok(Placement { grid, sites });
    }
    let mut occupant = vec![None; grid * grid];
    for (b, &(x, y)) in sites.iter().enumerate() {
        occupant[y * grid + x] = Some(b);
    }
    let net_cost: Vec<u64> = (0..netlist.nets.len())
        .map(|k| net_hpwl(netlist, k, &sites))
        .collect();
    let cost = net_cost.iter().sum();
    let mut a = Annealer {
        netlist,
        block_nets: netlist.block_nets(),
        grid,
        sites,
        occupant,
        net_cost,
        cost,
        stamp: vec![0; netlist.nets.len()],
        epoch: 0,
        touched: Vec::new(),
        rng,
    };

    let mut samples = Vec::with_capacity(100);
    while samples.len() < 100 {
        if let Some(mv) = a.propose(grid) {
            a.commit(&mv);
            samples.push(a.cost as f64);
        }
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    let mut temperature = 20.0 * var.sqrt();
    let moves_per_temp = ((10.0 * (nb as f64).powf(4.0 / 3.0)).round() as usize).max(1);
    let mut rlim = (grid - 1) as f64;
    let num_nets = netlist.nets.len() as f64;

    let mut best_cost = a.cost;
    let mut best_sites = a.sites.clone();
    let mut rounds = 0;
    loop {
        let quench = temperature <= 0.0;
        let limit = rlim.round().max(1.0) as usize;
        let mut accepted = 0usize;
        for _ in 0..moves_per_temp {
            let Some(mv) = a.propose(limit) else {
                continue;
            };
            let accept = mv.delta <= 0
                || (!quench && a.rng.gen::<f64>() < (-(mv.delta as f64) / temperature).exp());
            if accept {
                a.commit(&mv);
                accepted += 1;
                if a.cost < best_cost {
                    best_cost = a.cost;
                    best_sites.clone_from(&a.sites);
                }
            } else {
                a.undo(&mv);
            }
        }
        if quench || best_cost == 0 {
            break;
        }
        rounds += 1;
        let alpha = accepted as f64 / moves_per_temp as f64;
        temperature *= if alpha > 0.96 {
            0.5
        } else if alpha > 0.8 {
            0.9
        } else if alpha > 0.15 {
            0.95
        } else {
            0.8
        };
        rlim = (rlim * (1.0 - 0.44 + alpha)).clamp(1.0, (grid - 1) as f64);
        if temperature < 0.005 * a.cost as f64 / num_nets || rounds >= 2000 {
            temperature = 0.0;
        }
    }
    Ok(Placement {
        grid,
        sites: best_sites,
    })
}
