use serde::{Deserialize, Serialize};

use super::grid::CellGrid;
use crate::error::{Error, Result};
use crate::flow::dopri::{self, Tolerance};
use crate::sysdef::SwitchingSystem;

/// Fractions of `tau` at which sample trajectories are recorded.
pub const SUB_SCHEDULE: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Compressed adjacency lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    pub fn from_lists(lists: &[Vec<u32>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut targets = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in lists {
            targets.extend_from_slice(l);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn nodes(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn edges(&self) -> usize {
        self.targets.len()
    }

    pub fn successors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn transpose(&self) -> Csr {
        let n = self.nodes();
        let mut indeg = vec![0usize; n + 1];
        for &t in &self.targets {
            indeg[t as usize + 1] += 1;
        }
        for v in 0..n {
            indeg[v + 1] += indeg[v];
        }
        let offsets = indeg.clone();
        let mut fill = indeg;
        let mut targets = vec![0u32; self.targets.len()];
        for v in 0..n {
            for &t in self.successors(v) {
                targets[fill[t as usize]] = v as u32;
                fill[t as usize] += 1;
            }
        }
        Csr { offsets, targets }
    }

    /// Cells reachable from `sources` (sources included).
    pub fn closure(&self, sources: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut seen = vec![false; self.nodes()];
        let mut stack: Vec<usize> = Vec::new();
        for s in sources {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(v) = stack.pop() {
            for &w in self.successors(v) {
                let w = w as usize;
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}

/// Mode-wise time-`tau` cell transitions.
#[derive(Debug, Clone)]
pub struct ReachGraph {
    pub grid: CellGrid,
    pub tau: f64,
    pub samples_per_cell: usize,
    per_mode: Vec<Csr>,
    union: Csr,
    /// Cells where at least one sample trajectory failed to integrate.
    pub flagged: Vec<usize>,
    /// Sample endpoints found beyond the guard band (clamped into the grid).
    pub escapes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphStats {
    pub cells: usize,
    pub modes: usize,
    pub edges_per_mode: Vec<usize>,
    pub union_edges: usize,
    pub flagged: usize,
    pub escapes: usize,
}

impl ReachGraph {
    pub fn modes(&self) -> usize {
        self.per_mode.len()
    }

    pub fn mode_graph(&self, mode: usize) -> &Csr {
        &self.per_mode[mode]
    }

    /// Union over modes.
    pub fn union(&self) -> &Csr {
        &self.union
    }

    pub fn successors(&self, mode: usize, cell: usize) -> &[u32] {
        self.per_mode[mode].successors(cell)
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            cells: self.grid.len(),
            modes: self.modes(),
            edges_per_mode: self.per_mode.iter().map(Csr::edges).collect(),
            union_edges: self.union.edges(),
            flagged: self.flagged.len(),
            escapes: self.escapes,
        }
    }

    /// Assembles a graph from explicit per-mode adjacency lists.
    pub fn from_edges(grid: CellGrid, tau: f64, lists: Vec<Vec<Vec<u32>>>) -> Self {
        let n = grid.len();
        let mut union_lists: Vec<Vec<u32>> = vec![Vec::new(); n];
        let per_mode = lists
            .into_iter()
            .map(|mut l| {
                for (c, succ) in l.iter_mut().enumerate() {
                    succ.sort_unstable();
                    succ.dedup();
                    union_lists[c].extend_from_slice(succ);
                }
                Csr::from_lists(&l)
            })
            .collect();
        for succ in &mut union_lists {
            succ.sort_unstable();
            succ.dedup();
        }
        Self {
            grid,
            tau,
            samples_per_cell: 0,
            per_mode,
            union: Csr::from_lists(&union_lists),
            flagged: Vec::new(),
            escapes: 0,
        }
    }
}

struct CellEdges {
    per_mode: Vec<Vec<u32>>,
    failed: bool,
    escapes: usize,
}

fn cell_edges(sys: &SwitchingSystem, grid: &CellGrid, cell: usize, tau: f64, samples: usize) -> CellEdges {
    let guard = sys.guard_band();
    let points = grid.sample_points(cell, samples);
    let times: Vec<f64> = SUB_SCHEDULE.iter().map(|f| f * tau).collect();
    let mut failed = false;
    let mut escapes = 0;
    let mut buf = vec![0.0; grid.dim()];
    let per_mode = (0..sys.modes())
        .map(|mode| {
            let field = sys.field(mode);
            let mut targets: Vec<u32> = Vec::with_capacity(points.len() * times.len());
            for p in &points {
                let mut next = 0;
                let res = dopri::integrate(
                    &|y: &[f64], out: &mut [f64]| field.eval_into(y, out),
                    p,
                    tau,
                    Tolerance::default(),
                    |step| {
                        while next < times.len() && times[next] <= step.t1 {
                            step.eval_into(times[next], &mut buf);
                            if sys.outside_distance(&buf) > guard {
                                escapes += 1;
                            }
                            targets.push(grid.cell_of(&buf) as u32);
                            next += 1;
                        }
                    },
                );
                if res.is_err() {
                    failed = true;
                }
            }
            targets.sort_unstable();
            targets.dedup();
            targets
        })
        .collect();
    CellEdges { per_mode, failed, escapes }
}

/// Builds the reachability graph: for every mode and cell, edges to the
/// cells of `Phi^i(t, x_s)` for each sample `x_s` and `t` in
/// `{tau/4, tau/2, 3tau/4, tau}`.
pub fn build_reach_graph(
    sys: &SwitchingSystem,
    grid: &CellGrid,
    tau: f64,
    samples_per_cell: usize,
) -> Result<ReachGraph> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::arg("tau", format!("must be positive, got {tau}")));
    }
    if samples_per_cell == 0 {
        return Err(Error::arg("samples", "need at least one sample per cell"));
    }
    if grid.dim() != sys.dim() {
        return Err(Error::GridMismatch(format!("grid has dimension {}, system {}", grid.dim(), sys.dim())));
    }
    let n = grid.len();

    #[cfg(feature = "parallel")]
    let cells: Vec<CellEdges> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(|c| cell_edges(sys, grid, c, tau, samples_per_cell)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<CellEdges> = (0..n).map(|c| cell_edges(sys, grid, c, tau, samples_per_cell)).collect();

    let modes = sys.modes();
    let mut lists: Vec<Vec<Vec<u32>>> = vec![Vec::with_capacity(n); modes];
    let mut flagged = Vec::new();
    let mut escapes = 0;
    for (c, ce) in cells.into_iter().enumerate() {
        if ce.failed {
            flagged.push(c);
        }
        escapes += ce.escapes;
        for (m, mut succ) in ce.per_mode.into_iter().enumerate() {
            if succ.is_empty() {
                // all samples failed: fall back to a self-loop
                succ.push(c as u32);
            }
            lists[m].push(succ);
        }
    }
    let mut g = ReachGraph::from_edges(grid.clone(), tau, lists);
    g.samples_per_cell = samples_per_cell;
    g.flagged = flagged;
    g.escapes = escapes;
    Ok(g)
}
