//! Set-oriented reachability on a cell grid.
//!
//! The box is cut into cells and every mode contributes the edges
//! `c -> cell(Phi^i(t, x_s))` for sample points `x_s` of `c` and a short
//! sub-schedule of times up to `tau`. Switching sequences are paths in the
//! union graph, so strongly connected components stand in for control sets
//! and forward-closed components for invariant control sets.
//!
//! Cell over-approximation can merge a non-closed invariant control set
//! with its boundary; reports carry `h` so results can be refined.

mod graph;
mod grid;
mod scc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use graph::{build_reach_graph, Csr, GraphStats, ReachGraph, SUB_SCHEDULE};
pub use grid::{discretize, CellGrid};
pub use scc::tarjan;

pub const LIMITATION_NOTE: &str = "cell-level over-approximation: a non-closed invariant control set may merge \
with its boundary; variant control sets with empty interior may be missed; refine h to tighten";

/// Sorted, duplicate-free set of cell indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellSet(Vec<usize>);

impl CellSet {
    pub fn new(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self(cells)
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self(mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect())
    }

    pub fn cells(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.0.binary_search(&cell).is_ok()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &c in &self.0 {
            m[c] = true;
        }
        m
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.0.iter().all(|&c| other.contains(c))
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        self.0.iter().any(|&c| other.contains(c))
    }

    /// Axis-aligned hull of the cells in state coordinates.
    pub fn bounding_box(&self, grid: &CellGrid) -> Option<Bbox> {
        let mut it = self.0.iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = grid.cell_bounds(first);
        for &c in it {
            let (l, h) = grid.cell_bounds(c);
            for k in 0..grid.dim() {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(h[k]);
            }
        }
        Some(Bbox { lo, hi })
    }

    /// Cells within Chebyshev index distance `radius` of the set.
    pub fn inflate(&self, grid: &CellGrid, radius: usize) -> CellSet {
        if radius == 0 {
            return self.clone();
        }
        let mut mask = vec![false; grid.len()];
        for &c in &self.0 {
            for n in grid.neighborhood(c, radius) {
                mask[n] = true;
            }
        }
        CellSet::from_mask(&mask)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    Invariant,
    Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub kind: ClassKind,
    /// True when the class can return to itself (always for more than one
    /// cell; a self-loop for singletons).
    pub self_reach: bool,
    pub cells: CellSet,
    pub bbox: Bbox,
}

/// Control-set classification of a reachability graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSetReport {
    pub grid: CellGrid,
    pub tau: f64,
    pub samples_per_cell: usize,
    pub classes: Vec<ControlSet>,
    pub limitation: String,
}

impl ControlSetReport {
    pub fn invariant(&self) -> impl Iterator<Item = (usize, &ControlSet)> {
        self.classes.iter().enumerate().filter(|(_, c)| c.kind == ClassKind::Invariant)
    }

    pub fn invariant_count(&self) -> usize {
        self.invariant().count()
    }

    pub fn variant(&self) -> impl Iterator<Item = (usize, &ControlSet)> {
        self.classes.iter().enumerate().filter(|(_, c)| c.kind == ClassKind::Variant)
    }

    /// Checks the structural invariants of a report: disjoint classes with
    /// cells inside the grid.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        let mut owner = vec![false; n];
        for (k, class) in self.classes.iter().enumerate() {
            if class.cells.is_empty() {
                return Err(Error::config(format!("classes[{k}].cells"), "empty class"));
            }
            let cells = class.cells.cells();
            if cells.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(format!("classes[{k}].cells"), "cells must be strictly increasing"));
            }
            for &c in cells {
                if c >= n {
                    return Err(Error::config(format!("classes[{k}].cells"), format!("cell {c} outside grid")));
                }
                if owner[c] {
                    return Err(Error::config(format!("classes[{k}].cells"), format!("cell {c} in two classes")));
                }
                owner[c] = true;
            }
        }
        Ok(())
    }
}

/// Classifies the union graph: nontrivial strongly connected components
/// become classes, invariant when no edge leaves them.
pub fn control_sets(graph: &ReachGraph) -> ControlSetReport {
    let g = graph.union();
    let (comp, ncomp) = tarjan(g);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for (v, &c) in comp.iter().enumerate() {
        members[c].push(v);
    }
    let mut self_loop = vec![false; ncomp];
    let mut leaves = vec![false; ncomp];
    for v in 0..g.nodes() {
        for &w in g.successors(v) {
            let w = w as usize;
            if w == v {
                self_loop[comp[v]] = true;
            } else if comp[w] != comp[v] {
                leaves[comp[v]] = true;
            }
        }
    }
    let mut classes: Vec<ControlSet> = members
        .into_iter()
        .enumerate()
        .filter(|(c, m)| m.len() > 1 || self_loop[*c])
        .map(|(c, m)| {
            let cells = CellSet::new(m);
            let bbox = cells.bounding_box(&graph.grid).expect("nonempty");
            ControlSet {
                kind: if leaves[c] { ClassKind::Variant } else { ClassKind::Invariant },
                self_reach: true,
                cells,
                bbox,
            }
        })
        .collect();
    classes.sort_by_key(|c| c.cells.cells()[0]);
    ControlSetReport {
        grid: graph.grid.clone(),
        tau: graph.tau,
        samples_per_cell: graph.samples_per_cell,
        classes,
        limitation: LIMITATION_NOTE.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainOfAttraction {
    pub weak: CellSet,
    pub strict: CellSet,
}

/// Cells whose forward closure meets the target class (`weak`), and those
/// among them that reach no other invariant class (`strict`).
pub fn domain_of_attraction(
    graph: &ReachGraph,
    report: &ControlSetReport,
    target: usize,
) -> Result<DomainOfAttraction> {
    let class = report.classes.get(target).ok_or_else(|| Error::arg("target", format!("no class {target}")))?;
    if class.kind != ClassKind::Invariant {
        return Err(Error::arg("target", format!("class {target} is not invariant")));
    }
    let back = graph.union().transpose();
    let weak = back.closure(class.cells.cells().iter().copied());
    let others = back
        .closure(report.invariant().filter(|(k, _)| *k != target).flat_map(|(_, c)| c.cells.cells().iter().copied()));
    let strict: Vec<bool> = weak.iter().zip(&others).map(|(&w, &o)| w && !o).collect();
    Ok(DomainOfAttraction { weak: CellSet::from_mask(&weak), strict: CellSet::from_mask(&strict) })
}

/// Cells reachable from every cell: the unique forward-closed component when
/// there is exactly one, otherwise empty.
pub fn accessible_set(graph: &ReachGraph) -> CellSet {
    let g = graph.union();
    let (comp, ncomp) = tarjan(g);
    let mut is_sink = vec![true; ncomp];
    for v in 0..g.nodes() {
        if g.successors(v).iter().any(|&w| comp[w as usize] != comp[v]) {
            is_sink[comp[v]] = false;
        }
    }
    let sinks: Vec<usize> = (0..ncomp).filter(|&c| is_sink[c]).collect();
    match sinks.as_slice() {
        [only] => CellSet::new((0..g.nodes()).filter(|&v| comp[v] == *only).collect()),
        _ => CellSet::default(),
    }
}

/// Intersection of forward closures over the `inflation`-cell
/// neighborhood of `class`.
pub fn local_accessible_set(graph: &ReachGraph, class: &CellSet, inflation: usize) -> CellSet {
    let g = graph.union();
    let n = g.nodes();
    let nbhd = class.inflate(&graph.grid, inflation);
    let (comp, _) = tarjan(g);
    let mut done: Vec<usize> = Vec::new();
    let mut acc = vec![true; n];
    for &c in nbhd.cells() {
        if done.contains(&comp[c]) {
            continue;
        }
        done.push(comp[c]);
        let reach = g.closure([c]);
        for (a, r) in acc.iter_mut().zip(reach) {
            *a &= r;
        }
    }
    if nbhd.is_empty() {
        return CellSet::default();
    }
    CellSet::from_mask(&acc)
}
