use serde::{Deserialize, Serialize};

use super::chain::{run_chain, simulate_into, ChainState};
use super::rng::Stream;
use crate::error::{Error, Result};
use crate::flow::{PathSink, SampleClock};
use crate::reach::CellGrid;
use crate::sysdef::{HybridState, SwitchingSystem};

/// Normalization tolerance for the normalized view.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    DiscreteChain,
    ContinuousTime,
}

/// Weighted occupation of `(cell, mode)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureFile", into = "MeasureFile")]
pub struct EmpiricalMeasure {
    pub grid: CellGrid,
    modes: usize,
    weights: Vec<f64>,
    pub kind: MeasureKind,
    /// Burn-in time (continuous) or number of discarded chain steps.
    pub burn_in: f64,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

/// Sparse on-disk form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureFile {
    kind: MeasureKind,
    grid: CellGrid,
    modes: usize,
    burn_in: f64,
    total_weight: f64,
    seed: Option<u64>,
    config_hash: Option<String>,
    /// `(cell, mode, weight)` for nonzero weights.
    entries: Vec<(usize, usize, f64)>,
}

impl From<EmpiricalMeasure> for MeasureFile {
    fn from(m: EmpiricalMeasure) -> Self {
        let total_weight = m.total_weight();
        let entries = m.entries().collect();
        MeasureFile {
            kind: m.kind,
            grid: m.grid,
            modes: m.modes,
            burn_in: m.burn_in,
            total_weight,
            seed: m.seed,
            config_hash: m.config_hash,
            entries,
        }
    }
}

impl TryFrom<MeasureFile> for EmpiricalMeasure {
    type Error = String;

    fn try_from(f: MeasureFile) -> std::result::Result<Self, String> {
        let mut m = EmpiricalMeasure::new(f.grid, f.modes, f.kind);
        m.burn_in = f.burn_in;
        m.seed = f.seed;
        m.config_hash = f.config_hash;
        for (k, (cell, mode, w)) in f.entries.into_iter().enumerate() {
            if cell >= m.grid.len() || mode >= m.modes {
                return Err(format!("entries[{k}]: ({cell}, {mode}) out of range"));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(format!("entries[{k}]: weight {w} is not a nonnegative number"));
            }
            m.add(cell, mode, w);
        }
        let total = m.total_weight();
        if (total - f.total_weight).abs() > 1e-9 * total.max(1.0) {
            return Err(format!("total_weight {} disagrees with entries ({total})", f.total_weight));
        }
        Ok(m)
    }
}

impl EmpiricalMeasure {
    pub fn new(grid: CellGrid, modes: usize, kind: MeasureKind) -> Self {
        let weights = vec![0.0; grid.len() * modes];
        Self { grid, modes, weights, kind, burn_in: 0.0, seed: None, config_hash: None }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn add(&mut self, cell: usize, mode: usize, w: f64) {
        self.weights[cell * self.modes + mode] += w;
    }

    pub fn weight(&self, cell: usize, mode: usize) -> f64 {
        self.weights[cell * self.modes + mode]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Normalized masses, same layout as the weights.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total_weight();
        if total == 0.0 {
            return vec![0.0; self.weights.len()];
        }
        self.weights.iter().map(|w| w / total).collect()
    }

    /// Nonzero `(cell, mode, weight)` triples in index order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(k, &w)| (k / self.modes, k % self.modes, w))
    }

    /// Normalized mass per cell summed over modes.
    pub fn cell_masses(&self) -> Vec<f64> {
        let p = self.normalized();
        p.chunks(self.modes).map(|c| c.iter().sum()).collect()
    }

    /// Adds another measure's weights. Grids, mode counts and kinds must agree.
    pub fn merge(&mut self, other: &EmpiricalMeasure) -> Result<()> {
        if !self.grid.same_shape(&other.grid) || self.modes != other.modes || self.kind != other.kind {
            return Err(Error::GridMismatch("measures live on different grids".into()));
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("measure.entries", "weights must be finite and nonnegative"));
        }
        if self.total_weight() <= 0.0 {
            return Err(Error::config("measure.total_weight", "measure is empty"));
        }
        let s: f64 = self.normalized().iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::config("measure", format!("normalized mass sums to {s}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let m: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.into_inner().to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

/// `(cell, mode)` pairs whose normalized weight exceeds `threshold`.
pub fn support_estimate(measure: &EmpiricalMeasure, threshold: f64) -> Result<Vec<(usize, usize)>> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::arg("threshold", format!("must lie in [0, 1), got {threshold}")));
    }
    let p = measure.normalized();
    Ok(p.iter()
        .enumerate()
        .filter(|(_, w)| **w > threshold)
        .map(|(k, _)| (k / measure.modes, k % measure.modes))
        .collect())
}

/// Path sink accumulating time spent per `(cell, mode)` after `burn_in`,
/// using the left endpoint of each sample interval.
pub struct OccupationAccumulator<'a> {
    grid: &'a CellGrid,
    burn_in: f64,
    modes: usize,
    weights: Vec<f64>,
    prev: Option<(f64, usize)>,
}

impl<'a> OccupationAccumulator<'a> {
    pub fn new(grid: &'a CellGrid, modes: usize, burn_in: f64) -> Self {
        Self { grid, burn_in, modes, weights: vec![0.0; grid.len() * modes], prev: None }
    }

    pub fn finish(self) -> EmpiricalMeasure {
        let mut m = EmpiricalMeasure::new(self.grid.clone(), self.modes, MeasureKind::ContinuousTime);
        m.weights = self.weights;
        m.burn_in = self.burn_in;
        m
    }
}

impl PathSink for OccupationAccumulator<'_> {
    fn push(&mut self, t: f64, x: &[f64], mode: usize, _breakpoint: bool) {
        if let Some((t_prev, slot)) = self.prev {
            let dt = t - t_prev.max(self.burn_in);
            if dt > 0.0 {
                self.weights[slot] += dt;
            }
        }
        self.prev = Some((t, self.grid.cell_of(x) * self.modes + mode));
    }
}

fn check_window(horizon: f64, burn_in: f64) -> Result<()> {
    if !(burn_in >= 0.0) {
        return Err(Error::arg("burn_in", format!("must be nonnegative, got {burn_in}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::arg("horizon", format!("must be positive, got {horizon}")));
    }
    if burn_in >= horizon {
        return Err(Error::EmptyWindow { burn_in, horizon });
    }
    Ok(())
}

/// Time-occupation measure of one run of `Z_t` on `[burn_in, horizon]`,
/// sampled every `sample_dt`.
pub fn occupation_measure(
    sys: &SwitchingSystem,
    grid: &CellGrid,
    z0: &HybridState,
    horizon: f64,
    burn_in: f64,
    sample_dt: f64,
    stream: &mut Stream,
) -> Result<EmpiricalMeasure> {
    check_window(horizon, burn_in)?;
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::arg("sample_dt", format!("must be positive, got {sample_dt}")));
    }
    if grid.dim() != sys.dim() {
        return Err(Error::GridMismatch(format!("grid has dimension {}, system {}", grid.dim(), sys.dim())));
    }
    let mut acc = OccupationAccumulator::new(grid, sys.modes(), burn_in);
    simulate_into(sys, z0, horizon, &SampleClock::Uniform(sample_dt), stream, &mut acc, |_| {})?;
    Ok(acc.finish())
}

/// Occupation measure of the embedded chain: each state `Z~_n` with
/// `burn_in <= n <= steps` gets unit weight.
pub fn chain_occupation(
    sys: &SwitchingSystem,
    grid: &CellGrid,
    z0: &HybridState,
    steps: u64,
    burn_in: u64,
    stream: &mut Stream,
) -> Result<EmpiricalMeasure> {
    if burn_in > steps {
        return Err(Error::EmptyWindow { burn_in: burn_in as f64, horizon: steps as f64 });
    }
    if grid.dim() != sys.dim() {
        return Err(Error::GridMismatch(format!("grid has dimension {}, system {}", grid.dim(), sys.dim())));
    }
    let mut m = EmpiricalMeasure::new(grid.clone(), sys.modes(), MeasureKind::DiscreteChain);
    m.burn_in = burn_in as f64;
    run_chain(sys, z0, steps, stream, |c: &ChainState| {
        if c.n >= burn_in {
            m.add(grid.cell_of(&c.state.x), c.state.mode, 1.0);
        }
    })?;
    Ok(m)
}

/// Runs `f(id)` for `id in 0..n`, in parallel when enabled, keeping order.
pub(crate) fn ordered_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Merged time-occupation measure of independent runs, run `k` starting at
/// `starts[k]` with stream `(seed, k)`. Identical for any worker count.
pub fn ensemble_occupation(
    sys: &SwitchingSystem,
    grid: &CellGrid,
    starts: &[HybridState],
    horizon: f64,
    burn_in: f64,
    sample_dt: f64,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    check_window(horizon, burn_in)?;
    if starts.is_empty() {
        return Err(Error::arg("starts", "no trajectories requested"));
    }
    let runs = ordered_map(starts.len(), |k| {
        occupation_measure(sys, grid, &starts[k], horizon, burn_in, sample_dt, &mut Stream::new(seed, k as u64))
    });
    let mut it = runs.into_iter();
    let mut total = it.next().expect("nonempty")?;
    for m in it {
        total.merge(&m?)?;
    }
    total.seed = Some(seed);
    Ok(total)
}
