use serde::{Deserialize, Serialize};

use super::chain::{check_start, simulate_into};
use super::measure::{ordered_map, support_estimate, EmpiricalMeasure};
use super::rng::Stream;
use super::stats::{fit_line, t_quantile, Proportion};
use crate::error::{Error, Result};
use crate::flow::{trace_schedule, JumpSchedule, PathSink, SampleClock};
use crate::reach::{CellGrid, CellSet, ControlSetReport};
use crate::sysdef::{HybridState, SwitchingSystem};

/// Mass share above which a run is attributed to a single class.
pub const DOMINANCE: f64 = 0.99;
/// Per-mode coverage above which a class counts as covered.
pub const FULL_COVERAGE: f64 = 0.95;

pub const GRID_NOTE: &str = "masses and distances are computed on (cell, mode) histograms at the grid resolution";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMass {
    pub class: usize,
    pub cells: usize,
    /// Mass on the inflated class.
    pub mass: f64,
    /// Fraction of the class cells in the support, per mode.
    pub coverage_per_mode: Vec<f64>,
}

impl ClassMass {
    pub fn min_coverage(&self) -> f64 {
        self.coverage_per_mode.iter().copied().fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub support: Vec<(usize, usize)>,
    pub threshold: f64,
    pub inflation: usize,
    /// Mass on cells farther than `inflation` cells from every invariant class.
    pub excess_mass: f64,
    pub per_class: Vec<ClassMass>,
    /// Invariant classes whose cells meet the support.
    pub overlapping_classes: Vec<usize>,
    /// Class holding at least `DOMINANCE` of the mass.
    pub dominant_class: Option<usize>,
    /// Class covered in every mode to at least `FULL_COVERAGE`.
    pub covered_class: Option<usize>,
    pub note: String,
}

/// Compares a measure with the invariant classes of `report`.
pub fn verify_support_inclusion(
    measure: &EmpiricalMeasure,
    report: &ControlSetReport,
    inflation: usize,
    threshold: f64,
) -> Result<SupportReport> {
    if !measure.grid.same_shape(&report.grid) {
        return Err(Error::GridMismatch("measure and control-set report use different grids".into()));
    }
    let grid = &report.grid;
    let n = grid.len();
    let modes = measure.modes();
    let support = support_estimate(measure, threshold)?;
    let mut in_support = vec![false; n * modes];
    for &(c, i) in &support {
        in_support[c * modes + i] = true;
    }
    let cell_mass = measure.cell_masses();

    // first inflated class containing each cell
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let invariant: Vec<(usize, &CellSet)> = report.invariant().map(|(k, c)| (k, &c.cells)).collect();
    for (k, cells) in &invariant {
        for &c in cells.inflate(grid, inflation).cells() {
            owner[c].get_or_insert(*k);
        }
    }
    let mut per_class: Vec<ClassMass> = invariant
        .iter()
        .map(|(k, cells)| {
            let coverage_per_mode = (0..modes)
                .map(|i| {
                    cells.cells().iter().filter(|&&c| in_support[c * modes + i]).count() as f64 / cells.len() as f64
                })
                .collect();
            ClassMass { class: *k, cells: cells.len(), mass: 0.0, coverage_per_mode }
        })
        .collect();
    let mut excess = 0.0;
    for (c, &m) in cell_mass.iter().enumerate() {
        match owner[c] {
            Some(k) => {
                let slot = per_class.iter_mut().find(|p| p.class == k).expect("invariant class");
                slot.mass += m;
            }
            None => excess += m,
        }
    }
    let overlapping_classes = invariant
        .iter()
        .filter(|(_, cells)| cells.cells().iter().any(|&c| (0..modes).any(|i| in_support[c * modes + i])))
        .map(|(k, _)| *k)
        .collect();
    let dominant_class = per_class.iter().find(|p| p.mass >= DOMINANCE).map(|p| p.class);
    let covered_class = per_class.iter().find(|p| p.min_coverage() >= FULL_COVERAGE).map(|p| p.class);
    Ok(SupportReport {
        support,
        threshold,
        inflation,
        excess_mass: excess.clamp(0.0, 1.0),
        per_class,
        overlapping_classes,
        dominant_class,
        covered_class,
        note: GRID_NOTE.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeEstimate {
    pub probability: Proportion,
    pub horizon: f64,
    pub delta: f64,
    /// `exp(-lambda T)`, the no-jump probability.
    pub no_jump_bound: f64,
}

struct Recorder {
    samples: Vec<(f64, Vec<f64>)>,
}

impl PathSink for Recorder {
    fn push(&mut self, t: f64, x: &[f64], _: usize, breakpoint: bool) {
        if !breakpoint {
            self.samples.push((t, x.to_vec()));
        }
    }
}

struct TubeCheck<'a> {
    reference: &'a [(f64, Vec<f64>)],
    next: usize,
    worst: f64,
}

impl PathSink for TubeCheck<'_> {
    fn push(&mut self, t: f64, x: &[f64], _: usize, breakpoint: bool) {
        if breakpoint {
            return;
        }
        while self.next < self.reference.len() && self.reference[self.next].0 < t {
            self.next += 1;
        }
        if let Some((tr, xr)) = self.reference.get(self.next) {
            if *tr == t {
                let d = x.iter().zip(xr).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                self.worst = self.worst.max(d);
            }
        }
    }
}

fn check_clock(horizon: f64, check_dt: f64) -> Result<SampleClock> {
    if !(check_dt.is_finite() && check_dt > 0.0) {
        return Err(Error::arg("check_dt", format!("must be positive, got {check_dt}")));
    }
    let k = (horizon / check_dt).ceil().max(1.0) as usize;
    Ok(SampleClock::Times((1..=k).map(|j| horizon * j as f64 / k as f64).collect()))
}

/// Fraction of runs from `(x, mode)` staying within `delta` of the schedule
/// trajectory `eta` up to `horizon`, checked every `check_dt`.
#[allow(clippy::too_many_arguments)]
pub fn tube_probability(
    sys: &SwitchingSystem,
    x: &[f64],
    mode: usize,
    sched: &JumpSchedule,
    horizon: f64,
    delta: f64,
    n_samples: u64,
    check_dt: f64,
    seed: u64,
) -> Result<TubeEstimate> {
    if !(delta >= 0.0) {
        return Err(Error::arg("delta", format!("must be nonnegative, got {delta}")));
    }
    if sched.modes()[0] != mode {
        return Err(Error::arg("mode", "schedule must start in the initial mode"));
    }
    if !(horizon.is_finite() && horizon >= sched.end_time()) {
        return Err(Error::arg("horizon", "must be finite and cover the schedule"));
    }
    let z0 = HybridState::new(x.to_vec(), mode);
    check_start(sys, &z0)?;
    let clock = check_clock(horizon, check_dt)?;
    let mut rec = Recorder { samples: Vec::new() };
    trace_schedule(sys, x, sched, horizon, &clock, &mut rec)?;
    let reference = rec.samples;
    let inside = ordered_map(n_samples as usize, |k| -> Result<bool> {
        let mut check = TubeCheck { reference: &reference, next: 0, worst: 0.0 };
        simulate_into(sys, &z0, horizon, &clock, &mut Stream::new(seed, k as u64), &mut check, |_| {})?;
        Ok(check.worst <= delta)
    });
    let mut hits = 0;
    for r in inside {
        hits += u64::from(r?);
    }
    Ok(TubeEstimate {
        probability: Proportion::new(hits, n_samples),
        horizon,
        delta,
        no_jump_bound: (-sys.lambda() * horizon).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryEstimate {
    pub per_mode: Vec<Proportion>,
    /// Smallest estimate over initial modes.
    pub worst: Proportion,
    pub horizon: f64,
    pub inflation: usize,
}

/// Fraction of runs from `(x, i)` that sit in the `inflation`-cell
/// neighborhood of `class` at time `horizon`, for every initial mode `i`.
#[allow(clippy::too_many_arguments)]
pub fn entry_probability(
    sys: &SwitchingSystem,
    grid: &CellGrid,
    x: &[f64],
    class: &CellSet,
    inflation: usize,
    horizon: f64,
    n_samples: u64,
    seed: u64,
) -> Result<EntryEstimate> {
    if class.is_empty() {
        return Err(Error::arg("class", "empty class"));
    }
    let target = class.inflate(grid, inflation).mask(grid.len());
    let n = n_samples as usize;
    let modes = sys.modes();
    for i in 0..modes {
        check_start(sys, &HybridState::new(x.to_vec(), i))?;
    }
    let hits = ordered_map(modes * n, |id| -> Result<bool> {
        let z0 = HybridState::new(x.to_vec(), id / n);
        struct Discard;
        impl PathSink for Discard {
            fn push(&mut self, _: f64, _: &[f64], _: usize, _: bool) {}
        }
        let s = simulate_into(
            sys,
            &z0,
            horizon,
            &SampleClock::Breakpoints,
            &mut Stream::new(seed, id as u64),
            &mut Discard,
            |_| {},
        )?;
        Ok(target[grid.cell_of(&s.final_state.x)])
    });
    let mut counts = vec![0u64; modes];
    for (id, h) in hits.into_iter().enumerate() {
        counts[id / n] += u64::from(h?);
    }
    let per_mode: Vec<Proportion> = counts.iter().map(|&c| Proportion::new(c, n_samples)).collect();
    let worst = *per_mode.iter().min_by(|a, b| a.estimate.total_cmp(&b.estimate)).expect("at least one mode");
    Ok(EntryEstimate { per_mode, worst, horizon, inflation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub t: f64,
    pub tv: f64,
    /// Sum of per-bin binomial standard errors of the difference, halved.
    pub noise_se: f64,
}

impl MixingRow {
    pub fn above_noise(&self) -> bool {
        self.tv > 3.0 * self.noise_se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted rate in `TV(t) ~ c exp(-alpha t)`.
    pub alpha: f64,
    pub alpha_se: f64,
    /// Lower end of the two-sided 95% interval.
    pub alpha_lower: f64,
    pub c: f64,
    /// `exp(-alpha)`, the per-unit-time contraction.
    pub rho: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub z_a: HybridState,
    pub z_b: HybridState,
    pub runs_per_time: u64,
    pub rows: Vec<MixingRow>,
    pub fit: Option<DecayFit>,
    pub note: String,
}

/// Least squares fit of `ln TV` against `t` over rows above the noise floor.
pub fn fit_decay(rows: &[MixingRow]) -> Result<DecayFit> {
    let used: Vec<&MixingRow> = rows.iter().filter(|r| r.above_noise()).collect();
    if used.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} of {} points above the noise floor, need 3",
            used.len(),
            rows.len()
        )));
    }
    let t: Vec<f64> = used.iter().map(|r| r.t).collect();
    let y: Vec<f64> = used.iter().map(|r| r.tv.ln()).collect();
    let f = fit_line(&t, &y);
    let alpha = -f.slope;
    let q = t_quantile(0.975, (used.len() - 2) as f64);
    Ok(DecayFit {
        alpha,
        alpha_se: f.slope_se,
        alpha_lower: alpha - q * f.slope_se,
        c: f.intercept.exp(),
        rho: (-alpha).exp(),
        points: used.len(),
    })
}

struct SlotRecorder<'a> {
    grid: &'a CellGrid,
    modes: usize,
    times: &'a [f64],
    slots: Vec<u32>,
}

impl PathSink for SlotRecorder<'_> {
    fn push(&mut self, t: f64, x: &[f64], mode: usize, breakpoint: bool) {
        if breakpoint {
            return;
        }
        while self.slots.len() < self.times.len() && self.times[self.slots.len()] <= t {
            self.slots.push((self.grid.cell_of(x) * self.modes + mode) as u32);
        }
    }
}

/// Empirical total variation between the `(cell, mode)` laws of `Z_t`
/// started at `z_a` and at `z_b`. Each run is sampled at every time in
/// `times`, so rows share trajectories.
pub fn mixing_diagnostic(
    sys: &SwitchingSystem,
    z_a: &HybridState,
    z_b: &HybridState,
    grid: &CellGrid,
    times: &[f64],
    runs_per_time: u64,
    seed: u64,
) -> Result<MixingReport> {
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t > 0.0)) || times.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::arg("times", "need increasing positive times"));
    }
    if runs_per_time == 0 {
        return Err(Error::arg("runs_per_time", "need at least one run"));
    }
    check_start(sys, z_a)?;
    check_start(sys, z_b)?;
    let horizon = *times.last().expect("nonempty");
    let clock = SampleClock::Times(times.to_vec());
    let n = runs_per_time as usize;
    let modes = sys.modes();
    let runs = ordered_map(2 * n, |id| -> Result<Vec<u32>> {
        let z0 = if id < n { z_a } else { z_b };
        let mut rec = SlotRecorder { grid, modes, times, slots: Vec::with_capacity(times.len()) };
        simulate_into(sys, z0, horizon, &clock, &mut Stream::new(seed, id as u64), &mut rec, |_| {})?;
        Ok(rec.slots)
    });
    let bins = grid.len() * modes;
    let mut counts = vec![vec![[0u64; 2]; bins]; times.len()];
    for (id, r) in runs.into_iter().enumerate() {
        for (k, &slot) in r?.iter().enumerate() {
            counts[k][slot as usize][usize::from(id >= n)] += 1;
        }
    }
    let nf = n as f64;
    let rows = times
        .iter()
        .zip(&counts)
        .map(|(&t, c)| {
            let mut tv = 0.0;
            let mut se = 0.0;
            for [a, b] in c {
                if a + b == 0 {
                    continue;
                }
                tv += (*a as f64 / nf - *b as f64 / nf).abs();
                let p = (a + b) as f64 / (2.0 * nf);
                se += (p * (1.0 - p) * 2.0 / nf).sqrt();
            }
            MixingRow { t, tv: 0.5 * tv, noise_se: 0.5 * se }
        })
        .collect::<Vec<_>>();
    let fit = fit_decay(&rows).ok();
    Ok(MixingReport { z_a: z_a.clone(), z_b: z_b.clone(), runs_per_time, rows, fit, note: GRID_NOTE.to_string() })
}
