//! Single-mode flows, piecewise trajectories under a jump schedule, and
//! discrete path probabilities.

pub mod dopri;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysdef::SwitchingSystem;

pub use dopri::{DenseStep, Tolerance};

/// Computes `Phi^i(t, x)`.
pub fn flow(sys: &SwitchingSystem, mode: usize, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    flow_with(sys, mode, t, x, Tolerance::default())
}

pub fn flow_with(sys: &SwitchingSystem, mode: usize, t: f64, x: &[f64], tol: Tolerance) -> Result<Vec<f64>> {
    check_mode(sys, mode)?;
    if !(t >= 0.0) {
        return Err(Error::arg("t", format!("flow time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(x.to_vec());
    }
    let field = sys.field(mode);
    dopri::integrate(&|y: &[f64], out: &mut [f64]| field.eval_into(y, out), x, t, tol, |_| {})
}

fn check_mode(sys: &SwitchingSystem, mode: usize) -> Result<()> {
    if mode >= sys.modes() {
        return Err(Error::arg("mode", format!("mode {mode} out of range (system has {})", sys.modes())));
    }
    Ok(())
}

/// A mode sequence `(i0, ..., in)` with inter-jump durations `(u1, ..., un)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSchedule {
    modes: Vec<usize>,
    durations: Vec<f64>,
}

impl JumpSchedule {
    pub fn new(modes: Vec<usize>, durations: Vec<f64>) -> Result<Self> {
        if modes.is_empty() || modes.len() != durations.len() + 1 {
            return Err(Error::arg(
                "schedule",
                format!("need len(modes) = len(durations) + 1, got {} and {}", modes.len(), durations.len()),
            ));
        }
        if let Some(u) = durations.iter().find(|u| !(u.is_finite() && **u > 0.0)) {
            return Err(Error::arg("schedule", format!("durations must be positive, got {u}")));
        }
        Ok(Self { modes, durations })
    }

    /// Schedule without jumps.
    pub fn constant(mode: usize) -> Self {
        Self { modes: vec![mode], durations: Vec::new() }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn jumps(&self) -> usize {
        self.durations.len()
    }

    /// Jump times `t1 < ... < tn`.
    pub fn jump_times(&self) -> Vec<f64> {
        self.durations
            .iter()
            .scan(0.0, |t, u| {
                *t += u;
                Some(*t)
            })
            .collect()
    }

    pub fn end_time(&self) -> f64 {
        self.jump_times().last().copied().unwrap_or(0.0)
    }
}

/// Receives samples of a piecewise path in time order.
pub trait PathSink {
    fn push(&mut self, t: f64, x: &[f64], mode: usize, breakpoint: bool);
}

/// Sampling times for a path, besides its breakpoints and endpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleClock {
    /// `k * dt` for `k = 1, 2, ...`
    Uniform(f64),
    /// Explicit increasing times.
    Times(Vec<f64>),
    /// Only breakpoints and endpoints.
    Breakpoints,
}

impl SampleClock {
    pub(crate) fn cursor(&self) -> ClockCursor<'_> {
        ClockCursor { clock: self, next: 0 }
    }
}

pub(crate) struct ClockCursor<'a> {
    clock: &'a SampleClock,
    next: usize,
}

impl ClockCursor<'_> {
    fn peek(&self) -> Option<f64> {
        match self.clock {
            SampleClock::Uniform(dt) => Some(self.next as f64 * dt),
            SampleClock::Times(ts) => ts.get(self.next).copied(),
            SampleClock::Breakpoints => None,
        }
    }

    /// Next clock time in `(after, before)`, or `(after, before]` when
    /// `closed`; advances past it.
    fn next_within(&mut self, after: f64, before: f64, closed: bool) -> Option<f64> {
        loop {
            let t = self.peek()?;
            if t <= after {
                self.next += 1;
                continue;
            }
            if t < before || (closed && t == before) {
                self.next += 1;
                return Some(t);
            }
            return None;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub mode: usize,
    pub breakpoint: bool,
}

/// Sampled piecewise trajectory: positions are continuous, the mode is
/// right-continuous and changes only at breakpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PiecewisePath {
    dim: usize,
    pub samples: Vec<PathSample>,
    positions: Vec<f64>,
    pub breakpoints: Vec<f64>,
    /// Largest distance outside the box seen at integrator steps.
    pub max_excursion: f64,
}

impl PiecewisePath {
    pub fn new(dim: usize) -> Self {
        Self { dim, breakpoints: vec![0.0], ..Default::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn position(&self, k: usize) -> &[f64] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_position(&self) -> &[f64] {
        self.position(self.len() - 1)
    }

    /// Mode sequence visited along the path.
    pub fn mode_sequence(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for (k, s) in self.samples.iter().enumerate() {
            if k == 0 || s.breakpoint {
                out.push(s.mode);
            }
        }
        out
    }

    /// Writes `t, x_0..x_{d-1}, mode, breakpoint` rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "t")?;
        for k in 0..self.dim {
            write!(w, ",x_{k}")?;
        }
        writeln!(w, ",mode,breakpoint")?;
        for (k, s) in self.samples.iter().enumerate() {
            write!(w, "{}", s.t)?;
            for v in self.position(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{},{}", s.mode, u8::from(s.breakpoint))?;
        }
        Ok(())
    }

    /// Parses the CSV form back, checking header and time order.
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::config("csv", "empty file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 4 || cols[0] != "t" || cols[cols.len() - 2] != "mode" || cols[cols.len() - 1] != "breakpoint" {
            return Err(Error::config("csv.header", format!("unexpected header `{header}`")));
        }
        let dim = cols.len() - 3;
        for (k, c) in cols[1..=dim].iter().enumerate() {
            if *c != format!("x_{k}") {
                return Err(Error::config("csv.header", format!("expected x_{k}, got {c}")));
            }
        }
        let mut path = PiecewisePath::new(dim);
        for (r, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::config(format!("csv.row{r}"), "wrong column count"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::config(format!("csv.row{r}"), e.to_string()));
            let t = num(f[0])?;
            let x = f[1..=dim].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            let mode = f[dim + 1].parse().map_err(|_| Error::config(format!("csv.row{r}.mode"), "not an index"))?;
            let breakpoint = match f[dim + 2] {
                "0" => false,
                "1" => true,
                other => return Err(Error::config(format!("csv.row{r}.breakpoint"), format!("`{other}`"))),
            };
            if let Some(prev) = path.samples.last() {
                if t <= prev.t {
                    return Err(Error::config(format!("csv.row{r}.t"), "times must increase"));
                }
            }
            path.push(t, &x, mode, breakpoint);
        }
        Ok(path)
    }
}

impl PathSink for PiecewisePath {
    fn push(&mut self, t: f64, x: &[f64], mode: usize, breakpoint: bool) {
        self.samples.push(PathSample { t, mode, breakpoint });
        self.positions.extend_from_slice(x);
        if breakpoint {
            self.breakpoints.push(t);
        }
    }
}

/// Integrates one mode segment starting at absolute time `t_start`, emitting
/// clock samples strictly inside `(t_start, t_start + duration)`.
/// Returns the end state and the largest excursion outside the box.
pub(crate) fn run_segment<S: PathSink + ?Sized>(
    sys: &SwitchingSystem,
    mode: usize,
    x: &[f64],
    t_start: f64,
    duration: f64,
    cursor: &mut ClockCursor<'_>,
    sink: &mut S,
) -> Result<(Vec<f64>, f64)> {
    let field = sys.field(mode);
    let t_end = t_start + duration;
    let mut buf = vec![0.0; x.len()];
    let mut excursion = 0.0_f64;
    let end = dopri::integrate(
        &|y: &[f64], out: &mut [f64]| field.eval_into(y, out),
        x,
        duration,
        Tolerance::default(),
        |step| {
            let upper = if step.last { t_end } else { t_start + step.t1 };
            while let Some(ts) = cursor.next_within(t_start + step.t0, upper, !step.last) {
                step.eval_into(ts - t_start, &mut buf);
                sink.push(ts, &buf, mode, false);
            }
            step.eval_into(step.t1, &mut buf);
            excursion = excursion.max(sys.outside_distance(&buf));
        },
    )
    .map_err(|e| match e {
        Error::Integration { t_reached, msg } => Error::Integration { t_reached: t_start + t_reached, msg },
        other => other,
    })?;
    Ok((end, excursion))
}

/// Follows `sched` from `x`, continuing the last mode until `horizon`
/// (`horizon >= sched.end_time()`). Returns the final state and the jump
/// positions `x_1..x_n` taken directly from the integrator.
pub fn trace_schedule<S: PathSink + ?Sized>(
    sys: &SwitchingSystem,
    x: &[f64],
    sched: &JumpSchedule,
    horizon: f64,
    clock: &SampleClock,
    sink: &mut S,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64)> {
    for &m in sched.modes() {
        check_mode(sys, m)?;
    }
    if x.len() != sys.dim() {
        return Err(Error::arg("x", format!("expected {} coordinates, got {}", sys.dim(), x.len())));
    }
    let mut cursor = clock.cursor();
    let mut state = x.to_vec();
    let mut t = 0.0;
    let mut excursion = sys.outside_distance(x);
    let mut jump_positions = Vec::with_capacity(sched.jumps());
    sink.push(0.0, &state, sched.modes()[0], false);
    for (k, &u) in sched.durations().iter().enumerate() {
        let (end, exc) = run_segment(sys, sched.modes()[k], &state, t, u, &mut cursor, sink)?;
        t += u;
        excursion = excursion.max(exc);
        sink.push(t, &end, sched.modes()[k + 1], true);
        jump_positions.push(end.clone());
        state = end;
    }
    let tail = horizon - t;
    if tail > 0.0 {
        let mode = *sched.modes().last().expect("nonempty");
        let (end, exc) = run_segment(sys, mode, &state, t, tail, &mut cursor, sink)?;
        excursion = excursion.max(exc);
        sink.push(horizon, &end, mode, false);
        state = end;
    }
    Ok((state, jump_positions, excursion))
}

/// The trajectory `eta_{x,i,u}` on `[0, t_n]`, sampled every `sample_dt`
/// plus all breakpoints.
pub fn piecewise_trajectory(
    sys: &SwitchingSystem,
    x: &[f64],
    sched: &JumpSchedule,
    sample_dt: f64,
) -> Result<PiecewisePath> {
    piecewise_trajectory_until(sys, x, sched, sample_dt, sched.end_time())
}

/// As [`piecewise_trajectory`], continuing the last mode up to `horizon`.
pub fn piecewise_trajectory_until(
    sys: &SwitchingSystem,
    x: &[f64],
    sched: &JumpSchedule,
    sample_dt: f64,
    horizon: f64,
) -> Result<PiecewisePath> {
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::arg("sample_dt", format!("must be positive, got {sample_dt}")));
    }
    if !(horizon >= sched.end_time()) {
        return Err(Error::arg("horizon", "horizon precedes the last jump"));
    }
    let mut path = PiecewisePath::new(sys.dim());
    let (_, _, exc) = trace_schedule(sys, x, sched, horizon, &SampleClock::Uniform(sample_dt), &mut path)?;
    path.max_excursion = exc;
    Ok(path)
}

/// Endpoint `Phi_u^i(x)` of the schedule.
pub fn concatenated_flow(sys: &SwitchingSystem, x: &[f64], sched: &JumpSchedule) -> Result<Vec<f64>> {
    struct Discard;
    impl PathSink for Discard {
        fn push(&mut self, _: f64, _: &[f64], _: usize, _: bool) {}
    }
    let (end, _, _) = trace_schedule(sys, x, sched, sched.end_time(), &SampleClock::Breakpoints, &mut Discard)?;
    Ok(end)
}

/// `p(x, i, u) = prod_j Q(x_j, i_{j-1}, i_j)` with `x_j` the jump positions.
/// Zero exactly when the schedule is not adapted at `x`.
pub fn path_probability(sys: &SwitchingSystem, x: &[f64], sched: &JumpSchedule) -> Result<f64> {
    for &m in sched.modes() {
        check_mode(sys, m)?;
    }
    let mut state = x.to_vec();
    let mut p = 1.0;
    for (k, &u) in sched.durations().iter().enumerate() {
        state = flow(sys, sched.modes()[k], u, &state)?;
        p *= sys.q().entry(&state, sched.modes()[k], sched.modes()[k + 1]);
        if p == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(p)
}

/// A trajectory that left the box beyond the guard band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceViolation {
    pub mode: usize,
    pub start: Vec<f64>,
    pub time: f64,
    pub position: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub horizon: f64,
    pub guard_band: f64,
    pub samples_checked: usize,
    pub violations: Vec<InvarianceViolation>,
}

/// Flows every mode from boundary samples of the box for `horizon` and
/// records exits beyond the guard band.
pub fn check_positive_invariance(
    sys: &SwitchingSystem,
    n_boundary_samples: usize,
    horizon: f64,
) -> Result<InvarianceReport> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::arg("horizon", format!("must be positive, got {horizon}")));
    }
    let guard = sys.guard_band();
    let starts = sys.boundary_samples(n_boundary_samples.max(2));
    let mut violations = Vec::new();
    let mut buf = vec![0.0; sys.dim()];
    for (_, _, start) in &starts {
        for mode in 0..sys.modes() {
            let field = sys.field(mode);
            let mut first: Option<InvarianceViolation> = None;
            dopri::integrate(
                &|y: &[f64], out: &mut [f64]| field.eval_into(y, out),
                start,
                horizon,
                Tolerance::default(),
                |step| {
                    if first.is_some() {
                        return;
                    }
                    for s in 1..=4 {
                        let t = if s == 4 { step.t1 } else { step.t0 + step.h * s as f64 / 4.0 };
                        step.eval_into(t, &mut buf);
                        let dist = sys.outside_distance(&buf);
                        if dist > guard {
                            first = Some(InvarianceViolation {
                                mode,
                                start: start.clone(),
                                time: t,
                                position: buf.clone(),
                                distance: dist,
                            });
                            return;
                        }
                    }
                },
            )?;
            violations.extend(first);
        }
    }
    Ok(InvarianceReport { horizon, guard_band: guard, samples_checked: starts.len(), violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysdef::{presets, FieldFamily, StochasticMatrix, TransitionMatrixField, VectorField};

    fn two_well() -> SwitchingSystem {
        presets::two_well().build().unwrap()
    }

    fn with_q(rows: &[Vec<f64>]) -> SwitchingSystem {
        two_well().with_q_unchecked(TransitionMatrixField::Constant(StochasticMatrix::from_rows_unchecked(rows)))
    }

    #[test]
    fn flow_closed_forms() {
        let sys = two_well();
        let x = flow(&sys, 0, 2.0_f64.ln(), &[1.0]).unwrap();
        assert!(x[0].abs() < 1e-8);
        let x = flow(&sys, 1, 50.0, &[-2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8);
        assert_eq!(flow(&sys, 1, 0.0, &[0.123]).unwrap(), vec![0.123]);
    }

    #[test]
    fn flow_rejects_bad_input() {
        let sys = two_well();
        assert!(flow(&sys, 2, 1.0, &[0.0]).is_err());
        assert!(flow(&sys, 0, -1.0, &[0.0]).is_err());
    }

    #[test]
    fn single_mode_schedule_matches_flow() {
        let sys = two_well();
        let path = piecewise_trajectory_until(&sys, &[2.0], &JumpSchedule::constant(0), 0.25, 2.0).unwrap();
        assert_eq!(path.len(), 9);
        for (k, s) in path.samples.iter().enumerate() {
            let exact = -1.0 + 3.0 * (-s.t).exp();
            assert!((path.position(k)[0] - exact).abs() < 1e-8);
            assert!(!s.breakpoint);
        }
    }

    #[test]
    fn jump_position_closed_form() {
        let sys = two_well();
        let sched = JumpSchedule::new(vec![0, 1], vec![2.0_f64.ln()]).unwrap();
        let path = piecewise_trajectory_until(&sys, &[0.0], &sched, 0.1, 3.0).unwrap();
        let k = path.samples.iter().position(|s| s.breakpoint).unwrap();
        assert!((path.position(k)[0] + 0.5).abs() < 1e-8);
        assert_eq!(path.samples[k].mode, 1);
        assert_eq!(path.breakpoints, vec![0.0, 2.0_f64.ln()]);
        // flows toward +1 afterwards
        let last = path.last_position()[0];
        assert!(last > 0.8 && last < 1.0);
    }

    #[test]
    fn concatenation_unrolls() {
        let sys = two_well();
        let sched = JumpSchedule::new(vec![0, 1, 0], vec![0.7, 1.3]).unwrap();
        let end = concatenated_flow(&sys, &[0.4], &sched).unwrap();
        let a = flow(&sys, 0, 0.7, &[0.4]).unwrap();
        let b = flow(&sys, 1, 1.3, &a).unwrap();
        assert_eq!(end, b);
        let path = piecewise_trajectory(&sys, &[0.4], &sched, 0.05).unwrap();
        assert_eq!(path.last_position(), b.as_slice());
    }

    #[test]
    fn path_probability_examples() {
        let flip = with_q(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let alt = JumpSchedule::new(vec![0, 1, 0], vec![0.3, 2.0]).unwrap();
        assert_eq!(path_probability(&flip, &[0.0], &alt).unwrap(), 1.0);
        let stay = JumpSchedule::new(vec![0, 0], vec![0.3]).unwrap();
        assert_eq!(path_probability(&flip, &[0.0], &stay).unwrap(), 0.0);
        let sys = two_well();
        let s = JumpSchedule::new(vec![0, 1, 1, 0, 1], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(path_probability(&sys, &[0.5], &s).unwrap(), 0.5_f64.powi(4));
    }

    #[test]
    fn invariance_audit_examples() {
        let ok = check_positive_invariance(&two_well(), 5, 5.0).unwrap();
        assert!(ok.violations.is_empty());

        let mut cfg = presets::two_well();
        cfg.bounds = vec![[-0.5, 0.5]];
        let small = cfg.build().unwrap();
        let rep = check_positive_invariance(&small, 5, 5.0).unwrap();
        // both modes leave from both faces: each is pulled toward a point beyond one face
        assert_eq!(rep.violations.len(), 4);
        let early = rep.violations.iter().find(|v| v.mode == 0 && v.start == vec![-0.5]).unwrap();
        let late = rep.violations.iter().find(|v| v.mode == 0 && v.start == vec![0.5]).unwrap();
        assert!(early.time < late.time);
        assert!(late.position[0] < -0.5);

        let zero = SwitchingSystem::new(
            vec![VectorField::zero(2), VectorField::zero(2)],
            TransitionMatrixField::Constant(StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()),
            1.0,
            vec![[0.0, 1.0], [0.0, 1.0]],
        )
        .unwrap();
        assert!(check_positive_invariance(&zero, 4, 3.0).unwrap().violations.is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let sys = presets::damped_rotation().build().unwrap();
        let sched = JumpSchedule::new(vec![0, 1], vec![0.5]).unwrap();
        let path = piecewise_trajectory_until(&sys, &[1.0, -1.0], &sched, 0.1, 1.0).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x_0,x_1,mode,breakpoint\n"));
        let back = PiecewisePath::read_csv(&text).unwrap();
        assert_eq!(back.samples, path.samples);
        assert_eq!(back.positions, path.positions);
    }

    #[test]
    fn rotation_field_matches_matrix_exponential() {
        let f = VectorField::new(FieldFamily::RotationAffine, vec![1.0, 0.0, 0.0, 0.0], 2).unwrap();
        let sys = SwitchingSystem::new(
            vec![f],
            TransitionMatrixField::Constant(StochasticMatrix::from_rows(&[vec![1.0]]).unwrap()),
            1.0,
            vec![[-2.0, 2.0], [-2.0, 2.0]],
        )
        .unwrap();
        let t = 1.3_f64;
        let x = flow(&sys, 0, t, &[1.0, 0.0]).unwrap();
        assert!((x[0] - t.cos()).abs() < 1e-8 && (x[1] + t.sin()).abs() < 1e-8);
    }
}
