use serde::{Deserialize, Serialize};

use super::rng::Stream;
use crate::error::{Error, Result};
use crate::flow::{self, run_segment, PathSink, PiecewisePath, SampleClock};
use crate::sysdef::{HybridState, SwitchingSystem};

/// `(X_n, Y_n)` of the embedded chain together with the jump time `T_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub n: u64,
    pub state: HybridState,
    pub t: f64,
}

impl ChainState {
    pub fn initial(state: HybridState) -> Self {
        Self { n: 0, state, t: 0.0 }
    }
}

/// Samples the next mode from row `mode` of `Q(x)` with one uniform.
/// The row is renormalized by its own sum; ties go to the lower index.
pub fn sample_mode(sys: &SwitchingSystem, x: &[f64], mode: usize, stream: &mut Stream, row: &mut [f64]) -> usize {
    sys.q().row_into(x, mode, row);
    let total: f64 = row.iter().sum();
    let target = stream.uniform() * total;
    let mut cum = 0.0;
    let mut last_positive = mode;
    for (j, &p) in row.iter().enumerate() {
        cum += p;
        if p > 0.0 {
            last_positive = j;
        }
        if target < cum {
            return j;
        }
    }
    last_positive
}

pub(crate) fn check_start(sys: &SwitchingSystem, z0: &HybridState) -> Result<()> {
    if z0.x.len() != sys.dim() {
        return Err(Error::arg("x0", format!("expected {} coordinates, got {}", sys.dim(), z0.x.len())));
    }
    if z0.mode >= sys.modes() {
        return Err(Error::arg("mode0", format!("mode {} out of range (system has {})", z0.mode, sys.modes())));
    }
    if sys.outside_distance(&z0.x) > sys.guard_band() {
        return Err(Error::arg("x0", format!("{:?} lies outside the state box", z0.x)));
    }
    Ok(())
}

/// One step of the embedded chain: draws `U ~ Exp(lambda)`, flows mode
/// `Y_n` for time `U`, then draws `Y_{n+1}` from `Q(X_{n+1})`.
pub fn step_chain(sys: &SwitchingSystem, state: &ChainState, stream: &mut Stream) -> Result<ChainState> {
    let u = stream.exponential(sys.lambda());
    let x = flow::flow(sys, state.state.mode, u, &state.state.x).map_err(|e| shift_failure(e, state.t))?;
    let mut row = vec![0.0; sys.modes()];
    let mode = sample_mode(sys, &x, state.state.mode, stream, &mut row);
    Ok(ChainState { n: state.n + 1, state: HybridState { x, mode }, t: state.t + u })
}

fn shift_failure(e: Error, t0: f64) -> Error {
    match e {
        Error::Integration { t_reached, msg } => Error::Integration { t_reached: t0 + t_reached, msg },
        other => other,
    }
}

/// Runs `steps` chain transitions from `z0`, calling `visit` on every state
/// including the initial one.
pub fn run_chain(
    sys: &SwitchingSystem,
    z0: &HybridState,
    steps: u64,
    stream: &mut Stream,
    mut visit: impl FnMut(&ChainState),
) -> Result<ChainState> {
    check_start(sys, z0)?;
    let mut cur = ChainState::initial(z0.clone());
    visit(&cur);
    for _ in 0..steps {
        cur = step_chain(sys, &cur, stream)?;
        visit(&cur);
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub jumps: u64,
    pub final_state: HybridState,
    pub horizon: f64,
    pub max_excursion: f64,
}

/// Continuous-time process `Z_t` on `[0, horizon]`. Samples go to `sink`
/// (clock samples, a breakpoint at every jump carrying the new mode, and
/// the endpoint); every chain state `Z~_n` with `T_n < horizon` goes to
/// `on_jump`. The last inter-jump interval is cut at the horizon and no
/// mode is drawn for it.
pub fn simulate_into<S: PathSink + ?Sized>(
    sys: &SwitchingSystem,
    z0: &HybridState,
    horizon: f64,
    clock: &SampleClock,
    stream: &mut Stream,
    sink: &mut S,
    mut on_jump: impl FnMut(&ChainState),
) -> Result<RunSummary> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::arg("horizon", format!("must be finite and nonnegative, got {horizon}")));
    }
    check_start(sys, z0)?;
    let mut cursor = clock.cursor();
    let mut row = vec![0.0; sys.modes()];
    let mut cur = ChainState::initial(z0.clone());
    let mut excursion = sys.outside_distance(&z0.x);
    sink.push(0.0, &cur.state.x, cur.state.mode, false);
    on_jump(&cur);
    if horizon == 0.0 {
        return Ok(RunSummary { jumps: 0, final_state: cur.state, horizon, max_excursion: excursion });
    }
    loop {
        let u = stream.exponential(sys.lambda());
        let t_next = cur.t + u;
        if t_next >= horizon {
            let (end, exc) = run_segment(sys, cur.state.mode, &cur.state.x, cur.t, horizon - cur.t, &mut cursor, sink)?;
            excursion = excursion.max(exc);
            sink.push(horizon, &end, cur.state.mode, false);
            return Ok(RunSummary {
                jumps: cur.n,
                final_state: HybridState { x: end, mode: cur.state.mode },
                horizon,
                max_excursion: excursion,
            });
        }
        let (x, exc) = run_segment(sys, cur.state.mode, &cur.state.x, cur.t, u, &mut cursor, sink)?;
        excursion = excursion.max(exc);
        let mode = sample_mode(sys, &x, cur.state.mode, stream, &mut row);
        sink.push(t_next, &x, mode, true);
        cur = ChainState { n: cur.n + 1, state: HybridState { x, mode }, t: t_next };
        on_jump(&cur);
    }
}

/// Samples `Z_t` every `sample_dt` on `[0, horizon]`, plus all jump times.
pub fn simulate(
    sys: &SwitchingSystem,
    z0: &HybridState,
    horizon: f64,
    sample_dt: f64,
    stream: &mut Stream,
) -> Result<PiecewisePath> {
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::arg("sample_dt", format!("must be positive, got {sample_dt}")));
    }
    let mut path = PiecewisePath::new(sys.dim());
    let summary = simulate_into(sys, z0, horizon, &SampleClock::Uniform(sample_dt), stream, &mut path, |_| {})?;
    path.max_excursion = summary.max_excursion;
    Ok(path)
}
