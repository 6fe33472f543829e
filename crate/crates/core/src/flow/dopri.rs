//! Dormand–Prince 5(4) with PI step control and the standard fourth-order
//! continuous extension.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-9, rel: 1e-9 }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Error coefficients: fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 10_000_000;

/// One accepted step `[t0, t1]` with its continuous extension.
pub struct DenseStep<'a> {
    pub t0: f64,
    pub t1: f64,
    pub h: f64,
    /// True for the step that ends exactly at the requested duration.
    pub last: bool,
    rcont: &'a [Vec<f64>; 5],
}

impl DenseStep<'_> {
    /// Interpolated state at time `t` within the step.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = self.rcont;
        for k in 0..out.len() {
            out[k] = r1[k] + theta * (r2[k] + theta1 * (r3[k] + theta * (r4[k] + theta1 * r5[k])));
        }
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: Tolerance) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.abs + tol.rel * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(f: &F, x0: &[f64], f0: &[f64], duration: f64, tol: Tolerance) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    let sc: Vec<f64> = x0.iter().map(|v| tol.abs + tol.rel * v.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(x0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(duration);
    let x1: Vec<f64> = x0.iter().zip(f0).map(|(x, v)| x + h0 * v).collect();
    let mut f1 = vec![0.0; n];
    f(&x1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / 5.0) };
    (100.0 * h0).min(h1).min(duration)
}

/// Integrates `x' = f(x)` from `x0` over `[0, duration]`, calling `observer`
/// after every accepted step, and returns the state at `duration`.
///
/// The step sequence depends only on `(f, x0, duration, tol)`.
pub fn integrate<F, O>(f: &F, x0: &[f64], duration: f64, tol: Tolerance, mut observer: O) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
    O: FnMut(&DenseStep<'_>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    if duration <= 0.0 {
        return Ok(x);
    }
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut xnew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);

    f(&x, &mut k1);
    let mut h = initial_step(f, &x, &k1, duration, tol);
    let mut t = 0.0;
    let mut fac_old = 1e-4_f64;
    let mut last_rejected = false;

    for _ in 0..MAX_STEPS {
        let mut last = false;
        if t + h * 1.01 >= duration {
            h = duration - t;
            last = true;
        }
        if h <= 1e-14 * duration.max(1.0) || !h.is_finite() {
            return Err(Error::Integration { t_reached: t, msg: format!("step size underflow (h = {h:e})") });
        }

        for k in 0..n {
            y[k] = x[k] + h * A21 * k1[k];
        }
        f(&y, &mut k2);
        for k in 0..n {
            y[k] = x[k] + h * (A31 * k1[k] + A32 * k2[k]);
        }
        f(&y, &mut k3);
        for k in 0..n {
            y[k] = x[k] + h * (A41 * k1[k] + A42 * k2[k] + A43 * k3[k]);
        }
        f(&y, &mut k4);
        for k in 0..n {
            y[k] = x[k] + h * (A51 * k1[k] + A52 * k2[k] + A53 * k3[k] + A54 * k4[k]);
        }
        f(&y, &mut k5);
        for k in 0..n {
            y[k] = x[k] + h * (A61 * k1[k] + A62 * k2[k] + A63 * k3[k] + A64 * k4[k] + A65 * k5[k]);
        }
        f(&y, &mut k6);
        for k in 0..n {
            xnew[k] = x[k] + h * (A71 * k1[k] + A73 * k3[k] + A74 * k4[k] + A75 * k5[k] + A76 * k6[k]);
        }
        f(&xnew, &mut k7);
        for k in 0..n {
            err[k] = h * (E1 * k1[k] + E3 * k3[k] + E4 * k4[k] + E5 * k5[k] + E6 * k6[k] + E7 * k7[k]);
        }
        let e = error_norm(&err, &x, &xnew, tol);
        if !e.is_finite() {
            return Err(Error::Integration { t_reached: t, msg: "non-finite state".into() });
        }
        let fac11 = e.powf(0.2 - BETA * 0.75);

        if e <= 1.0 {
            let t_new = if last { duration } else { t + h };
            for k in 0..n {
                let dy = xnew[k] - x[k];
                let bspl = h * k1[k] - dy;
                rcont[0][k] = x[k];
                rcont[1][k] = dy;
                rcont[2][k] = bspl;
                rcont[3][k] = dy - h * k7[k] - bspl;
                rcont[4][k] = h * (D1 * k1[k] + D3 * k3[k] + D4 * k4[k] + D5 * k5[k] + D6 * k6[k] + D7 * k7[k]);
            }
            observer(&DenseStep { t0: t, t1: t_new, h, last, rcont: &rcont });
            std::mem::swap(&mut x, &mut xnew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if last {
                return Ok(x);
            }
            let mut fac = fac11 / fac_old.powf(BETA) / SAFETY;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = e.max(1e-4);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
    Err(Error::Integration { t_reached: t, msg: format!("exceeded {MAX_STEPS} steps") })
}
