//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use pdmp_core::lie::{hall_words, larc_rank, lie_bracket, BracketEvaluator, SmoothField};
use pdmp_core::pdmp::{
    mixing_diagnostic, occupation_measure, run_chain, stats::ks_exponential, verify_support_inclusion, Stream,
};
use pdmp_core::reach::{
    accessible_set, build_reach_graph, control_sets, discretize, local_accessible_set, CellSet, ControlSetReport,
    ReachGraph,
};
use pdmp_core::sysdef::{
    presets, Blend, FieldFamily, QConfig, QFamily, StochasticMatrix, SwitchingSystem, TransitionMatrixField,
    VectorField,
};
use pdmp_core::HybridState;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa0 = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa0 > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn two_well() -> SwitchingSystem {
    presets::two_well().build().unwrap()
}

fn bistable() -> SwitchingSystem {
    presets::cubic_bistable(0.1).build().unwrap()
}

fn classes(sys: &SwitchingSystem, h: f64, tau: f64) -> (ReachGraph, ControlSetReport) {
    let grid = discretize(&sys.bounds(), &[h]).unwrap();
    let g = build_reach_graph(sys, &grid, tau, 1).unwrap();
    let r = control_sets(&g);
    (g, r)
}

fn hulls(r: &ControlSetReport) -> Vec<(f64, f64)> {
    r.invariant().map(|(_, c)| (c.bbox.lo[0], c.bbox.hi[0])).collect()
}

fn criterion_1() -> Outcome {
    let h = 0.05;
    let (_, r) = classes(&two_well(), h, 0.5);
    // fixed points of the extreme fields
    let (lo, hi) = (bisect(|x| -(x + 1.0), -3.0, 3.0), bisect(|x| -(x - 1.0), -3.0, 3.0));
    let hs = hulls(&r);
    let pass = hs.len() == 1 && (hs[0].0 - lo).abs() <= 2.0 * h && (hs[0].1 - hi).abs() <= 2.0 * h;
    outcome(pass, format!("invariant hulls {hs:?}, oracle [{lo:.4}, {hi:.4}], tol {}", 2.0 * h))
}

fn bistable_oracle() -> [(f64, f64); 2] {
    let f0 = |x: f64| x - x.powi(3) - 0.1;
    let f1 = |x: f64| x - x.powi(3) + 0.1;
    let left = (bisect(f0, -2.0, -1.0), bisect(f1, -2.0, -0.5));
    let right = (bisect(f0, 0.5, 2.0), bisect(f1, 1.0, 2.0));
    [left, right]
}

fn criterion_2() -> Outcome {
    let h = 0.01;
    let (_, r) = classes(&bistable(), h, 0.5);
    let hs = hulls(&r);
    let oracle = bistable_oracle();
    let matched = hs.len() == 2
        && hs.iter().zip(&oracle).all(|(a, b)| (a.0 - b.0).abs() <= 2.0 * h && (a.1 - b.1).abs() <= 2.0 * h);
    let variant_mid = r.variant().any(|(_, c)| c.bbox.lo[0] < 0.1 && c.bbox.hi[0] > -0.1);
    outcome(
        matched && variant_mid,
        format!(
            "invariant hulls {:?}, oracle {:?}, variant class over (-0.1, 0.1): {variant_mid}",
            hs.iter().map(|(a, b)| format!("[{a:.3}, {b:.3}]")).collect::<Vec<_>>(),
            oracle.iter().map(|(a, b)| format!("[{a:.4}, {b:.4}]")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, sys, h, want_gamma) in
        [("two-well", two_well(), 0.05, true), ("cubic-bistable", bistable(), 0.01, false)]
    {
        let (g, r) = classes(&sys, h, 0.5);
        let gamma = accessible_set(&g);
        let inv: Vec<&CellSet> = r.invariant().map(|(_, c)| &c.cells).collect();
        let gamma_ok = if want_gamma { inv.len() == 1 && gamma == *inv[0] } else { gamma.is_empty() };
        let local_ok = inv.iter().all(|c| local_accessible_set(&g, c, 2) == **c);
        pass &= gamma_ok && local_ok;
        notes.push(format!("{name}: |Gamma| = {} ({gamma_ok}), local sets equal classes: {local_ok}", gamma.len()));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, sys, h, x0) in [("two-well", two_well(), 0.05, 2.5), ("cubic-bistable", bistable(), 0.01, 1.5)] {
        let t0 = Instant::now();
        let (_, r) = classes(&sys, h, 0.5);
        let horizon = 1e4 / sys.lambda();
        let m = occupation_measure(
            &sys,
            &r.grid,
            &HybridState::new(vec![x0], 0),
            horizon,
            0.1 * horizon,
            0.01,
            &mut Stream::new(7, 0),
        )
        .unwrap();
        let s = verify_support_inclusion(&m, &r, 1, 0.0).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        pass &= s.excess_mass < 1e-3 && secs < 60.0;
        notes.push(format!("{name}: excess {:.2e} in {secs:.1}s", s.excess_mass));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_5() -> Outcome {
    let sys = bistable();
    let (_, r) = classes(&sys, 0.01, 0.5);
    let inv: Vec<usize> = r.invariant().map(|(k, _)| k).collect();
    let horizon = 1e3;
    let single = |x: f64, mode: usize, id: u64| {
        let m = occupation_measure(
            &sys,
            &r.grid,
            &HybridState::new(vec![x], mode),
            horizon,
            0.1 * horizon,
            0.01,
            &mut Stream::new(5, id),
        )
        .unwrap();
        verify_support_inclusion(&m, &r, 1, 0.0).unwrap()
    };
    let mut picks = [0usize; 2];
    let mut ok = 0;
    for id in 0..100u64 {
        // start on the unstable point so either class can be chosen
        let s = single(0.0, (id % 2) as usize, id);
        let dominant: Vec<&_> = s.per_class.iter().filter(|p| p.mass >= 0.99).collect();
        if dominant.len() == 1 && s.overlapping_classes.len() == 1 {
            ok += 1;
            picks[inv.iter().position(|&k| k == dominant[0].class).unwrap()] += 1;
        }
    }
    let mut side_ok = true;
    for (x, want) in [(-1.5, inv[0]), (1.5, inv[1])] {
        for mode in 0..2 {
            for id in 0..5 {
                side_ok &= single(x, mode, 1000 + id).dominant_class == Some(want);
            }
        }
    }
    outcome(
        ok == 100 && side_ok,
        format!("{ok}/100 runs from x=0 attribute >= 99% to one class (left {}, right {}); x=+-1.5 select own class: {side_ok}", picks[0], picks[1]),
    )
}

fn criterion_6() -> Outcome {
    let sys = two_well();
    let (_, r) = classes(&sys, 0.05, 0.5);
    let horizon = 1e5 / sys.lambda();
    let m = occupation_measure(
        &sys,
        &r.grid,
        &HybridState::new(vec![0.0], 0),
        horizon,
        0.1 * horizon,
        0.01,
        &mut Stream::new(6, 0),
    )
    .unwrap();
    let s = verify_support_inclusion(&m, &r, 1, 0.0).unwrap();
    let cov = &s.per_class[0].coverage_per_mode;
    outcome(cov.iter().all(|&c| c >= 0.95), format!("coverage per mode {cov:?}"))
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let tw = two_well();
    let grid = discretize(&tw.bounds(), &[0.05]).unwrap();
    let times = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 16.0];
    let rep = mixing_diagnostic(
        &tw,
        &HybridState::new(vec![-2.9], 0),
        &HybridState::new(vec![2.9], 1),
        &grid,
        &times,
        10_000,
        7,
    )
    .unwrap();
    let table: Vec<String> = rep.rows.iter().map(|r| format!("{}:{:.3}(se {:.3})", r.t, r.tv, r.noise_se)).collect();
    let fit_ok = rep.fit.as_ref().is_some_and(|f| f.alpha > 0.0 && f.alpha_lower > 0.0);
    let fit =
        rep.fit.as_ref().map(|f| format!("alpha {:.3}, lower {:.3}, points {}", f.alpha, f.alpha_lower, f.points));

    let bi = bistable();
    let bgrid = discretize(&bi.bounds(), &[0.05]).unwrap();
    let cross = mixing_diagnostic(
        &bi,
        &HybridState::new(vec![-1.5], 0),
        &HybridState::new(vec![1.5], 1),
        &bgrid,
        &times,
        10_000,
        7,
    )
    .unwrap();
    let plateau = cross.rows.iter().map(|r| r.tv).fold(1.0, f64::min);
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        fit_ok && plateau > 0.8 && secs < 300.0,
        format!("two-well TV {table:?}, fit {fit:?}; bistable cross-basin min TV {plateau:.3}; {secs:.1}s"),
    )
}

struct Linear(DMatrix<f64>, DVector<f64>);

impl SmoothField for Linear {
    fn dim(&self) -> usize {
        self.1.len()
    }
    fn value(&self, x: &[f64]) -> DVector<f64> {
        &self.0 * DVector::from_column_slice(x) + &self.1
    }
    fn jacobian(&self, _: &[f64]) -> DMatrix<f64> {
        self.0.clone()
    }
}

fn rand_matrix(s: &mut Stream, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| 2.0 * s.uniform() - 1.0)
}

fn linear_system(a: &DMatrix<f64>, b: &DVector<f64>) -> SwitchingSystem {
    let d = b.len();
    let mut p0: Vec<f64> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            p0.push(a[(i, j)]);
        }
    }
    let mut p1 = p0.clone();
    p0.extend(std::iter::repeat_n(0.0, d));
    p1.extend(b.iter());
    let fields = vec![
        VectorField::new(FieldFamily::LinearAffine, p0, d).unwrap(),
        VectorField::new(FieldFamily::LinearAffine, p1, d).unwrap(),
    ];
    let q = StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    SwitchingSystem::new(fields, TransitionMatrixField::Constant(q), 1.0, vec![[-1.0, 1.0]; d]).unwrap()
}

fn kalman_rank(a: &DMatrix<f64>, b: &DVector<f64>) -> usize {
    let d = b.len();
    let mut k = DMatrix::zeros(d, d);
    let mut col = b.clone();
    for j in 0..d {
        k.set_column(j, &col);
        col = a * col;
    }
    k.rank(1e-9)
}

fn criterion_8() -> Outcome {
    let mut s = Stream::new(8, 0);
    // commutator identity
    let mut worst_comm = 0.0_f64;
    for _ in 0..50 {
        let d = 2 + (s.uniform() * 3.0) as usize;
        let a = rand_matrix(&mut s, d, d);
        let b = rand_matrix(&mut s, d, d);
        let x = DVector::from_fn(d, |_, _| 2.0 * s.uniform() - 1.0);
        let f = Linear(a.clone(), DVector::zeros(d));
        let g = Linear(b.clone(), DVector::zeros(d));
        let got = lie_bracket(&f, &g, x.as_slice());
        let want = (&b * &a - &a * &b) * &x;
        worst_comm = worst_comm.max((got - want).amax());
    }
    // Kalman rank, including deficient pairs
    let mut kalman_ok = 0;
    let mut deficient = 0;
    for k in 0..20 {
        let d = 2 + k % 2;
        let t = rand_matrix(&mut s, d, d) + DMatrix::identity(d, d) * 2.0;
        let mut blocky = rand_matrix(&mut s, d, d);
        let mut e = DVector::from_fn(d, |_, _| 2.0 * s.uniform() - 1.0);
        if k % 3 == 0 {
            // uncontrollable: first coordinates do not feed the rest, b lives in them
            let r = 1 + k % (d - 1).max(1);
            for i in r..d {
                for j in 0..r {
                    blocky[(i, j)] = 0.0;
                }
                e[i] = 0.0;
            }
        }
        let ti = t.clone().try_inverse().unwrap();
        let a = &t * blocky * &ti;
        let b = &t * e;
        let want = kalman_rank(&a, &b);
        deficient += usize::from(want < d);
        let sys = linear_system(&a, &b);
        let got = larc_rank(&sys, &vec![0.0; d], d - 1).rank;
        kalman_ok += usize::from(got == want);
    }
    // Jacobi identity on polynomial fields
    let fields = [
        VectorField::new(FieldFamily::CubicBistable, vec![0.3, -0.2], 2).unwrap(),
        VectorField::new(FieldFamily::LinearAffine, vec![0.2, -1.0, 0.7, 0.1, 0.5, -0.4], 2).unwrap(),
        VectorField::new(FieldFamily::RotationAffine, vec![1.3, 0.2, -0.5, 0.8], 2).unwrap(),
    ];
    let gens: Vec<&dyn SmoothField> = fields.iter().map(|f| f as &dyn SmoothField).collect();
    let ev = BracketEvaluator::new(gens);
    let words = hall_words(3, 0);
    let br = pdmp_core::lie::BracketWord::bracket;
    let mut worst_jacobi = 0.0_f64;
    for p in [[0.3, -0.4], [1.1, 0.7], [-0.8, 0.2]] {
        let (f, g, h) = (&words[0], &words[1], &words[2]);
        let sum = ev.value(&br(f, &br(g, h)), &p) + ev.value(&br(g, &br(h, f)), &p) + ev.value(&br(h, &br(f, g)), &p);
        worst_jacobi = worst_jacobi.max(sum.amax());
    }
    for p in [[0.4], [-1.3]] {
        let poly = [
            VectorField::new(FieldFamily::Polynomial1d, vec![0.1, -1.0, 0.0, 2.0], 1).unwrap(),
            VectorField::new(FieldFamily::Polynomial1d, vec![1.0, 0.5, -0.3], 1).unwrap(),
            VectorField::new(FieldFamily::Polynomial1d, vec![0.0, 0.0, 0.0, 0.0, 1.0], 1).unwrap(),
        ];
        let ev = BracketEvaluator::new(poly.iter().map(|f| f as &dyn SmoothField).collect());
        let (f, g, h) = (&words[0], &words[1], &words[2]);
        let sum = ev.value(&br(f, &br(g, h)), &p) + ev.value(&br(g, &br(h, f)), &p) + ev.value(&br(h, &br(f, g)), &p);
        worst_jacobi = worst_jacobi.max(sum.amax());
    }
    outcome(
        worst_comm <= 1e-12 && kalman_ok == 20 && worst_jacobi <= 1e-6,
        format!(
            "commutator residual {worst_comm:.1e}; Kalman rank match {kalman_ok}/20 ({deficient} deficient); Jacobi residual {worst_jacobi:.1e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut cfg = presets::two_well();
    cfg.q = QConfig {
        family: QFamily::Interpolated,
        matrices: vec![vec![vec![0.8, 0.2], vec![0.6, 0.4]], vec![vec![0.3, 0.7], vec![0.1, 0.9]]],
        blend: Some(Blend { center: 0.0, slope: 3.0, coord: 0 }),
    };
    let sys = cfg.build().unwrap();
    let grid = discretize(&sys.bounds(), &[0.25]).unwrap();
    let mut durations = Vec::with_capacity(100_000);
    let mut last_t = 0.0;
    // per (cell, from): count, sum of Q(x, from, 1), count of to == 1
    let mut tally = vec![(0u64, 0.0f64, 0u64); grid.len() * 2];
    let mut prev_mode = 0;
    run_chain(&sys, &HybridState::new(vec![0.0], 0), 100_000, &mut Stream::new(9, 0), |c| {
        if c.n > 0 {
            durations.push(c.t - last_t);
            let slot = &mut tally[grid.cell_of(&c.state.x) * 2 + prev_mode];
            slot.0 += 1;
            slot.1 += sys.q().entry(&c.state.x, prev_mode, 1);
            slot.2 += u64::from(c.state.mode == 1);
        }
        last_t = c.t;
        prev_mode = c.state.mode;
    })
    .unwrap();
    let ks = ks_exponential(&durations, sys.lambda());
    let mut worst_z = 0.0_f64;
    let mut groups = 0;
    for &(n, psum, hits) in &tally {
        if n < 30 {
            continue;
        }
        groups += 1;
        let p = psum / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        worst_z = worst_z.max((hits as f64 / n as f64 - p).abs() / se);
    }
    outcome(
        ks.p_value > 0.01 && worst_z <= 4.0,
        format!("KS D = {:.4}, p = {:.3} over {} jumps; worst transition z-score {worst_z:.2} over {groups} (cell, mode) groups", ks.statistic, ks.p_value, ks.n),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bistable.json");
    std::fs::write(&cfg, presets::cubic_bistable(0.1).to_json()).unwrap();
    let run = |out: &str, workers: &str| {
        let out = dir.path().join(out);
        let code = pdmp_core::cli::run_command([
            "pdmp",
            "verify-support",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--h",
            "0.01",
            "--horizon",
            "2000",
            "--runs",
            "4",
            "--seed",
            "7",
            "--workers",
            workers,
        ]);
        assert_eq!(code, 0);
        (std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("measure.json")).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "4");
    let same = a == b;
    outcome(
        same,
        format!("report.json identical: {}, measure.json identical: {} (1 vs 4 workers)", a.0 == b.0, a.1 == b.1),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("control sets, two-well", criterion_1),
        ("control sets, cubic-bistable", criterion_2),
        ("accessible-set dichotomy", criterion_3),
        ("support inclusion", criterion_4),
        ("ergodic dichotomy", criterion_5),
        ("coverage of the ergodic support", criterion_6),
        ("mixing", criterion_7),
        ("Lie oracles", criterion_8),
        ("statistical calibration", criterion_9),
        ("reproducibility", criterion_10),
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        let t0 = Instant::now();
        let o = f();
        let dt: Duration = t0.elapsed();
        println!(
            "{} [{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            dt.as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
