//! Browser bindings. Every entry point takes and returns JSON strings so the
//! page needs no generated type glue.

use pdmp_core::pdmp::{occupation_measure, simulate, Stream};
use pdmp_core::reach::{accessible_set, build_reach_graph, control_sets as classify, discretize};
use pdmp_core::sysdef::{presets, HybridState, SwitchingSystem, SystemConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Res = std::result::Result<String, String>;

fn system(config: &str) -> std::result::Result<SwitchingSystem, String> {
    SystemConfig::parse(config).and_then(|c| c.build()).map_err(|e| e.to_string())
}

fn start(sys: &SwitchingSystem, x0: &str, mode0: usize) -> std::result::Result<HybridState, String> {
    let x: Vec<f64> = if x0.trim().is_empty() {
        sys.lo().iter().zip(sys.hi()).map(|(a, b)| 0.5 * (a + b)).collect()
    } else {
        x0.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("x0: cannot parse {s:?}")))
            .collect::<Result<_, _>>()?
    };
    Ok(HybridState::new(x, mode0))
}

pub fn preset_json(name: &str) -> Res {
    let cfg = match name {
        "two-well" => presets::two_well(),
        "bistable" => presets::cubic_bistable(0.1),
        "rotation" => presets::damped_rotation(),
        other => return Err(format!("unknown preset {other:?}")),
    };
    Ok(cfg.to_json())
}

pub fn simulate_json(config: &str, x0: &str, mode0: usize, horizon: f64, dt: f64, seed: u64) -> Res {
    let sys = system(config)?;
    let z0 = start(&sys, x0, mode0)?;
    let path = simulate(&sys, &z0, horizon, dt, &mut Stream::new(seed, 0)).map_err(|e| e.to_string())?;
    let x: Vec<&[f64]> = (0..path.len()).map(|k| path.position(k)).collect();
    let t: Vec<f64> = path.samples.iter().map(|s| s.t).collect();
    let mode: Vec<usize> = path.samples.iter().map(|s| s.mode).collect();
    Ok(json!({
        "t": t,
        "x": x,
        "mode": mode,
        "jumps": path.breakpoints.len() - 1,
        "box": sys.bounds(),
    })
    .to_string())
}

pub fn control_sets_json(config: &str, h: f64, tau: f64) -> Res {
    let sys = system(config)?;
    let hs = vec![h; sys.dim()];
    let grid = discretize(&sys.bounds(), &hs).map_err(|e| e.to_string())?;
    if grid.len() > 40_000 {
        return Err(format!("{} cells is too many for the browser; raise h", grid.len()));
    }
    let g = build_reach_graph(&sys, &grid, tau, 1).map_err(|e| e.to_string())?;
    let report = classify(&g);
    let classes: Vec<Value> = report
        .classes
        .iter()
        .map(|c| json!({ "kind": c.kind, "cells": c.cells.cells(), "lo": c.bbox.lo, "hi": c.bbox.hi }))
        .collect();
    Ok(json!({
        "grid": { "lo": grid.lo, "hi": grid.hi, "counts": grid.counts },
        "classes": classes,
        "accessible": accessible_set(&g).cells(),
    })
    .to_string())
}

pub fn occupation_json(config: &str, x0: &str, mode0: usize, h: f64, horizon: f64, seed: u64) -> Res {
    let sys = system(config)?;
    let z0 = start(&sys, x0, mode0)?;
    let grid = discretize(&sys.bounds(), &vec![h; sys.dim()]).map_err(|e| e.to_string())?;
    let m = occupation_measure(&sys, &grid, &z0, horizon, 0.1 * horizon, 0.01, &mut Stream::new(seed, 0))
        .map_err(|e| e.to_string())?;
    let p = m.normalized();
    let modes = m.modes();
    let per_mode: Vec<Vec<f64>> = (0..modes).map(|j| (0..grid.len()).map(|c| p[c * modes + j]).collect()).collect();
    Ok(json!({ "grid": { "lo": grid.lo, "hi": grid.hi, "counts": grid.counts }, "mass": per_mode }).to_string())
}

fn js(r: Res) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn preset(name: &str) -> std::result::Result<String, JsError> {
    js(preset_json(name))
}

#[wasm_bindgen(js_name = simulatePath)]
pub fn simulate_path(
    config: &str,
    x0: &str,
    mode0: usize,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> std::result::Result<String, JsError> {
    js(simulate_json(config, x0, mode0, horizon, dt, seed))
}

#[wasm_bindgen(js_name = controlSets)]
pub fn control_sets(config: &str, h: f64, tau: f64) -> std::result::Result<String, JsError> {
    js(control_sets_json(config, h, tau))
}

#[wasm_bindgen]
pub fn occupation(
    config: &str,
    x0: &str,
    mode0: usize,
    h: f64,
    horizon: f64,
    seed: u64,
) -> std::result::Result<String, JsError> {
    js(occupation_json(config, x0, mode0, h, horizon, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn presets_round_trip() {
        for name in ["two-well", "bistable", "rotation"] {
            assert!(system(&preset_json(name).unwrap()).is_ok());
        }
        assert!(preset_json("nope").is_err());
    }

    #[test]
    fn simulate_starts_at_x0() {
        let cfg = preset_json("two-well").unwrap();
        let v = parse(&simulate_json(&cfg, "0.25", 1, 5.0, 0.1, 3).unwrap());
        assert_eq!(v["x"][0][0], 0.25);
        assert_eq!(v["t"].as_array().unwrap().last().unwrap(), 5.0);
        assert!(simulate_json(&cfg, "zz", 0, 5.0, 0.1, 3).is_err());
    }

    #[test]
    fn control_sets_on_two_well() {
        let cfg = preset_json("two-well").unwrap();
        let v = parse(&control_sets_json(&cfg, 0.05, 0.5).unwrap());
        let inv: Vec<&Value> = v["classes"].as_array().unwrap().iter().filter(|c| c["kind"] == "invariant").collect();
        assert_eq!(inv.len(), 1);
        assert_eq!(inv[0]["cells"], v["accessible"]);
    }

    #[test]
    fn occupation_is_normalized() {
        let cfg = preset_json("bistable").unwrap();
        let v = parse(&occupation_json(&cfg, "1", 0, 0.05, 100.0, 1).unwrap());
        let total: f64 =
            v["mass"].as_array().unwrap().iter().flat_map(|m| m.as_array().unwrap()).map(|w| w.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
