//! Named pipeline configurations served to the UI.
//!
//! `fig5a`..`fig5d` image the text "UTD" with a linear aperture at 435 GHz
//! and λ/4 spacing: 128 or 256 elements, 5 or 10 GHz. `cylindrical-knife`
//! is a desk-scale cylindrical scan of the built-in knife solid.

use sarlab_core::config::PipelineConfig;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Debug, Serialize)]
pub struct Preset {
    pub id: &'static str,
    pub title: &'static str,
    pub config: Value,
}

const FC: f64 = 435e9;

/// FMCW ramp centered on 435 GHz spanning `b`.
fn fmcw(b: f64, nf: usize) -> Value {
    let tc = 50e-6;
    json!({
        "type": "fmcw",
        "f0": FC - b / 2.0,
        "k": b / tc,
        "tc": tc,
        "tr": 60e-6,
        "nc": 128,
        "fs": 10e6,
        "nf": nf,
    })
}

fn utd(ny: usize, b: f64) -> Value {
    json!({
        "waveform": fmcw(b, 64),
        "aperture": {"kind": "linear", "ny": ny, "z0": 0.0},
        "scene": {"text": {"text": "UTD", "pitch": 0.004, "center": [0.0, 0.12]}},
        "grid": {"axes": [
            {"min": -0.045, "max": 0.045, "count": 181},
            {"min": 0.08, "max": 0.16, "count": 81}
        ]},
        "algo": "rma-linear"
    })
}

pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            id: "fig5a",
            title: "UTD, 128 elements, 5 GHz",
            config: utd(128, 5e9),
        },
        Preset {
            id: "fig5b",
            title: "UTD, 128 elements, 10 GHz",
            config: utd(128, 10e9),
        },
        Preset {
            id: "fig5c",
            title: "UTD, 256 elements, 5 GHz",
            config: utd(256, 5e9),
        },
        Preset {
            id: "fig5d",
            title: "UTD, 256 elements, 10 GHz",
            config: utd(256, 10e9),
        },
        Preset {
            id: "cylindrical-knife",
            title: "Knife, cylindrical 128 x 32 scan, 10 GHz",
            config: json!({
                "waveform": fmcw(10e9, 32),
                "aperture": {"kind": "cylindrical", "ntheta": 128, "ny": 32, "r0": 0.1},
                "scene": {"meshes": [{"builtin": "knife", "size": 0.04, "spacing": 0.001}]},
                "grid": {"axes": [
                    {"min": -0.024, "max": 0.024, "count": 49},
                    {"min": -0.004, "max": 0.004, "count": 9},
                    {"min": -0.012, "max": 0.012, "count": 25}
                ]},
                "algo": "rma-cylindrical"
            }),
        },
    ]
}

pub fn preset(id: &str) -> Option<PipelineConfig> {
    presets()
        .into_iter()
        .find(|p| p.id == id)
        .map(|p| PipelineConfig::from_json(&p.config.to_string()).expect("shipped presets are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for p in presets() {
            PipelineConfig::from_json(&p.config.to_string()).unwrap_or_else(|e| panic!("{}: {e}", p.id));
        }
        assert!(preset("fig5d").is_some());
        assert!(preset("nope").is_none());
    }
}
