//! Shared helpers for the integration and acceptance suites.

// Each test binary uses a different subset of these helpers.
#![allow(dead_code)]

use serde::{Deserialize, Serialize};
use sparse_mut_cli::pipeline::{AnalysisConfig, SynthSpec};
use std::path::PathBuf;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Ground-truth sidecar bundled next to the fixture sweeps.
#[derive(Debug, Serialize, Deserialize)]
pub struct FixtureSidecar {
    pub band_ghz: [f64; 2],
    pub n_steps: usize,
    /// Analysis settings the fixtures were designed for.
    pub window: String,
    pub pad_factor: usize,
    pub phase_convention: String,
    pub slabs: Vec<FixtureSlab>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FixtureSlab {
    pub name: String,
    pub mut_file: String,
    pub reference_file: String,
    pub epsilon_real: f64,
    pub tan_delta: f64,
    pub thickness_m: f64,
    pub standoff_m: f64,
    pub n_bounces: usize,
    pub noise_variance: f64,
    pub seed: u64,
    pub on_grid: bool,
}

pub fn load_sidecar() -> FixtureSidecar {
    let path = fixture_dir().join("ground_truth.json");
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("fixtures missing at {}: {e}", path.display()));
    serde_json::from_str(&text).expect("valid fixture sidecar")
}

/// The scenario a fixture slab was generated from, for re-synthesis checks.
pub fn slab_spec(sidecar: &FixtureSidecar, slab: &FixtureSlab) -> SynthSpec {
    SynthSpec {
        epsilon_real: slab.epsilon_real,
        tan_delta: slab.tan_delta,
        thickness: slab.thickness_m,
        standoff: slab.standoff_m,
        n_bounces: slab.n_bounces,
        f_lo: sidecar.band_ghz[0] * 1e9,
        f_hi: sidecar.band_ghz[1] * 1e9,
        n_steps: sidecar.n_steps,
        noise_variance: slab.noise_variance,
        // Fixture geometry is stored already snapped.
        on_grid: false,
    }
}

/// Analysis settings matched to the fixtures, with the refinement given
/// enough iterations and a tight enough threshold to actually run.
pub fn fixture_config() -> AnalysisConfig {
    AnalysisConfig {
        epsilon: 1e-5,
        max_iters: 30,
        ..AnalysisConfig::default()
    }
}
