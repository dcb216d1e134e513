//! Acceptance suite: one test per shipped guarantee, each printing a
//! pass/fail line (run with `-- --nocapture` to see them on success).
//!
//! Slow shared work (the nine-slab accuracy matrix) runs once and is reused
//! across criteria.

mod common;

use num_complex::Complex64;
use sparse_mut_cli::pipeline::{
    run_characterize, run_synthetic, synth_inputs, AnalysisConfig, S0Policy, SynthSpec,
};
use sparse_mut_cli::report::RunReport;
use sparse_mut_core::dictionary::{build_fixed_dictionary, DelayGrid, ShiftDictionary};
use sparse_mut_core::forward_model::{
    compute_cir, simulate_baseband, simulate_slab_profile, truncate_cir, FrequencySweep,
    ImpulseResponse, Reflection, ReflectionProfile, SlabSpec, Window, SPEED_OF_LIGHT,
};
use sparse_mut_core::material::permittivity_from_reflection;
use sparse_mut_core::solvers::{solve_du, solve_fd, SolverConfig};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

fn conclude(criterion: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("acceptance {criterion}: PASS");
    } else {
        println!("acceptance {criterion}: FAIL - {}", failures.join("; "));
        panic!("{criterion}: {}", failures.join("; "));
    }
}

/// Metal-plate reference at delay zero plus a one-bin-per-column dictionary,
/// the bare-library harness shared by several criteria.
struct Harness {
    sweep: FrequencySweep,
    dictionary: ShiftDictionary,
    tau_g: f64,
    l_keep: usize,
    pad: usize,
}

impl Harness {
    fn new(n: usize, pad: usize, l_keep: usize, grid_len: usize) -> Self {
        let sweep = FrequencySweep::new(75.0e9, 35.0e6, n, 0.0).unwrap();
        let tau_g = 1.0 / ((n * pad) as f64 * sweep.delta_f());
        let reference = ReflectionProfile::new(vec![Reflection {
            amplitude: Complex64::new(-1.0, 0.0),
            delay: 0.0,
        }])
        .unwrap();
        let spectrum = simulate_baseband(&sweep, &reference, 0.0, 0).unwrap();
        let grid = DelayGrid::uniform(0.0, tau_g, grid_len).unwrap();
        let dictionary =
            build_fixed_dictionary(spectrum.values(), &sweep, &grid, Window::None, pad, l_keep)
                .unwrap();
        Self {
            sweep,
            dictionary,
            tau_g,
            l_keep,
            pad,
        }
    }

    fn cir(&self, profile: &ReflectionProfile, noise: f64, seed: u64) -> ImpulseResponse {
        let y = simulate_baseband(&self.sweep, profile, noise, seed).unwrap();
        let h = compute_cir(&y, Window::None, self.pad).unwrap();
        truncate_cir(&h, self.l_keep).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Shared nine-slab accuracy matrix (criteria 4, 5, 6).

struct SlabCase {
    epsilon_real: f64,
    tan_delta: f64,
    thickness: f64,
}

struct SlabRun {
    case: SlabCase,
    report: RunReport,
}

struct Matrix {
    runs: Vec<SlabRun>,
    elapsed: Duration,
}

/// Accuracy-run configuration: the refinement needs a threshold below the
/// fit floor and enough iterations for coupled echo pairs to finish walking;
/// a two-atom model keeps the dominant pair free of residue-chasing atoms.
fn accuracy_config(seed: u64) -> AnalysisConfig {
    AnalysisConfig {
        s0: S0Policy::Fixed(2),
        epsilon: 1e-5,
        max_iters: 30,
        seed,
        ..AnalysisConfig::default()
    }
}

fn matrix() -> &'static Matrix {
    static MATRIX: OnceLock<Matrix> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let mut runs = Vec::new();
        let start = Instant::now();
        let mut seed = 100;
        for &epsilon_real in &[2.0, 2.6, 2.8] {
            for &d_mm in &[3.3, 15.76, 20.3] {
                seed += 1;
                let case = SlabCase {
                    epsilon_real,
                    tan_delta: 0.0044,
                    thickness: d_mm * 1e-3,
                };
                let mut spec = SynthSpec {
                    epsilon_real,
                    tan_delta: case.tan_delta,
                    thickness: case.thickness,
                    standoff: 50.0e-3,
                    n_bounces: 5,
                    f_lo: 75.0e9,
                    f_hi: 110.0e9,
                    n_steps: 1001,
                    noise_variance: 0.0,
                    on_grid: false,
                };
                let cfg = accuracy_config(seed);
                // 30 dB SNR relative to the clean MUT sweep.
                let clean = synth_inputs(&spec, &cfg).unwrap();
                spec.noise_variance = clean.mut_samples.mean_power() * 1e-3;
                let analysis = run_synthetic(&spec, &cfg).unwrap();
                runs.push(SlabRun {
                    case,
                    report: analysis.report,
                });
            }
        }
        Matrix {
            runs,
            elapsed: start.elapsed(),
        }
    })
}

fn method<'a>(report: &'a RunReport, name: &str) -> &'a sparse_mut_cli::report::MethodRecord {
    report
        .methods
        .iter()
        .find(|m| m.method == name)
        .unwrap_or_else(|| panic!("method {name} missing from report"))
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_on_grid_exact_recovery() {
    // Noiseless slab with every delay on the dictionary grid, L = G = 512:
    // FD recovers delays exactly and amplitudes to 1e-9; DU equals FD;
    // everything inside 5 s.
    let start = Instant::now();
    let h = Harness::new(512, 1, 512, 512);
    let ts = h.tau_g;

    // On-grid slab: front at bin 20, spacing 5 bins.
    let eps = 2.6f64;
    let standoff = 20.0 * ts * SPEED_OF_LIGHT / 2.0;
    let thickness = 5.0 * ts * SPEED_OF_LIGHT / (2.0 * eps.sqrt());
    let slab = SlabSpec::new(eps, 0.004, thickness, standoff, 5).unwrap();
    let profile = simulate_slab_profile(&slab, &h.sweep).unwrap();
    let signal = h.cir(&profile, 0.0, 0);

    let cfg = SolverConfig::new(6, 1e-2, 10, ts / 50.0).unwrap();
    let fd = solve_fd(&h.dictionary, &signal, &cfg).unwrap();
    let du = solve_du(&h.dictionary, &signal, &cfg).unwrap();
    let elapsed = start.elapsed();

    let mut failures = Vec::new();
    for (i, r) in profile.entries().iter().enumerate() {
        let bin = 20 + 5 * i;
        let expected = -r.amplitude;
        if !fd.support().contains(&bin) {
            failures.push(format!("FD missed the atom at bin {bin}"));
            continue;
        }
        let got = fd.values()[bin];
        let delay = h.dictionary.grid().delays()[bin];
        if delay != bin as f64 * ts {
            failures.push(format!("delay at bin {bin} not exact"));
        }
        let rel = (got - expected).norm() / expected.norm();
        if rel > 1e-9 {
            failures.push(format!("amplitude at bin {bin} off by {rel:.2e} relative"));
        }
    }
    if du.coefficients != fd {
        failures.push("DU output differs from FD on the on-grid slab".into());
    }
    if du.grid().delays() != h.dictionary.grid().delays() {
        failures.push("DU moved grid delays on an on-grid slab".into());
    }
    if elapsed > Duration::from_secs(5) {
        failures.push(format!("runtime {elapsed:?} exceeds 5 s"));
    }
    conclude("criterion 1 (on-grid exact recovery)", failures);
}

#[test]
fn criterion_2_off_grid_refinement() {
    // A reflection at a grid midpoint, 100 noisy trials at 20 dB SNR: the
    // refined delay error must be at most tau_mg and strictly below the
    // fixed-grid error in at least 95 of them.
    let h = Harness::new(256, 2, 256, 256);
    let ts = h.tau_g;
    let tau_mg = ts / 50.0;
    let amplitude = Complex64::new(-0.234, 0.0);
    let true_delay = 40.5 * ts;
    let profile = ReflectionProfile::new(vec![Reflection {
        amplitude,
        delay: true_delay,
    }])
    .unwrap();
    // 20 dB SNR per sample; the dictionary comes from the clean reference,
    // the trial noise lives on the MUT sweep.
    let noise = amplitude.norm_sqr() / 100.0;

    let cfg = SolverConfig::new(1, 1e-9, 8, tau_mg).unwrap();

    let mut successes = 0;
    for seed in 0..100u64 {
        let signal = h.cir(&profile, noise, seed);
        let fd = solve_fd(&h.dictionary, &signal, &cfg).unwrap();
        let du = solve_du(&h.dictionary, &signal, &cfg).unwrap();
        let fd_err = (h.dictionary.grid().delays()[fd.support()[0]] - true_delay).abs();
        let du_err = (du.grid().delays()[du.coefficients.support()[0]] - true_delay).abs();
        if du_err <= tau_mg && du_err < fd_err {
            successes += 1;
        }
    }

    let mut failures = Vec::new();
    if successes < 95 {
        failures.push(format!(
            "only {successes}/100 trials met the refinement bound"
        ));
    }
    conclude("criterion 2 (off-grid refinement)", failures);
}

#[test]
fn criterion_3_residual_dominance() {
    // DU's final residual energy never exceeds FD's: on both bundled
    // fixtures and on 100 random synthetic slabs.
    let mut failures = Vec::new();

    let sidecar = common::load_sidecar();
    for slab in &sidecar.slabs {
        let cfg = AnalysisConfig {
            s0: S0Policy::Fixed(2),
            ..common::fixture_config()
        };
        let dir = common::fixture_dir();
        let analysis = run_characterize(
            &dir.join(&slab.mut_file),
            &dir.join(&slab.reference_file),
            &cfg,
        )
        .unwrap();
        let fd = method(&analysis.report, "fd")
            .estimate
            .as_ref()
            .unwrap()
            .residual_energy;
        let du = method(&analysis.report, "du")
            .estimate
            .as_ref()
            .unwrap()
            .residual_energy;
        if du > fd {
            failures.push(format!(
                "fixture {}: DU residual {du:.3e} > FD {fd:.3e}",
                slab.name
            ));
        }
    }

    let h = Harness::new(256, 2, 256, 256);
    let ts = h.tau_g;
    for trial in 0..100u64 {
        // Scatter slab parameters deterministically over the trial index.
        let eps = 1.5 + 3.5 * ((trial * 7919 % 100) as f64 / 100.0);
        let tand = 0.05 * ((trial * 104729 % 100) as f64 / 100.0);
        let spacing_bins = 3.0 + 20.0 * ((trial * 1299709 % 100) as f64 / 100.0);
        let front_bins = 5.0 + 0.77 * (trial % 13) as f64;
        let thickness = spacing_bins * ts * SPEED_OF_LIGHT / (2.0 * eps.sqrt());
        let standoff = front_bins * ts * SPEED_OF_LIGHT / 2.0;
        let slab = SlabSpec::new(eps, tand, thickness, standoff, 3).unwrap();
        let profile = simulate_slab_profile(&slab, &h.sweep).unwrap();
        let noise = profile.entries()[0].amplitude.norm_sqr() / 316.0; // ~25 dB
        let signal = h.cir(&profile, noise, trial);
        let cfg = SolverConfig::new(4, 1e-6, 5, ts / 50.0).unwrap();
        let fd = solve_fd(&h.dictionary, &signal, &cfg).unwrap();
        let du = solve_du(&h.dictionary, &signal, &cfg).unwrap();
        if du.coefficients.residual_energy() > fd.residual_energy() {
            failures.push(format!(
                "trial {trial}: DU residual {:.3e} > FD {:.3e}",
                du.coefficients.residual_energy(),
                fd.residual_energy()
            ));
        }
    }
    conclude("criterion 3 (residual dominance)", failures);
}

#[test]
fn criterion_4_thickness_accuracy() {
    // eps' in {2.0, 2.6, 2.8} x d in {3.3, 15.76, 20.3} mm on the 75-110 GHz
    // band at 30 dB SNR: DU thickness error <= 3% each, all runs < 60 s.
    let m = matrix();
    let mut failures = Vec::new();
    for run in &m.runs {
        let du = method(&run.report, "du");
        let delta = run
            .report
            .ground_truth
            .as_ref()
            .unwrap()
            .deltas
            .iter()
            .find(|d| d.method == "du")
            .unwrap();
        match delta.rel_thickness_error {
            Some(err) if err <= 0.03 => {}
            Some(err) => failures.push(format!(
                "eps {} d {:.2} mm: DU thickness error {:.2}% (estimate {:?})",
                run.case.epsilon_real,
                run.case.thickness * 1e3,
                err * 100.0,
                du.estimate.as_ref().map(|e| e.thickness_m),
            )),
            None => failures.push(format!(
                "eps {} d {:.2} mm: DU produced no thickness",
                run.case.epsilon_real,
                run.case.thickness * 1e3
            )),
        }
    }
    if m.elapsed > Duration::from_secs(60) {
        failures.push(format!("matrix runtime {:?} exceeds 60 s", m.elapsed));
    }
    conclude("criterion 4 (thickness accuracy)", failures);
}

#[test]
fn criterion_5_permittivity_accuracy() {
    // Same slabs: |d eps'| <= 0.05 and |d tan_delta| <= 0.01 for DU.
    let m = matrix();
    let mut failures = Vec::new();
    for run in &m.runs {
        let delta = run
            .report
            .ground_truth
            .as_ref()
            .unwrap()
            .deltas
            .iter()
            .find(|d| d.method == "du")
            .unwrap();
        if delta.abs_epsilon_error > 0.05 {
            failures.push(format!(
                "eps {} d {:.2} mm: |d eps'| = {:.4}",
                run.case.epsilon_real,
                run.case.thickness * 1e3,
                delta.abs_epsilon_error
            ));
        }
        if delta.abs_tan_delta_error > 0.01 {
            failures.push(format!(
                "eps {} d {:.2} mm: |d tan d| = {:.4}",
                run.case.epsilon_real,
                run.case.thickness * 1e3,
                delta.abs_tan_delta_error
            ));
        }
    }
    conclude("criterion 5 (permittivity accuracy)", failures);
}

#[test]
fn criterion_6_l2_density() {
    // l2NM reports more reflections than DU on every slab, and its thickness
    // error is at least DU's on the thick (>= 15 mm) slabs. A method that
    // cannot produce a thickness counts as infinitely wrong.
    let m = matrix();
    let mut failures = Vec::new();
    for run in &m.runs {
        let du = method(&run.report, "du").estimate.as_ref().unwrap();
        let l2 = method(&run.report, "l2");
        let Some(l2_est) = l2.estimate.as_ref() else {
            // No estimate at all still counts as denser-than-sparse only if
            // the support was reported; treat as failure for visibility.
            failures.push(format!(
                "eps {} d {:.2} mm: l2 failed outright: {:?}",
                run.case.epsilon_real,
                run.case.thickness * 1e3,
                l2.error
            ));
            continue;
        };
        if l2_est.support_size <= du.support_size {
            failures.push(format!(
                "eps {} d {:.2} mm: l2 support {} not larger than DU {}",
                run.case.epsilon_real,
                run.case.thickness * 1e3,
                l2_est.support_size,
                du.support_size
            ));
        }
        if run.case.thickness >= 15.0e-3 {
            let truth = run.case.thickness;
            let du_err = du
                .thickness_m
                .map(|t| (t - truth).abs() / truth)
                .unwrap_or(f64::INFINITY);
            let l2_err = l2_est
                .thickness_m
                .map(|t| (t - truth).abs() / truth)
                .unwrap_or(f64::INFINITY);
            if l2_err < du_err {
                failures.push(format!(
                    "eps {} d {:.2} mm: l2 thickness error {:.3}% beats DU {:.3}%",
                    run.case.epsilon_real,
                    run.case.thickness * 1e3,
                    l2_err * 100.0,
                    du_err * 100.0
                ));
            }
        }
    }
    conclude("criterion 6 (l2 density)", failures);
}

#[test]
fn criterion_7_harmonicity() {
    // Five-bounce high-contrast slab, noiseless: DU atom delays sit at
    // integer multiples of the front/back gap, score >= 0.8 at one grid step.
    let spec = SynthSpec {
        epsilon_real: 9.0,
        tan_delta: 0.0,
        thickness: 2.0e-3,
        standoff: 50.0e-3,
        n_bounces: 5,
        f_lo: 75.0e9,
        f_hi: 110.0e9,
        n_steps: 1001,
        noise_variance: 0.0,
        on_grid: false,
    };
    // Four atoms: the front face and the three internal echoes that sit
    // above the refinement residue; the fifth and sixth echoes are orders of
    // magnitude weaker and surplus atoms would only chase residue.
    let cfg = AnalysisConfig {
        s0: S0Policy::Fixed(4),
        epsilon: 1e-9,
        max_iters: 30,
        methods: vec![sparse_mut_core::material::Method::Du],
        ..AnalysisConfig::default()
    };
    let analysis = run_synthetic(&spec, &cfg).unwrap();
    let du = method(&analysis.report, "du");
    let mut failures = Vec::new();
    match du.estimate.as_ref().and_then(|e| e.harmonicity) {
        Some(score) if score >= 0.8 => {}
        Some(score) => failures.push(format!("harmonicity score {score:.2} below 0.8")),
        None => failures.push("no harmonicity score reported".into()),
    }
    conclude("criterion 7 (harmonicity)", failures);
}

#[test]
fn criterion_8_inversion_round_trip() {
    // Fresnel forward then closed-form inversion is the identity to 1e-12
    // relative over a 50 x 20 parameter grid.
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..50 {
        let eps_real = 1.1 + (10.0 - 1.1) * i as f64 / 49.0;
        for j in 0..20 {
            let tand = 0.2 * j as f64 / 19.0;
            let eps = Complex64::new(eps_real, -eps_real * tand);
            let root = eps.sqrt();
            let r = (Complex64::new(1.0, 0.0) - root) / (Complex64::new(1.0, 0.0) + root);
            let back = permittivity_from_reflection(r).unwrap();
            let rel = (back - eps).norm() / eps.norm();
            worst = worst.max(rel);
        }
    }
    if worst > 1e-12 {
        failures.push(format!("worst relative round-trip error {worst:.3e}"));
    }
    conclude("criterion 8 (inversion round trip)", failures);
}

#[test]
fn criterion_9_complexity_scaling() {
    // Median wall time of the dictionary update grows at most 1.3x linearly
    // when G is quadrupled at fixed L, s0 and P.
    let n = 512;
    let pad = 2;
    let l_keep = 256;
    let small = Harness::new(n, pad, l_keep, 256);
    let large = Harness::new(n, pad, l_keep, 1024);
    let ts = small.tau_g;
    let profile = ReflectionProfile::new(vec![
        Reflection {
            amplitude: Complex64::new(-0.3, 0.0),
            delay: 20.4 * ts,
        },
        Reflection {
            amplitude: Complex64::new(0.22, 0.05),
            delay: 33.7 * ts,
        },
        Reflection {
            amplitude: Complex64::new(-0.1, 0.02),
            delay: 61.2 * ts,
        },
    ])
    .unwrap();
    let signal = small.cir(&profile, 1e-5, 3);
    // A threshold below the noise floor pins the iteration count to P for
    // both sizes.
    let cfg = SolverConfig::new(4, 1e-30, 3, ts / 50.0).unwrap();

    let median = |h: &Harness| -> Duration {
        let mut times: Vec<Duration> = (0..10)
            .map(|_| {
                let t = Instant::now();
                let out = solve_du(&h.dictionary, &signal, &cfg).unwrap();
                assert_eq!(out.iterations_run, 3);
                t.elapsed()
            })
            .collect();
        times.sort();
        times[times.len() / 2]
    };

    let t_small = median(&small);
    let t_large = median(&large);
    let ratio = t_large.as_secs_f64() / t_small.as_secs_f64();
    let mut failures = Vec::new();
    if ratio > 4.0 * 1.3 {
        failures.push(format!(
            "4x G took {ratio:.2}x the time (small {t_small:?}, large {t_large:?})"
        ));
    }
    conclude("criterion 9 (complexity scaling)", failures);
}

#[test]
fn criterion_10_protocol_constants() {
    // A default-configuration run sweeps s0 over exactly 2..=8 and uses
    // epsilon = 1e-2, verified through the report's config echo.
    let spec = SynthSpec {
        epsilon_real: 2.6,
        tan_delta: 0.0044,
        thickness: 15.76e-3,
        standoff: 50.0e-3,
        n_bounces: 5,
        f_lo: 75.0e9,
        f_hi: 110.0e9,
        n_steps: 401,
        noise_variance: 1e-4,
        on_grid: false,
    };
    let cfg = AnalysisConfig::default();
    let analysis = run_synthetic(&spec, &cfg).unwrap();
    let report = &analysis.report;

    let mut failures = Vec::new();
    if report.config.s0_mode != "sweep" || report.config.s0_levels != vec![2, 3, 4, 5, 6, 7, 8] {
        failures.push(format!(
            "config echo sweep is {:?} ({})",
            report.config.s0_levels, report.config.s0_mode
        ));
    }
    if report.config.epsilon != 1e-2 {
        failures.push(format!("config echo epsilon is {}", report.config.epsilon));
    }
    for name in ["fd", "du"] {
        let m = method(report, name);
        let levels: Vec<usize> = m.s0_runs.iter().map(|r| r.s0).collect();
        if levels != vec![2, 3, 4, 5, 6, 7, 8] {
            failures.push(format!("{name} ran sparsity levels {levels:?}"));
        }
        match m.chosen_s0 {
            Some(s) if (2..=8).contains(&s) => {}
            other => failures.push(format!("{name} chose sparsity {other:?}")),
        }
    }
    conclude("criterion 10 (protocol constants)", failures);
}
