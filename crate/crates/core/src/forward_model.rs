//! Stepped-frequency forward model: synthetic slab sweeps and the
//! frequency-to-time conversion used by the rest of the pipeline.
//!
//! A measurement is a vector of complex baseband samples, one per frequency
//! step. Each reflection with complex strength `a` and delay `tau` contributes
//! `a * exp(-j 2 pi (f_if + n df) tau)` to sample `n`. The channel impulse
//! response is the inverse DFT of the (optionally windowed, zero-padded)
//! samples.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{CoreError, CoreResult};

/// Exact speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The stepped-frequency grid of a sweep: `n_steps` tones from `f0` in
/// increments of `delta_f`, observed at intermediate frequency `f_if`.
///
/// `f_if` is the phase reference of the sampled baseband signal; ingested
/// data that carries no IF information uses 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySweep {
    f0: f64,
    delta_f: f64,
    n_steps: usize,
    f_if: f64,
}

impl FrequencySweep {
    pub fn new(f0: f64, delta_f: f64, n_steps: usize, f_if: f64) -> CoreResult<Self> {
        if f0 <= 0.0 || !f0.is_finite() {
            return Err(CoreError::invalid(format!(
                "start frequency must be positive, got {f0}"
            )));
        }
        if delta_f <= 0.0 || !delta_f.is_finite() {
            return Err(CoreError::invalid(format!(
                "frequency step must be positive, got {delta_f}"
            )));
        }
        if n_steps < 2 {
            return Err(CoreError::invalid(format!(
                "need at least 2 frequency steps, got {n_steps}"
            )));
        }
        if f_if < 0.0 || !f_if.is_finite() {
            return Err(CoreError::invalid(format!(
                "intermediate frequency must be >= 0, got {f_if}"
            )));
        }
        Ok(Self {
            f0,
            delta_f,
            n_steps,
            f_if,
        })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn f_if(&self) -> f64 {
        self.f_if
    }

    /// Phase-reference frequency of sample `n`: `f_if + n * delta_f`.
    pub fn phase_frequency(&self, n: usize) -> f64 {
        self.f_if + n as f64 * self.delta_f
    }

    /// Centre of the swept RF band, `f0 + (N-1) df / 2`.
    pub fn center_frequency(&self) -> f64 {
        self.f0 + (self.n_steps - 1) as f64 * self.delta_f / 2.0
    }

    /// Largest delay the sweep can represent without aliasing, `1 / delta_f`.
    pub fn unambiguous_range(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// True when two sweeps describe the same grid (step count exact,
    /// frequencies within `rel_tol` relative).
    pub fn compatible_with(&self, other: &FrequencySweep, rel_tol: f64) -> bool {
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= rel_tol * scale.abs().max(1.0);
        self.n_steps == other.n_steps
            && close(self.f0, other.f0, self.f0)
            && close(self.delta_f, other.delta_f, self.delta_f)
            && close(self.f_if, other.f_if, self.f_if.max(other.f_if))
    }
}

/// One reflection: complex strength and absolute two-way delay in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub amplitude: Complex64,
    pub delay: f64,
}

/// An ordered list of reflections, strictly increasing in delay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionProfile {
    entries: Vec<Reflection>,
}

impl ReflectionProfile {
    pub fn new(entries: Vec<Reflection>) -> CoreResult<Self> {
        if entries.is_empty() {
            return Err(CoreError::invalid("reflection profile must be nonempty"));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.delay < 0.0 || !e.delay.is_finite() {
                return Err(CoreError::invalid(format!(
                    "delay {} is not a finite nonnegative value",
                    e.delay
                )));
            }
            if i > 0 && e.delay <= entries[i - 1].delay {
                return Err(CoreError::invalid(
                    "reflection delays must be strictly increasing",
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Reflection] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Complex baseband samples of one sweep, one value per frequency step.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSamples {
    values: Vec<Complex64>,
    sweep: FrequencySweep,
}

impl BasebandSamples {
    pub fn new(values: Vec<Complex64>, sweep: FrequencySweep) -> CoreResult<Self> {
        if values.len() != sweep.n_steps() {
            return Err(CoreError::invalid(format!(
                "sample count {} does not match sweep step count {}",
                values.len(),
                sweep.n_steps()
            )));
        }
        Ok(Self { values, sweep })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn sweep(&self) -> &FrequencySweep {
        &self.sweep
    }

    /// Mean squared magnitude of the samples.
    pub fn mean_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }

    /// The same sweep with every sample scaled by `factor`.
    pub fn scaled(&self, factor: Complex64) -> BasebandSamples {
        BasebandSamples {
            values: self.values.iter().map(|v| v * factor).collect(),
            sweep: self.sweep,
        }
    }
}

/// Complex time-domain response with uniform bin spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    values: Vec<Complex64>,
    time_step: f64,
    t0: f64,
}

impl ImpulseResponse {
    pub fn new(values: Vec<Complex64>, time_step: f64, t0: f64) -> CoreResult<Self> {
        if values.is_empty() {
            return Err(CoreError::invalid(
                "impulse response must have at least one bin",
            ));
        }
        if time_step <= 0.0 || !time_step.is_finite() {
            return Err(CoreError::invalid(format!(
                "time step must be positive, got {time_step}"
            )));
        }
        Ok(Self {
            values,
            time_step,
            t0,
        })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn time_step(&self) -> f64 {
        self.time_step
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total energy, `sum |h[m]|^2`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Index of the bin with the largest magnitude (first one on ties).
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        let mut best_mag = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let m = v.norm_sqr();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        best
    }

    /// The same response with every bin scaled by `factor`.
    pub fn scaled(&self, factor: Complex64) -> ImpulseResponse {
        ImpulseResponse {
            values: self.values.iter().map(|v| v * factor).collect(),
            time_step: self.time_step,
            t0: self.t0,
        }
    }
}

/// Geometry and dielectric parameters of a single homogeneous slab in air.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabSpec {
    epsilon_real: f64,
    tan_delta: f64,
    thickness: f64,
    standoff: f64,
    n_bounces: usize,
}

impl SlabSpec {
    pub fn new(
        epsilon_real: f64,
        tan_delta: f64,
        thickness: f64,
        standoff: f64,
        n_bounces: usize,
    ) -> CoreResult<Self> {
        if epsilon_real <= 1.0 || !epsilon_real.is_finite() {
            return Err(CoreError::invalid(format!(
                "relative permittivity must exceed 1, got {epsilon_real}"
            )));
        }
        if !(0.0..1.0).contains(&tan_delta) {
            return Err(CoreError::invalid(format!(
                "loss tangent must be in [0, 1), got {tan_delta}"
            )));
        }
        if thickness <= 0.0 || !thickness.is_finite() {
            return Err(CoreError::invalid(format!(
                "thickness must be positive, got {thickness}"
            )));
        }
        if standoff < 0.0 || !standoff.is_finite() {
            return Err(CoreError::invalid(format!(
                "standoff must be nonnegative, got {standoff}"
            )));
        }
        if n_bounces < 1 {
            return Err(CoreError::invalid(
                "at least one internal bounce must be modeled",
            ));
        }
        Ok(Self {
            epsilon_real,
            tan_delta,
            thickness,
            standoff,
            n_bounces,
        })
    }

    pub fn epsilon_real(&self) -> f64 {
        self.epsilon_real
    }

    pub fn tan_delta(&self) -> f64 {
        self.tan_delta
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn standoff(&self) -> f64 {
        self.standoff
    }

    pub fn n_bounces(&self) -> usize {
        self.n_bounces
    }

    /// Complex relative permittivity, `eps' (1 - j tan_delta)`.
    pub fn epsilon_complex(&self) -> Complex64 {
        Complex64::new(self.epsilon_real, -self.epsilon_real * self.tan_delta)
    }

    /// Two-way delay of the front-face reflection, `2 standoff / c`.
    pub fn front_delay(&self) -> f64 {
        2.0 * self.standoff / SPEED_OF_LIGHT
    }

    /// Two-way in-slab delay increment between consecutive internal echoes,
    /// `2 d sqrt(eps') / c`.
    pub fn bounce_spacing(&self) -> f64 {
        2.0 * self.thickness * self.epsilon_real.sqrt() / SPEED_OF_LIGHT
    }
}

/// Amplitude taper applied to the frequency samples before the inverse DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    None,
    Hann,
    Hamming,
}

impl Window {
    /// Per-sample weights for a sweep of length `n`.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        let denom = (n.max(2) - 1) as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / denom;
                match self {
                    Window::None => 1.0,
                    Window::Hann => 0.5 * (1.0 - x.cos()),
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                }
            })
            .collect()
    }

    /// Coherent (amplitude) gain: mean of the weights. A single reflection's
    /// peak is scaled by exactly this factor relative to `Window::None`.
    pub fn coherent_gain(&self, n: usize) -> f64 {
        self.weights(n).iter().sum::<f64>() / n as f64
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Window::None => "none",
            Window::Hann => "hann",
            Window::Hamming => "hamming",
        };
        f.write_str(s)
    }
}

/// Synthesizes the sampled baseband sweep of a reflection profile.
///
/// Sample `n` is `sum_k a_k exp(-j 2 pi (f_if + n df) tau_k)` plus
/// circularly-symmetric complex Gaussian noise with per-sample variance
/// `noise_variance`. The noise stream is fully determined by `seed`.
pub fn simulate_baseband(
    sweep: &FrequencySweep,
    profile: &ReflectionProfile,
    noise_variance: f64,
    seed: u64,
) -> CoreResult<BasebandSamples> {
    if noise_variance < 0.0 || !noise_variance.is_finite() {
        return Err(CoreError::invalid(format!(
            "noise variance must be >= 0, got {noise_variance}"
        )));
    }
    let mut values = Vec::with_capacity(sweep.n_steps());
    for n in 0..sweep.n_steps() {
        let f = sweep.phase_frequency(n);
        let mut acc = Complex64::new(0.0, 0.0);
        for r in profile.entries() {
            acc += r.amplitude * Complex64::from_polar(1.0, -2.0 * PI * f * r.delay);
        }
        values.push(acc);
    }
    if noise_variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = (noise_variance / 2.0).sqrt();
        for v in values.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }
    BasebandSamples::new(values, *sweep)
}

/// Expands a slab into its reflection ray series.
///
/// Entry 1 is the front-face Fresnel reflection `(1 - sqrt(eps)) / (1 + sqrt(eps))`
/// at delay `2 standoff / c`. Entry `p + 1` is the `p`-th internal round trip:
/// delay spaced by `2 d sqrt(eps') / c` and amplitude
/// `t01 t10 r10^(2p-1) A^(2p)`, where `A` is the one-way amplitude loss
/// through the slab evaluated at the sweep's centre frequency.
pub fn simulate_slab_profile(
    slab: &SlabSpec,
    sweep: &FrequencySweep,
) -> CoreResult<ReflectionProfile> {
    let n_slab = slab.epsilon_complex().sqrt();
    let one = Complex64::new(1.0, 0.0);
    let r_front = (one - n_slab) / (one + n_slab);
    let r_internal = -r_front;
    let t_round = 4.0 * n_slab / ((one + n_slab) * (one + n_slab));

    // One-way amplitude attenuation exp(-2 pi f n'' d / c) at the band centre.
    let extinction = (-n_slab.im).max(0.0);
    let one_way_loss = (-2.0 * PI * sweep.center_frequency() * extinction * slab.thickness()
        / SPEED_OF_LIGHT)
        .exp();

    let front_delay = slab.front_delay();
    let spacing = slab.bounce_spacing();

    let mut entries = Vec::with_capacity(slab.n_bounces() + 1);
    entries.push(Reflection {
        amplitude: r_front,
        delay: front_delay,
    });
    for p in 1..=slab.n_bounces() {
        let amplitude = t_round
            * r_internal.powu(2 * p as u32 - 1)
            * Complex64::new(one_way_loss.powi(2 * p as i32), 0.0);
        entries.push(Reflection {
            amplitude,
            delay: front_delay + p as f64 * spacing,
        });
    }
    ReflectionProfile::new(entries)
}

/// Inverse DFT of the (windowed, zero-padded) sweep.
///
/// The output has `pad_factor * N` bins with spacing `1 / (pad_factor N df)`
/// and uses the `1/M` normalization, so a single on-grid reflection of
/// strength `a` produces a peak of magnitude `|a| N / M` (`|a|` for
/// `pad_factor` 1). Windowing scales the peak by the window's coherent gain.
pub fn compute_cir(
    samples: &BasebandSamples,
    window: Window,
    pad_factor: usize,
) -> CoreResult<ImpulseResponse> {
    if pad_factor < 1 {
        return Err(CoreError::invalid("pad factor must be at least 1"));
    }
    let n = samples.values().len();
    let m = n * pad_factor;
    let weights = window.weights(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (i, (v, w)) in samples.values().iter().zip(weights.iter()).enumerate() {
        buf[i] = v * w;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    let time_step = 1.0 / (m as f64 * samples.sweep().delta_f());
    ImpulseResponse::new(buf, time_step, 0.0)
}

/// Keeps the first `l_keep` bins of a response.
pub fn truncate_cir(h: &ImpulseResponse, l_keep: usize) -> CoreResult<ImpulseResponse> {
    if l_keep < 1 || l_keep > h.len() {
        return Err(CoreError::invalid(format!(
            "keep length {} out of range 1..={}",
            l_keep,
            h.len()
        )));
    }
    ImpulseResponse::new(h.values()[..l_keep].to_vec(), h.time_step(), h.t0())
}
