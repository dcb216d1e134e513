//! Shift dictionaries: delayed copies of a reference sweep's impulse
//! response, synthesized in the frequency domain.
//!
//! A column for delay `tau` is the CIR of the reference spectrum multiplied
//! by the phase ramp `exp(-j 2 pi (f_if + n df) tau)`. The ramp realizes
//! exact sub-bin delays and is unitary, so all columns share the same norm
//! until truncation.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{CoreError, CoreResult};
use crate::forward_model::{truncate_cir, FrequencySweep, ImpulseResponse, Window};
use crate::linalg;

/// A grid of candidate delays.
///
/// `step` is the nominal spacing. Construction requires strictly increasing
/// delays; a grid refined by the iterative dictionary update keeps one delay
/// per column but may lose ordering and uniformity, so consumers index it
/// through the coefficient support rather than assuming monotonicity.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayGrid {
    delays: Vec<f64>,
    step: f64,
}

impl DelayGrid {
    /// Uniform grid `start + i * step` for `i` in `0..count`.
    pub fn uniform(start: f64, step: f64, count: usize) -> CoreResult<Self> {
        if step <= 0.0 || !step.is_finite() {
            return Err(CoreError::invalid(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if count < 1 {
            return Err(CoreError::invalid("grid must contain at least one delay"));
        }
        if start < 0.0 || !start.is_finite() {
            return Err(CoreError::invalid(format!(
                "grid start must be nonnegative, got {start}"
            )));
        }
        let delays = (0..count).map(|i| start + i as f64 * step).collect();
        Ok(Self { delays, step })
    }

    /// Wraps explicit delays; they must be strictly increasing and nonnegative.
    pub fn from_delays(delays: Vec<f64>, nominal_step: f64) -> CoreResult<Self> {
        if delays.is_empty() {
            return Err(CoreError::invalid("grid must contain at least one delay"));
        }
        if nominal_step <= 0.0 || !nominal_step.is_finite() {
            return Err(CoreError::invalid("nominal step must be positive"));
        }
        for (i, d) in delays.iter().enumerate() {
            if *d < 0.0 || !d.is_finite() {
                return Err(CoreError::invalid(format!(
                    "delay {d} is not a finite nonnegative value"
                )));
            }
            if i > 0 && *d <= delays[i - 1] {
                return Err(CoreError::invalid(
                    "grid delays must be strictly increasing",
                ));
            }
        }
        Ok(Self {
            delays,
            step: nominal_step,
        })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

/// The synthesis settings a dictionary was built with; mini-dictionaries for
/// the update step reuse these so their columns are directly comparable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub window: Window,
    pub pad_factor: usize,
    pub l_keep: usize,
}

/// An `L x G` bank of delay-shifted reference responses.
#[derive(Debug, Clone)]
pub struct ShiftDictionary {
    columns: Vec<Vec<Complex64>>,
    column_norms: Vec<f64>,
    grid: DelayGrid,
    reference_spectrum: Vec<Complex64>,
    sweep: FrequencySweep,
    synthesis: SynthesisConfig,
}

impl ShiftDictionary {
    /// Number of rows L (kept CIR bins).
    pub fn rows(&self) -> usize {
        self.synthesis.l_keep
    }

    /// Number of columns G.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        &self.columns[k]
    }

    pub fn column_norm(&self, k: usize) -> f64 {
        self.column_norms[k]
    }

    pub fn grid(&self) -> &DelayGrid {
        &self.grid
    }

    pub fn reference_spectrum(&self) -> &[Complex64] {
        &self.reference_spectrum
    }

    pub fn sweep(&self) -> &FrequencySweep {
        &self.sweep
    }

    pub fn synthesis(&self) -> &SynthesisConfig {
        &self.synthesis
    }

    /// Multiplies `coefficients` (length G) through the dictionary.
    pub fn apply(&self, coefficients: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(coefficients.len(), self.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows()];
        for (c, col) in coefficients.iter().zip(self.columns.iter()) {
            if c.norm_sqr() > 0.0 {
                linalg::axpy(*c, col, &mut out);
            }
        }
        out
    }

    /// Swaps column `k` for a refined copy at `delay`. A refined atom may
    /// walk past its unselected neighbours, so the grid loses its ordering;
    /// consumers read delays through the support indices and never rely on
    /// monotonicity of an updated grid.
    pub(crate) fn replace_column(&mut self, k: usize, column: Vec<Complex64>, delay: f64) {
        debug_assert_eq!(column.len(), self.rows());
        self.column_norms[k] = linalg::norm(&column);
        self.columns[k] = column;
        self.grid.delays[k] = delay;
    }
}

fn validate_tau(sweep: &FrequencySweep, tau: f64) -> CoreResult<()> {
    if tau < 0.0 || tau >= sweep.unambiguous_range() || !tau.is_finite() {
        return Err(CoreError::invalid(format!(
            "delay {tau:.3e} s outside the unambiguous range [0, {:.3e}) s",
            sweep.unambiguous_range()
        )));
    }
    Ok(())
}

fn shifted_cir(
    planner: &mut FftPlanner<f64>,
    reference_spectrum: &[Complex64],
    sweep: &FrequencySweep,
    tau: f64,
    window: Window,
    pad_factor: usize,
    l_keep: usize,
) -> CoreResult<ImpulseResponse> {
    let n = sweep.n_steps();
    if reference_spectrum.len() != n {
        return Err(CoreError::invalid(format!(
            "reference spectrum length {} does not match sweep step count {}",
            reference_spectrum.len(),
            n
        )));
    }
    if pad_factor < 1 {
        return Err(CoreError::invalid("pad factor must be at least 1"));
    }
    let m = n * pad_factor;
    if l_keep < 1 || l_keep > m {
        return Err(CoreError::invalid(format!(
            "keep length {l_keep} out of range 1..={m}"
        )));
    }
    validate_tau(sweep, tau)?;

    let weights = window.weights(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for i in 0..n {
        let phase = -2.0 * PI * sweep.phase_frequency(i) * tau;
        buf[i] = reference_spectrum[i] * weights[i] * Complex64::from_polar(1.0, phase);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    let time_step = 1.0 / (m as f64 * sweep.delta_f());
    let full = ImpulseResponse::new(buf, time_step, 0.0)?;
    if l_keep == m {
        Ok(full)
    } else {
        truncate_cir(&full, l_keep)
    }
}

/// CIR of the reference delayed by `tau` via a frequency-domain phase ramp.
pub fn shift_reference(
    reference_spectrum: &[Complex64],
    sweep: &FrequencySweep,
    tau: f64,
    window: Window,
    pad_factor: usize,
    l_keep: usize,
) -> CoreResult<ImpulseResponse> {
    let mut planner = FftPlanner::new();
    shifted_cir(
        &mut planner,
        reference_spectrum,
        sweep,
        tau,
        window,
        pad_factor,
        l_keep,
    )
}

fn build(
    reference_spectrum: &[Complex64],
    sweep: &FrequencySweep,
    grid: DelayGrid,
    window: Window,
    pad_factor: usize,
    l_keep: usize,
) -> CoreResult<ShiftDictionary> {
    let mut planner = FftPlanner::new();
    let mut columns = Vec::with_capacity(grid.len());
    let mut column_norms = Vec::with_capacity(grid.len());
    for &tau in grid.delays() {
        let cir = shifted_cir(
            &mut planner,
            reference_spectrum,
            sweep,
            tau,
            window,
            pad_factor,
            l_keep,
        )?;
        let values = cir.values().to_vec();
        column_norms.push(linalg::norm(&values));
        columns.push(values);
    }
    Ok(ShiftDictionary {
        columns,
        column_norms,
        grid,
        reference_spectrum: reference_spectrum.to_vec(),
        sweep: *sweep,
        synthesis: SynthesisConfig {
            window,
            pad_factor,
            l_keep,
        },
    })
}

/// Builds the fixed dictionary over `grid`; column `k` is the reference
/// shifted by `grid.delays()[k]`.
pub fn build_fixed_dictionary(
    reference_spectrum: &[Complex64],
    sweep: &FrequencySweep,
    grid: &DelayGrid,
    window: Window,
    pad_factor: usize,
    l_keep: usize,
) -> CoreResult<ShiftDictionary> {
    build(
        reference_spectrum,
        sweep,
        grid.clone(),
        window,
        pad_factor,
        l_keep,
    )
}

/// Builds the sub-grid dictionary the update step searches around one atom.
///
/// The grid has `floor(tau_w / tau_mg) + 1` points spaced `tau_mg`, anchored
/// so that `center` itself is a grid point, spanning `center - tau_w/2` to
/// `center + tau_w/2` up to one step of slack. Points outside the sweep's
/// unambiguous range are clipped.
#[allow(clippy::too_many_arguments)]
pub fn build_mini_dictionary(
    reference_spectrum: &[Complex64],
    sweep: &FrequencySweep,
    center: f64,
    tau_w: f64,
    tau_mg: f64,
    window: Window,
    pad_factor: usize,
    l_keep: usize,
) -> CoreResult<ShiftDictionary> {
    if tau_w <= 0.0 || !tau_w.is_finite() {
        return Err(CoreError::invalid(format!(
            "search width must be positive, got {tau_w}"
        )));
    }
    if tau_mg <= 0.0 || !tau_mg.is_finite() {
        return Err(CoreError::invalid(format!(
            "mini-grid step must be positive, got {tau_mg}"
        )));
    }
    validate_tau(sweep, center)?;

    let count = (tau_w / tau_mg).floor() as i64 + 1;
    let below = (tau_w / (2.0 * tau_mg)).floor() as i64;
    let delays: Vec<f64> = (0..count)
        .map(|i| center + (i - below) as f64 * tau_mg)
        .filter(|&d| d >= 0.0 && d < sweep.unambiguous_range())
        .collect();
    let grid = DelayGrid::from_delays(delays, tau_mg)?;
    build(reference_spectrum, sweep, grid, window, pad_factor, l_keep)
}
