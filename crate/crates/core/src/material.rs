//! Inversion of recovered reflection coefficients into material parameters.
//!
//! The front-surface coefficient of the dictionary fit is the negated
//! reflection coefficient of the slab (the reference metal plate reflects
//! with -1), so `R = -a_front`, permittivity follows from the Fresnel
//! formula in closed form, and thickness from the two-way delay gap between
//! the two dominant reflections.

use num_complex::Complex64;

use crate::dictionary::DelayGrid;
use crate::error::{CoreError, CoreResult};
use crate::forward_model::SPEED_OF_LIGHT;
use crate::solvers::SparseCoefficients;

/// Fraction of the recovered time span that counts as the "front" cluster
/// when picking the front-surface atom.
pub const FRONT_CLUSTER_SPAN_FRACTION: f64 = 0.25;

/// Which recovery method produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fd,
    Du,
    L2Nm,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Fd => "FD",
            Method::Du => "DU",
            Method::L2Nm => "L2NM",
        };
        f.write_str(s)
    }
}

/// Solver diagnostics carried along with an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub residual_energy: f64,
    pub support_size: usize,
    pub harmonicity_score: Option<f64>,
}

/// Material parameters recovered from one measurement by one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialEstimate {
    /// Real part of the relative permittivity.
    pub epsilon_real: f64,
    /// Loss tangent, reported as a magnitude.
    pub tan_delta: f64,
    /// Slab thickness in metres; absent when fewer than two reflections were
    /// recovered or the permittivity estimate is non-physical.
    pub thickness: Option<f64>,
    /// Complex front-surface reflection coefficient.
    pub reflection_coefficient: Complex64,
    /// Delay of the front-surface atom, relative to the reference.
    pub front_delay: f64,
    /// Delay of the second dominant atom, when present.
    pub back_delay: Option<f64>,
    pub method: Method,
    pub diagnostics: Diagnostics,
    /// False when the recovered permittivity fell below 1; the values are
    /// reported unclamped either way.
    pub physical: bool,
}

/// Supported atoms as `(delay, coefficient)` pairs.
fn atoms(coeffs: &SparseCoefficients, grid: &DelayGrid) -> Vec<(f64, Complex64)> {
    coeffs
        .iter_support()
        .map(|(k, c)| (grid.delays()[k], c))
        .collect()
}

/// The two largest-magnitude atoms, ordered in time.
fn dominant_pair(atoms: &[(f64, Complex64)]) -> Option<((f64, Complex64), (f64, Complex64))> {
    if atoms.len() < 2 {
        return None;
    }
    let mut sorted = atoms.to_vec();
    sorted.sort_by(|a, b| {
        b.1.norm()
            .partial_cmp(&a.1.norm())
            .unwrap()
            .then(a.0.partial_cmp(&b.0).unwrap())
    });
    let (mut first, mut second) = (sorted[0], sorted[1]);
    if second.0 < first.0 {
        std::mem::swap(&mut first, &mut second);
    }
    Some((first, second))
}

/// Picks the front-surface atom and returns `(R, front_delay)`.
///
/// The front atom is the largest-magnitude coefficient among the earliest
/// quarter of the recovered time span, which keeps a strong internal echo
/// from out-ranking a lossy front face. The reflection coefficient is the
/// negated coefficient, because the dictionary is built from the metal
/// plate's response.
pub fn reflection_from_coeffs(
    coeffs: &SparseCoefficients,
    grid: &DelayGrid,
) -> CoreResult<(Complex64, f64)> {
    let atoms = atoms(coeffs, grid);
    if atoms.is_empty() {
        return Err(CoreError::EmptySupport("no reflections recovered".into()));
    }
    let t_min = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    let t_max = atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
    let cutoff = t_min + FRONT_CLUSTER_SPAN_FRACTION * (t_max - t_min);
    let front = atoms
        .iter()
        .filter(|a| a.0 <= cutoff + f64::EPSILON * t_max.abs())
        .max_by(|a, b| {
            a.1.norm()
                .partial_cmp(&b.1.norm())
                .unwrap()
                .then(b.0.partial_cmp(&a.0).unwrap())
        })
        .expect("cluster contains the earliest atom");
    Ok((-front.1, front.0))
}

/// Closed-form inversion of the normal-incidence Fresnel coefficient:
/// `eps = ((1 - R) / (1 + R))^2`.
pub fn permittivity_from_reflection(r: Complex64) -> CoreResult<Complex64> {
    let denom = Complex64::new(1.0, 0.0) + r;
    if denom.norm() < 1e-12 {
        return Err(CoreError::NonPhysical(
            "reflection coefficient at -1 (perfect conductor); permittivity is singular".into(),
        ));
    }
    let root = (Complex64::new(1.0, 0.0) - r) / denom;
    Ok(root * root)
}

/// Splits a complex permittivity into `(eps', tan_delta)` with
/// `tan_delta = |Im eps| / Re eps`.
pub fn loss_factor(epsilon: Complex64) -> CoreResult<(f64, f64)> {
    if epsilon.re <= 0.0 || epsilon.re.is_nan() {
        return Err(CoreError::NonPhysical(format!(
            "permittivity real part {:.3e} is not positive",
            epsilon.re
        )));
    }
    Ok((epsilon.re, epsilon.im.abs() / epsilon.re))
}

/// Slab thickness from the delay gap of the two dominant reflections:
/// `d = c (tau2 - tau1) / (2 sqrt(eps'))`.
pub fn thickness_estimate(
    coeffs: &SparseCoefficients,
    grid: &DelayGrid,
    epsilon_real: f64,
) -> CoreResult<f64> {
    if epsilon_real < 1.0 || epsilon_real.is_nan() {
        return Err(CoreError::NonPhysical(format!(
            "cannot derive thickness from permittivity {epsilon_real:.4} below 1"
        )));
    }
    let atoms = atoms(coeffs, grid);
    let (front, back) = dominant_pair(&atoms).ok_or_else(|| {
        CoreError::EmptySupport("thickness needs at least two recovered reflections".into())
    })?;
    Ok(SPEED_OF_LIGHT * (back.0 - front.0) / (2.0 * epsilon_real.sqrt()))
}

/// Per-atom view of the harmonicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicityAtom {
    pub delay: f64,
    /// Offset from the front atom.
    pub offset: f64,
    /// Closest integer multiple of the front/back gap (0 for atoms earlier
    /// than the front atom).
    pub multiple: i64,
    /// |offset - multiple * gap|.
    pub deviation: f64,
    pub within_tolerance: bool,
}

/// Result of [`harmonicity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicityReport {
    /// Fraction of checked atoms on an integer multiple of the gap.
    pub score: f64,
    pub front_delay: f64,
    /// Delay gap between the two dominant reflections.
    pub gap: f64,
    pub atoms: Vec<HarmonicityAtom>,
}

/// Checks that recovered delays sit at integer multiples of the front/back
/// gap. Every supported atom except the front one is scored.
pub fn harmonicity_check(
    coeffs: &SparseCoefficients,
    grid: &DelayGrid,
    tolerance: f64,
) -> CoreResult<HarmonicityReport> {
    let atoms = atoms(coeffs, grid);
    let (front, back) = dominant_pair(&atoms).ok_or_else(|| {
        CoreError::EmptySupport("harmonicity needs at least two recovered reflections".into())
    })?;
    let gap = back.0 - front.0;
    let mut report_atoms = Vec::new();
    let mut passed = 0usize;
    for &(delay, _) in &atoms {
        if delay == front.0 {
            continue;
        }
        let offset = delay - front.0;
        let multiple = (offset / gap).round() as i64;
        let deviation = (offset - multiple as f64 * gap).abs();
        let within_tolerance = multiple >= 1 && deviation <= tolerance;
        if within_tolerance {
            passed += 1;
        }
        report_atoms.push(HarmonicityAtom {
            delay,
            offset,
            multiple,
            deviation,
            within_tolerance,
        });
    }
    let score = if report_atoms.is_empty() {
        1.0
    } else {
        passed as f64 / report_atoms.len() as f64
    };
    Ok(HarmonicityReport {
        score,
        front_delay: front.0,
        gap,
        atoms: report_atoms,
    })
}

/// Full inversion chain for one method's coefficients.
///
/// Fails on an empty support, a reflection coefficient at the conductor
/// singularity, or a permittivity with non-positive real part. A
/// permittivity below 1 or a missing second reflection degrade the estimate
/// (unphysical flag, no thickness) without failing.
pub fn estimate_material(
    coeffs: &SparseCoefficients,
    grid: &DelayGrid,
    method: Method,
    harmonicity_tolerance: f64,
) -> CoreResult<MaterialEstimate> {
    let (reflection, front_delay) = reflection_from_coeffs(coeffs, grid)?;
    let epsilon = permittivity_from_reflection(reflection)?;
    let (epsilon_real, tan_delta) = loss_factor(epsilon)?;
    let physical = epsilon_real >= 1.0;

    let atoms = atoms(coeffs, grid);
    let back_delay = dominant_pair(&atoms).map(|(_, back)| back.0);
    let thickness = if physical {
        thickness_estimate(coeffs, grid, epsilon_real).ok()
    } else {
        None
    };
    let harmonicity_score = harmonicity_check(coeffs, grid, harmonicity_tolerance)
        .ok()
        .map(|r| r.score);

    Ok(MaterialEstimate {
        epsilon_real,
        tan_delta,
        thickness,
        reflection_coefficient: reflection,
        front_delay,
        back_delay,
        method,
        diagnostics: Diagnostics {
            residual_energy: coeffs.residual_energy(),
            support_size: coeffs.support_len(),
            harmonicity_score,
        },
        physical,
    })
}
