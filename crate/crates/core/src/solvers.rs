//! Sparse recovery over a shift dictionary.
//!
//! Three methods share the same inputs: greedy orthogonal matching pursuit on
//! the fixed dictionary (`FD`), the iterative dictionary update that refines
//! atom delays between pursuit passes (`DU`), and a dense minimum-l2-norm
//! baseline (`l2NM`).

use num_complex::Complex64;

use crate::dictionary::{build_mini_dictionary, DelayGrid, ShiftDictionary};
use crate::error::{CoreError, CoreResult};
use crate::forward_model::ImpulseResponse;
use crate::linalg;

pub use crate::linalg::RANK_CONDITION_LIMIT;

/// Residual energy below `OMP_RESIDUAL_FLOOR_REL * ||h||^2` counts as an
/// exact fit and stops the pursuit early.
pub const OMP_RESIDUAL_FLOOR_REL: f64 = 1e-24;

/// Entries of the dense minimum-norm solution at least this fraction of the
/// largest magnitude are reported as recovered reflections.
pub const L2_SUPPORT_REL_THRESHOLD: f64 = 1e-3;

/// A sparse coefficient vector over the dictionary grid.
///
/// For pursuit outputs `values` is zero off `support` and `support` is in
/// greedy selection order. For the minimum-norm baseline `values` is dense
/// and `support` lists the entries above the reporting threshold in index
/// order; the off-support mass is part of the solution and is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoefficients {
    values: Vec<Complex64>,
    support: Vec<usize>,
    residual_energy: f64,
}

impl SparseCoefficients {
    fn zeros(len: usize, residual_energy: f64) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); len],
            support: Vec::new(),
            residual_energy,
        }
    }

    /// Assembles a coefficient vector from explicit parts, e.g. when
    /// rehydrating a stored decomposition. Support indices must be unique
    /// and in range.
    pub fn from_parts(
        values: Vec<Complex64>,
        support: Vec<usize>,
        residual_energy: f64,
    ) -> CoreResult<Self> {
        let mut seen = vec![false; values.len()];
        for &k in &support {
            if k >= values.len() {
                return Err(CoreError::invalid(format!(
                    "support index {k} out of range"
                )));
            }
            if seen[k] {
                return Err(CoreError::invalid(format!("duplicate support index {k}")));
            }
            seen[k] = true;
        }
        if residual_energy < 0.0 || residual_energy.is_nan() {
            return Err(CoreError::invalid("residual energy must be nonnegative"));
        }
        Ok(Self {
            values,
            support,
            residual_energy,
        })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    /// Squared residual norm `||h - D a||^2` of the fit that produced this.
    pub fn residual_energy(&self) -> f64 {
        self.residual_energy
    }

    /// Supported entries as `(grid index, coefficient)` pairs.
    pub fn iter_support(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.support.iter().map(move |&k| (k, self.values[k]))
    }
}

/// Search window width for the per-atom refinement grid, relative to the
/// fixed grid step.
///
/// `HalfGridStep` follows the update algorithm's initialization (window
/// `tau_g / 2`, so the search radius is a quarter step and off-grid delays
/// are reached over a few iterations). `FullGridStep` widens the window to a
/// whole step so a mid-bin delay is reachable in a single pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauWindowPolicy {
    HalfGridStep,
    FullGridStep,
}

/// Order in which the update step walks the support atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step2Order {
    /// Strongest atom first; the default.
    DecreasingMagnitude,
    /// Ascending dictionary index, as the algorithm listing reads.
    AscendingIndex,
}

/// Residual the update step correlates each atom's candidate shifts against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step2Residual {
    /// `h` minus every *other* supported atom: each atom is refined against
    /// the part of the signal it alone has to explain. This is the standard
    /// atom-update residual and the default; refining the strongest atom
    /// with its neighbours still present measurably tilts its correlation
    /// peak and corrupts the recovered phase when echoes overlap.
    LeaveOneOut,
    /// Start from `h` and subtract each atom after its own refinement, so an
    /// atom sees every atom not yet processed. This is how the update is
    /// usually written down; kept for comparison runs.
    Progressive,
}

/// Solver parameters shared by the pursuit-based methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Number of nonzero coefficients each pursuit pass may select.
    pub s0: usize,
    /// Absolute residual-energy convergence threshold. Callers normalize the
    /// CIRs so the reference peak has unit magnitude, which makes this
    /// threshold transferable between measurements.
    pub epsilon: f64,
    /// Maximum number of outer update iterations P.
    pub max_iters: usize,
    /// Refinement grid step in seconds.
    pub tau_mg: f64,
    pub tau_w_policy: TauWindowPolicy,
    pub step2_order: Step2Order,
    pub step2_residual: Step2Residual,
    /// Re-solve the support's least-squares amplitudes after every accepted
    /// replacement inside the update pass, instead of keeping the
    /// coefficients fixed until the next pursuit pass. Strongly coupled
    /// (closely spaced, comparable-amplitude) echoes can freeze in a jointly
    /// displaced configuration under stale amplitudes; the refit restores
    /// the pull toward the true delays.
    pub step2_refit: bool,
}

impl SolverConfig {
    pub fn new(s0: usize, epsilon: f64, max_iters: usize, tau_mg: f64) -> CoreResult<Self> {
        let cfg = Self {
            s0,
            epsilon,
            max_iters,
            tau_mg,
            tau_w_policy: TauWindowPolicy::HalfGridStep,
            step2_order: Step2Order::DecreasingMagnitude,
            step2_residual: Step2Residual::LeaveOneOut,
            step2_refit: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.s0 < 1 {
            return Err(CoreError::invalid("sparsity s0 must be at least 1"));
        }
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(CoreError::invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iters < 1 {
            return Err(CoreError::invalid("at least one iteration is required"));
        }
        if self.tau_mg <= 0.0 || !self.tau_mg.is_finite() {
            return Err(CoreError::invalid(format!(
                "tau_mg must be positive, got {}",
                self.tau_mg
            )));
        }
        Ok(())
    }

    /// Mini-dictionary window width for a fixed grid step `tau_g`.
    pub fn tau_w(&self, tau_g: f64) -> f64 {
        match self.tau_w_policy {
            TauWindowPolicy::HalfGridStep => tau_g / 2.0,
            TauWindowPolicy::FullGridStep => tau_g,
        }
    }
}

fn check_inputs(d: &ShiftDictionary, h: &ImpulseResponse, s0: usize) -> CoreResult<()> {
    if h.len() != d.rows() {
        return Err(CoreError::invalid(format!(
            "CIR length {} does not match dictionary row count {}",
            h.len(),
            d.rows()
        )));
    }
    if s0 > d.len() {
        return Err(CoreError::invalid(format!(
            "sparsity {} exceeds dictionary size {}",
            s0,
            d.len()
        )));
    }
    Ok(())
}

/// Orthogonal matching pursuit: greedily selects the column with the largest
/// norm-weighted correlation against the residual, re-solving the exact
/// least-squares fit on the selected support each round.
///
/// Stops after `s0` atoms, when the residual energy reaches the machine-level
/// floor, or when no remaining column correlates with the residual.
pub fn omp(d: &ShiftDictionary, h: &ImpulseResponse, s0: usize) -> CoreResult<SparseCoefficients> {
    check_inputs(d, h, s0)?;
    let g = d.len();
    let h_energy = h.energy();
    if h_energy == 0.0 {
        return Ok(SparseCoefficients::zeros(g, 0.0));
    }
    let h_norm = h_energy.sqrt();

    let mut residual = h.values().to_vec();
    let mut support: Vec<usize> = Vec::with_capacity(s0);
    let mut coeffs: Vec<Complex64> = Vec::new();
    let mut residual_energy = h_energy;

    while support.len() < s0 {
        // Selection: largest |<d_k, r>| / ||d_k||, smallest index on ties.
        let mut best = None;
        let mut best_corr = 0.0;
        for k in 0..g {
            if support.contains(&k) {
                continue;
            }
            let nrm = d.column_norm(k);
            if nrm <= 0.0 {
                continue;
            }
            let corr = linalg::dot_conj(d.column(k), &residual).norm() / nrm;
            if corr > best_corr {
                best_corr = corr;
                best = Some(k);
            }
        }
        let Some(k) = best else { break };
        // No column carries signal any more; selecting one would only add a
        // null coefficient.
        if best_corr <= 1e-14 * h_norm {
            break;
        }
        support.push(k);

        let columns: Vec<&[Complex64]> = support.iter().map(|&j| d.column(j)).collect();
        coeffs = linalg::least_squares_columns(&columns, h.values())?;

        residual.copy_from_slice(h.values());
        for (&j, c) in support.iter().zip(coeffs.iter()) {
            linalg::axpy(-c, d.column(j), &mut residual);
        }
        residual_energy = linalg::norm_sq(&residual);
        if residual_energy <= OMP_RESIDUAL_FLOOR_REL * h_energy {
            break;
        }
    }

    let mut values = vec![Complex64::new(0.0, 0.0); g];
    for (&j, c) in support.iter().zip(coeffs.iter()) {
        values[j] = *c;
    }
    Ok(SparseCoefficients {
        values,
        support,
        residual_energy,
    })
}

/// The fixed-dictionary method: a single pursuit pass on `d_f`.
pub fn solve_fd(
    d_f: &ShiftDictionary,
    h: &ImpulseResponse,
    cfg: &SolverConfig,
) -> CoreResult<SparseCoefficients> {
    cfg.validate()?;
    omp(d_f, h, cfg.s0)
}

/// Output of the iterative dictionary update.
#[derive(Debug, Clone)]
pub struct DuResult {
    /// Coefficients of the best iterate, fit on `dictionary`.
    pub coefficients: SparseCoefficients,
    /// The refined dictionary the coefficients were fit on.
    pub dictionary: ShiftDictionary,
    /// Outer iterations executed (at most `max_iters`).
    pub iterations_run: usize,
    /// Residual energy after each pursuit pass.
    pub residual_trace: Vec<f64>,
    /// Whether the residual threshold was met within `max_iters`.
    pub converged: bool,
}

impl DuResult {
    /// The refined delay grid.
    pub fn grid(&self) -> &DelayGrid {
        self.dictionary.grid()
    }
}

/// The iterative dictionary update.
///
/// Alternates a pursuit pass (coefficients on the current dictionary) with a
/// per-atom delay refinement: around each supported atom a mini-dictionary of
/// finely spaced shifts is generated, and the atom is replaced when some
/// shifted copy correlates more strongly with the running residual. The
/// residual is rebuilt from `h` at the start of every refinement pass and the
/// atoms are subtracted progressively.
///
/// When the threshold is never met the best iterate seen is returned with
/// `converged == false`.
pub fn solve_du(
    d_f: &ShiftDictionary,
    h: &ImpulseResponse,
    cfg: &SolverConfig,
) -> CoreResult<DuResult> {
    cfg.validate()?;
    check_inputs(d_f, h, cfg.s0)?;

    let tau_g = d_f.grid().step();
    let tau_w = cfg.tau_w(tau_g);
    let synth = *d_f.synthesis();

    let mut dict = d_f.clone();
    let mut best: Option<(f64, SparseCoefficients, ShiftDictionary)> = None;
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut er = h.energy();

    while er > cfg.epsilon && iterations < cfg.max_iters {
        iterations += 1;

        // Step 1: coefficients on the current dictionary.
        let coeffs = omp(&dict, h, cfg.s0)?;
        er = coeffs.residual_energy();
        trace.push(er);
        if best.as_ref().is_none_or(|(b, _, _)| er < *b) {
            best = Some((er, coeffs.clone(), dict.clone()));
        }
        if er <= cfg.epsilon {
            break;
        }

        // Step 2: refine the delay of each supported atom.
        let mut order: Vec<usize> = coeffs.support().to_vec();
        match cfg.step2_order {
            Step2Order::DecreasingMagnitude => order.sort_by(|&a, &b| {
                coeffs.values()[b]
                    .norm()
                    .partial_cmp(&coeffs.values()[a].norm())
                    .unwrap()
                    .then(a.cmp(&b))
            }),
            Step2Order::AscendingIndex => order.sort_unstable(),
        }

        // Working residual. Progressive starts from h and loses one atom per
        // step; leave-one-out pre-subtracts everything and adds each atom
        // back just before its own test.
        let support = coeffs.support().to_vec();
        let mut values = coeffs.values().to_vec();
        let mut processed: Vec<usize> = Vec::new();
        let mut residual = h.values().to_vec();
        if cfg.step2_residual == Step2Residual::LeaveOneOut {
            for &k in &support {
                linalg::axpy(-values[k], dict.column(k), &mut residual);
            }
        }
        for j in order {
            if cfg.step2_residual == Step2Residual::LeaveOneOut {
                linalg::axpy(values[j], dict.column(j), &mut residual);
            }
            let center = dict.grid().delays()[j];
            let mini = build_mini_dictionary(
                dict.reference_spectrum(),
                dict.sweep(),
                center,
                tau_w,
                cfg.tau_mg,
                synth.window,
                synth.pad_factor,
                synth.l_keep,
            )?;

            let mut best_i = 0;
            let mut best_corr = -1.0;
            for i in 0..mini.len() {
                let nrm = mini.column_norm(i);
                if nrm <= 0.0 {
                    continue;
                }
                let corr = linalg::dot_conj(mini.column(i), &residual).norm() / nrm;
                if corr > best_corr {
                    best_corr = corr;
                    best_i = i;
                }
            }
            let current_corr = if dict.column_norm(j) > 0.0 {
                linalg::dot_conj(dict.column(j), &residual).norm() / dict.column_norm(j)
            } else {
                0.0
            };
            let replaced = current_corr < best_corr;
            if replaced {
                let new_delay = mini.grid().delays()[best_i];
                let column = mini.column(best_i).to_vec();
                dict.replace_column(j, column, new_delay);
            }
            processed.push(j);

            if replaced && cfg.step2_refit {
                // Refresh the amplitudes on the moved support. A failed
                // refit (numerically dependent columns) keeps the stale
                // amplitudes; the next pursuit pass re-solves anyway.
                let columns: Vec<&[Complex64]> = support.iter().map(|&k| dict.column(k)).collect();
                if let Ok(new_amps) = linalg::least_squares_columns(&columns, h.values()) {
                    for (&k, a) in support.iter().zip(new_amps) {
                        values[k] = a;
                    }
                }
                residual.copy_from_slice(h.values());
                let subtract: &[usize] = match cfg.step2_residual {
                    Step2Residual::LeaveOneOut => &support,
                    Step2Residual::Progressive => &processed,
                };
                for &k in subtract {
                    linalg::axpy(-values[k], dict.column(k), &mut residual);
                }
            } else {
                linalg::axpy(-values[j], dict.column(j), &mut residual);
            }
        }
    }

    match best {
        Some((best_er, coefficients, dictionary)) => Ok(DuResult {
            converged: best_er <= cfg.epsilon,
            coefficients,
            dictionary,
            iterations_run: iterations,
            residual_trace: trace,
        }),
        // The input already satisfied the threshold; the zero vector does too.
        None => Ok(DuResult {
            coefficients: SparseCoefficients::zeros(d_f.len(), h.energy()),
            dictionary: dict,
            iterations_run: 0,
            residual_trace: trace,
            converged: true,
        }),
    }
}

/// Minimum-l2-norm coefficients subject to `||h - D a||^2 <= epsilon`.
///
/// Computed from the thin SVD of the dictionary: the regularized solution
/// `a(lambda) = V diag(sigma/(sigma^2+lambda)) U^H h` has monotonically
/// increasing residual in `lambda`, so the constrained optimum sits at the
/// boundary; a bisection finds it. Fails when even the unconstrained
/// least-squares residual exceeds `epsilon`.
pub fn solve_l2(
    d_f: &ShiftDictionary,
    h: &ImpulseResponse,
    epsilon: f64,
) -> CoreResult<SparseCoefficients> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(CoreError::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    check_inputs(d_f, h, 1)?;
    let g = d_f.len();
    let h_energy = h.energy();
    if h_energy <= epsilon {
        return Ok(SparseCoefficients::zeros(g, h_energy));
    }

    let columns: Vec<Vec<Complex64>> = (0..g).map(|k| d_f.column(k).to_vec()).collect();
    let svd = linalg::thin_svd(&columns)?;
    let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
    let rank = svd
        .sigma
        .iter()
        .take_while(|&&s| s > sigma_max * 1e-14)
        .count();
    if rank == 0 {
        return Err(CoreError::Infeasible {
            min_residual: h_energy,
            epsilon,
        });
    }

    let projections: Vec<Complex64> = (0..rank)
        .map(|k| linalg::dot_conj(&svd.u[k], h.values()))
        .collect();
    let projected: f64 = projections.iter().map(|b| b.norm_sqr()).sum();
    let rho_min = (h_energy - projected).max(0.0);
    if rho_min > epsilon {
        return Err(CoreError::Infeasible {
            min_residual: rho_min,
            epsilon,
        });
    }

    let rho = |lambda: f64| -> f64 {
        let mut acc = rho_min;
        for (sigma, b) in svd.sigma[..rank].iter().zip(&projections) {
            let t = lambda / (sigma * sigma + lambda);
            acc += b.norm_sqr() * t * t;
        }
        acc
    };

    // Bracket the boundary residual, then bisect. rho is continuous and
    // increasing from rho_min to ||h||^2.
    let mut lo = 0.0;
    let mut hi = sigma_max * sigma_max;
    let mut guard = 0;
    while rho(hi) < epsilon && guard < 200 {
        hi *= 4.0;
        guard += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rho(mid) <= epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = lo;

    let mut values = vec![Complex64::new(0.0, 0.0); g];
    for ((sigma, b), v_col) in svd.sigma[..rank].iter().zip(&projections).zip(&svd.v) {
        let c = b * (sigma / (sigma * sigma + lambda));
        for (v, basis) in values.iter_mut().zip(v_col) {
            *v += basis * c;
        }
    }

    let fit = d_f.apply(&values);
    let mut residual = h.values().to_vec();
    for (r, f) in residual.iter_mut().zip(fit.iter()) {
        *r -= f;
    }
    let residual_energy = linalg::norm_sq(&residual);

    let max_mag = values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let support: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() >= L2_SUPPORT_REL_THRESHOLD * max_mag && max_mag > 0.0)
        .map(|(k, _)| k)
        .collect();

    Ok(SparseCoefficients {
        values,
        support,
        residual_energy,
    })
}

/// One sparsity level's outcome inside a sweep.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub s0: usize,
    pub residual_energy: Option<f64>,
    pub error: Option<String>,
}

/// Result of sweeping the sparsity level.
#[derive(Debug, Clone)]
pub struct SweepOutcome<T> {
    pub best_s0: usize,
    pub best: T,
    pub runs: Vec<SweepRun>,
}

/// Runs `solve` for every sparsity in `s0_range` and keeps the run with the
/// smallest residual energy. Runs whose residuals agree within
/// `tie_tolerance` count as tied and the smallest sparsity wins. Failed runs
/// are recorded and excluded; only if every run fails does the sweep fail.
pub fn sweep_sparsity<T>(
    s0_range: impl IntoIterator<Item = usize>,
    tie_tolerance: f64,
    mut solve: impl FnMut(usize) -> CoreResult<(T, f64)>,
) -> CoreResult<SweepOutcome<T>> {
    let mut runs = Vec::new();
    let mut successes: Vec<(usize, T, f64)> = Vec::new();
    for s0 in s0_range {
        match solve(s0) {
            Ok((value, residual)) => {
                runs.push(SweepRun {
                    s0,
                    residual_energy: Some(residual),
                    error: None,
                });
                successes.push((s0, value, residual));
            }
            Err(e) => runs.push(SweepRun {
                s0,
                residual_energy: None,
                error: Some(e.to_string()),
            }),
        }
    }
    if runs.is_empty() {
        return Err(CoreError::invalid("sparsity sweep range is empty"));
    }
    if successes.is_empty() {
        return Err(CoreError::invalid("every sparsity level failed"));
    }
    let min_residual = successes
        .iter()
        .map(|(_, _, r)| *r)
        .fold(f64::INFINITY, f64::min);
    let winner = successes
        .iter()
        .enumerate()
        .filter(|(_, (_, _, r))| *r <= min_residual + tie_tolerance)
        .min_by_key(|(_, (s0, _, _))| *s0)
        .map(|(i, _)| i)
        .expect("at least one success");
    let (best_s0, best, _) = successes.swap_remove(winner);
    Ok(SweepOutcome {
        best_s0,
        best,
        runs,
    })
}

/// Sparsity sweep for the fixed-dictionary method.
pub fn sweep_fd(
    d_f: &ShiftDictionary,
    h: &ImpulseResponse,
    cfg: &SolverConfig,
    s0_range: impl IntoIterator<Item = usize>,
) -> CoreResult<SweepOutcome<SparseCoefficients>> {
    let tie = 1e-12 * h.energy();
    sweep_sparsity(s0_range, tie, |s0| {
        let run_cfg = SolverConfig { s0, ..*cfg };
        let coeffs = solve_fd(d_f, h, &run_cfg)?;
        let residual = coeffs.residual_energy();
        Ok((coeffs, residual))
    })
}

/// Sparsity sweep for the dictionary-update method.
pub fn sweep_du(
    d_f: &ShiftDictionary,
    h: &ImpulseResponse,
    cfg: &SolverConfig,
    s0_range: impl IntoIterator<Item = usize>,
) -> CoreResult<SweepOutcome<DuResult>> {
    let tie = 1e-12 * h.energy();
    sweep_sparsity(s0_range, tie, |s0| {
        let run_cfg = SolverConfig { s0, ..*cfg };
        let result = solve_du(d_f, h, &run_cfg)?;
        let residual = result.coefficients.residual_energy();
        Ok((result, residual))
    })
}
