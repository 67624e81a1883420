//! Two-time correlation functions via the quantum regression theorem,
//! the cavity emission spectrum, and the dressed-state eigenanalysis used to
//! assign spectral lines.
//!
//! Correlations are propagated with a precomputed matrix exponential of the
//! Liouvillian over one uniform grid step; the regression theorem reduces
//! both g²(τ) and C(τ) to single-time traces of the propagated
//! operator-modified state.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, creation, number_op, SpaceSpec, StateVector,
};
use crate::model::{liouvillian, unvectorize, vectorize, ModelParams};
use crate::ode::expm;
use crate::solvers::{observables, steady_state};

/// A two-time correlation trace on a τ grid. For g²(τ) the values are real
/// (stored in the real part); for C(τ) they are genuinely complex.
#[derive(Debug, Clone)]
pub struct CorrelationValues {
    pub tau_grid: Vec<f64>,
    pub values: Vec<C64>,
    /// Set when the producing approximation was evaluated outside its
    /// validity regime (analytic traces only; always false for QRT).
    pub regime_warning: bool,
}

/// Emission spectrum S(ν) on a frequency grid.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub nu_grid: Vec<f64>,
    pub s_values: Vec<f64>,
    /// ⟨a†a⟩ of the steady state the spectrum was computed from, for the
    /// C(0) sum rule (1/2π)∫S dν = ⟨a†a⟩.
    pub photon_number: f64,
}

/// Uniform grid helper: `n` points from 0 with spacing `dt`.
pub fn uniform_grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

/// Propagate a vectorized operator through `n-1` uniform steps of e^{L dτ},
/// recording the trace of `weight · X(τ)` at every step.
fn propagate_trace(
    sup: &Array2<C64>,
    x0: &Array1<C64>,
    weight: &Array2<C64>,
    dim: usize,
    n: usize,
    dt: f64,
) -> Result<Vec<C64>> {
    let step = expm(&sup.mapv(|z| z * C64::new(dt, 0.0)))?;
    let mut out = Vec::with_capacity(n);
    let mut x = x0.clone();
    for k in 0..n {
        if k > 0 {
            x = step.dot(&x);
        }
        let m = unvectorize(&x, dim);
        let tr: C64 = weight.dot(&m).diag().sum();
        out.push(tr);
    }
    Ok(out)
}

fn require_uniform(tau_grid: &[f64]) -> Result<f64> {
    if tau_grid.len() < 2 || tau_grid[0] != 0.0 {
        return Err(Error::InvalidParam(
            "tau grid must start at 0 with at least two points".into(),
        ));
    }
    let dt = tau_grid[1] - tau_grid[0];
    if dt <= 0.0 {
        return Err(Error::InvalidParam("tau grid must be increasing".into()));
    }
    for (k, w) in tau_grid.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidParam(format!(
                "tau grid must be uniform; step {k} is {step}, expected {dt}"
            )));
        }
    }
    Ok(dt)
}

/// g²(τ) = Tr[a†a · e^{Lτ}(a ρ_ss a†)] / ⟨a†a⟩² via the quantum regression
/// theorem, on a uniform τ grid starting at 0.
pub fn g2_tau(params: &ModelParams, space: SpaceSpec, tau_grid: &[f64]) -> Result<CorrelationValues> {
    let dt = require_uniform(tau_grid)?;
    let lv = liouvillian(params, space)?;
    let ss = steady_state(&lv)?;
    let obs = observables(&ss.rho)?;
    if obs.photon_number < 1e-14 {
        return Err(Error::Undefined(
            "g2(tau) undefined: steady-state photon number below 1e-14".into(),
        ));
    }
    let a = annihilation(space);
    let adag = creation(space);
    let seeded = a
        .entries()
        .dot(ss.rho.entries())
        .dot(adag.entries());
    let weight = number_op(space);
    let traces = propagate_trace(
        lv.superop(),
        &vectorize(&seeded),
        weight.entries(),
        space.dim(),
        tau_grid.len(),
        dt,
    )?;
    let norm = obs.photon_number * obs.photon_number;
    Ok(CorrelationValues {
        tau_grid: tau_grid.to_vec(),
        values: traces.iter().map(|&t| t / C64::new(norm, 0.0)).collect(),
        regime_warning: false,
    })
}

/// C(τ) = Tr[a† · e^{Lτ}(a ρ_ss)] (the mean field ⟨a⟩ vanishes for this
/// model, so no product term is subtracted).
pub fn field_correlation(
    params: &ModelParams,
    space: SpaceSpec,
    tau_grid: &[f64],
) -> Result<CorrelationValues> {
    let dt = require_uniform(tau_grid)?;
    let lv = liouvillian(params, space)?;
    let ss = steady_state(&lv)?;
    let a = annihilation(space);
    let adag = creation(space);
    let seeded = a.entries().dot(ss.rho.entries());
    let traces = propagate_trace(
        lv.superop(),
        &vectorize(&seeded),
        adag.entries(),
        space.dim(),
        tau_grid.len(),
        dt,
    )?;
    Ok(CorrelationValues {
        tau_grid: tau_grid.to_vec(),
        values: traces,
        regime_warning: false,
    })
}

/// Fraction of C(0) the tail of |C(τ)| must decay below before the spectrum
/// transform is allowed.
pub const DECAY_CRITERION: f64 = 0.01;

/// Extend a field-correlation window until the running tail maximum of
/// |C(τ)| drops below `DECAY_CRITERION · C(0)`. Returns the trace on a
/// uniform grid with step `dt`. `max_len` caps the window length.
pub fn field_correlation_decayed(
    params: &ModelParams,
    space: SpaceSpec,
    dt: f64,
    initial_len: f64,
    max_len: f64,
) -> Result<CorrelationValues> {
    let mut len = initial_len;
    loop {
        let n = (len / dt).ceil() as usize + 1;
        let grid = uniform_grid(n, dt);
        let trace = field_correlation(params, space, &grid)?;
        let c0 = trace.values[0].norm().max(1e-300);
        // tail = last 5% of the window, at least one oscillation period
        let tail_start = (n as f64 * 0.95) as usize;
        let tail_max = trace.values[tail_start..]
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        if tail_max < DECAY_CRITERION * c0 {
            return Ok(trace);
        }
        if len >= max_len {
            return Err(Error::DecayCriterionUnmet {
                reached: tail_max / c0,
                required: DECAY_CRITERION,
            });
        }
        len = (len * 2.0).min(max_len);
    }
}

/// S(ν) = 2 Re ∫₀^T C(τ) e^{−iντ} dτ by trapezoidal quadrature on the
/// (uniform) correlation grid, evaluated at every requested frequency. The
/// correlation must already satisfy the decay criterion.
pub fn emission_spectrum(
    correlation: &CorrelationValues,
    photon_number: f64,
    nu_grid: &[f64],
) -> Result<Spectrum> {
    let n = correlation.values.len();
    if n < 2 {
        return Err(Error::InvalidParam("correlation trace too short".into()));
    }
    let dt = correlation.tau_grid[1] - correlation.tau_grid[0];
    let c0 = correlation.values[0].norm().max(1e-300);
    let tail_max = correlation.values[(n as f64 * 0.95) as usize..]
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if tail_max >= DECAY_CRITERION * c0 {
        return Err(Error::DecayCriterionUnmet {
            reached: tail_max / c0,
            required: DECAY_CRITERION,
        });
    }

    let mut s_values = Vec::with_capacity(nu_grid.len());
    for &nu in nu_grid {
        let rot = C64::new(0.0, -nu * dt).exp();
        let mut phase = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        for (k, &c) in correlation.values.iter().enumerate() {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc += c * phase * C64::new(w, 0.0);
            phase *= rot;
        }
        s_values.push(2.0 * (acc * C64::new(dt, 0.0)).re);
    }
    Ok(Spectrum {
        nu_grid: nu_grid.to_vec(),
        s_values,
        photon_number,
    })
}

/// Two-sided transform ∫_{-T}^{T} C(τ) e^{−iντ} dτ using C(−τ) = C(τ)*;
/// analytically identical to [`emission_spectrum`], kept as an internal
/// cross-check of the Hermitian symmetry of C.
pub fn emission_spectrum_two_sided(
    correlation: &CorrelationValues,
    photon_number: f64,
    nu_grid: &[f64],
) -> Result<Spectrum> {
    let n = correlation.values.len();
    if n < 2 {
        return Err(Error::InvalidParam("correlation trace too short".into()));
    }
    let dt = correlation.tau_grid[1] - correlation.tau_grid[0];
    let mut s_values = Vec::with_capacity(nu_grid.len());
    for &nu in nu_grid {
        let rot = C64::new(0.0, -nu * dt).exp();
        let mut phase = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        for (k, &c) in correlation.values.iter().enumerate() {
            // C(tau) e^{-i nu tau} + C(-tau) e^{+i nu tau} with C(-tau) = C(tau)*;
            // tau = 0 appears once (interior point of the symmetric integral),
            // the +/-T endpoints carry the trapezoid half-weights
            let w = if k == n - 1 { 0.5 } else { 1.0 };
            let term = if k == 0 {
                c * phase
            } else {
                c * phase + (c * phase).conj()
            };
            acc += term * C64::new(w, 0.0);
            phase *= rot;
        }
        s_values.push((acc * C64::new(dt, 0.0)).re);
    }
    Ok(Spectrum {
        nu_grid: nu_grid.to_vec(),
        s_values,
        photon_number,
    })
}

/// (1/2π)∫S(ν)dν by trapezoid on the (possibly non-uniform) frequency grid.
pub fn spectrum_integral(spectrum: &Spectrum) -> f64 {
    let mut acc = 0.0;
    for k in 1..spectrum.nu_grid.len() {
        let dnu = spectrum.nu_grid[k] - spectrum.nu_grid[k - 1];
        acc += 0.5 * (spectrum.s_values[k] + spectrum.s_values[k - 1]) * dnu;
    }
    acc / (2.0 * std::f64::consts::PI)
}

/// A detected spectral peak after parabolic sub-grid refinement.
#[derive(Debug, Clone, Copy)]
pub struct Peak {
    pub nu: f64,
    pub height: f64,
    /// Full width at half maximum estimated by linear interpolation of the
    /// half-height crossings, when both crossings are resolved.
    pub fwhm: Option<f64>,
}

/// Local maxima above `threshold_frac` of the global maximum, with parabolic
/// refinement of position and height.
pub fn detect_peaks(spectrum: &Spectrum, threshold_frac: f64) -> Vec<Peak> {
    let s = &spectrum.s_values;
    let nu = &spectrum.nu_grid;
    let n = s.len();
    if n < 3 {
        return Vec::new();
    }
    let global_max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = threshold_frac * global_max;
    let mut peaks = Vec::new();
    for k in 1..n - 1 {
        if s[k] > threshold && s[k] >= s[k - 1] && s[k] > s[k + 1] {
            // parabola through (k-1, k, k+1) in index space, mapped to nu
            let denom = s[k - 1] - 2.0 * s[k] + s[k + 1];
            let (nu_peak, height) = if denom.abs() > 1e-300 {
                let delta = 0.5 * (s[k - 1] - s[k + 1]) / denom;
                let delta = delta.clamp(-0.5, 0.5);
                let left = nu[k] - nu[k - 1];
                let right = nu[k + 1] - nu[k];
                let dnu = if delta < 0.0 { left } else { right };
                (
                    nu[k] + delta * dnu,
                    s[k] - 0.25 * (s[k - 1] - s[k + 1]) * delta,
                )
            } else {
                (nu[k], s[k])
            };
            let fwhm = estimate_fwhm(nu, s, k, height);
            peaks.push(Peak {
                nu: nu_peak,
                height,
                fwhm,
            });
        }
    }
    peaks
}

fn estimate_fwhm(nu: &[f64], s: &[f64], k: usize, height: f64) -> Option<f64> {
    let half = 0.5 * height;
    // walk left
    let mut left = None;
    for i in (0..k).rev() {
        if s[i] <= half {
            let t = (half - s[i]) / (s[i + 1] - s[i]).max(1e-300);
            left = Some(nu[i] + t * (nu[i + 1] - nu[i]));
            break;
        }
        // another peak rising again before crossing half: unresolved
        if i < k && i > 0 && s[i] > s[i + 1] && s[i] > half {
            // still above half and increasing leftward; keep walking
        }
    }
    let mut right = None;
    for i in k + 1..s.len() {
        if s[i] <= half {
            let t = (s[i - 1] - half) / (s[i - 1] - s[i]).max(1e-300);
            right = Some(nu[i - 1] + t * (nu[i] - nu[i - 1]));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) if r > l => Some(r - l),
        _ => None,
    }
}

/// Dressed-state eigenanalysis of H: sorted energies, eigenstates, labels by
/// dominant bare component, and |⟨ψ_i|a|ψ_j⟩| between the states dominated
/// by the zero- and one-photon bare components.
#[derive(Debug, Clone)]
pub struct DressedStateSet {
    pub energies: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Dominant bare component (n, excited) where |overlap|² > 0.5; `None`
    /// for strongly mixed or degeneracy-flagged states.
    pub labels: Vec<Option<(usize, bool)>>,
    /// Indices (into the sorted eigenbasis) of near-degenerate pairs within
    /// 1e-10·ω₀, for which labeling is skipped.
    pub degenerate_pairs: Vec<(usize, usize)>,
    /// |⟨ψ_i|a|ψ_j⟩| between the four states labeled by {|0,g⟩, |0,e⟩,
    /// |1,g⟩, |1,e⟩}; indexed by `core_states`.
    pub transition_amplitudes: Array2<f64>,
    /// Eigenbasis indices of those four states (when all were identified).
    pub core_states: Vec<usize>,
}

pub fn dressed_states(params: &ModelParams, space: SpaceSpec) -> Result<DressedStateSet> {
    let h = crate::model::hamiltonian(params, space)?;
    let (vals, vecs) = h.entries().eigh(UPLO::Lower)?;
    let dim = space.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());

    let energies: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut states = Vec::with_capacity(dim);
    for &i in &order {
        // eigh on a row-major complex array returns eigenvectors of the
        // conjugate matrix; H is real here, but conjugate for correctness
        let amps = vecs.column(i).mapv(|z| z.conj());
        states.push(StateVector::from_amplitudes(space, amps)?);
    }

    let mut degenerate_pairs = Vec::new();
    let degen_tol = 1e-10 * params.omega0;
    for k in 1..dim {
        if (energies[k] - energies[k - 1]).abs() < degen_tol {
            degenerate_pairs.push((k - 1, k));
        }
    }
    let mut degenerate_member = vec![false; dim];
    for &(i, j) in &degenerate_pairs {
        degenerate_member[i] = true;
        degenerate_member[j] = true;
    }

    let mut labels: Vec<Option<(usize, bool)>> = Vec::with_capacity(dim);
    for (k, st) in states.iter().enumerate() {
        if degenerate_member[k] {
            labels.push(None);
            continue;
        }
        // dominant bare overlap; ties within 1e-3 are left unlabeled
        let mut best = (0usize, 0.0f64);
        let mut second = 0.0f64;
        for (i, amp) in st.amplitudes().iter().enumerate() {
            let w = amp.norm_sqr();
            if w > best.1 {
                second = best.1;
                best = (i, w);
            } else if w > second {
                second = w;
            }
        }
        if best.1 > 0.5 && best.1 - second > 1e-3 {
            labels.push(Some(space.unindex(best.0)));
        } else {
            labels.push(None);
        }
    }

    // states dominated by the four zero/one-photon bare components
    let wanted = [(0, false), (0, true), (1, false), (1, true)];
    let mut core_states = Vec::new();
    for w in wanted {
        if let Some(k) = labels.iter().position(|&l| l == Some(w)) {
            core_states.push(k);
        }
    }
    let a = annihilation(space);
    let m = core_states.len();
    let mut transition_amplitudes = Array2::<f64>::zeros((m, m));
    for (r, &i) in core_states.iter().enumerate() {
        for (c, &j) in core_states.iter().enumerate() {
            let aj = a.entries().dot(states[j].amplitudes());
            let amp: C64 = states[i]
                .amplitudes()
                .iter()
                .zip(aj.iter())
                .map(|(x, y)| x.conj() * y)
                .sum();
            transition_amplitudes[[r, c]] = amp.norm();
        }
    }

    Ok(DressedStateSet {
        energies,
        states,
        labels,
        degenerate_pairs,
        transition_amplitudes,
        core_states,
    })
}

/// A spectral peak paired with the dressed transition whose energy
/// difference is nearest.
#[derive(Debug, Clone)]
pub struct AssignedLine {
    pub peak: Peak,
    /// (initial, final) eigenbasis indices, or `None` when no transition
    /// energy lies within the matching window.
    pub transition: Option<(usize, usize)>,
    /// |⟨ψ_f|a|ψ_i⟩| for the matched transition.
    pub amplitude: Option<f64>,
    /// |ν_peak − ΔE| of the match.
    pub detuning: Option<f64>,
}

/// Pair each detected peak (local max above 1% of the global max) with the
/// dressed transition of nearest energy difference. Unmatched peaks are
/// reported with `transition: None` rather than dropped.
pub fn assign_lines(
    dressed: &DressedStateSet,
    spectrum: &Spectrum,
    match_window: f64,
) -> Vec<AssignedLine> {
    let peaks = detect_peaks(spectrum, 0.01);
    let a_dim = dressed.states.len();
    let space = if a_dim > 0 {
        Some(dressed.states[0].space())
    } else {
        None
    };
    let a = space.map(annihilation);

    peaks
        .into_iter()
        .map(|peak| {
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..a_dim {
                for f in 0..a_dim {
                    if i == f {
                        continue;
                    }
                    // emission i -> f at nu = E_i - E_f
                    let de = dressed.energies[i] - dressed.energies[f];
                    let gap = (peak.nu - de).abs();
                    if best.map_or(true, |(_, _, g)| gap < g) {
                        best = Some((i, f, gap));
                    }
                }
            }
            match best {
                Some((i, f, gap)) if gap <= match_window => {
                    let amp = a.as_ref().map(|a| {
                        let ai = a.entries().dot(dressed.states[i].amplitudes());
                        let overlap: C64 = dressed.states[f]
                            .amplitudes()
                            .iter()
                            .zip(ai.iter())
                            .map(|(x, y)| x.conj() * y)
                            .sum();
                        overlap.norm()
                    });
                    AssignedLine {
                        peak,
                        transition: Some((i, f)),
                        amplitude: amp,
                        detuning: Some(gap),
                    }
                }
                _ => AssignedLine {
                    peak,
                    transition: None,
                    amplitude: None,
                    detuning: None,
                },
            }
        })
        .collect()
}
