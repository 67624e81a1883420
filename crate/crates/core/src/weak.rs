//! Closed-form weak-excitation theory: quasi-steady manifold amplitudes,
//! manifold populations, analytic single-time observables, and the
//! approximate post-emission g²(τ). Serves both as a fast analytic layer and
//! as the independent oracle for the master-equation solvers.
//!
//! Between photon emissions the system occupies one of two pure-state
//! manifolds,
//!
//!   |ψ⁽¹⁾⟩ ∝ |0,e⟩ + β⁽¹⁾|1,g⟩ + μ⁽¹⁾|2,e⟩,
//!   |ψ⁽²⁾⟩ ∝ |0,g⟩ + β⁽²⁾|1,e⟩ + μ⁽²⁾|2,g⟩,
//!
//! and an emission switches it to the other manifold.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::integrate_to_grid;
use crate::solvers::Observables;
use crate::spectral::CorrelationValues;
use ndarray::Array1;

/// Quasi-steady amplitudes β⁽¹⁾, μ⁽¹⁾, β⁽²⁾, μ⁽²⁾.
#[derive(Debug, Clone, Copy)]
pub struct ManifoldAmplitudes {
    pub beta1: C64,
    pub mu1: C64,
    pub beta2: C64,
    pub mu2: C64,
    /// Set when |μ/β| > 0.3 for either manifold, i.e. outside the regime
    /// where the two-photon amplitude is a small correction.
    pub regime_warning: bool,
}

/// Manifold populations p₁, p₂ and their ratio ξ = p₁/p₂.
#[derive(Debug, Clone, Copy)]
pub struct ManifoldPopulations {
    pub xi: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Detuning of the |1,g⟩ amplitude in manifold 1: ω − ω₀ − U/2 − iκ.
pub fn detuning1(params: &ModelParams) -> C64 {
    C64::new(params.omega - params.omega0 - 0.5 * params.u, -params.kappa)
}

/// Detuning of the |1,e⟩ amplitude in manifold 2: ω + ω₀ + U/2 − iκ.
pub fn detuning2(params: &ModelParams) -> C64 {
    C64::new(params.omega + params.omega0 + 0.5 * params.u, -params.kappa)
}

/// Evaluate the four quasi-steady amplitude formulas.
pub fn amplitudes(params: &ModelParams) -> Result<ManifoldAmplitudes> {
    params.validate()?;
    let g = C64::new(params.g, 0.0);
    let sqrt2 = C64::new(2f64.sqrt(), 0.0);
    let d1 = detuning1(params);
    let d2 = detuning2(params);
    let dmu1 = C64::new(params.omega + 0.5 * params.u, -params.kappa);
    let dmu2 = C64::new(params.omega - 0.5 * params.u, -params.kappa);

    let beta1 = -g / d1;
    let mu1 = g * g / (sqrt2 * dmu1 * d1);
    let beta2 = -g / d2;
    let mu2 = g * g / (sqrt2 * dmu2 * d2);

    let ratio = |mu: C64, beta: C64| {
        if beta.norm() < 1e-300 {
            0.0
        } else {
            mu.norm() / beta.norm()
        }
    };
    let regime_warning = ratio(mu1, beta1) > 0.3 || ratio(mu2, beta2) > 0.3;

    Ok(ManifoldAmplitudes {
        beta1,
        mu1,
        beta2,
        mu2,
        regime_warning,
    })
}

/// ξ = |β⁽²⁾|²/|β⁽¹⁾|², p₁ = ξ/(1+ξ), p₂ = 1/(1+ξ).
pub fn populations(amps: &ManifoldAmplitudes) -> Result<ManifoldPopulations> {
    let b1 = amps.beta1.norm_sqr();
    let b2 = amps.beta2.norm_sqr();
    if b1 <= 0.0 && b2 <= 0.0 {
        return Err(Error::Undefined(
            "manifold populations undefined when both beta amplitudes vanish (g = 0)".into(),
        ));
    }
    let xi = b2 / b1;
    Ok(ManifoldPopulations {
        xi,
        p1: xi / (1.0 + xi),
        p2: 1.0 / (1.0 + xi),
    })
}

/// Closed-form steady-state observables:
///
///   ⟨a†a⟩ = g²/[(ω₀+U/2)² + ω² + κ²]
///   ⟨σ_z⟩ = −2ω(ω₀+U/2)/[(ω₀+U/2)² + ω² + κ²]
///   g²(0) = ½[ω² + (ω₀+U/2)² + κ²]·[1/((ω+U/2)²+κ²) + 1/((ω−U/2)²+κ²)]
pub fn closed_form_observables(params: &ModelParams) -> Result<Observables> {
    params.validate()?;
    let w = params.omega;
    let k = params.kappa;
    let delta = params.omega0 + 0.5 * params.u;
    let denom = delta * delta + w * w + k * k;

    let photon_number = params.g * params.g / denom;
    let inversion = -2.0 * w * delta / denom;
    let g2 = 0.5
        * (w * w + delta * delta + k * k)
        * (1.0 / ((w + 0.5 * params.u).powi(2) + k * k)
            + 1.0 / ((w - 0.5 * params.u).powi(2) + k * k));
    Ok(Observables {
        photon_number,
        inversion,
        g2_zero: Some(g2),
    })
}

/// Half-width of the Lorentzian ⟨a†a⟩(U): 2√(ω²+κ²).
pub fn lorentzian_hwhm(params: &ModelParams) -> f64 {
    2.0 * (params.omega * params.omega + params.kappa * params.kappa).sqrt()
}

/// Inversion extremum value attained at U = −2ω₀ ± 2ω: ∓2ω²/(2ω²+κ²).
pub fn inversion_extremum(params: &ModelParams) -> f64 {
    let w2 = params.omega * params.omega;
    2.0 * w2 / (2.0 * w2 + params.kappa * params.kappa)
}

/// g²(0) at the antibunching minimum U = −2ω₀:
/// ½[(ω²+κ²)/((ω−ω₀)²+κ²) + (ω²+κ²)/((ω+ω₀)²+κ²)].
pub fn g2_minimum(params: &ModelParams) -> f64 {
    let w = params.omega;
    let w0 = params.omega0;
    let k2 = params.kappa * params.kappa;
    let num = w * w + k2;
    0.5 * (num / ((w - w0).powi(2) + k2) + num / ((w + w0).powi(2) + k2))
}

/// Amplitude traces from integrating the two decoupled 2×2 linear systems
/// (with the manifold's leading amplitude pinned to 1).
#[derive(Debug, Clone)]
pub struct AmplitudeTraces {
    pub t_grid: Vec<f64>,
    pub beta1: Vec<C64>,
    pub mu1: Vec<C64>,
    pub beta2: Vec<C64>,
    pub mu2: Vec<C64>,
}

/// Integrate the amplitude equations of motion
///
///   β̇⁽¹⁾ = −ig − i(ω−ω₀−U/2−iκ)β⁽¹⁾ − i√2 g μ⁽¹⁾
///   μ̇⁽¹⁾ = −i√2 g β⁽¹⁾ − i(2ω+U−2iκ)μ⁽¹⁾
///   β̇⁽²⁾ = −ig − i(ω+ω₀+U/2−iκ)β⁽²⁾ − i√2 g μ⁽²⁾
///   μ̇⁽²⁾ = −i√2 g β⁽²⁾ − i(2ω−U−2iκ)μ⁽²⁾
///
/// from the given initial amplitudes over `t_grid` (starting at 0).
pub fn transient_amplitudes(
    params: &ModelParams,
    t_grid: &[f64],
    initial: &ManifoldAmplitudes,
) -> Result<AmplitudeTraces> {
    params.validate()?;
    let g = params.g;
    let mi = C64::new(0.0, -1.0);
    let sqrt2g = C64::new(2f64.sqrt() * g, 0.0);
    let gc = C64::new(g, 0.0);
    let d1 = detuning1(params);
    let d2 = detuning2(params);
    let dmu1 = C64::new(2.0 * params.omega + params.u, -2.0 * params.kappa);
    let dmu2 = C64::new(2.0 * params.omega - params.u, -2.0 * params.kappa);

    let y0 = Array1::from_vec(vec![initial.beta1, initial.mu1, initial.beta2, initial.mu2]);
    let rhs = move |_t: f64, y: &Array1<C64>| {
        let (b1, m1, b2, m2) = (y[0], y[1], y[2], y[3]);
        Array1::from_vec(vec![
            mi * (gc + d1 * b1 + sqrt2g * m1),
            mi * (sqrt2g * b1 + dmu1 * m1),
            mi * (gc + d2 * b2 + sqrt2g * m2),
            mi * (sqrt2g * b2 + dmu2 * m2),
        ])
    };
    let states = integrate_to_grid(rhs, 0.0, &y0, t_grid, crate::ode::DEFAULT_RTOL, crate::ode::DEFAULT_ATOL)?;
    Ok(AmplitudeTraces {
        t_grid: t_grid.to_vec(),
        beta1: states.iter().map(|y| y[0]).collect(),
        mu1: states.iter().map(|y| y[1]).collect(),
        beta2: states.iter().map(|y| y[2]).collect(),
        mu2: states.iter().map(|y| y[3]).collect(),
    })
}

/// The post-emission single-photon amplitudes β̃⁽¹⁾(τ), β̃⁽²⁾(τ) in the
/// small-g limit (leading amplitudes frozen at their post-jump values).
pub fn post_jump_beta(params: &ModelParams, tau: f64) -> Result<(C64, C64)> {
    let amps = amplitudes(params)?;
    let pops = populations(&amps)?;
    let denom_sq = (pops.p1 * amps.beta1.norm_sqr() + pops.p2 * amps.beta2.norm_sqr()).sqrt();
    let sqrt2 = C64::new(2f64.sqrt(), 0.0);
    let one = C64::new(1.0, 0.0);
    let tau_c = C64::new(tau, 0.0);
    let mi = C64::new(0.0, -1.0);

    let phase1 = (mi * detuning1(params) * tau_c).exp();
    let phase2 = (mi * detuning2(params) * tau_c).exp();

    let b1 = (sqrt2 * amps.mu2 * phase1 - amps.beta2 * amps.beta1 * (phase1 - one))
        / C64::new(denom_sq, 0.0);
    let b2 = (sqrt2 * amps.mu1 * phase2 - amps.beta1 * amps.beta2 * (phase2 - one))
        / C64::new(denom_sq, 0.0);
    Ok((b1, b2))
}

/// Approximate g²(τ) from the post-emission trajectory picture:
///
///   g²(τ) = [p₂|β̃⁽¹⁾(τ)|² + p₁|β̃⁽²⁾(τ)|²] / [p₁|β⁽¹⁾|² + p₂|β⁽²⁾|²].
///
/// Valid in the weak-excitation regime; the returned trace carries a regime
/// warning flag when |β| > 0.3.
pub fn g2_tau_approx(params: &ModelParams, tau_grid: &[f64]) -> Result<CorrelationValues> {
    params.validate()?;
    let amps = amplitudes(params)?;
    let pops = populations(&amps)?;
    let denom = pops.p1 * amps.beta1.norm_sqr() + pops.p2 * amps.beta2.norm_sqr();
    let regime_warning =
        amps.beta1.norm() > 0.3 || amps.beta2.norm() > 0.3 || amps.regime_warning;

    let mut values = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let (b1, b2) = post_jump_beta(params, tau)?;
        let num = pops.p2 * b1.norm_sqr() + pops.p1 * b2.norm_sqr();
        values.push(C64::new(num / denom, 0.0));
    }
    Ok(CorrelationValues {
        tau_grid: tau_grid.to_vec(),
        values,
        regime_warning,
    })
}
