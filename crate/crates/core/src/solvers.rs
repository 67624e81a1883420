//! Steady-state solution of the Liouvillian, master-equation time
//! propagation, and Fock-cutoff convergence control.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Norm, Solve, SVD};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, creation, expectation, make_space, number_op, pauli, DensityMatrix, PauliKind,
    SpaceSpec,
};
use crate::model::{liouvillian, unvectorize, vectorize, Liouvillian, ModelParams};
use crate::ode::{integrate_to_grid, DEFAULT_ATOL, DEFAULT_RTOL};

/// Residual threshold below which a steady-state solve counts as converged.
/// The residual is ‖L vec(ρ)‖₂ normalized by ‖L‖_F, so the threshold is
/// invariant under a common rescaling of all physical rates.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;

/// Ratio of the two smallest singular values of L above which the null space
/// is taken to be one-dimensional.
pub const NULLSPACE_RATIO: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub rho: DensityMatrix,
    /// ‖L vec(ρ)‖₂ / ‖L‖_F.
    pub residual: f64,
    pub n_max_used: usize,
    pub converged: bool,
}

/// Single-time observables of a state.
#[derive(Debug, Clone, Copy)]
pub struct Observables {
    /// ⟨a†a⟩.
    pub photon_number: f64,
    /// ⟨σ_z⟩.
    pub inversion: f64,
    /// g²(0) = ⟨a†a†aa⟩/⟨a†a⟩²; `None` when ⟨a†a⟩ < 1e-14.
    pub g2_zero: Option<f64>,
}

/// Solve L[ρ] = 0 with the trace constraint via a bordered linear system:
/// row 0 of the vectorized Liouvillian is replaced by the trace functional
/// and the system solved against e₀. The residual is verified afterward; a
/// failed residual triggers a null-space dimension probe so that the
/// degenerate case (e.g. g = 0, where σ_z is conserved) is reported as an
/// error rather than an arbitrary state.
pub fn steady_state(lv: &Liouvillian) -> Result<SteadyStateResult> {
    let dim = lv.space().dim();
    let d2 = dim * dim;
    let sup = lv.superop();
    let sup_norm = sup.norm_l2().max(1e-300);

    let mut bordered = sup.clone();
    for k in 0..d2 {
        bordered[[0, k]] = C64::new(0.0, 0.0);
    }
    for i in 0..dim {
        bordered[[0, i + dim * i]] = C64::new(1.0, 0.0);
    }
    let mut rhs = Array1::<C64>::zeros(d2);
    rhs[0] = C64::new(1.0, 0.0);

    let solved = bordered.solve(&rhs);
    let x = match solved {
        Ok(x) if x.iter().all(|z| z.is_finite()) => x,
        _ => return probe_failure(lv),
    };

    let residual = sup.dot(&x).norm_l2() / sup_norm;
    if residual > STEADY_RESIDUAL_TOL {
        return probe_failure(lv);
    }

    let raw = unvectorize(&x, dim);
    // symmetrize away the solver's rounding noise before validation
    let herm = (&raw + &raw.t().mapv(|z| z.conj())).mapv(|z| z * C64::new(0.5, 0.0));
    let tr: C64 = herm.diag().sum();
    let normalized = herm.mapv(|z| z / tr);
    let rho = DensityMatrix::from_entries(lv.space(), normalized)?;

    Ok(SteadyStateResult {
        rho,
        residual,
        n_max_used: lv.space().n_max(),
        converged: true,
    })
}

/// Classify a failed bordered solve: degenerate null space vs plain
/// non-convergence, from the two smallest singular values of L.
fn probe_failure(lv: &Liouvillian) -> Result<SteadyStateResult> {
    let (sigma_min, sigma_next) = smallest_singular_values(lv)?;
    if sigma_min <= 0.0 || sigma_next / sigma_min.max(1e-300) < NULLSPACE_RATIO {
        Err(Error::DegenerateSteadyState {
            sigma_min,
            sigma_next,
        })
    } else {
        Err(Error::NonConvergence(format!(
            "bordered steady-state solve residual above {STEADY_RESIDUAL_TOL:.1e} \
             (smallest singular values {sigma_min:.3e}, {sigma_next:.3e})"
        )))
    }
}

/// Two smallest singular values of the Liouvillian superoperator.
pub fn smallest_singular_values(lv: &Liouvillian) -> Result<(f64, f64)> {
    let (_, svals, _) = lv.superop().svd(false, false)?;
    let mut v: Vec<f64> = svals.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((v[0], v[1]))
}

/// Compute ⟨a†a⟩, ⟨σ_z⟩, and g²(0) from a state.
pub fn observables(rho: &DensityMatrix) -> Result<Observables> {
    let sp = rho.space();
    let a = annihilation(sp);
    let adag = creation(sp);
    let n = number_op(sp);
    let sz = pauli(sp, PauliKind::Z);

    let photon_number = expectation(&n, rho)?.re;
    let inversion = expectation(&sz, rho)?.re;
    let g2_zero = if photon_number < 1e-14 {
        None
    } else {
        // a+ a+ a a
        let pair = adag.dot(&adag)?.dot(&a)?.dot(&a)?;
        let num = expectation(&pair, rho)?.re;
        Some(num / (photon_number * photon_number))
    };
    Ok(Observables {
        photon_number,
        inversion,
        g2_zero,
    })
}

/// ⟨a⟩ in a state; the steady state of this model always has ⟨a⟩ = 0.
pub fn field_amplitude(rho: &DensityMatrix) -> Result<C64> {
    let a = annihilation(rho.space());
    expectation(&a, rho)
}

/// Propagate the master equation from `rho0` and return the state at every
/// point of `t_grid` (which must start at 0). Uses adaptive Dormand–Prince
/// 5(4) on the vectorized density matrix; each output is re-symmetrized
/// ρ ← (ρ + ρ†)/2 and an error is raised if the Hermiticity drift before
/// symmetrization exceeds 1e-9.
pub fn propagate(
    lv: &Liouvillian,
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    if lv.space() != rho0.space() {
        return Err(Error::SpaceMismatch {
            left: lv.space().dim(),
            right: rho0.space().dim(),
        });
    }
    if t_grid.is_empty() || t_grid[0] != 0.0 {
        return Err(Error::InvalidParam("t_grid must start at 0".into()));
    }
    let dim = lv.space().dim();
    let sup = lv.superop();
    let v0 = vectorize(rho0.entries());
    let states = integrate_to_grid(
        |_, y| sup.dot(y),
        0.0,
        &v0,
        t_grid,
        DEFAULT_RTOL,
        DEFAULT_ATOL,
    )?;

    let mut out = Vec::with_capacity(states.len());
    for v in &states {
        let m = unvectorize(v, dim);
        let drift = (&m - &m.t().mapv(|z| z.conj())).norm_l2() / m.norm_l2().max(1e-300);
        if drift > 1e-9 {
            return Err(Error::NonConvergence(format!(
                "Hermiticity drift {drift:.3e} during propagation"
            )));
        }
        let herm = (&m + &m.t().mapv(|z| z.conj())).mapv(|z| z * C64::new(0.5, 0.0));
        out.push(clip_to_density(lv.space(), herm)?);
    }
    Ok(out)
}

/// Project a Hermitian matrix with tiny negative eigenvalues (integrator
/// drift, < 1e-9) back onto the density-matrix cone, renormalizing the
/// trace.
fn clip_to_density(space: SpaceSpec, herm: Array2<C64>) -> Result<DensityMatrix> {
    use ndarray_linalg::{Eigh, UPLO};
    let (vals, vecs) = herm.eigh(UPLO::Lower)?;
    let min_eig = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-9 {
        return Err(Error::NonConvergence(format!(
            "propagated state strongly non-positive: min eigenvalue {min_eig:.3e}"
        )));
    }
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let d = space.dim();
    let mut m = Array2::<C64>::zeros((d, d));
    // eigh on a row-major complex array yields eigenvectors of the
    // conjugate: the k-th eigenvector of `herm` is conj(column k)
    for (k, &v) in clipped.iter().enumerate() {
        let col = vecs.column(k);
        let w = C64::new(v / total, 0.0);
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] += w * col[i].conj() * col[j];
            }
        }
    }
    DensityMatrix::from_entries(space, m)
}

/// Hard cap of the Fock-cutoff ladder.
pub const N_MAX_CAP: usize = 63;

/// Repeat the steady-state solve with `n_max` increased by 4 until
/// ⟨a†a⟩, ⟨σ_z⟩, and g²(0) all change by less than `tol` between rungs.
pub fn converge_cutoff(
    params: &ModelParams,
    n_max_start: usize,
    tol: f64,
) -> Result<(SteadyStateResult, Observables)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParam(format!("tol must be > 0, got {tol}")));
    }
    let mut n_max = n_max_start.max(2);
    let mut prev: Option<(SteadyStateResult, Observables)> = None;
    let mut last_change = f64::INFINITY;
    loop {
        let space = make_space(n_max)?;
        let lv = liouvillian(params, space)?;
        let result = steady_state(&lv)?;
        let obs = observables(&result.rho)?;
        if let Some((_, prev_obs)) = &prev {
            let dg2 = match (obs.g2_zero, prev_obs.g2_zero) {
                (Some(a), Some(b)) => (a - b).abs(),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            };
            last_change = (obs.photon_number - prev_obs.photon_number)
                .abs()
                .max((obs.inversion - prev_obs.inversion).abs())
                .max(dg2);
            if last_change < tol {
                return Ok((result, obs));
            }
        }
        prev = Some((result, obs));
        if n_max + 4 > N_MAX_CAP {
            return Err(Error::CutoffExceeded {
                cap: N_MAX_CAP,
                last_change,
                tol,
            });
        }
        n_max += 4;
    }
}

/// Eigenvalues of the Liouvillian, for dissipativity / spectral-gap checks.
pub fn liouvillian_eigenvalues(lv: &Liouvillian) -> Result<Array1<C64>> {
    use ndarray_linalg::Eig;
    let (vals, _) = lv.superop().eig()?;
    Ok(vals)
}

/// Build a density matrix for a statistical mixture of basis projectors;
/// weights must sum to 1.
pub fn mixture(space: SpaceSpec, terms: &[(f64, usize)]) -> Result<DensityMatrix> {
    let d = space.dim();
    let mut m = Array2::<C64>::zeros((d, d));
    for &(w, i) in terms {
        m[[i, i]] += C64::new(w, 0.0);
    }
    DensityMatrix::from_entries(space, m)
}
