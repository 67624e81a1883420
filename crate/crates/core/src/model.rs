//! Generalized Rabi model with a nonlinear dispersive atom–field term:
//!
//! H = (ω₀/2)σ_z + ω a†a + g σ_x (a + a†) + (U/2) σ_z a†a
//!
//! with cavity decay at field rate κ,
//!
//! dρ/dt = −i[H, ρ] + κ (2 a ρ a† − a†a ρ − ρ a†a).
//!
//! Superoperators act on column-stacked density matrices: vec(ρ)[i + dim·j] =
//! ρ[i, j], so vec(AρB) = (Bᵀ ⊗ A) vec(ρ). All consumers of the Liouvillian
//! use this convention.

use ndarray::linalg::kron;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, creation, number_op, pauli, PauliKind, QuantumOperator, SpaceSpec,
};

/// The five physical rates defining the system. Unit-agnostic; only ratios
/// matter for the physics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Qubit splitting ω₀.
    pub omega0: f64,
    /// Oscillator frequency ω.
    pub omega: f64,
    /// Dipole coupling g.
    pub g: f64,
    /// Nonlinear coupling U (may be negative).
    pub u: f64,
    /// Cavity field decay rate κ.
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(omega0: f64, omega: f64, g: f64, u: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            omega0,
            omega,
            g,
            u,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParam(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParam(format!("omega must be > 0, got {}", self.omega)));
        }
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "omega0 must be > 0, got {}",
                self.omega0
            )));
        }
        if !(self.g >= 0.0) {
            return Err(Error::InvalidParam(format!("g must be >= 0, got {}", self.g)));
        }
        for (name, v) in [
            ("omega0", self.omega0),
            ("omega", self.omega),
            ("g", self.g),
            ("u", self.u),
            ("kappa", self.kappa),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} is not finite")));
            }
        }
        Ok(())
    }
}

/// Full (non-RWA) Hamiltonian on the truncated space.
pub fn hamiltonian(params: &ModelParams, space: SpaceSpec) -> Result<QuantumOperator> {
    params.validate()?;
    let sz = pauli(space, PauliKind::Z);
    let sx = pauli(space, PauliKind::X);
    let a = annihilation(space);
    let adag = creation(space);
    let n = number_op(space);

    let x = a.add(&adag)?;
    let h = sz
        .scale(C64::new(0.5 * params.omega0, 0.0))
        .add(&n.scale(C64::new(params.omega, 0.0)))?
        .add(&sx.dot(&x)?.scale(C64::new(params.g, 0.0)))?
        .add(&sz.dot(&n)?.scale(C64::new(0.5 * params.u, 0.0)))?;
    Ok(h)
}

/// Non-Hermitian effective Hamiltonian H_eff = H − iκ a†a for the
/// between-jump evolution.
pub fn effective_hamiltonian(params: &ModelParams, space: SpaceSpec) -> Result<QuantumOperator> {
    let h = hamiltonian(params, space)?;
    let n = number_op(space);
    h.add(&n.scale(C64::new(0.0, -params.kappa)))
}

/// Lindblad superoperator on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    space: SpaceSpec,
    superop: Array2<C64>,
}

impl Liouvillian {
    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn superop(&self) -> &Array2<C64> {
        &self.superop
    }

    /// Apply to a density-matrix-shaped operator via the superoperator matrix.
    pub fn apply_matrix(&self, rho: &Array2<C64>) -> Array2<C64> {
        let v = vectorize(rho);
        let out = self.superop.dot(&v);
        unvectorize(&out, self.space.dim())
    }
}

/// Column-stack a dim×dim matrix into a dim² vector.
pub fn vectorize(m: &Array2<C64>) -> Array1<C64> {
    let d = m.nrows();
    let mut v = Array1::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            v[i + d * j] = m[[i, j]];
        }
    }
    v
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &Array1<C64>, dim: usize) -> Array2<C64> {
    let mut m = Array2::zeros((dim, dim));
    for j in 0..dim {
        for i in 0..dim {
            m[[i, j]] = v[i + dim * j];
        }
    }
    m
}

/// Build the Lindblad superoperator for the model.
pub fn liouvillian(params: &ModelParams, space: SpaceSpec) -> Result<Liouvillian> {
    params.validate()?;
    let h = hamiltonian(params, space)?;
    let a = annihilation(space);
    let n = number_op(space);
    let d = space.dim();
    let id: Array2<C64> = Array2::eye(d).mapv(|x: f64| C64::new(x, 0.0));

    let h_m = h.entries();
    let a_m = a.entries();
    let n_m = n.entries();

    // -i[H, rho]: -i (I (x) H - H^T (x) I), column-stacking convention.
    let mut sup = (kron(&id, h_m) - kron(&h_m.t().to_owned(), &id)).mapv(|z| z * C64::new(0.0, -1.0));
    // 2 kappa a rho a+: ((a+)^T (x) a) = (a (x) a) since a+ is real.
    let adag_t = a_m.to_owned(); // (a†)ᵀ = a for the real ladder matrix
    sup = sup + kron(&adag_t, a_m).mapv(|z| z * C64::new(2.0 * params.kappa, 0.0));
    // -kappa (a+a rho + rho a+a); a+a is diagonal so its transpose is itself.
    sup = sup - (kron(&id, n_m) + kron(&n_m.to_owned(), &id)).mapv(|z| z * C64::new(params.kappa, 0.0));

    Ok(Liouvillian {
        space,
        superop: sup,
    })
}

/// Direct elementwise evaluation of the master-equation right-hand side,
/// used as the cross-check against the superoperator matrix.
pub fn master_rhs_direct(
    params: &ModelParams,
    space: SpaceSpec,
    rho: &Array2<C64>,
) -> Result<Array2<C64>> {
    let h = hamiltonian(params, space)?;
    let a = annihilation(space);
    let adag = creation(space);
    let h_m = h.entries();
    let a_m = a.entries();
    let adag_m = adag.entries();
    let n_m = adag_m.dot(a_m);

    let comm = h_m.dot(rho) - rho.dot(h_m);
    let jump = a_m.dot(rho).dot(adag_m);
    let anti = n_m.dot(rho) + rho.dot(&n_m);
    Ok(comm.mapv(|z| z * C64::new(0.0, -1.0))
        + jump.mapv(|z| z * C64::new(2.0 * params.kappa, 0.0))
        - anti.mapv(|z| z * C64::new(params.kappa, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{make_space, StateVector};
    use approx::assert_abs_diff_eq;
    use ndarray_linalg::{Eig, Norm};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params(omega0: f64, g: f64, u: f64, kappa: f64) -> ModelParams {
        ModelParams::new(omega0, 1.0, g, u, kappa).unwrap()
    }

    fn random_density(space: SpaceSpec, rng: &mut StdRng) -> Array2<C64> {
        let d = space.dim();
        let mut m = Array2::<C64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        // rho = M M† / Tr, Hermitian PSD with unit trace
        let mm = m.dot(&m.t().mapv(|z| z.conj()));
        let tr: C64 = mm.diag().sum();
        mm.mapv(|z| z / tr)
    }

    #[test]
    fn bare_diagonal_when_g_zero() {
        let sp = make_space(4).unwrap();
        let p = params(10.0, 0.0, -3.0, 0.2);
        let h = hamiltonian(&p, sp).unwrap();
        for n in 0..=sp.n_max() {
            for excited in [false, true] {
                let sign = if excited { 1.0 } else { -1.0 };
                let expect = sign * 0.5 * p.omega0 + p.omega * n as f64 + sign * 0.5 * p.u * n as f64;
                let i = sp.index(n, excited);
                assert_abs_diff_eq!(h.entries()[[i, i]].re, expect, epsilon = 1e-14);
            }
        }
        // all off-diagonals vanish
        let mut offdiag = 0.0f64;
        for i in 0..sp.dim() {
            for j in 0..sp.dim() {
                if i != j {
                    offdiag += h.entries()[[i, j]].norm();
                }
            }
        }
        assert_abs_diff_eq!(offdiag, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_one_photon_degeneracies_at_special_u() {
        let sp = make_space(3).unwrap();
        let omega0 = 10.0;
        // U = -2*omega0 + 2*omega: |0,e> and |1,g> both at +omega0/2
        let p = params(omega0, 0.0, -2.0 * omega0 + 2.0, 0.2);
        let h = hamiltonian(&p, sp).unwrap();
        let e0 = h.entries()[[sp.index(0, true), sp.index(0, true)]].re;
        let g1 = h.entries()[[sp.index(1, false), sp.index(1, false)]].re;
        assert_abs_diff_eq!(e0, 0.5 * omega0, epsilon = 1e-12);
        assert_abs_diff_eq!(g1, 0.5 * omega0, epsilon = 1e-12);

        // U = -2*omega0 - 2*omega: |0,g> and |1,e> both at -omega0/2
        let p = params(omega0, 0.0, -2.0 * omega0 - 2.0, 0.2);
        let h = hamiltonian(&p, sp).unwrap();
        let g0 = h.entries()[[sp.index(0, false), sp.index(0, false)]].re;
        let e1 = h.entries()[[sp.index(1, true), sp.index(1, true)]].re;
        assert_abs_diff_eq!(g0, -0.5 * omega0, epsilon = 1e-12);
        assert_abs_diff_eq!(e1, -0.5 * omega0, epsilon = 1e-12);
    }

    #[test]
    fn whole_ladder_degeneracies_at_u_eq_pm_2omega() {
        let sp = make_space(5).unwrap();
        let omega0 = 3.0;
        // U = 2*omega: all |n,g> at -omega0/2
        let p = params(omega0, 0.0, 2.0, 0.2);
        let h = hamiltonian(&p, sp).unwrap();
        for n in 0..=sp.n_max() {
            let i = sp.index(n, false);
            assert_abs_diff_eq!(h.entries()[[i, i]].re, -0.5 * omega0, epsilon = 1e-12);
        }
        // U = -2*omega: all |n,e> at +omega0/2
        let p = params(omega0, 0.0, -2.0, 0.2);
        let h = hamiltonian(&p, sp).unwrap();
        for n in 0..=sp.n_max() {
            let i = sp.index(n, true);
            assert_abs_diff_eq!(h.entries()[[i, i]].re, 0.5 * omega0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let sp = make_space(6).unwrap();
        let p = params(10.0, 0.7, -20.0, 0.2);
        let h = hamiltonian(&p, sp).unwrap();
        let diff = (h.entries() - &h.adjoint().entries().to_owned()).norm_l2();
        assert_abs_diff_eq!(diff, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn effective_hamiltonian_anti_hermitian_part() {
        let sp = make_space(4).unwrap();
        let p = params(10.0, 0.1, -20.0, 0.3);
        let heff = effective_hamiltonian(&p, sp).unwrap();
        assert_abs_diff_eq!(
            heff.entries()[[sp.index(1, false), sp.index(1, false)]].im,
            -p.kappa,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            heff.entries()[[sp.index(2, true), sp.index(2, true)]].im,
            -2.0 * p.kappa,
            epsilon = 1e-14
        );
        // kappa -> 0+ limit: anti-Hermitian part goes to zero with kappa
        let h = hamiltonian(&p, sp).unwrap();
        let anti = heff.entries() - h.entries();
        let n = crate::hilbert::number_op(sp);
        let expect = n.entries().mapv(|z| z * C64::new(0.0, -p.kappa));
        assert_abs_diff_eq!((&anti - &expect).norm_l2(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn vacuum_stationary_under_decay() {
        let sp = make_space(3).unwrap();
        let p = params(10.0, 0.0, -20.0, 0.2);
        let lv = liouvillian(&p, sp).unwrap();
        let rho = StateVector::basis(sp, 0, false)
            .unwrap()
            .density_matrix()
            .unwrap();
        let out = lv.apply_matrix(rho.entries());
        assert_abs_diff_eq!(out.norm_l2(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn single_photon_decay_channel() {
        let sp = make_space(3).unwrap();
        let p = params(10.0, 0.0, 0.0, 0.2);
        let lv = liouvillian(&p, sp).unwrap();
        let rho = StateVector::basis(sp, 1, false)
            .unwrap()
            .density_matrix()
            .unwrap();
        let out = lv.apply_matrix(rho.entries());
        // 2 kappa (|0,g><0,g| - |1,g><1,g|)
        let mut expect = Array2::<C64>::zeros((sp.dim(), sp.dim()));
        expect[[sp.index(0, false), sp.index(0, false)]] = C64::new(2.0 * p.kappa, 0.0);
        expect[[sp.index(1, false), sp.index(1, false)]] = C64::new(-2.0 * p.kappa, 0.0);
        assert_abs_diff_eq!((&out - &expect).norm_l2(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn superop_matches_direct_form_on_random_states() {
        let sp = make_space(4).unwrap();
        let p = params(10.0, 0.1, -20.0, 0.2);
        let lv = liouvillian(&p, sp).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let rho = random_density(sp, &mut rng);
            let via_sup = lv.apply_matrix(&rho);
            let direct = master_rhs_direct(&p, sp, &rho).unwrap();
            let rel = (&via_sup - &direct).norm_l2() / direct.norm_l2().max(1e-300);
            assert!(rel < 1e-12, "relative deviation {rel:.3e}");
        }
    }

    #[test]
    fn trace_preservation_and_hermiticity_preservation() {
        let sp = make_space(4).unwrap();
        let p = params(5.0, 0.3, -8.0, 0.4);
        let lv = liouvillian(&p, sp).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let rho = random_density(sp, &mut rng);
            let out = lv.apply_matrix(&rho);
            let tr: C64 = out.diag().sum();
            assert!(tr.norm() < 1e-12, "trace of L[rho] = {tr}");
            let herm_dev = (&out - &out.t().mapv(|z| z.conj())).norm_l2();
            assert!(herm_dev < 1e-12, "Hermiticity deviation {herm_dev:.3e}");
        }
    }

    #[test]
    fn liouvillian_is_dissipative() {
        let sp = make_space(3).unwrap();
        let p = params(10.0, 0.1, -20.0, 0.2);
        let lv = liouvillian(&p, sp).unwrap();
        let (vals, _) = lv.superop().eig().unwrap();
        let max_re = vals.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(max_re <= 1e-10, "max Re eigenvalue {max_re:.3e}");
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ModelParams::new(10.0, 1.0, 0.1, -20.0, 0.0).is_err());
        assert!(ModelParams::new(10.0, 0.0, 0.1, -20.0, 0.2).is_err());
        assert!(ModelParams::new(-1.0, 1.0, 0.1, -20.0, 0.2).is_err());
        assert!(ModelParams::new(10.0, 1.0, -0.1, -20.0, 0.2).is_err());
        assert!(ModelParams::new(10.0, 1.0, f64::NAN, -20.0, 0.2).is_err());
    }
}
