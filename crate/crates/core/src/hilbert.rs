//! Truncated composite Hilbert space (Fock ⊗ qubit) and the elementary
//! operators everything else is built from.
//!
//! Basis ordering: composite index `i = 2n + s`, with `s = 0` for the atomic
//! ground state |g⟩ and `s = 1` for the excited state |e⟩, so the qubit is
//! contiguous within each Fock level.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, Norm, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Truncated Fock ⊗ qubit space. `n_max` is the highest retained photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceSpec {
    n_max: usize,
}

impl SpaceSpec {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Total dimension, 2·(n_max + 1).
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    /// Composite basis index of |n, s⟩ with `excited = (s == e)`.
    pub fn index(&self, n: usize, excited: bool) -> usize {
        debug_assert!(n <= self.n_max);
        2 * n + usize::from(excited)
    }

    /// Inverse of [`SpaceSpec::index`]: (photon number, excited?).
    pub fn unindex(&self, i: usize) -> (usize, bool) {
        (i / 2, i % 2 == 1)
    }
}

/// Build a space with Fock cutoff `n_max`. Requires `n_max >= 2` so that the
/// two-photon states |2,·⟩ exist.
pub fn make_space(n_max: usize) -> Result<SpaceSpec> {
    if n_max < 2 {
        return Err(Error::InvalidParam(format!(
            "n_max must be >= 2, got {n_max}"
        )));
    }
    Ok(SpaceSpec { n_max })
}

/// Dense complex operator on a [`SpaceSpec`].
#[derive(Debug, Clone)]
pub struct QuantumOperator {
    space: SpaceSpec,
    entries: Array2<C64>,
}

/// Which qubit operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliKind {
    Z,
    Plus,
    Minus,
    X,
}

impl QuantumOperator {
    pub fn from_entries(space: SpaceSpec, entries: Array2<C64>) -> Result<Self> {
        if entries.nrows() != space.dim() || entries.ncols() != space.dim() {
            return Err(Error::SpaceMismatch {
                left: space.dim(),
                right: entries.nrows(),
            });
        }
        Ok(Self { space, entries })
    }

    pub fn zeros(space: SpaceSpec) -> Self {
        let d = space.dim();
        Self {
            space,
            entries: Array2::zeros((d, d)),
        }
    }

    pub fn identity(space: SpaceSpec) -> Self {
        let d = space.dim();
        Self {
            space,
            entries: Array2::eye(d).mapv(|x: f64| C64::new(x, 0.0)),
        }
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            entries: self.entries.t().mapv(|z| z.conj()),
        }
    }

    pub fn dot(&self, other: &Self) -> Result<Self> {
        self.check_space(other.space)?;
        Ok(Self {
            space: self.space,
            entries: self.entries.dot(&other.entries),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_space(other.space)?;
        Ok(Self {
            space: self.space,
            entries: &self.entries + &other.entries,
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            space: self.space,
            entries: self.entries.mapv(|z| z * c),
        }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.dot(other)?;
        let ba = other.dot(self)?;
        Ok(QuantumOperator {
            space: self.space,
            entries: &ab.entries - &ba.entries,
        })
    }

    fn check_space(&self, other: SpaceSpec) -> Result<()> {
        if self.space != other {
            return Err(Error::SpaceMismatch {
                left: self.space.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

/// Annihilation operator a ⊗ id: a|n,s⟩ = √n |n−1,s⟩, a|0,s⟩ = 0.
pub fn annihilation(space: SpaceSpec) -> QuantumOperator {
    let d = space.dim();
    let mut m = Array2::zeros((d, d));
    for n in 1..=space.n_max() {
        let amp = C64::new((n as f64).sqrt(), 0.0);
        for excited in [false, true] {
            m[[space.index(n - 1, excited), space.index(n, excited)]] = amp;
        }
    }
    QuantumOperator { space, entries: m }
}

/// Creation operator a† ⊗ id.
pub fn creation(space: SpaceSpec) -> QuantumOperator {
    annihilation(space).adjoint()
}

/// Photon number operator a†a.
pub fn number_op(space: SpaceSpec) -> QuantumOperator {
    let d = space.dim();
    let mut m = Array2::zeros((d, d));
    for n in 0..=space.n_max() {
        for excited in [false, true] {
            let i = space.index(n, excited);
            m[[i, i]] = C64::new(n as f64, 0.0);
        }
    }
    QuantumOperator { space, entries: m }
}

/// Qubit operator id ⊗ σ. Sign convention: |e⟩ is the +1 eigenstate of σ_z.
pub fn pauli(space: SpaceSpec, which: PauliKind) -> QuantumOperator {
    let d = space.dim();
    let mut m = Array2::zeros((d, d));
    let one = C64::new(1.0, 0.0);
    for n in 0..=space.n_max() {
        let g = space.index(n, false);
        let e = space.index(n, true);
        match which {
            PauliKind::Z => {
                m[[e, e]] = one;
                m[[g, g]] = -one;
            }
            PauliKind::Plus => {
                m[[e, g]] = one;
            }
            PauliKind::Minus => {
                m[[g, e]] = one;
            }
            PauliKind::X => {
                m[[e, g]] = one;
                m[[g, e]] = one;
            }
        }
    }
    QuantumOperator { space, entries: m }
}

/// Pure state on the composite space.
#[derive(Debug, Clone)]
pub struct StateVector {
    space: SpaceSpec,
    amplitudes: Array1<C64>,
}

impl StateVector {
    pub fn from_amplitudes(space: SpaceSpec, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::SpaceMismatch {
                left: space.dim(),
                right: amplitudes.len(),
            });
        }
        Ok(Self { space, amplitudes })
    }

    /// Bare basis ket |n, s⟩.
    pub fn basis(space: SpaceSpec, n: usize, excited: bool) -> Result<Self> {
        if n > space.n_max() {
            return Err(Error::InvalidParam(format!(
                "photon number {n} exceeds cutoff {}",
                space.n_max()
            )));
        }
        let mut amplitudes = Array1::zeros(space.dim());
        amplitudes[space.index(n, excited)] = C64::new(1.0, 0.0);
        Ok(Self { space, amplitudes })
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm_l2()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::InvalidParam("cannot normalize zero vector".into()));
        }
        Ok(Self {
            space: self.space,
            amplitudes: self.amplitudes.mapv(|z| z / n),
        })
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Projector |ψ⟩⟨ψ| as a density matrix (state must be normalized).
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        let d = self.space.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix::from_entries(self.space, m)
    }
}

/// Apply an operator to a pure state.
pub fn apply(op: &QuantumOperator, state: &StateVector) -> Result<StateVector> {
    if op.space != state.space {
        return Err(Error::SpaceMismatch {
            left: op.space.dim(),
            right: state.space.dim(),
        });
    }
    Ok(StateVector {
        space: state.space,
        amplitudes: op.entries.dot(&state.amplitudes),
    })
}

/// Tolerances for the density-matrix invariants.
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive-semidefinite state of the composite system.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    space: SpaceSpec,
    entries: Array2<C64>,
}

impl DensityMatrix {
    /// Validate and wrap. Checks Hermiticity (relative Frobenius, 1e-12),
    /// unit trace (1e-10), and minimum eigenvalue ≥ −1e-10.
    pub fn from_entries(space: SpaceSpec, entries: Array2<C64>) -> Result<Self> {
        if entries.nrows() != space.dim() || entries.ncols() != space.dim() {
            return Err(Error::SpaceMismatch {
                left: space.dim(),
                right: entries.nrows(),
            });
        }
        let herm_dev = {
            let adj = entries.t().mapv(|z| z.conj());
            let diff = &entries - &adj;
            let scale = entries.norm_l2().max(1e-300);
            diff.norm_l2() / scale
        };
        if herm_dev > HERMITICITY_TOL {
            return Err(Error::InvalidParam(format!(
                "density matrix not Hermitian: relative deviation {herm_dev:.3e}"
            )));
        }
        let trace: C64 = entries.diag().sum();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidParam(format!(
                "density matrix trace {trace} != 1"
            )));
        }
        let min_eig = {
            let herm = entries.mapv(|z| z) * C64::new(0.5, 0.0)
                + entries.t().mapv(|z| z.conj()) * C64::new(0.5, 0.0);
            let (vals, _) = herm.eigh(UPLO::Lower)?;
            vals.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidParam(format!(
                "density matrix not positive semidefinite: min eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { space, entries })
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        let herm = self.entries.mapv(|z| z) * C64::new(0.5, 0.0)
            + self.entries.t().mapv(|z| z.conj()) * C64::new(0.5, 0.0);
        let (vals, _) = herm.eigh(UPLO::Lower)?;
        Ok(vals)
    }
}

/// Tr(op·ρ).
pub fn expectation(op: &QuantumOperator, rho: &DensityMatrix) -> Result<C64> {
    if op.space != rho.space {
        return Err(Error::SpaceMismatch {
            left: op.space.dim(),
            right: rho.space.dim(),
        });
    }
    let prod = op.entries.dot(&rho.entries);
    Ok(prod.diag().sum())
}
