//! Truncated tensor-product Hilbert space for the atom-ion-phonon system.
//!
//! The composite basis is atom {|0⟩, |1⟩, |r⟩} ⊗ ion {|0⟩, |1⟩} ⊗ phonon
//! {|0⟩ … |N−1⟩}, flattened as `(atom·2 + ion)·N + phonon`. All operators are
//! dense; the full dimension is 6N with N tens at most, so sparsity would buy
//! nothing and would complicate exponentiation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Number of atomic levels (|0⟩, |1⟩, |r⟩).
pub const ATOM_DIM: usize = 3;
/// Number of ionic qubit levels.
pub const ION_DIM: usize = 2;
/// Atom-level index of the Rydberg state |r⟩.
pub const ATOM_R: usize = 2;

/// Hermiticity metadata bound: max|A − A†| below this flags the operator Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Unitarity metadata bound: max|A†A − I| below this flags the operator unitary.
pub const UNITARITY_TOL: f64 = 1e-10;
/// State vectors must carry an L2 norm within this bound of 1.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum HilbertError {
    #[error("phonon cutoff must be at least 2, got {0}")]
    InvalidCutoff(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "basis index out of range: atom {atom}, ion {ion}, phonon {phonon} \
         with cutoff {cutoff}"
    )]
    IndexOutOfRange {
        atom: usize,
        ion: usize,
        phonon: usize,
        cutoff: usize,
    },
    #[error("state vector norm {norm} deviates from 1 beyond tolerance")]
    NotNormalized { norm: f64 },
}

/// Full Hilbert-space dimension 6N for a phonon cutoff N.
pub fn space_dim(cutoff: usize) -> usize {
    ATOM_DIM * ION_DIM * cutoff
}

/// Label of one composite basis state |atom, ion, phonon⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub atom: usize,
    pub ion: usize,
    pub phonon: usize,
}

impl BasisIndex {
    pub fn new(atom: usize, ion: usize, phonon: usize, cutoff: usize) -> Result<Self, HilbertError> {
        if cutoff < 2 {
            return Err(HilbertError::InvalidCutoff(cutoff));
        }
        if atom >= ATOM_DIM || ion >= ION_DIM || phonon >= cutoff {
            return Err(HilbertError::IndexOutOfRange { atom, ion, phonon, cutoff });
        }
        Ok(Self { atom, ion, phonon })
    }

    /// Flat index under the atom ⊗ ion ⊗ phonon ordering.
    pub fn flatten(&self, cutoff: usize) -> usize {
        (self.atom * ION_DIM + self.ion) * cutoff + self.phonon
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(flat: usize, cutoff: usize) -> Result<Self, HilbertError> {
        if cutoff < 2 {
            return Err(HilbertError::InvalidCutoff(cutoff));
        }
        if flat >= space_dim(cutoff) {
            return Err(HilbertError::IndexOutOfRange {
                atom: flat / (ION_DIM * cutoff),
                ion: 0,
                phonon: 0,
                cutoff,
            });
        }
        let phonon = flat % cutoff;
        let rest = flat / cutoff;
        Ok(Self { atom: rest / ION_DIM, ion: rest % ION_DIM, phonon })
    }
}

/// Dense complex square matrix with validated Hermiticity/unitarity metadata.
///
/// The flags are measured on construction, never asserted: a non-Hermitian
/// matrix is representable, it just carries `is_hermitian = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<C64>,
    is_hermitian: bool,
    is_unitary: bool,
}

impl OperatorMatrix {
    /// Wrap a square matrix, measuring both metadata flags.
    pub fn new(entries: DMatrix<C64>) -> Self {
        assert_eq!(entries.nrows(), entries.ncols(), "operator must be square");
        let is_hermitian = hermiticity_defect(&entries) < HERMITICITY_TOL;
        let is_unitary = unitarity_defect(&entries) < UNITARITY_TOL;
        Self { entries, is_hermitian, is_unitary }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.is_hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.is_unitary
    }
}

/// max|A − A†| over all entries.
pub fn hermiticity_defect(a: &DMatrix<C64>) -> f64 {
    let adj = a.adjoint();
    (a - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// max|A†A − I| over all entries.
pub fn unitarity_defect(a: &DMatrix<C64>) -> f64 {
    let mut prod = a.adjoint() * a;
    for i in 0..prod.nrows() {
        prod[(i, i)] -= C64::new(1.0, 0.0);
    }
    prod.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Phonon annihilation operator on the truncated Fock space:
/// ⟨n−1|a|n⟩ = √n. Its adjoint annihilates the top state |N−1⟩.
pub fn annihilation(cutoff: usize) -> Result<OperatorMatrix, HilbertError> {
    if cutoff < 2 {
        return Err(HilbertError::InvalidCutoff(cutoff));
    }
    let mut a = DMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix::new(a))
}

/// Pauli-style operators on the ionic qubit, ordering (|0⟩, |1⟩).
///
/// σ₊ = |1⟩⟨0|, σ₋ = |0⟩⟨1|, σ_z = |1⟩⟨1| − |0⟩⟨0| (excited-state positive),
/// σ_x = σ₊ + σ₋.
pub struct QubitOps {
    pub sigma_plus: OperatorMatrix,
    pub sigma_minus: OperatorMatrix,
    pub sigma_z: OperatorMatrix,
    pub sigma_x: OperatorMatrix,
}

pub fn qubit_ops() -> QubitOps {
    let one = C64::new(1.0, 0.0);
    let mut sp = DMatrix::zeros(ION_DIM, ION_DIM);
    sp[(1, 0)] = one;
    let sm = sp.transpose();
    let mut sz = DMatrix::zeros(ION_DIM, ION_DIM);
    sz[(0, 0)] = -one;
    sz[(1, 1)] = one;
    let sx = &sp + &sm;
    QubitOps {
        sigma_plus: OperatorMatrix::new(sp),
        sigma_minus: OperatorMatrix::new(sm),
        sigma_z: OperatorMatrix::new(sz),
        sigma_x: OperatorMatrix::new(sx),
    }
}

/// Elementary operators on the atomic factor, ordering (|0⟩, |1⟩, |r⟩).
pub struct AtomOps {
    /// |r⟩⟨r|
    pub proj_r: OperatorMatrix,
    /// |r⟩⟨0|
    pub r_from_0: OperatorMatrix,
    /// |0⟩⟨r|
    pub zero_from_r: OperatorMatrix,
    /// |1⟩⟨1|
    pub proj_1: OperatorMatrix,
}

pub fn atom_ops() -> AtomOps {
    let one = C64::new(1.0, 0.0);
    let mut proj_r = DMatrix::zeros(ATOM_DIM, ATOM_DIM);
    proj_r[(ATOM_R, ATOM_R)] = one;
    let mut r_from_0 = DMatrix::zeros(ATOM_DIM, ATOM_DIM);
    r_from_0[(ATOM_R, 0)] = one;
    let zero_from_r = r_from_0.transpose();
    let mut proj_1 = DMatrix::zeros(ATOM_DIM, ATOM_DIM);
    proj_1[(1, 1)] = one;
    AtomOps {
        proj_r: OperatorMatrix::new(proj_r),
        r_from_0: OperatorMatrix::new(r_from_0),
        zero_from_r: OperatorMatrix::new(zero_from_r),
        proj_1: OperatorMatrix::new(proj_1),
    }
}

/// Subsystem selector for [`embed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Atom,
    Ion,
    Phonon,
}

impl Subsystem {
    pub fn dim(&self, cutoff: usize) -> usize {
        match self {
            Subsystem::Atom => ATOM_DIM,
            Subsystem::Ion => ION_DIM,
            Subsystem::Phonon => cutoff,
        }
    }
}

/// Kronecker-extend a single-subsystem operator with identities on the other
/// two factors, respecting the atom ⊗ ion ⊗ phonon flattening order.
pub fn embed(
    op: &OperatorMatrix,
    subsystem: Subsystem,
    cutoff: usize,
) -> Result<OperatorMatrix, HilbertError> {
    if cutoff < 2 {
        return Err(HilbertError::InvalidCutoff(cutoff));
    }
    let expected = subsystem.dim(cutoff);
    if op.dim() != expected {
        return Err(HilbertError::DimensionMismatch { expected, got: op.dim() });
    }
    let id_atom = DMatrix::<C64>::identity(ATOM_DIM, ATOM_DIM);
    let id_ion = DMatrix::<C64>::identity(ION_DIM, ION_DIM);
    let id_ph = DMatrix::<C64>::identity(cutoff, cutoff);
    let m = op.matrix();
    let full = match subsystem {
        Subsystem::Atom => m.kronecker(&id_ion).kronecker(&id_ph),
        Subsystem::Ion => id_atom.kronecker(m).kronecker(&id_ph),
        Subsystem::Phonon => id_atom.kronecker(&id_ion).kronecker(m),
    };
    Ok(OperatorMatrix::new(full))
}

/// Complex amplitude vector over the composite basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    cutoff: usize,
}

impl StateVector {
    /// Wrap an amplitude vector, validating length and normalization.
    pub fn from_amplitudes(amplitudes: DVector<C64>, cutoff: usize) -> Result<Self, HilbertError> {
        if cutoff < 2 {
            return Err(HilbertError::InvalidCutoff(cutoff));
        }
        let expected = space_dim(cutoff);
        if amplitudes.len() != expected {
            return Err(HilbertError::DimensionMismatch { expected, got: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(HilbertError::NotNormalized { norm });
        }
        Ok(Self { amplitudes, cutoff })
    }

    /// Rescale to unit norm and wrap; for assembling superpositions.
    pub fn normalized(mut amplitudes: DVector<C64>, cutoff: usize) -> Result<Self, HilbertError> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(HilbertError::NotNormalized { norm });
        }
        amplitudes /= C64::new(norm, 0.0);
        Self::from_amplitudes(amplitudes, cutoff)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: &BasisIndex) -> C64 {
        self.amplitudes[index.flatten(self.cutoff)]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Population |⟨index|ψ⟩|².
    pub fn population(&self, index: &BasisIndex) -> f64 {
        self.amplitude(index).norm_sqr()
    }

    /// Total population in one atom level, summed over ion and phonon.
    pub fn atom_level_population(&self, atom: usize) -> f64 {
        let n = self.cutoff;
        let mut p = 0.0;
        for ion in 0..ION_DIM {
            let base = (atom * ION_DIM + ion) * n;
            for k in 0..n {
                p += self.amplitudes[base + k].norm_sqr();
            }
        }
        p
    }

    /// Total population in the top Fock state |N−1⟩ (truncation-leakage monitor).
    pub fn top_fock_population(&self) -> f64 {
        let n = self.cutoff;
        let mut p = 0.0;
        for block in 0..(ATOM_DIM * ION_DIM) {
            p += self.amplitudes[block * n + n - 1].norm_sqr();
        }
        p
    }
}

/// Unit basis vector |atom, ion, phonon⟩.
pub fn basis_state(
    atom: usize,
    ion: usize,
    phonon: usize,
    cutoff: usize,
) -> Result<StateVector, HilbertError> {
    let index = BasisIndex::new(atom, ion, phonon, cutoff)?;
    let mut amps = DVector::zeros(space_dim(cutoff));
    amps[index.flatten(cutoff)] = C64::new(1.0, 0.0);
    StateVector::from_amplitudes(amps, cutoff)
}

/// ⟨ψ|φ⟩ with conjugation on the first argument.
pub fn overlap(psi: &StateVector, phi: &StateVector) -> Result<C64, HilbertError> {
    if psi.dim() != phi.dim() {
        return Err(HilbertError::DimensionMismatch { expected: psi.dim(), got: phi.dim() });
    }
    Ok(psi.amplitudes.dotc(&phi.amplitudes))
}
