//! Multi-qutrit state and operator algebra.
//!
//! Basis convention: the register of N three-level atoms has dimension 3^N,
//! with basis state |q₁q₂…q_N⟩ at index Σ_k q_k·3^(N−k) (atom 1 most
//! significant, matching ket notation like |120⟩).

use crate::linalg::{kron, max_abs, CMatrix, CVector, ONE, ZERO};
use crate::{Error, Result};
use num_complex::Complex64;

/// A register of `n_atoms` three-level atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QutritRegister {
    pub n_atoms: usize,
}

impl QutritRegister {
    pub fn new(n_atoms: usize) -> Self {
        Self { n_atoms }
    }

    pub fn dim(&self) -> usize {
        3usize.pow(self.n_atoms as u32)
    }

    fn check_atom(&self, atom: usize) -> Result<()> {
        if atom >= self.n_atoms {
            return Err(Error::InvalidArgument(format!(
                "atom index {atom} out of range (register has {} atoms)",
                self.n_atoms
            )));
        }
        Ok(())
    }

    /// Index of the basis state with the given per-atom levels.
    pub fn encode(&self, levels: &[u8]) -> usize {
        debug_assert_eq!(levels.len(), self.n_atoms);
        levels.iter().fold(0, |acc, &q| acc * 3 + q as usize)
    }

    /// Per-atom levels of the basis state at `index`.
    pub fn decode(&self, mut index: usize) -> Vec<u8> {
        let mut levels = vec![0u8; self.n_atoms];
        for k in (0..self.n_atoms).rev() {
            levels[k] = (index % 3) as u8;
            index /= 3;
        }
        levels
    }

    /// Level of `atom` in the basis state at `index`.
    pub fn level_of(&self, index: usize, atom: usize) -> u8 {
        let shift = 3usize.pow((self.n_atoms - 1 - atom) as u32);
        ((index / shift) % 3) as u8
    }

    /// Basis vector |q₁…q_N⟩.
    pub fn basis_state(&self, levels: &[u8]) -> CVector {
        let mut v = CVector::zeros(self.dim());
        v[self.encode(levels)] = ONE;
        v
    }

    /// Indices of basis states with every atom in {0, 1}.
    pub fn computational_indices(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.decode(i).iter().all(|&q| q < 2))
            .collect()
    }

    /// Embed a single-atom 3×3 operator on `atom`, identity elsewhere.
    pub fn embed(&self, atom: usize, local: &CMatrix) -> Result<CMatrix> {
        self.check_atom(atom)?;
        debug_assert_eq!(local.shape(), (3, 3));
        let mut out = CMatrix::identity(1, 1);
        for k in 0..self.n_atoms {
            let factor = if k == atom {
                local.clone()
            } else {
                CMatrix::identity(3, 3)
            };
            out = kron(&out, &factor);
        }
        Ok(out)
    }
}

/// Dense operator on the register space, with validity flags for properties
/// that have been checked at construction.
#[derive(Debug, Clone)]
pub struct Operator {
    pub matrix: CMatrix,
    pub hermitian: bool,
    pub unitary: bool,
}

impl Operator {
    pub fn new(matrix: CMatrix) -> Self {
        Self { matrix, hermitian: false, unitary: false }
    }

    /// Wrap a matrix asserting Hermiticity (‖A − A†‖_max < 1e-12).
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        let dev = max_abs(&(&matrix - matrix.adjoint()));
        if dev >= 1e-12 * (1.0 + max_abs(&matrix)) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not Hermitian (deviation {dev:.3e})"
            )));
        }
        Ok(Self { matrix, hermitian: true, unitary: false })
    }

    /// Wrap a matrix asserting unitarity (‖U†U − 1‖_max < 1e-10).
    pub fn unitary(matrix: CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        let dev = max_abs(&(matrix.adjoint() * &matrix - CMatrix::identity(n, n)));
        if dev >= 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not unitary (deviation {dev:.3e})"
            )));
        }
        Ok(Self { matrix, hermitian: false, unitary: true })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// A register state: pure vector or density matrix.
#[derive(Debug, Clone)]
pub enum State {
    Pure(CVector),
    Density(CMatrix),
}

impl State {
    pub fn pure(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "pure state norm {norm} deviates from 1"
            )));
        }
        Ok(State::Pure(v))
    }

    pub fn density(rho: CMatrix) -> Result<Self> {
        let tr: Complex64 = rho.diagonal().iter().sum();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "density matrix trace {tr} deviates from 1"
            )));
        }
        let herm_dev = max_abs(&(&rho - rho.adjoint()));
        if herm_dev > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "density matrix not Hermitian (deviation {herm_dev:.3e})"
            )));
        }
        let (vals, _) = crate::linalg::eigh(&rho);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-8 {
            return Err(Error::InvalidArgument(format!(
                "density matrix has eigenvalue {min:.3e} < -1e-8"
            )));
        }
        Ok(State::Density(rho))
    }

    pub fn dim(&self) -> usize {
        match self {
            State::Pure(v) => v.len(),
            State::Density(m) => m.nrows(),
        }
    }

    /// Density-matrix form (|ψ⟩⟨ψ| for pure states).
    pub fn to_density(&self) -> CMatrix {
        match self {
            State::Pure(v) => v * v.adjoint(),
            State::Density(m) => m.clone(),
        }
    }
}

/// σ_ij⁻ = |i⟩⟨j| (i < j) on a single qutrit.
fn ketbra3(i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(i, j)] = ONE;
    m
}

/// Lowering operator b_k = σ₁₀⁻ + √2·σ₂₁⁻ embedded on `atom`.
pub fn lowering_operator(register: &QutritRegister, atom: usize) -> Result<Operator> {
    let local = ketbra3(0, 1) + ketbra3(1, 2) * Complex64::new(2.0f64.sqrt(), 0.0);
    Ok(Operator::new(register.embed(atom, &local)?))
}

/// Dimensionless dephasing operator |1⟩⟨1| + 2|2⟩⟨2| embedded on `atom`.
pub fn dephasing_operator(register: &QutritRegister, atom: usize) -> Result<Operator> {
    let local = ketbra3(1, 1) + ketbra3(2, 2) * Complex64::new(2.0, 0.0);
    Ok(Operator::hermitian(register.embed(atom, &local)?)?)
}

/// Orthogonal projector onto the computational (qubit) subspace {0,1}^N.
pub fn projector_computational(register: &QutritRegister) -> Operator {
    let mut m = CMatrix::zeros(register.dim(), register.dim());
    for i in register.computational_indices() {
        m[(i, i)] = ONE;
    }
    Operator::hermitian(m).expect("projector is Hermitian")
}

/// Reduced density matrix over the atoms in `keep` (sorted, deduplicated
/// internally); trace is preserved.
pub fn partial_trace(register: &QutritRegister, state: &State, keep: &[usize]) -> Result<State> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep set must be nonempty".into()));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    for &k in &keep {
        register.check_atom(k)?;
    }
    let rho = state.to_density();
    let n = register.n_atoms;
    let traced: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
    let kd = 3usize.pow(keep.len() as u32);
    let td = 3usize.pow(traced.len() as u32);

    // index of full basis state from (kept levels, traced levels)
    let compose = |ki: usize, ti: usize| -> usize {
        let mut levels = vec![0u8; n];
        let mut k_rem = ki;
        for (pos, &a) in keep.iter().enumerate().rev() {
            let _ = pos;
            levels[a] = (k_rem % 3) as u8;
            k_rem /= 3;
        }
        let mut t_rem = ti;
        for &a in traced.iter().rev() {
            levels[a] = (t_rem % 3) as u8;
            t_rem /= 3;
        }
        register.encode(&levels)
    };

    let mut out = CMatrix::zeros(kd, kd);
    for i in 0..kd {
        for j in 0..kd {
            let mut sum = ZERO;
            for t in 0..td {
                sum += rho[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = sum;
        }
    }
    Ok(State::Density(out))
}
