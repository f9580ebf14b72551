//! Gate definitions: ideal target unitaries, the effective resonant
//! Hamiltonians that realize them, gate durations, and the full
//! rotating-frame model with anharmonicity and detunings.

use crate::algebra::{Operator, QutritRegister};
use crate::couplings::CouplingLayout;
use crate::linalg::{CMatrix, I, ONE, ZERO};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Multi-qubit gate kinds natively available in the giant-atom setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    /// Controlled-CZ-SWAP: three atoms, middle participant is the control.
    Cczs,
    /// Dual-iSWAP: three atoms, middle participant is the hub.
    Div,
    /// Two-atom excitation exchange, |10⟩ → −i|01⟩.
    Iswap,
    /// Two-atom CZ via the |11⟩ ↔ |02⟩ transition (second atom is the hub).
    Cz,
}

/// A timed multi-qubit gate segment.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub kind: GateKind,
    /// Ordered participants; for three-atom gates the middle entry is the
    /// control (CCZS) or hub (DIV).
    pub atoms: Vec<usize>,
    /// Transition rate g (angular units).
    pub g: f64,
}

impl GateSpec {
    pub fn new(kind: GateKind, atoms: Vec<usize>, g: f64) -> Result<Self> {
        let expected = match kind {
            GateKind::Cczs | GateKind::Div => 3,
            GateKind::Iswap | GateKind::Cz => 2,
        };
        if atoms.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} takes {expected} atoms, got {}",
                atoms.len()
            )));
        }
        let mut sorted = atoms.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != atoms.len() {
            return Err(Error::InvalidArgument("participant atoms must be distinct".into()));
        }
        if g <= 0.0 {
            return Err(Error::InvalidArgument(format!("g must be > 0, got {g}")));
        }
        Ok(Self { kind, atoms, g })
    }

    /// Gate duration: π/(√2 g) for CCZS, π/(2√2 g) for DIV, π/(2g) for
    /// iSWAP, π/g for CZ.
    pub fn duration(&self) -> f64 {
        match self.kind {
            GateKind::Cczs => PI / (SQRT2 * self.g),
            GateKind::Div => PI / (2.0 * SQRT2 * self.g),
            GateKind::Iswap => PI / (2.0 * self.g),
            GateKind::Cz => PI / self.g,
        }
    }

    fn check_register(&self, register: &QutritRegister) -> Result<()> {
        for &a in &self.atoms {
            if a >= register.n_atoms {
                return Err(Error::InvalidArgument(format!(
                    "atom index {a} out of range for {}-atom register",
                    register.n_atoms
                )));
            }
        }
        Ok(())
    }
}

/// Transition frequency and anharmonicity of one atom (full model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomParams {
    /// Qubit frequency ω_k = ω₀₁,k.
    pub omega: f64,
    /// Anharmonicity χ_k = ω₁₂,k − ω₀₁,k (negative for transmons).
    pub chi: f64,
}

/// Ideal unitary of `spec` on the full qutrit register: acts as the target
/// gate on the computational subspace and as identity on leakage levels.
pub fn ideal_unitary(spec: &GateSpec, register: &QutritRegister) -> Result<Operator> {
    spec.check_register(register)?;
    let dim = register.dim();
    let mut u = CMatrix::zeros(dim, dim);
    let neg = -ONE;
    let mi = -I;

    for col in 0..dim {
        let levels = register.decode(col);
        let p: Vec<u8> = spec.atoms.iter().map(|&a| levels[a]).collect();
        if p.iter().any(|&q| q > 1) {
            u[(col, col)] = ONE;
            continue;
        }
        // write the image of |levels⟩ into column `col`
        let mut set = |targets: &[(Vec<u8>, Complex64)]| {
            for (tp, amp) in targets {
                let mut out_levels = levels.clone();
                for (&a, &q) in spec.atoms.iter().zip(tp.iter()) {
                    out_levels[a] = q;
                }
                u[(register.encode(&out_levels), col)] += *amp;
            }
        };
        match spec.kind {
            GateKind::Cczs => {
                // control is the middle participant; CZS on the outer pair
                let (qa, qb, qc) = (p[0], p[1], p[2]);
                if qb == 0 {
                    set(&[(p.clone(), ONE)]);
                } else {
                    match (qa, qc) {
                        (0, 0) => set(&[(vec![0, 1, 0], ONE)]),
                        (1, 0) => set(&[(vec![0, 1, 1], neg)]),
                        (0, 1) => set(&[(vec![1, 1, 0], neg)]),
                        (1, 1) => set(&[(vec![1, 1, 1], neg)]),
                        _ => unreachable!(),
                    }
                }
            }
            GateKind::Div => {
                let half = Complex64::new(0.5, 0.0);
                let mis = mi / Complex64::new(SQRT2, 0.0);
                // single-excitation chain |100⟩↔|010⟩↔|001⟩ and its
                // two-excitation mirror |011⟩↔|101⟩↔|110⟩ share the 3×3 block
                let block = |b: [Vec<u8>; 3], idx: usize, set: &mut dyn FnMut(&[(Vec<u8>, Complex64)])| {
                    let u3 = [
                        [half, mis, -half],
                        [mis, ZERO, mis],
                        [-half, mis, half],
                    ];
                    let targets: Vec<(Vec<u8>, Complex64)> = (0..3)
                        .filter(|&r| u3[r][idx] != ZERO)
                        .map(|r| (b[r].clone(), u3[r][idx]))
                        .collect();
                    set(&targets);
                };
                let exc = (p[0] + p[1] + p[2]) as usize;
                match exc {
                    0 | 3 => set(&[(p.clone(), ONE)]),
                    1 => {
                        let basis = [vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
                        let idx = basis.iter().position(|b| *b == p).unwrap();
                        block(basis, idx, &mut set);
                    }
                    2 => {
                        let basis = [vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]];
                        let idx = basis.iter().position(|b| *b == p).unwrap();
                        block(basis, idx, &mut set);
                    }
                    _ => unreachable!(),
                }
            }
            GateKind::Iswap => match (p[0], p[1]) {
                (1, 0) => set(&[(vec![0, 1], mi)]),
                (0, 1) => set(&[(vec![1, 0], mi)]),
                _ => set(&[(p.clone(), ONE)]),
            },
            GateKind::Cz => {
                let amp = if p == [1, 1] { neg } else { ONE };
                set(&[(p.clone(), amp)]);
            }
        }
    }
    Operator::unitary(u)
}

/// Effective resonant Hamiltonian: matrix element g on exactly the activated
/// transitions of the gate, zero elsewhere.
pub fn effective_hamiltonian(spec: &GateSpec, register: &QutritRegister) -> Result<Operator> {
    spec.check_register(register)?;
    let transitions: Vec<([u8; 3], [u8; 3])> = match spec.kind {
        GateKind::Cczs => vec![
            ([1, 2, 0], [1, 1, 1]),
            ([0, 2, 1], [1, 1, 1]),
            ([1, 1, 0], [0, 2, 0]),
            ([0, 1, 1], [0, 2, 0]),
        ],
        GateKind::Div => vec![
            ([1, 0, 0], [0, 1, 0]),
            ([0, 0, 1], [0, 1, 0]),
            ([0, 1, 1], [1, 0, 1]),
            ([1, 1, 0], [1, 0, 1]),
        ],
        // two-atom gates use only the first two pattern slots
        GateKind::Iswap => vec![([1, 0, 0], [0, 1, 0])],
        GateKind::Cz => vec![([1, 1, 0], [0, 2, 0])],
    };
    let n_participants = spec.atoms.len();
    let dim = register.dim();
    let mut a = CMatrix::zeros(dim, dim);
    for idx in 0..dim {
        let levels = register.decode(idx);
        for (to, from) in &transitions {
            if spec
                .atoms
                .iter()
                .zip(from.iter())
                .take(n_participants)
                .all(|(&at, &q)| levels[at] == q)
            {
                let mut out = levels.clone();
                for (&at, &q) in spec.atoms.iter().zip(to.iter()).take(n_participants) {
                    out[at] = q;
                }
                a[(register.encode(&out), idx)] += ONE;
            }
        }
    }
    let g = Complex64::new(spec.g, 0.0);
    let h = a.adjoint() * g + a * g;
    Operator::hermitian(h)
}

/// Full rotating-frame Hamiltonian for the register:
/// H = Σ_k [δ_k n̂_k + (χ_k/2) n̂_k(n̂_k − 1)] + Σ_{j<k} g_jk (b_j†b_k + h.c.)
/// with δ_k = ω_k − ω_frame and g_jk from the layout, evaluated at the
/// frequency where a 0↔1 or 1↔2 transition of atom j is resonant with one of
/// atom k (falling back to the mean qubit frequency for detuned pairs).
pub fn full_model_hamiltonian(
    params: &[AtomParams],
    layout: &CouplingLayout,
    frame_frequency: f64,
) -> Result<Operator> {
    let n = params.len();
    if n != layout.n_atoms() {
        return Err(Error::InvalidArgument(format!(
            "{n} atom parameter sets but layout has {} atoms",
            layout.n_atoms()
        )));
    }
    let register = QutritRegister::new(n);
    let dim = register.dim();
    let mut h = CMatrix::zeros(dim, dim);

    for idx in 0..dim {
        let levels = register.decode(idx);
        let mut e = 0.0;
        for (k, p) in params.iter().enumerate() {
            let nq = levels[k] as f64;
            e += (p.omega - frame_frequency) * nq + 0.5 * p.chi * nq * (nq - 1.0);
        }
        h[(idx, idx)] = Complex64::new(e, 0.0);
    }

    let omega0 = layout.waveguide.omega0();
    for j in 0..n {
        for k in (j + 1)..n {
            let wj = [params[j].omega, params[j].omega + params[j].chi];
            let wk = [params[k].omega, params[k].omega + params[k].chi];
            let mut eval_at = 0.5 * (params[j].omega + params[k].omega);
            'outer: for &a in &wj {
                for &b in &wk {
                    if (a - b).abs() < 1e-6 * omega0 {
                        eval_at = 0.5 * (a + b);
                        break 'outer;
                    }
                }
            }
            let gjk = layout.coherent_coupling(j, k, eval_at)?;
            if gjk == 0.0 {
                continue;
            }
            let bj = crate::algebra::lowering_operator(&register, j)?.matrix;
            let bk = crate::algebra::lowering_operator(&register, k)?.matrix;
            let hop = bj.adjoint() * &bk;
            let g = Complex64::new(gjk, 0.0);
            h += hop.adjoint() * g + hop * g;
        }
    }
    Operator::hermitian(h)
}

/// Single-qubit gates, acting on levels {0,1} and as identity on |2⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleQubitGate {
    X,
    Hadamard,
    Z,
    S,
    SDag,
}

impl SingleQubitGate {
    /// 3×3 qutrit embedding.
    pub fn local_matrix(&self) -> CMatrix {
        let s = 1.0 / SQRT2;
        let mut m = CMatrix::identity(3, 3);
        match self {
            SingleQubitGate::X => {
                m[(0, 0)] = ZERO;
                m[(1, 1)] = ZERO;
                m[(0, 1)] = ONE;
                m[(1, 0)] = ONE;
            }
            SingleQubitGate::Hadamard => {
                m[(0, 0)] = Complex64::new(s, 0.0);
                m[(0, 1)] = Complex64::new(s, 0.0);
                m[(1, 0)] = Complex64::new(s, 0.0);
                m[(1, 1)] = Complex64::new(-s, 0.0);
            }
            SingleQubitGate::Z => m[(1, 1)] = -ONE,
            SingleQubitGate::S => m[(1, 1)] = I,
            SingleQubitGate::SDag => m[(1, 1)] = -I,
        }
        m
    }

    pub fn embedded(&self, register: &QutritRegister, atom: usize) -> Result<Operator> {
        Operator::unitary(register.embed(atom, &self.local_matrix())?)
    }
}
