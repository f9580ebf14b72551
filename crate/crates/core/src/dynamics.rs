//! Lindblad master-equation evolution of multi-qutrit density matrices.
//!
//! The generator ρ̇ = −i[H,ρ] + Σᵢ (LᵢρLᵢ† − ½{Lᵢ†Lᵢ, ρ}) is integrated
//! directly with an adaptive Dormand–Prince 5(4) method. Operators are
//! applied through their nonzero entries, so the cost per step is
//! O(nnz·dim) instead of O(dim³) for the sparse Hamiltonians and collapse
//! operators that dominate this crate. A vectorized matrix-exponential
//! oracle is provided for verification on small registers.

use crate::algebra::{dephasing_operator, lowering_operator, Operator, QutritRegister};
use crate::linalg::{expm, kron, max_abs, CMatrix, I, ZERO};
use crate::{Error, Result};
use num_complex::Complex64;

pub const DEFAULT_RELTOL: f64 = 1e-9;
pub const DEFAULT_ABSTOL: f64 = 1e-12;

/// Per-atom decoherence rates (angular units).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    /// Extra decay Γ_ex to environments other than the waveguide.
    pub gamma_ex: Vec<f64>,
    /// Pure dephasing Γ_φ.
    pub gamma_phi: Vec<f64>,
    /// Waveguide-induced decay Γ_ind at the operating frequency
    /// (zero at decoherence-free points).
    pub gamma_ind: Vec<f64>,
}

impl NoiseParams {
    /// Identical rates on every atom, Γ_ind = 0.
    pub fn uniform(n_atoms: usize, gamma_ex: f64, gamma_phi: f64) -> Self {
        Self {
            gamma_ex: vec![gamma_ex; n_atoms],
            gamma_phi: vec![gamma_phi; n_atoms],
            gamma_ind: vec![0.0; n_atoms],
        }
    }

    pub fn none(n_atoms: usize) -> Self {
        Self::uniform(n_atoms, 0.0, 0.0)
    }

    fn validate(&self, n_atoms: usize) -> Result<()> {
        if self.gamma_ex.len() != n_atoms
            || self.gamma_phi.len() != n_atoms
            || self.gamma_ind.len() != n_atoms
        {
            return Err(Error::InvalidArgument(format!(
                "noise parameters must list rates for all {n_atoms} atoms"
            )));
        }
        for r in self
            .gamma_ex
            .iter()
            .chain(&self.gamma_phi)
            .chain(&self.gamma_ind)
        {
            if *r < 0.0 {
                return Err(Error::InvalidArgument(format!("negative rate {r}")));
            }
        }
        Ok(())
    }
}

/// Hamiltonian plus collapse operators; fully determines the generator.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub hamiltonian: Operator,
    pub collapse_ops: Vec<Operator>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, collapse_ops: Vec<Operator>) -> Result<Self> {
        let h = &hamiltonian.matrix;
        let dev = max_abs(&(h - h.adjoint()));
        if dev >= 1e-12 * (1.0 + max_abs(h)) {
            return Err(Error::InvalidArgument(format!(
                "Hamiltonian is not Hermitian (deviation {dev:.3e})"
            )));
        }
        let dim = hamiltonian.dim();
        for (i, l) in collapse_ops.iter().enumerate() {
            if l.dim() != dim {
                return Err(Error::InvalidArgument(format!(
                    "collapse operator {i} has dimension {} but Hamiltonian has {dim}",
                    l.dim()
                )));
            }
        }
        Ok(Self { hamiltonian, collapse_ops })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

/// Collapse operators for the standard transmon noise model: per atom one
/// decay operator √(Γ_ind + Γ_ex)·(σ₁₀⁻ + √2 σ₂₁⁻) and one dephasing
/// operator √(2Γ_φ)·(|1⟩⟨1| + 2|2⟩⟨2|). Zero-rate operators are omitted.
pub fn build_collapse_ops(register: &QutritRegister, noise: &NoiseParams) -> Result<Vec<Operator>> {
    noise.validate(register.n_atoms)?;
    let mut ops = Vec::new();
    for k in 0..register.n_atoms {
        let decay_rate = noise.gamma_ind[k] + noise.gamma_ex[k];
        if decay_rate > 0.0 {
            let b = lowering_operator(register, k)?;
            ops.push(Operator::new(b.matrix * Complex64::new(decay_rate.sqrt(), 0.0)));
        }
        if noise.gamma_phi[k] > 0.0 {
            let d = dephasing_operator(register, k)?;
            let pref = (2.0 * noise.gamma_phi[k]).sqrt();
            ops.push(Operator::new(d.matrix * Complex64::new(pref, 0.0)));
        }
    }
    Ok(ops)
}

/// Nonzero entries of a matrix, for fast left/right application.
struct SparseOp {
    triplets: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    fn from_dense(m: &CMatrix) -> Self {
        let mut triplets = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if z != ZERO {
                    triplets.push((i, j, z));
                }
            }
        }
        Self { triplets }
    }

    /// out += scale · A·B
    fn left_mul_acc(&self, b: &CMatrix, scale: Complex64, out: &mut CMatrix) {
        let d = b.ncols();
        for &(i, k, a) in &self.triplets {
            let f = scale * a;
            for j in 0..d {
                out[(i, j)] += f * b[(k, j)];
            }
        }
    }

    /// out += scale · B·A
    fn right_mul_acc(&self, b: &CMatrix, scale: Complex64, out: &mut CMatrix) {
        let d = b.nrows();
        for &(k, j, a) in &self.triplets {
            let f = scale * a;
            for i in 0..d {
                out[(i, j)] += f * b[(i, k)];
            }
        }
    }

    /// out += scale · B·A†
    fn right_mul_adjoint_acc(&self, b: &CMatrix, scale: Complex64, out: &mut CMatrix) {
        let d = b.nrows();
        for &(j, k, a) in &self.triplets {
            let f = scale * a.conj();
            for i in 0..d {
                out[(i, j)] += f * b[(i, k)];
            }
        }
    }
}

struct Generator {
    dim: usize,
    h: SparseOp,
    collapse: Vec<SparseOp>,
    /// ½ Σ L†L
    half_sum_ldl: SparseOp,
}

impl Generator {
    fn new(model: &LindbladModel) -> Self {
        let dim = model.dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for l in &model.collapse_ops {
            sum += l.matrix.adjoint() * &l.matrix;
        }
        sum *= Complex64::new(0.5, 0.0);
        Self {
            dim,
            h: SparseOp::from_dense(&model.hamiltonian.matrix),
            collapse: model.collapse_ops.iter().map(|l| SparseOp::from_dense(&l.matrix)).collect(),
            half_sum_ldl: SparseOp::from_dense(&sum),
        }
    }

    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        let one = Complex64::new(1.0, 0.0);
        // −i[H, ρ]
        self.h.left_mul_acc(rho, -I, &mut out);
        self.h.right_mul_acc(rho, I, &mut out);
        // Σ LρL† − ½{L†L, ρ}
        for l in &self.collapse {
            let mut tmp = CMatrix::zeros(self.dim, self.dim);
            l.left_mul_acc(rho, one, &mut tmp);
            l.right_mul_adjoint_acc(&tmp, one, &mut out);
        }
        self.half_sum_ldl.left_mul_acc(rho, -one, &mut out);
        self.half_sum_ldl.right_mul_acc(rho, -one, &mut out);
        out
    }
}

// Dormand–Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_STEPS: usize = 1_000_000;

/// Propagate `rho0` for time `t` under `model`.
///
/// Any matrix is accepted as input (the generator is linear, and channel
/// reconstruction propagates matrix units |i⟩⟨j|). Hermitian inputs are
/// re-symmetrized after every accepted step.
pub fn evolve(
    model: &LindbladModel,
    rho0: &CMatrix,
    t: f64,
    reltol: f64,
    abstol: f64,
) -> Result<CMatrix> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative evolution time {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let gen = Generator::new(model);
    let hermitian_input = max_abs(&(rho0 - rho0.adjoint())) < 1e-12 * (1.0 + max_abs(rho0));

    let mut y = rho0.clone();
    let mut time = 0.0;
    let mut h = t * 1e-3;
    let mut k: Vec<CMatrix> = Vec::with_capacity(7);
    let mut last_err = f64::NAN;

    for _ in 0..MAX_STEPS {
        if time >= t {
            return Ok(y);
        }
        if h > t - time {
            h = t - time;
        }
        if h < t * 1e-15 {
            return Err(Error::IntegrationFailure {
                msg: "step size underflow".into(),
                achieved: last_err,
            });
        }

        k.clear();
        k.push(gen.apply(&y));
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = DP_A[s - 1][j];
                if a != 0.0 {
                    ys += kj * Complex64::new(h * a, 0.0);
                }
            }
            let _ = DP_C;
            k.push(gen.apply(&ys));
        }

        let mut y5 = y.clone();
        let mut err_mat = CMatrix::zeros(gen.dim, gen.dim);
        for (j, kj) in k.iter().enumerate() {
            if DP_B5[j] != 0.0 {
                y5 += kj * Complex64::new(h * DP_B5[j], 0.0);
            }
            let db = DP_B5[j] - DP_B4[j];
            if db != 0.0 {
                err_mat += kj * Complex64::new(h * db, 0.0);
            }
        }

        let mut err_sq = 0.0;
        for i in 0..gen.dim {
            for j in 0..gen.dim {
                let sc = abstol + reltol * y[(i, j)].norm().max(y5[(i, j)].norm());
                let e = err_mat[(i, j)].norm() / sc;
                err_sq += e * e;
            }
        }
        let err = (err_sq / (gen.dim * gen.dim) as f64).sqrt();
        last_err = err;

        if err <= 1.0 {
            time += h;
            y = y5;
            if hermitian_input {
                y = (&y + y.adjoint()) * Complex64::new(0.5, 0.0);
            }
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    Err(Error::IntegrationFailure {
        msg: format!("step budget of {MAX_STEPS} exhausted"),
        achieved: last_err,
    })
}

/// Verification oracle: vectorize the generator into a dim²×dim² matrix,
/// exponentiate, and apply. Restricted to dim ≤ 81.
pub fn evolve_superop_oracle(model: &LindbladModel, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    let d = model.dim();
    if d > 81 {
        return Err(Error::Capability(format!(
            "superoperator oracle supports dim <= 81, got {d}"
        )));
    }
    let id = CMatrix::identity(d, d);
    let h = &model.hamiltonian.matrix;
    // column-major vec: vec(AρB) = (Bᵀ ⊗ A) vec(ρ)
    let mut sup = kron(&id, h).map(|z| -I * z) + kron(&h.transpose(), &id).map(|z| I * z);
    for l in &model.collapse_ops {
        let lm = &l.matrix;
        let ldl = lm.adjoint() * lm;
        sup += kron(&lm.conjugate(), lm);
        sup -= kron(&id, &ldl).map(|z| 0.5 * z);
        sup -= kron(&ldl.transpose(), &id).map(|z| 0.5 * z);
    }
    let prop = expm(&sup.map(|z| z * t));
    let vec_rho = CMatrix::from_column_slice(d * d, 1, rho0.as_slice());
    let out = prop * vec_rho;
    Ok(CMatrix::from_column_slice(d, d, out.as_slice()))
}

/// Seeded random models for oracle cross-checks (used by the validation
/// suite and the test harness).
pub mod testutil {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn random_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMatrix {
        CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(
                rng.gen_range(-1.0..1.0) * scale,
                rng.gen_range(-1.0..1.0) * scale,
            )
        })
    }

    pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMatrix {
        let m = random_matrix(rng, d, scale);
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Random 2-qutrit Lindblad model with moderate rates.
    pub fn random_model(seed: u64) -> LindbladModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 9;
        let h = Operator::hermitian(random_hermitian(&mut rng, d, 1.0)).unwrap();
        let n_coll = 2;
        let collapse = (0..n_coll)
            .map(|_| Operator::new(random_matrix(&mut rng, d, 0.4)))
            .collect();
        LindbladModel::new(h, collapse).unwrap()
    }

    pub fn random_density(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
        let m = random_matrix(rng, d, 1.0);
        let p = &m * m.adjoint();
        let tr: Complex64 = p.diagonal().iter().sum();
        p / tr
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::linalg::trace_distance;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qutrit_register() -> QutritRegister {
        QutritRegister::new(1)
    }

    fn zero_hamiltonian(d: usize) -> Operator {
        Operator::hermitian(CMatrix::zeros(d, d)).unwrap()
    }

    #[test]
    fn no_dynamics_is_identity() {
        let model = LindbladModel::new(zero_hamiltonian(3), vec![]).unwrap();
        let mut rho = CMatrix::zeros(3, 3);
        rho[(0, 0)] = Complex64::new(0.3, 0.0);
        rho[(1, 1)] = Complex64::new(0.7, 0.0);
        rho[(0, 1)] = Complex64::new(0.1, 0.1);
        rho[(1, 0)] = Complex64::new(0.1, -0.1);
        let out = evolve(&model, &rho, 2.0, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
        assert!(max_abs(&(&out - &rho)) < 1e-12);
    }

    #[test]
    fn pure_decay_analytic() {
        // ρ₁₁(t) = e^(−Γt) ρ₁₁(0) for decay from |1⟩
        let reg = qutrit_register();
        let gamma = 0.37;
        let noise = NoiseParams {
            gamma_ex: vec![gamma],
            gamma_phi: vec![0.0],
            gamma_ind: vec![0.0],
        };
        let collapse = build_collapse_ops(&reg, &noise).unwrap();
        let model = LindbladModel::new(zero_hamiltonian(3), collapse).unwrap();
        let mut rho = CMatrix::zeros(3, 3);
        rho[(1, 1)] = Complex64::new(1.0, 0.0);
        let t = 1.7;
        let out = evolve(&model, &rho, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
        assert!((out[(1, 1)].re - (-gamma * t).exp()).abs() < 1e-8);
        assert!((out[(0, 0)].re - (1.0 - (-gamma * t).exp())).abs() < 1e-8);
    }

    #[test]
    fn dephasing_coherence_rates() {
        // coherence (i,j) decays at Γ_φ (c_i − c_j)² with c = (0, 1, 2)
        let reg = qutrit_register();
        let gphi = 0.21;
        let noise = NoiseParams {
            gamma_ex: vec![0.0],
            gamma_phi: vec![gphi],
            gamma_ind: vec![0.0],
        };
        let collapse = build_collapse_ops(&reg, &noise).unwrap();
        let model = LindbladModel::new(zero_hamiltonian(3), collapse).unwrap();
        let third = Complex64::new(1.0 / 3.0, 0.0);
        let rho = CMatrix::from_fn(3, 3, |_, _| third);
        let t = 0.9;
        let out = evolve(&model, &rho, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
        let e1 = (-gphi * t).exp() / 3.0;
        let e4 = (-4.0 * gphi * t).exp() / 3.0;
        assert!((out[(0, 1)].re - e1).abs() < 1e-8);
        assert!((out[(1, 2)].re - e1).abs() < 1e-8);
        assert!((out[(0, 2)].re - e4).abs() < 1e-8);
    }

    #[test]
    fn build_collapse_ops_shapes() {
        let reg = QutritRegister::new(2);
        assert!(build_collapse_ops(&reg, &NoiseParams::none(2)).unwrap().is_empty());
        let noise = NoiseParams::uniform(2, 0.1, 0.2);
        let ops = build_collapse_ops(&reg, &noise).unwrap();
        assert_eq!(ops.len(), 4);
        let bad = NoiseParams {
            gamma_ex: vec![-0.1, 0.0],
            gamma_phi: vec![0.0, 0.0],
            gamma_ind: vec![0.0, 0.0],
        };
        assert!(build_collapse_ops(&reg, &bad).is_err());
    }

    #[test]
    fn decay_prefactor_unit_convention() {
        // Γ_ex = 0.01 MHz linear → rate 1e4 s⁻¹ → prefactor √(1e4)
        let reg = qutrit_register();
        let noise = NoiseParams {
            gamma_ex: vec![0.01e6],
            gamma_phi: vec![0.0],
            gamma_ind: vec![0.0],
        };
        let ops = build_collapse_ops(&reg, &noise).unwrap();
        assert_eq!(ops.len(), 1);
        assert!((ops[0].matrix[(0, 1)].re - 1e4f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn oracle_identity_at_t_zero() {
        let model = random_model(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density(&mut rng, 9);
        let out = evolve_superop_oracle(&model, &rho, 0.0).unwrap();
        assert!(max_abs(&(&out - &rho)) < 1e-12);
    }

    #[test]
    fn oracle_rejects_large_dims() {
        let d = 243;
        let model = LindbladModel::new(zero_hamiltonian(d), vec![]).unwrap();
        let rho = CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0);
        assert!(matches!(
            evolve_superop_oracle(&model, &rho, 1.0),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn oracle_unitary_preserves_purity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = Operator::hermitian(random_hermitian(&mut rng, 9, 1.0)).unwrap();
        let model = LindbladModel::new(h, vec![]).unwrap();
        let v = {
            let raw = random_matrix(&mut rng, 9, 1.0).column(0).into_owned();
            let n = raw.norm();
            raw / Complex64::new(n, 0.0)
        };
        let rho = &v * v.adjoint();
        let out = evolve_superop_oracle(&model, &rho, 0.8).unwrap();
        let purity = (&out * &out).diagonal().iter().map(|z| z.re).sum::<f64>();
        assert!((purity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn evolve_matches_oracle() {
        for seed in 0..5 {
            let model = random_model(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let rho = random_density(&mut rng, 9);
            let t = 0.7;
            let direct = evolve(&model, &rho, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
            let oracle = evolve_superop_oracle(&model, &rho, t).unwrap();
            let diff = max_abs(&(&direct - &oracle));
            assert!(diff < 1e-8, "seed {seed}: max diff {diff:.3e}");
        }
    }

    #[test]
    fn evolve_is_linear() {
        let model = random_model(42);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let r1 = random_density(&mut rng, 9);
        let r2 = random_density(&mut rng, 9);
        let a = Complex64::new(0.3, 0.0);
        let b = Complex64::new(0.7, 0.0);
        let t = 0.5;
        let combo = &r1 * a + &r2 * b;
        let lhs = evolve(&model, &combo, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
        let rhs = evolve(&model, &r1, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap() * a
            + evolve(&model, &r2, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap() * b;
        assert!(max_abs(&(&lhs - &rhs)) < 1e-8);
    }

    #[test]
    fn evolve_is_contractive() {
        let model = random_model(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r1 = random_density(&mut rng, 9);
        let r2 = random_density(&mut rng, 9);
        let d0 = trace_distance(&r1, &r2);
        let mut t = 0.2;
        while t < 1.5 {
            let e1 = evolve(&model, &r1, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
            let e2 = evolve(&model, &r2, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
            let dt = trace_distance(&e1, &e2);
            assert!(dt <= d0 + 1e-8, "t={t}: {dt} > {d0}");
            t += 0.4;
        }
    }

    #[test]
    fn rabi_oscillation_between_two_qutrits() {
        // exchange coupling g on levels {0,1}: P_exc(atom 1) = cos²(gt)
        let reg = QutritRegister::new(2);
        let g = 1.3;
        let mut h = CMatrix::zeros(9, 9);
        let i10 = reg.encode(&[1, 0]);
        let i01 = reg.encode(&[0, 1]);
        h[(i10, i01)] = Complex64::new(g, 0.0);
        h[(i01, i10)] = Complex64::new(g, 0.0);
        let model = LindbladModel::new(Operator::hermitian(h).unwrap(), vec![]).unwrap();
        let mut rho = CMatrix::zeros(9, 9);
        rho[(i10, i10)] = Complex64::new(1.0, 0.0);
        for &t in &[0.1, 0.4, 0.9, 1.7] {
            let out = evolve(&model, &rho, t, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
            let p = out[(i10, i10)].re;
            assert!((p - (g * t).cos().powi(2)).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn ground_state_is_fixed_point_of_decay() {
        let reg = QutritRegister::new(2);
        let noise = NoiseParams::uniform(2, 0.5, 0.0);
        let collapse = build_collapse_ops(&reg, &noise).unwrap();
        let model = LindbladModel::new(zero_hamiltonian(9), collapse).unwrap();
        let mut rho = CMatrix::zeros(9, 9);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        let out = evolve(&model, &rho, 3.0, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
        assert!(max_abs(&(&out - &rho)) < 1e-9);
    }

    #[test]
    fn trace_and_positivity_preserved() {
        let reg = QutritRegister::new(2);
        let noise = NoiseParams::uniform(2, 0.3, 0.2);
        let collapse = build_collapse_ops(&reg, &noise).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = Operator::hermitian(random_hermitian(&mut rng, 9, 1.0)).unwrap();
        let model = LindbladModel::new(h, collapse).unwrap();
        let rho = random_density(&mut rng, 9);
        let out = evolve(&model, &rho, 1.0, DEFAULT_RELTOL, DEFAULT_ABSTOL).unwrap();
        let tr: Complex64 = out.diagonal().iter().sum();
        assert!((tr.re - 1.0).abs() < 1e-9);
        let (vals, _) = crate::linalg::eigh(&out);
        assert!(vals.iter().all(|&v| v > -1e-8));
    }
}
