//! Waveguide-mediated rates and couplings from coupling-point geometry.
//!
//! For atoms coupled to a waveguide at several points, the individual decay
//! rate, coherent exchange coupling, and collective decay rate are sums over
//! coupling-point pairs weighted by cos/sin of the propagation phase
//! φ = ω·|Δx|/v between the points. Destructive interference produces
//! decoherence-free frequencies where an atom's decay vanishes while its
//! coupling to a neighbor stays finite.

use crate::{Error, Result};

/// Waveguide geometry: unit cell Δx and photon speed v.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideParams {
    pub dx: f64,
    pub v: f64,
}

impl WaveguideParams {
    pub fn new(dx: f64, v: f64) -> Result<Self> {
        if dx <= 0.0 || v <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "waveguide requires dx > 0 and v > 0, got dx={dx}, v={v}"
            )));
        }
        Ok(Self { dx, v })
    }

    /// Normalized waveguide with Δx = 1, v = 1 (so ω₀ = 2π).
    pub fn normalized() -> Self {
        Self { dx: 1.0, v: 1.0 }
    }

    /// ω₀ = 2πv/Δx, the frequency at which one unit cell is one wavelength.
    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.v / self.dx
    }
}

/// A single coupling point: position along the waveguide and strength γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPoint {
    pub position: f64,
    pub strength: f64,
}

/// One atom's set of coupling points.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomCoupling {
    pub points: Vec<CouplingPoint>,
}

/// Full geometry: waveguide parameters plus per-atom coupling points.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingLayout {
    pub waveguide: WaveguideParams,
    pub atoms: Vec<AtomCoupling>,
}

/// All Eq.-(1) quantities evaluated at one frequency.
#[derive(Debug, Clone)]
pub struct CouplingProfile {
    pub omega: f64,
    /// Γ_ind per atom.
    pub gamma_ind: Vec<f64>,
    /// g_jk for j < k, indexed by `pair_index`.
    pub g: Vec<f64>,
    /// Γ_coll,jk for j < k, same indexing.
    pub gamma_coll: Vec<f64>,
}

/// A decoherence-free frequency ω = (n + m/8)·ω₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfPoint {
    pub n: u32,
    pub m: u32,
    pub omega: f64,
}

/// The m values at which a four-point hub atom is decoherence-free.
pub const DF_M_VALUES: [u32; 6] = [1, 2, 3, 5, 6, 7];

impl CouplingLayout {
    pub fn new(waveguide: WaveguideParams, atoms: Vec<AtomCoupling>) -> Result<Self> {
        for (k, atom) in atoms.iter().enumerate() {
            if atom.points.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "atom {k} has no coupling points"
                )));
            }
            for p in &atom.points {
                if p.strength < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "atom {k} has a negative coupling strength {}",
                        p.strength
                    )));
                }
            }
            for w in atom.points.windows(2) {
                if w[1].position <= w[0].position {
                    return Err(Error::InvalidArgument(format!(
                        "atom {k} coupling-point positions must be strictly increasing"
                    )));
                }
            }
        }
        Ok(Self { waveguide, atoms })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    fn check_atom(&self, atom: usize) -> Result<()> {
        if atom >= self.atoms.len() {
            return Err(Error::InvalidArgument(format!(
                "atom index {atom} out of range (layout has {} atoms)",
                self.atoms.len()
            )));
        }
        Ok(())
    }

    /// Γ_ind,k(ω): Σ_nm √(γ_kn γ_km) cos φ with φ = ω|x_n − x_m|/v.
    pub fn individual_decay(&self, atom: usize, omega: f64) -> Result<f64> {
        self.check_atom(atom)?;
        if omega < 0.0 {
            return Err(Error::InvalidArgument(format!("omega must be >= 0, got {omega}")));
        }
        Ok(pair_sum(&self.atoms[atom], &self.atoms[atom], omega, self.waveguide.v, Trig::Cos))
    }

    /// dΓ_ind,k/dω, used for decoherence-free point refinement.
    pub fn individual_decay_derivative(&self, atom: usize, omega: f64) -> Result<f64> {
        self.check_atom(atom)?;
        let a = &self.atoms[atom];
        let v = self.waveguide.v;
        let mut sum = 0.0;
        for p in &a.points {
            for q in &a.points {
                let d = (p.position - q.position).abs();
                sum -= (p.strength * q.strength).sqrt() * (d / v) * (omega * d / v).sin();
            }
        }
        Ok(sum)
    }

    /// g_jk(ω): Σ √(γ_jn γ_km)/2 · sin φ.
    pub fn coherent_coupling(&self, j: usize, k: usize, omega: f64) -> Result<f64> {
        self.check_atom(j)?;
        self.check_atom(k)?;
        if j == k {
            return Err(Error::InvalidArgument(
                "coherent coupling is not defined for j == k".into(),
            ));
        }
        // canonical order so g_jk and g_kj are bit-identical
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        Ok(0.5 * pair_sum(&self.atoms[j], &self.atoms[k], omega, self.waveguide.v, Trig::Sin))
    }

    /// Γ_coll,jk(ω): Σ √(γ_jn γ_km) cos φ.
    pub fn collective_decay(&self, j: usize, k: usize, omega: f64) -> Result<f64> {
        self.check_atom(j)?;
        self.check_atom(k)?;
        if j == k {
            return Err(Error::InvalidArgument(
                "collective decay is not defined for j == k".into(),
            ));
        }
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        Ok(pair_sum(&self.atoms[j], &self.atoms[k], omega, self.waveguide.v, Trig::Cos))
    }

    /// Evaluate Γ_ind, g, and Γ_coll for all atoms/pairs at one frequency.
    pub fn profile(&self, omega: f64) -> Result<CouplingProfile> {
        let n = self.n_atoms();
        let mut gamma_ind = Vec::with_capacity(n);
        for k in 0..n {
            gamma_ind.push(self.individual_decay(k, omega)?);
        }
        let mut g = Vec::new();
        let mut gamma_coll = Vec::new();
        for j in 0..n {
            for k in (j + 1)..n {
                g.push(self.coherent_coupling(j, k, omega)?);
                gamma_coll.push(self.collective_decay(j, k, omega)?);
            }
        }
        Ok(CouplingProfile { omega, gamma_ind, g, gamma_coll })
    }

    /// All frequencies in `window` where Γ_ind of `atom` drops below `tol`.
    ///
    /// Dense scan (at least 512 samples per ω₀) locates candidate minima;
    /// bisection on the analytic derivative refines each to relative
    /// precision better than 1e-10.
    pub fn find_df_frequencies(
        &self,
        atom: usize,
        window: (f64, f64),
        tol: f64,
    ) -> Result<Vec<f64>> {
        self.check_atom(atom)?;
        let (lo, hi) = window;
        if !(hi > lo) || lo < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "invalid frequency window [{lo}, {hi}]"
            )));
        }
        if tol <= 0.0 {
            return Err(Error::InvalidArgument("tolerance must be > 0".into()));
        }
        let omega0 = self.waveguide.omega0();
        let samples = (((hi - lo) / omega0 * 512.0).ceil() as usize).max(512);
        let h = (hi - lo) / samples as f64;

        let mut out: Vec<f64> = Vec::new();
        let mut prev_d = self.individual_decay_derivative(atom, lo)?;
        for i in 1..=samples {
            let w = lo + h * i as f64;
            let d = self.individual_decay_derivative(atom, w)?;
            if prev_d < 0.0 && d >= 0.0 && d != 0.0 {
                // bracketed minimum; bisect the derivative
                let mut a = w - h;
                let mut b = w;
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if b - a < 1e-13 * mid.max(omega0) {
                        break;
                    }
                    if self.individual_decay_derivative(atom, mid)? < 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                let root = 0.5 * (a + b);
                if self.individual_decay(atom, root)? < tol {
                    out.push(root);
                }
            }
            prev_d = d;
        }
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * omega0);
        Ok(out)
    }
}

enum Trig {
    Sin,
    Cos,
}

fn pair_sum(a: &AtomCoupling, b: &AtomCoupling, omega: f64, v: f64, trig: Trig) -> f64 {
    let mut sum = 0.0;
    for p in &a.points {
        for q in &b.points {
            let phi = omega * (p.position - q.position).abs() / v;
            let t = match trig {
                Trig::Sin => phi.sin(),
                Trig::Cos => phi.cos(),
            };
            sum += (p.strength * q.strength).sqrt() * t;
        }
    }
    sum
}

/// Closed-form decoherence-free frequency ω = (n + m/8)·ω₀.
pub fn df_point(waveguide: &WaveguideParams, n: u32, m: u32) -> DfPoint {
    DfPoint {
        n,
        m,
        omega: (n as f64 + m as f64 / 8.0) * waveguide.omega0(),
    }
}

/// Reference braided layout for 3 or 5 atoms with uniform strength `gamma`,
/// on a normalized waveguide (Δx = 1, v = 1).
///
/// Positions in units of Δx:
/// - 3 atoms: {0, 2}, {1, 3, 5, 7}, {4, 6}
/// - 5 atoms: {0, 2}, {1, 3, 5, 7}, {6, 12}, {11, 13, 15, 17}, {16, 18}
///
/// Two-point atoms are "ends" (decoherence-free at m ∈ {2, 6}); four-point
/// atoms are "hubs" (decoherence-free at all m ∈ {1, 2, 3, 5, 6, 7}).
/// The layout is verified against all required interference properties at
/// construction time and never returned unverified.
pub fn reference_layout(n_atoms: usize, gamma: f64) -> Result<CouplingLayout> {
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma}")));
    }
    let positions: Vec<Vec<f64>> = match n_atoms {
        3 => vec![
            vec![0.0, 2.0],
            vec![1.0, 3.0, 5.0, 7.0],
            vec![4.0, 6.0],
        ],
        5 => vec![
            vec![0.0, 2.0],
            vec![1.0, 3.0, 5.0, 7.0],
            vec![6.0, 12.0],
            vec![11.0, 13.0, 15.0, 17.0],
            vec![16.0, 18.0],
        ],
        _ => {
            return Err(Error::InvalidArgument(format!(
                "reference layout exists for 3 or 5 atoms, got {n_atoms}"
            )))
        }
    };
    let atoms = positions
        .into_iter()
        .map(|ps| AtomCoupling {
            points: ps
                .into_iter()
                .map(|position| CouplingPoint { position, strength: gamma })
                .collect(),
        })
        .collect();
    let layout = CouplingLayout::new(WaveguideParams::normalized(), atoms)?;
    verify_reference_properties(&layout, gamma)?;
    Ok(layout)
}

/// Verify the interference properties required of a reference layout, with
/// tolerance 1e-9·γ:
///
/// (i)   Γ_ind of end atoms (2 points) vanishes at ω_DF,n2;
/// (ii)  Γ_ind of hub atoms (4 points) vanishes at all ω_DF,nm;
/// (iii) g between adjacent atoms equals γ at ω_DF,n2;
/// (iv)  g between next-nearest atoms vanishes at ω_DF,n2 and ω_DF,n3;
/// (v)   Γ_coll between all pairs vanishes at ω_DF,n2.
///
/// Coupling points of distinct atoms must also be at distinct positions.
pub fn verify_reference_properties(layout: &CouplingLayout, gamma: f64) -> Result<()> {
    let tol = 1e-9 * gamma;
    let wg = &layout.waveguide;
    let n_atoms = layout.n_atoms();
    let fail = |msg: String| Err(Error::Internal(msg));

    // distinct coupling-point positions across atoms
    let mut all: Vec<f64> = layout
        .atoms
        .iter()
        .flat_map(|a| a.points.iter().map(|p| p.position))
        .collect();
    all.sort_by(f64::total_cmp);
    for w in all.windows(2) {
        if (w[1] - w[0]).abs() < 1e-12 * wg.dx {
            return fail(format!("overlapping coupling points at position {}", w[0]));
        }
    }

    for n in 1..=2u32 {
        let w2 = df_point(wg, n, 2).omega;
        let w3 = df_point(wg, n, 3).omega;
        for k in 0..n_atoms {
            match layout.atoms[k].points.len() {
                2 => {
                    let gi = layout.individual_decay(k, w2)?;
                    if gi.abs() > tol {
                        return fail(format!(
                            "end atom {k}: Gamma_ind = {gi:.3e} at omega_DF,{n}2"
                        ));
                    }
                }
                4 => {
                    for m in DF_M_VALUES {
                        let w = df_point(wg, n, m).omega;
                        let gi = layout.individual_decay(k, w)?;
                        if gi.abs() > tol {
                            return fail(format!(
                                "hub atom {k}: Gamma_ind = {gi:.3e} at omega_DF,{n}{m}"
                            ));
                        }
                    }
                }
                other => {
                    return fail(format!(
                        "reference atoms must have 2 or 4 coupling points, atom {k} has {other}"
                    ))
                }
            }
        }
        for j in 0..n_atoms {
            for k in (j + 1)..n_atoms {
                let g = layout.coherent_coupling(j, k, w2)?;
                let gc = layout.collective_decay(j, k, w2)?;
                if gc.abs() > tol {
                    return fail(format!(
                        "pair ({j},{k}): Gamma_coll = {gc:.3e} at omega_DF,{n}2"
                    ));
                }
                match k - j {
                    1 => {
                        if (g - gamma).abs() > tol {
                            return fail(format!(
                                "adjacent pair ({j},{k}): g = {g:.12e}, expected gamma"
                            ));
                        }
                    }
                    2 => {
                        let g3 = layout.coherent_coupling(j, k, w3)?;
                        if g.abs() > tol || g3.abs() > tol {
                            return fail(format!(
                                "next-nearest pair ({j},{k}): g = {g:.3e} at n2, {g3:.3e} at n3"
                            ));
                        }
                    }
                    _ => {
                        if g.abs() > tol {
                            return fail(format!(
                                "distant pair ({j},{k}): g = {g:.3e} at omega_DF,{n}2"
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 1.0;

    fn single_point_atom(gamma: f64) -> CouplingLayout {
        CouplingLayout::new(
            WaveguideParams::normalized(),
            vec![AtomCoupling {
                points: vec![CouplingPoint { position: 0.0, strength: gamma }],
            }],
        )
        .unwrap()
    }

    #[test]
    fn single_point_decay_is_flat() {
        let layout = single_point_atom(0.7);
        for w in [0.0, 1.0, 3.7, 10.0] {
            assert!((layout.individual_decay(0, w).unwrap() - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_atom_closed_form() {
        // Γ_ind(ω) = 2γ(1 + cos(ωL/v)) for a 2-point atom with spacing L
        let layout = reference_layout(3, GAMMA).unwrap();
        let omega0 = layout.waveguide.omega0();
        for i in 0..100 {
            let w = 2.0 * omega0 * i as f64 / 99.0;
            let expected = 2.0 * GAMMA * (1.0 + (w * 2.0).cos());
            let got = layout.individual_decay(0, w).unwrap();
            assert!(
                (got - expected).abs() <= 1e-12 * (1.0 + expected.abs()),
                "w={w}: got {got}, expected {expected}"
            );
        }
        // at ω = 0.25 ω₀ the closed form gives 2γ(1 + cos π) = 0
        let g = layout.individual_decay(0, 0.25 * omega0).unwrap();
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn hub_fully_constructive_at_half_omega0() {
        // at ω = 0.5 ω₀ every pair phase of the 4-point hub is an even
        // multiple of π, so all 16 terms add: Γ_ind = 16γ
        let layout = reference_layout(3, GAMMA).unwrap();
        let w = 0.5 * layout.waveguide.omega0();
        assert!((layout.individual_decay(1, w).unwrap() - 16.0 * GAMMA).abs() < 1e-10);
    }

    #[test]
    fn coherent_coupling_reference_values() {
        let layout = reference_layout(3, GAMMA).unwrap();
        let w = 1.25 * layout.waveguide.omega0();
        // (γ/2)(3 sin π/2 + 2 sin 3π/2 + 2 sin 5π/2 + sin 7π/2) = γ
        assert!((layout.coherent_coupling(0, 1, w).unwrap() - GAMMA).abs() < 1e-9);
        assert!((layout.coherent_coupling(1, 2, w).unwrap() - GAMMA).abs() < 1e-9);
        // separations {2,4,6}Δx give sines of integer multiples of π
        assert!(layout.coherent_coupling(0, 2, w).unwrap().abs() < 1e-9);
    }

    #[test]
    fn colocated_points_trivial_cases() {
        let wg = WaveguideParams::normalized();
        let atom = |x: f64| AtomCoupling {
            points: vec![CouplingPoint { position: x, strength: GAMMA }],
        };
        let layout = CouplingLayout::new(wg, vec![atom(0.0), atom(0.0)]).unwrap();
        assert!(layout.coherent_coupling(0, 1, 1.0).unwrap().abs() < 1e-15);
        assert!((layout.collective_decay(0, 1, 1.0).unwrap() - GAMMA).abs() < 1e-15);
    }

    #[test]
    fn collective_decay_reference_values() {
        let layout = reference_layout(3, GAMMA).unwrap();
        let w = 1.25 * layout.waveguide.omega0();
        assert!(layout.collective_decay(0, 1, w).unwrap().abs() < 1e-9);
        // γ(cos π + 2 cos 2π + cos 3π)·… over separations {2,4,4,6}: sums to 0
        assert!(layout.collective_decay(0, 2, w).unwrap().abs() < 1e-9);
        assert!(layout.collective_decay(1, 2, w).unwrap().abs() < 1e-9);
    }

    #[test]
    fn self_coupling_rejected() {
        let layout = reference_layout(3, GAMMA).unwrap();
        assert!(layout.coherent_coupling(1, 1, 1.0).is_err());
        assert!(layout.collective_decay(2, 2, 1.0).is_err());
        assert!(layout.individual_decay(7, 1.0).is_err());
    }

    #[test]
    fn df_search_hub_finds_all_six() {
        let layout = reference_layout(3, GAMMA).unwrap();
        let omega0 = layout.waveguide.omega0();
        let found = layout
            .find_df_frequencies(1, (omega0, 2.0 * omega0), 1e-10 * GAMMA)
            .unwrap();
        assert_eq!(found.len(), 6);
        for (f, m) in found.iter().zip(DF_M_VALUES) {
            let expected = (1.0 + m as f64 / 8.0) * omega0;
            assert!(
                (f - expected).abs() < 1e-10 * expected,
                "m={m}: found {f}, expected {expected}"
            );
        }
    }

    #[test]
    fn df_search_end_finds_two() {
        let layout = reference_layout(3, GAMMA).unwrap();
        let omega0 = layout.waveguide.omega0();
        let found = layout
            .find_df_frequencies(0, (omega0, 2.0 * omega0), 1e-10 * GAMMA)
            .unwrap();
        assert_eq!(found.len(), 2);
        assert!((found[0] - 1.25 * omega0).abs() < 1e-10 * omega0);
        assert!((found[1] - 1.75 * omega0).abs() < 1e-10 * omega0);
    }

    #[test]
    fn df_search_single_point_empty() {
        let layout = single_point_atom(GAMMA);
        let omega0 = layout.waveguide.omega0();
        let found = layout
            .find_df_frequencies(0, (omega0, 2.0 * omega0), 1e-10 * GAMMA)
            .unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn df_search_rejects_bad_window() {
        let layout = reference_layout(3, GAMMA).unwrap();
        assert!(layout.find_df_frequencies(0, (2.0, 1.0), 1e-10).is_err());
        assert!(layout.find_df_frequencies(0, (1.0, 2.0), -1.0).is_err());
    }

    #[test]
    fn reference_layouts_verify() {
        reference_layout(3, GAMMA).unwrap();
        reference_layout(5, GAMMA).unwrap();
        reference_layout(3, 2.0 * std::f64::consts::PI * 4e6).unwrap();
        assert!(reference_layout(4, GAMMA).is_err());
    }

    #[test]
    fn perturbed_layout_fails_verification() {
        let mut layout = reference_layout(3, GAMMA).unwrap();
        layout.atoms[1].points[0].position += 0.1;
        assert!(verify_reference_properties(&layout, GAMMA).is_err());
    }

    #[test]
    fn symmetry_of_pairwise_quantities() {
        let layout = reference_layout(5, GAMMA).unwrap();
        for i in 0..40 {
            let w = 0.05 * (i as f64 + 0.5) * layout.waveguide.omega0();
            for j in 0..5 {
                for k in (j + 1)..5 {
                    let gjk = layout.coherent_coupling(j, k, w).unwrap();
                    let gkj = layout.coherent_coupling(k, j, w).unwrap();
                    assert_eq!(gjk, gkj);
                    let cjk = layout.collective_decay(j, k, w).unwrap();
                    let ckj = layout.collective_decay(k, j, w).unwrap();
                    assert_eq!(cjk, ckj);
                }
            }
        }
    }

    #[test]
    fn decay_matrix_positivity() {
        // the 2x2 matrix [[Γ_ind,j, Γ_coll,jk], [Γ_coll,jk, Γ_ind,k]] must be
        // positive semidefinite up to numerical slack at every frequency
        let layout = reference_layout(3, GAMMA).unwrap();
        let omega0 = layout.waveguide.omega0();
        for i in 0..512 {
            let w = 2.0 * omega0 * i as f64 / 511.0;
            for j in 0..3 {
                for k in (j + 1)..3 {
                    let gj = layout.individual_decay(j, w).unwrap();
                    let gk = layout.individual_decay(k, w).unwrap();
                    let gc = layout.collective_decay(j, k, w).unwrap();
                    let tr = gj + gk;
                    let disc = (0.25 * (gj - gk).powi(2) + gc * gc).sqrt();
                    let min_eig = 0.5 * tr - disc;
                    assert!(min_eig >= -1e-9 * GAMMA, "w={w} pair ({j},{k}): {min_eig}");
                }
            }
        }
    }

    #[test]
    fn df_point_closed_form_exact() {
        let wg = WaveguideParams::normalized();
        for n in 1..=3 {
            for m in DF_M_VALUES {
                let p = df_point(&wg, n, m);
                let ratio = p.omega / wg.omega0() - n as f64 - m as f64 / 8.0;
                assert!(ratio.abs() < 1e-14, "n={n} m={m}: {ratio:e}");
            }
        }
    }
}
