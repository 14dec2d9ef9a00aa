//! Selected and full configuration interaction.

mod basis;
pub mod davidson;
mod hamiltonian;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use basis::DeterminantBasis;
pub use davidson::{DavidsonOptions, Eigenpair};
pub use hamiltonian::{slater_condon, SectorOperator};

use crate::error::{Error, Result};
use crate::fock::{self, Determinant};
use crate::model::Hamiltonian;
use crate::orbitals::OrbitalBasis;

/// Lowest-diagonal determinants whose dense block supplies the Davidson
/// start vector; bases up to this size are solved densely.
pub const P_SPACE: usize = 400;

/// Default ceiling on the sector dimension for full CI.
pub const FCI_GUARD: usize = 1_000_000;

/// Lowest eigenpair of `H` projected onto a determinant basis.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    /// Real amplitudes in basis order; the largest-magnitude entry is positive.
    pub vector: Vec<f64>,
    pub basis: DeterminantBasis,
    pub iterations: usize,
    pub residual: f64,
}

impl GroundState {
    pub fn amplitude(&self, d: Determinant) -> f64 {
        self.basis.index_of(d).map_or(0.0, |k| self.vector[k])
    }

    /// Squared amplitudes keyed by determinant.
    pub fn weights(&self) -> HashMap<Determinant, f64> {
        self.basis
            .dets()
            .iter()
            .zip(&self.vector)
            .map(|(&d, &c)| (d, c * c))
            .collect()
    }
}

pub fn diagonalize(basis: &DeterminantBasis, ham: &Hamiltonian) -> Result<GroundState> {
    diagonalize_with(basis, ham, &DavidsonOptions::default())
}

pub fn diagonalize_with(basis: &DeterminantBasis, ham: &Hamiltonian, opts: &DavidsonOptions) -> Result<GroundState> {
    if basis.is_empty() {
        return Err(Error::Empty("cannot diagonalize in an empty determinant basis".into()));
    }
    if basis.n_orb() != ham.n_orb() {
        return Err(Error::Dimension(format!(
            "basis over {} orbitals, Hamiltonian over {}",
            basis.n_orb(),
            ham.n_orb()
        )));
    }
    let op = SectorOperator::new(basis, ham);
    let apply = |x: &[f64], y: &mut [f64]| op.apply(x, y);
    let (guess, value) = p_space_guess(basis, ham, op.diagonal());
    let pair = if basis.len() <= P_SPACE {
        // The P-space is the whole basis: the guess is the answer.
        let mut image = vec![0.0; guess.len()];
        apply(&guess, &mut image);
        let residual = image.iter().zip(&guess).map(|(a, x)| (a - value * x).powi(2)).sum::<f64>().sqrt();
        Eigenpair {
            value,
            vector: guess,
            iterations: 0,
            residual,
        }
    } else {
        davidson::lowest_eigenpair_from(op.diagonal(), &apply, Some(&guess), opts)?
    };
    let mut vector = pair.vector;
    let lead = vector
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        vector.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(GroundState {
        energy: pair.value,
        vector,
        basis: basis.clone(),
        iterations: pair.iterations,
        residual: pair.residual,
    })
}

/// Ground state of the Hamiltonian block over the `P_SPACE` determinants
/// with the lowest diagonal energies, embedded in the full basis, with its
/// eigenvalue.
fn p_space_guess(basis: &DeterminantBasis, ham: &Hamiltonian, diag: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..basis.len()).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    order.truncate(P_SPACE);
    let dets = basis.dets();
    let k = order.len();
    let mut block = nalgebra::DMatrix::zeros(k, k);
    for i in 0..k {
        block[(i, i)] = diag[order[i]];
        for j in 0..i {
            let x = slater_condon(dets[order[i]], dets[order[j]], ham);
            block[(i, j)] = x;
            block[(j, i)] = x;
        }
    }
    let (w, v) = crate::linalg::eigh(&block);
    let mut guess = vec![0.0; basis.len()];
    for (i, &idx) in order.iter().enumerate() {
        guess[idx] = v[(i, 0)];
    }
    (guess, w[0])
}

pub fn sector_dimension(n_orb: usize, n_up: usize, n_down: usize) -> u128 {
    fock::binomial(n_orb, n_up) as u128 * fock::binomial(n_orb, n_down) as u128
}

/// Full CI in the `(n_up, n_down)` sector.
pub fn fci_ground_state(ham: &Hamiltonian, n_up: usize, n_down: usize) -> Result<GroundState> {
    fci_ground_state_guarded(ham, n_up, n_down, FCI_GUARD)
}

pub fn fci_ground_state_guarded(ham: &Hamiltonian, n_up: usize, n_down: usize, guard: usize) -> Result<GroundState> {
    let n = ham.n_orb();
    if n_up > n || n_down > n {
        return Err(Error::Parameter(format!("({n_up}, {n_down}) electrons do not fit in {n} orbitals")));
    }
    let dim = sector_dimension(n, n_up, n_down);
    if dim > guard as u128 {
        return Err(Error::Guard(format!(
            "FCI sector dimension {dim} exceeds the limit of {guard}"
        )));
    }
    diagonalize(&DeterminantBasis::full(n, n_up, n_down), ham)
}

fn check_same_sector(g: &GroundState, basis: &DeterminantBasis) -> Result<()> {
    if (basis.n_orb(), basis.n_up(), basis.n_down()) != (g.basis.n_orb(), g.basis.n_up(), g.basis.n_down()) {
        return Err(Error::OutsideSector(format!(
            "basis sector ({}, {}) over {} orbitals differs from the ground state's ({}, {}) over {}",
            basis.n_up(),
            basis.n_down(),
            basis.n_orb(),
            g.basis.n_up(),
            g.basis.n_down(),
            g.basis.n_orb()
        )));
    }
    Ok(())
}

/// Ground-state weight outside `basis`: `1 − Σ_{i∈basis} |⟨g|i⟩|²`.
pub fn missing_fraction(g: &GroundState, basis: &DeterminantBasis) -> Result<f64> {
    check_same_sector(g, basis)?;
    let covered: f64 = basis.dets().iter().map(|&d| g.amplitude(d).powi(2)).sum();
    Ok((1.0 - covered).clamp(0.0, 1.0))
}

/// Ground-state weight binned by the number of electrons above the Fermi
/// level, in total and restricted to a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationProfile {
    pub total: Vec<f64>,
    pub covered: Vec<f64>,
}

/// Electrons outside the lowest `n_up` α and `n_down` β orbitals.
pub fn excitation_number(d: Determinant, n_up: usize, n_down: usize) -> usize {
    ((d.alpha & !fock::low_mask(n_up)).count_ones() + (d.beta & !fock::low_mask(n_down)).count_ones()) as usize
}

/// `g` must be expressed in the molecular orbitals of `hf`.
pub fn excitation_profile(g: &GroundState, hf: &OrbitalBasis, basis: &DeterminantBasis) -> Result<ExcitationProfile> {
    check_same_sector(g, basis)?;
    let (n, n_up, n_down) = (g.basis.n_orb(), g.basis.n_up(), g.basis.n_down());
    if hf.n_orb() != n {
        return Err(Error::Dimension(format!("HF basis has {} orbitals, state {n}", hf.n_orb())));
    }
    for k in [n_up, n_down] {
        if k > 0 && k < n {
            let gap = hf.energies[k] - hf.energies[k - 1];
            if gap.abs() < 1e-8 {
                return Err(Error::DegenerateFermiLevel { gap });
            }
        }
    }
    let bins = n_up.min(n - n_up) + n_down.min(n - n_down) + 1;
    let mut total = vec![0.0; bins];
    let mut covered = vec![0.0; bins];
    for (&d, &c) in g.basis.dets().iter().zip(&g.vector) {
        let k = excitation_number(d, n_up, n_down);
        total[k] += c * c;
        if basis.contains(d) {
            covered[k] += c * c;
        }
    }
    Ok(ExcitationProfile { total, covered })
}

/// Selected-CI energy in `basis` minus a reference energy.
pub fn energy_error(basis: &DeterminantBasis, ham: &Hamiltonian, reference_energy: f64) -> Result<f64> {
    Ok(diagonalize(basis, ham)?.energy - reference_energy)
}

/// `⟨S²⟩ = S_z(S_z + 1) + ‖S₊ψ‖²` for the (normalized) state.
pub fn spin_squared(g: &GroundState) -> f64 {
    let sz = (g.basis.n_up() as f64 - g.basis.n_down() as f64) / 2.0;
    let n = g.basis.n_orb();
    let mut raised: HashMap<Determinant, f64> = HashMap::new();
    for (&d, &c) in g.basis.dets().iter().zip(&g.vector) {
        for p in 0..n {
            // S₊ = Σ_p a†_pα a_pβ; the β annihilation passes every α electron.
            let Some((beta, s1)) = fock::annihilate(d.beta, p) else { continue };
            let Some((alpha, s2)) = fock::create(d.alpha, p) else { continue };
            let pass = if d.n_alpha() % 2 == 0 { 1.0 } else { -1.0 };
            *raised.entry(Determinant::new(alpha, beta)).or_default() += c * s1 * s2 * pass;
        }
    }
    let norm: f64 = g.vector.iter().map(|c| c * c).sum();
    sz * (sz + 1.0) + raised.values().map(|x| x * x).sum::<f64>() / norm
}

/// Total electron density on each spatial orbital.
pub fn orbital_occupations(g: &GroundState) -> Vec<f64> {
    let n = g.basis.n_orb();
    let mut occ = vec![0.0; n];
    for (&d, &c) in g.basis.dets().iter().zip(&g.vector) {
        let w = c * c;
        for p in 0..n {
            occ[p] += w * ((d.alpha >> p & 1) + (d.beta >> p & 1)) as f64;
        }
    }
    occ
}
