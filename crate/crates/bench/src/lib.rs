//! Fixtures shared by the benchmarks.

use sqd_core::lab::{self, ExperimentConfig, Method};
use sqd_core::ucj::{self, SynthesisOptions};
use sqd_core::{Circuit, Determinant, DeterminantBasis, Hamiltonian};

pub fn chain(plaquettes: usize) -> Hamiltonian {
    lab::build_hamiltonian(&ExperimentConfig::new(plaquettes, Method::IdealSqd)).expect("chain model")
}

/// Every determinant of the half-filled sector.
pub fn full_sector(ham: &Hamiltonian) -> DeterminantBasis {
    DeterminantBasis::full(ham.n_orb(), ham.spec.n_up, ham.spec.n_down)
}

/// The UCJ circuit for an `r`-layer ansatz in the HF basis.
pub fn ucj_circuit(plaquettes: usize, r: usize) -> Circuit {
    let mut cfg = ExperimentConfig::new(plaquettes, Method::Ucj);
    cfg.r = r;
    let ham = lab::build_hamiltonian(&cfg).expect("chain model");
    let (hf, basis) = lab::orbital_bases(&ham, cfg.basis_kind).expect("orbitals");
    let params = lab::ansatz_params(&cfg, &ham, &hf, &basis).expect("ansatz");
    let reference = Determinant::reference(ham.spec.n_up, ham.spec.n_down);
    ucj::synthesize_circuit(&params, reference, &SynthesisOptions::default()).expect("circuit")
}
