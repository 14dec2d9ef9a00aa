//! Exact circuit simulation: a fast path restricted to one `(n_up, n_down)`
//! sector and a full `2^(2n)` statevector oracle. Both use qubit-level gate
//! semantics; see [`Gate`] for the XX+YY convention.

mod sampling;

use num_complex::Complex64;
use rayon::prelude::*;

pub use sampling::{
    apply_bitflip_noise, calibrate_noise, correct_number_probability, expected_missing_fraction, expected_unique,
    sample, sample_distribution, NoiseCalibration, SampleOrigin, SampleSet,
};

use crate::error::{Error, Result};
use crate::fock::{Determinant, StringSpace};
use crate::ucj::{Circuit, Gate};

/// Largest qubit count [`simulate_full`] accepts without an override.
pub const FULL_QUBIT_GUARD: usize = 16;

/// Amplitudes over a fixed particle-number sector, stored α-major: position
/// `rank(α) · n_β + rank(β)`, so the β-string index varies fastest.
#[derive(Debug, Clone)]
pub struct SectorState {
    n_orb: usize,
    alpha: StringSpace,
    beta: StringSpace,
    pub amplitudes: Vec<Complex64>,
}

impl SectorState {
    pub fn basis_state(n_orb: usize, d: Determinant) -> Result<Self> {
        let alpha = StringSpace::new(n_orb, d.n_alpha());
        let beta = StringSpace::new(n_orb, d.n_beta());
        let mut s = SectorState {
            n_orb,
            amplitudes: vec![Complex64::new(0.0, 0.0); alpha.len() * beta.len()],
            alpha,
            beta,
        };
        let k = s
            .index_of(d)
            .ok_or_else(|| Error::OutsideSector(format!("{d} does not fit in {n_orb} orbitals")))?;
        s.amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    pub fn n_up(&self) -> usize {
        self.alpha.n_elec()
    }

    pub fn n_down(&self) -> usize {
        self.beta.n_elec()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn index_of(&self, d: Determinant) -> Option<usize> {
        Some(self.alpha.rank(d.alpha)? * self.beta.len() + self.beta.rank(d.beta)?)
    }

    pub fn determinant(&self, k: usize) -> Determinant {
        let nb = self.beta.len();
        Determinant::new(self.alpha.string(k / nb), self.beta.string(k % nb))
    }

    pub fn amplitude(&self, d: Determinant) -> Complex64 {
        self.index_of(d).map_or(Complex64::new(0.0, 0.0), |k| self.amplitudes[k])
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Determinants in storage order, paired with `probabilities()`.
    pub fn determinants(&self) -> Vec<Determinant> {
        (0..self.len()).map(|k| self.determinant(k)).collect()
    }

    fn apply(&mut self, index: usize, gate: &Gate) -> Result<()> {
        let n = self.n_orb;
        let nb = self.beta.len();
        let reject = || Error::NonConservingGate {
            index,
            gate: gate.to_string(),
        };
        match *gate {
            Gate::X(_) => return Err(reject()),
            Gate::XXPlusYY { a, b, theta, beta } => {
                if (a < n) != (b < n) {
                    return Err(reject());
                }
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let m_ab = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -beta);
                let m_ba = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, beta);
                let space = if a < n { &self.alpha } else { &self.beta };
                let (ba, bb) = (a % n, b % n);
                let pairs: Vec<(usize, usize)> = space
                    .strings()
                    .iter()
                    .enumerate()
                    .filter(|&(_, &st)| st >> ba & 1 == 1 && st >> bb & 1 == 0)
                    .map(|(i, &st)| (i, space.rank(st ^ (1 << ba) ^ (1 << bb)).unwrap()))
                    .collect();
                let mix = |x: Complex64, y: Complex64| (c * x + m_ab * y, m_ba * x + c * y);
                if a < n {
                    for (i, j) in pairs {
                        for col in 0..nb {
                            let (x, y) = (self.amplitudes[i * nb + col], self.amplitudes[j * nb + col]);
                            let (x2, y2) = mix(x, y);
                            self.amplitudes[i * nb + col] = x2;
                            self.amplitudes[j * nb + col] = y2;
                        }
                    }
                } else {
                    self.amplitudes.par_chunks_mut(nb).for_each(|row| {
                        for &(i, j) in &pairs {
                            let (x2, y2) = mix(row[i], row[j]);
                            row[i] = x2;
                            row[j] = y2;
                        }
                    });
                }
            }
            Gate::Phase { q, phi } => {
                let f = Complex64::from_polar(1.0, phi);
                self.phase_where(|da, db| if q < n { da >> q & 1 == 1 } else { db >> (q - n) & 1 == 1 }, f);
            }
            Gate::CPhase { a, b, phi } => {
                let f = Complex64::from_polar(1.0, phi);
                let bit = |q: usize, da: u64, db: u64| if q < n { da >> q & 1 == 1 } else { db >> (q - n) & 1 == 1 };
                self.phase_where(|da, db| bit(a, da, db) && bit(b, da, db), f);
            }
        }
        Ok(())
    }

    fn phase_where(&mut self, pred: impl Fn(u64, u64) -> bool + Sync, f: Complex64) {
        let nb = self.beta.len();
        let (alpha, beta) = (&self.alpha, &self.beta);
        self.amplitudes.par_chunks_mut(nb).enumerate().for_each(|(ia, row)| {
            let da = alpha.string(ia);
            for (ib, amp) in row.iter_mut().enumerate() {
                if pred(da, beta.string(ib)) {
                    *amp *= f;
                }
            }
        });
    }
}

/// Runs `c` in the `(n_up, n_down)` sector. The circuit must start with a
/// block of X gates preparing a determinant of that sector; every later gate
/// must conserve the particle number of each spin register.
pub fn simulate_sector(c: &Circuit, n_up: usize, n_down: usize) -> Result<SectorState> {
    let n = c.n_orb();
    let mut bits = 0u64;
    let mut start = 0;
    for g in &c.gates {
        match *g {
            Gate::X(q) => bits ^= 1 << q,
            _ => break,
        }
        start += 1;
    }
    let reference = Determinant::from_bitstring(bits, n);
    if !reference.in_sector(n, n_up, n_down) {
        return Err(Error::OutsideSector(format!(
            "preparation gives {reference}, not a ({n_up}, {n_down}) determinant"
        )));
    }
    let mut state = SectorState::basis_state(n, reference)?;
    for (index, g) in c.gates.iter().enumerate().skip(start) {
        state.apply(index, g)?;
    }
    Ok(state)
}

/// Full statevector, indexed by the bitstring with qubit `i` as bit `i`.
pub fn simulate_full(c: &Circuit, allow_large: bool) -> Result<Vec<Complex64>> {
    let nq = c.n_qubits;
    if nq > FULL_QUBIT_GUARD && !allow_large {
        return Err(Error::Guard(format!(
            "{nq} qubits exceeds the full-simulation limit of {FULL_QUBIT_GUARD}; pass the override to proceed"
        )));
    }
    if nq > 30 {
        return Err(Error::Guard(format!("{nq} qubits cannot be stored")));
    }
    let mut psi = vec![Complex64::new(0.0, 0.0); 1 << nq];
    psi[0] = Complex64::new(1.0, 0.0);
    for g in &c.gates {
        match *g {
            Gate::X(q) => {
                for k in 0..psi.len() {
                    if k >> q & 1 == 0 {
                        psi.swap(k, k | 1 << q);
                    }
                }
            }
            Gate::XXPlusYY { a, b, theta, beta } => {
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let m_ab = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -beta);
                let m_ba = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, beta);
                for k in 0..psi.len() {
                    if k >> a & 1 == 1 && k >> b & 1 == 0 {
                        let j = k ^ (1 << a) ^ (1 << b);
                        let (x, y) = (psi[k], psi[j]);
                        psi[k] = c * x + m_ab * y;
                        psi[j] = m_ba * x + c * y;
                    }
                }
            }
            Gate::Phase { q, phi } => {
                let f = Complex64::from_polar(1.0, phi);
                psi.iter_mut().enumerate().filter(|(k, _)| k >> q & 1 == 1).for_each(|(_, x)| *x *= f);
            }
            Gate::CPhase { a, b, phi } => {
                let f = Complex64::from_polar(1.0, phi);
                psi.iter_mut()
                    .enumerate()
                    .filter(|(k, _)| k >> a & 1 == 1 && k >> b & 1 == 1)
                    .for_each(|(_, x)| *x *= f);
            }
        }
    }
    Ok(psi)
}
