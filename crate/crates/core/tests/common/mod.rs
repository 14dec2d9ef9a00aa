#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use sqd_core::model::{extend_to_chain, surrogate_dimer};
use sqd_core::ucj::UcjParams;
use sqd_core::{ChainSpec, Determinant, Hamiltonian, SurrogateParams};

pub fn chain(l: usize) -> Hamiltonian {
    let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
    extend_to_chain(&dimer, &ChainSpec::new(l).unwrap()).unwrap()
}

/// Applies a product of ladder operators (rightmost first) to the
/// occupation-number state `x`; mode `k` is bit `k`.
pub fn ladder(ops: &[(bool, usize)], mut x: u64) -> Option<(u64, f64)> {
    let mut sign = 1.0;
    for &(create, k) in ops.iter().rev() {
        let occupied = x >> k & 1 == 1;
        if occupied == create {
            return None;
        }
        if (x & ((1u64 << k) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        x ^= 1 << k;
    }
    Some((x, sign))
}

/// Second-quantized Hamiltonian over the whole Fock space of `2n` modes,
/// mode `p + σn` for spatial orbital `p` and spin `σ`.
pub fn dense_hamiltonian(ham: &Hamiltonian) -> DMatrix<f64> {
    let n = ham.n_orb();
    let dim = 1usize << (2 * n);
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim as u64 {
        m[(x as usize, x as usize)] += ham.e_core;
        for s in 0..2 {
            for p in 0..n {
                for q in 0..n {
                    if let Some((y, sg)) = ladder(&[(true, p + s * n), (false, q + s * n)], x) {
                        m[(y as usize, x as usize)] += ham.h[(p, q)] * sg;
                    }
                }
            }
        }
        for s in 0..2 {
            for t in 0..2 {
                for p in 0..n {
                    for q in 0..n {
                        for r in 0..n {
                            for u in 0..n {
                                let v = ham.v.get(p, q, r, u);
                                if v == 0.0 {
                                    continue;
                                }
                                let ops = [(true, p + s * n), (true, r + t * n), (false, u + t * n), (false, q + s * n)];
                                if let Some((y, sg)) = ladder(&ops, x) {
                                    m[(y as usize, x as usize)] += 0.5 * v * sg;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

/// Bitstrings (α low) of the `(n_up, n_down)` sector, ascending by (α, β).
pub fn sector(n: usize, n_up: usize, n_down: usize) -> Vec<Determinant> {
    let mut out = Vec::new();
    for a in 0u64..1 << n {
        for b in 0u64..1 << n {
            if a.count_ones() as usize == n_up && b.count_ones() as usize == n_down {
                out.push(Determinant::new(a, b));
            }
        }
    }
    out.sort();
    out
}

pub fn lowest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn bits(s: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&k| s >> k & 1 == 1).collect()
}

/// `⟨D'|𝒰(U)|D⟩` for one register: the minor of `U` on rows occ(D'),
/// columns occ(D).
fn minor(u: &DMatrix<f64>, to: u64, from: u64, n: usize) -> f64 {
    let (rows, cols) = (bits(to, n), bits(from, n));
    if rows.len() != cols.len() {
        return 0.0;
    }
    if rows.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| u[(rows[i], cols[j])]).determinant()
}

fn rotate(state: &HashMap<Determinant, Complex64>, u: &DMatrix<f64>, dets: &[Determinant], n: usize) -> HashMap<Determinant, Complex64> {
    let mut out = HashMap::new();
    for &to in dets {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&from, &amp) in state {
            acc += amp * minor(u, to.alpha, from.alpha, n) * minor(u, to.beta, from.beta, n);
        }
        out.insert(to, acc);
    }
    out
}

fn phase(d: Determinant, js: &DMatrix<f64>, jo: &DMatrix<f64>, n: usize) -> f64 {
    let mut phi = 0.0;
    for reg in [d.alpha, d.beta] {
        let occ = bits(reg, n);
        for (x, &p) in occ.iter().enumerate() {
            phi += 0.5 * js[(p, p)];
            for &q in &occ[x + 1..] {
                phi += js[(p, q)];
            }
        }
    }
    for p in bits(d.alpha, n) {
        for q in bits(d.beta, n) {
            phi += jo[(p, q)];
        }
    }
    phi
}

/// `𝒰(F) L_{r−1} ⋯ L_0 |ref⟩` with `L_k = 𝒰(U_k) e^{iΦ_k} 𝒰(U_k)†`, built
/// from determinant minors and diagonal phases only.
pub fn ucj_oracle(p: &UcjParams, reference: Determinant) -> HashMap<Determinant, Complex64> {
    let n = p.n_orb();
    let dets = sector(n, reference.n_alpha(), reference.n_beta());
    let mut state: HashMap<Determinant, Complex64> = HashMap::from([(reference, Complex64::new(1.0, 0.0))]);
    for layer in &p.layers {
        state = rotate(&state, &layer.rotation.transpose(), &dets, n);
        for (d, amp) in state.iter_mut() {
            *amp *= Complex64::from_polar(1.0, phase(*d, &layer.j_same, &layer.j_opp, n));
        }
        state = rotate(&state, &layer.rotation, &dets, n);
    }
    rotate(&state, &p.final_rotation, &dets, n)
}
