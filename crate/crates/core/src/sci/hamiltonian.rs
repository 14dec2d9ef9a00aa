use std::collections::HashMap;

use rayon::prelude::*;

use crate::fock::{self, Determinant, Excitation, StringSpace};
use crate::model::Hamiltonian;

use super::DeterminantBasis;

#[inline]
fn combined(d: Determinant, n: usize) -> u64 {
    d.alpha | d.beta << n
}

/// `⟨di|H|dj⟩` by the Slater–Condon rules. Spin-orbital `o` of the combined
/// string is spatial orbital `o mod n` with spin `o / n`; signs follow the
/// ascending order of that string.
pub fn slater_condon(di: Determinant, dj: Determinant, ham: &Hamiltonian) -> f64 {
    let n = ham.n_orb();
    debug_assert!(2 * n <= 64);
    let xi = combined(di, n);
    let xj = combined(dj, n);
    if xi.count_ones() != xj.count_ones() {
        return 0.0;
    }
    let diff = xi ^ xj;
    let h = &ham.h;
    let v = &ham.v;
    let sp = |o: usize| o % n;
    let spin = |o: usize| o / n;
    match diff.count_ones() {
        0 => {
            let occ = fock::occupied(xj);
            let mut e = ham.e_core;
            for &o in &occ {
                e += h[(sp(o), sp(o))];
            }
            for (k, &o) in occ.iter().enumerate() {
                for &o2 in &occ[..k] {
                    e += v.get(sp(o), sp(o), sp(o2), sp(o2));
                    if spin(o) == spin(o2) {
                        e -= v.get(sp(o), sp(o2), sp(o2), sp(o));
                    }
                }
            }
            e
        }
        2 => {
            let a = (xj & diff).trailing_zeros() as usize;
            let c = (xi & diff).trailing_zeros() as usize;
            if spin(a) != spin(c) {
                return 0.0;
            }
            let (_, sign) = fock::excite(xj, c, a).expect("single excitation");
            let (pc, pa) = (sp(c), sp(a));
            let mut e = h[(pc, pa)];
            for o in fock::occupied(xj) {
                e += v.get(pc, pa, sp(o), sp(o));
                if spin(o) == spin(a) {
                    e -= v.get(pc, sp(o), sp(o), pa);
                }
            }
            sign * e
        }
        4 => {
            let ann = fock::occupied(xj & diff);
            let cre = fock::occupied(xi & diff);
            let (a1, a2, c1, c2) = (ann[0], ann[1], cre[0], cre[1]);
            let mut sign = 1.0;
            let mut t = xj;
            for (op, idx) in [(false, a1), (false, a2), (true, c2), (true, c1)] {
                let (u, s) = if op { fock::create(t, idx) } else { fock::annihilate(t, idx) }.expect("double excitation");
                t = u;
                sign *= s;
            }
            let mut e = 0.0;
            if spin(c1) == spin(a1) && spin(c2) == spin(a2) {
                e += v.get(sp(c1), sp(a1), sp(c2), sp(a2));
            }
            if spin(c1) == spin(a2) && spin(c2) == spin(a1) {
                e -= v.get(sp(c1), sp(a2), sp(c2), sp(a1));
            }
            sign * e
        }
        _ => 0.0,
    }
}

/// Same-spin part of `H` between strings of one register: one-body plus
/// same-spin two-body terms, no core energy.
fn string_hamiltonian(space: &StringSpace, needed: &[bool], ham: &Hamiltonian) -> Vec<Vec<(u32, f64)>> {
    let n = space.n_orb();
    space
        .strings()
        .par_iter()
        .enumerate()
        .map(|(k, &j)| {
            if !needed[k] {
                return Vec::new();
            }
            let dj = Determinant::new(j, 0);
            let occ = fock::occupied(j);
            let empty: Vec<usize> = (0..n).filter(|&p| j >> p & 1 == 0).collect();
            let mut row = Vec::new();
            row.push((k as u32, slater_condon(dj, dj, ham) - ham.e_core));
            let mut add = |i: u64| {
                let value = slater_condon(Determinant::new(i, 0), dj, ham);
                if value != 0.0 {
                    row.push((space.rank(i).unwrap() as u32, value));
                }
            };
            for &q in &occ {
                for &p in &empty {
                    add(j ^ (1 << q) ^ (1 << p));
                }
            }
            for (x, &q) in occ.iter().enumerate() {
                for &s in &occ[..x] {
                    for (y, &p) in empty.iter().enumerate() {
                        for &r in &empty[..y] {
                            add(j ^ (1 << q) ^ (1 << s) ^ (1 << p) ^ (1 << r));
                        }
                    }
                }
            }
            row
        })
        .collect()
}

enum PositionTable {
    Dense(Vec<u32>),
    Sparse(HashMap<(u32, u32), u32>),
}

const ABSENT: u32 = u32::MAX;
const DENSE_TABLE_LIMIT: usize = 1 << 26;

/// The Hamiltonian projected onto a determinant basis, applied matrix-free
/// from per-register string tables.
pub struct SectorOperator<'a> {
    basis: &'a DeterminantBasis,
    e_core: f64,
    n: usize,
    n_beta_strings: usize,
    ranks: Vec<(u32, u32)>,
    table: PositionTable,
    h_alpha: Vec<Vec<(u32, f64)>>,
    h_beta: Vec<Vec<(u32, f64)>>,
    exc_alpha: Vec<Vec<Excitation>>,
    exc_beta: Vec<Vec<Excitation>>,
    v: Vec<f64>,
    diag: Vec<f64>,
}

impl<'a> SectorOperator<'a> {
    pub fn new(basis: &'a DeterminantBasis, ham: &Hamiltonian) -> Self {
        let n = basis.n_orb();
        assert_eq!(n, ham.n_orb(), "basis and Hamiltonian orbital counts differ");
        let sa = StringSpace::new(n, basis.n_up());
        let sb = StringSpace::new(n, basis.n_down());
        let ranks: Vec<(u32, u32)> = basis
            .dets()
            .iter()
            .map(|d| (sa.rank(d.alpha).unwrap() as u32, sb.rank(d.beta).unwrap() as u32))
            .collect();
        let mut need_a = vec![false; sa.len()];
        let mut need_b = vec![false; sb.len()];
        for &(ia, ib) in &ranks {
            need_a[ia as usize] = true;
            need_b[ib as usize] = true;
        }
        let table = if sa.len() * sb.len() <= DENSE_TABLE_LIMIT {
            let mut t = vec![ABSENT; sa.len() * sb.len()];
            for (k, &(ia, ib)) in ranks.iter().enumerate() {
                t[ia as usize * sb.len() + ib as usize] = k as u32;
            }
            PositionTable::Dense(t)
        } else {
            PositionTable::Sparse(ranks.iter().enumerate().map(|(k, &r)| (r, k as u32)).collect())
        };
        let exc = |space: &StringSpace, need: &[bool]| -> Vec<Vec<Excitation>> {
            let all = fock::single_excitation_lists(space);
            all.into_iter()
                .zip(need)
                .map(|(l, &keep)| if keep { l } else { Vec::new() })
                .collect()
        };
        let diag = basis.dets().par_iter().map(|&d| slater_condon(d, d, ham)).collect();
        SectorOperator {
            basis,
            e_core: ham.e_core,
            n,
            n_beta_strings: sb.len(),
            ranks,
            table,
            h_alpha: string_hamiltonian(&sa, &need_a, ham),
            h_beta: string_hamiltonian(&sb, &need_b, ham),
            exc_alpha: exc(&sa, &need_a),
            exc_beta: exc(&sb, &need_b),
            v: ham.v.as_slice().to_vec(),
            diag,
        }
    }

    pub fn basis(&self) -> &DeterminantBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.ranks.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    #[inline]
    fn position(&self, ia: u32, ib: u32) -> Option<usize> {
        match &self.table {
            PositionTable::Dense(t) => {
                let k = t[ia as usize * self.n_beta_strings + ib as usize];
                (k != ABSENT).then_some(k as usize)
            }
            PositionTable::Sparse(m) => m.get(&(ia, ib)).map(|&k| k as usize),
        }
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        y.par_iter_mut().enumerate().for_each(|(k, out)| {
            let (ia, ib) = self.ranks[k];
            let mut s = self.e_core * x[k];
            for &(ja, value) in &self.h_alpha[ia as usize] {
                if let Some(j) = self.position(ja, ib) {
                    s += value * x[j];
                }
            }
            for &(jb, value) in &self.h_beta[ib as usize] {
                if let Some(j) = self.position(ia, jb) {
                    s += value * x[j];
                }
            }
            for ea in &self.exc_alpha[ia as usize] {
                let base = (ea.p as usize * n + ea.q as usize) * n * n;
                let mut acc = 0.0;
                for eb in &self.exc_beta[ib as usize] {
                    if let Some(j) = self.position(ea.target, eb.target) {
                        acc += self.v[base + eb.p as usize * n + eb.q as usize] * eb.sign * x[j];
                    }
                }
                s += ea.sign * acc;
            }
            *out = s;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{extend_to_chain, surrogate_dimer, ChainSpec, SurrogateParams};

    fn l2() -> Hamiltonian {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        extend_to_chain(&dimer, &ChainSpec::new(2).unwrap()).unwrap()
    }

    #[test]
    fn diagonal_without_interaction_sums_one_body() {
        let ham = l2().noninteracting();
        let d = Determinant::new(0b1011, 0b0111);
        let expected: f64 = [0, 1, 3, 0, 1, 2].iter().map(|&p| ham.h[(p, p)]).sum();
        assert!((slater_condon(d, d, &ham) - expected).abs() < 1e-14);
    }

    #[test]
    fn distant_determinants_do_not_couple() {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        let ham = extend_to_chain(&dimer, &ChainSpec::new(4).unwrap()).unwrap();
        let di = Determinant::new(0b0000_0111, 0b0011_1111);
        let dj = Determinant::new(0b0011_0001, 0b0111_1110);
        assert_eq!(di.excitation_distance(dj), 3);
        assert_eq!(slater_condon(di, dj, &ham), 0.0);
    }

    #[test]
    fn operator_is_symmetric_and_matches_slater_condon() {
        let ham = l2();
        let basis = DeterminantBasis::full(4, 3, 2);
        let op = SectorOperator::new(&basis, &ham);
        let dim = op.dim();
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            op.apply(&e, &mut col);
            for i in 0..dim {
                let sc = slater_condon(basis.dets()[i], basis.dets()[j], &ham);
                assert!((col[i] - sc).abs() < 1e-12, "({i},{j}): {} vs {sc}", col[i]);
            }
        }
    }

    #[test]
    fn subset_operator_is_projection() {
        let ham = l2();
        let full = DeterminantBasis::full(4, 3, 3);
        let sub = DeterminantBasis::new(4, 3, 3, full.dets().iter().copied().step_by(3)).unwrap();
        let op = SectorOperator::new(&sub, &ham);
        let x: Vec<f64> = (0..op.dim()).map(|k| (k as f64).sin()).collect();
        let mut y = vec![0.0; op.dim()];
        op.apply(&x, &mut y);
        for (i, &di) in sub.dets().iter().enumerate() {
            let direct: f64 = sub.dets().iter().zip(&x).map(|(&dj, xj)| slater_condon(di, dj, &ham) * xj).sum();
            assert!((y[i] - direct).abs() < 1e-12);
        }
    }
}
