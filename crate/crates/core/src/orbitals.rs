//! Single-particle bases (Hartree-Fock, kinetic, HF+) and the doubles
//! amplitudes that parametrize the cluster-Jastrow ansatz.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, Hamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BasisKind {
    Hf,
    Kin,
    Hfplus,
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisKind::Hf => "HF",
            BasisKind::Kin => "KIN",
            BasisKind::Hfplus => "HFPLUS",
        })
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HF" => Ok(BasisKind::Hf),
            "KIN" => Ok(BasisKind::Kin),
            "HFPLUS" | "HF+" => Ok(BasisKind::Hfplus),
            other => Err(Error::Parse(format!("unknown basis kind {other:?}"))),
        }
    }
}

/// Orthonormal orbitals as columns of `coeffs` in the tight-binding frame,
/// with ascending energies.
#[derive(Debug, Clone)]
pub struct OrbitalBasis {
    pub kind: BasisKind,
    pub coeffs: DMatrix<f64>,
    pub energies: DVector<f64>,
}

impl OrbitalBasis {
    pub fn n_orb(&self) -> usize {
        self.coeffs.ncols()
    }

    fn from_eigh(kind: BasisKind, values: DVector<f64>, vectors: DMatrix<f64>) -> Self {
        OrbitalBasis {
            kind,
            coeffs: vectors,
            energies: values,
        }
    }
}

/// Eigenstates of the one-body (kinetic) Hamiltonian.
pub fn kinetic_basis(ham: &Hamiltonian) -> Result<OrbitalBasis> {
    if linalg::asymmetry(&ham.h) > model::SYMMETRY_TOL {
        return Err(Error::Parameter("one-body matrix is not symmetric".into()));
    }
    let (w, c) = linalg::eigh(&ham.h);
    Ok(OrbitalBasis::from_eigh(BasisKind::Kin, w, c))
}

/// Closed-shell SCF settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScfOptions {
    /// Weight of the new density in each damped update.
    pub mixing: f64,
    /// Use Pulay extrapolation of the Fock matrix instead of plain damping.
    pub diis: bool,
    /// Energy added to the virtual space before each diagonalization (eV).
    pub level_shift: f64,
    pub max_iterations: usize,
    /// Threshold on max |FD − DF|.
    pub tolerance: f64,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions {
            mixing: 0.5,
            diis: true,
            level_shift: 1.0,
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScfSolution {
    pub basis: OrbitalBasis,
    /// Total RHF energy including the core constant.
    pub energy: f64,
    pub iterations: usize,
    pub commutator_norm: f64,
}

/// Fock matrix for a spin density `d` (per spin, so the total density is 2d).
fn fock(ham: &Hamiltonian, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ham.n_orb();
    let mut f = ham.h.clone();
    for p in 0..n {
        for q in 0..=p {
            let mut g = 0.0;
            for r in 0..n {
                for s in 0..n {
                    let drs = d[(r, s)];
                    if drs != 0.0 {
                        g += drs * (2.0 * ham.v.get(p, q, r, s) - ham.v.get(p, s, r, q));
                    }
                }
            }
            f[(p, q)] += g;
            if p != q {
                f[(q, p)] += g;
            }
        }
    }
    f
}

fn spin_density(c: &DMatrix<f64>, n_occ: usize) -> DMatrix<f64> {
    let occ = c.columns(0, n_occ);
    &occ * occ.transpose()
}

fn rhf_energy(ham: &Hamiltonian, d: &DMatrix<f64>, f: &DMatrix<f64>) -> f64 {
    ham.e_core + d.component_mul(&(&ham.h + f)).sum()
}

/// Restricted closed-shell Hartree-Fock.
pub fn solve_hf(ham: &Hamiltonian, n_up: usize, n_down: usize, opts: &ScfOptions) -> Result<ScfSolution> {
    if n_up != n_down {
        return Err(Error::Unsupported(format!(
            "open-shell SCF ({n_up} up, {n_down} down); only closed-shell RHF is implemented"
        )));
    }
    let n = ham.n_orb();
    if n_up == 0 || n_up > n {
        return Err(Error::Parameter(format!("cannot place {n_up} electrons per spin in {n} orbitals")));
    }
    let n_occ = n_up;

    let (_, c0) = linalg::eigh(&ham.h);
    let mut d = spin_density(&c0, n_occ);
    let mut diis = Diis::new(8);
    let mut residual = f64::INFINITY;

    for iteration in 1..=opts.max_iterations {
        let f = fock(ham, &d);
        let err = &f * &d - &d * &f;
        residual = err.amax();
        let (w, c) = linalg::eigh(&f);
        let d_aufbau = spin_density(&c, n_occ);
        // A commuting density can still fill the wrong orbitals, so the check
        // is repeated on the aufbau density of the orbitals being returned.
        if residual < opts.tolerance && (&d_aufbau - &d).amax() < opts.tolerance.sqrt() {
            let f_final = fock(ham, &d_aufbau);
            let final_residual = (&f_final * &d_aufbau - &d_aufbau * &f_final).amax();
            if final_residual < opts.tolerance {
                return Ok(ScfSolution {
                    energy: rhf_energy(ham, &d_aufbau, &f_final),
                    basis: OrbitalBasis::from_eigh(BasisKind::Hf, w, c),
                    iterations: iteration,
                    commutator_norm: final_residual,
                });
            }
        }
        let mut f_used = if opts.diis {
            diis.push(f.clone(), err);
            diis.extrapolate().unwrap_or(f)
        } else {
            f
        };
        if opts.level_shift != 0.0 {
            f_used += (DMatrix::identity(n, n) - &d) * opts.level_shift;
        }
        let (_, c) = linalg::eigh(&f_used);
        let d_new = spin_density(&c, n_occ);
        d = if opts.diis {
            d_new
        } else {
            &d * (1.0 - opts.mixing) + d_new * opts.mixing
        };
    }
    Err(Error::ScfNotConverged {
        iterations: opts.max_iterations,
        residual,
    })
}

/// Pulay DIIS over Fock matrices.
struct Diis {
    capacity: usize,
    focks: Vec<DMatrix<f64>>,
    errors: Vec<DMatrix<f64>>,
}

impl Diis {
    fn new(capacity: usize) -> Self {
        Diis {
            capacity,
            focks: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn push(&mut self, f: DMatrix<f64>, e: DMatrix<f64>) {
        if self.focks.len() == self.capacity {
            self.focks.remove(0);
            self.errors.remove(0);
        }
        self.focks.push(f);
        self.errors.push(e);
    }

    fn extrapolate(&self) -> Option<DMatrix<f64>> {
        let m = self.focks.len();
        if m < 2 {
            return None;
        }
        let mut b = DMatrix::zeros(m + 1, m + 1);
        for i in 0..m {
            for j in 0..m {
                b[(i, j)] = self.errors[i].dot(&self.errors[j]);
            }
            b[(i, m)] = -1.0;
            b[(m, i)] = -1.0;
        }
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = -1.0;
        let coeffs = b.lu().solve(&rhs)?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return None;
        }
        let mut f = DMatrix::zeros(self.focks[0].nrows(), self.focks[0].ncols());
        for (c, fi) in coeffs.iter().zip(&self.focks) {
            f += fi * *c;
        }
        Some(f)
    }
}

/// Mixing matrix on the kinetic basis whose eigenvectors are the HF orbitals.
#[derive(Debug, Clone)]
pub struct MixMatrix {
    pub m: DMatrix<f64>,
}

impl MixMatrix {
    /// `M = W diag(ε_HF) Wᵀ` with `W = C_kinᵀ C_HF`.
    pub fn new(kin: &OrbitalBasis, hf: &OrbitalBasis) -> Result<Self> {
        if kin.n_orb() != hf.n_orb() {
            return Err(Error::Dimension(format!(
                "kinetic basis has {} orbitals, HF basis {}",
                kin.n_orb(),
                hf.n_orb()
            )));
        }
        let w = kin.coeffs.transpose() * &hf.coeffs;
        let m = &w * DMatrix::from_diagonal(&hf.energies) * w.transpose();
        Ok(MixMatrix {
            m: (&m + m.transpose()) * 0.5,
        })
    }

    /// `M' = 2M − diag(diag(M))`: off-diagonal couplings doubled.
    pub fn amplified(&self) -> DMatrix<f64> {
        let mut mp = &self.m * 2.0;
        for i in 0..mp.nrows() {
            mp[(i, i)] = self.m[(i, i)];
        }
        mp
    }

    /// Pairs `(α, β)` violating `|M_αβ| < |M_αα − M_ββ|`.
    pub fn dominance_violations(&self) -> Vec<(usize, usize)> {
        let n = self.m.nrows();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if self.m[(a, b)].abs() >= (self.m[(a, a)] - self.m[(b, b)]).abs() {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// HF orbitals with their mean-field mixing of kinetic orbitals amplified.
pub fn hfplus_basis(ham: &Hamiltonian, hf: &OrbitalBasis) -> Result<(OrbitalBasis, MixMatrix)> {
    let kin = kinetic_basis(ham)?;
    let mix = MixMatrix::new(&kin, hf)?;
    let violations = mix.dominance_violations();
    if !violations.is_empty() {
        log::warn!(
            "mixing matrix off-diagonals exceed diagonal splittings for {} pairs",
            violations.len()
        );
    }
    let (w, z) = linalg::eigh(&mix.amplified());
    let mut c = &kin.coeffs * z;
    linalg::canonical_column_phases(&mut c);
    Ok((OrbitalBasis::from_eigh(BasisKind::Hfplus, w, c), mix))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmplitudeSource {
    #[serde(rename = "MP2")]
    Mp2,
    #[serde(rename = "CCSD")]
    Ccsd,
}

/// Doubles amplitudes `t2[i,j,a,b]` with `i, j` occupied and `a, b` virtual
/// (virtual indices counted from the first virtual orbital).
#[derive(Debug, Clone, PartialEq)]
pub struct T2Amplitudes {
    pub n_occ: usize,
    pub n_virt: usize,
    data: Vec<f64>,
    pub source: AmplitudeSource,
}

impl T2Amplitudes {
    pub fn zeros(n_occ: usize, n_virt: usize, source: AmplitudeSource) -> Self {
        T2Amplitudes {
            n_occ,
            n_virt,
            data: vec![0.0; n_occ * n_occ * n_virt * n_virt],
            source,
        }
    }

    pub fn from_flat(n_occ: usize, n_virt: usize, data: Vec<f64>, source: AmplitudeSource) -> Result<Self> {
        if data.len() != n_occ * n_occ * n_virt * n_virt {
            return Err(Error::Dimension(format!(
                "t2 of shape [{n_occ}, {n_occ}, {n_virt}, {n_virt}] needs {} entries, got {}",
                n_occ * n_occ * n_virt * n_virt,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("t2 contains non-finite entries".into()));
        }
        Ok(T2Amplitudes {
            n_occ,
            n_virt,
            data,
            source,
        })
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, a: usize, b: usize) -> usize {
        ((i * self.n_occ + j) * self.n_virt + a) * self.n_virt + b
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.data[self.idx(i, j, a, b)]
    }

    pub fn set(&mut self, i: usize, j: usize, a: usize, b: usize, value: f64) {
        let k = self.idx(i, j, a, b);
        self.data[k] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn n_orb(&self) -> usize {
        self.n_occ + self.n_virt
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: T2File = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let [no, no2, nv, nv2] = file.shape;
        if no != no2 || nv != nv2 {
            return Err(Error::Dimension(format!("t2 shape {:?} is not [no, no, nv, nv]", file.shape)));
        }
        T2Amplitudes::from_flat(no, nv, file.data, file.source)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = T2File {
            shape: [self.n_occ, self.n_occ, self.n_virt, self.n_virt],
            data: self.data.clone(),
            source: self.source,
        };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct T2File {
    shape: [usize; 4],
    data: Vec<f64>,
    source: AmplitudeSource,
}

/// Gap below which an MP2 denominator counts as degenerate.
pub const MP2_GAP_TOL: f64 = 1e-8;

/// First-order (MP2) doubles for a closed-shell reference made of the
/// `n_occ` lowest orbitals of `basis`.
pub fn compute_t2(ham: &Hamiltonian, basis: &OrbitalBasis, n_occ: usize) -> Result<T2Amplitudes> {
    let n = ham.n_orb();
    if basis.n_orb() != n {
        return Err(Error::Dimension(format!("basis has {} orbitals, Hamiltonian {n}", basis.n_orb())));
    }
    if n_occ == 0 || n_occ >= n {
        return Err(Error::Parameter(format!("need a nonempty occupied/virtual split, got {n_occ} of {n}")));
    }
    let mo = model::rotate_integrals(ham, &basis.coeffs)?;
    let eps = &basis.energies;
    let nv = n - n_occ;
    let mut t2 = T2Amplitudes::zeros(n_occ, nv, AmplitudeSource::Mp2);
    for i in 0..n_occ {
        for j in 0..n_occ {
            for a in 0..nv {
                for b in 0..nv {
                    let (av, bv) = (a + n_occ, b + n_occ);
                    let denominator = eps[i] + eps[j] - eps[av] - eps[bv];
                    if denominator.abs() < MP2_GAP_TOL {
                        return Err(Error::Degenerate {
                            i,
                            j,
                            a: av,
                            b: bv,
                            denominator,
                        });
                    }
                    t2.set(i, j, a, b, mo.v.get(i, av, j, bv) / denominator);
                }
            }
        }
    }
    Ok(t2)
}

/// Closed-shell MP2 correlation energy `Σ t[i,j,a,b] (2(ia|jb) − (ib|ja))`,
/// with `mo` expressed in the basis the amplitudes refer to.
pub fn mp2_energy(t2: &T2Amplitudes, mo: &Hamiltonian) -> f64 {
    let no = t2.n_occ;
    let mut e = 0.0;
    for i in 0..no {
        for j in 0..no {
            for a in 0..t2.n_virt {
                for b in 0..t2.n_virt {
                    let (av, bv) = (a + no, b + no);
                    e += t2.get(i, j, a, b) * (2.0 * mo.v.get(i, av, j, bv) - mo.v.get(i, bv, j, av));
                }
            }
        }
    }
    e
}
