//! Two-band cuprate chain Hamiltonians.
//!
//! Orbitals are laid out plaquette by plaquette: orbital `2j` is the Cu
//! 3d(x²−y²)-derived orbital of plaquette `j` and orbital `2j + 1` its O
//! 2p(σ)-derived partner. The two-body tensor uses chemist's index order,
//! `V[p,q,r,s] = (pq|rs)`, so
//!
//! ```text
//! H = e_core + Σ_{pq,σ} h[p,q] a†_pσ a_qσ + ½ Σ_{pqrs,στ} V[p,q,r,s] a†_pσ a†_rτ a_sτ a_qσ
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on the index symmetries of stored tensors.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense real tensor over `n⁴` orbital quadruples in `[p][q][r][s]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBody {
    n: usize,
    data: Vec<f64>,
}

impl TwoBody {
    pub fn zeros(n: usize) -> Self {
        TwoBody {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n * n * n {
            return Err(Error::Dimension(format!(
                "two-body tensor needs {} entries for n = {n}, got {}",
                n * n * n * n,
                data.len()
            )));
        }
        Ok(TwoBody { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn idx(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n + q) * self.n + r) * self.n + s
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[self.idx(p, q, r, s)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let i = self.idx(p, q, r, s);
        self.data[i] = value;
    }

    /// Sets an entry together with its 8 symmetry partners.
    pub fn set_sym(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        for (a, b, c, d) in partners(p, q, r, s) {
            self.set(a, b, c, d, value);
        }
    }

    /// Largest violation of `(pq|rs) = (qp|rs) = (pq|sr) = (rs|pq)`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.get(p, q, r, s);
                        worst = worst
                            .max((v - self.get(q, p, r, s)).abs())
                            .max((v - self.get(p, q, s, r)).abs())
                            .max((v - self.get(r, s, p, q)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Averages every entry over its 8 symmetry partners.
    pub fn symmetrized(&self) -> TwoBody {
        let n = self.n;
        let mut out = TwoBody::zeros(n);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let sum: f64 = partners(p, q, r, s)
                            .iter()
                            .map(|&(a, b, c, d)| self.get(a, b, c, d))
                            .sum();
                        out.set(p, q, r, s, sum / 8.0);
                    }
                }
            }
        }
        out
    }

    /// Largest entry left after removing every density-density term
    /// `n_p n_q`, i.e. the `(pp|qq)` entries.
    pub fn density_density_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        if p == q && r == s {
                            continue;
                        }
                        worst = worst.max(self.get(p, q, r, s).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `V'[p,q,r,s] = Σ U[a,p] U[b,q] U[c,r] U[d,s] V[a,b,c,d]`, one index at a time.
    pub fn transformed(&self, u: &DMatrix<f64>) -> TwoBody {
        let n = self.n;
        let mut cur = self.data.clone();
        let mut next = vec![0.0; cur.len()];
        // Each pass contracts the leading index and rotates it to the back, so
        // after four passes the order is restored.
        for _ in 0..4 {
            let n3 = n * n * n;
            next.iter_mut().for_each(|x| *x = 0.0);
            for a in 0..n {
                let block = &cur[a * n3..(a + 1) * n3];
                for p in 0..n {
                    let c = u[(a, p)];
                    if c == 0.0 {
                        continue;
                    }
                    for (rest, &value) in block.iter().enumerate() {
                        next[rest * n + p] += c * value;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        TwoBody { n, data: cur }
    }
}

fn partners(p: usize, q: usize, r: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (p, q, r, s),
        (q, p, r, s),
        (p, q, s, r),
        (q, p, s, r),
        (r, s, p, q),
        (s, r, p, q),
        (r, s, q, p),
        (s, r, q, p),
    ]
}

/// Geometry and filling of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Number of plaquettes.
    pub plaquettes: usize,
    pub n_up: usize,
    pub n_down: usize,
    #[serde(default = "default_screening")]
    pub screening_factor: f64,
    #[serde(default = "default_kinetic_scale")]
    pub kinetic_scale: f64,
}

fn default_screening() -> f64 {
    0.5
}

fn default_kinetic_scale() -> f64 {
    0.7
}

impl ChainSpec {
    /// Chain of `plaquettes` cells at the default filling of 3L/2 electrons per
    /// spin, which requires an even length.
    pub fn new(plaquettes: usize) -> Result<Self> {
        if plaquettes % 2 != 0 {
            return Err(Error::Parameter(format!(
                "default filling needs an even plaquette count, got {plaquettes}; give electron counts explicitly"
            )));
        }
        Self::with_electrons(plaquettes, 3 * plaquettes / 2, 3 * plaquettes / 2)
    }

    pub fn with_electrons(plaquettes: usize, n_up: usize, n_down: usize) -> Result<Self> {
        let spec = ChainSpec {
            plaquettes,
            n_up,
            n_down,
            screening_factor: default_screening(),
            kinetic_scale: default_kinetic_scale(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_factors(mut self, screening_factor: f64, kinetic_scale: f64) -> Result<Self> {
        self.screening_factor = screening_factor;
        self.kinetic_scale = kinetic_scale;
        self.validate()?;
        Ok(self)
    }

    pub fn n_orb(&self) -> usize {
        2 * self.plaquettes
    }

    /// Plaquette that owns an orbital.
    pub fn cell(&self, orbital: usize) -> usize {
        orbital / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.plaquettes == 0 {
            return Err(Error::Parameter("chain needs at least one plaquette".into()));
        }
        let n = self.n_orb();
        if self.n_up > n || self.n_down > n {
            return Err(Error::Parameter(format!(
                "electron counts ({}, {}) exceed {n} orbitals",
                self.n_up, self.n_down
            )));
        }
        for (name, v) in [
            ("screening_factor", self.screening_factor),
            ("kinetic_scale", self.kinetic_scale),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Parameter(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Where dimer integrals came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    File,
    Surrogate,
}

/// One- and two-body terms of a two-plaquette dimer over {d1, p1, d2, p2}.
#[derive(Debug, Clone)]
pub struct DimerModel {
    pub h2: DMatrix<f64>,
    pub v2: TwoBody,
    pub provenance: Provenance,
}

impl DimerModel {
    pub fn new(h2: DMatrix<f64>, v2: TwoBody, provenance: Provenance) -> Result<Self> {
        if h2.nrows() != 4 || h2.ncols() != 4 || v2.n() != 4 {
            return Err(Error::Dimension("dimer integrals must cover 4 orbitals".into()));
        }
        if linalg::asymmetry(&h2) > SYMMETRY_TOL {
            return Err(Error::Parameter("dimer one-body matrix is not symmetric".into()));
        }
        if v2.max_asymmetry() > SYMMETRY_TOL {
            return Err(Error::Parameter("dimer two-body tensor lacks 8-fold symmetry".into()));
        }
        Ok(DimerModel { h2, v2, provenance })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = IntegralsFile::load(path)?;
        let (h, v, _) = file.into_parts()?;
        DimerModel::new(h, v, Provenance::File)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        IntegralsFile::from_parts(&self.h2, &self.v2, 0.0, None).save(path)
    }
}

/// Parameters of the extended two-band surrogate dimer, in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub eps_d: f64,
    pub eps_p: f64,
    pub t_pd: f64,
    pub u_d: f64,
    pub u_p: f64,
    pub u_pd: f64,
    /// Amplitude of the Cu–O exchange-type integrals `(dp|dp)`.
    pub x_offdiag: f64,
}

impl Default for SurrogateParams {
    /// Tuned so the L = 2…6 chains have spin gaps between 0.05 and 0.3 eV and
    /// a Heisenberg-like gap sequence once inter-plaquette Coulomb terms are
    /// removed. Bulk Cu densities come out near 1.05–1.07, below the 1.2–1.5
    /// of the real material (see docs/surrogate-tuning.md).
    fn default() -> Self {
        SurrogateParams {
            eps_d: 0.0,
            eps_p: -0.6,
            t_pd: 2.45,
            u_d: 8.8,
            u_p: 3.0,
            u_pd: 3.9,
            x_offdiag: 0.02,
        }
    }
}

impl SurrogateParams {
    pub fn zero() -> Self {
        SurrogateParams {
            eps_d: 0.0,
            eps_p: 0.0,
            t_pd: 0.0,
            u_d: 0.0,
            u_p: 0.0,
            u_pd: 0.0,
            x_offdiag: 0.0,
        }
    }
}

const D1: usize = 0;
const P1: usize = 1;
const D2: usize = 2;
const P2: usize = 3;
/// Cu–O nearest-neighbour pairs of the dimer, as (d, p).
const DIMER_BONDS: [(usize, usize); 3] = [(D1, P1), (D2, P1), (D2, P2)];

/// Extended two-band dimer with an exchange term that no real-space basis
/// reduces to density-density form.
pub fn surrogate_dimer(params: &SurrogateParams) -> Result<DimerModel> {
    let values = [
        params.eps_d,
        params.eps_p,
        params.t_pd,
        params.u_d,
        params.u_p,
        params.u_pd,
        params.x_offdiag,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("non-finite surrogate parameter in {params:?}")));
    }
    if params.x_offdiag == 0.0 {
        log::warn!("x_offdiag = 0: surrogate interaction is purely density-density");
    }
    let mut h2 = DMatrix::zeros(4, 4);
    h2[(D1, D1)] = params.eps_d;
    h2[(D2, D2)] = params.eps_d;
    h2[(P1, P1)] = params.eps_p;
    h2[(P2, P2)] = params.eps_p;
    for (d, p) in DIMER_BONDS {
        h2[(d, p)] = -params.t_pd;
        h2[(p, d)] = -params.t_pd;
    }

    let mut v2 = TwoBody::zeros(4);
    for d in [D1, D2] {
        v2.set(d, d, d, d, params.u_d);
    }
    for p in [P1, P2] {
        v2.set(p, p, p, p, params.u_p);
    }
    for (d, p) in DIMER_BONDS {
        v2.set_sym(d, d, p, p, params.u_pd);
        v2.set_sym(d, p, d, p, params.x_offdiag);
    }
    DimerModel::new(h2, v2.symmetrized(), Provenance::Surrogate)
}

/// Electronic Hamiltonian of a chain in its orthonormal tight-binding basis
/// (or any rotation of it).
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub h: DMatrix<f64>,
    pub v: TwoBody,
    pub e_core: f64,
    pub spec: ChainSpec,
}

impl Hamiltonian {
    pub fn new(h: DMatrix<f64>, v: TwoBody, e_core: f64, spec: ChainSpec) -> Result<Self> {
        let n = spec.n_orb();
        if h.nrows() != n || h.ncols() != n || v.n() != n {
            return Err(Error::Dimension(format!(
                "integrals over {} orbitals do not match a {}-plaquette chain",
                h.nrows(),
                spec.plaquettes
            )));
        }
        Ok(Hamiltonian { h, v, e_core, spec })
    }

    pub fn n_orb(&self) -> usize {
        self.h.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        linalg::asymmetry(&self.h).max(self.v.max_asymmetry())
    }

    /// Copy with the interaction set to zero.
    pub fn noninteracting(&self) -> Hamiltonian {
        Hamiltonian {
            v: TwoBody::zeros(self.n_orb()),
            ..self.clone()
        }
    }

    /// Copy with every two-body entry that touches more than one plaquette
    /// set to zero. Only meaningful in the tight-binding frame.
    pub fn without_interplaquette_coulomb(&self) -> Hamiltonian {
        let n = self.n_orb();
        let mut v = self.v.clone();
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let c = self.spec.cell(p);
                        if [q, r, s].iter().any(|&o| self.spec.cell(o) != c) {
                            v.set(p, q, r, s, 0.0);
                        }
                    }
                }
            }
        }
        Hamiltonian { v, ..self.clone() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = IntegralsFile::load(path)?;
        let spec = file
            .chain
            .clone()
            .ok_or_else(|| Error::Parse("integrals file lacks a chain section".into()))?;
        let (h, v, e_core) = file.into_parts()?;
        Hamiltonian::new(h, v, e_core, spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        IntegralsFile::from_parts(&self.h, &self.v, self.e_core, Some(self.spec.clone())).save(path)
    }
}

/// Superposes the dimer on every adjacent plaquette pair, averaging entries
/// covered by several placements, then applies the screening and kinetic
/// scale factors.
pub fn extend_to_chain(dimer: &DimerModel, spec: &ChainSpec) -> Result<Hamiltonian> {
    spec.validate()?;
    let n_cells = spec.plaquettes;
    if n_cells < 2 {
        return Err(Error::Parameter(format!(
            "chain extension needs at least 2 plaquettes, got {n_cells}"
        )));
    }
    let n = spec.n_orb();

    // Local dimer index of a chain orbital in the placement starting at cell j.
    let local = |orb: usize, j: usize| -> Option<usize> {
        let c = orb / 2;
        (c == j || c == j + 1).then(|| orb - 2 * j)
    };

    let mut h = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let (mut sum, mut count) = (0.0, 0usize);
            for j in 0..n_cells - 1 {
                if let (Some(a), Some(b)) = (local(p, j), local(q, j)) {
                    sum += dimer.h2[(a, b)];
                    count += 1;
                }
            }
            if count > 0 {
                h[(p, q)] = spec.kinetic_scale * sum / count as f64;
            }
        }
    }

    let mut v = TwoBody::zeros(n);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let (mut sum, mut count) = (0.0, 0usize);
                    for j in 0..n_cells - 1 {
                        if let (Some(a), Some(b), Some(c), Some(d)) =
                            (local(p, j), local(q, j), local(r, j), local(s, j))
                        {
                            sum += dimer.v2.get(a, b, c, d);
                            count += 1;
                        }
                    }
                    if count == 0 {
                        continue;
                    }
                    let mut value = sum / count as f64;
                    let c0 = spec.cell(p);
                    if [q, r, s].iter().any(|&o| spec.cell(o) != c0) {
                        value *= spec.screening_factor;
                    }
                    v.set(p, q, r, s, value);
                }
            }
        }
    }
    Hamiltonian::new(h, v, 0.0, spec.clone())
}

/// Expresses `ham` in the orbital basis given by the columns of `u`.
pub fn rotate_integrals(ham: &Hamiltonian, u: &DMatrix<f64>) -> Result<Hamiltonian> {
    let n = ham.n_orb();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::Dimension(format!(
            "rotation is {}x{}, Hamiltonian has {n} orbitals",
            u.nrows(),
            u.ncols()
        )));
    }
    let deviation = linalg::orthogonality_deviation(u);
    if deviation > 1e-10 {
        return Err(Error::NotUnitary { deviation });
    }
    let h = u.transpose() * &ham.h * u;
    let h = (&h + h.transpose()) * 0.5;
    Ok(Hamiltonian {
        h,
        v: ham.v.transformed(u),
        e_core: ham.e_core,
        spec: ham.spec.clone(),
    })
}

/// On-disk layout of one- and two-body integrals (energies in eV).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegralsFile {
    pub n_orb: usize,
    /// Row-major `n_orb × n_orb`.
    pub h: Vec<f64>,
    /// Flat `[p][q][r][s]`.
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub e_core: f64,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSpec>,
}

impl IntegralsFile {
    pub fn from_parts(h: &DMatrix<f64>, v: &TwoBody, e_core: f64, chain: Option<ChainSpec>) -> Self {
        let n = h.nrows();
        IntegralsFile {
            n_orb: n,
            h: (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| h[(i, j)]).collect(),
            v: v.as_slice().to_vec(),
            e_core,
            units: "eV".into(),
            chain,
        }
    }

    pub fn into_parts(self) -> Result<(DMatrix<f64>, TwoBody, f64)> {
        if self.units != "eV" {
            return Err(Error::Parse(format!("unsupported units {:?}", self.units)));
        }
        let n = self.n_orb;
        if self.h.len() != n * n {
            return Err(Error::Dimension(format!("h needs {} entries, got {}", n * n, self.h.len())));
        }
        let h = DMatrix::from_row_slice(n, n, &self.h);
        let v = TwoBody::from_flat(n, self.v)?;
        Ok((h, v, self.e_core))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_spec() -> ChainSpec {
        ChainSpec::new(2).unwrap().with_factors(1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_integrals() {
        let dimer = surrogate_dimer(&SurrogateParams::zero()).unwrap();
        assert_eq!(dimer.h2.amax(), 0.0);
        assert_eq!(dimer.v2.amax(), 0.0);
    }

    #[test]
    fn hopping_only_dimer() {
        let params = SurrogateParams {
            t_pd: 1.3,
            ..SurrogateParams::zero()
        };
        let dimer = surrogate_dimer(&params).unwrap();
        for (d, p) in DIMER_BONDS {
            assert_eq!(dimer.h2[(d, p)], -1.3);
            assert_eq!(dimer.h2[(p, d)], -1.3);
        }
        assert_eq!(dimer.h2[(D1, D2)], 0.0);
        assert_eq!(dimer.h2[(P1, P2)], 0.0);
        assert_eq!(dimer.h2[(D1, P2)], 0.0);
        assert_eq!(dimer.v2.amax(), 0.0);
    }

    #[test]
    fn exchange_term_breaks_density_density_form() {
        let params = SurrogateParams {
            u_d: 8.0,
            x_offdiag: 0.5,
            ..SurrogateParams::zero()
        };
        let dimer = surrogate_dimer(&params).unwrap();
        assert_eq!(dimer.v2.get(D1, D1, D1, D1), 8.0);
        assert!((dimer.v2.density_density_residual() - 0.5).abs() < 1e-15);
        // Without the exchange term only (pp|qq) entries remain.
        let dd = surrogate_dimer(&SurrogateParams {
            x_offdiag: 0.0,
            ..params
        })
        .unwrap();
        assert_eq!(dd.v2.density_density_residual(), 0.0);
    }

    #[test]
    fn non_finite_parameter_is_rejected() {
        let params = SurrogateParams {
            u_p: f64::NAN,
            ..SurrogateParams::default()
        };
        assert!(matches!(surrogate_dimer(&params), Err(Error::Parameter(_))));
    }

    #[test]
    fn default_surrogate_is_symmetric() {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        assert!(dimer.v2.max_asymmetry() < SYMMETRY_TOL);
        assert!(dimer.v2.density_density_residual() > 0.0);
    }

    #[test]
    fn two_plaquette_chain_is_the_dimer() {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        let ham = extend_to_chain(&dimer, &identity_spec()).unwrap();
        assert_eq!(ham.h, dimer.h2);
        assert_eq!(ham.v, dimer.v2);
        assert_eq!(ham.e_core, 0.0);
    }

    #[test]
    fn kinetic_scale_multiplies_every_one_body_entry() {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        let spec = ChainSpec::new(2).unwrap().with_factors(1.0, 0.7).unwrap();
        let ham = extend_to_chain(&dimer, &spec).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((ham.h[(i, j)] - 0.7 * dimer.h2[(i, j)]).abs() < 1e-15);
            }
        }
    }

    /// Dimer whose two plaquettes carry different intra-plaquette terms, so
    /// the averaging rule is visible.
    fn asymmetric_dimer() -> DimerModel {
        let mut h2 = DMatrix::zeros(4, 4);
        for (i, e) in [1.0, -2.0, 3.0, -4.0].into_iter().enumerate() {
            h2[(i, i)] = e;
        }
        h2[(0, 1)] = -1.0;
        h2[(1, 0)] = -1.0;
        h2[(1, 2)] = -1.5;
        h2[(2, 1)] = -1.5;
        let mut v2 = TwoBody::zeros(4);
        v2.set(0, 0, 0, 0, 6.0);
        v2.set(2, 2, 2, 2, 10.0);
        v2.set_sym(0, 1, 0, 1, 0.3);
        v2.set_sym(2, 3, 2, 3, 0.7);
        v2.set_sym(0, 0, 2, 2, 2.0);
        v2.set_sym(1, 1, 2, 2, 1.2);
        DimerModel::new(h2, v2, Provenance::File).unwrap()
    }

    #[test]
    fn four_plaquette_averaging_by_placement() {
        let dimer = asymmetric_dimer();
        let spec = ChainSpec::new(4).unwrap().with_factors(0.5, 1.0).unwrap();
        let ham = extend_to_chain(&dimer, &spec).unwrap();
        // Hand enumeration: placements (0,1), (1,2), (2,3). Interior plaquette 1
        // is the second cell of placement 0 and the first cell of placement 1.
        let d1 = 2;
        let p1 = 3;
        assert!((ham.v.get(d1, d1, d1, d1) - (10.0 + 6.0) / 2.0).abs() < 1e-14);
        assert!((ham.v.get(d1, p1, d1, p1) - (0.7 + 0.3) / 2.0).abs() < 1e-14);
        // Terminal plaquettes are covered once.
        assert!((ham.v.get(0, 0, 0, 0) - 6.0).abs() < 1e-14);
        assert!((ham.v.get(6, 6, 6, 6) - 10.0).abs() < 1e-14);
        // Inter-plaquette terms are screened; only plaquettes (j, j+1) couple.
        assert!((ham.v.get(0, 0, 2, 2) - 0.5 * 2.0).abs() < 1e-14);
        assert!((ham.v.get(3, 3, 4, 4) - 0.5 * 1.2).abs() < 1e-14);
        assert_eq!(ham.v.get(0, 0, 4, 4), 0.0);
        // One-body: diagonal of interior d averages d1 and d2 energies.
        assert!((ham.h[(2, 2)] - 2.0).abs() < 1e-14);
        assert!((ham.h[(3, 3)] - (-3.0)).abs() < 1e-14);
        assert_eq!(ham.h[(0, 4)], 0.0);
        assert!(ham.max_asymmetry() < SYMMETRY_TOL);
    }

    #[test]
    fn short_chain_is_rejected() {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        let spec = ChainSpec::with_electrons(1, 1, 1).unwrap();
        assert!(extend_to_chain(&dimer, &spec).is_err());
    }

    #[test]
    fn odd_length_needs_explicit_filling() {
        assert!(ChainSpec::new(3).is_err());
        assert!(ChainSpec::with_electrons(3, 5, 4).is_ok());
        assert!(ChainSpec::with_electrons(3, 7, 4).is_err());
        assert!(ChainSpec::new(2).unwrap().with_factors(0.0, 1.0).is_err());
    }

    #[test]
    fn identity_and_permutation_rotations() {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        let ham = extend_to_chain(&dimer, &ChainSpec::new(2).unwrap()).unwrap();
        let same = rotate_integrals(&ham, &DMatrix::identity(4, 4)).unwrap();
        assert!((same.h.clone() - &ham.h).amax() < 1e-15);
        assert!(same.v.as_slice().iter().zip(ham.v.as_slice()).all(|(a, b)| (a - b).abs() < 1e-15));

        let perm = [2usize, 0, 3, 1];
        let mut u = DMatrix::zeros(4, 4);
        for (new, &old) in perm.iter().enumerate() {
            u[(old, new)] = 1.0;
        }
        let r = rotate_integrals(&ham, &u).unwrap();
        for p in 0..4 {
            for q in 0..4 {
                assert_eq!(r.h[(p, q)], ham.h[(perm[p], perm[q])]);
                for a in 0..4 {
                    for b in 0..4 {
                        assert_eq!(r.v.get(p, q, a, b), ham.v.get(perm[p], perm[q], perm[a], perm[b]));
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_keeps_symmetry_and_rejects_non_unitary() {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        let ham = extend_to_chain(&dimer, &ChainSpec::new(4).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = linalg::random_orthogonal(8, &mut rng);
        let r = rotate_integrals(&ham, &u).unwrap();
        assert!(r.max_asymmetry() < SYMMETRY_TOL);
        let bad = &u * 1.01;
        assert!(matches!(rotate_integrals(&ham, &bad), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn integrals_file_round_trip() {
        let dimer = surrogate_dimer(&SurrogateParams::default()).unwrap();
        let ham = extend_to_chain(&dimer, &ChainSpec::new(2).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        ham.save(&path).unwrap();
        let back = Hamiltonian::load(&path).unwrap();
        assert_eq!(back.h, ham.h);
        assert_eq!(back.v, ham.v);
        assert_eq!(back.spec, ham.spec);

        let dpath = dir.path().join("dimer.json");
        dimer.save(&dpath).unwrap();
        let d2 = DimerModel::load(&dpath).unwrap();
        assert_eq!(d2.provenance, Provenance::File);
        assert_eq!(d2.v2, dimer.v2);
    }
}
