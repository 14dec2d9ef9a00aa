//! Unitary cluster-Jastrow parameters from doubles amplitudes, local
//! pruning, and circuit synthesis.
//!
//! A parameter set describes `𝒰(F) Π_k 𝒰(U_k) e^{iΦ_k} 𝒰(U_k)†` acting on a
//! reference determinant, where `𝒰(U)` maps `a†_p → Σ_q U_qp a†_q` on both
//! spins and `Φ_k = ½ Σ_{στ} Σ_pq Z^{στ}_pq n_pσ n_qτ` with `Z^{σσ} = J_same`
//! and `Z^{στ} = J_opp` for `σ ≠ τ`.

mod circuit;

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use circuit::{gate_census, givens_decomposition, Circuit, Gate, GateCensus, Givens, GivensNetwork};

use crate::error::{Error, Result};
use crate::fock::Determinant;
use crate::linalg;
use crate::orbitals::T2Amplitudes;

#[derive(Debug, Clone, PartialEq)]
pub struct UcjLayer {
    pub rotation: DMatrix<f64>,
    pub j_same: DMatrix<f64>,
    pub j_opp: DMatrix<f64>,
}

impl UcjLayer {
    pub fn identity(n: usize) -> Self {
        UcjLayer {
            rotation: DMatrix::identity(n, n),
            j_same: DMatrix::zeros(n, n),
            j_opp: DMatrix::zeros(n, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcjParams {
    pub layers: Vec<UcjLayer>,
    pub final_rotation: DMatrix<f64>,
    /// Set once parameters have been pruned; CP slots outside it do not exist.
    pub topology: Option<Topology>,
}

impl UcjParams {
    pub fn r(&self) -> usize {
        self.layers.len()
    }

    pub fn n_orb(&self) -> usize {
        self.final_rotation.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_orb();
        for (k, layer) in self.layers.iter().enumerate() {
            for m in [&layer.rotation, &layer.j_same, &layer.j_opp] {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::Dimension(format!("layer {k} has a matrix that is not {n}×{n}")));
                }
            }
            let deviation = linalg::orthogonality_deviation(&layer.rotation);
            if deviation > 1e-10 {
                return Err(Error::NotUnitary { deviation });
            }
            if linalg::asymmetry(&layer.j_same) > 1e-12 || linalg::asymmetry(&layer.j_opp) > 1e-12 {
                return Err(Error::Parameter(format!("layer {k} has non-symmetric phase matrices")));
            }
        }
        let deviation = linalg::orthogonality_deviation(&self.final_rotation);
        if deviation > 1e-10 {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&ParamsFile::from(self))?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    shape: [usize; 2],
    /// Row-major.
    data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        MatrixJson {
            shape: [m.nrows(), m.ncols()],
            data: m.transpose().iter().copied().collect(),
        }
    }
}

impl TryFrom<MatrixJson> for DMatrix<f64> {
    type Error = Error;
    fn try_from(m: MatrixJson) -> Result<Self> {
        let [r, c] = m.shape;
        if m.data.len() != r * c {
            return Err(Error::Dimension(format!("shape {:?} needs {} entries, got {}", m.shape, r * c, m.data.len())));
        }
        Ok(DMatrix::from_row_slice(r, c, &m.data))
    }
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    rotation: MatrixJson,
    j_same: MatrixJson,
    j_opp: MatrixJson,
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    n_orb: usize,
    r: usize,
    layers: Vec<LayerJson>,
    final_rotation: MatrixJson,
    #[serde(default)]
    topology: Option<Topology>,
}

impl From<&UcjParams> for ParamsFile {
    fn from(p: &UcjParams) -> Self {
        ParamsFile {
            n_orb: p.n_orb(),
            r: p.r(),
            layers: p
                .layers
                .iter()
                .map(|l| LayerJson {
                    rotation: (&l.rotation).into(),
                    j_same: (&l.j_same).into(),
                    j_opp: (&l.j_opp).into(),
                })
                .collect(),
            final_rotation: (&p.final_rotation).into(),
            topology: p.topology.clone(),
        }
    }
}

impl TryFrom<ParamsFile> for UcjParams {
    type Error = Error;
    fn try_from(f: ParamsFile) -> Result<Self> {
        if f.r != f.layers.len() {
            return Err(Error::Dimension(format!("r = {} but {} layers given", f.r, f.layers.len())));
        }
        let layers = f
            .layers
            .into_iter()
            .map(|l| {
                Ok(UcjLayer {
                    rotation: l.rotation.try_into()?,
                    j_same: l.j_same.try_into()?,
                    j_opp: l.j_opp.try_into()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = UcjParams {
            layers,
            final_rotation: f.final_rotation.try_into()?,
            topology: f.topology,
        };
        if p.n_orb() != f.n_orb {
            return Err(Error::Dimension(format!("n_orb = {} but matrices are {}×{}", f.n_orb, p.n_orb(), p.n_orb())));
        }
        p.validate()?;
        Ok(p)
    }
}

/// Relative cutoff below which eigenvalues count as zero in the factorization.
const RANK_TOL: f64 = 1e-12;

/// Double factorization of the doubles amplitudes.
///
/// `T[(i,a),(j,b)] = t2[i,j,a,b]` is real symmetric; each eigenpair
/// `(λ_k, v_k)` (largest `|λ|` first) becomes the symmetric one-body matrix
/// `X_k` with `X[i,a] = X[a,i] = v_k(i,a)`. Writing `X_k = U_k diag(x) U_kᵀ`,
/// both phase matrices are `λ_k x xᵀ`, so that
/// `Σ_pq J_pq U_ip U_ap U_jq U_bq = λ_k X[i,a] X[j,b]`.
pub fn from_t_amplitudes(t2: &T2Amplitudes, r: usize, final_rotation: Option<&DMatrix<f64>>) -> Result<UcjParams> {
    if r == 0 {
        return Err(Error::Parameter("expansion order must be at least 1".into()));
    }
    if t2.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("t2 contains non-finite entries".into()));
    }
    let (no, nv) = (t2.n_occ, t2.n_virt);
    let n = no + nv;
    let final_rotation = match final_rotation {
        Some(f) => {
            if f.nrows() != n || f.ncols() != n {
                return Err(Error::Dimension(format!("final rotation must be {n}×{n}")));
            }
            f.clone()
        }
        None => DMatrix::identity(n, n),
    };

    let dim = no * nv;
    let t = DMatrix::from_fn(dim, dim, |row, col| {
        let (i, a) = (row / nv, row % nv);
        let (j, b) = (col / nv, col % nv);
        t2.get(i, j, a, b)
    });
    let (w, v) = linalg::eigh(&t);
    let mut order: Vec<usize> = (0..dim).collect();
    // Stable on ties, so equal magnitudes keep ascending-eigenvalue order.
    order.sort_by(|&a, &b| w[b].abs().partial_cmp(&w[a].abs()).unwrap());
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut layers = Vec::with_capacity(r);
    for &k in order.iter().take(r) {
        let lambda = w[k];
        if scale == 0.0 || lambda.abs() <= RANK_TOL * scale {
            layers.push(UcjLayer::identity(n));
            continue;
        }
        let mut x = DMatrix::zeros(n, n);
        for i in 0..no {
            for a in 0..nv {
                x[(i, no + a)] = v[(i * nv + a, k)];
                x[(no + a, i)] = v[(i * nv + a, k)];
            }
        }
        let (mut xv, u) = linalg::eigh(&x);
        let xmax = xv.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        xv.iter_mut().for_each(|e| {
            if e.abs() <= RANK_TOL * xmax {
                *e = 0.0;
            }
        });
        let j = &xv * xv.transpose() * lambda;
        layers.push(UcjLayer {
            rotation: u,
            j_same: j.clone(),
            j_opp: j,
        });
    }
    while layers.len() < r {
        layers.push(UcjLayer::identity(n));
    }
    Ok(UcjParams {
        layers,
        final_rotation,
        topology: None,
    })
}

/// Numerical rank of the amplitude matrix `T`.
pub fn amplitude_rank(t2: &T2Amplitudes) -> usize {
    let nv = t2.n_virt;
    let dim = t2.n_occ * nv;
    let t = DMatrix::from_fn(dim, dim, |row, col| t2.get(row / nv, col / nv, row % nv, col % nv));
    let (w, _) = linalg::eigh(&t);
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    w.iter().filter(|x| scale > 0.0 && x.abs() > RANK_TOL * scale).count()
}

/// The doubles amplitudes induced by the opposite-spin phases of `p`.
pub fn reconstruct_t2(p: &UcjParams, n_occ: usize) -> T2Amplitudes {
    let n = p.n_orb();
    let nv = n - n_occ;
    let mut t2 = T2Amplitudes::zeros(n_occ, nv, crate::orbitals::AmplitudeSource::Mp2);
    for layer in &p.layers {
        let u = &layer.rotation;
        // A[i,a,q] = Σ_p J[p,q] U_ip U_ap, then contract with U_jq U_bq.
        for i in 0..n_occ {
            for a in 0..nv {
                let mut aq = vec![0.0; n];
                for (q, slot) in aq.iter_mut().enumerate() {
                    *slot = (0..n)
                        .map(|pp| layer.j_opp[(pp, q)] * u[(i, pp)] * u[(n_occ + a, pp)])
                        .sum();
                }
                for j in 0..n_occ {
                    for b in 0..nv {
                        let s: f64 = (0..n).map(|q| aq[q] * u[(j, q)] * u[(n_occ + b, q)]).sum();
                        let old = t2.get(i, j, a, b);
                        t2.set(i, j, a, b, old + s);
                    }
                }
            }
        }
    }
    t2
}

/// Frobenius norm of `t2 − reconstruct_t2(p)`.
pub fn reconstruction_residual(t2: &T2Amplitudes, p: &UcjParams) -> f64 {
    let rec = reconstruct_t2(p, t2.n_occ);
    t2.as_slice()
        .iter()
        .zip(rec.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Allowed phase couplings. Pairs are stored with the smaller index first;
/// same-spin self-pairs are not CP slots (they become single-qubit phases
/// and are never pruned).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    pub n_orb: usize,
    pub same_spin_edges: BTreeSet<(usize, usize)>,
    pub opp_spin_edges: BTreeSet<(usize, usize)>,
}

fn ordered(p: usize, q: usize) -> (usize, usize) {
    (p.min(q), p.max(q))
}

impl Topology {
    pub fn new(
        name: impl Into<String>,
        n_orb: usize,
        same: impl IntoIterator<Item = (usize, usize)>,
        opp: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let check = |(p, q): (usize, usize)| {
            if p >= n_orb || q >= n_orb {
                Err(Error::Parameter(format!("edge ({p}, {q}) outside 0..{n_orb}")))
            } else {
                Ok(ordered(p, q))
            }
        };
        let same_spin_edges = same
            .into_iter()
            .map(check)
            .collect::<Result<BTreeSet<_>>>()?
            .into_iter()
            .filter(|(p, q)| p != q)
            .collect();
        let opp_spin_edges = opp.into_iter().map(check).collect::<Result<BTreeSet<_>>>()?;
        Ok(Topology {
            name: name.into(),
            n_orb,
            same_spin_edges,
            opp_spin_edges,
        })
    }

    pub fn complete(n: usize) -> Self {
        let same: Vec<_> = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).collect();
        let opp: Vec<_> = (0..n).flat_map(|p| (p..n).map(move |q| (p, q))).collect();
        Topology::new("complete", n, same, opp).unwrap()
    }

    pub fn empty(n: usize) -> Self {
        Topology::new("empty", n, [], []).unwrap()
    }

    /// Nearest-neighbour same-spin couplings and on-site α–β couplings on
    /// every fourth orbital.
    pub fn line(n: usize) -> Self {
        let same: Vec<_> = (0..n.saturating_sub(1)).map(|p| (p, p + 1)).collect();
        let opp: Vec<_> = (0..n).step_by(4).map(|p| (p, p)).collect();
        Topology::new("line", n, same, opp).unwrap()
    }

    pub fn by_name(name: &str, n: usize) -> Result<Self> {
        match name {
            "line" => Ok(Topology::line(n)),
            "complete" => Ok(Topology::complete(n)),
            "empty" => Ok(Topology::empty(n)),
            other => Err(Error::Parameter(format!("unknown topology {other:?} (line, complete, empty)"))),
        }
    }

    pub fn allows_same(&self, p: usize, q: usize) -> bool {
        p == q || self.same_spin_edges.contains(&ordered(p, q))
    }

    pub fn allows_opp(&self, p: usize, q: usize) -> bool {
        self.opp_spin_edges.contains(&ordered(p, q))
    }
}

pub fn prune_to_topology(p: &UcjParams, topo: &Topology) -> Result<UcjParams> {
    let n = p.n_orb();
    if topo.n_orb != n {
        return Err(Error::Dimension(format!("topology over {} orbitals, parameters over {n}", topo.n_orb)));
    }
    let mut out = p.clone();
    for layer in &mut out.layers {
        for a in 0..n {
            for b in 0..n {
                if !topo.allows_same(a, b) {
                    layer.j_same[(a, b)] = 0.0;
                }
                if !topo.allows_opp(a, b) {
                    layer.j_opp[(a, b)] = 0.0;
                }
            }
        }
    }
    out.topology = Some(match &p.topology {
        // Pruning twice keeps only couplings allowed by both.
        Some(prev) => Topology {
            name: topo.name.clone(),
            n_orb: n,
            same_spin_edges: prev.same_spin_edges.intersection(&topo.same_spin_edges).copied().collect(),
            opp_spin_edges: prev.opp_spin_edges.intersection(&topo.opp_spin_edges).copied().collect(),
        },
        None => topo.clone(),
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// CP and phase gates with smaller |angle| are dropped; exact zeros
    /// are always dropped.
    pub angle_epsilon: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { angle_epsilon: 0.0 }
    }
}

fn keep(angle: f64, eps: f64) -> bool {
    angle != 0.0 && angle.abs() >= eps
}

/// Gate sequence for the parameter set acting on `reference`.
pub fn synthesize_circuit(p: &UcjParams, reference: Determinant, opts: &SynthesisOptions) -> Result<Circuit> {
    p.validate()?;
    let n = p.n_orb();
    let outside = !crate::fock::low_mask(n);
    if reference.alpha & outside != 0 || reference.beta & outside != 0 {
        return Err(Error::Dimension(format!("reference {reference} does not fit in {n} orbitals")));
    }
    let mut c = Circuit::new(2 * n);
    for q in crate::fock::occupied(reference.to_bitstring(n)) {
        c.push(Gate::X(q))?;
    }
    let eps = opts.angle_epsilon;
    for layer in &p.layers {
        let net = givens_decomposition(&layer.rotation)?;
        for offset in [0, n] {
            for g in net.inverse_gates(offset) {
                c.push(g)?;
            }
        }
        for offset in [0, n] {
            for a in 0..n {
                let phi = 0.5 * layer.j_same[(a, a)];
                if keep(phi, eps) {
                    c.push(Gate::Phase { q: offset + a, phi })?;
                }
            }
            for a in 0..n {
                for b in a + 1..n {
                    let phi = layer.j_same[(a, b)];
                    if keep(phi, eps) {
                        c.push(Gate::CPhase {
                            a: offset + a,
                            b: offset + b,
                            phi,
                        })?;
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let phi = layer.j_opp[(a, b)];
                if keep(phi, eps) {
                    c.push(Gate::CPhase { a, b: n + b, phi })?;
                }
            }
        }
        for offset in [0, n] {
            for g in net.gates(offset) {
                c.push(g)?;
            }
        }
    }
    let net = givens_decomposition(&p.final_rotation)?;
    for offset in [0, n] {
        for g in net.gates(offset) {
            c.push(g)?;
        }
    }
    Ok(c)
}

/// `r·(2·2·Givens(U_k)) + 2·Givens(F)` rotations plus one CP per nonzero
/// coupling — the census a synthesized circuit must reproduce at zero
/// angle cutoff.
pub fn expected_two_qubit_count(p: &UcjParams) -> Result<usize> {
    let n = p.n_orb();
    let mut total = 2 * givens_decomposition(&p.final_rotation)?.len();
    for layer in &p.layers {
        total += 4 * givens_decomposition(&layer.rotation)?.len();
        for a in 0..n {
            for b in 0..n {
                if a < b && layer.j_same[(a, b)] != 0.0 {
                    total += 2;
                }
                if layer.j_opp[(a, b)] != 0.0 {
                    total += 1;
                }
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpHistogram {
    /// `bins + 1` edges on `[0, max |φ|]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Fraction of CP slots with |φ| below 1% of the largest |φ|.
    pub low_fraction: f64,
}

/// Histogram of |φ| over every CP slot: same-spin pairs `p < q` in each
/// register and all α–β pairs, restricted to the pruning topology if any.
/// Slots whose angle is zero are counted in the first bin.
pub fn cp_histogram(p: &UcjParams, bins: usize) -> Result<CpHistogram> {
    if bins < 2 {
        return Err(Error::Parameter("cp_histogram needs at least 2 bins".into()));
    }
    let n = p.n_orb();
    let topo = p.topology.clone().unwrap_or_else(|| Topology::complete(n));
    let mut values = Vec::new();
    for layer in &p.layers {
        for a in 0..n {
            for b in 0..n {
                if a < b && topo.allows_same(a, b) {
                    let v = layer.j_same[(a, b)].abs();
                    values.push(v);
                    values.push(v);
                }
                if topo.allows_opp(a, b) {
                    values.push(layer.j_opp[(a, b)].abs());
                }
            }
        }
    }
    let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 / bins as f64 };
    let edges = (0..=bins).map(|k| k as f64 * width).collect();
    let mut counts = vec![0; bins];
    for &v in &values {
        let k = ((v / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let low = values.iter().filter(|&&v| max == 0.0 || v < 0.01 * max).count();
    let low_fraction = if values.is_empty() { 0.0 } else { low as f64 / values.len() as f64 };
    Ok(CpHistogram {
        edges,
        counts,
        low_fraction,
    })
}
