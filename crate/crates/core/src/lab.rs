//! Experiment driver: the sample-then-diagonalize pipeline from integrals to
//! convergence curves, plus the analysis helpers applied to its output.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::fock::Determinant;
use crate::mitigate::{self, Mitigation};
use crate::model::{self, ChainSpec, DimerModel, Hamiltonian, IntegralsFile, SurrogateParams};
use crate::orbitals::{self, BasisKind, OrbitalBasis, ScfOptions};
use crate::qsim::{self, NoiseCalibration, SampleSet};
use crate::sci::{self, DeterminantBasis, GroundState};
use crate::ucj::{self, GateCensus, SynthesisOptions, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Sample the exact ground-state distribution.
    #[serde(rename = "IDEAL_SQD")]
    IdealSqd,
    #[serde(rename = "UCJ")]
    Ucj,
    #[serde(rename = "LUCJ")]
    Lucj,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::IdealSqd => "IDEAL_SQD",
            Method::Ucj => "UCJ",
            Method::Lucj => "LUCJ",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "IDEAL_SQD" | "IDEAL" => Ok(Method::IdealSqd),
            "UCJ" => Ok(Method::Ucj),
            "LUCJ" => Ok(Method::Lucj),
            other => Err(Error::Parse(format!("unknown method {other:?} (IDEAL_SQD, UCJ, LUCJ)"))),
        }
    }
}

/// Chain geometry; electron counts default to the 3L/2-per-spin filling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub plaquettes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_up: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_down: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinetic_scale: Option<f64>,
}

impl ChainConfig {
    pub fn new(plaquettes: usize) -> Self {
        ChainConfig {
            plaquettes,
            n_up: None,
            n_down: None,
            screening_factor: None,
            kinetic_scale: None,
        }
    }

    pub fn to_spec(&self) -> Result<ChainSpec> {
        let mut spec = match (self.n_up, self.n_down) {
            (None, None) => ChainSpec::new(self.plaquettes)?,
            (up, down) => {
                let half = 3 * self.plaquettes / 2;
                ChainSpec::with_electrons(self.plaquettes, up.unwrap_or(half), down.unwrap_or(half))?
            }
        };
        if let Some(s) = self.screening_factor {
            spec.screening_factor = s;
        }
        if let Some(k) = self.kinetic_scale {
            spec.kinetic_scale = k;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Explicit flip probability; calibrated from `target_correct_fraction`
    /// when absent.
    #[serde(default)]
    pub p_flip: Option<f64>,
    #[serde(default = "default_correct_fraction")]
    pub target_correct_fraction: f64,
    #[serde(default)]
    pub mitigation: Mitigation,
}

fn default_correct_fraction() -> f64 {
    0.35
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_flip: None,
            target_correct_fraction: default_correct_fraction(),
            mitigation: Mitigation::Recover,
        }
    }
}

/// Shots at every half decade from 10¹ to 10^5.5.
pub fn default_shot_schedule() -> Vec<f64> {
    (2..=11).map(|k| 10f64.powf(k as f64 / 2.0)).collect()
}

fn default_master_shots() -> u64 {
    10f64.powf(6.5).round() as u64
}

fn default_batches() -> usize {
    10
}

fn default_accuracy() -> f64 {
    0.027
}

fn default_r() -> usize {
    1
}

fn default_topology() -> String {
    "line".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub chain: ChainConfig,
    #[serde(default)]
    pub surrogate: SurrogateParams,
    /// Dimer integral file to tile instead of the surrogate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimer_integrals: Option<String>,
    /// Full chain integral file, used as-is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrals: Option<String>,
    #[serde(default = "default_basis")]
    pub basis_kind: BasisKind,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_topology")]
    pub topology: String,
    #[serde(default = "default_shot_schedule")]
    pub shots: Vec<f64>,
    #[serde(default = "default_master_shots")]
    pub master_shots: u64,
    /// Resampled batches per shot count for the energy column; 0 skips the
    /// selected-CI energies.
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_accuracy")]
    pub chemical_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

fn default_basis() -> BasisKind {
    BasisKind::Hf
}

fn default_method() -> Method {
    Method::IdealSqd
}

impl ExperimentConfig {
    pub fn new(plaquettes: usize, method: Method) -> Self {
        ExperimentConfig {
            chain: ChainConfig::new(plaquettes),
            surrogate: SurrogateParams::default(),
            dimer_integrals: None,
            integrals: None,
            basis_kind: default_basis(),
            method,
            r: default_r(),
            topology: default_topology(),
            shots: default_shot_schedule(),
            master_shots: default_master_shots(),
            batches: default_batches(),
            seed: 0,
            chemical_accuracy: default_accuracy(),
            noise: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.to_spec()?;
        if self.shots.is_empty() {
            return Err(Error::Parameter("shot schedule is empty".into()));
        }
        if self.shots.iter().any(|&s| !(s >= 1.0 && s.is_finite())) {
            return Err(Error::Parameter("shot counts must be finite and at least 1".into()));
        }
        if self.shots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("shot schedule must be strictly ascending".into()));
        }
        if self.master_shots == 0 {
            return Err(Error::Parameter("master_shots must be at least 1".into()));
        }
        if !(self.chemical_accuracy > 0.0) {
            return Err(Error::Parameter("chemical_accuracy must be positive".into()));
        }
        if self.r == 0 {
            return Err(Error::Parameter("r must be at least 1".into()));
        }
        if let Some(noise) = &self.noise {
            if let Some(p) = noise.p_flip {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Parameter(format!("p_flip = {p} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Chain Hamiltonian in the tight-binding frame.
pub fn build_hamiltonian(cfg: &ExperimentConfig) -> Result<Hamiltonian> {
    let spec = cfg.chain.to_spec()?;
    if let Some(path) = &cfg.integrals {
        let file = IntegralsFile::load(path)?;
        let (h, v, e_core) = file.into_parts()?;
        return Hamiltonian::new(h, v, e_core, spec);
    }
    let dimer = match &cfg.dimer_integrals {
        Some(path) => DimerModel::load(path)?,
        None => model::surrogate_dimer(&cfg.surrogate)?,
    };
    model::extend_to_chain(&dimer, &spec)
}

/// Hartree–Fock orbitals plus the orbitals of the requested kind.
pub fn orbital_bases(ham: &Hamiltonian, kind: BasisKind) -> Result<(OrbitalBasis, OrbitalBasis)> {
    let spec = &ham.spec;
    let hf = orbitals::solve_hf(ham, spec.n_up, spec.n_down, &ScfOptions::default())?.basis;
    let chosen = match kind {
        BasisKind::Hf => hf.clone(),
        BasisKind::Kin => orbitals::kinetic_basis(ham)?,
        BasisKind::Hfplus => orbitals::hfplus_basis(ham, &hf)?.0,
    };
    Ok((hf, chosen))
}

/// Everything about a chain that does not depend on the sampling method.
pub struct Prepared {
    pub spec: ChainSpec,
    pub ham: Hamiltonian,
    pub hf: OrbitalBasis,
    pub basis: OrbitalBasis,
    /// The Hamiltonian in `basis`.
    pub mo: Hamiltonian,
    /// Exact ground state of `mo`.
    pub fci: GroundState,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let ham = build_hamiltonian(cfg).stage("model")?;
        let spec = ham.spec.clone();
        let (hf, basis) = orbital_bases(&ham, cfg.basis_kind).stage("orbitals")?;
        let mo = model::rotate_integrals(&ham, &basis.coeffs).stage("orbitals")?;
        log::info!("FCI over {} determinants", sci::sector_dimension(spec.n_orb(), spec.n_up, spec.n_down));
        let fci = sci::fci_ground_state(&mo, spec.n_up, spec.n_down).stage("fci")?;
        Ok(Prepared {
            spec,
            ham,
            hf,
            basis,
            mo,
            fci,
        })
    }
}

/// Cluster-Jastrow parameters for `cfg.method` measured in `basis`.
/// Amplitudes come from MP2 on the HF reference; the final rotation maps HF
/// orbitals onto the measurement orbitals.
pub fn ansatz_params(
    cfg: &ExperimentConfig,
    ham: &Hamiltonian,
    hf: &OrbitalBasis,
    basis: &OrbitalBasis,
) -> Result<ucj::UcjParams> {
    let n = ham.n_orb();
    let t2 = orbitals::compute_t2(ham, hf, ham.spec.n_up).stage("ucj")?;
    let final_rotation: DMatrix<f64> = match cfg.basis_kind {
        BasisKind::Hf => DMatrix::identity(n, n),
        _ => basis.coeffs.transpose() * &hf.coeffs,
    };
    let mut params = ucj::from_t_amplitudes(&t2, cfg.r, Some(&final_rotation)).stage("ucj")?;
    if cfg.method == Method::Lucj {
        let topo = Topology::by_name(&cfg.topology, n).stage("ucj")?;
        params = ucj::prune_to_topology(&params, &topo).stage("ucj")?;
    }
    Ok(params)
}

fn circuit_for(cfg: &ExperimentConfig, ham: &Hamiltonian, hf: &OrbitalBasis, basis: &OrbitalBasis) -> Result<ucj::Circuit> {
    let params = ansatz_params(cfg, ham, hf, basis)?;
    let reference = Determinant::reference(ham.spec.n_up, ham.spec.n_down);
    ucj::synthesize_circuit(&params, reference, &SynthesisOptions::default()).stage("ucj")
}

pub fn build_circuit(cfg: &ExperimentConfig, prep: &Prepared) -> Result<ucj::Circuit> {
    circuit_for(cfg, &prep.ham, &prep.hf, &prep.basis)
}

/// The distribution measured at the end of the circuit (or the exact one
/// for ideal sampling), with the gate census when a circuit exists.
pub fn sampling_distribution(
    cfg: &ExperimentConfig,
    prep: &Prepared,
) -> Result<(Vec<Determinant>, Vec<f64>, Option<GateCensus>)> {
    match cfg.method {
        Method::IdealSqd => {
            let probs = prep.fci.vector.iter().map(|c| c * c).collect();
            Ok((prep.fci.basis.dets().to_vec(), probs, None))
        }
        Method::Ucj | Method::Lucj => {
            let circuit = build_circuit(cfg, prep)?;
            let census = ucj::gate_census(&circuit);
            let state = qsim::simulate_sector(&circuit, prep.spec.n_up, prep.spec.n_down).stage("simulate")?;
            Ok((state.determinants(), state.probabilities(), Some(census)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub shots: f64,
    pub f_expected: f64,
    pub unique_expected: f64,
    pub e_err_mean: f64,
    pub e_err_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub calibration: NoiseCalibration,
    /// Correct-number fraction actually observed in the master run.
    pub observed_correct_fraction: f64,
    pub mitigation: Mitigation,
    pub raw_unique: usize,
    pub mitigated_unique: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub noise: u64,
    pub mitigation: u64,
    pub batches: u64,
}

impl Seeds {
    pub fn derive(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Seeds {
            master: rng.random(),
            noise: rng.random(),
            mitigation: rng.random(),
            batches: rng.random(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    pub fci_energy: f64,
    pub sector_dimension: usize,
    pub census: Option<GateCensus>,
    pub noise: Option<NoiseReport>,
    /// Sector-valid distinct determinants in the (mitigated) master run.
    pub master_unique: usize,
    pub curve: ConvergenceCurve,
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<RunReport> {
    let prep = Prepared::new(cfg)?;
    run_convergence_prepared(cfg, &prep)
}

/// Runs the sampling part of the pipeline on an already prepared chain. The
/// chain and basis settings of `cfg` must match those used for `prep`.
pub fn run_convergence_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<RunReport> {
    cfg.validate()?;
    let spec = &prep.spec;
    let (n, n_up, n_down) = (spec.n_orb(), spec.n_up, spec.n_down);
    let seeds = Seeds::derive(cfg.seed);

    let (dets, probs, census) = sampling_distribution(cfg, prep)?;
    let mut master = qsim::sample_distribution(&dets, &probs, n, cfg.master_shots, seeds.master).stage("sample")?;

    let mut noise_report = None;
    if let Some(noise) = &cfg.noise {
        let calibration = match noise.p_flip {
            Some(p) => NoiseCalibration {
                p_flip: p,
                correct_fraction: qsim::correct_number_probability(n, n_up, n_down, p),
                error_free_fraction: (1.0 - p).powi(2 * n as i32),
            },
            None => qsim::calibrate_noise(n, n_up, n_down, noise.target_correct_fraction).stage("noise")?,
        };
        let noisy = qsim::apply_bitflip_noise(&master, calibration.p_flip, seeds.noise).stage("noise")?;
        let observed = noisy.correct_number_fraction(n_up, n_down);
        let mitigated =
            mitigate::mitigate(&noisy, noise.mitigation, n_up, n_down, seeds.mitigation).stage("mitigate")?;
        noise_report = Some(NoiseReport {
            calibration,
            observed_correct_fraction: observed,
            mitigation: noise.mitigation,
            raw_unique: noisy.determinants(n_up, n_down).len(),
            mitigated_unique: mitigated.determinants(n_up, n_down).len(),
        });
        master = mitigated;
    }

    let (emp_dets, emp_probs) = master.sector_distribution(n_up, n_down);
    let emp: HashMap<Determinant, f64> = emp_dets.iter().copied().zip(emp_probs.iter().copied()).collect();
    let weights: Vec<f64> = prep.fci.vector.iter().map(|c| c * c).collect();
    let p_on_fci: Vec<f64> = prep.fci.basis.dets().iter().map(|d| emp.get(d).copied().unwrap_or(0.0)).collect();

    // Sub-batches are drawn from every recorded outcome so wrong-number
    // shots still consume budget when no mitigation is applied.
    let (all_bits, all_probs): (Vec<u64>, Vec<f64>) = master
        .counts
        .iter()
        .map(|(&b, &c)| (b, c as f64 / master.total_shots as f64))
        .unzip();
    let all_dets: Vec<Determinant> = all_bits.iter().map(|&b| Determinant::from_bitstring(b, n)).collect();

    let mut batch_rng = ChaCha8Rng::seed_from_u64(seeds.batches);
    let mut points = Vec::with_capacity(cfg.shots.len());
    for &shots in &cfg.shots {
        let mut errors = Vec::with_capacity(cfg.batches);
        for _ in 0..cfg.batches {
            let s = qsim::sample_distribution(&all_dets, &all_probs, n, shots.round().max(1.0) as u64, batch_rng.random())
                .stage("sample")?;
            let valid = s.determinants(n_up, n_down);
            if valid.is_empty() {
                continue;
            }
            let basis = DeterminantBasis::new(n, n_up, n_down, valid).stage("sci")?;
            errors.push(sci::energy_error(&basis, &prep.mo, prep.fci.energy).stage("sci")?);
        }
        let (mean, std) = mean_std(&errors);
        points.push(CurvePoint {
            shots,
            f_expected: qsim::expected_missing_fraction(&weights, &p_on_fci, shots),
            unique_expected: qsim::expected_unique(&emp_probs, shots),
            e_err_mean: mean,
            e_err_std: std,
        });
    }
    Ok(RunReport {
        config: cfg.clone(),
        seeds,
        fci_energy: prep.fci.energy,
        sector_dimension: prep.fci.basis.len(),
        census,
        noise: noise_report,
        master_unique: emp_dets.len(),
        curve: ConvergenceCurve { points },
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    (mean, var.sqrt())
}

/// Position `(k, t)` of the first crossing below `threshold`: between points
/// `k − 1` and `k` at fraction `t` of the way in log-shots. `t = 1` with
/// `k = 0` when the first point is already below.
fn crossing(curve: &ConvergenceCurve, threshold: f64) -> Option<(usize, f64)> {
    let pts = &curve.points;
    let k = pts.iter().position(|p| p.e_err_mean < threshold)?;
    if k == 0 {
        return Some((0, 1.0));
    }
    let (a, b) = (pts[k - 1].e_err_mean, pts[k].e_err_mean);
    let t = if a.is_finite() && a != b { ((a - threshold) / (a - b)).clamp(0.0, 1.0) } else { 1.0 };
    Some((k, t))
}

/// Shots at which the mean energy error first drops below `threshold`,
/// interpolated linearly in log(shots); `None` if it never does.
pub fn shots_to_accuracy(curve: &ConvergenceCurve, threshold: f64) -> Option<f64> {
    let (k, t) = crossing(curve, threshold)?;
    let pts = &curve.points;
    if k == 0 {
        return Some(pts[0].shots);
    }
    let (la, lb) = (pts[k - 1].shots.ln(), pts[k].shots.ln());
    Some((la + t * (lb - la)).exp())
}

/// Expected unique determinants at the accuracy crossing, interpolated at
/// the same log-shots position.
pub fn dets_at_accuracy(curve: &ConvergenceCurve, threshold: f64) -> Option<f64> {
    let (k, t) = crossing(curve, threshold)?;
    let pts = &curve.points;
    if k == 0 {
        return Some(pts[0].unique_expected);
    }
    let (a, b) = (pts[k - 1].unique_expected, pts[k].unique_expected);
    Some(a + t * (b - a))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Parameter("a power-law fit needs at least two points".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Parameter("power-law fit needs positive values".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("power-law fit needs at least two distinct x values".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinGap {
    pub gap: f64,
    pub ground: f64,
    pub excited: f64,
}

/// `E₀(n_up + 1, n_down − 1) − E₀(n_up, n_down)` by full CI.
pub fn spin_gap(ham: &Hamiltonian) -> Result<SpinGap> {
    spin_gap_guarded(ham, sci::FCI_GUARD)
}

pub fn spin_gap_guarded(ham: &Hamiltonian, guard: usize) -> Result<SpinGap> {
    let spec = &ham.spec;
    let n = ham.n_orb();
    if spec.n_down == 0 || spec.n_up + 1 > n {
        return Err(Error::Parameter("no room to flip a spin in this filling".into()));
    }
    for (up, down) in [(spec.n_up, spec.n_down), (spec.n_up + 1, spec.n_down - 1)] {
        let dim = sci::sector_dimension(n, up, down);
        if dim > guard as u128 {
            return Err(Error::Guard(format!("sector ({up}, {down}) has {dim} determinants, limit {guard}")));
        }
    }
    let ground = sci::fci_ground_state(ham, spec.n_up, spec.n_down)?.energy;
    let excited = sci::fci_ground_state(ham, spec.n_up + 1, spec.n_down - 1)?.energy;
    Ok(SpinGap {
        gap: excited - ground,
        ground,
        excited,
    })
}

pub use crate::sci::orbital_occupations;

/// Two-qubit gate count of the configured ansatz, without the full-CI step.
pub fn two_qubit_count(cfg: &ExperimentConfig) -> Result<usize> {
    let ham = build_hamiltonian(cfg).stage("model")?;
    let (hf, basis) = orbital_bases(&ham, cfg.basis_kind).stage("orbitals")?;
    Ok(ucj::gate_census(&circuit_for(cfg, &ham, &hf, &basis)?).n_two_qubit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub shots_to_acc: Option<f64>,
    pub dets_at_acc: Option<f64>,
    pub n_two_qubit: Option<usize>,
}

/// One convergence run per chain length; the gate census column is filled
/// for circuit-based methods.
pub fn run_scaling(template: &ExperimentConfig, lengths: &[usize]) -> Result<(Vec<ScalingRow>, Vec<RunReport>)> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &l in lengths {
        let mut cfg = template.clone();
        cfg.chain = ChainConfig {
            plaquettes: l,
            n_up: None,
            n_down: None,
            ..template.chain.clone()
        };
        let report = run_convergence(&cfg)?;
        rows.push(ScalingRow {
            l,
            shots_to_acc: shots_to_accuracy(&report.curve, cfg.chemical_accuracy),
            dets_at_acc: dets_at_accuracy(&report.curve, cfg.chemical_accuracy),
            n_two_qubit: report.census.map(|c| c.n_two_qubit),
        });
        reports.push(report);
    }
    Ok((rows, reports))
}

pub fn write_curve_csv(path: impl AsRef<Path>, curve: &ConvergenceCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in &curve.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<ConvergenceCurve> {
    let mut r = csv::Reader::from_path(path)?;
    let points = r.deserialize().collect::<std::result::Result<Vec<CurvePoint>, _>>()?;
    Ok(ConvergenceCurve { points })
}

pub fn write_scaling_csv(path: impl AsRef<Path>, rows: &[ScalingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scaling_csv(path: impl AsRef<Path>) -> Result<Vec<ScalingRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<ScalingRow>, _>>()?)
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    config: &'a ExperimentConfig,
    resolved_chain: ChainSpec,
    seeds: &'a Seeds,
    fci_energy: f64,
    sector_dimension: usize,
    census: Option<GateCensus>,
    noise: Option<NoiseReport>,
    master_unique: usize,
    shots_to_accuracy: Option<f64>,
    dets_at_accuracy: Option<f64>,
    versions: HashMap<&'static str, &'static str>,
}

/// `curve.csv` and `meta.json` for one run.
pub fn write_run(dir: impl AsRef<Path>, report: &RunReport) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_curve_csv(dir.join("curve.csv"), &report.curve)?;
    let meta = Meta {
        config: &report.config,
        resolved_chain: report.config.chain.to_spec()?,
        seeds: &report.seeds,
        fci_energy: report.fci_energy,
        sector_dimension: report.sector_dimension,
        census: report.census,
        noise: report.noise,
        master_unique: report.master_unique,
        shots_to_accuracy: shots_to_accuracy(&report.curve, report.config.chemical_accuracy),
        dets_at_accuracy: dets_at_accuracy(&report.curve, report.config.chemical_accuracy),
        versions: HashMap::from([("sqd-core", env!("CARGO_PKG_VERSION"))]),
    };
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Samples as they leave the pipeline before any analysis, for the
/// command-line tools.
pub fn master_samples(cfg: &ExperimentConfig, prep: &Prepared) -> Result<SampleSet> {
    let (dets, probs, _) = sampling_distribution(cfg, prep)?;
    qsim::sample_distribution(&dets, &probs, prep.spec.n_orb(), cfg.master_shots, Seeds::derive(cfg.seed).master)
        .stage("sample")
}
