use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;
use sqd_core::lab::{self, ExperimentConfig, Method, Prepared, Seeds};
use sqd_core::mitigate::{self, Mitigation, RecoveryMode};
use sqd_core::model::{self, IntegralsFile};
use sqd_core::qsim::{self, NoiseCalibration, SampleOrigin};
use sqd_core::sci;
use sqd_core::ucj::{self, SynthesisOptions};
use sqd_core::{Circuit, Determinant, DeterminantBasis, Hamiltonian, OrbitalBasis, SampleSet};

use crate::{Cli, Command, RecoverMode};

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve_config()?;
    let out = cli.out_dir.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match &cli.command {
        Command::BuildChain {
            no_interplaquette_coulomb,
        } => build_chain(&cfg, out, *no_interplaquette_coulomb),
        Command::Bases => bases(&cfg, out),
        Command::UcjParams { bins } => ucj_params(&cfg, out, *bins),
        Command::Simulate { circuit } => simulate(&cfg, out, circuit.as_deref()),
        Command::Sample { circuit, shots } => sample(&cfg, out, circuit.as_deref(), *shots),
        Command::Mitigate { input, mode } => mitigate_file(&cfg, out, input, *mode),
        Command::Sci {
            samples,
            dets,
            reference,
        } => sci_energy(&cfg, out, samples.as_deref(), dets.as_deref(), *reference),
        Command::Convergence => convergence(&cfg, out),
        Command::Scaling { lengths } => scaling(&cfg, out, lengths),
        Command::SpinGap {
            no_interplaquette_coulomb,
        } => spin_gap(&cfg, out, *no_interplaquette_coulomb),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn sector(cfg: &ExperimentConfig) -> Result<(usize, usize, usize)> {
    let spec = cfg.chain.to_spec()?;
    Ok((spec.n_orb(), spec.n_up, spec.n_down))
}

fn build_chain(cfg: &ExperimentConfig, out: &Path, no_inter: bool) -> Result<()> {
    let mut ham = lab::build_hamiltonian(cfg)?;
    if no_inter {
        ham = ham.without_interplaquette_coulomb();
    }
    let path = out.join("integrals.json");
    IntegralsFile::from_parts(&ham.h, &ham.v, ham.e_core, Some(ham.spec.clone())).save(&path)?;
    log::info!("wrote {} ({} orbitals)", path.display(), ham.n_orb());
    Ok(())
}

fn basis_json(b: &OrbitalBasis) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = b.coeffs.row_iter().map(|r| r.iter().copied().collect()).collect();
    json!({
        "kind": b.kind,
        "energies": b.energies.iter().copied().collect::<Vec<f64>>(),
        "coeffs": rows,
    })
}

fn bases(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ham = lab::build_hamiltonian(cfg)?;
    let (hf, chosen) = lab::orbital_bases(&ham, cfg.basis_kind)?;
    write_json(
        &out.join("bases.json"),
        &json!({ "hf": basis_json(&hf), "chosen": basis_json(&chosen) }),
    )
}

/// Hamiltonian, HF basis and measurement basis, without full CI.
fn frame(cfg: &ExperimentConfig) -> Result<(Hamiltonian, OrbitalBasis, OrbitalBasis)> {
    let ham = lab::build_hamiltonian(cfg)?;
    let (hf, basis) = lab::orbital_bases(&ham, cfg.basis_kind)?;
    Ok((ham, hf, basis))
}

fn circuit_method(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.method == Method::IdealSqd {
        bail!("method IDEAL_SQD has no circuit; pass --method UCJ or --method LUCJ");
    }
    Ok(())
}

fn build_circuit(cfg: &ExperimentConfig) -> Result<(ucj::UcjParams, Circuit)> {
    circuit_method(cfg)?;
    let (ham, hf, basis) = frame(cfg)?;
    let params = lab::ansatz_params(cfg, &ham, &hf, &basis)?;
    let reference = Determinant::reference(ham.spec.n_up, ham.spec.n_down);
    let circuit = ucj::synthesize_circuit(&params, reference, &SynthesisOptions::default())?;
    Ok((params, circuit))
}

fn ucj_params(cfg: &ExperimentConfig, out: &Path, bins: usize) -> Result<()> {
    let (params, circuit) = build_circuit(cfg)?;
    params.save(out.join("ucj_params.json"))?;
    circuit.save(out.join("circuit.txt"))?;
    let census = ucj::gate_census(&circuit);
    let histogram = ucj::cp_histogram(&params, bins)?;
    log::info!("{} two-qubit gates", census.n_two_qubit);
    write_json(
        &out.join("census.json"),
        &json!({ "census": census, "cp_histogram": histogram }),
    )
}

fn load_or_build_circuit(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Circuit> {
    match path {
        Some(p) => Circuit::load(p).with_context(|| format!("reading circuit {}", p.display())),
        None => Ok(build_circuit(cfg)?.1),
    }
}

fn simulate(cfg: &ExperimentConfig, out: &Path, circuit: Option<&Path>) -> Result<()> {
    let (n, n_up, n_down) = sector(cfg)?;
    let circuit = load_or_build_circuit(cfg, circuit)?;
    if circuit.n_orb() != n {
        bail!("circuit acts on {} orbitals, the chain has {n}", circuit.n_orb());
    }
    let state = qsim::simulate_sector(&circuit, n_up, n_down)?;
    let path = out.join("state.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    use std::io::Write;
    writeln!(w, "bitstring,re,im,probability")?;
    for k in 0..state.len() {
        let d = state.determinant(k);
        let a = state.amplitude(d);
        writeln!(w, "{:0width$b},{:e},{:e},{:e}", d.to_bitstring(n), a.re, a.im, a.norm_sqr(), width = 2 * n)?;
    }
    w.flush()?;
    log::info!("wrote {} ({} amplitudes, norm {:.12})", path.display(), state.len(), state.norm());
    Ok(())
}

/// Calibrated (or explicit) flip probability for the configured noise.
fn noise_calibration(cfg: &ExperimentConfig) -> Result<Option<NoiseCalibration>> {
    let Some(noise) = &cfg.noise else {
        return Ok(None);
    };
    let (n, n_up, n_down) = sector(cfg)?;
    Ok(Some(match noise.p_flip {
        Some(p) => NoiseCalibration {
            p_flip: p,
            correct_fraction: qsim::correct_number_probability(n, n_up, n_down, p),
            error_free_fraction: (1.0 - p).powi(2 * n as i32),
        },
        None => qsim::calibrate_noise(n, n_up, n_down, noise.target_correct_fraction)?,
    }))
}

fn sample(cfg: &ExperimentConfig, out: &Path, circuit: Option<&Path>, shots: Option<u64>) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(s) = shots {
        cfg.master_shots = s;
    }
    cfg.validate()?;
    let (n, n_up, n_down) = sector(&cfg)?;
    let seeds = Seeds::derive(cfg.seed);
    let clean = match (cfg.method, circuit) {
        (Method::IdealSqd, Some(_)) => bail!("--circuit needs --method UCJ or LUCJ"),
        (Method::IdealSqd, None) => lab::master_samples(&cfg, &Prepared::new(&cfg)?)?,
        _ => {
            let c = load_or_build_circuit(&cfg, circuit)?;
            let state = qsim::simulate_sector(&c, n_up, n_down)?;
            qsim::sample_distribution(&state.determinants(), &state.probabilities(), n, cfg.master_shots, seeds.master)?
        }
    };
    let calibration = noise_calibration(&cfg)?;
    let samples = match &calibration {
        Some(cal) => qsim::apply_bitflip_noise(&clean, cal.p_flip, seeds.noise)?,
        None => clean,
    };
    samples.write_csv(out.join("samples.csv"))?;
    write_json(
        &out.join("samples.json"),
        &json!({
            "method": cfg.method,
            "shots": samples.total_shots,
            "distinct_outcomes": samples.counts.len(),
            "sector_unique": samples.determinants(n_up, n_down).len(),
            "correct_number_fraction": samples.correct_number_fraction(n_up, n_down),
            "noise": calibration,
            "seed": cfg.seed,
        }),
    )
}

fn read_samples(path: &Path, n: usize) -> Result<SampleSet> {
    let s = SampleSet::read_csv(path, SampleOrigin::External).with_context(|| format!("reading samples {}", path.display()))?;
    if s.n_orb != n {
        bail!("{} holds {}-orbital registers, the chain has {n}", path.display(), s.n_orb);
    }
    Ok(s)
}

fn mitigate_file(cfg: &ExperimentConfig, out: &Path, input: &Path, mode: RecoverMode) -> Result<()> {
    let (n, n_up, n_down) = sector(cfg)?;
    let raw = read_samples(input, n)?;
    let mitigation = cfg.noise.map(|nc| nc.mitigation).unwrap_or(Mitigation::Recover);
    let seed = Seeds::derive(cfg.seed).mitigation;
    let fixed = match (mitigation, mode) {
        (Mitigation::Recover, RecoverMode::Probabilistic) => {
            let stats = mitigate::occupancy_stats(&raw)?;
            mitigate::recover(&raw, n_up, n_down, &stats, RecoveryMode::Probabilistic, seed)?
        }
        _ => mitigate::mitigate(&raw, mitigation, n_up, n_down, seed)?,
    };
    fixed.write_csv(out.join("mitigated.csv"))?;
    write_json(
        &out.join("mitigated.json"),
        &json!({
            "mitigation": mitigation.to_string(),
            "mode": format!("{mode:?}").to_lowercase(),
            "raw_shots": raw.total_shots,
            "raw_correct_number_fraction": raw.correct_number_fraction(n_up, n_down),
            "raw_unique": raw.determinants(n_up, n_down).len(),
            "mitigated_shots": fixed.total_shots,
            "mitigated_unique": fixed.determinants(n_up, n_down).len(),
        }),
    )
}

fn sci_energy(
    cfg: &ExperimentConfig,
    out: &Path,
    samples: Option<&Path>,
    dets: Option<&Path>,
    reference: bool,
) -> Result<()> {
    let (n, n_up, n_down) = sector(cfg)?;
    let basis = match (samples, dets) {
        (Some(p), _) => DeterminantBasis::new(n, n_up, n_down, read_samples(p, n)?.determinants(n_up, n_down))?,
        (None, Some(p)) => DeterminantBasis::load(p, n).with_context(|| format!("reading determinants {}", p.display()))?,
        (None, None) => bail!("give --samples or --dets"),
    };
    if basis.n_up() != n_up || basis.n_down() != n_down {
        bail!("determinants are in sector ({}, {}), the chain has ({n_up}, {n_down})", basis.n_up(), basis.n_down());
    }
    if basis.len() == 0 {
        bail!("no sector-valid determinants to diagonalize");
    }
    let (ham, _, orbitals) = frame(cfg)?;
    let mo = model::rotate_integrals(&ham, &orbitals.coeffs)?;
    let ground = sci::diagonalize(&basis, &mo)?;
    basis.save(out.join("sci_basis.txt"))?;
    let mut report = json!({
        "energy": ground.energy,
        "dimension": basis.len(),
        "iterations": ground.iterations,
        "residual": ground.residual,
    });
    if reference {
        let fci = sci::fci_ground_state(&mo, n_up, n_down)?;
        report["fci_energy"] = json!(fci.energy);
        report["error"] = json!(ground.energy - fci.energy);
        report["missing_fraction"] = json!(sci::missing_fraction(&fci, &basis)?);
    }
    write_json(&out.join("sci.json"), &report)
}

fn convergence(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let report = lab::run_convergence(cfg)?;
    lab::write_run(out, &report)?;
    match lab::shots_to_accuracy(&report.curve, cfg.chemical_accuracy) {
        Some(s) => log::info!("chemical accuracy at {s:.0} shots"),
        None => log::info!("chemical accuracy not reached within the shot schedule"),
    }
    Ok(())
}

fn scaling(cfg: &ExperimentConfig, out: &Path, lengths: &[usize]) -> Result<()> {
    if lengths.is_empty() {
        bail!("--lengths is empty");
    }
    let (rows, reports) = lab::run_scaling(cfg, lengths)?;
    lab::write_scaling_csv(out.join("scaling.csv"), &rows)?;
    for (row, report) in rows.iter().zip(&reports) {
        lab::write_run(out.join(format!("L{}", row.l)), report)?;
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.n_two_qubit.map(|g| (r.l as f64, g as f64)))
        .collect();
    if points.len() >= 2 {
        log::info!("two-qubit gate count grows as L^{:.3}", lab::fit_power_law(&points)?);
    }
    Ok(())
}

fn spin_gap(cfg: &ExperimentConfig, out: &Path, no_inter: bool) -> Result<()> {
    let mut ham = lab::build_hamiltonian(cfg)?;
    if no_inter {
        ham = ham.without_interplaquette_coulomb();
    }
    let gap = lab::spin_gap(&ham)?;
    let ground = sci::fci_ground_state(&ham, ham.spec.n_up, ham.spec.n_down)?;
    let occ = lab::orbital_occupations(&ground);
    let cu: Vec<f64> = occ.iter().step_by(2).copied().collect();
    let o: Vec<f64> = occ.iter().skip(1).step_by(2).copied().collect();
    if !(0.05..=0.3).contains(&gap.gap) {
        log::warn!("spin gap {:.4} eV lies outside the expected 0.05–0.3 eV window", gap.gap);
    }
    if cu.iter().any(|d| !(1.2..=1.5).contains(d)) {
        log::warn!("Cu densities {cu:?} leave the expected 1.2–1.5 window");
    }
    write_json(
        &out.join("spin_gap.json"),
        &json!({
            "gap": gap.gap,
            "ground": gap.ground,
            "excited": gap.excited,
            "interplaquette_coulomb": !no_inter,
            "cu_density": cu,
            "o_density": o,
        }),
    )
}
