mod common;

use std::sync::OnceLock;

use common::{chain, sector};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqd_core::linalg::{orthogonality_deviation, random_orthogonal};
use sqd_core::mitigate::{occupancy_stats, postselect, recover, RecoveryMode};
use sqd_core::model::rotate_integrals;
use sqd_core::orbitals::{solve_hf, ScfOptions};
use sqd_core::qsim::{
    apply_bitflip_noise, expected_missing_fraction, expected_unique, sample_distribution, simulate_full, simulate_sector,
    SampleOrigin, SampleSet,
};
use sqd_core::sci::{self, slater_condon, DeterminantBasis};
use sqd_core::ucj::{
    expected_two_qubit_count, gate_census, givens_decomposition, prune_to_topology, synthesize_circuit, Circuit, Gate,
    SynthesisOptions, Topology, UcjLayer, UcjParams,
};
use sqd_core::{Determinant, Hamiltonian};

fn l4() -> &'static Hamiltonian {
    static H: OnceLock<Hamiltonian> = OnceLock::new();
    H.get_or_init(|| chain(4))
}

fn l4_sector() -> &'static Vec<Determinant> {
    static S: OnceLock<Vec<Determinant>> = OnceLock::new();
    S.get_or_init(|| sector(8, 6, 6))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sym(n: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    use rand::Rng;
    let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn random_params(n: usize, layers: usize, seed: u64) -> UcjParams {
    let mut r = rng(seed);
    UcjParams {
        layers: (0..layers)
            .map(|_| UcjLayer {
                rotation: random_orthogonal(n, &mut r),
                j_same: sym(n, &mut r),
                j_opp: sym(n, &mut r),
            })
            .collect(),
        final_rotation: random_orthogonal(n, &mut r),
        topology: None,
    }
}

fn random_topology(n: usize, mask: u64) -> Topology {
    let same: Vec<_> = (0..n)
        .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
        .enumerate()
        .filter(|(k, _)| mask >> (k % 64) & 1 == 1)
        .map(|(_, e)| e)
        .collect();
    let opp: Vec<_> = (0..n).filter(|p| mask >> (63 - p) & 1 == 1).map(|p| (p, p)).collect();
    Topology::new("random", n, same, opp).unwrap()
}

fn sample_set(n: usize, outcomes: &[(u64, u64)]) -> SampleSet {
    let mut s = SampleSet::new(n, SampleOrigin::External);
    for &(bits, count) in outcomes {
        s.add(bits & ((1u64 << (2 * n)) - 1), count);
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn slater_condon_is_hermitian(i in 0usize..784, j in 0usize..784) {
        let dets = l4_sector();
        let a = slater_condon(dets[i], dets[j], l4());
        let b = slater_condon(dets[j], dets[i], l4());
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn determinant_basis_is_sorted_and_unique(picks in prop::collection::vec(0usize..784, 0..80)) {
        let dets: Vec<_> = picks.iter().map(|&k| l4_sector()[k]).collect();
        let basis = DeterminantBasis::new(8, 6, 6, dets.clone()).unwrap();
        prop_assert!(basis.dets().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(dets.iter().all(|&d| basis.contains(d)));
    }

    #[test]
    fn sci_energy_and_missing_weight_are_monotone_in_the_basis(
        small in prop::collection::vec(0usize..784, 1..30),
        extra in prop::collection::vec(0usize..784, 1..60),
    ) {
        let dets = l4_sector();
        let a = DeterminantBasis::new(8, 6, 6, small.iter().map(|&k| dets[k])).unwrap();
        let mut b = a.clone();
        b.extend(extra.iter().map(|&k| dets[k])).unwrap();
        let ea = sci::diagonalize(&a, l4()).unwrap().energy;
        let eb = sci::diagonalize(&b, l4()).unwrap().energy;
        prop_assert!(eb <= ea + 1e-10, "{eb} > {ea}");
        let fci = fci_l4();
        prop_assert!(sci::missing_fraction(fci, &b).unwrap() <= sci::missing_fraction(fci, &a).unwrap() + 1e-14);
        prop_assert!(ea >= fci.energy - 1e-10);
    }

    #[test]
    fn givens_network_reassembles_the_rotation(n in 1usize..9, seed in any::<u64>()) {
        let u = random_orthogonal(n, &mut rng(seed));
        let net = givens_decomposition(&u).unwrap();
        prop_assert!(net.len() <= n * (n - 1) / 2);
        prop_assert!((net.matrix() - &u).amax() < 1e-10);
    }

    #[test]
    fn pruning_is_idempotent_and_stays_in_topology(seed in any::<u64>(), mask in any::<u64>()) {
        let p = random_params(6, 2, seed);
        let topo = random_topology(6, mask);
        let once = prune_to_topology(&p, &topo).unwrap();
        let twice = prune_to_topology(&once, &topo).unwrap();
        prop_assert_eq!(&once, &twice);
        for layer in &once.layers {
            for a in 0..6 {
                for b in 0..6 {
                    if layer.j_same[(a, b)] != 0.0 {
                        prop_assert!(topo.allows_same(a, b));
                    }
                    if layer.j_opp[(a, b)] != 0.0 {
                        prop_assert!(topo.allows_opp(a, b));
                    }
                }
            }
        }
    }

    #[test]
    fn gate_census_matches_closed_form(n in 2usize..7, layers in 1usize..4, seed in any::<u64>(), mask in any::<u64>()) {
        let mut p = random_params(n, layers, seed);
        if mask & 1 == 1 {
            p = prune_to_topology(&p, &random_topology(n, mask)).unwrap();
        }
        let c = synthesize_circuit(&p, Determinant::reference(n / 2, n / 2), &SynthesisOptions::default()).unwrap();
        prop_assert_eq!(gate_census(&c).n_two_qubit, expected_two_qubit_count(&p).unwrap());
    }

    #[test]
    fn sector_simulation_is_unitary_and_matches_full(
        up in 0usize..4, down in 0usize..4, layers in 1usize..3, seed in any::<u64>()
    ) {
        let p = random_params(3, layers, seed);
        let c = synthesize_circuit(&p, Determinant::reference(up, down), &SynthesisOptions::default()).unwrap();
        let s = simulate_sector(&c, up, down).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        let psi = simulate_full(&c, false).unwrap();
        for k in 0..s.len() {
            let d = s.determinant(k);
            prop_assert!((psi[d.to_bitstring(3) as usize] - s.amplitudes[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn sector_simulation_survives_random_conserving_gates(gates in prop::collection::vec((0usize..3, 0usize..6, 0usize..6, -3.0f64..3.0), 1..40)) {
        let mut c = Circuit::new(6);
        c.push(Gate::X(0)).unwrap();
        c.push(Gate::X(3)).unwrap();
        c.push(Gate::X(4)).unwrap();
        for (kind, a, b, t) in gates {
            let g = match kind {
                0 => Gate::Phase { q: a, phi: t },
                1 if a != b => Gate::CPhase { a, b, phi: t },
                // Adjacent pairs inside one register.
                _ if a % 3 < 2 => Gate::XXPlusYY { a, b: a + 1, theta: t, beta: 0.0 },
                _ => continue,
            };
            c.push(g).unwrap();
        }
        let s = simulate_sector(&c, 1, 2).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        let psi = simulate_full(&c, false).unwrap();
        let inside: f64 = (0..s.len()).map(|k| psi[s.determinant(k).to_bitstring(3) as usize].norm_sqr()).sum();
        prop_assert!((inside - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_sampling_curves_are_monotone(raw in prop::collection::vec(0.001f64..1.0, 2..40), s in 1.0f64..500.0) {
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        prop_assert!(expected_missing_fraction(&p, &p, s + 1.0) < expected_missing_fraction(&p, &p, s));
        let (u0, u1, u2) = (expected_unique(&p, s), expected_unique(&p, s + 1.0), expected_unique(&p, s + 2.0));
        prop_assert!(u1 >= u0 - 1e-12);
        prop_assert!(u2 - u1 <= u1 - u0 + 1e-12);
        prop_assert!((expected_unique(&p, 1.0) - p.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_given_a_seed(seed in any::<u64>(), shots in 1u64..5000) {
        let g = fci_l2();
        let w: Vec<f64> = g.vector.iter().map(|c| c * c).collect();
        let a = sample_distribution(g.basis.dets(), &w, 4, shots, seed).unwrap();
        let b = sample_distribution(g.basis.dets(), &w, 4, shots, seed).unwrap();
        prop_assert_eq!(&a.counts, &b.counts);
        prop_assert_eq!(a.counts.values().sum::<u64>(), shots);
        let na = apply_bitflip_noise(&a, 0.1, seed ^ 1).unwrap();
        let nb = apply_bitflip_noise(&a, 0.1, seed ^ 1).unwrap();
        prop_assert_eq!(na.counts, nb.counts);
    }

    #[test]
    fn recovery_hits_targets_with_minimal_flips(
        outcomes in prop::collection::vec((any::<u64>(), 1u64..20), 1..60),
        seed in any::<u64>(),
        probabilistic in any::<bool>(),
    ) {
        let (n, up, down) = (6usize, 3usize, 2usize);
        let s = sample_set(n, &outcomes);
        let stats = occupancy_stats(&s).unwrap();
        let mode = if probabilistic { RecoveryMode::Probabilistic } else { RecoveryMode::Greedy };
        let rec = recover(&s, up, down, &stats, mode, seed).unwrap();
        prop_assert_eq!(rec.total_shots, s.total_shots);
        prop_assert!((rec.correct_number_fraction(up, down) - 1.0).abs() < 1e-15);
        let post = postselect(&s, up, down);
        prop_assert!(post.counts.keys().all(|&b| Determinant::from_bitstring(b, n).in_sector(n, up, down)));
        prop_assert!(rec.determinants(up, down).len() >= post.determinants(up, down).len());
        if !probabilistic {
            // Each wrong shot lands at Hamming distance |Δα| + |Δβ|.
            let mask = (1u64 << n) - 1;
            for &(bits, _) in &outcomes {
                let bits = bits & ((1u64 << (2 * n)) - 1);
                let single = sample_set(n, &[(bits, 1)]);
                let fixed = recover(&single, up, down, &stats, mode, seed).unwrap();
                let out = *fixed.counts.keys().next().unwrap();
                let need = ((bits & mask).count_ones() as i64 - up as i64).unsigned_abs()
                    + ((bits >> n).count_ones() as i64 - down as i64).unsigned_abs();
                prop_assert_eq!((out ^ bits).count_ones() as u64, need);
            }
        }
    }

    #[test]
    fn sample_csv_round_trips(outcomes in prop::collection::vec((any::<u64>(), 1u64..1000), 1..50)) {
        let s = sample_set(5, &outcomes);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        s.write_csv(&path).unwrap();
        let back = SampleSet::read_csv(&path, SampleOrigin::External).unwrap();
        prop_assert_eq!(back.counts, s.counts);
        prop_assert_eq!(back.total_shots, s.total_shots);
        // A header-only file carries no register width and is rejected.
        sample_set(5, &[]).write_csv(&path).unwrap();
        prop_assert!(SampleSet::read_csv(&path, SampleOrigin::External).is_err());
    }

    #[test]
    fn rotated_integrals_keep_eightfold_symmetry(seed in any::<u64>()) {
        let ham = chain(2);
        let u = random_orthogonal(4, &mut rng(seed));
        let mo = rotate_integrals(&ham, &u).unwrap();
        prop_assert!(mo.max_asymmetry() < 1e-12);
        prop_assert!((sci::fci_ground_state(&mo, 3, 3).unwrap().energy - fci_l2().energy).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hf_energy_ignores_orbital_labelling(perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
        let ham = l4();
        let base = solve_hf(ham, 6, 6, &ScfOptions::default()).unwrap();
        let p = DMatrix::from_fn(8, 8, |i, j| if perm[j] == i { 1.0 } else { 0.0 });
        let permuted = rotate_integrals(ham, &p).unwrap();
        let hf = solve_hf(&permuted, 6, 6, &ScfOptions::default()).unwrap();
        prop_assert!((hf.energy - base.energy).abs() < 1e-8, "{} vs {}", hf.energy, base.energy);
        prop_assert!(orthogonality_deviation(&hf.basis.coeffs) < 1e-10);
    }

    #[test]
    fn occupations_sum_to_electron_count(picks in prop::collection::vec(0usize..784, 5..60)) {
        let basis = DeterminantBasis::new(8, 6, 6, picks.iter().map(|&k| l4_sector()[k])).unwrap();
        let g = sci::diagonalize(&basis, l4()).unwrap();
        let occ = sci::orbital_occupations(&g);
        prop_assert!((occ.iter().sum::<f64>() - 12.0).abs() < 1e-9);
        prop_assert!(occ.iter().all(|&x| (-1e-12..=2.0 + 1e-12).contains(&x)));
    }
}

fn fci_l2() -> &'static sci::GroundState {
    static G: OnceLock<sci::GroundState> = OnceLock::new();
    G.get_or_init(|| sci::fci_ground_state(&chain(2), 3, 3).unwrap())
}

fn fci_l4() -> &'static sci::GroundState {
    static G: OnceLock<sci::GroundState> = OnceLock::new();
    G.get_or_init(|| sci::fci_ground_state(l4(), 6, 6).unwrap())
}
