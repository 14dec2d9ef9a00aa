//! Particle-number error mitigation for measured bitstrings: postselection
//! and configuration recovery toward dataset-mean occupations.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::low_mask;
use crate::qsim::SampleSet;

/// Mean occupation of each of the `2·n_orb` qubits over all shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStats {
    pub mean_occ: Vec<f64>,
}

pub fn occupancy_stats(s: &SampleSet) -> Result<OccupancyStats> {
    if s.total_shots == 0 {
        return Err(Error::Empty("occupancy statistics need at least one shot".into()));
    }
    let nq = 2 * s.n_orb;
    let mut sums = vec![0u64; nq];
    for (&bits, &count) in &s.counts {
        for (q, sum) in sums.iter_mut().enumerate() {
            if bits >> q & 1 == 1 {
                *sum += count;
            }
        }
    }
    Ok(OccupancyStats {
        mean_occ: sums.iter().map(|&c| c as f64 / s.total_shots as f64).collect(),
    })
}

fn counts_match(bits: u64, n: usize, n_up: usize, n_down: usize) -> bool {
    (bits & low_mask(n)).count_ones() as usize == n_up && (bits >> n).count_ones() as usize == n_down
}

pub fn postselect(s: &SampleSet, n_up: usize, n_down: usize) -> SampleSet {
    let mut out = SampleSet::new(s.n_orb, s.origin);
    for (&bits, &count) in &s.counts {
        if counts_match(bits, s.n_orb, n_up, n_down) {
            out.add(bits, count);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMode {
    /// Flip the bit that most reduces the squared distance to the mean
    /// occupations; ties go to the lowest index.
    #[default]
    Greedy,
    /// Pick among the admissible bits with probability proportional to
    /// `|bit − mean|`.
    Probabilistic,
}

/// Fixes one register of `n` bits to `target` electrons.
fn recover_register<R: Rng>(
    mut reg: u64,
    n: usize,
    target: usize,
    means: &[f64],
    mode: RecoveryMode,
    rng: &mut R,
) -> u64 {
    loop {
        let count = reg.count_ones() as usize;
        if count == target {
            return reg;
        }
        // Too many electrons: only occupied bits are admissible, and clearing
        // bit j changes the squared distance by 2·m_j − 1. Too few: setting an
        // empty bit changes it by 1 − 2·m_j.
        let clear = count > target;
        let candidates: Vec<usize> = (0..n).filter(|&j| (reg >> j & 1 == 1) == clear).collect();
        let cost = |j: usize| if clear { 2.0 * means[j] - 1.0 } else { 1.0 - 2.0 * means[j] };
        let pick = match mode {
            RecoveryMode::Greedy => {
                let mut best = candidates[0];
                for &j in &candidates[1..] {
                    if cost(j) < cost(best) {
                        best = j;
                    }
                }
                best
            }
            RecoveryMode::Probabilistic => {
                let weight = |j: usize| if clear { 1.0 - means[j] } else { means[j] };
                let total: f64 = candidates.iter().map(|&j| weight(j)).sum();
                if total > 0.0 {
                    let mut u = rng.random::<f64>() * total;
                    let mut chosen = *candidates.last().unwrap();
                    for &j in &candidates {
                        u -= weight(j);
                        if u < 0.0 {
                            chosen = j;
                            break;
                        }
                    }
                    chosen
                } else {
                    candidates[rng.random_range(0..candidates.len())]
                }
            }
        };
        reg ^= 1 << pick;
    }
}

/// Flips bits of every wrong-number shot, register by register, until both
/// electron counts hit their targets. Correct shots pass through unchanged.
pub fn recover(
    s: &SampleSet,
    n_up: usize,
    n_down: usize,
    stats: &OccupancyStats,
    mode: RecoveryMode,
    seed: u64,
) -> Result<SampleSet> {
    let n = s.n_orb;
    if stats.mean_occ.len() != 2 * n {
        return Err(Error::Dimension(format!(
            "occupancy statistics cover {} qubits, samples have {}",
            stats.mean_occ.len(),
            2 * n
        )));
    }
    if n_up > n || n_down > n {
        return Err(Error::Parameter(format!("({n_up}, {n_down}) electrons do not fit in {n} orbitals")));
    }
    let (ma, mb) = stats.mean_occ.split_at(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SampleSet::new(n, s.origin);
    for (&bits, &count) in &s.counts {
        if counts_match(bits, n, n_up, n_down) {
            out.add(bits, count);
            continue;
        }
        match mode {
            RecoveryMode::Greedy => {
                let a = recover_register(bits & low_mask(n), n, n_up, ma, mode, &mut rng);
                let b = recover_register(bits >> n, n, n_down, mb, mode, &mut rng);
                out.add(a | b << n, count);
            }
            RecoveryMode::Probabilistic => {
                for _ in 0..count {
                    let a = recover_register(bits & low_mask(n), n, n_up, ma, mode, &mut rng);
                    let b = recover_register(bits >> n, n, n_down, mb, mode, &mut rng);
                    out.add(a | b << n, 1);
                }
            }
        }
    }
    Ok(out)
}

/// The `--mitigation` mode string shared by the command-line tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mitigation {
    #[default]
    None,
    Postselect,
    Recover,
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mitigation::None => "none",
            Mitigation::Postselect => "postselect",
            Mitigation::Recover => "recover",
        })
    }
}

impl FromStr for Mitigation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Mitigation::None),
            "postselect" => Ok(Mitigation::Postselect),
            "recover" => Ok(Mitigation::Recover),
            other => Err(Error::Parse(format!("unknown mitigation {other:?} (none, postselect, recover)"))),
        }
    }
}

/// Applies a mitigation mode. `None` returns the raw set; downstream
/// consumers still only use its sector-valid outcomes.
pub fn mitigate(s: &SampleSet, mode: Mitigation, n_up: usize, n_down: usize, seed: u64) -> Result<SampleSet> {
    match mode {
        Mitigation::None => Ok(s.clone()),
        Mitigation::Postselect => Ok(postselect(s, n_up, n_down)),
        Mitigation::Recover => {
            let stats = occupancy_stats(s)?;
            recover(s, n_up, n_down, &stats, RecoveryMode::Greedy, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::SampleOrigin;

    fn set(n: usize, entries: &[(u64, u64)]) -> SampleSet {
        let mut s = SampleSet::new(n, SampleOrigin::Noisy);
        for &(b, c) in entries {
            s.add(b, c);
        }
        s
    }

    #[test]
    fn stats_of_simple_sets() {
        let s = set(2, &[(0b1001, 4)]);
        assert_eq!(occupancy_stats(&s).unwrap().mean_occ, vec![1.0, 0.0, 0.0, 1.0]);
        let s = set(2, &[(0b1001, 3), (0b0110, 3)]);
        assert_eq!(occupancy_stats(&s).unwrap().mean_occ, vec![0.5; 4]);
        assert!(occupancy_stats(&SampleSet::new(2, SampleOrigin::Noisy)).is_err());
    }

    #[test]
    fn postselect_filters_by_register_counts() {
        let s = set(2, &[(0b0101, 2), (0b0011, 5), (0b0110, 1)]);
        let p = postselect(&s, 1, 1);
        assert_eq!(p.total_shots, 3);
        assert!(p.counts.keys().all(|&b| counts_match(b, 2, 1, 1)));
    }

    #[test]
    fn excess_electron_clears_lowest_mean_bit() {
        // α register 0b0111 with three electrons, target two; means make
        // orbital 1 the least populated among the occupied ones.
        let stats = OccupancyStats {
            mean_occ: vec![0.9, 0.2, 0.6, 0.4, 0.5, 0.5, 0.5, 0.5],
        };
        let s = set(4, &[(0b0011_0111, 1)]);
        let r = recover(&s, 2, 2, &stats, RecoveryMode::Greedy, 0).unwrap();
        assert_eq!(r.counts.keys().copied().collect::<Vec<_>>(), vec![0b0011_0101]);

        // Exhaustive check over single clears of the α register.
        let dist = |bits: u64| (0..4).map(|j| ((bits >> j & 1) as f64 - stats.mean_occ[j]).powi(2)).sum::<f64>();
        let best = [0, 1, 2]
            .into_iter()
            .map(|j| 0b0111u64 ^ 1 << j)
            .min_by(|&x, &y| dist(x).partial_cmp(&dist(y)).unwrap())
            .unwrap();
        assert_eq!(best, 0b0101);
    }

    #[test]
    fn missing_electron_sets_highest_mean_bit_with_index_ties() {
        let stats = OccupancyStats {
            mean_occ: vec![0.3, 0.7, 0.7, 0.1],
        };
        let s = set(2, &[(0b1000, 2)]);
        let r = recover(&s, 1, 1, &stats, RecoveryMode::Greedy, 0).unwrap();
        assert_eq!(r.counts.get(&0b1010), Some(&2));
        let tie = OccupancyStats { mean_occ: vec![0.5; 4] };
        let r = recover(&set(2, &[(0b1000, 1)]), 1, 1, &tie, RecoveryMode::Greedy, 0).unwrap();
        assert_eq!(r.counts.keys().copied().collect::<Vec<_>>(), vec![0b1001]);
    }

    #[test]
    fn correct_shots_pass_through_and_dimensions_checked() {
        let s = set(2, &[(0b0101, 3), (0b1010, 1)]);
        let stats = occupancy_stats(&s).unwrap();
        assert_eq!(recover(&s, 1, 1, &stats, RecoveryMode::Greedy, 0).unwrap(), s);
        let short = OccupancyStats { mean_occ: vec![0.5; 3] };
        assert!(recover(&s, 1, 1, &short, RecoveryMode::Greedy, 0).is_err());
    }

    #[test]
    fn probabilistic_mode_hits_targets_and_is_seeded() {
        let s = set(3, &[(0b111_000, 20), (0b000_111, 20), (0b010_100, 5)]);
        let stats = occupancy_stats(&s).unwrap();
        let a = recover(&s, 2, 1, &stats, RecoveryMode::Probabilistic, 5).unwrap();
        assert!(a.counts.keys().all(|&b| counts_match(b, 3, 2, 1)));
        assert_eq!(a.total_shots, 45);
        assert_eq!(a, recover(&s, 2, 1, &stats, RecoveryMode::Probabilistic, 5).unwrap());
    }

    #[test]
    fn mode_strings() {
        for m in [Mitigation::None, Mitigation::Postselect, Mitigation::Recover] {
            assert_eq!(m.to_string().parse::<Mitigation>().unwrap(), m);
        }
        assert!("zne".parse::<Mitigation>().is_err());
    }
}
