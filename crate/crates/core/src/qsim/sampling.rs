use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{binomial, low_mask, Determinant};

use super::SectorState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SampleOrigin {
    Simulated,
    Noisy,
    External,
}

/// Shot counts keyed by the raw `2·n_orb`-bit measurement (α in the low bits).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub n_orb: usize,
    pub counts: BTreeMap<u64, u64>,
    pub total_shots: u64,
    pub origin: SampleOrigin,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    bitstring: String,
    count: u64,
}

impl SampleSet {
    pub fn new(n_orb: usize, origin: SampleOrigin) -> Self {
        SampleSet {
            n_orb,
            counts: BTreeMap::new(),
            total_shots: 0,
            origin,
        }
    }

    pub fn add(&mut self, bits: u64, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(bits).or_default() += count;
        self.total_shots += count;
    }

    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    /// Sector-valid determinants present in the set, ascending.
    pub fn determinants(&self, n_up: usize, n_down: usize) -> Vec<Determinant> {
        let mut dets: Vec<Determinant> = self
            .counts
            .keys()
            .map(|&b| Determinant::from_bitstring(b, self.n_orb))
            .filter(|d| d.in_sector(self.n_orb, n_up, n_down))
            .collect();
        dets.sort_unstable();
        dets
    }

    pub fn correct_number_fraction(&self, n_up: usize, n_down: usize) -> f64 {
        if self.total_shots == 0 {
            return 0.0;
        }
        let good: u64 = self
            .counts
            .iter()
            .filter(|(&b, _)| Determinant::from_bitstring(b, self.n_orb).in_sector(self.n_orb, n_up, n_down))
            .map(|(_, &c)| c)
            .sum();
        good as f64 / self.total_shots as f64
    }

    /// Empirical probabilities of the sector-valid outcomes, relative to all
    /// shots (so they sum to the correct-number fraction).
    pub fn sector_distribution(&self, n_up: usize, n_down: usize) -> (Vec<Determinant>, Vec<f64>) {
        let total = self.total_shots.max(1) as f64;
        self.counts
            .iter()
            .map(|(&b, &c)| (Determinant::from_bitstring(b, self.n_orb), c as f64 / total))
            .filter(|(d, _)| d.in_sector(self.n_orb, n_up, n_down))
            .unzip()
    }

    pub fn format_bits(&self, bits: u64) -> String {
        format!("{:0width$b}", bits, width = 2 * self.n_orb)
    }

    /// CSV with header `bitstring,count`; bitstrings are written
    /// most-significant qubit first.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for (&bits, &count) in &self.counts {
            w.serialize(CsvRow {
                bitstring: self.format_bits(bits),
                count,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, origin: SampleOrigin) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut set: Option<SampleSet> = None;
        for (line, row) in r.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let width = row.bitstring.len();
            if width == 0 || width % 2 != 0 || width > 64 {
                return Err(Error::Parse(format!("row {}: bitstring width {width} is not an even 2..64", line + 1)));
            }
            let bits = u64::from_str_radix(&row.bitstring, 2)
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
            let s = set.get_or_insert_with(|| SampleSet::new(width / 2, origin));
            if 2 * s.n_orb != width {
                return Err(Error::Parse(format!("row {}: inconsistent bitstring width", line + 1)));
            }
            s.add(bits, row.count);
        }
        set.ok_or_else(|| Error::Empty("sample file has no rows".into()))
    }
}

/// `shots` i.i.d. draws from `probs` (normalized on the fly) over `dets`.
pub fn sample_distribution(
    dets: &[Determinant],
    probs: &[f64],
    n_orb: usize,
    shots: u64,
    seed: u64,
) -> Result<SampleSet> {
    if dets.len() != probs.len() {
        return Err(Error::Dimension("determinant and probability lists differ in length".into()));
    }
    if shots == 0 {
        return Err(Error::Parameter("shots must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        if !(p >= 0.0) {
            return Err(Error::Parameter(format!("invalid probability {p}")));
        }
        acc += p;
        cdf.push(acc);
    }
    if acc <= 0.0 {
        return Err(Error::Empty("distribution has no weight".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0u64; dets.len()];
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(dets.len() - 1);
        hits[k] += 1;
    }
    let mut set = SampleSet::new(n_orb, SampleOrigin::Simulated);
    for (d, &h) in dets.iter().zip(&hits) {
        set.add(d.to_bitstring(n_orb), h);
    }
    Ok(set)
}

pub fn sample(state: &SectorState, shots: u64, seed: u64) -> Result<SampleSet> {
    sample_distribution(&state.determinants(), &state.probabilities(), state.n_orb(), shots, seed)
}

/// Flips every bit of every shot independently with probability `p_flip`.
pub fn apply_bitflip_noise(s: &SampleSet, p_flip: f64, seed: u64) -> Result<SampleSet> {
    if !(0.0..=1.0).contains(&p_flip) {
        return Err(Error::Parameter(format!("p_flip = {p_flip} outside [0, 1]")));
    }
    let nq = 2 * s.n_orb;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SampleSet::new(s.n_orb, SampleOrigin::Noisy);
    for (&bits, &count) in &s.counts {
        for _ in 0..count {
            let mut b = bits;
            for q in 0..nq {
                if rng.random::<f64>() < p_flip {
                    b ^= 1 << q;
                }
            }
            out.add(b, 1);
        }
    }
    debug_assert_eq!(out.counts.keys().fold(0, |m, &b| m | b) & !low_mask(nq), 0);
    Ok(out)
}

/// Probability that i.i.d. flips leave a `k`-electron string over `n`
/// orbitals with `k` electrons: equal numbers of lost and gained electrons.
fn number_preserved(n: usize, k: usize, p: f64) -> f64 {
    (0..=k.min(n - k))
        .map(|m| {
            binomial(k, m) as f64 * binomial(n - k, m) as f64 * p.powi(2 * m as i32) * (1.0 - p).powi((n - 2 * m) as i32)
        })
        .sum()
}

/// Probability that a sector-valid shot still has the right electron count in
/// both registers after flips with probability `p`.
pub fn correct_number_probability(n_orb: usize, n_up: usize, n_down: usize, p: f64) -> f64 {
    number_preserved(n_orb, n_up, p) * number_preserved(n_orb, n_down, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub p_flip: f64,
    /// Expected fraction of shots with correct electron numbers.
    pub correct_fraction: f64,
    /// Expected fraction of shots with no flipped bit at all.
    pub error_free_fraction: f64,
}

/// Flip probability in `[0, ½]` at which the expected correct-number
/// fraction equals `target`.
pub fn calibrate_noise(n_orb: usize, n_up: usize, n_down: usize, target: f64) -> Result<NoiseCalibration> {
    let f = |p| correct_number_probability(n_orb, n_up, n_down, p);
    let floor = f(0.5);
    if !(target > floor && target <= 1.0) {
        return Err(Error::Parameter(format!(
            "target correct-number fraction {target} outside ({floor:.4}, 1]"
        )));
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let p_flip = 0.5 * (lo + hi);
    Ok(NoiseCalibration {
        p_flip,
        correct_fraction: f(p_flip),
        error_free_fraction: (1.0 - p_flip).powi(2 * n_orb as i32),
    })
}

/// `(1 − p)^S` for real `S`.
fn miss(p: f64, shots: f64) -> f64 {
    if shots == 0.0 {
        1.0
    } else if p >= 1.0 {
        0.0
    } else {
        (shots * (-p).ln_1p()).exp()
    }
}

/// Expected number of distinct outcomes in `shots` draws: `Σ 1 − (1 − p_i)^S`.
pub fn expected_unique(probs: &[f64], shots: f64) -> f64 {
    probs.iter().map(|&p| 1.0 - miss(p, shots)).sum()
}

/// Expected ground-state weight outside the sampled set: `Σ w_i (1 − p_i)^S`.
pub fn expected_missing_fraction(weights: &[f64], probs: &[f64], shots: f64) -> f64 {
    debug_assert_eq!(weights.len(), probs.len());
    weights.iter().zip(probs).map(|(&w, &p)| w * miss(p, shots)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(a: u64, b: u64) -> Determinant {
        Determinant::new(a, b)
    }

    #[test]
    fn concentrated_state_gives_identical_shots() {
        let s = sample_distribution(&[d(1, 2), d(2, 1)], &[1.0, 0.0], 2, 500, 3).unwrap();
        assert_eq!(s.unique(), 1);
        assert_eq!(s.counts[&d(1, 2).to_bitstring(2)], 500);
        assert!(sample_distribution(&[d(1, 2)], &[1.0], 2, 0, 3).is_err());
    }

    #[test]
    fn uniform_pair_frequencies_within_five_sigma() {
        let shots = 100_000u64;
        let s = sample_distribution(&[d(1, 2), d(2, 1)], &[0.5, 0.5], 2, shots, 11).unwrap();
        let sigma = (shots as f64 * 0.25).sqrt();
        for &c in s.counts.values() {
            assert!((c as f64 - shots as f64 / 2.0).abs() < 5.0 * sigma);
        }
        assert_eq!(s, sample_distribution(&[d(1, 2), d(2, 1)], &[0.5, 0.5], 2, shots, 11).unwrap());
    }

    #[test]
    fn noise_extremes() {
        let mut s = SampleSet::new(3, SampleOrigin::Simulated);
        s.add(0b011_101, 7);
        s.add(0b110_001, 2);
        let same = apply_bitflip_noise(&s, 0.0, 1).unwrap();
        assert_eq!(same.counts, s.counts);
        assert_eq!(same.origin, SampleOrigin::Noisy);
        let flipped = apply_bitflip_noise(&s, 1.0, 1).unwrap();
        assert_eq!(flipped.counts[&(!0b011_101u64 & 0b111_111)], 7);
        assert_eq!(flipped.total_shots, 9);
        assert!(apply_bitflip_noise(&s, 1.5, 1).is_err());
    }

    #[test]
    fn calibration_hits_target() {
        let cal = calibrate_noise(12, 9, 9, 0.35).unwrap();
        assert!((cal.correct_fraction - 0.35).abs() < 1e-10);
        assert!(cal.error_free_fraction < cal.correct_fraction);
        assert!(calibrate_noise(12, 9, 9, 0.001).is_err());
        assert_eq!(correct_number_probability(4, 2, 1, 0.0), 1.0);
    }

    #[test]
    fn closed_forms() {
        assert!((expected_unique(&[1.0], 17.0) - 1.0).abs() < 1e-15);
        assert!((expected_unique(&[0.5, 0.5], 2.0) - 1.5).abs() < 1e-15);
        assert!((expected_unique(&[0.2, 0.3], 1.0) - 0.5).abs() < 1e-15);
        let w = [0.6, 0.3, 0.1];
        assert!((expected_missing_fraction(&w, &[0.5, 0.5, 0.0], 0.0) - 1.0).abs() < 1e-15);
        assert!(expected_missing_fraction(&w, &w, 1e6) < 1e-12);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut s = SampleSet::new(4, SampleOrigin::Simulated);
        s.add(0b1000_0001, 3);
        s.add(0b0111_0111, 12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "bitstring,count\n01110111,12\n10000001,3\n");
        let back = SampleSet::read_csv(&path, SampleOrigin::Simulated).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.format_bits(0b0000_0001), "00000001");
    }
}
