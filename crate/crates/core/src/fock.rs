//! Occupation-number strings and fermionic sign bookkeeping.
//!
//! A string is a bitmask over spatial orbitals (bit `i` set when orbital `i`
//! is occupied). Creation operators in a determinant are ordered by ascending
//! spin-orbital index, α register first, which is the Jordan-Wigner ordering
//! used by the circuit simulators.

/// Bit mask with the `n` lowest bits set.
#[inline]
pub fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Occupied orbital indices of `s`, ascending.
pub fn occupied(s: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(s.count_ones() as usize);
    let mut bits = s;
    while bits != 0 {
        out.push(bits.trailing_zeros() as usize);
        bits &= bits - 1;
    }
    out
}

/// Number of occupied orbitals strictly below `i`.
#[inline]
pub fn count_below(s: u64, i: usize) -> u32 {
    (s & low_mask(i)).count_ones()
}

/// Applies `a_i` to `s`; returns the new string and the sign, or `None`.
#[inline]
pub fn annihilate(s: u64, i: usize) -> Option<(u64, f64)> {
    if s >> i & 1 == 0 {
        return None;
    }
    let sign = if count_below(s, i) % 2 == 0 { 1.0 } else { -1.0 };
    Some((s & !(1u64 << i), sign))
}

/// Applies `a†_i` to `s`; returns the new string and the sign, or `None`.
#[inline]
pub fn create(s: u64, i: usize) -> Option<(u64, f64)> {
    if s >> i & 1 == 1 {
        return None;
    }
    let sign = if count_below(s, i) % 2 == 0 { 1.0 } else { -1.0 };
    Some((s | (1u64 << i), sign))
}

/// Applies `E_pq = a†_p a_q` to `s`.
#[inline]
pub fn excite(s: u64, p: usize, q: usize) -> Option<(u64, f64)> {
    let (t, s1) = annihilate(s, q)?;
    let (u, s2) = create(t, p)?;
    Some((u, s1 * s2))
}

/// Binomial coefficient as u64 (exact for the sizes used here).
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// All `n`-orbital strings with `k` electrons, ascending numeric order, with
/// combinatorial ranking.
#[derive(Debug, Clone)]
pub struct StringSpace {
    n: usize,
    k: usize,
    strings: Vec<u64>,
    // binom[i][j] = C(i, j)
    binom: Vec<Vec<u64>>,
}

impl StringSpace {
    pub fn new(n: usize, k: usize) -> Self {
        assert!(n < 64, "at most 63 orbitals per spin register");
        let mut binom = vec![vec![0u64; k + 2]; n + 1];
        for (i, row) in binom.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = binomial(i, j);
            }
        }
        let mut strings = Vec::with_capacity(binomial(n, k) as usize);
        if k <= n {
            if k == 0 {
                strings.push(0);
            } else {
                // Gosper's hack enumerates same-popcount masks in ascending order.
                let mut s = low_mask(k);
                let limit = 1u64 << n;
                while s < limit {
                    strings.push(s);
                    let c = s & s.wrapping_neg();
                    let r = s + c;
                    s = (((r ^ s) >> 2) / c) | r;
                }
            }
        }
        StringSpace {
            n,
            k,
            strings,
            binom,
        }
    }

    pub fn n_orb(&self) -> usize {
        self.n
    }

    pub fn n_elec(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn strings(&self) -> &[u64] {
        &self.strings
    }

    pub fn string(&self, index: usize) -> u64 {
        self.strings[index]
    }

    /// Position of `s` in ascending order; `None` when the popcount or width
    /// does not match this space.
    pub fn rank(&self, s: u64) -> Option<usize> {
        if s.count_ones() as usize != self.k || (s & !low_mask(self.n)) != 0 {
            return None;
        }
        // Rank among ascending k-subsets equals sum over set bits (c_j at
        // position j-th set bit) of C(c_j, j+1).
        let mut r = 0u64;
        for (j, c) in occupied(s).into_iter().enumerate() {
            r += self.binom[c][j + 1];
        }
        Some(r as usize)
    }
}

/// One entry in the single-excitation list of a string: `<target|E_pq|source> = sign`.
#[derive(Debug, Clone, Copy)]
pub struct Excitation {
    pub target: u32,
    pub p: u8,
    pub q: u8,
    pub sign: f64,
}

/// For every string in `space`, all `E_pq` with `q` occupied and `p` empty or
/// `p == q` (number operators included).
pub fn single_excitation_lists(space: &StringSpace) -> Vec<Vec<Excitation>> {
    let n = space.n_orb();
    space
        .strings()
        .iter()
        .map(|&s| {
            let mut list = Vec::new();
            for q in occupied(s) {
                for p in 0..n {
                    if p != q && s >> p & 1 == 1 {
                        continue;
                    }
                    let (t, sign) = excite(s, p, q).expect("valid excitation");
                    let target = space.rank(t).expect("same popcount") as u32;
                    list.push(Excitation {
                        target,
                        p: p as u8,
                        q: q as u8,
                        sign,
                    });
                }
            }
            list
        })
        .collect()
}

/// Slater determinant as a pair of occupation strings. Qubit `i` of a
/// measured bitstring is α orbital `i` for `i < n_orb` and β orbital
/// `i − n_orb` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant {
    pub alpha: u64,
    pub beta: u64,
}

impl Determinant {
    pub const fn new(alpha: u64, beta: u64) -> Self {
        Determinant { alpha, beta }
    }

    /// Lowest `n_up` α and `n_down` β orbitals filled.
    pub fn reference(n_up: usize, n_down: usize) -> Self {
        Determinant::new(low_mask(n_up), low_mask(n_down))
    }

    pub fn from_bitstring(bits: u64, n_orb: usize) -> Self {
        Determinant::new(bits & low_mask(n_orb), (bits >> n_orb) & low_mask(n_orb))
    }

    pub fn to_bitstring(self, n_orb: usize) -> u64 {
        self.alpha | self.beta << n_orb
    }

    pub fn n_alpha(self) -> usize {
        self.alpha.count_ones() as usize
    }

    pub fn n_beta(self) -> usize {
        self.beta.count_ones() as usize
    }

    pub fn in_sector(self, n_orb: usize, n_up: usize, n_down: usize) -> bool {
        let outside = !low_mask(n_orb);
        self.alpha & outside == 0 && self.beta & outside == 0 && self.n_alpha() == n_up && self.n_beta() == n_down
    }

    /// Number of spin-orbitals that must change occupation, halved.
    pub fn excitation_distance(self, other: Determinant) -> usize {
        ((self.alpha ^ other.alpha).count_ones() + (self.beta ^ other.beta).count_ones()) as usize / 2
    }
}

impl std::fmt::Display for Determinant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:x},{:x}", self.alpha, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_matches_enumeration_order() {
        let space = StringSpace::new(7, 3);
        assert_eq!(space.len(), 35);
        for (i, &s) in space.strings().iter().enumerate() {
            assert_eq!(space.rank(s), Some(i));
            assert_eq!(s.count_ones(), 3);
        }
        assert!(space.strings().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(space.rank(0b1111), None);
        assert_eq!(space.rank(1 << 9 | 0b11), None);
    }

    #[test]
    fn empty_and_full_spaces() {
        assert_eq!(StringSpace::new(4, 0).strings(), &[0]);
        assert_eq!(StringSpace::new(4, 4).strings(), &[0b1111]);
        assert_eq!(StringSpace::new(12, 9).len(), 220);
    }

    #[test]
    fn signs_follow_jordan_wigner_order() {
        // a_2 on |0,1,2> passes two occupied modes.
        assert_eq!(annihilate(0b111, 2), Some((0b011, 1.0)));
        assert_eq!(annihilate(0b111, 1), Some((0b101, -1.0)));
        assert_eq!(create(0b101, 1), Some((0b111, -1.0)));
        assert_eq!(create(0b101, 0), None);
        // hop 0 -> 2 across occupied 1
        assert_eq!(excite(0b011, 2, 0), Some((0b110, -1.0)));
    }

    #[test]
    fn determinant_bitstring_layout() {
        // L=2: α on qubits 0-3, β on qubits 4-7.
        let d = Determinant::from_bitstring(0b1011_0111, 4);
        assert_eq!((d.alpha, d.beta), (0b0111, 0b1011));
        assert_eq!(d.to_bitstring(4), 0b1011_0111);
        assert!(d.in_sector(4, 3, 3));
        assert!(!d.in_sector(3, 3, 3));
        assert_eq!(Determinant::reference(3, 2), Determinant::new(0b111, 0b11));
        assert_eq!(d.excitation_distance(Determinant::new(0b1110, 0b1011)), 1);
    }

    #[test]
    fn excitation_list_sizes() {
        let space = StringSpace::new(5, 2);
        let lists = single_excitation_lists(&space);
        // 2 occupied * (3 empty + itself)
        assert!(lists.iter().all(|l| l.len() == 8));
    }
}
