use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fock::{Determinant, StringSpace};

/// Sorted, duplicate-free set of determinants sharing one particle-number
/// sector. Sorting is by `(alpha, beta)`, which is also α-major ordering by
/// string rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminantBasis {
    n_orb: usize,
    n_up: usize,
    n_down: usize,
    dets: Vec<Determinant>,
}

impl DeterminantBasis {
    /// Builds a basis, merging duplicates. Every determinant must belong to
    /// the `(n_up, n_down)` sector over `n_orb` orbitals.
    pub fn new(
        n_orb: usize,
        n_up: usize,
        n_down: usize,
        dets: impl IntoIterator<Item = Determinant>,
    ) -> Result<Self> {
        let mut basis = DeterminantBasis {
            n_orb,
            n_up,
            n_down,
            dets: Vec::new(),
        };
        basis.extend(dets)?;
        Ok(basis)
    }

    pub fn empty(n_orb: usize, n_up: usize, n_down: usize) -> Self {
        DeterminantBasis {
            n_orb,
            n_up,
            n_down,
            dets: Vec::new(),
        }
    }

    /// Every determinant of the sector.
    pub fn full(n_orb: usize, n_up: usize, n_down: usize) -> Self {
        let a = StringSpace::new(n_orb, n_up);
        let b = StringSpace::new(n_orb, n_down);
        let mut dets = Vec::with_capacity(a.len() * b.len());
        for &alpha in a.strings() {
            for &beta in b.strings() {
                dets.push(Determinant::new(alpha, beta));
            }
        }
        DeterminantBasis {
            n_orb,
            n_up,
            n_down,
            dets,
        }
    }

    /// Adds determinants, keeping the set sorted and unique. Returns how many
    /// were new.
    pub fn extend(&mut self, dets: impl IntoIterator<Item = Determinant>) -> Result<usize> {
        let before = self.dets.len();
        for d in dets {
            if !d.in_sector(self.n_orb, self.n_up, self.n_down) {
                return Err(Error::OutsideSector(format!(
                    "{d} is not in the ({}, {}) sector over {} orbitals",
                    self.n_up, self.n_down, self.n_orb
                )));
            }
            self.dets.push(d);
        }
        self.dets.sort_unstable();
        self.dets.dedup();
        Ok(self.dets.len() - before)
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn dets(&self) -> &[Determinant] {
        &self.dets
    }

    pub fn index_of(&self, d: Determinant) -> Option<usize> {
        self.dets.binary_search(&d).ok()
    }

    pub fn contains(&self, d: Determinant) -> bool {
        self.index_of(d).is_some()
    }

    /// One `alpha_hex,beta_hex` pair per line, in basis order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for d in &self.dets {
            writeln!(w, "{:x},{:x}", d.alpha, d.beta)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the text format; the sector is taken from the first line and
    /// enforced on the rest. An empty file needs the sector given explicitly
    /// through [`DeterminantBasis::empty`].
    pub fn load(path: impl AsRef<Path>, n_orb: usize) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut dets = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected alpha_hex,beta_hex", lineno + 1)))?;
            let parse = |s: &str| {
                u64::from_str_radix(s.trim(), 16)
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            dets.push(Determinant::new(parse(a)?, parse(b)?));
        }
        let first = dets
            .first()
            .copied()
            .ok_or_else(|| Error::Empty("determinant file has no entries".into()))?;
        DeterminantBasis::new(n_orb, first.n_alpha(), first.n_beta(), dets)
    }
}
