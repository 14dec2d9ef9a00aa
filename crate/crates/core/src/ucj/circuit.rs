//! Gate-level circuits over `2·n_orb` qubits and the Givens networks that
//! realize real orbital rotations.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Gates of the cluster-Jastrow circuits. `XXPlusYY` on adjacent qubits
/// `(a, b)` maps `a†_a → c a†_a − i s e^{iβ} a†_b` and
/// `a†_b → −i s e^{−iβ} a†_a + c a†_b` with `c = cos(θ/2)`, `s = sin(θ/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X(usize),
    XXPlusYY { a: usize, b: usize, theta: f64, beta: f64 },
    Phase { q: usize, phi: f64 },
    CPhase { a: usize, b: usize, phi: f64 },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::X(q) | Gate::Phase { q, .. } => vec![q],
            Gate::XXPlusYY { a, b, .. } | Gate::CPhase { a, b, .. } => vec![a, b],
        }
    }

    pub fn is_number_conserving(&self) -> bool {
        !matches!(self, Gate::X(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::X(_) => "X",
            Gate::XXPlusYY { .. } => "XXPLUSYY",
            Gate::Phase { .. } => "P",
            Gate::CPhase { .. } => "CP",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::X(q) => write!(f, "X {q}"),
            Gate::XXPlusYY { a, b, theta, beta } => write!(f, "XXPLUSYY {a} {b} {theta:?} {beta:?}"),
            Gate::Phase { q, phi } => write!(f, "P {q} {phi:?}"),
            Gate::CPhase { a, b, phi } => write!(f, "CP {a} {b} {phi:?}"),
        }
    }
}

impl FromStr for Gate {
    type Err = Error;
    fn from_str(line: &str) -> Result<Self> {
        let mut it = line.split_whitespace();
        let name = it.next().ok_or_else(|| Error::Parse("empty gate line".into()))?;
        let rest: Vec<&str> = it.collect();
        let bad = || Error::Parse(format!("malformed gate line {line:?}"));
        let qubit = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let angle = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let gate = match (name.to_ascii_uppercase().as_str(), rest.as_slice()) {
            ("X", [q]) => Gate::X(qubit(q)?),
            ("XXPLUSYY", [a, b, t, be]) => Gate::XXPlusYY {
                a: qubit(a)?,
                b: qubit(b)?,
                theta: angle(t)?,
                beta: angle(be)?,
            },
            ("P", [q, p]) => Gate::Phase {
                q: qubit(q)?,
                phi: angle(p)?,
            },
            ("CP", [a, b, p]) => Gate::CPhase {
                a: qubit(a)?,
                b: qubit(b)?,
                phi: angle(p)?,
            },
            _ => return Err(bad()),
        };
        Ok(gate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        if qs.iter().any(|&q| q >= self.n_qubits) {
            return Err(Error::Parameter(format!("{gate} addresses a qubit outside 0..{}", self.n_qubits)));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::Parameter(format!("{gate} acts twice on one qubit")));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_orb(&self) -> usize {
        self.n_qubits / 2
    }

    /// Text form: a `QUBITS n` header then one gate per line. Angles are
    /// written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = format!("QUBITS {}\n", self.n_qubits);
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty circuit file".into()))?;
        let n_qubits = header
            .strip_prefix("QUBITS")
            .and_then(|n| n.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("expected `QUBITS n`, found {header:?}")))?;
        let mut c = Circuit::new(n_qubits);
        for line in lines {
            c.push(line.parse()?)?;
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Circuit::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Gate counts. Two-qubit gates are XX+YY and CP; CP gates are split by
/// whether both qubits sit in the same spin register.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCensus {
    pub n_x: usize,
    pub n_phase: usize,
    pub n_xxpyy: usize,
    pub n_cp: usize,
    pub n_cp_same: usize,
    pub n_cp_opp: usize,
    pub n_two_qubit: usize,
}

pub fn gate_census(c: &Circuit) -> GateCensus {
    let n = c.n_orb();
    let mut census = GateCensus::default();
    for g in &c.gates {
        match *g {
            Gate::X(_) => census.n_x += 1,
            Gate::Phase { .. } => census.n_phase += 1,
            Gate::XXPlusYY { .. } => census.n_xxpyy += 1,
            Gate::CPhase { a, b, .. } => {
                census.n_cp += 1;
                if (a < n) == (b < n) {
                    census.n_cp_same += 1;
                } else {
                    census.n_cp_opp += 1;
                }
            }
        }
    }
    census.n_two_qubit = census.n_xxpyy + census.n_cp;
    census
}

/// A real rotation by `angle` of adjacent orbitals `(p, p + 1)`:
/// `[[cos, −sin], [sin, cos]]` acting on their coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Givens {
    pub p: usize,
    pub angle: f64,
}

/// `U = R_1 ⋯ R_m · diag(signs)` for a real orthogonal `U`, with every `R_k`
/// a [`Givens`] rotation on neighbouring orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct GivensNetwork {
    pub n: usize,
    pub rotations: Vec<Givens>,
    pub signs: Vec<f64>,
}

/// Entries smaller than this are treated as already eliminated.
const GIVENS_ZERO: f64 = 1e-14;

pub fn givens_decomposition(u: &DMatrix<f64>) -> Result<GivensNetwork> {
    let n = u.nrows();
    let deviation = linalg::orthogonality_deviation(u);
    if deviation > 1e-10 {
        return Err(Error::NotUnitary { deviation });
    }
    let mut a = u.clone();
    // Each left factor G zeroes a[i][j] using rows (i − 1, i); then
    // G_m ⋯ G_1 U = D and U = G_1ᵀ ⋯ G_mᵀ D.
    let mut rotations = Vec::new();
    for j in 0..n.saturating_sub(1) {
        for i in (j + 1..n).rev() {
            let (x, y) = (a[(i - 1, j)], a[(i, j)]);
            if y.abs() < GIVENS_ZERO {
                continue;
            }
            let r = x.hypot(y);
            let (c, s) = (x / r, y / r);
            for k in 0..n {
                let (top, bottom) = (a[(i - 1, k)], a[(i, k)]);
                a[(i - 1, k)] = c * top + s * bottom;
                a[(i, k)] = -s * top + c * bottom;
            }
            rotations.push(Givens {
                p: i - 1,
                angle: s.atan2(c),
            });
        }
    }
    let signs = (0..n).map(|k| if a[(k, k)] < 0.0 { -1.0 } else { 1.0 }).collect();
    Ok(GivensNetwork { n, rotations, signs })
}

impl GivensNetwork {
    /// Reassembles the orthogonal matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.signs.clone()));
        for g in self.rotations.iter().rev() {
            let (c, s) = (g.angle.cos(), g.angle.sin());
            for k in 0..self.n {
                let (top, bottom) = (m[(g.p, k)], m[(g.p + 1, k)]);
                m[(g.p, k)] = c * top - s * bottom;
                m[(g.p + 1, k)] = s * top + c * bottom;
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    /// Gates realizing the orbital rotation on the register starting at
    /// qubit `offset`, in time order (sign phases first).
    pub fn gates(&self, offset: usize) -> Vec<Gate> {
        let mut out = self.sign_gates(offset, std::f64::consts::PI);
        for g in self.rotations.iter().rev() {
            out.push(Gate::XXPlusYY {
                a: offset + g.p,
                b: offset + g.p + 1,
                theta: 2.0 * g.angle,
                beta: std::f64::consts::FRAC_PI_2,
            });
        }
        out
    }

    /// Gates realizing the inverse rotation, in time order.
    pub fn inverse_gates(&self, offset: usize) -> Vec<Gate> {
        let mut out: Vec<Gate> = self
            .rotations
            .iter()
            .map(|g| Gate::XXPlusYY {
                a: offset + g.p,
                b: offset + g.p + 1,
                theta: -2.0 * g.angle,
                beta: std::f64::consts::FRAC_PI_2,
            })
            .collect();
        out.extend(self.sign_gates(offset, -std::f64::consts::PI));
        out
    }

    fn sign_gates(&self, offset: usize, phi: f64) -> Vec<Gate> {
        self.signs
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < 0.0)
            .map(|(k, _)| Gate::Phase { q: offset + k, phi })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_needs_no_gates() {
        let net = givens_decomposition(&DMatrix::identity(5, 5)).unwrap();
        assert!(net.is_empty());
        assert!(net.gates(0).is_empty());
    }

    #[test]
    fn random_rotation_reassembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 3, 6, 9] {
            let u = linalg::random_orthogonal(n, &mut rng);
            let net = givens_decomposition(&u).unwrap();
            assert_eq!(net.len(), n * (n - 1) / 2);
            assert!((net.matrix() - &u).amax() < 1e-12);
        }
    }

    #[test]
    fn two_orbital_rotation_is_one_gate() {
        let t: f64 = 0.4;
        let u = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let net = givens_decomposition(&u).unwrap();
        let gates = net.gates(0);
        assert_eq!(gates.len(), 1);
        match gates[0] {
            Gate::XXPlusYY { theta, .. } => assert!((theta - 0.8).abs() < 1e-14),
            g => panic!("unexpected {g}"),
        }
    }

    #[test]
    fn reflections_become_phase_gates() {
        let u = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 1.0]));
        let net = givens_decomposition(&u).unwrap();
        assert_eq!(net.gates(3), vec![Gate::Phase { q: 4, phi: std::f64::consts::PI }]);
    }

    #[test]
    fn non_orthogonal_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(givens_decomposition(&m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn text_round_trip() {
        let mut c = Circuit::new(8);
        c.push(Gate::X(0)).unwrap();
        c.push(Gate::XXPlusYY { a: 1, b: 2, theta: 0.1 + 0.2, beta: 1.2345678901234567 }).unwrap();
        c.push(Gate::Phase { q: 7, phi: -3.0e-17 }).unwrap();
        c.push(Gate::CPhase { a: 0, b: 5, phi: std::f64::consts::PI }).unwrap();
        let back = Circuit::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert!(Circuit::from_text("QUBITS 2\nCP 0 1\n").is_err());
        assert!(c.push(Gate::X(8)).is_err());
    }

    #[test]
    fn census_splits_cp_gates_by_register() {
        let mut c = Circuit::new(4);
        c.push(Gate::X(0)).unwrap();
        c.push(Gate::CPhase { a: 0, b: 1, phi: 0.1 }).unwrap();
        c.push(Gate::CPhase { a: 0, b: 2, phi: 0.1 }).unwrap();
        c.push(Gate::XXPlusYY { a: 2, b: 3, theta: 0.1, beta: 0.0 }).unwrap();
        let census = gate_census(&c);
        assert_eq!((census.n_cp_same, census.n_cp_opp, census.n_xxpyy, census.n_two_qubit), (1, 1, 1, 3));
    }
}
