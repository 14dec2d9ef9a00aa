//! Matrix-free Davidson iteration for the lowest eigenpair of a real
//! symmetric operator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy)]
pub struct DavidsonOptions {
    /// Subspace size at which the search space collapses to the current
    /// Ritz vector plus the newest correction.
    pub max_subspace: usize,
    pub max_iterations: usize,
    /// Convergence when ‖Av − θv‖ ≤ tol · max(1, |θ|).
    pub tolerance: f64,
    /// Below this dimension the operator is materialized and solved densely.
    pub dense_below: usize,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions {
            max_subspace: 32,
            max_iterations: 200,
            tolerance: 1e-8,
            dense_below: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Orthogonalizes `t` against `basis` (two Gram-Schmidt passes) and
/// normalizes; returns the norm left after projection.
fn orthonormalize_against(t: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    let before = dot(t, t).sqrt();
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, t);
            axpy(t, -c, b);
        }
    }
    let after = normalize(t);
    if before > 0.0 {
        after / before
    } else {
        0.0
    }
}

/// Dense solve of a materialized operator.
fn dense_lowest(dim: usize, apply: &dyn Fn(&[f64], &mut [f64])) -> Eigenpair {
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for j in 0..dim {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        apply(&e, &mut col);
        for i in 0..dim {
            m[(i, j)] = col[i];
        }
    }
    let (w, v) = linalg::eigh(&m);
    let vector: Vec<f64> = v.column(0).iter().copied().collect();
    apply(&vector, &mut col);
    let residual = col
        .iter()
        .zip(&vector)
        .map(|(a, x)| (a - w[0] * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Eigenpair {
        value: w[0],
        vector,
        iterations: 0,
        residual,
    }
}

/// Lowest eigenpair of the symmetric operator `apply` with diagonal `diag`.
pub fn lowest_eigenpair(
    diag: &[f64],
    apply: &dyn Fn(&[f64], &mut [f64]),
    opts: &DavidsonOptions,
) -> Result<Eigenpair> {
    lowest_eigenpair_from(diag, apply, None, opts)
}

/// As [`lowest_eigenpair`], starting from `guess` instead of the unit vector
/// on the lowest diagonal entry.
///
/// The iteration never leaves the invariant subspaces its start vector
/// touches, so a faint deterministic admixture of every component is always
/// added: without it a symmetric guess converges to the lowest state of its
/// own symmetry sector rather than the ground state.
pub fn lowest_eigenpair_from(
    diag: &[f64],
    apply: &dyn Fn(&[f64], &mut [f64]),
    guess: Option<&[f64]>,
    opts: &DavidsonOptions,
) -> Result<Eigenpair> {
    let dim = diag.len();
    if dim == 0 {
        return Err(Error::Empty("Davidson on a zero-dimensional space".into()));
    }
    if guess.is_some_and(|g| g.len() != dim) {
        return Err(Error::Dimension("Davidson guess length differs from the operator dimension".into()));
    }
    if dim < opts.dense_below.max(2) {
        return Ok(dense_lowest(dim, apply));
    }
    let max_sub = opts.max_subspace.max(3).min(dim);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    // Projected matrix, kept in sync with `basis`.
    let mut proj = DMatrix::<f64>::zeros(max_sub, max_sub);

    let push = |v: Vec<f64>, basis: &mut Vec<Vec<f64>>, images: &mut Vec<Vec<f64>>, proj: &mut DMatrix<f64>| {
        let mut av = vec![0.0; v.len()];
        apply(&v, &mut av);
        let k = basis.len();
        for (i, b) in basis.iter().enumerate() {
            let x = dot(b, &av);
            proj[(i, k)] = x;
            proj[(k, i)] = x;
        }
        proj[(k, k)] = dot(&v, &av);
        basis.push(v);
        images.push(av);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v0: Vec<f64> = (0..dim).map(|_| 1e-4 * (rng.random::<f64>() - 0.5)).collect();
    match guess {
        Some(g) => {
            let scale = dot(g, g).sqrt();
            if !(scale > 0.0) {
                return Err(Error::Parameter("Davidson guess has zero norm".into()));
            }
            axpy(&mut v0, 1.0 / scale, g);
        }
        None => {
            let start = (0..dim).min_by(|&a, &b| diag[a].total_cmp(&diag[b])).unwrap();
            v0[start] = 1.0;
        }
    }
    normalize(&mut v0);
    push(v0, &mut basis, &mut images, &mut proj);

    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        let m = basis.len();
        let sub = proj.view((0, 0), (m, m)).into_owned();
        let (w, s) = linalg::eigh(&sub);
        let theta = w[0];
        let mut x = vec![0.0; dim];
        let mut ax = vec![0.0; dim];
        for k in 0..m {
            axpy(&mut x, s[(k, 0)], &basis[k]);
            axpy(&mut ax, s[(k, 0)], &images[k]);
        }
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, xi)| a - theta * xi).collect();
        residual = dot(&r, &r).sqrt();
        if residual <= opts.tolerance * theta.abs().max(1.0) {
            let norm = normalize(&mut x);
            return Ok(Eigenpair {
                value: theta,
                vector: x,
                iterations: iteration,
                residual: residual / norm.max(f64::MIN_POSITIVE),
            });
        }

        let mut t: Vec<f64> = r
            .iter()
            .zip(diag)
            .map(|(ri, di)| {
                let denom = di - theta;
                let denom = if denom.abs() < 1e-8 { 1e-8f64.copysign(denom) } else { denom };
                -ri / denom
            })
            .collect();

        if m >= max_sub {
            // Thick restart onto the lowest few Ritz vectors; their images
            // follow from the stored ones and the projected matrix becomes
            // diagonal.
            let keep = (max_sub / 4).clamp(1, m - 1);
            let mut nb = Vec::with_capacity(max_sub);
            let mut ni = Vec::with_capacity(max_sub);
            for c in 0..keep {
                let mut v = vec![0.0; dim];
                let mut av = vec![0.0; dim];
                for k in 0..m {
                    axpy(&mut v, s[(k, c)], &basis[k]);
                    axpy(&mut av, s[(k, c)], &images[k]);
                }
                nb.push(v);
                ni.push(av);
            }
            proj.fill(0.0);
            for c in 0..keep {
                proj[(c, c)] = w[c];
            }
            basis = nb;
            images = ni;
        }

        let mut kept = orthonormalize_against(&mut t, &basis);
        if kept < 1e-10 {
            // Preconditioned residual lies in the subspace; fall back to the raw residual.
            t = r.clone();
            kept = orthonormalize_against(&mut t, &basis);
            if kept < 1e-10 {
                break;
            }
        }
        push(t, &mut basis, &mut images, &mut proj);
    }
    Err(Error::DavidsonNotConverged {
        iterations: opts.max_iterations,
        residual,
    })
}
