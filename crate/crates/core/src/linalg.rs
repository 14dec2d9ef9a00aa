//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Eigenvalues closer than this are treated as degenerate when ordering columns.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition with a canonical layout: eigenvalues ascending,
/// each column's first nonzero entry positive, and degenerate columns ordered
/// lexicographically by coefficients.
pub fn eigh(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut cols: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            fix_phase(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    // A tolerance inside the comparator would not be transitive: sort by
    // value first, then reorder each run of near-equal values.
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cols[end].0 - cols[end - 1].0 < DEGENERACY_TOL {
            end += 1;
        }
        cols[start..end].sort_by(|a, b| lex_cmp(&b.1, &a.1));
        start = end;
    }
    let values = DVector::from_iterator(n, cols.iter().map(|c| c.0));
    let vectors = DMatrix::from_fn(n, n, |i, j| cols[j].1[i]);
    (values, vectors)
}

fn fix_phase(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Lexicographic order on coefficients snapped to a 1e-12 grid, so that
/// rounding noise does not decide the order yet the relation stays total.
fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    let snap = |x: f64| (x * 1e12).round();
    for (x, y) in a.iter().zip(b) {
        let o = snap(*x).total_cmp(&snap(*y));
        if o.is_ne() {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Applies the first-nonzero-positive convention to every column.
pub fn canonical_column_phases(c: &mut DMatrix<f64>) {
    for j in 0..c.ncols() {
        let mut v: Vec<f64> = c.column(j).iter().copied().collect();
        fix_phase(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            c[(i, j)] = x;
        }
    }
}

/// max |CᵀC − I|.
pub fn orthogonality_deviation(c: &DMatrix<f64>) -> f64 {
    if !c.is_square() {
        return f64::INFINITY;
    }
    let n = c.ncols();
    let g = c.transpose() * c;
    (g - DMatrix::<f64>::identity(n, n)).amax()
}

/// max |A − Aᵀ|.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

/// Haar-ish random orthogonal matrix (QR of a Gaussian matrix).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Standard normal draw (Box-Muller).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Matrix exponential of a real antisymmetric matrix, which is orthogonal.
pub fn expm_antisymmetric(k: &DMatrix<f64>) -> DMatrix<f64> {
    // exp(K) via the symmetric K² = −K Kᵀ is awkward; scaling and squaring
    // with a Taylor series is accurate enough for the small norms used here.
    let n = k.nrows();
    let norm = k.amax() * n as f64;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = k * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for i in 1..=20 {
        term = &term * &a / i as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
