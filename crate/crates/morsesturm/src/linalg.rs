//! Dense linear-algebra helpers shared by every module: the standard
//! symplectic structure matrices, complex-symplectic inverses, inertia
//! counts, SVD nullspaces and Gauss-Legendre quadrature rules.
//!
//! Conventions used throughout the crate:
//!
//! ```text
//! J0    = [[0, -I], [I, 0]]                 (2n x 2n)
//! omega0(a, b) = <J0 a, b>                  (symplectic form on R^2n)
//! Jtilde = diag(-J0, J0)                    (4n x 4n, double phase space)
//! ```
//!
//! A complex matrix `psi` is complex-symplectic when `psi^T J0 psi = J0`
//! with the plain transpose (no conjugation); its inverse is then
//! `-J0 psi^T J0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type RMatrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type RVector = DVector<f64>;
pub type CVector = DVector<Complex64>;

/// Standard symplectic matrix J0 = [[0, -I], [I, 0]] of size 2n.
pub fn standard_j(n: usize) -> RMatrix {
    let mut j = RMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = -1.0;
        j[(n + k, k)] = 1.0;
    }
    j
}

/// Complex copy of [`standard_j`].
pub fn standard_j_c(n: usize) -> CMatrix {
    to_complex(&standard_j(n))
}

/// Structure matrix of the doubled phase space, diag(-J0, J0) of size 4n.
pub fn double_j(n: usize) -> RMatrix {
    let j = standard_j(n);
    let mut jj = RMatrix::zeros(4 * n, 4 * n);
    jj.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&(-&j));
    jj.view_mut((2 * n, 2 * n), (2 * n, 2 * n)).copy_from(&j);
    jj
}

/// Left-multiplies by J0 without forming it: swaps the block rows of `m`
/// and negates the new top half.
pub fn j_mul(m: &CMatrix) -> CMatrix {
    let n2 = m.nrows();
    let n = n2 / 2;
    let mut out = CMatrix::zeros(n2, m.ncols());
    for c in 0..m.ncols() {
        for r in 0..n {
            out[(r, c)] = -m[(n + r, c)];
            out[(n + r, c)] = m[(r, c)];
        }
    }
    out
}

/// Real counterpart of [`j_mul`].
pub fn j_mul_r(m: &RMatrix) -> RMatrix {
    let n2 = m.nrows();
    let n = n2 / 2;
    let mut out = RMatrix::zeros(n2, m.ncols());
    for c in 0..m.ncols() {
        for r in 0..n {
            out[(r, c)] = -m[(n + r, c)];
            out[(n + r, c)] = m[(r, c)];
        }
    }
    out
}

/// Inverse of a real symplectic matrix, psi^{-1} = -J0 psi^T J0.
pub fn symplectic_inverse_r(psi: &RMatrix) -> RMatrix {
    j_mul_r(&j_mul_r(psi).transpose())
}

/// Embeds a real matrix into the complex field.
pub fn to_complex(m: &RMatrix) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| Complex64::new(m[(r, c)], 0.0))
}

/// Real part, entrywise.
pub fn real_part(m: &CMatrix) -> RMatrix {
    RMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].re)
}

/// Largest entry modulus.
pub fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.norm()))
}

/// Largest entry magnitude.
pub fn max_abs_r(m: &RMatrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Largest imaginary-part magnitude.
pub fn max_imag(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.im.abs()))
}

/// Max-norm of psi^T J0 psi - J0; zero for exactly complex-symplectic psi.
pub fn symplectic_defect(psi: &CMatrix) -> f64 {
    let n = psi.nrows() / 2;
    let j = standard_j_c(n);
    let d = psi.transpose() * &j * psi - &j;
    max_abs_c(&d)
}

/// Inverse of a complex-symplectic matrix, psi^{-1} = -J0 psi^T J0.
/// Uses the transpose, not the conjugate transpose.
pub fn symplectic_inverse(psi: &CMatrix) -> CMatrix {
    // J (J psi)^T = J (psi^T J^T) = -J psi^T J
    j_mul(&j_mul(psi).transpose())
}

/// Symmetric part (m + m^T)/2.
pub fn symmetrize(m: &RMatrix) -> RMatrix {
    (m + m.transpose()) * 0.5
}

/// Inertia (n_plus, n_zero, n_minus) of a real symmetric matrix; eigenvalues
/// with |lambda| <= tol * max|lambda| count as zero.
pub fn inertia(sym: &RMatrix, tol: f64) -> (usize, usize, usize) {
    let eig = sym.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cut = tol * scale.max(1e-300);
    let mut counts = (0usize, 0usize, 0usize);
    for &l in eig.eigenvalues.iter() {
        if l > cut {
            counts.0 += 1;
        } else if l < -cut {
            counts.2 += 1;
        } else {
            counts.1 += 1;
        }
    }
    counts
}

/// Orthonormal basis of the (right) nullspace of a real matrix: right
/// singular vectors whose singular value is below rel_tol * sigma_max.
pub fn nullspace(m: &RMatrix, rel_tol: f64) -> Vec<RVector> {
    let k = m.ncols();
    // pad wide matrices square so the thin SVD carries the full V factor
    let mut work = RMatrix::zeros(m.nrows().max(k), k);
    work.view_mut((0, 0), (m.nrows(), k)).copy_from(m);
    let svd = work.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &v| a.max(v));
    let cut = rel_tol * smax.max(1e-300);
    let mut basis = Vec::new();
    for i in 0..k {
        let s = if i < svd.singular_values.len() {
            svd.singular_values[i]
        } else {
            0.0
        };
        if s <= cut {
            basis.push(vt.row(i).transpose());
        }
    }
    basis
}

/// Complex analogue of [`nullspace`].
pub fn nullspace_c(m: &CMatrix, rel_tol: f64) -> Vec<CVector> {
    let k = m.ncols();
    let mut work = CMatrix::zeros(m.nrows().max(k), k);
    work.view_mut((0, 0), (m.nrows(), k)).copy_from(m);
    let svd = work.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &v| a.max(v));
    let cut = rel_tol * smax.max(1e-300);
    let mut basis = Vec::new();
    for i in 0..k {
        let s = if i < svd.singular_values.len() {
            svd.singular_values[i]
        } else {
            0.0
        };
        if s <= cut {
            basis.push(vt.row(i).transpose().map(|v| v.conj()));
        }
    }
    basis
}

/// Matrix whose rows form an orthonormal basis of the left annihilator
/// {y : y^T f = 0} of a full-column-rank frame f.
pub fn left_annihilator(f: &RMatrix) -> RMatrix {
    let basis = nullspace(&f.transpose(), 1e-10);
    let mut a = RMatrix::zeros(basis.len(), f.nrows());
    for (i, v) in basis.iter().enumerate() {
        a.row_mut(i).copy_from(&v.transpose());
    }
    a
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on [a, b]: `panels` equal panels with
/// `nodes` points each, returned as (abscissa, weight) pairs in order.
pub fn gauss_panels(a: f64, b: f64, panels: usize, nodes: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(nodes);
    let mut rule = Vec::with_capacity(panels * nodes);
    let dl = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + dl * p as f64;
        let mid = lo + 0.5 * dl;
        let half = 0.5 * dl;
        for (x, w) in xs.iter().zip(ws.iter()) {
            rule.push((mid + half * x, half * w));
        }
    }
    rule
}
