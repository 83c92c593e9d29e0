//! Green-kernel trace identities and the eigenvalue-product form of the
//! boundary determinant ratio.
//!
//! The kernel of the inverse operator at a nondegenerate parameter z is
//! assembled from the fundamental solution and the projector-like factor
//! P_z = R_z^{-1} R1 psi_z(1).  Integrating its diagonal gives the two
//! components of the logarithmic derivative of rho, which are checked
//! against finite differences and integrated around rectangle boundaries
//! to recover the degree.  The product side expresses rho(1)/rho(0) as a
//! truncated product over the degeneracy parameters of the pencil
//! A + lambda*G1 and extends it to a two-variable truncated determinant
//! over the rectangle.

use crate::degree::{
    self, adaptive_loop_winding, boundary_point, winding_number, DegreeError, WindingConfig,
};
use crate::linalg::{
    gauss_panels, max_abs_c, symmetrize, symplectic_inverse, to_complex, CMatrix,
};
use crate::problem::ValidatedProblem;
use crate::propagator::{fundamental_solution, FundamentalSolution, IntegratorConfig, PropagatorError};
use crate::spectralflow::{assemble_form, count_below_pencil, lumped_field, FdMatrix, SpectralFlowError};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Clone, Debug, Error)]
pub enum HillError {
    #[error("boundary matrix is singular at z = {z}; the kernel does not exist there")]
    SingularRz { z: Complex64 },
    #[error("|rho({t})| = {abs:.3e} is below the admissibility floor {floor:.3e}")]
    NotAdmissible { t: f64, abs: f64, floor: f64 },
    #[error("lumped perturbation slope is numerically zero or the pencil is degenerate")]
    SingularG1h,
    #[error("eigenvalue-product identities require a linear perturbation family")]
    NonlinearFamily,
    #[error(transparent)]
    SpectralFlow(#[from] SpectralFlowError),
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

/// Kernel of the inverse operator at parameter z, evaluable at any
/// (x, y) in the unit square.
pub struct GreenKernel {
    pub z: Complex64,
    n: usize,
    sol: FundamentalSolution,
    p_mat: CMatrix,
}

impl GreenKernel {
    /// K_z(x, y); rows select the u-block, columns the delta-source slot.
    pub fn eval(&self, x: f64, y: f64) -> CMatrix {
        let n = self.n;
        let psi_x = self.sol.eval(x);
        let psi_y_inv = symplectic_inverse(&self.sol.eval(y));
        let mid = if x < y {
            self.p_mat.clone()
        } else {
            &self.p_mat - CMatrix::identity(2 * n, 2 * n)
        };
        (psi_x * mid * psi_y_inv).view((n, 0), (n, n)).into_owned()
    }

    pub fn diagonal(&self, x: f64) -> CMatrix {
        self.eval(x, x)
    }
}

pub fn green_kernel(
    vp: &ValidatedProblem,
    z: Complex64,
    config: &IntegratorConfig,
) -> Result<GreenKernel, HillError> {
    let mut cfg = *config;
    cfg.dense = true;
    let sol = fundamental_solution(vp, z, &cfg)?;
    let r0 = to_complex(&vp.bc.r0);
    let r1psi = to_complex(&vp.bc.r1) * sol.end();
    let pre = (max_abs_c(&r0) + max_abs_c(&r1psi)).max(1e-300);
    let rz = &r0 + &r1psi;
    let lu = rz.full_piv_lu();
    let det: Complex64 = lu.determinant();
    if det.norm() <= 1e-12 * pre.powi(2 * vp.n as i32) {
        return Err(HillError::SingularRz { z });
    }
    let p_mat = lu.solve(&r1psi).ok_or(HillError::SingularRz { z })?;
    Ok(GreenKernel {
        z,
        n: vp.n,
        sol,
        p_mat,
    })
}

/// The two components (theta_t, theta_s) of the logarithmic derivative
/// of rho at z, computed by integrating the kernel diagonal.
pub fn trace_theta(
    vp: &ValidatedProblem,
    z: Complex64,
    config: &IntegratorConfig,
) -> Result<(Complex64, Complex64), HillError> {
    let gk = green_kernel(vp, z, config)?;
    let quad = gauss_panels(0.0, 1.0, 16, 8);
    let t = z.re;
    let mut theta_t = Complex64::new(0.0, 0.0);
    let mut trace = Complex64::new(0.0, 0.0);
    for &(x, w) in &quad {
        let kd = gk.diagonal(x);
        let dc = to_complex(&vp.c_dt(t, x));
        let wt = Complex64::new(w, 0.0);
        theta_t += (dc * &kd).trace() * wt;
        trace += kd.trace() * wt;
    }
    Ok((theta_t, Complex64::new(0.0, 1.0) * trace))
}

#[derive(Clone, Copy, Debug)]
pub struct TraceCheck {
    pub theta_t: Complex64,
    pub theta_s: Complex64,
    pub fd_t: Complex64,
    pub fd_s: Complex64,
    pub rel_t: f64,
    pub rel_s: f64,
}

/// Compares the kernel-integrated theta pair against Richardson-refined
/// central differences of log rho.
pub fn trace_formula_check(
    vp: &ValidatedProblem,
    z: Complex64,
    h_fd: f64,
    config: &IntegratorConfig,
) -> Result<TraceCheck, HillError> {
    let (theta_t, theta_s) = trace_theta(vp, z, config)?;
    let dlog = |dir: Complex64, h: f64| -> Result<Complex64, HillError> {
        let num = degree::rho(vp, z + dir * h, config)?;
        let den = degree::rho(vp, z - dir * h, config)?;
        if num.norm() <= 1e-290 || den.norm() <= 1e-290 {
            return Err(HillError::SingularRz { z });
        }
        Ok((num / den).ln() / Complex64::new(2.0 * h, 0.0))
    };
    let richardson = |dir: Complex64| -> Result<Complex64, HillError> {
        let coarse = dlog(dir, h_fd)?;
        let fine = dlog(dir, 0.5 * h_fd)?;
        Ok((fine * 4.0 - coarse) / 3.0)
    };
    let fd_t = richardson(Complex64::new(1.0, 0.0))?;
    let fd_s = richardson(Complex64::new(0.0, 1.0))?;
    let rel = |a: Complex64, b: Complex64| (a - b).norm() / b.norm().max(1e-300);
    Ok(TraceCheck {
        theta_t,
        theta_s,
        fd_t,
        fd_s,
        rel_t: rel(theta_t, fd_t),
        rel_s: rel(theta_s, fd_s),
    })
}

/// Counterclockwise integral of theta_t dt + theta_s ds around the
/// rectangle [t0, t1] x [s0, s1].
pub fn rectangle_theta_integral(
    vp: &ValidatedProblem,
    t_range: (f64, f64),
    s_range: (f64, f64),
    panels: usize,
    nodes: usize,
    config: &IntegratorConfig,
) -> Result<Complex64, HillError> {
    let (t0, t1) = t_range;
    let (s0, s1) = s_range;
    // (z, weight, horizontal?) with signs for the ccw traversal
    let mut points: Vec<(Complex64, f64, bool)> = Vec::new();
    for &(t, w) in &gauss_panels(t0, t1, panels, nodes) {
        points.push((Complex64::new(t, s0), w, true));
        points.push((Complex64::new(t, s1), -w, true));
    }
    for &(s, w) in &gauss_panels(s0, s1, panels, nodes) {
        points.push((Complex64::new(t1, s), w, false));
        points.push((Complex64::new(t0, s), -w, false));
    }
    let terms: Result<Vec<Complex64>, HillError> = points
        .par_iter()
        .map(|&(z, w, horizontal)| {
            let (tt, ts) = trace_theta(vp, z, config)?;
            let th = if horizontal { tt } else { ts };
            Ok(th * Complex64::new(w, 0.0))
        })
        .collect();
    Ok(terms?.iter().sum())
}

/// (1/2 pi i) times the theta integral around the full rectangle
/// boundary; equals the winding number of rho.
pub fn trace_contour_index(
    vp: &ValidatedProblem,
    config: &IntegratorConfig,
) -> Result<Complex64, HillError> {
    let h = vp.half_height;
    let total = rectangle_theta_integral(vp, (0.0, 1.0), (-h, h), 8, 12, config)?;
    Ok(total / Complex64::new(0.0, 2.0 * std::f64::consts::PI))
}

/// rho(1)/rho(0) by two propagator runs.
pub fn hill_ratio(
    vp: &ValidatedProblem,
    config: &IntegratorConfig,
) -> Result<Complex64, HillError> {
    let r0 = degree::rho(vp, Complex64::new(0.0, 0.0), config)?;
    let r1 = degree::rho(vp, Complex64::new(1.0, 0.0), config)?;
    let floor = 1e-12 * (1.0 + r0.norm().max(r1.norm()));
    for (t, r) in [(0.0, r0), (1.0, r1)] {
        if r.norm() <= floor {
            return Err(HillError::NotAdmissible {
                t,
                abs: r.norm(),
                floor,
            });
        }
    }
    Ok(r1 / r0)
}

#[derive(Clone, Debug)]
pub struct EigenProduct {
    pub value: Complex64,
    /// Estimated magnitude of the omitted log-tail, from the quadratic
    /// growth of the located parameters.
    pub tail: f64,
    /// Pencil degeneracy parameters, ascending in magnitude.
    pub lambdas: Vec<Complex64>,
}

/// Locates the `want` smallest-magnitude roots of det(A + lambda*G) for
/// definite G by monotone inertia bisection.  Returns (center, count)
/// clusters.
fn definite_pencil_roots(a: &FdMatrix, g: &FdMatrix, want: usize) -> Vec<(f64, usize)> {
    let q = |lam: f64| count_below_pencil(a, g, lam);
    let mut x = 1.0_f64;
    let (mut qlo, mut qhi) = (q(-x), q(x));
    while qlo - qhi < want && x < 1e15 {
        x *= 2.0;
        qlo = q(-x);
        qhi = q(x);
    }
    let mut out = Vec::new();
    let mut stack = vec![(-x, x, qlo, qhi)];
    while let Some((lo, hi, cl, ch)) = stack.pop() {
        if cl == ch {
            continue;
        }
        let width_tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        if hi - lo <= width_tol {
            out.push((0.5 * (lo + hi), cl - ch));
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let cm = q(mid);
        stack.push((lo, mid, cl, cm));
        stack.push((mid, hi, cm, ch));
    }
    out.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    out
}

/// Truncated product over the degeneracy parameters of A + lambda*G1 at
/// discretization size M: prod_{j<=K} (1 - 1/lambda_j), |lambda_j|
/// ascending.  Definite G1 uses inertia bisection on the block
/// tridiagonal pencil; otherwise the dense eigenvalues of A^{-1} G1
/// supply the roots.
pub fn truncated_eigenproduct(
    vp: &ValidatedProblem,
    k: usize,
    m: usize,
) -> Result<EigenProduct, HillError> {
    let slope = vp
        .family
        .linear_slope()
        .ok_or(HillError::NonlinearFamily)?
        .clone();
    let disc = assemble_form(vp, &|x| vp.g.eval(x) + vp.family.eval(0.0, x), m)?;
    let b_g = lumped_field(vp, &|x| slope.eval(x), m)?;

    let mut evs: Vec<f64> = Vec::new();
    for blk in &b_g.diag {
        let se = symmetrize(blk).symmetric_eigen();
        evs.extend(se.eigenvalues.iter());
    }
    let gmax = evs.iter().fold(0.0_f64, |a, &e| a.max(e.abs()));
    if gmax <= 1e-300 {
        return Err(HillError::SingularG1h);
    }
    let pos_def = evs.iter().all(|&e| e > 1e-12 * gmax);
    let neg_def = evs.iter().all(|&e| e < -1e-12 * gmax);

    let dims = disc.form.blocks() * vp.n;
    let want = k.min(dims);
    let mut lambdas: Vec<Complex64> = if pos_def || neg_def {
        let g_signed = if pos_def {
            b_g
        } else {
            b_g.zeros_like().plus(&b_g, -1.0)
        };
        let sign = if pos_def { 1.0 } else { -1.0 };
        definite_pencil_roots(&disc.form, &g_signed, want)
            .into_iter()
            .flat_map(|(c, mult)| std::iter::repeat(Complex64::new(sign * c, 0.0)).take(mult))
            .collect()
    } else {
        let a = disc.form.dense();
        let g = b_g.dense();
        let w = a.lu().solve(&g).ok_or(HillError::SingularG1h)?;
        let mu = w.complex_eigenvalues();
        let mu_max = mu.iter().fold(0.0_f64, |acc, m| acc.max(m.norm()));
        let mut roots: Vec<Complex64> = mu
            .iter()
            .filter(|m| m.norm() > 1e-12 * mu_max)
            .map(|&m| -Complex64::new(1.0, 0.0) / m)
            .collect();
        roots.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        roots
    };
    lambdas.truncate(want);

    let one = Complex64::new(1.0, 0.0);
    let value = lambdas.iter().fold(one, |acc, l| acc * (one - one / l));
    let count = lambdas.len().max(1);
    let half = count / 2;
    let mut fits: Vec<f64> = lambdas
        .iter()
        .enumerate()
        .skip(half)
        .map(|(i, l)| l.norm() / ((i + 1) * (i + 1)) as f64)
        .collect();
    fits.sort_by(f64::total_cmp);
    let a_fit = fits.get(fits.len() / 2).copied().unwrap_or(1.0).max(1e-300);
    let tail = 1.0 / (a_fit * count as f64);
    Ok(EigenProduct {
        value,
        tail,
        lambdas,
    })
}

#[derive(Clone, Debug)]
pub struct HillReport {
    pub rho0: Complex64,
    pub rho1: Complex64,
    pub ratio: Complex64,
    pub product: Complex64,
    pub tail: f64,
    pub rel_discrepancy: f64,
    pub lambdas: Vec<Complex64>,
}

/// Side-by-side evaluation of the determinant ratio and its truncated
/// eigenvalue product.
pub fn hill_check(
    vp: &ValidatedProblem,
    k: usize,
    m: usize,
    config: &IntegratorConfig,
) -> Result<HillReport, HillError> {
    let rho0 = degree::rho(vp, Complex64::new(0.0, 0.0), config)?;
    let rho1 = degree::rho(vp, Complex64::new(1.0, 0.0), config)?;
    let ratio = hill_ratio(vp, config)?;
    let ep = truncated_eigenproduct(vp, k, m)?;
    Ok(HillReport {
        rho0,
        rho1,
        ratio,
        product: ep.value,
        tail: ep.tail,
        rel_discrepancy: (ep.value - ratio).norm() / ratio.norm().max(1e-300),
        lambdas: ep.lambdas,
    })
}

fn member_eigenvalues(vp: &ValidatedProblem, t: f64, m: usize) -> Result<Vec<f64>, HillError> {
    Ok(assemble_form(vp, &|x| vp.g.eval(x) + vp.family.eval(t, x), m)?.eigenvalues())
}

/// Truncated two-variable determinant f(z) = prod(1 - t/lambda_j) *
/// prod(1 + i s/mu_k(t)) over the K smallest-magnitude factors.
fn fredholm_from_parts(lambdas: &[Complex64], mus: &[f64], z: Complex64, k: usize) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let t = Complex64::new(z.re, 0.0);
    let s = z.im;
    let mut f = lambdas.iter().fold(one, |acc, l| acc * (one - t / l));
    if s != 0.0 {
        let mut idx: Vec<usize> = (0..mus.len()).collect();
        idx.sort_by(|&a, &b| mus[a].abs().total_cmp(&mus[b].abs()));
        for &i in idx.iter().take(k) {
            f *= Complex64::new(1.0, s / mus[i]);
        }
    }
    f
}

/// f(z) recomputed from scratch; see [`fredholm_identity_check`] for the
/// cached variant used on boundary loops.
pub fn fredholm_value(
    vp: &ValidatedProblem,
    z: Complex64,
    k: usize,
    m: usize,
) -> Result<Complex64, HillError> {
    let ep = truncated_eigenproduct(vp, k, m)?;
    let mus = if z.im != 0.0 {
        member_eigenvalues(vp, z.re, m)?
    } else {
        Vec::new()
    };
    Ok(fredholm_from_parts(&ep.lambdas, &mus, z, k))
}

#[derive(Clone, Debug)]
pub struct FredholmReport {
    pub z: Complex64,
    pub f: Complex64,
    pub ratio: Complex64,
    pub rel_err: f64,
    pub winding: i64,
    pub iota_pw: i64,
    pub winding_consistent: bool,
}

/// Pointwise comparison of f(z) against rho(z)/rho(0), plus a winding of
/// f over the rectangle boundary checked against the degree of rho.
pub fn fredholm_identity_check(
    vp: &ValidatedProblem,
    z: Complex64,
    k: usize,
    m: usize,
    config: &IntegratorConfig,
) -> Result<FredholmReport, HillError> {
    let ep = truncated_eigenproduct(vp, k, m)?;
    let cache: Mutex<HashMap<u64, Vec<f64>>> = Mutex::new(HashMap::new());
    let f_at = |zz: Complex64| -> Result<Complex64, HillError> {
        if zz.im == 0.0 {
            return Ok(fredholm_from_parts(&ep.lambdas, &[], zz, k));
        }
        let key = zz.re.to_bits();
        if let Some(mus) = cache.lock().unwrap().get(&key) {
            return Ok(fredholm_from_parts(&ep.lambdas, mus, zz, k));
        }
        let mus = member_eigenvalues(vp, zz.re, m)?;
        let f = fredholm_from_parts(&ep.lambdas, &mus, zz, k);
        cache.lock().unwrap().insert(key, mus);
        Ok(f)
    };

    let rho0 = degree::rho(vp, Complex64::new(0.0, 0.0), config)?;
    let rho_z = degree::rho(vp, z, config)?;
    if rho0.norm() <= 1e-290 {
        return Err(HillError::NotAdmissible {
            t: 0.0,
            abs: rho0.norm(),
            floor: 1e-290,
        });
    }
    let ratio = rho_z / rho0;
    let f = f_at(z)?;
    let rel_err = (f - ratio).norm() / ratio.norm().max(1e-300);

    let h = vp.half_height;
    let wcfg = WindingConfig::default();
    let failure: Mutex<Option<HillError>> = Mutex::new(None);
    let loop_eval = |p: f64| -> Result<Complex64, PropagatorError> {
        match f_at(boundary_point(h, p)) {
            Ok(v) => Ok(v),
            Err(e) => {
                *failure.lock().unwrap() = Some(e);
                Ok(Complex64::new(1.0, 0.0))
            }
        }
    };
    let wind = adaptive_loop_winding(&loop_eval, &wcfg)?;
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let (iota_pw, _) = winding_number(vp, config, &wcfg)?;
    Ok(FredholmReport {
        z,
        f,
        ratio,
        rel_err,
        winding: wind.winding,
        iota_pw,
        winding_consistent: wind.winding == iota_pw,
    })
}
