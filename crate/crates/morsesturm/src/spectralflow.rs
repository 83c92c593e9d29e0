//! Spectral flow of the operator family by two routes that share no code:
//! crossing forms evaluated on kernel bases at the degeneracy instants
//! (exact, any boundary condition), and windowed eigenvalue counting of a
//! finite-difference discretization (oracle, preset boundary conditions).
//! Also the Morse index of a single family member when P > 0.
//!
//! The discretization is assembled from the quadratic form
//! integral of u'^T P u' + 2 u^T Q^T u' + u^T (G + C) u with midpoint
//! sampling of P and Q on mesh cells and nodal lumping of the potential,
//! so the matrix is symmetric by construction.  Eigenvalue counts come
//! from the inertia of a block tridiagonal LDL^T factorization (with a
//! bordered last block for the periodic wraparound coupling), never from
//! a full eigensolve.

use crate::degree::{self, DegreeError};
use crate::linalg::{symmetrize, CMatrix, CVector, RMatrix, RVector};
use crate::problem::{BoundaryPreset, ValidatedProblem};
use crate::propagator::{
    fundamental_solution, FundamentalSolution, IntegratorConfig, PropagatorError,
};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Clone, Debug, Error)]
pub enum SpectralFlowError {
    #[error("kernel of the boundary matrix at t = {t0} is trivial; not a degeneracy instant")]
    EmptyKernel { t0: f64 },
    #[error("kernel Gram matrix at t = {t0} is numerically singular")]
    KernelGramSingular { t0: f64 },
    #[error(
        "crossing at t = {t0} is irregular (smallest |eigenvalue| {min_abs:.3e} of the crossing \
         form is below {floor:.3e}); apply a small spectral shift delta and retry"
    )]
    IrregularCrossing { t0: f64, min_abs: f64, floor: f64 },
    #[error("finite-difference discretization supports only preset boundary conditions")]
    UnsupportedBoundary,
    #[error("spectral window [-{lambda:.3e}, {lambda:.3e}] lost an eigenvalue near t = {t}")]
    WindowTooSmall { lambda: f64, t: f64 },
    #[error(
        "eigenvalue count jumped by {jump} between t = {t_left} and t = {t_right} but only \
         {allowed} eigenvalues sit within the continuity bound; refine the t-grid or M"
    )]
    GridTooCoarse {
        t_left: f64,
        t_right: f64,
        jump: i64,
        allowed: usize,
    },
    #[error("P is not positive definite at x = {x}")]
    IndefiniteP { x: f64 },
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

// ---------------------------------------------------------------------------
// exact route: kernel bases and crossing forms

/// Relative singular-value threshold for membership in ker R_{t0}.
const KERNEL_TOL: f64 = 1e-6;

/// Orthonormal basis of ker A_{t0} realized as boundary-matrix kernel
/// vectors transported by the fundamental solution, w(x) = psi(x) w0.
pub struct KernelBasis {
    pub t0: f64,
    n: usize,
    sol: FundamentalSolution,
    /// Kernel vectors w0, combined so the u-components are L2-orthonormal.
    pub vectors: Vec<RVector>,
    /// Max-norm residual of w' = J0 B w over a 257-point grid, relative to
    /// the solution magnitude.
    pub ode_residual: f64,
    /// |R0 w(0) + R1 w(1)| relative to |w0|, worst case over the basis.
    pub boundary_residual: f64,
}

impl KernelBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Full phase-space solution w_i(x).
    pub fn w(&self, i: usize, x: f64) -> CVector {
        let w0: CVector = self.vectors[i].map(|v| Complex64::new(v, 0.0));
        self.sol.eval(x) * w0
    }

    /// Configuration component u_i(x), the lower block of w_i(x).
    pub fn u(&self, i: usize, x: f64) -> RVector {
        let w = self.w(i, x);
        RVector::from_fn(self.n, |k, _| w[self.n + k].re)
    }
}

/// Builds the kernel basis at a located degeneracy instant.  Kernel
/// directions come from the singular value decomposition of the boundary
/// matrix; the returned solutions have L2-orthonormal u-components.
pub fn kernel_basis(
    vp: &ValidatedProblem,
    t0: f64,
    config: &IntegratorConfig,
) -> Result<KernelBasis, SpectralFlowError> {
    let n = vp.n;
    let z = Complex64::new(t0, 0.0);
    let (r, pre) =
        degree::boundary_matrix_scaled(vp, z, config).map_err(SpectralFlowError::Propagator)?;
    let r_real = crate::linalg::real_part(&r);
    let sv = r_real.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |m, &s| m.max(s)).max(1e-300);
    let raw = crate::linalg::nullspace(&r_real, KERNEL_TOL * pre.max(smax) / smax);
    if raw.is_empty() {
        return Err(SpectralFlowError::EmptyKernel { t0 });
    }

    let mut cfg = *config;
    cfg.dense = true;
    let sol = fundamental_solution(vp, z, &cfg).map_err(SpectralFlowError::Propagator)?;

    // Gram matrix of the u-components in L2(0,1)
    let quad = crate::linalg::gauss_panels(0.0, 1.0, 16, 8);
    let k = raw.len();
    let u_at = |w0: &RVector, x: f64| -> RVector {
        let w0c: CVector = w0.map(|v| Complex64::new(v, 0.0));
        let w = sol.eval(x) * w0c;
        RVector::from_fn(n, |j, _| w[n + j].re)
    };
    let mut gram = RMatrix::zeros(k, k);
    for &(x, wt) in &quad {
        let us: Vec<RVector> = raw.iter().map(|w0| u_at(w0, x)).collect();
        for i in 0..k {
            for j in i..k {
                gram[(i, j)] += wt * us[i].dot(&us[j]);
            }
        }
    }
    gram = symmetrize(&gram);
    let ge = gram.clone().symmetric_eigen();
    let gmax = ge.eigenvalues.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
    if ge.eigenvalues.iter().any(|&l| l <= 1e-12 * gmax) {
        return Err(SpectralFlowError::KernelGramSingular { t0 });
    }
    // symmetric orthonormalization: new vectors = raw * G^{-1/2}
    let mut ginv_half = RMatrix::zeros(k, k);
    for i in 0..k {
        let col = ge.eigenvectors.column(i);
        let s = 1.0 / ge.eigenvalues[i].sqrt();
        for a in 0..k {
            for b in 0..k {
                ginv_half[(a, b)] += s * col[a] * col[b];
            }
        }
    }
    let mut vectors = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = RVector::zeros(2 * n);
        for (i, w0) in raw.iter().enumerate() {
            v += w0 * ginv_half[(i, j)];
        }
        vectors.push(v);
    }

    // boundary residual
    let psi1 = crate::linalg::real_part(sol.end());
    let mut bres = 0.0_f64;
    for v in &vectors {
        let r = &vp.bc.r0 * v + &vp.bc.r1 * (&psi1 * v);
        bres = bres.max(r.norm() / v.norm().max(1e-300));
    }

    // ODE residual of the interpolated solution, five-point differentiation
    let delta = 1e-3;
    let mut ode = 0.0_f64;
    let mut wmax = 1e-300_f64;
    for v in &vectors {
        let w0c: CVector = v.map(|c| Complex64::new(c, 0.0));
        let w_at = |x: f64| -> CVector { sol.eval(x) * &w0c };
        for i in 0..=256 {
            let x = 2.0 * delta + (1.0 - 4.0 * delta) * i as f64 / 256.0;
            let wp = (w_at(x - 2.0 * delta) - w_at(x + 2.0 * delta)
                + (w_at(x + delta) - w_at(x - delta)) * Complex64::new(8.0, 0.0))
                * Complex64::new(1.0 / (12.0 * delta), 0.0);
            let wx = w_at(x);
            let res = &wp - vp.jb(z, x) * &wx;
            ode = ode.max(crate::linalg::max_abs_c(&CMatrix::from_columns(&[res])));
            wmax = wmax.max(crate::linalg::max_abs_c(&CMatrix::from_columns(&[wx])));
        }
    }

    Ok(KernelBasis {
        t0,
        n,
        sol,
        vectors,
        ode_residual: ode / wmax,
        boundary_residual: bres,
    })
}

/// Crossing form at a degeneracy instant: the matrix of the t-derivative
/// of the family on the kernel, Gamma_ij = integral of
/// u_i^T (dC/dt)(t0, x) u_j.
#[derive(Clone, Debug)]
pub struct CrossingForm {
    pub t0: f64,
    pub gamma: RMatrix,
    pub n_plus: usize,
    pub n_minus: usize,
    pub nullity: usize,
    pub regular: bool,
}

impl CrossingForm {
    pub fn signature(&self) -> i64 {
        self.n_plus as i64 - self.n_minus as i64
    }
}

/// Relative eigenvalue floor below which the crossing form counts as
/// singular and the crossing as irregular.
pub const CROSSING_REGULARITY_TOL: f64 = 1e-8;

/// Evaluates the crossing form on a kernel basis by composite
/// Gauss-Legendre quadrature (128 nodes).  Irregular crossings are
/// reported as errors so the caller can apply a spectral shift and retry.
pub fn crossing_form(
    vp: &ValidatedProblem,
    kernel: &KernelBasis,
) -> Result<CrossingForm, SpectralFlowError> {
    let k = kernel.len();
    let quad = crate::linalg::gauss_panels(0.0, 1.0, 16, 8);
    let mut gamma = RMatrix::zeros(k, k);
    for &(x, wt) in &quad {
        let dc = vp.c_dt(kernel.t0, x);
        let us: Vec<RVector> = (0..k).map(|i| kernel.u(i, x)).collect();
        for i in 0..k {
            let dcu = &dc * &us[i];
            for j in i..k {
                gamma[(i, j)] += wt * dcu.dot(&us[j]);
            }
        }
    }
    let gamma = symmetrize(&gamma);
    let eigs = gamma.clone().symmetric_eigen().eigenvalues;
    let scale = eigs.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
    let floor = CROSSING_REGULARITY_TOL * scale;
    let mut n_plus = 0;
    let mut n_minus = 0;
    let mut nullity = 0;
    let mut min_abs = f64::INFINITY;
    for &l in eigs.iter() {
        min_abs = min_abs.min(l.abs());
        if l.abs() <= floor {
            nullity += 1;
        } else if l > 0.0 {
            n_plus += 1;
        } else {
            n_minus += 1;
        }
    }
    if nullity > 0 || scale == 0.0 {
        return Err(SpectralFlowError::IrregularCrossing {
            t0: kernel.t0,
            min_abs,
            floor,
        });
    }
    Ok(CrossingForm {
        t0: kernel.t0,
        gamma,
        n_plus,
        n_minus,
        nullity,
        regular: true,
    })
}

/// Output of the crossing-form route.
pub struct CrossingMethod {
    pub sf: i64,
    pub forms: Vec<CrossingForm>,
    pub warnings: Vec<String>,
}

/// Spectral flow as the sum of crossing-form signatures over the interior
/// degeneracy instants.  Admissibility of the family endpoints is checked
/// against the scale of the determinant map along the real axis.
pub fn spectral_flow_crossing_method(
    vp: &ValidatedProblem,
    config: &IntegratorConfig,
) -> Result<CrossingMethod, SpectralFlowError> {
    let mut cfg = *config;
    cfg.dense = false;
    let scale = (0..=8)
        .map(|i| {
            degree::rho(vp, Complex64::new(i as f64 / 8.0, 0.0), &cfg)
                .map(|r| r.norm())
                .unwrap_or(0.0)
        })
        .fold(0.0_f64, f64::max);
    for t in [0.0, 1.0] {
        let r = degree::rho(vp, Complex64::new(t, 0.0), &cfg)
            .map_err(SpectralFlowError::Propagator)?;
        let floor = 1e-8 * scale;
        if r.norm() <= floor {
            return Err(SpectralFlowError::Degree(DegreeError::NotAdmissible {
                t,
                abs: r.norm(),
                floor,
            }));
        }
    }

    let (instants, warnings) = degree::conjugate_instants(vp, config, 256, 1e-6, 1e-10)?;
    let forms: Vec<CrossingForm> = instants
        .par_iter()
        .map(|inst| {
            let kb = kernel_basis(vp, inst.t0, config)?;
            crossing_form(vp, &kb)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sf = forms.iter().map(|f| f.signature()).sum();
    Ok(CrossingMethod {
        sf,
        forms,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// discretization

/// Symmetric block tridiagonal matrix with an optional corner coupling
/// between the first and last block (periodic wraparound).  `off[j]` is
/// the block at position (j, j+1); `corner` the block at (0, K-1).
#[derive(Clone, Debug)]
pub struct FdMatrix {
    pub n: usize,
    pub diag: Vec<RMatrix>,
    pub off: Vec<RMatrix>,
    pub corner: Option<RMatrix>,
}

impl FdMatrix {
    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn zeros_like(&self) -> FdMatrix {
        let n = self.n;
        FdMatrix {
            n,
            diag: vec![RMatrix::zeros(n, n); self.diag.len()],
            off: vec![RMatrix::zeros(n, n); self.off.len()],
            corner: None,
        }
    }

    /// self + s * other, blockwise.
    pub fn plus(&self, other: &FdMatrix, s: f64) -> FdMatrix {
        let diag = self
            .diag
            .iter()
            .zip(&other.diag)
            .map(|(a, b)| a + b * s)
            .collect();
        let off = self
            .off
            .iter()
            .zip(&other.off)
            .map(|(a, b)| a + b * s)
            .collect();
        let corner = match (&self.corner, &other.corner) {
            (Some(a), Some(b)) => Some(a + b * s),
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b * s),
            (None, None) => None,
        };
        FdMatrix {
            n: self.n,
            diag,
            off,
            corner,
        }
    }

    pub fn dense(&self) -> RMatrix {
        let n = self.n;
        let k = self.blocks();
        let mut m = RMatrix::zeros(n * k, n * k);
        for j in 0..k {
            m.view_mut((j * n, j * n), (n, n)).copy_from(&self.diag[j]);
        }
        for j in 0..k - 1 {
            m.view_mut((j * n, (j + 1) * n), (n, n)).copy_from(&self.off[j]);
            m.view_mut(((j + 1) * n, j * n), (n, n))
                .copy_from(&self.off[j].transpose());
        }
        if let Some(c) = &self.corner {
            let mut top = m.view_mut((0, (k - 1) * n), (n, n));
            top += c;
            let mut bot = m.view_mut(((k - 1) * n, 0), (n, n));
            bot += c.transpose();
        }
        m
    }
}

/// Inertia of a small symmetric block with near-zero eigenvalues pushed
/// to -tol, so a tie at the query point counts as below it.  Returns the
/// negative count and the regularized inverse.
fn reg_factor(s: &RMatrix, tol: f64) -> (usize, RMatrix) {
    let se = symmetrize(s).symmetric_eigen();
    let k = se.eigenvalues.len();
    let mut neg = 0;
    let mut inv = RVector::zeros(k);
    for i in 0..k {
        let mut lam = se.eigenvalues[i];
        if lam.abs() < tol {
            lam = -tol;
        }
        if lam < 0.0 {
            neg += 1;
        }
        inv[i] = 1.0 / lam;
    }
    let v = &se.eigenvectors;
    (neg, v * RMatrix::from_diagonal(&inv) * v.transpose())
}

/// Number of negative eigenvalues of A + lam * B via blockwise LDL^T
/// elimination; the periodic corner is carried as a bordered column into
/// the last block.
pub fn count_below_pencil(a: &FdMatrix, b: &FdMatrix, lam: f64) -> usize {
    let k = a.blocks();
    let comb = a.plus(b, lam);
    let scale = comb
        .diag
        .iter()
        .chain(comb.off.iter())
        .fold(0.0_f64, |m, blk| m.max(blk.norm()))
        .max(1e-300);
    let tol = 1e-12 * scale;

    if k < 3 {
        let eigs = symmetrize(&comb.dense()).symmetric_eigen().eigenvalues;
        return eigs.iter().filter(|&&l| l < -tol || l.abs() <= tol).count();
    }
    if comb.n == 1 {
        return count_below_scalar(&comb, tol);
    }

    let mut s = comb.diag.clone();
    let off = comb.off;
    let last = k - 1;
    let mut neg = 0usize;
    let mut ucur: Option<RMatrix> = comb.corner;
    for j in 0..last {
        let (nj, sinv) = reg_factor(&s[j], tol);
        neg += nj;
        if j < last - 1 {
            let x = &off[j];
            let xs = x.transpose() * &sinv;
            let upd = &xs * x;
            s[j + 1] -= upd;
            if let Some(u) = ucur.take() {
                let us = u.transpose() * &sinv;
                s[last] -= &us * &u;
                let base = if j + 1 == last - 1 {
                    off[last - 1].clone()
                } else {
                    RMatrix::zeros(a.n, a.n)
                };
                ucur = Some(base - &xs * &u);
            }
        } else {
            let x = match ucur.take() {
                Some(u) => u,
                None => off[last - 1].clone(),
            };
            let xs = x.transpose() * &sinv;
            s[last] -= &xs * &x;
        }
    }
    neg += reg_factor(&s[last], tol).0;
    neg
}

/// Scalar specialization of the blockwise elimination, identical algebra
/// on plain floats.
fn count_below_scalar(comb: &FdMatrix, tol: f64) -> usize {
    let k = comb.blocks();
    let last = k - 1;
    let mut s: Vec<f64> = comb.diag.iter().map(|m| m[(0, 0)]).collect();
    let off: Vec<f64> = comb.off.iter().map(|m| m[(0, 0)]).collect();
    let mut ucur: Option<f64> = comb.corner.as_ref().map(|c| c[(0, 0)]);
    let reg = |v: f64| if v.abs() < tol { -tol } else { v };
    let mut neg = 0usize;
    for j in 0..last {
        let d = reg(s[j]);
        if d < 0.0 {
            neg += 1;
        }
        let dinv = 1.0 / d;
        if j < last - 1 {
            let x = off[j];
            s[j + 1] -= x * dinv * x;
            if let Some(u) = ucur.take() {
                s[last] -= u * dinv * u;
                let base = if j + 1 == last - 1 { off[last - 1] } else { 0.0 };
                ucur = Some(base - x * dinv * u);
            }
        } else {
            let x = ucur.take().unwrap_or(off[last - 1]);
            s[last] -= x * dinv * x;
        }
    }
    if reg(s[last]) < 0.0 {
        neg += 1;
    }
    neg
}

struct Cell {
    xl: f64,
    xr: f64,
    a: Option<usize>,
    b: Option<usize>,
}

struct Layout {
    nodes: Vec<f64>,
    cells: Vec<Cell>,
}

fn node_layout(preset: BoundaryPreset, m: usize) -> Result<Layout, SpectralFlowError> {
    let h = 1.0 / (m + 1) as f64;
    match preset {
        BoundaryPreset::Dirichlet => {
            let nodes: Vec<f64> = (1..=m).map(|j| j as f64 * h).collect();
            let mut cells = vec![Cell {
                xl: 0.0,
                xr: nodes[0],
                a: None,
                b: Some(0),
            }];
            for j in 0..m - 1 {
                cells.push(Cell {
                    xl: nodes[j],
                    xr: nodes[j + 1],
                    a: Some(j),
                    b: Some(j + 1),
                });
            }
            cells.push(Cell {
                xl: nodes[m - 1],
                xr: 1.0,
                a: Some(m - 1),
                b: None,
            });
            Ok(Layout { nodes, cells })
        }
        BoundaryPreset::Neumann => {
            let nodes: Vec<f64> = (0..=m + 1).map(|j| j as f64 * h).collect();
            let cells = (0..=m)
                .map(|j| Cell {
                    xl: nodes[j],
                    xr: nodes[j + 1],
                    a: Some(j),
                    b: Some(j + 1),
                })
                .collect();
            Ok(Layout { nodes, cells })
        }
        BoundaryPreset::Periodic => {
            let nodes: Vec<f64> = (0..=m).map(|j| j as f64 * h).collect();
            let mut cells: Vec<Cell> = (0..m)
                .map(|j| Cell {
                    xl: nodes[j],
                    xr: nodes[j + 1],
                    a: Some(j),
                    b: Some(j + 1),
                })
                .collect();
            cells.push(Cell {
                xl: nodes[m],
                xr: 1.0,
                a: Some(m),
                b: Some(0),
            });
            Ok(Layout { nodes, cells })
        }
        BoundaryPreset::General => Err(SpectralFlowError::UnsupportedBoundary),
    }
}

/// Assembled discretization: the quadratic-form matrix, the diagonal
/// lumped mass, and the mesh it lives on.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub form: FdMatrix,
    pub mass: FdMatrix,
}

impl Discretization {
    pub fn size(&self) -> usize {
        self.n * self.nodes.len()
    }

    /// Number of eigenvalues of the operator strictly below lambda (ties
    /// biased downward).
    pub fn count_below(&self, lambda: f64) -> usize {
        count_below_pencil(&self.form, &self.mass, -lambda)
    }

    /// Dense symmetric operator matrix D^{-1/2} B D^{-1/2}.
    pub fn operator_dense(&self) -> RMatrix {
        let n = self.n;
        let b = self.form.dense();
        let mut scale = RVector::zeros(self.size());
        for (j, &w) in self.weights.iter().enumerate() {
            let s = 1.0 / w.sqrt();
            for k in 0..n {
                scale[j * n + k] = s;
            }
        }
        let d = RMatrix::from_diagonal(&scale);
        symmetrize(&(&d * b * &d))
    }

    /// All operator eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .operator_dense()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// Assembles the form matrix of -d/dx[P d/dx + Q] + Q^T d/dx + potential
/// with the problem's preset boundary condition on an M-point mesh.
pub fn assemble_form(
    vp: &ValidatedProblem,
    potential: &dyn Fn(f64) -> RMatrix,
    m: usize,
) -> Result<Discretization, SpectralFlowError> {
    let n = vp.n;
    let layout = node_layout(vp.bc.preset, m)?;
    let k = layout.nodes.len();
    let mut diag = vec![RMatrix::zeros(n, n); k];
    let mut off = vec![RMatrix::zeros(n, n); k.saturating_sub(1)];
    let mut corner: Option<RMatrix> = None;
    let mut weights = vec![0.0_f64; k];

    let add = |i: usize, j: usize, blk: RMatrix, diag: &mut Vec<RMatrix>, off: &mut Vec<RMatrix>, corner: &mut Option<RMatrix>| {
        if i == j {
            diag[i] += blk;
        } else if j == i + 1 {
            off[i] += blk;
        } else if i == j + 1 {
            off[j] += blk.transpose();
        } else if i == 0 && j == k - 1 {
            *corner = Some(corner.take().map_or(blk.clone(), |c| c + &blk));
        } else if j == 0 && i == k - 1 {
            let t = blk.transpose();
            *corner = Some(corner.take().map_or(t.clone(), |c| c + &t));
        } else {
            unreachable!("cell couples non-adjacent nodes");
        }
    };

    for cell in &layout.cells {
        let hc = cell.xr - cell.xl;
        let xm = 0.5 * (cell.xl + cell.xr);
        let pm = vp.p.eval(xm);
        let qm = vp.q.eval(xm);
        let stiff = &pm / hc;
        let qsym = symmetrize(&qm);
        let qskew = (qm.transpose() - &qm) * 0.5;
        match (cell.a, cell.b) {
            (Some(a), Some(b)) => {
                add(a, a, &stiff - &qsym, &mut diag, &mut off, &mut corner);
                add(b, b, &stiff + &qsym, &mut diag, &mut off, &mut corner);
                add(a, b, -&stiff + &qskew, &mut diag, &mut off, &mut corner);
                weights[a] += 0.5 * hc;
                weights[b] += 0.5 * hc;
            }
            (None, Some(b)) => {
                add(b, b, &stiff + &qsym, &mut diag, &mut off, &mut corner);
                weights[b] += 0.5 * hc;
            }
            (Some(a), None) => {
                add(a, a, &stiff - &qsym, &mut diag, &mut off, &mut corner);
                weights[a] += 0.5 * hc;
            }
            (None, None) => unreachable!(),
        }
    }
    for (j, &x) in layout.nodes.iter().enumerate() {
        diag[j] += symmetrize(&potential(x)) * weights[j];
    }
    let mass = FdMatrix {
        n,
        diag: weights
            .iter()
            .map(|&w| RMatrix::identity(n, n) * w)
            .collect(),
        off: vec![RMatrix::zeros(n, n); k.saturating_sub(1)],
        corner: None,
    };
    Ok(Discretization {
        n,
        nodes: layout.nodes,
        weights,
        form: FdMatrix {
            n,
            diag,
            off,
            corner,
        },
        mass,
    })
}

/// Lumped diagonal matrix of a coefficient field on the same mesh:
/// block j is w_j * field(x_j).
pub fn lumped_field(
    vp: &ValidatedProblem,
    field: &dyn Fn(f64) -> RMatrix,
    m: usize,
) -> Result<FdMatrix, SpectralFlowError> {
    let base = assemble_form(vp, &|_| RMatrix::zeros(vp.n, vp.n), m)?;
    let diag = base
        .nodes
        .iter()
        .zip(&base.weights)
        .map(|(&x, &w)| symmetrize(&field(x)) * w)
        .collect();
    Ok(FdMatrix {
        n: vp.n,
        diag,
        off: vec![RMatrix::zeros(vp.n, vp.n); base.nodes.len().saturating_sub(1)],
        corner: None,
    })
}

/// Dense symmetric finite-difference matrix of the family member at
/// parameter t with the preset boundary condition.
pub fn discretize(
    vp: &ValidatedProblem,
    t: f64,
    m: usize,
) -> Result<RMatrix, SpectralFlowError> {
    member_discretization(vp, t, m).map(|d| d.operator_dense())
}

fn member_discretization(
    vp: &ValidatedProblem,
    t: f64,
    m: usize,
) -> Result<Discretization, SpectralFlowError> {
    assemble_form(vp, &|x| vp.g.eval(x) + vp.family.eval(t, x), m)
}

// ---------------------------------------------------------------------------
// tracking route

/// One localized eigenvalue-count change.
#[derive(Clone, Debug)]
pub struct TrackedCrossing {
    pub t_left: f64,
    pub t_right: f64,
    /// Change of the negative-eigenvalue count across the interval.
    pub delta: i64,
}

#[derive(Clone, Debug)]
pub struct TrackingReport {
    pub sf: i64,
    pub m_first: usize,
    pub m_last: usize,
    pub lambda: f64,
    pub grid_points: usize,
    pub crossings: Vec<TrackedCrossing>,
}

/// Default spectral window half-width for tracking.
pub fn default_window(vp: &ValidatedProblem) -> f64 {
    10.0 * vp.family_sup_norm() + 1.0
}

fn family_jump(vp: &ValidatedProblem, tl: f64, tr: f64) -> f64 {
    (0..=32)
        .map(|i| {
            let x = i as f64 / 32.0;
            (vp.family.eval(tr, x) - vp.family.eval(tl, x)).norm()
        })
        .fold(0.0_f64, f64::max)
}

/// Spectral flow by eigenvalue counting of the finite-difference family
/// over a t-grid.  Count changes are localized by bisection; each
/// localized change is checked against the number of eigenvalues within
/// the continuity bound of zero, and the window edge is monitored for
/// escaping eigenvalues.
pub fn spectral_flow_tracking(
    vp: &ValidatedProblem,
    m: usize,
    t_points: usize,
) -> Result<TrackingReport, SpectralFlowError> {
    if vp.bc.preset == BoundaryPreset::General {
        return Err(SpectralFlowError::UnsupportedBoundary);
    }
    let lambda = default_window(vp);
    let grid = t_points.max(256);
    let base = assemble_form(vp, &|x| vp.g.eval(x), m)?;
    let disc_at = |t: f64| -> Result<Discretization, SpectralFlowError> {
        let ct = lumped_field(vp, &|x| vp.family.eval(t, x), m)?;
        Ok(Discretization {
            n: base.n,
            nodes: base.nodes.clone(),
            weights: base.weights.clone(),
            form: base.form.plus(&ct, 1.0),
            mass: base.mass.clone(),
        })
    };
    let counts: Vec<(usize, usize)> = (0..=grid)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / grid as f64;
            let d = disc_at(t)?;
            Ok((d.count_below(0.0), d.count_below(-lambda)))
        })
        .collect::<Result<Vec<_>, SpectralFlowError>>()?;

    let escape = counts[0].1;
    for (i, &(_, esc)) in counts.iter().enumerate() {
        if esc != escape {
            return Err(SpectralFlowError::WindowTooSmall {
                lambda,
                t: i as f64 / grid as f64,
            });
        }
    }

    let mut crossings = Vec::new();
    for i in 0..grid {
        let (tl, tr) = (i as f64 / grid as f64, (i + 1) as f64 / grid as f64);
        let (nl, nr) = (counts[i].0 as i64, counts[i + 1].0 as i64);
        if nl != nr {
            refine_crossing(&disc_at, tl, nl, tr, nr, &mut crossings)?;
        }
    }
    for c in &crossings {
        let bound = family_jump(vp, c.t_left, c.t_right) + 1e-9 * (1.0 + lambda);
        let d = disc_at(c.t_left)?;
        let within = d.count_below(bound) - d.count_below(-bound);
        if c.delta.unsigned_abs() as usize > within {
            return Err(SpectralFlowError::GridTooCoarse {
                t_left: c.t_left,
                t_right: c.t_right,
                jump: c.delta,
                allowed: within,
            });
        }
    }

    let m_first = counts[0].0;
    let m_last = counts[grid].0;
    Ok(TrackingReport {
        sf: m_first as i64 - m_last as i64,
        m_first,
        m_last,
        lambda,
        grid_points: grid + 1,
        crossings,
    })
}

fn refine_crossing(
    disc_at: &dyn Fn(f64) -> Result<Discretization, SpectralFlowError>,
    tl: f64,
    nl: i64,
    tr: f64,
    nr: i64,
    out: &mut Vec<TrackedCrossing>,
) -> Result<(), SpectralFlowError> {
    if tr - tl < 1e-8 {
        out.push(TrackedCrossing {
            t_left: tl,
            t_right: tr,
            delta: nr - nl,
        });
        return Ok(());
    }
    let tm = 0.5 * (tl + tr);
    let nm = disc_at(tm)?.count_below(0.0) as i64;
    if nm != nl {
        refine_crossing(disc_at, tl, nl, tm, nm, out)?;
    }
    if nm != nr {
        refine_crossing(disc_at, tm, nm, tr, nr, out)?;
    }
    Ok(())
}

/// Operator eigenvalues inside [-window, window] at parameter t.
pub fn eigenvalues_in_window(
    vp: &ValidatedProblem,
    t: f64,
    m: usize,
    window: f64,
) -> Result<Vec<f64>, SpectralFlowError> {
    let d = member_discretization(vp, t, m)?;
    Ok(d.eigenvalues()
        .into_iter()
        .filter(|l| l.abs() <= window)
        .collect())
}

/// Number of negative eigenvalues of the family member at parameter t,
/// verified stable under mesh doubling.  Requires P > 0.
pub fn morse_index(
    vp: &ValidatedProblem,
    t: f64,
    m: usize,
) -> Result<usize, SpectralFlowError> {
    for i in 0..=256 {
        let x = i as f64 / 256.0;
        let eigs = symmetrize(&vp.p.eval(x)).symmetric_eigen().eigenvalues;
        if eigs.iter().any(|&l| l <= 0.0) {
            return Err(SpectralFlowError::IndefiniteP { x });
        }
    }
    let coarse = member_discretization(vp, t, m)?.count_below(0.0);
    let fine = member_discretization(vp, t, 2 * m)?.count_below(0.0);
    if coarse != fine {
        return Err(SpectralFlowError::GridTooCoarse {
            t_left: t,
            t_right: t,
            jump: fine as i64 - coarse as i64,
            allowed: 0,
        });
    }
    Ok(fine)
}
