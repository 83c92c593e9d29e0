//! Maslov index of the monodromy path against a boundary Lagrangian in
//! the doubled phase space, component classification of Sp(2n,R) by the
//! sign of det(M - Id), linear-stability analysis of monodromy matrices,
//! and the parity-based instability verdict.
//!
//! Doubled space conventions: points are stacked pairs (w0, w1) in
//! R^{2n} + R^{2n} with the form om~((a0,a1),(b0,b1)) = -om(a0,b0) +
//! om(a1,b1), om(a,b) = <J0 a, b>.  A boundary pair (R0,R1) determines
//! the Lagrangian L = ker [R0 | R1]; the path is the graph of psi(t),
//! framed as [Id; psi(t)].  Intersections of the two are exactly the
//! kernels of R0 + R1 psi(t), so crossing detection shares its zeros
//! with the determinant map of the degree module.

use crate::degree::locate_real_zeros;
use crate::linalg::{
    double_j, j_mul_r, left_annihilator, nullspace, standard_j, symmetrize,
    symplectic_inverse_r, to_complex, CMatrix, RMatrix,
};
use crate::problem::ValidatedProblem;
use crate::propagator::{fundamental_solution, IntegratorConfig, PropagatorError};
use crate::spectralflow::{spectral_flow_crossing_method, SpectralFlowError};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Clone, Debug, Error)]
pub enum SymplecticError {
    #[error("frame has rank {rank}, expected {expected}")]
    RankDeficientFrame { rank: usize, expected: usize },
    #[error("frame is not isotropic: form residual {defect:.3e}")]
    NotLagrangian { defect: f64 },
    #[error("matrix is not symplectic: defect {defect:.3e} exceeds {allowed:.3e}")]
    NotSymplectic { defect: f64, allowed: f64 },
    #[error(
        "crossing at t = {t0} is irregular (smallest |eigenvalue| {min_abs:.3e} of the crossing \
         form is below {floor:.3e}); apply a small spectral shift delta and retry"
    )]
    IrregularCrossing { t0: f64, min_abs: f64, floor: f64 },
    #[error("path must contain at least two samples with increasing t")]
    DegeneratePath,
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    SpectralFlow(#[from] SpectralFlowError),
}

const ISOTROPY_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

/// A Lagrangian subspace of (R^{2n}, om) given by a 2n x n frame.
#[derive(Clone, Debug)]
pub struct LagrangianFrame {
    pub frame: RMatrix,
    pub n: usize,
}

impl LagrangianFrame {
    pub fn new(frame: RMatrix) -> Result<Self, SymplecticError> {
        let n = frame.ncols();
        if frame.nrows() != 2 * n {
            return Err(SymplecticError::RankDeficientFrame {
                rank: frame.nrows(),
                expected: 2 * n,
            });
        }
        check_rank(&frame, n)?;
        check_isotropy(&frame, &standard_j(n))?;
        Ok(LagrangianFrame { frame, n })
    }
}

fn check_rank(frame: &RMatrix, expected: usize) -> Result<(), SymplecticError> {
    let sv = frame.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |m, &s| m.max(s));
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if rank != expected {
        return Err(SymplecticError::RankDeficientFrame { rank, expected });
    }
    Ok(())
}

fn check_isotropy(frame: &RMatrix, structure: &RMatrix) -> Result<(), SymplecticError> {
    let d = frame.transpose() * structure * frame;
    let scale = (frame.norm() * frame.norm()).max(1e-300);
    let defect = crate::linalg::max_abs_r(&d) / scale;
    if defect > ISOTROPY_TOL {
        return Err(SymplecticError::NotLagrangian { defect });
    }
    Ok(())
}

/// A Lagrangian subspace of the doubled phase space, framed 4n x 2n.
#[derive(Clone, Debug)]
pub struct DoubleLagrangian {
    pub frame: RMatrix,
    pub n: usize,
}

impl DoubleLagrangian {
    pub fn new(frame: RMatrix) -> Result<Self, SymplecticError> {
        let rows = frame.nrows();
        let n = rows / 4;
        if rows != 4 * n || frame.ncols() != 2 * n || n == 0 {
            return Err(SymplecticError::RankDeficientFrame {
                rank: frame.ncols(),
                expected: rows / 2,
            });
        }
        check_rank(&frame, 2 * n)?;
        check_isotropy(&frame, &double_j(n))?;
        Ok(DoubleLagrangian { frame, n })
    }

    /// Lagrangian of a boundary trace subspace Z of R^n + R^n (the
    /// admissible end values (u(0), u(1))): solutions w = ((v0,u0),(v1,u1))
    /// with (u0,u1) in Z and (v0,-v1) orthogonal to Z.
    pub fn from_boundary_subspace(z_frame: &RMatrix) -> Result<Self, SymplecticError> {
        let n2 = z_frame.nrows();
        let d = z_frame.ncols();
        if n2 % 2 != 0 || n2 == 0 || d > n2 {
            return Err(SymplecticError::RankDeficientFrame {
                rank: d,
                expected: n2,
            });
        }
        let n = n2 / 2;
        if d > 0 {
            check_rank(z_frame, d)?;
        }
        let perp = nullspace(&z_frame.transpose(), RANK_TOL);
        let mut frame = RMatrix::zeros(4 * n, n2);
        let mut col = 0;
        for alpha in &perp {
            for k in 0..n {
                frame[(k, col)] = alpha[k];
                frame[(2 * n + k, col)] = -alpha[n + k];
            }
            col += 1;
        }
        for b in 0..d {
            for k in 0..n {
                frame[(n + k, col)] = z_frame[(k, b)];
                frame[(3 * n + k, col)] = z_frame[(n + k, b)];
            }
            col += 1;
        }
        Self::new(frame)
    }

    /// Lagrangian cut out by a self-adjoint boundary pair,
    /// L = ker [R0 | R1].
    pub fn from_boundary_pair(r0: &RMatrix, r1: &RMatrix) -> Result<Self, SymplecticError> {
        let n2 = r0.ncols();
        let mut pair = RMatrix::zeros(r0.nrows(), 2 * n2);
        pair.view_mut((0, 0), (r0.nrows(), n2)).copy_from(r0);
        pair.view_mut((0, n2), (r1.nrows(), n2)).copy_from(r1);
        let basis = nullspace(&pair, RANK_TOL);
        let mut frame = RMatrix::zeros(2 * n2, basis.len());
        for (c, v) in basis.iter().enumerate() {
            frame.column_mut(c).copy_from(v);
        }
        Self::new(frame)
    }
}

/// One sample of a symplectic path with its t-derivative.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub t: f64,
    pub psi: RMatrix,
    pub dpsi: RMatrix,
}

/// Cubic Hermite evaluation of the sampled path at t: value and
/// derivative.
fn path_eval(path: &[PathSample], t: f64) -> (RMatrix, RMatrix) {
    let last = path.len() - 1;
    if t <= path[0].t {
        return (path[0].psi.clone(), path[0].dpsi.clone());
    }
    if t >= path[last].t {
        return (path[last].psi.clone(), path[last].dpsi.clone());
    }
    let i = path.partition_point(|s| s.t <= t) - 1;
    let i = i.min(last - 1);
    let (a, b) = (&path[i], &path[i + 1]);
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let psi = &a.psi * h00 + &a.dpsi * (h * h10) + &b.psi * h01 + &b.dpsi * (h * h11);
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let dpsi = &a.psi * d00 + &a.dpsi * d10 + &b.psi * d01 + &b.dpsi * d11;
    (psi, dpsi)
}

/// Where along the path a crossing sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingLocation {
    Interior,
    Start,
    End,
}

#[derive(Clone, Debug)]
pub struct MaslovCrossing {
    pub t0: f64,
    pub gamma: RMatrix,
    pub n_plus: usize,
    pub n_minus: usize,
    pub location: CrossingLocation,
    /// Contribution to the index: signature for interior crossings,
    /// +n_plus at the start, -n_minus at the end.
    pub contribution: i64,
    /// Relative disagreement between the direct crossing form and the
    /// two fixed-transversal evaluations.
    pub transversal_defect: f64,
}

#[derive(Clone, Debug)]
pub struct MaslovResult {
    pub index: i64,
    pub crossings: Vec<MaslovCrossing>,
    pub endpoint_crossing: bool,
}

/// Kernel columns of a square matrix by SVD with an absolute singular
/// value threshold; falls back to the least singular direction when no
/// singular value clears it.
fn kernel_columns(m: &RMatrix, threshold: f64) -> RMatrix {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let sv = &svd.singular_values;
    let mut rows: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= threshold).collect();
    if rows.is_empty() {
        let imin = (0..sv.len())
            .min_by(|&a, &b| sv[a].total_cmp(&sv[b]))
            .unwrap();
        rows.push(imin);
    }
    let mut out = RMatrix::zeros(m.ncols(), rows.len());
    for (c, &i) in rows.iter().enumerate() {
        out.column_mut(c).copy_from(&vt.row(i).transpose());
    }
    out
}

struct CrossingEval {
    gamma: RMatrix,
    n_plus: usize,
    n_minus: usize,
    transversal_defect: f64,
}

fn evaluate_crossing(
    t0: f64,
    psi: &RMatrix,
    dpsi: &RMatrix,
    r0: &RMatrix,
    r1: &RMatrix,
    n: usize,
) -> Result<CrossingEval, SymplecticError> {
    let shifted = r1 * psi;
    let pre = crate::linalg::max_abs_r(r0) + crate::linalg::max_abs_r(&shifted);
    let xi = kernel_columns(&(r0 + shifted), 1e-6 * pre);
    let k = xi.ncols();

    // direct crossing form: Gamma_kl = om(psi xi_k, dpsi xi_l)
    let moving = psi * &xi;
    let gamma_raw = j_mul_r(&moving).transpose() * (dpsi * &xi);
    let gamma = symmetrize(&gamma_raw);

    // transversal evaluations: decompose the path derivative along the
    // graph Lagrangian and a transversal W, then pair against W only
    let jj = double_j(n);
    let mut f = RMatrix::zeros(4 * n, 2 * n);
    f.view_mut((0, 0), (2 * n, 2 * n))
        .copy_from(&RMatrix::identity(2 * n, 2 * n));
    f.view_mut((2 * n, 0), (2 * n, 2 * n)).copy_from(psi);
    let mut fp = RMatrix::zeros(4 * n, 2 * n);
    fp.view_mut((2 * n, 0), (2 * n, 2 * n)).copy_from(dpsi);
    let v = &f * &xi;
    let jv = &jj * &v;
    let rhs = &fp * &xi;
    let theta = 0.3_f64;
    let rot = RMatrix::identity(4 * n, 4 * n) * theta.cos() + &jj * theta.sin();
    let w1 = &jj * &f;
    let mut defect = 0.0_f64;
    let gnorm = gamma.norm().max(1e-300);
    for w in [w1.clone(), &rot * &w1] {
        let mut sys = RMatrix::zeros(4 * n, 4 * n);
        sys.view_mut((0, 0), (4 * n, 2 * n)).copy_from(&f);
        sys.view_mut((0, 2 * n), (4 * n, 2 * n)).copy_from(&w);
        if let Some(sol) = sys.lu().solve(&rhs) {
            let b = sol.view((2 * n, 0), (2 * n, k)).into_owned();
            let qw = symmetrize(&(jv.transpose() * (&w * b)));
            defect = defect.max((&qw - &gamma).norm() / gnorm);
        }
    }

    let eigs = gamma.clone().symmetric_eigen().eigenvalues;
    let scale = eigs.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
    let floor = 1e-8 * scale;
    let mut n_plus = 0;
    let mut n_minus = 0;
    let mut min_abs = f64::INFINITY;
    let mut nullity = 0;
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
        return Err(SymplecticError::IrregularCrossing {
            t0,
            min_abs,
            floor,
        });
    }
    Ok(CrossingEval {
        gamma,
        n_plus,
        n_minus,
        transversal_defect: defect,
    })
}

/// Maslov index of the sampled symplectic path against the reference
/// Lagrangian: sum of crossing-form signatures at interior crossings,
/// plus n_plus at a start crossing and minus n_minus at an end crossing.
pub fn maslov_clm(
    l: &DoubleLagrangian,
    path: &[PathSample],
) -> Result<MaslovResult, SymplecticError> {
    if path.len() < 2 || path.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(SymplecticError::DegeneratePath);
    }
    let n = l.n;
    let ann = left_annihilator(&l.frame);
    let r0 = ann.view((0, 0), (2 * n, 2 * n)).into_owned();
    let r1 = ann.view((0, 2 * n), (2 * n, 2 * n)).into_owned();

    let det_at = |t: f64| -> f64 {
        let (psi, _) = path_eval(path, t);
        (&r0 + &r1 * psi).determinant()
    };
    let (a, b) = (path[0].t, path[path.len() - 1].t);
    let scale = path
        .iter()
        .map(|s| det_at(s.t).abs())
        .fold(0.0_f64, f64::max)
        .max(1e-300);

    let start_cross = det_at(a).abs() <= 1e-8 * scale;
    let end_cross = det_at(b).abs() <= 1e-8 * scale;

    let grid = (4 * (path.len() - 1)).max(256);
    let zeros = locate_real_zeros(&det_at, a, b, grid, 1e-10 * (b - a), 1e-6);
    let edge = (b - a) * 1e-7;

    let mut crossings = Vec::new();
    if start_cross {
        let ev = evaluate_crossing(a, &path[0].psi, &path[0].dpsi, &r0, &r1, n)?;
        crossings.push(MaslovCrossing {
            t0: a,
            contribution: ev.n_plus as i64,
            gamma: ev.gamma,
            n_plus: ev.n_plus,
            n_minus: ev.n_minus,
            location: CrossingLocation::Start,
            transversal_defect: ev.transversal_defect,
        });
    }
    for z in &zeros {
        if (start_cross && z.t0 - a <= edge) || (end_cross && b - z.t0 <= edge) {
            continue;
        }
        let (psi, dpsi) = path_eval(path, z.t0);
        let ev = evaluate_crossing(z.t0, &psi, &dpsi, &r0, &r1, n)?;
        crossings.push(MaslovCrossing {
            t0: z.t0,
            contribution: ev.n_plus as i64 - ev.n_minus as i64,
            gamma: ev.gamma,
            n_plus: ev.n_plus,
            n_minus: ev.n_minus,
            location: CrossingLocation::Interior,
            transversal_defect: ev.transversal_defect,
        });
    }
    if end_cross {
        let lastp = &path[path.len() - 1];
        let ev = evaluate_crossing(b, &lastp.psi, &lastp.dpsi, &r0, &r1, n)?;
        crossings.push(MaslovCrossing {
            t0: b,
            contribution: -(ev.n_minus as i64),
            gamma: ev.gamma,
            n_plus: ev.n_plus,
            n_minus: ev.n_minus,
            location: CrossingLocation::End,
            transversal_defect: ev.transversal_defect,
        });
    }
    Ok(MaslovResult {
        index: crossings.iter().map(|c| c.contribution).sum(),
        endpoint_crossing: start_cross || end_cross,
        crossings,
    })
}

/// Samples the family path t -> psi_t(1) together with its t-derivative,
/// computed by variation of parameters:
/// d psi/dt (1) = psi(1) * integral of psi(y)^{-1} J0 (dB/dt)(y) psi(y) dy.
pub fn family_path_at(
    vp: &ValidatedProblem,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<PathSample>, SymplecticError> {
    let mut cfg = *config;
    cfg.dense = true;
    let quad = crate::linalg::gauss_panels(0.0, 1.0, 16, 8);
    times
        .par_iter()
        .map(|&t| {
            let z = Complex64::new(t, 0.0);
            let sol = fundamental_solution(vp, z, &cfg)?;
            let psi1 = crate::linalg::real_part(sol.end());
            let mut s = RMatrix::zeros(2 * vp.n, 2 * vp.n);
            for &(y, w) in &quad {
                let psi_y = crate::linalg::real_part(&sol.eval(y));
                let integrand =
                    symplectic_inverse_r(&psi_y) * j_mul_r(&(vp.db_dt(t, y) * &psi_y));
                s += integrand * w;
            }
            let dpsi = &psi1 * s;
            Ok(PathSample { t, psi: psi1, dpsi })
        })
        .collect()
}

/// Uniformly sampled family path over t in [0, 1].
pub fn family_path(
    vp: &ValidatedProblem,
    samples: usize,
    config: &IntegratorConfig,
) -> Result<Vec<PathSample>, SymplecticError> {
    let m = samples.max(2);
    let times: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    family_path_at(vp, &times, config)
}

// ---------------------------------------------------------------------------
// Sp(2n) components and stability

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpComponent {
    Plus,
    Minus,
    Zero,
}

impl std::fmt::Display for SpComponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpComponent::Plus => write!(f, "Sp+"),
            SpComponent::Minus => write!(f, "Sp-"),
            SpComponent::Zero => write!(f, "Sp0"),
        }
    }
}

/// Classifies a symplectic matrix by the sign of det(M - Id), with a
/// tolerance band mapping near-zero determinants to the boundary set.
pub fn sp_component(m: &RMatrix) -> Result<SpComponent, SymplecticError> {
    let n2 = m.nrows();
    let n = n2 / 2;
    let j = standard_j(n);
    let defect = crate::linalg::max_abs_r(&(m.transpose() * &j * m - &j));
    let allowed = 1e-8 * (1.0 + m.norm()) * (1.0 + m.norm());
    if defect > allowed {
        return Err(SymplecticError::NotSymplectic { defect, allowed });
    }
    let d = (m - RMatrix::identity(n2, n2)).determinant();
    let band = 1e-8 * (1.0 + m.norm()).powi(n2 as i32);
    Ok(if d.abs() <= band {
        SpComponent::Zero
    } else if d > 0.0 {
        SpComponent::Plus
    } else {
        SpComponent::Minus
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    MarginalDegenerate,
}

impl std::fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StabilityVerdict::Stable => write!(f, "stable"),
            StabilityVerdict::Unstable => write!(f, "unstable"),
            StabilityVerdict::MarginalDegenerate => write!(f, "marginal-degenerate"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StabilityAnalysis {
    pub verdict: StabilityVerdict,
    pub eigenvalues: Vec<Complex64>,
    /// Worst deviation of an eigenvalue modulus from 1.
    pub modulus_defect: f64,
    pub semisimple: bool,
}

/// Eigenvalue analysis for linear stability: all moduli within tolerance
/// of 1 and every eigenvalue semisimple (geometric multiplicity equal to
/// algebraic, by rank of M - lambda Id).
pub fn analyze_stability(m: &RMatrix) -> StabilityAnalysis {
    let n2 = m.nrows();
    let scale = 1.0 + m.norm();
    let tol = 1e-8 * scale;
    let eigs: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();
    let modulus_defect = eigs
        .iter()
        .map(|l| (l.norm() - 1.0).abs())
        .fold(0.0_f64, f64::max);

    // cluster eigenvalues, then compare geometric and algebraic counts
    let cluster_tol = 1e-6 * scale;
    let mut remaining: Vec<Complex64> = eigs.clone();
    remaining.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let mut semisimple = true;
    let mc = to_complex(m);
    let mut i = 0;
    while i < remaining.len() {
        let mut j = i + 1;
        while j < remaining.len() && (remaining[j] - remaining[i]).norm() <= cluster_tol {
            j += 1;
        }
        let count = j - i;
        if count > 1 {
            let mut center = Complex64::new(0.0, 0.0);
            for l in &remaining[i..j] {
                center += l;
            }
            center /= count as f64;
            let shifted = &mc - CMatrix::identity(n2, n2) * center;
            let sv = shifted.svd(false, false).singular_values;
            let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s)).max(1e-300);
            let rank = sv.iter().filter(|&&s| s > 1e-8 * smax).count();
            if n2 - rank < count {
                semisimple = false;
            }
        }
        i = j;
    }

    let verdict = if modulus_defect > tol {
        StabilityVerdict::Unstable
    } else if !semisimple {
        StabilityVerdict::MarginalDegenerate
    } else {
        StabilityVerdict::Stable
    };
    StabilityAnalysis {
        verdict,
        eigenvalues: eigs,
        modulus_defect,
        semisimple,
    }
}

pub fn is_linearly_stable(m: &RMatrix) -> bool {
    analyze_stability(m).verdict == StabilityVerdict::Stable
}

/// Full monodromy report: spectrum, component tag, stability verdict.
#[derive(Clone, Debug)]
pub struct MonodromyAnalysis {
    pub matrix: RMatrix,
    pub component: SpComponent,
    pub stability: StabilityAnalysis,
}

pub fn analyze_monodromy(m: &RMatrix) -> Result<MonodromyAnalysis, SymplecticError> {
    let component = sp_component(m)?;
    let stability = analyze_stability(m);
    Ok(MonodromyAnalysis {
        matrix: m.clone(),
        component,
        stability,
    })
}

/// Exact rotation exp(delta * J0) = cos(delta) Id + sin(delta) J0.
pub fn j_rotation(n: usize, delta: f64) -> RMatrix {
    RMatrix::identity(2 * n, 2 * n) * delta.cos() + standard_j(n) * delta.sin()
}

#[derive(Clone, Copy, Debug)]
pub struct PerturbedComponents {
    pub delta: f64,
    pub minus: SpComponent,
    pub plus: SpComponent,
}

/// Components of e^{-delta J} M and e^{+delta J} M for each delta.  For a
/// linearly stable M both land in Sp+ once delta is small enough.
pub fn stable_perturbation_check(
    m: &RMatrix,
    deltas: &[f64],
) -> Result<Vec<PerturbedComponents>, SymplecticError> {
    let n = m.nrows() / 2;
    deltas
        .iter()
        .map(|&delta| {
            let minus = sp_component(&(j_rotation(n, -delta) * m))?;
            let plus = sp_component(&(j_rotation(n, delta) * m))?;
            Ok(PerturbedComponents { delta, minus, plus })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Preserving,
    NonPreserving,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstabilityVerdict {
    LinearlyUnstable,
    Inconclusive,
}

impl std::fmt::Display for InstabilityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InstabilityVerdict::LinearlyUnstable => write!(f, "linearly-unstable"),
            InstabilityVerdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Parity criterion: a periodic orbit is linearly unstable when the
/// degree index plus the configuration dimension is odd for orientation
/// preserving orbits, or even for non-preserving ones.  The test never
/// certifies stability.
pub fn instability_verdict(iota_pw: i64, n: usize, orientation: Orientation) -> InstabilityVerdict {
    let odd = (iota_pw + n as i64).rem_euclid(2) == 1;
    let fire = match orientation {
        Orientation::Preserving => odd,
        Orientation::NonPreserving => !odd,
    };
    if fire {
        InstabilityVerdict::LinearlyUnstable
    } else {
        InstabilityVerdict::Inconclusive
    }
}

/// Cross-module consistency report between the Maslov index of the family
/// path and the spectral flow.
#[derive(Clone, Debug)]
pub struct FlowFormulaReport {
    pub iota_sp: i64,
    pub iota_clm: i64,
    pub consistent: bool,
    pub endpoint_crossing: bool,
}

/// Verifies the index identity iota_CLM = -iota_SP for the family path
/// against the boundary Lagrangian.
pub fn spectral_flow_formula_check(
    vp: &ValidatedProblem,
    path_samples: usize,
    config: &IntegratorConfig,
) -> Result<FlowFormulaReport, SymplecticError> {
    let method = spectral_flow_crossing_method(vp, config)?;
    let l = DoubleLagrangian::from_boundary_pair(&vp.bc.r0, &vp.bc.r1)?;
    let path = family_path(vp, path_samples, config)?;
    let mas = maslov_clm(&l, &path)?;
    Ok(FlowFormulaReport {
        iota_sp: method.sf,
        iota_clm: mas.index,
        consistent: mas.index == -method.sf,
        endpoint_crossing: mas.endpoint_crossing,
    })
}
