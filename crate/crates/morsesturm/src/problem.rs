//! Morse-Sturm problem data and validation.
//!
//! A problem on [0,1] consists of coefficient fields P, Q, G (P, G
//! symmetric, P invertible), a perturbation family C(t,.) with C(0,.) = 0,
//! and boundary matrices R0, R1 acting on the phase variable
//! w = (Pu' + Qu, u).  The second-order equation
//!
//! ```text
//! -(P u' + Q u)' + Q^T u' + (G + C(t,.)) u = 0
//! ```
//!
//! is equivalent to the first-order Hamiltonian system w' = J0 B_z(x) w
//! with the complex-symmetric coefficient matrix
//!
//! ```text
//! B_z(x) = [ P^{-1}        -P^{-1} Q                      ]
//!          [ -Q^T P^{-1}    Q^T P^{-1} Q - G - C(t,x) - is ]
//! ```
//!
//! for the complexified parameter z = t + is.  Validation checks every
//! standing hypothesis on a uniform grid before any computation runs.

use crate::linalg::{max_abs_r, symmetrize, to_complex, CMatrix, RMatrix};
use num_complex::Complex64;
use thiserror::Error;

/// Number of grid points used by [`validate`].
pub const VALIDATION_GRID: usize = 257;
/// Lower bound on |det P(x)| at validation points.
pub const DET_P_FLOOR: f64 = 1e-10;
/// Max-norm tolerance for declared-symmetric coefficients.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A matrix-valued coefficient on [0,1] in one of three representations.
#[derive(Clone, Debug)]
pub enum CoefficientField {
    /// sum_k coeffs[k] * x^k
    Polynomial { coeffs: Vec<RMatrix> },
    /// a0 + sum_k (cos[k-1] cos(2 pi k x) + sin[k-1] sin(2 pi k x))
    Fourier {
        a0: RMatrix,
        cos: Vec<RMatrix>,
        sin: Vec<RMatrix>,
    },
    /// Values on the uniform grid x_i = i/(m-1), interpolated with the
    /// given local order (1 = linear, 3 = cubic).
    Sampled { values: Vec<RMatrix>, order: usize },
}

impl CoefficientField {
    pub fn constant(m: RMatrix) -> Self {
        CoefficientField::Polynomial { coeffs: vec![m] }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(RMatrix::zeros(dim, dim))
    }

    pub fn scalar_constant(v: f64) -> Self {
        Self::constant(RMatrix::from_element(1, 1, v))
    }

    pub fn polynomial(coeffs: Vec<RMatrix>) -> Self {
        assert!(!coeffs.is_empty());
        CoefficientField::Polynomial { coeffs }
    }

    pub fn sampled(values: Vec<RMatrix>, order: usize) -> Self {
        assert!(order == 1 || order == 3, "interpolation order must be 1 or 3");
        assert!(values.len() >= if order == 3 { 4 } else { 2 });
        CoefficientField::Sampled { values, order }
    }

    pub fn dim(&self) -> usize {
        match self {
            CoefficientField::Polynomial { coeffs } => coeffs[0].nrows(),
            CoefficientField::Fourier { a0, .. } => a0.nrows(),
            CoefficientField::Sampled { values, .. } => values[0].nrows(),
        }
    }

    /// Evaluates the field at x in [0,1].
    pub fn eval(&self, x: f64) -> RMatrix {
        match self {
            CoefficientField::Polynomial { coeffs } => {
                let mut acc = coeffs[coeffs.len() - 1].clone();
                for k in (0..coeffs.len() - 1).rev() {
                    acc = acc * x + &coeffs[k];
                }
                acc
            }
            CoefficientField::Fourier { a0, cos, sin } => {
                let mut acc = a0.clone();
                let w = 2.0 * std::f64::consts::PI * x;
                for (k, m) in cos.iter().enumerate() {
                    acc += m * ((k + 1) as f64 * w).cos();
                }
                for (k, m) in sin.iter().enumerate() {
                    acc += m * ((k + 1) as f64 * w).sin();
                }
                acc
            }
            CoefficientField::Sampled { values, order } => {
                let m = values.len();
                let pos = x.clamp(0.0, 1.0) * (m - 1) as f64;
                if *order == 1 {
                    let k = (pos.floor() as usize).min(m - 2);
                    let f = pos - k as f64;
                    &values[k] * (1.0 - f) + &values[k + 1] * f
                } else {
                    // 4-point Lagrange on the window [k-1, k+2], clamped
                    let k = (pos.floor() as usize).min(m - 2);
                    let lo = k.saturating_sub(1).min(m - 4);
                    let f = pos - lo as f64;
                    let mut acc = RMatrix::zeros(values[0].nrows(), values[0].ncols());
                    for j in 0..4 {
                        let mut l = 1.0;
                        for i in 0..4 {
                            if i != j {
                                l *= (f - i as f64) / (j as f64 - i as f64);
                            }
                        }
                        acc += &values[lo + j] * l;
                    }
                    acc
                }
            }
        }
    }

    /// Returns the field multiplied by a scalar.
    pub fn scaled(&self, s: f64) -> Self {
        self.map(|m| m * s)
    }

    /// Returns the field with a constant matrix added.
    pub fn plus_constant(&self, add: &RMatrix) -> Self {
        match self {
            CoefficientField::Polynomial { coeffs } => {
                let mut c = coeffs.clone();
                c[0] = &c[0] + add;
                CoefficientField::Polynomial { coeffs: c }
            }
            CoefficientField::Fourier { a0, cos, sin } => CoefficientField::Fourier {
                a0: a0 + add,
                cos: cos.clone(),
                sin: sin.clone(),
            },
            CoefficientField::Sampled { values, order } => CoefficientField::Sampled {
                values: values.iter().map(|v| v + add).collect(),
                order: *order,
            },
        }
    }

    fn map(&self, f: impl Fn(&RMatrix) -> RMatrix) -> Self {
        match self {
            CoefficientField::Polynomial { coeffs } => CoefficientField::Polynomial {
                coeffs: coeffs.iter().map(&f).collect(),
            },
            CoefficientField::Fourier { a0, cos, sin } => CoefficientField::Fourier {
                a0: f(a0),
                cos: cos.iter().map(&f).collect(),
                sin: sin.iter().map(&f).collect(),
            },
            CoefficientField::Sampled { values, order } => CoefficientField::Sampled {
                values: values.iter().map(&f).collect(),
                order: *order,
            },
        }
    }

    fn max_asymmetry(&self, grid: usize) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..grid {
            let x = i as f64 / (grid - 1) as f64;
            let m = self.eval(x);
            worst = worst.max(max_abs_r(&(&m - m.transpose())));
        }
        worst
    }
}

/// One-parameter perturbation C(t,x), t in [0,1], with C(0,.) = 0.
#[derive(Clone, Debug)]
pub enum PerturbationFamily {
    /// C(t,x) = t * C1(x)
    Linear { c1: CoefficientField },
    /// Piecewise-linear interpolation in t between snapshot fields given at
    /// strictly increasing nodes t_nodes (first node 0, last node 1).
    Grid {
        t_nodes: Vec<f64>,
        snapshots: Vec<CoefficientField>,
    },
}

impl PerturbationFamily {
    pub fn linear(c1: CoefficientField) -> Self {
        PerturbationFamily::Linear { c1 }
    }

    pub fn dim(&self) -> usize {
        match self {
            PerturbationFamily::Linear { c1 } => c1.dim(),
            PerturbationFamily::Grid { snapshots, .. } => snapshots[0].dim(),
        }
    }

    /// C(t,x).
    pub fn eval(&self, t: f64, x: f64) -> RMatrix {
        match self {
            PerturbationFamily::Linear { c1 } => c1.eval(x) * t,
            PerturbationFamily::Grid { t_nodes, snapshots } => {
                let (k, f) = self.segment(t_nodes, t);
                snapshots[k].eval(x) * (1.0 - f) + snapshots[k + 1].eval(x) * f
            }
        }
    }

    /// dC/dt (t,x); for the grid mode the right-sided slope, except at t = 1.
    pub fn dt(&self, t: f64, x: f64) -> RMatrix {
        match self {
            PerturbationFamily::Linear { c1 } => c1.eval(x),
            PerturbationFamily::Grid { t_nodes, snapshots } => {
                let (k, _) = self.segment(t_nodes, t);
                let dt = t_nodes[k + 1] - t_nodes[k];
                (snapshots[k + 1].eval(x) - snapshots[k].eval(x)) / dt
            }
        }
    }

    fn segment(&self, t_nodes: &[f64], t: f64) -> (usize, f64) {
        let t = t.clamp(t_nodes[0], *t_nodes.last().unwrap());
        let mut k = t_nodes.len() - 2;
        for i in 0..t_nodes.len() - 1 {
            if t < t_nodes[i + 1] {
                k = i;
                break;
            }
        }
        (k, (t - t_nodes[k]) / (t_nodes[k + 1] - t_nodes[k]))
    }

    /// For a linear family, its slope field C1.
    pub fn linear_slope(&self) -> Option<&CoefficientField> {
        match self {
            PerturbationFamily::Linear { c1 } => Some(c1),
            PerturbationFamily::Grid { .. } => None,
        }
    }

    /// sup over a (t,x) sample grid of the Frobenius norm of C(t,x).
    pub fn max_norm(&self, t_samples: usize, x_samples: usize) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..t_samples {
            let t = i as f64 / (t_samples - 1) as f64;
            for j in 0..x_samples {
                let x = j as f64 / (x_samples - 1) as f64;
                worst = worst.max(self.eval(t, x).norm());
            }
        }
        worst
    }
}

/// Which preset a boundary condition came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPreset {
    Dirichlet,
    Neumann,
    Periodic,
    General,
}

/// Boundary matrices for R0 w(0) + R1 w(1) = 0 in the (v, u) ordering,
/// v = Pu' + Qu.
#[derive(Clone, Debug)]
pub struct BoundaryCondition {
    pub preset: BoundaryPreset,
    pub r0: RMatrix,
    pub r1: RMatrix,
}

impl BoundaryCondition {
    /// u(0) = u(1) = 0.
    pub fn dirichlet(n: usize) -> Self {
        let mut r0 = RMatrix::zeros(2 * n, 2 * n);
        let mut r1 = RMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            r0[(k, n + k)] = 1.0;
            r1[(n + k, n + k)] = 1.0;
        }
        BoundaryCondition {
            preset: BoundaryPreset::Dirichlet,
            r0,
            r1,
        }
    }

    /// Natural condition v(0) = v(1) = 0, v = Pu' + Qu.
    pub fn neumann(n: usize) -> Self {
        let mut r0 = RMatrix::zeros(2 * n, 2 * n);
        let mut r1 = RMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            r0[(k, k)] = 1.0;
            r1[(n + k, k)] = 1.0;
        }
        BoundaryCondition {
            preset: BoundaryPreset::Neumann,
            r0,
            r1,
        }
    }

    /// w(0) = w(1).
    pub fn periodic(n: usize) -> Self {
        let id = RMatrix::identity(2 * n, 2 * n);
        BoundaryCondition {
            preset: BoundaryPreset::Periodic,
            r0: id.clone(),
            r1: -id,
        }
    }

    pub fn general(r0: RMatrix, r1: RMatrix) -> Self {
        BoundaryCondition {
            preset: BoundaryPreset::General,
            r0,
            r1,
        }
    }
}

/// Full problem statement prior to validation.
#[derive(Clone, Debug)]
pub struct MorseSturmProblem {
    pub n: usize,
    pub p: CoefficientField,
    pub q: CoefficientField,
    pub g: CoefficientField,
    pub family: PerturbationFamily,
    pub bc: BoundaryCondition,
    /// Half-height h of the parameter rectangle Omega = [0,1] x [-h,h].
    pub half_height: f64,
}

/// A hypothesis that failed during validation.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("P({x}) is numerically singular: |det| = {det:.3e}")]
    DegenerateP { x: f64, det: f64 },
    #[error("{name} is not symmetric: max defect {defect:.3e} exceeds {SYMMETRY_TOL:.0e}")]
    AsymmetricCoefficient { name: String, defect: f64 },
    #[error("rank [R0 | R1] = {rank}, expected {expected}")]
    RankDeficientBoundary { rank: usize, expected: usize },
    #[error("C(0,.) is not zero: max norm {norm:.3e}")]
    NonzeroC0 { norm: f64 },
    #[error("{name} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("half-height must be positive, got {0}")]
    NonpositiveHeight(f64),
}

/// A problem whose standing hypotheses were checked; immutable and safe to
/// share across worker threads.
#[derive(Clone, Debug)]
pub struct ValidatedProblem {
    problem: MorseSturmProblem,
    family_sup_norm: f64,
}

/// Checks every standing hypothesis and returns a validated handle or the
/// full list of violations.
pub fn validate(problem: MorseSturmProblem) -> Result<ValidatedProblem, Vec<ValidationError>> {
    let mut errs = Vec::new();
    let n = problem.n;

    for (name, dim) in [
        ("P", problem.p.dim()),
        ("Q", problem.q.dim()),
        ("G", problem.g.dim()),
        ("C", problem.family.dim()),
    ] {
        if dim != n {
            errs.push(ValidationError::DimensionMismatch {
                name: name.into(),
                expected: n,
                found: dim,
            });
        }
    }
    for (name, m) in [("R0", &problem.bc.r0), ("R1", &problem.bc.r1)] {
        if m.nrows() != 2 * n || m.ncols() != 2 * n {
            errs.push(ValidationError::DimensionMismatch {
                name: name.into(),
                expected: 2 * n,
                found: m.nrows().max(m.ncols()),
            });
        }
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    if !(problem.half_height > 0.0) {
        errs.push(ValidationError::NonpositiveHeight(problem.half_height));
    }

    let g = VALIDATION_GRID;
    let mut worst_det: Option<(f64, f64)> = None;
    for i in 0..g {
        let x = i as f64 / (g - 1) as f64;
        let det = problem.p.eval(x).determinant();
        if det.abs() <= DET_P_FLOOR && worst_det.map_or(true, |(_, d)| det.abs() < d) {
            worst_det = Some((x, det.abs()));
        }
    }
    if let Some((x, det)) = worst_det {
        errs.push(ValidationError::DegenerateP { x, det });
    }

    for (name, field) in [("P", &problem.p), ("G", &problem.g)] {
        let defect = field.max_asymmetry(g);
        if defect >= SYMMETRY_TOL {
            errs.push(ValidationError::AsymmetricCoefficient {
                name: name.into(),
                defect,
            });
        }
    }
    let family_asym = match &problem.family {
        PerturbationFamily::Linear { c1 } => c1.max_asymmetry(g),
        PerturbationFamily::Grid { snapshots, .. } => snapshots
            .iter()
            .map(|s| s.max_asymmetry(g))
            .fold(0.0, f64::max),
    };
    if family_asym >= SYMMETRY_TOL {
        errs.push(ValidationError::AsymmetricCoefficient {
            name: "C".into(),
            defect: family_asym,
        });
    }

    let mut c0_norm = 0.0_f64;
    for i in 0..g {
        let x = i as f64 / (g - 1) as f64;
        c0_norm = c0_norm.max(max_abs_r(&problem.family.eval(0.0, x)));
    }
    if c0_norm >= SYMMETRY_TOL {
        errs.push(ValidationError::NonzeroC0 { norm: c0_norm });
    }

    if let PerturbationFamily::Grid { t_nodes, snapshots } = &problem.family {
        if t_nodes.len() != snapshots.len()
            || t_nodes.len() < 2
            || t_nodes.windows(2).any(|w| w[1] <= w[0])
            || (t_nodes[0] - 0.0).abs() > 1e-14
            || (t_nodes[t_nodes.len() - 1] - 1.0).abs() > 1e-14
        {
            errs.push(ValidationError::DimensionMismatch {
                name: "perturbation t-grid".into(),
                expected: snapshots.len(),
                found: t_nodes.len(),
            });
        }
    }

    let stacked = {
        let mut m = RMatrix::zeros(2 * n, 4 * n);
        m.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&problem.bc.r0);
        m.view_mut((0, 2 * n), (2 * n, 2 * n))
            .copy_from(&problem.bc.r1);
        m
    };
    let rank = stacked.svd(false, false).rank(1e-10);
    if rank != 2 * n {
        errs.push(ValidationError::RankDeficientBoundary {
            rank,
            expected: 2 * n,
        });
    }

    if errs.is_empty() {
        let family_sup_norm = problem.family.max_norm(33, 65);
        Ok(ValidatedProblem {
            problem,
            family_sup_norm,
        })
    } else {
        Err(errs)
    }
}

impl std::ops::Deref for ValidatedProblem {
    type Target = MorseSturmProblem;
    fn deref(&self) -> &MorseSturmProblem {
        &self.problem
    }
}

impl ValidatedProblem {
    pub fn problem(&self) -> &MorseSturmProblem {
        &self.problem
    }

    /// sup ||C(t,x)||_F over a sample grid, used for spectral windows.
    pub fn family_sup_norm(&self) -> f64 {
        self.family_sup_norm
    }

    /// The suspended perturbation C(t,x) + is Id at z = t + is.
    pub fn evaluate_c(&self, z: Complex64, x: f64) -> CMatrix {
        let mut c = to_complex(&symmetrize(&self.problem.family.eval(z.re, x)));
        for k in 0..self.problem.n {
            c[(k, k)] += Complex64::new(0.0, z.im);
        }
        c
    }

    /// The complex-symmetric Hamiltonian coefficient matrix B_z(x).  The
    /// returned matrix satisfies B = B^T entrywise-exactly and
    /// Im B = -s diag(0, Id).
    pub fn hamiltonian_coefficients(&self, z: Complex64, x: f64) -> CMatrix {
        let n = self.problem.n;
        let p = self.problem.p.eval(x);
        let pi = symmetrize(
            &p.try_inverse()
                .expect("P(x) singular despite validation; refine the coefficient data"),
        );
        let q = self.problem.q.eval(x);
        let g = symmetrize(&self.problem.g.eval(x));
        let c = symmetrize(&self.problem.family.eval(z.re, x));
        let piq = &pi * &q;
        let qtpq = symmetrize(&(q.transpose() * &piq));
        let b22 = qtpq - g - c;

        let mut b = CMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            for cix in 0..n {
                b[(r, cix)] = Complex64::new(pi[(r, cix)], 0.0);
                b[(r, n + cix)] = Complex64::new(-piq[(r, cix)], 0.0);
                b[(n + cix, r)] = Complex64::new(-piq[(r, cix)], 0.0);
                b[(n + r, n + cix)] = Complex64::new(b22[(r, cix)], 0.0);
            }
        }
        for k in 0..n {
            b[(n + k, n + k)] -= Complex64::new(0.0, z.im);
        }
        b
    }

    /// J0 B_z(x), the right-hand side matrix of the Hamiltonian system.
    pub fn jb(&self, z: Complex64, x: f64) -> CMatrix {
        crate::linalg::j_mul(&self.hamiltonian_coefficients(z, x))
    }

    /// d/dt of B at real parameter t: zero except the lower-right block
    /// -dC/dt (t,x).
    pub fn db_dt(&self, t: f64, x: f64) -> RMatrix {
        let n = self.problem.n;
        let dc = symmetrize(&self.problem.family.dt(t, x));
        let mut db = RMatrix::zeros(2 * n, 2 * n);
        db.view_mut((n, n), (n, n)).copy_from(&(-dc));
        db
    }

    /// dC/dt (t,x), symmetrized.
    pub fn c_dt(&self, t: f64, x: f64) -> RMatrix {
        symmetrize(&self.problem.family.dt(t, x))
    }
}

/// Convenience constructor for the scalar family problems used throughout
/// the tests: P = 1, Q = 0, G = g0, C(t,x) = slope * t.
pub fn scalar_linear_problem(g0: f64, slope: f64, bc: BoundaryCondition) -> MorseSturmProblem {
    MorseSturmProblem {
        n: 1,
        p: CoefficientField::scalar_constant(1.0),
        q: CoefficientField::zero(1),
        g: CoefficientField::scalar_constant(g0),
        family: PerturbationFamily::linear(CoefficientField::scalar_constant(slope)),
        bc,
        half_height: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_imag;

    fn running_example() -> ValidatedProblem {
        validate(scalar_linear_problem(0.0, -15.0, BoundaryCondition::dirichlet(1))).unwrap()
    }

    #[test]
    fn scalar_family_b_matrix_matches_hand_substitution() {
        // N=1, P=1, Q=0, G=0, C = -15t:  B = [[1, 0], [0, 15 t - i s]]
        let vp = running_example();
        let z = Complex64::new(0.5, 0.25);
        let b = vp.hamiltonian_coefficients(z, 0.3);
        assert_eq!(b[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(b[(0, 1)], Complex64::new(0.0, 0.0));
        assert_eq!(b[(1, 0)], Complex64::new(0.0, 0.0));
        assert_eq!(b[(1, 1)], Complex64::new(7.5, -0.25));
    }

    #[test]
    fn b_matrix_is_exactly_complex_symmetric_with_imaginary_suspension_only() {
        let p = CoefficientField::polynomial(vec![
            RMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]),
            RMatrix::from_row_slice(2, 2, &[0.1, 0.05, 0.05, -0.2]),
        ]);
        let q = CoefficientField::polynomial(vec![
            RMatrix::from_row_slice(2, 2, &[0.4, -1.0, 0.7, 0.2]),
            RMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.3, 0.1]),
        ]);
        let g = CoefficientField::constant(RMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, -0.7]));
        let fam = PerturbationFamily::linear(CoefficientField::constant(RMatrix::from_row_slice(
            2,
            2,
            &[-3.0, 1.0, 1.0, -5.0],
        )));
        let prob = MorseSturmProblem {
            n: 2,
            p,
            q,
            g,
            family: fam,
            bc: BoundaryCondition::dirichlet(2),
            half_height: 1.0,
        };
        let vp = validate(prob).unwrap();
        let s = 0.37;
        let b = vp.hamiltonian_coefficients(Complex64::new(0.61, s), 0.43);
        let defect = &b - b.transpose();
        assert_eq!(crate::linalg::max_abs_c(&defect), 0.0);
        // imaginary part sits only on the lower-right diagonal
        assert_eq!(max_imag(&b), s);
        for r in 0..4 {
            for c in 0..4 {
                let expected = if r == c && r >= 2 { -s } else { 0.0 };
                assert_eq!(b[(r, c)].im, expected);
            }
        }
    }

    #[test]
    fn b_matrix_reduces_to_block_diagonal_without_q_and_suspension() {
        let prob = MorseSturmProblem {
            n: 1,
            p: CoefficientField::scalar_constant(4.0),
            q: CoefficientField::zero(1),
            g: CoefficientField::scalar_constant(3.0),
            family: PerturbationFamily::linear(CoefficientField::zero(1)),
            bc: BoundaryCondition::dirichlet(1),
            half_height: 1.0,
        };
        let vp = validate(prob).unwrap();
        let b = vp.hamiltonian_coefficients(Complex64::new(0.0, 0.0), 0.8);
        assert_eq!(b[(0, 0)], Complex64::new(0.25, 0.0));
        assert_eq!(b[(0, 1)], Complex64::new(0.0, 0.0));
        assert_eq!(b[(1, 1)], Complex64::new(-3.0, 0.0));
    }

    #[test]
    fn suspended_c_evaluates_the_linear_mode_example() {
        // C1 = [[2]], z = 0.5 + 0.25i  ->  C_z = [[1 + 0.25i]]
        let prob = scalar_linear_problem(0.0, 2.0, BoundaryCondition::dirichlet(1));
        let vp = validate(prob).unwrap();
        let c = vp.evaluate_c(Complex64::new(0.5, 0.25), 0.9);
        assert_eq!(c[(0, 0)], Complex64::new(1.0, 0.25));
        let real_c = vp.evaluate_c(Complex64::new(0.5, 0.0), 0.9);
        assert_eq!(real_c[(0, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn boundary_presets_expand_to_the_exact_block_matrices() {
        let d = BoundaryCondition::dirichlet(2);
        let expected_r0 = RMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        );
        assert_eq!(d.r0, expected_r0);
        let expected_r1 = RMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
        );
        assert_eq!(d.r1, expected_r1);

        let nm = BoundaryCondition::neumann(1);
        assert_eq!(nm.r0, RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(nm.r1, RMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));

        let pe = BoundaryCondition::periodic(1);
        assert_eq!(pe.r0, RMatrix::identity(2, 2));
        assert_eq!(pe.r1, -RMatrix::identity(2, 2));
    }

    #[test]
    fn validation_rejects_a_p_that_vanishes_inside_the_interval() {
        // P(x) = x - 1/2 hits zero at x = 1/2
        let prob = MorseSturmProblem {
            n: 1,
            p: CoefficientField::polynomial(vec![
                RMatrix::from_element(1, 1, -0.5),
                RMatrix::from_element(1, 1, 1.0),
            ]),
            q: CoefficientField::zero(1),
            g: CoefficientField::zero(1),
            family: PerturbationFamily::linear(CoefficientField::zero(1)),
            bc: BoundaryCondition::dirichlet(1),
            half_height: 1.0,
        };
        let errs = validate(prob).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ValidationError::DegenerateP { .. })));
    }

    #[test]
    fn validation_rejects_rank_deficient_boundary_matrices() {
        let mut prob = scalar_linear_problem(0.0, -15.0, BoundaryCondition::dirichlet(1));
        prob.bc = BoundaryCondition::general(RMatrix::zeros(2, 2), RMatrix::zeros(2, 2));
        let errs = validate(prob).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ValidationError::RankDeficientBoundary { rank: 0, .. })));
    }

    #[test]
    fn validation_rejects_asymmetric_g_and_nonzero_c0() {
        let mut prob = scalar_linear_problem(0.0, -15.0, BoundaryCondition::dirichlet(1));
        prob.n = 2;
        prob.p = CoefficientField::constant(RMatrix::identity(2, 2));
        prob.q = CoefficientField::zero(2);
        prob.g = CoefficientField::constant(RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        prob.family = PerturbationFamily::Grid {
            t_nodes: vec![0.0, 1.0],
            snapshots: vec![
                CoefficientField::constant(RMatrix::identity(2, 2)),
                CoefficientField::constant(RMatrix::identity(2, 2)),
            ],
        };
        prob.bc = BoundaryCondition::dirichlet(2);
        let errs = validate(prob).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ValidationError::AsymmetricCoefficient { .. })));
        assert!(errs
            .iter()
            .any(|e| matches!(e, ValidationError::NonzeroC0 { .. })));
    }

    #[test]
    fn sampled_fields_interpolate_linearly_and_cubically()  {
        let quad: Vec<RMatrix> = (0..5)
            .map(|i| {
                let x = i as f64 / 4.0;
                RMatrix::from_element(1, 1, x * x)
            })
            .collect();
        let lin = CoefficientField::sampled(quad, 1);
        // midpoint of the [0.25, 0.5] cell: average of the two nodal values
        assert!((lin.eval(0.375)[(0, 0)] - (0.0625 + 0.25) / 2.0).abs() < 1e-15);

        let cubic_vals: Vec<RMatrix> = (0..9)
            .map(|i| {
                let x = i as f64 / 8.0;
                RMatrix::from_element(1, 1, x * x * x)
            })
            .collect();
        let cub = CoefficientField::sampled(cubic_vals, 3);
        for &x in &[0.11, 0.5, 0.77, 0.97] {
            assert!((cub.eval(x)[(0, 0)] - x * x * x).abs() < 1e-13);
        }
    }

    #[test]
    fn grid_family_interpolates_in_t_with_piecewise_slope() {
        let zero = CoefficientField::zero(1);
        let one = CoefficientField::scalar_constant(2.0);
        let two = CoefficientField::scalar_constant(-1.0);
        let fam = PerturbationFamily::Grid {
            t_nodes: vec![0.0, 0.5, 1.0],
            snapshots: vec![zero, one, two],
        };
        assert!((fam.eval(0.25, 0.3)[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((fam.dt(0.25, 0.3)[(0, 0)] - 4.0).abs() < 1e-15);
        assert!((fam.dt(0.75, 0.3)[(0, 0)] - (-6.0)).abs() < 1e-15);
        assert!((fam.eval(1.0, 0.3)[(0, 0)] - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn fourier_fields_evaluate_the_trigonometric_sum() {
        let f = CoefficientField::Fourier {
            a0: RMatrix::from_element(1, 1, 1.0),
            cos: vec![RMatrix::from_element(1, 1, 0.5)],
            sin: vec![RMatrix::from_element(1, 1, -2.0)],
        };
        // x = 1/4: cos(2 pi x) = 0, sin(2 pi x) = 1
        assert!((f.eval(0.25)[(0, 0)] - (1.0 - 2.0)).abs() < 1e-15);
    }
}
