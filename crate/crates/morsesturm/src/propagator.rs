//! Fundamental solutions of the linear Hamiltonian system
//! psi' = J0 B_z(x) psi on [0,1], psi(0) = Id.
//!
//! The default integrator is the Dormand-Prince embedded 5(4) pair with
//! FSAL and a fifth-order-accurate continuous extension, operating directly
//! on complex 2N x 2N matrices; a fixed-step classical RK4 with cubic
//! Hermite interpolants is available as a cross-check.  Complex
//! symplecticity (psi^T J psi = J, plain transpose) is monitored after
//! every accepted step and never enforced, so drift is an error signal
//! rather than something a projection could hide.

use crate::linalg::{max_abs_c, symplectic_defect, CMatrix};
use crate::problem::ValidatedProblem;
use num_complex::Complex64;
use thiserror::Error;

fn rl(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Symplectic-defect ceiling; crossing it aborts the integration.
pub const SYMPLECTIC_TOL: f64 = 1e-6;
/// Floor on |det psi| at checkpoints.
pub const DET_FLOOR: f64 = 1e-8;

/// Integration method selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Adaptive Dormand-Prince 5(4).
    Adaptive,
    /// Classical RK4 with the given number of uniform steps (>= 64).
    FixedStep(usize),
}

/// Tolerances and method for one integration.
#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub method: Method,
    pub dense: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-12,
            method: Method::Adaptive,
            dense: true,
        }
    }
}

#[derive(Clone, Debug, Error)]
pub enum PropagatorError {
    #[error("step size underflow near x = {x:.6}: coefficients are near-singular there")]
    StepSizeUnderflow { x: f64 },
    #[error("symplecticity lost at x = {x:.6}: defect {defect:.3e} exceeds {SYMPLECTIC_TOL:.0e}")]
    SymplecticityLost { x: f64, defect: f64 },
    #[error("fundamental matrix degenerated at x = {x:.6}: |det| = {det:.3e}")]
    DegenerateFundamental { x: f64, det: f64 },
    #[error("invalid integrator configuration: {0}")]
    BadConfig(String),
    #[error("step budget exhausted before reaching the end of the interval")]
    StepBudgetExceeded,
}

enum Interp {
    Dopri { cont: [CMatrix; 5] },
    Hermite {
        y0: CMatrix,
        y1: CMatrix,
        f0: CMatrix,
        f1: CMatrix,
    },
}

struct Segment {
    x0: f64,
    h: f64,
    interp: Interp,
}

/// The path x -> psi_z(x), with optional dense interpolants.
pub struct FundamentalSolution {
    pub z: Complex64,
    pub span: (f64, f64),
    end: CMatrix,
    segments: Vec<Segment>,
    pub max_symplectic_defect: f64,
    pub min_abs_det: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl FundamentalSolution {
    /// Terminal matrix psi_z(x1).
    pub fn end(&self) -> &CMatrix {
        &self.end
    }

    /// Evaluates psi_z(x) from the stored interpolants.  Requires the
    /// integration to have kept its dense output.
    pub fn eval(&self, x: f64) -> CMatrix {
        assert!(
            !self.segments.is_empty(),
            "dense output was not requested for this solution"
        );
        let (a, b) = self.span;
        let x = x.clamp(a.min(b), a.max(b));
        // last segment whose left end lies at or before x
        let mut idx = self
            .segments
            .partition_point(|s| s.x0 <= x)
            .saturating_sub(1);
        idx = idx.min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let th = ((x - seg.x0) / seg.h).clamp(0.0, 1.0);
        match &seg.interp {
            Interp::Dopri { cont } => {
                let th1 = 1.0 - th;
                let inner = &cont[3] + &cont[4] * rl(th1);
                let mid = &cont[2] + inner * rl(th);
                let outer = &cont[1] + mid * rl(th1);
                &cont[0] + outer * rl(th)
            }
            Interp::Hermite { y0, y1, f0, f1 } => {
                let h = seg.h;
                let t2 = th * th;
                let t3 = t2 * th;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + th;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                y0 * rl(h00) + f0 * rl(h10 * h) + y1 * rl(h01) + f1 * rl(h11 * h)
            }
        }
    }
}

// Dormand-Prince coefficients.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const BHAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

fn wrms(err: &CMatrix, y0: &CMatrix, y1: &CMatrix, rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    let n = err.len() as f64;
    for i in 0..err.len() {
        let sc = atol + rtol * y0[i].norm().max(y1[i].norm());
        let r = err[i].norm() / sc;
        acc += r * r;
    }
    (acc / n).sqrt()
}

/// Integrates y' = a(x) y over [x0, x1] (x0 < x1) from y(x0) = y0.
/// This raw entry point exists so coefficient matrices outside the
/// Morse-Sturm block structure can be driven in tests.
pub fn integrate_matrix_ode(
    a: &dyn Fn(f64) -> CMatrix,
    x0: f64,
    x1: f64,
    y0: &CMatrix,
    config: &IntegratorConfig,
    monitor_symplectic: bool,
) -> Result<FundamentalSolution, PropagatorError> {
    if !(config.rtol > 0.0 && config.atol > 0.0) {
        return Err(PropagatorError::BadConfig(
            "tolerances must be positive".into(),
        ));
    }
    if x1 <= x0 {
        return Err(PropagatorError::BadConfig(
            "integration span must be increasing".into(),
        ));
    }
    match config.method {
        Method::FixedStep(m) if m < 64 => {
            return Err(PropagatorError::BadConfig(format!(
                "fixed-step method needs at least 64 steps, got {m}"
            )))
        }
        Method::FixedStep(_) => fixed_rk4(a, x0, x1, y0, config, monitor_symplectic),
        Method::Adaptive => dopri5(a, x0, x1, y0, config, monitor_symplectic),
    }
}

struct Monitor {
    max_defect: f64,
    min_det: f64,
    enabled: bool,
}

impl Monitor {
    fn new(enabled: bool) -> Self {
        Monitor {
            max_defect: 0.0,
            min_det: f64::INFINITY,
            enabled,
        }
    }

    fn check(&mut self, x: f64, y: &CMatrix) -> Result<(), PropagatorError> {
        if !self.enabled {
            return Ok(());
        }
        let defect = symplectic_defect(y);
        self.max_defect = self.max_defect.max(defect);
        if defect > SYMPLECTIC_TOL {
            return Err(PropagatorError::SymplecticityLost { x, defect });
        }
        let det = y.clone().lu().determinant().norm();
        self.min_det = self.min_det.min(det);
        if det < DET_FLOOR {
            return Err(PropagatorError::DegenerateFundamental { x, det });
        }
        Ok(())
    }
}

fn dopri5(
    a: &dyn Fn(f64) -> CMatrix,
    x0: f64,
    x1: f64,
    y0: &CMatrix,
    config: &IntegratorConfig,
    monitor_symplectic: bool,
) -> Result<FundamentalSolution, PropagatorError> {
    let span = x1 - x0;
    let mut x = x0;
    let mut y = y0.clone();
    let mut monitor = Monitor::new(monitor_symplectic);
    monitor.check(x, &y)?;

    let mut k1 = a(x) * &y;
    // crude but self-correcting first step guess
    let f_scale = max_abs_c(&k1).max(1e-12);
    let y_scale = max_abs_c(&y).max(1e-12);
    let mut h = (0.01 * y_scale / f_scale).min(0.1 * span).max(1e-8 * span);

    let mut segments = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    const MAX_STEPS: usize = 10_000_000;

    while x < x1 {
        if accepted + rejected > MAX_STEPS {
            return Err(PropagatorError::StepBudgetExceeded);
        }
        if h < 1e-14 * span {
            return Err(PropagatorError::StepSizeUnderflow { x });
        }
        if x + h > x1 {
            h = x1 - x;
        }

        let k2 = a(x + C[1] * h) * (&y + &k1 * rl(A2[0] * h));
        let k3 = a(x + C[2] * h) * (&y + &k1 * rl(A3[0] * h) + &k2 * rl(A3[1] * h));
        let k4 = a(x + C[3] * h)
            * (&y + &k1 * rl(A4[0] * h) + &k2 * rl(A4[1] * h) + &k3 * rl(A4[2] * h));
        let k5 = a(x + C[4] * h)
            * (&y
                + &k1 * rl(A5[0] * h)
                + &k2 * rl(A5[1] * h)
                + &k3 * rl(A5[2] * h)
                + &k4 * rl(A5[3] * h));
        let k6 = a(x + C[5] * h)
            * (&y
                + &k1 * rl(A6[0] * h)
                + &k2 * rl(A6[1] * h)
                + &k3 * rl(A6[2] * h)
                + &k4 * rl(A6[3] * h)
                + &k5 * rl(A6[4] * h));
        let y1 = &y
            + &k1 * rl(B[0] * h)
            + &k3 * rl(B[2] * h)
            + &k4 * rl(B[3] * h)
            + &k5 * rl(B[4] * h)
            + &k6 * rl(B[5] * h);
        let k7 = a(x + h) * &y1;
        let yhat = &y
            + &k1 * rl(BHAT[0] * h)
            + &k3 * rl(BHAT[2] * h)
            + &k4 * rl(BHAT[3] * h)
            + &k5 * rl(BHAT[4] * h)
            + &k6 * rl(BHAT[5] * h)
            + &k7 * rl(BHAT[6] * h);
        let err = wrms(&(&y1 - &yhat), &y, &y1, config.rtol, config.atol);

        if !err.is_finite() {
            rejected += 1;
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            if config.dense {
                let ydiff = &y1 - &y;
                let bspl = &k1 * rl(h) - &ydiff;
                let c3 = &ydiff - &k7 * rl(h) - &bspl;
                let c4 = (&k1 * rl(D[0])
                    + &k3 * rl(D[2])
                    + &k4 * rl(D[3])
                    + &k5 * rl(D[4])
                    + &k6 * rl(D[5])
                    + &k7 * rl(D[6]))
                    * rl(h);
                segments.push(Segment {
                    x0: x,
                    h,
                    interp: Interp::Dopri {
                        cont: [y.clone(), ydiff, bspl, c3, c4],
                    },
                });
            }
            x += h;
            y = y1;
            k1 = k7;
            accepted += 1;
            monitor.check(x, &y)?;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h *= fac;
        } else {
            rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
        }
    }

    Ok(FundamentalSolution {
        z: Complex64::new(0.0, 0.0),
        span: (x0, x1),
        end: y,
        segments,
        max_symplectic_defect: monitor.max_defect,
        min_abs_det: if monitor.enabled { monitor.min_det } else { f64::NAN },
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

fn fixed_rk4(
    a: &dyn Fn(f64) -> CMatrix,
    x0: f64,
    x1: f64,
    y0: &CMatrix,
    config: &IntegratorConfig,
    monitor_symplectic: bool,
) -> Result<FundamentalSolution, PropagatorError> {
    let m = match config.method {
        Method::FixedStep(m) => m,
        Method::Adaptive => unreachable!(),
    };
    let h = (x1 - x0) / m as f64;
    let mut x = x0;
    let mut y = y0.clone();
    let mut monitor = Monitor::new(monitor_symplectic);
    monitor.check(x, &y)?;
    let mut segments = Vec::new();
    let mut f0 = a(x) * &y;

    for _ in 0..m {
        let k1 = f0.clone();
        let k2 = a(x + 0.5 * h) * (&y + &k1 * rl(0.5 * h));
        let k3 = a(x + 0.5 * h) * (&y + &k2 * rl(0.5 * h));
        let k4 = a(x + h) * (&y + &k3 * rl(h));
        let y1 = &y + (k1 + k2 * rl(2.0) + k3 * rl(2.0) + k4) * rl(h / 6.0);
        let f1 = a(x + h) * &y1;
        if config.dense {
            segments.push(Segment {
                x0: x,
                h,
                interp: Interp::Hermite {
                    y0: y.clone(),
                    y1: y1.clone(),
                    f0: f0.clone(),
                    f1: f1.clone(),
                },
            });
        }
        x += h;
        y = y1;
        f0 = f1;
        monitor.check(x, &y)?;
    }

    Ok(FundamentalSolution {
        z: Complex64::new(0.0, 0.0),
        span: (x0, x1),
        end: y,
        segments,
        max_symplectic_defect: monitor.max_defect,
        min_abs_det: if monitor.enabled { monitor.min_det } else { f64::NAN },
        accepted_steps: m,
        rejected_steps: 0,
    })
}

/// Fundamental solution psi_z on [0,1] with psi_z(0) = Id.
pub fn fundamental_solution(
    vp: &ValidatedProblem,
    z: Complex64,
    config: &IntegratorConfig,
) -> Result<FundamentalSolution, PropagatorError> {
    let id = CMatrix::identity(2 * vp.n, 2 * vp.n);
    fundamental_solution_on(vp, z, 0.0, 1.0, &id, config)
}

/// Fundamental solution on a sub-interval with a given initial matrix;
/// used for composition checks and restarted integrations.
pub fn fundamental_solution_on(
    vp: &ValidatedProblem,
    z: Complex64,
    x0: f64,
    x1: f64,
    y0: &CMatrix,
    config: &IntegratorConfig,
) -> Result<FundamentalSolution, PropagatorError> {
    let rhs = move |x: f64| vp.jb(z, x);
    let mut sol = integrate_matrix_ode(&rhs, x0, x1, y0, config, true)?;
    sol.z = z;
    Ok(sol)
}

/// Terminal matrix psi_z(1).
pub fn monodromy(
    vp: &ValidatedProblem,
    z: Complex64,
    config: &IntegratorConfig,
) -> Result<CMatrix, PropagatorError> {
    let mut cfg = *config;
    cfg.dense = false;
    Ok(fundamental_solution(vp, z, &cfg)?.end().clone())
}
