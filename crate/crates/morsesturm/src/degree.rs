//! The determinant map rho(z) = det(R0 + R1 psi_z(1)), its winding number
//! over the parameter rectangle Omega = [0,1] x [-h,h], and the location of
//! its real zeros (the degeneracy instants of the operator family).
//!
//! The winding is accumulated from principal argument increments between
//! adjacent boundary samples, refined by parameter bisection until every
//! increment has magnitude at most pi/2.  Each increment is then
//! unambiguous, the accumulated total telescopes to an exact multiple of
//! 2 pi, and the integer is insensitive to further refinement.  Boundary
//! traversal is counterclockwise: (0,-h) -> (1,-h) -> (1,h) -> (0,h) ->
//! close.
//!
//! Real zeros are found by a sign-change scan of rho on the real axis plus
//! a modulus-dip scan (golden-section minimization at strict local minima
//! of |rho|) that catches even-multiplicity zeros, where rho touches zero
//! without changing sign.

use crate::linalg::CMatrix;
use crate::problem::ValidatedProblem;
use crate::propagator::{monodromy, IntegratorConfig, PropagatorError};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Knobs for the adaptive boundary winding.
#[derive(Clone, Copy, Debug)]
pub struct WindingConfig {
    /// Initial number of samples per rectangle edge.
    pub samples_per_edge: usize,
    /// Hard cap on boundary samples before giving up.
    pub max_samples: usize,
    /// Relative admissibility floor: |rho| must exceed this times the
    /// maximum boundary |rho|.
    pub floor_rel: f64,
    /// Allowed distance of the accumulated turn from an integer multiple
    /// of 2 pi.
    pub integer_tol: f64,
}

impl Default for WindingConfig {
    fn default() -> Self {
        WindingConfig {
            samples_per_edge: 16,
            max_samples: 100_000,
            floor_rel: 1e-8,
            integer_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Error)]
pub enum DegreeError {
    #[error("family endpoint t = {t} is degenerate: |rho| = {abs:.3e} below floor {floor:.3e}")]
    NotAdmissible { t: f64, abs: f64, floor: f64 },
    #[error("|rho| = {abs:.3e} below floor {floor:.3e} on the boundary at parameter {p:.6}; spectrum may have left the real axis")]
    BoundaryZero { p: f64, abs: f64, floor: f64 },
    #[error("refinement budget exhausted after {samples} boundary samples")]
    RefinementBudgetExceeded { samples: usize },
    #[error("accumulated turn {total:.6e} is not an integer multiple of 2 pi (residual {residual:.3e})")]
    WindingNotInteger { total: f64, residual: f64 },
    #[error("zeros at t = {t1:.12} and t = {t2:.12} are too close to separate")]
    ClusterUnresolved { t1: f64, t2: f64 },
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

/// One boundary sample of a closed-loop function.
#[derive(Clone, Debug)]
pub struct LoopSample {
    /// Loop parameter in [0, 4].
    pub p: f64,
    pub value: Complex64,
    /// Argument unwrapped along the traversal.
    pub unwrapped_arg: f64,
}

/// Result of the adaptive winding of a closed-loop map.
#[derive(Clone, Debug)]
pub struct LoopWinding {
    pub winding: i64,
    pub samples: Vec<LoopSample>,
    pub total_turn: f64,
    pub min_abs: f64,
    pub max_abs: f64,
    pub max_arg_step: f64,
}

/// Boundary sample of rho with its rectangle coordinate.
#[derive(Clone, Debug)]
pub struct BoundarySample {
    pub z: Complex64,
    pub rho: Complex64,
    pub unwrapped_arg: f64,
}

/// Sampled trace of rho along the rectangle boundary with its winding.
#[derive(Clone, Debug)]
pub struct BoundaryTrace {
    pub samples: Vec<BoundarySample>,
    pub winding: i64,
    pub total_turn: f64,
    pub min_abs_rho: f64,
    pub max_abs_rho: f64,
    pub max_arg_step: f64,
}

/// A real-axis degeneracy instant.
#[derive(Clone, Debug)]
pub struct CrossingInstant {
    pub t0: f64,
    /// dim ker(R0 + R1 psi_{t0}(1)) from the singular-value count.
    pub multiplicity: usize,
    /// Final bracketing interval of the zero search.
    pub bracket: (f64, f64),
    /// False for even-order zeros found by the modulus-dip scan.
    pub sign_change: bool,
}

/// Maps the loop parameter p in [0,4] to the rectangle boundary point,
/// counterclockwise from the lower-left corner: edge 0 is the bottom,
/// 1 the right side, 2 the top (right to left), 3 the left side.
pub fn boundary_point(h: f64, p: f64) -> Complex64 {
    let p = p.rem_euclid(4.0);
    let e = (p.floor() as usize).min(3);
    let l = p - e as f64;
    match e {
        0 => Complex64::new(l, -h),
        1 => Complex64::new(1.0, -h + 2.0 * h * l),
        2 => Complex64::new(1.0 - l, h),
        _ => Complex64::new(0.0, h - 2.0 * h * l),
    }
}

/// The boundary matrix R_z = R0 + R1 psi_z(1).
pub fn boundary_matrix(
    vp: &ValidatedProblem,
    z: Complex64,
    config: &IntegratorConfig,
) -> Result<CMatrix, PropagatorError> {
    Ok(boundary_matrix_scaled(vp, z, config)?.0)
}

/// Boundary matrix together with the magnitude of its two summands
/// before cancellation.  Kernel thresholds must be taken relative to
/// this scale: at a full-multiplicity degeneracy the boundary matrix
/// itself is numerically zero and carries no usable scale of its own.
pub fn boundary_matrix_scaled(
    vp: &ValidatedProblem,
    z: Complex64,
    config: &IntegratorConfig,
) -> Result<(CMatrix, f64), PropagatorError> {
    let psi1 = monodromy(vp, z, config)?;
    let r0 = crate::linalg::to_complex(&vp.bc.r0);
    let r1 = crate::linalg::to_complex(&vp.bc.r1) * psi1;
    let scale = crate::linalg::max_abs_c(&r0) + crate::linalg::max_abs_c(&r1);
    Ok((r0 + r1, scale))
}

/// The determinant map rho(z) = det(R0 + R1 psi_z(1)), computed with a
/// fully pivoted LU factorization.
pub fn rho(
    vp: &ValidatedProblem,
    z: Complex64,
    config: &IntegratorConfig,
) -> Result<Complex64, PropagatorError> {
    Ok(boundary_matrix(vp, z, config)?.full_piv_lu().determinant())
}

/// Adaptive winding of a closed-loop map given by `eval` over the
/// parameter interval [0, 4].  Inserts parameter midpoints until every
/// principal argument increment has magnitude at most pi/2, then
/// accumulates the increments into the total turn.
pub fn adaptive_loop_winding(
    eval: &(dyn Fn(f64) -> Result<Complex64, PropagatorError> + Sync),
    wcfg: &WindingConfig,
) -> Result<LoopWinding, DegreeError> {
    let m0 = 4 * wcfg.samples_per_edge;
    let mut params: Vec<f64> = (0..=m0).map(|k| 4.0 * k as f64 / m0 as f64).collect();
    let mut values: Vec<Complex64> = params
        .par_iter()
        .map(|&p| eval(p))
        .collect::<Result<Vec<_>, _>>()?;
    // closing sample repeats the start so increments telescope exactly
    let last = values.len() - 1;
    values[last] = values[0];

    const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
    loop {
        let mut inserts = Vec::new();
        for i in 0..params.len() - 1 {
            let step = (values[i + 1] / values[i]).arg().abs();
            if step > HALF_PI {
                inserts.push(i);
            }
        }
        if inserts.is_empty() {
            break;
        }
        if params.len() + inserts.len() > wcfg.max_samples {
            return Err(DegreeError::RefinementBudgetExceeded {
                samples: params.len(),
            });
        }
        let new_params: Vec<f64> = inserts
            .iter()
            .map(|&i| 0.5 * (params[i] + params[i + 1]))
            .collect();
        let new_values: Vec<Complex64> = new_params
            .par_iter()
            .map(|&p| eval(p))
            .collect::<Result<Vec<_>, _>>()?;
        // merge, preserving parameter order
        let mut merged_p = Vec::with_capacity(params.len() + inserts.len());
        let mut merged_v = Vec::with_capacity(params.len() + inserts.len());
        let mut which = 0usize;
        for i in 0..params.len() {
            merged_p.push(params[i]);
            merged_v.push(values[i]);
            if which < inserts.len() && inserts[which] == i {
                merged_p.push(new_params[which]);
                merged_v.push(new_values[which]);
                which += 1;
            }
        }
        params = merged_p;
        values = merged_v;
    }

    let max_abs = values.iter().fold(0.0_f64, |a, v| a.max(v.norm()));
    let min_abs = values.iter().fold(f64::INFINITY, |a, v| a.min(v.norm()));
    let floor = wcfg.floor_rel * max_abs;
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| v.norm() <= floor)
    {
        return Err(DegreeError::BoundaryZero {
            p: params[i],
            abs: v.norm(),
            floor,
        });
    }

    let mut total = 0.0;
    let mut max_step = 0.0_f64;
    let mut samples = Vec::with_capacity(params.len());
    let mut arg_acc = values[0].arg();
    samples.push(LoopSample {
        p: params[0],
        value: values[0],
        unwrapped_arg: arg_acc,
    });
    for i in 0..params.len() - 1 {
        let step = (values[i + 1] / values[i]).arg();
        total += step;
        arg_acc += step;
        max_step = max_step.max(step.abs());
        samples.push(LoopSample {
            p: params[i + 1],
            value: values[i + 1],
            unwrapped_arg: arg_acc,
        });
    }
    let w = total / (2.0 * std::f64::consts::PI);
    let rounded = w.round();
    if (w - rounded).abs() > wcfg.integer_tol {
        return Err(DegreeError::WindingNotInteger {
            total,
            residual: (w - rounded).abs(),
        });
    }
    Ok(LoopWinding {
        winding: rounded as i64,
        samples,
        total_turn: total,
        min_abs,
        max_abs,
        max_arg_step: max_step,
    })
}

/// Degree index: the winding number of rho around the boundary of
/// Omega = [0,1] x [-h,h], traversed counterclockwise.
pub fn winding_number(
    vp: &ValidatedProblem,
    config: &IntegratorConfig,
    wcfg: &WindingConfig,
) -> Result<(i64, BoundaryTrace), DegreeError> {
    let h = vp.half_height;
    let mut cfg = *config;
    cfg.dense = false;
    let eval = move |p: f64| rho(vp, boundary_point(h, p), &cfg);

    // admissibility at the real endpoints of the family
    let rho0 = rho(vp, Complex64::new(0.0, 0.0), &cfg)?;
    let rho1 = rho(vp, Complex64::new(1.0, 0.0), &cfg)?;
    let endpoint_scale = rho0.norm().max(rho1.norm());

    let lw = adaptive_loop_winding(&eval, wcfg)?;
    let floor = wcfg.floor_rel * lw.max_abs.max(endpoint_scale);
    for (t, r) in [(0.0, rho0), (1.0, rho1)] {
        if r.norm() <= floor {
            return Err(DegreeError::NotAdmissible {
                t,
                abs: r.norm(),
                floor,
            });
        }
    }

    let samples = lw
        .samples
        .iter()
        .map(|s| BoundarySample {
            z: boundary_point(h, s.p),
            rho: s.value,
            unwrapped_arg: s.unwrapped_arg,
        })
        .collect();
    Ok((
        lw.winding,
        BoundaryTrace {
            samples,
            winding: lw.winding,
            total_turn: lw.total_turn,
            min_abs_rho: lw.min_abs,
            max_abs_rho: lw.max_abs,
            max_arg_step: lw.max_arg_step,
        },
    ))
}

/// A zero of a real function located by [`locate_real_zeros`].
#[derive(Clone, Debug)]
pub struct RealZero {
    pub t0: f64,
    pub bracket: (f64, f64),
    pub sign_change: bool,
}

/// Locates the zeros of a smooth real function on (a, b): sign changes are
/// bisected, and strict local minima of |f| are polished by golden-section
/// search and accepted when the minimized |f| falls below dip_rel times
/// the grid maximum of |f|.
pub fn locate_real_zeros(
    f: &(dyn Fn(f64) -> f64 + Sync),
    a: f64,
    b: f64,
    grid: usize,
    bracket_tol: f64,
    dip_rel: f64,
) -> Vec<RealZero> {
    let grid = grid.max(8);
    let ts: Vec<f64> = (1..grid)
        .map(|i| a + (b - a) * i as f64 / grid as f64)
        .collect();
    let vals: Vec<f64> = ts.par_iter().map(|&t| f(t)).collect();
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);

    let mut zeros: Vec<RealZero> = Vec::new();
    for i in 0..ts.len() - 1 {
        if vals[i] == 0.0 {
            zeros.push(RealZero {
                t0: ts[i],
                bracket: (ts[i], ts[i]),
                sign_change: true,
            });
        } else if vals[i] * vals[i + 1] < 0.0 {
            let (mut lo, mut hi) = (ts[i], ts[i + 1]);
            let mut flo = vals[i];
            while hi - lo > bracket_tol {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if flo * fm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            zeros.push(RealZero {
                t0: 0.5 * (lo + hi),
                bracket: (lo, hi),
                sign_change: true,
            });
        }
    }

    // modulus dips: strict interior local minima of |f|
    let cell = (b - a) / grid as f64;
    for i in 1..ts.len() - 1 {
        let (l, m, r) = (vals[i - 1].abs(), vals[i].abs(), vals[i + 1].abs());
        if m < l && m < r {
            if zeros.iter().any(|z| (z.t0 - ts[i]).abs() <= 1.5 * cell) {
                continue;
            }
            let (t0, fmin) = golden_min(&|t| f(t).abs(), ts[i - 1], ts[i + 1], bracket_tol);
            if fmin <= dip_rel * scale {
                zeros.push(RealZero {
                    t0,
                    bracket: (t0 - bracket_tol, t0 + bracket_tol),
                    sign_change: false,
                });
            }
        }
    }
    zeros.sort_by(|x, y| x.t0.total_cmp(&y.t0));
    zeros
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Singular-value threshold (relative to sigma_max) below which a
/// direction counts toward the kernel of R_{t0}.
pub const MULTIPLICITY_TOL: f64 = 1e-6;

/// Locates all degeneracy instants of the family on (0,1) and estimates
/// their multiplicities from the singular values of R_{t0}.  Also returns
/// any self-adjointness warnings (rho leaving the real axis).
pub fn conjugate_instants(
    vp: &ValidatedProblem,
    config: &IntegratorConfig,
    grid: usize,
    dip_rel: f64,
    bracket_tol: f64,
) -> Result<(Vec<CrossingInstant>, Vec<String>), DegreeError> {
    let mut cfg = *config;
    cfg.dense = false;
    use std::sync::Mutex;
    let max_im = Mutex::new(0.0_f64);
    let max_abs = Mutex::new(0.0_f64);
    let f = |t: f64| -> f64 {
        match rho(vp, Complex64::new(t, 0.0), &cfg) {
            Ok(r) => {
                let mut mi = max_im.lock().unwrap();
                *mi = mi.max(r.im.abs());
                drop(mi);
                let mut ma = max_abs.lock().unwrap();
                *ma = ma.max(r.norm());
                drop(ma);
                r.re
            }
            Err(_) => f64::NAN,
        }
    };
    let zeros = locate_real_zeros(&f, 0.0, 1.0, grid.max(256), bracket_tol, dip_rel);

    let mut warnings = Vec::new();
    let im_worst = *max_im.lock().unwrap();
    let abs_worst = *max_abs.lock().unwrap();
    if im_worst > 1e-8 * abs_worst.max(1e-300) {
        warnings.push(format!(
            "rho is not real on the real axis (max |Im rho| = {:.3e} vs scale {:.3e}); \
             the boundary condition pair may not be self-adjoint",
            im_worst, abs_worst
        ));
    }

    for w in zeros.windows(2) {
        if w[1].t0 - w[0].t0 < 1e-6 {
            return Err(DegreeError::ClusterUnresolved {
                t1: w[0].t0,
                t2: w[1].t0,
            });
        }
    }

    let mut instants = Vec::new();
    for z in zeros {
        let (r, pre) = boundary_matrix_scaled(vp, Complex64::new(z.t0, 0.0), &cfg)?;
        let sv = r.svd(false, false).singular_values;
        let smax = sv.iter().fold(0.0_f64, |m, &s| m.max(s)).max(pre);
        let mult = sv.iter().filter(|&&s| s < MULTIPLICITY_TOL * smax).count();
        instants.push(CrossingInstant {
            t0: z.t0,
            multiplicity: mult.max(1),
            bracket: z.bracket,
            sign_change: z.sign_change,
        });
    }
    Ok((instants, warnings))
}
