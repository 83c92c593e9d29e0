// Shared fixtures for the integration test binaries.  Each binary uses a
// different subset of these helpers, so unused ones are expected per target.
#![allow(dead_code)]

use morsesturm::linalg::RMatrix;
use morsesturm::problem::{
    validate, BoundaryCondition, CoefficientField, MorseSturmProblem, PerturbationFamily,
    ValidatedProblem,
};
use rand::Rng;
use std::path::PathBuf;

pub fn sample_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../samples")
        .join(name)
}

pub fn build(
    n: usize,
    g: CoefficientField,
    slope: CoefficientField,
    bc: BoundaryCondition,
) -> ValidatedProblem {
    build_h(n, g, slope, bc, 1.0)
}

pub fn build_h(
    n: usize,
    g: CoefficientField,
    slope: CoefficientField,
    bc: BoundaryCondition,
    half_height: f64,
) -> ValidatedProblem {
    validate(MorseSturmProblem {
        n,
        p: CoefficientField::constant(RMatrix::identity(n, n)),
        q: CoefficientField::zero(n),
        g,
        family: PerturbationFamily::linear(slope),
        bc,
        half_height,
    })
    .expect("constructed problem should validate")
}

/// Scalar problem -u'' + (g0 + slope * t) u with the given boundary
/// condition.
pub fn scalar(g0: f64, slope: f64, bc: BoundaryCondition) -> ValidatedProblem {
    build(
        1,
        CoefficientField::scalar_constant(g0),
        CoefficientField::scalar_constant(slope),
        bc,
    )
}

/// Decoupled diagonal system with per-component base levels and slopes.
pub fn diagonal(g0: &[f64], slopes: &[f64], bc: BoundaryCondition) -> ValidatedProblem {
    let n = g0.len();
    assert_eq!(n, slopes.len());
    build(
        n,
        CoefficientField::constant(RMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(
            g0,
        ))),
        CoefficientField::constant(RMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(
            slopes,
        ))),
        bc,
    )
}

fn random_symmetric<R: Rng>(rng: &mut R, n: usize, scale: f64) -> RMatrix {
    let mut m = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-scale..scale);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Random polynomial-coefficient problem with n in 1..=3 and one of the
/// three preset boundary conditions.  Coefficients are kept smooth and
/// the leading matrix strictly positive so that every draw validates.
pub fn random_polynomial_problem<R: Rng>(rng: &mut R) -> ValidatedProblem {
    let n = rng.gen_range(1..=3usize);
    let p = CoefficientField::Polynomial {
        coeffs: vec![
            RMatrix::identity(n, n) * rng.gen_range(0.6..1.8) + random_symmetric(rng, n, 0.05),
            random_symmetric(rng, n, 0.08),
        ],
    };
    let q = CoefficientField::Polynomial {
        coeffs: vec![RMatrix::zeros(n, n), {
            let mut m = RMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = rng.gen_range(-0.3..0.3);
                }
            }
            m
        }],
    };
    // keep the t = 0 member safely invertible by lifting the potential
    let g = CoefficientField::Polynomial {
        coeffs: vec![
            RMatrix::identity(n, n) * rng.gen_range(1.0..3.0) + random_symmetric(rng, n, 0.5),
            random_symmetric(rng, n, 1.0),
        ],
    };
    let slope = CoefficientField::Polynomial {
        coeffs: vec![
            RMatrix::identity(n, n) * rng.gen_range(-30.0..-5.0) + random_symmetric(rng, n, 2.0),
            random_symmetric(rng, n, 3.0),
        ],
    };
    let bc = match rng.gen_range(0..3) {
        0 => BoundaryCondition::dirichlet(n),
        1 => BoundaryCondition::neumann(n),
        _ => BoundaryCondition::periodic(n),
    };
    validate(MorseSturmProblem {
        n,
        p,
        q,
        g,
        family: PerturbationFamily::linear(slope),
        bc,
        half_height: 1.0,
    })
    .expect("random draw should validate")
}
