//! Numerical spectral theory of self-adjoint Morse-Sturm boundary value
//! problems.
//!
//! A Morse-Sturm system on the unit interval is the second-order equation
//!
//! ```text
//! -(P(x) u' + Q(x) u)' + Q(x)^T u' + (G(x) + C(t,x)) u = 0,   x in [0,1],
//! ```
//!
//! with symmetric P, G, a one-parameter symmetric perturbation C(t,.) and a
//! linear boundary condition R0 w(0) + R1 w(1) = 0 on the phase variable
//! w = (Pu'+Qu, u).  The crate computes, for the complexified family
//! z = t + is:
//!
//! * the degree index iota_PW: the winding number of the boundary
//!   determinant rho(z) = det(R0 + R1 psi_z(1)) around the rectangle
//!   Omega = [0,1] x [-h,h] ([`degree`]);
//! * the spectral flow iota_SP of the operator family, by crossing forms at
//!   the degeneracy instants and, independently, by eigenvalue counting of a
//!   finite-difference discretization ([`spectralflow`]);
//! * Maslov-index crossing forms, symplectic-group classification and the
//!   parity instability test for periodic problems ([`symplectic`]);
//! * Hill-determinant eigenvalue products, Fredholm determinant checks and
//!   the Green-kernel trace identity ([`hilltrace`]).
//!
//! The library layer is pure; the binary target wires it to problem files
//! and reports (see [`cli`]).

pub mod cli;
pub mod degree;
pub mod hilltrace;
pub mod linalg;
pub mod probfile;
pub mod problem;
pub mod propagator;
pub mod report;
pub mod spectralflow;
pub mod symplectic;
