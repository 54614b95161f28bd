//! Numerical laboratory for nonlinear waves in gas- and fluid-filled elastic
//! membrane tubes.
//!
//! The crate is organized around one physical pipeline:
//!
//! * [`material`] — Gent hyperelastic law: energies, closed-form derivatives,
//!   principal stresses, uniform equilibrium states and their roots.
//! * [`dispersion`] — linear wave analysis about a uniform state: the
//!   closed-form two-branch relation, correctness/stability verdicts, and a
//!   numeric symbol-matrix fallback for the bending and gas-filled models.
//! * [`boussinesq`] — the scalar long-wave test model with exact standing
//!   solitary wave and exact instability eigenfunction, used to validate the
//!   schemes and diagnostics before they touch the full tube equations.
//! * [`profile`] — travelling-wave ODE reduction generating standing
//!   solitary-wave and kink profiles used as initial data.
//! * [`membrane`] — the fixed-pressure tube equations: both difference
//!   schemes, the bending correction, perturbation and Riemann experiments,
//!   and the standing-kink search.
//! * [`fluid`] — the gas-filled tube model (membrane coupled to a
//!   low-compressible gas column).
//! * [`wavelab`] — shared diagnostics: pulse tracking, speed and growth-rate
//!   fits, split/blowup/self-similarity detectors.
//!
//! The constitutive layer is generic over the scalar type (`f32`/`f64` via
//! `num-traits`); the solvers and diagnostics work in `f64`. The aliases
//! below fix the concrete types used throughout the rest of the crate.

pub mod boussinesq;
pub mod dispersion;
pub mod fluid;
pub mod material;
pub mod membrane;
pub mod ode;
pub mod profile;
pub mod wavelab;

/// Scalar type used by the solver layer.
pub type Real = f64;
/// Complex scalar for frequencies that may leave the real axis.
pub type Cplx = num_complex::Complex<Real>;

/// Gent material constants at solver precision.
pub type MaterialParams = material::MaterialParams<Real>;
/// Tube reference geometry at solver precision.
pub type TubeGeometry = material::TubeGeometry<Real>;
/// Principal stretch pair at solver precision.
pub type StretchState = material::StretchState<Real>;
/// Principal Cauchy stresses at solver precision.
pub type PrincipalStresses = material::PrincipalStresses<Real>;
/// Uniform equilibrium state at solver precision.
pub type UniformState = material::UniformState<Real>;
