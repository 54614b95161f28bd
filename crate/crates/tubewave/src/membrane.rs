//! Fixed-pressure membrane tube dynamics: the hyperbolic system for
//! (z, r)(Z, t) with the Gent energy, two second-order schemes, an optional
//! bending regularization, perturbation/Riemann experiments, the standing
//! kink search, and eigenfunction extraction.
//!
//! Governing equations (reference coordinate Z, fixed pressure p★):
//!
//!   ρR z̈ = [R·Ŵ₁ z′/λ₁]′ − p★ (r²)′/2
//!   ρR r̈ = [R·Ŵ₁ r′/λ₁]′ − Ŵ₂ + p★ r z′ − c·r⁗        (c ≥ 0 bending)
//!
//! with λ₁ = √(z′² + r′²), λ₂ = r/R.

use crate::material::{
    self, first_derivatives, reduced_derivatives, MaterialError, MaterialParams, TubeGeometry,
    UniformState,
};
use crate::profile::WaveProfile;
use crate::wavelab::{
    detect_self_similar, detect_split, fit_growth_rate, fit_speed, track_level_crossing,
    DetectorConfig, DiagnosticsSeries, EventKind, RunEvent, Snapshot, WavelabError,
};

/// Errors raised by construction and experiment plumbing (time-step aborts
/// are the separate `StepAbort`, reported as events).
#[derive(Debug, Clone, PartialEq)]
pub enum MembraneError {
    Material(MaterialError),
    BadConfig(&'static str),
    /// The profile has not decayed to its end state at the grid boundary.
    ProfileTooWide { deviation: f64 },
    /// A Riemann end state fails the uniform equilibrium condition.
    NotEquilibrated { residual: f64 },
    /// Kink-speed bisection bracket has no sign change.
    NoSignChange { lo_speed: f64, hi_speed: f64 },
    /// A kink-search run died; the uniform state 2 is dynamically unstable.
    UnstableEndState { r02: f64 },
    Fit(WavelabError),
}

impl std::fmt::Display for MembraneError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MembraneError::Material(e) => write!(f, "{e}"),
            MembraneError::BadConfig(s) => write!(f, "{s}"),
            MembraneError::ProfileTooWide { deviation } => {
                write!(f, "profile not decayed at grid boundary (deviation {deviation:.3e})")
            }
            MembraneError::NotEquilibrated { residual } => {
                write!(f, "end state not equilibrated (residual {residual:.3e})")
            }
            MembraneError::NoSignChange { lo_speed, hi_speed } => {
                write!(f, "kink speeds {lo_speed:.3e} and {hi_speed:.3e} do not bracket zero")
            }
            MembraneError::UnstableEndState { r02 } => {
                write!(f, "uniform state 2 at r02 = {r02} is unstable; run aborted")
            }
            MembraneError::Fit(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MembraneError {}

impl From<MaterialError> for MembraneError {
    fn from(e: MaterialError) -> Self {
        MembraneError::Material(e)
    }
}

impl From<WavelabError> for MembraneError {
    fn from(e: WavelabError) -> Self {
        MembraneError::Fit(e)
    }
}

/// A time step aborted; the runner records these as events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepAbort {
    /// State magnitude crossed the overflow guard.
    Overflow { max_abs: f64 },
    /// The Gent invariant reached its locking bound at a node.
    GentViolation { node: usize },
    /// Radius became non-positive at a node.
    NegativeRadius { node: usize },
    /// Non-finite value produced at a node.
    NonFinite { node: usize },
}

impl std::fmt::Display for StepAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepAbort::Overflow { max_abs } => write!(f, "overflow: max state {max_abs:.3e}"),
            StepAbort::GentViolation { node } => write!(f, "Gent locking reached at node {node}"),
            StepAbort::NegativeRadius { node } => write!(f, "radius non-positive at node {node}"),
            StepAbort::NonFinite { node } => write!(f, "non-finite value at node {node}"),
        }
    }
}

/// Discrete state of the tube: positions and velocities on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeField {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub zdot: Vec<f64>,
    pub rdot: Vec<f64>,
    /// Left endpoint of the reference coordinate.
    pub z0: f64,
    /// Grid spacing.
    pub dz: f64,
}

impl TubeField {
    pub fn n(&self) -> usize {
        self.r.len()
    }

    /// Reference coordinate of node i.
    pub fn zeta(&self, i: usize) -> f64 {
        self.z0 + self.dz * i as f64
    }

    /// Uniform state on a grid: straight tube moving nowhere.
    pub fn uniform(state: &UniformState<f64>, z0: f64, dz: f64, n: usize) -> Self {
        let z = (0..n).map(|i| state.zprime0 * (z0 + dz * i as f64)).collect();
        Self {
            z,
            r: vec![state.r0; n],
            zdot: vec![0.0; n],
            rdot: vec![0.0; n],
            z0,
            dz,
        }
    }

    pub fn max_radius(&self) -> f64 {
        self.r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest velocity magnitude.
    pub fn max_speed(&self) -> f64 {
        self.zdot
            .iter()
            .chain(&self.rdot)
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Radius deviation from `r_ref` as a scalar snapshot for the shared
    /// detectors.
    pub fn deviation_snapshot(&self, t: f64, r_ref: f64) -> Snapshot {
        Snapshot {
            t,
            x0: self.z0,
            dx: self.dz,
            v: self.r.iter().map(|r| r - r_ref).collect(),
        }
    }

    /// Central-difference gradients (one-sided at the ends).
    pub fn gradients(v: &[f64], dz: f64) -> Vec<f64> {
        let n = v.len();
        let mut g = vec![0.0; n];
        g[0] = (v[1] - v[0]) / dz;
        for k in 1..n - 1 {
            g[k] = (v[k + 1] - v[k - 1]) / (2.0 * dz);
        }
        g[n - 1] = (v[n - 1] - v[n - 2]) / dz;
        g
    }
}

/// Per-node kinematic and stress diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeDiag {
    pub zprime: f64,
    pub rprime: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma1: f64,
}

/// Diagnostics along the field (σ₁ = λ₁Ŵ₁ is the longitudinal principal
/// stress whose sign controls short-wave correctness).
pub fn node_diagnostics(
    field: &TubeField,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<Vec<NodeDiag>, MembraneError> {
    let zp = TubeField::gradients(&field.z, field.dz);
    let rp = TubeField::gradients(&field.r, field.dz);
    let mut out = Vec::with_capacity(field.n());
    for k in 0..field.n() {
        let lambda1 = (zp[k] * zp[k] + rp[k] * rp[k]).sqrt();
        let lambda2 = field.r[k] / geom.radius;
        let (w1, _) = first_derivatives(lambda1, lambda2, mat)?;
        out.push(NodeDiag {
            zprime: zp[k],
            rprime: rp[k],
            lambda1,
            lambda2,
            sigma1: lambda1 * w1,
        });
    }
    Ok(out)
}

/// Optional bending regularization −c·∂⁴r/∂Z⁴ in the radial equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BendingOption {
    pub enabled: bool,
    pub c: f64,
}

impl BendingOption {
    pub fn off() -> Self {
        Self { enabled: false, c: 0.0 }
    }

    pub fn with_coefficient(c: f64) -> Result<Self, MembraneError> {
        if !(c > 0.0) {
            return Err(MembraneError::BadConfig("bending coefficient must be positive"));
        }
        Ok(Self { enabled: true, c })
    }

    /// Plate-theory scale (1/3)·μR times a small thickness-squared factor.
    pub fn default_for(mat: &MaterialParams<f64>, geom: &TubeGeometry<f64>) -> Self {
        Self { enabled: true, c: mat.mu * geom.radius / 3.0 * 1e-3 }
    }

    fn coefficient(&self) -> f64 {
        if self.enabled {
            self.c
        } else {
            0.0
        }
    }
}

/// Midpoint flux coefficient form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KForm {
    /// Average of R·Ŵ₁/λ₁ (consistent with the flux of the continuous
    /// equations).
    PdeConsistent,
    /// Average of Ŵ₁·λ₁, reproducing the historically displayed stencil
    /// (differs from the flux unless the solution is smooth and R = 1).
    DisplayedAverage,
}

/// Everything a single step needs beyond the material and geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    pub k_form: KForm,
    pub bending: BendingOption,
    /// Abort once any |velocity| or radius magnitude passes this.
    pub guard: f64,
}

/// Accelerations (z̈, r̈) for the current configuration; zero at the two
/// frozen boundary nodes.
fn accelerations(
    z: &[f64],
    r: &[f64],
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    k_form: KForm,
    bending: &BendingOption,
) -> Result<(Vec<f64>, Vec<f64>), StepAbort> {
    let n = z.len();
    let dz = {
        // spacing is implicit in the caller's grid; passed via closure below
        f64::NAN
    };
    let _ = dz;
    unreachable!()
}

/// Internal: acceleration evaluation shared by both schemes.
struct Engine<'a> {
    mat: &'a MaterialParams<f64>,
    geom: &'a TubeGeometry<f64>,
    p_star: f64,
    dz: f64,
    k_form: KForm,
    c_bend: f64,
}

impl<'a> Engine<'a> {
    fn new(
        mat: &'a MaterialParams<f64>,
        geom: &'a TubeGeometry<f64>,
        dz: f64,
        k_form: KForm,
        bending: &BendingOption,
    ) -> Self {
        Self { mat, geom, p_star: geom.p_star, dz, k_form, c_bend: bending.coefficient() }
    }

    /// z̈ and r̈ on the interior (boundary entries zero).
    fn accel(&self, z: &[f64], r: &[f64]) -> Result<(Vec<f64>, Vec<f64>), StepAbort> {
        let n = z.len();
        let dz = self.dz;
        let rr = self.geom.radius;
        let rho_r = self.geom.rho * rr;
        let zp = TubeField::gradients(z, dz);
        let rp = TubeField::gradients(r, dz);

        // Node coefficients: flux base K and the Ŵ₂ source.
        let mut kbase = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        for k in 0..n {
            if !(r[k] > 0.0) {
                return Err(if r[k].is_finite() {
                    StepAbort::NegativeRadius { node: k }
                } else {
                    StepAbort::NonFinite { node: k }
                });
            }
            let l1 = (zp[k] * zp[k] + rp[k] * rp[k]).sqrt();
            let l2 = r[k] / rr;
            if !l1.is_finite() || l1 <= 0.0 {
                return Err(StepAbort::NonFinite { node: k });
            }
            let (w1k, w2k) = first_derivatives(l1, l2, self.mat).map_err(|e| match e {
                MaterialError::Locking => StepAbort::GentViolation { node: k },
                _ => StepAbort::NonFinite { node: k },
            })?;
            kbase[k] = match self.k_form {
                KForm::PdeConsistent => rr * w1k / l1,
                KForm::DisplayedAverage => w1k * l1,
            };
            w2[k] = w2k;
        }

        let mut az = vec![0.0; n];
        let mut ar = vec![0.0; n];
        let inv_dz2 = 1.0 / (dz * dz);
        for k in 1..n - 1 {
            let kp = 0.5 * (kbase[k + 1] + kbase[k]);
            let km = 0.5 * (kbase[k] + kbase[k - 1]);
            let flux_z = (kp * (z[k + 1] - z[k]) - km * (z[k] - z[k - 1])) * inv_dz2;
            let flux_r = (kp * (r[k + 1] - r[k]) - km * (r[k] - r[k - 1])) * inv_dz2;
            let sq_diff = (r[k + 1] * r[k + 1] - r[k - 1] * r[k - 1]) / (4.0 * dz);
            let zp_c = (z[k + 1] - z[k - 1]) / (2.0 * dz);
            az[k] = (flux_z - self.p_star * sq_diff) / rho_r;
            ar[k] = (flux_r - w2[k] + self.p_star * r[k] * zp_c) / rho_r;
        }
        if self.c_bend > 0.0 && n >= 5 {
            let inv_dz4 = inv_dz2 * inv_dz2;
            let scale = self.c_bend * inv_dz4 / rho_r;
            for k in 1..n - 1 {
                // Centered 5-point fourth difference; the stencil shifts
                // one-sided at the first/last interior node (one ghost).
                let c = k.clamp(2, n - 3);
                let d4 = r[c + 2] + r[c - 2] - 4.0 * (r[c + 1] + r[c - 1]) + 6.0 * r[c];
                ar[k] -= scale * d4;
            }
        }
        Ok((az, ar))
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TubeScheme {
    ThreeLayer,
    LaxWendroff,
}

fn guard_check(f: &TubeField, guard: f64) -> Result<(), StepAbort> {
    for k in 0..f.n() {
        let m = f.r[k].abs().max(f.zdot[k].abs()).max(f.rdot[k].abs());
        if !(m <= guard) {
            return Err(if m.is_finite() {
                StepAbort::Overflow { max_abs: m }
            } else {
                StepAbort::NonFinite { node: k }
            });
        }
    }
    Ok(())
}

/// One leapfrog step (levels n−1, n → n+1): the flux-difference stencil
/// with midpoint K, centered (r²)′ and z′ terms, and leapfrog updates.
pub fn step_three_layer(
    field: &TubeField,
    previous: &TubeField,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    ctrl: &StepControl,
) -> Result<TubeField, StepAbort> {
    let eng = Engine::new(mat, geom, field.dz, ctrl.k_form, &ctrl.bending);
    let (az, ar) = eng.accel(&field.z, &field.r)?;
    let n = field.n();
    let two_dt = 2.0 * ctrl.dt;
    let mut next = field.clone();
    for k in 1..n - 1 {
        next.zdot[k] = previous.zdot[k] + two_dt * az[k];
        next.rdot[k] = previous.rdot[k] + two_dt * ar[k];
        next.z[k] = previous.z[k] + two_dt * field.zdot[k];
        next.r[k] = previous.r[k] + two_dt * field.rdot[k];
    }
    guard_check(&next, ctrl.guard)?;
    Ok(next)
}

/// One two-stage step: half-step predictor, then a full step with all
/// coefficients re-evaluated at the half level.
pub fn step_lax_wendroff(
    field: &TubeField,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    ctrl: &StepControl,
) -> Result<TubeField, StepAbort> {
    let eng = Engine::new(mat, geom, field.dz, ctrl.k_form, &ctrl.bending);
    let n = field.n();
    let half = 0.5 * ctrl.dt;

    let (az, ar) = eng.accel(&field.z, &field.r)?;
    let mut zh = field.z.clone();
    let mut rh = field.r.clone();
    let mut zdh = field.zdot.clone();
    let mut rdh = field.rdot.clone();
    for k in 1..n - 1 {
        zh[k] = field.z[k] + half * field.zdot[k];
        rh[k] = field.r[k] + half * field.rdot[k];
        zdh[k] = field.zdot[k] + half * az[k];
        rdh[k] = field.rdot[k] + half * ar[k];
    }

    let (az, ar) = eng.accel(&zh, &rh)?;
    let mut next = field.clone();
    for k in 1..n - 1 {
        next.z[k] = field.z[k] + ctrl.dt * zdh[k];
        next.r[k] = field.r[k] + ctrl.dt * rdh[k];
        next.zdot[k] = field.zdot[k] + ctrl.dt * az[k];
        next.rdot[k] = field.rdot[k] + ctrl.dt * ar[k];
    }
    guard_check(&next, ctrl.guard)?;
    Ok(next)
}

/// Largest stable time step for the field: the hyperbolic bound
/// fraction·ΔZ/max(U_l, U_τ) over all nodes and, with bending on, the
/// stiffer 0.3·ΔZ²·√(ρR/c).
pub fn stable_dt(
    field: &TubeField,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    bending: &BendingOption,
    fraction: f64,
) -> Result<f64, MembraneError> {
    let diags = node_diagnostics(field, mat, geom)?;
    let rho_r = geom.rho * geom.radius;
    let mut c2_max: f64 = 0.0;
    for d in &diags {
        let dd = reduced_derivatives(d.lambda1, d.lambda2, mat)?;
        let ul2 = dd.w11 / rho_r * geom.radius;
        let ut2 = d.sigma1.abs() / (geom.rho * d.lambda1 * d.lambda1);
        c2_max = c2_max.max(ul2.abs()).max(ut2);
    }
    if c2_max <= 0.0 {
        return Err(MembraneError::BadConfig("no positive wave speed on the field"));
    }
    let mut dt = fraction * field.dz / c2_max.sqrt();
    if bending.enabled && bending.c > 0.0 {
        dt = dt.min(0.3 * field.dz * field.dz * (rho_r / bending.c).sqrt());
    }
    Ok(dt)
}

/// Samples a computed wave profile onto a PDE grid, velocities zero.
pub fn make_initial_solitary(
    profile: &WaveProfile,
    z0: f64,
    dz: f64,
    n: usize,
) -> Result<TubeField, MembraneError> {
    if n < 5 || !(dz > 0.0) {
        return Err(MembraneError::BadConfig("grid needs n >= 5 and dz > 0"));
    }
    let state = profile.end_state;
    // The grid must cover the profile's decayed support.
    let left_dev = {
        let (r, _, _, _) = profile.sample(z0);
        (r - state.r0).abs()
    };
    let right_dev = {
        let (r, _, _, _) = profile.sample(z0 + dz * (n - 1) as f64);
        (r - state.r0).abs()
    };
    let deviation = left_dev.max(right_dev).max(profile.decay_tol);
    if deviation > 1e-8 * (1.0 + state.r0) {
        return Err(MembraneError::ProfileTooWide { deviation });
    }
    let mut z = vec![0.0; n];
    let mut r = vec![0.0; n];
    for k in 0..n {
        let (rv, _, _, zv) = profile.sample(z0 + dz * k as f64);
        r[k] = rv;
        z[k] = zv;
    }
    Ok(TubeField { z, r, zdot: vec![0.0; n], rdot: vec![0.0; n], z0, dz })
}

/// The perturbed initial data: base solitary state plus ε times the
/// deviation of a later snapshot (velocities ε-scaled as well); amplitude
/// grows for ε < 0.
pub fn make_perturbed(
    solitary: &TubeField,
    snapshot: &TubeField,
    epsilon: f64,
) -> Result<TubeField, MembraneError> {
    if solitary.n() != snapshot.n() || solitary.dz != snapshot.dz {
        return Err(MembraneError::BadConfig("perturbation grids differ"));
    }
    let n = solitary.n();
    let mut out = solitary.clone();
    for k in 0..n {
        out.z[k] = solitary.z[k] + epsilon * (snapshot.z[k] - solitary.z[k]);
        out.r[k] = solitary.r[k] + epsilon * (snapshot.r[k] - solitary.r[k]);
        out.zdot[k] = epsilon * snapshot.zdot[k];
        out.rdot[k] = epsilon * snapshot.rdot[k];
    }
    Ok(out)
}

/// Two equilibrated end states joined by a smoothed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSetup {
    pub r01: f64,
    pub r02: f64,
    pub z01p: f64,
    pub z02p: f64,
    /// Step center in the reference coordinate.
    pub zc: f64,
    /// Smoothing width of the tanh step.
    pub l: f64,
    pub p_star: f64,
}

impl RiemannSetup {
    /// Builds the setup from the left state and the right radius: the
    /// pressure comes from the left equilibrium, the right stretch is the
    /// smaller admissible equilibrium root at that pressure.
    pub fn new(
        r01: f64,
        z01p: f64,
        r02: f64,
        zc: f64,
        l: f64,
        mat: &MaterialParams<f64>,
        geom: &TubeGeometry<f64>,
    ) -> Result<Self, MembraneError> {
        if !(l > 0.0) {
            return Err(MembraneError::BadConfig("smoothing width must be positive"));
        }
        let p_star = material::equilibrium_pressure(r01, z01p, mat, geom)?;
        let geom_p = TubeGeometry::new(geom.radius, geom.rho, geom.thickness, p_star)?;
        let roots = material::solve_equilibrium_zprime(
            r02,
            p_star,
            mat,
            &geom_p,
            material::RootBranch::Smaller,
        )?;
        let z02p = roots[0];
        Ok(Self { r01, r02, z01p, z02p, zc, l, p_star })
    }

    fn residual(
        state: &UniformState<f64>,
        mat: &MaterialParams<f64>,
        geom: &TubeGeometry<f64>,
    ) -> Result<f64, MembraneError> {
        Ok(state.equilibrium_residual(mat, geom)?.abs())
    }
}

/// Samples the tanh-smoothed Riemann data onto a grid: both end states are
/// checked against the shared equilibrium pressure, z comes from the exact
/// integral of the z′ profile.
pub fn make_riemann(
    setup: &RiemannSetup,
    z0: f64,
    dz: f64,
    n: usize,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<TubeField, MembraneError> {
    if n < 5 || !(dz > 0.0) {
        return Err(MembraneError::BadConfig("grid needs n >= 5 and dz > 0"));
    }
    let geom_p = TubeGeometry::new(geom.radius, geom.rho, geom.thickness, setup.p_star)?;
    for (r0, zp0) in [(setup.r01, setup.z01p), (setup.r02, setup.z02p)] {
        let res = RiemannSetup::residual(
            &UniformState::new(r0, zp0, setup.p_star),
            mat,
            &geom_p,
        )?;
        if res > 1e-8 {
            return Err(MembraneError::NotEquilibrated { residual: res });
        }
    }
    let mean_r = 0.5 * (setup.r01 + setup.r02);
    let half_jump_r = 0.5 * (setup.r02 - setup.r01);
    let mean_zp = 0.5 * (setup.z01p + setup.z02p);
    let half_jump_zp = 0.5 * (setup.z02p - setup.z01p);
    // ln cosh with a large-argument guard.
    let lncosh = |x: f64| x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2;
    let mut z = vec![0.0; n];
    let mut r = vec![0.0; n];
    let base = lncosh((z0 - setup.zc) / setup.l);
    for k in 0..n {
        let zeta = z0 + dz * k as f64;
        let s = (zeta - setup.zc) / setup.l;
        r[k] = mean_r + half_jump_r * s.tanh();
        z[k] = mean_zp * (zeta - z0) + half_jump_zp * setup.l * (lncosh(s) - base);
    }
    Ok(TubeField { z, r, zdot: vec![0.0; n], rdot: vec![0.0; n], z0, dz })
}

/// What kind of end state a run reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Split,
    Blowup,
    SaturatedSelfSimilar,
    ShockFan,
    Inconclusive,
}

impl std::fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OutcomeKind::Split => "split",
            OutcomeKind::Blowup => "blowup",
            OutcomeKind::SaturatedSelfSimilar => "saturated_self_similar",
            OutcomeKind::ShockFan => "shock_fan",
            OutcomeKind::Inconclusive => "inconclusive",
        };
        write!(f, "{s}")
    }
}

/// Classified result of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRecord {
    pub kind: OutcomeKind,
    /// Fitted speeds of detected pulses (left, right for a split).
    pub pulse_speeds: Vec<f64>,
    pub kink_speed: Option<f64>,
    /// Time of the detection that fixed `kind`, if any.
    pub t_detect: Option<f64>,
    /// Self-similar collapse error when that detector ran.
    pub collapse_error: Option<f64>,
    pub events: Vec<RunEvent>,
}

/// A stored snapshot with its time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedField {
    pub t: f64,
    pub field: TubeField,
}

/// Full experiment record.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub outcome: OutcomeRecord,
    pub diagnostics: DiagnosticsSeries,
    pub snapshots: Vec<TimedField>,
    /// Time step actually used.
    pub dt: f64,
}

/// What the classifier should look for.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentMode {
    /// Localized pulse: blowup / self-similar saturation / split.
    Pulse,
    /// Step data: shock fan with a tracked kink.
    Riemann(RiemannSetup),
}

/// Run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: TubeScheme,
    pub k_form: KForm,
    pub bending: BendingOption,
    /// Time step; None picks the stability bound with `cfl_fraction`.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Snapshot interval; None stores ~200 frames.
    pub save_dt: Option<f64>,
    pub guard: f64,
    pub cfl_fraction: f64,
    pub detectors: DetectorConfig,
    /// Relative grid-scale oscillation amplitude in σ₁ < 0 zones that
    /// raises the non-correctness event.
    pub sawtooth_threshold: f64,
    pub mode: ExperimentMode,
}

impl RunConfig {
    pub fn pulse(t_end: f64) -> Self {
        Self {
            scheme: TubeScheme::LaxWendroff,
            k_form: KForm::PdeConsistent,
            bending: BendingOption::off(),
            dt: None,
            t_end,
            save_dt: None,
            guard: 50.0,
            cfl_fraction: 0.4,
            detectors: DetectorConfig::default(),
            sawtooth_threshold: 0.02,
            mode: ExperimentMode::Pulse,
        }
    }

    pub fn riemann(setup: RiemannSetup, t_end: f64) -> Self {
        Self { mode: ExperimentMode::Riemann(setup), ..Self::pulse(t_end) }
    }
}

/// Time-steps the initial data, records snapshots and events, and runs the
/// detectors appropriate to the mode.
pub fn run_experiment(
    initial: &TubeField,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    cfg: &RunConfig,
) -> Result<ExperimentRecord, MembraneError> {
    if !(cfg.t_end > 0.0) {
        return Err(MembraneError::BadConfig("horizon must be positive"));
    }
    let dt = match cfg.dt {
        Some(v) if v > 0.0 => v,
        Some(_) => return Err(MembraneError::BadConfig("dt must be positive")),
        None => stable_dt(initial, mat, geom, &cfg.bending, cfg.cfl_fraction)?,
    };
    let ctrl = StepControl { dt, k_form: cfg.k_form, bending: cfg.bending, guard: cfg.guard };
    let save_dt = cfg.save_dt.unwrap_or(cfg.t_end / 200.0).max(dt);
    // Far-field reference radius from the boundary node (frozen).
    let r_inf = initial.r[0];
    let amp0 = initial.max_radius() - r_inf;
    let center0 = {
        let mut best = 0;
        for (i, v) in initial.r.iter().enumerate() {
            if *v > initial.r[best] {
                best = i;
            }
        }
        initial.zeta(best)
    };

    let mut diagnostics = DiagnosticsSeries::default();
    let mut snapshots: Vec<TimedField> = Vec::new();
    let mut scalar_snaps: Vec<Snapshot> = Vec::new();
    let mut sawtooth_fired = false;
    let mut abort: Option<(f64, StepAbort)> = None;

    let mut record = |t: f64,
                      f: &TubeField,
                      diagnostics: &mut DiagnosticsSeries,
                      snapshots: &mut Vec<TimedField>,
                      scalar_snaps: &mut Vec<Snapshot>,
                      sawtooth_fired: &mut bool|
     -> Result<(), MembraneError> {
        diagnostics.push(t, f.max_radius() - r_inf);
        snapshots.push(TimedField { t, field: f.clone() });
        scalar_snaps.push(f.deviation_snapshot(t, r_inf));
        // Grid-scale sawtooth monitor in σ₁ < 0 zones.
        if !*sawtooth_fired {
            let diags = node_diagnostics(f, mat, geom)?;
            let range = {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for v in &f.r {
                    lo = lo.min(*v);
                    hi = hi.max(*v);
                }
                (hi - lo).max(1e-12)
            };
            let mut worst = 0.0_f64;
            for k in 1..f.n() - 1 {
                if diags[k].sigma1 < 0.0 {
                    let osc = (f.r[k + 1] - 2.0 * f.r[k] + f.r[k - 1]).abs() / 4.0;
                    worst = worst.max(osc / range);
                }
            }
            if worst > cfg.sawtooth_threshold {
                diagnostics.event(
                    t,
                    EventKind::Sawtooth,
                    format!("grid-scale oscillation {worst:.3e} in sigma1<0 zone"),
                );
                *sawtooth_fired = true;
            }
        }
        Ok(())
    };

    let mut prev = initial.clone();
    record(0.0, &prev, &mut diagnostics, &mut snapshots, &mut scalar_snaps, &mut sawtooth_fired)?;
    let mut t = 0.0;
    let mut next_save = save_dt;

    // Three-level bootstrap: one two-stage step.
    let mut cur = match cfg.scheme {
        TubeScheme::ThreeLayer => match step_lax_wendroff(&prev, mat, geom, &ctrl) {
            Ok(f) => {
                t = dt;
                f
            }
            Err(e) => {
                abort = Some((dt, e));
                prev.clone()
            }
        },
        TubeScheme::LaxWendroff => prev.clone(),
    };

    while abort.is_none() && t < cfg.t_end - 0.5 * dt {
        let stepped = match cfg.scheme {
            TubeScheme::ThreeLayer => step_three_layer(&cur, &prev, mat, geom, &ctrl),
            TubeScheme::LaxWendroff => step_lax_wendroff(&cur, mat, geom, &ctrl),
        };
        t += dt;
        match stepped {
            Ok(f) => {
                if cfg.scheme == TubeScheme::ThreeLayer {
                    prev = std::mem::replace(&mut cur, f);
                } else {
                    cur = f;
                }
            }
            Err(e) => {
                abort = Some((t, e));
                break;
            }
        }
        if t + 1e-12 >= next_save {
            record(
                t,
                &cur,
                &mut diagnostics,
                &mut snapshots,
                &mut scalar_snaps,
                &mut sawtooth_fired,
            )?;
            next_save += save_dt;
        }
    }

    // Classification.
    let mut kind = OutcomeKind::Inconclusive;
    let mut pulse_speeds = Vec::new();
    let mut kink_speed = None;
    let mut t_detect = None;
    let mut collapse_error = None;

    if let Some((t_abort, e)) = abort {
        let ev_kind = match e {
            StepAbort::Overflow { .. } => EventKind::Blowup,
            StepAbort::GentViolation { .. } => EventKind::Locking,
            _ => EventKind::NonCorrect,
        };
        diagnostics.event(t_abort, ev_kind, format!("{e}"));
        // Aborts of a growing pulse are the blowup phenomenology; anything
        // else is a correctness loss left inconclusive.
        let grew = diagnostics
            .max_amp
            .last()
            .map(|a| *a > 1.05 * amp0.max(1e-12))
            .unwrap_or(false);
        kind = if grew { OutcomeKind::Blowup } else { OutcomeKind::Inconclusive };
        t_detect = Some(t_abort);
    } else if let Some(tb) =
        crate::wavelab::detect_blowup(&diagnostics.t, &diagnostics.max_amp, cfg.guard)
    {
        diagnostics.event(tb, EventKind::Blowup, String::new());
        kind = OutcomeKind::Blowup;
        t_detect = Some(tb);
    } else {
        match &cfg.mode {
            ExperimentMode::Riemann(setup) => {
                kind = OutcomeKind::ShockFan;
                let mid = 0.5 * (setup.r01 + setup.r02) - r_inf;
                let track = track_level_crossing(&scalar_snaps, mid, setup.zc);
                let (t0, t1) = (0.5 * cfg.t_end, cfg.t_end);
                if let Ok(fit) = fit_speed(&track, (t0, t1)) {
                    kink_speed = Some(fit.speed);
                }
            }
            ExperimentMode::Pulse => {
                // Growth that saturates into a self-similar envelope takes
                // precedence (a split detector also sees its two fronts).
                let grew = diagnostics
                    .max_amp
                    .iter()
                    .any(|a| *a > 2.0 * amp0.max(1e-12));
                let det = DetectorConfig {
                    split_min_amp: cfg.detectors.split_min_amp * amp0.max(1e-12),
                    ..cfg.detectors
                };
                let ss = if grew {
                    detect_self_similar(&scalar_snaps, center0, 0.0, &det)
                } else {
                    None
                };
                if let Some(report) = ss {
                    collapse_error = Some(report.collapse_error);
                    if report.verdict {
                        kind = OutcomeKind::SaturatedSelfSimilar;
                        t_detect = scalar_snaps.last().map(|s| s.t);
                        diagnostics.event(
                            t_detect.unwrap_or(cfg.t_end),
                            EventKind::SelfSimilar,
                            format!("collapse error {:.3e}", report.collapse_error),
                        );
                    }
                }
                if kind == OutcomeKind::Inconclusive {
                    if let Some(split) = detect_split(&scalar_snaps, &det) {
                        kind = OutcomeKind::Split;
                        pulse_speeds = vec![split.left_speed.speed, split.right_speed.speed];
                        t_detect = Some(split.t);
                        diagnostics.event(
                            split.t,
                            EventKind::Split,
                            format!("separation {:.2}", split.separation),
                        );
                    }
                }
            }
        }
    }

    Ok(ExperimentRecord {
        outcome: OutcomeRecord {
            kind,
            pulse_speeds,
            kink_speed,
            t_detect,
            collapse_error,
            events: diagnostics.events.clone(),
        },
        diagnostics,
        snapshots,
        dt,
    })
}

/// Configuration of the standing-kink bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct KinkSearchConfig {
    pub grid_n: usize,
    pub half_width: f64,
    pub t_end: f64,
    pub l_smooth: f64,
    /// Acceptance: |kink speed| below this fraction of the left state's
    /// longitudinal speed.
    pub speed_tol_fraction: f64,
    pub max_iter: usize,
}

impl Default for KinkSearchConfig {
    fn default() -> Self {
        Self {
            grid_n: 1201,
            half_width: 60.0,
            t_end: 40.0,
            l_smooth: 2.0,
            speed_tol_fraction: 1e-2,
            max_iter: 40,
        }
    }
}

/// Result of the standing-kink search.
#[derive(Debug, Clone, PartialEq)]
pub struct KinkSearch {
    pub r02_star: f64,
    pub speed: f64,
    /// (r02, speed) samples examined, in evaluation order.
    pub samples: Vec<(f64, f64)>,
    /// The final (standing) run.
    pub record: ExperimentRecord,
}

/// Bisection on the right radius until the Riemann kink stands still.
pub fn find_standing_kink(
    r01: f64,
    z01p: f64,
    bracket: (f64, f64),
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    cfg: &KinkSearchConfig,
) -> Result<KinkSearch, MembraneError> {
    let dz = 2.0 * cfg.half_width / (cfg.grid_n - 1) as f64;
    let mut samples = Vec::new();
    let mut eval = |r02: f64| -> Result<(f64, ExperimentRecord), MembraneError> {
        let setup = RiemannSetup::new(r01, z01p, r02, 0.0, cfg.l_smooth, mat, geom)?;
        let geom_p = TubeGeometry::new(geom.radius, geom.rho, geom.thickness, setup.p_star)
            .map_err(MembraneError::Material)?;
        let field = make_riemann(&setup, -cfg.half_width, dz, cfg.grid_n, mat, geom)?;
        let run = run_experiment(&field, mat, &geom_p, &RunConfig::riemann(setup, cfg.t_end))?;
        if run.outcome.kind != OutcomeKind::ShockFan {
            return Err(MembraneError::UnstableEndState { r02 });
        }
        let speed = run
            .outcome
            .kink_speed
            .ok_or(MembraneError::Fit(WavelabError::InsufficientSamples))?;
        Ok((speed, run))
    };

    let (mut lo, mut hi) = bracket;
    let (mut s_lo, run_lo) = eval(lo)?;
    samples.push((lo, s_lo));
    let (s_hi, run_hi) = eval(hi)?;
    samples.push((hi, s_hi));
    if s_lo.signum() == s_hi.signum() {
        return Err(MembraneError::NoSignChange { lo_speed: s_lo, hi_speed: s_hi });
    }
    // Speed tolerance relative to the left state's longitudinal speed.
    let dd = reduced_derivatives(z01p, r01 / geom.radius, mat)?;
    let ul = (dd.w11 / geom.rho).sqrt();
    let tol = cfg.speed_tol_fraction * ul;

    let mut best = if s_lo.abs() < s_hi.abs() {
        (lo, s_lo, run_lo)
    } else {
        (hi, s_hi, run_hi)
    };
    for _ in 0..cfg.max_iter {
        if best.1.abs() < tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (s_mid, run_mid) = eval(mid)?;
        samples.push((mid, s_mid));
        if s_mid.abs() < best.1.abs() {
            best = (mid, s_mid, run_mid);
        }
        if s_mid.signum() == s_lo.signum() {
            lo = mid;
            s_lo = s_mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    if best.1.abs() >= tol {
        return Err(MembraneError::NoSignChange { lo_speed: s_lo, hi_speed: best.1 });
    }
    Ok(KinkSearch { r02_star: best.0, speed: best.1, samples, record: best.2 })
}

/// How the dominant mode is extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Deviation of the full nonlinear run from the stored solitary data.
    NonlinearDifference,
    /// Evolution of the equations linearized about the frozen profile.
    Linearized,
}

/// Extracted dominant deviation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeMode {
    /// Mode components stored as a field: (z, r) carry (δz, δr), the
    /// velocity slots carry (δż, δṙ); normalized to max|δr| = 1 with a
    /// positive crest.
    pub profile: TubeField,
    pub rate: f64,
    pub rate_stderr: f64,
    pub oscillation_only: bool,
}

/// Extracts the dominant unstable mode of a standing solitary wave.
pub fn extract_eigenfunction(
    solitary: &TubeField,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    cfg: &RunConfig,
    method: EigenMethod,
) -> Result<TubeMode, MembraneError> {
    match method {
        EigenMethod::NonlinearDifference => eigen_nonlinear(solitary, mat, geom, cfg),
        EigenMethod::Linearized => eigen_linearized(solitary, mat, geom, cfg),
    }
}

fn normalize_mode(
    mut dzv: Vec<f64>,
    mut drv: Vec<f64>,
    mut dzd: Vec<f64>,
    mut drd: Vec<f64>,
    template: &TubeField,
) -> TubeField {
    let norm = drv.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    // Positive radial deviation at the crest of |δr|.
    let mut peak = 0;
    for (i, v) in drv.iter().enumerate() {
        if v.abs() > drv[peak].abs() {
            peak = i;
        }
    }
    let sign = if drv[peak] < 0.0 { -1.0 } else { 1.0 };
    let s = sign / norm;
    for v in dzv.iter_mut().chain(&mut drv).chain(&mut dzd).chain(&mut drd) {
        *v *= s;
    }
    TubeField { z: dzv, r: drv, zdot: dzd, rdot: drd, z0: template.z0, dz: template.dz }
}

fn eigen_nonlinear(
    solitary: &TubeField,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    cfg: &RunConfig,
) -> Result<TubeMode, MembraneError> {
    let r_inf = solitary.r[0];
    let amp0 = (solitary.max_radius() - r_inf).max(1e-12);
    let window = (
        cfg.detectors.rate_window.0 * amp0,
        cfg.detectors.rate_window.1 * amp0,
    );
    let dt = match cfg.dt {
        Some(v) => v,
        None => stable_dt(solitary, mat, geom, &cfg.bending, cfg.cfl_fraction)?,
    };
    let ctrl = StepControl { dt, k_form: cfg.k_form, bending: cfg.bending, guard: cfg.guard };
    let save_dt = cfg.save_dt.unwrap_or(0.25).max(dt);

    let mut prev = solitary.clone();
    let mut cur = step_lax_wendroff(&prev, mat, geom, &ctrl)
        .map_err(|_| MembraneError::Fit(WavelabError::WindowNotFound))?;
    let mut t = dt;
    let mut next_save = save_dt;
    let mut ts = Vec::new();
    let mut devs = Vec::new();
    let mut captured: Option<TubeField> = None;
    while t < cfg.t_end {
        match cfg.scheme {
            TubeScheme::ThreeLayer => match step_three_layer(&cur, &prev, mat, geom, &ctrl) {
                Ok(f) => prev = std::mem::replace(&mut cur, f),
                Err(_) => break,
            },
            TubeScheme::LaxWendroff => match step_lax_wendroff(&cur, mat, geom, &ctrl) {
                Ok(f) => cur = f,
                Err(_) => break,
            },
        }
        t += dt;
        if t + 1e-12 >= next_save {
            next_save += save_dt;
            let dev = cur
                .r
                .iter()
                .zip(&solitary.r)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            ts.push(t);
            devs.push(dev);
            if dev >= window.1 && captured.is_none() {
                captured = Some(cur.clone());
                break;
            }
        }
    }
    let snap = captured.ok_or(MembraneError::Fit(WavelabError::WindowNotFound))?;
    let rate = fit_growth_rate(&ts, &devs, window)?;
    let dzv: Vec<f64> = snap.z.iter().zip(&solitary.z).map(|(a, b)| a - b).collect();
    let drv: Vec<f64> = snap.r.iter().zip(&solitary.r).map(|(a, b)| a - b).collect();
    Ok(TubeMode {
        profile: normalize_mode(dzv, drv, snap.zdot.clone(), snap.rdot.clone(), solitary),
        rate: rate.rate,
        rate_stderr: rate.stderr,
        oscillation_only: false,
    })
}

fn eigen_linearized(
    solitary: &TubeField,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    cfg: &RunConfig,
) -> Result<TubeMode, MembraneError> {
    let n = solitary.n();
    let dt = match cfg.dt {
        Some(v) => v,
        None => stable_dt(solitary, mat, geom, &cfg.bending, cfg.cfl_fraction)?,
    };
    let eng = Engine::new(mat, geom, solitary.dz, cfg.k_form, &cfg.bending);
    // Directional derivative of the accelerations at the frozen profile.
    let lin = |uz: &[f64], ur: &[f64]| -> Option<(Vec<f64>, Vec<f64>)> {
        let scale = uz
            .iter()
            .chain(ur)
            .map(|v| v.abs())
            .fold(0.0, f64::max)
            .max(1e-300);
        let h = 1e-6 / scale;
        let zp: Vec<f64> = solitary.z.iter().zip(uz).map(|(a, b)| a + h * b).collect();
        let rp: Vec<f64> = solitary.r.iter().zip(ur).map(|(a, b)| a + h * b).collect();
        let zm: Vec<f64> = solitary.z.iter().zip(uz).map(|(a, b)| a - h * b).collect();
        let rm: Vec<f64> = solitary.r.iter().zip(ur).map(|(a, b)| a - h * b).collect();
        let (azp, arp) = eng.accel(&zp, &rp).ok()?;
        let (azm, arm) = eng.accel(&zm, &rm).ok()?;
        let az: Vec<f64> = azp.iter().zip(&azm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let ar: Vec<f64> = arp.iter().zip(&arm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        Some((az, ar))
    };

    // Even, localized seed in δr around the crest.
    let mut crest = 0;
    for (i, v) in solitary.r.iter().enumerate() {
        if *v > solitary.r[crest] {
            crest = i;
        }
    }
    let zc = solitary.zeta(crest);
    let width = 4.0;
    let mut uz = vec![0.0; n];
    let mut ur: Vec<f64> = (0..n)
        .map(|i| {
            let x = (solitary.zeta(i) - zc) / width;
            1e-6 * (-x * x).exp()
        })
        .collect();
    ur[0] = 0.0;
    ur[n - 1] = 0.0;
    let mut vz = vec![0.0; n];
    let mut vr = vec![0.0; n];

    let sample_dt = 0.5_f64.max(dt);
    let mut next_sample = sample_dt;
    let mut t = 0.0;
    let mut log_scale = 0.0;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    while t < cfg.t_end {
        // Midpoint step on (u, v): u' = v, v' = L u.
        let (az, ar) = lin(&uz, &ur).ok_or(MembraneError::Fit(WavelabError::WindowNotFound))?;
        let half = 0.5 * dt;
        let uzh: Vec<f64> = uz.iter().zip(&vz).map(|(u, v)| u + half * v).collect();
        let urh: Vec<f64> = ur.iter().zip(&vr).map(|(u, v)| u + half * v).collect();
        let vzh: Vec<f64> = vz.iter().zip(&az).map(|(v, a)| v + half * a).collect();
        let vrh: Vec<f64> = vr.iter().zip(&ar).map(|(v, a)| v + half * a).collect();
        let (az, ar) = lin(&uzh, &urh).ok_or(MembraneError::Fit(WavelabError::WindowNotFound))?;
        for k in 1..n - 1 {
            uz[k] += dt * vzh[k];
            ur[k] += dt * vrh[k];
            vz[k] += dt * az[k];
            vr[k] += dt * ar[k];
        }
        t += dt;
        let amp = ur.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if !(amp.is_finite()) {
            return Err(MembraneError::Fit(WavelabError::WindowNotFound));
        }
        if amp > 1e6 {
            let inv = 1.0 / amp;
            for v in uz
                .iter_mut()
                .chain(&mut ur)
                .chain(&mut vz)
                .chain(&mut vr)
            {
                *v *= inv;
            }
            log_scale += amp.ln();
        }
        if t + 1e-12 >= next_sample {
            next_sample += sample_dt;
            let amp = ur.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if amp > 0.0 {
                samples.push((t, amp.ln() + log_scale));
            }
        }
    }
    let h = samples.len() / 2;
    let tail = &samples[h..];
    let mut rates = Vec::new();
    for w in tail.windows(2) {
        rates.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
    }
    let (rate, stderr, oscillation_only) = if rates.len() < 3 {
        (0.0, 0.0, true)
    } else {
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rates.len() as f64;
        let sd = var.sqrt();
        let settled = mean > 1e-3 && sd < 0.05 * mean.abs().max(1e-300);
        (mean, sd, !settled)
    };
    Ok(TubeMode {
        profile: normalize_mode(uz, ur, vz, vr, solitary),
        rate,
        rate_stderr: stderr,
        oscillation_only,
    })
}
