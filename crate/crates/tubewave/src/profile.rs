//! Standing solitary-wave and kink profiles from the travelling-wave ODE
//! reduction of the fixed-pressure tube equations.
//!
//! With time derivatives dropped, the axial equation integrates once to
//!
//!   R·Ŵ₁·z′/λ₁ − p★·r²/2 = C,
//!
//! which determines z′ pointwise from (r, r′).  Substituting it into the
//! radial equation leaves a planar system in (r, r′) that also conserves
//!
//!   H = R·(λ₁Ŵ₁ − Ŵ).
//!
//! Solitary waves are homoclinic orbits of that system launched along the
//! unstable eigenvector of the far-field saddle; kinks are half-orbits that
//! pass within tolerance of a second equilibrium.

use std::cell::Cell;

use crate::material::{
    self, reduced_derivatives, reduced_energy, MaterialError, MaterialParams, TubeGeometry,
    UniformState,
};
use crate::ode::{integrate, Direction, Event, Integrator, OdeError, Status};

/// Errors from profile construction.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileError {
    Material(MaterialError),
    /// The end state is not a saddle of the reduced system (κ² reported).
    NotASaddle { kappa_squared: f64 },
    /// No crest turning point was reached from the launch bracket.
    NoHomoclinic,
    /// The orbit does not pass near the requested second state; the
    /// closest approach (relative to the jump) is reported.
    NoConnection { closest: f64 },
    /// z′ could not be recovered from the first integral at radius r.
    ZprimeSolve { r: f64 },
    Ode(OdeError),
}

impl std::fmt::Display for ProfileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProfileError::Material(e) => write!(f, "{e}"),
            ProfileError::NotASaddle { kappa_squared } => {
                write!(f, "end state is not a saddle (kappa^2 = {kappa_squared:.3e})")
            }
            ProfileError::NoHomoclinic => write!(f, "no crest turning point found"),
            ProfileError::NoConnection { closest } => {
                write!(f, "no connection to the second state (closest approach {closest:.3e})")
            }
            ProfileError::ZprimeSolve { r } => {
                write!(f, "first integral has no z' solution at r = {r}")
            }
            ProfileError::Ode(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ProfileError {}

impl From<MaterialError> for ProfileError {
    fn from(e: MaterialError) -> Self {
        ProfileError::Material(e)
    }
}

impl From<OdeError> for ProfileError {
    fn from(e: OdeError) -> Self {
        ProfileError::Ode(e)
    }
}

/// Profile family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Solitary,
    Kink,
}

/// A computed travelling-wave profile sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveProfile {
    /// Reference coordinate, crest (solitary) or left launch (kink) aligned.
    pub zgrid: Vec<f64>,
    /// Radius r(Z).
    pub r: Vec<f64>,
    /// dr/dZ, stored for Hermite resampling.
    pub rprime: Vec<f64>,
    /// dz/dZ recovered from the first integral.
    pub zprime: Vec<f64>,
    /// Axial position z(Z), integrated alongside the orbit, zero at grid
    /// start.
    pub z: Vec<f64>,
    /// Far-field state the profile decays to on the left.
    pub end_state: UniformState<f64>,
    /// Right state (kinks only).
    pub end_state_right: Option<UniformState<f64>>,
    /// Achieved endpoint deviation from the end state(s).
    pub decay_tol: f64,
    pub kind: ProfileKind,
}

impl WaveProfile {
    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn dz(&self) -> f64 {
        self.zgrid[1] - self.zgrid[0]
    }

    /// Index of the maximum radius.
    pub fn crest_index(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.r.iter().enumerate() {
            if *v > self.r[best] {
                best = i;
            }
        }
        best
    }

    /// Cubic-Hermite sample of (r, r′, z′, z) at reference coordinate `zq`,
    /// clamped to the end values outside the stored range.
    pub fn sample(&self, zq: f64) -> (f64, f64, f64, f64) {
        let n = self.n();
        let dz = self.dz();
        if zq <= self.zgrid[0] {
            let z_off = self.z[0] + (zq - self.zgrid[0]) * self.zprime[0];
            return (self.r[0], self.rprime[0], self.zprime[0], z_off);
        }
        if zq >= self.zgrid[n - 1] {
            let z_off = self.z[n - 1] + (zq - self.zgrid[n - 1]) * self.zprime[n - 1];
            return (self.r[n - 1], self.rprime[n - 1], self.zprime[n - 1], z_off);
        }
        let u = (zq - self.zgrid[0]) / dz;
        let i = (u.floor() as usize).min(n - 2);
        let s = u - i as f64;
        let hermite = |f0: f64, f1: f64, d0: f64, d1: f64| {
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            h00 * f0 + h10 * dz * d0 + h01 * f1 + h11 * dz * d1
        };
        let linear = |f0: f64, f1: f64| f0 + s * (f1 - f0);
        let r = hermite(self.r[i], self.r[i + 1], self.rprime[i], self.rprime[i + 1]);
        let z = hermite(self.z[i], self.z[i + 1], self.zprime[i], self.zprime[i + 1]);
        let rp = linear(self.rprime[i], self.rprime[i + 1]);
        let zp = linear(self.zprime[i], self.zprime[i + 1]);
        (r, rp, zp, z)
    }
}

/// Tunables for the orbit integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Launch displacement along the unstable eigenvector.
    pub delta: f64,
    /// Output spacing; default resolves the tail scale 1/κ with 100 points.
    pub dz_out: Option<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        // Homoclinic tails are stiffly sensitive to the launch, hence the
        // tight tolerance; the displacement keeps the launch point on the
        // manifold to O(δ²) ~ round-off.
        Self { rtol: 1e-10, atol: 1e-12, delta: 1e-8, dz_out: None }
    }
}

/// First integral C = R·Ŵ₁·z′/λ₁ − p★·r²/2 evaluated at a uniform state
/// (λ₁ = z′ there, so the first term is R·Ŵ₁).
pub fn static_first_integral(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<f64, ProfileError> {
    let (w1, _) = material::first_derivatives(state.zprime0, state.r0 / geom.radius, mat)?;
    Ok(geom.radius * w1 - 0.5 * state.p_star * state.r0 * state.r0)
}

/// Conserved energy-like integral H = R·(λ₁Ŵ₁ − Ŵ) at a uniform state.
pub fn static_energy_integral(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<f64, ProfileError> {
    let l2 = state.r0 / geom.radius;
    let (w1, _) = material::first_derivatives(state.zprime0, l2, mat)?;
    let w = reduced_energy(state.zprime0, l2, mat)?;
    Ok(geom.radius * (state.zprime0 * w1 - w))
}

/// The planar reduced system with z′ eliminated through the first integral.
struct Reduced<'a> {
    mat: &'a MaterialParams<f64>,
    geom: &'a TubeGeometry<f64>,
    p_star: f64,
    c_const: f64,
    /// Warm start for the z′ root solve (branch continuity between calls).
    warm: Cell<f64>,
}

impl<'a> Reduced<'a> {
    fn new(
        state: &UniformState<f64>,
        mat: &'a MaterialParams<f64>,
        geom: &'a TubeGeometry<f64>,
    ) -> Result<Self, ProfileError> {
        let c_const = static_first_integral(state, mat, geom)?;
        Ok(Self { mat, geom, p_star: state.p_star, c_const, warm: Cell::new(state.zprime0) })
    }

    /// First-integral mismatch φ(z′) = R·Ŵ₁·z′/λ₁ − p★r²/2 − C.
    fn phi(&self, zp: f64, r: f64, w: f64) -> Option<f64> {
        let l1 = (zp * zp + w * w).sqrt();
        let l2 = r / self.geom.radius;
        let (w1, _) = material::first_derivatives(l1, l2, self.mat).ok()?;
        Some(self.geom.radius * w1 * zp / l1 - 0.5 * self.p_star * r * r - self.c_const)
    }

    /// Solves the first integral for z′ given (r, r′): guarded Newton from
    /// the warm start, bracketing bisection as fallback.
    fn zprime(&self, r: f64, w: f64) -> Option<f64> {
        if !(r > 0.0) {
            return None;
        }
        let mut zp = self.warm.get();
        // Newton with a numerical derivative.
        for _ in 0..40 {
            let f = self.phi(zp, r, w)?;
            if f.abs() < 1e-13 * (1.0 + self.c_const.abs()) {
                self.warm.set(zp);
                return Some(zp);
            }
            let h = 1e-7 * (1.0 + zp.abs());
            let (fp, fm) = (self.phi(zp + h, r, w), self.phi(zp - h, r, w));
            let (fp, fm) = match (fp, fm) {
                (Some(a), Some(b)) => (a, b),
                _ => break,
            };
            let d = (fp - fm) / (2.0 * h);
            if d == 0.0 {
                break;
            }
            let step = f / d;
            let next = zp - step;
            if !(next > 0.0) || !next.is_finite() {
                break;
            }
            if step.abs() < 1e-15 * (1.0 + zp.abs()) {
                self.warm.set(next);
                return Some(next);
            }
            zp = next;
        }
        // Bracket around the warm start and bisect.
        let start = self.warm.get();
        let (mut lo, mut hi) = (start, start);
        let f_start = self.phi(start, r, w)?;
        let mut f_lo = f_start;
        let mut f_hi = f_start;
        for _ in 0..120 {
            if f_lo.signum() != f_hi.signum() {
                break;
            }
            lo *= 0.96;
            hi *= 1.04;
            f_lo = match self.phi(lo, r, w) {
                Some(v) => v,
                None => {
                    lo /= 0.96;
                    f_lo
                }
            };
            f_hi = match self.phi(hi, r, w) {
                Some(v) => v,
                None => {
                    hi /= 1.04;
                    f_hi
                }
            };
        }
        if f_lo.signum() == f_hi.signum() {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = self.phi(mid, r, w)?;
            if fm.signum() == f_lo.signum() {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
        }
        let zp = 0.5 * (lo + hi);
        self.warm.set(zp);
        Some(zp)
    }

    /// Right-hand side of the planar system: returns (r′, r″, z′).
    fn rhs(&self, r: f64, w: f64) -> Option<(f64, f64, f64)> {
        let zp = self.zprime(r, w)?;
        let l1 = (zp * zp + w * w).sqrt();
        let l2 = r / self.geom.radius;
        let d = reduced_derivatives(l1, l2, self.mat).ok()?;
        let rr = self.geom.radius;
        let f = rr * d.w1 / l1;
        // ∂F/∂λ₁ / λ₁ and ∂F/∂λ₂ for F = R·Ŵ₁/λ₁.
        let t = rr * (d.w11 / l1 - d.w1 / (l1 * l1)) / l1;
        let f_l2 = rr * d.w12 / l1;
        // [F + T·z′²  T·z′w ] [z″]   [p★rw − F_λ₂·w·z′/R        ]
        // [T·z′w      F + Tw²] [r″] = [Ŵ₂ − p★rz′ − F_λ₂·w²/R   ]
        let a11 = f + t * zp * zp;
        let a12 = t * zp * w;
        let a22 = f + t * w * w;
        let b1 = self.p_star * r * w - f_l2 * w * zp / rr;
        let b2 = d.w2 - self.p_star * r * zp - f_l2 * w * w / rr;
        let det = a11 * a22 - a12 * a12;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let rpp = (a11 * b2 - a12 * b1) / det;
        Some((w, rpp, zp))
    }

    /// Conserved H = R·(λ₁Ŵ₁ − Ŵ) at a point of the orbit.
    fn energy(&self, r: f64, w: f64, zp: f64) -> Option<f64> {
        let l1 = (zp * zp + w * w).sqrt();
        let l2 = r / self.geom.radius;
        let (w1, _) = material::first_derivatives(l1, l2, self.mat).ok()?;
        let wv = reduced_energy(l1, l2, self.mat).ok()?;
        Some(self.geom.radius * (l1 * w1 - wv))
    }
}

/// Decay rate κ of the far-field saddle: κ² is the radial derivative of the
/// reduced acceleration at the fixed point. Errors when the state is a
/// center (κ² ≤ 0), i.e. no homoclinic can leave it.
pub fn saddle_eigenvalue(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<f64, ProfileError> {
    let sys = Reduced::new(state, mat, geom)?;
    let h = 1e-6 * state.r0;
    let up = sys
        .rhs(state.r0 + h, 0.0)
        .ok_or(ProfileError::ZprimeSolve { r: state.r0 + h })?;
    sys.warm.set(state.zprime0);
    let dn = sys
        .rhs(state.r0 - h, 0.0)
        .ok_or(ProfileError::ZprimeSolve { r: state.r0 - h })?;
    let kappa_squared = (up.1 - dn.1) / (2.0 * h);
    if kappa_squared <= 0.0 {
        return Err(ProfileError::NotASaddle { kappa_squared });
    }
    Ok(kappa_squared.sqrt())
}

/// Integrates the unstable-manifold orbit from `state` to its first crest
/// (r′ = 0 turning point). Returns (Z_c, crest r, samples at uniform Z).
struct OrbitResult {
    z_c: f64,
    /// Uniform samples (Z, r, r′, z′, z) from launch to the crest.
    samples: Vec<[f64; 5]>,
}

fn integrate_to_crest(
    state: &UniformState<f64>,
    sign: f64,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    cfg: &ProfileConfig,
) -> Result<(OrbitResult, f64), ProfileError> {
    let kappa = saddle_eigenvalue(state, mat, geom)?;
    let sys = Reduced::new(state, mat, geom)?;
    let delta = cfg.delta.clamp(1e-8, 1e-3);
    let y0 = [state.r0 + sign * delta, sign * kappa * delta];
    let integ = Integrator { rtol: cfg.rtol, atol: cfg.atol, ..Integrator::default() };

    // Pass 1: find the crest with a terminal event on r′ = 0.
    let rhs2 = |_: f64, y: &[f64; 2]| -> Option<[f64; 2]> {
        let (rp, rpp, _) = sys.rhs(y[0], y[1])?;
        Some([rp, rpp])
    };
    let crest_event = Event::new(|_, y: &[f64; 2]| y[1], Direction::Any, true);
    let sol = integrate(rhs2, 0.0, 4000.0, y0, None, &[crest_event], &integ)?;
    let hit = match sol.status {
        Status::Terminated(_) => sol.events.first().cloned(),
        _ => None,
    };
    let hit = hit.ok_or(ProfileError::NoHomoclinic)?;
    let z_c = hit.t;

    // Pass 2: re-run with z carried along and uniform dense output to Z_c.
    let dz_out = cfg.dz_out.unwrap_or_else(|| (1.0 / kappa / 100.0).min(0.05));
    let m = (z_c / dz_out).ceil().max(8.0) as usize;
    let grid: Vec<f64> = (0..=m).map(|i| z_c * i as f64 / m as f64).collect();
    sys.warm.set(state.zprime0);
    let rhs3 = |_: f64, y: &[f64; 3]| -> Option<[f64; 3]> {
        let (rp, rpp, zp) = sys.rhs(y[0], y[1])?;
        Some([rp, rpp, zp])
    };
    let sol3 = integrate(rhs3, 0.0, z_c, [y0[0], y0[1], 0.0], Some(&grid), &[], &integ)?;
    if sol3.t.len() != grid.len() {
        return Err(ProfileError::NoHomoclinic);
    }
    sys.warm.set(state.zprime0);
    let mut samples = Vec::with_capacity(grid.len());
    for (zq, y) in sol3.t.iter().zip(&sol3.y) {
        let zp = sys
            .zprime(y[0], y[1])
            .ok_or(ProfileError::ZprimeSolve { r: y[0] })?;
        samples.push([*zq, y[0], y[1], zp, y[2]]);
    }
    // Force the exact turning point at the crest sample.
    if let Some(last) = samples.last_mut() {
        last[2] = 0.0;
    }
    Ok((OrbitResult { z_c, samples }, kappa))
}

/// Homoclinic (standing solitary wave) profile for an equilibrated end
/// state: integrates to the crest and mirrors about it.
pub fn solitary_profile(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<WaveProfile, ProfileError> {
    solitary_profile_with(state, mat, geom, &ProfileConfig::default())
}

/// `solitary_profile` with explicit integration tunables.
pub fn solitary_profile_with(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    cfg: &ProfileConfig,
) -> Result<WaveProfile, ProfileError> {
    // Elevation branch: launch outward (the paper's solitary waves raise r).
    let (orbit, _) = integrate_to_crest(state, 1.0, mat, geom, cfg)?;
    let m = orbit.samples.len() - 1; // crest index in the half orbit
    let n = 2 * m + 1;
    let mut zgrid = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut rprime = vec![0.0; n];
    let mut zprime = vec![0.0; n];
    let mut z = vec![0.0; n];
    let z_crest = orbit.samples[m][4];
    for (j, s) in orbit.samples.iter().enumerate() {
        let (zq, rv, rp, zp, zv) = (s[0], s[1], s[2], s[3], s[4]);
        // Left half: as integrated, crest shifted to Z = 0.
        zgrid[j] = zq - orbit.z_c;
        r[j] = rv;
        rprime[j] = rp;
        zprime[j] = zp;
        z[j] = zv;
        // Right half by reflection: r even, z − z_crest odd.
        let k = n - 1 - j;
        zgrid[k] = orbit.z_c - zq;
        r[k] = rv;
        rprime[k] = -rp;
        zprime[k] = zp;
        z[k] = 2.0 * z_crest - zv;
    }
    let decay_tol = (r[0] - state.r0).abs().max(rprime[0].abs());
    Ok(WaveProfile {
        zgrid,
        r,
        rprime,
        zprime,
        z,
        end_state: *state,
        end_state_right: None,
        decay_tol,
        kind: ProfileKind::Solitary,
    })
}

/// Heteroclinic (kink) profile between two states equilibrated at the same
/// p★: the half-orbit from the left saddle, accepted when its turning point
/// passes within 2% of the jump from the right state.
pub fn kink_profile(
    left: &UniformState<f64>,
    right: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<WaveProfile, ProfileError> {
    kink_profile_with(left, right, mat, geom, &ProfileConfig::default())
}

/// `kink_profile` with explicit integration tunables.
pub fn kink_profile_with(
    left: &UniformState<f64>,
    right: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    cfg: &ProfileConfig,
) -> Result<WaveProfile, ProfileError> {
    let jump_r = right.r0 - left.r0;
    let jump_zp = right.zprime0 - left.zprime0;
    if jump_r == 0.0 {
        return Err(ProfileError::NoConnection { closest: 0.0 });
    }
    let (orbit, _) = integrate_to_crest(left, jump_r.signum(), mat, geom, cfg)?;
    let last = orbit.samples.last().expect("crest sample");
    // Closest-approach distance at the turning point, jump-relative.
    let dr = (last[1] - right.r0) / jump_r;
    let dzp = if jump_zp.abs() > 1e-12 { (last[3] - right.zprime0) / jump_zp } else { 0.0 };
    let closest = (dr * dr + dzp * dzp).sqrt();
    if closest > 0.02 {
        return Err(ProfileError::NoConnection { closest });
    }
    let mut zgrid = Vec::with_capacity(orbit.samples.len());
    let mut r = Vec::with_capacity(orbit.samples.len());
    let mut rprime = Vec::with_capacity(orbit.samples.len());
    let mut zprime = Vec::with_capacity(orbit.samples.len());
    let mut z = Vec::with_capacity(orbit.samples.len());
    for s in &orbit.samples {
        zgrid.push(s[0]);
        r.push(s[1]);
        rprime.push(s[2]);
        zprime.push(s[3]);
        z.push(s[4]);
    }
    let decay_tol = ((r[0] - left.r0).abs() / jump_r.abs()).max(closest);
    Ok(WaveProfile {
        zgrid,
        r,
        rprime,
        zprime,
        z,
        end_state: *left,
        end_state_right: Some(*right),
        decay_tol,
        kind: ProfileKind::Kink,
    })
}

/// First-integral values along a stored profile (diagnostic; the spread
/// measures self-consistency of the reduction).
pub fn first_integral_along(
    profile: &WaveProfile,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<Vec<f64>, ProfileError> {
    let mut out = Vec::with_capacity(profile.n());
    for i in 0..profile.n() {
        let (rv, rp, zp) = (profile.r[i], profile.rprime[i], profile.zprime[i]);
        let l1 = (zp * zp + rp * rp).sqrt();
        let (w1, _) = material::first_derivatives(l1, rv / geom.radius, mat)?;
        out.push(
            geom.radius * w1 * zp / l1 - 0.5 * profile.end_state.p_star * rv * rv,
        );
    }
    Ok(out)
}

/// Energy-integral values H along a stored profile.
pub fn energy_integral_along(
    profile: &WaveProfile,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<Vec<f64>, ProfileError> {
    let state = profile.end_state;
    let sys = Reduced::new(&state, mat, geom)?;
    let mut out = Vec::with_capacity(profile.n());
    for i in 0..profile.n() {
        let h = sys
            .energy(profile.r[i], profile.rprime[i], profile.zprime[i])
            .ok_or(ProfileError::ZprimeSolve { r: profile.r[i] })?;
        out.push(h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat() -> MaterialParams<f64> {
        MaterialParams::new(1.0, 30.0).unwrap()
    }

    fn geom(p_star: f64) -> TubeGeometry<f64> {
        TubeGeometry::new(1.0, 1.0, 1.0, p_star).unwrap()
    }

    fn paper_state(r0: f64) -> (UniformState<f64>, MaterialParams<f64>, TubeGeometry<f64>) {
        let m = mat();
        let g0 = geom(0.0);
        let p = material::equilibrium_pressure(r0, 1.1, &m, &g0).unwrap();
        let g = geom(p);
        (UniformState::new(r0, 1.1, p), m, g)
    }

    #[test]
    fn first_integral_fixtures() {
        let (s, m, g) = paper_state(1.69);
        let c = static_first_integral(&s, &m, &g).unwrap();
        assert_relative_eq!(c, -0.3453594208946093, max_relative = 1e-14);
        let (s, m, g) = paper_state(1.55);
        let c = static_first_integral(&s, &m, &g).unwrap();
        assert_relative_eq!(c, -0.15329398950260667, max_relative = 1e-14);
        // Unstressed tube: everything vanishes.
        let m = mat();
        let g = geom(0.0);
        let s0 = UniformState::new(1.0, 1.0, 0.0);
        assert_eq!(static_first_integral(&s0, &m, &g).unwrap(), 0.0);
    }

    #[test]
    fn energy_integral_fixtures() {
        let (s, m, g) = paper_state(1.69);
        let h = static_energy_integral(&s, &m, &g).unwrap();
        assert_relative_eq!(h, 0.27068391704484384, max_relative = 1e-14);
        let (s, m, g) = paper_state(1.55);
        let h = static_energy_integral(&s, &m, &g).unwrap();
        assert_relative_eq!(h, 0.40848882692566404, max_relative = 1e-14);
    }

    #[test]
    fn saddle_eigenvalue_fixtures() {
        let (s, m, g) = paper_state(1.69);
        assert_relative_eq!(
            saddle_eigenvalue(&s, &m, &g).unwrap(),
            0.16952791023432279,
            max_relative = 1e-7
        );
        let (s, m, g) = paper_state(1.55);
        assert_relative_eq!(
            saddle_eigenvalue(&s, &m, &g).unwrap(),
            0.75839430432338747,
            max_relative = 1e-7
        );
    }

    #[test]
    fn equilibrium_family_contains_non_saddles() {
        let (s, m, g) = paper_state(1.69);
        // Scan the equilibrium family at this pressure: it must contain
        // non-saddle members (the dynamically unstable uniform states the
        // kink search can run into), and the error must say so.
        let mut non_saddles = 0;
        for r0 in [1.3, 1.5, 1.695, 1.75, 1.9, 2.2] {
            let Ok(zps) = material::solve_equilibrium_zprime(
                r0,
                s.p_star,
                &m,
                &g,
                material::RootBranch::All,
            ) else {
                continue;
            };
            for zp in zps {
                let cand = UniformState::new(r0, zp, s.p_star);
                if let Err(ProfileError::NotASaddle { kappa_squared }) =
                    saddle_eigenvalue(&cand, &m, &g)
                {
                    assert!(kappa_squared <= 0.0);
                    non_saddles += 1;
                }
            }
        }
        assert!(non_saddles > 0, "no non-saddle state found across the family");

    }

    #[test]
    fn solitary_crest_matches_level_set_small_amplitude() {
        let (s, m, g) = paper_state(1.69);
        let p = solitary_profile(&s, &m, &g).unwrap();
        let crest = p.crest_index();
        assert_relative_eq!(p.r[crest], 1.7101654824165003, max_relative = 1e-8);
        assert_relative_eq!(p.zprime[crest], 1.1114955895442943, max_relative = 1e-6);
        assert!(p.decay_tol < 1e-7, "decay {}", p.decay_tol);
        assert_eq!(p.kind, ProfileKind::Solitary);
    }

    #[test]
    fn solitary_crest_matches_level_set_moderate_amplitude() {
        let (s, m, g) = paper_state(1.55);
        let p = solitary_profile(&s, &m, &g).unwrap();
        let crest = p.crest_index();
        assert_relative_eq!(p.r[crest], 1.9933242624899661, max_relative = 1e-8);
        assert_relative_eq!(p.zprime[crest], 1.3919727292801529, max_relative = 1e-6);
    }

    #[test]
    fn solitary_profile_is_even_about_the_crest() {
        let (s, m, g) = paper_state(1.69);
        let p = solitary_profile(&s, &m, &g).unwrap();
        // Construction-independent check: resample at ± offsets.
        for i in 1..40 {
            let off = 0.37 * i as f64;
            let (rp, _, zpp, _) = p.sample(off);
            let (rm, _, zpm, _) = p.sample(-off);
            assert!((rp - rm).abs() < 1e-8, "r asymmetry {} at {off}", rp - rm);
            assert!((zpp - zpm).abs() < 1e-8, "z' asymmetry at {off}");
        }
    }

    #[test]
    fn invariants_are_conserved_along_the_orbit() {
        let (s, m, g) = paper_state(1.55);
        let p = solitary_profile(&s, &m, &g).unwrap();
        let c0 = static_first_integral(&s, &m, &g).unwrap();
        let cs = first_integral_along(&p, &m, &g).unwrap();
        for c in &cs {
            assert!((c - c0).abs() / c0.abs() < 1e-8, "C drift {}", (c - c0) / c0);
        }
        let h0 = static_energy_integral(&s, &m, &g).unwrap();
        let hs = energy_integral_along(&p, &m, &g).unwrap();
        for h in &hs {
            assert!((h - h0).abs() / h0.abs() < 1e-8, "H drift {}", (h - h0) / h0);
        }
    }

    #[test]
    fn tail_decays_at_the_saddle_rate() {
        let (s, m, g) = paper_state(1.69);
        let kappa = saddle_eigenvalue(&s, &m, &g).unwrap();
        let p = solitary_profile(&s, &m, &g).unwrap();
        // Log-slope fit on the left tail amplitude r − r₀ between decades.
        let mut zs = Vec::new();
        let mut ln_dev = Vec::new();
        for i in 0..p.n() {
            let dev = p.r[i] - s.r0;
            if dev > 1e-6 && dev < 1e-3 && p.zgrid[i] < 0.0 {
                zs.push(p.zgrid[i]);
                ln_dev.push(dev.ln());
            }
        }
        assert!(zs.len() > 50, "tail window too small: {}", zs.len());
        let n = zs.len() as f64;
        let sx: f64 = zs.iter().sum();
        let sy: f64 = ln_dev.iter().sum();
        let sxx: f64 = zs.iter().map(|x| x * x).sum();
        let sxy: f64 = zs.iter().zip(&ln_dev).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert_relative_eq!(slope, kappa, max_relative = 0.02);
    }

    #[test]
    fn crest_is_insensitive_to_integrator_tolerance() {
        let (s, m, g) = paper_state(1.69);
        let tight = ProfileConfig { rtol: 5e-11, atol: 5e-13, ..ProfileConfig::default() };
        let a = solitary_profile(&s, &m, &g).unwrap();
        let b = solitary_profile_with(&s, &m, &g, &tight).unwrap();
        let ra = a.r[a.crest_index()];
        let rb = b.r[b.crest_index()];
        assert!((ra - rb).abs() < 1e-6, "crest moved {}", ra - rb);
    }

    #[test]
    fn degenerate_kink_is_rejected() {
        let (s, m, g) = paper_state(1.69);
        match kink_profile(&s, &s, &m, &g) {
            Err(ProfileError::NoConnection { closest }) => assert_eq!(closest, 0.0),
            other => panic!("expected no-connection, got {other:?}"),
        }
    }

    #[test]
    fn distant_state_reports_no_connection() {
        let (s, m, g) = paper_state(1.69);
        // An equilibrated radius clearly short of the orbit's turning point
        // (the jump ends ~0.01 below where the orbit actually turns).
        let zp2 = material::solve_equilibrium_zprime(
            1.70,
            s.p_star,
            &m,
            &g,
            material::RootBranch::Smaller,
        )
        .unwrap()[0];
        let right = UniformState::new(1.70, zp2, s.p_star);
        match kink_profile(&s, &right, &m, &g) {
            Err(ProfileError::NoConnection { closest }) => {
                assert!(closest > 0.02, "closest {closest}")
            }
            other => panic!("expected no-connection, got {other:?}"),
        }
    }

    #[test]
    fn near_limiting_kink_connects_and_is_monotone() {
        // Near the fold of the equilibrium family the half-solitary orbit
        // passes exponentially close to a second equilibrium: the turning
        // point of the small-amplitude orbit sits at r ≈ 1.71017, and the
        // matching equilibrated state there is reached within tolerance.
        let (s, m, g) = paper_state(1.69);
        let r02 = 1.7101654824165003;
        let zp2 = material::solve_equilibrium_zprime(
            r02,
            s.p_star,
            &m,
            &g,
            material::RootBranch::Smaller,
        )
        .unwrap()[0];
        let right = UniformState::new(r02, zp2, s.p_star);
        let p = kink_profile(&s, &right, &m, &g).unwrap();
        assert_eq!(p.kind, ProfileKind::Kink);
        assert_eq!(p.end_state_right, Some(right));
        // Monotone radius along the kink.
        for w in p.r.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "non-monotone kink");
        }
        // Ends near the two states.
        assert!((p.r[0] - s.r0).abs() < 1e-6);
        assert!((p.r[p.n() - 1] - r02).abs() < 0.02 * (r02 - s.r0));
    }
}
