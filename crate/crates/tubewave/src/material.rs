//! Gent hyperelastic constitutive law for an incompressible membrane.
//!
//! Everything downstream (dispersion coefficients, difference schemes, the
//! travelling-wave reduction) consumes the reduced energy `Ŵ(λ₁, λ₂) =
//! W(λ₁, λ₂, 1/(λ₁λ₂))` and its closed-form partial derivatives defined here,
//! together with uniform equilibrium states of the pressurised tube.

use num_traits::Float;

/// Errors from the constitutive layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialError {
    /// The Gent log argument hit zero or went negative: the stretch invariant
    /// reached the locking limit `Jm`.
    Locking,
    /// A stretch or material constant that must be positive was not.
    NonPositive,
    /// The equilibrium residual has no sign change on the admissible
    /// interval; the searched interval (possibly truncated by the locking
    /// limit) is reported.
    NoRoot { lo: f64, hi: f64 },
}

impl std::fmt::Display for MaterialError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaterialError::Locking => write!(f, "stretch invariant reached the Gent locking limit"),
            MaterialError::NonPositive => write!(f, "stretches and material constants must be positive"),
            MaterialError::NoRoot { lo, hi } => {
                write!(f, "no equilibrium root on the admissible interval [{lo}, {hi}]")
            }
        }
    }
}

impl std::error::Error for MaterialError {}

fn lit<T: Float>(x: f64) -> T {
    T::from(x).expect("numeric literal must fit the scalar type")
}

/// Gent material constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams<T> {
    /// Shear modulus μ (stress units).
    pub mu: T,
    /// Gent stiffening parameter J_m (dimensionless); the stretch invariant
    /// locks at J_m.
    pub jm: T,
}

impl<T: Float> MaterialParams<T> {
    pub fn new(mu: T, jm: T) -> Result<Self, MaterialError> {
        if mu <= T::zero() || jm <= T::zero() {
            return Err(MaterialError::NonPositive);
        }
        Ok(Self { mu, jm })
    }
}

/// Tube reference geometry and ambient load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeGeometry<T> {
    /// Reference (undeformed) radius R.
    pub radius: T,
    /// Material density per unit reference area ρ.
    pub rho: T,
    /// Reference wall thickness H.
    pub thickness: T,
    /// Internal-minus-external pressure difference p_*.
    pub p_star: T,
}

impl<T: Float> TubeGeometry<T> {
    pub fn new(radius: T, rho: T, thickness: T, p_star: T) -> Result<Self, MaterialError> {
        if radius <= T::zero() || rho <= T::zero() || thickness <= T::zero() {
            return Err(MaterialError::NonPositive);
        }
        Ok(Self { radius, rho, thickness, p_star })
    }
}

/// A pair of in-plane principal stretches (λ₁ longitudinal, λ₂
/// circumferential); the thickness stretch follows from incompressibility,
/// λ₃ = 1/(λ₁λ₂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchState<T> {
    pub lambda1: T,
    pub lambda2: T,
}

impl<T: Float> StretchState<T> {
    /// Validates positivity and Gent admissibility against `mat`.
    pub fn new(lambda1: T, lambda2: T, mat: &MaterialParams<T>) -> Result<Self, MaterialError> {
        if lambda1 <= T::zero() || lambda2 <= T::zero() {
            return Err(MaterialError::NonPositive);
        }
        if reduced_invariant(lambda1, lambda2) >= mat.jm {
            return Err(MaterialError::Locking);
        }
        Ok(Self { lambda1, lambda2 })
    }
}

/// Principal Cauchy stresses σᵢ = λᵢ Ŵᵢ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalStresses<T> {
    pub sigma1: T,
    pub sigma2: T,
}

/// A uniform state (r₀, z₀′) of the pressurised tube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformState<T> {
    /// Tube radius r₀ (length).
    pub r0: T,
    /// Longitudinal stretch z₀′ (dimensionless).
    pub zprime0: T,
    /// Pressure difference this state is paired with.
    pub p_star: T,
}

impl<T: Float> UniformState<T> {
    pub fn new(r0: T, zprime0: T, p_star: T) -> Self {
        Self { r0, zprime0, p_star }
    }

    /// Builds the state with the pressure that makes it an exact equilibrium.
    pub fn equilibrated(
        r0: T,
        zprime0: T,
        mat: &MaterialParams<T>,
        geom: &TubeGeometry<T>,
    ) -> Result<Self, MaterialError> {
        let p_star = equilibrium_pressure(r0, zprime0, mat, geom)?;
        Ok(Self { r0, zprime0, p_star })
    }

    /// Relative defect of the equilibrium condition p_* = Ŵ₂/(r₀z₀′).
    pub fn equilibrium_residual(
        &self,
        mat: &MaterialParams<T>,
        geom: &TubeGeometry<T>,
    ) -> Result<T, MaterialError> {
        let p_eq = equilibrium_pressure(self.r0, self.zprime0, mat, geom)?;
        let scale = T::one().max(p_eq.abs());
        Ok((self.p_star - p_eq).abs() / scale)
    }
}

/// Stretch invariant I = λ₁² + λ₂² + λ₃² − 3 of the full energy.
#[inline]
pub fn invariant<T: Float>(l1: T, l2: T, l3: T) -> T {
    l1 * l1 + l2 * l2 + l3 * l3 - lit::<T>(3.0)
}

/// Invariant of the reduced (incompressible) energy, λ₃ = 1/(λ₁λ₂).
#[inline]
pub fn reduced_invariant<T: Float>(l1: T, l2: T) -> T {
    let l3 = (l1 * l2).recip();
    invariant(l1, l2, l3)
}

/// Gent strain energy W = −½ μ J_m ln(1 − I/J_m).
///
/// Fails with [`MaterialError::Locking`] when the invariant reaches J_m.
pub fn gent_energy<T: Float>(l1: T, l2: T, l3: T, mat: &MaterialParams<T>) -> Result<T, MaterialError> {
    if l1 <= T::zero() || l2 <= T::zero() || l3 <= T::zero() {
        return Err(MaterialError::NonPositive);
    }
    let arg = T::one() - invariant(l1, l2, l3) / mat.jm;
    if arg <= T::zero() {
        return Err(MaterialError::Locking);
    }
    Ok(-mat.mu * mat.jm * arg.ln() / lit::<T>(2.0))
}

/// Reduced energy Ŵ(λ₁, λ₂) = W(λ₁, λ₂, 1/(λ₁λ₂)).
pub fn reduced_energy<T: Float>(l1: T, l2: T, mat: &MaterialParams<T>) -> Result<T, MaterialError> {
    if l1 <= T::zero() || l2 <= T::zero() {
        return Err(MaterialError::NonPositive);
    }
    gent_energy(l1, l2, (l1 * l2).recip(), mat)
}

/// First and second partial derivatives of the reduced energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedDerivatives<T> {
    pub w1: T,
    pub w2: T,
    pub w11: T,
    pub w12: T,
    pub w22: T,
}

/// Gent factor 1/(1 − Î/J_m), the common multiplier of every derivative.
#[inline]
fn gent_factor<T: Float>(l1: T, l2: T, mat: &MaterialParams<T>) -> Result<T, MaterialError> {
    let arg = T::one() - reduced_invariant(l1, l2) / mat.jm;
    if arg <= T::zero() {
        return Err(MaterialError::Locking);
    }
    Ok(arg.recip())
}

/// First derivatives (Ŵ₁, Ŵ₂) only — the fast path for the inner loops of the
/// difference schemes, which never need the second derivatives.
#[inline]
pub fn first_derivatives<T: Float>(
    l1: T,
    l2: T,
    mat: &MaterialParams<T>,
) -> Result<(T, T), MaterialError> {
    if l1 <= T::zero() || l2 <= T::zero() {
        return Err(MaterialError::NonPositive);
    }
    let g = gent_factor(l1, l2, mat)?;
    let inv1 = l1.recip();
    let inv2 = l2.recip();
    // d(λ₃²)/dλ₁ = −2 λ₁⁻³ λ₂⁻²  and symmetrically for λ₂.
    let a1 = l1 - inv1 * inv1 * inv1 * inv2 * inv2;
    let a2 = l2 - inv2 * inv2 * inv2 * inv1 * inv1;
    Ok((mat.mu * g * a1, mat.mu * g * a2))
}

/// Closed-form first and second partial derivatives of the reduced energy.
///
/// Hand-derived; the test suite checks them against central finite
/// differences of [`reduced_energy`].
pub fn reduced_derivatives<T: Float>(
    l1: T,
    l2: T,
    mat: &MaterialParams<T>,
) -> Result<ReducedDerivatives<T>, MaterialError> {
    if l1 <= T::zero() || l2 <= T::zero() {
        return Err(MaterialError::NonPositive);
    }
    let g = gent_factor(l1, l2, mat)?;
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let inv1 = l1.recip();
    let inv2 = l2.recip();
    let i13 = inv1 * inv1 * inv1;
    let i23 = inv2 * inv2 * inv2;
    let a1 = l1 - i13 * inv2 * inv2;
    let a2 = l2 - i23 * inv1 * inv1;
    let mu = mat.mu;
    let w1 = mu * g * a1;
    let w2 = mu * g * a2;
    // Differentiating μ·G·aᵢ again: G′ = G²·(dÎ/dλ)/Jm with dÎ/dλᵢ = 2aᵢ.
    let w11 = mu * (two * g * g * a1 * a1 / mat.jm + g * (T::one() + three * i13 * inv1 * inv2 * inv2));
    let w22 = mu * (two * g * g * a2 * a2 / mat.jm + g * (T::one() + three * i23 * inv2 * inv1 * inv1));
    let w12 = mu * (two * g * g * a1 * a2 / mat.jm + two * g * i13 * i23);
    Ok(ReducedDerivatives { w1, w2, w11, w12, w22 })
}

/// Principal Cauchy stresses σᵢ = λᵢ Ŵᵢ.
pub fn principal_stresses<T: Float>(
    l1: T,
    l2: T,
    mat: &MaterialParams<T>,
) -> Result<PrincipalStresses<T>, MaterialError> {
    let (w1, w2) = first_derivatives(l1, l2, mat)?;
    Ok(PrincipalStresses { sigma1: l1 * w1, sigma2: l2 * w2 })
}

/// Pressure difference that makes (r₀, z₀′) a uniform equilibrium:
/// P_* = Ŵ₂(λ₁=z₀′, λ₂=r₀/R) / (r₀ z₀′).
pub fn equilibrium_pressure<T: Float>(
    r0: T,
    zprime0: T,
    mat: &MaterialParams<T>,
    geom: &TubeGeometry<T>,
) -> Result<T, MaterialError> {
    if r0 <= T::zero() || zprime0 <= T::zero() {
        return Err(MaterialError::NonPositive);
    }
    let (_, w2) = first_derivatives(zprime0, r0 / geom.radius, mat)?;
    Ok(w2 / (r0 * zprime0))
}

/// Which equilibrium roots to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootBranch {
    /// Every root on the admissible interval, ascending.
    All,
    /// Only roots with σ₁ > 0 (the well-posed uniform states), ascending.
    StressPositive,
    /// The smaller of the stress-positive roots — the branch that bifurcates
    /// from the reference state as the radius jump goes to zero.
    Smaller,
}

/// Admissible z′ interval (z′_lo, z′_hi) for a given circumferential stretch,
/// bounded on both sides by the Gent locking limit.
pub fn admissible_zprime_range(
    lambda2: f64,
    mat: &MaterialParams<f64>,
) -> Result<(f64, f64), MaterialError> {
    if lambda2 <= 0.0 {
        return Err(MaterialError::NonPositive);
    }
    let margin = |z: f64| mat.jm - reduced_invariant(z, lambda2);
    // Î(z′) is convex in z′ (z′² + const/z′² + const), so the admissible set
    // is a single interval around its minimizer z′ = λ₂^{-1/2}.
    let z_min = lambda2.powf(-0.5);
    if margin(z_min) <= 0.0 {
        return Err(MaterialError::Locking);
    }
    let mut hi = z_min;
    while margin(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo_in = z_min;
    let mut lo_out = hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo_in + lo_out);
        if margin(mid) > 0.0 {
            lo_in = mid;
        } else {
            lo_out = mid;
        }
    }
    let z_hi = lo_in;
    let mut lo = z_min;
    while margin(lo) > 0.0 {
        lo *= 0.5;
    }
    let mut hi_in = z_min;
    let mut hi_out = lo;
    for _ in 0..200 {
        let mid = 0.5 * (hi_in + hi_out);
        if margin(mid) > 0.0 {
            hi_in = mid;
        } else {
            hi_out = mid;
        }
    }
    Ok((hi_in, z_hi))
}

/// All longitudinal stretches z′ that put a tube of radius `r0` in uniform
/// equilibrium with the given pressure: roots of Ŵ₂(z′, r₀/R) − p_*·r₀·z′.
///
/// The residual is solved directly (dense bracketing scan followed by
/// bisection and a Newton polish), not through its polynomial expansion.
pub fn solve_equilibrium_zprime(
    r0: f64,
    p_star: f64,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
    branch: RootBranch,
) -> Result<Vec<f64>, MaterialError> {
    if r0 <= 0.0 {
        return Err(MaterialError::NonPositive);
    }
    let lambda2 = r0 / geom.radius;
    let (z_lo, z_hi) = admissible_zprime_range(lambda2, mat)?;
    // Search interval: stay strictly inside the locking bounds and below by
    // the fixed floor 10⁻³.
    let pad = 1e-9 * (z_hi - z_lo);
    let lo = (z_lo + pad).max(1e-3);
    let hi = z_hi - pad;
    if lo >= hi {
        return Err(MaterialError::NoRoot { lo, hi });
    }
    let psi = |z: f64| -> f64 {
        let (_, w2) = first_derivatives(z, lambda2, mat).expect("scan stays inside the admissible interval");
        w2 - p_star * r0 * z
    };

    const SCAN: usize = 10_000;
    let mut roots = Vec::new();
    let mut prev_z = lo;
    let mut prev_v = psi(lo);
    for i in 1..=SCAN {
        let z = lo + (hi - lo) * (i as f64) / (SCAN as f64);
        let v = psi(z);
        if prev_v == 0.0 {
            roots.push(prev_z);
        } else if (v > 0.0) != (prev_v > 0.0) {
            roots.push(refine_root(&psi, prev_z, z));
        }
        prev_z = z;
        prev_v = v;
    }
    if psi(hi) == 0.0 {
        roots.push(hi);
    }
    if roots.is_empty() {
        return Err(MaterialError::NoRoot { lo, hi });
    }
    roots.sort_by(|a, b| a.partial_cmp(b).expect("roots are finite"));

    match branch {
        RootBranch::All => Ok(roots),
        RootBranch::StressPositive | RootBranch::Smaller => {
            // σ₁ = z′·Ŵ₁ > 0 ⟺ z′⁴λ₂² > 1.
            let z_sigma = lambda2.powf(-0.5);
            let positive: Vec<f64> = roots.into_iter().filter(|&z| z > z_sigma).collect();
            if positive.is_empty() {
                return Err(MaterialError::NoRoot { lo, hi });
            }
            if branch == RootBranch::Smaller {
                Ok(vec![positive[0]])
            } else {
                Ok(positive)
            }
        }
    }
}

/// Bisection to machine interval followed by a guarded Newton polish.
fn refine_root(psi: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = psi(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = psi(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    // Newton polish with a derivative from a centered difference; keep the
    // iterate inside [a, b].
    let mut z = 0.5 * (a + b);
    for _ in 0..4 {
        let h = 1e-7 * (1.0 + z.abs());
        let d = (psi(z + h) - psi(z - h)) / (2.0 * h);
        if d == 0.0 {
            break;
        }
        let step = psi(z) / d;
        let znew = z - step;
        if znew > a && znew < b {
            z = znew;
        } else {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn mat() -> MaterialParams<f64> {
        MaterialParams::new(1.0, 30.0).unwrap()
    }

    fn geom() -> TubeGeometry<f64> {
        TubeGeometry::new(1.0, 1.0, 0.01, 0.0).unwrap()
    }

    #[test]
    fn identity_state_is_stress_free() {
        let m = mat();
        assert_abs_diff_eq!(gent_energy(1.0, 1.0, 1.0, &m).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(reduced_energy(1.0, 1.0, &m).unwrap(), 0.0, epsilon = 1e-14);
        let d = reduced_derivatives(1.0, 1.0, &m).unwrap();
        assert_abs_diff_eq!(d.w1, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.w2, 0.0, epsilon = 1e-14);
        let s = principal_stresses(1.0, 1.0, &m).unwrap();
        assert_abs_diff_eq!(s.sigma1, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.sigma2, 0.0, epsilon = 1e-14);
        // Second derivatives at identity have the closed values 4μ, 2μ, 4μ.
        assert_relative_eq!(d.w11, 4.0, max_relative = 1e-12);
        assert_relative_eq!(d.w12, 2.0, max_relative = 1e-12);
        assert_relative_eq!(d.w22, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn locking_limit_is_a_domain_error() {
        let m = mat();
        // Equi-triaxial stretch with invariant exactly at Jm: 3λ² − 3 = Jm.
        let l = ((m.jm + 3.0) / 3.0).sqrt();
        assert_eq!(gent_energy(l, l, l, &m), Err(MaterialError::Locking));
        assert!(gent_energy(l * 0.999, l * 0.999, l * 0.999, &m).is_ok());
    }

    #[test]
    fn frozen_energy_fixtures() {
        // 50-digit evaluations of the closed forms.
        let m = mat();
        let l3 = 1.0 / (1.1 * 1.69);
        assert_relative_eq!(
            gent_energy(1.1, 1.69, l3, &m).unwrap(),
            0.69351893935052119,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            reduced_energy(1.1, 1.55, &m).unwrap(),
            0.48603718409710277,
            max_relative = 1e-14
        );
        // Reduced and full energies coincide at the incompressible λ₃.
        assert_relative_eq!(
            reduced_energy(1.1, 1.69, &m).unwrap(),
            gent_energy(1.1, 1.69, l3, &m).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn frozen_derivative_fixtures() {
        let m = mat();
        let d = reduced_derivatives(1.1, 1.69, &m).unwrap();
        assert_relative_eq!(d.w1, 0.87654805126851366, max_relative = 1e-14);
        assert_relative_eq!(d.w2, 1.5906487803306926, max_relative = 1e-14);
        assert_relative_eq!(d.w11, 1.8499171548249985, max_relative = 1e-14);
        assert_relative_eq!(d.w12, 0.41899228501826372, max_relative = 1e-14);
        assert_relative_eq!(d.w22, 1.534320998111672, max_relative = 1e-14);
    }

    #[test]
    fn equilibrium_pressure_fixtures() {
        let m = mat();
        let g = geom();
        assert_abs_diff_eq!(equilibrium_pressure(1.0, 1.0, &m, &g).unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(
            equilibrium_pressure(1.69, 1.1, &m, &g).unwrap(),
            0.85564754186696751,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            equilibrium_pressure(1.55, 1.1, &m, &g).unwrap(),
            0.80457810952654178,
            max_relative = 1e-14
        );
    }

    #[test]
    fn equilibrium_roots_near_reference_state() {
        let m = mat();
        let g = geom();
        let p = equilibrium_pressure(1.69, 1.1, &m, &g).unwrap();
        // Round trip: the generating stretch is among the roots.
        let roots = solve_equilibrium_zprime(1.69, p, &m, &g, RootBranch::All).unwrap();
        assert!(roots.iter().any(|z| (z - 1.1).abs() < 1e-10), "roots: {roots:?}");
        // Radius slightly above the reference: the same pressure admits
        // exactly two stress-positive roots and the smaller continues the
        // reference branch.
        let roots = solve_equilibrium_zprime(1.695, p, &m, &g, RootBranch::StressPositive).unwrap();
        assert_eq!(roots.len(), 2, "roots: {roots:?}");
        assert_relative_eq!(roots[0], 1.10286388288, max_relative = 1e-9);
        assert_relative_eq!(roots[1], 4.77592715952, max_relative = 1e-9);
        let smaller = solve_equilibrium_zprime(1.695, p, &m, &g, RootBranch::Smaller).unwrap();
        assert_eq!(smaller.len(), 1);
        assert_relative_eq!(smaller[0], roots[0], max_relative = 1e-14);
        // The full list carries one more root, on the compressed (σ₁ < 0)
        // branch.
        let all = solve_equilibrium_zprime(1.695, p, &m, &g, RootBranch::All).unwrap();
        assert_eq!(all.len(), 3, "roots: {all:?}");
        assert!(all[0] < 1.695_f64.powf(-0.5));
    }

    #[test]
    fn root_residuals_are_tiny() {
        let m = mat();
        let g = geom();
        let p = equilibrium_pressure(1.69, 1.1, &m, &g).unwrap();
        for r0 in [1.69, 1.75, 1.9, 2.1, 2.3] {
            let roots = solve_equilibrium_zprime(r0, p, &m, &g, RootBranch::All).unwrap();
            for z in roots {
                let (_, w2) = first_derivatives(z, r0, &m).unwrap();
                assert!(
                    (w2 - p * r0 * z).abs() < 1e-12,
                    "residual at r0={r0}, z'={z}: {}",
                    (w2 - p * r0 * z).abs()
                );
            }
        }
    }

    #[test]
    fn generic_layer_instantiates_for_f32() {
        let m = MaterialParams::<f32>::new(1.0, 30.0).unwrap();
        let e = reduced_energy(1.1f32, 1.55, &m).unwrap();
        assert_relative_eq!(e, 0.48603718, max_relative = 1e-5);
        let d = reduced_derivatives(1.1f32, 1.55, &m).unwrap();
        assert_relative_eq!(d.w1, 0.8132055, max_relative = 1e-4);
    }

    /// Central finite differences of the reduced energy.
    fn fd_first(l1: f64, l2: f64, m: &MaterialParams<f64>, h: f64) -> (f64, f64) {
        let e = |a: f64, b: f64| reduced_energy(a, b, m).unwrap();
        (
            (e(l1 + h, l2) - e(l1 - h, l2)) / (2.0 * h),
            (e(l1, l2 + h) - e(l1, l2 - h)) / (2.0 * h),
        )
    }

    fn fd_second(l1: f64, l2: f64, m: &MaterialParams<f64>, h: f64) -> (f64, f64, f64) {
        let e = |a: f64, b: f64| reduced_energy(a, b, m).unwrap();
        let w11 = (e(l1 + h, l2) - 2.0 * e(l1, l2) + e(l1 - h, l2)) / (h * h);
        let w22 = (e(l1, l2 + h) - 2.0 * e(l1, l2) + e(l1, l2 - h)) / (h * h);
        let w12 = (e(l1 + h, l2 + h) - e(l1 + h, l2 - h) - e(l1 - h, l2 + h) + e(l1 - h, l2 - h))
            / (4.0 * h * h);
        (w11, w12, w22)
    }

    /// Stretch pairs kept away from the locking boundary so the invariant
    /// stays well inside the Gent domain.
    fn admissible_pair() -> impl Strategy<Value = (f64, f64)> {
        (0.5f64..2.2, 0.5f64..2.2).prop_filter("inside Gent domain with margin", |&(a, b)| {
            reduced_invariant(a, b) < 24.0
        })
    }

    proptest! {
        #[test]
        fn energy_nonnegative_and_symmetric((l1, l2) in admissible_pair()) {
            let m = mat();
            let e = reduced_energy(l1, l2, &m).unwrap();
            prop_assert!(e >= 0.0);
            let flipped = reduced_energy(l2, l1, &m).unwrap();
            prop_assert!((e - flipped).abs() <= 1e-13 * (1.0 + e.abs()));
        }

        #[test]
        fn derivatives_match_finite_differences((l1, l2) in admissible_pair()) {
            let m = mat();
            let d = reduced_derivatives(l1, l2, &m).unwrap();
            let h = 1e-5;
            let (f1, f2) = fd_first(l1, l2, &m, h);
            prop_assert!((d.w1 - f1).abs() <= 1e-6 * (1.0 + f1.abs()));
            prop_assert!((d.w2 - f2).abs() <= 1e-6 * (1.0 + f2.abs()));
            // Larger step for second differences: the h² in the denominator
            // amplifies roundoff.
            let (f11, f12, f22) = fd_second(l1, l2, &m, 1e-4);
            prop_assert!((d.w11 - f11).abs() <= 1e-5 * (1.0 + f11.abs()));
            prop_assert!((d.w12 - f12).abs() <= 1e-5 * (1.0 + f12.abs()));
            prop_assert!((d.w22 - f22).abs() <= 1e-5 * (1.0 + f22.abs()));
        }

        #[test]
        fn mixed_partials_symmetric((l1, l2) in admissible_pair()) {
            let m = mat();
            let d = reduced_derivatives(l1, l2, &m).unwrap();
            let flipped = reduced_derivatives(l2, l1, &m).unwrap();
            // Swapping arguments swaps the roles of the two directions.
            prop_assert!((d.w1 - flipped.w2).abs() <= 1e-12 * (1.0 + d.w1.abs()));
            prop_assert!((d.w12 - flipped.w12).abs() <= 1e-12 * (1.0 + d.w12.abs()));
        }

        #[test]
        fn equilibrium_round_trip((r0, zp) in (1.1f64..2.4, 0.75f64..1.6)) {
            let m = mat();
            let g = geom();
            prop_assume!(reduced_invariant(zp, r0) < 24.0);
            let p = equilibrium_pressure(r0, zp, &m, &g).unwrap();
            prop_assume!(p > 0.0);
            let roots = solve_equilibrium_zprime(r0, p, &m, &g, RootBranch::All).unwrap();
            prop_assert!(
                roots.iter().any(|z| (z - zp).abs() < 1e-10),
                "z'={} not recovered in {:?}", zp, roots
            );
        }
    }
}
