//! Linear wave analysis about uniform tube states.
//!
//! Closed-form dispersion relation of the fixed-pressure membrane model
//! (two branches from a nested-radical formula), branch classification,
//! correctness/stability verdicts, the line-vs-curve intersection test used
//! to classify reversible shock structures, and a numeric fallback that
//! assembles the linearized symbol of richer models (bending correction,
//! coupled gas column) by finite differences of their flux/source closures.

use crate::material::{
    equilibrium_pressure, first_derivatives, reduced_derivatives, MaterialError, MaterialParams,
    TubeGeometry, UniformState,
};
use crate::Cplx;
use nalgebra::DMatrix;
use num_complex::Complex;

/// Errors from the dispersion layer.
#[derive(Debug, Clone, PartialEq)]
pub enum DispersionError {
    Material(MaterialError),
    /// g = f: the large-k branch labels are not defined.
    DegenerateBranches,
    /// The complex eigenvalue iteration failed to converge.
    EigenvaluesFailed,
    /// A quantity that must be real (e.g. the k → 0 phase-speed limit)
    /// came out complex because the state is unstable.
    NotReal,
}

impl std::fmt::Display for DispersionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DispersionError::Material(e) => write!(f, "material error: {e}"),
            DispersionError::DegenerateBranches => {
                write!(f, "g = f: branch labels are degenerate")
            }
            DispersionError::EigenvaluesFailed => write!(f, "eigenvalue iteration failed"),
            DispersionError::NotReal => write!(f, "requested limit is not real at this state"),
        }
    }
}

impl std::error::Error for DispersionError {}

impl From<MaterialError> for DispersionError {
    fn from(e: MaterialError) -> Self {
        DispersionError::Material(e)
    }
}

/// The coefficients entering the membrane dispersion relation, all evaluated
/// at a uniform state (λ₁ = z₀′, λ₂ = r₀/R).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionCoefficients {
    /// Ŵ₁₁₀/(ρR) — squared longitudinal speed.
    pub g: f64,
    /// σ₁₀/(ρ z₀′²) — squared transverse speed (negative when σ₁₀ < 0).
    pub f: f64,
    /// √g.
    pub ul: Cplx,
    /// √f.
    pub utau: Cplx,
    /// √((Ŵ₂₂₀/R − P*z₀′)/(ρR)) — k → 0 frequency of the plus branch;
    /// imaginary at unstable states.
    pub omega0: Cplx,
    /// P*r₀ − Ŵ₂₁₀ — the z–r coupling coefficient.
    pub cross: f64,
}

/// One (k, ω₊, ω₋) sample of the dispersion relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    pub k: f64,
    pub omega_plus: Cplx,
    pub omega_minus: Cplx,
}

/// Correctness (Petrovskii) and necessary-stability flags of a uniform state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrectnessReport {
    pub sigma1_positive: bool,
    pub ul_real: bool,
    pub utau_real: bool,
    pub omega0_real: bool,
    /// g > (P*r₀ − Ŵ₂₁₀)²/(ρR).
    pub coupling_ok: bool,
    /// P_* matches Ŵ₂/(r₀z₀′) at the state.
    pub equilibrium_ok: bool,
}

impl CorrectnessReport {
    /// Short-wave correctness (hyperbolicity at large k).
    pub fn correct(&self) -> bool {
        self.sigma1_positive && self.ul_real && self.utau_real
    }

    /// Necessary stability of the uniform state.
    pub fn stable(&self) -> bool {
        self.omega0_real && self.coupling_ok
    }

    pub fn all_ok(&self) -> bool {
        self.correct() && self.stable() && self.equilibrium_ok
    }
}

/// Which sign is taken before the inner radical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Large-k character of a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchFamily {
    Longitudinal,
    Transversal,
}

/// Large-k labels of the plus/minus branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchLabels {
    pub plus: BranchFamily,
    pub minus: BranchFamily,
}

/// Everything about a state the closed-form relation needs.
#[derive(Debug, Clone, Copy)]
struct Internals {
    radius: f64,
    rho: f64,
    zp: f64,
    w10: f64,
    w110: f64,
    /// Restoring coefficient Ŵ₂₂₀/R − P*z₀′.
    w_rest: f64,
    cross: f64,
    g: f64,
    f: f64,
}

fn internals(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<Internals, MaterialError> {
    let zp = state.zprime0;
    let lambda2 = state.r0 / geom.radius;
    let d = reduced_derivatives(zp, lambda2, mat)?;
    let w_rest = d.w22 / geom.radius - state.p_star * zp;
    let cross = state.p_star * state.r0 - d.w12;
    let sigma1 = zp * d.w1;
    Ok(Internals {
        radius: geom.radius,
        rho: geom.rho,
        zp,
        w10: d.w1,
        w110: d.w11,
        w_rest,
        cross,
        g: d.w11 / (geom.rho * geom.radius),
        f: sigma1 / (geom.rho * zp * zp),
    })
}

/// Principal square root as a complex frequency: real for x ≥ 0, +i√|x|
/// otherwise.
fn csqrt(x: f64) -> Cplx {
    Cplx::new(x, 0.0).sqrt()
}

/// Evaluates g, f, U_l, U_τ, ω₀ and the coupling coefficient at a uniform
/// state.
pub fn coefficients(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<DispersionCoefficients, DispersionError> {
    let it = internals(state, mat, geom)?;
    Ok(DispersionCoefficients {
        g: it.g,
        f: it.f,
        ul: csqrt(it.g),
        utau: csqrt(it.f),
        omega0: csqrt(it.w_rest / (it.rho * it.radius)),
        cross: it.cross,
    })
}

/// Closed-form frequency of one branch at Lagrangian wavenumber `k`.
///
/// ω² = f·k² + (b ± √(b² + 4[(P*r₀−Ŵ₂₁₀)² + w·(RŴ₁₀/z₀′ − RŴ₁₁₀)]k²))/(2ρR)
/// with b = (RŴ₁₁₀ − RŴ₁₀/z₀′)k² + w and w = Ŵ₂₂₀/R − P*z₀′. The result is
/// the principal root: real for stable oscillation, +i·(rate) for growth.
pub fn omega(
    state: &UniformState<f64>,
    k: f64,
    branch: Branch,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<Cplx, DispersionError> {
    let it = internals(state, mat, geom)?;
    Ok(omega_from_internals(&it, k, branch))
}

fn omega_from_internals(it: &Internals, k: f64, branch: Branch) -> Cplx {
    let k2 = k * k;
    let r = it.radius;
    let b = (r * it.w110 - r * it.w10 / it.zp) * k2 + it.w_rest;
    // The bracket equals ((M₁₁−M₂₂)² + 4·cross²k²)/4 ≥ 0 for the symbol
    // matrix M; clamp the roundoff.
    let inner = b * b
        + 4.0 * (it.cross * it.cross + it.w_rest * (r * it.w10 / it.zp - r * it.w110)) * k2;
    let root = inner.max(0.0).sqrt();
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    let omega2 = it.f * k2 + (b + sign * root) / (2.0 * it.rho * r);
    csqrt(omega2)
}

/// Both branches at one wavenumber.
pub fn sample(
    state: &UniformState<f64>,
    k: f64,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<DispersionSample, DispersionError> {
    let it = internals(state, mat, geom)?;
    Ok(DispersionSample {
        k,
        omega_plus: omega_from_internals(&it, k, Branch::Plus),
        omega_minus: omega_from_internals(&it, k, Branch::Minus),
    })
}

fn label_from(g: f64, f: f64) -> Result<BranchLabels, DispersionError> {
    let scale = g.abs().max(f.abs()).max(f64::MIN_POSITIVE);
    if ((g - f) / scale).abs() < 1e-12 {
        return Err(DispersionError::DegenerateBranches);
    }
    if g > f {
        Ok(BranchLabels { plus: BranchFamily::Longitudinal, minus: BranchFamily::Transversal })
    } else {
        Ok(BranchLabels { plus: BranchFamily::Transversal, minus: BranchFamily::Longitudinal })
    }
}

/// Labels the branches by their large-k slopes: for g > f the plus branch
/// has ω/k → U_l (longitudinal), the minus branch → U_τ; for g < f the
/// roles swap. A tie is reported as degenerate.
pub fn classify_branches(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<BranchLabels, DispersionError> {
    let it = internals(state, mat, geom)?;
    label_from(it.g, it.f)
}

/// Evaluates the correctness and necessary-stability flags of a state.
pub fn correctness_and_stability(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<CorrectnessReport, DispersionError> {
    let it = internals(state, mat, geom)?;
    let sigma1 = it.zp * it.w10;
    let p_eq = equilibrium_pressure(state.r0, state.zprime0, mat, geom)?;
    let eq_scale = 1.0f64.max(p_eq.abs());
    Ok(CorrectnessReport {
        sigma1_positive: sigma1 > 0.0,
        ul_real: it.g > 0.0,
        utau_real: it.f > 0.0,
        omega0_real: it.w_rest >= 0.0,
        coupling_ok: it.g > it.cross * it.cross / (it.rho * it.radius),
        equilibrium_ok: (state.p_star - p_eq).abs() / eq_scale < 1e-8,
    })
}

/// k → 0 phase-speed limit of the minus branch (the speed U₀), measured
/// numerically by Richardson extrapolation of ω₋/k at small k.
pub fn minus_branch_limit_speed(
    state: &UniformState<f64>,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<f64, DispersionError> {
    let it = internals(state, mat, geom)?;
    // Natural wavenumber scale of the relation: where the k² terms are
    // comparable to the restoring term.
    let k_scale = if it.w_rest > 0.0 && it.g > 0.0 {
        (it.w_rest / (it.rho * it.radius)).sqrt() / it.g.sqrt()
    } else {
        1.0
    };
    let slope = |k: f64| -> Result<f64, DispersionError> {
        let om = omega_from_internals(&it, k, Branch::Minus);
        if om.im.abs() > 1e-12 * om.norm().max(1e-300) {
            return Err(DispersionError::NotReal);
        }
        Ok(om.re / k)
    };
    let k1 = 1e-3 * k_scale;
    let s1 = slope(k1)?;
    let s2 = slope(2.0 * k1)?;
    // ω/k = U₀ + C·k² + …: one Richardson step cancels the k² term.
    Ok((4.0 * s1 - s2) / 3.0)
}

/// Verdict of the line-vs-dispersion-curve test.
#[derive(Debug, Clone, PartialEq)]
pub enum LineVerdict {
    /// ω = U·k crosses the branch at these wavenumbers.
    Intersects(Vec<f64>),
    /// Closest approach within the relative tolerance, with no sign change
    /// (a repeated root of ω(k) − U·k).
    Tangent(f64),
    Disjoint,
}

/// Tests whether the line ω = U·k meets a dispersion branch for k inside
/// `k_range`. Only sections where the branch is real participate; tangency
/// means a relative gap below 10⁻³ without a sign change.
pub fn line_intersection_test(
    state: &UniformState<f64>,
    u: f64,
    branch: Branch,
    k_range: (f64, f64),
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<LineVerdict, DispersionError> {
    let it = internals(state, mat, geom)?;
    let (k_lo, k_hi) = k_range;
    if !(k_lo > 0.0 && k_hi > k_lo) {
        return Err(DispersionError::Material(MaterialError::NonPositive));
    }
    const SAMPLES: usize = 4000;
    let gap = |k: f64| -> Option<f64> {
        let om = omega_from_internals(&it, k, branch);
        if om.im.abs() > 1e-12 * om.norm().max(1e-300) {
            None
        } else {
            Some(om.re - u * k)
        }
    };

    let mut crossings: Vec<f64> = Vec::new();
    let mut best_rel = f64::INFINITY;
    let mut best_k = k_lo;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=SAMPLES {
        let k = k_lo + (k_hi - k_lo) * (i as f64) / (SAMPLES as f64);
        let Some(h) = gap(k) else {
            prev = None;
            continue;
        };
        let om = omega_from_internals(&it, k, branch).re;
        let rel = h.abs() / om.abs().max(1e-300);
        if rel < best_rel {
            best_rel = rel;
            best_k = k;
        }
        if let Some((kp, hp)) = prev {
            if h == 0.0 || (h > 0.0) != (hp > 0.0) {
                // Bisection refinement of the crossing.
                let (mut a, mut b, mut ha) = (kp, k, hp);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if m == a || m == b {
                        break;
                    }
                    match gap(m) {
                        Some(hm) if (hm > 0.0) == (ha > 0.0) => {
                            a = m;
                            ha = hm;
                        }
                        Some(_) => b = m,
                        None => break,
                    }
                }
                crossings.push(0.5 * (a + b));
            }
        }
        prev = Some((k, h));
    }

    if !crossings.is_empty() {
        return Ok(LineVerdict::Intersects(crossings));
    }
    if best_rel < 1e-3 {
        return Ok(LineVerdict::Tangent(best_k));
    }
    Ok(LineVerdict::Disjoint)
}

/// Models whose linearized symbol is assembled numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolModel {
    /// Fixed-pressure membrane (cross-validates the closed form).
    Membrane,
    /// Membrane with the bending correction −c·∂⁴r/∂Z⁴ in the radial
    /// equation.
    MembraneBending { c: f64 },
    /// Membrane coupled to a compressible gas column with sound speed `a`
    /// and background density `rho_f0` (linear stiff equation of state).
    FluidGas { a: f64, rho_f0: f64 },
}

/// Output of [`numeric_dispersion`]: every root ω of the polynomial
/// eigenproblem, sorted by real part then imaginary part. Roots come in ±
/// pairs; `conditioning_warning` flags nearly defective (clustered) roots.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericDispersion {
    pub omegas: Vec<Cplx>,
    pub conditioning_warning: bool,
}

impl NumericDispersion {
    /// One representative per ± pair: the roots with Re ω > 0, or Im ω ≥ 0
    /// on the imaginary axis, sorted by |ω|.
    pub fn principal(&self) -> Vec<Cplx> {
        let mut out: Vec<Cplx> = self
            .omegas
            .iter()
            .copied()
            .filter(|o| o.re > 1e-14 || (o.re.abs() <= 1e-14 && o.im >= 0.0))
            .collect();
        out.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).expect("finite"));
        out
    }
}

/// Central finite difference with the balanced step h = 10⁻⁶·(1 + |x₀|).
fn fd(f: &dyn Fn(f64) -> Option<f64>, x0: f64) -> Option<f64> {
    let h = 1e-6 * (1.0 + x0.abs());
    Some((f(x0 + h)? - f(x0 - h)?) / (2.0 * h))
}

/// Assembles the linearized symbol of the chosen model about a uniform state
/// by finite differences of its flux/source closures and returns all ω roots
/// of det(symbol(ω, k)) = 0 via a companion eigenproblem.
pub fn numeric_dispersion(
    model: SymbolModel,
    state: &UniformState<f64>,
    k: f64,
    mat: &MaterialParams<f64>,
    geom: &TubeGeometry<f64>,
) -> Result<NumericDispersion, DispersionError> {
    let radius = geom.radius;
    let rho_r = geom.rho * radius;
    let zp0 = state.zprime0;
    let r00 = state.r0;
    let p_star = state.p_star;
    // Probe the admissible domain once so FD probes can decline gracefully.
    let _ = reduced_derivatives(zp0, r00 / radius, mat)?;

    // Membrane flux and source closures as functions of the local arguments
    // (z′, r′, r); the gas variants also see the local gas density.
    let energy1 = |zp: f64, rp: f64, r: f64| -> Option<(f64, f64, f64)> {
        let l1 = zp.hypot(rp);
        let l2 = r / radius;
        if l1 <= 0.0 || l2 <= 0.0 {
            return None;
        }
        let (w1, w2) = first_derivatives(l1, l2, mat).ok()?;
        Some((w1, w2, l1))
    };
    let flux_z = |zp: f64, rp: f64, r: f64| -> Option<f64> {
        let (w1, _, l1) = energy1(zp, rp, r)?;
        Some(radius * w1 * zp / l1)
    };
    let flux_r = |zp: f64, rp: f64, r: f64| -> Option<f64> {
        let (w1, _, l1) = energy1(zp, rp, r)?;
        Some(radius * w1 * rp / l1)
    };
    let source_z = |_zp: f64, rp: f64, r: f64, p: f64| -> Option<f64> { Some(-p * r * rp) };
    let source_r = |zp: f64, rp: f64, r: f64, p: f64| -> Option<f64> {
        let (_, w2, _) = energy1(zp, rp, r)?;
        Some(-w2 + p * r * zp)
    };

    let ik = Cplx::new(0.0, k);
    // Second-order block: accelerations of (ẑ, r̂) = N/(ρR)·(ẑ, r̂, [ρ̂f]).
    // Arguments and the perturbation factor each contributes:
    //   z′ → ik·ẑ, r′ → ik·r̂, r → r̂, ρf → ρ̂f.
    // Flux contributions carry one extra ik from the outer ∂_Z.
    let err = DispersionError::Material(MaterialError::Locking);
    let d_zp = |f: &dyn Fn(f64) -> Option<f64>| fd(f, zp0);
    let d_rp = |f: &dyn Fn(f64) -> Option<f64>| fd(f, 0.0);
    let d_r = |f: &dyn Fn(f64) -> Option<f64>| fd(f, r00);

    let n_row = |flux: &dyn Fn(f64, f64, f64) -> Option<f64>,
                 source: &dyn Fn(f64, f64, f64, f64) -> Option<f64>|
     -> Option<[Cplx; 2]> {
        let fz = d_zp(&|x| flux(x, 0.0, r00))?;
        let fr = d_rp(&|x| flux(zp0, x, r00))?;
        let fry = d_r(&|x| flux(zp0, 0.0, x))?;
        let sz = d_zp(&|x| source(x, 0.0, r00, p_star))?;
        let sr = d_rp(&|x| source(zp0, x, r00, p_star))?;
        let sry = d_r(&|x| source(zp0, 0.0, x, p_star))?;
        let col_z = ik * (fz * ik) + sz * ik;
        let col_r = ik * (fr * ik + fry) + sr * ik + sry;
        Some([col_z, col_r])
    };

    let row_z = n_row(&flux_z, &source_z).ok_or(err.clone())?;
    let mut row_r = n_row(&flux_r, &source_r).ok_or(err.clone())?;

    if let SymbolModel::MembraneBending { c } = model {
        // −c ∂⁴r/∂Z⁴ adds −c(ik)⁴ = −c·k⁴ to the radial diagonal.
        row_r[1] += -c * k.powi(4);
    }

    let omega2_roots = |a: DMatrix<Complex<f64>>| -> Result<Vec<Cplx>, DispersionError> {
        let eig = a.eigenvalues().ok_or(DispersionError::EigenvaluesFailed)?;
        // State evolves as e^{−iωt}: eigenvalue μ of d/dt gives ω = iμ.
        Ok(eig.iter().map(|mu| Cplx::new(0.0, 1.0) * mu).collect())
    };

    let mut omegas = match model {
        SymbolModel::Membrane | SymbolModel::MembraneBending { .. } => {
            // First-order companion: x = (ẑ, r̂, ẑ_t, r̂_t).
            let mut a = DMatrix::<Complex<f64>>::zeros(4, 4);
            a[(0, 2)] = Cplx::new(1.0, 0.0);
            a[(1, 3)] = Cplx::new(1.0, 0.0);
            a[(2, 0)] = row_z[0] / rho_r;
            a[(2, 1)] = row_z[1] / rho_r;
            a[(3, 0)] = row_r[0] / rho_r;
            a[(3, 1)] = row_r[1] / rho_r;
            omega2_roots(a)?
        }
        SymbolModel::FluidGas { a: sound, rho_f0 } => {
            // The membrane feels the local gas pressure: sources with
            // p = p_* + a²(ρf − ρf0). Extra columns from ∂/∂ρf.
            let dp = |source: &dyn Fn(f64, f64, f64, f64) -> Option<f64>| -> Option<f64> {
                fd(
                    &|rho_f| source(zp0, 0.0, r00, p_star + sound * sound * (rho_f - rho_f0)),
                    rho_f0,
                )
            };
            let sz_rho = dp(&source_z).ok_or(err.clone())?;
            let sr_rho = dp(&source_r).ok_or(err.clone())?;

            // Axial gas momentum: v_t = (v′ż − v v′ − P′/ρf)/z′, linearized
            // by finite differences about the rest state.
            let v_rhs = |vp: f64, zdot: f64, v: f64, p_prime: f64, rho_f: f64, zp: f64| -> Option<f64> {
                if rho_f <= 0.0 || zp <= 0.0 {
                    return None;
                }
                Some((vp * zdot - v * vp - p_prime / rho_f) / zp)
            };
            let v_base = (0.0, 0.0, 0.0, 0.0, rho_f0, zp0);
            let dv_vp = fd(&|x| v_rhs(x, v_base.1, v_base.2, v_base.3, v_base.4, v_base.5), 0.0)
                .ok_or(err.clone())?;
            let dv_pp = fd(&|x| v_rhs(0.0, 0.0, 0.0, x, rho_f0, zp0), 0.0).ok_or(err.clone())?;
            let dv_rho = fd(&|x| v_rhs(0.0, 0.0, 0.0, 0.0, x, zp0), rho_f0).ok_or(err.clone())?;

            // Mass balance: ρf_t = [ρf′ ż r² − 2ρf r(ṙz′ − r′ż) − (ρf v r²)′]
            //                      /(z′r²).
            let rho_rhs = |rho_f: f64,
                           rho_fp: f64,
                           v: f64,
                           vp: f64,
                           r: f64,
                           rp: f64,
                           rdot: f64,
                           zdot: f64,
                           zp: f64|
             -> Option<f64> {
                if zp <= 0.0 || r <= 0.0 {
                    return None;
                }
                let conv = rho_fp * v * r * r + rho_f * vp * r * r + 2.0 * rho_f * v * r * rp;
                Some((rho_fp * zdot * r * r - 2.0 * rho_f * r * (rdot * zp - rp * zdot) - conv)
                    / (zp * r * r))
            };
            let drho_rdot =
                fd(&|x| rho_rhs(rho_f0, 0.0, 0.0, 0.0, r00, 0.0, x, 0.0, zp0), 0.0)
                    .ok_or(err.clone())?;
            let drho_vp = fd(&|x| rho_rhs(rho_f0, 0.0, 0.0, x, r00, 0.0, 0.0, 0.0, zp0), 0.0)
                .ok_or(err.clone())?;

            // x = (ẑ, r̂, v̂, ρ̂f, ẑ_t, r̂_t).
            let mut a = DMatrix::<Complex<f64>>::zeros(6, 6);
            a[(0, 4)] = Cplx::new(1.0, 0.0);
            a[(1, 5)] = Cplx::new(1.0, 0.0);
            // v row: δP′ = a²·ik·ρ̂f; v′ = ik·v̂ multiplies ż₀ = 0 but is
            // kept for fidelity to the closure.
            a[(2, 2)] = dv_vp * Cplx::new(0.0, 0.0);
            a[(2, 3)] = dv_pp * sound * sound * ik + dv_rho;
            // ρf row.
            a[(3, 5)] = Cplx::new(drho_rdot, 0.0);
            a[(3, 2)] = drho_vp * ik;
            // Membrane rows with gas-pressure coupling.
            a[(4, 0)] = row_z[0] / rho_r;
            a[(4, 1)] = row_z[1] / rho_r;
            a[(4, 3)] = Cplx::new(sz_rho / rho_r, 0.0);
            a[(5, 0)] = row_r[0] / rho_r;
            a[(5, 1)] = row_r[1] / rho_r;
            a[(5, 3)] = Cplx::new(sr_rho / rho_r, 0.0);
            omega2_roots(a)?
        }
    };

    omegas.sort_by(|x, y| {
        (x.re, x.im).partial_cmp(&(y.re, y.im)).expect("eigenvalues are finite")
    });
    let scale = omegas.iter().map(|o| o.norm()).fold(0.0, f64::max).max(1e-300);
    let mut warn = false;
    for i in 0..omegas.len() {
        for j in (i + 1)..omegas.len() {
            if (omegas[i] - omegas[j]).norm() < 1e-8 * scale {
                warn = true;
            }
        }
    }
    Ok(NumericDispersion { omegas, conditioning_warning: warn })
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

    fn eq_state(r0: f64, zp: f64) -> UniformState<f64> {
        UniformState::equilibrated(r0, zp, &mat(), &geom()).unwrap()
    }

    #[test]
    fn coefficient_fixtures_at_reference_states() {
        let c = coefficients(&eq_state(1.69, 1.1), &mat(), &geom()).unwrap();
        assert_relative_eq!(c.ul.re, 1.3601165960405742, max_relative = 1e-14);
        assert_relative_eq!(c.utau.re, 0.89267119634810547, max_relative = 1e-14);
        assert_relative_eq!(c.omega0.re, 0.77013550889308289, max_relative = 1e-14);
        assert_relative_eq!(c.cross, 1.0270520607369114, max_relative = 1e-13);
        assert_eq!(c.ul.im, 0.0);
        assert_eq!(c.omega0.im, 0.0);

        let c = coefficients(&eq_state(1.55, 1.1), &mat(), &geom()).unwrap();
        assert_relative_eq!(c.ul.re, 1.399280676624719, max_relative = 1e-14);
        assert_relative_eq!(c.utau.re, 0.8598125929876451, max_relative = 1e-14);
        assert_relative_eq!(c.omega0.re, 0.84678548703229481, max_relative = 1e-14);
        assert_relative_eq!(c.cross, 0.75592411290687846, max_relative = 1e-13);
    }

    #[test]
    fn unstressed_tube_has_no_transverse_wave() {
        let state = UniformState::new(1.0, 1.0, 0.0);
        let c = coefficients(&state, &mat(), &geom()).unwrap();
        assert_abs_diff_eq!(c.f, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.utau.norm(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn overpressured_state_has_imaginary_omega0() {
        // Far above the equilibrium pressure the restoring coefficient
        // Ŵ₂₂₀/R − P*z₀′ goes negative.
        let state = UniformState::new(1.69, 1.1, 3.0);
        let c = coefficients(&state, &mat(), &geom()).unwrap();
        assert!(c.omega0.im > 0.0);
        assert_eq!(c.omega0.re, 0.0);
        let rep = correctness_and_stability(&state, &mat(), &geom()).unwrap();
        assert!(!rep.omega0_real);
        assert!(!rep.equilibrium_ok);
    }

    #[test]
    fn small_k_limits() {
        let state = eq_state(1.69, 1.1);
        let c = coefficients(&state, &mat(), &geom()).unwrap();
        let plus = omega(&state, 1e-6, Branch::Plus, &mat(), &geom()).unwrap();
        assert!((plus - c.omega0).norm() < 1e-4);
        let minus = omega(&state, 1e-6, Branch::Minus, &mat(), &geom()).unwrap();
        assert!(minus.norm() < 1e-4);
        // The minus branch leaves the origin with the finite slope U₀.
        let u0 = minus_branch_limit_speed(&state, &mat(), &geom()).unwrap();
        assert_relative_eq!(u0, 0.26726477423468714, max_relative = 1e-6);
        let u0 = minus_branch_limit_speed(&eq_state(1.55, 1.1), &mat(), &geom()).unwrap();
        assert_relative_eq!(u0, 1.0775322940627028, max_relative = 1e-6);
    }

    #[test]
    fn large_k_slopes_reach_wave_speeds() {
        let state = eq_state(1.69, 1.1);
        let c = coefficients(&state, &mat(), &geom()).unwrap();
        let k = 1e3 * c.omega0.re / c.ul.re;
        let plus = omega(&state, k, Branch::Plus, &mat(), &geom()).unwrap();
        let minus = omega(&state, k, Branch::Minus, &mat(), &geom()).unwrap();
        // g > f here, so plus is the longitudinal branch.
        assert_eq!(
            classify_branches(&state, &mat(), &geom()).unwrap(),
            BranchLabels { plus: BranchFamily::Longitudinal, minus: BranchFamily::Transversal }
        );
        assert!((plus.re / k - c.ul.re).abs() < 0.01 * c.ul.re);
        assert!((minus.re / k - c.utau.re).abs() < 0.01 * c.utau.re);
    }

    #[test]
    fn branch_labels_cover_all_cases() {
        assert_eq!(
            label_from(2.0, 1.0).unwrap(),
            BranchLabels { plus: BranchFamily::Longitudinal, minus: BranchFamily::Transversal }
        );
        assert_eq!(
            label_from(1.0, 2.0).unwrap(),
            BranchLabels { plus: BranchFamily::Transversal, minus: BranchFamily::Longitudinal }
        );
        assert_eq!(label_from(1.0, 1.0), Err(DispersionError::DegenerateBranches));
    }

    #[test]
    fn reference_state_passes_all_flags() {
        let rep = correctness_and_stability(&eq_state(1.69, 1.1), &mat(), &geom()).unwrap();
        assert!(rep.all_ok(), "{rep:?}");
        // Repeated evaluation is bit-identical.
        let again = correctness_and_stability(&eq_state(1.69, 1.1), &mat(), &geom()).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn compressed_state_is_non_correct() {
        // z₀′⁴λ₂² < 1 here, so σ₁ < 0: transverse speed imaginary.
        let rep = correctness_and_stability(&eq_state(1.5, 0.75), &mat(), &geom()).unwrap();
        assert!(!rep.sigma1_positive);
        assert!(!rep.utau_real);
        assert!(!rep.correct());
    }

    #[test]
    fn line_test_distinguishes_the_three_verdicts() {
        let state = eq_state(1.69, 1.1);
        let m = mat();
        let g = geom();
        // Faster than every phase speed of the minus branch: no meeting.
        let v = line_intersection_test(&state, 1.0, Branch::Minus, (1e-3, 30.0), &m, &g).unwrap();
        assert_eq!(v, LineVerdict::Disjoint);
        // Between U₀ and U_τ the line must cross the minus branch.
        let v = line_intersection_test(&state, 0.5, Branch::Minus, (1e-3, 30.0), &m, &g).unwrap();
        match v {
            LineVerdict::Intersects(ks) => {
                assert!(!ks.is_empty());
                let k = ks[0];
                let om = omega(&state, k, Branch::Minus, &m, &g).unwrap();
                assert!((om.re - 0.5 * k).abs() < 1e-6 * om.re.max(1e-12), "k={k} om={om}");
            }
            other => panic!("expected an intersection, got {other:?}"),
        }
        // At exactly U_τ the line is the large-k asymptote: gap shrinks
        // below tolerance with no crossing.
        let c = coefficients(&state, &m, &g).unwrap();
        let v = line_intersection_test(&state, c.utau.re, Branch::Minus, (1e-3, 200.0), &m, &g)
            .unwrap();
        assert!(matches!(v, LineVerdict::Tangent(_)), "got {v:?}");
    }

    #[test]
    fn numeric_symbol_matches_closed_form_membrane() {
        let m = mat();
        let g = geom();
        for (r0, zp) in [(1.69, 1.1), (1.55, 1.1), (2.0, 1.3)] {
            let state = eq_state(r0, zp);
            for k in [1e-2, 0.4, 3.0, 40.0] {
                let num = numeric_dispersion(SymbolModel::Membrane, &state, k, &m, &g).unwrap();
                assert_eq!(num.omegas.len(), 4);
                for branch in [Branch::Plus, Branch::Minus] {
                    let cf = omega(&state, k, branch, &m, &g).unwrap();
                    let best = num
                        .omegas
                        .iter()
                        .map(|o| (o - cf).norm())
                        .fold(f64::INFINITY, f64::min);
                    assert!(
                        best < 1e-6 * cf.norm().max(1e-9),
                        "state ({r0},{zp}) k={k}: closed {cf}, roots {:?}",
                        num.omegas
                    );
                }
            }
        }
    }

    #[test]
    fn bending_restores_correctness_at_compressed_state() {
        let m = mat();
        let g = geom();
        let state = eq_state(1.5, 0.75);
        // Without bending the compressed state has growing short waves.
        let bare = numeric_dispersion(SymbolModel::Membrane, &state, 100.0, &m, &g).unwrap();
        assert!(bare.omegas.iter().any(|o| o.im > 1e-3));
        // With bending stiffness every root is real across six decades.
        for i in 0..=60 {
            let k = 10f64.powf(-3.0 + 0.1 * i as f64);
            let nd =
                numeric_dispersion(SymbolModel::MembraneBending { c: 0.05 }, &state, k, &m, &g)
                    .unwrap();
            for o in &nd.omegas {
                assert!(
                    o.im.abs() <= 1e-7 * o.norm().max(1e-9),
                    "k = {k}: complex root {o}"
                );
            }
        }
    }

    #[test]
    fn gas_branches_meet_at_origin() {
        let m = mat();
        let g = geom();
        let state = eq_state(1.69, 1.1);
        let sound = 13.601165960405742;
        let model = SymbolModel::FluidGas { a: sound, rho_f0: 1.0 };
        let nd = numeric_dispersion(model, &state, 1.0, &m, &g).unwrap();
        assert_eq!(nd.omegas.len(), 6);
        let p1 = nd.principal();
        assert_eq!(p1.len(), 3);
        // The two slowest branches vanish linearly with k: ω(k)/k has a
        // finite limit, so ω at k/10 is ten times smaller.
        let small = numeric_dispersion(model, &state, 1e-4, &m, &g).unwrap();
        let slow: Vec<f64> = small.principal().iter().take(2).map(|o| o.norm()).collect();
        for s in &slow {
            assert!(*s < 2e-4 * 14.0, "branch does not vanish at k→0: {s}");
        }
        let smaller = numeric_dispersion(model, &state, 1e-5, &m, &g).unwrap();
        let slow2: Vec<f64> = smaller.principal().iter().take(2).map(|o| o.norm()).collect();
        for (s, s2) in slow.iter().zip(&slow2) {
            assert_relative_eq!(s / 1e-4, s2 / 1e-5, max_relative = 1e-2);
        }
    }

    proptest! {
        #[test]
        fn omega_is_even_in_k(k in 1e-3f64..1e3) {
            let state = eq_state(1.69, 1.1);
            for branch in [Branch::Plus, Branch::Minus] {
                let a = omega(&state, k, branch, &mat(), &geom()).unwrap();
                let b = omega(&state, -k, branch, &mat(), &geom()).unwrap();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn numeric_matches_closed_form_on_random_states(
            r0 in 1.2f64..2.2,
            zp in 0.85f64..1.5,
            logk in -2.0f64..2.0,
        ) {
            let m = mat();
            let g = geom();
            prop_assume!(crate::material::reduced_invariant(zp, r0) < 20.0);
            let state = UniformState::equilibrated(r0, zp, &m, &g).unwrap();
            let k = 10f64.powf(logk);
            let nd = numeric_dispersion(SymbolModel::Membrane, &state, k, &m, &g).unwrap();
            for branch in [Branch::Plus, Branch::Minus] {
                let cf = omega(&state, k, branch, &m, &g).unwrap();
                let best = nd.omegas.iter().map(|o| (o - cf).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(best < 1e-6 * cf.norm().max(1e-9));
            }
        }
    }
}
