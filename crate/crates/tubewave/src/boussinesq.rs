//! Scalar Boussinesq test model: V_ξξ − V_ττ = V_ξξξξ + (V²)_ξξ.
//!
//! This equation has a closed-form standing solitary wave and a closed-form
//! unstable eigenfunction, which makes it the calibration bench for
//! everything used later on the tube equations: the two difference schemes,
//! the blowup/split detectors, growth-rate fitting, and the
//! eigenfunction-by-evolution trick.

use crate::wavelab::{
    detect_blowup, detect_split, fit_growth_rate, DetectorConfig, DiagnosticsSeries, EventKind,
    RateFit, Snapshot, SplitVerdict, WavelabError,
};

/// Square of the positive eigenvalue of the standing wave's linearization.
pub const S_SQUARED: f64 = 3.0 / 16.0;

/// The positive growth rate s = √(3/16) of the unstable mode.
pub fn growth_rate_s() -> f64 {
    S_SQUARED.sqrt()
}

/// Default computational domain (wide enough that reflections from the
/// rigid boundaries stay negligible over the run horizons used here).
pub const DEFAULT_DOMAIN: (f64, f64) = (-100.0, 100.0);

/// Errors from configuration and evolution.
#[derive(Debug, Clone, PartialEq)]
pub enum BoussinesqError {
    /// Fewer than 5 grid points (widest stencil).
    TooFewPoints,
    /// Time step above the leapfrog stability bound; the bound is reported.
    UnstableStep { dtau_max: f64 },
    /// Non-positive step or horizon.
    BadConfig,
    /// A requested fit failed.
    Fit(WavelabError),
}

impl std::fmt::Display for BoussinesqError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoussinesqError::TooFewPoints => write!(f, "grid needs at least 5 points"),
            BoussinesqError::UnstableStep { dtau_max } => {
                write!(f, "time step exceeds the stability bound {dtau_max}")
            }
            BoussinesqError::BadConfig => write!(f, "steps and horizon must be positive"),
            BoussinesqError::Fit(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BoussinesqError {}

impl From<WavelabError> for BoussinesqError {
    fn from(e: WavelabError) -> Self {
        BoussinesqError::Fit(e)
    }
}

/// Exact standing solitary wave V_s(ξ) = (3/2)·sech²(ξ/2).
pub fn exact_standing_wave(xi: f64) -> f64 {
    let s = 1.0 / (0.5 * xi).cosh();
    1.5 * s * s
}

/// Exact eigenfunction of the linearization about V_s, for the eigenvalue
/// s = √(3/16): B(ξ) = −sech(ξ/2) + 2·sech³(ξ/2).
pub fn exact_eigenfunction(xi: f64) -> f64 {
    let s = 1.0 / (0.5 * xi).cosh();
    -s + 2.0 * s * s * s
}

/// Grid state of the model: V and Q = V_τ co-located on integer nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub xi0: f64,
    pub dxi: f64,
}

impl ScalarField {
    pub fn new(v: Vec<f64>, q: Vec<f64>, xi0: f64, dxi: f64) -> Result<Self, BoussinesqError> {
        if v.len() < 5 || v.len() != q.len() {
            return Err(BoussinesqError::TooFewPoints);
        }
        if !(dxi > 0.0) {
            return Err(BoussinesqError::BadConfig);
        }
        Ok(Self { v, q, xi0, dxi })
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.xi0 + self.dxi * i as f64
    }

    pub fn max_abs_v(&self) -> f64 {
        self.v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn snapshot(&self, t: f64) -> Snapshot {
        Snapshot { t, x0: self.xi0, dx: self.dxi, v: self.v.clone() }
    }

    /// Field sampled from closed-form V(ξ), Q(ξ) on the given domain.
    pub fn from_profiles(
        domain: (f64, f64),
        dxi: f64,
        v_of: impl Fn(f64) -> f64,
        q_of: impl Fn(f64) -> f64,
    ) -> Result<Self, BoussinesqError> {
        if !(dxi > 0.0) || !(domain.1 > domain.0) {
            return Err(BoussinesqError::BadConfig);
        }
        let n = ((domain.1 - domain.0) / dxi).round() as usize + 1;
        let xi = |i: usize| domain.0 + dxi * i as f64;
        let v = (0..n).map(|i| v_of(xi(i))).collect();
        let q = (0..n).map(|i| q_of(xi(i))).collect();
        Self::new(v, q, domain.0, dxi)
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ThreeLayer,
    LaxWendroff,
}

/// Run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dxi: f64,
    pub dtau: f64,
    /// End time of the run.
    pub t_end: f64,
    pub scheme: Scheme,
    /// Overflow guard: the step aborts once max|V| exceeds this.
    pub guard: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        // Resolves the sech²(ξ/2) core with ~40 points and keeps Δτ under
        // the Δτ < c·Δξ² stability bound with margin.
        Self { dxi: 0.1, dtau: 0.002, t_end: 60.0, scheme: Scheme::ThreeLayer, guard: 50.0 }
    }
}

impl SimConfig {
    /// Largest stable Δτ for the linearized stencil: the leapfrog scheme
    /// needs Δτ·ω_max ≤ 1 with ω_max² = 4/Δξ² + 16/Δξ⁴.
    pub fn dtau_stability_bound(&self) -> f64 {
        let d2 = 4.0 / (self.dxi * self.dxi);
        let d4 = 16.0 / self.dxi.powi(4);
        1.0 / (d2 + d4).sqrt()
    }

    pub fn validate(&self) -> Result<(), BoussinesqError> {
        if !(self.dxi > 0.0 && self.dtau > 0.0 && self.t_end > 0.0 && self.guard > 0.0) {
            return Err(BoussinesqError::BadConfig);
        }
        let bound = self.dtau_stability_bound();
        if self.dtau > bound {
            return Err(BoussinesqError::UnstableStep { dtau_max: bound });
        }
        Ok(())
    }
}

/// The step aborted: amplitude crossed the overflow guard (reported as a
/// blowup event by the runner, not a crash).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overflow {
    pub max_abs: f64,
}

/// Spatial operator L(V) = D₂V − D₄V − D₂(V²) on the interior (two frozen
/// nodes at each rigid boundary, matching the five-point stencil reach).
fn spatial_operator(v: &[f64], dxi: f64, out: &mut [f64]) {
    let n = v.len();
    let inv2 = 1.0 / (dxi * dxi);
    let inv4 = inv2 * inv2;
    let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    for k in 2..n - 2 {
        let d2v = (v[k + 1] + v[k - 1] - 2.0 * v[k]) * inv2;
        let d4v = (v[k + 2] + v[k - 2] - 4.0 * v[k + 1] - 4.0 * v[k - 1] + 6.0 * v[k]) * inv4;
        let d2sq = (sq[k + 1] + sq[k - 1] - 2.0 * sq[k]) * inv2;
        out[k] = d2v - d4v - d2sq;
    }
    out[0] = 0.0;
    out[1] = 0.0;
    out[n - 2] = 0.0;
    out[n - 1] = 0.0;
}

fn check_guard(field: ScalarField, guard: f64) -> Result<ScalarField, Overflow> {
    let m = field.max_abs_v();
    // NaN fails the comparison and is treated as overflow too.
    if m <= guard {
        Ok(field)
    } else {
        Err(Overflow { max_abs: m })
    }
}

/// One centered three-layer (leapfrog) step: levels (n−1, n) → n+1.
///
///   Q^{n+1} = Q^{n−1} + 2Δτ·L(V^n),   V^{n+1} = V^{n−1} + 2Δτ·Q^n.
pub fn step_three_layer(
    field: &ScalarField,
    previous: &ScalarField,
    cfg: &SimConfig,
) -> Result<ScalarField, Overflow> {
    let n = field.n();
    let mut l = vec![0.0; n];
    spatial_operator(&field.v, field.dxi, &mut l);
    let two_dt = 2.0 * cfg.dtau;
    let mut v = field.v.clone();
    let mut q = field.q.clone();
    for k in 2..n - 2 {
        q[k] = previous.q[k] + two_dt * l[k];
        v[k] = previous.v[k] + two_dt * field.q[k];
    }
    check_guard(ScalarField { v, q, xi0: field.xi0, dxi: field.dxi }, cfg.guard)
}

/// One two-stage Lax–Wendroff-type step (midpoint Runge–Kutta in time, the
/// same spatial stencils).
pub fn step_lax_wendroff(field: &ScalarField, cfg: &SimConfig) -> Result<ScalarField, Overflow> {
    let n = field.n();
    let half = 0.5 * cfg.dtau;
    let mut l = vec![0.0; n];

    // Predictor: half step.
    spatial_operator(&field.v, field.dxi, &mut l);
    let mut vh = field.v.clone();
    let mut qh = field.q.clone();
    for k in 2..n - 2 {
        vh[k] = field.v[k] + half * field.q[k];
        qh[k] = field.q[k] + half * l[k];
    }

    // Corrector: full step with midpoint derivatives.
    spatial_operator(&vh, field.dxi, &mut l);
    let mut v = field.v.clone();
    let mut q = field.q.clone();
    for k in 2..n - 2 {
        v[k] = field.v[k] + cfg.dtau * qh[k];
        q[k] = field.q[k] + cfg.dtau * l[k];
    }
    check_guard(ScalarField { v, q, xi0: field.xi0, dxi: field.dxi }, cfg.guard)
}

/// How the standing wave is perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationMode {
    /// V = V_s + εB, Q = εsB with the exact eigenfunction.
    ExactB,
    /// Same seeding with the eigenfunction extracted by evolution.
    EvolvedBhat,
    /// Unperturbed V = V_s, Q = 0 (growth triggered by truncation error).
    None,
}

/// Classified end state of a perturbation run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Blowup { tau: f64, max_abs: f64 },
    Split(SplitVerdict),
    /// Neither detector fired by the horizon (standing / inconclusive).
    Standing,
}

/// Full record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRun {
    pub outcome: RunOutcome,
    pub diagnostics: DiagnosticsSeries,
    pub snapshots: Vec<Snapshot>,
}

/// Advances a field to `t_end`, recording snapshots ~every `save_dt`, and
/// classifies the outcome with the shared detectors.
fn evolve_and_classify(
    mut prev: ScalarField,
    cfg: &SimConfig,
    det: &DetectorConfig,
) -> Result<PerturbationRun, BoussinesqError> {
    cfg.validate()?;
    let mut diagnostics = DiagnosticsSeries::default();
    let mut snapshots = Vec::new();
    let save_dt = (cfg.t_end / 400.0).max(cfg.dtau);
    let mut next_save = 0.0;
    let mut tau = 0.0;

    diagnostics.push(tau, prev.max_abs_v());
    snapshots.push(prev.snapshot(tau));
    next_save += save_dt;

    // A three-level scheme needs two levels: bootstrap with one two-layer
    // step.
    let mut blowup: Option<(f64, f64)> = None;
    let mut cur = match cfg.scheme {
        Scheme::ThreeLayer => match step_lax_wendroff(&prev, cfg) {
            Ok(f) => f,
            Err(o) => {
                blowup = Some((cfg.dtau, o.max_abs));
                prev.clone()
            }
        },
        Scheme::LaxWendroff => prev.clone(),
    };
    if cfg.scheme == Scheme::ThreeLayer {
        tau = cfg.dtau;
    }

    while blowup.is_none() && tau < cfg.t_end - 0.5 * cfg.dtau {
        let stepped = match cfg.scheme {
            Scheme::ThreeLayer => step_three_layer(&cur, &prev, cfg),
            Scheme::LaxWendroff => step_lax_wendroff(&cur, cfg),
        };
        tau += cfg.dtau;
        match stepped {
            Ok(f) => {
                if cfg.scheme == Scheme::ThreeLayer {
                    prev = std::mem::replace(&mut cur, f);
                } else {
                    cur = f;
                }
            }
            Err(o) => {
                blowup = Some((tau, o.max_abs));
                break;
            }
        }
        if tau + 1e-12 >= next_save {
            diagnostics.push(tau, cur.max_abs_v());
            snapshots.push(cur.snapshot(tau));
            next_save += save_dt;
        }
    }

    let outcome = if let Some((t_blow, max_abs)) = blowup {
        diagnostics.event(t_blow, EventKind::Blowup, format!("max|V| = {max_abs:.3e}"));
        RunOutcome::Blowup { tau: t_blow, max_abs }
    } else if let Some(t) = detect_blowup(&diagnostics.t, &diagnostics.max_amp, det.blowup_guard)
    {
        diagnostics.event(t, EventKind::Blowup, String::new());
        RunOutcome::Blowup { tau: t, max_abs: det.blowup_guard }
    } else if let Some(split) = detect_split(&snapshots, det) {
        diagnostics.event(split.t, EventKind::Split, format!("separation {:.2}", split.separation));
        RunOutcome::Split(split)
    } else {
        RunOutcome::Standing
    };
    Ok(PerturbationRun { outcome, diagnostics, snapshots })
}

/// Runs the standing wave perturbed by ε in the chosen mode on the default
/// domain and classifies the outcome.
pub fn run_perturbation(
    epsilon: f64,
    mode: PerturbationMode,
    cfg: &SimConfig,
) -> Result<PerturbationRun, BoussinesqError> {
    let det = DetectorConfig::default();
    let field = match mode {
        PerturbationMode::ExactB => {
            let s = growth_rate_s();
            ScalarField::from_profiles(
                DEFAULT_DOMAIN,
                cfg.dxi,
                |xi| exact_standing_wave(xi) + epsilon * exact_eigenfunction(xi),
                |xi| epsilon * s * exact_eigenfunction(xi),
            )?
        }
        PerturbationMode::None => ScalarField::from_profiles(
            DEFAULT_DOMAIN,
            cfg.dxi,
            exact_standing_wave,
            |_| 0.0,
        )?,
        PerturbationMode::EvolvedBhat => {
            let bench = extract_eigenfunction_by_evolution(cfg)?;
            let v: Vec<f64> = bench
                .bhat
                .v
                .iter()
                .enumerate()
                .map(|(i, b)| exact_standing_wave(bench.bhat.xi(i)) + epsilon * b)
                .collect();
            let q: Vec<f64> = bench.bhat.q.iter().map(|qh| epsilon * qh).collect();
            ScalarField::new(v, q, bench.bhat.xi0, bench.bhat.dxi)?
        }
    };
    evolve_and_classify(field, cfg, &det)
}

/// Eigenfunction extracted from the unperturbed run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedEigenfunction {
    /// Normalized deviation profile B̂ (in `v`) and its matching Q̂ (in `q`),
    /// scaled so max|B̂| = 1 with positive center.
    pub bhat: ScalarField,
    /// Exponential rate fitted to the deviation amplitude.
    pub rate: RateFit,
}

/// Runs V = V_s, Q = 0 until the deviation from V_s enters (and leaves) the
/// exponential-growth window, then returns the normalized deviation profile
/// and the fitted rate.
pub fn extract_eigenfunction_by_evolution(
    cfg: &SimConfig,
) -> Result<EvolvedEigenfunction, BoussinesqError> {
    cfg.validate()?;
    let amp = 1.5;
    let window = (1e-4 * amp, 1e-1 * amp);
    let field = ScalarField::from_profiles(DEFAULT_DOMAIN, cfg.dxi, exact_standing_wave, |_| 0.0)?;
    let vs = field.v.clone();

    let mut prev = field;
    let mut cur = match step_lax_wendroff(&prev, cfg) {
        Ok(f) => f,
        Err(_) => return Err(BoussinesqError::Fit(WavelabError::WindowNotFound)),
    };
    let mut tau = cfg.dtau;
    let save_dt = 0.05f64.max(cfg.dtau);
    let mut next_save = save_dt;
    let mut ts = Vec::new();
    let mut devs = Vec::new();
    let mut captured: Option<ScalarField> = None;

    // Run until the deviation saturates the window top (plus a horizon cap).
    let t_max = cfg.t_end.max(120.0);
    while tau < t_max {
        match step_three_layer(&cur, &prev, cfg) {
            Ok(f) => {
                prev = std::mem::replace(&mut cur, f);
            }
            Err(_) => break,
        }
        tau += cfg.dtau;
        if tau + 1e-12 >= next_save {
            next_save += save_dt;
            let dev = cur
                .v
                .iter()
                .zip(&vs)
                .map(|(v, v0)| (v - v0).abs())
                .fold(0.0, f64::max);
            ts.push(tau);
            devs.push(dev);
            if dev >= window.1 && captured.is_none() {
                captured = Some(cur.clone());
                break;
            }
        }
    }

    let snap = captured.ok_or(BoussinesqError::Fit(WavelabError::WindowNotFound))?;
    let rate = fit_growth_rate(&ts, &devs, window)?;

    let mut bhat: Vec<f64> = snap.v.iter().zip(&vs).map(|(v, v0)| v - v0).collect();
    let mut qhat = snap.q.clone();
    let norm = bhat.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let center = bhat[bhat.len() / 2];
    let sign = if center < 0.0 { -1.0 } else { 1.0 };
    for x in &mut bhat {
        *x *= sign / norm;
    }
    for x in &mut qhat {
        *x *= sign / norm;
    }
    Ok(EvolvedEigenfunction {
        bhat: ScalarField { v: bhat, q: qhat, xi0: snap.xi0, dxi: snap.dxi },
        rate,
    })
}

/// Dominant mode of the evolution linearized about V_s.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedMode {
    /// Normalized dominant profile (max 1, positive center).
    pub profile: ScalarField,
    /// Estimated exponential rate (meaningful when `oscillation_only` is
    /// false).
    pub rate: f64,
    /// True when no exponential mode emerged (pure oscillation).
    pub oscillation_only: bool,
}

/// Evolves the linearization u_ττ = D₂u − D₄u − 2D₂(V_s·u) from the seed
/// (u, u_τ) and reports the late-time dominant profile and growth rate. The
/// field is renormalized as it grows, so only the rate carries the scale.
pub fn linearized_evolution(
    cfg: &SimConfig,
    seed_v: &[f64],
    seed_q: &[f64],
) -> Result<LinearizedMode, BoussinesqError> {
    cfg.validate()?;
    let n = ((DEFAULT_DOMAIN.1 - DEFAULT_DOMAIN.0) / cfg.dxi).round() as usize + 1;
    if seed_v.len() != n || seed_q.len() != n {
        return Err(BoussinesqError::BadConfig);
    }
    let xi0 = DEFAULT_DOMAIN.0;
    let vs: Vec<f64> = (0..n).map(|i| exact_standing_wave(xi0 + cfg.dxi * i as f64)).collect();
    let inv2 = 1.0 / (cfg.dxi * cfg.dxi);
    let inv4 = inv2 * inv2;

    // Linearized spatial operator.
    let lin = |u: &[f64], out: &mut [f64]| {
        let w: Vec<f64> = u.iter().zip(&vs).map(|(u, v)| u * v).collect();
        for k in 2..n - 2 {
            let d2u = (u[k + 1] + u[k - 1] - 2.0 * u[k]) * inv2;
            let d4u =
                (u[k + 2] + u[k - 2] - 4.0 * u[k + 1] - 4.0 * u[k - 1] + 6.0 * u[k]) * inv4;
            let d2w = (w[k + 1] + w[k - 1] - 2.0 * w[k]) * inv2;
            out[k] = d2u - d4u - 2.0 * d2w;
        }
        out[0] = 0.0;
        out[1] = 0.0;
        out[n - 2] = 0.0;
        out[n - 1] = 0.0;
    };

    let mut u_prev = seed_v.to_vec();
    let mut p_prev = seed_q.to_vec();
    // Bootstrap (midpoint step).
    let mut l = vec![0.0; n];
    lin(&u_prev, &mut l);
    let half = 0.5 * cfg.dtau;
    let mut uh = u_prev.clone();
    let mut ph = p_prev.clone();
    for k in 2..n - 2 {
        uh[k] = u_prev[k] + half * p_prev[k];
        ph[k] = p_prev[k] + half * l[k];
    }
    lin(&uh, &mut l);
    let mut u = u_prev.clone();
    let mut p = p_prev.clone();
    for k in 2..n - 2 {
        u[k] = u_prev[k] + cfg.dtau * ph[k];
        p[k] = p_prev[k] + cfg.dtau * l[k];
    }

    let mut tau = cfg.dtau;
    let sample_dt = 1.0;
    let mut next_sample = sample_dt;
    let mut log_scale = 0.0; // accumulated ln of renormalizations
    let mut samples: Vec<(f64, f64)> = Vec::new(); // (tau, ln max|u|)

    while tau < cfg.t_end {
        lin(&u, &mut l);
        let two_dt = 2.0 * cfg.dtau;
        let mut u_next = u.clone();
        let mut p_next = p.clone();
        for k in 2..n - 2 {
            p_next[k] = p_prev[k] + two_dt * l[k];
            u_next[k] = u_prev[k] + two_dt * p[k];
        }
        u_prev = std::mem::replace(&mut u, u_next);
        p_prev = std::mem::replace(&mut p, p_next);
        tau += cfg.dtau;

        let amp = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if amp > 1e6 {
            let inv = 1.0 / amp;
            for x in u.iter_mut().chain(u_prev.iter_mut()).chain(p.iter_mut()).chain(p_prev.iter_mut()) {
                *x *= inv;
            }
            log_scale += amp.ln();
        }
        if tau + 1e-12 >= next_sample {
            next_sample += sample_dt;
            let amp = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if amp > 0.0 {
                samples.push((tau, amp.ln() + log_scale));
            }
        }
    }

    // Rate per unit time over the second half of the samples; the mode is
    // exponential when the interval rates agree.
    let h = samples.len() / 2;
    let tail = &samples[h..];
    let mut rates = Vec::new();
    for win in tail.windows(2) {
        rates.push((win[1].1 - win[0].1) / (win[1].0 - win[0].0));
    }
    let (rate, oscillation_only) = if rates.len() < 3 {
        (0.0, true)
    } else {
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rates.len() as f64;
        let settled = mean > 0.05 && var.sqrt() < 0.05 * mean.abs().max(1e-300);
        (mean, !settled)
    };

    let norm = u.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let sign = if u[n / 2] < 0.0 { -1.0 } else { 1.0 };
    let profile_v: Vec<f64> = u.iter().map(|x| x * sign / norm).collect();
    let profile_q: Vec<f64> = p.iter().map(|x| x * sign / norm).collect();
    Ok(LinearizedMode {
        profile: ScalarField { v: profile_v, q: profile_q, xi0, dxi: cfg.dxi },
        rate,
        oscillation_only,
    })
}
