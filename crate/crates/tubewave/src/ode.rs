//! Adaptive Dormand–Prince 5(4) integrator with dense output and event
//! location.
//!
//! The travelling-wave profile equations are a small, very smooth ODE system
//! whose right-hand side becomes undefined past the material locking limit,
//! so the integrator lets the RHS decline an evaluation (`None`): the step is
//! rejected and retried smaller, and integration stalls cleanly at the
//! domain boundary instead of producing NaNs.

/// Integration failure.
#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    /// Step size underflowed (usually: the RHS keeps declining evaluations
    /// because the trajectory is leaving its domain).
    StepUnderflow { t: f64 },
    /// The step budget ran out before reaching the end of the interval.
    MaxStepsExceeded { t: f64 },
    /// Bad arguments (non-finite state, empty interval, ...).
    BadInput(&'static str),
}

impl std::fmt::Display for OdeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OdeError::StepUnderflow { t } => write!(f, "step size underflow at t = {t}"),
            OdeError::MaxStepsExceeded { t } => write!(f, "step budget exhausted at t = {t}"),
            OdeError::BadInput(m) => write!(f, "bad integrator input: {m}"),
        }
    }
}

impl std::error::Error for OdeError {}

/// Sign-change directions an event responds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Any,
    /// Negative to positive.
    Up,
    /// Positive to negative.
    Down,
}

/// A scalar event function g(t, y); a root of g along the trajectory is
/// located to high accuracy via the dense output.
pub struct Event<'a, const N: usize> {
    pub g: Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>,
    pub direction: Direction,
    /// Terminal events stop the integration at the located root.
    pub terminal: bool,
}

impl<'a, const N: usize> Event<'a, N> {
    pub fn new(g: impl Fn(f64, &[f64; N]) -> f64 + 'a, direction: Direction, terminal: bool) -> Self {
        Self { g: Box::new(g), direction, terminal }
    }
}

/// A located event occurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<const N: usize> {
    /// Index into the event list passed to [`integrate`].
    pub index: usize,
    pub t: f64,
    pub y: [f64; N],
}

/// How an integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    ReachedEnd,
    /// A terminal event fired (its index).
    Terminated(usize),
    /// The RHS kept declining evaluations; `t` is as far as the trajectory
    /// got before the domain boundary.
    Stalled,
}

/// Integrator output.
#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    /// Sample times: the requested `t_eval` points actually covered, or every
    /// accepted step when no `t_eval` was given.
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub events: Vec<EventHit<N>>,
    pub status: Status,
    /// Final time and state (the event location for a terminated run).
    pub t_end: f64,
    pub y_end: [f64; N],
    pub n_steps: usize,
    pub n_rejected: usize,
}

/// Tolerances and step-size limits.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` selects one automatically.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h0: None, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (error estimator weights, including the FSAL stage).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output weights for the fifth interpolation coefficient.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Quartic Hermite-type interpolant over one accepted step.
#[derive(Debug, Clone, Copy)]
struct Dense<const N: usize> {
    t0: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Dense<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.r[0][i]
                + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
        out
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates dy/dt = f(t, y) from `t0` to `t_end` (either direction).
///
/// `f` returns `None` to decline an evaluation outside its domain; the step
/// is retried smaller and the run ends with [`Status::Stalled`] once no
/// progress is possible. With `t_eval = Some(pts)` the solution is sampled
/// at exactly those times (they must be sorted in the direction of
/// integration); otherwise every accepted step is recorded.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> Option<[f64; N]>,
    t0: f64,
    t_end: f64,
    y0: [f64; N],
    t_eval: Option<&[f64]>,
    events: &[Event<'_, N>],
    cfg: &Integrator,
) -> Result<Solution<N>, OdeError> {
    if !y0.iter().all(|v| v.is_finite()) || !t0.is_finite() || !t_end.is_finite() {
        return Err(OdeError::BadInput("non-finite initial data"));
    }
    if t_end == t0 {
        return Err(OdeError::BadInput("empty integration interval"));
    }
    let dir = (t_end - t0).signum();

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y).ok_or(OdeError::BadInput("RHS undefined at the initial state"))?;

    let sc = |a: &[f64; N], b: &[f64; N]| -> [f64; N] {
        let mut s = [0.0; N];
        for i in 0..N {
            s[i] = cfg.atol + cfg.rtol * a[i].abs().max(b[i].abs());
        }
        s
    };

    // Initial step: conservative automatic guess unless one was supplied.
    let mut h = match cfg.h0 {
        Some(h0) => h0.abs() * dir,
        None => {
            let s = sc(&y, &y);
            let d0: f64 = (0..N).map(|i| (y[i] / s[i]).powi(2)).sum::<f64>().sqrt();
            let d1: f64 = (0..N).map(|i| (k1[i] / s[i]).powi(2)).sum::<f64>().sqrt();
            let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h = h.min((t_end - t0).abs() * 0.1).min(cfg.h_max).max(1e-10);
            h * dir
        }
    };

    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(t, &y)).collect();

    let mut out_t = Vec::new();
    let mut out_y = Vec::new();
    let mut eval_idx = 0usize;
    if t_eval.is_none() {
        out_t.push(t);
        out_y.push(y);
    } else if let Some(pts) = t_eval {
        // Emit any points at exactly t0.
        while eval_idx < pts.len() && pts[eval_idx] == t {
            out_t.push(t);
            out_y.push(y);
            eval_idx += 1;
        }
    }

    let mut hits: Vec<EventHit<N>> = Vec::new();
    let mut n_steps = 0usize;
    let mut n_rejected = 0usize;
    let mut stall_shrinks = 0usize;

    loop {
        if n_steps >= cfg.max_steps {
            return Err(OdeError::MaxStepsExceeded { t });
        }
        if (t_end - t) * dir <= 0.0 {
            break;
        }
        if h.abs() > (t_end - t).abs() {
            h = t_end - t;
        }
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            // Cannot advance: either rejection spiral or domain stall.
            let status = if stall_shrinks > 0 { Status::Stalled } else { Status::ReachedEnd };
            if status == Status::ReachedEnd {
                return Err(OdeError::StepUnderflow { t });
            }
            return Ok(finish(out_t, out_y, hits, status, t, y, n_steps, n_rejected));
        }

        // Stage evaluations; any None rejects the step.
        let attempt = (|| -> Option<([f64; N], [f64; N], [[f64; N]; 7])> {
            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = f(
                t + h,
                &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + h, &y_new)?;
            let mut err = [0.0; N];
            for i in 0..N {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            Some((y_new, err, [k1, k2, k3, k4, k5, k6, k7]))
        })();

        let Some((y_new, err, k)) = attempt else {
            h *= 0.5;
            n_rejected += 1;
            stall_shrinks += 1;
            continue;
        };
        stall_shrinks = 0;

        let s = sc(&y, &y_new);
        let err_norm =
            ((0..N).map(|i| (err[i] / s[i]).powi(2)).sum::<f64>() / N as f64).sqrt();

        if !err_norm.is_finite() {
            h *= 0.2;
            n_rejected += 1;
            continue;
        }
        if err_norm > 1.0 {
            let fac = (0.9 * err_norm.powf(-0.2)).max(0.2);
            h *= fac;
            n_rejected += 1;
            continue;
        }

        // Accepted. Build the dense interpolant.
        n_steps += 1;
        let mut r = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k[6][i] - bspl;
            r[4][i] = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        let dense = Dense { t0: t, h, r };
        let t_new = t + h;

        // Event scan over [t, t_new].
        let mut terminal_hit: Option<EventHit<N>> = None;
        for (idx, ev) in events.iter().enumerate() {
            let g0 = g_prev[idx];
            let g1 = (ev.g)(t_new, &y_new);
            let crossed = match ev.direction {
                Direction::Any => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
                Direction::Up => g0 < 0.0 && g1 >= 0.0,
                Direction::Down => g0 > 0.0 && g1 <= 0.0,
            };
            if crossed {
                let (te, ye) = locate_root(&ev.g, &dense, t, t_new, g0);
                let hit = EventHit { index: idx, t: te, y: ye };
                if ev.terminal {
                    match &terminal_hit {
                        Some(prev) if (prev.t - t) * dir <= (te - t) * dir => {}
                        _ => terminal_hit = Some(hit),
                    }
                } else {
                    hits.push(hit);
                }
            }
            g_prev[idx] = g1;
        }

        let (t_stop, y_stop, stopped) = match &terminal_hit {
            Some(hit) => (hit.t, hit.y, true),
            None => (t_new, y_new, false),
        };

        // Emit requested sample points covered by this step.
        if let Some(pts) = t_eval {
            while eval_idx < pts.len() && (pts[eval_idx] - t_stop) * dir <= 0.0 {
                let te = pts[eval_idx];
                if (te - t) * dir < 0.0 {
                    return Err(OdeError::BadInput("t_eval must be sorted along the integration"));
                }
                out_t.push(te);
                out_y.push(dense.eval(te));
                eval_idx += 1;
            }
        } else {
            out_t.push(t_stop);
            out_y.push(y_stop);
        }

        if stopped {
            let hit = terminal_hit.expect("checked above");
            hits.push(hit);
            return Ok(finish(
                out_t,
                out_y,
                hits,
                Status::Terminated(hit.index),
                hit.t,
                hit.y,
                n_steps,
                n_rejected,
            ));
        }

        t = t_new;
        y = y_new;
        k1 = k[6]; // FSAL
        let fac = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).clamp(-cfg.h_max, cfg.h_max);
        if h == 0.0 {
            h = 1e-14 * dir;
        }
    }

    Ok(finish(out_t, out_y, hits, Status::ReachedEnd, t, y, n_steps, n_rejected))
}

#[allow(clippy::too_many_arguments)]
fn finish<const N: usize>(
    t: Vec<f64>,
    y: Vec<[f64; N]>,
    mut events: Vec<EventHit<N>>,
    status: Status,
    t_end: f64,
    y_end: [f64; N],
    n_steps: usize,
    n_rejected: usize,
) -> Solution<N> {
    events.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("event times are finite"));
    Solution { t, y, events, status, t_end, y_end, n_steps, n_rejected }
}

/// Bisection for the event root on one step's dense output.
fn locate_root<const N: usize>(
    g: &dyn Fn(f64, &[f64; N]) -> f64,
    dense: &Dense<N>,
    mut a: f64,
    mut b: f64,
    ga: f64,
) -> (f64, [f64; N]) {
    let mut sign_a = ga > 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let gm = g(mid, &dense.eval(mid));
        if gm == 0.0 {
            return (mid, dense.eval(mid));
        }
        if (gm > 0.0) == sign_a {
            a = mid;
            sign_a = gm > 0.0;
        } else {
            b = mid;
        }
    }
    (b, dense.eval(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let f = |_t: f64, y: &[f64; 1]| Some([-y[0]]);
        let sol = integrate(f, 0.0, 5.0, [1.0], None, &[], &Integrator::default()).unwrap();
        assert_eq!(sol.status, Status::ReachedEnd);
        assert_relative_eq!(sol.y_end[0], (-5.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn dense_output_samples_harmonic_oscillator() {
        let f = |_t: f64, y: &[f64; 2]| Some([y[1], -y[0]]);
        let pts: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let sol =
            integrate(f, 0.0, 10.0, [1.0, 0.0], Some(&pts), &[], &Integrator::default()).unwrap();
        assert_eq!(sol.t.len(), pts.len());
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert_relative_eq!(y[0], t.cos(), epsilon = 1e-8);
            assert_relative_eq!(y[1], -t.sin(), epsilon = 1e-8);
        }
    }

    #[test]
    fn event_locates_cosine_zero() {
        let f = |_t: f64, y: &[f64; 2]| Some([y[1], -y[0]]);
        let ev = Event::new(|_t, y: &[f64; 2]| y[0], Direction::Down, true);
        let sol =
            integrate(f, 0.0, 10.0, [1.0, 0.0], None, &[ev], &Integrator::default()).unwrap();
        assert_eq!(sol.status, Status::Terminated(0));
        assert_relative_eq!(sol.t_end, std::f64::consts::FRAC_PI_2, epsilon = 1e-10);
        assert_relative_eq!(sol.y_end[1], -1.0, epsilon = 1e-9);
    }

    #[test]
    fn non_terminal_events_record_all_crossings() {
        let f = |_t: f64, y: &[f64; 2]| Some([y[1], -y[0]]);
        let ev = Event::new(|_t, y: &[f64; 2]| y[0], Direction::Any, false);
        let sol =
            integrate(f, 0.0, 10.0, [1.0, 0.0], None, &[ev], &Integrator::default()).unwrap();
        // cos t = 0 at π/2, 3π/2, 5π/2 within [0, 10].
        assert_eq!(sol.events.len(), 3);
        for (k, hit) in sol.events.iter().enumerate() {
            let expect = std::f64::consts::FRAC_PI_2 * (2 * k + 1) as f64;
            assert_relative_eq!(hit.t, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn backward_integration_works() {
        let f = |_t: f64, y: &[f64; 1]| Some([-y[0]]);
        let sol = integrate(f, 0.0, -3.0, [1.0], None, &[], &Integrator::default()).unwrap();
        assert_relative_eq!(sol.y_end[0], 3.0f64.exp(), max_relative = 1e-9);
    }

    #[test]
    fn rhs_domain_boundary_causes_clean_stall() {
        // y' = 1 but the RHS is undefined for y > 1: the run must stall at
        // y = 1 rather than error or overshoot.
        let f = |_t: f64, y: &[f64; 1]| if y[0] <= 1.0 { Some([1.0]) } else { None };
        let sol = integrate(f, 0.0, 5.0, [0.0], None, &[], &Integrator::default()).unwrap();
        assert_eq!(sol.status, Status::Stalled);
        assert!(sol.t_end <= 1.0 + 1e-9);
        assert!(sol.t_end > 1.0 - 1e-6, "stalled too early: {}", sol.t_end);
    }

    #[test]
    fn fifth_order_convergence_on_polynomial() {
        // y' = 5t⁴ integrates exactly (the scheme is order 5).
        let f = |t: f64, _y: &[f64; 1]| Some([5.0 * t.powi(4)]);
        let cfg = Integrator { rtol: 1e-6, atol: 1e-8, ..Default::default() };
        let sol = integrate(f, 0.0, 2.0, [0.0], None, &[], &cfg).unwrap();
        assert_relative_eq!(sol.y_end[0], 32.0, max_relative = 1e-12);
    }
}
