//! Shared run diagnostics: crest tracking, speed and growth-rate fits,
//! split/blowup/self-similarity detectors, level-crossing (kink) tracking,
//! and conservation monitors.
//!
//! Everything here is a pure function of recorded snapshots or series, so
//! every verdict is reproducible from saved run output.

/// Errors from fits and detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavelabError {
    /// Fewer than the required samples inside the fit window.
    InsufficientSamples,
    /// The series never enters the requested amplitude window.
    WindowNotFound,
}

impl std::fmt::Display for WavelabError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WavelabError::InsufficientSamples => write!(f, "not enough samples in the fit window"),
            WavelabError::WindowNotFound => write!(f, "series never enters the amplitude window"),
        }
    }
}

impl std::error::Error for WavelabError {}

/// One recorded profile on a uniform grid: value v(x₀ + i·Δx) at time t.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x0: f64,
    pub dx: f64,
    pub v: Vec<f64>,
}

impl Snapshot {
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.dx * i as f64
    }

    /// Linear interpolation, clamped to the grid ends.
    pub fn sample(&self, x: f64) -> f64 {
        let n = self.v.len();
        if n == 0 {
            return 0.0;
        }
        let s = (x - self.x0) / self.dx;
        if s <= 0.0 {
            return self.v[0];
        }
        if s >= (n - 1) as f64 {
            return self.v[n - 1];
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        self.v[i] * (1.0 - w) + self.v[i + 1] * w
    }
}

/// Timestamped run event.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEvent {
    pub t: f64,
    pub kind: EventKind,
    pub payload: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Blowup,
    Split,
    SelfSimilar,
    /// A uniform state traversed by the run lost short-wave correctness.
    NonCorrect,
    /// Grid-scale sawtooth detected in a σ₁ < 0 zone.
    Sawtooth,
    /// The material locking limit was reached.
    Locking,
    TrackLoss,
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EventKind::Blowup => "blowup",
            EventKind::Split => "split",
            EventKind::SelfSimilar => "self_similar",
            EventKind::NonCorrect => "non_correct",
            EventKind::Sawtooth => "sawtooth",
            EventKind::Locking => "locking",
            EventKind::TrackLoss => "track_loss",
        };
        write!(f, "{s}")
    }
}

/// Per-run diagnostics: amplitude history, crest tracks, events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsSeries {
    pub t: Vec<f64>,
    pub max_amp: Vec<f64>,
    pub tracks: Vec<Track>,
    pub events: Vec<RunEvent>,
}

impl DiagnosticsSeries {
    pub fn push(&mut self, t: f64, max_amp: f64) {
        debug_assert!(self.t.last().is_none_or(|last| t > *last), "time must increase");
        self.t.push(t);
        self.max_amp.push(max_amp);
    }

    pub fn event(&mut self, t: f64, kind: EventKind, payload: impl Into<String>) {
        self.events.push(RunEvent { t, kind, payload: payload.into() });
    }
}

/// One crest (or level-crossing) trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Track {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub amp: Vec<f64>,
    /// Time at which the tracked feature disappeared, if it did.
    pub lost_at: Option<f64>,
}

/// Shared detector thresholds. One block for every model, so verdicts are
/// comparable across experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Amplitude beyond which a run is declared blown up.
    pub blowup_guard: f64,
    /// Minimum crest amplitude that counts as a pulse in split detection.
    pub split_min_amp: f64,
    /// Minimum crest separation of a split pair.
    pub split_min_separation: f64,
    /// Frames over which the pair must persist with growing separation.
    pub split_persistence: usize,
    /// Maximum relative collapse error for a self-similar verdict.
    pub self_similar_tol: f64,
    /// Amplitude window (low, high) for exponential growth-rate fits.
    pub rate_window: (f64, f64),
    /// Largest position jump a track may take between frames.
    pub max_jump: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            blowup_guard: 50.0,
            split_min_amp: 0.25,
            split_min_separation: 10.0,
            split_persistence: 5,
            self_similar_tol: 0.03,
            rate_window: (1e-4, 1e-1),
            max_jump: 5.0,
        }
    }
}

/// Crests (strict local maxima above `threshold`) of one profile, with
/// sub-grid position refinement by a parabola through the three stencil
/// values.
pub fn find_crests(snap: &Snapshot, threshold: f64) -> Vec<(f64, f64)> {
    let v = &snap.v;
    let mut out = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] >= v[i - 1] && v[i] > v[i + 1] && v[i] >= threshold {
            let denom = v[i - 1] - 2.0 * v[i] + v[i + 1];
            let offset = if denom.abs() > 1e-300 {
                0.5 * (v[i - 1] - v[i + 1]) / denom
            } else {
                0.0
            };
            let offset = offset.clamp(-0.5, 0.5);
            out.push((snap.x(i) + offset * snap.dx, v[i]));
        }
    }
    out
}

/// Links crests across frames by nearest-neighbour continuation. Lost
/// tracks stay in the output with `lost_at` set; crests that match no track
/// start new tracks.
pub fn track_pulses(snapshots: &[Snapshot], threshold: f64, max_jump: f64) -> Vec<Track> {
    let mut tracks: Vec<Track> = Vec::new();
    for snap in snapshots {
        let crests = find_crests(snap, threshold);
        let mut used = vec![false; crests.len()];
        for track in tracks.iter_mut().filter(|tr| tr.lost_at.is_none()) {
            let last = *track.x.last().expect("live track has samples");
            let mut best: Option<(usize, f64)> = None;
            for (j, (x, _)) in crests.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let d = (x - last).abs();
                if d <= max_jump && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            match best {
                Some((j, _)) => {
                    used[j] = true;
                    track.t.push(snap.t);
                    track.x.push(crests[j].0);
                    track.amp.push(crests[j].1);
                }
                None => track.lost_at = Some(snap.t),
            }
        }
        for (j, (x, a)) in crests.iter().enumerate() {
            if !used[j] {
                tracks.push(Track {
                    t: vec![snap.t],
                    x: vec![*x],
                    amp: vec![*a],
                    lost_at: None,
                });
            }
        }
    }
    tracks
}

/// Tracks the position where the profile crosses `level`, starting from the
/// crossing nearest `x_hint` and following the nearest crossing frame to
/// frame (a kink front, for instance).
pub fn track_level_crossing(snapshots: &[Snapshot], level: f64, x_hint: f64) -> Track {
    let mut track = Track::default();
    let mut anchor = x_hint;
    for snap in snapshots {
        let mut best: Option<(f64, f64)> = None;
        for i in 0..snap.v.len().saturating_sub(1) {
            let (a, b) = (snap.v[i] - level, snap.v[i + 1] - level);
            if a == 0.0 || (a > 0.0) != (b > 0.0) {
                let w = if (a - b).abs() > 1e-300 { a / (a - b) } else { 0.0 };
                let x = snap.x(i) + w * snap.dx;
                let d = (x - anchor).abs();
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((x, d));
                }
            }
        }
        if let Some((x, _)) = best {
            anchor = x;
            track.t.push(snap.t);
            track.x.push(x);
            track.amp.push(level);
        } else if track.lost_at.is_none() && !track.t.is_empty() {
            track.lost_at = Some(snap.t);
        }
    }
    track
}

/// Least-squares speed of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedFit {
    pub speed: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Least-squares slope of x(t) over samples with t inside `window`
/// (inclusive). Requires at least 10 samples.
pub fn fit_speed(track: &Track, window: (f64, f64)) -> Result<SpeedFit, WavelabError> {
    let pairs: Vec<(f64, f64)> = track
        .t
        .iter()
        .zip(&track.x)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, x)| (*t, *x))
        .collect();
    let n = pairs.len();
    if n < 10 {
        return Err(WavelabError::InsufficientSamples);
    }
    let nf = n as f64;
    let tbar = pairs.iter().map(|(t, _)| t).sum::<f64>() / nf;
    let xbar = pairs.iter().map(|(_, x)| x).sum::<f64>() / nf;
    let sxx: f64 = pairs.iter().map(|(t, _)| (t - tbar) * (t - tbar)).sum();
    let sxy: f64 = pairs.iter().map(|(t, x)| (t - tbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return Err(WavelabError::InsufficientSamples);
    }
    let speed = sxy / sxx;
    let ss_res: f64 = pairs
        .iter()
        .map(|(t, x)| {
            let pred = xbar + speed * (t - tbar);
            (x - pred) * (x - pred)
        })
        .sum();
    let stderr = (ss_res / ((nf - 2.0) * sxx)).max(0.0).sqrt();
    Ok(SpeedFit { speed, stderr, n })
}

/// First time the amplitude series exceeds the blowup guard.
pub fn detect_blowup(t: &[f64], max_amp: &[f64], guard: f64) -> Option<f64> {
    t.iter().zip(max_amp).find(|(_, a)| **a > guard).map(|(t, _)| *t)
}

/// A detected split: two pulses moving apart.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVerdict {
    /// Time at which the split criteria were first met.
    pub t: f64,
    /// Crest separation at detection.
    pub separation: f64,
    pub left_speed: SpeedFit,
    pub right_speed: SpeedFit,
}

/// Detects a split: two crests above the amplitude floor, separated by at
/// least the configured distance, with separation growing over the
/// persistence window. Speeds are fitted to the outermost crest positions
/// from detection to the end of the record.
pub fn detect_split(snapshots: &[Snapshot], cfg: &DetectorConfig) -> Option<SplitVerdict> {
    // Per-frame outermost crest pair.
    let mut seps: Vec<Option<(f64, f64, f64)>> = Vec::with_capacity(snapshots.len()); // (t, left, right)
    for snap in snapshots {
        let crests = find_crests(snap, cfg.split_min_amp);
        if crests.len() >= 2 {
            let left = crests.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
            let right = crests.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
            seps.push(Some((snap.t, left, right)));
        } else {
            seps.push(None);
        }
    }

    let mut detect_idx = None;
    'outer: for i in 0..seps.len() {
        let Some((_, l, r)) = seps[i] else { continue };
        if r - l < cfg.split_min_separation || i < cfg.split_persistence {
            continue;
        }
        let mut prev_sep = r - l;
        for back in 1..=cfg.split_persistence {
            let Some((_, lp, rp)) = seps[i - back] else { continue 'outer };
            let sep_b = rp - lp;
            if sep_b >= prev_sep {
                continue 'outer;
            }
            prev_sep = sep_b;
        }
        detect_idx = Some(i);
        break;
    }
    let i0 = detect_idx?;
    let (t_detect, l0, r0) = seps[i0].expect("detection frame has a pair");

    let mut left = Track::default();
    let mut right = Track::default();
    for sep in seps.iter().skip(i0).flatten() {
        let (t, l, r) = *sep;
        left.t.push(t);
        left.x.push(l);
        left.amp.push(0.0);
        right.t.push(t);
        right.x.push(r);
        right.amp.push(0.0);
    }
    let window = (t_detect, *left.t.last()?);
    Some(SplitVerdict {
        t: t_detect,
        separation: r0 - l0,
        left_speed: fit_speed(&left, window).ok()?,
        right_speed: fit_speed(&right, window).ok()?,
    })
}

/// Self-similarity report: how well late profiles collapse onto a single
/// function of η = (x − center)/(t − t_origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarReport {
    pub collapse_error: f64,
    pub verdict: bool,
}

/// Compares the last three snapshots in similarity variables. The collapse
/// error is the maximum spread between profiles at common η, relative to
/// the overall value range.
pub fn detect_self_similar(
    snapshots: &[Snapshot],
    center: f64,
    t_origin: f64,
    cfg: &DetectorConfig,
) -> Option<SelfSimilarReport> {
    let late: Vec<&Snapshot> =
        snapshots.iter().filter(|s| s.t - t_origin > 0.0).collect();
    if late.len() < 3 {
        return None;
    }
    let chosen = &late[late.len() - 3..];

    // Common η range covered by every chosen profile.
    let mut eta_lo = f64::NEG_INFINITY;
    let mut eta_hi = f64::INFINITY;
    for s in chosen {
        let dt = s.t - t_origin;
        let lo = (s.x0 - center) / dt;
        let hi = (s.x(s.v.len() - 1) - center) / dt;
        eta_lo = eta_lo.max(lo.min(hi));
        eta_hi = eta_hi.min(lo.max(hi));
    }
    if !(eta_hi > eta_lo) {
        return None;
    }

    const M: usize = 400;
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    let mut spread_max: f64 = 0.0;
    for j in 0..=M {
        let eta = eta_lo + (eta_hi - eta_lo) * j as f64 / M as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in chosen {
            let val = s.sample(center + eta * (s.t - t_origin));
            lo = lo.min(val);
            hi = hi.max(val);
        }
        spread_max = spread_max.max(hi - lo);
        vmin = vmin.min(lo);
        vmax = vmax.max(hi);
    }
    let range = (vmax - vmin).max(1e-300);
    let collapse_error = spread_max / range;
    Some(SelfSimilarReport { collapse_error, verdict: collapse_error < cfg.self_similar_tol })
}

/// Exponential-rate fit over an amplitude window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub stderr: f64,
    pub n: usize,
    /// Time span (first, last) of the fitted window.
    pub t_span: (f64, f64),
}

/// Fits ln(amp) against t over the samples whose amplitude lies inside
/// `window` (the exponential-growth regime between noise floor and
/// nonlinear saturation).
pub fn fit_growth_rate(
    t: &[f64],
    amp: &[f64],
    window: (f64, f64),
) -> Result<RateFit, WavelabError> {
    let pairs: Vec<(f64, f64)> = t
        .iter()
        .zip(amp)
        .filter(|(_, a)| **a > window.0 && **a < window.1 && **a > 0.0)
        .map(|(t, a)| (*t, a.ln()))
        .collect();
    let n = pairs.len();
    if n < 5 {
        return Err(WavelabError::WindowNotFound);
    }
    let nf = n as f64;
    let tbar = pairs.iter().map(|(t, _)| t).sum::<f64>() / nf;
    let ybar = pairs.iter().map(|(_, y)| y).sum::<f64>() / nf;
    let sxx: f64 = pairs.iter().map(|(t, _)| (t - tbar) * (t - tbar)).sum();
    if sxx == 0.0 {
        return Err(WavelabError::WindowNotFound);
    }
    let sxy: f64 = pairs.iter().map(|(t, y)| (t - tbar) * (y - ybar)).sum();
    let rate = sxy / sxx;
    let ss_res: f64 = pairs
        .iter()
        .map(|(t, y)| {
            let pred = ybar + rate * (t - tbar);
            (y - pred) * (y - pred)
        })
        .sum();
    let stderr = (ss_res / ((nf - 2.0).max(1.0) * sxx)).max(0.0).sqrt();
    Ok(RateFit { rate, stderr, n, t_span: (pairs[0].0, pairs[n - 1].0) })
}

/// Largest relative excursion of a conserved-quantity series from its first
/// value (e.g. the discrete gas mass).
pub fn max_relative_drift(series: &[f64]) -> f64 {
    let Some(&first) = series.first() else { return 0.0 };
    let scale = first.abs().max(1e-300);
    series.iter().map(|s| (s - first).abs() / scale).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn gaussian_snapshot(t: f64, centers: &[(f64, f64)]) -> Snapshot {
        let x0 = -50.0;
        let dx = 0.1;
        let n = 1001;
        let v = (0..n)
            .map(|i| {
                let x = x0 + dx * i as f64;
                centers
                    .iter()
                    .map(|(c, a)| a * (-(x - c) * (x - c) / 4.0).exp())
                    .sum()
            })
            .collect();
        Snapshot { t, x0, dx, v }
    }

    #[test]
    fn stationary_pulse_gives_one_zero_slope_track() {
        let snaps: Vec<Snapshot> =
            (0..20).map(|i| gaussian_snapshot(i as f64, &[(3.0, 1.0)])).collect();
        let tracks = track_pulses(&snaps, 0.25, 5.0);
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].t.len(), 20);
        assert!(tracks[0].lost_at.is_none());
        let fit = fit_speed(&tracks[0], (0.0, 19.0)).unwrap();
        assert_abs_diff_eq!(fit.speed, 0.0, epsilon = 1e-12);
        for x in &tracks[0].x {
            assert_abs_diff_eq!(*x, 3.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn empty_field_gives_no_tracks() {
        let snaps: Vec<Snapshot> = (0..5)
            .map(|i| Snapshot { t: i as f64, x0: 0.0, dx: 0.1, v: vec![0.0; 100] })
            .collect();
        assert!(track_pulses(&snaps, 0.25, 5.0).is_empty());
    }

    #[test]
    fn vanishing_pulse_is_recorded_as_lost() {
        let mut snaps: Vec<Snapshot> =
            (0..10).map(|i| gaussian_snapshot(i as f64, &[(0.0, 1.0)])).collect();
        snaps.extend((10..15).map(|i| gaussian_snapshot(i as f64, &[(0.0, 0.01)])));
        let tracks = track_pulses(&snaps, 0.25, 5.0);
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].lost_at, Some(10.0));
        assert_eq!(tracks[0].t.len(), 10);
    }

    #[test]
    fn exact_linear_trajectory_fits_exactly() {
        let track = Track {
            t: (0..50).map(|i| i as f64 * 0.5).collect(),
            x: (0..50).map(|i| 3.0 + 2.0 * (i as f64 * 0.5)).collect(),
            amp: vec![1.0; 50],
            lost_at: None,
        };
        let fit = fit_speed(&track, (0.0, 100.0)).unwrap();
        assert_relative_eq!(fit.speed, 2.0, max_relative = 1e-13);
        assert!(fit.stderr < 1e-10);
        // Shifting the time origin leaves the slope unchanged.
        let shifted = Track {
            t: track.t.iter().map(|t| t + 17.0).collect(),
            ..track.clone()
        };
        let fs = fit_speed(&shifted, (0.0, 200.0)).unwrap();
        assert_relative_eq!(fs.speed, fit.speed, max_relative = 1e-12);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let track = Track {
            t: vec![0.0, 1.0, 2.0],
            x: vec![0.0, 1.0, 2.0],
            amp: vec![1.0; 3],
            lost_at: None,
        };
        assert_eq!(fit_speed(&track, (0.0, 10.0)), Err(WavelabError::InsufficientSamples));
    }

    #[test]
    fn synthetic_two_pulse_separation_detected_as_split() {
        // Standing pulse until t = 5, then a pair moving apart at ±0.5.
        let snaps: Vec<Snapshot> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.25;
                if t < 5.0 {
                    gaussian_snapshot(t, &[(0.0, 1.0)])
                } else {
                    let d = 0.5 * (t - 5.0);
                    gaussian_snapshot(t, &[(-d, 0.8), (d, 0.8)])
                }
            })
            .collect();
        let cfg = DetectorConfig::default();
        let split = detect_split(&snaps, &cfg).expect("split must be detected");
        // Separation reaches 10 when 2·0.5·(t−5) = 10, i.e. t = 15; the
        // persistence window delays detection by a few frames.
        assert!(split.t >= 15.0 && split.t < 18.0, "t = {}", split.t);
        assert_relative_eq!(split.right_speed.speed, 0.5, max_relative = 0.01);
        assert_relative_eq!(split.left_speed.speed, -0.5, max_relative = 0.01);
    }

    #[test]
    fn standing_pulse_is_not_a_split() {
        let snaps: Vec<Snapshot> =
            (0..100).map(|i| gaussian_snapshot(i as f64, &[(0.0, 1.5)])).collect();
        assert_eq!(detect_split(&snaps, &DetectorConfig::default()), None);
    }

    #[test]
    fn blowup_detector_reports_first_guard_crossing() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let amp: Vec<f64> = t.iter().map(|t| (t * 1.2).exp()).collect();
        let hit = detect_blowup(&t, &amp, 50.0).unwrap();
        assert!(amp[t.iter().position(|x| *x == hit).unwrap()] > 50.0);
        assert!(hit > 3.2 && hit < 3.4, "t = {hit}");
        assert_eq!(detect_blowup(&t, &amp, 1e6), None);
    }

    #[test]
    fn exact_similarity_solution_collapses() {
        let profile = |eta: f64| (1.0 + (eta / 2.0).tanh()) * 0.75;
        let snaps: Vec<Snapshot> = [20.0, 25.0, 30.0]
            .iter()
            .map(|&t| {
                let x0 = -60.0;
                let dx = 0.05;
                let v = (0..2401).map(|i| profile((x0 + dx * i as f64) / t)).collect();
                Snapshot { t, x0, dx, v }
            })
            .collect();
        let rep =
            detect_self_similar(&snaps, 0.0, 0.0, &DetectorConfig::default()).unwrap();
        assert!(rep.verdict);
        assert!(rep.collapse_error < 1e-3, "collapse error {}", rep.collapse_error);
        // The same profiles against a wrong origin do not collapse.
        let bad = detect_self_similar(&snaps, 0.0, 15.0, &DetectorConfig::default()).unwrap();
        assert!(bad.collapse_error > rep.collapse_error * 10.0);
    }

    #[test]
    fn exponential_series_rate_is_recovered() {
        let t: Vec<f64> = (0..3000).map(|i| i as f64 * 0.01).collect();
        let amp: Vec<f64> = t.iter().map(|t| 1e-6 * (0.5 * t).exp()).collect();
        let fit = fit_growth_rate(&t, &amp, (1e-4, 1e-1)).unwrap();
        assert_relative_eq!(fit.rate, 0.5, max_relative = 1e-6);
        assert!(fit.n > 100);
        // A window the series never reaches is an error.
        assert_eq!(
            fit_growth_rate(&t, &amp, (1e9, 1e10)),
            Err(WavelabError::WindowNotFound)
        );
    }

    #[test]
    fn level_crossing_tracks_a_moving_front() {
        let snaps: Vec<Snapshot> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.5;
                let x0 = -50.0;
                let dx = 0.1;
                let front = 2.0 + 0.8 * t;
                let v = (0..1001)
                    .map(|j| 1.0 + 0.5 * (1.0 + ((x0 + dx * j as f64 - front) / 1.5).tanh()))
                    .collect();
                Snapshot { t, x0, dx, v }
            })
            .collect();
        let track = track_level_crossing(&snaps, 1.5, 0.0);
        assert_eq!(track.t.len(), 40);
        let fit = fit_speed(&track, (0.0, 100.0)).unwrap();
        assert_relative_eq!(fit.speed, 0.8, max_relative = 1e-3);
    }

    #[test]
    fn drift_monitor_measures_relative_excursion() {
        assert_abs_diff_eq!(max_relative_drift(&[2.0, 2.0, 2.0]), 0.0);
        assert_relative_eq!(
            max_relative_drift(&[2.0, 2.002, 1.999]),
            0.001,
            max_relative = 1e-12
        );
    }

    proptest! {
        #[test]
        fn speed_fit_scales_exactly_with_power_of_two(exp in -8i32..8) {
            let alpha = 2f64.powi(exp);
            let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.3).collect();
            let x: Vec<f64> = t.iter().map(|t| 1.7 + 0.9 * t + (t * 10.0).sin() * 0.01).collect();
            let base = Track { t: t.clone(), x: x.clone(), amp: vec![1.0; 40], lost_at: None };
            let scaled = Track {
                t,
                x: x.iter().map(|v| v * alpha).collect(),
                amp: vec![1.0; 40],
                lost_at: None,
            };
            let f0 = fit_speed(&base, (0.0, 100.0)).unwrap();
            let f1 = fit_speed(&scaled, (0.0, 100.0)).unwrap();
            prop_assert_eq!(f1.speed, f0.speed * alpha);
        }
    }
}
