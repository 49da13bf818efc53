//! Lobe detection, classification and the sidelobe-to-peak ratio (spr).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array_model::{grating_lobe_directions, long_period_info, lpgl_directions, SteeringSpec};
use crate::num::{sin_cos_deg, Real};
use crate::radiation::PatternCut;

/// Default detection floor, relative to the global maximum of the cut.
pub const DEFAULT_FLOOR: f64 = 1e-8;
/// Default matching tolerance between a detected lobe and a prediction.
pub const DEFAULT_TOLERANCE_DEG: f64 = 0.1;
/// Main-lobe search window, in multiples of the reference FWHM.
pub const EXCLUSION_FWHM_MULTIPLE: f64 = 3.0;
/// A lobe outside the window counts as a missteer only when it beats the
/// in-window maximum by more than this relative margin.
pub const DEFAULT_MISSTEER_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LobeError {
    #[error("cut has {0} samples; at least 3 are required")]
    EmptyCut(usize),
    #[error("no lobe within ±{halfwidth}° of the target {target}°")]
    NoMainLobe { target: f64, halfwidth: f64 },
    #[error(
        "missteer: strongest lobe at {observed}° is {ratio} times the strongest lobe near the target {target}°"
    )]
    Missteer {
        target: f64,
        observed: f64,
        /// Intensity of the strongest lobe over the in-window maximum.
        ratio: f64,
    },
    #[error("half-maximum crossing not found on either side of the lobe at {0}°")]
    NoHalfMaximum(f64),
    #[error("cannot average an empty set of reports")]
    EmptyAverage,
}

/// A strict local maximum of a cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedPeak<T> {
    pub index: usize,
    /// Parabolically refined angle, degrees.
    pub angle: T,
    /// Sampled intensity at `index`.
    pub intensity: T,
    /// Vertex height of the fitted parabola.
    pub refined_intensity: T,
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Finds strict local maxima of the cut at or above `relative_floor` times its
/// maximum.
///
/// At an endfire end (±90°) the pattern folds back onto itself, so the outer
/// neighbor of an end sample is its inner neighbor; ends of other spans are
/// never peaks. Angles are refined with a 3-point parabola.
pub fn detect_lobes<T: Real>(cut: &PatternCut<T>, relative_floor: T) -> Result<Vec<DetectedPeak<T>>, LobeError> {
    let y = &cut.intensity;
    let n = y.len();
    if n < 3 {
        return Err(LobeError::EmptyCut(n));
    }
    let (_, max) = cut.argmax().expect("nonempty cut");
    let floor = relative_floor * max;
    let mirror = cut.ends_at_endfire();
    let mut out = Vec::new();
    for i in 0..n {
        let (left, right) = match i {
            0 if mirror => (y[1], y[1]),
            0 => continue,
            i if i == n - 1 && mirror => (y[n - 2], y[n - 2]),
            i if i == n - 1 => continue,
            i => (y[i - 1], y[i + 1]),
        };
        let v = y[i];
        if !(v > left && v > right) || v < floor {
            continue;
        }
        let (angle, refined_intensity) = if i == 0 || i == n - 1 {
            (cut.angles[i], v)
        } else {
            let h = (cut.angles[i + 1] - cut.angles[i - 1]) / T::lit(2.0);
            let curv = left - T::lit(2.0) * v + right;
            let half = T::lit(0.5);
            let delta = (half * (left - right) / curv).max(-half).min(half);
            let quarter = T::lit(0.25);
            (cut.angles[i] + delta * h, v - quarter * (left - right) * delta)
        };
        out.push(DetectedPeak {
            index: i,
            angle,
            intensity: v,
            refined_intensity,
        });
    }
    Ok(out)
}

/// Full width at half maximum of the lobe peaking at sample `index`, by linear
/// interpolation of the half-maximum crossings.
///
/// When one side runs off the end of the cut before crossing, that side's
/// half-width is taken equal to the other side's.
pub fn fwhm<T: Real>(cut: &PatternCut<T>, index: usize) -> Option<T> {
    let y = &cut.intensity;
    let th = &cut.angles;
    let half = y[index] / T::lit(2.0);
    let walk = |step: isize| -> Option<T> {
        let mut j = index;
        loop {
            let k = j as isize + step;
            if k < 0 || k as usize >= y.len() {
                return None;
            }
            let k = k as usize;
            if y[k] < half {
                let t = (y[j] - half) / (y[j] - y[k]);
                return Some((th[j] + t * (th[k] - th[j]) - th[index]).abs());
            }
            j = k;
        }
    };
    match (walk(-1), walk(1)) {
        (Some(l), Some(r)) => Some(l + r),
        (Some(w), None) | (None, Some(w)) => Some(w + w),
        (None, None) => None,
    }
}

/// Main-lobe search half-width from an ideal reference cut: a fixed multiple
/// of the FWHM of its strongest lobe.
pub fn exclusion_from_reference<T: Real>(reference: &PatternCut<T>) -> Result<T, LobeError> {
    let (i, _) = reference.argmax().ok_or(LobeError::EmptyCut(0))?;
    let w = fwhm(reference, i).ok_or_else(|| LobeError::NoHalfMaximum(f64_of(reference.angles[i])))?;
    Ok(T::lit(EXCLUSION_FWHM_MULTIPLE) * w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "lowercase")]
pub enum LobeKind {
    Main,
    Side,
    Grating(i64),
    Lpgl(i64),
}

impl LobeKind {
    pub fn name(&self) -> &'static str {
        match self {
            LobeKind::Main => "main",
            LobeKind::Side => "side",
            LobeKind::Grating(_) => "grating",
            LobeKind::Lpgl(_) => "lpgl",
        }
    }

    pub fn order(&self) -> Option<i64> {
        match self {
            LobeKind::Grating(m) | LobeKind::Lpgl(m) => Some(*m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lobe<T> {
    /// Degrees.
    pub angle: T,
    pub intensity: T,
    pub kind: LobeKind,
    /// Detected minus predicted angle, degrees, when matched to a prediction.
    pub prediction_error: Option<T>,
}

/// Inputs for matching lobes against analytic predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams<T> {
    /// Lattice pitch along the steering plane, wavelengths.
    pub pitch: T,
    /// Super-period multiplier; derived from the steering when absent.
    pub alpha: Option<u64>,
    pub tolerance_deg: T,
    /// Match long-period grating lobes; off for ideal excitations, whose
    /// wrapped ramp has no periodic error to diffract from.
    pub lpgl: bool,
}

impl<T: Real> ClassifyParams<T> {
    pub fn new(pitch: T) -> Self {
        Self {
            pitch,
            alpha: None,
            tolerance_deg: T::lit(DEFAULT_TOLERANCE_DEG),
            lpgl: true,
        }
    }
}

/// Tags `peaks[main]` as the main lobe. Every other peak takes the nearest
/// grating order `m` within tolerance, else the nearest LPGL order `l` within
/// tolerance, else counts as a side lobe.
///
/// Distances are measured between sines, with the tolerance converted to
/// radians, so the angular window is `tolerance_deg` at broadside and widens
/// as `1/cos θ` toward endfire, matching the lobe widths.
pub fn classify_lobes<T: Real>(
    peaks: &[DetectedPeak<T>],
    steering: &SteeringSpec<T>,
    main: usize,
    params: &ClassifyParams<T>,
) -> Vec<Lobe<T>> {
    let gratings: Vec<(T, T, LobeKind)> = grating_lobe_directions(steering, params.pitch)
        .into_iter()
        .map(|g| (g.angle, g.sine, LobeKind::Grating(g.order)))
        .collect();
    let mut lpgls: Vec<(T, T, LobeKind)> = Vec::new();
    if params.lpgl && steering.theta_s != T::zero() {
        let alpha = params
            .alpha
            .or_else(|| long_period_info(steering, params.pitch).ok().map(|lp| lp.alpha));
        if let Some(Ok(dirs)) = alpha.map(|a| lpgl_directions(steering, a)) {
            lpgls.extend(
                dirs.into_iter()
                    .filter(|d| !d.is_main)
                    .map(|d| (d.angle, d.sine, LobeKind::Lpgl(d.order))),
            );
        }
    }
    let tolerance = params.tolerance_deg.to_radians();
    let nearest = |angle: T, predictions: &[(T, T, LobeKind)]| {
        let sine = sin_cos_deg(angle).0;
        predictions
            .iter()
            .map(|&(a, s, k)| ((sine - s).abs(), angle - a, k))
            .filter(|(dist, _, _)| *dist <= tolerance)
            .fold(None, |best: Option<(T, T, LobeKind)>, cand| match best {
                Some((d, _, _)) if d <= cand.0 => best,
                _ => Some(cand),
            })
            .map(|(_, err, kind)| (err, kind))
    };
    peaks
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (kind, prediction_error) = if i == main {
                (LobeKind::Main, Some(p.angle - steering.theta_s))
            } else {
                match nearest(p.angle, &gratings).or_else(|| nearest(p.angle, &lpgls)) {
                    Some((err, kind)) => (kind, Some(err)),
                    None => (LobeKind::Side, None),
                }
            };
            Lobe {
                angle: p.angle,
                intensity: p.intensity,
                kind,
                prediction_error,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprOptions<T> {
    /// Main-lobe search half-width around the target, degrees.
    pub exclusion_halfwidth: T,
    /// Detection floor relative to the cut maximum.
    pub floor: T,
    pub missteer_margin: T,
    pub classification: Option<ClassifyParams<T>>,
    /// Also report the spr restricted to `|θ| ≤ fov`.
    pub fov: Option<T>,
}

impl<T: Real> SprOptions<T> {
    pub fn new(exclusion_halfwidth: T) -> Self {
        Self {
            exclusion_halfwidth,
            floor: T::lit(DEFAULT_FLOOR),
            missteer_margin: T::lit(DEFAULT_MISSTEER_MARGIN),
            classification: None,
            fov: None,
        }
    }

    pub fn with_classification(mut self, params: ClassifyParams<T>) -> Self {
        self.classification = Some(params);
        self
    }

    pub fn with_fov(mut self, fov: T) -> Self {
        self.fov = Some(fov);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobeReport<T> {
    pub steering: SteeringSpec<T>,
    /// All detected lobes in angle order; exactly one is [`LobeKind::Main`].
    pub lobes: Vec<Lobe<T>>,
    pub main_index: usize,
    pub spr: T,
    /// spr over lobes with `|θ| ≤ fov`, when requested.
    pub fov_spr: Option<T>,
    pub main_lobe_angle_error: T,
    pub main_lobe_fwhm: Option<T>,
}

impl<T: Real> LobeReport<T> {
    pub fn main(&self) -> &Lobe<T> {
        &self.lobes[self.main_index]
    }

    pub fn secondary(&self) -> impl Iterator<Item = &Lobe<T>> + '_ {
        self.lobes.iter().filter(|l| l.kind != LobeKind::Main)
    }

    /// Secondary lobes at or above `relative` times the main lobe.
    pub fn secondary_above(&self, relative: T) -> usize {
        let thr = relative * self.main().intensity;
        self.secondary().filter(|l| l.intensity >= thr).count()
    }
}

/// Locates the main lobe near the steering target and computes the ratio of
/// the strongest other lobe to it.
pub fn sidelobe_to_peak<T: Real>(
    cut: &PatternCut<T>,
    steering: &SteeringSpec<T>,
    opts: &SprOptions<T>,
) -> Result<LobeReport<T>, LobeError> {
    let peaks = detect_lobes(cut, opts.floor)?;
    let target = steering.theta_s;
    let main = peaks
        .iter()
        .enumerate()
        .filter(|(_, p)| (p.angle - target).abs() <= opts.exclusion_halfwidth)
        .fold(None, |best: Option<(usize, T)>, (i, p)| match best {
            Some((_, v)) if v >= p.intensity => best,
            _ => Some((i, p.intensity)),
        })
        .map(|(i, _)| i)
        .ok_or(LobeError::NoMainLobe {
            target: f64_of(target),
            halfwidth: f64_of(opts.exclusion_halfwidth),
        })?;
    let main_peak = peaks[main];
    let strongest = peaks.iter().fold(main_peak, |best, p| {
        if p.refined_intensity > best.refined_intensity {
            *p
        } else {
            best
        }
    });
    if strongest.refined_intensity > main_peak.refined_intensity * (T::one() + opts.missteer_margin) {
        return Err(LobeError::Missteer {
            target: f64_of(target),
            observed: f64_of(strongest.angle),
            ratio: f64_of(strongest.refined_intensity / main_peak.refined_intensity),
        });
    }
    let lobes = match &opts.classification {
        Some(params) => classify_lobes(&peaks, steering, main, params),
        None => peaks
            .iter()
            .enumerate()
            .map(|(i, p)| Lobe {
                angle: p.angle,
                intensity: p.intensity,
                kind: if i == main { LobeKind::Main } else { LobeKind::Side },
                prediction_error: (i == main).then(|| p.angle - target),
            })
            .collect(),
    };
    let ratio_where = |keep: &dyn Fn(&Lobe<T>) -> bool| {
        lobes
            .iter()
            .enumerate()
            .filter(|(i, l)| *i != main && keep(l))
            .fold(T::zero(), |m, (_, l)| m.max(l.intensity))
            / main_peak.intensity
    };
    let spr = ratio_where(&|_| true);
    let fov_spr = opts.fov.map(|fov| ratio_where(&|l: &Lobe<T>| l.angle.abs() <= fov));
    Ok(LobeReport {
        steering: *steering,
        main_index: main,
        spr,
        fov_spr,
        main_lobe_angle_error: main_peak.angle - target,
        main_lobe_fwhm: fwhm(cut, main_peak.index),
        lobes,
    })
}

/// Arithmetic mean of the report sprs, summed in the given order.
pub fn mean_spr<T: Real>(reports: &[LobeReport<T>]) -> Result<T, LobeError> {
    if reports.is_empty() {
        return Err(LobeError::EmptyAverage);
    }
    let sum = reports.iter().fold(T::zero(), |s, r| s + r.spr);
    Ok(sum / T::idx(reports.len() as i64))
}
