//! Closed-form steering arithmetic for a rectangular pixel lattice.
//!
//! Everything here is a pure function of its inputs: steering-law
//! conversions between the steering angle and the number of pixels per
//! sawtooth period `M`, the long-period `d`, the super-period multiplier `α`,
//! and the directions of grating lobes and long-period grating lobes (LPGLs).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{asin_deg, sin_cos_deg, Real};

/// Default cap on the super-period multiplier `α`.
pub const DEFAULT_ALPHA_CAP: u64 = 1000;
/// Default rationalization tolerance: `|q·M − round(q·M)| < tol·q`.
pub const DEFAULT_ALPHA_TOLERANCE: f64 = 1e-6;

/// Slack used when comparing sines against the visible-region bound `|s| ≤ 1`
/// and when truncating `α/|sin θ_s|`.
const SINE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArrayModelError {
    #[error("no real steering angle: pitch·M = {0} is below 1")]
    NoRealSteering(f64),
    #[error("broadside steering has no long-period (θ_s = 0)")]
    DegenerateSteering,
    #[error("invalid {name}: {value} ({reason})")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn invalid(name: &'static str, value: impl Real, reason: &'static str) -> ArrayModelError {
    ArrayModelError::Invalid {
        name,
        value: value.to_f64().unwrap_or(f64::NAN),
        reason,
    }
}

/// Rectangular lattice of `(2N_x+1)·(2N_z+1)` pixels in the xz-plane.
///
/// Pixel `(p, q)` sits at `(p·a_x, 0, q·a_z)` with `p ∈ [−N_x, N_x]`,
/// `q ∈ [−N_z, N_z]`. Pitches are in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec<T> {
    pub half_extent_x: usize,
    pub half_extent_z: usize,
    pub pitch_x: T,
    pub pitch_z: T,
}

impl<T: Real> ArraySpec<T> {
    pub fn new(
        half_extent_x: usize,
        half_extent_z: usize,
        pitch_x: T,
        pitch_z: T,
    ) -> Result<Self, ArrayModelError> {
        for (name, a) in [("pitch_x", pitch_x), ("pitch_z", pitch_z)] {
            if !(a.is_finite() && a > T::zero()) {
                return Err(invalid(name, a, "must be finite and > 0"));
            }
        }
        Ok(Self {
            half_extent_x,
            half_extent_z,
            pitch_x,
            pitch_z,
        })
    }

    /// Square `N × N` array with a common pitch; `N` must be odd.
    pub fn square(n: usize, pitch: T) -> Result<Self, ArrayModelError> {
        if n.is_multiple_of(2) {
            return Err(invalid("n", T::idx(n as i64), "side length must be odd"));
        }
        Self::new((n - 1) / 2, (n - 1) / 2, pitch, pitch)
    }

    pub fn cols(&self) -> usize {
        2 * self.half_extent_x + 1
    }

    pub fn rows(&self) -> usize {
        2 * self.half_extent_z + 1
    }

    pub fn pixel_count(&self) -> usize {
        self.cols() * self.rows()
    }

    /// Lattice period seen by a steering gradient in the plane at azimuth
    /// `phi_s` (degrees from the x-axis).
    ///
    /// Grating orders that stay inside the steering plane form a 1D lattice
    /// `k·(m₀, n₀)` of reciprocal vectors; the returned pitch is
    /// `1 / |m₀·cos φ_s / a_x + n₀·sin φ_s / a_z|`. Returns `None` when no
    /// reciprocal vector with `|m|, |n| ≤ 64` lies in the plane.
    pub fn in_plane_pitch(&self, phi_s: T) -> Option<T> {
        let (s, c) = sin_cos_deg(phi_s);
        let eps = T::lit(1e-9);
        if s.abs() < eps {
            return Some(self.pitch_x);
        }
        if c.abs() < eps {
            return Some(self.pitch_z);
        }
        let (gx, gz) = (self.pitch_x.recip(), self.pitch_z.recip());
        let mut best: Option<T> = None;
        for m in 1i64..=64 {
            for n in -64i64..=64 {
                let (mf, nf) = (T::idx(m), T::idx(n));
                // transverse component of the reciprocal vector must vanish
                let transverse = mf * gx * s - nf * gz * c;
                if transverse.abs() < eps * (gx + gz) {
                    let step = (mf * gx * c + nf * gz * s).abs();
                    if step > T::zero() && best.is_none_or(|b| step < b) {
                        best = Some(step);
                    }
                }
            }
        }
        best.map(|step| step.recip())
    }
}

/// Target steering direction: `theta_s` from broadside within the plane at
/// azimuth `phi_s` (both degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec<T> {
    pub theta_s: T,
    pub phi_s: T,
}

impl<T: Real> SteeringSpec<T> {
    /// Validates `|θ_s| ≤ 90°` and `0 ≤ φ_s < 180°`.
    pub fn new(theta_s: T, phi_s: T) -> Result<Self, ArrayModelError> {
        if !(theta_s.is_finite() && theta_s.abs() <= T::lit(90.0)) {
            return Err(invalid("theta_s", theta_s, "must lie in [-90, 90] degrees"));
        }
        if !(phi_s.is_finite() && phi_s >= T::zero() && phi_s < T::lit(180.0)) {
            return Err(invalid("phi_s", phi_s, "must lie in [0, 180) degrees"));
        }
        Ok(Self { theta_s, phi_s })
    }

    /// Steering in the xy-plane (`φ_s = 0`).
    pub fn in_xy(theta_s: T) -> Result<Self, ArrayModelError> {
        Self::new(theta_s, T::zero())
    }

    pub fn sin_theta(&self) -> T {
        self.theta_s.to_radians().sin()
    }

    /// Unit propagation direction `(x, y, z)` of the steered beam.
    pub fn direction(&self) -> [T; 3] {
        let (st, ct) = sin_cos_deg(self.theta_s);
        let (sp, cp) = sin_cos_deg(self.phi_s);
        [st * cp, ct, st * sp]
    }
}

/// Long-period (sawtooth) arithmetic for a steering target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongPeriodInfo<T> {
    /// Pixels per 2π sawtooth period.
    pub m: T,
    /// Long-period `d = M·a`, in wavelengths.
    pub d: T,
    /// Smallest `α ≤ cap` making `α·M` integral within tolerance.
    pub alpha: u64,
    /// `true` when no `α ≤ cap` rationalizes `M`; `alpha` then equals the cap.
    pub quasi_periodic: bool,
    /// Per-pixel phase step `2π/M`, radians.
    pub delta_psi: T,
    /// Phase gradient `k·sin θ_s`, radians per wavelength.
    pub psi_prime: T,
}

/// Steering angle in degrees produced by `M` pixels per period at `pitch`.
pub fn steering_from_m<T: Real>(m: T, pitch: T) -> Result<T, ArrayModelError> {
    if !(m.is_finite() && m > T::one()) {
        return Err(invalid("M", m, "must be > 1"));
    }
    if !(pitch.is_finite() && pitch > T::zero()) {
        return Err(invalid("pitch", pitch, "must be finite and > 0"));
    }
    let arg = (pitch * m).recip();
    if arg > T::one() {
        return Err(ArrayModelError::NoRealSteering(
            (pitch * m).to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok(arg.asin().to_degrees())
}

/// Smallest denominator `q ≤ cap` with `|q·M − round(q·M)| < tol·q`.
///
/// Returns `(cap, true)` when no such `q` exists.
pub fn rationalize_alpha<T: Real>(m: T, cap: u64, tol: T) -> (u64, bool) {
    for q in 1..=cap.max(1) {
        let qm = T::idx(q as i64) * m;
        if (qm - qm.round()).abs() < tol * T::idx(q as i64) {
            return (q, false);
        }
    }
    (cap.max(1), true)
}

/// Long-period arithmetic with the default `α` search settings.
pub fn long_period_info<T: Real>(
    steering: &SteeringSpec<T>,
    pitch: T,
) -> Result<LongPeriodInfo<T>, ArrayModelError> {
    long_period_info_with(
        steering,
        pitch,
        DEFAULT_ALPHA_CAP,
        T::lit(DEFAULT_ALPHA_TOLERANCE),
    )
}

pub fn long_period_info_with<T: Real>(
    steering: &SteeringSpec<T>,
    pitch: T,
    alpha_cap: u64,
    alpha_tol: T,
) -> Result<LongPeriodInfo<T>, ArrayModelError> {
    if !(pitch.is_finite() && pitch > T::zero()) {
        return Err(invalid("pitch", pitch, "must be finite and > 0"));
    }
    let s = steering.sin_theta();
    if s == T::zero() {
        return Err(ArrayModelError::DegenerateSteering);
    }
    let d = s.abs().recip();
    let m = d / pitch;
    let (alpha, quasi_periodic) = rationalize_alpha(m, alpha_cap, alpha_tol);
    Ok(LongPeriodInfo {
        m,
        d,
        alpha,
        quasi_periodic,
        delta_psi: T::tau() / m,
        psi_prime: T::tau() * s,
    })
}

/// Largest pitch keeping grating lobes out of the field of view `±theta_s_max`.
pub fn max_pitch<T: Real>(theta_s_max: T) -> Result<T, ArrayModelError> {
    if !(theta_s_max > T::zero() && theta_s_max <= T::lit(90.0)) {
        return Err(invalid("theta_s_max", theta_s_max, "must lie in (0, 90] degrees"));
    }
    Ok((T::lit(2.0) * theta_s_max.to_radians().sin()).recip())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingLobe<T> {
    pub order: i64,
    /// Degrees.
    pub angle: T,
    pub sine: T,
}

/// All grating orders `m ≠ 0` with `|sin θ_s + m/a| ≤ 1`, sorted by angle.
pub fn grating_lobe_directions<T: Real>(steering: &SteeringSpec<T>, pitch: T) -> Vec<GratingLobe<T>> {
    let s = steering.sin_theta();
    let slack = T::lit(SINE_SLACK);
    let lo = ((-T::one() - s) * pitch - slack).ceil().to_i64().unwrap_or(0);
    let hi = ((T::one() - s) * pitch + slack).floor().to_i64().unwrap_or(0);
    let mut out: Vec<GratingLobe<T>> = (lo..=hi)
        .filter(|&m| m != 0)
        .filter_map(|m| {
            let sine = s + T::idx(m) / pitch;
            (sine.abs() <= T::one() + slack).then(|| GratingLobe {
                order: m,
                angle: asin_deg(sine),
                sine,
            })
        })
        .collect();
    out.sort_by(|a, b| a.sine.partial_cmp(&b.sine).expect("finite sines"));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpglDirection<T> {
    pub order: i64,
    /// Degrees.
    pub angle: T,
    pub sine: T,
    /// `l = α`: the main lobe itself.
    pub is_main: bool,
    /// `l = 0`: the broadside order, which counts as an LPGL.
    pub is_broadside: bool,
}

/// Maximum LPGL order `int(α / |sin θ_s|)`.
pub fn lpgl_max_order<T: Real>(steering: &SteeringSpec<T>, alpha: u64) -> Result<i64, ArrayModelError> {
    let s = steering.sin_theta().abs();
    if s == T::zero() {
        return Err(ArrayModelError::DegenerateSteering);
    }
    let ratio = T::idx(alpha as i64) / s;
    // sin θ_s computed from an exact-period angle may land one ulp high
    Ok((ratio * (T::one() + T::lit(SINE_SLACK))).floor().to_i64().unwrap_or(0))
}

/// LPGL orders `l ∈ [−l_max, l_max]` at `sin θ = (l/α)·sin θ_s`.
///
/// The entry with `l = α` is the main lobe; the remaining `2·l_max` entries
/// are the LPGLs.
pub fn lpgl_directions<T: Real>(
    steering: &SteeringSpec<T>,
    alpha: u64,
) -> Result<Vec<LpglDirection<T>>, ArrayModelError> {
    if alpha == 0 {
        return Err(invalid("alpha", T::zero(), "must be a positive integer"));
    }
    let l_max = lpgl_max_order(steering, alpha)?;
    let s = steering.sin_theta();
    let a = T::idx(alpha as i64);
    Ok((-l_max..=l_max)
        .map(|l| {
            let sine = T::idx(l) / a * s;
            LpglDirection {
                order: l,
                angle: asin_deg(sine),
                sine,
                is_main: l == alpha as i64,
                is_broadside: l == 0,
            }
        })
        .collect())
}

/// Minimum phase range (degrees) for LPGL-free steering with integer `M`.
pub fn min_phase_range_for_ideal<T: Real>(m: u64) -> Result<T, ArrayModelError> {
    if m == 0 {
        return Err(invalid("M", T::zero(), "must be a positive integer"));
    }
    let m = T::idx(m as i64);
    Ok(T::lit(360.0) * m / (m + T::one()))
}
