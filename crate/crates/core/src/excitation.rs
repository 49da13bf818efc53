//! Per-pixel complex excitation synthesis.
//!
//! A [`PixelGrid`] is built in stages, always in this order:
//!
//! 1. [`ideal_phase_profile`]: the modulo-2π sawtooth for a steering target;
//! 2. [`apply_amplitude_perturbation`]: amplitude ripple keyed to each pixel's
//!    ideal phase;
//! 3. [`apply_phase_limit`]: compensation for phases above `ψ_max`;
//! 4. [`apply_windows`]: circular and/or Gaussian apodization.
//!
//! [`synthesize`] runs the whole chain. Every stage takes a grid by reference
//! and returns a new one.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array_model::{ArraySpec, SteeringSpec};
use crate::num::{sin_cos_deg, Real};
use crate::summation::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExcitationError {
    #[error("infeasible perturbation: {0}")]
    Infeasible(String),
    #[error("negative amplitude {value} at pixel ({p}, {q})")]
    NegativeAmplitude { p: i64, q: i64, value: f64 },
    #[error("skip compensation needs the ideal phase ramp the grid was built from")]
    MissingRamp,
    #[error("grid has {got} pixels but the array spec needs {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("invalid {name}: {value} ({reason})")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn invalid(name: &'static str, value: impl Real, reason: &'static str) -> ExcitationError {
    ExcitationError::Invalid {
        name,
        value: value.to_f64().unwrap_or(f64::NAN),
        reason,
    }
}

/// Per-pixel amplitude and phase over an [`ArraySpec`] lattice.
///
/// Storage is row-major with `p` (the x index) outermost, so each `p` owns a
/// contiguous run of `2N_z+1` pixels. Phases are radians in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid<T> {
    pub spec: ArraySpec<T>,
    amplitude: Vec<T>,
    phase: Vec<T>,
    /// Steering target of the ideal ramp the phases were derived from, if any.
    ramp: Option<SteeringSpec<T>>,
}

/// Wraps an angle in radians into `[0, 2π)`.
#[inline]
pub fn wrap_phase<T: Real>(x: T) -> T {
    wrap_to(x, T::tau())
}

#[inline]
fn wrap_to<T: Real>(x: T, period: T) -> T {
    let turns = x / period;
    let r = x - turns.floor() * period;
    // an exact multiple of the period can come out a few ulps short of it
    let slack = T::lit(16.0) * T::epsilon() * turns.abs().max(T::one()) * period;
    if r >= period - slack || r < T::zero() {
        T::zero()
    } else {
        r
    }
}

/// Unwrapped ideal phase `k·sin θ_s·(p·a_x·cos φ_s + q·a_z·sin φ_s)`, radians.
#[inline]
pub fn ideal_unwrapped_phase<T: Real>(
    spec: &ArraySpec<T>,
    steering: &SteeringSpec<T>,
    p: i64,
    q: i64,
) -> T {
    let (sp, cp) = sin_cos_deg(steering.phi_s);
    let s = steering.sin_theta();
    T::tau() * s * (T::idx(p) * spec.pitch_x * cp + T::idx(q) * spec.pitch_z * sp)
}

impl<T: Real> PixelGrid<T> {
    /// Grid with all amplitudes 1 and all phases 0.
    pub fn uniform(spec: ArraySpec<T>) -> Self {
        let n = spec.pixel_count();
        Self {
            spec,
            amplitude: vec![T::one(); n],
            phase: vec![T::zero(); n],
            ramp: None,
        }
    }

    /// Builds a grid from explicit per-pixel data (row-major, `p` outermost).
    pub fn from_parts(
        spec: ArraySpec<T>,
        amplitude: Vec<T>,
        phase: Vec<T>,
    ) -> Result<Self, ExcitationError> {
        let want = spec.pixel_count();
        for got in [amplitude.len(), phase.len()] {
            if got != want {
                return Err(ExcitationError::DimensionMismatch { got, want });
            }
        }
        if let Some(&a) = amplitude.iter().find(|a| !(a.is_finite() && **a >= T::zero())) {
            return Err(invalid("amplitude", a, "must be finite and >= 0"));
        }
        let phase = phase.into_iter().map(wrap_phase).collect();
        Ok(Self {
            spec,
            amplitude,
            phase,
            ramp: None,
        })
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitude
    }

    pub fn phases(&self) -> &[T] {
        &self.phase
    }

    pub fn ramp(&self) -> Option<&SteeringSpec<T>> {
        self.ramp.as_ref()
    }

    /// Flat index of pixel `(p, q)`.
    #[inline]
    pub fn index(&self, p: i64, q: i64) -> usize {
        let nx = self.spec.half_extent_x as i64;
        let nz = self.spec.half_extent_z as i64;
        debug_assert!(p.abs() <= nx && q.abs() <= nz);
        ((p + nx) as usize) * self.spec.rows() + (q + nz) as usize
    }

    /// Lattice coordinates of a flat index.
    #[inline]
    pub fn coords(&self, i: usize) -> (i64, i64) {
        let rows = self.spec.rows();
        (
            (i / rows) as i64 - self.spec.half_extent_x as i64,
            (i % rows) as i64 - self.spec.half_extent_z as i64,
        )
    }

    pub fn amplitude(&self, p: i64, q: i64) -> T {
        self.amplitude[self.index(p, q)]
    }

    pub fn phase(&self, p: i64, q: i64) -> T {
        self.phase[self.index(p, q)]
    }

    /// Complex excitation `|E|·e^{iψ}` at flat index `i`.
    #[inline]
    pub fn field(&self, i: usize) -> Complex<T> {
        Complex::from_polar(self.amplitude[i], self.phase[i])
    }

    /// All complex excitations in storage order.
    pub fn fields(&self) -> Vec<Complex<T>> {
        (0..self.len()).map(|i| self.field(i)).collect()
    }

    /// Iterates `(p, q, amplitude, phase)`.
    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64, T, T)> + '_ {
        (0..self.len()).map(move |i| {
            let (p, q) = self.coords(i);
            (p, q, self.amplitude[i], self.phase[i])
        })
    }

    /// Copy of this grid with every phase negated (mod 2π).
    pub fn conjugated(&self) -> Self {
        Self {
            spec: self.spec,
            amplitude: self.amplitude.clone(),
            phase: self.phase.iter().map(|&x| wrap_phase(-x)).collect(),
            ramp: self.ramp.map(|s| SteeringSpec {
                theta_s: -s.theta_s,
                phi_s: s.phi_s,
            }),
        }
    }

    /// Fractional peak-to-peak amplitude variation `(max − min)/(max + min)`.
    pub fn amplitude_variation(&self) -> T {
        let (lo, hi) = self
            .amplitude
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &a| (lo.min(a), hi.max(a)));
        if hi + lo == T::zero() {
            T::zero()
        } else {
            (hi - lo) / (hi + lo)
        }
    }
}

/// Mod-2π sawtooth steering the array toward `steering`, unit amplitudes.
pub fn ideal_phase_profile<T: Real>(spec: &ArraySpec<T>, steering: &SteeringSpec<T>) -> PixelGrid<T> {
    let mut grid = PixelGrid::uniform(*spec);
    for i in 0..grid.len() {
        let (p, q) = grid.coords(i);
        grid.phase[i] = wrap_phase(ideal_unwrapped_phase(spec, steering, p, q));
    }
    grid.ramp = Some(*steering);
    grid
}

/// Rule for pixels whose ideal phase exceeds `ψ_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompensationStrategy {
    /// Clamp to `ψ_max`.
    #[serde(rename = "replace-by-psi-max")]
    ReplaceByPsiMax,
    /// Write `2π`, i.e. `0`.
    #[serde(rename = "replace-by-2pi")]
    ReplaceBy2Pi,
    /// Nearest of `ψ_max` and `2π`; ties go to `ψ_max`.
    HalfHalf,
    /// Re-wrap the unwrapped ramp modulo `ψ_max`.
    Skip,
}

impl CompensationStrategy {
    pub const ALL: [CompensationStrategy; 4] = [
        CompensationStrategy::ReplaceByPsiMax,
        CompensationStrategy::ReplaceBy2Pi,
        CompensationStrategy::HalfHalf,
        CompensationStrategy::Skip,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CompensationStrategy::ReplaceByPsiMax => "replace-by-psi-max",
            CompensationStrategy::ReplaceBy2Pi => "replace-by-2pi",
            CompensationStrategy::HalfHalf => "half-half",
            CompensationStrategy::Skip => "skip",
        }
    }
}

impl std::fmt::Display for CompensationStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CompensationStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown compensation strategy '{s}'"))
    }
}

/// Maximum realizable pixel phase (degrees) and the compensation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLimitSpec<T> {
    pub psi_max: T,
    pub strategy: CompensationStrategy,
}

impl<T: Real> PhaseLimitSpec<T> {
    pub fn new(psi_max: T, strategy: CompensationStrategy) -> Result<Self, ExcitationError> {
        if !(psi_max > T::zero() && psi_max <= T::lit(360.0)) {
            return Err(invalid("psi_max", psi_max, "must lie in (0, 360] degrees"));
        }
        Ok(Self { psi_max, strategy })
    }

    /// Full 2π range; compensation is a no-op.
    pub fn unlimited() -> Self {
        Self {
            psi_max: T::lit(360.0),
            strategy: CompensationStrategy::HalfHalf,
        }
    }

    pub fn is_unlimited(&self) -> bool {
        self.psi_max >= T::lit(360.0)
    }
}

/// Rewrites phases above `ψ_max` according to the compensation strategy.
pub fn apply_phase_limit<T: Real>(
    grid: &PixelGrid<T>,
    limit: &PhaseLimitSpec<T>,
) -> Result<PixelGrid<T>, ExcitationError> {
    if limit.is_unlimited() {
        return Ok(grid.clone());
    }
    let psi_max = limit.psi_max.to_radians();
    let tau = T::tau();
    let mut out = grid.clone();
    match limit.strategy {
        CompensationStrategy::Skip => {
            let ramp = grid.ramp.ok_or(ExcitationError::MissingRamp)?;
            for i in 0..out.len() {
                let (p, q) = out.coords(i);
                out.phase[i] = wrap_to(ideal_unwrapped_phase(&grid.spec, &ramp, p, q), psi_max);
            }
        }
        strategy => {
            for psi in out.phase.iter_mut().filter(|psi| **psi > psi_max) {
                *psi = match strategy {
                    CompensationStrategy::ReplaceByPsiMax => psi_max,
                    CompensationStrategy::ReplaceBy2Pi => T::zero(),
                    CompensationStrategy::HalfHalf if *psi - psi_max <= tau - *psi => psi_max,
                    _ => T::zero(),
                };
            }
        }
    }
    Ok(out)
}

/// Amplitude ripple `f_p(ψ) = A + B·sin(P_d·ψ)` applied as `|E| ← |E|·(1 + f_p)`,
/// where `ψ ∈ [0, 2π)` is the pixel's wrapped ideal phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec<T> {
    /// Sinusoid cycles per long-period.
    pub p_d: T,
    /// Offset `A`.
    pub offset: T,
    /// Amplitude `B`.
    pub amplitude: T,
}

impl<T: Real> PerturbationSpec<T> {
    pub fn none() -> Self {
        Self {
            p_d: T::one(),
            offset: T::zero(),
            amplitude: T::zero(),
        }
    }

    #[inline]
    pub fn factor(&self, wrapped_phase: T) -> T {
        T::one() + self.offset + self.amplitude * (self.p_d * wrapped_phase).sin()
    }
}

/// Solves `(A, B)` so the perturbed amplitudes are centered on 1 and reach the
/// requested peak-to-peak variation.
///
/// The extremes of `sin(P_d·ψ)` are taken over the wrapped ideal phases the
/// lattice actually realizes, so the measured variation of the perturbed grid
/// equals `target_var` up to rounding. With extremes `s_lo`, `s_hi`:
/// `B = 2·var/(s_hi − s_lo)` and `A = −B·(s_hi + s_lo)/2`.
pub fn solve_perturbation_params<T: Real>(
    p_d: T,
    target_var: T,
    steering: &SteeringSpec<T>,
    spec: &ArraySpec<T>,
) -> Result<PerturbationSpec<T>, ExcitationError> {
    if !(p_d.is_finite() && p_d > T::zero()) {
        return Err(invalid("p_d", p_d, "must be finite and > 0"));
    }
    if !(target_var.is_finite() && target_var >= T::zero()) {
        return Err(invalid("var", target_var, "must be finite and >= 0"));
    }
    if target_var >= T::one() {
        return Err(ExcitationError::Infeasible(format!(
            "variation {target_var} would drive the minimum amplitude to {} <= 0",
            T::one() - target_var
        )));
    }
    if target_var == T::zero() {
        return Ok(PerturbationSpec {
            p_d,
            offset: T::zero(),
            amplitude: T::zero(),
        });
    }
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for p in -(spec.half_extent_x as i64)..=spec.half_extent_x as i64 {
        for q in -(spec.half_extent_z as i64)..=spec.half_extent_z as i64 {
            let psi = wrap_phase(ideal_unwrapped_phase(spec, steering, p, q));
            let s = (p_d * psi).sin();
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    let span = hi - lo;
    if !(span > T::lit(1e-12)) {
        return Err(ExcitationError::Infeasible(
            "all pixels share one ideal phase; the ripple cannot vary".into(),
        ));
    }
    let b = T::lit(2.0) * target_var / span;
    let a = -b * (hi + lo) / T::lit(2.0);
    Ok(PerturbationSpec {
        p_d,
        offset: a,
        amplitude: b,
    })
}

/// Multiplies each amplitude by `1 + f_p(ψ)` with `ψ` the wrapped ideal phase
/// of that pixel for `steering`. Phases are untouched.
pub fn apply_amplitude_perturbation<T: Real>(
    grid: &PixelGrid<T>,
    pert: &PerturbationSpec<T>,
    steering: &SteeringSpec<T>,
) -> Result<PixelGrid<T>, ExcitationError> {
    let mut out = grid.clone();
    for i in 0..out.len() {
        let (p, q) = out.coords(i);
        let psi = wrap_phase(ideal_unwrapped_phase(&grid.spec, steering, p, q));
        let f = pert.factor(psi);
        if !(f >= T::zero()) {
            return Err(ExcitationError::NegativeAmplitude {
                p,
                q,
                value: f.to_f64().unwrap_or(f64::NAN),
            });
        }
        out.amplitude[i] = out.amplitude[i] * f;
    }
    Ok(out)
}

/// Circular mask and/or Gaussian taper.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowSpec<T> {
    /// Zero every pixel with `√(p² + q²) > N_x`.
    pub circular: bool,
    /// `W_g = exp(−(p² + q²)/(σ·N_x)²)` when set.
    pub gaussian_sigma: Option<T>,
    /// Scale the q axis by `σ·N_z` instead of `σ·N_x`.
    #[serde(default)]
    pub anisotropic: bool,
}

impl<T: Real> WindowSpec<T> {
    pub fn none() -> Self {
        Self {
            circular: false,
            gaussian_sigma: None,
            anisotropic: false,
        }
    }

    /// Circular mask combined with a Gaussian of width `sigma`.
    pub fn double(sigma: T) -> Self {
        Self {
            circular: true,
            gaussian_sigma: Some(sigma),
            anisotropic: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExcitationError> {
        match self.gaussian_sigma {
            Some(s) if !(s.is_finite() && s > T::zero()) => {
                Err(invalid("gaussian_sigma", s, "must be finite and > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Window weight for pixel `(p, q)`, in `[0, 1]`.
    pub fn weight(&self, spec: &ArraySpec<T>, p: i64, q: i64) -> T {
        let nx = spec.half_extent_x as i64;
        let nz = spec.half_extent_z as i64;
        if self.circular && p * p + q * q > nx * nx {
            return T::zero();
        }
        let Some(sigma) = self.gaussian_sigma else {
            return T::one();
        };
        let scale = |n: i64, k: i64| -> T {
            if k == 0 {
                return T::zero();
            }
            let w = sigma * T::idx(n);
            if w == T::zero() {
                T::infinity()
            } else {
                let r = T::idx(k) / w;
                r * r
            }
        };
        let zn = if self.anisotropic { nz } else { nx };
        (-(scale(nx, p) + scale(zn, q))).exp()
    }
}

/// Multiplies each amplitude by its window weight; phases are untouched.
pub fn apply_windows<T: Real>(grid: &PixelGrid<T>, window: &WindowSpec<T>) -> PixelGrid<T> {
    let mut out = grid.clone();
    for i in 0..out.len() {
        let (p, q) = out.coords(i);
        out.amplitude[i] = out.amplitude[i] * window.weight(&grid.spec, p, q);
    }
    out
}

/// Sum of all pixel amplitudes; its square normalizes far-field intensities.
pub fn total_amplitude<T: Real>(grid: &PixelGrid<T>) -> T {
    pairwise_sum(grid.amplitudes())
}

/// Requested amplitude ripple: cycles per long-period and peak-to-peak variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRequest<T> {
    pub p_d: T,
    pub var: T,
}

/// Runs the full synthesis chain: ideal ramp, amplitude ripple, phase-limit
/// compensation, then windows.
pub fn synthesize<T: Real>(
    spec: &ArraySpec<T>,
    steering: &SteeringSpec<T>,
    perturbation: Option<&PerturbationRequest<T>>,
    limit: &PhaseLimitSpec<T>,
    window: &WindowSpec<T>,
) -> Result<PixelGrid<T>, ExcitationError> {
    window.validate()?;
    let mut grid = ideal_phase_profile(spec, steering);
    if let Some(req) = perturbation {
        let pert = solve_perturbation_params(req.p_d, req.var, steering, spec)?;
        grid = apply_amplitude_perturbation(&grid, &pert, steering)?;
    }
    let grid = apply_phase_limit(&grid, limit)?;
    Ok(apply_windows(&grid, window))
}
