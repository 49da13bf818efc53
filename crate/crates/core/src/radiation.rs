//! Far-field power patterns `|U|² = |A|²·|F|²`, normalized by `(Σ|E|)²`.
//!
//! Array coordinates: pixels lie in the xz-plane and the forward hemisphere
//! is `y ≥ 0`. A direction with polar angle `θ` (from z) and azimuth `φ`
//! (from x) has unit vector `(sin θ cos φ, sin θ sin φ, cos θ)`. The array
//! factor depends on it only through `u = x` and `w = z`:
//!
//! `A(u, w) = Σ_p Σ_q E(p,q)·exp(−i·2π·p·a_x·u)·exp(−i·2π·q·a_z·w)`.
//!
//! A steering-plane sample `(θ_s, φ_s)` maps to `x = sin θ_s cos φ_s`,
//! `y = cos θ_s`, `z = sin θ_s sin φ_s`.
//!
//! Every sample is evaluated independently with a fixed pairwise summation
//! tree, so results are bit-identical whatever the rayon pool size.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::excitation::{total_amplitude, PixelGrid};
use crate::num::{sin_cos_deg, Real};
use crate::summation::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadiationError {
    #[error("resolution must be finite and > 0, got {0}")]
    InvalidResolution(f64),
    #[error("invalid angular span [{0}, {1}]")]
    InvalidSpan(f64, f64),
    #[error("aperture has zero total amplitude; the pattern cannot be normalized")]
    ZeroAperture,
    #[error("invalid tabulated element pattern: {0}")]
    InvalidTable(String),
}

/// Bilinearly interpolated gain table over polar angle θ and azimuth φ
/// (degrees, array coordinates). `gains` is θ-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedGain<T> {
    pub theta: Vec<T>,
    pub phi: Vec<T>,
    pub gains: Vec<T>,
}

impl<T: Real> TabulatedGain<T> {
    pub fn new(theta: Vec<T>, phi: Vec<T>, gains: Vec<T>) -> Result<Self, RadiationError> {
        let table = Self { theta, phi, gains };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), RadiationError> {
        let increasing = |v: &[T]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.theta) || !increasing(&self.phi) {
            return Err(RadiationError::InvalidTable(
                "axes must be nonempty and strictly increasing".into(),
            ));
        }
        if self.gains.len() != self.theta.len() * self.phi.len() {
            return Err(RadiationError::InvalidTable(format!(
                "expected {} gains, got {}",
                self.theta.len() * self.phi.len(),
                self.gains.len()
            )));
        }
        if self.gains.iter().any(|g| !(g.is_finite() && *g >= T::zero())) {
            return Err(RadiationError::InvalidTable("gains must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn bracket(axis: &[T], x: T) -> (usize, usize, T) {
        if axis.len() == 1 || x <= axis[0] {
            return (0, 0, T::zero());
        }
        let last = axis.len() - 1;
        if x >= axis[last] {
            return (last, last, T::zero());
        }
        let hi = axis.partition_point(|&a| a <= x);
        let lo = hi - 1;
        (lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo]))
    }

    pub fn gain(&self, theta: T, phi: T) -> T {
        let (t0, t1, ft) = Self::bracket(&self.theta, theta);
        let (p0, p1, fp) = Self::bracket(&self.phi, phi);
        let n = self.phi.len();
        let g = |i: usize, j: usize| self.gains[i * n + j];
        let one = T::one();
        (one - ft) * ((one - fp) * g(t0, p0) + fp * g(t0, p1))
            + ft * ((one - fp) * g(t1, p0) + fp * g(t1, p1))
    }
}

/// Radiation pattern of a single pixel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ElementPattern<T> {
    Isotropic,
    /// Half-wave dipole along z: `F = cos(π/2·cos θ)/sin θ`.
    #[default]
    DipoleZ,
    /// Half-wave dipole in the xz-plane, tilted `orientation` degrees from z
    /// toward x.
    DipoleInXz { orientation: T },
    Tabulated(TabulatedGain<T>),
}

#[inline]
fn dipole_gain<T: Real>(cos_gamma: T, sin_gamma: T) -> T {
    if sin_gamma <= T::zero() {
        return T::zero();
    }
    (T::FRAC_PI_2() * cos_gamma).cos().abs() / sin_gamma
}

impl<T: Real> ElementPattern<T> {
    /// Field gain toward the unit direction `[x, y, z]`.
    pub fn gain(&self, dir: [T; 3]) -> T {
        let [x, y, z] = dir;
        match self {
            ElementPattern::Isotropic => T::one(),
            ElementPattern::DipoleZ => dipole_gain(z, x.hypot(y)),
            ElementPattern::DipoleInXz { orientation } => {
                let (sb, cb) = sin_cos_deg(*orientation);
                let cos_gamma = x * sb + z * cb;
                // |dir × axis|
                let (c0, c1, c2) = (y * cb, z * sb - x * cb, -y * sb);
                dipole_gain(cos_gamma, (c0 * c0 + c1 * c1 + c2 * c2).sqrt())
            }
            ElementPattern::Tabulated(table) => {
                let theta = z.max(-T::one()).min(T::one()).acos().to_degrees();
                let phi = y.atan2(x).to_degrees();
                table.gain(theta, phi)
            }
        }
    }

    pub fn validate(&self) -> Result<(), RadiationError> {
        match self {
            ElementPattern::Tabulated(t) => t.validate(),
            _ => Ok(()),
        }
    }
}

/// Unit vector for polar angle `theta` and azimuth `phi` (degrees).
pub fn unit_vector<T: Real>(theta: T, phi: T) -> [T; 3] {
    let (st, ct) = sin_cos_deg(theta);
    let (sp, cp) = sin_cos_deg(phi);
    [st * cp, st * sp, ct]
}

/// Unit vector of steering-plane sample `theta_s` in the plane at `phi_s`.
pub fn steering_plane_vector<T: Real>(theta_s: T, phi_s: T) -> [T; 3] {
    let (st, ct) = sin_cos_deg(theta_s);
    let (sp, cp) = sin_cos_deg(phi_s);
    [st * cp, ct, st * sp]
}

/// Element factor for polar angle `theta` and azimuth `phi` (degrees).
pub fn element_factor<T: Real>(pattern: &ElementPattern<T>, theta: T, phi: T) -> T {
    pattern.gain(unit_vector(theta, phi))
}

/// Precomputed complex excitations for repeated array-factor evaluation.
struct Evaluator<'a, T> {
    grid: &'a PixelGrid<T>,
    fields: Vec<Complex<T>>,
    /// `Σ_q E(p, q)` per `p`, used when `w = 0`.
    columns: Vec<Complex<T>>,
}

#[derive(Default)]
struct Scratch<T> {
    ex: Vec<Complex<T>>,
    ez: Vec<Complex<T>>,
    rows: Vec<Complex<T>>,
    terms: Vec<Complex<T>>,
}

#[inline]
fn phasors<T: Real>(out: &mut Vec<Complex<T>>, half: usize, pitch: T, sine: T) {
    out.clear();
    let k = -T::tau() * pitch * sine;
    let half = half as i64;
    out.extend((-half..=half).map(|n| Complex::from_polar(T::one(), k * T::idx(n))));
}

impl<'a, T: Real> Evaluator<'a, T> {
    fn new(grid: &'a PixelGrid<T>) -> Self {
        let fields = grid.fields();
        let rows = grid.spec.rows();
        let columns = fields.chunks(rows).map(pairwise_sum).collect();
        Self {
            grid,
            fields,
            columns,
        }
    }

    fn af(&self, u: T, w: T, s: &mut Scratch<T>) -> Complex<T> {
        let spec = &self.grid.spec;
        phasors(&mut s.ex, spec.half_extent_x, spec.pitch_x, u);
        if w == T::zero() {
            s.terms.clear();
            s.terms.extend(self.columns.iter().zip(&s.ex).map(|(c, e)| *c * *e));
            return pairwise_sum(&s.terms);
        }
        phasors(&mut s.ez, spec.half_extent_z, spec.pitch_z, w);
        s.rows.clear();
        for (col, ex) in self.fields.chunks(spec.rows()).zip(&s.ex) {
            s.terms.clear();
            s.terms.extend(col.iter().zip(&s.ez).map(|(e, z)| *e * *z));
            s.rows.push(pairwise_sum(&s.terms) * *ex);
        }
        pairwise_sum(&s.rows)
    }
}

/// Array factor toward polar angle `theta`, azimuth `phi` (degrees).
pub fn array_factor<T: Real>(grid: &PixelGrid<T>, theta: T, phi: T) -> Complex<T> {
    let [x, _, z] = unit_vector(theta, phi);
    Evaluator::new(grid).af(x, z, &mut Scratch::default())
}

/// Array factor for direction cosines `u = x`, `w = z`.
pub fn array_factor_uw<T: Real>(grid: &PixelGrid<T>, u: T, w: T) -> Complex<T> {
    Evaluator::new(grid).af(u, w, &mut Scratch::default())
}

/// Angular range of a cut, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutSpan<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Default for CutSpan<T> {
    fn default() -> Self {
        Self {
            lo: T::lit(-90.0),
            hi: T::lit(90.0),
        }
    }
}

impl<T: Real> CutSpan<T> {
    pub fn validate(&self) -> Result<(), RadiationError> {
        let ninety = T::lit(90.0);
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi)
            || self.lo < -ninety
            || self.hi > ninety
        {
            return Err(RadiationError::InvalidSpan(
                self.lo.to_f64().unwrap_or(f64::NAN),
                self.hi.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }
}

/// Widens through the shortest decimal form, so `0.1f32` becomes `0.1`.
fn decimal_f64<T: Real>(x: T) -> f64 {
    x.to_string().parse().unwrap_or(f64::NAN)
}

/// Uniform angle samples from `lo` to `hi` (inclusive when reachable).
///
/// When `lo`, `hi` and `step` all have at most nine decimals, each sample is
/// computed as `(L + i·R) / 10^k` from exact integers, so it is the double
/// nearest its decimal value and survives a round trip through text printed
/// with `k` decimals. Returns the samples and `k` when that applies.
pub fn sample_angles(lo: f64, hi: f64, step: f64) -> (Vec<f64>, Option<u32>) {
    let as_int = |x: f64, scale: f64| {
        let y = x * scale;
        let r = y.round();
        ((y - r).abs() <= 1e-11 * r.abs().max(1.0) && r.abs() < 9.0e15).then_some(r as i64)
    };
    for k in 0..=9u32 {
        let scale = 10f64.powi(k as i32);
        if let (Some(l), Some(h), Some(r)) = (as_int(lo, scale), as_int(hi, scale), as_int(step, scale)) {
            if r <= 0 {
                break;
            }
            let n = (h - l) / r;
            let angles = (0..=n).map(|i| (l + i * r) as f64 / scale).collect();
            return (angles, Some(k));
        }
    }
    let n = ((hi - lo) / step + 1e-9).floor() as i64;
    ((0..=n).map(|i| lo + i as f64 * step).collect(), None)
}

/// Normalized intensity along a steering-plane cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCut<T> {
    /// Steering-plane azimuth, degrees.
    pub phi_s: T,
    pub resolution: T,
    /// Decimal places that represent every angle exactly, if any.
    pub decimals: Option<u32>,
    /// θ_s samples, degrees, ascending.
    pub angles: Vec<T>,
    /// `|A|²·|F|² / (Σ|E|)²` per sample.
    pub intensity: Vec<T>,
    /// `(Σ|E|)²`.
    pub normalization: T,
}

impl<T: Real> PatternCut<T> {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.angles.iter().copied().zip(self.intensity.iter().copied())
    }

    /// Index and value of the largest intensity.
    pub fn argmax(&self) -> Option<(usize, T)> {
        self.intensity
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
    }

    /// Both ends sit exactly at endfire (±90°); the pattern is then mirror
    /// symmetric about each end because `sin θ_s` turns around there.
    pub fn ends_at_endfire(&self) -> bool {
        let ninety = T::lit(90.0);
        matches!((self.angles.first(), self.angles.last()), (Some(&a), Some(&b)) if a == -ninety && b == ninety)
    }

    /// Copy with every intensity multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.intensity.iter_mut().for_each(|v| *v = *v * c);
        out
    }
}

fn check_resolution<T: Real>(res: T) -> Result<(), RadiationError> {
    if !(res.is_finite() && res > T::zero()) {
        return Err(RadiationError::InvalidResolution(res.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

fn normalization<T: Real>(grid: &PixelGrid<T>) -> Result<T, RadiationError> {
    let total = total_amplitude(grid);
    if !(total > T::zero()) {
        return Err(RadiationError::ZeroAperture);
    }
    Ok(total * total)
}

/// Evaluates a steering-plane cut at azimuth `phi_s`.
///
/// For `φ_s = 0` every sample has `w = 0`, and the pixel columns are summed
/// once up front, reducing the per-angle cost from `O(N_x·N_z)` to `O(N_x)`.
pub fn compute_cut<T: Real>(
    grid: &PixelGrid<T>,
    element: &ElementPattern<T>,
    phi_s: T,
    resolution: T,
    span: CutSpan<T>,
) -> Result<PatternCut<T>, RadiationError> {
    check_resolution(resolution)?;
    span.validate()?;
    element.validate()?;
    let norm = normalization(grid)?;
    let (angles, decimals) = sample_angles(
        decimal_f64(span.lo),
        decimal_f64(span.hi),
        decimal_f64(resolution),
    );
    let angles: Vec<T> = angles.into_iter().map(T::lit).collect();
    let eval = Evaluator::new(grid);
    let collapse = phi_s == T::zero();
    let intensity = angles
        .par_iter()
        .map_init(Scratch::default, |scratch, &theta_s| {
            let dir = steering_plane_vector(theta_s, phi_s);
            let w = if collapse { T::zero() } else { dir[2] };
            let a = eval.af(dir[0], w, scratch);
            let f = element.gain(dir);
            a.norm_sqr() * f * f / norm
        })
        .collect();
    Ok(PatternCut {
        phi_s,
        resolution,
        decimals,
        angles,
        intensity,
        normalization: norm,
    })
}

/// Normalized intensity over the forward hemisphere on a (θ, φ) grid in array
/// coordinates: `θ ∈ [0°, 180°]` from z, `φ ∈ [0°, 180°]` from x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern3D<T> {
    pub theta_resolution: T,
    pub phi_resolution: T,
    pub theta: Vec<T>,
    pub phi: Vec<T>,
    /// θ-major.
    pub intensity: Vec<T>,
    pub normalization: T,
}

/// Point clouds of the beam projected onto the three coordinate planes; each
/// node contributes `intensity·(unit vector)` projected onto the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projections<T> {
    pub xy: Vec<[T; 2]>,
    pub xz: Vec<[T; 2]>,
    pub yz: Vec<[T; 2]>,
}

impl<T: Real> Pattern3D<T> {
    pub fn value(&self, i_theta: usize, i_phi: usize) -> T {
        self.intensity[i_theta * self.phi.len() + i_phi]
    }

    /// `(θ index, φ index, intensity)` of the global maximum.
    pub fn argmax(&self) -> Option<(usize, usize, T)> {
        let n = self.phi.len();
        self.intensity
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best: Option<(usize, T)>, (i, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
            .map(|(i, v)| (i / n, i % n, v))
    }

    pub fn projections(&self) -> Projections<T> {
        let mut out = Projections {
            xy: Vec::with_capacity(self.intensity.len()),
            xz: Vec::with_capacity(self.intensity.len()),
            yz: Vec::with_capacity(self.intensity.len()),
        };
        for (i, &t) in self.theta.iter().enumerate() {
            for (j, &p) in self.phi.iter().enumerate() {
                let v = self.value(i, j);
                let [x, y, z] = unit_vector(t, p).map(|c| c * v);
                out.xy.push([x, y]);
                out.xz.push([x, z]);
                out.yz.push([y, z]);
            }
        }
        out
    }
}

/// Samples the forward hemisphere.
pub fn compute_3d<T: Real>(
    grid: &PixelGrid<T>,
    element: &ElementPattern<T>,
    theta_resolution: T,
    phi_resolution: T,
) -> Result<Pattern3D<T>, RadiationError> {
    check_resolution(theta_resolution)?;
    check_resolution(phi_resolution)?;
    element.validate()?;
    let norm = normalization(grid)?;
    let axis = |res: T| -> Vec<T> {
        sample_angles(0.0, 180.0, decimal_f64(res))
            .0
            .into_iter()
            .map(T::lit)
            .collect()
    };
    let theta = axis(theta_resolution);
    let phi = axis(phi_resolution);
    let eval = Evaluator::new(grid);
    let nodes: Vec<(T, T)> = theta
        .iter()
        .flat_map(|&t| phi.iter().map(move |&p| (t, p)))
        .collect();
    let intensity = nodes
        .par_iter()
        .map_init(Scratch::default, |scratch, &(t, p)| {
            let dir = unit_vector(t, p);
            let a = eval.af(dir[0], dir[2], scratch);
            let f = element.gain(dir);
            a.norm_sqr() * f * f / norm
        })
        .collect();
    Ok(Pattern3D {
        theta_resolution,
        phi_resolution,
        theta,
        phi,
        intensity,
        normalization: norm,
    })
}

/// Brute-force reference evaluation: one complex exponential per pixel with
/// the full phase argument, summed in storage order. Shares no code with the
/// evaluator above.
pub mod oracle {
    use super::*;

    pub fn array_factor_direct<T: Real>(grid: &PixelGrid<T>, u: T, w: T) -> Complex<T> {
        let spec = &grid.spec;
        let mut acc = Complex::new(T::zero(), T::zero());
        for (p, q, amp, phase) in grid.pixels() {
            let arg = phase
                - T::tau() * (T::idx(p) * spec.pitch_x * u + T::idx(q) * spec.pitch_z * w);
            acc = acc + Complex::new(amp * arg.cos(), amp * arg.sin());
        }
        acc
    }

    /// `Σ|E|`, the natural scale for judging the error of a sum of phasors.
    pub fn l1_norm<T: Real>(grid: &PixelGrid<T>) -> T {
        grid.amplitudes().iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Normalized intensity at one steering-plane sample.
    pub fn cut_sample_direct<T: Real>(
        grid: &PixelGrid<T>,
        element: &ElementPattern<T>,
        theta_s: T,
        phi_s: T,
    ) -> T {
        let dir = steering_plane_vector(theta_s, phi_s);
        let a = array_factor_direct(grid, dir[0], dir[2]);
        let f = element.gain(dir);
        let l1 = l1_norm(grid);
        a.norm_sqr() * f * f / (l1 * l1)
    }
}
