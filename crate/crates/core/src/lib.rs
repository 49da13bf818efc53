//! Optical phased-array beam steering simulator.
//!
//! The pipeline is: build a per-pixel excitation ([`excitation`]), evaluate the
//! normalized far-field power pattern ([`radiation`]), then locate and classify
//! lobes and measure the sidelobe-to-peak ratio ([`lobes`]). Closed-form
//! steering and lobe-direction arithmetic lives in [`array_model`]; parameter
//! sweeps over many scenarios are driven by [`sweep`], and [`io`] covers the
//! config format and the CSV/JSON exporters used by the `opa-steer` binary.
//!
//! All lengths are in units of the wavelength in the propagation medium, so the
//! wavenumber is `2π`. Public angles are in degrees.
//!
//! The numerical core is generic over the scalar type through [`Real`];
//! `f64` aliases are provided at the crate root for the common case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_model;
pub mod excitation;
pub mod io;
pub mod lobes;
pub mod num;
pub mod radiation;
pub mod summation;
pub mod sweep;

pub use crate::num::Real;

pub use array_model::{
    grating_lobe_directions, long_period_info, lpgl_directions, max_pitch,
    min_phase_range_for_ideal, steering_from_m, ArrayModelError, ArraySpec, GratingLobe,
    LongPeriodInfo, LpglDirection, SteeringSpec,
};
pub use excitation::{
    apply_amplitude_perturbation, apply_phase_limit, apply_windows, ideal_phase_profile,
    solve_perturbation_params, total_amplitude, CompensationStrategy, ExcitationError,
    PerturbationSpec, PhaseLimitSpec, PixelGrid, WindowSpec,
};
pub use lobes::{
    classify_lobes, detect_lobes, sidelobe_to_peak, ClassifyParams, DetectedPeak, Lobe,
    LobeError, LobeKind, LobeReport, SprOptions,
};
pub use radiation::{
    array_factor, compute_3d, compute_cut, element_factor, CutSpan, ElementPattern, Pattern3D,
    PatternCut,
};

/// Double-precision array geometry.
pub type ArraySpec64 = ArraySpec<f64>;
/// Double-precision steering target.
pub type SteeringSpec64 = SteeringSpec<f64>;
/// Double-precision excitation grid.
pub type PixelGrid64 = PixelGrid<f64>;
/// Double-precision pattern cut.
pub type PatternCut64 = PatternCut<f64>;
/// Double-precision hemisphere pattern.
pub type Pattern3D64 = Pattern3D<f64>;
/// Double-precision lobe report.
pub type LobeReport64 = LobeReport<f64>;
/// Double-precision element pattern.
pub type ElementPattern64 = ElementPattern<f64>;

/// Single-precision excitation grid.
pub type PixelGrid32 = PixelGrid<f32>;
/// Single-precision pattern cut.
pub type PatternCut32 = PatternCut<f32>;
