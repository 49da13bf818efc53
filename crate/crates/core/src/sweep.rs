//! Scenario evaluation and parameter sweeps.
//!
//! A [`Scenario`] is one fully specified run: synthesize the excitation,
//! evaluate a steering-plane cut, and analyze its lobes. The main-lobe window
//! comes from an ideal reference cut (same aperture, window, element and
//! sampling, unlimited phase, no ripple).
//!
//! [`expand_plan`] turns a base scenario plus per-axis value lists into the
//! Cartesian product, and [`run_sweep`] evaluates a plan on a dedicated rayon
//! pool. Results are indexed by scenario id and do not depend on the pool
//! size or completion order.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array_model::{steering_from_m, ArrayModelError, ArraySpec, SteeringSpec};
use crate::excitation::{
    synthesize, CompensationStrategy, ExcitationError, PerturbationRequest, PhaseLimitSpec,
    PixelGrid, WindowSpec,
};
use crate::lobes::{exclusion_from_reference, sidelobe_to_peak, ClassifyParams, LobeError, LobeReport, SprOptions};
use crate::num::Real;
use crate::radiation::{compute_cut, CutSpan, ElementPattern, PatternCut, RadiationError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Array(#[from] ArrayModelError),
    #[error(transparent)]
    Excitation(#[from] ExcitationError),
    #[error(transparent)]
    Radiation(#[from] RadiationError),
    #[error(transparent)]
    Lobe(#[from] LobeError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid value {value} on axis '{axis}': {reason}")]
    InvalidAxis {
        axis: &'static str,
        value: String,
        reason: String,
    },
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("group {0} has no successful scenarios")]
    EmptyGroup(String),
}

/// One fully specified evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub array: ArraySpec<T>,
    pub steering: SteeringSpec<T>,
    pub window: WindowSpec<T>,
    pub phase_limit: PhaseLimitSpec<T>,
    pub perturbation: Option<PerturbationRequest<T>>,
    pub element: ElementPattern<T>,
    /// Cut step, degrees.
    pub resolution: T,
    pub span: CutSpan<T>,
    /// Report an extra spr restricted to `|θ| ≤ fov`.
    pub fov: Option<T>,
}

/// Everything a single evaluation produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub grid: PixelGrid<T>,
    pub cut: PatternCut<T>,
    pub exclusion_halfwidth: T,
    pub report: Result<LobeReport<T>, LobeError>,
}

impl<T: Real> Scenario<T> {
    /// `N × N` array at `pitch` with a circular+Gaussian(0.5) window, dipole
    /// elements, unlimited phase and a 0.01° cut over the visible range.
    pub fn standard(n: usize, pitch: T, steering: SteeringSpec<T>) -> Result<Self, ScenarioError> {
        Ok(Self {
            array: ArraySpec::square(n, pitch)?,
            steering,
            window: WindowSpec::double(T::lit(0.5)),
            phase_limit: PhaseLimitSpec::unlimited(),
            perturbation: None,
            element: ElementPattern::DipoleZ,
            resolution: T::lit(0.01),
            span: CutSpan::default(),
            fov: None,
        })
    }

    pub fn synthesize(&self) -> Result<PixelGrid<T>, ExcitationError> {
        synthesize(
            &self.array,
            &self.steering,
            self.perturbation.as_ref(),
            &self.phase_limit,
            &self.window,
        )
    }

    pub fn cut(&self, grid: &PixelGrid<T>) -> Result<PatternCut<T>, RadiationError> {
        compute_cut(grid, &self.element, self.steering.phi_s, self.resolution, self.span)
    }

    /// The same scenario with unlimited phase and no ripple.
    pub fn reference(&self) -> Self {
        Self {
            phase_limit: PhaseLimitSpec::unlimited(),
            perturbation: None,
            ..self.clone()
        }
    }

    /// Main-lobe search half-width measured on the reference cut.
    pub fn exclusion_halfwidth(&self) -> Result<T, ScenarioError> {
        let reference = self.reference();
        let cut = reference.cut(&reference.synthesize()?)?;
        Ok(exclusion_from_reference(&cut)?)
    }

    pub fn spr_options(&self, exclusion_halfwidth: T) -> SprOptions<T> {
        let mut opts = SprOptions::new(exclusion_halfwidth);
        if let Some(pitch) = self.array.in_plane_pitch(self.steering.phi_s) {
            opts = opts.with_classification(ClassifyParams {
                lpgl: !self.is_ideal(),
                ..ClassifyParams::new(pitch)
            });
        }
        opts.fov = self.fov;
        opts
    }

    /// Unlimited phase and no amplitude ripple.
    pub fn is_ideal(&self) -> bool {
        self.phase_limit.is_unlimited() && self.perturbation.is_none_or(|p| p.var == T::zero())
    }

    /// Full pipeline, keeping the intermediate grid and cut.
    pub fn evaluate_full(&self) -> Result<Evaluation<T>, ScenarioError> {
        let exclusion_halfwidth = self.exclusion_halfwidth()?;
        self.evaluate_full_with(exclusion_halfwidth)
    }

    pub fn evaluate_full_with(&self, exclusion_halfwidth: T) -> Result<Evaluation<T>, ScenarioError> {
        let grid = self.synthesize()?;
        let cut = self.cut(&grid)?;
        let report = sidelobe_to_peak(&cut, &self.steering, &self.spr_options(exclusion_halfwidth));
        Ok(Evaluation {
            grid,
            cut,
            exclusion_halfwidth,
            report,
        })
    }

    pub fn evaluate(&self) -> Result<LobeReport<T>, ScenarioError> {
        Ok(self.evaluate_full()?.report?)
    }

    fn reference_key(&self) -> String {
        serde_json::to_string(&(
            &self.array,
            &self.steering,
            &self.window,
            &self.element,
            self.resolution,
            &self.span,
        ))
        .expect("scenario fields serialize")
    }
}

/// Sweep axes. `None` keeps the base scenario's value; every listed value
/// must be valid for its axis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanAxes<T> {
    pub psi_max: Option<Vec<T>>,
    pub strategy: Option<Vec<CompensationStrategy>>,
    pub var: Option<Vec<T>>,
    pub p_d: Option<Vec<T>>,
    pub pitch: Option<Vec<T>>,
    /// Steering angles, degrees. Exclusive with `m`.
    pub theta_s: Option<Vec<T>>,
    /// Pixels per sawtooth period, converted to `θ_s` with the x pitch.
    pub m: Option<Vec<T>>,
    pub window: Option<Vec<WindowSpec<T>>>,
}

/// Sweep axis names, in expansion order (the first varies slowest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PsiMax,
    Strategy,
    Var,
    PD,
    Pitch,
    ThetaS,
    Window,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::PsiMax,
        Axis::Strategy,
        Axis::Var,
        Axis::PD,
        Axis::Pitch,
        Axis::ThetaS,
        Axis::Window,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Axis::PsiMax => "psi_max",
            Axis::Strategy => "strategy",
            Axis::Var => "var",
            Axis::PD => "p_d",
            Axis::Pitch => "pitch",
            Axis::ThetaS => "theta_s",
            Axis::Window => "window",
        }
    }

    /// This axis's value in `s`, as text.
    pub fn value_of<T: Real>(&self, s: &Scenario<T>) -> String {
        let num = |x: T| format!("{}", x.to_f64().unwrap_or(f64::NAN));
        match self {
            Axis::PsiMax => num(s.phase_limit.psi_max),
            Axis::Strategy => s.phase_limit.strategy.name().to_string(),
            Axis::Var => num(s.perturbation.map_or(T::zero(), |p| p.var)),
            Axis::PD => s.perturbation.map_or(String::new(), |p| num(p.p_d)),
            Axis::Pitch => num(s.array.pitch_x),
            Axis::ThetaS => num(s.steering.theta_s),
            Axis::Window => window_label(&s.window),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown axis '{s}'"))
    }
}

/// Compact window description: `none`, `circular`, `gaussian(σ)`,
/// `circular+gaussian(σ)`, with an `aniso-` prefix on anisotropic tapers.
pub fn window_label<T: Real>(w: &WindowSpec<T>) -> String {
    let g = w.gaussian_sigma.map(|s| {
        format!(
            "{}gaussian({})",
            if w.anisotropic { "aniso-" } else { "" },
            s.to_f64().unwrap_or(f64::NAN)
        )
    });
    match (w.circular, g) {
        (false, None) => "none".into(),
        (true, None) => "circular".into(),
        (false, Some(g)) => g,
        (true, Some(g)) => format!("circular+{g}"),
    }
}

fn axis_err(axis: Axis, value: impl std::fmt::Display, reason: impl ToString) -> SweepError {
    SweepError::InvalidAxis {
        axis: axis.name(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn values<X: Clone>(axis: Axis, list: &Option<Vec<X>>, base: X) -> Result<Vec<X>, SweepError> {
    match list {
        None => Ok(vec![base]),
        Some(v) if v.is_empty() => Err(axis_err(axis, "[]", "axis lists no values")),
        Some(v) => Ok(v.clone()),
    }
}

/// Expands `axes` around `base` into the full Cartesian product. Scenario ids
/// are positions in the returned list; the last axis in [`Axis::ALL`] varies
/// fastest.
pub fn expand_plan<T: Real>(base: &Scenario<T>, axes: &PlanAxes<T>) -> Result<Vec<Scenario<T>>, SweepError> {
    if axes.theta_s.is_some() && axes.m.is_some() {
        return Err(axis_err(Axis::ThetaS, "theta_s and m", "give steering as theta_s or m, not both"));
    }
    let psi = values(Axis::PsiMax, &axes.psi_max, base.phase_limit.psi_max)?;
    let strategies = values(Axis::Strategy, &axes.strategy, base.phase_limit.strategy)?;
    let base_var = base.perturbation.map(|p| p.var);
    let base_pd = base.perturbation.map(|p| p.p_d);
    let vars: Vec<Option<T>> = match &axes.var {
        None => vec![base_var],
        Some(v) => values(Axis::Var, &Some(v.clone()), T::zero())?.into_iter().map(Some).collect(),
    };
    let pds: Vec<Option<T>> = match &axes.p_d {
        None => vec![base_pd],
        Some(v) => values(Axis::PD, &Some(v.clone()), T::one())?.into_iter().map(Some).collect(),
    };
    let pitches = values(Axis::Pitch, &axes.pitch, base.array.pitch_x)?;
    let windows = values(Axis::Window, &axes.window, base.window)?;

    for &v in &psi {
        PhaseLimitSpec::new(v, CompensationStrategy::HalfHalf).map_err(|e| axis_err(Axis::PsiMax, f(v), e))?;
    }
    for v in vars.iter().flatten() {
        if !(v.is_finite() && *v >= T::zero()) {
            return Err(axis_err(Axis::Var, f(*v), "must be finite and >= 0"));
        }
    }
    for v in pds.iter().flatten() {
        if !(v.is_finite() && *v > T::zero()) {
            return Err(axis_err(Axis::PD, f(*v), "must be finite and > 0"));
        }
    }
    if vars.iter().any(Option::is_some) && pds.iter().any(Option::is_none) {
        return Err(axis_err(Axis::PD, "none", "a var axis needs p_d values"));
    }
    for &a in &pitches {
        if !(a.is_finite() && a > T::zero()) {
            return Err(axis_err(Axis::Pitch, f(a), "must be finite and > 0"));
        }
    }
    for w in &windows {
        w.validate().map_err(|e| axis_err(Axis::Window, window_label(w), e))?;
    }

    // Steering depends on the pitch when given as M.
    let steering_for = |pitch: T| -> Result<Vec<SteeringSpec<T>>, SweepError> {
        let phi = base.steering.phi_s;
        match (&axes.theta_s, &axes.m) {
            (Some(t), _) => values(Axis::ThetaS, &Some(t.clone()), T::zero())?
                .into_iter()
                .map(|t| SteeringSpec::new(t, phi).map_err(|e| axis_err(Axis::ThetaS, f(t), e)))
                .collect(),
            (None, Some(m)) => values(Axis::ThetaS, &Some(m.clone()), T::zero())?
                .into_iter()
                .map(|m| {
                    steering_from_m(m, pitch)
                        .and_then(|t| SteeringSpec::new(t, phi))
                        .map_err(|e| axis_err(Axis::ThetaS, format!("M = {}", f(m)), e))
                })
                .collect(),
            (None, None) => Ok(vec![base.steering]),
        }
    };

    let mut out = Vec::new();
    for &psi_max in &psi {
        for &strategy in &strategies {
            for &var in &vars {
                for &p_d in &pds {
                    for &pitch in &pitches {
                        for steering in steering_for(pitch)? {
                            for window in &windows {
                                let mut s = base.clone();
                                s.phase_limit = PhaseLimitSpec { psi_max, strategy };
                                s.perturbation = match (var, p_d) {
                                    (Some(var), Some(p_d)) => Some(PerturbationRequest { p_d, var }),
                                    _ => None,
                                };
                                if axes.pitch.is_some() {
                                    s.array.pitch_x = pitch;
                                    s.array.pitch_z = pitch;
                                }
                                s.steering = steering;
                                s.window = *window;
                                out.push(s);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn f<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepStatus {
    Ok,
    Missteer,
    Infeasible,
}

impl SweepStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SweepStatus::Ok => "ok",
            SweepStatus::Missteer => "missteer",
            SweepStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub id: usize,
    pub scenario: Scenario<T>,
    pub status: SweepStatus,
    pub report: Option<LobeReport<T>>,
    /// Failure description for non-ok statuses.
    pub message: Option<String>,
    pub elapsed: Duration,
}

impl<T: Real> SweepResult<T> {
    pub fn spr(&self) -> Option<T> {
        self.report.as_ref().map(|r| r.spr)
    }
}

fn classify(err: &ScenarioError) -> SweepStatus {
    match err {
        ScenarioError::Lobe(LobeError::Missteer { .. } | LobeError::NoMainLobe { .. }) => SweepStatus::Missteer,
        _ => SweepStatus::Infeasible,
    }
}

fn run_one<T: Real>(id: usize, scenario: &Scenario<T>, exclusion: &Result<T, ScenarioError>) -> SweepResult<T> {
    let start = Instant::now();
    let outcome = exclusion
        .clone()
        .and_then(|excl| Ok(scenario.evaluate_full_with(excl)?.report?));
    let (status, report, message) = match outcome {
        Ok(r) => (SweepStatus::Ok, Some(r), None),
        Err(e) => (classify(&e), None, Some(e.to_string())),
    };
    SweepResult {
        id,
        scenario: scenario.clone(),
        status,
        report,
        message,
        elapsed: start.elapsed(),
    }
}

/// Evaluates every scenario on a pool of `workers` threads.
///
/// Reference cuts shared by several scenarios are computed once. A failing
/// scenario yields a non-ok status and never affects the others.
pub fn run_sweep<T: Real>(plan: &[Scenario<T>], workers: usize) -> Result<Vec<SweepResult<T>>, SweepError> {
    if workers == 0 {
        return Err(SweepError::NoWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        let mut refs: BTreeMap<String, usize> = BTreeMap::new();
        let mut owners = Vec::new();
        let keys: Vec<usize> = plan
            .iter()
            .enumerate()
            .map(|(i, s)| {
                *refs.entry(s.reference_key()).or_insert_with(|| {
                    owners.push(i);
                    owners.len() - 1
                })
            })
            .collect();
        let exclusions: Vec<Result<T, ScenarioError>> =
            owners.par_iter().map(|&i| plan[i].exclusion_halfwidth()).collect();
        plan.par_iter()
            .enumerate()
            .map(|(id, s)| run_one(id, s, &exclusions[keys[id]]))
            .collect()
    }))
}

/// One row of an aggregated spr table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow<T> {
    /// `(axis, value)` pairs in `group_by` order.
    pub key: Vec<(Axis, String)>,
    pub avg_spr: T,
    /// Successful scenarios averaged.
    pub count: usize,
    /// Scenarios left out for a non-ok status.
    pub excluded: usize,
}

type GroupKey = Vec<(Axis, String)>;

/// Per-group `(key, spr sum, ok count, excluded count)`, in order of first appearance.
fn group_totals<T: Real>(results: &[SweepResult<T>], group_by: &[Axis]) -> Vec<(GroupKey, T, usize, usize)> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut acc: BTreeMap<GroupKey, (T, usize, usize)> = BTreeMap::new();
    for r in results {
        let key: GroupKey = group_by.iter().map(|a| (*a, a.value_of(&r.scenario))).collect();
        let entry = acc.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (T::zero(), 0, 0)
        });
        match r.spr() {
            Some(spr) if r.status == SweepStatus::Ok => {
                entry.0 = entry.0 + spr;
                entry.1 += 1;
            }
            _ => entry.2 += 1,
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (sum, count, excluded) = acc[&key];
            (key, sum, count, excluded)
        })
        .collect()
}

fn group_label(key: &[(Axis, String)]) -> String {
    key.iter().map(|(a, v)| format!("{}={v}", a.name())).collect::<Vec<_>>().join(",")
}

/// Mean spr of successful results per distinct combination of the `group_by`
/// axes; groups appear in order of their first result and are summed in
/// result order.
pub fn aggregate_avg_spr<T: Real>(results: &[SweepResult<T>], group_by: &[Axis]) -> Result<Vec<GroupRow<T>>, SweepError> {
    aggregate_partial(results, group_by)
        .into_iter()
        .map(|row| match row.avg_spr {
            Some(avg_spr) => Ok(GroupRow {
                key: row.key,
                avg_spr,
                count: row.count,
                excluded: row.excluded,
            }),
            None => Err(SweepError::EmptyGroup(group_label(&row.key))),
        })
        .collect()
}

/// A group row whose mean is absent when every scenario in it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialGroupRow<T> {
    pub key: Vec<(Axis, String)>,
    pub avg_spr: Option<T>,
    pub count: usize,
    pub excluded: usize,
}

/// Like [`aggregate_avg_spr`] but keeps all-failed groups with no mean.
pub fn aggregate_partial<T: Real>(results: &[SweepResult<T>], group_by: &[Axis]) -> Vec<PartialGroupRow<T>> {
    group_totals(results, group_by)
        .into_iter()
        .map(|(key, sum, count, excluded)| PartialGroupRow {
            key,
            avg_spr: (count > 0).then(|| sum / T::idx(count as i64)),
            count,
            excluded,
        })
        .collect()
}

/// Mean spr over a set of scenarios with the excluded count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageSpr<T> {
    pub mean: T,
    pub count: usize,
    pub excluded: usize,
}

/// Runs the scenarios and averages their spr; failed scenarios are excluded
/// and counted.
pub fn average_spr<T: Real>(scenarios: &[Scenario<T>], workers: usize) -> Result<AverageSpr<T>, SweepError> {
    let results = run_sweep(scenarios, workers)?;
    let row = aggregate_avg_spr(&results, &[])?
        .pop()
        .ok_or_else(|| SweepError::EmptyGroup("all".into()))?;
    Ok(AverageSpr {
        mean: row.avg_spr,
        count: row.count,
        excluded: row.excluded,
    })
}
