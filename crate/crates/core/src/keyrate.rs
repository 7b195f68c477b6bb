//! Secure-key-rate lower bound, signal-intensity optimization, and
//! attenuation sweeps for the multi-mode and single-mode-baseline models.
//!
//! The rate formula is the standard decoy-state expression
//! S ≥ q·[Y₁p₁(1 − H(e₁)) − Q·f·H(E)] with the single-photon yield and error
//! bounds supplied either by the multi-mode worst-case iteration or by the
//! single-mode baseline. Negative values mean "no certified key" and are
//! reported as zero rate.

use rayon::prelude::*;

use crate::bounds::{
    check_yrel_condition, e1_ub_decoy, iterate_y1_bound, single_mode_y1_lb, BoundResult,
    ChannelObservables,
};
use crate::channel::{honest_observables, ChannelParams, DetectorParams};
use crate::source::{
    enumerate_multiphoton, solve_squeezing, ModeOccupation, ModeWeights, MultiphotonEnsemble,
    PhotonClassProbs, SourceState,
};
use crate::{Error, Result};

/// Binary Shannon entropy H(x) = −x·log₂x − (1−x)·log₂(1−x), with
/// H(0) = H(1) = 0.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "entropy argument {x} outside [0, 1]"
        )));
    }
    Ok(h2(x))
}

fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Search grid for the signal mean photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl MuGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite())
            || self.min < 0.0
            || self.max < self.min
            || self.step <= 0.0
        {
            return Err(Error::InvalidArgument(format!(
                "bad mu grid: min {}, max {}, step {}",
                self.min, self.max, self.step
            )));
        }
        let n = ((self.max - self.min) / self.step).round() as usize;
        let mut values: Vec<f64> = (0..=n).map(|i| self.min + i as f64 * self.step).collect();
        values.retain(|&mu| mu <= self.max + 1e-9 * self.step);
        Ok(values)
    }
}

impl Default for MuGrid {
    fn default() -> Self {
        Self {
            min: 0.02,
            max: 1.5,
            step: 0.02,
        }
    }
}

/// Protocol-level constants of the rate formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Basis-sifting factor; 1/2 for standard BB84.
    pub q: f64,
    /// Error-correction inefficiency, treated as a constant factor.
    pub f: f64,
    /// Mean photon number of the weak decoy state.
    pub mu_d: f64,
    /// Search grid for the signal mean photon number.
    pub mu_s_grid: MuGrid,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            q: 0.5,
            f: 1.22,
            mu_d: 0.1,
            mu_s_grid: MuGrid::default(),
        }
    }
}

impl ProtocolParams {
    fn validate(&self) -> Result<()> {
        if !self.q.is_finite() || self.q <= 0.0 || self.q > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "q = {} outside (0, 1]",
                self.q
            )));
        }
        if !self.f.is_finite() || self.f < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "error-correction inefficiency f = {} below 1",
                self.f
            )));
        }
        if !self.mu_d.is_finite() || self.mu_d <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "decoy mean photon number {} must be positive",
                self.mu_d
            )));
        }
        self.mu_s_grid.values().map(|_| ())
    }
}

/// Numeric tolerances and budgets of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericControls {
    /// Photon-number truncation tail tolerance.
    pub eps_tail: f64,
    /// Multiphoton enumeration mass threshold.
    pub eps_enum: f64,
    /// Enumeration event budget.
    pub max_events: usize,
    /// Yield-iteration stopping tolerance.
    pub iter_tol: f64,
    /// Yield-iteration cycle budget.
    pub max_iter: u32,
    /// Width at which the signal-intensity refinement stops.
    pub mu_refine_tol: f64,
    /// Initial photon-number truncation point.
    pub n_cap_start: usize,
}

impl Default for NumericControls {
    fn default() -> Self {
        Self {
            eps_tail: 1e-10,
            eps_enum: 1e-9,
            max_events: 10_000_000,
            iter_tol: 1e-12,
            max_iter: 10_000,
            mu_refine_tol: 1e-4,
            n_cap_start: 64,
        }
    }
}

impl NumericControls {
    fn validate(&self) -> Result<()> {
        if !self.eps_tail.is_finite() || self.eps_tail <= 0.0 || self.eps_tail > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "eps_tail = {} outside (0, 1e-9]",
                self.eps_tail
            )));
        }
        if !self.eps_enum.is_finite() || self.eps_enum <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "eps_enum = {} must be positive",
                self.eps_enum
            )));
        }
        if self.max_events == 0 {
            return Err(Error::InvalidArgument("max_events must be positive".into()));
        }
        if !self.iter_tol.is_finite() || self.iter_tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "iter_tol = {} must be positive",
                self.iter_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if !self.mu_refine_tol.is_finite() || self.mu_refine_tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "mu_refine_tol = {} must be positive",
                self.mu_refine_tol
            )));
        }
        if self.n_cap_start < 2 {
            return Err(Error::InvalidArgument(
                "n_cap_start must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Everything needed to evaluate one source/detector configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub weights: ModeWeights,
    pub detector: DetectorParams,
    pub protocol: ProtocolParams,
    pub numerics: NumericControls,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.numerics.validate()
    }
}

/// Which single-photon bounds feed the rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// Worst-case bounds against a mode-resolving adversary.
    MultiMode,
    /// Baseline that treats all photons as occupying one mode.
    SingleModeBaseline,
}

/// Key-rate lower bound per pulse:
/// max(0, q·[y1_lb·p1_s·(1 − H(min(e1_ub, 1/2))) − q_s·f·H(e_s)]).
pub fn secure_key_rate(
    pp: &ProtocolParams,
    y1_lb: f64,
    p1_s: f64,
    e1_ub: f64,
    q_s: f64,
    e_s: f64,
) -> f64 {
    let privacy = y1_lb * p1_s * (1.0 - h2(e1_ub.min(0.5)));
    let correction = q_s * pp.f * h2(e_s);
    (pp.q * (privacy - correction)).max(0.0)
}

/// Rate and diagnostics of one (attenuation, signal intensity) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEval {
    pub rate: f64,
    /// Operative lower bound on the signal single-photon yield.
    pub y1_lb_s: f64,
    /// Operative upper bound on the signal single-photon error rate.
    pub e1_ub_s: f64,
    pub gain_s: f64,
    pub qber_s: f64,
    /// Single-photon probability of the signal state.
    pub p1_s: f64,
    /// Result of the baseline-validity distribution check.
    pub yrel_ok: bool,
    /// Full multi-mode bound set; absent for the baseline model.
    pub bound: Option<BoundResult>,
}

struct DecoyStats {
    state: SourceState,
    probs: PhotonClassProbs,
    occ: ModeOccupation,
}

struct SignalStats {
    probs: PhotonClassProbs,
    occ: ModeOccupation,
    ens: MultiphotonEnsemble,
}

enum SignalEntry {
    MultiMode(Box<SignalStats>),
    Baseline(PhotonClassProbs),
}

fn decoy_stats(sc: &Scenario) -> Result<DecoyStats> {
    let state = solve_squeezing(&sc.weights, sc.protocol.mu_d)?;
    let probs = state.class_probabilities(sc.numerics.n_cap_start, sc.numerics.eps_tail)?;
    let occ = state.mode_occupations()?;
    Ok(DecoyStats { state, probs, occ })
}

/// Builds the per-mu signal-side statistics. Degenerate intensities (for
/// which the requested model cannot be evaluated at all) come back as None
/// and count as zero rate.
fn make_entry(
    sc: &Scenario,
    dec: &DecoyStats,
    model: RateModel,
    mu_s: f64,
) -> Result<Option<SignalEntry>> {
    let state = solve_squeezing(&sc.weights, mu_s)?;
    let probs = state.class_probabilities(sc.numerics.n_cap_start, sc.numerics.eps_tail)?;
    match model {
        RateModel::MultiMode => {
            let occ = match state.mode_occupations() {
                Ok(occ) => occ,
                Err(Error::DegenerateSource(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let ens = match enumerate_multiphoton(
                &state,
                &dec.state,
                sc.numerics.eps_enum,
                sc.numerics.max_events,
            ) {
                Ok(ens) => ens,
                Err(Error::DegenerateSource(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            Ok(Some(SignalEntry::MultiMode(Box::new(SignalStats {
                probs,
                occ,
                ens,
            }))))
        }
        RateModel::SingleModeBaseline => Ok(Some(SignalEntry::Baseline(probs))),
    }
}

fn eval_entry(
    sc: &Scenario,
    dec: &DecoyStats,
    entry: &SignalEntry,
    alpha_db: f64,
) -> Result<RateEval> {
    let ch = ChannelParams::new(alpha_db)?;
    match entry {
        SignalEntry::MultiMode(sig) => {
            let obs = honest_observables(&sig.probs, &dec.probs, &ch, &sc.detector)?;
            let bound = iterate_y1_bound(
                &obs,
                &sig.probs,
                &dec.probs,
                &sig.occ,
                &dec.occ,
                &sig.ens,
                sc.detector.e0,
                sc.numerics.iter_tol,
                sc.numerics.max_iter,
            )?;
            let rate = secure_key_rate(
                &sc.protocol,
                bound.y1_lb_s,
                sig.probs.p1(),
                bound.e1_ub_s,
                obs.q_s,
                obs.e_s,
            );
            Ok(RateEval {
                rate,
                y1_lb_s: bound.y1_lb_s,
                e1_ub_s: bound.e1_ub_s,
                gain_s: obs.q_s,
                qber_s: obs.e_s,
                p1_s: sig.probs.p1(),
                yrel_ok: check_yrel_condition(&sig.probs, &dec.probs),
                bound: Some(bound),
            })
        }
        SignalEntry::Baseline(probs_s) => {
            let obs = honest_observables(probs_s, &dec.probs, &ch, &sc.detector)?;
            let y1_lb = single_mode_y1_lb(probs_s, &dec.probs, &obs)?;
            let e1_ub = e1_ub_decoy(&obs, &dec.probs, y1_lb, sc.detector.e0);
            let rate = secure_key_rate(&sc.protocol, y1_lb, probs_s.p1(), e1_ub, obs.q_s, obs.e_s);
            Ok(RateEval {
                rate,
                y1_lb_s: y1_lb,
                e1_ub_s: e1_ub,
                gain_s: obs.q_s,
                qber_s: obs.e_s,
                p1_s: probs_s.p1(),
                yrel_ok: check_yrel_condition(probs_s, &dec.probs),
                bound: None,
            })
        }
    }
}

/// Full pipeline at a single working point.
pub fn evaluate_rate(
    sc: &Scenario,
    alpha_db: f64,
    mu_s: f64,
    model: RateModel,
) -> Result<RateEval> {
    sc.validate()?;
    let dec = decoy_stats(sc)?;
    match make_entry(sc, &dec, model, mu_s)? {
        Some(entry) => eval_entry(sc, &dec, &entry, alpha_db),
        None => Err(Error::DegenerateSource(format!(
            "signal intensity {mu_s} cannot be evaluated under this model"
        ))),
    }
}

/// Worst-case bound report for one working point, optionally for externally
/// measured observables instead of the honest-channel prediction.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub bound: BoundResult,
    pub yrel_ok: bool,
    pub observables: ChannelObservables,
    pub p1_s: f64,
}

pub fn scenario_bounds(
    sc: &Scenario,
    alpha_db: f64,
    mu_s: f64,
    obs_override: Option<ChannelObservables>,
) -> Result<BoundsReport> {
    sc.validate()?;
    let dec = decoy_stats(sc)?;
    let state = solve_squeezing(&sc.weights, mu_s)?;
    let probs_s = state.class_probabilities(sc.numerics.n_cap_start, sc.numerics.eps_tail)?;
    let occ_s = state.mode_occupations()?;
    let ens = enumerate_multiphoton(
        &state,
        &dec.state,
        sc.numerics.eps_enum,
        sc.numerics.max_events,
    )?;
    let ch = ChannelParams::new(alpha_db)?;
    let observables = match obs_override {
        Some(obs) => obs,
        None => honest_observables(&probs_s, &dec.probs, &ch, &sc.detector)?,
    };
    let bound = iterate_y1_bound(
        &observables,
        &probs_s,
        &dec.probs,
        &occ_s,
        &dec.occ,
        &ens,
        sc.detector.e0,
        sc.numerics.iter_tol,
        sc.numerics.max_iter,
    )?;
    Ok(BoundsReport {
        bound,
        yrel_ok: check_yrel_condition(&probs_s, &dec.probs),
        observables,
        p1_s: probs_s.p1(),
    })
}

/// Result of the signal-intensity optimization at one attenuation.
#[derive(Debug, Clone)]
pub struct OptimizedRate {
    pub mu_s: f64,
    pub rate: f64,
    /// Diagnostics at the optimum; absent when no intensity produced a
    /// positive rate.
    pub eval: Option<RateEval>,
    /// True when every grid intensity gave zero rate.
    pub all_zero: bool,
}

/// Rate at one (entry, alpha) cell with degenerate points mapped to zero.
fn cell_rate(
    sc: &Scenario,
    dec: &DecoyStats,
    entry: &Option<SignalEntry>,
    alpha_db: f64,
) -> Result<f64> {
    match entry {
        None => Ok(0.0),
        Some(entry) => match eval_entry(sc, dec, entry, alpha_db) {
            Ok(eval) => Ok(eval.rate),
            Err(Error::DegenerateSource(_)) | Err(Error::InvalidArgument(_)) => Ok(0.0),
            Err(e) => Err(e),
        },
    }
}

/// Optimizes the signal mean photon number at one attenuation: coarse grid
/// scan followed by golden-section refinement around the best grid point.
/// Deterministic for fixed inputs.
pub fn optimize_signal_mu(sc: &Scenario, alpha_db: f64, model: RateModel) -> Result<OptimizedRate> {
    sc.validate()?;
    let dec = decoy_stats(sc)?;
    let grid = sc.protocol.mu_s_grid.values()?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("mu grid is empty".into()));
    }
    let cells: Vec<f64> = grid
        .par_iter()
        .map(|&mu| {
            let entry = make_entry(sc, &dec, model, mu)?;
            cell_rate(sc, &dec, &entry, alpha_db)
        })
        .collect::<Result<_>>()?;
    optimize_at_alpha(sc, &dec, model, alpha_db, &grid, &cells)
}

/// Shared refinement step: takes precomputed grid rates for one alpha.
fn optimize_at_alpha(
    sc: &Scenario,
    dec: &DecoyStats,
    model: RateModel,
    alpha_db: f64,
    grid: &[f64],
    grid_rates: &[f64],
) -> Result<OptimizedRate> {
    let mut best_idx = 0;
    for (i, &r) in grid_rates.iter().enumerate() {
        if r > grid_rates[best_idx] {
            best_idx = i;
        }
    }
    if grid_rates[best_idx] <= 0.0 {
        return Ok(OptimizedRate {
            mu_s: grid[0],
            rate: 0.0,
            eval: None,
            all_zero: true,
        });
    }

    let eval_full = |mu: f64| -> Result<Option<RateEval>> {
        match make_entry(sc, dec, model, mu)? {
            None => Ok(None),
            Some(entry) => match eval_entry(sc, dec, &entry, alpha_db) {
                Ok(eval) => Ok(Some(eval)),
                Err(Error::DegenerateSource(_)) | Err(Error::InvalidArgument(_)) => Ok(None),
                Err(e) => Err(e),
            },
        }
    };

    let mut best_mu = grid[best_idx];
    let mut best_eval = eval_full(best_mu)?;
    let mut best_rate = best_eval.as_ref().map_or(0.0, |e| e.rate);

    let consider = |mu: f64,
                    eval: Option<RateEval>,
                    best_mu: &mut f64,
                    best_rate: &mut f64,
                    best_eval: &mut Option<RateEval>|
     -> f64 {
        let rate = eval.as_ref().map_or(0.0, |e| e.rate);
        if rate > *best_rate {
            *best_mu = mu;
            *best_rate = rate;
            *best_eval = eval;
        }
        rate
    };

    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    if b - a > sc.numerics.mu_refine_tol {
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = consider(
            c,
            eval_full(c)?,
            &mut best_mu,
            &mut best_rate,
            &mut best_eval,
        );
        let mut fd = consider(
            d,
            eval_full(d)?,
            &mut best_mu,
            &mut best_rate,
            &mut best_eval,
        );
        while b - a > sc.numerics.mu_refine_tol {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = consider(
                    c,
                    eval_full(c)?,
                    &mut best_mu,
                    &mut best_rate,
                    &mut best_eval,
                );
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = consider(
                    d,
                    eval_full(d)?,
                    &mut best_mu,
                    &mut best_rate,
                    &mut best_eval,
                );
            }
        }
    }

    Ok(OptimizedRate {
        mu_s: best_mu,
        rate: best_rate,
        eval: best_eval,
        all_zero: false,
    })
}

/// Which models a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepModels {
    MultiModeOnly,
    SingleModeOnly,
    Both,
}

impl SweepModels {
    fn wants_mm(self) -> bool {
        matches!(self, SweepModels::MultiModeOnly | SweepModels::Both)
    }
    fn wants_sm(self) -> bool {
        matches!(self, SweepModels::SingleModeOnly | SweepModels::Both)
    }
}

/// Optimized outcome of one model at one attenuation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub rate: f64,
    pub mu_s: f64,
    pub y1_lb_s: f64,
    pub e1_ub_s: f64,
    pub yrel_ok: bool,
    pub all_zero: bool,
}

impl ModelOutcome {
    fn from_optimized(opt: &OptimizedRate) -> Self {
        Self {
            rate: opt.rate,
            mu_s: opt.mu_s,
            y1_lb_s: opt.eval.as_ref().map_or(0.0, |e| e.y1_lb_s),
            e1_ub_s: opt.eval.as_ref().map_or(1.0, |e| e.e1_ub_s),
            yrel_ok: opt.eval.as_ref().is_none_or(|e| e.yrel_ok),
            all_zero: opt.all_zero,
        }
    }

    fn failed() -> Self {
        Self {
            rate: 0.0,
            mu_s: 0.0,
            y1_lb_s: 0.0,
            e1_ub_s: 1.0,
            yrel_ok: true,
            all_zero: true,
        }
    }
}

/// One attenuation point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub alpha_db: f64,
    pub mm: Option<ModelOutcome>,
    pub sm: Option<ModelOutcome>,
    /// Diagnostic for points that failed to evaluate (reported as zero rate).
    pub note: Option<String>,
}

/// Sweeps the attenuation grid, optimizing the signal intensity per point
/// and per model. Failed points are recorded as zero rate with a note
/// rather than aborting the sweep. Points are evaluated in parallel; the
/// output order is fixed by the alpha grid.
pub fn sweep_attenuation(
    sc: &Scenario,
    alphas: &[f64],
    models: SweepModels,
) -> Result<Vec<RatePoint>> {
    sc.validate()?;
    if alphas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "attenuation grid must be sorted ascending".into(),
        ));
    }
    let dec = decoy_stats(sc)?;
    let grid = sc.protocol.mu_s_grid.values()?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("mu grid is empty".into()));
    }

    // Grid phase: one pass per model over the signal intensities, each
    // entry scoring every attenuation, so the expensive per-mu statistics
    // are built exactly once.
    let grid_scores = |model: RateModel| -> Result<Vec<Vec<f64>>> {
        grid.par_iter()
            .map(|&mu| {
                let entry = make_entry(sc, &dec, model, mu)?;
                alphas
                    .iter()
                    .map(|&alpha| cell_rate(sc, &dec, &entry, alpha))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect()
    };
    let mm_scores = if models.wants_mm() {
        Some(grid_scores(RateModel::MultiMode)?)
    } else {
        None
    };
    let sm_scores = if models.wants_sm() {
        Some(grid_scores(RateModel::SingleModeBaseline)?)
    } else {
        None
    };

    let run_model = |model: RateModel,
                     scores: &Option<Vec<Vec<f64>>>,
                     alpha_idx: usize,
                     alpha: f64,
                     note: &mut Option<String>|
     -> Option<ModelOutcome> {
        let scores = scores.as_ref()?;
        let column: Vec<f64> = scores.iter().map(|row| row[alpha_idx]).collect();
        match optimize_at_alpha(sc, &dec, model, alpha, &grid, &column) {
            Ok(opt) => Some(ModelOutcome::from_optimized(&opt)),
            Err(e) => {
                let tag = match model {
                    RateModel::MultiMode => "mm",
                    RateModel::SingleModeBaseline => "sm",
                };
                let msg = format!("{tag}: {e}");
                *note = Some(match note.take() {
                    Some(prev) => format!("{prev}; {msg}"),
                    None => msg,
                });
                Some(ModelOutcome::failed())
            }
        }
    };

    Ok(alphas
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let mut note = None;
            let mm = run_model(RateModel::MultiMode, &mm_scores, i, alpha, &mut note);
            let sm = run_model(
                RateModel::SingleModeBaseline,
                &sm_scores,
                i,
                alpha,
                &mut note,
            );
            RatePoint {
                alpha_db: alpha,
                mm,
                sm,
                note,
            }
        })
        .collect())
}
