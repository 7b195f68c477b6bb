//! Worst-case yield and error-rate bounds against a mode-resolving adversary,
//! plus the single-mode baseline bounds.
//!
//! The multi-mode bound gives the eavesdropper full knowledge of the photon
//! count in every mode and lets her transmit each mode (or multiphoton mode
//! distribution) with an arbitrary fraction. Her optimal strategies are
//! fractional-knapsack greedies over probability mass:
//!
//! * To depress the signal single-photon yield compatible with an observed
//!   decoy yield, she transmits modes in order of decreasing
//!   m_k^(d)/m_k^(s).
//! * To inflate the decoy multiphoton yield compatible with an observed
//!   signal multiphoton yield, she transmits mode distributions in order of
//!   decreasing h_l^(d)/h_l^(s).
//! * To concentrate errors into the signal, she corrupts modes in order of
//!   decreasing m_k^(s)/m_k^(d).
//!
//! Chaining the first two maps through the gain decompositions yields a
//! monotone fixed-point iteration for the final signal single-photon yield
//! bound; the third converts the decoy error bound into a signal error bound.

use crate::source::{ModeOccupation, MultiphotonEnsemble, PhotonClassProbs};
use crate::{Error, Result};

/// Slack for declaring measured statistics inconsistent with the source.
const YIELD_SLACK: f64 = 1e-9;

/// What Alice and Bob actually measure: gains and QBERs for signal and decoy
/// plus the dark-count yield from the vacuum decoy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelObservables {
    pub q_s: f64,
    pub q_d: f64,
    pub e_s: f64,
    pub e_d: f64,
    pub y0: f64,
}

impl ChannelObservables {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q_s", self.q_s),
            ("q_d", self.q_d),
            ("e_s", self.e_s),
            ("e_d", self.e_d),
            ("y0", self.y0),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "observable {name} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// All bounds produced by the worst-case analysis of one observable set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    /// Lower bound on the signal single-photon yield.
    pub y1_lb_s: f64,
    /// Lower bound on the decoy single-photon yield.
    pub y1_lb_d: f64,
    /// Upper bound on the signal multiphoton yield.
    pub ym_ub_s: f64,
    /// Upper bound on the decoy multiphoton yield.
    pub ym_ub_d: f64,
    /// Upper bound on the decoy single-photon error rate.
    pub e1_ub_d: f64,
    /// Upper bound on the signal single-photon error rate.
    pub e1_ub_s: f64,
    /// True when the error bounds are the trivial 1 because no decoy
    /// single-photon yield could be certified.
    pub e1_vacuous: bool,
    /// Fixed-point cycles executed.
    pub iterations: u32,
    /// True when the final increment fell below the tolerance.
    pub converged: bool,
}

/// A greedy accumulation over (budget, output) mass pairs in a fixed order:
/// `eval(x)` takes items fully from the front until the budget x is
/// exhausted, then a fraction of the next item, and returns the accumulated
/// output mass.
struct PiecewiseMassMap {
    budget: Vec<f64>,
    output: Vec<f64>,
    cum_budget: Vec<f64>,
    cum_output: Vec<f64>,
}

impl PiecewiseMassMap {
    /// `items` must already be in greedy order. Pairs with zero budget and
    /// zero output are dropped.
    fn new(items: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut budget = Vec::new();
        let mut output = Vec::new();
        for (b, o) in items {
            if b == 0.0 && o == 0.0 {
                continue;
            }
            budget.push(b);
            output.push(o);
        }
        let mut cum_budget = Vec::with_capacity(budget.len());
        let mut cum_output = Vec::with_capacity(budget.len());
        let (mut cb, mut co) = (0.0, 0.0);
        for (b, o) in budget.iter().zip(&output) {
            cb += b;
            co += o;
            cum_budget.push(cb);
            cum_output.push(co);
        }
        Self {
            budget,
            output,
            cum_budget,
            cum_output,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        let total = self.cum_budget.last().copied().unwrap_or(0.0);
        if x >= total {
            return self.cum_output.last().copied().unwrap_or(0.0);
        }
        let i = self.cum_budget.partition_point(|&c| c <= x);
        // cum_budget[i] > x >= cum_budget[i-1], so budget[i] > 0.
        let (prev_b, prev_o) = if i == 0 {
            (0.0, 0.0)
        } else {
            (self.cum_budget[i - 1], self.cum_output[i - 1])
        };
        prev_o + (x - prev_b) / self.budget[i] * self.output[i]
    }
}

/// Sorts (budget, output) pairs by a ratio key, descending and stable, after
/// dropping massless (0, 0) pairs. Zero denominators map to +∞ and sort
/// first; the key is total, so ties are genuine ties and the order is
/// deterministic.
fn sort_by_ratio_descending(pairs: &mut Vec<(f64, f64)>, key: impl Fn(f64, f64) -> f64) {
    pairs.retain(|&(b, o)| b != 0.0 || o != 0.0);
    pairs.sort_by(|a, b| key(b.0, b.1).total_cmp(&key(a.0, a.1)));
}

fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn check_same_modes(m_s: &ModeOccupation, m_d: &ModeOccupation) -> Result<()> {
    if m_s.n_modes() != m_d.n_modes() {
        return Err(Error::InvalidArgument(format!(
            "mode count mismatch: signal {}, decoy {}",
            m_s.n_modes(),
            m_d.n_modes()
        )));
    }
    Ok(())
}

/// Map from a decoy single-photon yield to the lowest compatible signal
/// single-photon yield: modes in decreasing m^(d)/m^(s) order, decoy mass as
/// budget, signal mass as output.
fn signal_yield_map(m_s: &ModeOccupation, m_d: &ModeOccupation) -> PiecewiseMassMap {
    let mut pairs: Vec<(f64, f64)> = m_d
        .probs()
        .iter()
        .copied()
        .zip(m_s.probs().iter().copied())
        .collect();
    sort_by_ratio_descending(&mut pairs, ratio_or_inf);
    PiecewiseMassMap::new(pairs.into_iter())
}

/// Map from a signal multiphoton yield to the highest compatible decoy
/// multiphoton yield. The un-enumerated decoy tail is granted to the
/// adversary at zero signal cost and the signal tail is appended at zero
/// decoy value, which keeps the result an upper bound for the full
/// (un-truncated) event set.
fn decoy_multiphoton_map(ens: &MultiphotonEnsemble) -> PiecewiseMassMap {
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(ens.events().len() + 2);
    pairs.push((0.0, ens.tail_d()));
    pairs.extend(ens.events().iter().map(|e| (e.hs, e.hd)));
    pairs.push((ens.tail_s(), 0.0));
    sort_by_ratio_descending(&mut pairs, |budget, output| ratio_or_inf(output, budget));
    PiecewiseMassMap::new(pairs.into_iter())
}

/// Map from a decoy single-photon error rate to the highest compatible
/// signal error rate: error mass goes into modes of decreasing
/// m^(s)/m^(d) first.
fn signal_error_map(m_s: &ModeOccupation, m_d: &ModeOccupation) -> PiecewiseMassMap {
    let mut pairs: Vec<(f64, f64)> = m_d
        .probs()
        .iter()
        .copied()
        .zip(m_s.probs().iter().copied())
        .collect();
    sort_by_ratio_descending(&mut pairs, |budget, output| ratio_or_inf(output, budget));
    PiecewiseMassMap::new(pairs.into_iter())
}

/// Lowest signal single-photon yield an adversary can reach while producing
/// the decoy single-photon yield `y1_d`.
pub fn y1_lb_signal_given_decoy(
    m_s: &ModeOccupation,
    m_d: &ModeOccupation,
    y1_d: f64,
) -> Result<f64> {
    check_same_modes(m_s, m_d)?;
    Ok(signal_yield_map(m_s, m_d)
        .eval(y1_d.clamp(0.0, 1.0))
        .clamp(0.0, 1.0))
}

/// Highest decoy multiphoton yield an adversary can reach while producing
/// the signal multiphoton yield `ym_s`.
pub fn ym_ub_decoy_given_signal(ens: &MultiphotonEnsemble, ym_s: f64) -> Result<f64> {
    if ens.events().is_empty() && ens.tail_s() == 0.0 && ens.tail_d() == 0.0 {
        return Err(Error::InvalidArgument(
            "ensemble carries no multiphoton mass".into(),
        ));
    }
    Ok(decoy_multiphoton_map(ens)
        .eval(ym_s.clamp(0.0, 1.0))
        .clamp(0.0, 1.0))
}

/// Highest signal single-photon error rate compatible with a decoy
/// single-photon error rate `e1_ub_d`.
pub fn e1_ub_signal(m_s: &ModeOccupation, m_d: &ModeOccupation, e1_ub_d: f64) -> Result<f64> {
    check_same_modes(m_s, m_d)?;
    Ok(signal_error_map(m_s, m_d)
        .eval(e1_ub_d.clamp(0.0, 1.0))
        .clamp(0.0, 1.0))
}

/// Upper bound on the decoy single-photon error rate from the decoy QBER:
/// (E^(d)Q^(d) − e₀·Y₀·P₀^(d)) / (P₁^(d)·y1_lb_d), clamped to [0, 1].
///
/// A zero `y1_lb_d` yields the vacuous bound 1, which keeps sweeps total;
/// the key rate then evaluates to zero on its own.
pub fn e1_ub_decoy(
    obs: &ChannelObservables,
    probs_d: &PhotonClassProbs,
    y1_lb_d: f64,
    e0: f64,
) -> f64 {
    let numerator = obs.e_d * obs.q_d - e0 * obs.y0 * probs_d.p0();
    let denominator = probs_d.p1() * y1_lb_d;
    if y1_lb_d <= 0.0 || denominator <= 0.0 {
        return 1.0;
    }
    (numerator / denominator).clamp(0.0, 1.0)
}

/// Runs the full worst-case bound computation for one observable set.
///
/// Starting from the trivial lower bound Y₁^(s) ≥ 0, each cycle derives, in
/// order: the signal multiphoton yield ceiling from the signal gain, the
/// decoy multiphoton yield ceiling from the greedy event map, the decoy
/// single-photon yield floor from the decoy gain, and a new signal
/// single-photon yield floor from the greedy mode map. Every intermediate
/// yield is clamped to [0, 1]; statistics that force a yield outside [0, 1]
/// beyond a 1e-9 slack abort with an inconsistency error. The iterate
/// sequence is monotone non-decreasing and bounded, so it converges; the
/// loop stops once the increment drops below `tol` or after `max_iter`
/// cycles. The final decoy yield floor then feeds the error-rate bounds.
#[allow(clippy::too_many_arguments)]
pub fn iterate_y1_bound(
    obs: &ChannelObservables,
    probs_s: &PhotonClassProbs,
    probs_d: &PhotonClassProbs,
    m_s: &ModeOccupation,
    m_d: &ModeOccupation,
    ens: &MultiphotonEnsemble,
    e0: f64,
    tol: f64,
    max_iter: u32,
) -> Result<BoundResult> {
    iterate_impl(
        obs, probs_s, probs_d, m_s, m_d, ens, e0, tol, max_iter, None,
    )
}

/// Same as [`iterate_y1_bound`] but also returns the sequence of signal
/// single-photon yield iterates, one entry per cycle.
#[allow(clippy::too_many_arguments)]
pub fn iterate_y1_bound_traced(
    obs: &ChannelObservables,
    probs_s: &PhotonClassProbs,
    probs_d: &PhotonClassProbs,
    m_s: &ModeOccupation,
    m_d: &ModeOccupation,
    ens: &MultiphotonEnsemble,
    e0: f64,
    tol: f64,
    max_iter: u32,
) -> Result<(BoundResult, Vec<f64>)> {
    let mut trace = Vec::new();
    let result = iterate_impl(
        obs,
        probs_s,
        probs_d,
        m_s,
        m_d,
        ens,
        e0,
        tol,
        max_iter,
        Some(&mut trace),
    )?;
    Ok((result, trace))
}

#[allow(clippy::too_many_arguments)]
fn iterate_impl(
    obs: &ChannelObservables,
    probs_s: &PhotonClassProbs,
    probs_d: &PhotonClassProbs,
    m_s: &ModeOccupation,
    m_d: &ModeOccupation,
    ens: &MultiphotonEnsemble,
    e0: f64,
    tol: f64,
    max_iter: u32,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<BoundResult> {
    obs.validate()?;
    check_same_modes(m_s, m_d)?;
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "iteration tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&e0) {
        return Err(Error::InvalidArgument(format!("e0 = {e0} outside [0, 1]")));
    }
    let (p0_s, p1_s, pm_s) = (probs_s.p0(), probs_s.p1(), probs_s.p_multi());
    let (p0_d, p1_d, pm_d) = (probs_d.p0(), probs_d.p1(), probs_d.p_multi());
    if pm_s <= 0.0 || p1_d <= 0.0 {
        return Err(Error::DegenerateSource(
            "bound iteration needs signal multiphoton and decoy single-photon mass".into(),
        ));
    }

    // The gains must be explainable by some yield assignment in [0, 1].
    for (label, q, p0, p1, pm) in [
        ("signal", obs.q_s, p0_s, p1_s, pm_s),
        ("decoy", obs.q_d, p0_d, p1_d, pm_d),
    ] {
        let floor = p0 * obs.y0;
        let ceil = p0 * obs.y0 + p1 + pm;
        if q < floor - YIELD_SLACK || q > ceil + YIELD_SLACK {
            return Err(Error::InconsistentObservables(format!(
                "{label} gain {q:.6e} outside the feasible range [{floor:.6e}, {ceil:.6e}]"
            )));
        }
    }

    let yield_map = signal_yield_map(m_s, m_d);
    let multi_map = decoy_multiphoton_map(ens);

    let mut y1_s = 0.0_f64;
    let mut y1_d = 0.0_f64;
    let mut ym_s = 0.0_f64;
    let mut ym_d = 0.0_f64;
    let mut iterations = 0_u32;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;

        let ym_s_raw = (obs.q_s - p0_s * obs.y0 - p1_s * y1_s) / pm_s;
        if ym_s_raw < -YIELD_SLACK {
            return Err(Error::InconsistentObservables(format!(
                "signal gain cannot support the certified single-photon yield \
                 (implied multiphoton yield {ym_s_raw:.3e})"
            )));
        }
        ym_s = ym_s_raw.clamp(0.0, 1.0);
        ym_d = multi_map.eval(ym_s).clamp(0.0, 1.0);

        let y1_d_raw = (obs.q_d - p0_d * obs.y0 - pm_d * ym_d) / p1_d;
        if y1_d_raw > 1.0 + YIELD_SLACK {
            return Err(Error::InconsistentObservables(format!(
                "decoy gain requires a single-photon yield of {y1_d_raw:.6} > 1"
            )));
        }
        y1_d = y1_d.max(y1_d_raw.clamp(0.0, 1.0));

        let y1_s_next = y1_s.max(yield_map.eval(y1_d).clamp(0.0, 1.0));
        let increment = y1_s_next - y1_s;
        y1_s = y1_s_next;
        if let Some(t) = trace.as_deref_mut() {
            t.push(y1_s);
        }
        if increment < tol {
            converged = true;
            break;
        }
    }

    let e1_ub_d = e1_ub_decoy(obs, probs_d, y1_d, e0);
    let e1_ub_s = signal_error_map(m_s, m_d).eval(e1_ub_d).clamp(0.0, 1.0);

    Ok(BoundResult {
        y1_lb_s: y1_s,
        y1_lb_d: y1_d,
        ym_ub_s: ym_s,
        ym_ub_d: ym_d,
        e1_ub_d,
        e1_ub_s,
        e1_vacuous: y1_d <= 0.0,
        iterations,
        converged,
    })
}

/// Single-mode baseline lower bound on the (common) single-photon yield,
/// using only the convolved photon-number probabilities for n = 0, 1, 2.
pub fn single_mode_y1_lb(
    probs_s: &PhotonClassProbs,
    probs_d: &PhotonClassProbs,
    obs: &ChannelObservables,
) -> Result<f64> {
    obs.validate()?;
    let (p0_s, p1_s, p2_s) = (probs_s.pn_at(0), probs_s.pn_at(1), probs_s.pn_at(2));
    let (p0_d, p1_d, p2_d) = (probs_d.pn_at(0), probs_d.pn_at(1), probs_d.pn_at(2));
    let denom = p2_s * p1_d - p1_s * p2_d;
    if denom <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "baseline bound denominator p2_s*p1_d - p1_s*p2_d = {denom:.3e} is not positive"
        )));
    }
    let value = p2_s / denom
        * (obs.q_d - p2_d / p2_s * obs.q_s - (p2_s * p0_d - p0_s * p2_d) / p2_s * obs.y0);
    Ok(value.clamp(0.0, 1.0))
}

/// Checks the distribution-level precondition of the single-mode baseline
/// bound: among all multiphoton numbers, the decoy/signal likelihood ratio
/// p_n^(d)/p_n^(s) must peak at n = 2. That caps the achievable decoy/signal
/// multiphoton yield ratio at (p₂^(d)/P_M^(d)) / (p₂^(s)/P_M^(s)) for every
/// adversarial yield assignment, which is what the baseline derivation
/// needs. Thermal and Poissonian pairs with a weaker decoy satisfy it.
pub fn check_yrel_condition(probs_s: &PhotonClassProbs, probs_d: &PhotonClassProbs) -> bool {
    if probs_s.p_multi() <= 0.0 || probs_d.p_multi() <= 0.0 {
        return true;
    }
    let p2_s = probs_s.pn_at(2);
    let p2_d = probs_d.pn_at(2);
    let n_max = probs_s.pn().len().max(probs_d.pn().len());
    for n in 2..n_max {
        let lhs = probs_d.pn_at(n) * p2_s;
        let rhs = p2_d * probs_s.pn_at(n);
        if lhs > rhs * (1.0 + 1e-9) + f64::MIN_POSITIVE {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{honest_observables, ChannelParams, DetectorParams};
    use crate::source::{enumerate_multiphoton, solve_squeezing, ModeWeights, MultiphotonEvent};
    use crate::testutil::assert_close;

    fn occ(values: &[f64]) -> ModeOccupation {
        ModeOccupation::new(values.to_vec()).unwrap()
    }

    fn worked_example() -> (ModeOccupation, ModeOccupation) {
        (occ(&[0.6, 0.4]), occ(&[0.7, 0.3]))
    }

    #[test]
    fn step1_worked_example() {
        let (m_s, m_d) = worked_example();
        assert_close(
            y1_lb_signal_given_decoy(&m_s, &m_d, 0.7).unwrap(),
            0.6,
            1e-12,
        );
        assert_close(
            y1_lb_signal_given_decoy(&m_s, &m_d, 0.85).unwrap(),
            0.8,
            1e-12,
        );
        assert_close(
            y1_lb_signal_given_decoy(&m_s, &m_d, 0.35).unwrap(),
            0.3,
            1e-12,
        );
        assert_eq!(y1_lb_signal_given_decoy(&m_s, &m_d, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn step1_identical_occupations_is_identity() {
        let m = occ(&[0.5, 0.2, 0.3]);
        for i in 0..=20 {
            let y = i as f64 / 20.0;
            assert_close(y1_lb_signal_given_decoy(&m, &m, y).unwrap(), y, 1e-12);
        }
    }

    #[test]
    fn step1_single_mode_is_identity() {
        let m = occ(&[1.0]);
        for &y in &[0.0, 0.3, 0.77, 1.0] {
            assert_eq!(y1_lb_signal_given_decoy(&m, &m, y).unwrap(), y);
        }
    }

    #[test]
    fn step1_mismatched_lengths() {
        let a = occ(&[1.0]);
        let b = occ(&[0.5, 0.5]);
        assert!(matches!(
            y1_lb_signal_given_decoy(&a, &b, 0.5),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn step1_monotone_in_decoy_yield() {
        let (m_s, m_d) = worked_example();
        let mut prev = 0.0;
        for i in 0..=100 {
            let y = i as f64 / 100.0;
            let v = y1_lb_signal_given_decoy(&m_s, &m_d, y).unwrap();
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    fn two_event_ensemble() -> MultiphotonEnsemble {
        MultiphotonEnsemble::from_parts(
            vec![
                MultiphotonEvent {
                    occupation: vec![2, 0],
                    hs: 0.5,
                    hd: 0.8,
                },
                MultiphotonEvent {
                    occupation: vec![0, 2],
                    hs: 0.5,
                    hd: 0.2,
                },
            ],
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn step2_two_event_example() {
        let ens = two_event_ensemble();
        assert_close(ym_ub_decoy_given_signal(&ens, 0.5).unwrap(), 0.8, 1e-12);
        assert_eq!(ym_ub_decoy_given_signal(&ens, 1.0).unwrap(), 1.0);
        assert_close(ym_ub_decoy_given_signal(&ens, 0.25).unwrap(), 0.4, 1e-12);
    }

    #[test]
    fn step2_identical_masses_add_decoy_tail() {
        let ens = MultiphotonEnsemble::from_parts(
            vec![
                MultiphotonEvent {
                    occupation: vec![2, 0],
                    hs: 0.6,
                    hd: 0.6,
                },
                MultiphotonEvent {
                    occupation: vec![0, 2],
                    hs: 0.3,
                    hd: 0.3,
                },
            ],
            0.1,
            0.1,
        )
        .unwrap();
        for &y in &[0.0, 0.25, 0.5, 0.8] {
            assert_close(ym_ub_decoy_given_signal(&ens, y).unwrap(), y + 0.1, 1e-12);
        }
        assert_eq!(ym_ub_decoy_given_signal(&ens, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn step2_tails_only_ensemble() {
        // Nothing enumerated: the whole decoy mass is granted up front.
        let ens = MultiphotonEnsemble::from_parts(vec![], 1.0, 1.0).unwrap();
        assert_eq!(ym_ub_decoy_given_signal(&ens, 0.0).unwrap(), 1.0);
        assert_eq!(ym_ub_decoy_given_signal(&ens, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn error_map_worked_example() {
        let (m_s, m_d) = worked_example();
        assert_close(e1_ub_signal(&m_s, &m_d, 0.3).unwrap(), 0.4, 1e-12);
        assert_eq!(e1_ub_signal(&m_s, &m_d, 0.0).unwrap(), 0.0);
        let expected = 0.4 + 0.2 / 0.7 * 0.6;
        assert_close(e1_ub_signal(&m_s, &m_d, 0.5).unwrap(), expected, 1e-12);
        assert_eq!(e1_ub_signal(&m_s, &m_d, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn error_map_single_mode_is_identity() {
        let m = occ(&[1.0]);
        for &e in &[0.0, 0.2, 0.9, 1.0] {
            assert_eq!(e1_ub_signal(&m, &m, e).unwrap(), e);
        }
    }

    #[test]
    fn e1_decoy_edge_cases() {
        let probs_d = PhotonClassProbs::from_pn(vec![0.9, 0.08, 0.02]).unwrap();
        let obs = ChannelObservables {
            q_s: 0.01,
            q_d: 0.001,
            e_s: 0.02,
            e_d: 0.5 * 1e-3 * 0.9 / 0.001,
            y0: 1e-3,
        };
        // All errors explained by dark counts: numerator vanishes.
        assert_close(e1_ub_decoy(&obs, &probs_d, 0.5, 0.5), 0.0, 1e-12);
        // Zero certified yield gives the vacuous bound.
        assert_eq!(e1_ub_decoy(&obs, &probs_d, 0.0, 0.5), 1.0);
        // Numerator above the denominator clamps to 1.
        let noisy = ChannelObservables {
            e_d: 0.5,
            q_d: 0.5,
            ..obs
        };
        assert_eq!(e1_ub_decoy(&noisy, &probs_d, 1e-6, 0.5), 1.0);
    }

    /// Full-pipeline fixture: a source pair under the honest channel.
    fn honest_fixture_weights(
        raw_weights: &[f64],
        mu_s: f64,
        mu_d: f64,
        alpha_db: f64,
    ) -> (
        ChannelObservables,
        PhotonClassProbs,
        PhotonClassProbs,
        ModeOccupation,
        ModeOccupation,
        MultiphotonEnsemble,
        DetectorParams,
        f64,
    ) {
        let w = ModeWeights::new(raw_weights.to_vec()).unwrap();
        let sig = solve_squeezing(&w, mu_s).unwrap();
        let dec = solve_squeezing(&w, mu_d).unwrap();
        let probs_s = sig.class_probabilities(64, 1e-10).unwrap();
        let probs_d = dec.class_probabilities(64, 1e-10).unwrap();
        let m_s = sig.mode_occupations().unwrap();
        let m_d = dec.mode_occupations().unwrap();
        let ens = enumerate_multiphoton(&sig, &dec, 1e-10, 10_000_000).unwrap();
        let det = crate::presets::gobby2004();
        let ch = ChannelParams::new(alpha_db).unwrap();
        let obs = honest_observables(&probs_s, &probs_d, &ch, &det).unwrap();
        let eta = crate::channel::detection_prob(&ch, &det);
        (obs, probs_s, probs_d, m_s, m_d, ens, det, eta)
    }

    fn honest_fixture(
        mu_s: f64,
        mu_d: f64,
        alpha_db: f64,
    ) -> (
        ChannelObservables,
        PhotonClassProbs,
        PhotonClassProbs,
        ModeOccupation,
        ModeOccupation,
        MultiphotonEnsemble,
        DetectorParams,
        f64,
    ) {
        honest_fixture_weights(&[0.8, 0.6], mu_s, mu_d, alpha_db)
    }

    #[test]
    fn iteration_sound_against_honest_channel() {
        for weights in [&[1.0][..], &[0.8, 0.6][..]] {
            for &alpha in &[5.0, 15.0, 25.0] {
                let (obs, ps, pd, ms, md, ens, det, eta) =
                    honest_fixture_weights(weights, 0.6, 0.1, alpha);
                let res = iterate_y1_bound(&obs, &ps, &pd, &ms, &md, &ens, det.e0, 1e-12, 10_000)
                    .unwrap();
                let y1_true = crate::channel::yield_n(eta, &det, 1);
                let e1_true = crate::channel::error_n(eta, &det, 1).unwrap();
                assert!(res.converged);
                assert!(
                    res.y1_lb_s <= y1_true + 1e-12,
                    "y1 bound not sound at {alpha} dB"
                );
                assert!(res.y1_lb_s > 0.0);
                assert!(
                    res.e1_ub_s >= e1_true - 1e-12,
                    "e1 bound not sound at {alpha} dB"
                );
            }
        }
    }

    #[test]
    fn iteration_all_blocked_certifies_nothing() {
        let (mut obs, ps, pd, ms, md, ens, det, _) = honest_fixture(0.6, 0.1, 10.0);
        obs.q_s = ps.p0() * obs.y0;
        obs.q_d = pd.p0() * obs.y0;
        let res = iterate_y1_bound(&obs, &ps, &pd, &ms, &md, &ens, det.e0, 1e-12, 10_000).unwrap();
        assert_eq!(res.y1_lb_s, 0.0);
        assert!(res.converged);
    }

    #[test]
    fn iteration_rejects_inconsistent_gain() {
        let (mut obs, ps, pd, ms, md, ens, det, _) = honest_fixture(0.6, 0.1, 10.0);
        // A decoy gain above the all-yields-at-one ceiling is impossible.
        obs.q_d = 1.0;
        let err = iterate_y1_bound(&obs, &ps, &pd, &ms, &md, &ens, det.e0, 1e-12, 10_000);
        assert!(matches!(err, Err(Error::InconsistentObservables(_))));
    }

    #[test]
    fn iteration_trace_is_monotone() {
        let (obs, ps, pd, ms, md, ens, det, _) = honest_fixture(0.8, 0.1, 18.0);
        let (res, trace) =
            iterate_y1_bound_traced(&obs, &ps, &pd, &ms, &md, &ens, det.e0, 1e-12, 10_000).unwrap();
        assert!(res.converged);
        assert_eq!(trace.len() as u32, res.iterations);
        for pair in trace.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        assert_eq!(*trace.last().unwrap(), res.y1_lb_s);
    }

    #[test]
    fn coarser_enumeration_never_raises_the_bound() {
        let w = ModeWeights::new(vec![0.8, 0.6]).unwrap();
        let sig = solve_squeezing(&w, 0.7).unwrap();
        let dec = solve_squeezing(&w, 0.1).unwrap();
        let probs_s = sig.class_probabilities(64, 1e-10).unwrap();
        let probs_d = dec.class_probabilities(64, 1e-10).unwrap();
        let m_s = sig.mode_occupations().unwrap();
        let m_d = dec.mode_occupations().unwrap();
        let det = crate::presets::gobby2004();
        let ch = ChannelParams::new(15.0).unwrap();
        let obs = honest_observables(&probs_s, &probs_d, &ch, &det).unwrap();

        let mut prev = 0.0;
        for &eps in &[1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
            let ens = enumerate_multiphoton(&sig, &dec, eps, 10_000_000).unwrap();
            let res = iterate_y1_bound(
                &obs, &probs_s, &probs_d, &m_s, &m_d, &ens, det.e0, 1e-12, 10_000,
            )
            .unwrap();
            assert!(
                res.y1_lb_s >= prev - 1e-12,
                "bound got looser with finer enumeration: {} < {prev} at eps {eps}",
                res.y1_lb_s
            );
            prev = res.y1_lb_s;
        }
    }

    #[test]
    fn baseline_bound_sound_and_degenerate_cases() {
        let (obs, ps, pd, ..) = honest_fixture(0.6, 0.1, 15.0);
        let det = crate::presets::gobby2004();
        let eta = crate::channel::detection_prob(&ChannelParams::new(15.0).unwrap(), &det);
        let y1 = single_mode_y1_lb(&ps, &pd, &obs).unwrap();
        let y1_true = crate::channel::yield_n(eta, &det, 1);
        assert!(y1 > 0.0 && y1 <= y1_true + 1e-12);

        // Vacuum decoy has no one- or two-photon support.
        let vac = PhotonClassProbs::from_pn(vec![1.0]).unwrap();
        assert!(matches!(
            single_mode_y1_lb(&ps, &vac, &obs),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn baseline_bound_lossless_channel() {
        let w = ModeWeights::new(vec![1.0]).unwrap();
        let sig = solve_squeezing(&w, 0.6).unwrap();
        let dec = solve_squeezing(&w, 0.1).unwrap();
        let ps = sig.class_probabilities(64, 1e-10).unwrap();
        let pd = dec.class_probabilities(64, 1e-10).unwrap();
        // Lossless, dark-count-free: every non-vacuum pulse clicks.
        let obs = ChannelObservables {
            q_s: 1.0 - ps.p0(),
            q_d: 1.0 - pd.p0(),
            e_s: 0.0,
            e_d: 0.0,
            y0: 0.0,
        };
        let y1 = single_mode_y1_lb(&ps, &pd, &obs).unwrap();
        assert!((0.0..=1.0).contains(&y1));
    }

    #[test]
    fn yrel_condition_cases() {
        let w = ModeWeights::new(vec![1.0]).unwrap();
        let sig = solve_squeezing(&w, 0.6).unwrap();
        let dec = solve_squeezing(&w, 0.1).unwrap();
        let ps = sig.class_probabilities(64, 1e-10).unwrap();
        let pd = dec.class_probabilities(64, 1e-10).unwrap();
        assert!(check_yrel_condition(&ps, &pd));
        assert!(check_yrel_condition(&ps, &ps));

        // Inverted two-photon fractions: decoy concentrates multiphoton mass
        // at n = 3 instead of n = 2.
        let ps_bad = PhotonClassProbs::from_pn(vec![0.3, 0.3, 0.3, 0.1]).unwrap();
        let pd_bad = PhotonClassProbs::from_pn(vec![0.3, 0.3, 0.1, 0.3]).unwrap();
        assert!(!check_yrel_condition(&ps_bad, &pd_bad));
    }

    #[test]
    fn step1_greedy_matches_small_brute_force() {
        // 3-mode instance, 1/20 transmission grid.
        let m_s = occ(&[0.5, 0.3, 0.2]);
        let m_d = occ(&[0.6, 0.25, 0.15]);
        for &y1d in &[0.15, 0.4, 0.62, 0.95] {
            let greedy = y1_lb_signal_given_decoy(&m_s, &m_d, y1d).unwrap();
            let mut best = f64::INFINITY;
            let steps = 20;
            for a in 0..=steps {
                for b in 0..=steps {
                    for c in 0..=steps {
                        let t = [a, b, c].map(|v| v as f64 / steps as f64);
                        let got: f64 = t.iter().zip(m_d.probs()).map(|(t, m)| t * m).sum();
                        if got + 1e-12 >= y1d {
                            let cost: f64 = t.iter().zip(m_s.probs()).map(|(t, m)| t * m).sum();
                            best = best.min(cost);
                        }
                    }
                }
            }
            let grid_err = m_s.probs().iter().cloned().fold(0.0, f64::max) / steps as f64;
            assert!(greedy <= best + 1e-12);
            assert!(best <= greedy + grid_err + 1e-12);
        }
    }
}
