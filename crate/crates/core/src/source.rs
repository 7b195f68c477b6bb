//! Photon statistics of a multi-mode squeezed-vacuum source.
//!
//! After tracing out the idler arm, each Schmidt mode k of a PDC source
//! carries an independent thermal photon-number distribution
//! `p(k, n) = sech²(r_k) · tanh²ⁿ(r_k)`, where the squeezing parameter r_k is
//! proportional to the mode weight λ_k and the square root of the pump
//! intensity. Everything downstream — the convolved photon-number
//! distribution, the single-photon mode occupations, and the multiphoton
//! mode-distribution ensemble — derives from those per-mode distributions.

use crate::{Error, Result};

/// Hard ceiling for the convolution truncation point.
const MAX_PHOTON_CAP: usize = 10_000;

/// Schmidt coefficients λ_k of the source, in canonical (descending) order.
///
/// Input weights are renormalized to Σλ² = 1; inputs whose norm deviates from
/// 1 by more than 5% are rejected as not being Schmidt coefficients at all.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeWeights {
    lambda: Vec<f64>,
}

impl ModeWeights {
    pub fn new(mut lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidArgument(
                "mode weights must be non-empty".into(),
            ));
        }
        if lambda.iter().any(|&l| !l.is_finite() || l <= 0.0) {
            return Err(Error::InvalidArgument(
                "mode weights must be finite and positive".into(),
            ));
        }
        let norm = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 0.05 {
            return Err(Error::InvalidArgument(format!(
                "mode weight norm {norm:.6} deviates from 1 by more than 5%"
            )));
        }
        lambda.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
        for l in &mut lambda {
            *l /= norm;
        }
        Ok(Self { lambda })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    pub fn n_modes(&self) -> usize {
        self.lambda.len()
    }
}

/// Per-mode squeezing parameters r_k for one pump intensity.
///
/// All entries derive from a single scale s via r_k = s·λ_k, so the ratios
/// r_k/r_j always match the ratios of the mode weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceState {
    r: Vec<f64>,
}

impl SourceState {
    /// Builds the state with squeezing r_k = scale·λ_k.
    pub fn from_scale(weights: &ModeWeights, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "squeezing scale must be finite and non-negative, got {scale}"
            )));
        }
        Ok(Self {
            r: weights.lambdas().iter().map(|l| scale * l).collect(),
        })
    }

    pub fn squeezing(&self) -> &[f64] {
        &self.r
    }

    pub fn n_modes(&self) -> usize {
        self.r.len()
    }

    /// Total mean photon number Σ_k sinh²(r_k).
    pub fn mean_photon_number(&self) -> f64 {
        self.r.iter().map(|r| r.sinh().powi(2)).sum()
    }

    /// tanh²(r_k) per mode: the per-photon weight of the thermal distribution.
    fn tanh_sq(&self) -> Vec<f64> {
        self.r.iter().map(|r| r.tanh().powi(2)).collect()
    }

    /// sech²(r_k) per mode: the per-mode vacuum probability.
    fn vacuum_probs(&self) -> Vec<f64> {
        self.r.iter().map(|r| r.cosh().powi(-2)).collect()
    }

    /// Photon-number statistics of the full state: the class probabilities
    /// P₀/P₁/P_M plus the convolved distribution P_n truncated so that the
    /// residual tail mass stays below `eps`.
    ///
    /// `n_cap` is the initial truncation point (raised automatically, up to a
    /// hard limit, until the tail condition holds).
    pub fn class_probabilities(&self, n_cap: usize, eps: f64) -> Result<PhotonClassProbs> {
        if n_cap < 2 {
            return Err(Error::InvalidArgument(format!(
                "photon-number cap must be at least 2, got {n_cap}"
            )));
        }
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tail tolerance must be positive, got {eps}"
            )));
        }

        let vac = self.vacuum_probs();
        let tsq = self.tanh_sq();

        let p0: f64 = vac.iter().product();
        // P₁ = Σ_k p(k,1)·Π_{i≠k} p(i,0) = P₀ · Σ_k tanh²(r_k).
        let p1: f64 = p0 * tsq.iter().sum::<f64>();
        let p_multi = (1.0 - p0 - p1).max(0.0);

        let mut cap = n_cap;
        loop {
            let pn = self.convolved_pn(&vac, &tsq, cap);
            let tail = (1.0 - pn.iter().sum::<f64>()).max(0.0);
            if tail < eps {
                return Ok(PhotonClassProbs {
                    p0,
                    p1,
                    p_multi,
                    pn,
                    tail,
                });
            }
            cap = cap.saturating_mul(2);
            if cap > MAX_PHOTON_CAP {
                return Err(Error::ResourceLimit(format!(
                    "photon-number tail {tail:.3e} still above {eps:.3e} at cap {MAX_PHOTON_CAP}"
                )));
            }
        }
    }

    /// N-fold convolution of the per-mode thermal distributions, truncated at
    /// `cap`. Entries for n ≤ cap are exact: every contributing occupation of
    /// a total of n photons has all per-mode counts ≤ n.
    fn convolved_pn(&self, vac: &[f64], tsq: &[f64], cap: usize) -> Vec<f64> {
        let mut acc = vec![0.0; cap + 1];
        acc[0] = 1.0;
        let mut mode_pmf = vec![0.0; cap + 1];
        let mut next = vec![0.0; cap + 1];
        for (&v, &t) in vac.iter().zip(tsq) {
            let mut f = v;
            for slot in mode_pmf.iter_mut() {
                *slot = f;
                f *= t;
            }
            next.iter_mut().for_each(|x| *x = 0.0);
            for (i, &a) in acc.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (j, &m) in mode_pmf[..=cap - i].iter().enumerate() {
                    next[i + j] += a * m;
                }
            }
            std::mem::swap(&mut acc, &mut next);
        }
        acc
    }

    /// Mode occupation probabilities of the single-photon subspace:
    /// m_k = p(k,1)·Π_{i≠k} p(i,0) / P₁, which for thermal per-mode
    /// statistics reduces to tanh²(r_k) / Σ_j tanh²(r_j).
    pub fn mode_occupations(&self) -> Result<ModeOccupation> {
        let tsq = self.tanh_sq();
        let total: f64 = tsq.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateSource(
                "all squeezing parameters are zero; the single-photon subspace is empty".into(),
            ));
        }
        Ok(ModeOccupation {
            m: tsq.iter().map(|t| t / total).collect(),
        })
    }
}

/// Computes the thermal photon-number probability sech²(r)·tanh²ⁿ(r).
pub fn thermal_pmf(r: f64, n: u32) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "squeezing parameter must be finite and non-negative, got {r}"
        )));
    }
    Ok(r.cosh().powi(-2) * r.tanh().powi(2 * n as i32))
}

/// Finds the state whose total mean photon number Σ_k sinh²(s·λ_k) equals
/// `mu`, by bisecting on the common scale s.
pub fn solve_squeezing(weights: &ModeWeights, mu: f64) -> Result<SourceState> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "mean photon number must be finite and non-negative, got {mu}"
        )));
    }
    if mu == 0.0 {
        return SourceState::from_scale(weights, 0.0);
    }

    let mean_at = |s: f64| -> f64 {
        weights
            .lambdas()
            .iter()
            .map(|l| (s * l).sinh().powi(2))
            .sum()
    };

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while mean_at(hi) < mu {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidArgument(format!(
                "mean photon number {mu} is out of reach"
            )));
        }
    }
    // Bisect to machine precision; the interval collapses in ≤ ~70 steps.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mean_at(mid) < mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SourceState::from_scale(weights, 0.5 * (lo + hi))
}

/// Photon-number class probabilities of one source state.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonClassProbs {
    p0: f64,
    p1: f64,
    p_multi: f64,
    pn: Vec<f64>,
    tail: f64,
}

impl PhotonClassProbs {
    /// Builds class probabilities from an explicit photon-number
    /// distribution. The vector may omit the tail; the residual mass becomes
    /// `tail`.
    pub fn from_pn(pn: Vec<f64>) -> Result<Self> {
        if pn.is_empty() {
            return Err(Error::InvalidArgument(
                "distribution must be non-empty".into(),
            ));
        }
        if pn
            .iter()
            .any(|&p| !p.is_finite() || !(0.0..=1.0).contains(&p))
        {
            return Err(Error::InvalidArgument(
                "distribution entries must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = pn.iter().sum();
        if sum > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "distribution mass {sum} exceeds 1"
            )));
        }
        let p0 = pn[0];
        let p1 = pn.get(1).copied().unwrap_or(0.0);
        Ok(Self {
            p0,
            p1,
            p_multi: (1.0 - p0 - p1).max(0.0),
            pn,
            tail: (1.0 - sum).max(0.0),
        })
    }

    /// Vacuum probability P₀.
    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Single-photon probability P₁.
    pub fn p1(&self) -> f64 {
        self.p1
    }

    /// Multiphoton probability P_M = 1 − P₀ − P₁.
    pub fn p_multi(&self) -> f64 {
        self.p_multi
    }

    /// The convolved photon-number distribution up to the truncation point.
    pub fn pn(&self) -> &[f64] {
        &self.pn
    }

    /// P_n for an arbitrary n; zero beyond the truncation point.
    pub fn pn_at(&self, n: usize) -> f64 {
        self.pn.get(n).copied().unwrap_or(0.0)
    }

    /// Probability mass beyond the truncation point.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Mean photon number and normalized second factorial moment
    /// g₂ = ⟨n(n−1)⟩/⟨n⟩² of the truncated distribution.
    pub fn moments(&self) -> Result<DistributionMoments> {
        let mean: f64 = self.pn.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        if mean <= 0.0 {
            return Err(Error::DegenerateSource(
                "distribution has zero mean; g2 is undefined".into(),
            ));
        }
        let fact2: f64 = self
            .pn
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
            .sum();
        Ok(DistributionMoments {
            mean,
            g2: fact2 / (mean * mean),
        })
    }
}

/// Summary moments of one photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionMoments {
    pub mean: f64,
    /// 2 for a single thermal mode, 1 for a Poissonian distribution.
    pub g2: f64,
}

/// Single-photon mode occupation probabilities m_k (they sum to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOccupation {
    m: Vec<f64>,
}

impl ModeOccupation {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::InvalidArgument(
                "occupations must be non-empty".into(),
            ));
        }
        if m.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidArgument(
                "occupations must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = m.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "occupations must sum to 1, got {sum}"
            )));
        }
        Ok(Self { m })
    }

    pub fn probs(&self) -> &[f64] {
        &self.m
    }

    pub fn n_modes(&self) -> usize {
        self.m.len()
    }
}

/// One multiphoton mode-distribution event: the occupation vector l (with
/// Σ l_k ≥ 2) and its conditional probabilities under signal and decoy.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiphotonEvent {
    pub occupation: Vec<u32>,
    pub hs: f64,
    pub hd: f64,
}

/// The enumerated multiphoton ensemble of a signal/decoy pair, with the
/// un-enumerated conditional masses reported as explicit tails.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiphotonEnsemble {
    events: Vec<MultiphotonEvent>,
    tail_s: f64,
    tail_d: f64,
}

impl MultiphotonEnsemble {
    /// Assembles an ensemble from explicit parts, validating normalization
    /// (Σ h + tail = 1 for both states) and event uniqueness.
    pub fn from_parts(events: Vec<MultiphotonEvent>, tail_s: f64, tail_d: f64) -> Result<Self> {
        for tail in [tail_s, tail_d] {
            if !tail.is_finite() || !(0.0..=1.0).contains(&tail) {
                return Err(Error::InvalidArgument(format!(
                    "tail {tail} outside [0, 1]"
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for ev in &events {
            if ev.occupation.iter().map(|&l| l as u64).sum::<u64>() < 2 {
                return Err(Error::InvalidArgument(
                    "multiphoton events need at least two photons".into(),
                ));
            }
            if ev.occupation.len() != events[0].occupation.len() {
                return Err(Error::InvalidArgument(
                    "all events must span the same modes".into(),
                ));
            }
            for h in [ev.hs, ev.hd] {
                if !h.is_finite() || !(0.0..=1.0).contains(&h) {
                    return Err(Error::InvalidArgument(format!(
                        "event probability {h} outside [0, 1]"
                    )));
                }
            }
            if !seen.insert(ev.occupation.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate event {:?}",
                    ev.occupation
                )));
            }
        }
        let sum_s: f64 = events.iter().map(|e| e.hs).sum::<f64>() + tail_s;
        let sum_d: f64 = events.iter().map(|e| e.hd).sum::<f64>() + tail_d;
        for (label, sum) in [("signal", sum_s), ("decoy", sum_d)] {
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "{label} event masses plus tail sum to {sum}, expected 1"
                )));
            }
        }
        Ok(Self {
            events,
            tail_s,
            tail_d,
        })
    }

    pub fn events(&self) -> &[MultiphotonEvent] {
        &self.events
    }

    /// Conditional signal mass of the un-enumerated events.
    pub fn tail_s(&self) -> f64 {
        self.tail_s
    }

    /// Conditional decoy mass of the un-enumerated events.
    pub fn tail_d(&self) -> f64 {
        self.tail_d
    }
}

/// Enumerates multiphoton mode-distribution events for a signal/decoy pair.
///
/// The search walks occupation vectors depth-first in mode order, pruning any
/// branch whose best attainable joint probability (under signal or decoy,
/// whichever is larger) falls below `eps_enum`. Per-mode thermal weights
/// decrease with the photon count, so the best completion of a partial vector
/// is always all-zeros in the remaining modes, which makes the pruning bound
/// exact. Everything not enumerated is reported in the tails.
pub fn enumerate_multiphoton(
    signal: &SourceState,
    decoy: &SourceState,
    eps_enum: f64,
    max_events: usize,
) -> Result<MultiphotonEnsemble> {
    if signal.n_modes() != decoy.n_modes() {
        return Err(Error::InvalidArgument(format!(
            "signal has {} modes, decoy has {}",
            signal.n_modes(),
            decoy.n_modes()
        )));
    }
    if !eps_enum.is_finite() || eps_enum <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "enumeration tolerance must be positive, got {eps_enum}"
        )));
    }

    let n = signal.n_modes();
    let vac_s = signal.vacuum_probs();
    let vac_d = decoy.vacuum_probs();
    let tsq_s = signal.tanh_sq();
    let tsq_d = decoy.tanh_sq();

    let p_multi = |vac: &[f64], tsq: &[f64]| -> f64 {
        let p0: f64 = vac.iter().product();
        1.0 - p0 - p0 * tsq.iter().sum::<f64>()
    };
    let pm_s = p_multi(&vac_s, &tsq_s);
    let pm_d = p_multi(&vac_d, &tsq_d);
    if pm_s <= 0.0 || pm_d <= 0.0 {
        return Err(Error::DegenerateSource(
            "both states need a positive multiphoton probability".into(),
        ));
    }

    // suffix0[k] = Π_{i ≥ k} p(i, 0): the mass factor of an all-vacuum
    // completion from mode k on.
    let suffix0 = |vac: &[f64]| -> Vec<f64> {
        let mut s = vec![1.0; n + 1];
        for k in (0..n).rev() {
            s[k] = s[k + 1] * vac[k];
        }
        s
    };
    let suf_s = suffix0(&vac_s);
    let suf_d = suffix0(&vac_d);

    struct Dfs<'a> {
        n: usize,
        tsq_s: &'a [f64],
        tsq_d: &'a [f64],
        vac_s: &'a [f64],
        vac_d: &'a [f64],
        suf_s: &'a [f64],
        suf_d: &'a [f64],
        eps: f64,
        max_events: usize,
        pm_s: f64,
        pm_d: f64,
        occ: Vec<u32>,
        events: Vec<MultiphotonEvent>,
    }

    impl Dfs<'_> {
        fn walk(&mut self, k: usize, mass_s: f64, mass_d: f64, photons: u64) -> Result<()> {
            if k == self.n {
                if photons >= 2 {
                    if self.events.len() >= self.max_events {
                        return Err(Error::ResourceLimit(format!(
                            "multiphoton enumeration exceeded {} events; increase eps_enum",
                            self.max_events
                        )));
                    }
                    self.events.push(MultiphotonEvent {
                        occupation: self.occ.clone(),
                        hs: mass_s / self.pm_s,
                        hd: mass_d / self.pm_d,
                    });
                }
                return Ok(());
            }
            let mut f_s = self.vac_s[k];
            let mut f_d = self.vac_d[k];
            let mut count = 0u32;
            loop {
                let best_s = mass_s * f_s * self.suf_s[k + 1];
                let best_d = mass_d * f_d * self.suf_d[k + 1];
                if best_s.max(best_d) < self.eps {
                    break;
                }
                self.occ[k] = count;
                self.walk(k + 1, mass_s * f_s, mass_d * f_d, photons + count as u64)?;
                f_s *= self.tsq_s[k];
                f_d *= self.tsq_d[k];
                count += 1;
            }
            self.occ[k] = 0;
            Ok(())
        }
    }

    let mut dfs = Dfs {
        n,
        tsq_s: &tsq_s,
        tsq_d: &tsq_d,
        vac_s: &vac_s,
        vac_d: &vac_d,
        suf_s: &suf_s,
        suf_d: &suf_d,
        eps: eps_enum,
        max_events,
        pm_s,
        pm_d,
        occ: vec![0; n],
        events: Vec::new(),
    };
    dfs.walk(0, 1.0, 1.0, 0)?;

    let sum_s: f64 = dfs.events.iter().map(|e| e.hs).sum();
    let sum_d: f64 = dfs.events.iter().map(|e| e.hd).sum();
    Ok(MultiphotonEnsemble {
        events: dfs.events,
        tail_s: (1.0 - sum_s).max(0.0),
        tail_d: (1.0 - sum_d).max(0.0),
    })
}
