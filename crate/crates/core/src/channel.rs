//! Honest-channel model: the gains and error rates Alice and Bob measure
//! when nobody tampers with the line.
//!
//! Bob's receiver is a threshold detector with efficiency η_det, dark-count
//! probability p_dark per pulse, and intrinsic error probability e_det. The
//! n-photon yield is approximated as Y_n = 1 − (1−η)ⁿ + p_dark with
//! η = 10^(−α/10)·η_det, and a dark count produces a random (half wrong)
//! outcome.

use crate::bounds::ChannelObservables;
use crate::source::PhotonClassProbs;
use crate::{Error, Result};

/// Characteristics of Bob's detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Dark-count probability per pulse.
    pub p_dark: f64,
    /// Probability that a detected photon yields the wrong bit.
    pub e_det: f64,
    /// Detector efficiency.
    pub eta_det: f64,
    /// Error rate of a vacuum (dark-count) detection; 1/2 unless overridden.
    pub e0: f64,
}

impl DetectorParams {
    pub fn new(p_dark: f64, e_det: f64, eta_det: f64) -> Result<Self> {
        let det = Self {
            p_dark,
            e_det,
            eta_det,
            e0: 0.5,
        };
        det.validate()?;
        Ok(det)
    }

    /// Same detector with a non-default vacuum error rate.
    pub fn with_e0(mut self, e0: f64) -> Result<Self> {
        self.e0 = e0;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_dark", self.p_dark),
            ("e_det", self.e_det),
            ("eta_det", self.eta_det),
            ("e0", self.e0),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "detector parameter {name} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// The transmission line, parameterized by its attenuation in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub alpha_db: f64,
}

impl ChannelParams {
    pub fn new(alpha_db: f64) -> Result<Self> {
        if !alpha_db.is_finite() || alpha_db < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "attenuation must be finite and non-negative, got {alpha_db} dB"
            )));
        }
        Ok(Self { alpha_db })
    }
}

/// Overall per-photon detection probability η = 10^(−α/10) · η_det.
pub fn detection_prob(ch: &ChannelParams, det: &DetectorParams) -> f64 {
    10.0_f64.powf(-ch.alpha_db / 10.0) * det.eta_det
}

/// Yield of an n-photon pulse: Y_n = 1 − (1−η)ⁿ + p_dark, capped at 1.
pub fn yield_n(eta: f64, det: &DetectorParams, n: u32) -> f64 {
    let eta_n = 1.0 - (1.0 - eta).powi(n as i32);
    (eta_n + det.p_dark).min(1.0)
}

/// Error rate of an n-photon pulse: e_n = (e_det·η_n + e₀·p_dark) / Y_n.
pub fn error_n(eta: f64, det: &DetectorParams, n: u32) -> Result<f64> {
    let y = yield_n(eta, det, n);
    if y <= 0.0 {
        return Err(Error::DegenerateSource(format!(
            "{n}-photon yield is zero; the error rate is undefined"
        )));
    }
    let eta_n = 1.0 - (1.0 - eta).powi(n as i32);
    Ok(((det.e_det * eta_n + det.e0 * det.p_dark) / y).min(1.0))
}

/// Gain and QBER of one state class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateStatistics {
    pub gain: f64,
    pub qber: f64,
}

/// Expected gain Q = Σ_n Y_n P_n and QBER E = Σ_n e_n Y_n P_n / Q for one
/// photon-number distribution.
///
/// The truncated tail is counted as clicking with probability 1, which can
/// only overstate the multiphoton gain; the distribution must therefore be
/// truncated to a tail below 1e-9 before calling.
pub fn expected_statistics(
    probs: &PhotonClassProbs,
    ch: &ChannelParams,
    det: &DetectorParams,
) -> Result<StateStatistics> {
    if probs.tail() >= 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "photon-number tail {:.3e} too large for channel statistics; tighten the truncation",
            probs.tail()
        )));
    }
    let eta = detection_prob(ch, det);
    let mut gain = probs.tail();
    let mut err_sum = 0.0;
    for (n, &p) in probs.pn().iter().enumerate() {
        let y = yield_n(eta, det, n as u32);
        gain += y * p;
        if y > 0.0 {
            err_sum += error_n(eta, det, n as u32)? * y * p;
        }
    }
    if gain <= 0.0 {
        return Err(Error::DegenerateSource(
            "zero gain; the QBER is undefined".into(),
        ));
    }
    Ok(StateStatistics {
        gain,
        qber: err_sum / gain,
    })
}

/// Assembles the observables of an honest run: signal and decoy gains/QBERs
/// plus the dark-count yield from the vacuum decoy.
pub fn honest_observables(
    probs_s: &PhotonClassProbs,
    probs_d: &PhotonClassProbs,
    ch: &ChannelParams,
    det: &DetectorParams,
) -> Result<ChannelObservables> {
    let sig = expected_statistics(probs_s, ch, det)?;
    let dec = expected_statistics(probs_d, ch, det)?;
    let eta = detection_prob(ch, det);
    Ok(ChannelObservables {
        q_s: sig.gain,
        q_d: dec.gain,
        e_s: sig.qber,
        e_d: dec.qber,
        y0: yield_n(eta, det, 0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::PhotonClassProbs;
    use crate::testutil::assert_close;

    fn gobby() -> DetectorParams {
        crate::presets::gobby2004()
    }

    #[test]
    fn detection_prob_examples() {
        let det = gobby();
        assert_close(
            detection_prob(&ChannelParams::new(0.0).unwrap(), &det),
            0.045,
            1e-15,
        );
        assert_close(
            detection_prob(&ChannelParams::new(10.0).unwrap(), &det),
            0.0045,
            1e-12,
        );
        let unit = DetectorParams::new(0.0, 0.0, 1.0).unwrap();
        assert_close(
            detection_prob(&ChannelParams::new(3.0103).unwrap(), &unit),
            0.5,
            1e-4,
        );
    }

    #[test]
    fn yield_n_examples() {
        let det = gobby();
        assert_eq!(yield_n(0.1, &det, 0), det.p_dark);
        let eta = detection_prob(&ChannelParams::new(10.0).unwrap(), &det);
        assert_close(yield_n(eta, &det, 1), 0.0045 + 1.7e-6, 1e-12);
        assert_eq!(yield_n(1.0, &det, 3), 1.0);
    }

    #[test]
    fn error_n_examples() {
        let det = gobby();
        assert_eq!(error_n(0.2, &det, 0).unwrap(), 0.5);
        assert_close(error_n(1.0, &det, 40).unwrap(), det.e_det, 1e-4);
        let no_dark = DetectorParams::new(0.0, 0.033, 0.045).unwrap();
        for n in 1..6 {
            assert_close(error_n(0.3, &no_dark, n).unwrap(), 0.033, 1e-15);
        }
        assert!(error_n(0.3, &no_dark, 0).is_err());
    }

    #[test]
    fn yields_monotone_errors_fall_toward_edet() {
        let det = gobby();
        let eta = 0.02;
        let mut prev_y = 0.0;
        let mut prev_e = 1.0;
        for n in 0..30 {
            let y = yield_n(eta, &det, n);
            let e = error_n(eta, &det, n).unwrap();
            assert!(y >= prev_y);
            assert!(e <= prev_e + 1e-15);
            prev_y = y;
            prev_e = e;
        }
        assert!(prev_e >= det.e_det);
    }

    #[test]
    fn statistics_vacuum_source() {
        let det = gobby();
        let probs = PhotonClassProbs::from_pn(vec![1.0]).unwrap();
        let stats = expected_statistics(&probs, &ChannelParams::new(5.0).unwrap(), &det).unwrap();
        assert_close(stats.gain, det.p_dark, 1e-15);
        assert_close(stats.qber, 0.5, 1e-12);
    }

    #[test]
    fn statistics_single_photon_source() {
        let det = DetectorParams::new(0.0, 0.033, 0.045).unwrap();
        let ch = ChannelParams::new(7.0).unwrap();
        let probs = PhotonClassProbs::from_pn(vec![0.0, 1.0]).unwrap();
        let stats = expected_statistics(&probs, &ch, &det).unwrap();
        assert_close(stats.gain, detection_prob(&ch, &det), 1e-15);
        assert_close(stats.qber, 0.033, 1e-12);
    }

    #[test]
    fn statistics_mix_linearly() {
        let det = gobby();
        let ch = ChannelParams::new(12.0).unwrap();
        let pa = vec![0.5, 0.3, 0.15, 0.05];
        let pb = vec![0.8, 0.1, 0.06, 0.04];
        let w = 0.37;
        let mix: Vec<f64> = pa
            .iter()
            .zip(&pb)
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect();
        let sa = expected_statistics(&PhotonClassProbs::from_pn(pa).unwrap(), &ch, &det).unwrap();
        let sb = expected_statistics(&PhotonClassProbs::from_pn(pb).unwrap(), &ch, &det).unwrap();
        let sm = expected_statistics(&PhotonClassProbs::from_pn(mix).unwrap(), &ch, &det).unwrap();
        assert_close(sm.gain, w * sa.gain + (1.0 - w) * sb.gain, 1e-12);
        assert_close(
            sm.qber * sm.gain,
            w * sa.qber * sa.gain + (1.0 - w) * sb.qber * sb.gain,
            1e-12,
        );
    }

    #[test]
    fn statistics_reject_fat_tail() {
        let det = gobby();
        let probs = PhotonClassProbs::from_pn(vec![0.5, 0.3]).unwrap();
        assert!(expected_statistics(&probs, &ChannelParams::new(5.0).unwrap(), &det).is_err());
    }

    #[test]
    fn detector_validation() {
        assert!(DetectorParams::new(-0.1, 0.0, 0.5).is_err());
        assert!(DetectorParams::new(0.0, 1.5, 0.5).is_err());
        assert!(DetectorParams::new(0.0, 0.1, 0.5)
            .unwrap()
            .with_e0(2.0)
            .is_err());
        assert!(ChannelParams::new(-1.0).is_err());
    }
}
