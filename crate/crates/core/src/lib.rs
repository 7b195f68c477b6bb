//! Secure-key-rate lower bounds for decoy-state BB84 with multi-mode photon
//! sources.
//!
//! Weak-coherent decoy analyses assume signal and decoy pulses are emitted
//! into a single optical mode, so that an eavesdropper cannot tell n-photon
//! signal events from n-photon decoy events. A parametric down-conversion
//! (PDC) source breaks that assumption: its output occupies many spectral
//! (Schmidt) modes, and because the per-mode squeezing scales with the pump
//! intensity, signal and decoy pulses populate the modes differently. An
//! eavesdropper who resolves the mode occupation can block modes selectively
//! and reach different yields for signal and decoy without being detected.
//!
//! This crate models the traced-out multi-mode PDC state, computes the
//! worst-case (mode-blocking) bounds on the signal single-photon yield and
//! error rate, and combines them with a standard threshold-detector channel
//! model into a key-rate lower bound. The single-mode baseline bounds are
//! implemented alongside for comparison, so the certified-rate cost of the
//! multi-mode structure can be quantified.
//!
//! Module map:
//! * [`source`] — Schmidt weights, per-mode squeezing, photon-number and
//!   mode-occupation statistics, multiphoton event enumeration.
//! * [`channel`] — detector model and honest-channel gains/QBERs.
//! * [`bounds`] — single-mode baseline bounds and the multi-mode greedy
//!   bounds with their fixed-point iteration.
//! * [`keyrate`] — key-rate formula, signal-intensity optimization, and
//!   attenuation sweeps.
//! * [`presets`] — built-in mode-weight tables and detector parameters.
//!
//! All types are immutable after construction and all operations are pure;
//! everything can be shared freely across threads.

pub mod bounds;
pub mod channel;
mod error;
pub mod keyrate;
pub mod presets;
pub mod source;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    pub fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (tol {tol})"
        );
    }
}
