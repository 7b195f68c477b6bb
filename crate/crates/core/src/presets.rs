//! Built-in source and detector parameter sets.
//!
//! The mode-weight tables are Schmidt coefficients of a waveguided
//! periodically poled KTP crystal pumped at 775 nm with four different pump
//! bandwidths; wider pumps spread the two-photon amplitude over more
//! spectral modes. The detector set matches a fiber-based gated InGaAs
//! receiver.

use crate::channel::DetectorParams;
use crate::source::ModeWeights;

/// KTP mode weights for a 1 nm pump bandwidth (8 effective modes).
pub const SIGMA_1NM: &[f64] = &[0.959, 0.194, 0.152, 0.098, 0.088, 0.033, 0.032, 0.014];

/// KTP mode weights for a 2 nm pump bandwidth (7 effective modes).
pub const SIGMA_2NM: &[f64] = &[0.871, 0.463, 0.140, 0.064, 0.054, 0.028, 0.001];

/// KTP mode weights for a 4 nm pump bandwidth (13 effective modes).
pub const SIGMA_4NM: &[f64] = &[
    0.690, 0.555, 0.383, 0.222, 0.107, 0.054, 0.050, 0.044, 0.023, 0.012, 0.004, 0.003, 0.001,
];

/// KTP mode weights for an 8 nm pump bandwidth (19 effective modes).
pub const SIGMA_8NM: &[f64] = &[
    0.511, 0.478, 0.427, 0.364, 0.296, 0.228, 0.167, 0.117, 0.078, 0.056, 0.047, 0.037, 0.023,
    0.015, 0.014, 0.011, 0.006, 0.003, 0.001,
];

/// Two-mode pedagogical source with λ = (√0.75, √0.25).
pub const TWO_MODE_DEMO: &[f64] = &[0.8660254037844386, 0.5];

/// Mean photon number that tunes the two-mode demo source to the decoy
/// occupations m = (0.7, 0.3).
pub const TWO_MODE_DEMO_MU_DECOY: f64 = 1.1064871864605746;

/// Mean photon number that tunes the two-mode demo source to the signal
/// occupations m = (0.6, 0.4).
pub const TWO_MODE_DEMO_MU_SIGNAL: f64 = 9.561046700733192;

/// Resolves a named mode-weight preset.
pub fn mode_weights(name: &str) -> Option<ModeWeights> {
    let raw = match name {
        "sigma-1nm" => SIGMA_1NM,
        "sigma-2nm" => SIGMA_2NM,
        "sigma-4nm" => SIGMA_4NM,
        "sigma-8nm" => SIGMA_8NM,
        "two-mode-demo" => TWO_MODE_DEMO,
        _ => return None,
    };
    Some(ModeWeights::new(raw.to_vec()).expect("preset weights are valid"))
}

/// Names accepted by [`mode_weights`], in canonical order.
pub const WEIGHT_PRESETS: &[&str] = &[
    "sigma-1nm",
    "sigma-2nm",
    "sigma-4nm",
    "sigma-8nm",
    "two-mode-demo",
];

/// Gated InGaAs detector: dark-count probability 1.7e-6 per pulse, detection
/// error 3.3%, efficiency 4.5%, vacuum error rate 1/2.
pub fn gobby2004() -> DetectorParams {
    DetectorParams::new(1.7e-6, 0.033, 0.045).expect("preset detector is valid")
}
