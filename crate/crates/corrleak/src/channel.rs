//! Honest-channel statistics for a two-state SNS link measured by an
//! interfering untrusted node.
//!
//! Detection model: Poissonian light on threshold detectors behind a 50:50
//! interference with visibility `1 - 2 * misalignment`, compensated so that
//! the right port is the destructive one. A round is successful when the
//! right detector clicks and the left does not. Detector efficiency is
//! folded into the attenuation. The model is isolated here so it can be
//! swapped; the seeded Monte Carlo oracle in [`crate::montecarlo`] validates
//! it at the photon level.

use crate::source::SourceCharacterization;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("channel parameter `{name}` out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Physical parameters of the two links and the measurement node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    att_a_db: f64,
    att_b_db: f64,
    dark_rate: f64,
    misalignment: f64,
    extinction: f64,
}

impl ChannelParams {
    pub fn new(
        att_a_db: f64,
        att_b_db: f64,
        dark_rate: f64,
        misalignment: f64,
        extinction: f64,
    ) -> Result<Self, ChannelError> {
        for (name, value) in [("att_a_db", att_a_db), ("att_b_db", att_b_db)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ChannelError::InvalidParameter { name, value });
            }
        }
        if !(0.0..1.0).contains(&dark_rate) {
            return Err(ChannelError::InvalidParameter {
                name: "dark_rate",
                value: dark_rate,
            });
        }
        // The visibility model 1 - 2 e_d breaks beyond one half.
        if !(0.0..=0.5).contains(&misalignment) {
            return Err(ChannelError::InvalidParameter {
                name: "misalignment",
                value: misalignment,
            });
        }
        if !(0.0..=1.0).contains(&extinction) {
            return Err(ChannelError::InvalidParameter {
                name: "extinction",
                value: extinction,
            });
        }
        Ok(Self {
            att_a_db,
            att_b_db,
            dark_rate,
            misalignment,
            extinction,
        })
    }

    /// Symmetric links: one attenuation applied to both sides.
    pub fn symmetric(
        att_db: f64,
        dark_rate: f64,
        misalignment: f64,
        extinction: f64,
    ) -> Result<Self, ChannelError> {
        Self::new(att_db, att_db, dark_rate, misalignment, extinction)
    }

    pub fn att_a_db(&self) -> f64 {
        self.att_a_db
    }

    pub fn att_b_db(&self) -> f64 {
        self.att_b_db
    }

    pub fn dark_rate(&self) -> f64 {
        self.dark_rate
    }

    pub fn misalignment(&self) -> f64 {
        self.misalignment
    }

    pub fn extinction(&self) -> f64 {
        self.extinction
    }

    /// Transmittance of Alice's link, `10^(-att/10)`.
    pub fn eta_a(&self) -> f64 {
        10f64.powf(-self.att_a_db / 10.0)
    }

    /// Transmittance of Bob's link.
    pub fn eta_b(&self) -> f64 {
        10f64.powf(-self.att_b_db / 10.0)
    }
}

/// Event class of a round, by who chose the send setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventClass {
    /// Exactly one party sent; carries a correct key bit.
    Z,
    /// Neither sent; a successful O round is a bit error.
    O,
    /// Both sent; a successful B round is a bit error.
    B,
}

/// Expected counts of the honest channel, split into parameter-estimation
/// and key-extraction rounds in the exact ratio `p_pe : 1 - p_pe`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCounts {
    pub n_total: f64,
    pub p_pe: f64,
    pub n_z_pe: f64,
    pub n_o_pe: f64,
    pub n_b_pe: f64,
    pub n_z_key: f64,
    pub n_o_key: f64,
    pub n_b_key: f64,
    /// Total successful key-extraction rounds (the raw key length).
    pub n_succ_key: f64,
    /// QBER over successful key rounds; zero when there are none.
    pub e_bit: f64,
}

/// Probability that only the right (destructive) detector clicks for mean
/// photon numbers `a`, `b` arriving at the node:
/// `[1 - (1-p_d) e^(-I_R)] (1-p_d) e^(-I_L)` with
/// `I_{R,L} = (a+b)/2 -/+ V sqrt(ab)` and visibility `V = 1 - 2 e_d`.
pub fn success_probability(
    intensity_a: f64,
    intensity_b: f64,
    params: &ChannelParams,
) -> Result<f64, ChannelError> {
    for (name, value) in [("intensity_a", intensity_a), ("intensity_b", intensity_b)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(ChannelError::InvalidParameter { name, value });
        }
    }
    let visibility = 1.0 - 2.0 * params.misalignment;
    let mean = 0.5 * (intensity_a + intensity_b);
    let cross = visibility * (intensity_a * intensity_b).sqrt();
    let i_right = (mean - cross).max(0.0);
    let i_left = mean + cross;
    let no_dark = 1.0 - params.dark_rate;
    Ok((1.0 - no_dark * (-i_right).exp()) * (no_dark * (-i_left).exp()))
}

/// Per-class arrival intensities and selection probabilities of the four
/// `(r_A, r_B)` setting combinations.
pub(crate) fn setting_cases(
    src_a: &SourceCharacterization,
    mu_a: f64,
    src_b: &SourceCharacterization,
    mu_b: f64,
    params: &ChannelParams,
) -> [(EventClass, f64, f64, f64); 4] {
    let (p1a, p1b) = (src_a.p_send(), src_b.p_send());
    let (p0a, p0b) = (1.0 - p1a, 1.0 - p1b);
    let (eta_a, eta_b) = (params.eta_a(), params.eta_b());
    let delta = params.extinction();
    let send_a = mu_a * eta_a;
    let idle_a = delta * mu_a * eta_a;
    let send_b = mu_b * eta_b;
    let idle_b = delta * mu_b * eta_b;
    [
        (EventClass::O, p0a * p0b, idle_a, idle_b),
        (EventClass::Z, p1a * p0b, send_a, idle_b),
        (EventClass::Z, p0a * p1b, idle_a, send_b),
        (EventClass::B, p1a * p1b, send_a, send_b),
    ]
}

/// Expected Z/O/B successful counts and QBER over `n_total` rounds tagged
/// for parameter estimation with probability `p_pe`. The send intensities
/// `mu_a`, `mu_b` saturate each party's cap; not-send rounds leak the
/// extinction fraction of that intensity.
#[allow(clippy::too_many_arguments)]
pub fn expected_statistics(
    n_total: f64,
    p_pe: f64,
    src_a: &SourceCharacterization,
    mu_a: f64,
    src_b: &SourceCharacterization,
    mu_b: f64,
    params: &ChannelParams,
) -> Result<ExpectedCounts, ChannelError> {
    if !(n_total >= 1.0 && n_total.is_finite()) {
        return Err(ChannelError::InvalidParameter {
            name: "n_total",
            value: n_total,
        });
    }
    if !(p_pe > 0.0 && p_pe < 1.0) {
        return Err(ChannelError::InvalidParameter {
            name: "p_pe",
            value: p_pe,
        });
    }
    for (name, value) in [("mu_a", mu_a), ("mu_b", mu_b)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(ChannelError::InvalidParameter { name, value });
        }
    }

    let mut per_class = [0.0f64; 3]; // joint P(class and success), all rounds
    for (class, p_case, ia, ib) in setting_cases(src_a, mu_a, src_b, mu_b, params) {
        per_class[class as usize] += p_case * success_probability(ia, ib, params)?;
    }
    let [p_z, p_o, p_b] = [
        per_class[EventClass::Z as usize],
        per_class[EventClass::O as usize],
        per_class[EventClass::B as usize],
    ];

    let key = 1.0 - p_pe;
    let n_z_key = n_total * key * p_z;
    let n_o_key = n_total * key * p_o;
    let n_b_key = n_total * key * p_b;
    let n_succ_key = n_z_key + n_o_key + n_b_key;
    let e_bit = if n_succ_key > 0.0 {
        (n_o_key + n_b_key) / n_succ_key
    } else {
        0.0
    };
    Ok(ExpectedCounts {
        n_total,
        p_pe,
        n_z_pe: n_total * p_pe * p_z,
        n_o_pe: n_total * p_pe * p_o,
        n_b_pe: n_total * p_pe * p_b,
        n_z_key,
        n_o_key,
        n_b_key,
        n_succ_key,
        e_bit,
    })
}
