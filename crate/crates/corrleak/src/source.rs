//! Reduction of a minimally characterized source to its equivalent i.i.d.
//! coherent source.
//!
//! The only assumptions about a device are its correlation range `xi` and
//! lower bounds `v0`, `v1` on the vacuum component of what it emits in the
//! not-send / send settings. Correlation discounts the usable vacuum bounds
//! by `(p0 sqrt(v0) + p1 sqrt(v1))^(2 xi)`; the discounted bounds then fix
//! the intensity `mu_equ` of the equivalent coherent source through
//! `exp(-mu_equ) = [sqrt(v0_xi v1_xi) - sqrt((1-v0_xi)(1-v1_xi))]^2`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SourceError {
    #[error("source field `{name}` out of range: {value}")]
    InvalidField { name: &'static str, value: f64 },
    #[error(
        "no equivalent source: sqrt(v0_xi*v1_xi) <= sqrt((1-v0_xi)*(1-v1_xi)) \
         for v0_xi = {v0_xi}, v1_xi = {v1_xi}"
    )]
    NoEquivalentSource { v0_xi: f64, v1_xi: f64 },
}

/// Minimal characterization of one party's source.
///
/// `v0` and `v1` each live in `[0, 1]`; no ordering between them is required.
/// `p_send` is the probability of choosing the send setting and must be
/// strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCharacterization {
    xi: u32,
    v0: f64,
    v1: f64,
    p_send: f64,
}

impl SourceCharacterization {
    pub fn new(xi: u32, v0: f64, v1: f64, p_send: f64) -> Result<Self, SourceError> {
        for (name, value) in [("v0", v0), ("v1", v1)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SourceError::InvalidField { name, value });
            }
        }
        if !(p_send > 0.0 && p_send < 1.0) {
            return Err(SourceError::InvalidField {
                name: "p_send",
                value: p_send,
            });
        }
        Ok(Self {
            xi,
            v0,
            v1,
            p_send,
        })
    }

    pub fn xi(&self) -> u32 {
        self.xi
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn v1(&self) -> f64 {
        self.v1
    }

    pub fn p_send(&self) -> f64 {
        self.p_send
    }
}

/// The reduced i.i.d. source of one party.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentSource {
    /// Mean photon number of the equivalent coherent state.
    pub mu_equ: f64,
    /// Correlation-adjusted vacuum bound, not-send setting.
    pub v0_xi: f64,
    /// Correlation-adjusted vacuum bound, send setting.
    pub v1_xi: f64,
}

/// Correlation-adjusted vacuum bounds
/// `v_r_xi = v_r (p0 sqrt(v0) + p1 sqrt(v1))^(2 xi)`.
pub fn correlation_adjusted_vacuum(src: &SourceCharacterization) -> (f64, f64) {
    let p1 = src.p_send;
    let p0 = 1.0 - p1;
    let bracket = p0 * src.v0.sqrt() + p1 * src.v1.sqrt();
    let factor = if src.xi == 0 {
        1.0
    } else {
        bracket.powf(2.0 * f64::from(src.xi))
    };
    (src.v0 * factor, src.v1 * factor)
}

/// Equivalent intensity from adjusted vacuum bounds:
/// `mu_equ = -2 ln(sqrt(v0_xi v1_xi) - sqrt((1-v0_xi)(1-v1_xi)))`.
///
/// When the overlap difference is not positive the reduction yields no
/// equivalent source; callers treat that as zero key, not a crash.
pub fn equivalent_intensity(v0_xi: f64, v1_xi: f64) -> Result<f64, SourceError> {
    for (name, value) in [("v0_xi", v0_xi), ("v1_xi", v1_xi)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(SourceError::InvalidField { name, value });
        }
    }
    let diff = (v0_xi * v1_xi).sqrt() - ((1.0 - v0_xi) * (1.0 - v1_xi)).sqrt();
    if diff <= 0.0 {
        return Err(SourceError::NoEquivalentSource { v0_xi, v1_xi });
    }
    Ok((-2.0 * diff.ln()).max(0.0))
}

/// Full reduction: adjusted vacuum bounds plus equivalent intensity.
pub fn equivalent_source(src: &SourceCharacterization) -> Result<EquivalentSource, SourceError> {
    let (v0_xi, v1_xi) = correlation_adjusted_vacuum(src);
    let mu_equ = equivalent_intensity(v0_xi, v1_xi)?;
    Ok(EquivalentSource {
        mu_equ,
        v0_xi,
        v1_xi,
    })
}

/// Vacuum bounds for a phase-randomizable source whose pulse intensities are
/// capped at `mu_max` (send) and `extinction * mu_max` (not send): the worst
/// case saturates the cap, so `v1 = exp(-mu_max)` and
/// `v0 = exp(-extinction * mu_max)` are the minimal vacuum weights.
pub fn vacuum_bounds_from_intensity(
    mu_max: f64,
    extinction: f64,
) -> Result<(f64, f64), SourceError> {
    if !(mu_max >= 0.0 && mu_max.is_finite()) {
        return Err(SourceError::InvalidField {
            name: "mu_max",
            value: mu_max,
        });
    }
    if !(0.0..=1.0).contains(&extinction) {
        return Err(SourceError::InvalidField {
            name: "extinction",
            value: extinction,
        });
    }
    Ok(((-extinction * mu_max).exp(), (-mu_max).exp()))
}
