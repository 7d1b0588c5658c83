//! The finite-key pipeline: event-rate estimation, the phase-error bound
//! under coherent attacks, the lower bound on usable Z events, epsilon
//! allocation, and the final key length.
//!
//! The chain for one evaluation is
//! source reduction -> phase coefficients -> event-rate upper bounds ->
//! phase-error probability -> phase-error count (with the de Finetti
//! inflation) -> Z-count lower bound -> key length. Every intermediate is
//! kept in the result for auditing; infeasibilities surface as zero-key
//! statuses, never as panics or errors, so parameter sweeps and optimizers
//! can rely on a total function.

use crate::bounds::{
    cher_lower_expectation, cher_upper_expectation, cher_upper_observation, ln_definetti_factor,
    BoundsError, LogEpsilon, MAX_PLAIN_EXPONENT_BITS,
};
use crate::channel::{expected_statistics, ChannelParams, ExpectedCounts};
use crate::framework::{binary_entropy, chain_penalty_bits, epsilon_hat, BudgetError, ChainBudget};
use crate::source::{
    equivalent_source, vacuum_bounds_from_intensity, SourceCharacterization, SourceError,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SecurityError {
    #[error("security parameter `{name}` out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(
        "epsilon allocation does not reproduce eps_tot: 2*eps + eps_bar + eps_cor + eps0 \
         = {sum:e} but eps_tot = {expected:e}"
    )]
    AllocationMismatch { sum: f64, expected: f64 },
    #[error(
        "allocation component `{name}` has log2(1/eps) = {log2_inv}, too small to verify \
         in plain arithmetic"
    )]
    AllocationUnderflow { name: &'static str, log2_inv: f64 },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Coefficients of the phase-error expansion for equivalent intensities
/// `mu_a`, `mu_b`: `c0 = exp(-(mu_a + mu_b)/4)`, `c1 = 1/c0` and
/// `c2bar = sqrt((c0 + c1 - 2 e^(-mu_a/2)) (c0 + c1 - 2 e^(-mu_b/2)))`.
/// Both radicands are nonnegative because `c0 + c1 >= 2 >= 2 e^(-mu/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2bar: f64,
}

/// Total failure budget and its allocation.
///
/// `eps_tot = 2 eps + eps_bar + eps_cor + eps0` is checked in plain
/// arithmetic at construction (these components are large enough by
/// construction). `eps2`/`eps3` parameterize the correlation chain and
/// `definetti_x` is the squared joint dimension entering `g_{N,x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityBudget {
    eps_tot: LogEpsilon,
    eps: LogEpsilon,
    eps_bar: LogEpsilon,
    eps_cor: LogEpsilon,
    eps0: LogEpsilon,
    eps2: LogEpsilon,
    eps3: LogEpsilon,
    definetti_x: u32,
}

impl SecurityBudget {
    /// The reference allocation: `eps = eps_bar = eps_cor = eps0 = eps_tot/5`
    /// and `eps2 = eps3 = eps^2`, with `x = 256`.
    pub fn default_allocation(eps_tot: LogEpsilon) -> Result<Self, SecurityError> {
        let share = eps_tot.divided_by(5.0);
        Self::new(eps_tot, share, share, share, share, share.pow(2.0), share.pow(2.0), 256)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        eps_tot: LogEpsilon,
        eps: LogEpsilon,
        eps_bar: LogEpsilon,
        eps_cor: LogEpsilon,
        eps0: LogEpsilon,
        eps2: LogEpsilon,
        eps3: LogEpsilon,
        definetti_x: u32,
    ) -> Result<Self, SecurityError> {
        if definetti_x < 2 {
            return Err(SecurityError::InvalidParameter {
                name: "definetti_x",
                value: f64::from(definetti_x),
            });
        }
        for (name, e) in [
            ("eps_tot", eps_tot),
            ("eps", eps),
            ("eps_bar", eps_bar),
            ("eps_cor", eps_cor),
            ("eps0", eps0),
        ] {
            if e.log2_inv() > MAX_PLAIN_EXPONENT_BITS {
                return Err(SecurityError::AllocationUnderflow {
                    name,
                    log2_inv: e.log2_inv(),
                });
            }
        }
        let sum = 2.0 * eps.probability()
            + eps_bar.probability()
            + eps_cor.probability()
            + eps0.probability();
        let expected = eps_tot.probability();
        if (sum - expected).abs() > 1e-9 * expected {
            return Err(SecurityError::AllocationMismatch { sum, expected });
        }
        Ok(Self {
            eps_tot,
            eps,
            eps_bar,
            eps_cor,
            eps0,
            eps2,
            eps3,
            definetti_x,
        })
    }

    pub fn eps_tot(&self) -> LogEpsilon {
        self.eps_tot
    }

    pub fn eps(&self) -> LogEpsilon {
        self.eps
    }

    pub fn eps_bar(&self) -> LogEpsilon {
        self.eps_bar
    }

    pub fn eps_cor(&self) -> LogEpsilon {
        self.eps_cor
    }

    pub fn eps0(&self) -> LogEpsilon {
        self.eps0
    }

    pub fn eps2(&self) -> LogEpsilon {
        self.eps2
    }

    pub fn eps3(&self) -> LogEpsilon {
        self.eps3
    }

    pub fn definetti_x(&self) -> u32 {
        self.definetti_x
    }

    /// Chain ledger for correlation range `xi` under this allocation.
    pub fn chain_budget(&self, xi: u32) -> ChainBudget {
        ChainBudget::new(xi, self.eps, self.eps2, self.eps3)
    }
}

/// Which subtraction dominates a negative key-length balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeficitTerm {
    PhaseEntropy,
    ErrorCorrection,
    ChainPenalty,
    Hashing,
}

/// Why an evaluation produced no key.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroKeyReason {
    /// The reduction yields no equivalent source for this party.
    NoEquivalentSource { party: char },
    /// The epsilon chain cannot be satisfied; carries the violated inequality.
    BudgetInfeasible { constraint: String },
    /// No usable Z events survive the lower bound.
    NoZEvents,
    /// The phase-error rate bound reached one half.
    PhaseErrorSaturated,
    /// All terms are finite but the balance is negative.
    NegativeBalance { dominant: DeficitTerm },
}

impl std::fmt::Display for ZeroKeyReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ZeroKeyReason::NoEquivalentSource { party } => {
                write!(f, "no-equivalent-source-{}", party.to_ascii_lowercase())
            }
            ZeroKeyReason::BudgetInfeasible { .. } => write!(f, "budget-infeasible"),
            ZeroKeyReason::NoZEvents => write!(f, "no-z-events"),
            ZeroKeyReason::PhaseErrorSaturated => write!(f, "phase-error-saturated"),
            ZeroKeyReason::NegativeBalance { dominant } => {
                let which = match dominant {
                    DeficitTerm::PhaseEntropy => "phase-entropy",
                    DeficitTerm::ErrorCorrection => "error-correction",
                    DeficitTerm::ChainPenalty => "chain-penalty",
                    DeficitTerm::Hashing => "hashing",
                };
                write!(f, "deficit-{which}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KeyStatus {
    Feasible,
    ZeroKey(ZeroKeyReason),
}

impl std::fmt::Display for KeyStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KeyStatus::Feasible => write!(f, "ok"),
            KeyStatus::ZeroKey(reason) => write!(f, "zero-key({reason})"),
        }
    }
}

/// Every intermediate of the pipeline, for auditing. Stages that were never
/// reached (the status says why) remain NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intermediates {
    pub mu_equ_a: f64,
    pub mu_equ_b: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2bar: f64,
    pub p_o_upper: f64,
    pub p_b_upper: f64,
    pub p_ph: f64,
    pub n_ph_upper: f64,
    pub n_z_lower: f64,
    pub e_bit: f64,
    pub penalty_bits: f64,
    pub eps1_log2_inv: f64,
}

impl Default for Intermediates {
    fn default() -> Self {
        Self {
            mu_equ_a: f64::NAN,
            mu_equ_b: f64::NAN,
            c0: f64::NAN,
            c1: f64::NAN,
            c2bar: f64::NAN,
            p_o_upper: f64::NAN,
            p_b_upper: f64::NAN,
            p_ph: f64::NAN,
            n_ph_upper: f64::NAN,
            n_z_lower: f64::NAN,
            e_bit: f64::NAN,
            penalty_bits: f64::NAN,
            eps1_log2_inv: f64::NAN,
        }
    }
}

/// Outcome of one key-length evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    /// Extractable key length in bits, clamped at zero.
    pub l_max: f64,
    /// Bits per pulse, `l_max / n_total`.
    pub rate: f64,
    pub status: KeyStatus,
    pub intermediates: Intermediates,
}

impl KeyRateResult {
    fn zero(reason: ZeroKeyReason, intermediates: Intermediates) -> Self {
        Self {
            l_max: 0.0,
            rate: 0.0,
            status: KeyStatus::ZeroKey(reason),
            intermediates,
        }
    }
}

/// Phase-error expansion coefficients from the equivalent intensities.
pub fn phase_coefficients(mu_a: f64, mu_b: f64) -> Result<PhaseCoefficients, SecurityError> {
    for (name, value) in [("mu_a", mu_a), ("mu_b", mu_b)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(SecurityError::InvalidParameter { name, value });
        }
    }
    let c0 = (-(mu_a + mu_b) / 4.0).exp();
    let c1 = 1.0 / c0;
    let s = c0 + c1;
    let c2bar = ((s - 2.0 * (-mu_a / 2.0).exp()) * (s - 2.0 * (-mu_b / 2.0).exp()))
        .max(0.0)
        .sqrt();
    Ok(PhaseCoefficients { c0, c1, c2bar })
}

/// Upper bounds on the joint probabilities (class, success, key round) of
/// the O and B classes over all rounds:
/// `P_X <= ((1 - p_pe)/p_pe) * Cher_upper(n_X_pe, eps_each) / N`.
pub fn event_rate_upper_bounds(
    n_o_pe: f64,
    n_b_pe: f64,
    n_total: f64,
    p_pe: f64,
    eps_each: LogEpsilon,
) -> Result<(f64, f64), SecurityError> {
    if !(n_total >= 1.0 && n_total.is_finite()) {
        return Err(SecurityError::InvalidParameter {
            name: "n_total",
            value: n_total,
        });
    }
    if !(p_pe > 0.0 && p_pe < 1.0) {
        return Err(SecurityError::InvalidParameter {
            name: "p_pe",
            value: p_pe,
        });
    }
    let ratio = (1.0 - p_pe) / p_pe;
    let p_o = ratio * cher_upper_expectation(n_o_pe, eps_each)? / n_total;
    let p_b = ratio * cher_upper_expectation(n_b_pe, eps_each)? / n_total;
    Ok((p_o, p_b))
}

/// Upper bound on the phase-error probability over all rounds.
///
/// `p_o_up` and `p_b_up` are joint probabilities of (class, success, key
/// round) over all N rounds, exactly as [`event_rate_upper_bounds`]
/// produces them. The printed six-term bound is stated for the per-round
/// measurement overlaps, so the inputs are first normalized by
/// `(1 - p_pe) p_r^2`; the overall `(1 - p_pe) p0 p1 / 2` prefactor then
/// restores the all-rounds normalization that the phase-error count uses.
/// One fixed convention, applied consistently end to end.
pub fn phase_error_probability(
    p_o_up: f64,
    p_b_up: f64,
    p_send: f64,
    coeffs: &PhaseCoefficients,
    p_pe: f64,
) -> Result<f64, SecurityError> {
    for (name, value) in [("p_o_up", p_o_up), ("p_b_up", p_b_up)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(SecurityError::InvalidParameter { name, value });
        }
    }
    if !(p_send > 0.0 && p_send < 1.0) {
        return Err(SecurityError::InvalidParameter {
            name: "p_send",
            value: p_send,
        });
    }
    if !(p_pe > 0.0 && p_pe < 1.0) {
        return Err(SecurityError::InvalidParameter {
            name: "p_pe",
            value: p_pe,
        });
    }
    let p1 = p_send;
    let p0 = 1.0 - p_send;
    let key = 1.0 - p_pe;
    let sigma_o = p_o_up / (key * p0 * p0);
    let sigma_b = p_b_up / (key * p1 * p1);
    let PhaseCoefficients { c0, c1, c2bar } = *coeffs;
    let bracket = c0 * c0 * sigma_o
        + c1 * c1 * sigma_b
        + c2bar * c2bar
        + 2.0 * c0 * c1 * (sigma_o * sigma_b).sqrt()
        + c0 * c2bar * sigma_o.sqrt()
        + c1 * c2bar * sigma_b.sqrt();
    Ok((key * p0 * p1 / 2.0 * bracket).clamp(0.0, 1.0))
}

/// The failure probability each of the three phase-chain estimation steps
/// consumes under coherent attacks: `eps1^2 / (3 g_{N,x})`, assembled in the
/// log domain as `ln(1/eps_eff) = 2 ln(1/eps1) + ln 3 + ln g_{N,x}`.
pub fn phase_estimation_epsilon(
    n_total: u64,
    eps1: LogEpsilon,
    definetti_x: u32,
) -> Result<LogEpsilon, SecurityError> {
    let ln_inv =
        2.0 * eps1.ln_inv() + 3f64.ln() + ln_definetti_factor(n_total, definetti_x)?;
    Ok(LogEpsilon::from_log2_inv(ln_inv / std::f64::consts::LN_2)?)
}

/// Phase-error count upper bound under coherent attacks:
/// `cher_upper_observation(N * P_ph, eps1^2 / (3 g_{N,x}))`.
pub fn phase_error_count(
    n_total: f64,
    p_ph: f64,
    eps1: LogEpsilon,
    definetti_x: u32,
) -> Result<f64, SecurityError> {
    if !(n_total >= 1.0 && n_total.is_finite()) {
        return Err(SecurityError::InvalidParameter {
            name: "n_total",
            value: n_total,
        });
    }
    if !(0.0..=1.0).contains(&p_ph) {
        return Err(SecurityError::InvalidParameter {
            name: "p_ph",
            value: p_ph,
        });
    }
    let eps_eff = phase_estimation_epsilon(n_total as u64, eps1, definetti_x)?;
    Ok(cher_upper_observation(n_total * p_ph, eps_eff)?)
}

/// Lower bound on the Z events available for key extraction:
/// `Cher_lower(n_Z_pe, eps0) / p_pe - n_Z_pe`, clamped at zero.
pub fn z_count_lower(n_z_pe: f64, p_pe: f64, eps0: LogEpsilon) -> Result<f64, SecurityError> {
    if !(p_pe > 0.0 && p_pe < 1.0) {
        return Err(SecurityError::InvalidParameter {
            name: "p_pe",
            value: p_pe,
        });
    }
    Ok((cher_lower_expectation(n_z_pe, eps0)? / p_pe - n_z_pe).max(0.0))
}

/// Assembles the full pipeline into the extractable key length
/// `l_max = n_Z (1 - h(n_ph/n_Z)) - f n_raw h(e_bit) - log2(2/eps_cor)
///  - 2 log2(1/(2 eps_bar)) - 2 xi log2(1/eps2) - 2 (xi+1) log2(1/eps3)`.
///
/// `p_send` is the protocol-level sending probability entering the
/// phase-error bound; `chain` carries the correlation range. The error
/// correction term spends `f * h(e_bit)` per successful key round. All
/// infeasibilities become zero-key statuses.
#[allow(clippy::too_many_arguments)]
pub fn key_length(
    counts: &ExpectedCounts,
    src_a: &SourceCharacterization,
    src_b: &SourceCharacterization,
    budget: &SecurityBudget,
    chain: &ChainBudget,
    ec_efficiency: f64,
    p_send: f64,
) -> Result<KeyRateResult, SecurityError> {
    if !(ec_efficiency >= 1.0 && ec_efficiency.is_finite()) {
        return Err(SecurityError::InvalidParameter {
            name: "ec_efficiency",
            value: ec_efficiency,
        });
    }
    debug_assert_eq!(src_a.xi(), chain.xi());
    debug_assert_eq!(src_b.xi(), chain.xi());

    let n_total = counts.n_total;
    let mut inter = Intermediates {
        e_bit: counts.e_bit,
        penalty_bits: chain_penalty_bits(chain),
        ..Intermediates::default()
    };

    // Source reduction per party.
    let equ_a = match equivalent_source(src_a) {
        Ok(e) => e,
        Err(SourceError::NoEquivalentSource { .. }) => {
            return Ok(KeyRateResult::zero(
                ZeroKeyReason::NoEquivalentSource { party: 'A' },
                inter,
            ))
        }
        Err(e) => {
            return Err(SecurityError::InvalidParameter {
                name: "src_a",
                value: match e {
                    SourceError::InvalidField { value, .. } => value,
                    _ => f64::NAN,
                },
            })
        }
    };
    inter.mu_equ_a = equ_a.mu_equ;
    let equ_b = match equivalent_source(src_b) {
        Ok(e) => e,
        Err(SourceError::NoEquivalentSource { .. }) => {
            return Ok(KeyRateResult::zero(
                ZeroKeyReason::NoEquivalentSource { party: 'B' },
                inter,
            ))
        }
        Err(e) => {
            return Err(SecurityError::InvalidParameter {
                name: "src_b",
                value: match e {
                    SourceError::InvalidField { value, .. } => value,
                    _ => f64::NAN,
                },
            })
        }
    };
    inter.mu_equ_b = equ_b.mu_equ;

    let coeffs = phase_coefficients(equ_a.mu_equ, equ_b.mu_equ)?;
    inter.c0 = coeffs.c0;
    inter.c1 = coeffs.c1;
    inter.c2bar = coeffs.c2bar;

    // Epsilon chain.
    let eps1 = match epsilon_hat(chain) {
        Ok(e) => e,
        Err(BudgetError::Infeasible { constraint }) => {
            return Ok(KeyRateResult::zero(
                ZeroKeyReason::BudgetInfeasible { constraint },
                inter,
            ))
        }
        Err(e) => {
            return Err(SecurityError::InvalidParameter {
                name: "chain",
                value: match e {
                    BudgetError::ExponentUnsafe(v) => v,
                    _ => f64::NAN,
                },
            })
        }
    };
    inter.eps1_log2_inv = eps1.log2_inv();

    // Three estimation steps, each at eps1^2 / (3 g_{N,x}).
    let eps_eff = phase_estimation_epsilon(n_total as u64, eps1, budget.definetti_x)?;
    let (p_o_up, p_b_up) =
        event_rate_upper_bounds(counts.n_o_pe, counts.n_b_pe, n_total, counts.p_pe, eps_eff)?;
    inter.p_o_upper = p_o_up;
    inter.p_b_upper = p_b_up;

    let p_ph = phase_error_probability(p_o_up, p_b_up, p_send, &coeffs, counts.p_pe)?;
    inter.p_ph = p_ph;
    let n_ph = phase_error_count(n_total, p_ph, eps1, budget.definetti_x)?;
    inter.n_ph_upper = n_ph;

    let n_z = z_count_lower(counts.n_z_pe, counts.p_pe, budget.eps0)?;
    inter.n_z_lower = n_z;
    if n_z <= 0.0 {
        return Ok(KeyRateResult::zero(ZeroKeyReason::NoZEvents, inter));
    }

    let ratio = n_ph / n_z;
    if ratio >= 0.5 {
        return Ok(KeyRateResult::zero(ZeroKeyReason::PhaseErrorSaturated, inter));
    }

    let phase_loss = n_z * binary_entropy(ratio).expect("ratio in [0, 1/2)");
    let ec_cost = ec_efficiency
        * counts.n_succ_key
        * binary_entropy(counts.e_bit).expect("e_bit validated in [0,1]");
    let hash_cost = 1.0 + budget.eps_cor.log2_inv(); // log2(2/eps_cor)
    let pa_cost = 2.0 * (budget.eps_bar.log2_inv() - 1.0); // 2 log2(1/(2 eps_bar))
    let balance = n_z - phase_loss - ec_cost - hash_cost - pa_cost - inter.penalty_bits;

    if balance <= 0.0 {
        let dominant = [
            (DeficitTerm::PhaseEntropy, phase_loss),
            (DeficitTerm::ErrorCorrection, ec_cost),
            (DeficitTerm::ChainPenalty, inter.penalty_bits),
            (DeficitTerm::Hashing, hash_cost + pa_cost),
        ]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(t, _)| t)
        .expect("nonempty");
        return Ok(KeyRateResult::zero(
            ZeroKeyReason::NegativeBalance { dominant },
            inter,
        ));
    }

    Ok(KeyRateResult {
        l_max: balance,
        rate: balance / n_total,
        status: KeyStatus::Feasible,
        intermediates: inter,
    })
}

/// One symmetric protocol operating point: both parties share the sending
/// probability and intensity cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolPoint {
    pub p_send: f64,
    pub mu_max: f64,
    pub p_pe: f64,
}

/// Evaluates the full pipeline at a symmetric operating point: caps the
/// intensities, derives the vacuum bounds, runs the honest-channel model and
/// the key-length pipeline.
pub fn evaluate_symmetric(
    channel: &ChannelParams,
    n_total: f64,
    xi: u32,
    budget: &SecurityBudget,
    ec_efficiency: f64,
    point: &ProtocolPoint,
) -> Result<KeyRateResult, crate::Error> {
    let (v0, v1) = vacuum_bounds_from_intensity(point.mu_max, channel.extinction())?;
    let src = SourceCharacterization::new(xi, v0, v1, point.p_send)?;
    let counts = expected_statistics(
        n_total,
        point.p_pe,
        &src,
        point.mu_max,
        &src,
        point.mu_max,
        channel,
    )?;
    let chain = budget.chain_budget(xi);
    Ok(key_length(
        &counts,
        &src,
        &src,
        budget,
        &chain,
        ec_efficiency,
        point.p_send,
    )?)
}
