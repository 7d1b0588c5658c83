//! The correlation-removing entropy budget: epsilon composition across the
//! chain of interleaved sub-keys, the penalty bits this costs, and the
//! composed smooth-min-entropy lower bound.
//!
//! A raw key with correlation range `xi` splits into `xi + 1` interleaved
//! parts. Chaining them costs `xi` links at `f = 2 log2(1/eps2)` bits each;
//! splitting each part into its estimable and non-estimable pieces costs
//! another `f' = 2 log2(1/eps3)` per part. The surviving smoothing parameter
//! for phase-error estimation is
//! `eps_hat = ((eps - xi*eps2)/(2 xi + 1) - eps3)^(xi + 1)`.

use crate::bounds::{BoundsError, LogEpsilon, MAX_PLAIN_EXPONENT_BITS};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BudgetError {
    #[error("budget infeasible: {constraint}")]
    Infeasible { constraint: String },
    #[error(
        "epsilon with log2(1/eps) = {0} cannot be exponentiated for the feasibility \
         test; chain and split epsilons must stay below 2^-{MAX_PLAIN_EXPONENT_BITS}"
    )]
    ExponentUnsafe(f64),
    #[error("value must lie in [0, 1], got {0}")]
    OutOfRange(f64),
    #[error("count of estimable bits must be nonnegative and finite, got {0}")]
    InvalidBitCount(f64),
    #[error("partition must contain at least one part")]
    EmptyPartition,
    #[error("a chain over {parts} parts needs {expected} links, got {got}")]
    LinkCountMismatch {
        parts: usize,
        expected: usize,
        got: usize,
    },
    #[error("chain link {index} infeasible: {constraint}")]
    LinkInfeasible { index: usize, constraint: String },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Plain probability of an epsilon that is guaranteed representable; the
/// feasibility arithmetic below never exponentiates anything smaller.
fn plain(eps: LogEpsilon) -> Result<f64, BudgetError> {
    if eps.log2_inv() > MAX_PLAIN_EXPONENT_BITS {
        return Err(BudgetError::ExponentUnsafe(eps.log2_inv()));
    }
    Ok(eps.probability())
}

/// Epsilon ledger of the correlation chain for one protocol run.
///
/// `eps` is the total smoothing parameter, `eps2 = 2^(-f/2)` the per-link
/// chain parameter and `eps3 = 2^(-f'/2)` the per-part split parameter.
/// `eps3 = None` models the special case in which every raw-key bit can
/// estimate phase errors, deleting all `f'` terms; the standard pipeline
/// always keeps the split.
#[derive(Debug, Clone, Copy)]
pub struct ChainBudget {
    xi: u32,
    eps: LogEpsilon,
    eps2: LogEpsilon,
    eps3: Option<LogEpsilon>,
}

impl ChainBudget {
    pub fn new(xi: u32, eps: LogEpsilon, eps2: LogEpsilon, eps3: LogEpsilon) -> Self {
        Self {
            xi,
            eps,
            eps2,
            eps3: Some(eps3),
        }
    }

    /// Chain without the estimable/non-estimable split (no `f'` terms).
    pub fn all_estimable(xi: u32, eps: LogEpsilon, eps2: LogEpsilon) -> Self {
        Self {
            xi,
            eps,
            eps2,
            eps3: None,
        }
    }

    pub fn xi(&self) -> u32 {
        self.xi
    }

    pub fn eps(&self) -> LogEpsilon {
        self.eps
    }

    pub fn eps2(&self) -> LogEpsilon {
        self.eps2
    }

    pub fn eps3(&self) -> Option<LogEpsilon> {
        self.eps3
    }
}

/// The surviving smoothing parameter
/// `eps_hat = ((eps - xi*eps2)/(2 xi + 1) - eps3)^(xi + 1)`, returned in
/// exponent form; the base is exponent-safe by construction, `eps_hat`
/// itself never is for large `xi` and is never materialized.
pub fn epsilon_hat(budget: &ChainBudget) -> Result<LogEpsilon, BudgetError> {
    let eps = plain(budget.eps)?;
    let xi = f64::from(budget.xi);
    let eps2 = if budget.xi == 0 { 0.0 } else { plain(budget.eps2)? };
    let eps3 = match budget.eps3 {
        Some(e) => plain(e)?,
        None => 0.0,
    };
    let numerator = eps - xi * eps2;
    if numerator <= 0.0 {
        return Err(BudgetError::Infeasible {
            constraint: format!(
                "xi*eps2 < eps required, got xi*eps2 = {:e}, eps = {:e}",
                xi * eps2,
                eps
            ),
        });
    }
    let base = numerator / (2.0 * xi + 1.0) - eps3;
    if base <= 0.0 {
        return Err(BudgetError::Infeasible {
            constraint: format!(
                "eps3 < (eps - xi*eps2)/(2*xi + 1) required, got eps3 = {:e}, \
                 (eps - xi*eps2)/(2*xi + 1) = {:e}",
                eps3,
                numerator / (2.0 * xi + 1.0)
            ),
        });
    }
    Ok(LogEpsilon::from_log2_inv((xi + 1.0) * -base.log2())?)
}

/// Bits lost to the chain: `2 xi log2(1/eps2) + 2 (xi+1) log2(1/eps3)`.
pub fn chain_penalty_bits(budget: &ChainBudget) -> f64 {
    let link = 2.0 * f64::from(budget.xi) * budget.eps2.log2_inv();
    let split = match budget.eps3 {
        Some(e) => 2.0 * (f64::from(budget.xi) + 1.0) * e.log2_inv(),
        None => 0.0,
    };
    link + split
}

/// Binary entropy `h(x) = -x log2(x) - (1-x) log2(1-x)`, with
/// `h(0) = h(1) = 0` exactly.
pub fn binary_entropy(x: f64) -> Result<f64, BudgetError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(BudgetError::OutOfRange(x));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Composed lower bound `n (1 - h(e_ph_upper)) - penalty_bits`.
///
/// The uncertainty-relation credit is only meaningful below one half; for
/// `e_ph_upper > 1/2` the credit is zeroed (not negated), leaving the
/// penalty as the bound.
pub fn composed_min_entropy(
    n: f64,
    e_ph_upper: f64,
    budget: &ChainBudget,
) -> Result<f64, BudgetError> {
    if !(n >= 0.0 && n.is_finite()) {
        return Err(BudgetError::InvalidBitCount(n));
    }
    if !(0.0..=1.0).contains(&e_ph_upper) {
        return Err(BudgetError::OutOfRange(e_ph_upper));
    }
    let credit = if e_ph_upper > 0.5 {
        0.0
    } else {
        n * (1.0 - binary_entropy(e_ph_upper)?)
    };
    Ok(credit - chain_penalty_bits(budget))
}

/// Generic chain-rule composition over an explicit per-part ledger:
/// `sum(parts) - sum_i f_i` with
/// `f_1 = 2 log2(1/(eps - 2 eps_1 - eps_1'))` and
/// `f_i = 2 log2(1/(eps_{i-1}' - 2 eps_i - eps_i'))` for later links.
///
/// `links[i]` holds `(eps_{i+1}, eps_{i+1}')`; a chain over `k` parts has
/// `k - 1` links. Exposed for ledgers that do not use the uniform
/// assignment baked into [`ChainBudget`].
pub fn compose_partition_entropies(
    eps_total: LogEpsilon,
    parts: &[f64],
    links: &[(LogEpsilon, LogEpsilon)],
) -> Result<f64, BudgetError> {
    if parts.is_empty() {
        return Err(BudgetError::EmptyPartition);
    }
    if links.len() != parts.len() - 1 {
        return Err(BudgetError::LinkCountMismatch {
            parts: parts.len(),
            expected: parts.len() - 1,
            got: links.len(),
        });
    }
    let mut carried = plain(eps_total)?;
    let mut penalty = 0.0;
    for (i, (eps_i, eps_i_prime)) in links.iter().enumerate() {
        let denom = carried - 2.0 * plain(*eps_i)? - plain(*eps_i_prime)?;
        if denom <= 0.0 {
            return Err(BudgetError::LinkInfeasible {
                index: i + 1,
                constraint: format!(
                    "2*eps_{0} + eps_{0}' < {1:e} required",
                    i + 1,
                    carried
                ),
            });
        }
        penalty += 2.0 * -denom.log2();
        carried = plain(*eps_i_prime)?;
    }
    Ok(parts.iter().sum::<f64>() - penalty)
}
