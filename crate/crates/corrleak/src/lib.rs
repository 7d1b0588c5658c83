//! Finite-key security analysis and key-rate simulation for two-state
//! sending-or-not-sending QKD with correlated, leaky sources.
//!
//! Given a minimal source characterization — a correlation range `xi` and
//! lower bounds on the vacuum component of the emitted states — the library
//! reduces the device to an equivalent i.i.d. coherent source, bounds the
//! phase-error rate of the reduced protocol under coherent attacks, charges
//! the chain-rule penalties the correlation costs, and turns the result into
//! a provable secret-key length at a chosen total failure probability.
//!
//! Modules follow the pipeline:
//!
//! - [`bounds`]: log-domain failure probabilities, Chernoff bounds and the
//!   de Finetti factor.
//! - [`framework`]: the correlation-removing entropy budget.
//! - [`source`]: correlation-adjusted vacuum bounds and the equivalent
//!   intensity.
//! - [`channel`]: honest-channel expected statistics; [`montecarlo`] is its
//!   seeded photon-level cross-check.
//! - [`security`]: the assembled pipeline up to the key length.
//! - [`optimizer`]: grid-plus-refinement search over the free protocol
//!   parameters.
//!
//! ```
//! use corrleak::bounds::LogEpsilon;
//! use corrleak::channel::ChannelParams;
//! use corrleak::optimizer::{optimize_point, SearchSpace};
//! use corrleak::security::SecurityBudget;
//!
//! let channel = ChannelParams::symmetric(10.0, 1e-9, 0.01, 1e-3).unwrap();
//! let budget =
//!     SecurityBudget::default_allocation(LogEpsilon::from_probability(1e-10).unwrap()).unwrap();
//! let best = optimize_point(&channel, 1e12, 1, &budget, 1.16, &SearchSpace::default()).unwrap();
//! assert!(best.result.rate > 0.0);
//! ```
//!
//! With the default `parallel` feature, grid scans and Monte Carlo sampling
//! run on rayon; disabling it yields a fully sequential build with identical
//! results.

pub mod bounds;
pub mod channel;
pub mod framework;
pub mod montecarlo;
pub mod optimizer;
pub mod security;
pub mod source;

pub use bounds::{BoundsError, LogEpsilon};
pub use channel::{ChannelError, ChannelParams, EventClass, ExpectedCounts};
pub use framework::{BudgetError, ChainBudget};
pub use optimizer::{AxisRange, OptimizedPoint, OptimizerError, SearchSpace};
pub use security::{
    KeyRateResult, KeyStatus, PhaseCoefficients, ProtocolPoint, SecurityBudget, SecurityError,
    ZeroKeyReason,
};
pub use source::{EquivalentSource, SourceCharacterization, SourceError};

/// Any error the library can produce, for callers that drive the whole
/// pipeline.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Security(#[from] SecurityError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}
