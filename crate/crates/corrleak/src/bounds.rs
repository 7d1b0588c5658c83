//! Log-domain failure probabilities, Chernoff-style concentration bounds and
//! the de Finetti dimension factor.
//!
//! Every failure probability in the estimation chain is carried as
//! `log2(1/eps)` ([`LogEpsilon`]). Exponents compose additively under
//! products and scale under powers, so quantities far below the `f64`
//! underflow threshold (exponents of tens of thousands of bits) stay exact
//! enough to feed the concentration bounds, which only ever consume
//! `ln(1/eps)`.

use thiserror::Error;

/// Largest exponent (in bits) for which `2^-log2_inv` is still comfortably
/// above the `f64` underflow threshold. Callers that need a plain probability
/// must stay below this.
pub const MAX_PLAIN_EXPONENT_BITS: f64 = 900.0;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("count must be nonnegative and finite, got {0}")]
    InvalidCount(f64),
    #[error("probability must satisfy 0 < p <= 1, got {0}")]
    InvalidProbability(f64),
    #[error("log2(1/eps) must be nonnegative and finite, got {0}")]
    InvalidExponent(f64),
    #[error("eps = 1 makes a one-sided concentration bound meaningless")]
    EpsilonIsOne,
    #[error("de Finetti factor requires N >= 1 and x >= 2, got N = {n}, x = {x}")]
    InvalidDefinettiArgs { n: u64, x: u32 },
}

/// A failure probability `eps` in `(0, 1]`, stored as `log2(1/eps)`.
///
/// Values such as `eps_1 ~ 10^-14000` arising at large correlation ranges are
/// only representable this way; they are constructed from an exponent with
/// [`LogEpsilon::from_log2_inv`] and never materialized as plain numbers.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogEpsilon {
    log2_inv: f64,
}

impl LogEpsilon {
    /// `eps = 1`, the neutral element (`log2(1/eps) = 0`).
    pub const ONE: LogEpsilon = LogEpsilon { log2_inv: 0.0 };

    /// Builds from a plain probability `0 < p <= 1`.
    pub fn from_probability(p: f64) -> Result<Self, BoundsError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(BoundsError::InvalidProbability(p));
        }
        Ok(Self { log2_inv: -p.log2() })
    }

    /// Builds directly from an exponent `log2(1/eps) >= 0`. This is the only
    /// constructor able to express probabilities below the `f64` underflow
    /// threshold.
    pub fn from_log2_inv(log2_inv: f64) -> Result<Self, BoundsError> {
        if !(log2_inv >= 0.0 && log2_inv.is_finite()) {
            return Err(BoundsError::InvalidExponent(log2_inv));
        }
        Ok(Self { log2_inv })
    }

    /// The stored exponent `log2(1/eps)`.
    pub fn log2_inv(self) -> f64 {
        self.log2_inv
    }

    /// `ln(1/eps)`, the quantity the Chernoff bounds consume. Taken from the
    /// exponent representation, never by exponentiating `eps`.
    pub fn ln_inv(self) -> f64 {
        self.log2_inv * std::f64::consts::LN_2
    }

    /// The plain probability `2^-log2_inv`. Underflows to zero once the
    /// exponent exceeds roughly 1074 bits; use only on quantities known to be
    /// above [`MAX_PLAIN_EXPONENT_BITS`].
    pub fn probability(self) -> f64 {
        (-self.log2_inv).exp2()
    }

    /// True when `eps = 1`.
    pub fn is_one(self) -> bool {
        self.log2_inv == 0.0
    }

    /// `eps^k` for `k >= 0`: powers scale the exponent.
    pub fn pow(self, k: f64) -> Self {
        assert!(k >= 0.0 && k.is_finite(), "power must be nonnegative");
        Self {
            log2_inv: self.log2_inv * k,
        }
    }

    /// `eps / k` for `k >= 1`, used to split a budget into equal shares.
    pub fn divided_by(self, k: f64) -> Self {
        assert!(k >= 1.0 && k.is_finite(), "divisor must be >= 1");
        Self {
            log2_inv: self.log2_inv + k.log2(),
        }
    }
}

/// Product of probabilities: exponents add.
impl std::ops::Mul for LogEpsilon {
    type Output = LogEpsilon;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: LogEpsilon) -> LogEpsilon {
        LogEpsilon {
            log2_inv: self.log2_inv + rhs.log2_inv,
        }
    }
}

fn check_count(x: f64) -> Result<(), BoundsError> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(BoundsError::InvalidCount(x));
    }
    Ok(())
}

fn check_eps_below_one(eps: LogEpsilon) -> Result<f64, BoundsError> {
    if eps.is_one() {
        return Err(BoundsError::EpsilonIsOne);
    }
    Ok(eps.ln_inv())
}

/// Upper bound on an expectation from an observed count:
/// `X + ln(1/eps) + sqrt(ln^2(1/eps) + 2 X ln(1/eps))`.
///
/// Real-valued counts are accepted; the pipeline feeds expected values into
/// the same bound. Monotone nondecreasing in both `x` and `eps.log2_inv()`.
pub fn cher_upper_expectation(x: f64, eps: LogEpsilon) -> Result<f64, BoundsError> {
    check_count(x)?;
    let l = check_eps_below_one(eps)?;
    Ok(x + l + (l * l + 2.0 * x * l).sqrt())
}

/// Lower bound on an expectation from an observed count:
/// `X + ln(1/eps)/2 - sqrt(ln^2(1/eps) + 8 X ln(1/eps))/2`, clamped at zero
/// (a count expectation cannot be negative).
pub fn cher_lower_expectation(x: f64, eps: LogEpsilon) -> Result<f64, BoundsError> {
    check_count(x)?;
    let l = check_eps_below_one(eps)?;
    Ok((x + 0.5 * l - 0.5 * (l * l + 8.0 * x * l).sqrt()).max(0.0))
}

/// Upper bound on an observation from its expectation:
/// `E + ln(1/eps)/2 + sqrt(ln^2(1/eps) + 8 E ln(1/eps))/2`.
pub fn cher_upper_observation(e: f64, eps: LogEpsilon) -> Result<f64, BoundsError> {
    check_count(e)?;
    let l = check_eps_below_one(eps)?;
    Ok(e + 0.5 * l + 0.5 * (l * l + 8.0 * e * l).sqrt())
}

/// Lower bound on an observation from its expectation:
/// `E - sqrt(2 E ln(1/eps))`, clamped at zero.
pub fn cher_lower_observation(e: f64, eps: LogEpsilon) -> Result<f64, BoundsError> {
    check_count(e)?;
    let l = eps.ln_inv();
    Ok((e - (2.0 * e * l).sqrt()).max(0.0))
}

/// `ln g_{N,x}` with `g_{N,x} = C(N + x - 1, N)`, the combinatorial factor of
/// the de Finetti reduction with fixed marginal.
///
/// Mathematically this is `ln Gamma(N+x) - ln Gamma(N+1) - ln Gamma(x)`, but
/// subtracting two log-gamma values of magnitude ~`N ln N` loses most digits
/// once `N` is large, so the difference is accumulated as a log-domain
/// product over the shorter side of the binomial whenever that side is small
/// enough; the symmetric Stirling route covers the remaining (both-huge)
/// corner. Satisfies `ln g <= (x-1) ln(e (N+x-1)/(x-1))`.
pub fn ln_definetti_factor(n: u64, x: u32) -> Result<f64, BoundsError> {
    if n < 1 || x < 2 {
        return Err(BoundsError::InvalidDefinettiArgs { n, x });
    }
    // C(N+x-1, N) = C(N+x-1, m) with m the shorter side.
    let m = (x as u64 - 1).min(n);
    const SUM_LIMIT: u64 = 1 << 22;
    if m <= SUM_LIMIT {
        let other = n + x as u64 - 1 - m;
        let mut acc = 0.0;
        for k in 1..=m {
            acc += ((other + k) as f64).ln() - (k as f64).ln();
        }
        Ok(acc)
    } else {
        // All three arguments exceed 2^22 here, deep inside Stirling territory.
        let (nf, xf) = (n as f64, x as f64);
        Ok(ln_gamma_stirling(nf + xf) - ln_gamma_stirling(nf + 1.0) - ln_gamma_stirling(xf))
    }
}

/// Upper bound `(x-1) ln(e (N+x-1)/(x-1))` on [`ln_definetti_factor`].
pub fn ln_definetti_upper_bound(n: u64, x: u32) -> f64 {
    let xm1 = (x - 1) as f64;
    xm1 * (1.0 + ((n as f64 + xm1) / xm1).ln())
}

// Stirling series with Bernoulli terms through B_8; relative error is far
// below f64 resolution for the z > 2^22 arguments it is used on.
fn ln_gamma_stirling(z: f64) -> f64 {
    const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    let series = zi
        * (1.0 / 12.0 + zi2 * (-1.0 / 360.0 + zi2 * (1.0 / 1260.0 + zi2 * (-1.0 / 1680.0))));
    (z - 0.5) * z.ln() - z + HALF_LN_TWO_PI + series
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eps_ln(ln_inv: f64) -> LogEpsilon {
        LogEpsilon::from_log2_inv(ln_inv / std::f64::consts::LN_2).unwrap()
    }

    fn eps_p(p: f64) -> LogEpsilon {
        LogEpsilon::from_probability(p).unwrap()
    }

    #[test]
    fn log_epsilon_construction() {
        assert_eq!(LogEpsilon::from_probability(1.0).unwrap().log2_inv(), 0.0);
        assert!(LogEpsilon::from_probability(0.0).is_err());
        assert!(LogEpsilon::from_probability(1.5).is_err());
        assert!(LogEpsilon::from_probability(-0.1).is_err());
        assert!(LogEpsilon::from_log2_inv(-1.0).is_err());
        assert!(LogEpsilon::from_log2_inv(f64::NAN).is_err());
        // 10^-14000-scale values exist only through the exponent route.
        let tiny = LogEpsilon::from_log2_inv(46_500.0).unwrap();
        assert!(tiny.ln_inv().is_finite());
        assert_eq!(tiny.probability(), 0.0); // underflow, by design
    }

    #[test]
    fn log_epsilon_arithmetic() {
        let a = eps_p(1e-3);
        let b = eps_p(1e-5);
        assert_relative_eq!((a * b).log2_inv(), eps_p(1e-8).log2_inv(), max_relative = 1e-14);
        assert_relative_eq!(a.pow(2.0).log2_inv(), eps_p(1e-6).log2_inv(), max_relative = 1e-14);
        assert_relative_eq!(
            a.divided_by(5.0).log2_inv(),
            eps_p(2e-4).log2_inv(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn cher_upper_expectation_examples() {
        // X = 0, eps = e^-1 collapses to 2 ln(1/eps) = 2.
        assert_eq!(cher_upper_expectation(0.0, eps_ln(1.0)).unwrap(), 2.0);
        // Frozen high-precision evaluation of the closed form.
        assert_relative_eq!(
            cher_upper_expectation(100.0, eps_p(1e-10)).unwrap(),
            194.6872770742472,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cher_lower_expectation_examples() {
        // The two half-terms cancel at X = 0.
        assert_eq!(cher_lower_expectation(0.0, eps_p(1e-7)).unwrap(), 0.0);
        assert_relative_eq!(
            cher_lower_expectation(1e6, eps_p(1e-10)).unwrap(),
            993225.3627350158,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cher_upper_observation_examples() {
        assert_eq!(cher_upper_observation(0.0, eps_ln(2.0)).unwrap(), 2.0);
        assert_relative_eq!(
            cher_upper_observation(5e4, eps_p(1e-10)).unwrap(),
            51528.9837292852,
            max_relative = 1e-12
        );
        // eps -> 1 limit: the bound at E = 0 decreases monotonically to 0.
        let mut prev = f64::INFINITY;
        for log2_inv in [8.0, 4.0, 2.0, 1.0, 0.25, 1e-3, 1e-9] {
            let b = cher_upper_observation(0.0, LogEpsilon::from_log2_inv(log2_inv).unwrap())
                .unwrap();
            assert!(b < prev && b >= 0.0);
            prev = b;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn cher_lower_observation_examples() {
        assert_eq!(cher_lower_observation(0.0, eps_p(0.3)).unwrap(), 0.0);
        assert_eq!(cher_lower_observation(100.0, eps_ln(2.0)).unwrap(), 80.0);
        // eps = 1 is harmless here: the gap vanishes.
        assert_eq!(cher_lower_observation(42.0, LogEpsilon::ONE).unwrap(), 42.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let e = eps_p(1e-3);
        assert_eq!(
            cher_upper_expectation(-1.0, e),
            Err(BoundsError::InvalidCount(-1.0))
        );
        assert_eq!(
            cher_upper_expectation(1.0, LogEpsilon::ONE),
            Err(BoundsError::EpsilonIsOne)
        );
        assert_eq!(
            cher_lower_expectation(1.0, LogEpsilon::ONE),
            Err(BoundsError::EpsilonIsOne)
        );
        assert_eq!(
            cher_upper_observation(1.0, LogEpsilon::ONE),
            Err(BoundsError::EpsilonIsOne)
        );
        assert_eq!(
            cher_lower_observation(-2.0, e),
            Err(BoundsError::InvalidCount(-2.0))
        );
    }

    #[test]
    fn definetti_small_cases() {
        assert_relative_eq!(
            ln_definetti_factor(1, 2).unwrap(),
            2.0_f64.ln(),
            max_relative = 1e-14
        );
        // C(5, 3) = 10
        assert_relative_eq!(
            ln_definetti_factor(3, 3).unwrap(),
            10.0_f64.ln(),
            max_relative = 1e-14
        );
        assert!(ln_definetti_factor(0, 2).is_err());
        assert!(ln_definetti_factor(1, 1).is_err());
    }

    #[test]
    fn definetti_large_n_respects_printed_bound() {
        let n = 1_000_000_000_000_000u64; // 10^15
        let v = ln_definetti_factor(n, 256).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(v <= ln_definetti_upper_bound(n, 256));
    }

    #[test]
    fn definetti_matches_lgamma_identity_where_stable() {
        // ln g(1e6, 8) frozen from a 60-digit evaluation of
        // lnGamma(N+x) - lnGamma(N+1) - lnGamma(x).
        assert_relative_eq!(
            ln_definetti_factor(1_000_000, 8).unwrap(),
            88.1834405446145,
            max_relative = 1e-12
        );
    }

    #[test]
    fn bounds_stay_finite_at_extreme_exponents() {
        let eps = LogEpsilon::from_log2_inv(1e6).unwrap();
        for f in [
            cher_upper_expectation,
            cher_lower_expectation,
            cher_upper_observation,
            cher_lower_observation,
        ] {
            let v = f(2e15, eps).unwrap();
            assert!(v.is_finite() && v >= 0.0);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // upper >= statistic >= lower, after clamping.
            #[test]
            fn bracketing(x in 0.0..1e12f64, log2_inv in 1e-6..1e6f64) {
                let eps = LogEpsilon::from_log2_inv(log2_inv).unwrap();
                prop_assert!(cher_upper_expectation(x, eps).unwrap() >= x);
                prop_assert!(cher_lower_expectation(x, eps).unwrap() <= x);
                prop_assert!(cher_upper_observation(x, eps).unwrap() >= x);
                prop_assert!(cher_lower_observation(x, eps).unwrap() <= x);
                prop_assert!(cher_lower_expectation(x, eps).unwrap() >= 0.0);
                prop_assert!(cher_lower_observation(x, eps).unwrap() >= 0.0);
            }

            // A smaller eps (larger exponent) never shrinks the one-sided gap.
            #[test]
            fn width_monotonicity(
                x in 0.0..1e12f64,
                log2_inv in 1e-6..1e5f64,
                grow in 1.0..100.0f64,
            ) {
                let e1 = LogEpsilon::from_log2_inv(log2_inv).unwrap();
                let e2 = LogEpsilon::from_log2_inv(log2_inv * grow).unwrap();
                let gap = |b: f64| (b - x).abs();
                prop_assert!(
                    gap(cher_upper_expectation(x, e2).unwrap())
                        >= gap(cher_upper_expectation(x, e1).unwrap()) - 1e-9
                );
                prop_assert!(
                    gap(cher_lower_expectation(x, e2).unwrap())
                        >= gap(cher_lower_expectation(x, e1).unwrap()) - 1e-9
                );
                prop_assert!(
                    gap(cher_upper_observation(x, e2).unwrap())
                        >= gap(cher_upper_observation(x, e1).unwrap()) - 1e-9
                );
                prop_assert!(
                    gap(cher_lower_observation(x, e2).unwrap())
                        >= gap(cher_lower_observation(x, e1).unwrap()) - 1e-9
                );
            }

            #[test]
            fn upper_expectation_monotone_in_x(
                x in 0.0..1e9f64,
                dx in 0.0..1e9f64,
                log2_inv in 1e-3..1e4f64,
            ) {
                let eps = LogEpsilon::from_log2_inv(log2_inv).unwrap();
                prop_assert!(
                    cher_upper_expectation(x + dx, eps).unwrap()
                        >= cher_upper_expectation(x, eps).unwrap()
                );
            }
        }
    }
}
