//! Random-restart dominance: the optimized rate must beat any in-range
//! parameter draw.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use corrleak::bounds::LogEpsilon;
use corrleak::channel::ChannelParams;
use corrleak::optimizer::{optimize_point, SearchSpace};
use corrleak::security::{evaluate_symmetric, ProtocolPoint, SecurityBudget};

#[test]
fn optimized_rate_dominates_100_random_draws() {
    let channel = ChannelParams::symmetric(20.0, 1e-9, 0.01, 1e-3).unwrap();
    let budget =
        SecurityBudget::default_allocation(LogEpsilon::from_probability(1e-10).unwrap()).unwrap();
    let space = SearchSpace::default();

    let best = optimize_point(&channel, 1e12, 0, &budget, 1.16, &space).unwrap();
    assert!(best.result.rate > 0.0, "reference point must be feasible");

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let log_draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        (rng.random_range(lo.ln()..hi.ln())).exp()
    };
    for _ in 0..100 {
        let point = ProtocolPoint {
            p_send: log_draw(&mut rng, space.p_send.lo, space.p_send.hi),
            mu_max: log_draw(&mut rng, space.mu_max.lo, space.mu_max.hi),
            p_pe: rng.random_range(space.p_pe.lo..space.p_pe.hi),
        };
        let drawn = evaluate_symmetric(&channel, 1e12, 0, &budget, 1.16, &point).unwrap();
        assert!(
            best.result.rate >= drawn.rate,
            "random draw {point:?} beats the optimizer: {} > {}",
            drawn.rate,
            best.result.rate
        );
    }
}
