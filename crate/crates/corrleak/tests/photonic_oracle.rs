//! The closed-form click probability against the photon-level simulation at
//! the reference asymmetric point (0.05, 0.02 mean photons at the node,
//! e_d = 0.01, p_d = 1e-9), 3 sigma at 1e7 samples.

use corrleak::channel::{success_probability, ChannelParams};
use corrleak::montecarlo::simulate_channel;
use corrleak::source::SourceCharacterization;

#[test]
fn success_probability_matches_photon_sampling() {
    let params = ChannelParams::symmetric(0.0, 1e-9, 0.01, 0.0).unwrap();
    // p_send ~ 1 pins the both-send case, whose arrival intensities are the
    // raw (mu_a, mu_b); with extinction 0 every other case is dark-only.
    let p_send = 0.999;
    let src = SourceCharacterization::new(0, 1.0, 0.9, p_send).unwrap();
    let samples = 10_000_000u64;
    let tally = simulate_channel(&src, 0.05, &src, 0.02, &params, 0.5, samples, 424_242).unwrap();

    let p_closed = success_probability(0.05, 0.02, &params).unwrap();
    let expected = samples as f64 * p_send * p_send * p_closed;
    let got = (tally.b_pe + tally.b_key) as f64;
    let sigma = expected.sqrt();
    assert!(
        (got - expected).abs() <= 3.0 * sigma,
        "B-case successes {got} vs closed form {expected:.1} +- {sigma:.1}"
    );
}
