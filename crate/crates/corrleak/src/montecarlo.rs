//! Seeded Monte Carlo cross-check of the closed-form channel model.
//!
//! Samples whole rounds at the photon level: settings are drawn per party,
//! the interference splits the arriving intensities into the two output
//! ports, each port draws a Poissonian photon number, and threshold
//! detectors (with independent dark counts) decide the click pattern. The
//! closed-form expectations in [`crate::channel`] must agree with these
//! tallies within statistical error; the simulation exists for validation,
//! the deterministic pipeline never samples.
//!
//! Sampling is chunked with one deterministically derived RNG stream per
//! chunk, so a tally depends only on `(inputs, samples, seed)`, not on the
//! number of worker threads.

use crate::channel::{setting_cases, ChannelError, ChannelParams, EventClass};
use crate::source::SourceCharacterization;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const CHUNK: u64 = 1 << 16;

/// Successful-round tallies by event class and round tag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct McTally {
    pub samples: u64,
    pub z_pe: u64,
    pub o_pe: u64,
    pub b_pe: u64,
    pub z_key: u64,
    pub o_key: u64,
    pub b_key: u64,
}

impl McTally {
    fn add(&mut self, other: &McTally) {
        self.samples += other.samples;
        self.z_pe += other.z_pe;
        self.o_pe += other.o_pe;
        self.b_pe += other.b_pe;
        self.z_key += other.z_key;
        self.o_key += other.o_key;
        self.b_key += other.b_key;
    }

    pub fn successes_key(&self) -> u64 {
        self.z_key + self.o_key + self.b_key
    }

    /// Observed QBER over successful key rounds; zero when there are none.
    pub fn e_bit(&self) -> f64 {
        let succ = self.successes_key();
        if succ == 0 {
            0.0
        } else {
            (self.o_key + self.b_key) as f64 / succ as f64
        }
    }
}

struct Case {
    cumulative: f64,
    class: EventClass,
    lambda_right: f64,
    lambda_left: f64,
    poisson_right: Option<Poisson<f64>>,
    poisson_left: Option<Poisson<f64>>,
}

fn build_cases(
    src_a: &SourceCharacterization,
    mu_a: f64,
    src_b: &SourceCharacterization,
    mu_b: f64,
    params: &ChannelParams,
) -> Vec<Case> {
    let visibility = 1.0 - 2.0 * params.misalignment();
    let mut cumulative = 0.0;
    setting_cases(src_a, mu_a, src_b, mu_b, params)
        .into_iter()
        .map(|(class, p_case, ia, ib)| {
            cumulative += p_case;
            let mean = 0.5 * (ia + ib);
            let cross = visibility * (ia * ib).sqrt();
            let lambda_right = (mean - cross).max(0.0);
            let lambda_left = mean + cross;
            let mk = |l: f64| (l > 0.0).then(|| Poisson::new(l).expect("positive lambda"));
            Case {
                cumulative,
                class,
                lambda_right,
                lambda_left,
                poisson_right: mk(lambda_right),
                poisson_left: mk(lambda_left),
            }
        })
        .collect()
}

fn run_chunk(cases: &[Case], params: &ChannelParams, p_pe: f64, rounds: u64, seed: u64) -> McTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dark = params.dark_rate();
    let mut tally = McTally {
        samples: rounds,
        ..McTally::default()
    };
    for _ in 0..rounds {
        let u: f64 = rng.random();
        let case = cases
            .iter()
            .find(|c| u < c.cumulative)
            .unwrap_or(cases.last().expect("nonempty cases"));
        // Every round carries a PE tag, successful or not.
        let is_pe = rng.random::<f64>() < p_pe;

        let photons_right = match &case.poisson_right {
            Some(p) => p.sample(&mut rng),
            None => {
                debug_assert_eq!(case.lambda_right, 0.0);
                0.0
            }
        };
        let photons_left = match &case.poisson_left {
            Some(p) => p.sample(&mut rng),
            None => {
                debug_assert_eq!(case.lambda_left, 0.0);
                0.0
            }
        };
        let click_right = photons_right > 0.0 || rng.random::<f64>() < dark;
        let click_left = photons_left > 0.0 || rng.random::<f64>() < dark;
        if !(click_right && !click_left) {
            continue;
        }
        match (case.class, is_pe) {
            (EventClass::Z, true) => tally.z_pe += 1,
            (EventClass::O, true) => tally.o_pe += 1,
            (EventClass::B, true) => tally.b_pe += 1,
            (EventClass::Z, false) => tally.z_key += 1,
            (EventClass::O, false) => tally.o_key += 1,
            (EventClass::B, false) => tally.b_key += 1,
        }
    }
    tally
}

/// Samples `samples` rounds of the photonic model, deterministically for a
/// given `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_channel(
    src_a: &SourceCharacterization,
    mu_a: f64,
    src_b: &SourceCharacterization,
    mu_b: f64,
    params: &ChannelParams,
    p_pe: f64,
    samples: u64,
    seed: u64,
) -> Result<McTally, ChannelError> {
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
    let cases = build_cases(src_a, mu_a, src_b, mu_b, params);
    let chunks = samples.div_ceil(CHUNK);
    let chunk_tally = |i: u64| {
        let rounds = CHUNK.min(samples - i * CHUNK);
        let chunk_seed = seed ^ (i.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        run_chunk(&cases, params, p_pe, rounds, chunk_seed)
    };

    #[cfg(feature = "parallel")]
    let tally = (0..chunks)
        .into_par_iter()
        .map(chunk_tally)
        .reduce(McTally::default, |mut acc, t| {
            acc.add(&t);
            acc
        });

    #[cfg(not(feature = "parallel"))]
    let tally = {
        let mut acc = McTally::default();
        for i in 0..chunks {
            acc.add(&chunk_tally(i));
        }
        acc
    };

    Ok(tally)
}
