//! Detection through a photon-doubling cascade.
//!
//! A photon entering a depth-`d` cascade is copied onto `n = 2^d` leaf
//! detectors; an event is a coincidence of at least `k` clicks. Each doubling
//! succeeds with probability `η_dbl`. On failure the branch photon is lost,
//! unless residual detection is enabled, in which case the undoubled photon
//! reaches one leaf detector of its subtree and is seen with probability `η`.
//! Every leaf also fires on its own with the dark-count probability.
//!
//! The analytics propagate click-count generating polynomials up the binary
//! tree, so they are exact for any mix of stages; no closed forms are used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CpcError, Result};

/// Name of the generator used by [`simulate_counts`], echoed in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), one stream per shard";

const SHARDS: u64 = 64;
const MAX_DEPTH: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Single-detector efficiency.
    pub eta: f64,
    /// Dark-count probability per detector per trial.
    pub dark_prob: f64,
}

impl DetectorModel {
    pub fn new(eta: f64, dark_prob: f64) -> Result<Self> {
        check_probability("eta", eta)?;
        check_probability("dark_prob", dark_prob)?;
        Ok(DetectorModel { eta, dark_prob })
    }

    /// Click probability of a detector that receives one photon.
    fn lit_click(&self) -> f64 {
        1.0 - (1.0 - self.eta) * (1.0 - self.dark_prob)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    /// Number of doubling stages; the cascade has `2^depth` leaves.
    pub depth: u32,
    /// Coincidence threshold.
    pub k: u32,
    pub eta_dbl: f64,
    pub detect_residual: bool,
}

impl CascadeSpec {
    pub fn new(depth: u32, k: u32, eta_dbl: f64, detect_residual: bool) -> Result<Self> {
        let spec = CascadeSpec {
            depth,
            k,
            eta_dbl,
            detect_residual,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn leaves(&self) -> u32 {
        1 << self.depth
    }

    fn validate(&self) -> Result<()> {
        if self.depth > MAX_DEPTH {
            return Err(CpcError::invalid(format!(
                "cascade depth {} exceeds {MAX_DEPTH}",
                self.depth
            )));
        }
        if self.k == 0 {
            return Err(CpcError::invalid(
                "coincidence threshold k must be at least 1",
            ));
        }
        if self.k > self.leaves() {
            return Err(CpcError::invalid(format!(
                "k = {} exceeds the {} cascade outputs",
                self.k,
                self.leaves()
            )));
        }
        check_probability("eta_dbl", self.eta_dbl)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CpcError::invalid(format!(
            "{name} = {p} is not a probability"
        )))
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_pow(base: &[f64], mut exp: u32) -> Vec<f64> {
    let mut result = vec![1.0];
    let mut square = base.to_vec();
    while exp > 0 {
        if exp & 1 == 1 {
            result = poly_mul(&result, &square);
        }
        exp >>= 1;
        if exp > 0 {
            square = poly_mul(&square, &square);
        }
    }
    result
}

fn tail(dist: &[f64], k: u32) -> f64 {
    dist.iter().skip(k as usize).sum()
}

/// `P(j clicks)` for `j = 0..=n` when one photon enters the cascade.
pub fn click_distribution(spec: &CascadeSpec, model: &DetectorModel) -> Result<Vec<f64>> {
    spec.validate()?;
    let lit = [1.0 - model.lit_click(), model.lit_click()];
    let dark = [1.0 - model.dark_prob, model.dark_prob];
    let mut g = lit.to_vec();
    for r in 1..=spec.depth {
        let leaves = 1u32 << r;
        let failed = if spec.detect_residual {
            poly_mul(&lit, &poly_pow(&dark, leaves - 1))
        } else {
            poly_pow(&dark, leaves)
        };
        let doubled = poly_mul(&g, &g);
        g = doubled
            .iter()
            .zip(&failed)
            .map(|(s, f)| spec.eta_dbl * s + (1.0 - spec.eta_dbl) * f)
            .collect();
    }
    Ok(g)
}

/// Probability that one incoming photon produces a `k`-fold coincidence.
pub fn effective_efficiency(spec: &CascadeSpec, model: &DetectorModel) -> Result<f64> {
    Ok(tail(&click_distribution(spec, model)?, spec.k))
}

/// Probability of a `k`-fold coincidence with no photon present,
/// `P(Binomial(n, dark) ≥ k)`.
pub fn dark_click_probability(spec: &CascadeSpec, model: &DetectorModel) -> Result<f64> {
    spec.validate()?;
    let dist = poly_pow(&[1.0 - model.dark_prob, model.dark_prob], spec.leaves());
    Ok(tail(&dist, spec.k))
}

/// Minimum doubling efficiency for a one-stage cascade (k = 1) to beat a bare
/// detector, `1/(2−η)`.
pub fn doubling_threshold(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(CpcError::invalid(format!(
            "threshold needs eta in (0, 1], got {eta}"
        )));
    }
    Ok(1.0 / (2.0 - eta))
}

/// One-stage, k = 1 efficiency when the undoubled photon is also detected:
/// `η_dbl·η(2−η) + (1−η_dbl)·η`.
pub fn residual_efficiency(eta: f64, eta_dbl: f64) -> Result<f64> {
    check_probability("eta", eta)?;
    check_probability("eta_dbl", eta_dbl)?;
    Ok(eta_dbl * eta * (2.0 - eta) + (1.0 - eta_dbl) * eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Number of pulses (the repetition rate for a one-second run).
    pub trials: u64,
    /// Probability that a pulse carries a photon.
    pub photon_prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub trials: u64,
    pub photon_prob: f64,
    pub seed: u64,
    pub rng: String,
    pub shards: u64,
    /// k-fold coincidences on pulses that carried a photon.
    pub signal_counts: u64,
    /// k-fold coincidences on empty pulses.
    pub noise_counts: u64,
    /// `signal/noise`; absent when no noise was counted.
    pub snr: Option<f64>,
    pub expected_signal: f64,
    pub expected_noise: f64,
    pub signal_sigma: f64,
    pub noise_sigma: f64,
}

impl CountReport {
    /// Deviation of the simulated counts from the analytic means, in σ.
    pub fn deviations(&self) -> (f64, f64) {
        let z = |obs: u64, mean: f64, sigma: f64| {
            if sigma > 0.0 {
                (obs as f64 - mean) / sigma
            } else if (obs as f64 - mean).abs() < 0.5 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        (
            z(self.signal_counts, self.expected_signal, self.signal_sigma),
            z(self.noise_counts, self.expected_noise, self.noise_sigma),
        )
    }
}

struct Sampler<'a> {
    spec: &'a CascadeSpec,
    lit: f64,
    dark: f64,
}

impl Sampler<'_> {
    fn dark_clicks(&self, rng: &mut ChaCha8Rng, detectors: u32) -> u32 {
        if self.dark == 0.0 {
            return 0;
        }
        (0..detectors)
            .filter(|_| rng.random::<f64>() < self.dark)
            .count() as u32
    }

    fn photon_clicks(&self, rng: &mut ChaCha8Rng, remaining: u32) -> u32 {
        if remaining == 0 {
            return u32::from(rng.random::<f64>() < self.lit);
        }
        if rng.random::<f64>() < self.spec.eta_dbl {
            return self.photon_clicks(rng, remaining - 1) + self.photon_clicks(rng, remaining - 1);
        }
        let leaves = 1u32 << remaining;
        if self.spec.detect_residual {
            u32::from(rng.random::<f64>() < self.lit) + self.dark_clicks(rng, leaves - 1)
        } else {
            self.dark_clicks(rng, leaves)
        }
    }
}

/// Seeded Monte Carlo of a counting experiment. Trials are split over a fixed
/// number of shards, each with its own ChaCha stream, so results do not
/// depend on the thread count.
pub fn simulate_counts(
    spec: &CascadeSpec,
    model: &DetectorModel,
    config: &SimulationConfig,
) -> Result<CountReport> {
    spec.validate()?;
    if config.trials == 0 {
        return Err(CpcError::invalid("need at least one trial"));
    }
    check_probability("photon_prob", config.photon_prob)?;
    let sampler = Sampler {
        spec,
        lit: model.lit_click(),
        dark: model.dark_prob,
    };
    let per_shard = config.trials / SHARDS;
    let extra = config.trials % SHARDS;
    let (signal, noise) = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(shard);
            let trials = per_shard + u64::from(shard < extra);
            let (mut s, mut n) = (0u64, 0u64);
            for _ in 0..trials {
                if rng.random::<f64>() < config.photon_prob {
                    if sampler.photon_clicks(&mut rng, spec.depth) >= spec.k {
                        s += 1;
                    }
                } else if sampler.dark_clicks(&mut rng, spec.leaves()) >= spec.k {
                    n += 1;
                }
            }
            (s, n)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let p_signal = config.photon_prob * effective_efficiency(spec, model)?;
    let p_noise = (1.0 - config.photon_prob) * dark_click_probability(spec, model)?;
    let t = config.trials as f64;
    Ok(CountReport {
        trials: config.trials,
        photon_prob: config.photon_prob,
        seed: config.seed,
        rng: RNG_ALGORITHM.to_string(),
        shards: SHARDS,
        signal_counts: signal,
        noise_counts: noise,
        snr: (noise > 0).then(|| signal as f64 / noise as f64),
        expected_signal: t * p_signal,
        expected_noise: t * p_noise,
        signal_sigma: (t * p_signal * (1.0 - p_signal)).sqrt(),
        noise_sigma: (t * p_noise * (1.0 - p_noise)).sqrt(),
    })
}
