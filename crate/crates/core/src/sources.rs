//! Source protocols built on repeated CPC interactions: the filtered
//! heralded single-photon source, Fock-state filtration via revival peaks,
//! and improved down-conversion compared against thermal SPDC statistics.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::Coupling;
use crate::error::{CpcError, Result};
use crate::evolution::{evolve, ReturnAmplitude};
use crate::fock::{
    poisson_pmf, ModeRegistry, QuantumState, TruncationPolicy, DEFAULT_TAIL_TOLERANCE,
};

fn abc() -> Arc<ModeRegistry> {
    Arc::new(ModeRegistry::new(["a", "b", "c"]).expect("static registry"))
}

fn nondegenerate() -> Coupling {
    Coupling::nondegenerate("a", "b", "c").expect("static coupling")
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedSourceConfig {
    /// Coherent amplitude of the input pulse in mode `a`.
    pub alpha: Complex64,
    /// One angle per filtering step.
    pub step_thetas: Vec<f64>,
    pub with_final_doubler: bool,
}

impl HeraldedSourceConfig {
    /// `n_steps` identical filtering steps at θ = π followed by a doubler.
    pub fn new(alpha: Complex64, n_steps: usize) -> Self {
        HeraldedSourceConfig {
            alpha,
            step_thetas: vec![PI; n_steps],
            with_final_doubler: true,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.step_thetas.iter_mut().for_each(|t| *t = theta);
        self
    }
}

/// Outcome of the heralded source pipeline.
///
/// `production_efficiency` is conditional on the filters passing: the
/// fraction of filtered pulses on which the doubler herald fires with exactly
/// one photon. `absolute_efficiency` is the same event per input pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub production_efficiency: f64,
    pub absolute_efficiency: f64,
    pub filter_pass_probability: f64,
    pub herald_probability: Option<f64>,
    /// Photon-number distribution of the delivered state. With the doubler
    /// this counts every photon left outside the herald mode.
    pub output_distribution: BTreeMap<u32, f64>,
    pub single_photon_fidelity: f64,
    pub higher_order_mass: f64,
    /// Σ_{n≥2} of the filtered mode-`a` distribution, before any doubling.
    pub higher_order_mass_before_herald: f64,
    pub steps: usize,
    /// Mode-`a` distribution after each filtering step (index 0 is the input).
    pub step_distributions: Vec<BTreeMap<u32, f64>>,
    pub truncation_discarded_mass: f64,
}

impl SourceReport {
    fn zero(steps: usize, step_distributions: Vec<BTreeMap<u32, f64>>, discarded: f64) -> Self {
        SourceReport {
            production_efficiency: 0.0,
            absolute_efficiency: 0.0,
            filter_pass_probability: 0.0,
            herald_probability: None,
            output_distribution: BTreeMap::new(),
            single_photon_fidelity: 0.0,
            higher_order_mass: 0.0,
            higher_order_mass_before_herald: 0.0,
            steps,
            step_distributions,
            truncation_discarded_mass: discarded,
        }
    }
}

fn higher_order<K: Copy + Into<u64>>(dist: &BTreeMap<K, f64>) -> f64 {
    dist.iter()
        .filter(|(&n, _)| n.into() >= 2)
        .map(|(_, p)| p)
        .sum()
}

/// Coherent pulse → repeated (evolve, reject dump-port photons) → optional
/// doubling with a one-photon herald in mode `b`.
pub fn heralded_source(config: &HeraldedSourceConfig) -> Result<SourceReport> {
    if config.step_thetas.is_empty() {
        return Err(CpcError::invalid(
            "heralded source needs at least one filtering step",
        ));
    }
    let coupling = nondegenerate();
    let mut state = QuantumState::coherent(abc(), "a", config.alpha, &TruncationPolicy::default())?;
    let discarded = state.discarded_mass();
    let steps = config.step_thetas.len();
    let mut step_distributions = vec![state.marginal_distribution("a")?];

    for &theta in &config.step_thetas {
        let evolved = evolve(&state, &coupling, theta)?.state;
        state = match evolved.project(&[("b", 0), ("c", 0)]) {
            Ok(s) => s,
            Err(CpcError::EmptyProjection) => {
                return Ok(SourceReport::zero(steps, step_distributions, discarded))
            }
            Err(e) => return Err(e),
        };
        step_distributions.push(state.marginal_distribution("a")?);
    }

    let pass = state.norm_weight();
    let filtered = step_distributions.last().cloned().unwrap_or_default();
    let higher_order_mass_before_herald = higher_order(&filtered);

    if !config.with_final_doubler {
        let p1 = filtered.get(&1).copied().unwrap_or(0.0);
        return Ok(SourceReport {
            production_efficiency: p1,
            absolute_efficiency: pass * p1,
            filter_pass_probability: pass,
            herald_probability: None,
            single_photon_fidelity: p1,
            higher_order_mass: higher_order_mass_before_herald,
            output_distribution: filtered,
            higher_order_mass_before_herald,
            steps,
            step_distributions,
            truncation_discarded_mass: discarded,
        });
    }

    let doubled = evolve(&state, &coupling, FRAC_PI_2)?.state;
    let herald = doubled.probability_of(&[("b", 1)])?;
    let heralded = match doubled.project(&[("b", 1)]) {
        Ok(s) => s,
        Err(CpcError::EmptyProjection) => {
            let mut report = SourceReport::zero(steps, step_distributions, discarded);
            report.filter_pass_probability = pass;
            report.herald_probability = Some(0.0);
            report.higher_order_mass_before_herald = higher_order_mass_before_herald;
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let output_distribution: BTreeMap<u32, f64> = heralded
        .total_number_distribution(&["a", "c"])?
        .into_iter()
        .map(|(n, p)| (n as u32, p))
        .collect();
    let p1 = output_distribution.get(&1).copied().unwrap_or(0.0);
    Ok(SourceReport {
        production_efficiency: herald,
        absolute_efficiency: pass * herald,
        filter_pass_probability: pass,
        herald_probability: Some(herald),
        single_photon_fidelity: p1,
        higher_order_mass: higher_order(&output_distribution),
        output_distribution,
        higher_order_mass_before_herald,
        steps,
        step_distributions,
        truncation_discarded_mass: discarded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalPeak {
    pub theta_over_pi: f64,
    pub transmission: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevivalScanConfig {
    pub theta_max_over_pi: f64,
    pub coarse_step_over_pi: f64,
    pub transmission_floor: f64,
}

impl RevivalScanConfig {
    pub fn new(theta_max_over_pi: f64) -> Self {
        RevivalScanConfig {
            theta_max_over_pi,
            coarse_step_over_pi: 1e-3,
            transmission_floor: 0.9,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.transmission_floor = floor;
        self
    }
}

/// Local maxima of `|⟨n00|U(θ)|n00⟩|²` above the floor, sorted by θ.
pub fn revival_scan(n: u32, config: &RevivalScanConfig) -> Result<Vec<RevivalPeak>> {
    if n == 0 {
        return Err(CpcError::invalid("revival scan needs n ≥ 1"));
    }
    let RevivalScanConfig {
        theta_max_over_pi,
        coarse_step_over_pi: step,
        transmission_floor,
    } = *config;
    if !(step.is_finite() && step > 0.0 && step <= 0.01) {
        return Err(CpcError::invalid("coarse step must lie in (0, 0.01]·π"));
    }
    if !theta_max_over_pi.is_finite() || theta_max_over_pi <= 0.0 {
        return Err(CpcError::invalid("theta_max must be positive and finite"));
    }
    let amp = ReturnAmplitude::new(n)?;
    let t = |x: f64| amp.transmission(x * PI);
    let points = (theta_max_over_pi / step).floor() as usize;
    let grid: Vec<f64> = (0..=points)
        .into_par_iter()
        .map(|k| t(k as f64 * step))
        .collect();

    let mut peaks: Vec<RevivalPeak> = Vec::new();
    for k in 1..points {
        let (l, c, r) = (grid[k - 1], grid[k], grid[k + 1]);
        if c >= l && c > r && c >= transmission_floor {
            let x = refine_peak(&t, k as f64 * step, step);
            let peak = RevivalPeak {
                theta_over_pi: x,
                transmission: t(x),
            };
            if peaks
                .last()
                .is_none_or(|p| (p.theta_over_pi - x).abs() > step / 2.0)
            {
                peaks.push(peak);
            }
        }
    }
    Ok(peaks)
}

/// Three-point parabolic refinement with a shrinking stencil.
fn refine_peak(f: &impl Fn(f64) -> f64, mut x: f64, mut h: f64) -> f64 {
    while h > 1e-11 {
        let (l, c, r) = (f(x - h), f(x), f(x + h));
        let curvature = l - 2.0 * c + r;
        if curvature < 0.0 {
            let dx = (0.5 * h * (l - r) / curvature).clamp(-h, h);
            if f(x + dx) >= c {
                x += dx;
            }
        } else if l > c || r > c {
            x += if l > r { -h } else { h };
            continue;
        }
        h /= 10.0;
    }
    x
}

/// Mode-`a` input for improved down-conversion.
#[derive(Debug, Clone, PartialEq)]
pub enum DcInput {
    Coherent(Complex64),
    /// Incoherent photon-number mixture `{n: P(n)}`.
    FockMixture(BTreeMap<u32, f64>),
}

impl DcInput {
    fn photon_numbers(&self) -> Result<BTreeMap<u32, f64>> {
        match self {
            DcInput::Coherent(alpha) => {
                let mean = alpha.norm_sqr();
                let mut out = BTreeMap::new();
                let mut kept = 0.0;
                for n in 0.. {
                    let p = poisson_pmf(mean, n);
                    kept += p;
                    out.insert(n, p);
                    if 1.0 - kept <= DEFAULT_TAIL_TOLERANCE {
                        break;
                    }
                    if n > 10_000 {
                        return Err(CpcError::Truncation {
                            cutoff: n,
                            tail: 1.0 - kept,
                            tolerance: DEFAULT_TAIL_TOLERANCE,
                        });
                    }
                }
                Ok(out)
            }
            DcInput::FockMixture(table) => {
                if table.values().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(CpcError::invalid(
                        "mixture probabilities must lie in [0, 1]",
                    ));
                }
                let total: f64 = table.values().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(CpcError::invalid(format!(
                        "mixture probabilities sum to {total}, not 1"
                    )));
                }
                Ok(table.clone())
            }
        }
    }
}

/// Thermal (SPDC) pair statistics `P(k) = (1−λ)λ^k` with the herald
/// probability `λ` matched to a CPC source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdcReference {
    pub lambda: f64,
    pub single_pair_probability: f64,
    pub total_emission_probability: f64,
    pub heralded_fidelity: f64,
}

impl SpdcReference {
    pub fn matched(emission: f64) -> Self {
        if emission <= 0.0 {
            return SpdcReference {
                lambda: 0.0,
                single_pair_probability: 0.0,
                total_emission_probability: 0.0,
                heralded_fidelity: 0.0,
            };
        }
        SpdcReference {
            lambda: emission,
            single_pair_probability: (1.0 - emission) * emission,
            total_emission_probability: emission,
            heralded_fidelity: 1.0 - emission,
        }
    }
}

/// Improved down-conversion after `m` full `|200⟩` oscillations.
///
/// The heralded state is the `(b, c)` output conditioned on a click in `b`;
/// its fidelity with the one-pair state is `P(one pair)/P(any pair)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcReport {
    pub m: u32,
    pub theta: f64,
    pub single_pair_probability: f64,
    /// Probability of exactly `|011⟩`, i.e. one pair and mode `a` emptied.
    pub exact_011_probability: f64,
    pub total_emission_probability: f64,
    pub heralded_fidelity: f64,
    pub spdc_reference: SpdcReference,
}

/// `θ = 2mπ/√6`, an integer number of `|200⟩` oscillations.
pub fn dc_theta(m: u32) -> f64 {
    2.0 * f64::from(m) * PI / 6f64.sqrt()
}

pub fn improved_dc(input: &DcInput, m: u32) -> Result<DcReport> {
    if m == 0 {
        return Err(CpcError::invalid("improved down-conversion needs m ≥ 1"));
    }
    let theta = dc_theta(m);
    let numbers = input.photon_numbers()?;
    let registry = abc();
    let coupling = nondegenerate();
    let mut single = 0.0;
    let mut exact = 0.0;
    let mut emission = 0.0;
    for (&n, &p) in &numbers {
        if n == 0 || p == 0.0 {
            continue;
        }
        let fock = QuantumState::fock(Arc::clone(&registry), &[("a", i64::from(n))])?;
        let out = evolve(&fock, &coupling, theta)?.state;
        let pairs = out.marginal_distribution("b")?;
        single += p * pairs.get(&1).copied().unwrap_or(0.0);
        emission += p * (1.0 - pairs.get(&0).copied().unwrap_or(0.0));
        if n == 1 {
            exact += p * out.probability_of(&[("a", 0), ("b", 1), ("c", 1)])?;
        }
    }
    let heralded_fidelity = if emission > 0.0 {
        single / emission
    } else {
        0.0
    };
    Ok(DcReport {
        m,
        theta,
        single_pair_probability: single,
        exact_011_probability: exact,
        total_emission_probability: emission,
        heralded_fidelity,
        spdc_reference: SpdcReference::matched(emission),
    })
}
