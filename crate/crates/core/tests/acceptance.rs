//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use cpc_core::calibration::{estimate_kappa, theta_at_power, ExperimentParams};
use cpc_core::circuits::{
    build_doubling_cascade, build_entanglement_circuit, cz_gate_matrix, entanglement_entropy,
    matrices_equal_up_to_phase, run, CascadeMethod, DualRailEncoding, EntanglementKind,
};
use cpc_core::coupling::{reachable_basis, CouplingMatrix};
use cpc_core::detectors::{
    click_distribution, dark_click_probability, doubling_threshold, effective_efficiency,
    residual_efficiency, simulate_counts, CascadeSpec, DetectorModel, SimulationConfig,
};
use cpc_core::evolution::{return_amplitude, SpectralDecomposition};
use cpc_core::fock::FockBasisVector;
use cpc_core::sources::{
    dc_theta, heralded_source, improved_dc, revival_scan, DcInput, HeraldedSourceConfig,
    RevivalScanConfig,
};
use cpc_core::{evolve, Coupling, QuantumState};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn single_excitation_oscillation() -> Verdict {
    let registry = common::abc();
    let coupling = Coupling::nondegenerate("a", "b", "c").unwrap();
    let input = QuantumState::fock(registry, &[("a", 1)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let theta = rng.random_range(0.0..100.0);
        let out = evolve(&input, &coupling, theta).unwrap().state;
        let p = out.probability_of(&[("a", 0), ("b", 1), ("c", 1)]).unwrap();
        worst = worst.max((p - theta.sin().powi(2)).abs());
    }
    Verdict::new(
        worst < 1e-10,
        format!("max |P(011) - sin^2(theta)| = {worst:.1e} over 100 angles (tol 1e-10)"),
    )
}

fn cz_gate() -> Verdict {
    let u = cz_gate_matrix(&DualRailEncoding::default(), PI).unwrap();
    let mut cz = DMatrix::identity(4, 4);
    cz[(3, 3)] = c(-1.0);
    let matrix_ok = matrices_equal_up_to_phase(&u, &cz, 1e-10);
    let plus = nalgebra::DVector::from_element(4, c(0.5));
    let out = &u * plus;
    let entropy = entanglement_entropy(&[out[0], out[1], out[2], out[3]]);
    Verdict::new(
        matrix_ok && (entropy - 1.0).abs() < 1e-10,
        format!("U(pi) = diag(1,1,1,-1) up to phase: {matrix_ok}; entropy of U|++> = {entropy:.12} bits (tol 1e-10)"),
    )
}

struct PeakTarget {
    n: u32,
    theta_over_pi: f64,
    tolerance: f64,
    min_transmission: f64,
}

fn revival_peaks() -> Verdict {
    let targets = [
        PeakTarget {
            n: 2,
            theta_over_pi: 2.0 / 6f64.sqrt(),
            tolerance: 1e-4,
            min_transmission: 1.0 - 1e-9,
        },
        PeakTarget {
            n: 3,
            theta_over_pi: 5.805,
            tolerance: 0.005,
            min_transmission: 0.9998,
        },
        PeakTarget {
            n: 4,
            theta_over_pi: 2.154,
            tolerance: 0.005,
            min_transmission: 0.9999,
        },
        PeakTarget {
            n: 5,
            theta_over_pi: 21.278,
            tolerance: 0.005,
            min_transmission: 0.990,
        },
        PeakTarget {
            n: 6,
            theta_over_pi: 11.100,
            tolerance: 0.005,
            min_transmission: 0.996,
        },
        PeakTarget {
            n: 7,
            theta_over_pi: 9.390,
            tolerance: 0.005,
            min_transmission: 0.986,
        },
        PeakTarget {
            n: 7,
            theta_over_pi: 68.972,
            tolerance: 0.005,
            min_transmission: 0.995,
        },
        PeakTarget {
            n: 8,
            theta_over_pi: 20.024,
            tolerance: 0.005,
            min_transmission: 0.93,
        },
    ];
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut scans = std::collections::BTreeMap::new();
    for t in &targets {
        let peaks = scans
            .entry(t.n)
            .or_insert_with(|| revival_scan(t.n, &RevivalScanConfig::new(70.0)).unwrap());
        let nearest = peaks
            .iter()
            .min_by(|x, y| {
                (x.theta_over_pi - t.theta_over_pi)
                    .abs()
                    .total_cmp(&(y.theta_over_pi - t.theta_over_pi).abs())
            })
            .copied();
        let ok = nearest.is_some_and(|p| {
            (p.theta_over_pi - t.theta_over_pi).abs() <= t.tolerance
                && p.transmission > t.min_transmission
        });
        if !ok {
            failures.push(match nearest {
                Some(p) => format!(
                    "|{}> target {:.3}: nearest peak {:.5} (T = {:.5})",
                    t.n, t.theta_over_pi, p.theta_over_pi, p.transmission
                ),
                None => format!("|{}> target {:.3}: no peak", t.n, t.theta_over_pi),
            });
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 60.0;
    let detail = if failures.is_empty() {
        format!("all 8 peaks found in {secs:.2} s")
    } else {
        format!("{}; scan took {secs:.2} s", failures.join("; "))
    };
    Verdict::new(pass, detail)
}

fn heralded_source_efficiency() -> Verdict {
    let r = heralded_source(&HeraldedSourceConfig::new(
        Complex64::new(1.5f64.sqrt(), 0.0),
        5,
    ))
    .unwrap();
    let pass = (r.production_efficiency - 0.56).abs() <= 0.06 && r.higher_order_mass < 0.01;
    Verdict::new(
        pass,
        format!(
            "conditional efficiency {:.4} (target 0.56 +- 0.06), absolute {:.4}, filter pass {:.4}, higher-order mass {:.4} (< 0.01), before herald {:.4}",
            r.production_efficiency,
            r.absolute_efficiency,
            r.filter_pass_probability,
            r.higher_order_mass,
            r.higher_order_mass_before_herald
        ),
    )
}

fn detector_thresholds() -> Verdict {
    let exact = doubling_threshold(0.5).unwrap() == 2.0 / 3.0;
    let mut crossover_ok = true;
    let mut residual_ok = true;
    for i in 1..=50 {
        let eta = f64::from(i) / 51.0;
        let threshold = 1.0 / (2.0 - eta);
        for j in 1..=50 {
            let eta_dbl = f64::from(j) / 51.0;
            let spec = CascadeSpec::new(1, 1, eta_dbl, false).unwrap();
            let e = effective_efficiency(&spec, &DetectorModel::new(eta, 0.0).unwrap()).unwrap();
            crossover_ok &= (e > eta) == (eta_dbl > threshold);
            residual_ok &= residual_efficiency(eta, eta_dbl).unwrap() > eta;
        }
    }
    Verdict::new(
        exact && crossover_ok && residual_ok,
        format!("threshold(0.5) == 2/3: {exact}; 50x50 crossover: {crossover_ok}; residual > eta on grid: {residual_ok}"),
    )
}

/// Click-count distribution by brute force: enumerate every doubling outcome
/// of the tree to find which leaves hold a photon, then sum over all 2^n
/// click patterns.
fn enumerated_efficiency(
    depth: u32,
    eta_dbl: f64,
    residual: bool,
    model: &DetectorModel,
) -> Vec<f64> {
    fn lit_sets(
        eta_dbl: f64,
        residual: bool,
        out: &mut Vec<(Vec<usize>, f64)>,
        prob: f64,
        lit: Vec<usize>,
        pending: &[(usize, usize)],
    ) {
        let Some((&(start, width), rest)) = pending.split_first() else {
            out.push((lit, prob));
            return;
        };
        if width == 1 {
            let mut l = lit;
            l.push(start);
            lit_sets(eta_dbl, residual, out, prob, l, rest);
            return;
        }
        let half = width / 2;
        let mut split = vec![(start, half), (start + half, half)];
        split.extend_from_slice(rest);
        if eta_dbl > 0.0 {
            lit_sets(eta_dbl, residual, out, prob * eta_dbl, lit.clone(), &split);
        }
        if eta_dbl < 1.0 {
            let mut l = lit;
            if residual {
                l.push(start);
            }
            lit_sets(eta_dbl, residual, out, prob * (1.0 - eta_dbl), l, rest);
        }
    }
    let n = 1usize << depth;
    let mut configs = Vec::new();
    lit_sets(eta_dbl, residual, &mut configs, 1.0, Vec::new(), &[(0, n)]);
    let lit_click = 1.0 - (1.0 - model.eta) * (1.0 - model.dark_prob);
    let mut by_count = vec![0.0; n + 1];
    for pattern in 0u32..(1 << n) {
        let mut p = 0.0;
        for (lit, weight) in &configs {
            let mut q = *weight;
            for leaf in 0..n {
                let click_p = if lit.contains(&leaf) {
                    lit_click
                } else {
                    model.dark_prob
                };
                q *= if pattern >> leaf & 1 == 1 {
                    click_p
                } else {
                    1.0 - click_p
                };
            }
            p += q;
        }
        by_count[pattern.count_ones() as usize] += p;
    }
    (1..=n).map(|k| by_count[k..].iter().sum()).collect()
}

fn figure_s4() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for (eta_dbl, residual, dark) in [
        (1.0, false, 0.0),
        (0.9, false, 0.0),
        (0.8, true, 0.0),
        (1.0, false, 1e-2),
        (0.85, true, 1e-2),
    ] {
        let mut previous = [0.0; 8];
        for i in 0..=20 {
            let eta = f64::from(i) / 20.0;
            let model = DetectorModel::new(eta, dark).unwrap();
            let oracle = enumerated_efficiency(3, eta_dbl, residual, &model);
            for k in 1..=8u32 {
                let spec = CascadeSpec::new(3, k, eta_dbl, residual).unwrap();
                let e = effective_efficiency(&spec, &model).unwrap();
                worst = worst.max((e - oracle[k as usize - 1]).abs());
                monotone &= e >= previous[k as usize - 1] - 1e-15;
                previous[k as usize - 1] = e;
            }
        }
    }
    let model = DetectorModel::new(1.0, 1e-2).unwrap();
    let config = SimulationConfig {
        trials: 1_000_000,
        photon_prob: 1e-2,
        seed: 7,
    };
    let mut snr = Vec::new();
    let mut within = true;
    for k in [1, 2] {
        let spec = CascadeSpec::new(3, k, 1.0, false).unwrap();
        let r = simulate_counts(&spec, &model, &config).unwrap();
        let (zs, zn) = r.deviations();
        within &= zs.abs() < 4.0 && zn.abs() < 4.0;
        snr.push(r.snr.unwrap_or(f64::INFINITY));
    }
    let analytic: Vec<f64> = [1, 2]
        .iter()
        .map(|&k| {
            let spec = CascadeSpec::new(3, k, 1.0, false).unwrap();
            0.01 * effective_efficiency(&spec, &model).unwrap()
                / (0.99 * dark_click_probability(&spec, &model).unwrap())
        })
        .collect();
    let pass = worst < 1e-12 && monotone && snr[0] < 1.0 && snr[1] > 1.0 && within;
    Verdict::new(
        pass,
        format!(
            "max |analytic - 2^8 enumeration| = {worst:.1e} (tol 1e-12), monotone in eta: {monotone}; MC SNR k=1 {:.3} (analytic {:.3}), k=2 {:.3} (analytic {:.3}), counts within 4 sigma: {within}",
            snr[0], analytic[0], snr[1], analytic[1]
        ),
    )
}

fn improved_down_conversion() -> Verdict {
    let registry = common::abc();
    let coupling = Coupling::nondegenerate("a", "b", "c").unwrap();
    let two = QuantumState::fock(registry, &[("a", 2)]).unwrap();
    let mut worst_survival: f64 = 0.0;
    for m in 1..=3 {
        let theta = dc_theta(m);
        let evolved = evolve(&two, &coupling, theta).unwrap().state;
        let p = evolved
            .probability_of(&[("a", 2), ("b", 0), ("c", 0)])
            .unwrap();
        worst_survival = worst_survival.max((p - 1.0).abs());
        worst_survival =
            worst_survival.max((return_amplitude(2, theta).unwrap().norm_sqr() - 1.0).abs());
    }
    let mut dominated = 0;
    let mut margin = f64::INFINITY;
    for m in 1..=3 {
        for j in 1..=100 {
            let mean = f64::from(j) / 100.0;
            let r = improved_dc(&DcInput::Coherent(Complex64::new(mean.sqrt(), 0.0)), m).unwrap();
            let gap = r.heralded_fidelity - r.spdc_reference.heralded_fidelity;
            margin = margin.min(gap);
            if gap < 0.0 {
                dominated += 1;
            }
        }
    }
    Verdict::new(
        worst_survival < 1e-10 && dominated == 0,
        format!("max |200> survival error {worst_survival:.1e} (tol 1e-10); CPC below SPDC at {dominated}/300 points, smallest margin {margin:.3e}"),
    )
}

fn calibration() -> Verdict {
    let params = ExperimentParams {
        pair_rate: 1.45,
        input_flux: 1.52e13,
        arm_transmissions: (0.026, 0.146),
        pump_power: 1000.0,
    };
    let kappa = estimate_kappa(&params).unwrap();
    let theta = theta_at_power(kappa, 1000.0).unwrap();
    Verdict::new(
        (kappa - 5.0e-6).abs() <= 0.5e-6 && (1e-4..=2e-4).contains(&theta),
        format!("kappa = {kappa:.4e} per sqrt(mW) (5.0e-6 +- 10%), theta at 1 W = {theta:.3e} (in [1e-4, 2e-4])"),
    )
}

fn cascades_and_sources() -> Verdict {
    let mut worst: f64 = 0.0;
    for method in [
        CascadeMethod::NondegenerateWithConversion,
        CascadeMethod::DegenerateInterferometer,
    ] {
        let cascade = build_doubling_cascade(3, method).unwrap();
        let r = run(&cascade.circuit, &cascade.single_photon_input().unwrap()).unwrap();
        worst = worst.max((r.success_probability - 1.0).abs());
        let out = r.final_state.unwrap();
        let pattern: Vec<(&str, u32)> = cascade
            .output_modes
            .iter()
            .map(|m| (m.as_str(), 1))
            .collect();
        worst = worst.max((out.probability_of(&pattern).unwrap() - 1.0).abs());
    }
    for kind in [
        EntanglementKind::balanced_bell(),
        EntanglementKind::balanced_ghz(),
    ] {
        let source = build_entanglement_circuit(kind).unwrap();
        let r = run(&source.circuit, &source.input_state).unwrap();
        worst = worst.max((r.success_probability - 1.0).abs());
        worst = worst.max(
            (r.final_state
                .unwrap()
                .fidelity(&source.target_state)
                .unwrap()
                - 1.0)
                .abs(),
        );
    }
    Verdict::new(
        worst < 1e-10,
        format!("depth-3 cascades (both methods) give 8 single photons, Bell and GHZ reach target; max deviation {worst:.1e} (tol 1e-10)"),
    )
}

fn randomized_properties() -> Verdict {
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    let mut results = Vec::new();

    let mut runner = TestRunner::new(config.clone());
    results.push((
        "unitarity",
        runner
            .run(
                &(common::state(3), common::coupling(), 0.0..100.0f64),
                |(psi, c, theta)| {
                    let out = evolve(&psi, &c, theta).unwrap().state;
                    if (out.norm_sqr() - 1.0).abs() < 1e-12 {
                        Ok(())
                    } else {
                        Err(TestCaseError::fail("norm drift"))
                    }
                },
            )
            .is_ok(),
    ));

    let mut runner = TestRunner::new(config.clone());
    results.push((
        "group law",
        runner
            .run(
                &(
                    common::state(3),
                    common::coupling(),
                    0.0..20.0f64,
                    0.0..20.0f64,
                ),
                |(psi, c, t1, t2)| {
                    let a = evolve(&evolve(&psi, &c, t1).unwrap().state, &c, t2)
                        .unwrap()
                        .state;
                    let b = evolve(&psi, &c, t1 + t2).unwrap().state;
                    if common::distance(&a, &b) < 1e-10 {
                        Ok(())
                    } else {
                        Err(TestCaseError::fail("composition mismatch"))
                    }
                },
            )
            .is_ok(),
    ));

    let mut runner = TestRunner::new(config.clone());
    results.push((
        "conservation",
        runner
            .run(&(common::state(3), 0.0..100.0f64), |(psi, theta)| {
                let c = Coupling::nondegenerate("a", "b", "c").unwrap();
                let out = evolve(&psi, &c, theta).unwrap().state;
                for (x, y) in [("a", "b"), ("a", "c")] {
                    let before = psi.mean_number(x).unwrap() + psi.mean_number(y).unwrap();
                    let after = out.mean_number(x).unwrap() + out.mean_number(y).unwrap();
                    if (before - after).abs() > 1e-10 {
                        return Err(TestCaseError::fail("number drift"));
                    }
                }
                Ok(())
            })
            .is_ok(),
    ));

    let mut runner = TestRunner::new(config);
    results.push((
        "matrix-exponential oracle",
        runner
            .run(
                &(common::coupling(), 0u32..6, 0u32..3, 0u32..3, 0.0..50.0f64),
                |(c, a, b, cc, theta)| {
                    let registry = common::abc();
                    let seed = FockBasisVector::from_occupations(vec![a, b, cc]);
                    let basis = reachable_basis([&seed], &c, &registry).unwrap();
                    if basis.len() > 6 {
                        return Ok(());
                    }
                    let m = CouplingMatrix::build(&c, basis, registry).unwrap();
                    let u = SpectralDecomposition::new(m.entries())
                        .unwrap()
                        .propagator(theta);
                    let err = (&u - common::expm_oracle(m.entries(), theta))
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0, f64::max);
                    if err < 1e-10 {
                        Ok(())
                    } else {
                        Err(TestCaseError::fail(format!("oracle error {err:e}")))
                    }
                },
            )
            .is_ok(),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mc_ok = true;
    for _ in 0..10 {
        let depth = rng.random_range(0..=3u32);
        let spec = CascadeSpec::new(
            depth,
            rng.random_range(1..=(1u32 << depth)),
            rng.random_range(0.5..=1.0),
            rng.random(),
        )
        .unwrap();
        let model =
            DetectorModel::new(rng.random_range(0.1..=1.0), rng.random_range(0.0..0.1)).unwrap();
        let dist = click_distribution(&spec, &model).unwrap();
        mc_ok &= (dist.iter().sum::<f64>() - 1.0).abs() < 1e-12;
        let config = SimulationConfig {
            trials: 1_000_000,
            photon_prob: rng.random_range(0.01..0.5),
            seed: rng.random(),
        };
        let (zs, zn) = simulate_counts(&spec, &model, &config)
            .unwrap()
            .deviations();
        mc_ok &= zs.abs() < 4.0 && zn.abs() < 4.0;
    }
    results.push(("Monte Carlo vs analytic", mc_ok));

    let pass = results.iter().all(|(_, ok)| *ok);
    let detail = results
        .iter()
        .map(|(name, ok)| format!("{name}: {}", if *ok { "ok" } else { "FAILED" }))
        .collect::<Vec<_>>()
        .join(", ");
    Verdict::new(
        pass,
        format!("{detail} (1000 cases each, 10 draws x 1e6 trials)"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "single-excitation oscillation",
            single_excitation_oscillation,
        ),
        ("CZ gate", cz_gate),
        ("revival peaks", revival_peaks),
        ("heralded source", heralded_source_efficiency),
        ("detector thresholds", detector_thresholds),
        ("detector cascade curves", figure_s4),
        ("improved down-conversion", improved_down_conversion),
        ("calibration", calibration),
        ("cascades and entanglement sources", cascades_and_sources),
        ("randomized properties", randomized_properties),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
