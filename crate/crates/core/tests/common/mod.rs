#![allow(dead_code)]

use std::sync::Arc;

use cpc_core::fock::FockBasisVector;
use cpc_core::{Coupling, ModeRegistry, QuantumState};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

pub fn abc() -> Arc<ModeRegistry> {
    Arc::new(ModeRegistry::new(["a", "b", "c"]).unwrap())
}

/// Random superposition of up to four three-mode Fock vectors with
/// occupations ≤ `max_n`.
pub fn state(max_n: u32) -> impl Strategy<Value = QuantumState> {
    prop::collection::vec(
        (0..=max_n, 0..=max_n, 0..=max_n, -1.0..1.0f64, -1.0..1.0f64),
        1..5,
    )
    .prop_filter("non-zero norm", |terms| {
        terms.iter().map(|t| t.3 * t.3 + t.4 * t.4).sum::<f64>() > 1e-3
    })
    .prop_map(|terms| {
        let terms = terms.into_iter().map(|(a, b, c, re, im)| {
            (
                FockBasisVector::from_occupations(vec![a, b, c]),
                Complex64::new(re, im),
            )
        });
        QuantumState::from_terms(abc(), terms).unwrap()
    })
}

/// One of the three coupling shapes on `a, b, c` with a random pump phase.
pub fn coupling() -> impl Strategy<Value = Coupling> {
    (0..3usize, 0.0..std::f64::consts::TAU).prop_map(|(shape, phi)| {
        let c = match shape {
            0 => Coupling::nondegenerate("a", "b", "c"),
            1 => Coupling::degenerate("a", "b"),
            _ => Coupling::converter("a", "c"),
        };
        c.unwrap()
            .with_phase(Complex64::from_polar(1.0, phi))
            .unwrap()
    })
}

pub fn distance(x: &QuantumState, y: &QuantumState) -> f64 {
    let keys: std::collections::BTreeSet<_> =
        x.amplitudes().keys().chain(y.amplitudes().keys()).collect();
    keys.into_iter()
        .map(|k| (x.amplitude(k) - y.amplitude(k)).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(−iθM)` by scaling, a truncated Taylor series, and repeated squaring.
pub fn expm_oracle(m: &DMatrix<Complex64>, theta: f64) -> DMatrix<Complex64> {
    let n = m.nrows();
    let a = m.map(|z| z * Complex64::new(0.0, -theta));
    let mut squarings = 0;
    while one_norm(&a) / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let scaled = a.map(|z| z / 2f64.powi(squarings));
    let mut sum = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / Complex64::new(f64::from(k), 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
