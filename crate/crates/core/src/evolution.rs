//! Exact unitary evolution `exp(−iθM)` by eigendecomposition of the coupling
//! matrix on each invariant subspace touched by the state.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::{reachable_basis, Coupling, CouplingMatrix};
use crate::error::{CpcError, Result};
use crate::fock::{FockBasisVector, ModeRegistry, QuantumState};

/// Eigendecomposition `M = V Λ V†` of a Hermitian coupling matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    /// Eigenvalues ascending; each eigenvector's largest component is made
    /// real and positive so serialized results are reproducible.
    pub fn new(matrix: &DMatrix<Complex64>) -> Result<Self> {
        let d = matrix.nrows();
        if d != matrix.ncols() {
            return Err(CpcError::Numerical("coupling matrix is not square".into()));
        }
        if d == 0 {
            return Ok(SpectralDecomposition {
                eigenvalues: vec![],
                eigenvectors: DMatrix::zeros(0, 0),
            });
        }
        let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0)
            .ok_or_else(|| CpcError::Numerical(format!("eigensolver failed on {matrix}")))?;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let mut eigenvectors = DMatrix::<Complex64>::zeros(d, d);
        for (col, &k) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let pivot = v
                .iter()
                .copied()
                .max_by(|x, y| x.norm().total_cmp(&y.norm()))
                .unwrap_or_default();
            let fix = if pivot.norm() > 0.0 {
                pivot.conj() / pivot.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            eigenvectors.set_column(col, &(v * fix));
        }
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    /// Full propagator `V diag(e^{−iθλ}) V†`.
    pub fn propagator(&self, theta: f64) -> DMatrix<Complex64> {
        let phases = DMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues
                .iter()
                .map(|&l| Complex64::from_polar(1.0, -theta * l)),
        ));
        &self.eigenvectors * phases * self.eigenvectors.adjoint()
    }

    pub fn apply(&self, theta: f64, psi: &DVector<Complex64>) -> DVector<Complex64> {
        let mut coeffs = self.eigenvectors.adjoint() * psi;
        for (c, &l) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= Complex64::from_polar(1.0, -theta * l);
        }
        &self.eigenvectors * coeffs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub state: QuantumState,
    /// Γt in radians.
    pub theta: f64,
    /// Dimensions of the invariant subspaces that were propagated.
    pub subspace_dims: Vec<usize>,
}

/// Evolve `state` for the dimensionless angle `θ = Γt` under `coupling`.
pub fn evolve(state: &QuantumState, coupling: &Coupling, theta: f64) -> Result<EvolutionResult> {
    if !theta.is_finite() {
        return Err(CpcError::invalid("theta must be finite"));
    }
    let resolved = coupling.resolve(state.registry())?;
    let mut out: BTreeMap<FockBasisVector, Complex64> = BTreeMap::new();
    let mut dims = Vec::new();
    for basis in resolved.subspaces(state.support()) {
        dims.push(basis.len());
        if basis.len() == 1 {
            // Isolated vector: zero matrix, identity evolution.
            let v = &basis[0];
            out.insert(v.clone(), state.amplitude(v));
            continue;
        }
        let m = resolved.matrix(&basis)?;
        let spectral = SpectralDecomposition::new(&m)?;
        let psi = DVector::from_iterator(basis.len(), basis.iter().map(|v| state.amplitude(v)));
        let evolved = spectral.apply(theta, &psi);
        for (v, amp) in basis.into_iter().zip(evolved.iter()) {
            out.insert(v, *amp);
        }
    }
    Ok(EvolutionResult {
        state: state.with_amplitudes(out),
        theta,
        subspace_dims: dims,
    })
}

fn abc_registry() -> Arc<ModeRegistry> {
    Arc::new(ModeRegistry::new(["a", "b", "c"]).expect("static registry"))
}

/// `⟨n00|U(θ)|n00⟩` for the nondegenerate coupling, precomputed so it can be
/// evaluated at many angles.
#[derive(Debug, Clone)]
pub struct ReturnAmplitude {
    n: u32,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl ReturnAmplitude {
    pub fn new(n: u32) -> Result<Self> {
        let registry = abc_registry();
        let coupling = Coupling::nondegenerate("a", "b", "c")?;
        let seed = FockBasisVector::from_occupations(vec![n, 0, 0]);
        let basis = reachable_basis([&seed], &coupling, &registry)?;
        let matrix = CouplingMatrix::build(&coupling, basis, registry)?;
        let spectral = SpectralDecomposition::new(matrix.entries())?;
        // |n00⟩ is the first basis vector (largest n_a).
        let weights = spectral
            .eigenvectors()
            .row(0)
            .iter()
            .map(|z| z.norm_sqr())
            .collect();
        Ok(ReturnAmplitude {
            n,
            weights,
            eigenvalues: spectral.eigenvalues().to_vec(),
        })
    }

    pub fn photon_number(&self) -> u32 {
        self.n
    }

    /// Spectral weights `|⟨λ_j|n00⟩|²` paired with eigenvalues.
    pub fn spectrum(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.eigenvalues
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn at(&self, theta: f64) -> Complex64 {
        self.spectrum()
            .map(|(l, w)| Complex64::from_polar(w, -theta * l))
            .sum()
    }

    /// Survival probability `|⟨n00|U(θ)|n00⟩|²`.
    pub fn transmission(&self, theta: f64) -> f64 {
        self.at(theta).norm_sqr()
    }
}

/// One-off evaluation of `⟨n00|U(θ)|n00⟩`.
pub fn return_amplitude(n: u32, theta: f64) -> Result<Complex64> {
    Ok(ReturnAmplitude::new(n)?.at(theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub theta: f64,
    pub probability: f64,
}

/// `|⟨n00|U(θ)|n00⟩|²` on `samples` uniform points of `[0, theta_max]`,
/// endpoints included.
pub fn population_trace(n: u32, theta_max: f64, samples: usize) -> Result<Vec<TracePoint>> {
    if samples < 2 {
        return Err(CpcError::invalid(
            "population trace needs at least 2 samples",
        ));
    }
    if !theta_max.is_finite() || theta_max < 0.0 {
        return Err(CpcError::invalid(
            "theta_max must be finite and non-negative",
        ));
    }
    let amp = ReturnAmplitude::new(n)?;
    let step = theta_max / (samples - 1) as f64;
    Ok((0..samples)
        .map(|i| {
            let theta = if i == samples - 1 {
                theta_max
            } else {
                step * i as f64
            };
            TracePoint {
                theta,
                probability: amp.transmission(theta),
            }
        })
        .collect())
}
