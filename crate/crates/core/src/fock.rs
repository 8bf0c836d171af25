//! Multimode bosonic Fock states.
//!
//! A [`QuantumState`] is a sparse map from occupation-number vectors to
//! complex amplitudes over a fixed [`ModeRegistry`]. Pumped CPC dynamics keep
//! the support inside tiny invariant subspaces, so nothing here ever builds a
//! dense tensor over the full truncated Hilbert space.
//!
//! Besides the pure amplitudes every state carries `norm_weight`, the
//! probability that survived all projections applied so far. Post-selected
//! protocols read their success probability straight off it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CpcError, Result};

/// Amplitudes smaller than this are dropped after every operation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Default bound on the probability mass a truncated state may discard.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

const MAX_COHERENT_CUTOFF: u32 = 10_000;

/// A named bosonic mode. The frequency is bookkeeping only; dynamics are
/// dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeInfo {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_frequency: Option<f64>,
}

impl ModeInfo {
    pub fn new(name: impl Into<String>) -> Self {
        ModeInfo {
            name: name.into(),
            angular_frequency: None,
        }
    }

    pub fn with_frequency(name: impl Into<String>, omega: f64) -> Self {
        ModeInfo {
            name: name.into(),
            angular_frequency: Some(omega),
        }
    }
}

/// Ordered set of modes with unique names. Basis vectors index into it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeRegistry {
    modes: Vec<ModeInfo>,
}

impl ModeRegistry {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_modes(names.into_iter().map(ModeInfo::new).collect())
    }

    pub fn from_modes(modes: Vec<ModeInfo>) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            if m.name.is_empty() {
                return Err(CpcError::invalid("mode names must be non-empty"));
            }
            if modes[..i].iter().any(|other| other.name == m.name) {
                return Err(CpcError::invalid(format!("duplicate mode `{}`", m.name)));
            }
        }
        Ok(ModeRegistry { modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeInfo] {
        &self.modes
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.modes.iter().map(|m| m.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.modes.iter().any(|m| m.name == name)
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| CpcError::UnknownMode(name.to_string()))
    }

    pub fn name(&self, index: usize) -> &str {
        &self.modes[index].name
    }

    /// True when both registries list the same names in the same order.
    pub fn same_layout(&self, other: &ModeRegistry) -> bool {
        self.modes.len() == other.modes.len()
            && self
                .modes
                .iter()
                .zip(&other.modes)
                .all(|(a, b)| a.name == b.name)
    }
}

/// Occupation numbers indexed by position in a [`ModeRegistry`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockBasisVector(Vec<u32>);

impl FockBasisVector {
    pub fn vacuum(num_modes: usize) -> Self {
        FockBasisVector(vec![0; num_modes])
    }

    pub fn from_occupations(occupations: Vec<u32>) -> Self {
        FockBasisVector(occupations)
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn occupation(&self, mode: usize) -> u32 {
        self.0[mode]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&n| u64::from(n)).sum()
    }

    pub fn with(&self, mode: usize, n: u32) -> Self {
        let mut v = self.0.clone();
        v[mode] = n;
        FockBasisVector(v)
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [u32] {
        &mut self.0
    }

    /// `|n_a n_b ...⟩` rendering used in logs and error messages.
    pub fn ket(&self) -> String {
        let digits_only = self.0.iter().all(|&n| n < 10);
        let inner: Vec<String> = self.0.iter().map(u32::to_string).collect();
        if digits_only {
            format!("|{}⟩", inner.concat())
        } else {
            format!("|{}⟩", inner.join(","))
        }
    }
}

/// How the coherent-state constructor chooses its photon-number cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationPolicy {
    /// Explicit cutoffs (largest kept photon number) per mode name.
    pub per_mode_cutoff: BTreeMap<String, u32>,
    pub tail_tolerance: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            per_mode_cutoff: BTreeMap::new(),
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

impl TruncationPolicy {
    pub fn with_cutoff(mut self, mode: impl Into<String>, cutoff: u32) -> Self {
        self.per_mode_cutoff.insert(mode.into(), cutoff);
        self
    }
}

/// Normalized pure state over a mode registry, plus the probability mass that
/// survived projections (`norm_weight`) and any mass discarded by truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    registry: Arc<ModeRegistry>,
    amplitudes: BTreeMap<FockBasisVector, Complex64>,
    norm_weight: f64,
    discarded_mass: f64,
}

impl QuantumState {
    pub fn vacuum(registry: Arc<ModeRegistry>) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(
            FockBasisVector::vacuum(registry.len()),
            Complex64::new(1.0, 0.0),
        );
        QuantumState {
            registry,
            amplitudes,
            norm_weight: 1.0,
            discarded_mass: 0.0,
        }
    }

    /// Single Fock basis state. Modes not listed are empty.
    pub fn fock(registry: Arc<ModeRegistry>, occupations: &[(&str, i64)]) -> Result<Self> {
        let basis = basis_vector(&registry, occupations)?;
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(basis, Complex64::new(1.0, 0.0));
        Ok(QuantumState {
            registry,
            amplitudes,
            norm_weight: 1.0,
            discarded_mass: 0.0,
        })
    }

    /// Coherent state `|α⟩` in `mode`, every other mode in vacuum.
    ///
    /// Amplitudes follow `α^n/√n!` up to the cutoff and are renormalized; the
    /// Poisson mass beyond the cutoff is reported by [`discarded_mass`]. Without
    /// an explicit cutoff the smallest one meeting `tail_tolerance` is used.
    ///
    /// [`discarded_mass`]: QuantumState::discarded_mass
    pub fn coherent(
        registry: Arc<ModeRegistry>,
        mode: &str,
        alpha: Complex64,
        policy: &TruncationPolicy,
    ) -> Result<Self> {
        let idx = registry.index(mode)?;
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(CpcError::invalid("coherent amplitude must be finite"));
        }
        if policy.tail_tolerance.is_nan() || policy.tail_tolerance < 0.0 {
            return Err(CpcError::invalid("tail tolerance must be non-negative"));
        }
        let mean = alpha.norm_sqr();
        let pmf = |k: u32| poisson_pmf(mean, k);

        let cutoff = match policy.per_mode_cutoff.get(mode) {
            Some(&c) => {
                let kept: f64 = (0..=c).map(pmf).sum();
                let tail = (1.0 - kept).max(0.0);
                if tail > policy.tail_tolerance {
                    return Err(CpcError::Truncation {
                        cutoff: c,
                        tail,
                        tolerance: policy.tail_tolerance,
                    });
                }
                c
            }
            None => {
                let mut kept = 0.0;
                let mut k = 0;
                loop {
                    kept += pmf(k);
                    if 1.0 - kept <= policy.tail_tolerance {
                        break k;
                    }
                    k += 1;
                    if k > MAX_COHERENT_CUTOFF {
                        return Err(CpcError::Truncation {
                            cutoff: MAX_COHERENT_CUTOFF,
                            tail: 1.0 - kept,
                            tolerance: policy.tail_tolerance,
                        });
                    }
                }
            }
        };

        let kept: f64 = (0..=cutoff).map(pmf).sum();
        let discarded_mass = 1.0 - kept;
        let scale = kept.sqrt();
        let phase = alpha.arg();
        let vacuum = FockBasisVector::vacuum(registry.len());
        let mut amplitudes = BTreeMap::new();
        for n in 0..=cutoff {
            let magnitude = pmf(n).sqrt() / scale;
            let amp = Complex64::from_polar(magnitude, phase * f64::from(n));
            amplitudes.insert(vacuum.with(idx, n), amp);
        }
        prune(&mut amplitudes);
        Ok(QuantumState {
            registry,
            amplitudes,
            norm_weight: 1.0,
            discarded_mass,
        })
    }

    /// Build a state from explicit terms and normalize it.
    pub fn from_terms<I>(registry: Arc<ModeRegistry>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FockBasisVector, Complex64)>,
    {
        let mut amplitudes: BTreeMap<FockBasisVector, Complex64> = BTreeMap::new();
        for (basis, amp) in terms {
            if basis.occupations().len() != registry.len() {
                return Err(CpcError::invalid(
                    "basis vector length does not match registry",
                ));
            }
            *amplitudes.entry(basis).or_default() += amp;
        }
        let norm: f64 = amplitudes.values().map(|a| a.norm_sqr()).sum();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(CpcError::invalid("state has zero or non-finite norm"));
        }
        let scale = 1.0 / norm.sqrt();
        for amp in amplitudes.values_mut() {
            *amp *= scale;
        }
        prune(&mut amplitudes);
        Ok(QuantumState {
            registry,
            amplitudes,
            norm_weight: 1.0,
            discarded_mass: 0.0,
        })
    }

    /// Same as [`from_terms`](Self::from_terms) but with mode names.
    pub fn from_named_terms(
        registry: Arc<ModeRegistry>,
        terms: &[(&[(&str, i64)], Complex64)],
    ) -> Result<Self> {
        let resolved = terms
            .iter()
            .map(|(occ, amp)| Ok((basis_vector(&registry, occ)?, *amp)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(registry, resolved)
    }

    /// Rebuild a state with new amplitudes, keeping bookkeeping fields.
    pub(crate) fn with_amplitudes(
        &self,
        mut amplitudes: BTreeMap<FockBasisVector, Complex64>,
    ) -> Self {
        prune(&mut amplitudes);
        QuantumState {
            registry: Arc::clone(&self.registry),
            amplitudes,
            norm_weight: self.norm_weight,
            discarded_mass: self.discarded_mass,
        }
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn amplitudes(&self) -> &BTreeMap<FockBasisVector, Complex64> {
        &self.amplitudes
    }

    pub fn support(&self) -> impl Iterator<Item = &FockBasisVector> {
        self.amplitudes.keys()
    }

    pub fn norm_weight(&self) -> f64 {
        self.norm_weight
    }

    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn amplitude(&self, basis: &FockBasisVector) -> Complex64 {
        self.amplitudes.get(basis).copied().unwrap_or_default()
    }

    pub fn amplitude_of(&self, occupations: &[(&str, i64)]) -> Result<Complex64> {
        Ok(self.amplitude(&basis_vector(&self.registry, occupations)?))
    }

    /// Keep only basis vectors matching `pattern`, renormalize, and fold the
    /// kept probability into `norm_weight`.
    pub fn project(&self, pattern: &[(&str, u32)]) -> Result<QuantumState> {
        let resolved = pattern
            .iter()
            .map(|(name, n)| Ok((self.registry.index(name)?, *n)))
            .collect::<Result<Vec<_>>>()?;
        self.project_indexed(&resolved)
    }

    pub(crate) fn project_indexed(&self, pattern: &[(usize, u32)]) -> Result<QuantumState> {
        let kept: BTreeMap<_, _> = self
            .amplitudes
            .iter()
            .filter(|(b, _)| pattern.iter().all(|&(i, n)| b.occupation(i) == n))
            .map(|(b, a)| (b.clone(), *a))
            .collect();
        self.renormalized(kept)
    }

    pub(crate) fn renormalized(
        &self,
        kept: BTreeMap<FockBasisVector, Complex64>,
    ) -> Result<QuantumState> {
        let total = self.norm_sqr();
        let p: f64 = kept.values().map(|a| a.norm_sqr()).sum();
        if kept.is_empty() || p.is_nan() || p <= 0.0 {
            return Err(CpcError::EmptyProjection);
        }
        let probability = p / total;
        let scale = 1.0 / p.sqrt();
        let mut amplitudes = kept;
        for amp in amplitudes.values_mut() {
            *amp *= scale;
        }
        prune(&mut amplitudes);
        Ok(QuantumState {
            registry: Arc::clone(&self.registry),
            amplitudes,
            norm_weight: self.norm_weight * probability,
            discarded_mass: self.discarded_mass,
        })
    }

    /// Probability that `pattern` would be found, without projecting.
    pub fn probability_of(&self, pattern: &[(&str, u32)]) -> Result<f64> {
        let resolved = pattern
            .iter()
            .map(|(name, n)| Ok((self.registry.index(name)?, *n)))
            .collect::<Result<Vec<_>>>()?;
        let p: f64 = self
            .amplitudes
            .iter()
            .filter(|(b, _)| resolved.iter().all(|&(i, n)| b.occupation(i) == n))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok(p / self.norm_sqr())
    }

    /// Photon-number distribution of a single mode.
    pub fn marginal_distribution(&self, mode: &str) -> Result<BTreeMap<u32, f64>> {
        let idx = self.registry.index(mode)?;
        let total = self.norm_sqr();
        let mut dist = BTreeMap::new();
        for (b, a) in &self.amplitudes {
            *dist.entry(b.occupation(idx)).or_insert(0.0) += a.norm_sqr() / total;
        }
        Ok(dist)
    }

    /// Joint photon-number distribution of several modes, in the given order.
    pub fn joint_distribution(&self, modes: &[&str]) -> Result<BTreeMap<Vec<u32>, f64>> {
        let idx = modes
            .iter()
            .map(|m| self.registry.index(m))
            .collect::<Result<Vec<_>>>()?;
        let total = self.norm_sqr();
        let mut dist = BTreeMap::new();
        for (b, a) in &self.amplitudes {
            let key: Vec<u32> = idx.iter().map(|&i| b.occupation(i)).collect();
            *dist.entry(key).or_insert(0.0) += a.norm_sqr() / total;
        }
        Ok(dist)
    }

    /// Distribution of the summed photon number over several modes.
    pub fn total_number_distribution(&self, modes: &[&str]) -> Result<BTreeMap<u64, f64>> {
        let mut dist = BTreeMap::new();
        for (key, p) in self.joint_distribution(modes)? {
            *dist
                .entry(key.iter().map(|&n| u64::from(n)).sum())
                .or_insert(0.0) += p;
        }
        Ok(dist)
    }

    /// Mean photon number ⟨n⟩ of one mode.
    pub fn mean_number(&self, mode: &str) -> Result<f64> {
        Ok(self
            .marginal_distribution(mode)?
            .iter()
            .map(|(&n, &p)| f64::from(n) * p)
            .sum())
    }

    /// ⟨self|other⟩ over a shared registry layout.
    pub fn inner(&self, other: &QuantumState) -> Result<Complex64> {
        if !self.registry.same_layout(&other.registry) {
            return Err(CpcError::invalid(
                "states live on different mode registries",
            ));
        }
        let (small, large, conj_small) = if self.amplitudes.len() <= other.amplitudes.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, a) in &small.amplitudes {
            if let Some(c) = large.amplitudes.get(b) {
                acc += if conj_small {
                    a.conj() * c
                } else {
                    c.conj() * a
                };
            }
        }
        Ok(acc)
    }

    /// `|⟨reference|ψ⟩|²` with both states normalized.
    pub fn fidelity(&self, reference: &QuantumState) -> Result<f64> {
        let overlap = self.inner(reference)?.norm_sqr();
        let f = overlap / (self.norm_sqr() * reference.norm_sqr());
        Ok(f.clamp(0.0, 1.0))
    }

    /// Compare amplitudes up to a single overall phase.
    pub fn equal_up_to_global_phase(&self, other: &QuantumState, tol: f64) -> Result<bool> {
        if !self.registry.same_layout(&other.registry) {
            return Err(CpcError::invalid(
                "states live on different mode registries",
            ));
        }
        let overlap = self.inner(other)?;
        if overlap.norm() < 1e-300 {
            return Ok(self.amplitudes.is_empty() && other.amplitudes.is_empty());
        }
        let phase = overlap / overlap.norm();
        let keys: std::collections::BTreeSet<_> = self
            .amplitudes
            .keys()
            .chain(other.amplitudes.keys())
            .collect();
        Ok(keys
            .into_iter()
            .all(|k| (self.amplitude(k) * phase - other.amplitude(k)).norm() <= tol))
    }

    /// Embed into a larger registry that contains every current mode.
    pub fn embed(&self, target: Arc<ModeRegistry>) -> Result<QuantumState> {
        let map = self
            .registry
            .names()
            .map(|n| target.index(n))
            .collect::<Result<Vec<_>>>()?;
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(b, a)| {
                let mut v = FockBasisVector::vacuum(target.len());
                for (i, &n) in b.occupations().iter().enumerate() {
                    v.as_mut_slice()[map[i]] = n;
                }
                (v, *a)
            })
            .collect();
        Ok(QuantumState {
            registry: target,
            amplitudes,
            norm_weight: self.norm_weight,
            discarded_mass: self.discarded_mass,
        })
    }

    pub fn to_document(&self) -> StateDocument {
        StateDocument {
            modes: self.registry.modes().to_vec(),
            terms: self
                .amplitudes
                .iter()
                .map(|(b, a)| TermDocument {
                    occupations: b
                        .occupations()
                        .iter()
                        .enumerate()
                        .filter(|(_, &n)| n > 0)
                        .map(|(i, &n)| (self.registry.name(i).to_string(), n))
                        .collect(),
                    re: a.re,
                    im: a.im,
                })
                .collect(),
            norm_weight: self.norm_weight,
            discarded_mass: self.discarded_mass,
        }
    }

    /// Rebuild a state exactly as serialized; amplitudes are not renormalized.
    pub fn from_document(doc: &StateDocument) -> Result<QuantumState> {
        let registry = Arc::new(ModeRegistry::from_modes(doc.modes.clone())?);
        let mut amplitudes = BTreeMap::new();
        for (i, term) in doc.terms.iter().enumerate() {
            let mut v = FockBasisVector::vacuum(registry.len());
            for (name, &n) in &term.occupations {
                let idx = registry.index(name).map_err(|_| CpcError::Parse {
                    location: format!("terms[{i}]"),
                    message: format!("undeclared mode `{name}`"),
                })?;
                v.as_mut_slice()[idx] = n;
            }
            if amplitudes
                .insert(v, Complex64::new(term.re, term.im))
                .is_some()
            {
                return Err(CpcError::Parse {
                    location: format!("terms[{i}]"),
                    message: "duplicate basis vector".into(),
                });
            }
        }
        if !(0.0..=1.0).contains(&doc.norm_weight) {
            return Err(CpcError::invalid("norm_weight must lie in [0, 1]"));
        }
        Ok(QuantumState {
            registry,
            amplitudes,
            norm_weight: doc.norm_weight,
            discarded_mass: doc.discarded_mass,
        })
    }
}

impl fmt::Display for QuantumState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (b, a) in &self.amplitudes {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i){}", a.re, a.im, b.ket())?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Serialized form of a [`QuantumState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub modes: Vec<ModeInfo>,
    pub terms: Vec<TermDocument>,
    pub norm_weight: f64,
    #[serde(default)]
    pub discarded_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDocument {
    pub occupations: BTreeMap<String, u32>,
    pub re: f64,
    pub im: f64,
}

/// Poisson probability `e^{-μ} μ^k / k!`, evaluated in log space.
pub fn poisson_pmf(mean: f64, k: u32) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let log_fact: f64 = (2..=k).map(|j| f64::from(j).ln()).sum();
    (f64::from(k) * mean.ln() - mean - log_fact).exp()
}

pub(crate) fn basis_vector(
    registry: &ModeRegistry,
    occupations: &[(&str, i64)],
) -> Result<FockBasisVector> {
    let mut v = FockBasisVector::vacuum(registry.len());
    for &(name, n) in occupations {
        if n < 0 {
            return Err(CpcError::invalid(format!(
                "negative occupation {n} for mode `{name}`"
            )));
        }
        let n = u32::try_from(n).map_err(|_| CpcError::invalid("occupation too large"))?;
        v.as_mut_slice()[registry.index(name)?] = n;
    }
    Ok(v)
}

pub(crate) fn prune(amplitudes: &mut BTreeMap<FockBasisVector, Complex64>) {
    amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
}
