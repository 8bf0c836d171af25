//! The three pumped-interaction shapes and their matrices on invariant
//! subspaces.
//!
//! Every shape moves a fixed bundle of excitations in one direction
//! ("forward") and back again:
//!
//! | shape          | forward move                       | element                      |
//! |----------------|------------------------------------|------------------------------|
//! | nondegenerate  | `|n_a,n_b,n_c⟩ → |n_a−1,n_b+1,n_c+1⟩` | `√(n_a (n_b+1) (n_c+1))`     |
//! | degenerate     | `|n_a,n_b⟩ → |n_a−1,n_b+2⟩`         | `√(n_a (n_b+1) (n_b+2))`     |
//! | converter      | `|n_a,n_c⟩ → |n_a−1,n_c+1⟩`         | `√(n_a (n_c+1))`             |
//!
//! Matrices are expressed in units of the coupling rate, so evolution only
//! ever needs the dimensionless angle `θ = Γt`. The forward element is stored
//! as `−phase · √(…)`; with `U = exp(−iθM)` this gives
//! `|100⟩ → cos θ |100⟩ + i·phase·sin θ |011⟩`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CpcError, Result};
use crate::fock::{FockBasisVector, ModeRegistry};

/// Mode assignment of a coupling. Mode `a` is always the one that gives up
/// excitations on the forward move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CouplingKind {
    Nondegenerate { a: String, b: String, c: String },
    Degenerate { a: String, b: String },
    Converter { a: String, c: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    kind: CouplingKind,
    phase: Complex64,
}

impl Coupling {
    pub fn new(kind: CouplingKind, phase: Complex64) -> Result<Self> {
        if (phase.norm() - 1.0).abs() > 1e-12 {
            return Err(CpcError::invalid(format!(
                "coupling phase must have unit modulus, got |{phase}| = {}",
                phase.norm()
            )));
        }
        let names = kind_modes(&kind);
        for (i, m) in names.iter().enumerate() {
            if names[..i].contains(m) {
                return Err(CpcError::invalid(format!(
                    "mode `{m}` used twice in one coupling"
                )));
            }
        }
        Ok(Coupling { kind, phase })
    }

    pub fn nondegenerate(a: &str, b: &str, c: &str) -> Result<Self> {
        Self::new(
            CouplingKind::Nondegenerate {
                a: a.into(),
                b: b.into(),
                c: c.into(),
            },
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn degenerate(a: &str, b: &str) -> Result<Self> {
        Self::new(
            CouplingKind::Degenerate {
                a: a.into(),
                b: b.into(),
            },
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn converter(a: &str, c: &str) -> Result<Self> {
        Self::new(
            CouplingKind::Converter {
                a: a.into(),
                c: c.into(),
            },
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn with_phase(self, phase: Complex64) -> Result<Self> {
        Self::new(self.kind, phase)
    }

    pub fn kind(&self) -> &CouplingKind {
        &self.kind
    }

    pub fn phase(&self) -> Complex64 {
        self.phase
    }

    pub fn modes(&self) -> Vec<&str> {
        kind_modes(&self.kind)
    }

    /// Single-excitation coupling strength: the forward element magnitude out
    /// of the one-photon input. Nondegenerate and converter shapes give 1,
    /// the degenerate shape gives √2.
    pub fn single_photon_rate(&self) -> f64 {
        match self.kind {
            CouplingKind::Degenerate { .. } => std::f64::consts::SQRT_2,
            _ => 1.0,
        }
    }

    pub(crate) fn resolve(&self, registry: &ModeRegistry) -> Result<ResolvedCoupling> {
        let shape = match &self.kind {
            CouplingKind::Nondegenerate { a, b, c } => Shape::Nondegenerate {
                a: registry.index(a)?,
                b: registry.index(b)?,
                c: registry.index(c)?,
            },
            CouplingKind::Degenerate { a, b } => Shape::Degenerate {
                a: registry.index(a)?,
                b: registry.index(b)?,
            },
            CouplingKind::Converter { a, c } => Shape::Converter {
                a: registry.index(a)?,
                c: registry.index(c)?,
            },
        };
        Ok(ResolvedCoupling {
            shape,
            phase: self.phase,
        })
    }
}

fn kind_modes(kind: &CouplingKind) -> Vec<&str> {
    match kind {
        CouplingKind::Nondegenerate { a, b, c } => vec![a, b, c],
        CouplingKind::Degenerate { a, b } => vec![a, b],
        CouplingKind::Converter { a, c } => vec![a, c],
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Nondegenerate { a: usize, b: usize, c: usize },
    Degenerate { a: usize, b: usize },
    Converter { a: usize, c: usize },
}

/// A coupling with mode names resolved against a registry.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResolvedCoupling {
    shape: Shape,
    phase: Complex64,
}

impl ResolvedCoupling {
    pub(crate) fn source_mode(&self) -> usize {
        match self.shape {
            Shape::Nondegenerate { a, .. }
            | Shape::Degenerate { a, .. }
            | Shape::Converter { a, .. } => a,
        }
    }

    /// Forward move and its (unsigned) matrix-element magnitude.
    pub(crate) fn forward(&self, v: &FockBasisVector) -> Option<(FockBasisVector, f64)> {
        let mut out = v.clone();
        let occ = out.as_mut_slice();
        let factor = match self.shape {
            Shape::Nondegenerate { a, b, c } => {
                if occ[a] == 0 {
                    return None;
                }
                let f = f64::from(occ[a]) * f64::from(occ[b] + 1) * f64::from(occ[c] + 1);
                occ[a] -= 1;
                occ[b] += 1;
                occ[c] += 1;
                f
            }
            Shape::Degenerate { a, b } => {
                if occ[a] == 0 {
                    return None;
                }
                let f = f64::from(occ[a]) * f64::from(occ[b] + 1) * f64::from(occ[b] + 2);
                occ[a] -= 1;
                occ[b] += 2;
                f
            }
            Shape::Converter { a, c } => {
                if occ[a] == 0 {
                    return None;
                }
                let f = f64::from(occ[a]) * f64::from(occ[c] + 1);
                occ[a] -= 1;
                occ[c] += 1;
                f
            }
        };
        Some((out, factor.sqrt()))
    }

    /// Inverse of [`forward`](Self::forward).
    pub(crate) fn backward(&self, v: &FockBasisVector) -> Option<(FockBasisVector, f64)> {
        let mut prev = v.clone();
        let occ = prev.as_mut_slice();
        match self.shape {
            Shape::Nondegenerate { a, b, c } => {
                if occ[b] == 0 || occ[c] == 0 {
                    return None;
                }
                occ[a] += 1;
                occ[b] -= 1;
                occ[c] -= 1;
            }
            Shape::Degenerate { a, b } => {
                if occ[b] < 2 {
                    return None;
                }
                occ[a] += 1;
                occ[b] -= 2;
            }
            Shape::Converter { a, c } => {
                if occ[c] == 0 {
                    return None;
                }
                occ[a] += 1;
                occ[c] -= 1;
            }
        }
        let (_, factor) = self.forward(&prev)?;
        Some((prev, factor))
    }

    /// `⟨forward(v)|M|v⟩`.
    fn forward_element(&self, factor: f64) -> Complex64 {
        -self.phase * factor
    }

    fn closure(
        &self,
        seed: impl IntoIterator<Item = FockBasisVector>,
    ) -> BTreeSet<FockBasisVector> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<FockBasisVector> = VecDeque::new();
        for v in seed {
            if seen.insert(v.clone()) {
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for next in [self.forward(&v), self.backward(&v)].into_iter().flatten() {
                if seen.insert(next.0.clone()) {
                    queue.push_back(next.0);
                }
            }
        }
        seen
    }

    pub(crate) fn sort_basis(&self, basis: &mut [FockBasisVector]) {
        let a = self.source_mode();
        basis.sort_by(|x, y| {
            (Reverse(x.occupation(a)), x.occupations())
                .cmp(&(Reverse(y.occupation(a)), y.occupations()))
        });
    }

    /// Partition a support into the invariant subspaces it touches.
    pub(crate) fn subspaces<'a>(
        &self,
        support: impl IntoIterator<Item = &'a FockBasisVector>,
    ) -> Vec<Vec<FockBasisVector>> {
        let mut assigned: BTreeSet<FockBasisVector> = BTreeSet::new();
        let mut out = Vec::new();
        for v in support {
            if assigned.contains(v) {
                continue;
            }
            let component = self.closure([v.clone()]);
            let mut basis: Vec<_> = component.into_iter().collect();
            assigned.extend(basis.iter().cloned());
            self.sort_basis(&mut basis);
            out.push(basis);
        }
        out
    }

    pub(crate) fn matrix(&self, basis: &[FockBasisVector]) -> Result<DMatrix<Complex64>> {
        let index: BTreeMap<&FockBasisVector, usize> =
            basis.iter().enumerate().map(|(i, v)| (v, i)).collect();
        if index.len() != basis.len() {
            return Err(CpcError::InconsistentBasis(
                "duplicate basis vectors".into(),
            ));
        }
        let d = basis.len();
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for (j, v) in basis.iter().enumerate() {
            for (neighbour, forward) in [(self.forward(v), true), (self.backward(v), false)] {
                let Some((w, factor)) = neighbour else {
                    continue;
                };
                let Some(&i) = index.get(&w) else {
                    return Err(CpcError::InconsistentBasis(format!(
                        "{} couples to {} which is missing",
                        v.ket(),
                        w.ket()
                    )));
                };
                let elem = self.forward_element(factor);
                m[(i, j)] = if forward { elem } else { elem.conj() };
            }
        }
        Ok(m)
    }
}

/// Closure of `seed` under repeated application of the coupling, ordered by
/// decreasing occupation of the source mode.
pub fn reachable_basis<'a>(
    seed: impl IntoIterator<Item = &'a FockBasisVector>,
    coupling: &Coupling,
    registry: &ModeRegistry,
) -> Result<Vec<FockBasisVector>> {
    let resolved = coupling.resolve(registry)?;
    let seed: Vec<FockBasisVector> = seed.into_iter().cloned().collect();
    if let Some(bad) = seed
        .iter()
        .find(|v| v.occupations().len() != registry.len())
    {
        return Err(CpcError::invalid(format!(
            "{} does not match the registry",
            bad.ket()
        )));
    }
    let mut basis: Vec<_> = resolved.closure(seed).into_iter().collect();
    resolved.sort_basis(&mut basis);
    Ok(basis)
}

/// Hermitian coupling matrix in units of Γ on an ordered, closed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    registry: Arc<ModeRegistry>,
    basis: Vec<FockBasisVector>,
    entries: DMatrix<Complex64>,
}

impl CouplingMatrix {
    pub fn build(
        coupling: &Coupling,
        basis: Vec<FockBasisVector>,
        registry: Arc<ModeRegistry>,
    ) -> Result<Self> {
        let resolved = coupling.resolve(&registry)?;
        if let Some(bad) = basis
            .iter()
            .find(|v| v.occupations().len() != registry.len())
        {
            return Err(CpcError::invalid(format!(
                "{} does not match the registry",
                bad.ket()
            )));
        }
        let entries = resolved.matrix(&basis)?;
        Ok(CouplingMatrix {
            registry,
            basis,
            entries,
        })
    }

    pub fn basis(&self) -> &[FockBasisVector] {
        &self.basis
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument {
            modes: self.registry.names().map(str::to_string).collect(),
            basis: self
                .basis
                .iter()
                .map(|v| {
                    v.occupations()
                        .iter()
                        .enumerate()
                        .filter(|(_, &n)| n > 0)
                        .map(|(i, &n)| (self.registry.name(i).to_string(), n))
                        .collect()
                })
                .collect(),
            entries: (0..self.dim())
                .flat_map(|i| (0..self.dim()).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let z = self.entries[(i, j)];
                    [z.re, z.im]
                })
                .collect(),
        }
    }
}

/// JSON form of a [`CouplingMatrix`]: basis occupations and row-major
/// `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub modes: Vec<String>,
    pub basis: Vec<BTreeMap<String, u32>>,
    pub entries: Vec<[f64; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::QuantumState;

    fn abc() -> Arc<ModeRegistry> {
        Arc::new(ModeRegistry::new(["a", "b", "c"]).unwrap())
    }

    fn ket(n: [u32; 3]) -> FockBasisVector {
        FockBasisVector::from_occupations(n.to_vec())
    }

    fn nd() -> Coupling {
        Coupling::nondegenerate("a", "b", "c").unwrap()
    }

    #[test]
    fn single_photon_subspace() {
        let basis = reachable_basis([&ket([1, 0, 0])], &nd(), &abc()).unwrap();
        assert_eq!(basis, vec![ket([1, 0, 0]), ket([0, 1, 1])]);
        let back = reachable_basis([&ket([0, 1, 1])], &nd(), &abc()).unwrap();
        assert_eq!(back, basis);
    }

    #[test]
    fn subspace_dimension_formula() {
        for (na, nb, nc) in [
            (3, 0, 0),
            (2, 1, 0),
            (1, 2, 3),
            (4, 2, 2),
            (0, 3, 1),
            (5, 1, 4),
        ] {
            let basis = reachable_basis([&ket([na, nb, nc])], &nd(), &abc()).unwrap();
            assert_eq!(basis.len() as u32, na + nb.min(nc) + 1, "seed {na}{nb}{nc}");
        }
    }

    #[test]
    fn two_photon_matrix_and_spectrum() {
        let basis = reachable_basis([&ket([2, 0, 0])], &nd(), &abc()).unwrap();
        let m = CouplingMatrix::build(&nd(), basis, abc()).unwrap();
        let e = m.entries();
        assert!((e[(1, 0)].norm() - 2f64.sqrt()).abs() < 1e-15);
        assert!((e[(2, 1)].norm() - 2.0).abs() < 1e-15);
        assert_eq!(e[(2, 0)].norm(), 0.0);
        // Characteristic polynomial of [[0,√2,0],[√2,0,2],[0,2,0]] is −λ(λ²−6).
        let eig = nalgebra::SymmetricEigen::new(e.clone()).eigenvalues;
        let mut ev: Vec<f64> = eig.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 6f64.sqrt()).abs() < 1e-12);
        assert!(ev[1].abs() < 1e-12);
        assert!((ev[2] - 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn one_photon_element_is_unit() {
        let basis = reachable_basis([&ket([1, 0, 0])], &nd(), &abc()).unwrap();
        let m = CouplingMatrix::build(&nd(), basis, abc()).unwrap();
        assert!((m.entries()[(0, 1)].norm() - 1.0).abs() < 1e-15);
        assert_eq!(m.entries()[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn empty_basis() {
        let m = CouplingMatrix::build(&nd(), vec![], abc()).unwrap();
        assert_eq!(m.dim(), 0);
        assert_eq!(m.entries().nrows(), 0);
    }

    #[test]
    fn open_basis_is_rejected() {
        let err =
            CouplingMatrix::build(&nd(), vec![ket([2, 0, 0]), ket([1, 1, 1])], abc()).unwrap_err();
        assert_eq!(err.kind(), "inconsistent-basis");
    }

    #[test]
    fn degenerate_and_converter_elements() {
        let ab = Arc::new(ModeRegistry::new(["a", "b"]).unwrap());
        let deg = Coupling::degenerate("a", "b").unwrap();
        let seed = FockBasisVector::from_occupations(vec![2, 1]);
        let basis = reachable_basis([&seed], &deg, &ab).unwrap();
        assert_eq!(basis.len(), 3);
        let m = CouplingMatrix::build(&deg, basis, Arc::clone(&ab)).unwrap();
        // |2,1⟩ → |1,3⟩: √(2·2·3), |1,3⟩ → |0,5⟩: √(1·4·5)
        assert!((m.entries()[(1, 0)].norm() - 12f64.sqrt()).abs() < 1e-14);
        assert!((m.entries()[(2, 1)].norm() - 20f64.sqrt()).abs() < 1e-14);

        let conv = Coupling::converter("a", "b").unwrap();
        let basis = reachable_basis([&seed], &conv, &ab).unwrap();
        assert_eq!(basis.len(), 4);
        let m = CouplingMatrix::build(&conv, basis, ab).unwrap();
        // basis |3,0⟩, |2,1⟩, |1,2⟩, |0,3⟩; |2,1⟩ → |1,2⟩ is √(2·2)
        assert!((m.entries()[(1, 0)].norm() - 3f64.sqrt()).abs() < 1e-14);
        assert!((m.entries()[(2, 1)].norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn phase_enters_off_diagonal() {
        let i = Complex64::new(0.0, 1.0);
        let c = nd().with_phase(i).unwrap();
        let basis = reachable_basis([&ket([1, 0, 0])], &c, &abc()).unwrap();
        let m = CouplingMatrix::build(&c, basis, abc()).unwrap();
        assert_eq!(m.entries()[(1, 0)], -i);
        assert_eq!(m.entries()[(0, 1)], i);
        assert!(nd().with_phase(Complex64::new(2.0, 0.0)).is_err());
        assert!(Coupling::nondegenerate("a", "a", "c").is_err());
    }

    #[test]
    fn unknown_mode() {
        let c = Coupling::nondegenerate("a", "b", "q").unwrap();
        let s = QuantumState::fock(abc(), &[("a", 1)]).unwrap();
        assert_eq!(
            reachable_basis(s.support(), &c, &abc()).unwrap_err().kind(),
            "unknown-mode"
        );
    }

    #[test]
    fn document_layout() {
        let basis = reachable_basis([&ket([1, 0, 0])], &nd(), &abc()).unwrap();
        let doc = CouplingMatrix::build(&nd(), basis, abc())
            .unwrap()
            .to_document();
        assert_eq!(doc.basis[0].get("a"), Some(&1));
        assert_eq!(doc.entries.len(), 4);
        assert_eq!(doc.entries[2], [-1.0, 0.0]);
    }
}
