//! Circuit elements, ordered composition, and builders for the standard CPC
//! networks: the controlled-Z gate, photon-doubling cascades and
//! polarization entanglement sources.
//!
//! Beam splitters use the symmetric convention with `i` on reflection,
//! `a₁† → √T a₁† + i√(1−T) a₂†`, which is exactly a converter coupling run
//! for `θ = arccos √T`. With it, `(|2,0⟩ + |0,2⟩)/√2 → i|1,1⟩` at `T = 1/2`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::Coupling;
use crate::error::{CpcError, Result};
use crate::evolution::evolve;
use crate::fock::{FockBasisVector, ModeInfo, ModeRegistry, QuantumState};

/// What a [`CircuitElement::Filter`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterPolicy {
    /// Dump-port detectors on the listed modes; any photon there rejects the
    /// event. Pattern values must be 0.
    RejectOnOccupation,
    /// Keep only terms with exactly the listed occupations.
    KeepPattern,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CircuitElement {
    CpcGate {
        coupling: Coupling,
        theta: f64,
    },
    BeamSplitter {
        mode1: String,
        mode2: String,
        transmissivity: f64,
    },
    Filter {
        pattern: BTreeMap<String, u32>,
        policy: FilterPolicy,
    },
    Herald {
        mode: String,
        occupation: u32,
    },
    /// Mode permutation. Targets that are not themselves sources hand their
    /// content back to the vacated sources, so the map is always unitary.
    Relabel {
        map: BTreeMap<String, String>,
    },
}

impl CircuitElement {
    pub fn cpc(coupling: Coupling, theta: f64) -> Self {
        CircuitElement::CpcGate { coupling, theta }
    }

    pub fn beam_splitter(mode1: &str, mode2: &str, transmissivity: f64) -> Self {
        CircuitElement::BeamSplitter {
            mode1: mode1.into(),
            mode2: mode2.into(),
            transmissivity,
        }
    }

    pub fn reject_occupied<'a>(modes: impl IntoIterator<Item = &'a str>) -> Self {
        CircuitElement::Filter {
            pattern: modes.into_iter().map(|m| (m.to_string(), 0)).collect(),
            policy: FilterPolicy::RejectOnOccupation,
        }
    }

    pub fn herald(mode: &str, occupation: u32) -> Self {
        CircuitElement::Herald {
            mode: mode.into(),
            occupation,
        }
    }

    pub fn is_cpc(&self) -> bool {
        matches!(self, CircuitElement::CpcGate { .. })
    }

    pub fn modes(&self) -> Vec<&str> {
        match self {
            CircuitElement::CpcGate { coupling, .. } => coupling.modes(),
            CircuitElement::BeamSplitter { mode1, mode2, .. } => vec![mode1, mode2],
            CircuitElement::Filter { pattern, .. } => pattern.keys().map(String::as_str).collect(),
            CircuitElement::Herald { mode, .. } => vec![mode],
            CircuitElement::Relabel { map } => {
                map.keys().chain(map.values()).map(String::as_str).collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CircuitElement::CpcGate { theta, .. } if !theta.is_finite() => {
                Err(CpcError::invalid("CPC gate angle must be finite"))
            }
            CircuitElement::BeamSplitter {
                mode1,
                mode2,
                transmissivity,
            } => {
                if mode1 == mode2 {
                    return Err(CpcError::invalid("beam splitter needs two distinct modes"));
                }
                if !(0.0..=1.0).contains(transmissivity) {
                    return Err(CpcError::invalid(format!(
                        "transmissivity {transmissivity} outside [0, 1]"
                    )));
                }
                Ok(())
            }
            CircuitElement::Filter {
                pattern,
                policy: FilterPolicy::RejectOnOccupation,
            } if pattern.values().any(|&n| n != 0) => Err(CpcError::invalid(
                "reject-on-occupation filters take zero occupations only",
            )),
            CircuitElement::Relabel { map } => {
                let targets: BTreeSet<_> = map.values().collect();
                if targets.len() != map.len() {
                    return Err(CpcError::invalid("relabel map must be injective"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for CircuitElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CircuitElement::CpcGate { coupling, theta } => {
                write!(f, "cpc[{}] θ={}π", coupling.modes().join(","), theta / PI)
            }
            CircuitElement::BeamSplitter {
                mode1,
                mode2,
                transmissivity,
            } => write!(f, "bs[{mode1},{mode2}] T={transmissivity}"),
            CircuitElement::Filter { pattern, policy } => {
                let p: Vec<String> = pattern.iter().map(|(m, n)| format!("{m}={n}")).collect();
                write!(f, "filter[{}] {:?}", p.join(","), policy)
            }
            CircuitElement::Herald { mode, occupation } => write!(f, "herald[{mode}={occupation}]"),
            CircuitElement::Relabel { map } => {
                let p: Vec<String> = map.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                write!(f, "relabel[{}]", p.join(","))
            }
        }
    }
}

/// Ordered list of elements over a declared set of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    registry: Arc<ModeRegistry>,
    elements: Vec<CircuitElement>,
}

impl Circuit {
    pub fn new(registry: Arc<ModeRegistry>, elements: Vec<CircuitElement>) -> Result<Self> {
        for el in &elements {
            el.validate()?;
            for m in el.modes() {
                registry.index(m)?;
            }
        }
        Ok(Circuit { registry, elements })
    }

    pub fn identity(registry: Arc<ModeRegistry>) -> Self {
        Circuit {
            registry,
            elements: vec![],
        }
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn elements(&self) -> &[CircuitElement] {
        &self.elements
    }

    pub fn cpc_stage_count(&self) -> usize {
        self.elements.iter().filter(|e| e.is_cpc()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementOutcome {
    pub index: usize,
    pub element: String,
    /// Probability of passing this element (1 for unitaries).
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitRun {
    /// `None` when a filter or herald found nothing to keep.
    pub final_state: Option<QuantumState>,
    pub success_probability: f64,
    pub event_log: Vec<ElementOutcome>,
}

impl CircuitRun {
    pub fn failed(&self) -> bool {
        self.final_state.is_none()
    }
}

/// Apply every element in order, folding projection probabilities into the
/// run's success probability.
pub fn run(circuit: &Circuit, input: &QuantumState) -> Result<CircuitRun> {
    for name in circuit.registry.names() {
        input.registry().index(name)?;
    }
    let start_weight = input.norm_weight();
    let mut state = input.clone();
    let mut log = Vec::with_capacity(circuit.elements.len());
    for (index, element) in circuit.elements.iter().enumerate() {
        let before = state.norm_weight();
        match apply_element(&state, element) {
            Ok(next) => {
                log.push(ElementOutcome {
                    index,
                    element: element.to_string(),
                    probability: next.norm_weight() / before,
                });
                state = next;
            }
            Err(CpcError::EmptyProjection) => {
                log.push(ElementOutcome {
                    index,
                    element: element.to_string(),
                    probability: 0.0,
                });
                return Ok(CircuitRun {
                    final_state: None,
                    success_probability: 0.0,
                    event_log: log,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CircuitRun {
        success_probability: state.norm_weight() / start_weight,
        final_state: Some(state),
        event_log: log,
    })
}

fn apply_element(state: &QuantumState, element: &CircuitElement) -> Result<QuantumState> {
    match element {
        CircuitElement::CpcGate { coupling, theta } => Ok(evolve(state, coupling, *theta)?.state),
        CircuitElement::BeamSplitter {
            mode1,
            mode2,
            transmissivity,
        } => {
            let mixer = Coupling::converter(mode1, mode2)?;
            Ok(evolve(state, &mixer, transmissivity.sqrt().acos())?.state)
        }
        CircuitElement::Filter { pattern, .. } => {
            let pattern: Vec<(&str, u32)> = pattern.iter().map(|(m, &n)| (m.as_str(), n)).collect();
            state.project(&pattern)
        }
        CircuitElement::Herald { mode, occupation } => {
            state.project(&[(mode.as_str(), *occupation)])
        }
        CircuitElement::Relabel { map } => relabel(state, map),
    }
}

fn relabel(state: &QuantumState, map: &BTreeMap<String, String>) -> Result<QuantumState> {
    let registry = state.registry();
    let mut perm: Vec<usize> = (0..registry.len()).collect();
    let sources: BTreeSet<&str> = map.keys().map(String::as_str).collect();
    let mut vacated: Vec<usize> = map
        .keys()
        .filter(|k| !map.values().any(|v| v == *k))
        .map(|k| registry.index(k))
        .collect::<Result<_>>()?;
    vacated.reverse();
    for (from, to) in map {
        perm[registry.index(from)?] = registry.index(to)?;
    }
    for to in map.values() {
        if !sources.contains(to.as_str()) {
            let idx = registry.index(to)?;
            perm[idx] = vacated
                .pop()
                .expect("injective map frees one source per new target");
        }
    }
    let amplitudes = state
        .amplitudes()
        .iter()
        .map(|(b, a)| {
            let mut occ = vec![0; b.occupations().len()];
            for (i, &n) in b.occupations().iter().enumerate() {
                occ[perm[i]] = n;
            }
            (FockBasisVector::from_occupations(occ), *a)
        })
        .collect();
    Ok(state.with_amplitudes(amplitudes))
}

/// Two dual-rail qubits and the empty mode the CPC interaction converts the
/// `|1⟩|1⟩` pair into.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRailEncoding {
    /// `(|0⟩ rail, |1⟩ rail)` of the first qubit.
    pub control: (String, String),
    pub target: (String, String),
    pub ancilla: String,
}

impl Default for DualRailEncoding {
    fn default() -> Self {
        DualRailEncoding {
            control: ("b0".into(), "b1".into()),
            target: ("c0".into(), "c1".into()),
            ancilla: "a".into(),
        }
    }
}

impl DualRailEncoding {
    fn modes(&self) -> [&str; 5] {
        [
            &self.control.0,
            &self.control.1,
            &self.target.0,
            &self.target.1,
            &self.ancilla,
        ]
    }

    pub fn registry(&self) -> Result<Arc<ModeRegistry>> {
        let modes = self.modes();
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(CpcError::invalid(format!("encoding reuses mode `{m}`")));
            }
        }
        Ok(Arc::new(ModeRegistry::new(modes)?))
    }

    /// Logical basis state `|q_c q_t⟩`.
    pub fn basis_state(
        &self,
        registry: Arc<ModeRegistry>,
        control: bool,
        target: bool,
    ) -> Result<QuantumState> {
        let c = if control {
            &self.control.1
        } else {
            &self.control.0
        };
        let t = if target {
            &self.target.1
        } else {
            &self.target.0
        };
        QuantumState::fock(registry, &[(c.as_str(), 1), (t.as_str(), 1)])
    }
}

/// The CZ circuit: a single CPC interaction between the two `|1⟩` rails.
pub fn cz_circuit(encoding: &DualRailEncoding, theta: f64) -> Result<Circuit> {
    let registry = encoding.registry()?;
    let coupling =
        Coupling::nondegenerate(&encoding.ancilla, &encoding.control.1, &encoding.target.1)?;
    Circuit::new(registry, vec![CircuitElement::cpc(coupling, theta)])
}

/// Matrix `U[(out, in)]` of the induced two-qubit map in the computational
/// basis `|00⟩, |01⟩, |10⟩, |11⟩`, found by running all four inputs.
pub fn cz_gate_matrix(encoding: &DualRailEncoding, theta: f64) -> Result<DMatrix<Complex64>> {
    let circuit = cz_circuit(encoding, theta)?;
    let registry = Arc::clone(circuit.registry());
    let basis = [(false, false), (false, true), (true, false), (true, true)];
    let mut u = DMatrix::zeros(4, 4);
    for (col, &(qc, qt)) in basis.iter().enumerate() {
        let input = encoding.basis_state(Arc::clone(&registry), qc, qt)?;
        let out = run(&circuit, &input)?
            .final_state
            .ok_or_else(|| CpcError::Numerical("unitary circuit lost its state".into()))?;
        for (row, &(oc, ot)) in basis.iter().enumerate() {
            let reference = encoding.basis_state(Arc::clone(&registry), oc, ot)?;
            u[(row, col)] = reference.inner(&out)?;
        }
    }
    Ok(u)
}

/// Entanglement entropy in bits of a two-qubit pure state given in the
/// `|00⟩, |01⟩, |10⟩, |11⟩` basis.
pub fn entanglement_entropy(psi: &[Complex64; 4]) -> f64 {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let [a, b, c, d] = psi.map(|z| z / norm.sqrt());
    let r00 = a.norm_sqr() + b.norm_sqr();
    let r11 = c.norm_sqr() + d.norm_sqr();
    let r01 = a * c.conj() + b * d.conj();
    let disc = ((r00 - r11).powi(2) + 4.0 * r01.norm_sqr()).sqrt();
    [(r00 + r11 + disc) / 2.0, (r00 + r11 - disc) / 2.0]
        .iter()
        .filter(|&&l| l > 1e-300)
        .map(|&l| -l * l.log2())
        .sum()
}

/// True when `a = e^{iφ} b` entrywise within `tol`.
pub fn matrices_equal_up_to_phase(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    tol: f64,
) -> bool {
    if a.shape() != b.shape() {
        return false;
    }
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    if overlap.norm() == 0.0 {
        return a.iter().chain(b.iter()).all(|z| z.norm() <= tol);
    }
    let phase = overlap / overlap.norm();
    a.iter()
        .zip(b.iter())
        .all(|(x, y)| (x * phase - y).norm() <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CascadeMethod {
    /// Nondegenerate doubler followed by two converters back to the input
    /// frequency.
    NondegenerateWithConversion,
    /// Degenerate doublers in both arms of an interferometer, closed by a
    /// reverse Hong-Ou-Mandel beam splitter.
    DegenerateInterferometer,
}

impl CascadeMethod {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(CascadeMethod::NondegenerateWithConversion),
            2 => Ok(CascadeMethod::DegenerateInterferometer),
            _ => Err(CpcError::invalid(format!(
                "cascade method must be 1 or 2, got {n}"
            ))),
        }
    }
}

/// A doubling cascade and the modes that carry its photons.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingCascade {
    pub circuit: Circuit,
    pub input_mode: String,
    /// One mode per output photon, `2^depth` in total.
    pub output_modes: Vec<String>,
}

impl DoublingCascade {
    /// The ideal output: one photon in every output mode.
    pub fn ideal_output(&self) -> Result<QuantumState> {
        let occ: Vec<(&str, i64)> = self.output_modes.iter().map(|m| (m.as_str(), 1)).collect();
        QuantumState::fock(Arc::clone(self.circuit.registry()), &occ)
    }

    pub fn single_photon_input(&self) -> Result<QuantumState> {
        QuantumState::fock(
            Arc::clone(self.circuit.registry()),
            &[(self.input_mode.as_str(), 1)],
        )
    }
}

/// θ at which the degenerate shape fully converts `|1,0⟩ → |0,2⟩`.
pub const DEGENERATE_DOUBLING_THETA: f64 = FRAC_PI_2 / SQRT_2;

/// Cascade turning one photon into `2^depth` photons in distinct modes.
pub fn build_doubling_cascade(depth: u32, method: CascadeMethod) -> Result<DoublingCascade> {
    if depth == 0 {
        return Err(CpcError::invalid("cascade depth must be at least 1"));
    }
    if depth > 12 {
        return Err(CpcError::invalid("cascade depth above 12 is not supported"));
    }
    let mut modes: Vec<ModeInfo> = Vec::new();
    let mut elements = Vec::new();
    let mut layer: Vec<String> = vec!["a".into()];
    modes.push(ModeInfo::new("a"));
    for _ in 0..depth {
        let mut next = Vec::with_capacity(layer.len() * 2);
        for src in &layer {
            let (left, right) = (format!("{src}0"), format!("{src}1"));
            match method {
                CascadeMethod::NondegenerateWithConversion => {
                    let (b, c) = (format!("b{}", &src[1..]), format!("c{}", &src[1..]));
                    for m in [&b, &c, &left, &right] {
                        modes.push(ModeInfo::new(m.clone()));
                    }
                    elements.push(CircuitElement::cpc(
                        Coupling::nondegenerate(src, &b, &c)?,
                        FRAC_PI_2,
                    ));
                    elements.push(CircuitElement::cpc(
                        Coupling::converter(&b, &left)?,
                        FRAC_PI_2,
                    ));
                    elements.push(CircuitElement::cpc(
                        Coupling::converter(&c, &right)?,
                        FRAC_PI_2,
                    ));
                }
                CascadeMethod::DegenerateInterferometer => {
                    let arm = format!("arm{}", &src[1..]);
                    for m in [&arm, &left, &right] {
                        modes.push(ModeInfo::new(m.clone()));
                    }
                    // The second arm's pump carries phase −i so both doubled
                    // pairs enter the closing splitter in phase.
                    let lower = Coupling::degenerate(&arm, &right)?
                        .with_phase(Complex64::new(0.0, -1.0))?;
                    elements.push(CircuitElement::beam_splitter(src, &arm, 0.5));
                    elements.push(CircuitElement::cpc(
                        Coupling::degenerate(src, &left)?,
                        DEGENERATE_DOUBLING_THETA,
                    ));
                    elements.push(CircuitElement::cpc(lower, DEGENERATE_DOUBLING_THETA));
                    elements.push(CircuitElement::beam_splitter(&left, &right, 0.5));
                }
            }
            next.push(left);
            next.push(right);
        }
        layer = next;
    }
    let registry = Arc::new(ModeRegistry::from_modes(modes)?);
    Ok(DoublingCascade {
        circuit: Circuit::new(registry, elements)?,
        input_mode: "a".into(),
        output_modes: layer,
    })
}

/// Polarization-encoded entanglement sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntanglementKind {
    /// Two-photon state `h|HH⟩ + v|VV⟩` from an input photon `h|H⟩ + v|V⟩`.
    Bell { h: Complex64, v: Complex64 },
    /// Three-photon `h|HHH⟩ + v|VVV⟩`.
    Ghz { h: Complex64, v: Complex64 },
    /// Nine-photon Shor-code encoding of `h|H⟩ + v|V⟩`.
    Shor9 { h: Complex64, v: Complex64 },
}

impl EntanglementKind {
    pub fn balanced_bell() -> Self {
        let x = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        EntanglementKind::Bell { h: x, v: x }
    }

    pub fn balanced_ghz() -> Self {
        let x = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        EntanglementKind::Ghz { h: x, v: x }
    }
}

/// A source circuit with its input photon and the state it should produce.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementSource {
    pub circuit: Circuit,
    pub input_state: QuantumState,
    pub target_state: QuantumState,
    /// Output qubits as `(H mode, V mode)`, in target-state order.
    pub qubits: Vec<(String, String)>,
}

struct PolarizationBuilder {
    modes: Vec<ModeInfo>,
    elements: Vec<CircuitElement>,
    fresh: usize,
}

impl PolarizationBuilder {
    fn new() -> Self {
        PolarizationBuilder {
            modes: vec![ModeInfo::new("in_H"), ModeInfo::new("in_V")],
            elements: vec![],
            fresh: 0,
        }
    }

    fn qubit(&mut self) -> (String, String) {
        self.fresh += 1;
        let q = (format!("q{}_H", self.fresh), format!("q{}_V", self.fresh));
        self.modes.push(ModeInfo::new(q.0.clone()));
        self.modes.push(ModeInfo::new(q.1.clone()));
        q
    }

    /// Double `src` into two fresh polarization qubits. The V-branch pump
    /// phase sets the relative phase of the `|VV⟩` term.
    fn double(
        &mut self,
        src: &(String, String),
        v_phase: Complex64,
    ) -> Result<((String, String), (String, String))> {
        let (x, y) = (self.qubit(), self.qubit());
        let h = Coupling::nondegenerate(&src.0, &x.0, &y.0)?;
        let v = Coupling::nondegenerate(&src.1, &x.1, &y.1)?.with_phase(v_phase)?;
        self.elements.push(CircuitElement::cpc(h, FRAC_PI_2));
        self.elements.push(CircuitElement::cpc(v, FRAC_PI_2));
        Ok((x, y))
    }

    /// Fan one qubit out into three: two doublings in sequence.
    fn fan_out(
        &mut self,
        src: &(String, String),
        v_phases: [Complex64; 2],
    ) -> Result<Vec<(String, String)>> {
        let (x, y) = self.double(src, v_phases[0])?;
        let (x2, z) = self.double(&x, v_phases[1])?;
        Ok(vec![y, x2, z])
    }

    fn finish(self) -> Result<Circuit> {
        Circuit::new(
            Arc::new(ModeRegistry::from_modes(self.modes)?),
            self.elements,
        )
    }
}

fn polarization_term(
    registry: &ModeRegistry,
    qubits: &[(String, String)],
    bits: &[bool],
) -> Result<FockBasisVector> {
    let mut occ = vec![0u32; registry.len()];
    for (q, &v) in qubits.iter().zip(bits) {
        occ[registry.index(if v { &q.1 } else { &q.0 })?] = 1;
    }
    Ok(FockBasisVector::from_occupations(occ))
}

/// Logical-basis target `Σ c_bits |bits⟩` over polarization qubits.
fn polarization_state(
    registry: &Arc<ModeRegistry>,
    qubits: &[(String, String)],
    terms: &[(Vec<bool>, Complex64)],
) -> Result<QuantumState> {
    let resolved = terms
        .iter()
        .map(|(bits, c)| Ok((polarization_term(registry, qubits, bits)?, *c)))
        .collect::<Result<Vec<_>>>()?;
    QuantumState::from_terms(Arc::clone(registry), resolved)
}

pub fn build_entanglement_circuit(kind: EntanglementKind) -> Result<EntanglementSource> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let input_q = ("in_H".to_string(), "in_V".to_string());
    let mut builder = PolarizationBuilder::new();
    let (h, v, qubits) = match kind {
        EntanglementKind::Bell { h, v } => {
            let (x, y) = builder.double(&input_q, one)?;
            (h, v, vec![x, y])
        }
        EntanglementKind::Ghz { h, v } => (h, v, builder.fan_out(&input_q, [one, one])?),
        EntanglementKind::Shor9 { h, v } => {
            // Phase-flip layer: fan out, rotate each photon's polarization
            // with a balanced splitter, then bit-flip layer on each block.
            // Pump phases cancel the i factors from the splitters so the
            // blocks come out as (|HHH⟩ ± |VVV⟩)/√2.
            let top = builder.fan_out(&input_q, [i, one])?;
            for q in &top {
                builder
                    .elements
                    .push(CircuitElement::beam_splitter(&q.0, &q.1, 0.5));
            }
            let mut all = Vec::with_capacity(9);
            for q in &top {
                all.extend(builder.fan_out(q, [-i, one])?);
            }
            (h, v, all)
        }
    };
    let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
    if norm.is_nan() || norm <= 0.0 {
        return Err(CpcError::invalid(
            "input polarization amplitudes are both zero",
        ));
    }
    let circuit = builder.finish()?;
    let registry = Arc::clone(circuit.registry());
    let input_state = QuantumState::from_named_terms(
        Arc::clone(&registry),
        &[(&[("in_H", 1)], h / norm), (&[("in_V", 1)], v / norm)],
    )?;
    let target_state = match kind {
        EntanglementKind::Bell { .. } | EntanglementKind::Ghz { .. } => {
            let n = qubits.len();
            polarization_state(
                &registry,
                &qubits,
                &[(vec![false; n], h), (vec![true; n], v)],
            )?
        }
        EntanglementKind::Shor9 { .. } => {
            polarization_state(&registry, &qubits, &shor_code_terms(h, v))?
        }
    };
    Ok(EntanglementSource {
        circuit,
        input_state,
        target_state,
        qubits,
    })
}

/// Expansion of `h|0_L⟩ + v|1_L⟩` with
/// `|0_L⟩, |1_L⟩ = ((|000⟩ ± |111⟩)/√2)^{⊗3}`.
fn shor_code_terms(h: Complex64, v: Complex64) -> Vec<(Vec<bool>, Complex64)> {
    let mut terms = Vec::with_capacity(8);
    for pattern in 0..8u32 {
        let bits: Vec<bool> = (0..3)
            .flat_map(|blk| [pattern >> blk & 1 == 1; 3])
            .collect();
        let flipped = pattern.count_ones() as i32;
        let sign = if flipped % 2 == 0 { 1.0 } else { -1.0 };
        let amp = (h + v * sign) / (2.0 * SQRT_2);
        terms.push((bits, amp));
    }
    terms
}
