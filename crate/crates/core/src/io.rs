//! Angle strings and the JSON circuit file format.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::circuits::{Circuit, CircuitElement, FilterPolicy};
use crate::coupling::{Coupling, CouplingKind};
use crate::error::{CpcError, Result};
use crate::fock::{ModeRegistry, QuantumState};

/// Parses an angle: a plain number is radians, a `pi` (or `π`) suffix means
/// multiples of π, e.g. `0.5pi`, `-2pi`, `pi`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || CpcError::invalid(format!("cannot parse angle `{text}`"));
    let value = if let Some(head) = t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
        let head = head.trim_end_matches('*').trim();
        let factor = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| bad())?,
        };
        factor * PI
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// An angle in a file: a JSON number (radians) or a string accepted by
/// [`parse_angle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleValue {
    Radians(f64),
    Text(String),
}

impl AngleValue {
    pub fn radians(&self) -> Result<f64> {
        match self {
            AngleValue::Radians(r) => Ok(*r),
            AngleValue::Text(s) => parse_angle(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementDocument {
    Cpc {
        coupling: CouplingKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<[f64; 2]>,
        theta: AngleValue,
    },
    BeamSplitter {
        modes: [String; 2],
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
    Relabel {
        map: BTreeMap<String, String>,
    },
}

/// On-disk circuit. `input`, when present, is a Fock state given as
/// occupations of named modes; unlisted modes are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDocument {
    pub modes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<BTreeMap<String, u32>>,
    #[serde(default)]
    pub elements: Vec<ElementDocument>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitFile {
    pub circuit: Circuit,
    pub input: Option<QuantumState>,
}

fn at_element(index: usize, message: impl std::fmt::Display) -> CpcError {
    CpcError::Parse {
        location: format!("element {index}"),
        message: message.to_string(),
    }
}

fn element_from_document(doc: ElementDocument) -> Result<CircuitElement> {
    Ok(match doc {
        ElementDocument::Cpc {
            coupling,
            phase,
            theta,
        } => {
            let phase = phase.map_or(Complex64::new(1.0, 0.0), |[re, im]| Complex64::new(re, im));
            CircuitElement::cpc(Coupling::new(coupling, phase)?, theta.radians()?)
        }
        ElementDocument::BeamSplitter {
            modes: [m1, m2],
            transmissivity,
        } => CircuitElement::beam_splitter(&m1, &m2, transmissivity),
        ElementDocument::Filter { pattern, policy } => CircuitElement::Filter { pattern, policy },
        ElementDocument::Herald { mode, occupation } => CircuitElement::herald(&mode, occupation),
        ElementDocument::Relabel { map } => CircuitElement::Relabel { map },
    })
}

fn element_to_document(element: &CircuitElement) -> ElementDocument {
    match element {
        CircuitElement::CpcGate { coupling, theta } => {
            let p = coupling.phase();
            ElementDocument::Cpc {
                coupling: coupling.kind().clone(),
                phase: (p != Complex64::new(1.0, 0.0)).then_some([p.re, p.im]),
                theta: AngleValue::Radians(*theta),
            }
        }
        CircuitElement::BeamSplitter {
            mode1,
            mode2,
            transmissivity,
        } => ElementDocument::BeamSplitter {
            modes: [mode1.clone(), mode2.clone()],
            transmissivity: *transmissivity,
        },
        CircuitElement::Filter { pattern, policy } => ElementDocument::Filter {
            pattern: pattern.clone(),
            policy: *policy,
        },
        CircuitElement::Herald { mode, occupation } => ElementDocument::Herald {
            mode: mode.clone(),
            occupation: *occupation,
        },
        CircuitElement::Relabel { map } => ElementDocument::Relabel { map: map.clone() },
    }
}

impl CircuitDocument {
    pub fn from_circuit(circuit: &Circuit, input: Option<BTreeMap<String, u32>>) -> Self {
        CircuitDocument {
            modes: circuit.registry().names().map(str::to_string).collect(),
            input,
            elements: circuit.elements().iter().map(element_to_document).collect(),
        }
    }
}

/// Parses circuit JSON. Errors carry the line and column for malformed JSON
/// and the element index for invalid elements.
pub fn parse_circuit(text: &str) -> Result<CircuitFile> {
    let json_error = |e: serde_json::Error| CpcError::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    };
    let mut root: serde_json::Map<String, Value> =
        serde_json::from_str(text).map_err(json_error)?;
    let raw_elements = match root.remove("elements") {
        None => Vec::new(),
        Some(Value::Array(items)) => items,
        Some(_) => {
            return Err(CpcError::Parse {
                location: "elements".into(),
                message: "expected an array".into(),
            })
        }
    };
    let header: CircuitDocument =
        serde_json::from_value(Value::Object(root)).map_err(|e| CpcError::Parse {
            location: "header".into(),
            message: e.to_string(),
        })?;
    let registry =
        Arc::new(
            ModeRegistry::new(header.modes.iter()).map_err(|e| CpcError::Parse {
                location: "modes".into(),
                message: e.to_string(),
            })?,
        );

    let mut elements = Vec::with_capacity(raw_elements.len());
    for (i, raw) in raw_elements.into_iter().enumerate() {
        let doc: ElementDocument = serde_json::from_value(raw).map_err(|e| at_element(i, e))?;
        let element = element_from_document(doc).map_err(|e| at_element(i, e))?;
        if let Some(m) = element.modes().into_iter().find(|m| !registry.contains(m)) {
            return Err(at_element(i, format!("undeclared mode `{m}`")));
        }
        elements.push(element);
    }
    let circuit = Circuit::new(Arc::clone(&registry), elements)?;

    let input = match header.input {
        None => None,
        Some(occ) => {
            let pairs: Vec<(&str, i64)> = occ
                .iter()
                .map(|(m, &n)| (m.as_str(), i64::from(n)))
                .collect();
            Some(
                QuantumState::fock(registry, &pairs).map_err(|e| CpcError::Parse {
                    location: "input".into(),
                    message: e.to_string(),
                })?,
            )
        }
    };
    Ok(CircuitFile { circuit, input })
}

pub fn load_circuit_file(path: &Path) -> Result<CircuitFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CpcError::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_circuit(&text)
}

pub fn circuit_to_json(circuit: &Circuit, input: Option<BTreeMap<String, u32>>) -> String {
    serde_json::to_string_pretty(&CircuitDocument::from_circuit(circuit, input))
        .expect("circuit documents serialize")
}
