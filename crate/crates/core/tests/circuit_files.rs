use std::path::PathBuf;

use cpc_core::circuits::{build_doubling_cascade, run, CascadeMethod};
use cpc_core::io::load_circuit_file;

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../book/src/examples")
        .join(name)
}

#[test]
fn shipped_doubler_cascade_matches_builder() {
    let file = load_circuit_file(&example("doubler-cascade-d3.json")).unwrap();
    assert_eq!(file.circuit.cpc_stage_count(), 3 * (8 - 1));
    let built = build_doubling_cascade(3, CascadeMethod::NondegenerateWithConversion).unwrap();
    assert_eq!(file.circuit, built.circuit);

    let r = run(&file.circuit, &file.input.unwrap()).unwrap();
    assert!((r.success_probability - 1.0).abs() < 1e-12);
    let out = r.final_state.unwrap();
    let pattern: Vec<(&str, u32)> = built.output_modes.iter().map(|m| (m.as_str(), 1)).collect();
    assert!((out.probability_of(&pattern).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn missing_file_is_a_parse_error() {
    let err = load_circuit_file(&example("no-such-file.json")).unwrap_err();
    assert_eq!(err.kind(), "parse-error");
}
