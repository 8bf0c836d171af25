//! `cpc`: command-line front end for the coupling simulator.

mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpc_core::calibration::{self, ExperimentParams};
use cpc_core::circuits;
use cpc_core::detectors::{self, CascadeSpec, DetectorModel, SimulationConfig};
use cpc_core::io::{load_circuit_file, parse_angle};
use cpc_core::sources::{self, DcInput, HeraldedSourceConfig, RevivalScanConfig};
use cpc_core::{evolve, Coupling, CpcError, ModeRegistry, QuantumState};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use output::{Cell, Format, Manifest, Output, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CpcError),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage-error",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "io-error",
        }
    }

    /// 2 for anything the caller got wrong, 1 for failures during the run.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(
                CpcError::InvalidArgument(_) | CpcError::UnknownMode(_) | CpcError::Parse { .. },
            ) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "cpc", version, about = "Cascaded pumped-coupling simulator")]
struct Cli {
    /// Output file; defaults to $CPC_OUTPUT_DIR/<subcommand>.<ext>, else stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format; revival-scan defaults to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a Fock state under one coupling.
    Evolve(EvolveArgs),
    /// Find revival peaks of |n00⟩ under the nondegenerate coupling.
    RevivalScan(RevivalScanArgs),
    /// Filtered coherent pulse followed by a heralding doubler.
    HeraldedSource(HeraldedSourceArgs),
    /// Pair generation after whole |200⟩ oscillations.
    ImprovedDc(ImprovedDcArgs),
    /// Coincidence detection behind a doubling cascade.
    DetectorCascade(DetectorCascadeArgs),
    /// Interaction strength from measured pair rates.
    Calibrate(CalibrateArgs),
    /// Run a circuit file.
    CircuitRun(CircuitRunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evolve(_) => "evolve",
            Command::RevivalScan(_) => "revival-scan",
            Command::HeraldedSource(_) => "heralded-source",
            Command::ImprovedDc(_) => "improved-dc",
            Command::DetectorCascade(_) => "detector-cascade",
            Command::Calibrate(_) => "calibrate",
            Command::CircuitRun(_) => "circuit-run",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::RevivalScan(_) => Format::Csv,
            _ => Format::Json,
        }
    }

    fn config(&self) -> Value {
        let v = match self {
            Command::Evolve(a) => serde_json::to_value(a),
            Command::RevivalScan(a) => serde_json::to_value(a),
            Command::HeraldedSource(a) => serde_json::to_value(a),
            Command::ImprovedDc(a) => serde_json::to_value(a),
            Command::DetectorCascade(a) => serde_json::to_value(a),
            Command::Calibrate(a) => serde_json::to_value(a),
            Command::CircuitRun(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }

    fn run(&self) -> Result<Output, CliError> {
        match self {
            Command::Evolve(a) => run_evolve(a),
            Command::RevivalScan(a) => run_revival_scan(a),
            Command::HeraldedSource(a) => run_heralded_source(a),
            Command::ImprovedDc(a) => run_improved_dc(a),
            Command::DetectorCascade(a) => run_detector_cascade(a),
            Command::Calibrate(a) => run_calibrate(a),
            Command::CircuitRun(a) => run_circuit(a),
        }
    }
}

fn angle(s: &str) -> Result<f64, String> {
    parse_angle(s).map_err(|e| e.to_string())
}

/// A value already in units of π; an optional `pi` suffix is accepted.
fn pi_units(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let head = t
        .strip_suffix("pi")
        .or_else(|| t.strip_suffix('π'))
        .unwrap_or(t);
    match head.trim() {
        "" => Ok(1.0),
        h => h
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("cannot parse `{s}` as a multiple of π")),
    }
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Shape {
    Nondegenerate,
    Degenerate,
    Converter,
}

#[derive(Args, Serialize)]
struct EvolveArgs {
    /// Occupations, as digits (`100`) or comma separated (`1,0,12`).
    #[arg(long)]
    input: String,
    /// Radians, or `Xpi`.
    #[arg(long, value_parser = angle)]
    theta: f64,
    #[arg(long, value_enum, default_value = "nondegenerate")]
    coupling: Shape,
    /// Comma-separated mode names; default `a,b,c`, `a,b` or `a,c`.
    #[arg(long)]
    modes: Option<String>,
    /// Pump phase φ; the coupling carries e^{iφ}.
    #[arg(long, value_parser = angle, default_value = "0")]
    phase: f64,
}

#[derive(Args, Serialize)]
struct RevivalScanArgs {
    /// Input photon number.
    #[arg(long)]
    n: u32,
    /// Scan range in units of π (`2` and `2pi` both mean 2π).
    #[arg(long, value_parser = pi_units)]
    theta_max: f64,
    /// Report peaks with transmission above this value.
    #[arg(long, default_value_t = 0.9)]
    floor: f64,
    /// Coarse grid spacing in units of π.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
}

#[derive(Args, Serialize)]
struct HeraldedSourceArgs {
    /// Mean photon number |α|² of the input pulse.
    #[arg(long, default_value_t = 1.5)]
    alpha_sq: f64,
    /// Number of filtering steps.
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, value_parser = angle, default_value = "pi")]
    theta: f64,
    /// Stop after the filters, without the heralding doubler.
    #[arg(long)]
    no_doubler: bool,
}

#[derive(Args, Serialize)]
#[group(skip)]
#[command(group(clap::ArgGroup::new("dc_input").required(true).multiple(false)))]
struct ImprovedDcArgs {
    /// Number of full |200⟩ oscillations.
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Coherent input with this mean photon number.
    #[arg(long, group = "dc_input")]
    alpha_sq: Option<f64>,
    /// Photon-number mixture, e.g. `1:0.5,2:0.5`.
    #[arg(long, group = "dc_input")]
    fock: Option<String>,
    /// Coherent inputs at |α|² = j/N for j = 1..=N.
    #[arg(long, group = "dc_input")]
    scan: Option<usize>,
}

#[derive(Args, Serialize)]
struct DetectorCascadeArgs {
    /// Doubling stages; the cascade has 2^depth outputs.
    #[arg(long, default_value_t = 3)]
    depth: u32,
    /// Coincidence threshold.
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    eta_dbl: f64,
    /// Dark-count probability per detector per pulse.
    #[arg(long, default_value_t = 0.0)]
    dark: f64,
    /// Detect the undoubled photon when a doubling fails.
    #[arg(long)]
    residual: bool,
    /// Tabulate efficiency for every k over N+1 evenly spaced η in [0, 1].
    #[arg(long)]
    sweep: Option<usize>,
    /// Run a Monte Carlo counting experiment with this many pulses.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 1e-2)]
    photon_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct CalibrateArgs {
    /// ExperimentParams JSON file.
    #[arg(long)]
    params: PathBuf,
    /// Pump power in mW, overriding the file.
    #[arg(long)]
    power: Option<f64>,
}

#[derive(Args, Serialize)]
struct CircuitRunArgs {
    /// Circuit JSON file.
    #[arg(long)]
    circuit: PathBuf,
    /// Input Fock state, e.g. `a=1,b=0`; overrides the file's input.
    #[arg(long)]
    input: Option<String>,
}

fn parse_occupations(text: &str, count: usize) -> Result<Vec<u32>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse occupations `{text}`"));
    let values: Vec<u32> = if text.contains(',') {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    } else {
        text.chars()
            .map(|c| c.to_digit(10).ok_or_else(bad))
            .collect::<Result<_, _>>()?
    };
    if values.len() != count {
        return Err(CliError::Usage(format!(
            "input `{text}` has {} occupations for {count} modes",
            values.len()
        )));
    }
    Ok(values)
}

fn state_rows(table: &mut Table, state: &QuantumState) {
    for (basis, amp) in state.amplitudes() {
        let mut row: Vec<Cell> = basis.occupations().iter().map(|&n| n.into()).collect();
        row.extend([amp.re.into(), amp.im.into(), amp.norm_sqr().into()]);
        table.row(row);
    }
}

fn state_table(state: &QuantumState) -> Table {
    let mut table = Table::new(state.registry().names().chain(["re", "im", "probability"]));
    state_rows(&mut table, state);
    table
}

fn populations(state: &QuantumState) -> Vec<Value> {
    state
        .amplitudes()
        .iter()
        .map(|(b, a)| json!({ "ket": b.ket(), "probability": a.norm_sqr() }))
        .collect()
}

fn run_evolve(args: &EvolveArgs) -> Result<Output, CliError> {
    let default_modes = match args.coupling {
        Shape::Nondegenerate => "a,b,c",
        Shape::Degenerate => "a,b",
        Shape::Converter => "a,c",
    };
    let names: Vec<String> = args
        .modes
        .as_deref()
        .unwrap_or(default_modes)
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let coupling = match (args.coupling, names.as_slice()) {
        (Shape::Nondegenerate, [a, b, c]) => Coupling::nondegenerate(a, b, c)?,
        (Shape::Degenerate, [a, b]) => Coupling::degenerate(a, b)?,
        (Shape::Converter, [a, c]) => Coupling::converter(a, c)?,
        _ => {
            return Err(CliError::Usage(format!(
                "wrong number of modes for a {:?} coupling",
                args.coupling
            )))
        }
    };
    let coupling = coupling.with_phase(Complex64::from_polar(1.0, args.phase))?;
    let registry = Arc::new(ModeRegistry::new(names.iter())?);
    let occ = parse_occupations(&args.input, names.len())?;
    let pairs: Vec<(&str, i64)> = names
        .iter()
        .map(String::as_str)
        .zip(occ.iter().map(|&n| i64::from(n)))
        .collect();
    let input = QuantumState::fock(registry, &pairs)?;
    let out = evolve(&input, &coupling, args.theta)?;
    Ok(Output {
        result: json!({
            "coupling": coupling.kind(),
            "phase": [coupling.phase().re, coupling.phase().im],
            "theta": out.theta,
            "input": input.to_document(),
            "subspace_dims": out.subspace_dims,
            "state": out.state.to_document(),
            "populations": populations(&out.state),
        }),
        table: state_table(&out.state),
        seed: None,
    })
}

fn run_revival_scan(args: &RevivalScanArgs) -> Result<Output, CliError> {
    let config = RevivalScanConfig {
        theta_max_over_pi: args.theta_max,
        coarse_step_over_pi: args.step,
        transmission_floor: args.floor,
    };
    let peaks = sources::revival_scan(args.n, &config)?;
    let mut table = Table::new(["theta_over_pi", "transmission"]);
    for p in &peaks {
        table.row(vec![p.theta_over_pi.into(), p.transmission.into()]);
    }
    Ok(Output {
        result: json!({ "n": args.n, "theta_max_over_pi": args.theta_max, "peaks": peaks }),
        table,
        seed: None,
    })
}

fn run_heralded_source(args: &HeraldedSourceArgs) -> Result<Output, CliError> {
    if !(args.alpha_sq.is_finite() && args.alpha_sq >= 0.0) {
        return Err(CliError::Usage("--alpha-sq must be non-negative".into()));
    }
    let mut config =
        HeraldedSourceConfig::new(Complex64::new(args.alpha_sq.sqrt(), 0.0), args.steps)
            .with_theta(args.theta);
    config.with_final_doubler = !args.no_doubler;
    let report = sources::heralded_source(&config)?;
    let mut table = Table::new(["photons", "probability"]);
    for (&n, &p) in &report.output_distribution {
        table.row(vec![n.into(), p.into()]);
    }
    table.note(
        "production_efficiency",
        output::float(report.production_efficiency),
    );
    table.note(
        "absolute_efficiency",
        output::float(report.absolute_efficiency),
    );
    table.note("higher_order_mass", output::float(report.higher_order_mass));
    Ok(Output {
        result: serde_json::to_value(&report).expect("reports serialize"),
        table,
        seed: None,
    })
}

fn parse_mixture(text: &str) -> Result<BTreeMap<u32, f64>, CliError> {
    text.split(',')
        .map(|item| {
            let (n, p) = item
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("mixture entry `{item}` is not `n:p`")))?;
            let n = n
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad photon number in `{item}`")))?;
            let p = p
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad probability in `{item}`")))?;
            Ok((n, p))
        })
        .collect()
}

fn run_improved_dc(args: &ImprovedDcArgs) -> Result<Output, CliError> {
    let mut inputs: Vec<(Option<f64>, DcInput)> = Vec::new();
    if let Some(x) = args.alpha_sq {
        if !(x.is_finite() && x >= 0.0) {
            return Err(CliError::Usage("--alpha-sq must be non-negative".into()));
        }
        inputs.push((Some(x), DcInput::Coherent(Complex64::new(x.sqrt(), 0.0))));
    }
    if let Some(text) = &args.fock {
        inputs.push((None, DcInput::FockMixture(parse_mixture(text)?)));
    }
    if let Some(n) = args.scan {
        if n == 0 {
            return Err(CliError::Usage("--scan needs at least one point".into()));
        }
        for j in 1..=n {
            let x = j as f64 / n as f64;
            inputs.push((Some(x), DcInput::Coherent(Complex64::new(x.sqrt(), 0.0))));
        }
    }
    let mut table = Table::new([
        "alpha_sq",
        "emission_probability",
        "single_pair_probability",
        "cpc_fidelity",
        "spdc_fidelity",
    ]);
    let mut results = Vec::new();
    for (alpha_sq, input) in &inputs {
        let r = sources::improved_dc(input, args.m)?;
        table.row(vec![
            alpha_sq.map_or(Cell::Text(String::new()), Cell::Float),
            r.total_emission_probability.into(),
            r.single_pair_probability.into(),
            r.heralded_fidelity.into(),
            r.spdc_reference.heralded_fidelity.into(),
        ]);
        results.push(json!({ "alpha_sq": alpha_sq, "report": r }));
    }
    table.note("theta", output::float(sources::dc_theta(args.m)));
    Ok(Output {
        result: json!({ "m": args.m, "theta": sources::dc_theta(args.m), "points": results }),
        table,
        seed: None,
    })
}

fn run_detector_cascade(args: &DetectorCascadeArgs) -> Result<Output, CliError> {
    let spec = CascadeSpec::new(args.depth, args.k, args.eta_dbl, args.residual)?;
    let model = DetectorModel::new(args.eta, args.dark)?;
    let n = spec.leaves();
    let distribution = detectors::click_distribution(&spec, &model)?;
    let mut by_k = Vec::new();
    let mut table;
    for k in 1..=n {
        let s = CascadeSpec { k, ..spec };
        by_k.push(json!({
            "k": k,
            "effective_efficiency": detectors::effective_efficiency(&s, &model)?,
            "dark_click_probability": detectors::dark_click_probability(&s, &model)?,
        }));
    }
    let mut sweep = Vec::new();
    if let Some(points) = args.sweep {
        if points == 0 {
            return Err(CliError::Usage(
                "--sweep needs at least one interval".into(),
            ));
        }
        table =
            Table::new(std::iter::once("eta".to_string()).chain((1..=n).map(|k| format!("k{k}"))));
        for j in 0..=points {
            let eta = j as f64 / points as f64;
            let m = DetectorModel { eta, ..model };
            let mut row: Vec<Cell> = vec![eta.into()];
            let mut effs = Vec::new();
            for k in 1..=n {
                let e = detectors::effective_efficiency(&CascadeSpec { k, ..spec }, &m)?;
                row.push(e.into());
                effs.push(e);
            }
            table.row(row);
            sweep.push(json!({ "eta": eta, "effective_efficiency": effs }));
        }
    } else {
        table = Table::new(["k", "effective_efficiency", "dark_click_probability"]);
        for entry in &by_k {
            table.row(vec![
                Cell::Int(entry["k"].as_u64().expect("k is an integer")),
                entry["effective_efficiency"]
                    .as_f64()
                    .expect("float")
                    .into(),
                entry["dark_click_probability"]
                    .as_f64()
                    .expect("float")
                    .into(),
            ]);
        }
    }
    let simulation = match args.trials {
        Some(trials) => {
            let config = SimulationConfig {
                trials,
                photon_prob: args.photon_prob,
                seed: args.seed,
            };
            let report = detectors::simulate_counts(&spec, &model, &config)?;
            table.note("signal_counts", report.signal_counts);
            table.note("noise_counts", report.noise_counts);
            table.note(
                "snr",
                report.snr.map_or("undefined".to_string(), output::float),
            );
            Some(report)
        }
        None => None,
    };
    let seed = simulation.as_ref().map(|r| r.seed);
    Ok(Output {
        result: json!({
            "spec": spec,
            "model": model,
            "outputs": n,
            "effective_efficiency": detectors::effective_efficiency(&spec, &model)?,
            "dark_click_probability": detectors::dark_click_probability(&spec, &model)?,
            "click_distribution": distribution,
            "doubling_threshold": detectors::doubling_threshold(args.eta).ok(),
            "residual_efficiency": detectors::residual_efficiency(args.eta, args.eta_dbl)?,
            "by_k": by_k,
            "sweep": (!sweep.is_empty()).then_some(sweep),
            "simulation": simulation,
        }),
        table,
        seed,
    })
}

fn run_calibrate(args: &CalibrateArgs) -> Result<Output, CliError> {
    let text = std::fs::read_to_string(&args.params)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.params.display())))?;
    let mut params: ExperimentParams =
        serde_json::from_str(&text).map_err(|e| CpcError::Parse {
            location: format!(
                "{} line {}, column {}",
                args.params.display(),
                e.line(),
                e.column()
            ),
            message: e.to_string(),
        })?;
    if let Some(p) = args.power {
        params.pump_power = p;
    }
    let report = calibration::calibrate(&params)?;
    let mut table = Table::new(["quantity", "value"]);
    table.row(vec![
        Cell::Text("kappa_per_sqrt_mw".into()),
        report.kappa.into(),
    ]);
    table.row(vec![
        Cell::Text("theta_at_pump_power".into()),
        report.theta.into(),
    ]);
    for r in &report.requirements {
        table.row(vec![
            Cell::Text(format!("power_mw_for_theta_{}", output::float(r.theta))),
            r.power_mw.into(),
        ]);
    }
    table.note("interpretation", &report.interpretation);
    for w in &report.warnings {
        table.note("warning", w);
    }
    Ok(Output {
        result: serde_json::to_value(&report).expect("reports serialize"),
        table,
        seed: None,
    })
}

fn run_circuit(args: &CircuitRunArgs) -> Result<Output, CliError> {
    let file = load_circuit_file(&args.circuit)?;
    let circuit = file.circuit;
    let input = match &args.input {
        Some(text) => {
            let mut pairs = Vec::new();
            for item in text.split(',').filter(|s| !s.trim().is_empty()) {
                let (m, n) = item.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!("input entry `{item}` is not `mode=n`"))
                })?;
                let n: i64 = n
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad occupation in `{item}`")))?;
                pairs.push((m.trim().to_string(), n));
            }
            let refs: Vec<(&str, i64)> = pairs.iter().map(|(m, n)| (m.as_str(), *n)).collect();
            QuantumState::fock(Arc::clone(circuit.registry()), &refs)?
        }
        None => file
            .input
            .ok_or_else(|| CliError::Usage("circuit file has no input; pass --input".into()))?,
    };
    let run = circuits::run(&circuit, &input)?;
    let mut table = Table::new(["index", "element", "probability"]);
    for e in &run.event_log {
        table.row(vec![
            Cell::Int(e.index as u64),
            Cell::Text(e.element.clone()),
            e.probability.into(),
        ]);
    }
    table.note(
        "success_probability",
        output::float(run.success_probability),
    );
    Ok(Output {
        result: json!({
            "elements": circuit.elements().len(),
            "cpc_stages": circuit.cpc_stage_count(),
            "success_probability": run.success_probability,
            "failed": run.failed(),
            "event_log": run.event_log,
            "final_state": run.final_state.as_ref().map(QuantumState::to_document),
            "populations": run.final_state.as_ref().map(populations),
        }),
        table,
        seed: None,
    })
}

fn report_error(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let obj =
        json!({ "error": { "kind": err.kind(), "message": err.to_string(), "exit_code": code } });
    eprintln!("{obj}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_error(&CliError::Usage(e.render().to_string().trim().to_string())),
    };
    let started = Instant::now();
    let result = cli.command.run();
    let out = match result {
        Ok(out) => out,
        Err(e) => return report_error(&e),
    };
    let format = cli.format.unwrap_or_else(|| cli.command.default_format());
    let mut config = cli.command.config();
    if let Value::Object(map) = &mut config {
        map.insert(
            "format".into(),
            serde_json::to_value(format).expect("format serializes"),
        );
    }
    let manifest = Manifest {
        tool: "cpc",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name(),
        config,
        seed: out.seed,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    let text = output::render(&manifest, &out, format);
    match output::destination(cli.output.as_deref(), cli.command.name(), format) {
        Some(path) => {
            if let Err(e) = output::write_atomic(&path, &text) {
                return report_error(&e);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}
