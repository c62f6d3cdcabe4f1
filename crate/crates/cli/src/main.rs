use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use qdesc_core::circuit_file::parse_circuit;
use qdesc_core::engine::{run_with_trace, Circuit};
use qdesc_core::experiments::{
    differential_check, random_circuit, run_experiment, trace_rows, Axis, DifferentialReport, ExperimentParams,
    TraceRow,
};
use qdesc_core::provenance::{audit, flow_dot, DEFAULT_PROBES};
use qdesc_core::tomography::bloch_components;

/// Heisenberg-picture descriptor simulator for qubit networks.
#[derive(Parser)]
#[command(name = "qdesc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve descriptors and print final components and Bloch vectors.
    Simulate {
        file: PathBuf,
        /// Print every step, not just the final descriptors.
        #[arg(long)]
        trace: bool,
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
    },
    /// Compare step-wise, global and dense-oracle results.
    CompareOracle {
        file: PathBuf,
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
    },
    /// Provenance tags, numerical dependence and locality audit.
    Audit {
        file: PathBuf,
        #[arg(long, value_name = "OUT")]
        dot: Option<PathBuf>,
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PROBES)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a canned experiment and check its claims.
    Demo {
        experiment: Experiment,
        /// Euler angles `a,b,c`.
        #[arg(long, value_parser = parse_triple)]
        phi: Option<[f64; 3]>,
        /// `re,im`.
        #[arg(long, value_parser = parse_pair)]
        eta: Option<[f64; 2]>,
        /// Second eta for the comparison, `re,im`.
        #[arg(long, value_parser = parse_pair)]
        eta2: Option<[f64; 2]>,
        #[arg(long, default_value_t = 0)]
        chain: usize,
        #[arg(long)]
        decohere: bool,
        /// Scramble the environment with random Clifford gates (needs --decohere).
        #[arg(long)]
        scramble: bool,
        /// Rotation of wire 1 before the eta preparation, `axis:angle`.
        #[arg(long, value_parser = parse_rotation)]
        prerotate: Option<(Axis, f64)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
    },
    /// Differential sweep over random circuits.
    Fuzz {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Teleport,
    Telephone,
    Eta,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Teleport => "teleport",
            Experiment::Telephone => "telephone",
            Experiment::Eta => "eta",
        }
    }
}

fn parse_reals<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number '{p}'")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_reals::<3>(s)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_reals::<2>(s)
}

fn parse_rotation(s: &str) -> Result<(Axis, f64), String> {
    let (axis, angle) = s.split_once(':').ok_or("expected axis:angle")?;
    Ok((axis.parse()?, angle.parse().map_err(|_| format!("bad angle '{angle}'"))?))
}

/// Error with the exit code it maps to.
struct Failure(u8, String);

type CmdResult = Result<bool, Failure>;

fn fail<E: std::fmt::Display>(e: E) -> Failure {
    Failure(1, e.to_string())
}

fn load(path: &Path) -> Result<Circuit, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(2, format!("{}: {e}", path.display())))?;
    parse_circuit(&text).map_err(|d| Failure(2, format!("{}:{d}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(fail)?;
    fs::write(path, text + "\n").map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn fmt_bloch(b: [f64; 3]) -> String {
    format!("({:.6}, {:.6}, {:.6})", b[0], b[1], b[2])
}

#[derive(Serialize)]
struct FinalWire {
    wire: usize,
    x: String,
    z: String,
    bloch: [f64; 3],
}

#[derive(Serialize)]
struct SimulateReport {
    schema: &'static str,
    wires: usize,
    depth: usize,
    descriptors: Vec<FinalWire>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<TraceRow>>,
}

fn simulate(file: &Path, show_trace: bool, json: Option<&Path>) -> CmdResult {
    let circuit = load(file)?;
    let trace = run_with_trace(&circuit).map_err(fail)?;
    if show_trace {
        for (t, snap) in trace.snapshots.iter().enumerate() {
            println!("t={t}");
            for d in snap.descriptors() {
                println!("  q{}: x = {}", d.wire(), d.x());
                println!("  q{}: z = {}", d.wire(), d.z());
            }
        }
    }
    let last = trace.last();
    let mut descriptors = Vec::new();
    for d in last.descriptors() {
        let bloch = bloch_components(last, d.wire()).map_err(fail)?;
        if !show_trace {
            println!("q{}: x = {}", d.wire(), d.x());
            println!("q{}: z = {}", d.wire(), d.z());
        }
        descriptors.push(FinalWire { wire: d.wire(), x: d.x().to_string(), z: d.z().to_string(), bloch });
    }
    for d in &descriptors {
        println!("bloch q{} = {}", d.wire, fmt_bloch(d.bloch));
    }
    if let Some(out) = json {
        let report = SimulateReport {
            schema: "qdesc-simulate/1",
            wires: circuit.n(),
            depth: circuit.depth(),
            descriptors,
            trace: show_trace.then(|| trace_rows(&trace)),
        };
        write_json(out, &report)?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct CompareReport<'a> {
    schema: &'static str,
    #[serde(flatten)]
    result: &'a DifferentialReport,
}

fn print_differential(r: &DifferentialReport) {
    match r.step_vs_global {
        Some(d) => println!("step vs global: max coefficient diff {d:.3e}"),
        None => println!("step vs global: skipped ({} wires is above {})", r.wires, qdesc_core::experiments::GLOBAL_LIMIT),
    }
    println!("tomography vs oracle: max entry diff {:.3e} (worst subset {:?})", r.density_vs_oracle, r.worst_subset);
    println!("locality violations: {}", r.locality_violations.len());
}

fn compare_oracle(file: &Path, json: Option<&Path>) -> CmdResult {
    let circuit = load(file)?;
    let r = differential_check(&circuit).map_err(fail)?;
    print_differential(&r);
    println!("{}", if r.passed { "PASS" } else { "FAIL: divergence above 1e-9" });
    if let Some(out) = json {
        write_json(out, &CompareReport { schema: "qdesc-compare/1", result: &r })?;
    }
    Ok(r.passed)
}

fn run_audit(file: &Path, dot: Option<&Path>, json: Option<&Path>, probes: usize, seed: u64) -> CmdResult {
    let circuit = load(file)?;
    let report = audit(&circuit, probes, seed).map_err(fail)?;
    println!("parameters: {}", if report.parameters.is_empty() { "none".into() } else { report.parameters.join(", ") });
    for e in &report.entries {
        if e.time == 0 {
            continue;
        }
        let tags: Vec<_> = e.tags.union().into_iter().collect();
        let numerical: Vec<_> = e.numerical.iter().filter(|(_, &v)| v).map(|(k, _)| k.as_str()).collect();
        println!(
            "t={} q{}: tags {{{}}} numerical {{{}}} bloch {}",
            e.time,
            e.wire,
            tags.join(","),
            numerical.join(","),
            fmt_bloch(e.bloch)
        );
    }
    for v in &report.locality_violations {
        println!("locality violation: wire {} at step {}", v.wire, v.time);
    }
    for (w, t, p) in &report.soundness_failures {
        println!("unsound tag: q{w}({t}) depends on {p} without a tag");
    }
    println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    if let Some(out) = dot {
        let trace = run_with_trace(&circuit).map_err(fail)?;
        fs::write(out, flow_dot(&trace)).map_err(|e| fail(format!("{}: {e}", out.display())))?;
    }
    if let Some(out) = json {
        write_json(out, &report)?;
    }
    Ok(report.passed())
}

fn demo(experiment: Experiment, params: ExperimentParams, json: Option<&Path>) -> CmdResult {
    let report = run_experiment(experiment.name(), &params).map_err(|e| Failure(2, e.to_string()))?;
    println!("experiment {} ({})", report.experiment, report.parameters);
    for c in &report.claims {
        let mark = if c.pass { "pass" } else { "FAIL" };
        let step = c.step.map(|t| format!(" [t={t}]")).unwrap_or_default();
        println!("  {mark} {}{step}: {} (expected {})", c.id, c.observed, c.expected);
    }
    let failed = report.failures().count();
    println!("{}/{} claims passed", report.claims.len() - failed, report.claims.len());
    if let Some(out) = json {
        write_json(out, &report)?;
    }
    Ok(report.passed)
}

#[derive(Serialize)]
struct FuzzCase {
    seed: u64,
    #[serde(flatten)]
    result: DifferentialReport,
}

#[derive(Serialize)]
struct FuzzReport {
    schema: &'static str,
    wires: usize,
    depth: usize,
    cases: Vec<FuzzCase>,
    failures: usize,
}

fn fuzz(n: usize, depth: usize, seeds: u64, start: u64, json: Option<&Path>) -> CmdResult {
    if n == 0 || n > qdesc_core::pauli::DENSE_LIMIT {
        return Err(Failure(2, format!("--n must be in 1..={}", qdesc_core::pauli::DENSE_LIMIT)));
    }
    let cases = (start..start + seeds)
        .into_par_iter()
        .map(|seed| {
            let c = random_circuit(n, depth, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(fail)?;
            Ok(FuzzCase { seed, result: differential_check(&c).map_err(fail)? })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let failures = cases.iter().filter(|c| !c.result.passed).count();
    for c in cases.iter().filter(|c| !c.result.passed) {
        println!("seed {}: FAIL", c.seed);
        print_differential(&c.result);
    }
    println!("{}/{} random circuits passed (n={n}, depth={depth})", cases.len() - failures, cases.len());
    if let Some(out) = json {
        write_json(out, &FuzzReport { schema: "qdesc-fuzz/1", wires: n, depth, cases, failures })?;
    }
    Ok(failures == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { file, trace, json } => simulate(&file, trace, json.as_deref()),
        Command::CompareOracle { file, json } => compare_oracle(&file, json.as_deref()),
        Command::Audit { file, dot, json, probes, seed } => {
            run_audit(&file, dot.as_deref(), json.as_deref(), probes, seed)
        }
        Command::Demo { experiment, phi, eta, eta2, chain, decohere, scramble, prerotate, seed, json } => {
            let params = ExperimentParams {
                phi,
                eta,
                eta2,
                chain,
                decohere,
                scramble,
                prerotation: prerotate,
                seed,
                ..Default::default()
            };
            demo(experiment, params, json.as_deref())
        }
        Command::Fuzz { n, depth, seeds, start, json } => fuzz(n, depth, seeds, start, json.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
