//! `sip`: run streaming proof protocols and print cost tables.

use std::fs;
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{CommandFactory, Parser, ValueEnum};
use serde_json::{json, Value};

use sip::circuit::{build_circuit, GateConfig, GateSet};
use sip::ni::{NiProof, MAGIC as NI_MAGIC};
use sip::run::{run, Evidence, Protocol, RunConfig, RunError, RunReport};
use sip::stream::{Problem, Stream};
use sip::transport::{Adversary, TransportKind};
use sip::Fe;

const COLUMNS: [&str; 13] = [
    "problem",
    "protocol",
    "gate_set",
    "n",
    "gates",
    "rounds",
    "comm_bytes",
    "prover_ms",
    "verifier_stream_ms",
    "verifier_check_ms",
    "vspace_words",
    "answer",
    "accepted",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Csv,
    Json,
}

/// Comma-separated values expand to the cartesian product of runs;
/// unsupported (problem, protocol) pairs are dropped from a product but
/// rejected when given alone.
#[derive(Debug, Parser)]
#[command(name = "sip", version, about = "Streaming interactive proofs: run a protocol and report its costs")]
struct Cli {
    /// f2, f0, mvmult, pmww (comma list allowed)
    #[arg(long, default_value = "f2")]
    problem: String,
    /// ni, ni-fft, gkr, lin, mrs, bounded-f0 (comma list allowed)
    #[arg(long, default_value = "gkr")]
    protocol: String,
    /// universe, matrix side or text length; accepts 2^k (comma list allowed)
    #[arg(long, default_value = "1024")]
    n: String,
    /// generated stream length for f2/f0 (default n)
    #[arg(long)]
    m: Option<u64>,
    /// pattern length for pmww
    #[arg(long, default_value_t = 8)]
    q: u64,
    /// text alphabet size for generated pmww streams
    #[arg(long, default_value_t = 4)]
    sigma: u64,
    /// basic, pow8, pow16, optionally +bigsum (comma list or "all")
    #[arg(long, default_value = "basic")]
    gate_set: String,
    /// grid exponent for ni mvmult, as a fraction or decimal
    #[arg(long, default_value = "1/2")]
    alpha: String,
    /// frequency bound for bounded-f0 (default: largest frequency)
    #[arg(long)]
    fmax: Option<u64>,
    /// seed, or a range a..b (comma list allowed)
    #[arg(long, default_value = "1")]
    seed: String,
    /// inproc or socket (loopback)
    #[arg(long, default_value = "inproc")]
    transport: String,
    /// read the input from a SIPS1 or text stream file instead of generating it
    #[arg(long)]
    stream_file: Option<String>,
    /// write the generated stream (SIPS1) here
    #[arg(long)]
    stream_out: Option<String>,
    /// write the proof (ni) or transcript (interactive) here
    #[arg(long)]
    proof_out: Option<String>,
    /// check a stored proof or transcript instead of running the prover
    #[arg(long)]
    proof_in: Option<String>,
    /// corrupt prover message MSG at element ELEM by DELTA: MSG,ELEM,DELTA
    #[arg(long)]
    adversary: Option<String>,
    /// precompute gkr wiring values before the proof starts
    #[arg(long)]
    offline: bool,
    /// write the gkr circuit in text form here
    #[arg(long)]
    dump_circuit: Option<String>,
    /// the nine circuit-checking rows at the given n
    #[arg(long)]
    circuit_table: bool,
    #[arg(long, value_enum, default_value_t = Output::Csv)]
    output: Output,
    /// worker threads for independent runs
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn list<T>(s: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(parse).collect()
}

fn parse_n(s: &str) -> Result<u64, String> {
    if let Some(k) = s.strip_prefix("2^") {
        let k: u32 = k.parse().map_err(|_| format!("bad exponent in {s}"))?;
        return 1u64.checked_shl(k).filter(|_| k < 63).ok_or_else(|| format!("{s} too large"));
    }
    s.parse().map_err(|_| format!("bad size {s}"))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.parse().map_err(|_| format!("bad seed range {part}"))?;
            let b: u64 = b.parse().map_err(|_| format!("bad seed range {part}"))?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad seed {part}"))?);
        }
    }
    Ok(out)
}

fn parse_alpha(s: &str) -> Result<(u32, u32), String> {
    if let Some((a, b)) = s.split_once('/') {
        let a = a.trim().parse().map_err(|_| format!("bad alpha {s}"))?;
        let b = b.trim().parse().map_err(|_| format!("bad alpha {s}"))?;
        return Ok((a, b));
    }
    let x: f64 = s.parse().map_err(|_| format!("bad alpha {s}"))?;
    if !(0.0..=1.0).contains(&x) {
        return Err(format!("alpha {s} outside [0, 1]"));
    }
    Ok(((x * 1000.0).round() as u32, 1000))
}

fn parse_adversary(s: &str) -> Result<Adversary, String> {
    let parts: Vec<&str> = s.split([',', ':']).map(str::trim).collect();
    let [m, e, d] = parts[..] else {
        return Err(format!("adversary must be MSG,ELEM,DELTA, got {s}"));
    };
    let bad = || format!("bad adversary {s}");
    let delta: i64 = d.parse().map_err(|_| bad())?;
    Ok(Adversary {
        message: m.parse().map_err(|_| bad())?,
        element: e.parse().map_err(|_| bad())?,
        delta: Fe::from_i64(delta),
    })
}

fn gate_sets(s: &str) -> Result<Vec<GateConfig>, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(GateConfig::ALL.to_vec());
    }
    list(s, GateConfig::from_str)
}

fn circuit_table_rows(n: u64, base: &RunConfig) -> Vec<RunConfig> {
    let mut rows = Vec::new();
    let mut push = |problem, set, big_sum| {
        let mut c = base.clone();
        c.problem = problem;
        c.protocol = Protocol::Gkr;
        c.n = n;
        c.gate = GateConfig { set, big_sum };
        rows.push(c);
    };
    push(Problem::F2, GateSet::Basic, false);
    push(Problem::F2, GateSet::Basic, true);
    for big_sum in [false, true] {
        for set in [GateSet::Basic, GateSet::Pow8, GateSet::Pow16] {
            push(Problem::F0, set, big_sum);
        }
    }
    push(Problem::Pmww, GateSet::Pow8, true);
    rows
}

fn configs(cli: &Cli) -> Result<Vec<RunConfig>, String> {
    let problems = list(&cli.problem, Problem::from_str)?;
    let protocols = list(&cli.protocol, Protocol::from_str)?;
    let ns = list(&cli.n, parse_n)?;
    let gates = gate_sets(&cli.gate_set)?;
    let seeds = parse_seeds(&cli.seed)?;
    let mut base = RunConfig::new(Problem::F2, Protocol::Gkr, 1);
    base.m = cli.m;
    base.q = cli.q;
    base.sigma = cli.sigma;
    base.alpha = parse_alpha(&cli.alpha)?;
    base.fmax = cli.fmax;
    base.transport = TransportKind::from_str(&cli.transport)?;
    base.offline = cli.offline;
    base.adversary = cli.adversary.as_deref().map(parse_adversary).transpose()?;
    base.record = cli.proof_out.is_some();
    if cli.circuit_table {
        let mut out = Vec::new();
        for &n in &ns {
            for &seed in &seeds {
                base.seed = seed;
                out.extend(circuit_table_rows(n, &base));
            }
        }
        return Ok(out);
    }
    let single_pair = problems.len() == 1 && protocols.len() == 1;
    let mut out = Vec::new();
    for &problem in &problems {
        for &protocol in &protocols {
            if !protocol.supports(problem) {
                if single_pair {
                    return Err(format!("protocol {protocol} does not handle {problem}"));
                }
                continue;
            }
            // gate sets only vary circuit runs
            let gs: &[GateConfig] = if protocol == Protocol::Gkr { &gates } else { &gates[..1.min(gates.len())] };
            for &gate in gs {
                for &n in &ns {
                    for &seed in &seeds {
                        let mut c = base.clone();
                        c.problem = problem;
                        c.protocol = protocol;
                        c.n = n;
                        c.gate = gate;
                        c.seed = seed;
                        c.validate().map_err(|e| e.to_string())?;
                        out.push(c);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn fmt_ms(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Cells in column order; `None` is empty in CSV and null in JSON.
fn cells(r: &RunReport) -> Vec<Option<Value>> {
    vec![
        Some(json!(r.problem.to_string())),
        Some(json!(r.protocol.to_string())),
        r.gate_set.map(|g| json!(g.to_string())),
        Some(json!(r.n)),
        r.gates.map(|g| json!(g)),
        Some(json!(r.cost.rounds)),
        Some(json!(r.cost.comm_bytes)),
        Some(json!(fmt_ms(r.cost.prover_ms))),
        Some(json!(fmt_ms(r.cost.verifier_stream_ms))),
        Some(json!(fmt_ms(r.cost.verifier_check_ms))),
        Some(json!(r.cost.vspace_words)),
        r.answer.map(|a| json!(a)),
        Some(json!(r.accepted)),
    ]
}

fn emit_csv(reports: &[RunReport]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in reports {
        w.write_record(cells(r).into_iter().map(|c| match c {
            None => String::new(),
            Some(Value::String(s)) => s,
            Some(v) => v.to_string(),
        }))?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf8"))
}

fn emit_json(reports: &[RunReport]) -> String {
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            let obj = COLUMNS
                .iter()
                .zip(cells(r))
                .map(|(k, v)| (k.to_string(), v.unwrap_or(Value::Null)))
                .collect::<serde_json::Map<_, _>>();
            Value::Object(obj)
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
}

fn load_evidence(path: &str) -> Result<Evidence, String> {
    let bytes = fs::read(path).map_err(|e| format!("{path}: {e}"))?;
    if bytes.starts_with(NI_MAGIC) {
        NiProof::read(&bytes[..]).map(Evidence::Proof).map_err(|e| format!("{path}: {e}"))
    } else {
        Ok(Evidence::Transcript(bytes))
    }
}

fn save_evidence(path: &str, e: &Evidence) -> Result<(), String> {
    let bytes = match e {
        Evidence::Proof(p) => {
            let mut b = Vec::new();
            p.write(&mut b).map_err(|e| e.to_string())?;
            b
        }
        Evidence::Transcript(t) => t.clone(),
    };
    fs::write(path, bytes).map_err(|e| format!("{path}: {e}"))
}

fn run_all(cfgs: &[RunConfig], stream: Option<&Stream>, evidence: Option<&Evidence>, jobs: usize) -> Vec<Result<RunReport, RunError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunReport, RunError>>>> = Mutex::new((0..cfgs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, cfgs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cfgs.len() {
                    break;
                }
                let r = run(&cfgs[i], stream.cloned(), evidence.cloned());
                slots.lock().expect("no poisoned runs")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("workers joined").into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n");
    eprintln!("{}", Cli::command().render_usage());
    eprintln!("Run with --help for the full flag list.");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfgs = match configs(&cli) {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    let single = cfgs.len() == 1;
    if !single && (cli.proof_out.is_some() || cli.proof_in.is_some() || cli.dump_circuit.is_some()) {
        return usage_error("--proof-out, --proof-in and --dump-circuit need exactly one run");
    }
    let stream = match &cli.stream_file {
        Some(path) => {
            let bytes = match fs::read(path) {
                Ok(b) => b,
                Err(e) => return usage_error(&format!("{path}: {e}")),
            };
            let hint = cfgs.first().map(|c| c.universe());
            match Stream::read_any(&bytes, hint) {
                Ok(s) => Some(s),
                Err(e) => return usage_error(&format!("{path}: {e}")),
            }
        }
        None => None,
    };
    if let (Some(path), Some(c)) = (&cli.stream_out, cfgs.first()) {
        let s = stream.clone().unwrap_or_else(|| c.generate());
        let mut b = Vec::new();
        if let Err(e) = s.write_binary(&mut b).map_err(|e| e.to_string()).and_then(|_| fs::write(path, b).map_err(|e| e.to_string())) {
            return usage_error(&format!("{path}: {e}"));
        }
    }
    if let Some(path) = &cli.dump_circuit {
        let c = &cfgs[0];
        if c.protocol != Protocol::Gkr {
            return usage_error("--dump-circuit needs --protocol gkr");
        }
        let dumped = build_circuit(c.problem, c.n, c.q, c.gate)
            .map_err(|e| e.to_string())
            .and_then(|circ| {
                let mut b = Vec::new();
                circ.dump(&mut b).map_err(|e| e.to_string())?;
                fs::write(path, b).map_err(|e| e.to_string())
            });
        if let Err(e) = dumped {
            return usage_error(&format!("{path}: {e}"));
        }
    }
    let evidence = match cli.proof_in.as_deref().map(load_evidence).transpose() {
        Ok(e) => e,
        Err(e) => return usage_error(&e),
    };

    let results = run_all(&cfgs, stream.as_ref(), evidence.as_ref(), cli.jobs);
    let mut reports = Vec::new();
    let mut status = ExitCode::SUCCESS;
    for (c, r) in cfgs.iter().zip(results) {
        match r {
            Ok(r) => {
                if let Some(rej) = &r.reject {
                    eprintln!("{} {} n={} seed={}: rejected: {rej}", c.problem, c.protocol, c.n, c.seed);
                    status = ExitCode::from(1);
                }
                if !r.consistent() {
                    eprintln!(
                        "{} {} n={} seed={}: accepted answer {:?} differs from oracle {:?}",
                        c.problem, c.protocol, c.n, c.seed, r.answer, r.oracle
                    );
                    return ExitCode::from(3);
                }
                reports.push(r);
            }
            Err(RunError::Config(e)) => return usage_error(&e),
            Err(e) => {
                eprintln!("error: {} {} n={} seed={}: {e}", c.problem, c.protocol, c.n, c.seed);
                return ExitCode::from(4);
            }
        }
    }
    if let (Some(path), Some(e)) = (&cli.proof_out, reports.first().and_then(|r| r.evidence.as_ref())) {
        if let Err(e) = save_evidence(path, e) {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    let text = match cli.output {
        Output::Csv => match emit_csv(&reports) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(4);
            }
        },
        Output::Json => emit_json(&reports),
    };
    print!("{text}");
    status
}
