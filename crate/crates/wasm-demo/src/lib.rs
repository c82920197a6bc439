//! Browser bindings: a non-interactive F2 proof, a matrix-vector proof
//! with adjustable grid, and circuit inspection. Every call returns JSON.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use sip::circuit::{build_circuit, GateConfig};
use sip::gkr::prover_values;
use sip::ni::{self, F2Shape, F2Verifier, MvShape, MvVerifier, ProverMode};
use sip::stream::{decode_mv, gen_stream, oracle, Problem, StreamKind};
use sip::transport::Verdict;
use sip::Fe;

const MAX_F2: u32 = 1 << 22;
const MAX_SIDE: u32 = 512;
const MAX_CIRCUIT: u32 = 1 << 12;

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

fn verdict_json(v: &Verdict) -> (Value, Value) {
    match v {
        Verdict::Accept(a) => (json!(true), json!(a.value().to_string())),
        Verdict::Reject(r) => (json!(false), json!(r.to_string())),
    }
}

/// Proves and checks F2 of `m` random items over universe `n`. A nonzero
/// `corrupt` is added to proof element `corrupt_at` before checking.
#[wasm_bindgen]
pub fn f2_proof(n: u32, m: u32, seed: u32, fft: bool, corrupt: i32, corrupt_at: u32) -> String {
    if n == 0 || n > MAX_F2 {
        return error(format!("n must be in [1, {MAX_F2}]"));
    }
    let s = gen_stream(StreamKind::UniformItems { m: m as u64 }, n as u64, seed as u64);
    let shape = F2Shape::square(n as u64);
    let mode = if fft { ProverMode::Fft } else { ProverMode::Naive };
    let mut proof = ni::f2_prove(&s.frequencies(), shape, mode);
    if let Some(e) = proof.payload.get_mut(corrupt_at as usize) {
        *e += Fe::from_i64(corrupt as i64);
    }
    let mut v = F2Verifier::new(shape, seed as u64 ^ 0xa5a5);
    if let Err(e) = v.observe_stream(&s) {
        return error(e);
    }
    let verdict = v.verify(&proof);
    let (accepted, detail) = verdict_json(&verdict);
    json!({
        "grid": [shape.h, shape.w],
        "proof_bytes": proof.byte_len(),
        "verifier_words": v.meter.peak(),
        "accepted": accepted,
        "detail": detail,
        "oracle": oracle::f2(&s.frequencies()).to_string(),
    })
    .to_string()
}

/// Matrix-vector product of a random `side x side` system with grid
/// exponent `alpha_num / alpha_den`. A nonzero `corrupt` is added to the
/// first entry of the claimed product.
#[wasm_bindgen]
pub fn mvmult_proof(side: u32, alpha_num: u32, alpha_den: u32, seed: u32, corrupt: i32) -> String {
    if side == 0 || side > MAX_SIDE {
        return error(format!("side must be in [1, {MAX_SIDE}]"));
    }
    if alpha_den == 0 || alpha_num > alpha_den {
        return error("alpha must be a fraction in [0, 1]");
    }
    let s = gen_stream(StreamKind::MatrixVector, side as u64, seed as u64);
    let (n, a, x) = match decode_mv(&s) {
        Ok(t) => t,
        Err(e) => return error(e),
    };
    let shape = MvShape::new(n, (alpha_num, alpha_den));
    let mut proof = ni::mvmult_prove(&a, &x, shape, ProverMode::Fft);
    proof.payload[0] += Fe::from_i64(corrupt as i64);
    let mut v = MvVerifier::new(shape, seed as u64 ^ 0x5a5a);
    if let Err(e) = v.observe_stream(&s) {
        return error(e);
    }
    let out = v.verify(&proof);
    let (accepted, detail) = verdict_json(&out.verdict);
    let b: Vec<String> = proof.payload[..n.min(8)].iter().map(|e| e.value().to_string()).collect();
    json!({
        "grid": [shape.h, shape.w],
        "proof_bytes": proof.byte_len(),
        "verifier_words": v.meter.peak(),
        "accepted": accepted,
        "detail": detail,
        "b_head": b,
    })
    .to_string()
}

/// Builds a circuit, evaluates it on a seeded stream and reports its
/// shape. `problem` is f2, f0, mvmult or pmww; `gates` e.g. "pow8+bigsum".
#[wasm_bindgen]
pub fn circuit_summary(problem: &str, n: u32, q: u32, gates: &str, seed: u32) -> String {
    let problem: Problem = match problem.parse() {
        Ok(p) => p,
        Err(e) => return error(e),
    };
    let config: GateConfig = match gates.parse() {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    if n > MAX_CIRCUIT || (problem == Problem::MvMult && n > 64) {
        return error("circuit too large for the demo");
    }
    let c = match build_circuit(problem, n as u64, q as u64, config) {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    let (n, q, seed) = (n as u64, q as u64, seed as u64);
    let s = match problem {
        Problem::F2 | Problem::F0 => gen_stream(StreamKind::UniformItems { m: n }, n, seed),
        Problem::MvMult => gen_stream(StreamKind::MatrixVector, n, seed),
        Problem::Pmww => gen_stream(StreamKind::TextPattern { q, sigma: 4.min(n - 1).max(1) }, n, seed),
    };
    let b = match prover_values(&c, &s) {
        Ok(b) => b,
        Err(e) => return error(e),
    };
    let evaluated = c
        .input_values(&s, &b)
        .map_err(|e| e.to_string())
        .and_then(|inp| c.evaluate(&inp).map_err(|e| e.to_string()));
    let values = match evaluated {
        Ok(v) => v,
        Err(e) => return error(e),
    };
    let mut kinds = std::collections::BTreeMap::<String, u64>::new();
    let mut layers = Vec::new();
    for (i, l) in c.layers.iter().enumerate().take(c.depth()) {
        let mut counts = std::collections::BTreeMap::<String, u64>::new();
        l.for_each_gate(|g| *counts.entry(g.kind.to_string()).or_default() += 1);
        for (k, v) in &counts {
            *kinds.entry(k.clone()).or_default() += v;
        }
        layers.push(json!({ "layer": i, "width": l.width(), "gates": counts }));
    }
    let dump = if c.size() <= 256 {
        let mut b = Vec::new();
        c.dump(&mut b).ok().and_then(|_| String::from_utf8(b).ok())
    } else {
        None
    };
    // a product circuit outputs its count of wrong rows; report the digest of b
    let out = c.output(&values);
    let answer = if b.is_empty() { c.answer(out) } else { b.iter().copied().sum() };
    let want = oracle::answer(problem, &s, q).map(|a| (a % sip::field::P as u128) as u64);
    json!({
        "size": c.size(),
        "depth": c.depth(),
        "gate_kinds": kinds,
        "layers": layers,
        "answer": answer.value().to_string(),
        "output": out.value().to_string(),
        "oracle": want.map(|w| w.to_string()).unwrap_or_default(),
        "dump": dump,
    })
    .to_string()
}
