//! Layer-by-layer circuit checking.
//!
//! For layer `i` with claim `Ṽ_i(z) = c` the parties run one sum-check over
//! `(p, ω1, ω2)` of
//! `β_z(p) · [add̃(p,ω1,ω2)(Ṽ(ω1)+Ṽ(ω2)) + mul̃·Ṽ(ω1)Ṽ(ω2) + pow̃·(Ṽ(ω1)Ṽ(ω2))^j]`
//! where `Ṽ` is the layer below and `β_z` the equality extension. The two
//! resulting values `Ṽ(r1)`, `Ṽ(r2)` are merged by restricting `Ṽ` to the
//! line through `r1` and `r2`. After the input layer the last claim is
//! compared against the verifier's streamed input fingerprint.
//!
//! All verifier coordinates come from a seeded generator, so the final
//! input point is known before the stream starts. The verifier replays the
//! generator during the protocol and holds `O(depth-local)` words.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::circuit::{Circuit, GateKind, InputMap, Layer, WiringValues};
use crate::field::{reduce, Fe};
use crate::mle::{chi_index, eq_table, fold_low, interpolate_at};
use crate::stream::{decode_mv, oracle, Stream, StreamError, StreamUpdate};
use crate::sumcheck::{prove_rounds, random_point, verify_rounds, RoundProver, TableProduct, TAG_CHALLENGE, TAG_CLAIM};
use crate::transport::{expect, Link, SpaceMeter, TransportError, Verdict};

/// Prover-supplied values folded into the input layer (matrix products).
pub const TAG_VALUES: u8 = 0x03;
/// Restriction of the lower layer to a line.
pub const TAG_LINE: u8 = 0x04;

fn fe_i128(v: i128) -> Fe {
    let m = reduce(v.unsigned_abs());
    if v < 0 {
        -m
    } else {
        m
    }
}

/// Honest prover-side extra inputs: `b = A x` for matrix products.
pub fn prover_values(circuit: &Circuit, stream: &Stream) -> Result<Vec<Fe>, StreamError> {
    match circuit.input {
        InputMap::MvMult { .. } => {
            let (n, a, x) = decode_mv(stream)?;
            Ok(oracle::mv(n, &a, &x).into_iter().map(fe_i128).collect())
        }
        _ => Ok(Vec::new()),
    }
}

fn eq_point(a: &[Fe], b: &[Fe]) -> Fe {
    a.iter().zip(b).map(|(&x, &y)| x * y + (Fe::ONE - x) * (Fe::ONE - y)).product()
}

fn line_point(r1: &[Fe], r2: &[Fe], t: Fe) -> Vec<Fe> {
    r1.iter().zip(r2).map(|(&a, &b)| a + t * (b - a)).collect()
}

#[inline]
fn combine(kind: GateKind, a: Fe, b: Fe) -> Fe {
    kind.apply(a, b)
}

fn wiring(layer: &Layer, p: &[Fe], w1: &[Fe], w2: &[Fe]) -> WiringValues {
    layer.wiring_closed(p, w1, w2).unwrap_or_else(|| layer.wiring_generic(p, w1, w2))
}

fn layer_final(w: WiringValues, j: Option<u32>, x: Fe, y: Fe) -> Fe {
    let xy = x * y;
    w.add * (x + y) + w.mul * xy + j.map_or(Fe::ZERO, |j| w.pow * xy.pow(j as u64))
}

enum Phase {
    P,
    A,
    B,
}

/// Prover for one layer's sum-check: a two-table pass over the upper
/// labels, then one sweep over the gates per input-label round.
struct LayerProver<'a> {
    phase: Phase,
    rounds_left: usize,
    v_low: usize,
    deg: usize,
    beta: Vec<Fe>,
    upper: Vec<Fe>,
    lower: &'a [Fe],
    table: Vec<Fe>,
    gates: Vec<crate::circuit::Gate>,
    w: Vec<Fe>,
    rp: Vec<Fe>,
    bit: usize,
    x: Fe,
    ops: u64,
}

impl<'a> LayerProver<'a> {
    fn new(layer: &Layer, z: &[Fe], upper: &[Fe], lower: &'a [Fe], v_low: usize) -> Self {
        let mut lp = LayerProver {
            phase: Phase::P,
            rounds_left: z.len(),
            v_low,
            deg: layer.input_degree(),
            beta: eq_table(z),
            upper: upper.to_vec(),
            lower,
            table: Vec::new(),
            gates: layer.gates(),
            w: Vec::new(),
            rp: Vec::new(),
            bit: 0,
            x: Fe::ZERO,
            ops: 2 * upper.len() as u64,
        };
        if z.is_empty() {
            lp.start_a();
        }
        lp
    }

    fn start_a(&mut self) {
        let b = self.beta[0];
        let eq = eq_table(&self.rp);
        self.w = self.gates.iter().map(|g| b * eq[g.out as usize]).collect();
        self.ops += (eq.len() + self.gates.len()) as u64;
        self.table = self.lower.to_vec();
        self.phase = Phase::A;
        self.rounds_left = self.v_low;
        self.bit = 0;
    }

    fn start_b(&mut self) {
        self.x = self.table[0];
        self.table = self.lower.to_vec();
        self.phase = Phase::B;
        self.rounds_left = self.v_low;
        self.bit = 0;
    }

    fn sweep(&self, first: bool) -> Vec<Fe> {
        let mut out = vec![Fe::ZERO; self.deg + 1];
        let k = self.bit;
        let pts: Vec<Fe> = (0..=self.deg as u64).map(Fe::new).collect();
        for (g, &wg) in self.gates.iter().zip(&self.w) {
            if wg.is_zero() {
                continue;
            }
            let lbl = if first { g.in1 } else { g.in2 } as usize;
            let m = lbl >> (k + 1);
            let (t0, t1) = (self.table[2 * m], self.table[2 * m + 1]);
            let d = t1 - t0;
            let hot = (lbl >> k) & 1 == 1;
            for (e, &x) in pts.iter().enumerate() {
                let chi = if hot { x } else { Fe::ONE - x };
                if chi.is_zero() {
                    continue;
                }
                let v = t0 + x * d;
                let f = if first {
                    combine(g.kind, v, self.lower[g.in2 as usize])
                } else {
                    combine(g.kind, self.x, v)
                };
                out[e] += wg * chi * f;
            }
        }
        out
    }

    fn bind_gates(&mut self, r: Fe, first: bool) {
        let k = self.bit;
        for (g, wg) in self.gates.iter().zip(self.w.iter_mut()) {
            let lbl = if first { g.in1 } else { g.in2 };
            *wg *= if (lbl >> k) & 1 == 1 { r } else { Fe::ONE - r };
        }
        self.ops += self.gates.len() as u64 + self.table.len() as u64 / 2;
        fold_low(&mut self.table, r);
        self.bit += 1;
    }
}

impl RoundProver for LayerProver<'_> {
    fn num_rounds(&self) -> usize {
        self.beta.len().trailing_zeros() as usize + 2 * self.v_low
    }

    fn round(&mut self) -> Vec<Fe> {
        match self.phase {
            Phase::P => {
                let half = self.upper.len() / 2;
                let mut out = [Fe::ZERO; 3];
                for j in 0..half {
                    let (b0, b1) = (self.beta[2 * j], self.beta[2 * j + 1]);
                    let (u0, u1) = (self.upper[2 * j], self.upper[2 * j + 1]);
                    let (db, du) = (b1 - b0, u1 - u0);
                    out[0] += b0 * u0;
                    out[1] += b1 * u1;
                    out[2] += (b1 + db) * (u1 + du);
                }
                self.ops += 5 * half as u64;
                out.to_vec()
            }
            Phase::A | Phase::B => {
                let first = matches!(self.phase, Phase::A);
                self.ops += (self.gates.len() * (self.deg + 1) * 4) as u64;
                self.sweep(first)
            }
        }
    }

    fn bind(&mut self, r: Fe) {
        match self.phase {
            Phase::P => {
                self.ops += self.upper.len() as u64;
                fold_low(&mut self.beta, r);
                fold_low(&mut self.upper, r);
                self.rp.push(r);
                self.rounds_left -= 1;
                if self.rounds_left == 0 {
                    self.start_a();
                }
            }
            Phase::A => {
                self.bind_gates(r, true);
                self.rounds_left -= 1;
                if self.rounds_left == 0 {
                    self.start_b();
                }
            }
            Phase::B => {
                self.bind_gates(r, false);
                self.rounds_left -= 1;
            }
        }
    }
}

/// Runs the prover over `stream`. Returns the number of field operations
/// spent after circuit evaluation.
pub fn gkr_prove(link: &mut Link, circuit: &Circuit, stream: &Stream) -> Result<u64, TransportError> {
    let extra = prover_values(circuit, stream).map_err(|e| TransportError::Framing(e.to_string()))?;
    let input = circuit.input_values(stream, &extra).map_err(|e| TransportError::Framing(e.to_string()))?;
    let vals = circuit.evaluate(&input).map_err(|e| TransportError::Framing(e.to_string()))?;
    let mut ops = 0u64;
    if !extra.is_empty() {
        link.send(TAG_VALUES, &extra)?;
    }
    link.send(TAG_CLAIM, &[circuit.output(&vals)])?;
    let mut z = Vec::new();
    if circuit.config.big_sum {
        let mut p = TableProduct::new(vec![vals[0].clone()], 2, |v: &[Fe]| v[0]);
        z = prove_rounds(link, &mut p)?;
        ops += p.ops;
    }
    for i in 0..circuit.depth() {
        let v_low = circuit.layers[i + 1].log_width;
        let mut lp = LayerProver::new(&circuit.layers[i], &z, &vals[i], &vals[i + 1], v_low);
        let rs = prove_rounds(link, &mut lp)?;
        ops += lp.ops;
        let (r1, r2) = rs[z.len()..].split_at(v_low);
        let line: Vec<Fe> = (0..=v_low as u64)
            .map(|t| {
                let pt = line_point(r1, r2, Fe::new(t));
                eq_table(&pt).iter().zip(&vals[i + 1]).map(|(&a, &b)| a * b).sum()
            })
            .collect();
        ops += ((v_low + 1) << (v_low + 1)) as u64;
        link.send(TAG_LINE, &line)?;
        let m = link.recv()?;
        let t = *m.elems.first().ok_or_else(|| TransportError::Framing("empty challenge".into()))?;
        z = line_point(r1, r2, t);
    }
    Ok(ops)
}

/// Verifier coordinates for one layer.
struct LayerCoins {
    rp: Vec<Fe>,
    r1: Vec<Fe>,
    r2: Vec<Fe>,
    t: Fe,
}

struct Coins {
    rng: ChaCha20Rng,
}

impl Coins {
    fn new(seed: u64) -> Self {
        Coins { rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    fn sum(&mut self, c: &Circuit) -> Vec<Fe> {
        if c.config.big_sum {
            random_point(&mut self.rng, c.layers[0].log_width)
        } else {
            Vec::new()
        }
    }

    fn layer(&mut self, c: &Circuit, i: usize, v_up: usize) -> LayerCoins {
        let v = c.layers[i + 1].log_width;
        LayerCoins {
            rp: random_point(&mut self.rng, v_up),
            r1: random_point(&mut self.rng, v),
            r2: random_point(&mut self.rng, v),
            t: Fe::random(&mut self.rng),
        }
    }
}

/// Outcome of a verification. `values` holds prover-supplied outputs
/// (the product vector for matrix products) when accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GkrOutcome {
    pub verdict: Verdict,
    pub values: Vec<Fe>,
}

/// Streaming verifier. Words counted exclude any output vector.
pub struct GkrVerifier<'c> {
    circuit: &'c Circuit,
    seed: u64,
    point: Vec<Fe>,
    acc: Fe,
    offline: Option<Vec<WiringValues>>,
    pub meter: SpaceMeter,
}

impl<'c> GkrVerifier<'c> {
    /// Commits to all coordinates. With `offline`, also evaluates every
    /// wiring predicate up front so the online checks are lookups.
    pub fn new(circuit: &'c Circuit, seed: u64, offline: bool) -> Self {
        let mut coins = Coins::new(seed);
        let mut z = coins.sum(circuit);
        let mut pre = offline.then(Vec::new);
        for i in 0..circuit.depth() {
            let lc = coins.layer(circuit, i, z.len());
            if let Some(pre) = pre.as_mut() {
                pre.push(wiring(&circuit.layers[i], &lc.rp, &lc.r1, &lc.r2));
            }
            z = line_point(&lc.r1, &lc.r2, lc.t);
        }
        let mut v = GkrVerifier { circuit, seed, point: z, acc: Fe::ZERO, offline: pre, meter: SpaceMeter::default() };
        let mut acc = Fe::ZERO;
        circuit.input.constants(|s, x| acc += x * chi_index(s, &v.point));
        v.acc = acc;
        v.meter.observe(v.words_base());
        v
    }

    fn words_base(&self) -> usize {
        self.point.len() + 1 + self.offline.as_ref().map_or(0, |p| 3 * p.len())
    }

    pub fn words(&self) -> usize {
        self.meter.peak()
    }

    pub fn update(&mut self, u: &StreamUpdate) -> Result<(), StreamError> {
        let n = self.circuit.input.universe();
        if u.index >= n {
            return Err(StreamError::OutOfRange { index: u.index, n });
        }
        let (pt, acc) = (&self.point, &mut self.acc);
        self.circuit.input.map_update(u.index, Fe::from_i64(u.delta), |s, x| *acc += x * chi_index(s, pt));
        Ok(())
    }

    pub fn observe_stream(&mut self, s: &Stream) -> Result<(), StreamError> {
        for u in &s.updates {
            self.update(u)?;
        }
        Ok(())
    }

    pub fn verify(&mut self, link: &mut Link) -> Result<GkrOutcome, TransportError> {
        let c = self.circuit;
        let reject = |v: Verdict| Ok(GkrOutcome { verdict: v, values: Vec::new() });
        let mut acc = self.acc;
        let plen = c.input.prover_len();
        let mut values = Vec::new();
        if plen > 0 {
            values = match expect(link, TAG_VALUES, plen, 0)? {
                Ok(v) => v,
                Err(v) => return reject(v),
            };
            for (i, &b) in values.iter().enumerate() {
                c.input.map_prover(i, b, |s, x| acc += x * chi_index(s, &self.point));
            }
        }
        let out = match expect(link, TAG_CLAIM, 1, 0)? {
            Ok(v) => v[0],
            Err(v) => return reject(v),
        };
        if plen > 0 && !out.is_zero() {
            return reject(Verdict::reject(0, "circuit reports wrong product entries"));
        }
        let base = 2 + self.offline.as_ref().map_or(0, |p| 3 * p.len()) + 8;
        let mut coins = Coins::new(self.seed);
        let mut claim = out;
        let mut round = 0usize;
        let mut z = coins.sum(c);
        if !z.is_empty() {
            let degs = vec![2; z.len()];
            claim = match verify_rounds(link, claim, &degs, &z, round, &mut self.meter, base + z.len())? {
                Ok(x) => x,
                Err(v) => return reject(v),
            };
            round += z.len();
        }
        for i in 0..c.depth() {
            let layer = &c.layers[i];
            let lc = coins.layer(c, i, z.len());
            let v = lc.r1.len();
            let deg = layer.input_degree();
            let mut degs = vec![2; z.len()];
            degs.extend(std::iter::repeat(deg).take(2 * v));
            let mut chal = lc.rp.clone();
            chal.extend(&lc.r1);
            chal.extend(&lc.r2);
            let live = base + z.len() + 2 * chal.len() + 1;
            claim = match verify_rounds(link, claim, &degs, &chal, round, &mut self.meter, live)? {
                Ok(x) => x,
                Err(v) => return reject(v),
            };
            round += chal.len();
            let line = match expect(link, TAG_LINE, v + 1, round)? {
                Ok(l) => l,
                Err(v) => return reject(v),
            };
            self.meter.observe(live + line.len());
            let w = match &self.offline {
                Some(pre) => pre[i],
                None => wiring(layer, &lc.rp, &lc.r1, &lc.r2),
            };
            let beta = eq_point(&z, &lc.rp);
            if claim != beta * layer_final(w, layer.pow_j(), line[0], line[1]) {
                return reject(Verdict::reject(round, format!("layer {i} final check failed")));
            }
            claim = interpolate_at(&line, lc.t);
            link.send(TAG_CHALLENGE, &[lc.t])?;
            round += 1;
            z = line_point(&lc.r1, &lc.r2, lc.t);
        }
        if claim != acc {
            return reject(Verdict::reject(round, "input fingerprint mismatch"));
        }
        let answer = if plen > 0 { values.iter().copied().sum() } else { c.answer(out) };
        Ok(GkrOutcome { verdict: Verdict::Accept(answer), values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_circuit, Family, GateConfig, Wiring};
    use crate::stream::{gen_stream, Problem, StreamKind};
    use crate::transport::{run_session, Adversary, SessionOpts, TransportKind};

    fn run(c: &Circuit, s: &Stream, seed: u64, offline: bool, adv: Option<Adversary>) -> (GkrOutcome, u64) {
        let sess = run_session(
            TransportKind::InProc,
            SessionOpts { record: false, adversary: adv },
            |l: &mut Link| gkr_prove(l, c, s).map(|_| ()),
            |l: &mut Link| {
                let mut v = GkrVerifier::new(c, seed, offline);
                v.observe_stream(s).unwrap();
                v.verify(l)
            },
        )
        .unwrap();
        (sess.result, sess.stats.rounds)
    }

    #[test]
    fn f2_small_honest() {
        let s = Stream::from_frequencies(&[1, 2, 3, 4]);
        for cfg in GateConfig::ALL {
            let c = build_circuit(Problem::F2, 4, 0, cfg).unwrap();
            let (o, _) = run(&c, &s, 3, false, None);
            assert_eq!(o.verdict, Verdict::Accept(Fe::new(30)), "{cfg}");
        }
    }

    #[test]
    fn honest_all_families() {
        for (k, cfg) in GateConfig::ALL.iter().enumerate() {
            let seed = k as u64;
            let s = gen_stream(StreamKind::UniformItems { m: 300 }, 256, seed);
            let f = s.frequencies();
            let c = build_circuit(Problem::F0, 256, 0, *cfg).unwrap();
            let (o, _) = run(&c, &s, seed, k % 2 == 0, None);
            assert_eq!(o.verdict, Verdict::Accept(Fe::new(oracle::f0(&f))));

            let s = gen_stream(StreamKind::MatrixVector, 4, seed);
            let c = build_circuit(Problem::MvMult, 4, 0, *cfg).unwrap();
            let (o, _) = run(&c, &s, seed, false, None);
            let want = prover_values(&c, &s).unwrap();
            assert!(o.verdict.accepted());
            assert_eq!(o.values, want);

            let s = gen_stream(StreamKind::TextPattern { q: 3, sigma: 2 }, 16, seed);
            let c = build_circuit(Problem::Pmww, 16, 3, *cfg).unwrap();
            let (o, _) = run(&c, &s, seed, true, None);
            let want = oracle::answer(Problem::Pmww, &s, 3).unwrap();
            assert_eq!(o.verdict, Verdict::Accept(Fe::new(want as u64)));
        }
    }

    #[test]
    fn lying_about_output_rejected() {
        let s = gen_stream(StreamKind::UniformItems { m: 40 }, 16, 1);
        let c = build_circuit(Problem::F2, 16, 0, GateConfig::default()).unwrap();
        let mut rejected = 0;
        for seed in 0..1000u64 {
            let adv = Adversary { message: 0, element: 0, delta: Fe::new(1 + seed) };
            let (o, _) = run(&c, &s, seed, false, Some(adv));
            rejected += !o.verdict.accepted() as usize;
        }
        assert!(rejected >= 999);
    }

    #[test]
    fn tampered_messages_rejected() {
        let s = gen_stream(StreamKind::UniformItems { m: 40 }, 8, 2);
        let c = build_circuit(Problem::F0, 8, 0, GateConfig::default()).unwrap();
        for msg in [1usize, 5, 17, 40, 100, 200] {
            let adv = Adversary { message: msg, element: 0, delta: Fe::new(7) };
            let (o, _) = run(&c, &s, 9, false, Some(adv));
            assert!(!o.verdict.accepted(), "message {msg}");
        }
    }

    #[test]
    fn wrong_descriptor_rejected() {
        let s = Stream::from_frequencies(&[1, 2, 3, 4]);
        let good = build_circuit(Problem::F2, 4, 0, GateConfig::default()).unwrap();
        let mut bad = good.clone();
        // squaring layer turned into doubling
        let g: Vec<_> = bad.layers[2].gates().into_iter().map(|mut g| {
            g.kind = GateKind::Add;
            g
        }).collect();
        bad.layers[2].wiring = Wiring::Gates(g);
        bad.family = Family::Custom;
        let sess = run_session(
            TransportKind::InProc,
            SessionOpts::default(),
            |l: &mut Link| gkr_prove(l, &good, &s).map(|_| ()),
            |l: &mut Link| {
                let mut v = GkrVerifier::new(&bad, 5, false);
                v.observe_stream(&s).unwrap();
                v.verify(l)
            },
        )
        .unwrap();
        assert!(!sess.result.verdict.accepted());
    }

    #[test]
    fn big_sum_matches_tree() {
        for seed in 0..5u64 {
            let s = gen_stream(StreamKind::UniformFrequencies, 64, seed);
            let mut outs = Vec::new();
            for cfg in GateConfig::ALL {
                let c = build_circuit(Problem::F2, 64, 0, cfg).unwrap();
                outs.push(run(&c, &s, seed, false, None).0.verdict);
            }
            assert!(outs.iter().all(|o| o == &outs[0] && o.accepted()));
        }
    }

    #[test]
    fn wrong_product_rejected() {
        let s = gen_stream(StreamKind::MatrixVector, 4, 3);
        let c = build_circuit(Problem::MvMult, 4, 0, GateConfig::default()).unwrap();
        for e in 0..4 {
            let adv = Adversary { message: 0, element: e, delta: Fe::ONE };
            assert!(!run(&c, &s, 1, false, Some(adv)).0.verdict.accepted());
        }
    }

    #[test]
    fn line_reduction_matches_direct_eval() {
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let vals = random_point(&mut rng, 16);
        let r1 = random_point(&mut rng, 4);
        let r2 = random_point(&mut rng, 4);
        let line: Vec<Fe> = (0..5u64)
            .map(|t| crate::mle::mle_eval(&vals, &line_point(&r1, &r2, Fe::new(t))).unwrap())
            .collect();
        let t = Fe::random(&mut rng);
        assert_eq!(interpolate_at(&line, t), crate::mle::mle_eval(&vals, &line_point(&r1, &r2, t)).unwrap());
        assert_eq!(line[0], crate::mle::mle_eval(&vals, &r1).unwrap());
        // equal endpoints give a constant line
        let same: Vec<Fe> = (0..5u64).map(|t| crate::mle::mle_eval(&vals, &line_point(&r1, &r1, Fe::new(t))).unwrap()).collect();
        assert!(same.iter().all(|&x| x == same[0]));
    }

    #[test]
    fn communication_accounting() {
        // claim, then per layer (v_up + 2 v_low) rounds and a line
        let s = gen_stream(StreamKind::UniformItems { m: 100 }, 32, 0);
        for cfg in GateConfig::ALL {
            let c = build_circuit(Problem::F2, 32, 0, cfg).unwrap();
            let sess = run_session(
                TransportKind::InProc,
                SessionOpts::default(),
                |l: &mut Link| gkr_prove(l, &c, &s).map(|_| ()),
                |l: &mut Link| {
                    let mut v = GkrVerifier::new(&c, 1, false);
                    v.observe_stream(&s).unwrap();
                    v.verify(l)
                },
            )
            .unwrap();
            assert!(sess.result.verdict.accepted());
            let mut elems = 1u64;
            let mut turns = 0u64;
            if cfg.big_sum {
                elems += 3 * c.layers[0].log_width as u64;
                turns += c.layers[0].log_width as u64;
            }
            for i in 0..c.depth() {
                let (vu, vl) = (c.layers[i].log_width as u64, c.layers[i + 1].log_width as u64);
                let d = c.layers[i].input_degree() as u64;
                elems += 3 * vu + 2 * vl * (d + 1) + vl + 1;
                turns += vu + 2 * vl + 1;
            }
            assert_eq!(sess.stats.elems_recv, elems);
            assert_eq!(sess.stats.rounds, turns);
        }
    }

    #[test]
    fn prover_ops_scale() {
        let mut ratios = Vec::new();
        for lg in [6u32, 8, 10] {
            let n = 1u64 << lg;
            let s = gen_stream(StreamKind::UniformItems { m: n }, n, 0);
            let c = build_circuit(Problem::F2, n, 0, GateConfig::default()).unwrap();
            let mut ops = 0u64;
            let sess = run_session(
                TransportKind::InProc,
                SessionOpts::default(),
                |l: &mut Link| {
                    ops = gkr_prove(l, &c, &s)?;
                    Ok(())
                },
                |l: &mut Link| {
                    let mut v = GkrVerifier::new(&c, 0, false);
                    v.observe_stream(&s).unwrap();
                    v.verify(l)
                },
            )
            .unwrap();
            assert!(sess.result.verdict.accepted());
            let ops = ops as f64;
            let sz = c.size() as f64;
            ratios.push(ops / (sz * sz.log2()));
        }
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo <= 2.0, "{ratios:?}");
    }
}
