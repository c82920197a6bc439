//! Generic sum-check, plus two protocols built directly on it: F2 as a
//! sum over the squared input extension, and F0 under a bound on the
//! largest absolute frequency.
//!
//! Round messages are evaluations at `0..=deg`. Variables are bound
//! lowest first, and for the streaming protocols the challenges are the
//! verifier's committed fingerprint point.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::field::Fe;
use crate::mle::{fold_low, interpolate_at, num_vars, StreamingLdeState};
use crate::stream::{Stream, StreamUpdate};
use crate::transport::{expect, Link, SpaceMeter, TransportError, Verdict, VERIFIER_TAG};

pub const TAG_CLAIM: u8 = 0x01;
pub const TAG_ROUND: u8 = 0x02;
pub const TAG_CHALLENGE: u8 = VERIFIER_TAG | 0x02;

/// Prover half of one sum-check instance.
pub trait RoundProver {
    fn num_rounds(&self) -> usize;
    /// Evaluations of the current round polynomial at `0..=deg`.
    fn round(&mut self) -> Vec<Fe>;
    fn bind(&mut self, r: Fe);
}

/// `g(x) = combine(t_1(x), .., t_c(x))` for multilinear tables `t_i`.
pub struct TableProduct<F: Fn(&[Fe]) -> Fe> {
    tables: Vec<Vec<Fe>>,
    deg: usize,
    combine: F,
    pub ops: u64,
}

impl<F: Fn(&[Fe]) -> Fe> TableProduct<F> {
    pub fn new(tables: Vec<Vec<Fe>>, deg: usize, combine: F) -> Self {
        let len = tables[0].len();
        assert!(len.is_power_of_two() && tables.iter().all(|t| t.len() == len));
        TableProduct { tables, deg, combine, ops: 0 }
    }
}

impl<F: Fn(&[Fe]) -> Fe> RoundProver for TableProduct<F> {
    fn num_rounds(&self) -> usize {
        self.tables[0].len().trailing_zeros() as usize
    }

    fn round(&mut self) -> Vec<Fe> {
        let half = self.tables[0].len() / 2;
        let c = self.tables.len();
        let mut out = vec![Fe::ZERO; self.deg + 1];
        let mut vals = vec![Fe::ZERO; c];
        let mut step = vec![Fe::ZERO; c];
        for j in 0..half {
            for (i, t) in self.tables.iter().enumerate() {
                vals[i] = t[2 * j];
                step[i] = t[2 * j + 1] - t[2 * j];
            }
            for (e, o) in out.iter_mut().enumerate() {
                if e > 0 {
                    for i in 0..c {
                        vals[i] += step[i];
                    }
                }
                *o += (self.combine)(&vals);
            }
        }
        self.ops += (half * (self.deg + 1) * (c + 1)) as u64;
        out
    }

    fn bind(&mut self, r: Fe) {
        for t in self.tables.iter_mut() {
            self.ops += t.len() as u64 / 2;
            fold_low(t, r);
        }
    }
}

/// Runs the prover side: send evaluations, read challenge, bind.
pub fn prove_rounds(link: &mut Link, p: &mut dyn RoundProver) -> Result<Vec<Fe>, TransportError> {
    let k = p.num_rounds();
    let mut rs = Vec::with_capacity(k);
    for _ in 0..k {
        let evals = p.round();
        link.send(TAG_ROUND, &evals)?;
        let m = link.recv()?;
        let r = *m.elems.first().ok_or_else(|| TransportError::Framing("empty challenge".into()))?;
        p.bind(r);
        rs.push(r);
    }
    Ok(rs)
}

/// Verifier side. `degs[j]` is the degree bound of round `j`, and
/// `challenges[j]` the value sent back after it. Returns the reduced claim
/// the caller must check against `g(challenges)`.
pub fn verify_rounds(
    link: &mut Link,
    mut claim: Fe,
    degs: &[usize],
    challenges: &[Fe],
    round0: usize,
    meter: &mut SpaceMeter,
    live: usize,
) -> Result<Result<Fe, Verdict>, TransportError> {
    assert_eq!(degs.len(), challenges.len());
    for (j, (&deg, &r)) in degs.iter().zip(challenges).enumerate() {
        let round = round0 + j;
        let s = match expect(link, TAG_ROUND, deg + 1, round)? {
            Ok(s) => s,
            Err(v) => return Ok(Err(v)),
        };
        meter.observe(live + s.len() + 2);
        if s[0] + s[1] != claim {
            return Ok(Err(Verdict::reject(round, "round sum does not match claim")));
        }
        claim = interpolate_at(&s, r);
        link.send(TAG_CHALLENGE, &[r])?;
    }
    Ok(Ok(claim))
}

/// Draws `k` coordinates from a seeded generator.
pub fn random_point(rng: &mut ChaCha20Rng, k: usize) -> Vec<Fe> {
    (0..k).map(|_| Fe::random(rng)).collect()
}

/// Pads a frequency vector to the next power of two, as field elements.
pub fn padded_input(stream: &Stream) -> Vec<Fe> {
    let k = num_vars(stream.n);
    let mut a = vec![Fe::ZERO; 1 << k];
    for u in &stream.updates {
        a[u.index as usize] += Fe::from_i64(u.delta);
    }
    a
}

/// Verifier for the streaming sum-check protocols: commits to `r` before
/// seeing data and keeps only the input extension at `r`.
#[derive(Debug, Clone)]
pub struct StreamingVerifier {
    lde: StreamingLdeState,
    pub meter: SpaceMeter,
}

impl StreamingVerifier {
    pub fn new(n: u64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let r = random_point(&mut rng, num_vars(n));
        StreamingVerifier { lde: StreamingLdeState::new(r), meter: SpaceMeter::default() }
    }

    pub fn update(&mut self, u: &StreamUpdate) -> Result<(), crate::mle::MleError> {
        self.lde.update(u)
    }

    pub fn observe_stream(&mut self, s: &Stream) -> Result<(), crate::mle::MleError> {
        for u in &s.updates {
            self.update(u)?;
        }
        self.meter.observe(self.lde.words());
        Ok(())
    }

    pub fn point(&self) -> &[Fe] {
        self.lde.point()
    }

    pub fn lde(&self) -> Fe {
        self.lde.value()
    }

    fn run(
        &mut self,
        link: &mut Link,
        deg: usize,
        final_map: impl Fn(Fe) -> Fe,
    ) -> Result<Verdict, TransportError> {
        let k = self.lde.dims();
        let claim = match expect(link, TAG_CLAIM, 1, 0)? {
            Ok(c) => c[0],
            Err(v) => return Ok(v),
        };
        let r = self.lde.point().to_vec();
        let live = self.lde.words() + 2;
        let reduced = match verify_rounds(link, claim, &vec![deg; k], &r, 0, &mut self.meter, live)? {
            Ok(c) => c,
            Err(v) => return Ok(v),
        };
        if reduced != final_map(self.lde.value()) {
            return Ok(Verdict::reject(k, "final check against input fingerprint failed"));
        }
        Ok(Verdict::Accept(claim))
    }
}

/// F2 prover: sum-check over the squared input extension.
pub fn mrs_f2_prove(link: &mut Link, a: Vec<Fe>) -> Result<u64, TransportError> {
    let total: Fe = a.iter().map(|&x| x * x).sum();
    link.send(TAG_CLAIM, &[total])?;
    let mut p = TableProduct::new(vec![a], 2, |v: &[Fe]| v[0] * v[0]);
    prove_rounds(link, &mut p)?;
    Ok(p.ops)
}

pub fn mrs_f2_verify(v: &mut StreamingVerifier, link: &mut Link) -> Result<Verdict, TransportError> {
    v.run(link, 2, |x| x * x)
}

/// `h(y) = 1 - prod_{t=1..F} (1 - y^2 / t^2)`, the degree-`2F` polynomial
/// that is 0 at 0 and 1 on every `t` with `1 <= |t| <= F`.
#[derive(Debug, Clone)]
pub struct Indicator {
    inv_sq: Vec<Fe>,
}

impl Indicator {
    pub fn new(fmax: u64) -> Self {
        let sq: Vec<Fe> = (1..=fmax).map(|t| Fe::new(t * t)).collect();
        Indicator { inv_sq: crate::field::batch_inv(&sq).expect("fmax < p") }
    }

    pub fn degree(&self) -> usize {
        2 * self.inv_sq.len()
    }

    pub fn eval(&self, y: Fe) -> Fe {
        let y2 = y * y;
        Fe::ONE - self.inv_sq.iter().map(|&c| Fe::ONE - y2 * c).product::<Fe>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTooLarge {
    pub index: usize,
    pub value: i64,
}

/// Bounded-frequency F0 prover. Refuses when some `|a_i|` exceeds `fmax`.
pub fn bounded_f0_prove(
    link: &mut Link,
    freqs: &[i64],
    fmax: u64,
) -> Result<Result<u64, FrequencyTooLarge>, TransportError> {
    if let Some((index, &value)) = freqs.iter().enumerate().find(|(_, x)| x.unsigned_abs() > fmax) {
        return Ok(Err(FrequencyTooLarge { index, value }));
    }
    let k = num_vars(freqs.len() as u64);
    let mut a = vec![Fe::ZERO; 1 << k];
    for (i, &x) in freqs.iter().enumerate() {
        a[i] = Fe::from_i64(x);
    }
    let count = freqs.iter().filter(|&&x| x != 0).count() as u64;
    link.send(TAG_CLAIM, &[Fe::new(count)])?;
    let h = Indicator::new(fmax);
    let deg = h.degree();
    let mut p = TableProduct::new(vec![a], deg, move |v: &[Fe]| h.eval(v[0]));
    prove_rounds(link, &mut p)?;
    Ok(Ok(p.ops))
}

pub fn bounded_f0_verify(
    v: &mut StreamingVerifier,
    link: &mut Link,
    fmax: u64,
) -> Result<Verdict, TransportError> {
    let h = Indicator::new(fmax);
    let deg = h.degree();
    v.run(link, deg, move |x| h.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{gen_stream, oracle, StreamKind};
    use crate::transport::{run_session, Adversary, SessionOpts, TransportKind};

    fn fe(v: u64) -> Fe {
        Fe::new(v)
    }

    fn plain_sumcheck(vals: Vec<Fe>, claim: Fe, seed: u64) -> Verdict {
        let k = vals.len().trailing_zeros() as usize;
        let table = vals.clone();
        let s = run_session(
            TransportKind::InProc,
            SessionOpts::default(),
            move |l: &mut Link| {
                let mut p = TableProduct::new(vec![vals], 1, |v: &[Fe]| v[0]);
                prove_rounds(l, &mut p).map(|_| ())
            },
            |l: &mut Link| {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let r = random_point(&mut rng, k);
                let mut m = SpaceMeter::default();
                Ok(match verify_rounds(l, claim, &vec![1; k], &r, 0, &mut m, 0)? {
                    Ok(c) if c == crate::mle::mle_eval(&table, &r).unwrap() => Verdict::Accept(claim),
                    Ok(_) => Verdict::reject(k, "final"),
                    Err(v) => v,
                })
            },
        )
        .unwrap();
        s.result
    }

    #[test]
    fn plain_examples() {
        let vals = vec![fe(1), fe(2), fe(3), fe(4)];
        assert!(plain_sumcheck(vals.clone(), fe(10), 1).accepted());
        assert!(!plain_sumcheck(vals.clone(), fe(11), 1).accepted());
        assert!(plain_sumcheck(vec![fe(3), fe(8)], fe(11), 2).accepted());
    }

    #[test]
    fn wrong_claim_soundness() {
        let vals = vec![fe(1), fe(2), fe(3), fe(4)];
        let rejects = (0..1000).filter(|&s| !plain_sumcheck(vals.clone(), fe(11), s).accepted()).count();
        assert!(rejects >= 999);
    }

    fn run_mrs(stream: &Stream, seed: u64, adv: Option<Adversary>) -> (Verdict, u64, u64) {
        let mut v = StreamingVerifier::new(stream.n, seed);
        v.observe_stream(stream).unwrap();
        let a = padded_input(stream);
        let s = run_session(
            TransportKind::InProc,
            SessionOpts { record: false, adversary: adv },
            move |l: &mut Link| mrs_f2_prove(l, a).map(|_| ()),
            |l: &mut Link| mrs_f2_verify(&mut v, l),
        )
        .unwrap();
        (s.result, s.stats.rounds, s.stats.elems_recv)
    }

    #[test]
    fn mrs_examples() {
        let s = Stream::from_frequencies(&[1, 2, 3, 4]);
        assert_eq!(run_mrs(&s, 1, None).0, Verdict::Accept(fe(30)));
        let e = Stream::new(8, vec![]).unwrap();
        assert_eq!(run_mrs(&e, 1, None).0, Verdict::Accept(Fe::ZERO));
        let s = gen_stream(StreamKind::UniformItems { m: 3000 }, 1 << 10, 4);
        let (v, rounds, elems) = run_mrs(&s, 2, None);
        assert_eq!(v.answer().unwrap().value() as u128, oracle::f2(&s.frequencies()));
        assert_eq!(rounds, 10);
        assert_eq!(elems, 1 + 3 * 10);
        for msg in 0..11 {
            let adv = Some(Adversary { message: msg, element: if msg == 0 { 0 } else { msg % 3 }, delta: fe(5) });
            assert!(!run_mrs(&s, 3, adv).0.accepted(), "message {msg}");
        }
    }

    fn run_bf0(stream: &Stream, fmax: u64, seed: u64, adv: Option<Adversary>) -> (Verdict, u64) {
        let mut v = StreamingVerifier::new(stream.n, seed);
        v.observe_stream(stream).unwrap();
        let f = stream.frequencies();
        let s = run_session(
            TransportKind::InProc,
            SessionOpts { record: false, adversary: adv },
            move |l: &mut Link| bounded_f0_prove(l, &f, fmax).map(|_| ()),
            |l: &mut Link| bounded_f0_verify(&mut v, l, fmax),
        );
        match s {
            Ok(s) => (s.result, s.stats.elems_recv),
            Err(TransportError::Closed) => (Verdict::reject(0, "prover refused"), 0),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn indicator_values() {
        let h = Indicator::new(3);
        assert_eq!(h.eval(Fe::ZERO), Fe::ZERO);
        for t in 1..=3i64 {
            assert_eq!(h.eval(Fe::from_i64(t)), Fe::ONE);
            assert_eq!(h.eval(Fe::from_i64(-t)), Fe::ONE);
        }
        assert_eq!(h.degree(), 6);
    }

    #[test]
    fn bounded_f0_examples() {
        let s = Stream::from_items(4, &[1, 2, 2, 3]).unwrap();
        let (v, elems) = run_bf0(&s, 2, 1, None);
        assert_eq!(v, Verdict::Accept(fe(3)));
        assert_eq!(elems, 1 + 2 * 5);
        let d = Stream::from_items(16, &[0, 3, 5, 7, 9, 11]).unwrap();
        assert_eq!(run_bf0(&d, 1, 1, None).0, Verdict::Accept(fe(6)));
        // frequency 2 exceeds bound 1: honest prover refuses
        assert!(!run_bf0(&s, 1, 1, None).0.accepted());
        let last = Some(Adversary { message: 2, element: 4, delta: fe(1) });
        assert!(!run_bf0(&s, 2, 7, last).0.accepted());
        let mixed = Stream::from_frequencies(&[0, -2, 1, 0, 3, 0, 0, -1]);
        assert_eq!(run_bf0(&mixed, 3, 2, None).0, Verdict::Accept(fe(4)));
    }
}
