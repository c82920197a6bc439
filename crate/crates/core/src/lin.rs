//! Linearization protocols.
//!
//! The data is embedded as a 0/1 function `A` on `{0,1}^d` whose
//! multilinear extension `f` the verifier evaluates at a committed point
//! `r` while streaming. An expression collapses the top variable with OR
//! (`∐`) or AND (`Π`), re-linearizes every remaining variable, repeats,
//! and finally sums the rest. Each round strips the outermost operator.
//!
//! Variables are label bits. Collapsing always removes the highest
//! remaining bit, so after `c` collapses the live variables are bits
//! `0..d-c`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::field::Fe;
use crate::mle::{chi_index, interpolate_at, num_vars};
use crate::stream::{Stream, StreamUpdate};
use crate::sumcheck::{random_point, TAG_CHALLENGE, TAG_CLAIM, TAG_ROUND};
use crate::transport::{expect, Link, SpaceMeter, TransportError, Verdict};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinError {
    #[error("{what} {value} must be a power of two")]
    NotPowerOfTwo { what: &'static str, value: u64 },
    #[error("index {index} outside universe {n}")]
    OutOfRange { index: u64, n: u64 },
    #[error("more than {0} stream updates")]
    Capacity(u64),
    #[error("update ({index}, {delta}) not allowed: {why}")]
    BadUpdate { index: u64, delta: i64, why: &'static str },
    #[error("variable {var} not in table")]
    NoVariable { var: usize },
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Sum(usize),
    Or(usize),
    And(usize),
    Lin(usize),
}

impl Op {
    pub fn var(self) -> usize {
        match self {
            Op::Sum(v) | Op::Or(v) | Op::And(v) | Op::Lin(v) => v,
        }
    }

    /// Degree of the round polynomial.
    pub fn degree(self) -> usize {
        match self {
            Op::Lin(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collapse {
    Or,
    And,
}

impl Collapse {
    #[inline]
    fn apply(self, a: Fe, b: Fe) -> Fe {
        match self {
            Collapse::Or => a + b - a * b,
            Collapse::And => a * b,
        }
    }
}

/// Operators in stripping order (outermost first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinExpr {
    pub d: usize,
    pub sum_vars: usize,
    /// `levels[k - sum_vars]` collapses variable `k`
    pub levels: Vec<Collapse>,
    pub ops: Vec<Op>,
}

impl LinExpr {
    pub fn new(d: usize, sum_vars: usize, levels: Vec<Collapse>) -> Self {
        assert_eq!(sum_vars + levels.len(), d);
        let mut ops: Vec<Op> = (0..sum_vars).map(Op::Sum).collect();
        for k in sum_vars..d {
            ops.extend((0..k).rev().map(Op::Lin));
            ops.push(match levels[k - sum_vars] {
                Collapse::Or => Op::Or(k),
                Collapse::And => Op::And(k),
            });
        }
        LinExpr { d, sum_vars, levels, ops }
    }

    pub fn non_sum_len(&self) -> usize {
        self.ops.iter().filter(|o| !matches!(o, Op::Sum(_))).count()
    }

    /// Whether op `i` is the last one binding its variable; those rounds
    /// take their coordinate from the committed point.
    pub fn final_binders(&self) -> Vec<bool> {
        let mut seen = vec![false; self.d];
        let mut out = vec![false; self.ops.len()];
        for (i, op) in self.ops.iter().enumerate().rev() {
            let v = op.var();
            if !seen[v] {
                seen[v] = true;
                out[i] = true;
            }
        }
        out
    }

    pub fn proof_elems(&self) -> usize {
        1 + self.ops.iter().map(|o| o.degree() + 1).sum::<usize>()
    }
}

/// Problem and padded dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinProblem {
    /// universe `n`, at most `m` updates
    F0 { n: u64, m: u64 },
    /// text length `n`, pattern length `q`
    Pmww { n: u64, q: u64 },
}

impl LinProblem {
    /// Smallest problem that fits `stream`.
    pub fn for_stream(f0: bool, stream: &Stream, q: u64) -> Result<LinProblem, LinError> {
        if f0 {
            let n = stream.n.max(2).next_power_of_two();
            let m = (stream.updates.len() as u64).max(1).next_power_of_two();
            Ok(LinProblem::F0 { n, m })
        } else {
            let n = stream.n.checked_sub(q).filter(|&t| t >= q && q >= 1).ok_or_else(|| {
                LinError::Unsupported(format!("pattern length {q} does not fit universe {}", stream.n))
            })?;
            if !n.is_power_of_two() {
                return Err(LinError::NotPowerOfTwo { what: "text length", value: n });
            }
            Ok(LinProblem::Pmww { n, q })
        }
    }

    pub fn universe(&self) -> u64 {
        match *self {
            LinProblem::F0 { n, .. } => n,
            LinProblem::Pmww { n, q } => n + q,
        }
    }

    fn pm_bits(n: u64, q: u64) -> (usize, usize, usize) {
        let li = num_vars(n);
        let lq = num_vars(q);
        (li, lq, li)
    }

    /// Label with the position bits of pattern matching zero.
    fn pm_label(&self, c: u64, k: u64, sym: u64, i: u64) -> u64 {
        match *self {
            LinProblem::Pmww { n, q } => {
                let (li, lq, ls) = Self::pm_bits(n, q);
                i | k << li | sym << (li + lq) | c << (li + lq + ls)
            }
            _ => unreachable!(),
        }
    }

    /// Embedding entries contributed by one update. `pos` counts updates
    /// seen so far.
    fn entries(&self, pos: u64, u: &StreamUpdate, out: &mut Vec<Entry>) -> Result<(), LinError> {
        out.clear();
        let bad = |why| LinError::BadUpdate { index: u.index, delta: u.delta, why };
        match *self {
            LinProblem::F0 { n, m } => {
                if u.index >= n {
                    return Err(LinError::OutOfRange { index: u.index, n });
                }
                if pos >= m {
                    return Err(LinError::Capacity(m));
                }
                if u.delta <= 0 {
                    return Err(bad("item streams take positive counts only"));
                }
                out.push(Entry { label: u.index | pos << num_vars(n), range: None });
            }
            LinProblem::Pmww { n, q } => {
                if u.index >= n + q {
                    return Err(LinError::OutOfRange { index: u.index, n: n + q });
                }
                if u.index < n {
                    if u.delta < 1 || u.delta as u64 >= n {
                        return Err(bad("text symbols lie in [1, n)"));
                    }
                    let x = u.index;
                    for k in 0..q.min(x + 1) {
                        out.push(Entry { label: self.pm_label(0, k, u.delta as u64, x - k), range: None });
                    }
                } else {
                    if u.delta < 1 || u.delta as u64 > n {
                        return Err(bad("pattern symbols lie in [1, n]"));
                    }
                    let sym = if u.delta as u64 == n { 0 } else { u.delta as u64 };
                    out.push(Entry { label: self.pm_label(1, u.index - n, sym, 0), range: Some(n) });
                }
            }
        }
        Ok(())
    }

    /// Data-independent entries: the wildcard symbol 0 in the text rows
    /// and the pattern padding.
    fn constants(&self) -> Vec<Entry> {
        match *self {
            LinProblem::F0 { .. } => Vec::new(),
            LinProblem::Pmww { n, q } => {
                let qp = q.next_power_of_two();
                let mut v = Vec::new();
                for k in 0..qp {
                    let valid = if k < q { n - k } else { n };
                    v.push(Entry { label: self.pm_label(0, k, 0, 0), range: Some(valid) });
                    if k >= q {
                        v.push(Entry { label: self.pm_label(1, k, 0, 0), range: Some(n) });
                    }
                }
                v
            }
        }
    }

    fn range_bits(&self) -> usize {
        match *self {
            LinProblem::F0 { .. } => 0,
            LinProblem::Pmww { n, .. } => num_vars(n),
        }
    }
}

/// One label, or `label + i` for every `i < range` in the low bits.
#[derive(Debug, Clone, Copy)]
struct Entry {
    label: u64,
    range: Option<u64>,
}

/// `sum_{i < count} chi_i(r)`.
fn chi_range(r: &[Fe], count: u64) -> Fe {
    let len = r.len();
    if count >= 1u64 << len {
        return Fe::ONE;
    }
    let mut hi = Fe::ONE;
    let mut total = Fe::ZERO;
    // below bit k everything sums to one
    for k in (0..len).rev() {
        if (count >> k) & 1 == 1 {
            total += hi * (Fe::ONE - r[k]);
            hi *= r[k];
        } else {
            hi *= Fe::ONE - r[k];
        }
    }
    total
}

pub fn build_expression(problem: LinProblem) -> Result<LinExpr, LinError> {
    match problem {
        LinProblem::F0 { n, m } => {
            for (what, value) in [("universe", n), ("stream length", m)] {
                if !value.is_power_of_two() {
                    return Err(LinError::NotPowerOfTwo { what, value });
                }
            }
            let (k1, k2) = (num_vars(n), num_vars(m));
            Ok(LinExpr::new(k1 + k2, k1, vec![Collapse::Or; k2]))
        }
        LinProblem::Pmww { n, q } => {
            if !n.is_power_of_two() || n < 2 {
                return Err(LinError::NotPowerOfTwo { what: "text length", value: n });
            }
            if q == 0 || q > n {
                return Err(LinError::Unsupported(format!("pattern length {q} with text length {n}")));
            }
            let (li, lq, ls) = LinProblem::pm_bits(n, q);
            let mut levels = vec![Collapse::And; lq];
            levels.extend(vec![Collapse::Or; ls]);
            levels.push(Collapse::And);
            Ok(LinExpr::new(li + lq + ls + 1, li, levels))
        }
    }
}

/// Labels of `A` as the honest prover stores them.
pub fn base_support(problem: LinProblem, stream: &Stream) -> Result<Vec<u64>, LinError> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let push = |e: &Entry, out: &mut Vec<u64>| match e.range {
        None => out.push(e.label),
        Some(c) => out.extend((0..c).map(|i| e.label | i)),
    };
    for e in problem.constants() {
        push(&e, &mut out);
    }
    for (pos, u) in stream.updates.iter().enumerate() {
        problem.entries(pos as u64, u, &mut buf)?;
        for e in &buf {
            push(e, &mut out);
        }
    }
    Ok(out)
}

fn collapse(supp: &[u64], op: Collapse, k: usize) -> Vec<u64> {
    let mask = (1u64 << k) - 1;
    let mut v: Vec<u64> = match op {
        Collapse::Or => supp.iter().map(|&l| l & mask).collect(),
        Collapse::And => supp.iter().filter(|&&l| l >> k & 1 == 1 && supp.binary_search(&(l & mask)).is_ok()).map(|&l| l & mask).collect(),
    };
    v.sort_unstable();
    v.dedup();
    v
}

#[inline]
fn chi(bit: u64, a: Fe) -> Fe {
    if bit == 1 {
        a
    } else {
        Fe::ONE - a
    }
}

fn reverse_low(l: u64, k: usize) -> u64 {
    if k == 0 {
        0
    } else {
        (l & ((1u64 << k) - 1)).reverse_bits() >> (64 - k)
    }
}

fn recv_challenge(link: &mut Link) -> Result<Fe, TransportError> {
    let m = link.recv()?;
    m.elems.first().copied().ok_or_else(|| TransportError::Framing("empty challenge".into()))
}

/// Prover. Returns element visits, a proxy for field work.
pub fn lin_prove(link: &mut Link, expr: &LinExpr, mut base: Vec<u64>) -> Result<u64, TransportError> {
    let d = expr.d;
    let s = expr.sum_vars;
    base.sort_unstable();
    base.dedup();
    let mut supp: Vec<Vec<u64>> = vec![Vec::new(); d + 1];
    supp[d] = base;
    for k in (s..d).rev() {
        supp[k] = collapse(&supp[k + 1], expr.levels[k - s], k);
    }
    let mut ops = 0u64;
    let mut a = vec![Fe::ZERO; d];
    link.send(TAG_CLAIM, &[Fe::new(supp[s].len() as u64)])?;

    let mut w = vec![Fe::ONE; supp[s].len()];
    for v in 0..s {
        let mut out = [Fe::ZERO; 2];
        for (l, &wl) in supp[s].iter().zip(&w) {
            out[(l >> v & 1) as usize] += wl;
        }
        link.send(TAG_ROUND, &out)?;
        let r = recv_challenge(link)?;
        for (l, wl) in supp[s].iter().zip(w.iter_mut()) {
            *wl *= chi(l >> v & 1, r);
        }
        a[v] = r;
        ops += 2 * w.len() as u64;
    }

    for k in s..d {
        let op = expr.levels[k - s];
        let mut el = std::mem::take(&mut supp[k + 1]);
        el.sort_unstable_by_key(|&l| reverse_low(l, k));
        let mut hi = vec![Fe::ONE; el.len()];
        let mut lo: Vec<Fe> = el.iter().map(|&l| (0..k.saturating_sub(1)).map(|t| chi(l >> t & 1, a[t])).product()).collect();
        ops += (el.len() * k) as u64;
        for v in (0..k).rev() {
            let mut out = [Fe::ZERO; 3];
            let gmask = (1u64 << v) - 1;
            let mut i = 0;
            while i < el.len() {
                let key = el[i] & gmask;
                let lw = lo[i];
                let mut acc = [[Fe::ZERO; 2]; 2];
                while i < el.len() && el[i] & gmask == key {
                    acc[(el[i] >> v & 1) as usize][(el[i] >> k & 1) as usize] += hi[i];
                    i += 1;
                }
                for (x, o) in out.iter_mut().enumerate() {
                    let x = Fe::new(x as u64);
                    let g0 = acc[0][0] + x * (acc[1][0] - acc[0][0]);
                    let g1 = acc[0][1] + x * (acc[1][1] - acc[0][1]);
                    *o += lw * op.apply(g0, g1);
                }
            }
            link.send(TAG_ROUND, &out)?;
            let r = recv_challenge(link)?;
            for (l, h) in el.iter().zip(hi.iter_mut()) {
                *h *= chi(l >> v & 1, r);
            }
            a[v] = r;
            ops += 3 * el.len() as u64;
            if v >= 1 {
                let t = v - 1;
                let inv = [(Fe::ONE - a[t]).inv(), a[t].inv()];
                match inv {
                    [Ok(i0), Ok(i1)] => {
                        for (l, x) in el.iter().zip(lo.iter_mut()) {
                            *x *= if l >> t & 1 == 1 { i1 } else { i0 };
                        }
                    }
                    _ => {
                        for (l, x) in el.iter().zip(lo.iter_mut()) {
                            *x = (0..t).map(|u| chi(l >> u & 1, a[u])).product();
                        }
                    }
                }
            }
        }
        let mut out = [Fe::ZERO; 2];
        for (l, &h) in el.iter().zip(&hi) {
            out[(l >> k & 1) as usize] += h;
        }
        link.send(TAG_ROUND, &out)?;
        a[k] = recv_challenge(link)?;
        ops += el.len() as u64;
    }
    Ok(ops)
}

/// Streaming verifier; holds the point, the current bindings and a few
/// scalars.
pub struct LinVerifier {
    problem: LinProblem,
    expr: LinExpr,
    r: Vec<Fe>,
    rng: ChaCha20Rng,
    f: Fe,
    pos: u64,
    buf: Vec<Entry>,
    pub meter: SpaceMeter,
}

impl LinVerifier {
    pub fn new(problem: LinProblem, seed: u64) -> Result<Self, LinError> {
        let expr = build_expression(problem)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let r = random_point(&mut rng, expr.d);
        let mut v = LinVerifier { problem, expr, r, rng, f: Fe::ZERO, pos: 0, buf: Vec::new(), meter: SpaceMeter::default() };
        for e in problem.constants() {
            v.f += v.entry_value(&e);
        }
        v.meter.observe(v.expr.d + 4);
        Ok(v)
    }

    pub fn expr(&self) -> &LinExpr {
        &self.expr
    }

    fn entry_value(&self, e: &Entry) -> Fe {
        match e.range {
            None => chi_index(e.label, &self.r),
            Some(c) => {
                let rb = self.problem.range_bits();
                chi_index(e.label >> rb, &self.r[rb..]) * chi_range(&self.r[..rb], c)
            }
        }
    }

    pub fn update(&mut self, u: &StreamUpdate) -> Result<(), LinError> {
        let mut buf = std::mem::take(&mut self.buf);
        self.problem.entries(self.pos, u, &mut buf)?;
        for e in &buf {
            self.f += self.entry_value(e);
        }
        self.buf = buf;
        self.pos += 1;
        Ok(())
    }

    pub fn observe_stream(&mut self, s: &Stream) -> Result<(), LinError> {
        for u in &s.updates {
            self.update(u)?;
        }
        Ok(())
    }

    pub fn verify(&mut self, link: &mut Link) -> Result<Verdict, TransportError> {
        let d = self.expr.d;
        let claim = match expect(link, TAG_CLAIM, 1, 0)? {
            Ok(c) => c[0],
            Err(v) => return Ok(v),
        };
        let fin = self.expr.final_binders();
        let mut a = vec![Fe::ZERO; d];
        let mut c = claim;
        for (idx, &op) in self.expr.ops.iter().enumerate() {
            self.meter.observe(2 * d + 8);
            let s = match expect(link, TAG_ROUND, op.degree() + 1, idx)? {
                Ok(s) => s,
                Err(v) => return Ok(v),
            };
            let ok = match op {
                Op::Sum(_) => s[0] + s[1] == c,
                Op::Or(_) => s[0] + s[1] - s[0] * s[1] == c,
                Op::And(_) => s[0] * s[1] == c,
                Op::Lin(v) => a[v] * s[1] + (Fe::ONE - a[v]) * s[0] == c,
            };
            if !ok {
                return Ok(Verdict::reject(idx, format!("round check failed for {op:?}")));
            }
            let v = op.var();
            let ch = if fin[idx] { self.r[v] } else { Fe::random(&mut self.rng) };
            c = interpolate_at(&s, ch);
            a[v] = ch;
            link.send(TAG_CHALLENGE, &[ch])?;
        }
        if c != self.f {
            return Ok(Verdict::reject(self.expr.ops.len(), "final check against input fingerprint failed"));
        }
        Ok(Verdict::Accept(claim))
    }
}

/// Values of a polynomial on `{0..grid}^vars`, first variable fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyTable {
    pub vars: Vec<usize>,
    pub grid: usize,
    pub vals: Vec<Fe>,
}

impl PolyTable {
    /// Tabulates the multilinear extension of `cube` (indexed by label).
    pub fn multilinear(cube: &[Fe], d: usize, grid: usize) -> PolyTable {
        assert_eq!(cube.len(), 1 << d);
        let size = grid.pow(d as u32);
        let vals = (0..size)
            .map(|mut idx| {
                let pt: Vec<Fe> = (0..d)
                    .map(|_| {
                        let x = idx % grid;
                        idx /= grid;
                        Fe::new(x as u64)
                    })
                    .collect();
                cube.iter().enumerate().map(|(l, &v)| v * chi_index(l as u64, &pt)).sum()
            })
            .collect();
        PolyTable { vars: (0..d).collect(), grid, vals }
    }

    pub fn at(&self, coords: &[usize]) -> Fe {
        let mut idx = 0;
        for &c in coords.iter().rev() {
            idx = idx * self.grid + c;
        }
        self.vals[idx]
    }
}

/// Applies one operator to a tabulated polynomial. Every operator only
/// reads its variable at 0 and 1, so grid values stay exact.
pub fn apply_operator(op: Op, t: &PolyTable) -> Result<PolyTable, LinError> {
    let var = op.var();
    let pos = t.vars.iter().position(|&v| v == var).ok_or(LinError::NoVariable { var })?;
    let g = t.grid;
    let stride = g.pow(pos as u32);
    let read = |idx: usize, x: usize| {
        let digit = (idx / stride) % g;
        t.vals[idx - digit * stride + x * stride]
    };
    match op {
        Op::Lin(_) => {
            let vals = (0..t.vals.len())
                .map(|idx| {
                    let x = Fe::new(((idx / stride) % g) as u64);
                    x * read(idx, 1) + (Fe::ONE - x) * read(idx, 0)
                })
                .collect();
            Ok(PolyTable { vars: t.vars.clone(), grid: g, vals })
        }
        _ => {
            let mut vars = t.vars.clone();
            vars.remove(pos);
            let size = t.vals.len() / g;
            let vals = (0..size)
                .map(|o| {
                    // reinsert digit 0 for the removed variable
                    let idx = (o / stride) * stride * g + o % stride;
                    let (y0, y1) = (read(idx, 0), read(idx, 1));
                    match op {
                        Op::Sum(_) => y0 + y1,
                        Op::Or(_) => y0 + y1 - y0 * y1,
                        Op::And(_) => y0 * y1,
                        Op::Lin(_) => unreachable!(),
                    }
                })
                .collect();
            Ok(PolyTable { vars, grid: g, vals })
        }
    }
}

/// Evaluates `expr` over `A` by applying operators innermost first.
pub fn evaluate_expression(expr: &LinExpr, cube: &[Fe], grid: usize) -> Result<PolyTable, LinError> {
    let mut t = PolyTable::multilinear(cube, expr.d, grid);
    for &op in expr.ops.iter().rev() {
        t = apply_operator(op, &t)?;
    }
    Ok(t)
}
