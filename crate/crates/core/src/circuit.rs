//! Layered arithmetic circuits.
//!
//! Layer 0 is the output side and the last layer holds the inputs. Gate
//! labels and wire indices are little-endian bit strings, so bit `k` of a
//! label is variable `k` of the wiring predicates. Most layers are stored
//! as [`Pattern`]s: a gate family whose input labels are bit maps (or a
//! windowed sum) of the output label. Patterns give closed-form predicate
//! extensions in `O(v)` time and expand to explicit gates on demand.
//!
//! Slots not produced by any pattern carry no wires and evaluate to zero;
//! builders use them as the zero operand of copy gates.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::field::Fe;
use crate::mle::chi_index;
use crate::stream::{Problem, Stream};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("size {0} must be a power of two (at least 2)")]
    NotPowerOfTwo(u64),
    #[error("unsupported circuit: {0}")]
    Unsupported(String),
    #[error("layer {0} has no closed-form wiring")]
    NoClosedForm(usize),
    #[error("input has {got} entries, expected {want}")]
    InputLength { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Add,
    Mul,
    /// `in1^j * in2^j`
    Pow(u32),
    Input,
    Const(u8),
}

impl GateKind {
    #[inline]
    pub fn apply(self, a: Fe, b: Fe) -> Fe {
        match self {
            GateKind::Add => a + b,
            GateKind::Mul => a * b,
            GateKind::Pow(j) => (a * b).pow(j as u64),
            GateKind::Input | GateKind::Const(_) => panic!("{self} has no inputs"),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::Add => write!(f, "add"),
            GateKind::Mul => write!(f, "mul"),
            GateKind::Pow(j) => write!(f, "pow{j}"),
            GateKind::Input => write!(f, "input"),
            GateKind::Const(c) => write!(f, "const{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub out: u32,
    pub kind: GateKind,
    pub in1: u32,
    pub in2: u32,
}

/// Source of one bit of an input label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Src {
    Zero,
    One,
    /// bit `m` of the group index
    U(u8),
}

/// A run of group-index bits `[start, start+len)` whose value ranges over
/// `[0, count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    pub start: u8,
    pub len: u8,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ref {
    Bits(Vec<Src>),
    /// Low `len` bits hold `field[a] + field[b]`; `hi` gives the rest.
    Window { a: usize, b: usize, len: u8, hi: Vec<Src> },
}

fn src_bit(s: Src, u: u64) -> u64 {
    match s {
        Src::Zero => 0,
        Src::One => 1,
        Src::U(m) => (u >> m) & 1,
    }
}

impl Ref {
    fn index(&self, u: u64, vals: &[u64]) -> u64 {
        match self {
            Ref::Bits(bits) => bits.iter().enumerate().map(|(k, &s)| src_bit(s, u) << k).sum(),
            Ref::Window { a, b, len, hi } => {
                let lo = vals[*a] + vals[*b];
                lo | hi
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| src_bit(s, u) << (*len as usize + k))
                    .sum::<u64>()
            }
        }
    }
}

/// Gates `slot + (u << slot_bits)` for every group index `u` in the
/// product of `fields`; group bits outside all fields are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub kind: GateKind,
    pub slot: u64,
    pub slot_bits: u8,
    pub fields: Vec<Field>,
    pub in1: Ref,
    pub in2: Ref,
}

impl Pattern {
    pub fn count(&self) -> u64 {
        self.fields.iter().map(|f| f.count).product()
    }

    pub fn for_each(&self, mut f: impl FnMut(u64, u64, u64)) {
        let mut vals = vec![0u64; self.fields.len()];
        for idx in 0..self.count() {
            let mut rem = idx;
            let mut u = 0;
            for (k, fl) in self.fields.iter().enumerate() {
                vals[k] = rem % fl.count;
                rem /= fl.count;
                u |= vals[k] << fl.start;
            }
            let out = self.slot | (u << self.slot_bits);
            f(out, self.in1.index(u, &vals), self.in2.index(u, &vals));
        }
    }

    /// Extension of this pattern's wiring predicate at `(p, w1, w2)`.
    pub fn mle(&self, p: &[Fe], w1: &[Fe], w2: &[Fe]) -> Fe {
        let c = self.slot_bits as usize;
        let mut acc = Fe::ONE;
        for (k, &pk) in p.iter().enumerate().take(c) {
            acc *= chi((self.slot >> k) & 1 == 1, pk);
        }
        let ub = p.len() - c;
        let mut f: Vec<[Fe; 2]> = p[c..].iter().map(|&x| [Fe::ONE - x, x]).collect();
        let mut apply = |bits: &[Src], w: &[Fe], off: usize, acc: &mut Fe| {
            for (t, &wt) in w.iter().enumerate().skip(off) {
                match bits.get(t - off).copied().unwrap_or(Src::Zero) {
                    Src::Zero => *acc *= Fe::ONE - wt,
                    Src::One => *acc *= wt,
                    Src::U(m) => {
                        let e = &mut f[m as usize];
                        e[0] *= Fe::ONE - wt;
                        e[1] *= wt;
                    }
                }
            }
        };
        let window = match &self.in1 {
            Ref::Bits(b) => {
                apply(b, w1, 0, &mut acc);
                None
            }
            Ref::Window { a, b, len, hi } => {
                apply(hi, w1, *len as usize, &mut acc);
                Some((*a, *b, *len as usize))
            }
        };
        match &self.in2 {
            Ref::Bits(b) => apply(b, w2, 0, &mut acc),
            Ref::Window { .. } => panic!("window reference only supported as first input"),
        }
        let mut covered = vec![false; ub];
        for fl in &self.fields {
            for m in fl.start..fl.start + fl.len {
                covered[m as usize] = true;
            }
        }
        for m in 0..ub {
            if !covered[m] {
                acc *= f[m][0];
            }
        }
        match window {
            None => {
                for fl in &self.fields {
                    let s = fl.start as usize;
                    acc *= range_sum(&f[s..s + fl.len as usize], fl.count);
                }
            }
            Some((a, b, len)) => {
                assert_eq!(self.fields.len(), 2, "window patterns use exactly two fields");
                acc *= window_sum(&f, self.fields[a], self.fields[b], &w1[..len]);
            }
        }
        acc
    }
}

#[inline]
fn chi(bit: bool, x: Fe) -> Fe {
    if bit {
        x
    } else {
        Fe::ONE - x
    }
}

/// `sum_{x < count} prod_k f[k][x_k]`.
fn range_sum(f: &[[Fe; 2]], count: u64) -> Fe {
    let len = f.len();
    if count >= 1u64 << len {
        return f.iter().map(|e| e[0] + e[1]).product();
    }
    let mut low = Vec::with_capacity(len + 1);
    low.push(Fe::ONE);
    for e in f {
        let l = *low.last().unwrap();
        low.push(l * (e[0] + e[1]));
    }
    let mut hi = Fe::ONE;
    let mut total = Fe::ZERO;
    for k in (0..len).rev() {
        if (count >> k) & 1 == 1 {
            total += hi * f[k][0] * low[k];
            hi *= f[k][1];
        } else {
            hi *= f[k][0];
        }
    }
    total
}

/// `sum_{x < ca, y < cb} prod f[x bits] f[y bits] chi_{x+y}(w)`, by a
/// carry and comparison automaton over the low bits.
fn window_sum(f: &[[Fe; 2]], fa: Field, fb: Field, w: &[Fe]) -> Fe {
    // state = carry | lt_a << 1 | lt_b << 2
    let mut st = [Fe::ZERO; 8];
    st[0] = Fe::ONE;
    for (k, &wk) in w.iter().enumerate() {
        let mut nx = [Fe::ZERO; 8];
        let in_a = k < fa.len as usize;
        let in_b = k < fb.len as usize;
        let ca = (fa.count >> k) & 1;
        let cb = (fb.count >> k) & 1;
        for (s, &val) in st.iter().enumerate() {
            if val.is_zero() {
                continue;
            }
            let (carry, lta, ltb) = (s & 1, (s >> 1) & 1, (s >> 2) & 1);
            for x in 0..=(in_a as usize) {
                let wx = if in_a { f[fa.start as usize + k][x] } else { Fe::ONE };
                for y in 0..=(in_b as usize) {
                    let wy = if in_b { f[fb.start as usize + k][y] } else { Fe::ONE };
                    let sum = x + y + carry;
                    let o = sum & 1;
                    let lta2 = if in_a { cmp_step(x as u64, ca, lta) } else { lta };
                    let ltb2 = if in_b { cmp_step(y as u64, cb, ltb) } else { ltb };
                    let ns = (sum >> 1) | (lta2 << 1) | (ltb2 << 2);
                    nx[ns] += val * wx * wy * chi(o == 1, wk);
                }
            }
        }
        st = nx;
    }
    let full_a = fa.count >> fa.len > 0;
    let full_b = fb.count >> fb.len > 0;
    st.iter()
        .enumerate()
        .filter(|(s, _)| s & 1 == 0 && ((s >> 1) & 1 == 1 || full_a) && ((s >> 2) & 1 == 1 || full_b))
        .map(|(_, &v)| v)
        .sum()
}

#[inline]
fn cmp_step(x: u64, c: u64, lt: usize) -> usize {
    (x < c || (x == c && lt == 1)) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Wiring {
    Input,
    Patterns(Vec<Pattern>),
    Gates(Vec<Gate>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub log_width: usize,
    pub wiring: Wiring,
}

/// Predicate extensions of one layer, one per gate kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WiringValues {
    pub add: Fe,
    pub mul: Fe,
    pub pow: Fe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiringMode {
    Closed,
    Generic,
}

impl Layer {
    pub fn width(&self) -> usize {
        1 << self.log_width
    }

    pub fn for_each_gate(&self, mut f: impl FnMut(Gate)) {
        match &self.wiring {
            Wiring::Input => {}
            Wiring::Gates(g) => g.iter().copied().for_each(f),
            Wiring::Patterns(ps) => {
                for p in ps {
                    p.for_each(|out, a, b| {
                        f(Gate { out: out as u32, kind: p.kind, in1: a as u32, in2: b as u32 })
                    })
                }
            }
        }
    }

    pub fn gates(&self) -> Vec<Gate> {
        let mut v = Vec::with_capacity(self.gate_count() as usize);
        self.for_each_gate(|g| v.push(g));
        v
    }

    /// Gates with wires (padding excluded).
    pub fn gate_count(&self) -> u64 {
        match &self.wiring {
            Wiring::Input => 0,
            Wiring::Gates(g) => g.len() as u64,
            Wiring::Patterns(ps) => ps.iter().map(|p| p.count()).sum(),
        }
    }

    /// The exponent `j` of this layer's power gates, if any.
    pub fn pow_j(&self) -> Option<u32> {
        let mut j = None;
        let mut see = |k: GateKind| {
            if let GateKind::Pow(x) = k {
                assert!(j.is_none() || j == Some(x), "one power per layer");
                j = Some(x);
            }
        };
        match &self.wiring {
            Wiring::Input => {}
            Wiring::Gates(g) => g.iter().for_each(|g| see(g.kind)),
            Wiring::Patterns(ps) => ps.iter().for_each(|p| see(p.kind)),
        }
        j
    }

    /// Degree of the layer polynomial in each label variable of the
    /// layer below.
    pub fn input_degree(&self) -> usize {
        self.pow_j().map_or(2, |j| j as usize + 1)
    }

    pub fn wiring_closed(&self, p: &[Fe], w1: &[Fe], w2: &[Fe]) -> Option<WiringValues> {
        let ps = match &self.wiring {
            Wiring::Patterns(ps) => ps,
            _ => return None,
        };
        let mut out = WiringValues::default();
        for pat in ps {
            let v = pat.mle(p, w1, w2);
            match pat.kind {
                GateKind::Add => out.add += v,
                GateKind::Mul => out.mul += v,
                GateKind::Pow(_) => out.pow += v,
                _ => unreachable!(),
            }
        }
        Some(out)
    }

    /// One pass over the gates.
    pub fn wiring_generic(&self, p: &[Fe], w1: &[Fe], w2: &[Fe]) -> WiringValues {
        let mut out = WiringValues::default();
        self.for_each_gate(|g| {
            let v = chi_index(g.out as u64, p) * chi_index(g.in1 as u64, w1) * chi_index(g.in2 as u64, w2);
            match g.kind {
                GateKind::Add => out.add += v,
                GateKind::Mul => out.mul += v,
                GateKind::Pow(_) => out.pow += v,
                _ => unreachable!(),
            }
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateSet {
    Basic,
    Pow8,
    Pow16,
}

impl GateSet {
    /// `j` of the power gate `x^j y^j`.
    pub fn pow_j(self) -> Option<u32> {
        match self {
            GateSet::Basic => None,
            GateSet::Pow8 => Some(4),
            GateSet::Pow16 => Some(8),
        }
    }
}

/// Gate set plus the choice of final summation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GateConfig {
    pub set: GateSet,
    pub big_sum: bool,
}

impl GateConfig {
    pub const ALL: [GateConfig; 6] = [
        GateConfig { set: GateSet::Basic, big_sum: false },
        GateConfig { set: GateSet::Pow8, big_sum: false },
        GateConfig { set: GateSet::Pow16, big_sum: false },
        GateConfig { set: GateSet::Basic, big_sum: true },
        GateConfig { set: GateSet::Pow8, big_sum: true },
        GateConfig { set: GateSet::Pow16, big_sum: true },
    ];
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { set: GateSet::Basic, big_sum: false }
    }
}

impl fmt::Display for GateConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.set {
            GateSet::Basic => "basic",
            GateSet::Pow8 => "pow8",
            GateSet::Pow16 => "pow16",
        };
        if self.big_sum {
            write!(f, "{s}+bigsum")
        } else {
            write!(f, "{s}")
        }
    }
}

impl FromStr for GateConfig {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        let (base, big_sum) = match lower.split_once(['+', ',']) {
            Some((b, "bigsum" | "big-sum" | "sum")) => (b.to_string(), true),
            Some((b, "tree" | "tree-sum")) => (b.to_string(), false),
            Some(_) => return Err(format!("unknown gate set '{s}'")),
            None => (lower, false),
        };
        let set = match base.as_str() {
            "basic" => GateSet::Basic,
            "pow8" => GateSet::Pow8,
            "pow16" => GateSet::Pow16,
            _ => return Err(format!("unknown gate set '{s}' (basic, pow8, pow16, optional +bigsum)")),
        };
        Ok(GateConfig { set, big_sum })
    }
}

/// How stream updates and prover-supplied values land in input slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputMap {
    /// slot = stream index
    Direct { n: u64 },
    /// `A` and `x` at their stream indices, `-b_i` at `base_b + i`
    MvMult { n: u64, base_b: u64 },
    /// text at its index; pattern symbol `c` at offset `j` yields
    /// `n - c` at `base_u + j` and `-c` at `base_np + j`
    Pmww { n: u64, q: u64, base_u: u64, base_np: u64 },
}

impl InputMap {
    /// Universe size of the matching stream.
    pub fn universe(&self) -> u64 {
        match *self {
            InputMap::Direct { n } => n,
            InputMap::MvMult { n, .. } => n * n + n,
            InputMap::Pmww { n, q, .. } => n + q,
        }
    }

    pub fn map_update(&self, index: u64, delta: Fe, mut f: impl FnMut(u64, Fe)) {
        match *self {
            InputMap::Direct { .. } | InputMap::MvMult { .. } => f(index, delta),
            InputMap::Pmww { n, base_u, base_np, .. } => {
                if index < n {
                    f(index, delta)
                } else {
                    f(base_u + index - n, -delta);
                    f(base_np + index - n, -delta);
                }
            }
        }
    }

    /// Data-independent slot values.
    pub fn constants(&self, mut f: impl FnMut(u64, Fe)) {
        if let InputMap::Pmww { n, q, base_u, .. } = *self {
            for j in 0..q {
                f(base_u + j, Fe::new(n));
            }
        }
    }

    /// Number of values the prover supplies after the stream.
    pub fn prover_len(&self) -> usize {
        match *self {
            InputMap::MvMult { n, .. } => n as usize,
            _ => 0,
        }
    }

    pub fn map_prover(&self, i: usize, v: Fe, mut f: impl FnMut(u64, Fe)) {
        if let InputMap::MvMult { base_b, .. } = *self {
            f(base_b + i as u64, -v)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Problem(Problem),
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub family: Family,
    pub config: GateConfig,
    /// data size: universe for F2/F0, matrix side, text length
    pub n: u64,
    pub q: u64,
    /// `layers[0]` is the output layer, or with `big_sum` the layer whose
    /// values are summed; the last layer holds the inputs.
    pub layers: Vec<Layer>,
    pub input: InputMap,
}

impl Circuit {
    /// Non-input layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn input_layer(&self) -> &Layer {
        self.layers.last().unwrap()
    }

    /// Sum of padded layer widths, inputs included.
    pub fn size(&self) -> u64 {
        self.layers.iter().map(|l| l.width() as u64).sum::<u64>() + self.config.big_sum as u64
    }

    /// Wired gates plus input slots actually fed by data.
    pub fn gate_count(&self) -> u64 {
        self.layers.iter().map(|l| l.gate_count()).sum::<u64>()
            + self.input.universe()
            + self.input.prover_len() as u64
            + self.config.big_sum as u64
    }

    /// Input-layer values from an aggregated stream plus prover values.
    pub fn input_values(&self, stream: &Stream, prover: &[Fe]) -> Result<Vec<Fe>, CircuitError> {
        let direct = matches!(self.input, InputMap::Direct { .. });
        if stream.n > self.input.universe() || (!direct && stream.n != self.input.universe()) {
            return Err(CircuitError::InputLength { got: stream.n as usize, want: self.input.universe() as usize });
        }
        if prover.len() != self.input.prover_len() {
            return Err(CircuitError::InputLength { got: prover.len(), want: self.input.prover_len() });
        }
        let mut v = vec![Fe::ZERO; self.input_layer().width()];
        self.input.constants(|s, x| v[s as usize] += x);
        for u in &stream.updates {
            self.input.map_update(u.index, Fe::from_i64(u.delta), |s, x| v[s as usize] += x);
        }
        for (i, &b) in prover.iter().enumerate() {
            self.input.map_prover(i, b, |s, x| v[s as usize] += x);
        }
        Ok(v)
    }

    /// All layer values, indexed like `layers`.
    pub fn evaluate(&self, input: &[Fe]) -> Result<Vec<Vec<Fe>>, CircuitError> {
        let d = self.depth();
        let want = self.layers[d].width();
        if input.len() != want {
            return Err(CircuitError::InputLength { got: input.len(), want });
        }
        let mut vals: Vec<Vec<Fe>> = vec![Vec::new(); d + 1];
        vals[d] = input.to_vec();
        for i in (0..d).rev() {
            let mut cur = vec![Fe::ZERO; self.layers[i].width()];
            let below = &vals[i + 1];
            self.layers[i].for_each_gate(|g| {
                cur[g.out as usize] = g.kind.apply(below[g.in1 as usize], below[g.in2 as usize]);
            });
            vals[i] = cur;
        }
        Ok(vals)
    }

    pub fn output(&self, values: &[Vec<Fe>]) -> Fe {
        if self.config.big_sum {
            values[0].iter().copied().sum()
        } else {
            values[0][0]
        }
    }

    /// Problem answer from the circuit output: pattern occurrences are
    /// windows minus mismatching windows, the rest pass through.
    pub fn answer(&self, output: Fe) -> Fe {
        match self.family {
            Family::Problem(Problem::Pmww) => Fe::new(self.n - self.q + 1) - output,
            _ => output,
        }
    }

    pub fn dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.depth();
        for (i, layer) in self.layers.iter().enumerate().take(d) {
            let mut gates = layer.gates();
            gates.sort_by_key(|g| g.out);
            for g in gates {
                writeln!(w, "{i} {} {} {} {}", g.out, g.kind, g.in1, g.in2)?;
            }
        }
        for s in 0..self.layers[d].width() {
            writeln!(w, "{d} {s} input - -")?;
        }
        Ok(())
    }
}

fn log2_exact(n: u64) -> Result<usize, CircuitError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(CircuitError::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros() as usize)
}

fn ulog(bits: usize) -> Vec<Src> {
    (0..bits as u8).map(Src::U).collect()
}

/// `low` on the first bits, the bits of `base` above.
fn bits_over(low: Vec<Src>, base: u64, v: usize) -> Ref {
    let mut b = low;
    for k in b.len()..v {
        b.push(if (base >> k) & 1 == 1 { Src::One } else { Src::Zero });
    }
    b.truncate(v);
    Ref::Bits(b)
}

fn consts(index: u64, v: usize) -> Ref {
    bits_over(Vec::new(), index, v)
}

/// Slot `s` of group `u` in a layer with `c` slot bits.
fn rel(s: u64, c: usize, ubits: usize) -> Vec<Src> {
    let mut b: Vec<Src> = (0..c).map(|k| if (s >> k) & 1 == 1 { Src::One } else { Src::Zero }).collect();
    b.extend(ulog(ubits));
    b
}

/// One level of a grouped computation: `(upper slot bits, [(slot, kind,
/// lower slot a, lower slot b)])`.
type Level = (usize, Vec<(u64, GateKind, u64, u64)>);

/// Levels computing `a^(p-1)` per group from `a` at slot 0. Warm-up
/// builds `X = a^(2D)` with `D = B-1`; then `X <- X^B` while `R`
/// collects `X`, giving `a^(2(B^K - 1)) = a^(p-1)` for `B^K = 2^60`.
fn flt_levels(set: GateSet) -> Vec<Level> {
    use GateKind::*;
    let (mut lv, step, k): (Vec<Level>, GateKind, usize) = match set {
        GateSet::Basic => (vec![(1, vec![(0, Mul, 0, 0)])], Mul, 60),
        GateSet::Pow8 => (
            vec![
                (1, vec![(0, Mul, 0, 0), (1, Pow(4), 0, 0)]),
                (1, vec![(0, Mul, 0, 1), (1, Mul, 0, 0)]),
                (1, vec![(0, Mul, 0, 1)]),
            ],
            Pow(4),
            20,
        ),
        GateSet::Pow16 => (
            vec![
                (1, vec![(0, Mul, 0, 0), (1, Pow(8), 0, 0)]),
                (1, vec![(0, Mul, 0, 1), (1, Mul, 0, 0)]),
                (1, vec![(0, Mul, 0, 1), (1, Mul, 1, 1)]),
                (1, vec![(0, Mul, 0, 1)]),
            ],
            Pow(8),
            15,
        ),
    };
    // slot 1 of the last warm-up level is unwired, so Add copies X
    lv.push((1, vec![(0, step, 0, 0), (1, Add, 0, 1)]));
    for _ in 2..k {
        lv.push((1, vec![(0, step, 0, 0), (1, Mul, 1, 0)]));
    }
    lv.push((0, vec![(0, Mul, 1, 0)]));
    lv
}

struct Builder {
    /// bottom-up
    layers: Vec<Layer>,
}

impl Builder {
    fn new(input_log: usize) -> Self {
        Builder { layers: vec![Layer { log_width: input_log, wiring: Wiring::Input }] }
    }

    fn top(&self) -> usize {
        self.layers.last().unwrap().log_width
    }

    fn push(&mut self, log_width: usize, ps: Vec<Pattern>) {
        self.layers.push(Layer { log_width, wiring: Wiring::Patterns(ps) });
    }

    /// Pairwise sums until the width is `2^target`.
    fn tree(&mut self, target: usize) {
        while self.top() > target {
            let v = self.top() - 1;
            let mut b1 = vec![Src::Zero];
            b1.extend(ulog(v));
            let mut b2 = vec![Src::One];
            b2.extend(ulog(v));
            let f = Field { start: 0, len: v as u8, count: 1 << v };
            self.push(
                v,
                vec![Pattern {
                    kind: GateKind::Add,
                    slot: 0,
                    slot_bits: 0,
                    fields: vec![f],
                    in1: Ref::Bits(b1),
                    in2: Ref::Bits(b2),
                }],
            );
        }
    }

    /// Grouped levels over `fields`, with group values at slot 0 of the
    /// current top layer.
    fn levels(&mut self, fields: &[Field], ubits: usize, levels: &[Level]) {
        let mut c_low = self.top() - ubits;
        for (c, gates) in levels {
            let ps = gates
                .iter()
                .map(|&(s, kind, a, b)| Pattern {
                    kind,
                    slot: s,
                    slot_bits: *c as u8,
                    fields: fields.to_vec(),
                    in1: Ref::Bits(rel(a, c_low, ubits)),
                    in2: Ref::Bits(rel(b, c_low, ubits)),
                })
                .collect();
            self.push(c + ubits, ps);
            c_low = *c;
        }
    }

    fn finish(mut self, family: Problem, config: GateConfig, n: u64, q: u64, input: InputMap) -> Circuit {
        if !config.big_sum {
            self.tree(0);
        }
        self.layers.reverse();
        Circuit { family: Family::Problem(family), config, n, q, layers: self.layers, input }
    }
}

/// Builds the circuit for `problem` over data size `n` (and pattern
/// length `q` for pattern matching).
pub fn build_circuit(problem: Problem, n: u64, q: u64, config: GateConfig) -> Result<Circuit, CircuitError> {
    let l = log2_exact(n)?;
    let all = |len: usize, count: u64| Field { start: 0, len: len as u8, count };
    match problem {
        Problem::F2 => {
            let mut b = Builder::new(l);
            b.push(
                l,
                vec![Pattern {
                    kind: GateKind::Mul,
                    slot: 0,
                    slot_bits: 0,
                    fields: vec![all(l, n)],
                    in1: Ref::Bits(ulog(l)),
                    in2: Ref::Bits(ulog(l)),
                }],
            );
            Ok(b.finish(problem, config, n, 0, InputMap::Direct { n }))
        }
        Problem::F0 => {
            let mut b = Builder::new(l);
            b.levels(&[all(l, n)], l, &flt_levels(config.set));
            Ok(b.finish(problem, config, n, 0, InputMap::Direct { n }))
        }
        Problem::MvMult => {
            let nn = n * n;
            let base_b = nn + n;
            let v_in = (nn + 2 * n + 1).next_power_of_two().trailing_zeros() as usize;
            let zero = (1u64 << v_in) - 1;
            let mut b = Builder::new(v_in);
            let fj = Field { start: 0, len: l as u8, count: n };
            let fi = Field { start: l as u8, len: l as u8, count: n };
            // row i, column j: A_ij x_j at slot 0; -b_i copied at slot 1 of column 0
            b.push(
                1 + 2 * l,
                vec![
                    Pattern {
                        kind: GateKind::Mul,
                        slot: 0,
                        slot_bits: 1,
                        fields: vec![fj, fi],
                        in1: bits_over(ulog(2 * l), 0, v_in),
                        in2: bits_over(ulog(l), nn, v_in),
                    },
                    Pattern {
                        kind: GateKind::Add,
                        slot: 1,
                        slot_bits: 1,
                        fields: vec![fi],
                        in1: bits_over((l..2 * l).map(|m| Src::U(m as u8)).collect(), base_b, v_in),
                        in2: consts(zero, v_in),
                    },
                ],
            );
            b.tree(l);
            b.levels(&[all(l, n)], l, &flt_levels(config.set));
            Ok(b.finish(problem, config, n, 0, InputMap::MvMult { n, base_b }))
        }
        Problem::Pmww => {
            if q == 0 || q > n {
                return Err(CircuitError::Unsupported(format!("pattern length {q} with text length {n}")));
            }
            let qp = q.next_power_of_two();
            let lq = qp.trailing_zeros() as usize;
            let windows = n - q + 1;
            let base_u = n;
            let base_np = if qp < n { n + qp } else { 2 * n };
            let v_in = (base_np + qp + 1).next_power_of_two().trailing_zeros() as usize;
            let zero = (1u64 << v_in) - 1;
            let fj = Field { start: 0, len: lq as u8, count: q };
            let fi = Field { start: lq as u8, len: l as u8, count: windows };
            let fields = vec![fj, fi];
            let ub = lq + l;
            let mut b = Builder::new(v_in);
            // slot 0: t_{i+j} - p_j, slot 1: n - p_j
            b.push(
                1 + ub,
                vec![
                    Pattern {
                        kind: GateKind::Add,
                        slot: 0,
                        slot_bits: 1,
                        fields: fields.clone(),
                        in1: Ref::Window { a: 0, b: 1, len: l as u8, hi: vec![Src::Zero; v_in - l] },
                        in2: bits_over(ulog(lq), base_np, v_in),
                    },
                    Pattern {
                        kind: GateKind::Add,
                        slot: 1,
                        slot_bits: 1,
                        fields: fields.clone(),
                        in1: bits_over(ulog(lq), base_u, v_in),
                        in2: consts(zero, v_in),
                    },
                ],
            );
            // ((t - p)(n - p))^2, zero exactly at matches and wildcards
            b.levels(&fields, ub, &[(0, vec![(0, GateKind::Mul, 0, 1)]), (0, vec![(0, GateKind::Mul, 0, 0)])]);
            b.tree(l);
            b.levels(&[fi_shift(fi)], l, &flt_levels(config.set));
            Ok(b.finish(problem, config, n, q, InputMap::Pmww { n, q, base_u, base_np }))
        }
    }
}

fn fi_shift(f: Field) -> Field {
    Field { start: 0, ..f }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::P;
    use crate::stream::{decode_mv, gen_stream, oracle, StreamKind};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn fe(v: u64) -> Fe {
        Fe::new(v)
    }

    fn rand_pt(rng: &mut ChaCha20Rng, k: usize) -> Vec<Fe> {
        (0..k).map(|_| Fe::random(rng)).collect()
    }

    fn run(c: &Circuit, s: &Stream, prover: &[Fe]) -> Fe {
        let vals = c.evaluate(&c.input_values(s, prover).unwrap()).unwrap();
        c.answer(c.output(&vals))
    }

    #[test]
    fn f2_small() {
        let c = build_circuit(Problem::F2, 4, 0, GateConfig::default()).unwrap();
        assert_eq!(c.depth(), 3);
        let muls: u64 = c.layers.iter().filter(|l| l.pow_j().is_none()).map(|l| l.gates().iter().filter(|g| g.kind == GateKind::Mul).count() as u64).sum();
        let adds: u64 = c.layers.iter().map(|l| l.gates().iter().filter(|g| g.kind == GateKind::Add).count() as u64).sum();
        assert_eq!((muls, adds), (4, 3));
        assert_eq!(run(&c, &Stream::from_frequencies(&[1, 2, 3, 4]), &[]), fe(30));
        let big = build_circuit(Problem::F2, 4, 0, GateConfig { set: GateSet::Basic, big_sum: true }).unwrap();
        assert_eq!(big.depth(), 1);
        assert_eq!(run(&big, &Stream::from_frequencies(&[1, 2, 3, 4]), &[]), fe(30));
    }

    #[test]
    fn f0_small_all_sets() {
        for cfg in GateConfig::ALL {
            let c = build_circuit(Problem::F0, 4, 0, cfg).unwrap();
            assert_eq!(run(&c, &Stream::from_frequencies(&[0, 5, 0, 1]), &[]), fe(2), "{cfg}");
        }
    }

    #[test]
    fn flt_chain_is_fermat() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for set in [GateSet::Basic, GateSet::Pow8, GateSet::Pow16] {
            let c = build_circuit(Problem::F0, 8, 0, GateConfig { set, big_sum: true }).unwrap();
            let mut input: Vec<Fe> = (0..8).map(|_| Fe::random(&mut rng)).collect();
            input[3] = Fe::ZERO;
            input[5] = fe(P - 1);
            let vals = c.evaluate(&input).unwrap();
            for (x, y) in input.iter().zip(&vals[0]) {
                assert_eq!(*y, x.pow(P - 1), "{set:?}");
            }
        }
    }

    #[test]
    fn mvmult_counts_wrong_rows() {
        let s = Stream::from_frequencies(&[1, 0, 0, 1, 5, 7]);
        for cfg in GateConfig::ALL {
            let c = build_circuit(Problem::MvMult, 2, 0, cfg).unwrap();
            assert_eq!(run(&c, &s, &[fe(5), fe(7)]), Fe::ZERO);
            assert_eq!(run(&c, &s, &[fe(5), fe(8)]), Fe::ONE);
            assert_eq!(run(&c, &s, &[fe(0), fe(8)]), fe(2));
        }
    }

    #[test]
    fn evaluation_matches_oracles() {
        for seed in 0..100u64 {
            let cfg = GateConfig::ALL[(seed % 6) as usize];
            let n = 1u64 << (1 + seed % 10);
            let s = gen_stream(StreamKind::UniformItems { m: n + seed }, n, seed);
            let f = s.frequencies();
            let c2 = build_circuit(Problem::F2, n, 0, cfg).unwrap();
            assert_eq!(run(&c2, &s, &[]).value() as u128, oracle::f2(&f));
            if n <= 256 {
                let c0 = build_circuit(Problem::F0, n, 0, cfg).unwrap();
                assert_eq!(run(&c0, &s, &[]).value(), oracle::f0(&f));
            }
            if seed < 30 {
                let side = 1u64 << (1 + seed % 3);
                let s = gen_stream(StreamKind::MatrixVector, side, seed);
                let (n, a, x) = decode_mv(&s).unwrap();
                let b: Vec<Fe> = oracle::mv(n, &a, &x).iter().map(|&v| Fe::from_i64(v as i64)).collect();
                let c = build_circuit(Problem::MvMult, side, 0, cfg).unwrap();
                assert_eq!(run(&c, &s, &b), Fe::ZERO);
                let tn = 1u64 << (3 + seed % 3);
                let q = 1 + seed % 5;
                let s = gen_stream(StreamKind::TextPattern { q, sigma: 2 }, tn, seed);
                let c = build_circuit(Problem::Pmww, tn, q, cfg).unwrap();
                assert_eq!(run(&c, &s, &[]).value() as u128, oracle::answer(Problem::Pmww, &s, q).unwrap());
            }
        }
    }

    fn small_circuits() -> Vec<Circuit> {
        let mut v = Vec::new();
        for cfg in GateConfig::ALL {
            v.push(build_circuit(Problem::F2, 8, 0, cfg).unwrap());
            v.push(build_circuit(Problem::F0, 4, 0, cfg).unwrap());
            v.push(build_circuit(Problem::MvMult, 2, 0, cfg).unwrap());
            v.push(build_circuit(Problem::MvMult, 4, 0, cfg).unwrap());
            v.push(build_circuit(Problem::Pmww, 8, 3, cfg).unwrap());
            v.push(build_circuit(Problem::Pmww, 4, 4, cfg).unwrap());
        }
        v
    }

    #[test]
    fn labels_in_range_and_unique() {
        for c in small_circuits() {
            for i in 0..c.depth() {
                let mut seen = vec![false; c.layers[i].width()];
                let wb = c.layers[i + 1].width() as u32;
                for g in c.layers[i].gates() {
                    assert!(!seen[g.out as usize], "duplicate gate label");
                    seen[g.out as usize] = true;
                    assert!(g.in1 < wb && g.in2 < wb);
                }
            }
        }
    }

    #[test]
    fn closed_matches_generic_and_boolean() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for c in small_circuits() {
            for i in 0..c.depth() {
                let (va, vb) = (c.layers[i].log_width, c.layers[i + 1].log_width);
                if va + 2 * vb > 24 {
                    continue;
                }
                let p = rand_pt(&mut rng, va);
                let w1 = rand_pt(&mut rng, vb);
                let w2 = rand_pt(&mut rng, vb);
                let closed = c.layers[i].wiring_closed(&p, &w1, &w2).unwrap();
                assert_eq!(closed, c.layers[i].wiring_generic(&p, &w1, &w2), "layer {i}");
                // multilinear: collinear at 0, 1, 2 in one coordinate
                let mut q = p.clone();
                q.extend(&w1);
                q.extend(&w2);
                let k = (rng.next_u64() as usize) % q.len();
                let at = |t: u64| {
                    let mut z = q.clone();
                    z[k] = fe(t);
                    let v = c.layers[i].wiring_closed(&z[..va], &z[va..va + vb], &z[va + vb..]).unwrap();
                    v.add + v.mul * fe(3) + v.pow * fe(5)
                };
                assert_eq!(at(2), at(1) + at(1) - at(0));
                // boolean corners reproduce the predicate
                for _ in 0..20 {
                    let gs = c.layers[i].gates();
                    let g = gs[(rng.next_u64() as usize) % gs.len()];
                    let bits = |x: u32, k: usize| (0..k).map(|b| fe(((x >> b) & 1) as u64)).collect::<Vec<_>>();
                    let v = c.layers[i]
                        .wiring_closed(&bits(g.out, va), &bits(g.in1, vb), &bits(g.in2, vb))
                        .unwrap();
                    let want = match g.kind {
                        GateKind::Add => WiringValues { add: Fe::ONE, ..Default::default() },
                        GateKind::Mul => WiringValues { mul: Fe::ONE, ..Default::default() },
                        _ => WiringValues { pow: Fe::ONE, ..Default::default() },
                    };
                    assert_eq!(v, want);
                    let off = c.layers[i].wiring_closed(&bits(g.out, va), &bits(g.in1 ^ 1, vb), &bits(g.in2, vb)).unwrap();
                    if !gs.iter().any(|h| h.out == g.out && h.in1 == g.in1 ^ 1 && h.in2 == g.in2) {
                        assert_eq!(off, WiringValues::default());
                    }
                }
            }
        }
    }

    #[test]
    fn wiring_examples() {
        let c = build_circuit(Problem::F2, 4, 0, GateConfig::default()).unwrap();
        let sq = &c.layers[2];
        let b = |x: u64| vec![fe(x & 1), fe(x >> 1)];
        assert_eq!(sq.wiring_closed(&b(2), &b(2), &b(2)).unwrap().mul, Fe::ONE);
        assert_eq!(sq.wiring_closed(&b(2), &b(1), &b(2)).unwrap().mul, Fe::ZERO);
        let top = &c.layers[0];
        assert_eq!(top.wiring_closed(&[], &[Fe::ZERO], &[Fe::ONE]).unwrap().add, Fe::ONE);
        assert_eq!(top.wiring_closed(&[], &[Fe::ONE], &[Fe::ZERO]).unwrap().add, Fe::ZERO);
    }

    #[test]
    fn table_sizes() {
        let n = 1u64 << 17;
        let f2 = build_circuit(Problem::F2, n, 0, GateConfig::default()).unwrap();
        assert_eq!(f2.size(), 3 * n - 1);
        let f2s = build_circuit(Problem::F2, n, 0, GateConfig { set: GateSet::Basic, big_sum: true }).unwrap();
        assert_eq!(f2s.size(), 2 * n + 1);
        let f0 = build_circuit(Problem::F0, n, 0, GateConfig::default()).unwrap();
        assert_eq!(f0.depth(), 61 + 17);
        // inputs, 1 + 2*59 + 1 chain slots per element, the tree
        assert_eq!(f0.size(), n + 2 * n + 59 * 2 * n + n + (n - 1));
        let p8 = build_circuit(Problem::F0, n, 0, GateConfig { set: GateSet::Pow8, big_sum: false }).unwrap();
        let p16 = build_circuit(Problem::F0, n, 0, GateConfig { set: GateSet::Pow16, big_sum: false }).unwrap();
        assert_eq!(p8.size(), n * (1 + 6 + 38 + 1) + n - 1);
        assert_eq!(p16.size(), n * (1 + 8 + 28 + 1) + n - 1);
    }

    #[test]
    fn dump_format() {
        let c = build_circuit(Problem::F2, 2, 0, GateConfig::default()).unwrap();
        let mut out = Vec::new();
        c.dump(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s, "0 0 add 0 1\n1 0 mul 0 0\n1 1 mul 1 1\n2 0 input - -\n2 1 input - -\n");
    }

    #[test]
    fn gate_config_parse() {
        for c in GateConfig::ALL {
            assert_eq!(c.to_string().parse::<GateConfig>().unwrap(), c);
        }
        assert!("pow32".parse::<GateConfig>().is_err());
        assert_eq!("POW8,bigsum".parse::<GateConfig>().unwrap(), GateConfig { set: GateSet::Pow8, big_sum: true });
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(build_circuit(Problem::F2, 6, 0, GateConfig::default()), Err(CircuitError::NotPowerOfTwo(6)));
        assert!(build_circuit(Problem::Pmww, 8, 9, GateConfig::default()).is_err());
    }
}
