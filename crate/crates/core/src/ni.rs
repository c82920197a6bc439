//! One-message protocols: F2 on an `h x w` grid, and matrix-vector
//! multiplication with a tunable proof/space split.
//!
//! Grid layout: linear index `i` sits at row `x = i mod h`, column
//! `y = i div h`. The prover ships `s(x) = sum_y f(x, y)^2` for every
//! `x` in `[0, 2h)`, where `f` extends each column to degree `< h`.

use std::io::{self, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::field::{batch_inv, Fe};
use crate::mle::GridDomain;
use crate::pfa::{cheapest_transform_length, TransformPlan};
use crate::stream::{Stream, StreamUpdate};
use crate::transport::{SpaceMeter, Verdict};

pub const MAGIC: &[u8; 6] = b"SIPNI1";
pub const ID_F2: u8 = 1;
pub const ID_MVMULT: u8 = 2;

#[derive(Debug, Error)]
pub enum NiError {
    #[error("bad proof file: {0}")]
    Format(String),
    #[error("update index {0} outside the declared shape")]
    OutOfRange(u64),
    #[error("matrix update after vector update; this verifier needs the matrix first")]
    Order,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProverMode {
    Naive,
    Fft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct F2Shape {
    pub h: usize,
    pub w: usize,
}

impl F2Shape {
    /// `h = ceil(sqrt n)`, `w = ceil(n / h)`.
    pub fn square(n: u64) -> F2Shape {
        let n = n.max(1);
        let mut h = (n as f64).sqrt() as u64;
        while h * h < n {
            h += 1;
        }
        F2Shape { h: h as usize, w: n.div_ceil(h) as usize }
    }

    pub fn cells(&self) -> usize {
        self.h * self.w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiParams {
    F2 { h: u64, w: u64 },
    MvMult { h: u64, alpha: (u32, u32) },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiProof {
    pub n: u64,
    pub params: NiParams,
    pub payload: Vec<Fe>,
}

impl NiProof {
    pub fn byte_len(&self) -> usize {
        8 * self.payload.len()
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        match self.params {
            NiParams::F2 { h, w: width } => {
                w.write_all(&[ID_F2])?;
                w.write_all(&self.n.to_le_bytes())?;
                w.write_all(&h.to_le_bytes())?;
                w.write_all(&width.to_le_bytes())?;
            }
            NiParams::MvMult { h, alpha } => {
                w.write_all(&[ID_MVMULT])?;
                w.write_all(&self.n.to_le_bytes())?;
                w.write_all(&h.to_le_bytes())?;
                w.write_all(&alpha.0.to_le_bytes())?;
                w.write_all(&alpha.1.to_le_bytes())?;
            }
        }
        w.write_all(&(self.payload.len() as u64).to_le_bytes())?;
        for e in &self.payload {
            w.write_all(&e.to_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<NiProof, NiError> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NiError::Format("bad magic".into()));
        }
        let mut id = [0u8; 1];
        r.read_exact(&mut id)?;
        let mut b8 = [0u8; 8];
        let mut u64_ = |r: &mut R| -> io::Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n = u64_(&mut r)?;
        let h = u64_(&mut r)?;
        let params = match id[0] {
            ID_F2 => NiParams::F2 { h, w: u64_(&mut r)? },
            ID_MVMULT => {
                let mut b4 = [0u8; 4];
                r.read_exact(&mut b4)?;
                let num = u32::from_le_bytes(b4);
                r.read_exact(&mut b4)?;
                let den = u32::from_le_bytes(b4);
                if den == 0 {
                    return Err(NiError::Format("zero alpha denominator".into()));
                }
                NiParams::MvMult { h, alpha: (num, den) }
            }
            x => return Err(NiError::Format(format!("unknown protocol id {x}"))),
        };
        let count = u64_(&mut r)?;
        let mut payload = Vec::with_capacity(count.min(1 << 24) as usize);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            payload.push(Fe::from_bytes(&b8).map_err(|e| NiError::Format(e.to_string()))?);
        }
        Ok(NiProof { n, params, payload })
    }
}

/// Column-major grid cells from a frequency vector.
fn grid_cells(freqs: &[i64], shape: F2Shape) -> Vec<Fe> {
    let mut a = vec![Fe::ZERO; shape.cells()];
    for (i, &v) in freqs.iter().enumerate() {
        a[i] = Fe::from_i64(v);
    }
    a
}

/// Extends columns of an `h`-row grid to rows `[h, 2h)`.
pub trait ColumnExtender {
    /// Values of the column's extension at `h..2h`.
    fn extend(&self, col: &[Fe]) -> Vec<Fe>;
}

/// Direct Lagrange, `O(h^2)` per column.
pub struct NaiveExtender {
    basis: Vec<Vec<Fe>>,
}

impl NaiveExtender {
    pub fn new(h: usize) -> Self {
        let dom = GridDomain::new(h);
        NaiveExtender { basis: (h..2 * h).map(|j| dom.basis(Fe::new(j as u64))).collect() }
    }
}

impl ColumnExtender for NaiveExtender {
    fn extend(&self, col: &[Fe]) -> Vec<Fe> {
        self.basis
            .iter()
            .map(|b| b.iter().zip(col).map(|(&x, &y)| x * y).sum())
            .collect()
    }
}

/// `f(j) = h(j) * (b conv g)(j)` with `b_i = a_i / prod_{x != i} (i - x)`,
/// `g(k) = 1/k`, `h(j) = prod_{k=j-h+1..j} k`, via one forward and one
/// inverse PFA transform.
pub struct FftExtender {
    h: usize,
    plan: TransformPlan,
    g_hat: Vec<Fe>,
    denom_inv: Vec<Fe>,
    hj: Vec<Fe>,
}

impl FftExtender {
    pub fn new(h: usize) -> Self {
        let n = cheapest_transform_length(2 * h as u64).expect("grid height in range");
        let plan = TransformPlan::new(n).expect("divisor length");
        let ks: Vec<Fe> = (1..2 * h as u64).map(Fe::new).collect();
        let mut g = vec![Fe::ZERO];
        g.extend(batch_inv(&ks).expect("k < p"));
        let g_hat = plan.forward(&g);
        let dom = GridDomain::new(h);
        // h(h) = h!, h(j+1) = h(j) * (j+1) / (j+1-h)
        let mut hj = Vec::with_capacity(h);
        let mut cur: Fe = (1..=h as u64).map(Fe::new).product();
        let lows: Vec<Fe> = (1..=h as u64).map(Fe::new).collect();
        let lows_inv = batch_inv(&lows).expect("nonzero");
        for j in h..2 * h {
            hj.push(cur);
            cur = cur * Fe::new(j as u64 + 1) * lows_inv[j - h];
        }
        FftExtender { h, plan, g_hat, denom_inv: dom.denom_inv().to_vec(), hj }
    }

    pub fn transform_len(&self) -> usize {
        self.plan.len()
    }
}

impl ColumnExtender for FftExtender {
    fn extend(&self, col: &[Fe]) -> Vec<Fe> {
        let b: Vec<Fe> = col.iter().zip(&self.denom_inv).map(|(&a, &d)| a * d).collect();
        let c = self.plan.convolve_transformed(&self.plan.forward(&b), &self.g_hat);
        (0..self.h).map(|t| self.hj[t] * c[self.h + t]).collect()
    }
}

fn extender(h: usize, mode: ProverMode) -> Box<dyn ColumnExtender> {
    match mode {
        ProverMode::Naive => Box::new(NaiveExtender::new(h)),
        ProverMode::Fft => Box::new(FftExtender::new(h)),
    }
}

/// F2 proof from aggregated frequencies.
pub fn f2_prove(freqs: &[i64], shape: F2Shape, mode: ProverMode) -> NiProof {
    assert!(shape.cells() >= freqs.len(), "grid smaller than universe");
    let h = shape.h;
    let a = grid_cells(freqs, shape);
    let ext = extender(h, mode);
    let mut s = vec![Fe::ZERO; 2 * h];
    for col in a.chunks(h) {
        if col.iter().all(|x| x.is_zero()) {
            continue;
        }
        for (x, &v) in col.iter().enumerate() {
            s[x] += v * v;
        }
        for (t, v) in ext.extend(col).into_iter().enumerate() {
            s[h + t] += v * v;
        }
    }
    NiProof {
        n: freqs.len() as u64,
        params: NiParams::F2 { h: h as u64, w: shape.w as u64 },
        payload: s,
    }
}

/// Streams `evals` (values at `0..D`) and returns the interpolant at `r`
/// with constant extra space.
fn lagrange_streaming<'a>(evals: impl ExactSizeIterator<Item = &'a Fe>, r: Fe) -> Fe {
    let d = evals.len();
    if r.value() < d as u64 {
        return evals.skip(r.value() as usize).next().copied().unwrap_or(Fe::ZERO);
    }
    let full: Fe = (0..d as u64).map(|t| r - Fe::new(t)).product();
    // w_0 = 1 / ((d-1)! (-1)^(d-1)); w_{x+1} = -w_x (d-1-x) / (x+1)
    let mut fact = Fe::ONE;
    for t in 1..d as u64 {
        fact *= Fe::new(t);
    }
    let mut wx = fact.inv().expect("nonzero");
    if d % 2 == 0 {
        wx = -wx;
    }
    let mut acc = Fe::ZERO;
    for (x, &e) in evals.enumerate() {
        let l = full * (r - Fe::new(x as u64)).inv().expect("r off grid") * wx;
        acc += l * e;
        let next = Fe::new((d - 1 - x) as u64) * Fe::new(x as u64 + 1).inv().expect("nonzero");
        wx = -(wx * next);
    }
    acc
}

/// F2 verifier: one random row `r`, and `f(r, y)` for each column.
pub struct F2Verifier {
    shape: F2Shape,
    r: Fe,
    /// `chi_x(r)` for `x` in `[h]`: constants fixed by `r`
    basis: Vec<Fe>,
    row: Vec<Fe>,
    pub meter: SpaceMeter,
}

impl F2Verifier {
    pub fn new(shape: F2Shape, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let r = Fe::random(&mut rng);
        let basis = GridDomain::new(shape.h).basis(r);
        F2Verifier { shape, r, basis, row: vec![Fe::ZERO; shape.w], meter: SpaceMeter::default() }
    }

    pub fn update(&mut self, u: &StreamUpdate) -> Result<(), NiError> {
        let i = u.index as usize;
        if i >= self.shape.cells() {
            return Err(NiError::OutOfRange(u.index));
        }
        let (x, y) = (i % self.shape.h, i / self.shape.h);
        self.row[y] += Fe::from_i64(u.delta) * self.basis[x];
        Ok(())
    }

    pub fn observe_stream(&mut self, s: &Stream) -> Result<(), NiError> {
        for u in &s.updates {
            self.update(u)?;
        }
        Ok(())
    }

    /// Live words: the row, `r`, and a few accumulators (the `chi` table
    /// is a constant of `r`, not of the data).
    pub fn words(&self) -> usize {
        self.row.len() + 6
    }

    pub fn verify(&mut self, proof: &NiProof) -> Verdict {
        self.meter.observe(self.words());
        let (h, w) = (self.shape.h, self.shape.w);
        if proof.params != (NiParams::F2 { h: h as u64, w: w as u64 }) {
            return Verdict::reject(0, "proof shape does not match verifier grid");
        }
        if proof.payload.len() != 2 * h {
            return Verdict::reject(0, format!("expected {} evaluations", 2 * h));
        }
        let sr = lagrange_streaming(proof.payload.iter(), self.r);
        let rhs: Fe = self.row.iter().map(|&v| v * v).sum();
        if sr != rhs {
            return Verdict::reject(0, "s(r) differs from the row fingerprint");
        }
        Verdict::Accept(proof.payload[..h].iter().copied().sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MvShape {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub alpha: (u32, u32),
}

impl MvShape {
    /// `h = round(n^alpha)` clamped to `[1, n]`, `w = ceil(n / h)`.
    pub fn new(n: usize, alpha: (u32, u32)) -> MvShape {
        assert!(alpha.1 > 0 && alpha.0 <= alpha.1, "alpha must be in [0, 1]");
        let a = alpha.0 as f64 / alpha.1 as f64;
        let h = ((n as f64).powf(a).round() as usize).clamp(1, n.max(1));
        MvShape { n, h, w: n.div_ceil(h), alpha }
    }

    pub fn block_len(&self) -> usize {
        if self.h > 1 {
            2 * self.h
        } else {
            0
        }
    }

    pub fn payload_len(&self) -> usize {
        self.n * (1 + self.block_len())
    }
}

/// Proof: the claimed `b = A x`, then for `h > 1` one block per row with
/// `s_i(X) = sum_y fA_i(X, y) fx(X, y)` at `X = 0..2h`.
pub fn mvmult_prove(a: &[i64], x: &[i64], shape: MvShape, mode: ProverMode) -> NiProof {
    mvmult_prove_claim(a, x, shape, mode, None)
}

/// As `mvmult_prove`, but lets the caller substitute `b`.
pub fn mvmult_prove_claim(
    a: &[i64],
    x: &[i64],
    shape: MvShape,
    mode: ProverMode,
    claim: Option<Vec<Fe>>,
) -> NiProof {
    let n = shape.n;
    assert_eq!(a.len(), n * n);
    assert_eq!(x.len(), n);
    let fa: Vec<Fe> = a.iter().map(|&v| Fe::from_i64(v)).collect();
    let fx: Vec<Fe> = x.iter().map(|&v| Fe::from_i64(v)).collect();
    let b = claim.unwrap_or_else(|| {
        (0..n)
            .map(|i| fa[i * n..(i + 1) * n].iter().zip(&fx).map(|(&p, &q)| p * q).sum())
            .collect()
    });
    let mut payload = b;
    let (h, w) = (shape.h, shape.w);
    if h > 1 {
        let ext = extender(h, mode);
        let grid = |row: &[Fe]| {
            let mut g = vec![Fe::ZERO; h * w];
            g[..row.len()].copy_from_slice(row);
            g
        };
        let xg = grid(&fx);
        let xe: Vec<Vec<Fe>> = xg.chunks(h).map(|c| ext.extend(c)).collect();
        for i in 0..n {
            let ag = grid(&fa[i * n..(i + 1) * n]);
            let mut s = vec![Fe::ZERO; 2 * h];
            for (y, col) in ag.chunks(h).enumerate() {
                let xc = &xg[y * h..(y + 1) * h];
                for t in 0..h {
                    s[t] += col[t] * xc[t];
                }
                if col.iter().all(|v| v.is_zero()) {
                    continue;
                }
                for (t, v) in ext.extend(col).into_iter().enumerate() {
                    s[h + t] += v * xe[y][t];
                }
            }
            payload.extend(s);
        }
    }
    NiProof {
        n: n as u64,
        params: NiParams::MvMult { h: h as u64, alpha: shape.alpha },
        payload,
    }
}

/// Matrix-vector verifier. With `h = 1` it keeps the `n` column
/// fingerprints `u_j = sum_i rho^i A_ij` and folds `sum_j u_j x_j` as
/// vector updates arrive. Otherwise it keeps `F(y) = sum_i rho^i fA_i(r, y)`
/// and `fx(r, y)`, `2w` words.
pub struct MvVerifier {
    shape: MvShape,
    rho: Fe,
    r: Fe,
    basis: Vec<Fe>,
    cols: Vec<Fe>,
    xrow: Vec<Fe>,
    folded: Fe,
    vector_phase: bool,
    pub meter: SpaceMeter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MvOutcome {
    pub verdict: Verdict,
    pub b: Vec<Fe>,
}

impl MvVerifier {
    pub fn new(shape: MvShape, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rho = Fe::random(&mut rng);
        let r = Fe::random(&mut rng);
        let (basis, xrow) = if shape.h > 1 {
            (GridDomain::new(shape.h).basis(r), vec![Fe::ZERO; shape.w])
        } else {
            (Vec::new(), Vec::new())
        };
        let cols = vec![Fe::ZERO; if shape.h > 1 { shape.w } else { shape.n }];
        MvVerifier {
            shape,
            rho,
            r,
            basis,
            cols,
            xrow,
            folded: Fe::ZERO,
            vector_phase: false,
            meter: SpaceMeter::default(),
        }
    }

    pub fn update(&mut self, u: &StreamUpdate) -> Result<(), NiError> {
        let n = self.shape.n as u64;
        let d = Fe::from_i64(u.delta);
        if u.index >= n * n + n {
            return Err(NiError::OutOfRange(u.index));
        }
        let h = self.shape.h;
        if u.index < n * n {
            let (i, j) = (u.index / n, (u.index % n) as usize);
            let weight = self.rho.pow(i) * d;
            if h > 1 {
                self.cols[j / h] += weight * self.basis[j % h];
            } else {
                if self.vector_phase {
                    return Err(NiError::Order);
                }
                self.cols[j] += weight;
            }
        } else {
            let j = (u.index - n * n) as usize;
            if h > 1 {
                self.xrow[j / h] += d * self.basis[j % h];
            } else {
                self.vector_phase = true;
                self.folded += d * self.cols[j];
            }
        }
        Ok(())
    }

    pub fn observe_stream(&mut self, s: &Stream) -> Result<(), NiError> {
        for u in &s.updates {
            self.update(u)?;
        }
        Ok(())
    }

    pub fn words(&self) -> usize {
        let scalars = 6;
        if self.shape.h > 1 {
            // two rows plus the running combination of the blocks
            self.cols.len() + self.xrow.len() + 2 * self.shape.h + scalars
        } else {
            self.cols.len() + scalars
        }
    }

    pub fn verify(&mut self, proof: &NiProof) -> MvOutcome {
        self.meter.observe(self.words());
        let sh = self.shape;
        let reject = |why: &str| MvOutcome { verdict: Verdict::reject(0, why), b: Vec::new() };
        if proof.n != sh.n as u64 || proof.params != (NiParams::MvMult { h: sh.h as u64, alpha: sh.alpha }) {
            return reject("proof shape does not match verifier");
        }
        if proof.payload.len() != sh.payload_len() {
            return reject("wrong payload length");
        }
        let b = &proof.payload[..sh.n];
        if sh.h == 1 {
            // sum_i rho^i b_i must equal sum_j u_j x_j
            let mut acc = Fe::ZERO;
            let mut pw = Fe::ONE;
            for &bi in b {
                acc += pw * bi;
                pw *= self.rho;
            }
            if acc != self.folded {
                return reject("fingerprint of b differs from A x");
            }
        } else {
            let h = sh.h;
            let mut combined = vec![Fe::ZERO; 2 * h];
            let mut pw = Fe::ONE;
            for (i, blk) in proof.payload[sh.n..].chunks(2 * h).enumerate() {
                if blk[..h].iter().copied().sum::<Fe>() != b[i] {
                    return reject("row block does not sum to its b entry");
                }
                for (c, &v) in combined.iter_mut().zip(blk) {
                    *c += pw * v;
                }
                pw *= self.rho;
            }
            let lhs = lagrange_streaming(combined.iter(), self.r);
            let rhs: Fe = self.cols.iter().zip(&self.xrow).map(|(&p, &q)| p * q).sum();
            if lhs != rhs {
                return reject("combined row blocks differ from fingerprints");
            }
        }
        let digest: Fe = b.iter().copied().sum();
        MvOutcome { verdict: Verdict::Accept(digest), b: b.to_vec() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mle::{grid_lde_eval, Grid};
    use crate::stream::{decode_mv, gen_stream, oracle, StreamKind};

    fn fe(v: u64) -> Fe {
        Fe::new(v)
    }

    fn verify_f2(s: &Stream, shape: F2Shape, proof: &NiProof, seed: u64) -> Verdict {
        let mut v = F2Verifier::new(shape, seed);
        v.observe_stream(s).unwrap();
        v.verify(proof)
    }

    #[test]
    fn f2_small_example() {
        let s = Stream::from_frequencies(&[1, 2, 3, 4]);
        let shape = F2Shape::square(4);
        assert_eq!(shape, F2Shape { h: 2, w: 2 });
        let p = f2_prove(&s.frequencies(), shape, ProverMode::Naive);
        // rows: x=0 holds a_0, a_2; x=1 holds a_1, a_3
        assert_eq!(p.payload[0], fe(1 + 9));
        assert_eq!(p.payload[1], fe(4 + 16));
        assert_eq!(p.payload.len(), 4);
        assert_eq!(verify_f2(&s, shape, &p, 1), Verdict::Accept(fe(30)));
        assert_eq!(p, f2_prove(&s.frequencies(), shape, ProverMode::Fft));
    }

    #[test]
    fn f2_empty() {
        let s = Stream::new(16, vec![]).unwrap();
        let shape = F2Shape::square(16);
        let p = f2_prove(&s.frequencies(), shape, ProverMode::Fft);
        assert!(p.payload.iter().all(|x| x.is_zero()));
        assert_eq!(verify_f2(&s, shape, &p, 3), Verdict::Accept(Fe::ZERO));
    }

    #[test]
    fn fft_matches_naive_and_grid_extension() {
        for (n, seed) in [(100u64, 1u64), (1 << 10, 2), (1 << 12, 3), (5000, 4)] {
            let s = gen_stream(StreamKind::UniformItems { m: 3 * n }, n, seed);
            let f = s.frequencies();
            let shape = F2Shape::square(n);
            let a = f2_prove(&f, shape, ProverMode::Naive);
            let b = f2_prove(&f, shape, ProverMode::Fft);
            assert_eq!(a, b);
            let mut ba = Vec::new();
            let mut bb = Vec::new();
            a.write(&mut ba).unwrap();
            b.write(&mut bb).unwrap();
            assert_eq!(ba, bb);
            let v = verify_f2(&s, shape, &b, seed);
            assert_eq!(v.answer().unwrap().value() as u128, oracle::f2(&f));
        }
        // cross-check one column extension against the grid extension
        let h = 7;
        let cells: Vec<Fe> = (0..h as u64 * 3).map(|v| fe(v * v + 1)).collect();
        let ext = FftExtender::new(h);
        let dom = GridDomain::new(h);
        let g = Grid { h, w: 3, data: &cells };
        for y in 0..3 {
            let e = ext.extend(&cells[y * h..(y + 1) * h]);
            for t in 0..h {
                assert_eq!(e[t], grid_lde_eval(&dom, g, fe((h + t) as u64), y));
            }
        }
    }

    #[test]
    fn f2_rectangular_and_tamper() {
        let s = gen_stream(StreamKind::UniformFrequencies, 600, 9);
        let shape = F2Shape { h: 8, w: 75 };
        let p = f2_prove(&s.frequencies(), shape, ProverMode::Fft);
        assert_eq!(verify_f2(&s, shape, &p, 1).answer().unwrap().value() as u128, oracle::f2(&s.frequencies()));
        let mut rejects = 0;
        for seed in 0..1000u64 {
            let mut bad = p.clone();
            bad.payload[(seed % 16) as usize] += Fe::ONE;
            if !verify_f2(&s, shape, &bad, seed).accepted() {
                rejects += 1;
            }
        }
        assert!(rejects >= 999);
        let mut short = p.clone();
        short.payload.pop();
        assert!(!verify_f2(&s, shape, &short, 1).accepted());
    }

    #[test]
    fn streaming_lagrange_matches_domain() {
        let evals: Vec<Fe> = (0..9u64).map(|v| fe(v * 31 + 7).pow(3)).collect();
        let dom = GridDomain::new(9);
        for r in [fe(3), fe(100), fe(1 << 50)] {
            assert_eq!(lagrange_streaming(evals.iter(), r), dom.interpolate(&evals, r));
        }
    }

    #[test]
    fn proof_file_roundtrip() {
        let s = gen_stream(StreamKind::UniformItems { m: 50 }, 64, 1);
        let p = f2_prove(&s.frequencies(), F2Shape::square(64), ProverMode::Fft);
        let mut buf = Vec::new();
        p.write(&mut buf).unwrap();
        assert_eq!(&buf[..6], b"SIPNI1");
        assert_eq!(buf[6], ID_F2);
        assert_eq!(buf.len(), 6 + 1 + 8 * 4 + 8 * 16);
        assert_eq!(NiProof::read(&buf[..]).unwrap(), p);
        let q = mvmult_prove(&[1, 0, 0, 1], &[5, 7], MvShape::new(2, (1, 2)), ProverMode::Naive);
        let mut buf = Vec::new();
        q.write(&mut buf).unwrap();
        assert_eq!(NiProof::read(&buf[..]).unwrap(), q);
        buf[6] = 9;
        assert!(NiProof::read(&buf[..]).is_err());
    }

    fn mv_run(s: &Stream, alpha: (u32, u32), claim: Option<Vec<Fe>>, seed: u64) -> MvOutcome {
        let (n, a, x) = decode_mv(s).unwrap();
        let shape = MvShape::new(n, alpha);
        let p = mvmult_prove_claim(&a, &x, shape, ProverMode::Fft, claim);
        let mut v = MvVerifier::new(shape, seed);
        v.observe_stream(s).unwrap();
        v.verify(&p)
    }

    #[test]
    fn mvmult_identity() {
        let s = Stream::from_frequencies(&[1, 0, 0, 1, 5, 7]);
        let shape = MvShape::new(2, (0, 1));
        let p = mvmult_prove(&[1, 0, 0, 1], &[5, 7], shape, ProverMode::Naive);
        assert_eq!(p.payload, vec![fe(5), fe(7)]);
        assert_eq!(p.byte_len(), 16);
        let out = mv_run(&s, (0, 1), None, 1);
        assert!(out.verdict.accepted());
        assert_eq!(out.b, vec![fe(5), fe(7)]);
        let rejects = (0..1000).filter(|&sd| !mv_run(&s, (0, 1), Some(vec![fe(5), fe(8)]), sd).verdict.accepted()).count();
        assert!(rejects >= 999);
    }

    #[test]
    fn mvmult_alpha_half() {
        let s = gen_stream(StreamKind::MatrixVector, 8, 3);
        let (n, a, x) = decode_mv(&s).unwrap();
        let want: Vec<Fe> = oracle::mv(n, &a, &x).iter().map(|&v| Fe::new(v as u64)).collect();
        let shape = MvShape::new(8, (1, 2));
        assert_eq!(shape.h, 3);
        let honest = mvmult_prove(&a, &x, shape, ProverMode::Fft);
        assert_eq!(honest, mvmult_prove(&a, &x, shape, ProverMode::Naive));
        let mut v = MvVerifier::new(shape, 5);
        v.observe_stream(&s).unwrap();
        let out = v.verify(&honest);
        assert!(out.verdict.accepted());
        assert_eq!(out.b, want);
        for k in 0..honest.payload.len() {
            let mut bad = honest.clone();
            bad.payload[k] += fe(3);
            let mut v = MvVerifier::new(shape, 100 + k as u64);
            v.observe_stream(&s).unwrap();
            assert!(!v.verify(&bad).verdict.accepted(), "element {k}");
        }
    }

    #[test]
    fn mvmult_alpha0_order_and_space() {
        let s = gen_stream(StreamKind::MatrixVector, 16, 2);
        let out = mv_run(&s, (0, 1), None, 4);
        assert!(out.verdict.accepted());
        let mut v = MvVerifier::new(MvShape::new(16, (0, 1)), 1);
        assert_eq!(v.words(), 16 + 6);
        v.update(&StreamUpdate { index: 16 * 16, delta: 1 }).unwrap();
        assert!(matches!(v.update(&StreamUpdate { index: 0, delta: 1 }), Err(NiError::Order)));
    }
}
