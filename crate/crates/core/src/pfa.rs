//! Number-theoretic DFT over F_p by the prime factor (Good-Thomas)
//! algorithm, for any length dividing p - 1.
//!
//! p - 1 = 2 * 3^2 * 5^2 * 7 * 11 * 13 * 31 * 41 * 61 * 151 * 331 * 1321.
//! Each prime-power factor gets a naive sub-DFT, so a transform costs
//! `(sum N_i) * N` multiplications.

use std::sync::OnceLock;

use thiserror::Error;

use crate::field::{Fe, P};

/// Prime factorization of p - 1.
pub const P_MINUS_1_FACTORS: [(u64, u32); 12] = [
    (2, 1),
    (3, 2),
    (5, 2),
    (7, 1),
    (11, 1),
    (13, 1),
    (31, 1),
    (41, 1),
    (61, 1),
    (151, 1),
    (331, 1),
    (1321, 1),
];

/// Smallest generator of F_p^*, found by trial.
pub const GENERATOR: u64 = 37;

/// Largest length accepted by `choose_transform_length`.
pub const MAX_MIN_LEN: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PfaError {
    #[error("no supported transform length >= {0}")]
    TooLong(u64),
    #[error("length {0} does not divide p - 1")]
    NotDivisor(u64),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn is_generator(g: u64) -> bool {
    let g = Fe::new(g);
    P_MINUS_1_FACTORS
        .iter()
        .all(|&(q, _)| g.pow((P - 1) / q) != Fe::ONE)
}

/// The hard-coded generator, checked once.
pub fn generator() -> Fe {
    static CHECKED: OnceLock<Fe> = OnceLock::new();
    *CHECKED.get_or_init(|| {
        assert!(is_generator(GENERATOR), "generator self-check failed");
        Fe::new(GENERATOR)
    })
}

/// All divisors of p - 1, ascending.
pub fn divisors() -> &'static [u64] {
    static DIVS: OnceLock<Vec<u64>> = OnceLock::new();
    DIVS.get_or_init(|| {
        let mut ds = vec![1u64];
        for &(q, e) in &P_MINUS_1_FACTORS {
            let cur = ds.clone();
            let mut pw = 1;
            for _ in 0..e {
                pw *= q;
                ds.extend(cur.iter().map(|d| d * pw));
            }
        }
        ds.sort_unstable();
        ds
    })
}

/// Smallest divisor of p - 1 that is at least `min_len`.
pub fn transform_length(min_len: u64) -> Result<u64, PfaError> {
    if min_len > MAX_MIN_LEN {
        return Err(PfaError::TooLong(min_len));
    }
    let ds = divisors();
    let i = ds.partition_point(|&d| d < min_len.max(1));
    Ok(ds[i])
}

/// Primitive `n`-th root of unity `g^((p-1)/n)`.
pub fn root_of_unity(n: u64) -> Result<Fe, PfaError> {
    if n == 0 || (P - 1) % n != 0 {
        return Err(PfaError::NotDivisor(n));
    }
    Ok(generator().pow((P - 1) / n))
}

pub fn prime_powers(n: u64) -> Vec<u64> {
    P_MINUS_1_FACTORS
        .iter()
        .filter_map(|&(q, _)| {
            let mut pw = 1;
            let mut m = n;
            while m % q == 0 {
                m /= q;
                pw *= q;
            }
            (pw > 1).then_some(pw)
        })
        .collect()
}

fn inv_mod(a: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i64, (a % m) as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    t0.rem_euclid(m as i64) as u64
}

#[derive(Debug, Clone)]
pub struct TransformPlan {
    n: usize,
    factors: Vec<usize>,
    root: Fe,
    /// per axis, row-major `N_i x N_i` matrices `w^(kt)`, forward and inverse
    fwd: Vec<Vec<u64>>,
    inv: Vec<Vec<u64>>,
    /// mixed-radix position -> input index (Ruritanian map)
    in_map: Vec<u32>,
    /// mixed-radix position -> output index (CRT map)
    out_map: Vec<u32>,
    n_inv: Fe,
}

/// Length in `[min_len, 2 min_len]` minimizing `N * sum N_i`, the cost of
/// one transform. The smallest admissible length can carry a large prime
/// factor (`8275 = 25 * 331`), which dominates the per-factor DFTs.
pub fn cheapest_transform_length(min_len: u64) -> Result<u64, PfaError> {
    let first = transform_length(min_len)?;
    let cost = |d: u64| d.saturating_mul(prime_powers(d).iter().sum::<u64>());
    Ok(divisors()
        .iter()
        .copied()
        .filter(|&d| d >= first && d <= first.max(2 * min_len))
        .min_by_key(|&d| (cost(d), d))
        .unwrap_or(first))
}

/// Plan for the smallest supported length `N >= min_len`.
pub fn choose_transform_length(min_len: u64) -> Result<TransformPlan, PfaError> {
    TransformPlan::new(transform_length(min_len)?)
}

impl TransformPlan {
    pub fn new(n: u64) -> Result<TransformPlan, PfaError> {
        let root = root_of_unity(n)?;
        // the root must have exact order n
        debug_assert!(prime_powers(n).iter().all(|&q| {
            let prime = P_MINUS_1_FACTORS.iter().find(|f| q % f.0 == 0).unwrap().0;
            root.pow(n / prime) != Fe::ONE
        }));
        assert!(n <= u32::MAX as u64, "transform too long");
        let factors: Vec<u64> = prime_powers(n);
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        let mut mult = Vec::new();
        for &ni in &factors {
            let mi = n / ni;
            let w = root.pow(mi);
            let wi = w.inv().expect("root is nonzero");
            let mut a = Vec::with_capacity(ni as usize);
            let mut b = Vec::with_capacity(ni as usize);
            let (mut x, mut y) = (Fe::ONE, Fe::ONE);
            for _ in 0..ni {
                a.push(x);
                b.push(y);
                x *= w;
                y *= wi;
            }
            let k = ni as usize;
            let mat = |pw: &[Fe]| -> Vec<u64> { (0..k * k).map(|i| pw[(i / k) * (i % k) % k].value()).collect() };
            fwd.push(mat(&a));
            inv.push(mat(&b));
            mult.push((mi, mi * inv_mod(mi, ni) % n));
        }
        let total = n as usize;
        let mut in_map = vec![0u32; total];
        let mut out_map = vec![0u32; total];
        // walk positions in row-major order over (N_1, .., N_k)
        let k = factors.len();
        let mut digits = vec![0u64; k];
        let (mut iv, mut ov) = (0u64, 0u64);
        for pos in 0..total {
            in_map[pos] = iv as u32;
            out_map[pos] = ov as u32;
            for ax in (0..k).rev() {
                digits[ax] += 1;
                iv = (iv + mult[ax].0) % n;
                ov = (ov + mult[ax].1) % n;
                if digits[ax] < factors[ax] {
                    break;
                }
                digits[ax] = 0;
                // wrapped: remove N_i steps, which is 0 mod n for both maps
            }
        }
        let n_inv = Fe::new(n).inv().expect("n < p");
        Ok(TransformPlan {
            n: total,
            factors: factors.iter().map(|&f| f as usize).collect(),
            root,
            fwd,
            inv,
            in_map,
            out_map,
            n_inv,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn root(&self) -> Fe {
        self.root
    }

    /// Multiplications per transform, `(sum N_i) * N`.
    pub fn cost(&self) -> usize {
        self.factors.iter().sum::<usize>() * self.n
    }

    /// `X_j = sum_i x_i w^(+-ij)`; the inverse includes the `1/N` factor.
    /// Shorter inputs are zero-padded.
    pub fn dft(&self, data: &[Fe], dir: Direction) -> Result<Vec<Fe>, PfaError> {
        if data.len() > self.n {
            return Err(PfaError::Length { expected: self.n, got: data.len() });
        }
        let mut buf: Vec<Fe> = self
            .in_map
            .iter()
            .map(|&i| data.get(i as usize).copied().unwrap_or(Fe::ZERO))
            .collect();
        let tables = match dir {
            Direction::Forward => &self.fwd,
            Direction::Inverse => &self.inv,
        };
        let mut stride = self.n;
        let mut line: Vec<u64> = Vec::new();
        let mut next = vec![Fe::ZERO; self.n];
        let mut acc: Vec<u128> = Vec::new();
        for (ax, &ni) in self.factors.iter().enumerate() {
            stride /= ni;
            let w = &tables[ax];
            let block = ni * stride;
            if stride < 16 {
                line.resize(ni, 0);
                for base in (0..self.n).step_by(block) {
                    for off in 0..stride {
                        let start = base + off;
                        for t in 0..ni {
                            line[t] = buf[start + t * stride].value();
                        }
                        for (kk, row) in w.chunks_exact(ni).enumerate() {
                            buf[start + kk * stride] = dot(&line, row);
                        }
                    }
                }
                continue;
            }
            // rows of a block are contiguous: out_k = sum_t w^(kt) row_t
            acc.resize(stride, 0);
            for base in (0..self.n).step_by(block) {
                let src = &buf[base..base + block];
                for (kk, row) in w.chunks_exact(ni).enumerate() {
                    acc.fill(0);
                    for (t, &wv) in row.iter().enumerate() {
                        let wv = wv as u128;
                        for (a, x) in acc.iter_mut().zip(&src[t * stride..(t + 1) * stride]) {
                            *a += x.value() as u128 * wv;
                        }
                        if t & 31 == 31 {
                            acc.iter_mut().for_each(|a| *a = crate::field::reduce(*a).value() as u128);
                        }
                    }
                    let dst = &mut next[base + kk * stride..base + (kk + 1) * stride];
                    for (o, &a) in dst.iter_mut().zip(&acc) {
                        *o = crate::field::reduce(a);
                    }
                }
            }
            std::mem::swap(&mut buf, &mut next);
        }
        let mut out = vec![Fe::ZERO; self.n];
        for (pos, &k) in self.out_map.iter().enumerate() {
            out[k as usize] = buf[pos];
        }
        if dir == Direction::Inverse {
            for x in out.iter_mut() {
                *x *= self.n_inv;
            }
        }
        Ok(out)
    }

    pub fn forward(&self, data: &[Fe]) -> Vec<Fe> {
        self.dft(data, Direction::Forward).expect("input fits plan")
    }

    pub fn inverse(&self, data: &[Fe]) -> Vec<Fe> {
        self.dft(data, Direction::Inverse).expect("input fits plan")
    }

    /// `c_j = sum_i a_i b_{(j-i) mod N}`.
    pub fn circular_convolution(&self, a: &[Fe], b: &[Fe]) -> Result<Vec<Fe>, PfaError> {
        let fa = self.dft(a, Direction::Forward)?;
        let fb = self.dft(b, Direction::Forward)?;
        Ok(self.convolve_transformed(&fa, &fb))
    }

    /// Inverse of a pointwise product of two forward transforms.
    pub fn convolve_transformed(&self, fa: &[Fe], fb: &[Fe]) -> Vec<Fe> {
        let prod: Vec<Fe> = fa.iter().zip(fb).map(|(&x, &y)| x * y).collect();
        self.inverse(&prod)
    }
}

fn dot(x: &[u64], w: &[u64]) -> Fe {
    // products are < 2^122, so 32 of them fit a u128 with room for the carry
    let mut acc = 0u128;
    for (xc, wc) in x.chunks(32).zip(w.chunks(32)) {
        let mut part = 0u128;
        for (&a, &b) in xc.iter().zip(wc) {
            part += a as u128 * b as u128;
        }
        acc = crate::field::reduce(part).value() as u128 + acc;
    }
    crate::field::reduce(acc)
}

/// Schoolbook `O(N^2)` DFT, kept for testing.
pub fn naive_dft(data: &[Fe], root: Fe) -> Vec<Fe> {
    let n = data.len();
    let mut pw = Vec::with_capacity(n);
    let mut x = Fe::ONE;
    for _ in 0..n {
        pw.push(x);
        x *= root;
    }
    (0..n)
        .map(|k| {
            let mut acc = Fe::ZERO;
            let mut e = 0usize;
            for &d in data {
                acc += d * pw[e];
                e += k;
                if e >= n {
                    e -= n;
                }
            }
            acc
        })
        .collect()
}

/// Schoolbook circular convolution.
pub fn naive_convolution(a: &[Fe], b: &[Fe]) -> Vec<Fe> {
    let n = a.len().max(b.len());
    let get = |v: &[Fe], i: usize| v.get(i).copied().unwrap_or(Fe::ZERO);
    (0..n)
        .map(|j| (0..n).map(|i| get(a, i) * get(b, (j + n - i) % n)).sum())
        .collect()
}
