//! Multilinear extensions over the boolean cube, the verifier's streaming
//! fingerprint, and univariate Lagrange evaluation over `{0, .., h-1}`.
//!
//! Bit order: variable `k` of a cube point is bit `k` of its index
//! (least significant first). Every module uses the same convention.

use thiserror::Error;

use crate::field::{batch_inv, Fe};
use crate::stream::{Stream, StreamUpdate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MleError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dim(usize, usize),
    #[error("index {index} out of range for 2^{d}")]
    OutOfRange { index: u64, d: usize },
}

/// Number of variables for a universe of size `n` (padded up).
pub fn num_vars(n: u64) -> usize {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as usize
    }
}

#[inline]
fn chi_bit(bit: bool, r: Fe) -> Fe {
    if bit {
        r
    } else {
        Fe::ONE - r
    }
}

/// `prod_k chi_{v_k}(r_k)`.
pub fn chi_point(v: &[bool], r: &[Fe]) -> Result<Fe, MleError> {
    if v.len() != r.len() {
        return Err(MleError::Dim(v.len(), r.len()));
    }
    Ok(v.iter().zip(r).map(|(&b, &x)| chi_bit(b, x)).product())
}

/// Indicator extension of cube index `i` at `r`.
#[inline]
pub fn chi_index(i: u64, r: &[Fe]) -> Fe {
    let mut acc = Fe::ONE;
    for (k, &x) in r.iter().enumerate() {
        acc *= chi_bit((i >> k) & 1 == 1, x);
    }
    acc
}

/// All `chi_i(r)` for `i` in `[0, 2^d)`.
pub fn eq_table(r: &[Fe]) -> Vec<Fe> {
    let mut t = vec![Fe::ONE];
    for &x in r {
        let one_minus = Fe::ONE - x;
        let mut next = Vec::with_capacity(t.len() * 2);
        // new top bit; lower indices keep their layout
        next.extend(t.iter().map(|&v| v * one_minus));
        next.extend(t.iter().map(|&v| v * x));
        t = next;
    }
    t
}

/// Multilinear extension of `values` (length `2^d`) at `r`.
pub fn mle_eval(values: &[Fe], r: &[Fe]) -> Result<Fe, MleError> {
    if values.len() != 1 << r.len() {
        return Err(MleError::Dim(values.len(), 1 << r.len()));
    }
    let mut t = values.to_vec();
    for &x in r {
        let half = t.len() / 2;
        for j in 0..half {
            let (a, b) = (t[2 * j], t[2 * j + 1]);
            t[j] = a + x * (b - a);
        }
        t.truncate(half);
    }
    Ok(t[0])
}

/// Folds the lowest variable of a table to `x`, in place.
pub fn fold_low(t: &mut Vec<Fe>, x: Fe) {
    let half = t.len() / 2;
    for j in 0..half {
        let (a, b) = (t[2 * j], t[2 * j + 1]);
        t[j] = a + x * (b - a);
    }
    t.truncate(half);
}

/// Verifier-side running value of the input's multilinear extension.
#[derive(Debug, Clone)]
pub struct StreamingLdeState {
    r: Vec<Fe>,
    acc: Fe,
}

impl StreamingLdeState {
    pub fn new(r: Vec<Fe>) -> Self {
        StreamingLdeState { r, acc: Fe::ZERO }
    }

    pub fn dims(&self) -> usize {
        self.r.len()
    }

    pub fn point(&self) -> &[Fe] {
        &self.r
    }

    pub fn update(&mut self, u: &StreamUpdate) -> Result<(), MleError> {
        self.add(u.index, Fe::from_i64(u.delta))
    }

    pub fn add(&mut self, index: u64, delta: Fe) -> Result<(), MleError> {
        let d = self.r.len();
        if d < 64 && index >> d != 0 {
            return Err(MleError::OutOfRange { index, d });
        }
        self.acc += delta * chi_index(index, &self.r);
        Ok(())
    }

    pub fn value(&self) -> Fe {
        self.acc
    }

    /// Words held: the point plus the accumulator.
    pub fn words(&self) -> usize {
        self.r.len() + 1
    }
}

pub fn stream_mle_eval(stream: &Stream, r: &[Fe]) -> Result<Fe, MleError> {
    let mut st = StreamingLdeState::new(r.to_vec());
    for u in &stream.updates {
        st.update(u)?;
    }
    Ok(st.value())
}

/// Lagrange basis over the integer domain `{0, .., h-1}`.
#[derive(Debug, Clone)]
pub struct GridDomain {
    h: usize,
    /// `prod_{x != i} (i - x)^{-1}`
    denom_inv: Vec<Fe>,
}

impl GridDomain {
    pub fn new(h: usize) -> Self {
        assert!(h >= 1);
        // prod_{x != i} (i - x) = i! * (h-1-i)! * (-1)^{h-1-i}
        let mut fact = vec![Fe::ONE; h];
        for i in 1..h {
            fact[i] = fact[i - 1] * Fe::new(i as u64);
        }
        let denom: Vec<Fe> = (0..h)
            .map(|i| {
                let d = fact[i] * fact[h - 1 - i];
                if (h - 1 - i) % 2 == 1 {
                    -d
                } else {
                    d
                }
            })
            .collect();
        let denom_inv = batch_inv(&denom).expect("h < p");
        GridDomain { h, denom_inv }
    }

    pub fn size(&self) -> usize {
        self.h
    }

    pub fn denom_inv(&self) -> &[Fe] {
        &self.denom_inv
    }

    /// `chi_i(x)` for every `i` in `[h]`.
    pub fn basis(&self, x: Fe) -> Vec<Fe> {
        let h = self.h;
        if x.value() < h as u64 {
            let mut out = vec![Fe::ZERO; h];
            out[x.value() as usize] = Fe::ONE;
            return out;
        }
        let diffs: Vec<Fe> = (0..h).map(|i| x - Fe::new(i as u64)).collect();
        let full: Fe = diffs.iter().copied().product();
        let inv = batch_inv(&diffs).expect("x off the grid");
        (0..h).map(|i| full * inv[i] * self.denom_inv[i]).collect()
    }

    /// Value at `x` of the degree `< h` polynomial with `evals` on `[h]`.
    pub fn interpolate(&self, evals: &[Fe], x: Fe) -> Fe {
        assert_eq!(evals.len(), self.h);
        self.basis(x).iter().zip(evals).map(|(&b, &e)| b * e).sum()
    }
}

/// Evaluates at `x` the polynomial of degree `< evals.len()` taking
/// `evals[k]` at `k`.
pub fn interpolate_at(evals: &[Fe], x: Fe) -> Fe {
    GridDomain::new(evals.len()).interpolate(evals, x)
}

/// Column-major `h x w` view: entry `(x, y)` is `data[y*h + x]`, so a
/// linear index `i` sits at row `i mod h`, column `i div h`. Missing
/// trailing entries read as zero.
#[derive(Debug, Clone, Copy)]
pub struct Grid<'a> {
    pub h: usize,
    pub w: usize,
    pub data: &'a [Fe],
}

impl<'a> Grid<'a> {
    pub fn get(&self, x: usize, y: usize) -> Fe {
        self.data.get(y * self.h + x).copied().unwrap_or(Fe::ZERO)
    }
}

/// `f(x, y)` where `f` has degree `< h` in its first coordinate and agrees
/// with the grid.
pub fn grid_lde_eval(dom: &GridDomain, a: Grid<'_>, x: Fe, y: usize) -> Fe {
    assert_eq!(dom.size(), a.h);
    dom.basis(x)
        .iter()
        .enumerate()
        .map(|(i, &b)| b * a.get(i, y))
        .sum()
}
