//! Arithmetic modulo the Mersenne prime p = 2^61 - 1.
//!
//! Every `Fe` holds a canonical residue in `[0, p)`. Reduction only uses
//! shifts, masks and adds.

use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use thiserror::Error;

/// The modulus 2^61 - 1.
pub const P: u64 = (1u64 << 61) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("no inverse of zero")]
    ZeroInverse,
    #[error("non-canonical field element {0}")]
    NonCanonical(u64),
    #[error("short input: need 8 bytes, got {0}")]
    Short(usize),
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fe(u64);

/// Reduce any 128-bit integer mod p.
#[inline]
pub fn reduce(x: u128) -> Fe {
    let p = P as u128;
    // x < 2^128 -> < 2^61 + 2^67 -> < 2^61 + 2^7
    let x = (x & p) + (x >> 61);
    let x = ((x & p) + (x >> 61)) as u64;
    Fe(if x >= P { x - P } else { x })
}

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    /// Reduces `v` mod p.
    #[inline]
    pub const fn new(v: u64) -> Fe {
        let v = (v & P) + (v >> 61);
        Fe(if v >= P { v - P } else { v })
    }

    /// Maps a signed integer to its residue.
    #[inline]
    pub fn from_i64(v: i64) -> Fe {
        if v >= 0 {
            Fe::new(v as u64)
        } else {
            -Fe::new(v.unsigned_abs())
        }
    }

    #[inline]
    pub const fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn square(self) -> Fe {
        self * self
    }

    pub fn pow(self, mut e: u64) -> Fe {
        let mut base = self;
        let mut acc = Fe::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base.square();
            e >>= 1;
        }
        acc
    }

    pub fn inv(self) -> Result<Fe, FieldError> {
        if self.0 == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(P - 2))
    }

    pub fn to_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Fe, FieldError> {
        let arr: [u8; 8] = b
            .get(..8)
            .and_then(|s| s.try_into().ok())
            .ok_or(FieldError::Short(b.len()))?;
        let v = u64::from_le_bytes(arr);
        if v >= P {
            return Err(FieldError::NonCanonical(v));
        }
        Ok(Fe(v))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Fe {
        // rejection sampling keeps the distribution uniform
        loop {
            let v = rng.gen::<u64>() & P;
            if v < P {
                return Fe(v);
            }
        }
    }
}

/// Inverts every nonzero element of `xs` with one field inversion.
pub fn batch_inv(xs: &[Fe]) -> Result<Vec<Fe>, FieldError> {
    let mut prefix = Vec::with_capacity(xs.len());
    let mut acc = Fe::ONE;
    for &x in xs {
        if x.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        prefix.push(acc);
        acc *= x;
    }
    let mut inv = acc.inv()?;
    let mut out = vec![Fe::ZERO; xs.len()];
    for i in (0..xs.len()).rev() {
        out[i] = prefix[i] * inv;
        inv *= xs[i];
    }
    Ok(out)
}

impl fmt::Debug for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for Fe {
    fn from(v: u64) -> Fe {
        Fe::new(v)
    }
}

impl From<i64> for Fe {
    fn from(v: i64) -> Fe {
        Fe::from_i64(v)
    }
}

impl From<bool> for Fe {
    fn from(b: bool) -> Fe {
        Fe(b as u64)
    }
}

impl Add for Fe {
    type Output = Fe;
    #[inline]
    fn add(self, o: Fe) -> Fe {
        let s = self.0 + o.0;
        Fe(if s >= P { s - P } else { s })
    }
}

impl Sub for Fe {
    type Output = Fe;
    #[inline]
    fn sub(self, o: Fe) -> Fe {
        if self.0 >= o.0 {
            Fe(self.0 - o.0)
        } else {
            Fe(self.0 + P - o.0)
        }
    }
}

impl Neg for Fe {
    type Output = Fe;
    #[inline]
    fn neg(self) -> Fe {
        if self.0 == 0 {
            self
        } else {
            Fe(P - self.0)
        }
    }
}

impl Mul for Fe {
    type Output = Fe;
    #[inline]
    fn mul(self, o: Fe) -> Fe {
        // product < 2^122, so one fold leaves < 2^62
        let w = self.0 as u128 * o.0 as u128;
        let s = (w as u64 & P) + (w >> 61) as u64;
        Fe(if s >= P { s - P } else { s })
    }
}

impl AddAssign for Fe {
    #[inline]
    fn add_assign(&mut self, o: Fe) {
        *self = *self + o;
    }
}

impl SubAssign for Fe {
    #[inline]
    fn sub_assign(&mut self, o: Fe) {
        *self = *self - o;
    }
}

impl MulAssign for Fe {
    #[inline]
    fn mul_assign(&mut self, o: Fe) {
        *self = *self * o;
    }
}

impl Sum for Fe {
    fn sum<I: Iterator<Item = Fe>>(it: I) -> Fe {
        it.fold(Fe::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Fe> for Fe {
    fn sum<I: Iterator<Item = &'a Fe>>(it: I) -> Fe {
        it.fold(Fe::ZERO, |a, b| a + *b)
    }
}

impl Product for Fe {
    fn product<I: Iterator<Item = Fe>>(it: I) -> Fe {
        it.fold(Fe::ONE, |a, b| a * b)
    }
}
