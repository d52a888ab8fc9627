//! Bit-string algebra over GF(2): the order-preserving encodings between
//! `[2^m]` and `GF(2)^m`, inner products, XOR, and the Walsh-Hadamard
//! transform used by the quantum protocol.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("bit-string lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("index {index} out of range for [{size}]")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("mapping table is not a permutation of [{0}]")]
    NotAPermutation(u64),
    #[error("invalid bit-string literal {0:?}")]
    BadLiteral(String),
}

/// A fixed-length element of `GF(2)^m`, `m <= 63`.
///
/// Bits are kept big-endian: bit 0 is the most significant, so lexicographic
/// comparison of bit sequences coincides with numeric comparison of equal
/// lengths.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    len: u8,
    value: u64,
}

impl BitString {
    pub fn new(value: u64, len: usize) -> Self {
        assert!(len <= 63, "bit-string length {len} too large");
        let mask = (1u64 << len) - 1;
        BitString {
            len: len as u8,
            value: value & mask,
        }
    }

    pub fn zero(len: usize) -> Self {
        Self::new(0, len)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    /// Bit at position `i`, counted from the most significant end.
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i < self.len());
        ((self.value >> (self.len() - 1 - i)) & 1) as u8
    }

    pub fn weight(&self) -> u32 {
        self.value.count_ones()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString, Gf2Error> {
        if self.len != other.len {
            return Err(Gf2Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(BitString {
            len: self.len,
            value: self.value ^ other.value,
        })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Gf2Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s.len() > 63 {
            return Err(Gf2Error::BadLiteral(s.to_string()));
        }
        let mut value = 0u64;
        for c in s.chars() {
            value <<= 1;
            match c {
                '0' => {}
                '1' => value |= 1,
                _ => return Err(Gf2Error::BadLiteral(s.to_string())),
            }
        }
        Ok(BitString::new(value, s.len()))
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// `<u, v> = sum_i u_i v_i mod 2`.
pub fn inner_product(u: &BitString, v: &BitString) -> Result<u8, Gf2Error> {
    if u.len != v.len {
        return Err(Gf2Error::LengthMismatch(u.len(), v.len()));
    }
    Ok(((u.value & v.value).count_ones() & 1) as u8)
}

/// A reversible mapping between `[2^m]` (1-based) and `GF(2)^m`.
///
/// The plain `sigma_0` maps index `j` to the big-endian binary encoding of
/// `j - 1`, which preserves lexicographic order. A permutation of the domain
/// may be composed in front of `sigma_0`; the derandomized reductions produce
/// encodings of that form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmaEncoding {
    bits: u8,
    /// `perm[j - 1]` is the (1-based) image of `j`; applied before `sigma_0`.
    perm: Option<Vec<u64>>,
    #[serde(skip)]
    inv: Option<Vec<u64>>,
}

impl SigmaEncoding {
    /// The order-preserving encoding for a domain of size `2^m`.
    pub fn sigma0(bits: usize) -> Self {
        assert!((1..=63).contains(&bits));
        SigmaEncoding {
            bits: bits as u8,
            perm: None,
            inv: None,
        }
    }

    /// `j -> sigma_0(perm(j))`.
    pub fn composed(bits: usize, perm: Vec<u64>) -> Result<Self, Gf2Error> {
        assert!((1..=63).contains(&bits));
        let size = 1u64 << bits;
        if perm.len() as u64 != size {
            return Err(Gf2Error::NotAPermutation(size));
        }
        let mut inv = vec![0u64; perm.len()];
        let mut seen = vec![false; perm.len()];
        for (j, &image) in perm.iter().enumerate() {
            if image < 1 || image > size || seen[(image - 1) as usize] {
                return Err(Gf2Error::NotAPermutation(size));
            }
            seen[(image - 1) as usize] = true;
            inv[(image - 1) as usize] = j as u64 + 1;
        }
        Ok(SigmaEncoding {
            bits: bits as u8,
            perm: Some(perm),
            inv: Some(inv),
        })
    }

    pub fn bits(&self) -> usize {
        self.bits as usize
    }

    pub fn domain_size(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn encode(&self, j: u64) -> Result<BitString, Gf2Error> {
        let size = self.domain_size();
        if j < 1 || j > size {
            return Err(Gf2Error::IndexOutOfRange { index: j, size });
        }
        let image = match &self.perm {
            Some(p) => p[(j - 1) as usize],
            None => j,
        };
        Ok(BitString::new(image - 1, self.bits()))
    }

    pub fn decode(&self, b: &BitString) -> Result<u64, Gf2Error> {
        if b.len() != self.bits() {
            return Err(Gf2Error::LengthMismatch(b.len(), self.bits()));
        }
        let image = b.value() + 1;
        Ok(match &self.inv {
            Some(inv) => inv[(image - 1) as usize],
            None => image,
        })
    }
}

fn check_power_of_two(len: usize) -> Result<u32, Gf2Error> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Gf2Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros())
}

/// In-place normalized Walsh-Hadamard transform:
/// `out[j] = 2^{-m/2} * sum_k (-1)^{<j,k>} in[k]`.
pub fn walsh_hadamard_f64(state: &mut [f64]) -> Result<(), Gf2Error> {
    let m = check_power_of_two(state.len())?;
    butterfly(state);
    let scale = 1.0 / (state.len() as f64).sqrt();
    for a in state.iter_mut() {
        *a *= scale;
    }
    let _ = m;
    Ok(())
}

/// In-place unnormalized butterfly over exact rationals.
///
/// Returns `m = log2(len)`; the caller owes an extra `2^{-m/2}` amplitude
/// scale, which in this crate is tracked as a power-of-two factor on the
/// squared magnitudes.
pub fn walsh_hadamard_exact(coeffs: &mut [BigRational]) -> Result<u32, Gf2Error> {
    let m = check_power_of_two(coeffs.len())?;
    let mut h = 1;
    while h < coeffs.len() {
        let mut i = 0;
        while i < coeffs.len() {
            for j in i..i + h {
                let a = coeffs[j].clone();
                let b = coeffs[j + h].clone();
                coeffs[j] = &a + &b;
                coeffs[j + h] = a - b;
            }
            i += 2 * h;
        }
        h *= 2;
    }
    Ok(m)
}

fn butterfly(state: &mut [f64]) {
    let mut h = 1;
    while h < state.len() {
        let mut i = 0;
        while i < state.len() {
            for j in i..i + h {
                let a = state[j];
                let b = state[j + h];
                state[j] = a + b;
                state[j + h] = a - b;
            }
            i += 2 * h;
        }
        h *= 2;
    }
}
