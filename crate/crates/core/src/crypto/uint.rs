//! Fixed-width 192-bit unsigned integers, wide enough for the 161-bit group
//! order and the 160-bit field prime.

use std::cmp::Ordering;
use std::fmt;

/// A 192-bit unsigned integer stored as three little-endian 64-bit limbs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct U192(pub(crate) [u64; 3]);

impl U192 {
    pub const ZERO: U192 = U192([0, 0, 0]);
    pub const ONE: U192 = U192([1, 0, 0]);

    pub const fn from_u64(v: u64) -> Self {
        U192([v, 0, 0])
    }

    /// Parses a big-endian byte string of at most 24 bytes.
    pub fn from_be_slice(bytes: &[u8]) -> Option<Self> {
        if bytes.len() > 24 {
            // allow leading zero padding beyond 24 bytes
            let (head, tail) = bytes.split_at(bytes.len() - 24);
            if head.iter().any(|&b| b != 0) {
                return None;
            }
            return Self::from_be_slice(tail);
        }
        let mut buf = [0u8; 24];
        buf[24 - bytes.len()..].copy_from_slice(bytes);
        let mut limbs = [0u64; 3];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let start = 24 - 8 * (i + 1);
            *limb = u64::from_be_bytes(buf[start..start + 8].try_into().unwrap());
        }
        Some(U192(limbs))
    }

    /// Parses hexadecimal, ignoring ASCII whitespace.
    pub fn from_hex(hex: &str) -> Option<Self> {
        let digits: Vec<u8> = hex
            .bytes()
            .filter(|b| !b.is_ascii_whitespace())
            .collect();
        if digits.is_empty() || digits.len() > 48 {
            return None;
        }
        let mut v = U192::ZERO;
        for d in digits {
            let nib = (d as char).to_digit(16)? as u64;
            v = v.shl_small(4);
            v.0[0] |= nib;
        }
        Some(v)
    }

    pub fn to_be_bytes(&self) -> [u8; 24] {
        let mut out = [0u8; 24];
        for i in 0..3 {
            let start = 24 - 8 * (i + 1);
            out[start..start + 8].copy_from_slice(&self.0[i].to_be_bytes());
        }
        out
    }

    /// 20-byte big-endian encoding; `None` if the value needs more than 160 bits.
    pub fn to_be_bytes20(&self) -> Option<[u8; 20]> {
        if self.bits() > 160 {
            return None;
        }
        let full = self.to_be_bytes();
        let mut out = [0u8; 20];
        out.copy_from_slice(&full[4..]);
        Some(out)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    pub fn bit(&self, i: usize) -> bool {
        if i >= 192 {
            return false;
        }
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Number of significant bits.
    pub fn bits(&self) -> usize {
        for i in (0..3).rev() {
            if self.0[i] != 0 {
                return 64 * i + 64 - self.0[i].leading_zeros() as usize;
            }
        }
        0
    }

    fn shl_small(&self, s: u32) -> Self {
        debug_assert!(s > 0 && s < 64);
        U192([
            self.0[0] << s,
            (self.0[1] << s) | (self.0[0] >> (64 - s)),
            (self.0[2] << s) | (self.0[1] >> (64 - s)),
        ])
    }

    /// Wrapping addition, returning the carry-out.
    pub fn overflowing_add(&self, rhs: &Self) -> (Self, bool) {
        let mut out = [0u64; 3];
        let mut carry = false;
        for (i, o) in out.iter_mut().enumerate() {
            let (s1, c1) = self.0[i].overflowing_add(rhs.0[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *o = s2;
            carry = c1 || c2;
        }
        (U192(out), carry)
    }

    /// Wrapping subtraction, returning the borrow-out.
    pub fn overflowing_sub(&self, rhs: &Self) -> (Self, bool) {
        let mut out = [0u64; 3];
        let mut borrow = false;
        for (i, o) in out.iter_mut().enumerate() {
            let (d1, b1) = self.0[i].overflowing_sub(rhs.0[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            *o = d2;
            borrow = b1 || b2;
        }
        (U192(out), borrow)
    }

    /// Keeps only the lowest `n` bits.
    pub fn mask_bits(&self, n: usize) -> Self {
        let mut out = self.0;
        for (i, limb) in out.iter_mut().enumerate() {
            let lo = 64 * i;
            if n <= lo {
                *limb = 0;
            } else if n < lo + 64 {
                *limb &= (1u64 << (n - lo)) - 1;
            }
        }
        U192(out)
    }
}

impl Ord for U192 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..3).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for U192 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for U192 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:016x}{:016x}{:016x}", self.0[2], self.0[1], self.0[0])
    }
}

impl fmt::Display for U192 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl serde::Serialize for U192 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:016x}{:016x}{:016x}", self.0[2], self.0[1], self.0[0]))
    }
}

impl<'de> serde::Deserialize<'de> for U192 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        U192::from_hex(&s).ok_or_else(|| serde::de::Error::custom("invalid hex integer"))
    }
}
