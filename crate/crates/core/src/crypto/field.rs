//! Montgomery arithmetic modulo an odd modulus below 2^191.
//!
//! Values handed to and returned from [`Modulus::mul`] are in Montgomery form
//! (`a·R mod m`, `R = 2^192`). Addition and subtraction are form-agnostic.

use super::uint::U192;

#[derive(Clone, Debug)]
pub struct Modulus {
    m: U192,
    /// `-m^{-1} mod 2^64`
    n0inv: u64,
    /// `R^2 mod m`
    r2: U192,
    /// `R mod m`, the Montgomery form of one.
    one: U192,
}

#[inline]
fn mac(acc: u64, a: u64, b: u64, carry: u64) -> (u64, u64) {
    let t = acc as u128 + (a as u128) * (b as u128) + carry as u128;
    (t as u64, (t >> 64) as u64)
}

impl Modulus {
    pub fn new(m: U192) -> Self {
        assert!(m.0[0] & 1 == 1, "Montgomery modulus must be odd");
        assert!(m.bits() < 192, "modulus too wide");
        let m0 = m.0[0];
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(m0.wrapping_mul(inv)));
        }
        let n0inv = inv.wrapping_neg();

        let mut md = Modulus {
            m,
            n0inv,
            r2: U192::ZERO,
            one: U192::ZERO,
        };
        // 2^384 mod m by repeated doubling of 1.
        let mut x = U192::ONE;
        for i in 0..384 {
            x = md.add(&x, &x);
            if i == 191 {
                md.one = x;
            }
        }
        md.r2 = x;
        md
    }

    pub fn one(&self) -> U192 {
        self.one
    }

    pub fn add(&self, a: &U192, b: &U192) -> U192 {
        let (s, carry) = a.overflowing_add(b);
        if carry || s >= self.m {
            s.overflowing_sub(&self.m).0
        } else {
            s
        }
    }

    pub fn sub(&self, a: &U192, b: &U192) -> U192 {
        let (d, borrow) = a.overflowing_sub(b);
        if borrow {
            d.overflowing_add(&self.m).0
        } else {
            d
        }
    }

    pub fn neg(&self, a: &U192) -> U192 {
        if a.is_zero() {
            *a
        } else {
            self.m.overflowing_sub(a).0
        }
    }

    /// Montgomery product `a·b·R^{-1} mod m`. Requires `a·b < m·R`.
    pub fn mul(&self, a: &U192, b: &U192) -> U192 {
        let m = &self.m.0;
        let mut t = [0u64; 5];
        for i in 0..3 {
            let mut carry = 0u64;
            for j in 0..3 {
                let (lo, hi) = mac(t[j], a.0[j], b.0[i], carry);
                t[j] = lo;
                carry = hi;
            }
            let (s, c) = t[3].overflowing_add(carry);
            t[3] = s;
            t[4] = c as u64;

            let factor = t[0].wrapping_mul(self.n0inv);
            let (_, mut carry) = mac(t[0], factor, m[0], 0);
            for j in 1..3 {
                let (lo, hi) = mac(t[j], factor, m[j], carry);
                t[j - 1] = lo;
                carry = hi;
            }
            let (s, c) = t[3].overflowing_add(carry);
            t[2] = s;
            t[3] = t[4] + c as u64;
        }
        let r = U192([t[0], t[1], t[2]]);
        if t[3] != 0 || r >= self.m {
            r.overflowing_sub(&self.m).0
        } else {
            r
        }
    }

    pub fn square(&self, a: &U192) -> U192 {
        self.mul(a, a)
    }

    /// Converts any value below 2^192 into Montgomery form (reducing it).
    pub fn to_mont(&self, a: &U192) -> U192 {
        self.mul(a, &self.r2)
    }

    pub fn from_mont(&self, a: &U192) -> U192 {
        self.mul(a, &U192::ONE)
    }

    /// Plain `a mod m` for any `a < 2^192`.
    pub fn reduce(&self, a: &U192) -> U192 {
        self.from_mont(&self.to_mont(a))
    }

    /// Exponentiation of a Montgomery-form base by a plain exponent.
    pub fn pow(&self, base: &U192, exp: &U192) -> U192 {
        let mut acc = self.one;
        for i in (0..exp.bits()).rev() {
            acc = self.square(&acc);
            if exp.bit(i) {
                acc = self.mul(&acc, base);
            }
        }
        acc
    }

    /// Inverse of a Montgomery-form value via Fermat; the modulus must be prime.
    pub fn inv(&self, a: &U192) -> Option<U192> {
        if a.is_zero() {
            return None;
        }
        let e = self.m.overflowing_sub(&U192::from_u64(2)).0;
        Some(self.pow(a, &e))
    }

    /// Plain-domain modular multiplication.
    pub fn mul_plain(&self, a: &U192, b: &U192) -> U192 {
        self.from_mont(&self.mul(&self.to_mont(a), &self.to_mont(b)))
    }

    /// Plain-domain modular inverse.
    pub fn inv_plain(&self, a: &U192) -> Option<U192> {
        let am = self.to_mont(a);
        if am.is_zero() {
            return None;
        }
        self.inv(&am).map(|v| self.from_mont(&v))
    }
}
