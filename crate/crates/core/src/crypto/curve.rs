//! Short-Weierstrass group law over secp160k1 (`y^2 = x^3 + 7 mod p`).
//!
//! Affine [`Point`]s are the public currency; scalar multiplication runs in
//! Jacobian coordinates with Montgomery-form field elements. Nothing here is
//! constant-time.

use std::sync::OnceLock;

use super::field::Modulus;
use super::uint::U192;
use super::CryptoError;

// SEC 2 value, 2^160 - 2^32 - 21389. Some references print the fifth word
// as FFFFFFFF, which is composite and puts g off the curve.
const P_HEX: &str = "FFFFFFFF FFFFFFFF FFFFFFFF FFFFFFFE FFFFAC73";
const A_HEX: &str = "00000000 00000000 00000000 00000000 00000000";
const B_HEX: &str = "00000000 00000000 00000000 00000000 00000007";
const GX_HEX: &str = "3B4C382C E37AA192 A4019E76 3036F4F5 DD4D7EBB";
const GY_HEX: &str = "938CF935 318FDCED 6BC28286 531733C3 F03C4FEE";
const Q_HEX: &str = "01 00000000 00000000 0001B8FA 16DFAB9A CA16B6B3";

/// Encoded size of a non-identity point: x ‖ y, 20 bytes each.
pub const POINT_BYTES: usize = 40;
/// Encoded size of a scalar.
pub const SCALAR_BYTES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Point {
    Identity,
    Affine { x: U192, y: U192 },
}

impl Point {
    pub fn is_identity(&self) -> bool {
        matches!(self, Point::Identity)
    }

    pub fn x(&self) -> Option<&U192> {
        match self {
            Point::Identity => None,
            Point::Affine { x, .. } => Some(x),
        }
    }

    /// 40-byte big-endian `x ‖ y`. The identity has no encoding.
    pub fn to_bytes(&self) -> Result<[u8; POINT_BYTES], CryptoError> {
        match self {
            Point::Identity => Err(CryptoError::IdentityPoint),
            Point::Affine { x, y } => {
                let mut out = [0u8; POINT_BYTES];
                out[..20].copy_from_slice(&x.to_be_bytes20().ok_or(CryptoError::OffCurve)?);
                out[20..].copy_from_slice(&y.to_be_bytes20().ok_or(CryptoError::OffCurve)?);
                Ok(out)
            }
        }
    }

    /// Decodes and validates that the point lies on `curve`.
    pub fn from_bytes(bytes: &[u8], curve: &Curve) -> Result<Point, CryptoError> {
        if bytes.len() != POINT_BYTES {
            return Err(CryptoError::Encoding("point must be 40 bytes"));
        }
        let x = U192::from_be_slice(&bytes[..20]).unwrap();
        let y = U192::from_be_slice(&bytes[20..]).unwrap();
        let pt = Point::Affine { x, y };
        curve.validate(&pt)?;
        Ok(pt)
    }
}

/// Jacobian point `(X/Z^2, Y/Z^3)`, coordinates in Montgomery form; `Z = 0` is identity.
#[derive(Clone, Copy, Debug)]
struct Jacobian {
    x: U192,
    y: U192,
    z: U192,
}

#[derive(Debug)]
pub struct Curve {
    pub p: U192,
    pub a: U192,
    pub b: U192,
    pub g: Point,
    pub q: U192,
    fp: Modulus,
    fq: Modulus,
    b_mont: U192,
}

/// The process-wide secp160k1 instance, validated on first use.
pub fn secp160k1() -> &'static Curve {
    static CURVE: OnceLock<Curve> = OnceLock::new();
    CURVE.get_or_init(|| {
        let curve = Curve::from_hex(P_HEX, A_HEX, B_HEX, GX_HEX, GY_HEX, Q_HEX)
            .expect("secp160k1 constants parse");
        curve
            .self_check()
            .expect("secp160k1 constants are consistent");
        curve
    })
}

impl Curve {
    pub fn from_hex(
        p: &str,
        a: &str,
        b: &str,
        gx: &str,
        gy: &str,
        q: &str,
    ) -> Result<Curve, CryptoError> {
        let parse = |s: &str| U192::from_hex(s).ok_or(CryptoError::Encoding("bad hex constant"));
        let p = parse(p)?;
        let a = parse(a)?;
        let b = parse(b)?;
        let q = parse(q)?;
        if !a.is_zero() {
            // the doubling formula below is the a = 0 specialisation
            return Err(CryptoError::Unsupported("curve coefficient a must be 0"));
        }
        let fp = Modulus::new(p);
        let fq = Modulus::new(q);
        let b_mont = fp.to_mont(&b);
        Ok(Curve {
            p,
            a,
            b,
            g: Point::Affine {
                x: parse(gx)?,
                y: parse(gy)?,
            },
            q,
            fp,
            fq,
            b_mont,
        })
    }

    /// Checks the generator lies on the curve and has order `q`.
    pub fn self_check(&self) -> Result<(), CryptoError> {
        self.validate(&self.g)?;
        if !self.mul(&self.q, &self.g)?.is_identity() {
            return Err(CryptoError::Unsupported("q·g is not the identity"));
        }
        Ok(())
    }

    pub(crate) fn scalar_field(&self) -> &Modulus {
        &self.fq
    }

    pub fn is_on_curve(&self, pt: &Point) -> bool {
        match pt {
            Point::Identity => true,
            Point::Affine { x, y } => {
                if *x >= self.p || *y >= self.p {
                    return false;
                }
                let f = &self.fp;
                let xm = f.to_mont(x);
                let ym = f.to_mont(y);
                let lhs = f.square(&ym);
                let rhs = f.add(&f.mul(&f.square(&xm), &xm), &self.b_mont);
                lhs == rhs
            }
        }
    }

    pub fn validate(&self, pt: &Point) -> Result<(), CryptoError> {
        if self.is_on_curve(pt) {
            Ok(())
        } else {
            Err(CryptoError::OffCurve)
        }
    }

    pub fn negate(&self, pt: &Point) -> Point {
        match pt {
            Point::Identity => Point::Identity,
            Point::Affine { x, y } => Point::Affine {
                x: *x,
                y: self.fp.neg(y),
            },
        }
    }

    pub fn add(&self, lhs: &Point, rhs: &Point) -> Result<Point, CryptoError> {
        self.validate(lhs)?;
        self.validate(rhs)?;
        let sum = self.jac_add(&self.to_jacobian(lhs), &self.to_jacobian(rhs));
        Ok(self.to_affine(&sum))
    }

    /// `k·pt` by left-to-right double-and-add.
    pub fn mul(&self, k: &U192, pt: &Point) -> Result<Point, CryptoError> {
        self.validate(pt)?;
        Ok(self.to_affine(&self.jac_mul(k, &self.to_jacobian(pt))))
    }

    pub fn mul_base(&self, k: &U192) -> Point {
        self.to_affine(&self.jac_mul(k, &self.to_jacobian(&self.g)))
    }

    /// `k1·g + k2·pt`; used by signature verification.
    pub(crate) fn mul_add(&self, k1: &U192, k2: &U192, pt: &Point) -> Result<Point, CryptoError> {
        self.validate(pt)?;
        let a = self.jac_mul(k1, &self.to_jacobian(&self.g));
        let b = self.jac_mul(k2, &self.to_jacobian(pt));
        Ok(self.to_affine(&self.jac_add(&a, &b)))
    }

    fn identity_jac(&self) -> Jacobian {
        Jacobian {
            x: self.fp.one(),
            y: self.fp.one(),
            z: U192::ZERO,
        }
    }

    fn to_jacobian(&self, pt: &Point) -> Jacobian {
        match pt {
            Point::Identity => self.identity_jac(),
            Point::Affine { x, y } => Jacobian {
                x: self.fp.to_mont(x),
                y: self.fp.to_mont(y),
                z: self.fp.one(),
            },
        }
    }

    fn to_affine(&self, j: &Jacobian) -> Point {
        if j.z.is_zero() {
            return Point::Identity;
        }
        let f = &self.fp;
        let zinv = f.inv(&j.z).expect("nonzero z");
        let zinv2 = f.square(&zinv);
        let zinv3 = f.mul(&zinv2, &zinv);
        Point::Affine {
            x: f.from_mont(&f.mul(&j.x, &zinv2)),
            y: f.from_mont(&f.mul(&j.y, &zinv3)),
        }
    }

    fn jac_double(&self, pt: &Jacobian) -> Jacobian {
        let f = &self.fp;
        if pt.z.is_zero() || pt.y.is_zero() {
            return self.identity_jac();
        }
        let a = f.square(&pt.x);
        let b = f.square(&pt.y);
        let c = f.square(&b);
        let xb = f.add(&pt.x, &b);
        let d = f.sub(&f.sub(&f.square(&xb), &a), &c);
        let d = f.add(&d, &d);
        let e = f.add(&f.add(&a, &a), &a);
        let ff = f.square(&e);
        let x3 = f.sub(&ff, &f.add(&d, &d));
        let c8 = {
            let c2 = f.add(&c, &c);
            let c4 = f.add(&c2, &c2);
            f.add(&c4, &c4)
        };
        let y3 = f.sub(&f.mul(&e, &f.sub(&d, &x3)), &c8);
        let yz = f.mul(&pt.y, &pt.z);
        let z3 = f.add(&yz, &yz);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn jac_add(&self, p1: &Jacobian, p2: &Jacobian) -> Jacobian {
        if p1.z.is_zero() {
            return *p2;
        }
        if p2.z.is_zero() {
            return *p1;
        }
        let f = &self.fp;
        let z1z1 = f.square(&p1.z);
        let z2z2 = f.square(&p2.z);
        let u1 = f.mul(&p1.x, &z2z2);
        let u2 = f.mul(&p2.x, &z1z1);
        let s1 = f.mul(&f.mul(&p1.y, &p2.z), &z2z2);
        let s2 = f.mul(&f.mul(&p2.y, &p1.z), &z1z1);
        if u1 == u2 {
            return if s1 == s2 {
                self.jac_double(p1)
            } else {
                self.identity_jac()
            };
        }
        let h = f.sub(&u2, &u1);
        let r = f.sub(&s2, &s1);
        let h2 = f.square(&h);
        let h3 = f.mul(&h2, &h);
        let u1h2 = f.mul(&u1, &h2);
        let x3 = f.sub(&f.sub(&f.square(&r), &h3), &f.add(&u1h2, &u1h2));
        let y3 = f.sub(&f.mul(&r, &f.sub(&u1h2, &x3)), &f.mul(&s1, &h3));
        let z3 = f.mul(&f.mul(&h, &p1.z), &p2.z);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn jac_mul(&self, k: &U192, pt: &Jacobian) -> Jacobian {
        let mut acc = self.identity_jac();
        for i in (0..k.bits()).rev() {
            acc = self.jac_double(&acc);
            if k.bit(i) {
                acc = self.jac_add(&acc, pt);
            }
        }
        acc
    }
}
