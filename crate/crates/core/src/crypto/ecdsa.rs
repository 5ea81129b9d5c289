//! ECDSA over secp160k1 with SHA-256 truncated to its leading 160 bits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::curve::{Curve, Point};
use super::uint::U192;
use super::{hash, random_scalar};

/// Wire size of `r ‖ s`.
pub const SIGNATURE_BYTES: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub r: U192,
    pub s: U192,
}

impl Signature {
    pub fn to_bytes(&self) -> [u8; SIGNATURE_BYTES] {
        let mut out = [0u8; SIGNATURE_BYTES];
        out[..20].copy_from_slice(&self.r.to_be_bytes20().expect("signer keeps r below 2^160"));
        out[20..].copy_from_slice(&self.s.to_be_bytes20().expect("signer keeps s below 2^160"));
        out
    }

    /// Decoding never fails on length-correct input; range checks happen in [`verify`].
    pub fn from_bytes(bytes: &[u8; SIGNATURE_BYTES]) -> Signature {
        Signature {
            r: U192::from_be_slice(&bytes[..20]).unwrap(),
            s: U192::from_be_slice(&bytes[20..]).unwrap(),
        }
    }
}

fn digest_scalar(message: &[u8]) -> U192 {
    let h = hash(message);
    U192::from_be_slice(&h[..20]).unwrap()
}

/// Signs `message`. Nonces that produce `r = 0`, `s = 0`, or a component
/// that overflows the 20-byte encoding are discarded and redrawn.
pub fn sign<R: Rng + ?Sized>(sk: &U192, message: &[u8], curve: &Curve, rng: &mut R) -> Signature {
    let fq = curve.scalar_field();
    let e = fq.reduce(&digest_scalar(message));
    loop {
        let k = random_scalar(rng, curve);
        let rp = curve.mul_base(&k);
        let Some(x) = rp.x() else { continue };
        let r = fq.reduce(x);
        if r.is_zero() || r.bits() > 160 {
            continue;
        }
        let kinv = fq.inv_plain(&k).expect("k is nonzero mod q");
        let rd = fq.mul_plain(&r, sk);
        let s = fq.mul_plain(&kinv, &fq.add(&e, &rd));
        if s.is_zero() || s.bits() > 160 {
            continue;
        }
        return Signature { r, s };
    }
}

pub fn verify(pk: &Point, message: &[u8], sig: &Signature, curve: &Curve) -> bool {
    if pk.is_identity() || !curve.is_on_curve(pk) {
        return false;
    }
    let q = &curve.q;
    if sig.r.is_zero() || sig.s.is_zero() || sig.r >= *q || sig.s >= *q {
        return false;
    }
    let fq = curve.scalar_field();
    let e = fq.reduce(&digest_scalar(message));
    let Some(w) = fq.inv_plain(&sig.s) else {
        return false;
    };
    let u1 = fq.mul_plain(&e, &w);
    let u2 = fq.mul_plain(&sig.r, &w);
    match curve.mul_add(&u1, &u2, pk) {
        Ok(Point::Affine { x, .. }) => fq.reduce(&x) == sig.r,
        _ => false,
    }
}
