//! Elliptic-curve primitives over secp160k1: keys, ECDSA, ECDH key
//! derivation, hashing and the single-block AES-256 pseudo-identity cipher.
//!
//! This is a research simulator. None of the arithmetic is constant-time.

mod curve;
mod ecdsa;
mod field;
mod sym;
mod uint;

pub use curve::{secp160k1, Curve, Point, POINT_BYTES, SCALAR_BYTES};
pub use ecdsa::{sign, verify, Signature, SIGNATURE_BYTES};
pub use sym::{sym_decrypt, sym_encrypt, CIPHERTEXT_BYTES, NONCE_BYTES, PLAINTEXT_BYTES};
pub use uint::U192;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("point is not on the curve")]
    OffCurve,
    #[error("the identity point is not a valid key")]
    IdentityPoint,
    #[error("scalar out of range")]
    ScalarRange,
    #[error("encoding error: {0}")]
    Encoding(&'static str),
    #[error("unsupported curve: {0}")]
    Unsupported(&'static str),
}

/// SHA-256, the single hash used for signing, key derivation and pseudo-identities.
pub fn hash(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

/// Hashes the concatenation of several byte strings.
pub fn hash_parts(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Uniform scalar in `[1, q-1]`.
pub(crate) fn random_scalar<R: Rng + ?Sized>(rng: &mut R, curve: &Curve) -> U192 {
    let bits = curve.q.bits();
    loop {
        let mut buf = [0u8; 24];
        rng.fill_bytes(&mut buf);
        let k = U192::from_be_slice(&buf).unwrap().mask_bits(bits);
        if !k.is_zero() && k < curve.q {
            return k;
        }
    }
}

/// 256 bits of key material shared by the two ends of a handshake.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymKey(pub [u8; 32]);

impl std::fmt::Debug for SymKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymKey({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    sk: U192,
    pub pk: Point,
}

impl KeyPair {
    /// Draws a private key below 2^160 so it fits the 20-byte scalar encoding.
    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> KeyPair {
        let curve = secp160k1();
        loop {
            let mut buf = [0u8; SCALAR_BYTES];
            rng.fill_bytes(&mut buf);
            let sk = U192::from_be_slice(&buf).unwrap();
            if !sk.is_zero() && sk < curve.q {
                return KeyPair {
                    sk,
                    pk: curve.mul_base(&sk),
                };
            }
        }
    }

    pub fn from_secret(sk: U192) -> Result<KeyPair, CryptoError> {
        let curve = secp160k1();
        if sk.is_zero() || sk >= curve.q {
            return Err(CryptoError::ScalarRange);
        }
        Ok(KeyPair {
            sk,
            pk: curve.mul_base(&sk),
        })
    }

    pub fn secret(&self) -> &U192 {
        &self.sk
    }

    pub fn secret_bytes(&self) -> [u8; SCALAR_BYTES] {
        self.sk.to_be_bytes20().expect("secret keys are below 2^160")
    }
}

/// `sk_self · pk_peer`, with the x-coordinate hashed into a [`SymKey`].
pub fn ecdh_shared(sk_self: &U192, pk_peer: &Point, curve: &Curve) -> Result<SymKey, CryptoError> {
    if pk_peer.is_identity() {
        return Err(CryptoError::IdentityPoint);
    }
    let shared = curve.mul(sk_self, pk_peer)?;
    let x = shared.x().ok_or(CryptoError::IdentityPoint)?;
    let xb = x.to_be_bytes20().expect("field elements fit 160 bits");
    Ok(SymKey(hash(&xb)))
}
