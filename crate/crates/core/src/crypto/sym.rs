//! Single-block pseudo-identity cipher.
//!
//! The 256-bit plaintext block is `nonce (12 B) ‖ pid (20 B)`, encrypted as
//! two AES-256 blocks chained CBC-style under an all-zero IV. Putting the
//! nonce first randomises both ciphertext blocks. Integrity is not provided
//! here; the protocol layer carries a tag inside the nonce field.

use aes::cipher::{generic_array::GenericArray, BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes256;

use super::SymKey;

pub const PLAINTEXT_BYTES: usize = 20;
pub const NONCE_BYTES: usize = 12;
pub const CIPHERTEXT_BYTES: usize = 32;

pub fn sym_encrypt(
    key: &SymKey,
    plaintext: &[u8; PLAINTEXT_BYTES],
    nonce: &[u8; NONCE_BYTES],
) -> [u8; CIPHERTEXT_BYTES] {
    let cipher = Aes256::new(GenericArray::from_slice(&key.0));
    let mut block = [0u8; CIPHERTEXT_BYTES];
    block[..NONCE_BYTES].copy_from_slice(nonce);
    block[NONCE_BYTES..].copy_from_slice(plaintext);

    let mut b0 = *GenericArray::from_slice(&block[..16]);
    cipher.encrypt_block(&mut b0);
    let mut b1 = *GenericArray::from_slice(&block[16..]);
    for (x, c) in b1.iter_mut().zip(b0.iter()) {
        *x ^= c;
    }
    cipher.encrypt_block(&mut b1);

    let mut out = [0u8; CIPHERTEXT_BYTES];
    out[..16].copy_from_slice(&b0);
    out[16..].copy_from_slice(&b1);
    out
}

/// Inverts [`sym_encrypt`], returning `(plaintext, nonce)`. A wrong key
/// yields garbage rather than an error.
pub fn sym_decrypt(
    key: &SymKey,
    ciphertext: &[u8; CIPHERTEXT_BYTES],
) -> ([u8; PLAINTEXT_BYTES], [u8; NONCE_BYTES]) {
    let cipher = Aes256::new(GenericArray::from_slice(&key.0));
    let c0 = *GenericArray::from_slice(&ciphertext[..16]);
    let mut b0 = c0;
    cipher.decrypt_block(&mut b0);
    let mut b1 = *GenericArray::from_slice(&ciphertext[16..]);
    cipher.decrypt_block(&mut b1);
    for (x, c) in b1.iter_mut().zip(c0.iter()) {
        *x ^= c;
    }
    let mut block = [0u8; CIPHERTEXT_BYTES];
    block[..16].copy_from_slice(&b0);
    block[16..].copy_from_slice(&b1);

    let mut nonce = [0u8; NONCE_BYTES];
    nonce.copy_from_slice(&block[..NONCE_BYTES]);
    let mut pt = [0u8; PLAINTEXT_BYTES];
    pt.copy_from_slice(&block[NONCE_BYTES..]);
    (pt, nonce)
}
