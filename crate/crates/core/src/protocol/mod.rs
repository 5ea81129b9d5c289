//! Entity state machines (CA, RCA, device) and the M1–M5 handshake,
//! re-authentication and pseudo-identity refresh messages.
//!
//! Entities never read a clock: every step takes `now` from the harness.

mod ca;
mod device;
mod rca;
mod wire;

pub use ca::{ca_init, register_device, register_rca, CaState, PreloadBundle, RegistryEntry};
pub use device::{carrier_frame, device_handshake, device_regenerate, device_send_data, DeviceState, Outgoing};
pub use rca::{rca_broadcast, rca_handshake_verify, rca_reauthenticate, rca_update_pid, CommEntry, RcaState};
pub(crate) use wire::m3_body;
pub use wire::{Message, MessageKind, COST_MODEL_SIGNATURE_BYTES, PID_BYTES, TIMESTAMP_BYTES};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Algo, ClassifierError};
use crate::crypto::{
    hash_parts, secp160k1, sym_decrypt, sym_encrypt, verify, CryptoError, Point, Signature, SymKey,
    CIPHERTEXT_BYTES, NONCE_BYTES, U192,
};
use crate::fingerprint::{ExtractorConfig, FingerprintError};
use crate::phy::{OfdmConfig, PhyError};

/// Logical clock value; 32 bits on the wire.
pub type Timestamp = u32;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pid(pub [u8; PID_BYTES]);

impl fmt::Debug for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pid({})", hex(&self.0[..6]))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cid(pub [u8; CIPHERTEXT_BYTES]);

impl fmt::Debug for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cid({})", hex(&self.0[..6]))
    }
}

/// Original identity, known only to the device and the CA.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Oid(pub [u8; 16]);

impl fmt::Debug for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Oid({})", hex(&self.0))
    }
}

pub(crate) fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

/// Why a step refused its input.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reject {
    #[error("certificate expired")]
    ExpiredCert,
    #[error("certificate not issued by the CA")]
    CertInvalid,
    #[error("timestamp outside the freshness window")]
    StaleTimestamp,
    #[error("timestamp not newer than the last accepted one")]
    Replay,
    #[error("bad signature")]
    BadSignature,
    #[error("ciphertext failed to decrypt")]
    DecryptFailure,
    #[error("pseudo-identity already in use")]
    PidCollision,
    #[error("unknown pseudo-identity")]
    UnknownPid,
    #[error("fingerprint does not match the pseudo-identity's owner")]
    FingerprintMismatch,
    #[error("fingerprint extraction failed")]
    ExtractionFailure,
    #[error("message out of protocol order")]
    OutOfOrder,
    #[error("identity revoked")]
    Revoked,
    #[error("identity already registered")]
    DuplicateOid,
    #[error("malformed message")]
    Malformed,
}

impl Reject {
    /// Rejections raised by certificate, signature, freshness or cipher checks.
    pub fn is_cryptographic(&self) -> bool {
        matches!(
            self,
            Reject::ExpiredCert
                | Reject::CertInvalid
                | Reject::StaleTimestamp
                | Reject::Replay
                | Reject::BadSignature
                | Reject::DecryptFailure
        )
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("rejected: {0}")]
    Rejected(#[from] Reject),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

impl ProtocolError {
    pub fn reject(&self) -> Option<Reject> {
        match self {
            ProtocolError::Rejected(r) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Freshness window ΔT in clock ticks.
    pub delta_t: Timestamp,
    /// Data messages per pseudo-identity session.
    pub d: u32,
    /// Certificate lifetime in ticks from issue.
    pub cert_validity: Timestamp,
    pub train_fraction: f64,
    pub algo: Algo,
    pub extractor: ExtractorConfig,
}

impl ProtocolConfig {
    pub fn for_ofdm(ofdm: &OfdmConfig) -> Self {
        ProtocolConfig {
            delta_t: 5,
            d: 10,
            cert_validity: 1_000_000,
            train_fraction: 0.8,
            algo: Algo::default(),
            extractor: ExtractorConfig::for_ofdm(ofdm),
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.d == 0 {
            return Err(ProtocolError::Config("d must be at least 1".into()));
        }
        if self.cert_validity == 0 {
            return Err(ProtocolError::Config("cert_validity must be positive".into()));
        }
        self.extractor.validate()?;
        Ok(())
    }
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self::for_ofdm(&OfdmConfig::default())
    }
}

/// Receiver-side freshness: `T ≤ now` and `now − T ≤ ΔT`.
pub fn check_fresh(t: Timestamp, now: Timestamp, delta_t: Timestamp) -> Result<(), Reject> {
    if t > now || now - t > delta_t {
        Err(Reject::StaleTimestamp)
    } else {
        Ok(())
    }
}

/// The published parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicParams {
    pub a: U192,
    pub b: U192,
    pub p: U192,
    pub q: U192,
    pub g: [U192; 2],
    #[serde(with = "point_hex")]
    pub pk_ca: Point,
    pub enc: String,
    pub dec: String,
}

impl PublicParams {
    pub(crate) fn new(pk_ca: Point) -> Self {
        let c = secp160k1();
        let (gx, gy) = match c.g {
            Point::Affine { x, y } => (x, y),
            Point::Identity => unreachable!("generator is affine"),
        };
        PublicParams {
            a: c.a,
            b: c.b,
            p: c.p,
            q: c.q,
            g: [gx, gy],
            pk_ca,
            enc: "AES-256, 2-block CBC, zero IV".into(),
            dec: "AES-256, 2-block CBC, zero IV".into(),
        }
    }

    /// True when the constants are the curve this crate computes on.
    pub fn matches_curve(&self) -> bool {
        let c = secp160k1();
        c.a == self.a
            && c.b == self.b
            && c.p == self.p
            && c.q == self.q
            && c.g == Point::Affine { x: self.g[0], y: self.g[1] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(with = "point_hex")]
    pub pk: Point,
    /// Expiry T_R.
    pub expiry: Timestamp,
    #[serde(with = "sig_hex")]
    pub sigma_ca: Signature,
}

impl Certificate {
    pub(crate) fn signed_bytes(pk: &Point, expiry: Timestamp) -> Result<Vec<u8>, CryptoError> {
        let mut v = pk.to_bytes()?.to_vec();
        v.extend_from_slice(&expiry.to_be_bytes());
        Ok(v)
    }

    /// Issuer signature and expiry, in that order.
    pub fn check(&self, pk_ca: &Point, now: Timestamp) -> Result<(), Reject> {
        let body = Self::signed_bytes(&self.pk, self.expiry).map_err(|_| Reject::CertInvalid)?;
        if !verify(pk_ca, &body, &self.sigma_ca, secp160k1()) {
            return Err(Reject::CertInvalid);
        }
        if now > self.expiry {
            return Err(Reject::ExpiredCert);
        }
        Ok(())
    }

    /// Stable classifier label for the certified key; reveals nothing
    /// beyond the public key itself.
    pub fn label(&self) -> String {
        label_for(&self.pk)
    }
}

pub fn label_for(pk: &Point) -> String {
    let bytes = pk.to_bytes().map(|b| b.to_vec()).unwrap_or_default();
    hex(&hash_parts(&[b"label", &bytes])[..8])
}

/// `H(sk ‖ T ‖ counter)` truncated to 160 bits.
pub(crate) fn derive_pid(sk: &[u8], t: Timestamp, counter: u64) -> Pid {
    let h = hash_parts(&[b"pid", sk, &t.to_be_bytes(), &counter.to_be_bytes()]);
    let mut out = [0u8; PID_BYTES];
    out.copy_from_slice(&h[..PID_BYTES]);
    Pid(out)
}

const TAG_BYTES: usize = NONCE_BYTES - 4;

fn cid_tag(key: &SymKey, pid: &Pid, t: Timestamp) -> [u8; TAG_BYTES] {
    let h = hash_parts(&[b"cid", &key.0, &pid.0, &t.to_be_bytes()]);
    let mut tag = [0u8; TAG_BYTES];
    tag.copy_from_slice(&h[..TAG_BYTES]);
    tag
}

/// The nonce field carries `T ‖ tag(key, pid, T)`, which binds the
/// ciphertext to its timestamp and lets the receiver detect a wrong key.
pub(crate) fn seal_pid(key: &SymKey, pid: &Pid, t: Timestamp) -> Cid {
    let mut nonce = [0u8; NONCE_BYTES];
    nonce[..4].copy_from_slice(&t.to_be_bytes());
    nonce[4..].copy_from_slice(&cid_tag(key, pid, t));
    Cid(sym_encrypt(key, &pid.0, &nonce))
}

pub(crate) fn open_pid(key: &SymKey, cid: &Cid) -> Result<(Pid, Timestamp), Reject> {
    let (pt, nonce) = sym_decrypt(key, &cid.0);
    let pid = Pid(pt);
    let t = Timestamp::from_be_bytes(nonce[..4].try_into().expect("4 bytes"));
    if nonce[4..] != cid_tag(key, &pid, t) {
        return Err(Reject::DecryptFailure);
    }
    Ok((pid, t))
}

mod point_hex {
    use super::*;
    use serde::{de::Error, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
        let b = p.to_bytes().map_err(serde::ser::Error::custom)?;
        s.serialize_str(&hex(&b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point, D::Error> {
        let s = String::deserialize(d)?;
        let b = unhex(&s).ok_or_else(|| D::Error::custom("bad hex"))?;
        Point::from_bytes(&b, secp160k1()).map_err(D::Error::custom)
    }
}

mod sig_hex {
    use super::*;
    use crate::crypto::SIGNATURE_BYTES;
    use serde::{de::Error, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(sig: &Signature, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex(&sig.to_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Signature, D::Error> {
        let s = String::deserialize(d)?;
        let b = unhex(&s).ok_or_else(|| D::Error::custom("bad hex"))?;
        let arr: [u8; SIGNATURE_BYTES] = b.try_into().map_err(|_| D::Error::custom("signature length"))?;
        Ok(Signature::from_bytes(&arr))
    }
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}
