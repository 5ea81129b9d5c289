//! Fixed-layout big-endian codec. Every message starts with a one-byte
//! kind tag; variable payloads carry a 2-byte length.

use serde::{Deserialize, Serialize};

use super::{Certificate, Cid, Oid, Pid, Reject, Timestamp};
use crate::crypto::{secp160k1, Point, Signature, CIPHERTEXT_BYTES, POINT_BYTES, SIGNATURE_BYTES};

pub const TIMESTAMP_BYTES: usize = 4;
pub const PID_BYTES: usize = 20;
/// Signature size used for byte accounting against the published tables.
pub const COST_MODEL_SIGNATURE_BYTES: usize = 32;
const CERT_BYTES: usize = POINT_BYTES + TIMESTAMP_BYTES + SIGNATURE_BYTES;
const OID_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    M1,
    M2,
    M3,
    M4,
    M5,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    /// Registration request `⟨PK, OID, T1⟩`.
    M1 { pk: Point, oid: Oid, t1: Timestamp },
    /// RCA beacon `⟨Cert_RCA, T1, σ_RCA⟩`.
    M2 { cert: Certificate, t1: Timestamp, sigma: Signature },
    /// Handshake reply `⟨Cert_D, T2, CID, σ_D⟩`.
    M3 { cert: Certificate, t2: Timestamp, cid: Cid, sigma: Signature },
    /// Data `⟨m, PID⟩`.
    M4 { m: Vec<u8>, pid: Pid },
    /// Data with pseudo-identity refresh `⟨m, PID, CID'⟩`.
    M5 { m: Vec<u8>, pid: Pid, cid: Cid },
}

fn put_cert(out: &mut Vec<u8>, c: &Certificate) -> Result<(), Reject> {
    out.extend_from_slice(&c.pk.to_bytes().map_err(|_| Reject::Malformed)?);
    out.extend_from_slice(&c.expiry.to_be_bytes());
    out.extend_from_slice(&c.sigma_ca.to_bytes());
    Ok(())
}

fn put_payload(out: &mut Vec<u8>, m: &[u8]) -> Result<(), Reject> {
    let len = u16::try_from(m.len()).map_err(|_| Reject::Malformed)?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(m);
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Reject> {
        if self.buf.len() < n {
            return Err(Reject::Malformed);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], Reject> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn timestamp(&mut self) -> Result<Timestamp, Reject> {
        Ok(Timestamp::from_be_bytes(self.array()?))
    }

    fn point(&mut self) -> Result<Point, Reject> {
        Point::from_bytes(self.take(POINT_BYTES)?, secp160k1()).map_err(|_| Reject::Malformed)
    }

    fn signature(&mut self) -> Result<Signature, Reject> {
        Ok(Signature::from_bytes(&self.array()?))
    }

    fn cert(&mut self) -> Result<Certificate, Reject> {
        Ok(Certificate {
            pk: self.point()?,
            expiry: self.timestamp()?,
            sigma_ca: self.signature()?,
        })
    }

    fn payload(&mut self) -> Result<Vec<u8>, Reject> {
        let len = u16::from_be_bytes(self.array()?) as usize;
        Ok(self.take(len)?.to_vec())
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::M1 { .. } => MessageKind::M1,
            Message::M2 { .. } => MessageKind::M2,
            Message::M3 { .. } => MessageKind::M3,
            Message::M4 { .. } => MessageKind::M4,
            Message::M5 { .. } => MessageKind::M5,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, Reject> {
        let mut out = vec![self.kind() as u8 + 1];
        match self {
            Message::M1 { pk, oid, t1 } => {
                out.extend_from_slice(&pk.to_bytes().map_err(|_| Reject::Malformed)?);
                out.extend_from_slice(&oid.0);
                out.extend_from_slice(&t1.to_be_bytes());
            }
            Message::M2 { cert, t1, sigma } => {
                put_cert(&mut out, cert)?;
                out.extend_from_slice(&t1.to_be_bytes());
                out.extend_from_slice(&sigma.to_bytes());
            }
            Message::M3 { cert, t2, cid, sigma } => {
                put_cert(&mut out, cert)?;
                out.extend_from_slice(&t2.to_be_bytes());
                out.extend_from_slice(&cid.0);
                out.extend_from_slice(&sigma.to_bytes());
            }
            Message::M4 { m, pid } => {
                out.extend_from_slice(&pid.0);
                put_payload(&mut out, m)?;
            }
            Message::M5 { m, pid, cid } => {
                out.extend_from_slice(&pid.0);
                out.extend_from_slice(&cid.0);
                put_payload(&mut out, m)?;
            }
        }
        Ok(out)
    }

    /// Rejects trailing bytes, unknown tags and off-curve points.
    pub fn decode(bytes: &[u8]) -> Result<Message, Reject> {
        let (&tag, rest) = bytes.split_first().ok_or(Reject::Malformed)?;
        let mut r = Reader { buf: rest };
        let msg = match tag {
            1 => Message::M1 {
                pk: r.point()?,
                oid: Oid(r.array()?),
                t1: r.timestamp()?,
            },
            2 => Message::M2 {
                cert: r.cert()?,
                t1: r.timestamp()?,
                sigma: r.signature()?,
            },
            3 => Message::M3 {
                cert: r.cert()?,
                t2: r.timestamp()?,
                cid: Cid(r.array()?),
                sigma: r.signature()?,
            },
            4 => {
                let pid = Pid(r.array()?);
                Message::M4 { m: r.payload()?, pid }
            }
            5 => {
                let pid = Pid(r.array()?);
                let cid = Cid(r.array()?);
                Message::M5 { m: r.payload()?, pid, cid }
            }
            _ => return Err(Reject::Malformed),
        };
        if !r.buf.is_empty() {
            return Err(Reject::Malformed);
        }
        Ok(msg)
    }

    /// Field bytes with `sig_bytes` per signature, excluding tag and
    /// length framing.
    pub fn field_bytes(&self, sig_bytes: usize) -> usize {
        let cert = POINT_BYTES + TIMESTAMP_BYTES + sig_bytes;
        match self {
            Message::M1 { .. } => POINT_BYTES + OID_BYTES + TIMESTAMP_BYTES,
            Message::M2 { .. } => cert + TIMESTAMP_BYTES + sig_bytes,
            Message::M3 { .. } => cert + TIMESTAMP_BYTES + CIPHERTEXT_BYTES + sig_bytes,
            Message::M4 { m, .. } => m.len() + PID_BYTES,
            Message::M5 { m, .. } => m.len() + PID_BYTES + CIPHERTEXT_BYTES,
        }
    }

    pub fn cost_model_bytes(&self) -> usize {
        self.field_bytes(COST_MODEL_SIGNATURE_BYTES)
    }
}

const _: () = assert!(CERT_BYTES == 84);

/// Bytes covered by σ_RCA: `Cert_RCA ‖ T1`.
pub(crate) fn m2_body(cert: &Certificate, t1: Timestamp) -> Result<Vec<u8>, Reject> {
    let mut out = Vec::with_capacity(CERT_BYTES + TIMESTAMP_BYTES);
    put_cert(&mut out, cert)?;
    out.extend_from_slice(&t1.to_be_bytes());
    Ok(out)
}

/// Bytes covered by σ_D: `Cert_D ‖ T2 ‖ CID`.
pub(crate) fn m3_body(cert: &Certificate, t2: Timestamp, cid: &Cid) -> Result<Vec<u8>, Reject> {
    let mut out = m2_body(cert, t2)?;
    out.extend_from_slice(&cid.0);
    Ok(out)
}
