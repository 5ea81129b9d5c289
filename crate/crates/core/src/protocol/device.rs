use rand::{Rng, SeedableRng};

use super::wire::{m2_body, m3_body};
use super::{
    check_fresh, derive_pid, seal_pid, Certificate, Message, Oid, Pid, ProtocolConfig, ProtocolError, Reject,
    Timestamp,
};
use crate::crypto::{ecdh_shared, secp160k1, sign, verify, KeyPair, Point, SymKey};
use crate::phy::{apply_impairments, DeviceImpairment, IqFrame, OfdmConfig, PhyError};
use crate::rng::{derive_seed, SimRng};

#[derive(Debug, Clone)]
struct Session {
    key: SymKey,
    pid: Pid,
    /// M4s sent under `pid`.
    sent: u32,
    /// Refresh offered in the last M5 and not yet confirmed.
    pending: Option<Pid>,
}

/// Device-side state. Keys, certificate and OID live here only.
#[derive(Clone)]
pub struct DeviceState {
    keypair: KeyPair,
    pub oid: Oid,
    /// Ground truth used by the simulation to impair transmitted frames.
    pub impairment: DeviceImpairment,
    pk_ca: Point,
    config: ProtocolConfig,
    cert: Option<Certificate>,
    session: Option<Session>,
    last_m2: Option<Timestamp>,
    counter: u64,
    rng: SimRng,
    #[cfg(test)]
    pub(crate) forced_pid: Option<Pid>,
}

/// What [`device_send_data`] decided to emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outgoing {
    Data(Message),
    Refresh(Message),
}

impl Outgoing {
    pub fn message(&self) -> &Message {
        match self {
            Outgoing::Data(m) | Outgoing::Refresh(m) => m,
        }
    }
}

impl DeviceState {
    pub fn new(impairment: DeviceImpairment, pk_ca: Point, config: ProtocolConfig, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, &[0xde]));
        let keypair = KeyPair::generate(&mut rng);
        let mut oid = [0u8; 16];
        rng.fill(&mut oid);
        DeviceState {
            keypair,
            oid: Oid(oid),
            impairment,
            pk_ca,
            config,
            cert: None,
            session: None,
            last_m2: None,
            counter: 0,
            rng,
            #[cfg(test)]
            forced_pid: None,
        }
    }

    pub fn public_key(&self) -> &Point {
        &self.keypair.pk
    }

    pub fn m1(&self, now: Timestamp) -> Message {
        Message::M1 {
            pk: self.keypair.pk,
            oid: self.oid,
            t1: now,
        }
    }

    pub fn install_cert(&mut self, cert: Certificate, now: Timestamp) -> Result<(), ProtocolError> {
        cert.check(&self.pk_ca, now)?;
        if cert.pk != self.keypair.pk {
            return Err(Reject::CertInvalid.into());
        }
        self.cert = Some(cert);
        Ok(())
    }

    pub fn cert(&self) -> Option<&Certificate> {
        self.cert.as_ref()
    }

    pub fn pid(&self) -> Option<Pid> {
        self.session.as_ref().map(|s| s.pid)
    }

    pub fn session_key(&self) -> Option<SymKey> {
        self.session.as_ref().map(|s| s.key)
    }

    /// The refresh in the last M5 was accepted; switch to its PID.
    pub fn confirm_refresh(&mut self) {
        if let Some(s) = &mut self.session {
            if let Some(p) = s.pending.take() {
                s.pid = p;
                s.sent = 0;
            }
        }
    }

    fn next_pid(&mut self, now: Timestamp) -> Pid {
        #[cfg(test)]
        if let Some(p) = self.forced_pid.take() {
            return p;
        }
        let pid = derive_pid(&self.keypair.secret_bytes(), now, self.counter);
        self.counter += 1;
        pid
    }

    fn build_m3(&mut self, key: SymKey, now: Timestamp) -> Result<Message, ProtocolError> {
        let cert = self.cert.clone().ok_or(Reject::OutOfOrder)?;
        let pid = self.next_pid(now);
        let cid = seal_pid(&key, &pid, now);
        let body = m3_body(&cert, now, &cid)?;
        let sigma = sign(self.keypair.secret(), &body, secp160k1(), &mut self.rng);
        self.session = Some(Session {
            key,
            pid,
            sent: 0,
            pending: None,
        });
        Ok(Message::M3 {
            cert,
            t2: now,
            cid,
            sigma,
        })
    }

    /// Encodes `msg` into one OFDM frame (random padding bits) bearing this
    /// device's impairments. The channel is the caller's business.
    pub fn transmit<R: Rng + ?Sized>(&self, msg: &Message, ofdm: &OfdmConfig, rng: &mut R) -> Result<IqFrame, ProtocolError> {
        carrier_frame(&msg.encode()?, &self.impairment, ofdm, rng)
    }
}

/// Checks an RCA beacon and answers with M3.
pub fn device_handshake(dev: &mut DeviceState, m2: &Message, now: Timestamp) -> Result<Message, ProtocolError> {
    let Message::M2 { cert, t1, sigma } = m2 else {
        return Err(Reject::OutOfOrder.into());
    };
    if dev.cert.is_none() {
        return Err(Reject::OutOfOrder.into());
    }
    cert.check(&dev.pk_ca, now)?;
    check_fresh(*t1, now, dev.config.delta_t)?;
    if dev.last_m2.is_some_and(|last| *t1 < last) {
        return Err(Reject::StaleTimestamp.into());
    }
    if !verify(&cert.pk, &m2_body(cert, *t1)?, sigma, secp160k1()) {
        return Err(Reject::BadSignature.into());
    }
    let key = ecdh_shared(dev.keypair.secret(), &cert.pk, secp160k1())?;
    dev.last_m2 = Some(*t1);
    dev.build_m3(key, now)
}

/// A fresh M3 under the current key after the RCA reported a collision.
pub fn device_regenerate(dev: &mut DeviceState, now: Timestamp) -> Result<Message, ProtocolError> {
    let key = dev.session_key().ok_or(Reject::OutOfOrder)?;
    dev.build_m3(key, now)
}

/// Emits M4, except that the `d`-th message under a PID is an M5 carrying
/// the next one. Each M5 attempt offers a fresh PID until
/// [`DeviceState::confirm_refresh`].
pub fn device_send_data(dev: &mut DeviceState, m: &[u8], now: Timestamp) -> Result<Outgoing, ProtocolError> {
    let d = dev.config.d;
    let (sent, key, pid) = match &dev.session {
        Some(s) => (s.sent, s.key, s.pid),
        None => return Err(Reject::OutOfOrder.into()),
    };
    if sent + 1 < d {
        let s = dev.session.as_mut().expect("checked");
        s.sent += 1;
        return Ok(Outgoing::Data(Message::M4 { m: m.to_vec(), pid }));
    }
    let next = dev.next_pid(now);
    let cid = seal_pid(&key, &next, now);
    dev.session.as_mut().expect("checked").pending = Some(next);
    Ok(Outgoing::Refresh(Message::M5 { m: m.to_vec(), pid, cid }))
}

/// Packs `bytes` MSB-first into a frame's bits, pads with random bits and
/// applies `imp`.
pub fn carrier_frame<R: Rng + ?Sized>(
    bytes: &[u8],
    imp: &DeviceImpairment,
    ofdm: &OfdmConfig,
    rng: &mut R,
) -> Result<IqFrame, ProtocolError> {
    let cap = ofdm.bits_per_frame();
    if bytes.len() * 8 > cap {
        return Err(PhyError::Shape {
            what: "message bits",
            expected: cap,
            actual: bytes.len() * 8,
        }
        .into());
    }
    let mut bits: Vec<bool> = bytes.iter().flat_map(|b| (0..8).rev().map(move |i| b >> i & 1 == 1)).collect();
    while bits.len() < cap {
        bits.push(rng.random());
    }
    let frame = crate::phy::generate_frame(Some(&bits), ofdm, rng)?;
    Ok(apply_impairments(frame, imp)?)
}
