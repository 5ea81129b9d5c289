//! Attacks. The adversary reads everything on the air and can inject or
//! replay, but holds no TPD secrets and can only emit frames through its
//! own radio, i.e. with its own impairments.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{Captured, NetsimError, Scenario, World, ADVERSARY_ACTOR, RCA_ACTOR};
use crate::crypto::{secp160k1, sign, KeyPair, Signature, U192};
use crate::fingerprint::{RosterDefaults, RosterEntry};
use crate::phy::IqFrame;
use crate::protocol::{
    carrier_frame, device_handshake, rca_handshake_verify, rca_reauthenticate, rca_update_pid, register_device,
    Certificate, Message, MessageKind, ProtocolError, Reject, Timestamp,
};
use crate::rng::{derive_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpersonationMethod {
    /// M4s under the victim's live PID, read off the air.
    StolenPid,
    /// An M3 carrying a certificate the CA never signed.
    ForgedCert,
}

/// The part of a message a relay tampers with; the mutation is a single
/// bit flip, or +1 for timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Timestamp,
    Signature,
    Cert,
    Cid,
    Pid,
    Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Re-sends the victim's latest message of this kind.
    Replay {
        message: MessageKind,
        /// Re-modulate the payload through the attacker's radio instead of
        /// replaying the recorded waveform.
        #[serde(default = "yes")]
        via_own_radio: bool,
    },
    Modify { message: MessageKind, field: Field },
    Impersonate { method: ImpersonationMethod },
    /// `n` identities with self-issued certificates.
    Sybil { n: u32 },
}

fn yes() -> bool {
    true
}

fn default_injections() -> u32 {
    1
}

fn default_offset() -> f64 {
    RosterDefaults::default().cfo_spacing_units
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    #[serde(flatten)]
    pub kind: AdversaryKind,
    pub victim: String,
    pub activation: Timestamp,
    #[serde(default = "default_injections")]
    pub injections: u32,
    /// Attacker radio; defaults to the victim's impairments shifted by
    /// `attacker_offset_units` of CFO.
    #[serde(default)]
    pub attacker: Option<RosterEntry>,
    #[serde(default = "default_offset")]
    pub attacker_offset_units: f64,
}

impl AdversaryConfig {
    pub fn new(kind: AdversaryKind, victim: impl Into<String>, activation: Timestamp, injections: u32) -> Self {
        AdversaryConfig {
            kind,
            victim: victim.into(),
            activation,
            injections,
            attacker: None,
            attacker_offset_units: default_offset(),
        }
    }

    pub fn attacker_radio(&self, scenario: &Scenario) -> Option<RosterEntry> {
        if let Some(a) = &self.attacker {
            return Some(a.clone());
        }
        let v = scenario.roster.iter().find(|r| r.device_id == self.victim)?;
        Some(RosterEntry {
            device_id: ADVERSARY_ACTOR.into(),
            cfo_normalized_units: v.cfo_normalized_units + self.attacker_offset_units,
            skew_deg: v.skew_deg,
        })
    }

    pub(crate) fn validate(&self, scenario: &Scenario) -> Result<(), NetsimError> {
        let bad = |m: String| Err(NetsimError::Scenario(m));
        if !scenario.roster.iter().any(|r| r.device_id == self.victim) {
            return bad(format!("unknown victim {:?}", self.victim));
        }
        if self.injections == 0 {
            return bad("injections must be positive".into());
        }
        let radio = self.attacker_radio(scenario).expect("victim checked");
        radio
            .to_impairment(&scenario.phy.ofdm)
            .validate(&scenario.phy.ofdm)
            .map_err(|e| NetsimError::Scenario(format!("attacker radio: {e}")))?;
        use Field::*;
        use MessageKind::*;
        match &self.kind {
            AdversaryKind::Modify { message, field } => {
                let ok = matches!(
                    (message, field),
                    (M2 | M3, Timestamp | Signature | Cert)
                        | (M3, Cid)
                        | (M4 | M5, Pid | Payload)
                        | (M5, Cid)
                );
                if !ok {
                    return bad(format!("{message:?} has no mutable {field:?}"));
                }
            }
            AdversaryKind::Sybil { n } if *n == 0 => return bad("sybil needs n > 0".into()),
            _ => {}
        }
        Ok(())
    }
}

fn flip_sig(s: &Signature) -> Signature {
    let mut b = s.s.to_be_bytes();
    b[23] ^= 1;
    Signature {
        r: s.r,
        s: U192::from_be_slice(&b).expect("24 bytes"),
    }
}

fn mutate(msg: &Message, field: Field) -> Message {
    let mut m = msg.clone();
    match (&mut m, field) {
        (Message::M2 { t1: t, .. } | Message::M3 { t2: t, .. }, Field::Timestamp) => *t = t.wrapping_add(1),
        (Message::M2 { sigma, .. } | Message::M3 { sigma, .. }, Field::Signature) => *sigma = flip_sig(sigma),
        (Message::M2 { cert, .. } | Message::M3 { cert, .. }, Field::Cert) => cert.expiry ^= 1,
        (Message::M3 { cid, .. } | Message::M5 { cid, .. }, Field::Cid) => cid.0[0] ^= 1,
        (Message::M4 { pid, .. } | Message::M5 { pid, .. }, Field::Pid) => pid.0[0] ^= 1,
        (Message::M4 { m, .. } | Message::M5 { m, .. }, Field::Payload) => match m.first_mut() {
            Some(b) => *b ^= 1,
            None => m.push(1),
        },
        _ => unreachable!("validated"),
    }
    m
}

fn outcome<T>(r: Result<T, ProtocolError>) -> Result<Result<(), Reject>, NetsimError> {
    match r {
        Ok(_) => Ok(Ok(())),
        Err(ProtocolError::Rejected(j)) => Ok(Err(j)),
        Err(e) => Err(e.into()),
    }
}

struct Attacker {
    radio: RosterEntry,
    rng: SimRng,
}

impl Attacker {
    fn frame(&mut self, w: &mut World, msg: &Message) -> Result<IqFrame, NetsimError> {
        let imp = self.radio.to_impairment(&w.scenario.phy.ofdm);
        let f = carrier_frame(&msg.encode()?, &imp, &w.scenario.phy.ofdm, &mut self.rng)?;
        w.over_air(f)
    }
}

/// Delivers `msg` to whoever it is addressed to and logs the verdict.
fn deliver(
    w: &mut World,
    atk: &mut Attacker,
    victim: usize,
    msg: &Message,
    frame: Option<IqFrame>,
    now: Timestamp,
) -> Result<(), NetsimError> {
    let victim_id = w.devices[victim].impairment.device_id.clone();
    let (receiver, verdict) = match msg {
        Message::M1 { .. } => {
            let frames = (0..5).map(|_| atk.frame(w, msg)).collect::<Result<Vec<_>, _>>()?;
            ("ca".to_string(), outcome(register_device(&mut w.ca, msg, &frames, now))?)
        }
        Message::M2 { .. } => (victim_id, outcome(device_handshake(&mut w.devices[victim], msg, now))?),
        Message::M3 { .. } => (RCA_ACTOR.into(), outcome(rca_handshake_verify(&mut w.rca, msg, now))?),
        Message::M4 { .. } | Message::M5 { .. } => {
            let frame = match frame {
                Some(f) => f,
                None => atk.frame(w, msg)?,
            };
            let r = if let Message::M4 { .. } = msg {
                outcome(rca_reauthenticate(&mut w.rca, msg, &frame))?
            } else {
                outcome(rca_update_pid(&mut w.rca, msg, &frame, now))?
            };
            (RCA_ACTOR.into(), r)
        }
    };
    w.log(now, ADVERSARY_ACTOR, &receiver, msg, true, verdict);
    Ok(())
}

fn captured(w: &World, victim: &str, kind: MessageKind) -> Result<Captured, NetsimError> {
    w.captured
        .get(&(victim.to_string(), kind))
        .cloned()
        .ok_or_else(|| NetsimError::Scenario(format!("no {kind:?} from {victim} seen before the attack")))
}

/// Runs `count` injections at the activation time.
pub(crate) fn attack(w: &mut World, cfg: &AdversaryConfig, count: u32, seed: u64) -> Result<(), NetsimError> {
    let now = cfg.activation;
    let victim = w.device_index(&cfg.victim).expect("validated");
    let mut atk = Attacker {
        radio: cfg.attacker_radio(&w.scenario).expect("validated"),
        rng: SimRng::seed_from_u64(derive_seed(seed, &[0xad])),
    };
    match &cfg.kind {
        AdversaryKind::Replay { message, via_own_radio } => {
            let c = captured(w, &cfg.victim, *message)?;
            for _ in 0..count {
                let frame = if *via_own_radio { None } else { c.frame.clone() };
                deliver(w, &mut atk, victim, &c.msg, frame, now)?;
            }
        }
        AdversaryKind::Modify { message, field } => {
            let c = captured(w, &cfg.victim, *message)?;
            let m = mutate(&c.msg, *field);
            for _ in 0..count {
                deliver(w, &mut atk, victim, &m, None, now)?;
            }
        }
        AdversaryKind::Impersonate {
            method: ImpersonationMethod::StolenPid,
        } => {
            for j in 0..count {
                // the PID the victim is currently using, as last seen on air
                let pid = w.devices[victim]
                    .pid()
                    .ok_or_else(|| NetsimError::Scenario(format!("{} has no session to hijack", cfg.victim)))?;
                let m = Message::M4 {
                    m: format!("forged:{j}").into_bytes(),
                    pid,
                };
                deliver(w, &mut atk, victim, &m, None, now)?;
            }
        }
        AdversaryKind::Impersonate {
            method: ImpersonationMethod::ForgedCert,
        } => {
            // the victim's certificate re-bound to the attacker's key
            let real = w.devices[victim]
                .cert()
                .cloned()
                .ok_or_else(|| NetsimError::Scenario(format!("{} is not registered", cfg.victim)))?;
            for _ in 0..count {
                let kp = KeyPair::generate(&mut atk.rng);
                let cert = Certificate { pk: kp.pk, ..real.clone() };
                let m = self_made_m3(&kp, cert, now, &mut atk.rng)?;
                deliver(w, &mut atk, victim, &m, None, now)?;
            }
        }
        AdversaryKind::Sybil { n } => {
            for _ in 0..count {
                for _ in 0..*n {
                    let kp = KeyPair::generate(&mut atk.rng);
                    let expiry = now.saturating_add(w.config.cert_validity);
                    let body = Certificate::signed_bytes(&kp.pk, expiry).map_err(ProtocolError::from)?;
                    let cert = Certificate {
                        pk: kp.pk,
                        expiry,
                        sigma_ca: sign(kp.secret(), &body, secp160k1(), &mut atk.rng),
                    };
                    let m = self_made_m3(&kp, cert, now, &mut atk.rng)?;
                    deliver(w, &mut atk, victim, &m, None, now)?;
                }
            }
        }
    }
    Ok(())
}

/// A well-formed M3 from a key the attacker owns.
fn self_made_m3(kp: &KeyPair, cert: Certificate, now: Timestamp, rng: &mut SimRng) -> Result<Message, NetsimError> {
    let mut cid = crate::protocol::Cid([0u8; crate::crypto::CIPHERTEXT_BYTES]);
    rand::RngCore::fill_bytes(rng, &mut cid.0);
    let body = crate::protocol::m3_body(&cert, now, &cid).map_err(ProtocolError::from)?;
    Ok(Message::M3 {
        sigma: sign(kp.secret(), &body, secp160k1(), rng),
        cert,
        t2: now,
        cid,
    })
}
