//! Deterministic harness: registers a roster, trains the RCA, plays a
//! schedule of broadcasts, handshakes and data sends through the PHY
//! chain, and lets an adversary inject traffic.

mod adversary;
mod measure;

pub use adversary::{AdversaryConfig, AdversaryKind, Field, ImpersonationMethod};
pub use measure::{measure_detection, DetectionReport, RateCi};

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::KeyPair;
use crate::fingerprint::{default_roster, RosterDefaults, RosterEntry, Scenario as FpScenario};
use crate::phy::{apply_channel, IqFrame, PhyConfig};
use crate::protocol::{
    ca_init, device_handshake, device_regenerate, device_send_data, rca_broadcast, rca_handshake_verify,
    rca_reauthenticate, rca_update_pid, register_device, register_rca, CaState, DeviceState, Message, MessageKind,
    Outgoing, ProtocolConfig, ProtocolError, RcaState, Reject, Timestamp,
};
use crate::rng::{derive_seed, SimRng};

pub const RCA_ACTOR: &str = "rca";
pub const ADVERSARY_ACTOR: &str = "adversary";

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// RCA emits a fresh M2.
    Broadcast,
    /// Device answers the latest M2.
    Handshake,
    /// Device sends `count` data messages at this tick.
    Send { count: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleItem {
    pub time: Timestamp,
    pub actor: String,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub roster: Vec<RosterEntry>,
    pub schedule: Vec<ScheduleItem>,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
    pub seed: u64,
    #[serde(default)]
    pub phy: PhyConfig,
    /// Frames each device transmits its M1 in at registration.
    #[serde(default = "default_registration_frames")]
    pub registration_frames: usize,
    #[serde(default = "default_delta_t")]
    pub delta_t: Timestamp,
    #[serde(default = "default_d")]
    pub d: u32,
}

fn default_registration_frames() -> usize {
    200
}
fn default_delta_t() -> Timestamp {
    5
}
fn default_d() -> u32 {
    10
}

impl Scenario {
    /// Evenly spaced scenario-1 roster; every device handshakes once and
    /// sends `messages` data messages, one per tick.
    pub fn honest(n_devices: usize, messages: u32, seed: u64) -> Self {
        let phy = PhyConfig::default();
        let roster = default_roster(n_devices, FpScenario::FixedSkew3Deg, &phy.ofdm, &RosterDefaults::default())
            .iter()
            .map(|i| RosterEntry::from_impairment(i, &phy.ofdm))
            .collect::<Vec<_>>();
        let mut schedule = vec![ScheduleItem {
            time: 1,
            actor: RCA_ACTOR.into(),
            action: Action::Broadcast,
        }];
        for r in &roster {
            schedule.push(ScheduleItem {
                time: 2,
                actor: r.device_id.clone(),
                action: Action::Handshake,
            });
        }
        for t in 0..messages {
            for r in &roster {
                schedule.push(ScheduleItem {
                    time: 3 + t,
                    actor: r.device_id.clone(),
                    action: Action::Send { count: 1 },
                });
            }
        }
        Scenario {
            roster,
            schedule,
            adversary: None,
            seed,
            phy,
            registration_frames: default_registration_frames(),
            delta_t: default_delta_t(),
            d: default_d(),
        }
    }

    /// The reference attack: a radio one roster spacing away from `dev05`
    /// sends M4s under its stolen PID once every device has a session.
    pub fn default_impersonation(seed: u64, injections: u32) -> Self {
        let messages = 3;
        let mut s = Scenario::honest(10, messages, seed);
        s.adversary = Some(AdversaryConfig::new(
            AdversaryKind::Impersonate {
                method: ImpersonationMethod::StolenPid,
            },
            "dev05",
            3 + messages,
            injections,
        ));
        s
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            delta_t: self.delta_t,
            d: self.d,
            ..ProtocolConfig::for_ofdm(&self.phy.ofdm)
        }
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        let bad = |m: String| Err(NetsimError::Scenario(m));
        self.phy.validate().map_err(|e| NetsimError::Scenario(e.to_string()))?;
        self.protocol_config().validate()?;
        if self.roster.len() < 2 {
            return bad("roster needs at least two devices".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for r in &self.roster {
            if r.device_id == RCA_ACTOR || r.device_id == ADVERSARY_ACTOR || !ids.insert(r.device_id.as_str()) {
                return bad(format!("device id {:?} is reserved or repeated", r.device_id));
            }
            r.to_impairment(&self.phy.ofdm)
                .validate(&self.phy.ofdm)
                .map_err(|e| NetsimError::Scenario(e.to_string()))?;
        }
        if self.registration_frames < 5 {
            return bad("registration_frames must be at least 5".into());
        }
        let mut last = 0;
        for item in &self.schedule {
            if item.time < last {
                return bad(format!("schedule time {} goes backwards", item.time));
            }
            last = item.time;
            let is_rca = item.actor == RCA_ACTOR;
            if !is_rca && !ids.contains(item.actor.as_str()) {
                return bad(format!("unknown actor {:?}", item.actor));
            }
            if is_rca != (item.action == Action::Broadcast) {
                return bad(format!("{:?} cannot perform {:?}", item.actor, item.action));
            }
        }
        if let Some(a) = &self.adversary {
            a.validate(self)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

/// One delivered message and what its receiver made of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub time: Timestamp,
    pub actor: String,
    pub receiver: String,
    pub kind: MessageKind,
    pub adversarial: bool,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<Reject>,
    pub wire_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub honest_messages: u64,
    pub honest_rejections: u64,
    pub honest_crypto_rejections: u64,
    pub adversarial_messages: u64,
    pub adversarial_rejections: u64,
    pub detection_rate: Option<f64>,
    pub false_accept_rate: Option<f64>,
    /// Honest data/refresh messages refused by the fingerprint check.
    pub false_reject_rate: Option<f64>,
    pub refreshes: BTreeMap<String, u32>,
    pub rejections_by_reason: BTreeMap<Reject, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub events: Vec<TraceEvent>,
    pub metrics: TraceMetrics,
}

impl From<Reject> for NetsimError {
    fn from(r: Reject) -> Self {
        NetsimError::Protocol(r.into())
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl SessionTrace {
    fn from_events(events: Vec<TraceEvent>, refreshes: BTreeMap<String, u32>) -> Self {
        let honest: Vec<&TraceEvent> = events.iter().filter(|e| !e.adversarial).collect();
        let adv: Vec<&TraceEvent> = events.iter().filter(|e| e.adversarial).collect();
        let rejected = |v: &[&TraceEvent]| v.iter().filter(|e| e.verdict == Verdict::Reject).count() as u64;
        let data: Vec<&TraceEvent> = honest
            .iter()
            .copied()
            .filter(|e| matches!(e.kind, MessageKind::M4 | MessageKind::M5))
            .collect();
        let false_rejects = data
            .iter()
            .filter(|e| e.reason == Some(Reject::FingerprintMismatch))
            .count() as u64;
        let mut by_reason = BTreeMap::new();
        for e in &events {
            if let Some(r) = e.reason {
                *by_reason.entry(r).or_insert(0) += 1;
            }
        }
        let adv_rej = rejected(&adv);
        let metrics = TraceMetrics {
            honest_messages: honest.len() as u64,
            honest_rejections: rejected(&honest),
            honest_crypto_rejections: honest
                .iter()
                .filter(|e| e.reason.is_some_and(|r| r.is_cryptographic()))
                .count() as u64,
            adversarial_messages: adv.len() as u64,
            adversarial_rejections: adv_rej,
            detection_rate: ratio(adv_rej, adv.len() as u64),
            false_accept_rate: ratio(adv.len() as u64 - adv_rej, adv.len() as u64),
            false_reject_rate: ratio(false_rejects, data.len() as u64),
            refreshes,
            rejections_by_reason: by_reason,
        };
        SessionTrace { events, metrics }
    }

    /// One JSON object per line, events then a final metrics record.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), NetsimError> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &serde_json::json!({ "metrics": self.metrics }))?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Something seen on the air, kept for replay.
#[derive(Debug, Clone)]
pub(crate) struct Captured {
    pub msg: Message,
    pub frame: Option<IqFrame>,
}

/// Live entities plus the harness's own record of traffic.
#[derive(Clone)]
pub(crate) struct World {
    pub scenario: Scenario,
    pub config: ProtocolConfig,
    pub ca: CaState,
    pub rca: RcaState,
    pub devices: Vec<DeviceState>,
    pub last_m2: Option<Message>,
    /// Latest honest message of each kind per device.
    pub captured: BTreeMap<(String, MessageKind), Captured>,
    pub events: Vec<TraceEvent>,
    pub refreshes: BTreeMap<String, u32>,
    pub rng: SimRng,
}

impl World {
    /// Registration at t = 0 and offline training.
    pub fn setup(scenario: &Scenario) -> Result<World, NetsimError> {
        scenario.validate()?;
        let seed = scenario.seed;
        let config = scenario.protocol_config();
        let phy = scenario.phy;
        let (mut ca, pps) = ca_init(derive_seed(seed, &[1]), config)?;
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, &[2]));
        let mut devices = Vec::with_capacity(scenario.roster.len());
        let mut captured = BTreeMap::new();
        for (i, entry) in scenario.roster.iter().enumerate() {
            let imp = entry.to_impairment(&phy.ofdm);
            let mut dev = DeviceState::new(imp, pps.pk_ca, config, derive_seed(seed, &[3, i as u64]));
            let m1 = dev.m1(0);
            let mut frame_rng = SimRng::seed_from_u64(derive_seed(seed, &[4, i as u64]));
            let frames = (0..scenario.registration_frames)
                .map(|_| {
                    let f = dev.transmit(&m1, &phy.ofdm, &mut frame_rng)?;
                    Ok(apply_channel(f, &phy.channel, &mut frame_rng).map_err(ProtocolError::from)?)
                })
                .collect::<Result<Vec<_>, NetsimError>>()?;
            let cert = register_device(&mut ca, &m1, &frames, 0)?;
            dev.install_cert(cert, 0)?;
            captured.insert((entry.device_id.clone(), MessageKind::M1), Captured { msg: m1, frame: None });
            devices.push(dev);
        }
        let rca_kp = KeyPair::generate(&mut rng);
        let (_, bundle) = register_rca(&mut ca, &rca_kp.pk, 0)?;
        let rca = RcaState::from_bundle(rca_kp, bundle, config, derive_seed(seed, &[5]))?;
        Ok(World {
            scenario: scenario.clone(),
            config,
            ca,
            rca,
            devices,
            last_m2: None,
            captured,
            events: Vec::new(),
            refreshes: BTreeMap::new(),
            rng,
        })
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.impairment.device_id == id)
    }

    pub fn over_air(&mut self, frame: IqFrame) -> Result<IqFrame, NetsimError> {
        Ok(apply_channel(frame, &self.scenario.phy.channel, &mut self.rng).map_err(ProtocolError::from)?)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn log(
        &mut self,
        time: Timestamp,
        actor: &str,
        receiver: &str,
        msg: &Message,
        adversarial: bool,
        outcome: Result<(), Reject>,
    ) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            seq,
            time,
            actor: actor.to_string(),
            receiver: receiver.to_string(),
            kind: msg.kind(),
            adversarial,
            verdict: if outcome.is_ok() { Verdict::Accept } else { Verdict::Reject },
            reason: outcome.err(),
            wire_bytes: msg.encode().map(|b| b.len()).unwrap_or(0),
        });
    }

    fn step(&mut self, item: &ScheduleItem) -> Result<(), NetsimError> {
        let now = item.time;
        match &item.action {
            Action::Broadcast => {
                self.last_m2 = Some(rca_broadcast(&mut self.rca, now)?);
            }
            Action::Handshake => self.handshake(&item.actor, now)?,
            Action::Send { count } => {
                for j in 0..*count {
                    self.send(&item.actor, format!("{}:{now}:{j}", item.actor).as_bytes(), now)?;
                }
            }
        }
        Ok(())
    }

    fn handshake(&mut self, actor: &str, now: Timestamp) -> Result<(), NetsimError> {
        let i = self.device_index(actor).expect("validated");
        let Some(m2) = self.last_m2.clone() else {
            return Err(NetsimError::Scenario(format!("{actor} handshakes before any broadcast")));
        };
        let out = device_handshake(&mut self.devices[i], &m2, now);
        self.captured.insert((actor.to_string(), MessageKind::M2), Captured { msg: m2.clone(), frame: None });
        self.log(now, RCA_ACTOR, actor, &m2, false, out.as_ref().map(|_| ()).map_err(reject_of));
        let mut m3 = match out {
            Ok(m) => m,
            Err(ProtocolError::Rejected(_)) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        for _ in 0..4 {
            let r = rca_handshake_verify(&mut self.rca, &m3, now);
            self.log(now, actor, RCA_ACTOR, &m3, false, r.as_ref().map(|_| ()).map_err(reject_of));
            self.captured.insert((actor.to_string(), MessageKind::M3), Captured { msg: m3.clone(), frame: None });
            match r {
                Err(ProtocolError::Rejected(Reject::PidCollision)) => {
                    m3 = device_regenerate(&mut self.devices[i], now)?;
                }
                Ok(_) | Err(ProtocolError::Rejected(_)) => break,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }

    fn send(&mut self, actor: &str, payload: &[u8], now: Timestamp) -> Result<(), NetsimError> {
        let i = self.device_index(actor).expect("validated");
        let out = match device_send_data(&mut self.devices[i], payload, now) {
            Ok(o) => o,
            // no session yet: nothing reaches the air
            Err(ProtocolError::Rejected(Reject::OutOfOrder)) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let frame = self.devices[i].transmit(out.message(), &self.scenario.phy.ofdm, &mut self.rng)?;
        let frame = self.over_air(frame)?;
        let verdict = match &out {
            Outgoing::Data(m) => rca_reauthenticate(&mut self.rca, m, &frame).map(|_| ()),
            Outgoing::Refresh(m) => rca_update_pid(&mut self.rca, m, &frame, now).map(|_| ()),
        };
        if verdict.is_ok() {
            if let Outgoing::Refresh(_) = out {
                self.devices[i].confirm_refresh();
                *self.refreshes.entry(actor.to_string()).or_insert(0) += 1;
            }
        }
        let msg = out.message().clone();
        self.log(now, actor, RCA_ACTOR, &msg, false, verdict.as_ref().copied().map_err(reject_of));
        self.captured.insert((actor.to_string(), msg.kind()), Captured { msg, frame: Some(frame) });
        match verdict {
            Ok(()) | Err(ProtocolError::Rejected(_)) => Ok(()),
            Err(e) => Err(e.into()),
        }
    }
}

fn reject_of(e: &ProtocolError) -> Reject {
    e.reject().unwrap_or(Reject::Malformed)
}

/// Plays the whole scenario; the adversary acts once, just before the
/// first schedule item at or after its activation time.
pub fn run(scenario: &Scenario) -> Result<SessionTrace, NetsimError> {
    let mut world = World::setup(scenario)?;
    let mut pending = scenario.adversary.clone();
    for item in &scenario.schedule {
        if let Some(a) = pending.as_ref().filter(|a| a.activation <= item.time) {
            let a = a.clone();
            adversary::attack(&mut world, &a, a.injections, scenario.seed)?;
            pending = None;
        }
        world.step(item)?;
    }
    if let Some(a) = pending {
        adversary::attack(&mut world, &a, a.injections, scenario.seed)?;
    }
    Ok(SessionTrace::from_events(world.events, world.refreshes))
}
