use std::collections::BTreeMap;

use rand::SeedableRng;

use super::wire::{m2_body, m3_body};
use super::{
    check_fresh, open_pid, Certificate, Message, Pid, PreloadBundle, ProtocolConfig, ProtocolError, PublicParams,
    Reject, Timestamp,
};
use crate::classifier::{evaluate, predict, split_features, train, EvalReport, TrainedModel};
use crate::crypto::{ecdh_shared, secp160k1, sign, verify, KeyPair, SymKey, POINT_BYTES};
use crate::fingerprint::{extract_features, FeatureVector};
use crate::phy::IqFrame;
use crate::rng::{derive_seed, SimRng};

/// One authenticated device.
#[derive(Debug, Clone)]
pub struct CommEntry {
    pub cert: Certificate,
    pub pid: Pid,
    pub key: SymKey,
    /// Classifier label bound to this entry at handshake.
    pub label: String,
    /// Timestamp the current PID was issued at.
    pub pid_t: Timestamp,
    /// Messages seen under the current PID.
    pub seen: u32,
}

#[derive(Clone)]
pub struct RcaState {
    keypair: KeyPair,
    pub cert: Certificate,
    pub pps: PublicParams,
    pub config: ProtocolConfig,
    pub model: TrainedModel,
    /// Held-out evaluation from offline training.
    pub training_report: EvalReport,
    pub list_comm: Vec<CommEntry>,
    last_t2: BTreeMap<[u8; POINT_BYTES], Timestamp>,
    rng: SimRng,
}

impl RcaState {
    /// Offline mode: trains the classifier on the preloaded fingerprint
    /// lists with a stratified split.
    pub fn from_bundle(
        keypair: KeyPair,
        bundle: PreloadBundle,
        config: ProtocolConfig,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        config.validate()?;
        if bundle.cert_rca.pk != keypair.pk {
            return Err(Reject::CertInvalid.into());
        }
        if !bundle.pps.matches_curve() {
            return Err(ProtocolError::Config("public parameters name a different curve".into()));
        }
        let rows: Vec<FeatureVector> = bundle.lists.iter().flat_map(|(_, l)| l.iter().cloned()).collect();
        let (tr, te) = split_features(&rows, config.train_fraction, seed)?;
        let model = train(&tr, &config.algo, seed)?;
        let mut training_report = evaluate(&model, &te)?;
        training_report.split_seed = Some(seed);
        Ok(RcaState {
            keypair,
            cert: bundle.cert_rca,
            pps: bundle.pps,
            config,
            model,
            training_report,
            list_comm: Vec::new(),
            last_t2: BTreeMap::new(),
            rng: SimRng::seed_from_u64(derive_seed(seed, &[0x4ca])),
        })
    }

    pub fn entry_by_pid(&self, pid: &Pid) -> Option<&CommEntry> {
        self.list_comm.iter().find(|e| e.pid == *pid)
    }

    fn index_by_pid(&self, pid: &Pid) -> Result<usize, Reject> {
        self.list_comm.iter().position(|e| e.pid == *pid).ok_or(Reject::UnknownPid)
    }

    fn fingerprint_matches(&self, frame: &IqFrame, label: &str) -> Result<(), Reject> {
        let fv = extract_features(frame, &self.config.extractor).map_err(|_| Reject::ExtractionFailure)?;
        let p = predict(&self.model, &fv).map_err(|_| Reject::ExtractionFailure)?;
        if p.device_id == label {
            Ok(())
        } else {
            Err(Reject::FingerprintMismatch)
        }
    }

    fn pid_taken(&self, pid: &Pid, owner: &Certificate) -> bool {
        self.list_comm.iter().any(|e| e.pid == *pid && e.cert.pk != owner.pk)
    }
}

pub fn rca_broadcast(rca: &mut RcaState, now: Timestamp) -> Result<Message, ProtocolError> {
    rca.cert.check(&rca.pps.pk_ca, now)?;
    let body = m2_body(&rca.cert, now)?;
    let sigma = sign(rca.keypair.secret(), &body, secp160k1(), &mut rca.rng);
    Ok(Message::M2 {
        cert: rca.cert.clone(),
        t1: now,
        sigma,
    })
}

/// Verifies M3 and records the device; returns its label. On
/// [`Reject::PidCollision`] nothing is recorded and the device should
/// regenerate.
pub fn rca_handshake_verify(rca: &mut RcaState, m3: &Message, now: Timestamp) -> Result<String, ProtocolError> {
    let Message::M3 { cert, t2, cid, sigma } = m3 else {
        return Err(Reject::OutOfOrder.into());
    };
    cert.check(&rca.pps.pk_ca, now)?;
    check_fresh(*t2, now, rca.config.delta_t)?;
    let pk_bytes = cert.pk.to_bytes()?;
    if rca.last_t2.get(&pk_bytes).is_some_and(|last| *t2 <= *last) {
        return Err(Reject::Replay.into());
    }
    if !verify(&cert.pk, &m3_body(cert, *t2, cid)?, sigma, secp160k1()) {
        return Err(Reject::BadSignature.into());
    }
    let key = ecdh_shared(rca.keypair.secret(), &cert.pk, secp160k1())?;
    let (pid, t) = open_pid(&key, cid)?;
    if t != *t2 {
        return Err(Reject::DecryptFailure.into());
    }
    if rca.pid_taken(&pid, cert) {
        return Err(Reject::PidCollision.into());
    }
    rca.last_t2.insert(pk_bytes, *t2);
    let entry = CommEntry {
        cert: cert.clone(),
        pid,
        key,
        label: cert.label(),
        pid_t: *t2,
        seen: 0,
    };
    let label = entry.label.clone();
    match rca.list_comm.iter_mut().find(|e| e.cert.pk == cert.pk) {
        Some(e) => *e = entry,
        None => rca.list_comm.push(entry),
    }
    Ok(label)
}

/// Online mode: the PID must be live and the carrying frame must classify
/// as the device bound to it.
pub fn rca_reauthenticate(rca: &mut RcaState, m4: &Message, frame: &IqFrame) -> Result<String, ProtocolError> {
    let Message::M4 { pid, .. } = m4 else {
        return Err(Reject::OutOfOrder.into());
    };
    let i = rca.index_by_pid(pid)?;
    rca.list_comm[i].seen += 1;
    let label = rca.list_comm[i].label.clone();
    rca.fingerprint_matches(frame, &label)?;
    Ok(label)
}

/// Replaces the entry's PID with the one sealed in M5; the old PID stops
/// resolving immediately. An M5 is due as the `d`-th message under a PID,
/// so one arriving earlier is out of order.
pub fn rca_update_pid(rca: &mut RcaState, m5: &Message, frame: &IqFrame, now: Timestamp) -> Result<String, ProtocolError> {
    let Message::M5 { pid, cid, .. } = m5 else {
        return Err(Reject::OutOfOrder.into());
    };
    let i = rca.index_by_pid(pid)?;
    rca.list_comm[i].seen += 1;
    if rca.list_comm[i].seen < rca.config.d {
        return Err(Reject::OutOfOrder.into());
    }
    let label = rca.list_comm[i].label.clone();
    rca.fingerprint_matches(frame, &label)?;
    let (next, t3) = open_pid(&rca.list_comm[i].key, cid)?;
    check_fresh(t3, now, rca.config.delta_t)?;
    if t3 < rca.list_comm[i].pid_t {
        return Err(Reject::Replay.into());
    }
    let owner = rca.list_comm[i].cert.clone();
    if rca.pid_taken(&next, &owner) {
        return Err(Reject::PidCollision.into());
    }
    let e = &mut rca.list_comm[i];
    e.pid = next;
    e.pid_t = t3;
    e.seen = 0;
    Ok(label)
}
