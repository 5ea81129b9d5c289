use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{check_fresh, Certificate, Message, Oid, ProtocolConfig, ProtocolError, PublicParams, Reject, Timestamp};
use crate::crypto::{secp160k1, sign, KeyPair, Point};
use crate::fingerprint::{extract_features, FeatureVector};
use crate::phy::IqFrame;
use crate::rng::{rng_from, SimRng};

#[derive(Debug, Clone)]
pub struct RegistryEntry {
    /// Fingerprints measured from the registration frames.
    pub list: Vec<FeatureVector>,
    pub oid: Oid,
    pub cert: Certificate,
}

#[derive(Clone)]
pub struct CaState {
    keypair: KeyPair,
    pub pps: PublicParams,
    pub config: ProtocolConfig,
    pub registry: Vec<RegistryEntry>,
    pub revoked: BTreeSet<Oid>,
    rng: SimRng,
}

/// Everything an RCA needs before going online.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreloadBundle {
    pub pps: PublicParams,
    /// One fingerprint list per registered device, labeled by certificate.
    pub lists: Vec<(String, Vec<FeatureVector>)>,
    pub cert_rca: Certificate,
}

pub fn ca_init(seed: u64, config: ProtocolConfig) -> Result<(CaState, PublicParams), ProtocolError> {
    config.validate()?;
    secp160k1().self_check()?;
    let mut rng = rng_from(seed, &[0xca]);
    let keypair = KeyPair::generate(&mut rng);
    let pps = PublicParams::new(keypair.pk);
    Ok((
        CaState {
            keypair,
            pps: pps.clone(),
            config,
            registry: Vec::new(),
            revoked: BTreeSet::new(),
            rng,
        },
        pps,
    ))
}

impl CaState {
    pub fn public_key(&self) -> &Point {
        &self.keypair.pk
    }

    fn issue(&mut self, pk: &Point, now: Timestamp) -> Result<Certificate, ProtocolError> {
        secp160k1().validate(pk)?;
        let expiry = now.saturating_add(self.config.cert_validity);
        let body = Certificate::signed_bytes(pk, expiry)?;
        let sigma_ca = sign(self.keypair.secret(), &body, secp160k1(), &mut self.rng);
        Ok(Certificate {
            pk: *pk,
            expiry,
            sigma_ca,
        })
    }

    pub fn revoke(&mut self, oid: Oid) {
        self.revoked.insert(oid);
    }

    /// Maps a certificate back to the one identity it was issued to.
    pub fn trace(&self, cert: &Certificate) -> Option<Oid> {
        let mut hits = self.registry.iter().filter(|e| e.cert == *cert);
        let first = hits.next()?;
        debug_assert!(hits.next().is_none());
        Some(first.oid)
    }
}

/// Certifies a device from its M1 and measures its fingerprint from the
/// frames that carried it.
pub fn register_device(
    ca: &mut CaState,
    m1: &Message,
    training_frames: &[IqFrame],
    now: Timestamp,
) -> Result<Certificate, ProtocolError> {
    let Message::M1 { pk, oid, t1 } = m1 else {
        return Err(Reject::OutOfOrder.into());
    };
    check_fresh(*t1, now, ca.config.delta_t)?;
    if ca.revoked.contains(oid) {
        return Err(Reject::Revoked.into());
    }
    if ca.registry.iter().any(|e| e.oid == *oid) {
        return Err(Reject::DuplicateOid.into());
    }
    let cert = ca.issue(pk, now)?;
    let label = cert.label();
    let list = training_frames
        .iter()
        .map(|f| {
            let mut fv = extract_features(f, &ca.config.extractor)?;
            fv.device_id = Some(label.clone());
            Ok(fv)
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    ca.registry.push(RegistryEntry {
        list,
        oid: *oid,
        cert: cert.clone(),
    });
    Ok(cert)
}

pub fn register_rca(ca: &mut CaState, pk_rca: &Point, now: Timestamp) -> Result<(Certificate, PreloadBundle), ProtocolError> {
    let cert = ca.issue(pk_rca, now)?;
    let lists = ca
        .registry
        .iter()
        .filter(|e| !ca.revoked.contains(&e.oid))
        .map(|e| (e.cert.label(), e.list.clone()))
        .collect();
    Ok((
        cert.clone(),
        PreloadBundle {
            pps: ca.pps.clone(),
            lists,
            cert_rca: cert,
        },
    ))
}
