use std::collections::BTreeMap;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adversary, NetsimError, Scenario, TraceEvent, Verdict, World};
use crate::protocol::{MessageKind, Reject};
use crate::rng::{derive_seed, SimRng};

const Z95: f64 = 1.959_963_984_540_054;

/// A proportion with its normal-approximation 95% interval, clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCi {
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
    pub successes: u64,
    pub n: u64,
}

impl RateCi {
    pub fn new(successes: u64, n: u64) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let rate = successes as f64 / n as f64;
        let half = Z95 * (rate * (1.0 - rate) / n as f64).sqrt();
        Some(RateCi {
            rate,
            lo: (rate - half).max(0.0),
            hi: (rate + half).min(1.0),
            successes,
            n,
        })
    }

    pub fn variance(&self) -> f64 {
        self.rate * (1.0 - self.rate) / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub trials: usize,
    pub detection: Option<RateCi>,
    pub false_accept: Option<RateCi>,
    /// Honest control messages refused by the fingerprint check.
    pub false_reject: Option<RateCi>,
    pub honest_crypto_rejections: u64,
    pub adversarial_by_reason: BTreeMap<Reject, u64>,
    /// The RCA's held-out accuracy from offline training.
    pub classifier_accuracy: f64,
    pub classifier_n_test: usize,
    /// `1 − classifier_accuracy`, what the control's false-reject rate
    /// should estimate.
    pub expected_false_reject: f64,
    /// 95% two-sample band on |false_reject − expected_false_reject|.
    pub consistency_band: Option<f64>,
    pub consistent: Option<bool>,
}

fn tally(events: &[TraceEvent]) -> (u64, u64, u64, u64, u64, BTreeMap<Reject, u64>) {
    let (mut adv, mut adv_rej, mut hon, mut fr, mut crypto) = (0, 0, 0, 0, 0);
    let mut reasons = BTreeMap::new();
    for e in events {
        if e.adversarial {
            adv += 1;
            if e.verdict == Verdict::Reject {
                adv_rej += 1;
                *reasons.entry(e.reason.expect("rejects carry a reason")).or_insert(0) += 1;
            }
        } else if matches!(e.kind, MessageKind::M4 | MessageKind::M5) {
            hon += 1;
            if e.reason == Some(Reject::FingerprintMismatch) {
                fr += 1;
            }
            if e.reason.is_some_and(|r| r.is_cryptographic()) {
                crypto += 1;
            }
        }
    }
    (adv, adv_rej, hon, fr, crypto, reasons)
}

/// Plays the honest schedule up to the adversary's activation, then runs
/// `n_trials` independent copies of the world from that point. Each trial
/// injects the configured number of adversarial messages and, as a
/// control, the same number of honest data messages round-robin over the
/// devices holding a session.
pub fn measure_detection(template: &Scenario, n_trials: usize) -> Result<DetectionReport, NetsimError> {
    let cfg = template
        .adversary
        .clone()
        .ok_or_else(|| NetsimError::Scenario("measure_detection needs an adversary".into()))?;
    if n_trials == 0 {
        return Err(NetsimError::Scenario("n_trials must be positive".into()));
    }
    let mut base = World::setup(template)?;
    for item in template.schedule.iter().take_while(|i| i.time < cfg.activation) {
        base.step(item)?;
    }
    let start = base.events.len();
    let per_trial = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(template.seed, &[0x7e, t as u64]);
            let mut w = base.clone();
            w.rng = SimRng::seed_from_u64(derive_seed(trial_seed, &[0]));
            adversary::attack(&mut w, &cfg, cfg.injections, trial_seed)?;
            let live: Vec<String> = w
                .devices
                .iter()
                .filter(|d| d.pid().is_some())
                .map(|d| d.impairment.device_id.clone())
                .collect();
            if !live.is_empty() {
                for j in 0..cfg.injections as usize {
                    let id = &live[j % live.len()];
                    w.send(id, format!("control:{t}:{j}").as_bytes(), cfg.activation)?;
                }
            }
            Ok(w.events.split_off(start))
        })
        .collect::<Result<Vec<_>, NetsimError>>()?;
    let events: Vec<TraceEvent> = per_trial.into_iter().flatten().collect();
    let (adv, adv_rej, hon, fr, crypto, reasons) = tally(&events);

    let report = &base.rca.training_report;
    let accuracy = report.accuracy;
    let false_reject = RateCi::new(fr, hon);
    let band = false_reject.map(|f| Z95 * (f.variance() + accuracy * (1.0 - accuracy) / report.n_test as f64).sqrt());
    let expected = 1.0 - accuracy;
    Ok(DetectionReport {
        trials: n_trials,
        detection: RateCi::new(adv_rej, adv),
        false_accept: RateCi::new(adv - adv_rej, adv),
        false_reject,
        honest_crypto_rejections: crypto,
        adversarial_by_reason: reasons,
        classifier_accuracy: accuracy,
        classifier_n_test: report.n_test,
        expected_false_reject: expected,
        consistency_band: band,
        consistent: false_reject.zip(band).map(|(f, b)| (f.rate - expected).abs() <= b),
    })
}
