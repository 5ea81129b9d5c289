use crossauth::netsim::{
    measure_detection, run, Action, AdversaryConfig, AdversaryKind, Field, ImpersonationMethod, NetsimError, Scenario,
    ScheduleItem, Verdict,
};
use crossauth::protocol::{MessageKind, Reject};

fn small(seed: u64) -> Scenario {
    let mut s = Scenario::honest(3, 20, seed);
    // far apart so honest false rejects are negligible
    for (r, u) in s.roster.iter_mut().zip([-150.0, 0.0, 150.0]) {
        r.cfo_normalized_units = u;
    }
    s.registration_frames = 40;
    s
}

fn with(mut s: Scenario, kind: AdversaryKind, victim: &str, at: u32, n: u32) -> Scenario {
    s.adversary = Some(AdversaryConfig::new(kind, victim, at, n));
    s
}

#[test]
fn honest_run_accepts_everything_and_refreshes_twice() {
    let t = run(&small(1)).unwrap();
    let m = &t.metrics;
    assert_eq!(m.honest_rejections, 0);
    assert_eq!(m.honest_crypto_rejections, 0);
    assert_eq!(m.adversarial_messages, 0);
    assert_eq!(m.detection_rate, None);
    for id in ["dev01", "dev02", "dev03"] {
        assert_eq!(m.refreshes[id], 2, "{id}");
        let sent = t.events.iter().filter(|e| e.actor == id && e.kind != MessageKind::M3).count();
        assert_eq!(sent, 20);
    }
    // one M2 delivery + one M3 + 20 data per device
    assert_eq!(t.events.len(), 3 * 22);
    assert!(t.events.iter().all(|e| e.verdict == Verdict::Accept && e.reason.is_none()));
}

#[test]
fn traces_are_byte_identical() {
    let s = with(small(7), AdversaryKind::Impersonate { method: ImpersonationMethod::StolenPid }, "dev02", 10, 20);
    let mut a = Vec::new();
    let mut b = Vec::new();
    run(&s).unwrap().write_jsonl(&mut a).unwrap();
    run(&s).unwrap().write_jsonl(&mut b).unwrap();
    assert_eq!(a, b);
    let lines = String::from_utf8(a).unwrap();
    assert!(lines.lines().last().unwrap().starts_with("{\"metrics\""));
}

#[test]
fn scenario_round_trips_through_json() {
    let s = with(small(2), AdversaryKind::Sybil { n: 3 }, "dev01", 5, 1);
    let j = serde_json::to_string(&s).unwrap();
    assert_eq!(serde_json::from_str::<Scenario>(&j).unwrap(), s);
}

#[test]
fn bad_scenarios_rejected() {
    let mut s = small(1);
    s.schedule.push(ScheduleItem { time: 100, actor: "ghost".into(), action: Action::Send { count: 1 } });
    assert!(matches!(run(&s), Err(NetsimError::Scenario(_))));
    let mut s = small(1);
    s.schedule.insert(0, ScheduleItem { time: 50, actor: "dev01".into(), action: Action::Handshake });
    assert!(matches!(run(&s), Err(NetsimError::Scenario(_))));
    let s = with(small(1), AdversaryKind::Sybil { n: 1 }, "nobody", 5, 1);
    assert!(matches!(run(&s), Err(NetsimError::Scenario(_))));
    let s = with(small(1), AdversaryKind::Modify { message: MessageKind::M4, field: Field::Signature }, "dev01", 5, 1);
    assert!(matches!(run(&s), Err(NetsimError::Scenario(_))));
}

fn adversarial_reasons(s: &Scenario) -> Vec<Option<Reject>> {
    run(s).unwrap().events.iter().filter(|e| e.adversarial).map(|e| e.reason).collect()
}

#[test]
fn replayed_m3_a_session_later_is_stale() {
    let s = with(small(3), AdversaryKind::Replay { message: MessageKind::M3, via_own_radio: true }, "dev01", 15, 3);
    assert_eq!(adversarial_reasons(&s), vec![Some(Reject::StaleTimestamp); 3]);
}

#[test]
fn replayed_m3_inside_window_is_a_duplicate() {
    let s = with(small(3), AdversaryKind::Replay { message: MessageKind::M3, via_own_radio: true }, "dev01", 3, 1);
    assert_eq!(adversarial_reasons(&s), vec![Some(Reject::Replay)]);
}

#[test]
fn replayed_m2_and_m1_rejected() {
    let s = with(small(3), AdversaryKind::Replay { message: MessageKind::M1, via_own_radio: true }, "dev01", 3, 1);
    assert_eq!(adversarial_reasons(&s), vec![Some(Reject::DuplicateOid)]);
    let s = with(small(3), AdversaryKind::Replay { message: MessageKind::M2, via_own_radio: true }, "dev01", 30, 2);
    assert_eq!(adversarial_reasons(&s), vec![Some(Reject::StaleTimestamp); 2]);
}

#[test]
fn replayed_refresh_uses_dead_pid() {
    let s = with(small(4), AdversaryKind::Replay { message: MessageKind::M5, via_own_radio: false }, "dev02", 40, 2);
    assert_eq!(adversarial_reasons(&s), vec![Some(Reject::UnknownPid); 2]);
}

#[test]
fn modified_handshake_fields_rejected() {
    for (field, want) in [
        // same T2 as the delivered original: the duplicate check fires first
        (Field::Signature, Reject::Replay),
        (Field::Cid, Reject::Replay),
        (Field::Timestamp, Reject::BadSignature),
        (Field::Cert, Reject::CertInvalid),
    ] {
        let s = with(small(5), AdversaryKind::Modify { message: MessageKind::M3, field }, "dev03", 3, 1);
        assert_eq!(adversarial_reasons(&s), vec![Some(want)], "{field:?}");
    }
    let s = with(small(5), AdversaryKind::Modify { message: MessageKind::M4, field: Field::Pid }, "dev03", 10, 1);
    assert_eq!(adversarial_reasons(&s), vec![Some(Reject::UnknownPid)]);
}

#[test]
fn sybil_identities_never_pass_the_handshake() {
    let s = with(small(6), AdversaryKind::Sybil { n: 25 }, "dev01", 10, 1);
    let t = run(&s).unwrap();
    assert_eq!(t.metrics.adversarial_messages, 25);
    assert_eq!(t.metrics.detection_rate, Some(1.0));
    assert_eq!(t.metrics.rejections_by_reason[&Reject::CertInvalid], 25);
}

#[test]
fn forged_certificate_rejected() {
    let s = with(small(6), AdversaryKind::Impersonate { method: ImpersonationMethod::ForgedCert }, "dev01", 10, 4);
    assert_eq!(adversarial_reasons(&s), vec![Some(Reject::CertInvalid); 4]);
}

#[test]
fn distant_impersonator_is_caught_by_fingerprint() {
    let mut s = with(small(8), AdversaryKind::Impersonate { method: ImpersonationMethod::StolenPid }, "dev02", 10, 50);
    s.adversary.as_mut().unwrap().attacker_offset_units = 150.0;
    let t = run(&s).unwrap();
    assert_eq!(t.metrics.rejections_by_reason.get(&Reject::FingerprintMismatch), Some(&50));
}

#[test]
fn cloned_radio_defeats_fingerprint_but_not_timestamps() {
    let kind = AdversaryKind::Impersonate { method: ImpersonationMethod::StolenPid };
    let mut s = with(small(9), kind, "dev02", 10, 2);
    s.adversary.as_mut().unwrap().attacker_offset_units = 0.0;
    let r = measure_detection(&s, 20).unwrap();
    assert!(r.detection.unwrap().rate < 0.1, "{r:?}");
    // the same identical radio replaying an old handshake is still refused
    let mut s = with(small(9), AdversaryKind::Replay { message: MessageKind::M3, via_own_radio: true }, "dev02", 10, 1);
    s.adversary.as_mut().unwrap().attacker_offset_units = 0.0;
    let r = measure_detection(&s, 5).unwrap();
    assert_eq!(r.detection.unwrap().rate, 1.0);
}

#[test]
fn measurement_is_deterministic_and_controls_clean() {
    let kind = AdversaryKind::Impersonate { method: ImpersonationMethod::StolenPid };
    let s = with(small(10), kind, "dev01", 10, 30);
    let a = measure_detection(&s, 4).unwrap();
    assert_eq!(a, measure_detection(&s, 4).unwrap());
    assert_eq!(a.detection.unwrap().n, 120);
    assert_eq!(a.false_reject.unwrap().n, 120);
    assert_eq!(a.honest_crypto_rejections, 0);
    let d = a.detection.unwrap();
    assert!(d.lo <= d.rate && d.rate <= d.hi && (0.0..=1.0).contains(&d.lo) && d.hi <= 1.0);
    assert!(measure_detection(&small(1), 3).is_err());
}

#[test]
fn default_impersonation_detected_and_control_consistent() {
    let s = Scenario::default_impersonation(1, 100);
    let r = measure_detection(&s, 10).unwrap();
    let d = r.detection.unwrap();
    assert_eq!(d.n, 1000);
    assert!(d.rate >= 0.90, "{r:?}");
    assert_eq!(r.adversarial_by_reason.keys().collect::<Vec<_>>(), vec![&Reject::FingerprintMismatch]);
    assert_eq!(r.consistent, Some(true), "{r:?}");
    assert_eq!(r.honest_crypto_rejections, 0);
}
