use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crossauth::classifier::{evaluate, split, train_and_evaluate, Algo, ClassifierError, LogRegParams, TrainedModel};
use crossauth::fingerprint::{
    default_roster, gen_dataset, read_roster, Dataset, FingerprintError, RosterDefaults, Scenario as FpScenario,
};
use crossauth::netsim::{measure_detection, run, NetsimError, Scenario, Verdict};
use crossauth::overhead::{bench_primitives, comparison_table, write_csv, write_json, CostModel, OverheadError, Scheme};
use crossauth::phy::PhyConfig;

use crate::config::RunConfig;
use crate::CliError;

/// The command's primary output: a file (guarded against clobbering) or
/// stdout.
pub struct Output {
    path: Option<PathBuf>,
    force: bool,
}

fn guard(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Input(format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8], force: bool) -> Result<(), CliError> {
    guard(path, force)?;
    fs::write(path, bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

impl Output {
    pub fn new(path: Option<PathBuf>, force: bool) -> Self {
        Output { path, force }
    }

    fn is_file(&self) -> bool {
        self.path.is_some()
    }

    /// Fails early, before any expensive work, if the file would be clobbered.
    fn check(&self) -> Result<(), CliError> {
        match &self.path {
            Some(p) => guard(p, self.force),
            None => Ok(()),
        }
    }

    fn write(&self, bytes: &[u8]) -> Result<(), CliError> {
        match &self.path {
            Some(p) => write_file(p, bytes, self.force),
            None => std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::Input(format!("stdout: {e}"))),
        }
    }

    /// Human-readable notes go to stdout only when the data went to a file.
    fn note(&self, text: &str) {
        if self.is_file() {
            print!("{text}");
        } else {
            eprint!("{text}");
        }
    }
}

fn fp_err(e: FingerprintError) -> CliError {
    match e {
        FingerprintError::Io(_) | FingerprintError::Csv(_) | FingerprintError::Json(_) => CliError::Input(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn cls_err(e: ClassifierError) -> CliError {
    match e {
        ClassifierError::Io(_) | ClassifierError::Json(_) | ClassifierError::Input(_) => CliError::Input(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn net_err(e: NetsimError) -> CliError {
    match e {
        NetsimError::Io(_) => CliError::Input(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn oh_err(e: OverheadError) -> CliError {
    match e {
        OverheadError::Io(_) => CliError::Input(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn read(path: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Input(format!("{path}: {e}")))
}

fn required<'a>(v: &'a Option<String>, key: &str) -> Result<&'a str, CliError> {
    v.as_deref()
        .ok_or_else(|| CliError::Config(format!("--{} is required", key.replace('_', "-"))))
}

fn phy(cfg: &RunConfig) -> PhyConfig {
    let mut p = PhyConfig::default();
    p.channel.snr_db = cfg.snr_db;
    p.channel.n_paths = cfg.n_paths;
    p
}

fn algo(cfg: &RunConfig) -> Result<Algo, CliError> {
    match cfg.algo.as_str() {
        "knn" => Ok(Algo::Knn { k: cfg.k }),
        "lr" | "logistic_regression" => Ok(Algo::LogisticRegression(LogRegParams::default())),
        other => Err(CliError::Config(format!("unknown algo {other:?} (knn, lr)"))),
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path = required(&cfg.dataset, "dataset")?;
    Dataset::read_csv(read(path)?.as_slice()).map_err(|e| CliError::Input(format!("{path}: {e}")))
}

fn json_pretty<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

pub fn dataset(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    out.check()?;
    let scenario = FpScenario::parse(&cfg.scenario)
        .ok_or_else(|| CliError::Config(format!("unknown scenario {:?} (fixed-skew, fixed-cfo)", cfg.scenario)))?;
    let phy = phy(cfg);
    let roster = match &cfg.roster {
        Some(p) => read_roster(read(p)?.as_slice(), &phy.ofdm).map_err(fp_err)?,
        None => default_roster(cfg.devices, scenario, &phy.ofdm, &RosterDefaults::default()),
    };
    let ds = gen_dataset(&roster, scenario, cfg.frames, &phy, cfg.seed).map_err(fp_err)?;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).map_err(fp_err)?;
    out.write(&buf)?;
    eprintln!(
        "crossauth: {} rows, {} devices, scenario {}",
        ds.rows.len(),
        ds.meta.devices.len(),
        scenario.as_str()
    );
    Ok(())
}

fn summary(r: &crossauth::classifier::EvalReport) -> String {
    format!(
        "accuracy {:.4}  recall {:.4}  precision {:.4}  f1 {:.4}  (n_test {})\n",
        r.accuracy, r.recall_mean, r.precision_mean, r.f1_mean, r.n_test
    )
}

fn write_confusion(
    report: &crossauth::classifier::EvalReport,
    path: Option<&Path>,
    force: bool,
) -> Result<(), CliError> {
    if let Some(p) = path {
        let mut buf = Vec::new();
        report.write_confusion_csv(&mut buf).map_err(cls_err)?;
        write_file(p, &buf, force)?;
    }
    Ok(())
}

pub fn train(
    cfg: &RunConfig,
    out: &Output,
    report_path: Option<&Path>,
    confusion: Option<&Path>,
    force: bool,
) -> Result<(), CliError> {
    out.check()?;
    if let Some(p) = report_path {
        guard(p, force)?;
    }
    let ds = load_dataset(cfg)?;
    let algo = algo(cfg)?;
    let (model, report) = train_and_evaluate(&ds, &algo, cfg.train_fraction, cfg.seed).map_err(cls_err)?;
    out.write(&model.to_json().map_err(cls_err)?)?;
    match report_path {
        Some(p) => write_file(p, &report.to_json().map_err(cls_err)?, force)?,
        None => eprint!("{}", String::from_utf8_lossy(&report.to_json().map_err(cls_err)?)),
    }
    write_confusion(&report, confusion, force)?;
    out.note(&summary(&report));
    Ok(())
}

pub fn eval(cfg: &RunConfig, out: &Output, all: bool, confusion: Option<&Path>, force: bool) -> Result<(), CliError> {
    out.check()?;
    let path = required(&cfg.model, "model")?;
    let model = TrainedModel::from_json(&read(path)?).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    let ds = load_dataset(cfg)?;
    let rows = if all {
        ds.rows.iter().map(|r| r.features()).collect()
    } else {
        // the split the model was trained against
        split(&ds, cfg.train_fraction, model.seed).map_err(cls_err)?.1
    };
    let mut report = evaluate(&model, &rows).map_err(cls_err)?;
    report.split_seed = (!all).then_some(model.seed);
    out.write(&report.to_json().map_err(cls_err)?)?;
    write_confusion(&report, confusion, force)?;
    out.note(&summary(&report));
    Ok(())
}

fn load_scenario(path: &str) -> Result<Scenario, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Config(format!("{path}: {e}")))
}

pub fn demo(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    out.check()?;
    let scenario = match &cfg.scenario_file {
        Some(p) => load_scenario(p)?,
        None => {
            let mut s = Scenario::honest(cfg.devices, cfg.messages, cfg.seed);
            s.phy = phy(cfg);
            s
        }
    };
    let trace = run(&scenario).map_err(net_err)?;
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf).map_err(net_err)?;
    out.write(&buf)?;
    let mut text = String::new();
    for e in trace.events.iter().filter(|e| e.verdict == Verdict::Reject) {
        text += &format!(
            "t={} {} -> {} {:?} rejected: {}{}\n",
            e.time,
            e.actor,
            e.receiver,
            e.kind,
            e.reason.map(|r| r.to_string()).unwrap_or_default(),
            if e.adversarial { " (adversarial)" } else { "" }
        );
    }
    let m = &trace.metrics;
    text += &format!(
        "{} honest messages, {} rejected ({} cryptographic); {} adversarial, {} rejected; refreshes {:?}\n",
        m.honest_messages,
        m.honest_rejections,
        m.honest_crypto_rejections,
        m.adversarial_messages,
        m.adversarial_rejections,
        m.refreshes
    );
    out.note(&text);
    Ok(())
}

pub fn attack(cfg: &RunConfig, out: &Output, check: bool) -> Result<(), CliError> {
    out.check()?;
    let scenario = match &cfg.scenario_file {
        Some(p) => load_scenario(p)?,
        None => {
            let mut s = Scenario::default_impersonation(cfg.seed, cfg.injections);
            s.phy = phy(cfg);
            s
        }
    };
    let r = measure_detection(&scenario, cfg.trials).map_err(net_err)?;
    out.write(&json_pretty(&r))?;
    let fmt = |c: Option<crossauth::netsim::RateCi>| match c {
        Some(c) => format!("{:.4} [{:.4}, {:.4}] (n {})", c.rate, c.lo, c.hi, c.n),
        None => "n/a".into(),
    };
    out.note(&format!(
        "detection {}\nfalse reject {} vs 1 - accuracy {:.4}; consistent: {:?}\n",
        fmt(r.detection),
        fmt(r.false_reject),
        r.expected_false_reject,
        r.consistent
    ));
    if check && r.consistent != Some(true) {
        return Err(CliError::Assertion(
            "honest false-reject rate disagrees with the classifier's error".into(),
        ));
    }
    Ok(())
}

pub fn overhead(cfg: &RunConfig, out: &Output, format: &str, check: bool) -> Result<(), CliError> {
    out.check()?;
    if cfg.n_max == 0 {
        return Err(CliError::Config("n_max must be at least 1".into()));
    }
    let model = CostModel::default();
    let ns: Vec<u64> = (1..=cfg.n_max).collect();
    let rows = comparison_table(&ns, cfg.d, &model).map_err(oh_err)?;
    let mut buf = Vec::new();
    match format {
        "csv" => write_csv(&rows, &mut buf).map_err(oh_err)?,
        "json" => write_json(&rows, &mut buf).map_err(oh_err)?,
        other => return Err(CliError::Config(format!("unknown format {other:?} (csv, json)"))),
    }
    out.write(&buf)?;
    if check {
        for n in &ns {
            let ours = rows.iter().find(|r| r.scheme == Scheme::Ours && r.n == *n).expect("row");
            if let Some(r) = rows.iter().find(|r| r.n == *n && r.scheme != Scheme::Ours && r.time_ms < ours.time_ms) {
                return Err(CliError::Assertion(format!("{} is cheaper than Ours at n = {n}", r.scheme)));
            }
        }
    }
    Ok(())
}

pub fn bench(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    out.check()?;
    let r = bench_primitives(cfg.iterations).map_err(oh_err)?;
    out.write(&json_pretty(&r))?;
    Ok(())
}
