use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_features, ExtractorConfig, FeatureVector, FingerprintError};
use crate::phy::{
    apply_channel, apply_impairments, cfo_to_normalized_units, generate_frame,
    normalized_units_to_cfo, DeviceImpairment, OfdmConfig, PhyConfig,
};
use crate::rng::{derive_seed, SimRng};
use rand::SeedableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Every device has a 3° skew; devices differ in CFO.
    FixedSkew3Deg,
    /// Every device has a CFO of 50 normalized units; devices differ in skew.
    FixedCfo50Units,
}

impl Scenario {
    pub const FIXED_SKEW_DEG: f64 = 3.0;
    pub const FIXED_CFO_UNITS: f64 = 50.0;

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::FixedSkew3Deg => "FixedSkew3Deg",
            Scenario::FixedCfo50Units => "FixedCfo50Units",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "FixedSkew3Deg" | "fixed-skew" | "1" => Some(Scenario::FixedSkew3Deg),
            "FixedCfo50Units" | "fixed-cfo" | "2" => Some(Scenario::FixedCfo50Units),
            _ => None,
        }
    }

    /// Pins the scenario's fixed dimension on every device.
    fn force(&self, imp: &DeviceImpairment, ofdm: &OfdmConfig) -> DeviceImpairment {
        let mut out = imp.clone();
        match self {
            Scenario::FixedSkew3Deg => out.skew_deg = Self::FIXED_SKEW_DEG,
            Scenario::FixedCfo50Units => {
                out.cfo_per_sample = normalized_units_to_cfo(Self::FIXED_CFO_UNITS, ofdm.n_subcarriers)
            }
        }
        out
    }

    fn free_value(&self, imp: &DeviceImpairment) -> f64 {
        match self {
            Scenario::FixedSkew3Deg => imp.cfo_per_sample,
            Scenario::FixedCfo50Units => imp.skew_deg,
        }
    }
}

/// Roster file entry; CFO in thousandths of a subcarrier spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub device_id: String,
    pub cfo_normalized_units: f64,
    pub skew_deg: f64,
}

impl RosterEntry {
    pub fn to_impairment(&self, ofdm: &OfdmConfig) -> DeviceImpairment {
        DeviceImpairment {
            device_id: self.device_id.clone(),
            cfo_per_sample: normalized_units_to_cfo(self.cfo_normalized_units, ofdm.n_subcarriers),
            skew_deg: self.skew_deg,
        }
    }

    pub fn from_impairment(imp: &DeviceImpairment, ofdm: &OfdmConfig) -> Self {
        RosterEntry {
            device_id: imp.device_id.clone(),
            cfo_normalized_units: cfo_to_normalized_units(imp.cfo_per_sample, ofdm.n_subcarriers),
            skew_deg: imp.skew_deg,
        }
    }
}

pub fn read_roster<R: Read>(r: R, ofdm: &OfdmConfig) -> Result<Vec<DeviceImpairment>, FingerprintError> {
    let entries: Vec<RosterEntry> = serde_json::from_reader(r)?;
    Ok(entries.iter().map(|e| e.to_impairment(ofdm)).collect())
}

pub fn write_roster<W: Write>(
    w: W,
    roster: &[DeviceImpairment],
    ofdm: &OfdmConfig,
) -> Result<(), FingerprintError> {
    let entries: Vec<RosterEntry> = roster.iter().map(|i| RosterEntry::from_impairment(i, ofdm)).collect();
    serde_json::to_writer_pretty(w, &entries)?;
    Ok(())
}

/// Spacing of generated rosters along the varying dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosterDefaults {
    pub cfo_spacing_units: f64,
    pub skew_spacing_deg: f64,
}

impl Default for RosterDefaults {
    /// The estimator's CFO spread at 5 dB over the 10-path channel measures
    /// 5.05 units (one standard deviation, 2000 frames); 17.5 units is about
    /// 3.5 of them.
    fn default() -> Self {
        RosterDefaults {
            cfo_spacing_units: 17.5,
            skew_spacing_deg: 1.0,
        }
    }
}

/// Evenly spaced roster centred on zero along the scenario's free dimension.
pub fn default_roster(
    n_devices: usize,
    scenario: Scenario,
    ofdm: &OfdmConfig,
    spacing: &RosterDefaults,
) -> Vec<DeviceImpairment> {
    let mid = (n_devices as f64 - 1.0) / 2.0;
    (0..n_devices)
        .map(|i| {
            let offset = i as f64 - mid;
            let entry = match scenario {
                Scenario::FixedSkew3Deg => RosterEntry {
                    device_id: format!("dev{:02}", i + 1),
                    cfo_normalized_units: offset * spacing.cfo_spacing_units,
                    skew_deg: Scenario::FIXED_SKEW_DEG,
                },
                Scenario::FixedCfo50Units => RosterEntry {
                    device_id: format!("dev{:02}", i + 1),
                    cfo_normalized_units: Scenario::FIXED_CFO_UNITS,
                    skew_deg: offset * spacing.skew_spacing_deg,
                },
            };
            entry.to_impairment(ofdm)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub device_id: String,
    pub cfo_hz: f64,
    pub skew_deg: f64,
    pub scenario: Scenario,
    pub frame_idx: usize,
    pub seed: u64,
}

impl LabeledRow {
    pub fn features(&self) -> FeatureVector {
        FeatureVector {
            cfo_hz: self.cfo_hz,
            skew_deg: self.skew_deg,
            device_id: Some(self.device_id.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    /// Device ids in canonical order.
    pub devices: Vec<String>,
    pub frames_per_device: usize,
    /// Ground truth, when known (not recoverable from the CSV alone).
    pub roster: Option<Vec<DeviceImpairment>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<LabeledRow>,
    pub scenario: Scenario,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Assembles and checks a dataset; rows must be per-device balanced.
    pub fn new(rows: Vec<LabeledRow>, scenario: Scenario, seed: u64) -> Result<Self, FingerprintError> {
        if rows.is_empty() {
            return Err(FingerprintError::Dataset("no rows".into()));
        }
        let mut devices = Vec::new();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &rows {
            if r.scenario != scenario {
                return Err(FingerprintError::Dataset("mixed scenarios".into()));
            }
            if !(r.cfo_hz.is_finite() && r.skew_deg.is_finite()) {
                return Err(FingerprintError::Dataset(format!("non-finite features for {}", r.device_id)));
            }
            let c = counts.entry(&r.device_id).or_insert(0);
            if *c == 0 {
                devices.push(r.device_id.clone());
            }
            *c += 1;
        }
        let per = counts[devices[0].as_str()];
        if counts.values().any(|&c| c != per) {
            return Err(FingerprintError::Dataset("unequal rows per device".into()));
        }
        Ok(Dataset {
            rows,
            scenario,
            meta: DatasetMeta {
                seed,
                devices,
                frames_per_device: per,
                roster: None,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FingerprintError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["device_id", "cfo_hz", "skew_deg", "scenario", "frame_idx", "seed"])?;
        for r in &self.rows {
            out.write_record([
                r.device_id.clone(),
                format!("{:?}", r.cfo_hz),
                format!("{:?}", r.skew_deg),
                r.scenario.as_str().to_string(),
                r.frame_idx.to_string(),
                r.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, FingerprintError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let expected = ["device_id", "cfo_hz", "skew_deg", "scenario", "frame_idx", "seed"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(FingerprintError::Dataset(format!("unexpected header {headers:?}")));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |what: &str| FingerprintError::Dataset(format!("bad {what} in {rec:?}"));
            rows.push(LabeledRow {
                device_id: field(0).to_string(),
                cfo_hz: field(1).parse().map_err(|_| bad("cfo_hz"))?,
                skew_deg: field(2).parse().map_err(|_| bad("skew_deg"))?,
                scenario: Scenario::parse(field(3)).ok_or_else(|| bad("scenario"))?,
                frame_idx: field(4).parse().map_err(|_| bad("frame_idx"))?,
                seed: field(5).parse().map_err(|_| bad("seed"))?,
            });
        }
        let scenario = rows
            .first()
            .map(|r| r.scenario)
            .ok_or_else(|| FingerprintError::Dataset("no rows".into()))?;
        let seed = rows[0].seed;
        if rows.iter().any(|r| r.seed != seed) {
            return Err(FingerprintError::Dataset("rows carry different seeds".into()));
        }
        Dataset::new(rows, scenario, seed)
    }
}

fn check_roster(roster: &[DeviceImpairment], scenario: Scenario, ofdm: &OfdmConfig) -> Result<(), FingerprintError> {
    if roster.is_empty() {
        return Err(FingerprintError::Roster("empty roster".into()));
    }
    let mut ids = std::collections::BTreeSet::new();
    for imp in roster {
        if !ids.insert(imp.device_id.as_str()) {
            return Err(FingerprintError::Roster(format!("duplicate device id {}", imp.device_id)));
        }
        imp.validate(ofdm)?;
    }
    let mut free: Vec<(f64, &str)> = roster
        .iter()
        .map(|i| (scenario.free_value(i), i.device_id.as_str()))
        .collect();
    free.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = free.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(FingerprintError::Roster(format!(
            "{} and {} share the same {} in scenario {}",
            w[0].1,
            w[1].1,
            match scenario {
                Scenario::FixedSkew3Deg => "CFO",
                Scenario::FixedCfo50Units => "skew",
            },
            scenario.as_str()
        )));
    }
    Ok(())
}

pub fn gen_dataset(
    roster: &[DeviceImpairment],
    scenario: Scenario,
    frames_per_device: usize,
    phy: &PhyConfig,
    seed: u64,
) -> Result<Dataset, FingerprintError> {
    gen_dataset_with(roster, scenario, frames_per_device, phy, &ExtractorConfig::for_ofdm(&phy.ofdm), seed)
}

/// Frame `f` of device `d` draws bits, taps and noise from the stream
/// derived from `(seed, d, f)`, so output is independent of thread count.
pub fn gen_dataset_with(
    roster: &[DeviceImpairment],
    scenario: Scenario,
    frames_per_device: usize,
    phy: &PhyConfig,
    extractor: &ExtractorConfig,
    seed: u64,
) -> Result<Dataset, FingerprintError> {
    phy.validate()?;
    extractor.validate()?;
    if frames_per_device == 0 {
        return Err(FingerprintError::Dataset("frames_per_device must be positive".into()));
    }
    let forced: Vec<DeviceImpairment> = roster.iter().map(|i| scenario.force(i, &phy.ofdm)).collect();
    check_roster(&forced, scenario, &phy.ofdm)?;

    let per_device: Vec<Result<Vec<LabeledRow>, FingerprintError>> = forced
        .par_iter()
        .enumerate()
        .map(|(d, imp)| {
            (0..frames_per_device)
                .map(|f| {
                    let mut rng = SimRng::seed_from_u64(derive_seed(seed, &[d as u64, f as u64]));
                    let frame = generate_frame(None, &phy.ofdm, &mut rng)?;
                    let frame = apply_impairments(frame, imp)?;
                    let frame = apply_channel(frame, &phy.channel, &mut rng)?;
                    let fv = extract_features(&frame, extractor)?;
                    Ok(LabeledRow {
                        device_id: imp.device_id.clone(),
                        cfo_hz: fv.cfo_hz,
                        skew_deg: fv.skew_deg,
                        scenario,
                        frame_idx: f,
                        seed,
                    })
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(forced.len() * frames_per_device);
    for r in per_device {
        rows.extend(r?);
    }
    let mut ds = Dataset::new(rows, scenario, seed)?;
    ds.meta.roster = Some(forced);
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_phy() -> PhyConfig {
        PhyConfig::default()
    }

    #[test]
    fn counts_and_forced_dimension() {
        let phy = small_phy();
        let roster = default_roster(4, Scenario::FixedSkew3Deg, &phy.ofdm, &RosterDefaults::default());
        let ds = gen_dataset(&roster, Scenario::FixedSkew3Deg, 15, &phy, 3).unwrap();
        assert_eq!(ds.len(), 60);
        assert_eq!(ds.meta.frames_per_device, 15);
        let truth = ds.meta.roster.as_ref().unwrap();
        assert!(truth.iter().all(|i| i.skew_deg == 3.0));
        let mut cfos: Vec<f64> = truth.iter().map(|i| i.cfo_per_sample).collect();
        cfos.dedup();
        assert_eq!(cfos.len(), 4);
        assert!(ds.rows.windows(2).all(|w| {
            (w[0].device_id.as_str(), w[0].frame_idx) < (w[1].device_id.as_str(), w[1].frame_idx)
        }));
    }

    #[test]
    fn fixed_cfo_scenario_pins_cfo() {
        let phy = small_phy();
        let roster = default_roster(3, Scenario::FixedCfo50Units, &phy.ofdm, &RosterDefaults::default());
        let ds = gen_dataset(&roster, Scenario::FixedCfo50Units, 2, &phy, 1).unwrap();
        let want = normalized_units_to_cfo(50.0, 256);
        assert!(ds.meta.roster.unwrap().iter().all(|i| i.cfo_per_sample == want));
    }

    #[test]
    fn duplicate_free_dimension_rejected() {
        let phy = small_phy();
        let mut roster = default_roster(3, Scenario::FixedSkew3Deg, &phy.ofdm, &RosterDefaults::default());
        roster[2].cfo_per_sample = roster[0].cfo_per_sample;
        assert!(matches!(
            gen_dataset(&roster, Scenario::FixedSkew3Deg, 2, &phy, 1),
            Err(FingerprintError::Roster(_))
        ));
        // the same roster is fine when CFO is not the free dimension but skews collide
        let roster = default_roster(3, Scenario::FixedSkew3Deg, &phy.ofdm, &RosterDefaults::default());
        assert!(matches!(
            gen_dataset(&roster, Scenario::FixedCfo50Units, 2, &phy, 1),
            Err(FingerprintError::Roster(_))
        ));
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let phy = small_phy();
        let roster = default_roster(3, Scenario::FixedSkew3Deg, &phy.ofdm, &RosterDefaults::default());
        let a = gen_dataset(&roster, Scenario::FixedSkew3Deg, 5, &phy, 42).unwrap();
        let b = gen_dataset(&roster, Scenario::FixedSkew3Deg, 5, &phy, 42).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ba).unwrap();
        b.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert!(std::str::from_utf8(&ba)
            .unwrap()
            .starts_with("device_id,cfo_hz,skew_deg,scenario,frame_idx,seed\n"));
        let back = Dataset::read_csv(ba.as_slice()).unwrap();
        assert_eq!(back.rows, a.rows);
        assert_eq!(back.meta.devices, a.meta.devices);
    }

    #[test]
    fn roster_json_round_trip() {
        let ofdm = OfdmConfig::default();
        let roster = default_roster(5, Scenario::FixedSkew3Deg, &ofdm, &RosterDefaults::default());
        let mut buf = Vec::new();
        write_roster(&mut buf, &roster, &ofdm).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("cfo_normalized_units"));
        let back = read_roster(buf.as_slice(), &ofdm).unwrap();
        for (a, b) in roster.iter().zip(&back) {
            assert_eq!(a.device_id, b.device_id);
            assert!((a.cfo_per_sample - b.cfo_per_sample).abs() < 1e-15);
        }
    }
}
