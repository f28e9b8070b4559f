//! Monte Carlo BER engine.
//!
//! Every OFDM block of an SNR point draws from its own ChaCha streams, keyed
//! by `(master_seed, snr_db)` and the block number, with separate streams
//! for symbol bits, index bits, fading and noise. Blocks run in fixed-size
//! batches across the worker pool and the stop rule is checked between
//! batches, so records do not depend on the worker count. Sharing the
//! streams also pairs IM-NOMA-RC and PD-NOMA runs on the same seed: both see
//! identical symbols, fades and noise.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel_into, draw_channel, DEFAULT_SUBCARRIERS};
use crate::constellation::{Constellation, Family};
use crate::detectors::{detect_ml, nearest, owns_index_bits, DetectorKind, SicDetector};
use crate::error::{Error, Result};
use crate::superposition::{IndexUserMode, NomaSystem, SuperAlphabet, SystemConfig};

/// Blocks simulated between two stop-rule checks.
pub const BATCH_BLOCKS: u64 = 32;

pub const RESULTS_FILE: &str = "results.csv";
pub const CSV_HEADER: [&str; 7] = [
    "scheme",
    "detector",
    "user",
    "snr_db",
    "bits_sent",
    "bit_errors",
    "ber",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Imnomarc,
    Pdnoma,
    Ofdm,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Imnomarc => "imnomarc",
            Scheme::Pdnoma => "pdnoma",
            Scheme::Ofdm => "ofdm",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "imnomarc" => Ok(Scheme::Imnomarc),
            "pdnoma" => Ok(Scheme::Pdnoma),
            "ofdm" => Ok(Scheme::Ofdm),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    pub mod_order: usize,
    pub family: Family,
}

impl Modulation {
    /// 8QAM, matching the 3 bits per subcarrier of two-user BPSK IM-NOMA-RC.
    pub fn ofdm_default() -> Self {
        Self {
            mod_order: 8,
            family: Family::Qam,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    pub max_bits: u64,
    pub min_bit_errors: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_bits: 10_000_000,
            min_bit_errors: 200,
        }
    }
}

/// One BER curve family: a scheme, its configuration and detector, an SNR
/// grid and a stop rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scheme: Scheme,
    pub system: SystemConfig,
    pub ofdm: Modulation,
    pub detector: DetectorKind,
    pub snr_grid_db: Vec<f64>,
    pub stop: StopRule,
    pub master_seed: u64,
    pub subcarriers: usize,
    /// Worker threads; 0 uses every available core. Results do not depend
    /// on it.
    #[serde(default)]
    pub workers: usize,
    /// Diagnostic switch that removes the AWGN.
    #[serde(default)]
    pub noiseless: bool,
}

impl ExperimentSpec {
    /// Two-user BPSK IM-NOMA-RC with ML detection.
    pub fn two_user_default() -> Self {
        Self {
            scheme: Scheme::Imnomarc,
            system: SystemConfig::two_user_bpsk(),
            ofdm: Modulation::ofdm_default(),
            detector: DetectorKind::Ml,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            stop: StopRule::default(),
            master_seed: 1,
            subcarriers: DEFAULT_SUBCARRIERS,
            workers: 0,
            noiseless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR grid must be finite".into());
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return bad("SNR grid must be strictly increasing".into());
        }
        if self.stop.min_bit_errors == 0 {
            return bad("min_bit_errors must be positive".into());
        }
        if self.stop.max_bits < 10 * self.stop.min_bit_errors {
            return bad(format!(
                "max_bits ({}) must be at least 10 x min_bit_errors ({})",
                self.stop.max_bits, self.stop.min_bit_errors
            ));
        }
        if self.subcarriers == 0 || !self.subcarriers.is_power_of_two() {
            return bad(format!(
                "subcarrier count {} is not a power of two",
                self.subcarriers
            ));
        }
        self.system.validate()?;
        Constellation::build(self.ofdm.mod_order, self.ofdm.family)?;
        Ok(())
    }

    /// The configuration actually transmitted: PD-NOMA is IM-NOMA-RC with
    /// the index bits removed.
    pub fn effective_system(&self) -> SystemConfig {
        match self.scheme {
            Scheme::Pdnoma => self.system.clone().with_im_disabled(),
            _ => self.system.clone(),
        }
    }

    pub fn tracked_channels(&self) -> Vec<ChannelId> {
        match self.scheme {
            Scheme::Ofdm => vec![ChannelId::User(1)],
            _ => {
                let cfg = self.effective_system();
                let mut out: Vec<_> = (1..=cfg.n_users).map(ChannelId::User).collect();
                if cfg.index_bits() > 0 {
                    out.push(ChannelId::Index);
                }
                out
            }
        }
    }
}

/// A tracked bit stream: a user's own bits, or the index bits on their own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelId {
    User(usize),
    Index,
}

impl std::fmt::Display for ChannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelId::User(n) => write!(f, "{n}"),
            ChannelId::Index => f.write_str("index"),
        }
    }
}

impl std::str::FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "index" {
            return Ok(ChannelId::Index);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(ChannelId::User)
            .ok_or_else(|| Error::Config(format!("invalid user column '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub detector: DetectorKind,
    pub user: ChannelId,
    pub snr_db: f64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Seconds spent on the whole SNR point.
    pub wall_time: f64,
}

impl BerRecord {
    /// `sqrt((1 - p) / (n p))`; infinite when no errors were seen.
    pub fn relative_std_error(&self) -> f64 {
        if self.bit_errors == 0 {
            return f64::INFINITY;
        }
        ((1.0 - self.ber) / (self.bits_sent as f64 * self.ber)).sqrt()
    }

    pub fn std_error(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.bits_sent as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Tally {
    bits: u64,
    errors: u64,
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, rhs: Self) {
        self.bits += rhs.bits;
        self.errors += rhs.errors;
    }
}

enum Link {
    Noma {
        system: NomaSystem,
        alphabet: Option<SuperAlphabet>,
        sic: Box<SicDetector>,
    },
    Ofdm {
        constellation: Constellation,
        points: Vec<Complex64>,
    },
}

/// Where a tracked channel's bits are decoded and what they contain.
#[derive(Clone, Copy, Debug)]
struct Tap {
    receiver: usize,
    symbol_of: Option<usize>,
    index: bool,
    bits: u64,
}

struct Engine {
    spec: ExperimentSpec,
    link: Link,
    receivers: usize,
    taps: Vec<Tap>,
}

const STREAM_SYMBOLS: u64 = 0;
const STREAM_INDEX: u64 = 1;
const STREAM_FADING: u64 = 2;
const STREAM_NOISE: u64 = 3;

fn block_rng(master_seed: u64, snr_db: f64, block: u64, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&snr_db.to_bits().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(block * 4 + stream);
    rng
}

impl Engine {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let (link, receivers, taps) = match spec.scheme {
            Scheme::Ofdm => {
                let constellation = Constellation::build(spec.ofdm.mod_order, spec.ofdm.family)?;
                let amp = spec.system.total_power.sqrt();
                let points = constellation.points().iter().map(|p| p * amp).collect();
                let taps = vec![Tap {
                    receiver: 1,
                    symbol_of: Some(1),
                    index: false,
                    bits: constellation.bits_per_symbol() as u64,
                }];
                (
                    Link::Ofdm {
                        constellation,
                        points,
                    },
                    1,
                    taps,
                )
            }
            Scheme::Imnomarc | Scheme::Pdnoma => {
                let cfg = spec.effective_system();
                let system = NomaSystem::new(cfg.clone())?;
                let alphabet = match spec.detector {
                    DetectorKind::Ml => Some(system.build_super_alphabet()?),
                    DetectorKind::Sic => None,
                };
                let sic = Box::new(SicDetector::new(&system));
                let n = cfg.n_users;
                let p2 = cfg.index_bits() as u64;
                let virtual_user = cfg.index_user_mode == IndexUserMode::VirtualUser && p2 > 0;
                let receivers = n + usize::from(virtual_user);
                let mut taps: Vec<Tap> = (1..=n)
                    .map(|u| {
                        let index = owns_index_bits(&cfg, u);
                        Tap {
                            receiver: u,
                            symbol_of: Some(u),
                            index,
                            bits: cfg.bits_per_symbol() as u64 + if index { p2 } else { 0 },
                        }
                    })
                    .collect();
                if p2 > 0 {
                    taps.push(Tap {
                        receiver: receivers,
                        symbol_of: None,
                        index: true,
                        bits: p2,
                    });
                }
                (
                    Link::Noma {
                        system,
                        alphabet,
                        sic,
                    },
                    receivers,
                    taps,
                )
            }
        };
        Ok(Self {
            spec: spec.clone(),
            link,
            receivers,
            taps,
        })
    }

    fn simulate_block(&self, snr_db: f64, block: u64) -> Result<Vec<Tally>> {
        let spec = &self.spec;
        let l = spec.subcarriers;
        let seed = spec.master_seed;
        let mut sym_rng = block_rng(seed, snr_db, block, STREAM_SYMBOLS);
        let mut idx_rng = block_rng(seed, snr_db, block, STREAM_INDEX);
        let mut fade_rng = block_rng(seed, snr_db, block, STREAM_FADING);
        let mut noise_rng = block_rng(seed, snr_db, block, STREAM_NOISE);

        let mut ch = draw_channel(self.receivers, l, snr_db, spec.system.total_power, &mut fade_rng)?;
        if spec.noiseless {
            ch = ch.without_noise();
        }
        let mut tallies = vec![Tally::default(); self.taps.len()];
        let mut y = vec![Complex64::default(); l];

        match &self.link {
            Link::Ofdm {
                constellation,
                points,
            } => {
                let m = constellation.order();
                let sent: Vec<usize> = (0..l).map(|_| sym_rng.random_range(0..m)).collect();
                let x: Vec<Complex64> = sent
                    .iter()
                    .map(|&label| points[constellation.index_for_label(label)])
                    .collect();
                apply_channel_into(&x, ch.response(1), ch.noise_var(), &mut noise_rng, &mut y)?;
                let h = ch.response(1);
                for k in 0..l {
                    let (idx, _) = nearest(y[k], h[k], points);
                    let got = constellation.label(idx);
                    tallies[0].bits += self.taps[0].bits;
                    tallies[0].errors += (got ^ sent[k]).count_ones() as u64;
                }
            }
            Link::Noma {
                system,
                alphabet,
                sic,
            } => {
                let cfg = system.config();
                let n = cfg.n_users;
                let m = cfg.mod_order;
                let patterns = cfg.pattern_count();
                let c = system.constellation();
                // Symbol labels per subcarrier, user-major within a subcarrier.
                let labels: Vec<usize> = (0..l * n).map(|_| sym_rng.random_range(0..m)).collect();
                let phis: Vec<usize> = if patterns > 1 {
                    (0..l).map(|_| idx_rng.random_range(0..patterns)).collect()
                } else {
                    vec![0; l]
                };
                let mut symbols = vec![0usize; n];
                let x: Vec<Complex64> = (0..l)
                    .map(|k| {
                        for (s, &lab) in symbols.iter_mut().zip(&labels[k * n..(k + 1) * n]) {
                            *s = c.index_for_label(lab);
                        }
                        system.superimpose_unchecked(&symbols, phis[k])
                    })
                    .collect();

                for r in 1..=self.receivers {
                    apply_channel_into(&x, ch.response(r), ch.noise_var(), &mut noise_rng, &mut y)?;
                    let taps: Vec<(usize, &Tap)> = self
                        .taps
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| t.receiver == r)
                        .collect();
                    if taps.is_empty() {
                        continue;
                    }
                    let h = ch.response(r);
                    for k in 0..l {
                        let result = match alphabet {
                            Some(a) => detect_ml(y[k], h[k], a),
                            None => sic.detect(y[k], h[k], r)?,
                        };
                        for &(slot, tap) in &taps {
                            let mut errors = 0;
                            if let Some(u) = tap.symbol_of {
                                let got = c.label(result.symbols[u - 1]);
                                errors += (got ^ labels[k * n + u - 1]).count_ones();
                            }
                            if tap.index {
                                let got = result.phi.ok_or(Error::MissingStage(r))?;
                                errors += (got ^ phis[k]).count_ones();
                            }
                            tallies[slot].bits += tap.bits;
                            tallies[slot].errors += errors as u64;
                        }
                    }
                }
            }
        }
        Ok(tallies)
    }

    fn done(&self, tallies: &[Tally]) -> bool {
        let stop = self.spec.stop;
        tallies
            .iter()
            .all(|t| t.errors >= stop.min_bit_errors || t.bits >= stop.max_bits)
    }

    fn run_point(&self, snr_db: f64) -> Result<Vec<BerRecord>> {
        let started = Instant::now();
        let mut totals = vec![Tally::default(); self.taps.len()];
        let mut next_block = 0u64;
        while !self.done(&totals) {
            let batch: Vec<Vec<Tally>> = (next_block..next_block + BATCH_BLOCKS)
                .into_par_iter()
                .map(|b| self.simulate_block(snr_db, b))
                .collect::<Result<_>>()?;
            for block in batch {
                for (acc, t) in totals.iter_mut().zip(block) {
                    *acc += t;
                }
            }
            next_block += BATCH_BLOCKS;
        }
        let wall_time = started.elapsed().as_secs_f64();
        let channels = self.spec.tracked_channels();
        log::info!(
            "{} {} snr={} dB: {} blocks in {:.2}s",
            self.spec.scheme,
            self.spec.detector,
            snr_db,
            next_block,
            wall_time
        );
        Ok(channels
            .into_iter()
            .zip(totals)
            .map(|(user, t)| BerRecord {
                scheme: self.spec.scheme,
                detector: self.spec.detector,
                user,
                snr_db,
                bits_sent: t.bits,
                bit_errors: t.errors,
                ber: t.errors as f64 / t.bits as f64,
                wall_time,
            })
            .collect())
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
        .install(f)
}

/// Simulates one SNR point of `spec`.
pub fn run_point(spec: &ExperimentSpec, snr_db: f64) -> Result<Vec<BerRecord>> {
    let engine = Engine::new(spec)?;
    with_pool(spec.workers, || engine.run_point(snr_db))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointTiming {
    pub snr_db: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ExperimentSpec,
    pub master_seed: u64,
    pub version: String,
    pub started_at: String,
    pub points: Vec<PointTiming>,
}

impl Manifest {
    pub fn file_name(&self) -> String {
        format!("manifest_{}_{}.json", self.spec.scheme, self.spec.detector)
    }
}

pub fn version_string() -> String {
    match option_env!("IMNOMA_GIT_DESCRIBE") {
        Some(describe) => format!("{} ({describe})", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub records: Vec<BerRecord>,
    pub manifest: Manifest,
}

/// Runs every point of the grid in order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let engine = Engine::new(spec)?;
    let records = with_pool(spec.workers, || {
        let mut all = Vec::new();
        for &snr in &spec.snr_grid_db {
            all.extend(engine.run_point(snr)?);
        }
        Ok(all)
    })?;
    let points = spec
        .snr_grid_db
        .iter()
        .map(|&snr_db| PointTiming {
            snr_db,
            seconds: records
                .iter()
                .find(|r| r.snr_db == snr_db)
                .map_or(0.0, |r| r.wall_time),
        })
        .collect();
    Ok(SweepResult {
        records,
        manifest: Manifest {
            spec: spec.clone(),
            master_seed: spec.master_seed,
            version: version_string(),
            started_at,
            points,
        },
    })
}

pub fn format_ber(ber: f64) -> String {
    format!("{ber:.5e}")
}

/// One CSV row in the results schema.
pub fn csv_row(
    scheme: &str,
    detector: &str,
    user: &str,
    snr_db: f64,
    bits: u64,
    errors: u64,
    ber: f64,
) -> [String; 7] {
    [
        scheme.to_string(),
        detector.to_string(),
        user.to_string(),
        snr_db.to_string(),
        bits.to_string(),
        errors.to_string(),
        format_ber(ber),
    ]
}

pub fn write_records_csv(path: &Path, records: &[BerRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(csv_row(
            r.scheme.as_str(),
            &r.detector.to_string(),
            &r.user.to_string(),
            r.snr_db,
            r.bits_sent,
            r.bit_errors,
            r.ber,
        ))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv` and one manifest per run into `dir`, replacing any
/// previous files of the same name.
pub fn persist(records: &[BerRecord], manifests: &[Manifest], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let results = dir.join(RESULTS_FILE);
    write_records_csv(&results, records)?;
    let mut written = vec![results];
    for m in manifests {
        let path = dir.join(m.file_name());
        fs::write(&path, serde_json::to_string_pretty(m)? + "\n")?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a results CSV. `wall_time` is filled from matching manifests when
/// given, else left at 0.
pub fn load_records(path: &Path, manifests: &[Manifest]) -> Result<Vec<BerRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Config(format!("unexpected results header: {headers:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let parse_err = |what: &str| Error::Config(format!("bad {what} in results row {row:?}"));
        let scheme: Scheme = field(0).parse()?;
        let detector: DetectorKind = field(1).parse()?;
        let user: ChannelId = field(2).parse()?;
        let snr_db: f64 = field(3).parse().map_err(|_| parse_err("snr_db"))?;
        let bits_sent: u64 = field(4).parse().map_err(|_| parse_err("bits_sent"))?;
        let bit_errors: u64 = field(5).parse().map_err(|_| parse_err("bit_errors"))?;
        if bits_sent == 0 {
            return Err(parse_err("bits_sent"));
        }
        let ber = bit_errors as f64 / bits_sent as f64;
        let stored: f64 = field(6).parse().map_err(|_| parse_err("ber"))?;
        if (stored - ber).abs() > 1e-5 * ber.max(f64::MIN_POSITIVE) {
            return Err(parse_err("ber"));
        }
        let wall_time = manifests
            .iter()
            .filter(|m| m.spec.scheme == scheme && m.spec.detector == detector)
            .flat_map(|m| &m.points)
            .find(|p| p.snr_db == snr_db)
            .map_or(0.0, |p| p.seconds);
        out.push(BerRecord {
            scheme,
            detector,
            user,
            snr_db,
            bits_sent,
            bit_errors,
            ber,
            wall_time,
        });
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(scheme: Scheme, detector: DetectorKind) -> ExperimentSpec {
        ExperimentSpec {
            scheme,
            detector,
            snr_grid_db: vec![0.0, 10.0],
            stop: StopRule {
                max_bits: 20_000,
                min_bit_errors: 50,
            },
            ..ExperimentSpec::two_user_default()
        }
    }

    #[test]
    fn spec_validation() {
        let ok = quick(Scheme::Imnomarc, DetectorKind::Ml);
        ok.validate().unwrap();
        let mut s = ok.clone();
        s.snr_grid_db = vec![5.0, 5.0];
        assert!(s.validate().is_err());
        let mut s = ok.clone();
        s.stop = StopRule {
            max_bits: 999,
            min_bit_errors: 100,
        };
        assert!(s.validate().is_err());
        let mut s = ok.clone();
        s.subcarriers = 100;
        assert!(s.validate().is_err());
        let mut s = ok;
        s.ofdm.mod_order = 3;
        assert!(s.validate().is_err());
    }

    #[test]
    fn tracked_channels_per_scheme() {
        use ChannelId::*;
        assert_eq!(
            quick(Scheme::Imnomarc, DetectorKind::Ml).tracked_channels(),
            vec![User(1), User(2), Index]
        );
        assert_eq!(
            quick(Scheme::Pdnoma, DetectorKind::Ml).tracked_channels(),
            vec![User(1), User(2)]
        );
        assert_eq!(
            quick(Scheme::Ofdm, DetectorKind::Ml).tracked_channels(),
            vec![User(1)]
        );
    }

    #[test]
    fn bits_per_channel() {
        let spec = quick(Scheme::Imnomarc, DetectorKind::Sic);
        let recs = run_point(&spec, 0.0).unwrap();
        // U_2 carries its symbol bit plus the index bit in near-user mode.
        assert_eq!(recs[1].bits_sent, 2 * recs[0].bits_sent);
        assert_eq!(recs[2].bits_sent, recs[0].bits_sent);
        assert_eq!(recs[0].bits_sent % spec.subcarriers as u64, 0);
    }

    #[test]
    fn noiseless_runs_are_error_free() {
        for scheme in [Scheme::Imnomarc, Scheme::Pdnoma, Scheme::Ofdm] {
            for det in [DetectorKind::Ml, DetectorKind::Sic] {
                let mut spec = quick(scheme, det);
                spec.noiseless = true;
                let result = run_sweep(&spec).unwrap();
                assert!(!result.records.is_empty());
                for r in &result.records {
                    assert_eq!(r.bit_errors, 0, "{r:?}");
                    assert!(r.bits_sent >= spec.stop.max_bits);
                }
            }
        }
    }

    #[test]
    fn empty_grid_gives_empty_results() {
        let mut spec = quick(Scheme::Imnomarc, DetectorKind::Ml);
        spec.snr_grid_db.clear();
        let res = run_sweep(&spec).unwrap();
        assert!(res.records.is_empty());
        assert!(res.manifest.points.is_empty());
        assert_eq!(res.manifest.master_seed, spec.master_seed);
    }

    #[test]
    fn worker_count_does_not_change_records() {
        let mut spec = quick(Scheme::Imnomarc, DetectorKind::Sic);
        spec.workers = 1;
        let a = run_point(&spec, 5.0).unwrap();
        spec.workers = 3;
        let b = run_point(&spec, 5.0).unwrap();
        let strip = |v: Vec<BerRecord>| {
            v.into_iter()
                .map(|r| (r.user, r.bits_sent, r.bit_errors))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn channel_id_parsing() {
        assert_eq!("index".parse::<ChannelId>().unwrap(), ChannelId::Index);
        assert_eq!("3".parse::<ChannelId>().unwrap(), ChannelId::User(3));
        assert!("0".parse::<ChannelId>().is_err());
        assert!("u1".parse::<ChannelId>().is_err());
    }

    #[test]
    fn ber_formatting() {
        assert_eq!(format_ber(0.0001234567), "1.23457e-4");
        assert_eq!(format_ber(0.0), "0.00000e0");
        assert_eq!(format_ber(0.5), "5.00000e-1");
    }

    #[test]
    fn relative_error_bookkeeping() {
        let r = BerRecord {
            scheme: Scheme::Ofdm,
            detector: DetectorKind::Ml,
            user: ChannelId::User(1),
            snr_db: 0.0,
            bits_sent: 10_000,
            bit_errors: 100,
            ber: 0.01,
            wall_time: 0.0,
        };
        assert!(r.relative_std_error() <= 0.1);
    }
}
