//! Command-line front end.
//!
//! A TOML config holds the system, OFDM baseline, sweep, SE and FLOP
//! sections; command-line flags override the sweep section. Commands write
//! plot-ready CSV files under the output directory and nothing else.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{per_user_union_bound, union_bound_masked};
use crate::channel::{noise_variance, DEFAULT_SUBCARRIERS};
use crate::constellation::Constellation;
use crate::detectors::{flops_ml, flops_sic, DetectorKind};
use crate::error::{Error, Result};
use crate::harness::{
    csv_row, persist, run_sweep, ChannelId, ExperimentSpec, Modulation, Scheme, StopRule, CSV_HEADER,
};
use crate::superposition::{spectral_efficiency, IndexUserMode, NomaSystem, SystemConfig};

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

pub const SE_FILE: &str = "se.csv";
pub const FLOPS_FILE: &str = "flops.csv";
pub const BOUND_FILE: &str = "bound.csv";

#[derive(Parser, Debug)]
#[command(name = "imnoma", version, about = "IM-NOMA-RC link-level studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML config file; the built-in two-user default when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// SNR grid in dB as start:step:stop, or a single value.
    #[arg(long, global = true, value_parser = parse_snr_arg)]
    pub snr: Option<SnrArg>,

    /// Detector to run; repeatable.
    #[arg(long = "detector", global = true)]
    pub detectors: Vec<DetectorKind>,

    /// Scheme to run; repeatable.
    #[arg(long = "scheme", global = true)]
    pub schemes: Vec<Scheme>,

    #[arg(long, global = true)]
    pub max_bits: Option<u64>,

    #[arg(long, global = true)]
    pub min_errors: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Spectral efficiency table.
    Se,
    /// Detector complexity table.
    Flops,
    /// Union-bound BER curves.
    Bound,
    /// Monte Carlo BER curves.
    Ber,
}

/// Parsed `--snr` value.
#[derive(Clone, Debug, PartialEq)]
pub struct SnrArg(pub Vec<f64>);

fn parse_snr_arg(s: &str) -> std::result::Result<SnrArg, String> {
    parse_snr_values(s).map(SnrArg)
}

fn parse_snr_values(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| format!("'{p}' is not a number"))
    };
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, c] => SnrGrid::Range {
            start: num(a)?,
            step: num(b)?,
            stop: num(c)?,
        }
        .expand()
        .map_err(|e| e.to_string()),
        _ => Err(format!("expected start:step:stop, got '{s}'")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrGrid {
    Range { start: f64, step: f64, stop: f64 },
    List(Vec<f64>),
}

impl SnrGrid {
    pub fn expand(&self) -> Result<Vec<f64>> {
        match self {
            SnrGrid::List(v) => Ok(v.clone()),
            &SnrGrid::Range { start, step, stop } => {
                if !(start.is_finite() && step.is_finite() && stop.is_finite()) || step <= 0.0 || stop < start
                {
                    return Err(Error::Config(format!("invalid SNR range {start}:{step}:{stop}")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                if count > 10_000 {
                    return Err(Error::Config(format!("SNR range has {count} points")));
                }
                // Rounding keeps grid values such as 0.1 * 3 printable.
                Ok((0..count)
                    .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
                    .collect())
            }
        }
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Imnomarc]
}

fn default_detectors() -> Vec<DetectorKind> {
    vec![DetectorKind::Ml]
}

fn default_grid() -> SnrGrid {
    SnrGrid::Range {
        start: 0.0,
        step: 5.0,
        stop: 30.0,
    }
}

fn default_seed() -> u64 {
    1
}

fn default_subcarriers() -> usize {
    DEFAULT_SUBCARRIERS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<DetectorKind>,
    #[serde(default = "default_grid")]
    pub snr_db: SnrGrid,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub max_bits: Option<u64>,
    #[serde(default)]
    pub min_bit_errors: Option<u64>,
    #[serde(default = "default_subcarriers")]
    pub subcarriers: usize,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub noiseless: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            schemes: default_schemes(),
            detectors: default_detectors(),
            snr_db: default_grid(),
            master_seed: default_seed(),
            max_bits: None,
            min_bit_errors: None,
            subcarriers: DEFAULT_SUBCARRIERS,
            workers: 0,
            noiseless: false,
        }
    }
}

/// One `(N, B, M)` row of the SE or FLOP tables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeCase {
    #[serde(default)]
    pub label: String,
    pub n_users: usize,
    pub n_far: usize,
    pub mod_order: usize,
}

impl SizeCase {
    pub fn new(n_users: usize, n_far: usize, mod_order: usize) -> Self {
        Self {
            label: String::new(),
            n_users,
            n_far,
            mod_order,
        }
    }

    /// A system of this size with equal-ratio decreasing power coefficients;
    /// SE and FLOP counts do not depend on the coefficients.
    pub fn system(&self) -> Result<SystemConfig> {
        let n = self.n_users.max(1);
        let weights: Vec<f64> = (0..n).map(|k| (n - k) as f64).collect();
        let total: f64 = weights.iter().sum();
        let mut cfg = SystemConfig {
            n_users: self.n_users,
            n_far: self.n_far,
            mod_order: self.mod_order,
            power_coeffs: weights.iter().map(|w| w / total).collect(),
            ..SystemConfig::two_user_bpsk()
        };
        // Re-normalize the last coefficient so the sum is exactly one.
        let head: f64 = cfg.power_coeffs[..n - 1].iter().sum();
        cfg.power_coeffs[n - 1] = 1.0 - head;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_ns() -> usize {
    4
}

fn default_k() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeSection {
    #[serde(default)]
    pub cases: Vec<SizeCase>,
    /// Subcarriers per subblock of the IM-NOMA comparator.
    #[serde(default = "default_ns")]
    pub n_s: usize,
    /// Active subcarriers per subblock of the IM-NOMA comparator.
    #[serde(default = "default_k")]
    pub k: usize,
}

impl Default for SeSection {
    fn default() -> Self {
        Self {
            cases: Vec::new(),
            n_s: default_ns(),
            k: default_k(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlopsSection {
    #[serde(default)]
    pub cases: Vec<SizeCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "SystemConfig::two_user_bpsk")]
    pub system: SystemConfig,
    #[serde(default = "Modulation::ofdm_default")]
    pub ofdm: Modulation,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub se: SeSection,
    #[serde(default)]
    pub flops: FlopsSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// A parsed invocation: command, config with overrides applied, output dir.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub file: ConfigFile,
    pub out: PathBuf,
}

impl CliConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let mut file = match &cli.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::parse(DEFAULT_CONFIG)?,
        };
        let sweep = &mut file.sweep;
        if let Some(seed) = cli.seed {
            sweep.master_seed = seed;
        }
        if let Some(grid) = cli.snr {
            sweep.snr_db = SnrGrid::List(grid.0);
        }
        if !cli.detectors.is_empty() {
            sweep.detectors = dedup(cli.detectors);
        }
        if !cli.schemes.is_empty() {
            sweep.schemes = dedup(cli.schemes);
        }
        if cli.max_bits.is_some() {
            sweep.max_bits = cli.max_bits;
        }
        if cli.min_errors.is_some() {
            sweep.min_bit_errors = cli.min_errors;
        }
        let out = CliConfig {
            command: cli.command,
            file,
            out: cli.out,
        };
        // Surface sweep mistakes as configuration errors before any work.
        if matches!(out.command, Command::Ber | Command::Bound) {
            out.experiments()?;
        }
        Ok(out)
    }

    pub fn snr_grid(&self) -> Result<Vec<f64>> {
        self.file.sweep.snr_db.expand()
    }

    /// One experiment per scheme and detector. OFDM has a single receiver
    /// path, so it runs once, labelled `ml`.
    pub fn experiments(&self) -> Result<Vec<ExperimentSpec>> {
        let sweep = &self.file.sweep;
        if sweep.schemes.is_empty() || sweep.detectors.is_empty() {
            return Err(Error::Config(
                "sweep needs at least one scheme and detector".into(),
            ));
        }
        let defaults = StopRule::default();
        let stop = StopRule {
            max_bits: sweep.max_bits.unwrap_or(defaults.max_bits),
            min_bit_errors: sweep.min_bit_errors.unwrap_or(defaults.min_bit_errors),
        };
        let grid = self.snr_grid()?;
        let mut out = Vec::new();
        for &scheme in &sweep.schemes {
            let detectors = match scheme {
                Scheme::Ofdm => vec![DetectorKind::Ml],
                _ => sweep.detectors.clone(),
            };
            for detector in detectors {
                let spec = ExperimentSpec {
                    scheme,
                    system: self.file.system.clone(),
                    ofdm: self.file.ofdm,
                    detector,
                    snr_grid_db: grid.clone(),
                    stop,
                    master_seed: sweep.master_seed,
                    subcarriers: sweep.subcarriers,
                    workers: sweep.workers,
                    noiseless: sweep.noiseless,
                };
                spec.validate()?;
                out.push(spec);
            }
        }
        Ok(out)
    }
}

fn dedup<T: PartialEq>(items: Vec<T>) -> Vec<T> {
    let mut out = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeRow {
    pub case: SizeCase,
    pub imnomarc: usize,
    pub pdnoma: usize,
    pub imnoma: f64,
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// SE of subblock IM-NOMA: `k` of `n_s` subcarriers active, each carrying
/// all `N` users, plus the activation-pattern bits, averaged per subcarrier.
pub fn imnoma_spectral_efficiency(n_users: usize, mod_order: usize, n_s: usize, k: usize) -> Result<f64> {
    if n_s == 0 || k == 0 || k > n_s {
        return Err(Error::Config(format!(
            "invalid subblock shape n_s = {n_s}, k = {k}"
        )));
    }
    let bits = mod_order.trailing_zeros() as usize;
    let pattern_bits = 63 - binomial(n_s, k).leading_zeros() as usize;
    Ok((k * bits * n_users + pattern_bits) as f64 / n_s as f64)
}

pub fn se_table(section: &SeSection) -> Result<Vec<SeRow>> {
    section
        .cases
        .iter()
        .map(|case| {
            let cfg = case.system()?;
            Ok(SeRow {
                case: case.clone(),
                imnomarc: spectral_efficiency(&cfg),
                pdnoma: spectral_efficiency(&cfg.clone().with_im_disabled()),
                imnoma: imnoma_spectral_efficiency(case.n_users, case.mod_order, section.n_s, section.k)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlopRow {
    pub case: SizeCase,
    pub user: usize,
    pub ml: u64,
    pub sic: u64,
}

pub fn flop_table(section: &FlopsSection) -> Result<Vec<FlopRow>> {
    let mut rows = Vec::new();
    for case in &section.cases {
        let cfg = case.system()?;
        let ml = flops_ml(&cfg)?;
        for user in 1..=cfg.n_users {
            rows.push(FlopRow {
                case: case.clone(),
                user,
                ml,
                sic: flops_sic(&cfg, user)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub scheme: Scheme,
    pub user: ChannelId,
    pub snr_db: f64,
    pub ber: f64,
}

/// Union-bound curves with the same channels as the simulation records.
/// In near-user mode `U_N`'s curve mixes its symbol and index bits in
/// proportion to their widths, matching how its simulated BER is counted.
pub fn bound_curves(spec: &ExperimentSpec) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    match spec.scheme {
        Scheme::Ofdm => {
            let c = Constellation::build(spec.ofdm.mod_order, spec.ofdm.family)?;
            let amp = spec.system.total_power.sqrt();
            let points: Vec<Complex64> = c.points().iter().map(|p| p * amp).collect();
            let labels: Vec<usize> = (0..c.order()).map(|i| c.label(i)).collect();
            let mask = c.order() - 1;
            for &snr_db in &spec.snr_grid_db {
                let sigma2 = noise_variance(snr_db, spec.system.total_power);
                let b = union_bound_masked(&points, &labels, &[mask], sigma2)?;
                rows.push(BoundRow {
                    scheme: spec.scheme,
                    user: ChannelId::User(1),
                    snr_db,
                    ber: b.aggregate,
                });
            }
        }
        Scheme::Imnomarc | Scheme::Pdnoma => {
            let cfg = spec.effective_system();
            let alphabet = NomaSystem::new(cfg.clone())?.build_super_alphabet()?;
            let n = cfg.n_users;
            let sym = cfg.bits_per_symbol() as f64;
            let p2 = cfg.index_bits() as f64;
            for &snr_db in &spec.snr_grid_db {
                let sigma2 = noise_variance(snr_db, cfg.total_power);
                let b = per_user_union_bound(&alphabet, sigma2)?;
                for user in 1..=n {
                    let mut ber = b.groups[user - 1];
                    if user == n && p2 > 0.0 && cfg.index_user_mode == IndexUserMode::NearUsers {
                        ber = (ber * sym + b.groups[n] * p2) / (sym + p2);
                    }
                    rows.push(BoundRow {
                        scheme: spec.scheme,
                        user: ChannelId::User(user),
                        snr_db,
                        ber,
                    });
                }
                if p2 > 0.0 {
                    rows.push(BoundRow {
                        scheme: spec.scheme,
                        user: ChannelId::Index,
                        snr_db,
                        ber: b.groups[n],
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn write_csv<const K: usize>(
    path: &Path,
    header: [&str; K],
    rows: impl IntoIterator<Item = [String; K]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_se(cfg: &CliConfig) -> Result<Vec<SeRow>> {
    let rows = se_table(&cfg.file.se)?;
    fs::create_dir_all(&cfg.out)?;
    write_csv(
        &cfg.out.join(SE_FILE),
        [
            "label",
            "n_users",
            "n_far",
            "mod_order",
            "imnomarc",
            "pdnoma",
            "imnoma",
        ],
        rows.iter().map(|r| {
            [
                r.case.label.clone(),
                r.case.n_users.to_string(),
                r.case.n_far.to_string(),
                r.case.mod_order.to_string(),
                r.imnomarc.to_string(),
                r.pdnoma.to_string(),
                r.imnoma.to_string(),
            ]
        }),
    )?;
    println!(
        "{:<6} {:>3} {:>3} {:>3} {:>9} {:>7} {:>7}",
        "label", "N", "B", "M", "imnomarc", "pdnoma", "imnoma"
    );
    for r in &rows {
        println!(
            "{:<6} {:>3} {:>3} {:>3} {:>9} {:>7} {:>7.3}",
            r.case.label, r.case.n_users, r.case.n_far, r.case.mod_order, r.imnomarc, r.pdnoma, r.imnoma
        );
    }
    Ok(rows)
}

pub fn cmd_flops(cfg: &CliConfig) -> Result<Vec<FlopRow>> {
    let rows = flop_table(&cfg.file.flops)?;
    fs::create_dir_all(&cfg.out)?;
    write_csv(
        &cfg.out.join(FLOPS_FILE),
        ["label", "n_users", "n_far", "mod_order", "user", "ml", "sic"],
        rows.iter().map(|r| {
            [
                r.case.label.clone(),
                r.case.n_users.to_string(),
                r.case.n_far.to_string(),
                r.case.mod_order.to_string(),
                r.user.to_string(),
                r.ml.to_string(),
                r.sic.to_string(),
            ]
        }),
    )?;
    println!(
        "{:>3} {:>3} {:>3} {:>4} {:>10} {:>8}",
        "N", "B", "M", "user", "ml", "sic"
    );
    for r in &rows {
        println!(
            "{:>3} {:>3} {:>3} {:>4} {:>10} {:>8}",
            r.case.n_users, r.case.n_far, r.case.mod_order, r.user, r.ml, r.sic
        );
    }
    Ok(rows)
}

pub fn cmd_bound(cfg: &CliConfig) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    let mut seen = Vec::new();
    for spec in cfg.experiments()? {
        // The bound depends on the scheme only.
        if seen.contains(&spec.scheme) {
            continue;
        }
        seen.push(spec.scheme);
        rows.extend(bound_curves(&spec)?);
    }
    fs::create_dir_all(&cfg.out)?;
    write_csv(
        &cfg.out.join(BOUND_FILE),
        CSV_HEADER,
        rows.iter().map(|r| {
            csv_row(
                r.scheme.as_str(),
                "bound",
                &r.user.to_string(),
                r.snr_db,
                0,
                0,
                r.ber,
            )
        }),
    )?;
    Ok(rows)
}

pub fn cmd_ber(cfg: &CliConfig) -> Result<Vec<PathBuf>> {
    let mut records = Vec::new();
    let mut manifests = Vec::new();
    for spec in cfg.experiments()? {
        log::info!("running {} / {}", spec.scheme, spec.detector);
        let result = run_sweep(&spec)?;
        for r in &result.records {
            println!(
                "{:<8} {:<3} user {:<5} {:>6} dB  ber {:.5e}  ({} / {})",
                r.scheme, r.detector, r.user, r.snr_db, r.ber, r.bit_errors, r.bits_sent
            );
        }
        records.extend(result.records);
        manifests.push(result.manifest);
    }
    persist(&records, &manifests, &cfg.out)
}

pub fn execute(cfg: &CliConfig) -> Result<()> {
    match cfg.command {
        Command::Se => cmd_se(cfg).map(drop),
        Command::Flops => cmd_flops(cfg).map(drop),
        Command::Bound => cmd_bound(cfg).map(drop),
        Command::Ber => cmd_ber(cfg).map(drop),
    }
}

/// Failure of a CLI invocation, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Config(Error),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => 0,
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{e}"),
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> std::result::Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    let cfg = CliConfig::from_cli(cli).map_err(CliError::Config)?;
    execute(&cfg).map_err(|e| {
        if e.is_config_error() {
            CliError::Config(e)
        } else {
            CliError::Runtime(e)
        }
    })
}
