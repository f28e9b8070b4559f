//! ML and SIC detection for IM-NOMA-RC receivers, per-user bit extraction and
//! the closed-form FLOP counts of both detectors.
//!
//! Receivers are addressed by 1-based user index. Index `N + 1` is the
//! virtual user that only carries the rotation-pattern bits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{push_value_bits, Bit};
use crate::error::{Error, Result};
use crate::superposition::{IndexUserMode, NomaSystem, SuperAlphabet, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Ml,
    Sic,
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorKind::Ml => "ml",
            DetectorKind::Sic => "sic",
        })
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Ok(DetectorKind::Ml),
            "sic" => Ok(DetectorKind::Sic),
            other => Err(Error::Config(format!("unknown detector '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    /// Estimated point indices for users `1..=symbols.len()`.
    pub symbols: Vec<usize>,
    /// Estimated rotation pattern, when the receiver resolved every near user.
    pub phi: Option<usize>,
    /// Rotation decision per detected near user, starting at `U_{B+1}`.
    pub rotated: Vec<bool>,
    /// Metric of the winning hypothesis (the last stage for SIC).
    pub metric: f64,
    /// Winning alphabet entry for ML.
    pub entry: Option<usize>,
}

/// Index and metric of the candidate minimizing `|y - h c|^2`; the lowest
/// index wins ties.
#[inline]
pub fn nearest(y: Complex64, h: Complex64, candidates: &[Complex64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in candidates.iter().enumerate() {
        let d = (y - h * c).norm_sqr();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Exhaustive search over every superimposed symbol.
pub fn detect_ml(y: Complex64, h: Complex64, alphabet: &SuperAlphabet) -> DetectionResult {
    let mut best = (0, f64::INFINITY);
    for (i, e) in alphabet.entries().iter().enumerate() {
        let d = (y - h * e.x).norm_sqr();
        if d < best.1 {
            best = (i, d);
        }
    }
    let entry = alphabet.entry(best.0);
    DetectionResult {
        symbols: entry.symbols.clone(),
        phi: Some(entry.phi),
        rotated: Vec::new(),
        metric: best.1,
        entry: Some(best.0),
    }
}

/// Maps per-user rotation decisions for `U_{B+1}..U_N` onto a reachable
/// pattern: the pattern itself when it is a valid suffix, otherwise the
/// valid suffix closest in Hamming distance (smaller `phi` on ties).
pub fn angles_to_phi(rotated: &[bool], pattern_count: usize) -> usize {
    let len = rotated.len();
    let mut best = (0, usize::MAX);
    for phi in 0..pattern_count.min(len + 1) {
        let distance = rotated
            .iter()
            .enumerate()
            .filter(|&(i, &r)| r != (i >= len - phi))
            .count();
        if distance < best.1 {
            best = (phi, distance);
        }
    }
    best.0
}

/// Successive interference cancellation with precomputed per-stage
/// candidate sets.
#[derive(Clone, Debug)]
pub struct SicDetector {
    system: NomaSystem,
    /// Stage `l` candidates `sqrt(alpha_l P_T) e^{j theta} s`, ordered by
    /// angle then symbol.
    stages: Vec<Vec<Complex64>>,
    order: usize,
}

impl SicDetector {
    pub fn new(system: &NomaSystem) -> Self {
        let cfg = system.config();
        let plain = system.constellation().points();
        let rotate = cfg.index_bits() > 0;
        let stages = (1..=cfg.n_users)
            .map(|l| {
                let amp = system.amplitude(l);
                let mut cands: Vec<Complex64> = plain.iter().map(|p| p * amp).collect();
                if rotate && cfg.is_near(l) {
                    let turn = system.rotation_phasor();
                    cands.extend(plain.iter().map(|p| (p * amp) * turn));
                }
                cands
            })
            .collect();
        Self {
            system: system.clone(),
            stages,
            order: plain.len(),
        }
    }

    pub fn system(&self) -> &NomaSystem {
        &self.system
    }

    /// Runs stages `1..=min(user, N)`; the virtual user `N + 1` runs all `N`.
    pub fn detect(&self, y: Complex64, h: Complex64, user: usize) -> Result<DetectionResult> {
        let cfg = self.system.config();
        let n = cfg.n_users;
        check_receiver(cfg, user)?;
        let last = user.min(n);
        let mut residual = y;
        let mut symbols = Vec::with_capacity(last);
        let mut rotated = Vec::new();
        let mut metric = 0.0;
        for l in 1..=last {
            let cands = &self.stages[l - 1];
            let (idx, d) = nearest(residual, h, cands);
            residual -= h * cands[idx];
            symbols.push(idx % self.order);
            if cfg.is_near(l) {
                rotated.push(idx >= self.order);
            }
            metric = d;
        }
        let phi = (last == n).then(|| angles_to_phi(&rotated, cfg.pattern_count()));
        Ok(DetectionResult {
            symbols,
            phi,
            rotated,
            metric,
            entry: None,
        })
    }
}

pub fn detect_sic(y: Complex64, h: Complex64, system: &NomaSystem, user: usize) -> Result<DetectionResult> {
    SicDetector::new(system).detect(y, h, user)
}

fn check_receiver(cfg: &SystemConfig, user: usize) -> Result<()> {
    let virtual_ok = cfg.index_user_mode == IndexUserMode::VirtualUser && cfg.index_bits() > 0;
    if user == 0 || user > cfg.n_users + usize::from(virtual_ok) {
        return Err(Error::InvalidUser {
            user,
            n_users: cfg.n_users,
        });
    }
    Ok(())
}

/// Whether `user`'s own bits include the index bits.
pub fn owns_index_bits(cfg: &SystemConfig, user: usize) -> bool {
    if cfg.index_bits() == 0 {
        return false;
    }
    match cfg.index_user_mode {
        IndexUserMode::NearUsers => user == cfg.n_users,
        IndexUserMode::VirtualUser => user == cfg.n_users + 1,
    }
}

/// Own bits of `user` from a detection result: symbol bits for real users,
/// plus the index bits for `U_N` in near-user mode; only the index bits for
/// the virtual user.
pub fn extract_user_bits(result: &DetectionResult, system: &NomaSystem, user: usize) -> Result<Vec<Bit>> {
    let cfg = system.config();
    check_receiver(cfg, user)?;
    let mut out = Vec::new();
    if user <= cfg.n_users {
        let s = *result.symbols.get(user - 1).ok_or(Error::MissingStage(user))?;
        push_value_bits(system.constellation().label(s), cfg.bits_per_symbol(), &mut out);
    }
    if owns_index_bits(cfg, user) {
        let phi = result.phi.ok_or(Error::MissingStage(user))?;
        push_value_bits(phi, cfg.index_bits(), &mut out);
    }
    Ok(out)
}

fn overflow() -> Error {
    Error::Config("FLOP count overflows u64".into())
}

/// `eta_ML = 3 M^N C_IM`.
pub fn flops_ml(cfg: &SystemConfig) -> Result<u64> {
    let m = cfg.mod_order as u64;
    m.checked_pow(cfg.n_users as u32)
        .and_then(|v| v.checked_mul(3 * cfg.pattern_count() as u64))
        .ok_or_else(overflow)
}

/// `eta_F = 3 M n + n - 1` for far users, `eta_N = 3 M B + 4 M C_IM (n - B)
/// + n - 1` for near users.
pub fn flops_sic(cfg: &SystemConfig, user: usize) -> Result<u64> {
    if user == 0 || user > cfg.n_users {
        return Err(Error::InvalidUser {
            user,
            n_users: cfg.n_users,
        });
    }
    let m = cfg.mod_order as u64;
    let n = user as u64;
    let b = cfg.n_far as u64;
    if user <= cfg.n_far {
        Ok(3 * m * n + n - 1)
    } else {
        let c_im = cfg.pattern_count() as u64;
        Ok(3 * m * b + 4 * m * c_im * (n - b) + n - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlopReport {
    pub detector: DetectorKind,
    /// FLOPs per subcarrier for users `1..=N`.
    pub per_user: Vec<u64>,
}

pub fn flop_report(cfg: &SystemConfig, detector: DetectorKind) -> Result<FlopReport> {
    let per_user = match detector {
        DetectorKind::Ml => vec![flops_ml(cfg)?; cfg.n_users],
        DetectorKind::Sic => (1..=cfg.n_users)
            .map(|n| flops_sic(cfg, n))
            .collect::<Result<_>>()?,
    };
    Ok(FlopReport { detector, per_user })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;

    fn two_user() -> NomaSystem {
        NomaSystem::new(SystemConfig::two_user_bpsk()).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ml_recovers_noiseless_entries() {
        let sys = two_user();
        let a = sys.build_super_alphabet().unwrap();
        let h = c(0.3, -1.1);
        for (i, e) in a.entries().iter().enumerate() {
            let r = detect_ml(h * e.x, h, &a);
            assert_eq!(r.entry, Some(i));
            assert_eq!(r.metric, 0.0);
        }
    }

    #[test]
    fn ml_two_user_rotated_example() {
        let sys = two_user();
        let a = sys.build_super_alphabet().unwrap();
        let r = detect_ml(c(0.9f64.sqrt(), 0.1f64.sqrt()), c(1.0, 0.0), &a);
        assert_eq!(r.symbols, vec![0, 0]);
        assert_eq!(r.phi, Some(1));
    }

    #[test]
    fn sic_far_user_treats_near_as_noise() {
        let sys = two_user();
        let h = c(0.7, 0.4);
        let y = h * (0.9f64.sqrt() - 0.1f64.sqrt());
        let r = detect_sic(y, h, &sys, 1).unwrap();
        assert_eq!(r.symbols, vec![0]);
        assert_eq!(r.phi, None);
        assert_eq!(extract_user_bits(&r, &sys, 1).unwrap(), vec![0]);
    }

    #[test]
    fn sic_near_user_cancels_exactly() {
        let sys = two_user();
        let h = c(-0.2, 1.3);
        let y = h * c(0.9f64.sqrt(), 0.1f64.sqrt());
        let r = detect_sic(y, h, &sys, 2).unwrap();
        assert_eq!(r.symbols, vec![0, 0]);
        assert_eq!(r.rotated, vec![true]);
        assert_eq!(r.phi, Some(1));
        assert!(r.metric < 1e-28);
        assert_eq!(extract_user_bits(&r, &sys, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn sic_user_range() {
        let sys = two_user();
        assert!(detect_sic(c(1.0, 0.0), c(1.0, 0.0), &sys, 0).is_err());
        assert!(detect_sic(c(1.0, 0.0), c(1.0, 0.0), &sys, 3).is_err());
        let virt = NomaSystem::new(SystemConfig {
            index_user_mode: IndexUserMode::VirtualUser,
            ..SystemConfig::two_user_bpsk()
        })
        .unwrap();
        let r = detect_sic(c(0.0, 0.1f64.sqrt()) + 0.9f64.sqrt(), c(1.0, 0.0), &virt, 3).unwrap();
        assert_eq!(r.phi, Some(1));
        assert_eq!(extract_user_bits(&r, &virt, 3).unwrap(), vec![1]);
        assert_eq!(extract_user_bits(&r, &virt, 2).unwrap(), vec![0]);
    }

    #[test]
    fn angles_to_phi_examples() {
        assert_eq!(angles_to_phi(&[false, false], 2), 0);
        assert_eq!(angles_to_phi(&[false, true], 2), 1);
        // (pi/2, 0) is not a suffix; phi = 0 is closer than phi = 1.
        assert_eq!(angles_to_phi(&[true, false], 2), 0);
        assert_eq!(angles_to_phi(&[true, true, true], 4), 3);
        assert_eq!(angles_to_phi(&[false, true, true], 4), 2);
        // Full rotation of 4 near users is unreachable with 4 patterns.
        assert_eq!(angles_to_phi(&[true, true, true, true], 4), 3);
        assert_eq!(angles_to_phi(&[], 1), 0);
    }

    #[test]
    fn angles_to_phi_matches_exhaustive_projection() {
        for len in 1..=5usize {
            let count = 1usize << ((len + 1) as f64).log2().floor() as usize;
            for mask in 0..(1usize << len) {
                let flags: Vec<bool> = (0..len).map(|i| mask >> (len - 1 - i) & 1 == 1).collect();
                let dist: Vec<usize> = (0..count)
                    .map(|phi| (0..len).filter(|&i| flags[i] != (i + phi >= len)).count())
                    .collect();
                let min = *dist.iter().min().unwrap();
                let want = dist.iter().position(|&d| d == min).unwrap();
                assert_eq!(angles_to_phi(&flags, count), want, "{flags:?}");
            }
        }
    }

    #[test]
    fn extract_bits_from_ml_result() {
        let sys = two_user();
        let r = DetectionResult {
            symbols: vec![0, 1],
            phi: Some(1),
            rotated: vec![],
            metric: 0.0,
            entry: None,
        };
        assert_eq!(extract_user_bits(&r, &sys, 2).unwrap(), vec![1, 1]);
        assert_eq!(extract_user_bits(&r, &sys, 1).unwrap(), vec![0]);
        let short = DetectionResult {
            symbols: vec![0],
            phi: None,
            ..r
        };
        assert!(matches!(
            extract_user_bits(&short, &sys, 2),
            Err(Error::MissingStage(2))
        ));
    }

    #[test]
    fn flop_examples() {
        let cfg = SystemConfig::two_user_bpsk();
        assert_eq!(flops_ml(&cfg).unwrap(), 24);
        assert_eq!(flops_sic(&cfg, 1).unwrap(), 6);
        assert_eq!(flops_sic(&cfg, 2).unwrap(), 23);
        assert!(flops_sic(&cfg, 3).is_err());
        assert!(flops_sic(&cfg, 0).is_err());
        let rep = flop_report(&cfg, DetectorKind::Sic).unwrap();
        assert_eq!(rep.per_user, vec![6, 23]);
    }

    #[test]
    fn sic_with_im_disabled_never_rotates() {
        let sys = NomaSystem::new(SystemConfig::two_user_bpsk().with_im_disabled()).unwrap();
        let det = SicDetector::new(&sys);
        let h = c(1.0, 0.0);
        let r = det.detect(c(0.9f64.sqrt(), 0.1f64.sqrt()), h, 2).unwrap();
        assert_eq!(r.rotated, vec![false]);
        assert_eq!(r.phi, Some(0));
        assert_eq!(extract_user_bits(&r, &sys, 2).unwrap().len(), 1);
    }

    #[test]
    fn sic_rotation_candidates_are_quarter_turns() {
        let sys = two_user();
        let det = SicDetector::new(&sys);
        let a = 0.1f64.sqrt();
        assert_eq!(det.stages[1], vec![c(a, 0.0), c(-a, 0.0), c(0.0, a), c(0.0, -a)]);
    }

    #[test]
    fn noiseless_detection_three_users() {
        use rand::SeedableRng;
        let sys = NomaSystem::new(SystemConfig {
            n_users: 3,
            n_far: 1,
            power_coeffs: vec![0.8, 0.15, 0.05],
            ..SystemConfig::two_user_bpsk()
        })
        .unwrap();
        let a = sys.build_super_alphabet().unwrap();
        let det = SicDetector::new(&sys);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let h = complex_gaussian(&mut rng, 1.0);
            for (i, e) in a.entries().iter().enumerate() {
                let y = h * e.x;
                assert_eq!(detect_ml(y, h, &a).entry, Some(i));
                let r = det.detect(y, h, 3).unwrap();
                assert_eq!((r.symbols.clone(), r.phi), (e.symbols.clone(), Some(e.phi)));
            }
        }
    }
}
