//! Transmit side of IM-NOMA-RC: bit partitioning, rotation patterns,
//! power-domain superposition and spectral-efficiency accounting.
//!
//! Users are 1-based in the public API (`U_1` is the farthest, highest-power
//! user). Per subcarrier the bit layout is the symbol bits of users
//! `1..=N` in order, `log2 M` bits each, followed by the `p2` index bits.
//! The index bits read MSB first give the rotation pattern `phi`; pattern
//! `phi` rotates the last `phi` users of the near group.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{bits_to_value, phasor, push_value_bits, Bit, Constellation, Family, RotationSet};
use crate::error::{Error, Result};

/// Default limit on `M^N * 2^p2` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 1 << 20;

/// Who the index bits belong to in BER bookkeeping. The waveform is the same
/// in both modes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexUserMode {
    /// Index bits are extra data for the nearest user `U_N`.
    #[default]
    NearUsers,
    /// Index bits carry the data of a virtual user `U_{N+1}`.
    VirtualUser,
}

fn default_true() -> bool {
    true
}

fn default_power() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_users: usize,
    pub n_far: usize,
    pub mod_order: usize,
    #[serde(default = "default_family")]
    pub family: Family,
    pub power_coeffs: Vec<f64>,
    #[serde(default = "default_power")]
    pub total_power: f64,
    #[serde(default)]
    pub rotation: RotationSet,
    #[serde(default)]
    pub index_user_mode: IndexUserMode,
    /// `false` forces `p2 = 0`, which turns the scheme into plain PD-NOMA.
    #[serde(default = "default_true")]
    pub im_enabled: bool,
}

fn default_family() -> Family {
    Family::Psk
}

impl SystemConfig {
    /// Two users, one far, BPSK, `alpha = (0.9, 0.1)`, `P_T = 1`.
    pub fn two_user_bpsk() -> Self {
        Self {
            n_users: 2,
            n_far: 1,
            mod_order: 2,
            family: Family::Psk,
            power_coeffs: vec![0.9, 0.1],
            total_power: 1.0,
            rotation: RotationSet::quarter_turn(),
            index_user_mode: IndexUserMode::NearUsers,
            im_enabled: true,
        }
    }

    pub fn with_im_disabled(mut self) -> Self {
        self.im_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_users < 2 {
            return bad(format!("need at least 2 users, got {}", self.n_users));
        }
        if self.n_far == 0 || self.n_far >= self.n_users {
            return bad(format!(
                "far-user count must satisfy 1 <= B < N, got B = {} with N = {}",
                self.n_far, self.n_users
            ));
        }
        if self.power_coeffs.len() != self.n_users {
            return bad(format!(
                "{} power coefficients for {} users",
                self.power_coeffs.len(),
                self.n_users
            ));
        }
        if self.power_coeffs.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return bad("power coefficients must be positive".into());
        }
        if self.power_coeffs.windows(2).any(|w| w[0] <= w[1]) {
            return bad("power coefficients must be strictly decreasing".into());
        }
        let total: f64 = self.power_coeffs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("power coefficients sum to {total}, not 1"));
        }
        if !(self.total_power.is_finite() && self.total_power > 0.0) {
            return bad(format!("total power must be positive, got {}", self.total_power));
        }
        if self.rotation.len() != 2 {
            return bad(format!(
                "rotation set must hold exactly two angles, got {}",
                self.rotation.len()
            ));
        }
        Constellation::build(self.mod_order, self.family)?;
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.mod_order.trailing_zeros() as usize
    }

    /// `p1 = N log2 M`.
    pub fn symbol_bits(&self) -> usize {
        self.n_users * self.bits_per_symbol()
    }

    /// `p2 = floor(log2(N - B + 1))`, or 0 with IM disabled.
    pub fn index_bits(&self) -> usize {
        if self.im_enabled {
            (self.n_users - self.n_far + 1).ilog2() as usize
        } else {
            0
        }
    }

    /// Number of rotation patterns, `C_IM = 2^p2`.
    pub fn pattern_count(&self) -> usize {
        1 << self.index_bits()
    }

    pub fn bits_per_subcarrier(&self) -> usize {
        self.symbol_bits() + self.index_bits()
    }

    pub fn is_near(&self, user: usize) -> bool {
        user > self.n_far && user <= self.n_users
    }
}

/// Bits per subcarrier, `N log2 M + floor(log2(N - B + 1))`.
pub fn spectral_efficiency(cfg: &SystemConfig) -> usize {
    cfg.bits_per_subcarrier()
}

/// A rotation pattern and the (1-based) users it rotates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImPattern {
    pub phi: usize,
    pub rotated: RangeInclusive<usize>,
}

impl ImPattern {
    pub fn is_rotated(&self, user: usize) -> bool {
        self.rotated.contains(&user)
    }
}

/// A validated configuration together with its base constellation and the
/// per-user amplitude weights `sqrt(alpha_n P_T)`.
#[derive(Clone, Debug)]
pub struct NomaSystem {
    cfg: SystemConfig,
    constellation: Constellation,
    amplitudes: Vec<f64>,
    rotation: Complex64,
}

impl NomaSystem {
    pub fn new(cfg: SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let constellation = Constellation::build(cfg.mod_order, cfg.family)?;
        let amplitudes = cfg
            .power_coeffs
            .iter()
            .map(|a| (a * cfg.total_power).sqrt())
            .collect();
        let rotation = phasor(cfg.rotation.angles()[1]);
        Ok(Self {
            cfg,
            constellation,
            amplitudes,
            rotation,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// `sqrt(alpha_n P_T)` for 1-based `user`.
    pub fn amplitude(&self, user: usize) -> f64 {
        self.amplitudes[user - 1]
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// `e^{j theta}` applied to rotated users.
    pub fn rotation_phasor(&self) -> Complex64 {
        self.rotation
    }

    pub fn pattern(&self, phi: usize) -> Result<ImPattern> {
        let limit = self.cfg.pattern_count();
        if phi >= limit {
            return Err(Error::PatternOutOfRange { phi, limit });
        }
        let n = self.cfg.n_users;
        Ok(ImPattern {
            phi,
            rotated: (n - phi + 1)..=n,
        })
    }

    /// Superimposed symbol for point indices `symbols` (one per user) under
    /// rotation pattern `phi`.
    pub fn superimpose(&self, symbols: &[usize], phi: usize) -> Result<Complex64> {
        if symbols.len() != self.cfg.n_users {
            return Err(Error::LengthMismatch {
                expected: self.cfg.n_users,
                got: symbols.len(),
            });
        }
        let order = self.constellation.order();
        if let Some(&index) = symbols.iter().find(|&&s| s >= order) {
            return Err(Error::SymbolNotInConstellation { index, order });
        }
        self.pattern(phi)?;
        Ok(self.superimpose_unchecked(symbols, phi))
    }

    /// [`Self::superimpose`] without argument validation.
    pub fn superimpose_unchecked(&self, symbols: &[usize], phi: usize) -> Complex64 {
        let split = self.cfg.n_users - phi;
        let mut plain = Complex64::new(0.0, 0.0);
        let mut rotated = Complex64::new(0.0, 0.0);
        for (n, (&s, &amp)) in symbols.iter().zip(&self.amplitudes).enumerate() {
            let term = self.constellation.point(s) * amp;
            if n < split {
                plain += term;
            } else {
                rotated += term;
            }
        }
        plain + rotated * self.rotation
    }

    /// Maps symbol bits (user order) and index bits to point indices and a
    /// rotation pattern.
    pub fn pack_bits(&self, symbol_bits: &[Bit], index_bits: &[Bit]) -> Result<(Vec<usize>, usize)> {
        let per_user = self.cfg.bits_per_symbol();
        if symbol_bits.len() != self.cfg.symbol_bits() {
            return Err(Error::BitLength {
                expected: self.cfg.symbol_bits(),
                got: symbol_bits.len(),
            });
        }
        if index_bits.len() != self.cfg.index_bits() {
            return Err(Error::BitLength {
                expected: self.cfg.index_bits(),
                got: index_bits.len(),
            });
        }
        let symbols = symbol_bits
            .chunks(per_user)
            .map(|chunk| self.constellation.index_for_bits(chunk))
            .collect::<Result<Vec<_>>>()?;
        let phi = bits_to_value(index_bits)?;
        Ok((symbols, phi))
    }

    /// Splits a full subcarrier bit-string and packs it.
    pub fn pack_subcarrier(&self, bits: &[Bit]) -> Result<(Vec<usize>, usize)> {
        let p1 = self.cfg.symbol_bits();
        if bits.len() != self.cfg.bits_per_subcarrier() {
            return Err(Error::BitLength {
                expected: self.cfg.bits_per_subcarrier(),
                got: bits.len(),
            });
        }
        self.pack_bits(&bits[..p1], &bits[p1..])
    }

    /// Inverse of [`Self::pack_bits`]: symbol bits followed by index bits.
    pub fn unpack_bits(&self, symbols: &[usize], phi: usize) -> Vec<Bit> {
        let mut out = Vec::with_capacity(self.cfg.bits_per_subcarrier());
        for &s in symbols {
            push_value_bits(self.constellation.label(s), self.cfg.bits_per_symbol(), &mut out);
        }
        push_value_bits(phi, self.cfg.index_bits(), &mut out);
        out
    }

    /// Subcarrier label (MSB-first value of the unpacked bit-string).
    pub fn label_of(&self, symbols: &[usize], phi: usize) -> usize {
        let per_user = self.cfg.bits_per_symbol();
        let mut label = 0usize;
        for &s in symbols {
            label = (label << per_user) | self.constellation.label(s);
        }
        (label << self.cfg.index_bits()) | phi
    }

    pub fn build_super_alphabet(&self) -> Result<SuperAlphabet> {
        self.build_super_alphabet_capped(DEFAULT_ENUMERATION_CAP)
    }

    /// Enumerates every `(s, phi)` realization. Entry `i` carries the
    /// subcarrier bit-string whose MSB-first value is `i`.
    pub fn build_super_alphabet_capped(&self, cap: usize) -> Result<SuperAlphabet> {
        let bits = self.cfg.bits_per_subcarrier();
        if bits >= 127 || (1u128 << bits) > cap as u128 {
            return Err(Error::EnumerationCap {
                size: 1u128.checked_shl(bits as u32).unwrap_or(u128::MAX),
                cap,
            });
        }
        let size = 1usize << bits;
        let per_user = self.cfg.bits_per_symbol();
        let p2 = self.cfg.index_bits();
        let user_mask = (1usize << per_user) - 1;
        let n = self.cfg.n_users;
        let mut entries = Vec::with_capacity(size);
        for label in 0..size {
            let phi = label & ((1 << p2) - 1);
            let symbols: Vec<usize> = (0..n)
                .map(|u| {
                    let shift = p2 + per_user * (n - 1 - u);
                    self.constellation.index_for_label((label >> shift) & user_mask)
                })
                .collect();
            let x = self.superimpose_unchecked(&symbols, phi);
            entries.push(AlphabetEntry { symbols, phi, x });
        }
        Ok(SuperAlphabet {
            entries,
            bits,
            bits_per_symbol: per_user,
            n_users: n,
            index_bits: p2,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphabetEntry {
    pub symbols: Vec<usize>,
    pub phi: usize,
    pub x: Complex64,
}

/// All superimposed symbols of a configuration, indexed by subcarrier label.
#[derive(Clone, Debug)]
pub struct SuperAlphabet {
    entries: Vec<AlphabetEntry>,
    bits: usize,
    bits_per_symbol: usize,
    n_users: usize,
    index_bits: usize,
}

impl SuperAlphabet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AlphabetEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &AlphabetEntry {
        &self.entries[index]
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.x).collect()
    }

    /// Bits per subcarrier, `p`.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn index_bits(&self) -> usize {
        self.index_bits
    }

    pub fn entry_bits(&self, index: usize) -> Vec<Bit> {
        crate::constellation::value_to_bits(index, self.bits)
    }

    /// Label bit mask of `user`'s symbol bits (1-based).
    pub fn user_mask(&self, user: usize) -> usize {
        let shift = self.index_bits + self.bits_per_symbol * (self.n_users - user);
        ((1usize << self.bits_per_symbol) - 1) << shift
    }

    pub fn index_mask(&self) -> usize {
        (1usize << self.index_bits) - 1
    }
}
