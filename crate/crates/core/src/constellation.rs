//! Base M-ary constellations with Gray labels, and the rotation set used by
//! the index-modulation operation.
//!
//! Bits are `u8` values restricted to 0/1. A label is the MSB-first integer
//! value of a point's bit-string.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Bit = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Psk,
    Qam,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Psk => write!(f, "psk"),
            Family::Qam => write!(f, "qam"),
        }
    }
}

/// Binary-reflected Gray code.
pub fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

/// MSB-first bit-string to integer.
pub fn bits_to_value(bits: &[Bit]) -> Result<usize> {
    bits.iter().try_fold(0usize, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b as usize),
        other => Err(Error::BitValue(other)),
    })
}

/// Appends the `width` low bits of `value`, MSB first.
pub fn push_value_bits(value: usize, width: usize, out: &mut Vec<Bit>) {
    for shift in (0..width).rev() {
        out.push(((value >> shift) & 1) as Bit);
    }
}

pub fn value_to_bits(value: usize, width: usize) -> Vec<Bit> {
    let mut out = Vec::with_capacity(width);
    push_value_bits(value, width, &mut out);
    out
}

/// `e^{j angle}`, exact for integer multiples of a quarter turn so that
/// rotating by π/2 maps lattice points onto lattice points bit-exactly.
pub fn phasor(angle: f64) -> Complex64 {
    let quarters = angle / FRAC_PI_2;
    let nearest = quarters.round();
    if (quarters - nearest).abs() < 1e-12 {
        match (nearest as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    } else {
        Complex64::cis(angle)
    }
}

/// An ordered set of unit-average-power points with a Gray bit labeling.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    labels: Vec<usize>,
    by_label: Vec<usize>,
    bits: usize,
}

impl Constellation {
    pub fn build(order: usize, family: Family) -> Result<Self> {
        let unsupported = Error::UnsupportedConstellation { order, family };
        if order < 2 || !order.is_power_of_two() {
            return Err(unsupported);
        }
        let bits = order.trailing_zeros() as usize;
        let (raw, labels): (Vec<Complex64>, Vec<usize>) = match family {
            Family::Psk => psk_points(order),
            Family::Qam => match order {
                4 | 16 | 64 => rect_qam_points(bits / 2, bits / 2),
                8 => rect_qam_points(2, 1),
                _ => return Err(unsupported),
            },
        };
        let power = raw.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        let scale = power.sqrt().recip();
        let points = if (power - 1.0).abs() < 1e-15 {
            raw
        } else {
            raw.into_iter().map(|p| p * scale).collect()
        };
        Self::from_parts(points, labels, bits)
    }

    fn from_parts(points: Vec<Complex64>, labels: Vec<usize>, bits: usize) -> Result<Self> {
        let order = points.len();
        let mut by_label = vec![usize::MAX; order];
        for (index, &label) in labels.iter().enumerate() {
            if label >= order || by_label[label] != usize::MAX {
                return Err(Error::Config(format!(
                    "labels do not form a bijection (label {label})"
                )));
            }
            by_label[label] = index;
        }
        Ok(Self {
            points,
            labels,
            by_label,
            bits,
        })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    pub fn index_for_label(&self, label: usize) -> usize {
        self.by_label[label]
    }

    pub fn average_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order() as f64
    }

    /// Multiplies every point by `e^{j angle}`; labels stay attached to the
    /// same (now rotated) points.
    pub fn rotate(&self, angle: f64) -> Self {
        let turn = phasor(angle);
        Self {
            points: self.points.iter().map(|p| p * turn).collect(),
            labels: self.labels.clone(),
            by_label: self.by_label.clone(),
            bits: self.bits,
        }
    }

    /// Point index carrying `bits`.
    pub fn index_for_bits(&self, bits: &[Bit]) -> Result<usize> {
        if bits.len() != self.bits {
            return Err(Error::BitLength {
                expected: self.bits,
                got: bits.len(),
            });
        }
        Ok(self.by_label[bits_to_value(bits)?])
    }

    pub fn map_bits(&self, bits: &[Bit]) -> Result<Complex64> {
        Ok(self.points[self.index_for_bits(bits)?])
    }

    pub fn bits_of(&self, index: usize) -> Vec<Bit> {
        value_to_bits(self.labels[index], self.bits)
    }
}

fn psk_points(order: usize) -> (Vec<Complex64>, Vec<usize>) {
    let points = if order == 4 {
        // Exact diagonal QPSK so that quarter-turn rotations are closed on the set.
        [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .iter()
            .map(|&(re, im)| Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2))
            .collect()
    } else {
        (0..order)
            .map(|k| phasor(TAU * k as f64 / order as f64))
            .collect()
    };
    let labels = (0..order).map(gray).collect();
    (points, labels)
}

/// Unnormalized rectangular grid on odd integers, Gray coded per axis.
fn rect_qam_points(i_bits: usize, q_bits: usize) -> (Vec<Complex64>, Vec<usize>) {
    let i_levels = 1usize << i_bits;
    let q_levels = 1usize << q_bits;
    let level = |k: usize, n: usize| (2 * k) as f64 - (n - 1) as f64;
    let mut points = Vec::with_capacity(i_levels * q_levels);
    let mut labels = Vec::with_capacity(i_levels * q_levels);
    for i in 0..i_levels {
        for q in 0..q_levels {
            points.push(Complex64::new(level(i, i_levels), level(q, q_levels)));
            labels.push((gray(i) << q_bits) | gray(q));
        }
    }
    (points, labels)
}

/// Rotation angles available to the index-modulation operation. The first
/// angle is always zero (unrotated).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RotationSet {
    angles: Vec<f64>,
}

impl RotationSet {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        match angles.first() {
            Some(&0.0) => {}
            _ => return Err(Error::Config("rotation set must start with angle 0".into())),
        }
        for (i, a) in angles.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::Config(format!("rotation angle {a} is not finite")));
            }
            for b in &angles[..i] {
                let diff = (a - b).rem_euclid(TAU);
                if diff < 1e-12 || TAU - diff < 1e-12 {
                    return Err(Error::Config(format!(
                        "rotation angles {b} and {a} coincide modulo 2π"
                    )));
                }
            }
        }
        Ok(Self { angles })
    }

    /// `{0, π/2}`.
    pub fn quarter_turn() -> Self {
        Self {
            angles: vec![0.0, FRAC_PI_2],
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

impl Default for RotationSet {
    fn default() -> Self {
        Self::quarter_turn()
    }
}

impl TryFrom<Vec<f64>> for RotationSet {
    type Error = Error;

    fn try_from(angles: Vec<f64>) -> Result<Self> {
        Self::new(angles)
    }
}

impl From<RotationSet> for Vec<f64> {
    fn from(set: RotationSet) -> Self {
        set.angles
    }
}
