//! Pairwise error probabilities over Rayleigh fading and the bit-weighted
//! union bound on ML-detection BER.
//!
//! Conditioned on the fade `h`, confusing `x_i` for `x_j` has probability
//! `Q(sqrt(|h|^2 |delta|^2 / (2 sigma^2)))` with `delta = x_j - x_i`. The
//! unconditional PEP integrates that over the unit-mean exponential density
//! of `|h|^2`. Alphabet points are taken with their transmit amplitudes
//! already applied, so no extra power factor enters the argument.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::superposition::SuperAlphabet;

/// Relative tolerance of the PEP quadrature.
pub const PEP_REL_TOL: f64 = 1e-8;

/// Gaussian tail probability, `Q(t) = erfc(t / sqrt 2) / 2`.
pub fn q_function(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// Average PEP over `h ~ CN(0, 1)` for difference `delta` and noise
/// variance `sigma2`.
pub fn pep_rayleigh(delta: Complex64, sigma2: f64) -> Result<f64> {
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::NonPositiveNoise(sigma2));
    }
    Ok(pep_rayleigh_scaled(delta.norm_sqr() / (2.0 * sigma2)))
}

/// `int_0^inf Q(sqrt(a u)) e^{-u} du`, integrated in `t = sqrt(u)` where the
/// integrand `2 t e^{-t^2} Q(sqrt(a) t)` is smooth at the origin.
fn pep_rayleigh_scaled(a: f64) -> f64 {
    if a == 0.0 {
        return 0.5;
    }
    if a.is_infinite() {
        return 0.0;
    }
    let root = a.sqrt();
    // Integrand is bounded by t exp(-(1 + a/2) t^2); beyond this limit the
    // remaining mass is below e^-60 of the bound's total.
    let upper = (60.0 / (1.0 + 0.5 * a)).sqrt();
    integrate(
        |t| 2.0 * t * (-t * t).exp() * q_function(root * t),
        0.0,
        upper,
        PEP_REL_TOL,
        0.0,
    )
    .value
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseTerm {
    pub i: usize,
    pub j: usize,
    pub delta: Complex64,
    pub bit_errors: u32,
    pub pep: f64,
}

/// Every ordered pair `i != j` of a labeled alphabet.
pub fn pairwise_terms(points: &[Complex64], labels: &[usize], sigma2: f64) -> Result<Vec<PairwiseTerm>> {
    check_labels(points, labels)?;
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::NonPositiveNoise(sigma2));
    }
    let rows: Vec<Vec<PairwiseTerm>> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            (0..points.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let delta = points[j] - points[i];
                    PairwiseTerm {
                        i,
                        j,
                        delta,
                        bit_errors: (labels[i] ^ labels[j]).count_ones(),
                        pep: pep_rayleigh_scaled(delta.norm_sqr() / (2.0 * sigma2)),
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn check_labels(points: &[Complex64], labels: &[usize]) -> Result<()> {
    let size = points.len();
    if labels.len() != size {
        return Err(Error::Alphabet(format!(
            "{} labels for {} points",
            labels.len(),
            size
        )));
    }
    if size < 2 || !size.is_power_of_two() {
        return Err(Error::Alphabet(format!(
            "alphabet size {size} is not a power of two"
        )));
    }
    let mut seen = vec![false; size];
    for &l in labels {
        if l >= size || std::mem::replace(&mut seen[l], true) {
            return Err(Error::Alphabet(format!("label {l} repeated or out of range")));
        }
    }
    Ok(())
}

/// Union bound with per-group breakdown. Each group is a label bit mask;
/// its bound is normalized by the group's own bit count.
#[derive(Clone, Debug, PartialEq)]
pub struct UnionBound {
    pub aggregate: f64,
    pub groups: Vec<f64>,
}

/// `(1 / (p 2^p)) sum_i sum_{j != i} PEP(x_i, x_j) e(x_i, x_j)`, plus the same
/// sum restricted to each mask in `group_masks`.
pub fn union_bound_masked(
    points: &[Complex64],
    labels: &[usize],
    group_masks: &[usize],
    sigma2: f64,
) -> Result<UnionBound> {
    let terms = pairwise_terms(points, labels, sigma2)?;
    let size = points.len() as f64;
    let p = points.len().trailing_zeros();
    let mut aggregate = 0.0;
    let mut groups = vec![0.0; group_masks.len()];
    for t in &terms {
        aggregate += t.pep * t.bit_errors as f64;
        let diff = labels[t.i] ^ labels[t.j];
        for (acc, &mask) in groups.iter_mut().zip(group_masks) {
            *acc += t.pep * (diff & mask).count_ones() as f64;
        }
    }
    aggregate /= p as f64 * size;
    for (acc, &mask) in groups.iter_mut().zip(group_masks) {
        let width = mask.count_ones();
        if width == 0 || mask >> p != 0 {
            return Err(Error::Alphabet(format!("invalid bit group mask {mask:#b}")));
        }
        *acc /= width as f64 * size;
    }
    Ok(UnionBound { aggregate, groups })
}

/// Aggregate union bound on the BER of an ML receiver.
pub fn union_bound_ber(alphabet: &SuperAlphabet, sigma2: f64) -> Result<f64> {
    Ok(per_user_union_bound(alphabet, sigma2)?.aggregate)
}

/// Union bound split by bit ownership: one group per user's symbol bits
/// (`groups[0]` is `U_1`), followed by the index-bit group when present.
pub fn per_user_union_bound(alphabet: &SuperAlphabet, sigma2: f64) -> Result<UnionBound> {
    let points = alphabet.points();
    let labels: Vec<usize> = (0..alphabet.len()).collect();
    let mut masks: Vec<usize> = (1..=alphabet.n_users()).map(|u| alphabet.user_mask(u)).collect();
    if alphabet.index_bits() > 0 {
        masks.push(alphabet.index_mask());
    }
    union_bound_masked(&points, &labels, &masks, sigma2)
}
