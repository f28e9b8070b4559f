//! Per-subcarrier Rayleigh fading and AWGN, plus the OFDM framing path.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default subcarrier count per OFDM block.
pub const DEFAULT_SUBCARRIERS: usize = 128;

/// Default cyclic-prefix length, `L / 8`.
pub const DEFAULT_CP_LEN: usize = DEFAULT_SUBCARRIERS / 8;

/// Draws one sample of `CN(0, variance)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// `sigma^2 = P_T / 10^{snr/10}`.
pub fn noise_variance(snr_db: f64, total_power: f64) -> f64 {
    total_power / 10f64.powf(snr_db / 10.0)
}

/// Frequency responses `h[n][k]` for every receiver and subcarrier plus the
/// common noise variance. A variance of exactly zero marks a noiseless
/// diagnostic realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    h: Vec<Vec<Complex64>>,
    noise_var: f64,
}

impl ChannelRealization {
    pub fn new(h: Vec<Vec<Complex64>>, noise_var: f64) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::NonPositiveNoise(noise_var));
        }
        if h.iter()
            .flatten()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::Config("channel response must be finite".into()));
        }
        Ok(Self { h, noise_var })
    }

    /// Same responses with noise switched off.
    pub fn without_noise(mut self) -> Self {
        self.noise_var = 0.0;
        self
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise_var == 0.0
    }

    pub fn n_users(&self) -> usize {
        self.h.len()
    }

    pub fn subcarriers(&self) -> usize {
        self.h.first().map_or(0, Vec::len)
    }

    /// Frequency response of 1-based receiver `user`.
    pub fn response(&self, user: usize) -> &[Complex64] {
        &self.h[user - 1]
    }
}

/// I.i.d. `CN(0, 1)` responses for `n_users` receivers over `subcarriers`
/// subcarriers, drawn receiver by receiver.
pub fn draw_channel<R: Rng + ?Sized>(
    n_users: usize,
    subcarriers: usize,
    snr_db: f64,
    total_power: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if !snr_db.is_finite() {
        return Err(Error::Config(format!("SNR {snr_db} dB is not finite")));
    }
    let h = (0..n_users)
        .map(|_| (0..subcarriers).map(|_| complex_gaussian(rng, 1.0)).collect())
        .collect();
    ChannelRealization::new(h, noise_variance(snr_db, total_power))
}

/// `y_k = h_k x_k + w_k` for receiver `user`, with fresh noise from `rng`.
pub fn apply_channel<R: Rng + ?Sized>(
    x: &[Complex64],
    ch: &ChannelRealization,
    user: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if user == 0 || user > ch.n_users() {
        return Err(Error::InvalidUser {
            user,
            n_users: ch.n_users(),
        });
    }
    let mut y = vec![Complex64::default(); x.len()];
    apply_channel_into(x, ch.response(user), ch.noise_var, rng, &mut y)?;
    Ok(y)
}

/// Allocation-free form of [`apply_channel`].
pub fn apply_channel_into<R: Rng + ?Sized>(
    x: &[Complex64],
    h: &[Complex64],
    noise_var: f64,
    rng: &mut R,
    y: &mut [Complex64],
) -> Result<()> {
    if x.len() != h.len() || y.len() != h.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            got: x.len().min(y.len()),
        });
    }
    for ((out, &xk), &hk) in y.iter_mut().zip(x).zip(h) {
        *out = hk * xk;
        if noise_var > 0.0 {
            *out += complex_gaussian(rng, noise_var);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfdmFrame {
    pub freq_symbols: Vec<Complex64>,
    pub time_samples: Vec<Complex64>,
    pub subcarriers: usize,
    pub cp_len: usize,
}

/// Unitary-scaled IFFT/FFT framing with a cyclic prefix.
#[derive(Clone)]
pub struct OfdmModem {
    subcarriers: usize,
    cp_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem")
            .field("subcarriers", &self.subcarriers)
            .field("cp_len", &self.cp_len)
            .finish()
    }
}

impl OfdmModem {
    pub fn new(subcarriers: usize, cp_len: usize) -> Result<Self> {
        if subcarriers == 0 || !subcarriers.is_power_of_two() {
            return Err(Error::Config(format!(
                "subcarrier count must be a power of two, got {subcarriers}"
            )));
        }
        if cp_len >= subcarriers {
            return Err(Error::Config(format!(
                "cyclic prefix {cp_len} must be shorter than {subcarriers} subcarriers"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            subcarriers,
            cp_len,
            forward: planner.plan_fft_forward(subcarriers),
            inverse: planner.plan_fft_inverse(subcarriers),
            scale: (subcarriers as f64).sqrt().recip(),
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn modulate(&self, freq_symbols: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(freq_symbols.len(), self.subcarriers)?;
        let mut block = freq_symbols.to_vec();
        self.inverse.process(&mut block);
        block.iter_mut().for_each(|v| *v *= self.scale);
        let mut out = Vec::with_capacity(self.subcarriers + self.cp_len);
        out.extend_from_slice(&block[self.subcarriers - self.cp_len..]);
        out.extend_from_slice(&block);
        Ok(out)
    }

    pub fn demodulate(&self, time_samples: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(time_samples.len(), self.subcarriers + self.cp_len)?;
        let mut block = time_samples[self.cp_len..].to_vec();
        self.forward.process(&mut block);
        block.iter_mut().for_each(|v| *v *= self.scale);
        Ok(block)
    }

    pub fn frame(&self, freq_symbols: &[Complex64]) -> Result<OfdmFrame> {
        Ok(OfdmFrame {
            freq_symbols: freq_symbols.to_vec(),
            time_samples: self.modulate(freq_symbols)?,
            subcarriers: self.subcarriers,
            cp_len: self.cp_len,
        })
    }

    /// Applies the per-subcarrier response `h` to a CP-prefixed time block
    /// as a circular convolution over the useful part, then refreshes the
    /// prefix.
    pub fn apply_time_domain(&self, time_samples: &[Complex64], h: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(h.len(), self.subcarriers)?;
        let mut spectrum = self.demodulate(time_samples)?;
        spectrum.iter_mut().zip(h).for_each(|(v, hk)| *v *= hk);
        self.modulate(&spectrum)
    }

    /// Full framing path: modulate, fade, demodulate, add frequency-domain
    /// noise.
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        x: &[Complex64],
        h: &[Complex64],
        noise_var: f64,
        rng: &mut R,
    ) -> Result<Vec<Complex64>> {
        let tx = self.modulate(x)?;
        let faded = self.apply_time_domain(&tx, h)?;
        let mut y = self.demodulate(&faded)?;
        if noise_var > 0.0 {
            y.iter_mut().for_each(|v| *v += complex_gaussian(rng, noise_var));
        }
        Ok(y)
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected, got })
        }
    }
}

pub fn ofdm_modulate(freq_symbols: &[Complex64], cp_len: usize) -> Result<Vec<Complex64>> {
    OfdmModem::new(freq_symbols.len(), cp_len)?.modulate(freq_symbols)
}

pub fn ofdm_demodulate(
    time_samples: &[Complex64],
    subcarriers: usize,
    cp_len: usize,
) -> Result<Vec<Complex64>> {
    OfdmModem::new(subcarriers, cp_len)?.demodulate(time_samples)
}
