//! Bit-error accounting, spectral estimation, PAPR and the closed-form
//! oracles the experiment suite checks itself against.

use crate::error::{Error, Result};
use crate::modem::Waveform;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Outcome of one bit-error measurement.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BerRecord {
    pub bit_errors: u64,
    pub bits: u64,
}

impl BerRecord {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }

    pub fn merge(&mut self, other: &BerRecord) {
        self.bit_errors += other.bit_errors;
        self.bits += other.bits;
    }

    /// 95% normal-approximation binomial confidence half-width.
    pub fn ci_halfwidth(&self) -> f64 {
        let p = self.ber();
        1.96 * (p * (1.0 - p) / self.bits as f64).sqrt()
    }
}

/// Exact Hamming-distance ratio between two equal-length bit streams.
pub fn ber_count(tx: &[bool], rx: &[bool]) -> Result<BerRecord> {
    if tx.len() != rx.len() {
        return Err(Error::Shape(format!(
            "bit streams differ in length: {} vs {}",
            tx.len(),
            rx.len()
        )));
    }
    if tx.is_empty() {
        return Err(Error::Domain("empty bit streams".into()));
    }
    let bit_errors = tx.iter().zip(rx).filter(|(a, b)| a != b).count() as u64;
    Ok(BerRecord {
        bit_errors,
        bits: tx.len() as u64,
    })
}

/// Gaussian tail probability via the complementary error function.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / f64::sqrt(2.0))
}

/// Inverse of [`q_function`] by bisection (oracle-grade).
pub fn q_function_inv(p: f64) -> f64 {
    assert!(p > 0.0 && p < 0.5);
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// QPSK bit error rate in AWGN: `Q(sqrt(2 Eb/N0))`.
pub fn theoretical_ber_qpsk_awgn(eb_n0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(eb_n0_db / 10.0)).sqrt())
}

/// Post-detection SINR under a polarization angular mismatch of `theta`:
/// `SNR - 10 log10(1 + tan^2 theta)` dB.
pub fn theoretical_sinr_angular(snr_db: f64, theta_deg: f64) -> f64 {
    assert!(theta_deg < 90.0);
    let t = theta_deg.to_radians().tan();
    snr_db - 10.0 * (1.0 + t * t).log10()
}

/// Averaged modified periodogram.
#[derive(Debug, Clone)]
pub struct PsdEstimate {
    /// Frequency axis in subcarrier spacings from band center.
    pub freq_sub: Vec<f64>,
    /// Density in dB, normalized to a 0 dB peak.
    pub density_db: Vec<f64>,
    pub segment_len: usize,
    pub overlap: usize,
    pub segments: usize,
    pub window: &'static str,
}

fn blackman_harris(len: usize) -> Vec<f64> {
    let a = [0.35875, 0.48829, 0.14128, 0.01168];
    (0..len)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64;
            a[0] - a[1] * x.cos() + a[2] * (2.0 * x).cos() - a[3] * (3.0 * x).cos()
        })
        .collect()
}

/// Welch-style averaged periodogram with a 4-term Blackman-Harris taper
/// (sidelobes well below the out-of-band levels being compared). The axis
/// is scaled to subcarrier spacings of an `n`-subcarrier system.
pub fn psd_periodogram(
    w: &Waveform,
    n: usize,
    segment_len: usize,
    overlap: usize,
) -> Result<PsdEstimate> {
    if w.len() < segment_len {
        return Err(Error::Shape(format!(
            "waveform of {} samples shorter than one {segment_len}-sample segment",
            w.len()
        )));
    }
    if overlap >= segment_len {
        return Err(Error::Config(
            "overlap must be smaller than the segment".into(),
        ));
    }
    let step = segment_len - overlap;
    let win = blackman_harris(segment_len);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment_len);
    let mut acc = vec![0.0f64; segment_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + segment_len <= w.len() {
        for i in 0..segment_len {
            buf[i] = w.samples[start + i] * win[i];
        }
        fft.process(&mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    // fftshift and normalize the peak to 0 dB
    let half = segment_len / 2;
    let mut density: Vec<f64> = (0..segment_len)
        .map(|i| acc[(i + half) % segment_len] / segments as f64)
        .collect();
    let peak = density.iter().cloned().fold(f64::MIN, f64::max);
    if peak <= 0.0 {
        return Err(Error::Domain("zero-power input".into()));
    }
    let floor = peak * 1e-30;
    for v in density.iter_mut() {
        *v = 10.0 * (v.max(floor) / peak).log10();
    }
    let freq_sub: Vec<f64> = (0..segment_len)
        .map(|i| (i as f64 - half as f64) * n as f64 / segment_len as f64)
        .collect();
    Ok(PsdEstimate {
        freq_sub,
        density_db: density,
        segment_len,
        overlap,
        segments,
        window: "blackman-harris-4",
    })
}

/// Mean out-of-band density beyond `band_edge + guard_offset` (subcarrier
/// units, both sides) relative to the in-band mean, in dB. Returns the
/// reporting floor of -150 dB for spectra with no measurable leakage.
pub fn oob_power(p: &PsdEstimate, band_edge_sub: f64, guard_offset_sub: f64) -> f64 {
    let cut = band_edge_sub + guard_offset_sub;
    let mut inb = 0.0;
    let mut n_in = 0usize;
    let mut out = 0.0;
    let mut n_out = 0usize;
    for (f, d) in p.freq_sub.iter().zip(&p.density_db) {
        let lin = 10f64.powf(d / 10.0);
        if f.abs() <= band_edge_sub {
            inb += lin;
            n_in += 1;
        } else if f.abs() >= cut {
            out += lin;
            n_out += 1;
        }
    }
    if n_in == 0 || n_out == 0 || out == 0.0 {
        return -150.0;
    }
    (10.0 * ((out / n_out as f64) / (inb / n_in as f64)).log10()).max(-150.0)
}

/// Complementary CDF of the instantaneous power over the mean power, on a
/// 0..12 dB threshold grid. `oversample` interpolates the waveform by
/// zero-padded FFT before measuring.
pub fn papr_ccdf(w: &Waveform, oversample: usize) -> Result<Vec<(f64, f64)>> {
    if w.mean_power() <= 0.0 {
        return Err(Error::Domain("zero-power input".into()));
    }
    let samples: Vec<Complex64> = if oversample > 1 {
        let len = w.len();
        let big = len * oversample;
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(big);
        let mut spec = w.samples.clone();
        fft.process(&mut spec);
        let mut padded = vec![Complex64::new(0.0, 0.0); big];
        let half = len / 2;
        padded[..half].copy_from_slice(&spec[..half]);
        padded[big - (len - half)..].copy_from_slice(&spec[half..]);
        ifft.process(&mut padded);
        for v in padded.iter_mut() {
            *v /= len as f64;
        }
        padded
    } else {
        w.samples.clone()
    };
    let mean: f64 = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
    let mut out = Vec::new();
    let mut t = 0.0;
    while t <= 12.0 + 1e-9 {
        let thresh = mean * 10f64.powf(t / 10.0);
        let count = samples.iter().filter(|s| s.norm_sqr() > thresh).count();
        out.push((t, count as f64 / samples.len() as f64));
        t += 0.25;
    }
    Ok(out)
}
