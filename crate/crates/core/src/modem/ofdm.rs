//! CP-OFDM modulation/demodulation and WOLA edge windowing.
//!
//! Forward DFT is `sum x e^{-j2pi nk/N}` unscaled, the inverse carries 1/N,
//! so modulate-demodulate round trips are exact.

use crate::error::{Error, Result};
use crate::grid::{QamGrid, SystemConfig};
use crate::modem::Waveform;
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// One CP-OFDM symbol occupies `cp_len + N` samples: inverse DFT of the
/// subcarrier values with the last `cp_len` body samples prepended.
pub fn cp_ofdm_modulate(g: &QamGrid, cfg: &SystemConfig) -> Result<Waveform> {
    cfg.validate()?;
    let (n, m_qam) = g.symbols.dim();
    if n != cfg.n {
        return Err(Error::Shape(format!(
            "grid has {n} subcarriers, config says {}",
            cfg.n
        )));
    }
    let cp = cfg.cp_len();
    let sym_len = cp + n;
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut out = Vec::with_capacity(sym_len * m_qam);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / n as f64;
    for t in 0..m_qam {
        for (ni, v) in buf.iter_mut().enumerate() {
            *v = g.symbols[(ni, t)];
        }
        ifft.process(&mut buf);
        for v in buf.iter_mut() {
            *v *= scale;
        }
        out.extend_from_slice(&buf[n - cp..]);
        out.extend_from_slice(&buf);
    }
    let mut w = Waveform::new(out, cfg.bandwidth_hz);
    w.frame_offsets = vec![0];
    Ok(w)
}

/// Discard each symbol's cyclic prefix and apply the forward DFT.
pub fn cp_ofdm_demodulate(
    w: &Waveform,
    cfg: &SystemConfig,
    m_qam: usize,
) -> Result<Array2<Complex64>> {
    cfg.validate()?;
    let n = cfg.n;
    let cp = cfg.cp_len();
    let sym_len = cp + n;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut r = Array2::zeros((n, m_qam));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..m_qam {
        let body = (t * sym_len + cp) as i64;
        for (i, v) in buf.iter_mut().enumerate() {
            *v = w.get(body + i as i64);
        }
        fft.process(&mut buf);
        for ni in 0..n {
            r[(ni, t)] = buf[ni];
        }
    }
    Ok(r)
}

/// Raised-cosine edge windowing with overlap-add between symbols.
///
/// The transition length is `round(window_rolloff * N)` samples; it must fit
/// inside the cyclic prefix so the receiver's DFT window stays clean. Edges
/// use power-complementary (root-raised-cosine) ramps, which keep the
/// overlapped stream's energy equal to the input's.
pub fn wola_window(w: &Waveform, cfg: &SystemConfig) -> Result<Waveform> {
    cfg.validate()?;
    let n = cfg.n;
    let cp = cfg.cp_len();
    let sym_len = cp + n;
    if !w.len().is_multiple_of(sym_len) {
        return Err(Error::Shape(format!(
            "waveform length {} is not a whole number of {}-sample symbols",
            w.len(),
            sym_len
        )));
    }
    let num_sym = w.len() / sym_len;
    let win = (cfg.window_rolloff * n as f64).round() as usize;
    if win == 0 {
        return Ok(w.clone());
    }
    if win > cp {
        return Err(Error::Config(format!(
            "window transition of {win} samples exceeds the {cp}-sample cyclic prefix"
        )));
    }
    let up: Vec<f64> = (0..win)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / (2.0 * win as f64)).sin())
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); num_sym * sym_len + win];
    for t in 0..num_sym {
        let sym = &w.samples[t * sym_len..(t + 1) * sym_len];
        let base = t * sym_len;
        for (i, &s) in sym.iter().enumerate() {
            let g = if i < win { up[i] } else { 1.0 };
            out[base + i] += s * g;
        }
        // cyclic suffix: the symbol continues periodically into the next
        // symbol's tapered prefix
        for j in 0..win {
            let cont = sym[cp + j]; // body sample j = periodic continuation
            let down = (std::f64::consts::PI * (j as f64 + 0.5) / (2.0 * win as f64)).cos();
            out[base + sym_len + j] += cont * down;
        }
    }
    let mut ww = w.clone();
    ww.samples = out;
    Ok(ww)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Modulation;
    use rand::{Rng, SeedableRng};

    fn random_qam_grid(cfg: &SystemConfig, m_qam: usize, order: usize, seed: u64) -> QamGrid {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let modu = Modulation::new(order).unwrap();
        let mut symbols = Array2::zeros((cfg.n, m_qam));
        for ni in 0..cfg.n {
            if !cfg.is_active(ni) {
                continue;
            }
            for t in 0..m_qam {
                let bits: Vec<bool> = (0..modu.bits_per_symbol()).map(|_| rng.gen()).collect();
                symbols[(ni, t)] = modu.map(&bits);
            }
        }
        QamGrid {
            symbols,
            modulation: modu,
        }
    }

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            n: 64,
            guard_left: 4,
            guard_right: 3,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn round_trip_identity() {
        let cfg = small_cfg();
        let g = random_qam_grid(&cfg, 6, 16, 1);
        let x = cp_ofdm_modulate(&g, &cfg).unwrap();
        assert_eq!(x.len(), 6 * (64 + 2));
        let r = cp_ofdm_demodulate(&x, &cfg, 6).unwrap();
        let worst = r
            .indexed_iter()
            .map(|(idx, v)| (v - g.symbols[idx]).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "max {worst}");
    }

    #[test]
    fn scalar_gain_passes_through() {
        let cfg = small_cfg();
        let g = random_qam_grid(&cfg, 3, 4, 2);
        let mut x = cp_ofdm_modulate(&g, &cfg).unwrap();
        for v in x.samples.iter_mut() {
            *v *= 2.0;
        }
        let r = cp_ofdm_demodulate(&x, &cfg, 3).unwrap();
        let worst = r
            .indexed_iter()
            .map(|(idx, v)| (v - 2.0 * g.symbols[idx]).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10);
    }

    #[test]
    fn two_tap_channel_one_tap_zf_is_exact() {
        // circular convolution inside the CP diagonalizes to per-subcarrier
        // gains H(n); dividing by the known H(n) restores the symbols
        let cfg = small_cfg();
        let g = random_qam_grid(&cfg, 4, 16, 3);
        let x = cp_ofdm_modulate(&g, &cfg).unwrap();
        let taps = [Complex64::new(0.9, 0.1), Complex64::new(-0.2, 0.25)];
        let mut y = vec![Complex64::new(0.0, 0.0); x.len() + 1];
        for (i, &s) in x.samples.iter().enumerate() {
            y[i] += taps[0] * s;
            y[i + 1] += taps[1] * s;
        }
        y.truncate(x.len());
        let wch = Waveform::new(y, cfg.bandwidth_hz);
        let mut r = cp_ofdm_demodulate(&wch, &cfg, 4).unwrap();
        for ni in 0..cfg.n {
            let ph = -2.0 * std::f64::consts::PI * ni as f64 / cfg.n as f64;
            let h = taps[0] + taps[1] * Complex64::from_polar(1.0, ph);
            for t in 0..4 {
                r[(ni, t)] /= h;
            }
        }
        let worst = r
            .indexed_iter()
            .filter(|((ni, _), _)| cfg.is_active(*ni))
            .map(|(idx, v)| (v - g.symbols[idx]).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "max {worst}");
    }

    #[test]
    fn wola_zero_rolloff_is_identity() {
        let cfg = SystemConfig {
            window_rolloff: 0.0,
            ..small_cfg()
        };
        let g = random_qam_grid(&cfg, 3, 4, 4);
        let x = cp_ofdm_modulate(&g, &cfg).unwrap();
        let y = wola_window(&x, &cfg).unwrap();
        assert_eq!(x.samples, y.samples);
    }

    #[test]
    fn wola_rejects_transition_beyond_cp() {
        // default 1/32 CP of a 64-subcarrier symbol is 2 samples
        let cfg = SystemConfig {
            window_rolloff: 0.25,
            ..small_cfg()
        };
        let g = random_qam_grid(&cfg, 3, 4, 5);
        let x = cp_ofdm_modulate(&g, &cfg).unwrap();
        assert!(matches!(wola_window(&x, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn wola_preserves_energy_and_round_trip() {
        let cfg = SystemConfig {
            cp_fraction: (1, 8),
            window_rolloff: 0.05,
            ..small_cfg()
        };
        let g = random_qam_grid(&cfg, 8, 16, 6);
        let x = cp_ofdm_modulate(&g, &cfg).unwrap();
        let y = wola_window(&x, &cfg).unwrap();
        assert!((y.energy() / x.energy() - 1.0).abs() < 0.01);
        // the taper stays inside the CP: demodulation is unaffected
        let r = cp_ofdm_demodulate(&y, &cfg, 8).unwrap();
        let worst = r
            .indexed_iter()
            .filter(|((ni, _), _)| cfg.is_active(*ni))
            .map(|(idx, v)| (v - g.symbols[idx]).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "max {worst}");
    }
}
