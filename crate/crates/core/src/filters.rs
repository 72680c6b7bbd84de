//! Prototype pulse design for the FBMC variants.
//!
//! All pulses are length `L = K*N` real sequences with unit energy and even
//! symmetry about the center `(L-1)/2`. `K` is the overlap factor (the pulse
//! spans `K` QAM symbol periods of `N` samples each).

use crate::error::{Error, Result};
use crate::Result as CrateResult;
use rustfft::{num_complex::Complex64, FftPlanner};
use std::f64::consts::PI;
use std::io::Write;

pub const SUPPORTED_K: [usize; 6] = [2, 3, 4, 6, 8, 16];

/// PHYDYAS frequency-sampling coefficients H_1..H_{K-1} (H_0 = 1).
fn phydyas_coeffs(k: usize) -> Option<&'static [f64]> {
    const K2: [f64; 1] = [std::f64::consts::FRAC_1_SQRT_2];
    const K3: [f64; 2] = [0.911_437_827_766_148, 0.411_437_827_766_148];
    const K4: [f64; 3] = [0.971_959_83, std::f64::consts::FRAC_1_SQRT_2, 0.235_146_95];
    match k {
        2 => Some(&K2),
        3 => Some(&K3),
        4 => Some(&K4),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Srrc,
    Phydyas,
    Iota,
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterKind::Srrc => write!(f, "srrc"),
            FilterKind::Phydyas => write!(f, "phydyas"),
            FilterKind::Iota => write!(f, "iota"),
        }
    }
}

/// A designed prototype pulse.
#[derive(Debug, Clone)]
pub struct PrototypeFilter {
    pub kind: FilterKind,
    /// Overlap factor.
    pub k: usize,
    /// Subcarrier count (samples per QAM symbol period).
    pub n: usize,
    /// Roll-off (SRRC only).
    pub alpha: Option<f64>,
    /// Unit-energy coefficients, length `k * n`.
    pub coeffs: Vec<f64>,
}

impl PrototypeFilter {
    pub fn design(kind: FilterKind, k: usize, n: usize, alpha: Option<f64>) -> Result<Self> {
        if !SUPPORTED_K.contains(&k) {
            return Err(Error::UnsupportedDesign(format!(
                "overlap factor K={k} not in {SUPPORTED_K:?}"
            )));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Domain(format!(
                "subcarrier count N={n} must be a power of two >= 16"
            )));
        }
        match kind {
            FilterKind::Srrc => {
                let a = alpha.unwrap_or(2.0 / k as f64);
                if !(a > 0.0 && a <= 1.0) {
                    return Err(Error::Domain(format!("roll-off {a} outside (0, 1]")));
                }
                Ok(Self {
                    kind,
                    k,
                    n,
                    alpha: Some(a),
                    coeffs: srrc_impulse(k, n, a)?,
                })
            }
            FilterKind::Phydyas => {
                if alpha.is_some() {
                    return Err(Error::Domain("roll-off applies to SRRC only".into()));
                }
                Ok(Self {
                    kind,
                    k,
                    n,
                    alpha: None,
                    coeffs: phydyas_impulse(k, n)?,
                })
            }
            FilterKind::Iota => {
                if alpha.is_some() {
                    return Err(Error::Domain("roll-off applies to SRRC only".into()));
                }
                Ok(Self {
                    kind,
                    k,
                    n,
                    alpha: None,
                    coeffs: iota_impulse(k, n)?,
                })
            }
        }
    }

    /// Pulse length `K * N`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Descriptor used in artifact provenance, e.g. `srrc-k8-a0.25`.
    pub fn descriptor(&self) -> String {
        match self.alpha {
            Some(a) => format!("{}-k{}-a{}", self.kind, self.k, a),
            None => format!("{}-k{}", self.kind, self.k),
        }
    }

    /// CSV export with header `k,coeff`, 14 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> CrateResult<()> {
        writeln!(w, "k,coeff")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            writeln!(w, "{i},{c:.14e}")?;
        }
        Ok(())
    }
}

/// One sample of the square-root raised cosine pulse, `t` in symbol periods.
/// The removable singularities at `t = 0` and `|t| = 1/(4a)` use their
/// analytic limits.
pub fn srrc_sample(t: f64, alpha: f64) -> f64 {
    if t.abs() < 1e-10 {
        return 1.0 - alpha + 4.0 * alpha / PI;
    }
    let x = 4.0 * alpha * t;
    if (1.0 - x * x).abs() < 1e-8 {
        let s = PI / (4.0 * alpha);
        return alpha / f64::sqrt(2.0) * ((1.0 + 2.0 / PI) * s.sin() + (1.0 - 2.0 / PI) * s.cos());
    }
    let num = (PI * t * (1.0 - alpha)).sin() + x * (PI * t * (1.0 + alpha)).cos();
    num / (PI * t * (1.0 - x * x))
}

/// SRRC impulse response sampled at `N` samples per symbol period, truncated
/// to `K` periods and energy-normalized.
pub fn srrc_impulse(k: usize, n: usize, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("roll-off {alpha} outside (0, 1]")));
    }
    let l = k * n;
    let center = (l as f64 - 1.0) / 2.0;
    let mut h: Vec<f64> = (0..l)
        .map(|i| srrc_sample((i as f64 - center) / n as f64, alpha))
        .collect();
    normalize(&mut h);
    Ok(h)
}

/// PHYDYAS pulse synthesized from its frequency-sampling coefficients.
pub fn phydyas_impulse(k: usize, n: usize) -> Result<Vec<f64>> {
    let coeffs = phydyas_coeffs(k).ok_or_else(|| {
        Error::UnsupportedDesign(format!("no published PHYDYAS coefficients for K={k}"))
    })?;
    let l = k * n;
    let center = (l as f64 - 1.0) / 2.0;
    let mut h = vec![1.0f64; l];
    for (li, &c) in coeffs.iter().enumerate() {
        let freq = (li + 1) as f64;
        for (i, v) in h.iter_mut().enumerate() {
            *v += 2.0 * c * (2.0 * PI * freq * (i as f64 - center) / l as f64).cos();
        }
    }
    normalize(&mut h);
    Ok(h)
}

/// IOTA pulse: a Gaussian orthogonalized in time then in frequency on the
/// OQAM lattice, sampled on the `K*N` grid and energy-normalized. The
/// Gaussian is placed on the isotropic coordinate where one OQAM time step
/// and one subcarrier spacing both map to 1/sqrt(2).
pub fn iota_impulse(k: usize, n: usize) -> Result<Vec<f64>> {
    if k != 4 {
        return Err(Error::UnsupportedDesign(format!(
            "IOTA is designed for K=4 (requested K={k})"
        )));
    }
    let l = k * n;
    let center = (l as f64 - 1.0) / 2.0;
    let mut g: Vec<f64> = (0..l)
        .map(|i| {
            let u = f64::sqrt(2.0) * (i as f64 - center) / n as f64;
            f64::powf(2.0, 0.25) * (-PI * u * u).exp()
        })
        .collect();

    // Time orthogonalization: divide by the root of the polyphase energy sum
    // over shifts of N/2 samples.
    let half = n / 2;
    let mut class_energy = vec![0.0f64; half];
    for (i, v) in g.iter().enumerate() {
        class_energy[i % half] += v * v;
    }
    for (i, v) in g.iter_mut().enumerate() {
        *v /= class_energy[i % half].sqrt();
    }

    // Frequency orthogonalization: same operation on the spectrum, with the
    // shift period of one subcarrier spacing (K bins).
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(l);
    let ifft = planner.plan_fft_inverse(l);
    let mut spec: Vec<Complex64> = g.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut spec);
    let mut bin_energy = vec![0.0f64; k];
    for (q, v) in spec.iter().enumerate() {
        bin_energy[q % k] += v.norm_sqr();
    }
    for (q, v) in spec.iter_mut().enumerate() {
        *v /= bin_energy[q % k].sqrt();
    }
    ifft.process(&mut spec);

    let mut h: Vec<f64> = spec.iter().map(|v| v.re).collect();
    normalize(&mut h);
    Ok(h)
}

fn normalize(h: &mut [f64]) {
    let e: f64 = h.iter().map(|c| c * c).sum();
    let s = e.sqrt();
    for v in h.iter_mut() {
        *v /= s;
    }
}
