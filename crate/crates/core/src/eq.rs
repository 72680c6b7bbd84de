//! Scattered pilots, auxiliary-pilot interference cancellation, LS channel
//! estimation with DFT interpolation, one-tap zero-forcing equalization,
//! perfect-channel-knowledge mode, and the genie cross-polarization
//! canceller.

use crate::channel::{apply_channel, DualPolChannelRealization};
use crate::dp::{DpStructure, PolarizedOqamGrid, PolarizedWaveform};
use crate::error::{Error, Result};
use crate::grid::{OqamGrid, QamGrid, SystemConfig};
use crate::interference::LocalizationTable;
use ndarray::Array2;
use num_complex::Complex64;

/// Scattered-pilot layout: equally spaced pilot subcarriers, a pilot QAM
/// instant every `period_qam` symbols, unit-magnitude pseudorandom pilot
/// values, and the auxiliary position adjacent to each pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotLayout {
    /// Absolute subcarrier indices, ordered by centered frequency.
    pub subcarriers: Vec<usize>,
    pub period_qam: usize,
    pub seed: u64,
    /// Lattice offset from pilot to auxiliary symbol.
    pub aux_offset: (i64, i64),
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e3779b97f4a7c15) ^ b.wrapping_mul(0xc2b2ae3d27d4eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl PilotLayout {
    /// Pick `count` equally spaced active subcarriers, starting from the
    /// lowest active frequency with spacing `floor((N - guards) / count)`.
    pub fn for_config(
        cfg: &SystemConfig,
        count: usize,
        period_qam: usize,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if count == 0 || period_qam == 0 {
            return Err(Error::Config(
                "pilot count and period must be positive".into(),
            ));
        }
        let spacing = (cfg.n - cfg.guard_left - cfg.guard_right) / count;
        if spacing == 0 {
            return Err(Error::Config("more pilots than active subcarriers".into()));
        }
        let f_first = -(cfg.n as i64) / 2 + cfg.guard_left as i64;
        let mut subcarriers = Vec::with_capacity(count);
        for i in 0..count {
            let f = f_first + (i * spacing) as i64;
            let n = f.rem_euclid(cfg.n as i64) as usize;
            if !cfg.is_active(n) {
                return Err(Error::Config(format!(
                    "pilot at centered frequency {f} collides with DC/guard"
                )));
            }
            subcarriers.push(n);
        }
        Ok(Self {
            subcarriers,
            period_qam,
            seed,
            aux_offset: (0, 1),
        })
    }

    pub fn pilot_instants_qam(&self, m_qam: usize) -> Vec<usize> {
        (0..m_qam).step_by(self.period_qam).collect()
    }

    /// Real unit-magnitude pilot value for slot `(i, t)`.
    pub fn real_value(&self, sc_index: usize, t_qam: usize) -> f64 {
        if mix(self.seed, sc_index as u64, t_qam as u64) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Complex unit-magnitude (QPSK) pilot value for slot `(i, t)`.
    pub fn qam_value(&self, sc_index: usize, t_qam: usize) -> Complex64 {
        let b = mix(self.seed, sc_index as u64, t_qam as u64);
        let re = if b & 1 == 0 { 1.0 } else { -1.0 };
        let im = if b & 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(re, im) / f64::sqrt(2.0)
    }

    /// One-line reproducibility manifest.
    pub fn to_text(&self) -> String {
        let sc: Vec<String> = self.subcarriers.iter().map(|s| s.to_string()).collect();
        format!(
            "subcarriers={};period_qam={};seed={};aux_offset={},{}",
            sc.join(" "),
            self.period_qam,
            self.seed,
            self.aux_offset.0,
            self.aux_offset.1
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut subcarriers = Vec::new();
        let mut period_qam = 0usize;
        let mut seed = 0u64;
        let mut aux_offset = (0i64, 1i64);
        for field in text.trim().split(';') {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad layout field '{field}'")))?;
            match k {
                "subcarriers" => {
                    subcarriers = v
                        .split_whitespace()
                        .map(|s| {
                            s.parse()
                                .map_err(|_| Error::Config("bad subcarrier".into()))
                        })
                        .collect::<Result<Vec<usize>>>()?;
                }
                "period_qam" => {
                    period_qam = v.parse().map_err(|_| Error::Config("bad period".into()))?
                }
                "seed" => seed = v.parse().map_err(|_| Error::Config("bad seed".into()))?,
                "aux_offset" => {
                    let (a, b) = v
                        .split_once(',')
                        .ok_or_else(|| Error::Config("bad aux_offset".into()))?;
                    aux_offset = (
                        a.parse()
                            .map_err(|_| Error::Config("bad aux_offset".into()))?,
                        b.parse()
                            .map_err(|_| Error::Config("bad aux_offset".into()))?,
                    );
                }
                _ => return Err(Error::Config(format!("unknown layout field '{k}'"))),
            }
        }
        if subcarriers.is_empty() || period_qam == 0 {
            return Err(Error::Config("incomplete pilot layout".into()));
        }
        Ok(Self {
            subcarriers,
            period_qam,
            seed,
            aux_offset,
        })
    }
}

/// One pilot observation point on the OQAM lattice.
#[derive(Debug, Clone, Copy)]
pub struct PilotObs {
    pub sc_index: usize,
    pub n: usize,
    pub m: usize,
    pub value: f64,
}

/// Pilot lattice points for conventional FBMC: the pilot occupies the even
/// half-instant of each pilot QAM slot; the odd half-instant is reserved
/// for the auxiliary symbol.
pub fn fbmc_pilot_map(layout: &PilotLayout, m_qam: usize) -> Vec<PilotObs> {
    let mut obs = Vec::new();
    for t in layout.pilot_instants_qam(m_qam) {
        for (i, &n) in layout.subcarriers.iter().enumerate() {
            obs.push(PilotObs {
                sc_index: i,
                n,
                m: 2 * t,
                value: layout.real_value(i, t),
            });
        }
    }
    obs
}

/// Pilot points for DP-FBMC. Pilot instants alternate their target
/// polarization (H, V, H, ...); within a pilot QAM slot the pilot sits on
/// the half-instant assigned to the target polarization and the auxiliary
/// symbol on the other half-instant, which the structure assigns to the
/// opposite polarization. Frequency multiplexing gives both half-instants
/// to one polarization, so it cannot carry this layout.
pub fn dp_pilot_maps(
    layout: &PilotLayout,
    s: DpStructure,
    m_qam: usize,
) -> Result<(Vec<PilotObs>, Vec<PilotObs>)> {
    if s == DpStructure::Fpdm {
        return Err(Error::Config(
            "frequency-multiplexed structure does not support scattered pilots".into(),
        ));
    }
    let mut obs_h = Vec::new();
    let mut obs_v = Vec::new();
    for (k, t) in layout.pilot_instants_qam(m_qam).into_iter().enumerate() {
        let target_h = k % 2 == 0;
        for (i, &n) in layout.subcarriers.iter().enumerate() {
            let m_even = 2 * t;
            let m = if s.assigns_h(n, m_even) == target_h {
                m_even
            } else {
                m_even + 1
            };
            let value = layout.real_value(i, t);
            if target_h {
                obs_h.push(PilotObs {
                    sc_index: i,
                    n,
                    m,
                    value,
                });
            } else {
                obs_v.push(PilotObs {
                    sc_index: i,
                    n,
                    m,
                    value,
                });
            }
        }
    }
    Ok((obs_h, obs_v))
}

/// Overwrite pilot QAM slots with known QPSK pilot values.
pub fn place_pilots_qam(g: &mut QamGrid, layout: &PilotLayout, cfg: &SystemConfig) -> Result<()> {
    let (n_dim, m_qam) = g.symbols.dim();
    for &n in &layout.subcarriers {
        if n >= n_dim || !cfg.is_active(n) {
            return Err(Error::Config(format!("pilot subcarrier {n} not active")));
        }
    }
    for t in layout.pilot_instants_qam(m_qam) {
        for (i, &n) in layout.subcarriers.iter().enumerate() {
            g.symbols[(n, t)] = layout.qam_value(i, t);
        }
    }
    Ok(())
}

/// Overwrite pilot lattice points with known real values and clear the
/// adjacent auxiliary positions.
pub fn place_pilots_oqam(a: &mut OqamGrid, layout: &PilotLayout, m_qam: usize) -> Result<()> {
    for obs in fbmc_pilot_map(layout, m_qam) {
        if obs.n >= a.n() || obs.m + 1 >= a.m() {
            return Err(Error::Shape("pilot outside grid".into()));
        }
        a.a[(obs.n, obs.m)] = obs.value;
        a.a[(obs.n, obs.m + 1)] = 0.0;
    }
    Ok(())
}

/// Interference at `point` predicted over the table's box (clipped at the
/// grid edges), excluding the `skip` offset.
fn boxed_interference(
    a: &OqamGrid,
    t: &LocalizationTable,
    point: (usize, usize),
    skip: (i64, i64),
) -> Complex64 {
    let (np, mp) = point;
    let mut acc = Complex64::new(0.0, 0.0);
    for dn in -(t.dn as i64)..=t.dn as i64 {
        for dm in -(t.dm as i64)..=t.dm as i64 {
            if (dn, dm) == (0, 0) || (dn, dm) == skip {
                continue;
            }
            let ni = np as i64 + dn;
            let mi = mp as i64 + dm;
            if ni < 0 || ni >= a.n() as i64 || mi < 0 || mi >= a.m() as i64 {
                continue;
            }
            acc += a.a[(ni as usize, mi as usize)] * t.entry_at(dn, dm, mp);
        }
    }
    acc
}

/// Place the auxiliary symbol next to each pilot so the quadrature
/// interference at the pilot cancels. A real symbol can only null the
/// imaginary component; what remains is the pulse's real-orthogonality
/// leakage.
pub fn insert_auxiliary_pilots(
    a: &mut OqamGrid,
    layout: &PilotLayout,
    t: &LocalizationTable,
) -> Result<()> {
    let (dn_aux, dm_aux) = layout.aux_offset;
    let q_aux = t.entry(dn_aux, dm_aux);
    if q_aux.im.abs() < 1e-6 {
        return Err(Error::Config(format!(
            "uncancellable auxiliary position ({dn_aux}, {dm_aux}): weight {q_aux}"
        )));
    }
    let m_qam = a.m() / 2;
    for obs in fbmc_pilot_map(layout, m_qam) {
        let an = obs.n as i64 + dn_aux;
        let am = obs.m as i64 + dm_aux;
        if an < 0 || an >= a.n() as i64 || am < 0 || am >= a.m() as i64 {
            return Err(Error::Shape("auxiliary position outside grid".into()));
        }
        a.a[(an as usize, am as usize)] = 0.0;
        let known = boxed_interference(a, t, (obs.n, obs.m), (dn_aux, dm_aux));
        let q = t.entry_at(dn_aux, dm_aux, obs.m);
        a.a[(an as usize, am as usize)] = -known.im / q.im;
    }
    Ok(())
}

/// DP pilot placement: pilots per [`dp_pilot_maps`]; each auxiliary symbol
/// lands on the opposite polarization and cancels the cross-polarization
/// interference seen at its pilot (the common cross-channel factor divides
/// out, so this works at any XPD).
pub fn dp_place_pilots_and_aux(
    p: &mut PolarizedOqamGrid,
    layout: &PilotLayout,
    t: &LocalizationTable,
) -> Result<()> {
    let m_qam = p.h.m() / 2;
    let (obs_h, obs_v) = dp_pilot_maps(layout, p.structure, m_qam)?;
    for (obs, target_h) in obs_h
        .iter()
        .map(|o| (o, true))
        .chain(obs_v.iter().map(|o| (o, false)))
    {
        let (pilot_grid, aux_grid) = if target_h {
            (&mut p.h, &mut p.v)
        } else {
            (&mut p.v, &mut p.h)
        };
        pilot_grid.a[(obs.n, obs.m)] = obs.value;
        // auxiliary on the partner half-instant of the same QAM slot
        let m_aux = if obs.m % 2 == 0 { obs.m + 1 } else { obs.m - 1 };
        let dm_aux = m_aux as i64 - obs.m as i64;
        aux_grid.a[(obs.n, m_aux)] = 0.0;
        let known = boxed_interference(aux_grid, t, (obs.n, obs.m), (0, dm_aux));
        let q = t.entry_at(0, dm_aux, obs.m);
        if q.im.abs() < 1e-6 {
            return Err(Error::Config("uncancellable auxiliary position".into()));
        }
        aux_grid.a[(obs.n, m_aux)] = -known.im / q.im;
    }
    Ok(())
}

/// Per-lattice-point complex channel gains.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// N x (time instants of the target grid).
    pub gains: Array2<Complex64>,
    pub method: &'static str,
}

/// Exact per-subcarrier frequency response of a realized tap line,
/// constant across the frame (block fading).
pub fn perfect_channel_estimate(
    taps: &[Complex64],
    cfg: &SystemConfig,
    t_count: usize,
) -> ChannelEstimate {
    let n = cfg.n;
    let mut gains = Array2::zeros((n, t_count));
    for ni in 0..n {
        let mut h = Complex64::new(0.0, 0.0);
        for (d, &tap) in taps.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * ni as f64 * d as f64 / n as f64;
            h += tap * Complex64::from_polar(1.0, ph);
        }
        for t in 0..t_count {
            gains[(ni, t)] = h;
        }
    }
    ChannelEstimate {
        gains,
        method: "pck",
    }
}

/// Transform-domain interpolation of pilot gains across the band: IDFT of
/// the pilot comb evaluated back at every subcarrier. Exact at the pilots.
/// Delay-domain truncation (the usual denoising step) is deliberately
/// omitted: with this comb geometry the delay bins are not sample-aligned,
/// and truncation rings at the band edges worse than the noise it removes.
fn dft_interpolate(
    pilot_gains: &[Complex64],
    f_first: i64,
    spacing: usize,
    cfg: &SystemConfig,
) -> Vec<Complex64> {
    let p = pilot_gains.len();
    let mut ht = vec![Complex64::new(0.0, 0.0); p];
    for (l, h) in ht.iter_mut().enumerate() {
        for (i, g) in pilot_gains.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * (i * l) as f64 / p as f64;
            *h += g * Complex64::from_polar(1.0, ph);
        }
        *h /= p as f64;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.n];
    let denom = (p * spacing) as f64;
    for (n, o) in out.iter_mut().enumerate() {
        let f = cfg.centered(n) as f64 - f_first as f64;
        for (l, h) in ht.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * l as f64 * f / denom;
            *o += h * Complex64::from_polar(1.0, ph);
        }
    }
    out
}

fn hold_fill(gains_at: &[(usize, Vec<Complex64>)], n: usize, t_count: usize) -> Array2<Complex64> {
    let mut gains = Array2::zeros((n, t_count));
    for t in 0..t_count {
        // latest estimation instant at or before t, else the first
        let snap = gains_at
            .iter()
            .rev()
            .find(|(ti, _)| *ti <= t)
            .or_else(|| gains_at.first())
            .expect("at least one pilot instant");
        for ni in 0..n {
            gains[(ni, t)] = snap.1[ni];
        }
    }
    gains
}

/// LS estimation for CP-OFDM: per-pilot gain `r/p`, DFT interpolation
/// across subcarriers, hold across time.
pub fn ls_estimate_ofdm(
    r: &Array2<Complex64>,
    layout: &PilotLayout,
    cfg: &SystemConfig,
) -> Result<ChannelEstimate> {
    let (n, m_qam) = r.dim();
    if n != cfg.n {
        return Err(Error::Shape("grid/config subcarrier mismatch".into()));
    }
    let spacing = (cfg.n - cfg.guard_left - cfg.guard_right) / layout.subcarriers.len();
    let f_first = cfg.centered(layout.subcarriers[0]);
    let mut snaps = Vec::new();
    for t in layout.pilot_instants_qam(m_qam) {
        let gains: Vec<Complex64> = layout
            .subcarriers
            .iter()
            .enumerate()
            .map(|(i, &np)| r[(np, t)] / layout.qam_value(i, t))
            .collect();
        snaps.push((t, dft_interpolate(&gains, f_first, spacing, cfg)));
    }
    Ok(ChannelEstimate {
        gains: hold_fill(&snaps, n, m_qam),
        method: "ls_dft",
    })
}

/// LS estimation for FBMC-family systems from real-valued pilots on the
/// OQAM lattice (auxiliary cancellation assumed already applied at the
/// transmitter). The estimate is indexed per half-instant.
pub fn ls_estimate_fbmc(
    r: &Array2<Complex64>,
    obs: &[PilotObs],
    layout: &PilotLayout,
    cfg: &SystemConfig,
) -> Result<ChannelEstimate> {
    let (n, m_count) = r.dim();
    if n != cfg.n {
        return Err(Error::Shape("grid/config subcarrier mismatch".into()));
    }
    if obs.is_empty() {
        return Err(Error::Config("no pilot observations".into()));
    }
    let spacing = (cfg.n - cfg.guard_left - cfg.guard_right) / layout.subcarriers.len();
    let f_first = cfg.centered(layout.subcarriers[0]);
    let mut by_m: std::collections::BTreeMap<usize, Vec<&PilotObs>> = Default::default();
    for o in obs {
        if o.value == 0.0 {
            return Err(Error::Domain("pilot magnitude zero".into()));
        }
        by_m.entry(o.m).or_default().push(o);
    }
    let mut snaps = Vec::new();
    for (m, group) in by_m {
        let mut gains = vec![Complex64::new(0.0, 0.0); layout.subcarriers.len()];
        for o in group {
            gains[o.sc_index] = r[(o.n, o.m)] / o.value;
        }
        snaps.push((m, dft_interpolate(&gains, f_first, spacing, cfg)));
    }
    Ok(ChannelEstimate {
        gains: hold_fill(&snaps, n, m_count),
        method: "ls_dft",
    })
}

/// One-tap zero forcing: divide every lattice point by its estimated gain.
/// Gains below 1e-12 flag an erasure (the point is zeroed, not divided).
pub fn zf_equalize(r: &mut Array2<Complex64>, est: &ChannelEstimate) {
    for ((ni, t), v) in r.indexed_iter_mut() {
        let g = est.gains[(ni, t)];
        if g.norm() < 1e-12 {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v /= g;
        }
    }
}

/// Genie cross-polarization canceller: reconstruct each receive stream's
/// cross-polarized contribution from the known realization and transmitted
/// opposite-polarization waveform, and subtract it before demodulation.
pub fn xpol_cancel_ideal(
    rx: &PolarizedWaveform,
    tx: &PolarizedWaveform,
    ch: &DualPolChannelRealization,
) -> PolarizedWaveform {
    let sub = |r: &crate::modem::Waveform, c: crate::modem::Waveform| {
        let mut out = r.clone();
        for (i, s) in c.samples.iter().enumerate() {
            if i < out.samples.len() {
                out.samples[i] -= s;
            }
        }
        out
    };
    PolarizedWaveform {
        h: sub(&rx.h, apply_channel(&tx.v, &ch.vh)),
        v: sub(&rx.v, apply_channel(&tx.h, &ch.hv)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::dp_split;
    use crate::filters::{FilterKind, PrototypeFilter};
    use crate::interference::localization_table;

    fn cfg512() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn default_layout_counts() {
        let cfg = cfg512();
        let layout = PilotLayout::for_config(&cfg, 30, 4, 7).unwrap();
        assert_eq!(layout.subcarriers.len(), 30);
        // spacing floor(479/30) = 15 in centered frequency
        let f0 = cfg.centered(layout.subcarriers[0]);
        let f1 = cfg.centered(layout.subcarriers[1]);
        assert_eq!(f0, -239);
        assert_eq!(f1 - f0, 15);
        for &n in &layout.subcarriers {
            assert!(cfg.is_active(n));
        }
        assert_eq!(layout.pilot_instants_qam(16), vec![0, 4, 8, 12]);
    }

    #[test]
    fn layout_text_round_trip() {
        let cfg = cfg512();
        let layout = PilotLayout::for_config(&cfg, 30, 4, 99).unwrap();
        let back = PilotLayout::from_text(&layout.to_text()).unwrap();
        assert_eq!(layout, back);
        assert!(PilotLayout::from_text("period_qam=4").is_err());
    }

    #[test]
    fn pilot_budget_matches_across_systems() {
        // CP-OFDM: 120 complex pilot slots. FBMC: 120 pilots + 120 aux real
        // symbols = the same 120 QAM slots of capacity. DP likewise.
        let cfg = cfg512();
        let layout = PilotLayout::for_config(&cfg, 30, 4, 7).unwrap();
        let m_qam = 16;
        let ofdm_slots = layout.pilot_instants_qam(m_qam).len() * layout.subcarriers.len();
        let fbmc_points = fbmc_pilot_map(&layout, m_qam).len() * 2; // pilot + aux
        assert_eq!(ofdm_slots, 120);
        assert_eq!(fbmc_points, 240);
        let (h, v) = dp_pilot_maps(&layout, DpStructure::Tpdm, m_qam).unwrap();
        assert_eq!((h.len() + v.len()) * 2, 240);
    }

    #[test]
    fn fpdm_pilots_rejected() {
        let cfg = cfg512();
        let layout = PilotLayout::for_config(&cfg, 30, 4, 7).unwrap();
        assert!(dp_pilot_maps(&layout, DpStructure::Fpdm, 16).is_err());
    }

    #[test]
    fn two_term_cancellation_example() {
        // one data neighbor at (n', m'+1), auxiliary at (n', m'-1): the two
        // weights are negatives of each other, so the auxiliary value is +1
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 64, None).unwrap();
        let t = localization_table(&f, 2, 2).unwrap();
        let mut a = OqamGrid::zeros(64, 8);
        let n_p = 30usize;
        a.a[(n_p, 3)] = 1.0; // neighbor at (n', m'+1) of the pilot at m=2
        let known = boxed_interference(&a, &t, (n_p, 2), (0, -1));
        let q = t.entry_at(0, -1, 2);
        let aux = -known.im / q.im;
        assert!((aux - 1.0).abs() < 1e-9, "aux {aux}");
    }

    #[test]
    fn aux_cancellation_nulls_quadrature_interference() {
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 64, None).unwrap();
        let t = localization_table(&f, 2, 2).unwrap();
        let cfg = SystemConfig {
            n: 64,
            guard_left: 4,
            guard_right: 3,
            ..cfg512()
        };
        let layout = PilotLayout::for_config(&cfg, 6, 4, 3).unwrap();
        let mut a = OqamGrid::zeros(64, 16);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        for v in a.a.iter_mut() {
            *v = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        place_pilots_oqam(&mut a, &layout, 8).unwrap();
        insert_auxiliary_pilots(&mut a, &layout, &t).unwrap();
        // residual at every pilot: quadrature part nulled to rounding, the
        // rest bounded by the pulse's real-orthogonality leakage
        for obs in fbmc_pilot_map(&layout, 8) {
            let resid = boxed_interference(&a, &t, (obs.n, obs.m), (99, 99));
            assert!(resid.im.abs() < 1e-9, "im {}", resid.im);
            assert!(resid.norm() < 1e-3, "norm {}", resid.norm());
        }
    }

    #[test]
    fn uncancellable_aux_position_rejected() {
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 64, None).unwrap();
        let t = localization_table(&f, 2, 2).unwrap();
        let cfg = SystemConfig {
            n: 64,
            guard_left: 4,
            guard_right: 3,
            ..cfg512()
        };
        let mut layout = PilotLayout::for_config(&cfg, 6, 4, 3).unwrap();
        layout.aux_offset = (0, 2); // weight at (0, 2) is ~0
        let mut a = OqamGrid::zeros(64, 16);
        place_pilots_oqam(&mut a, &layout, 8).unwrap();
        assert!(matches!(
            insert_auxiliary_pilots(&mut a, &layout, &t),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dp_pilots_land_on_assigned_polarization() {
        let f = PrototypeFilter::design(FilterKind::Srrc, 8, 64, None).unwrap();
        let t = localization_table(&f, 2, 2).unwrap();
        let cfg = SystemConfig {
            n: 64,
            guard_left: 4,
            guard_right: 3,
            ..cfg512()
        };
        let layout = PilotLayout::for_config(&cfg, 6, 4, 3).unwrap();
        let a = OqamGrid::zeros(64, 16);
        let mut p = dp_split(&a, DpStructure::Tpdm);
        dp_place_pilots_and_aux(&mut p, &layout, &t).unwrap();
        let (obs_h, obs_v) = dp_pilot_maps(&layout, DpStructure::Tpdm, 8).unwrap();
        for o in &obs_h {
            assert_eq!(o.m % 2, 0); // H rides even half-instants under TPDM
            assert_eq!(p.h.a[(o.n, o.m)], o.value);
        }
        for o in &obs_v {
            assert_eq!(o.m % 2, 1);
            assert_eq!(p.v.a[(o.n, o.m)], o.value);
        }
    }

    #[test]
    fn flat_channel_ls_identity() {
        let cfg = cfg512();
        let layout = PilotLayout::for_config(&cfg, 30, 4, 7).unwrap();
        let g = Complex64::new(0.8, -0.6);
        let m_qam = 16;
        let mut r = Array2::zeros((cfg.n, m_qam));
        for t in layout.pilot_instants_qam(m_qam) {
            for (i, &n) in layout.subcarriers.iter().enumerate() {
                r[(n, t)] = g * layout.qam_value(i, t);
            }
        }
        let est = ls_estimate_ofdm(&r, &layout, &cfg).unwrap();
        for &n in cfg.active_subcarriers().iter() {
            for t in 0..m_qam {
                assert!((est.gains[(n, t)] - g).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn two_tap_channel_ls_matches_frequency_response() {
        let cfg = cfg512();
        let layout = PilotLayout::for_config(&cfg, 30, 4, 7).unwrap();
        let taps = [Complex64::new(0.9, 0.0), Complex64::new(0.3, -0.2)];
        let resp = |n: usize| -> Complex64 {
            taps[0]
                + taps[1]
                    * Complex64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * n as f64 / cfg.n as f64,
                    )
        };
        let m_qam = 8;
        let mut r = Array2::zeros((cfg.n, m_qam));
        for t in layout.pilot_instants_qam(m_qam) {
            for (i, &n) in layout.subcarriers.iter().enumerate() {
                r[(n, t)] = resp(n) * layout.qam_value(i, t);
            }
        }
        let est = ls_estimate_ofdm(&r, &layout, &cfg).unwrap();
        for (i, &n) in layout.subcarriers.iter().enumerate() {
            let want = resp(n);
            let got = est.gains[(n, 0)];
            assert!(
                (got - want).norm() < 0.02 * want.norm().max(1.0),
                "pilot {i}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn pck_equals_analytic_response() {
        let cfg = SystemConfig {
            n: 64,
            guard_left: 4,
            guard_right: 3,
            ..cfg512()
        };
        let taps = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)];
        let est = perfect_channel_estimate(&taps, &cfg, 4);
        for n in 0..64 {
            let want = taps[0]
                + taps[1]
                    * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * n as f64 / 64.0);
            assert!((est.gains[(n, 0)] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn zf_flat_gain_and_erasure() {
        let cfg = SystemConfig {
            n: 16,
            guard_left: 1,
            guard_right: 1,
            ..cfg512()
        };
        let est = perfect_channel_estimate(&[Complex64::new(2.0, 0.0)], &cfg, 2);
        let mut r = Array2::from_elem((16, 2), Complex64::new(4.0, 2.0));
        zf_equalize(&mut r, &est);
        assert!((r[(3, 1)] - Complex64::new(2.0, 1.0)).norm() < 1e-12);
        let zero_est = perfect_channel_estimate(&[], &cfg, 2);
        let mut r2 = Array2::from_elem((16, 2), Complex64::new(4.0, 2.0));
        zf_equalize(&mut r2, &zero_est);
        assert_eq!(r2[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zf_scale_consistency() {
        // equalizing g*h with estimate g*e equals equalizing h with e
        let h = Complex64::new(0.7, 0.3);
        let e = Complex64::new(0.65, 0.28);
        let g = Complex64::new(-1.3, 2.2);
        let mk_est = |gain: Complex64| ChannelEstimate {
            gains: Array2::from_elem((16, 1), gain),
            method: "pck",
        };
        let mut r1 = Array2::from_elem((16, 1), g * h);
        zf_equalize(&mut r1, &mk_est(g * e));
        let mut r2 = Array2::from_elem((16, 1), h);
        zf_equalize(&mut r2, &mk_est(e));
        assert!((r1[(0, 0)] - r2[(0, 0)]).norm() < 1e-12);
    }

    #[test]
    fn genie_canceller_removes_cross_terms_exactly() {
        use crate::channel::{apply_dual_pol_channel, builtin_profile, realize_channel};
        use crate::modem::Waveform;
        use crate::rng::{role, substream};
        use rand::Rng;
        let mut mk = |seed: u64| {
            let mut rng = substream(seed, 0, role::INFO_BITS);
            Waveform::new(
                (0..200)
                    .map(|_| {
                        Complex64::new(
                            rng.sample(rand_distr::StandardNormal),
                            rng.sample(rand_distr::StandardNormal),
                        )
                    })
                    .collect(),
                10e6,
            )
        };
        let tx = PolarizedWaveform { h: mk(1), v: mk(2) };
        let p = builtin_profile("pedestrian_a").unwrap();
        let mut co = substream(3, 0, role::CHANNEL_CO);
        let mut cross = substream(3, 0, role::CHANNEL_CROSS);
        let ch = realize_channel(&p, 3.0, 10e6, &mut co, &mut cross).unwrap();
        let rx = apply_dual_pol_channel(&tx, &ch).unwrap();
        let cleaned = xpol_cancel_ideal(&rx, &tx, &ch);
        // compare against the co-polarization-only channel
        let co_only = DualPolChannelRealization {
            hh: ch.hh.clone(),
            vv: ch.vv.clone(),
            hv: vec![],
            vh: vec![],
            xpd_db: f64::INFINITY,
        };
        let want = apply_dual_pol_channel(&tx, &co_only).unwrap();
        let sig = want.energy();
        let mut resid = 0.0;
        for i in 0..want.h.len() {
            resid += (cleaned.h.samples[i] - want.h.samples[i]).norm_sqr();
            resid += (cleaned.v.samples[i] - want.v.samples[i]).norm_sqr();
        }
        assert!(resid / sig < 1e-18, "residual ratio {}", resid / sig);
        // perfect-XPD input: nothing to subtract
        let rx2 = apply_dual_pol_channel(&tx, &co_only).unwrap();
        let cleaned2 = xpol_cancel_ideal(&rx2, &tx, &co_only);
        assert_eq!(cleaned2.h.samples, rx2.h.samples);
    }
}
