//! Config-driven experiment runner: BER sweeps, PSD comparisons, offset
//! sweeps and localization-table reports, all reproducible from a master
//! seed for any worker count.

use crate::channel::{
    add_noise, apply_angular_mismatch, apply_cfo, apply_channel, apply_cto, apply_dual_pol_channel,
    builtin_profile, noise_variance, realize_channel, ChannelProfile,
};
use crate::dp::{dp_demodulate, dp_modulate, dp_split, DpStructure, PolarizedWaveform};
use crate::eq::{
    dp_pilot_maps, dp_place_pilots_and_aux, insert_auxiliary_pilots, ls_estimate_fbmc,
    ls_estimate_ofdm, perfect_channel_estimate, place_pilots_oqam, place_pilots_qam,
    xpol_cancel_ideal, PilotLayout,
};
use crate::error::{Error, Result};
use crate::filters::{FilterKind, PrototypeFilter};
use crate::grid::{qam_to_oqam, Modulation, QamGrid, SystemConfig};
use crate::interference::{localization_table, render_table, LocalizationTable};
use crate::metrics::{psd_periodogram, BerRecord, PsdEstimate};
use crate::modem::{
    cp_ofdm_demodulate, cp_ofdm_modulate, fbmc_demodulate, fbmc_modulate_fast, truncate_tails,
    wola_window, Waveform,
};
use crate::rng::{role, substream};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use sha2::{Digest, Sha256};

pub const PILOT_COUNT: usize = 30;
pub const PILOT_PERIOD_QAM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    CpOfdm,
    CpOfdmWola,
    Fbmc,
    DpFbmcS1,
    DpFbmcS2,
    DpFbmcS3,
}

impl SystemKind {
    pub fn token(&self) -> &'static str {
        match self {
            SystemKind::CpOfdm => "cp_ofdm",
            SystemKind::CpOfdmWola => "cp_ofdm_wola",
            SystemKind::Fbmc => "fbmc",
            SystemKind::DpFbmcS1 => "dp_fbmc_s1",
            SystemKind::DpFbmcS2 => "dp_fbmc_s2",
            SystemKind::DpFbmcS3 => "dp_fbmc_s3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cp_ofdm" => Ok(SystemKind::CpOfdm),
            "cp_ofdm_wola" => Ok(SystemKind::CpOfdmWola),
            "fbmc" => Ok(SystemKind::Fbmc),
            "dp_fbmc_s1" => Ok(SystemKind::DpFbmcS1),
            "dp_fbmc_s2" => Ok(SystemKind::DpFbmcS2),
            "dp_fbmc_s3" => Ok(SystemKind::DpFbmcS3),
            _ => Err(Error::Config(format!("unknown system '{s}'"))),
        }
    }

    pub fn dp_structure(&self) -> Option<DpStructure> {
        match self {
            SystemKind::DpFbmcS1 => Some(DpStructure::Tpdm),
            SystemKind::DpFbmcS2 => Some(DpStructure::Fpdm),
            SystemKind::DpFbmcS3 => Some(DpStructure::Tfpdm),
            _ => None,
        }
    }

    pub fn is_fbmc_family(&self) -> bool {
        !matches!(self, SystemKind::CpOfdm | SystemKind::CpOfdmWola)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equalizer {
    LsDft,
    Pck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    EbN0Db,
    XpdDb,
    CfoNorm,
    CtoNorm,
    MismatchDeg,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub k: usize,
    pub alpha: Option<f64>,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            kind: FilterKind::Srrc,
            k: 8,
            alpha: None,
        }
    }
}

/// Typical minimum cross-polarization discrimination per scenario.
pub fn default_xpd_db(profile: &str) -> f64 {
    match profile {
        "ag_los" => 15.0,
        "pedestrian_a" => 10.0,
        "pedestrian_b" => 5.0,
        "vehicular_b" => 3.0,
        _ => f64::INFINITY,
    }
}

/// Cyclic prefix long enough for each scenario's delay spread.
pub fn default_cp_fraction(profile: &str) -> (usize, usize) {
    match profile {
        "pedestrian_b" => (1, 16),
        "vehicular_b" => (1, 8),
        _ => (1, 32),
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub systems: Vec<SystemKind>,
    pub filter: FilterSpec,
    pub n: usize,
    pub symbols_per_frame: usize,
    pub bandwidth_hz: f64,
    pub modulation_order: usize,
    pub profile: String,
    /// None picks the per-profile default.
    pub xpd_db: Option<f64>,
    pub equalizer: Equalizer,
    pub sweep: SweepVar,
    pub grid: Vec<f64>,
    /// Fixed values for whichever variables the sweep does not cover.
    pub eb_n0_db: f64,
    pub mismatch_deg: f64,
    pub cfo_norm: f64,
    pub cto_norm: f64,
    /// Timing offsets normalized to N samples (true) or N/2 (false).
    pub cto_unit_full_symbol: bool,
    /// Subtract the genie-reconstructed cross-polarization signal.
    pub genie_xpol_cancel: bool,
    pub frames: usize,
    pub seed: u64,
    pub guard_left: usize,
    pub guard_right: usize,
    pub dc_null: bool,
    pub cp_fraction: Option<(usize, usize)>,
    pub window_rolloff: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            systems: vec![SystemKind::DpFbmcS1],
            filter: FilterSpec::default(),
            n: 512,
            symbols_per_frame: 16,
            bandwidth_hz: 10e6,
            modulation_order: 16,
            profile: "awgn".into(),
            xpd_db: None,
            equalizer: Equalizer::Pck,
            sweep: SweepVar::EbN0Db,
            grid: vec![10.0],
            eb_n0_db: 10.0,
            mismatch_deg: 0.0,
            cfo_norm: 0.0,
            cto_norm: 0.0,
            cto_unit_full_symbol: true,
            genie_xpol_cancel: false,
            frames: 200,
            seed: 1,
            guard_left: 17,
            guard_right: 16,
            dc_null: true,
            cp_fraction: None,
            window_rolloff: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn system_config(&self) -> SystemConfig {
        SystemConfig {
            n: self.n,
            guard_left: self.guard_left,
            guard_right: self.guard_right,
            dc_null: self.dc_null,
            bandwidth_hz: self.bandwidth_hz,
            cp_fraction: self
                .cp_fraction
                .unwrap_or_else(|| default_cp_fraction(&self.profile)),
            window_rolloff: self.window_rolloff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be >= 1".into()));
        }
        if self.systems.is_empty() {
            return Err(Error::Config("no systems selected".into()));
        }
        self.system_config().validate()?;
        Modulation::new(self.modulation_order)?;
        builtin_profile(&self.profile)?;
        if matches!(self.sweep, SweepVar::CfoNorm) && self.grid.iter().any(|v| v.abs() >= 0.5) {
            return Err(Error::Config("CFO grid exceeds |cfo| < 0.5".into()));
        }
        if self.cfo_norm.abs() >= 0.5 {
            return Err(Error::Config("fixed CFO exceeds |cfo| < 0.5".into()));
        }
        let has_dp = self.systems.iter().any(|s| s.dp_structure().is_some());
        let wants_mismatch =
            self.mismatch_deg != 0.0 || matches!(self.sweep, SweepVar::MismatchDeg);
        if wants_mismatch && self.systems.iter().any(|s| s.dp_structure().is_none()) {
            return Err(Error::Config(
                "angular mismatch applies to dual-polarization systems only".into(),
            ));
        }
        if matches!(self.sweep, SweepVar::XpdDb) && !has_dp {
            return Err(Error::Config(
                "XPD sweeps need a dual-polarization system".into(),
            ));
        }
        if self.equalizer == Equalizer::LsDft && self.systems.contains(&SystemKind::DpFbmcS2) {
            return Err(Error::Config(
                "dp_fbmc_s2 supports perfect channel knowledge only".into(),
            ));
        }
        if self.systems.iter().any(|s| s.is_fbmc_family()) {
            PrototypeFilter::design(self.filter.kind, self.filter.k, self.n, self.filter.alpha)?;
        }
        Ok(())
    }

    /// Short configuration digest embedded in every artifact.
    pub fn fingerprint(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# fingerprint={}\n", self.fingerprint()));
        out.push_str(&format!("# seed={}\n", self.seed));
        for line in toml::to_string(self).unwrap_or_default().lines() {
            out.push_str(&format!("# {line}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub system: String,
    pub metric: String,
    pub value: f64,
    pub ci_halfwidth: f64,
    pub bits: u64,
    pub frames: u64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub provenance: String,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.provenance.clone();
        out.push_str("sweep_value,system,metric,value,ci_halfwidth,bits,frames,seed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.12e},{:.6e},{},{},{}\n",
                r.sweep_value,
                r.system,
                r.metric,
                r.value,
                r.ci_halfwidth,
                r.bits,
                r.frames,
                r.seed
            ));
        }
        out
    }

    /// Error counts per (sweep value, system), for paired comparisons.
    pub fn error_counts(&self) -> Vec<(f64, String, u64)> {
        self.rows
            .iter()
            .map(|r| {
                (
                    r.sweep_value,
                    r.system.clone(),
                    (r.value * r.bits as f64).round() as u64,
                )
            })
            .collect()
    }
}

/// Run `frames` jobs on `workers` threads; the output order is by frame
/// index regardless of scheduling.
pub fn run_frames<T: Send>(
    frames: u64,
    workers: usize,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let workers = workers.max(1);
    let next = std::sync::atomic::AtomicU64::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<T>>>> =
        (0..frames).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(frames as usize).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= frames {
                    break;
                }
                let r = f(i);
                *slots[i as usize].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("worker finished"))
        .collect()
}

/// Everything fixed for one (sweep point, system) pair.
struct PointParams {
    eb_n0_db: f64,
    xpd_db: f64,
    cfo_norm: f64,
    cto_samples: i64,
    mismatch_deg: f64,
}

impl ExperimentConfig {
    fn point_params(&self, v: f64) -> PointParams {
        let cto_unit = if self.cto_unit_full_symbol {
            self.n as f64
        } else {
            self.n as f64 / 2.0
        };
        let mut p = PointParams {
            eb_n0_db: self.eb_n0_db,
            xpd_db: self.xpd_db.unwrap_or_else(|| default_xpd_db(&self.profile)),
            cfo_norm: self.cfo_norm,
            cto_samples: (self.cto_norm * cto_unit).round() as i64,
            mismatch_deg: self.mismatch_deg,
        };
        match self.sweep {
            SweepVar::EbN0Db => p.eb_n0_db = v,
            SweepVar::XpdDb => p.xpd_db = v,
            SweepVar::CfoNorm => p.cfo_norm = v,
            SweepVar::CtoNorm => p.cto_samples = (v * cto_unit).round() as i64,
            SweepVar::MismatchDeg => p.mismatch_deg = v,
        }
        p
    }
}

/// Data-carrying QAM slots: active subcarriers over all instants, minus
/// pilot slots when pilot estimation is on.
fn data_slots(
    cfg: &SystemConfig,
    layout: Option<&PilotLayout>,
    m_qam: usize,
) -> Vec<(usize, usize)> {
    let actives = cfg.active_subcarriers();
    let mut pilot_slot = std::collections::HashSet::new();
    if let Some(l) = layout {
        for t in l.pilot_instants_qam(m_qam) {
            for &n in &l.subcarriers {
                pilot_slot.insert((n, t));
            }
        }
    }
    let mut slots = Vec::new();
    for t in 0..m_qam {
        for &n in &actives {
            if !pilot_slot.contains(&(n, t)) {
                slots.push((n, t));
            }
        }
    }
    slots
}

fn bits_to_grid(
    bits: &[bool],
    slots: &[(usize, usize)],
    modu: Modulation,
    n: usize,
    m_qam: usize,
) -> QamGrid {
    let bps = modu.bits_per_symbol();
    let mut symbols = Array2::zeros((n, m_qam));
    for (i, &(ni, t)) in slots.iter().enumerate() {
        symbols[(ni, t)] = modu.map(&bits[i * bps..(i + 1) * bps]);
    }
    QamGrid {
        symbols,
        modulation: modu,
    }
}

fn slice_grid(
    r: &Array2<Complex64>,
    slots: &[(usize, usize)],
    modu: Modulation,
    out: &mut Vec<bool>,
) {
    for &(ni, t) in slots {
        modu.demap(r[(ni, t)], out);
    }
}

/// De-stagger the equalized OQAM lattice into QAM decisions at the data
/// slots.
fn slice_oqam(
    r: &Array2<Complex64>,
    slots: &[(usize, usize)],
    modu: Modulation,
    out: &mut Vec<bool>,
) {
    for &(ni, t) in slots {
        let c = Complex64::new(r[(ni, 2 * t)].re, r[(ni, 2 * t + 1)].re);
        modu.demap(c, out);
    }
}

/// Fold the stationary phase signature of uncorrected receiver offsets into
/// a perfect-knowledge estimate: a timing slip of `d` samples is a pure
/// delay (gain factor `e^{j 2 pi n d / N}`), and an uncorrected CFO leaves
/// the common phase `e^{j theta k_center}` at each instant's center. The
/// one-tap equalizer then operates at the effective channel seen at the
/// receiver clock; the ICI/ISI the offsets create stays in as interference
/// (this is what a trained one-tap equalizer converges to).
fn apply_offset_phases(
    est: &mut crate::eq::ChannelEstimate,
    n: usize,
    cfo_norm: f64,
    cto_samples: i64,
    center_of: impl Fn(usize) -> f64,
) {
    if cfo_norm == 0.0 && cto_samples == 0 {
        return;
    }
    let theta = 2.0 * std::f64::consts::PI * cfo_norm / n as f64;
    let (rows, cols) = est.gains.dim();
    for ni in 0..rows {
        let ramp = Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * ni as f64 * cto_samples as f64 / n as f64,
        );
        for t in 0..cols {
            let cpe = Complex64::from_polar(1.0, theta * center_of(t));
            est.gains[(ni, t)] *= ramp * cpe;
        }
    }
}

struct FrameContext<'a> {
    cfg: &'a ExperimentConfig,
    scfg: SystemConfig,
    profile: ChannelProfile,
    filter: Option<PrototypeFilter>,
    table: Option<LocalizationTable>,
    layout: Option<PilotLayout>,
    modu: Modulation,
    slots: Vec<(usize, usize)>,
}

impl<'a> FrameContext<'a> {
    fn new(cfg: &'a ExperimentConfig, needs_filter: bool) -> Result<Self> {
        let scfg = cfg.system_config();
        let profile = builtin_profile(&cfg.profile)?;
        let modu = Modulation::new(cfg.modulation_order)?;
        let layout = match cfg.equalizer {
            Equalizer::LsDft => Some(PilotLayout::for_config(
                &scfg,
                PILOT_COUNT,
                PILOT_PERIOD_QAM,
                substream(cfg.seed, 0, role::PILOT_SEQ).gen(),
            )?),
            Equalizer::Pck => None,
        };
        let filter = if needs_filter {
            Some(PrototypeFilter::design(
                cfg.filter.kind,
                cfg.filter.k,
                cfg.n,
                cfg.filter.alpha,
            )?)
        } else {
            None
        };
        let table = match (&filter, &layout) {
            (Some(f), Some(_)) => Some(localization_table(f, 2, 2)?),
            _ => None,
        };
        let slots = data_slots(&scfg, layout.as_ref(), cfg.symbols_per_frame);
        Ok(Self {
            cfg,
            scfg,
            profile,
            filter,
            table,
            layout,
            modu,
            slots,
        })
    }

    fn info_bits(&self) -> usize {
        self.slots.len() * self.modu.bits_per_symbol()
    }
}

fn check_nan(w: &Waveform, stage: &str) -> Result<()> {
    if w.has_nan() {
        return Err(Error::Numerical(format!("NaN detected after {stage}")));
    }
    Ok(())
}

/// Run one frame of one system through the full pipeline and count errors.
fn run_frame(
    ctx: &FrameContext,
    system: SystemKind,
    p: &PointParams,
    frame: u64,
) -> Result<BerRecord> {
    let cfg = ctx.cfg;
    let m_qam = cfg.symbols_per_frame;
    let m_count = 2 * m_qam;
    let n = cfg.n;
    let info_bits = ctx.info_bits();
    let mut rng_bits = substream(cfg.seed, frame, role::INFO_BITS);
    let tx_bits: Vec<bool> = (0..info_bits).map(|_| rng_bits.gen()).collect();
    let mut grid = bits_to_grid(&tx_bits, &ctx.slots, ctx.modu, n, m_qam);

    let mut rng_co = substream(cfg.seed, frame, role::CHANNEL_CO);
    let mut rng_cross = substream(cfg.seed, frame, role::CHANNEL_CROSS);
    let ch = realize_channel(
        &ctx.profile,
        p.xpd_db,
        cfg.bandwidth_hz,
        &mut rng_co,
        &mut rng_cross,
    )?;
    let mut rng_nh = substream(cfg.seed, frame, role::NOISE_H);
    let mut rng_nv = substream(cfg.seed, frame, role::NOISE_V);

    let mut rx_bits = Vec::with_capacity(info_bits);
    match system {
        SystemKind::CpOfdm | SystemKind::CpOfdmWola => {
            if let Some(layout) = &ctx.layout {
                place_pilots_qam(&mut grid, layout, &ctx.scfg)?;
            }
            let tx = cp_ofdm_modulate(&grid, &ctx.scfg)?;
            let tx = if system == SystemKind::CpOfdmWola {
                wola_window(&tx, &ctx.scfg)?
            } else {
                tx
            };
            let tx_energy = tx.energy();
            let mut rx = apply_channel(&tx, &ch.hh);
            rx = apply_cfo(&rx, p.cfo_norm, n)?;
            let sigma2 = noise_variance(tx_energy, info_bits, p.eb_n0_db)?;
            rx = add_noise(&rx, sigma2, &mut rng_nh);
            if p.cto_samples != 0 {
                rx = apply_cto(&rx, p.cto_samples)?;
            }
            check_nan(&rx, "channel")?;
            let mut r = cp_ofdm_demodulate(&rx, &ctx.scfg, m_qam)?;
            let est = match cfg.equalizer {
                Equalizer::Pck => {
                    let mut est = perfect_channel_estimate(&ch.hh, &ctx.scfg, m_qam);
                    let sym_len = (ctx.scfg.cp_len() + n) as f64;
                    let cp = ctx.scfg.cp_len() as f64;
                    apply_offset_phases(&mut est, n, p.cfo_norm, p.cto_samples, |t| {
                        t as f64 * sym_len + cp + (n as f64 - 1.0) / 2.0
                    });
                    est
                }
                Equalizer::LsDft => ls_estimate_ofdm(&r, ctx.layout.as_ref().unwrap(), &ctx.scfg)?,
            };
            crate::eq::zf_equalize(&mut r, &est);
            slice_grid(&r, &ctx.slots, ctx.modu, &mut rx_bits);
        }
        SystemKind::Fbmc => {
            let f = ctx.filter.as_ref().unwrap();
            let mut a = qam_to_oqam(&grid);
            if let Some(layout) = &ctx.layout {
                place_pilots_oqam(&mut a, layout, m_qam)?;
                insert_auxiliary_pilots(&mut a, layout, ctx.table.as_ref().unwrap())?;
            }
            let tx = truncate_tails(&fbmc_modulate_fast(&a, f)?, cfg.filter.k, n)?;
            let tx_energy = tx.energy();
            let mut rx = apply_channel(&tx, &ch.hh);
            rx = apply_cfo(&rx, p.cfo_norm, n)?;
            let sigma2 = noise_variance(tx_energy, info_bits, p.eb_n0_db)?;
            rx = add_noise(&rx, sigma2, &mut rng_nh);
            if p.cto_samples != 0 {
                rx = apply_cto(&rx, p.cto_samples)?;
            }
            check_nan(&rx, "channel")?;
            let mut r = fbmc_demodulate(&rx, f, m_count)?;
            let est = match cfg.equalizer {
                Equalizer::Pck => {
                    let mut est = perfect_channel_estimate(&ch.hh, &ctx.scfg, m_count);
                    let c = (f.len() as f64 - 1.0) / 2.0;
                    apply_offset_phases(&mut est, n, p.cfo_norm, p.cto_samples, |m| {
                        m as f64 * n as f64 / 2.0 + c
                    });
                    est
                }
                Equalizer::LsDft => {
                    let layout = ctx.layout.as_ref().unwrap();
                    let obs = crate::eq::fbmc_pilot_map(layout, m_qam);
                    ls_estimate_fbmc(&r, &obs, layout, &ctx.scfg)?
                }
            };
            crate::eq::zf_equalize(&mut r, &est);
            slice_oqam(&r, &ctx.slots, ctx.modu, &mut rx_bits);
        }
        SystemKind::DpFbmcS1 | SystemKind::DpFbmcS2 | SystemKind::DpFbmcS3 => {
            let s = system.dp_structure().unwrap();
            let f = ctx.filter.as_ref().unwrap();
            let a = qam_to_oqam(&grid);
            let mut pol = dp_split(&a, s);
            if let Some(layout) = &ctx.layout {
                dp_place_pilots_and_aux(&mut pol, layout, ctx.table.as_ref().unwrap())?;
            }
            let pw = dp_modulate(&pol, f)?;
            let tx = PolarizedWaveform {
                h: truncate_tails(&pw.h, cfg.filter.k, n)?,
                v: truncate_tails(&pw.v, cfg.filter.k, n)?,
            };
            let tx_energy = tx.energy();
            let mut rx = apply_dual_pol_channel(&tx, &ch)?;
            if p.mismatch_deg != 0.0 {
                rx = apply_angular_mismatch(&rx, p.mismatch_deg)?;
            }
            if cfg.genie_xpol_cancel {
                rx = xpol_cancel_ideal(&rx, &tx, &ch);
            }
            rx.h = apply_cfo(&rx.h, p.cfo_norm, n)?;
            rx.v = apply_cfo(&rx.v, p.cfo_norm, n)?;
            let sigma2 = noise_variance(tx_energy, info_bits, p.eb_n0_db)?;
            rx.h = add_noise(&rx.h, sigma2, &mut rng_nh);
            rx.v = add_noise(&rx.v, sigma2, &mut rng_nv);
            if p.cto_samples != 0 {
                rx.h = apply_cto(&rx.h, p.cto_samples)?;
                rx.v = apply_cto(&rx.v, p.cto_samples)?;
            }
            if rx.has_nan() {
                return Err(Error::Numerical("NaN detected after channel".into()));
            }
            let d = dp_demodulate(&rx, f, s, m_count)?;
            let (est_h, est_v) = match cfg.equalizer {
                Equalizer::Pck => {
                    let mut est_h = perfect_channel_estimate(&ch.hh, &ctx.scfg, m_count);
                    let mut est_v = perfect_channel_estimate(&ch.vv, &ctx.scfg, m_count);
                    let c = (f.len() as f64 - 1.0) / 2.0;
                    for est in [&mut est_h, &mut est_v] {
                        apply_offset_phases(est, n, p.cfo_norm, p.cto_samples, |m| {
                            m as f64 * n as f64 / 2.0 + c
                        });
                    }
                    (est_h, est_v)
                }
                Equalizer::LsDft => {
                    let layout = ctx.layout.as_ref().unwrap();
                    let (obs_h, obs_v) = dp_pilot_maps(layout, s, m_qam)?;
                    (
                        ls_estimate_fbmc(&d.h, &obs_h, layout, &ctx.scfg)?,
                        ls_estimate_fbmc(&d.v, &obs_v, layout, &ctx.scfg)?,
                    )
                }
            };
            let mut h = d.h.clone();
            let mut v = d.v.clone();
            crate::eq::zf_equalize(&mut h, &est_h);
            crate::eq::zf_equalize(&mut v, &est_v);
            let merged = crate::dp::DpDemod { h, v, structure: s }.merged();
            slice_oqam(&merged, &ctx.slots, ctx.modu, &mut rx_bits);
        }
    }
    crate::metrics::ber_count(&tx_bits, &rx_bits)
}

fn sweep(cfg: &ExperimentConfig, workers: usize, metric: &'static str) -> Result<ResultTable> {
    cfg.validate()?;
    let needs_filter = cfg.systems.iter().any(|s| s.is_fbmc_family());
    let ctx = FrameContext::new(cfg, needs_filter)?;
    let mut rows = Vec::new();
    for &v in &cfg.grid {
        let p = cfg.point_params(v);
        for &system in &cfg.systems {
            let records = run_frames(cfg.frames as u64, workers, |frame| {
                run_frame(&ctx, system, &p, frame)
            })?;
            let mut total = BerRecord {
                bit_errors: 0,
                bits: 0,
            };
            for r in &records {
                total.merge(r);
            }
            if total.ber().is_nan() {
                return Err(Error::Numerical("NaN in aggregated BER".into()));
            }
            rows.push(ResultRow {
                sweep_value: v,
                system: system.token().into(),
                metric: metric.into(),
                value: total.ber(),
                ci_halfwidth: total.ci_halfwidth(),
                bits: total.bits,
                frames: cfg.frames as u64,
                seed: cfg.seed,
            });
        }
    }
    Ok(ResultTable {
        rows,
        provenance: cfg.provenance(),
    })
}

/// BER vs the configured sweep variable (Eb/N0, XPD or mismatch angle).
pub fn run_ber_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<ResultTable> {
    run_ber_sweep_named(cfg, workers, "ber")
}

pub fn run_ber_sweep_named(
    cfg: &ExperimentConfig,
    workers: usize,
    metric: &'static str,
) -> Result<ResultTable> {
    sweep(cfg, workers, metric)
}

/// BER vs CFO or CTO on the AWGN profile (no offset compensation).
pub fn run_offset_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<ResultTable> {
    if cfg.profile != "awgn" {
        return Err(Error::Config(
            "offset sweeps run on the awgn profile".into(),
        ));
    }
    if !matches!(cfg.sweep, SweepVar::CfoNorm | SweepVar::CtoNorm) {
        return Err(Error::Config(
            "offset sweep variable must be cfo_norm or cto_norm".into(),
        ));
    }
    sweep(cfg, workers, "ber")
}

/// PSD traces, one per system: long random payload, tails truncated for
/// FBMC-family systems and WOLA applied to windowed CP-OFDM.
pub fn run_psd(cfg: &ExperimentConfig) -> Result<Vec<(String, PsdEstimate)>> {
    cfg.validate()?;
    let scfg = cfg.system_config();
    let modu = Modulation::new(cfg.modulation_order)?;
    let m_qam = cfg.symbols_per_frame;
    let slots = data_slots(&scfg, None, m_qam);
    let mut out = Vec::new();
    for &system in &cfg.systems {
        let filter = if system.is_fbmc_family() {
            Some(PrototypeFilter::design(
                cfg.filter.kind,
                cfg.filter.k,
                cfg.n,
                cfg.filter.alpha,
            )?)
        } else {
            None
        };
        let mut samples: Vec<Complex64> = Vec::new();
        let mut offsets = Vec::new();
        for frame in 0..cfg.frames as u64 {
            let mut rng = substream(cfg.seed, frame, role::INFO_BITS);
            let bits: Vec<bool> = (0..slots.len() * modu.bits_per_symbol())
                .map(|_| rng.gen())
                .collect();
            let grid = bits_to_grid(&bits, &slots, modu, cfg.n, m_qam);
            let w = match system {
                SystemKind::CpOfdm => cp_ofdm_modulate(&grid, &scfg)?,
                SystemKind::CpOfdmWola => wola_window(&cp_ofdm_modulate(&grid, &scfg)?, &scfg)?,
                _ => {
                    let f = filter.as_ref().unwrap();
                    let a = qam_to_oqam(&grid);
                    match system.dp_structure() {
                        None => truncate_tails(&fbmc_modulate_fast(&a, f)?, cfg.filter.k, cfg.n)?,
                        Some(s) => {
                            let pw = dp_modulate(&dp_split(&a, s), f)?;
                            truncate_tails(&pw.h, cfg.filter.k, cfg.n)?
                        }
                    }
                }
            };
            offsets.push(samples.len());
            samples.extend_from_slice(&w.samples);
        }
        let mut stream = Waveform::new(samples, cfg.bandwidth_hz);
        stream.frame_offsets = offsets;
        check_nan(&stream, "modulation")?;
        let psd = psd_periodogram(&stream, cfg.n, 4 * cfg.n, 2 * cfg.n)?;
        out.push((system.token().to_string(), psd));
    }
    Ok(out)
}

/// Reference interference-table magnitudes for the four standard designs
/// (5 x 7 boxes over subcarrier offsets -2..2 and half-instant lags -3..3).
pub mod reference_tables {
    pub const IOTA_K4: [[f64; 7]; 5] = [
        [0.0194, 0.0, 0.0413, 0.0, 0.0413, 0.0, 0.0194],
        [0.0116, 0.0413, 0.2327, 0.4378, 0.2327, 0.0413, 0.0116],
        [0.0194, 0.0, 0.4380, 1.0, 0.4380, 0.0, 0.0194],
        [0.0116, 0.0413, 0.2327, 0.4378, 0.2327, 0.0413, 0.0116],
        [0.0, 0.0, 0.0413, 0.0, 0.0413, 0.0, 0.0],
    ];
    pub const PHYDYAS_K4: [[f64; 7]; 5] = [
        [0.064, 0.0, 0.0, 0.0, 0.0, 0.0, 0.064],
        [0.044, 0.125, 0.205, 0.239, 0.205, 0.125, 0.044],
        [0.064, 0.0, 0.564, 1.0, 0.564, 0.0, 0.064],
        [0.044, 0.125, 0.205, 0.239, 0.205, 0.125, 0.044],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ];
    pub const SRRC_K4: [[f64; 7]; 5] = [
        [0.1122, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1122],
        [0.095, 0.1263, 0.15, 0.1589, 0.15, 0.1260, 0.095],
        [0.1122, 0.0, 0.6015, 1.0, 0.6015, 0.0, 0.1122],
        [0.095, 0.1263, 0.15, 0.1589, 0.15, 0.1260, 0.095],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ];
    pub const SRRC_K8: [[f64; 7]; 5] = [
        [0.1857, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1857],
        [0.0646, 0.0695, 0.0725, 0.0735, 0.072, 0.0694, 0.0646],
        [0.1857, 0.0, 0.6278, 1.0, 0.627, 0.0, 0.1857],
        [0.0646, 0.0695, 0.0725, 0.0735, 0.072, 0.0694, 0.0646],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ];

    pub fn all() -> [(&'static str, super::FilterSpec, &'static [[f64; 7]; 5], f64); 4] {
        use crate::filters::FilterKind;
        [
            (
                "iota-k4",
                super::FilterSpec {
                    kind: FilterKind::Iota,
                    k: 4,
                    alpha: None,
                },
                &IOTA_K4,
                0.005,
            ),
            (
                "phydyas-k4",
                super::FilterSpec {
                    kind: FilterKind::Phydyas,
                    k: 4,
                    alpha: None,
                },
                &PHYDYAS_K4,
                0.002,
            ),
            (
                "srrc-k4",
                super::FilterSpec {
                    kind: FilterKind::Srrc,
                    k: 4,
                    alpha: None,
                },
                &SRRC_K4,
                0.002,
            ),
            (
                "srrc-k8",
                super::FilterSpec {
                    kind: FilterKind::Srrc,
                    k: 8,
                    alpha: None,
                },
                &SRRC_K8,
                0.002,
            ),
        ]
    }
}

/// Rendered localization tables for the four standard designs plus
/// per-entry absolute differences against the embedded reference values.
pub fn run_table_report(n: usize) -> Result<String> {
    let mut out = String::new();
    for (name, spec, reference, _) in reference_tables::all() {
        let f = PrototypeFilter::design(spec.kind, spec.k, n, spec.alpha)?;
        let t = localization_table(&f, 2, 3)?;
        out.push_str(&format!("table,{name}\n"));
        out.push_str(&render_table(&t));
        out.push_str(&format!("absdiff_vs_reference,{name}\n"));
        for (i, row) in reference.iter().enumerate() {
            let dn = i as i64 - 2;
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, &want)| {
                    let dm = j as i64 - 3;
                    let got = t.entry(dn, dm).norm();
                    format!("{:.4}", (got - want).abs())
                })
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
    }
    Ok(out)
}
