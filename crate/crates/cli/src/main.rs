//! Experiment runner for the multicarrier PHY simulation library.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod svg;

use clap::{Args, Parser, Subcommand};
use dpfbmc::error::Error;
use dpfbmc::experiment::{
    run_ber_sweep, run_offset_sweep, run_psd, run_table_report, Equalizer, ExperimentConfig,
    FilterSpec, ResultTable, SweepVar, SystemKind,
};
use dpfbmc::filters::{FilterKind, PrototypeFilter};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "dpfbmc", version, about = "Multicarrier PHY experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// BER sweep over Eb/N0, XPD or polarization mismatch angle.
    Ber(RunArgs),
    /// Power spectral density comparison across systems.
    Psd(RunArgs),
    /// BER vs carrier frequency / timing offset (AWGN profile).
    Offsets(RunArgs),
    /// Render one localization table for a chosen filter design.
    Table {
        #[arg(long, value_parser = parse_filter_kind)]
        filter: FilterKind,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 2)]
        dn: usize,
        #[arg(long, default_value_t = 3)]
        dm: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the localization tables and their reference differences.
    Tables {
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a designed prototype filter as CSV.
    FilterExport {
        #[arg(long, value_parser = parse_filter_kind)]
        filter: FilterKind,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Emit an SVG quick-look plot next to the CSV.
    #[arg(long)]
    plot: bool,
    /// Comma-separated system tokens (cp_ofdm, cp_ofdm_wola, fbmc,
    /// dp_fbmc_s1, dp_fbmc_s2, dp_fbmc_s3).
    #[arg(long)]
    systems: Option<String>,
    #[arg(long)]
    profile: Option<String>,
    /// Comma-separated sweep grid values.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<SweepVar>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_equalizer)]
    equalizer: Option<Equalizer>,
    #[arg(long)]
    modulation: Option<usize>,
    #[arg(long, value_parser = parse_filter_kind)]
    filter: Option<FilterKind>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    bandwidth_hz: Option<f64>,
    #[arg(long)]
    eb_n0_db: Option<f64>,
    #[arg(long)]
    xpd_db: Option<f64>,
    #[arg(long)]
    mismatch_deg: Option<f64>,
    #[arg(long)]
    genie_xpol_cancel: Option<bool>,
}

fn parse_filter_kind(s: &str) -> Result<FilterKind, String> {
    match s {
        "srrc" => Ok(FilterKind::Srrc),
        "phydyas" => Ok(FilterKind::Phydyas),
        "iota" => Ok(FilterKind::Iota),
        _ => Err(format!("unknown filter '{s}' (srrc|phydyas|iota)")),
    }
}

fn parse_sweep(s: &str) -> Result<SweepVar, String> {
    match s {
        "eb_n0_db" => Ok(SweepVar::EbN0Db),
        "xpd_db" => Ok(SweepVar::XpdDb),
        "cfo_norm" => Ok(SweepVar::CfoNorm),
        "cto_norm" => Ok(SweepVar::CtoNorm),
        "mismatch_deg" => Ok(SweepVar::MismatchDeg),
        _ => Err(format!("unknown sweep variable '{s}'")),
    }
}

fn parse_equalizer(s: &str) -> Result<Equalizer, String> {
    match s {
        "ls_dft" => Ok(Equalizer::LsDft),
        "pck" => Ok(Equalizer::Pck),
        _ => Err(format!("unknown equalizer '{s}' (ls_dft|pck)")),
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(systems) = &args.systems {
        cfg.systems = systems
            .split(',')
            .map(|t| SystemKind::parse(t.trim()))
            .collect::<Result<Vec<_>, _>>()?;
    }
    if let Some(p) = &args.profile {
        cfg.profile = p.clone();
    }
    if let Some(grid) = &args.grid {
        cfg.grid = grid
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad grid value '{v}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
    }
    if let Some(s) = args.sweep {
        cfg.sweep = s;
    }
    if let Some(f) = args.frames {
        cfg.frames = f;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.equalizer {
        cfg.equalizer = e;
    }
    if let Some(m) = args.modulation {
        cfg.modulation_order = m;
    }
    if args.filter.is_some() || args.k.is_some() || args.alpha.is_some() {
        cfg.filter = FilterSpec {
            kind: args.filter.unwrap_or(cfg.filter.kind),
            k: args.k.unwrap_or(cfg.filter.k),
            alpha: args.alpha.or(cfg.filter.alpha),
        };
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(b) = args.bandwidth_hz {
        cfg.bandwidth_hz = b;
    }
    if let Some(v) = args.eb_n0_db {
        cfg.eb_n0_db = v;
    }
    if args.xpd_db.is_some() {
        cfg.xpd_db = args.xpd_db;
    }
    if let Some(v) = args.mismatch_deg {
        cfg.mismatch_deg = v;
    }
    if let Some(v) = args.genie_xpol_cancel {
        cfg.genie_xpol_cancel = v;
    }
    Ok(cfg)
}

fn write_table(
    table: &ResultTable,
    out_dir: &Path,
    stem: &str,
    plot: bool,
) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, table.to_csv())?;
    if plot {
        let mut by_system: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
        for r in &table.rows {
            by_system
                .entry(r.system.clone())
                .or_default()
                .push((r.sweep_value, r.value));
        }
        let series: Vec<svg::Series> = by_system
            .into_iter()
            .map(|(label, points)| svg::Series { label, points })
            .collect();
        let svg_text = svg::line_plot(&series, "sweep value", "BER", true);
        std::fs::write(out_dir.join(format!("{stem}.svg")), svg_text)?;
    }
    Ok(csv_path)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Ber(args) => {
            let cfg = load_config(&args)?;
            let table = run_ber_sweep(&cfg, args.workers)?;
            let path = write_table(&table, &args.out_dir, "ber", args.plot)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Offsets(args) => {
            let cfg = load_config(&args)?;
            let table = run_offset_sweep(&cfg, args.workers)?;
            let path = write_table(&table, &args.out_dir, "offsets", args.plot)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Psd(args) => {
            let cfg = load_config(&args)?;
            let traces = run_psd(&cfg)?;
            std::fs::create_dir_all(&args.out_dir)?;
            let mut csv = cfg.provenance();
            let est = &traces[0].1;
            csv.push_str(&format!(
                "# estimator segment_len={} overlap={} segments={} window={}\n",
                est.segment_len, est.overlap, est.segments, est.window
            ));
            csv.push_str("freq_subcarriers");
            for (name, _) in &traces {
                csv.push_str(&format!(",{name}"));
            }
            csv.push('\n');
            let m = traces[0].1.freq_sub.len();
            for i in 0..m {
                csv.push_str(&format!("{:.6}", traces[0].1.freq_sub[i]));
                for (_, psd) in &traces {
                    csv.push_str(&format!(",{:.6}", psd.density_db[i]));
                }
                csv.push('\n');
            }
            let path = args.out_dir.join("psd.csv");
            std::fs::write(&path, csv)?;
            if args.plot {
                let series: Vec<svg::Series> = traces
                    .iter()
                    .map(|(name, psd)| svg::Series {
                        label: name.clone(),
                        points: psd
                            .freq_sub
                            .iter()
                            .zip(&psd.density_db)
                            .map(|(&f, &d)| (f, d))
                            .collect(),
                    })
                    .collect();
                let svg_text = svg::line_plot(
                    &series,
                    "frequency (subcarrier spacings)",
                    "PSD (dB)",
                    false,
                );
                std::fs::write(args.out_dir.join("psd.svg"), svg_text)?;
            }
            eprintln!("wrote {}", path.display());
        }
        Cmd::Table {
            filter,
            k,
            n,
            alpha,
            dn,
            dm,
            out,
        } => {
            let f = PrototypeFilter::design(filter, k, n, alpha)?;
            let t = dpfbmc::interference::localization_table(&f, dn, dm)?;
            let text = dpfbmc::interference::render_table(&t);
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Tables { n, out } => {
            let report = run_table_report(n)?;
            match out {
                Some(path) => std::fs::write(path, report)?,
                None => print!("{report}"),
            }
        }
        Cmd::FilterExport {
            filter,
            k,
            n,
            alpha,
            out,
        } => {
            let f = PrototypeFilter::design(filter, k, n, alpha)?;
            let file = std::fs::File::create(&out)?;
            f.write_csv(std::io::BufWriter::new(file))?;
            eprintln!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Numerical(_) => 3,
                Error::Io(_) => 1,
                _ => 2,
            };
            std::process::exit(code);
        }
    }
}
