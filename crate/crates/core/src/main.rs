// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use winoc::config::ExperimentConfig;
use winoc::energy_metrics::fmt_opt;
use winoc::harness::{self, LoadCurve, RunArtifacts, RunReport};
use winoc::mac::Scheme;
use winoc::plot;
use winoc::predictor::PidWeights;
use winoc::tuner::{self, TuneOptions};

#[derive(Parser)]
#[command(name = "winoc", version, about = "Hybrid wired/wireless mesh NoC simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed (and the sweep seed list).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Writes SVG charts next to the CSV files.
    #[arg(long, global = true)]
    emit_plots: bool,
    /// Logs every flit event of `run` to events.csv.
    #[arg(long, global = true)]
    verbose_events: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single simulation.
    Run {
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        load: Option<f64>,
    },
    /// Latency and bandwidth against injection load for one scheme.
    SweepLoad {
        #[arg(long)]
        scheme: Option<Scheme>,
        /// Comma-separated loads; defaults to `sweep.loads`.
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
    },
    /// Peak bandwidth against subnet size.
    SweepSubnet {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
    },
    /// Load curves of several schemes and their deltas against a baseline.
    Compare {
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<Scheme>>,
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
    },
    /// Fits the prediction gains on recorded wireless demand.
    Tune,
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.sim.seed = s;
        cfg.sweep.seeds = vec![s];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<File> {
    let p = dir.join(name);
    File::create(&p).with_context(|| format!("creating {}", p.display()))
}

fn print_report(r: &RunReport) {
    let s = &r.summary;
    println!(
        "{:<6} load={:<6} seed={:<4} bw={:.4} Gbps/core lat={} pkt_energy={} pJ wasted={} violations={}",
        r.scheme,
        r.load,
        r.seed,
        s.bandwidth_per_core_gbps,
        fmt_opt(s.avg_latency),
        fmt_opt(s.packet_energy_pj),
        fmt_opt(s.wasted_slot_fraction),
        r.violations.total()
    );
}

fn curve_line(label: &str, seed: u64, c: &LoadCurve) {
    let sat = c.saturation.map_or("none".to_string(), |i| c.points[i].load.to_string());
    println!("{label:<6} seed={seed:<4} peak={:.4} Gbps/core saturation_load={sat}", c.peak_bandwidth);
}

fn write_curves_csv(dir: &Path, name: &str, rows: &[(String, u64, &LoadCurve)]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(create(dir, name)?);
    wr.write_record(["scheme", "seed", "subnet_size", "flit_bits", "peak_bandwidth_gbps", "saturation_load"])?;
    for (label, seed, c) in rows {
        let first = c.points.first();
        wr.write_record([
            label.clone(),
            seed.to_string(),
            first.map_or(String::new(), |p| p.subnet_size.to_string()),
            first.map_or(String::new(), |p| p.flit_bits.to_string()),
            c.peak_bandwidth.to_string(),
            c.saturation.map_or("NA".into(), |i| c.points[i].load.to_string()),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut cfg = load_config(&cli.common)?;
    let out = cli.common.out_dir.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    match cli.cmd {
        Cmd::Run { scheme, load } => {
            if let Some(s) = scheme {
                cfg = cfg.with_scheme(s);
            }
            if let Some(l) = load {
                cfg = cfg.with_load(l);
            }
            cfg.validate()?;
            let events = out.join("events.csv");
            let slots = out.join("slots.csv");
            let art = RunArtifacts {
                event_csv: cli.common.verbose_events.then_some(events.as_path()),
                slot_csv: cfg.sim.log_slots.then_some(slots.as_path()),
            };
            let r = harness::run_with(&cfg, &art)?;
            print_report(&r);
            harness::write_summary_csv(create(&out, "summary.csv")?, std::slice::from_ref(&r))?;
            harness::write_energy_csv(create(&out, "energy.csv")?, std::slice::from_ref(&r))?;
            if cli.common.emit_plots {
                let bars: Vec<(String, f64)> = winoc::energy_metrics::EnergyClass::ALL
                    .iter()
                    .zip(r.summary.energy_by_class_pj)
                    .map(|(c, e)| (c.name().to_string(), e))
                    .collect();
                plot::bar_chart(&out.join("energy.svg"), "energy by component", "pJ", &bars)?;
            }
        }
        Cmd::SweepLoad { scheme, loads } => {
            if let Some(s) = scheme {
                cfg = cfg.with_scheme(s);
            }
            let loads = loads.unwrap_or_else(|| cfg.sweep.loads.clone());
            let cfgs: Vec<_> = cfg.sweep.seeds.iter().map(|&s| cfg.with_seed(s)).collect();
            let curves = harness::sweep_many(&cfgs, &loads)?;
            let rows: Vec<RunReport> = curves.iter().flat_map(|c| c.points.iter().cloned()).collect();
            rows.iter().for_each(print_report);
            let label = rows.first().map_or(String::new(), |r| r.scheme.clone());
            let tagged: Vec<_> = cfgs.iter().zip(&curves).map(|(c, k)| (label.clone(), c.sim.seed, k)).collect();
            tagged.iter().for_each(|(l, s, c)| curve_line(l, *s, c));
            harness::write_summary_csv(create(&out, "sweep_load.csv")?, &rows)?;
            write_curves_csv(&out, "peak.csv", &tagged)?;
            if cli.common.emit_plots {
                let named: Vec<_> =
                    tagged.iter().map(|(l, s, c)| (format!("{l} seed {s}"), (*c).clone())).collect();
                plot::latency_curves(&out.join("latency.svg"), "latency against load", &named)?;
            }
        }
        Cmd::SweepSubnet { sizes, loads } => {
            let sizes = sizes.unwrap_or_else(|| cfg.sweep.subnet_sizes.clone());
            let loads = loads.unwrap_or_else(|| cfg.sweep.loads.clone());
            let mut wr = csv::Writer::from_writer(create(&out, "subnet.csv")?);
            wr.write_record(["seed", "subnet_size", "n_wis", "peak_bandwidth_gbps", "saturation_load", "best"])?;
            let mut all = Vec::new();
            for &seed in &cfg.sweep.seeds.clone() {
                let sw = harness::sweep_subnet(&cfg.with_seed(seed), &sizes, &loads)?;
                for (size, c) in &sw.rows {
                    let n_wis = if *size == 0 { 0 } else { cfg.topology.rows * cfg.topology.cols / size };
                    println!("seed={seed:<4} subnet={size:<4} peak={:.4} Gbps/core{}", c.peak_bandwidth,
                        if *size == sw.best { "  (best)" } else { "" });
                    wr.write_record([
                        seed.to_string(),
                        size.to_string(),
                        n_wis.to_string(),
                        c.peak_bandwidth.to_string(),
                        c.saturation.map_or("NA".into(), |i| c.points[i].load.to_string()),
                        (*size == sw.best).to_string(),
                    ])?;
                    all.extend(c.points.iter().cloned());
                }
                if cli.common.emit_plots {
                    let bars: Vec<_> = sw.rows.iter().map(|(s, c)| (s.to_string(), c.peak_bandwidth)).collect();
                    plot::bar_chart(&out.join(format!("subnet_seed{seed}.svg")), "peak bandwidth by subnet size", "Gbps/core", &bars)?;
                }
            }
            wr.flush()?;
            harness::write_summary_csv(create(&out, "subnet_runs.csv")?, &all)?;
        }
        Cmd::Compare { schemes, loads } => {
            let schemes = schemes.unwrap_or_else(|| cfg.sweep.schemes.clone());
            let loads = loads.unwrap_or_else(|| cfg.sweep.loads.clone());
            let mut all = Vec::new();
            let mut delta_wr = csv::Writer::from_writer(create(&out, "compare_delta.csv")?);
            delta_wr.write_record(["seed", "scheme", "baseline", "peak_bandwidth_gbps", "bandwidth_gain_pct", "latency_delta_pct", "packet_energy_delta_pct"])?;
            for &seed in &cfg.sweep.seeds.clone() {
                let cmp = harness::compare_schemes(&cfg.with_seed(seed), &schemes, &loads)?;
                for (label, c) in &cmp.curves {
                    curve_line(label, seed, c);
                    all.extend(c.points.iter().cloned());
                }
                for d in &cmp.deltas {
                    println!(
                        "seed={seed:<4} {:<6} vs {}: bandwidth {:+.2}% latency {}% energy {}%",
                        d.scheme,
                        cmp.baseline,
                        d.bandwidth_gain_pct,
                        fmt_opt(d.latency_delta_pct.map(|v| (v * 100.0).round() / 100.0)),
                        fmt_opt(d.packet_energy_delta_pct.map(|v| (v * 100.0).round() / 100.0))
                    );
                    delta_wr.write_record([
                        seed.to_string(),
                        d.scheme.clone(),
                        cmp.baseline.clone(),
                        d.peak_bandwidth.to_string(),
                        d.bandwidth_gain_pct.to_string(),
                        fmt_opt(d.latency_delta_pct),
                        fmt_opt(d.packet_energy_delta_pct),
                    ])?;
                }
                if cli.common.emit_plots {
                    plot::latency_curves(&out.join(format!("compare_latency_seed{seed}.svg")), "latency against load", &cmp.curves)?;
                    let bars: Vec<_> = cmp.deltas.iter().map(|d| (d.scheme.clone(), d.peak_bandwidth)).collect();
                    plot::bar_chart(&out.join(format!("compare_peak_seed{seed}.svg")), "peak bandwidth per core", "Gbps/core", &bars)?;
                }
            }
            delta_wr.flush()?;
            harness::write_summary_csv(create(&out, "compare_runs.csv")?, &all)?;
            harness::write_energy_csv(create(&out, "compare_energy.csv")?, &all)?;
        }
        Cmd::Tune => {
            let t = &cfg.tune;
            let ts = tuner::collect_training_set(&cfg, t.epochs, t.epoch_cycles)?;
            ts.write(create(&out, "training_set.txt")?)?;
            let opt = TuneOptions {
                tol: t.tol,
                max_iters: t.max_iters,
                rounds: t.rounds,
                mode: cfg.mac.averager,
                ..TuneOptions::default()
            };
            let res = tuner::two_step_optimize(&ts.series::<f64>(), &opt)?;
            let lv = tuner::runtime_rmse(&PidWeights::last_value(), &ts.samples, cfg.mac.averager);
            let tuned = tuner::runtime_rmse(&res.weights, &ts.samples, cfg.mac.averager);
            tuner::write_tune_report(create(&out, "tuned_weights.toml")?, &res, &ts, lv)?;
            let w = &res.weights;
            println!("weights kp={:.6} ki={:.6} kd={:.6}", w.kp, w.ki, w.kd);
            println!("J={:.6} sqrt(J)={:.6} rounds={} iterations={}", res.cost, res.rmse(), res.rounds, res.iterations);
            println!("runtime rmse: tuned={tuned:.6} last-value={lv:.6}");
        }
    }
    Ok(())
}
