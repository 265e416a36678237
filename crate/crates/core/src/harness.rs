// SPDX-License-Identifier: Apache-2.0

//! Experiment orchestration: single runs, load sweeps with saturation
//! detection, subnet-size sweeps and MAC comparisons.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::energy_metrics::{fmt_opt, write_slot_csv, Summary};
use crate::error::Result;
use crate::network::{write_event_csv, Network, Violations};

/// Result of one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    /// Scheme name, or `wired` for a mesh without WIs.
    pub scheme: String,
    pub load: f64,
    pub subnet_size: usize,
    pub flit_bits: u64,
    pub summary: Summary,
    pub violations: Violations,
    pub max_blocked: u64,
    pub unicast_conserved: bool,
}

impl RunReport {
    pub fn is_clean(&self) -> bool {
        self.violations.total() == 0 && self.unicast_conserved
    }
}

/// Optional artifacts a run writes next to its report.
#[derive(Clone, Debug, Default)]
pub struct RunArtifacts<'a> {
    pub event_csv: Option<&'a Path>,
    pub slot_csv: Option<&'a Path>,
}

pub fn build_network(cfg: &ExperimentConfig) -> Result<Network> {
    cfg.validate()?;
    let topo = cfg.build_topology()?;
    let ft = cfg.build_forwarding(&topo)?;
    Network::new(topo, ft, cfg.sim_params(), cfg.traffic_driver()?)
}

fn scheme_label(cfg: &ExperimentConfig) -> String {
    if cfg.is_wireless() {
        cfg.mac.scheme.name().to_string()
    } else {
        "wired".to_string()
    }
}

pub fn report_of(cfg: &ExperimentConfig, net: &Network) -> RunReport {
    RunReport {
        config_hash: cfg.hash(),
        seed: cfg.sim.seed,
        scheme: scheme_label(cfg),
        load: cfg.traffic.load,
        subnet_size: cfg.topology.subnet_size,
        flit_bits: cfg.router.flit_bits,
        summary: net.summary(),
        violations: net.violations().clone(),
        max_blocked: net.max_blocked(),
        unicast_conserved: net.unicast_conservation_holds(),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_with(cfg, &RunArtifacts::default())
}

pub fn run_with(cfg: &ExperimentConfig, art: &RunArtifacts<'_>) -> Result<RunReport> {
    let mut net = build_network(cfg)?;
    if art.event_csv.is_some() {
        net.enable_event_log();
    }
    net.run();
    if let Some(p) = art.event_csv {
        write_event_csv(std::fs::File::create(p)?, net.events())?;
    }
    if let Some(p) = art.slot_csv {
        write_slot_csv(std::fs::File::create(p)?, net.slot_log())?;
    }
    let report = report_of(cfg, &net);
    log::info!(
        "{} load={} seed={} bw={:.4} lat={}",
        report.scheme,
        report.load,
        report.seed,
        report.summary.bandwidth_per_core_gbps,
        fmt_opt(report.summary.avg_latency)
    );
    Ok(report)
}

/// Runs independent configurations in parallel; results keep input order.
pub fn run_many(cfgs: &[ExperimentConfig]) -> Result<Vec<RunReport>> {
    cfgs.par_iter().map(run).collect()
}

/// Latency-versus-load curve of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadCurve {
    pub points: Vec<RunReport>,
    /// Index of the first saturated load, if any.
    pub saturation: Option<usize>,
    pub peak_bandwidth: f64,
}

impl LoadCurve {
    pub fn latency_at(&self, load: f64) -> Option<f64> {
        self.points.iter().find(|p| p.load == load).and_then(|p| p.summary.avg_latency)
    }
}

/// First saturated index: latency above `5×` the lowest-load latency, no
/// delivered packets, or accepted bandwidth growing by less than 1 %.
pub fn detect_saturation(points: &[(Option<f64>, f64)]) -> Option<usize> {
    let base = points.first()?.0?;
    for (i, &(lat, bw)) in points.iter().enumerate() {
        match lat {
            None => return Some(i),
            Some(l) if l > 5.0 * base => return Some(i),
            _ => {}
        }
        if i > 0 && bw < points[i - 1].1 * 1.01 {
            return Some(i);
        }
    }
    None
}

/// Bandwidth at the last point before saturation (the first point when
/// already saturated, the last point when never saturated).
pub fn peak_bandwidth(points: &[(Option<f64>, f64)], saturation: Option<usize>) -> f64 {
    match saturation {
        Some(0) => points.first().map_or(0.0, |p| p.1),
        Some(i) => points[i - 1].1,
        None => points.last().map_or(0.0, |p| p.1),
    }
}

pub fn curve_from(points: Vec<RunReport>) -> LoadCurve {
    let xy: Vec<(Option<f64>, f64)> =
        points.iter().map(|p| (p.summary.avg_latency, p.summary.bandwidth_per_core_gbps)).collect();
    let saturation = detect_saturation(&xy);
    let peak_bandwidth = peak_bandwidth(&xy, saturation);
    LoadCurve { points, saturation, peak_bandwidth }
}

pub fn sweep_load(cfg: &ExperimentConfig, loads: &[f64]) -> Result<LoadCurve> {
    let cfgs: Vec<_> = loads.iter().map(|&l| cfg.with_load(l)).collect();
    Ok(curve_from(run_many(&cfgs)?))
}

/// Several load curves computed together so all runs share one thread pool.
pub fn sweep_many(cfgs: &[ExperimentConfig], loads: &[f64]) -> Result<Vec<LoadCurve>> {
    let all: Vec<_> = cfgs.iter().flat_map(|c| loads.iter().map(|&l| c.with_load(l))).collect();
    let mut reports = run_many(&all)?.into_iter();
    Ok(cfgs.iter().map(|_| curve_from(reports.by_ref().take(loads.len()).collect())).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubnetSweep {
    pub rows: Vec<(usize, LoadCurve)>,
    pub best: usize,
}

pub fn sweep_subnet(cfg: &ExperimentConfig, sizes: &[usize], loads: &[f64]) -> Result<SubnetSweep> {
    let cfgs: Vec<_> = sizes
        .iter()
        .map(|&s| {
            let mut c = cfg.clone();
            c.topology.subnet_size = s;
            c
        })
        .collect();
    let curves = sweep_many(&cfgs, loads)?;
    let rows: Vec<(usize, LoadCurve)> = sizes.iter().copied().zip(curves).collect();
    let best = rows
        .iter()
        .fold(None::<(usize, f64)>, |acc, (s, c)| match acc {
            Some((_, b)) if b >= c.peak_bandwidth => acc,
            _ => Some((*s, c.peak_bandwidth)),
        })
        .map_or(0, |x| x.0);
    Ok(SubnetSweep { rows, best })
}

/// One scheme's curve and its relative change against the baseline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeDelta {
    pub scheme: String,
    pub peak_bandwidth: f64,
    pub bandwidth_gain_pct: f64,
    /// Mean over common unsaturated loads of the latency change.
    pub latency_delta_pct: Option<f64>,
    pub packet_energy_delta_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub baseline: String,
    pub curves: Vec<(String, LoadCurve)>,
    pub deltas: Vec<SchemeDelta>,
}

fn pct(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * (value - base) / base
    }
}

fn mean_delta(curve: &LoadCurve, base: &LoadCurve, f: impl Fn(&Summary) -> Option<f64>) -> Option<f64> {
    let limit = |c: &LoadCurve| c.saturation.unwrap_or(c.points.len());
    let n = limit(curve).min(limit(base)).min(curve.points.len()).min(base.points.len());
    let d: Vec<f64> = (0..n)
        .filter_map(|i| Some(pct(f(&curve.points[i].summary)?, f(&base.points[i].summary)?)))
        .collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

/// Load curves for each scheme plus deltas against `cfg.sweep.baseline`
/// (or against the wired mesh when it is `None`).
pub fn compare_schemes(cfg: &ExperimentConfig, schemes: &[crate::mac::Scheme], loads: &[f64]) -> Result<Comparison> {
    let mut cfgs: Vec<ExperimentConfig> = schemes.iter().map(|&s| cfg.with_scheme(s)).collect();
    let baseline_idx = match cfg.sweep.baseline {
        Some(b) => match schemes.iter().position(|&s| s == b) {
            Some(i) => i,
            None => {
                cfgs.push(cfg.with_scheme(b));
                cfgs.len() - 1
            }
        },
        None => {
            cfgs.push(cfg.wired());
            cfgs.len() - 1
        }
    };
    let curves = sweep_many(&cfgs, loads)?;
    let labels: Vec<String> = cfgs.iter().map(scheme_label).collect();
    let base = &curves[baseline_idx];
    let deltas = curves
        .iter()
        .zip(&labels)
        .map(|(c, l)| SchemeDelta {
            scheme: l.clone(),
            peak_bandwidth: c.peak_bandwidth,
            bandwidth_gain_pct: pct(c.peak_bandwidth, base.peak_bandwidth),
            latency_delta_pct: mean_delta(c, base, |s| s.avg_latency),
            packet_energy_delta_pct: mean_delta(c, base, |s| s.packet_energy_pj),
        })
        .collect();
    Ok(Comparison {
        baseline: labels[baseline_idx].clone(),
        curves: labels.into_iter().zip(curves).collect(),
        deltas,
    })
}

pub const SUMMARY_HEADER: [&str; 16] = [
    "config_hash",
    "seed",
    "scheme",
    "load",
    "subnet_size",
    "flit_bits",
    "cycles",
    "delivered_packets",
    "delivered_flits",
    "bandwidth_per_core_gbps",
    "avg_latency_cycles",
    "max_latency_cycles",
    "packet_energy_pj",
    "wasted_slot_fraction",
    "total_energy_pj",
    "violations",
];

pub fn write_summary_csv<W: Write>(w: W, rows: &[RunReport]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let s = &r.summary;
        wr.write_record([
            r.config_hash.clone(),
            r.seed.to_string(),
            r.scheme.clone(),
            r.load.to_string(),
            r.subnet_size.to_string(),
            r.flit_bits.to_string(),
            s.cycles.to_string(),
            s.delivered_packets.to_string(),
            s.delivered_flits.to_string(),
            s.bandwidth_per_core_gbps.to_string(),
            fmt_opt(s.avg_latency),
            s.max_latency.to_string(),
            fmt_opt(s.packet_energy_pj),
            fmt_opt(s.wasted_slot_fraction),
            s.total_energy_pj.to_string(),
            r.violations.total().to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_energy_csv<W: Write>(w: W, rows: &[RunReport]) -> Result<()> {
    use crate::energy_metrics::EnergyClass;
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["config_hash".to_string(), "seed".to_string(), "scheme".to_string(), "load".to_string()];
    header.extend(EnergyClass::ALL.iter().map(|c| format!("{}_pj", c.name())));
    wr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.config_hash.clone(), r.seed.to_string(), r.scheme.clone(), r.load.to_string()];
        rec.extend(r.summary.energy_by_class_pj.iter().map(|e| e.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_delta_csv<W: Write>(w: W, cmp: &Comparison) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["scheme", "baseline", "peak_bandwidth_gbps", "bandwidth_gain_pct", "latency_delta_pct", "packet_energy_delta_pct"])?;
    for d in &cmp.deltas {
        wr.write_record([
            d.scheme.clone(),
            cmp.baseline.clone(),
            d.peak_bandwidth.to_string(),
            d.bandwidth_gain_pct.to_string(),
            fmt_opt(d.latency_delta_pct),
            fmt_opt(d.packet_energy_delta_pct),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_on_latency_blowup() {
        let pts = [(Some(100.0), 0.1), (Some(200.0), 0.2), (Some(600.0), 0.3)];
        assert_eq!(detect_saturation(&pts), Some(2));
        assert_eq!(peak_bandwidth(&pts, Some(2)), 0.2);
    }

    #[test]
    fn saturation_on_plateau() {
        let pts = [(Some(100.0), 0.1), (Some(120.0), 0.2), (Some(130.0), 0.201)];
        assert_eq!(detect_saturation(&pts), Some(2));
    }

    #[test]
    fn single_point_is_unsaturated() {
        let pts = [(Some(90.0), 0.05)];
        assert_eq!(detect_saturation(&pts), None);
        assert_eq!(peak_bandwidth(&pts, None), 0.05);
    }

    #[test]
    fn undefined_latency_saturates() {
        let pts = [(Some(90.0), 0.05), (None, 0.0)];
        assert_eq!(detect_saturation(&pts), Some(1));
    }

    #[test]
    fn summary_csv_header_and_row() {
        let mut cfg = ExperimentConfig::default();
        cfg.sim.warmup = 100;
        cfg.sim.measure = 400;
        let r = run(&cfg.with_load(0.01)).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &[r.clone()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
        assert!(lines.next().unwrap().starts_with(&format!("{},1,dsam,0.01,8,32,400,", r.config_hash)));
    }
}
