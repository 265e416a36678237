// SPDX-License-Identifier: Apache-2.0

//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy_metrics::EnergyParams;
use crate::error::{Error, Result};
use crate::mac::Scheme;
use crate::network::{SimParams, TrafficDriver};
use crate::predictor::{AveragerMode, PidWeights};
use crate::routing::ForwardingTable;
use crate::topology::Topology;
use crate::traffic::{load_trace, TrafficSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub rows: usize,
    pub cols: usize,
    pub die_edge_mm: f64,
    /// Switches per wireless subnet; 0 builds a plain wired mesh.
    pub subnet_size: usize,
    pub wireless_hop_weight: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig { rows: 8, cols: 8, die_edge_mm: 20.0, subnet_size: 8, wireless_hop_weight: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacConfig {
    pub scheme: Scheme,
    pub weights: [f64; 3],
    pub averager: AveragerMode,
    pub carry_backlog: bool,
    pub starvation_floor: bool,
    /// Data flits per fixed epoch; 0 means WIs × packet size.
    pub epoch_flits: u64,
    pub max_tuples: usize,
    pub mac_delay_ns: f64,
    pub wireless_gbps: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            scheme: Scheme::Dsam,
            weights: PidWeights::<f64>::default().as_array(),
            averager: AveragerMode::Halving,
            carry_backlog: false,
            starvation_floor: true,
            epoch_flits: 0,
            max_tuples: 6,
            mac_delay_ns: 0.14,
            wireless_gbps: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    pub flit_bits: u64,
    pub packet_size: usize,
    pub pipeline: u64,
    pub clock_ghz: f64,
    pub wired_vcs: usize,
    pub wired_depth: usize,
    pub wi_vcs: usize,
    /// WI buffer depth under the prediction-driven schemes.
    pub wi_depth: usize,
    /// WI buffer depth under the token MAC; must hold a whole packet.
    pub tmac_wi_depth: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            flit_bits: 32,
            packet_size: 64,
            pipeline: 3,
            clock_ghz: 2.5,
            wired_vcs: 4,
            wired_depth: 2,
            wi_vcs: 8,
            wi_depth: 16,
            tmac_wi_depth: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub warmup: u64,
    pub measure: u64,
    pub seed: u64,
    /// Replay this trace instead of the synthetic traffic.
    pub trace: Option<PathBuf>,
    pub log_slots: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { warmup: 1000, measure: 9000, seed: 1, trace: None, log_slots: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub loads: Vec<f64>,
    pub subnet_sizes: Vec<usize>,
    pub schemes: Vec<Scheme>,
    /// Reference for relative gains; `None` compares against a wired mesh.
    pub baseline: Option<Scheme>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            loads: vec![0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0],
            subnet_sizes: vec![4, 8, 16],
            schemes: Scheme::ALL.to_vec(),
            baseline: Some(Scheme::Tmac),
            seeds: vec![1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub epochs: usize,
    pub epoch_cycles: u64,
    pub tol: f64,
    pub max_iters: usize,
    pub rounds: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig { epochs: 5000, epoch_cycles: 100, tol: 1e-9, max_iters: 10_000, rounds: 100_000 }
    }
}

/// Everything one experiment needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub mac: MacConfig,
    pub router: RouterConfig,
    pub traffic: TrafficSpec,
    pub energy: EnergyParams,
    pub sim: SimConfig,
    pub sweep: SweepConfig,
    pub tune: TuneConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, first 16 hex digits.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn is_wireless(&self) -> bool {
        self.topology.subnet_size > 0
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        if t.rows == 0 || t.cols == 0 {
            return Err(Error::Config("mesh dimensions must be positive".into()));
        }
        if t.subnet_size > 0 && (t.rows * t.cols) % t.subnet_size != 0 {
            return Err(Error::Config(format!(
                "subnet size {} does not divide {} switches",
                t.subnet_size,
                t.rows * t.cols
            )));
        }
        if self.sim.measure == 0 {
            return Err(Error::Config("measurement window must be positive".into()));
        }
        if self.sim.trace.is_none() {
            self.traffic.validate(t.rows * t.cols)?;
        }
        if self.sweep.loads.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep loads must be strictly ascending".into()));
        }
        if self.tune.epochs < 3 || self.tune.epoch_cycles == 0 {
            return Err(Error::Config("tuning needs at least 3 epochs of positive length".into()));
        }
        self.sim_params().validate()
    }

    pub fn n_wis(&self) -> usize {
        if self.topology.subnet_size == 0 {
            0
        } else {
            self.topology.rows * self.topology.cols / self.topology.subnet_size
        }
    }

    pub fn sim_params(&self) -> SimParams {
        let r = &self.router;
        let m = &self.mac;
        let epoch_flits =
            if m.epoch_flits == 0 { (self.n_wis() * r.packet_size) as u64 } else { m.epoch_flits };
        SimParams {
            flit_bits: r.flit_bits,
            packet_size: r.packet_size,
            pipeline: r.pipeline,
            wired_vcs: r.wired_vcs,
            wired_depth: r.wired_depth,
            wi_vcs: r.wi_vcs,
            wi_depth: if m.scheme == Scheme::Tmac { r.tmac_wi_depth } else { r.wi_depth },
            clock_ghz: r.clock_ghz,
            wireless_gbps: m.wireless_gbps,
            scheme: m.scheme,
            weights: PidWeights::from_array(m.weights),
            averager: m.averager,
            carry_backlog: m.carry_backlog,
            starvation_floor: m.starvation_floor,
            epoch_flits: epoch_flits.max(1),
            max_tuples: m.max_tuples,
            mac_delay_ns: m.mac_delay_ns,
            energy: self.energy.clone(),
            warmup: self.sim.warmup,
            measure: self.sim.measure,
            seed: self.sim.seed,
            log_events: false,
            log_slots: self.sim.log_slots,
        }
    }

    pub fn build_topology(&self) -> Result<Topology> {
        let t = &self.topology;
        let mesh = Topology::build_mesh(t.rows, t.cols, t.die_edge_mm)?;
        if t.subnet_size == 0 {
            Ok(mesh)
        } else {
            mesh.partition_and_place_wis(t.subnet_size)
        }
    }

    pub fn build_forwarding(&self, topo: &Topology) -> Result<ForwardingTable> {
        ForwardingTable::build(topo, self.topology.wireless_hop_weight, self.sim.seed)
    }

    pub fn traffic_driver(&self) -> Result<TrafficDriver> {
        match &self.sim.trace {
            Some(path) => Ok(TrafficDriver::Trace(load_trace(path)?)),
            None => Ok(TrafficDriver::Synthetic(self.traffic.clone())),
        }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        let mut c = self.clone();
        c.mac.scheme = scheme;
        c
    }

    pub fn with_load(&self, load: f64) -> Self {
        let mut c = self.clone();
        c.traffic.load = load;
        c
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.sim.seed = seed;
        c
    }

    /// Same configuration without wireless interfaces.
    pub fn wired(&self) -> Self {
        let mut c = self.clone();
        c.topology.subnet_size = 0;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::Pattern;

    #[test]
    fn defaults_describe_the_baseline_chip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.topology.rows * c.topology.cols, 64);
        assert_eq!(c.n_wis(), 8);
        assert_eq!(c.router.flit_bits, 32);
        assert_eq!(c.router.packet_size, 64);
        assert_eq!(c.sim_params().epoch_flits, 512);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let c = ExperimentConfig::from_toml(
            r#"
            [mac]
            scheme = "psam"
            [traffic]
            load = 0.3
            pattern = { kind = "hotspot", fraction = 0.1 }
            temporal = { kind = "bernoulli" }
            "#,
        )
        .unwrap();
        assert_eq!(c.mac.scheme, Scheme::Psam);
        assert_eq!(c.traffic.pattern, Pattern::Hotspot { fraction: 0.1, core: None });
        assert_eq!(c.router, RouterConfig::default());
        assert_eq!(c.sim_params().wi_depth, 16);
        assert_eq!(c.with_scheme(Scheme::Tmac).sim_params().wi_depth, 64);
    }

    #[test]
    fn roundtrip_and_hash() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(c.with_load(0.2).hash(), c.hash());
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ExperimentConfig::from_toml("[topology]\nsubnet_size = 7").is_err());
        assert!(ExperimentConfig::from_toml("[traffic]\nload = 0.0").is_err());
        assert!(ExperimentConfig::from_toml("[sim]\nmeasure = 0").is_err());
        assert!(ExperimentConfig::from_toml("[router]\ntmac_wi_depth = 16\n[mac]\nscheme = \"tmac\"").is_err());
        assert!(ExperimentConfig::from_toml("[bogus]\nx = 1").is_err());
        assert!(ExperimentConfig::from_toml("[sweep]\nloads = [0.2, 0.1]").is_err());
    }
}
