// SPDX-License-Identifier: Apache-2.0

//! Energy ledger and performance metrics of one run.
//!
//! The ledger keeps exact event counts (flit traversals, bits on the air,
//! transceiver-on cycles, powered cycles); energies are derived from them
//! with one multiplication per component class, so the total is exactly
//! the sum of the classes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mac::Scheme;

/// Energy and power constants. Energies in pJ, powers in mW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams {
    /// Buffer write/read plus crossbar traversal of one flit.
    pub e_switch_pj_per_flit: f64,
    pub e_wire_pj_per_bit_mm: f64,
    pub e_wireless_pj_per_bit: f64,
    pub p_tx_mw: f64,
    pub p_rx_mw: f64,
    pub p_leak_switch_mw: f64,
    /// Power of one WI's MAC unit; `None` picks the per-scheme default.
    pub p_mac_unit_mw: Option<f64>,
    /// Count receiver idle-listening energy in the per-packet energy.
    pub include_idle_listening: bool,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            e_switch_pj_per_flit: 20.0,
            e_wire_pj_per_bit_mm: 0.15,
            e_wireless_pj_per_bit: 2.06,
            p_tx_mw: 5.0,
            p_rx_mw: 10.0,
            p_leak_switch_mw: 1.0,
            p_mac_unit_mw: None,
            include_idle_listening: true,
        }
    }
}

impl EnergyParams {
    pub fn mac_unit_mw(&self, scheme: Scheme) -> f64 {
        self.p_mac_unit_mw.unwrap_or(match scheme {
            Scheme::Tmac => 0.0,
            Scheme::Psam | Scheme::Racm => 0.373,
            Scheme::Dsam => 0.286,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.e_switch_pj_per_flit,
            self.e_wire_pj_per_bit_mm,
            self.e_wireless_pj_per_bit,
            self.p_tx_mw,
            self.p_rx_mw,
            self.p_leak_switch_mw,
            self.p_mac_unit_mw.unwrap_or(0.0),
        ];
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(crate::Error::Config("energy parameters must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnergyClass {
    Switch,
    WiredLink,
    WirelessBits,
    Transmitter,
    ReceiverUseful,
    ReceiverIdle,
    Leakage,
    MacUnit,
}

impl EnergyClass {
    pub const ALL: [EnergyClass; 8] = [
        EnergyClass::Switch,
        EnergyClass::WiredLink,
        EnergyClass::WirelessBits,
        EnergyClass::Transmitter,
        EnergyClass::ReceiverUseful,
        EnergyClass::ReceiverIdle,
        EnergyClass::Leakage,
        EnergyClass::MacUnit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnergyClass::Switch => "switch",
            EnergyClass::WiredLink => "wired_link",
            EnergyClass::WirelessBits => "wireless_bits",
            EnergyClass::Transmitter => "transmitter",
            EnergyClass::ReceiverUseful => "receiver_useful",
            EnergyClass::ReceiverIdle => "receiver_idle",
            EnergyClass::Leakage => "leakage",
            EnergyClass::MacUnit => "mac_unit",
        }
    }
}

/// Ledger events.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Event {
    /// One flit through one crossbar.
    SwitchTraversal,
    /// One flit over a wired link of the given length.
    WiredHop { length_mm: f64 },
    /// Flits put on the air (data or control).
    WirelessFlits { flits: u64 },
    TransmitterOn { cycles: u64 },
    /// Receiver powered while flits addressed to it are on the air.
    ReceiverUseful { cycles: u64 },
    /// Receiver powered while nothing for it is on the air.
    ReceiverIdle { cycles: u64 },
    /// Powered cycles of the whole chip.
    Static { cycles: u64 },
    PacketDelivered { latency: u64 },
    FlitDelivered,
    /// Slot-flits allocated to and used by one WI in one slot.
    Slot { allocated: u64, used: u64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLedger {
    pub switch_flits: u64,
    /// Σ flit_bits × link length over wired hops.
    pub wired_bit_mm: f64,
    pub wireless_flits: u64,
    pub tx_cycles: u64,
    pub rx_useful_cycles: u64,
    pub rx_idle_cycles: u64,
    pub static_cycles: u64,
    pub delivered_flits: u64,
    pub delivered_packets: u64,
    pub latency_sum: u64,
    pub latency_max: u64,
    pub slot_allocated: u64,
    pub slot_used: u64,
}

/// Fixed parameters needed to turn counts into energy and rates.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerContext {
    pub flit_bits: u64,
    pub clock_ghz: f64,
    pub n_cores: usize,
    pub n_switches: usize,
    pub n_wis: usize,
    pub scheme: Scheme,
    pub energy: EnergyParams,
}

impl MetricsLedger {
    pub fn record(&mut self, event: Event, flit_bits: u64) {
        match event {
            Event::SwitchTraversal => self.switch_flits += 1,
            Event::WiredHop { length_mm } => self.wired_bit_mm += flit_bits as f64 * length_mm,
            Event::WirelessFlits { flits } => self.wireless_flits += flits,
            Event::TransmitterOn { cycles } => self.tx_cycles += cycles,
            Event::ReceiverUseful { cycles } => self.rx_useful_cycles += cycles,
            Event::ReceiverIdle { cycles } => self.rx_idle_cycles += cycles,
            Event::Static { cycles } => self.static_cycles += cycles,
            Event::PacketDelivered { latency } => {
                self.delivered_packets += 1;
                self.latency_sum += latency;
                self.latency_max = self.latency_max.max(latency);
            }
            Event::FlitDelivered => self.delivered_flits += 1,
            Event::Slot { allocated, used } => {
                self.slot_allocated += allocated;
                self.slot_used += used;
            }
        }
    }

    /// Energy of one component class, in pJ.
    pub fn energy_pj(&self, class: EnergyClass, ctx: &LedgerContext) -> f64 {
        let e = &ctx.energy;
        // Power in mW for one clock period of 1/clock_ghz ns gives pJ.
        let per_cycle = |mw: f64| mw / ctx.clock_ghz;
        match class {
            EnergyClass::Switch => self.switch_flits as f64 * e.e_switch_pj_per_flit,
            EnergyClass::WiredLink => self.wired_bit_mm * e.e_wire_pj_per_bit_mm,
            EnergyClass::WirelessBits => (self.wireless_flits * ctx.flit_bits) as f64 * e.e_wireless_pj_per_bit,
            EnergyClass::Transmitter => self.tx_cycles as f64 * per_cycle(e.p_tx_mw),
            EnergyClass::ReceiverUseful => self.rx_useful_cycles as f64 * per_cycle(e.p_rx_mw),
            EnergyClass::ReceiverIdle => self.rx_idle_cycles as f64 * per_cycle(e.p_rx_mw),
            EnergyClass::Leakage => (self.static_cycles * ctx.n_switches as u64) as f64 * per_cycle(e.p_leak_switch_mw),
            EnergyClass::MacUnit => {
                (self.static_cycles * ctx.n_wis as u64) as f64 * per_cycle(e.mac_unit_mw(ctx.scheme))
            }
        }
    }

    pub fn energy_by_class(&self, ctx: &LedgerContext) -> [f64; 8] {
        EnergyClass::ALL.map(|c| self.energy_pj(c, ctx))
    }

    pub fn total_energy_pj(&self, ctx: &LedgerContext) -> f64 {
        self.energy_by_class(ctx).iter().sum()
    }

    pub fn summarize(&self, ctx: &LedgerContext) -> Summary {
        let cycles = self.static_cycles;
        let delivered_bits = self.delivered_flits * ctx.flit_bits;
        let bandwidth = if cycles == 0 {
            0.0
        } else {
            // bits × (cycles per ns) / cycles → Gbit/s
            delivered_bits as f64 * ctx.clock_ghz / (cycles as f64 * ctx.n_cores as f64)
        };
        let by_class = self.energy_by_class(ctx);
        let total: f64 = by_class.iter().sum();
        let (avg_latency, packet_energy) = if self.delivered_packets == 0 {
            (None, None)
        } else {
            let charged = if ctx.energy.include_idle_listening { total } else { total - by_class[5] };
            (
                Some(self.latency_sum as f64 / self.delivered_packets as f64),
                Some(charged / self.delivered_packets as f64),
            )
        };
        let wasted = (self.slot_allocated > 0)
            .then(|| (self.slot_allocated - self.slot_used) as f64 / self.slot_allocated as f64);
        Summary {
            cycles,
            delivered_packets: self.delivered_packets,
            delivered_flits: self.delivered_flits,
            bandwidth_per_core_gbps: bandwidth,
            avg_latency,
            max_latency: self.latency_max,
            packet_energy_pj: packet_energy,
            wasted_slot_fraction: wasted,
            energy_by_class_pj: by_class,
            total_energy_pj: total,
        }
    }
}

/// Headline numbers of a run. `None` marks an undefined metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub cycles: u64,
    pub delivered_packets: u64,
    pub delivered_flits: u64,
    pub bandwidth_per_core_gbps: f64,
    pub avg_latency: Option<f64>,
    pub max_latency: u64,
    pub packet_energy_pj: Option<f64>,
    pub wasted_slot_fraction: Option<f64>,
    pub energy_by_class_pj: [f64; 8],
    pub total_energy_pj: f64,
}

/// Marker written for undefined metrics.
pub const UNDEFINED: &str = "NA";

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x}"))
}

/// One allocation/usage record of the per-epoch slot log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotRecord {
    pub epoch: u64,
    pub wi: usize,
    pub start_cycle: u64,
    pub allocated: u64,
    pub used: u64,
}

pub fn write_slot_csv<W: Write>(w: W, records: &[SlotRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epoch", "wi", "start_cycle", "allocated", "used"])?;
    for r in records {
        wr.write_record([
            r.epoch.to_string(),
            r.wi.to_string(),
            r.start_cycle.to_string(),
            r.allocated.to_string(),
            r.used.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> LedgerContext {
        LedgerContext {
            flit_bits: 32,
            clock_ghz: 2.5,
            n_cores: 64,
            n_switches: 64,
            n_wis: 8,
            scheme: Scheme::Dsam,
            energy: EnergyParams::default(),
        }
    }

    #[test]
    fn idle_run_is_static_only() {
        let c = ctx();
        let mut l = MetricsLedger::default();
        l.record(Event::Static { cycles: 1000 }, 32);
        let s = l.summarize(&c);
        let expected = 1000.0 * (64.0 * 1.0 + 8.0 * 0.286) / 2.5;
        assert!((s.total_energy_pj - expected).abs() <= 1e-9 * expected);
        assert_eq!(s.bandwidth_per_core_gbps, 0.0);
        assert_eq!(s.avg_latency, None);
        assert_eq!(s.packet_energy_pj, None);
        assert_eq!(s.wasted_slot_fraction, None);
    }

    #[test]
    fn wireless_packet_bits() {
        let c = ctx();
        let mut l = MetricsLedger::default();
        l.record(Event::WirelessFlits { flits: 64 }, 32);
        let e = l.energy_pj(EnergyClass::WirelessBits, &c);
        assert!((e - 4218.88).abs() < 1e-9);
    }

    #[test]
    fn wired_hop_energy() {
        let c = ctx();
        let mut l = MetricsLedger::default();
        l.record(Event::SwitchTraversal, 32);
        l.record(Event::WiredHop { length_mm: 2.5 }, 32);
        let e = l.energy_pj(EnergyClass::Switch, &c) + l.energy_pj(EnergyClass::WiredLink, &c);
        assert_eq!(e, 20.0 + 32.0 * 2.5 * 0.15);
    }

    #[test]
    fn total_is_sum_of_classes() {
        let c = ctx();
        let mut l = MetricsLedger::default();
        for ev in [
            Event::SwitchTraversal,
            Event::WiredHop { length_mm: 1.25 },
            Event::WirelessFlits { flits: 3 },
            Event::TransmitterOn { cycles: 15 },
            Event::ReceiverUseful { cycles: 7 },
            Event::ReceiverIdle { cycles: 9 },
            Event::Static { cycles: 11 },
        ] {
            l.record(ev, 32);
        }
        let s = l.summarize(&c);
        assert_eq!(s.total_energy_pj, s.energy_by_class_pj.iter().sum::<f64>());
    }

    #[test]
    fn summary_rates() {
        let c = ctx();
        let mut l = MetricsLedger::default();
        l.record(Event::Static { cycles: 100 }, 32);
        for _ in 0..64 {
            l.record(Event::FlitDelivered, 32);
        }
        l.record(Event::PacketDelivered { latency: 90 }, 32);
        l.record(Event::Slot { allocated: 64, used: 16 }, 32);
        let s = l.summarize(&c);
        assert_eq!(s.bandwidth_per_core_gbps, 64.0 * 32.0 * 2.5 / (100.0 * 64.0));
        assert_eq!(s.avg_latency, Some(90.0));
        assert_eq!(s.wasted_slot_fraction, Some(0.75));
        assert_eq!(s.packet_energy_pj, Some(s.total_energy_pj));
    }

    #[test]
    fn idle_listening_can_be_excluded() {
        let mut c = ctx();
        let mut l = MetricsLedger::default();
        l.record(Event::ReceiverIdle { cycles: 25 }, 32);
        l.record(Event::PacketDelivered { latency: 1 }, 32);
        c.energy.include_idle_listening = false;
        assert_eq!(l.summarize(&c).packet_energy_pj, Some(0.0));
    }
}
