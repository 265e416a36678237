// SPDX-License-Identifier: Apache-2.0

//! Cycle-accurate wormhole datapath with a shared wireless medium.
//!
//! # Timing
//!
//! A flit written into an input buffer at cycle `t` may leave through the
//! crossbar at `t + P` at the earliest (`P` = pipeline depth, 3 by
//! default). A flit leaving at `d` is written downstream at `d + 1`, so one
//! wired hop costs `P + 1` cycles. Ejection is one flit per cycle per
//! switch into an infinite sink; a flit ejected at `d` is delivered at
//! `d + 1`. A packet created at `g` can inject its head at `g`; two
//! adjacent switches therefore deliver a head after `2P + 2` cycles.
//!
//! A flit switched into a WI's wireless output VC at `d` becomes eligible
//! for announcement at `d + 1`. On the air every flit lasts `A` cycles;
//! a flit whose airtime ends at `c` is written into the receiving WI's
//! input VC at `c` and may leave it at `c + P`.
//!
//! # Cycle phases
//!
//! Each cycle runs: packet creation, VC allocation and injection decisions,
//! switch allocation (read-only), the medium step, then the commit of all
//! crossbar moves. Every decision reads buffer occupancy as of the start of
//! the cycle, so iteration order cannot leak into results.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy_metrics::{Event, LedgerContext, MetricsLedger, SlotRecord, Summary};
use crate::error::{Error, Result};
use crate::mac::{
    self, compute_sleep_wake, plan_tuples_with, Candidate, Scheme, SlotInfoPacket, SlotTuple, TupleDest,
};
use crate::predictor::{AveragerMode, PidWeights, PredictionUnit};
use crate::routing::{ForwardingTable, Port};
use crate::topology::Topology;
use crate::traffic::{next_destination, Destination, InjectionProcess, TraceEvent, TrafficSpec};
use crate::energy_metrics::EnergyParams;

const N_PORTS: usize = Port::COUNT;
const WIRELESS: usize = 5;
const LOCAL: usize = 0;

/// Parameters of one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub flit_bits: u64,
    pub packet_size: usize,
    pub pipeline: u64,
    pub wired_vcs: usize,
    pub wired_depth: usize,
    pub wi_vcs: usize,
    pub wi_depth: usize,
    pub clock_ghz: f64,
    pub wireless_gbps: f64,
    pub scheme: Scheme,
    pub weights: PidWeights<f64>,
    pub averager: AveragerMode,
    /// Start each prediction epoch with the WI's residual backlog in the demand counter.
    pub carry_backlog: bool,
    pub starvation_floor: bool,
    /// Data flits per epoch for the fixed-epoch schemes.
    pub epoch_flits: u64,
    pub max_tuples: usize,
    /// Compute latency of the MAC unit.
    pub mac_delay_ns: f64,
    pub energy: EnergyParams,
    pub warmup: u64,
    pub measure: u64,
    pub seed: u64,
    pub log_events: bool,
    pub log_slots: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            flit_bits: 32,
            packet_size: 64,
            pipeline: 3,
            wired_vcs: 4,
            wired_depth: 2,
            wi_vcs: 8,
            wi_depth: 16,
            clock_ghz: 2.5,
            wireless_gbps: 16.0,
            scheme: Scheme::Dsam,
            weights: PidWeights::default(),
            averager: AveragerMode::Halving,
            carry_backlog: false,
            starvation_floor: true,
            epoch_flits: 512,
            max_tuples: 6,
            mac_delay_ns: 0.14,
            energy: EnergyParams::default(),
            warmup: 1000,
            measure: 9000,
            seed: 1,
            log_events: false,
            log_slots: false,
        }
    }
}

impl SimParams {
    /// Medium cycles per flit.
    pub fn airtime(&self) -> u64 {
        (self.flit_bits as f64 * self.clock_ghz / self.wireless_gbps - 1e-9).ceil().max(1.0) as u64
    }

    /// Flits occupied on the air by a slot information packet.
    pub fn control_flits(&self, pkt: &SlotInfoPacket) -> u64 {
        ((pkt.size_flits() as u64) * 32).div_ceil(self.flit_bits)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.flit_bits == 0 || self.packet_size == 0 || self.packet_size > u16::MAX as usize {
            return bad("flit width and packet size must be positive");
        }
        if self.wired_vcs == 0 || self.wired_depth == 0 || self.wi_vcs == 0 || self.wi_depth == 0 {
            return bad("VC counts and depths must be positive");
        }
        if self.wi_vcs > 32 {
            return bad("at most 32 wireless VCs are supported");
        }
        if self.pipeline == 0 {
            return bad("pipeline depth must be at least 1");
        }
        if !(self.clock_ghz > 0.0 && self.wireless_gbps > 0.0) {
            return bad("clock and wireless rate must be positive");
        }
        if self.max_tuples == 0 {
            return bad("max_tuples must be positive");
        }
        if self.scheme == Scheme::Tmac && self.wi_depth < self.packet_size {
            return bad("token MAC needs WI buffers that hold a whole packet");
        }
        if !self.weights.is_finite() {
            return bad("PID weights must be finite");
        }
        if self.mac_delay_ns < 0.0 || !self.mac_delay_ns.is_finite() {
            return bad("MAC delay must be non-negative");
        }
        self.energy.validate()
    }
}

/// Source of packets.
#[derive(Clone, Debug)]
pub enum TrafficDriver {
    /// Packets only from [`Network::inject_packet`].
    Manual,
    Synthetic(TrafficSpec),
    Trace(Vec<TraceEvent>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Flit {
    pkt: u32,
    seq: u16,
    ready_at: u64,
}

#[derive(Clone, Debug)]
struct Packet {
    dest: Destination,
    size: u16,
    birth: u64,
    /// Flits received per destination core (one entry for unicast).
    recv: Vec<u16>,
    copies_done: u32,
    expected_copies: u32,
    last_move: u64,
    in_network: bool,
    finished_at: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
struct Branch {
    port: Port,
    out_vc: Option<u8>,
    sent: u16,
}

#[derive(Clone, Debug, Default)]
struct InVc {
    buf: VecDeque<Flit>,
    owner: Option<u32>,
    reserved: u32,
    branches: Vec<Branch>,
}

impl InVc {
    fn is_free(&self) -> bool {
        self.owner.is_none() && self.buf.is_empty() && self.reserved == 0
    }
}

#[derive(Clone, Debug, Default)]
struct OutVc {
    buf: VecDeque<Flit>,
    owner: Option<u32>,
}

#[derive(Clone, Debug)]
struct Switch {
    inputs: [Vec<InVc>; N_PORTS],
    rr: [usize; N_PORTS],
    va_rr: [usize; N_PORTS],
}

/// MAC-side state of one wireless interface.
#[derive(Clone, Debug)]
pub struct WiState {
    pub switch: usize,
    out_vcs: Vec<OutVc>,
    pub pu: PredictionUnit<f64>,
    pub au: mac::AllocationUnit,
    /// Receive mapping (sender WI, packet tag) → wireless input VC.
    rx_map: Vec<Option<u8>>,
    slots_owned: u64,
}

impl WiState {
    pub fn queued_flits(&self) -> usize {
        self.out_vcs.iter().map(|v| v.buf.len()).sum()
    }
}

#[derive(Clone, Debug)]
struct SlotRun {
    owner: usize,
    data_start: u64,
    end: u64,
    /// (output VC, tuple index) per data flit, in transmission order.
    xfers: Vec<(u8, u16)>,
    tuples: Vec<SlotTuple>,
    /// Receivers (WI, input VC) of each tuple.
    tuple_rx: Vec<Vec<(usize, u8)>>,
    sent_per_tuple: Vec<u64>,
    next: usize,
    ctrl_flits: u64,
}

#[derive(Clone, Debug)]
struct Medium {
    owner: usize,
    epoch: u64,
    alloc: Vec<u64>,
    usage: Vec<u64>,
    slot: Option<SlotRun>,
    next_start: u64,
    busy_until: u64,
}

/// Protocol-invariant violation counters; all zero in a correct run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Violations {
    pub wormhole_order: u64,
    pub duplicate_delivery: u64,
    pub vc_overflow: u64,
    pub vc_mixing: u64,
    pub wireless_overlap: u64,
    pub sleep_wake_partition: u64,
    pub announced_mismatch: u64,
    pub starvation: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.wormhole_order
            + self.duplicate_delivery
            + self.vc_overflow
            + self.vc_mixing
            + self.wireless_overlap
            + self.sleep_wake_partition
            + self.announced_mismatch
            + self.starvation
    }
}

/// One line of the per-cycle event log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEvent {
    pub cycle: u64,
    pub kind: &'static str,
    pub node: usize,
    pub packet: u32,
    pub seq: u16,
}

pub fn write_event_csv<W: Write>(w: W, events: &[LogEvent]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["cycle", "kind", "node", "packet_id", "seq"])?;
    for e in events {
        wr.write_record([e.cycle.to_string(), e.kind.to_string(), e.node.to_string(), e.packet.to_string(), e.seq.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
struct Core {
    queue: VecDeque<u32>,
    inj_vc: Option<u8>,
    inj_seq: u16,
    process: Option<InjectionProcess>,
    credits: usize,
    rng: ChaCha8Rng,
}

#[derive(Clone, Copy, Debug)]
struct Grant {
    sw: usize,
    port: u8,
    vc: u8,
    branch: u8,
    pos: u32,
}

/// A whole simulated chip.
pub struct Network {
    p: SimParams,
    topo: Topology,
    ft: ForwardingTable,
    n: usize,
    airtime: u64,
    switches: Vec<Switch>,
    wis: Vec<WiState>,
    wi_of_switch: Vec<Option<usize>>,
    packets: Vec<Packet>,
    cores: Vec<Core>,
    traffic: TrafficDriver,
    trace_next: usize,
    hotspot: usize,
    medium: Medium,
    ledger: MetricsLedger,
    violations: Violations,
    now: u64,
    events: Vec<LogEvent>,
    slot_log: Vec<SlotRecord>,
    max_blocked: u64,
    unfinished_from: usize,
    injected_unicast_flits: u64,
    delivered_unicast_flits: u64,
    grants: Vec<Grant>,
    injections: Vec<usize>,
    wireless_arrivals: Vec<u64>,
}

fn rx_key(src_wi: usize, tag: usize, vcs: usize) -> usize {
    src_wi * vcs + tag
}

impl Network {
    pub fn new(topo: Topology, ft: ForwardingTable, p: SimParams, traffic: TrafficDriver) -> Result<Self> {
        p.validate()?;
        let n = topo.num_switches();
        if ft.num_switches() != n {
            return Err(Error::Config("forwarding table does not match topology".into()));
        }
        let n_wi = topo.num_wis();
        if let TrafficDriver::Synthetic(spec) = &traffic {
            spec.validate(n)?;
        }
        if let TrafficDriver::Trace(events) = &traffic {
            for e in events {
                if e.source >= n || matches!(e.dest, Destination::Core(d) if d >= n) {
                    return Err(Error::Config(format!("trace event {e:?} names a core outside 0..{n}")));
                }
                if e.size > u16::MAX as usize || (p.scheme == Scheme::Tmac && e.size > p.wi_depth) {
                    return Err(Error::Config(format!("trace packet size {} unsupported", e.size)));
                }
            }
        }
        let mut wi_of_switch = vec![None; n];
        for (i, &s) in topo.wi_set.iter().enumerate() {
            wi_of_switch[s] = Some(i);
        }
        let switches = (0..n)
            .map(|s| {
                let mut inputs: [Vec<InVc>; N_PORTS] = Default::default();
                inputs[LOCAL] = vec![InVc::default(); p.wired_vcs];
                for port in Port::ALL {
                    if let Port::Wired(d) = port {
                        if topo.neighbor(s, d).is_some() {
                            inputs[port.index()] = vec![InVc::default(); p.wired_vcs];
                        }
                    }
                }
                if wi_of_switch[s].is_some() {
                    inputs[WIRELESS] = vec![InVc::default(); p.wi_vcs];
                }
                Switch { inputs, rr: [0; N_PORTS], va_rr: [0; N_PORTS] }
            })
            .collect();
        let wis = topo
            .wi_set
            .iter()
            .enumerate()
            .map(|(i, &s)| WiState {
                switch: s,
                out_vcs: vec![OutVc::default(); p.wi_vcs],
                pu: PredictionUnit::new(p.averager),
                au: mac::AllocationUnit::new(p.scheme, i, n_wi),
                rx_map: vec![None; n_wi * p.wi_vcs],
                slots_owned: 0,
            })
            .collect();
        let (processes, hotspot) = match &traffic {
            TrafficDriver::Synthetic(spec) => {
                let hotspot = match spec.pattern {
                    crate::traffic::Pattern::Hotspot { core: Some(c), .. } => c,
                    _ => topo.wi_set.first().copied().unwrap_or(0),
                };
                (Some(spec.clone()), hotspot)
            }
            _ => (None, 0),
        };
        let cores = (0..n)
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
                rng.set_stream(c as u64 + 1);
                let process = processes.as_ref().map(|s| InjectionProcess::new(s, &mut rng));
                // Stationary phase of the flit accumulator.
                let credits = if process.is_some() { rng.random_range(0..p.packet_size) } else { 0 };
                Core { queue: VecDeque::new(), inj_vc: None, inj_seq: 0, process, credits, rng }
            })
            .collect();
        let alloc = Self::initial_alloc(&p, n_wi);
        let airtime = p.airtime();
        Ok(Network {
            topo,
            ft,
            n,
            airtime,
            switches,
            wis,
            wi_of_switch,
            packets: Vec::new(),
            cores,
            traffic,
            trace_next: 0,
            hotspot,
            medium: Medium {
                owner: 0,
                epoch: 0,
                usage: vec![0; n_wi],
                alloc,
                slot: None,
                next_start: 0,
                busy_until: 0,
            },
            ledger: MetricsLedger::default(),
            violations: Violations::default(),
            now: 0,
            events: Vec::new(),
            slot_log: Vec::new(),
            max_blocked: 0,
            unfinished_from: 0,
            injected_unicast_flits: 0,
            delivered_unicast_flits: 0,
            grants: Vec::new(),
            injections: Vec::new(),
            wireless_arrivals: vec![0; n_wi],
            p,
        })
    }

    fn initial_alloc(p: &SimParams, n_wi: usize) -> Vec<u64> {
        let none = vec![false; n_wi];
        match p.scheme {
            Scheme::Tmac => mac::allocate_tmac(n_wi, p.packet_size as u64),
            Scheme::Psam | Scheme::Racm => {
                mac::allocate_psam(&vec![0; n_wi], p.epoch_flits.max(1), &none, false).unwrap_or_default()
            }
            Scheme::Dsam => mac::allocate_dsam(&vec![0; n_wi], &none, false).0,
        }
    }

    pub fn params(&self) -> &SimParams {
        &self.p
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn forwarding(&self) -> &ForwardingTable {
        &self.ft
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn ledger(&self) -> &MetricsLedger {
        &self.ledger
    }

    pub fn violations(&self) -> &Violations {
        &self.violations
    }

    pub fn enable_event_log(&mut self) {
        self.p.log_events = true;
    }

    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn slot_log(&self) -> &[SlotRecord] {
        &self.slot_log
    }

    /// Flits switched into each WI's wireless output VCs since cycle 0.
    pub fn wireless_arrivals(&self) -> &[u64] {
        &self.wireless_arrivals
    }

    pub fn wis(&self) -> &[WiState] {
        &self.wis
    }

    /// Longest time any in-network packet went without a flit moving.
    pub fn max_blocked(&self) -> u64 {
        self.max_blocked
    }

    pub fn ledger_context(&self) -> LedgerContext {
        LedgerContext {
            flit_bits: self.p.flit_bits,
            clock_ghz: self.p.clock_ghz,
            n_cores: self.n,
            n_switches: self.n,
            n_wis: self.wis.len(),
            scheme: self.p.scheme,
            energy: self.p.energy.clone(),
        }
    }

    pub fn summary(&self) -> Summary {
        self.ledger.summarize(&self.ledger_context())
    }

    fn in_window(&self, t: u64) -> bool {
        t >= self.p.warmup && t < self.p.warmup + self.p.measure
    }

    fn log(&mut self, cycle: u64, kind: &'static str, node: usize, packet: u32, seq: u16) {
        if self.p.log_events {
            self.events.push(LogEvent { cycle, kind, node, packet, seq });
        }
    }

    /// Queues a packet at `src`, created at the current cycle. Returns its ID.
    pub fn inject_packet(&mut self, src: usize, dest: Destination, size: usize) -> u32 {
        assert!(src < self.n && size > 0 && size <= u16::MAX as usize);
        let (recv, expected) = match dest {
            Destination::Core(d) => {
                assert!(d < self.n);
                (vec![0; 1], 1)
            }
            Destination::Broadcast => (vec![0; self.n], self.n as u32 - 1),
        };
        let id = self.packets.len() as u32;
        self.packets.push(Packet {
            dest,
            size: size as u16,
            birth: self.now,
            recv,
            copies_done: 0,
            expected_copies: expected,
            last_move: self.now,
            in_network: false,
            finished_at: if expected == 0 { Some(self.now) } else { None },
        });
        self.cores[src].queue.push_back(id);
        self.log(self.now, "create", src, id, 0);
        id
    }

    /// Cycle at which every copy of the packet was delivered, if it has been.
    pub fn packet_finished_at(&self, id: u32) -> Option<u64> {
        self.packets[id as usize].finished_at
    }

    pub fn packet_birth(&self, id: u32) -> u64 {
        self.packets[id as usize].birth
    }

    pub fn num_packets(&self) -> usize {
        self.packets.len()
    }

    /// Runs warmup plus measurement.
    pub fn run(&mut self) {
        let end = self.p.warmup + self.p.measure;
        self.run_until(end);
    }

    pub fn run_until(&mut self, end: u64) {
        while self.now < end {
            self.step();
        }
        self.check_watchdog();
    }

    /// Runs until all queued packets are delivered or `limit` cycles pass.
    pub fn drain(&mut self, limit: u64) -> bool {
        let stop = self.now + limit;
        while self.now < stop {
            if self.packets.iter().all(|p| p.finished_at.is_some()) {
                return true;
            }
            self.step();
        }
        self.packets.iter().all(|p| p.finished_at.is_some())
    }

    pub fn step(&mut self) {
        self.generate_traffic();
        self.allocate_vcs();
        self.plan_injections();
        self.plan_switching();
        self.medium_step();
        self.commit();
        if self.in_window(self.now) {
            self.ledger.record(Event::Static { cycles: 1 }, self.p.flit_bits);
        }
        self.now += 1;
        if self.now % 1024 == 0 {
            self.check_watchdog();
        }
    }

    fn generate_traffic(&mut self) {
        match &self.traffic {
            TrafficDriver::Manual => {}
            TrafficDriver::Trace(events) => {
                let mut due = Vec::new();
                while let Some(e) = events.get(self.trace_next) {
                    if e.cycle > self.now {
                        break;
                    }
                    due.push(*e);
                    self.trace_next += 1;
                }
                for e in due {
                    self.inject_packet(e.source, e.dest, e.size);
                }
            }
            TrafficDriver::Synthetic(spec) => {
                let spec = spec.clone();
                for c in 0..self.n {
                    let core = &mut self.cores[c];
                    let proc = core.process.as_mut().expect("synthetic source");
                    if !proc.should_inject(&mut core.rng) {
                        continue;
                    }
                    core.credits += 1;
                    if core.credits == self.p.packet_size {
                        core.credits = 0;
                        let dest = next_destination(&spec.pattern, c, self.n, self.hotspot, &mut core.rng);
                        self.inject_packet(c, dest, self.p.packet_size);
                    }
                }
            }
        }
    }

    /// Downstream-VC allocation for head flits that are ready to leave.
    /// Each output keeps a round-robin pointer that moves past its last winner.
    fn allocate_vcs(&mut self) {
        let now = self.now;
        // (output port, flat input index, port, vc, branch)
        let mut reqs: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
        for s in 0..self.n {
            reqs.clear();
            let mut flat = 0;
            for port in 0..N_PORTS {
                let n_vc = self.switches[s].inputs[port].len();
                for vc in 0..n_vc {
                    if !self.route_head(s, port, vc, now) {
                        continue;
                    }
                    for (b, br) in self.switches[s].inputs[port][vc].branches.iter().enumerate() {
                        if br.out_vc.is_none() && br.port != Port::Local && br.sent == 0 {
                            reqs.push((br.port.index(), flat + vc, port, vc, b));
                        }
                    }
                }
                flat += n_vc;
            }
            if reqs.is_empty() {
                continue;
            }
            let total = flat;
            let va_rr = self.switches[s].va_rr;
            reqs.sort_unstable_by_key(|r| (r.0, (r.1 + total - va_rr[r.0] % total) % total));
            for &(out, idx, port, vc, b) in &reqs {
                if self.grant_vc(s, port, vc, b) {
                    self.switches[s].va_rr[out] = (idx + 1) % total;
                }
            }
        }
    }

    /// Route computation on a ready head flit; false when nothing is waiting.
    fn route_head(&mut self, s: usize, port: usize, vc: usize, now: u64) -> bool {
        let invc = &self.switches[s].inputs[port][vc];
        let Some(front) = invc.buf.front().copied() else { return false };
        if front.ready_at > now {
            return false;
        }
        if invc.branches.is_empty() {
            debug_assert_eq!(front.seq, 0);
            let pkt = &self.packets[front.pkt as usize];
            let branches: Vec<Branch> = match pkt.dest {
                Destination::Core(d) => {
                    vec![Branch { port: self.ft.next_hop(s, d).port, out_vc: None, sent: 0 }]
                }
                Destination::Broadcast => self
                    .ft
                    .broadcast_ports(s, Port::from_index(port))
                    .iter()
                    .map(|p| Branch { port: p, out_vc: None, sent: 0 })
                    .collect(),
            };
            self.switches[s].inputs[port][vc].branches = branches;
        }
        true
    }

    fn grant_vc(&mut self, s: usize, port: usize, vc: usize, b: usize) -> bool {
        let pkt = self.switches[s].inputs[port][vc].buf.front().expect("head present").pkt;
        let br = self.switches[s].inputs[port][vc].branches[b];
        let granted = match br.port {
            Port::Wired(d) => {
                let nb = self.topo.neighbor(s, d).expect("tree edge exists");
                let ip = Port::Wired(d.opposite()).index();
                let pos = self.switches[nb].inputs[ip].iter().position(InVc::is_free);
                if let Some(v) = pos {
                    self.switches[nb].inputs[ip][v].owner = Some(pkt);
                }
                pos
            }
            Port::Wireless => {
                let wi = self.wi_of_switch[s].expect("wireless port at a WI");
                let pos = self.wis[wi].out_vcs.iter().position(|o| o.owner.is_none() && o.buf.is_empty());
                if let Some(v) = pos {
                    self.wis[wi].out_vcs[v].owner = Some(pkt);
                }
                pos
            }
            Port::Local => unreachable!(),
        };
        if let Some(v) = granted {
            self.switches[s].inputs[port][vc].branches[b].out_vc = Some(v as u8);
        }
        granted.is_some()
    }

    fn plan_injections(&mut self) {
        self.injections.clear();
        for c in 0..self.n {
            let Some(&pid) = self.cores[c].queue.front() else { continue };
            if self.cores[c].inj_vc.is_none() {
                let pos = self.switches[c].inputs[LOCAL].iter().position(InVc::is_free);
                let Some(v) = pos else { continue };
                self.switches[c].inputs[LOCAL][v].owner = Some(pid);
                self.cores[c].inj_vc = Some(v as u8);
                self.cores[c].inj_seq = 0;
            }
            let v = self.cores[c].inj_vc.unwrap() as usize;
            if self.switches[c].inputs[LOCAL][v].buf.len() < self.p.wired_depth {
                self.injections.push(c);
            }
        }
    }

    fn downstream_has_space(&self, s: usize, br: &Branch) -> bool {
        match br.port {
            Port::Local => true,
            Port::Wired(d) => {
                let Some(v) = br.out_vc else { return false };
                let nb = self.topo.neighbor(s, d).expect("tree edge exists");
                let dv = &self.switches[nb].inputs[Port::Wired(d.opposite()).index()][v as usize];
                dv.buf.len() + (dv.reserved as usize) < self.p.wired_depth
            }
            Port::Wireless => {
                let Some(v) = br.out_vc else { return false };
                let wi = self.wi_of_switch[s].expect("wireless port at a WI");
                self.wis[wi].out_vcs[v as usize].buf.len() < self.p.wi_depth
            }
        }
    }

    /// Separable round-robin switch allocation; read-only.
    fn plan_switching(&mut self) {
        let now = self.now;
        let mut grants = std::mem::take(&mut self.grants);
        grants.clear();
        // (output port, flat input index, port, vc, branch, pos, seq)
        let mut reqs: Vec<(usize, usize, u8, u8, u8, u32, u16)> = Vec::new();
        for s in 0..self.n {
            reqs.clear();
            let sw = &self.switches[s];
            let mut flat = 0;
            for (port, vcs) in sw.inputs.iter().enumerate() {
                for (v, invc) in vcs.iter().enumerate() {
                    let idx = flat + v;
                    let Some(front) = invc.buf.front() else { continue };
                    for (b, br) in invc.branches.iter().enumerate() {
                        let pkt_size = self.packets[front.pkt as usize].size;
                        if br.sent >= pkt_size {
                            continue;
                        }
                        let pos = (br.sent - front.seq) as usize;
                        let Some(f) = invc.buf.get(pos) else { continue };
                        if f.ready_at > now || !self.downstream_has_space(s, br) {
                            continue;
                        }
                        reqs.push((br.port.index(), idx, port as u8, v as u8, b as u8, pos as u32, f.seq));
                    }
                }
                flat += vcs.len();
            }
            if reqs.is_empty() {
                continue;
            }
            let total = flat;
            let mut input_used: [Option<(u8, u16)>; N_PORTS] = [None; N_PORTS];
            let start = (now as usize) % N_PORTS;
            for k in 0..N_PORTS {
                let out = (start + k) % N_PORTS;
                let rr = sw.rr[out];
                let best = reqs
                    .iter()
                    .filter(|r| r.0 == out)
                    .filter(|r| match input_used[r.2 as usize] {
                        None => true,
                        Some((v, seq)) => v == r.3 && seq == r.6,
                    })
                    .min_by_key(|r| (r.1 + total - rr % total) % total);
                if let Some(&(_, _, port, vc, b, pos, seq)) = best {
                    input_used[port as usize] = Some((vc, seq));
                    grants.push(Grant { sw: s, port, vc, branch: b, pos });
                }
            }
        }
        self.grants = grants;
    }

    fn commit(&mut self) {
        let now = self.now;
        let pipe = self.p.pipeline;
        let grants = std::mem::take(&mut self.grants);
        for g in &grants {
            let (s, port, vc) = (g.sw, g.port as usize, g.vc as usize);
            let invc = &mut self.switches[s].inputs[port][vc];
            let flit = invc.buf[g.pos as usize];
            let br = invc.branches[g.branch as usize];
            invc.branches[g.branch as usize].sent += 1;
            let out = br.port.index();
            let total: usize = self.switches[s].inputs.iter().map(|v| v.len()).sum();
            let flat = self.switches[s].inputs[..port].iter().map(|v| v.len()).sum::<usize>() + vc;
            self.switches[s].rr[out] = (flat + 1) % total;
            self.packets[flit.pkt as usize].last_move = now;
            if self.in_window(now) {
                self.ledger.record(Event::SwitchTraversal, self.p.flit_bits);
            }
            match br.port {
                Port::Local => self.deliver(flit, s, now + 1),
                Port::Wired(d) => {
                    let nb = self.topo.neighbor(s, d).expect("tree edge exists");
                    if self.in_window(now) {
                        self.ledger.record(Event::WiredHop { length_mm: self.topo.link_length(d) }, self.p.flit_bits);
                    }
                    let ip = Port::Wired(d.opposite()).index();
                    let v = br.out_vc.expect("allocated") as usize;
                    self.push_in(nb, ip, v, Flit { ready_at: now + 1 + pipe, ..flit });
                    self.log(now, "hop", s, flit.pkt, flit.seq);
                }
                Port::Wireless => {
                    let wi = self.wi_of_switch[s].expect("WI");
                    let v = br.out_vc.expect("allocated") as usize;
                    let ovc = &mut self.wis[wi].out_vcs[v];
                    if ovc.owner != Some(flit.pkt) {
                        self.violations.vc_mixing += 1;
                    }
                    ovc.buf.push_back(Flit { ready_at: now + 1, ..flit });
                    if ovc.buf.len() > self.p.wi_depth {
                        self.violations.vc_overflow += 1;
                    }
                    self.wis[wi].pu.on_flit_to_wireless();
                    self.wireless_arrivals[wi] += 1;
                    self.log(now, "to_wireless", s, flit.pkt, flit.seq);
                }
            }
        }
        // Retire flits every branch has forwarded; free VCs after the tail.
        for g in &grants {
            let size_of = |pkt: u32, pk: &[Packet]| pk[pkt as usize].size;
            let invc = &mut self.switches[g.sw].inputs[g.port as usize][g.vc as usize];
            let min_sent = invc.branches.iter().map(|b| b.sent).min().unwrap_or(0);
            while let Some(f) = invc.buf.front() {
                if f.seq >= min_sent {
                    break;
                }
                let f = invc.buf.pop_front().unwrap();
                if f.seq + 1 == size_of(f.pkt, &self.packets) {
                    invc.owner = None;
                    invc.branches.clear();
                }
            }
        }
        self.grants = grants;
        // Injection of one flit per core.
        for i in 0..self.injections.len() {
            let c = self.injections[i];
            let pid = *self.cores[c].queue.front().expect("queued packet");
            let v = self.cores[c].inj_vc.expect("local VC") as usize;
            let seq = self.cores[c].inj_seq;
            let pkt = &mut self.packets[pid as usize];
            pkt.in_network = true;
            pkt.last_move = now;
            if matches!(pkt.dest, Destination::Core(_)) {
                self.injected_unicast_flits += 1;
            }
            let size = pkt.size;
            self.push_in(c, LOCAL, v, Flit { pkt: pid, seq, ready_at: now + pipe });
            self.log(now, "inject", c, pid, seq);
            self.cores[c].inj_seq += 1;
            if self.cores[c].inj_seq == size {
                self.cores[c].queue.pop_front();
                self.cores[c].inj_vc = None;
            }
        }
    }

    fn push_in(&mut self, s: usize, port: usize, vc: usize, flit: Flit) {
        let depth = if port == WIRELESS { self.p.wi_depth } else { self.p.wired_depth };
        let invc = &mut self.switches[s].inputs[port][vc];
        if invc.owner != Some(flit.pkt) {
            self.violations.vc_mixing += 1;
        }
        invc.buf.push_back(flit);
        if invc.buf.len() + invc.reserved as usize > depth {
            self.violations.vc_overflow += 1;
        }
    }

    fn deliver(&mut self, flit: Flit, core: usize, t: u64) {
        let in_window = self.in_window(t);
        let warmup = self.p.warmup;
        let pkt = &mut self.packets[flit.pkt as usize];
        let slot = match pkt.dest {
            Destination::Core(_) => {
                self.delivered_unicast_flits += 1;
                0
            }
            Destination::Broadcast => core,
        };
        if pkt.recv[slot] >= pkt.size {
            self.violations.duplicate_delivery += 1;
            return;
        }
        if pkt.recv[slot] != flit.seq {
            self.violations.wormhole_order += 1;
        }
        pkt.recv[slot] += 1;
        if in_window {
            self.ledger.record(Event::FlitDelivered, self.p.flit_bits);
        }
        if pkt.recv[slot] == pkt.size {
            pkt.copies_done += 1;
            let birth = pkt.birth;
            if pkt.copies_done == pkt.expected_copies {
                pkt.finished_at = Some(t);
            }
            if in_window && birth >= warmup {
                self.ledger.record(Event::PacketDelivered { latency: t - birth }, self.p.flit_bits);
            }
            self.log(t, "deliver", core, flit.pkt, flit.seq);
        }
    }

    fn check_watchdog(&mut self) {
        while self.unfinished_from < self.packets.len() && self.packets[self.unfinished_from].finished_at.is_some() {
            self.unfinished_from += 1;
        }
        for p in &self.packets[self.unfinished_from..] {
            if p.in_network && p.finished_at.is_none() {
                self.max_blocked = self.max_blocked.max(self.now - p.last_move);
            }
        }
    }

    /// Unicast flits injected but not yet delivered equal the unicast flits buffered.
    pub fn unicast_conservation_holds(&self) -> bool {
        let is_uni = |f: &Flit| matches!(self.packets[f.pkt as usize].dest, Destination::Core(_));
        let mut buffered = 0u64;
        for sw in &self.switches {
            for vcs in &sw.inputs {
                for v in vcs {
                    buffered += v.buf.iter().filter(|f| is_uni(f)).count() as u64;
                }
            }
        }
        for wi in &self.wis {
            for v in &wi.out_vcs {
                buffered += v.buf.iter().filter(|f| is_uni(f)).count() as u64;
            }
        }
        self.injected_unicast_flits == self.delivered_unicast_flits + buffered
    }

    /// Every finished packet reached each destination exactly once with all flits.
    pub fn delivery_integrity_holds(&self) -> bool {
        self.packets.iter().all(|p| {
            let complete = p.recv.iter().filter(|&&r| r == p.size).count() as u32;
            match p.finished_at {
                Some(_) => complete == p.expected_copies && p.recv.iter().all(|&r| r == 0 || r == p.size),
                None => complete < p.expected_copies || p.expected_copies == 0,
            }
        })
    }

    // ---------------------------------------------------------------- medium

    fn medium_step(&mut self) {
        if self.wis.is_empty() {
            return;
        }
        let now = self.now;
        if let Some(run) = &self.medium.slot {
            if now >= run.end {
                self.finish_slot();
            }
        }
        if self.medium.slot.is_none() && now >= self.medium.next_start {
            self.start_slot();
        }
        let a = self.airtime;
        loop {
            let Some(run) = self.medium.slot.as_ref() else { break };
            if run.next >= run.xfers.len() || run.data_start + run.next as u64 * a != now {
                break;
            }
            self.transmit_next();
        }
    }

    /// WIs that receive a flit of the packet held in `owner`'s output VC `vc`.
    fn receivers_of(&self, owner: usize, pkt: u32) -> (TupleDest, Vec<usize>) {
        let sw = self.wis[owner].switch;
        match self.packets[pkt as usize].dest {
            Destination::Core(d) => {
                let nh = self.ft.next_hop(sw, d);
                debug_assert_eq!(nh.port, Port::Wireless);
                let r = self.wi_of_switch[nh.next].expect("wireless hop ends at a WI");
                (TupleDest::Wi(r), vec![r])
            }
            Destination::Broadcast => {
                let rx = self
                    .ft
                    .broadcast_receivers(sw)
                    .iter()
                    .filter(|&&s| s != sw)
                    .map(|&s| self.wi_of_switch[s].expect("domain member is a WI"))
                    .collect();
                (TupleDest::Broadcast, rx)
            }
        }
    }

    fn ready_prefix(&self, owner: usize, vc: usize) -> u64 {
        let now = self.now;
        self.wis[owner].out_vcs[vc].buf.iter().take_while(|f| f.ready_at <= now).count() as u64
    }

    fn start_slot(&mut self) {
        let now = self.now;
        let o = self.medium.owner;
        let a = self.airtime;
        let scheme = self.p.scheme;
        if now < self.medium.busy_until {
            self.violations.wireless_overlap += 1;
        }
        // Prediction for the coming rotation, shared in the slot header.
        if scheme.is_dynamic() {
            let wi = &mut self.wis[o];
            if wi.slots_owned > 0 {
                wi.pu.end_of_epoch(&self.p.weights);
                if self.p.carry_backlog {
                    wi.pu.demand_counter = wi.queued_flits() as u64;
                }
            }
        }
        self.wis[o].slots_owned += 1;
        let demand = self.wis[o].pu.demand_self.min(mac::MAX_DEMAND);
        let slot_len = self.medium.alloc[o];
        // Candidate packets and receiver-side reservations.
        let mut cands = Vec::new();
        for v in 0..self.p.wi_vcs {
            if let Some(pkt) = self.wis[o].out_vcs[v].owner {
                let avail = self.ready_prefix(o, v);
                if avail == 0 {
                    continue;
                }
                let (dest, _) = self.receivers_of(o, pkt);
                let p = &self.packets[pkt as usize];
                cands.push(Candidate { vc: v, dest, age: p.birth * (u32::MAX as u64 + 1) + pkt as u64, available: avail });
            }
        }
        let mut tuple_rx: Vec<Vec<(usize, u8)>> = Vec::new();
        let tuples = if scheme == Scheme::Tmac {
            self.plan_token(&cands, &mut tuple_rx)
        } else {
            let max_t = self.p.max_tuples.min(self.p.wi_vcs);
            let mut rx_acc = Vec::new();
            let tuples = {
                let this = &mut *self;
                plan_tuples_with(&cands, slot_len, max_t, |c, want| {
                    let n = this.admit(o, c.vc, want, false);
                    if n > 0 {
                        rx_acc.push(this.reserve(o, c.vc, n));
                    }
                    n
                })
            };
            tuple_rx = rx_acc;
            tuples
        };
        let info = SlotInfoPacket { src_wi: o, demand, tuples };
        let ctrl_flits = if scheme.is_dynamic() { self.p.control_flits(&info) } else { 1 };
        for r in 0..self.wis.len() {
            self.wis[r].au.observe(&info);
        }
        let data: u64 = info.data_flits();
        let data_start = now + ctrl_flits * a;
        let end = if scheme.fixed_slots() { data_start + slot_len * a } else { data_start + data * a };
        let mut xfers = Vec::with_capacity(data as usize);
        for (ti, t) in info.tuples.iter().enumerate() {
            for _ in 0..t.num_flits {
                xfers.push((t.pkt_id as u8, ti as u16));
            }
        }
        let allocated = if scheme == Scheme::Tmac { self.p.packet_size as u64 } else { slot_len };
        self.medium.usage[o] = data;
        if self.in_window(now) {
            self.account_slot_energy(&info, ctrl_flits, end - now, &tuple_rx);
            self.ledger.record(Event::Slot { allocated, used: data }, self.p.flit_bits);
        }
        if self.p.log_slots {
            self.slot_log.push(SlotRecord { epoch: self.medium.epoch, wi: o, start_cycle: now, allocated, used: data });
        }
        self.log(now, "slot_start", self.wis[o].switch, u32::MAX, 0);
        let n_t = info.tuples.len();
        self.medium.busy_until = end;
        self.medium.slot = Some(SlotRun {
            owner: o,
            data_start,
            end,
            xfers,
            tuples: info.tuples,
            tuple_rx,
            sent_per_tuple: vec![0; n_t],
            next: 0,
            ctrl_flits,
        });
    }

    /// Whole-packet token rule: the oldest complete packet whose receivers
    /// all have a free VC.
    fn plan_token(&mut self, cands: &[Candidate], tuple_rx: &mut Vec<Vec<(usize, u8)>>) -> Vec<SlotTuple> {
        let mut order: Vec<&Candidate> = cands.iter().collect();
        order.sort_by_key(|c| (c.age, c.vc));
        let o = self.medium.owner;
        for c in order {
            let pkt = self.wis[o].out_vcs[c.vc].owner.expect("owned");
            let size = self.packets[pkt as usize].size as u64;
            if c.available < size {
                continue;
            }
            if self.admit(o, c.vc, size, true) == size {
                tuple_rx.push(self.reserve(o, c.vc, size));
                return vec![SlotTuple { dest: c.dest, pkt_id: c.vc, num_flits: size }];
            }
        }
        Vec::new()
    }

    /// Flits (≤ `want`) every receiver of `owner`'s VC can accept now.
    fn admit(&self, owner: usize, vc: usize, want: u64, whole: bool) -> u64 {
        let pkt = self.wis[owner].out_vcs[vc].owner.expect("owned");
        let (_, rx) = self.receivers_of(owner, pkt);
        let key = rx_key(owner, vc, self.p.wi_vcs);
        let mut n = want;
        for r in rx {
            let port = &self.switches[self.wis[r].switch].inputs[WIRELESS];
            let space = match self.wis[r].rx_map[key] {
                Some(v) if !whole => {
                    let iv = &port[v as usize];
                    self.p.wi_depth.saturating_sub(iv.buf.len() + iv.reserved as usize) as u64
                }
                Some(_) => 0,
                None => {
                    if port.iter().any(InVc::is_free) {
                        self.p.wi_depth as u64
                    } else {
                        0
                    }
                }
            };
            n = n.min(space);
        }
        n
    }

    /// Reserves receiver buffer space for `n` flits; returns the receivers.
    fn reserve(&mut self, owner: usize, vc: usize, n: u64) -> Vec<(usize, u8)> {
        let pkt = self.wis[owner].out_vcs[vc].owner.expect("owned");
        let (_, rx) = self.receivers_of(owner, pkt);
        let key = rx_key(owner, vc, self.p.wi_vcs);
        let mut out = Vec::with_capacity(rx.len());
        for r in rx {
            let sw = self.wis[r].switch;
            let v = match self.wis[r].rx_map[key] {
                Some(v) => v,
                None => {
                    let v = self.switches[sw].inputs[WIRELESS].iter().position(InVc::is_free).expect("admitted") as u8;
                    self.switches[sw].inputs[WIRELESS][v as usize].owner = Some(pkt);
                    self.wis[r].rx_map[key] = Some(v);
                    v
                }
            };
            self.switches[sw].inputs[WIRELESS][v as usize].reserved += n as u32;
            out.push((r, v));
        }
        out
    }

    fn account_slot_energy(
        &mut self,
        info: &SlotInfoPacket,
        ctrl_flits: u64,
        slot_cycles: u64,
        tuple_rx: &[Vec<(usize, u8)>],
    ) {
        let a = self.airtime;
        let bits = self.p.flit_bits;
        let o = info.src_wi;
        let data = info.data_flits();
        self.ledger.record(Event::WirelessFlits { flits: ctrl_flits + data }, bits);
        self.ledger.record(Event::TransmitterOn { cycles: (ctrl_flits + data) * a }, bits);
        for r in 0..self.wis.len() {
            if r == o {
                continue;
            }
            let accepted: u64 = info
                .tuples
                .iter()
                .zip(tuple_rx)
                .filter(|(_, rx)| rx.iter().any(|&(w, _)| w == r))
                .map(|(t, _)| t.num_flits)
                .sum();
            let (on, useful) = if self.p.scheme == Scheme::Tmac {
                // No sleep unit: receivers listen through the whole slot.
                (slot_cycles, (ctrl_flits + accepted) * a)
            } else {
                let sw = compute_sleep_wake(&info.tuples, r);
                if sw.initial_sleep + sw.wake + sw.post_wake != data {
                    self.violations.sleep_wake_partition += 1;
                }
                ((ctrl_flits + sw.wake) * a, (ctrl_flits + accepted) * a)
            };
            let useful = useful.min(on);
            self.ledger.record(Event::ReceiverUseful { cycles: useful }, bits);
            self.ledger.record(Event::ReceiverIdle { cycles: on - useful }, bits);
        }
    }

    fn transmit_next(&mut self) {
        let a = self.airtime;
        let pipe = self.p.pipeline;
        let now = self.now;
        let run = self.medium.slot.as_mut().expect("slot running");
        let (vc, ti) = run.xfers[run.next];
        run.next += 1;
        run.sent_per_tuple[ti as usize] += 1;
        let owner = run.owner;
        let arrive = now + a;
        let rx = run.tuple_rx[ti as usize].clone();
        let Some(flit) = self.wis[owner].out_vcs[vc as usize].buf.pop_front() else {
            self.violations.announced_mismatch += 1;
            return;
        };
        if flit.ready_at > now {
            self.violations.announced_mismatch += 1;
        }
        let pkt = &mut self.packets[flit.pkt as usize];
        pkt.last_move = now;
        let is_tail = flit.seq + 1 == pkt.size;
        for &(r, v) in &rx {
            let sw = self.wis[r].switch;
            let iv = &mut self.switches[sw].inputs[WIRELESS][v as usize];
            iv.reserved -= 1;
            self.push_in(sw, WIRELESS, v as usize, Flit { ready_at: arrive + pipe, ..flit });
        }
        self.log(now, "wireless_tx", self.wis[owner].switch, flit.pkt, flit.seq);
        if is_tail {
            self.wis[owner].out_vcs[vc as usize].owner = None;
            let key = rx_key(owner, vc as usize, self.p.wi_vcs);
            for &(r, _) in &rx {
                self.wis[r].rx_map[key] = None;
            }
        }
    }

    fn finish_slot(&mut self) {
        let run = self.medium.slot.take().expect("slot running");
        if run.next != run.xfers.len()
            || run.tuples.iter().zip(&run.sent_per_tuple).any(|(t, &s)| t.num_flits != s)
        {
            self.violations.announced_mismatch += 1;
        }
        let n_wi = self.wis.len();
        let mut next_start = run.end;
        if run.owner + 1 == n_wi {
            next_start += self.reallocate(&run);
            self.medium.epoch += 1;
        }
        self.medium.owner = mac::advance_ring(run.owner, n_wi);
        self.medium.next_start = next_start;
    }

    /// Allocation for the next epoch; returns the stall it adds to the medium.
    fn reallocate(&mut self, last: &SlotRun) -> u64 {
        let n_wi = self.wis.len();
        let nonempty: Vec<bool> = self.wis.iter().map(|w| w.queued_flits() > 0).collect();
        let floor = self.p.starvation_floor;
        let demands = self.wis[0].au.reg_demand.clone();
        let alloc = match self.p.scheme {
            Scheme::Tmac => mac::allocate_tmac(n_wi, self.p.packet_size as u64),
            Scheme::Psam => mac::allocate_psam(&demands, self.p.epoch_flits, &nonempty, floor)
                .unwrap_or_else(|_| mac::allocate_psam(&demands, self.p.epoch_flits, &nonempty, false).unwrap()),
            Scheme::Dsam => mac::allocate_dsam(&demands, &nonempty, floor).0,
            Scheme::Racm => {
                mac::allocate_racm(&self.medium.usage, &self.medium.alloc, self.p.epoch_flits, &nonempty, floor)
                    .unwrap_or_else(|_| self.medium.alloc.clone())
            }
        };
        if floor && self.p.scheme != Scheme::Tmac {
            for i in 0..n_wi {
                if nonempty[i] && alloc[i] == 0 {
                    self.violations.starvation += 1;
                }
            }
        }
        self.medium.alloc = alloc;
        for u in &mut self.medium.usage {
            *u = 0;
        }
        if !self.p.scheme.is_dynamic() {
            return 0;
        }
        // The MAC unit computes while the rest of the last slot is on the air,
        // starting once the demand field of its header has been received.
        let bits_after_demand = (last.ctrl_flits * self.p.flit_bits).saturating_sub(26)
            + last.xfers.len() as u64 * self.p.flit_bits;
        let slack_ns = bits_after_demand as f64 / self.p.wireless_gbps;
        let excess_ns = (self.p.mac_delay_ns - slack_ns).max(0.0);
        (excess_ns * self.p.clock_ghz).ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::Pattern;

    fn wired_mesh(rows: usize, cols: usize) -> (Topology, ForwardingTable) {
        let t = Topology::build_mesh(rows, cols, 20.0).unwrap();
        let ft = ForwardingTable::build(&t, 1.0, 0).unwrap();
        (t, ft)
    }

    fn manual(t: Topology, ft: ForwardingTable, p: SimParams) -> Network {
        Network::new(t, ft, p, TrafficDriver::Manual).unwrap()
    }

    #[test]
    fn airtime_values() {
        let mut p = SimParams::default();
        assert_eq!(p.airtime(), 5);
        p.flit_bits = 64;
        assert_eq!(p.airtime(), 10);
        p.flit_bits = 128;
        assert_eq!(p.airtime(), 20);
    }

    #[test]
    fn adjacent_head_latency_golden() {
        let (t, ft) = wired_mesh(2, 2);
        let p = SimParams { warmup: 0, measure: 1000, log_events: true, ..SimParams::default() };
        let mut net = manual(t, ft, p);
        let id = net.inject_packet(0, Destination::Core(1), 1);
        net.run_until(100);
        // Head-only packet: inject at 0, leave switch 0 at 3, written at 4,
        // leave switch 1 at 7, delivered at 8.
        assert_eq!(net.packet_finished_at(id), Some(8));
        let kinds: Vec<(&str, u64)> = net.events().iter().map(|e| (e.kind, e.cycle)).collect();
        assert_eq!(kinds, vec![("create", 0), ("inject", 0), ("hop", 3), ("deliver", 8)]);
    }

    #[test]
    fn zero_injection_is_silent() {
        let (t, ft) = wired_mesh(4, 4);
        let p = SimParams { warmup: 0, measure: 500, ..SimParams::default() };
        let mut net = manual(t, ft, p);
        net.run();
        let l = net.ledger();
        assert_eq!(l.delivered_flits, 0);
        assert_eq!(l.switch_flits, 0);
        assert_eq!(l.static_cycles, 500);
    }

    #[test]
    fn contending_packets_stay_in_order() {
        let (t, ft) = wired_mesh(2, 2);
        let p = SimParams { warmup: 0, measure: 2000, ..SimParams::default() };
        let mut net = manual(t, ft, p);
        let a = net.inject_packet(0, Destination::Core(1), 16);
        let b = net.inject_packet(2, Destination::Core(1), 16);
        assert!(net.drain(2000));
        assert!(net.packet_finished_at(a).is_some() && net.packet_finished_at(b).is_some());
        assert_eq!(net.violations().total(), 0);
        assert!(net.delivery_integrity_holds());
        assert!(net.unicast_conservation_holds());
    }

    fn wimesh(scheme: Scheme) -> Network {
        let t = Topology::build_mesh(8, 8, 20.0).unwrap().partition_and_place_wis(8).unwrap();
        let ft = ForwardingTable::build(&t, 1.0, 3).unwrap();
        let p = SimParams {
            scheme,
            wi_depth: if scheme == Scheme::Tmac { 64 } else { 16 },
            warmup: 0,
            measure: 20_000,
            ..SimParams::default()
        };
        manual(t, ft, p)
    }

    #[test]
    fn wireless_packet_crosses_under_every_scheme() {
        for scheme in Scheme::ALL {
            let mut net = wimesh(scheme);
            // Pick a pair whose route uses the wireless port.
            let (s, d) = (0..64)
                .flat_map(|s| (0..64).map(move |d| (s, d)))
                .find(|&(s, d)| net.forwarding().route(s, d).iter().any(|h| h.1 == Port::Wireless))
                .expect("some route crosses the medium");
            let id = net.inject_packet(s, Destination::Core(d), 64);
            assert!(net.drain(20_000), "{scheme}: not delivered");
            assert!(net.packet_finished_at(id).is_some());
            assert_eq!(net.violations().total(), 0, "{scheme}: {:?}", net.violations());
            assert!(net.ledger().wireless_flits >= 64);
        }
    }

    #[test]
    fn broadcast_reaches_every_other_core_once() {
        for scheme in Scheme::ALL {
            let mut net = wimesh(scheme);
            let id = net.inject_packet(5, Destination::Broadcast, 8);
            assert!(net.drain(20_000), "{scheme}");
            assert!(net.packet_finished_at(id).is_some());
            assert!(net.delivery_integrity_holds());
            assert_eq!(net.violations().total(), 0, "{scheme}");
        }
    }

    #[test]
    fn synthetic_run_is_deterministic_and_clean() {
        let run = || {
            let t = Topology::build_mesh(8, 8, 20.0).unwrap().partition_and_place_wis(8).unwrap();
            let ft = ForwardingTable::build(&t, 1.0, 1).unwrap();
            let p = SimParams { warmup: 500, measure: 3000, ..SimParams::default() };
            let spec = TrafficSpec { pattern: Pattern::Uniform, load: 0.01, ..TrafficSpec::default() };
            let mut net = Network::new(t, ft, p, TrafficDriver::Synthetic(spec)).unwrap();
            net.run();
            assert_eq!(net.violations().total(), 0);
            assert!(net.unicast_conservation_holds());
            net.summary()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn default_mac_delay_is_hidden() {
        let mut a = wimesh(Scheme::Dsam);
        let mut p = a.params().clone();
        p.mac_delay_ns = 0.0;
        let mut b = Network::new(a.topology().clone(), a.forwarding().clone(), p, TrafficDriver::Manual).unwrap();
        for net in [&mut a, &mut b] {
            net.inject_packet(0, Destination::Core(63), 64);
            net.inject_packet(63, Destination::Core(0), 64);
            net.inject_packet(7, Destination::Broadcast, 4);
            assert!(net.drain(20_000));
        }
        for id in 0..3 {
            assert_eq!(a.packet_finished_at(id), b.packet_finished_at(id));
        }
    }
}
