// SPDX-License-Identifier: Apache-2.0

//! Synthetic workloads (spatial pattern × temporal process) and trace replay.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Destination {
    Core(usize),
    Broadcast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pattern {
    Uniform,
    /// `fraction` of packets go to `core`; `None` picks the first WI-hosting core.
    Hotspot { fraction: f64, core: Option<usize> },
    BitComplement,
    BroadcastMix { fraction: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Temporal {
    Bernoulli,
    SelfSimilar {
        on_shape: f64,
        off_shape: f64,
        /// Minimum ON burst, in cycles.
        min_burst: f64,
        /// Bursts are truncated at `burst_cap` times their Pareto scale.
        burst_cap: f64,
    },
}

impl Temporal {
    pub fn self_similar() -> Self {
        Temporal::SelfSimilar { on_shape: 1.9, off_shape: 1.25, min_burst: 1.0, burst_cap: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    pub pattern: Pattern,
    /// Flits per core per cycle.
    pub load: f64,
    pub temporal: Temporal,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec { pattern: Pattern::Uniform, load: 0.1, temporal: Temporal::self_similar() }
    }
}

impl TrafficSpec {
    pub fn validate(&self, n_cores: usize) -> Result<()> {
        if !(self.load > 0.0 && self.load <= 1.0) {
            return Err(Error::Config(format!("injection load must lie in (0, 1], got {}", self.load)));
        }
        match self.pattern {
            Pattern::Hotspot { fraction, core } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::Config(format!("hotspot fraction {fraction} outside [0, 1]")));
                }
                if core.is_some_and(|c| c >= n_cores) {
                    return Err(Error::Config("hotspot core out of range".into()));
                }
            }
            Pattern::BroadcastMix { fraction } if !(0.0..=1.0).contains(&fraction) => {
                return Err(Error::Config(format!("broadcast fraction {fraction} outside [0, 1]")));
            }
            _ => {}
        }
        if let Temporal::SelfSimilar { on_shape, off_shape, min_burst, burst_cap } = self.temporal {
            if on_shape <= 1.0 || off_shape <= 1.0 {
                return Err(Error::Config("Pareto shapes must exceed 1 for a finite mean".into()));
            }
            if min_burst <= 0.0 || burst_cap < 1.0 {
                return Err(Error::Config("min_burst must be positive and burst_cap at least 1".into()));
            }
        }
        Ok(())
    }
}

fn uniform_other<R: Rng + ?Sized>(source: usize, n: usize, rng: &mut R) -> usize {
    let d = rng.random_range(0..n - 1);
    if d >= source {
        d + 1
    } else {
        d
    }
}

/// Draws the destination of a new packet from `source` (0-based) among `n` cores.
/// `hotspot` resolves `Pattern::Hotspot { core: None }`.
pub fn next_destination<R: Rng + ?Sized>(
    pattern: &Pattern,
    source: usize,
    n: usize,
    hotspot: usize,
    rng: &mut R,
) -> Destination {
    match *pattern {
        Pattern::Uniform => Destination::Core(uniform_other(source, n, rng)),
        Pattern::Hotspot { fraction, core } => {
            let hot = core.unwrap_or(hotspot);
            if source != hot && rng.random_bool(fraction) {
                return Destination::Core(hot);
            }
            // Uniform over the cores other than the source and the hotspot.
            loop {
                let d = uniform_other(source, n, rng);
                if d != hot || n <= 2 {
                    return Destination::Core(d);
                }
            }
        }
        // With 1-based IDs core i sends to N - i + 1.
        Pattern::BitComplement => Destination::Core(n - 1 - source),
        Pattern::BroadcastMix { fraction } => {
            if rng.random_bool(fraction) {
                Destination::Broadcast
            } else {
                Destination::Core(uniform_other(source, n, rng))
            }
        }
    }
}

/// Mean of a Pareto(scale, shape) variable truncated at `cap`·scale, per unit scale.
fn truncated_mean_factor(shape: f64, cap: f64) -> f64 {
    shape / (shape - 1.0) - cap.powf(1.0 - shape) / (shape - 1.0)
}

/// Per-core injection process deciding, cycle by cycle, whether a flit is generated.
#[derive(Clone, Debug)]
pub enum InjectionProcess {
    Bernoulli { load: f64 },
    Saturated,
    OnOff(OnOff),
}

#[derive(Clone, Debug)]
pub struct OnOff {
    on: Pareto<f64>,
    off: Pareto<f64>,
    on_cap: f64,
    off_cap: f64,
    state_on: bool,
    remaining: u64,
    carry: f64,
}

impl OnOff {
    /// ON/OFF source with bounded-Pareto period lengths scaled so that the
    /// long-run fraction of ON cycles equals `load`.
    pub fn new<R: Rng + ?Sized>(load: f64, on_shape: f64, off_shape: f64, min_burst: f64, cap: f64, rng: &mut R) -> Self {
        let mean_on = min_burst * truncated_mean_factor(on_shape, cap);
        let mean_off = mean_on * (1.0 - load) / load;
        let off_scale = mean_off / truncated_mean_factor(off_shape, cap);
        let mut s = OnOff {
            on: Pareto::new(min_burst, on_shape).expect("valid ON Pareto"),
            off: Pareto::new(off_scale, off_shape).expect("valid OFF Pareto"),
            on_cap: min_burst * cap,
            off_cap: off_scale * cap,
            // Start in the OFF state with probability 1 - load.
            state_on: rng.random_bool(load),
            remaining: 0,
            carry: 0.0,
        };
        s.remaining = s.draw(rng);
        s
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        let raw = if self.state_on {
            self.on.sample(rng).min(self.on_cap)
        } else {
            self.off.sample(rng).min(self.off_cap)
        };
        // Carry the rounding residue so the mean period length is preserved.
        let d = raw + self.carry;
        let n = d.round().max(0.0);
        self.carry = d - n;
        n as u64
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        while self.remaining == 0 {
            self.state_on = !self.state_on;
            self.remaining = self.draw(rng);
        }
        self.remaining -= 1;
        self.state_on
    }
}

impl InjectionProcess {
    pub fn new<R: Rng + ?Sized>(spec: &TrafficSpec, rng: &mut R) -> Self {
        if spec.load >= 1.0 {
            return InjectionProcess::Saturated;
        }
        match spec.temporal {
            Temporal::Bernoulli => InjectionProcess::Bernoulli { load: spec.load },
            Temporal::SelfSimilar { on_shape, off_shape, min_burst, burst_cap } => {
                InjectionProcess::OnOff(OnOff::new(spec.load, on_shape, off_shape, min_burst, burst_cap, rng))
            }
        }
    }

    /// Whether the core generates a flit this cycle.
    pub fn should_inject<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        match self {
            InjectionProcess::Saturated => true,
            InjectionProcess::Bernoulli { load } => rng.random_bool(*load),
            InjectionProcess::OnOff(s) => s.step(rng),
        }
    }
}

/// One line of a trace file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub source: usize,
    pub dest: Destination,
    pub size: usize,
}

/// Parses `cycle source dest size` lines; `dest = -1` marks a broadcast.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<TraceEvent>> {
    let err = |line: usize, msg: String| Error::Trace { path: path.to_path_buf(), line, msg };
    let mut events: Vec<TraceEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let cycle: u64 = fields[0].parse().map_err(|_| err(line_no, format!("bad cycle {:?}", fields[0])))?;
        let source: usize = fields[1].parse().map_err(|_| err(line_no, format!("bad source {:?}", fields[1])))?;
        let dest: i64 = fields[2].parse().map_err(|_| err(line_no, format!("bad destination {:?}", fields[2])))?;
        let size: usize = fields[3].parse().map_err(|_| err(line_no, format!("bad size {:?}", fields[3])))?;
        let dest = match dest {
            -1 => Destination::Broadcast,
            d if d >= 0 => Destination::Core(d as usize),
            d => return Err(err(line_no, format!("negative destination {d}"))),
        };
        if size == 0 {
            return Err(err(line_no, "packet size must be positive".into()));
        }
        if let Some(prev) = events.last() {
            if cycle < prev.cycle {
                return Err(err(line_no, format!("cycle {cycle} goes backwards (previous {})", prev.cycle)));
            }
        }
        events.push(TraceEvent { cycle, source, dest, size });
    }
    Ok(events)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceEvent>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_trace(&text, path)
}

/// Hurst exponent by the aggregated-variance method over block sizes `blocks`.
pub fn hurst_aggregated_variance(series: &[f64], blocks: &[usize]) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &m in blocks {
        let n = series.len() / m;
        if n < 2 {
            continue;
        }
        let means: Vec<f64> = series[..n * m].chunks(m).map(|c| c.iter().sum::<f64>() / m as f64).collect();
        let mu = means.iter().sum::<f64>() / n as f64;
        let var = means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64;
        xs.push((m as f64).ln());
        ys.push(var.ln());
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    1.0 + (sxy / sxx) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bit_complement_uses_one_based_formula() {
        let mut r = rng(0);
        // 1-based source 1 → 64, source 32 → 33.
        assert_eq!(next_destination(&Pattern::BitComplement, 0, 64, 0, &mut r), Destination::Core(63));
        assert_eq!(next_destination(&Pattern::BitComplement, 31, 64, 0, &mut r), Destination::Core(32));
    }

    #[test]
    fn hotspot_hit_rate() {
        let mut r = rng(1);
        let p = Pattern::Hotspot { fraction: 0.10, core: Some(9) };
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|i| {
                let src = [0, 5, 20, 40, 63][i % 5];
                next_destination(&p, src, 64, 0, &mut r) == Destination::Core(9)
            })
            .count();
        let rate = hits as f64 / draws as f64;
        assert!((rate - 0.10).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn uniform_is_flat_and_never_self() {
        let mut r = rng(2);
        let n = 64;
        let draws = 1_000_000;
        let mut hist = vec![0u32; n];
        for _ in 0..draws {
            match next_destination(&Pattern::Uniform, 7, n, 0, &mut r) {
                Destination::Core(d) => hist[d] += 1,
                Destination::Broadcast => unreachable!(),
            }
        }
        assert_eq!(hist[7], 0);
        let p = 1.0 / 63.0;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (d, &h) in hist.iter().enumerate() {
            if d != 7 {
                assert!((h as f64 - mean).abs() <= 3.0 * sigma + 1.0, "core {d}: {h}");
            }
        }
    }

    #[test]
    fn broadcast_mix_fraction() {
        let mut r = rng(3);
        let p = Pattern::BroadcastMix { fraction: 0.2 };
        let b = (0..100_000).filter(|_| next_destination(&p, 3, 64, 0, &mut r) == Destination::Broadcast).count();
        assert!((b as f64 / 1e5 - 0.2).abs() < 0.01);
    }

    #[test]
    fn saturated_source_always_injects() {
        for temporal in [Temporal::Bernoulli, Temporal::self_similar()] {
            let spec = TrafficSpec { pattern: Pattern::Uniform, load: 1.0, temporal };
            let mut r = rng(4);
            let mut p = InjectionProcess::new(&spec, &mut r);
            assert!((0..10_000).all(|_| p.should_inject(&mut r)));
        }
    }

    #[test]
    fn bernoulli_rate() {
        let spec = TrafficSpec { pattern: Pattern::Uniform, load: 0.1, temporal: Temporal::Bernoulli };
        let mut r = rng(5);
        let mut p = InjectionProcess::new(&spec, &mut r);
        let n = (0..1_000_000).filter(|_| p.should_inject(&mut r)).count();
        assert!((n as f64 / 1e6 - 0.1).abs() <= 0.005);
    }

    fn self_similar_trace(seed: u64, load: f64, cycles: usize) -> Vec<f64> {
        let spec = TrafficSpec { pattern: Pattern::Uniform, load, temporal: Temporal::self_similar() };
        let mut r = rng(seed);
        let mut p = InjectionProcess::new(&spec, &mut r);
        (0..cycles).map(|_| if p.should_inject(&mut r) { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn self_similar_is_long_range_dependent() {
        let x = self_similar_trace(6, 0.1, 1_000_000);
        let h = hurst_aggregated_variance(&x, &[10, 20, 50, 100, 200, 500, 1000, 2000, 5000]);
        assert!(h > 0.5, "Hurst {h}");
        // White noise control.
        let spec = TrafficSpec { pattern: Pattern::Uniform, load: 0.1, temporal: Temporal::Bernoulli };
        let mut r = rng(6);
        let mut p = InjectionProcess::new(&spec, &mut r);
        let w: Vec<f64> = (0..1_000_000).map(|_| if p.should_inject(&mut r) { 1.0 } else { 0.0 }).collect();
        let hw = hurst_aggregated_variance(&w, &[10, 20, 50, 100, 200, 500, 1000, 2000, 5000]);
        assert!(hw < h && (hw - 0.5).abs() < 0.05, "white-noise Hurst {hw}");
    }

    #[test]
    fn self_similar_rate_converges() {
        for seed in 0..4 {
            let x = self_similar_trace(seed, 0.1, 1_000_000);
            let rate = x.iter().sum::<f64>() / x.len() as f64;
            assert!((rate - 0.1).abs() / 0.1 <= 0.02, "seed {seed}: rate {rate}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(self_similar_trace(9, 0.3, 50_000), self_similar_trace(9, 0.3, 50_000));
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let mut s = TrafficSpec::default();
        s.load = 0.0;
        assert!(s.validate(64).is_err());
        s.load = 0.5;
        s.pattern = Pattern::Hotspot { fraction: 1.5, core: None };
        assert!(s.validate(64).is_err());
        s.pattern = Pattern::BroadcastMix { fraction: -0.1 };
        assert!(s.validate(64).is_err());
    }

    #[test]
    fn trace_parsing() {
        let p = Path::new("t.trace");
        assert!(parse_trace("", p).unwrap().is_empty());
        let ev = parse_trace("0 1 2 64\n5 3 -1 8\n5 0 7 1\n", p).unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[1].dest, Destination::Broadcast);
        assert_eq!(ev[2], TraceEvent { cycle: 5, source: 0, dest: Destination::Core(7), size: 1 });
        let e = parse_trace("10 1 2 4\n9 1 2 4\n", p).unwrap_err();
        assert!(e.to_string().contains("t.trace:2"), "{e}");
        let e = parse_trace("1 2 x 4\n", p).unwrap_err();
        assert!(e.to_string().contains(":1:"), "{e}");
    }
}
