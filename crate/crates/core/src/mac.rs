// SPDX-License-Identifier: Apache-2.0

//! Wireless medium access: slot allocation schemes, the slot information
//! packet (layout and bit-exact codec), virtual-ring ordering and
//! receiver sleep/wake windows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Token passing: one whole packet per token possession.
    Tmac,
    /// Fixed epoch split in proportion to predicted demand.
    Psam,
    /// Slot equals predicted demand; the epoch is their sum.
    Dsam,
    /// Simplified reclaim-and-redistribute of unused slot capacity.
    Racm,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Tmac, Scheme::Psam, Scheme::Dsam, Scheme::Racm];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Tmac => "tmac",
            Scheme::Psam => "psam",
            Scheme::Dsam => "dsam",
            Scheme::Racm => "racm-simplified",
        }
    }

    /// Schemes that open each slot with a slot information packet.
    pub fn is_dynamic(self) -> bool {
        !matches!(self, Scheme::Tmac)
    }

    /// Schemes whose slots last their full allocation even when idle.
    pub fn fixed_slots(self) -> bool {
        matches!(self, Scheme::Tmac | Scheme::Psam | Scheme::Racm)
    }

    /// Schemes whose allocation is driven by predicted demand.
    pub fn uses_prediction(self) -> bool {
        matches!(self, Scheme::Psam | Scheme::Dsam)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tmac" | "t-mac" | "token" => Ok(Scheme::Tmac),
            "psam" | "p-sam" => Ok(Scheme::Psam),
            "dsam" | "d-sam" => Ok(Scheme::Dsam),
            "racm" | "racm-simplified" => Ok(Scheme::Racm),
            _ => Err(Error::Config(format!("unknown MAC scheme {s:?}"))),
        }
    }
}

/// Every WI gets one packet's worth of slot.
pub fn allocate_tmac(n_wi: usize, packet_size: u64) -> Vec<u64> {
    vec![packet_size; n_wi]
}

/// Splits `total` in proportion to `weights` (equal split when all are zero)
/// by largest remainder; ties go to the lowest index.
fn largest_remainder(weights: &[u64], total: u64) -> Vec<u64> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    let (w, sum): (Vec<u128>, u128) = if sum == 0 {
        (vec![1; n], n as u128)
    } else {
        (weights.iter().map(|&w| w as u128).collect(), sum)
    };
    let mut out = Vec::with_capacity(n);
    let mut rem = Vec::with_capacity(n);
    for (i, &wi) in w.iter().enumerate() {
        let p = wi * total as u128;
        out.push((p / sum) as u64);
        rem.push((p % sum, i));
    }
    let leftover = total - out.iter().sum::<u64>();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rem.iter().take(leftover as usize) {
        out[i] += 1;
    }
    out
}

/// Gives every WI with a non-empty queue at least one flit, taking single
/// flits from the currently largest allocation (lowest index on ties).
fn apply_floor_conserving(slots: &mut [u64], nonempty: &[bool]) -> Result<()> {
    let need = nonempty.iter().filter(|&&b| b).count() as u64;
    let total: u64 = slots.iter().sum();
    if total < need {
        return Err(Error::Allocation(format!(
            "{total} epoch flits cannot give one flit to each of {need} WIs with queued traffic"
        )));
    }
    for i in 0..slots.len() {
        if nonempty[i] && slots[i] == 0 {
            // The donor keeps at least one flit if it needs one itself.
            let donor = (0..slots.len())
                .filter(|&j| slots[j] > 1 || (slots[j] == 1 && !nonempty[j]))
                .max_by(|&a, &b| slots[a].cmp(&slots[b]).then(b.cmp(&a)))
                .expect("feasible floor has a donor");
            slots[donor] -= 1;
            slots[i] = 1;
        }
    }
    Ok(())
}

/// Proportional split of a fixed epoch of `epoch_flits`.
pub fn allocate_psam(demands: &[u64], epoch_flits: u64, nonempty: &[bool], floor: bool) -> Result<Vec<u64>> {
    assert_eq!(demands.len(), nonempty.len());
    if epoch_flits == 0 {
        return Err(Error::Allocation("epoch length must be positive".into()));
    }
    let mut slots = largest_remainder(demands, epoch_flits);
    if floor {
        apply_floor_conserving(&mut slots, nonempty)?;
    }
    Ok(slots)
}

/// Slot equals demand; returns the slots and the resulting epoch length.
pub fn allocate_dsam(demands: &[u64], nonempty: &[bool], floor: bool) -> (Vec<u64>, u64) {
    assert_eq!(demands.len(), nonempty.len());
    let slots: Vec<u64> = demands
        .iter()
        .zip(nonempty)
        .map(|(&d, &q)| if floor && q && d == 0 { 1 } else { d })
        .collect();
    let epoch = slots.iter().sum();
    (slots, epoch)
}

/// Each WI keeps what it used; unused capacity is redistributed in
/// proportion to usage (equally when nothing was used).
pub fn allocate_racm(
    prev_usage: &[u64],
    prev_slots: &[u64],
    epoch_flits: u64,
    nonempty: &[bool],
    floor: bool,
) -> Result<Vec<u64>> {
    assert_eq!(prev_usage.len(), prev_slots.len());
    assert_eq!(prev_usage.len(), nonempty.len());
    let kept: Vec<u64> = prev_usage.iter().zip(prev_slots).map(|(&u, &s)| u.min(s)).collect();
    let kept_sum: u64 = kept.iter().sum();
    if kept_sum > epoch_flits {
        return Err(Error::Allocation(format!("usage {kept_sum} exceeds epoch length {epoch_flits}")));
    }
    let share = largest_remainder(&kept, epoch_flits - kept_sum);
    let mut slots: Vec<u64> = kept.iter().zip(&share).map(|(a, b)| a + b).collect();
    if floor {
        apply_floor_conserving(&mut slots, nonempty)?;
    }
    Ok(slots)
}

/// Next owner on the virtual ring.
pub fn advance_ring(owner: usize, n_wi: usize) -> usize {
    (owner + 1) % n_wi
}

/// Destination of a slot tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TupleDest {
    Wi(usize),
    Broadcast,
}

/// One (destination WI, packet tag, flit count) announcement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotTuple {
    pub dest: TupleDest,
    pub pkt_id: usize,
    pub num_flits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotInfoPacket {
    pub src_wi: usize,
    pub demand: u64,
    pub tuples: Vec<SlotTuple>,
}

pub const SLOT_INFO_TYPE: u32 = 0xA;
pub const BROADCAST_WI: u32 = 0xF;
pub const MAX_DEMAND: u64 = (1 << 14) - 1;
pub const MAX_TUPLE_FLITS: u64 = (1 << 7) - 1;
const MAX_PKT_ID: usize = (1 << 5) - 1;
const MAX_SRC_WI: usize = (1 << 5) - 1;
const MAX_SIZE: usize = (1 << 3) - 1;

impl SlotInfoPacket {
    /// Length in 32-bit flits: a header flit plus two tuples per flit.
    pub fn size_flits(&self) -> usize {
        1 + self.tuples.len().div_ceil(2)
    }

    pub fn data_flits(&self) -> u64 {
        self.tuples.iter().map(|t| t.num_flits).sum()
    }

    /// Bit-exact encoding as 32-bit words.
    pub fn encode(&self) -> Result<Vec<u32>> {
        let size = self.size_flits();
        if size > MAX_SIZE {
            return Err(Error::Codec(format!("{} tuples exceed the 3-bit size field", self.tuples.len())));
        }
        if self.src_wi > MAX_SRC_WI {
            return Err(Error::Codec(format!("source WI {} exceeds 5 bits", self.src_wi)));
        }
        if self.demand > MAX_DEMAND {
            return Err(Error::Codec(format!("demand {} exceeds 14 bits", self.demand)));
        }
        let mut words = vec![
            (SLOT_INFO_TYPE << 28) | ((size as u32) << 25) | ((self.src_wi as u32) << 20) | ((self.demand as u32) << 6),
        ];
        let mut halves = Vec::with_capacity(self.tuples.len());
        for t in &self.tuples {
            let dest = match t.dest {
                TupleDest::Broadcast => BROADCAST_WI,
                TupleDest::Wi(w) if (w as u32) < BROADCAST_WI => w as u32,
                TupleDest::Wi(w) => return Err(Error::Codec(format!("destination WI {w} does not fit 4 bits"))),
            };
            if t.pkt_id > MAX_PKT_ID {
                return Err(Error::Codec(format!("packet tag {} exceeds 5 bits", t.pkt_id)));
            }
            if t.num_flits > MAX_TUPLE_FLITS {
                return Err(Error::Codec(format!("tuple flit count {} exceeds 7 bits", t.num_flits)));
            }
            halves.push((dest << 12) | ((t.pkt_id as u32) << 7) | t.num_flits as u32);
        }
        for pair in halves.chunks(2) {
            words.push((pair[0] << 16) | pair.get(1).copied().unwrap_or(0));
        }
        Ok(words)
    }

    pub fn decode(words: &[u32]) -> Result<Self> {
        let head = *words.first().ok_or_else(|| Error::Codec("empty packet".into()))?;
        if head >> 28 != SLOT_INFO_TYPE {
            return Err(Error::Codec(format!("bad type tag {:#x}", head >> 28)));
        }
        let size = ((head >> 25) & 0x7) as usize;
        if size == 0 || size != words.len() {
            return Err(Error::Codec(format!("size field {size} does not match {} flits", words.len())));
        }
        if head & 0x3F != 0 {
            return Err(Error::Codec("reserved bits set".into()));
        }
        let src_wi = ((head >> 20) & 0x1F) as usize;
        let demand = ((head >> 6) & 0x3FFF) as u64;
        let mut tuples = Vec::new();
        for (k, &w) in words[1..].iter().enumerate() {
            for (j, half) in [w >> 16, w & 0xFFFF].into_iter().enumerate() {
                if half == 0 {
                    // An all-zero second half pads an odd tuple count.
                    if j == 1 && k == size - 2 {
                        continue;
                    }
                    return Err(Error::Codec(format!("empty tuple in flit {}", k + 1)));
                }
                let dest = match half >> 12 {
                    BROADCAST_WI => TupleDest::Broadcast,
                    d => TupleDest::Wi(d as usize),
                };
                tuples.push(SlotTuple { dest, pkt_id: ((half >> 7) & 0x1F) as usize, num_flits: (half & 0x7F) as u64 });
            }
        }
        Ok(SlotInfoPacket { src_wi, demand, tuples })
    }
}

/// A buffered packet a slot owner may announce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    /// Output VC holding the packet; doubles as the packet tag on the air.
    pub vc: usize,
    pub dest: TupleDest,
    /// Smaller is older.
    pub age: u64,
    /// Flits that may be announced now.
    pub available: u64,
}

/// Greedy oldest-packet-first announcement plan for a slot of `slot_len`
/// data flits, at most `max_tuples` tuples.
pub fn plan_tuples(candidates: &[Candidate], slot_len: u64, max_tuples: usize) -> Vec<SlotTuple> {
    plan_tuples_with(candidates, slot_len, max_tuples, |_, want| want)
}

/// As [`plan_tuples`], with `admit(candidate, wanted)` returning how many of
/// the wanted flits the receivers can take; it may record reservations.
pub fn plan_tuples_with(
    candidates: &[Candidate],
    slot_len: u64,
    max_tuples: usize,
    mut admit: impl FnMut(&Candidate, u64) -> u64,
) -> Vec<SlotTuple> {
    let mut order: Vec<&Candidate> = candidates.iter().filter(|c| c.available > 0).collect();
    order.sort_by_key(|c| (c.age, c.vc));
    let mut left = slot_len;
    let mut out = Vec::new();
    for c in order {
        if left == 0 || out.len() == max_tuples {
            break;
        }
        let want = c.available.min(left).min(MAX_TUPLE_FLITS);
        let n = admit(c, want).min(want);
        if n > 0 {
            out.push(SlotTuple { dest: c.dest, pkt_id: c.vc, num_flits: n });
            left -= n;
        }
    }
    out
}

/// Receiver gating for one foreign slot, in data-flit airtimes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SleepWake {
    pub initial_sleep: u64,
    pub wake: u64,
    pub post_wake: u64,
}

impl SleepWake {
    /// Whether the receiver is on during data flit `k` of the slot.
    pub fn is_awake(&self, k: u64) -> bool {
        k >= self.initial_sleep && k < self.initial_sleep + self.wake
    }
}

/// Single wake window covering every flit destined to `my_wi` (broadcast
/// tuples count as destined).
pub fn compute_sleep_wake(tuples: &[SlotTuple], my_wi: usize) -> SleepWake {
    let total: u64 = tuples.iter().map(|t| t.num_flits).sum();
    let mut first = None;
    let mut last_end = 0;
    let mut offset = 0;
    for t in tuples {
        let mine = matches!(t.dest, TupleDest::Broadcast) || t.dest == TupleDest::Wi(my_wi);
        if mine && t.num_flits > 0 {
            first.get_or_insert(offset);
            last_end = offset + t.num_flits;
        }
        offset += t.num_flits;
    }
    match first {
        None => SleepWake { initial_sleep: total, wake: 0, post_wake: 0 },
        Some(f) => SleepWake { initial_sleep: f, wake: last_end - f, post_wake: total - last_end },
    }
}

/// Allocation-unit registers of one WI.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationUnit {
    pub scheme: Scheme,
    pub id_self: usize,
    /// Latest demand shared by every WI (own entry included).
    pub reg_demand: Vec<u64>,
    /// Remaining flits of the own slot while it is running.
    pub slot_counter: u64,
}

impl AllocationUnit {
    pub fn new(scheme: Scheme, id_self: usize, n_wi: usize) -> Self {
        AllocationUnit { scheme, id_self, reg_demand: vec![0; n_wi], slot_counter: 0 }
    }

    /// Records the demand field of an overheard slot information packet.
    pub fn observe(&mut self, pkt: &SlotInfoPacket) {
        self.reg_demand[pkt.src_wi] = pkt.demand;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tmac_slots() {
        assert_eq!(allocate_tmac(8, 64), vec![64; 8]);
    }

    #[test]
    fn psam_examples() {
        let none = [false; 8];
        assert_eq!(allocate_psam(&[5; 8], 800, &none, true).unwrap(), vec![100; 8]);
        assert_eq!(
            allocate_psam(&[40, 10, 10, 10, 10, 10, 5, 5], 100, &none, true).unwrap(),
            vec![40, 10, 10, 10, 10, 10, 5, 5]
        );
        assert_eq!(allocate_psam(&[1, 1, 1], 100, &[false; 3], true).unwrap(), vec![34, 33, 33]);
        assert_eq!(allocate_psam(&[0, 0, 0], 10, &[false; 3], true).unwrap(), vec![4, 3, 3]);
    }

    #[test]
    fn psam_floor_takes_from_largest() {
        let slots = allocate_psam(&[0, 10, 0], 10, &[true, false, true], true).unwrap();
        assert_eq!(slots, vec![1, 8, 1]);
        assert!(allocate_psam(&[1, 1, 1], 2, &[true; 3], true).is_err());
        assert!(allocate_psam(&[1], 0, &[false], true).is_err());
    }

    #[test]
    fn dsam_examples() {
        assert_eq!(allocate_dsam(&[3, 0, 7], &[true, false, true], true), (vec![3, 0, 7], 10));
        assert_eq!(allocate_dsam(&[0, 0], &[false, false], true), (vec![0, 0], 0));
        assert_eq!(allocate_dsam(&[0, 5], &[true, false], true), (vec![1, 5], 6));
        assert_eq!(allocate_dsam(&[0, 5], &[true, false], false), (vec![0, 5], 5));
    }

    #[test]
    fn racm_examples() {
        let q = [false, false];
        assert_eq!(allocate_racm(&[30, 70], &[30, 70], 100, &q, true).unwrap(), vec![30, 70]);
        assert_eq!(allocate_racm(&[50, 0], &[50, 50], 100, &[false, true], true).unwrap(), vec![99, 1]);
        assert_eq!(allocate_racm(&[0, 0], &[50, 50], 100, &q, true).unwrap(), vec![50, 50]);
    }

    #[test]
    fn ring_wraps() {
        assert_eq!(advance_ring(7, 8), 0);
        let mut owner = 0;
        let mut seen = vec![0; 8];
        for _ in 0..8 {
            seen[owner] += 1;
            owner = advance_ring(owner, 8);
        }
        assert_eq!(seen, vec![1; 8]);
    }

    fn t(dest: usize, pkt: usize, n: u64) -> SlotTuple {
        SlotTuple { dest: TupleDest::Wi(dest), pkt_id: pkt, num_flits: n }
    }

    #[test]
    fn sleep_wake_examples() {
        let tuples = [t(2, 7, 5), t(4, 3, 3), t(2, 7, 2)];
        assert_eq!(compute_sleep_wake(&tuples, 4), SleepWake { initial_sleep: 5, wake: 3, post_wake: 2 });
        assert_eq!(compute_sleep_wake(&tuples, 2), SleepWake { initial_sleep: 0, wake: 10, post_wake: 0 });
        assert_eq!(compute_sleep_wake(&tuples, 5), SleepWake { initial_sleep: 10, wake: 0, post_wake: 0 });
        let b = [t(1, 0, 4), SlotTuple { dest: TupleDest::Broadcast, pkt_id: 1, num_flits: 3 }];
        assert_eq!(compute_sleep_wake(&b, 6), SleepWake { initial_sleep: 4, wake: 3, post_wake: 0 });
    }

    #[test]
    fn plan_examples() {
        assert!(plan_tuples(&[], 10, 6).is_empty());
        let one = [Candidate { vc: 2, dest: TupleDest::Wi(3), age: 0, available: 10 }];
        assert_eq!(plan_tuples(&one, 4, 6), vec![t(3, 2, 4)]);
        let eight: Vec<Candidate> =
            (0..8).map(|v| Candidate { vc: v, dest: TupleDest::Wi(v), age: 100 - v as u64, available: 3 }).collect();
        let plan = plan_tuples(&eight, 1000, 6);
        assert_eq!(plan.len(), 6);
        // Oldest first: VC 7 has the smallest age.
        assert_eq!(plan[0].pkt_id, 7);
        let pkt = SlotInfoPacket { src_wi: 0, demand: 0, tuples: plan };
        assert_eq!(pkt.size_flits(), 4);
    }

    #[test]
    fn codec_golden() {
        let pkt = SlotInfoPacket {
            src_wi: 3,
            demand: 100,
            tuples: vec![t(2, 7, 5), SlotTuple { dest: TupleDest::Broadcast, pkt_id: 1, num_flits: 64 }, t(4, 3, 3)],
        };
        let words = pkt.encode().unwrap();
        assert_eq!(words.len(), 3);
        // 0xA<<28 | 3<<25 | 3<<20 | 100<<6
        assert_eq!(words[0], 0xA000_0000 | (3 << 25) | (3 << 20) | (100 << 6));
        assert_eq!(words[1], (((2 << 12) | (7 << 7) | 5) << 16) | ((0xF << 12) | (1 << 7) | 64));
        assert_eq!(words[2], ((4 << 12) | (3 << 7) | 3) << 16);
        assert_eq!(SlotInfoPacket::decode(&words).unwrap(), pkt);
        let empty = SlotInfoPacket { src_wi: 0, demand: 0, tuples: vec![] };
        assert_eq!(empty.encode().unwrap(), vec![0xA200_0000]);
    }

    #[test]
    fn codec_rejects_out_of_range() {
        let mut p = SlotInfoPacket { src_wi: 0, demand: MAX_DEMAND + 1, tuples: vec![] };
        assert!(p.encode().is_err());
        p.demand = 0;
        p.tuples = vec![t(15, 0, 1)];
        assert!(p.encode().is_err());
        p.tuples = vec![t(1, 32, 1)];
        assert!(p.encode().is_err());
        p.tuples = vec![t(1, 0, 128)];
        assert!(p.encode().is_err());
        assert!(SlotInfoPacket::decode(&[0xB200_0000]).is_err());
        assert!(SlotInfoPacket::decode(&[0xA400_0000]).is_err());
    }

    proptest! {
        #[test]
        fn codec_round_trip(
            src in 0usize..32, demand in 0u64..=MAX_DEMAND,
            tuples in proptest::collection::vec((0u32..16, 0usize..32, 1u64..128), 0..12),
        ) {
            let tuples: Vec<SlotTuple> = tuples.into_iter().map(|(d, p, n)| SlotTuple {
                dest: if d == 15 { TupleDest::Broadcast } else { TupleDest::Wi(d as usize) },
                pkt_id: p,
                num_flits: n,
            }).collect();
            let pkt = SlotInfoPacket { src_wi: src, demand, tuples };
            prop_assert_eq!(SlotInfoPacket::decode(&pkt.encode().unwrap()).unwrap(), pkt);
        }

        #[test]
        fn psam_conserves_and_floors(
            demands in proptest::collection::vec(0u64..2000, 1..16),
            extra in 0u64..4000,
            mask in proptest::collection::vec(any::<bool>(), 16),
        ) {
            let n = demands.len();
            let nonempty = &mask[..n];
            let ef = n as u64 + extra;
            let slots = allocate_psam(&demands, ef, nonempty, true).unwrap();
            prop_assert_eq!(slots.iter().sum::<u64>(), ef);
            for i in 0..n {
                if nonempty[i] { prop_assert!(slots[i] >= 1); }
            }
            // Without floors the split stays within one flit of the exact share.
            let raw = allocate_psam(&demands, ef, nonempty, false).unwrap();
            let sum: u64 = demands.iter().sum();
            for i in 0..n {
                let exact = if sum == 0 { ef as f64 / n as f64 } else { demands[i] as f64 * ef as f64 / sum as f64 };
                prop_assert!((raw[i] as f64 - exact).abs() < 1.0);
            }
        }

        #[test]
        fn dsam_epoch_is_sum(
            demands in proptest::collection::vec(0u64..2000, 1..16),
            mask in proptest::collection::vec(any::<bool>(), 16),
        ) {
            let n = demands.len();
            let (slots, epoch) = allocate_dsam(&demands, &mask[..n], true);
            prop_assert_eq!(slots.iter().sum::<u64>(), epoch);
            for i in 0..n {
                if mask[i] { prop_assert!(slots[i] >= 1); }
            }
        }

        #[test]
        fn racm_conserves(
            pairs in proptest::collection::vec((0u64..200, 0u64..200), 1..16),
            mask in proptest::collection::vec(any::<bool>(), 16),
        ) {
            let n = pairs.len();
            let prev_slots: Vec<u64> = pairs.iter().map(|p| p.0.max(1)).collect();
            let usage: Vec<u64> = pairs.iter().zip(&prev_slots).map(|(p, s)| p.1 % (s + 1)).collect();
            let ef: u64 = prev_slots.iter().sum();
            let slots = allocate_racm(&usage, &prev_slots, ef, &mask[..n], true).unwrap();
            prop_assert_eq!(slots.iter().sum::<u64>(), ef);
        }

        #[test]
        fn sleep_wake_partitions_slot(
            tuples in proptest::collection::vec((0usize..9, 0u64..20), 0..8),
            me in 0usize..8,
        ) {
            let tuples: Vec<SlotTuple> = tuples.into_iter().map(|(d, n)| SlotTuple {
                dest: if d == 8 { TupleDest::Broadcast } else { TupleDest::Wi(d) },
                pkt_id: 0,
                num_flits: n,
            }).collect();
            let sw = compute_sleep_wake(&tuples, me);
            let total: u64 = tuples.iter().map(|t| t.num_flits).sum();
            prop_assert_eq!(sw.initial_sleep + sw.wake + sw.post_wake, total);
            // Every flit meant for `me` falls inside the window.
            let mut k = 0;
            for t in &tuples {
                for _ in 0..t.num_flits {
                    if t.dest == TupleDest::Broadcast || t.dest == TupleDest::Wi(me) {
                        prop_assert!(sw.is_awake(k));
                    }
                    k += 1;
                }
            }
        }
    }
}
