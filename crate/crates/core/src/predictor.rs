// SPDX-License-Identifier: Apache-2.0

//! Per-WI prediction unit: PID tracking of the flits routed to the wireless
//! port and next-epoch demand prediction.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Proportional, integral and derivative gains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidWeights<T> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
}

impl<T: Real> PidWeights<T> {
    pub fn new(kp: T, ki: T, kd: T) -> Self {
        PidWeights { kp, ki, kd }
    }

    /// Predict the next epoch as exactly the last one.
    pub fn last_value() -> Self {
        PidWeights { kp: T::one(), ki: T::zero(), kd: T::zero() }
    }

    pub fn is_finite(&self) -> bool {
        self.kp.is_finite() && self.ki.is_finite() && self.kd.is_finite()
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.kp, self.ki, self.kd]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        PidWeights { kp: a[0], ki: a[1], kd: a[2] }
    }
}

impl Default for PidWeights<f64> {
    /// Gains reported as optimal for a 100-cycle epoch on the 64-core baseline.
    fn default() -> Self {
        PidWeights { kp: 0.66, ki: 0.13, kd: 0.2041 }
    }
}

/// Unrounded PID output for the current demand, the running average and the previous demand.
#[inline]
pub fn pid_raw<T: Real>(w: &PidWeights<T>, current: T, average: T, previous: T) -> T {
    w.kp * current + w.ki * average + w.kd * (current - previous)
}

/// Rounds half-up and clamps negative predictions to zero.
pub fn quantize<T: Real>(raw: T) -> u64 {
    let r = (raw + T::lit(0.5)).floor();
    if r <= T::zero() || !r.is_finite() {
        0
    } else {
        r.to_u64().unwrap_or(u64::MAX)
    }
}

/// Update rule of the integral register.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragerMode {
    /// averager ← (counter + averager) / 2, an exponential half-averaging.
    #[default]
    Halving,
    /// True arithmetic mean of all completed epochs.
    RunningMean,
}

/// Advances the integral register by one epoch of demand `d`; `epochs` counts
/// epochs already folded in.
#[inline]
pub fn update_average<T: Real>(mode: AveragerMode, average: T, d: T, epochs: u64) -> T {
    match mode {
        AveragerMode::Halving => (d + average) / T::lit(2.0),
        AveragerMode::RunningMean => average + (d - average) / T::from_count(epochs + 1),
    }
}

/// Registers and counters of one WI's prediction unit.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionUnit<T> {
    /// Remaining slots of the current epoch.
    pub epoch_counter: u64,
    /// Flits routed to the wireless port during the current epoch.
    pub demand_counter: u64,
    pub demand_averager: T,
    /// Demand of the epoch before the last completed one.
    pub demand_previous: u64,
    /// Latest prediction, shared with the other WIs.
    pub demand_self: u64,
    pub mode: AveragerMode,
    epochs: u64,
}

impl<T: Real> PredictionUnit<T> {
    pub fn new(mode: AveragerMode) -> Self {
        PredictionUnit {
            epoch_counter: 0,
            demand_counter: 0,
            demand_averager: T::zero(),
            demand_previous: 0,
            demand_self: 0,
            mode,
            epochs: 0,
        }
    }

    pub fn on_flit_to_wireless(&mut self) {
        self.demand_counter += 1;
    }

    /// PID output for the registers as they stand, before rounding.
    pub fn raw_prediction(&self, w: &PidWeights<T>) -> T {
        pid_raw(
            w,
            T::from_count(self.demand_counter),
            self.demand_averager,
            T::from_count(self.demand_previous),
        )
    }

    /// Closes the epoch: computes the prediction, shifts the registers and
    /// clears the demand counter.
    pub fn end_of_epoch(&mut self, w: &PidWeights<T>) -> u64 {
        let prediction = quantize(self.raw_prediction(w));
        let d = T::from_count(self.demand_counter);
        self.demand_averager = update_average(self.mode, self.demand_averager, d, self.epochs);
        self.epochs += 1;
        self.demand_previous = self.demand_counter;
        self.demand_self = prediction;
        self.demand_counter = 0;
        prediction
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(counter: u64, averager: f64, previous: u64) -> PredictionUnit<f64> {
        let mut u = PredictionUnit::new(AveragerMode::Halving);
        u.demand_counter = counter;
        u.demand_averager = averager;
        u.demand_previous = previous;
        u
    }

    #[test]
    fn counter_increments() {
        let mut u = PredictionUnit::<f64>::new(AveragerMode::Halving);
        u.on_flit_to_wireless();
        assert_eq!(u.demand_counter, 1);
        for _ in 0..9 {
            u.on_flit_to_wireless();
        }
        assert_eq!(u.demand_counter, 10);
    }

    #[test]
    fn reference_gains_example() {
        let w = PidWeights::default();
        let mut u = unit(10, 8.0, 6);
        assert!((u.raw_prediction(&w) - 8.4564).abs() < 1e-12);
        assert_eq!(u.end_of_epoch(&w), 8);
        assert_eq!(u.demand_averager, 9.0);
        assert_eq!(u.demand_previous, 10);
        assert_eq!(u.demand_self, 8);
        assert_eq!(u.demand_counter, 0);
    }

    #[test]
    fn zero_fixed_point() {
        let mut u = unit(0, 0.0, 0);
        assert_eq!(u.end_of_epoch(&PidWeights::default()), 0);
    }

    #[test]
    fn negative_output_clamps_to_zero() {
        let w = PidWeights::default();
        let mut u = unit(0, 0.5, 10);
        assert!((u.raw_prediction(&w) + 1.976).abs() < 1e-12);
        assert_eq!(u.end_of_epoch(&w), 0);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(quantize(2.5f64), 3);
        assert_eq!(quantize(2.4999f64), 2);
        assert_eq!(quantize(-0.4f64), 0);
        assert_eq!(quantize(0.5f32), 1);
    }

    #[test]
    fn single_precision_matches() {
        let w = PidWeights::<f32>::new(0.66, 0.13, 0.2041);
        let mut u = PredictionUnit::<f32>::new(AveragerMode::Halving);
        u.demand_counter = 10;
        u.demand_averager = 8.0;
        u.demand_previous = 6;
        assert!((u.raw_prediction(&w) - 8.4564).abs() < 1e-5);
        assert_eq!(u.end_of_epoch(&w), 8);
    }

    #[test]
    fn running_mean_mode_is_arithmetic_mean() {
        let mut u = PredictionUnit::<f64>::new(AveragerMode::RunningMean);
        let w = PidWeights::last_value();
        for d in [4, 8, 0, 12] {
            u.demand_counter = d;
            u.end_of_epoch(&w);
        }
        assert!((u.demand_averager - 6.0).abs() < 1e-12);
    }

    #[test]
    fn halving_averager_converges_geometrically() {
        let mut u = PredictionUnit::<f64>::new(AveragerMode::Halving);
        let w = PidWeights::default();
        let d = 40u64;
        let mut gap = d as f64;
        for _ in 0..20 {
            u.demand_counter = d;
            u.end_of_epoch(&w);
            let new_gap = (u.demand_averager - d as f64).abs();
            assert!((new_gap - gap / 2.0).abs() < 1e-12);
            gap = new_gap;
        }
    }

    proptest! {
        #[test]
        fn last_value_reduction(series in proptest::collection::vec(0u64..500, 1..40)) {
            let mut u = PredictionUnit::<f64>::new(AveragerMode::Halving);
            let w = PidWeights::last_value();
            for &d in &series {
                u.demand_counter = d;
                prop_assert_eq!(u.end_of_epoch(&w), d);
            }
        }

        #[test]
        fn monotone_in_current_demand(
            c in 0u64..1000, extra in 0u64..100, avg in 0.0f64..1000.0, prev in 0u64..1000,
            kp in 0.0f64..2.0, ki in 0.0f64..2.0, kd in -1.0f64..2.0,
        ) {
            prop_assume!(kp + kd >= 0.0);
            let w = PidWeights::new(kp, ki, kd);
            let lo = unit(c, avg, prev).end_of_epoch(&w);
            let hi = unit(c + extra, avg, prev).end_of_epoch(&w);
            prop_assert!(hi >= lo);
        }
    }
}
