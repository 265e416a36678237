// SPDX-License-Identifier: Apache-2.0

//! Offline fitting of the PID prediction gains.
//!
//! The tuner replays the prediction unit's register recurrence over a
//! demand series. For epoch `j` (with two lags available) the regressors
//! are the current demand, the running average before it and the first
//! difference; the target is the demand of epoch `j + 1`. The cost is the
//! mean squared prediction error, which is quadratic in the gains.

use std::io::Write;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::mac::Scheme;
use crate::predictor::{quantize, update_average, AveragerMode, PidWeights};
use crate::scalar::Real;
use crate::traffic::{Pattern, Temporal};

/// Demand of one WI, in flits per epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingSet {
    pub samples: Vec<u64>,
    pub epoch_cycles: u64,
    pub source_hash: String,
    /// WI the series was recorded at.
    pub wi: usize,
}

impl TrainingSet {
    pub fn new(samples: Vec<u64>, epoch_cycles: u64, source_hash: impl Into<String>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::Training(format!("need at least 3 samples, got {}", samples.len())));
        }
        Ok(TrainingSet { samples, epoch_cycles, source_hash: source_hash.into(), wi: 0 })
    }

    pub fn series<T: Real>(&self) -> Vec<T> {
        self.samples.iter().map(|&s| T::from_count(s)).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.samples.windows(2).all(|w| w[0] == w[1])
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# epoch_cycles={} wi={} source={}", self.epoch_cycles, self.wi, self.source_hash)?;
        for s in &self.samples {
            writeln!(w, "{s}")?;
        }
        Ok(())
    }
}

/// Regressor rows `[current, average, current - previous]` and targets.
pub fn regressors<T: Real>(series: &[T], mode: AveragerMode) -> (Vec<[T; 3]>, Vec<T>) {
    let mut rows = Vec::with_capacity(series.len().saturating_sub(2));
    let mut targets = Vec::with_capacity(rows.capacity());
    let mut avg = T::zero();
    for j in 0..series.len().saturating_sub(1) {
        if j >= 1 {
            rows.push([series[j], avg, series[j] - series[j - 1]]);
            targets.push(series[j + 1]);
        }
        avg = update_average(mode, avg, series[j], j as u64);
    }
    (rows, targets)
}

/// Mean squared one-step error of the unclamped, unrounded predictor.
pub fn cost<T: Real>(w: &PidWeights<T>, series: &[T], mode: AveragerMode) -> T {
    let (rows, targets) = regressors(series, mode);
    let mut sum = T::zero();
    for (x, &y) in rows.iter().zip(&targets) {
        let e = w.kp * x[0] + w.ki * x[1] + w.kd * x[2] - y;
        sum = sum + e * e;
    }
    sum / T::from_count(rows.len().max(1) as u64)
}

/// Analytic gradient of [`cost`].
pub fn gradient<T: Real>(w: &PidWeights<T>, series: &[T], mode: AveragerMode) -> [T; 3] {
    let (rows, targets) = regressors(series, mode);
    let mut g = [T::zero(); 3];
    for (x, &y) in rows.iter().zip(&targets) {
        let e = w.kp * x[0] + w.ki * x[1] + w.kd * x[2] - y;
        for k in 0..3 {
            g[k] = g[k] + T::lit(2.0) * e * x[k];
        }
    }
    let m = T::from_count(rows.len().max(1) as u64);
    g.map(|v| v / m)
}

/// `J(w) = wᵀ G w − 2 bᵀ w + c` with `G` the Gram matrix of the regressors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic<T> {
    pub gram: [[T; 3]; 3],
    pub cross: [T; 3],
    pub target_sq: T,
}

impl<T: Real> Quadratic<T> {
    pub fn from_series(series: &[T], mode: AveragerMode) -> Self {
        let (rows, targets) = regressors(series, mode);
        let m = T::from_count(rows.len().max(1) as u64);
        let mut gram = [[T::zero(); 3]; 3];
        let mut cross = [T::zero(); 3];
        let mut target_sq = T::zero();
        for (x, &y) in rows.iter().zip(&targets) {
            for a in 0..3 {
                for b in 0..3 {
                    gram[a][b] = gram[a][b] + x[a] * x[b];
                }
                cross[a] = cross[a] + x[a] * y;
            }
            target_sq = target_sq + y * y;
        }
        Quadratic { gram: gram.map(|r| r.map(|v| v / m)), cross: cross.map(|v| v / m), target_sq: target_sq / m }
    }

    pub fn value(&self, w: &[T; 3]) -> T {
        let mut v = self.target_sq;
        for a in 0..3 {
            v = v - T::lit(2.0) * self.cross[a] * w[a];
            for b in 0..3 {
                v = v + w[a] * self.gram[a][b] * w[b];
            }
        }
        v
    }

    pub fn gradient(&self, w: &[T; 3]) -> [T; 3] {
        let mut g = [T::zero(); 3];
        for a in 0..3 {
            let mut s = -self.cross[a];
            for b in 0..3 {
                s = s + self.gram[a][b] * w[b];
            }
            g[a] = T::lit(2.0) * s;
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneOptions<T> {
    /// Stop when the projected gradient norm, relative to the gradient
    /// magnitude at the origin, falls below this.
    pub tol: T,
    pub max_iters: usize,
    /// Alternations of the two steps; 1 is a single pass.
    pub rounds: usize,
    pub lower: T,
    pub upper: T,
    pub mode: AveragerMode,
}

impl<T: Real> Default for TuneOptions<T> {
    fn default() -> Self {
        TuneOptions {
            tol: T::lit(1e-9),
            max_iters: 10_000,
            rounds: 100_000,
            lower: T::zero(),
            upper: T::lit(2.0),
            mode: AveragerMode::Halving,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult<T> {
    pub weights: PidWeights<T>,
    pub cost: T,
    /// Cost after every accepted iteration, starting from the initial point.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub rounds: usize,
    /// Set when the series carried no first-difference signal.
    pub constant_series: bool,
}

impl<T: Real> TuneResult<T> {
    pub fn rmse(&self) -> T {
        self.cost.sqrt()
    }
}

/// Coordinates of `free` that may still move: not pinned at a bound by a
/// gradient pointing outward.
fn movable<T: Real>(w: &[T; 3], g: &[T; 3], free: &[usize], opt: &TuneOptions<T>) -> [bool; 3] {
    let mut m = [false; 3];
    for &k in free {
        let pinned = (w[k] <= opt.lower && g[k] > T::zero()) || (w[k] >= opt.upper && g[k] < T::zero());
        m[k] = !pinned;
    }
    m
}

/// Norm of the gradient restricted to the movable coordinates.
fn projected_norm<T: Real>(g: &[T; 3], m: &[bool; 3]) -> T {
    let mut s = T::zero();
    for k in 0..3 {
        if m[k] {
            s = s + g[k] * g[k];
        }
    }
    s.sqrt()
}

/// Gradient magnitude at the origin, the unit of the stopping test.
fn gradient_scale<T: Real>(q: &Quadratic<T>) -> T {
    q.cross.iter().fold(T::one(), |m, &c| m.max(T::lit(2.0) * c.abs()))
}

/// Projected conjugate-gradient descent with exact line search over the
/// coordinates in `free`, holding the others fixed. Directions restart from
/// the negative gradient whenever a bound becomes active.
fn descend<T: Real>(
    q: &Quadratic<T>,
    w: &mut [T; 3],
    free: &[usize],
    opt: &TuneOptions<T>,
    trace: &mut Vec<T>,
) -> Result<usize> {
    let scale = gradient_scale(q);
    let mut j = q.value(w);
    let mut iters = 0;
    let mut dir = [T::zero(); 3];
    let mut prev_gg = T::zero();
    let mut prev_m = [false; 3];
    let mut restart = true;
    while iters < opt.max_iters {
        let g = q.gradient(w);
        let m = movable(w, &g, free, opt);
        let gn = projected_norm(&g, &m);
        if gn < opt.tol * scale {
            break;
        }
        let gg = gn * gn;
        let beta = if restart || m != prev_m || prev_gg <= T::zero() { T::zero() } else { gg / prev_gg };
        let mut slope = T::zero();
        for k in 0..3 {
            dir[k] = if m[k] { -g[k] + beta * dir[k] } else { T::zero() };
            slope = slope + g[k] * dir[k];
        }
        if slope >= T::zero() {
            for k in 0..3 {
                dir[k] = if m[k] { -g[k] } else { T::zero() };
            }
            slope = -gg;
        }
        let mut curv = T::zero();
        for a in 0..3 {
            for b in 0..3 {
                curv = curv + dir[a] * q.gram[a][b] * dir[b];
            }
        }
        // Largest step that stays inside the box.
        let mut to_bound = T::infinity();
        for k in 0..3 {
            if dir[k] > T::zero() {
                to_bound = to_bound.min((opt.upper - w[k]) / dir[k]);
            } else if dir[k] < T::zero() {
                to_bound = to_bound.min((opt.lower - w[k]) / dir[k]);
            }
        }
        let exact = if curv > T::zero() { -slope / (T::lit(2.0) * curv) } else { T::infinity() };
        let step = exact.min(to_bound);
        if !step.is_finite() {
            return Err(Error::Diverged(format!("unbounded descent direction at iteration {iters}")));
        }
        let mut cand = *w;
        for k in 0..3 {
            cand[k] = (w[k] + step * dir[k]).max(opt.lower).min(opt.upper);
        }
        let jc = q.value(&cand);
        if !jc.is_finite() {
            return Err(Error::Diverged(format!("cost became non-finite at iteration {iters}")));
        }
        iters += 1;
        if jc > j {
            // Rounding noise at the optimum.
            break;
        }
        let progressed = jc < j || cand != *w;
        *w = cand;
        j = jc;
        trace.push(j);
        if !progressed {
            break;
        }
        restart = step >= to_bound;
        prev_gg = gg;
        prev_m = m;
    }
    Ok(iters)
}

/// Fits `(kp, ki)` with `kd = 0`, then `kd` with the first two fixed;
/// repeats the pair of steps for up to `opt.rounds` rounds, until the
/// projected gradient over all three weights vanishes or a round makes no
/// progress.
pub fn two_step_optimize<T: Real>(series: &[T], opt: &TuneOptions<T>) -> Result<TuneResult<T>> {
    if series.len() < 3 {
        return Err(Error::Training("need at least 3 samples".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("series contains non-finite values".into()));
    }
    let q = Quadratic::from_series(series, opt.mode);
    let constant_series = series.windows(2).all(|w| w[0] == w[1]);
    if constant_series {
        log::warn!("constant training series: the derivative gain has no gradient");
    }
    let mut w = [T::zero(); 3];
    let j0 = q.value(&w);
    if !j0.is_finite() {
        return Err(Error::Diverged("cost is not finite at the origin".into()));
    }
    let all: &[usize] = if constant_series { &[0, 1] } else { &[0, 1, 2] };
    let scale = gradient_scale(&q);
    let mut trace = vec![j0];
    let mut iterations = 0;
    let mut rounds = 0;
    for _ in 0..opt.rounds.max(1) {
        let before = w;
        iterations += descend(&q, &mut w, &[0, 1], opt, &mut trace)?;
        if !constant_series {
            iterations += descend(&q, &mut w, &[2], opt, &mut trace)?;
        }
        rounds += 1;
        let g = q.gradient(&w);
        if projected_norm(&g, &movable(&w, &g, all, opt)) < opt.tol * scale || w == before {
            break;
        }
    }
    let weights = PidWeights::from_array(w);
    // Replayed residuals; the expanded quadratic form can round below zero.
    let cost = cost(&weights, series, opt.mode);
    Ok(TuneResult { weights, cost, trace, iterations, rounds, constant_series })
}

/// Root mean square error of the runtime predictor (rounded, clamped at
/// zero) over the same one-step targets as [`cost`].
pub fn runtime_rmse(w: &PidWeights<f64>, samples: &[u64], mode: AveragerMode) -> f64 {
    let series: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
    let (rows, targets) = regressors(&series, mode);
    if rows.is_empty() {
        return 0.0;
    }
    let sum: f64 = rows
        .iter()
        .zip(&targets)
        .map(|(x, &y)| {
            let p = quantize(w.kp * x[0] + w.ki * x[1] + w.kd * x[2]) as f64;
            (p - y) * (p - y)
        })
        .sum();
    (sum / rows.len() as f64).sqrt()
}

/// Configuration used to record training demand: token MAC, uniform
/// destinations, full self-similar injection.
pub fn training_config(base: &ExperimentConfig) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.mac.scheme = Scheme::Tmac;
    cfg.traffic.pattern = Pattern::Uniform;
    cfg.traffic.load = 1.0;
    if !matches!(cfg.traffic.temporal, Temporal::SelfSimilar { .. }) {
        cfg.traffic.temporal = Temporal::self_similar();
    }
    cfg.sim.trace = None;
    cfg
}

/// Records per-epoch wireless arrivals at every WI after warmup and keeps
/// the series with the highest sample variance.
pub fn collect_training_set(base: &ExperimentConfig, epochs: usize, epoch_cycles: u64) -> Result<TrainingSet> {
    let cfg = training_config(base);
    if epochs < 3 || epoch_cycles == 0 {
        return Err(Error::Training("need at least 3 epochs of positive length".into()));
    }
    let mut net = crate::harness::build_network(&cfg)?;
    if net.wis().is_empty() {
        return Err(Error::Training("training needs a topology with WIs".into()));
    }
    net.run_until(cfg.sim.warmup);
    let n_wi = net.wis().len();
    let mut series = vec![Vec::with_capacity(epochs); n_wi];
    let mut last = net.wireless_arrivals().to_vec();
    for e in 1..=epochs as u64 {
        net.run_until(cfg.sim.warmup + e * epoch_cycles);
        for (i, &now) in net.wireless_arrivals().iter().enumerate() {
            series[i].push(now - last[i]);
            last[i] = now;
        }
    }
    let variance = |s: &[u64]| {
        let n = s.len() as f64;
        let mean = s.iter().sum::<u64>() as f64 / n;
        s.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n
    };
    let (wi, _) = series
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, s)| if variance(s) > bv { (i, variance(s)) } else { (bi, bv) });
    let mut ts = TrainingSet::new(std::mem::take(&mut series[wi]), epoch_cycles, cfg.hash())?;
    ts.wi = wi;
    Ok(ts)
}

/// Writes the tuned weights, in config syntax, followed by the cost trace.
pub fn write_tune_report<W: Write>(mut w: W, res: &TuneResult<f64>, ts: &TrainingSet, last_value_rmse: f64) -> Result<()> {
    let wt = &res.weights;
    writeln!(w, "# training: {} epochs of {} cycles at WI {} (config {})", ts.samples.len(), ts.epoch_cycles, ts.wi, ts.source_hash)?;
    writeln!(w, "# cost J = {:.6}, rmse = {:.6}, last-value rmse = {:.6}", res.cost, res.rmse(), last_value_rmse)?;
    writeln!(w, "# rounds = {}, iterations = {}", res.rounds, res.iterations)?;
    writeln!(w, "[mac]")?;
    writeln!(w, "weights = [{}, {}, {}]", wt.kp, wt.ki, wt.kd)?;
    writeln!(w)?;
    writeln!(w, "# iteration,cost")?;
    for (i, j) in res.trace.iter().enumerate() {
        writeln!(w, "# {i},{j}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Series that obeys the predictor recurrence exactly for `w`.
    fn planted(w: [f64; 3], len: usize) -> Vec<f64> {
        let mut s = vec![900.0, 100.0];
        let mut avg = update_average(AveragerMode::Halving, 0.0, s[0], 0);
        while s.len() < len {
            let j = s.len() - 1;
            let next = w[0] * s[j] + w[1] * avg + w[2] * (s[j] - s[j - 1]);
            avg = update_average(AveragerMode::Halving, avg, s[j], j as u64);
            s.push(next);
        }
        s
    }

    #[test]
    fn perfect_predictor_costs_zero() {
        let s = planted([0.5, 0.3, 0.1], 30);
        assert!(cost(&PidWeights::new(0.5, 0.3, 0.1), &s, AveragerMode::Halving) < 1e-20);
    }

    #[test]
    fn hand_evaluated_cost() {
        // Series 2,4,1,9: rows at j=1 (4, avg 1, diff 2) → target 1 and
        // j=2 (1, avg 2.5, diff -3) → target 9. With w = (1,0,0): preds 4,1.
        let s: [f64; 4] = [2.0, 4.0, 1.0, 9.0];
        let j = cost(&PidWeights::new(1.0, 0.0, 0.0), &s, AveragerMode::Halving);
        assert!((j - (9.0 + 64.0) / 2.0).abs() < 1e-12);
        // Weights giving predictions 3 and 5 against actuals 1 and 9.
        // 4kp + ki + 2kd = 3 and kp + 2.5ki − 3kd = 5 with kd = 0.
        let ki = (5.0 - 3.0 / 4.0) / (2.5 - 0.25);
        let kp = (3.0 - ki) / 4.0;
        let j = cost(&PidWeights::new(kp, ki, 0.0), &s, AveragerMode::Halving);
        assert!((j - 10.0).abs() < 1e-9);
    }

    #[test]
    fn last_value_reduction() {
        let s: Vec<f64> = [3u64, 8, 2, 7, 7, 1, 0, 4].iter().map(|&v| v as f64).collect();
        let direct: f64 = s[2..].iter().zip(&s[1..s.len() - 1]).map(|(a, p)| (a - p) * (a - p)).sum::<f64>() / 6.0;
        assert!((cost(&PidWeights::last_value(), &s, AveragerMode::Halving) - direct).abs() < 1e-12);
    }

    #[test]
    fn recovers_planted_weights() {
        let s = planted([0.5, 0.3, 0.1], 60);
        let res = two_step_optimize(&s, &TuneOptions::default()).unwrap();
        let w = res.weights.as_array();
        for (got, want) in w.iter().zip([0.5, 0.3, 0.1]) {
            assert!((got - want).abs() <= 1e-3, "{w:?}");
        }
        assert!(res.trace.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn single_pass_is_the_literal_two_step() {
        let s = planted([0.5, 0.3, 0.1], 60);
        let opt = TuneOptions { rounds: 1, ..TuneOptions::default() };
        let one = two_step_optimize(&s, &opt).unwrap();
        let many = two_step_optimize(&s, &TuneOptions::default()).unwrap();
        assert_eq!(one.rounds, 1);
        assert!(many.cost <= one.cost);
    }

    #[test]
    fn constant_series_keeps_kd_zero() {
        let s = vec![5.0; 20];
        let res = two_step_optimize(&s, &TuneOptions::default()).unwrap();
        assert!(res.constant_series);
        assert_eq!(res.weights.kd, 0.0);
        assert!(res.cost < 1e-12);
    }

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(two_step_optimize(&[1.0, 2.0], &TuneOptions::default()).is_err());
        assert!(two_step_optimize(&[1.0, f64::NAN, 2.0, 3.0], &TuneOptions::default()).is_err());
        assert!(matches!(
            two_step_optimize(&[1e300, 1e300, 0.0, 1e300], &TuneOptions::default()),
            Err(Error::Diverged(_))
        ));
        assert!(TrainingSet::new(vec![1, 2], 100, "x").is_err());
    }

    #[test]
    fn single_precision_tuning() {
        let s: Vec<f32> = planted([0.5, 0.3, 0.1], 40).iter().map(|&v| v as f32).collect();
        let opt = TuneOptions::<f32> { tol: 1e-4, ..TuneOptions::default() };
        let res = two_step_optimize(&s, &opt).unwrap();
        assert!((res.weights.kp - 0.5).abs() < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gradient_matches_central_differences(
            series in proptest::collection::vec(0u64..200, 3..60),
            w in proptest::array::uniform3(-1.0f64..2.0),
        ) {
            let s: Vec<f64> = series.iter().map(|&v| v as f64).collect();
            let pw = PidWeights::from_array(w);
            let g = gradient(&pw, &s, AveragerMode::Halving);
            for k in 0..3 {
                let h = 1e-4;
                let mut hi = w; hi[k] += h;
                let mut lo = w; lo[k] -= h;
                let fd = (cost(&PidWeights::from_array(hi), &s, AveragerMode::Halving)
                    - cost(&PidWeights::from_array(lo), &s, AveragerMode::Halving)) / (2.0 * h);
                let scale = g[k].abs().max(fd.abs()).max(1.0);
                prop_assert!((g[k] - fd).abs() / scale < 1e-6, "k={} g={} fd={}", k, g[k], fd);
            }
        }

        #[test]
        fn gram_is_positive_semidefinite(series in proptest::collection::vec(0u64..500, 3..80),
                                         v in proptest::array::uniform2(-3.0f64..3.0)) {
            let s: Vec<f64> = series.iter().map(|&x| x as f64).collect();
            let q = Quadratic::from_series(&s, AveragerMode::Halving);
            let quad = v[0] * v[0] * q.gram[0][0] + 2.0 * v[0] * v[1] * q.gram[0][1] + v[1] * v[1] * q.gram[1][1];
            prop_assert!(quad >= -1e-9 * (1.0 + q.gram[0][0] + q.gram[1][1]));
        }

        #[test]
        fn quadratic_form_matches_replay(series in proptest::collection::vec(0u64..300, 3..50),
                                         w in proptest::array::uniform3(0.0f64..2.0)) {
            let s: Vec<f64> = series.iter().map(|&x| x as f64).collect();
            let q = Quadratic::from_series(&s, AveragerMode::Halving);
            let direct = cost(&PidWeights::from_array(w), &s, AveragerMode::Halving);
            prop_assert!((q.value(&w) - direct).abs() <= 1e-7 * (1.0 + direct));
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn optimum_beats_random_probes(series in proptest::collection::vec(0u64..300, 6..60),
                                       shift in 0u64..100,
                                       probe in proptest::array::uniform3(0.0f64..2.0)) {
            let s: Vec<f64> = series.iter().map(|&x| (x + shift) as f64).collect();
            let res = two_step_optimize(&s, &TuneOptions::default()).unwrap();
            let at_probe = cost(&PidWeights::from_array(probe), &s, AveragerMode::Halving);
            prop_assert!(res.cost <= at_probe * (1.0 + 1e-6) + 1e-6);
        }
    }
}
