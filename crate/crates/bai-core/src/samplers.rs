//! Sampling rules behind a single next-arm interface.
//!
//! - C-tracking (used by TaS, EV-TaS and the fixed-weights oracle): project
//!   the round's target allocation onto the clipped simplex
//!   `{w : w_a >= eps_t, sum w = 1}` with `eps_t = min(1/K, 1/(2 sqrt(K^2+t)))`,
//!   accumulate, and pull the arm whose cumulative target most exceeds its
//!   count.
//! - Top Two: pull the empirical-best leader with probability `beta`,
//!   otherwise the challenger minimizing transportation cost plus `ln N`.
//! - FHN2: elimination baseline driven by paired-difference statistics with
//!   a continuous-time-calibrated boundary; it owns its own stopping logic.

use serde::{Deserialize, Serialize};

use crate::stats::{min_cost_challenger, ArmStats, GlrMode};
use crate::{Error, Result};

/// Sampling-rule selector, by the names run configs use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Tas,
    EvTas,
    EbTci,
    EbEvtci,
    Uniform,
    Fixed,
    Fhn2,
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Tas => "tas",
            SamplerKind::EvTas => "ev-tas",
            SamplerKind::EbTci => "eb-tci",
            SamplerKind::EbEvtci => "eb-evtci",
            SamplerKind::Uniform => "uniform",
            SamplerKind::Fixed => "fixed",
            SamplerKind::Fhn2 => "fhn2",
        }
    }

    /// Minimal initialization pulls per arm for the rule's guarantees.
    pub fn min_n0(&self) -> u64 {
        match self {
            SamplerKind::EbTci => 4,
            SamplerKind::EbEvtci => 6,
            _ => 2,
        }
    }

    /// Default initialization pulls per arm. Rules that stop on the plugged
    /// empirical-variance statistic get 6: with fewer samples a near-zero
    /// variance estimate can blow the statistic past any threshold at the
    /// very first check (the same inverse-chi-square moment condition behind
    /// the EVTCI minimum).
    pub fn default_n0(&self) -> u64 {
        match self {
            SamplerKind::EvTas | SamplerKind::EbEvtci => 6,
            SamplerKind::EbTci => 4,
            _ => 2,
        }
    }

    /// Which GLR statistic the stopping rule pairs with this sampler.
    pub fn glr_mode(&self) -> GlrMode {
        match self {
            SamplerKind::EvTas | SamplerKind::EbEvtci => GlrMode::Ev,
            _ => GlrMode::Unknown,
        }
    }

    pub fn all() -> [SamplerKind; 7] {
        [
            SamplerKind::Tas,
            SamplerKind::EvTas,
            SamplerKind::EbTci,
            SamplerKind::EbEvtci,
            SamplerKind::Uniform,
            SamplerKind::Fixed,
            SamplerKind::Fhn2,
        ]
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::all()
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sampler '{s}'")))
    }
}

/// Forced-exploration floor at round `t` (total pulls so far).
pub fn epsilon_schedule(k: usize, t: u64) -> f64 {
    let kf = k as f64;
    (1.0 / kf).min(0.5 / (kf * kf + t as f64).sqrt())
}

/// L-infinity projection of a simplex point onto
/// `{w : w_a >= eps, sum w = 1}`.
///
/// The minimal radius `r` solves `sum_i max(eps, w_i - r) = 1` (nonincreasing
/// and piecewise linear in `r`); a witness point is then assembled inside the
/// per-coordinate windows `[max(eps, w_i - r), w_i + r]`, low indices first.
pub fn project_simplex_linf(target: &[f64], eps: f64) -> Vec<f64> {
    let k = target.len();
    let sum: f64 = target.iter().sum();
    let w: Vec<f64> = if sum > 0.0 {
        target.iter().map(|x| x / sum).collect()
    } else {
        vec![1.0 / k as f64; k]
    };
    let floor_sum = |r: f64| -> f64 { w.iter().map(|&x| (x - r).max(eps)).sum() };
    if w.iter().all(|&x| x >= eps) {
        return w;
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if floor_sum(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let r = hi;
    let lows: Vec<f64> = w.iter().map(|&x| (x - r).max(eps)).collect();
    let mut out = lows.clone();
    let mut mass = 1.0 - lows.iter().sum::<f64>();
    for (i, v) in out.iter_mut().enumerate() {
        if mass <= 0.0 {
            break;
        }
        let cap = (w[i] + r) - *v;
        let add = cap.min(mass).max(0.0);
        *v += add;
        mass -= add;
    }
    if mass > 0.0 {
        out[0] += mass; // fp slack from the bisected radius
    }
    out
}

/// Cumulative projected targets of a C-tracking sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    cumulative: Vec<f64>,
}

impl TrackerState {
    pub fn new(k: usize) -> Self {
        TrackerState {
            cumulative: vec![0.0; k],
        }
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Absorbs this round's target and picks
    /// `argmax_a sum_s w^eps_{s,a} - N_{t,a}` (lowest index on ties).
    pub fn next_arm(&mut self, target: &[f64], counts: &[u64], t: u64) -> usize {
        let eps = epsilon_schedule(self.cumulative.len(), t);
        let w = project_simplex_linf(target, eps);
        for (c, x) in self.cumulative.iter_mut().zip(w.iter()) {
            *c += x;
        }
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (a, c) in self.cumulative.iter().enumerate() {
            let score = c - counts[a] as f64;
            if score > best_score {
                best_score = score;
                best = a;
            }
        }
        best
    }
}

/// Round-robin sampling: arm `t mod K`.
pub fn next_arm_uniform(t: u64, k: usize) -> usize {
    (t % k as u64) as usize
}

/// Top Two draw: the leader with probability `beta` (given a uniform draw),
/// otherwise the penalized min-cost challenger in the given mode.
pub fn next_arm_toptwo(stats: &[ArmStats], beta: f64, draw: f64, mode: GlrMode) -> Result<usize> {
    let lead = crate::stats::leader(stats);
    if draw < beta {
        Ok(lead)
    } else {
        min_cost_challenger(stats, lead, mode, true)
    }
}

/// Elimination boundary `g(x, delta) = sqrt((x+1)(2 ln((K-1)/(2 delta)) + ln(x+1)))`.
pub fn fhn2_boundary(x: f64, k: usize, delta: f64) -> f64 {
    ((x + 1.0) * (2.0 * ((k as f64 - 1.0) / (2.0 * delta)).ln() + (x + 1.0).ln())).sqrt()
}

/// Outcome of absorbing one FHN2 round.
#[derive(Debug, Clone, PartialEq)]
pub enum Fhn2Step {
    Continue,
    Stop(usize),
}

/// State of the FHN2 elimination baseline.
///
/// Active arms are sampled once per round; a pair statistic
/// `S_{b,a}(n) = sum_t (D_t - mean D)^2 / (n-1)` over the paired differences
/// `D_t = X_{t,b} - X_{t,a}` drives eliminations through the effective time
/// `t_{b,a}(n) = n / S_{b,a}(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fhn2State {
    k: usize,
    delta: f64,
    n0: u64,
    round: u64,
    active: Vec<bool>,
    means: Vec<f64>,
    diff_mean: Vec<f64>,
    diff_m2: Vec<f64>,
}

impl Fhn2State {
    /// Default initialization rounds: `max(2, ceil(10 ln(1/delta)))`.
    pub fn default_n0(delta: f64) -> u64 {
        2u64.max((10.0 * (1.0 / delta).ln()).ceil() as u64)
    }

    pub fn new(k: usize, delta: f64, n0: u64) -> Self {
        Fhn2State {
            k,
            delta,
            n0,
            round: 0,
            active: vec![true; k],
            means: vec![0.0; k],
            diff_mean: vec![0.0; k * k],
            diff_m2: vec![0.0; k * k],
        }
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn active_arms(&self) -> Vec<usize> {
        (0..self.k).filter(|&a| self.active[a]).collect()
    }

    fn pair(&self, a: usize, b: usize) -> usize {
        a * self.k + b
    }

    /// Unbiased variance of the paired differences of arms `a` and `b`.
    pub fn pair_variance(&self, a: usize, b: usize) -> f64 {
        if self.round < 2 {
            return 0.0;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.diff_m2[self.pair(lo, hi)] / (self.round as f64 - 1.0)
    }

    /// Absorbs one fresh sample per active arm (`samples[a]` read only for
    /// active `a`), then runs the elimination rule once `n0` rounds are in.
    pub fn step(&mut self, samples: &[f64]) -> Fhn2Step {
        self.round += 1;
        let n = self.round as f64;
        for a in 0..self.k {
            if self.active[a] {
                self.means[a] += (samples[a] - self.means[a]) / n;
            }
        }
        for a in 0..self.k {
            if !self.active[a] {
                continue;
            }
            for b in (a + 1)..self.k {
                if !self.active[b] {
                    continue;
                }
                let d = samples[b] - samples[a];
                let idx = self.pair(a, b);
                let delta = d - self.diff_mean[idx];
                self.diff_mean[idx] += delta / n;
                self.diff_m2[idx] += delta * (d - self.diff_mean[idx]);
            }
        }
        if self.round < self.n0.max(2) {
            return Fhn2Step::Continue;
        }
        self.eliminate();
        let active = self.active_arms();
        if active.len() == 1 {
            Fhn2Step::Stop(active[0])
        } else {
            Fhn2Step::Continue
        }
    }

    /// Removes every active arm `b` dominated by all other active arms:
    /// `t_{b,a}(n) (mean_b - mean_a) < -g(t_{b,a}(n), delta)` for all `a`.
    /// A degenerate pair (zero variance) never supports an elimination.
    fn eliminate(&mut self) {
        let active = self.active_arms();
        if active.len() <= 1 {
            return;
        }
        let n = self.round as f64;
        let mut remove = Vec::new();
        for &b in &active {
            let mut dominated = true;
            for &a in &active {
                if a == b {
                    continue;
                }
                let s = self.pair_variance(a, b);
                if s <= 0.0 {
                    dominated = false;
                    break;
                }
                let t_eff = n / s;
                let lhs = t_eff * (self.means[b] - self.means[a]);
                if lhs >= -fhn2_boundary(t_eff, self.k, self.delta) {
                    dominated = false;
                    break;
                }
            }
            if dominated {
                remove.push(b);
            }
        }
        for b in remove {
            self.active[b] = false;
        }
    }
}
