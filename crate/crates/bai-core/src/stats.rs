//! Streaming per-arm statistics and the GLR / EV-GLR statistics.
//!
//! Each arm keeps a Welford accumulator for count, mean and the biased
//! variance (divisor `N`, matching the definition the thresholds calibrate
//! against), plus a frozen "anchor": the statistics captured the last time
//! the count entered a new geometric slice `ceil(gamma^i)`. The KL threshold
//! reads its approximation-error ratio off those anchors.
//!
//! The GLR statistic of a suboptimal arm is the empirical unknown-variance
//! transportation cost with weights equal to the counts; the EV statistic
//! plugs the empirical variances into the known-variance closed form:
//!
//! `Z_ev = (mu_lead - mu_a)^2 / (2 (s2_a/N_a + s2_lead/N_lead))`.

use serde::{Deserialize, Serialize};

use crate::model::cost_unknown_params;
use crate::{Error, Result};

/// Streaming sufficient statistics for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    count: u64,
    mean: f64,
    m2: f64,
    gamma: f64,
    anchor_count: u64,
    anchor_mean: f64,
    anchor_var: f64,
}

/// Slice index `floor(log_gamma n)`, robust to floating-point edges.
fn slice_index(n: u64, gamma: f64) -> i64 {
    if n == 0 {
        return 0;
    }
    let mut i = ((n as f64).ln() / gamma.ln()).floor() as i64;
    while gamma.powi(i as i32 + 1) <= n as f64 {
        i += 1;
    }
    while gamma.powi(i as i32) > n as f64 {
        i -= 1;
    }
    i
}

/// First integer count inside slice `i`: `ceil(gamma^i)`.
fn slice_boundary(i: i64, gamma: f64) -> u64 {
    gamma.powi(i as i32).ceil() as u64
}

impl ArmStats {
    pub fn new(gamma: f64) -> Self {
        ArmStats {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            gamma,
            anchor_count: 0,
            anchor_mean: 0.0,
            anchor_var: 0.0,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Biased empirical variance (divisor `N`).
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    /// Count at the boundary of the current slice, where the anchor froze.
    pub fn anchor_count(&self) -> u64 {
        self.anchor_count
    }

    pub fn anchor_mean(&self) -> f64 {
        self.anchor_mean
    }

    pub fn anchor_var(&self) -> f64 {
        self.anchor_var
    }

    /// Welford update; refreshes the anchor when the count lands exactly on
    /// the boundary `ceil(gamma^i)` of its slice `i = floor(log_gamma N)`.
    pub fn update(&mut self, sample: f64) {
        self.count += 1;
        let delta = sample - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (sample - self.mean);
        let i = slice_index(self.count, self.gamma);
        if self.count == slice_boundary(i, self.gamma) {
            self.anchor_count = self.count;
            self.anchor_mean = self.mean;
            self.anchor_var = self.variance();
        }
    }
}

/// Which statistic drives challenger selection and stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlrMode {
    /// Unknown-variance GLR statistic `Z`.
    Unknown,
    /// Empirical-variance statistic `Z_ev` (known-variance form, plugged).
    Ev,
}

/// Per-step GLR summary: the empirical-best arm and both statistics.
///
/// `z[leader]` and `z_ev[leader]` are `+inf` so that minima over suboptimal
/// arms need no index bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct GlrReport {
    pub leader: usize,
    pub z: Vec<f64>,
    pub z_ev: Vec<f64>,
}

impl GlrReport {
    pub fn value(&self, mode: GlrMode, a: usize) -> f64 {
        match mode {
            GlrMode::Unknown => self.z[a],
            GlrMode::Ev => self.z_ev[a],
        }
    }
}

/// Empirical best arm (argmax of means, lowest index on ties).
pub fn leader(stats: &[ArmStats]) -> usize {
    let mut best = 0;
    for (a, s) in stats.iter().enumerate().skip(1) {
        if s.mean() > stats[best].mean() {
            best = a;
        }
    }
    best
}

fn check_ready(stats: &[ArmStats]) -> Result<()> {
    for (a, s) in stats.iter().enumerate() {
        if s.count() < 2 {
            return Err(Error::InsufficientData(format!("arm {a} has count < 2")));
        }
        if !(s.variance() > 0.0) {
            return Err(Error::InsufficientData(format!("arm {a} has zero variance")));
        }
    }
    Ok(())
}

/// Computes the leader and both GLR statistics for every suboptimal arm.
pub fn glr_report(stats: &[ArmStats]) -> Result<GlrReport> {
    check_ready(stats)?;
    let lead = leader(stats);
    let (ml, vl, nl) = (stats[lead].mean(), stats[lead].variance(), stats[lead].count() as f64);
    let mut z = vec![f64::INFINITY; stats.len()];
    let mut z_ev = vec![f64::INFINITY; stats.len()];
    for (a, s) in stats.iter().enumerate() {
        if a == lead {
            continue;
        }
        let (ma, va, na) = (s.mean(), s.variance(), s.count() as f64);
        z[a] = cost_unknown_params(ml, vl, ma, va, nl, na).value;
        let gap = ml - ma;
        z_ev[a] = if gap <= 0.0 {
            0.0
        } else {
            0.5 * gap * gap / (va / na + vl / nl)
        };
    }
    Ok(GlrReport { leader: lead, z, z_ev })
}

/// Challenger arm: argmin over `a != leader` of the transportation cost,
/// plus `ln N_a` when `penalized` (the TCI rule). Lowest index on ties.
pub fn min_cost_challenger(
    stats: &[ArmStats],
    lead: usize,
    mode: GlrMode,
    penalized: bool,
) -> Result<usize> {
    let report = glr_report(stats)?;
    let mut best: Option<(usize, f64)> = None;
    for a in 0..stats.len() {
        if a == lead {
            continue;
        }
        let cost = match mode {
            GlrMode::Unknown => {
                if lead == report.leader {
                    report.z[a]
                } else {
                    cost_unknown_params(
                        stats[lead].mean(),
                        stats[lead].variance(),
                        stats[a].mean(),
                        stats[a].variance(),
                        stats[lead].count() as f64,
                        stats[a].count() as f64,
                    )
                    .value
                }
            }
            GlrMode::Ev => {
                let gap = stats[lead].mean() - stats[a].mean();
                if gap <= 0.0 {
                    0.0
                } else {
                    0.5 * gap * gap
                        / (stats[a].variance() / stats[a].count() as f64
                            + stats[lead].variance() / stats[lead].count() as f64)
                }
            }
        };
        let score = if penalized {
            cost + (stats[a].count() as f64).ln()
        } else {
            cost
        };
        match best {
            Some((_, b)) if score >= b => {}
            _ => best = Some((a, score)),
        }
    }
    best.map(|(a, _)| a)
        .ok_or_else(|| Error::InsufficientData("no challenger candidate".into()))
}
