//! Monte Carlo falsification of the time-uniform concentration inequalities.
//!
//! Each check streams i.i.d. Gaussian trajectories and flags a trajectory as
//! violating when its bound fails at any checked time up to the horizon
//! (time-uniform semantics: one flag per trajectory, not per step). The
//! guarantees are one-sided `<= delta` statements, so observed rates are
//! expected far below the target; a Wilson 95% interval accompanies each
//! rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::kl_gaussian;
use crate::rng::{split_seed, Rng};
use crate::specfn::{wbar_0, wbar_m1, zeta};
use crate::stats::ArmStats;
use crate::thresholds::{Anchor, KlBoundParams};
use crate::{Error, Result};

/// Trajectory-level coverage summary for one bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub bound: String,
    pub delta_target: f64,
    pub trials: u64,
    pub horizon: u64,
    pub violations: u64,
    pub rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl CoverageReport {
    fn new(bound: &str, delta: f64, trials: u64, horizon: u64, violations: u64) -> Self {
        let rate = violations as f64 / trials as f64;
        let (wilson_lo, wilson_hi) = wilson_interval(violations, trials);
        CoverageReport {
            bound: bound.to_string(),
            delta_target: delta,
            trials,
            horizon,
            violations,
            rate,
            wilson_lo,
            wilson_hi,
        }
    }
}

/// Wilson 95% interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let hw = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - hw).max(0.0), (center + hw).min(1.0))
}

/// Shared Monte Carlo settings; defaults mirror the threshold defaults
/// (`s = 2`, `gamma = 1.2`, `eta0 = eta1 = 1/ln(1/delta)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub delta: f64,
    pub s: f64,
    pub gamma: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub trials: u64,
    pub horizon: u64,
    pub seed: u64,
}

impl McParams {
    pub fn new(delta: f64, trials: u64, horizon: u64, seed: u64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("delta must be in (0,1), got {delta}")));
        }
        if trials == 0 || horizon == 0 {
            return Err(Error::InvalidConfig("need trials >= 1 and horizon >= 1".into()));
        }
        let eta = 1.0 / (1.0 / delta).ln();
        Ok(McParams {
            delta,
            s: 2.0,
            gamma: 1.2,
            eta0: eta,
            eta1: eta,
            trials,
            horizon,
            seed,
        })
    }
}

/// Time-uniform empirical-variance envelopes: with probability `1 - delta`
/// each, for all `t`, the variance of `t+1` standard draws stays below the
/// upper curve, and (once the curve is positive) above the lower curve.
/// Returns the (upper, lower) coverage reports.
pub fn mc_variance_tails(p: &McParams, sigma2: f64) -> Result<(CoverageReport, CoverageReport)> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain("sigma2 must be positive".into()));
    }
    let l = (zeta(p.s)? / p.delta).ln();
    let horizon = p.horizon as usize;
    // bounds depend on t only: precompute both curves
    let mut upper = vec![f64::INFINITY; horizon + 1];
    let mut lower = vec![f64::NEG_INFINITY; horizon + 1];
    for t in 1..=horizon {
        let tf = t as f64;
        let arg1 = 1.0
            + 2.0 * (1.0 + p.eta1) / tf * (l + p.s * (1.0 + tf.ln() / (1.0 + p.eta1).ln()).ln());
        upper[t] = sigma2 * (wbar_m1(arg1.max(1.0))? - 1.0 / tf);
        let arg0 = 1.0
            + 2.0 * (1.0 + p.eta0) / tf * (l + p.s * (1.0 + tf.ln() / (1.0 + p.eta0).ln()).ln());
        let lo = sigma2 * (wbar_0(arg0.max(1.0))? - 1.0 / tf);
        // the lower tail is checked only after its initial-time gate, i.e.
        // once the bound is positive
        lower[t] = if lo > 0.0 { lo } else { f64::NEG_INFINITY };
    }
    let counts: Vec<(u64, u64)> = (0..p.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(split_seed(p.seed, i));
            let mut stats = ArmStats::new(p.gamma);
            stats.update(rng.next_gaussian(0.0, sigma2));
            let mut hit_upper = false;
            let mut hit_lower = false;
            for t in 1..=horizon {
                stats.update(rng.next_gaussian(0.0, sigma2));
                let v = stats.variance();
                if v > upper[t] {
                    hit_upper = true;
                }
                if v < lower[t] {
                    hit_lower = true;
                }
                if hit_upper && hit_lower {
                    break;
                }
            }
            (hit_upper as u64, hit_lower as u64)
        })
        .collect();
    let up: u64 = counts.iter().map(|c| c.0).sum();
    let lo: u64 = counts.iter().map(|c| c.1).sum();
    Ok((
        CoverageReport::new("variance-upper", p.delta, p.trials, p.horizon, up),
        CoverageReport::new("variance-lower", p.delta, p.trials, p.horizon, lo),
    ))
}

/// Time-uniform empirical-mean envelope:
/// `|mu_t - mu| <= sigma sqrt(eps_mu(t, delta))` for all `t` with
/// probability `1 - delta`.
pub fn mc_mean_tail(p: &McParams, mean: f64, sigma2: f64) -> Result<CoverageReport> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain("sigma2 must be positive".into()));
    }
    let l = (zeta(p.s)? / p.delta).ln();
    let horizon = p.horizon as usize;
    let mut bound = vec![f64::INFINITY; horizon + 1];
    for t in 1..=horizon {
        let eps = crate::thresholds::eps_mu_core(t as f64, l, p.s);
        bound[t] = (sigma2 * eps).sqrt();
    }
    let violations: u64 = (0..p.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(split_seed(p.seed, i));
            let mut sum = 0.0;
            for t in 1..=horizon {
                sum += rng.next_gaussian(mean, sigma2);
                if (sum / t as f64 - mean).abs() > bound[t] {
                    return 1u64;
                }
            }
            0
        })
        .sum();
    Ok(CoverageReport::new(
        "mean",
        p.delta,
        p.trials,
        p.horizon,
        violations,
    ))
}

/// Time-uniform bound on the summed KL between the per-arm MLE and the truth
/// for a two-arm alternating stream, with the same slice anchors and
/// eigenvalue-ratio machinery the KL threshold uses (`|S| = 2`, so the
/// envelope log argument is `ln(12 zeta(s) / delta)`).
pub fn mc_kl_sum(p: &McParams, arms: [(f64, f64); 2]) -> Result<CoverageReport> {
    if !(arms[0].1 > 0.0) || !(arms[1].1 > 0.0) {
        return Err(Error::Domain("arm variances must be positive".into()));
    }
    let zeta_s = zeta(p.s)?;
    let l_eps = (12.0 * zeta_s / p.delta).ln();
    let params = KlBoundParams {
        s: p.s,
        gamma: p.gamma,
        eta0: p.eta0,
        eta1: p.eta1,
        l_eps,
        main_term: 0.25 * (2.0 * zeta_s * zeta_s / p.delta).ln(),
    };
    let horizon = p.horizon;
    let violations: u64 = (0..p.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(split_seed(p.seed, i));
            let mut st = [ArmStats::new(p.gamma), ArmStats::new(p.gamma)];
            for t in 0..horizon {
                let a = (t % 2) as usize;
                st[a].update(rng.next_gaussian(arms[a].0, arms[a].1));
                let gated = (0..2).all(|c| {
                    let n = st[c].count();
                    crate::thresholds::gate_box_core(n, l_eps, p.s, p.eta0)
                        && crate::thresholds::gate_tm_core(n, l_eps, p.s, p.eta0, p.eta1)
                });
                if !gated {
                    continue;
                }
                let stat: f64 = (0..2)
                    .map(|c| {
                        st[c].count() as f64
                            * kl_gaussian(st[c].mean(), st[c].variance(), arms[c].0, arms[c].1)
                                .unwrap_or(f64::INFINITY)
                    })
                    .sum();
                let bound = crate::thresholds::kl_bound(
                    &params,
                    (Anchor::of(&st[0]), Anchor::of(&st[1])),
                    (st[0].count(), st[1].count()),
                );
                if stat > bound {
                    return 1u64;
                }
            }
            0
        })
        .sum();
    Ok(CoverageReport::new(
        "kl-sum",
        p.delta,
        p.trials,
        p.horizon,
        violations,
    ))
}
