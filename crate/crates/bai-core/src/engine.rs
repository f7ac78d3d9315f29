//! Episode execution and batch aggregation.
//!
//! An episode pulls arms under the configured sampling rule, checks the
//! stopping rule after every pull, and recommends the empirical best arm at
//! the stop. Which statistic is compared against the threshold follows the
//! sampler: rules that plug in the empirical variance (`ev-tas`, `eb-evtci`)
//! stop on `Z_ev`, everything else on the unknown-variance `Z`; FHN2 owns
//! its own elimination-based stopping.
//!
//! Episodes are deterministic functions of `(config, seed)`. Batches derive
//! per-episode seeds with [`crate::rng::split_seed`], so aggregates are
//! independent of the parallelism degree and episode ordering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::Instance;
use crate::oracle::{optimal_allocation_known, optimal_allocation_unknown};
use crate::rng::{split_seed, Rng};
use crate::samplers::{
    next_arm_toptwo, next_arm_uniform, Fhn2State, Fhn2Step, SamplerKind, TrackerState,
};
use crate::stats::{glr_report, ArmStats};
use crate::thresholds::{threshold_value, ThresholdSpec};
use crate::{Error, Result};

/// One episode's full configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: Instance,
    pub sampler: SamplerKind,
    pub threshold: ThresholdSpec,
    /// Leader probability for the Top Two rules.
    pub beta: f64,
    /// Initialization pulls per arm; `None` uses the sampler's minimum
    /// (FHN2: `max(2, ceil(10 ln(1/delta)))`).
    pub n0: Option<u64>,
    pub max_steps: u64,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(instance: Instance, sampler: SamplerKind, threshold: ThresholdSpec) -> Self {
        RunConfig {
            instance,
            sampler,
            threshold,
            beta: 0.5,
            n0: None,
            max_steps: 1_000_000,
            seed: 0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.threshold.delta
    }

    fn effective_n0(&self) -> u64 {
        match self.sampler {
            SamplerKind::Fhn2 => self
                .n0
                .unwrap_or_else(|| Fhn2State::default_n0(self.delta())),
            _ => self.n0.unwrap_or_else(|| self.sampler.default_n0()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.k_arms != self.instance.k() {
            return Err(Error::InvalidConfig(format!(
                "threshold spec is for {} arms, instance has {}",
                self.threshold.k_arms,
                self.instance.k()
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidConfig("beta must be in (0,1)".into()));
        }
        if let Some(n0) = self.n0 {
            let floor = self.sampler.min_n0();
            if self.sampler != SamplerKind::Fhn2 && n0 < floor {
                return Err(Error::InvalidConfig(format!(
                    "{} needs n0 >= {floor}",
                    self.sampler.name()
                )));
            }
        }
        if self.max_steps < self.effective_n0() * self.instance.k() as u64 {
            return Err(Error::InvalidConfig("max_steps below initialization".into()));
        }
        Ok(())
    }
}

/// One run's trajectory summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    /// Total pulls at the stop (or at the cap).
    pub stop_time: u64,
    pub recommended: usize,
    pub correct: bool,
    pub capped: bool,
}

/// Runs one episode; deterministic in `(config, config.seed)`.
pub fn run_episode(config: &RunConfig) -> Result<EpisodeRecord> {
    run_episode_observed(config, |_, _| {})
}

/// [`run_episode`] with a per-pull observer `(total pulls so far, stats)`,
/// used by tests and trajectory analyses. Not called for FHN2 (which keeps
/// paired statistics, not per-arm `ArmStats`).
pub fn run_episode_observed<F>(config: &RunConfig, mut observe: F) -> Result<EpisodeRecord>
where
    F: FnMut(u64, &[ArmStats]),
{
    config.validate()?;
    let best = config.instance.best_arm()?;
    if config.sampler == SamplerKind::Fhn2 {
        return run_fhn2(config, best);
    }
    let inst = &config.instance;
    let k = inst.k();
    let mut rng = Rng::new(config.seed);
    let mut arms: Vec<ArmStats> = (0..k).map(|_| ArmStats::new(config.threshold.gamma)).collect();
    let mut counts = vec![0u64; k];
    let mut t: u64 = 0;
    let pull = |a: usize, arms: &mut Vec<ArmStats>, counts: &mut Vec<u64>, rng: &mut Rng| {
        arms[a].update(rng.next_gaussian(inst.mean(a), inst.variance(a)));
        counts[a] += 1;
    };

    let n0 = config.effective_n0();
    for _ in 0..n0 {
        for a in 0..k {
            pull(a, &mut arms, &mut counts, &mut rng);
            t += 1;
            observe(t, &arms);
        }
    }

    let mut tracker = TrackerState::new(k);
    let fixed_target = if config.sampler == SamplerKind::Fixed {
        Some(optimal_allocation_unknown(inst)?.weights)
    } else {
        None
    };
    let uniform_target = vec![1.0 / k as f64; k];
    let mode = config.sampler.glr_mode();

    loop {
        if let Ok(report) = glr_report(&arms) {
            let lead = report.leader;
            let stopped = (0..k).filter(|&a| a != lead).all(|a| {
                report.value(mode, a) > threshold_value(&config.threshold, &arms[lead], &arms[a], t)
            });
            if stopped {
                return Ok(EpisodeRecord {
                    seed: config.seed,
                    stop_time: t,
                    recommended: lead,
                    correct: lead == best,
                    capped: false,
                });
            }
        }
        if t >= config.max_steps {
            let lead = crate::stats::leader(&arms);
            return Ok(EpisodeRecord {
                seed: config.seed,
                stop_time: t,
                recommended: lead,
                correct: false,
                capped: true,
            });
        }
        let arm = match config.sampler {
            SamplerKind::Uniform => next_arm_uniform(t, k),
            SamplerKind::Fixed => {
                tracker.next_arm(fixed_target.as_ref().unwrap(), &counts, t)
            }
            SamplerKind::Tas | SamplerKind::EvTas => {
                // plug-in oracle target; a tied or degenerate empirical
                // instance falls back to a uniform target for this round
                let target = empirical_target(&arms, config.sampler == SamplerKind::EvTas)
                    .unwrap_or_else(|| uniform_target.clone());
                tracker.next_arm(&target, &counts, t)
            }
            SamplerKind::EbTci | SamplerKind::EbEvtci => {
                let u = rng.next_f64();
                next_arm_toptwo(&arms, config.beta, u, mode)
                    .unwrap_or_else(|_| next_arm_uniform(t, k))
            }
            SamplerKind::Fhn2 => unreachable!(),
        };
        pull(arm, &mut arms, &mut counts, &mut rng);
        t += 1;
        observe(t, &arms);
    }
}

fn empirical_target(arms: &[ArmStats], variance_known: bool) -> Option<Vec<f64>> {
    let means: Vec<f64> = arms.iter().map(|s| s.mean()).collect();
    let vars: Vec<f64> = arms.iter().map(|s| s.variance()).collect();
    let inst = Instance::new(means, vars).ok()?;
    let alloc = if variance_known {
        optimal_allocation_known(&inst).ok()?
    } else {
        optimal_allocation_unknown(&inst).ok()?
    };
    Some(alloc.weights)
}

fn run_fhn2(config: &RunConfig, best: usize) -> Result<EpisodeRecord> {
    let inst = &config.instance;
    let k = inst.k();
    let mut rng = Rng::new(config.seed);
    let n0 = config.effective_n0();
    let mut st = Fhn2State::new(k, config.delta(), n0);
    let mut row = vec![0.0; k];
    let mut pulls: u64 = 0;
    loop {
        for a in st.active_arms() {
            row[a] = rng.next_gaussian(inst.mean(a), inst.variance(a));
            pulls += 1;
        }
        if let Fhn2Step::Stop(winner) = st.step(&row) {
            return Ok(EpisodeRecord {
                seed: config.seed,
                stop_time: pulls,
                recommended: winner,
                correct: winner == best,
                capped: false,
            });
        }
        if pulls >= config.max_steps {
            let active = st.active_arms();
            return Ok(EpisodeRecord {
                seed: config.seed,
                stop_time: pulls,
                recommended: active[0],
                correct: false,
                capped: true,
            });
        }
    }
}

/// Aggregate over a batch of episodes. Quantiles use the nearest-rank rule
/// on the sorted stopping times; capped runs count as errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub episodes: usize,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub error_rate: f64,
    pub n_capped: usize,
}

fn nearest_rank(sorted: &[u64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx] as f64
}

impl Aggregate {
    pub fn from_records(records: &[EpisodeRecord]) -> Self {
        let n = records.len();
        let mut times: Vec<u64> = records.iter().map(|r| r.stop_time).collect();
        times.sort_unstable();
        let errors = records.iter().filter(|r| !r.correct).count();
        Aggregate {
            episodes: n,
            mean: times.iter().sum::<u64>() as f64 / n as f64,
            median: nearest_rank(&times, 0.5),
            p10: nearest_rank(&times, 0.1),
            p90: nearest_rank(&times, 0.9),
            error_rate: errors as f64 / n as f64,
            n_capped: records.iter().filter(|r| r.capped).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub records: Vec<EpisodeRecord>,
    pub aggregate: Aggregate,
}

/// Runs `episodes` independent episodes with seeds `split_seed(seed, i)`.
/// `parallelism = 0` uses all cores; results are identical for any value.
pub fn run_batch(config: &RunConfig, episodes: usize, parallelism: usize) -> Result<BatchResult> {
    if episodes == 0 {
        return Err(Error::InvalidConfig("episodes must be >= 1".into()));
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let records: Result<Vec<EpisodeRecord>> = pool.install(|| {
        (0..episodes)
            .into_par_iter()
            .map(|i| {
                let mut cfg = config.clone();
                cfg.seed = split_seed(config.seed, i as u64);
                run_episode(&cfg)
            })
            .collect()
    });
    let records = records?;
    let aggregate = Aggregate::from_records(&records);
    Ok(BatchResult { records, aggregate })
}

/// Per-episode CSV: `seed,stop_time,recommended,correct,capped`.
pub fn episodes_to_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::from("seed,stop_time,recommended,correct,capped\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed, r.stop_time, r.recommended, r.correct, r.capped
        ));
    }
    out
}
