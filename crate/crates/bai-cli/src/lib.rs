//! Experiment drivers behind the `bai-lab` command line.
//!
//! A single JSON document configures every subcommand; command-line flags
//! override individual fields. All emitted numerics carry 17 significant
//! digits so CSV output re-parses to the exact doubles used in aggregates.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use bai_core::engine::{run_batch, Aggregate, RunConfig};
use bai_core::fmt_f64;
use bai_core::model::{dmax, Instance};
use bai_core::oracle::{lower_bound_samples, optimal_allocation_known, optimal_allocation_unknown};
use bai_core::rng::{split_seed, Rng};
use bai_core::samplers::SamplerKind;
use bai_core::stats::ArmStats;
use bai_core::thresholds::{threshold_value, Family, ThresholdSpec};
use bai_core::validation::{mc_kl_sum, mc_mean_tail, mc_variance_tails, McParams};

/// Where the experiment's instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    /// Instances given inline.
    Inline(Vec<Instance>),
    /// A JSON file holding one instance or an array of instances.
    File(String),
    /// The random-instance generator: `(mu_1, s2_1) = (0, 1)`, gaps
    /// `U[0.2, 1.0]`, variance ratios `U[0.1, 10]`.
    Random { count: usize, k: usize },
}

/// One JSON document configuring every subcommand; unset fields take
/// defaults in [`ExperimentConfig::normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instances: Option<InstanceSource>,
    pub samplers: Option<Vec<String>>,
    pub threshold_families: Option<Vec<String>>,
    pub deltas: Option<Vec<f64>>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub beta: Option<f64>,
    pub n0: Option<u64>,
    pub max_steps: Option<u64>,
    /// `thresholds` subcommand: largest trajectory time and grid size.
    pub t_max: Option<u64>,
    pub grid_points: Option<usize>,
    /// `validate` subcommand.
    pub trials: Option<u64>,
    pub horizon: Option<u64>,
    pub bounds: Option<Vec<String>>,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fills every unset field with its default; normalization is a fixed
    /// point of parse -> normalize -> serialize -> parse.
    pub fn normalize(mut self) -> Self {
        self.instances.get_or_insert(InstanceSource::Random { count: 20, k: 10 });
        self.samplers
            .get_or_insert_with(|| SamplerKind::all().iter().map(|s| s.name().to_string()).collect());
        self.threshold_families.get_or_insert_with(|| vec!["heuristic".into()]);
        self.deltas.get_or_insert_with(|| vec![0.01]);
        self.episodes.get_or_insert(100);
        self.seed.get_or_insert(0);
        self.parallelism.get_or_insert(0);
        self.beta.get_or_insert(0.5);
        self.max_steps.get_or_insert(1_000_000);
        self.t_max.get_or_insert(5000);
        self.grid_points.get_or_insert(50);
        self.trials.get_or_insert(10_000);
        self.horizon.get_or_insert(1000);
        self.bounds
            .get_or_insert_with(|| vec!["variance".into(), "mean".into(), "kl-sum".into()]);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    fn resolve_instances(&self) -> anyhow::Result<Vec<Instance>> {
        let seed = self.seed.unwrap_or(0);
        match self.instances.as_ref().expect("normalized config") {
            InstanceSource::Inline(list) => Ok(list.clone()),
            InstanceSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow::anyhow!("reading {path}: {e}"))?;
                parse_instances_json(&text)
            }
            InstanceSource::Random { count, k } => {
                Ok((0..*count).map(|i| random_instance(*k, split_seed(seed, i as u64))).collect())
            }
        }
    }

    fn sampler_kinds(&self) -> anyhow::Result<Vec<SamplerKind>> {
        self.samplers
            .as_ref()
            .expect("normalized config")
            .iter()
            .map(|s| Ok(SamplerKind::from_str(s)?))
            .collect()
    }

    fn families(&self) -> anyhow::Result<Vec<Family>> {
        self.threshold_families
            .as_ref()
            .expect("normalized config")
            .iter()
            .map(|s| Ok(Family::from_str(s)?))
            .collect()
    }
}

/// Parses a JSON document holding one instance or an array of instances,
/// with line diagnostics on failure.
pub fn parse_instances_json(text: &str) -> anyhow::Result<Vec<Instance>> {
    let as_array: Result<Vec<Instance>, _> = serde_json::from_str(text);
    match as_array {
        Ok(list) => Ok(list),
        Err(first) => match serde_json::from_str::<Instance>(text) {
            Ok(one) => Ok(vec![one]),
            Err(_) => Err(anyhow::anyhow!(
                "instance parse error at line {} column {}: {first}",
                first.line(),
                first.column()
            )),
        },
    }
}

/// Draws one random instance: `(mu_1, s2_1) = (0, 1)` and for `a != 1`
/// `mu_a = -U[0.2, 1.0]`, `s2_a = U[0.1, 10]`.
pub fn random_instance(k: usize, seed: u64) -> Instance {
    let mut rng = Rng::new(seed);
    let mut means = vec![0.0];
    let mut vars = vec![1.0];
    for _ in 1..k {
        means.push(-rng.next_range(0.2, 1.0));
        vars.push(rng.next_range(0.1, 10.0));
    }
    Instance::new(means, vars).expect("generator respects instance invariants")
}

/// Output of one subcommand: a CSV table and, for the run drivers, an
/// aggregate JSON document.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub csv: String,
    pub json: Option<String>,
}

fn join_weights(w: &[f64]) -> String {
    w.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

/// `oracle`: characteristic times, allocations, ratio and its bound, and
/// the sample-complexity lower bound at each delta.
pub fn cmd_oracle(config: &ExperimentConfig) -> anyhow::Result<CommandOutput> {
    let config = config.clone().normalize();
    let instances = config.resolve_instances()?;
    let deltas = config.deltas.as_ref().unwrap();
    let mut csv = String::from("instance,k,t_star,t_star_sigma2,ratio,dln_bound,weights_unknown,weights_known");
    for d in deltas {
        csv.push_str(&format!(",lower_bound_{d}"));
    }
    csv.push('\n');
    for (i, inst) in instances.iter().enumerate() {
        let unknown = optimal_allocation_unknown(inst)?;
        let known = optimal_allocation_known(inst)?;
        let d = dmax(inst)?;
        let bound = d / (1.0 + d).ln();
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{},{}",
            inst.k(),
            fmt_f64(unknown.char_time),
            fmt_f64(known.char_time),
            fmt_f64(unknown.char_time / known.char_time),
            fmt_f64(bound),
            join_weights(&unknown.weights),
            join_weights(&known.weights),
        ));
        for &delta in deltas {
            csv.push_str(&format!(",{}", fmt_f64(lower_bound_samples(inst, delta)?)));
        }
        csv.push('\n');
    }
    Ok(CommandOutput { csv, json: None })
}

/// The two-arm instance of the threshold simulations.
pub fn threshold_sim_instance() -> Instance {
    Instance::new(vec![0.0, -0.2], vec![1.0, 0.5]).unwrap()
}

/// `thresholds`: threshold values along a seed-fixed uniform two-arm stream,
/// rows `(family, t, delta, value)` on a log-spaced time grid.
pub fn cmd_thresholds(config: &ExperimentConfig) -> anyhow::Result<CommandOutput> {
    let config = config.clone().normalize();
    let inst = match config.instances.as_ref().unwrap() {
        InstanceSource::Inline(list) if list.len() == 1 && list[0].k() == 2 => list[0].clone(),
        _ => threshold_sim_instance(),
    };
    let t_max = *config.t_max.as_ref().unwrap();
    let points = *config.grid_points.as_ref().unwrap();
    let deltas = config.deltas.as_ref().unwrap();
    let seed = config.seed.unwrap();
    // log-spaced time grid
    let mut grid: Vec<u64> = (0..points)
        .map(|i| {
            let f = (i as f64 + 1.0) / points as f64;
            ((t_max as f64).powf(f).round() as u64).clamp(2, t_max)
        })
        .collect();
    grid.dedup();

    let families = [
        Family::Student,
        Family::Box,
        Family::Kl,
        Family::Bob,
        Family::EvStudent,
        Family::EvBox,
        Family::EvBob,
        Family::Heuristic,
    ];
    let mut specs = Vec::new();
    for &delta in deltas {
        for family in families {
            specs.push(ThresholdSpec::new(family, delta, 2)?);
        }
    }

    let mut rng = Rng::new(seed);
    let mut arms = [ArmStats::new(1.2), ArmStats::new(1.2)];
    let mut csv = String::from("family,t,delta,value\n");
    let mut next = 0usize;
    for t in 1..=t_max {
        let a = ((t - 1) % 2) as usize;
        arms[a].update(rng.next_gaussian(inst.mean(a), inst.variance(a)));
        if next < grid.len() && t == grid[next] {
            next += 1;
            for spec in &specs {
                let v = threshold_value(spec, &arms[0], &arms[1], t);
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    spec.family.name(),
                    t,
                    spec.delta,
                    if v.is_finite() { fmt_f64(v) } else { "inf".into() }
                ));
            }
        }
    }
    Ok(CommandOutput { csv, json: None })
}

/// `run`: batches over instances x samplers x (family, delta); per-episode
/// CSV plus keyed aggregate JSON. `sweep` is the same driver over the
/// random-instance source.
pub fn cmd_run(config: &ExperimentConfig) -> anyhow::Result<CommandOutput> {
    let config = config.clone().normalize();
    let instances = config.resolve_instances()?;
    let samplers = config.sampler_kinds()?;
    let families = config.families()?;
    let deltas = config.deltas.as_ref().unwrap();
    let episodes = *config.episodes.as_ref().unwrap();
    let parallelism = *config.parallelism.as_ref().unwrap();
    let seed = config.seed.unwrap();

    let mut csv =
        String::from("instance,sampler,family,delta,seed,stop_time,recommended,correct,capped\n");
    let mut aggregates: BTreeMap<String, Aggregate> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        for &sampler in &samplers {
            for &family in &families {
                for &delta in deltas {
                    let spec = ThresholdSpec::new(family, delta, inst.k())?;
                    let mut run = RunConfig::new(inst.clone(), sampler, spec);
                    run.beta = *config.beta.as_ref().unwrap();
                    run.n0 = config.n0;
                    run.max_steps = *config.max_steps.as_ref().unwrap();
                    run.seed = seed;
                    let batch = run_batch(&run, episodes, parallelism)?;
                    let key = format!("{i}/{}/{}/{delta}", sampler.name(), family.name());
                    for r in &batch.records {
                        csv.push_str(&format!(
                            "{i},{},{},{delta},{},{},{},{},{}\n",
                            sampler.name(),
                            family.name(),
                            r.seed,
                            r.stop_time,
                            r.recommended,
                            r.correct,
                            r.capped
                        ));
                    }
                    aggregates.insert(key, batch.aggregate);
                }
            }
        }
    }
    let json = serde_json::to_string_pretty(&aggregates)?;
    Ok(CommandOutput { csv, json: Some(json) })
}

/// `validate`: Monte Carlo coverage of the concentration bounds.
pub fn cmd_validate(config: &ExperimentConfig) -> anyhow::Result<CommandOutput> {
    let config = config.clone().normalize();
    let deltas = config.deltas.as_ref().unwrap();
    let bounds = config.bounds.as_ref().unwrap();
    let trials = *config.trials.as_ref().unwrap();
    let horizon = *config.horizon.as_ref().unwrap();
    let seed = config.seed.unwrap();
    let mut reports = Vec::new();
    for &delta in deltas {
        for b in bounds {
            let p = McParams::new(delta, trials, horizon, seed)?;
            match b.as_str() {
                "variance" => {
                    let (up, lo) = mc_variance_tails(&p, 1.0)?;
                    reports.push(up);
                    reports.push(lo);
                }
                "mean" => reports.push(mc_mean_tail(&p, 0.0, 1.0)?),
                "kl-sum" => reports.push(mc_kl_sum(&p, [(0.0, 1.0), (-0.2, 0.5)])?),
                other => anyhow::bail!("unknown bound '{other}'"),
            }
        }
    }
    let mut csv = String::from("bound,delta,trials,horizon,violations,rate,wilson_lo,wilson_hi\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.bound,
            r.delta_target,
            r.trials,
            r.horizon,
            r.violations,
            fmt_f64(r.rate),
            fmt_f64(r.wilson_lo),
            fmt_f64(r.wilson_hi)
        ));
    }
    Ok(CommandOutput { csv, json: None })
}

/// `random-instances`: emit the generator's instances as JSON.
pub fn cmd_random_instances(config: &ExperimentConfig) -> anyhow::Result<CommandOutput> {
    let config = config.clone().normalize();
    let instances = config.resolve_instances()?;
    let json = serde_json::to_string_pretty(&instances)?;
    Ok(CommandOutput {
        csv: String::new(),
        json: Some(json),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_normalize_is_fixed_point() {
        let cfg = ExperimentConfig::from_json("{}").unwrap().normalize();
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap().normalize();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn config_rejects_unknown_fields() {
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn random_instances_respect_generator_spec() {
        for i in 0..50 {
            let inst = random_instance(10, split_seed(9, i));
            assert_eq!(inst.k(), 10);
            assert_eq!(inst.mean(0), 0.0);
            assert_eq!(inst.variance(0), 1.0);
            for a in 1..10 {
                assert!(inst.mean(a) <= -0.2 && inst.mean(a) >= -1.0);
                assert!(inst.variance(a) >= 0.1 && inst.variance(a) <= 10.0);
            }
        }
    }

    #[test]
    fn oracle_csv_round_trips_at_full_precision() {
        let cfg = ExperimentConfig {
            instances: Some(InstanceSource::Inline(vec![Instance::new(
                vec![0.0, -0.4],
                vec![1.0, 2.0],
            )
            .unwrap()])),
            deltas: Some(vec![0.1, 0.01]),
            ..Default::default()
        };
        let out = cmd_oracle(&cfg).unwrap();
        let mut lines = out.csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("instance,k,t_star,t_star_sigma2,ratio,dln_bound"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        let t_star: f64 = row[2].parse().unwrap();
        let t_known: f64 = row[3].parse().unwrap();
        let ratio: f64 = row[4].parse().unwrap();
        assert_eq!(ratio, t_star / t_known, "ratio must re-parse bit-exactly");
        let w: Vec<f64> = row[6].split(';').map(|x| x.parse().unwrap()).collect();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oracle_errors_on_tied_instance() {
        let cfg = ExperimentConfig {
            instances: Some(InstanceSource::Inline(vec![Instance::new(
                vec![0.5, 0.5],
                vec![1.0, 1.0],
            )
            .unwrap()])),
            ..Default::default()
        };
        assert!(cmd_oracle(&cfg).is_err());
    }

    #[test]
    fn thresholds_deterministic_given_seed() {
        let cfg = ExperimentConfig {
            t_max: Some(300),
            grid_points: Some(8),
            deltas: Some(vec![0.05]),
            seed: Some(123),
            ..Default::default()
        };
        let a = cmd_thresholds(&cfg).unwrap();
        let b = cmd_thresholds(&cfg).unwrap();
        assert_eq!(a.csv, b.csv);
        assert!(a.csv.lines().count() > 8 * 8 / 2);
    }

    #[test]
    fn run_smoke_and_aggregate_json() {
        let cfg = ExperimentConfig {
            instances: Some(InstanceSource::Inline(vec![Instance::new(
                vec![0.0, -3.0],
                vec![0.05, 0.05],
            )
            .unwrap()])),
            samplers: Some(vec!["uniform".into(), "eb-tci".into()]),
            deltas: Some(vec![0.2]),
            episodes: Some(5),
            seed: Some(77),
            ..Default::default()
        };
        let out = cmd_run(&cfg).unwrap();
        assert_eq!(out.csv.lines().count(), 1 + 2 * 5);
        let json: BTreeMap<String, Aggregate> =
            serde_json::from_str(out.json.as_ref().unwrap()).unwrap();
        assert_eq!(json.len(), 2);
        for agg in json.values() {
            assert_eq!(agg.error_rate, 0.0);
            assert_eq!(agg.n_capped, 0);
        }
    }

    #[test]
    fn validate_csv_shape() {
        let cfg = ExperimentConfig {
            deltas: Some(vec![0.2]),
            trials: Some(50),
            horizon: Some(50),
            bounds: Some(vec!["mean".into()]),
            seed: Some(5),
            ..Default::default()
        };
        let out = cmd_validate(&cfg).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], "bound,delta,trials,horizon,violations,rate,wilson_lo,wilson_hi");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("mean,0.2,50,50,"));
    }

    #[test]
    fn instance_file_parse_diagnostics() {
        let err = parse_instances_json("{\"means\": [0, 1],\n\"variances\": [1]}").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
