//! Reproducible parallel simulation of `Z_0 = 0`,
//! `Z_{n+1} = sum_{j=1}^{Z_n + I_n} X_{nj}`.
//!
//! Replication `r` draws generation `g` from the stream cell
//! `(seed, domain, r, g)`, and results are collected in replication order,
//! so outputs do not depend on the number of worker threads.

pub mod rng;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{BpveiModel, LawTable};
use crate::error::{Error, Result};
use crate::laws::LawInstance;

pub use stats::{ks_critical_1pct, ks_two_sample, EmpiricalDistribution};

/// Populations above this many individuals mark a trajectory as exploded.
pub const DEFAULT_OVERFLOW_GUARD: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Direct,
    Decomposition,
}

/// How offspring totals are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// One draw per individual.
    Individual,
    /// One draw of the law of the sum (binomial, negative binomial, ...).
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: u64,
    pub reps: u64,
    pub seed: u64,
    /// Checkpoints; empty means every generation `1..=horizon`.
    #[serde(default)]
    pub record: Vec<u64>,
    pub engine: Engine,
    pub sampler: Sampler,
    pub overflow_guard: u64,
}

impl SimConfig {
    pub fn new(horizon: u64, reps: u64, seed: u64) -> Self {
        SimConfig {
            horizon,
            reps,
            seed,
            record: Vec::new(),
            engine: Engine::Direct,
            sampler: Sampler::Aggregate,
            overflow_guard: DEFAULT_OVERFLOW_GUARD,
        }
    }

    pub fn with_record(mut self, record: Vec<u64>) -> Self {
        self.record = record;
        self
    }

    pub fn checkpoints(&self) -> Vec<u64> {
        if self.record.is_empty() {
            (1..=self.horizon).collect()
        } else {
            self.record.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if let Some(n) = self.record.iter().find(|n| **n > self.horizon) {
            return Err(Error::Config(format!(
                "checkpoint {n} beyond horizon {}",
                self.horizon
            )));
        }
        if self.overflow_guard == 0 {
            return Err(Error::Config("overflow guard must be positive".into()));
        }
        Ok(())
    }
}

/// `Z_0..=Z_N` of one replication. After an explosion the remaining
/// entries repeat the first value above the guard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub z: Vec<u64>,
    pub exploded: bool,
}

fn offspring_total<R: rand::Rng + ?Sized>(
    law: &LawInstance,
    count: u64,
    sampler: Sampler,
    rng: &mut R,
) -> u64 {
    match sampler {
        Sampler::Individual => law.sample_sum_individual(count, rng),
        Sampler::Aggregate => law.sample_sum(count, rng),
    }
}

/// One trajectory of the recursion, drawn from the streams of replication
/// `rep`.
pub fn simulate_trajectory(
    table: &LawTable,
    horizon: u64,
    seed: u64,
    rep: u64,
    sampler: Sampler,
    guard: u64,
) -> Trajectory {
    let mut z = Vec::with_capacity(horizon as usize + 1);
    z.push(0u64);
    let mut cur = 0u64;
    let mut exploded = false;
    for g in 0..horizon {
        if !exploded {
            let mut rng = rng::stream(seed, rng::DOMAIN_DIRECT, rep, g);
            let imm = table.immigration(g).sample(&mut rng);
            let parents = cur.saturating_add(imm);
            cur = offspring_total(table.offspring(g), parents, sampler, &mut rng);
            if cur > guard {
                exploded = true;
            }
        }
        z.push(cur);
    }
    Trajectory { z, exploded }
}

/// `Z_n` as the sum over cohorts `j < n`: `I_j` immigrants founding a
/// process in the environment `f_j, f_{j+1}, ...`, observed after `n - j`
/// generations.
pub fn decomposition_value(
    table: &LawTable,
    n: u64,
    seed: u64,
    rep: u64,
    sampler: Sampler,
    guard: u64,
) -> (u64, bool) {
    let mut total = 0u64;
    for j in 0..n {
        let domain = rng::DOMAIN_COHORT + j;
        let mut rng = rng::stream(seed, domain, rep, 0);
        let mut y = table.immigration(j).sample(&mut rng);
        for g in j..n {
            if y == 0 {
                break;
            }
            let mut rng = rng::stream(seed, domain, rep, g - j + 1);
            y = offspring_total(table.offspring(g), y, sampler, &mut rng);
            if y > guard {
                return (y, true);
            }
        }
        total = total.saturating_add(y);
        if total > guard {
            return (total, true);
        }
    }
    (total, false)
}

/// Per-checkpoint survival estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalPoint {
    pub n: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub reps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub points: Vec<SurvivalPoint>,
    /// Exploded trajectories; they count as alive.
    pub exploded: u64,
}

fn binomial_point(n: u64, alive: u64, reps: u64) -> SurvivalPoint {
    let p = alive as f64 / reps as f64;
    SurvivalPoint {
        n,
        estimate: p,
        stderr: (p * (1.0 - p) / reps as f64).sqrt(),
        reps,
    }
}

/// Checkpoints, per-replication values at them, and explosion flags.
type CheckpointValues = (Vec<u64>, Vec<Vec<u64>>, Vec<bool>);

/// Values of `Z_n` at the checkpoints for every replication, in replication
/// order, plus explosion flags.
fn checkpoint_values(model: &BpveiModel, config: &SimConfig) -> Result<CheckpointValues> {
    config.validate()?;
    let checkpoints = config.checkpoints();
    let table = model.table(config.horizon.max(1));
    let rows: Vec<(Vec<u64>, bool)> = (0..config.reps)
        .into_par_iter()
        .map(|rep| match config.engine {
            Engine::Direct => {
                let t = simulate_trajectory(
                    &table,
                    config.horizon,
                    config.seed,
                    rep,
                    config.sampler,
                    config.overflow_guard,
                );
                (
                    checkpoints.iter().map(|n| t.z[*n as usize]).collect(),
                    t.exploded,
                )
            }
            Engine::Decomposition => {
                let mut any = false;
                let vals = checkpoints
                    .iter()
                    .map(|n| {
                        let (v, e) = decomposition_value(
                            &table,
                            *n,
                            config.seed,
                            rep,
                            config.sampler,
                            config.overflow_guard,
                        );
                        any |= e;
                        v
                    })
                    .collect();
                (vals, any)
            }
        })
        .collect();
    let exploded = rows.iter().map(|r| r.1).collect();
    let values = rows.into_iter().map(|r| r.0).collect();
    Ok((checkpoints, values, exploded))
}

pub fn survival_curve(model: &BpveiModel, config: &SimConfig) -> Result<SurvivalCurve> {
    let (checkpoints, values, exploded) = checkpoint_values(model, config)?;
    let points = checkpoints
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let alive = values.iter().filter(|row| row[i] > 0).count() as u64;
            binomial_point(*n, alive, config.reps)
        })
        .collect();
    Ok(SurvivalCurve {
        points,
        exploded: exploded.iter().filter(|e| **e).count() as u64,
    })
}

/// Samples of `Z_n` at each checkpoint.
pub fn checkpoint_samples(
    model: &BpveiModel,
    config: &SimConfig,
) -> Result<Vec<EmpiricalDistribution>> {
    let (checkpoints, values, exploded) = checkpoint_values(model, config)?;
    let n_exploded = exploded.iter().filter(|e| **e).count() as u64;
    Ok(checkpoints
        .iter()
        .enumerate()
        .map(|(i, n)| {
            EmpiricalDistribution::from_counts(
                *n,
                config.seed,
                values.iter().map(|row| row[i]).collect(),
                n_exploded,
            )
        })
        .collect())
}

/// `R` independent draws of `Z_n` by direct simulation.
pub fn endpoint_sample(
    model: &BpveiModel,
    n: u64,
    reps: u64,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    let config = SimConfig::new(n, reps, seed).with_record(vec![n]);
    Ok(checkpoint_samples(model, &config)?.remove(0))
}

/// `R` independent draws of `Z_n` through the cohort decomposition.
pub fn decomposition_sample(
    model: &BpveiModel,
    n: u64,
    reps: u64,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    let mut config = SimConfig::new(n, reps, seed).with_record(vec![n]);
    config.engine = Engine::Decomposition;
    Ok(checkpoint_samples(model, &config)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::preset;
    use crate::exact::{propagate, DEFAULT_TAIL_TOL};
    use crate::pgf::PgfEngine;

    #[test]
    fn deterministic_chain_trajectories() {
        let m = preset("deterministic_chain", None).unwrap();
        let t = m.table(10);
        for sampler in [Sampler::Individual, Sampler::Aggregate] {
            let tr = simulate_trajectory(&t, 10, 1, 0, sampler, DEFAULT_OVERFLOW_GUARD);
            assert_eq!(tr.z, (0..=10).collect::<Vec<u64>>());
        }
        let s = endpoint_sample(&m, 7, 50, 3).unwrap();
        assert!(s.values().iter().all(|v| *v == 7.0));
        let d = decomposition_sample(&m, 5, 50, 3).unwrap();
        assert!(d.values().iter().all(|v| *v == 5.0));
        let c = survival_curve(&m, &SimConfig::new(20, 30, 9)).unwrap();
        assert!(c.points.iter().all(|p| p.estimate == 1.0));
    }

    #[test]
    fn example_b_steps_are_bounded() {
        let m = preset("example_b", None).unwrap();
        let t = m.table(50);
        for rep in 0..200 {
            let tr =
                simulate_trajectory(&t, 50, 5, rep, Sampler::Aggregate, DEFAULT_OVERFLOW_GUARD);
            assert!(tr.z.windows(2).all(|w| w[1] <= w[0] + 1));
        }
    }

    #[test]
    fn example_b_pmf_matches_oracle() {
        let m = preset("example_b", None).unwrap();
        let reps = 100_000u64;
        for n in [2u64, 3] {
            let exact = propagate(&m, n, 16, DEFAULT_TAIL_TOL).unwrap();
            let s = endpoint_sample(&m, n, reps, 21).unwrap();
            for (k, p) in exact.probs.iter().enumerate() {
                let freq = s.frequency(k as u64);
                let se = (p * (1.0 - p) / reps as f64).sqrt();
                assert!(
                    (freq - p).abs() <= 4.0 * se + 1e-12,
                    "n={n} k={k} {freq} {p}"
                );
            }
        }
    }

    #[test]
    fn first_cohort_matches_oracle() {
        let m = preset("critical_geo_pois", None).unwrap();
        let reps = 50_000u64;
        let exact = propagate(&m, 1, 64, DEFAULT_TAIL_TOL).unwrap();
        let s = decomposition_sample(&m, 1, reps, 4).unwrap();
        for k in 0..6 {
            let p = exact.probs[k];
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((s.frequency(k as u64) - p).abs() <= 4.0 * se, "k={k}");
        }
    }

    #[test]
    fn critical_mean_at_200() {
        let m = preset("critical_geo_pois", None).unwrap();
        let s = endpoint_sample(&m, 200, 10_000, 8).unwrap();
        let table = crate::analysis::MomentTable::build(&m, 200);
        let (mean, var) = (table.expected(200), table.variance(200));
        assert!((s.mean() - mean).abs() <= 4.0 * (var / 10_000.0).sqrt());
    }

    #[test]
    fn survival_matches_pgf() {
        let m = preset("example_c", None).unwrap();
        let e = PgfEngine::new(&m, 40);
        let c = survival_curve(
            &m,
            &SimConfig::new(40, 4000, 2).with_record(vec![1, 5, 20, 40]),
        )
        .unwrap();
        for p in &c.points {
            let exact = e.survival(p.n).unwrap();
            let se = (exact * (1.0 - exact) / p.reps as f64).sqrt();
            assert!((p.estimate - exact).abs() <= 4.0 * se, "n={}", p.n);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let m = preset("critical_geo_pois", None).unwrap();
        let cfg = SimConfig::new(30, 300, 77).with_record(vec![10, 30]);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| checkpoint_samples(&m, &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn explosion_is_flagged() {
        let m = crate::environment::BpveiModel::new(
            "super",
            crate::environment::GenerationSchedule::homogeneous(crate::laws::LawSpec::poisson(3.0)),
            crate::environment::GenerationSchedule::homogeneous(crate::laws::LawSpec::poisson(1.0)),
            false,
        )
        .unwrap();
        let mut cfg = SimConfig::new(40, 20, 1);
        cfg.overflow_guard = 1_000_000;
        let c = survival_curve(&m, &cfg).unwrap();
        assert_eq!(c.exploded, 20);
        assert_eq!(c.points.last().unwrap().estimate, 1.0);
    }

    #[test]
    fn invalid_config() {
        let m = preset("example_b", None).unwrap();
        assert!(survival_curve(&m, &SimConfig::new(10, 0, 1)).is_err());
        assert!(survival_curve(&m, &SimConfig::new(10, 5, 1).with_record(vec![11])).is_err());
    }
}
