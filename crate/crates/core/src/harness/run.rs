//! Seeded single runs and replicate fan-out.

use std::path::Path;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::AdversaryDecision;
use crate::diagnostics::{bellman_errors, check_admissible, AdmissibilityViolation};
use crate::env::{sample_step, EpisodicModel, Transition};
use crate::estimators::{count_corrupted_global, count_corrupted_sub, CorruptionLog};
use crate::learners::Learner;
use crate::oracle::{evaluate_announced, optimal_values, AnnouncedPolicy, OptimalSolution};
use crate::{Error, Result, SimRng};

use super::config::{build_adversary, build_environment, build_learner, ExperimentConfig};
use super::csv::emit_csv;

const TAG_ENV: u64 = 0;
const TAG_LEARNER: u64 = 1;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(master seed, replicate, episode, purpose)`.
pub fn stream_rng(seed: u64, replicate: usize, episode: usize, tag: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(splitmix(seed ^ splitmix(replicate as u64)));
    rng.set_stream((episode as u64) * 16 + tag);
    rng
}

/// One row of the regret series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RegretRecord {
    pub k: usize,
    pub c_k: u8,
    pub benchmark_value: f64,
    pub nominal_value: f64,
    pub inst_regret: f64,
    pub cum_regret_nominal: f64,
    pub cum_regret_eq2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupervisorDiagnostics {
    pub ell: usize,
    pub admissible: bool,
    pub violations: usize,
    pub first_violation: Option<AdmissibilityViolation>,
    pub bellman_upper_max_abs: f64,
    pub bellman_lower_max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsBlock {
    pub episode: usize,
    pub supervisors: Vec<SupervisorDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateLog {
    pub replicate: usize,
    pub learner: String,
    pub episodes: usize,
    pub optimal_value: f64,
    pub budget: usize,
    pub corrupted_episodes: usize,
    pub corrupted_stages_global: usize,
    /// `[ℓ-1]`, empty for learners without a schedule.
    pub corrupted_stages_by_learner: Vec<usize>,
    /// Episodes in which some supervisor was not admissible for the nominal MDP.
    pub admissibility_failures: usize,
    pub cum_regret_nominal: f64,
    pub cum_regret_eq2: f64,
    pub diagnostics: Vec<DiagnosticsBlock>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RegretRecord>,
    pub corruption: CorruptionLog,
    pub log: ReplicateLog,
}

/// Read-only view of one finished episode, handed to observers.
pub struct EpisodeView<'a> {
    pub k: usize,
    pub learner: &'a dyn Learner,
    pub announced: &'a AnnouncedPolicy,
    pub decision: &'a AdversaryDecision,
    pub solution: &'a OptimalSolution,
    pub trajectory: &'a [Transition],
}

fn diagnose(learner: &dyn Learner, solution: &OptimalSolution, model: &dyn EpisodicModel, k: usize) -> Result<DiagnosticsBlock> {
    let mut supervisors = Vec::new();
    for sup in learner.supervisors() {
        let rep = check_admissible(sup, solution)?;
        let errs = bellman_errors(sup, model)?;
        let fold = |t: &Vec<Vec<Vec<f64>>>| t.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        supervisors.push(SupervisorDiagnostics {
            ell: sup.ell,
            admissible: rep.admissible,
            violations: rep.violations.len(),
            first_violation: rep.violations.first().cloned(),
            bellman_upper_max_abs: fold(&errs.upper),
            bellman_lower_max_abs: fold(&errs.lower),
        });
    }
    Ok(DiagnosticsBlock { episode: k, supervisors })
}

/// Runs replicate `replicate` of `config`, calling `observer` after each
/// rollout (before the learner observes the trajectory).
pub fn run_replicate_with<F>(config: &ExperimentConfig, replicate: usize, mut observer: F) -> Result<RunOutput>
where
    F: FnMut(&EpisodeView<'_>) -> Result<()>,
{
    config.validate()?;
    let env = build_environment(&config.environment)?;
    let nominal = env.tabular.clone();
    let solution = optimal_values(nominal.as_ref());
    let mut learner = build_learner(config, &env, &solution)?;
    let mut adversary = build_adversary(&config.adversary, nominal.clone())?;
    let horizon = nominal.horizon;

    let mut records = Vec::with_capacity(config.episodes);
    let mut corruption = CorruptionLog::default();
    let mut history: Vec<Vec<Transition>> = Vec::new();
    let mut diagnostics = Vec::new();
    let mut admissibility_failures = 0;
    let (mut cum_nominal, mut cum_eq2) = (0.0, 0.0);
    let mut corrupted_episodes = 0;

    for k in 0..config.episodes {
        let announced = learner.announce()?;
        let decision = adversary.decide(k, &history, &announced)?;
        let fingerprint = decision.fingerprint();

        let nominal_value = evaluate_announced(nominal.as_ref(), &announced);
        let inst_regret = solution.value - nominal_value;
        let (benchmark_value, episode_value) = if decision.corrupt {
            let bench = optimal_values(&decision.episode_mdp).value;
            (bench, evaluate_announced(&decision.episode_mdp, &announced))
        } else {
            (solution.value, nominal_value)
        };
        cum_nominal += inst_regret;
        cum_eq2 += benchmark_value - episode_value;

        let block = diagnose(learner.as_ref(), &solution, nominal.as_ref(), k)?;
        if block.supervisors.iter().any(|s| !s.admissible) {
            admissibility_failures += 1;
        }
        if config.diagnostics_every > 0 && k % config.diagnostics_every == 0 {
            diagnostics.push(block);
        }

        let mut env_rng = stream_rng(config.seed, replicate, k, TAG_ENV);
        let mut learner_rng = stream_rng(config.seed, replicate, k, TAG_LEARNER);
        let model = &decision.episode_mdp;
        let mut x = crate::env::sample_categorical(model.initial_dist(), &mut env_rng);
        let mut trajectory = Vec::with_capacity(horizon);
        let mut corrupted_stages = 0;
        for h in 0..horizon {
            let a = learner.act(h, x, &mut learner_rng);
            if a >= nominal.num_actions {
                return Err(Error::LearnerInvariant { episode: k, message: format!("action {a} out of range") });
            }
            if decision.stage_corrupted(&nominal, h, x, a) {
                corrupted_stages += 1;
            }
            let (reward, next_state) = sample_step(model, h, x, a, &mut env_rng);
            trajectory.push(Transition { state: x, action: a, reward, next_state, stage: h, episode: k });
            x = next_state;
        }
        if decision.fingerprint() != fingerprint {
            return Err(Error::LearnerInvariant { episode: k, message: "episode model changed during rollout".into() });
        }
        observer(&EpisodeView {
            k,
            learner: learner.as_ref(),
            announced: &announced,
            decision: &decision,
            solution: &solution,
            trajectory: &trajectory,
        })?;
        learner.observe(&trajectory)?;
        corruption.push(corrupted_stages, learner.charged_learner());
        corrupted_episodes += decision.corrupt as usize;

        records.push(RegretRecord {
            k,
            c_k: decision.corrupt as u8,
            benchmark_value,
            nominal_value,
            inst_regret,
            cum_regret_nominal: cum_nominal,
            cum_regret_eq2: cum_eq2,
        });
        history.push(trajectory);
    }

    let max_ell = corruption.episodes.iter().filter_map(|e| e.charged).max().unwrap_or(0);
    let by_learner = (1..=max_ell).map(|ell| count_corrupted_sub(&corruption, ell)).collect();
    log::debug!(
        "replicate {replicate}: {} episodes, cumulative nominal regret {cum_nominal:.3}",
        config.episodes
    );
    let log = ReplicateLog {
        replicate,
        learner: learner.name().to_string(),
        episodes: config.episodes,
        optimal_value: solution.value,
        budget: config.adversary.budget,
        corrupted_episodes,
        corrupted_stages_global: count_corrupted_global(&corruption),
        corrupted_stages_by_learner: by_learner,
        admissibility_failures,
        cum_regret_nominal: cum_nominal,
        cum_regret_eq2: cum_eq2,
        diagnostics,
    };
    Ok(RunOutput { records, corruption, log })
}

pub fn run_replicate(config: &ExperimentConfig, replicate: usize) -> Result<RunOutput> {
    run_replicate_with(config, replicate, |_| Ok(()))
}

#[derive(Serialize)]
struct RunLogFile<'a> {
    config: ExperimentConfig,
    replicates: Vec<&'a ReplicateLog>,
}

/// Writes `replicate_NNN.csv` per replicate and `run_log.json` into `dir`.
/// The logged config omits `output_dir` so artifacts do not depend on where
/// they were written.
pub fn write_artifacts(dir: &Path, config: &ExperimentConfig, outputs: &[RunOutput]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for out in outputs {
        emit_csv(&out.records, &dir.join(format!("replicate_{:03}.csv", out.log.replicate)))?;
    }
    let config = ExperimentConfig { output_dir: None, ..config.clone() };
    let file = RunLogFile { config, replicates: outputs.iter().map(|o| &o.log).collect() };
    std::fs::write(dir.join("run_log.json"), serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Runs every replicate (in parallel) and writes artifacts when
/// `output_dir` is set. Outputs are ordered by replicate.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    config.validate()?;
    let outputs: Vec<RunOutput> =
        (0..config.replicates).into_par_iter().map(|r| run_replicate(config, r)).collect::<Result<_>>()?;
    if let Some(dir) = &config.output_dir {
        write_artifacts(dir, config, &outputs)?;
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn zero_episodes_empty_series() {
        let c = cfg(r#"{"environment": {"kind": "combination_lock", "num_actions": 2, "horizon": 3},
            "learner": {"name": "ucbvi"}, "episodes": 0, "delta": 0.1}"#);
        let out = run_replicate(&c, 0).unwrap();
        assert!(out.records.is_empty());
    }

    #[test]
    fn fixed_optimal_has_no_regret() {
        let c = cfg(r#"{"environment": {"kind": "random_tabular", "num_states": 4, "num_actions": 3, "horizon": 3, "seed": 2},
            "learner": {"name": "fixed_optimal"}, "episodes": 50, "delta": 0.1}"#);
        let out = run_replicate(&c, 0).unwrap();
        assert!(out.records.last().unwrap().cum_regret_nominal.abs() < 1e-9);
    }

    #[test]
    fn streams_differ_by_tag_and_episode() {
        use rand::Rng;
        let a: u64 = stream_rng(1, 0, 0, TAG_ENV).random();
        let b: u64 = stream_rng(1, 0, 0, TAG_LEARNER).random();
        let c: u64 = stream_rng(1, 0, 1, TAG_ENV).random();
        let d: u64 = stream_rng(1, 1, 0, TAG_ENV).random();
        let again: u64 = stream_rng(1, 0, 0, TAG_ENV).random();
        assert_eq!(a, again);
        assert!(a != b && a != c && a != d);
    }

    #[test]
    fn records_are_consistent() {
        let c = cfg(r#"{"environment": {"kind": "combination_lock", "num_actions": 3, "horizon": 3},
            "adversary": {"attack": "lock_decoy", "budget": 7},
            "learner": {"name": "supervised_c"}, "episodes": 40, "delta": 0.1}"#);
        let out = run_replicate(&c, 0).unwrap();
        let mut cn = 0.0;
        let mut spent = 0;
        for r in &out.records {
            cn += r.inst_regret;
            spent += r.c_k as usize;
            assert!((r.cum_regret_nominal - cn).abs() < 1e-9);
            assert!(r.cum_regret_eq2 <= r.cum_regret_nominal + (spent * 3) as f64 + 1e-9);
        }
        assert_eq!(spent, 7);
        assert!(count_corrupted_global(&out.corruption) <= 7 * 3);
    }
}
