//! The diversity-maximising evolutionary algorithm.
//!
//! The population starts as `mu` copies of a known near-optimal seed and
//! evolves by mutate-and-replace: one uniformly chosen parent, one offspring,
//! accepted only when it keeps the quality gate `O(s) <= c_max` and strictly
//! raises the population entropy. Each step costs one fitness evaluation
//! whether or not the offspring survives.

use crate::diversity::{max_entropy, EntropyState};
use crate::model::{
    check_feasibility, evaluate_objective, quality_threshold, Instance, ModelError, Solution,
};
use crate::operators::{adapt_step, mutate, CandidateRooms, ConfigError, OperatorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EaError {
    #[error("instance '{0}' has no seed solution or objective; run the seeder first")]
    MissingSeed(String),
    #[error("stored seed objective {stored} does not match the recomputed {computed}")]
    SeedObjectiveMismatch { stored: u64, computed: u64 },
    #[error("seed solution violates {violations} room-day capacities")]
    InfeasibleSeed { violations: usize },
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("member {member} has objective {objective}, above the threshold {c_max}")]
    QualityGate {
        member: usize,
        objective: u64,
        c_max: u64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// The evolving population: `mu` solutions, their shared assignment counters,
/// and the quality threshold every member must respect.
#[derive(Debug, Clone)]
pub struct Population {
    members: Vec<Solution>,
    entropy: EntropyState,
    c_max: u64,
    evaluations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
}

impl Population {
    /// `mu` copies of the instance's seed solution. The stored seed objective
    /// is recomputed and must match; the seed must be capacity-feasible.
    pub fn initialize(
        instance: &Instance,
        mu: usize,
        alpha: f64,
        log_base: f64,
    ) -> Result<Population, EaError> {
        if mu == 0 {
            return Err(EaError::EmptyPopulation);
        }
        let (assignment, stored) = match (&instance.seed_solution, instance.seed_objective) {
            (Some(a), Some(o)) => (a.clone(), o),
            _ => return Err(EaError::MissingSeed(instance.name.clone())),
        };
        let report = check_feasibility(instance, &assignment)?;
        if !report.is_feasible() {
            return Err(EaError::InfeasibleSeed {
                violations: report.violations.len(),
            });
        }
        let computed = evaluate_objective(instance, &assignment)?.total;
        if computed != stored {
            return Err(EaError::SeedObjectiveMismatch { stored, computed });
        }
        let seed = Solution::evaluated(instance, assignment)?;
        let c_max = quality_threshold(stored, alpha)?;
        Ok(Self::from_members(vec![seed; mu], c_max, log_base)
            .expect("seed copies satisfy their own threshold"))
    }

    /// Wraps existing members (hand-built fixtures, reloaded files) with
    /// fresh counters. Every member must already satisfy the threshold.
    pub fn from_members(
        members: Vec<Solution>,
        c_max: u64,
        log_base: f64,
    ) -> Result<Population, EaError> {
        if members.is_empty() {
            return Err(EaError::EmptyPopulation);
        }
        for (i, member) in members.iter().enumerate() {
            if member.objective().total > c_max {
                return Err(EaError::QualityGate {
                    member: i,
                    objective: member.objective().total,
                    c_max,
                });
            }
        }
        let entropy = EntropyState::from_population(&members, log_base);
        Ok(Population {
            members,
            entropy,
            c_max,
            evaluations: 0,
        })
    }

    pub fn members(&self) -> &[Solution] {
        &self.members
    }

    pub fn mu(&self) -> usize {
        self.members.len()
    }

    pub fn c_max(&self) -> u64 {
        self.c_max
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn entropy_state(&self) -> &EntropyState {
        &self.entropy
    }

    /// Current population entropy (incrementally maintained).
    pub fn entropy(&self) -> f64 {
        self.entropy.cached()
    }

    /// One generation: mutate a uniform parent, gate on quality, accept on
    /// strictly higher entropy. Always costs one evaluation.
    pub fn step<R: Rng>(
        &mut self,
        instance: &Instance,
        config: &OperatorConfig,
        candidates: &CandidateRooms,
        rng: &mut R,
    ) -> StepOutcome {
        self.evaluations += 1;
        let parent_idx = rng.gen_range(0..self.members.len());
        let Some(offspring) = mutate(
            instance,
            &self.members[parent_idx],
            config,
            &self.entropy,
            candidates,
            rng,
        ) else {
            return StepOutcome::Rejected;
        };
        if offspring.objective().total > self.c_max {
            return StepOutcome::Rejected;
        }
        if self.entropy.replace_delta(&self.members[parent_idx], &offspring) <= self.entropy.cached()
        {
            return StepOutcome::Rejected;
        }
        self.entropy.commit_replace(&self.members[parent_idx], &offspring);
        self.members[parent_idx] = offspring;
        StepOutcome::Accepted
    }

    /// Cache-vs-recount and quality-gate integrity, asserted at sampled steps.
    fn debug_check(&self) {
        debug_assert!(
            (self.entropy.cached() - self.entropy.recompute()).abs() <= 1e-9,
            "entropy cache drifted from recount"
        );
        debug_assert!(
            self.members
                .iter()
                .all(|m| m.objective().total <= self.c_max),
            "a member slipped past the quality gate"
        );
    }
}

/// Run-level settings shared by every operator variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub mu: usize,
    pub alpha: f64,
    pub budget: u64,
    pub seed: u64,
    /// Trajectory is sampled every this many evaluations, plus first and last.
    pub sample_stride: u64,
    pub log_base: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mu: 50,
            alpha: 0.02,
            budget: 1_000_000,
            seed: 0,
            sample_stride: 1_000,
            log_base: 2.0,
        }
    }
}

/// Everything one run produces: the evolved population, the sampled entropy
/// trajectory, and enough of the configuration to reproduce it.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub operator: OperatorConfig,
    pub run: RunConfig,
    pub c_max: u64,
    pub h_max: f64,
    pub final_entropy: f64,
    /// (evaluations, entropy) samples; non-decreasing in the second column.
    pub trajectory: Vec<(u64, f64)>,
    /// Step size at each adaptation event; empty for non-adapting variants.
    pub adapted_steps: Vec<f64>,
    pub population: Population,
    /// Wall-clock duration; informational only, never serialized.
    pub elapsed: Duration,
}

/// Runs the EA to its evaluation budget. Deterministic given the seed: the
/// whole run draws from one counter-based generator.
pub fn run(
    instance: &Instance,
    operator: &OperatorConfig,
    run_config: &RunConfig,
) -> Result<RunRecord, EaError> {
    operator.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(run_config.seed);
    let mut population = Population::initialize(
        instance,
        run_config.mu,
        run_config.alpha,
        run_config.log_base,
    )?;
    let candidates = CandidateRooms::build(instance, operator.candidate_pool);
    let mut op_config = operator.clone();

    let stride = run_config.sample_stride.max(1);
    let mut trajectory = vec![(0, population.entropy())];
    let mut adapted_steps = Vec::new();
    let mut interval_baseline = population.entropy();

    while population.evaluations() < run_config.budget {
        population.step(instance, &op_config, &candidates, &mut rng);
        let evals = population.evaluations();
        if op_config.adapts() && evals % op_config.adapt_interval == 0 {
            let succeeded = population.entropy() > interval_baseline;
            adapt_step(&mut op_config, succeeded);
            adapted_steps.push(op_config.step_size);
            interval_baseline = population.entropy();
        }
        if evals % stride == 0 {
            trajectory.push((evals, population.entropy()));
        }
        if evals % 10_000 == 0 {
            population.debug_check();
        }
    }
    if trajectory.last().map(|&(e, _)| e) != Some(run_config.budget) {
        trajectory.push((run_config.budget, population.entropy()));
    }
    population.debug_check();

    Ok(RunRecord {
        operator: operator.clone(),
        run: *run_config,
        c_max: population.c_max(),
        h_max: max_entropy(
            instance.patient_days(),
            instance.num_rooms(),
            population.mu() as u32,
            run_config.log_base,
        ),
        final_entropy: population.entropy(),
        trajectory,
        adapted_steps,
        population,
        elapsed: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gender, GenderPolicy, Patient, Room};
    use crate::operators::MutationVariant;

    /// Two zero-cost rooms, `patients` one-day stays, seeded all into room 0.
    fn seeded_instance(patients: usize) -> Instance {
        Instance {
            name: "seeded".into(),
            horizon: 1,
            rooms: (0..2)
                .map(|id| Room {
                    id,
                    capacity: patients as u32,
                    gender_policy: GenderPolicy::Neutral,
                })
                .collect(),
            patients: (0..patients)
                .map(|id| Patient {
                    id,
                    gender: Gender::Female,
                    admission: 0,
                    discharge: 1,
                })
                .collect(),
            cv: vec![vec![0, 0]; patients],
            cg2: 0,
            ct: 0,
            seed_solution: Some(vec![vec![0]; patients]),
            seed_objective: Some(0),
            cost_breakdown: None,
        }
    }

    #[test]
    fn initialization_copies_the_seed_at_zero_entropy() {
        let instance = seeded_instance(3);
        let population = Population::initialize(&instance, 50, 0.02, 2.0).unwrap();
        assert_eq!(population.mu(), 50);
        assert_eq!(population.entropy(), 0.0);
        assert_eq!(population.c_max(), 0);
        assert!(population
            .members()
            .iter()
            .all(|m| m.assignment() == instance.seed_solution.as_deref().unwrap()));
    }

    #[test]
    fn initialization_requires_a_seed() {
        let mut instance = seeded_instance(2);
        instance.seed_solution = None;
        assert!(matches!(
            Population::initialize(&instance, 5, 0.02, 2.0),
            Err(EaError::MissingSeed(_))
        ));
    }

    #[test]
    fn initialization_rejects_a_wrong_seed_objective() {
        let mut instance = seeded_instance(2);
        instance.seed_objective = Some(3);
        assert!(matches!(
            Population::initialize(&instance, 5, 0.02, 2.0),
            Err(EaError::SeedObjectiveMismatch {
                stored: 3,
                computed: 0
            })
        ));
    }

    #[test]
    fn initialization_rejects_an_infeasible_seed() {
        let mut instance = seeded_instance(3);
        instance.rooms[0].capacity = 1;
        assert!(matches!(
            Population::initialize(&instance, 5, 0.02, 2.0),
            Err(EaError::InfeasibleSeed { violations: 1 })
        ));
    }

    #[test]
    fn members_above_the_threshold_are_refused() {
        let instance = {
            let mut i = seeded_instance(1);
            i.cv = vec![vec![4, 0]];
            i
        };
        let pricey = Solution::evaluated(&instance, vec![vec![0]]).unwrap();
        assert!(matches!(
            Population::from_members(vec![pricey], 3, 2.0),
            Err(EaError::QualityGate {
                member: 0,
                objective: 4,
                c_max: 3
            })
        ));
    }

    #[test]
    fn first_accepted_move_gains_one_bit() {
        // One patient, two free rooms, two identical members: the only
        // entropy-raising offspring moves the patient to the other room,
        // lifting H from 0 to 2 * h(1, 2) = 1 bit.
        let instance = seeded_instance(1);
        let mut population = Population::initialize(&instance, 2, 0.0, 2.0).unwrap();
        let mut config = OperatorConfig::for_variant(MutationVariant::Fixed);
        config.step_min = 1.0;
        config.step_size = 1.0;
        config.selection_pressure = 0.0;
        let candidates = CandidateRooms::build(&instance, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);

        let mut outcome = StepOutcome::Rejected;
        let mut steps = 0;
        while outcome == StepOutcome::Rejected {
            outcome = population.step(&instance, &config, &candidates, &mut rng);
            steps += 1;
            assert!(steps < 100, "no accepted step in 100 attempts");
        }
        assert_eq!(population.evaluations(), steps);
        assert!((population.entropy() - 1.0).abs() < 1e-12);

        // With both rooms now used once, no offspring can improve further.
        for _ in 0..50 {
            assert_eq!(
                population.step(&instance, &config, &candidates, &mut rng),
                StepOutcome::Rejected
            );
        }
    }

    #[test]
    fn quality_gate_rejects_expensive_offspring() {
        // Room 1 costs 5 over the threshold of 0, so every move is rejected
        // and the population never changes.
        let instance = {
            let mut i = seeded_instance(1);
            i.cv = vec![vec![0, 5]];
            i
        };
        let mut population = Population::initialize(&instance, 2, 0.0, 2.0).unwrap();
        let mut config = OperatorConfig::for_variant(MutationVariant::Fixed);
        config.step_min = 1.0;
        config.step_size = 1.0;
        config.selection_pressure = 0.0;
        let candidates = CandidateRooms::build(&instance, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            assert_eq!(
                population.step(&instance, &config, &candidates, &mut rng),
                StepOutcome::Rejected
            );
        }
        assert_eq!(population.entropy(), 0.0);
        assert_eq!(population.evaluations(), 200);
    }

    fn small_run_config(budget: u64, seed: u64) -> RunConfig {
        RunConfig {
            mu: 4,
            alpha: 0.0,
            budget,
            seed,
            sample_stride: 100,
            log_base: 2.0,
        }
    }

    #[test]
    fn zero_budget_records_the_initial_state() {
        let instance = seeded_instance(3);
        let operator = OperatorConfig::for_variant(MutationVariant::Fixed);
        let record = run(&instance, &operator, &small_run_config(0, 1)).unwrap();
        assert_eq!(record.trajectory, vec![(0, 0.0)]);
        assert_eq!(record.final_entropy, 0.0);
        assert_eq!(record.population.evaluations(), 0);
    }

    #[test]
    fn trajectories_never_decrease() {
        let instance = seeded_instance(4);
        let mut operator = OperatorConfig::for_variant(MutationVariant::Adaptive);
        operator.adapt_interval = 50;
        operator.step_min = 1.0;
        let record = run(&instance, &operator, &small_run_config(1_000, 7)).unwrap();
        assert!(record
            .trajectory
            .windows(2)
            .all(|w| w[1].1 >= w[0].1 && w[1].0 > w[0].0));
        assert_eq!(record.trajectory.last().unwrap().0, 1_000);
        assert!(!record.adapted_steps.is_empty());
        assert!(record.adapted_steps.iter().all(|&s| {
            s >= record.operator.step_min && s <= record.operator.step_max
        }));
        assert!(record.final_entropy > 0.0);
        assert!(record.final_entropy <= record.h_max + 1e-9);
    }

    #[test]
    fn identical_seeds_reproduce_the_run() {
        let instance = seeded_instance(5);
        let operator = OperatorConfig::for_variant(MutationVariant::Biased);
        let config = small_run_config(500, 99);
        let first = run(&instance, &operator, &config).unwrap();
        let second = run(&instance, &operator, &config).unwrap();
        assert_eq!(first.trajectory, second.trajectory);
        assert_eq!(first.final_entropy, second.final_entropy);
        for (a, b) in first
            .population
            .members()
            .iter()
            .zip(second.population.members())
        {
            assert_eq!(a.assignment(), b.assignment());
        }
    }

    #[test]
    fn swap_variant_runs_too() {
        let instance = seeded_instance(4);
        let operator = OperatorConfig::for_variant(MutationVariant::Swap);
        let record = run(&instance, &operator, &small_run_config(300, 3)).unwrap();
        assert!(record.adapted_steps.is_empty());
        assert_eq!(record.population.evaluations(), 300);
    }
}
