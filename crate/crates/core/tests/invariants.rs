//! Property tests for the invariants the library promises regardless of
//! input: entropy bounds and cache fidelity, step-size clamping, quality
//! threshold monotonicity, and generator/serialization round-trips.

use pas_diversity::diversity::{h, max_entropy, EntropyState};
use pas_diversity::instances::{generate, instance_to_string, parse_instance, validate, GeneratorSpec};
use pas_diversity::model::{quality_threshold, Solution};
use pas_diversity::operators::{adapt_step, MutationVariant, OperatorConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best achievable entropy for one patient-day, found by trying every way of
/// splitting `mu` members over `rooms` rooms.
fn best_split(remaining: u32, rooms: usize, mu: u32, log_base: f64) -> f64 {
    if rooms == 1 {
        return h(remaining, mu, log_base);
    }
    (0..=remaining)
        .map(|x| h(x, mu, log_base) + best_split(remaining - x, rooms - 1, mu, log_base))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn small_spec(patients: usize, rooms: usize, beds: u32, days: usize, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        patients,
        rooms,
        total_beds: beds,
        days,
        mean_los: 1.0 + days as f64 / 4.0,
        seed,
        ..Default::default()
    }
}

proptest! {
    #[test]
    fn entropy_term_stays_within_bounds(mu in 1u32..300, x in 0u32..300, base in 1.5f64..12.0) {
        prop_assume!(x <= mu);
        let value = h(x, mu, base);
        prop_assert!(value >= 0.0);
        // -f ln f peaks at 1/e nats.
        prop_assert!(value <= 1.0 / (std::f64::consts::E * base.ln()) + 1e-12);
        prop_assert_eq!(h(0, mu, base), 0.0);
        prop_assert_eq!(h(mu, mu, base), 0.0);
    }

    #[test]
    fn pigeonhole_bound_matches_exhaustive_split(
        mu in 1u32..=6,
        rooms in 1usize..=6,
        w in 1u64..=3,
        base in prop::sample::select(vec![2.0, std::f64::consts::E, 10.0]),
    ) {
        let expected = w as f64 * best_split(mu, rooms, mu, base);
        prop_assert!((max_entropy(w, rooms, mu, base) - expected).abs() < 1e-9);
    }

    #[test]
    fn threshold_is_monotone_and_never_cuts_the_seed(
        seed_objective in 0u64..1_000_000_000,
        lo in 0.0f64..=1.0,
        hi in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let at_lo = quality_threshold(seed_objective, lo).unwrap();
        let at_hi = quality_threshold(seed_objective, hi).unwrap();
        prop_assert!(at_lo >= seed_objective);
        prop_assert!(at_lo <= at_hi);
        prop_assert!(at_hi as f64 <= seed_objective as f64 * (1.0 + hi) + 1.0);
    }

    #[test]
    fn adapted_step_never_leaves_its_bounds(
        min in 1u32..=5,
        span in 0u32..=18,
        start_frac in 0.0f64..=1.0,
        growth in 1.1f64..4.0,
        decay in 1.0f64..12.0,
        outcomes in prop::collection::vec(any::<bool>(), 0..400),
    ) {
        let min = min as f64;
        let max = min + span as f64;
        let mut config = OperatorConfig::for_variant(MutationVariant::Adaptive);
        config.step_min = min;
        config.step_max = max;
        config.step_size = min + start_frac * span as f64;
        config.growth_factor = growth;
        config.decay_exponent = decay;
        config.validate().unwrap();
        for succeeded in outcomes {
            adapt_step(&mut config, succeeded);
            prop_assert!(config.step_size >= min && config.step_size <= max);
            let rounded = config.rounded_step();
            prop_assert!(rounded >= min.round() as usize);
            prop_assert!(rounded <= max.round() as usize);
        }
    }

    #[test]
    fn cached_entropy_tracks_full_recomputation(
        patients in 1usize..=8,
        rooms in 1usize..=4,
        days in 2usize..=5,
        mu in 1usize..=5,
        world_seed in any::<u64>(),
        replacements in 1usize..=40,
    ) {
        let spec = small_spec(patients, rooms, rooms as u32 * 3, days, world_seed);
        let instance = match generate(&spec) {
            Ok(instance) => instance,
            Err(_) => return Ok(()),
        };
        prop_assume!(instance.num_patients() > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(world_seed ^ 0x5eed);
        let random_member = |rng: &mut ChaCha8Rng| {
            let assignment = instance
                .patients
                .iter()
                .map(|p| (0..p.los()).map(|_| rng.gen_range(0..rooms)).collect())
                .collect();
            Solution::evaluated(&instance, assignment).unwrap()
        };
        let mut members: Vec<Solution> = (0..mu).map(|_| random_member(&mut rng)).collect();
        let mut state = EntropyState::from_population(&members, 2.0);
        let cap = max_entropy(instance.patient_days(), rooms, mu as u32, 2.0);
        for _ in 0..replacements {
            let slot = rng.gen_range(0..mu);
            let offspring = random_member(&mut rng);
            let claimed = state.commit_replace(&members[slot], &offspring);
            members[slot] = offspring;
            prop_assert!((claimed - state.recompute()).abs() <= 1e-9);
            prop_assert!(claimed <= cap + 1e-9);
        }
    }

    #[test]
    fn generated_instances_validate_and_round_trip(
        patients in 1usize..=10,
        rooms in 1usize..=4,
        extra_beds in 0u32..=8,
        days in 2usize..=6,
        seed in any::<u64>(),
        emit_breakdown in any::<bool>(),
    ) {
        let spec = GeneratorSpec {
            emit_breakdown,
            ..small_spec(patients, rooms, rooms as u32 + extra_beds, days, seed)
        };
        let instance = match generate(&spec) {
            Ok(instance) => instance,
            // Dense stays can overload the peak day; that refusal is valid.
            Err(_) => return Ok(()),
        };
        prop_assert!(validate(&instance).is_ok());
        let text = instance_to_string(&instance);
        let reparsed = parse_instance(&text).unwrap();
        prop_assert_eq!(&reparsed, &instance);
        prop_assert_eq!(instance_to_string(&reparsed), text);
    }

    #[test]
    fn seeded_instances_satisfy_their_own_gate(
        patients in 1usize..=8,
        rooms in 2usize..=4,
        days in 2usize..=5,
        seed in any::<u64>(),
    ) {
        let spec = small_spec(patients, rooms, rooms as u32 * 3, days, seed);
        let mut instance = match generate(&spec) {
            Ok(instance) => instance,
            Err(_) => return Ok(()),
        };
        let config = pas_diversity::seeding::SeedConfig { improvement_budget: 200, seed };
        prop_assume!(pas_diversity::seeding::solve_seed(&mut instance, &config).is_ok());
        let assignment = instance.seed_solution.clone().unwrap();
        let report = pas_diversity::model::check_feasibility(&instance, &assignment).unwrap();
        prop_assert!(report.is_feasible());
        let solution = Solution::evaluated(&instance, assignment).unwrap();
        prop_assert_eq!(solution.objective().total, instance.seed_objective.unwrap());
    }
}
