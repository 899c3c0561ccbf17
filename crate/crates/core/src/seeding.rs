//! Seed-solution construction: a greedy whole-stay placement followed by a
//! strict hill climb. The EA assumes a near-optimal starting point as given;
//! this module manufactures one for synthetic instances. The quality slack
//! `alpha` absorbs whatever gap remains to the true optimum.

use crate::model::{Instance, PatientIdx, RoomIdx, Solution};
use crate::operators::{reinsert, standard_swap, whole_stay_cost, CandidateRooms, Occupancy};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedConfig {
    /// Candidate solutions the hill climb may evaluate.
    pub improvement_budget: u64,
    pub seed: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            improvement_budget: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeedError {
    #[error("no room can host patient {patient} for her whole stay")]
    NoFeasibleRoom { patient: PatientIdx },
}

/// Places patients one by one, longest stay first (ties shuffled), each into
/// the cheapest room with whole-stay capacity (cost ties drawn at random).
/// The result is capacity-feasible and transfer-free.
pub fn greedy_construct<R: Rng>(instance: &Instance, rng: &mut R) -> Result<Solution, SeedError> {
    let mut order: Vec<PatientIdx> = (0..instance.num_patients()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&p| std::cmp::Reverse(instance.patients[p].los()));

    let mut assignment: Vec<Vec<RoomIdx>> = instance
        .patients
        .iter()
        .map(|p| Vec::with_capacity(p.los()))
        .collect();
    let mut occupancy = Occupancy::from_assignment(instance, &assignment);

    for p in order {
        let patient = &instance.patients[p];
        let mut cheapest = u64::MAX;
        let mut best: Vec<RoomIdx> = Vec::new();
        for room in 0..instance.num_rooms() {
            if !occupancy.fits_whole_stay(instance, patient, room) {
                continue;
            }
            let cost = whole_stay_cost(instance, &occupancy, patient, room);
            if cost < cheapest {
                cheapest = cost;
                best.clear();
            }
            if cost == cheapest {
                best.push(room);
            }
        }
        let &room = best
            .choose(rng)
            .ok_or(SeedError::NoFeasibleRoom { patient: p })?;
        occupancy.add_whole_stay(patient, room);
        assignment[p] = vec![room; patient.los()];
    }
    Ok(Solution::evaluated(instance, assignment).expect("greedy placement evaluates"))
}

/// First-improvement hill climb over single/double whole-stay relocations and
/// pairwise swaps. Each candidate offspring costs one budget unit; only
/// strictly cheaper candidates replace the incumbent.
pub fn local_search<R: Rng>(
    instance: &Instance,
    start: Solution,
    budget: u64,
    rng: &mut R,
) -> Solution {
    if instance.num_patients() == 0 {
        return start;
    }
    let candidates = CandidateRooms::build(instance, instance.num_rooms());
    let mut current = start;
    for _ in 0..budget {
        let offspring = if instance.num_patients() >= 2 && rng.gen_bool(0.5) {
            standard_swap(instance, &current, rng)
        } else {
            relocate(instance, &current, &candidates, rng)
        };
        if let Some(offspring) = offspring {
            if offspring.objective().total < current.objective().total {
                current = offspring;
            }
        }
    }
    current
}

/// Moves one or two uniformly chosen patients to uniformly chosen rooms with
/// whole-stay capacity. `None` when a chosen patient has nowhere to go.
fn relocate<R: Rng>(
    instance: &Instance,
    current: &Solution,
    candidates: &CandidateRooms,
    rng: &mut R,
) -> Option<Solution> {
    let moves = if instance.num_patients() >= 2 && rng.gen_bool(0.5) {
        2
    } else {
        1
    };
    let chosen = rand::seq::index::sample(rng, instance.num_patients(), moves);
    let mut assignment = current.assignment().to_vec();
    let mut occupancy = Occupancy::from_assignment(instance, &assignment);
    for p in chosen.iter() {
        occupancy.remove_stay(&instance.patients[p], &assignment[p]);
    }
    for p in chosen.iter() {
        let room = reinsert(instance, &mut occupancy, p, candidates, 0.0, rng)?;
        assignment[p] = vec![room; instance.patients[p].los()];
    }
    Some(Solution::evaluated(instance, assignment).expect("relocation evaluates"))
}

/// Builds a seed for the instance and stores it in the `seed_solution` and
/// `seed_objective` fields. Returns the seed's objective value.
pub fn solve_seed(instance: &mut Instance, config: &SeedConfig) -> Result<u64, SeedError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let constructed = greedy_construct(instance, &mut rng)?;
    let improved = local_search(instance, constructed, config.improvement_budget, &mut rng);
    let objective = improved.objective().total;
    instance.seed_solution = Some(improved.into_assignment());
    instance.seed_objective = Some(objective);
    Ok(objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasibility, evaluate_objective, Gender, GenderPolicy, Patient, Room};

    fn room(id: RoomIdx, capacity: u32, policy: GenderPolicy) -> Room {
        Room {
            id,
            capacity,
            gender_policy: policy,
        }
    }

    fn instance(rooms: Vec<Room>, patients: Vec<Patient>, cv: Vec<Vec<u32>>, cg2: u32, ct: u32) -> Instance {
        let horizon = patients.iter().map(|p| p.discharge).max().unwrap_or(1);
        Instance {
            name: "seed-fixture".into(),
            horizon,
            rooms,
            patients,
            cv,
            cg2,
            ct,
            seed_solution: None,
            seed_objective: None,
            cost_breakdown: None,
        }
    }

    /// Cheapest whole-stay assignment by exhaustive enumeration; `None` when
    /// no feasible combination exists. Only considers transfer-free
    /// solutions, which is what the seeder searches over.
    fn brute_force_optimum(inst: &Instance) -> Option<u64> {
        let rooms = inst.num_rooms();
        let patients = inst.num_patients();
        let mut best: Option<u64> = None;
        let mut pick = vec![0usize; patients];
        loop {
            let assignment: Vec<Vec<RoomIdx>> = pick
                .iter()
                .enumerate()
                .map(|(p, &r)| vec![r; inst.patients[p].los()])
                .collect();
            if check_feasibility(inst, &assignment).unwrap().is_feasible() {
                let value = evaluate_objective(inst, &assignment).unwrap().total;
                best = Some(best.map_or(value, |b: u64| b.min(value)));
            }
            // Odometer over room choices.
            let mut i = 0;
            loop {
                if i == patients {
                    return best;
                }
                pick[i] += 1;
                if pick[i] < rooms {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
        }
    }

    fn random_micro_instance(rng: &mut ChaCha8Rng) -> Instance {
        let num_rooms = rng.gen_range(2..=3);
        let num_patients = rng.gen_range(1..=3);
        let days = rng.gen_range(2..=4);
        let rooms: Vec<Room> = (0..num_rooms)
            .map(|id| {
                let policy = match rng.gen_range(0..3) {
                    0 => GenderPolicy::Neutral,
                    1 => GenderPolicy::Dynamic,
                    _ => GenderPolicy::FemaleOnly,
                };
                room(id, rng.gen_range(1..=2), policy)
            })
            .collect();
        let patients: Vec<Patient> = (0..num_patients)
            .map(|id| {
                let admission = rng.gen_range(0..days - 1);
                let discharge = rng.gen_range(admission + 1..=days);
                Patient {
                    id,
                    gender: if rng.gen_bool(0.5) {
                        Gender::Female
                    } else {
                        Gender::Male
                    },
                    admission,
                    discharge,
                }
            })
            .collect();
        let cv = (0..num_patients)
            .map(|_| (0..num_rooms).map(|_| rng.gen_range(0..10)).collect())
            .collect();
        instance(rooms, patients, cv, rng.gen_range(0..5), rng.gen_range(0..5))
    }

    #[test]
    fn greedy_picks_the_cheaper_room() {
        let inst = instance(
            vec![
                room(0, 1, GenderPolicy::Neutral),
                room(1, 1, GenderPolicy::Neutral),
            ],
            vec![Patient {
                id: 0,
                gender: Gender::Female,
                admission: 0,
                discharge: 2,
            }],
            vec![vec![3, 1]],
            0,
            0,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seed = greedy_construct(&inst, &mut rng).unwrap();
        assert_eq!(seed.patient_rooms(0), &[1, 1]);
        assert_eq!(seed.objective().total, 2);
    }

    #[test]
    fn empty_instance_seeds_trivially() {
        let mut inst = instance(vec![room(0, 1, GenderPolicy::Neutral)], vec![], vec![], 0, 0);
        let objective = solve_seed(&mut inst, &SeedConfig::default()).unwrap();
        assert_eq!(objective, 0);
        assert_eq!(inst.seed_solution, Some(vec![]));
    }

    #[test]
    fn construction_fails_when_no_room_fits() {
        let inst = instance(
            vec![room(0, 1, GenderPolicy::Neutral)],
            vec![
                Patient {
                    id: 0,
                    gender: Gender::Female,
                    admission: 0,
                    discharge: 2,
                },
                Patient {
                    id: 1,
                    gender: Gender::Male,
                    admission: 0,
                    discharge: 2,
                },
            ],
            vec![vec![0], vec![0]],
            0,
            0,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            greedy_construct(&inst, &mut rng),
            Err(SeedError::NoFeasibleRoom { .. })
        ));
    }

    #[test]
    fn greedy_never_beats_the_exhaustive_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..40 {
            let inst = random_micro_instance(&mut rng);
            let Some(optimum) = brute_force_optimum(&inst) else {
                continue;
            };
            if let Ok(greedy) = greedy_construct(&inst, &mut rng) {
                assert!(
                    greedy.objective().total >= optimum,
                    "greedy {} beat the optimum {optimum}",
                    greedy.objective().total
                );
                assert!(check_feasibility(&inst, greedy.assignment())
                    .unwrap()
                    .is_feasible());
            }
        }
    }

    #[test]
    fn hill_climb_never_worsens_and_holds_at_optima() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let mut improved_once = false;
        for _ in 0..30 {
            let inst = random_micro_instance(&mut rng);
            let Ok(start) = greedy_construct(&inst, &mut rng) else {
                continue;
            };
            let start_objective = start.objective().total;
            let polished = local_search(&inst, start, 400, &mut rng);
            assert!(polished.objective().total <= start_objective);
            improved_once |= polished.objective().total < start_objective;
            if let Some(optimum) = brute_force_optimum(&inst) {
                assert!(polished.objective().total >= optimum);
                if start_objective == optimum {
                    assert_eq!(polished.objective().total, optimum);
                }
            }
        }
        assert!(improved_once, "hill climb never improved any start");
    }

    #[test]
    fn zero_budget_returns_the_start() {
        let inst = instance(
            vec![
                room(0, 1, GenderPolicy::Neutral),
                room(1, 1, GenderPolicy::Neutral),
            ],
            vec![Patient {
                id: 0,
                gender: Gender::Female,
                admission: 0,
                discharge: 1,
            }],
            vec![vec![9, 0]],
            0,
            0,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let start = Solution::evaluated(&inst, vec![vec![0]]).unwrap();
        let unchanged = local_search(&inst, start.clone(), 0, &mut rng);
        assert_eq!(unchanged.assignment(), start.assignment());
    }

    #[test]
    fn solving_writes_the_seed_fields_deterministically() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let template = loop {
            let inst = random_micro_instance(&mut rng);
            if brute_force_optimum(&inst).is_some() {
                break inst;
            }
        };
        let config = SeedConfig {
            improvement_budget: 300,
            seed: 9,
        };
        let mut first = template.clone();
        let mut second = template.clone();
        let o1 = solve_seed(&mut first, &config).unwrap();
        let o2 = solve_seed(&mut second, &config).unwrap();
        assert_eq!(o1, o2);
        assert_eq!(first.seed_solution, second.seed_solution);
        assert_eq!(first.seed_objective, Some(o1));
        let stored = first.seed_solution.as_ref().unwrap();
        assert_eq!(
            evaluate_objective(&first, stored).unwrap().total,
            o1
        );
        assert!(check_feasibility(&first, stored).unwrap().is_feasible());
    }
}
