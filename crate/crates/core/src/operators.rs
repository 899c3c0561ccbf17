//! Mutation operators: the standard swap baseline and three change-mutation
//! variants (fixed, self-adaptive, biased), plus the step-size controller.
//!
//! A change mutation removes a handful of patients and re-places each one in
//! a single room for her whole stay, drawn from her cheapest candidate rooms
//! with probability decaying in marginal cost. Offspring are capacity-feasible
//! by construction; a patient with no eligible room aborts the whole mutation
//! and the parent survives.

use crate::diversity::EntropyState;
use crate::model::{
    check_feasibility, GenderPolicy, Instance, Patient, PatientIdx, RoomIdx, Solution,
};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationVariant {
    /// Exchange two patients' room profiles day-wise.
    Swap,
    /// Change mutation with a constant step size.
    Fixed,
    /// Change mutation with the self-adjusting step size.
    Adaptive,
    /// Self-adjusting step size plus frequency-biased patient selection.
    Biased,
}

impl MutationVariant {
    pub const ALL: [MutationVariant; 4] = [
        MutationVariant::Swap,
        MutationVariant::Fixed,
        MutationVariant::Adaptive,
        MutationVariant::Biased,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MutationVariant::Swap => "swap",
            MutationVariant::Fixed => "fixed",
            MutationVariant::Adaptive => "adaptive",
            MutationVariant::Biased => "biased",
        }
    }
}

impl fmt::Display for MutationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "swap" => Ok(MutationVariant::Swap),
            "fixed" => Ok(MutationVariant::Fixed),
            "adaptive" => Ok(MutationVariant::Adaptive),
            "biased" => Ok(MutationVariant::Biased),
            other => Err(format!(
                "unknown operator '{other}' (expected swap, fixed, adaptive, or biased)"
            )),
        }
    }
}

/// Tunable knobs for the mutation operators.
///
/// The step size is kept as a real and rounded at use, so fractional decay
/// accumulates across adaptation intervals instead of being truncated away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub variant: MutationVariant,
    /// Exponent steering room reinsertion toward cheap rooms; 0 is uniform.
    pub selection_pressure: f64,
    /// Patients disturbed per change mutation (rounded to nearest).
    pub step_size: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Multiplier applied to the step size after a successful interval.
    pub growth_factor: f64,
    /// Failure decay is `growth_factor^(-1/decay_exponent)`.
    pub decay_exponent: f64,
    /// Fitness evaluations between step-size adjustments.
    pub adapt_interval: u64,
    /// Cheapest rooms considered per patient at reinsertion.
    pub candidate_pool: usize,
}

impl OperatorConfig {
    /// The tuned defaults for each variant. The self-adjusting variants start
    /// at their upper step bound and decay from there.
    pub fn for_variant(variant: MutationVariant) -> Self {
        let mut config = OperatorConfig {
            variant,
            selection_pressure: 50.0,
            step_size: 14.0,
            step_min: 2.0,
            step_max: 15.0,
            growth_factor: 2.0,
            decay_exponent: 8.0,
            adapt_interval: 200,
            candidate_pool: 10,
        };
        match variant {
            MutationVariant::Swap | MutationVariant::Fixed => {}
            MutationVariant::Adaptive => config.step_size = config.step_max,
            MutationVariant::Biased => {
                config.selection_pressure = 47.0;
                config.step_max = 14.0;
                config.step_size = 14.0;
                config.decay_exponent = 1.0;
            }
        }
        config
    }

    /// Whether this variant adjusts its step size between intervals.
    pub fn adapts(&self) -> bool {
        matches!(
            self.variant,
            MutationVariant::Adaptive | MutationVariant::Biased
        )
    }

    /// The integral step size actually used by a mutation.
    pub fn rounded_step(&self) -> usize {
        self.step_size.round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.step_min >= 0.0 && self.step_min <= self.step_max) {
            return Err(ConfigError::StepBounds {
                min: self.step_min,
                max: self.step_max,
            });
        }
        if !(self.step_size >= self.step_min && self.step_size <= self.step_max) {
            return Err(ConfigError::StepOutOfBounds {
                step: self.step_size,
                min: self.step_min,
                max: self.step_max,
            });
        }
        if !(self.growth_factor > 1.0) || !self.growth_factor.is_finite() {
            return Err(ConfigError::GrowthFactor(self.growth_factor));
        }
        if !(self.decay_exponent > 0.0) || !self.decay_exponent.is_finite() {
            return Err(ConfigError::DecayExponent(self.decay_exponent));
        }
        if self.adapt_interval == 0 {
            return Err(ConfigError::AdaptInterval);
        }
        if self.candidate_pool == 0 {
            return Err(ConfigError::CandidatePool);
        }
        if !(self.selection_pressure >= 0.0) || !self.selection_pressure.is_finite() {
            return Err(ConfigError::SelectionPressure(self.selection_pressure));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("step bounds must satisfy 0 <= min <= max, got [{min}, {max}]")]
    StepBounds { min: f64, max: f64 },
    #[error("step size {step} lies outside [{min}, {max}]")]
    StepOutOfBounds { step: f64, min: f64, max: f64 },
    #[error("growth factor must be a finite number above 1, got {0}")]
    GrowthFactor(f64),
    #[error("decay exponent must be a finite positive number, got {0}")]
    DecayExponent(f64),
    #[error("adaptation interval must be at least 1 evaluation")]
    AdaptInterval,
    #[error("candidate pool must hold at least one room")]
    CandidatePool,
    #[error("selection pressure must be non-negative and finite, got {0}")]
    SelectionPressure(f64),
}

/// Adjusts the step size after one adaptation interval: grow on success,
/// decay by the fractional root on failure, clamped to the configured bounds.
pub fn adapt_step(config: &mut OperatorConfig, interval_succeeded: bool) {
    if interval_succeeded {
        config.step_size = (config.step_size * config.growth_factor).min(config.step_max);
    } else {
        let decay = config.growth_factor.powf(-1.0 / config.decay_exponent);
        config.step_size = (config.step_size * decay).max(config.step_min);
    }
}

/// Per-patient shortlist of the cheapest rooms, precomputed once per instance.
#[derive(Debug, Clone)]
pub struct CandidateRooms {
    rooms: Vec<Vec<RoomIdx>>,
}

impl CandidateRooms {
    /// The `pool_size` rooms with lowest assignment cost per patient, sorted
    /// ascending by cost with ties broken by room id.
    pub fn build(instance: &Instance, pool_size: usize) -> Self {
        let keep = pool_size.min(instance.num_rooms());
        let rooms = instance
            .cv
            .iter()
            .map(|costs| {
                let mut ids: Vec<RoomIdx> = (0..instance.num_rooms()).collect();
                ids.sort_by_key(|&r| (costs[r], r));
                ids.truncate(keep);
                ids
            })
            .collect();
        CandidateRooms { rooms }
    }

    pub fn for_patient(&self, patient: PatientIdx) -> &[RoomIdx] {
        &self.rooms[patient]
    }
}

/// Room-day occupant counts for one solution, by total and by gender, used
/// for capacity checks and marginal-cost evaluation during reinsertion.
#[derive(Debug, Clone)]
pub struct Occupancy {
    total: Vec<Vec<u32>>,
    female: Vec<Vec<u32>>,
}

impl Occupancy {
    pub fn from_assignment(instance: &Instance, assignment: &[Vec<RoomIdx>]) -> Self {
        let mut occ = Occupancy {
            total: vec![vec![0; instance.horizon]; instance.num_rooms()],
            female: vec![vec![0; instance.horizon]; instance.num_rooms()],
        };
        for (p, rooms) in assignment.iter().enumerate() {
            let patient = &instance.patients[p];
            for (d, &room) in rooms.iter().enumerate() {
                occ.place(patient, room, patient.admission + d);
            }
        }
        occ
    }

    fn place(&mut self, patient: &Patient, room: RoomIdx, day: usize) {
        self.total[room][day] += 1;
        if patient.gender == crate::model::Gender::Female {
            self.female[room][day] += 1;
        }
    }

    fn displace(&mut self, patient: &Patient, room: RoomIdx, day: usize) {
        self.total[room][day] -= 1;
        if patient.gender == crate::model::Gender::Female {
            self.female[room][day] -= 1;
        }
    }

    /// Removes a patient's stay as assigned day-wise by `rooms`.
    pub fn remove_stay(&mut self, patient: &Patient, rooms: &[RoomIdx]) {
        for (d, &room) in rooms.iter().enumerate() {
            self.displace(patient, room, patient.admission + d);
        }
    }

    /// Adds a patient occupying one room for her whole stay.
    pub fn add_whole_stay(&mut self, patient: &Patient, room: RoomIdx) {
        for day in patient.stay_days() {
            self.place(patient, room, day);
        }
    }

    /// Whether `room` has a free bed on every day of the patient's stay.
    pub fn fits_whole_stay(&self, instance: &Instance, patient: &Patient, room: RoomIdx) -> bool {
        let capacity = instance.rooms[room].capacity;
        patient
            .stay_days()
            .all(|day| self.total[room][day] < capacity)
    }
}

/// Marginal objective cost of housing `patient` in `room` for her whole stay,
/// given the current occupants: per-day assignment cost plus the gender
/// conflicts the newcomer would create in a dynamic room. No transfer term;
/// a whole-stay placement has none of its own.
pub fn whole_stay_cost(
    instance: &Instance,
    occupancy: &Occupancy,
    patient: &Patient,
    room: RoomIdx,
) -> u64 {
    let mut cost = instance.cv[patient.id][room] as u64 * patient.los() as u64;
    if instance.rooms[room].gender_policy == GenderPolicy::Dynamic && instance.cg2 > 0 {
        for day in patient.stay_days() {
            let total = occupancy.total[room][day];
            let female = occupancy.female[room][day];
            let male = total - female;
            let (female_after, male_after) = match patient.gender {
                crate::model::Gender::Female => (female + 1, male),
                crate::model::Gender::Male => (female, male + 1),
            };
            let before = crate::model::mixed_day_penalty(
                female,
                male,
                crate::model::GenderRule::MinorityCount,
            );
            let after = crate::model::mixed_day_penalty(
                female_after,
                male_after,
                crate::model::GenderRule::MinorityCount,
            );
            cost += u64::from(instance.cg2) * u64::from(after - before);
        }
    }
    cost
}

/// Exchanges two uniformly chosen patients' rooms day-wise: on days both are
/// present each takes the other's room for that day; on days only one is
/// present she takes the other's room on the nearest day of the other's stay.
/// Returns `None` when the exchange breaks a room-day capacity, or with
/// fewer than two patients.
pub fn standard_swap<R: Rng>(
    instance: &Instance,
    parent: &Solution,
    rng: &mut R,
) -> Option<Solution> {
    if instance.num_patients() < 2 {
        return None;
    }
    let picked = rand::seq::index::sample(rng, instance.num_patients(), 2);
    let a = picked.index(0);
    let b = picked.index(1);

    let mut assignment = parent.assignment().to_vec();
    assignment[a] = swept_rooms(&instance.patients[a], &instance.patients[b], parent);
    assignment[b] = swept_rooms(&instance.patients[b], &instance.patients[a], parent);

    if !check_feasibility(instance, &assignment)
        .expect("swap preserves assignment dimensions")
        .is_feasible()
    {
        return None;
    }
    Some(Solution::evaluated(instance, assignment).expect("swap offspring evaluates"))
}

/// `taker`'s new rooms: for each of her stay days, the room `giver` occupies
/// in `parent` on that day, clamped to the nearest day of `giver`'s stay.
fn swept_rooms(taker: &Patient, giver: &Patient, parent: &Solution) -> Vec<RoomIdx> {
    taker
        .stay_days()
        .map(|day| {
            let clamped = day.clamp(giver.admission, giver.discharge - 1);
            parent.room_on_day(giver, clamped)
        })
        .collect()
}

/// Draws `count` distinct patients uniformly. A count above the patient total
/// is clamped with a warning.
pub fn select_patients_uniform<R: Rng>(
    num_patients: usize,
    count: usize,
    rng: &mut R,
) -> Vec<PatientIdx> {
    let count = clamp_selection(count, num_patients);
    rand::seq::index::sample(rng, num_patients, count).into_vec()
}

/// Draws `count` distinct patients with probability proportional to how often
/// each patient's current rooms recur across the population, so the most
/// duplicated assignments are disturbed preferentially. All-zero weights fall
/// back to a uniform draw.
///
/// Sampling uses exponentially-keyed reservoir order: patient `p` gets key
/// `ln(u_p) / weight_p` and the `count` largest keys win, which realises
/// weighted sampling without replacement in one pass.
pub fn select_patients_biased<R: Rng>(
    parent: &Solution,
    counts: &EntropyState,
    count: usize,
    rng: &mut R,
) -> Vec<PatientIdx> {
    let num_patients = parent.assignment().len();
    let count = clamp_selection(count, num_patients);
    let weights: Vec<u64> = (0..num_patients)
        .map(|p| counts.assignment_frequency(parent, p))
        .collect();
    if weights.iter().all(|&w| w == 0) {
        return rand::seq::index::sample(rng, num_patients, count).into_vec();
    }

    let unit = Uniform::new(0.0f64, 1.0);
    let mut keyed: Vec<(f64, PatientIdx)> = weights
        .iter()
        .enumerate()
        .map(|(p, &w)| {
            let key = if w == 0 {
                f64::NEG_INFINITY
            } else {
                unit.sample(rng).ln() / w as f64
            };
            (key, p)
        })
        .collect();
    keyed.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    keyed.truncate(count);
    keyed.into_iter().map(|(_, p)| p).collect()
}

fn clamp_selection(count: usize, num_patients: usize) -> usize {
    if count > num_patients {
        log::warn!("selection of {count} patients clamped to the {num_patients} available");
        num_patients
    } else {
        count
    }
}

/// Re-places an unassigned patient into one of her candidate rooms with free
/// capacity over her whole stay, drawn with probability proportional to
/// `(1 + cost - cheapest_cost)^(-pressure)`. Updates `occupancy` with the
/// chosen placement. `None` when no candidate room can host the whole stay.
pub fn reinsert<R: Rng>(
    instance: &Instance,
    occupancy: &mut Occupancy,
    patient: PatientIdx,
    candidates: &CandidateRooms,
    pressure: f64,
    rng: &mut R,
) -> Option<RoomIdx> {
    let patient = &instance.patients[patient];
    let eligible: Vec<RoomIdx> = candidates
        .for_patient(patient.id)
        .iter()
        .copied()
        .filter(|&room| occupancy.fits_whole_stay(instance, patient, room))
        .collect();
    if eligible.is_empty() {
        return None;
    }

    let costs: Vec<u64> = eligible
        .iter()
        .map(|&room| whole_stay_cost(instance, occupancy, patient, room))
        .collect();
    let cheapest = *costs.iter().min().expect("eligible rooms exist");
    let weights: Vec<f64> = costs
        .iter()
        .map(|&c| (1.0 + (c - cheapest) as f64).powf(-pressure))
        .collect();

    // The cheapest room always weighs exactly 1, so the total never vanishes.
    let total: f64 = weights.iter().sum();
    let mut point = rng.gen_range(0.0..total);
    let mut chosen = eligible[eligible.len() - 1];
    for (i, &w) in weights.iter().enumerate() {
        if point < w {
            chosen = eligible[i];
            break;
        }
        point -= w;
    }
    occupancy.add_whole_stay(patient, chosen);
    Some(chosen)
}

/// One change mutation: select `rounded_step` patients (uniformly, or biased
/// via the population counts), remove their stays, and reinsert each into a
/// whole-stay room. Any failed reinsertion rejects the mutation. The offspring
/// is capacity-feasible by construction.
pub fn change_mutation<R: Rng>(
    instance: &Instance,
    parent: &Solution,
    config: &OperatorConfig,
    counts: &EntropyState,
    candidates: &CandidateRooms,
    rng: &mut R,
) -> Option<Solution> {
    debug_assert!(config.variant != MutationVariant::Swap);
    let step = config.rounded_step();
    if step == 0 {
        return Some(parent.clone());
    }

    let selected = match config.variant {
        MutationVariant::Biased => select_patients_biased(parent, counts, step, rng),
        _ => select_patients_uniform(instance.num_patients(), step, rng),
    };

    let mut assignment = parent.assignment().to_vec();
    let mut occupancy = Occupancy::from_assignment(instance, &assignment);
    for &p in &selected {
        occupancy.remove_stay(&instance.patients[p], &assignment[p]);
    }
    for &p in &selected {
        let room = reinsert(
            instance,
            &mut occupancy,
            p,
            candidates,
            config.selection_pressure,
            rng,
        )?;
        assignment[p] = vec![room; instance.patients[p].los()];
    }
    Some(Solution::evaluated(instance, assignment).expect("mutation offspring evaluates"))
}

/// Dispatches one mutation according to the configured variant.
pub fn mutate<R: Rng>(
    instance: &Instance,
    parent: &Solution,
    config: &OperatorConfig,
    counts: &EntropyState,
    candidates: &CandidateRooms,
    rng: &mut R,
) -> Option<Solution> {
    match config.variant {
        MutationVariant::Swap => standard_swap(instance, parent, rng),
        _ => change_mutation(instance, parent, config, counts, candidates, rng),
    }
}
