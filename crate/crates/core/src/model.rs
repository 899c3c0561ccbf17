//! Problem model: rooms, patients, instances, solutions, and the objective.
//!
//! A solution assigns every patient one room per day of her stay. Room
//! capacity is the only hard constraint; the objective sums three soft terms:
//! per-day assignment costs from the merged cost matrix, gender conflicts in
//! dynamic rooms, and transfer penalties for mid-stay room changes.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Range;
use thiserror::Error;

pub type PatientIdx = usize;
pub type RoomIdx = usize;
pub type DayIdx = usize;

/// Per-component cost matrices, optional traceability metadata emitted by the
/// generator. Only the merged matrix is ever evaluated.
pub type CostBreakdown = BTreeMap<String, Vec<Vec<u32>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "M")]
    Male,
}

/// Room gender policy. `FemaleOnly`/`MaleOnly` mismatches are priced into the
/// merged cost matrix; `Dynamic` rooms take both genders but are penalised per
/// day they actually mix; `Neutral` rooms are unrestricted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenderPolicy {
    #[serde(rename = "F")]
    FemaleOnly,
    #[serde(rename = "M")]
    MaleOnly,
    #[serde(rename = "D")]
    Dynamic,
    #[serde(rename = "N")]
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomIdx,
    /// Beds available on every day of the horizon.
    pub capacity: u32,
    pub gender_policy: GenderPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patient {
    pub id: PatientIdx,
    pub gender: Gender,
    /// First day of the stay (inclusive).
    pub admission: DayIdx,
    /// Day after the last day of the stay (exclusive).
    pub discharge: DayIdx,
}

impl Patient {
    /// Length of stay in days; at least 1 for a valid patient.
    pub fn los(&self) -> usize {
        self.discharge - self.admission
    }

    /// Calendar days of the stay, `admission..discharge`.
    pub fn stay_days(&self) -> Range<DayIdx> {
        self.admission..self.discharge
    }

    pub fn is_present(&self, day: DayIdx) -> bool {
        day >= self.admission && day < self.discharge
    }
}

/// A patient admission scheduling instance with merged per-assignment costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    /// Number of days in the planning horizon.
    pub horizon: usize,
    pub rooms: Vec<Room>,
    pub patients: Vec<Patient>,
    /// Merged assignment cost matrix, `cv[patient][room]`, charged per
    /// patient-day by default.
    pub cv: Vec<Vec<u32>>,
    /// Penalty per minority patient per mixed day in a dynamic room.
    pub cg2: u32,
    /// Penalty per mid-stay room change.
    pub ct: u32,
    /// Known near-optimal assignment, `seed_solution[patient][stay-day]`.
    pub seed_solution: Option<Vec<Vec<RoomIdx>>>,
    /// Objective value of `seed_solution`.
    pub seed_objective: Option<u64>,
    pub cost_breakdown: Option<CostBreakdown>,
}

impl Instance {
    pub fn num_patients(&self) -> usize {
        self.patients.len()
    }

    pub fn num_rooms(&self) -> usize {
        self.rooms.len()
    }

    /// Total patient-days to schedule (the entropy weight `W`).
    pub fn patient_days(&self) -> u64 {
        self.patients.iter().map(|p| p.los() as u64).sum()
    }
}

/// Objective value split into its three components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ObjectiveValue {
    pub total: u64,
    /// Merged assignment costs over occupied patient-days.
    pub room_costs: u64,
    /// Gender conflicts in dynamic rooms.
    pub gender_conflicts: u64,
    /// Transfer penalties for mid-stay room changes.
    pub transfers: u64,
}

/// How the soft objective terms are counted. The defaults match the benchmark
/// convention; the alternatives are kept selectable for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Charge the merged cost for every occupied patient-day (default) rather
    /// than once per distinct room a patient uses.
    pub cv_per_day: bool,
    pub gender_rule: GenderRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenderRule {
    /// Penalise each minority-gender patient in a mixed dynamic room-day.
    MinorityCount,
    /// One flat penalty per mixed dynamic room-day.
    PerRoomDay,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cv_per_day: true,
            gender_rule: GenderRule::MinorityCount,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("assignment has {got} patient rows, instance has {expected}")]
    PatientCountMismatch { got: usize, expected: usize },
    #[error("patient {patient}: assignment covers {got} days, stay is {expected}")]
    StayLengthMismatch {
        patient: PatientIdx,
        got: usize,
        expected: usize,
    },
    #[error("patient {patient}, stay day {day}: room {room} out of range ({rooms} rooms)")]
    InvalidRoom {
        patient: PatientIdx,
        day: usize,
        room: RoomIdx,
        rooms: usize,
    },
    #[error("quality threshold fraction must be non-negative and finite, got {0}")]
    InvalidAlpha(f64),
}

/// A room-per-stay-day assignment with its cached objective value.
///
/// Constructed through [`Solution::evaluated`], so the cached objective always
/// matches [`evaluate_objective`] on the assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    rooms: Vec<Vec<RoomIdx>>,
    objective: ObjectiveValue,
}

impl Solution {
    /// Validates dimensions and room ids, evaluates the objective, and caches it.
    pub fn evaluated(instance: &Instance, rooms: Vec<Vec<RoomIdx>>) -> Result<Self, ModelError> {
        let objective = evaluate_objective(instance, &rooms)?;
        Ok(Solution { rooms, objective })
    }

    /// Room assigned to patient `p` on the `day_offset`-th day of her stay.
    pub fn room_on(&self, p: PatientIdx, day_offset: usize) -> RoomIdx {
        self.rooms[p][day_offset]
    }

    /// Room assigned to patient `p` on calendar day `day` (must be within her stay).
    pub fn room_on_day(&self, patient: &Patient, day: DayIdx) -> RoomIdx {
        self.rooms[patient.id][day - patient.admission]
    }

    pub fn patient_rooms(&self, p: PatientIdx) -> &[RoomIdx] {
        &self.rooms[p]
    }

    pub fn assignment(&self) -> &[Vec<RoomIdx>] {
        &self.rooms
    }

    pub fn into_assignment(self) -> Vec<Vec<RoomIdx>> {
        self.rooms
    }

    pub fn objective(&self) -> ObjectiveValue {
        self.objective
    }
}

/// A room-day capacity breach: more patients than beds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapacityViolation {
    pub room: RoomIdx,
    pub day: DayIdx,
    pub occupancy: u32,
    pub capacity: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<CapacityViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_dimensions(instance: &Instance, assignment: &[Vec<RoomIdx>]) -> Result<(), ModelError> {
    if assignment.len() != instance.patients.len() {
        return Err(ModelError::PatientCountMismatch {
            got: assignment.len(),
            expected: instance.patients.len(),
        });
    }
    for (p, patient) in instance.patients.iter().enumerate() {
        if assignment[p].len() != patient.los() {
            return Err(ModelError::StayLengthMismatch {
                patient: p,
                got: assignment[p].len(),
                expected: patient.los(),
            });
        }
        for (d, &room) in assignment[p].iter().enumerate() {
            if room >= instance.rooms.len() {
                return Err(ModelError::InvalidRoom {
                    patient: p,
                    day: d,
                    room,
                    rooms: instance.rooms.len(),
                });
            }
        }
    }
    Ok(())
}

/// Checks room-day capacities. Dimension or room-id defects are structural
/// errors; a clean structure with overfull rooms yields a violation report.
pub fn check_feasibility(
    instance: &Instance,
    assignment: &[Vec<RoomIdx>],
) -> Result<FeasibilityReport, ModelError> {
    check_dimensions(instance, assignment)?;
    let mut occupancy = vec![vec![0u32; instance.horizon]; instance.rooms.len()];
    for (p, patient) in instance.patients.iter().enumerate() {
        for (d, &room) in assignment[p].iter().enumerate() {
            occupancy[room][patient.admission + d] += 1;
        }
    }
    let mut violations = Vec::new();
    for (r, room) in instance.rooms.iter().enumerate() {
        for (day, &count) in occupancy[r].iter().enumerate() {
            if count > room.capacity {
                violations.push(CapacityViolation {
                    room: r,
                    day,
                    occupancy: count,
                    capacity: room.capacity,
                });
            }
        }
    }
    Ok(FeasibilityReport { violations })
}

/// Evaluates the three objective components with default counting rules.
pub fn evaluate_objective(
    instance: &Instance,
    assignment: &[Vec<RoomIdx>],
) -> Result<ObjectiveValue, ModelError> {
    evaluate_objective_with(instance, assignment, &EvalOptions::default())
}

/// Evaluates the objective under explicit counting rules. Pure in all inputs;
/// capacity feasibility is not required.
pub fn evaluate_objective_with(
    instance: &Instance,
    assignment: &[Vec<RoomIdx>],
    opts: &EvalOptions,
) -> Result<ObjectiveValue, ModelError> {
    check_dimensions(instance, assignment)?;

    let mut room_costs: u64 = 0;
    for (p, rooms) in assignment.iter().enumerate() {
        if opts.cv_per_day {
            for &room in rooms {
                room_costs += u64::from(instance.cv[p][room]);
            }
        } else {
            let mut seen: Vec<RoomIdx> = Vec::new();
            for &room in rooms {
                if !seen.contains(&room) {
                    seen.push(room);
                    room_costs += u64::from(instance.cv[p][room]);
                }
            }
        }
    }

    let mut female = vec![vec![0u32; instance.horizon]; instance.rooms.len()];
    let mut male = vec![vec![0u32; instance.horizon]; instance.rooms.len()];
    for (p, patient) in instance.patients.iter().enumerate() {
        let counts = match patient.gender {
            Gender::Female => &mut female,
            Gender::Male => &mut male,
        };
        for (d, &room) in assignment[p].iter().enumerate() {
            counts[room][patient.admission + d] += 1;
        }
    }
    let mut gender_conflicts: u64 = 0;
    for (r, room) in instance.rooms.iter().enumerate() {
        if room.gender_policy != GenderPolicy::Dynamic {
            continue;
        }
        for day in 0..instance.horizon {
            gender_conflicts += u64::from(instance.cg2)
                * u64::from(mixed_day_penalty(female[r][day], male[r][day], opts.gender_rule));
        }
    }

    let mut transfer_count: u64 = 0;
    for rooms in assignment {
        transfer_count += rooms.windows(2).filter(|w| w[0] != w[1]).count() as u64;
    }
    let transfers = u64::from(instance.ct) * transfer_count;

    Ok(ObjectiveValue {
        total: room_costs + gender_conflicts + transfers,
        room_costs,
        gender_conflicts,
        transfers,
    })
}

/// Penalty units for one dynamic room-day holding `female` and `male` patients.
pub(crate) fn mixed_day_penalty(female: u32, male: u32, rule: GenderRule) -> u32 {
    if female == 0 || male == 0 {
        return 0;
    }
    match rule {
        GenderRule::MinorityCount => female.min(male),
        GenderRule::PerRoomDay => 1,
    }
}

/// Maximum acceptable objective: `floor((1 + alpha) * seed_objective)`.
pub fn quality_threshold(seed_objective: u64, alpha: f64) -> Result<u64, ModelError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(ModelError::InvalidAlpha(alpha));
    }
    // The epsilon compensates binary representation of decimal alphas
    // (e.g. 1.16 * 100 evaluates to 115.999...).
    let scaled = seed_objective as f64 * (1.0 + alpha) + 1e-9;
    Ok(scaled.floor() as u64)
}
