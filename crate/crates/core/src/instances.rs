//! Instance and population files, validation, and the synthetic generator.
//!
//! The canonical on-disk format is a single JSON document per instance. The
//! generator synthesises per-assumption penalty components (age, department
//! specialty, room specialty, features, capacity preference, fixed-gender
//! mismatch) and merges them into the one cost matrix the solver reads; the
//! component magnitudes are invented defaults, not calibrated to any
//! published benchmark.

use crate::ea::{EaError, Population};
use crate::model::{
    check_feasibility, evaluate_objective, CostBreakdown, Gender, GenderPolicy, Instance, Patient,
    Room, Solution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance:\n{0}")]
    Invalid(ValidationReport),
    #[error("population lists {listed} solutions but claims mu = {claimed}")]
    MemberCountMismatch { listed: usize, claimed: usize },
    #[error("population belongs to instance '{expected}', not '{got}'")]
    WrongInstance { expected: String, got: String },
    #[error("member {member}: stored objective {stored} does not match the recomputed {computed}")]
    MemberObjectiveMismatch {
        member: usize,
        stored: u64,
        computed: u64,
    },
    #[error(transparent)]
    Population(#[from] EaError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// On-disk instance layout. Field names are the format; unknown fields are
/// rejected so typos surface instead of being silently dropped.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    name: String,
    horizon: usize,
    rooms: Vec<Room>,
    patients: Vec<Patient>,
    cost: CostBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed_solution: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed_objective: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_breakdown: Option<CostBreakdown>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostBlock {
    cv: Vec<Vec<u32>>,
    cg2: u32,
    ct: u32,
}

impl From<InstanceFile> for Instance {
    fn from(file: InstanceFile) -> Instance {
        Instance {
            name: file.name,
            horizon: file.horizon,
            rooms: file.rooms,
            patients: file.patients,
            cv: file.cost.cv,
            cg2: file.cost.cg2,
            ct: file.cost.ct,
            seed_solution: file.seed_solution,
            seed_objective: file.seed_objective,
            cost_breakdown: file.cost_breakdown,
        }
    }
}

impl From<&Instance> for InstanceFile {
    fn from(instance: &Instance) -> InstanceFile {
        InstanceFile {
            name: instance.name.clone(),
            horizon: instance.horizon,
            rooms: instance.rooms.clone(),
            patients: instance.patients.clone(),
            cost: CostBlock {
                cv: instance.cv.clone(),
                cg2: instance.cg2,
                ct: instance.ct,
            },
            seed_solution: instance.seed_solution.clone(),
            seed_objective: instance.seed_objective,
            cost_breakdown: instance.cost_breakdown.clone(),
        }
    }
}

/// Parses an instance from JSON text and validates it.
pub fn parse_instance(text: &str) -> Result<Instance, FileError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let instance: Instance = file.into();
    let report = validate(&instance);
    if !report.is_ok() {
        return Err(FileError::Invalid(report));
    }
    Ok(instance)
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance, FileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&text)
}

/// Serializes an instance to its canonical JSON text: pretty-printed, fields
/// in fixed order, trailing newline. Equal instances yield equal bytes.
pub fn instance_to_string(instance: &Instance) -> String {
    let mut text = serde_json::to_string_pretty(&InstanceFile::from(instance))
        .expect("instance serializes");
    text.push('\n');
    text
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), FileError> {
    let path = path.as_ref();
    fs::write(path, instance_to_string(instance)).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Where in the document, e.g. `rooms[3].capacity`.
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn flag(&mut self, location: impl Into<String>, message: impl fmt::Display) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.to_string(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.location, v.message)?;
        }
        Ok(())
    }
}

/// Structural checks: index-aligned ids, sane date ranges, matching matrix
/// dimensions, and, when a seed is present, its feasibility and objective.
pub fn validate(instance: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (i, room) in instance.rooms.iter().enumerate() {
        if room.id != i {
            report.flag(format!("rooms[{i}].id"), format!("id {} must equal its index", room.id));
        }
        if room.capacity == 0 {
            report.flag(format!("rooms[{i}].capacity"), "rooms need at least one bed");
        }
    }

    for (i, patient) in instance.patients.iter().enumerate() {
        if patient.id != i {
            report.flag(
                format!("patients[{i}].id"),
                format!("id {} must equal its index", patient.id),
            );
        }
        if patient.admission >= patient.discharge {
            report.flag(
                format!("patients[{i}]"),
                format!(
                    "admission {} must precede discharge {}",
                    patient.admission, patient.discharge
                ),
            );
        }
        if patient.discharge > instance.horizon {
            report.flag(
                format!("patients[{i}].discharge"),
                format!("{} exceeds the horizon {}", patient.discharge, instance.horizon),
            );
        }
    }

    if instance.cv.len() != instance.patients.len() {
        report.flag(
            "cost.cv",
            format!(
                "{} rows for {} patients",
                instance.cv.len(),
                instance.patients.len()
            ),
        );
    }
    for (p, row) in instance.cv.iter().enumerate() {
        if row.len() != instance.rooms.len() {
            report.flag(
                format!("cost.cv[{p}]"),
                format!("{} columns for {} rooms", row.len(), instance.rooms.len()),
            );
        }
    }

    if let Some(breakdown) = &instance.cost_breakdown {
        let mut sums = vec![vec![0u64; instance.rooms.len()]; instance.patients.len()];
        let mut dims_ok = true;
        for (component, matrix) in breakdown {
            if matrix.len() != instance.patients.len()
                || matrix.iter().any(|row| row.len() != instance.rooms.len())
            {
                report.flag(
                    format!("cost_breakdown.{component}"),
                    "dimensions must match patients x rooms",
                );
                dims_ok = false;
                continue;
            }
            for (p, row) in matrix.iter().enumerate() {
                for (r, &c) in row.iter().enumerate() {
                    sums[p][r] += u64::from(c);
                }
            }
        }
        if dims_ok && instance.cv.len() == instance.patients.len() {
            let consistent = sums.iter().zip(&instance.cv).all(|(srow, crow)| {
                srow.len() == crow.len()
                    && srow.iter().zip(crow).all(|(&s, &c)| s == u64::from(c))
            });
            if !consistent {
                report.flag("cost_breakdown", "components do not sum to cost.cv");
            }
        }
    }

    match (&instance.seed_solution, instance.seed_objective) {
        (None, None) => {}
        (Some(_), None) => report.flag("seed_objective", "missing while seed_solution is present"),
        (None, Some(_)) => report.flag("seed_solution", "missing while seed_objective is present"),
        (Some(assignment), Some(stored)) => match check_feasibility(instance, assignment) {
            Err(e) => report.flag("seed_solution", e),
            Ok(feasibility) => {
                for v in &feasibility.violations {
                    report.flag(
                        "seed_solution",
                        format!(
                            "room {} on day {} holds {} patients for capacity {}",
                            v.room, v.day, v.occupancy, v.capacity
                        ),
                    );
                }
                let computed = evaluate_objective(instance, assignment)
                    .expect("dimensions already checked")
                    .total;
                if computed != stored {
                    report.flag(
                        "seed_objective",
                        format!("stored {stored} but the seed evaluates to {computed}"),
                    );
                }
            }
        },
    }

    report
}

/// Weight of each synthetic penalty component, in objective units. A zero
/// weight disables its component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostWeights {
    pub age: u32,
    pub department_specialty: u32,
    pub room_specialty: u32,
    pub features: u32,
    pub capacity_preference: u32,
    /// Charged when a patient's gender conflicts with a single-gender room.
    pub fixed_gender: u32,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            age: 20,
            department_specialty: 20,
            room_specialty: 20,
            features: 20,
            capacity_preference: 10,
            fixed_gender: 50,
        }
    }
}

/// Relative frequency of each room gender policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyMix {
    pub female_only: f64,
    pub male_only: f64,
    pub dynamic: f64,
    pub neutral: f64,
}

impl Default for PolicyMix {
    fn default() -> Self {
        PolicyMix {
            female_only: 0.2,
            male_only: 0.2,
            dynamic: 0.3,
            neutral: 0.3,
        }
    }
}

/// Knobs for the synthetic generator. The default is a desk-scale instance
/// that exercises every mechanism while solving in well under a second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Instance name; derived from the other parameters when absent.
    pub name: Option<String>,
    pub patients: usize,
    pub rooms: usize,
    pub total_beds: u32,
    pub days: usize,
    /// Target mean length of stay after truncation at the horizon. Uniform
    /// admissions cap the reachable mean at (days + 1) / 2.
    pub mean_los: f64,
    /// Patient-days are thinned down to this fraction of total bed-days.
    pub occupancy_target: f64,
    /// Fraction of female patients.
    pub gender_mix: f64,
    pub policy_mix: PolicyMix,
    pub cost_weights: CostWeights,
    pub cg2: u32,
    pub ct: u32,
    pub seed: u64,
    /// Attach the per-component matrices alongside the merged cost matrix.
    pub emit_breakdown: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            name: None,
            patients: 60,
            rooms: 10,
            total_beds: 50,
            days: 7,
            mean_los: 3.5,
            occupancy_target: 0.65,
            gender_mix: 0.5,
            policy_mix: PolicyMix::default(),
            cost_weights: CostWeights::default(),
            cg2: 50,
            ct: 11,
            seed: 0,
            emit_breakdown: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("generator spec invalid: {0}")]
    InvalidSpec(String),
    #[error("day {day} has {load} concurrent patients for {beds} beds")]
    PeakLoad { day: usize, load: u64, beds: u32 },
}

/// Mean of `min(1 + X, days - admission)` for Poisson X, averaged over
/// uniform admissions. Used to calibrate the stay-length distribution.
fn truncated_mean_los(lambda: f64, days: usize) -> f64 {
    let mut total = 0.0;
    for admission in 0..days {
        let longest = days - admission;
        let mut pmf = (-lambda).exp();
        let mut below = 0.0;
        let mut mean = 0.0;
        for j in 0..longest.saturating_sub(1) {
            mean += (1 + j) as f64 * pmf;
            below += pmf;
            pmf *= lambda / (j + 1) as f64;
        }
        mean += longest as f64 * (1.0 - below);
        total += mean;
    }
    total / days as f64
}

/// Poisson rate whose truncated stay-length mean best matches the target.
fn calibrate_lambda(mean_los: f64, days: usize) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = 4.0 * days as f64;
    if truncated_mean_los(hi, days) < mean_los - 0.05 {
        log::warn!(
            "mean stay {mean_los} is unreachable with uniform admissions over {days} days; \
             saturating near {}",
            truncated_mean_los(hi, days)
        );
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if truncated_mean_los(mid, days) < mean_los {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sample_poisson<R: Rng>(lambda: f64, rng: &mut R) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let mut point: f64 = rng.gen();
    let mut k = 0usize;
    let mut pmf = (-lambda).exp();
    while point >= pmf && k < 10_000 {
        point -= pmf;
        k += 1;
        pmf *= lambda / k as f64;
    }
    k
}

fn draw_policy<R: Rng>(mix: &PolicyMix, rng: &mut R) -> GenderPolicy {
    let weights = [
        (mix.female_only, GenderPolicy::FemaleOnly),
        (mix.male_only, GenderPolicy::MaleOnly),
        (mix.dynamic, GenderPolicy::Dynamic),
        (mix.neutral, GenderPolicy::Neutral),
    ];
    let total: f64 = weights.iter().map(|(w, _)| w).sum();
    let mut point = rng.gen_range(0.0..total);
    for (w, policy) in weights {
        if point < w {
            return policy;
        }
        point -= w;
    }
    GenderPolicy::Neutral
}

fn check_spec(spec: &GeneratorSpec) -> Result<(), GenerateError> {
    let fail = |reason: &str| Err(GenerateError::InvalidSpec(reason.to_string()));
    if spec.rooms == 0 {
        return fail("need at least one room");
    }
    if (spec.total_beds as usize) < spec.rooms {
        return fail("total beds must cover one bed per room");
    }
    if spec.days == 0 {
        return fail("need at least one day");
    }
    if !(spec.mean_los >= 1.0 && spec.mean_los <= spec.days as f64) {
        return fail("mean stay must lie between 1 and the horizon");
    }
    if !(spec.occupancy_target > 0.0 && spec.occupancy_target <= 1.0) {
        return fail("occupancy target must lie in (0, 1]");
    }
    if !(0.0..=1.0).contains(&spec.gender_mix) {
        return fail("gender mix must lie in [0, 1]");
    }
    let mix = &spec.policy_mix;
    let weights = [mix.female_only, mix.male_only, mix.dynamic, mix.neutral];
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0 {
        return fail("policy mix needs non-negative weights with a positive total");
    }
    Ok(())
}

/// Generates a synthetic instance: round-robin bed capacities, categorical
/// room policies, uniform admissions with Poisson-shaped stays calibrated to
/// the target mean, thinning to the occupancy target, and per-component
/// costs merged into the cost matrix. A pure function of its argument,
/// seed included.
pub fn generate(spec: &GeneratorSpec) -> Result<Instance, GenerateError> {
    check_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let base = spec.total_beds / spec.rooms as u32;
    let extra = (spec.total_beds % spec.rooms as u32) as usize;
    let rooms: Vec<Room> = (0..spec.rooms)
        .map(|id| Room {
            id,
            capacity: base + u32::from(id < extra),
            gender_policy: draw_policy(&spec.policy_mix, &mut rng),
        })
        .collect();

    let lambda = calibrate_lambda(spec.mean_los, spec.days);
    let mut patients: Vec<Patient> = (0..spec.patients)
        .map(|id| {
            let gender = if rng.gen_bool(spec.gender_mix) {
                Gender::Female
            } else {
                Gender::Male
            };
            let admission = rng.gen_range(0..spec.days);
            let los = (1 + sample_poisson(lambda, &mut rng)).min(spec.days - admission);
            Patient {
                id,
                gender,
                admission,
                discharge: admission + los,
            }
        })
        .collect();

    let bed_days = u64::from(spec.total_beds) * spec.days as u64;
    let cap = (spec.occupancy_target * bed_days as f64).floor() as u64;
    let mut patient_days: u64 = patients.iter().map(|p| p.los() as u64).sum();
    while patient_days > cap {
        let gone = patients.remove(rng.gen_range(0..patients.len()));
        patient_days -= gone.los() as u64;
    }
    for (i, patient) in patients.iter_mut().enumerate() {
        patient.id = i;
    }

    for day in 0..spec.days {
        let load = patients.iter().filter(|p| p.is_present(day)).count() as u64;
        if load > u64::from(spec.total_beds) {
            return Err(GenerateError::PeakLoad {
                day,
                load,
                beds: spec.total_beds,
            });
        }
    }

    // Component costs: each random component charges its full weight with a
    // fixed hit probability; the gender component is structural.
    let w = &spec.cost_weights;
    let random_components: [(&str, u32, f64); 5] = [
        ("age", w.age, 0.2),
        ("department_specialty", w.department_specialty, 0.3),
        ("room_specialty", w.room_specialty, 0.3),
        ("features", w.features, 0.3),
        ("capacity_preference", w.capacity_preference, 0.4),
    ];
    let mut breakdown = CostBreakdown::new();
    let blank = vec![vec![0u32; rooms.len()]; patients.len()];
    for (component, _, _) in random_components {
        breakdown.insert(component.to_string(), blank.clone());
    }
    breakdown.insert("fixed_gender".to_string(), blank);

    for p in 0..patients.len() {
        for r in 0..rooms.len() {
            for (component, weight, probability) in random_components {
                if weight > 0 && rng.gen_bool(probability) {
                    breakdown.get_mut(component).unwrap()[p][r] = weight;
                }
            }
            let mismatch = matches!(
                (rooms[r].gender_policy, patients[p].gender),
                (GenderPolicy::FemaleOnly, Gender::Male)
                    | (GenderPolicy::MaleOnly, Gender::Female)
            );
            if mismatch {
                breakdown.get_mut("fixed_gender").unwrap()[p][r] = w.fixed_gender;
            }
        }
    }

    let cv: Vec<Vec<u32>> = (0..patients.len())
        .map(|p| {
            (0..rooms.len())
                .map(|r| breakdown.values().map(|m| m[p][r]).sum())
                .collect()
        })
        .collect();

    let name = spec.name.clone().unwrap_or_else(|| {
        format!(
            "synthetic-p{}-r{}-b{}-d{}-s{}",
            spec.patients, spec.rooms, spec.total_beds, spec.days, spec.seed
        )
    });
    let instance = Instance {
        name,
        horizon: spec.days,
        rooms,
        patients,
        cv,
        cg2: spec.cg2,
        ct: spec.ct,
        seed_solution: None,
        seed_objective: None,
        cost_breakdown: spec.emit_breakdown.then_some(breakdown),
    };
    debug_assert!(validate(&instance).is_ok());
    Ok(instance)
}

/// On-disk population layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationFile {
    pub instance_name: String,
    pub c_max: u64,
    pub mu: usize,
    pub solutions: Vec<PopulationMember>,
    pub entropy: f64,
    pub log_base: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationMember {
    pub assignment: Vec<Vec<usize>>,
    pub objective: u64,
}

/// Snapshot of an evolved population for writing to disk.
pub fn population_file(instance: &Instance, population: &Population) -> PopulationFile {
    PopulationFile {
        instance_name: instance.name.clone(),
        c_max: population.c_max(),
        mu: population.mu(),
        solutions: population
            .members()
            .iter()
            .map(|m| PopulationMember {
                assignment: m.assignment().to_vec(),
                objective: m.objective().total,
            })
            .collect(),
        entropy: population.entropy(),
        log_base: population.entropy_state().log_base(),
    }
}

pub fn population_to_string(file: &PopulationFile) -> String {
    let mut text = serde_json::to_string_pretty(file).expect("population serializes");
    text.push('\n');
    text
}

pub fn write_population(file: &PopulationFile, path: impl AsRef<Path>) -> Result<(), FileError> {
    let path = path.as_ref();
    fs::write(path, population_to_string(file)).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_population(path: impl AsRef<Path>) -> Result<PopulationFile, FileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Rebuilds a live population from a file, re-verifying every stored
/// objective, the member count, and the quality threshold.
pub fn restore_population(
    file: &PopulationFile,
    instance: &Instance,
) -> Result<Population, FileError> {
    if file.instance_name != instance.name {
        return Err(FileError::WrongInstance {
            expected: file.instance_name.clone(),
            got: instance.name.clone(),
        });
    }
    if file.mu != file.solutions.len() {
        return Err(FileError::MemberCountMismatch {
            listed: file.solutions.len(),
            claimed: file.mu,
        });
    }
    let mut members = Vec::with_capacity(file.solutions.len());
    for (i, stored) in file.solutions.iter().enumerate() {
        let solution = Solution::evaluated(instance, stored.assignment.clone())?;
        if solution.objective().total != stored.objective {
            return Err(FileError::MemberObjectiveMismatch {
                member: i,
                stored: stored.objective,
                computed: solution.objective().total,
            });
        }
        members.push(solution);
    }
    Ok(Population::from_members(members, file.c_max, file.log_base)?)
}
