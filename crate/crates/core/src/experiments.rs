//! Experiment harness: multi-run operator comparisons, the pair-separation
//! robustness simulation, and CSV exports for external plotting and
//! statistics. All CSV floats carry 6 significant digits.

use crate::ea::{run, EaError, Population, RunConfig, RunRecord};
use crate::model::{Instance, PatientIdx, Solution};
use crate::operators::{MutationVariant, OperatorConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("initial solution co-locates only {available} patient pairs, {requested} requested")]
    NotEnoughPairs { available: usize, requested: usize },
}

/// Settings for the robustness simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RobustnessSpec {
    /// Patient pairs that must be torn apart simultaneously.
    pub pairs: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for RobustnessSpec {
    fn default() -> Self {
        RobustnessSpec {
            pairs: 1,
            repetitions: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessResult {
    /// Percentage of repetitions some member separated every drawn pair.
    pub ratio: f64,
    /// Mean number of separating members per repetition.
    pub alt: f64,
}

/// How well the population hedges against pairs of patients that must no
/// longer share a room: repeatedly draws pairs co-located in `initial` (a
/// shared room on at least one common day) and counts the members that house
/// every drawn pair apart on all their common days.
pub fn robustness_sim(
    instance: &Instance,
    population: &Population,
    initial: &Solution,
    spec: &RobustnessSpec,
) -> Result<RobustnessResult, ExperimentError> {
    let colocated = colocated_pairs(instance, initial);
    if colocated.len() < spec.pairs {
        return Err(ExperimentError::NotEnoughPairs {
            available: colocated.len(),
            requested: spec.pairs,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut separated_reps = 0usize;
    let mut separator_total = 0u64;
    for _ in 0..spec.repetitions {
        let drawn = rand::seq::index::sample(&mut rng, colocated.len(), spec.pairs);
        let separators = population
            .members()
            .iter()
            .filter(|member| {
                drawn
                    .iter()
                    .all(|i| separates(instance, member, colocated[i]))
            })
            .count();
        if separators > 0 {
            separated_reps += 1;
        }
        separator_total += separators as u64;
    }
    Ok(RobustnessResult {
        ratio: 100.0 * separated_reps as f64 / spec.repetitions as f64,
        alt: separator_total as f64 / spec.repetitions as f64,
    })
}

/// All patient pairs sharing a room on at least one common day of `initial`.
fn colocated_pairs(instance: &Instance, initial: &Solution) -> Vec<(PatientIdx, PatientIdx)> {
    let mut pairs = Vec::new();
    for p in 0..instance.num_patients() {
        for q in (p + 1)..instance.num_patients() {
            let shared = common_days(instance, p, q).any(|day| {
                initial.room_on_day(&instance.patients[p], day)
                    == initial.room_on_day(&instance.patients[q], day)
            });
            if shared {
                pairs.push((p, q));
            }
        }
    }
    pairs
}

fn common_days(
    instance: &Instance,
    p: PatientIdx,
    q: PatientIdx,
) -> impl Iterator<Item = usize> {
    let a = &instance.patients[p];
    let b = &instance.patients[q];
    a.admission.max(b.admission)..a.discharge.min(b.discharge)
}

/// A member separates a pair when the two patients occupy different rooms on
/// every day they are both present.
fn separates(instance: &Instance, member: &Solution, (p, q): (PatientIdx, PatientIdx)) -> bool {
    common_days(instance, p, q).all(|day| {
        member.room_on_day(&instance.patients[p], day)
            != member.room_on_day(&instance.patients[q], day)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub patient: PatientIdx,
    /// Distinct rooms the patient occupies across all members and stay-days.
    pub distinct_rooms: usize,
    /// `distinct_rooms` over the instance's room count.
    pub room_fraction: f64,
}

/// Per-patient room spread over the whole population, the data behind a
/// patients-over-rooms heatmap.
pub fn heatmap_rows(instance: &Instance, population: &Population) -> Vec<HeatmapRow> {
    (0..instance.num_patients())
        .map(|p| {
            let mut seen = vec![false; instance.num_rooms()];
            for member in population.members() {
                for &room in member.patient_rooms(p) {
                    seen[room] = true;
                }
            }
            let distinct_rooms = seen.iter().filter(|&&s| s).count();
            HeatmapRow {
                patient: p,
                distinct_rooms,
                room_fraction: distinct_rooms as f64 / instance.num_rooms() as f64,
            }
        })
        .collect()
}

pub fn heatmap_csv(rows: &[HeatmapRow]) -> String {
    let mut csv = String::from("patient,distinct_rooms,room_fraction\n");
    for row in rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.patient,
            row.distinct_rooms,
            format_float6(row.room_fraction)
        ));
    }
    csv
}

/// One run of an operator comparison.
#[derive(Debug)]
pub struct CompareRun {
    pub variant: MutationVariant,
    pub run_index: usize,
    pub record: RunRecord,
}

/// Runs `runs` independent repetitions per variant, pairing seeds so run `i`
/// of every variant starts from `base.seed + i`. Runs execute concurrently;
/// results come back in (variant, run) order, so output is deterministic
/// regardless of scheduling.
pub fn compare_operators(
    instance: &Instance,
    variants: &[MutationVariant],
    runs: usize,
    base: &RunConfig,
) -> Result<Vec<CompareRun>, EaError> {
    let jobs: Vec<(MutationVariant, usize)> = variants
        .iter()
        .flat_map(|&variant| (0..runs).map(move |i| (variant, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(variant, run_index)| {
            let operator = OperatorConfig::for_variant(variant);
            let config = RunConfig {
                seed: base.seed + run_index as u64,
                ..*base
            };
            let record = run(instance, &operator, &config)?;
            Ok(CompareRun {
                variant,
                run_index,
                record,
            })
        })
        .collect()
}

/// Per-run rows plus one `median` row per variant.
pub fn summary_csv(runs: &[CompareRun]) -> String {
    let mut csv = String::from("variant,run,seed,final_entropy,h_max\n");
    for cr in runs {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            cr.variant,
            cr.run_index,
            cr.record.run.seed,
            format_float6(cr.record.final_entropy),
            format_float6(cr.record.h_max)
        ));
    }
    let mut seen = Vec::new();
    for cr in runs {
        if !seen.contains(&cr.variant) {
            seen.push(cr.variant);
        }
    }
    for variant in seen {
        let median = median_final_entropy(runs, variant);
        csv.push_str(&format!("{variant},median,,{},\n", format_float6(median)));
    }
    csv
}

/// Median final entropy of one variant's runs.
pub fn median_final_entropy(runs: &[CompareRun], variant: MutationVariant) -> f64 {
    let mut finals: Vec<f64> = runs
        .iter()
        .filter(|cr| cr.variant == variant)
        .map(|cr| cr.record.final_entropy)
        .collect();
    assert!(!finals.is_empty(), "no runs for {variant}");
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = finals.len() / 2;
    if finals.len() % 2 == 1 {
        finals[mid]
    } else {
        0.5 * (finals[mid - 1] + finals[mid])
    }
}

pub fn trajectory_csv(record: &RunRecord) -> String {
    let mut csv = String::from("evaluations,entropy\n");
    for &(evaluations, entropy) in &record.trajectory {
        csv.push_str(&format!("{evaluations},{}\n", format_float6(entropy)));
    }
    csv
}

/// Formats with 6 significant digits, the precision of every CSV float.
pub fn format_float6(value: f64) -> String {
    if value == 0.0 {
        return "0.000000".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 12) as usize;
    format!("{value:.decimals$}")
}
