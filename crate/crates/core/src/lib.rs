//! Diversity-maximising evolutionary search for patient admission scheduling.
//!
//! Patients must be assigned a room for every day of their stay. Room
//! capacities are hard constraints; everything else (gender policies, age and
//! specialty mismatches, transfers) is folded into an integer objective. Given
//! a near-optimal seed schedule, the evolutionary algorithm in [`ea`] evolves a
//! population of schedules that all stay within a quality threshold while
//! maximising an entropy measure over patient-room-day assignment counts.
//!
//! Module map:
//! - [`model`]: instances, solutions, feasibility and objective evaluation
//! - [`diversity`]: population entropy, its ceiling, incremental updates
//! - [`operators`]: swap and change mutations, reinsertion, step-size control
//! - [`ea`]: the diversity-maximising evolutionary loop
//! - [`seeding`]: greedy construction plus hill climbing for seed schedules
//! - [`instances`]: JSON instance/population files and a synthetic generator
//! - [`experiments`]: operator comparisons, robustness simulation, CSV exports

pub mod diversity;
pub mod ea;
pub mod experiments;
pub mod instances;
pub mod model;
pub mod operators;
pub mod seeding;
