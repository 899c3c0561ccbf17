//! Command-line front end: instance generation and validation, seed solving,
//! the diversity-evolving run itself, and the experiment harness. Every
//! subcommand is deterministic given its `--seed`.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pas_diversity::ea::{run, Population, RunConfig};
use pas_diversity::experiments::{
    compare_operators, format_float6, heatmap_csv, heatmap_rows, robustness_sim, summary_csv,
    trajectory_csv, RobustnessSpec,
};
use pas_diversity::instances::{
    generate, population_file, population_to_string, read_instance, read_population,
    restore_population, validate, write_instance, GeneratorSpec,
};
use pas_diversity::model::{Instance, Solution};
use pas_diversity::operators::{MutationVariant, OperatorConfig};
use pas_diversity::seeding::{solve_seed, SeedConfig};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "pasdiv", version, about = "Evolves diverse, near-optimal room schedules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance file.
    Generate(GenerateArgs),
    /// Check an instance file and report every violation.
    Validate {
        /// Instance JSON path.
        instance: PathBuf,
    },
    /// Construct and locally optimize the seed solution, storing it in the file.
    SeedSolve(SeedSolveArgs),
    /// Evolve a maximally diverse population around the seed solution.
    Evolve(EvolveArgs),
    /// Estimate how well a population hedges against separating patient pairs.
    Robustness(RobustnessArgs),
    /// Export per-patient room-spread counts as CSV.
    Heatmap(HeatmapArgs),
    /// Run every operator variant several times and summarize medians.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output instance path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    patients: usize,
    #[arg(long, default_value_t = 10)]
    rooms: usize,
    /// Total beds distributed round-robin over the rooms.
    #[arg(long, default_value_t = 50)]
    beds: u32,
    #[arg(long, default_value_t = 7)]
    days: usize,
    /// Target mean length of stay after truncation to the horizon.
    #[arg(long, default_value_t = 3.5)]
    mean_los: f64,
    /// Occupied fraction of bed-days; patients are thinned down to it.
    #[arg(long, default_value_t = 0.65)]
    occupancy: f64,
    /// Probability that a patient is female.
    #[arg(long, default_value_t = 0.5)]
    gender_mix: f64,
    /// Cost per minority patient in a mixed dynamic room-day.
    #[arg(long, default_value_t = 50)]
    cg2: u32,
    /// Cost per room change between consecutive days.
    #[arg(long, default_value_t = 11)]
    ct: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Store the per-component cost matrices alongside their sum.
    #[arg(long)]
    emit_breakdown: bool,
    /// Instance name; derived from the dimensions when omitted.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct SeedSolveArgs {
    instance: PathBuf,
    /// Hill-climb length in candidate moves.
    #[arg(long, default_value_t = 20_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write here instead of back into the input file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvolveArgs {
    instance: PathBuf,
    /// Mutation operator: swap, fixed, adaptive, or biased.
    #[arg(long, value_parser = parse_operator)]
    operator: MutationVariant,
    /// Population size.
    #[arg(long, default_value_t = 50)]
    mu: usize,
    /// Quality slack: members may cost up to floor((1+alpha) * seed objective).
    #[arg(long, default_value_t = 0.02)]
    alpha: f64,
    /// Fitness evaluation budget.
    #[arg(long, default_value_t = 1_000_000)]
    evals: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the entropy trajectory CSV here.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Output population path.
    #[arg(long)]
    out: PathBuf,
    /// Evaluations between trajectory samples.
    #[arg(long, default_value_t = 1_000)]
    stride: u64,
    /// Logarithm base of the entropy measure.
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
    /// Override the room-selection pressure exponent.
    #[arg(long)]
    pressure: Option<f64>,
    /// Override the starting step size (patients per mutation).
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    step_min: Option<f64>,
    #[arg(long)]
    step_max: Option<f64>,
    /// Override the step multiplier applied after successful intervals.
    #[arg(long)]
    growth_factor: Option<f64>,
    /// Override the decay exponent: failures shrink the step by growth_factor^(-1/k).
    #[arg(long)]
    decay_exponent: Option<f64>,
    /// Override the evaluations between step adaptations.
    #[arg(long)]
    adapt_interval: Option<u64>,
    /// Override how many cheapest rooms are considered per reinsertion.
    #[arg(long)]
    candidate_pool: Option<usize>,
}

#[derive(Args)]
struct RobustnessArgs {
    instance: PathBuf,
    population: PathBuf,
    /// Patient pairs that must be separated simultaneously.
    #[arg(long, default_value_t = 1)]
    pairs: usize,
    /// Sampling repetitions.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct HeatmapArgs {
    instance: PathBuf,
    population: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    instance: PathBuf,
    /// Independent runs per operator variant.
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 50)]
    mu: usize,
    #[arg(long, default_value_t = 0.02)]
    alpha: f64,
    #[arg(long, default_value_t = 1_000_000)]
    evals: u64,
    /// Base seed; run i of every variant uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1_000)]
    stride: u64,
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
    /// Directory receiving summary.csv and per-run trajectory files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_operator(s: &str) -> Result<MutationVariant, String> {
    s.parse()
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Generate(args) => cmd_generate(args),
        Command::Validate { instance } => cmd_validate(&instance),
        Command::SeedSolve(args) => cmd_seed_solve(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Robustness(args) => cmd_robustness(args),
        Command::Heatmap(args) => cmd_heatmap(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let spec = GeneratorSpec {
        name: args.name,
        patients: args.patients,
        rooms: args.rooms,
        total_beds: args.beds,
        days: args.days,
        mean_los: args.mean_los,
        occupancy_target: args.occupancy,
        gender_mix: args.gender_mix,
        cg2: args.cg2,
        ct: args.ct,
        seed: args.seed,
        emit_breakdown: args.emit_breakdown,
        ..Default::default()
    };
    let instance = generate(&spec)?;
    write_instance(&instance, &args.out)?;
    println!(
        "wrote {} ({} patients, {} rooms, {} patient-days) to {}",
        instance.name,
        instance.num_patients(),
        instance.num_rooms(),
        instance.patient_days(),
        args.out.display()
    );
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    // The strict parser validates after deserializing, so success means clean.
    match pas_diversity::instances::parse_instance(&text) {
        Ok(instance) => {
            debug_assert!(validate(&instance).is_ok());
            println!("{}: ok", instance.name);
            Ok(())
        }
        Err(pas_diversity::instances::FileError::Invalid(report)) => {
            eprint!("{report}");
            bail!("{} violation(s) in {}", report.violations.len(), path.display());
        }
        Err(other) => Err(other).with_context(|| format!("parsing {}", path.display())),
    }
}

fn cmd_seed_solve(args: SeedSolveArgs) -> Result<()> {
    let mut instance = read_instance(&args.instance)?;
    let config = SeedConfig {
        improvement_budget: args.budget,
        seed: args.seed,
    };
    let objective = solve_seed(&mut instance, &config)?;
    let target = args.out.as_ref().unwrap_or(&args.instance);
    write_instance(&instance, target)?;
    println!("seed objective {objective} stored in {}", target.display());
    Ok(())
}

fn cmd_evolve(args: EvolveArgs) -> Result<()> {
    let instance = read_instance(&args.instance)?;
    let mut operator = OperatorConfig::for_variant(args.operator);
    if let Some(v) = args.pressure {
        operator.selection_pressure = v;
    }
    if let Some(v) = args.step {
        operator.step_size = v;
    }
    if let Some(v) = args.step_min {
        operator.step_min = v;
    }
    if let Some(v) = args.step_max {
        operator.step_max = v;
    }
    if let Some(v) = args.growth_factor {
        operator.growth_factor = v;
    }
    if let Some(v) = args.decay_exponent {
        operator.decay_exponent = v;
    }
    if let Some(v) = args.adapt_interval {
        operator.adapt_interval = v;
    }
    if let Some(v) = args.candidate_pool {
        operator.candidate_pool = v;
    }
    let config = RunConfig {
        mu: args.mu,
        alpha: args.alpha,
        budget: args.evals,
        seed: args.seed,
        sample_stride: args.stride,
        log_base: args.log_base,
    };
    let record = run(&instance, &operator, &config)?;
    write_text(&args.out, &population_to_string(&population_file(&instance, &record.population)))?;
    if let Some(path) = &args.trajectory {
        write_text(path, &trajectory_csv(&record))?;
    }
    println!(
        "{} evaluations with {}: entropy {} of ceiling {} (c_max {}) in {:.1}s; population at {}",
        config.budget,
        args.operator,
        format_float6(record.final_entropy),
        format_float6(record.h_max),
        record.c_max,
        record.elapsed.as_secs_f64(),
        args.out.display()
    );
    Ok(())
}

fn cmd_robustness(args: RobustnessArgs) -> Result<()> {
    let (instance, population) = load_population(&args.instance, &args.population)?;
    let initial = initial_solution(&instance)?;
    let spec = RobustnessSpec {
        pairs: args.pairs,
        repetitions: args.reps,
        seed: args.seed,
    };
    let result = robustness_sim(&instance, &population, &initial, &spec)?;
    println!("pairs,repetitions,ratio,alt");
    println!(
        "{},{},{},{}",
        args.pairs,
        args.reps,
        format_float6(result.ratio),
        format_float6(result.alt)
    );
    Ok(())
}

fn cmd_heatmap(args: HeatmapArgs) -> Result<()> {
    let (instance, population) = load_population(&args.instance, &args.population)?;
    let csv = heatmap_csv(&heatmap_rows(&instance, &population));
    match &args.out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let instance = read_instance(&args.instance)?;
    let base = RunConfig {
        mu: args.mu,
        alpha: args.alpha,
        budget: args.evals,
        seed: args.seed,
        sample_stride: args.stride,
        log_base: args.log_base,
    };
    let runs = compare_operators(&instance, &MutationVariant::ALL, args.runs, &base)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    for cr in &runs {
        let path = args
            .out_dir
            .join(format!("trajectory-{}-{}.csv", cr.variant, cr.run_index));
        write_text(&path, &trajectory_csv(&cr.record))?;
    }
    let summary = summary_csv(&runs);
    write_text(&args.out_dir.join("summary.csv"), &summary)?;
    print!("{summary}");
    println!("files in {}", args.out_dir.display());
    Ok(())
}

fn load_population(instance_path: &Path, population_path: &Path) -> Result<(Instance, Population)> {
    let instance = read_instance(instance_path)?;
    let file = read_population(population_path)?;
    let population = restore_population(&file, &instance)?;
    Ok((instance, population))
}

fn initial_solution(instance: &Instance) -> Result<Solution> {
    let assignment = instance
        .seed_solution
        .clone()
        .context("instance carries no seed solution; run seed-solve first")?;
    Ok(Solution::evaluated(instance, assignment)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
