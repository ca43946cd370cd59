use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use seeded_ising::analysis::FitMethod;
use seeded_ising::experiments::{self, ExperimentConfig};
use seeded_ising::{IsingParams, RecordingSchedule, SeedFraction};

#[derive(Parser)]
#[command(name = "seeded-ising", version, about = "Seeded Ising model experiments on binary iris templates")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Flags override values loaded with
/// `--config`, which override the built-in defaults.
#[derive(Args)]
struct Common {
    /// JSON config, or any CSV written by a previous run (replays its
    /// embedded config).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Seed size per part as a fraction `p/q` (rounded up).
    #[arg(long, global = true)]
    seed_fraction: Option<SeedFraction>,
    /// Seed size per part as a cell count; overrides --seed-fraction.
    #[arg(long, global = true)]
    seed_count: Option<usize>,
    /// Draw separate index sets for the real and imaginary parts.
    #[arg(long, global = true)]
    independent_index_sets: bool,
    #[arg(long, global = true)]
    max_shift: Option<usize>,
    /// Minimise Hamming distance over column rotations.
    #[arg(long, global = true)]
    rotation: bool,
    #[arg(long, global = true)]
    jv: Option<f64>,
    #[arg(long, global = true)]
    jh: Option<f64>,
    #[arg(long, global = true)]
    rows: Option<usize>,
    #[arg(long, global = true)]
    cols: Option<usize>,
    /// Recording schedule: `SPACINGxCOUNT` or a comma list of iterations.
    #[arg(long, global = true)]
    schedule: Option<RecordingSchedule>,
    /// Replace existing output files.
    #[arg(long, global = true)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Draw templates from the unseeded model.
    Synthesize {
        #[arg(long)]
        count: Option<usize>,
        /// Metropolis iterations per part.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Reconstruct templates from random seeds and compare with the originals.
    Reconstruct { inputs: Vec<PathBuf> },
    /// Pairwise Hamming distances between template files.
    Match {
        inputs: Vec<PathBuf>,
        /// Second collection; without it all pairs of INPUTS are matched.
        #[arg(long, num_args = 1..)]
        against: Vec<PathBuf>,
        /// Match INPUTS[i] with AGAINST[i] only.
        #[arg(long)]
        paired: bool,
    },
    /// Grid search over the coupling pair on one template.
    SweepJ {
        input: Option<PathBuf>,
        /// Comma list of J_v values; with --jh-values forms the grid.
        #[arg(long, value_delimiter = ',')]
        jv_values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        jh_values: Vec<f64>,
    },
    /// Binomial degrees-of-freedom fit of a distance column.
    Dof {
        input: Option<PathBuf>,
        #[arg(long)]
        column: Option<String>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        bin_width: Option<f64>,
    },
    /// Compare a long chain with exact enumeration on a small lattice.
    OracleCheck {
        #[arg(long)]
        oracle_rows: Option<usize>,
        #[arg(long)]
        oracle_cols: Option<usize>,
        /// Number of seeded cells.
        #[arg(long)]
        seeded: Option<usize>,
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        thin: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Moments,
    Histogram,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn build_config(common: &Common, command: &Command) -> Result<ExperimentConfig> {
    let mut c = match &common.config {
        Some(path) => ExperimentConfig::load(path)
            .with_context(|| format!("loading config from {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    set(&mut c.rng_seed, common.rng_seed);
    set(&mut c.out, common.out.clone());
    set(&mut c.trials, common.trials);
    set(&mut c.seed_fraction, common.seed_fraction);
    if common.seed_fraction.is_some() {
        c.seed_count = None;
    }
    if common.seed_count.is_some() {
        c.seed_count = common.seed_count;
    }
    if common.independent_index_sets {
        c.shared_index_set = false;
    }
    set(&mut c.max_shift, common.max_shift);
    c.rotation |= common.rotation;
    set(&mut c.j_v, common.jv);
    set(&mut c.j_h, common.jh);
    set(&mut c.rows, common.rows);
    set(&mut c.cols, common.cols);
    set(&mut c.schedule, common.schedule.clone());
    c.overwrite |= common.overwrite;

    match command {
        Command::Synthesize { count, steps } => {
            set(&mut c.synth_count, *count);
            set(&mut c.synth_steps, *steps);
        }
        Command::Reconstruct { inputs } => {
            if !inputs.is_empty() {
                c.inputs = inputs.clone();
            }
        }
        Command::Match {
            inputs,
            against,
            paired,
        } => {
            if !inputs.is_empty() {
                c.inputs = inputs.clone();
            }
            if !against.is_empty() {
                c.inputs_b = against.clone();
            }
            c.paired |= *paired;
        }
        Command::SweepJ {
            input,
            jv_values,
            jh_values,
        } => {
            if let Some(input) = input {
                c.inputs = vec![input.clone()];
            }
            if !jv_values.is_empty() || !jh_values.is_empty() {
                let jv = if jv_values.is_empty() { vec![c.j_v] } else { jv_values.clone() };
                let jh = if jh_values.is_empty() { vec![c.j_h] } else { jh_values.clone() };
                c.grid = jv
                    .iter()
                    .flat_map(|&v| jh.iter().map(move |&h| IsingParams::new(v, h)))
                    .collect::<Result<_, _>>()?;
            }
        }
        Command::Dof {
            input,
            column,
            method,
            bin_width,
        } => {
            if input.is_some() {
                c.distances = input.clone();
            }
            set(&mut c.column, column.clone());
            set(
                &mut c.fit_method,
                method.map(|m| match m {
                    Method::Moments => FitMethod::Moments,
                    Method::Histogram => FitMethod::HistogramLeastSquares,
                }),
            );
            set(&mut c.bin_width, *bin_width);
        }
        Command::OracleCheck {
            oracle_rows,
            oracle_cols,
            seeded,
            burn_in,
            samples,
            thin,
        } => {
            set(&mut c.oracle_rows, *oracle_rows);
            set(&mut c.oracle_cols, *oracle_cols);
            set(&mut c.oracle_seeded, *seeded);
            set(&mut c.burn_in, *burn_in);
            set(&mut c.samples, *samples);
            set(&mut c.thin, *thin);
        }
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<()> {
    let config = build_config(&cli.common, &cli.command)?;
    match cli.command {
        Command::Synthesize { .. } => {
            let report = experiments::synthesize(&config)?;
            println!(
                "wrote {} templates and {} (rng_seed {})",
                report.files.len(),
                report.manifest.display(),
                config.rng_seed
            );
        }
        Command::Reconstruct { .. } => {
            let r = experiments::reconstruct(&config)?;
            println!("seed bits      {}", r.seed_bits);
            println!("initial        mean {:.4} std {:.4}", r.initial_mean, r.initial_std);
            println!(
                "reconstructed  mean {:.4} std {:.4}",
                r.reconstructed_mean, r.reconstructed_std
            );
        }
        Command::Match { .. } => {
            let rows = experiments::match_templates(&config)?;
            println!(
                "matched {} pairs (rotation {}, max_shift {})",
                rows.len(),
                config.rotation,
                config.max_shift
            );
        }
        Command::SweepJ { .. } => {
            let result = experiments::sweep_j(&config)?;
            let best = result.best();
            println!(
                "minimum mean distance {:.4} at J = ({}, {})",
                best.mean, best.params.j_v, best.params.j_h
            );
        }
        Command::Dof { .. } => {
            let fit = experiments::dof(&config)?;
            println!(
                "p = {:.4}, N = {} (mean {:.6}, variance {:.6e})",
                fit.p, fit.n_dof, fit.sample_mean, fit.sample_var
            );
        }
        Command::OracleCheck { .. } => {
            let check = experiments::oracle_check(&config)?;
            println!(
                "free bits {}, total variation {:.5}, detailed balance error {:.3e}",
                check.free_bits, check.total_variation, check.detailed_balance_error
            );
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
