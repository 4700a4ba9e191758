//! `gt-lab`: bounds, Monte Carlo estimates and the acceptance suite for noisy
//! group testing. Results are CSV (UTF-8, LF, header row); every row carries
//! the configuration and version that produced it.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gt_lab::bounds::{achievable_tests, fano_lower_bound};
use gt_lab::montecarlo::{parse_t_grid, ErrorEstimate, Harness, Scenario, SearchOptions};
use gt_lab::report::{bound_rows, estimate_row, minimal_t_rows, to_csv, EstimateRow};
use gt_lab::{acceptance, Codebook, NoiseModel};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "gt-lab",
    version,
    about = "Noisy group testing: bounds and Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Achievable and Fano test-count bounds (one row per i plus a summary row).
    Bounds {
        #[command(flatten)]
        design: Design,
        /// Which bound to compute.
        #[arg(long, value_enum, default_value_t = BoundChoice::Achievable)]
        bound: BoundChoice,
        #[command(flatten)]
        output: Output,
    },
    /// One Monte Carlo error estimate at a fixed T.
    Estimate {
        #[command(flatten)]
        design: Design,
        /// Number of tests.
        #[arg(short = 'T', long = "tests")]
        t: usize,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Error estimates over a grid of T.
    Sweep {
        #[command(flatten)]
        design: Design,
        /// T grid as start:stop:step.
        #[arg(long)]
        t_grid: String,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Smallest T whose average error meets --target.
    MinimalT {
        #[command(flatten)]
        design: Design,
        /// T grid as start:stop:step; bisection refines inside it.
        #[arg(long, default_value = "4:200:4")]
        t_grid: String,
        /// Target average error.
        #[arg(long, default_value_t = 0.1)]
        target: f64,
        /// Stop refining once a probe is within its confidence interval of the target.
        #[arg(long, default_value_t = false)]
        halt_on_ambiguity: bool,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Run the acceptance suite and print PASS/FAIL per criterion.
    Accept {
        /// Run only these criteria (comma separated ids); all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Args, Debug)]
struct Design {
    /// Channel model.
    #[arg(long, value_enum, default_value_t = Model::NoiseFree)]
    model: Model,
    /// False-alarm probability of the additive channel.
    #[arg(long)]
    q: Option<f64>,
    /// Per-participation miss probability of the dilution channel.
    #[arg(long)]
    u: Option<f64>,
    /// Number of items.
    #[arg(short = 'N', long = "items")]
    n: usize,
    /// Number of defectives.
    #[arg(short = 'K', long = "defectives")]
    k: usize,
    /// Bernoulli codebook density [default: 1/K].
    #[arg(long)]
    p: Option<f64>,
}

impl Design {
    fn noise(&self) -> gt_lab::Result<NoiseModel> {
        let missing =
            |f: &'static str| gt_lab::Error::param(f, format!("required by --model {}", self.model.name()));
        let stray =
            |f: &'static str| gt_lab::Error::param(f, format!("not used by --model {}", self.model.name()));
        match self.model {
            Model::NoiseFree => {
                if self.q.is_some() {
                    return Err(stray("q"));
                }
                if self.u.is_some() {
                    return Err(stray("u"));
                }
                Ok(NoiseModel::NoiseFree)
            }
            Model::Additive => {
                if self.u.is_some() {
                    return Err(stray("u"));
                }
                NoiseModel::additive(self.q.ok_or_else(|| missing("q"))?)
            }
            Model::Dilution => {
                if self.q.is_some() {
                    return Err(stray("q"));
                }
                NoiseModel::dilution(self.u.ok_or_else(|| missing("u"))?)
            }
        }
    }

    fn p(&self) -> f64 {
        self.p.unwrap_or(1.0 / self.k.max(1) as f64)
    }

    fn scenario(&self, t: usize) -> gt_lab::Result<Scenario> {
        Scenario::new(self.n, self.k, t, self.p(), self.noise()?)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Error criterion.
    #[arg(long, value_enum, default_value_t = CriterionArg::Avg)]
    criterion: CriterionArg,
    /// Tolerated miss fraction for --criterion partial.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Monte Carlo trials (per defective set for --criterion worst).
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Master seed.
    #[arg(long, env = "GT_LAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct Output {
    /// Write CSV to this file (atomically) and print a summary table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of standard output when --out is absent.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Model {
    NoiseFree,
    Additive,
    Dilution,
}

impl Model {
    fn name(self) -> &'static str {
        match self {
            Model::NoiseFree => "noise-free",
            Model::Additive => "additive",
            Model::Dilution => "dilution",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum BoundChoice {
    Achievable,
    Fano,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum CriterionArg {
    Avg,
    Worst,
    Partial,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Csv,
    Table,
}

fn estimate(harness: &Harness, scenario: &Scenario, run: &RunArgs) -> gt_lab::Result<ErrorEstimate> {
    match run.criterion {
        CriterionArg::Avg => harness.estimate_average_error(scenario, run.trials, run.seed),
        CriterionArg::Partial => harness.estimate_partial_error(scenario, run.alpha, run.trials, run.seed),
        CriterionArg::Worst => {
            let codebook = Codebook::generate(scenario.n_items, scenario.n_tests, scenario.p, run.seed)?;
            Ok(harness
                .estimate_worstcase_error(&codebook, scenario.k, &scenario.noise, run.trials)?
                .estimate)
        }
    }
}

/// Aligns CSV columns for the terminal. Fields never contain commas.
fn table(csv: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|f| f.len())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row.iter().zip(&widths).map(|(f, w)| format!("{f:>w$}")).collect();
        out += line.join("  ").trim_end();
        out.push('\n');
    }
    out
}

fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit(csv: &str, output: &Output) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => {
            write_atomic(path, csv)?;
            print!("{}", table(csv));
            println!("wrote {}", path.display());
        }
        None if output.format == Format::Table => print!("{}", table(csv)),
        None => print!("{csv}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Bounds {
            design,
            bound,
            output,
        } => {
            let (n, k, p, noise) = (design.n, design.k, design.p(), design.noise()?);
            let mut rows = Vec::new();
            if bound != BoundChoice::Fano {
                rows.extend(bound_rows(&achievable_tests(n, k, p, &noise)?));
            }
            if bound != BoundChoice::Achievable {
                rows.extend(bound_rows(&fano_lower_bound(n, k, p, &noise)?));
            }
            emit(&to_csv(&rows), &output)?;
        }
        Command::Estimate {
            design,
            t,
            run,
            output,
        } => {
            let harness = Harness::with_threads(run.threads)?;
            let e = estimate(&harness, &design.scenario(t)?, &run)?;
            emit(&to_csv(&[estimate_row(&e)]), &output)?;
        }
        Command::Sweep {
            design,
            t_grid,
            run,
            output,
        } => {
            let grid = parse_t_grid(&t_grid)?;
            let base = design.scenario(0)?;
            let harness = Harness::with_threads(run.threads)?;
            let rows = grid
                .iter()
                .map(|&t| estimate(&harness, &base.with_tests(t), &run).map(|e| estimate_row(&e)))
                .collect::<gt_lab::Result<Vec<EstimateRow>>>()?;
            emit(&to_csv(&rows), &output)?;
        }
        Command::MinimalT {
            design,
            t_grid,
            target,
            halt_on_ambiguity,
            run,
            output,
        } => {
            if run.criterion != CriterionArg::Avg {
                return Err(
                    gt_lab::Error::param("criterion", "minimal-t searches the average error only").into(),
                );
            }
            let grid = parse_t_grid(&t_grid)?;
            let harness = Harness::with_threads(run.threads)?;
            let result = harness.find_minimal_t(
                &design.scenario(0)?,
                target,
                run.trials,
                &grid,
                run.seed,
                SearchOptions { halt_on_ambiguity },
            )?;
            emit(&to_csv(&minimal_t_rows(&result)), &output)?;
            match result.t_star {
                Some(t) => eprintln!(
                    "t_star = {t} (resolution {}, ambiguous {})",
                    result.resolution, result.ambiguous
                ),
                None => eprintln!("target {target} not reached on the grid"),
            }
        }
        Command::Accept { only, threads } => {
            let harness = Harness::with_threads(threads)?;
            let verdicts = acceptance::run(&harness, &only, |v| println!("{v}"));
            let failed = verdicts.iter().filter(|v| !v.passed).count();
            println!("{} passed, {failed} failed", verdicts.len() - failed);
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<gt_lab::Error>() {
        Some(gt_lab::Error::Capacity { .. }) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
