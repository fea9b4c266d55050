//! `epig`: run active-learning experiments from a JSON config and turn the
//! results into plot-ready files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use epig_core::gaussian::pathology_sweep;
use epig_core::report::{self, Series};
use epig_core::{run_pool_size_sweep, run_replicated, AcquisitionMethod, Error, ExperimentConfig, RunResult};
use serde::Serialize;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "epig", version, about = "Pool-based active learning with BALD and EPIG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured acquisition over every seed.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Seeds as `0,1,2` or a half-open range `0..20`; replaces the config list.
        #[arg(long)]
        seeds: Option<String>,
        /// Worker threads for parallel seeds.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory; replaces `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and report every problem.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Sweep the Gaussian example where BALD grows without bound.
    Pathology {
        #[arg(long, default_value_t = 30)]
        m_max: usize,
        #[arg(long, default_value_t = 0.5)]
        x_star: f64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Merge aggregate CSVs into one long-format CSV, optionally with an SVG.
    Plotdata {
        /// Aggregate CSVs; each becomes one series named after its file.
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Also write `accuracy.svg`.
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// `KEY=VALUE` with a dotted key; the value is JSON or a bare string.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Failures before any work starts exit with 1, failures during it with 2.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Runtime(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Runtime(e.into())
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, seeds, jobs, out } => cmd_run(&config, seeds.as_deref(), jobs, out),
        Command::Validate { config } => cmd_validate(&config),
        Command::Pathology { m_max, x_star, out } => cmd_pathology(m_max, x_star, &out),
        Command::Plotdata { inputs, out, svg } => cmd_plotdata(&inputs, &out, svg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(&args.config, &args.overrides)
        .with_context(|| format!("loading {}", args.config.display()))
        .map_err(invalid)
}

fn cmd_validate(args: &ConfigArgs) -> Result<(), Failure> {
    let cfg = load(args)?;
    println!("{}: ok (digest {})", args.config.display(), cfg.digest());
    Ok(())
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi): (u64, u64) = (lo.trim().parse()?, hi.trim().parse()?);
        (lo..hi).collect()
    } else {
        text.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        bail!("seed list `{text}` is empty");
    }
    Ok(seeds)
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_digest: String,
    seeds: &'a [u64],
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct WallTime {
    file: String,
    seed: u64,
    acquisition: &'static str,
    wall_time_secs: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(args: &ConfigArgs, seeds: Option<&str>, jobs: Option<usize>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = load(args)?;
    if let Some(text) = seeds {
        cfg.seeds = parse_seeds(text).context("--seeds").map_err(invalid)?;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(n) = jobs {
        if n == 0 {
            return Err(invalid(anyhow::anyhow!("--jobs must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut outputs = Vec::new();
    let mut walls = Vec::new();
    let mut save = |stem: String, runs: &[RunResult], aggregate: &[epig_core::experiment::AggregatePoint]| -> anyhow::Result<()> {
        let runs_file = format!("{stem}_runs.csv");
        let agg_file = format!("{stem}_aggregate.csv");
        report::write_runs_csv(&dir.join(&runs_file), runs)?;
        report::write_aggregate_csv(&dir.join(&agg_file), aggregate)?;
        for r in runs {
            walls.push(WallTime {
                file: runs_file.clone(),
                seed: r.seed,
                acquisition: r.acquisition.name(),
                wall_time_secs: r.wall_time_secs,
            });
        }
        outputs.push(runs_file);
        outputs.push(agg_file);
        Ok(())
    };
    for &method in &cfg.acquisitions {
        let start = Instant::now();
        eprintln!("{}: {} seed(s)", method.name(), cfg.seeds.len());
        match &cfg.pool_sizes {
            None => {
                let rep = run_replicated(&cfg, method, &cfg.seeds)?;
                save(method.name().to_string(), &rep.runs, &rep.aggregate)?;
            }
            Some(sizes) => {
                for res in run_pool_size_sweep(&cfg, method, sizes, &cfg.seeds)? {
                    let rep = res.replicated;
                    save(stem_for(method, Some(res.pool_size)), &rep.runs, &rep.aggregate)?;
                }
            }
        }
        eprintln!("{}: done in {:.1}s", method.name(), start.elapsed().as_secs_f64());
    }
    outputs.push("timing.json".into());
    write_json(&dir.join("timing.json"), &walls)?;
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        tool: "epig",
        version: VERSION,
        config_digest: cfg.digest(),
        seeds: &cfg.seeds,
        config: &cfg,
        outputs,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn stem_for(method: AcquisitionMethod, pool_size: Option<usize>) -> String {
    match pool_size {
        None => method.name().to_string(),
        Some(n) => format!("{}_pool{n}", method.name()),
    }
}

#[derive(Serialize)]
struct PathologyManifest {
    tool: &'static str,
    version: &'static str,
    m_max: usize,
    x_star: f64,
    outputs: [&'static str; 1],
}

fn cmd_pathology(m_max: usize, x_star: f64, out: &Path) -> Result<(), Failure> {
    if m_max == 0 {
        return Err(invalid(anyhow::anyhow!("--m-max must be at least 1")));
    }
    if !x_star.is_finite() {
        return Err(invalid(anyhow::anyhow!("--x-star must be finite")));
    }
    let rows = pathology_sweep(m_max, x_star)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    report::write_pathology_csv(&out.join("pathology.csv"), &rows)?;
    let manifest = PathologyManifest {
        tool: "epig",
        version: VERSION,
        m_max,
        x_star,
        outputs: ["pathology.csv"],
    };
    write_json(&out.join("pathology_manifest.json"), &manifest)?;
    Ok(())
}

fn series_label(path: &Path) -> String {
    let stem = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    stem.strip_suffix("_aggregate").map_or(stem.clone(), str::to_string)
}

fn cmd_plotdata(inputs: &[PathBuf], out: &Path, svg: bool) -> Result<(), Failure> {
    if inputs.is_empty() {
        return Err(invalid(anyhow::anyhow!("plotdata needs at least one aggregate CSV")));
    }
    let mut series: Vec<Series> = Vec::new();
    for path in inputs {
        let points = report::read_aggregate_csv(path).map_err(invalid)?;
        let steps: Vec<usize> = points.iter().map(|p| p.step).collect();
        if let Some(first) = series.first() {
            let expected: Vec<usize> = first.points.iter().map(|p| p.step).collect();
            if steps != expected {
                return Err(invalid(anyhow::anyhow!(
                    "{}: step grid differs from {}",
                    path.display(),
                    inputs[0].display()
                )));
            }
        }
        series.push(Series { label: series_label(path), points });
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    report::write_tidy_csv(&out.join("tidy.csv"), &report::tidy(&series))?;
    if svg {
        let path = out.join("accuracy.svg");
        fs::write(&path, report::accuracy_svg(&series)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
