//! `rbessel`: runs the experiments and writes reports, plot data and a manifest.
//!
//! Exit status is 0 when every gating check passes, 1 when one fails and 2
//! for usage, configuration or I/O errors.

mod output;
mod plots;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rbessel::harness::{run_identity_suite, run_ssmp_suite, EnsembleRun, StatReport};

use output::{OutputDir, RunManifest, Timing};
use plots::PlotKind;
use settings::{ConfigError, Entry, Settings};

#[derive(Parser, Debug)]
#[command(
    name = "rbessel",
    version,
    about = "Noise-reinforced Bessel process experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value file with [section] headers; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        value_name = "DIR",
        env = "RBESSEL_OUT",
        default_value = "rbessel-out"
    )]
    out: PathBuf,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; 1 unless set here or in [run].
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, global = true, value_name = "F", allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, value_name = "F", allow_negative_numbers = true)]
    p: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,
    /// Base grid steps per path.
    #[arg(long, global = true, value_name = "N")]
    steps: Option<usize>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Closed-form identity suite; no randomness.
    Verify,
    /// Simulate an ensemble and dump per-path samples.
    Simulate,
    /// Moments of the reinforced local time, route agreement and self-similarity.
    Moments,
    /// First- and second-order scaling limits.
    ScalingLimit {
        /// Comma-separated scaling levels.
        #[arg(long, value_delimiter = ',', value_name = "N,..")]
        n_list: Option<Vec<f64>>,
    },
    /// Inverse local time as a self-similar Markov process.
    Ssmp {
        /// Independent stable-path samples.
        #[arg(long, value_name = "N")]
        points: Option<usize>,
    },
    /// Occupation identity and mean occupation densities.
    Occupation {
        #[arg(long, value_name = "F")]
        bandwidth: Option<f64>,
    },
    /// Everything above from one ensemble.
    All,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Simulate => "simulate",
            Command::Moments => "moments",
            Command::ScalingLimit { .. } => "scaling-limit",
            Command::Ssmp { .. } => "ssmp",
            Command::Occupation { .. } => "occupation",
            Command::All => "all",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(#[from] output::IoError),
    #[error("{0}")]
    Run(#[from] rbessel::Error),
}

fn flag_entries(cli: &Cli) -> Vec<Entry> {
    let c = &cli.common;
    let mut v = Vec::new();
    if let Some(x) = c.threads {
        v.push(Entry::flag("threads", "run", "threads", x));
    }
    if let Some(x) = c.alpha {
        v.push(Entry::flag("alpha", "params", "alpha", x));
    }
    if let Some(x) = c.p {
        v.push(Entry::flag("p", "params", "p", x));
    }
    if let Some(x) = c.seed {
        v.push(Entry::flag("seed", "pathsim", "seed", x));
    }
    if let Some(x) = c.paths {
        v.push(Entry::flag("paths", "pathsim", "paths", x));
    }
    if let Some(x) = c.steps {
        v.push(Entry::flag("steps", "pathsim", "steps", x));
    }
    match &cli.command {
        Command::ScalingLimit { n_list: Some(ns) } => {
            let s: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
            v.push(Entry::flag("n-list", "harness", "n_list", s.join(",")));
        }
        Command::Ssmp { points: Some(n) } => v.push(Entry::flag("points", "ssmp", "points", n)),
        Command::Occupation { bandwidth: Some(b) } => {
            v.push(Entry::flag("bandwidth", "localtime", "bandwidth", b))
        }
        _ => {}
    }
    v
}

struct Session {
    out: OutputDir,
    timings: Vec<Timing>,
    pass: bool,
}

impl Session {
    fn time<T>(&mut self, step: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.timings.push(Timing {
            step: step.into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        v
    }

    /// Persists a report; wall-clock time goes to the manifest so that the
    /// report bytes depend only on configuration and seed.
    fn report(&mut self, mut r: StatReport) -> Result<(), CliError> {
        self.timings.push(Timing {
            step: format!("{} (report)", r.experiment),
            seconds: r.runtime_s,
        });
        r.runtime_s = 0.0;
        println!("{}: {}", r.experiment, if r.pass { "PASS" } else { "FAIL" });
        for f in r.failures() {
            println!(
                "    {}: estimate {} se {} reference {}",
                f.name, f.estimate, f.standard_error, f.reference
            );
        }
        for w in &r.warnings {
            println!("    warning: {w}");
        }
        self.pass &= r.pass;
        self.out.write_json(&format!("{}.json", r.experiment), &r)?;
        Ok(())
    }

    fn plot(
        &mut self,
        run: &EnsembleRun,
        kind: PlotKind,
        first: Option<&StatReport>,
    ) -> Result<(), CliError> {
        for (name, table) in plots::emit_plot_data(run, kind, first)? {
            self.out.write_csv(&name, &table)?;
        }
        Ok(())
    }
}

fn simulate(s: &mut Session, settings: &Settings) -> Result<EnsembleRun, CliError> {
    let run = s.time("simulate ensemble", || {
        EnsembleRun::simulate(&settings.experiment)
    })?;
    Ok(run)
}

fn moments(s: &mut Session, run: &EnsembleRun) -> Result<(), CliError> {
    s.report(run.moments()?)?;
    s.report(run.routes()?)?;
    if run.config.times.len() > 1 {
        s.report(run.self_similarity()?)?;
    }
    s.plot(run, PlotKind::MomentScaling, None)
}

fn scaling(s: &mut Session, run: &EnsembleRun) -> Result<(), CliError> {
    let first = run.scaling_i()?;
    s.plot(run, PlotKind::DnDecay, Some(&first))?;
    s.report(first)?;
    s.report(run.scaling_ii()?)?;
    s.plot(run, PlotKind::CdfOverlay, None)
}

fn occupation(s: &mut Session, run: &EnsembleRun) -> Result<(), CliError> {
    s.report(run.occupation()?)?;
    s.plot(run, PlotKind::SurfaceSlice, None)
}

fn ssmp(s: &mut Session, settings: &Settings) -> Result<(), CliError> {
    let r = s.time("ssmp suite", || run_ssmp_suite(&settings.experiment))?;
    s.report(r)
}

fn verify(s: &mut Session) -> Result<(), CliError> {
    let r = run_identity_suite()?;
    s.report(r)
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let mut entries = match &cli.common.config {
        Some(path) => settings::read_file(path)?,
        None => Vec::new(),
    };
    entries.extend(flag_entries(cli));
    let settings = settings::resolve(&entries)?;
    // fails only if a pool already exists, which then keeps its size
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build_global();

    let mut s = Session {
        out: OutputDir::create(&cli.common.out)?,
        timings: Vec::new(),
        pass: true,
    };
    let resolved = "config.ini";
    s.out.write(resolved, &settings::to_text(&settings))?;
    let start = Instant::now();
    match &cli.command {
        Command::Verify => verify(&mut s)?,
        Command::Simulate => {
            let run = simulate(&mut s, &settings)?;
            s.out
                .write_csv("ensemble.csv", &plots::ensemble_samples(&run))?;
            s.out.write_csv("points.csv", &plots::point_samples(&run))?;
            for w in &run.ensemble.warnings {
                println!("warning: {w}");
            }
            println!("simulated {} paths", run.ensemble.len());
        }
        Command::Moments => {
            let run = simulate(&mut s, &settings)?;
            moments(&mut s, &run)?;
        }
        Command::ScalingLimit { .. } => {
            let run = simulate(&mut s, &settings)?;
            scaling(&mut s, &run)?;
        }
        Command::Occupation { .. } => {
            let run = simulate(&mut s, &settings)?;
            occupation(&mut s, &run)?;
        }
        Command::Ssmp { .. } => ssmp(&mut s, &settings)?,
        Command::All => {
            verify(&mut s)?;
            let run = simulate(&mut s, &settings)?;
            moments(&mut s, &run)?;
            scaling(&mut s, &run)?;
            occupation(&mut s, &run)?;
            ssmp(&mut s, &settings)?;
        }
    }
    s.timings.push(Timing {
        step: "total".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    let manifest = RunManifest {
        subcommand: cli.command.name().into(),
        config_path: cli.common.config.as_ref().map(|p| p.display().to_string()),
        resolved_config: resolved.into(),
        output_dir: s.out.root().display().to_string(),
        master_seed: settings.experiment.seed.master_seed,
        threads: settings.threads,
        pass: s.pass,
        artifacts: s.out.artifacts().to_vec(),
        timings: s.timings,
    };
    let n = manifest.artifacts.len();
    let path = s.out.finish(&manifest)?;
    println!("wrote {n} files and {}", path.display());
    Ok(manifest.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
