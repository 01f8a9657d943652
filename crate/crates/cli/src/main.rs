use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use btq_core::asymptotics::run_experiment;
use btq_core::config::{check_spec, parse_config, parse_ladder};
use btq_core::geometry::{KahlerModel, ModelKind, MAX_EPSILON, MIN_IM_TAU, MODEL_NAMES};
use btq_core::report::{summarize, summarize_verify, write_report, write_verify};
use btq_core::verify::{parse_selection, verify, verify_all};
use btq_core::Error;
use clap::{Parser, Subcommand};

/// Exit status when every threshold held.
const EXIT_OK: u8 = 0;
/// The tool failed before producing a verdict.
const EXIT_ERROR: u8 = 1;
/// A report was written but at least one threshold failed.
const EXIT_THRESHOLD: u8 = 2;

const DEFAULT_OUT: &str = "btq-out";

#[derive(Parser, Debug)]
#[command(name = "btq", version, about = "Berezin-Toeplitz quantization lab")]
struct Cli {
    /// Worker threads for level and point computations.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Reserved: nothing here draws random numbers. Takes no value.
    #[arg(long, global = true)]
    seedless: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Level ladder, e.g. `8,16,32`.
        #[arg(long, value_name = "M,M,...")]
        ladder: Option<String>,
        /// Fixed quadrature resolution.
        #[arg(long, value_name = "N")]
        nres: Option<usize>,
    },
    /// List the model families and their parameters.
    ListModels,
    /// List the built-in observables of a model family.
    ListObservables { model: String },
    /// Run the acceptance suite.
    Verify {
        /// Also write verify.json here.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Run only these criteria, e.g. `1,5,13` (criterion 16 needs the full suite).
        #[arg(long, value_name = "ID,ID,...")]
        criteria: Option<String>,
    },
    /// Print a readable summary of a written report directory.
    Report { dir: PathBuf },
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            eprint!("error: cli: {}", e.render().to_string().trim_start_matches("error: "));
            return ExitCode::from(EXIT_ERROR);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: cli: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    configure_jobs(cli.jobs)?;
    match cli.command {
        Command::Run { config, out, ladder, nres } => run(&config, out, ladder, nres),
        Command::ListModels => {
            println!("round_sphere");
            println!("deformed_sphere  epsilon (|epsilon| <= {MAX_EPSILON})");
            println!("torus            tau_re, tau_im (tau_im >= {MIN_IM_TAU}; default tau = i)");
            Ok(EXIT_OK)
        }
        Command::ListObservables { model } => list_observables(&model),
        Command::Verify { out, criteria } => run_verify(out.as_deref(), criteria.as_deref()),
        Command::Report { dir } => {
            print!("{}", btq_core::report::render_dir(&dir)?);
            Ok(EXIT_OK)
        }
    }
}

fn configure_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("note: built without the parallel feature; --jobs {n} has no effect");
    Ok(())
}

fn run(config: &Path, out: Option<PathBuf>, ladder: Option<String>, nres: Option<usize>) -> Result<u8, Failure> {
    let text = fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
    let mut cfg = parse_config(&text).map_err(Error::from)?;
    if let Some(l) = ladder {
        cfg.spec.ladder = parse_ladder(&l).map_err(Error::from)?;
    }
    if let Some(n) = nres {
        cfg.spec.n_res = Some(n);
    }
    check_spec(&cfg.spec).map_err(Error::from)?;
    let dir = out.or(cfg.out_dir).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let report = run_experiment(&cfg.spec).map_err(Error::from)?;
    write_report(&report, &dir)?;
    print!("{}", summarize(&report));
    println!("  wrote {}", dir.display());
    Ok(if report.passed { EXIT_OK } else { EXIT_THRESHOLD })
}

fn list_observables(model: &str) -> Result<u8, Failure> {
    let kind = match model {
        "round_sphere" => ModelKind::RoundSphere,
        "deformed_sphere" => ModelKind::DeformedSphere { epsilon: 0.1 },
        "torus" => ModelKind::Torus { tau_re: 0.0, tau_im: 1.0 },
        other => {
            return Err(Failure::Usage(format!("unknown model `{other}` (one of {})", MODEL_NAMES.join(", "))));
        }
    };
    let model = KahlerModel::new(kind).map_err(Error::from)?;
    for o in model.builtin_observables() {
        println!("{}", o.name());
    }
    Ok(EXIT_OK)
}

fn run_verify(out: Option<&Path>, criteria: Option<&str>) -> Result<u8, Failure> {
    let report = match criteria {
        None => verify_all()?,
        Some(sel) => {
            let ids = parse_selection(sel).map_err(Failure::Usage)?;
            if ids.contains(&16) {
                return Err(Failure::Usage("criterion 16 runs only with the full suite".into()));
            }
            verify(&ids)?
        }
    };
    print!("{}", summarize_verify(&report));
    if let Some(dir) = out {
        write_verify(&report, dir)?;
        println!("wrote {}", dir.join(btq_core::report::VERIFY_JSON).display());
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_THRESHOLD })
}
