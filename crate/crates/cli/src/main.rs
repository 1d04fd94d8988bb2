//! `geodesy`: passage times, geodesic trees, experiments and SVG rendering.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 bad flags or malformed
//! input, 3 infeasible target, 4 margin violation.

mod parse;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geodesy::experiments::{self, ExperimentConfig};
use geodesy::geostruct::{geodesic_tree, infection_partition};
use geodesy::passage::estimated_solve_bytes;
use geodesy::render::{self, HeatmapDocument};
use geodesy::{GeodesicPath, GeodesyError, LatticeBox, PassageEngine, SubgraphMask, TargetSpec, Vertex, WeightField};
use serde::Serialize;
use sha2::{Digest, Sha256};

use parse::{DistArg, FixtureFile};

#[derive(Parser)]
#[command(name = "geodesy", version, about = "First-passage percolation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EnvArgs {
    /// Environment seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// exponential:RATE | uniform:A,B | shifted-exponential:SHIFT,RATE | fixture:PATH
    #[arg(long, value_parser = parse::dist)]
    dist: DistArg,
    /// R for [-R, R]^2, or LO:HI such as -4,-4:4,4 (taken from the fixture when omitted)
    #[arg(long = "box", value_parser = parse::lattice_box, allow_hyphen_values = true)]
    bbox: Option<LatticeBox>,
    /// Largest solver footprint allowed, in GiB
    #[arg(long, default_value_t = 4.0)]
    memory_cap_gib: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Write an environment as an explicit fixture file
    Env {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Passage time and geodesic from a source vertex to a target
    Passage {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, value_parser = parse::vertex, allow_hyphen_values = true)]
        source: Vertex,
        /// point:X,Y | set:X,Y;X,Y | halfspace:R1,R2@ALPHA
        #[arg(long, value_parser = parse::target, allow_hyphen_values = true)]
        target: TargetSpec,
        /// full | half-plane | half-plane:AXIS,THRESHOLD
        #[arg(long, value_parser = parse::mask, default_value = "full")]
        mask: SubgraphMask,
        /// Output directory for passage.csv, geodesic.json and heatmap.json
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Geodesic tree rooted at a vertex, as JSON
    Tree {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, value_parser = parse::vertex, allow_hyphen_values = true)]
        root: Vertex,
        #[arg(long)]
        out: PathBuf,
    },
    /// Competition partition for a list of seeds, as JSON
    Partition {
        #[command(flatten)]
        env: EnvArgs,
        /// Seed vertices separated by ';', e.g. 0,0;4,0
        #[arg(long, allow_hyphen_values = true)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a JSON-configured experiment into results/<config hash>/
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (GEODESY_WORKERS overrides)
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "results")]
        results: PathBuf,
    },
    /// Render a tree, partition or heat-map document as SVG
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON vertex array, or an array of them
        #[arg(long)]
        highlight: Option<PathBuf>,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<GeodesyError> for Failure {
    fn from(e: GeodesyError) -> Self {
        let code = match &e {
            GeodesyError::EmptyTarget | GeodesyError::Unreachable(_) | GeodesyError::InvalidTarget(_) => 3,
            GeodesyError::MarginViolation(_) => 4,
            GeodesyError::Io(_) | GeodesyError::Certification(_) | GeodesyError::Structural(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Env { env, out } => {
            let env = build_env(&env)?;
            write_atomic(&out, &to_json(&FixtureFile::from_env(&env)?)?)
        }
        Command::Passage {
            env,
            source,
            target,
            mask,
            out,
        } => cmd_passage(&env, &source, &target, mask, &out),
        Command::Tree { env, root, out } => {
            let env = build_env(&env)?;
            let tree = geodesic_tree(&env, &root)?;
            write_atomic(&out, &to_json(&tree.to_document())?)
        }
        Command::Partition { env, seeds, out } => {
            let env = build_env(&env)?;
            let seeds: Vec<Vertex> = seeds.split(';').map(parse::vertex).collect::<Result<_, _>>().map_err(Failure::usage)?;
            let part = infection_partition(&env, &seeds)?;
            write_atomic(&out, &to_json(&part.to_document())?)
        }
        Command::Experiment { config, workers, results } => cmd_experiment(&config, workers, &results),
        Command::Render { input, out, highlight } => cmd_render(&input, &out, highlight.as_deref()),
    }
}

fn build_env(args: &EnvArgs) -> CliResult<WeightField> {
    let env = match &args.dist {
        DistArg::Fixture(path) => {
            let env = parse::load_fixture(Path::new(path)).map_err(Failure::usage)?;
            if let Some(b) = &args.bbox {
                if b != env.bbox() {
                    return Err(Failure::usage("--box differs from the fixture's box"));
                }
            }
            env
        }
        DistArg::Law(law) => {
            let bbox = args.bbox.clone().ok_or_else(|| Failure::usage("--box is required unless --dist is a fixture"))?;
            WeightField::new(args.seed, *law, bbox)?
        }
    };
    let bytes = estimated_solve_bytes(env.bbox()) as f64;
    if bytes > args.memory_cap_gib * (1u64 << 30) as f64 {
        return Err(Failure::usage(format!(
            "box needs about {:.1} GiB, above the {} GiB cap",
            bytes / (1u64 << 30) as f64,
            args.memory_cap_gib
        )));
    }
    Ok(env)
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> CliResult {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Failure::from(e.error))?;
    Ok(())
}

fn cmd_passage(args: &EnvArgs, source: &Vertex, target: &TargetSpec, mask: SubgraphMask, out: &Path) -> CliResult {
    let env = build_env(args)?;
    env.bbox().index_of(source).ok_or_else(|| Failure::usage(format!("source {source} is outside the box")))?;
    let map = PassageEngine::new(&env, mask)?.solve(target)?;
    let t = map.time(source)?;
    let path = map.geodesic(source)?;

    let mut csv = Vec::new();
    map.write_csv(&mut csv)?;
    write_atomic(&out.join("passage.csv"), &String::from_utf8(csv).expect("CSV is ASCII"))?;
    write_atomic(&out.join("geodesic.json"), &to_json(&path)?)?;
    if env.dim() == 2 {
        write_atomic(&out.join("heatmap.json"), &to_json(&HeatmapDocument::from_passage(&map))?)?;
    }
    println!("{t:.9}");
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    tool_version: &'a str,
    experiment: &'a str,
    seed0: u64,
    reps: usize,
    flagged: usize,
    workers: Option<usize>,
    started: String,
    finished: String,
    files: [&'a str; 3],
}

fn worker_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    match std::env::var("GEODESY_WORKERS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Failure::usage(format!("GEODESY_WORKERS={v:?} is not a count"))),
        _ => Ok(flag),
    }
}

fn cmd_experiment(config: &Path, workers: Option<usize>, results: &Path) -> CliResult {
    let bytes = fs::read(config).map_err(|e| Failure::usage(format!("{}: {e}", config.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::usage("config is not UTF-8"))?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| Failure::usage(format!("{}: {e}", config.display())))?;
    let workers = worker_count(workers)?;
    let hash = format!("{:x}", Sha256::digest(&bytes));

    let started = chrono::Utc::now().to_rfc3339();
    let output = experiments::run(&cfg, workers)?;
    let finished = chrono::Utc::now().to_rfc3339();
    if output.flagged_fraction() > 0.2 {
        return Err(Failure {
            code: 4,
            message: format!(
                "{} of {} replications touched the margin band (more than 20%)",
                output.flagged, output.reps
            ),
        });
    }

    let files = ["records.csv", "summary.json", "manifest.json"];
    let manifest = Manifest {
        config_hash: hash.clone(),
        tool_version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        seed0: cfg.seed0,
        reps: cfg.reps,
        flagged: output.flagged,
        workers,
        started,
        finished,
        files,
    };

    // Stage the whole run directory, then move it into place.
    fs::create_dir_all(results)?;
    let stage = tempfile::Builder::new().prefix(".staging-").tempdir_in(results)?;
    fs::write(stage.path().join(files[0]), &output.records_csv)?;
    fs::write(stage.path().join(files[1]), to_json(&output.summary)?)?;
    fs::write(stage.path().join(files[2]), to_json(&manifest)?)?;
    let dest = results.join(&hash[..16]);
    if dest.exists() {
        fs::remove_dir_all(&dest)?;
    }
    fs::rename(stage.path(), &dest)?;
    println!("{}", dest.display());
    Ok(())
}

fn cmd_render(input: &Path, out: &Path, highlight: Option<&Path>) -> CliResult {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())));
    let text = read(input)?;
    let paths = match highlight {
        None => Vec::new(),
        Some(p) => {
            let h = read(p)?;
            serde_json::from_str::<GeodesicPath>(&h)
                .map(|one| vec![one])
                .or_else(|_| serde_json::from_str::<Vec<GeodesicPath>>(&h))
                .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
        }
    };
    let svg = render::render_json(&text, &paths).map_err(|e| Failure::usage(e.to_string()))?;
    write_atomic(out, &svg)
}
