mod artifacts;
mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use erdos_sep::analysis::{eps_star, DEFAULT_GRID};
use erdos_sep::finite_field::DEFAULT_TABLE_BOUND;
use erdos_sep::manifest::RunManifest;
use erdos_sep::optimizer::OptimizerConfig;
use erdos_sep::pipeline::DEFAULT_TOLERANCE;
use erdos_sep::profile::{CoefficientSpec, DEFAULT_EPSILON};

use artifacts::{sha256_hex, Destination};
use commands::*;

const EXIT_VERIFY: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "erdos-sep", version, about = "Point sets with separated distances from Singer difference sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArgs {
    /// Directory for output files and manifest.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpecArgs {
    /// One-frequency parameter; c_1 = 1 - epsilon.
    #[arg(long, conflicts_with = "spec")]
    epsilon: Option<f64>,
    /// Coefficient spec JSON file.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<CoefficientSpec> {
        if let Some(path) = &self.spec {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(CoefficientSpec::from_json_str(&text)?);
        }
        let spec = CoefficientSpec::eps_family(self.epsilon.unwrap_or(DEFAULT_EPSILON));
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Singer difference set modulo q^2 + q + 1.
    Singer {
        #[arg(long)]
        q: u64,
        /// Write the set to this JSON file (manifest alongside).
        #[arg(long, value_name = "FILE", conflicts_with = "out")]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TABLE_BOUND)]
        table_bound: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Build, scale and verify the point set for one q.
    Construct {
        #[arg(long)]
        q: u64,
        #[command(flatten)]
        spec: SpecArgs,
        /// Keep the unscaled embedding.
        #[arg(long)]
        no_scale: bool,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        /// Truncation depth for the weights.
        #[arg(long)]
        depth: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_TABLE_BOUND)]
        table_bound: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check that sorted distances differ pairwise by at least one.
    Verify {
        /// CSV with columns s,t,u,distance.
        #[arg(long, value_name = "FILE", conflicts_with = "points", required_unless_present = "points")]
        distances: Option<PathBuf>,
        /// Point CSV as written by `construct`.
        #[arg(long, value_name = "FILE")]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Convergence table of diam/m and diam/n^2 over several q.
    Table {
        /// Comma-separated prime powers.
        #[arg(long = "q-list", alias = "q", value_delimiter = ',', required = true)]
        q_list: Vec<u64>,
        /// Use the largest epsilon that keeps the profile concave.
        #[arg(long, conflicts_with_all = ["epsilon", "spec"])]
        eps_star: bool,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Concavity certificate for a coefficient spec.
    Certify {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Minimize the asymptotic constant over low odd frequencies.
    Optimize {
        /// Optimizer config JSON file.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        frequencies: Option<Vec<u64>>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Parameters of the field GF(q^3) used for the Singer set.
    Field {
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = DEFAULT_TABLE_BOUND)]
        table_bound: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Re-run a recorded command and compare output hashes.
    Replay {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
    },
}

fn resolve(command: Command) -> Result<(Params, Option<Destination>)> {
    let dest = |out: OutArgs| out.out.as_deref().map(Destination::directory);
    Ok(match command {
        Command::Singer {
            q,
            json,
            table_bound,
            out,
        } => {
            let (dest, file_name) = match json {
                Some(path) => {
                    let (d, name) = Destination::file(&path)?;
                    (Some(d), name)
                }
                None => (dest(out), "difference_set.json".to_string()),
            };
            (
                Params::Singer(SingerParams {
                    q,
                    table_bound,
                    file_name,
                }),
                dest,
            )
        }
        Command::Construct {
            q,
            spec,
            no_scale,
            tol,
            depth,
            table_bound,
            out,
        } => (
            Params::Construct(ConstructParams {
                q,
                spec: spec.resolve()?,
                scale: !no_scale,
                tolerance: tol,
                depth,
                table_bound,
            }),
            dest(out),
        ),
        Command::Verify {
            distances,
            points,
            tol,
            out,
        } => {
            let absolute = |p: PathBuf| fs::canonicalize(&p).with_context(|| format!("resolving {}", p.display()));
            let input = match (distances, points) {
                (Some(d), _) => VerifyInput::Distances(absolute(d)?),
                (None, Some(p)) => VerifyInput::Points(absolute(p)?),
                (None, None) => bail!("one of --distances or --points is required"),
            };
            (Params::Verify(VerifyParams { input, tolerance: tol }), dest(out))
        }
        Command::Table {
            q_list,
            eps_star: use_star,
            spec,
            out,
        } => {
            let spec = if use_star {
                CoefficientSpec::eps_family(eps_star())
            } else {
                spec.resolve()?
            };
            (Params::Table(TableParams { qs: q_list, spec }), dest(out))
        }
        Command::Certify {
            spec,
            grid,
            margin,
            out,
        } => (
            Params::Certify(CertifyParams {
                spec: spec.resolve()?,
                grid,
                margin,
            }),
            dest(out),
        ),
        Command::Optimize {
            config,
            seed,
            grid,
            frequencies,
            out,
        } => {
            let mut c = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    OptimizerConfig::from_json_str(&text)?
                }
                None => OptimizerConfig::default(),
            };
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(g) = grid {
                c.grid_size = g;
            }
            if let Some(f) = frequencies {
                c.frequencies = f;
            }
            c.validate()?;
            (Params::Optimize(OptimizeParams { config: c }), dest(out))
        }
        Command::Field { q, table_bound, out } => (Params::Field(FieldParams { q, table_bound }), dest(out)),
        Command::Replay { .. } => unreachable!("handled before resolution"),
    })
}

fn execute(params: Params, dest: Option<Destination>) -> Result<bool> {
    let start = Instant::now();
    let outcome = params.run()?;
    print!("{}", outcome.stdout);
    if let Some(dest) = dest {
        let (command, parameters) = params.split()?;
        let manifest = RunManifest {
            command,
            parameters,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: params.seed(),
            outputs: Vec::new(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        let path = dest.write(&outcome.artifacts, manifest)?;
        eprintln!("manifest: {}", path.display());
    }
    Ok(outcome.passed)
}

fn replay(manifest_path: &Path) -> Result<bool> {
    let text = fs::read_to_string(manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest = RunManifest::from_json_str(&text)?;
    let params = Params::join(&manifest.command, manifest.parameters.clone())?;
    let outcome = params.run()?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut ok = outcome.artifacts.len() == manifest.outputs.len();
    for rec in &manifest.outputs {
        let fresh = outcome.artifacts.iter().find(|a| a.name == rec.path);
        let status = match fresh {
            None => "missing",
            Some(a) if sha256_hex(&a.bytes) != rec.sha256 => "differs",
            Some(_) => match fs::read(base.join(&rec.path)) {
                Ok(bytes) if sha256_hex(&bytes) != rec.sha256 => "file-changed",
                _ => "identical",
            },
        };
        ok &= status == "identical";
        println!("{} {}", rec.path, status);
    }
    println!("replay={}", if ok { "identical" } else { "mismatch" });
    Ok(ok)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ERDOS_SEP_THREADS") {
        let n: usize = v.parse().with_context(|| format!("ERDOS_SEP_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Replay { manifest } => replay(&manifest),
        other => resolve(other).and_then(|(params, dest)| execute(params, dest)),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
