mod config;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use miqpcert::bnbcert::{certify, CertOptions, CertPartition};
use miqpcert::measure::MeasureRegistry;
use miqpcert::numerics::min_eigenvalue;
use miqpcert::problem::{random_mpmiqp, ProblemFile};
use miqpcert::validate::validate;
use miqpcert::{solve_miqp, Error, Result};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "miqpcert", version, about = "Branch-and-bound MIQP solver with parametric complexity certification")]
struct Cli {
    /// TOML file with default settings; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate random problem files
    Gen {
        /// Base seed; instance k uses seed + k
        #[arg(long)]
        seed: Option<u64>,
        /// Number of problems to write
        #[arg(long)]
        count: Option<usize>,
        /// Continuous variables
        #[arg(long)]
        nc: Option<usize>,
        /// Binary variables
        #[arg(long)]
        nb: Option<usize>,
        /// Inequality constraints
        #[arg(long)]
        m: Option<usize>,
        /// Parameters
        #[arg(long)]
        ntheta: Option<usize>,
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Solve one instance with branch and bound
    Solve {
        #[arg(long, value_name = "FILE")]
        problem: PathBuf,
        /// Parameter value, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        theta: Vec<f64>,
    },
    /// Certify the worst-case complexity over the parameter set
    Certify {
        #[arg(long, value_name = "FILE")]
        problem: PathBuf,
        /// Complexity measure: iterations or nodes
        #[arg(long)]
        measure: Option<String>,
        /// Partition output file
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Worker threads
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare a partition with the online solver on a grid
    Validate {
        #[arg(long, value_name = "FILE")]
        problem: PathBuf,
        #[arg(long, value_name = "FILE")]
        partition: PathBuf,
        /// Grid points per parameter axis
        #[arg(long)]
        grid: Option<usize>,
        /// Per-point CSV output
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// Worker threads
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write region polygons (two parameters only) for external plotting
    ExportPlot {
        #[arg(long, value_name = "FILE")]
        partition: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Validation CSV to include as scatter samples
        #[arg(long, value_name = "FILE")]
        scatter: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Validation(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Usage(_) => 1,
        Failure::Validation(_) => 2,
        Failure::Lib(e) => match e {
            Error::NotCovered(_) => 2,
            Error::Parse { .. } => 3,
            Error::NotPositiveDefinite { .. }
            | Error::RankDeficientWorkingSet { .. }
            | Error::NumericalFailure(_)
            | Error::IterationCapExceeded { .. }
            | Error::NodeCapExceeded { .. }
            | Error::EmptyRegion
            | Error::UnboundedRegion => 4,
            _ => 1,
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Validation(m) => eprintln!("error: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Gen {
            seed,
            count,
            nc,
            nb,
            m,
            ntheta,
            out,
        } => {
            let args = GenArgs {
                seed: seed.or(cfg.seed).unwrap_or(1),
                count: count.or(cfg.count).unwrap_or(1),
                n_c: nc.or(cfg.n_c).unwrap_or(2),
                n_b: nb.or(cfg.n_b).unwrap_or(4),
                m: m.or(cfg.m).unwrap_or(6),
                n_theta: ntheta.or(cfg.n_theta).unwrap_or(2),
                out: out.or(cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from(".")),
            };
            let check = RunConfig {
                count: Some(args.count),
                n_c: Some(args.n_c),
                n_b: Some(args.n_b),
                m: Some(args.m),
                n_theta: Some(args.n_theta),
                ..RunConfig::default()
            };
            check.check().map_err(|e| Failure::Usage(e.to_string()))?;
            cmd_gen(&args)
        }
        Command::Solve { problem, theta } => cmd_solve(&problem, &theta),
        Command::Certify {
            problem,
            measure,
            out,
            workers,
        } => {
            let measure = measure.or(cfg.measure.clone()).unwrap_or_else(|| "iterations".into());
            let opts = CertOptions {
                workers: positive("workers", workers.or(cfg.workers).unwrap_or(1))?,
                dominance: cfg.dominance(),
            };
            cmd_certify(&problem, &measure, &out, &opts)
        }
        Command::Validate {
            problem,
            partition,
            grid,
            csv,
            workers,
        } => {
            let grid = positive("grid", grid.or(cfg.grid).unwrap_or(100))?;
            let workers = positive("workers", workers.or(cfg.workers).unwrap_or(1))?;
            cmd_validate(&problem, &partition, grid, csv.as_deref(), workers)
        }
        Command::ExportPlot { partition, out, scatter } => cmd_export_plot(&partition, &out, scatter.as_deref()),
    }
}

fn positive(flag: &str, v: usize) -> std::result::Result<usize, Failure> {
    if v == 0 {
        return Err(Failure::Usage(format!("--{flag} must be at least 1")));
    }
    Ok(v)
}

struct GenArgs {
    seed: u64,
    count: usize,
    n_c: usize,
    n_b: usize,
    m: usize,
    n_theta: usize,
    out: PathBuf,
}

fn cmd_gen(a: &GenArgs) -> std::result::Result<(), Failure> {
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    for k in 0..a.count {
        let seed = a.seed.wrapping_add(k as u64);
        let p = random_mpmiqp(seed, a.n_c, a.n_b, a.m, a.n_theta);
        let path = a.out.join(format!("problem_{seed:04}.json"));
        ProblemFile {
            problem: p.clone(),
            relaxations: Vec::new(),
        }
        .save(&path)?;
        println!(
            "{}  seed={seed} n={} n_b={} m={} n_theta={} H={}x{} lambda_min(H)={:.6e}",
            path.display(),
            p.n(),
            p.n_b(),
            p.m(),
            p.n_theta(),
            p.h.rows(),
            p.h.cols(),
            min_eigenvalue(&p.h)
        );
    }
    Ok(())
}

fn cmd_solve(problem: &Path, theta: &[f64]) -> std::result::Result<(), Failure> {
    let p = ProblemFile::load(problem)?.problem;
    if theta.len() != p.n_theta() {
        return Err(Error::UnsupportedDimension {
            expected: p.n_theta(),
            actual: theta.len(),
        }
        .into());
    }
    let t = solve_miqp(&p, theta)?;
    println!("J_best          {:.12e}", t.j_best);
    match &t.x_best {
        Some(x) => println!("x_best          {}", join(x.iter().map(|v| format!("{v:.9}")))),
        None => println!("x_best          none (infeasible)"),
    }
    println!("total_kappa     {}", t.total_kappa);
    println!("nodes_explored  {}", t.nodes_explored());
    println!();
    println!("{:>4}  {:<24} {:>5}  {:>18}  cut", "#", "node", "kappa", "objective");
    for (i, n) in t.nodes.iter().enumerate() {
        println!(
            "{:>4}  {:<24} {:>5}  {:>18.10e}  {:?}",
            i,
            n.node.to_string(),
            n.kappa,
            n.objective,
            n.cut
        );
    }
    Ok(())
}

fn cmd_certify(problem: &Path, measure: &str, out: &Path, opts: &CertOptions) -> std::result::Result<(), Failure> {
    let p = ProblemFile::load(problem)?.problem;
    let m = MeasureRegistry::with_builtins().get(measure)?;
    info!("certifying {} with measure {}", problem.display(), m.name());
    let part = certify(&p, m.as_ref(), opts)?;
    part.save(out)?;
    let s = &part.stats;
    println!("measure         {}", part.measure);
    println!("kappa_max       {}", s.kappa_max);
    println!("regions         {}", s.region_count);
    println!("t_cert_seconds  {:.3}", s.t_cert_seconds);
    println!("qp_certified    {}", s.engine_iterations - s.region_count);
    println!("dominance_cuts  {}", s.dominance_cuts);
    println!("warnings        {}", part.warnings.len());
    Ok(())
}

fn cmd_validate(
    problem: &Path,
    partition: &Path,
    grid: usize,
    csv: Option<&Path>,
    workers: usize,
) -> std::result::Result<(), Failure> {
    let p = ProblemFile::load(problem)?.problem;
    let part = CertPartition::load(partition)?;
    let m = MeasureRegistry::with_builtins().get(&part.measure)?;
    let rep = validate(&p, &part, m.as_ref(), grid, workers)?;
    if let Some(path) = csv {
        let f = File::create(path).map_err(Error::from)?;
        rep.write_csv(BufWriter::new(f))?;
    }
    let fmt_gap = |g: Option<i64>| g.map_or("n/a".to_string(), |v| v.to_string());
    println!("measure         {}", part.measure);
    println!("points          {}", rep.points.len());
    println!("not_covered     {}", rep.not_covered.len());
    println!("min_gap         {}", fmt_gap(rep.min_gap()));
    println!("max_gap         {}", fmt_gap(rep.max_gap()));
    println!("equality_rate   {:.4}", rep.equality_rate());
    for (gap, count) in rep.gap_histogram() {
        println!("  gap {gap:>4}: {count}");
    }
    if let Some(theta) = rep.not_covered.first() {
        return Err(Error::NotCovered(theta.clone()).into());
    }
    if !rep.passed() {
        return Err(Failure::Validation(format!(
            "negative gap {} found",
            fmt_gap(rep.min_gap())
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct PlotData {
    measure: String,
    kappa_max: u64,
    regions: Vec<PlotRegion>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    samples: Vec<PlotSample>,
}

#[derive(Serialize)]
struct PlotRegion {
    path_id: String,
    kappa: u64,
    vertices: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct PlotSample {
    theta: [f64; 2],
    kappa_cert: u64,
    kappa_online: u64,
    gap: i64,
}

fn cmd_export_plot(partition: &Path, out: &Path, scatter: Option<&Path>) -> std::result::Result<(), Failure> {
    let part = CertPartition::load(partition)?;
    if part.n_theta != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            actual: part.n_theta,
        }
        .into());
    }
    let mut regions = Vec::with_capacity(part.regions.len());
    for r in &part.regions {
        let vertices = r.region.vertices_2d()?.into_iter().map(|v| [v[0], v[1]]).collect();
        regions.push(PlotRegion {
            path_id: r.path_id.clone(),
            kappa: r.kappa,
            vertices,
        });
    }
    let samples = match scatter {
        Some(path) => read_scatter(path)?,
        None => Vec::new(),
    };
    let data = PlotData {
        measure: part.measure.clone(),
        kappa_max: part.kappa_max(),
        regions,
        samples,
    };
    let mut w = BufWriter::new(File::create(out).map_err(Error::from)?);
    serde_json::to_writer_pretty(&mut w, &data).map_err(Error::from)?;
    writeln!(w).map_err(Error::from)?;
    println!("{} regions written to {}", data.regions.len(), out.display());
    Ok(())
}

fn read_scatter(path: &Path) -> Result<Vec<PlotSample>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let bad = |line: usize, message: String| Error::Parse {
        line,
        column: 0,
        message,
    };
    let mut lines = f.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != "theta1,theta2,kappa_cert,kappa_online,gap" {
        return Err(bad(1, format!("unexpected header `{header}`")));
    }
    for (i, line) in lines.enumerate() {
        let line = line?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(i + 2, format!("expected 5 columns, found {}", cols.len())));
        }
        let num = |k: usize| -> Result<f64> {
            cols[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(i + 2, format!("column {}: {e}", k + 1)))
        };
        let int = |k: usize| -> Result<i64> {
            cols[k]
                .trim()
                .parse::<i64>()
                .map_err(|e| bad(i + 2, format!("column {}: {e}", k + 1)))
        };
        out.push(PlotSample {
            theta: [num(0)?, num(1)?],
            kappa_cert: int(2)? as u64,
            kappa_online: int(3)? as u64,
            gap: int(4)?,
        });
    }
    Ok(out)
}

fn join(it: impl Iterator<Item = String>) -> String {
    it.collect::<Vec<_>>().join(", ")
}
