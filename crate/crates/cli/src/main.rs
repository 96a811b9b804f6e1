use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cfaforge::cfg::InstrKind;
use cfaforge::dataflow::build_pdg;
use cfaforge::pipeline::{
    aggregate, analyze, corpus_files, dump, prepare, run_corpus, write_metrics, DumpKind,
    MetricsFormat, RunConfig, SliceReport, Slicer,
};
use cfaforge::slicer::{extract_criteria, slice, SliceError};
use cfaforge::solver::Solver;
use cfaforge::verifier::{Safety, Search};

const EXIT_USAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "cfaforge", version, about = "Slice, lower and verify restricted C programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify every assertion of the given files.
    Verify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Print the slice of each assertion.
    Slice {
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print an intermediate representation.
    Dump {
        file: PathBuf,
        #[arg(long, value_parser = parse_dump)]
        dump: DumpKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a configuration matrix over every `.c` file below a directory.
    Corpus {
        dir: PathBuf,
        /// Configurations to run, like `VFD`; defaults to all 16.
        #[arg(long = "config", value_name = "ABBR")]
        configs: Vec<String>,
        #[command(flatten)]
        limits: LimitArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Three-letter configuration such as VFD (slicer, optimizations, search).
    #[arg(long, conflicts_with_all = ["slicer", "optimize", "search"])]
    config: Option<String>,
    #[arg(long, value_parser = parse_slicer)]
    slicer: Option<Slicer>,
    /// Enable constant folding, propagation and dead-branch elimination.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    optimize: Option<bool>,
    #[arg(long, value_parser = parse_search)]
    search: Option<Search>,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Args, Debug)]
struct LimitArgs {
    /// Seconds per slice; 0 disables the limit.
    #[arg(long, default_value_t = 180)]
    timeout: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Refine a random abstract predicate of the witness, seeded.
    #[arg(long)]
    seed: Option<u64>,
    /// External SMT-LIB solver command, e.g. "z3 -in -smt2".
    #[arg(long, env = "CFAFORGE_SOLVER")]
    solver_cmd: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    max_arg_nodes: usize,
    #[arg(long, default_value_t = 200)]
    max_cegar_iters: usize,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Metrics file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: MetricsFormat,
}

fn parse_slicer(s: &str) -> Result<Slicer, String> {
    s.parse().map_err(|e: cfaforge::pipeline::ConfigError| e.to_string())
}

fn parse_search(s: &str) -> Result<Search, String> {
    s.parse()
}

fn parse_dump(s: &str) -> Result<DumpKind, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<MetricsFormat, String> {
    s.parse()
}

impl LimitArgs {
    fn base(&self) -> RunConfig {
        let timeout = (self.timeout > 0).then(|| Duration::from_secs(self.timeout));
        let solver = match &self.solver_cmd {
            Some(cmd) if !cmd.trim().is_empty() => {
                Solver::external(cmd, timeout.unwrap_or(Duration::from_secs(60)))
            }
            _ => Solver::Internal,
        };
        RunConfig {
            timeout,
            solver,
            seed: self.seed,
            jobs: self.jobs.max(1),
            max_arg_nodes: self.max_arg_nodes,
            max_iterations: self.max_cegar_iters,
            ..RunConfig::default()
        }
    }
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = self.limits.base();
        if let Some(abbr) = &self.config {
            c = c.with_abbreviation(abbr)?;
        }
        if let Some(s) = self.slicer {
            c.slicer = s;
        }
        if let Some(o) = self.optimize {
            c.optimizations = o;
        }
        if let Some(s) = self.search {
            c.search = s;
        }
        Ok(c)
    }
}

/// Failure that maps to the usage exit code.
#[derive(Debug)]
struct InputError(anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| InputError(e).into())
}

fn read_source(path: &Path) -> Result<String> {
    input(std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())))
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn exit_code(safe: Safety) -> u8 {
    match safe {
        Safety::Safe => 0,
        Safety::Unsafe => 1,
        Safety::Unknown => 2,
    }
}

fn verify(files: &[PathBuf], config: &RunConfig, output: &OutputArgs) -> Result<u8> {
    let pool = rayon_pool(config.jobs)?;
    let mut reports: Vec<SliceReport> = Vec::new();
    let mut verdicts = Vec::new();
    for path in files {
        let source = read_source(path)?;
        let name = path.display().to_string();
        let units = pool
            .install(|| analyze(&source, &name, config))
            .map_err(|e| InputError(anyhow::Error::new(e).context(name.clone())))?;
        if units.is_empty() {
            eprintln!("{name}: no assertions");
            verdicts.push(Safety::Safe);
        }
        for u in &units {
            verdicts.push(u.report.safe);
            match (u.report.safe, &u.report.reason) {
                (Safety::Unsafe, _) => {
                    eprintln!("{}: assertion can fail", u.report.slice_id());
                    if let Some(w) = u.witness() {
                        eprintln!("  witness: {}", serde_json::to_string(w)?);
                    }
                }
                (Safety::Unknown, Some(r)) => eprintln!("{}: unknown ({r})", u.report.slice_id()),
                _ => {}
            }
        }
        reports.extend(units.into_iter().map(|u| u.report));
    }
    write_metrics(&reports, output.format, open_out(&output.out)?)?;
    let verdict = aggregate(verdicts);
    eprintln!("verdict: {verdict}");
    Ok(exit_code(verdict))
}

fn rayon_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

fn print_slices(path: &Path, config: &RunConfig) -> Result<u8> {
    let source = read_source(path)?;
    let (cfg, _) = input(prepare(&source, config.optimizations).map_err(Into::into))?;
    let kind = config.slicer.kind().unwrap_or(cfaforge::slicer::SlicerKind::Backward);
    let criteria = match extract_criteria(&cfg) {
        Ok(c) => c,
        Err(SliceError::NoAssert) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let pdg = build_pdg(&cfg)?;
    let mut out = io::stdout().lock();
    for (no, c) in criteria.iter().enumerate() {
        let s = slice(kind, &pdg, &cfg, c)?;
        writeln!(out, "{}#{no} {kind} criterion {}", path.display(), c.instruction)?;
        let mut shown = s.statements();
        shown.extend(s.abstracted.iter().copied());
        for n in shown {
            let i = cfg.instr(n);
            let mark = if s.abstracted.contains(&n) { "phi " } else { "" };
            if matches!(i.kind, InstrKind::Skip) {
                continue;
            }
            writeln!(out, "  {n:>5} line {:>3}: {mark}{}", i.line, i.kind)?;
        }
    }
    Ok(0)
}

fn corpus(dir: &Path, configs: &[String], limits: &LimitArgs, output: &OutputArgs) -> Result<u8> {
    if !dir.is_dir() {
        return Err(InputError(anyhow::anyhow!("{} is not a directory", dir.display())).into());
    }
    let base = limits.base();
    let matrix = if configs.is_empty() {
        base.matrix()
    } else {
        input(
            configs
                .iter()
                .map(|c| base.with_abbreviation(c).map_err(Into::into))
                .collect::<Result<Vec<_>>>(),
        )?
    };
    let files = corpus_files(dir)?;
    let reports = run_corpus(dir, &files, &matrix, base.jobs);
    write_metrics(&reports, output.format, open_out(&output.out)?)?;
    let failed = reports.iter().filter(|r| r.safe == Safety::Unknown).count();
    eprintln!("{} files, {} rows, {failed} unknown", files.len(), reports.len());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Verify { files, run, output } => verify(&files, &input(run.config())?, &output),
        Command::Slice { file, run } => print_slices(&file, &input(run.config())?),
        Command::Dump { file, dump: what, run } => {
            let config = input(run.config())?;
            let source = read_source(&file)?;
            let text = input(dump(&source, what, &config).map_err(Into::into))?;
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(0)
        }
        Command::Corpus {
            dir,
            configs,
            limits,
            output,
        } => corpus(&dir, &configs, &limits, &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
