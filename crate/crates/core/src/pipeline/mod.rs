//! End-to-end driver: source to per-slice verdicts and metrics.

mod interp;
mod metrics;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cfa::{cfg_to_cfa, Cfa};
use crate::cfg::{build_call_graph, inline_functions, Cfg, CfgError, NodeId};
use crate::dataflow::{build_pdg, DataflowError, Pdg};
use crate::frontend::{parse_source, print_program, FrontendError};
use crate::optimizer::optimize_fixpoint;
use crate::slicer::{extract_criteria, refine_slice, slice, SliceCriterion, SliceError, SlicerKind};
use crate::solver::Solver;
use crate::verifier::{
    check_cfa, check_cfa_with, Counterexample, Limits, Precision, Safety, Search, VerifierError, Witness,
};

pub use interp::{interpret, run, ExecutionTrace, HavocStream, Store, TraceEnd};
pub use metrics::{emit_metrics, write_metrics, MetricsFormat, CSV_HEADER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slicer {
    None,
    Backward,
    Thin,
    Value,
}

impl Slicer {
    pub const ALL: [Slicer; 4] = [Slicer::None, Slicer::Backward, Slicer::Thin, Slicer::Value];

    pub fn kind(self) -> Option<SlicerKind> {
        match self {
            Slicer::None => None,
            Slicer::Backward => Some(SlicerKind::Backward),
            Slicer::Thin => Some(SlicerKind::Thin),
            Slicer::Value => Some(SlicerKind::Value),
        }
    }

    pub fn initial(self) -> char {
        match self {
            Slicer::None => 'N',
            Slicer::Backward => 'B',
            Slicer::Thin => 'T',
            Slicer::Value => 'V',
        }
    }
}

impl fmt::Display for Slicer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slicer::None => "NONE",
            Slicer::Backward => "BACKWARD",
            Slicer::Thin => "THIN",
            Slicer::Value => "VALUE",
        })
    }
}

impl FromStr for Slicer {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Slicer, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Slicer::None),
            "backward" => Ok(Slicer::Backward),
            "thin" => Ok(Slicer::Thin),
            "value" => Ok(Slicer::Value),
            _ => Err(ConfigError::Slicer(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown slicer `{0}` (expected none, backward, thin or value)")]
    Slicer(String),
    #[error("bad configuration abbreviation `{0}` (expected three letters like VFD)")]
    Abbreviation(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub slicer: Slicer,
    pub optimizations: bool,
    pub search: Search,
    /// Budget for each slice, refinement included.
    pub timeout: Option<Duration>,
    pub solver: Solver,
    /// Picks the abstract predicate to refine at random among those on the
    /// witness path. Without a seed the one closest to the error is taken.
    pub seed: Option<u64>,
    pub jobs: usize,
    pub max_arg_nodes: usize,
    pub max_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        let limits = Limits::default();
        RunConfig {
            slicer: Slicer::None,
            optimizations: false,
            search: Search::Bfs,
            timeout: limits.timeout,
            solver: Solver::Internal,
            seed: None,
            jobs: 1,
            max_arg_nodes: limits.max_arg_nodes,
            max_iterations: limits.max_iterations,
        }
    }
}

impl RunConfig {
    /// Three letters: slicer, optimizations, search (`VFD`).
    pub fn abbreviation(&self) -> String {
        let o = if self.optimizations { 'T' } else { 'F' };
        let s = match self.search {
            Search::Bfs => 'B',
            Search::Dfs => 'D',
        };
        format!("{}{o}{s}", self.slicer.initial())
    }

    pub fn parse_abbreviation(s: &str) -> Result<(Slicer, bool, Search), ConfigError> {
        let bad = || ConfigError::Abbreviation(s.to_string());
        let chars: Vec<char> = s.trim().to_ascii_uppercase().chars().collect();
        let [a, b, c] = chars[..] else {
            return Err(bad());
        };
        let slicer = match a {
            'N' => Slicer::None,
            'B' => Slicer::Backward,
            'T' => Slicer::Thin,
            'V' => Slicer::Value,
            _ => return Err(bad()),
        };
        let optimizations = match b {
            'T' => true,
            'F' => false,
            _ => return Err(bad()),
        };
        let search = match c {
            'B' => Search::Bfs,
            'D' => Search::Dfs,
            _ => return Err(bad()),
        };
        Ok((slicer, optimizations, search))
    }

    pub fn with_abbreviation(&self, s: &str) -> Result<RunConfig, ConfigError> {
        let (slicer, optimizations, search) = RunConfig::parse_abbreviation(s)?;
        Ok(RunConfig {
            slicer,
            optimizations,
            search,
            ..self.clone()
        })
    }

    /// All 16 slicer/optimization/search combinations on top of `self`.
    pub fn matrix(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for slicer in Slicer::ALL {
            for optimizations in [true, false] {
                for search in [Search::Bfs, Search::Dfs] {
                    out.push(RunConfig {
                        slicer,
                        optimizations,
                        search,
                        ..self.clone()
                    });
                }
            }
        }
        out
    }

    fn limits(&self, timeout: Option<Duration>) -> Limits {
        Limits {
            max_arg_nodes: self.max_arg_nodes,
            max_iterations: self.max_iterations,
            timeout,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error(transparent)]
    Dataflow(#[from] DataflowError),
    #[error(transparent)]
    Slice(#[from] SliceError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceReport {
    pub file: String,
    /// Position of the assertion among the file's criteria; none for the
    /// unsliced program.
    pub slice_no: Option<usize>,
    pub slicer: Slicer,
    pub optimizations: bool,
    pub search: Search,
    pub safe: Safety,
    pub init_locs: usize,
    pub init_edges: usize,
    /// Nodes of the last abstract reachability graph.
    pub arg_size: usize,
    /// Nodes over every exploration, refinements included.
    pub arg_total: usize,
    pub end_locs: usize,
    pub end_edges: usize,
    pub optimization_time_ms: u128,
    pub verification_time_ms: u128,
    pub slice_refinements: usize,
    pub cegar_iterations: usize,
    pub reason: Option<String>,
}

impl SliceReport {
    /// `file#n`, or just the file for the unsliced program.
    pub fn slice_id(&self) -> String {
        match self.slice_no {
            Some(n) => format!("{}#{n}", self.file),
            None => self.file.clone(),
        }
    }

    /// Row for a file that could not be analyzed.
    pub fn failed(file: &str, config: &RunConfig, reason: String) -> SliceReport {
        SliceReport {
            file: file.to_string(),
            slice_no: None,
            slicer: config.slicer,
            optimizations: config.optimizations,
            search: config.search,
            safe: Safety::Unknown,
            init_locs: 0,
            init_edges: 0,
            arg_size: 0,
            arg_total: 0,
            end_locs: 0,
            end_edges: 0,
            optimization_time_ms: 0,
            verification_time_ms: 0,
            slice_refinements: 0,
            cegar_iterations: 0,
            reason: Some(reason),
        }
    }
}

/// One verified unit with the artifacts behind its report.
#[derive(Clone, Debug)]
pub struct UnitResult {
    pub report: SliceReport,
    pub criterion: Option<SliceCriterion>,
    /// Graph that was verified last (the whole program or the final slice).
    pub cfg: Cfg,
    pub cfa: Cfa,
    pub counterexample: Option<Counterexample>,
}

impl UnitResult {
    pub fn witness(&self) -> Option<&Witness> {
        self.counterexample.as_ref().and_then(|c| c.witness.as_ref())
    }
}

/// Unsafe if any slice is, safe if all are (and there is at least one).
pub fn aggregate(verdicts: impl IntoIterator<Item = Safety>) -> Safety {
    let mut all_safe = true;
    let mut any = false;
    for v in verdicts {
        any = true;
        match v {
            Safety::Unsafe => return Safety::Unsafe,
            Safety::Unknown => all_safe = false,
            Safety::Safe => {}
        }
    }
    if all_safe && any {
        Safety::Safe
    } else {
        Safety::Unknown
    }
}

/// Runs the program on the witness and returns the trace.
pub fn replay_witness(cfg: &Cfg, witness: &Witness, max_steps: usize) -> ExecutionTrace {
    let stream = HavocStream::Sequence(witness.havocs.clone());
    run(cfg, &witness.initial, &stream, max_steps, |_, _| {})
}

/// The inlined and possibly optimized program.
pub fn prepare(source: &str, optimize: bool) -> Result<(Cfg, Duration), PipelineError> {
    let program = parse_source(source)?;
    let call_graph = build_call_graph(&program)?;
    let cfg = inline_functions(&program, &call_graph)?;
    let start = Instant::now();
    let (cfg, _) = optimize_fixpoint(&cfg, optimize);
    Ok((cfg, start.elapsed()))
}

/// Picks the abstract predicate to concretize from the witness path.
fn phi_on_path(cfa: &Cfa, cex: &Counterexample, seed: Option<u64>, round: usize) -> Option<NodeId> {
    let phis: Vec<NodeId> = cex
        .path
        .iter()
        .filter_map(|e| cfa.phi_edges.get(e).map(|(id, _)| *id))
        .collect();
    match seed {
        None => phis.last().copied(),
        Some(s) => {
            let mut rng = StdRng::seed_from_u64(s ^ round as u64);
            phis.choose(&mut rng).copied()
        }
    }
}

struct Unit<'a> {
    file: &'a str,
    config: &'a RunConfig,
    prep_time: Duration,
}

impl Unit<'_> {
    fn report(&self, slice_no: Option<usize>, init: &Cfa) -> SliceReport {
        SliceReport {
            file: self.file.to_string(),
            slice_no,
            slicer: self.config.slicer,
            optimizations: self.config.optimizations,
            search: self.config.search,
            safe: Safety::Unknown,
            init_locs: init.location_count(),
            init_edges: init.edge_count(),
            arg_size: 0,
            arg_total: 0,
            end_locs: init.location_count(),
            end_edges: init.edge_count(),
            optimization_time_ms: self.prep_time.as_millis(),
            verification_time_ms: 0,
            slice_refinements: 0,
            cegar_iterations: 0,
            reason: None,
        }
    }

    fn whole(&self, cfg: Cfg) -> UnitResult {
        let cfa = cfg_to_cfa(&cfg);
        let mut report = self.report(None, &cfa);
        let v = check_cfa(&cfa, self.config.search, &self.config.limits(self.config.timeout), &self.config.solver);
        report.safe = v.safe;
        report.arg_size = v.stats.arg_size;
        report.arg_total = v.stats.arg_total;
        report.cegar_iterations = v.stats.iterations;
        report.verification_time_ms = v.stats.time_ms;
        report.reason = v.reason.map(|r| r.to_string());
        UnitResult {
            report,
            criterion: None,
            cfg,
            cfa,
            counterexample: v.witness,
        }
    }

    fn sliced(
        &self,
        kind: SlicerKind,
        pdg: &Pdg,
        cfg: &Cfg,
        no: usize,
        criterion: &SliceCriterion,
    ) -> Result<UnitResult, SliceError> {
        let started = Instant::now();
        let deadline = self.config.timeout.map(|t| started + t);
        let mut opt_time = self.prep_time;
        let mut s = slice(kind, pdg, cfg, criterion)?;
        let mut cfa = cfg_to_cfa(&s.cfg);
        opt_time += started.elapsed();
        let mut report = self.report(Some(no), &cfa);
        let mut precision = Precision::default();
        loop {
            let remaining = deadline.map(|d| d.saturating_duration_since(Instant::now()));
            if remaining.is_some_and(|r| r.is_zero()) {
                report.safe = Safety::Unknown;
                report.reason = Some(VerifierError::Timeout.to_string());
                break;
            }
            let limits = self.config.limits(remaining);
            let v = check_cfa_with(&cfa, self.config.search, &limits, &self.config.solver, precision.restricted_to(&cfa));
            precision = v.precision;
            report.arg_size = v.stats.arg_size;
            report.arg_total += v.stats.arg_total;
            report.cegar_iterations += v.stats.iterations;
            report.verification_time_ms += v.stats.time_ms;
            report.safe = v.safe;
            report.reason = v.reason.map(|r| r.to_string());
            let phi = match (&v.witness, v.safe) {
                (Some(cex), Safety::Unsafe) if kind != SlicerKind::Backward => {
                    phi_on_path(&cfa, cex, self.config.seed, s.refinement_count)
                }
                _ => None,
            };
            let Some(phi) = phi else {
                report.end_locs = cfa.location_count();
                report.end_edges = cfa.edge_count();
                report.optimization_time_ms = opt_time.as_millis();
                report.slice_refinements = s.refinement_count;
                return Ok(UnitResult {
                    report,
                    criterion: Some(criterion.clone()),
                    cfg: s.cfg,
                    cfa,
                    counterexample: v.witness,
                });
            };
            let t = Instant::now();
            s = refine_slice(&s, pdg, cfg, phi, kind)?;
            cfa = cfg_to_cfa(&s.cfg);
            opt_time += t.elapsed();
        }
        report.end_locs = cfa.location_count();
        report.end_edges = cfa.edge_count();
        report.optimization_time_ms = opt_time.as_millis();
        report.slice_refinements = s.refinement_count;
        Ok(UnitResult {
            report,
            criterion: Some(criterion.clone()),
            cfg: s.cfg,
            cfa,
            counterexample: None,
        })
    }
}

/// Analyzes one source text under one configuration. Units come back in
/// slice order; a program without assertions has no slices.
pub fn analyze(source: &str, file: &str, config: &RunConfig) -> Result<Vec<UnitResult>, PipelineError> {
    let (cfg, prep_time) = prepare(source, config.optimizations)?;
    let Some(kind) = config.slicer.kind() else {
        let unit = Unit {
            file,
            config,
            prep_time,
        };
        return Ok(vec![unit.whole(cfg)]);
    };
    let t = Instant::now();
    let criteria = match extract_criteria(&cfg) {
        Ok(c) => c,
        Err(SliceError::NoAssert) => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let pdg = build_pdg(&cfg)?;
    let unit = Unit {
        file,
        config,
        prep_time: prep_time + t.elapsed(),
    };
    let results: Result<Vec<UnitResult>, SliceError> = criteria
        .par_iter()
        .enumerate()
        .map(|(no, c)| unit.sliced(kind, &pdg, &cfg, no, c))
        .collect();
    Ok(results?)
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn thread_pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

/// Reports for one file, in slice order.
pub fn run_pipeline(path: &Path, config: &RunConfig) -> Result<Vec<SliceReport>, PipelineError> {
    let source = read(path)?;
    let file = path.display().to_string();
    let units = thread_pool(config.jobs).install(|| analyze(&source, &file, config))?;
    Ok(units.into_iter().map(|u| u.report).collect())
}

/// Every `.c` file below `dir`, sorted.
pub fn corpus_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::from)?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "c") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Runs every configuration over every file. Files are named relative to
/// `root`; a file that fails gets one unknown row per configuration.
pub fn run_corpus(root: &Path, files: &[PathBuf], configs: &[RunConfig], jobs: usize) -> Vec<SliceReport> {
    let jobs_list: Vec<(&PathBuf, &RunConfig)> = files
        .iter()
        .flat_map(|f| configs.iter().map(move |c| (f, c)))
        .collect();
    let per_job: Vec<Vec<SliceReport>> = thread_pool(jobs).install(|| {
        jobs_list
            .par_iter()
            .map(|(path, config)| {
                let name = path
                    .strip_prefix(root)
                    .unwrap_or(path)
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                let result = read(path).and_then(|src| analyze(&src, &name, config));
                match result {
                    Ok(units) => units.into_iter().map(|u| u.report).collect(),
                    Err(e) => vec![SliceReport::failed(&name, config, e.to_string())],
                }
            })
            .collect()
    });
    per_job.into_iter().flatten().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpKind {
    Ast,
    Cfg,
    Pdg,
    Cfa,
}

impl FromStr for DumpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<DumpKind, String> {
        match s.to_ascii_lowercase().as_str() {
            "ast" => Ok(DumpKind::Ast),
            "cfg" => Ok(DumpKind::Cfg),
            "pdg" => Ok(DumpKind::Pdg),
            "cfa" => Ok(DumpKind::Cfa),
            _ => Err(format!("unknown dump `{s}` (expected ast, cfg, pdg or cfa)")),
        }
    }
}

/// Text form of one intermediate representation. CFG and PDG are Graphviz;
/// the CFA dump lists one automaton per slice when a slicer is set.
pub fn dump(source: &str, what: DumpKind, config: &RunConfig) -> Result<String, PipelineError> {
    if what == DumpKind::Ast {
        return Ok(print_program(&parse_source(source)?));
    }
    let (cfg, _) = prepare(source, config.optimizations)?;
    match what {
        DumpKind::Ast => unreachable!(),
        DumpKind::Cfg => Ok(cfg.to_dot()),
        DumpKind::Pdg => Ok(build_pdg(&cfg)?.to_dot(&cfg)),
        DumpKind::Cfa => {
            let Some(kind) = config.slicer.kind() else {
                return Ok(cfg_to_cfa(&cfg).to_text());
            };
            let pdg = build_pdg(&cfg)?;
            let criteria = match extract_criteria(&cfg) {
                Ok(c) => c,
                Err(SliceError::NoAssert) => Vec::new(),
                Err(e) => return Err(e.into()),
            };
            let mut out = String::new();
            for (no, c) in criteria.iter().enumerate() {
                let s = slice(kind, &pdg, &cfg, c)?;
                out.push_str(&format!("# slice {no} ({kind}, criterion {})\n", c.instruction));
                out.push_str(&cfg_to_cfa(&s.cfg).to_text());
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests;
