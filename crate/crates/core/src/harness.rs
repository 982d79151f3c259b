//! Simulation study driver: scaling scenarios, per-trial selection with EBIC
//! and cross-validation, PSR/FDR bookkeeping, exhaustive search for small
//! graphs, and the file formats used by the command line tool.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chordal::enumerate_decomposable;
use crate::error::{Error, Result};
use crate::glasso::{glasso_path, DEFAULT_PATH_LENGTH};
use crate::mle::max_loglik;
use crate::model::{sample_covariance, EdgeSet, SampleCov};
use crate::selection::{default_fold_count, kfold_cv_select, select_min, ScoredModel, GAMMA_GRID};
use crate::synthetic::{sample_mvn, Family, TrueModelSpec};

pub const CSV_HEADER: [&str; 12] = [
    "scenario",
    "family",
    "kappa",
    "n",
    "p",
    "method",
    "gamma",
    "trial",
    "psr",
    "fdr",
    "num_selected",
    "runtime_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    Ebic,
    Cv,
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodKind::Ebic => "ebic",
            MethodKind::Cv => "cv",
        })
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ebic" => Ok(MethodKind::Ebic),
            "cv" => Ok(MethodKind::Cv),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// A selection rule applied to the candidate graphs of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Ebic { gamma: f64 },
    Cv,
}

impl Method {
    pub fn kind(&self) -> MethodKind {
        match self {
            Method::Ebic { .. } => MethodKind::Ebic,
            Method::Cv => MethodKind::Cv,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Method::Ebic { gamma } => Some(*gamma),
            Method::Cv => None,
        }
    }

    fn canonical_cmp(&self, other: &Method) -> Ordering {
        self.kind().cmp(&other.kind()).then_with(|| {
            let a = self.gamma().unwrap_or(0.0);
            let b = other.gamma().unwrap_or(0.0);
            a.total_cmp(&b)
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ebic { gamma } => write!(f, "ebic(gamma={gamma})"),
            Method::Cv => f.write_str("cv"),
        }
    }
}

/// Dimension paired with sample size `n`: `round(10·(n/100)^κ)`.
pub fn dimension_for(n: usize, kappa: f64) -> usize {
    (10.0 * (n as f64 / 100.0).powf(kappa)).round() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub family: Family,
    pub kappa: f64,
    pub n_values: Vec<usize>,
    pub gammas: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub methods: Vec<MethodKind>,
    pub path_length: usize,
    /// Fold count for cross-validation; `min(100, n)` when absent.
    pub cv_folds: Option<usize>,
}

impl ScenarioConfig {
    /// 20 trials at `n ∈ {100, 200, 400}`, EBIC only.
    pub fn desk(family: Family, kappa: f64) -> Self {
        Self {
            family,
            kappa,
            n_values: vec![100, 200, 400],
            gammas: GAMMA_GRID.to_vec(),
            trials: 20,
            base_seed: 0,
            methods: vec![MethodKind::Ebic],
            path_length: DEFAULT_PATH_LENGTH,
            cv_folds: None,
        }
    }

    /// 100 trials at `n ∈ {100, 200, 400, 800}`.
    pub fn full_scale(family: Family, kappa: f64) -> Self {
        Self {
            n_values: vec![100, 200, 400, 800],
            trials: 100,
            ..Self::desk(family, kappa)
        }
    }

    pub fn scenario_id(&self) -> String {
        format!("{}_kappa{}", self.family, self.kappa)
    }

    pub fn p_for(&self, n: usize) -> usize {
        dimension_for(n, self.kappa)
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut methods = Vec::new();
        if self.methods.contains(&MethodKind::Ebic) {
            methods.extend(self.gammas.iter().map(|&gamma| Method::Ebic { gamma }));
        }
        if self.methods.contains(&MethodKind::Cv) {
            methods.push(Method::Cv);
        }
        methods
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.n_values.is_empty() || self.trials == 0 {
            return Err(Error::InvalidArgument("need at least one n and one trial".into()));
        }
        let min_p = match self.family {
            Family::Chain => 2,
            Family::DoubleChain => 3,
        };
        for &n in &self.n_values {
            let p = self.p_for(n);
            if p < min_p {
                return Err(Error::InvalidArgument(format!(
                    "n = {n} gives p = {p}, below {min_p} for the {} family",
                    self.family
                )));
            }
        }
        if self.methods().is_empty() {
            return Err(Error::InvalidArgument("no selection method configured".into()));
        }
        if self.path_length < 2 {
            return Err(Error::InvalidArgument("path needs at least two penalties".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub psr: f64,
    pub fdr: f64,
}

/// One (trial, method) outcome. `metrics` is absent when the trial failed.
/// The selected graph is kept in memory only; it is not part of the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub scenario: String,
    pub family: Family,
    pub kappa: f64,
    pub n: usize,
    pub p: usize,
    pub method: Method,
    pub trial: usize,
    pub metrics: Option<Metrics>,
    pub num_selected: Option<usize>,
    pub runtime_ms: u64,
    pub selected: Option<EdgeSet>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.metrics.is_none()
    }

    fn canonical_cmp(&self, other: &TrialRecord) -> Ordering {
        self.scenario
            .cmp(&other.scenario)
            .then(self.n.cmp(&other.n))
            .then_with(|| self.method.canonical_cmp(&other.method))
            .then(self.trial.cmp(&other.trial))
    }
}

/// Positive selection rate `|sel ∩ truth|/|truth|` and false discovery rate
/// `|sel \ truth|/|sel|`, with FDR 0 for an empty selection.
pub fn psr_fdr(selected: &EdgeSet, truth: &EdgeSet) -> Result<Metrics> {
    if selected.p() != truth.p() {
        return Err(Error::DimensionMismatch {
            expected: truth.p(),
            found: selected.p(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("true graph has no edges".into()));
    }
    let hits = selected.intersection_len(truth);
    let psr = hits as f64 / truth.len() as f64;
    let fdr = if selected.is_empty() {
        0.0
    } else {
        selected.difference_len(truth) as f64 / selected.len() as f64
    };
    Ok(Metrics { psr, fdr })
}

struct TrialContext<'a> {
    cfg: &'a ScenarioConfig,
    truth: &'a TrueModelSpec,
    n: usize,
    trial: usize,
}

impl TrialContext<'_> {
    fn record(&self, method: Method, selected: Option<EdgeSet>, runtime_ms: u64) -> TrialRecord {
        let metrics = selected.as_ref().map(|s| {
            psr_fdr(s, &self.truth.edges).expect("selection and truth share the dimension")
        });
        TrialRecord {
            scenario: self.cfg.scenario_id(),
            family: self.cfg.family,
            kappa: self.cfg.kappa,
            n: self.n,
            p: self.truth.p(),
            method,
            trial: self.trial,
            num_selected: selected.as_ref().map(EdgeSet::len),
            metrics,
            runtime_ms,
            selected,
        }
    }
}

/// Candidate graphs of one data set: distinct supports along the glasso path
/// with their refitted maximized log-likelihoods. Supports whose refit fails
/// are dropped with a warning.
pub fn path_candidates(s: &SampleCov, path_length: usize) -> Result<Vec<(EdgeSet, f64)>> {
    let path = glasso_path(s, path_length)?;
    let fits: Vec<(EdgeSet, f64)> = path
        .distinct_models()
        .into_par_iter()
        .filter_map(|edges| match max_loglik(s, &edges) {
            Ok(l) => Some((edges, l)),
            Err(e) => {
                log::warn!("dropping candidate {edges}: {e}");
                None
            }
        })
        .collect();
    if fits.is_empty() {
        return Err(Error::NotEstimable("no path candidate could be refitted".into()));
    }
    Ok(fits)
}

/// Scores candidates under each γ and returns the winners.
pub fn ebic_winners(candidates: &[(EdgeSet, f64)], n: usize, gammas: &[f64]) -> Result<Vec<EdgeSet>> {
    gammas
        .iter()
        .map(|&gamma| {
            let scored: Vec<ScoredModel> = candidates
                .iter()
                .map(|(e, l)| ScoredModel::new(e.clone(), *l, n, gamma))
                .collect();
            Ok(select_min(&scored)?.edge_set.clone())
        })
        .collect()
}

/// Runs every configured method on one simulated data set. The data seed is
/// `base_seed + trial`.
pub fn run_trial(cfg: &ScenarioConfig, truth: &TrueModelSpec, n: usize, trial: usize) -> Vec<TrialRecord> {
    let ctx = TrialContext { cfg, truth, n, trial };
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let methods = cfg.methods();
    let started = Instant::now();

    let data = sample_mvn(&truth.theta0, n, seed);
    let candidates = sample_covariance(&data).and_then(|s| path_candidates(&s, cfg.path_length));
    let candidates = match candidates {
        Ok(c) => c,
        Err(e) => {
            log::warn!("{} n={n} trial {trial} failed: {e}", cfg.scenario_id());
            let ms = started.elapsed().as_millis() as u64;
            return methods.into_iter().map(|m| ctx.record(m, None, ms)).collect();
        }
    };
    let shared_ms = started.elapsed().as_millis() as u64;

    let mut records = Vec::with_capacity(methods.len());
    for method in methods {
        let t = Instant::now();
        let selected = match method {
            Method::Ebic { gamma } => ebic_winners(&candidates, n, &[gamma]).map(|mut w| w.remove(0)),
            Method::Cv => {
                let graphs: Vec<EdgeSet> = candidates.iter().map(|(e, _)| e.clone()).collect();
                let k = cfg.cv_folds.unwrap_or_else(|| default_fold_count(n));
                kfold_cv_select(&data, &graphs, k, seed).map(|cv| cv.selected)
            }
        };
        let selected = selected
            .map_err(|e| log::warn!("{} n={n} trial {trial} {method} failed: {e}", cfg.scenario_id()))
            .ok();
        let ms = shared_ms + t.elapsed().as_millis() as u64;
        records.push(ctx.record(method, selected, ms));
    }
    records
}

/// All trials of a scenario, run in parallel and returned in canonical order
/// (n, method, γ, trial).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let truths: Vec<(usize, TrueModelSpec)> = cfg
        .n_values
        .iter()
        .map(|&n| Ok((n, cfg.family.build(cfg.p_for(n))?)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..truths.len())
        .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
        .collect();
    let mut records: Vec<TrialRecord> = jobs
        .into_par_iter()
        .flat_map_iter(|(i, trial)| {
            let (n, truth) = &truths[i];
            log::info!("{} n={n} trial {trial}", cfg.scenario_id());
            run_trial(cfg, truth, *n, trial)
        })
        .collect();
    records.sort_by(TrialRecord::canonical_cmp);
    Ok(records)
}

/// Per (scenario, n, method) averages. Inclusive means count a failed trial
/// as an empty selection (PSR 0, FDR 0); exclusive means skip failed trials
/// and are NaN when every trial failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub method: Method,
    pub trials: usize,
    pub failures: usize,
    pub mean_psr: f64,
    pub mean_fdr: f64,
    pub mean_psr_inclusive: f64,
    pub mean_fdr_inclusive: f64,
    pub mean_num_selected: f64,
}

pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.canonical_cmp(b));
    let mut out: Vec<Aggregate> = Vec::new();
    for group in sorted.chunk_by(|a, b| {
        a.scenario == b.scenario && a.n == b.n && a.method.canonical_cmp(&b.method) == Ordering::Equal
    }) {
        let first = group[0];
        let ok: Vec<Metrics> = group.iter().filter_map(|r| r.metrics).collect();
        let sum_psr: f64 = ok.iter().map(|m| m.psr).sum();
        let sum_fdr: f64 = ok.iter().map(|m| m.fdr).sum();
        let sum_sel: usize = group.iter().filter_map(|r| r.num_selected).sum();
        let (all, good) = (group.len() as f64, ok.len() as f64);
        out.push(Aggregate {
            scenario: first.scenario.clone(),
            n: first.n,
            p: first.p,
            method: first.method,
            trials: group.len(),
            failures: group.len() - ok.len(),
            mean_psr: sum_psr / good,
            mean_fdr: sum_fdr / good,
            mean_psr_inclusive: sum_psr / all,
            mean_fdr_inclusive: sum_fdr / all,
            mean_num_selected: sum_sel as f64 / good,
        });
    }
    out
}

/// EBIC minimizer over every decomposable graph with at most `q` edges,
/// each refitted by maximum likelihood.
pub fn exhaustive_select(s: &SampleCov, q: usize, gamma: f64) -> Result<ScoredModel> {
    let candidates = enumerate_decomposable(s.p(), q)?;
    let scored: Vec<ScoredModel> = candidates
        .into_par_iter()
        .filter_map(|edges| match max_loglik(s, &edges) {
            Ok(l) => Some(ScoredModel::new(edges, l, s.n(), gamma)),
            Err(e) => {
                log::warn!("skipping {edges}: {e}");
                None
            }
        })
        .collect();
    if scored.is_empty() {
        return Err(Error::NotEstimable("no decomposable candidate could be fitted".into()));
    }
    Ok(select_min(&scored)?.clone())
}

fn format_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records as CSV. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_records<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.scenario.clone(),
            r.family.to_string(),
            r.kappa.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.method.kind().to_string(),
            format_opt_f64(r.method.gamma()),
            r.trial.to_string(),
            format_opt_f64(r.metrics.map(|m| m.psr)),
            format_opt_f64(r.metrics.map(|m| m.fdr)),
            r.num_selected.map(|v| v.to_string()).unwrap_or_default(),
            r.runtime_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    write_records(records, File::create(path)?)
}

fn parse_field<T: FromStr>(raw: &str, name: &str, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} `{raw}`"),
    })
}

fn parse_optional<T: FromStr>(raw: &str, name: &str, line: usize) -> Result<Option<T>> {
    if raw.trim().is_empty() {
        Ok(None)
    } else {
        parse_field(raw, name, line).map(Some)
    }
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(i).unwrap_or("");
        let kind: MethodKind = parse_field(field(5), "method", line)?;
        let gamma: Option<f64> = parse_optional(field(6), "gamma", line)?;
        let method = match (kind, gamma) {
            (MethodKind::Ebic, Some(gamma)) => Method::Ebic { gamma },
            (MethodKind::Cv, None) => Method::Cv,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: "gamma must be set for ebic rows and empty for cv rows".into(),
                })
            }
        };
        let psr: Option<f64> = parse_optional(field(8), "psr", line)?;
        let fdr: Option<f64> = parse_optional(field(9), "fdr", line)?;
        let metrics = match (psr, fdr) {
            (Some(psr), Some(fdr)) => Some(Metrics { psr, fdr }),
            (None, None) => None,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: "psr and fdr must be both present or both empty".into(),
                })
            }
        };
        records.push(TrialRecord {
            scenario: field(0).to_owned(),
            family: parse_field(field(1), "family", line)?,
            kappa: parse_field(field(2), "kappa", line)?,
            n: parse_field(field(3), "n", line)?,
            p: parse_field(field(4), "p", line)?,
            method,
            trial: parse_field(field(7), "trial", line)?,
            metrics,
            num_selected: parse_optional(field(10), "num_selected", line)?,
            runtime_ms: parse_field(field(11), "runtime_ms", line)?,
            selected: None,
        });
    }
    Ok(records)
}

pub fn load_records(path: &Path) -> Result<Vec<TrialRecord>> {
    read_records(File::open(path)?)
}

/// Reads a data matrix: a header line `p,n` followed by `n` rows of `p`
/// comma-separated reals.
pub fn read_matrix<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut lines = BufReader::new(reader).lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let header = header?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `p,n`, found `{header}`"),
        });
    }
    let p: usize = parse_field(dims[0], "p", 1)?;
    let n: usize = parse_field(dims[1], "n", 1)?;
    if p == 0 || n == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "p and n must be positive".into(),
        });
    }
    let mut values = Vec::with_capacity(n * p);
    let mut rows = 0;
    for (line, text) in lines {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        if rows == n {
            return Err(Error::Parse {
                line,
                message: format!("more than the declared {n} rows"),
            });
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != p {
            return Err(Error::Parse {
                line,
                message: format!("expected {p} values, found {}", fields.len()),
            });
        }
        for f in fields {
            let v: f64 = parse_field(f, "value", line)?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value `{}`", f.trim()),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse {
            line: rows + 2,
            message: format!("declared {n} rows, found {rows}"),
        });
    }
    Ok(DMatrix::from_row_slice(n, p, &values))
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    read_matrix(File::open(path)?)
}

pub fn write_matrix<W: Write>(data: &DMatrix<f64>, mut writer: W) -> Result<()> {
    writeln!(writer, "{},{}", data.ncols(), data.nrows())?;
    for row in data.row_iter() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}

/// One edge per line as 1-based `j k`.
pub fn format_edge_list(edges: &EdgeSet) -> String {
    edges.iter().map(|(j, k)| format!("{} {}\n", j + 1, k + 1)).collect()
}

/// Parses 1-based `j k` lines; blank lines and `#` comments are ignored.
pub fn parse_edge_list(text: &str, p: usize) -> Result<EdgeSet> {
    let mut edges = EdgeSet::empty(p);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let nodes: Vec<&str> = content.split_whitespace().collect();
        if nodes.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected `j k`, found `{content}`"),
            });
        }
        let j: usize = parse_field(nodes[0], "node", line)?;
        let k: usize = parse_field(nodes[1], "node", line)?;
        if j == 0 || k == 0 || j > p || k > p || j == k {
            return Err(Error::Parse {
                line,
                message: format!("invalid edge {j}-{k} for p = {p}"),
            });
        }
        edges.insert(j - 1, k - 1)?;
    }
    Ok(edges)
}
