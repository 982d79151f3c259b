use std::collections::HashMap;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ggm_ebic::chordal::enumerate_decomposable;
use ggm_ebic::glasso::{glasso_path, DEFAULT_PATH_LENGTH};
use ggm_ebic::harness::{
    aggregate, emit_csv, format_edge_list, load_matrix, path_candidates, MethodKind, ScenarioConfig,
};
use ggm_ebic::mle::max_loglik;
use ggm_ebic::model::{center_columns, sample_covariance, EdgeSet, SampleCov};
use ggm_ebic::selection::{ebic_score, select_min, ScoredModel, GAMMA_GRID};
use ggm_ebic::synthetic::Family;
use ggm_ebic::theory::{self, BoundCheckRow};
use ggm_ebic::Error;

#[derive(Parser)]
#[command(name = "ggm-ebic", version, about = "Graph selection for Gaussian graphical models with the extended BIC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation scenario and write per-trial records as CSV.
    Simulate(SimulateArgs),
    /// Select a graph for a data matrix: glasso path, refit, EBIC.
    Select(SelectArgs),
    /// Print the glasso path with refitted likelihoods and EBIC scores.
    Path(PathArgs),
    /// List every decomposable graph on p nodes with at most q edges.
    Enumerate(EnumerateArgs),
    /// Compare analytic bounds with Monte Carlo estimates.
    Bounds(BoundsArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Trials per sample size (default 20, or 100 with --full).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = GAMMA_GRID)]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "ebic")]
    methods: Vec<MethodKind>,
    /// Sample sizes (default 100,200,400, or up to 800 with --full).
    #[arg(long = "n-values", value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Folds for cross-validation (default min(100, n)).
    #[arg(long)]
    cv_folds: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Use the full-scale defaults: 100 trials and n up to 800.
    #[arg(long)]
    full: bool,
}

#[derive(clap::Args)]
struct DataArgs {
    /// Data matrix: header `p,n`, then n rows of p comma-separated values.
    #[arg(long)]
    data: PathBuf,
    /// Subtract column means before forming the sample covariance.
    #[arg(long)]
    center: bool,
}

#[derive(clap::Args)]
struct SelectArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_PATH_LENGTH)]
    count: usize,
}

#[derive(clap::Args)]
struct PathArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long, default_value_t = DEFAULT_PATH_LENGTH)]
    count: usize,
}

#[derive(clap::Args)]
struct EnumerateArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    All,
    Csb,
    Lemma1,
    Lemma2,
    Porteous,
    Assumptions,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long, value_enum, default_value_t = Check::All)]
    check: Check,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draws for the chi-square tail checks.
    #[arg(long, default_value_t = theory::TAIL_DRAWS)]
    tail_draws: usize,
    /// Draws for the two-sample KS checks.
    #[arg(long, default_value_t = theory::KS_DRAWS)]
    ks_draws: usize,
    /// Draws of the simulated likelihood ratio.
    #[arg(long, default_value_t = theory::PORTEOUS_DRAWS)]
    lr_draws: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    eps0: f64,
    #[arg(long, default_value_t = 0.5)]
    eps1: f64,
}

fn load_cov(args: &DataArgs) -> Result<SampleCov, Error> {
    let mut data = load_matrix(&args.data)?;
    if args.center {
        center_columns(&mut data);
    }
    sample_covariance(&data)
}

fn simulate(args: SimulateArgs, out: &mut impl Write) -> Result<(), Error> {
    let mut cfg = if args.full {
        ScenarioConfig::full_scale(args.family, args.kappa)
    } else {
        ScenarioConfig::desk(args.family, args.kappa)
    };
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(n_values) = args.n_values {
        cfg.n_values = n_values;
    }
    cfg.gammas = args.gammas;
    cfg.methods = args.methods;
    cfg.base_seed = args.seed;
    cfg.cv_folds = args.cv_folds;
    let records = ggm_ebic::harness::run_scenario(&cfg)?;
    emit_csv(&records, &args.out)?;
    writeln!(out, "n,p,method,trials,failures,mean_psr,mean_fdr,mean_num_selected")?;
    for a in aggregate(&records) {
        writeln!(
            out,
            "{},{},{},{},{},{:.4},{:.4},{:.2}",
            a.n, a.p, a.method, a.trials, a.failures, a.mean_psr, a.mean_fdr, a.mean_num_selected
        )?;
    }
    Ok(())
}

fn select(args: SelectArgs, out: &mut impl Write) -> Result<(), Error> {
    let s = load_cov(&args.input)?;
    let candidates = path_candidates(&s, args.count)?;
    let scored: Vec<ScoredModel> = candidates
        .into_iter()
        .map(|(e, l)| ScoredModel::new(e, l, s.n(), args.gamma))
        .collect();
    let winner = select_min(&scored)?;
    writeln!(out, "# selected graph, gamma = {}, {} edges", args.gamma, winner.num_edges)?;
    write!(out, "{}", format_edge_list(&winner.edge_set))?;
    writeln!(out)?;
    writeln!(out, "candidate,num_edges,loglik,ebic,selected")?;
    for (i, m) in scored.iter().enumerate() {
        writeln!(out, "{i},{},{},{},{}", m.num_edges, m.loglik, m.ebic, m.edge_set == winner.edge_set)?;
    }
    Ok(())
}

fn path(args: PathArgs, out: &mut impl Write) -> Result<(), Error> {
    let s = load_cov(&args.input)?;
    let path = glasso_path(&s, args.count)?;
    let mut refits: HashMap<&EdgeSet, Option<f64>> = HashMap::new();
    writeln!(out, "rho,num_edges,loglik_refit,ebic_gamma0,ebic_gamma05,ebic_gamma1")?;
    for (rho, edges) in path.penalties.iter().zip(&path.models) {
        let loglik = *refits.entry(edges).or_insert_with(|| {
            max_loglik(&s, edges)
                .map_err(|e| log::warn!("refit failed for {} edges: {e}", edges.len()))
                .ok()
        });
        let fields: Vec<String> = match loglik {
            Some(l) => std::iter::once(l.to_string())
                .chain(GAMMA_GRID.iter().map(|&g| ebic_score(l, edges.len(), s.n(), s.p(), g).to_string()))
                .collect(),
            None => vec![String::new(); 4],
        };
        writeln!(out, "{rho},{},{}", edges.len(), fields.join(","))?;
    }
    Ok(())
}

fn enumerate(args: EnumerateArgs, out: &mut impl Write) -> Result<(), Error> {
    for (i, edges) in enumerate_decomposable(args.p, args.q)?.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# graph {} ({} edges)", i + 1, edges.len())?;
        write!(out, "{}", format_edge_list(edges))?;
    }
    Ok(())
}

fn bounds(args: BoundsArgs, out: &mut impl Write) -> Result<(), Error> {
    let wanted = |c: Check| args.check == Check::All || args.check == c;
    let mut rows: Vec<BoundCheckRow> = Vec::new();
    if wanted(Check::Csb) {
        rows.extend(theory::csb_rows(args.tail_draws, args.seed)?);
    }
    if wanted(Check::Lemma1) {
        rows.extend(theory::lemma1_rows(args.tail_draws, args.seed)?);
    }
    if wanted(Check::Lemma2) {
        rows.extend(theory::lemma2_rows(args.ks_draws, args.seed)?);
    }
    if wanted(Check::Porteous) {
        rows.extend(theory::porteous_rows(6, 200, args.lr_draws, args.seed)?);
    }
    if wanted(Check::Assumptions) {
        rows.extend(theory::assumption_rows(args.gamma, args.eps0, args.eps1)?);
    }
    writeln!(
        out,
        "{:<24} {:<40} {:>14} {:>14} {:>12} {:>6}",
        "check", "parameters", "analytic", "estimate", "std_error", "pass"
    )?;
    for r in &rows {
        let se = r.std_error.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{:<24} {:<40} {:>14.6e} {:>14.6e} {:>12} {:>6}",
            r.check,
            r.parameters,
            r.analytic,
            r.estimate,
            se,
            if r.pass { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, &mut out),
        Command::Select(a) => select(a, &mut out),
        Command::Path(a) => path(a, &mut out),
        Command::Enumerate(a) => enumerate(a, &mut out),
        Command::Bounds(a) => bounds(a, &mut out),
    }
    .and_then(|()| out.flush().map_err(Error::from));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
