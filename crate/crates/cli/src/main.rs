use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wsee::harness::{
    brute_force_oracle, parse_grid, parse_list, parse_schemes, read_instance, run_convergence, run_sweep,
    solve_output, summarize, write_convergence_csv, write_json, write_summary_csv, write_sweep_csv,
    ConvergenceSpec, ExperimentSpec, Scheme, WORKERS_ENV,
};
use wsee::model::{GeneralPowerUser, MultiRbInstance};
use wsee::scenario::ScenarioConfig;
use wsee::sco::{wsee_maximize, wsee_maximize_general, wsee_maximize_multi_rb, wsr_maximize, ScoOptions};
use wsee::Error;

const DBM_NOTE: &str = "Powers given in dBm are converted with p[W] = 10^((dBm - 30) / 10), so 20 dBm = 0.1 W.";

#[derive(Parser)]
#[command(name = "wsee", version, about = "Weighted-sum energy-efficiency power control", after_help = DBM_NOTE)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance given as JSON.
    Solve(SolveArgs),
    /// Monte Carlo sweep over P_max, QoS fraction and starting scale.
    Sweep(SweepArgs),
    /// Per-iteration objective traces of the WSEE driver.
    Convergence(ConvergenceArgs),
    /// Exhaustive grid search for networks of up to three users.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON: {n, B, omega (row-major by transmitter), phi, noise, users, [general]}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// wsee, wsr, wsee_general (needs a "general" entry) or wsee_multi_rb (single block).
    #[arg(long, default_value = "wsee")]
    scheme: String,
    /// Starting point p = lambda * P_max.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON overriding the defaults (missing fields keep defaults).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Number of users.
    #[arg(long)]
    users: Option<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args)]
#[command(after_help = DBM_NOTE)]
struct SweepArgs {
    /// P_max grid in dBm: A:STEP:B (inclusive) or a comma list.
    #[arg(long, default_value = "0:5:40", allow_hyphen_values = true)]
    pmax_dbm: String,
    /// QoS fractions, comma list in [0, 1).
    #[arg(long, default_value = "0,0.2,0.8")]
    r: String,
    /// Comma list of wsee, wsr, wsee_general, wsee_multi_rb.
    #[arg(long, default_value = "wsee,wsr")]
    schemes: String,
    /// Starting scales, comma list in (0, 1].
    #[arg(long, default_value = "1")]
    lambda: String,
    /// Resource blocks for wsee_multi_rb.
    #[arg(long, default_value_t = 2)]
    n_rb: usize,
    #[command(flatten)]
    common: ScenarioArgs,
    /// Row CSV; the summary goes to <out>.summary.csv and metadata to <out>.meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(after_help = DBM_NOTE)]
struct ConvergenceArgs {
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    pmax_dbm: f64,
    #[arg(long, default_value = "0.01,0.1,1")]
    lambda: String,
    #[arg(long, default_value = "0")]
    r: String,
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    config: PathBuf,
    /// Grid points per user.
    #[arg(long, default_value_t = 400)]
    grid: usize,
    /// Coordinate refinement rounds.
    #[arg(long, default_value_t = 3)]
    refine: usize,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InfeasibleInitialPoint(_) | Error::RedrawLimit(_) => 3,
        Error::SubproblemFailure { .. } | Error::NonMonotoneStep { .. } | Error::DegenerateRate(_) => 4,
        _ => 2,
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn scenario(args: &ScenarioArgs) -> wsee::Result<ScenarioConfig> {
    let mut cfg = match &args.scenario {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => ScenarioConfig::default(),
    };
    if let Some(n) = args.users {
        cfg.n_users = n;
        cfg.weights = None;
    }
    Ok(cfg)
}

fn solve(a: &SolveArgs) -> wsee::Result<()> {
    let doc = read_instance(&a.config)?;
    let inst = doc.to_instance()?;
    let scheme: Scheme = a.scheme.parse()?;
    let opts = ScoOptions { epsilon: a.eps, max_iter: a.max_iter, ..ScoOptions::with_scale(a.lambda) };
    let res = match scheme {
        Scheme::Wsee => wsee_maximize(&inst, &opts)?,
        Scheme::Wsr => wsr_maximize(&inst, &opts)?,
        Scheme::WseeGeneral => {
            let users: Vec<GeneralPowerUser> = doc
                .general
                .clone()
                .ok_or_else(|| Error::InvalidInstance("scheme wsee_general needs a \"general\" entry".into()))?;
            wsee_maximize_general(&inst, &users, &opts)?
        }
        Scheme::WseeMultiRb => wsee_maximize_multi_rb(&MultiRbInstance::from_single(&inst), &opts)?,
    };
    write_json(&a.out, &solve_output(scheme, &res))
}

fn sweep(a: &SweepArgs) -> wsee::Result<()> {
    let spec = ExperimentSpec {
        scenario: scenario(&a.common)?,
        pmax_dbm: parse_grid(&a.pmax_dbm)?,
        r: parse_list(&a.r)?,
        schemes: parse_schemes(&a.schemes)?,
        trials: a.common.trials,
        lambdas: parse_list(&a.lambda)?,
        epsilon: a.common.eps,
        seed: a.common.seed,
        n_rb: a.n_rb,
        workers: a.common.workers,
        ..Default::default()
    };
    let out = run_sweep(&spec)?;
    write_sweep_csv(BufWriter::new(File::create(&a.out)?), &out.records)?;
    write_summary_csv(BufWriter::new(File::create(sibling(&a.out, ".summary.csv"))?), &summarize(&out.records))?;
    let failed = out.records.iter().filter(|r| r.error.is_some()).count();
    let meta = serde_json::json!({
        "trials": spec.trials,
        "seed": spec.seed,
        "epsilon": spec.epsilon,
        "n_rb": spec.n_rb,
        "scenario": spec.scenario,
        "general": spec.general,
        "redraws": out.redraws,
        "redraws_multi_rb": out.redraws_multi_rb,
        "failed_rows": failed,
    });
    write_json(&sibling(&a.out, ".meta.json"), &meta)?;
    if failed > 0 {
        eprintln!("warning: {failed} of {} rows failed", out.records.len());
    }
    Ok(())
}

fn convergence(a: &ConvergenceArgs) -> wsee::Result<()> {
    let spec = ConvergenceSpec {
        scenario: scenario(&a.common)?,
        pmax_dbm: a.pmax_dbm,
        r: parse_list(&a.r)?,
        lambdas: parse_list(&a.lambda)?,
        trials: a.common.trials,
        seed: a.common.seed,
        epsilon: a.common.eps,
        workers: a.common.workers,
    };
    let (recs, _, rows) = run_convergence(&spec)?;
    write_convergence_csv(BufWriter::new(File::create(&a.out)?), &rows)?;
    let failed = recs.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} runs failed", recs.len());
    }
    Ok(())
}

fn oracle(a: &OracleArgs) -> wsee::Result<()> {
    let inst = read_instance(&a.config)?.to_instance()?;
    let res = brute_force_oracle(&inst, a.grid, a.refine)?;
    write_json(&a.out, &serde_json::json!({ "grid": a.grid, "refine": a.refine, "wsee": res.wsee, "wsr": res.wsr, "feasible_points": res.feasible_points }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Solve(a) => solve(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Convergence(a) => convergence(a),
        Cmd::Oracle(a) => oracle(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
