use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dictapprox::io::{
    read_json, read_matrix, read_signals, read_trace_psi, write_json, write_json_to, write_learn_trace_to,
    write_outlier_trace_to, write_signals,
};
use dictapprox::metrics::{eval_against_truth, EvalContext};
use dictapprox::outlier::OutlierTermination;
use dictapprox::synth::TruthRecord;
use dictapprox::{
    dict_approx, generate, lower_bound_2_to_p, outlier_dict_approx, solve_bicriteria, DictKind, DictModel, Error,
    LearnConfig, NormInstance, OutlierConfig, Result, SignalMatrix, SynthParams, TcInstance, TerminationReason,
};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "dictapprox", version, about = "Approximate dictionary learning by threshold-correlation pursuit")]
struct Cli {
    /// Worker threads for the inner candidate scans (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a planted instance: X.csv plus truth.json.
    Gen(GenArgs),
    /// Learn a dictionary.
    Learn(LearnArgs),
    /// Learn a dictionary while discarding a ρ fraction of columns.
    LearnOutlier(OutlierArgs),
    /// Solve one τ-TC instance with the bi-criteria solver.
    Tc(TcArgs),
    /// Lower-bound the 2→p norm of a matrix.
    Norm2p(NormArgs),
    /// Score a learned model against planted truth.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_ratio: f64,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// orthonormal or random_unit.
    #[arg(long, default_value = "orthonormal")]
    dict_kind: DictKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "X.csv")]
    out_x: PathBuf,
    #[arg(long, default_value = "truth.json")]
    out_truth: PathBuf,
}

#[derive(Args, Debug)]
struct LearnArgs {
    /// Signal matrix, one coordinate per row and one signal per column.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long, default_value = "model.json")]
    out_model: PathBuf,
    #[arg(long, default_value = "trace.csv")]
    out_trace: PathBuf,
    /// Accepted for uniformity; learning is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl LearnArgs {
    fn config(&self) -> Result<LearnConfig> {
        let c = LearnConfig::new(self.k, self.m, self.lambda, self.epsilon)?;
        Ok(match self.max_iters {
            Some(n) => c.with_max_iters(n),
            None => c,
        })
    }
}

#[derive(Args, Debug)]
struct OutlierArgs {
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value = "outliers.json")]
    out_outliers: PathBuf,
}

#[derive(Args, Debug)]
struct TcArgs {
    /// Vectors as columns of a d × n matrix.
    #[arg(long)]
    vectors: PathBuf,
    /// 1 × n weights; all ones when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NormArgs {
    /// The matrix A, one row per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Learn trace; enables the per-step bound ratios (needs k, m, epsilon).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Score as an outlier run with this ρ.
    #[arg(long)]
    rho: Option<f64>,
    /// outliers.json of the run.
    #[arg(long)]
    outliers: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LearnSummary {
    config: LearnConfig,
    termination: TerminationReason,
    iterations: usize,
    psi_final: f64,
    atom_count: usize,
    max_sparsity: usize,
    sparsity_cap: u64,
    iteration_budget: u64,
    wall_time_ms: u64,
}

#[derive(Serialize)]
struct OutlierSummary {
    config: OutlierConfig,
    termination: OutlierTermination,
    iterations: usize,
    psi_hat_final: f64,
    atom_count: usize,
    max_sparsity: usize,
    iteration_cap: u64,
    wall_time_ms: u64,
}

#[derive(Serialize, Deserialize)]
struct OutlierFile {
    indices: Vec<usize>,
}

#[derive(Serialize)]
struct TcOutput {
    x: Vec<f64>,
    effective_threshold: f64,
    objective: f64,
    hit_set: Vec<usize>,
    degenerate: bool,
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => write_json_to(io::stdout().lock(), value),
    }
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> Result<()>,
{
    f(BufWriter::new(File::create(path)?))
}

fn run_gen(a: &GenArgs) -> Result<()> {
    let inst = generate(&SynthParams {
        d: a.d,
        n: a.n,
        m: a.m,
        k: a.k,
        noise_ratio: a.noise_ratio,
        rho: a.rho,
        dict_kind: a.dict_kind,
        seed: a.seed,
    })?;
    write_signals(&a.out_x, &inst.x)?;
    write_json(&a.out_truth, &inst.truth_record())
}

fn run_learn(a: &LearnArgs) -> Result<()> {
    let config = a.config()?;
    let x = read_signals(&a.input)?;
    let start = Instant::now();
    let (model, trace) = dict_approx(&x, &config)?;
    let wall_time_ms = start.elapsed().as_millis() as u64;
    write_json(&a.out_model, &model)?;
    write_with(&a.out_trace, |w| write_learn_trace_to(w, &trace.records))?;
    emit(
        None,
        &LearnSummary {
            config,
            termination: trace.termination,
            iterations: trace.records.len(),
            psi_final: trace.final_psi(),
            atom_count: model.atom_count(),
            max_sparsity: model.max_code_len(),
            sparsity_cap: trace.sparsity_cap,
            iteration_budget: trace.iteration_budget,
            wall_time_ms,
        },
    )
}

fn run_learn_outlier(a: &OutlierArgs) -> Result<()> {
    let config = OutlierConfig::new(a.learn.config()?, a.rho)?;
    let x = read_signals(&a.learn.input)?;
    let start = Instant::now();
    let r = outlier_dict_approx(&x, &config)?;
    let wall_time_ms = start.elapsed().as_millis() as u64;
    write_json(&a.learn.out_model, &r.model)?;
    write_with(&a.learn.out_trace, |w| write_outlier_trace_to(w, &r.trace))?;
    write_json(
        &a.out_outliers,
        &OutlierFile {
            indices: r.outlier_indices.clone(),
        },
    )?;
    emit(
        None,
        &OutlierSummary {
            config,
            termination: r.termination,
            iterations: r.trace.len(),
            psi_hat_final: r.psi_hat_final,
            atom_count: r.model.atom_count(),
            max_sparsity: r.model.max_code_len(),
            iteration_cap: r.iteration_cap,
            wall_time_ms,
        },
    )
}

fn run_tc(a: &TcArgs) -> Result<()> {
    let v = read_signals(&a.vectors)?;
    let weights = match &a.weights {
        Some(p) => {
            let rows = read_matrix(p)?;
            let w: Vec<f64> = rows.into_iter().flatten().collect();
            if w.len() != v.len() {
                return Err(Error::Dimension {
                    expected: v.len(),
                    got: w.len(),
                });
            }
            w
        }
        None => vec![1.0; v.len()],
    };
    let inst = TcInstance::from_flat(v.dim(), v.as_column_major().to_vec(), weights, a.tau)?;
    let sol = solve_bicriteria(&inst);
    emit(
        a.out.as_deref(),
        &TcOutput {
            x: sol.x,
            effective_threshold: sol.effective_threshold,
            objective: sol.objective,
            hit_set: sol.hit_set,
            degenerate: sol.degenerate,
        },
    )
}

fn run_norm(a: &NormArgs) -> Result<()> {
    let inst = NormInstance::new(read_matrix(&a.input)?, a.p)?;
    emit(a.out.as_deref(), &lower_bound_2_to_p(&inst))
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let model: DictModel = read_json(&a.model)?;
    let x: SignalMatrix = read_signals(&a.input)?;
    let truth: TruthRecord = read_json(&a.truth)?;
    let config = match (a.k, a.m, a.epsilon) {
        (Some(k), Some(m), Some(eps)) => Some(LearnConfig::new(k, m, truth.lambda.max(1.0), eps)?),
        (None, None, None) => None,
        _ => return Err(Error::Config("--k, --m and --epsilon go together".into())),
    };
    let psi_trace = match &a.trace {
        Some(p) => {
            if config.is_none() {
                return Err(Error::Config("--trace needs --k, --m and --epsilon".into()));
            }
            read_trace_psi(p)?
        }
        None => Vec::new(),
    };
    let declared_outliers = match &a.outliers {
        Some(p) => read_json::<OutlierFile>(p)?.indices,
        None => Vec::new(),
    };
    let ctx = EvalContext {
        config,
        rho: a.rho,
        psi_trace,
        declared_outliers,
        wall_time_ms: None,
    };
    emit(a.out.as_deref(), &eval_against_truth(&model, &x, &truth, &ctx)?)
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => run_gen(a),
        Command::Learn(a) => run_learn(a),
        Command::LearnOutlier(a) => run_learn_outlier(a),
        Command::Tc(a) => run_tc(a),
        Command::Norm2p(a) => run_norm(a),
        Command::Eval(a) => run_eval(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
