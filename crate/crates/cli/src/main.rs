//! `ni`: train neural improvement policies, run local search and reproduce
//! the evaluation experiments from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ni_core::harness::{
    self, Algorithm, BenchSetup, BestKnown, CompensationInputs, ExperimentManifest, Policy, Reference,
};
use ni_core::instances::{generate, instance_from_json, instance_to_json, parse_lolib, Instance, ProblemKind, RngSeed};
use ni_core::model::{load_checkpoint, ModelParams};
use ni_core::operators::OperatorKind;
use ni_core::search::Budget;
use ni_core::training::{train, OptimizerKind, RewardVariant, TrainConfig, TrainOutputs};
use ni_core::Error;

#[derive(Parser)]
#[command(name = "ni", version, about = "Neural improvement models and local search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Train a policy and write its checkpoint and log.
    Train(TrainArgs),
    /// Run one search algorithm on an instance file.
    Solve(SolveArgs),
    /// Rank the policy's single move against the full neighborhood.
    EvalOneStep(OneStepArgs),
    /// Apply the policy repeatedly and record achieved vs. available gains.
    EvalMultiStep(MultiStepArgs),
    /// Final gap against evaluations for several algorithms.
    BenchBicriteria(BicriteriaArgs),
    /// Mean gap for every size and evaluation budget.
    BenchBudgetTable(BudgetTableArgs),
    /// Number of solved instances that pays back the training time.
    Compensation(CompensationArgs),
    /// Generate a random instance file.
    Gen(GenArgs),
    /// Re-run an experiment from its manifest.
    #[serde(skip)]
    Run(RunArgs),
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct TrainArgs {
    /// JSON TrainConfig; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    episode_len: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    reward: Option<RewardVariant>,
    #[arg(long)]
    operator: Option<OperatorKind>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Save the checkpoint every this many epochs.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Record wall-clock times (outputs are then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct SolveArgs {
    /// JSON instance, or a LOLIB matrix file.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    algo: Algorithm,
    #[arg(long)]
    operator: Option<OperatorKind>,
    #[arg(long)]
    budget_evals: Option<usize>,
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = harness::DEFAULT_TABU_SIZE)]
    tabu_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
enum PolicyArg {
    Model,
    Oracle,
    Uniform,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value_t = PolicyArg::Model)]
    policy: PolicyArg,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Sample the model's move instead of taking its argmax.
    #[arg(long)]
    sampled: bool,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct OneStepArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long)]
    operator: Option<OperatorKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct MultiStepArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long)]
    operator: Option<OperatorKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct BenchArgs {
    #[arg(long)]
    problem: ProblemKind,
    /// Comma-separated algorithm names (bfhc, sahc, shc, nhc, ms*, bfts, nts, bfils, nils, becker).
    #[arg(long, value_delimiter = ',', required = true)]
    algos: Vec<Algorithm>,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long)]
    operator: Option<OperatorKind>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// `brute`, `incumbent`, or a best-known CSV path.
    #[arg(long, default_value = "brute")]
    reference: String,
    #[arg(long, default_value_t = harness::DEFAULT_TABU_SIZE)]
    tabu_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct BicriteriaArgs {
    #[command(flatten)]
    bench: BenchArgs,
    #[arg(long)]
    n: usize,
    /// Evaluation budget; hill climbers run to a local optimum without one.
    #[arg(long)]
    budget_evals: Option<usize>,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct BudgetTableArgs {
    #[command(flatten)]
    bench: BenchArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Budgets as multiples of the instance size.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 100, 1000])]
    multipliers: Vec<usize>,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct CompensationArgs {
    #[arg(long)]
    t_train: f64,
    #[arg(long)]
    t_neigh: f64,
    #[arg(long)]
    t_infer: f64,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct GenArgs {
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn default_operator(problem: ProblemKind) -> OperatorKind {
    match problem {
        ProblemKind::Prp => OperatorKind::Insert,
        ProblemKind::Tsp => OperatorKind::TwoOpt,
        ProblemKind::Gpp => OperatorKind::GppSwap,
    }
}

fn load_model(path: Option<&Path>) -> anyhow::Result<Option<ModelParams<f32>>> {
    path.map(|p| load_checkpoint(p).with_context(|| format!("loading {}", p.display()))).transpose()
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn manifest(kind: &str, cmd: &Command, out_dir: &Path) -> anyhow::Result<ExperimentManifest> {
    Ok(ExperimentManifest {
        kind: kind.to_string(),
        problem: None,
        sizes: vec![],
        count: None,
        seeds: vec![],
        budgets: vec![],
        algorithms: vec![],
        checkpoints: vec![],
        output_dir: out_dir.to_path_buf(),
        args: serde_json::to_value(cmd)?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8_lossy(&bytes);
    if text.trim_start().starts_with('{') {
        Ok(instance_from_json(&text)?.0)
    } else {
        Ok(Instance::Prp(parse_lolib(&bytes)?))
    }
}

fn cmd_train(a: &TrainArgs, cmd: &Command) -> anyhow::Result<()> {
    let mut c = match &a.config {
        Some(p) => serde_json::from_str::<TrainConfig>(&fs::read_to_string(p)?)
            .map_err(|e| Error::Data(format!("bad config {}: {e}", p.display())))?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.problem {
        c.problem = v;
        if a.operator.is_none() {
            c.operator = default_operator(v);
        }
    }
    macro_rules! set {
        ($($f:ident => $field:ident),*) => { $(if let Some(v) = a.$f { c.$field = v; })* };
    }
    set!(n => instance_size, d => d, layers => layers, epochs => n_epochs, batch => batch_size,
         lr => learning_rate, gamma => gamma, episode_len => episode_len, k_max => k_max,
         reward => reward_variant, operator => operator, optimizer => optimizer);
    if let Some(s) = a.seed {
        c.seed = RngSeed(s);
    }
    c.validate()?;
    let out = TrainOutputs {
        log: Some(a.out_dir.join("train_log.csv")),
        checkpoint: Some(a.out_dir.join("model.ckpt")),
        checkpoint_every: a.checkpoint_every,
        record_time: a.timing,
    };
    fs::create_dir_all(&a.out_dir)?;
    write(&a.out_dir, "config.json", &(serde_json::to_string_pretty(&c)? + "\n"))?;
    let (_, reports) = train(&c, &out)?;
    let mut m = manifest("train", cmd, &a.out_dir)?;
    m.problem = Some(c.problem);
    m.sizes = vec![c.instance_size];
    m.seeds = vec![c.seed.0];
    m.checkpoints = vec![a.out_dir.join("model.ckpt")];
    m.save(&a.out_dir)?;
    if let Some(r) = reports.last() {
        println!("epoch {}: mean return {}, mean best objective {}", r.epoch, r.mean_return, r.mean_best_objective);
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs, cmd: &Command) -> anyhow::Result<()> {
    let inst = read_instance(&a.instance)?;
    let op = a.operator.unwrap_or(default_operator(inst.problem()));
    let budget = Budget { max_evaluations: a.budget_evals, max_seconds: a.budget_seconds };
    budget.validate()?;
    let model = load_model(a.model.as_deref())?;
    let mut rng = RngSeed(a.seed).rng();
    let start = inst.random_solution(&mut rng);
    let r = harness::run_algorithm(a.algo, &inst, &start, op, budget, model.as_ref(), a.tabu_size, &mut rng)?;
    write(&a.out_dir, "trace.csv", &r.trace.to_csv(a.timing))?;
    write(&a.out_dir, "solution.json", &(serde_json::to_string(&r.solution)? + "\n"))?;
    let mut m = manifest("solve", cmd, &a.out_dir)?;
    m.problem = Some(inst.problem());
    m.sizes = vec![inst.n()];
    m.seeds = vec![a.seed];
    m.budgets = a.budget_evals.into_iter().collect();
    m.algorithms = vec![a.algo.to_string()];
    m.checkpoints = a.model.iter().cloned().collect();
    m.save(&a.out_dir)?;
    println!("objective {} after {} evaluations", r.objective, r.evals);
    Ok(())
}

fn policy<'a>(p: &PolicyArgs, model: Option<&'a ModelParams<f32>>) -> anyhow::Result<Policy<'a>> {
    Ok(match p.policy {
        PolicyArg::Model => match model {
            Some(params) => Policy::Model { params, sampled: p.sampled },
            None => return Err(Error::Usage("--policy model needs --model".into()).into()),
        },
        PolicyArg::Oracle => Policy::Oracle,
        PolicyArg::Uniform => Policy::Uniform,
    })
}

fn cmd_one_step(a: &OneStepArgs, cmd: &Command) -> anyhow::Result<()> {
    let model = load_model(a.policy.model.as_deref())?;
    let pol = policy(&a.policy, model.as_ref())?;
    let op = a.operator.unwrap_or(default_operator(a.problem));
    let report = harness::one_step_eval(pol, a.problem, a.n, a.count, op, RngSeed(a.seed))?;
    write(&a.out_dir, "one_step.csv", &report.rows_csv())?;
    write(&a.out_dir, "histogram.csv", &report.histogram_csv())?;
    write(&a.out_dir, "summary.csv", &report.summary_csv())?;
    let mut m = manifest("eval-one-step", cmd, &a.out_dir)?;
    m.problem = Some(a.problem);
    m.sizes = vec![a.n];
    m.count = Some(a.count);
    m.seeds = vec![a.seed];
    m.checkpoints = a.policy.model.iter().cloned().collect();
    m.save(&a.out_dir)?;
    let s = &report.summary;
    println!(
        "mean rank {:.2}, mean percentile {:.2}, rank-1 {:.1}%, improving {:.1}%",
        s.mean_rank,
        s.mean_percentile,
        100.0 * s.rank1_fraction,
        100.0 * s.improving_fraction
    );
    Ok(())
}

fn cmd_multi_step(a: &MultiStepArgs, cmd: &Command) -> anyhow::Result<()> {
    let model = load_model(a.policy.model.as_deref())?;
    let pol = policy(&a.policy, model.as_ref())?;
    let op = a.operator.unwrap_or(default_operator(a.problem));
    let rows = harness::multi_step_eval(pol, a.problem, a.n, op, a.steps, a.runs, RngSeed(a.seed))?;
    write(&a.out_dir, "multi_step.csv", &harness::multi_step_csv(&rows))?;
    let mut m = manifest("eval-multi-step", cmd, &a.out_dir)?;
    m.problem = Some(a.problem);
    m.sizes = vec![a.n];
    m.count = Some(a.runs);
    m.seeds = vec![a.seed];
    m.checkpoints = a.policy.model.iter().cloned().collect();
    m.save(&a.out_dir)?;
    Ok(())
}

fn reference(arg: &str) -> anyhow::Result<Reference> {
    Ok(match arg {
        "brute" => Reference::BruteForce,
        "incumbent" => Reference::Incumbent,
        path => Reference::BestKnown(BestKnown::load(Path::new(path))?),
    })
}

fn bench_manifest(kind: &str, b: &BenchArgs, cmd: &Command) -> anyhow::Result<ExperimentManifest> {
    let mut m = manifest(kind, cmd, &b.out_dir)?;
    m.problem = Some(b.problem);
    m.count = Some(b.count);
    m.seeds = vec![b.seed];
    m.algorithms = b.algos.iter().map(|a| a.to_string()).collect();
    m.checkpoints = b.model.iter().cloned().collect();
    Ok(m)
}

fn cmd_bicriteria(a: &BicriteriaArgs, cmd: &Command) -> anyhow::Result<()> {
    let b = &a.bench;
    let model = load_model(b.model.as_deref())?;
    let setup = BenchSetup {
        problem: b.problem,
        op: b.operator.unwrap_or(default_operator(b.problem)),
        count: b.count,
        seed: RngSeed(b.seed),
        model: model.as_ref(),
        tabu_size: b.tabu_size,
    };
    let rows = harness::bicriteria_eval(&setup, a.n, &b.algos, a.budget_evals, &reference(&b.reference)?)?;
    let summary = harness::summarize(&rows);
    write(&b.out_dir, "runs.csv", &harness::run_rows_csv(&rows))?;
    write(&b.out_dir, "summary.csv", &harness::summary_csv(&summary))?;
    let mut m = bench_manifest("bench-bicriteria", b, cmd)?;
    m.sizes = vec![a.n];
    m.budgets = a.budget_evals.into_iter().collect();
    m.save(&b.out_dir)?;
    for s in &summary {
        println!("{:8} gap {:.3}%  evaluations {:.1}", s.algorithm, s.mean_gap_percent, s.mean_evals);
    }
    Ok(())
}

fn cmd_budget_table(a: &BudgetTableArgs, cmd: &Command) -> anyhow::Result<()> {
    let b = &a.bench;
    let model = load_model(b.model.as_deref())?;
    let setup = BenchSetup {
        problem: b.problem,
        op: b.operator.unwrap_or(default_operator(b.problem)),
        count: b.count,
        seed: RngSeed(b.seed),
        model: model.as_ref(),
        tabu_size: b.tabu_size,
    };
    let rows = harness::budget_table(&setup, &a.sizes, &a.multipliers, &b.algos, &reference(&b.reference)?)?;
    let summary = harness::summarize(&rows);
    write(&b.out_dir, "runs.csv", &harness::run_rows_csv(&rows))?;
    write(&b.out_dir, "summary.csv", &harness::summary_csv(&summary))?;
    write(&b.out_dir, "table.csv", &harness::budget_table_csv(&summary))?;
    let mut m = bench_manifest("bench-budget-table", b, cmd)?;
    m.sizes = a.sizes.clone();
    m.budgets = a.multipliers.clone();
    m.save(&b.out_dir)?;
    print!("{}", harness::budget_table_csv(&summary));
    Ok(())
}

fn cmd_compensation(a: &CompensationArgs, cmd: &Command) -> anyhow::Result<()> {
    let inputs = CompensationInputs { t_train: a.t_train, t_infer: a.t_infer, t_neigh: a.t_neigh, steps: a.steps };
    let n = harness::compensation(&inputs)?;
    if let Some(dir) = &a.out_dir {
        write(
            dir,
            "compensation.csv",
            &format!("t_train,t_neigh,t_infer,steps,n_comp\n{},{},{},{},{n}\n", a.t_train, a.t_neigh, a.t_infer, a.steps),
        )?;
        manifest("compensation", cmd, dir)?.save(dir)?;
    }
    println!("{n}");
    Ok(())
}

fn cmd_gen(a: &GenArgs, cmd: &Command) -> anyhow::Result<()> {
    let inst = generate(a.problem, a.n, RngSeed(a.seed))?;
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    fs::write(&a.out, instance_to_json(&inst, Some(RngSeed(a.seed))))?;
    let mut m = manifest("gen", cmd, dir)?;
    m.problem = Some(a.problem);
    m.sizes = vec![a.n];
    m.seeds = vec![a.seed];
    m.save(dir)?;
    Ok(())
}

/// Points every output location of a recorded command at `dir`.
fn redirect(cmd: &mut Command, dir: &Path) {
    match cmd {
        Command::Train(a) => a.out_dir = dir.to_path_buf(),
        Command::Solve(a) => a.out_dir = dir.to_path_buf(),
        Command::EvalOneStep(a) => a.out_dir = dir.to_path_buf(),
        Command::EvalMultiStep(a) => a.out_dir = dir.to_path_buf(),
        Command::BenchBicriteria(a) => a.bench.out_dir = dir.to_path_buf(),
        Command::BenchBudgetTable(a) => a.bench.out_dir = dir.to_path_buf(),
        Command::Compensation(a) => a.out_dir = Some(dir.to_path_buf()),
        Command::Gen(a) => a.out = dir.join(a.out.file_name().unwrap_or("instance.json".as_ref())),
        Command::Run(_) => {}
    }
}

fn execute(cmd: &Command) -> anyhow::Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(a, cmd),
        Command::Solve(a) => cmd_solve(a, cmd),
        Command::EvalOneStep(a) => cmd_one_step(a, cmd),
        Command::EvalMultiStep(a) => cmd_multi_step(a, cmd),
        Command::BenchBicriteria(a) => cmd_bicriteria(a, cmd),
        Command::BenchBudgetTable(a) => cmd_budget_table(a, cmd),
        Command::Compensation(a) => cmd_compensation(a, cmd),
        Command::Gen(a) => cmd_gen(a, cmd),
        Command::Run(r) => {
            let m = ExperimentManifest::load(&r.manifest)?;
            let mut recorded: Command = serde_json::from_value(m.args)
                .map_err(|e| Error::Data(format!("manifest arguments are not replayable: {e}")))?;
            if matches!(recorded, Command::Run(_)) {
                bail!(Error::Data("a manifest cannot replay another manifest".into()));
            }
            if let Some(dir) = &r.out_dir {
                redirect(&mut recorded, dir);
            }
            execute(&recorded)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Argument(_) | Error::Usage(_)) => 1,
        _ => 2,
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
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
