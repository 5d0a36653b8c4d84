//! Experiment drivers: one-step rank statistics, multi-step reward traces,
//! gap/evaluation trade-offs, budget tables and the training-time
//! compensation formula.
//!
//! Every driver is a pure function of its arguments: instances, starting
//! solutions and algorithm randomness are all derived from one seed, and
//! results come back in a fixed order regardless of how many worker threads
//! ran them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{brute_force_best, generate, Instance, ProblemKind, RngSeed, Solution};
use crate::model::{argmax_action, forward, sample_action, MaskPolicy, Mode, ModelParams};
use crate::operators::{
    action_gain, action_rank, apply, best_neighbor, improves, neighborhood, neighborhood_gains, node_pair_action,
    Action, OperatorKind,
};
use crate::search::{
    becker_construct, hill_climb, iterated_local_search, multi_start, tabu_search, Budget, SearchResult, Strategy,
    Variant,
};

/// `100 * (1 - (rank - 1) / (size - 1))`; a single-neighbor neighborhood is
/// the 100th percentile.
pub fn percentile(rank: usize, size: usize) -> f64 {
    if size <= 1 {
        return 100.0;
    }
    100.0 * (1.0 - (rank as f64 - 1.0) / (size as f64 - 1.0))
}

/// Relative distance to a reference value, in percent. Infinite when the
/// reference is 0 and the value is not.
pub fn gap_percent(value: f64, reference: f64) -> f64 {
    if value == reference {
        return 0.0;
    }
    (value - reference).abs() / reference.abs() * 100.0
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut k) = (0.0, 0usize);
    for x in xs {
        s += x;
        k += 1;
    }
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

/// Move-selection rule for the one- and multi-step evaluations.
#[derive(Clone, Copy)]
pub enum Policy<'a> {
    /// The network's argmax action, or a sample from it.
    Model { params: &'a ModelParams<f32>, sampled: bool },
    /// Always the best neighbor.
    Oracle,
    /// A uniformly drawn distinct neighbor.
    Uniform,
}

impl Policy<'_> {
    pub fn choose<R: Rng + ?Sized>(&self, inst: &Instance, sol: &Solution, op: OperatorKind, rng: &mut R) -> Result<Action> {
        match *self {
            Policy::Model { params, sampled } => {
                let dist = forward(params, inst, sol, op, MaskPolicy::Invalid, Mode::Eval)?;
                let pair = if sampled { sample_action(&dist, rng) } else { argmax_action(&dist) };
                Ok(node_pair_action(sol, None, pair.u, pair.v))
            }
            Policy::Oracle => best_neighbor(inst, sol, op)
                .map(|(a, _)| a)
                .ok_or_else(|| Error::Domain("empty neighborhood".into())),
            Policy::Uniform => {
                let nb = neighborhood(op, sol);
                if nb.is_empty() {
                    return Err(Error::Domain("empty neighborhood".into()));
                }
                Ok(nb[rng.gen_range(0..nb.len())])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepRow {
    pub instance: usize,
    pub rank: usize,
    pub neighborhood: usize,
    pub percentile: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepSummary {
    pub count: usize,
    pub mean_rank: f64,
    pub mean_percentile: f64,
    pub rank1_fraction: f64,
    pub improving_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneStepReport {
    pub rows: Vec<OneStepRow>,
    pub summary: OneStepSummary,
}

impl OneStepReport {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("instance,rank,neighborhood,percentile,gain\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.instance, r.rank, r.neighborhood, r.percentile, r.gain);
        }
        s
    }

    /// `rank,count` for every rank from 1 to the largest neighborhood.
    pub fn histogram_csv(&self) -> String {
        let max = self.rows.iter().map(|r| r.neighborhood).max().unwrap_or(0);
        let mut counts = vec![0usize; max + 1];
        for r in &self.rows {
            counts[r.rank] += 1;
        }
        let mut s = String::from("rank,count\n");
        for (rank, c) in counts.iter().enumerate().skip(1) {
            let _ = writeln!(s, "{rank},{c}");
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let m = &self.summary;
        format!(
            "count,mean_rank,mean_percentile,rank1_fraction,improving_fraction\n{},{},{},{},{}\n",
            m.count, m.mean_rank, m.mean_percentile, m.rank1_fraction, m.improving_fraction
        )
    }
}

/// Instance `k` of a seeded family.
pub fn family_instance(problem: ProblemKind, n: usize, seed: RngSeed, k: usize) -> Result<Instance> {
    generate(problem, n, seed.derive(n as u64).derive(k as u64))
}

/// Uniform random starting solution for instance `k` of a family.
pub fn family_start(inst: &Instance, seed: RngSeed, k: usize) -> Solution {
    let mut rng = seed.derive(inst.n() as u64).derive(k as u64).derive(1).rng();
    inst.random_solution(&mut rng)
}

/// Ranks the policy's action on `count` fresh instances with random
/// solutions.
pub fn one_step_eval(
    policy: Policy<'_>,
    problem: ProblemKind,
    n: usize,
    count: usize,
    op: OperatorKind,
    seed: RngSeed,
) -> Result<OneStepReport> {
    let rows: Vec<OneStepRow> = (0..count)
        .into_par_iter()
        .map(|k| {
            let inst = family_instance(problem, n, seed, k)?;
            let sol = family_start(&inst, seed, k);
            let mut rng = seed.derive(n as u64).derive(k as u64).derive(2).rng();
            let a = policy.choose(&inst, &sol, op, &mut rng)?;
            let rank = action_rank(&inst, &sol, op, a)?;
            let size = neighborhood(op, &sol).len();
            Ok(OneStepRow {
                instance: k,
                rank,
                neighborhood: size,
                percentile: percentile(rank, size),
                gain: action_gain(&inst, &sol, op, a)?,
            })
        })
        .collect::<Result<_>>()?;
    let summary = OneStepSummary {
        count,
        mean_rank: mean(rows.iter().map(|r| r.rank as f64)),
        mean_percentile: mean(rows.iter().map(|r| r.percentile)),
        rank1_fraction: mean(rows.iter().map(|r| f64::from(u8::from(r.rank == 1)))),
        improving_fraction: mean(rows.iter().map(|r| f64::from(u8::from(improves(r.gain))))),
    };
    Ok(OneStepReport { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStepRow {
    pub run: usize,
    pub step: usize,
    pub objective: f64,
    /// Improvement achieved by the chosen move.
    pub reward: f64,
    pub min_reward: f64,
    pub max_reward: f64,
}

pub const MULTI_STEP_HEADER: &str = "run,step,objective,reward,min_reward,max_reward";

pub fn multi_step_csv(rows: &[MultiStepRow]) -> String {
    let mut s = format!("{MULTI_STEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.run, r.step, r.objective, r.reward, r.min_reward, r.max_reward);
    }
    s
}

/// Applies the policy `steps` times on each of `runs` instances and records
/// the achieved improvement against the best and worst available ones.
pub fn multi_step_eval(
    policy: Policy<'_>,
    problem: ProblemKind,
    n: usize,
    op: OperatorKind,
    steps: usize,
    runs: usize,
    seed: RngSeed,
) -> Result<Vec<MultiStepRow>> {
    let per_run: Vec<Vec<MultiStepRow>> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let inst = family_instance(problem, n, seed, run)?;
            let mut sol = family_start(&inst, seed, run);
            let mut rng = seed.derive(n as u64).derive(run as u64).derive(2).rng();
            let mut rows = Vec::with_capacity(steps);
            for step in 0..steps {
                let gains = neighborhood_gains(&inst, &sol, op);
                let max = gains.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
                let min = gains.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
                let a = policy.choose(&inst, &sol, op, &mut rng)?;
                let reward = action_gain(&inst, &sol, op, a)?;
                sol = apply(op, &sol, a)?;
                rows.push(MultiStepRow {
                    run,
                    step,
                    objective: inst.objective(&sol)?,
                    reward,
                    min_reward: min,
                    max_reward: max,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_run.into_iter().flatten().collect())
}

/// A search algorithm as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Hc(Strategy),
    MultiStart(Strategy),
    Tabu(Variant),
    Ils(Variant),
    /// Greedy construction (PRP only), no search.
    Becker,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        use Strategy::*;
        match self {
            Algorithm::Hc(BestFirst) => "bfhc",
            Algorithm::Hc(Steepest) => "sahc",
            Algorithm::Hc(Stochastic) => "shc",
            Algorithm::Hc(Neural) => "nhc",
            Algorithm::MultiStart(BestFirst) => "msbfhc",
            Algorithm::MultiStart(Steepest) => "mssahc",
            Algorithm::MultiStart(Stochastic) => "msshc",
            Algorithm::MultiStart(Neural) => "msnhc",
            Algorithm::Tabu(Variant::BestFirst) => "bfts",
            Algorithm::Tabu(Variant::Neural) => "nts",
            Algorithm::Ils(Variant::BestFirst) => "bfils",
            Algorithm::Ils(Variant::Neural) => "nils",
            Algorithm::Becker => "becker",
        }
    }

    pub fn all() -> Vec<Algorithm> {
        use Strategy::*;
        let mut v = Vec::new();
        for s in [BestFirst, Steepest, Stochastic, Neural] {
            v.push(Algorithm::Hc(s));
        }
        for s in [BestFirst, Steepest, Stochastic, Neural] {
            v.push(Algorithm::MultiStart(s));
        }
        for x in [Variant::BestFirst, Variant::Neural] {
            v.push(Algorithm::Tabu(x));
            v.push(Algorithm::Ils(x));
        }
        v.push(Algorithm::Becker);
        v
    }

    pub fn needs_model(self) -> bool {
        matches!(
            self,
            Algorithm::Hc(Strategy::Neural)
                | Algorithm::MultiStart(Strategy::Neural)
                | Algorithm::Tabu(Variant::Neural)
                | Algorithm::Ils(Variant::Neural)
        )
    }

    /// Stable per-algorithm salt for seed derivation.
    fn salt(self) -> u64 {
        self.name().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x1000_0000_01b3))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Algorithm::all()
            .into_iter()
            .find(|a| a.name() == lower)
            .ok_or_else(|| Error::arg(format!("unknown algorithm '{s}'")))
    }
}

/// Tabu memory size used when none is given.
pub const DEFAULT_TABU_SIZE: usize = 200;

/// Runs one algorithm from `start`.
#[allow(clippy::too_many_arguments)]
pub fn run_algorithm<R: Rng + ?Sized>(
    alg: Algorithm,
    inst: &Instance,
    start: &Solution,
    op: OperatorKind,
    budget: Budget,
    model: Option<&ModelParams<f32>>,
    tabu_size: usize,
    rng: &mut R,
) -> Result<SearchResult> {
    if alg.needs_model() && model.is_none() {
        return Err(Error::arg(format!("{alg} needs a model checkpoint")));
    }
    match alg {
        Algorithm::Hc(s) => hill_climb(s, inst, start, op, budget, model, rng),
        Algorithm::MultiStart(s) => multi_start(s, inst, op, budget, model, rng),
        Algorithm::Tabu(v) => tabu_search(v, inst, start, op, budget, tabu_size, model, rng),
        Algorithm::Ils(v) => iterated_local_search(v, inst, start, op, budget, model, rng),
        Algorithm::Becker => {
            let Instance::Prp(p) = inst else {
                return Err(Error::arg("the constructive method applies to PRP only"));
            };
            let sol = Solution::Perm(becker_construct(p));
            let objective = inst.objective(&sol)?;
            Ok(SearchResult { solution: sol, objective, evals: 0, moves: 0, trace: Default::default() })
        }
    }
}

/// Best-known objective values keyed by `(n, instance index)`; a `None`
/// size matches every size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BestKnown {
    values: HashMap<(Option<usize>, usize), f64>,
}

impl BestKnown {
    /// Parses `instance,value` or `n,instance,value` CSV (header required).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, header)) = lines.next() else {
            return Err(Error::Data("best-known file is empty".into()));
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let sized = match cols.as_slice() {
            ["instance", "value"] => false,
            ["n", "instance", "value"] => true,
            _ => return Err(Error::Data(format!("unexpected best-known header '{header}'"))),
        };
        let mut values = HashMap::new();
        for (ln, line) in lines {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Format { line: ln + 1, token: 0, msg: format!("malformed best-known row '{line}'") };
            let (n, k, v) = match (sized, f.as_slice()) {
                (false, [k, v]) => (None, k, v),
                (true, [n, k, v]) => (Some(n.parse::<usize>().map_err(|_| bad())?), k, v),
                _ => return Err(bad()),
            };
            let k = k.parse::<usize>().map_err(|_| bad())?;
            let v = v.parse::<f64>().map_err(|_| bad())?;
            values.insert((n, k), v);
        }
        Ok(BestKnown { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, n: Option<usize>, instance: usize, value: f64) {
        self.values.insert((n, instance), value);
    }

    pub fn get(&self, n: usize, instance: usize) -> Option<f64> {
        self.values.get(&(Some(n), instance)).or_else(|| self.values.get(&(None, instance))).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut keys: Vec<_> = self.values.keys().copied().collect();
        keys.sort();
        let mut s = String::from("n,instance,value\n");
        for (n, k) in keys {
            let _ = writeln!(s, "{},{},{}", n.map(|v| v.to_string()).unwrap_or_default(), k, self.values[&(n, k)]);
        }
        s
    }
}

/// Where gap references come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Exact optimum by enumeration (small sizes only).
    BruteForce,
    BestKnown(BestKnown),
    /// Best value reached by any algorithm in the same experiment.
    Incumbent,
}

fn exact_reference(inst: &Instance) -> Result<f64> {
    brute_force_best(inst).map(|(_, f)| f).map_err(|e| match e {
        Error::Size(m) => Error::Data(format!("no best-known value available: {m}")),
        other => other,
    })
}

fn reference_for(reference: &Reference, inst: &Instance, k: usize) -> Result<Option<f64>> {
    match reference {
        Reference::BruteForce => exact_reference(inst).map(Some),
        Reference::BestKnown(b) => b
            .get(inst.n(), k)
            .map(Some)
            .ok_or_else(|| Error::Data(format!("no best-known value for n = {}, instance {k}", inst.n()))),
        Reference::Incumbent => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub algorithm: String,
    pub n: usize,
    pub budget: Option<usize>,
    pub instance: usize,
    pub objective: f64,
    pub reference: f64,
    pub gap_percent: f64,
    pub evals: usize,
}

pub const RUN_ROWS_HEADER: &str = "algorithm,n,budget,instance,objective,reference,gap_percent,evaluations";

pub fn run_rows_csv(rows: &[RunRow]) -> String {
    let mut s = format!("{RUN_ROWS_HEADER}\n");
    for r in rows {
        let b = r.budget.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.algorithm, r.n, b, r.instance, r.objective, r.reference, r.gap_percent, r.evals
        );
    }
    s
}

/// Per-algorithm means over run rows, in first-appearance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub n: usize,
    pub budget: Option<usize>,
    pub mean_gap_percent: f64,
    pub mean_evals: f64,
}

pub fn summarize(rows: &[RunRow]) -> Vec<AlgorithmSummary> {
    let mut keys: Vec<(String, usize, Option<usize>)> = Vec::new();
    for r in rows {
        let key = (r.algorithm.clone(), r.n, r.budget);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(algorithm, n, budget)| {
            let sel: Vec<&RunRow> =
                rows.iter().filter(|r| r.algorithm == algorithm && r.n == n && r.budget == budget).collect();
            AlgorithmSummary {
                mean_gap_percent: mean(sel.iter().map(|r| r.gap_percent)),
                mean_evals: mean(sel.iter().map(|r| r.evals as f64)),
                algorithm,
                n,
                budget,
            }
        })
        .collect()
}

pub fn summary_csv(summary: &[AlgorithmSummary]) -> String {
    let mut s = String::from("algorithm,n,budget,mean_gap_percent,mean_evaluations\n");
    for a in summary {
        let b = a.budget.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", a.algorithm, a.n, b, a.mean_gap_percent, a.mean_evals);
    }
    s
}

/// Shared settings of the benchmark drivers.
#[derive(Clone, Copy)]
pub struct BenchSetup<'a> {
    pub problem: ProblemKind,
    pub op: OperatorKind,
    pub count: usize,
    pub seed: RngSeed,
    pub model: Option<&'a ModelParams<f32>>,
    pub tabu_size: usize,
}

/// Runs every `(algorithm, budget)` pair on every instance of size `n`;
/// `None` budgets mean "until a local optimum" (hill climbers only).
fn run_grid(
    setup: &BenchSetup<'_>,
    n: usize,
    algorithms: &[Algorithm],
    budgets: &[Option<usize>],
    reference: &Reference,
) -> Result<Vec<RunRow>> {
    for &alg in algorithms {
        if alg.needs_model() && setup.model.is_none() {
            return Err(Error::arg(format!("{alg} needs a model checkpoint")));
        }
        if !matches!(alg, Algorithm::Hc(_) | Algorithm::Becker) && budgets.contains(&None) {
            return Err(Error::arg(format!("{alg} needs an evaluation budget")));
        }
    }
    let per_instance: Vec<Vec<RunRow>> = (0..setup.count)
        .into_par_iter()
        .map(|k| {
            let inst = family_instance(setup.problem, n, setup.seed, k)?;
            let start = family_start(&inst, setup.seed, k);
            let exact = reference_for(reference, &inst, k)?;
            let mut rows = Vec::new();
            for &budget in budgets {
                for &alg in algorithms {
                    let mut rng = setup.seed.derive(n as u64).derive(k as u64).derive(alg.salt()).rng();
                    let b = Budget::evaluations(budget.unwrap_or(usize::MAX));
                    let r = run_algorithm(alg, &inst, &start, setup.op, b, setup.model, setup.tabu_size, &mut rng)?;
                    rows.push(RunRow {
                        algorithm: alg.name().to_string(),
                        n,
                        budget,
                        instance: k,
                        objective: r.objective,
                        reference: exact.unwrap_or(f64::NAN),
                        gap_percent: f64::NAN,
                        evals: r.evals,
                    });
                }
            }
            if exact.is_none() {
                let sense = inst.sense();
                let best = rows.iter().map(|r| r.objective).reduce(|a, b| if sense.better(b, a) { b } else { a });
                let best = best.unwrap_or(f64::NAN);
                rows.iter_mut().for_each(|r| r.reference = best);
            }
            for r in &mut rows {
                r.gap_percent = gap_percent(r.objective, r.reference);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}

/// Runs each algorithm to its local optimum (or its budget) on `count`
/// instances and reports final gap against evaluations spent.
pub fn bicriteria_eval(
    setup: &BenchSetup<'_>,
    n: usize,
    algorithms: &[Algorithm],
    budget: Option<usize>,
    reference: &Reference,
) -> Result<Vec<RunRow>> {
    run_grid(setup, n, algorithms, &[budget], reference)
}

/// Mean gap for every (size, budget multiplier x size, algorithm) cell.
pub fn budget_table(
    setup: &BenchSetup<'_>,
    sizes: &[usize],
    multipliers: &[usize],
    algorithms: &[Algorithm],
    reference: &Reference,
) -> Result<Vec<RunRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        let budgets: Vec<Option<usize>> = multipliers.iter().map(|m| Some(m * n)).collect();
        rows.extend(run_grid(setup, n, algorithms, &budgets, reference)?);
    }
    Ok(rows)
}

/// Table layout: one row per algorithm, one column per `(n, E)` cell.
pub fn budget_table_csv(summary: &[AlgorithmSummary]) -> String {
    let mut cols: Vec<(usize, Option<usize>)> = Vec::new();
    let mut algs: Vec<&str> = Vec::new();
    for a in summary {
        if !cols.contains(&(a.n, a.budget)) {
            cols.push((a.n, a.budget));
        }
        if !algs.contains(&a.algorithm.as_str()) {
            algs.push(&a.algorithm);
        }
    }
    let mut s = String::from("algorithm");
    for (n, b) in &cols {
        let _ = write!(s, ",n{n}_e{}", b.map(|b| b.to_string()).unwrap_or_default());
    }
    s.push('\n');
    for alg in algs {
        s.push_str(alg);
        for &(n, b) in &cols {
            let cell = summary.iter().find(|a| a.algorithm == alg && a.n == n && a.budget == b);
            let _ = write!(s, ",{}", cell.map(|c| c.mean_gap_percent.to_string()).unwrap_or_default());
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationInputs {
    /// Training time in seconds.
    pub t_train: f64,
    /// Model inference time per step, seconds.
    pub t_infer: f64,
    /// Time to evaluate one full neighborhood, seconds.
    pub t_neigh: f64,
    /// Steps per execution.
    pub steps: u64,
}

/// Minimum number of solved instances for which training pays off:
/// `ceil(t_train / (T * (t_neigh - t_infer)))`.
pub fn compensation(c: &CompensationInputs) -> Result<u64> {
    if !(c.t_train >= 0.0 && c.t_infer >= 0.0 && c.t_neigh >= 0.0) || !c.t_train.is_finite() {
        return Err(Error::arg("times must be finite and non-negative"));
    }
    if c.steps == 0 {
        return Err(Error::arg("steps per execution must be positive"));
    }
    if c.t_neigh <= c.t_infer {
        return Err(Error::Domain(format!(
            "inference ({} s) is not faster than a neighborhood scan ({} s); training never pays off",
            c.t_infer, c.t_neigh
        )));
    }
    Ok((c.t_train / (c.steps as f64 * (c.t_neigh - c.t_infer))).ceil() as u64)
}

/// Smallest instance count at which the total conventional time reaches the
/// neural time including training, by direct comparison of both totals.
pub fn compensation_by_crossing(c: &CompensationInputs) -> Result<u64> {
    compensation(c)?;
    let t = c.steps as f64;
    let conv = |k: u64| c.t_neigh * t * k as f64;
    let ni = |k: u64| c.t_train + c.t_infer * t * k as f64;
    let (mut lo, mut hi) = (0u64, 1u64);
    while conv(hi) < ni(hi) {
        hi *= 2;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if conv(mid) >= ni(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Everything needed to repeat an experiment; written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub kind: String,
    pub problem: Option<ProblemKind>,
    #[serde(default)]
    pub sizes: Vec<usize>,
    pub count: Option<usize>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub budgets: Vec<usize>,
    #[serde(default)]
    pub algorithms: Vec<String>,
    #[serde(default)]
    pub checkpoints: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// The full argument set of the run, replayable as is.
    pub args: serde_json::Value,
    pub tool_version: String,
}

impl ExperimentManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(Self::FILE_NAME);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("bad manifest {}: {e}", path.display())))
    }
}
