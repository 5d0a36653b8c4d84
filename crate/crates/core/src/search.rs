//! Local search drivers: hill climbing with conventional or neural move
//! selection, multi-start, tabu search and iterated local search, plus a
//! greedy constructive method for PRP.
//!
//! Every candidate objective (or exact delta) computation costs one
//! evaluation. Budgets are hard: no algorithm evaluates more candidates than
//! it is allowed to.

use std::collections::{HashSet, VecDeque};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{Instance, Permutation, PrpInstance, Solution};
use crate::model::{forward, probability_order, MaskPolicy, Mode, ModelParams, NodePair};
use crate::operators::{apply_in_place, canonical, delta_unchecked, improves, neighborhood, Action, OperatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_evaluations: Option<usize>,
    pub max_seconds: Option<f64>,
}

impl Budget {
    pub fn evaluations(e: usize) -> Self {
        Budget { max_evaluations: Some(e), max_seconds: None }
    }

    pub fn seconds(s: f64) -> Self {
        Budget { max_evaluations: None, max_seconds: Some(s) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations.is_none() && self.max_seconds.is_none() {
            return Err(Error::arg("a budget needs an evaluation or a time limit"));
        }
        if self.max_seconds.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::arg("time limit must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub evals: usize,
    pub seconds: f64,
    pub best: f64,
    pub current: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub rows: Vec<TraceRow>,
}

impl SearchTrace {
    pub const HEADER: &'static str = "evals,seconds,best,current";

    /// CSV text; with `record_time` false the seconds column is zero so the
    /// output is reproducible byte for byte.
    pub fn to_csv(&self, record_time: bool) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            let secs = if record_time { r.seconds } else { 0.0 };
            s.push_str(&format!("{},{},{},{}\n", r.evals, secs, r.best, r.current));
        }
        s
    }
}

/// How the next move is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// First improving neighbor in row-major action order.
    BestFirst,
    /// Best improving neighbor of a full scan.
    Steepest,
    /// Uniformly sampled neighbors, first improving one accepted.
    Stochastic,
    /// First improving neighbor in model-probability order.
    Neural,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "best_first" | "bfhc" => Ok(Strategy::BestFirst),
            "steepest" | "sahc" => Ok(Strategy::Steepest),
            "stochastic" | "shc" => Ok(Strategy::Stochastic),
            "neural" | "nhc" => Ok(Strategy::Neural),
            _ => Err(Error::arg(format!("unknown strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub solution: Solution,
    pub objective: f64,
    pub evals: usize,
    /// Accepted moves (including worsening ones for tabu search).
    pub moves: usize,
    pub trace: SearchTrace,
}

/// Shared state of one search run: budget meter, incumbent and trace.
struct Run<'a> {
    inst: &'a Instance,
    op: OperatorKind,
    model: Option<&'a ModelParams<f32>>,
    max_evals: Option<usize>,
    max_seconds: Option<f64>,
    used: usize,
    start: Instant,
    best: Solution,
    best_f: f64,
    moves: usize,
    trace: SearchTrace,
}

impl<'a> Run<'a> {
    fn new(
        inst: &'a Instance,
        op: OperatorKind,
        budget: Budget,
        model: Option<&'a ModelParams<f32>>,
        start_sol: &Solution,
    ) -> Result<Self> {
        budget.validate()?;
        if op.acts_on_partitions() != start_sol.as_part().is_some() {
            return Err(Error::arg(format!("operator {op} does not apply to this solution")));
        }
        if let Some(m) = model {
            if m.hyper.problem != inst.problem() {
                return Err(Error::arg(format!("model is for {}, instance is {}", m.hyper.problem, inst.problem())));
            }
        }
        let f = inst.objective(start_sol)?;
        let mut run = Run {
            inst,
            op,
            model,
            max_evals: budget.max_evaluations,
            max_seconds: budget.max_seconds,
            used: 0,
            start: Instant::now(),
            best: start_sol.clone(),
            best_f: f,
            moves: 0,
            trace: SearchTrace::default(),
        };
        run.record(f);
        Ok(run)
    }

    fn remaining(&self) -> usize {
        match self.max_evals {
            Some(m) => m.saturating_sub(self.used),
            None => usize::MAX,
        }
    }

    fn exhausted(&self) -> bool {
        self.remaining() == 0 || self.max_seconds.is_some_and(|s| self.start.elapsed().as_secs_f64() >= s)
    }

    /// Charges one evaluation if the budget allows it.
    fn charge(&mut self) -> bool {
        if self.exhausted() {
            return false;
        }
        self.used += 1;
        true
    }

    fn offer(&mut self, sol: &Solution, f: f64) {
        if self.inst.sense().better(f, self.best_f) {
            self.best_f = f;
            self.best.clone_from(sol);
        }
    }

    fn record(&mut self, current: f64) {
        self.trace.rows.push(TraceRow {
            evals: self.used,
            seconds: self.start.elapsed().as_secs_f64(),
            best: self.best_f,
            current,
        });
    }

    fn require_model(&self) -> Result<&'a ModelParams<f32>> {
        self.model.ok_or_else(|| Error::arg("the neural strategy needs a model"))
    }

    fn finish(self) -> SearchResult {
        SearchResult {
            solution: self.best,
            objective: self.best_f,
            evals: self.used,
            moves: self.moves,
            trace: self.trace,
        }
    }

    /// Distinct candidate moves in model-probability order.
    fn neural_candidates(&self, sol: &Solution) -> Result<Vec<Action>> {
        let model = self.require_model()?;
        let dist = forward(model, self.inst, sol, self.op, MaskPolicy::Invalid, Mode::Eval)?;
        let pos = sol.as_perm().map(|p| p.positions());
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for cell in probability_order(&dist) {
            let pair = NodePair::from_cell(cell, dist.n);
            let a = crate::operators::node_pair_action(sol, pos.as_deref(), pair.u, pair.v);
            if self.op.validate(sol, a).is_err() {
                continue;
            }
            if let Some(c) = canonical(self.op, sol, a) {
                if seen.insert(c) {
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    /// Climbs from `sol` until a local optimum or the budget ends. Returns
    /// the final solution and objective.
    fn climb<R: Rng + ?Sized>(
        &mut self,
        strategy: Strategy,
        mut sol: Solution,
        mut f: f64,
        rng: &mut R,
    ) -> Result<(Solution, f64)> {
        let sense = self.inst.sense();
        let n = sol.len();
        // best-first resumes its row-major scan after the last accepted move
        let mut cursor = 0usize;
        loop {
            if self.exhausted() {
                break;
            }
            let chosen: Option<(Action, f64)> = match strategy {
                Strategy::BestFirst | Strategy::Neural => {
                    let mut cands = if strategy == Strategy::Neural {
                        self.neural_candidates(&sol)?
                    } else {
                        neighborhood(self.op, &sol)
                    };
                    let offset = if cands.is_empty() { 0 } else { cursor % cands.len() };
                    cands.rotate_left(offset);
                    let mut found = None;
                    for (k, a) in cands.into_iter().enumerate() {
                        if !self.charge() {
                            break;
                        }
                        let d = delta_unchecked(self.inst, &sol, self.op, a);
                        if improves(sense.gain(d)) {
                            found = Some((a, d));
                            if strategy == Strategy::BestFirst {
                                cursor = offset + k + 1;
                            }
                            break;
                        }
                    }
                    found
                }
                Strategy::Steepest => {
                    let mut best: Option<(Action, f64)> = None;
                    for a in neighborhood(self.op, &sol) {
                        if !self.charge() {
                            break;
                        }
                        let d = delta_unchecked(self.inst, &sol, self.op, a);
                        if improves(sense.gain(d)) && best.is_none_or(|(_, bd)| sense.gain(d) > sense.gain(bd)) {
                            best = Some((a, d));
                        }
                    }
                    best
                }
                Strategy::Stochastic => {
                    let cands = neighborhood(self.op, &sol);
                    let patience = n * (n - 1);
                    let mut found = None;
                    let mut misses = 0;
                    while misses < patience && !cands.is_empty() {
                        if !self.charge() {
                            break;
                        }
                        let a = cands[rng.gen_range(0..cands.len())];
                        let d = delta_unchecked(self.inst, &sol, self.op, a);
                        if improves(sense.gain(d)) {
                            found = Some((a, d));
                            break;
                        }
                        misses += 1;
                    }
                    found
                }
            };
            let Some((a, _)) = chosen else { break };
            apply_in_place(self.op, &mut sol, a);
            // recompute rather than accumulate deltas so rounding never drifts
            f = self.inst.objective(&sol)?;
            self.moves += 1;
            self.offer(&sol, f);
            self.record(f);
        }
        Ok((sol, f))
    }
}

/// Plain hill climbing from `start`.
pub fn hill_climb<R: Rng + ?Sized>(
    strategy: Strategy,
    inst: &Instance,
    start: &Solution,
    op: OperatorKind,
    budget: Budget,
    model: Option<&ModelParams<f32>>,
    rng: &mut R,
) -> Result<SearchResult> {
    let mut run = Run::new(inst, op, budget, model, start)?;
    if strategy == Strategy::Neural {
        run.require_model()?;
    }
    let f = run.best_f;
    let (_, f_end) = run.climb(strategy, start.clone(), f, rng)?;
    run.record(f_end);
    Ok(run.finish())
}

/// Restarts hill climbing from uniform random solutions until the budget
/// is spent. Each fresh start costs one evaluation.
pub fn multi_start<R: Rng + ?Sized>(
    strategy: Strategy,
    inst: &Instance,
    op: OperatorKind,
    budget: Budget,
    model: Option<&ModelParams<f32>>,
    rng: &mut R,
) -> Result<SearchResult> {
    let first = inst.random_solution(rng);
    let mut run = Run::new(inst, op, budget, model, &first)?;
    if strategy == Strategy::Neural {
        run.require_model()?;
    }
    let mut next = Some(first);
    while !run.exhausted() {
        let start = next.take().unwrap_or_else(|| inst.random_solution(rng));
        if !run.charge() {
            break;
        }
        let f = inst.objective(&start)?;
        run.offer(&start, f);
        run.record(f);
        let (_, f_end) = run.climb(strategy, start, f, rng)?;
        run.record(f_end);
    }
    Ok(run.finish())
}

/// Which ordering tabu search and ILS use to scan neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    BestFirst,
    Neural,
}

impl Variant {
    fn strategy(self) -> Strategy {
        match self {
            Variant::BestFirst => Strategy::BestFirst,
            Variant::Neural => Strategy::Neural,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<Strategy>()? {
            Strategy::BestFirst => Ok(Variant::BestFirst),
            Strategy::Neural => Ok(Variant::Neural),
            other => Err(Error::arg(format!("{other:?} is not available here; use best_first or neural"))),
        }
    }
}

/// Short-term memory of recent moves.
#[derive(Debug, Clone)]
pub struct TabuMemory {
    cap: usize,
    ring: VecDeque<Action>,
}

impl TabuMemory {
    pub fn new(cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::arg("tabu memory size must be at least 1"));
        }
        Ok(TabuMemory { cap, ring: VecDeque::with_capacity(cap) })
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn push(&mut self, a: Action) {
        if self.ring.len() == self.cap {
            self.ring.pop_front();
        }
        self.ring.push_back(a);
    }

    pub fn contains(&self, a: Action) -> bool {
        self.ring.contains(&a)
    }
}

/// Canonical form of the move that undoes `a` (for insert, moving the item
/// back; every other operator is its own inverse).
fn inverse(op: OperatorKind, sol_after: &Solution, a: Action) -> Option<Action> {
    match op {
        OperatorKind::Insert => canonical(op, sol_after, Action::new(a.j, a.i)),
        _ => canonical(op, sol_after, a),
    }
}

/// Tabu search: takes the first improving allowed move in scan order, or
/// the best allowed move of a full scan when none improves. Recently used
/// moves (and their inverses) are forbidden unless they produce a new
/// incumbent.
pub fn tabu_search<R: Rng + ?Sized>(
    variant: Variant,
    inst: &Instance,
    start: &Solution,
    op: OperatorKind,
    budget: Budget,
    memory: usize,
    model: Option<&ModelParams<f32>>,
    _rng: &mut R,
) -> Result<SearchResult> {
    let mut tabu = TabuMemory::new(memory)?;
    let mut run = Run::new(inst, op, budget, model, start)?;
    if variant == Variant::Neural {
        run.require_model()?;
    }
    let sense = inst.sense();
    let mut sol = start.clone();
    let mut f = run.best_f;
    while !run.exhausted() {
        let cands =
            if variant == Variant::Neural { run.neural_candidates(&sol)? } else { neighborhood(op, &sol) };
        let mut improving = None;
        let mut fallback: Option<(Action, f64)> = None;
        let mut complete = true;
        for a in cands {
            if !run.charge() {
                complete = false;
                break;
            }
            let d = delta_unchecked(inst, &sol, op, a);
            let is_tabu = tabu.contains(a);
            let aspirates = sense.better(f + d, run.best_f);
            if is_tabu && !aspirates {
                continue;
            }
            if improves(sense.gain(d)) {
                improving = Some(a);
                break;
            }
            if fallback.is_none_or(|(_, bd)| sense.gain(d) > sense.gain(bd)) {
                fallback = Some((a, d));
            }
        }
        // a worsening move needs the whole neighborhood to have been seen
        let chosen = improving.or(if complete { fallback.map(|x| x.0) } else { None });
        let Some(a) = chosen else { break };
        apply_in_place(op, &mut sol, a);
        if let Some(inv) = inverse(op, &sol, a) {
            tabu.push(inv);
        }
        f = inst.objective(&sol)?;
        run.moves += 1;
        run.offer(&sol, f);
        run.record(f);
    }
    run.record(f);
    Ok(run.finish())
}

/// Number of random swaps applied by the ILS perturbation:
/// `floor((n / 2) * remaining / total)`.
pub fn perturbation_strength(n: usize, remaining: usize, total: usize) -> usize {
    if total == 0 {
        return 0;
    }
    (n as u128 * remaining.min(total) as u128 / (2 * total as u128)) as usize
}

/// Applies `k` uniform random swaps: two positions of a permutation, or two
/// nodes on opposite sides of a bipartition.
pub fn perturb<R: Rng + ?Sized>(sol: &Solution, k: usize, rng: &mut R) -> Solution {
    let mut out = sol.clone();
    let n = sol.len();
    if n < 2 {
        return out;
    }
    for _ in 0..k {
        match &mut out {
            Solution::Perm(p) => {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                p.order_mut().swap(i, j);
            }
            Solution::Part(b) => {
                let s = b.sides_mut();
                let i = rng.gen_range(0..n);
                let others: Vec<usize> = (0..n).filter(|&j| s[j] != s[i]).collect();
                let j = others[rng.gen_range(0..others.len())];
                s.swap(i, j);
            }
        }
    }
    out
}

/// Iterated local search: climb, perturb the incumbent with a number of
/// random swaps that shrinks as the budget is spent, climb again. Each
/// perturbed solution costs one evaluation.
pub fn iterated_local_search<R: Rng + ?Sized>(
    variant: Variant,
    inst: &Instance,
    start: &Solution,
    op: OperatorKind,
    budget: Budget,
    model: Option<&ModelParams<f32>>,
    rng: &mut R,
) -> Result<SearchResult> {
    let mut run = Run::new(inst, op, budget, model, start)?;
    if variant == Variant::Neural {
        run.require_model()?;
    }
    let strategy = variant.strategy();
    let n = inst.n();
    let f0 = run.best_f;
    let (_, mut f) = run.climb(strategy, start.clone(), f0, rng)?;
    while !run.exhausted() {
        let k = match (run.max_evals, run.max_seconds) {
            (Some(total), _) => perturbation_strength(n, run.remaining(), total),
            (None, Some(secs)) => {
                let left = (secs - run.start.elapsed().as_secs_f64()).max(0.0);
                (n as f64 / 2.0 * left / secs).floor() as usize
            }
            (None, None) => unreachable!("validated budget"),
        };
        let next = perturb(&run.best, k, rng);
        if !run.charge() {
            break;
        }
        let fp = inst.objective(&next)?;
        run.offer(&next, fp);
        run.record(fp);
        let (_, fe) = run.climb(strategy, next, fp, rng)?;
        f = fe;
    }
    run.record(f);
    Ok(run.finish())
}

/// Greedy construction for PRP: repeatedly places next the unplaced item
/// with the largest ratio of outgoing to incoming preference among the
/// unplaced items. A zero incoming sum counts as an infinite ratio; ties go
/// to the smallest index.
pub fn becker_construct(inst: &PrpInstance) -> Permutation {
    let n = inst.n();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !placed[i]) {
            let (mut row, mut col) = (0.0, 0.0);
            for j in (0..n).filter(|&j| !placed[j] && j != i) {
                row += inst.b(i, j);
                col += inst.b(j, i);
            }
            let q = if col == 0.0 { f64::INFINITY } else { row / col };
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((i, q));
            }
        }
        let (i, _) = best.expect("an unplaced item remains");
        placed[i] = true;
        order.push(i);
    }
    Permutation::new(order).expect("every item placed once")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{brute_force_best, generate, ProblemKind, RngSeed};
    use crate::operators::best_neighbor;

    fn local_opt(inst: &Instance, sol: &Solution, op: OperatorKind) -> bool {
        best_neighbor(inst, sol, op).is_none_or(|(_, d)| !improves(inst.sense().gain(d)))
    }

    #[test]
    fn optimum_is_left_alone() {
        let inst = generate(ProblemKind::Prp, 6, RngSeed(1)).unwrap();
        let (best, f) = brute_force_best(&inst).unwrap();
        for s in [Strategy::BestFirst, Strategy::Steepest, Strategy::Stochastic] {
            let r = hill_climb(s, &inst, &best, OperatorKind::Insert, Budget::evaluations(10_000), None, &mut RngSeed(0).rng())
                .unwrap();
            assert_eq!((r.moves, r.objective, &r.solution), (0, f, &best));
        }
    }

    #[test]
    fn climbers_reach_local_optima_with_exact_accounting() {
        for seed in 0..5 {
            let inst = generate(ProblemKind::Prp, 6, RngSeed(seed)).unwrap();
            let start = inst.random_solution(&mut RngSeed(seed + 50).rng());
            for s in [Strategy::BestFirst, Strategy::Steepest] {
                let r =
                    hill_climb(s, &inst, &start, OperatorKind::Insert, Budget::evaluations(1_000_000), None, &mut RngSeed(0).rng())
                        .unwrap();
                assert!(local_opt(&inst, &r.solution, OperatorKind::Insert));
                assert_eq!(r.objective, inst.objective(&r.solution).unwrap());
                if s == Strategy::Steepest {
                    assert_eq!(r.evals, (r.moves + 1) * 25);
                }
                for w in r.trace.rows.windows(2) {
                    assert!(w[1].evals >= w[0].evals && w[1].best >= w[0].best);
                    assert!(w[1].current > w[0].current || w[1].current == w[0].current);
                }
            }
        }
    }

    #[test]
    fn budgets_are_hard() {
        let inst = generate(ProblemKind::Tsp, 12, RngSeed(3)).unwrap();
        let start = inst.random_solution(&mut RngSeed(4).rng());
        for e in [0, 1, 7, 60, 500] {
            for s in [Strategy::BestFirst, Strategy::Steepest, Strategy::Stochastic] {
                let r = hill_climb(s, &inst, &start, OperatorKind::TwoOpt, Budget::evaluations(e), None, &mut RngSeed(0).rng())
                    .unwrap();
                assert!(r.evals <= e);
                let m = multi_start(s, &inst, OperatorKind::TwoOpt, Budget::evaluations(e), None, &mut RngSeed(1).rng())
                    .unwrap();
                assert_eq!(m.evals, e, "multi-start spends everything");
            }
            let t = tabu_search(Variant::BestFirst, &inst, &start, OperatorKind::TwoOpt, Budget::evaluations(e), 20, None, &mut RngSeed(0).rng())
                .unwrap();
            assert!(t.evals <= e);
            let i = iterated_local_search(Variant::BestFirst, &inst, &start, OperatorKind::TwoOpt, Budget::evaluations(e), None, &mut RngSeed(0).rng())
                .unwrap();
            assert_eq!(i.evals, e);
        }
        let r = hill_climb(Strategy::Steepest, &inst, &start, OperatorKind::TwoOpt, Budget::evaluations(0), None, &mut RngSeed(0).rng())
            .unwrap();
        assert_eq!(r.solution, start);
    }

    #[test]
    fn tabu_memory_contract() {
        let mut m = TabuMemory::new(2).unwrap();
        m.push(Action::new(0, 1));
        m.push(Action::new(2, 3));
        assert!(m.contains(Action::new(0, 1)));
        m.push(Action::new(4, 5));
        assert!(!m.contains(Action::new(0, 1)));
        assert_eq!((m.len(), m.capacity()), (2, 2));
        assert!(TabuMemory::new(0).is_err());
    }

    #[test]
    fn tabu_escapes_local_optima_and_keeps_best_monotone() {
        let inst = generate(ProblemKind::Prp, 8, RngSeed(9)).unwrap();
        let start = inst.random_solution(&mut RngSeed(10).rng());
        let hc = hill_climb(Strategy::BestFirst, &inst, &start, OperatorKind::Swap, Budget::evaluations(5000), None, &mut RngSeed(0).rng())
            .unwrap();
        let ts = tabu_search(Variant::BestFirst, &inst, &start, OperatorKind::Swap, Budget::evaluations(5000), 10, None, &mut RngSeed(0).rng())
            .unwrap();
        assert!(ts.objective >= hc.objective);
        assert!(ts.moves > hc.moves);
        for w in ts.trace.rows.windows(2) {
            assert!(w[1].best >= w[0].best);
        }
    }

    #[test]
    fn perturbation_formula_and_reach() {
        assert_eq!(perturbation_strength(20, 1000, 1000), 10);
        assert_eq!(perturbation_strength(20, 0, 1000), 0);
        assert_eq!(perturbation_strength(20, 499, 1000), 4);
        let sol = Solution::Perm(Permutation::identity(30));
        let mut rng = RngSeed(2).rng();
        for k in 0..8 {
            let p = perturb(&sol, k, &mut rng);
            let moved = p.as_perm().unwrap().order().iter().enumerate().filter(|(i, &v)| *i != v).count();
            assert!(moved <= 2 * k);
        }
        let part = Solution::Part(crate::instances::Bipartition::new(vec![0, 0, 0, 1, 1, 1]).unwrap());
        assert!(perturb(&part, 5, &mut rng).as_part().unwrap().is_balanced());
    }

    #[test]
    fn becker_cases() {
        let one = PrpInstance::new(1, vec![0.0]).unwrap();
        assert_eq!(becker_construct(&one).order(), &[0]);
        let flat = PrpInstance::new(4, vec![1.0; 16]).unwrap();
        assert_eq!(becker_construct(&flat).order(), &[0, 1, 2, 3]);
        // item 2 beats everyone, item 0 loses to everyone
        let mut b = vec![0.0; 9];
        b[2 * 3] = 1.0;
        b[2 * 3 + 1] = 1.0;
        b[1 * 3] = 1.0;
        let inst = PrpInstance::new(3, b).unwrap();
        assert_eq!(becker_construct(&inst).order(), &[2, 1, 0]);
    }
}
