//! Problem instances, solutions and objective functions.
//!
//! Three problems share one vocabulary:
//!
//! * the preference ranking problem (PRP, a.k.a. linear ordering problem):
//!   find a simultaneous row/column permutation of a preference matrix
//!   maximizing the sum of its upper triangle,
//! * the symmetric Euclidean TSP over points in the unit square,
//! * balanced 2-way graph partitioning (GPP) minimizing the cut weight.
//!
//! All instance types are immutable once built. Matrices are stored dense and
//! row-major.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed for every random process in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Derives an independent seed for the `index`-th member of a family
    /// (instance `i` of a benchmark set, run `r` of a repetition...).
    pub fn derive(self, index: u64) -> RngSeed {
        // splitmix64 finalizer
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Prp,
    Tsp,
    Gpp,
}

impl ProblemKind {
    pub fn sense(self) -> Sense {
        match self {
            ProblemKind::Prp => Sense::Maximize,
            ProblemKind::Tsp | ProblemKind::Gpp => Sense::Minimize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Prp => "prp",
            ProblemKind::Tsp => "tsp",
            ProblemKind::Gpp => "gpp",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prp" | "lop" => Ok(ProblemKind::Prp),
            "tsp" => Ok(ProblemKind::Tsp),
            "gpp" => Ok(ProblemKind::Gpp),
            other => Err(Error::arg(format!("unknown problem '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Optimization direction of an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// Converts a raw objective change into an improvement (positive = better).
    #[inline]
    pub fn gain(self, delta: f64) -> f64 {
        match self {
            Sense::Maximize => delta,
            Sense::Minimize => -delta,
        }
    }

    /// Orients an objective value so that larger is always better.
    #[inline]
    pub fn score(self, value: f64) -> f64 {
        self.gain(value)
    }

    #[inline]
    pub fn better(self, a: f64, b: f64) -> bool {
        self.gain(a - b) > 0.0
    }
}

// ---------------------------------------------------------------------------
// Solutions
// ---------------------------------------------------------------------------

/// A ranking / tour: `order[k]` is the item placed at position `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return Err(Error::arg(format!("{order:?} is not a permutation of 0..{n}")));
            }
            seen[v] = true;
        }
        Ok(Permutation(order))
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Permutation(order)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub(crate) fn order_mut(&mut self) -> &mut Vec<usize> {
        &mut self.0
    }

    /// Inverse map: `positions()[item]` is the position of `item`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (k, &v) in self.0.iter().enumerate() {
            pos[v] = k;
        }
        pos
    }

    pub fn reversed(&self) -> Self {
        Permutation(self.0.iter().rev().copied().collect())
    }
}

/// Balanced two-way partition: `side[v]` is 0 or 1 and exactly half of the
/// nodes sit on side 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bipartition(Vec<u8>);

impl Bipartition {
    pub fn new(side: Vec<u8>) -> Result<Self> {
        if side.iter().any(|&s| s > 1) {
            return Err(Error::arg("partition labels must be 0 or 1"));
        }
        let zeros = side.iter().filter(|&&s| s == 0).count();
        if !side.len().is_multiple_of(2) || zeros * 2 != side.len() {
            return Err(Error::Constraint(format!(
                "unbalanced partition: {zeros} of {} nodes on side 0",
                side.len()
            )));
        }
        Ok(Bipartition(side))
    }

    /// Wraps labels without the balance check. Objective functions still
    /// reject unbalanced labels.
    pub fn from_labels_unchecked(side: Vec<u8>) -> Self {
        Bipartition(side)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let mut side = vec![1u8; n];
        for &v in &idx[..n / 2] {
            side[v] = 0;
        }
        Bipartition(side)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn sides(&self) -> &[u8] {
        &self.0
    }

    pub(crate) fn sides_mut(&mut self) -> &mut Vec<u8> {
        &mut self.0
    }

    pub fn is_balanced(&self) -> bool {
        let zeros = self.0.iter().filter(|&&s| s == 0).count();
        self.0.len().is_multiple_of(2) && zeros * 2 == self.0.len()
    }

    pub fn flipped(&self) -> Self {
        Bipartition(self.0.iter().map(|&s| 1 - s).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solution {
    Perm(Permutation),
    Part(Bipartition),
}

impl Solution {
    pub fn len(&self) -> usize {
        match self {
            Solution::Perm(p) => p.len(),
            Solution::Part(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_perm(&self) -> Option<&Permutation> {
        match self {
            Solution::Perm(p) => Some(p),
            Solution::Part(_) => None,
        }
    }

    pub fn as_part(&self) -> Option<&Bipartition> {
        match self {
            Solution::Part(b) => Some(b),
            Solution::Perm(_) => None,
        }
    }
}

impl From<Permutation> for Solution {
    fn from(p: Permutation) -> Self {
        Solution::Perm(p)
    }
}

impl From<Bipartition> for Solution {
    fn from(b: Bipartition) -> Self {
        Solution::Part(b)
    }
}

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

fn check_square(n: usize, data: &[f64]) -> Result<()> {
    if data.len() != n * n {
        return Err(Error::arg(format!("expected {} matrix entries, got {}", n * n, data.len())));
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::arg(format!("non-finite entry at ({}, {})", pos / n, pos % n)));
    }
    Ok(())
}

/// Preference matrix; `b(i, j)` is the preference of item `i` over item `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrpInstance {
    n: usize,
    b: Vec<f64>,
}

impl PrpInstance {
    /// Builds from a row-major matrix. The diagonal is forced to zero.
    pub fn new(n: usize, mut b: Vec<f64>) -> Result<Self> {
        check_square(n, &b)?;
        for i in 0..n {
            b[i * n + i] = 0.0;
        }
        Ok(PrpInstance { n, b })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.n + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.b
    }

    /// Sum of all off-diagonal entries.
    pub fn total_weight(&self) -> f64 {
        self.b.iter().sum()
    }

    pub fn objective(&self, sol: &Permutation) -> Result<f64> {
        if sol.len() != self.n {
            return Err(Error::arg(format!(
                "solution has {} items, instance has {}",
                sol.len(),
                self.n
            )));
        }
        let w = sol.order();
        let mut total = 0.0;
        for (a, &i) in w.iter().enumerate() {
            let row = &self.b[i * self.n..(i + 1) * self.n];
            for &j in &w[a + 1..] {
                total += row[j];
            }
        }
        Ok(total)
    }
}

/// Points in the plane with their dense Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    coords: Vec<[f64; 2]>,
    dist: Vec<f64>,
}

impl TspInstance {
    pub fn new(coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg("non-finite coordinate"));
        }
        let n = coords.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                let d = dx.hypot(dy);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(TspInstance { coords, dist })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.coords.len() + j]
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn tour_length(&self, sol: &Permutation) -> Result<f64> {
        let n = self.n();
        if sol.len() != n {
            return Err(Error::arg(format!("tour has {} cities, instance has {n}", sol.len())));
        }
        let w = sol.order();
        let mut total = 0.0;
        for k in 0..n {
            total += self.dist(w[k], w[(k + 1) % n]);
        }
        Ok(total)
    }
}

/// Symmetric weighted graph; weight 0 means "no edge".
#[derive(Debug, Clone, PartialEq)]
pub struct GppInstance {
    n: usize,
    b: Vec<f64>,
}

impl GppInstance {
    pub fn new(n: usize, b: Vec<f64>) -> Result<Self> {
        check_square(n, &b)?;
        if !n.is_multiple_of(2) {
            return Err(Error::arg(format!("graph partitioning needs an even node count, got {n}")));
        }
        for i in 0..n {
            if b[i * n + i] != 0.0 {
                return Err(Error::arg(format!("non-zero self-loop weight at node {i}")));
            }
            for j in (i + 1)..n {
                if b[i * n + j] != b[j * n + i] {
                    return Err(Error::arg(format!("asymmetric weight between {i} and {j}")));
                }
            }
        }
        Ok(GppInstance { n, b })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.n + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.b
    }

    pub fn cut_weight(&self, sol: &Bipartition) -> Result<f64> {
        if sol.len() != self.n {
            return Err(Error::arg(format!(
                "partition has {} nodes, graph has {}",
                sol.len(),
                self.n
            )));
        }
        if !sol.is_balanced() {
            return Err(Error::Constraint("partition is not balanced".into()));
        }
        let s = sol.sides();
        let mut total = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if s[i] != s[j] {
                    total += self.b(i, j);
                }
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Prp(PrpInstance),
    Tsp(TspInstance),
    Gpp(GppInstance),
}

impl Instance {
    pub fn n(&self) -> usize {
        match self {
            Instance::Prp(p) => p.n(),
            Instance::Tsp(t) => t.n(),
            Instance::Gpp(g) => g.n(),
        }
    }

    pub fn problem(&self) -> ProblemKind {
        match self {
            Instance::Prp(_) => ProblemKind::Prp,
            Instance::Tsp(_) => ProblemKind::Tsp,
            Instance::Gpp(_) => ProblemKind::Gpp,
        }
    }

    pub fn sense(&self) -> Sense {
        self.problem().sense()
    }

    /// Edge weight used for feature construction: `b_ij` for PRP/GPP and the
    /// distance for TSP.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match self {
            Instance::Prp(p) => p.b(i, j),
            Instance::Tsp(t) => t.dist(i, j),
            Instance::Gpp(g) => g.b(i, j),
        }
    }

    pub fn objective(&self, sol: &Solution) -> Result<f64> {
        match (self, sol) {
            (Instance::Prp(p), Solution::Perm(w)) => p.objective(w),
            (Instance::Tsp(t), Solution::Perm(w)) => t.tour_length(w),
            (Instance::Gpp(g), Solution::Part(s)) => g.cut_weight(s),
            _ => Err(Error::arg(format!(
                "solution kind does not match a {} instance",
                self.problem()
            ))),
        }
    }

    pub fn random_solution<R: Rng + ?Sized>(&self, rng: &mut R) -> Solution {
        match self {
            Instance::Gpp(g) => Solution::Part(Bipartition::random(g.n(), rng)),
            _ => Solution::Perm(Permutation::random(self.n(), rng)),
        }
    }

    /// Renames node `u` to `pi[u]`.
    pub fn relabel(&self, pi: &[usize]) -> Instance {
        let n = self.n();
        let permute_matrix = |get: &dyn Fn(usize, usize) -> f64| {
            let mut out = vec![0.0; n * n];
            for u in 0..n {
                for v in 0..n {
                    out[pi[u] * n + pi[v]] = get(u, v);
                }
            }
            out
        };
        match self {
            Instance::Prp(p) => Instance::Prp(PrpInstance { n, b: permute_matrix(&|u, v| p.b(u, v)) }),
            Instance::Gpp(g) => Instance::Gpp(GppInstance { n, b: permute_matrix(&|u, v| g.b(u, v)) }),
            Instance::Tsp(t) => {
                let mut coords = vec![[0.0; 2]; n];
                for u in 0..n {
                    coords[pi[u]] = t.coords[u];
                }
                Instance::Tsp(TspInstance { coords, dist: permute_matrix(&|u, v| t.dist(u, v)) })
            }
        }
    }
}

/// Applies the node renaming `u -> pi[u]` to a solution.
pub fn relabel_solution(sol: &Solution, pi: &[usize]) -> Solution {
    match sol {
        Solution::Perm(p) => Solution::Perm(Permutation(p.order().iter().map(|&v| pi[v]).collect())),
        Solution::Part(b) => {
            let mut side = vec![0u8; b.len()];
            for (u, &s) in b.sides().iter().enumerate() {
                side[pi[u]] = s;
            }
            Solution::Part(Bipartition(side))
        }
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Draws a random instance. PRP: off-diagonal entries uniform on [0, 1).
/// TSP: points uniform in the unit square. GPP: each undirected pair is an
/// edge with probability 1/2, with weight uniform on [0, 1).
pub fn generate(problem: ProblemKind, n: usize, seed: RngSeed) -> Result<Instance> {
    if n < 2 {
        return Err(Error::arg(format!("instance size must be at least 2, got {n}")));
    }
    let mut rng = seed.rng();
    match problem {
        ProblemKind::Prp => {
            let mut b = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        b[i * n + j] = rng.gen::<f64>();
                    }
                }
            }
            Ok(Instance::Prp(PrpInstance { n, b }))
        }
        ProblemKind::Tsp => {
            let coords = (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            Ok(Instance::Tsp(TspInstance::new(coords)?))
        }
        ProblemKind::Gpp => {
            if !n.is_multiple_of(2) {
                return Err(Error::arg(format!("graph partitioning needs an even node count, got {n}")));
            }
            let mut b = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen::<f64>() < 0.5 {
                        let w = rng.gen::<f64>();
                        b[i * n + j] = w;
                        b[j * n + i] = w;
                    }
                }
            }
            Ok(Instance::Gpp(GppInstance { n, b }))
        }
    }
}

// ---------------------------------------------------------------------------
// LOLIB text format
// ---------------------------------------------------------------------------

/// Parses a LOLIB / XLOLIB matrix file: optional name or comment lines, a
/// line holding only the dimension `n`, then `n*n` whitespace separated
/// numbers in row-major order. Integer and real entries are both accepted.
pub fn parse_lolib(text: &[u8]) -> Result<PrpInstance> {
    let text = String::from_utf8_lossy(text);
    let mut lines = text.lines().enumerate();
    let mut n = None;
    for (lineno, line) in lines.by_ref() {
        let mut toks = line.split_whitespace();
        let Some(first) = toks.next() else { continue };
        if toks.next().is_none() {
            if let Ok(v) = first.parse::<usize>() {
                n = Some((v, lineno + 1));
                break;
            }
        }
        if first.parse::<f64>().is_ok() {
            return Err(Error::Format {
                line: lineno + 1,
                token: 1,
                msg: "expected a line holding only the matrix dimension".into(),
            });
        }
    }
    let Some((n, header_line)) = n else {
        return Err(Error::Format { line: 0, token: 0, msg: "missing matrix dimension".into() });
    };
    if n == 0 {
        return Err(Error::Format { line: header_line, token: 1, msg: "dimension must be positive".into() });
    }
    let mut b = Vec::with_capacity(n * n);
    let mut last_line = header_line;
    for (lineno, line) in lines {
        for tok in line.split_whitespace() {
            let index = b.len() + 1;
            if b.len() == n * n {
                return Err(Error::Format {
                    line: lineno + 1,
                    token: index,
                    msg: format!("more than {} matrix entries", n * n),
                });
            }
            let v: f64 = tok.parse().map_err(|_| Error::Format {
                line: lineno + 1,
                token: index,
                msg: format!("'{tok}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Format { line: lineno + 1, token: index, msg: "non-finite entry".into() });
            }
            b.push(v);
            last_line = lineno + 1;
        }
    }
    if b.len() != n * n {
        return Err(Error::Format {
            line: last_line,
            token: b.len(),
            msg: format!("expected {} matrix entries, found {}", n * n, b.len()),
        });
    }
    PrpInstance::new(n, b)
}

/// Renders a preference matrix in LOLIB layout.
pub fn to_lolib(inst: &PrpInstance) -> String {
    let n = inst.n();
    let mut out = format!("{n}\n");
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{}", inst.b(i, j)).unwrap();
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// JSON instance documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceDoc {
    problem: ProblemKind,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    data: serde_json::Value,
}

fn matrix_rows(n: usize, flat: &[f64]) -> Vec<Vec<f64>> {
    flat.chunks(n.max(1)).map(|r| r.to_vec()).collect()
}

/// `{problem, n, seed?, data}` with `data` the row-major matrix (PRP, GPP)
/// or the coordinate list (TSP).
pub fn instance_to_json(inst: &Instance, seed: Option<RngSeed>) -> String {
    let data = match inst {
        Instance::Prp(p) => serde_json::to_value(matrix_rows(p.n, &p.b)),
        Instance::Gpp(g) => serde_json::to_value(matrix_rows(g.n, &g.b)),
        Instance::Tsp(t) => serde_json::to_value(&t.coords),
    }
    .expect("finite numbers serialize");
    let doc = InstanceDoc { problem: inst.problem(), n: inst.n(), seed: seed.map(|s| s.0), data };
    let mut s = serde_json::to_string_pretty(&doc).expect("instance document serializes");
    s.push('\n');
    s
}

pub fn instance_from_json(text: &str) -> Result<(Instance, Option<RngSeed>)> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    let n = doc.n;
    let inst = match doc.problem {
        ProblemKind::Prp | ProblemKind::Gpp => {
            let rows: Vec<Vec<f64>> = serde_json::from_value(doc.data)?;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Data(format!("matrix is not {n}x{n}")));
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            if doc.problem == ProblemKind::Prp {
                Instance::Prp(PrpInstance::new(n, flat)?)
            } else {
                Instance::Gpp(GppInstance::new(n, flat)?)
            }
        }
        ProblemKind::Tsp => {
            let coords: Vec<[f64; 2]> = serde_json::from_value(doc.data)?;
            if coords.len() != n {
                return Err(Error::Data(format!("expected {n} coordinates, got {}", coords.len())));
            }
            Instance::Tsp(TspInstance::new(coords)?)
        }
    };
    Ok((inst, doc.seed.map(RngSeed)))
}

// ---------------------------------------------------------------------------
// Exhaustive oracles
// ---------------------------------------------------------------------------

pub const MAX_BRUTE_FORCE_PERM: usize = 10;
pub const MAX_BRUTE_FORCE_PART: usize = 12;

/// Exact optimum by exhaustive enumeration. Solutions are visited in
/// lexicographic order and only strict improvements replace the incumbent,
/// so ties resolve to the lexicographically smallest optimum.
pub fn brute_force_best(inst: &Instance) -> Result<(Solution, f64)> {
    let n = inst.n();
    match inst {
        Instance::Prp(p) => {
            if n > MAX_BRUTE_FORCE_PERM {
                return Err(Error::Size(format!("n = {n} exceeds {MAX_BRUTE_FORCE_PERM}")));
            }
            // Appending item v after the placed prefix adds sum_{u placed} b[u][v].
            let order = enumerate_orders(
                n,
                Sense::Maximize,
                |prefix, v| prefix.iter().map(|&u| p.b(u, v)).sum::<f64>(),
                |_| 0.0,
            );
            let perm = Permutation(order);
            let value = p.objective(&perm)?;
            Ok((Solution::Perm(perm), value))
        }
        Instance::Tsp(t) => {
            if n > MAX_BRUTE_FORCE_PERM {
                return Err(Error::Size(format!("n = {n} exceeds {MAX_BRUTE_FORCE_PERM}")));
            }
            let order = enumerate_orders(
                n,
                Sense::Minimize,
                |prefix, v| prefix.last().map_or(0.0, |&u| t.dist(u, v)),
                |full| if full.len() > 1 { t.dist(full[full.len() - 1], full[0]) } else { 0.0 },
            );
            let perm = Permutation(order);
            let value = t.tour_length(&perm)?;
            Ok((Solution::Perm(perm), value))
        }
        Instance::Gpp(g) => {
            if n > MAX_BRUTE_FORCE_PART {
                return Err(Error::Size(format!("n = {n} exceeds {MAX_BRUTE_FORCE_PART}")));
            }
            let mut best: Option<(Bipartition, f64)> = None;
            // Counting upward in binary with node 0 as the most significant
            // bit visits label vectors in lexicographic order.
            for mask in 0u32..(1u32 << n) {
                if mask.count_ones() as usize != n / 2 {
                    continue;
                }
                let side: Vec<u8> = (0..n).map(|v| ((mask >> (n - 1 - v)) & 1) as u8).collect();
                let part = Bipartition(side);
                let value = g.cut_weight(&part)?;
                if best.as_ref().is_none_or(|(_, b)| value < *b) {
                    best = Some((part, value));
                }
            }
            let (part, value) = best.expect("at least one balanced partition");
            Ok((Solution::Part(part), value))
        }
    }
}

/// Depth-first enumeration of all orders in lexicographic order with an
/// incremental objective. `step(prefix, v)` is the contribution of appending
/// `v` to `prefix`, `close(full)` a final term for complete orders. Returns
/// the first optimal order met.
fn enumerate_orders(
    n: usize,
    sense: Sense,
    step: impl Fn(&[usize], usize) -> f64,
    close: impl Fn(&[usize]) -> f64,
) -> Vec<usize> {
    struct Walk<'a, S, C> {
        n: usize,
        sense: Sense,
        step: &'a S,
        close: &'a C,
        prefix: Vec<usize>,
        used: Vec<bool>,
        best: Option<(Vec<usize>, f64)>,
    }
    impl<S: Fn(&[usize], usize) -> f64, C: Fn(&[usize]) -> f64> Walk<'_, S, C> {
        fn go(&mut self, acc: f64) {
            if self.prefix.len() == self.n {
                let value = acc + (self.close)(&self.prefix);
                let better = match &self.best {
                    None => true,
                    Some((_, b)) => self.sense.better(value, *b),
                };
                if better {
                    self.best = Some((self.prefix.clone(), value));
                }
                return;
            }
            for v in 0..self.n {
                if self.used[v] {
                    continue;
                }
                let add = (self.step)(&self.prefix, v);
                self.used[v] = true;
                self.prefix.push(v);
                self.go(acc + add);
                self.prefix.pop();
                self.used[v] = false;
            }
        }
    }
    let mut walk = Walk {
        n,
        sense,
        step: &step,
        close: &close,
        prefix: Vec::with_capacity(n),
        used: vec![false; n],
        best: None,
    };
    walk.go(0.0);
    walk.best.expect("n >= 1 yields at least one order").0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prp(n: usize, f: impl Fn(usize, usize) -> f64) -> PrpInstance {
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = f(i, j);
            }
        }
        PrpInstance::new(n, b).unwrap()
    }

    #[test]
    fn prp_zero_and_constant() {
        let z = prp(4, |_, _| 0.0);
        let w = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        assert_eq!(z.objective(&w).unwrap(), 0.0);
        let c = prp(4, |_, _| 2.0);
        assert_eq!(c.objective(&w).unwrap(), 12.0);
        assert_eq!(c.objective(&Permutation::identity(4)).unwrap(), 12.0);
    }

    #[test]
    fn prp_dimension_mismatch() {
        let c = prp(4, |_, _| 1.0);
        assert!(matches!(c.objective(&Permutation::identity(3)), Err(Error::Argument(_))));
    }

    #[test]
    fn tsp_square_and_point() {
        let sq = TspInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(sq.tour_length(&Permutation::identity(4)).unwrap(), 4.0);
        let pt = TspInstance::new(vec![[0.3, 0.3]; 5]).unwrap();
        assert_eq!(pt.tour_length(&Permutation::identity(5)).unwrap(), 0.0);
    }

    #[test]
    fn gpp_complete_graph() {
        let n = 4;
        let mut b = vec![1.0; n * n];
        for i in 0..n {
            b[i * n + i] = 0.0;
        }
        let g = GppInstance::new(n, b).unwrap();
        let s = Bipartition::new(vec![0, 1, 0, 1]).unwrap();
        assert_eq!(g.cut_weight(&s).unwrap(), 4.0);
        let zero = GppInstance::new(4, vec![0.0; 16]).unwrap();
        assert_eq!(zero.cut_weight(&s).unwrap(), 0.0);
    }

    #[test]
    fn gpp_rejects_unbalanced() {
        let g = GppInstance::new(4, vec![0.0; 16]).unwrap();
        let s = Bipartition::from_labels_unchecked(vec![0, 0, 0, 1]);
        assert!(matches!(g.cut_weight(&s), Err(Error::Constraint(_))));
        assert!(matches!(Bipartition::new(vec![0, 0, 1]), Err(Error::Constraint(_))));
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate(ProblemKind::Prp, 5, RngSeed(7)).unwrap();
        let b = generate(ProblemKind::Prp, 5, RngSeed(7)).unwrap();
        assert_eq!(a, b);
        let Instance::Prp(p) = a else { unreachable!() };
        for i in 0..5 {
            assert_eq!(p.b(i, i), 0.0);
        }
    }

    #[test]
    fn generate_gpp_symmetric_and_tsp_in_range() {
        let Instance::Gpp(g) = generate(ProblemKind::Gpp, 6, RngSeed(3)).unwrap() else { unreachable!() };
        for i in 0..6 {
            assert_eq!(g.b(i, i), 0.0);
            for j in 0..6 {
                assert_eq!(g.b(i, j), g.b(j, i));
                assert!((0.0..1.0).contains(&g.b(i, j)));
            }
        }
        let Instance::Tsp(t) = generate(ProblemKind::Tsp, 20, RngSeed(1)).unwrap() else { unreachable!() };
        for c in t.coords() {
            assert!((0.0..1.0).contains(&c[0]) && (0.0..1.0).contains(&c[1]));
        }
        assert!(matches!(generate(ProblemKind::Gpp, 5, RngSeed(1)), Err(Error::Argument(_))));
    }

    #[test]
    fn lolib_parses_hand_built_text() {
        let p = parse_lolib(b"3\n0 1 2\n3 0 4\n5 6 0\n").unwrap();
        assert_eq!(p.n(), 3);
        assert_eq!(p.matrix(), &[0.0, 1.0, 2.0, 3.0, 0.0, 4.0, 5.0, 6.0, 0.0]);
    }

    #[test]
    fn lolib_skips_names_and_forces_zero_diagonal() {
        let p = parse_lolib(b"be75eec\n2\n7 1.5\n2 9\n").unwrap();
        assert_eq!(p.matrix(), &[0.0, 1.5, 2.0, 0.0]);
    }

    #[test]
    fn lolib_errors() {
        assert!(matches!(parse_lolib(b"3\n0 1\n"), Err(Error::Format { .. })));
        match parse_lolib(b"2\n0 1\n x 0\n") {
            Err(Error::Format { line, token, .. }) => assert_eq!((line, token), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_lolib(b"2\n0 1 2 0 5\n"), Err(Error::Format { .. })));
        assert!(matches!(parse_lolib(b""), Err(Error::Format { .. })));
    }

    #[test]
    fn brute_force_trivial_cases() {
        let one = Instance::Prp(prp(1, |_, _| 0.0));
        let (s, v) = brute_force_best(&one).unwrap();
        assert_eq!(s, Solution::Perm(Permutation::identity(1)));
        assert_eq!(v, 0.0);

        let c = Instance::Prp(prp(5, |_, _| 1.0));
        let (s, v) = brute_force_best(&c).unwrap();
        assert_eq!(s, Solution::Perm(Permutation::identity(5)));
        assert_eq!(v, 10.0);

        let big = generate(ProblemKind::Prp, 11, RngSeed(0)).unwrap();
        assert!(matches!(brute_force_best(&big), Err(Error::Size(_))));
    }

    #[test]
    fn json_round_trip() {
        for problem in [ProblemKind::Prp, ProblemKind::Tsp, ProblemKind::Gpp] {
            let inst = generate(problem, 6, RngSeed(11)).unwrap();
            let text = instance_to_json(&inst, Some(RngSeed(11)));
            let (back, seed) = instance_from_json(&text).unwrap();
            assert_eq!(back, inst);
            assert_eq!(seed, Some(RngSeed(11)));
        }
    }
}
