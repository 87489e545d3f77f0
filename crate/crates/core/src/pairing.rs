//! Pair selection over a mini-batch.
//!
//! Given normalized saliency maps `z_0..z_{M-1}`, the distance matrix holds
//! `w[i][j] = ‖z_i − z_j‖₂`. A pairing is a binary `M × M` matrix `p` with
//! exactly one 1 per row and per column, a zero diagonal and no mutual pairs
//! (`p[i][j] + p[j][i] ≤ 1`), i.e. a permutation whose cycles all have length
//! at least 3. The best pairing maximizes `Σ w[i][j]·p[i][j]`, which is a
//! maximum-weight cycle cover with cycles of length ≥ 3.
//!
//! Three solvers are provided: [`greedy_pairing`] builds a single Hamiltonian
//! cycle in `O(M²)`, [`exact_pairing`] enumerates every feasible permutation
//! for small `M`, and [`random_pairing`] draws a uniform single cycle.

use std::fmt;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::saliency::NormalizedSaliency;

pub const MIN_BATCH: usize = 3;
pub const DEFAULT_EXACT_CAP: usize = 8;
const SYMMETRY_TOLERANCE: f64 = 1e-6;

/// Symmetric, nonnegative, zero-diagonal pairwise distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    m: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * m {
            return Err(Error::LengthMismatch {
                expected: m * m,
                actual: values.len(),
            });
        }
        for i in 0..m {
            if values[i * m + i] != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            for j in 0..m {
                let v = values[i * m + j];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "distance {v} at ({i},{j}) is negative or not finite"
                    )));
                }
                if (v - values[j * m + i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidParameter(format!(
                        "asymmetric entry at ({i},{j})"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { m, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} entries, expected {m}",
                r.len()
            )));
        }
        Self::new(m, rows.concat())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.m, self.values.iter().map(|v| v * c).collect())
    }

    /// Dense CSV, one row per line, values with 9 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        for row in self.values.chunks(self.m.max(1)) {
            wtr.write_record(row.iter().map(|v| format!("{v:.8e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::InvalidParameter(format!("`{s}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

/// Options for [`distance_matrix_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DistanceOptions {
    /// Average-pool factor applied to every map before measuring distances;
    /// `1` measures at full resolution.
    pub downsample: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions { downsample: 1 }
    }
}

/// `w[i][j] = ‖z_i − z_j‖₂` at full map resolution.
pub fn distance_matrix(maps: &[NormalizedSaliency], exec: Execution) -> Result<DistanceMatrix> {
    distance_matrix_with(maps, DistanceOptions::default(), exec)
}

pub fn distance_matrix_with(
    maps: &[NormalizedSaliency],
    opts: DistanceOptions,
    exec: Execution,
) -> Result<DistanceMatrix> {
    let m = maps.len();
    if m < 2 {
        return Err(Error::BatchTooSmall { m, min: 2 });
    }
    if opts.downsample == 0 {
        return Err(Error::InvalidParameter(
            "downsample factor must be at least 1".into(),
        ));
    }
    if let Some((i, z)) = maps
        .iter()
        .enumerate()
        .find(|(_, z)| !z.same_shape(&maps[0]))
    {
        return Err(Error::ShapeMismatch(format!(
            "map {i} is {}x{}, map 0 is {}x{}",
            z.height(),
            z.width(),
            maps[0].height(),
            maps[0].width()
        )));
    }
    let pooled: Vec<Vec<f64>>;
    let vectors: Vec<&[f64]> = if opts.downsample == 1 {
        maps.iter().map(|z| z.values()).collect()
    } else {
        pooled = par::map_indexed(exec, maps, |_, z| average_pool(z, opts.downsample));
        pooled.iter().map(|v| v.as_slice()).collect()
    };

    // Each unordered pair is evaluated as (min, max) so the result is bitwise
    // symmetric regardless of which row computes it.
    let rows = par::map_range(exec, m, |i| {
        (0..m)
            .map(|j| {
                if i == j {
                    0.0
                } else {
                    let (a, b) = (vectors[i.min(j)], vectors[i.max(j)]);
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                }
            })
            .collect::<Vec<f64>>()
    });
    DistanceMatrix::new(m, rows.concat())
}

fn average_pool(z: &NormalizedSaliency, f: usize) -> Vec<f64> {
    let (h, w) = (z.height(), z.width());
    let (ph, pw) = (h.div_ceil(f), w.div_ceil(f));
    let mut out = vec![0.0; ph * pw];
    let mut count = vec![0usize; ph * pw];
    for y in 0..h {
        for x in 0..w {
            let k = (y / f) * pw + x / f;
            out[k] += z.values()[y * w + x];
            count[k] += 1;
        }
    }
    out.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
}

/// Binary `M × M` pairing matrix; `p[i][j] = 1` pairs source `i` with
/// target `j`.
#[derive(Clone, PartialEq, Eq)]
pub struct PairingMatrix {
    m: usize,
    entries: Vec<bool>,
}

impl fmt::Debug for PairingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.targets() {
            Some(t) => write!(f, "PairingMatrix(m={}, targets={t:?})", self.m),
            None => write!(f, "PairingMatrix(m={}, pairs={:?})", self.m, self.pairs()),
        }
    }
}

impl PairingMatrix {
    pub fn zeros(m: usize) -> Self {
        PairingMatrix {
            m,
            entries: vec![false; m * m],
        }
    }

    /// Permutation form: source `i` is paired with `targets[i]`.
    pub fn from_targets(targets: &[usize]) -> Result<Self> {
        let m = targets.len();
        let mut p = Self::zeros(m);
        for (i, &j) in targets.iter().enumerate() {
            p.set(i, j, true)?;
        }
        Ok(p)
    }

    pub fn from_pairs(m: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut p = Self::zeros(m);
        for &(i, j) in pairs {
            p.set(i, j, true)?;
        }
        Ok(p)
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) -> Result<()> {
        if i >= self.m || j >= self.m {
            return Err(Error::InvalidPairing(format!(
                "index ({i},{j}) out of range for M={}",
                self.m
            )));
        }
        self.entries[i * self.m + j] = on;
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.m + j]
    }

    /// All `(source, target)` entries set to 1, in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .flat_map(|i| (0..self.m).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .collect()
    }

    /// The target of every source, if each row holds exactly one 1.
    pub fn targets(&self) -> Option<Vec<usize>> {
        (0..self.m)
            .map(|i| {
                let mut row = (0..self.m).filter(|&j| self.get(i, j));
                match (row.next(), row.next()) {
                    (Some(j), None) => Some(j),
                    _ => None,
                }
            })
            .collect()
    }

    /// Cycle decomposition of a permutation, each cycle starting at its
    /// smallest vertex; `None` if `self` is not a permutation.
    pub fn cycles(&self) -> Option<Vec<Vec<usize>>> {
        let targets = self.targets()?;
        let mut seen_as_target = vec![false; self.m];
        for &t in &targets {
            if std::mem::replace(&mut seen_as_target[t], true) {
                return None;
            }
        }
        let mut visited = vec![false; self.m];
        let mut cycles = Vec::new();
        for start in 0..self.m {
            if visited[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut v = start;
            while !visited[v] {
                visited[v] = true;
                cycle.push(v);
                v = targets[v];
            }
            cycles.push(cycle);
        }
        Some(cycles)
    }

    /// CSV with header `src,dst`, one row per pair in source order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for (src, dst) in self.pairs() {
            wtr.serialize(PairRow { src, dst })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `src,dst` rows into an `m × m` matrix. Rows whose indices fall
    /// outside `0..m` are an error.
    pub fn read_csv<R: Read>(input: R, m: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut p = Self::zeros(m);
        for row in rdr.deserialize::<PairRow>() {
            let row = row?;
            p.set(row.src, row.dst, true)?;
        }
        Ok(p)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    src: usize,
    dst: usize,
}

/// `Σ w[i][j]·p[i][j]`.
pub fn objective(w: &DistanceMatrix, p: &PairingMatrix) -> Result<f64> {
    if w.m != p.m {
        return Err(Error::ShapeMismatch(format!(
            "distance matrix is {0}x{0}, pairing is {1}x{1}",
            w.m, p.m
        )));
    }
    Ok(p.pairs().iter().map(|&(i, j)| w.get(i, j)).sum())
}

fn check_min(m: usize) -> Result<()> {
    if m < MIN_BATCH {
        Err(Error::BatchTooSmall { m, min: MIN_BATCH })
    } else {
        Ok(())
    }
}

/// Greedy single-cycle pairing.
///
/// Starts from the heaviest edge `(i, j)` overall, then repeatedly moves to
/// the heaviest edge out of the current target among vertices not yet on the
/// path, and finally closes the cycle back to the first source. Every argmax
/// breaks ties towards the smallest row, then the smallest column.
pub fn greedy_pairing(w: &DistanceMatrix) -> Result<PairingMatrix> {
    let m = w.m;
    check_min(m)?;
    let mut on_path = vec![false; m];
    let mut targets = vec![usize::MAX; m];

    let (mut i, mut j) = (0, 1);
    let mut best = f64::NEG_INFINITY;
    for r in 0..m {
        for c in 0..m {
            if r != c && w.values[r * m + c] > best {
                best = w.values[r * m + c];
                (i, j) = (r, c);
            }
        }
    }
    let first = i;
    targets[i] = j;
    on_path[i] = true;
    on_path[j] = true;

    // Vertices already on the path are skipped instead of zeroing their
    // columns in a working copy; the choice of successor is the same.
    for _ in 1..=m - 2 {
        i = j;
        let row = &w.values[i * m..(i + 1) * m];
        let mut best = f64::NEG_INFINITY;
        for (c, &v) in row.iter().enumerate() {
            if !on_path[c] && v > best {
                best = v;
                j = c;
            }
        }
        targets[i] = j;
        on_path[j] = true;
    }
    targets[j] = first;
    PairingMatrix::from_targets(&targets)
}

/// Exhaustive search over every permutation with no fixed points and no
/// 2-cycles. Among optimal permutations the lexicographically smallest
/// target vector wins.
pub fn exact_pairing(w: &DistanceMatrix, max_m: usize) -> Result<PairingMatrix> {
    let m = w.m;
    check_min(m)?;
    if m > max_m {
        return Err(Error::BatchTooLarge { m, max: max_m });
    }
    let mut search = ExactSearch {
        w,
        targets: vec![usize::MAX; m],
        used: vec![false; m],
        best: f64::NEG_INFINITY,
        best_targets: Vec::new(),
    };
    search.descend(0, 0.0);
    PairingMatrix::from_targets(&search.best_targets)
}

struct ExactSearch<'a> {
    w: &'a DistanceMatrix,
    targets: Vec<usize>,
    used: Vec<bool>,
    best: f64,
    best_targets: Vec<usize>,
}

impl ExactSearch<'_> {
    // Visits permutations in lexicographic order of the target vector, so a
    // strict improvement test keeps the smallest optimal one.
    fn descend(&mut self, i: usize, acc: f64) {
        let m = self.w.m;
        if i == m {
            if acc > self.best {
                self.best = acc;
                self.best_targets = self.targets.clone();
            }
            return;
        }
        for j in 0..m {
            if j == i || self.used[j] || (j < i && self.targets[j] == i) {
                continue;
            }
            self.used[j] = true;
            self.targets[i] = j;
            self.descend(i + 1, acc + self.w.get(i, j));
            self.used[j] = false;
        }
        self.targets[i] = usize::MAX;
    }
}

/// A uniformly random single `M`-cycle (Sattolo's shuffle) from a seeded
/// generator.
pub fn random_pairing(m: usize, seed: u64) -> Result<PairingMatrix> {
    check_min(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        let k = rng.random_range(0..i);
        order.swap(i, k);
    }
    // `order` is a uniformly random cyclic permutation: i -> order[i].
    PairingMatrix::from_targets(&order)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A source row does not hold exactly one 1.
    RowSum { row: usize, sum: usize },
    /// A target column does not hold exactly one 1.
    ColumnSum { column: usize, sum: usize },
    /// Both `(i, j)` and `(j, i)` are selected.
    MutualPair { i: usize, j: usize },
    /// `(i, i)` is selected.
    SelfPair { i: usize },
    /// A cycle shorter than three vertices.
    ShortCycle { cycle: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}, expected 1"),
            Violation::ColumnSum { column, sum } => {
                write!(f, "column {column} sums to {sum}, expected 1")
            }
            Violation::MutualPair { i, j } => write!(f, "mutual pair {i}<->{j}"),
            Violation::SelfPair { i } => write!(f, "self pair at {i}"),
            Violation::ShortCycle { cycle } => {
                write!(f, "cycle {cycle:?} has length {} < 3", cycle.len())
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub m: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks all pairing constraints and reports every violation.
pub fn validate_pairing(p: &PairingMatrix) -> ValidationReport {
    let m = p.m;
    let mut violations = Vec::new();
    for row in 0..m {
        let sum = (0..m).filter(|&j| p.get(row, j)).count();
        if sum != 1 {
            violations.push(Violation::RowSum { row, sum });
        }
    }
    for column in 0..m {
        let sum = (0..m).filter(|&i| p.get(i, column)).count();
        if sum != 1 {
            violations.push(Violation::ColumnSum { column, sum });
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            if p.get(i, j) && p.get(j, i) {
                violations.push(Violation::MutualPair { i, j });
            }
        }
    }
    for i in 0..m {
        if p.get(i, i) {
            violations.push(Violation::SelfPair { i });
        }
    }
    if let Some(cycles) = p.cycles() {
        violations.extend(
            cycles
                .into_iter()
                .filter(|c| c.len() < 3)
                .map(|cycle| Violation::ShortCycle { cycle }),
        );
    }
    ValidationReport { m, violations }
}
