//! Undirected simple graphs, the graph families used in the experiments, and
//! graph Laplacians `L = K - A`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Rng};

/// Maximum number of resampling attempts when a connected realization is required.
pub const MAX_CONNECTIVITY_ATTEMPTS: usize = 100;

/// Maximum number of restarts of the random-regular pairing procedure.
pub const MAX_PAIRING_ATTEMPTS: usize = 1000;

/// An undirected simple graph on nodes `0..n_nodes`.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Build a graph, rejecting self-loops, duplicates and out-of-range indices.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidGraph(
                "graph must have at least one node".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Self::from_sorted(n_nodes, set))
    }

    fn from_sorted(n_nodes: usize, set: BTreeSet<(usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); n_nodes];
        for &(i, j) in &set {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Self {
            n_nodes,
            edges: set.into_iter().collect(),
            adjacency,
        }
    }

    pub fn complete(n_nodes: usize) -> Result<Self> {
        Self::new(
            n_nodes,
            (0..n_nodes).flat_map(|i| ((i + 1)..n_nodes).map(move |j| (i, j))),
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency
            .get(a)
            .is_some_and(|row| row.binary_search(&b).is_ok())
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Breadth-first connectivity test.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_nodes];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for &y in &self.adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == self.n_nodes
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        build_laplacian(self)
    }

    /// Serialize to the edge-list text format: `N` on the first line, then `i j` per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(8 * (self.edges.len() + 1));
        writeln!(out, "{}", self.n_nodes).unwrap();
        for &(i, j) in &self.edges {
            writeln!(out, "{i} {j}").unwrap();
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("bad node count {header:?}")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let mut parts = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<usize> {
                s.and_then(|t| t.parse().ok()).ok_or_else(|| {
                    Error::Parse(format!("bad edge on line {}: {line:?}", lineno + 2))
                })
            };
            let a = parse(parts.next())?;
            let b = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!(
                    "trailing tokens on line {}",
                    lineno + 2
                )));
            }
            edges.push((a, b));
        }
        Self::new(n, edges)
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        Self::from_edge_list(&std::fs::read_to_string(path)?)
    }
}

/// Dense graph Laplacian `l_ij = k_i δ_ij - a_ij`, with a row-compressed copy of
/// the nonzeros for matrix-vector products.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    n: usize,
    dense: Vec<f64>,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl LaplacianMatrix {
    /// Build from a dense row-major matrix. The matrix is checked for symmetry
    /// and zero row sums.
    pub fn from_dense(n: usize, dense: Vec<f64>) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: dense.len(),
            });
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if dense[i * n + j] != dense[j * n + i] {
                    return Err(invalid("Laplacian must be symmetric"));
                }
                sum += dense[i * n + j];
            }
            if sum != 0.0 {
                return Err(invalid(format!("Laplacian row {i} does not sum to zero")));
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for i in 0..n {
            for j in 0..n {
                let x = dense[i * n + j];
                if x != 0.0 {
                    cols.push(j);
                    vals.push(x);
                }
            }
            row_start.push(cols.len());
        }
        Ok(Self {
            n,
            dense,
            row_start,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dense[i * self.n + j]
    }

    /// Row-major dense entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.dense
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, x)| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Nonzero entries of row `i` as `(column, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_start[i]..self.row_start[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    /// `(L x)_i`.
    #[inline]
    pub fn apply_row(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in self.row_start[i]..self.row_start[i + 1] {
            acc += self.vals[k] * x[self.cols[k]];
        }
        acc
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.apply_row(i, x);
        }
    }
}

pub fn build_laplacian(g: &Graph) -> LaplacianMatrix {
    let n = g.n_nodes();
    let mut dense = vec![0.0; n * n];
    for (i, row) in g.adjacency.iter().enumerate() {
        dense[i * n + i] = row.len() as f64;
        for &j in row {
            dense[i * n + j] = -1.0;
        }
    }
    LaplacianMatrix::from_dense(n, dense).expect("graph Laplacian is symmetric with zero row sums")
}

/// Ring where node `i` is linked to `i±1, …, i±k (mod n)`; every node has degree `2k`.
pub fn gen_ring(n: usize, k: usize) -> Result<Graph> {
    if n < 3 {
        return Err(invalid(format!("ring needs n >= 3, got {n}")));
    }
    if k < 1 || k > (n - 1) / 2 {
        return Err(invalid(format!(
            "ring needs 1 <= k <= (n-1)/2 = {}, got k = {k}",
            (n - 1) / 2
        )));
    }
    Graph::new(
        n,
        (0..n).flat_map(|i| (1..=k).map(move |o| (i, (i + o) % n))),
    )
}

pub fn gen_path(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(invalid(format!("path needs n >= 2, got {n}")));
    }
    Graph::new(n, (0..n - 1).map(|i| (i, i + 1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    Triangular,
    Square,
    Hexagonal,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 3] = [Self::Triangular, Self::Square, Self::Hexagonal];

    pub fn name(self) -> &'static str {
        match self {
            Self::Triangular => "triangular",
            Self::Square => "square",
            Self::Hexagonal => "hexagonal",
        }
    }
}

/// Planar lattice on a `rows × cols` node grid with open boundaries.
///
/// Node `(r, c)` has index `r * cols + c`. The triangular lattice adds the
/// `(r, c)–(r+1, c+1)` diagonal to every square cell; the hexagonal lattice is
/// the brick-wall embedding, keeping the vertical edge below `(r, c)` only when
/// `r + c` is even.
pub fn gen_lattice(kind: LatticeKind, rows: usize, cols: usize) -> Result<Graph> {
    if rows < 2 || cols < 2 {
        return Err(invalid(format!(
            "lattice needs rows, cols >= 2, got {rows}x{cols}"
        )));
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < rows {
                let vertical = match kind {
                    LatticeKind::Hexagonal => (r + c) % 2 == 0,
                    _ => true,
                };
                if vertical {
                    edges.push((idx(r, c), idx(r + 1, c)));
                }
                if kind == LatticeKind::Triangular && c + 1 < cols {
                    edges.push((idx(r, c), idx(r + 1, c + 1)));
                }
            }
        }
    }
    Graph::new(rows * cols, edges)
}

/// Graph family and its parameters.
///
/// `k` is the neighbour radius for rings and Watts–Strogatz bases (degree `2k`),
/// `degree` the full degree for random-regular graphs and `m` the number of
/// edges each arriving node brings in the Barabási–Albert process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphFamily {
    Ring { n: usize, k: usize },
    Path { n: usize },
    TriangularLattice { rows: usize, cols: usize },
    SquareLattice { rows: usize, cols: usize },
    HexagonalLattice { rows: usize, cols: usize },
    RegularRandom { n: usize, degree: usize },
    WattsStrogatz { n: usize, k: usize, p: f64 },
    ErdosRenyi { n: usize, p: f64 },
    BarabasiAlbert { n: usize, m: usize },
}

impl GraphFamily {
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            Self::RegularRandom { .. }
                | Self::WattsStrogatz { .. }
                | Self::ErdosRenyi { .. }
                | Self::BarabasiAlbert { .. }
        )
    }

    pub fn n_nodes(&self) -> usize {
        match *self {
            Self::Ring { n, .. }
            | Self::Path { n }
            | Self::RegularRandom { n, .. }
            | Self::WattsStrogatz { n, .. }
            | Self::ErdosRenyi { n, .. }
            | Self::BarabasiAlbert { n, .. } => n,
            Self::TriangularLattice { rows, cols }
            | Self::SquareLattice { rows, cols }
            | Self::HexagonalLattice { rows, cols } => rows * cols,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Ring { n, k } => gen_ring(n, k).map(|_| ()),
            Self::Path { n } => gen_path(n).map(|_| ()),
            Self::TriangularLattice { rows, cols }
            | Self::SquareLattice { rows, cols }
            | Self::HexagonalLattice { rows, cols } => {
                if rows < 2 || cols < 2 {
                    Err(invalid(format!(
                        "lattice needs rows, cols >= 2, got {rows}x{cols}"
                    )))
                } else {
                    Ok(())
                }
            }
            Self::RegularRandom { n, degree } => {
                if n < 2 || degree >= n || (n * degree) % 2 != 0 {
                    Err(invalid(format!(
                        "regular-random needs degree < n and n*degree even, got n={n}, degree={degree}"
                    )))
                } else {
                    Ok(())
                }
            }
            Self::WattsStrogatz { n, k, p } => {
                check_probability(p)?;
                if n < 3 || k < 1 || k > (n - 1) / 2 {
                    Err(invalid(format!(
                        "watts-strogatz needs n >= 3 and 1 <= k <= (n-1)/2, got n={n}, k={k}"
                    )))
                } else {
                    Ok(())
                }
            }
            Self::ErdosRenyi { n, p } => {
                check_probability(p)?;
                if n < 1 {
                    Err(invalid("erdos-renyi needs n >= 1"))
                } else {
                    Ok(())
                }
            }
            Self::BarabasiAlbert { n, m } => {
                if m < 1 || m + 1 > n {
                    Err(invalid(format!(
                        "barabasi-albert needs 1 <= m < n, got n={n}, m={m}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("probability must lie in [0, 1], got {p}")))
    }
}

/// A reproducible graph recipe: family, seed and connectivity requirement.
///
/// Serialized as a flat JSON object: the family tag and its parameters next
/// to `seed` and `require_connected`. Unknown keys are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphSpec {
    #[serde(flatten)]
    pub family: GraphFamily,
    pub seed: u64,
    pub require_connected: bool,
}

impl<'de> Deserialize<'de> for GraphSpec {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut map = serde_json::Map::<String, serde_json::Value>::deserialize(deserializer)?;
        let seed = match map.remove("seed") {
            Some(v) => serde_json::from_value(v).map_err(D::Error::custom)?,
            None => 0,
        };
        let require_connected = match map.remove("require_connected") {
            Some(v) => serde_json::from_value(v).map_err(D::Error::custom)?,
            None => false,
        };
        let family =
            serde_json::from_value(serde_json::Value::Object(map)).map_err(D::Error::custom)?;
        Ok(Self {
            family,
            seed,
            require_connected,
        })
    }
}

impl GraphSpec {
    pub fn new(family: GraphFamily) -> Self {
        Self {
            family,
            seed: 0,
            require_connected: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn connected(mut self) -> Self {
        self.require_connected = true;
        self
    }

    /// Build the graph. Deterministic families ignore the seed.
    pub fn generate(&self) -> Result<Graph> {
        match self.family {
            GraphFamily::Ring { n, k } => gen_ring(n, k),
            GraphFamily::Path { n } => gen_path(n),
            GraphFamily::TriangularLattice { rows, cols } => {
                gen_lattice(LatticeKind::Triangular, rows, cols)
            }
            GraphFamily::SquareLattice { rows, cols } => {
                gen_lattice(LatticeKind::Square, rows, cols)
            }
            GraphFamily::HexagonalLattice { rows, cols } => {
                gen_lattice(LatticeKind::Hexagonal, rows, cols)
            }
            _ => gen_random(self),
        }
    }
}

/// Draw a graph from one of the random ensembles.
///
/// Attempt `a` uses the stream `derive_seed(spec.seed, a)`; when a connected
/// graph is required, attempts continue until one is connected or
/// [`MAX_CONNECTIVITY_ATTEMPTS`] is reached.
pub fn gen_random(spec: &GraphSpec) -> Result<Graph> {
    spec.family.validate()?;
    let attempts = if spec.require_connected {
        MAX_CONNECTIVITY_ATTEMPTS
    } else {
        1
    };
    for attempt in 0..attempts {
        let mut rng = rng::stream(spec.seed, attempt as u64);
        let g = match spec.family {
            GraphFamily::RegularRandom { n, degree } => random_regular(n, degree, &mut rng)?,
            GraphFamily::WattsStrogatz { n, k, p } => watts_strogatz(n, k, p, &mut rng)?,
            GraphFamily::ErdosRenyi { n, p } => erdos_renyi(n, p, &mut rng)?,
            GraphFamily::BarabasiAlbert { n, m } => barabasi_albert(n, m, &mut rng)?,
            other => {
                return Err(invalid(format!("{other:?} is not a random family")));
            }
        };
        if !spec.require_connected || g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::ConnectivityRetriesExhausted { attempts })
}

fn erdos_renyi(n: usize, p: f64, rng: &mut Rng) -> Result<Graph> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges)
}

/// Ring base, then each edge `(i, i+o)` visited by node then offset is
/// rewired with probability `p` to `(i, w)`, `w` uniform among nodes that are
/// neither `i` nor already adjacent to `i`.
fn watts_strogatz(n: usize, k: usize, p: f64, rng: &mut Rng) -> Result<Graph> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for i in 0..n {
        for o in 1..=k {
            let j = (i + o) % n;
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    for i in 0..n {
        for o in 1..=k {
            let j = (i + o) % n;
            if rng.random::<f64>() >= p {
                continue;
            }
            if adj[i].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != i && !adj[i].contains(&w) {
                    break w;
                }
            };
            adj[i].remove(&j);
            adj[j].remove(&i);
            adj[i].insert(w);
            adj[w].insert(i);
        }
    }
    let edges = adj
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.iter().filter(move |&&j| j > i).map(move |&j| (i, j)));
    Graph::new(n, edges)
}

/// Star seed on `m + 1` nodes; every arriving node picks `m` distinct targets
/// with probability proportional to degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut Rng) -> Result<Graph> {
    let mut edges = Vec::with_capacity(m * (n - m));
    // Each node appears once per incident edge.
    let mut endpoints = Vec::with_capacity(2 * m * (n - m));
    for leaf in 1..=m {
        edges.push((0, leaf));
        endpoints.push(0);
        endpoints.push(leaf);
    }
    let mut targets = Vec::with_capacity(m);
    for node in (m + 1)..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, node));
            endpoints.push(t);
            endpoints.push(node);
        }
    }
    Graph::new(n, edges)
}

/// Incremental stub pairing: shuffle the open stubs, accept pairs that create
/// neither a loop nor a multi-edge, and recycle the rest. Restart from scratch
/// when the remaining stubs admit no valid pair.
fn random_regular(n: usize, degree: usize, rng: &mut Rng) -> Result<Graph> {
    if degree == 0 {
        return Graph::new(n, []);
    }
    'attempt: for _ in 0..MAX_PAIRING_ATTEMPTS {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut stubs: Vec<usize> = (0..n)
            .flat_map(|i| std::iter::repeat_n(i, degree))
            .collect();
        while !stubs.is_empty() {
            stubs.shuffle(rng);
            let mut leftover = Vec::new();
            for pair in stubs.chunks_exact(2) {
                let (a, b) = (pair[0], pair[1]);
                if a != b && !adj[a].contains(&b) {
                    adj[a].insert(b);
                    adj[b].insert(a);
                } else {
                    leftover.push(a);
                    leftover.push(b);
                }
            }
            if !leftover.is_empty() && !has_valid_pair(&leftover, &adj) {
                continue 'attempt;
            }
            stubs = leftover;
        }
        let edges = adj
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().filter(move |&&j| j > i).map(move |&j| (i, j)));
        return Graph::new(n, edges);
    }
    Err(Error::PairingFailed {
        attempts: MAX_PAIRING_ATTEMPTS,
    })
}

fn has_valid_pair(stubs: &[usize], adj: &[BTreeSet<usize>]) -> bool {
    let nodes: BTreeSet<usize> = stubs.iter().copied().collect();
    let nodes: Vec<usize> = nodes.into_iter().collect();
    for (x, &a) in nodes.iter().enumerate() {
        for &b in &nodes[x + 1..] {
            if !adj[a].contains(&b) {
                return true;
            }
        }
    }
    false
}
