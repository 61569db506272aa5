//! Weighted digraphs, their Laplacians, condensations, and Perron weights.
//!
//! Convention: `a_ij > 0` means an edge from node `j` to node `i`, i.e. row
//! `i` of the weight matrix lists the in-weights of node `i`. A digraph "has a
//! spanning tree" when some root node reaches every other node along directed
//! edges, which is equivalent to its condensation having exactly one source
//! component.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::{Error, Result};

/// Max residual `|beta' L|` accepted from the left Perron solve.
const PERRON_RESIDUAL_TOL: f64 = 1e-10;
/// Smallest component allowed in a strictly positive Perron vector.
const PERRON_POSITIVITY_TOL: f64 = 1e-8;

/// Weighted digraph on `m` nodes stored as an `m x m` in-weight matrix with
/// zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    weights: DMatrix<f64>,
}

impl Digraph {
    /// Builds a digraph from a square nonnegative weight matrix. Self-loop
    /// entries are silently forced to zero.
    pub fn new(mut weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() == 0 || weights.nrows() != weights.ncols() {
            return Err(Error::Validation(format!(
                "weight matrix must be square and nonempty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Validation(format!(
                "edge weights must be finite and nonnegative, got {w}"
            )));
        }
        for i in 0..weights.nrows() {
            weights[(i, i)] = 0.0;
        }
        Ok(Self { weights })
    }

    /// Builds a digraph from `(from, to, weight)` edges on `m` nodes
    /// (0-based), setting `a[to][from] = weight`.
    pub fn from_edges(m: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = DMatrix::zeros(m, m);
        for &(from, to, w) in edges {
            if from >= m || to >= m {
                return Err(Error::Validation(format!(
                    "edge ({from}, {to}) out of range for {m} nodes"
                )));
            }
            weights[(to, from)] = w;
        }
        Self::new(weights)
    }

    /// Parses the graph file format:
    ///
    /// ```text
    /// # comment
    /// nodes 3
    /// 1 2 2.0   # edge from node 1 to node 2 with weight 2, i.e. a_21 = 2
    /// ```
    ///
    /// Node ids are 1-based. Each `j i w` line sets `a_ij = w` (information
    /// flows `j -> i`); weights must be positive reals, duplicate edges are
    /// rejected, and self-loops are dropped.
    pub fn parse(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
        let mut weights: Option<DMatrix<f64>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match (&mut weights, fields.as_slice()) {
                (None, ["nodes", count]) => {
                    let m: usize = count
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid node count `{count}`")))?;
                    if m == 0 {
                        return Err(parse_err(line_no, "node count must be positive".into()));
                    }
                    weights = Some(DMatrix::zeros(m, m));
                }
                (None, _) => {
                    return Err(parse_err(
                        line_no,
                        "expected `nodes <m>` header first".into(),
                    ));
                }
                (Some(w), [from, to, value]) => {
                    let m = w.nrows();
                    let j: usize = from
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid node id `{from}`")))?;
                    let i: usize = to
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid node id `{to}`")))?;
                    if j < 1 || j > m || i < 1 || i > m {
                        return Err(parse_err(
                            line_no,
                            format!("node ids must lie in 1..={m}, got `{from} {to}`"),
                        ));
                    }
                    let weight: f64 = value
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid weight `{value}`")))?;
                    if !weight.is_finite() || weight <= 0.0 {
                        return Err(parse_err(
                            line_no,
                            format!("edge weights must be positive reals, got `{value}`"),
                        ));
                    }
                    if i == j {
                        continue; // self-loops carry no coupling
                    }
                    if w[(i - 1, j - 1)] != 0.0 {
                        return Err(parse_err(line_no, format!("duplicate edge `{from} {to}`")));
                    }
                    w[(i - 1, j - 1)] = weight;
                }
                (Some(_), _) => {
                    return Err(parse_err(line_no, "expected `j i w` edge line".into()));
                }
            }
        }
        let weights = weights.ok_or_else(|| parse_err(1, "missing `nodes <m>` header".into()))?;
        Self::new(weights)
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    /// In-weight `a_ij` of the edge from `j` to `i` (0-based).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Largest edge weight in the digraph.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |acc: f64, &w| acc.max(w))
    }

    /// Nodes that receive information from `u`, in ascending order.
    pub fn successors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&v| self.weights[(v, u)] > 0.0)
    }
}

/// Digraph Laplacian `l_ii = sum_{j != i} a_ij`, `l_ij = -a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    entries: DMatrix<f64>,
}

impl Laplacian {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Builds the Laplacian of `g`; its rows sum to zero by construction.
pub fn laplacian(g: &Digraph) -> Laplacian {
    let m = g.node_count();
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut row_sum = 0.0;
        for j in 0..m {
            if j != i {
                let a = g.weight(i, j);
                entries[(i, j)] = -a;
                row_sum += a;
            }
        }
        entries[(i, i)] = row_sum;
    }
    Laplacian { entries }
}

/// Laplacian of the subgraph induced by `nodes` (in-block weights only;
/// couplings that enter the block from outside are excluded).
pub fn block_laplacian(g: &Digraph, nodes: &[usize]) -> Laplacian {
    let s = nodes.len();
    let mut entries = DMatrix::zeros(s, s);
    for (p, &i) in nodes.iter().enumerate() {
        let mut row_sum = 0.0;
        for (q, &j) in nodes.iter().enumerate() {
            if p != q {
                let a = g.weight(i, j);
                entries[(p, q)] = -a;
                row_sum += a;
            }
        }
        entries[(p, p)] = row_sum;
    }
    Laplacian { entries }
}

/// Strongly connected components of a digraph in topological order (sources
/// first), with incomparable components ordered by their smallest node index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condensation {
    component_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    block_sizes: Vec<usize>,
    cumulative_sizes: Vec<usize>,
    source_count: usize,
}

impl Condensation {
    /// Index of the block containing `node`, in block order.
    pub fn component_of(&self, node: usize) -> usize {
        self.component_of[node]
    }

    /// Blocks in topological order; nodes inside each block are ascending.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Running totals of block sizes; the last entry equals the node count.
    pub fn cumulative_sizes(&self) -> &[usize] {
        &self.cumulative_sizes
    }

    /// Number of components with no incoming edge from another component.
    pub fn source_count(&self) -> usize {
        self.source_count
    }

    /// Node permutation `new position -> original node` given by
    /// concatenating the blocks; it renders the Laplacian block
    /// lower-triangular.
    pub fn permutation(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }
}

struct TarjanState<'a> {
    succ: &'a [Vec<usize>],
    index: Vec<Option<usize>>,
    lowlink: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    next_index: usize,
    components: Vec<Vec<usize>>,
}

impl TarjanState<'_> {
    fn strongconnect(&mut self, v: usize) {
        self.index[v] = Some(self.next_index);
        self.lowlink[v] = self.next_index;
        self.next_index += 1;
        self.stack.push(v);
        self.on_stack[v] = true;

        for &w in &self.succ[v] {
            match self.index[w] {
                None => {
                    self.strongconnect(w);
                    self.lowlink[v] = self.lowlink[v].min(self.lowlink[w]);
                }
                Some(idx) if self.on_stack[w] => {
                    self.lowlink[v] = self.lowlink[v].min(idx);
                }
                _ => {}
            }
        }

        if self.lowlink[v] == self.index[v].unwrap() {
            let mut component = Vec::new();
            loop {
                let w = self.stack.pop().unwrap();
                self.on_stack[w] = false;
                component.push(w);
                if w == v {
                    break;
                }
            }
            self.components.push(component);
        }
    }
}

/// Computes the condensation of `g`: Tarjan's algorithm for the components,
/// then Kahn's algorithm with a min-node-index heap for a deterministic
/// topological order of the component DAG.
pub fn condensation(g: &Digraph) -> Condensation {
    let m = g.node_count();
    let succ: Vec<Vec<usize>> = (0..m).map(|u| g.successors(u).collect()).collect();

    let mut tarjan = TarjanState {
        succ: &succ,
        index: vec![None; m],
        lowlink: vec![0; m],
        on_stack: vec![false; m],
        stack: Vec::new(),
        next_index: 0,
        components: Vec::new(),
    };
    for v in 0..m {
        if tarjan.index[v].is_none() {
            tarjan.strongconnect(v);
        }
    }
    let components = tarjan.components;
    let ncomp = components.len();

    let mut raw_of = vec![0usize; m];
    for (cid, comp) in components.iter().enumerate() {
        for &v in comp {
            raw_of[v] = cid;
        }
    }

    // Component DAG edges, deduplicated, plus in-degrees.
    let mut dag_succ: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    let mut indegree = vec![0usize; ncomp];
    for u in 0..m {
        for &v in &succ[u] {
            let (cu, cv) = (raw_of[u], raw_of[v]);
            if cu != cv && !dag_succ[cu].contains(&cv) {
                dag_succ[cu].push(cv);
                indegree[cv] += 1;
            }
        }
    }
    let source_count = indegree.iter().filter(|&&d| d == 0).count();

    let min_node = |cid: usize| *components[cid].iter().min().unwrap();
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> = (0..ncomp)
        .filter(|&cid| indegree[cid] == 0)
        .map(|cid| Reverse((min_node(cid), cid)))
        .collect();

    let mut blocks = Vec::with_capacity(ncomp);
    let mut component_of = vec![0usize; m];
    let mut block_sizes = Vec::with_capacity(ncomp);
    let mut cumulative_sizes = Vec::with_capacity(ncomp);
    let mut total = 0;
    while let Some(Reverse((_, cid))) = ready.pop() {
        let mut nodes = components[cid].clone();
        nodes.sort_unstable();
        let position = blocks.len();
        for &v in &nodes {
            component_of[v] = position;
        }
        total += nodes.len();
        block_sizes.push(nodes.len());
        cumulative_sizes.push(total);
        blocks.push(nodes);
        for &next in &dag_succ[cid] {
            indegree[next] -= 1;
            if indegree[next] == 0 {
                ready.push(Reverse((min_node(next), next)));
            }
        }
    }
    debug_assert_eq!(total, m, "topological order must cover every node");

    Condensation {
        component_of,
        blocks,
        block_sizes,
        cumulative_sizes,
        source_count,
    }
}

/// True iff the digraph has a spanning tree, i.e. exactly one source
/// component in its condensation.
pub fn has_spanning_tree(c: &Condensation) -> bool {
    c.source_count == 1
}

/// Left Perron vector of a strongly connected Laplacian block: the unique
/// `beta > 0` with `beta' L = 0` and `sum beta = 1`.
///
/// The left null space is solved densely by replacing the last equation of
/// `L' beta = 0` with the normalization constraint. A singular system, a
/// nonpositive component, or a residual above 1e-10 yields
/// `NotStronglyConnected`.
pub fn left_perron(block: &Laplacian) -> Result<DVector<f64>> {
    let m = block.dim();
    let l = block.entries();
    let mut system = l.transpose();
    for j in 0..m {
        system[(m - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(m);
    rhs[m - 1] = 1.0;

    let beta = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotStronglyConnected("left null-space system is singular".into()))?;
    let sum: f64 = beta.iter().sum();
    if !sum.is_finite() || sum.abs() < f64::EPSILON {
        return Err(Error::NotStronglyConnected(
            "left null vector could not be normalized".into(),
        ));
    }
    let beta = beta / sum;
    if beta.min() <= PERRON_POSITIVITY_TOL {
        return Err(Error::NotStronglyConnected(format!(
            "left null vector is not strictly positive (min {:e})",
            beta.min()
        )));
    }
    let residual = (RowDVector::from(beta.transpose()) * l).amax();
    if residual > PERRON_RESIDUAL_TOL {
        return Err(Error::NotStronglyConnected(format!(
            "left null-space residual {residual:e} exceeds {PERRON_RESIDUAL_TOL:e}"
        )));
    }
    Ok(beta)
}

/// Per-block Perron weights scaled by powers of `epsilon`.
///
/// Block `i` (topological position `i`, counted from 0) contributes
/// `epsilon^i * beta_i`; the stacked vector follows the block order and is
/// also available re-permuted to the original node order.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaWeights {
    per_block: Vec<DVector<f64>>,
    epsilon: f64,
    stacked: DVector<f64>,
    node_order: DVector<f64>,
    beta_min: f64,
    beta_max: f64,
}

impl BetaWeights {
    /// Perron vectors per block, each summing to one.
    pub fn per_block(&self) -> &[DVector<f64>] {
        &self.per_block
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn block_count(&self) -> usize {
        self.per_block.len()
    }

    /// Stacked weights in block order.
    pub fn stacked(&self) -> &DVector<f64> {
        &self.stacked
    }

    /// Stacked weights re-permuted to the original node order.
    pub fn node_order(&self) -> &DVector<f64> {
        &self.node_order
    }

    pub fn len(&self) -> usize {
        self.node_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_order.len() == 0
    }

    /// Smallest stacked component.
    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    /// Largest stacked component.
    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }
}

/// Builds the epsilon-scaled Perron weights for a digraph with a spanning
/// tree. Every block must be strongly connected as a subgraph, which holds by
/// construction of the condensation.
pub fn beta_weights(c: &Condensation, g: &Digraph, epsilon: f64) -> Result<BetaWeights> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Validation(format!(
            "epsilon must be a positive real, got {epsilon}"
        )));
    }
    if !has_spanning_tree(c) {
        return Err(Error::NoSpanningTree {
            sources: c.source_count(),
        });
    }
    let m = g.node_count();
    let mut per_block = Vec::with_capacity(c.block_count());
    let mut stacked = DVector::zeros(m);
    let mut node_order = DVector::zeros(m);
    let mut offset = 0;
    let mut factor = 1.0;
    for nodes in c.blocks() {
        let beta = left_perron(&block_laplacian(g, nodes))?;
        for (r, &node) in nodes.iter().enumerate() {
            let value = factor * beta[r];
            stacked[offset + r] = value;
            node_order[node] = value;
        }
        offset += nodes.len();
        per_block.push(beta);
        factor *= epsilon;
    }
    let beta_min = stacked.min();
    let beta_max = stacked.max();
    Ok(BetaWeights {
        per_block,
        epsilon,
        stacked,
        node_order,
        beta_min,
        beta_max,
    })
}
