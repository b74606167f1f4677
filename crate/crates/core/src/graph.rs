//! Directed communication graphs, their Laplacians and the per-edge delay
//! indexing.
//!
//! Agents are 0-based internally. An edge `from -> to` means agent `to`
//! receives information from agent `from`; it contributes `-weight` at
//! Laplacian entry `(to, from)` and `+weight` on the diagonal at `(to, to)`.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{eigenvalues, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Self { from, to, weight }
    }

    pub fn unit(from: usize, to: usize) -> Self {
        Self::new(from, to, 1.0)
    }
}

/// A validated weighted digraph whose edges are stored in delay-index order:
/// `edges()[k]` carries delay `τ_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayGraph {
    agents: usize,
    edges: Vec<Edge>,
}

impl DelayGraph {
    /// Validates the edge list and assigns delay indices (see [`index_delays`]).
    pub fn new(agents: usize, edges: Vec<Edge>) -> Result<Self> {
        if agents < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 agents, got {agents}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            if e.from >= agents || e.to >= agents {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} references an agent outside 1..={agents}",
                    e.from + 1,
                    e.to + 1
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidGraph(format!("self-loop at agent {}", e.from + 1)));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} has non-positive weight {}",
                    e.from + 1,
                    e.to + 1,
                    e.weight
                )));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {} -> {}",
                    e.from + 1,
                    e.to + 1
                )));
            }
        }
        Ok(Self {
            agents,
            edges: index_delays(&edges),
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    /// Number of edges, which is also the number of distinct delays `r`.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in delay-index order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `agent`: the agents it receives from, ascending.
    pub fn neighbors(&self, agent: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.to == agent)
            .map(|e| e.from)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.agents, self.agents);
        for e in &self.edges {
            l[(e.to, e.to)] += e.weight;
            l[(e.to, e.from)] -= e.weight;
        }
        l
    }

    /// One single-edge Laplacian per delay index; they sum to [`Self::laplacian`].
    pub fn split_laplacians(&self) -> Vec<Matrix> {
        self.edges
            .iter()
            .map(|e| {
                let mut lk = Matrix::zeros(self.agents, self.agents);
                lk[(e.to, e.to)] = e.weight;
                lk[(e.to, e.from)] = -e.weight;
                lk
            })
            .collect()
    }

    /// Out-adjacency along the direction of information flow.
    fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.agents];
        for e in &self.edges {
            adj[e.from].push(e.to);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Agents that reach every other agent along the edge direction.
    pub fn roots(&self) -> Vec<usize> {
        let adj = self.successors();
        (0..self.agents)
            .filter(|&root| reachable_from(root, &adj).iter().all(|&r| r))
            .collect()
    }

    pub fn has_spanning_tree(&self) -> bool {
        !self.roots().is_empty()
    }

    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        tarjan_scc(&self.successors())
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected_components().len() == 1
    }

    pub fn check_topology(&self) -> Result<TopologyReport> {
        let components = self.strongly_connected_components();
        let spectrum = eigenvalues(&self.laplacian())?;
        let mut laplacian_eigenvalues: Vec<(f64, f64)> =
            spectrum.iter().map(|z: &Complex<f64>| (z.re, z.im)).collect();
        laplacian_eigenvalues.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Ok(TopologyReport {
            strongly_connected: components.len() == 1,
            component_count: components.len(),
            has_spanning_tree: self.has_spanning_tree(),
            roots: self.roots().iter().map(|r| r + 1).collect(),
            laplacian_eigenvalues,
        })
    }
}

/// Reorders edges by the single-index rule: receiving agent `i` ascending,
/// then sending agent `j` ascending within the neighbour set of `i`.
pub fn index_delays(edges: &[Edge]) -> Vec<Edge> {
    let mut sorted = edges.to_vec();
    sorted.sort_by_key(|e| (e.to, e.from));
    sorted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub strongly_connected: bool,
    pub component_count: usize,
    pub has_spanning_tree: bool,
    /// 1-based labels of the agents that root a directed spanning tree.
    pub roots: Vec<usize>,
    /// `(re, im)` pairs sorted by real part.
    pub laplacian_eigenvalues: Vec<(f64, f64)>,
}

impl TopologyReport {
    pub fn zero_eigenvalue_count(&self, tol: f64) -> usize {
        self.laplacian_eigenvalues
            .iter()
            .filter(|(re, im)| re.hypot(*im) <= tol)
            .count()
    }
}

fn reachable_from(start: usize, adj: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Tarjan's algorithm over an adjacency list.
fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        counter: usize,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        components: Vec<Vec<usize>>,
    }

    fn visit(v: usize, s: &mut State<'_>) {
        s.index[v] = Some(s.counter);
        s.low[v] = s.counter;
        s.counter += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for &w in &s.adj[v] {
            match s.index[w] {
                None => {
                    visit(w, s);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().expect("tarjan stack underflow");
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            s.components.push(comp);
        }
    }

    let n = adj.len();
    let mut s = State {
        adj,
        counter: 0,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        components: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(v, &mut s);
        }
    }
    s.components
}
