#![allow(dead_code)]

use delay_consensus::graph::{DelayGraph, Edge};
use delay_consensus::lmi::{VariableLayout, VariableValues};
use delay_consensus::matrix::Matrix;
use delay_consensus::model::{AgentSystem, ProtocolSign};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// `G Gᵀ + δ I` with `δ ∈ [0.05, 1)`.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> Matrix {
    let g = random_matrix(rng, n, n);
    let mut m = g.matmul(&g.transpose()).unwrap();
    let d = rng.gen_range(0.05..1.0);
    for i in 0..n {
        m[(i, i)] += d;
    }
    m.symmetrize()
}

/// Random digraph with a spanning tree: a random arborescence plus extra edges.
pub fn random_spanning_digraph(rng: &mut impl Rng, agents: usize) -> DelayGraph {
    let mut order: Vec<usize> = (0..agents).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..agents {
        let parent = order[rng.gen_range(0..i)];
        edges.push(Edge::new(parent, order[i], rng.gen_range(0.2..2.0)));
    }
    for _ in 0..rng.gen_range(0..agents) {
        let (a, b) = (rng.gen_range(0..agents), rng.gen_range(0..agents));
        if a != b && !edges.iter().any(|e| e.from == a && e.to == b) {
            edges.push(Edge::new(a, b, rng.gen_range(0.2..2.0)));
        }
    }
    DelayGraph::new(agents, edges).unwrap()
}

pub fn random_values(rng: &mut impl Rng, layout: &VariableLayout) -> VariableValues {
    let mut v = VariableValues::zeros(layout);
    for var in layout.variables() {
        *v.get_mut(layout, var) = random_spd(rng, layout.n);
    }
    v
}

/// The two-state, three-agent example with a caller-chosen gain.
pub fn example(k: [f64; 2]) -> (AgentSystem, DelayGraph) {
    let sys = AgentSystem::new(
        Matrix::from_rows(&[[-2.0, 2.0], [-1.0, 1.0]]).unwrap(),
        Matrix::from_rows(&[[1.0], [0.0]]).unwrap(),
        Matrix::from_rows(&[k]).unwrap(),
        ProtocolSign::Negative,
    )
    .unwrap();
    let g = DelayGraph::new(3, vec![Edge::unit(0, 1), Edge::unit(2, 1), Edge::unit(1, 2)]).unwrap();
    (sys, g)
}

/// Plain RK4 for `ẏ = M y`, no history machinery.
pub fn rk4_ode(m: &Matrix, y0: &[f64], h: f64, steps: usize) -> Vec<Vec<f64>> {
    let f = |y: &[f64]| m.matvec(y);
    let mut out = vec![y0.to_vec()];
    let mut y = y0.to_vec();
    for _ in 0..steps {
        let k1 = f(&y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = f(&y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = f(&y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = f(&y4);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(y.clone());
    }
    out
}
