//! Certified feasibility of the homogeneous LMI system
//!
//! ```text
//! P ≻ 0, Q_k ≻ 0, R_k ≻ 0, S_kj ≻ 0, M(v) ≺ 0
//! ```
//!
//! posed as a max-margin problem: maximise `t` subject to every variable
//! matrix `⪰ tI`, `−M(v) ⪰ tI` and `Σ trace(X) = m·n` over the `m` variable
//! matrices. The trace constraint fixes the scale freedom of the homogeneous
//! system, keeps the feasible set compact and bounds `t ≤ 1`.
//!
//! The problem is solved by a log-det barrier method with Newton centering.
//! Only [`verify_certificate`] decides what counts as feasible: a `Feasible`
//! status is never returned without a certificate that passes it.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{LmiAffineMap, Variable, VariableValues};
use crate::matrix::{eig_sym, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Newton step budget across all centering rounds.
    pub max_iter: usize,
    /// Target bound on `t* − t` (the barrier duality gap).
    pub tol: f64,
    /// Return as soon as a verified margin `≥ ε` is found instead of
    /// maximising it, and as soon as `t* < ε` is established.
    pub stop_early: bool,
    /// Barrier weight growth factor per centering round.
    pub growth: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-9,
            stop_early: false,
            growth: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    pub map: LmiAffineMap,
    /// Required definiteness margin `ε > 0`.
    pub epsilon: f64,
}

impl FeasibilityProblem {
    /// `epsilon` defaults to `1e-6·d` for an LMI of side `d`.
    pub fn new(map: LmiAffineMap, epsilon: Option<f64>) -> Result<Self> {
        let epsilon = epsilon.unwrap_or(1e-6 * map.dim() as f64);
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "margin epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self { map, epsilon })
    }
}

/// Smallest eigenvalue of each variable group and `−λ_max(M(v))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// `None` when there are no `S_kj` variables (`r = 1`).
    pub s: Option<f64>,
    pub lmi: f64,
}

impl Margins {
    pub fn min(&self) -> f64 {
        [self.p, self.q, self.r, self.s.unwrap_or(f64::INFINITY), self.lmi]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub values: VariableValues,
    pub margins: Margins,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Feasible(Box<Certificate>),
    Infeasible,
    Unknown,
}

impl Status {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Status::Feasible(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Feasible(_) => "feasible",
            Status::Infeasible => "infeasible",
            Status::Unknown => "unknown",
        }
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Status::Feasible(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub status: Status,
    /// Newton steps taken.
    pub iterations: usize,
    /// Best margin `t` reached.
    pub margin: f64,
    /// Certified upper bound on the optimal margin (projected dual point).
    pub upper_bound: Option<f64>,
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub margins: Margins,
    /// `ε·(1 − 1e-6)`.
    pub threshold: f64,
    /// Smallest eigenvalue (or `−λ_max` for the LMI) of every matrix checked.
    pub per_matrix: Vec<(String, f64)>,
    /// Labels of the matrices whose margin is below the threshold.
    pub failures: Vec<String>,
}

/// Recomputes every margin of `c` from scratch with symmetric eigen-solves.
pub fn verify_certificate(c: &Certificate, p: &FeasibilityProblem) -> Result<VerificationReport> {
    verify_values(&c.values, p)
}

pub fn verify_values(values: &VariableValues, p: &FeasibilityProblem) -> Result<VerificationReport> {
    let layout = p.map.layout;
    values.validate(&layout)?;
    let threshold = p.epsilon * (1.0 - 1e-6);

    let mut per_matrix = Vec::new();
    let mut group_min = |acc: &mut f64, label: String, m: &Matrix| -> Result<()> {
        let e = eig_sym(m)?.eigenvalues[0];
        per_matrix.push((label, e));
        *acc = acc.min(e);
        Ok(())
    };
    let (mut mp, mut mq, mut mr, mut ms) = (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for var in layout.variables() {
        let m = values.get(&layout, var);
        let acc = match var {
            Variable::P => &mut mp,
            Variable::Q(_) => &mut mq,
            Variable::R(_) => &mut mr,
            Variable::S(..) => &mut ms,
        };
        group_min(acc, var.label(), m)?;
    }
    let big = p.map.evaluate_values(values)?;
    let lmi = -eig_sym(&big)?.eigenvalues.last().copied().expect("non-empty");
    per_matrix.push(("LMI".into(), lmi));

    let failures: Vec<String> = per_matrix
        .iter()
        .filter(|(_, m)| !(*m >= threshold))
        .map(|(l, _)| l.clone())
        .collect();
    let margins = Margins {
        p: mp,
        q: mq,
        r: mr,
        s: if layout.pairs().is_empty() { None } else { Some(ms) },
        lmi,
    };
    Ok(VerificationReport {
        passed: failures.is_empty(),
        margins,
        threshold,
        per_matrix,
        failures,
    })
}

/// One diagonal block of the barrier: `X(y, t) = C + Σ_j y_j G_j − tI`.
struct Block {
    size: usize,
    constant: DMatrix<f64>,
    coeffs: Vec<(usize, DMatrix<f64>)>,
    /// Nonzero `(row, col, value)` entries of each coefficient, same order as `coeffs`.
    sparse: Vec<Vec<(usize, usize, f64)>>,
}

impl Block {
    fn new(size: usize, constant: DMatrix<f64>, coeffs: Vec<(usize, DMatrix<f64>)>) -> Self {
        let sparse = coeffs
            .iter()
            .map(|(_, g)| {
                let mut entries = Vec::new();
                for c in 0..g.ncols() {
                    for r in 0..g.nrows() {
                        if g[(r, c)] != 0.0 {
                            entries.push((r, c, g[(r, c)]));
                        }
                    }
                }
                entries
            })
            .collect();
        Self {
            size,
            constant,
            coeffs,
            sparse,
        }
    }

    /// `⟨Z, G_a⟩` for the `a`-th coefficient.
    fn inner(&self, a: usize, z: &DMatrix<f64>) -> f64 {
        self.sparse[a].iter().map(|&(r, c, v)| v * z[(r, c)]).sum()
    }

    fn eval(&self, y: &[f64], t: f64) -> DMatrix<f64> {
        let mut x = self.constant.clone();
        for ((j, _), entries) in self.coeffs.iter().zip(&self.sparse) {
            if y[*j] != 0.0 {
                for &(r, c, v) in entries {
                    x[(r, c)] += v * y[*j];
                }
            }
        }
        for i in 0..self.size {
            x[(i, i)] -= t;
        }
        x
    }
}

/// The max-margin problem with the trace constraint eliminated: the last
/// diagonal entry of `P` is `m·n` minus every other diagonal entry.
struct Reduced {
    blocks: Vec<Block>,
    /// `v = offset + Σ_j y_j lift_j`, each lift column a sparse list of `(v index, weight)`.
    offset: Vec<f64>,
    lift: Vec<Vec<(usize, f64)>>,
    total_size: usize,
    /// Inner products of `(G_1, …, G_m, I)` summed over blocks.
    gram: DMatrix<f64>,
}

impl Reduced {
    fn new(map: &LmiAffineMap) -> Self {
        let layout = map.layout;
        let per = layout.per_matrix();
        let basis = layout.basis();
        let nv = layout.scalar_dim();
        let n = layout.n;
        let diag: Vec<bool> = (0..nv).map(|i| basis[i % per].0 == basis[i % per].1).collect();
        // P occupies coordinates 0..per; pin its last diagonal entry
        let pinned = (0..per).filter(|&i| diag[i]).next_back().expect("P has a diagonal");
        let total = (layout.matrix_count() * n) as f64;

        let mut offset = vec![0.0; nv];
        offset[pinned] = total;
        let mut lift = Vec::with_capacity(nv - 1);
        for i in 0..nv {
            if i == pinned {
                continue;
            }
            if diag[i] {
                lift.push(vec![(i, 1.0), (pinned, -1.0)]);
            } else {
                lift.push(vec![(i, 1.0)]);
            }
        }

        // (constant, coefficients over v) before elimination
        let mut v_blocks: Vec<(DMatrix<f64>, Vec<(usize, DMatrix<f64>)>)> = Vec::new();
        for vi in 0..layout.matrix_count() {
            let coeffs: Vec<(usize, DMatrix<f64>)> = (0..per)
                .map(|b| {
                    let (a, c) = basis[b];
                    (vi * per + b, layout.basis_matrix(a, c).to_nalgebra())
                })
                .collect();
            v_blocks.push((DMatrix::zeros(n, n), coeffs));
        }
        let lmi_coeffs = map
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, m)| m.max_abs() > 0.0)
            .map(|(i, m)| (i, -m.to_nalgebra()))
            .collect();
        v_blocks.push((-map.constant.to_nalgebra(), lmi_coeffs));

        let blocks: Vec<Block> = v_blocks
            .into_iter()
            .map(|(c, coeffs)| {
                let size = c.nrows();
                let lookup: std::collections::HashMap<usize, &DMatrix<f64>> =
                    coeffs.iter().map(|(i, m)| (*i, m)).collect();
                let mut constant = c.clone();
                if let Some(g) = lookup.get(&pinned) {
                    constant += *g * total;
                }
                let mut reduced = Vec::new();
                for (j, terms) in lift.iter().enumerate() {
                    let mut acc: Option<DMatrix<f64>> = None;
                    for &(i, w) in terms {
                        if let Some(g) = lookup.get(&i) {
                            match acc.as_mut() {
                                Some(a) => *a += *g * w,
                                None => acc = Some(*g * w),
                            }
                        }
                    }
                    if let Some(a) = acc {
                        if a.amax() > 0.0 {
                            reduced.push((j, a));
                        }
                    }
                }
                Block::new(size, constant, reduced)
            })
            .collect();
        let total_size = blocks.iter().map(|b| b.size).sum();
        let gram = constant_gram(&blocks, lift.len());
        Self {
            blocks,
            offset,
            lift,
            total_size,
            gram,
        }
    }

    fn dim(&self) -> usize {
        self.lift.len()
    }

    fn to_v(&self, y: &[f64]) -> Vec<f64> {
        let mut v = self.offset.clone();
        for (j, terms) in self.lift.iter().enumerate() {
            for &(i, w) in terms {
                v[i] += w * y[j];
            }
        }
        v
    }

    fn from_v(&self, v: &[f64]) -> Vec<f64> {
        // the leading entry of each lift column is its own coordinate
        self.lift.iter().map(|terms| v[terms[0].0]).collect()
    }

    /// `−Σ log det X_b`, or `None` outside the domain.
    fn barrier(&self, y: &[f64], t: f64) -> Option<f64> {
        let mut total = 0.0;
        for b in &self.blocks {
            let chol = Cholesky::new(b.eval(y, t))?;
            total -= 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        Some(total)
    }

    /// Largest `t` keeping every margin block positive semidefinite at fixed `y`.
    fn max_margin_at(&self, y: &[f64]) -> Result<f64> {
        let mut best = f64::INFINITY;
        for b in &self.blocks {
            let m = Matrix::from_nalgebra(&b.eval(y, 0.0));
            best = best.min(eig_sym(&m)?.eigenvalues[0]);
        }
        Ok(best)
    }

    /// Gradient and Hessian of `−s·t − Σ log det X_b` over `(y, t)`, plus
    /// the block inverses (needed for the dual bound).
    fn newton_system(&self, y: &[f64], t: f64, s: f64) -> Option<(DVector<f64>, DMatrix<f64>, Vec<DMatrix<f64>>)> {
        let m = self.dim();
        let mut g = DVector::zeros(m + 1);
        let mut h = DMatrix::zeros(m + 1, m + 1);
        let mut inverses = Vec::with_capacity(self.blocks.len());
        g[m] = -s;
        for b in &self.blocks {
            let xinv = Cholesky::new(b.eval(y, t))?.inverse();
            let xinv2 = &xinv * &xinv;
            for (a, ((ja, _), ea)) in b.coeffs.iter().zip(&b.sparse).enumerate() {
                g[*ja] -= b.inner(a, &xinv);
                // tr(X⁻¹ G_a X⁻¹)
                let wx = b.inner(a, &xinv2);
                h[(*ja, m)] -= wx;
                h[(m, *ja)] -= wx;
                for ((jb, _), eb) in b.coeffs[a..].iter().zip(&b.sparse[a..]) {
                    // tr(X⁻¹ G_a X⁻¹ G_b) over the nonzeros of both
                    let mut tr = 0.0;
                    for &(k, l, va) in ea {
                        for &(p, q, vb) in eb {
                            tr += va * vb * xinv[(l, p)] * xinv[(q, k)];
                        }
                    }
                    h[(*ja, *jb)] += tr;
                    if ja != jb {
                        h[(*jb, *ja)] += tr;
                    }
                }
            }
            g[m] += xinv.trace();
            h[(m, m)] += xinv.norm_squared();
            inverses.push(xinv);
        }
        Some((g, h, inverses))
    }

    /// Rigorous upper bound on the optimal margin.
    ///
    /// Starts from `Z_b = X_b⁻¹ / s`, projects onto
    /// `Σ tr Z_b = 1`, `Σ ⟨Z_b, G_bj⟩ = 0` and, if every projected block is
    /// positive semidefinite, returns `Σ ⟨Z_b, C_b⟩`: for any feasible point
    /// `0 ≤ Σ ⟨Z_b, X_b⟩ = Σ ⟨Z_b, C_b⟩ − t`.
    fn dual_bound(&self, inverses: &[DMatrix<f64>], s: f64) -> Option<f64> {
        let m = self.dim();
        let margin_blocks: Vec<usize> = (0..self.blocks.len()).collect();
        let z0: Vec<DMatrix<f64>> = margin_blocks.iter().map(|&b| &inverses[b] / s).collect();

        // Correction Z = Z0 + Σ_j α_j G_j + β I, with (m+1) linear conditions.
        let gram = &self.gram;
        let mut rhs = DVector::<f64>::zeros(m + 1);
        let mut trace_z0 = 0.0;
        for (zi, &b) in margin_blocks.iter().enumerate() {
            let blk = &self.blocks[b];
            for (a, (ja, _)) in blk.coeffs.iter().enumerate() {
                rhs[*ja] -= blk.inner(a, &z0[zi]);
            }
            trace_z0 += z0[zi].trace();
        }
        rhs[m] = 1.0 - trace_z0;
        // G_j may be linearly dependent on the identity; use a least-squares solve.
        let sol = gram.clone().svd(true, true).solve(&rhs, 1e-14).ok()?;
        let residual = (gram * &sol - &rhs).amax();
        if !(residual <= 1e-9 * (1.0 + rhs.amax())) {
            return None;
        }

        let mut bound = 0.0;
        for (zi, &b) in margin_blocks.iter().enumerate() {
            let blk = &self.blocks[b];
            let mut z = z0[zi].clone();
            for ((j, _), entries) in blk.coeffs.iter().zip(&blk.sparse) {
                for &(r, c, v) in entries {
                    z[(r, c)] += v * sol[*j];
                }
            }
            for i in 0..blk.size {
                z[(i, i)] += sol[m];
            }
            let z = (&z + z.transpose()) * 0.5;
            // a block the constraints force to zero comes back as rounding noise
            let eig = z.clone().symmetric_eigen();
            let floor = -1e-12 * eig.eigenvalues.amax().max(1.0);
            if eig.eigenvalues.min() < floor {
                return None;
            }
            let clipped = eig.eigenvalues.map(|e| e.max(0.0));
            let z = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
            bound += z.dot(&blk.constant);
        }
        Some(bound)
    }
}

fn constant_gram(blocks: &[Block], m: usize) -> DMatrix<f64> {
    let mut gram = DMatrix::<f64>::zeros(m + 1, m + 1);
    for blk in blocks {
        for (a, (ja, ga)) in blk.coeffs.iter().enumerate() {
            let tr = ga.trace();
            gram[(*ja, m)] += tr;
            gram[(m, *ja)] += tr;
            for (jb, gb) in &blk.coeffs[a..] {
                let ip = ga.dot(gb);
                gram[(*ja, *jb)] += ip;
                if ja != jb {
                    gram[(*jb, *ja)] += ip;
                }
            }
        }
        gram[(m, m)] += blk.size as f64;
    }
    gram
}

fn solve_newton(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::<f64, Dyn>::new(h.clone()) {
        return Some(-ch.solve(g));
    }
    let scale = h.diagonal().amax().max(1.0);
    let mut reg = h.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-12 * scale;
    }
    Cholesky::<f64, Dyn>::new(reg).map(|ch| -ch.solve(g))
}

/// Maximises the joint definiteness margin and classifies the outcome.
///
/// `Feasible` requires a verified margin `≥ ε`; `Infeasible` requires a
/// projected dual certificate bounding the optimal margin below `ε`.
/// Everything else is `Unknown`.
pub fn solve_feasibility(p: &FeasibilityProblem, options: &SolverOptions) -> Result<FeasibilityResult> {
    let layout = p.map.layout;
    let reduced = Reduced::new(&p.map);
    let m = reduced.dim();
    let nu = reduced.total_size as f64;

    let start = VariableValues::identity(&layout).to_vector(&layout);
    let mut y = reduced.from_v(&start);
    let mut t = reduced.max_margin_at(&y)? - 1.0;
    let mut s = 1.0;
    let mut iterations = 0usize;
    let mut dual: Option<f64> = None;
    let mut notes: Vec<String> = Vec::new();

    let certify = |y: &[f64]| -> Result<Option<Certificate>> {
        let values = VariableValues::from_vector(&layout, &reduced.to_v(y))?;
        let report = verify_values(&values, p)?;
        Ok(report.passed.then_some(Certificate {
            values,
            margins: report.margins,
        }))
    };

    'outer: loop {
        let mut centred = false;
        let mut last_inverses = None;
        let round_start = iterations;
        while iterations < options.max_iter {
            if iterations - round_start >= ROUND_CAP {
                notes.push(format!("centering stalled at s = {s:.3e}"));
                break 'outer;
            }
            let Some((g, h, inverses)) = reduced.newton_system(&y, t, s) else {
                notes.push("iterate left the barrier domain".into());
                break 'outer;
            };
            let Some(step) = solve_newton(&h, &g) else {
                notes.push(format!("singular Newton system at s = {s:.3e}"));
                break 'outer;
            };
            iterations += 1;
            let decrement = -g.dot(&step);
            if !decrement.is_finite() {
                notes.push("non-finite Newton decrement".into());
                break 'outer;
            }
            if decrement / 2.0 <= 1e-10 {
                centred = true;
                last_inverses = Some(inverses);
                break;
            }
            let f0 = -s * t + reduced.barrier(&y, t).expect("iterate inside domain");
            let mut alpha = 1.0;
            let accepted = loop {
                let y1: Vec<f64> = (0..m).map(|j| y[j] + alpha * step[j]).collect();
                let t1 = t + alpha * step[m];
                if let Some(phi) = reduced.barrier(&y1, t1) {
                    if -s * t1 + phi <= f0 - 0.01 * alpha * decrement {
                        y = y1;
                        t = t1;
                        break true;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    break false;
                }
            };
            if !accepted {
                notes.push(format!(
                    "line search stalled at s = {s:.3e} (decrement {decrement:.3e})"
                ));
                last_inverses = Some(inverses);
                centred = decrement < 1e-6;
                break;
            }
            if options.stop_early && t >= p.epsilon {
                if let Some(cert) = certify(&y)? {
                    return Ok(FeasibilityResult {
                        status: Status::Feasible(Box::new(cert)),
                        iterations,
                        margin: t,
                        upper_bound: dual,
                        diagnostics: join_notes(&notes, "stopped at the first verified margin"),
                    });
                }
            }
        }
        if let Some(inv) = &last_inverses {
            tighten(&mut dual, reduced.dual_bound(inv, s));
        }
        if !centred {
            if iterations >= options.max_iter {
                notes.push(format!("iteration limit {} reached", options.max_iter));
            }
            break;
        }
        if options.stop_early && matches!(dual, Some(b) if b < p.epsilon) {
            break;
        }
        if nu / s <= options.tol {
            break;
        }
        s *= options.growth;
    }

    if dual.is_none() || t < p.epsilon {
        // one more attempt at a bound from wherever the iterate stopped
        if let Some((_, _, inv)) = reduced.newton_system(&y, t, s) {
            tighten(&mut dual, reduced.dual_bound(&inv, s));
        }
    }

    let status = if t >= p.epsilon {
        match certify(&y)? {
            Some(cert) => Status::Feasible(Box::new(cert)),
            None => {
                notes.push("margin reached but certificate failed verification".into());
                Status::Unknown
            }
        }
    } else if matches!(dual, Some(b) if b < p.epsilon) {
        Status::Infeasible
    } else {
        Status::Unknown
    };
    Ok(FeasibilityResult {
        status,
        iterations,
        margin: t,
        upper_bound: dual,
        diagnostics: join_notes(
            &notes,
            &format!(
                "margin {t:.6e}, dual bound {}, epsilon {:.3e}, {iterations} Newton steps",
                dual.map_or("n/a".to_string(), |b| format!("{b:.6e}")),
                p.epsilon
            ),
        ),
    })
}

/// Newton steps allowed per centering round; beyond this the iterate is
/// at the limit of floating-point resolution.
const ROUND_CAP: usize = 60;

fn tighten(dual: &mut Option<f64>, bound: Option<f64>) {
    if let Some(b) = bound {
        *dual = Some(dual.map_or(b, |d| d.min(b)));
    }
}

fn join_notes(notes: &[String], tail: &str) -> String {
    let mut all = notes.to_vec();
    all.push(tail.to_string());
    all.join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DelayGraph, Edge};
    use crate::lmi::{assemble_full_lmi, VariableLayout};
    use crate::model::{assemble_error_system, AgentSystem, DelayBounds, ProtocolSign};

    fn toy_problem(tau: f64, mu: f64) -> FeasibilityProblem {
        let sys = AgentSystem::new(
            Matrix::from_rows(&[[-1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0]]).unwrap(),
            ProtocolSign::Negative,
        )
        .unwrap();
        let g = DelayGraph::new(2, vec![Edge::unit(0, 1)]).unwrap();
        let es = assemble_error_system(&sys, &g).unwrap();
        let map = assemble_full_lmi(&es, &DelayBounds::new(vec![tau], vec![mu]).unwrap()).unwrap();
        FeasibilityProblem::new(map, None).unwrap()
    }

    #[test]
    fn toy_small_delay_is_feasible() {
        let p = toy_problem(0.01, 0.0);
        let res = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        let cert = res.status.certificate().expect("feasible");
        let report = verify_certificate(cert, &p).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(cert.margins.min() >= p.epsilon);
        let traces = cert.values.p.trace() + cert.values.q[0].trace() + cert.values.r[0].trace();
        assert!((traces - 3.0).abs() < 1e-12);
    }

    #[test]
    fn toy_margin_shrinks_with_delay() {
        // the scalar toy is delay-independently stable, so the optimal margin
        // only decays like 1/τ̄²: 1.0785e-4 at τ̄ = 100 and 1.0788e-6 at
        // τ̄ = 1000 (external conic solver), below ε = 4e-6
        let p = toy_problem(100.0, 0.0);
        let res = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        let cert = res.status.certificate().expect("feasible at 100");
        assert!(verify_certificate(cert, &p).unwrap().passed);
        assert!((res.margin - 1.0785e-4).abs() < 1e-8, "{}", res.margin);

        let p = toy_problem(1000.0, 0.0);
        let res = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, Status::Infeasible, "{}", res.diagnostics);
        let bound = res.upper_bound.unwrap();
        // sound (never below the true optimum) and decisive
        assert!(bound >= 1.0788e-6 - 1e-10 && bound < p.epsilon, "{bound}");
    }

    #[test]
    fn small_delay_margin_matches_reference() {
        // Γ = τ̄²R forces R ≥ t/τ̄², so the margin is 2.940e-4 at τ̄ = 0.01
        let p = toy_problem(0.01, 0.0);
        let res = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert!((res.margin - 2.94e-4).abs() < 1e-7, "{}", res.margin);
    }

    #[test]
    fn zero_map_is_infeasible() {
        let layout = VariableLayout::new(2, 2, 1);
        let d = layout.lmi_dim();
        let map = LmiAffineMap {
            layout,
            constant: Matrix::zeros(d, d),
            coefficients: vec![Matrix::zeros(d, d); layout.scalar_dim()],
        };
        let p = FeasibilityProblem::new(map, None).unwrap();
        let res = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, Status::Infeasible, "{}", res.diagnostics);
        assert!(res.margin.abs() < 1e-6);
    }

    #[test]
    fn verification_names_the_broken_matrix() {
        let p = toy_problem(0.01, 0.0);
        let res = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        let mut cert = res.status.certificate().unwrap().clone();
        cert.values.q[0] = Matrix::from_rows(&[[-0.5]]).unwrap();
        let report = verify_certificate(&cert, &p).unwrap();
        assert!(!report.passed);
        assert!(report.failures.contains(&"Q1".to_string()));
    }

    #[test]
    fn identity_values_report_each_margin() {
        let p = toy_problem(0.01, 0.0);
        let values = VariableValues::identity(&p.map.layout);
        let report = verify_values(&values, &p).unwrap();
        let labels: Vec<&str> = report.per_matrix.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, vec!["P", "Q1", "R1", "LMI"]);
        assert_eq!(report.margins.s, None);
        // at P = Q = R = 1 the scalar toy sits exactly on the delay-independent boundary
        let lmi = report.per_matrix[3].1;
        assert_eq!(report.passed, lmi >= report.threshold);
    }

    #[test]
    fn scaled_certificate_still_verifies() {
        let p = toy_problem(0.01, 0.0);
        let res = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        let cert = res.status.certificate().unwrap();
        let scaled = Certificate {
            values: cert.values.scaled(3.0),
            margins: cert.margins.clone(),
        };
        let report = verify_certificate(&scaled, &p).unwrap();
        assert!(report.passed);
        assert!((report.margins.lmi - 3.0 * cert.margins.lmi).abs() < 1e-9 * cert.margins.lmi.abs().max(1.0));
    }

    #[test]
    fn early_stop_agrees_on_status() {
        for tau in [0.01, 0.5, 100.0, 1000.0] {
            let p = toy_problem(tau, 0.0);
            let full = solve_feasibility(&p, &SolverOptions::default()).unwrap();
            let quick = solve_feasibility(
                &p,
                &SolverOptions {
                    stop_early: true,
                    ..SolverOptions::default()
                },
            )
            .unwrap();
            assert_eq!(full.status.label(), quick.status.label(), "tau = {tau}");
        }
    }

    #[test]
    fn rejects_bad_epsilon() {
        let p = toy_problem(0.01, 0.0);
        assert!(FeasibilityProblem::new(p.map, Some(0.0)).is_err());
    }
}

