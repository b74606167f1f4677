//! The delay-dependent stability LMI
//!
//! ```text
//! [ Π    ξᵀΓ ]
//! [ Γξ   −Γ  ]  ≺ 0
//! ```
//!
//! built from the error system and the decision variables `P`, `Q_k`, `R_k`
//! (`k = 1..r`) and `S_kj` (`k < j`). Block row/column `0` of `Π` belongs to
//! `z(t)`, block `2k+1` to `z(t − τ_k(t))` and block `2k+2` to `z(t − τ̄_k)`
//! (0-based `k`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{kron, Matrix};
use crate::model::{DelayBounds, ErrorSystem};

/// Which decision matrix a scalar coordinate belongs to. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    P,
    Q(usize),
    R(usize),
    S(usize, usize),
}

impl Variable {
    /// Human label with 1-based indices, e.g. `Q1`, `S23`.
    pub fn label(&self) -> String {
        match *self {
            Variable::P => "P".into(),
            Variable::Q(k) => format!("Q{}", k + 1),
            Variable::R(k) => format!("R{}", k + 1),
            Variable::S(k, j) => format!("S{}{}", k + 1, j + 1),
        }
    }
}

/// Ordering of the decision variables and their symmetric scalar bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    /// Agent state dimension `n`.
    pub n: usize,
    /// Number of delays `r`.
    pub r: usize,
    /// `N − 1`, the number of copies in `I_{N−1} ⊗ (·)`.
    pub copies: usize,
}

impl VariableLayout {
    pub fn new(n: usize, r: usize, copies: usize) -> Self {
        Self { n, r, copies }
    }

    pub fn for_system(es: &ErrorSystem) -> Self {
        Self::new(es.state_dim, es.delay_count(), es.agents - 1)
    }

    /// `P, Q_1..Q_r, R_1..R_r, S_12, S_13, …, S_{r−1,r}`.
    pub fn variables(&self) -> Vec<Variable> {
        let mut v = vec![Variable::P];
        v.extend((0..self.r).map(Variable::Q));
        v.extend((0..self.r).map(Variable::R));
        v.extend(self.pairs().into_iter().map(|(k, j)| Variable::S(k, j)));
        v
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.r)
            .flat_map(|k| ((k + 1)..self.r).map(move |j| (k, j)))
            .collect()
    }

    pub fn pair_index(&self, k: usize, j: usize) -> usize {
        debug_assert!(k < j && j < self.r);
        // pairs before row k, then offset within row k
        k * self.r - k * (k + 1) / 2 + (j - k - 1)
    }

    pub fn matrix_count(&self) -> usize {
        1 + 2 * self.r + self.r * self.r.saturating_sub(1) / 2
    }

    /// Symmetric basis elements per variable: `(a, b)` with `a ≤ b`, row-major.
    pub fn basis(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|a| (a..self.n).map(move |b| (a, b)))
            .collect()
    }

    pub fn per_matrix(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Total number of scalar decision variables.
    pub fn scalar_dim(&self) -> usize {
        self.matrix_count() * self.per_matrix()
    }

    /// Side length of the LMI block matrix, `(2r+2)(N−1)n`.
    pub fn lmi_dim(&self) -> usize {
        (2 * self.r + 2) * self.copies * self.n
    }

    /// Basis element `E_ab`: ones at `(a, b)` and `(b, a)`.
    pub fn basis_matrix(&self, a: usize, b: usize) -> Matrix {
        let mut e = Matrix::zeros(self.n, self.n);
        e[(a, b)] = 1.0;
        e[(b, a)] = 1.0;
        e
    }
}

/// Numeric values of every decision matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableValues {
    pub p: Matrix,
    pub q: Vec<Matrix>,
    pub r: Vec<Matrix>,
    /// `S_kj` for `k < j`, in [`VariableLayout::pairs`] order.
    pub s: Vec<Matrix>,
}

impl VariableValues {
    /// Every variable set to `I_n`.
    pub fn identity(layout: &VariableLayout) -> Self {
        let i = Matrix::identity(layout.n);
        Self {
            p: i.clone(),
            q: vec![i.clone(); layout.r],
            r: vec![i.clone(); layout.r],
            s: vec![i; layout.pairs().len()],
        }
    }

    pub fn zeros(layout: &VariableLayout) -> Self {
        let z = Matrix::zeros(layout.n, layout.n);
        Self {
            p: z.clone(),
            q: vec![z.clone(); layout.r],
            r: vec![z.clone(); layout.r],
            s: vec![z; layout.pairs().len()],
        }
    }

    pub fn get(&self, layout: &VariableLayout, var: Variable) -> &Matrix {
        match var {
            Variable::P => &self.p,
            Variable::Q(k) => &self.q[k],
            Variable::R(k) => &self.r[k],
            Variable::S(k, j) => &self.s[layout.pair_index(k, j)],
        }
    }

    pub fn get_mut(&mut self, layout: &VariableLayout, var: Variable) -> &mut Matrix {
        match var {
            Variable::P => &mut self.p,
            Variable::Q(k) => &mut self.q[k],
            Variable::R(k) => &mut self.r[k],
            Variable::S(k, j) => &mut self.s[layout.pair_index(k, j)],
        }
    }

    pub fn s_pair(&self, layout: &VariableLayout, k: usize, j: usize) -> &Matrix {
        &self.s[layout.pair_index(k, j)]
    }

    pub fn validate(&self, layout: &VariableLayout) -> Result<()> {
        if self.q.len() != layout.r || self.r.len() != layout.r || self.s.len() != layout.pairs().len() {
            return Err(Error::DimensionMismatch(format!(
                "values hold {} Q, {} R, {} S matrices; layout expects {}, {}, {}",
                self.q.len(),
                self.r.len(),
                self.s.len(),
                layout.r,
                layout.r,
                layout.pairs().len()
            )));
        }
        for var in layout.variables() {
            let m = self.get(layout, var);
            if m.shape() != (layout.n, layout.n) {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {}x{}, expected {n}x{n}",
                    var.label(),
                    m.rows(),
                    m.cols(),
                    n = layout.n
                )));
            }
            if !m.is_symmetric(1e-10) {
                return Err(Error::NotSymmetric {
                    asymmetry: m.asymmetry(),
                    tolerance: 1e-10,
                });
            }
        }
        Ok(())
    }

    /// Scalar coordinates in layout order (upper triangle of each matrix).
    pub fn to_vector(&self, layout: &VariableLayout) -> Vec<f64> {
        let basis = layout.basis();
        layout
            .variables()
            .into_iter()
            .flat_map(|var| {
                let m = self.get(layout, var);
                basis.iter().map(|&(a, b)| m[(a, b)]).collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn from_vector(layout: &VariableLayout, v: &[f64]) -> Result<Self> {
        if v.len() != layout.scalar_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for a layout of {}",
                v.len(),
                layout.scalar_dim()
            )));
        }
        let mut out = Self::zeros(layout);
        let basis = layout.basis();
        let mut it = v.iter();
        for var in layout.variables() {
            let m = out.get_mut(layout, var);
            for &(a, b) in &basis {
                let x = *it.next().expect("length checked");
                m[(a, b)] = x;
                m[(b, a)] = x;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            p: self.p.scale(c),
            q: self.q.iter().map(|m| m.scale(c)).collect(),
            r: self.r.iter().map(|m| m.scale(c)).collect(),
            s: self.s.iter().map(|m| m.scale(c)).collect(),
        }
    }
}

fn check_inputs(es: &ErrorSystem, bounds: &DelayBounds, values: &VariableValues) -> Result<VariableLayout> {
    let layout = VariableLayout::for_system(es);
    bounds.check_count(layout.r)?;
    values.validate(&layout)?;
    Ok(layout)
}

/// `Γ = I ⊗ (Σ_k τ̄_k² R_k + Σ_{k<j} (τ̄_k − τ̄_j)² S_kj)`.
pub fn build_gamma(es: &ErrorSystem, tau_bar: &[f64], values: &VariableValues) -> Result<Matrix> {
    let layout = VariableLayout::for_system(es);
    if tau_bar.len() != layout.r {
        return Err(Error::DimensionMismatch(format!(
            "{} delay bounds for {} delays",
            tau_bar.len(),
            layout.r
        )));
    }
    values.validate(&layout)?;
    let mut inner = Matrix::zeros(layout.n, layout.n);
    for k in 0..layout.r {
        inner.axpy(tau_bar[k] * tau_bar[k], &values.r[k])?;
    }
    for (k, j) in layout.pairs() {
        let d = tau_bar[k] - tau_bar[j];
        inner.axpy(d * d, values.s_pair(&layout, k, j))?;
    }
    Ok(es.lift(&inner.symmetrize()))
}

/// `ξ = [I⊗A, σL̄_1⊗BK, 0, σL̄_2⊗BK, 0, …, σL̄_r⊗BK, 0]`.
pub fn build_xi(es: &ErrorSystem) -> Matrix {
    let d = es.dim();
    let r = es.delay_count();
    let sigma = es.sign.value();
    let mut xi = Matrix::zeros(d, (2 * r + 1) * d);
    xi.set_block(0, 0, &es.abar);
    for (k, c) in es.couplings.iter().enumerate() {
        xi.set_block(0, (2 * k + 1) * d, &c.scale(sigma));
    }
    xi
}

/// The block matrix `Π` of size `(2r+1)(N−1)n`.
pub fn build_pi(es: &ErrorSystem, mu: &[f64], values: &VariableValues) -> Result<Matrix> {
    let layout = VariableLayout::for_system(es);
    if mu.len() != layout.r {
        return Err(Error::DimensionMismatch(format!(
            "{} rate bounds for {} delays",
            mu.len(),
            layout.r
        )));
    }
    values.validate(&layout)?;
    let r = layout.r;
    let d = es.dim();
    let sigma = es.sign.value();
    let p = &values.p;
    let mut pi = Matrix::zeros((2 * r + 1) * d, (2 * r + 1) * d);

    let mut put = |bi: usize, bj: usize, m: &Matrix| {
        pi.set_block(bi * d, bj * d, m);
        if bi != bj {
            pi.set_block(bj * d, bi * d, &m.transpose());
        }
    };

    let mut p11 = &(&es.a.transpose() * p) + &(p * &es.a);
    for k in 0..r {
        p11.axpy(1.0, &values.q[k])?;
        p11.axpy(-1.0, &values.r[k])?;
    }
    put(0, 0, &es.lift(&p11));

    let pbk = p * &es.bk;
    for k in 0..r {
        let rk = &values.r[k];
        let delayed = 2 * k + 1;
        let saturated = 2 * k + 2;

        let mut cross = es.lift(rk);
        cross.axpy(sigma, &kron(&es.reduced_laplacians[k], &pbk))?;
        put(0, delayed, &cross);

        let mut diag = values.q[k].scale(-(1.0 - mu[k]));
        diag.axpy(-2.0, rk)?;
        for j in 0..k {
            diag.axpy(-1.0, values.s_pair(&layout, j, k))?;
        }
        for j in (k + 1)..r {
            diag.axpy(-1.0, values.s_pair(&layout, k, j))?;
        }
        put(delayed, delayed, &es.lift(&diag));
        put(delayed, saturated, &es.lift(rk));
        put(saturated, saturated, &es.lift(&rk.scale(-1.0)));

        for j in (k + 1)..r {
            put(delayed, 2 * j + 1, &es.lift(values.s_pair(&layout, k, j)));
        }
    }
    Ok(pi.symmetrize())
}

/// The full block matrix `[[Π, ξᵀΓ], [Γξ, −Γ]]` evaluated at `values`.
pub fn lmi_matrix(es: &ErrorSystem, bounds: &DelayBounds, values: &VariableValues) -> Result<Matrix> {
    check_inputs(es, bounds, values)?;
    let pi = build_pi(es, &bounds.mu, values)?;
    let gamma = build_gamma(es, &bounds.tau_bar, values)?;
    let xi = build_xi(es);
    let gxi = &gamma * &xi;
    let np = pi.rows();
    let ng = gamma.rows();
    let mut m = Matrix::zeros(np + ng, np + ng);
    m.set_block(0, 0, &pi);
    m.set_block(np, 0, &gxi);
    m.set_block(0, np, &gxi.transpose());
    m.set_block(np, np, &gamma.scale(-1.0));
    Ok(m.symmetrize())
}

/// `Π + ξᵀΓξ`, the matrix the Schur complement step reduces to.
pub fn schur_reduced(es: &ErrorSystem, bounds: &DelayBounds, values: &VariableValues) -> Result<Matrix> {
    check_inputs(es, bounds, values)?;
    let pi = build_pi(es, &bounds.mu, values)?;
    let gamma = build_gamma(es, &bounds.tau_bar, values)?;
    let xi = build_xi(es);
    let quad = &(&xi.transpose() * &gamma) * &xi;
    Ok((&pi + &quad).symmetrize())
}

/// The LMI as an affine map `v ↦ M₀ + Σ_i v_i M_i` over scalar coordinates.
#[derive(Debug, Clone)]
pub struct LmiAffineMap {
    pub layout: VariableLayout,
    pub constant: Matrix,
    pub coefficients: Vec<Matrix>,
}

impl LmiAffineMap {
    pub fn dim(&self) -> usize {
        self.constant.rows()
    }

    pub fn evaluate(&self, v: &[f64]) -> Result<Matrix> {
        if v.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for {} coefficients",
                v.len(),
                self.coefficients.len()
            )));
        }
        let mut m = self.constant.clone();
        for (c, mi) in v.iter().zip(&self.coefficients) {
            if *c != 0.0 {
                m.axpy(*c, mi)?;
            }
        }
        Ok(m.symmetrize())
    }

    pub fn evaluate_values(&self, values: &VariableValues) -> Result<Matrix> {
        values.validate(&self.layout)?;
        self.evaluate(&values.to_vector(&self.layout))
    }
}

/// Samples the block matrix at zero and at every basis element:
/// `M_i = M(e_i) − M(0)`.
pub fn assemble_full_lmi(es: &ErrorSystem, bounds: &DelayBounds) -> Result<LmiAffineMap> {
    let layout = VariableLayout::for_system(es);
    bounds.check_count(layout.r)?;
    let constant = lmi_matrix(es, bounds, &VariableValues::zeros(&layout))?;
    let mut coefficients = Vec::with_capacity(layout.scalar_dim());
    let mut unit = vec![0.0; layout.scalar_dim()];
    for i in 0..layout.scalar_dim() {
        unit[i] = 1.0;
        let values = VariableValues::from_vector(&layout, &unit)?;
        coefficients.push(lmi_matrix(es, bounds, &values)?.try_sub(&constant)?);
        unit[i] = 0.0;
    }
    Ok(LmiAffineMap {
        layout,
        constant,
        coefficients,
    })
}
