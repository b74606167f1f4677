//! Agent dynamics, the delayed relative-state protocol and its reduction to
//! the consensus-error system `z_i = x_1 - x_{i+1}`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DelayGraph;
use crate::matrix::{eigenvalues, kron, spectral_abscissa, Matrix};

/// Sign `σ` in front of the delayed coupling sum.
///
/// `Negative` gives `ẋ = (I⊗A)x − Σ (L_k⊗BK) x(t−τ_k)`, the form the
/// stability conditions are stated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum ProtocolSign {
    #[default]
    Negative,
    Positive,
}

impl ProtocolSign {
    pub fn value(self) -> f64 {
        match self {
            ProtocolSign::Negative => -1.0,
            ProtocolSign::Positive => 1.0,
        }
    }
}

impl TryFrom<i8> for ProtocolSign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(ProtocolSign::Negative),
            1 => Ok(ProtocolSign::Positive),
            other => Err(format!("protocol sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<ProtocolSign> for i8 {
    fn from(s: ProtocolSign) -> i8 {
        match s {
            ProtocolSign::Negative => -1,
            ProtocolSign::Positive => 1,
        }
    }
}

/// Identical agents `ẋ_i = A x_i + B u_i` with gain `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSystem {
    a: Matrix,
    b: Matrix,
    k: Matrix,
    sign: ProtocolSign,
}

impl AgentSystem {
    pub fn new(a: Matrix, b: Matrix, k: Matrix, sign: ProtocolSign) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, expected {n}",
                b.rows()
            )));
        }
        if k.rows() != b.cols() || k.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "K must be {}x{n}, got {}x{}",
                b.cols(),
                k.rows(),
                k.cols()
            )));
        }
        Ok(Self { a, b, k, sign })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn k(&self) -> &Matrix {
        &self.k
    }
    pub fn sign(&self) -> ProtocolSign {
        self.sign
    }
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }
    pub fn with_gain(&self, k: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), k, self.sign)
    }

    pub fn bk(&self) -> Matrix {
        &self.b * &self.k
    }

    /// PBH test: `rank [A − λI, B] = n` at every eigenvalue with `Re λ ≥ 0`.
    pub fn is_stabilizable(&self) -> Result<bool> {
        let n = self.state_dim();
        let m = self.b.cols();
        for lambda in eigenvalues(&self.a)? {
            if lambda.re < -1e-12 {
                continue;
            }
            let pencil = DMatrix::<Complex<f64>>::from_fn(n, n + m, |i, j| {
                if j < n {
                    let diag = if i == j { lambda } else { Complex::new(0.0, 0.0) };
                    Complex::new(self.a[(i, j)], 0.0) - diag
                } else {
                    Complex::new(self.b[(i, j - n)], 0.0)
                }
            });
            let sv = pencil.singular_values();
            let cutoff = 1e-9 * sv.max().max(1.0);
            if sv.iter().filter(|&&s| s > cutoff).count() < n {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Spectral abscissa of `A − BK`; the design premise asks for it to be negative.
    pub fn closed_loop_abscissa(&self) -> Result<f64> {
        spectral_abscissa(&(&self.a - &self.bk()))
    }
}

/// Per-edge delay bounds `τ_k(t) ≤ τ̄_k`, `τ̇_k(t) ≤ μ_k < 1`, in delay-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayBounds {
    pub tau_bar: Vec<f64>,
    pub mu: Vec<f64>,
}

impl DelayBounds {
    pub fn new(tau_bar: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let b = Self { tau_bar, mu };
        b.validate()?;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.tau_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_bar.is_empty()
    }

    pub fn max_tau(&self) -> f64 {
        self.tau_bar.iter().copied().fold(0.0, f64::max)
    }

    pub fn with_tau(&self, tau_bar: Vec<f64>) -> Result<Self> {
        Self::new(tau_bar, self.mu.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_bar.len() != self.mu.len() {
            return Err(Error::InvalidBounds(format!(
                "{} delay bounds but {} rate bounds",
                self.tau_bar.len(),
                self.mu.len()
            )));
        }
        for (k, &t) in self.tau_bar.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidBounds(format!(
                    "tau_bar[{}] = {t} must be positive",
                    k + 1
                )));
            }
        }
        for (k, &m) in self.mu.iter().enumerate() {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::InvalidBounds(format!(
                    "mu[{}] = {m} must lie in [0, 1)",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    pub fn check_count(&self, r: usize) -> Result<()> {
        if self.len() != r {
            return Err(Error::InvalidBounds(format!(
                "{} bounds supplied for {r} delayed edges",
                self.len()
            )));
        }
        Ok(())
    }
}

/// `U = [1_{N−1}, −I_{N−1}]` and `W = [0ᵀ; −I_{N−1}]`, so that `UW = I`.
pub fn build_u_w(agents: usize) -> Result<(Matrix, Matrix)> {
    if agents < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 agents, got {agents}"
        )));
    }
    let m = agents - 1;
    let mut u = Matrix::zeros(m, agents);
    let mut w = Matrix::zeros(agents, m);
    for i in 0..m {
        u[(i, 0)] = 1.0;
        u[(i, i + 1)] = -1.0;
        w[(i + 1, i)] = -1.0;
    }
    Ok((u, w))
}

/// `U L_k W`.
pub fn reduce_laplacian(lk: &Matrix, u: &Matrix, w: &Matrix) -> Result<Matrix> {
    u.matmul(lk)?.matmul(w)
}

/// Reduced dynamics `ż = (I⊗A) z + σ Σ_k (L̄_k ⊗ BK) z(t − τ_k(t))`.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    pub state_dim: usize,
    pub agents: usize,
    pub a: Matrix,
    pub bk: Matrix,
    pub sign: ProtocolSign,
    /// `I_{N−1} ⊗ A`.
    pub abar: Matrix,
    /// `L̄_k = U L_k W`, one per delay index.
    pub reduced_laplacians: Vec<Matrix>,
    /// `L̄_k ⊗ BK`, without the protocol sign.
    pub couplings: Vec<Matrix>,
}

impl ErrorSystem {
    pub fn delay_count(&self) -> usize {
        self.couplings.len()
    }

    /// Dimension `(N−1)n` of `z`.
    pub fn dim(&self) -> usize {
        (self.agents - 1) * self.state_dim
    }

    /// `I_{N−1} ⊗ m` for an `n×n` block `m`.
    pub fn lift(&self, m: &Matrix) -> Matrix {
        kron(&Matrix::identity(self.agents - 1), m)
    }
}

pub fn assemble_error_system(sys: &AgentSystem, g: &DelayGraph) -> Result<ErrorSystem> {
    if !g.has_spanning_tree() {
        return Err(Error::NoSpanningTree);
    }
    let (u, w) = build_u_w(g.agents())?;
    let bk = sys.bk();
    let reduced = g
        .split_laplacians()
        .iter()
        .map(|lk| reduce_laplacian(lk, &u, &w))
        .collect::<Result<Vec<_>>>()?;
    let couplings = reduced.iter().map(|lbar| kron(lbar, &bk)).collect();
    Ok(ErrorSystem {
        state_dim: sys.state_dim(),
        agents: g.agents(),
        a: sys.a().clone(),
        bk,
        sign: sys.sign(),
        abar: kron(&Matrix::identity(g.agents() - 1), sys.a()),
        reduced_laplacians: reduced,
        couplings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    /// Eigenvalue `λ` of `U L W` as `(re, im)`.
    pub eigenvalue: (f64, f64),
    /// Spectral abscissa of `A + σλBK`.
    pub abscissa: f64,
    /// Set when the undelayed mode is not exponentially stable.
    pub unstable: bool,
}

/// Undelayed modal test: each eigenvalue `λ` of `U L W` yields the block
/// `A + σλBK`, which must be Hurwitz for consensus at zero delay.
pub fn modal_zero_delay_check(sys: &AgentSystem, g: &DelayGraph) -> Result<Vec<ModeReport>> {
    let (u, w) = build_u_w(g.agents())?;
    let lbar = reduce_laplacian(&g.laplacian(), &u, &w)?;
    let bk = sys.bk();
    let sigma = sys.sign().value();
    let n = sys.state_dim();
    let mut modes = eigenvalues(&lbar)?;
    modes.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    modes
        .into_iter()
        .map(|lambda| {
            // Real 2n×2n form of the complex block; same spectrum up to conjugation.
            let re_part = &sys.a().clone() + &bk.scale(sigma * lambda.re);
            let im_part = bk.scale(sigma * lambda.im);
            let abscissa = if lambda.im.abs() <= 1e-14 {
                spectral_abscissa(&re_part)?
            } else {
                let mut big = Matrix::zeros(2 * n, 2 * n);
                big.set_block(0, 0, &re_part);
                big.set_block(n, n, &re_part);
                big.set_block(0, n, &(-&im_part));
                big.set_block(n, 0, &im_part);
                spectral_abscissa(&big)?
            };
            Ok(ModeReport {
                eigenvalue: (lambda.re, lambda.im),
                abscissa,
                unstable: abscissa >= 0.0,
            })
        })
        .collect()
}
