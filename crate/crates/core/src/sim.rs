//! Fixed-step RK4 integration of the delayed closed loop and of the error
//! system, with per-edge delay profiles.
//!
//! Delayed states are read from the stored grid by cubic Hermite
//! interpolation of `(state, derivative)` pairs. Lookups that land inside the
//! step being taken (only possible for time-varying delays shorter than the
//! step) are extrapolated linearly from the start of the step. Lookups before
//! `t = 0` evaluate the history directly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DelayGraph;
use crate::matrix::{kron, Matrix};
use crate::model::{build_u_w, AgentSystem, ErrorSystem};

/// Above this magnitude a run is treated as diverged and truncated.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayProfile {
    Constant { value: f64 },
    /// `τ(t) = (τ̄/2)(1 + sin(ωt + φ))`.
    Sinusoidal { tau_bar: f64, omega: f64, phase: f64 },
}

impl DelayProfile {
    pub fn constant(value: f64) -> Result<Self> {
        let p = Self::Constant { value };
        p.validate(None)?;
        Ok(p)
    }

    /// Rejects profiles whose peak rate `τ̄ω/2` exceeds `mu`.
    pub fn sinusoidal(tau_bar: f64, omega: f64, phase: f64, mu: f64) -> Result<Self> {
        let p = Self::Sinusoidal { tau_bar, omega, phase };
        p.validate(Some(mu))?;
        Ok(p)
    }

    /// Checks the parameters and, when given, the rate bound `mu`.
    pub fn validate(&self, mu: Option<f64>) -> Result<()> {
        match *self {
            Self::Constant { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::InvalidProfile(format!("constant delay {value} must be nonnegative")));
                }
            }
            Self::Sinusoidal { tau_bar, omega, phase } => {
                if !(tau_bar.is_finite() && tau_bar > 0.0) {
                    return Err(Error::InvalidProfile(format!("tau_bar {tau_bar} must be positive")));
                }
                if !(omega.is_finite() && omega >= 0.0 && phase.is_finite()) {
                    return Err(Error::InvalidProfile(format!(
                        "omega {omega} must be nonnegative and phase {phase} finite"
                    )));
                }
                if let Some(mu) = mu {
                    let rate = self.max_rate();
                    if rate > mu * (1.0 + 1e-12) {
                        return Err(Error::InvalidProfile(format!(
                            "peak rate {rate} exceeds the bound mu = {mu}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Sinusoidal { tau_bar, omega, phase } => 0.5 * tau_bar * (1.0 + (omega * t + phase).sin()),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sinusoidal { tau_bar, omega, phase } => 0.5 * tau_bar * omega * (omega * t + phase).cos(),
        }
    }

    /// Upper bound on `τ(t)` over all `t`.
    pub fn max_value(&self) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Sinusoidal { tau_bar, .. } => tau_bar,
        }
    }

    pub fn max_rate(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sinusoidal { tau_bar, omega, .. } => 0.5 * tau_bar * omega,
        }
    }

    fn is_zero(&self) -> bool {
        matches!(*self, Self::Constant { value } if value == 0.0)
    }
}

/// Sinusoid with the fastest rate the bound allows: `ω = 2μ/τ̄`.
pub fn make_sinusoidal_profile(tau_bar: f64, mu: f64, phase: f64) -> Result<DelayProfile> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::InvalidProfile(format!("mu = {mu} must lie in [0, 1)")));
    }
    if !(tau_bar.is_finite() && tau_bar > 0.0) {
        return Err(Error::InvalidProfile(format!("tau_bar {tau_bar} must be positive")));
    }
    DelayProfile::sinusoidal(tau_bar, 2.0 * mu / tau_bar, phase, mu)
}

/// Initial function on `[−max τ, 0]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HistorySpec {
    /// `x(t) = x(0)` for `t ≤ 0`.
    #[default]
    ConstantAtInitial,
    /// Piecewise-linear through `(times[i], states[i])`, times increasing and
    /// ending at 0; `x(0)` is the last sample.
    Samples { times: Vec<f64>, states: Vec<Vec<f64>> },
}

impl HistorySpec {
    fn check(&self, y0: &[f64], reach: f64) -> Result<()> {
        let dim = y0.len();
        if let Self::Samples { times, states } = self {
            if times.is_empty() || times.len() != states.len() {
                return Err(Error::InvalidArgument(format!(
                    "history has {} times and {} states",
                    times.len(),
                    states.len()
                )));
            }
            if let Some(s) = states.iter().find(|s| s.len() != dim) {
                return Err(Error::DimensionMismatch(format!(
                    "history state of length {} for dimension {dim}",
                    s.len()
                )));
            }
            if times.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidArgument("history times must increase".into()));
            }
            if times.last() != Some(&0.0) {
                return Err(Error::InvalidArgument("history must end at t = 0".into()));
            }
            if times[0] > -reach {
                return Err(Error::InsufficientTrace(format!(
                    "history starts at {} but delays reach back to {}",
                    times[0], -reach
                )));
            }
            if states.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            let last = states.last().expect("non-empty");
            if last.iter().zip(y0).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs())) {
                return Err(Error::InvalidArgument("last history sample must equal the initial state".into()));
            }
        }
        Ok(())
    }

    /// History value and slope at `t ≤ 0`.
    fn eval(&self, x0: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::ConstantAtInitial => (x0.to_vec(), vec![0.0; x0.len()]),
            Self::Samples { times, states } => {
                let i = match times.iter().rposition(|&ti| ti <= t) {
                    Some(i) if i + 1 < times.len() => i,
                    Some(i) => i.saturating_sub(1),
                    None => 0,
                };
                if times.len() == 1 {
                    return (states[0].clone(), vec![0.0; x0.len()]);
                }
                let (t0, t1) = (times[i], times[i + 1]);
                let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                let slope: Vec<f64> = states[i]
                    .iter()
                    .zip(&states[i + 1])
                    .map(|(a, b)| (b - a) / (t1 - t0))
                    .collect();
                let value = states[i]
                    .iter()
                    .zip(&states[i + 1])
                    .map(|(a, b)| a + w * (b - a))
                    .collect();
                (value, slope)
            }
        }
    }

    /// Maps every sample through `m` (for instance `U ⊗ I_n`).
    pub fn mapped(&self, m: &Matrix) -> Self {
        match self {
            Self::ConstantAtInitial => Self::ConstantAtInitial,
            Self::Samples { times, states } => Self::Samples {
                times: times.clone(),
                states: states.iter().map(|s| m.matvec(s)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    /// Stacked agent states `x`.
    Agents,
    /// Consensus error `z = (U ⊗ I) x`.
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: StateKind,
    pub agents: usize,
    pub state_dim: usize,
    pub h: f64,
    /// Leading rows at negative times, sampled from the history.
    pub history_rows: usize,
    /// `times[i] = (i − history_rows)·h`.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    /// `‖(U⊗I)x‖∞` or `‖z‖∞`, one per row.
    pub disagreement: Vec<f64>,
    /// Set when the run was truncated on a non-finite or huge state.
    pub diverged: bool,
}

impl Trajectory {
    /// Row index of `t = 0`.
    pub fn start(&self) -> usize {
        self.history_rows
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn final_disagreement(&self) -> f64 {
        *self.disagreement.last().expect("non-empty")
    }

    /// Disagreement at the last row with `t ≤ at`.
    pub fn disagreement_at(&self, at: f64) -> Option<f64> {
        let i = self.times.iter().rposition(|&t| t <= at + 1e-9 * self.h)?;
        Some(self.disagreement[i])
    }

    /// Rows at `t ≥ 0` as CSV: `t,x_1_1,…,x_N_n,disagreement`.
    pub fn to_csv(&self) -> String {
        let prefix = match self.kind {
            StateKind::Agents => "x",
            StateKind::Error => "z",
        };
        let blocks = self.states[0].len() / self.state_dim;
        let mut out = String::from("t");
        for i in 1..=blocks {
            for j in 1..=self.state_dim {
                let _ = write!(out, ",{prefix}_{i}_{j}");
            }
        }
        out.push_str(",disagreement\n");
        for r in self.start()..self.times.len() {
            let _ = write!(out, "{:.11e}", self.times[r]);
            for v in &self.states[r] {
                let _ = write!(out, ",{v:.11e}");
            }
            let _ = writeln!(out, ",{:.11e}", self.disagreement[r]);
        }
        out
    }
}

/// `ẏ = A y + Σ_k C_k y(t − τ_k(t))`.
struct DelayedLinear<'a> {
    a: Matrix,
    terms: Vec<(Matrix, &'a DelayProfile)>,
}

fn add_matvec(m: &Matrix, x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        *yi += m.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

struct Grid<'a> {
    h: f64,
    history_rows: usize,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    history: &'a HistorySpec,
    y0: Vec<f64>,
}

impl Grid<'_> {
    /// State at `s`. Rows up to `n` carry derivatives; a state at row
    /// `n + 1` may already be stored without one.
    fn lookup(&self, s: f64, n: usize, out: &mut [f64]) {
        let tn = n as f64 * self.h;
        if s < 0.0 {
            let (v, _) = self.history.eval(&self.y0, s);
            out.copy_from_slice(&v);
            return;
        }
        let base = self.history_rows;
        if s >= tn || n == 0 {
            let x = &self.states[base + n];
            let dt = s - tn;
            if let Some(x1) = self.states.get(base + n + 1) {
                let w = (dt / self.h).clamp(0.0, 1.0);
                for (o, (a, b)) in out.iter_mut().zip(x.iter().zip(x1)) {
                    *o = a + w * (b - a);
                }
            } else if let Some(f) = self.derivs.get(base + n) {
                for (o, (xi, fi)) in out.iter_mut().zip(x.iter().zip(f)) {
                    *o = xi + dt * fi;
                }
            } else {
                out.copy_from_slice(x);
            }
            return;
        }
        let i = ((s / self.h).floor() as usize).min(n - 1);
        let theta = (s - i as f64 * self.h) / self.h;
        let (t2, t3) = (theta * theta, theta * theta * theta);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let (x0, f0) = (&self.states[base + i], &self.derivs[base + i]);
        let (x1, f1) = (&self.states[base + i + 1], &self.derivs[base + i + 1]);
        for (k, o) in out.iter_mut().enumerate() {
            *o = h00 * x0[k] + h10 * self.h * f0[k] + h01 * x1[k] + h11 * self.h * f1[k];
        }
    }
}

impl DelayedLinear<'_> {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn check_step(&self, h: f64) -> Result<()> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("step {h} must be positive")));
        }
        let min_delay = self
            .terms
            .iter()
            .filter_map(|(_, p)| match **p {
                DelayProfile::Constant { value } if value > 0.0 => Some(value),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min);
        if min_delay.is_finite() && h > min_delay / 4.0 * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { h, min_delay });
        }
        Ok(())
    }

    fn rhs(&self, grid: &Grid, t: f64, n: usize, y: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        add_matvec(&self.a, y, out);
        for (c, p) in &self.terms {
            if p.is_zero() {
                add_matvec(c, y, out);
            } else {
                grid.lookup(t - p.value(t), n, scratch);
                add_matvec(c, scratch, out);
            }
        }
    }

    fn integrate(&self, y0: &[f64], history: &HistorySpec, h: f64, t_end: f64) -> Result<Raw> {
        let dim = self.dim();
        if y0.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "initial state of length {} for dimension {dim}",
                y0.len()
            )));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("final time {t_end} must be positive")));
        }
        self.check_step(h)?;
        let reach = self.terms.iter().map(|(_, p)| p.max_value()).fold(0.0, f64::max);
        history.check(y0, reach)?;

        let history_rows = (reach / h - 1e-9).ceil().max(0.0) as usize;
        let steps = (t_end / h - 1e-9).ceil() as usize;
        let mut grid = Grid {
            h,
            history_rows,
            states: Vec::with_capacity(history_rows + steps + 1),
            derivs: Vec::with_capacity(history_rows + steps + 1),
            history,
            y0: y0.to_vec(),
        };
        for i in 0..history_rows {
            let t = (i as f64 - history_rows as f64) * h;
            let (v, d) = history.eval(y0, t);
            grid.states.push(v);
            grid.derivs.push(d);
        }

        let mut scratch = vec![0.0; dim];
        let mut f0 = vec![0.0; dim];
        grid.states.push(y0.to_vec());
        self.rhs(&grid, 0.0, 0, y0, &mut scratch, &mut f0);
        grid.derivs.push(f0);

        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
        let mut stage = vec![0.0; dim];
        let mut diverged = false;
        for n in 0..steps {
            let t = n as f64 * h;
            let y = grid.states[history_rows + n].clone();
            k1.copy_from_slice(&grid.derivs[history_rows + n]);
            for i in 0..dim {
                stage[i] = y[i] + 0.5 * h * k1[i];
            }
            self.rhs(&grid, t + 0.5 * h, n, &stage, &mut scratch, &mut k2);
            for i in 0..dim {
                stage[i] = y[i] + 0.5 * h * k2[i];
            }
            self.rhs(&grid, t + 0.5 * h, n, &stage, &mut scratch, &mut k3);
            for i in 0..dim {
                stage[i] = y[i] + h * k3[i];
            }
            self.rhs(&grid, t + h, n, &stage, &mut scratch, &mut k4);
            let next: Vec<f64> = (0..dim)
                .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
            if next.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
                diverged = true;
                break;
            }
            grid.states.push(next.clone());
            let mut f = vec![0.0; dim];
            self.rhs(&grid, t + h, n, &next, &mut scratch, &mut f);
            grid.derivs.push(f);
        }
        Ok(Raw {
            history_rows,
            h,
            states: grid.states,
            derivs: grid.derivs,
            diverged,
        })
    }
}

struct Raw {
    history_rows: usize,
    h: f64,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    diverged: bool,
}

impl Raw {
    fn finish(self, kind: StateKind, agents: usize, state_dim: usize, disagreement: impl Fn(&[f64]) -> f64) -> Trajectory {
        let times = (0..self.states.len())
            .map(|i| (i as f64 - self.history_rows as f64) * self.h)
            .collect();
        let disagreement = self.states.iter().map(|s| disagreement(s)).collect();
        Trajectory {
            kind,
            agents,
            state_dim,
            h: self.h,
            history_rows: self.history_rows,
            times,
            states: self.states,
            derivatives: self.derivs,
            disagreement,
            diverged: self.diverged,
        }
    }
}

fn check_profiles(profiles: &[DelayProfile], r: usize) -> Result<()> {
    if profiles.len() != r {
        return Err(Error::InvalidProfile(format!(
            "{} profiles for {r} delayed edges",
            profiles.len()
        )));
    }
    profiles.iter().try_for_each(|p| p.validate(None))
}

/// `ẋ = (I_N ⊗ A) x + σ Σ_k (L_k ⊗ BK) x(t − τ_k(t))`.
pub fn simulate_x(
    sys: &AgentSystem,
    g: &DelayGraph,
    profiles: &[DelayProfile],
    x0: &[f64],
    history: &HistorySpec,
    h: f64,
    t_end: f64,
) -> Result<Trajectory> {
    check_profiles(profiles, g.edge_count())?;
    let n = sys.state_dim();
    let agents = g.agents();
    let bk = sys.bk().scale(sys.sign().value());
    let terms = g
        .split_laplacians()
        .iter()
        .zip(profiles)
        .map(|(lk, p)| (kron(lk, &bk), p))
        .collect();
    let model = DelayedLinear {
        a: kron(&Matrix::identity(agents), sys.a()),
        terms,
    };
    let raw = model.integrate(x0, history, h, t_end)?;
    let (u, _) = build_u_w(agents)?;
    let ui = kron(&u, &Matrix::identity(n));
    Ok(raw.finish(StateKind::Agents, agents, n, |x| norm_inf(&ui.matvec(x))))
}

/// `ż = (I ⊗ A) z + σ Σ_k (L̄_k ⊗ BK) z(t − τ_k(t))`.
pub fn simulate_z(
    es: &ErrorSystem,
    profiles: &[DelayProfile],
    z0: &[f64],
    history: &HistorySpec,
    h: f64,
    t_end: f64,
) -> Result<Trajectory> {
    check_profiles(profiles, es.delay_count())?;
    let sigma = es.sign.value();
    let model = DelayedLinear {
        a: es.abar.clone(),
        terms: es.couplings.iter().map(|c| c.scale(sigma)).zip(profiles).collect(),
    };
    let raw = model.integrate(z0, history, h, t_end)?;
    Ok(raw.finish(StateKind::Error, es.agents, es.state_dim, norm_inf))
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
