//! Numerical checks of the analysis: the two integral inequalities used to
//! bound the functional's derivative, and the Lyapunov–Krasovskii functional
//! `V = V1 + V2 + V3 + V4` evaluated along a simulated error trajectory.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{VariableLayout, VariableValues};
use crate::matrix::{min_eig_sym, Matrix};
use crate::sim::{DelayProfile, StateKind, Trajectory};

/// Trajectory segment on a uniform grid `t0 + i·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTrace {
    pub t0: f64,
    pub h: f64,
    pub values: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
}

impl QuadratureTrace {
    pub fn new(t0: f64, h: f64, values: Vec<Vec<f64>>, derivatives: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 || values.len() != derivatives.len() {
            return Err(Error::InsufficientTrace(format!(
                "{} values and {} derivatives",
                values.len(),
                derivatives.len()
            )));
        }
        if !(h.is_finite() && h > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad grid t0 = {t0}, h = {h}")));
        }
        let dim = values[0].len();
        if values.iter().chain(&derivatives).any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("trace rows differ in length".into()));
        }
        Ok(Self {
            t0,
            h,
            values,
            derivatives,
        })
    }

    /// Samples `z` and `ż` from closures.
    pub fn sample(t0: f64, h: f64, len: usize, z: impl Fn(f64) -> Vec<f64>, dz: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let times = (0..len).map(|i| t0 + i as f64 * h);
        Self::new(t0, h, times.clone().map(&z).collect(), times.map(&dz).collect())
    }

    pub fn from_trajectory(tr: &Trajectory) -> Result<Self> {
        Self::new(tr.times[0], tr.h, tr.states.clone(), tr.derivatives.clone())
    }

    pub fn end(&self) -> f64 {
        self.t0 + (self.values.len() - 1) as f64 * self.h
    }

    /// Grid index of `t`, which must be a grid point.
    fn index(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.h;
        let i = x.round();
        if i < 0.0 || i as usize >= self.values.len() {
            return Err(Error::InsufficientTrace(format!(
                "time {t} outside [{}, {}]",
                self.t0,
                self.end()
            )));
        }
        if (x - i).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("time {t} is not on the grid (step {})", self.h)));
        }
        Ok(i as usize)
    }

    /// Cubic Hermite value at any `t` inside the trace.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        let x = (t - self.t0) / self.h;
        let last = self.values.len() - 1;
        if x < -1e-9 || x > last as f64 + 1e-9 {
            return Err(Error::InsufficientTrace(format!(
                "time {t} outside [{}, {}]",
                self.t0,
                self.end()
            )));
        }
        let i = (x.floor().max(0.0) as usize).min(last - 1);
        let th = (x - i as f64).clamp(0.0, 1.0);
        let (t2, t3) = (th * th, th * th * th);
        let (a, b, c, d) = (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + th, -2.0 * t3 + 3.0 * t2, t3 - t2);
        let h = self.h;
        Ok((0..self.values[i].len())
            .map(|k| {
                a * self.values[i][k]
                    + b * h * self.derivatives[i][k]
                    + c * self.values[i + 1][k]
                    + d * h * self.derivatives[i + 1][k]
            })
            .collect())
    }
}

fn quad(x: &Matrix, v: &[f64]) -> f64 {
    let xv = x.matvec(v);
    v.iter().zip(&xv).map(|(a, b)| a * b).sum()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn check_pd(x: &Matrix, name: &str, dim: usize) -> Result<()> {
    if x.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{} for a trace of dimension {dim}",
            x.rows(),
            x.cols()
        )));
    }
    if !(min_eig_sym(x)? > 0.0) {
        return Err(Error::InvalidArgument(format!("{name} must be positive definite")));
    }
    Ok(())
}

/// `∫ żᵀ X ż` over grid rows `lo..=hi`, by the composite trapezoid rule
/// with the endpoint derivative correction `−h²/12 (g'(b) − g'(a))`.
fn corrected_integral(tr: &QuadratureTrace, x: &Matrix, lo: usize, hi: usize) -> f64 {
    if hi == lo {
        return 0.0;
    }
    let g: Vec<f64> = (lo..=hi).map(|i| quad(x, &tr.derivatives[i])).collect();
    let h = tr.h;
    let mut s = 0.5 * (g[0] + g[g.len() - 1]) + g[1..g.len() - 1].iter().sum::<f64>();
    s *= h;
    if g.len() >= 3 {
        let m = g.len() - 1;
        let da = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h);
        let db = (3.0 * g[m] - 4.0 * g[m - 1] + g[m - 2]) / (2.0 * h);
        s -= h * h / 12.0 * (db - da);
    }
    s
}

/// `RHS − LHS` of the single-interval bound at the trace's final time `t`:
///
/// ```text
/// −γ ∫_{t−γ}^{t} żᵀXż ds  ≤  −(z(t) − z(t−γ))ᵀ X (z(t) − z(t−γ))
/// ```
///
/// `γ` must be a multiple of the grid step.
pub fn check_lemma1(trace: &QuadratureTrace, x: &Matrix, gamma: f64) -> Result<f64> {
    check_pd(x, "X", trace.values[0].len())?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must be positive")));
    }
    let hi = trace.values.len() - 1;
    let lo = trace.index(trace.end() - gamma)?;
    let lhs = -gamma * corrected_integral(trace, x, lo, hi);
    let d = diff(&trace.values[hi], &trace.values[lo]);
    let rhs = -quad(x, &d);
    Ok(rhs - lhs)
}

/// `RHS − LHS` of the three-point bound at the trace's final time `t`, with
/// `h1 ≤ τ ≤ h2`:
///
/// ```text
/// −(h2−h1) ∫_{t−h2}^{t−h1} żᵀYż ds ≤ vᵀ [[−Y, Y, 0], [Y, −2Y, Y], [0, Y, −Y]] v
/// v = (z(t−h1), z(t−τ), z(t−h2))
/// ```
///
/// `h1` and `h2` must be multiples of the grid step; `τ` need not be.
pub fn check_lemma2(trace: &QuadratureTrace, y: &Matrix, h1: f64, h2: f64, tau: f64) -> Result<f64> {
    check_pd(y, "Y", trace.values[0].len())?;
    if !(0.0 <= h1 && h1 <= tau && tau <= h2) {
        return Err(Error::InvalidArgument(format!(
            "need 0 ≤ h1 ≤ tau ≤ h2, got {h1}, {tau}, {h2}"
        )));
    }
    let t = trace.end();
    let hi = trace.index(t - h1)?;
    let lo = trace.index(t - h2)?;
    let lhs = -(h2 - h1) * corrected_integral(trace, y, lo, hi);
    let a = &trace.values[hi];
    let b = trace.value_at(t - tau)?;
    let c = &trace.values[lo];
    let rhs = -quad(y, &diff(a, &b)) - quad(y, &diff(&b, c));
    Ok(rhs - lhs)
}

/// Running integrals of one grid series: `c[i] = ∫_{t_0}^{t_i} g`,
/// `d[i] = ∫_{t_0}^{t_i} c`, both by the trapezoid rule.
struct Cumulative {
    t0: f64,
    h: f64,
    g: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl Cumulative {
    fn new(t0: f64, h: f64, g: Vec<f64>) -> Self {
        let mut c = vec![0.0; g.len()];
        let mut d = vec![0.0; g.len()];
        for i in 1..g.len() {
            c[i] = c[i - 1] + 0.5 * h * (g[i - 1] + g[i]);
            d[i] = d[i - 1] + 0.5 * h * (c[i - 1] + c[i]);
        }
        Self { t0, h, g, c, d }
    }

    fn split(&self, t: f64) -> (usize, f64) {
        let x = ((t - self.t0) / self.h).max(0.0);
        let mut i = x.floor() as usize;
        let mut dt = (x - i as f64) * self.h;
        if i >= self.g.len() - 1 {
            i = self.g.len() - 1;
            dt = 0.0;
        }
        if dt < 1e-9 * self.h {
            dt = 0.0;
        }
        (i, dt)
    }

    /// `(c(t), d(t))`, trapezoid-consistent off the grid.
    fn at(&self, t: f64) -> (f64, f64) {
        let (i, dt) = self.split(t);
        if dt == 0.0 {
            return (self.c[i], self.d[i]);
        }
        let gt = self.g[i] + (self.g[i + 1] - self.g[i]) * dt / self.h;
        let ct = self.c[i] + 0.5 * dt * (self.g[i] + gt);
        let dtv = self.d[i] + 0.5 * dt * (self.c[i] + ct);
        (ct, dtv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v3: Vec<f64>,
    pub v4: Vec<f64>,
    pub total: Vec<f64>,
}

impl LyapunovSeries {
    /// Largest rise of `V` above its running minimum, relative to `max V`.
    /// Zero for a nonincreasing series.
    pub fn max_relative_rise(&self) -> f64 {
        let scale = self.total.iter().copied().fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut low = f64::INFINITY;
        let mut rise: f64 = 0.0;
        for &v in &self.total {
            low = low.min(v);
            rise = rise.max(v - low);
        }
        rise / scale
    }

    pub fn is_nonincreasing(&self, rel_tol: f64) -> bool {
        self.max_relative_rise() <= rel_tol
    }

    /// `t,V1,V2,V3,V4,V`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,V1,V2,V3,V4,V\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                self.times[i], self.v1[i], self.v2[i], self.v3[i], self.v4[i], self.total[i]
            );
        }
        out
    }
}

/// The functional along an error trajectory, from the first row whose
/// lookback `max τ̄` lies inside the stored grid.
///
/// `V2` integrates from `t − τ_k(t)` with the current delay value.
pub fn lyapunov_series(
    tr: &Trajectory,
    values: &VariableValues,
    profiles: &[DelayProfile],
    tau_bar: &[f64],
) -> Result<LyapunovSeries> {
    if tr.kind != StateKind::Error {
        return Err(Error::InvalidArgument("the functional is defined on the error trajectory".into()));
    }
    let r = tau_bar.len();
    if profiles.len() != r {
        return Err(Error::InvalidArgument(format!(
            "{} profiles for {r} delay bounds",
            profiles.len()
        )));
    }
    let n = tr.state_dim;
    let copies = tr.agents - 1;
    let layout = VariableLayout::new(n, r, copies);
    values.validate(&layout)?;
    for (k, p) in profiles.iter().enumerate() {
        if p.max_value() > tau_bar[k] * (1.0 + 1e-12) {
            return Err(Error::InvalidProfile(format!(
                "delay {} exceeds its bound {}",
                k + 1,
                tau_bar[k]
            )));
        }
    }

    let blockwise = |m: &Matrix, v: &[f64]| -> f64 { v.chunks(n).map(|c| quad(m, c)).sum() };
    let t0 = tr.times[0];
    let h = tr.h;
    let series = |m: &Matrix, use_deriv: bool| -> Cumulative {
        let rows = if use_deriv { &tr.derivatives } else { &tr.states };
        Cumulative::new(t0, h, rows.iter().map(|v| blockwise(m, v)).collect())
    };
    let q: Vec<Cumulative> = values.q.iter().map(|m| series(m, false)).collect();
    let rr: Vec<Cumulative> = values.r.iter().map(|m| series(m, true)).collect();
    let pairs = layout.pairs();
    let s: Vec<Cumulative> = values.s.iter().map(|m| series(m, true)).collect();

    let reach = tau_bar.iter().copied().fold(0.0, f64::max);
    let first = ((reach / h) - 1e-9).ceil().max(0.0) as usize;
    if first >= tr.times.len() {
        return Err(Error::InsufficientTrace(format!(
            "trajectory spans {} but the functional looks back {reach}",
            tr.final_time() - t0
        )));
    }

    let mut out = LyapunovSeries {
        times: Vec::new(),
        v1: Vec::new(),
        v2: Vec::new(),
        v3: Vec::new(),
        v4: Vec::new(),
        total: Vec::new(),
    };
    for i in first..tr.times.len() {
        let t = tr.times[i];
        let v1 = blockwise(&values.p, &tr.states[i]);
        let mut v2 = 0.0;
        for (k, c) in q.iter().enumerate() {
            v2 += c.c[i] - c.at(t - profiles[k].value(t)).0;
        }
        let mut v3 = 0.0;
        for (k, c) in rr.iter().enumerate() {
            let tb = tau_bar[k];
            v3 += tb * (tb * c.c[i] - (c.d[i] - c.at(t - tb).1));
        }
        let mut v4 = 0.0;
        for (idx, &(k, j)) in pairs.iter().enumerate() {
            let c = &s[idx];
            let w = tau_bar[k] - tau_bar[j];
            v4 += w * (w * c.c[i] - (c.at(t - tau_bar[j]).1 - c.at(t - tau_bar[k]).1));
        }
        out.times.push(t);
        out.v1.push(v1);
        out.v2.push(v2);
        out.v3.push(v3);
        out.v4.push(v4);
        out.total.push(v1 + v2 + v3 + v4);
    }
    Ok(out)
}
