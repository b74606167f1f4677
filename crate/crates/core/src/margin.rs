//! Delay margins by repeated feasibility probes.
//!
//! Two search modes are offered: bisection on a scale `s` along a fixed
//! direction `τ̄ = s·d`, and coordinate-wise bisection of one bound at a time.
//! `Unknown` probes count as not feasible, so they can only shrink a margin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::assemble_full_lmi;
use crate::model::{DelayBounds, ErrorSystem};
use crate::sdp::{solve_feasibility, Certificate, FeasibilityProblem, SolverOptions, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    ScaleDirection,
    CoordinateAscent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginQuery {
    pub mode: SearchMode,
    /// Direction `d > 0`, one entry per delay index.
    pub direction: Vec<f64>,
    pub mu: Vec<f64>,
    /// `[s_lo, s_hi]` in scale units (absolute delay units for coordinate ascent).
    pub bracket: (f64, f64),
    pub tolerance: f64,
    /// Coordinate visiting order (0-based); `None` means `0..r`.
    pub order: Option<Vec<usize>>,
    /// Margin `ε` passed to every probe; `None` for the default.
    pub epsilon: Option<f64>,
    pub solver: SolverOptions,
}

impl MarginQuery {
    pub fn scale(direction: Vec<f64>, mu: Vec<f64>, bracket: (f64, f64)) -> Self {
        Self {
            mode: SearchMode::ScaleDirection,
            direction,
            mu,
            bracket,
            tolerance: 1e-3,
            order: None,
            epsilon: None,
            solver: probe_options(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.direction.is_empty() || self.direction.len() != self.mu.len() {
            return Err(Error::InvalidArgument(format!(
                "direction has {} entries, mu has {}",
                self.direction.len(),
                self.mu.len()
            )));
        }
        if let Some(d) = self.direction.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidArgument(format!("direction entry {d} must be positive")));
        }
        let (lo, hi) = self.bracket;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(Error::BracketInvalid(format!("need 0 < s_lo < s_hi, got [{lo}, {hi}]")));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Solver settings used for probes: stop at the first verified margin.
pub fn probe_options() -> SolverOptions {
    SolverOptions {
        stop_early: true,
        ..SolverOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub tau_bar: Vec<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginResult {
    pub tau_bar_star: Vec<f64>,
    /// Final scale `s*` in scale-direction mode.
    pub scale: Option<f64>,
    pub probes: Vec<ProbeRecord>,
    /// Feasible probes found above a not-feasible one.
    pub monotonicity_violations: usize,
    /// Probes spent inside the bisection loops (bracket and check probes excluded).
    pub bisection_probes: usize,
    /// Certificate backing `tau_bar_star`.
    pub certificate: Certificate,
}

/// Feasibility of the stability LMI at `(τ̄, μ)`.
pub fn probe(
    es: &ErrorSystem,
    tau_bar: &[f64],
    mu: &[f64],
    epsilon: Option<f64>,
    options: &SolverOptions,
) -> Result<Status> {
    let bounds = DelayBounds::new(tau_bar.to_vec(), mu.to_vec())?;
    let map = assemble_full_lmi(es, &bounds)?;
    let p = FeasibilityProblem::new(map, epsilon)?;
    Ok(solve_feasibility(&p, options)?.status)
}

struct Prober<'a> {
    es: &'a ErrorSystem,
    mu: &'a [f64],
    epsilon: Option<f64>,
    options: &'a SolverOptions,
    log: Vec<ProbeRecord>,
}

impl Prober<'_> {
    fn run(&mut self, tau_bar: Vec<f64>) -> Result<Option<Certificate>> {
        let status = probe(self.es, &tau_bar, self.mu, self.epsilon, self.options)?;
        self.log.push(ProbeRecord {
            tau_bar,
            status: status.label().to_string(),
        });
        Ok(match status {
            Status::Feasible(c) => Some(*c),
            _ => None,
        })
    }
}

fn scaled(d: &[f64], s: f64) -> Vec<f64> {
    d.iter().map(|x| x * s).collect()
}

/// Number of halvings that bring `width` down to `tol`.
pub fn bisection_steps(width: f64, tol: f64) -> usize {
    if width <= tol {
        0
    } else {
        (width / tol).log2().ceil() as usize
    }
}

/// Largest feasible `s` along `d` to within `q.tolerance`.
pub fn bisect_scale(es: &ErrorSystem, q: &MarginQuery) -> Result<MarginResult> {
    q.validate()?;
    let mut pr = Prober {
        es,
        mu: &q.mu,
        epsilon: q.epsilon,
        options: &q.solver,
        log: Vec::new(),
    };
    let d = &q.direction;
    let (lo0, hi0) = q.bracket;

    let Some(mut cert) = pr.run(scaled(d, lo0))? else {
        return Err(Error::BracketInvalid(format!("lower end s = {lo0} is not feasible")));
    };
    if pr.run(scaled(d, hi0))?.is_some() {
        return Err(Error::BracketInvalid(format!("upper end s = {hi0} is feasible")));
    }

    let (mut lo, mut hi) = (lo0, hi0);
    let steps = bisection_steps(hi - lo, q.tolerance);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        match pr.run(scaled(d, mid))? {
            Some(c) => {
                lo = mid;
                cert = c;
            }
            None => hi = mid,
        }
    }

    // s* + tol lies at or above the final upper end, so under monotonicity
    // it cannot be feasible
    let mut violations = 0;
    let above = lo + q.tolerance;
    if above < hi0 && pr.run(scaled(d, above))?.is_some() {
        violations += 1;
        // nothing below the certified `lo` can raise the answer
        if let Some((s, c)) = grid_scan_inner(&mut pr, d, lo, hi0, q.tolerance)? {
            lo = s;
            cert = c;
        }
    }

    Ok(MarginResult {
        tau_bar_star: scaled(d, lo),
        scale: Some(lo),
        probes: pr.log,
        monotonicity_violations: violations,
        bisection_probes: steps,
        certificate: cert,
    })
}

/// Largest grid point `s_lo + i·step ≤ s_hi` that probes feasible.
///
/// Exhaustive and expensive: every grid point is probed.
pub fn grid_scan(es: &ErrorSystem, q: &MarginQuery, step: f64) -> Result<Option<(f64, Vec<ProbeRecord>)>> {
    q.validate()?;
    let mut pr = Prober {
        es,
        mu: &q.mu,
        epsilon: q.epsilon,
        options: &q.solver,
        log: Vec::new(),
    };
    let found = grid_scan_inner(&mut pr, &q.direction, q.bracket.0, q.bracket.1, step)?;
    Ok(found.map(|(s, _)| (s, pr.log)))
}

fn grid_scan_inner(
    pr: &mut Prober,
    d: &[f64],
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<Option<(f64, Certificate)>> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut best = None;
    for i in 0..=count {
        let s = lo + i as f64 * step;
        if let Some(c) = pr.run(scaled(d, s))? {
            best = Some((s, c));
        }
    }
    Ok(best)
}

/// Raises each `τ̄_k` in turn from `base` toward `q.bracket.1`, holding the
/// others at their current values, then freezes it.
///
/// `q.direction` is ignored; `q.bracket.1` caps every coordinate.
pub fn coordinate_margins(es: &ErrorSystem, base: &[f64], q: &MarginQuery) -> Result<MarginResult> {
    let r = base.len();
    if r != q.mu.len() || r != es.delay_count() {
        return Err(Error::InvalidArgument(format!(
            "base has {r} entries, mu {}, graph {} delayed edges",
            q.mu.len(),
            es.delay_count()
        )));
    }
    let cap = q.bracket.1;
    if let Some(b) = base.iter().find(|b| !(b.is_finite() && **b > 0.0 && **b < cap)) {
        return Err(Error::BracketInvalid(format!("base entry {b} must lie in (0, {cap})")));
    }
    let order: Vec<usize> = q.order.clone().unwrap_or_else(|| (0..r).collect());
    let mut seen = vec![false; r];
    for &k in &order {
        if k >= r || std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidArgument(format!("bad coordinate order {order:?}")));
        }
    }

    let mut pr = Prober {
        es,
        mu: &q.mu,
        epsilon: q.epsilon,
        options: &q.solver,
        log: Vec::new(),
    };
    let mut tau = base.to_vec();
    let Some(mut cert) = pr.run(tau.clone())? else {
        return Err(Error::BaseInfeasible);
    };
    let mut total_steps = 0;
    let mut violations = 0;
    for &k in &order {
        let at = |t: f64, tau: &[f64]| {
            let mut v = tau.to_vec();
            v[k] = t;
            v
        };
        if let Some(c) = pr.run(at(cap, &tau))? {
            tau[k] = cap;
            cert = c;
            continue;
        }
        let (mut lo, mut hi) = (tau[k], cap);
        let steps = bisection_steps(hi - lo, q.tolerance);
        total_steps += steps;
        for _ in 0..steps {
            let mid = 0.5 * (lo + hi);
            match pr.run(at(mid, &tau))? {
                Some(c) => {
                    lo = mid;
                    cert = c;
                }
                None => hi = mid,
            }
        }
        let above = lo + q.tolerance;
        if above < cap && pr.run(at(above, &tau))?.is_some() {
            violations += 1;
        }
        tau[k] = lo;
    }
    Ok(MarginResult {
        tau_bar_star: tau,
        scale: None,
        probes: pr.log,
        monotonicity_violations: violations,
        bisection_probes: total_steps,
        certificate: cert,
    })
}

/// Dispatches on `q.mode`; coordinate ascent starts from `s_lo·d`.
pub fn search(es: &ErrorSystem, q: &MarginQuery) -> Result<MarginResult> {
    match q.mode {
        SearchMode::ScaleDirection => bisect_scale(es, q),
        SearchMode::CoordinateAscent => {
            q.validate()?;
            coordinate_margins(es, &scaled(&q.direction, q.bracket.0), q)
        }
    }
}
