//! Run configuration: TOML schema, validation and conversion to core types.
//!
//! Agents are numbered from 1 in the file. Per-edge arrays (`tau_bar`, `mu`,
//! `profiles`, margin `direction`) follow the order of `graph.edges`, which
//! must already be the delay-index order: receiving agent ascending, then
//! sending agent ascending.

use std::fmt;

use delay_consensus::graph::{index_delays, DelayGraph, Edge};
use delay_consensus::margin::{probe_options, MarginQuery, SearchMode};
use delay_consensus::model::{AgentSystem, DelayBounds, ProtocolSign};
use delay_consensus::sim::{make_sinusoidal_profile, DelayProfile, HistorySpec};
use delay_consensus::{Matrix, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub graph: GraphSection,
    pub delays: DelaySection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<MarginSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    /// Protocol sign `σ`, `-1` or `1`.
    #[serde(default = "default_sign")]
    pub sign: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub agents: usize,
    pub edges: Vec<EdgeSpec>,
}

/// `to` listens to `from`: `a_{to,from} = weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    #[serde(default = "one")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    pub tau_bar: Vec<f64>,
    pub mu: Vec<f64>,
    /// Delay signals used by `simulate`; constant at `tau_bar` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<ProfileSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    /// `τ(t) = (τ̄/2)(1 + sin(ωt + φ))`; `tau_bar` defaults to the edge bound.
    Sinusoidal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau_bar: Option<f64>,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Sinusoid spanning `[0, τ̄]` at the fastest rate `μ` allows.
    MaxRate {
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_end: f64,
    /// One row per agent; drawn uniformly from `[-1, 1]` with `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub history: HistorySpec,
    /// Disagreement at `T` below which the run counts as converged.
    #[serde(default = "default_consensus_tol")]
    pub consensus_tol: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            h: default_h(),
            t_end: default_t(),
            x0: None,
            seed: 0,
            history: HistorySpec::default(),
            consensus_tol: default_consensus_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            epsilon: None,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSection {
    #[serde(default = "default_mode")]
    pub mode: SearchMode,
    /// Defaults to `delays.tau_bar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    pub bracket: [f64; 2],
    #[serde(default = "default_margin_tol")]
    pub tolerance: f64,
    /// Coordinate-ascent visiting order, 1-based edge positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
    /// Published bounds to compare the computed margin against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_tau_bar: Option<Vec<f64>>,
}

fn default_sign() -> i64 {
    -1
}
fn one() -> f64 {
    1.0
}
fn default_h() -> f64 {
    1e-3
}
fn default_t() -> f64 {
    10.0
}
fn default_consensus_tol() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    500
}
fn default_tol() -> f64 {
    1e-9
}
fn default_mode() -> SearchMode {
    SearchMode::ScaleDirection
}
fn default_margin_tol() -> f64 {
    1e-3
}

/// One schema violation, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Every violation found in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub Vec<SchemaError>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} schema error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Default)]
struct Errors(Vec<SchemaError>);

impl Errors {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(SchemaError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl FnOnce() -> String) {
        if !ok {
            self.push(path, message());
        }
    }
}

/// Parses and validates; reports every violation rather than the first.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let path = e
            .span()
            .map(|s| {
                let line = text[..s.start].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_default();
        ConfigError(vec![SchemaError { path, message }])
    })?;
    let errors = cfg.validate();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError(errors))
    }
}

pub fn to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config types serialize")
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

fn check_matrix(errs: &mut Errors, path: &str, m: &[Vec<f64>], rows: Option<usize>, cols: Option<usize>) -> Option<(usize, usize)> {
    if m.is_empty() || m[0].is_empty() {
        errs.push(path, "must be a non-empty array of rows");
        return None;
    }
    let c = m[0].len();
    let mut ok = true;
    for (i, row) in m.iter().enumerate() {
        if row.len() != c {
            errs.push(format!("{path}[{i}]"), format!("row has {} entries, expected {c}", row.len()));
            ok = false;
        }
        if row.iter().any(|v| !finite(*v)) {
            errs.push(format!("{path}[{i}]"), "entries must be finite");
            ok = false;
        }
    }
    if let Some(r) = rows {
        if m.len() != r {
            errs.push(path, format!("has {} rows, expected {r}", m.len()));
            ok = false;
        }
    }
    if let Some(cc) = cols {
        if c != cc {
            errs.push(path, format!("has {c} columns, expected {cc}"));
            ok = false;
        }
    }
    ok.then_some((m.len(), c))
}

fn check_positive_array(errs: &mut Errors, path: &str, v: &[f64], len: usize) {
    errs.check(v.len() == len, path, || format!("has {} entries, expected one per edge ({len})", v.len()));
    for (i, x) in v.iter().enumerate() {
        errs.check(finite(*x) && *x > 0.0, format!("{path}[{i}]"), || format!("{x} must be positive"));
    }
}

impl RunConfig {
    fn validate(&self) -> Vec<SchemaError> {
        let mut errs = Errors::default();

        let n = check_matrix(&mut errs, "system.A", &self.system.a, None, None).and_then(|(r, c)| {
            errs.check(r == c, "system.A", || format!("must be square, got {r}x{c}"));
            (r == c).then_some(r)
        });
        let m = check_matrix(&mut errs, "system.B", &self.system.b, n, None).map(|(_, c)| c);
        if let (Some(n), Some(m)) = (n, m) {
            check_matrix(&mut errs, "system.K", &self.system.k, Some(m), Some(n));
        }
        errs.check(matches!(self.system.sign, -1 | 1), "system.sign", || {
            format!("must be -1 or 1, got {}", self.system.sign)
        });

        let agents = self.graph.agents;
        errs.check(agents >= 2, "graph.agents", || format!("need at least 2 agents, got {agents}"));
        let edges = &self.graph.edges;
        errs.check(!edges.is_empty(), "graph.edges", || "graph must have at least one edge".into());
        for (i, e) in edges.iter().enumerate() {
            let p = format!("graph.edges[{i}]");
            errs.check((1..=agents).contains(&e.from), format!("{p}.from"), || {
                format!("agent {} outside 1..={agents}", e.from)
            });
            errs.check((1..=agents).contains(&e.to), format!("{p}.to"), || {
                format!("agent {} outside 1..={agents}", e.to)
            });
            errs.check(e.from != e.to, &p, || format!("self-loop at agent {}", e.from));
            errs.check(finite(e.weight) && e.weight > 0.0, format!("{p}.weight"), || {
                format!("{} must be positive", e.weight)
            });
            if edges[..i].iter().any(|o| o.from == e.from && o.to == e.to) {
                errs.push(&p, format!("duplicate edge {} -> {}", e.from, e.to));
            }
        }
        let listed: Vec<Edge> = edges.iter().map(|e| Edge::new(e.from, e.to, e.weight)).collect();
        if index_delays(&listed) != listed {
            errs.push(
                "graph.edges",
                "edges must be listed by receiving agent (to), then sending agent (from)",
            );
        }

        let r = edges.len();
        check_positive_array(&mut errs, "delays.tau_bar", &self.delays.tau_bar, r);
        errs.check(self.delays.mu.len() == r, "delays.mu", || {
            format!("has {} entries, expected one per edge ({r})", self.delays.mu.len())
        });
        for (i, mu) in self.delays.mu.iter().enumerate() {
            errs.check((0.0..1.0).contains(mu), format!("delays.mu[{i}]"), || {
                format!("{mu} must lie in [0, 1)")
            });
        }
        if let Some(profiles) = &self.delays.profiles {
            errs.check(profiles.len() == r, "delays.profiles", || {
                format!("has {} entries, expected one per edge ({r})", profiles.len())
            });
            if profiles.len() == r && self.delays.tau_bar.len() == r && self.delays.mu.len() == r {
                for k in 0..r {
                    if let Err(e) = self.profile(k) {
                        errs.push(format!("delays.profiles[{k}]"), e);
                    }
                }
            }
        }

        let s = &self.sim;
        errs.check(finite(s.h) && s.h > 0.0, "sim.h", || format!("{} must be positive", s.h));
        errs.check(finite(s.t_end) && s.t_end >= s.h, "sim.T", || {
            format!("{} must be at least h = {}", s.t_end, s.h)
        });
        errs.check(finite(s.consensus_tol) && s.consensus_tol > 0.0, "sim.consensus_tol", || {
            format!("{} must be positive", s.consensus_tol)
        });
        if let (Some(x0), Some(n)) = (&s.x0, n) {
            check_matrix(&mut errs, "sim.x0", x0, Some(agents), Some(n));
        }
        if let (HistorySpec::Samples { times, states }, Some(n)) = (&s.history, n) {
            errs.check(!times.is_empty() && times.len() == states.len(), "sim.history", || {
                format!("{} times and {} states", times.len(), states.len())
            });
            for (i, st) in states.iter().enumerate() {
                errs.check(st.len() == agents * n, format!("sim.history.states[{i}]"), || {
                    format!("has {} entries, expected agents x state dimension = {}", st.len(), agents * n)
                });
            }
            errs.check(times.last() == Some(&0.0), "sim.history.times", || "must end at 0".into());
            errs.check(s.x0.is_some(), "sim.x0", || "required with sampled history".into());
        }

        let so = &self.solver;
        if let Some(eps) = so.epsilon {
            errs.check(finite(eps) && eps > 0.0, "solver.epsilon", || format!("{eps} must be positive"));
        }
        errs.check(so.max_iter >= 1, "solver.max_iter", || "must be at least 1".into());
        errs.check(finite(so.tol) && so.tol > 0.0, "solver.tol", || format!("{} must be positive", so.tol));

        if let Some(mg) = &self.margin {
            if let Some(d) = &mg.direction {
                check_positive_array(&mut errs, "margin.direction", d, r);
            }
            let [lo, hi] = mg.bracket;
            errs.check(finite(lo) && finite(hi) && lo > 0.0 && lo < hi, "margin.bracket", || {
                format!("need 0 < lo < hi, got [{lo}, {hi}]")
            });
            errs.check(finite(mg.tolerance) && mg.tolerance > 0.0, "margin.tolerance", || {
                format!("{} must be positive", mg.tolerance)
            });
            if let Some(order) = &mg.order {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                errs.check(sorted == (1..=r).collect::<Vec<_>>(), "margin.order", || {
                    format!("must be a permutation of 1..={r}")
                });
            }
            if let Some(reference) = &mg.reference_tau_bar {
                check_positive_array(&mut errs, "margin.reference_tau_bar", reference, r);
            }
        }
        errs.0
    }

    pub fn agent_system(&self) -> delay_consensus::Result<AgentSystem> {
        let sign = ProtocolSign::try_from(self.system.sign as i8)
            .map_err(delay_consensus::Error::InvalidArgument)?;
        AgentSystem::new(
            Matrix::from_rows(&self.system.a)?,
            Matrix::from_rows(&self.system.b)?,
            Matrix::from_rows(&self.system.k)?,
            sign,
        )
    }

    pub fn delay_graph(&self) -> delay_consensus::Result<DelayGraph> {
        let edges = self
            .graph
            .edges
            .iter()
            .map(|e| Edge::new(e.from - 1, e.to - 1, e.weight))
            .collect();
        DelayGraph::new(self.graph.agents, edges)
    }

    pub fn bounds(&self) -> delay_consensus::Result<DelayBounds> {
        DelayBounds::new(self.delays.tau_bar.clone(), self.delays.mu.clone())
    }

    fn profile(&self, k: usize) -> Result<DelayProfile, String> {
        let tau_bar = self.delays.tau_bar[k];
        let mu = self.delays.mu[k];
        let p = match self.delays.profiles.as_ref().map(|p| &p[k]) {
            None => DelayProfile::constant(tau_bar),
            Some(ProfileSpec::Constant { value }) => DelayProfile::constant(*value),
            Some(ProfileSpec::Sinusoidal { tau_bar: amp, omega, phase }) => {
                DelayProfile::sinusoidal(amp.unwrap_or(tau_bar), *omega, *phase, mu)
            }
            Some(ProfileSpec::MaxRate { phase }) => make_sinusoidal_profile(tau_bar, mu, *phase),
        }
        .map_err(|e| e.to_string())?;
        if p.max_value() > tau_bar * (1.0 + 1e-12) {
            return Err(format!("peak delay {} exceeds tau_bar = {tau_bar}", p.max_value()));
        }
        Ok(p)
    }

    pub fn profiles(&self) -> delay_consensus::Result<Vec<DelayProfile>> {
        (0..self.graph.edges.len())
            .map(|k| self.profile(k).map_err(delay_consensus::Error::InvalidProfile))
            .collect()
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.solver.max_iter,
            tol: self.solver.tol,
            ..SolverOptions::default()
        }
    }

    /// Initial agent states stacked as `x = [x_1; …; x_N]`; `seed` overrides `sim.seed`.
    pub fn initial_state(&self, seed: Option<u64>) -> Vec<f64> {
        match &self.sim.x0 {
            Some(rows) => rows.iter().flatten().copied().collect(),
            None => {
                let n = self.system.a.len();
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(self.sim.seed));
                (0..self.graph.agents * n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
            }
        }
    }

    /// The margin search request; `None` without a `[margin]` section.
    pub fn margin_query(&self) -> Option<MarginQuery> {
        let mg = self.margin.as_ref()?;
        let mut solver = probe_options();
        solver.max_iter = self.solver.max_iter;
        solver.tol = self.solver.tol;
        Some(MarginQuery {
            mode: mg.mode,
            direction: mg.direction.clone().unwrap_or_else(|| self.delays.tau_bar.clone()),
            mu: self.delays.mu.clone(),
            bracket: (mg.bracket[0], mg.bracket[1]),
            tolerance: mg.tolerance,
            order: mg.order.as_ref().map(|o| o.iter().map(|k| k - 1).collect()),
            epsilon: self.solver.epsilon,
            solver,
        })
    }
}
