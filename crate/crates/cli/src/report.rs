use std::fmt::Write as _;

use delay_consensus::model::ModeReport;
use delay_consensus::sim::DelayProfile;
use delay_consensus::{Margins, SearchMode, TopologyReport, VariableValues};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub level: Level,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionChecks {
    pub stabilizable: bool,
    /// Spectral abscissa of `A − BK`.
    pub closed_loop_abscissa: f64,
    pub closed_loop_hurwitz: bool,
    pub has_spanning_tree: bool,
    pub strongly_connected: bool,
    /// Undelayed modes `A + σλBK` over the eigenvalues of the reduced Laplacian.
    pub modes: Vec<ModeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySummary {
    pub tau_bar: Vec<f64>,
    pub mu: Vec<f64>,
    pub status: String,
    pub epsilon: f64,
    /// Best margin `t` reached by the solver.
    pub margin: f64,
    /// Certified upper bound on the optimal margin.
    pub upper_bound: Option<f64>,
    pub iterations: usize,
    /// Recomputed by independent verification; present iff status is feasible.
    pub certificate_margins: Option<Margins>,
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub tau_bar: Vec<f64>,
    pub status: String,
    pub margin: f64,
    pub upper_bound: Option<f64>,
    /// Computed over reference, per edge.
    pub ratio: Option<Vec<f64>>,
    pub line: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub mode: SearchMode,
    pub tau_bar_star: Option<Vec<f64>>,
    pub scale: Option<f64>,
    pub probes: usize,
    pub bisection_probes: usize,
    pub monotonicity_violations: usize,
    pub certificate_margins: Option<Margins>,
    pub reference: Option<ReferenceComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSummary {
    pub rows: usize,
    /// Largest rise above the running minimum, relative to `max V`.
    pub max_relative_rise: f64,
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub h: f64,
    pub t_end: f64,
    pub profiles: Vec<DelayProfile>,
    pub final_disagreement: f64,
    pub converged: bool,
    pub diverged: bool,
    pub lyapunov: Option<LyapunovSummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub topology: Option<TopologyReport>,
    pub assumptions: Option<AssumptionChecks>,
    pub feasibility: Option<FeasibilitySummary>,
    pub margin: Option<MarginSummary>,
    pub simulation: Option<SimulationSummary>,
    pub findings: Vec<Finding>,
    /// Files written next to the report.
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, level: Level, code: &str, message: impl Into<String>) {
        self.findings.push(Finding {
            level,
            code: code.to_string(),
            message: message.into(),
        });
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.level == Level::Error)
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.has_errors())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        if let Some(t) = &self.topology {
            let _ = writeln!(
                s,
                "topology: spanning tree {}, strongly connected {} ({} component(s)), roots {:?}",
                yes(t.has_spanning_tree),
                yes(t.strongly_connected),
                t.component_count,
                t.roots
            );
        }
        if let Some(a) = &self.assumptions {
            let _ = writeln!(
                s,
                "assumptions: stabilizable {}, A-BK Hurwitz {} (abscissa {:.4})",
                yes(a.stabilizable),
                yes(a.closed_loop_hurwitz),
                a.closed_loop_abscissa
            );
            for m in &a.modes {
                let _ = writeln!(
                    s,
                    "  undelayed mode lambda = {}: abscissa {:.4}{}",
                    complex(m.eigenvalue),
                    m.abscissa,
                    if m.unstable { " (unstable)" } else { "" }
                );
            }
        }
        if let Some(f) = &self.feasibility {
            let _ = writeln!(
                s,
                "feasibility at tau_bar = {} mu = {}: {} (margin {:.6e}, upper bound {}, epsilon {:.3e}, {} Newton steps)",
                tuple(&f.tau_bar),
                tuple(&f.mu),
                f.status,
                f.margin,
                opt(f.upper_bound),
                f.epsilon,
                f.iterations
            );
            if let Some(m) = &f.certificate_margins {
                let _ = writeln!(s, "  certificate margins: {}", margins(m));
            }
        }
        if let Some(m) = &self.margin {
            match &m.tau_bar_star {
                Some(t) => {
                    let _ = writeln!(
                        s,
                        "margin ({}): tau_bar* = {}{} after {} probes, {} monotonicity violation(s)",
                        mode(m.mode),
                        tuple(t),
                        m.scale.map(|x| format!(" (scale {x:.6})")).unwrap_or_default(),
                        m.probes,
                        m.monotonicity_violations
                    );
                }
                None => {
                    let _ = writeln!(s, "margin ({}): no certified delay bound in the bracket", mode(m.mode));
                }
            }
            if let Some(c) = &m.certificate_margins {
                let _ = writeln!(s, "  certificate margins: {}", margins(c));
            }
            if let Some(r) = &m.reference {
                let _ = writeln!(s, "{}", r.line);
            }
        }
        if let Some(sim) = &self.simulation {
            let _ = writeln!(
                s,
                "simulation: h = {}, T = {}, final disagreement {:.6e}, converged {}{}",
                sim.h,
                sim.t_end,
                sim.final_disagreement,
                yes(sim.converged),
                if sim.diverged { " (diverged)" } else { "" }
            );
            if let Some(l) = &sim.lyapunov {
                let _ = writeln!(
                    s,
                    "  Lyapunov functional: {} rows, max relative rise {:.3e}, nonincreasing {}",
                    l.rows,
                    l.max_relative_rise,
                    yes(l.nonincreasing)
                );
            }
        }
        for f in &self.findings {
            let tag = match f.level {
                Level::Info => "info",
                Level::Warning => "warning",
                Level::Error => "ERROR",
            };
            let _ = writeln!(s, "{tag} [{}]: {}", f.code, f.message);
        }
        for a in &self.artifacts {
            let _ = writeln!(s, "wrote {a}");
        }
        s
    }
}

/// The `certificate.json` layout: the bounds it certifies plus the variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub tau_bar: Vec<f64>,
    pub mu: Vec<f64>,
    pub epsilon: f64,
    pub margins: Margins,
    pub values: VariableValues,
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn mode(m: SearchMode) -> &'static str {
    match m {
        SearchMode::ScaleDirection => "scale-direction",
        SearchMode::CoordinateAscent => "coordinate-ascent",
    }
}

pub fn tuple(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

fn opt(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |x| format!("{x:.6e}"))
}

fn complex((re, im): (f64, f64)) -> String {
    if im.abs() < 1e-12 {
        format!("{re:.4}")
    } else {
        format!("{re:.4}{im:+.4}i")
    }
}

fn margins(m: &Margins) -> String {
    let mut s = format!("P {:.3e}, Q {:.3e}, R {:.3e}", m.p, m.q, m.r);
    if let Some(x) = m.s {
        let _ = write!(s, ", S {x:.3e}");
    }
    let _ = write!(s, ", LMI {:.3e}", m.lmi);
    s
}
