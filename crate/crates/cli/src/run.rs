use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use delay_consensus::graph::DelayGraph;
use delay_consensus::lmi::assemble_full_lmi;
use delay_consensus::margin::search;
use delay_consensus::model::{build_u_w, modal_zero_delay_check, AgentSystem, DelayBounds, ErrorSystem};
use delay_consensus::sim::DelayProfile;
use delay_consensus::{
    assemble_error_system, kron, lyapunov_series, simulate_x, simulate_z, solve_feasibility,
    verify_certificate, Error, FeasibilityProblem, Matrix, SolverOptions, Status,
};

use crate::config::RunConfig;
use crate::plot::plot_script;
use crate::report::{
    tuple, AssumptionChecks, CertificateFile, FeasibilitySummary, Level, LyapunovSummary,
    MarginSummary, ReferenceComparison, RunReport, SimulationSummary,
};

/// Relative rise of the Lyapunov functional still counted as nonincreasing.
pub const LYAPUNOV_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Analyze,
    Margin,
    Simulate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::Analyze => "analyze",
            Self::Margin => "margin",
            Self::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// The primary CSV artifact on stdout.
    Csv,
    /// The human summary on stdout.
    #[default]
    Report,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub format: Format,
    pub seed: Option<u64>,
    pub certificate: Option<PathBuf>,
}

/// What a command produced: the report (already written to `out`) and the
/// text meant for stdout.
pub struct Outcome {
    pub report: RunReport,
    pub stdout: String,
}

struct Setup {
    sys: AgentSystem,
    graph: DelayGraph,
    es: Option<ErrorSystem>,
}

pub fn run_command(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome> {
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let mut report = RunReport::new(cmd.name());
    let mut csv = String::new();

    if let Some(setup) = check_assumptions(cfg, &mut report) {
        match (cmd, &setup.es) {
            (Command::Validate, _) => {}
            (_, None) => {}
            (Command::Analyze, Some(es)) => analyze(cfg, es, opts, &mut report, &mut csv)?,
            (Command::Margin, Some(es)) => margin(cfg, es, opts, &mut report, &mut csv)?,
            (Command::Simulate, Some(es)) => simulate(cfg, &setup, es, opts, &mut report, &mut csv)?,
        }
    }

    report.artifacts.push("report.json".into());
    report.artifacts.push("summary.txt".into());
    write(&opts.out, "report.json", &serde_json::to_string_pretty(&report)?)?;
    let summary = report.summary();
    write(&opts.out, "summary.txt", &summary)?;
    let stdout = match opts.format {
        Format::Report => summary,
        Format::Csv => csv,
    };
    Ok(Outcome { report, stdout })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn check_assumptions(cfg: &RunConfig, report: &mut RunReport) -> Option<Setup> {
    let sys = match cfg.agent_system() {
        Ok(s) => s,
        Err(e) => {
            report.push(Level::Error, "invalid-system", e.to_string());
            return None;
        }
    };
    let graph = match cfg.delay_graph() {
        Ok(g) => g,
        Err(e) => {
            report.push(Level::Error, "invalid-graph", e.to_string());
            return None;
        }
    };
    let (topology, stabilizable, abscissa) = match (graph.check_topology(), sys.is_stabilizable(), sys.closed_loop_abscissa()) {
        (Ok(t), Ok(s), Ok(a)) => (t, s, a),
        (t, s, a) => {
            let e = t.err().or(s.err()).or(a.err()).expect("one check failed");
            report.push(Level::Error, "numerical-failure", e.to_string());
            return None;
        }
    };

    let sigma = sys.sign().value();
    report.push(
        Level::Info,
        "sign-convention",
        format!(
            "protocol sign sigma = {sigma:+}: x' = (I (x) A) x + sigma sum_k (L_k (x) BK) x(t - tau_k(t)); \
             sigma = -1 gives u_i = K sum_j a_ij (x_j - x_i)"
        ),
    );
    if !topology.has_spanning_tree {
        report.push(
            Level::Error,
            "no-spanning-tree",
            "Assumption 1 violated: the graph has no directed spanning tree, so consensus cannot hold",
        );
    }
    if !topology.strongly_connected {
        report.push(
            Level::Warning,
            "not-strongly-connected",
            format!(
                "Assumption 1 also asks for strong connectivity; the graph has {} strongly connected components \
                 (the analysis itself only needs a directed spanning tree)",
                topology.component_count
            ),
        );
    }
    if !stabilizable {
        report.push(Level::Error, "not-stabilizable", "Assumption 2 violated: (A, B) is not stabilizable");
    }
    let hurwitz = abscissa < 0.0;
    if !hurwitz {
        report.push(
            Level::Warning,
            "gain-not-hurwitz",
            format!("A - BK is not Hurwitz (spectral abscissa {abscissa:.4}); the gain does not meet its design premise"),
        );
    }

    let mut modes = Vec::new();
    let mut es = None;
    if topology.has_spanning_tree {
        match modal_zero_delay_check(&sys, &graph) {
            Ok(m) => modes = m,
            Err(e) => report.push(Level::Error, "numerical-failure", e.to_string()),
        }
        for m in modes.iter().filter(|m| m.unstable) {
            report.push(
                Level::Warning,
                "unstable-undelayed-mode",
                format!(
                    "A + sigma*lambda*BK is not Hurwitz for lambda = {:.4}{:+.4}i (abscissa {:.4}); \
                     consensus fails even with zero delay",
                    m.eigenvalue.0, m.eigenvalue.1, m.abscissa
                ),
            );
        }
        if !modes.is_empty() && modes.iter().all(|m| m.unstable) {
            if let Ok(flipped) = sys
                .with_gain(sys.k().scale(-1.0))
                .and_then(|s| modal_zero_delay_check(&s, &graph))
            {
                if flipped.iter().all(|m| !m.unstable) {
                    report.push(
                        Level::Warning,
                        "sign-convention",
                        "every undelayed mode is stable with the opposite protocol sign; check sigma",
                    );
                }
            }
        }
        match assemble_error_system(&sys, &graph) {
            Ok(e) => es = Some(e),
            Err(e) => report.push(Level::Error, "invalid-system", e.to_string()),
        }
    }

    report.topology = Some(topology.clone());
    report.assumptions = Some(AssumptionChecks {
        stabilizable,
        closed_loop_abscissa: abscissa,
        closed_loop_hurwitz: hurwitz,
        has_spanning_tree: topology.has_spanning_tree,
        strongly_connected: topology.strongly_connected,
        modes,
    });
    if report.has_errors() {
        return None;
    }
    Some(Setup { sys, graph, es })
}

fn problem(cfg: &RunConfig, es: &ErrorSystem, bounds: &DelayBounds) -> delay_consensus::Result<FeasibilityProblem> {
    FeasibilityProblem::new(assemble_full_lmi(es, bounds)?, cfg.solver.epsilon)
}

fn solve_at(
    cfg: &RunConfig,
    es: &ErrorSystem,
    bounds: &DelayBounds,
    options: &SolverOptions,
) -> delay_consensus::Result<(FeasibilityProblem, FeasibilitySummary, Option<CertificateFile>)> {
    let p = problem(cfg, es, bounds)?;
    let res = solve_feasibility(&p, options)?;
    let (certificate_margins, file) = match &res.status {
        Status::Feasible(c) => {
            let check = verify_certificate(c, &p)?;
            let file = check.passed.then(|| CertificateFile {
                tau_bar: bounds.tau_bar.clone(),
                mu: bounds.mu.clone(),
                epsilon: p.epsilon,
                margins: check.margins.clone(),
                values: c.values.clone(),
            });
            (Some(check.margins), file)
        }
        _ => (None, None),
    };
    let summary = FeasibilitySummary {
        tau_bar: bounds.tau_bar.clone(),
        mu: bounds.mu.clone(),
        status: res.status.label().to_string(),
        epsilon: p.epsilon,
        margin: res.margin,
        upper_bound: res.upper_bound,
        iterations: res.iterations,
        certificate_margins,
        diagnostics: res.diagnostics,
    };
    Ok((p, summary, file))
}

fn report_status(report: &mut RunReport, f: &FeasibilitySummary, verified: bool) {
    match f.status.as_str() {
        "feasible" if !verified => report.push(
            Level::Error,
            "certificate-rejected",
            "solver reported feasible but the certificate failed independent verification",
        ),
        "feasible" => {}
        "infeasible" => report.push(
            Level::Warning,
            "infeasible",
            format!(
                "stability LMI is infeasible at tau_bar = {}: certified margin bound {} is below epsilon {:.3e}",
                tuple(&f.tau_bar),
                f.upper_bound.map_or("n/a".into(), |b| format!("{b:.3e}")),
                f.epsilon
            ),
        ),
        _ => report.push(
            Level::Warning,
            "undecided",
            format!("solver could not decide feasibility at tau_bar = {}: {}", tuple(&f.tau_bar), f.diagnostics),
        ),
    }
}

fn analyze(cfg: &RunConfig, es: &ErrorSystem, opts: &RunOptions, report: &mut RunReport, csv: &mut String) -> Result<()> {
    let bounds = cfg.bounds()?;
    match solve_at(cfg, es, &bounds, &cfg.solver_options()) {
        Ok((_, summary, file)) => {
            report_status(report, &summary, file.is_some());
            if let Some(file) = file {
                write(&opts.out, "certificate.json", &serde_json::to_string_pretty(&file)?)?;
                report.artifacts.push("certificate.json".into());
            }
            *csv = margins_csv(&summary);
            report.feasibility = Some(summary);
        }
        Err(e) => report.push(Level::Error, "solver-breakdown", e.to_string()),
    }
    Ok(())
}

fn margins_csv(f: &FeasibilitySummary) -> String {
    let mut s = String::from("quantity,value\n");
    s += &format!("status,{}\nmargin,{:.11e}\n", f.status, f.margin);
    if let Some(b) = f.upper_bound {
        s += &format!("upper_bound,{b:.11e}\n");
    }
    if let Some(m) = &f.certificate_margins {
        s += &format!("P,{:.11e}\nQ,{:.11e}\nR,{:.11e}\n", m.p, m.q, m.r);
        if let Some(x) = m.s {
            s += &format!("S,{x:.11e}\n");
        }
        s += &format!("LMI,{:.11e}\n", m.lmi);
    }
    s
}

fn margin(cfg: &RunConfig, es: &ErrorSystem, opts: &RunOptions, report: &mut RunReport, csv: &mut String) -> Result<()> {
    let Some(q) = cfg.margin_query() else {
        report.push(Level::Error, "missing-margin", "the margin command needs a [margin] section");
        return Ok(());
    };
    let mut summary = MarginSummary {
        mode: q.mode,
        tau_bar_star: None,
        scale: None,
        probes: 0,
        bisection_probes: 0,
        monotonicity_violations: 0,
        certificate_margins: None,
        reference: None,
    };
    match search(es, &q) {
        Ok(res) => {
            let bounds = DelayBounds::new(res.tau_bar_star.clone(), q.mu.clone())?;
            let p = problem(cfg, es, &bounds)?;
            let check = verify_certificate(&res.certificate, &p)?;
            if !check.passed {
                report.push(
                    Level::Error,
                    "certificate-rejected",
                    "margin certificate failed independent verification",
                );
            } else {
                let file = CertificateFile {
                    tau_bar: bounds.tau_bar.clone(),
                    mu: bounds.mu.clone(),
                    epsilon: p.epsilon,
                    margins: check.margins.clone(),
                    values: res.certificate.values.clone(),
                };
                write(&opts.out, "certificate.json", &serde_json::to_string_pretty(&file)?)?;
                report.artifacts.push("certificate.json".into());
            }
            if res.monotonicity_violations > 0 {
                report.push(
                    Level::Warning,
                    "monotonicity",
                    format!(
                        "{} feasible probe(s) found above a non-feasible one; feasibility is not monotone here",
                        res.monotonicity_violations
                    ),
                );
            }
            *csv = probes_csv(&res.probes);
            summary.tau_bar_star = Some(res.tau_bar_star);
            summary.scale = res.scale;
            summary.probes = res.probes.len();
            summary.bisection_probes = res.bisection_probes;
            summary.monotonicity_violations = res.monotonicity_violations;
            summary.certificate_margins = Some(check.margins);
        }
        Err(e @ (Error::BracketInvalid(_) | Error::BaseInfeasible)) => {
            report.push(Level::Warning, "no-margin", format!("no certified delay bound: {e}"));
        }
        Err(e) => report.push(Level::Error, "solver-breakdown", e.to_string()),
    }

    if let Some(reference) = cfg.margin.as_ref().and_then(|m| m.reference_tau_bar.clone()) {
        let bounds = DelayBounds::new(reference.clone(), q.mu.clone())?;
        match solve_at(cfg, es, &bounds, &cfg.solver_options()) {
            Ok((_, f, _)) => summary.reference = Some(compare(&reference, &f, summary.tau_bar_star.as_deref())),
            Err(e) => report.push(Level::Error, "solver-breakdown", e.to_string()),
        }
    }
    report.margin = Some(summary);
    Ok(())
}

fn compare(reference: &[f64], f: &FeasibilitySummary, computed: Option<&[f64]>) -> ReferenceComparison {
    let ratio = computed.map(|c| c.iter().zip(reference).map(|(a, b)| a / b).collect::<Vec<f64>>());
    let computed_text = match (computed, &ratio) {
        (Some(c), Some(r)) => format!("computed tau_bar* = {} (ratio to reference {})", tuple(c), tuple(r)),
        _ => "computed tau_bar* = none certified".to_string(),
    };
    let line = format!(
        "comparison: reference tau_bar = {} probes {} (margin {:.3e}, upper bound {}); {}",
        tuple(reference),
        f.status,
        f.margin,
        f.upper_bound.map_or("n/a".into(), |b| format!("{b:.3e}")),
        computed_text
    );
    ReferenceComparison {
        tau_bar: reference.to_vec(),
        status: f.status.clone(),
        margin: f.margin,
        upper_bound: f.upper_bound,
        ratio,
        line,
    }
}

fn probes_csv(probes: &[delay_consensus::margin::ProbeRecord]) -> String {
    let mut s = String::from("probe");
    if let Some(p) = probes.first() {
        for k in 0..p.tau_bar.len() {
            s += &format!(",tau_bar_{}", k + 1);
        }
    }
    s += ",status\n";
    for (i, p) in probes.iter().enumerate() {
        s += &(i + 1).to_string();
        for t in &p.tau_bar {
            s += &format!(",{t:.11e}");
        }
        s += &format!(",{}\n", p.status);
    }
    s
}

fn simulate(
    cfg: &RunConfig,
    setup: &Setup,
    es: &ErrorSystem,
    opts: &RunOptions,
    report: &mut RunReport,
    csv: &mut String,
) -> Result<()> {
    let profiles = cfg.profiles()?;
    let x0 = cfg.initial_state(opts.seed);
    let (h, t_end) = (cfg.sim.h, cfg.sim.t_end);
    let tr = match simulate_x(&setup.sys, &setup.graph, &profiles, &x0, &cfg.sim.history, h, t_end) {
        Ok(tr) => tr,
        Err(e) => {
            report.push(Level::Error, "simulation-failed", e.to_string());
            return Ok(());
        }
    };
    *csv = tr.to_csv();
    write(&opts.out, "trajectory.csv", csv)?;
    write(&opts.out, "plot_trajectory.py", &plot_script(tr.agents, tr.state_dim, &profiles))?;
    report.artifacts.push("trajectory.csv".into());
    report.artifacts.push("plot_trajectory.py".into());

    let final_disagreement = tr.final_disagreement();
    let converged = !tr.diverged && final_disagreement <= cfg.sim.consensus_tol;
    if tr.diverged {
        report.push(Level::Warning, "diverged", format!("trajectory diverged before T = {t_end}"));
    } else if !converged {
        report.push(
            Level::Warning,
            "no-consensus",
            format!(
                "disagreement {final_disagreement:.3e} at T = {t_end} exceeds {:.1e}",
                cfg.sim.consensus_tol
            ),
        );
    }

    let mut summary = SimulationSummary {
        h,
        t_end,
        profiles: profiles.clone(),
        final_disagreement,
        converged,
        diverged: tr.diverged,
        lyapunov: None,
    };
    if let Some(path) = &opts.certificate {
        summary.lyapunov = lyapunov(cfg, es, &profiles, &x0, path, opts, report)?;
    }
    report.simulation = Some(summary);
    Ok(())
}

fn lyapunov(
    cfg: &RunConfig,
    es: &ErrorSystem,
    profiles: &[DelayProfile],
    x0: &[f64],
    path: &Path,
    opts: &RunOptions,
    report: &mut RunReport,
) -> Result<Option<LyapunovSummary>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: CertificateFile =
        serde_json::from_str(&text).with_context(|| format!("parsing certificate {}", path.display()))?;
    let bounds = match DelayBounds::new(file.tau_bar.clone(), file.mu.clone()) {
        Ok(b) if b.len() == es.delay_count() => b,
        Ok(b) => {
            report.push(
                Level::Error,
                "certificate-mismatch",
                format!("certificate covers {} delays, the graph has {}", b.len(), es.delay_count()),
            );
            return Ok(None);
        }
        Err(e) => {
            report.push(Level::Error, "certificate-mismatch", e.to_string());
            return Ok(None);
        }
    };
    let p = problem(cfg, es, &bounds)?;
    let p = FeasibilityProblem::new(p.map, Some(file.epsilon))?;
    let cert = delay_consensus::Certificate {
        values: file.values.clone(),
        margins: file.margins.clone(),
    };
    match verify_certificate(&cert, &p) {
        Ok(check) if check.passed => {}
        Ok(check) => {
            report.push(
                Level::Error,
                "certificate-rejected",
                format!("certificate fails verification for this system ({:?})", check.failures),
            );
            return Ok(None);
        }
        Err(e) => {
            report.push(Level::Error, "certificate-mismatch", e.to_string());
            return Ok(None);
        }
    }
    for (k, prof) in profiles.iter().enumerate() {
        if prof.max_value() > bounds.tau_bar[k] || prof.max_rate() > bounds.mu[k] {
            report.push(
                Level::Warning,
                "outside-certificate",
                format!(
                    "delay {} (peak {:.4}, rate {:.4}) exceeds the certified bounds ({:.4}, {:.4}); V need not decrease",
                    k + 1,
                    prof.max_value(),
                    prof.max_rate(),
                    bounds.tau_bar[k],
                    bounds.mu[k]
                ),
            );
        }
    }

    let (u, _) = build_u_w(es.agents)?;
    let ui = kron(&u, &Matrix::identity(es.state_dim));
    let z0 = ui.matvec(x0);
    let zt = match simulate_z(es, profiles, &z0, &cfg.sim.history.mapped(&ui), cfg.sim.h, cfg.sim.t_end) {
        Ok(t) => t,
        Err(e) => {
            report.push(Level::Error, "simulation-failed", e.to_string());
            return Ok(None);
        }
    };
    let series = match lyapunov_series(&zt, &file.values, profiles, &bounds.tau_bar) {
        Ok(s) => s,
        Err(e) => {
            report.push(Level::Error, "lyapunov-failed", e.to_string());
            return Ok(None);
        }
    };
    write(&opts.out, "lyapunov.csv", &series.to_csv())?;
    report.artifacts.push("lyapunov.csv".into());
    let rise = series.max_relative_rise();
    let nonincreasing = series.is_nonincreasing(LYAPUNOV_TOL);
    if !nonincreasing {
        report.push(
            Level::Warning,
            "lyapunov-rise",
            format!("V rises by {rise:.3e} of its peak, above the {LYAPUNOV_TOL:.0e} tolerance"),
        );
    }
    Ok(Some(LyapunovSummary {
        rows: series.times.len(),
        max_relative_rise: rise,
        nonincreasing,
    }))
}
