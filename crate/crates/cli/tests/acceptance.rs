//! Acceptance suite: one PASS/FAIL line per criterion, each checked at its
//! stated tolerance and runtime budget. Exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use delay_consensus::diagnostics::{check_lemma1, check_lemma2, QuadratureTrace};
use delay_consensus::graph::{DelayGraph, Edge};
use delay_consensus::lmi::{assemble_full_lmi, lmi_matrix, schur_reduced, VariableLayout, VariableValues};
use delay_consensus::margin::{bisect_scale, grid_scan, MarginQuery};
use delay_consensus::matrix::{eigenvalues, kron, max_eig_sym, min_eig_sym, spectral_abscissa, Matrix};
use delay_consensus::model::{assemble_error_system, build_u_w, reduce_laplacian, AgentSystem, DelayBounds, ProtocolSign};
use delay_consensus::sdp::{solve_feasibility, verify_certificate, Certificate, FeasibilityProblem, SolverOptions, Status};
use delay_consensus::sim::{simulate_x, simulate_z, DelayProfile, HistorySpec};
use delay_consensus_cli::config::ProfileSpec;
use delay_consensus_cli::{parse_config, run_command, Command, Format, Level, RunConfig, RunOptions, RunReport};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_spd(rng: &mut impl Rng, n: usize) -> Matrix {
    let g = random_matrix(rng, n, n);
    let mut m = g.matmul(&g.transpose()).unwrap();
    let d = rng.gen_range(0.05..1.0);
    for i in 0..n {
        m[(i, i)] += d;
    }
    m.symmetrize()
}

fn random_spanning_digraph(rng: &mut impl Rng, agents: usize) -> DelayGraph {
    let mut order: Vec<usize> = (0..agents).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..agents {
        edges.push(Edge::new(order[rng.gen_range(0..i)], order[i], rng.gen_range(0.2..2.0)));
    }
    for _ in 0..rng.gen_range(0..agents) {
        let (a, b) = (rng.gen_range(0..agents), rng.gen_range(0..agents));
        if a != b && !edges.iter().any(|e| e.from == a && e.to == b) {
            edges.push(Edge::new(a, b, rng.gen_range(0.2..2.0)));
        }
    }
    DelayGraph::new(agents, edges).unwrap()
}

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn example_system(k: [f64; 2]) -> (AgentSystem, DelayGraph) {
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

fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn load(name: &str) -> RunConfig {
    parse_config(&std::fs::read_to_string(examples_dir().join(name)).unwrap()).unwrap()
}

fn run(cmd: Command, cfg: &RunConfig, out: &Path, certificate: Option<PathBuf>) -> Result<RunReport, String> {
    let opts = RunOptions {
        out: out.to_path_buf(),
        format: Format::Report,
        seed: None,
        certificate,
    };
    run_command(cmd, cfg, &opts).map(|o| o.report).map_err(|e| format!("{e:#}"))
}

fn c1_structural() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut kron_err: f64 = 0.0;
    for _ in 0..100 {
        let (p, q, r, s, t, u) = (
            rng.gen_range(1..4),
            rng.gen_range(1..4),
            rng.gen_range(1..4),
            rng.gen_range(1..4),
            rng.gen_range(1..4),
            rng.gen_range(1..4),
        );
        let (a, b) = (random_matrix(&mut rng, p, q), random_matrix(&mut rng, s, t));
        let (c, d) = (random_matrix(&mut rng, q, r), random_matrix(&mut rng, t, u));
        let lhs = kron(&a, &b).matmul(&kron(&c, &d)).unwrap();
        let rhs = kron(&a.matmul(&c).unwrap(), &b.matmul(&d).unwrap());
        kron_err = kron_err.max(max_abs_diff(&lhs, &rhs));
    }
    ensure(kron_err <= 1e-10, || format!("Kronecker mixed product error {kron_err:e}"))?;

    let mut spec_err: f64 = 0.0;
    for _ in 0..50 {
        let agents = rng.gen_range(2..=6);
        let g = random_spanning_digraph(&mut rng, agents);
        let l = g.laplacian();
        let mut sum = Matrix::zeros(agents, agents);
        for lk in g.split_laplacians() {
            sum = &sum + &lk;
        }
        ensure(sum == l, || "sum of edge Laplacians differs from L".into())?;
        let (u, w) = build_u_w(agents).unwrap();
        ensure(u.matmul(&w).unwrap() == Matrix::identity(agents - 1), || "U W is not I".into())?;

        let reduced: Vec<(f64, f64)> = eigenvalues(&reduce_laplacian(&l, &u, &w).unwrap())
            .unwrap()
            .iter()
            .map(|z| (z.re, z.im))
            .collect();
        let mut full: Vec<(f64, f64)> = eigenvalues(&l).unwrap().iter().map(|z| (z.re, z.im)).collect();
        let zero = (0..full.len())
            .min_by(|&i, &j| full[i].0.hypot(full[i].1).total_cmp(&full[j].0.hypot(full[j].1)))
            .unwrap();
        full.remove(zero);
        for z in reduced {
            let (i, d) = full
                .iter()
                .enumerate()
                .map(|(i, w)| (i, (z.0 - w.0).hypot(z.1 - w.1)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            spec_err = spec_err.max(d);
            full.remove(i);
        }
    }
    ensure(spec_err <= 1e-8, || format!("spectrum(U L W) mismatch {spec_err:e}"))?;
    Ok(format!(
        "kron max err {kron_err:.1e} over 100 cases; sum L_k = L and U W = I exact; spectrum err {spec_err:.1e} over 50 digraphs"
    ))
}

fn c2_error_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (h, t_end) = (1e-3, 10.0);
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    let mut used = 0;
    let mut drawn = 0;
    while used < 5 {
        drawn += 1;
        let sys = AgentSystem::new(
            random_matrix(&mut rng, 2, 2),
            random_matrix(&mut rng, 2, 1),
            random_matrix(&mut rng, 1, 2),
            ProtocolSign::Negative,
        )
        .unwrap();
        let g = loop {
            let g = random_spanning_digraph(&mut rng, 3);
            if g.edge_count() == 3 {
                break g;
            }
        };
        let es = assemble_error_system(&sys, &g).unwrap();
        let profiles: Vec<DelayProfile> =
            (0..3).map(|_| DelayProfile::constant(rng.gen_range(0.005..=0.2)).unwrap()).collect();
        let x0: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xs = simulate_x(&sys, &g, &profiles, &x0, &HistorySpec::default(), h, t_end).unwrap();
        let size = xs.states.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        // the absolute bound presumes O(1) trajectories; redraw exploding ones
        if xs.diverged || size > 1e3 {
            continue;
        }
        used += 1;
        peak = peak.max(size);
        let (u, _) = build_u_w(3).unwrap();
        let ui = kron(&u, &Matrix::identity(2));
        let zs = simulate_z(&es, &profiles, &ui.matvec(&x0), &HistorySpec::default(), h, t_end).unwrap();
        for (x, z) in xs.states.iter().zip(&zs.states).skip(xs.start()) {
            for (a, b) in ui.matvec(x).iter().zip(z) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst <= 1e-6, || format!("max |(U x I)x - z| = {worst:e}"))?;
    Ok(format!(
        "max |(U x I)x - z| = {worst:.1e} over [0, 10] on 5 instances ({drawn} drawn, peak |x| {peak:.1})"
    ))
}

fn c3_schur() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (sys, g) = example_system([2.0, -4.0]);
    let es = assemble_error_system(&sys, &g).unwrap();
    let bounds = DelayBounds::new(vec![0.2, 0.12, 0.12], vec![0.7, 0.8, 0.9]).unwrap();
    let p = FeasibilityProblem::new(assemble_full_lmi(&es, &bounds).unwrap(), None).unwrap();
    let res = solve_feasibility(&p, &SolverOptions::default()).unwrap();
    let Status::Feasible(cert) = res.status else {
        return Err(format!("reference instance not feasible: {}", res.diagnostics));
    };
    let layout = VariableLayout::for_system(&es);
    let (mut agree, mut nd) = (0, 0);
    for i in 0..50 {
        let mut v = VariableValues::zeros(&layout);
        for var in layout.variables() {
            let noise = random_spd(&mut rng, layout.n);
            *v.get_mut(&layout, var) = if i % 2 == 0 {
                noise
            } else {
                let scale = 10f64.powf(rng.gen_range(-4.0..0.0));
                cert.values.get(&layout, var).try_add(&noise.scale(scale)).unwrap()
            };
        }
        let full = max_eig_sym(&lmi_matrix(&es, &bounds, &v).unwrap()).unwrap() < 0.0;
        let reduced = max_eig_sym(&schur_reduced(&es, &bounds, &v).unwrap()).unwrap() < 0.0;
        if full == reduced {
            agree += 1;
        }
        nd += usize::from(full);
    }
    ensure(agree == 50, || format!("{agree}/50 assignments agree"))?;
    Ok(format!("50/50 assignments agree ({nd} negative definite, {} not)", 50 - nd))
}

fn cubic_trace(c: &[[f64; 4]], h: f64, len: usize) -> QuadratureTrace {
    let (c1, c2) = (c.to_vec(), c.to_vec());
    QuadratureTrace::sample(
        -((len - 1) as f64) * h,
        h,
        len,
        move |t| c1.iter().map(|c| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t).collect(),
        move |t| c2.iter().map(|c| c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t * t).collect(),
    )
    .unwrap()
}

fn c4_lemmas() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-3;
    let (mut w1, mut w2) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..200 {
        let n = rng.gen_range(1..4);
        let c: Vec<[f64; 4]> = (0..n).map(|_| [0; 4].map(|_| rng.gen_range(-1.0..1.0))).collect();
        let tr = cubic_trace(&c, h, 2001);
        let x = random_spd(&mut rng, n);
        let gamma = rng.gen_range(1..=2000) as f64 * h;
        w1 = w1.min(check_lemma1(&tr, &x, gamma).unwrap());
    }
    for _ in 0..200 {
        let n = rng.gen_range(1..4);
        let c: Vec<[f64; 4]> = (0..n).map(|_| [0; 4].map(|_| rng.gen_range(-1.0..1.0))).collect();
        let tr = cubic_trace(&c, h, 2001);
        let y = random_spd(&mut rng, n);
        let h1 = rng.gen_range(0..1000) as f64 * h;
        let h2 = h1 + rng.gen_range(1..=1000) as f64 * h;
        let tau = rng.gen_range(h1..=h2);
        w2 = w2.min(check_lemma2(&tr, &y, h1, h2, tau).unwrap());
    }
    ensure(w1 >= -1e-8 && w2 >= -1e-8, || format!("worst slack {w1:e} / {w2:e}"))?;
    Ok(format!("worst slack {w1:.2e} (first inequality), {w2:.2e} (second) over 200 traces each"))
}

fn toy(a: f64) -> delay_consensus::ErrorSystem {
    let sys = AgentSystem::new(
        Matrix::from_rows(&[[a]]).unwrap(),
        Matrix::from_rows(&[[1.0]]).unwrap(),
        Matrix::from_rows(&[[1.0]]).unwrap(),
        ProtocolSign::Negative,
    )
    .unwrap();
    assemble_error_system(&sys, &DelayGraph::new(2, vec![Edge::unit(0, 1)]).unwrap()).unwrap()
}

/// Subtracts `10·margin` from the diagonal entry of the weakest variable
/// matrix where its softest eigenvector is largest.
fn mutate(cert: &Certificate, layout: &VariableLayout) -> VariableValues {
    let mut values = cert.values.clone();
    let (var, m) = layout
        .variables()
        .into_iter()
        .map(|v| (v, min_eig_sym(values.get(layout, v)).unwrap()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let eig = delay_consensus::eig_sym(values.get(layout, var)).unwrap();
    let i = (0..layout.n)
        .max_by(|&a, &b| eig.eigenvectors[(a, 0)].abs().total_cmp(&eig.eigenvectors[(b, 0)].abs()))
        .unwrap();
    values.get_mut(layout, var)[(i, i)] -= 10.0 * m;
    values
}

fn c5_certificates() -> Check {
    let mut cases: Vec<(delay_consensus::ErrorSystem, DelayBounds)> = Vec::new();
    for tau in [0.01, 0.1, 0.5, 1.0] {
        cases.push((toy(0.0), DelayBounds::new(vec![tau], vec![0.0]).unwrap()));
        cases.push((toy(-1.0), DelayBounds::new(vec![tau], vec![0.5]).unwrap()));
    }
    let (sys, g) = example_system([2.0, -4.0]);
    for s in [0.05, 0.1, 0.2, 0.25] {
        let es = assemble_error_system(&sys, &g).unwrap();
        cases.push((es, DelayBounds::new(vec![s, 0.62 * s, 0.62 * s], vec![0.7, 0.8, 0.9]).unwrap()));
    }
    let (mut feasible, mut verified, mut caught) = (0, 0, 0);
    for (es, bounds) in &cases {
        let p = FeasibilityProblem::new(assemble_full_lmi(es, bounds).unwrap(), None).unwrap();
        for options in [SolverOptions::default(), delay_consensus::margin::probe_options()] {
            let res = solve_feasibility(&p, &options).unwrap();
            if let Status::Feasible(cert) = res.status {
                feasible += 1;
                verified += usize::from(verify_certificate(&cert, &p).unwrap().passed);
                let bad = Certificate {
                    values: mutate(&cert, &p.map.layout),
                    margins: cert.margins.clone(),
                };
                caught += usize::from(!verify_certificate(&bad, &p).unwrap().passed);
            }
        }
    }
    ensure(feasible > 0 && verified == feasible && caught == feasible, || {
        format!("{verified}/{feasible} verified, {caught}/{feasible} mutations rejected")
    })?;
    Ok(format!("{verified}/{feasible} feasible results verified; {caught}/{feasible} mutated certificates rejected"))
}

fn c6_toy_margin() -> Check {
    let es = toy(0.0);
    // the toy margin shrinks like tau_bar^2 near zero, so start the bracket where it is well resolved
    let q = MarginQuery::scale(vec![1.0], vec![0.0], (0.05, 2.0));
    let bis = bisect_scale(&es, &q).map_err(|e| e.to_string())?;
    let s_bis = bis.scale.unwrap();
    let (s_grid, probes) = grid_scan(&es, &q, 1e-3)
        .map_err(|e| e.to_string())?
        .ok_or("grid scan found no feasible point")?;
    let diff = (s_bis - s_grid).abs();
    ensure(diff <= 2e-3, || format!("bisection {s_bis:.5} vs grid {s_grid:.5}"))?;
    Ok(format!(
        "bisection tau* = {s_bis:.5} ({} probes), grid tau* = {s_grid:.3} ({} probes), |diff| {diff:.1e}",
        bis.probes.len(),
        probes.len()
    ))
}

fn has(report: &RunReport, code: &str) -> bool {
    report.findings.iter().any(|f| f.code == code)
}

fn c7_published_example(out: &Path) -> Check {
    let cfg = load("reference_example.toml");
    let mut notes = Vec::new();
    for cmd in [Command::Validate, Command::Analyze, Command::Margin, Command::Simulate] {
        let r = run(cmd, &cfg, &out.join(format!("{cmd:?}").to_lowercase()), None)?;
        ensure(!r.has_errors(), || format!("{cmd:?} reported errors: {:?}", r.findings))?;
        match cmd {
            Command::Analyze => {
                let f = r.feasibility.as_ref().ok_or("analyze produced no feasibility section")?;
                ensure(f.margin.is_finite(), || "no computed margin".into())?;
                notes.push(format!(
                    "analyze: {} (margin {:.2e}, bound {})",
                    f.status,
                    f.margin,
                    f.upper_bound.map_or("n/a".into(), |b| format!("{b:.2e}"))
                ));
            }
            Command::Margin => {
                let m = r.margin.as_ref().ok_or("margin produced no margin section")?;
                let c = m.reference.as_ref().ok_or("no comparison against the reference bounds")?;
                ensure(c.line.contains("(0.2900, 0.1800, 0.1800)"), || format!("comparison line: {}", c.line))?;
                ensure(has(&r, "gain-not-hurwitz") && has(&r, "unstable-undelayed-mode"), || {
                    "missing inconsistency warnings".into()
                })?;
                notes.push(c.line.clone());
            }
            _ => {}
        }
    }
    Ok(notes.join("; "))
}

/// Ackermann's formula for a single-input pair of size 2 and poles `p1, p2`.
fn place_poles(a: &Matrix, b: &Matrix, p1: f64, p2: f64) -> [f64; 2] {
    let ab = a.matmul(b).unwrap();
    let c = Matrix::from_rows(&[[b[(0, 0)], ab[(0, 0)]], [b[(1, 0)], ab[(1, 0)]]]).unwrap();
    let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
    // last row of C⁻¹
    let last = [-c[(1, 0)] / det, c[(0, 0)] / det];
    let a2 = a.matmul(a).unwrap();
    let phi = &(&a2 + &a.scale(-(p1 + p2))) + &Matrix::identity(2).scale(p1 * p2);
    [
        last[0] * phi[(0, 0)] + last[1] * phi[(1, 0)],
        last[0] * phi[(0, 1)] + last[1] * phi[(1, 1)],
    ]
}

struct Corrected {
    cfg: RunConfig,
    certificate: PathBuf,
}

fn c8_corrected_gain(out: &Path) -> Result<(String, Corrected), String> {
    let mut cfg = load("reference_example.toml");
    let sys = cfg.agent_system().map_err(|e| e.to_string())?;
    let k = place_poles(sys.a(), sys.b(), -1.0, -2.0);
    let sigma = sys.sign().value();
    let g = cfg.delay_graph().map_err(|e| e.to_string())?;
    let (u, w) = build_u_w(3).unwrap();
    let bk = sys.b().matmul(&Matrix::from_rows(&[k]).unwrap()).unwrap();
    for lambda in eigenvalues(&reduce_laplacian(&g.laplacian(), &u, &w).unwrap()).unwrap() {
        let abscissa = spectral_abscissa(&(sys.a() + &bk.scale(sigma * lambda.re))).unwrap();
        ensure(lambda.im == 0.0 && abscissa < 0.0, || {
            format!("A + sigma lambda BK* not Hurwitz at lambda = {lambda}")
        })?;
    }
    cfg.system.k = vec![k.to_vec()];
    cfg.margin.as_mut().unwrap().direction = Some(vec![1.0, 0.18 / 0.29, 0.18 / 0.29]);

    let r = run(Command::Margin, &cfg, &out.join("margin"), None)?;
    let m = r.margin.ok_or("no margin section")?;
    let tau = m.tau_bar_star.ok_or_else(|| format!("margin search certified nothing: {:?}", r.findings))?;
    ensure(tau.iter().all(|t| *t > 0.0), || format!("tau* = {tau:?}"))?;

    cfg.delays.tau_bar = tau.clone();
    let r = run(Command::Analyze, &cfg, &out.join("analyze"), None)?;
    let f = r.feasibility.ok_or("no feasibility section")?;
    ensure(f.status == "feasible" && f.certificate_margins.is_some() && !r.findings.iter().any(|f| f.level == Level::Error), || {
        format!("analyze at {tau:?}: {} ({})", f.status, f.diagnostics)
    })?;
    let certificate = out.join("analyze").join("certificate.json");

    // fastest admissible time-varying delays, peaking at the certified bounds
    cfg.delays.profiles = Some((0..3).map(|k| ProfileSpec::MaxRate { phase: k as f64 }).collect());
    cfg.sim.t_end = 30.0;
    let r = run(Command::Simulate, &cfg, &out.join("simulate"), None)?;
    let s = r.simulation.ok_or("no simulation section")?;
    ensure(!s.diverged && s.final_disagreement <= 1e-3, || {
        format!("disagreement {:.3e} at t = 30", s.final_disagreement)
    })?;
    Ok((
        format!(
            "K* = [{:.3}, {:.3}], tau* = ({:.4}, {:.4}, {:.4}) analyze feasible, disagreement {:.2e} at t = 30",
            k[0], k[1], tau[0], tau[1], tau[2], s.final_disagreement
        ),
        Corrected { cfg, certificate },
    ))
}

fn c9_lyapunov(out: &Path, corrected: Option<&Corrected>) -> Check {
    let c = corrected.ok_or("criterion 8 produced no certificate")?;
    let r = run(Command::Simulate, &c.cfg, &out.join("lyapunov"), Some(c.certificate.clone()))?;
    ensure(!r.has_errors(), || format!("{:?}", r.findings))?;
    let l = r.simulation.and_then(|s| s.lyapunov).ok_or("no Lyapunov series")?;
    ensure(l.nonincreasing && l.max_relative_rise <= 1e-3, || {
        format!("V rises by {:.3e} of its peak", l.max_relative_rise)
    })?;
    Ok(format!("{} rows, max relative rise {:.2e}", l.rows, l.max_relative_rise))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let out = dir.path();
    let mut corrected = None;
    let mut failures = 0;

    let mut report = |id: usize, name: &str, budget: Duration, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.1?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS criterion {id} ({name}, {:.2}s): {detail}", elapsed.as_secs_f64()),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {id} ({name}, {:.2}s): {why}", elapsed.as_secs_f64());
            }
        }
    };

    let secs = Duration::from_secs;
    report(1, "structural oracles", secs(10), &mut c1_structural);
    report(2, "error-system equivalence", secs(30), &mut c2_error_equivalence);
    report(3, "Schur equivalence", secs(30), &mut c3_schur);
    report(4, "integral inequality validators", secs(30), &mut c4_lemmas);
    report(5, "certificate honesty", Duration::MAX, &mut c5_certificates);
    report(6, "scalar toy margin", secs(60), &mut c6_toy_margin);
    report(7, "published example end to end", secs(300), &mut || c7_published_example(&out.join("c7")));
    report(8, "corrected-gain consensus", secs(120), &mut || {
        c8_corrected_gain(&out.join("c8")).map(|(detail, c)| {
            corrected = Some(c);
            detail
        })
    });
    report(9, "Lyapunov diagnostic", secs(120), &mut || c9_lyapunov(&out.join("c9"), corrected.as_ref()));

    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
