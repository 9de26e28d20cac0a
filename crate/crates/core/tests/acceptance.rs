//! Acceptance checks, one printed line per criterion.
//!
//! Training criteria run at the desk preset unless `PVD_ACCEPTANCE=full`.
//! Failed criteria are reported; they only fail the process when
//! `PVD_ACCEPTANCE_STRICT=1`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pvd_core::autodiff::Jet2;
use pvd_core::config::{ExperimentConfig, Method, Preset};
use pvd_core::eval::{relative_l2, ErrorReport, EvalGrid};
use pvd_core::gradcheck::run_suite;
use pvd_core::linalg::Matrix;
use pvd_core::nn::{jet_input, Mlp, Surrogate};
use pvd_core::persist::WeightBundle;
use pvd_core::problem::{analytic_solution_constant, BoundaryLayerProblem, ConstantCaseOracle, ProblemKind};
use pvd_core::pvd_net::loss::{INNER1, INNER_C};
use pvd_core::pvd_net::{composite_values, point_nets, CompositeOptions, InnerExtension, Order};
use pvd_core::reference::fdm_solve;
use pvd_core::runner::{self, Trained};

struct Suite {
    preset: Preset,
    failed: usize,
}

impl Suite {
    fn tag(&self) -> &'static str {
        match self.preset {
            Preset::Desk => "desk",
            Preset::Full => "full",
        }
    }

    fn record(&mut self, id: &str, pass: bool, detail: impl AsRef<str>) {
        self.failed += usize::from(!pass);
        println!("criterion {id:<3} [{}] {}  {}", self.tag(), if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    }

    /// Training criteria relax their thresholds by this factor at desk scale.
    fn relax(&self) -> f64 {
        match self.preset {
            Preset::Desk => 3.0,
            Preset::Full => 1.0,
        }
    }
}

struct Run {
    seed: u64,
    trained: Trained,
    report: ErrorReport,
    cfg: ExperimentConfig,
    elapsed: Duration,
}

fn config(method: Method, kind: ProblemKind, preset: Preset, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_method(method);
    cfg.problem.kind = kind;
    cfg.apply_preset(preset);
    cfg.training.seed = seed;
    cfg
}

fn train(cfg: ExperimentConfig) -> Result<Run, String> {
    eprintln!("  training {} on {} (seed {}, {} iterations)", cfg.method, cfg.problem.kind.key(), cfg.training.seed, cfg.training.iterations);
    let start = Instant::now();
    let trained = runner::train_from_config(&cfg).map_err(|e| e.to_string())?;
    let (report, _) = runner::evaluate(&cfg, &trained).map_err(|e| e.to_string())?;
    Ok(Run { seed: cfg.training.seed, trained, report, cfg, elapsed: start.elapsed() })
}

fn point_model(run: &Run) -> &pvd_core::pvd_net::TrainedModel {
    match &run.trained {
        Trained::Point(m) => m,
        Trained::Operator { .. } => unreachable!("point-wise method"),
    }
}

fn gradient_oracle(s: &mut Suite) {
    let start = Instant::now();
    match run_suite(50, 0) {
        Ok(results) => {
            let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
            let secs = start.elapsed().as_secs_f64();
            let pass = worst <= 1e-5 && secs < 30.0;
            s.record("1", pass, format!("worst rel. gradient error {worst:.2e} <= 1e-5 over 50 cases x {} variants, {secs:.1} s < 30 s", results.len()));
        }
        Err(e) => s.record("1", false, format!("gradient suite failed: {e}")),
    }
}

fn value(net: &Mlp, s: f64) -> f64 {
    net.forward_jet(Jet2::constant(s)).unwrap().v
}

fn jet_oracle(s: &mut Suite) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let widths = Mlp::scalar_widths(rng.random_range(1..=4), rng.random_range(2..=24));
        let net = Mlp::glorot(&widths, case).unwrap();
        let x = rng.random_range(-2.0..2.0);
        // fourth-order central stencils
        let h = 1e-2;
        let f: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|k| value(&net, x + k * h)).collect();
        let fd1 = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
        let fd2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
        let single = net.forward_jet(Jet2::variable(x)).unwrap();
        let batch = net.forward_batch(jet_input(&[x], 3), 3).unwrap().into_output();
        for (d1, d2) in [(single.d1, single.d2), (batch.get(1, 0), batch.get(2, 0))] {
            worst = worst.max((d1 - fd1).abs() / fd1.abs().max(1e-6));
            worst = worst.max((d2 - fd2).abs() / fd2.abs().max(1e-6));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    s.record("2", worst <= 1e-4 && secs < 10.0, format!("worst rel. jet error {worst:.2e} <= 1e-4 on 100 nets, {secs:.2} s < 10 s"));
}

fn fdm_error(p: &BoundaryLayerProblem, n: usize) -> f64 {
    let sol = fdm_solve(p, n).unwrap();
    let truth: Vec<f64> = sol.nodes().iter().map(|&x| analytic_solution_constant(p.eps, p.alpha, p.beta, x).unwrap()).collect();
    relative_l2(sol.values(), &truth).unwrap()
}

fn reference_validation(s: &mut Suite) {
    let start = Instant::now();
    let p = BoundaryLayerProblem::standard(ProblemKind::Constant);
    let (e4, e8) = (fdm_error(&p, 4096), fdm_error(&p, 8192));
    let secs = start.elapsed().as_secs_f64();
    s.record("3", e4 <= 1e-4 && e8 < e4 && secs < 10.0, format!("fdm rel. L2 {e4:.2e} (N=4096) > {e8:.2e} (N=8192), {secs:.2} s"));
}

fn asymptotic_oracle(s: &mut Suite) {
    let p = BoundaryLayerProblem::standard(ProblemKind::Constant);
    let o = ConstantCaseOracle::from_problem(&p);
    let grid = EvalGrid::new(&p);
    let sup = grid
        .points
        .iter()
        .map(|&x| (o.leading_composite(x) - analytic_solution_constant(p.eps, p.alpha, p.beta, x).unwrap()).abs())
        .fold(0.0, f64::max);
    s.record("4", sup <= 1e-2 && grid.len() == 10_101, format!("leading oracle sup error {sup:.2e} <= 1e-2 on {} points", grid.len()));
}

fn set_all(net: &mut Surrogate, f: impl Fn(usize, usize) -> Option<f64>) {
    let Surrogate::Point(m) = net else { unreachable!() };
    let n = m.params().len();
    for (i, v) in m.params_mut().iter_mut().enumerate() {
        if let Some(x) = f(i, n) {
            *v = x;
        }
    }
}

fn exact_identities(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let kind = if case % 2 == 0 { ProblemKind::Constant } else { ProblemKind::Variable };
        let eps = 10f64.powf(rng.random_range(-4.0..-2.0));
        let p = BoundaryLayerProblem::new(kind, eps, rng.random_range(0.4..1.4), rng.random_range(1.5..2.5), 20.0).unwrap();
        let sensors = Matrix::from_vec(1, 2, vec![p.alpha, p.beta]).unwrap();
        let xs: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).chain([0.0, p.junction(), 1.0]).collect();
        for x in &xs {
            worst = worst.max((p.unstretch(p.stretch(*x)) - x).abs());
        }
        for ext in [InnerExtension::Clamp, InnerExtension::Extrapolate] {
            let opts = CompositeOptions { inner_extension: ext, ..Default::default() };
            let nets = point_nets(Order::High, 2, 8, case).unwrap();
            let base = composite_values(Order::High, &p, &nets, &sensors, &xs, opts).unwrap().remove(0);

            let delta = rng.random_range(-3.0..3.0);
            let mut shifted = nets.clone();
            let Surrogate::Point(m) = &mut shifted[INNER_C] else { unreachable!() };
            *m.params_mut().last_mut().unwrap() += delta;
            let moved = composite_values(Order::High, &p, &shifted, &sensors, &xs, opts).unwrap().remove(0);
            worst = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);

            let mut no_c = nets.clone();
            set_all(&mut no_c[INNER_C], |_, _| Some(0.0));
            let at0 = composite_values(Order::High, &p, &nets, &sensors, &[p.x0], opts).unwrap()[0][0];
            let at0_no_c = composite_values(Order::High, &p, &no_c, &sensors, &[p.x0], opts).unwrap()[0][0];
            worst = worst.max((at0 - at0_no_c).abs());

            let c = rng.random_range(-4.0..4.0);
            let mut constant = nets[..2].to_vec();
            for n in &mut constant {
                set_all(n, |i, len| Some(if i + 1 == len { c } else { 0.0 }));
            }
            let lead = composite_values(Order::Leading, &p, &constant, &sensors, &xs, opts).unwrap().remove(0);
            worst = lead.iter().map(|v| (v - c).abs()).fold(worst, f64::max);
        }
    }
    s.record("12", worst <= 1e-12, format!("largest identity defect {worst:.2e} <= 1e-12 over 50 random problems"));
}

fn persistence(s: &mut Suite) {
    let nets = point_nets(Order::High, 5, 40, 9).unwrap();
    let bundle = WeightBundle::from_surrogates(Method::PvdNetHigh.key(), &nets);
    let bytes = bundle.to_bytes();
    let back = WeightBundle::from_bytes(&bytes).unwrap();
    let bit_exact = back == bundle && back.to_bytes() == bytes && back.to_surrogates(false).unwrap() == nets;

    let tmp = tempfile::tempdir().unwrap();
    let mut identical = true;
    for method in [Method::PvdNetHigh, Method::PvdOnetLeading] {
        let mut cfg = ExperimentConfig::for_method(method);
        cfg.problem.kind = ProblemKind::Variable;
        cfg.training.iterations = 20;
        cfg.family.n_train = 10;
        cfg.family.n_test = 4;
        let mut reports = Vec::new();
        for name in ["a", "b"] {
            let dir = tmp.path().join(format!("{method}-{name}"));
            runner::run(&cfg, &dir).unwrap();
            reports.push(std::fs::read(dir.join("report.csv")).unwrap());
        }
        identical &= reports[0] == reports[1];
    }
    s.record("13", bit_exact && identical, format!("bundle round trip bit-exact: {bit_exact}; same-seed report CSVs identical: {identical}"));
}

/// Seeds 0, 1, 2 in turn until one meets `threshold`; every attempted run is kept.
fn until_success(method: Method, kind: ProblemKind, preset: Preset, threshold: f64) -> Vec<Result<Run, String>> {
    let mut runs = Vec::new();
    for seed in 0..3 {
        let run = train(config(method, kind, preset, seed));
        let ok = matches!(&run, Ok(r) if r.report.summary.global_rel_l2 <= threshold);
        runs.push(run);
        if ok {
            break;
        }
    }
    runs
}

fn describe(runs: &[Result<Run, String>]) -> String {
    runs.iter()
        .enumerate()
        .map(|(seed, r)| match r {
            Ok(r) => format!("seed {} {:.2e} ({:.0} s)", r.seed, r.report.summary.global_rel_l2, r.elapsed.as_secs_f64()),
            Err(e) => format!("seed {seed} failed: {e}"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn successful(runs: &[Result<Run, String>], threshold: f64) -> Option<&Run> {
    runs.iter().flatten().find(|r| r.report.summary.global_rel_l2 <= threshold)
}

fn matched_seed_zero(runs: &[Result<Run, String>]) -> Option<&Run> {
    runs.first().and_then(|r| r.as_ref().ok())
}

fn table_two(s: &mut Suite) {
    let preset = s.preset;
    let cases = [
        ("5a", Method::PvdNetLeading, ProblemKind::Constant, 5e-3),
        ("5b", Method::PvdNetHigh, ProblemKind::Constant, 1e-3),
        ("5c", Method::PvdNetHigh, ProblemKind::Variable, 1e-2),
    ];
    let mut all = Vec::new();
    for (id, method, kind, base) in cases {
        let threshold = base * s.relax();
        let runs = until_success(method, kind, preset, threshold);
        let pass = successful(&runs, threshold).is_some();
        s.record(id, pass, format!("{method} {} global rel. L2 <= {threshold:.1e}: {}", kind.key(), describe(&runs)));
        all.push((runs, threshold));
    }
    if preset == Preset::Desk {
        let slowest = all.iter().flat_map(|(r, _)| r.iter().flatten()).map(|r| r.elapsed.as_secs_f64()).fold(0.0, f64::max);
        s.record("5t", slowest <= 300.0, format!("slowest desk run {slowest:.0} s <= 300 s"));
    }

    let (lead, high, var) = (&all[0], &all[1], &all[2]);

    match (matched_seed_zero(&lead.0), matched_seed_zero(&high.0)) {
        (Some(l), Some(h)) => {
            let (ll, hl) = (l.report.summary.global_linf, h.report.summary.global_linf);
            s.record("6", hl < ll, format!("seed 0 global L-inf high {hl:.2e} < leading {ll:.2e}"));
        }
        _ => s.record("6", false, "seed-0 constant runs did not finish"),
    }

    let lead_run = successful(&lead.0, lead.1).or_else(|| matched_seed_zero(&lead.0));
    match lead_run {
        Some(l) => {
            let mut bl = l.cfg.clone();
            bl.method = Method::BlPinns;
            match runner::evaluate(&bl, &l.trained) {
                Ok((piecewise, _)) => {
                    let (c, p) = (l.report.summary.junction_abs, piecewise.summary.junction_abs);
                    s.record("7", c < p, format!("junction error composite {c:.2e} < piecewise {p:.2e} (seed {})", l.seed));
                }
                Err(e) => s.record("7", false, format!("piecewise evaluation failed: {e}")),
            }
            let best = l.trained.best().expect("trained run has a best checkpoint");
            let m = best.parts.matching;
            s.record("8a", m <= 1e-4, format!("leading matching loss {m:.2e} <= 1e-4 at iteration {}", best.iteration));
        }
        None => {
            s.record("7", false, "no leading run finished");
            s.record("8a", false, "no leading run finished");
        }
    }

    for (id, (runs, threshold)) in [("8b", high), ("8c", var)] {
        match successful(runs, *threshold).or_else(|| matched_seed_zero(runs)) {
            Some(r) => {
                let best = r.trained.best().expect("best checkpoint");
                let t = best.parts.matching_terms;
                let pass = t.iter().all(|v| *v <= 1e-3);
                s.record(
                    id,
                    pass,
                    format!("{} Van Dyke terms {:.2e} {:.2e} {:.2e} <= 1e-3 at iteration {}", r.cfg.problem.kind.key(), t[0], t[1], t[2], best.iteration),
                );
            }
            None => s.record(id, false, "no high-order run finished"),
        }
    }

    match successful(&high.0, high.1).or_else(|| matched_seed_zero(&high.0)) {
        Some(r) => {
            let m = point_model(r);
            let xi0 = m.problem.xi0;
            let (tc, t1) = ConstantCaseOracle::from_problem(&m.problem).van_dyke_targets();
            let (c, one) = (m.net_value(INNER_C, xi0).unwrap(), m.net_value(INNER1, xi0).unwrap());
            let (ec, e1) = ((c - tc).abs() / tc.abs(), (one - t1).abs() / t1.abs());
            s.record(
                "9",
                ec <= 0.1 && e1 <= 0.1,
                format!("psi_c(xi0) {c:.4} vs {tc:.4} ({:.1}%), psi_1(xi0) {one:.4} vs {t1:.4} ({:.1}%), within 10%", 100.0 * ec, 100.0 * e1),
            );
        }
        None => s.record("9", false, "no high-order constant run finished"),
    }
}

fn operator_config(method: Method, preset: Preset) -> ExperimentConfig {
    let mut cfg = config(method, ProblemKind::Constant, preset, 0);
    if preset == Preset::Desk {
        cfg.training.iterations = 30_000;
    }
    cfg
}

fn mean_rel_l2(method: Method, preset: Preset) -> Result<f64, String> {
    train(operator_config(method, preset)).map(|r| r.report.summary.global_rel_l2)
}

fn operator_comparison(s: &mut Suite) {
    let preset = s.preset;
    let pi = mean_rel_l2(Method::PiDeepOnet, preset);
    let lead = mean_rel_l2(Method::PvdOnetLeading, preset);
    let (pass, mut detail) = match (&pi, &lead) {
        (Ok(pi), Ok(lead)) => {
            let bound = if preset == Preset::Desk { 2e-2 } else { 10.0 * 1.01e-3 };
            (*pi >= 0.1 && *lead <= bound, format!("PI-DeepONet {pi:.2e} >= 0.1, leading PVD-ONet {lead:.2e} <= {bound:.2e}"))
        }
        _ => (false, format!("training failed: {:?} / {:?}", pi.as_ref().err(), lead.as_ref().err())),
    };
    let mut pass = pass;
    if preset == Preset::Full {
        match mean_rel_l2(Method::PvdOnetHigh, preset) {
            Ok(high) => {
                pass &= high <= 10.0 * 1.5e-4;
                detail.push_str(&format!(", high PVD-ONet {high:.2e} <= 1.5e-3"));
            }
            Err(e) => {
                pass = false;
                detail.push_str(&format!(", high PVD-ONet failed: {e}"));
            }
        }
    }
    s.record("10", pass, detail);
}

fn data_driven(s: &mut Suite) {
    match train(config(Method::DataDriven, ProblemKind::Constant, s.preset, 0)) {
        Ok(r) => {
            let linf = r.report.summary.global_linf;
            s.record("11", linf <= 1e-3, format!("mean test L-inf {linf:.2e} <= 1e-3 ({} iterations)", r.cfg.training.iterations));
        }
        Err(e) => s.record("11", false, format!("training failed: {e}")),
    }
}

fn main() -> ExitCode {
    let preset = match std::env::var("PVD_ACCEPTANCE").as_deref() {
        Ok("full") => Preset::Full,
        _ => Preset::Desk,
    };
    let mut s = Suite { preset, failed: 0 };
    gradient_oracle(&mut s);
    jet_oracle(&mut s);
    reference_validation(&mut s);
    asymptotic_oracle(&mut s);
    exact_identities(&mut s);
    persistence(&mut s);
    table_two(&mut s);
    operator_comparison(&mut s);
    data_driven(&mut s);
    if s.failed == 0 {
        println!("acceptance: all criteria passed");
        return ExitCode::SUCCESS;
    }
    println!("acceptance: {} criteria failed", s.failed);
    if std::env::var("PVD_ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
