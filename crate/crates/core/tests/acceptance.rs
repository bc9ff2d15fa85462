//! Acceptance checks. Prints one PASS/FAIL line per check and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_matrix, recovery_case};
use sindyg::experiment::{run_simple_case, run_table1, ExperimentConfig};
use sindyg::{
    cei, complexity, compute_penalty, generate_er, generate_sf, integrate_rk4_strided, mse,
    penalized_ridge_solve, penalty_value, r_squared, stlsq, stlsq_graph, CoefficientMatrix,
    FeatureLibrary, Method, ModelFile, SlNetwork, SlParams, SolverConfig, StateVariableMap,
    WeightedGraph,
};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn simple_case_structure() -> Outcome {
    let start = Instant::now();
    let r = run_simple_case(&ExperimentConfig::default()).expect("simple case runs");
    let secs = start.elapsed().as_secs_f64();
    let (s, g) = (&r.sindy.metrics, &r.sindyg.metrics);
    let support = r.sindyg.model.support() == r.dataset.truth.support();
    let (cs, cg) = (s.cei.unwrap(), g.cei.unwrap());
    let pass = g.gamma == 32
        && support
        && cg <= 0.01
        && s.gamma >= g.gamma
        && cs >= cg
        && s.train_r2 >= 0.9999
        && g.train_r2 >= 0.9999
        && secs < 30.0;
    outcome(
        pass,
        format!(
            "gamma sindyg {} (support match {support}) sindy {}; CEI sindyg {cg:.2e} sindy {cs:.2e}; \
             train R2 {:.8} / {:.8}; {secs:.1} s",
            g.gamma, s.gamma, g.train_r2, s.train_r2
        ),
    )
}

fn simple_case_generalization() -> Outcome {
    let cfg = ExperimentConfig { n_test: 5, ..Default::default() };
    let r = run_simple_case(&cfg).expect("simple case runs");
    let mut pass = r.sindyg.test_r2.len() == 5;
    let mut parts = Vec::new();
    for (g, s) in r.sindyg.test_r2.iter().zip(&r.sindy.test_r2) {
        let ok = match (g, s) {
            (Some(g), Some(s)) => *g >= 0.999 && g >= s,
            (Some(g), None) => *g >= 0.999,
            (None, _) => false,
        };
        pass &= ok;
        let show = |v: &Option<f64>| v.map_or("diverged".to_string(), |v| format!("{v:.6}"));
        parts.push(format!("{}/{}", show(g), show(s)));
    }
    outcome(pass, format!("test R2 sindyg/sindy: {}", parts.join(", ")))
}

/// Random regression problem over a real library so the penalty comes
/// from an actual graph.
fn random_problem(seed: u64) -> (DMatrix<f64>, DMatrix<f64>, FeatureLibrary, WeightedGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lib = FeatureLibrary::build(StateVariableMap::planar(2).unwrap(), 2).unwrap();
    let x = random_matrix(120, 4, &mut rng);
    let theta = lib.evaluate(&x).unwrap();
    let xi = DMatrix::from_fn(lib.n_terms(), 4, |_, _| {
        if rng.gen_bool(0.3) {
            rng.gen_range(0.2..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            0.0
        }
    });
    let noise = random_matrix(120, 4, &mut rng) * 0.05;
    let xdot = &theta * xi + noise;
    let graph = generate_er(2, 0.8, (0.1, 1.0), seed).unwrap();
    (theta, xdot, lib, graph)
}

fn constant_penalty_reduction() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (theta, xdot, lib, graph) = random_problem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let cfg = SolverConfig {
            lambda: rng.gen_range(1e-3..1.0),
            eta: rng.gen_range(0.01..0.3),
            penalty_l: 0.0,
            ..Default::default()
        };
        let penalty = compute_penalty(&lib, &graph, &cfg).unwrap();
        let graph_fit = stlsq_graph(&theta, &xdot, &penalty, &cfg).unwrap();
        let reduced = SolverConfig { lambda: 0.25 * cfg.lambda, eta: 2.0 * cfg.eta, ..cfg };
        let plain = stlsq(&theta, &xdot, &reduced).unwrap();
        worst = worst.max((graph_fit - plain).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 10.0, format!("max deviation {worst:.2e} over 20 datasets; {secs:.2} s"))
}

fn penalized_ridge_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, c) = (60, 9);
        let theta = random_matrix(t, c, &mut rng);
        let target = DVector::from_fn(t, |_, _| rng.gen_range(-2.0..2.0));
        let f = DVector::from_fn(c, |_, _| rng.gen_range(0.05..1.0));
        let lambda = rng.gen_range(0.01..2.0);
        let support: Vec<bool> = (0..c).map(|j| j == 0 || rng.gen_bool(0.7)).collect();
        let got = penalized_ridge_solve(&theta, &target, lambda, &f, &support).unwrap();

        let idx: Vec<usize> = (0..c).filter(|&j| support[j]).collect();
        let sub = theta.select_columns(&idx);
        let mut lhs = sub.transpose() * &sub;
        for (a, &j) in idx.iter().enumerate() {
            lhs[(a, a)] += lambda * f[j] * f[j];
        }
        let rhs = sub.transpose() * &target;
        let direct = lhs.lu().solve(&rhs).unwrap();
        for j in 0..c {
            let want = idx.iter().position(|&i| i == j).map_or(0.0, |a| direct[a]);
            worst = worst.max((got[j] - want).abs());
        }
    }
    outcome(worst <= 1e-8, format!("max deviation from modified normal equations {worst:.2e}"))
}

fn exact_recovery() -> Outcome {
    let (mut worst_s, mut worst_g) = (0.0f64, 0.0f64);
    for seed in 0..20 {
        let case = recovery_case(seed);
        let base = SolverConfig { lambda: 1e-8, ..Default::default() };
        let plain = SolverConfig { eta: case.smallest_true(None) / 2.0, ..base };
        let xi = stlsq(&case.theta, &case.xdot, &plain).unwrap();
        worst_s = worst_s.max((xi - &case.truth.xi).amax());
        let penalty = case.penalty(&base);
        let graph_cfg = SolverConfig { eta: case.smallest_true(Some(&penalty)) / 2.0, ..base };
        let xig = stlsq_graph(&case.theta, &case.xdot, &penalty, &graph_cfg).unwrap();
        worst_g = worst_g.max((xig - &case.truth.xi).amax());
    }
    outcome(
        worst_s <= 1e-5 && worst_g <= 1e-5,
        format!("max coefficient error over 20 systems: sindy {worst_s:.2e}, sindyg {worst_g:.2e}"),
    )
}

fn integrator_order() -> Outcome {
    let (sigma, omega) = (0.3, 2.0);
    let net = SlNetwork::new(SlParams::uniform(1, sigma, omega), WeightedGraph::empty(1).unwrap()).unwrap();
    let x0 = [0.9, -0.4];
    let t_end = 2.0;
    let end = |dt: f64, stride: usize| {
        let traj = integrate_rk4_strided(|x, d| net.rhs(x, d), &x0, t_end, dt, stride, net.svmap()).unwrap();
        assert!((traj.times.last().unwrap() - t_end).abs() < 1e-9);
        traj.final_state()
    };
    let reference = end(1e-5, 200_000);
    let err = |dt: f64| {
        let e = end(dt, 1);
        (e[0] - reference[0]).hypot(e[1] - reference[1])
    };
    let ratio = err(0.01) / err(0.005);
    let long = net.simulate(&x0, 60.0, 0.01).unwrap().final_state();
    let radius_err = (long[0].hypot(long[1]) - sigma.sqrt()).abs();
    outcome(
        (12.0..=20.0).contains(&ratio) && radius_err <= 1e-3,
        format!("error ratio dt 0.01 -> 0.005 = {ratio:.3}; long-run radius error {radius_err:.2e}"),
    )
}

fn penalty_function() -> Outcome {
    let mut pass = true;
    for l in [0.0, 0.5, 1.0, 4.0, 20.0, 100.0] {
        for s in 1..4 {
            pass &= penalty_value(0.5, s, l) == 0.5;
        }
    }
    let exact = 1.0 / (1.0 + 10f64.exp());
    let at_one = (penalty_value(1.0, 1, 20.0) - exact).abs();
    pass &= at_one <= 1e-12;
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let mut monotone = true;
    let mut sharpening = true;
    for s in 1..4 {
        for l in [0.5, 2.0, 4.0, 20.0] {
            monotone &= grid.windows(2).all(|w| penalty_value(w[1], s, l) < penalty_value(w[0], s, l));
        }
        for &m in grid.iter().filter(|m| (**m - 0.5).abs() > 1e-9) {
            let step = if m < 0.5 { 1.0 } else { 0.0 };
            let ls = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 20.0, 40.0];
            sharpening &= ls.windows(2).all(|w| {
                (penalty_value(m, s, w[0]) - step).abs() >= (penalty_value(m, s, w[1]) - step).abs()
            });
        }
    }
    pass &= monotone && sharpening;
    outcome(
        pass,
        format!("f(1, L=20, |S|=1) off by {at_one:.1e}; monotone in m {monotone}; sharpens with L {sharpening}"),
    )
}

fn ensemble_directions() -> Outcome {
    let start = Instant::now();
    let report = run_table1(&ExperimentConfig::default()).expect("table runs");
    let secs = start.elapsed().as_secs_f64();
    let mut pass = secs < 600.0;
    let mut parts = Vec::new();
    for group in ["er", "sf"] {
        let s = report.find(group, Method::Sindy).unwrap();
        let g = report.find(group, Method::Sindyg).unwrap();
        // positive margin means sindyg is better
        let margin = |name: &str, lower_is_better: bool| {
            let (a, b) = (s.metric(name), g.metric(name));
            let diff = if lower_is_better { a.mean - b.mean } else { b.mean - a.mean };
            diff / (a.se.powi(2) + b.se.powi(2)).sqrt()
        };
        let (mc, mg, mr) = (margin("cei", true), margin("gamma", true), margin("test_r2", false));
        pass &= mc > 1.0 && mg > 1.0 && mr > 1.0;
        parts.push(format!(
            "{group}: n {}/{} CEI {:.4}/{:.4} ({mc:.1} SE), gamma {:.1}/{:.1} ({mg:.1} SE), test R2 {:.3}/{:.3} ({mr:.1} SE)",
            g.n_effective,
            s.n_effective,
            g.metric("cei").mean,
            s.metric("cei").mean,
            g.metric("gamma").mean,
            s.metric("gamma").mean,
            g.metric("test_r2").mean,
            s.metric("test_r2").mean,
        ));
    }
    outcome(pass, format!("sindyg/sindy {}; {secs:.0} s", parts.join("; ")))
}

fn metrics_examples() -> Outcome {
    let a = CoefficientMatrix::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -0.5, 2.0]),
        vec!["1".into(), "x0".into()],
        vec!["x0".into(), "y0".into()],
    );
    let zero = CoefficientMatrix::new(DMatrix::zeros(2, 2), a.term_names.clone(), a.var_names.clone());
    let obs = DMatrix::from_row_slice(4, 2, &[0.1, 1.0, 0.4, -2.0, -0.3, 0.5, 0.9, 0.0]);
    let checks = [
        cei(&a, &a).unwrap() == 0.0,
        r_squared(&obs, &obs).unwrap() == 1.0,
        (mse(&obs.add_scalar(0.1), &obs).unwrap() - 0.01).abs() < 1e-15,
        complexity(&zero, 0.0) == 0,
    ];
    outcome(checks.iter().all(|c| *c), format!("cei, r2, mse, gamma examples: {checks:?}"))
}

fn files_in(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect()
}

/// Drops the trailing wall-clock column of a metrics file.
fn strip_timing(text: &str) -> String {
    text.lines().map(|l| l.rsplit_once(',').map_or(l, |(a, _)| a)).collect::<Vec<_>>().join("\n")
}

fn determinism_and_roundtrips() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { seed: 3, ..Default::default() };
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        run_simple_case(&cfg).unwrap().write(&dir, &cfg).unwrap();
        let mut files = files_in(&dir);
        let metrics = files.get_mut("metrics.csv").unwrap();
        *metrics = strip_timing(metrics);
        outputs.push(files);
    }
    let simple_same = outputs[0] == outputs[1] && outputs[0].len() >= 9;

    let small = ExperimentConfig { reps: 3, n_nodes: 4, ..Default::default() };
    let serial = run_table1(&small).unwrap();
    let parallel = run_table1(&ExperimentConfig { threads: 2, ..small }).unwrap();
    let runs = |r: &sindyg::experiment::EnsembleReport| strip_timing(&r.runs_csv());
    let table_same = runs(&serial) == runs(&parallel);

    let mut graphs_ok = true;
    for seed in 0..20 {
        for g in [generate_er(6, 0.5, (0.01, 0.7), seed).unwrap(), generate_sf(7, 2, (0.3, 1.9), seed).unwrap()] {
            let back = WeightedGraph::from_csv_str(&g.to_csv_string(), Path::new("graph.csv")).unwrap();
            graphs_ok &= back == g;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lib = FeatureLibrary::build(StateVariableMap::planar(2).unwrap(), 3).unwrap();
    let xi = DMatrix::from_fn(lib.n_terms(), 4, |_, _| rng.gen_range(-1.0..1.0) / 3.0);
    let model = CoefficientMatrix::new(xi, lib.term_names(), lib.svmap().var_names());
    let file = ModelFile::new(&model, &SolverConfig::default(), Method::Sindyg);
    let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
    let json_ok = back == file && back.coefficients().unwrap() == model;

    outcome(
        simple_same && table_same && graphs_ok && json_ok,
        format!(
            "simple outputs identical {simple_same}; serial == parallel {table_same}; \
             graph CSV round-trip {graphs_ok}; model JSON round-trip {json_ok}"
        ),
    )
}

fn main() {
    let checks: [Check; 10] = [
        ("simple-case structural recovery", simple_case_structure),
        ("simple-case test trajectories", simple_case_generalization),
        ("constant-penalty reduction", constant_penalty_reduction),
        ("penalized ridge oracle", penalized_ridge_oracle),
        ("exact recovery", exact_recovery),
        ("integrator order", integrator_order),
        ("penalty function", penalty_function),
        ("ensemble directions", ensemble_directions),
        ("metrics examples", metrics_examples),
        ("determinism and round-trips", determinism_and_roundtrips),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let r = check();
        let tag = if r.pass { "PASS" } else { "FAIL" };
        println!("[{:>2}] {tag} {name}: {}", i + 1, r.detail);
        failed += usize::from(!r.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
