//! Experiment drivers: the three-node showcase system, randomized
//! sensitivity sweeps, and the ER/SF summary table.
//!
//! Every random quantity is derived from the base seed plus a position
//! (sweep value index, repetition, stream, item) through [`derive_seed`], so
//! results never depend on scheduling order.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, SindyError};
use crate::graph::{generate_er, generate_sf, save_graph, WeightedGraph};
use crate::library::FeatureLibrary;
use crate::metrics::{cei, complexity, mse, r_squared, timed_fit, MetricsReport};
use crate::oscillator::{random_initial_state, sample_random_params, SlNetwork, SlParams};
use crate::regression::{
    compute_penalty, fit_coefficients, predict_derivs, simulate_model, CoefficientMatrix, Method,
    ModelFile, SolverConfig,
};
use crate::trajectory::{finite_diff_derivs, fmt_f64, Trajectory};

/// Seed streams inside one repetition.
pub mod stream {
    pub const GRAPH: u64 = 1;
    pub const PARAMS: u64 = 2;
    pub const TRAIN_IC: u64 = 3;
    pub const TEST_IC: u64 = 4;
}

/// SplitMix64 over the base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Er,
    Sf,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Er => "er",
            GraphKind::Sf => "sf",
        })
    }
}

impl FromStr for GraphKind {
    type Err = SindyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "er" => Ok(GraphKind::Er),
            "sf" => Ok(GraphKind::Sf),
            other => Err(SindyError::Parameter(format!("unknown graph type {other:?} (er|sf)"))),
        }
    }
}

/// How discovered models are scored on unseen trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMode {
    /// Integrate the discovered model from the test initial condition and
    /// compare its derivatives with the true ones sample by sample.
    Rollout,
    /// Evaluate the discovered model's derivatives on the true test states.
    Pointwise,
}

impl fmt::Display for TestMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMode::Rollout => "rollout",
            TestMode::Pointwise => "pointwise",
        })
    }
}

impl FromStr for TestMode {
    type Err = SindyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rollout" => Ok(TestMode::Rollout),
            "pointwise" => Ok(TestMode::Pointwise),
            other => Err(SindyError::Parameter(format!("unknown test mode {other:?} (rollout|pointwise)"))),
        }
    }
}

/// Everything that determines an experiment's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph_kind: GraphKind,
    pub n_nodes: usize,
    pub edge_prob: f64,
    pub m_attach: usize,
    pub weight_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub omega_range: (f64, f64),
    /// Edge weight of the three-node system.
    pub simple_coupling: f64,
    pub solver: SolverConfig,
    pub degree: u32,
    pub t_end: f64,
    pub test_t_end: f64,
    pub dt: f64,
    pub n_test: usize,
    pub test_mode: TestMode,
    pub reps: usize,
    pub seed: u64,
    /// Estimate training derivatives by finite differences instead of the exact field.
    pub finite_diff: bool,
    /// Worker threads for repetitions; 1 runs serially.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph_kind: GraphKind::Er,
            n_nodes: 5,
            edge_prob: 0.3,
            m_attach: 2,
            weight_range: (0.05, 0.2),
            sigma_range: (0.1, 0.5),
            omega_range: (PI / 2.0, 4.0 * PI),
            simple_coupling: 0.2,
            solver: SolverConfig::default(),
            degree: 3,
            t_end: 20.0,
            test_t_end: 1.0,
            dt: 0.01,
            n_test: 2,
            test_mode: TestMode::Rollout,
            reps: 20,
            seed: 0,
            finite_diff: false,
            threads: 1,
        }
    }
}

/// The three-node system: edge 1–2, σ = 0.2, ω = (π/2, π, 8π).
pub fn simple_case_network(coupling: f64) -> Result<SlNetwork> {
    let a = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., coupling, 0., coupling, 0.]);
    let graph = WeightedGraph::new(a, false)?;
    let params = SlParams::new(vec![0.2; 3], vec![PI / 2.0, PI, 8.0 * PI])?;
    SlNetwork::new(params, graph)
}

/// Fit and scores of one method on one dataset.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub model: CoefficientMatrix,
    pub metrics: MetricsReport,
    /// Per test trajectory; `None` where the discovered model diverged.
    pub test_r2: Vec<Option<f64>>,
    pub test_mse: Vec<Option<f64>>,
    /// Discovered-model trajectory for the first test initial condition.
    pub first_test: Option<Trajectory>,
}

impl MethodResult {
    pub fn test_diverged(&self) -> bool {
        self.test_r2.iter().any(Option::is_none)
    }
}

/// Training data and reference model shared by both methods.
pub struct Dataset {
    pub id: String,
    pub network: SlNetwork,
    pub library: FeatureLibrary,
    pub train: Trajectory,
    pub truth: CoefficientMatrix,
    pub tests: Vec<Trajectory>,
}

impl Dataset {
    /// Simulates training and test data. `seed_path` prefixes the seed streams.
    pub fn generate(
        id: String,
        network: SlNetwork,
        config: &ExperimentConfig,
        seed_path: &[u64],
    ) -> Result<Self> {
        let k = network.n_vars();
        let with = |extra: &[u64]| {
            let mut p = seed_path.to_vec();
            p.extend_from_slice(extra);
            derive_seed(config.seed, &p)
        };
        let x0 = random_initial_state(k, with(&[stream::TRAIN_IC]));
        let mut train = network.simulate(&x0, config.t_end, config.dt)?;
        if config.finite_diff {
            train.derivs = finite_diff_derivs(&train.times, &train.states)?;
        }
        let tests = (0..config.n_test)
            .map(|i| {
                let x0 = random_initial_state(k, with(&[stream::TEST_IC, i as u64]));
                network.simulate(&x0, config.test_t_end, config.dt)
            })
            .collect::<Result<Vec<_>>>()?;
        let library = FeatureLibrary::build(network.svmap(), config.degree)?;
        let truth = network.true_coefficients(&library)?;
        Ok(Self { id, network, library, train, truth, tests })
    }

    pub fn fit(&self, method: Method, solver: &SolverConfig) -> Result<(CoefficientMatrix, f64)> {
        let theta = self.library.evaluate(&self.train.states)?;
        let (xi, secs) = timed_fit(|| -> Result<DMatrix<f64>> {
            match method {
                Method::Sindy => fit_coefficients(&theta, &self.train.derivs, None, solver),
                Method::Sindyg => {
                    let penalty = compute_penalty(&self.library, &self.network.graph, solver)?;
                    fit_coefficients(&theta, &self.train.derivs, Some(&penalty), solver)
                }
            }
        });
        Ok((CoefficientMatrix::new(xi?, self.library.term_names(), self.library.svmap().var_names()), secs))
    }

    /// Fits, then scores on the training data and every test trajectory.
    ///
    /// In rollout mode test scores compare the discovered model's own
    /// trajectory derivatives with the true ones, both started from the same
    /// initial condition. A diverged rollout scores `None`.
    pub fn evaluate(&self, method: Method, solver: &SolverConfig, test_mode: TestMode) -> Result<MethodResult> {
        let (model, secs) = self.fit(method, solver)?;
        let pred = predict_derivs(&model, &self.library, &self.train.states)?;
        let mut test_r2 = Vec::with_capacity(self.tests.len());
        let mut test_mse = Vec::with_capacity(self.tests.len());
        let mut first_test = None;
        for (i, test) in self.tests.iter().enumerate() {
            if test_mode == TestMode::Pointwise {
                let p = predict_derivs(&model, &self.library, &test.states)?;
                test_r2.push(Some(r_squared(&p, &test.derivs)?));
                test_mse.push(Some(mse(&p, &test.derivs)?));
                continue;
            }
            let t_end = *test.times.last().expect("nonempty test trajectory");
            let dt = test.times[1] - test.times[0];
            match simulate_model(&model, &self.library, &test.initial_state(), t_end, dt) {
                Ok(sim) if sim.len() == test.len() => {
                    test_r2.push(Some(r_squared(&sim.derivs, &test.derivs)?));
                    test_mse.push(Some(mse(&sim.derivs, &test.derivs)?));
                    if i == 0 {
                        first_test = Some(sim);
                    }
                }
                Ok(_) | Err(SindyError::Divergence { .. }) => {
                    log::warn!("{}: {method} model diverged on test trajectory {i}", self.id);
                    test_r2.push(None);
                    test_mse.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let mean = |v: &[Option<f64>]| -> Option<f64> {
            let ok: Option<Vec<f64>> = v.iter().copied().collect();
            ok.filter(|o| !o.is_empty()).map(|o| o.iter().sum::<f64>() / o.len() as f64)
        };
        let metrics = MetricsReport {
            dataset_id: self.id.clone(),
            method: method.to_string(),
            gamma: complexity(&model, 0.0),
            cei: Some(cei(&model, &self.truth)?),
            train_r2: r_squared(&pred, &self.train.derivs)?,
            train_mse: mse(&pred, &self.train.derivs)?,
            test_r2: mean(&test_r2),
            test_mse: mean(&test_mse),
            train_time_s: Some(secs),
        };
        Ok(MethodResult { method, model, metrics, test_r2, test_mse, first_test })
    }
}

/// Outputs of the three-node study.
pub struct SimpleCaseReport {
    pub dataset: Dataset,
    pub sindy: MethodResult,
    pub sindyg: MethodResult,
}

pub fn run_simple_case(config: &ExperimentConfig) -> Result<SimpleCaseReport> {
    let network = simple_case_network(config.simple_coupling)?;
    let dataset = Dataset::generate("simple".into(), network, config, &[]).map_err(|e| match e {
        SindyError::Divergence { time } => {
            log::error!(
                "simple case diverged at t = {time} (coupling {}, dt {})",
                config.simple_coupling,
                config.dt
            );
            e
        }
        other => other,
    })?;
    let sindy = dataset.evaluate(Method::Sindy, &config.solver, config.test_mode)?;
    let sindyg = dataset.evaluate(Method::Sindyg, &config.solver, config.test_mode)?;
    Ok(SimpleCaseReport { dataset, sindy, sindyg })
}

impl SimpleCaseReport {
    /// Writes heatmap data, metrics, the trajectory comparison, model JSON
    /// files, and the graph/training data used.
    pub fn write(&self, out_dir: &Path, config: &ExperimentConfig) -> Result<()> {
        fs::create_dir_all(out_dir).map_err(|e| SindyError::io(out_dir, e))?;
        let d = &self.dataset;

        let mut heat = String::from("term,variable,true,sindy,sindyg\n");
        for k in 0..d.truth.n_vars() {
            for j in 0..d.truth.n_terms() {
                heat.push_str(&format!(
                    "{},{},{},{},{}\n",
                    d.truth.term_names[j],
                    d.truth.var_names[k],
                    fmt_f64(d.truth.xi[(j, k)]),
                    fmt_f64(self.sindy.model.xi[(j, k)]),
                    fmt_f64(self.sindyg.model.xi[(j, k)]),
                ));
            }
        }
        write_file(&out_dir.join("coefficients.csv"), &heat)?;

        let mut metrics = format!("{}\n", MetricsReport::CSV_HEADER);
        for r in [&self.sindy, &self.sindyg] {
            metrics.push_str(&r.metrics.csv_row());
            metrics.push('\n');
        }
        write_file(&out_dir.join("metrics.csv"), &metrics)?;

        if let Some(test) = d.tests.first() {
            let names = d.library.svmap().var_names();
            let mut header = vec!["t".to_string()];
            for src in ["true", "sindy", "sindyg"] {
                header.extend(names.iter().map(|n| format!("{src}_{n}")));
            }
            let mut out = header.join(",") + "\n";
            for i in 0..test.len() {
                let mut row = vec![fmt_f64(test.times[i])];
                for src in [Some(test), self.sindy.first_test.as_ref(), self.sindyg.first_test.as_ref()] {
                    for k in 0..names.len() {
                        row.push(src.map_or_else(|| "n/a".to_string(), |s| fmt_f64(s.states[(i, k)])));
                    }
                }
                out.push_str(&row.join(","));
                out.push('\n');
            }
            write_file(&out_dir.join("trajectory_comparison.csv"), &out)?;
        }

        ModelFile::new(&d.truth, &config.solver, Method::Sindy).save(out_dir.join("model_true.json"))?;
        ModelFile::new(&self.sindy.model, &config.solver, Method::Sindy).save(out_dir.join("model_sindy.json"))?;
        ModelFile::new(&self.sindyg.model, &config.solver, Method::Sindyg)
            .save(out_dir.join("model_sindyg.json"))?;
        save_graph(&d.network.graph, out_dir.join("graph.csv"))?;
        d.train.save_csv(out_dir.join("train_states.csv"), out_dir.join("train_derivs.csv"))
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SindyError::io(path, e))
}

/// Parameter varied by a sensitivity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    NNodes,
    MaxEdgeWeight,
    PenaltyL,
    TrainLength,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::NNodes => "n_nodes",
            SweepParam::MaxEdgeWeight => "max_edge_weight",
            SweepParam::PenaltyL => "L",
            SweepParam::TrainLength => "train_length",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = base.clone();
        let bad = || SindyError::Parameter(format!("invalid value {value} for sweep over {}", self.name()));
        match self {
            SweepParam::NNodes => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(bad());
                }
                c.n_nodes = value as usize;
            }
            SweepParam::MaxEdgeWeight => {
                if value < 0.0 {
                    return Err(bad());
                }
                c.weight_range = (c.weight_range.0.min(value), value);
            }
            SweepParam::PenaltyL => {
                if value < 0.0 {
                    return Err(bad());
                }
                c.solver.penalty_l = value;
            }
            SweepParam::TrainLength => {
                if value <= 0.0 {
                    return Err(bad());
                }
                c.t_end = value;
            }
        }
        Ok(c)
    }
}

impl FromStr for SweepParam {
    type Err = SindyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_nodes" => Ok(SweepParam::NNodes),
            "max_edge_weight" => Ok(SweepParam::MaxEdgeWeight),
            "L" | "penalty_L" => Ok(SweepParam::PenaltyL),
            "train_length" => Ok(SweepParam::TrainLength),
            other => Err(SindyError::Parameter(format!(
                "unknown sweep parameter {other:?} (n_nodes|max_edge_weight|L|train_length)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// One method's outcome in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub group: String,
    pub value: f64,
    pub rep: usize,
    /// `None` when the repetition failed for this method.
    pub metrics: Option<MetricsReport>,
    pub method: Method,
    pub failure: Option<String>,
}

impl RunRow {
    pub const CSV_HEADER: &'static str =
        "group,value,rep,status,dataset_id,method,gamma,cei,train_r2,train_mse,test_r2,test_mse,train_time_s";

    pub fn csv_row(&self) -> String {
        let prefix = format!("{},{},{}", self.group, fmt_f64(self.value), self.rep);
        match &self.metrics {
            Some(m) => format!("{prefix},ok,{}", m.csv_row()),
            None => format!(
                "{prefix},failed,{}/rep{},{},n/a,n/a,n/a,n/a,n/a,n/a,n/a",
                self.group, self.rep, self.method
            ),
        }
    }
}

/// Mean and standard error of one metric over the successful repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    /// Sample standard deviation over `√n`; `se` is 0 for a single value and
    /// both are NaN for none.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }
}

pub const AGGREGATE_METRICS: [&str; 7] =
    ["gamma", "cei", "train_r2", "train_mse", "test_r2", "test_mse", "train_time_s"];

/// Aggregates of one (group, value, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub group: String,
    pub value: f64,
    pub method: Method,
    pub n_effective: usize,
    pub n_failed: usize,
    /// In the order of [`AGGREGATE_METRICS`].
    pub stats: Vec<MeanSe>,
}

impl Aggregate {
    pub fn metric(&self, name: &str) -> MeanSe {
        let i = AGGREGATE_METRICS.iter().position(|m| *m == name).expect("known metric");
        self.stats[i]
    }

    pub fn csv_header() -> String {
        let mut h = String::from("group,value,method,n_effective,n_failed");
        for m in AGGREGATE_METRICS {
            h.push_str(&format!(",{m}_mean,{m}_se"));
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = format!(
            "{},{},{},{},{}",
            self.group,
            fmt_f64(self.value),
            self.method,
            self.n_effective,
            self.n_failed
        );
        for s in &self.stats {
            row.push_str(&format!(",{},{}", fmt_f64(s.mean), fmt_f64(s.se)));
        }
        row
    }
}

fn metric_value(m: &MetricsReport, name: &str) -> f64 {
    match name {
        "gamma" => m.gamma as f64,
        "cei" => m.cei.unwrap_or(f64::NAN),
        "train_r2" => m.train_r2,
        "train_mse" => m.train_mse,
        "test_r2" => m.test_r2.unwrap_or(f64::NAN),
        "test_mse" => m.test_mse.unwrap_or(f64::NAN),
        "train_time_s" => m.train_time_s.unwrap_or(f64::NAN),
        _ => unreachable!("unknown metric {name}"),
    }
}

/// Groups rows by (group, value, method) in first-seen order.
pub fn aggregate(rows: &[RunRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, u64, Method)> = Vec::new();
    for r in rows {
        let key = (r.group.clone(), r.value.to_bits(), r.method);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(group, bits, method)| {
            let cell: Vec<&RunRow> = rows
                .iter()
                .filter(|r| r.group == group && r.value.to_bits() == bits && r.method == method)
                .collect();
            let ok: Vec<&MetricsReport> = cell.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let stats = AGGREGATE_METRICS
                .iter()
                .map(|name| MeanSe::of(&ok.iter().map(|m| metric_value(m, name)).collect::<Vec<_>>()))
                .collect();
            Aggregate {
                group,
                value: f64::from_bits(bits),
                method,
                n_effective: ok.len(),
                n_failed: cell.len() - ok.len(),
                stats,
            }
        })
        .collect()
}

/// One randomized repetition: graph, dynamics, data, both fits.
pub fn run_repetition(config: &ExperimentConfig, group: &str, value: f64, seed_path: &[u64]) -> Vec<RunRow> {
    let rep = *seed_path.last().unwrap_or(&0) as usize;
    let fail = |method: Method, why: String| RunRow {
        group: group.to_string(),
        value,
        rep,
        metrics: None,
        method,
        failure: Some(why),
    };
    let with = |s: u64| {
        let mut p = seed_path.to_vec();
        p.push(s);
        derive_seed(config.seed, &p)
    };
    let id = format!("{group}/rep{rep}");
    let dataset = (|| -> Result<Dataset> {
        let graph = match config.graph_kind {
            GraphKind::Er => generate_er(config.n_nodes, config.edge_prob, config.weight_range, with(stream::GRAPH))?,
            GraphKind::Sf => generate_sf(config.n_nodes, config.m_attach, config.weight_range, with(stream::GRAPH))?,
        };
        let params = sample_random_params(config.n_nodes, config.sigma_range, config.omega_range, with(stream::PARAMS))?;
        Dataset::generate(id.clone(), SlNetwork::new(params, graph)?, config, seed_path)
    })();
    let dataset = match dataset {
        Ok(d) => d,
        Err(e) => {
            log::warn!("{id}: data generation failed: {e}");
            return vec![fail(Method::Sindy, e.to_string()), fail(Method::Sindyg, e.to_string())];
        }
    };
    [Method::Sindy, Method::Sindyg]
        .into_iter()
        .map(|method| match dataset.evaluate(method, &config.solver, config.test_mode) {
            Ok(r) if r.metrics.gamma == 0 => fail(method, "empty support".into()),
            Ok(r) if r.test_diverged() => fail(method, "discovered model diverged on a test trajectory".into()),
            Ok(r) => RunRow {
                group: group.to_string(),
                value,
                rep,
                metrics: Some(r.metrics),
                method,
                failure: None,
            },
            Err(e) => {
                log::warn!("{id}: {method} failed: {e}");
                fail(method, e.to_string())
            }
        })
        .collect()
}

fn run_reps(config: &ExperimentConfig, group: &str, value: f64, prefix: &[u64]) -> Result<Vec<RunRow>> {
    let job = |rep: usize| {
        let mut path = prefix.to_vec();
        path.push(rep as u64);
        run_repetition(config, group, value, &path)
    };
    let rows: Vec<Vec<RunRow>> = if config.threads <= 1 {
        (0..config.reps).map(job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| SindyError::Parameter(format!("thread pool: {e}")))?;
        pool.install(|| (0..config.reps).into_par_iter().map(job).collect())
    };
    Ok(rows.into_iter().flatten().collect())
}

/// Per-run rows and per-value aggregates of a sweep or table.
pub struct EnsembleReport {
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<Aggregate>,
}

impl EnsembleReport {
    pub fn runs_csv(&self) -> String {
        let mut s = format!("{}\n", RunRow::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn aggregates_csv(&self) -> String {
        let mut s = Aggregate::csv_header() + "\n";
        for a in &self.aggregates {
            s.push_str(&a.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn find(&self, group: &str, method: Method) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.group == group && a.method == method)
    }
}

pub fn run_general_sweep(config: &ExperimentConfig, sweep: &SweepSpec) -> Result<EnsembleReport> {
    if sweep.values.is_empty() {
        return Err(SindyError::Parameter("sweep needs at least one value".into()));
    }
    let mut rows = Vec::new();
    for (vi, &value) in sweep.values.iter().enumerate() {
        let cfg = sweep.param.apply(config, value)?;
        let group = format!("{}={}", sweep.param.name(), value);
        rows.extend(run_reps(&cfg, &group, value, &[vi as u64])?);
    }
    let aggregates = aggregate(&rows);
    Ok(EnsembleReport { rows, aggregates })
}

/// ER and SF ensembles at the configured size (5 nodes by default).
pub fn run_table1(config: &ExperimentConfig) -> Result<EnsembleReport> {
    let mut rows = Vec::new();
    for (gi, kind) in [GraphKind::Er, GraphKind::Sf].into_iter().enumerate() {
        let cfg = ExperimentConfig { graph_kind: kind, ..config.clone() };
        rows.extend(run_reps(&cfg, &kind.to_string(), config.n_nodes as f64, &[100 + gi as u64])?);
    }
    let aggregates = aggregate(&rows);
    Ok(EnsembleReport { rows, aggregates })
}

/// Table layout: one row per metric, `mean ± se` per graph type and method.
pub fn table1_csv(report: &EnsembleReport) -> String {
    let cols = [
        ("er", Method::Sindy),
        ("er", Method::Sindyg),
        ("sf", Method::Sindy),
        ("sf", Method::Sindyg),
    ];
    let mut s = String::from("metric");
    for (g, m) in cols {
        s.push_str(&format!(",{g}_{m}"));
    }
    s.push('\n');
    let mut lines: Vec<(String, Vec<String>)> = vec![("n_effective".into(), vec![])];
    for m in AGGREGATE_METRICS {
        lines.push((m.to_string(), vec![]));
    }
    for (g, method) in cols {
        let agg = report.find(g, method);
        lines[0].1.push(agg.map_or("0".into(), |a| a.n_effective.to_string()));
        for (i, m) in AGGREGATE_METRICS.iter().enumerate() {
            lines[i + 1].1.push(agg.map_or("n/a".into(), |a| {
                let st = a.metric(m);
                format!("{:.6} ± {:.6}", st.mean, st.se)
            }));
        }
    }
    for (name, cells) in lines {
        s.push_str(&name);
        for c in cells {
            s.push(',');
            s.push_str(&c);
        }
        s.push('\n');
    }
    s
}

impl EnsembleReport {
    pub fn write(&self, out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out_dir).map_err(|e| SindyError::io(out_dir, e))?;
        let runs = out_dir.join(format!("{stem}_runs.csv"));
        let agg = out_dir.join(format!("{stem}_aggregate.csv"));
        write_file(&runs, &self.runs_csv())?;
        write_file(&agg, &self.aggregates_csv())?;
        Ok(vec![runs, agg])
    }
}

pub fn write_table1(report: &EnsembleReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = report.write(out_dir, "table1")?;
    let table = out_dir.join("table1.csv");
    write_file(&table, &table1_csv(report))?;
    files.push(table);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_index() {
        let a = derive_seed(7, &[0, 1]);
        assert_eq!(a, derive_seed(7, &[0, 1]));
        assert_ne!(a, derive_seed(7, &[1, 0]));
        assert_ne!(a, derive_seed(8, &[0, 1]));
        assert_ne!(derive_seed(7, &[]), derive_seed(7, &[0]));
    }

    #[test]
    fn mean_se() {
        let s = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanSe::of(&[3.0]).se, 0.0);
        assert!(MeanSe::of(&[]).mean.is_nan());
    }

    #[test]
    fn sweep_application() {
        let base = ExperimentConfig::default();
        assert_eq!(SweepParam::NNodes.apply(&base, 7.0).unwrap().n_nodes, 7);
        assert!(SweepParam::NNodes.apply(&base, 2.5).is_err());
        assert_eq!(SweepParam::MaxEdgeWeight.apply(&base, 0.5).unwrap().weight_range, (0.05, 0.5));
        assert_eq!(SweepParam::MaxEdgeWeight.apply(&base, 0.01).unwrap().weight_range, (0.01, 0.01));
        assert_eq!(SweepParam::TrainLength.apply(&base, 5.0).unwrap().t_end, 5.0);
        assert_eq!("L".parse::<SweepParam>().unwrap(), SweepParam::PenaltyL);
        assert!("bogus".parse::<SweepParam>().is_err());
    }

    #[test]
    fn simple_network_true_model_has_32_terms() {
        let net = simple_case_network(0.2).unwrap();
        let lib = FeatureLibrary::build(net.svmap(), 3).unwrap();
        assert_eq!(net.true_coefficients(&lib).unwrap().nonzeros(), 32);
    }

    #[test]
    fn failed_rows_are_excluded_from_aggregates() {
        let ok = |rep, gamma| RunRow {
            group: "g".into(),
            value: 1.0,
            rep,
            method: Method::Sindy,
            failure: None,
            metrics: Some(MetricsReport {
                dataset_id: "d".into(),
                method: "sindy".into(),
                gamma,
                cei: Some(0.1),
                train_r2: 1.0,
                train_mse: 0.0,
                test_r2: Some(0.9),
                test_mse: Some(0.1),
                train_time_s: Some(0.01),
            }),
        };
        let failed = RunRow { metrics: None, failure: Some("x".into()), ..ok(2, 0) };
        let aggs = aggregate(&[ok(0, 10), ok(1, 20), failed.clone()]);
        assert_eq!(aggs.len(), 1);
        assert_eq!((aggs[0].n_effective, aggs[0].n_failed), (2, 1));
        assert_eq!(aggs[0].metric("gamma").mean, 15.0);
        assert!(failed.csv_row().contains(",failed,"));
    }
}
