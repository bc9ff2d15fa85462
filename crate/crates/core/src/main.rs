use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sindyg::experiment::{
    derive_seed, run_general_sweep, run_simple_case, run_table1, simple_case_network, stream,
    table1_csv, write_table1, ExperimentConfig, SweepSpec,
};
use sindyg::{
    cei, compute_penalty, complexity, fit_coefficients, load_graph, mse, predict_derivs,
    r_squared, random_initial_state, sample_random_params, save_graph, CoefficientMatrix,
    FeatureLibrary, Method, MetricsReport, ModelFile, SindyError, SlNetwork, SlParams, Trajectory,
};

#[derive(Parser)]
#[command(name = "sindyg", version, about = "Sparse identification of graph-structured dynamics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Each one can also be given in the
/// `--config` file as `key = value` using the long flag name.
#[derive(Args)]
struct Common {
    /// Flat `key = value` settings file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Ridge strength
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Sparsity threshold
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Penalty sharpness
    #[arg(long = "penalty-L", global = true)]
    penalty_l: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Polynomial library degree
    #[arg(long, global = true)]
    degree: Option<u32>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Training (or simulated) trajectory length
    #[arg(long, global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    test_t_end: Option<f64>,
    /// Test trajectories per dataset
    #[arg(long, global = true)]
    n_test: Option<usize>,
    /// rollout | pointwise
    #[arg(long, global = true)]
    test_mode: Option<String>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Graph CSV
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// sindy | sindyg
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    normalize_columns: bool,
    /// er | sf
    #[arg(long, global = true)]
    graph_type: Option<String>,
    #[arg(long, global = true)]
    n_nodes: Option<usize>,
    #[arg(long, global = true)]
    edge_prob: Option<f64>,
    #[arg(long, global = true)]
    m_attach: Option<usize>,
    #[arg(long, global = true)]
    weight_min: Option<f64>,
    #[arg(long, global = true)]
    weight_max: Option<f64>,
    /// Edge weight of the three-node system
    #[arg(long, global = true)]
    coupling: Option<f64>,
    /// Estimate training derivatives by finite differences
    #[arg(long, global = true)]
    finite_diff: bool,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an oscillator network and write its trajectory
    Simulate {
        /// Per-node growth rates (comma separated)
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
        /// Per-node angular frequencies (comma separated)
        #[arg(long, value_delimiter = ',')]
        omega: Option<Vec<f64>>,
        /// Initial state (comma separated); random by default
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Fit a sparse model to a trajectory
    Fit {
        #[arg(long)]
        states: PathBuf,
        /// Derivative CSV; finite differences are used without it
        #[arg(long)]
        derivs: Option<PathBuf>,
        /// Model JSON path (default: <out-dir>/model_<method>.json)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a fitted model on a trajectory
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        states: PathBuf,
        #[arg(long)]
        derivs: Option<PathBuf>,
        /// Reference model JSON for the coefficient error
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run one of the bundled studies
    #[command(subcommand)]
    Experiment(Study),
}

#[derive(Subcommand)]
enum Study {
    /// Three-node system
    Simple,
    /// Vary one parameter over random graphs
    Sweep {
        /// n_nodes | max_edge_weight | L | train_length
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// ER and SF summary table
    Table1,
}

enum CliError {
    Usage(String),
    Run(SindyError),
}

impl From<SindyError> for CliError {
    fn from(e: SindyError) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

struct Settings {
    exp: ExperimentConfig,
    out_dir: PathBuf,
    graph: Option<PathBuf>,
    method: Method,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            exp: ExperimentConfig::default(),
            out_dir: PathBuf::from("out"),
            graph: None,
            method: Method::Sindyg,
        }
    }
}

impl Settings {
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(format!("invalid value {v:?} for {key} (true|false)")),
            }
        }
        let e = &mut self.exp;
        match key.replace('_', "-").as_str() {
            "seed" => e.seed = num(key, value)?,
            "out-dir" => self.out_dir = PathBuf::from(value),
            "lambda" => e.solver.lambda = num(key, value)?,
            "eta" => e.solver.eta = num(key, value)?,
            "penalty-L" | "L" => e.solver.penalty_l = num(key, value)?,
            "max-iters" => e.solver.max_iters = num(key, value)?,
            "degree" => e.degree = num(key, value)?,
            "dt" => e.dt = num(key, value)?,
            "t-end" => e.t_end = num(key, value)?,
            "test-t-end" => e.test_t_end = num(key, value)?,
            "n-test" => e.n_test = num(key, value)?,
            "test-mode" => e.test_mode = value.parse().map_err(|err: SindyError| err.to_string())?,
            "reps" => e.reps = num(key, value)?,
            "graph" => self.graph = Some(PathBuf::from(value)),
            "method" => self.method = value.parse().map_err(|err: SindyError| err.to_string())?,
            "normalize-columns" => e.solver.normalize_columns = flag(key, value)?,
            "graph-type" => e.graph_kind = value.parse().map_err(|err: SindyError| err.to_string())?,
            "n-nodes" => e.n_nodes = num(key, value)?,
            "edge-prob" => e.edge_prob = num(key, value)?,
            "m-attach" => e.m_attach = num(key, value)?,
            "weight-min" => e.weight_range.0 = num(key, value)?,
            "weight-max" => e.weight_range.1 = num(key, value)?,
            "sigma-min" => e.sigma_range.0 = num(key, value)?,
            "sigma-max" => e.sigma_range.1 = num(key, value)?,
            "omega-min" => e.omega_range.0 = num(key, value)?,
            "omega-max" => e.omega_range.1 = num(key, value)?,
            "coupling" => e.simple_coupling = num(key, value)?,
            "finite-diff" => e.finite_diff = flag(key, value)?,
            "threads" => e.threads = num(key, value)?,
            _ => return Err(format!("unknown setting {key:?}")),
        }
        Ok(())
    }

    fn load(common: &Common) -> CliResult<Self> {
        let mut s = Settings::default();
        if let Some(path) = &common.config {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Run(SindyError::Io { path: path.clone(), source: e })
            })?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1))
                })?;
                s.set(k.trim(), v.trim())
                    .map_err(|m| CliError::Usage(format!("{}:{}: {m}", path.display(), i + 1)))?;
            }
        }
        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k, v));
            }
        };
        let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        push("seed", common.seed.map(|v| v.to_string()));
        push("out-dir", show(&common.out_dir));
        push("lambda", common.lambda.map(|v| v.to_string()));
        push("eta", common.eta.map(|v| v.to_string()));
        push("penalty-L", common.penalty_l.map(|v| v.to_string()));
        push("max-iters", common.max_iters.map(|v| v.to_string()));
        push("degree", common.degree.map(|v| v.to_string()));
        push("dt", common.dt.map(|v| v.to_string()));
        push("t-end", common.t_end.map(|v| v.to_string()));
        push("test-t-end", common.test_t_end.map(|v| v.to_string()));
        push("n-test", common.n_test.map(|v| v.to_string()));
        push("test-mode", common.test_mode.clone());
        push("reps", common.reps.map(|v| v.to_string()));
        push("graph", show(&common.graph));
        push("method", common.method.clone());
        push("normalize-columns", common.normalize_columns.then(|| "true".into()));
        push("graph-type", common.graph_type.clone());
        push("n-nodes", common.n_nodes.map(|v| v.to_string()));
        push("edge-prob", common.edge_prob.map(|v| v.to_string()));
        push("m-attach", common.m_attach.map(|v| v.to_string()));
        push("weight-min", common.weight_min.map(|v| v.to_string()));
        push("weight-max", common.weight_max.map(|v| v.to_string()));
        push("coupling", common.coupling.map(|v| v.to_string()));
        push("finite-diff", common.finite_diff.then(|| "true".into()));
        push("threads", common.threads.map(|v| v.to_string()));
        for (k, v) in flags {
            s.set(k, &v).map_err(CliError::Usage)?;
        }
        s.exp.solver.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(s)
    }
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Run(SindyError::Io { path: dir.to_path_buf(), source: e }))
}

fn simulate(
    s: &Settings,
    sigma: Option<Vec<f64>>,
    omega: Option<Vec<f64>>,
    x0: Option<Vec<f64>>,
) -> CliResult<()> {
    let e = &s.exp;
    let network = match &s.graph {
        None if sigma.is_none() && omega.is_none() => simple_case_network(e.simple_coupling)?,
        None => return Err(CliError::Usage("--sigma/--omega need a --graph".into())),
        Some(path) => {
            let graph = load_graph(path)?;
            let n = graph.n_nodes();
            let params = match (sigma, omega) {
                (Some(sg), Some(om)) => SlParams::new(sg, om).map_err(|e| CliError::Usage(e.to_string()))?,
                (None, None) => sample_random_params(
                    n,
                    e.sigma_range,
                    e.omega_range,
                    derive_seed(e.seed, &[stream::PARAMS]),
                )?,
                _ => return Err(CliError::Usage("give both --sigma and --omega, or neither".into())),
            };
            SlNetwork::new(params, graph).map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    let k = network.n_vars();
    let x0 = match x0 {
        Some(v) if v.len() != k => {
            return Err(CliError::Usage(format!("--x0 needs {k} values, got {}", v.len())))
        }
        Some(v) => v,
        None => random_initial_state(k, derive_seed(e.seed, &[stream::TRAIN_IC])),
    };
    let traj = network.simulate(&x0, e.t_end, e.dt)?;
    ensure_dir(&s.out_dir)?;
    traj.save_csv(s.out_dir.join("states.csv"), s.out_dir.join("derivs.csv"))?;
    save_graph(&network.graph, s.out_dir.join("graph.csv"))?;
    let library = FeatureLibrary::build(network.svmap(), e.degree)?;
    let truth = network.true_coefficients(&library)?;
    ModelFile::new(&truth, &e.solver, Method::Sindy).save(s.out_dir.join("model_true.json"))?;
    println!("wrote {} samples of {k} variables to {}", traj.len(), s.out_dir.display());
    Ok(())
}

fn fit(s: &Settings, states: &Path, derivs: Option<&Path>, output: Option<PathBuf>) -> CliResult<()> {
    let graph = match (s.method, &s.graph) {
        (Method::Sindyg, None) => {
            return Err(CliError::Usage("method sindyg needs a graph file (--graph)".into()))
        }
        (_, Some(p)) => Some(load_graph(p)?),
        (Method::Sindy, None) => None,
    };
    let traj = Trajectory::load_csv(states, derivs)?;
    let library = FeatureLibrary::build(traj.svmap, s.exp.degree)?;
    let theta = library.evaluate(&traj.states)?;
    let xi = match (s.method, &graph) {
        (Method::Sindyg, Some(g)) => {
            let penalty = compute_penalty(&library, g, &s.exp.solver)?;
            fit_coefficients(&theta, &traj.derivs, Some(&penalty), &s.exp.solver)?
        }
        _ => fit_coefficients(&theta, &traj.derivs, None, &s.exp.solver)?,
    };
    let model = CoefficientMatrix::new(xi, library.term_names(), library.svmap().var_names());
    let path = output.unwrap_or_else(|| s.out_dir.join(format!("model_{}.json", s.method)));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    ModelFile::new(&model, &s.exp.solver, s.method).save(&path)?;
    for eq in model.equations(6) {
        println!("{eq}");
    }
    log::info!("{} nonzero coefficients written to {}", model.nonzeros(), path.display());
    Ok(())
}

fn score(s: &Settings, model: &Path, states: &Path, derivs: Option<&Path>, truth: Option<&Path>) -> CliResult<()> {
    let file = ModelFile::load(model)?;
    let coefs = file.coefficients()?;
    let traj = Trajectory::load_csv(states, derivs)?;
    let degree = file_degree(&coefs)?;
    let library = FeatureLibrary::build(traj.svmap, degree)?;
    coefs.check_library(&library)?;
    let pred = predict_derivs(&coefs, &library, &traj.states)?;
    let cei_value = match truth {
        Some(p) => Some(cei(&coefs, &ModelFile::load(p)?.coefficients()?)?),
        None => None,
    };
    let report = MetricsReport {
        dataset_id: states.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned()),
        method: file.method.to_string(),
        gamma: complexity(&coefs, 0.0),
        cei: cei_value,
        train_r2: r_squared(&pred, &traj.derivs)?,
        train_mse: mse(&pred, &traj.derivs)?,
        test_r2: None,
        test_mse: None,
        train_time_s: None,
    };
    let text = format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row());
    ensure_dir(&s.out_dir)?;
    let out = s.out_dir.join("score.csv");
    fs::write(&out, &text).map_err(|e| CliError::Run(SindyError::Io { path: out.clone(), source: e }))?;
    print!("{text}");
    Ok(())
}

/// Library degree implied by a model's term names.
fn file_degree(model: &CoefficientMatrix) -> CliResult<u32> {
    let mut degree = 0;
    for name in &model.term_names {
        if name == "1" {
            continue;
        }
        let mut d = 0u32;
        for factor in name.split(' ') {
            d += match factor.split_once('^') {
                Some((_, p)) => p.parse::<u32>().map_err(|_| {
                    CliError::Run(SindyError::Parameter(format!("unrecognised term name {name:?}")))
                })?,
                None => 1,
            };
        }
        degree = degree.max(d);
    }
    Ok(degree)
}

fn experiment(s: &Settings, study: Study) -> CliResult<()> {
    match study {
        Study::Simple => {
            let report = run_simple_case(&s.exp)?;
            report.write(&s.out_dir, &s.exp)?;
            println!("{}", MetricsReport::CSV_HEADER);
            for r in [&report.sindy, &report.sindyg] {
                println!("{}", r.metrics.csv_row());
            }
        }
        Study::Sweep { param, values } => {
            let param = param.parse().map_err(|e: SindyError| CliError::Usage(e.to_string()))?;
            let spec = SweepSpec { param, values };
            let report = run_general_sweep(&s.exp, &spec)?;
            report.write(&s.out_dir, &format!("sweep_{}", spec.param.name()))?;
            print!("{}", report.aggregates_csv());
        }
        Study::Table1 => {
            let report = run_table1(&s.exp)?;
            write_table1(&report, &s.out_dir)?;
            print!("{}", table1_csv(&report));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let settings = Settings::load(&cli.common)?;
    match cli.command {
        Command::Simulate { sigma, omega, x0 } => simulate(&settings, sigma, omega, x0),
        Command::Fit { states, derivs, output } => fit(&settings, &states, derivs.as_deref(), output),
        Command::Score { model, states, derivs, truth } => {
            score(&settings, &model, &states, derivs.as_deref(), truth.as_deref())
        }
        Command::Experiment(study) => experiment(&settings, study),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
