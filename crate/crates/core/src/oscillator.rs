//! Coupled Stuart–Landau oscillator networks and a fixed-step RK4 integrator.
//!
//! Each node carries a complex state `z = x + iy` stored as two consecutive
//! real variables `(x, y)`. With `k_nm = A[m][n]` (weight of edge `m -> n`):
//!
//! ```text
//! dx_n = σ x − ω y − (x² + y²) x + Σ_m k_nm (x_n x_m − y_n y_m)
//! dy_n = ω x + σ y − (x² + y²) y + Σ_m k_nm (x_n y_m + y_n x_m)
//! ```

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SindyError};
use crate::graph::{StateVariableMap, WeightedGraph};
use crate::library::FeatureLibrary;
use crate::regression::CoefficientMatrix;
use crate::trajectory::Trajectory;

/// Integration aborts once any state magnitude exceeds this bound.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Per-node growth rates and angular frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SlParams {
    pub sigma: Vec<f64>,
    pub omega: Vec<f64>,
}

impl SlParams {
    pub fn new(sigma: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if sigma.len() != omega.len() || sigma.is_empty() {
            return Err(SindyError::Dimension(format!(
                "need one (sigma, omega) pair per node, got {} sigmas and {} omegas",
                sigma.len(),
                omega.len()
            )));
        }
        Ok(Self { sigma, omega })
    }

    pub fn uniform(n_nodes: usize, sigma: f64, omega: f64) -> Self {
        Self { sigma: vec![sigma; n_nodes], omega: vec![omega; n_nodes] }
    }

    pub fn n_nodes(&self) -> usize {
        self.sigma.len()
    }
}

/// A Stuart–Landau network: node parameters plus coupling graph.
#[derive(Debug, Clone)]
pub struct SlNetwork {
    pub params: SlParams,
    pub graph: WeightedGraph,
    svmap: StateVariableMap,
}

impl SlNetwork {
    pub fn new(params: SlParams, graph: WeightedGraph) -> Result<Self> {
        if params.n_nodes() != graph.n_nodes() {
            return Err(SindyError::Dimension(format!(
                "{} oscillator parameter sets for a {}-node graph",
                params.n_nodes(),
                graph.n_nodes()
            )));
        }
        let svmap = StateVariableMap::planar(graph.n_nodes())?;
        Ok(Self { params, graph, svmap })
    }

    pub fn svmap(&self) -> StateVariableMap {
        self.svmap
    }

    pub fn n_vars(&self) -> usize {
        self.svmap.n_vars()
    }

    /// Right-hand side; `state` and `out` have length `2 * n_nodes`.
    pub fn rhs(&self, state: &[f64], out: &mut [f64]) {
        let n = self.graph.n_nodes();
        let adj = self.graph.adjacency();
        for node in 0..n {
            let (x, y) = (state[2 * node], state[2 * node + 1]);
            let (s, w) = (self.params.sigma[node], self.params.omega[node]);
            let r2 = x * x + y * y;
            let mut dx = s * x - w * y - r2 * x;
            let mut dy = w * x + s * y - r2 * y;
            for m in 0..n {
                let k = adj[(m, node)];
                if k != 0.0 {
                    let (xm, ym) = (state[2 * m], state[2 * m + 1]);
                    dx += k * (x * xm - y * ym);
                    dy += k * (x * ym + y * xm);
                }
            }
            out[2 * node] = dx;
            out[2 * node + 1] = dy;
        }
    }

    /// Checked variant of [`SlNetwork::rhs`] returning a fresh vector.
    pub fn sl_rhs(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.n_vars() {
            return Err(SindyError::Dimension(format!(
                "state has length {}, network expects {}",
                state.len(),
                self.n_vars()
            )));
        }
        let mut out = vec![0.0; state.len()];
        self.rhs(state, &mut out);
        Ok(out)
    }

    pub fn simulate(&self, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
        if x0.len() != self.n_vars() {
            return Err(SindyError::Dimension(format!(
                "initial state has length {}, network expects {}",
                x0.len(),
                self.n_vars()
            )));
        }
        integrate_rk4(|x, dx| self.rhs(x, dx), x0, t_end, dt, self.svmap)
    }

    /// The network's exact coefficient matrix in the basis of `library`.
    pub fn true_coefficients(&self, library: &FeatureLibrary) -> Result<CoefficientMatrix> {
        true_coefficients(&self.params, &self.graph, library)
    }
}

/// Evaluates the network right-hand side at `state`.
pub fn sl_rhs(state: &[f64], params: &SlParams, graph: &WeightedGraph) -> Result<Vec<f64>> {
    SlNetwork::new(params.clone(), graph.clone())?.sl_rhs(state)
}

/// Classical fixed-step RK4 from `t = 0` to `t_end`, keeping every step.
///
/// Derivatives are the exact field evaluated at each saved state.
pub fn integrate_rk4<F>(
    rhs: F,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    svmap: StateVariableMap,
) -> Result<Trajectory>
where
    F: FnMut(&[f64], &mut [f64]),
{
    integrate_rk4_strided(rhs, x0, t_end, dt, 1, svmap)
}

/// Like [`integrate_rk4`] but only saves every `stride`-th step (plus `t = 0`).
pub fn integrate_rk4_strided<F>(
    mut rhs: F,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    stride: usize,
    svmap: StateVariableMap,
) -> Result<Trajectory>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(dt > 0.0) || !(t_end > 0.0) || stride == 0 {
        return Err(SindyError::Parameter(format!(
            "integration needs dt > 0, t_end > 0 and stride >= 1 (dt = {dt}, t_end = {t_end})"
        )));
    }
    let k = x0.len();
    if k != svmap.n_vars() {
        return Err(SindyError::Dimension(format!(
            "initial state has length {k}, state map expects {}",
            svmap.n_vars()
        )));
    }
    let n_steps = (t_end / dt).round() as usize;
    if n_steps == 0 {
        return Err(SindyError::Parameter(format!("t_end = {t_end} is shorter than one step dt = {dt}")));
    }
    let n_saved = n_steps / stride + 1;
    let mut times = Vec::with_capacity(n_saved);
    let mut states = Vec::with_capacity(n_saved * k);
    let mut derivs = Vec::with_capacity(n_saved * k);

    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut tmp = vec![0.0; k];
    check_finite(&x, 0.0)?;
    rhs(&x, &mut k1);
    times.push(0.0);
    states.extend_from_slice(&x);
    derivs.extend_from_slice(&k1);

    for step in 1..=n_steps {
        // k1 holds f(x) at the start of every step
        for i in 0..k {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..k {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..k {
            tmp[i] = x[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..k {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * dt;
        check_finite(&x, t)?;
        rhs(&x, &mut k1);
        if step % stride == 0 {
            times.push(t);
            states.extend_from_slice(&x);
            derivs.extend_from_slice(&k1);
        }
    }
    let rows = times.len();
    Trajectory::new(
        times,
        DMatrix::from_row_slice(rows, k, &states),
        DMatrix::from_row_slice(rows, k, &derivs),
        svmap,
    )
}

fn check_finite(x: &[f64], t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(SindyError::Divergence { time: t })
    }
}

/// Exact coefficients of the Stuart–Landau network in the library's basis.
pub fn true_coefficients(
    params: &SlParams,
    graph: &WeightedGraph,
    library: &FeatureLibrary,
) -> Result<CoefficientMatrix> {
    let svmap = *library.svmap();
    let n = graph.n_nodes();
    if params.n_nodes() != n || svmap.n_nodes() != n || svmap.vars_per_node() != 2 {
        return Err(SindyError::Dimension(format!(
            "library state map ({} nodes x {}) does not match a {n}-node oscillator network",
            svmap.n_nodes(),
            svmap.vars_per_node()
        )));
    }
    let k = svmap.n_vars();
    let mut xi = DMatrix::zeros(library.n_terms(), k);
    let mut add = |powers: &[(usize, u32)], eq: usize, coef: f64| -> Result<()> {
        let mut exps = vec![0u32; k];
        for &(v, p) in powers {
            exps[v] += p;
        }
        let j = library.position(&exps).ok_or_else(|| {
            let names: Vec<String> =
                powers.iter().map(|&(v, p)| format!("{}^{}", svmap.var_name(v), p)).collect();
            SindyError::Unrepresentable(names.join(" "))
        })?;
        xi[(j, eq)] += coef;
        Ok(())
    };
    for node in 0..n {
        let (x, y) = (2 * node, 2 * node + 1);
        let (s, w) = (params.sigma[node], params.omega[node]);
        add(&[(x, 1)], x, s)?;
        add(&[(y, 1)], x, -w)?;
        add(&[(x, 3)], x, -1.0)?;
        add(&[(x, 1), (y, 2)], x, -1.0)?;
        add(&[(x, 1)], y, w)?;
        add(&[(y, 1)], y, s)?;
        add(&[(x, 2), (y, 1)], y, -1.0)?;
        add(&[(y, 3)], y, -1.0)?;
        for m in 0..n {
            let kc = graph.weight(m, node);
            if kc == 0.0 {
                continue;
            }
            let (xm, ym) = (2 * m, 2 * m + 1);
            add(&[(x, 1), (xm, 1)], x, kc)?;
            add(&[(y, 1), (ym, 1)], x, -kc)?;
            add(&[(x, 1), (ym, 1)], y, kc)?;
            add(&[(y, 1), (xm, 1)], y, kc)?;
        }
    }
    Ok(CoefficientMatrix::new(xi, library.term_names(), svmap.var_names()))
}

/// Uniform per-node draws; each node draws sigma then omega.
pub fn sample_random_params(
    n_nodes: usize,
    sigma_range: (f64, f64),
    omega_range: (f64, f64),
    seed: u64,
) -> Result<SlParams> {
    for (name, (lo, hi)) in [("sigma", sigma_range), ("omega", omega_range)] {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(SindyError::Parameter(format!("empty {name} range ({lo}, {hi})")));
        }
    }
    if n_nodes == 0 {
        return Err(SindyError::Parameter("n_nodes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sigma = Vec::with_capacity(n_nodes);
    let mut omega = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        sigma.push(sigma_range.0 + (sigma_range.1 - sigma_range.0) * rng.gen::<f64>());
        omega.push(omega_range.0 + (omega_range.1 - omega_range.0) * rng.gen::<f64>());
    }
    SlParams::new(sigma, omega)
}

/// Initial state with every variable uniform in `[-1, 1]`.
pub fn random_initial_state(n_vars: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_vars).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}
