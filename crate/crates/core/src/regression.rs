//! Sparse regression: sequentially thresholded ridge least squares (STLSQ)
//! and its graph-penalized variant.
//!
//! The penalized problem for equation `i`,
//!
//! ```text
//! min ||dx_i - Θ ξ||² + λ ||f_i ∘ ξ||²
//! ```
//!
//! is turned into plain ridge regression by scaling column `j` of `Θ` by
//! `1 / f[j][i]`. STLSQ then runs on the scaled problem, so the threshold
//! `η` applies to the scaled coefficients `ξ' = f ∘ ξ`, and the result is
//! mapped back with `ξ = ξ' / f`.
//!
//! All solves go through a thin QR of `[Θ | Ẋ]` computed once per fit.
//! Because `Q` is orthonormal, `||Θ_S β − dx_k||² = ||R_S β − r_k||²` for any
//! column subset `S`, so each ridge step only factors a small
//! `(p + |S|) × |S|` stacked system `[R_S; √λ I]`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SindyError};
use crate::graph::WeightedGraph;
use crate::library::{column_normalize, FeatureLibrary};
use crate::oscillator::integrate_rk4;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sindy,
    Sindyg,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sindy => "sindy",
            Method::Sindyg => "sindyg",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = SindyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sindy" => Ok(Method::Sindy),
            "sindyg" => Ok(Method::Sindyg),
            other => Err(SindyError::Parameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Hyperparameters shared by both solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Ridge strength.
    pub lambda: f64,
    /// Hard threshold on (scaled) coefficient magnitudes.
    pub eta: f64,
    /// Sharpness of the connectivity penalty.
    #[serde(rename = "L")]
    pub penalty_l: f64,
    pub max_iters: usize,
    #[serde(skip, default = "default_f_floor")]
    pub f_floor: f64,
    #[serde(skip)]
    pub normalize_columns: bool,
}

fn default_f_floor() -> f64 {
    1e-8
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            eta: 0.01,
            penalty_l: 4.0,
            max_iters: 20,
            f_floor: default_f_floor(),
            normalize_columns: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda >= 0.0
            && self.eta >= 0.0
            && self.max_iters >= 1
            && self.penalty_l >= 0.0
            && self.f_floor > 0.0
            && self.f_floor < 0.5;
        if ok && self.lambda.is_finite() && self.eta.is_finite() && self.penalty_l.is_finite() {
            Ok(())
        } else {
            Err(SindyError::Parameter(format!(
                "solver config out of range: lambda >= 0, eta >= 0, max_iters >= 1, L >= 0, \
                 0 < f_floor < 0.5 required, got {self:?}"
            )))
        }
    }
}

/// Sparse coefficients `Ξ` (C terms × K equations) with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub xi: DMatrix<f64>,
    pub term_names: Vec<String>,
    pub var_names: Vec<String>,
}

impl CoefficientMatrix {
    pub fn new(xi: DMatrix<f64>, term_names: Vec<String>, var_names: Vec<String>) -> Self {
        debug_assert_eq!(xi.shape(), (term_names.len(), var_names.len()));
        Self { xi, term_names, var_names }
    }

    pub fn zeros(library: &FeatureLibrary) -> Self {
        Self::new(
            DMatrix::zeros(library.n_terms(), library.svmap().n_vars()),
            library.term_names(),
            library.svmap().var_names(),
        )
    }

    pub fn n_terms(&self) -> usize {
        self.xi.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.xi.ncols()
    }

    pub fn nonzeros(&self) -> usize {
        self.xi.iter().filter(|v| **v != 0.0).count()
    }

    pub fn support(&self) -> Vec<bool> {
        self.xi.iter().map(|v| *v != 0.0).collect()
    }

    /// Checks that the labels match a library.
    pub fn check_library(&self, library: &FeatureLibrary) -> Result<()> {
        if self.term_names != library.term_names() || self.var_names != library.svmap().var_names() {
            return Err(SindyError::Dimension(format!(
                "model with {} terms / {} variables does not match the library ({} terms, {} variables, \
                 degree {})",
                self.n_terms(),
                self.n_vars(),
                library.n_terms(),
                library.svmap().n_vars(),
                library.max_degree()
            )));
        }
        Ok(())
    }

    /// Human-readable equations, one per state variable.
    pub fn equations(&self, precision: usize) -> Vec<String> {
        (0..self.n_vars())
            .map(|k| {
                let rhs: Vec<String> = (0..self.n_terms())
                    .filter(|&j| self.xi[(j, k)] != 0.0)
                    .map(|j| {
                        if self.term_names[j] == "1" {
                            format!("{:.*}", precision, self.xi[(j, k)])
                        } else {
                            format!("{:.*} {}", precision, self.xi[(j, k)], self.term_names[j])
                        }
                    })
                    .collect();
                let rhs = if rhs.is_empty() { "0".to_string() } else { rhs.join(" + ") };
                format!("d{}/dt = {}", self.var_names[k], rhs)
            })
            .collect()
    }
}

/// Per-term, per-equation penalty weights `f` (C × K), each in `[f_floor, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub f: DMatrix<f64>,
}

impl PenaltyMatrix {
    pub fn uniform(n_terms: usize, n_vars: usize, value: f64) -> Self {
        Self { f: DMatrix::from_element(n_terms, n_vars, value) }
    }
}

/// Sigmoid penalty for mean connectivity `m` of a term with `n_sources`
/// distinct source variables.
pub fn penalty_value(m: f64, n_sources: usize, penalty_l: f64) -> f64 {
    let slope = penalty_l / n_sources as f64;
    1.0 / (1.0 + (slope * (m - 0.5)).exp())
}

/// Connectivity penalty of every library term in every equation.
///
/// For term `j` and target variable `i`, `m` is the mean normalized
/// connectivity from the term's distinct source nodes to the node owning
/// `i` (a node's connectivity to itself is 1). The constant term gets 0.5.
pub fn compute_penalty(
    library: &FeatureLibrary,
    graph: &WeightedGraph,
    config: &SolverConfig,
) -> Result<PenaltyMatrix> {
    let svmap = library.svmap();
    if svmap.n_nodes() != graph.n_nodes() {
        return Err(SindyError::Dimension(format!(
            "library covers {} nodes but the graph has {}",
            svmap.n_nodes(),
            graph.n_nodes()
        )));
    }
    let conn = graph.normalized_adjacency();
    let k = svmap.n_vars();
    let mut f = DMatrix::zeros(library.n_terms(), k);
    for (j, term) in library.terms().iter().enumerate() {
        for i in 0..k {
            f[(j, i)] = if term.is_constant() {
                0.5
            } else {
                let sink = svmap.node_of(i);
                let m = term.source_nodes.iter().map(|&s| conn[(s, sink)]).sum::<f64>()
                    / term.source_nodes.len() as f64;
                penalty_value(m, term.source_vars.len(), config.penalty_l).clamp(config.f_floor, 1.0)
            };
        }
    }
    Ok(PenaltyMatrix { f })
}

/// Ridge solution restricted to `support`, computed directly on `theta`.
///
/// Inactive entries are zero. At `lambda = 0` a rank-deficient active set is
/// reported as [`SindyError::Singular`].
pub fn ridge_solve(
    theta: &DMatrix<f64>,
    target: &DVector<f64>,
    lambda: f64,
    support: &[bool],
) -> Result<DVector<f64>> {
    if theta.nrows() != target.len() || theta.ncols() != support.len() {
        return Err(SindyError::Dimension(format!(
            "theta is {:?}, target has {} rows, support has {} entries",
            theta.shape(),
            target.len(),
            support.len()
        )));
    }
    let active: Vec<usize> = (0..support.len()).filter(|&j| support[j]).collect();
    if active.is_empty() {
        return Err(SindyError::Parameter("ridge solve needs at least one active column".into()));
    }
    if theta.nrows() < active.len() {
        log::warn!("ridge solve with {} samples for {} unknowns", theta.nrows(), active.len());
    }
    let beta = stacked_ridge(theta, target.as_slice(), &active, None, lambda)?;
    let mut out = DVector::zeros(support.len());
    for (&j, b) in active.iter().zip(beta.iter()) {
        out[j] = *b;
    }
    Ok(out)
}

/// Minimizes `||target − Θ β||² + λ ||f ∘ β||²` on `support` by scaling the
/// columns of `Θ` with `1 / f` and mapping the ridge solution back.
pub fn penalized_ridge_solve(
    theta: &DMatrix<f64>,
    target: &DVector<f64>,
    lambda: f64,
    f: &DVector<f64>,
    support: &[bool],
) -> Result<DVector<f64>> {
    if f.len() != theta.ncols() {
        return Err(SindyError::Dimension(format!(
            "penalty has {} entries for {} columns",
            f.len(),
            theta.ncols()
        )));
    }
    let mut scaled = theta.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= f[j];
    }
    let transformed = ridge_solve(&scaled, target, lambda, support)?;
    Ok(transformed.component_div(f))
}

/// Solves `min ||A_S β − b||² + λ||β||²` with a QR factorization of the
/// stacked matrix `[A_S; √λ I]`. `scale`, if given, divides column `j` of
/// `A` by `scale[j]`.
fn stacked_ridge(
    a: &DMatrix<f64>,
    b: &[f64],
    active: &[usize],
    scale: Option<&[f64]>,
    lambda: f64,
) -> Result<Vec<f64>> {
    let p = a.nrows();
    let s = active.len();
    let rows = if lambda > 0.0 { p + s } else { p };
    let sqrt_l = lambda.sqrt();
    let mut m = DMatrix::zeros(rows, s);
    for (c, &j) in active.iter().enumerate() {
        let d = scale.map_or(1.0, |sc| 1.0 / sc[j]);
        for r in 0..p {
            m[(r, c)] = a[(r, j)] * d;
        }
        if lambda > 0.0 {
            m[(p + c, c)] = sqrt_l;
        }
    }
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, p).copy_from_slice(b);
    if rows < s {
        return Err(SindyError::Singular(format!(
            "{rows} equations for {s} unknowns without regularization"
        )));
    }
    let qr = m.qr();
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    let r = r.view((0, 0), (s, s));
    let max_diag = (0..s).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let tol = max_diag * f64::EPSILON * rows.max(s) as f64;
    if (0..s).any(|i| r[(i, i)].abs() <= tol) {
        return Err(SindyError::Singular(format!("{s} active columns are linearly dependent")));
    }
    let sol = r
        .solve_upper_triangular(&rhs.rows(0, s))
        .ok_or_else(|| SindyError::Singular("triangular solve failed".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Thin-QR compression of `[Θ | Ẋ]`; see the module docs.
struct CompressedDesign {
    r_theta: DMatrix<f64>,
    r_targets: DMatrix<f64>,
}

impl CompressedDesign {
    fn new(theta: &DMatrix<f64>, xdot: &DMatrix<f64>) -> Self {
        let (t, c) = theta.shape();
        let k = xdot.ncols();
        let mut joined = DMatrix::zeros(t, c + k);
        joined.columns_mut(0, c).copy_from(theta);
        joined.columns_mut(c, k).copy_from(xdot);
        let r = joined.qr().r();
        Self {
            r_theta: r.columns(0, c).into_owned(),
            r_targets: r.columns(c, k).into_owned(),
        }
    }

    fn n_terms(&self) -> usize {
        self.r_theta.ncols()
    }

    /// STLSQ loop for one target column. `f` scales columns as `1/f` and the
    /// returned coefficients are in the scaled space.
    fn stlsq_column(&self, k: usize, f: Option<&[f64]>, config: &SolverConfig) -> Result<Vec<f64>> {
        let c = self.n_terms();
        let target: Vec<f64> = self.r_targets.column(k).iter().copied().collect();
        let mut active: Vec<usize> = (0..c).collect();
        let mut coef = vec![0.0; c];
        for _ in 0..config.max_iters {
            let beta = stacked_ridge(&self.r_theta, &target, &active, f, config.lambda)?;
            coef.iter_mut().for_each(|v| *v = 0.0);
            let mut kept = Vec::with_capacity(active.len());
            for (&j, &b) in active.iter().zip(beta.iter()) {
                if b.abs() >= config.eta {
                    coef[j] = b;
                    kept.push(j);
                }
            }
            let converged = kept.len() == active.len();
            active = kept;
            if converged {
                break;
            }
            if active.is_empty() {
                log::warn!("support collapsed to empty for equation {k}");
                break;
            }
        }
        Ok(coef)
    }
}

fn check_shapes(theta: &DMatrix<f64>, xdot: &DMatrix<f64>) -> Result<()> {
    if theta.nrows() != xdot.nrows() {
        return Err(SindyError::Dimension(format!(
            "library matrix has {} rows but derivative matrix has {}",
            theta.nrows(),
            xdot.nrows()
        )));
    }
    if theta.ncols() == 0 || xdot.ncols() == 0 {
        return Err(SindyError::Dimension("empty library or derivative matrix".into()));
    }
    Ok(())
}

/// Plain STLSQ with ridge regularization; returns `Ξ` (C × K).
pub fn stlsq(theta: &DMatrix<f64>, xdot: &DMatrix<f64>, config: &SolverConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    check_shapes(theta, xdot)?;
    let design = CompressedDesign::new(theta, xdot);
    let mut xi = DMatrix::zeros(theta.ncols(), xdot.ncols());
    for k in 0..xdot.ncols() {
        let col = design.stlsq_column(k, None, config)?;
        xi.set_column(k, &DVector::from_vec(col));
    }
    Ok(xi)
}

/// Graph-penalized STLSQ; returns `Ξ` (C × K) in original units.
pub fn stlsq_graph(
    theta: &DMatrix<f64>,
    xdot: &DMatrix<f64>,
    penalty: &PenaltyMatrix,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    config.validate()?;
    check_shapes(theta, xdot)?;
    if penalty.f.shape() != (theta.ncols(), xdot.ncols()) {
        return Err(SindyError::Dimension(format!(
            "penalty is {:?}, expected ({}, {})",
            penalty.f.shape(),
            theta.ncols(),
            xdot.ncols()
        )));
    }
    let design = CompressedDesign::new(theta, xdot);
    let mut xi = DMatrix::zeros(theta.ncols(), xdot.ncols());
    for k in 0..xdot.ncols() {
        let f: Vec<f64> = penalty.f.column(k).iter().map(|v| v.max(config.f_floor)).collect();
        let scaled = design.stlsq_column(k, Some(&f), config)?;
        for j in 0..theta.ncols() {
            xi[(j, k)] = scaled[j] / f[j];
        }
    }
    Ok(xi)
}

/// Fits `Ξ` with either solver, applying optional column normalization.
///
/// With normalization the threshold acts on coefficients of the unit-norm
/// columns; results are mapped back to the raw library.
pub fn fit_coefficients(
    theta: &DMatrix<f64>,
    xdot: &DMatrix<f64>,
    penalty: Option<&PenaltyMatrix>,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let (theta_used, scales) = if config.normalize_columns {
        let (n, s, _) = column_normalize(theta);
        (n, Some(s))
    } else {
        (theta.clone(), None)
    };
    let mut xi = match penalty {
        Some(p) => stlsq_graph(&theta_used, xdot, p, config)?,
        None => stlsq(&theta_used, xdot, config)?,
    };
    if let Some(s) = scales {
        for (j, mut row) in xi.row_iter_mut().enumerate() {
            row /= s[j];
        }
    }
    Ok(xi)
}

/// `Θ(states) Ξ`.
pub fn predict_derivs(
    model: &CoefficientMatrix,
    library: &FeatureLibrary,
    states: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    model.check_library(library)?;
    Ok(library.evaluate(states)? * &model.xi)
}

/// Right-hand side of a discovered model at single states.
pub struct ModelRhs<'a> {
    library: &'a FeatureLibrary,
    // (term, equation, coefficient) for nonzero entries
    entries: Vec<(usize, usize, f64)>,
    buf: Vec<f64>,
}

impl<'a> ModelRhs<'a> {
    pub fn new(model: &CoefficientMatrix, library: &'a FeatureLibrary) -> Result<Self> {
        model.check_library(library)?;
        let mut entries = Vec::new();
        for k in 0..model.n_vars() {
            for j in 0..model.n_terms() {
                let v = model.xi[(j, k)];
                if v != 0.0 {
                    entries.push((j, k, v));
                }
            }
        }
        Ok(Self { library, entries, buf: vec![0.0; library.n_terms()] })
    }

    pub fn eval(&mut self, state: &[f64], out: &mut [f64]) {
        self.library.evaluate_row(state, &mut self.buf);
        out.fill(0.0);
        for &(j, k, v) in &self.entries {
            out[k] += v * self.buf[j];
        }
    }
}

/// Integrates a discovered model with the same RK4 scheme used for ground truth.
pub fn simulate_model(
    model: &CoefficientMatrix,
    library: &FeatureLibrary,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let mut rhs = ModelRhs::new(model, library)?;
    integrate_rk4(|x, d| rhs.eval(x, d), x0, t_end, dt, *library.svmap())
}

/// On-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub var_names: Vec<String>,
    pub term_names: Vec<String>,
    /// Row-major C × K.
    pub xi: Vec<Vec<f64>>,
    pub config: SolverConfig,
    pub method: Method,
}

impl ModelFile {
    pub fn new(model: &CoefficientMatrix, config: &SolverConfig, method: Method) -> Self {
        Self {
            var_names: model.var_names.clone(),
            term_names: model.term_names.clone(),
            xi: model.xi.row_iter().map(|r| r.iter().copied().collect()).collect(),
            config: *config,
            method,
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientMatrix> {
        let (c, k) = (self.term_names.len(), self.var_names.len());
        if self.xi.len() != c || self.xi.iter().any(|r| r.len() != k) {
            return Err(SindyError::Dimension(format!(
                "model file xi is not {c} x {k} as its names imply"
            )));
        }
        let flat: Vec<f64> = self.xi.iter().flatten().copied().collect();
        Ok(CoefficientMatrix::new(
            DMatrix::from_row_slice(c, k, &flat),
            self.term_names.clone(),
            self.var_names.clone(),
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| SindyError::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SindyError::io(path, e))?;
        Self::from_json(&text).map_err(|e| SindyError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
