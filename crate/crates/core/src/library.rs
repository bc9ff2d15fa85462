//! Polynomial candidate-function library `Θ(X)`.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SindyError};
use crate::graph::StateVariableMap;

/// One monomial `x_0^e0 ... x_{K-1}^e{K-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermDescriptor {
    pub exponents: Vec<u32>,
    pub name: String,
    /// State variables with a positive exponent.
    pub source_vars: BTreeSet<usize>,
    /// Nodes owning the source variables.
    pub source_nodes: BTreeSet<usize>,
}

impl TermDescriptor {
    fn new(exponents: Vec<u32>, svmap: &StateVariableMap) -> Self {
        let source_vars: BTreeSet<usize> =
            exponents.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| i).collect();
        let source_nodes = source_vars.iter().map(|&v| svmap.node_of(v)).collect();
        let name = if source_vars.is_empty() {
            "1".to_string()
        } else {
            source_vars
                .iter()
                .map(|&v| match exponents[v] {
                    1 => svmap.var_name(v),
                    e => format!("{}^{}", svmap.var_name(v), e),
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        Self { exponents, name, source_vars, source_nodes }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.source_vars.is_empty()
    }
}

/// Every monomial up to `max_degree`, in graded lexicographic order.
///
/// Within one degree, terms follow the lexicographic order of their sorted
/// variable-index multisets, so `x0^2, x0 y0, y0^2` for `K = 2`.
#[derive(Debug, Clone)]
pub struct FeatureLibrary {
    terms: Vec<TermDescriptor>,
    max_degree: u32,
    svmap: StateVariableMap,
    // term j (j > 0) = term parent[j].0 * x_{parent[j].1}
    parents: Vec<(usize, usize)>,
}

impl FeatureLibrary {
    pub fn build(svmap: StateVariableMap, max_degree: u32) -> Result<Self> {
        if max_degree == 0 {
            return Err(SindyError::Parameter("library degree must be at least 1".into()));
        }
        let k = svmap.n_vars();
        let mut multisets: Vec<Vec<usize>> = vec![Vec::new()];
        let mut start = 0;
        for _ in 0..max_degree {
            let end = multisets.len();
            for idx in start..end {
                let last = multisets[idx].last().copied().unwrap_or(0);
                for v in last..k {
                    let mut next = multisets[idx].clone();
                    next.push(v);
                    multisets.push(next);
                }
            }
            start = end;
        }

        let mut terms = Vec::with_capacity(multisets.len());
        let mut parents = Vec::with_capacity(multisets.len());
        let index: HashMap<&[usize], usize> =
            multisets.iter().enumerate().map(|(i, m)| (m.as_slice(), i)).collect();
        for ms in &multisets {
            let mut exps = vec![0u32; k];
            for &v in ms {
                exps[v] += 1;
            }
            terms.push(TermDescriptor::new(exps, &svmap));
            parents.push(match ms.split_last() {
                None => (0, 0),
                Some((&v, rest)) => (index[rest], v),
            });
        }
        Ok(Self { terms, max_degree, svmap, parents })
    }

    pub fn terms(&self) -> &[TermDescriptor] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn svmap(&self) -> &StateVariableMap {
        &self.svmap
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    pub fn position(&self, exponents: &[u32]) -> Option<usize> {
        self.terms.iter().position(|t| t.exponents == exponents)
    }

    /// Evaluates every term at one state, writing into `out` (length C).
    pub fn evaluate_row(&self, state: &[f64], out: &mut [f64]) {
        debug_assert_eq!(state.len(), self.svmap.n_vars());
        out[0] = 1.0;
        for j in 1..self.terms.len() {
            let (p, v) = self.parents[j];
            out[j] = out[p] * state[v];
        }
    }

    /// `Θ(X)`: one row per sample, one column per term.
    pub fn evaluate(&self, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let k = self.svmap.n_vars();
        if states.ncols() != k {
            return Err(SindyError::Dimension(format!(
                "library expects {k} state columns, got {}",
                states.ncols()
            )));
        }
        let (t, c) = (states.nrows(), self.n_terms());
        let mut theta = DMatrix::zeros(t, c);
        theta.column_mut(0).fill(1.0);
        for j in 1..c {
            let (p, v) = self.parents[j];
            let col = theta.column(p).component_mul(&states.column(v));
            theta.set_column(j, &col);
        }
        Ok(theta)
    }
}

/// Divides every column by its Euclidean norm.
///
/// Returns the scaled matrix, the scales, and the indices of zero-norm
/// columns (left untouched, scale 1). Coefficients fitted on the scaled
/// matrix map back as `xi = xi_scaled / scale`.
pub fn column_normalize(theta: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, Vec<usize>) {
    let mut out = theta.clone();
    let mut scales = DVector::from_element(theta.ncols(), 1.0);
    let mut zero_cols = Vec::new();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
            scales[j] = norm;
        } else {
            zero_cols.push(j);
        }
    }
    if !zero_cols.is_empty() {
        log::warn!("zero-norm library columns left unscaled: {zero_cols:?}");
    }
    (out, scales, zero_cols)
}
