//! Sampled trajectories and their CSV representation.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, SindyError};
use crate::graph::StateVariableMap;

/// States and derivatives sampled on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// T x K
    pub states: DMatrix<f64>,
    /// T x K
    pub derivs: DMatrix<f64>,
    pub svmap: StateVariableMap,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        states: DMatrix<f64>,
        derivs: DMatrix<f64>,
        svmap: StateVariableMap,
    ) -> Result<Self> {
        let t = times.len();
        let k = svmap.n_vars();
        if states.shape() != (t, k) || derivs.shape() != (t, k) {
            return Err(SindyError::Dimension(format!(
                "trajectory with {t} samples and {k} variables got states {:?} and derivs {:?}",
                states.shape(),
                derivs.shape()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SindyError::Parameter("trajectory times must be strictly increasing".into()));
        }
        Ok(Self { times, states, derivs, svmap })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.states.row(0).iter().copied().collect()
    }

    pub fn final_state(&self) -> Vec<f64> {
        self.states.row(self.len() - 1).iter().copied().collect()
    }

    /// Writes the state file and the companion derivative file.
    pub fn save_csv(&self, states_path: impl AsRef<Path>, derivs_path: impl AsRef<Path>) -> Result<()> {
        let names = self.svmap.var_names();
        write_table(states_path.as_ref(), &names, &self.times, &self.states)?;
        let dnames: Vec<String> = names.iter().map(|n| format!("d{n}")).collect();
        write_table(derivs_path.as_ref(), &dnames, &self.times, &self.derivs)
    }

    /// Loads a state file and, if given, its derivative file.
    ///
    /// Without a derivative file the derivatives are estimated with
    /// [`finite_diff_derivs`].
    pub fn load_csv(states_path: impl AsRef<Path>, derivs_path: Option<&Path>) -> Result<Self> {
        let states_path = states_path.as_ref();
        let (names, times, states) = read_table(states_path)?;
        let svmap = infer_svmap(&names).ok_or_else(|| SindyError::Format {
            path: states_path.to_path_buf(),
            message: format!("unrecognised state column names {names:?}"),
        })?;
        let derivs = match derivs_path {
            Some(dp) => {
                let (dnames, dtimes, derivs) = read_table(dp)?;
                let expected: Vec<String> = names.iter().map(|n| format!("d{n}")).collect();
                if dnames != expected {
                    return Err(SindyError::Format {
                        path: dp.to_path_buf(),
                        message: format!("expected derivative columns {expected:?}, got {dnames:?}"),
                    });
                }
                if dtimes != times {
                    return Err(SindyError::Format {
                        path: dp.to_path_buf(),
                        message: "derivative time column differs from the state file".into(),
                    });
                }
                derivs
            }
            None => finite_diff_derivs(&times, &states)?,
        };
        Self::new(times, states, derivs, svmap)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table(path: &Path, names: &[String], times: &[f64], data: &DMatrix<f64>) -> Result<()> {
    let mut out = String::with_capacity(times.len() * (names.len() + 1) * 24);
    out.push('t');
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, t) in times.iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for j in 0..data.ncols() {
            out.push(',');
            out.push_str(&fmt_f64(data[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| SindyError::io(path, e))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<f64>, DMatrix<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| SindyError::io(path, e))?;
    let parse_err = |line: usize, column: usize, message: String| SindyError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, 1, "empty file".into()))?;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if cols.first().map(String::as_str) != Some("t") || cols.len() < 2 {
        return Err(parse_err(1, 1, "header must start with t and name at least one variable".into()));
    }
    let names = cols[1..].to_vec();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(parse_err(
                lineno + 1,
                fields.len().min(cols.len()) + 1,
                format!("expected {} fields, got {}", cols.len(), fields.len()),
            ));
        }
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno + 1, c + 1, format!("not a number: {:?}", f.trim())))?;
            if c == 0 {
                times.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let data = DMatrix::from_row_slice(times.len(), names.len(), &values);
    Ok((names, times, data))
}

fn infer_svmap(names: &[String]) -> Option<StateVariableMap> {
    let n = names.len();
    if n.is_multiple_of(2) {
        let planar = StateVariableMap::planar(n / 2).ok()?;
        if planar.var_names() == names {
            return Some(planar);
        }
    }
    // s<node>_<slot>: the slot count is one more than the largest slot of node 0
    let slots = names.iter().take_while(|s| s.starts_with("s0_")).count();
    if slots == 0 || !n.is_multiple_of(slots) {
        return None;
    }
    let map = StateVariableMap::new(n / slots, slots).ok()?;
    (map.var_names() == names).then_some(map)
}

/// Derivative estimate on a uniform grid: central differences inside,
/// second-order one-sided differences at both ends.
pub fn finite_diff_derivs(times: &[f64], states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = times.len();
    if t < 3 {
        return Err(SindyError::Parameter("finite differences need at least 3 samples".into()));
    }
    if states.nrows() != t {
        return Err(SindyError::Dimension(format!(
            "{t} time points but {} state rows",
            states.nrows()
        )));
    }
    let dt = (times[t - 1] - times[0]) / (t - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(SindyError::Parameter("finite differences need a uniform time grid".into()));
    }
    let mut d = DMatrix::zeros(t, states.ncols());
    for j in 0..states.ncols() {
        let x = states.column(j);
        d[(0, j)] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
        for i in 1..t - 1 {
            d[(i, j)] = (x[i + 1] - x[i - 1]) / (2.0 * dt);
        }
        d[(t - 1, j)] = (3.0 * x[t - 1] - 4.0 * x[t - 2] + x[t - 3]) / (2.0 * dt);
    }
    Ok(d)
}
