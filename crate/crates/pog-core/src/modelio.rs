//! Reading and writing state-space models and transforms as JSON.
//!
//! Matrix entries may be plain numbers or expression strings in the model's
//! parameters, so the same format carries both numeric and named-coefficient
//! models. Schema:
//!
//! ```json
//! {
//!   "states": ["x1", ...], "inputs": [...], "outputs": [...],
//!   "L": [[...]], "A": [[...]], "B": [[...]], "C": [[...]], "D": [[...]],
//!   "params": {"R": 1.0},
//!   "hook": {"var": "theta", "binding": {"time": {"start": 0, "rate": 1}}
//!            or {"state": {"index": 2}}, "A": [[...]]},
//!   "signals": {"u": "const:1"},
//!   "x0": [0, 0]
//! }
//! ```
//!
//! Transform files use the same matrix encoding for `T`, `T_u`, and the
//! optional `T_dot`, plus the same time-variable block as hooks.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::expr::{parse_expr, Expr, SymMatrix};
use crate::netlist::{parse_signal_spec, SignalSpec};
use crate::reduce::{CongruentTransform, TimeMatrix};
use crate::statespace::{Hook, HookBinding, PogStateSpace, StateSpaceSym};

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("{0}")]
    Json(String),
    #[error("{0}")]
    Format(String),
    #[error("unbound parameter `{0}` (supply it in \"params\" or with a parameter override)")]
    Unbound(String),
}

fn fmt_err(msg: impl Into<String>) -> ModelIoError {
    ModelIoError::Format(msg.into())
}

#[derive(Debug, Serialize, Deserialize)]
struct HookFile {
    var: String,
    binding: BindingFile,
    #[serde(rename = "A")]
    a: Vec<Vec<Value>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BindingFile {
    Time { start: f64, rate: f64 },
    State { index: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    states: Vec<String>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    #[serde(rename = "L")]
    l: Vec<Vec<Value>>,
    #[serde(rename = "A")]
    a: Vec<Vec<Value>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Value>>,
    #[serde(rename = "C")]
    c: Vec<Vec<Value>>,
    #[serde(rename = "D")]
    d: Vec<Vec<Value>>,
    #[serde(default)]
    params: HashMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hook: Option<HookFile>,
    #[serde(default)]
    signals: HashMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
}

/// A model loaded from JSON: symbolic matrices, parameter values, optional
/// dynamics hook, input signal declarations, and initial state.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub sym: StateSpaceSym,
    pub params: HashMap<String, f64>,
    pub hook: Option<Hook>,
    pub signals: HashMap<String, SignalSpec>,
    pub x0: Option<Vec<f64>>,
}

impl LoadedModel {
    /// Evaluate the matrices with the stored parameters (plus overrides)
    /// into a numeric model carrying the hook.
    pub fn eval(&self, overrides: &HashMap<String, f64>) -> Result<PogStateSpace, ModelIoError> {
        let mut params = self.params.clone();
        for (k, v) in overrides {
            params.insert(k.clone(), *v);
        }
        let mut ss = self
            .sym
            .eval(&params)
            .map_err(|e| ModelIoError::Unbound(e.0))?;
        ss.hook = self.hook.clone().map(|mut h| {
            for (k, v) in &params {
                h.params.insert(k.clone(), *v);
            }
            h
        });
        Ok(ss)
    }
}

fn entry_to_expr(v: &Value, what: &str) -> Result<Expr, ModelIoError> {
    match v {
        Value::Number(n) => Ok(Expr::constant(n.as_f64().unwrap_or(f64::NAN))),
        Value::String(s) => {
            parse_expr(s).map_err(|e| fmt_err(format!("{what}: bad expression `{s}`: {e}")))
        }
        other => Err(fmt_err(format!("{what}: expected number or string, got {other}"))),
    }
}

fn rows_to_matrix(
    rows: &[Vec<Value>],
    nrows: usize,
    ncols: usize,
    what: &str,
) -> Result<SymMatrix, ModelIoError> {
    if rows.len() != nrows {
        return Err(fmt_err(format!(
            "{what}: expected {nrows} rows, got {}",
            rows.len()
        )));
    }
    let mut m = SymMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(fmt_err(format!(
                "{what}: row {} has {} entries, expected {ncols}",
                i + 1,
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            *m.get_mut(i, j) = entry_to_expr(v, what)?;
        }
    }
    Ok(m)
}

fn expr_to_entry(e: &Expr) -> Value {
    if e.params().is_empty() {
        let v = e.eval(&|_| None).expect("constant expression");
        if let Some(n) = serde_json::Number::from_f64(v) {
            return Value::Number(n);
        }
    }
    Value::String(e.to_string())
}

fn matrix_to_rows(m: &SymMatrix) -> Vec<Vec<Value>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| expr_to_entry(m.get(i, j))).collect())
        .collect()
}

/// Parse a model from JSON text.
pub fn parse_model(text: &str) -> Result<LoadedModel, ModelIoError> {
    let mf: ModelFile =
        serde_json::from_str(text).map_err(|e| ModelIoError::Json(e.to_string()))?;
    let n = mf.states.len();
    let nu = mf.inputs.len();
    let ny = mf.outputs.len();
    let sym = StateSpaceSym {
        l: rows_to_matrix(&mf.l, n, n, "L")?,
        a: rows_to_matrix(&mf.a, n, n, "A")?,
        b: rows_to_matrix(&mf.b, n, nu, "B")?,
        c: rows_to_matrix(&mf.c, ny, n, "C")?,
        d: rows_to_matrix(&mf.d, ny, nu, "D")?,
        state_labels: mf.states.clone(),
        input_labels: mf.inputs.clone(),
        output_labels: mf.outputs.clone(),
    };
    let hook = match &mf.hook {
        None => None,
        Some(h) => {
            let a = rows_to_matrix(&h.a, n, n, "hook A")?;
            let binding = match h.binding {
                BindingFile::Time { start, rate } => HookBinding::Time { start, rate },
                BindingFile::State { index } => {
                    if index >= n {
                        return Err(fmt_err(format!(
                            "hook state index {index} out of range for {n} states"
                        )));
                    }
                    HookBinding::State { index }
                }
            };
            Some(Hook {
                var: h.var.clone(),
                binding,
                a,
                params: mf.params.clone(),
            })
        }
    };
    let mut signals = HashMap::new();
    for (name, decl) in &mf.signals {
        if !mf.inputs.contains(name) {
            return Err(fmt_err(format!("signal for unknown input `{name}`")));
        }
        let spec = parse_signal_spec(decl)
            .map_err(|e| fmt_err(format!("signal `{name}`: {e}")))?;
        signals.insert(name.clone(), spec);
    }
    if let Some(x0) = &mf.x0 {
        if x0.len() != n {
            return Err(fmt_err(format!(
                "x0 has {} entries, expected {n}",
                x0.len()
            )));
        }
    }
    Ok(LoadedModel {
        sym,
        params: mf.params,
        hook,
        signals,
        x0: mf.x0,
    })
}

pub fn read_model(path: &Path) -> Result<LoadedModel, ModelIoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelIoError::Json(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

/// Serialize a symbolic model (with optional parameter values and hook)
/// back to JSON text.
pub fn write_model(
    sym: &StateSpaceSym,
    params: &HashMap<String, f64>,
    hook: Option<&Hook>,
) -> String {
    let mf = ModelFile {
        states: sym.state_labels.clone(),
        inputs: sym.input_labels.clone(),
        outputs: sym.output_labels.clone(),
        l: matrix_to_rows(&sym.l),
        a: matrix_to_rows(&sym.a),
        b: matrix_to_rows(&sym.b),
        c: matrix_to_rows(&sym.c),
        d: matrix_to_rows(&sym.d),
        params: params.clone(),
        hook: hook.map(|h| HookFile {
            var: h.var.clone(),
            binding: match h.binding {
                HookBinding::Time { start, rate } => BindingFile::Time { start, rate },
                HookBinding::State { index } => BindingFile::State { index },
            },
            a: matrix_to_rows(&h.a),
        }),
        signals: HashMap::new(),
        x0: None,
    };
    serde_json::to_string_pretty(&mf).expect("model serialization")
}

#[derive(Debug, Serialize, Deserialize)]
struct TransformFile {
    #[serde(rename = "T")]
    t: Vec<Vec<Value>>,
    #[serde(rename = "T_u")]
    t_u: Vec<Vec<f64>>,
    #[serde(default, rename = "T_dot", skip_serializing_if = "Option::is_none")]
    t_dot: Option<Vec<Vec<Value>>>,
    /// Time-dependent scalar appearing in T (evolving as start + rate*t).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var: Option<String>,
    #[serde(default)]
    start: f64,
    #[serde(default)]
    rate: f64,
    #[serde(default)]
    params: HashMap<String, f64>,
}

/// Parse a congruent transform from JSON text.
pub fn parse_transform(text: &str) -> Result<CongruentTransform, ModelIoError> {
    let tf: TransformFile =
        serde_json::from_str(text).map_err(|e| ModelIoError::Json(e.to_string()))?;
    let nrows = tf.t.len();
    let ncols = tf.t.first().map_or(0, Vec::len);
    let t_sym = rows_to_matrix(&tf.t, nrows, ncols, "T")?;

    let to_time_matrix = |m: SymMatrix, what: &str| -> Result<TimeMatrix, ModelIoError> {
        match &tf.var {
            Some(var) if m.params().iter().any(|p| p == var) => Ok(TimeMatrix::Symbolic {
                m,
                var: var.clone(),
                start: tf.start,
                rate: tf.rate,
                params: tf.params.clone(),
            }),
            _ => {
                let lookup = |name: &str| tf.params.get(name).copied();
                let num = m
                    .eval(&lookup)
                    .map_err(|e| fmt_err(format!("{what}: unbound parameter `{}`", e.0)))?;
                Ok(TimeMatrix::Constant(num))
            }
        }
    };
    let t = to_time_matrix(t_sym, "T")?;

    let urows = tf.t_u.len();
    let ucols = tf.t_u.first().map_or(0, Vec::len);
    let mut t_u = nalgebra::DMatrix::zeros(urows, ucols);
    for (i, row) in tf.t_u.iter().enumerate() {
        if row.len() != ucols {
            return Err(fmt_err("T_u rows have inconsistent lengths".to_string()));
        }
        for (j, v) in row.iter().enumerate() {
            t_u[(i, j)] = *v;
        }
    }

    let t_dot = match &tf.t_dot {
        None => None,
        Some(rows) => {
            let m = rows_to_matrix(rows, nrows, ncols, "T_dot")?;
            Some(to_time_matrix(m, "T_dot")?)
        }
    };

    Ok(CongruentTransform { t, t_u, t_dot })
}

pub fn read_transform(path: &Path) -> Result<CongruentTransform, ModelIoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelIoError::Json(format!("{}: {e}", path.display())))?;
    parse_transform(&text)
}
