//! Congruent state-space transformations and degenerate-state elimination.
//!
//! A congruent change of variables `x = T(t) z + T_u u` maps a model
//! `L dx/dt = A x + B u` into another model of the same energy-preserving
//! form, provided `T_u` is constant and `Tᵀ L T_u = 0`:
//!
//! ```text
//! L̂ = Tᵀ L T          Â = Tᵀ [A T − L Ṫ]
//! B̂ = Tᵀ [A T_u + B]   Ĉ = C T    D̂ = C T_u + D
//! ```
//!
//! When a diagonal entry of `L` tends to zero or infinity the model
//! degenerates to a lower order; [`eliminate_degenerate_state`] builds the
//! `(T, T_u)` pair that removes the degenerate state.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::expr::{Expr, SymMatrix, UnboundParam};
use crate::statespace::{ModelError, PogStateSpace, StateSpaceSym};

/// Relative side-condition residual below which the transform is accepted
/// silently.
pub const SIDE_TOL_OK: f64 = 1e-12;
/// Relative side-condition residual above which the transform is rejected.
pub const SIDE_TOL_HARD: f64 = 1e-6;

/// A matrix that may depend on time through a scalar variable.
#[derive(Clone, Debug)]
pub enum TimeMatrix {
    Constant(DMatrix<f64>),
    Symbolic {
        m: SymMatrix,
        /// Name of the time-dependent scalar appearing in `m`.
        var: String,
        /// The scalar evolves as `start + rate * t`.
        start: f64,
        rate: f64,
        params: HashMap<String, f64>,
    },
}

impl TimeMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            TimeMatrix::Constant(m) => m.nrows(),
            TimeMatrix::Symbolic { m, .. } => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            TimeMatrix::Constant(m) => m.ncols(),
            TimeMatrix::Symbolic { m, .. } => m.ncols(),
        }
    }

    pub fn is_time_varying(&self) -> bool {
        matches!(self, TimeMatrix::Symbolic { rate, .. } if *rate != 0.0)
    }

    pub fn at(&self, t: f64) -> Result<DMatrix<f64>, UnboundParam> {
        match self {
            TimeMatrix::Constant(m) => Ok(m.clone()),
            TimeMatrix::Symbolic {
                m,
                var,
                start,
                rate,
                params,
            } => {
                let v = start + rate * t;
                let lookup = |name: &str| {
                    if name == var {
                        Some(v)
                    } else {
                        params.get(name).copied()
                    }
                };
                m.eval(&lookup)
            }
        }
    }
}

/// The data of a congruent change of variables `x = T(t) z + T_u u`.
#[derive(Clone, Debug)]
pub struct CongruentTransform {
    pub t: TimeMatrix,
    pub t_u: DMatrix<f64>,
    /// Time derivative of `T`; if absent and `T` is time-varying, a central
    /// finite difference is used (with a warning).
    pub t_dot: Option<TimeMatrix>,
}

impl CongruentTransform {
    pub fn constant(t: DMatrix<f64>, t_u: DMatrix<f64>) -> Self {
        CongruentTransform {
            t: TimeMatrix::Constant(t),
            t_u,
            t_dot: None,
        }
    }
}

/// Result of [`apply_congruent`]: the transformed model plus diagnostics.
#[derive(Clone, Debug)]
pub struct CongruentOutcome {
    pub model: PogStateSpace,
    /// Relative residual of the side condition `Tᵀ L T_u = 0`.
    pub side_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReduceError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("side condition T' L T_u = 0 violated (relative residual {0:.3e})")]
    SideConditionViolated(f64),
    #[error("T is time-varying but no derivative evaluator was provided")]
    MissingTdot,
    #[error("state `{0}` cannot be eliminated: {1}")]
    NonEliminable(String, String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error(transparent)]
    Unbound(#[from] UnboundParam),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_dims(ss_n: usize, ss_m: usize, tr: &CongruentTransform) -> Result<(), ReduceError> {
    if tr.t.nrows() != ss_n {
        return Err(ReduceError::Dimension(format!(
            "T has {} rows but the model has {} states",
            tr.t.nrows(),
            ss_n
        )));
    }
    if tr.t_u.nrows() != ss_n || tr.t_u.ncols() != ss_m {
        return Err(ReduceError::Dimension(format!(
            "T_u is {}x{} but must be {}x{}",
            tr.t_u.nrows(),
            tr.t_u.ncols(),
            ss_n,
            ss_m
        )));
    }
    if let Some(td) = &tr.t_dot {
        if td.nrows() != tr.t.nrows() || td.ncols() != tr.t.ncols() {
            return Err(ReduceError::Dimension(
                "T and its derivative differ in shape".into(),
            ));
        }
    }
    Ok(())
}

/// Relative residual of `Tᵀ L T_u` against `‖L‖‖T‖‖T_u‖`.
fn side_residual(l: &DMatrix<f64>, t: &DMatrix<f64>, t_u: &DMatrix<f64>) -> f64 {
    let scale = l.norm() * t.norm() * t_u.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (t.transpose() * l * t_u).norm() / scale
}

/// Apply the congruent transformation `x = T(t) z + T_u u` to a numeric
/// model, evaluating time-dependent quantities at `time` (0 when absent).
pub fn apply_congruent(
    ss: &PogStateSpace,
    tr: &CongruentTransform,
    time: Option<f64>,
) -> Result<CongruentOutcome, ReduceError> {
    check_dims(ss.nx(), ss.nu(), tr)?;
    let t0 = time.unwrap_or(0.0);
    let mut warnings = Vec::new();

    let t_mat = tr.t.at(t0)?;
    let t_dot = match (&tr.t_dot, tr.t.is_time_varying()) {
        (Some(td), _) => td.at(t0)?,
        (None, false) => DMatrix::zeros(t_mat.nrows(), t_mat.ncols()),
        (None, true) => {
            let h = 1e-6 * t0.abs().max(1.0);
            warnings.push(format!(
                "no derivative supplied for time-varying T; using central finite difference (step {h:.3e})"
            ));
            (tr.t.at(t0 + h)? - tr.t.at(t0 - h)?) / (2.0 * h)
        }
    };

    let residual = side_residual(&ss.l, &t_mat, &tr.t_u);
    if residual > SIDE_TOL_HARD {
        return Err(ReduceError::SideConditionViolated(residual));
    }
    if residual > SIDE_TOL_OK {
        warnings.push(format!(
            "side condition residual {residual:.3e} exceeds {SIDE_TOL_OK:.0e}"
        ));
    }

    let a = ss.a_at(t0, &vec![0.0; ss.nx()])?;
    let tt = t_mat.transpose();
    let l_hat = &tt * &ss.l * &t_mat;
    // Symmetrize to remove floating-point asymmetry in T' L T.
    let l_hat = (&l_hat + l_hat.transpose()) * 0.5;
    let a_hat = &tt * (&a * &t_mat - &ss.l * &t_dot);
    let b_hat = &tt * (&a * &tr.t_u + &ss.b);
    let c_hat = &ss.c * &t_mat;
    let d_hat = &ss.c * &tr.t_u + &ss.d;

    let square_basis_change = t_mat.nrows() == t_mat.ncols();
    let state_labels = if square_basis_change {
        ss.state_labels.clone()
    } else {
        (1..=t_mat.ncols()).map(|i| format!("z{i}")).collect()
    };

    Ok(CongruentOutcome {
        model: PogStateSpace {
            l: l_hat,
            a: a_hat,
            b: b_hat,
            c: c_hat,
            d: d_hat,
            state_labels,
            input_labels: ss.input_labels.clone(),
            output_labels: ss.output_labels.clone(),
            hook: None,
        },
        side_residual: residual,
        warnings,
    })
}

/// Apply a constant congruent transformation symbolically (with `Ṫ = 0`).
/// The side condition `Tᵀ L T_u = 0` must hold exactly.
pub fn apply_congruent_sym(
    ss: &StateSpaceSym,
    t: &SymMatrix,
    t_u: &SymMatrix,
    state_labels: Vec<String>,
) -> Result<StateSpaceSym, ReduceError> {
    if t.nrows() != ss.nx() || t_u.nrows() != ss.nx() || t_u.ncols() != ss.nu() {
        return Err(ReduceError::Dimension(
            "transform shape does not match the model".into(),
        ));
    }
    let tt = t.transpose();
    let side = tt.matmul(&ss.l).matmul(t_u);
    if !side.is_zero() {
        return Err(ReduceError::SideConditionViolated(f64::NAN));
    }
    Ok(StateSpaceSym {
        l: tt.matmul(&ss.l).matmul(t),
        a: tt.matmul(&ss.a).matmul(t),
        b: tt.matmul(&ss.a.matmul(t_u).add(&ss.b)),
        c: ss.c.matmul(t),
        d: ss.c.matmul(t_u).add(&ss.d),
        state_labels,
        input_labels: ss.input_labels.clone(),
        output_labels: ss.output_labels.clone(),
    })
}

/// Which limit the degenerate energy coefficient tends to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    Zero,
    Infinity,
}

/// Result of a symbolic degenerate-state elimination.
#[derive(Clone, Debug)]
pub struct EliminationSym {
    pub t: SymMatrix,
    pub t_u: SymMatrix,
    pub model: StateSpaceSym,
}

fn state_index(labels: &[String], state: &str) -> Result<usize, ReduceError> {
    labels
        .iter()
        .position(|s| s == state)
        .ok_or_else(|| ReduceError::UnknownState(state.to_string()))
}

/// Remove a state whose energy coefficient degenerates, symbolically.
///
/// For the zero limit, the state's dynamic row collapses to the static
/// constraint `0 = aᵢ·x + bᵢ·u`, solved for the eliminated state (requires
/// `aᵢᵢ ≠ 0` and invertible as a single product term). For the infinity
/// limit the state freezes at zero and is simply dropped.
pub fn eliminate_degenerate_state_sym(
    ss: &StateSpaceSym,
    state: &str,
    limit: Limit,
) -> Result<EliminationSym, ReduceError> {
    let n = ss.nx();
    let m = ss.nu();
    let i = state_index(&ss.state_labels, state)?;

    let mut base = ss.clone();
    // The degenerate limit is substituted before the transform formulas so
    // the eliminated coefficient contributes nothing to the reduced model.
    if limit == Limit::Zero {
        *base.l.get_mut(i, i) = Expr::zero();
    }

    // Column j of T carries the j-th surviving state.
    let survivors: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let mut t = SymMatrix::zeros(n, n - 1);
    for (col, &j) in survivors.iter().enumerate() {
        *t.get_mut(j, col) = Expr::one();
    }
    let mut t_u = SymMatrix::zeros(n, m);

    if limit == Limit::Zero {
        let pivot = base.a.get(i, i).clone();
        if pivot.is_zero() {
            return Err(ReduceError::NonEliminable(
                state.to_string(),
                "the static constraint has no diagonal term to solve for".into(),
            ));
        }
        if pivot.as_monomial().is_none() {
            return Err(ReduceError::NonEliminable(
                state.to_string(),
                "the diagonal constraint coefficient is not a single product term".into(),
            ));
        }
        for (col, &j) in survivors.iter().enumerate() {
            let a_ij = base.a.get(i, j);
            if !a_ij.is_zero() {
                *t.get_mut(i, col) = a_ij
                    .div_monomial(&pivot)
                    .expect("pivot checked to be a single product term")
                    .neg();
            }
        }
        for k in 0..m {
            let b_ik = base.b.get(i, k);
            if !b_ik.is_zero() {
                *t_u.get_mut(i, k) = b_ik
                    .div_monomial(&pivot)
                    .expect("pivot checked to be a single product term")
                    .neg();
            }
        }
    }

    let labels: Vec<String> = survivors
        .iter()
        .map(|&j| ss.state_labels[j].clone())
        .collect();
    let model = apply_congruent_sym(&base, &t, &t_u, labels)?;
    Ok(EliminationSym { t, t_u, model })
}

/// Numeric counterpart of [`eliminate_degenerate_state_sym`].
pub fn eliminate_degenerate_state(
    ss: &PogStateSpace,
    state: &str,
    limit: Limit,
) -> Result<(CongruentTransform, PogStateSpace), ReduceError> {
    let n = ss.nx();
    let m = ss.nu();
    let i = state_index(&ss.state_labels, state)?;

    let mut base = ss.clone();
    if limit == Limit::Zero {
        base.l[(i, i)] = 0.0;
    }

    let survivors: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let mut t = DMatrix::zeros(n, n - 1);
    for (col, &j) in survivors.iter().enumerate() {
        t[(j, col)] = 1.0;
    }
    let mut t_u = DMatrix::zeros(n, m);

    if limit == Limit::Zero {
        let pivot = base.a[(i, i)];
        if pivot == 0.0 {
            return Err(ReduceError::NonEliminable(
                state.to_string(),
                "the static constraint has no diagonal term to solve for".into(),
            ));
        }
        for (col, &j) in survivors.iter().enumerate() {
            t[(i, col)] = -base.a[(i, j)] / pivot;
        }
        for k in 0..m {
            t_u[(i, k)] = -base.b[(i, k)] / pivot;
        }
    }

    let tr = CongruentTransform::constant(t, t_u);
    let mut outcome = apply_congruent(&base, &tr, None)?;
    outcome.model.state_labels = survivors
        .iter()
        .map(|&j| ss.state_labels[j].clone())
        .collect();
    Ok((tr, outcome.model))
}
