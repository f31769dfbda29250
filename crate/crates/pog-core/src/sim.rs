//! Fixed-step numerical integration of state-space models in the form
//! `L dx/dt = A x + B u`, with stored-energy and power-balance monitoring.

use nalgebra::{DMatrix, DVector};

use crate::netlist::SignalSpec;
use crate::statespace::{ModelError, PogStateSpace, ENERGY_COND_LIMIT};

/// A scalar input as a function of time.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSignal {
    Const(f64),
    Step { value: f64, at: f64 },
    Sin { amp: f64, freq: f64, phase: f64 },
    Samples { times: Vec<f64>, values: Vec<f64> },
}

impl InputSignal {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            InputSignal::Const(v) => *v,
            InputSignal::Step { value, at } => {
                if t >= *at {
                    *value
                } else {
                    0.0
                }
            }
            InputSignal::Sin { amp, freq, phase } => {
                amp * (2.0 * std::f64::consts::PI * freq * t + phase).sin()
            }
            InputSignal::Samples { times, values } => {
                if times.is_empty() {
                    return 0.0;
                }
                if t <= times[0] {
                    return values[0];
                }
                if t >= *times.last().unwrap() {
                    return *values.last().unwrap();
                }
                let k = times.partition_point(|&tk| tk <= t) - 1;
                let frac = (t - times[k]) / (times[k + 1] - times[k]);
                values[k] + frac * (values[k + 1] - values[k])
            }
        }
    }

    /// Build a signal from a declaration, loading sample files as needed.
    /// Relative sample paths resolve against `base_dir`.
    pub fn from_spec(spec: &SignalSpec, base_dir: Option<&std::path::Path>) -> Result<Self, SimError> {
        match spec {
            SignalSpec::Const(v) => Ok(InputSignal::Const(*v)),
            SignalSpec::Step { value, at } => Ok(InputSignal::Step {
                value: *value,
                at: *at,
            }),
            SignalSpec::Sin { amp, freq, phase } => Ok(InputSignal::Sin {
                amp: *amp,
                freq: *freq,
                phase: *phase,
            }),
            SignalSpec::Csv(path) => {
                let mut full = std::path::PathBuf::from(path);
                if full.is_relative() {
                    if let Some(dir) = base_dir {
                        full = dir.join(&full);
                    }
                }
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| SimError::Io(format!("{}: {e}", full.display())))?;
                let mut times = Vec::new();
                let mut values = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    // Skip a header row if the first field is not numeric.
                    let mut it = line.split(',').map(str::trim);
                    let (Some(ts), Some(vs)) = (it.next(), it.next()) else {
                        return Err(SimError::Io(format!(
                            "{}:{}: expected `time,value`",
                            full.display(),
                            lineno + 1
                        )));
                    };
                    let (Ok(t), Ok(v)) = (ts.parse::<f64>(), vs.parse::<f64>()) else {
                        if lineno == 0 {
                            continue;
                        }
                        return Err(SimError::Io(format!(
                            "{}:{}: non-numeric sample",
                            full.display(),
                            lineno + 1
                        )));
                    };
                    times.push(t);
                    values.push(v);
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(SimError::Io(format!(
                        "{}: sample times must be strictly increasing",
                        full.display()
                    )));
                }
                Ok(InputSignal::Samples { times, values })
            }
        }
    }
}

/// Integration method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Trapezoidal,
}

/// Fixed-step integration settings.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
}

/// Result of a simulation: sampled states, outputs, stored energy, and the
/// per-step power-balance residual.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub balance_residual: Vec<f64>,
    pub state_labels: Vec<String>,
    pub output_labels: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step size must be positive (got {0})")]
    InvalidStep(f64),
    #[error("expected {expected} input signals, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("state diverged to a non-finite value at step {step} (t = {t}), state `{label}`")]
    NonFiniteState { step: usize, t: f64, label: String },
    #[error("trajectories have incompatible labels: {0}")]
    IncompatibleLabels(String),
    #[error("{0}")]
    Io(String),
}

fn eval_inputs(signals: &[InputSignal], t: f64) -> DVector<f64> {
    DVector::from_iterator(signals.len(), signals.iter().map(|s| s.at(t)))
}

/// Integrate the model from `x0` over `[0, t_end]` with a fixed step.
///
/// The energy matrix is factorized once and reused each step; when the
/// model carries a time- or state-dependent dynamics hook, the `A` matrix
/// is re-evaluated at every integration stage instead.
pub fn simulate(
    ss: &PogStateSpace,
    signals: &[InputSignal],
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    if cfg.dt <= 0.0 || !cfg.dt.is_finite() {
        return Err(SimError::InvalidStep(cfg.dt));
    }
    if signals.len() != ss.nu() {
        return Err(SimError::InputCount {
            expected: ss.nu(),
            got: signals.len(),
        });
    }
    let cond = ss.condition_of_l();
    if !cond.is_finite() || cond > ENERGY_COND_LIMIT {
        return Err(SimError::Model(ModelError::SingularEnergyMatrix(cond)));
    }

    let lu = ss.l.clone().lu();
    let lti = ss.hook.is_none();
    let a_of = |t: f64, x: &DVector<f64>| -> Result<DMatrix<f64>, SimError> {
        Ok(ss.a_at(t, x.as_slice())?)
    };
    let deriv = |t: f64,
                 x: &DVector<f64>,
                 a_const: Option<&DMatrix<f64>>|
     -> Result<DVector<f64>, SimError> {
        let u = eval_inputs(signals, t);
        let rhs = match a_const {
            Some(a) => a * x + &ss.b * u,
            None => a_of(t, x)? * x + &ss.b * u,
        };
        lu.solve(&rhs).ok_or(SimError::Model(ModelError::Inversion))
    };

    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = DVector::from_column_slice(x0);

    // For the implicit method on constant-A models, (L - dt/2 A) is
    // factorized once up front.
    let trap_lhs = if cfg.method == Method::Trapezoidal && lti {
        Some((&ss.l - 0.5 * cfg.dt * &ss.a).lu())
    } else {
        None
    };

    times.push(0.0);
    states.push(x.as_slice().to_vec());
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let dt = cfg.dt;
        x = match cfg.method {
            Method::Rk4 => {
                let a0 = if lti { Some(&ss.a) } else { None };
                let k1 = deriv(t, &x, a0)?;
                let k2 = deriv(t + dt / 2.0, &(&x + (dt / 2.0) * &k1), a0)?;
                let k3 = deriv(t + dt / 2.0, &(&x + (dt / 2.0) * &k2), a0)?;
                let k4 = deriv(t + dt, &(&x + dt * &k3), a0)?;
                &x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
            Method::Trapezoidal => {
                let u0 = eval_inputs(signals, t);
                let u1 = eval_inputs(signals, t + dt);
                let (a0, a1) = if lti {
                    (ss.a.clone(), ss.a.clone())
                } else {
                    // Semi-implicit: the end-of-step A is evaluated at the
                    // current state.
                    (a_of(t, &x)?, a_of(t + dt, &x)?)
                };
                let rhs = (&ss.l + 0.5 * dt * &a0) * &x + 0.5 * dt * &ss.b * (u0 + u1);
                let solved = match &trap_lhs {
                    Some(f) => f.solve(&rhs),
                    None => (&ss.l - 0.5 * dt * a1).lu().solve(&rhs),
                };
                solved.ok_or(SimError::Model(ModelError::Inversion))?
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            let bad = x.iter().position(|v| !v.is_finite()).unwrap();
            return Err(SimError::NonFiniteState {
                step: k + 1,
                t: t + dt,
                label: ss
                    .state_labels
                    .get(bad)
                    .cloned()
                    .unwrap_or_else(|| format!("x{}", bad + 1)),
            });
        }
        times.push((k + 1) as f64 * cfg.dt);
        states.push(x.as_slice().to_vec());
    }

    // Outputs, stored energy, and the discrete power-balance residual
    // |dE/dt - midpoint(x'A_s x + x'Bu)| on the sampled grid.
    let mut outputs = Vec::with_capacity(times.len());
    let mut energy = Vec::with_capacity(times.len());
    for (t, xs) in times.iter().zip(&states) {
        let xv = DVector::from_column_slice(xs);
        let u = eval_inputs(signals, *t);
        let y = &ss.c * &xv + &ss.d * &u;
        outputs.push(y.as_slice().to_vec());
        energy.push(0.5 * xv.dot(&(&ss.l * &xv)));
    }
    let mut balance_residual = vec![0.0; times.len()];
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let de = (energy[k] - energy[k - 1]) / dt;
        let power_at = |idx: usize| -> Result<f64, SimError> {
            let xv = DVector::from_column_slice(&states[idx]);
            let u = eval_inputs(signals, times[idx]);
            let a = if lti {
                ss.a.clone()
            } else {
                a_of(times[idx], &xv)?
            };
            let a_s = (&a + a.transpose()) * 0.5;
            Ok(xv.dot(&(a_s * &xv)) + xv.dot(&(&ss.b * u)))
        };
        let mid = 0.5 * (power_at(k - 1)? + power_at(k)?);
        balance_residual[k] = (de - mid).abs();
    }

    Ok(Trajectory {
        times,
        states,
        outputs,
        energy,
        balance_residual,
        state_labels: ss.state_labels.clone(),
        output_labels: ss.output_labels.clone(),
    })
}

/// Maximum absolute power-balance residual over a trajectory.
pub fn power_balance_residual(tr: &Trajectory) -> f64 {
    tr.balance_residual.iter().cloned().fold(0.0, f64::max)
}

/// Maximum absolute supplied power `x'Bu` over a trajectory, the natural
/// scale for judging the balance residual.
pub fn max_supplied_power(tr: &Trajectory, ss: &PogStateSpace, signals: &[InputSignal]) -> f64 {
    tr.times
        .iter()
        .zip(&tr.states)
        .map(|(t, xs)| {
            let xv = DVector::from_column_slice(xs);
            let u = eval_inputs(signals, *t);
            xv.dot(&(&ss.b * u)).abs()
        })
        .fold(0.0, f64::max)
}

/// Error metrics between two trajectories over the grid of `a` (the second
/// trajectory is linearly resampled when the grids differ).
#[derive(Clone, Debug)]
pub struct CompareReport {
    pub max_abs: f64,
    pub rms: f64,
    /// Per-state and per-output maximum absolute error, keyed by label.
    pub per_signal: Vec<(String, f64)>,
}

fn sample_column(times: &[f64], rows: &[Vec<f64>], col: usize, t: f64) -> f64 {
    if t <= times[0] {
        return rows[0][col];
    }
    if t >= *times.last().unwrap() {
        return rows.last().unwrap()[col];
    }
    let k = times.partition_point(|&tk| tk <= t) - 1;
    let frac = (t - times[k]) / (times[k + 1] - times[k]);
    rows[k][col] + frac * (rows[k + 1][col] - rows[k][col])
}

pub fn compare_trajectories(a: &Trajectory, b: &Trajectory) -> Result<CompareReport, SimError> {
    if a.state_labels != b.state_labels || a.output_labels != b.output_labels {
        return Err(SimError::IncompatibleLabels(format!(
            "[{}] vs [{}]",
            a.state_labels.join(","),
            b.state_labels.join(",")
        )));
    }
    let mut per_signal = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    let same_grid = a.times == b.times;
    let mut track = |label: &str, series: &dyn Fn(usize, usize) -> (f64, f64), col: usize| {
        let mut worst: f64 = 0.0;
        for i in 0..a.times.len() {
            let (va, vb) = series(i, col);
            let e = (va - vb).abs();
            worst = worst.max(e);
            sq_sum += e * e;
            count += 1;
        }
        max_abs = max_abs.max(worst);
        per_signal.push((label.to_string(), worst));
    };
    for (col, label) in a.state_labels.iter().enumerate() {
        let series = |i: usize, c: usize| {
            let vb = if same_grid {
                b.states[i][c]
            } else {
                sample_column(&b.times, &b.states, c, a.times[i])
            };
            (a.states[i][c], vb)
        };
        track(label, &series, col);
    }
    for (col, label) in a.output_labels.iter().enumerate() {
        let series = |i: usize, c: usize| {
            let vb = if same_grid {
                b.outputs[i][c]
            } else {
                sample_column(&b.times, &b.outputs, c, a.times[i])
            };
            (a.outputs[i][c], vb)
        };
        track(label, &series, col);
    }
    Ok(CompareReport {
        max_abs,
        rms: if count > 0 {
            (sq_sum / count as f64).sqrt()
        } else {
            0.0
        },
        per_signal,
    })
}

/// Exact sampled trajectory for a constant-input model, via the matrix
/// exponential of the augmented system `[[L⁻¹A, L⁻¹B u], [0, 0]]`.
///
/// Serves as the reference that fixed-step integrators are compared
/// against; the discrete update is exact for any step size.
pub fn exact_constant_input_trajectory(
    ss: &PogStateSpace,
    u: &[f64],
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, SimError> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(SimError::InvalidStep(dt));
    }
    let n = ss.nx();
    let cs = ss.to_classical()?;
    let uv = DVector::from_column_slice(u);
    let bu = &cs.b_bar * &uv;
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&cs.a_bar);
    aug.view_mut((0, n), (n, 1)).copy_from(&bu);
    let phi = (aug * dt).exp();
    let e = phi.view((0, 0), (n, n)).into_owned();
    let f = phi.view((0, n), (n, 1)).into_owned();

    let steps = (t_end / dt).round() as usize;
    let mut x = DVector::from_column_slice(x0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut energy = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if k > 0 {
            x = &e * &x + &f;
        }
        times.push(k as f64 * dt);
        states.push(x.as_slice().to_vec());
        let y = &ss.c * &x + &ss.d * &uv;
        outputs.push(y.as_slice().to_vec());
        energy.push(0.5 * x.dot(&(&ss.l * &x)));
    }
    Ok(Trajectory {
        balance_residual: vec![0.0; times.len()],
        times,
        states,
        outputs,
        energy,
        state_labels: ss.state_labels.clone(),
        output_labels: ss.output_labels.clone(),
    })
}

/// Serialize a trajectory as CSV with header
/// `t,<state labels...>,<output labels...>,E_s,balance_residual`.
pub fn write_csv(tr: &Trajectory) -> String {
    let mut out = String::new();
    out.push('t');
    for l in tr.state_labels.iter().chain(&tr.output_labels) {
        out.push(',');
        out.push_str(l);
    }
    out.push_str(",E_s,balance_residual\n");
    for i in 0..tr.times.len() {
        out.push_str(&format!("{}", tr.times[i]));
        for v in tr.states[i].iter().chain(&tr.outputs[i]) {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{},{}\n", tr.energy[i], tr.balance_residual[i]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn first_order_decay() -> PogStateSpace {
        PogStateSpace {
            l: dmatrix![1.0],
            a: dmatrix![-1.0],
            b: dmatrix![1.0],
            c: dmatrix![1.0],
            d: dmatrix![0.0],
            state_labels: vec!["x".into()],
            input_labels: vec!["u".into()],
            output_labels: vec!["x".into()],
            hook: None,
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let ss = first_order_decay();
        let cfg = SimConfig {
            method: Method::Rk4,
            dt: 1e-3,
            t_end: 1.0,
        };
        let tr = simulate(&ss, &[InputSignal::Const(0.0)], &[1.0], &cfg).unwrap();
        let x_end = tr.states.last().unwrap()[0];
        assert!((x_end - (-1.0f64).exp()).abs() <= 1e-8);
    }

    #[test]
    fn zero_everything_gives_zero_trajectory() {
        let ss = first_order_decay();
        let cfg = SimConfig {
            method: Method::Trapezoidal,
            dt: 1e-2,
            t_end: 1.0,
        };
        let tr = simulate(&ss, &[InputSignal::Const(0.0)], &[0.0], &cfg).unwrap();
        assert!(tr.states.iter().all(|r| r[0] == 0.0));
        assert!(tr.energy.iter().all(|&e| e == 0.0));
        assert_eq!(power_balance_residual(&tr), 0.0);
    }

    #[test]
    fn rk4_matches_matrix_exponential_reference() {
        let ss = PogStateSpace {
            l: dmatrix![2.0, 0.0; 0.0, 0.5],
            a: dmatrix![-1.0, 1.0; -1.0, -0.3],
            b: dmatrix![1.0; 0.0],
            c: DMatrix::identity(2, 2),
            d: DMatrix::zeros(2, 1),
            state_labels: vec!["x1".into(), "x2".into()],
            input_labels: vec!["u".into()],
            output_labels: vec!["x1".into(), "x2".into()],
            hook: None,
        };
        let cfg = SimConfig {
            method: Method::Rk4,
            dt: 1e-3,
            t_end: 2.0,
        };
        let tr = simulate(&ss, &[InputSignal::Const(1.0)], &[0.3, -0.2], &cfg).unwrap();
        let exact = exact_constant_input_trajectory(&ss, &[1.0], &[0.3, -0.2], 1e-3, 2.0).unwrap();
        let report = compare_trajectories(&tr, &exact).unwrap();
        assert!(report.max_abs <= 1e-9, "max_abs = {}", report.max_abs);
    }

    #[test]
    fn halving_dt_improves_rk4_accuracy_by_eight() {
        let ss = PogStateSpace {
            l: dmatrix![1.0, 0.0; 0.0, 1.0],
            a: dmatrix![-0.5, 2.0; -2.0, -0.1],
            b: dmatrix![1.0; 1.0],
            c: DMatrix::identity(2, 2),
            d: DMatrix::zeros(2, 1),
            state_labels: vec!["x1".into(), "x2".into()],
            input_labels: vec!["u".into()],
            output_labels: vec!["x1".into(), "x2".into()],
            hook: None,
        };
        let err_at = |dt: f64| {
            let cfg = SimConfig {
                method: Method::Rk4,
                dt,
                t_end: 1.0,
            };
            let tr = simulate(&ss, &[InputSignal::Const(1.0)], &[1.0, 0.0], &cfg).unwrap();
            let exact =
                exact_constant_input_trajectory(&ss, &[1.0], &[1.0, 0.0], dt, 1.0).unwrap();
            compare_trajectories(&tr, &exact).unwrap().max_abs
        };
        let coarse = err_at(2e-2);
        let fine = err_at(1e-2);
        assert!(coarse / fine >= 8.0, "ratio = {}", coarse / fine);
    }

    #[test]
    fn passive_system_energy_never_increases() {
        let ss = PogStateSpace {
            l: dmatrix![1.0, 0.0; 0.0, 3.0],
            a: dmatrix![-0.2, 1.0; -1.0, -0.4],
            b: DMatrix::zeros(2, 0),
            c: DMatrix::zeros(0, 2),
            d: DMatrix::zeros(0, 0),
            state_labels: vec!["x1".into(), "x2".into()],
            input_labels: vec![],
            output_labels: vec![],
            hook: None,
        };
        let cfg = SimConfig {
            method: Method::Rk4,
            dt: 1e-3,
            t_end: 5.0,
        };
        let tr = simulate(&ss, &[], &[1.0, 1.0], &cfg).unwrap();
        for w in tr.energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn lossless_system_conserves_energy() {
        let ss = PogStateSpace {
            l: dmatrix![1.0, 0.0; 0.0, 1.0],
            a: dmatrix![0.0, 1.0; -1.0, 0.0],
            b: DMatrix::zeros(2, 0),
            c: DMatrix::zeros(0, 2),
            d: DMatrix::zeros(0, 0),
            state_labels: vec!["x1".into(), "x2".into()],
            input_labels: vec![],
            output_labels: vec![],
            hook: None,
        };
        let cfg = SimConfig {
            method: Method::Rk4,
            dt: 1e-3,
            t_end: 10.0,
        };
        let tr = simulate(&ss, &[], &[1.0, 0.0], &cfg).unwrap();
        let e0 = tr.energy[0];
        for e in &tr.energy {
            assert!((e - e0).abs() < 1e-10);
        }
    }

    #[test]
    fn balance_residual_shrinks_quadratically_with_dt() {
        let ss = PogStateSpace {
            l: dmatrix![2.0, 0.0; 0.0, 0.5],
            a: dmatrix![-1.0, 1.0; -1.0, -0.3],
            b: dmatrix![1.0; 0.5],
            c: DMatrix::identity(2, 2),
            d: DMatrix::zeros(2, 1),
            state_labels: vec!["x1".into(), "x2".into()],
            input_labels: vec!["u".into()],
            output_labels: vec!["x1".into(), "x2".into()],
            hook: None,
        };
        let res_at = |dt: f64| {
            let cfg = SimConfig {
                method: Method::Rk4,
                dt,
                t_end: 1.0,
            };
            let tr = simulate(
                &ss,
                &[InputSignal::Step { value: 1.0, at: 0.0 }],
                &[0.0, 0.0],
                &cfg,
            )
            .unwrap();
            power_balance_residual(&tr)
        };
        let r1 = res_at(4e-3);
        let r2 = res_at(2e-3);
        let r3 = res_at(1e-3);
        assert!(r1 / r2 >= 3.5, "first halving ratio {}", r1 / r2);
        assert!(r2 / r3 >= 3.5, "second halving ratio {}", r2 / r3);
    }

    #[test]
    fn divergent_model_reports_non_finite_state() {
        let ss = PogStateSpace {
            l: dmatrix![1.0],
            a: dmatrix![500.0],
            b: dmatrix![0.0],
            c: dmatrix![1.0],
            d: dmatrix![0.0],
            state_labels: vec!["x".into()],
            input_labels: vec!["u".into()],
            output_labels: vec!["x".into()],
            hook: None,
        };
        let cfg = SimConfig {
            method: Method::Rk4,
            dt: 1.0,
            t_end: 100.0,
        };
        let err = simulate(&ss, &[InputSignal::Const(0.0)], &[1.0], &cfg).unwrap_err();
        assert!(matches!(err, SimError::NonFiniteState { .. }));
    }

    #[test]
    fn csv_layout_has_expected_header_and_rows() {
        let ss = first_order_decay();
        let cfg = SimConfig {
            method: Method::Rk4,
            dt: 0.5,
            t_end: 1.0,
        };
        let tr = simulate(&ss, &[InputSignal::Const(0.0)], &[1.0], &cfg).unwrap();
        let csv = write_csv(&tr);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x,x,E_s,balance_residual");
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn sample_signal_interpolates_linearly() {
        let s = InputSignal::Samples {
            times: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 2.0, 0.0],
        };
        assert_eq!(s.at(-1.0), 0.0);
        assert_eq!(s.at(0.5), 1.0);
        assert_eq!(s.at(1.5), 1.0);
        assert_eq!(s.at(5.0), 0.0);
    }
}
