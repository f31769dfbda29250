//! State-space emission.  Two independent routes produce the model
//! `L·dx/dt = A·x + B·u`, `y = C·x + D·u`:
//!
//! * [`extract_state_space`] walks the assembled block scheme and expands
//!   every integrator input and output signal into an affine combination of
//!   states and inputs;
//! * [`assemble_direct`] computes the same matrices straight from the
//!   linearized chain, without ever building the signal graph.
//!
//! Agreement of the two routes is used as a structural self-check.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::expr::{Expr, SymMatrix, UnboundParam};
use crate::netlist::{Netlist, SourceKind, StorageKind};
use crate::pogir::{
    self, Caps, Dir, ItemConfig, Producer, Scheme, SchemeError,
};
use crate::topology::{ChainEnd, ChainItem, SPChain, SPTree};

/// Symbolic state-space model.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceSym {
    pub l: SymMatrix,
    pub a: SymMatrix,
    pub b: SymMatrix,
    pub c: SymMatrix,
    pub d: SymMatrix,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
}

impl StateSpaceSym {
    pub fn nx(&self) -> usize {
        self.state_labels.len()
    }

    pub fn nu(&self) -> usize {
        self.input_labels.len()
    }

    pub fn ny(&self) -> usize {
        self.output_labels.len()
    }

    /// Bind every parameter and produce a numeric model.
    pub fn eval(&self, params: &HashMap<String, f64>) -> Result<PogStateSpace, UnboundParam> {
        let lookup = |name: &str| params.get(name).copied();
        Ok(PogStateSpace {
            l: self.l.eval(&lookup)?,
            a: self.a.eval(&lookup)?,
            b: self.b.eval(&lookup)?,
            c: self.c.eval(&lookup)?,
            d: self.d.eval(&lookup)?,
            state_labels: self.state_labels.clone(),
            input_labels: self.input_labels.clone(),
            output_labels: self.output_labels.clone(),
            hook: None,
        })
    }

    /// Names of all parameters appearing in the matrices.
    pub fn params(&self) -> Vec<String> {
        let mut names: Vec<String> = [&self.l, &self.a, &self.b, &self.c, &self.d]
            .iter()
            .flat_map(|m| m.params())
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

/// How a hook's bound variable evolves during simulation.
#[derive(Clone, Debug, PartialEq)]
pub enum HookBinding {
    /// The variable follows `start + rate * t`.
    Time { start: f64, rate: f64 },
    /// The variable tracks a state component.
    State { index: usize },
}

/// Dynamics-matrix hook: `A` is re-evaluated with one extra scalar binding
/// (a time-linear angle, or a state component) at every integration stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Hook {
    /// Name of the bound variable inside `a`.
    pub var: String,
    pub binding: HookBinding,
    /// Symbolic dynamics matrix, depending on `var` and on `params`.
    pub a: SymMatrix,
    pub params: HashMap<String, f64>,
}

impl Hook {
    pub fn var_at(&self, t: f64, x: &[f64]) -> f64 {
        match self.binding {
            HookBinding::Time { start, rate } => start + rate * t,
            HookBinding::State { index } => x[index],
        }
    }

    pub fn a_at(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, UnboundParam> {
        let v = self.var_at(t, x);
        let lookup = |name: &str| {
            if name == self.var {
                Some(v)
            } else {
                self.params.get(name).copied()
            }
        };
        self.a.eval(&lookup)
    }
}

/// Numeric state-space model, optionally with a dynamics hook.
#[derive(Clone, Debug, PartialEq)]
pub struct PogStateSpace {
    pub l: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    pub hook: Option<Hook>,
}

/// Numeric model failure.
#[derive(Clone, Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("energy matrix is numerically singular (condition number {0:.3e})")]
    SingularEnergyMatrix(f64),
    #[error("matrix inversion failed")]
    Inversion,
    #[error(transparent)]
    UnboundParam(#[from] UnboundParam),
}

/// Condition-number threshold beyond which the energy matrix is treated as
/// singular and a reduction must be applied first.
pub const ENERGY_COND_LIMIT: f64 = 1e12;

impl PogStateSpace {
    pub fn nx(&self) -> usize {
        self.l.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    /// Dynamics matrix at time `t` and state `x` (hook-aware).
    pub fn a_at(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        match &self.hook {
            Some(h) => Ok(h.a_at(t, x)?),
            None => Ok(self.a.clone()),
        }
    }

    pub fn condition_of_l(&self) -> f64 {
        let sv = self.l.clone().singular_values();
        let max = sv.iter().cloned().fold(0.0f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Classical form `dx/dt = Abar x + Bbar u` with `Abar = L^-1 A`,
    /// `Bbar = L^-1 B` (solved through a factorization of `L`).
    pub fn to_classical(&self) -> Result<ClassicalStateSpace, ModelError> {
        let cond = self.condition_of_l();
        if !(cond < ENERGY_COND_LIMIT) {
            return Err(ModelError::SingularEnergyMatrix(cond));
        }
        let lu = self.l.clone().lu();
        let a_bar = lu.solve(&self.a).ok_or(ModelError::Inversion)?;
        let b_bar = lu.solve(&self.b).ok_or(ModelError::Inversion)?;
        Ok(ClassicalStateSpace {
            a_bar,
            b_bar,
            c: self.c.clone(),
            d: self.d.clone(),
            state_labels: self.state_labels.clone(),
            input_labels: self.input_labels.clone(),
            output_labels: self.output_labels.clone(),
        })
    }

    /// Transfer matrix `H(s) = C (L s - A)^-1 B + D`.
    pub fn transfer_at(&self, s: Complex64) -> Result<DMatrix<Complex64>, ModelError> {
        let n = self.nx();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(self.l[(i, j)], 0.0) * s
                    - Complex64::new(self.a[(i, j)], 0.0);
            }
        }
        let minv = m.try_inverse().ok_or(ModelError::Inversion)?;
        let to_c = |r: &DMatrix<f64>| r.map(|v| Complex64::new(v, 0.0));
        Ok(&to_c(&self.c) * &minv * &to_c(&self.b) + to_c(&self.d))
    }

    /// Stored energy `1/2 x^T L x`.
    pub fn stored_energy(&self, x: &[f64]) -> f64 {
        let xv = DMatrix::from_column_slice(x.len(), 1, x);
        0.5 * (xv.transpose() * &self.l * &xv)[(0, 0)]
    }

    /// Net power entering the storages: `x^T A x + x^T B u` (only the
    /// symmetric part of `A` contributes to the first term).
    pub fn absorbed_power(&self, t: f64, x: &[f64], u: &[f64]) -> Result<f64, ModelError> {
        let xv = DMatrix::from_column_slice(x.len(), 1, x);
        let uv = DMatrix::from_column_slice(u.len(), 1, u);
        let a = self.a_at(t, x)?;
        Ok((xv.transpose() * a * &xv)[(0, 0)] + (xv.transpose() * &self.b * &uv)[(0, 0)])
    }

    /// Power supplied through the input ports: `x^T B u`.
    pub fn supplied_power(&self, x: &[f64], u: &[f64]) -> f64 {
        let xv = DMatrix::from_column_slice(x.len(), 1, x);
        let uv = DMatrix::from_column_slice(u.len(), 1, u);
        (xv.transpose() * &self.b * &uv)[(0, 0)]
    }

    /// Symmetry defect and smallest eigenvalue of the energy matrix.
    pub fn energy_matrix_report(&self) -> (f64, f64) {
        let sym_err = (&self.l - self.l.transpose()).abs().max();
        let eig = self.l.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        (sym_err, min_eig)
    }
}

/// Model in classical form `dx/dt = Abar x + Bbar u`, defined only when
/// the energy matrix is nonsingular.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalStateSpace {
    pub a_bar: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
}

impl ClassicalStateSpace {
    /// Transfer matrix `H(s) = C (sI - Abar)^-1 Bbar + D`.
    pub fn transfer_at(&self, s: Complex64) -> Result<DMatrix<Complex64>, ModelError> {
        let n = self.a_bar.nrows();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let eye = if i == j { 1.0 } else { 0.0 };
                m[(i, j)] = s * eye - Complex64::new(self.a_bar[(i, j)], 0.0);
            }
        }
        let minv = m.try_inverse().ok_or(ModelError::Inversion)?;
        let to_c = |r: &DMatrix<f64>| r.map(|v| Complex64::new(v, 0.0));
        Ok(&to_c(&self.c) * &minv * &to_c(&self.b_bar) + to_c(&self.d))
    }
}

/// Change of state basis on the classical form, `x = T(t) z`:
/// `At = T^-1 [Abar T - Tdot]`, `Bt = T^-1 Bbar`, `Ct = C T`.
pub fn similitude_transform(
    cs: &ClassicalStateSpace,
    t_mat: &DMatrix<f64>,
    t_dot: &DMatrix<f64>,
) -> Result<ClassicalStateSpace, ModelError> {
    let tinv = t_mat.clone().try_inverse().ok_or(ModelError::Inversion)?;
    Ok(ClassicalStateSpace {
        a_bar: &tinv * (&cs.a_bar * t_mat - t_dot),
        b_bar: &tinv * &cs.b_bar,
        c: &cs.c * t_mat,
        d: cs.d.clone(),
        state_labels: cs.state_labels.clone(),
        input_labels: cs.input_labels.clone(),
        output_labels: cs.output_labels.clone(),
    })
}

/// Extraction failure: a cycle of static blocks.
#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("algebraic loop: {0}")]
    AlgebraicLoop(String),
}

#[derive(Clone, Debug)]
struct Affine {
    x: Vec<Expr>,
    u: Vec<Expr>,
}

impl Affine {
    fn zero(nx: usize, nu: usize) -> Affine {
        Affine {
            x: vec![Expr::zero(); nx],
            u: vec![Expr::zero(); nu],
        }
    }

    fn unit_x(i: usize, nx: usize, nu: usize) -> Affine {
        let mut a = Affine::zero(nx, nu);
        a.x[i] = Expr::one();
        a
    }

    fn unit_u(j: usize, nx: usize, nu: usize) -> Affine {
        let mut a = Affine::zero(nx, nu);
        a.u[j] = Expr::one();
        a
    }

    fn add_scaled(&mut self, other: &Affine, sign: f64) {
        for (t, o) in self.x.iter_mut().zip(&other.x) {
            *t = t.add(&o.scale(sign));
        }
        for (t, o) in self.u.iter_mut().zip(&other.u) {
            *t = t.add(&o.scale(sign));
        }
    }

    fn scaled(&self, g: &Expr) -> Affine {
        Affine {
            x: self.x.iter().map(|e| g.mul(e)).collect(),
            u: self.u.iter().map(|e| g.mul(e)).collect(),
        }
    }
}

/// Expand the block scheme into symbolic state-space matrices.
pub fn extract_state_space(scheme: &Scheme) -> Result<StateSpaceSym, ExtractError> {
    let nx = scheme.state_labels.len();
    let nu = scheme.input_labels.len();
    let nsig = scheme.signals.len();

    let mut memo: Vec<Option<Affine>> = vec![None; nsig];
    let mut visiting = vec![false; nsig];

    fn resolve(
        sig: usize,
        scheme: &Scheme,
        nx: usize,
        nu: usize,
        memo: &mut Vec<Option<Affine>>,
        visiting: &mut Vec<bool>,
    ) -> Result<Affine, ExtractError> {
        if let Some(a) = &memo[sig] {
            return Ok(a.clone());
        }
        if visiting[sig] {
            return Err(ExtractError::AlgebraicLoop(format!(
                "signal `{}` depends on itself through static blocks only",
                scheme.labels[sig]
            )));
        }
        visiting[sig] = true;
        let result = match &scheme.signals[sig] {
            Producer::Input(j) => Affine::unit_u(*j, nx, nu),
            Producer::State(i) => Affine::unit_x(*i, nx, nu),
            Producer::Zero => Affine::zero(nx, nu),
            Producer::Sum(terms) => {
                let mut acc = Affine::zero(nx, nu);
                for &(src, sign) in terms {
                    let part = resolve(src, scheme, nx, nu, memo, visiting)?;
                    acc.add_scaled(&part, f64::from(sign));
                }
                acc
            }
            Producer::Gain(src, g) => {
                let part = resolve(*src, scheme, nx, nu, memo, visiting)?;
                part.scaled(g)
            }
            Producer::Pending => unreachable!("scheme under construction"),
        };
        visiting[sig] = false;
        memo[sig] = Some(result.clone());
        Ok(result)
    }

    let mut l = SymMatrix::zeros(nx, nx);
    let mut a = SymMatrix::zeros(nx, nx);
    let mut b = SymMatrix::zeros(nx, nu);
    for ig in &scheme.integrators {
        *l.get_mut(ig.state, ig.state) = ig.coeff.clone();
        let row = resolve(ig.input, scheme, nx, nu, &mut memo, &mut visiting)?;
        for (j, e) in row.x.into_iter().enumerate() {
            *a.get_mut(ig.state, j) = e;
        }
        for (j, e) in row.u.into_iter().enumerate() {
            *b.get_mut(ig.state, j) = e;
        }
    }

    let ny = scheme.outputs.len();
    let mut c = SymMatrix::zeros(ny, nx);
    let mut d = SymMatrix::zeros(ny, nu);
    let mut output_labels = Vec::with_capacity(ny);
    for (r, (label, sig)) in scheme.outputs.iter().enumerate() {
        output_labels.push(label.clone());
        let row = resolve(*sig, scheme, nx, nu, &mut memo, &mut visiting)?;
        for (j, e) in row.x.into_iter().enumerate() {
            *c.get_mut(r, j) = e;
        }
        for (j, e) in row.u.into_iter().enumerate() {
            *d.get_mut(r, j) = e;
        }
    }

    Ok(StateSpaceSym {
        l,
        a,
        b,
        c,
        d,
        state_labels: scheme.state_labels.clone(),
        input_labels: scheme.input_labels.clone(),
        output_labels,
    })
}

/// Flip the declared positive direction of states, inputs, and outputs per
/// the netlist's `dir` records.  Flipping a state negates its row and
/// column in `A`, its row in `B`, and its column in `C`; the energy matrix
/// is unchanged.  Flipping an input or a non-state output negates the
/// corresponding column or row.
pub fn apply_orientation(ss: &mut StateSpaceSym, net: &Netlist) {
    let nx = ss.nx();
    let nu = ss.nu();
    let ny = ss.ny();
    for i in 0..nx {
        if net.flipped(&ss.state_labels[i]) {
            for j in 0..nx {
                *ss.a.get_mut(i, j) = ss.a.get(i, j).neg();
            }
            for r in 0..nx {
                *ss.a.get_mut(r, i) = ss.a.get(r, i).neg();
            }
            for j in 0..nu {
                *ss.b.get_mut(i, j) = ss.b.get(i, j).neg();
            }
            for r in 0..ny {
                *ss.c.get_mut(r, i) = ss.c.get(r, i).neg();
            }
        }
    }
    for j in 0..nu {
        if net.flipped(&ss.input_labels[j]) {
            for i in 0..nx {
                *ss.b.get_mut(i, j) = ss.b.get(i, j).neg();
            }
            for r in 0..ny {
                *ss.d.get_mut(r, j) = ss.d.get(r, j).neg();
            }
        }
    }
    for r in 0..ny {
        let label = ss.output_labels[r].clone();
        if net.flipped(&label) && !ss.state_labels.contains(&label) {
            for i in 0..nx {
                *ss.c.get_mut(r, i) = ss.c.get(r, i).neg();
            }
            for j in 0..nu {
                *ss.d.get_mut(r, j) = ss.d.get(r, j).neg();
            }
        }
    }
}

/// Full pipeline: netlist to oriented symbolic model via the block scheme.
pub fn derive_model(net: &Netlist) -> Result<StateSpaceSym, DeriveError> {
    let chain = crate::topology::extract_chain(net)?;
    let scheme = pogir::build_scheme(net, &chain)?;
    let loops = pogir::algebraic_loops(&scheme);
    if let Some(l) = loops.first() {
        return Err(ExtractError::AlgebraicLoop(l.describe(&scheme)).into());
    }
    let mut ss = extract_state_space(&scheme)?;
    apply_orientation(&mut ss, net);
    Ok(ss)
}

/// Error from the netlist-to-model pipeline.
#[derive(Clone, Debug, thiserror::Error, PartialEq)]
pub enum DeriveError {
    #[error(transparent)]
    Topology(#[from] crate::topology::TopologyError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

// ---------------------------------------------------------------------------
// Direct assembly (oracle path)
// ---------------------------------------------------------------------------

/// Failure of the direct-assembly route.
#[derive(Clone, Debug, thiserror::Error, PartialEq)]
pub enum AssembleError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("algebraic loop: {0}")]
    AlgebraicLoop(String),
    #[error("direct assembly does not support output `{0}`")]
    UnsupportedOutput(String),
}

/// One-port response relative to the port signal it consumes:
/// `value = gain * port + sum(coeff_i * x_i)`.
#[derive(Clone, Debug)]
struct PortAffine {
    gain: Expr,
    states: Vec<(usize, Expr)>,
}

impl PortAffine {
    fn state(i: usize) -> PortAffine {
        PortAffine {
            gain: Expr::zero(),
            states: vec![(i, Expr::one())],
        }
    }

    fn pure_gain(g: Expr) -> PortAffine {
        PortAffine {
            gain: g,
            states: Vec::new(),
        }
    }

    fn add_states(&mut self, other: &[(usize, Expr)], sign: f64) {
        for (i, e) in other {
            match self.states.iter_mut().find(|(j, _)| j == i) {
                Some((_, acc)) => *acc = acc.add(&e.scale(sign)),
                None => self.states.push((*i, e.scale(sign))),
            }
        }
    }

    /// Compose with the resolved affine value of the port signal.
    fn close(&self, port: &Affine, nx: usize, nu: usize) -> Affine {
        let mut out = if self.gain.is_zero() {
            Affine::zero(nx, nu)
        } else {
            port.scaled(&self.gain)
        };
        for (i, e) in &self.states {
            out.x[*i] = out.x[*i].add(e);
        }
        out
    }
}

fn y_gain_of(net: &Netlist, elem: usize) -> Expr {
    let e = &net.elements[elem];
    if e.etype.static_gain_is_conductance() {
        Expr::param(&e.name)
    } else {
        Expr::recip_param(&e.name)
    }
}

fn z_gain_of(net: &Netlist, elem: usize) -> Expr {
    let e = &net.elements[elem];
    if e.etype.static_gain_is_conductance() {
        Expr::recip_param(&e.name)
    } else {
        Expr::param(&e.name)
    }
}

fn energy_coeff_of(net: &Netlist, elem: usize) -> Expr {
    let e = &net.elements[elem];
    if e.etype.coefficient_is_stiffness() {
        Expr::recip_param(&e.name)
    } else {
        Expr::param(&e.name)
    }
}

/// Per-leaf integrator feeds, relative to the tree's port signal.
type TreeDerivs = Vec<(usize, PortAffine)>;

/// Compose a port-relative affine with the port-relative affine of the
/// signal it actually consumes.
fn chain_port(inner: &PortAffine, input: &PortAffine) -> PortAffine {
    let mut out = PortAffine {
        gain: inner.gain.mul(&input.gain),
        states: input
            .states
            .iter()
            .map(|(i, e)| (i, inner.gain.mul(e)))
            .map(|(i, e)| (*i, e))
            .collect(),
    };
    out.add_states(&inner.states, 1.0);
    out
}

struct TreeCtx<'a> {
    net: &'a Netlist,
    state_idx: &'a HashMap<usize, usize>,
}

impl<'a> TreeCtx<'a> {
    /// Tree consuming an across signal, producing its through.
    fn tree_y(&self, tree: &SPTree) -> Result<(PortAffine, TreeDerivs), AssembleError> {
        match tree {
            SPTree::Leaf(i) => match self.net.elements[*i].storage_kind() {
                StorageKind::Static => Ok((PortAffine::pure_gain(y_gain_of(self.net, *i)), vec![])),
                StorageKind::ThroughDynamic => {
                    let s = self.state_idx[i];
                    Ok((
                        PortAffine::state(s),
                        vec![(s, PortAffine::pure_gain(Expr::one()))],
                    ))
                }
                StorageKind::AcrossDynamic => Err(AssembleError::AlgebraicLoop(format!(
                    "element `{}` cannot produce the through",
                    self.net.elements[*i].name
                ))),
            },
            SPTree::Parallel(cs) => {
                let mut out = PortAffine::pure_gain(Expr::zero());
                let mut derivs = Vec::new();
                for c in cs {
                    let (o, mut d) = self.tree_y(c)?;
                    out.gain = out.gain.add(&o.gain);
                    out.add_states(&o.states, 1.0);
                    derivs.append(&mut d);
                }
                Ok((out, derivs))
            }
            SPTree::Series(cs) => {
                let caps: Vec<Caps> = cs.iter().map(|c| pogir::capabilities(c, self.net)).collect();
                let driver = caps
                    .iter()
                    .position(|c| c.y && !c.z)
                    .or_else(|| caps.iter().position(|c| c.y))
                    .ok_or_else(|| {
                        AssembleError::AlgebraicLoop(format!(
                            "series group {} cannot produce its through",
                            tree.describe(self.net)
                        ))
                    })?;
                let (d_out, d_derivs) = self.tree_y(&cs[driver])?;
                let mut beta = Expr::zero();
                let mut s_o: Vec<(usize, Expr)> = Vec::new();
                let mut o_parts = Vec::new();
                for (k, c) in cs.iter().enumerate() {
                    if k == driver {
                        continue;
                    }
                    let (o, derivs) = self.tree_z(c)?;
                    beta = beta.add(&o.gain);
                    let mut tmp = PortAffine::pure_gain(Expr::zero());
                    tmp.add_states(&o.states, 1.0);
                    s_o.extend(tmp.states);
                    o_parts.push(derivs);
                }
                let alpha = d_out.gain.clone();
                if !alpha.is_zero() && !beta.is_zero() {
                    return Err(AssembleError::AlgebraicLoop(format!(
                        "series group {} closes a static loop",
                        tree.describe(self.net)
                    )));
                }
                // Common through of the group.
                let i_out = if alpha.is_zero() {
                    let mut o = PortAffine::pure_gain(Expr::zero());
                    o.add_states(&d_out.states, 1.0);
                    o
                } else {
                    let mut o = PortAffine::pure_gain(alpha.clone());
                    o.add_states(&s_o, -1.0);
                    o.states = o
                        .states
                        .iter()
                        .map(|(i, e)| (*i, alpha.mul(e)))
                        .collect();
                    o.add_states(&d_out.states, 1.0);
                    o
                };
                // Residual across seen by the driver.
                let mut v_driver = PortAffine::pure_gain(Expr::one());
                if !beta.is_zero() {
                    let scaled = PortAffine {
                        gain: beta.mul(&i_out.gain),
                        states: i_out.states.iter().map(|(i, e)| (*i, beta.mul(e))).collect(),
                    };
                    v_driver.gain = v_driver.gain.sub(&scaled.gain);
                    v_driver.add_states(&scaled.states, -1.0);
                }
                let mut s_o_port = PortAffine::pure_gain(Expr::zero());
                s_o_port.add_states(&s_o, 1.0);
                v_driver.add_states(&s_o_port.states, -1.0);

                let mut derivs = Vec::new();
                for (s, rel) in d_derivs {
                    derivs.push((s, chain_port(&rel, &v_driver)));
                }
                for part in o_parts {
                    for (s, rel) in part {
                        derivs.push((s, chain_port(&rel, &i_out)));
                    }
                }
                Ok((i_out, derivs))
            }
        }
    }

    /// Tree consuming a through signal, producing its across.
    fn tree_z(&self, tree: &SPTree) -> Result<(PortAffine, TreeDerivs), AssembleError> {
        match tree {
            SPTree::Leaf(i) => match self.net.elements[*i].storage_kind() {
                StorageKind::Static => Ok((PortAffine::pure_gain(z_gain_of(self.net, *i)), vec![])),
                StorageKind::AcrossDynamic => {
                    let s = self.state_idx[i];
                    Ok((
                        PortAffine::state(s),
                        vec![(s, PortAffine::pure_gain(Expr::one()))],
                    ))
                }
                StorageKind::ThroughDynamic => Err(AssembleError::AlgebraicLoop(format!(
                    "element `{}` cannot produce the across",
                    self.net.elements[*i].name
                ))),
            },
            SPTree::Series(cs) => {
                let mut out = PortAffine::pure_gain(Expr::zero());
                let mut derivs = Vec::new();
                for c in cs {
                    let (o, mut d) = self.tree_z(c)?;
                    out.gain = out.gain.add(&o.gain);
                    out.add_states(&o.states, 1.0);
                    derivs.append(&mut d);
                }
                Ok((out, derivs))
            }
            SPTree::Parallel(cs) => {
                let caps: Vec<Caps> = cs.iter().map(|c| pogir::capabilities(c, self.net)).collect();
                let driver = caps
                    .iter()
                    .position(|c| c.z && !c.y)
                    .or_else(|| caps.iter().position(|c| c.z))
                    .ok_or_else(|| {
                        AssembleError::AlgebraicLoop(format!(
                            "shunt group {} cannot produce its across",
                            tree.describe(self.net)
                        ))
                    })?;
                let (d_out, d_derivs) = self.tree_z(&cs[driver])?;
                let mut beta = Expr::zero();
                let mut s_o: Vec<(usize, Expr)> = Vec::new();
                let mut o_parts = Vec::new();
                for (k, c) in cs.iter().enumerate() {
                    if k == driver {
                        continue;
                    }
                    let (o, derivs) = self.tree_y(c)?;
                    beta = beta.add(&o.gain);
                    let mut tmp = PortAffine::pure_gain(Expr::zero());
                    tmp.add_states(&o.states, 1.0);
                    s_o.extend(tmp.states);
                    o_parts.push(derivs);
                }
                let alpha = d_out.gain.clone();
                if !alpha.is_zero() && !beta.is_zero() {
                    return Err(AssembleError::AlgebraicLoop(format!(
                        "shunt group {} closes a static loop",
                        tree.describe(self.net)
                    )));
                }
                let v_out = if alpha.is_zero() {
                    let mut o = PortAffine::pure_gain(Expr::zero());
                    o.add_states(&d_out.states, 1.0);
                    o
                } else {
                    let mut o = PortAffine::pure_gain(alpha.clone());
                    o.add_states(&s_o, -1.0);
                    o.states = o
                        .states
                        .iter()
                        .map(|(i, e)| (*i, alpha.mul(e)))
                        .collect();
                    o.add_states(&d_out.states, 1.0);
                    o
                };
                let mut i_driver = PortAffine::pure_gain(Expr::one());
                if !beta.is_zero() {
                    let scaled = PortAffine {
                        gain: beta.mul(&v_out.gain),
                        states: v_out.states.iter().map(|(i, e)| (*i, beta.mul(e))).collect(),
                    };
                    i_driver.gain = i_driver.gain.sub(&scaled.gain);
                    i_driver.add_states(&scaled.states, -1.0);
                }
                let mut s_o_port = PortAffine::pure_gain(Expr::zero());
                s_o_port.add_states(&s_o, 1.0);
                i_driver.add_states(&s_o_port.states, -1.0);

                let mut derivs = Vec::new();
                for (s, rel) in d_derivs {
                    derivs.push((s, chain_port(&rel, &i_driver)));
                }
                for part in o_parts {
                    for (s, rel) in part {
                        derivs.push((s, chain_port(&rel, &v_out)));
                    }
                }
                Ok((v_out, derivs))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum SecSig {
    Across(usize),
    Through(usize),
}

struct Asm<'a> {
    net: &'a Netlist,
    chain: &'a SPChain,
    configs: &'a [ItemConfig],
    dirs: &'a [Dir],
    tree_ctx: TreeCtx<'a>,
    nx: usize,
    nu: usize,
    memo: HashMap<SecSig, Affine>,
    visiting: Vec<SecSig>,
    left_input: Option<usize>,
    right_input: Option<usize>,
}

impl<'a> Asm<'a> {
    fn item_tree(&self, j: usize) -> &'a SPTree {
        match &self.chain.items[j] {
            ChainItem::Series { tree, .. } | ChainItem::Parallel { tree, .. } => tree,
            ChainItem::Coupling { .. } => unreachable!("coupling has no tree"),
        }
    }

    fn coupling_ratio(&self, j: usize) -> (Expr, Expr) {
        match &self.chain.items[j] {
            ChainItem::Coupling { index } => {
                let name = &self.net.couplings[*index].name;
                (Expr::param(name), Expr::recip_param(name))
            }
            _ => unreachable!("item is not a coupling"),
        }
    }

    fn get(&mut self, key: SecSig) -> Result<Affine, AssembleError> {
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if self.visiting.contains(&key) {
            return Err(AssembleError::AlgebraicLoop(format!(
                "section signal {key:?} depends on itself through static blocks only"
            )));
        }
        self.visiting.push(key);
        let value = self.compute(key);
        self.visiting.pop();
        let value = value?;
        self.memo.insert(key, value.clone());
        Ok(value)
    }

    fn close_tree(&mut self, port: &PortAffine, input: SecSig) -> Result<Affine, AssembleError> {
        if port.gain.is_zero() {
            let mut out = Affine::zero(self.nx, self.nu);
            for (i, e) in &port.states {
                out.x[*i] = out.x[*i].add(e);
            }
            Ok(out)
        } else {
            let in_aff = self.get(input)?;
            Ok(port.close(&in_aff, self.nx, self.nu))
        }
    }

    fn compute(&mut self, key: SecSig) -> Result<Affine, AssembleError> {
        let n = self.chain.items.len();
        match key {
            SecSig::Across(k) => {
                if self.dirs[k] == Dir::R {
                    if k == 0 {
                        return Ok(Affine::unit_u(
                            self.left_input.expect("left across source"),
                            self.nx,
                            self.nu,
                        ));
                    }
                    let j = k - 1;
                    match self.configs[j] {
                        ItemConfig::SeriesZRight => {
                            let (z, _) = self.tree_ctx.tree_z(self.item_tree(j))?;
                            let drop = self.close_tree(&z, SecSig::Through(j + 1))?;
                            let mut out = self.get(SecSig::Across(j))?;
                            out.add_scaled(&drop, -1.0);
                            Ok(out)
                        }
                        ItemConfig::ParallelZ => self.parallel_z(j),
                        ItemConfig::ParallelYRight => self.get(SecSig::Across(j)),
                        ItemConfig::CouplingRR => {
                            let (_, inv) = self.coupling_ratio(j);
                            Ok(self.get(SecSig::Across(j))?.scaled(&inv))
                        }
                        ItemConfig::CouplingLR => {
                            let (_, inv) = self.coupling_ratio(j);
                            Ok(self.get(SecSig::Through(j))?.scaled(&inv))
                        }
                        cfg => unreachable!("config {cfg:?} does not feed a rightward across"),
                    }
                } else {
                    if k == n {
                        return match &self.chain.right {
                            ChainEnd::AcrossSource(_) => Ok(Affine::unit_u(
                                self.right_input.expect("right across source"),
                                self.nx,
                                self.nu,
                            )),
                            ChainEnd::Short => Ok(Affine::zero(self.nx, self.nu)),
                            end => unreachable!("leftward across at right end {end:?}"),
                        };
                    }
                    let j = k;
                    match self.configs[j] {
                        ItemConfig::SeriesZLeft => {
                            let (z, _) = self.tree_ctx.tree_z(self.item_tree(j))?;
                            let drop = self.close_tree(&z, SecSig::Through(j))?;
                            let mut out = self.get(SecSig::Across(j + 1))?;
                            out.add_scaled(&drop, 1.0);
                            Ok(out)
                        }
                        ItemConfig::ParallelZ => self.parallel_z(j),
                        ItemConfig::ParallelYLeft => self.get(SecSig::Across(j + 1)),
                        ItemConfig::CouplingLL => {
                            let (ratio, _) = self.coupling_ratio(j);
                            Ok(self.get(SecSig::Across(j + 1))?.scaled(&ratio))
                        }
                        ItemConfig::CouplingLR => {
                            let (_, inv) = self.coupling_ratio(j);
                            Ok(self.get(SecSig::Through(j + 1))?.scaled(&inv))
                        }
                        cfg => unreachable!("config {cfg:?} does not feed a leftward across"),
                    }
                }
            }
            SecSig::Through(k) => {
                if self.dirs[k] == Dir::R {
                    // Through travels leftward: produced by the right side.
                    if k == n {
                        return match &self.chain.right {
                            ChainEnd::ThroughSource(_) => Ok(Affine::unit_u(
                                self.right_input.expect("right through source"),
                                self.nx,
                                self.nu,
                            )),
                            ChainEnd::Open => Ok(Affine::zero(self.nx, self.nu)),
                            end => unreachable!("leftward through at right end {end:?}"),
                        };
                    }
                    let j = k;
                    match self.configs[j] {
                        ItemConfig::SeriesY => self.series_y(j),
                        ItemConfig::SeriesZRight => self.get(SecSig::Through(j + 1)),
                        ItemConfig::ParallelYRight => {
                            let (y, _) = self.tree_ctx.tree_y(self.item_tree(j))?;
                            let drain = self.close_tree(&y, SecSig::Across(j))?;
                            let mut out = self.get(SecSig::Through(j + 1))?;
                            out.add_scaled(&drain, 1.0);
                            Ok(out)
                        }
                        ItemConfig::CouplingRR => {
                            let (_, inv) = self.coupling_ratio(j);
                            Ok(self.get(SecSig::Through(j + 1))?.scaled(&inv))
                        }
                        ItemConfig::CouplingRL => {
                            let (ratio, _) = self.coupling_ratio(j);
                            Ok(self.get(SecSig::Across(j + 1))?.scaled(&ratio))
                        }
                        cfg => unreachable!("config {cfg:?} does not feed a leftward through"),
                    }
                } else {
                    // Through travels rightward: produced by the left side.
                    if k == 0 {
                        return Ok(Affine::unit_u(
                            self.left_input.expect("left through source"),
                            self.nx,
                            self.nu,
                        ));
                    }
                    let j = k - 1;
                    match self.configs[j] {
                        ItemConfig::SeriesY => self.series_y(j),
                        ItemConfig::SeriesZLeft => self.get(SecSig::Through(j)),
                        ItemConfig::ParallelYLeft => {
                            let (y, _) = self.tree_ctx.tree_y(self.item_tree(j))?;
                            let drain = self.close_tree(&y, SecSig::Across(j + 1))?;
                            let mut out = self.get(SecSig::Through(j))?;
                            out.add_scaled(&drain, -1.0);
                            Ok(out)
                        }
                        ItemConfig::CouplingLL => {
                            let (ratio, _) = self.coupling_ratio(j);
                            Ok(self.get(SecSig::Through(j))?.scaled(&ratio))
                        }
                        ItemConfig::CouplingRL => {
                            let (ratio, _) = self.coupling_ratio(j);
                            Ok(self.get(SecSig::Across(j))?.scaled(&ratio))
                        }
                        cfg => unreachable!("config {cfg:?} does not feed a rightward through"),
                    }
                }
            }
        }
    }

    /// Through produced by a series group driven by its across drop.
    fn series_y(&mut self, j: usize) -> Result<Affine, AssembleError> {
        let (y, _) = self.tree_ctx.tree_y(self.item_tree(j))?;
        if y.gain.is_zero() {
            self.close_tree(&y, SecSig::Across(j))
        } else {
            let left = self.get(SecSig::Across(j))?;
            let right = self.get(SecSig::Across(j + 1))?;
            let mut drop = left;
            drop.add_scaled(&right, -1.0);
            Ok(y.close(&drop, self.nx, self.nu))
        }
    }

    /// Across produced by a shunt group driven by its through split.
    fn parallel_z(&mut self, j: usize) -> Result<Affine, AssembleError> {
        let (z, _) = self.tree_ctx.tree_z(self.item_tree(j))?;
        if z.gain.is_zero() {
            self.close_tree(&z, SecSig::Through(j))
        } else {
            let left = self.get(SecSig::Through(j))?;
            let right = self.get(SecSig::Through(j + 1))?;
            let mut split = left;
            split.add_scaled(&right, -1.0);
            Ok(z.close(&split, self.nx, self.nu))
        }
    }

    /// Resolved affine of the signal a tree consumes, given its placement.
    fn tree_input(&mut self, j: usize) -> Result<Affine, AssembleError> {
        match self.configs[j] {
            ItemConfig::SeriesY => {
                let left = self.get(SecSig::Across(j))?;
                let right = self.get(SecSig::Across(j + 1))?;
                let mut drop = left;
                drop.add_scaled(&right, -1.0);
                Ok(drop)
            }
            ItemConfig::SeriesZRight => self.get(SecSig::Through(j + 1)),
            ItemConfig::SeriesZLeft => self.get(SecSig::Through(j)),
            ItemConfig::ParallelZ => {
                let left = self.get(SecSig::Through(j))?;
                let right = self.get(SecSig::Through(j + 1))?;
                let mut split = left;
                split.add_scaled(&right, -1.0);
                Ok(split)
            }
            ItemConfig::ParallelYRight => self.get(SecSig::Across(j)),
            ItemConfig::ParallelYLeft => self.get(SecSig::Across(j + 1)),
            cfg => unreachable!("coupling {cfg:?} has no tree"),
        }
    }
}

/// Compute the oriented symbolic model directly from the chain, bypassing
/// the block scheme.
pub fn assemble_direct(net: &Netlist, chain: &SPChain) -> Result<StateSpaceSym, AssembleError> {
    let (dirs, configs) = pogir::assign_directions(net, chain)?;
    let order = pogir::state_elements(net, chain);
    let state_idx: HashMap<usize, usize> =
        order.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    let nx = order.len();
    let state_labels: Vec<String> = order
        .iter()
        .map(|&e| net.elements[e].state_label().expect("dynamic element"))
        .collect();

    // Input slots mirror the scheme: left end first, then right end.
    let mut input_labels = Vec::new();
    let mut left_input = None;
    let mut right_input = None;
    if let ChainEnd::AcrossSource(si) | ChainEnd::ThroughSource(si) = &chain.left {
        left_input = Some(input_labels.len());
        input_labels.push(net.sources[*si].name.clone());
    }
    if let ChainEnd::AcrossSource(si) | ChainEnd::ThroughSource(si) = &chain.right {
        right_input = Some(input_labels.len());
        input_labels.push(net.sources[*si].name.clone());
    }
    let nu = input_labels.len();

    let mut asm = Asm {
        net,
        chain,
        configs: &configs,
        dirs: &dirs,
        tree_ctx: TreeCtx {
            net,
            state_idx: &state_idx,
        },
        nx,
        nu,
        memo: HashMap::new(),
        visiting: Vec::new(),
        left_input,
        right_input,
    };

    // Derivative rows.
    let mut l = SymMatrix::zeros(nx, nx);
    let mut a = SymMatrix::zeros(nx, nx);
    let mut b = SymMatrix::zeros(nx, nu);
    for (j, item) in chain.items.iter().enumerate() {
        let tree = match item {
            ChainItem::Series { tree, .. } | ChainItem::Parallel { tree, .. } => tree,
            ChainItem::Coupling { .. } => continue,
        };
        let derivs = match configs[j] {
            ItemConfig::SeriesY | ItemConfig::ParallelYRight | ItemConfig::ParallelYLeft => {
                asm.tree_ctx.tree_y(tree)?.1
            }
            ItemConfig::SeriesZRight | ItemConfig::SeriesZLeft | ItemConfig::ParallelZ => {
                asm.tree_ctx.tree_z(tree)?.1
            }
            cfg => unreachable!("coupling {cfg:?} has no tree"),
        };
        if derivs.is_empty() {
            continue;
        }
        let input = asm.tree_input(j)?;
        for (s, rel) in derivs {
            let row = rel.close(&input, nx, nu);
            for (col, e) in row.x.into_iter().enumerate() {
                *a.get_mut(s, col) = e;
            }
            for (col, e) in row.u.into_iter().enumerate() {
                *b.get_mut(s, col) = e;
            }
            let elem = order[s];
            *l.get_mut(s, s) = energy_coeff_of(net, elem);
        }
    }

    // Resolve every section signal so static cycles are reported even when
    // nothing downstream demands them.
    for k in 0..=chain.items.len() {
        asm.get(SecSig::Across(k))?;
        asm.get(SecSig::Through(k))?;
    }

    // Outputs: state variables and source conjugates.
    let ny = net.outputs.len();
    let mut c = SymMatrix::zeros(ny, nx);
    let mut d = SymMatrix::zeros(ny, nu);
    let n = chain.items.len();
    for (r, label) in net.outputs.iter().enumerate() {
        let row = if let Some(i) = state_labels.iter().position(|l| l == label) {
            Affine::unit_x(i, nx, nu)
        } else {
            let mut found = None;
            if let ChainEnd::AcrossSource(si) | ChainEnd::ThroughSource(si) = &chain.left {
                let s = &net.sources[*si];
                if &s.conjugate_label() == label {
                    found = Some(match s.kind {
                        SourceKind::Across => asm.get(SecSig::Through(0))?,
                        SourceKind::Through => asm.get(SecSig::Across(0))?,
                    });
                }
            }
            if found.is_none() {
                if let ChainEnd::AcrossSource(si) | ChainEnd::ThroughSource(si) = &chain.right {
                    let s = &net.sources[*si];
                    if &s.conjugate_label() == label {
                        found = Some(match s.kind {
                            SourceKind::Across => asm.get(SecSig::Through(n))?,
                            SourceKind::Through => asm.get(SecSig::Across(n))?,
                        });
                    }
                }
            }
            found.ok_or_else(|| AssembleError::UnsupportedOutput(label.clone()))?
        };
        for (col, e) in row.x.into_iter().enumerate() {
            *c.get_mut(r, col) = e;
        }
        for (col, e) in row.u.into_iter().enumerate() {
            *d.get_mut(r, col) = e;
        }
    }

    let mut ss = StateSpaceSym {
        l,
        a,
        b,
        c,
        d,
        state_labels,
        input_labels,
        output_labels: net.outputs.clone(),
    };
    apply_orientation(&mut ss, net);
    Ok(ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::netlist::parse_netlist;
    use crate::topology::extract_chain;

    const LADDER: &str = "\
src Va across e na gnd const:0
el C1 cap e na n1 1e-3
el L2 ind e n1 gnd 50e-3
el L3 ind e n1 n2 50e-3
el R3 res e n2 n3 1.0
el C4 cap e n3 gnd 1e-3
el R4 res e n3 n4 1.0
src Vb across e n4 gnd const:10
out V_C1
out I_L2
out I_L3
out V_C4
";

    fn sym(rows: &[&[&str]]) -> SymMatrix {
        let nr = rows.len();
        let nc = rows[0].len();
        SymMatrix::from_fn(nr, nc, |i, j| parse_expr(rows[i][j]).unwrap())
    }

    #[test]
    fn ladder_matrices_match_expected() {
        let net = parse_netlist(LADDER).unwrap();
        let ss = derive_model(&net).unwrap();
        assert_eq!(ss.state_labels, vec!["V_C1", "I_L2", "I_L3", "V_C4"]);
        let l_exp = sym(&[
            &["C1", "0", "0", "0"],
            &["0", "L2", "0", "0"],
            &["0", "0", "L3", "0"],
            &["0", "0", "0", "C4"],
        ]);
        let a_exp = sym(&[
            &["0", "1", "1", "0"],
            &["-1", "0", "0", "0"],
            &["-1", "0", "-R3", "-1"],
            &["0", "0", "1", "-1/R4"],
        ]);
        let b_exp = sym(&[
            &["0", "0"],
            &["1", "0"],
            &["1", "0"],
            &["0", "1/R4"],
        ]);
        assert_eq!(ss.l, l_exp);
        assert_eq!(ss.a, a_exp);
        assert_eq!(ss.b, b_exp);
        // Outputs are the four states.
        assert_eq!(ss.c, SymMatrix::identity(4));
        assert!(ss.d.is_zero());
    }

    #[test]
    fn ladder_direct_assembly_agrees() {
        let net = parse_netlist(LADDER).unwrap();
        let chain = extract_chain(&net).unwrap();
        let via_scheme = derive_model(&net).unwrap();
        let direct = assemble_direct(&net, &chain).unwrap();
        assert_eq!(via_scheme, direct);
    }

    #[test]
    fn ladder_steady_state_values() {
        let net = parse_netlist(LADDER).unwrap();
        let ss = derive_model(&net).unwrap();
        let num = ss.eval(&net.default_params()).unwrap();
        // Solve A x = -B u at the declared source levels.
        let u = nalgebra::DVector::from_vec(vec![0.0, 10.0]);
        let rhs = -(&num.b * &u);
        let x = num.a.clone().lu().solve(&rhs).unwrap();
        let expect = [0.0, 5.0, -5.0, 5.0];
        for (got, want) in x.iter().zip(expect) {
            assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
        }
    }

    #[test]
    fn motor_pump_direct_assembly_agrees() {
        let net = parse_netlist(
            "\
src Va across e na gnd step:10@0
el L1 ind e na n1 1e-2
el R1 res e n1 n2 0.5
cb K12 xfmr e(n2,gnd) mr(n3,gnd) 0.2
el J2 inertia mr n3 gnd 1e-3
el b2 rfric mr n3 gnd 0.1
cb K23 gyr mr(n3,gnd) hy(n4,gnd) 2.0
el C3 hcap hy n4 gnd 1e-4
el R3 hres hy n4 gnd 0.05
src Qb through hy n4 gnd const:0
out I_Va
out P_Qb
",
        )
        .unwrap();
        let chain = extract_chain(&net).unwrap();
        let via_scheme = derive_model(&net).unwrap();
        let direct = assemble_direct(&net, &chain).unwrap();
        assert_eq!(via_scheme, direct);
        // Power-oriented structure: L diagonal positive, A splits into a
        // negative-semidefinite symmetric part plus a skew part.
        let num = via_scheme.eval(&net.default_params()).unwrap();
        let (sym_err, min_eig) = num.energy_matrix_report();
        assert!(sym_err == 0.0 && min_eig > 0.0);
        let a_s = (&num.a + num.a.transpose()) * 0.5;
        let eig = a_s.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e <= 1e-12));
    }

    #[test]
    fn nested_group_direct_assembly_agrees() {
        let net = parse_netlist(
            "\
src Pa across hy na gnd const:1
el L1 hind hy na n1 1.0
el R1 hres hy n1 n2 2.0
el C2 hcap hy n2 gnd 3.0
el L3 hind hy n2 n3 4.0
el R5 hres hy n2 n3 5.0
el C4 hcap hy n3 gnd 6.0
el R4 hres hy n3 gnd 7.0
src Qb through hy n3 gnd const:0
out Q_Pa
out P_Qb
",
        )
        .unwrap();
        let chain = extract_chain(&net).unwrap();
        let via_scheme = derive_model(&net).unwrap();
        let direct = assemble_direct(&net, &chain).unwrap();
        assert_eq!(via_scheme, direct);
        assert_eq!(via_scheme.state_labels, vec!["Q_L1", "P_C2", "Q_L3", "P_C4"]);
    }

    #[test]
    fn orientation_flip_negates_rows_and_columns() {
        let flipped_src = format!("{LADDER}dir I_L3 -\n");
        let base = derive_model(&parse_netlist(LADDER).unwrap()).unwrap();
        let flip = derive_model(&parse_netlist(&flipped_src).unwrap()).unwrap();
        for j in 0..4 {
            if j != 2 {
                assert_eq!(flip.a.get(2, j), &base.a.get(2, j).neg());
                assert_eq!(flip.a.get(j, 2), &base.a.get(j, 2).neg());
            } else {
                assert_eq!(flip.a.get(2, 2), base.a.get(2, 2));
            }
        }
        assert_eq!(flip.l, base.l);
        // The declared output V_C4 row sees the flipped column.
        assert_eq!(flip.c.get(3, 2), &base.c.get(3, 2).neg());
    }

    #[test]
    fn transfer_matrix_matches_classical_dc_gain() {
        let net = parse_netlist(LADDER).unwrap();
        let ss = derive_model(&net).unwrap();
        let num = ss.eval(&net.default_params()).unwrap();
        let h0 = num.transfer_at(Complex64::new(0.0, 0.0)).unwrap();
        // DC gain from Vb to V_C4 (output 3, input 1): solved steady state
        // gives x4 = Vb/2.
        assert!((h0[(3, 1)].re - 0.5).abs() < 1e-12);
        assert!(h0[(3, 1)].im.abs() < 1e-15);
    }

    #[test]
    fn static_ring_reports_algebraic_loop() {
        let net = parse_netlist(
            "src Va across e n1 gnd const:1\nel R1 res e n1 n2 1\nel R2 res e n2 n3 1\nsrc Vb across e n3 gnd const:2\n",
        )
        .unwrap();
        assert!(matches!(
            derive_model(&net),
            Err(DeriveError::Extract(ExtractError::AlgebraicLoop(_)))
        ));
        let chain = extract_chain(&net).unwrap();
        assert!(matches!(
            assemble_direct(&net, &chain),
            Err(AssembleError::AlgebraicLoop(_))
        ));
    }
}
