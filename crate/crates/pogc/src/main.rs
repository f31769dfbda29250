//! Command-line front end: derive state-space models from netlists, check
//! structural invariants, apply congruent reductions, and simulate.
//!
//! Exit codes: 0 success, 1 usage/IO/syntax errors, 2 model diagnostics.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pog_core::modelio::{read_model, read_transform, write_model, LoadedModel};
use pog_core::netlist::{parse_netlist, validate, Netlist};
use pog_core::pogir::{algebraic_loops, check_loop_signs, compile, Scheme};
use pog_core::reduce::{
    apply_congruent, eliminate_degenerate_state_sym, CongruentTransform, Limit,
};
use pog_core::render;
use pog_core::sim::{simulate, write_csv, InputSignal, Method, SimConfig};
use pog_core::statespace::{
    assemble_direct, derive_model, PogStateSpace, StateSpaceSym,
};
use pog_core::testgen::random_valid_netlist;
use pog_core::topology::extract_chain;

#[derive(Parser)]
#[command(name = "pogc", version, about = "Power-oriented graph compiler and simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Matrices,
    Dot,
    Latex,
    Steps,
    Sections,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Rk4,
    Trap,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimitArg {
    Zero,
    Inf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a netlist (or model JSON) and emit the state-space model.
    Derive {
        path: PathBuf,
        /// What to emit (repeatable).
        #[arg(long = "emit", value_enum)]
        emit: Vec<Emit>,
        /// Write the (single) emission to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parameter overrides `name=value` (repeatable).
        #[arg(long = "param")]
        params: Vec<String>,
    },
    /// Integrate the model and write a trajectory CSV.
    Simulate {
        path: PathBuf,
        #[arg(long = "t-end", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-5)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
        method: MethodArg,
        #[arg(long = "param")]
        params: Vec<String>,
        /// CSV output path (also writes a gnuplot script next to it);
        /// stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run structural checks: loop sign parity, energy-matrix shape,
    /// algebraic loops, and route equivalence.
    Check {
        /// Netlist or model JSON to check; omit when using --random.
        path: Option<PathBuf>,
        /// Check N randomly generated netlists instead of a file.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Apply a congruent transformation or eliminate a degenerate state.
    Reduce {
        path: PathBuf,
        /// State label to eliminate (requires --limit).
        #[arg(long)]
        eliminate: Option<String>,
        #[arg(long, value_enum)]
        limit: Option<LimitArg>,
        /// JSON file with T, T_u (and optional T_dot).
        #[arg(long)]
        transform: Option<PathBuf>,
        /// Evaluation time for time-varying transforms.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failures carrying the process exit code: 1 for usage/IO/syntax, 2 for
/// model diagnostics.
enum Failure {
    Usage(String),
    Model(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Model(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Model(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn model_err(msg: impl std::fmt::Display) -> Failure {
    Failure::Model(msg.to_string())
}

enum Input {
    Net(Box<Netlist>),
    Model(Box<LoadedModel>),
}

fn load_input(path: &Path) -> Result<Input, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let model = read_model(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        return Ok(Input::Model(Box::new(model)));
    }
    let net = parse_netlist(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let report = validate(&net);
    if !report.is_ok() {
        let msgs: Vec<String> = report
            .violations
            .iter()
            .map(|v| v.message.clone())
            .collect();
        return Err(model_err(format!(
            "{}: {}",
            path.display(),
            msgs.join("; ")
        )));
    }
    Ok(Input::Net(Box::new(net)))
}

fn parse_overrides(pairs: &[String]) -> Result<HashMap<String, f64>, Failure> {
    let mut map = HashMap::new();
    for p in pairs {
        let (name, value) = p
            .split_once('=')
            .ok_or_else(|| usage(format!("--param expects name=value, got `{p}`")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| usage(format!("--param {name}: `{value}` is not a number")))?;
        map.insert(name.to_string(), v);
    }
    Ok(map)
}

struct Derived {
    sym: StateSpaceSym,
    scheme: Option<Scheme>,
    params: HashMap<String, f64>,
    model: Option<LoadedModel>,
}

fn derive(input: Input, overrides: &HashMap<String, f64>) -> Result<Derived, Failure> {
    match input {
        Input::Net(net) => {
            let scheme = compile(&net).map_err(model_err)?;
            let sym = derive_model(&net).map_err(model_err)?;
            let mut params = net.default_params();
            for (k, v) in overrides {
                params.insert(k.clone(), *v);
            }
            Ok(Derived {
                sym,
                scheme: Some(scheme),
                params,
                model: None,
            })
        }
        Input::Model(model) => {
            let mut params = model.params.clone();
            for (k, v) in overrides {
                params.insert(k.clone(), *v);
            }
            Ok(Derived {
                sym: model.sym.clone(),
                scheme: None,
                params,
                model: Some(*model),
            })
        }
    }
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_derive(
    path: &Path,
    emit: &[Emit],
    out: &Option<PathBuf>,
    params: &[String],
) -> Result<(), Failure> {
    let overrides = parse_overrides(params)?;
    let d = derive(load_input(path)?, &overrides)?;
    let emits: Vec<Emit> = if emit.is_empty() {
        vec![Emit::Matrices]
    } else {
        emit.to_vec()
    };
    if out.is_some() && emits.len() > 1 {
        return Err(usage("--out requires exactly one --emit kind".to_string()));
    }
    for e in &emits {
        let text = match e {
            Emit::Matrices => render::matrices_text(&d.sym),
            Emit::Latex => render::matrices_latex(&d.sym),
            Emit::Dot => {
                let scheme = d.scheme.as_ref().ok_or_else(|| {
                    usage("--emit dot requires a netlist input".to_string())
                })?;
                render::render_dot(scheme)
            }
            Emit::Steps => {
                let scheme = d.scheme.as_ref().ok_or_else(|| {
                    usage("--emit steps requires a netlist input".to_string())
                })?;
                // Recompute the chain for the trace; netlist inputs only.
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let net = parse_netlist(&text).map_err(|e| usage(e.to_string()))?;
                let chain = extract_chain(&net).map_err(model_err)?;
                render::steps_text(&net, &chain, scheme)
            }
            Emit::Sections => {
                let scheme = d.scheme.as_ref().ok_or_else(|| {
                    usage("--emit sections requires a netlist input".to_string())
                })?;
                render::sections_text(scheme)
            }
            Emit::Json => match &d.scheme {
                Some(scheme) => render::export_report(&d.sym, scheme, Some(&d.params), None),
                None => write_model(
                    &d.sym,
                    &d.params,
                    d.model.as_ref().and_then(|m| m.hook.as_ref()),
                ),
            },
        };
        write_out(out, &text)?;
    }
    Ok(())
}

fn netlist_signals(net: &Netlist, sym: &StateSpaceSym, base: Option<&Path>) -> Result<Vec<InputSignal>, Failure> {
    sym.input_labels
        .iter()
        .map(|name| {
            let src = net
                .sources
                .iter()
                .find(|s| &s.name == name)
                .ok_or_else(|| model_err(format!("no source named `{name}`")))?;
            InputSignal::from_spec(&src.signal, base).map_err(|e| usage(e.to_string()))
        })
        .collect()
}

fn model_signals(
    model: &LoadedModel,
    base: Option<&Path>,
) -> Result<Vec<InputSignal>, Failure> {
    model
        .sym
        .input_labels
        .iter()
        .map(|name| match model.signals.get(name) {
            Some(spec) => InputSignal::from_spec(spec, base).map_err(|e| usage(e.to_string())),
            None => Ok(InputSignal::Const(0.0)),
        })
        .collect()
}

fn cmd_simulate(
    path: &Path,
    t_end: f64,
    dt: f64,
    method: MethodArg,
    params: &[String],
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(usage(format!("--dt must be positive, got {dt}")));
    }
    if t_end <= 0.0 || !t_end.is_finite() {
        return Err(usage(format!("--t-end must be positive, got {t_end}")));
    }
    let overrides = parse_overrides(params)?;
    let base = path.parent();
    let input = load_input(path)?;

    let (ss, signals, x0): (PogStateSpace, Vec<InputSignal>, Vec<f64>) = match &input {
        Input::Net(net) => {
            let sym = derive_model(net).map_err(model_err)?;
            let mut p = net.default_params();
            for (k, v) in &overrides {
                p.insert(k.clone(), *v);
            }
            let ss = sym.eval(&p).map_err(model_err)?;
            let signals = netlist_signals(net, &sym, base)?;
            let x0 = vec![0.0; ss.nx()];
            (ss, signals, x0)
        }
        Input::Model(model) => {
            let ss = model.eval(&overrides).map_err(model_err)?;
            let signals = model_signals(model, base)?;
            let x0 = model.x0.clone().unwrap_or_else(|| vec![0.0; ss.nx()]);
            (ss, signals, x0)
        }
    };

    let cfg = SimConfig {
        method: match method {
            MethodArg::Rk4 => Method::Rk4,
            MethodArg::Trap => Method::Trapezoidal,
        },
        dt,
        t_end,
    };
    let tr = simulate(&ss, &signals, &x0, &cfg).map_err(model_err)?;
    let csv = write_csv(&tr);
    match out {
        Some(p) => {
            std::fs::write(p, &csv).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            let script = render::plot_script(
                &p.to_string_lossy(),
                &tr.state_labels,
                &tr.output_labels,
            );
            let script_path = p.with_extension("plt");
            std::fs::write(&script_path, script)
                .map_err(|e| usage(format!("{}: {e}", script_path.display())))?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn check_netlist(net: &Netlist, what: &str) -> Result<(), Failure> {
    let scheme = compile(net).map_err(|e| model_err(format!("{what}: {e}")))?;
    let bad = check_loop_signs(&scheme);
    if let Some(l) = bad.first() {
        return Err(model_err(format!(
            "{what}: loop with even minus-sign parity: {}",
            l.describe(&scheme)
        )));
    }
    let alg = algebraic_loops(&scheme);
    if let Some(l) = alg.first() {
        return Err(model_err(format!(
            "{what}: algebraic loop: {}",
            l.describe(&scheme)
        )));
    }
    let sym = derive_model(net).map_err(|e| model_err(format!("{what}: {e}")))?;
    let chain = extract_chain(net).map_err(|e| model_err(format!("{what}: {e}")))?;
    let direct = assemble_direct(net, &chain).map_err(|e| model_err(format!("{what}: {e}")))?;
    if sym != direct {
        return Err(model_err(format!(
            "{what}: scheme-extracted model differs from the direct-assembly oracle"
        )));
    }
    let num = sym
        .eval(&net.default_params())
        .map_err(|e| model_err(format!("{what}: {e}")))?;
    check_energy_matrix(&num, what)
}

fn check_energy_matrix(ss: &PogStateSpace, what: &str) -> Result<(), Failure> {
    if ss.l.nrows() == 0 {
        return Ok(());
    }
    let sym_err = (&ss.l - ss.l.transpose()).norm();
    if sym_err > 1e-12 * ss.l.norm().max(1.0) {
        return Err(model_err(format!("{what}: energy matrix is not symmetric")));
    }
    let eigs = ss.l.clone().symmetric_eigenvalues();
    if eigs.iter().any(|&e| e < -1e-12) {
        return Err(model_err(format!(
            "{what}: energy matrix is not positive semidefinite"
        )));
    }
    Ok(())
}

fn cmd_check(path: &Option<PathBuf>, random: Option<usize>, seed: u64) -> Result<(), Failure> {
    if let Some(n) = random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n {
            let net = random_valid_netlist(&mut rng, 8);
            check_netlist(&net, &format!("random #{}", i + 1))?;
        }
        println!("ok: {n} random netlists checked (seed {seed})");
        return Ok(());
    }
    let path = path
        .as_ref()
        .ok_or_else(|| usage("check requires a path or --random N".to_string()))?;
    match load_input(path)? {
        Input::Net(net) => {
            check_netlist(&net, &path.display().to_string())?;
            println!("ok: {}", path.display());
        }
        Input::Model(model) => {
            let ss = model
                .eval(&HashMap::new())
                .map_err(|e| model_err(format!("{}: {e}", path.display())))?;
            check_energy_matrix(&ss, &path.display().to_string())?;
            println!("ok: {}", path.display());
        }
    }
    Ok(())
}

fn cmd_reduce(
    path: &Path,
    eliminate: &Option<String>,
    limit: Option<LimitArg>,
    transform: &Option<PathBuf>,
    time: f64,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let d = derive(load_input(path)?, &HashMap::new())?;
    match (eliminate, transform) {
        (Some(state), None) => {
            let limit = match limit {
                Some(LimitArg::Zero) => Limit::Zero,
                Some(LimitArg::Inf) => Limit::Infinity,
                None => return Err(usage("--eliminate requires --limit zero|inf".to_string())),
            };
            let outcome =
                eliminate_degenerate_state_sym(&d.sym, state, limit).map_err(model_err)?;
            let text = write_model(&outcome.model, &d.params, None);
            write_out(out, &text)?;
        }
        (None, Some(tpath)) => {
            let tr: CongruentTransform =
                read_transform(tpath).map_err(|e| usage(format!("{}: {e}", tpath.display())))?;
            let ss = match &d.model {
                Some(m) => m.eval(&HashMap::new()).map_err(model_err)?,
                None => d.sym.eval(&d.params).map_err(model_err)?,
            };
            let outcome = apply_congruent(&ss, &tr, Some(time)).map_err(model_err)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let reduced = &outcome.model;
            let sym = StateSpaceSym {
                l: pog_core::expr::SymMatrix::from_numeric(&reduced.l),
                a: pog_core::expr::SymMatrix::from_numeric(&reduced.a),
                b: pog_core::expr::SymMatrix::from_numeric(&reduced.b),
                c: pog_core::expr::SymMatrix::from_numeric(&reduced.c),
                d: pog_core::expr::SymMatrix::from_numeric(&reduced.d),
                state_labels: reduced.state_labels.clone(),
                input_labels: reduced.input_labels.clone(),
                output_labels: reduced.output_labels.clone(),
            };
            let text = write_model(&sym, &HashMap::new(), None);
            write_out(out, &text)?;
        }
        (Some(_), Some(_)) => {
            return Err(usage("--eliminate and --transform are mutually exclusive".to_string()))
        }
        (None, None) => {
            return Err(usage("reduce requires --eliminate <state> or --transform <file>".to_string()))
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.cmd {
        Cmd::Derive {
            path,
            emit,
            out,
            params,
        } => cmd_derive(path, emit, out, params),
        Cmd::Simulate {
            path,
            t_end,
            dt,
            method,
            params,
            out,
        } => cmd_simulate(path, *t_end, *dt, *method, params, out),
        Cmd::Check { path, random, seed } => cmd_check(path, *random, *seed),
        Cmd::Reduce {
            path,
            eliminate,
            limit,
            transform,
            time,
            out,
        } => cmd_reduce(path, eliminate, *limit, transform, *time, out),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; everything else is a
            // usage error (exit 1).
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            std::process::exit(if benign { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(f) => {
            eprintln!("error: {}", f.message());
            std::process::exit(f.code());
        }
    }
}
