//! Human-readable artifacts: block-scheme diagrams in DOT, matrix reports
//! (aligned text, JSON, LaTeX), derivation traces, and plot scripts.
//!
//! All emitters are deterministic: the same inputs produce byte-identical
//! output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::netlist::Netlist;
use crate::pogir::{algebraic_loops, check_loop_signs, ItemConfig, Producer, Scheme, SigId};
use crate::statespace::StateSpaceSym;
use crate::topology::SPChain;

fn circled(n: usize) -> String {
    // U+2460 is circled one; the block covers 1..=20.
    if (1..=20).contains(&n) {
        char::from_u32(0x2460 + (n as u32 - 1)).unwrap().to_string()
    } else {
        format!("({n})")
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Render the block scheme as a deterministic DOT digraph.
///
/// Static blocks are boxes labeled with their gain, integrators are boxes
/// labeled with their transfer `1/(coeff s)`, coupling blocks are paired
/// record boxes `(K | K')`, summations are circles with signed incoming
/// edges, and power sections appear as dashed numbered separators with the
/// across line kept on the top rank and the through line on the bottom
/// (swapped past each gyrator).
pub fn render_dot(scheme: &Scheme) -> String {
    let n_items = scheme.configs.len();

    // Coupling gain signals render as the two ports of one record node.
    // Which section signals a coupling produces follows from its causality
    // configuration.
    let mut coupling_port: BTreeMap<SigId, (usize, usize)> = BTreeMap::new();
    for (k, cfg) in scheme.configs.iter().enumerate() {
        let (left, right) = match cfg {
            ItemConfig::CouplingRR => (
                scheme.sections[k + 1].across,
                scheme.sections[k].through,
            ),
            ItemConfig::CouplingLL => (
                scheme.sections[k].across,
                scheme.sections[k + 1].through,
            ),
            ItemConfig::CouplingRL => (
                scheme.sections[k].through,
                scheme.sections[k + 1].through,
            ),
            ItemConfig::CouplingLR => (
                scheme.sections[k].across,
                scheme.sections[k + 1].across,
            ),
            _ => continue,
        };
        coupling_port.insert(left, (k, 0));
        coupling_port.insert(right, (k, 1));
    }

    let node_ref = |id: SigId| -> String {
        match coupling_port.get(&id) {
            Some((k, p)) => format!("cb{k}:p{p}"),
            None => format!("n{id}"),
        }
    };

    let integrator_of: BTreeMap<SigId, usize> = scheme
        .integrators
        .iter()
        .enumerate()
        .map(|(i, ig)| (ig.state_sig, i))
        .collect();

    // Group composite-tree internals into nested clusters keyed by their
    // hierarchical label prefixes ("I3.0" lives in cluster "I3").
    let mut clusters: BTreeMap<String, Vec<SigId>> = BTreeMap::new();
    let mut toplevel: Vec<SigId> = Vec::new();
    for id in 0..scheme.signals.len() {
        let label = &scheme.labels[id];
        match label.rfind('.') {
            Some(pos) => clusters.entry(label[..pos].to_string()).or_default().push(id),
            None => toplevel.push(id),
        }
    }

    let mut out = String::new();
    out.push_str("digraph scheme {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [fontname=\"Helvetica\"];\n");

    let node_decl = |id: SigId| -> Option<String> {
        if coupling_port.contains_key(&id) {
            return None;
        }
        let label = &scheme.labels[id];
        Some(match &scheme.signals[id] {
            Producer::Input(j) => format!(
                "  n{id} [shape=plaintext, label=\"{}\"];\n",
                escape(&scheme.input_labels[*j])
            ),
            Producer::State(_) => {
                let ig = &scheme.integrators[integrator_of[&id]];
                format!(
                    "  n{id} [shape=box, label=\"{}: 1/(({}) s)\"];\n",
                    escape(label),
                    escape(&ig.coeff.to_string())
                )
            }
            // A single positive term is a wire junction, not a summation.
            Producer::Sum(terms) if terms.len() == 1 && terms[0].1 > 0 => {
                format!("  n{id} [shape=none, label=\"{}\"];\n", escape(label))
            }
            Producer::Sum(_) => format!("  n{id} [shape=circle, label=\"{}\"];\n", escape(label)),
            Producer::Gain(_, g) => format!(
                "  n{id} [shape=box, label=\"{}\"];\n",
                escape(&g.to_string())
            ),
            Producer::Zero => format!("  n{id} [shape=point, label=\"\"];\n"),
            Producer::Pending => format!("  n{id} [shape=none, label=\"?\"];\n"),
        })
    };

    for &id in &toplevel {
        if let Some(d) = node_decl(id) {
            out.push_str(&d);
        }
    }
    // Nested clusters: a cluster whose key itself contains a dot nests
    // inside its parent; emitted depth-first over sorted keys.
    fn emit_cluster(
        out: &mut String,
        key: &str,
        clusters: &BTreeMap<String, Vec<SigId>>,
        node_decl: &dyn Fn(SigId) -> Option<String>,
        depth: usize,
    ) {
        let pad = "  ".repeat(depth + 1);
        let _ = writeln!(out, "{pad}subgraph \"cluster_{}\" {{", escape(key));
        let _ = writeln!(out, "{pad}  label=\"{}\"; style=rounded;", escape(key));
        for &id in &clusters[key] {
            if let Some(d) = node_decl(id) {
                let _ = write!(out, "{pad}{}", d.trim_start_matches(' '));
            }
        }
        let child_prefix = format!("{key}.");
        for child in clusters.keys() {
            if let Some(rest) = child.strip_prefix(&child_prefix) {
                if !rest.contains('.') {
                    emit_cluster(out, child, clusters, node_decl, depth + 1);
                }
            }
        }
        let _ = writeln!(out, "{pad}}}");
    }
    for key in clusters.keys() {
        if !key.contains('.') {
            emit_cluster(&mut out, key, &clusters, &node_decl, 0);
        }
    }

    // Coupling record nodes: the forward gain and its power-conjugate
    // transpose as one paired block.
    for (k, cfg) in scheme.configs.iter().enumerate() {
        let ports: Vec<(SigId, usize)> = coupling_port
            .iter()
            .filter(|(_, (kk, _))| *kk == k)
            .map(|(&sig, &(_, p))| (sig, p))
            .collect();
        if ports.is_empty() {
            continue;
        }
        let gain_of = |sig: SigId| match &scheme.signals[sig] {
            Producer::Gain(_, g) => g.to_string(),
            _ => String::new(),
        };
        let mut labels = ["".to_string(), "".to_string()];
        for (sig, p) in &ports {
            labels[*p] = gain_of(*sig);
        }
        let _ = writeln!(
            out,
            "  cb{k} [shape=record, label=\"{{<p0> {}|<p1> {}'}}\"];",
            escape(&labels[0]),
            escape(&labels[1])
        );
        let _ = cfg; // configs indexed in lockstep with chain items
    }

    // Dashed numbered section separators, ordered left to right.
    for k in 0..scheme.sections.len() {
        let _ = writeln!(
            out,
            "  sep{k} [shape=box, style=dashed, label=\"{}\"];",
            circled(k + 1)
        );
        if k + 1 < scheme.sections.len() {
            let _ = writeln!(out, "  sep{k} -> sep{} [style=invis];", k + 1);
        }
    }
    // Keep each section's across/through pinned to its separator; the
    // across line rides on top until a gyrator swaps the conjugate pair.
    let mut flip = false;
    for (k, sec) in scheme.sections.iter().enumerate() {
        let mut members: Vec<String> = vec![format!("sep{k}")];
        let (top, bottom) = if flip {
            (sec.through, sec.across)
        } else {
            (sec.across, sec.through)
        };
        for sig in [top, bottom] {
            if !coupling_port.contains_key(&sig) {
                members.push(format!("n{sig}"));
            }
        }
        let _ = writeln!(out, "  {{ rank=same; {}; }}", members.join("; "));
        if k < n_items
            && matches!(
                scheme.configs[k],
                ItemConfig::CouplingRL | ItemConfig::CouplingLR
            )
        {
            flip = !flip;
        }
    }

    // Signal-flow edges; summation inputs carry their signs.
    for (id, p) in scheme.signals.iter().enumerate() {
        match p {
            Producer::Sum(terms) => {
                for (src, sign) in terms {
                    let lbl = if *sign >= 0 { "+" } else { "-" };
                    let _ = writeln!(
                        out,
                        "  {} -> {} [label=\"{lbl}\"];",
                        node_ref(*src),
                        node_ref(id)
                    );
                }
            }
            Producer::Gain(src, _) => {
                let _ = writeln!(out, "  {} -> {};", node_ref(*src), node_ref(id));
            }
            _ => {}
        }
    }
    for ig in &scheme.integrators {
        let _ = writeln!(out, "  {} -> {};", node_ref(ig.input), node_ref(ig.state_sig));
    }

    out.push_str("}\n");
    out
}

fn matrix_json(m: &crate::expr::SymMatrix) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = (0..m.nrows())
        .map(|i| {
            let row: Vec<serde_json::Value> = (0..m.ncols())
                .map(|j| {
                    let e = m.get(i, j);
                    if e.params().is_empty() {
                        let v = e.eval(&|_| None).unwrap_or(f64::NAN);
                        serde_json::Number::from_f64(v)
                            .map(serde_json::Value::Number)
                            .unwrap_or(serde_json::Value::Null)
                    } else {
                        serde_json::Value::String(e.to_string())
                    }
                })
                .collect();
            serde_json::Value::Array(row)
        })
        .collect();
    serde_json::Value::Array(rows)
}

/// Structural check results for a compiled scheme.
pub fn checks_json(scheme: &Scheme, sym: &StateSpaceSym, params: Option<&std::collections::HashMap<String, f64>>) -> serde_json::Value {
    let bad_loops: Vec<String> = check_loop_signs(scheme)
        .iter()
        .map(|l| l.describe(scheme))
        .collect();
    let alg_loops: Vec<String> = algebraic_loops(scheme)
        .iter()
        .map(|l| l.describe(scheme))
        .collect();
    let psd = params.and_then(|p| sym.eval(p).ok()).map(|ss| {
        if ss.l.nrows() == 0 {
            return true;
        }
        let sym_l = (&ss.l - ss.l.transpose()).norm() <= 1e-12 * ss.l.norm().max(1.0);
        let eigs = ss.l.clone().symmetric_eigenvalues();
        sym_l && eigs.iter().all(|&e| e >= -1e-12)
    });
    serde_json::json!({
        "loop_parity_failures": bad_loops,
        "algebraic_loops": alg_loops,
        "energy_matrix_psd": psd,
    })
}

/// The full JSON report: labels, matrices, and check results.
/// Byte-identical across runs for identical inputs.
pub fn export_report(
    sym: &StateSpaceSym,
    scheme: &Scheme,
    params: Option<&std::collections::HashMap<String, f64>>,
    trajectory_csv: Option<&str>,
) -> String {
    let mut v = serde_json::json!({
        "states": sym.state_labels,
        "inputs": sym.input_labels,
        "outputs": sym.output_labels,
        "L": matrix_json(&sym.l),
        "A": matrix_json(&sym.a),
        "B": matrix_json(&sym.b),
        "C": matrix_json(&sym.c),
        "D": matrix_json(&sym.d),
        "checks": checks_json(scheme, sym, params),
    });
    if let Some(path) = trajectory_csv {
        v["trajectory_csv"] = serde_json::Value::String(path.to_string());
    }
    let mut text = serde_json::to_string_pretty(&v).expect("report serialization");
    text.push('\n');
    text
}

fn matrix_text(name: &str, m: &crate::expr::SymMatrix) -> String {
    let cells: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m.get(i, j).to_string()).collect())
        .collect();
    let widths: Vec<usize> = (0..m.ncols())
        .map(|j| cells.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = format!("{name} =\n");
    if m.nrows() == 0 || m.ncols() == 0 {
        let _ = writeln!(out, "  [] ({}x{})", m.nrows(), m.ncols());
        return out;
    }
    for row in &cells {
        out.push_str("  [ ");
        for (j, c) in row.iter().enumerate() {
            if j > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{c:>w$}", w = widths[j]);
        }
        out.push_str(" ]\n");
    }
    out
}

/// Aligned plain-text rendering of the five model matrices.
pub fn matrices_text(sym: &StateSpaceSym) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "states:  [{}]", sym.state_labels.join(", "));
    let _ = writeln!(out, "inputs:  [{}]", sym.input_labels.join(", "));
    let _ = writeln!(out, "outputs: [{}]", sym.output_labels.join(", "));
    out.push('\n');
    out.push_str(&matrix_text("L", &sym.l));
    out.push_str(&matrix_text("A", &sym.a));
    out.push_str(&matrix_text("B", &sym.b));
    out.push_str(&matrix_text("C", &sym.c));
    out.push_str(&matrix_text("D", &sym.d));
    out
}

fn matrix_latex(m: &crate::expr::SymMatrix) -> String {
    let mut out = String::from("\\begin{bmatrix}");
    for i in 0..m.nrows() {
        if i > 0 {
            out.push_str(" \\\\ ");
        }
        for j in 0..m.ncols() {
            if j > 0 {
                out.push_str(" & ");
            }
            out.push_str(&m.get(i, j).to_string());
        }
    }
    out.push_str("\\end{bmatrix}");
    out
}

/// LaTeX rendering of the model in its energy-matrix layout.
pub fn matrices_latex(sym: &StateSpaceSym) -> String {
    format!(
        "\\begin{{aligned}}\n{} \\dot{{x}} &= {} x + {} u \\\\\ny &= {} x + {} u\n\\end{{aligned}}\n",
        matrix_latex(&sym.l),
        matrix_latex(&sym.a),
        matrix_latex(&sym.b),
        matrix_latex(&sym.c),
        matrix_latex(&sym.d),
    )
}

/// Trace of the six derivation stages for a compiled netlist.
pub fn steps_text(net: &Netlist, chain: &SPChain, scheme: &Scheme) -> String {
    let mut out = String::new();
    let mut flipped: Vec<&str> = net
        .orientations
        .iter()
        .filter(|(_, f)| **f)
        .map(|(l, _)| l.as_str())
        .collect();
    flipped.sort();
    let _ = writeln!(
        out,
        "1. Orientation: positive directions fixed by declaration order; flipped: [{}]",
        flipped.join(", ")
    );
    let _ = writeln!(
        out,
        "2. Chain decomposition: {}",
        chain.describe(net).join(" | ")
    );
    let _ = writeln!(
        out,
        "3. Power sections: {} sections; domains [{}]",
        scheme.sections.len(),
        scheme
            .sections
            .iter()
            .map(|s| s.domain.keyword().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(
        out,
        "4. Causality: section directions [{}]; item configurations [{}]",
        scheme
            .sections
            .iter()
            .map(|s| s.dir.to_string())
            .collect::<Vec<_>>()
            .join(", "),
        scheme
            .configs
            .iter()
            .map(|c| format!("{c:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(
        out,
        "5. Block scheme: {} signals, {} integrators, {} summations",
        scheme.signals.len(),
        scheme.integrators.len(),
        scheme
            .signals
            .iter()
            .filter(|p| matches!(p, Producer::Sum(t) if t.len() > 1))
            .count()
    );
    let loops = crate::pogir::enumerate_loops(scheme);
    let bad = check_loop_signs(scheme).len();
    let _ = writeln!(
        out,
        "6. Sign audit: {} loops, {} with even minus parity{}",
        loops.len(),
        bad,
        if bad == 0 { " (all pass)" } else { "" }
    );
    out
}

/// Per-section summary: number, domain, direction, and the conjugate
/// signal pair.
pub fn sections_text(scheme: &Scheme) -> String {
    let mut out = String::new();
    for (k, sec) in scheme.sections.iter().enumerate() {
        let _ = writeln!(
            out,
            "{} {:12} dir={} across={} through={}",
            circled(k + 1),
            sec.domain.keyword(),
            sec.dir,
            scheme.labels[sec.across],
            scheme.labels[sec.through],
        );
    }
    out
}

/// A gnuplot script plotting every state and output column of a trajectory
/// CSV produced by the simulator.
pub fn plot_script(csv_path: &str, state_labels: &[String], output_labels: &[String]) -> String {
    let mut out = String::new();
    out.push_str("# Generated plot script; run with: gnuplot <this file>\n");
    out.push_str("set datafile separator ','\n");
    out.push_str("set key autotitle columnhead\n");
    out.push_str("set xlabel 't [s]'\n");
    out.push_str("set terminal pngcairo size 1200,800\n");
    out.push_str("set output 'trajectory.png'\n");
    let ncols = state_labels.len() + output_labels.len();
    let mut parts = Vec::new();
    for i in 0..ncols {
        parts.push(format!("'{csv_path}' using 1:{} with lines", i + 2));
    }
    // The stored-energy column follows the signal columns.
    parts.push(format!(
        "'{csv_path}' using 1:{} with lines title 'E_s'",
        ncols + 2
    ));
    let _ = writeln!(out, "plot {}", parts.join(", \\\n     "));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;
    use crate::pogir::compile;
    use crate::statespace::derive_model;

    fn motor_pump() -> &'static str {
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
"
    }

    #[test]
    fn dot_counts_blocks_sums_and_sections() {
        let net = parse_netlist(motor_pump()).unwrap();
        let scheme = compile(&net).unwrap();
        let dot = render_dot(&scheme);
        let boxes = dot.matches("shape=box,").count() - dot.matches("style=dashed").count();
        let records = dot.matches("shape=record").count();
        let circles = dot.matches("shape=circle").count();
        let seps = dot.matches("style=dashed").count();
        assert_eq!(boxes + records, 8, "block boxes:\n{dot}");
        assert_eq!(circles, 6, "summation circles:\n{dot}");
        assert_eq!(seps, 9, "section separators:\n{dot}");
    }

    #[test]
    fn dot_is_balanced_and_deterministic() {
        let net = parse_netlist(motor_pump()).unwrap();
        let scheme = compile(&net).unwrap();
        let dot = render_dot(&scheme);
        assert!(dot.starts_with("digraph scheme {"));
        assert_eq!(dot.matches('{').count(), dot.matches('}').count());
        assert_eq!(dot, render_dot(&scheme));
    }

    #[test]
    fn nested_group_gets_a_cluster() {
        let src = "\
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
";
        let net = parse_netlist(src).unwrap();
        let scheme = compile(&net).unwrap();
        let dot = render_dot(&scheme);
        assert_eq!(dot.matches("subgraph \"cluster_").count(), 1, "{dot}");
    }

    #[test]
    fn report_is_byte_stable_and_has_schema_fields() {
        let net = parse_netlist(motor_pump()).unwrap();
        let scheme = compile(&net).unwrap();
        let sym = derive_model(&net).unwrap();
        let params = net.default_params();
        let r1 = export_report(&sym, &scheme, Some(&params), None);
        let r2 = export_report(&sym, &scheme, Some(&params), None);
        assert_eq!(r1, r2);
        let v: serde_json::Value = serde_json::from_str(&r1).unwrap();
        for key in ["states", "inputs", "outputs", "L", "A", "B", "C", "D", "checks"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["checks"]["energy_matrix_psd"], serde_json::json!(true));
        assert_eq!(v["A"][0][1], serde_json::json!("-K12"));
    }

    #[test]
    fn empty_model_report_has_empty_blocks() {
        use crate::expr::SymMatrix;
        let sym = StateSpaceSym {
            l: SymMatrix::zeros(0, 0),
            a: SymMatrix::zeros(0, 0),
            b: SymMatrix::zeros(0, 1),
            c: SymMatrix::zeros(1, 0),
            d: SymMatrix::from_fn(1, 1, |_, _| crate::expr::Expr::param("R")),
            state_labels: vec![],
            input_labels: vec!["u".into()],
            output_labels: vec!["y".into()],
        };
        let text = matrices_text(&sym);
        assert!(text.contains("L =\n  [] (0x0)"));
        assert!(text.contains("D =\n  [ R ]"));
    }

    #[test]
    fn latex_uses_matrix_environments() {
        let net = parse_netlist(motor_pump()).unwrap();
        let sym = derive_model(&net).unwrap();
        let tex = matrices_latex(&sym);
        assert_eq!(tex.matches("\\begin{bmatrix}").count(), 5);
        assert!(tex.contains("\\dot{x}"));
    }

    #[test]
    fn steps_and_sections_describe_the_pipeline() {
        let net = parse_netlist(motor_pump()).unwrap();
        let chain = crate::topology::extract_chain(&net).unwrap();
        let scheme = compile(&net).unwrap();
        let steps = steps_text(&net, &chain, &scheme);
        assert!(steps.contains("6. Sign audit"));
        assert!(steps.contains("(all pass)"));
        let sections = sections_text(&scheme);
        assert_eq!(sections.lines().count(), 9);
        assert!(sections.lines().next().unwrap().contains(" e "));
        assert!(sections.lines().last().unwrap().contains(" hy "));
    }
}
