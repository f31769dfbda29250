//! Textual netlist format for multi-domain physical systems.
//!
//! One record per line, `#` starts a comment:
//!
//! ```text
//! el  <name> <type> <dom> <n+> <n-> <value>
//! src <name> <across|through> <dom> <n+> <n-> <signal>
//! cb  <name> <xfmr|gyr> <dom>(<n+>,<n->) <dom>(<n+>,<n->) <K>
//! out <variable>
//! dir <variable> <+|->
//! ```
//!
//! Element types: `cap,ind,res` (electrical), `mass,spring,fric`
//! (mechanical translational), `inertia,rspring,rfric` (mechanical
//! rotational), `hcap,hind,hres` (hydraulic).  `gnd` names the reference
//! node shared by every domain segment.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

pub const GND: &str = "gnd";

/// Energetic domain of an element or coupling port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Domain {
    Electrical,
    MechTranslational,
    MechRotational,
    Hydraulic,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Electrical,
        Domain::MechTranslational,
        Domain::MechRotational,
        Domain::Hydraulic,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Domain::Electrical => "e",
            Domain::MechTranslational => "mt",
            Domain::MechRotational => "mr",
            Domain::Hydraulic => "hy",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Domain> {
        match s {
            "e" => Some(Domain::Electrical),
            "mt" => Some(Domain::MechTranslational),
            "mr" => Some(Domain::MechRotational),
            "hy" => Some(Domain::Hydraulic),
            _ => None,
        }
    }

    /// Symbol of the across power variable (defined between two points).
    pub fn across_symbol(self) -> &'static str {
        match self {
            Domain::Electrical => "V",
            Domain::MechTranslational => "v",
            Domain::MechRotational => "w",
            Domain::Hydraulic => "P",
        }
    }

    /// Symbol of the through power variable (defined at one point).
    pub fn through_symbol(self) -> &'static str {
        match self {
            Domain::Electrical => "I",
            Domain::MechTranslational => "F",
            Domain::MechRotational => "tau",
            Domain::Hydraulic => "Q",
        }
    }
}

/// Storage/dissipation role of a physical element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StorageKind {
    /// Stores energy in the across variable (capacitor, mass, inertia,
    /// hydraulic capacitor); its state is the across variable.
    AcrossDynamic,
    /// Stores energy in the through variable (inductor, springs, hydraulic
    /// inductor); its state is the through variable.
    ThroughDynamic,
    /// Dissipative element.
    Static,
}

/// Concrete element type keyword from the netlist grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ElementType {
    Cap,
    Ind,
    Res,
    Mass,
    Spring,
    Fric,
    Inertia,
    RSpring,
    RFric,
    HCap,
    HInd,
    HRes,
}

impl ElementType {
    pub fn keyword(self) -> &'static str {
        match self {
            ElementType::Cap => "cap",
            ElementType::Ind => "ind",
            ElementType::Res => "res",
            ElementType::Mass => "mass",
            ElementType::Spring => "spring",
            ElementType::Fric => "fric",
            ElementType::Inertia => "inertia",
            ElementType::RSpring => "rspring",
            ElementType::RFric => "rfric",
            ElementType::HCap => "hcap",
            ElementType::HInd => "hind",
            ElementType::HRes => "hres",
        }
    }

    pub fn from_keyword(s: &str) -> Option<ElementType> {
        use ElementType::*;
        match s {
            "cap" => Some(Cap),
            "ind" => Some(Ind),
            "res" => Some(Res),
            "mass" => Some(Mass),
            "spring" => Some(Spring),
            "fric" => Some(Fric),
            "inertia" => Some(Inertia),
            "rspring" => Some(RSpring),
            "rfric" => Some(RFric),
            "hcap" => Some(HCap),
            "hind" => Some(HInd),
            "hres" => Some(HRes),
            _ => None,
        }
    }

    pub fn domain(self) -> Domain {
        use ElementType::*;
        match self {
            Cap | Ind | Res => Domain::Electrical,
            Mass | Spring | Fric => Domain::MechTranslational,
            Inertia | RSpring | RFric => Domain::MechRotational,
            HCap | HInd | HRes => Domain::Hydraulic,
        }
    }

    pub fn storage_kind(self) -> StorageKind {
        use ElementType::*;
        match self {
            Cap | Mass | Inertia | HCap => StorageKind::AcrossDynamic,
            Ind | Spring | RSpring | HInd => StorageKind::ThroughDynamic,
            Res | Fric | RFric | HRes => StorageKind::Static,
        }
    }

    /// True when the stored coefficient is a stiffness whose energy
    /// coefficient is its reciprocal (`1/K`).
    pub fn coefficient_is_stiffness(self) -> bool {
        matches!(self, ElementType::Spring | ElementType::RSpring)
    }

    /// True when the static element's natural constitutive gain maps the
    /// across variable to the through variable (friction `F = b*v`, hydraulic
    /// valve `Q = R*P`); false for the electrical resistor (`V = R*I`).
    pub fn static_gain_is_conductance(self) -> bool {
        matches!(
            self,
            ElementType::Fric | ElementType::RFric | ElementType::HRes
        )
    }
}

/// Two-terminal physical element.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Element {
    pub name: String,
    pub etype: ElementType,
    pub node_plus: String,
    pub node_minus: String,
    pub value: f64,
    pub line: usize,
}

impl Element {
    pub fn domain(&self) -> Domain {
        self.etype.domain()
    }

    pub fn storage_kind(&self) -> StorageKind {
        self.etype.storage_kind()
    }

    /// Label of the element's across variable, e.g. `V_C1`.
    pub fn across_label(&self) -> String {
        format!("{}_{}", self.domain().across_symbol(), self.name)
    }

    /// Label of the element's through variable, e.g. `I_L2`.
    pub fn through_label(&self) -> String {
        format!("{}_{}", self.domain().through_symbol(), self.name)
    }

    /// Label of the element's state variable (dynamic elements only).
    pub fn state_label(&self) -> Option<String> {
        match self.storage_kind() {
            StorageKind::AcrossDynamic => Some(self.across_label()),
            StorageKind::ThroughDynamic => Some(self.through_label()),
            StorageKind::Static => None,
        }
    }
}

/// Generator orientation: which power variable the source imposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SourceKind {
    Across,
    Through,
}

/// Time signal attached to a source.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SignalSpec {
    Const(f64),
    Step { value: f64, at: f64 },
    Sin { amp: f64, freq: f64, phase: f64 },
    Csv(String),
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalSpec::Const(v) => write!(f, "const:{v}"),
            SignalSpec::Step { value, at } => write!(f, "step:{value}@{at}"),
            SignalSpec::Sin { amp, freq, phase } => write!(f, "sin:{amp},{freq},{phase}"),
            SignalSpec::Csv(path) => write!(f, "csv:{path}"),
        }
    }
}

/// Ideal generator.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Source {
    pub name: String,
    pub kind: SourceKind,
    pub domain: Domain,
    pub node_plus: String,
    pub node_minus: String,
    pub signal: SignalSpec,
    pub line: usize,
}

impl Source {
    /// Label of the conjugate power variable at the source port (the
    /// variable the source does not impose), e.g. `I_Va` for a voltage
    /// source.
    pub fn conjugate_label(&self) -> String {
        match self.kind {
            SourceKind::Across => format!("{}_{}", self.domain.through_symbol(), self.name),
            SourceKind::Through => format!("{}_{}", self.domain.across_symbol(), self.name),
        }
    }
}

/// Energy-conversion coupling kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CouplingKind {
    /// Relates same-type variables on its two ports
    /// (`across_a = K*across_b`, `through_b = K*through_a`).
    Transformer,
    /// Relates opposite-type variables
    /// (`through_b = K*across_a`, `through_a = K*across_b`).
    Gyrator,
}

/// One port of a coupling.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CouplingPort {
    pub domain: Domain,
    pub node_plus: String,
    pub node_minus: String,
}

/// Two-port energy conversion (transformer or gyrator) with ratio `K`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Coupling {
    pub name: String,
    pub kind: CouplingKind,
    pub port_a: CouplingPort,
    pub port_b: CouplingPort,
    pub ratio: f64,
    pub line: usize,
}

/// Parsed netlist: the compiler's AST.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Netlist {
    pub elements: Vec<Element>,
    pub sources: Vec<Source>,
    pub couplings: Vec<Coupling>,
    pub outputs: Vec<String>,
    /// Positive-direction overrides per variable label: `true` means the
    /// declared positive direction is the reverse of the default.
    pub orientations: HashMap<String, bool>,
}

impl Netlist {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }

    /// Default numeric bindings: element values (with stiffnesses kept as
    /// declared), coupling ratios.
    pub fn default_params(&self) -> HashMap<String, f64> {
        let mut map = HashMap::new();
        for e in &self.elements {
            map.insert(e.name.clone(), e.value);
        }
        for c in &self.couplings {
            map.insert(c.name.clone(), c.ratio);
        }
        map
    }

    /// Direction flip requested for a variable label (`dir <var> -`).
    pub fn flipped(&self, label: &str) -> bool {
        self.orientations.get(label).copied().unwrap_or(false)
    }
}

/// Parse error with source position.
#[derive(Debug, Clone, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

fn parse_value(tok: &str, line: usize, what: &str) -> Result<f64, ParseError> {
    tok.parse::<f64>()
        .map_err(|_| err(line, format!("expected a number for {what}, got `{tok}`")))
}

/// Parse a standalone `<kind>:<args>` signal declaration.
pub fn parse_signal_spec(tok: &str) -> Result<SignalSpec, String> {
    parse_signal(tok, 0).map_err(|e| e.message)
}

fn parse_signal(tok: &str, line: usize) -> Result<SignalSpec, ParseError> {
    let (kind, rest) = tok
        .split_once(':')
        .ok_or_else(|| err(line, format!("expected <kind>:<args> signal, got `{tok}`")))?;
    match kind {
        "const" => Ok(SignalSpec::Const(parse_value(rest, line, "const signal")?)),
        "step" => {
            let (v, t) = rest
                .split_once('@')
                .ok_or_else(|| err(line, format!("expected step:<v>@<t>, got `{tok}`")))?;
            Ok(SignalSpec::Step {
                value: parse_value(v, line, "step value")?,
                at: parse_value(t, line, "step time")?,
            })
        }
        "sin" => {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return Err(err(line, format!("expected sin:<amp>,<freq>,<phase>, got `{tok}`")));
            }
            Ok(SignalSpec::Sin {
                amp: parse_value(parts[0], line, "sin amplitude")?,
                freq: parse_value(parts[1], line, "sin frequency")?,
                phase: parse_value(parts[2], line, "sin phase")?,
            })
        }
        "csv" => Ok(SignalSpec::Csv(rest.to_string())),
        other => Err(err(line, format!("unknown signal kind `{other}`"))),
    }
}

fn parse_port(tok: &str, line: usize) -> Result<CouplingPort, ParseError> {
    let open = tok
        .find('(')
        .ok_or_else(|| err(line, format!("expected <dom>(<n+>,<n->), got `{tok}`")))?;
    if !tok.ends_with(')') {
        return Err(err(line, format!("missing `)` in port `{tok}`")));
    }
    let dom = Domain::from_keyword(&tok[..open])
        .ok_or_else(|| err(line, format!("unknown domain `{}`", &tok[..open])))?;
    let inner = &tok[open + 1..tok.len() - 1];
    let (np, nm) = inner
        .split_once(',')
        .ok_or_else(|| err(line, format!("expected two nodes in port `{tok}`")))?;
    if np.is_empty() || nm.is_empty() {
        return Err(err(line, format!("empty node name in port `{tok}`")));
    }
    Ok(CouplingPort {
        domain: dom,
        node_plus: np.to_string(),
        node_minus: nm.to_string(),
    })
}

/// Parse netlist source text.
pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    let mut net = Netlist::default();
    let mut names: HashSet<String> = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.split_once('#') {
            Some((before, _)) => before,
            None => raw,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match toks[0] {
            "el" => {
                if toks.len() != 7 {
                    return Err(err(
                        lineno,
                        format!("expected `el <name> <type> <dom> <n+> <n-> <value>`, got {} fields", toks.len()),
                    ));
                }
                let name = toks[1].to_string();
                if !names.insert(name.clone()) {
                    return Err(err(lineno, format!("duplicate name `{name}`")));
                }
                let etype = ElementType::from_keyword(toks[2])
                    .ok_or_else(|| err(lineno, format!("unknown element type `{}`", toks[2])))?;
                let dom = Domain::from_keyword(toks[3])
                    .ok_or_else(|| err(lineno, format!("unknown domain `{}`", toks[3])))?;
                if dom != etype.domain() {
                    return Err(err(
                        lineno,
                        format!(
                            "element type `{}` belongs to domain `{}`, not `{}`",
                            toks[2],
                            etype.domain().keyword(),
                            toks[3]
                        ),
                    ));
                }
                let value = parse_value(toks[6], lineno, "element value")?;
                if !(value > 0.0) {
                    return Err(err(lineno, format!("element value must be positive, got {value}")));
                }
                net.elements.push(Element {
                    name,
                    etype,
                    node_plus: toks[4].to_string(),
                    node_minus: toks[5].to_string(),
                    value,
                    line: lineno,
                });
            }
            "src" => {
                if toks.len() != 7 {
                    return Err(err(
                        lineno,
                        format!("expected `src <name> <across|through> <dom> <n+> <n-> <signal>`, got {} fields", toks.len()),
                    ));
                }
                let name = toks[1].to_string();
                if !names.insert(name.clone()) {
                    return Err(err(lineno, format!("duplicate name `{name}`")));
                }
                let kind = match toks[2] {
                    "across" => SourceKind::Across,
                    "through" => SourceKind::Through,
                    other => return Err(err(lineno, format!("expected across|through, got `{other}`"))),
                };
                let dom = Domain::from_keyword(toks[3])
                    .ok_or_else(|| err(lineno, format!("unknown domain `{}`", toks[3])))?;
                net.sources.push(Source {
                    name,
                    kind,
                    domain: dom,
                    node_plus: toks[4].to_string(),
                    node_minus: toks[5].to_string(),
                    signal: parse_signal(toks[6], lineno)?,
                    line: lineno,
                });
            }
            "cb" => {
                if toks.len() != 6 {
                    return Err(err(
                        lineno,
                        format!("expected `cb <name> <xfmr|gyr> <port> <port> <K>`, got {} fields", toks.len()),
                    ));
                }
                let name = toks[1].to_string();
                if !names.insert(name.clone()) {
                    return Err(err(lineno, format!("duplicate name `{name}`")));
                }
                let kind = match toks[2] {
                    "xfmr" => CouplingKind::Transformer,
                    "gyr" => CouplingKind::Gyrator,
                    other => return Err(err(lineno, format!("expected xfmr|gyr, got `{other}`"))),
                };
                let ratio = parse_value(toks[5], lineno, "coupling ratio")?;
                if !(ratio > 0.0) {
                    return Err(err(lineno, format!("coupling ratio must be positive, got {ratio}")));
                }
                net.couplings.push(Coupling {
                    name,
                    kind,
                    port_a: parse_port(toks[3], lineno)?,
                    port_b: parse_port(toks[4], lineno)?,
                    ratio,
                    line: lineno,
                });
            }
            "out" => {
                if toks.len() != 2 {
                    return Err(err(lineno, "expected `out <variable>`"));
                }
                net.outputs.push(toks[1].to_string());
            }
            "dir" => {
                if toks.len() != 3 {
                    return Err(err(lineno, "expected `dir <variable> <+|->`"));
                }
                let flip = match toks[2] {
                    "+" => false,
                    "-" => true,
                    other => return Err(err(lineno, format!("expected + or -, got `{other}`"))),
                };
                net.orientations.insert(toks[1].to_string(), flip);
            }
            other => {
                return Err(err(lineno, format!("unknown record `{other}` (expected el|src|cb|out|dir)")));
            }
        }
    }
    Ok(net)
}

/// Print a netlist back to its textual form (inverse of [`parse_netlist`]
/// modulo comments and blank lines).
pub fn print_netlist(net: &Netlist) -> String {
    let mut out = String::new();
    for e in &net.elements {
        out.push_str(&format!(
            "el {} {} {} {} {} {}\n",
            e.name,
            e.etype.keyword(),
            e.domain().keyword(),
            e.node_plus,
            e.node_minus,
            e.value
        ));
    }
    for s in &net.sources {
        out.push_str(&format!(
            "src {} {} {} {} {} {}\n",
            s.name,
            match s.kind {
                SourceKind::Across => "across",
                SourceKind::Through => "through",
            },
            s.domain.keyword(),
            s.node_plus,
            s.node_minus,
            s.signal
        ));
    }
    for c in &net.couplings {
        out.push_str(&format!(
            "cb {} {} {}({},{}) {}({},{}) {}\n",
            c.name,
            match c.kind {
                CouplingKind::Transformer => "xfmr",
                CouplingKind::Gyrator => "gyr",
            },
            c.port_a.domain.keyword(),
            c.port_a.node_plus,
            c.port_a.node_minus,
            c.port_b.domain.keyword(),
            c.port_b.node_plus,
            c.port_b.node_minus,
            c.ratio
        ));
    }
    for o in &net.outputs {
        out.push_str(&format!("out {o}\n"));
    }
    let mut dirs: Vec<_> = net.orientations.iter().collect();
    dirs.sort();
    for (var, flip) in dirs {
        out.push_str(&format!("dir {} {}\n", var, if *flip { "-" } else { "+" }));
    }
    out
}

/// A single validation finding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub message: String,
}

/// Result of structural validation; an empty violation list means the
/// netlist is accepted by the rest of the pipeline.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, message: String) {
        self.violations.push(Violation { message });
    }
}

/// Structural validation: connectivity, port domains, and positive-direction
/// consistency between elements sharing a power line.
pub fn validate(net: &Netlist) -> ValidationReport {
    let mut report = ValidationReport::default();

    // Terminal incidence per node.
    let bump = |map: &mut HashMap<String, usize>, node: &str| {
        *map.entry(node.to_string()).or_insert(0) += 1;
    };
    let mut counts: HashMap<String, usize> = HashMap::new();
    for e in &net.elements {
        bump(&mut counts, &e.node_plus);
        bump(&mut counts, &e.node_minus);
    }
    for s in &net.sources {
        bump(&mut counts, &s.node_plus);
        bump(&mut counts, &s.node_minus);
    }
    for c in &net.couplings {
        bump(&mut counts, &c.port_a.node_plus);
        bump(&mut counts, &c.port_a.node_minus);
        bump(&mut counts, &c.port_b.node_plus);
        bump(&mut counts, &c.port_b.node_minus);
    }
    for (node, n) in &counts {
        if node != GND && *n < 2 {
            report.push(format!("dangling node `{node}`: referenced by only one terminal"));
        }
    }

    for e in &net.elements {
        if e.node_plus == e.node_minus {
            report.push(format!("element `{}` connects node `{}` to itself", e.name, e.node_plus));
        }
    }
    for s in &net.sources {
        if s.node_plus == s.node_minus {
            report.push(format!("source `{}` connects node `{}` to itself", s.name, s.node_plus));
        }
        if s.node_minus != GND {
            report.push(format!(
                "source `{}` must reference the ground rail on its minus terminal (got `{}`)",
                s.name, s.node_minus
            ));
        }
    }
    if net.sources.is_empty() {
        report.push("netlist declares no source".to_string());
    }

    // Domain consistency at coupling ports: every element terminal on a port
    // node must live in the port's domain.
    for c in &net.couplings {
        for port in [&c.port_a, &c.port_b] {
            if port.node_minus != GND {
                report.push(format!(
                    "coupling `{}` port must reference the ground rail on its minus terminal (got `{}`)",
                    c.name, port.node_minus
                ));
            }
            for e in &net.elements {
                let touches = e.node_plus == port.node_plus || e.node_minus == port.node_plus;
                if touches && e.domain() != port.domain {
                    report.push(format!(
                        "element `{}` ({}) touches coupling `{}` port node `{}` declared in domain `{}`",
                        e.name,
                        e.domain().keyword(),
                        c.name,
                        port.node_plus,
                        port.domain.keyword()
                    ));
                }
            }
        }
        if c.kind == CouplingKind::Transformer && c.port_a.domain == c.port_b.domain {
            // Allowed (e.g. an ideal electrical transformer); no finding.
        }
    }

    // Positive-direction consistency: elements that share a power line must
    // share the positive direction of its through variable.  The expected
    // direction is taken from breadth-first distance to the first source: a
    // chain element should point away from the source, a shunt element
    // toward the ground rail.  A `dir <var> -` record legitimizes a reversed
    // declaration.
    if let Some(first) = net.sources.first() {
        let dist = bfs_distances(net, &first.node_plus);
        for e in &net.elements {
            let flip = net.flipped(&e.across_label())
                || e.state_label().map(|l| net.flipped(&l)).unwrap_or(false)
                || net.flipped(&e.through_label());
            let reversed = if e.node_minus == GND {
                false
            } else if e.node_plus == GND {
                true
            } else {
                match (dist.get(&e.node_plus), dist.get(&e.node_minus)) {
                    (Some(dp), Some(dm)) => dp > dm,
                    _ => false,
                }
            };
            if reversed && !flip {
                report.push(format!(
                    "element `{}` is declared against the positive direction shared by its power line; \
                     swap its terminals or declare `dir {} -`",
                    e.name,
                    e.state_label().unwrap_or_else(|| e.through_label())
                ));
            }
        }
    }

    report
}

fn bfs_distances(net: &Netlist, start: &str) -> HashMap<String, usize> {
    let push_edge = |map: &mut HashMap<String, Vec<String>>, a: &str, b: &str| {
        map.entry(a.to_string()).or_default().push(b.to_string());
        map.entry(b.to_string()).or_default().push(a.to_string());
    };
    let mut graph: HashMap<String, Vec<String>> = HashMap::new();
    for e in &net.elements {
        push_edge(&mut graph, &e.node_plus, &e.node_minus);
    }
    for c in &net.couplings {
        // A coupling carries the chain across domains.
        push_edge(&mut graph, &c.port_a.node_plus, &c.port_b.node_plus);
    }
    let mut dist: HashMap<String, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(start.to_string(), 0);
    queue.push_back(start.to_string());
    while let Some(node) = queue.pop_front() {
        let d = dist[&node];
        if node == GND {
            continue; // the reference rail does not propagate chain order
        }
        if let Some(nexts) = graph.get(&node) {
            for n in nexts.clone() {
                if !dist.contains_key(&n) {
                    dist.insert(n.clone(), d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}
