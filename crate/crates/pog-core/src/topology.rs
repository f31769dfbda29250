//! Structural analysis of a netlist: splitting it into domain segments,
//! reducing each segment's element graph by series/parallel merges, and
//! linearizing the result into an ordered chain of series elements, shunt
//! branches, and couplings.  The chain is the skeleton from which the block
//! scheme is grown.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::netlist::{Coupling, CouplingKind, Domain, Netlist, SourceKind, GND};

/// Series/parallel tree over element indices (two-terminal one-port).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SPTree {
    Leaf(usize),
    Series(Vec<SPTree>),
    Parallel(Vec<SPTree>),
}

impl SPTree {
    pub fn leaf_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            SPTree::Leaf(i) => out.push(*i),
            SPTree::Series(cs) | SPTree::Parallel(cs) => {
                for c in cs {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Human-readable structure, e.g. `(L3 || R5)`.
    pub fn describe(&self, net: &Netlist) -> String {
        match self {
            SPTree::Leaf(i) => net.elements[*i].name.clone(),
            SPTree::Series(cs) => {
                let parts: Vec<_> = cs.iter().map(|c| c.describe(net)).collect();
                format!("({})", parts.join(" - "))
            }
            SPTree::Parallel(cs) => {
                let parts: Vec<_> = cs.iter().map(|c| c.describe(net)).collect();
                format!("({})", parts.join(" || "))
            }
        }
    }
}

/// How the chain terminates at one of its two ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChainEnd {
    /// Ideal generator imposing the across variable (source index).
    AcrossSource(usize),
    /// Ideal generator imposing the through variable (source index).
    ThroughSource(usize),
    /// No continuation: the through variable beyond the last shunt is zero.
    Open,
    /// The chain closes directly on the reference rail: the across variable
    /// after the last series element is zero.
    Short,
}

/// One slot of the linearized chain.
#[derive(Clone, Debug, PartialEq)]
pub enum ChainItem {
    /// One-port inserted along the power flow (carries the section through
    /// variable, drops across).
    Series { tree: SPTree, domain: Domain },
    /// One-port shunted between the chain and the reference rail (carries
    /// the section across variable, drains through).
    Parallel { tree: SPTree, domain: Domain },
    /// Energy conversion between two domain segments (coupling index).
    Coupling { index: usize },
}

/// Linearized ladder: left end, ordered items, right end.  With `n` items
/// the chain has `n + 1` power sections, one per boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct SPChain {
    pub left: ChainEnd,
    pub items: Vec<ChainItem>,
    pub right: ChainEnd,
}

impl SPChain {
    pub fn section_count(&self) -> usize {
        self.items.len() + 1
    }

    /// Domain of each power section, left to right.
    pub fn section_domains(&self, net: &Netlist) -> Vec<Domain> {
        let mut doms = Vec::with_capacity(self.section_count());
        let mut current = self.leftmost_domain(net);
        doms.push(current);
        for item in &self.items {
            if let ChainItem::Coupling { index } = item {
                current = net.couplings[*index].port_b.domain;
            }
            doms.push(current);
        }
        doms
    }

    fn leftmost_domain(&self, net: &Netlist) -> Domain {
        match &self.left {
            ChainEnd::AcrossSource(i) | ChainEnd::ThroughSource(i) => net.sources[*i].domain,
            _ => self
                .items
                .iter()
                .find_map(|it| match it {
                    ChainItem::Series { domain, .. } | ChainItem::Parallel { domain, .. } => {
                        Some(*domain)
                    }
                    ChainItem::Coupling { index } => Some(net.couplings[*index].port_a.domain),
                })
                .unwrap_or(Domain::Electrical),
        }
    }

    /// One line per end/item, for diagnostics and the `sections` emitter.
    pub fn describe(&self, net: &Netlist) -> Vec<String> {
        let end_str = |e: &ChainEnd| match e {
            ChainEnd::AcrossSource(i) => format!("across source {}", net.sources[*i].name),
            ChainEnd::ThroughSource(i) => format!("through source {}", net.sources[*i].name),
            ChainEnd::Open => "open end".to_string(),
            ChainEnd::Short => "short to reference".to_string(),
        };
        let mut lines = vec![format!("left: {}", end_str(&self.left))];
        for item in &self.items {
            lines.push(match item {
                ChainItem::Series { tree, domain } => {
                    format!("series [{}]: {}", domain.keyword(), tree.describe(net))
                }
                ChainItem::Parallel { tree, domain } => {
                    format!("parallel [{}]: {}", domain.keyword(), tree.describe(net))
                }
                ChainItem::Coupling { index } => {
                    let c = &net.couplings[*index];
                    format!(
                        "coupling {}: {} {} -> {}",
                        c.name,
                        match c.kind {
                            CouplingKind::Transformer => "transformer",
                            CouplingKind::Gyrator => "gyrator",
                        },
                        c.port_a.domain.keyword(),
                        c.port_b.domain.keyword()
                    )
                }
            });
        }
        lines.push(format!("right: {}", end_str(&self.right)));
        lines
    }
}

/// Structural failure while building the chain.
#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("network is not series-parallel: {0}")]
    NonSeriesParallel(String),
    #[error("disconnected netlist: {0}")]
    Disconnected(String),
    #[error("unsupported topology: {0}")]
    Unsupported(String),
}

/// Internal reduction tree: like [`SPTree`] plus a marker edge standing for
/// the continuation of the chain past the segment's right port.
#[derive(Clone, Debug, PartialEq, Eq)]
enum RTree {
    Elem(usize),
    Marker,
    Ser(Vec<RTree>),
    Par(Vec<RTree>),
}

impl RTree {
    fn contains_marker(&self) -> bool {
        match self {
            RTree::Marker => true,
            RTree::Elem(_) => false,
            RTree::Ser(cs) | RTree::Par(cs) => cs.iter().any(|c| c.contains_marker()),
        }
    }

    fn reversed(self) -> RTree {
        match self {
            RTree::Ser(mut cs) => {
                cs.reverse();
                RTree::Ser(cs.into_iter().map(|c| c.reversed()).collect())
            }
            RTree::Par(cs) => RTree::Par(cs.into_iter().map(|c| c.reversed()).collect()),
            leaf => leaf,
        }
    }

    /// Smallest element name in the subtree, used to order parallel
    /// branches deterministically; the marker sorts last.
    fn sort_key(&self, net: &Netlist) -> String {
        match self {
            RTree::Elem(i) => net.elements[*i].name.clone(),
            RTree::Marker => "\u{10FFFF}".to_string(),
            RTree::Ser(cs) | RTree::Par(cs) => cs
                .iter()
                .map(|c| c.sort_key(net))
                .min()
                .unwrap_or_default(),
        }
    }

    fn into_sp(self) -> SPTree {
        match self {
            RTree::Elem(i) => SPTree::Leaf(i),
            RTree::Marker => unreachable!("marker must be stripped before conversion"),
            RTree::Ser(cs) => {
                let mut out: Vec<SPTree> = cs.into_iter().map(|c| c.into_sp()).collect();
                if out.len() == 1 {
                    out.pop().unwrap()
                } else {
                    SPTree::Series(out)
                }
            }
            RTree::Par(cs) => {
                let mut out: Vec<SPTree> = cs.into_iter().map(|c| c.into_sp()).collect();
                if out.len() == 1 {
                    out.pop().unwrap()
                } else {
                    SPTree::Parallel(out)
                }
            }
        }
    }
}

fn ser(a: RTree, b: RTree) -> RTree {
    let mut cs = Vec::new();
    for t in [a, b] {
        match t {
            RTree::Ser(mut inner) => cs.append(&mut inner),
            other => cs.push(other),
        }
    }
    RTree::Ser(cs)
}

fn par(a: RTree, b: RTree, net: &Netlist) -> RTree {
    let mut cs = Vec::new();
    for t in [a, b] {
        match t {
            RTree::Par(mut inner) => cs.append(&mut inner),
            other => cs.push(other),
        }
    }
    cs.sort_by_key(|c| c.sort_key(net));
    RTree::Par(cs)
}

#[derive(Clone, Debug)]
struct REdge {
    u: String,
    v: String,
    tree: RTree,
}

impl REdge {
    fn oriented_from(self, node: &str) -> REdge {
        if self.u == node {
            self
        } else {
            REdge {
                u: self.v,
                v: self.u,
                tree: self.tree.reversed(),
            }
        }
    }
}

/// Reduce a set of edges between `start` and the reference rail to a single
/// series/parallel tree oriented `start -> gnd`.
fn reduce_segment(
    mut edges: Vec<REdge>,
    start: &str,
    net: &Netlist,
) -> Result<RTree, TopologyError> {
    loop {
        if edges.len() == 1 {
            let e = edges.pop().unwrap();
            let spans = (e.u == start && e.v == GND) || (e.u == GND && e.v == start);
            if spans {
                return Ok(e.oriented_from(start).tree);
            }
            return Err(TopologyError::NonSeriesParallel(format!(
                "reduction ended on nodes `{}`..`{}` instead of the segment port and the reference rail",
                e.u, e.v
            )));
        }

        // Parallel merge: two edges with the same endpoint pair.
        let mut merged = false;
        'par: for i in 0..edges.len() {
            for j in i + 1..edges.len() {
                let same = (edges[i].u == edges[j].u && edges[i].v == edges[j].v)
                    || (edges[i].u == edges[j].v && edges[i].v == edges[j].u);
                if same {
                    let b = edges.remove(j);
                    let a = edges.remove(i);
                    let u = a.u.clone();
                    let b = b.oriented_from(&u);
                    edges.push(REdge {
                        u: a.u.clone(),
                        v: a.v.clone(),
                        tree: par(a.tree, b.tree, net),
                    });
                    merged = true;
                    break 'par;
                }
            }
        }
        if merged {
            continue;
        }

        // Series merge: an interior node of degree two.
        let mut degree: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            degree.entry(&e.u).or_default().push(i);
            degree.entry(&e.v).or_default().push(i);
        }
        let mut pick: Option<(usize, usize, String)> = None;
        for (node, inc) in &degree {
            if *node == start || *node == GND || inc.len() != 2 {
                continue;
            }
            pick = Some((inc[0], inc[1], node.to_string()));
            break;
        }
        match pick {
            Some((i, j, node)) => {
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                let b = edges.remove(hi);
                let a = edges.remove(lo);
                // Orient a into the node and b out of it.
                let a = if a.v == node {
                    a
                } else {
                    let other = if a.u == node { a.v.clone() } else { a.u.clone() };
                    a.oriented_from(&other)
                };
                let b = b.oriented_from(&node);
                edges.push(REdge {
                    u: a.u.clone(),
                    v: b.v.clone(),
                    tree: ser(a.tree, b.tree),
                });
            }
            None => {
                let stuck: Vec<String> = edges
                    .iter()
                    .map(|e| format!("{}..{}", e.u, e.v))
                    .collect();
                return Err(TopologyError::NonSeriesParallel(format!(
                    "no series or parallel merge applies; remaining edges: {}",
                    stuck.join(", ")
                )));
            }
        }
    }
}

/// Nodes reachable from `start` through element edges without passing
/// through the reference rail.
fn component_nodes(net: &Netlist, start: &str) -> HashSet<String> {
    let mut adj: HashMap<String, Vec<String>> = HashMap::new();
    for e in &net.elements {
        adj.entry(e.node_plus.clone())
            .or_default()
            .push(e.node_minus.clone());
        adj.entry(e.node_minus.clone())
            .or_default()
            .push(e.node_plus.clone());
    }
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.to_string());
    queue.push_back(start.to_string());
    while let Some(node) = queue.pop_front() {
        if node == GND {
            continue;
        }
        if let Some(nexts) = adj.get(&node) {
            for n in nexts {
                if seen.insert(n.clone()) {
                    queue.push_back(n.clone());
                }
            }
        }
    }
    seen
}

fn segment_edges(net: &Netlist, nodes: &HashSet<String>, domain: Domain) -> Result<Vec<REdge>, TopologyError> {
    let mut edges = Vec::new();
    for (i, e) in net.elements.iter().enumerate() {
        let touches = (nodes.contains(&e.node_plus) && e.node_plus != GND)
            || (nodes.contains(&e.node_minus) && e.node_minus != GND);
        if touches {
            if e.domain() != domain {
                return Err(TopologyError::Unsupported(format!(
                    "element `{}` ({}) is wired into a `{}` segment",
                    e.name,
                    e.domain().keyword(),
                    domain.keyword()
                )));
            }
            edges.push(REdge {
                u: e.node_plus.clone(),
                v: e.node_minus.clone(),
                tree: RTree::Elem(i),
            });
        }
    }
    Ok(edges)
}

/// Linearize a reduced segment tree that contains the continuation marker.
fn linearize_through(
    tree: RTree,
    domain: Domain,
    net: &Netlist,
    items: &mut Vec<ChainItem>,
) -> Result<(), TopologyError> {
    match tree {
        RTree::Marker => Ok(()),
        RTree::Ser(children) => {
            let n = children.len();
            for (k, child) in children.into_iter().enumerate() {
                if child.contains_marker() {
                    if k != n - 1 {
                        return Err(TopologyError::NonSeriesParallel(
                            "continuation is not at the tail of a series run".to_string(),
                        ));
                    }
                    return linearize_through(child, domain, net, items);
                }
                items.push(ChainItem::Series {
                    tree: child.into_sp(),
                    domain,
                });
            }
            Ok(())
        }
        RTree::Par(children) => {
            let mut cont = None;
            for child in children {
                if child.contains_marker() {
                    if cont.is_some() {
                        return Err(TopologyError::NonSeriesParallel(
                            "continuation appears in two parallel branches".to_string(),
                        ));
                    }
                    cont = Some(child);
                } else {
                    items.push(ChainItem::Parallel {
                        tree: child.into_sp(),
                        domain,
                    });
                }
            }
            match cont {
                Some(child) => linearize_through(child, domain, net, items),
                None => Err(TopologyError::NonSeriesParallel(
                    "continuation lost inside a parallel group".to_string(),
                )),
            }
        }
        RTree::Elem(_) => Err(TopologyError::NonSeriesParallel(
            "continuation lost behind a single element".to_string(),
        )),
    }
}

/// Linearize the final segment of a single-source chain and pick its end.
fn linearize_terminal(
    tree: RTree,
    domain: Domain,
    items: &mut Vec<ChainItem>,
) -> Result<ChainEnd, TopologyError> {
    match tree {
        RTree::Elem(_) | RTree::Par(_) => {
            // Everything hangs between the port node and the reference rail.
            push_parallel_group(tree, domain, items);
            Ok(ChainEnd::Open)
        }
        RTree::Ser(children) => {
            let n = children.len();
            let mut end = ChainEnd::Short;
            for (k, child) in children.into_iter().enumerate() {
                let last = k == n - 1;
                if last {
                    match child {
                        RTree::Par(_) => {
                            push_parallel_group(child, domain, items);
                            end = ChainEnd::Open;
                        }
                        other => {
                            items.push(ChainItem::Series {
                                tree: other.into_sp(),
                                domain,
                            });
                            end = ChainEnd::Short;
                        }
                    }
                } else {
                    items.push(ChainItem::Series {
                        tree: child.into_sp(),
                        domain,
                    });
                }
            }
            Ok(end)
        }
        RTree::Marker => unreachable!("terminal segment carries no marker"),
    }
}

fn push_parallel_group(tree: RTree, domain: Domain, items: &mut Vec<ChainItem>) {
    match tree {
        RTree::Par(children) => {
            for child in children {
                items.push(ChainItem::Parallel {
                    tree: child.into_sp(),
                    domain,
                });
            }
        }
        other => items.push(ChainItem::Parallel {
            tree: other.into_sp(),
            domain,
        }),
    }
}

fn coupling_port_on<'a>(
    c: &'a Coupling,
    nodes: &HashSet<String>,
) -> Option<(&'a str, &'a str, bool)> {
    // Returns (near port node, far port node, entered through port a).
    if nodes.contains(&c.port_a.node_plus) {
        Some((&c.port_a.node_plus, &c.port_b.node_plus, true))
    } else if nodes.contains(&c.port_b.node_plus) {
        Some((&c.port_b.node_plus, &c.port_a.node_plus, false))
    } else {
        None
    }
}

/// Build the linearized chain for a netlist with one or two sources.
pub fn extract_chain(net: &Netlist) -> Result<SPChain, TopologyError> {
    if net.sources.is_empty() {
        return Err(TopologyError::Unsupported("a chain needs a source".to_string()));
    }
    if net.sources.len() > 2 {
        return Err(TopologyError::Unsupported(format!(
            "at most two sources are supported, got {}",
            net.sources.len()
        )));
    }

    let first = &net.sources[0];
    let left = match first.kind {
        SourceKind::Across => ChainEnd::AcrossSource(0),
        SourceKind::Through => ChainEnd::ThroughSource(0),
    };

    let mut items: Vec<ChainItem> = Vec::new();
    let mut used_couplings: HashSet<usize> = HashSet::new();
    let mut visited_elements: HashSet<usize> = HashSet::new();
    let mut node = first.node_plus.clone();
    let mut domain = first.domain;

    let right = loop {
        let nodes = component_nodes(net, &node);
        let mut edges = segment_edges(net, &nodes, domain)?;
        for e in &edges {
            if let RTree::Elem(i) = e.tree {
                visited_elements.insert(i);
            }
        }

        // Continuation past this segment: an unused coupling port or the
        // second source.
        let next_coupling = net
            .couplings
            .iter()
            .enumerate()
            .filter(|(i, _)| !used_couplings.contains(i))
            .find_map(|(i, c)| coupling_port_on(c, &nodes).map(|(near, far, via_a)| (i, near.to_string(), far.to_string(), via_a)));

        if let Some((ci, near, far, via_a)) = next_coupling {
            let c = &net.couplings[ci];
            let port_dom = if via_a { c.port_a.domain } else { c.port_b.domain };
            if port_dom != domain {
                return Err(TopologyError::Unsupported(format!(
                    "coupling `{}` enters a `{}` segment through its `{}` port",
                    c.name,
                    domain.keyword(),
                    port_dom.keyword()
                )));
            }
            edges.push(REdge {
                u: near.clone(),
                v: GND.to_string(),
                tree: RTree::Marker,
            });
            let tree = reduce_segment(edges, &node, net)?;
            linearize_through(tree, domain, net, &mut items)?;
            items.push(ChainItem::Coupling { index: ci });
            used_couplings.insert(ci);
            domain = if via_a { c.port_b.domain } else { c.port_a.domain };
            node = far;
            continue;
        }

        if net.sources.len() == 2 && nodes.contains(&net.sources[1].node_plus) {
            let second = &net.sources[1];
            if second.domain != domain {
                return Err(TopologyError::Unsupported(format!(
                    "source `{}` sits in a `{}` segment but is declared `{}`",
                    second.name,
                    domain.keyword(),
                    second.domain.keyword()
                )));
            }
            edges.push(REdge {
                u: second.node_plus.clone(),
                v: GND.to_string(),
                tree: RTree::Marker,
            });
            let tree = reduce_segment(edges, &node, net)?;
            linearize_through(tree, domain, net, &mut items)?;
            break match second.kind {
                SourceKind::Across => ChainEnd::AcrossSource(1),
                SourceKind::Through => ChainEnd::ThroughSource(1),
            };
        }

        if net.sources.len() == 2 {
            return Err(TopologyError::Disconnected(format!(
                "source `{}` is not reachable along the chain",
                net.sources[1].name
            )));
        }

        if edges.is_empty() {
            return Err(TopologyError::Disconnected(format!(
                "no element touches source node `{node}`"
            )));
        }
        let tree = reduce_segment(edges, &node, net)?;
        break linearize_terminal(tree, domain, &mut items)?;
    };

    for (i, e) in net.elements.iter().enumerate() {
        if !visited_elements.contains(&i) {
            return Err(TopologyError::Disconnected(format!(
                "element `{}` is not reachable from the chain",
                e.name
            )));
        }
    }
    for (i, c) in net.couplings.iter().enumerate() {
        if !used_couplings.contains(&i) {
            return Err(TopologyError::Disconnected(format!(
                "coupling `{}` is not reachable from the chain",
                c.name
            )));
        }
    }

    Ok(SPChain { left, items, right })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    const LADDER: &str = "\
src Va across e na gnd const:0
el C1 cap e na n1 1e-3
el L2 ind e n1 gnd 50e-3
el L3 ind e n1 n2 50e-3
el R3 res e n2 n3 1.0
el C4 cap e n3 gnd 1e-3
el R4 res e n3 n4 1.0
src Vb across e n4 gnd const:10
";

    fn names(net: &Netlist, item: &ChainItem) -> String {
        match item {
            ChainItem::Series { tree, .. } => format!("S:{}", tree.describe(net)),
            ChainItem::Parallel { tree, .. } => format!("P:{}", tree.describe(net)),
            ChainItem::Coupling { index } => format!("C:{}", net.couplings[*index].name),
        }
    }

    #[test]
    fn ladder_linearizes_in_order() {
        let net = parse_netlist(LADDER).unwrap();
        let chain = extract_chain(&net).unwrap();
        let got: Vec<String> = chain.items.iter().map(|i| names(&net, i)).collect();
        assert_eq!(got, vec!["S:C1", "P:L2", "S:L3", "S:R3", "P:C4", "S:R4"]);
        assert_eq!(chain.left, ChainEnd::AcrossSource(0));
        assert_eq!(chain.right, ChainEnd::AcrossSource(1));
        assert_eq!(chain.section_count(), 7);
    }

    #[test]
    fn multi_domain_chain_crosses_couplings() {
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
",
        )
        .unwrap();
        let chain = extract_chain(&net).unwrap();
        let got: Vec<String> = chain.items.iter().map(|i| names(&net, i)).collect();
        assert_eq!(
            got,
            vec!["S:L1", "S:R1", "C:K12", "P:J2", "P:b2", "C:K23", "P:C3", "P:R3"]
        );
        assert_eq!(chain.right, ChainEnd::ThroughSource(1));
        assert_eq!(chain.section_count(), 9);
        let doms = chain.section_domains(&net);
        assert_eq!(doms[0], Domain::Electrical);
        assert_eq!(doms[3], Domain::MechRotational);
        assert_eq!(doms[8], Domain::Hydraulic);
    }

    #[test]
    fn nested_parallel_series_item() {
        let net = parse_netlist(
            "\
src Pa across hy na gnd const:1
el L1 hind hy na n1 1.0
el R1 hres hy n1 n2 1.0
el C2 hcap hy n2 gnd 1.0
el L3 hind hy n2 n3 1.0
el R5 hres hy n2 n3 1.0
el C4 hcap hy n3 gnd 1.0
el R4 hres hy n3 gnd 1.0
src Qb through hy n3 gnd const:0
",
        )
        .unwrap();
        let chain = extract_chain(&net).unwrap();
        let got: Vec<String> = chain.items.iter().map(|i| names(&net, i)).collect();
        assert_eq!(
            got,
            vec!["S:L1", "S:R1", "P:C2", "S:(L3 || R5)", "P:C4", "P:R4"]
        );
    }

    #[test]
    fn bridge_is_rejected() {
        let net = parse_netlist(
            "\
src V across e a gnd const:1
el R1 res e a b 1
el R2 res e a c 1
el R3 res e b gnd 1
el R4 res e c gnd 1
el R5 res e b c 1
",
        )
        .unwrap();
        assert!(matches!(
            extract_chain(&net),
            Err(TopologyError::NonSeriesParallel(_))
        ));
    }

    #[test]
    fn one_port_endings() {
        // Shunt at the source node: open end.
        let net = parse_netlist("src V across e n1 gnd const:1\nel C cap e n1 gnd 1\n").unwrap();
        let chain = extract_chain(&net).unwrap();
        assert_eq!(chain.items.len(), 1);
        assert!(matches!(chain.items[0], ChainItem::Parallel { .. }));
        assert_eq!(chain.right, ChainEnd::Open);

        // Series run into the reference rail: short end.
        let net =
            parse_netlist("src V across e n1 gnd const:1\nel L ind e n1 n2 1\nel C cap e n2 gnd 1\n")
                .unwrap();
        let chain = extract_chain(&net).unwrap();
        let got: Vec<String> = chain.items.iter().map(|i| names(&net, i)).collect();
        assert_eq!(got, vec!["S:L", "S:C"]);
        assert_eq!(chain.right, ChainEnd::Short);

        // Trailing shunt group: open end.
        let net = parse_netlist(
            "src V across e n1 gnd const:1\nel L ind e n1 n2 1\nel C cap e n2 gnd 1\nel R res e n2 gnd 1\n",
        )
        .unwrap();
        let chain = extract_chain(&net).unwrap();
        let got: Vec<String> = chain.items.iter().map(|i| names(&net, i)).collect();
        assert_eq!(got, vec!["S:L", "P:C", "P:R"]);
        assert_eq!(chain.right, ChainEnd::Open);
    }

    #[test]
    fn disconnected_element_is_reported() {
        let net = parse_netlist(
            "src V across e n1 gnd const:1\nel C cap e n1 gnd 1\nel R res e x y 1\nel R2 res e y x 1\n",
        )
        .unwrap();
        assert!(matches!(
            extract_chain(&net),
            Err(TopologyError::Disconnected(_))
        ));
    }

    #[test]
    fn parallel_branch_order_is_deterministic() {
        let a = parse_netlist(
            "src V across e n1 gnd const:1\nel L ind e n1 n2 1\nel Rz res e n2 gnd 1\nel Ca cap e n2 gnd 1\n",
        )
        .unwrap();
        let chain = extract_chain(&a).unwrap();
        let got: Vec<String> = chain.items.iter().map(|i| names(&a, i)).collect();
        // Shunt branches come out sorted by name regardless of declaration order.
        assert_eq!(got, vec!["S:L", "P:Ca", "P:Rz"]);
    }
}
