//! Mesh graph construction and queries: router positions, gateway flags,
//! radio counts, and the candidate-link set induced by transmission range.
//!
//! A [`Topology`] is immutable after construction and safe to share across
//! threads. Node ids are contiguous from 0 so per-node state can live in
//! dense vectors.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type NodeId = usize;
pub type LinkId = usize;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("no nodes")]
    NoNodes,
    #[error("gateway id {id} out of range for {nodes} nodes")]
    GatewayOutOfRange { id: NodeId, nodes: usize },
    #[error("spacing {spacing} m exceeds transmission range {tx_range} m: no links would form")]
    SpacingExceedsRange { spacing: f64, tx_range: f64 },
    #[error("graph is disconnected into {} components with sizes {:?}", components.len(),
            components.iter().map(Vec::len).collect::<Vec<_>>())]
    Disconnected { components: Vec<Vec<NodeId>> },
    #[error("node {node} is unreachable from every gateway")]
    Unreachable { node: NodeId },
    #[error("topology has no gateway node")]
    NoGateways,
    #[error("duplicate node id {id}")]
    DuplicateNode { id: NodeId },
    #[error("duplicate link id {id}")]
    DuplicateLink { id: LinkId },
    #[error("link {link} references missing node {node}")]
    DanglingEndpoint { link: LinkId, node: NodeId },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub radios: u32,
    pub is_gateway: bool,
}

/// Undirected candidate link between two routers within transmission range.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub a: NodeId,
    pub b: NodeId,
}

#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    tx_range: f64,
    int_range: f64,
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.links == other.links
            && self.tx_range == other.tx_range
            && self.int_range == other.int_range
    }
}

impl Topology {
    /// Validates the full invariant set: contiguous ids, radios ≥ 1, finite
    /// positions, no self-loops or duplicate pairs, every link within
    /// transmission range, int_range ≥ tx_range.
    pub fn new(
        nodes: Vec<Node>,
        links: Vec<Link>,
        tx_range: f64,
        int_range: f64,
    ) -> Result<Self, TopologyError> {
        if nodes.is_empty() {
            return Err(TopologyError::NoNodes);
        }
        if !(tx_range > 0.0) || !tx_range.is_finite() {
            return Err(TopologyError::Invalid(format!(
                "tx_range must be positive and finite, got {tx_range}"
            )));
        }
        if int_range < tx_range || !int_range.is_finite() {
            return Err(TopologyError::Invalid(format!(
                "int_range {int_range} must be finite and at least tx_range {tx_range}"
            )));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(TopologyError::Invalid(format!(
                    "node ids must be contiguous from 0; position {i} holds id {}",
                    n.id
                )));
            }
            if n.radios < 1 {
                return Err(TopologyError::Invalid(format!("node {} has zero radios", n.id)));
            }
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(TopologyError::Invalid(format!(
                    "node {} has a non-finite position",
                    n.id
                )));
            }
        }
        let mut adjacency: Vec<Vec<(NodeId, LinkId)>> = vec![Vec::new(); nodes.len()];
        let mut seen_pairs = std::collections::HashSet::new();
        for (i, l) in links.iter().enumerate() {
            if l.id != i {
                return Err(TopologyError::Invalid(format!(
                    "link ids must be contiguous from 0; position {i} holds id {}",
                    l.id
                )));
            }
            for node in [l.a, l.b] {
                if node >= nodes.len() {
                    return Err(TopologyError::DanglingEndpoint { link: l.id, node });
                }
            }
            if l.a == l.b {
                return Err(TopologyError::Invalid(format!("link {} is a self-loop", l.id)));
            }
            let pair = (l.a.min(l.b), l.a.max(l.b));
            if !seen_pairs.insert(pair) {
                return Err(TopologyError::Invalid(format!(
                    "duplicate link between nodes {} and {}",
                    pair.0, pair.1
                )));
            }
            let d = euclidean(&nodes[l.a], &nodes[l.b]);
            if d > tx_range {
                return Err(TopologyError::Invalid(format!(
                    "link {} spans {d:.3} m, beyond tx_range {tx_range} m",
                    l.id
                )));
            }
            adjacency[l.a].push((l.b, l.id));
            adjacency[l.b].push((l.a, l.id));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Topology { nodes, links, tx_range, int_range, adjacency })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn tx_range(&self) -> f64 {
        self.tx_range
    }

    pub fn int_range(&self) -> f64 {
        self.int_range
    }

    /// Neighbors of `n` as (node, link) pairs, sorted by neighbor id.
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[n]
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.adjacency[n].len()
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, l)| l)
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        euclidean(&self.nodes[a], &self.nodes[b])
    }

    pub fn link_length(&self, l: LinkId) -> f64 {
        let link = &self.links[l];
        self.distance(link.a, link.b)
    }

    pub fn gateways(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.is_gateway).map(|n| n.id)
    }

    pub fn is_gateway(&self, n: NodeId) -> bool {
        self.nodes[n].is_gateway
    }

    /// Copy of this topology with every node's radio count replaced. Used by
    /// scenario sweeps over the radio axis.
    pub fn with_radios(&self, radios: u32) -> Result<Topology, TopologyError> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node { radios, ..n.clone() })
            .collect();
        Topology::new(nodes, self.links.clone(), self.tx_range, self.int_range)
    }

    /// Serializes to the line-oriented text format. Nodes are emitted sorted
    /// by id, then links sorted by id, so save/load round-trips bit-exactly.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "meta tx_range={} int_range={}", self.tx_range, self.int_range);
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "node {} {} {} {} {}",
                n.id,
                n.x,
                n.y,
                n.radios,
                if n.is_gateway { 1 } else { 0 }
            );
        }
        for l in &self.links {
            let _ = writeln!(out, "link {} {} {}", l.id, l.a, l.b);
        }
        out
    }

    /// Parses the text format produced by [`Topology::to_file_string`].
    /// Lines starting with `#` and blank lines are ignored; nodes and links
    /// may appear in any order and are sorted by id.
    pub fn from_file_str(s: &str) -> Result<Self, TopologyError> {
        let mut meta: Option<(f64, f64)> = None;
        let mut nodes: Vec<Node> = Vec::new();
        let mut links: Vec<Link> = Vec::new();
        for (idx, raw) in s.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |msg: String| TopologyError::Parse { line: lineno, msg };
            match fields[0] {
                "meta" => {
                    let mut tx = None;
                    let mut int = None;
                    for f in &fields[1..] {
                        let (key, value) = f
                            .split_once('=')
                            .ok_or_else(|| parse_err(format!("expected key=value, got {f}")))?;
                        let v: f64 = value
                            .parse()
                            .map_err(|_| parse_err(format!("bad number {value}")))?;
                        match key {
                            "tx_range" => tx = Some(v),
                            "int_range" => int = Some(v),
                            _ => return Err(parse_err(format!("unknown meta key {key}"))),
                        }
                    }
                    match (tx, int) {
                        (Some(t), Some(i)) => meta = Some((t, i)),
                        _ => return Err(parse_err("meta needs tx_range and int_range".into())),
                    }
                }
                "node" => {
                    if fields.len() != 6 {
                        return Err(parse_err(format!(
                            "node line needs 5 fields, got {}",
                            fields.len() - 1
                        )));
                    }
                    let id: NodeId = fields[1]
                        .parse()
                        .map_err(|_| parse_err(format!("bad node id {}", fields[1])))?;
                    let x: f64 = fields[2]
                        .parse()
                        .map_err(|_| parse_err(format!("bad x coordinate {}", fields[2])))?;
                    let y: f64 = fields[3]
                        .parse()
                        .map_err(|_| parse_err(format!("bad y coordinate {}", fields[3])))?;
                    let radios: u32 = fields[4]
                        .parse()
                        .map_err(|_| parse_err(format!("bad radio count {}", fields[4])))?;
                    let is_gateway = match fields[5] {
                        "0" => false,
                        "1" => true,
                        other => return Err(parse_err(format!("gateway flag must be 0 or 1, got {other}"))),
                    };
                    nodes.push(Node { id, x, y, radios, is_gateway });
                }
                "link" => {
                    if fields.len() != 4 {
                        return Err(parse_err(format!(
                            "link line needs 3 fields, got {}",
                            fields.len() - 1
                        )));
                    }
                    let id: LinkId = fields[1]
                        .parse()
                        .map_err(|_| parse_err(format!("bad link id {}", fields[1])))?;
                    let a: NodeId = fields[2]
                        .parse()
                        .map_err(|_| parse_err(format!("bad endpoint {}", fields[2])))?;
                    let b: NodeId = fields[3]
                        .parse()
                        .map_err(|_| parse_err(format!("bad endpoint {}", fields[3])))?;
                    links.push(Link { id, a, b });
                }
                other => return Err(parse_err(format!("unknown record type {other}"))),
            }
        }
        if nodes.is_empty() {
            return Err(TopologyError::NoNodes);
        }
        let (tx_range, int_range) =
            meta.ok_or(TopologyError::Parse { line: 0, msg: "missing meta line".into() })?;
        nodes.sort_by_key(|n| n.id);
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(TopologyError::DuplicateNode { id: pair[0].id });
            }
        }
        links.sort_by_key(|l| l.id);
        for pair in links.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(TopologyError::DuplicateLink { id: pair[0].id });
            }
        }
        Topology::new(nodes, links, tx_range, int_range)
    }
}

fn euclidean(a: &Node, b: &Node) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// side × side lattice with the given spacing; links form between every node
/// pair within transmission range. Node i sits at column i % side, row
/// i / side.
pub fn grid_topology(
    side: usize,
    spacing: f64,
    tx_range: f64,
    int_range: f64,
    radios: u32,
    gateways: &[NodeId],
) -> Result<Topology, TopologyError> {
    if side < 2 {
        return Err(TopologyError::Invalid(format!("grid side must be at least 2, got {side}")));
    }
    if spacing > tx_range {
        return Err(TopologyError::SpacingExceedsRange { spacing, tx_range });
    }
    let n = side * side;
    for &g in gateways {
        if g >= n {
            return Err(TopologyError::GatewayOutOfRange { id: g, nodes: n });
        }
    }
    let nodes: Vec<Node> = (0..n)
        .map(|id| Node {
            id,
            x: (id % side) as f64 * spacing,
            y: (id / side) as f64 * spacing,
            radios,
            is_gateway: gateways.contains(&id),
        })
        .collect();
    let links = links_within_range(&nodes, tx_range);
    Topology::new(nodes, links, tx_range, int_range)
}

/// n nodes placed uniformly at random in the area by a seeded generator;
/// identical seeds yield bit-identical topologies. The `n_gateways` nodes
/// nearest the area corners become gateways (corners visited in the order
/// origin, far, right, top, so gateways spread apart). A disconnected result
/// is an error; callers may retry with another seed.
pub fn random_topology(
    n: usize,
    area: (f64, f64),
    tx_range: f64,
    int_range: f64,
    radios: u32,
    n_gateways: usize,
    seed: u64,
) -> Result<Topology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::Invalid(format!("need at least 2 nodes, got {n}")));
    }
    if n_gateways < 1 || n_gateways > n {
        return Err(TopologyError::Invalid(format!(
            "gateway count {n_gateways} outside [1, {n}]"
        )));
    }
    let (w, h) = area;
    if !(w > 0.0) || !(h > 0.0) {
        return Err(TopologyError::Invalid(format!("area {w}x{h} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<Node> = (0..n)
        .map(|id| {
            let x = rng.random_range(0.0..w);
            let y = rng.random_range(0.0..h);
            Node { id, x, y, radios, is_gateway: false }
        })
        .collect();
    let corners = [(0.0, 0.0), (w, h), (w, 0.0), (0.0, h)];
    for g in 0..n_gateways {
        let (cx, cy) = corners[g % corners.len()];
        let pick = nodes
            .iter()
            .filter(|node| !node.is_gateway)
            .min_by(|a, b| {
                let da = (a.x - cx).powi(2) + (a.y - cy).powi(2);
                let db = (b.x - cx).powi(2) + (b.y - cy).powi(2);
                da.partial_cmp(&db).unwrap().then(a.id.cmp(&b.id))
            })
            .map(|node| node.id)
            .expect("fewer gateways than nodes");
        nodes[pick].is_gateway = true;
    }
    let links = links_within_range(&nodes, tx_range);
    let t = Topology::new(nodes, links, tx_range, int_range)?;
    let components = connected_components(&t);
    if components.len() > 1 {
        return Err(TopologyError::Disconnected { components });
    }
    Ok(t)
}

fn links_within_range(nodes: &[Node], tx_range: f64) -> Vec<Link> {
    let mut links = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if euclidean(&nodes[i], &nodes[j]) <= tx_range {
                links.push(Link { id: links.len(), a: i, b: j });
            }
        }
    }
    links
}

fn connected_components(t: &Topology) -> Vec<Vec<NodeId>> {
    let mut component = vec![usize::MAX; t.node_count()];
    let mut count = 0;
    for start in 0..t.node_count() {
        if component[start] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        component[start] = count;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in t.neighbors(v) {
                if component[u] == usize::MAX {
                    component[u] = count;
                    queue.push_back(u);
                }
            }
        }
        count += 1;
    }
    let mut out = vec![Vec::new(); count];
    for (node, &c) in component.iter().enumerate() {
        out[c].push(node);
    }
    out
}

/// Hop distance of every node to the nearest gateway via multi-source BFS.
/// Defines the processing order for channel assignment: gateway links first,
/// then each ring outward.
pub fn bfs_levels(t: &Topology) -> Result<Vec<u32>, TopologyError> {
    let mut levels = vec![u32::MAX; t.node_count()];
    let mut queue = VecDeque::new();
    for g in t.gateways() {
        levels[g] = 0;
        queue.push_back(g);
    }
    if queue.is_empty() {
        return Err(TopologyError::NoGateways);
    }
    while let Some(v) = queue.pop_front() {
        for &(u, _) in t.neighbors(v) {
            if levels[u] == u32::MAX {
                levels[u] = levels[v] + 1;
                queue.push_back(u);
            }
        }
    }
    if let Some(node) = levels.iter().position(|&l| l == u32::MAX) {
        return Err(TopologyError::Unreachable { node });
    }
    Ok(levels)
}

pub fn save_topology(t: &Topology, path: &Path) -> Result<(), TopologyError> {
    fs::write(path, t.to_file_string())?;
    Ok(())
}

pub fn load_topology(path: &Path) -> Result<Topology, TopologyError> {
    let text = fs::read_to_string(path)?;
    Topology::from_file_str(&text)
}
