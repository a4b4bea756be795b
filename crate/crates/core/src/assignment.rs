//! Interference-aware edge coloring: every link gets one of K partially
//! overlapped channels, chosen to minimize SINR-measured interference while
//! honoring per-node radio budgets, plus the per-link interference database
//! consumed by routing.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::phy::{self, linear_overlap, Channel, PhyError, PhyParams};
use crate::topology::{bfs_levels, LinkId, NodeId, Topology, TopologyError};

/// Channel value marking a link that has not been colored yet.
pub const UNCOLORED: Channel = 0;

const BRUTE_FORCE_LIMIT: f64 = 1e7;

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("no channel satisfies the radio limits at both endpoints of link {link} ({a}-{b})")]
    RadioConstraintUnsatisfiable { link: LinkId, a: NodeId, b: NodeId },
    #[error("instance too large for exhaustive search: {states:.3e} assignments exceed {limit:.0e}")]
    InstanceTooLarge { states: f64, limit: f64 },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

/// Map link → channel plus the order links were colored in.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAssignment {
    channel_of: Vec<Channel>,
    order: Vec<LinkId>,
}

impl ChannelAssignment {
    pub fn uncolored(n_links: usize) -> Self {
        ChannelAssignment { channel_of: vec![UNCOLORED; n_links], order: Vec::new() }
    }

    /// Builds an assignment from an explicit channel vector (hand-built
    /// scenarios, file loads). The coloring order is taken as link-id order.
    pub fn from_channels(channels: Vec<Channel>) -> Self {
        let order = (0..channels.len()).collect();
        ChannelAssignment { channel_of: channels, order }
    }

    pub fn channel(&self, l: LinkId) -> Channel {
        self.channel_of[l]
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channel_of
    }

    pub fn order(&self) -> &[LinkId] {
        &self.order
    }

    pub fn is_complete(&self) -> bool {
        self.channel_of.iter().all(|&c| c != UNCOLORED)
    }

    fn set(&mut self, l: LinkId, c: Channel) {
        debug_assert_eq!(self.channel_of[l], UNCOLORED);
        self.channel_of[l] = c;
        self.order.push(l);
    }
}

/// Per-link SINR in both directions and the Shannon capacity of the worse
/// direction. A cache over (Topology, ChannelAssignment, PhyParams): it can
/// always be recomputed exactly with [`compute_interference_db`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkInterference {
    /// SINR at endpoint `b` receiving from `a`, linear.
    pub sinr_fwd: f64,
    /// SINR at endpoint `a` receiving from `b`, linear.
    pub sinr_rev: f64,
    pub capacity_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceDb {
    entries: Vec<LinkInterference>,
}

impl InterferenceDb {
    pub fn entry(&self, l: LinkId) -> &LinkInterference {
        &self.entries[l]
    }

    pub fn entries(&self) -> &[LinkInterference] {
        &self.entries
    }

    /// Conservative link SINR: the worse of the two directions.
    pub fn link_sinr(&self, l: LinkId) -> f64 {
        let e = &self.entries[l];
        e.sinr_fwd.min(e.sinr_rev)
    }

    pub fn aggregate_capacity_bps(&self) -> f64 {
        self.entries.iter().map(|e| e.capacity_bps).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Two links sharing a node carry the same channel. Hard unless the
    /// node's degree exceeds the channel or radio budget, which forces reuse.
    AdjacentSameChannel {
        node: NodeId,
        links: (LinkId, LinkId),
        channel: Channel,
        forced_by_k: bool,
    },
    /// A node's incident links use more distinct channels than it has radios.
    RadioCountExceeded { node: NodeId, distinct: usize, radios: u32 },
    /// Advisory strong-coloring check: two links within a two-hop edge
    /// neighborhood share a channel.
    TwoHopSameChannel { links: (LinkId, LinkId), channel: Channel },
}

impl Violation {
    pub fn is_hard(&self) -> bool {
        match self {
            Violation::AdjacentSameChannel { forced_by_k, .. } => !forced_by_k,
            Violation::RadioCountExceeded { .. } => true,
            Violation::TwoHopSameChannel { .. } => false,
        }
    }
}

/// Pairwise interference weights between links, independent of channels.
///
/// The weight of an unordered link pair is the transmit power times the sum
/// of worst-case gains: for each endpoint of one link, the gain from the
/// nearest endpoint of the other link within interference range (links are
/// undirected, so the stronger endpoint stands in for the unknown
/// transmitter). Multiplied by the overlap factor of the two channels this
/// gives the interference power the pair exchanges.
struct PairGains {
    n: usize,
    gain: Vec<f64>,
}

impl PairGains {
    fn build(t: &Topology, p: &PhyParams) -> PairGains {
        let n = t.link_count();
        let power = p.tx_power_mw();
        let mut gain = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let li = t.link(i);
                let lj = t.link(j);
                let g = endpoint_gain(t, p, j, li.a)
                    + endpoint_gain(t, p, j, li.b)
                    + endpoint_gain(t, p, i, lj.a)
                    + endpoint_gain(t, p, i, lj.b);
                let w = power * g;
                gain[i * n + j] = w;
                gain[j * n + i] = w;
            }
        }
        PairGains { n, gain }
    }

    fn at(&self, i: LinkId, j: LinkId) -> f64 {
        self.gain[i * self.n + j]
    }
}

/// Worst-case gain from link `from` transmitting toward node `receiver`:
/// the nearest endpoint within interference range, skipping endpoints
/// co-located with the receiver (a node never jams its own radio at zero
/// distance; the far endpoint models that link's transmission instead).
fn endpoint_gain(t: &Topology, p: &PhyParams, from: LinkId, receiver: NodeId) -> f64 {
    let link = t.link(from);
    let mut best = 0.0f64;
    for z in [link.a, link.b] {
        let d = t.distance(z, receiver);
        if d <= 0.0 || d > t.int_range() {
            continue;
        }
        let g = d.powf(-p.path_loss_exp);
        if g > best {
            best = g;
        }
    }
    best
}

/// Greedy interference-aware coloring.
///
/// Nodes are processed in BFS order from the gateways (level, then id); each
/// node's uncolored incident links are colored in link-id order. For a link,
/// every channel in [1, K] is scored by the interference power it would
/// exchange with already-colored links; the minimum wins, ties to the lowest
/// channel. A channel already present at either endpoint is forbidden while
/// any alternative exists, and a channel that would push an endpoint past
/// its radio budget is always forbidden. When every channel is forbidden the
/// same-channel rule is relaxed and the least-interference reuse is taken.
pub fn assign_channels(
    t: &Topology,
    p: &PhyParams,
) -> Result<(ChannelAssignment, InterferenceDb), AssignmentError> {
    let levels = bfs_levels(t)?;
    let mut node_order: Vec<NodeId> = (0..t.node_count()).collect();
    node_order.sort_by_key(|&v| (levels[v], v));

    let gains = PairGains::build(t, p);
    let mut ca = ChannelAssignment::uncolored(t.link_count());
    let mut used: Vec<BTreeSet<Channel>> = vec![BTreeSet::new(); t.node_count()];
    let mut colored: Vec<LinkId> = Vec::with_capacity(t.link_count());

    for &u in &node_order {
        let mut incident: Vec<LinkId> = t.neighbors(u).iter().map(|&(_, l)| l).collect();
        incident.sort_unstable();
        for l in incident {
            if ca.channel(l) != UNCOLORED {
                continue;
            }
            let link = t.link(l);
            let (a, b) = (link.a, link.b);
            let c = pick_channel(t, p, &gains, &ca, &colored, &used, l, a, b)?;
            ca.set(l, c);
            used[a].insert(c);
            used[b].insert(c);
            colored.push(l);
        }
    }
    debug_assert!(ca.is_complete());
    let db = compute_interference_db(t, &ca, p)?;
    Ok((ca, db))
}

#[allow(clippy::too_many_arguments)]
fn pick_channel(
    t: &Topology,
    p: &PhyParams,
    gains: &PairGains,
    ca: &ChannelAssignment,
    colored: &[LinkId],
    used: &[BTreeSet<Channel>],
    l: LinkId,
    a: NodeId,
    b: NodeId,
) -> Result<Channel, AssignmentError> {
    let radios_ok = |c: Channel| {
        (used[a].contains(&c) || used[a].len() < t.node(a).radios as usize)
            && (used[b].contains(&c) || used[b].len() < t.node(b).radios as usize)
    };
    let fresh = |c: Channel| !used[a].contains(&c) && !used[b].contains(&c);
    let score = |c: Channel| -> f64 {
        colored
            .iter()
            .map(|&e| linear_overlap(c, ca.channel(e), p.orthogonal_sep) * gains.at(l, e))
            .sum()
    };

    // First pass keeps the proper-coloring rule; the rule is dropped only
    // when no channel survives it.
    for require_fresh in [true, false] {
        let mut best: Option<(f64, Channel)> = None;
        for c in 1..=p.channels {
            if !radios_ok(c) || (require_fresh && !fresh(c)) {
                continue;
            }
            let s = score(c);
            if best.map_or(true, |(bs, _)| s < bs) {
                best = Some((s, c));
            }
        }
        if let Some((_, c)) = best {
            return Ok(c);
        }
    }
    Err(AssignmentError::RadioConstraintUnsatisfiable { link: l, a, b })
}

/// Recomputes the interference database for a complete assignment. For each
/// link, the SINR in each direction counts every other link as an interferer
/// transmitting from its endpoint nearest the receiver.
pub fn compute_interference_db(
    t: &Topology,
    ca: &ChannelAssignment,
    p: &PhyParams,
) -> Result<InterferenceDb, AssignmentError> {
    assert!(ca.is_complete(), "interference database requires a fully colored assignment");
    let mut entries = Vec::with_capacity(t.link_count());
    for link in t.links() {
        let sinr_fwd = directed_sinr(t, ca, p, link.id, link.a, link.b)?;
        let sinr_rev = directed_sinr(t, ca, p, link.id, link.b, link.a)?;
        let capacity_bps = phy::shannon_capacity(sinr_fwd.min(sinr_rev), p.bandwidth_hz);
        entries.push(LinkInterference { sinr_fwd, sinr_rev, capacity_bps });
    }
    Ok(InterferenceDb { entries })
}

fn directed_sinr(
    t: &Topology,
    ca: &ChannelAssignment,
    p: &PhyParams,
    l: LinkId,
    tx: NodeId,
    rx: NodeId,
) -> Result<f64, AssignmentError> {
    let mut interferers: Vec<(NodeId, Channel)> = Vec::new();
    for other in t.links() {
        if other.id == l {
            continue;
        }
        // Transmitter stand-in: the endpoint nearest the receiver, excluding
        // co-located ones.
        let mut best: Option<(f64, NodeId)> = None;
        for z in [other.a, other.b] {
            let d = t.distance(z, rx);
            if d <= 0.0 || d > t.int_range() {
                continue;
            }
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, z));
            }
        }
        if let Some((_, z)) = best {
            interferers.push((z, ca.channel(other.id)));
        }
    }
    Ok(phy::sinr(rx, tx, ca.channel(l), &interferers, t, p)?)
}

/// Checks a complete assignment against the coloring rules. Adjacent
/// same-channel and radio violations are hard unless forced; the two-hop
/// check is advisory.
pub fn validate_assignment(t: &Topology, p: &PhyParams, ca: &ChannelAssignment) -> Vec<Violation> {
    assert!(ca.is_complete(), "validation requires a fully colored assignment");
    let mut out = Vec::new();
    for node in t.nodes() {
        let mut incident: Vec<LinkId> = t.neighbors(node.id).iter().map(|&(_, l)| l).collect();
        incident.sort_unstable();
        let degree = incident.len();
        let forced = degree > p.channels as usize || degree > node.radios as usize;
        for i in 0..incident.len() {
            for j in i + 1..incident.len() {
                let (li, lj) = (incident[i], incident[j]);
                if ca.channel(li) == ca.channel(lj) {
                    out.push(Violation::AdjacentSameChannel {
                        node: node.id,
                        links: (li, lj),
                        channel: ca.channel(li),
                        forced_by_k: forced,
                    });
                }
            }
        }
        let distinct: BTreeSet<Channel> = incident.iter().map(|&l| ca.channel(l)).collect();
        if distinct.len() > node.radios as usize {
            out.push(Violation::RadioCountExceeded {
                node: node.id,
                distinct: distinct.len(),
                radios: node.radios,
            });
        }
    }

    // Strong-coloring advisory: links at line-graph distance exactly two.
    let adjacent_links = |l: LinkId| -> BTreeSet<LinkId> {
        let link = t.link(l);
        t.neighbors(link.a)
            .iter()
            .chain(t.neighbors(link.b).iter())
            .map(|&(_, e)| e)
            .filter(|&e| e != l)
            .collect()
    };
    let shares_node = |x: LinkId, y: LinkId| {
        let (lx, ly) = (t.link(x), t.link(y));
        lx.a == ly.a || lx.a == ly.b || lx.b == ly.a || lx.b == ly.b
    };
    let mut two_hop: BTreeSet<(LinkId, LinkId)> = BTreeSet::new();
    for mid in 0..t.link_count() {
        let around: Vec<LinkId> = adjacent_links(mid).into_iter().collect();
        for i in 0..around.len() {
            for j in i + 1..around.len() {
                let (e, f) = (around[i], around[j]);
                if !shares_node(e, f) && ca.channel(e) == ca.channel(f) {
                    two_hop.insert((e.min(f), e.max(f)));
                }
            }
        }
    }
    for (e, f) in two_hop {
        out.push(Violation::TwoHopSameChannel { links: (e, f), channel: ca.channel(e) });
    }
    out
}

/// Maximum node degree and the Vizing edge-coloring upper bound d+1.
pub fn chromatic_bounds(t: &Topology) -> (usize, usize) {
    let d = (0..t.node_count()).map(|v| t.degree(v)).max().unwrap_or(0);
    (d, d + 1)
}

/// Total interference power exchanged by a complete assignment: the sum over
/// unordered link pairs of overlap(c_i, c_j) times the pair's worst-case
/// gain weight. This is the objective the greedy minimizes marginally and
/// the brute-force oracle minimizes globally.
pub fn total_interference_score(t: &Topology, p: &PhyParams, ca: &ChannelAssignment) -> f64 {
    assert!(ca.is_complete(), "scoring requires a fully colored assignment");
    let gains = PairGains::build(t, p);
    let n = t.link_count();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += linear_overlap(ca.channel(i), ca.channel(j), p.orthogonal_sep) * gains.at(i, j);
        }
    }
    total
}

/// Exhaustive minimum-interference assignment over `channels` channels,
/// respecting the same hard constraints as the greedy: radio budgets always,
/// and proper coloring whenever any radio-feasible proper assignment exists.
/// Ties break to the lexicographically smallest channel vector. Guarded to
/// K^|links| ≤ 1e7 states.
pub fn brute_force_assign(
    t: &Topology,
    p: &PhyParams,
    channels: Channel,
) -> Result<(ChannelAssignment, f64), AssignmentError> {
    let n = t.link_count();
    if n == 0 {
        return Ok((ChannelAssignment::from_channels(Vec::new()), 0.0));
    }
    let states = (channels as f64).powi(n as i32);
    if states > BRUTE_FORCE_LIMIT {
        return Err(AssignmentError::InstanceTooLarge { states, limit: BRUTE_FORCE_LIMIT });
    }
    let gains = PairGains::build(t, p);
    let adjacent: Vec<(usize, usize)> = {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (li, lj) = (t.link(i), t.link(j));
                if li.a == lj.a || li.a == lj.b || li.b == lj.a || li.b == lj.b {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    };

    let mut current = vec![1 as Channel; n];
    let mut best_proper: Option<(f64, Vec<Channel>)> = None;
    let mut best_any: Option<(f64, Vec<Channel>)> = None;
    loop {
        if radio_feasible(t, &current) {
            let mut score = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    score += linear_overlap(current[i], current[j], p.orthogonal_sep)
                        * gains.at(i, j);
                }
            }
            // Strict improvement keeps the first (lexicographically smallest)
            // vector on ties.
            if best_any.as_ref().map_or(true, |(s, _)| score < *s) {
                best_any = Some((score, current.clone()));
            }
            let proper = adjacent.iter().all(|&(i, j)| current[i] != current[j]);
            if proper && best_proper.as_ref().map_or(true, |(s, _)| score < *s) {
                best_proper = Some((score, current.clone()));
            }
        }
        // Odometer increment in lexicographic order.
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if current[pos] < channels {
                current[pos] += 1;
                for c in current.iter_mut().skip(pos + 1) {
                    *c = 1;
                }
                break;
            }
            if pos == 0 {
                let (score, vector) = best_proper
                    .or(best_any)
                    .expect("the all-ones vector is always radio-feasible");
                return Ok((ChannelAssignment::from_channels(vector), score));
            }
        }
    }
}


fn radio_feasible(t: &Topology, channels: &[Channel]) -> bool {
    for node in t.nodes() {
        let distinct: BTreeSet<Channel> =
            t.neighbors(node.id).iter().map(|&(_, l)| channels[l]).collect();
        if distinct.len() > node.radios as usize {
            return false;
        }
    }
    true
}
