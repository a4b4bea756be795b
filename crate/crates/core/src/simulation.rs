//! Flow-level scenario evaluation: builds the topology, assigns channels,
//! routes the offered demands, and derives PDR, mean end-to-end delay,
//! retransmission overhead, throughput, and aggregate capacity for every
//! (channels, radios) sweep point. Everything is closed-form and
//! deterministic for a fixed seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::assignment::{assign_channels, AssignmentError, InterferenceDb};
use crate::metrics::delivery_prob;
use crate::phy::{linear_to_db, PhyParams};
use crate::routing::{route_all_best_effort, MetricParams, RouteMetric, RoutePlan, RoutingError};
use crate::topology::{
    grid_topology, load_topology, random_topology, NodeId, Topology, TopologyError,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scenario is missing a topology line")]
    MissingTopology,
    #[error("scenario needs at least one sweep point")]
    EmptySweep,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Retransmission and queueing knobs of the flow-level model. None of these
/// come from measured hardware; all are configurable.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub packet_bits: f64,
    /// Transmission rate used for packet airtime (11 Mb/s 802.11b payload
    /// rate by default).
    pub link_rate_bps: f64,
    /// Attempts per link before a packet is dropped (802.11 retry limit).
    pub retx_cap: u32,
    /// Queue-delay coefficient: packet-times of queueing at full load.
    pub queue_coeff: f64,
    /// Width of the SINR→delivery-probability ramp above β.
    pub margin_db: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            packet_bits: 8000.0,
            link_rate_bps: 11e6,
            retx_cap: 7,
            queue_coeff: 1.0,
            margin_db: 20.0,
        }
    }
}

impl ModelParams {
    pub fn metric_params(&self) -> MetricParams {
        MetricParams { margin_db: self.margin_db, packet_bits: self.packet_bits }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Grid { side: usize, spacing: f64, tx_range: f64, int_range: f64, gateways: Vec<NodeId> },
    Random {
        n: usize,
        width: f64,
        height: f64,
        tx_range: f64,
        int_range: f64,
        n_gateways: usize,
    },
    File(PathBuf),
}

/// One experiment: a topology, PHY parameters, offered demands, and the
/// (channels, radios) sweep to evaluate them over.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: TopologySpec,
    pub phy: PhyParams,
    pub sources: Vec<(NodeId, u64)>,
    pub sweep: Vec<(u32, u32)>,
    pub metric: RouteMetric,
    pub seed: u64,
    pub duration_s: f64,
    pub model: ModelParams,
}

/// Report row for one sweep point under one routing metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub channels: u32,
    pub radios: u32,
    pub metric: RouteMetric,
    pub pdr: f64,
    pub mean_delay_s: f64,
    pub overhead_retx: f64,
    pub throughput_bps: f64,
    pub agg_capacity_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
}

impl SimReport {
    pub const CSV_HEADER: &'static str =
        "K,R,metric,pdr,mean_delay_s,overhead_retx,throughput_bps,agg_capacity_bps";

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.channels,
                r.radios,
                r.metric,
                r.pdr,
                r.mean_delay_s,
                r.overhead_retx,
                r.throughput_bps,
                r.agg_capacity_bps
            );
        }
        out
    }
}

/// Delivery statistics of one path under the truncated-retransmission model:
/// per-link success is 1−(1−p)^cap and expected attempts per offered packet
/// accumulate only while the packet is still alive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDelivery {
    /// Probability an offered packet survives every link.
    pub pdr: f64,
    /// Expected transmissions per offered packet across all links.
    pub attempts_per_offered: f64,
    pub hops: u32,
}

/// Closed-form path delivery from per-link single-attempt probabilities.
pub fn path_delivery(link_probs: &[f64], retx_cap: u32) -> PathDelivery {
    let cap = retx_cap as f64;
    let mut pdr = 1.0;
    let mut attempts = 0.0;
    let mut alive = 1.0;
    for &p in link_probs {
        debug_assert!((0.0..=1.0).contains(&p));
        let success = 1.0 - (1.0 - p).powi(retx_cap as i32);
        let expected_attempts = if p > 0.0 { success / p } else { cap };
        attempts += alive * expected_attempts;
        alive *= success;
        pdr *= success;
    }
    PathDelivery { pdr, attempts_per_offered: attempts, hops: link_probs.len() as u32 }
}

/// Retransmission overhead per delivered packet: expected transmissions per
/// delivered packet minus the hop count a loss-free delivery would need.
pub fn retx_overhead(delivery: &PathDelivery) -> f64 {
    if delivery.pdr <= 0.0 {
        return 0.0;
    }
    delivery.attempts_per_offered / delivery.pdr - delivery.hops as f64
}

/// Utilization is clamped below 1 so the queue term stays finite on
/// saturated links.
const UTILIZATION_CLAMP: f64 = 0.99;

fn build_topology(spec: &TopologySpec, radios: u32, seed: u64) -> Result<Topology, SimError> {
    let t = match spec {
        TopologySpec::Grid { side, spacing, tx_range, int_range, gateways } => {
            grid_topology(*side, *spacing, *tx_range, *int_range, radios, gateways)?
        }
        TopologySpec::Random { n, width, height, tx_range, int_range, n_gateways } => {
            random_topology(*n, (*width, *height), *tx_range, *int_range, radios, *n_gateways, seed)?
        }
        TopologySpec::File(path) => load_topology(path)?.with_radios(radios)?,
    };
    Ok(t)
}

/// Runs the scenario at every sweep point under its configured metric.
pub fn run_scenario(s: &Scenario) -> Result<SimReport, SimError> {
    validate_scenario(s)?;
    let mut report = SimReport::default();
    for &(channels, radios) in &s.sweep {
        let topo = build_topology(&s.topology, radios, s.seed)?;
        let phy = PhyParams { channels, ..s.phy.clone() };
        let (_, db) = assign_channels(&topo, &phy)?;
        report.rows.push(eval_point(&topo, &phy, &db, s, channels, radios, s.metric));
    }
    Ok(report)
}

/// Runs the identical scenario under all four routing metrics, one report
/// row per metric per sweep point.
pub fn compare_metrics(s: &Scenario) -> Result<SimReport, SimError> {
    validate_scenario(s)?;
    let mut report = SimReport::default();
    for &(channels, radios) in &s.sweep {
        let topo = build_topology(&s.topology, radios, s.seed)?;
        let phy = PhyParams { channels, ..s.phy.clone() };
        let (_, db) = assign_channels(&topo, &phy)?;
        for metric in RouteMetric::ALL {
            report.rows.push(eval_point(&topo, &phy, &db, s, channels, radios, metric));
        }
    }
    Ok(report)
}

fn validate_scenario(s: &Scenario) -> Result<(), SimError> {
    if s.sweep.is_empty() {
        return Err(SimError::EmptySweep);
    }
    Ok(())
}

fn eval_point(
    t: &Topology,
    phy: &PhyParams,
    db: &InterferenceDb,
    s: &Scenario,
    channels: u32,
    radios: u32,
    metric: RouteMetric,
) -> SimRow {
    let model = &s.model;
    let (plan, _failures) =
        route_all_best_effort(t, db, phy, &s.sources, metric, &model.metric_params());

    let offered: f64 = s.sources.iter().map(|&(_, d)| d as f64).sum();

    let mut delivered = 0.0;
    let mut attempts_rate = 0.0;
    let mut useful_rate = 0.0;
    let mut delay_weighted = 0.0;
    for entry in &plan.routes {
        let stats = route_stats(t, db, phy, &plan, &entry.path, model);
        let demand = entry.demand_bps as f64;
        delivered += demand * stats.delivery.pdr;
        attempts_rate += demand * stats.delivery.attempts_per_offered;
        useful_rate += demand * stats.delivery.pdr * stats.delivery.hops as f64;
        delay_weighted += demand * stats.delivery.pdr * stats.delay_s;
    }

    let pdr = if offered > 0.0 { delivered / offered } else { 0.0 };
    let mean_delay_s = if delivered > 0.0 { delay_weighted / delivered } else { 0.0 };
    let overhead_retx =
        if delivered > 0.0 { (attempts_rate - useful_rate) / delivered } else { 0.0 };
    SimRow {
        channels,
        radios,
        metric,
        pdr,
        mean_delay_s,
        overhead_retx,
        throughput_bps: delivered,
        agg_capacity_bps: db.aggregate_capacity_bps(),
    }
}

struct RouteStats {
    delivery: PathDelivery,
    delay_s: f64,
}

fn route_stats(
    t: &Topology,
    db: &InterferenceDb,
    phy: &PhyParams,
    plan: &RoutePlan,
    path: &[NodeId],
    model: &ModelParams,
) -> RouteStats {
    let packet_time = model.packet_bits / model.link_rate_bps;
    let mut probs = Vec::with_capacity(path.len().saturating_sub(1));
    let mut delay = 0.0;
    for pair in path.windows(2) {
        let link = t.link_between(pair[0], pair[1]).expect("routes follow topology links");
        let sinr = db.link_sinr(link);
        let p = match linear_to_db(sinr) {
            Ok(s_db) => delivery_prob(s_db, phy.sinr_threshold_db, model.margin_db),
            Err(_) => 0.0,
        };
        probs.push(p);

        let success = 1.0 - (1.0 - p).powi(model.retx_cap as i32);
        let attempts = if p > 0.0 { success / p } else { model.retx_cap as f64 };
        let flow = plan.flows.get(&(pair[0], pair[1])).copied().unwrap_or(0) as f64;
        let utilization = (flow / db.entry(link).capacity_bps).min(UTILIZATION_CLAMP);
        let queue = model.queue_coeff * (utilization / (1.0 - utilization)) * packet_time;
        delay += attempts * packet_time + queue;
    }
    RouteStats { delivery: path_delivery(&probs, model.retx_cap), delay_s: delay }
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Scenario, SimError> {
        let text = fs::read_to_string(path)?;
        Scenario::from_str_named(&text)
    }

    /// Parses the line-oriented scenario format. `#` lines are comments.
    ///
    /// ```text
    /// topology grid side=4 spacing=200 tx=250 int=550 gw=0,2
    /// topology random n=25 area=1000x1000 tx=250 int=550 n_gw=2
    /// topology file=path/to/topology.txt
    /// source <node> <demand_bps>
    /// sweep K=<channels> R=<radios>
    /// metric sinr|etx|ett|hopcount
    /// phy <key>=<value>      # tx_power_dbm noise_dbm path_loss_exp
    ///                        # sinr_threshold_db bandwidth_hz orthogonal_sep
    /// model <key>=<value>    # packet_bits link_rate_bps retx_cap
    ///                        # queue_coeff margin_db
    /// seed <n>
    /// duration <seconds>
    /// ```
    pub fn from_str_named(text: &str) -> Result<Scenario, SimError> {
        let mut topology: Option<TopologySpec> = None;
        let mut phy = PhyParams::default();
        let mut model = ModelParams::default();
        let mut sources = Vec::new();
        let mut sweep = Vec::new();
        let mut metric = RouteMetric::Sinr;
        let mut seed = 0u64;
        let mut duration_s = 300.0;

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| SimError::Parse { line: lineno, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "topology" => {
                    if fields.len() < 2 {
                        return Err(err("topology needs a kind".into()));
                    }
                    topology = Some(parse_topology(&fields[1..], lineno)?);
                }
                "source" => {
                    if fields.len() != 3 {
                        return Err(err("source needs <node> <demand_bps>".into()));
                    }
                    let node = fields[1]
                        .parse()
                        .map_err(|_| err(format!("bad node id {}", fields[1])))?;
                    let demand: u64 = fields[2]
                        .parse()
                        .map_err(|_| err(format!("bad demand {}", fields[2])))?;
                    if demand == 0 {
                        return Err(err("demand must be positive".into()));
                    }
                    sources.push((node, demand));
                }
                "sweep" => {
                    let mut k = None;
                    let mut r = None;
                    for f in &fields[1..] {
                        let (key, value) = f
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, got {f}")))?;
                        let v: u32 =
                            value.parse().map_err(|_| err(format!("bad number {value}")))?;
                        match key {
                            "K" => k = Some(v),
                            "R" => r = Some(v),
                            other => return Err(err(format!("unknown sweep key {other}"))),
                        }
                    }
                    match (k, r) {
                        (Some(k), Some(r)) if k >= 1 && r >= 1 => sweep.push((k, r)),
                        (Some(_), Some(_)) => return Err(err("K and R must be at least 1".into())),
                        _ => return Err(err("sweep needs K=<k> R=<r>".into())),
                    }
                }
                "metric" => {
                    if fields.len() != 2 {
                        return Err(err("metric needs one name".into()));
                    }
                    metric = fields[1].parse().map_err(|e: String| err(e))?;
                }
                "seed" => {
                    seed = fields
                        .get(1)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err("seed needs an integer".into()))?;
                }
                "duration" => {
                    duration_s = fields
                        .get(1)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err("duration needs seconds".into()))?;
                }
                "phy" => {
                    for f in &fields[1..] {
                        let (key, value) = f
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, got {f}")))?;
                        apply_phy_override(&mut phy, key, value)
                            .map_err(|msg| err(msg))?;
                    }
                }
                "model" => {
                    for f in &fields[1..] {
                        let (key, value) = f
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, got {f}")))?;
                        apply_model_override(&mut model, key, value)
                            .map_err(|msg| err(msg))?;
                    }
                }
                other => return Err(err(format!("unknown directive {other}"))),
            }
        }
        let topology = topology.ok_or(SimError::MissingTopology)?;
        if sweep.is_empty() {
            return Err(SimError::EmptySweep);
        }
        Ok(Scenario { topology, phy, sources, sweep, metric, seed, duration_s, model })
    }
}

fn parse_topology(fields: &[&str], lineno: usize) -> Result<TopologySpec, SimError> {
    let err = |msg: String| SimError::Parse { line: lineno, msg };
    let kv = |fields: &[&str]| -> Result<Vec<(String, String)>, SimError> {
        fields
            .iter()
            .map(|f| {
                f.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| err(format!("expected key=value, got {f}")))
            })
            .collect()
    };
    match fields[0] {
        "grid" => {
            let mut side = None;
            let mut spacing = 200.0;
            let mut tx = 250.0;
            let mut int = 550.0;
            let mut gateways = Vec::new();
            for (k, v) in kv(&fields[1..])? {
                match k.as_str() {
                    "side" => side = v.parse().ok(),
                    "spacing" => spacing = v.parse().map_err(|_| err(format!("bad spacing {v}")))?,
                    "tx" => tx = v.parse().map_err(|_| err(format!("bad tx {v}")))?,
                    "int" => int = v.parse().map_err(|_| err(format!("bad int {v}")))?,
                    "gw" => {
                        gateways = v
                            .split(',')
                            .map(|g| g.parse::<NodeId>())
                            .collect::<Result<_, _>>()
                            .map_err(|_| err(format!("bad gateway list {v}")))?;
                    }
                    other => return Err(err(format!("unknown grid key {other}"))),
                }
            }
            let side = side.ok_or_else(|| err("grid needs side=<n>".into()))?;
            Ok(TopologySpec::Grid { side, spacing, tx_range: tx, int_range: int, gateways })
        }
        "random" => {
            let mut n = None;
            let mut width = 1000.0;
            let mut height = 1000.0;
            let mut tx = 250.0;
            let mut int = 550.0;
            let mut n_gateways = 1;
            for (k, v) in kv(&fields[1..])? {
                match k.as_str() {
                    "n" => n = v.parse().ok(),
                    "area" => {
                        let (w, h) = v
                            .split_once('x')
                            .ok_or_else(|| err(format!("area must be <w>x<h>, got {v}")))?;
                        width = w.parse().map_err(|_| err(format!("bad width {w}")))?;
                        height = h.parse().map_err(|_| err(format!("bad height {h}")))?;
                    }
                    "tx" => tx = v.parse().map_err(|_| err(format!("bad tx {v}")))?,
                    "int" => int = v.parse().map_err(|_| err(format!("bad int {v}")))?,
                    "n_gw" => {
                        n_gateways = v.parse().map_err(|_| err(format!("bad n_gw {v}")))?;
                    }
                    other => return Err(err(format!("unknown random key {other}"))),
                }
            }
            let n = n.ok_or_else(|| err("random needs n=<count>".into()))?;
            Ok(TopologySpec::Random { n, width, height, tx_range: tx, int_range: int, n_gateways })
        }
        "file" => Err(err("file topology is written as topology file=<path>".into())),
        kind if kind.starts_with("file=") => {
            Ok(TopologySpec::File(PathBuf::from(&kind["file=".len()..])))
        }
        other => Err(err(format!("unknown topology kind {other}"))),
    }
}

fn apply_phy_override(phy: &mut PhyParams, key: &str, value: &str) -> Result<(), String> {
    let parse = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number {v}"));
    match key {
        "tx_power_dbm" => phy.tx_power_dbm = parse(value)?,
        "noise_dbm" => phy.noise_dbm = parse(value)?,
        "path_loss_exp" => phy.path_loss_exp = parse(value)?,
        "sinr_threshold_db" => phy.sinr_threshold_db = parse(value)?,
        "bandwidth_hz" => phy.bandwidth_hz = parse(value)?,
        "orthogonal_sep" => {
            phy.orthogonal_sep =
                value.parse().map_err(|_| format!("bad separation {value}"))?;
        }
        other => return Err(format!("unknown phy key {other}")),
    }
    Ok(())
}

fn apply_model_override(model: &mut ModelParams, key: &str, value: &str) -> Result<(), String> {
    let parse = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number {v}"));
    match key {
        "packet_bits" => model.packet_bits = parse(value)?,
        "link_rate_bps" => model.link_rate_bps = parse(value)?,
        "retx_cap" => {
            model.retx_cap = value.parse().map_err(|_| format!("bad retry cap {value}"))?;
        }
        "queue_coeff" => model.queue_coeff = parse(value)?,
        "margin_db" => model.margin_db = parse(value)?,
        other => return Err(format!("unknown model key {other}")),
    }
    Ok(())
}
