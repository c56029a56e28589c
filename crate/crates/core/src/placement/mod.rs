//! Placement of an expanded service on a substrate network.
//!
//! Every arc whose two ends sit on different substrate nodes is replaced by
//! `transition -> link place -> link transition -> target place`, where the link
//! transition is deterministic with the shortest-path delay between the nodes.
//! Link transitions are single-server like every timed transition, so they act
//! as pure delays only while a link carries less than one token per delay.

use std::collections::BTreeMap;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::analysis::{run_replications, AnalysisError, Cell, ReplicationSummary, Table};
use crate::engine::RunConfig;
use crate::model::{validate_net, DelaySpec, NodeId, Place, PlaceKind, QpnArc, QpnNet, Transition, Violation};
use crate::parser::json::{self, index, join, Obj};
use crate::parser::{canonical_json, expand_service_with_topology, parse_json, ExpandError, Owner, ParseError, ServiceSpec, ServiceTopology};

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: String,
    pub b: String,
    /// Seconds.
    pub delay: f64,
    pub bidirectional: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubstrateNet {
    pub nodes: Vec<String>,
    pub links: Vec<Link>,
}

/// VNF, source and sink locations on the substrate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Placement {
    pub name: String,
    pub vnfs: BTreeMap<String, String>,
    pub sources: BTreeMap<String, String>,
    pub sinks: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlacementFile {
    pub substrate: SubstrateNet,
    pub placements: Vec<Placement>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("placement `{placement}`: `{element}` is not placed")]
    Unplaced { placement: String, element: String },
    #[error("placement `{placement}`: `{element}` is not part of the service")]
    UnknownElement { placement: String, element: String },
    #[error("placement `{placement}`: unknown substrate node `{node}`")]
    UnknownNode { placement: String, node: String },
    #[error("no path between substrate nodes `{a}` and `{b}`")]
    Unreachable { a: String, b: String },
    #[error("augmented net is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error("placement `{placement}`: {source}")]
    Run { placement: String, source: AnalysisError },
    #[error("no placements to evaluate")]
    Empty,
}

/// All-pairs shortest path delays of a substrate.
#[derive(Debug, Clone)]
pub struct Routing {
    index: BTreeMap<String, usize>,
    dist: Vec<Vec<Option<f64>>>,
}

impl Routing {
    /// Delay of the shortest path from `a` to `b`, `None` if unreachable or unknown.
    pub fn delay(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (*self.index.get(a)?, *self.index.get(b)?);
        self.dist[i][j]
    }
}

impl SubstrateNet {
    /// Shortest paths by summed link delay (Dijkstra from every node).
    pub fn routing(&self) -> Routing {
        let index: BTreeMap<String, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut g = petgraph::graph::DiGraph::<(), f64>::new();
        let ids: Vec<NodeIndex> = self.nodes.iter().map(|_| g.add_node(())).collect();
        for l in &self.links {
            if let (Some(&a), Some(&b)) = (index.get(&l.a), index.get(&l.b)) {
                g.add_edge(ids[a], ids[b], l.delay);
                if l.bidirectional {
                    g.add_edge(ids[b], ids[a], l.delay);
                }
            }
        }
        let dist = ids
            .iter()
            .map(|&s| {
                let d = dijkstra(&g, s, None, |e| *e.weight());
                ids.iter().map(|t| d.get(t).copied()).collect()
            })
            .collect();
        Routing { index, dist }
    }

    /// Whether every node reaches every other one, ignoring link directions.
    pub fn is_connected(&self) -> bool {
        let mut g = UnGraph::<(), ()>::new_undirected();
        let ids: Vec<NodeIndex> = self.nodes.iter().map(|_| g.add_node(())).collect();
        let index: BTreeMap<&str, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        for l in &self.links {
            if let (Some(&a), Some(&b)) = (index.get(l.a.as_str()), index.get(l.b.as_str())) {
                g.add_edge(ids[a], ids[b], ());
            }
        }
        petgraph::algo::connected_components(&g) <= 1
    }

    /// Copy with every link delay multiplied by `k`.
    pub fn scaled(&self, k: f64) -> SubstrateNet {
        let mut s = self.clone();
        for l in &mut s.links {
            l.delay *= k;
        }
        s
    }
}

impl Placement {
    fn node_of(&self, owner: &Owner) -> Option<&str> {
        match owner {
            Owner::Source(id) => self.sources.get(id),
            Owner::Vnf(id) => self.vnfs.get(id),
            Owner::Sink(id) => self.sinks.get(id),
        }
        .map(String::as_str)
    }

    /// Every service element placed exactly once on a known node, nothing extra.
    pub fn check(&self, spec: &ServiceSpec, substrate: &SubstrateNet) -> Result<(), PlacementError> {
        let groups: [(&BTreeMap<String, String>, Vec<&str>); 3] = [
            (&self.vnfs, spec.vnfs.iter().map(|v| v.id.as_str()).collect()),
            (&self.sources, spec.sources.iter().map(|s| s.id.as_str()).collect()),
            (&self.sinks, spec.sinks.iter().map(|s| s.id.as_str()).collect()),
        ];
        for (map, ids) in groups {
            for id in &ids {
                if !map.contains_key(*id) {
                    return Err(PlacementError::Unplaced {
                        placement: self.name.clone(),
                        element: id.to_string(),
                    });
                }
            }
            for (id, node) in map {
                if !ids.contains(&id.as_str()) {
                    return Err(PlacementError::UnknownElement {
                        placement: self.name.clone(),
                        element: id.clone(),
                    });
                }
                if !substrate.nodes.contains(node) {
                    return Err(PlacementError::UnknownNode {
                        placement: self.name.clone(),
                        node: node.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn fresh(net: &QpnNet, base: String) -> String {
    let taken = |id: &str| net.place(id).is_some() || net.transition(id).is_some();
    if !taken(&base) && !taken(&format!("{base}.buf")) {
        return base;
    }
    (2..)
        .map(|k| format!("{base}#{k}"))
        .find(|c| !taken(c) && !taken(&format!("{c}.buf")))
        .expect("unbounded")
}

/// Splices link-delay transitions into every cross-node arc of `net`.
pub fn augment_with_links(
    net: &QpnNet,
    topology: &ServiceTopology,
    placement: &Placement,
    substrate: &SubstrateNet,
) -> Result<QpnNet, PlacementError> {
    augment_with_routing(net, topology, placement, &substrate.routing())
}

fn augment_with_routing(
    net: &QpnNet,
    topology: &ServiceTopology,
    placement: &Placement,
    routing: &Routing,
) -> Result<QpnNet, PlacementError> {
    let locate = |node: &NodeId| -> Result<Option<&str>, PlacementError> {
        match topology.owner(node.as_str()) {
            None => Ok(None),
            Some(o) => placement.node_of(o).map(Some).ok_or_else(|| PlacementError::Unplaced {
                placement: placement.name.clone(),
                element: o.id().to_string(),
            }),
        }
    };
    let mut out = QpnNet {
        arcs: Vec::with_capacity(net.arcs.len()),
        ..net.clone()
    };
    for arc in &net.arcs {
        let is_output = net.transition(arc.from.as_str()).is_some();
        let ends = (locate(&arc.from)?, locate(&arc.to)?);
        let (Some(a), Some(b)) = ends else {
            out.arcs.push(arc.clone());
            continue;
        };
        if !is_output || a == b {
            out.arcs.push(arc.clone());
            continue;
        }
        let d = routing.delay(a, b).ok_or_else(|| PlacementError::Unreachable {
            a: a.to_string(),
            b: b.to_string(),
        })?;
        let link = fresh(&out, format!("link.{}.{}", arc.from, arc.to));
        let buf = format!("{link}.buf");
        out.places.push(Place::new(buf.as_str(), PlaceKind::Ordinary));
        out.transitions.push(Transition::timed(link.as_str(), DelaySpec::deterministic(d)));
        out.arcs.push(QpnArc {
            to: buf.as_str().into(),
            ..arc.clone()
        });
        out.arcs.push(QpnArc::input(buf.as_str(), link.as_str(), "in"));
        out.arcs.push(QpnArc::output(link.as_str(), arc.to.clone()));
    }
    let violations = validate_net(&out);
    if !violations.is_empty() {
        return Err(PlacementError::Invalid(violations));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub name: String,
    /// 1 = lowest mean end-to-end delay.
    pub rank: usize,
    pub summary: ReplicationSummary,
}

/// Results in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementReport {
    pub results: Vec<PlacementResult>,
}

impl PlacementReport {
    pub fn best(&self) -> Option<&PlacementResult> {
        self.results.iter().find(|r| r.rank == 1)
    }

    pub fn get(&self, name: &str) -> Option<&PlacementResult> {
        self.results.iter().find(|r| r.name == name)
    }

    /// Rows sorted by rank.
    pub fn table(&self) -> Table {
        let mut t = Table::new(["rank", "placement", "runs", "e2e_mean", "e2e_ci95", "throughput_mean", "throughput_ci95"]);
        let mut rs: Vec<&PlacementResult> = self.results.iter().collect();
        rs.sort_by_key(|r| r.rank);
        for r in rs {
            let s = &r.summary;
            t.push(vec![
                r.rank.into(),
                r.name.as_str().into(),
                s.runs.into(),
                if s.e2e.n == 0 { Cell::Empty } else { s.e2e.mean.into() },
                s.e2e.half_width.into(),
                s.throughput.mean.into(),
                s.throughput.half_width.into(),
            ]);
        }
        t
    }
}

/// Simulates every placement with `n` replications from the same base seed and
/// ranks them by mean end-to-end delay (ties keep declaration order).
pub fn evaluate_placements(
    spec: &ServiceSpec,
    substrate: &SubstrateNet,
    placements: &[Placement],
    cfg: &RunConfig,
    n: usize,
) -> Result<PlacementReport, PlacementError> {
    if placements.is_empty() {
        return Err(PlacementError::Empty);
    }
    let expansion = expand_service_with_topology(spec)?;
    let routing = substrate.routing();
    let mut results = Vec::with_capacity(placements.len());
    for p in placements {
        p.check(spec, substrate)?;
        let net = augment_with_routing(&expansion.net, &expansion.topology, p, &routing)?;
        let summary = run_replications(&net, cfg, n).map_err(|source| PlacementError::Run {
            placement: p.name.clone(),
            source,
        })?;
        results.push(PlacementResult {
            name: p.name.clone(),
            rank: 0,
            summary,
        });
    }
    let mut order: Vec<usize> = (0..results.len()).collect();
    let key = |i: usize| {
        let e = &results[i].summary.e2e;
        if e.n == 0 { f64::INFINITY } else { e.mean }
    };
    order.sort_by(|&i, &j| key(i).total_cmp(&key(j)));
    for (rank, i) in order.into_iter().enumerate() {
        results[i].rank = rank + 1;
    }
    Ok(PlacementReport { results })
}

fn string_map(v: &Value, path: &str) -> Result<BTreeMap<String, String>, ParseError> {
    let m = v.as_object().ok_or_else(|| ParseError::InvalidValue {
        path: path.to_string(),
        message: "expected an object".into(),
    })?;
    m.iter()
        .map(|(k, v)| Ok((k.clone(), json::as_str(v, &join(path, k))?.to_string())))
        .collect()
}

pub fn parse_placements(text: &str) -> Result<PlacementFile, ParseError> {
    placements_from_value(&parse_json(text)?)
}

pub fn placements_from_value(v: &Value) -> Result<PlacementFile, ParseError> {
    let root = Obj::new(v, "", &["substrate", "placements"])?;
    let so = Obj::new(root.req("substrate")?, "substrate", &["nodes", "links"])?;
    let mut nodes = Vec::new();
    for (i, n) in so.array("nodes")?.iter().enumerate() {
        let p = index(&so.at("nodes"), i);
        let id = json::as_str(n, &p)?;
        json::check_name(id, &p)?;
        if nodes.iter().any(|x| x == id) {
            return Err(ParseError::DuplicateId { path: p, id: id.to_string() });
        }
        nodes.push(id.to_string());
    }
    let mut links = Vec::new();
    for (i, l) in so.array("links")?.iter().enumerate() {
        let lo = Obj::new(l, &index(&so.at("links"), i), &["a", "b", "delay", "bidirectional"])?;
        let mut ends = Vec::new();
        for key in ["a", "b"] {
            let id = lo.str(key)?;
            if !nodes.iter().any(|n| n == id) {
                return Err(ParseError::DanglingReference { path: lo.at(key), target: id.to_string() });
            }
            ends.push(id.to_string());
        }
        let delay = lo.f64("delay")?;
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(ParseError::InvalidValue {
                path: lo.at("delay"),
                message: format!("link delay must be >= 0, got {delay}"),
            });
        }
        links.push(Link {
            b: ends.pop().expect("two ends"),
            a: ends.pop().expect("two ends"),
            delay,
            bidirectional: lo.opt_bool("bidirectional")?.unwrap_or(true),
        });
    }
    let mut placements: Vec<Placement> = Vec::new();
    for (i, p) in root.array("placements")?.iter().enumerate() {
        let po = Obj::new(p, &index(&root.at("placements"), i), &["name", "vnfs", "sources", "sinks"])?;
        let name = po.str("name")?.to_string();
        if placements.iter().any(|q| q.name == name) {
            return Err(ParseError::DuplicateId { path: po.at("name"), id: name });
        }
        let field = |key: &str| -> Result<BTreeMap<String, String>, ParseError> {
            let m = string_map(po.req(key)?, &po.at(key))?;
            for (k, node) in &m {
                if !nodes.contains(node) {
                    return Err(ParseError::DanglingReference {
                        path: join(&po.at(key), k),
                        target: node.clone(),
                    });
                }
            }
            Ok(m)
        };
        placements.push(Placement {
            vnfs: field("vnfs")?,
            sources: field("sources")?,
            sinks: field("sinks")?,
            name,
        });
    }
    Ok(PlacementFile {
        substrate: SubstrateNet { nodes, links },
        placements,
    })
}

pub fn placements_to_value(f: &PlacementFile) -> Value {
    let links = f
        .substrate
        .links
        .iter()
        .map(|l| {
            let mut m = Map::new();
            m.insert("a".into(), l.a.clone().into());
            m.insert("b".into(), l.b.clone().into());
            m.insert("delay".into(), json::number(l.delay));
            m.insert("bidirectional".into(), l.bidirectional.into());
            Value::Object(m)
        })
        .collect();
    let to_obj = |m: &BTreeMap<String, String>| {
        Value::Object(m.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
    };
    let placements = f
        .placements
        .iter()
        .map(|p| {
            let mut m = Map::new();
            m.insert("name".into(), p.name.clone().into());
            m.insert("vnfs".into(), to_obj(&p.vnfs));
            m.insert("sources".into(), to_obj(&p.sources));
            m.insert("sinks".into(), to_obj(&p.sinks));
            Value::Object(m)
        })
        .collect();
    let mut sub = Map::new();
    sub.insert("nodes".into(), f.substrate.nodes.iter().cloned().map(Value::String).collect());
    sub.insert("links".into(), Value::Array(links));
    let mut root = Map::new();
    root.insert("substrate".into(), Value::Object(sub));
    root.insert("placements".into(), Value::Array(placements));
    Value::Object(root)
}

pub fn serialize_placements(f: &PlacementFile) -> String {
    canonical_json(&placements_to_value(f))
}
