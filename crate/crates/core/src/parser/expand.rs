//! Macro expansion of a [`ServiceSpec`] into a [`QpnNet`].
//!
//! Per VNF `v`:
//! - inputs with a sync group get a queuing place `v.<input>` each (binding `<input>`);
//!   inputs without one share the queuing place `v.in` (binding `in`);
//! - all of those places feed one timed transition `v` carrying the processing delay;
//! - an `all` policy adds one arc per branch from `v`;
//! - a `random` policy adds an ordinary place `v.out` behind `v` and one immediate
//!   transition `v.branch<i>` per branch, weighted by the branch weight.
//!
//! Each source becomes a timed transition without inputs, each sink a sink place.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::service::{OutputPolicy, ServiceSpec, Target, VnfDecl};
use crate::model::{
    validate_net, ColorExpr, Guard, NodeId, Place, PlaceKind, QpnArc, QpnNet, Transition, Violation,
};

/// The service element a net node was generated from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Owner {
    Source(String),
    Vnf(String),
    Sink(String),
}

impl Owner {
    pub fn id(&self) -> &str {
        match self {
            Owner::Source(s) | Owner::Vnf(s) | Owner::Sink(s) => s,
        }
    }
}

/// Maps every node of an expanded net back to its service element.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceTopology {
    owners: BTreeMap<NodeId, Owner>,
}

impl ServiceTopology {
    pub fn owner(&self, node: &str) -> Option<&Owner> {
        self.owners.get(node)
    }

    pub fn nodes_owned_by<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.owners.iter().filter(move |(_, o)| o.id() == id).map(|(n, _)| n)
    }

    pub(crate) fn insert(&mut self, node: NodeId, owner: Owner) {
        self.owners.insert(node, owner);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub net: QpnNet,
    pub topology: ServiceTopology,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginViolation {
    /// Source, VNF or sink id the offending node came from (empty if unknown).
    pub origin: String,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpandError {
    #[error("`{origin}`: unresolved target `{target}`")]
    UnresolvedTarget { origin: String, target: String },
    #[error("{}", Lines(.0))]
    Invalid(Vec<OriginViolation>),
}

struct Lines<'a>(&'a [OriginViolation]);

impl fmt::Display for Lines<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "`{}`: {}", v.origin, v.violation)?;
        }
        Ok(())
    }
}

/// Place receiving tokens addressed to `input` of `vnf`.
pub fn input_place_id(vnf: &VnfDecl, input: &str) -> NodeId {
    match vnf.inputs.iter().find(|i| i.name == input) {
        Some(i) if i.sync_group.is_some() => NodeId::new(format!("{}.{}", vnf.id, i.name)),
        _ => NodeId::new(format!("{}.in", vnf.id)),
    }
}

fn target_place(spec: &ServiceSpec, origin: &str, target: &str) -> Result<NodeId, ExpandError> {
    match spec.resolve(target) {
        Some(Target::Input { vnf, input }) => Ok(input_place_id(vnf, &input.name)),
        Some(Target::Sink(s)) => Ok(NodeId::new(s.id.clone())),
        None => Err(ExpandError::UnresolvedTarget {
            origin: origin.to_string(),
            target: target.to_string(),
        }),
    }
}

pub fn expand_service(spec: &ServiceSpec) -> Result<QpnNet, ExpandError> {
    expand_service_with_topology(spec).map(|e| e.net)
}

pub fn expand_service_with_topology(spec: &ServiceSpec) -> Result<Expansion, ExpandError> {
    let mut net = QpnNet::new();
    let mut topo = ServiceTopology::default();

    for src in &spec.sources {
        let owner = Owner::Source(src.id.clone());
        net.transitions.push(Transition::timed(src.id.as_str(), src.inter_arrival.clone()));
        topo.insert(src.id.as_str().into(), owner);
        let place = target_place(spec, &src.id, &src.target)?;
        net.arcs
            .push(QpnArc::output(src.id.as_str(), place).with_expr(ColorExpr::constant(&src.emit)));
    }

    for vnf in &spec.vnfs {
        let owner = Owner::Vnf(vnf.id.clone());
        let tid = NodeId::new(vnf.id.clone());
        net.transitions.push(Transition::timed(tid.clone(), vnf.processing.clone()));
        topo.insert(tid.clone(), owner.clone());

        let mut first_binding: Option<String> = None;
        let mut shared_done = false;
        for input in &vnf.inputs {
            let (place, binding) = match &input.sync_group {
                Some(_) => (input_place_id(vnf, &input.name), input.name.clone()),
                None if shared_done => continue,
                None => {
                    shared_done = true;
                    (input_place_id(vnf, &input.name), "in".to_string())
                }
            };
            net.places.push(Place::new(place.clone(), PlaceKind::Queuing));
            topo.insert(place.clone(), owner.clone());
            net.arcs.push(QpnArc::input(place, tid.clone(), &binding));
            first_binding.get_or_insert(binding);
        }
        let first_binding = first_binding.unwrap_or_else(|| "in".to_string());

        match &vnf.outputs {
            OutputPolicy::All(branches) => {
                for b in branches {
                    let mut arc = QpnArc::output(tid.clone(), target_place(spec, &vnf.id, &b.to)?)
                        .with_multiplicity(b.multiplicity);
                    arc.expr = b.color.clone();
                    net.arcs.push(arc);
                }
            }
            OutputPolicy::Random(branches) => {
                let aux = NodeId::new(format!("{}.out", vnf.id));
                net.places.push(Place::new(aux.clone(), PlaceKind::Ordinary));
                topo.insert(aux.clone(), owner.clone());
                net.arcs.push(QpnArc::output(tid.clone(), aux.clone()));
                for (i, w) in branches.iter().enumerate() {
                    let bid = NodeId::new(format!("{}.branch{i}", vnf.id));
                    let mut t = Transition::immediate(bid.clone(), w.weight);
                    if let Some(g) = &w.guard {
                        t = t.with_guard(Guard {
                            binding: first_binding.clone(),
                            field: g.field.clone(),
                            equals: g.equals.clone(),
                        });
                    }
                    net.transitions.push(t);
                    topo.insert(bid.clone(), owner.clone());
                    net.arcs.push(QpnArc::input(aux.clone(), bid.clone(), &first_binding));
                    let mut arc = QpnArc::output(bid, target_place(spec, &vnf.id, &w.branch.to)?)
                        .with_multiplicity(w.branch.multiplicity);
                    arc.expr = w.branch.color.clone();
                    net.arcs.push(arc);
                }
            }
        }
    }

    for sink in &spec.sinks {
        net.places.push(Place::new(sink.id.as_str(), PlaceKind::Sink));
        topo.insert(sink.id.as_str().into(), Owner::Sink(sink.id.clone()));
    }

    let violations = validate_net(&net);
    if !violations.is_empty() {
        return Err(ExpandError::Invalid(
            violations
                .into_iter()
                .map(|v| OriginViolation {
                    origin: v
                        .subject(&net)
                        .and_then(|n| topo.owner(n))
                        .map(|o| o.id().to_string())
                        .unwrap_or_default(),
                    violation: v,
                })
                .collect(),
        ));
    }
    Ok(Expansion { net, topology: topo })
}
