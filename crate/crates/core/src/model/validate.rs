use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::expr::{is_identifier, ColorExpr, Shape};
use super::net::{PlaceKind, QpnNet, TransitionKind};

/// A structural defect found by [`validate_net`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyId,
    DuplicateId { id: String },
    /// The same id names both a place and a transition.
    SharedId { id: String },
    UnknownEndpoint { arc: usize, id: String },
    /// Arc between two places or two transitions.
    Bipartite { arc: usize, from: String, to: String },
    ZeroMultiplicity { arc: usize },
    MissingBinding { arc: usize },
    InvalidBindingName { arc: usize, binding: String },
    DuplicateBinding { transition: String, binding: String },
    MisplacedAnnotation { arc: usize, detail: &'static str },
    NonPositiveWeight { transition: String, weight: f64 },
    SinkOutgoingArc { place: String },
    /// Immediate transition without input places: always enabled at zero delay.
    UnboundedImmediate { transition: String },
    UndeclaredBinding { transition: String, binding: String },
    DivisionByZero { transition: String },
    ExpressionType { transition: String, detail: String },
    InvalidDelay { transition: String, detail: String },
    UnknownMarkingPlace { place: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "empty place or transition id"),
            Violation::DuplicateId { id } => write!(f, "duplicate id `{id}`"),
            Violation::SharedId { id } => write!(f, "id `{id}` names both a place and a transition"),
            Violation::UnknownEndpoint { arc, id } => write!(f, "arc #{arc}: unknown endpoint `{id}`"),
            Violation::Bipartite { arc, from, to } => {
                write!(f, "arc #{arc}: `{from}` -> `{to}` does not connect a place and a transition")
            }
            Violation::ZeroMultiplicity { arc } => write!(f, "arc #{arc}: multiplicity must be >= 1"),
            Violation::MissingBinding { arc } => write!(f, "arc #{arc}: input arc without binding name"),
            Violation::InvalidBindingName { arc, binding } => {
                write!(f, "arc #{arc}: binding `{binding}` is not an identifier")
            }
            Violation::DuplicateBinding { transition, binding } => {
                write!(f, "transition `{transition}`: binding `{binding}` declared twice")
            }
            Violation::MisplacedAnnotation { arc, detail } => write!(f, "arc #{arc}: {detail}"),
            Violation::NonPositiveWeight { transition, weight } => {
                write!(f, "transition `{transition}`: firing weight {weight} must be > 0")
            }
            Violation::SinkOutgoingArc { place } => write!(f, "sink place `{place}` has an outgoing arc"),
            Violation::UnboundedImmediate { transition } => {
                write!(f, "immediate transition `{transition}` has no input place")
            }
            Violation::UndeclaredBinding { transition, binding } => {
                write!(f, "transition `{transition}`: expression references undeclared binding `{binding}`")
            }
            Violation::DivisionByZero { transition } => {
                write!(f, "transition `{transition}`: expression divides by literal zero")
            }
            Violation::ExpressionType { transition, detail } => write!(f, "transition `{transition}`: {detail}"),
            Violation::InvalidDelay { transition, detail } => {
                write!(f, "transition `{transition}`: invalid delay: {detail}")
            }
            Violation::UnknownMarkingPlace { place } => {
                write!(f, "initial marking refers to unknown place `{place}`")
            }
        }
    }
}

impl Violation {
    /// The place or transition the violation is about, if any.
    pub fn subject<'a>(&'a self, net: &'a QpnNet) -> Option<&'a str> {
        match self {
            Violation::EmptyId => None,
            Violation::DuplicateId { id } | Violation::SharedId { id } => Some(id),
            Violation::UnknownEndpoint { arc, .. }
            | Violation::Bipartite { arc, .. }
            | Violation::ZeroMultiplicity { arc }
            | Violation::MissingBinding { arc }
            | Violation::InvalidBindingName { arc, .. }
            | Violation::MisplacedAnnotation { arc, .. } => net.arcs.get(*arc).map(|a| a.from.as_str()),
            Violation::DuplicateBinding { transition, .. }
            | Violation::NonPositiveWeight { transition, .. }
            | Violation::UnboundedImmediate { transition }
            | Violation::UndeclaredBinding { transition, .. }
            | Violation::DivisionByZero { transition }
            | Violation::ExpressionType { transition, .. }
            | Violation::InvalidDelay { transition, .. } => Some(transition),
            Violation::SinkOutgoingArc { place } | Violation::UnknownMarkingPlace { place } => Some(place),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Node {
    Place(PlaceKind),
    Transition,
}

/// Checks every structural invariant of `net`. An empty list means the net is valid.
pub fn validate_net(net: &QpnNet) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut nodes: BTreeMap<&str, Node> = BTreeMap::new();
    let mut place_ids = BTreeSet::new();
    for p in &net.places {
        if p.id.as_str().is_empty() {
            out.push(Violation::EmptyId);
        } else if !place_ids.insert(p.id.as_str()) {
            out.push(Violation::DuplicateId { id: p.id.to_string() });
        }
        nodes.insert(p.id.as_str(), Node::Place(p.kind));
    }
    let mut transition_ids = BTreeSet::new();
    for t in &net.transitions {
        if t.id.as_str().is_empty() {
            out.push(Violation::EmptyId);
        } else if !transition_ids.insert(t.id.as_str()) {
            out.push(Violation::DuplicateId { id: t.id.to_string() });
        } else if place_ids.contains(t.id.as_str()) {
            out.push(Violation::SharedId { id: t.id.to_string() });
        }
        nodes.entry(t.id.as_str()).or_insert(Node::Transition);
    }

    // bindings declared per transition, in declaration order
    let mut declared: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut has_input: BTreeSet<&str> = BTreeSet::new();
    for (i, arc) in net.arcs.iter().enumerate() {
        let from = nodes.get(arc.from.as_str());
        let to = nodes.get(arc.to.as_str());
        for (id, node) in [(&arc.from, from), (&arc.to, to)] {
            if node.is_none() {
                out.push(Violation::UnknownEndpoint { arc: i, id: id.to_string() });
            }
        }
        if arc.multiplicity == 0 {
            out.push(Violation::ZeroMultiplicity { arc: i });
        }
        let (Some(&from), Some(&to)) = (from, to) else { continue };
        match (from, to) {
            (Node::Place(kind), Node::Transition) => {
                if kind == PlaceKind::Sink {
                    out.push(Violation::SinkOutgoingArc { place: arc.from.to_string() });
                }
                has_input.insert(arc.to.as_str());
                if arc.expr.is_some() {
                    out.push(Violation::MisplacedAnnotation {
                        arc: i,
                        detail: "input arc carries an output expression",
                    });
                }
                match &arc.binding {
                    None => out.push(Violation::MissingBinding { arc: i }),
                    Some(b) if !is_identifier(b) => out.push(Violation::InvalidBindingName {
                        arc: i,
                        binding: b.clone(),
                    }),
                    Some(b) => {
                        let list = declared.entry(arc.to.as_str()).or_default();
                        if list.contains(&b.as_str()) {
                            out.push(Violation::DuplicateBinding {
                                transition: arc.to.to_string(),
                                binding: b.clone(),
                            });
                        } else {
                            list.push(b);
                        }
                    }
                }
            }
            (Node::Transition, Node::Place(_)) => {
                if arc.binding.is_some() {
                    out.push(Violation::MisplacedAnnotation {
                        arc: i,
                        detail: "output arc carries a binding name",
                    });
                }
            }
            _ => {
                if let (Node::Place(PlaceKind::Sink), Node::Place(_)) = (from, to) {
                    out.push(Violation::SinkOutgoingArc { place: arc.from.to_string() });
                }
                out.push(Violation::Bipartite {
                    arc: i,
                    from: arc.from.to_string(),
                    to: arc.to.to_string(),
                });
            }
        }
    }

    for t in &net.transitions {
        let tid = t.id.to_string();
        let bindings = declared.get(t.id.as_str()).cloned().unwrap_or_default();
        let check_expr = |e: &ColorExpr, out: &mut Vec<Violation>| {
            let mut seen = BTreeSet::new();
            for b in e.bindings() {
                if !bindings.contains(&b) && seen.insert(b) {
                    out.push(Violation::UndeclaredBinding {
                        transition: tid.clone(),
                        binding: b.to_string(),
                    });
                }
            }
            if e.divides_by_literal_zero() {
                out.push(Violation::DivisionByZero { transition: tid.clone() });
            }
            for detail in e.type_errors() {
                out.push(Violation::ExpressionType {
                    transition: tid.clone(),
                    detail,
                });
            }
        };

        match &t.kind {
            TransitionKind::Immediate { weight } => {
                if !(*weight > 0.0 && weight.is_finite()) {
                    out.push(Violation::NonPositiveWeight {
                        transition: tid.clone(),
                        weight: *weight,
                    });
                }
                if !has_input.contains(t.id.as_str()) {
                    out.push(Violation::UnboundedImmediate { transition: tid.clone() });
                }
            }
            TransitionKind::Timed { delay } => {
                for p in delay.params() {
                    check_expr(p, &mut out);
                    if p.shape() == Shape::Record {
                        out.push(Violation::ExpressionType {
                            transition: tid.clone(),
                            detail: "delay parameter must be a number".into(),
                        });
                    }
                }
                if let Some(resolved) = delay.resolve_with(|e| e.constant_number()) {
                    if let Err(e) = resolved.check() {
                        out.push(Violation::InvalidDelay {
                            transition: tid.clone(),
                            detail: e.to_string(),
                        });
                    }
                }
            }
        }

        if let Some(g) = &t.guard {
            if !bindings.contains(&g.binding.as_str()) {
                out.push(Violation::UndeclaredBinding {
                    transition: tid.clone(),
                    binding: g.binding.clone(),
                });
            }
        }

        for arc in net.output_arcs(t.id.as_str()) {
            if let Some(e) = &arc.expr {
                check_expr(e, &mut out);
                if e.shape() != Shape::Record {
                    out.push(Violation::ExpressionType {
                        transition: tid.clone(),
                        detail: format!("output expression towards `{}` must produce a record", arc.to),
                    });
                }
            }
        }
    }

    for place in net.initial_marking.keys() {
        if !place_ids.contains(place.as_str()) {
            out.push(Violation::UnknownMarkingPlace { place: place.to_string() });
        }
    }

    out
}

impl QpnNet {
    pub fn validate(&self) -> Vec<Violation> {
        validate_net(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ColorExpr, DelaySpec, Guard, Place, QpnArc, Transition};

    fn chain() -> QpnNet {
        QpnNet::new()
            .with_place(Place::new("q", PlaceKind::Queuing))
            .with_place(Place::new("done", PlaceKind::Sink))
            .with_transition(Transition::timed("src", DelaySpec::deterministic(1.0)))
            .with_transition(Transition::timed("work", DelaySpec::deterministic(0.1)))
            .with_arc(QpnArc::output("src", "q"))
            .with_arc(QpnArc::input("q", "work", "x"))
            .with_arc(QpnArc::output("work", "done"))
    }

    #[test]
    fn chain_is_valid() {
        assert_eq!(validate_net(&chain()), vec![]);
    }

    #[test]
    fn place_to_place_arc() {
        let net = chain().with_place(Place::new("other", PlaceKind::Ordinary)).with_arc(QpnArc {
            from: "q".into(),
            to: "other".into(),
            multiplicity: 1,
            binding: None,
            expr: None,
        });
        assert_eq!(
            validate_net(&net),
            vec![Violation::Bipartite { arc: 3, from: "q".into(), to: "other".into() }]
        );
    }

    #[test]
    fn immediate_without_input() {
        let net = chain()
            .with_transition(Transition::immediate("burst", 1.0))
            .with_arc(QpnArc::output("burst", "q"));
        assert_eq!(
            validate_net(&net),
            vec![Violation::UnboundedImmediate { transition: "burst".into() }]
        );
    }

    #[test]
    fn shared_and_duplicate_ids() {
        let net = chain()
            .with_place(Place::new("work", PlaceKind::Ordinary))
            .with_transition(Transition::timed("src", DelaySpec::deterministic(1.0)));
        let v = validate_net(&net);
        assert!(v.contains(&Violation::SharedId { id: "work".into() }));
        assert!(v.contains(&Violation::DuplicateId { id: "src".into() }));
    }

    #[test]
    fn sink_with_outgoing_arc() {
        let net = chain()
            .with_transition(Transition::immediate("drain", 1.0))
            .with_arc(QpnArc::input("done", "drain", "x"));
        assert_eq!(
            validate_net(&net),
            vec![Violation::SinkOutgoingArc { place: "done".into() }]
        );
    }

    #[test]
    fn multiplicity_weight_and_delay() {
        let mut net = chain();
        net.arcs[1].multiplicity = 0;
        net.transitions[1].kind = TransitionKind::Timed { delay: DelaySpec::uniform(2.0, 1.0) };
        net = net
            .with_place(Place::new("p", PlaceKind::Ordinary))
            .with_transition(Transition::immediate("i", 0.0))
            .with_arc(QpnArc::input("p", "i", "x"));
        let v = validate_net(&net);
        assert!(v.contains(&Violation::ZeroMultiplicity { arc: 1 }));
        assert!(v.contains(&Violation::NonPositiveWeight { transition: "i".into(), weight: 0.0 }));
        assert!(v.iter().any(|x| matches!(x, Violation::InvalidDelay { transition, .. } if transition == "work")));
    }

    #[test]
    fn expression_checks() {
        let mut net = chain();
        net.arcs[2].expr = Some(ColorExpr::parse("{a: y.size, b: x.size / 0}").unwrap());
        let v = validate_net(&net);
        assert_eq!(
            v,
            vec![
                Violation::UndeclaredBinding { transition: "work".into(), binding: "y".into() },
                Violation::DivisionByZero { transition: "work".into() },
            ]
        );
        net.arcs[2].expr = Some(ColorExpr::parse("x.size * 2").unwrap());
        assert!(matches!(validate_net(&net)[..], [Violation::ExpressionType { .. }]));
    }

    #[test]
    fn source_delay_may_not_read_bindings() {
        let mut net = chain();
        net.transitions[0].kind = TransitionKind::Timed {
            delay: DelaySpec::Deterministic { value: ColorExpr::field("x", "size") },
        };
        assert_eq!(
            validate_net(&net),
            vec![Violation::UndeclaredBinding { transition: "src".into(), binding: "x".into() }]
        );
    }

    #[test]
    fn guard_binding_must_exist() {
        let mut net = chain();
        net.transitions[1] = net.transitions[1].clone().with_guard(Guard {
            binding: "nope".into(),
            field: "t".into(),
            equals: "a".into(),
        });
        assert_eq!(validate_net(&net).len(), 1);
    }

    #[test]
    fn duplicate_binding_and_unknown_marking() {
        let net = chain()
            .with_place(Place::new("q2", PlaceKind::Queuing))
            .with_arc(QpnArc::input("q2", "work", "x"))
            .with_tokens("ghost", [crate::model::TokenColor::new()]);
        assert_eq!(
            validate_net(&net),
            vec![
                Violation::DuplicateBinding { transition: "work".into(), binding: "x".into() },
                Violation::UnknownMarkingPlace { place: "ghost".into() },
            ]
        );
    }

    #[test]
    fn idempotent() {
        let mut net = chain();
        net.arcs[0].multiplicity = 0;
        assert_eq!(validate_net(&net), validate_net(&net));
    }
}
