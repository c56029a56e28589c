use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::color::TokenColor;
use super::delay::DelaySpec;
use super::expr::ColorExpr;

/// Identifier of a place or transition. Places and transitions share one id space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

pub type PlaceId = NodeId;
pub type TransitionId = NodeId;

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl PartialEq<str> for NodeId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for NodeId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaceKind {
    Ordinary,
    /// FIFO queue in front of the consuming transition.
    Queuing,
    /// End point: tokens are collected and measured, never consumed.
    Sink,
}

impl PlaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlaceKind::Ordinary => "ordinary",
            PlaceKind::Queuing => "queuing",
            PlaceKind::Sink => "sink",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Place {
    pub id: PlaceId,
    pub kind: PlaceKind,
}

impl Place {
    pub fn new(id: impl Into<PlaceId>, kind: PlaceKind) -> Self {
        Place { id: id.into(), kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionKind {
    Timed { delay: DelaySpec },
    Immediate { weight: f64 },
}

/// Enabling condition on the front token of an input binding: `binding.field == equals`.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub binding: String,
    pub field: String,
    pub equals: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub id: TransitionId,
    pub kind: TransitionKind,
    pub guard: Option<Guard>,
}

impl Transition {
    pub fn timed(id: impl Into<TransitionId>, delay: DelaySpec) -> Self {
        Transition {
            id: id.into(),
            kind: TransitionKind::Timed { delay },
            guard: None,
        }
    }

    pub fn immediate(id: impl Into<TransitionId>, weight: f64) -> Self {
        Transition {
            id: id.into(),
            kind: TransitionKind::Immediate { weight },
            guard: None,
        }
    }

    pub fn with_guard(mut self, guard: Guard) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn is_immediate(&self) -> bool {
        matches!(self.kind, TransitionKind::Immediate { .. })
    }

    pub fn delay(&self) -> Option<&DelaySpec> {
        match &self.kind {
            TransitionKind::Timed { delay } => Some(delay),
            TransitionKind::Immediate { .. } => None,
        }
    }
}

/// Directed arc. Endpoints are untyped so that malformed nets can be represented
/// and reported by validation; a well-formed arc runs place→transition (with a
/// binding name) or transition→place (with an optional output expression).
#[derive(Debug, Clone, PartialEq)]
pub struct QpnArc {
    pub from: NodeId,
    pub to: NodeId,
    pub multiplicity: u32,
    pub binding: Option<String>,
    /// `None` copies the color of the transition's first-declared input binding.
    pub expr: Option<ColorExpr>,
}

impl QpnArc {
    pub fn input(place: impl Into<PlaceId>, transition: impl Into<TransitionId>, binding: &str) -> Self {
        QpnArc {
            from: place.into(),
            to: transition.into(),
            multiplicity: 1,
            binding: Some(binding.to_string()),
            expr: None,
        }
    }

    pub fn output(transition: impl Into<TransitionId>, place: impl Into<PlaceId>) -> Self {
        QpnArc {
            from: transition.into(),
            to: place.into(),
            multiplicity: 1,
            binding: None,
            expr: None,
        }
    }

    pub fn with_multiplicity(mut self, multiplicity: u32) -> Self {
        self.multiplicity = multiplicity;
        self
    }

    pub fn with_expr(mut self, expr: ColorExpr) -> Self {
        self.expr = Some(expr);
        self
    }
}

/// Input side of a transition as seen by [`QpnNet::input_places`].
#[derive(Debug, Clone, PartialEq)]
pub struct InputPlace {
    pub place: PlaceId,
    pub multiplicity: u32,
    pub binding: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
}

/// A queuing Petri net: places, transitions, weighted arcs with expressions, and
/// the initial marking (token colors per place, in queue order).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QpnNet {
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    pub arcs: Vec<QpnArc>,
    pub initial_marking: BTreeMap<PlaceId, Vec<TokenColor>>,
}

impl QpnNet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_place(mut self, place: Place) -> Self {
        self.places.push(place);
        self
    }

    pub fn with_transition(mut self, transition: Transition) -> Self {
        self.transitions.push(transition);
        self
    }

    pub fn with_arc(mut self, arc: QpnArc) -> Self {
        self.arcs.push(arc);
        self
    }

    pub fn with_tokens(mut self, place: impl Into<PlaceId>, tokens: impl IntoIterator<Item = TokenColor>) -> Self {
        self.initial_marking.entry(place.into()).or_default().extend(tokens);
        self
    }

    pub fn place(&self, id: &str) -> Option<&Place> {
        self.places.iter().find(|p| p.id == id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    pub fn transition_mut(&mut self, id: &str) -> Option<&mut Transition> {
        self.transitions.iter_mut().find(|t| t.id == id)
    }

    /// Places with an arc into `t`, in arc declaration order.
    pub fn input_places(&self, t: &str) -> Result<Vec<InputPlace>, ModelError> {
        if self.transition(t).is_none() {
            return Err(ModelError::UnknownTransition(t.to_string()));
        }
        Ok(self
            .arcs
            .iter()
            .filter(|a| a.to == t && self.place(a.from.as_str()).is_some())
            .map(|a| InputPlace {
                place: a.from.clone(),
                multiplicity: a.multiplicity,
                binding: a.binding.clone().unwrap_or_default(),
            })
            .collect())
    }

    /// Arcs leaving `t` towards places, in declaration order.
    pub fn output_arcs<'a>(&'a self, t: &'a str) -> impl Iterator<Item = &'a QpnArc> + 'a {
        self.arcs
            .iter()
            .filter(move |a| a.from == t && self.place(a.to.as_str()).is_some())
    }

    /// Timed transitions without input places, i.e. traffic sources.
    pub fn sources(&self) -> impl Iterator<Item = &Transition> + '_ {
        self.transitions
            .iter()
            .filter(|t| !t.is_immediate() && !self.arcs.iter().any(|a| a.to == t.id))
    }

    pub fn queuing_places(&self) -> impl Iterator<Item = &Place> + '_ {
        self.places.iter().filter(|p| p.kind == PlaceKind::Queuing)
    }

    pub fn sinks(&self) -> impl Iterator<Item = &Place> + '_ {
        self.places.iter().filter(|p| p.kind == PlaceKind::Sink)
    }
}
