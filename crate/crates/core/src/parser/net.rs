//! Raw net section: places, transitions, arcs and initial marking written out directly.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Value};

use super::json::{self, index, Obj};
use super::ParseError;
use crate::model::{Guard, Place, PlaceKind, QpnArc, QpnNet, Transition, TransitionKind};

fn guard(v: &Value, path: &str) -> Result<Guard, ParseError> {
    let o = Obj::new(v, path, &["binding", "field", "equals"])?;
    Ok(Guard {
        binding: o.str("binding")?.to_string(),
        field: o.str("field")?.to_string(),
        equals: o.str("equals")?.to_string(),
    })
}

pub(crate) fn parse_net(v: &Value, path: &str) -> Result<QpnNet, ParseError> {
    let o = Obj::new(v, path, &["places", "transitions", "arcs", "initial_marking"])?;
    let mut net = QpnNet::new();
    let mut ids = BTreeSet::new();

    for (i, pv) in o.array("places")?.iter().enumerate() {
        let po = Obj::new(pv, &index(&o.at("places"), i), &["id", "kind"])?;
        let id = po.str("id")?;
        let kind = match po.str("kind")? {
            "ordinary" => PlaceKind::Ordinary,
            "queuing" => PlaceKind::Queuing,
            "sink" => PlaceKind::Sink,
            other => {
                return Err(ParseError::InvalidValue {
                    path: po.at("kind"),
                    message: format!("unknown place kind `{other}`"),
                })
            }
        };
        if !ids.insert(id.to_string()) {
            return Err(ParseError::DuplicateId { path: po.at("id"), id: id.to_string() });
        }
        net.places.push(Place::new(id, kind));
    }

    for (i, tv) in o.array("transitions")?.iter().enumerate() {
        let tp = index(&o.at("transitions"), i);
        let head = Obj::new(tv, &tp, &["id", "kind", "delay", "weight", "guard"])?;
        let kind = match head.str("kind")? {
            "timed" => {
                let to = Obj::new(tv, &tp, &["id", "kind", "delay", "guard"])?;
                TransitionKind::Timed {
                    delay: json::delay(to.req("delay")?, &to.at("delay"))?,
                }
            }
            "immediate" => {
                let to = Obj::new(tv, &tp, &["id", "kind", "weight", "guard"])?;
                TransitionKind::Immediate {
                    weight: to.opt("weight").map(|w| json::as_f64(w, &to.at("weight"))).transpose()?.unwrap_or(1.0),
                }
            }
            other => {
                return Err(ParseError::InvalidValue {
                    path: head.at("kind"),
                    message: format!("unknown transition kind `{other}`"),
                })
            }
        };
        let id = head.str("id")?;
        if !ids.insert(id.to_string()) {
            return Err(ParseError::DuplicateId { path: head.at("id"), id: id.to_string() });
        }
        net.transitions.push(Transition {
            id: id.into(),
            kind,
            guard: head.opt("guard").map(|g| guard(g, &head.at("guard"))).transpose()?,
        });
    }

    let mut input_count: BTreeMap<String, usize> = BTreeMap::new();
    for (i, av) in o.array("arcs")?.iter().enumerate() {
        let ao = Obj::new(av, &index(&o.at("arcs"), i), &["from", "to", "multiplicity", "binding", "expr"])?;
        let from = ao.str("from")?;
        let to = ao.str("to")?;
        for (key, id) in [("from", from), ("to", to)] {
            if !ids.contains(id) {
                return Err(ParseError::DanglingReference { path: ao.at(key), target: id.to_string() });
            }
        }
        let mut binding = ao.opt_str("binding")?.map(str::to_string);
        if net.place(from).is_some() && net.transition(to).is_some() {
            // unnamed inputs bind as in0, in1, ... by position among the transition's inputs
            let k = input_count.entry(to.to_string()).or_default();
            if binding.is_none() {
                binding = Some(format!("in{k}"));
            }
            *k += 1;
        }
        net.arcs.push(QpnArc {
            from: from.into(),
            to: to.into(),
            multiplicity: ao.opt_u32("multiplicity")?.unwrap_or(1),
            binding,
            expr: ao.opt("expr").map(|e| json::expr(e, &ao.at("expr"))).transpose()?,
        });
    }

    if let Some(mv) = o.opt("initial_marking") {
        let mp = o.at("initial_marking");
        let m = mv.as_object().ok_or_else(|| ParseError::InvalidValue {
            path: mp.clone(),
            message: "expected an object".into(),
        })?;
        for (place, tokens) in m {
            let pp = json::join(&mp, place);
            if net.place(place).is_none() {
                return Err(ParseError::DanglingReference { path: pp, target: place.clone() });
            }
            let list = json::as_array(tokens, &pp)?
                .iter()
                .enumerate()
                .map(|(j, c)| json::color(c, &index(&pp, j)))
                .collect::<Result<Vec<_>, _>>()?;
            net.initial_marking.insert(place.as_str().into(), list);
        }
    }
    Ok(net)
}

pub(crate) fn net_value(net: &QpnNet) -> Value {
    let places = net
        .places
        .iter()
        .map(|p| {
            let mut m = Map::new();
            m.insert("id".into(), p.id.to_string().into());
            m.insert("kind".into(), p.kind.as_str().into());
            Value::Object(m)
        })
        .collect();
    let transitions = net
        .transitions
        .iter()
        .map(|t| {
            let mut m = Map::new();
            m.insert("id".into(), t.id.to_string().into());
            match &t.kind {
                TransitionKind::Timed { delay } => {
                    m.insert("kind".into(), "timed".into());
                    m.insert("delay".into(), json::delay_value(delay));
                }
                TransitionKind::Immediate { weight } => {
                    m.insert("kind".into(), "immediate".into());
                    m.insert("weight".into(), json::number(*weight));
                }
            }
            if let Some(g) = &t.guard {
                let mut gm = Map::new();
                gm.insert("binding".into(), g.binding.clone().into());
                gm.insert("field".into(), g.field.clone().into());
                gm.insert("equals".into(), g.equals.clone().into());
                m.insert("guard".into(), Value::Object(gm));
            }
            Value::Object(m)
        })
        .collect();
    let arcs = net
        .arcs
        .iter()
        .map(|a| {
            let mut m = Map::new();
            m.insert("from".into(), a.from.to_string().into());
            m.insert("to".into(), a.to.to_string().into());
            m.insert("multiplicity".into(), a.multiplicity.into());
            if let Some(b) = &a.binding {
                m.insert("binding".into(), b.clone().into());
            }
            if let Some(e) = &a.expr {
                m.insert("expr".into(), Value::String(e.to_string()));
            }
            Value::Object(m)
        })
        .collect();
    let marking = net
        .initial_marking
        .iter()
        .map(|(p, tokens)| (p.to_string(), Value::Array(tokens.iter().map(json::color_value).collect())))
        .collect::<Map<_, _>>();

    let mut m = Map::new();
    m.insert("places".into(), Value::Array(places));
    m.insert("transitions".into(), Value::Array(transitions));
    m.insert("arcs".into(), Value::Array(arcs));
    m.insert("initial_marking".into(), Value::Object(marking));
    Value::Object(m)
}
