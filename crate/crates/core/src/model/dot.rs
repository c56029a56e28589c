use std::fmt::Write;

use super::net::{PlaceKind, QpnNet, TransitionKind};
use super::validate::{validate_net, Violation};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Renders a valid net as Graphviz DOT: places as circles (double circle for
/// queuing places, filled for sinks), timed transitions as boxes, immediate
/// transitions as filled bars. Arc labels show multiplicities other than 1 and
/// the output expression, if any.
pub fn export_dot(net: &QpnNet) -> Result<String, Vec<Violation>> {
    let violations = validate_net(net);
    if !violations.is_empty() {
        return Err(violations);
    }

    let mut out = String::from("digraph qpn {\n  rankdir=LR;\n");
    for p in &net.places {
        let tokens = net.initial_marking.get(&p.id).map_or(0, Vec::len);
        let label = if tokens > 0 { format!("{}\n({tokens})", p.id) } else { p.id.to_string() };
        let style = match p.kind {
            PlaceKind::Ordinary => "shape=circle",
            PlaceKind::Queuing => "shape=doublecircle",
            PlaceKind::Sink => "shape=circle, style=filled, fillcolor=lightgray",
        };
        let _ = writeln!(out, "  {} [{style}, label={}];", quote(p.id.as_str()), quote(&label));
    }
    for t in &net.transitions {
        let (style, label) = match &t.kind {
            TransitionKind::Timed { delay } => ("shape=box", format!("{}\n{delay}", t.id)),
            TransitionKind::Immediate { weight } => (
                "shape=box, style=filled, fillcolor=black, fontcolor=white",
                format!("{}\nw={weight}", t.id),
            ),
        };
        let _ = writeln!(out, "  {} [{style}, label={}];", quote(t.id.as_str()), quote(&label));
    }
    for a in &net.arcs {
        let mut parts = Vec::new();
        if a.multiplicity != 1 {
            parts.push(a.multiplicity.to_string());
        }
        if let Some(e) = &a.expr {
            parts.push(e.to_string());
        }
        let _ = write!(out, "  {} -> {}", quote(a.from.as_str()), quote(a.to.as_str()));
        if !parts.is_empty() {
            let _ = write!(out, " [label={}]", quote(&parts.join(" : ")));
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    Ok(out)
}
