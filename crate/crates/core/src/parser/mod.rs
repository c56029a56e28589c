//! `.qpn.json` documents: a raw net section or a VNF-level service section.
//!
//! Canonical serialization is UTF-8 JSON with LF line endings, two-space
//! indentation and lexicographically sorted keys. Every optional value that
//! has a default (multiplicities, bindings) is written out explicitly.

mod expand;
pub(crate) mod json;
mod net;
mod service;

use serde_json::{Map, Value};
use thiserror::Error;

pub use expand::{
    expand_service, expand_service_with_topology, input_place_id, ExpandError, Expansion, OriginViolation, Owner,
    ServiceTopology,
};
pub use service::{
    Branch, BranchGuard, InputDecl, OutputPolicy, ServiceSpec, SinkDecl, SourceDecl, Target, VnfDecl, WeightedBranch,
};

use crate::model::{validate_net, QpnNet, Violation};

/// File extension for specification documents.
pub const SPEC_EXTENSION: &str = ".qpn.json";

#[derive(Debug, Clone, PartialEq)]
pub enum SpecDocument {
    Net(QpnNet),
    Service(ServiceSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column} (offset {offset}): {message}")]
    Syntax {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("{path}: unknown key")]
    UnknownKey { path: String },
    #[error("{path}: missing required key")]
    MissingKey { path: String },
    #[error("{path}: {message}")]
    InvalidValue { path: String, message: String },
    #[error("{path}: dangling reference to `{target}`")]
    DanglingReference { path: String, target: String },
    #[error("{path}: duplicate id `{id}`")]
    DuplicateId { path: String, id: String },
    #[error("document must contain exactly one of the sections `net` or `service`")]
    Sections,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

fn offset_of(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

/// Parses JSON text into a JSON tree, reporting syntax errors with position.
pub(crate) fn parse_json(text: &str) -> Result<Value, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        offset: offset_of(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Canonical text of a JSON tree.
pub(crate) fn canonical_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON trees always serialize");
    s.push('\n');
    s
}

pub fn parse_spec(text: &str) -> Result<SpecDocument, ParseError> {
    spec_from_value(&parse_json(text)?)
}

pub fn spec_from_value(v: &Value) -> Result<SpecDocument, ParseError> {
    let o = json::Obj::new(v, "", &["net", "service"])?;
    match (o.opt("net"), o.opt("service")) {
        (Some(n), None) => Ok(SpecDocument::Net(net::parse_net(n, "net")?)),
        (None, Some(s)) => Ok(SpecDocument::Service(service::parse_service(s, "service")?)),
        _ => Err(ParseError::Sections),
    }
}

pub fn spec_to_value(doc: &SpecDocument) -> Value {
    let mut m = Map::new();
    match doc {
        SpecDocument::Net(n) => m.insert("net".into(), net::net_value(n)),
        SpecDocument::Service(s) => m.insert("service".into(), service::service_value(s)),
    };
    Value::Object(m)
}

pub fn serialize_spec(doc: &SpecDocument) -> String {
    canonical_json(&spec_to_value(doc))
}

/// Net described by a document: raw nets are validated as-is, services are expanded.
pub fn load_net(doc: &SpecDocument) -> Result<QpnNet, LoadError> {
    match doc {
        SpecDocument::Net(net) => {
            let violations = validate_net(net);
            if violations.is_empty() {
                Ok(net.clone())
            } else {
                Err(LoadError::Invalid(violations))
            }
        }
        SpecDocument::Service(spec) => Ok(expand_service(spec)?),
    }
}
