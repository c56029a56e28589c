//! VNF-level service descriptions.

use std::collections::BTreeSet;

use serde_json::{Map, Value};

use super::json::{self, check_name, index, join, Obj};
use super::ParseError;
use crate::model::{ColorExpr, DelaySpec, TokenColor};

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSpec {
    pub name: String,
    pub sources: Vec<SourceDecl>,
    pub vnfs: Vec<VnfDecl>,
    pub sinks: Vec<SinkDecl>,
}

/// Traffic generator: emits a token of constant color every `inter_arrival`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDecl {
    pub id: String,
    pub inter_arrival: DelaySpec,
    pub emit: TokenColor,
    /// Input reference `vnf.input` or a sink id.
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnfDecl {
    pub id: String,
    pub inputs: Vec<InputDecl>,
    pub processing: DelaySpec,
    pub outputs: OutputPolicy,
}

/// A VNF input. Inputs carrying a `sync_group` get their own queue and are
/// synchronized with every other queue of the VNF; inputs without one share a
/// single queue.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDecl {
    pub name: String,
    pub sync_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputPolicy {
    /// Every branch receives tokens on each firing.
    All(Vec<Branch>),
    /// Exactly one branch is chosen per firing, with probability proportional to its weight.
    Random(Vec<WeightedBranch>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub to: String,
    pub multiplicity: u32,
    /// `None` forwards the color of the first bound input.
    pub color: Option<ColorExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBranch {
    pub weight: f64,
    pub guard: Option<BranchGuard>,
    pub branch: Branch,
}

/// Branch is eligible only when the token's `field` equals the symbol `equals`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchGuard {
    pub field: String,
    pub equals: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkDecl {
    pub id: String,
}

/// Resolved connection endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<'a> {
    Input { vnf: &'a VnfDecl, input: &'a InputDecl },
    Sink(&'a SinkDecl),
}

impl OutputPolicy {
    pub fn branches(&self) -> Vec<&Branch> {
        match self {
            OutputPolicy::All(bs) => bs.iter().collect(),
            OutputPolicy::Random(ws) => ws.iter().map(|w| &w.branch).collect(),
        }
    }
}

impl ServiceSpec {
    pub fn vnf(&self, id: &str) -> Option<&VnfDecl> {
        self.vnfs.iter().find(|v| v.id == id)
    }

    pub fn source(&self, id: &str) -> Option<&SourceDecl> {
        self.sources.iter().find(|s| s.id == id)
    }

    /// Resolves `vnf.input` or a sink id.
    pub fn resolve(&self, target: &str) -> Option<Target<'_>> {
        if let Some((vnf, input)) = target.split_once('.') {
            let vnf = self.vnf(vnf)?;
            let input = vnf.inputs.iter().find(|i| i.name == input)?;
            Some(Target::Input { vnf, input })
        } else {
            self.sinks.iter().find(|s| s.id == target).map(Target::Sink)
        }
    }

    /// Reference checks beyond syntax: unique ids, resolvable targets, at least
    /// one source and one sink.
    pub fn check(&self, path: &str) -> Result<(), ParseError> {
        let mut ids = BTreeSet::new();
        let mut claim = |id: &str, p: String| -> Result<(), ParseError> {
            check_name(id, &p)?;
            if ids.insert(id.to_string()) {
                Ok(())
            } else {
                Err(ParseError::DuplicateId { path: p, id: id.to_string() })
            }
        };
        for (i, s) in self.sources.iter().enumerate() {
            claim(&s.id, join(&index(&join(path, "sources"), i), "id"))?;
        }
        for (i, v) in self.vnfs.iter().enumerate() {
            claim(&v.id, join(&index(&join(path, "vnfs"), i), "id"))?;
        }
        for (i, s) in self.sinks.iter().enumerate() {
            claim(&s.id, join(&index(&join(path, "sinks"), i), "id"))?;
        }
        if self.sources.is_empty() {
            return Err(ParseError::InvalidValue {
                path: join(path, "sources"),
                message: "at least one source is required".into(),
            });
        }
        if self.sinks.is_empty() {
            return Err(ParseError::InvalidValue {
                path: join(path, "sinks"),
                message: "at least one sink is required".into(),
            });
        }

        let dangling = |target: &str, p: String| -> Result<(), ParseError> {
            if self.resolve(target).is_some() {
                Ok(())
            } else {
                Err(ParseError::DanglingReference { path: p, target: target.to_string() })
            }
        };
        for (i, s) in self.sources.iter().enumerate() {
            dangling(&s.target, join(&index(&join(path, "sources"), i), "target"))?;
        }
        for (i, v) in self.vnfs.iter().enumerate() {
            let vp = index(&join(path, "vnfs"), i);
            if v.inputs.is_empty() {
                return Err(ParseError::InvalidValue {
                    path: join(&vp, "inputs"),
                    message: "a VNF needs at least one input".into(),
                });
            }
            let mut names = BTreeSet::new();
            for (j, input) in v.inputs.iter().enumerate() {
                let ip = join(&index(&join(&vp, "inputs"), j), "name");
                if !crate::model::is_identifier(&input.name) {
                    return Err(ParseError::InvalidValue {
                        path: ip,
                        message: format!("input name `{}` is not an identifier", input.name),
                    });
                }
                if !names.insert(input.name.as_str()) {
                    return Err(ParseError::DuplicateId { path: ip, id: input.name.clone() });
                }
            }
            let (key, branches) = match &v.outputs {
                OutputPolicy::All(bs) => ("all", bs.iter().collect::<Vec<_>>()),
                OutputPolicy::Random(ws) => ("random", ws.iter().map(|w| &w.branch).collect()),
            };
            let bp = join(&join(&vp, "outputs"), key);
            if branches.is_empty() {
                return Err(ParseError::InvalidValue {
                    path: bp,
                    message: "at least one branch is required".into(),
                });
            }
            for (j, b) in branches.iter().enumerate() {
                dangling(&b.to, join(&index(&bp, j), "to"))?;
                if b.multiplicity == 0 {
                    return Err(ParseError::InvalidValue {
                        path: join(&index(&bp, j), "multiplicity"),
                        message: "multiplicity must be >= 1".into(),
                    });
                }
            }
            if let OutputPolicy::Random(ws) = &v.outputs {
                for (j, w) in ws.iter().enumerate() {
                    if !(w.weight > 0.0 && w.weight.is_finite()) {
                        return Err(ParseError::InvalidValue {
                            path: join(&index(&bp, j), "weight"),
                            message: format!("weight must be > 0, got {}", w.weight),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn branch_from(o: &Obj<'_>) -> Result<Branch, ParseError> {
    Ok(Branch {
        to: o.str("to")?.to_string(),
        multiplicity: o.opt_u32("multiplicity")?.unwrap_or(1),
        color: o.opt("color").map(|v| json::expr(v, &o.at("color"))).transpose()?,
    })
}

pub(crate) fn parse_service(v: &Value, path: &str) -> Result<ServiceSpec, ParseError> {
    let o = Obj::new(v, path, &["name", "sources", "vnfs", "sinks"])?;
    let name = o.str("name")?.to_string();

    let mut sources = Vec::new();
    for (i, s) in o.array("sources")?.iter().enumerate() {
        let so = Obj::new(s, &index(&o.at("sources"), i), &["id", "inter_arrival", "emit", "target"])?;
        sources.push(SourceDecl {
            id: so.str("id")?.to_string(),
            inter_arrival: json::delay(so.req("inter_arrival")?, &so.at("inter_arrival"))?,
            emit: match so.opt("emit") {
                Some(c) => json::color(c, &so.at("emit"))?,
                None => TokenColor::new(),
            },
            target: so.str("target")?.to_string(),
        });
    }

    let mut vnfs = Vec::new();
    for (i, vv) in o.array("vnfs")?.iter().enumerate() {
        let vo = Obj::new(vv, &index(&o.at("vnfs"), i), &["id", "inputs", "processing", "outputs"])?;
        let mut inputs = Vec::new();
        for (j, iv) in vo.array("inputs")?.iter().enumerate() {
            let io = Obj::new(iv, &index(&vo.at("inputs"), j), &["name", "sync_group"])?;
            let sync_group = io.opt_str("sync_group")?.map(str::to_string);
            if sync_group.as_deref() == Some("") {
                return Err(ParseError::InvalidValue {
                    path: io.at("sync_group"),
                    message: "empty sync group label".into(),
                });
            }
            inputs.push(InputDecl {
                name: io.str("name")?.to_string(),
                sync_group,
            });
        }
        let out = Obj::new(vo.req("outputs")?, &vo.at("outputs"), &["all", "random"])?;
        let outputs = match (out.opt_array("all")?, out.opt_array("random")?) {
            (Some(all), None) => {
                let mut bs = Vec::new();
                for (j, b) in all.iter().enumerate() {
                    let bo = Obj::new(b, &index(&out.at("all"), j), &["to", "multiplicity", "color"])?;
                    bs.push(branch_from(&bo)?);
                }
                OutputPolicy::All(bs)
            }
            (None, Some(random)) => {
                let mut ws = Vec::new();
                for (j, b) in random.iter().enumerate() {
                    let bo = Obj::new(
                        b,
                        &index(&out.at("random"), j),
                        &["to", "multiplicity", "color", "weight", "guard"],
                    )?;
                    let guard = match bo.opt("guard") {
                        Some(g) => {
                            let go = Obj::new(g, &bo.at("guard"), &["field", "equals"])?;
                            Some(BranchGuard {
                                field: go.str("field")?.to_string(),
                                equals: go.str("equals")?.to_string(),
                            })
                        }
                        None => None,
                    };
                    ws.push(WeightedBranch {
                        weight: bo.f64("weight")?,
                        guard,
                        branch: branch_from(&bo)?,
                    });
                }
                OutputPolicy::Random(ws)
            }
            _ => {
                return Err(ParseError::InvalidValue {
                    path: out.path.clone(),
                    message: "exactly one of `all` or `random` is required".into(),
                })
            }
        };
        vnfs.push(VnfDecl {
            id: vo.str("id")?.to_string(),
            inputs,
            processing: json::delay(vo.req("processing")?, &vo.at("processing"))?,
            outputs,
        });
    }

    let mut sinks = Vec::new();
    for (i, s) in o.array("sinks")?.iter().enumerate() {
        let so = Obj::new(s, &index(&o.at("sinks"), i), &["id"])?;
        sinks.push(SinkDecl { id: so.str("id")?.to_string() });
    }

    let spec = ServiceSpec { name, sources, vnfs, sinks };
    spec.check(path)?;
    Ok(spec)
}

fn obj(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>())
}

fn branch_value(b: &Branch, extra: Vec<(&str, Value)>) -> Value {
    let mut pairs = vec![
        ("to", Value::String(b.to.clone())),
        ("multiplicity", Value::from(b.multiplicity)),
    ];
    if let Some(c) = &b.color {
        pairs.push(("color", Value::String(c.to_string())));
    }
    pairs.extend(extra);
    obj(pairs)
}

pub(crate) fn service_value(s: &ServiceSpec) -> Value {
    let sources = s
        .sources
        .iter()
        .map(|src| {
            obj(vec![
                ("id", src.id.clone().into()),
                ("inter_arrival", json::delay_value(&src.inter_arrival)),
                ("emit", json::color_value(&src.emit)),
                ("target", src.target.clone().into()),
            ])
        })
        .collect();
    let vnfs = s
        .vnfs
        .iter()
        .map(|v| {
            let inputs = v
                .inputs
                .iter()
                .map(|i| {
                    let mut pairs = vec![("name", Value::String(i.name.clone()))];
                    if let Some(g) = &i.sync_group {
                        pairs.push(("sync_group", g.clone().into()));
                    }
                    obj(pairs)
                })
                .collect();
            let outputs = match &v.outputs {
                OutputPolicy::All(bs) => obj(vec![("all", bs.iter().map(|b| branch_value(b, vec![])).collect())]),
                OutputPolicy::Random(ws) => obj(vec![(
                    "random",
                    ws.iter()
                        .map(|w| {
                            let mut extra = vec![("weight", json::number(w.weight))];
                            if let Some(g) = &w.guard {
                                extra.push((
                                    "guard",
                                    obj(vec![("field", g.field.clone().into()), ("equals", g.equals.clone().into())]),
                                ));
                            }
                            branch_value(&w.branch, extra)
                        })
                        .collect(),
                )]),
            };
            obj(vec![
                ("id", v.id.clone().into()),
                ("inputs", Value::Array(inputs)),
                ("processing", json::delay_value(&v.processing)),
                ("outputs", outputs),
            ])
        })
        .collect();
    let sinks = s.sinks.iter().map(|k| obj(vec![("id", k.id.clone().into())])).collect();
    obj(vec![
        ("name", s.name.clone().into()),
        ("sources", Value::Array(sources)),
        ("vnfs", Value::Array(vnfs)),
        ("sinks", Value::Array(sinks)),
    ])
}
