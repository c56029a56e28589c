use std::path::PathBuf;

use proptest::prelude::*;
use qpn_core::model::{export_dot, validate_net, ColorExpr, DelaySpec, PlaceKind, TokenColor, TransitionKind};
use qpn_core::parser::{
    expand_service, expand_service_with_topology, load_net, parse_spec, serialize_spec, spec_to_value, Branch,
    BranchGuard, InputDecl, LoadError, OutputPolicy, ParseError, ServiceSpec, SinkDecl, SourceDecl, SpecDocument,
    VnfDecl, WeightedBranch,
};

const FIXTURES: &[&str] = &[
    "chain.qpn.json",
    "branching.qpn.json",
    "arc_expressions.qpn.json",
    "synchronized.qpn.json",
    "unsynchronized.qpn.json",
    "md1.qpn.json",
    "pipeline.qpn.json",
    "sync.qpn.json",
    "video.qpn.json",
];

fn read(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn service(name: &str) -> ServiceSpec {
    match parse_spec(&read(name)).unwrap() {
        SpecDocument::Service(s) => s,
        SpecDocument::Net(_) => panic!("{name} is a raw net"),
    }
}

#[test]
fn fixtures_round_trip_and_are_canonical() {
    for name in FIXTURES {
        let doc = parse_spec(&read(name)).unwrap();
        let text = serialize_spec(&doc);
        let again = parse_spec(&text).unwrap();
        assert_eq!(again, doc, "{name}");
        assert_eq!(serialize_spec(&again), text, "{name}");
        assert!(text.ends_with("}\n") && !text.contains('\r'));
        assert!(load_net(&doc).is_ok(), "{name}");
    }
}

#[test]
fn canonical_text_sorts_keys_and_indents() {
    let text = serialize_spec(&parse_spec(&read("pipeline.qpn.json")).unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text);
    let src = text.find("\"sinks\"").unwrap();
    let vnfs = text.find("\"vnfs\"").unwrap();
    let name = text.find("\"name\"").unwrap();
    assert!(name < src && src < vnfs);
    assert!(text.contains("\n  \"service\": {\n    \"name\""));
}

#[test]
fn uniform_bounds_survive_serialization() {
    let text = serialize_spec(&parse_spec(&read("branching.qpn.json")).unwrap());
    assert!(text.contains("\"dist\": \"uniform\""));
    assert!(text.contains("\"high\": 2.0"));
    assert!(text.contains("\"low\": 1.0"));
}

#[test]
fn video_fixture_structure() {
    let s = service("video.qpn.json");
    assert_eq!(s.sources.len(), 1);
    assert_eq!(s.sources[0].id, "user");
    assert_eq!(s.sinks[0].id, "user_sink");
    let ids: Vec<_> = s.vnfs.iter().map(|v| v.id.as_str()).collect();
    assert_eq!(ids, ["cache", "server", "optimizer", "ad_insertion", "cache_sync"]);

    let net = expand_service(&s).unwrap();
    assert_eq!(net.transition("cache.branch0").unwrap().kind, TransitionKind::Immediate { weight: 0.7 });
    assert_eq!(net.transition("cache.branch1").unwrap().kind, TransitionKind::Immediate { weight: 0.3 });
    assert_eq!(net.place("cache.out").unwrap().kind, PlaceKind::Ordinary);
    let sync = net.input_places("cache_sync").unwrap();
    assert_eq!(sync.len(), 2);
    assert_eq!(sync[0].place.as_str(), "cache_sync.video");
    assert_eq!(sync[1].place.as_str(), "cache_sync.ad");
    assert!(validate_net(&net).is_empty());
}

#[test]
fn branching_net() {
    let doc = parse_spec(&read("branching.qpn.json")).unwrap();
    let net = load_net(&doc).unwrap();
    assert_eq!(net.places.len(), 4);
    assert_eq!(net.transitions.len(), 3);
    assert!(validate_net(&net).is_empty());
    let dot = export_dot(&net).unwrap();
    let lines: Vec<&str> = dot.lines().collect();
    assert_eq!(lines.iter().filter(|l| l.contains("shape=circle") || l.contains("shape=doublecircle")).count(), 4);
    assert_eq!(lines.iter().filter(|l| l.contains("shape=box")).count(), 3);
    assert_eq!(lines.iter().filter(|l| l.contains(" -> ")).count(), net.arcs.len());
    assert_eq!(export_dot(&net).unwrap(), dot);
}

#[test]
fn synchronization_variants() {
    let a = load_net(&parse_spec(&read("synchronized.qpn.json")).unwrap()).unwrap();
    let ins = a.input_places("cache").unwrap();
    assert_eq!(ins.len(), 2);
    assert_ne!(ins[0].place, ins[1].place);
    assert!(ins.iter().all(|i| i.multiplicity == 1));
    assert!(ins.iter().all(|i| a.place(i.place.as_str()).unwrap().kind == PlaceKind::Queuing));

    let b = load_net(&parse_spec(&read("unsynchronized.qpn.json")).unwrap()).unwrap();
    let ins = b.input_places("cache").unwrap();
    assert_eq!(ins.len(), 1);
    let shared = ins[0].place.clone();
    assert_eq!(b.arcs.iter().filter(|arc| arc.to == shared).count(), 2);

    assert!(a.input_places("video_src").unwrap().is_empty());
    assert!(a.input_places("nope").is_err());
}

#[test]
fn load_net_delegates_to_expansion() {
    let s = service("video.qpn.json");
    assert_eq!(load_net(&SpecDocument::Service(s.clone())).unwrap(), expand_service(&s).unwrap());
}

#[test]
fn dangling_target_names_path() {
    let text = read("pipeline.qpn.json").replace("\"to\": \"sink\"", "\"to\": \"vnf_X.in\"");
    match parse_spec(&text) {
        Err(ParseError::DanglingReference { path, target }) => {
            assert_eq!(path, "service.vnfs[0].outputs.all[0].to");
            assert_eq!(target, "vnf_X.in");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn duplicate_vnf_id() {
    let text = read("chain.qpn.json").replace("\"id\": \"b\"", "\"id\": \"a\"");
    assert!(matches!(parse_spec(&text), Err(ParseError::DuplicateId { id, .. }) if id == "a"));
}

#[test]
fn missing_and_unknown_keys() {
    let text = read("pipeline.qpn.json").replace("\"processing\"", "\"procesing\"");
    assert!(matches!(parse_spec(&text), Err(ParseError::UnknownKey { path }) if path == "service.vnfs[0].procesing"));
    let text = read("pipeline.qpn.json").replace("\"sinks\": [{\"id\": \"sink\"}]", "\"sinks\": []");
    assert!(matches!(parse_spec(&text), Err(_)));
}

#[test]
fn invalid_expansion_reports_origin() {
    // an output expression reading a binding the VNF does not have
    let text = read("chain.qpn.json").replace(
        "\"outputs\": {\"all\": [{\"to\": \"sink\"}]}",
        "\"outputs\": {\"all\": [{\"to\": \"sink\", \"color\": \"{n: ghost.size}\"}]}",
    );
    let doc = parse_spec(&text).unwrap();
    match load_net(&doc) {
        Err(LoadError::Expand(e)) => {
            let msg = e.to_string();
            assert!(msg.starts_with("`b`"), "{msg}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn raw_net_violations_survive_round_trip() {
    let text = read("branching.qpn.json").replace("\"weight\": 1}", "\"weight\": -1}");
    let doc = parse_spec(&text).unwrap();
    let SpecDocument::Net(net) = &doc else { panic!() };
    let v1 = validate_net(net);
    assert_eq!(v1.len(), 2);
    assert_eq!(validate_net(net), v1);
    let SpecDocument::Net(again) = parse_spec(&serialize_spec(&doc)).unwrap() else { panic!() };
    assert_eq!(validate_net(&again), v1);
}

// generated service specs

fn arb_delay() -> impl Strategy<Value = DelaySpec> {
    prop_oneof![
        (0u32..1000).prop_map(|v| DelaySpec::deterministic(f64::from(v) / 100.0)),
        (0u32..100, 0u32..100).prop_map(|(a, b)| DelaySpec::uniform(f64::from(a) / 10.0, f64::from(a + b) / 10.0)),
        (1u32..1000).prop_map(|m| DelaySpec::exponential(f64::from(m) / 7.0)),
        (1u32..100, 1u32..50, any::<bool>()).prop_map(|(m, s, t)| DelaySpec::Normal {
            mean: ColorExpr::Number(f64::from(m)),
            sd: ColorExpr::Number(f64::from(s) / 3.0),
            truncate_at_zero: t,
        }),
    ]
}

fn arb_color() -> impl Strategy<Value = TokenColor> {
    prop::collection::btree_map(
        "[a-z][a-z0-9_]{0,6}",
        prop_oneof![
            any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(qpn_core::model::ColorValue::Number),
            "[ -~]{0,8}".prop_map(|s| qpn_core::model::ColorValue::Symbol(s.into())),
        ],
        0..4,
    )
    .prop_map(TokenColor::from_fields)
}

#[derive(Debug, Clone)]
struct VnfShape {
    grouped: usize,
    ungrouped: usize,
    random: Option<Vec<(u32, Option<String>)>>,
    all: usize,
    delay: DelaySpec,
    mult: u32,
}

fn arb_vnf_shape() -> impl Strategy<Value = VnfShape> {
    (
        0usize..3,
        0usize..3,
        prop::option::of(prop::collection::vec((1u32..100, prop::option::of("[a-z]{1,4}")), 1..4)),
        1usize..3,
        arb_delay(),
        1u32..3,
    )
        .prop_filter("at least one input", |s| s.0 + s.1 > 0)
        .prop_map(|(grouped, ungrouped, random, all, delay, mult)| VnfShape {
            grouped,
            ungrouped,
            random,
            all,
            delay,
            mult,
        })
}

/// A chain of VNFs, each forwarding to the next one (or the sink).
fn build(shapes: &[VnfShape], emit: TokenColor, inter: DelaySpec) -> ServiceSpec {
    let n = shapes.len();
    let first_input = |i: usize| -> String {
        if i == n {
            "sink".into()
        } else {
            format!("v{i}.i0")
        }
    };
    let vnfs = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let inputs = (0..s.grouped + s.ungrouped)
                .map(|k| InputDecl {
                    name: format!("i{k}"),
                    sync_group: (k < s.grouped).then(|| "g".to_string()),
                })
                .collect();
            let next = first_input(i + 1);
            let outputs = match &s.random {
                Some(ws) => OutputPolicy::Random(
                    ws.iter()
                        .map(|(w, g)| WeightedBranch {
                            weight: f64::from(*w) / 10.0,
                            guard: g.as_ref().map(|eq| BranchGuard {
                                field: "kind".into(),
                                equals: eq.clone(),
                            }),
                            branch: Branch {
                                to: next.clone(),
                                multiplicity: s.mult,
                                color: None,
                            },
                        })
                        .collect(),
                ),
                None => OutputPolicy::All(
                    (0..s.all)
                        .map(|k| Branch {
                            to: next.clone(),
                            multiplicity: s.mult,
                            color: (k == 1).then(|| ColorExpr::parse("{kind: 'copy', n: 1 + 2}").unwrap()),
                        })
                        .collect(),
                ),
            };
            VnfDecl {
                id: format!("v{i}"),
                inputs,
                processing: s.delay.clone(),
                outputs,
            }
        })
        .collect();
    ServiceSpec {
        name: "generated".into(),
        sources: vec![SourceDecl {
            id: "src".into(),
            inter_arrival: inter,
            emit,
            target: first_input(0),
        }],
        vnfs,
        sinks: vec![SinkDecl { id: "sink".into() }],
    }
}

fn arb_service() -> impl Strategy<Value = ServiceSpec> {
    (prop::collection::vec(arb_vnf_shape(), 1..4), arb_color(), arb_delay())
        .prop_map(|(shapes, emit, inter)| build(&shapes, emit, inter))
}

proptest! {
    #[test]
    fn service_round_trip(spec in arb_service()) {
        let doc = SpecDocument::Service(spec);
        let text = serialize_spec(&doc);
        let parsed = parse_spec(&text).unwrap();
        prop_assert_eq!(&parsed, &doc);
        prop_assert_eq!(serialize_spec(&parsed), text);
        prop_assert_eq!(spec_to_value(&parsed), spec_to_value(&doc));
    }

    #[test]
    fn expansion_arithmetic(shape in arb_vnf_shape()) {
        let spec = build(std::slice::from_ref(&shape), TokenColor::new(), DelaySpec::exponential(1.0));
        let e = expand_service_with_topology(&spec).unwrap();
        let owned: Vec<_> = e.topology.nodes_owned_by("v0").collect();
        let places = owned.iter().filter(|n| e.net.place(n.as_str()).is_some()).count();
        let transitions = owned.iter().filter(|n| e.net.transition(n.as_str()).is_some()).count();
        let g = shape.grouped;
        let u = usize::from(shape.ungrouped > 0);
        match &shape.random {
            Some(ws) => {
                prop_assert_eq!(places, g + u + 1);
                prop_assert_eq!(transitions, 1 + ws.len());
            }
            None => {
                prop_assert_eq!(places, g + u);
                prop_assert_eq!(transitions, 1);
            }
        }
        prop_assert!(validate_net(&e.net).is_empty());
    }

    #[test]
    fn expanded_nets_validate_and_round_trip(spec in arb_service()) {
        let net = expand_service(&spec).unwrap();
        prop_assert!(validate_net(&net).is_empty());
        let doc = SpecDocument::Net(net.clone());
        let SpecDocument::Net(again) = parse_spec(&serialize_spec(&doc)).unwrap() else { panic!() };
        prop_assert_eq!(&again, &net);
        prop_assert_eq!(validate_net(&again), validate_net(&net));
    }
}
