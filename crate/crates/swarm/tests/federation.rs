use std::collections::BTreeMap;

use proptest::prelude::*;
use thoth_core::query::{parse_query, Query};
use thoth_core::rdf::{Iri, Term};
use thoth_swarm::exec::TraceEvent;
use thoth_swarm::workload::{dc_swarm, dec_swarm, edge, random_traffic, rsu, CLOUD_ID};
use thoth_swarm::*;

const LISTING3: &str = include_str!("../../../corpus/data/listing3.json");

fn listing4() -> Query {
    parse_query(LISTING4).unwrap()
}

fn cam(s: &str) -> Option<Term> {
    Some(Term::iri(format!("http://example.org/thoth#{s}")))
}

#[test]
fn listing3_subscription_extends_the_catalog() {
    let mut s = dec_swarm(1, 0);
    let before = s.len();
    let d = NodeDescriptor::from_json(LISTING3).unwrap();
    let ack = s.subscribe(d, &workload::edge_id(0)).unwrap();
    assert_eq!(s.len(), before + 1);
    assert_eq!(ack.id, "urn:uuid:9489991a-7622-45b6-8437-f859835d4");
    assert!(s.catalog().contains_key(&Iri::new("RTSP://helsinki.fi/camera/2")));
    assert_eq!(s.subtree_streams(CLOUD_ID), vec![Iri::new("RTSP://helsinki.fi/camera/2")]);
}

fn stream_patterns(q: &Query) -> Vec<thoth_core::query::Pattern> {
    q.static_patterns.clone()
}

#[test]
fn discovery_by_provenance() {
    let q = listing4();
    let s = dec_swarm(8, 40);
    assert_eq!(discover(&s, &stream_patterns(&q), "streamURI").len(), 40);

    let nothing = parse_query(
        "SELECT ?s WHERE { STREAM ?s { ?a ?b ?c . } ?s prov:wasGeneratedBy/a :Radar . }",
    )
    .unwrap();
    assert!(discover(&s, &stream_patterns(&nothing), "s").is_empty());

    let mut mixed = dc_swarm(0);
    for i in 0..10 {
        let class = if i % 2 == 0 { "TrafficCamera" } else { "WeatherStation" };
        mixed.subscribe(rsu(i, &format!("dev{i}"), class), CLOUD_ID).unwrap();
    }
    let found = discover(&mixed, &stream_patterns(&q), "streamURI");
    let want: Vec<Iri> = (0..10).step_by(2).map(workload::stream_uri).collect();
    let mut want = want;
    want.sort();
    assert_eq!(found, want);
}

#[test]
fn dec_plan_has_a_leaf_per_edge() {
    let plan = rewrite(&listing4(), &dec_swarm(8, 40)).unwrap();
    assert_eq!(plan.mode, PlanMode::Pushdown);
    assert_eq!(plan.leaves().count(), 8);
    assert_eq!(plan.fragments.len(), 9);
    assert_eq!(plan.root().placement, CLOUD_ID);
    for l in plan.leaves() {
        assert_eq!(l.streams.len(), 5);
        assert_eq!(l.parent.as_deref(), Some("f0"));
        let sub = l.subquery.as_ref().unwrap();
        assert!(sub.having.is_none() && sub.order_by.is_empty());
        assert_eq!(sub.group_by, vec!["camera"]);
    }
    assert!(plan.fallback.is_none());
}

#[test]
fn dc_plan_is_one_root_fragment() {
    let plan = rewrite(&listing4(), &dc_swarm(8)).unwrap();
    assert_eq!(plan.mode, PlanMode::Centralized);
    assert_eq!(plan.fragments.len(), 1);
    assert_eq!(plan.root().streams.len(), 8);
    assert!(plan.fallback.is_none());
}

#[test]
fn nested_edges_get_a_merge_fragment() {
    let mut s = dec_swarm(1, 0);
    s.subscribe(edge(1), &workload::edge_id(0)).unwrap();
    s.subscribe(edge(2), &workload::edge_id(0)).unwrap();
    for i in 0..4 {
        s.subscribe(rsu(i, &format!("cam{i}"), "TrafficCamera"), &workload::edge_id(1 + i % 2))
            .unwrap();
    }
    let plan = rewrite(&listing4(), &s).unwrap();
    let merges: Vec<_> = plan.fragments.iter().filter(|f| f.role == FragmentRole::Merge).collect();
    assert_eq!(merges.len(), 1);
    assert_eq!(merges[0].placement, workload::edge_id(0));
    assert_eq!(plan.children(&merges[0].id).len(), 2);
}

#[test]
fn rsu_without_processor_above_falls_back_to_root() {
    let mut s = SwarmState::new(NodeDescriptor::new("urn:passive", NodeKind::Cloud)).unwrap();
    let mut root = s.member("urn:passive").unwrap().descriptor.clone();
    root.capabilities.reasoner = false;
    s = SwarmState::new(root).unwrap();
    s.subscribe(rsu(0, "cam0", "TrafficCamera"), "urn:passive").unwrap();
    let plan = rewrite(&listing4(), &s).unwrap();
    assert_eq!(plan.fragments.len(), 1);
    assert!(plan.fallback.is_some());
}

#[test]
fn only_count_is_pushed() {
    let s = dec_swarm(2, 4);
    for agg in ["SUM(?n)", "COUNT(DISTINCT ?truck)", "MAX(?n)"] {
        let q = parse_query(&format!(
            "SELECT ?camera ({agg} AS ?x) WHERE {{ STREAM ?s {{ ?camera :n ?n . ?truck :at ?camera . }} ?s prov:wasGeneratedBy/a :TrafficCamera . }} GROUP BY ?camera"
        ))
        .unwrap();
        assert!(matches!(rewrite(&q, &s), Err(SwarmError::UnsupportedAggregate(_))), "{agg}");
    }
}

fn partial(id: &str, wm: u64, groups: &[(&str, u64)]) -> PartialResult {
    PartialResult {
        fragment_id: id.into(),
        watermark: wm,
        payload: PartialPayload::Counts {
            keys: 1,
            groups: groups.iter().map(|(k, c)| (vec![cam(k)], vec![*c])).collect(),
        },
    }
}

#[test]
fn merge_examples() {
    let plan = rewrite(&listing4(), &dec_swarm(2, 4)).unwrap();
    let r = merge_partials(&plan, &[partial("f1", 5, &[("camA", 2)]), partial("f2", 5, &[("camA", 1), ("camB", 1)])])
        .unwrap();
    assert_eq!(r.rows, vec![vec![cam("camA"), Some(Term::integer(3))]]);
    assert!(merge_partials(&plan, &[]).unwrap().rows.is_empty());
    let err = merge_partials(&plan, &[partial("f1", 5, &[]), partial("f2", 6, &[])]).unwrap_err();
    assert!(matches!(err, SwarmError::WatermarkMismatch { expected: 5, got: 6, .. }));
}

#[test]
fn merge_orders_with_key_tiebreak() {
    let plan = rewrite(&listing4(), &dec_swarm(2, 4)).unwrap();
    let r = merge_partials(
        &plan,
        &[
            partial("f1", 1, &[("camC", 2), ("camA", 4)]),
            partial("f2", 1, &[("camB", 2), ("camD", 1)]),
        ],
    )
    .unwrap();
    let cams: Vec<_> = r.rows.iter().map(|r| r[0].clone()).collect();
    assert_eq!(cams, vec![cam("camB"), cam("camC"), cam("camA")]);
}

fn assert_federation_matches(q: &Query, sc: &workload::TrafficScenario) -> (FragmentPlan, FederatedRun, thoth_core::reason::SelectResult) {
    let (plan, run, central) =
        check_against_centralized(q, &sc.state, &sc.streams, &sc.graph, sc.now, sc.tick_ms).unwrap();
    assert_eq!(run.result, central, "{}", plan.describe());
    (plan, run, central)
}

#[test]
fn listing4_federated_equals_centralized() {
    let q = listing4();
    let (mut nonempty, mut split) = (0, 0);
    for seed in 0..20u64 {
        let edges = 2 + (seed as usize % 7);
        let streams = 2 + (seed as usize * 13) % 39;
        let sc = random_traffic(seed, edges, streams);
        let (plan, _, central) = assert_federation_matches(&q, &sc);
        nonempty += usize::from(!central.rows.is_empty());
        // Cameras whose streams land in different leaves.
        let mut leaves_of: BTreeMap<String, std::collections::BTreeSet<&str>> = BTreeMap::new();
        for l in plan.leaves() {
            for s in &l.streams {
                for t in &sc.state.catalog()[s].provenance[..1] {
                    leaves_of.entry(t.object.to_string()).or_default().insert(&l.id);
                }
            }
        }
        split += usize::from(leaves_of.values().any(|v| v.len() > 1));
    }
    assert!(nonempty >= 10, "too few scenarios with answers: {nonempty}");
    assert!(split >= 5, "too few scenarios merging one camera across leaves: {split}");
}

#[test]
fn ungrouped_query_ships_rows() {
    let q = parse_query(
        "SELECT ?camera ?truck WHERE { STREAM ?s [RANGE 5m ON sosa:resultTime] { ?camera a ssr:Camera; sosa:madeObservation ?o. ?o sosa:hasResult ?f. ?truck a :Truck; ssr:detectedIn ?f. FILTER (?truck != :truck3) } ?s prov:wasGeneratedBy/a :TrafficCamera. } ORDER BY DESC(?truck)",
    )
    .unwrap();
    for seed in 0..6 {
        let sc = random_traffic(100 + seed, 3, 12);
        let (plan, _, central) = assert_federation_matches(&q, &sc);
        assert!(plan.partial.is_none());
        assert!(central.rows.iter().all(|r| r[1] != cam("truck3")));
    }
}

#[test]
fn several_counts_and_count_star() {
    let q = parse_query(
        "SELECT ?camera (COUNT(*) AS ?n) WHERE { STREAM ?s [RANGE 5m ON sosa:resultTime] { ?camera sosa:madeObservation ?o. ?o sosa:hasResult ?f. ?v ssr:detectedIn ?f. } ?s prov:wasGeneratedBy/a :TrafficCamera. } GROUP BY ?camera HAVING (COUNT(?v) >= 2) ORDER BY DESC(?n)",
    )
    .unwrap();
    for seed in 0..6 {
        let sc = random_traffic(200 + seed, 4, 20);
        let (plan, _, _) = assert_federation_matches(&q, &sc);
        assert_eq!(plan.partial.as_ref().unwrap().counts.len(), 2);
    }
}

#[test]
fn pushed_filters_only_use_leaf_variables() {
    let q = parse_query(
        "SELECT ?camera (COUNT(?truck) AS ?c) WHERE { STREAM ?s [RANGE 5m ON sosa:resultTime] { ?camera sosa:madeObservation ?o. ?o sosa:hasResult ?f. ?truck ssr:detectedIn ?f. FILTER (?truck != :truck1) } ?s prov:wasGeneratedBy/a :TrafficCamera. FILTER (?camera != :cam0) } GROUP BY ?camera",
    )
    .unwrap();
    let sc = random_traffic(7, 4, 16);
    let (plan, _, _) = assert_federation_matches(&q, &sc);
    for l in plan.leaves() {
        let sub = l.subquery.as_ref().unwrap();
        let bound = sub.bound_vars();
        let filters = sub.filters.iter().chain(sub.stream_blocks.iter().flat_map(|b| b.filters.iter()));
        for f in filters {
            for v in f.vars() {
                assert!(bound.iter().any(|b| b == v), "{v} not bound at leaf {}", l.id);
            }
        }
    }
}

#[test]
fn nodes_evaluate_only_after_their_tick() {
    let sc = random_traffic(3, 5, 25);
    let (_, run, _) = assert_federation_matches(&listing4(), &sc);
    let mut ticked: BTreeMap<&str, u64> = BTreeMap::new();
    let mut evals = 0;
    for e in &run.trace {
        match e {
            TraceEvent::Tick { node, tick } => {
                ticked.insert(node, *tick);
            }
            TraceEvent::Evaluate { node, tick, .. } => {
                evals += 1;
                assert_eq!(ticked.get(node.as_str()), Some(tick), "{node} evaluated before its tick");
            }
            TraceEvent::Merge { .. } => {}
        }
    }
    assert!(evals >= 1);
    assert_eq!(ticked.len(), sc.state.len());
}

#[test]
fn timing_schedule_matches_path_sums() {
    let mut s = dec_swarm(8, 40);
    for (i, (id, _)) in s.clone().members().enumerate() {
        if id != CLOUD_ID {
            s.set_link_latency(id, 1.0 + (i % 7) as f64).unwrap();
        }
    }
    let sched = propagate_timing(&s, 3);
    assert_eq!(sched.deliveries.len(), 49);
    for d in &sched.deliveries {
        let path = s.path_to_root(&d.node);
        let want: f64 = path[..path.len() - 1].iter().map(|n| s.member(n).unwrap().link_ms).sum();
        assert!((d.delay_ms - want).abs() < 1e-12);
        if let Some(p) = s.parent(&d.node) {
            assert!(d.delay_ms >= sched.delay_of(p).unwrap());
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Join(usize, usize),
    Leave(usize),
    Move(usize, usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..12usize, 0..13usize).prop_map(|(a, b)| Op::Join(a, b)),
        (0..13usize).prop_map(Op::Leave),
        (0..13usize, 0..13usize).prop_map(|(a, b)| Op::Move(a, b)),
    ]
}

fn name(i: usize) -> String {
    if i == 12 {
        CLOUD_ID.into()
    } else {
        format!("n{i}")
    }
}

proptest! {
    #[test]
    fn topology_stays_a_tree(ops in proptest::collection::vec(op(), 1..60)) {
        let mut s = dc_swarm(0);
        for o in ops {
            let before = s.clone();
            let r = match &o {
                Op::Join(a, b) => s.subscribe(NodeDescriptor::new(name(*a), NodeKind::Edge), &name(*b)).map(|_| ()),
                Op::Leave(a) => s.unsubscribe(&name(*a)),
                Op::Move(a, b) => s.move_node(&name(*a), &name(*b)),
            };
            if r.is_err() {
                prop_assert_eq!(&s, &before);
            }
            if let Err(e) = s.check_tree() {
                return Err(TestCaseError::fail(format!("{o:?}: {e}")));
            }
        }
    }

    #[test]
    fn federation_is_sound_on_random_swarms(seed in any::<u64>(), edges in 0usize..6, streams in 1usize..20) {
        let sc = random_traffic(seed, edges, streams);
        let (_, run, central) = check_against_centralized(&listing4(), &sc.state, &sc.streams, &sc.graph, sc.now, sc.tick_ms).unwrap();
        prop_assert_eq!(run.result, central);
    }
}
