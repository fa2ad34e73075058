//! Traffic-camera swarms and stream contents for exercising the federator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thoth_core::rdf::vocab::{base, rdf_type, sosa, ssr};
use thoth_core::rdf::{Iri, KnowledgeGraph, SemanticStream, Term, TimedTriple, Triple};
use thoth_core::reason::StreamSet;

use crate::descriptor::{NodeDescriptor, NodeKind, StreamDescriptor};
use crate::state::SwarmState;

pub const CLOUD_ID: &str = "urn:thoth:cloud";

pub fn edge_id(k: usize) -> String {
    format!("urn:thoth:edge:{k}")
}

pub fn rsu_id(i: usize) -> String {
    format!("urn:thoth:rsu:{i}")
}

pub fn stream_uri(i: usize) -> Iri {
    Iri::new(format!("RTSP://example.org/camera/{i}"))
}

fn prov(local: &str) -> Term {
    Term::iri(format!("http://www.w3.org/ns/prov#{local}"))
}

pub fn cloud() -> NodeDescriptor {
    let mut d = NodeDescriptor::new(CLOUD_ID, NodeKind::Cloud);
    d.title = "Cloud".into();
    d.capabilities.detector_fps = Some((100.0, 250.0));
    d
}

pub fn edge(k: usize) -> NodeDescriptor {
    let mut d = NodeDescriptor::new(edge_id(k), NodeKind::Edge);
    d.title = format!("Edge-{k}");
    d.capabilities.detector_fps = Some((10.0, 25.0));
    d
}

/// RSU `i` publishing one stream generated by `sensor` of class `class`
/// (both local names in the base namespace).
pub fn rsu(i: usize, sensor: &str, class: &str) -> NodeDescriptor {
    let uri = stream_uri(i);
    let mut d = NodeDescriptor::new(rsu_id(i), NodeKind::Rsu).with_stream(StreamDescriptor {
        name: "status".into(),
        uri: uri.clone(),
        description: format!("Stream of {sensor}"),
        content_type: "application/mp4".into(),
        method_name: "RTSP".into(),
        provenance: vec![
            Triple::new(Term::Iri(uri), prov("wasGeneratedBy"), base(sensor)),
            Triple::new(base(sensor), rdf_type(), base(class)),
        ],
    });
    d.title = format!("Camera{i}");
    d
}

/// Cloud only, every RSU directly under it.
pub fn dc_swarm(cameras: usize) -> SwarmState {
    let mut s = SwarmState::new(cloud()).expect("seed");
    for i in 0..cameras {
        s.subscribe(rsu(i, &format!("cam{i}"), "TrafficCamera"), CLOUD_ID)
            .expect("fresh ids");
    }
    s
}

/// Cloud, `edges` edges under it, RSU `i` under edge `i % edges`.
pub fn dec_swarm(edges: usize, cameras: usize) -> SwarmState {
    let mut s = SwarmState::new(cloud()).expect("seed");
    for k in 0..edges {
        s.subscribe(edge(k), CLOUD_ID).expect("fresh ids");
    }
    for i in 0..cameras {
        let parent = if edges == 0 { CLOUD_ID.to_string() } else { edge_id(i % edges) };
        s.subscribe(rsu(i, &format!("cam{i}"), "TrafficCamera"), &parent)
            .expect("fresh ids");
    }
    s
}

pub struct TrafficScenario {
    pub state: SwarmState,
    pub streams: StreamSet,
    pub graph: KnowledgeGraph,
    pub now: u64,
    pub tick_ms: u64,
}

/// A random swarm of `edges` edges (some nested under others) and
/// `streams` RSUs, with vehicles seen over the last 400 ticks. Some sensors
/// are weather stations, some cameras publish two streams.
pub fn random_traffic(seed: u64, edges: usize, streams: usize) -> TrafficScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SwarmState::new(cloud()).expect("seed");
    for k in 0..edges {
        let parent = if k > 0 && rng.gen_bool(0.3) {
            edge_id(rng.gen_range(0..k))
        } else {
            CLOUD_ID.to_string()
        };
        state.subscribe(edge(k), &parent).expect("fresh ids");
    }
    let now = 1_000;
    let mut set = StreamSet::new();
    let mut sensors: Vec<String> = Vec::new();
    for i in 0..streams {
        let (sensor, class) = if rng.gen_bool(0.15) {
            (format!("ws{i}"), "WeatherStation")
        } else if !sensors.is_empty() && rng.gen_bool(0.2) {
            (sensors[rng.gen_range(0..sensors.len())].clone(), "TrafficCamera")
        } else {
            (format!("cam{i}"), "TrafficCamera")
        };
        if class == "TrafficCamera" && !sensors.contains(&sensor) {
            sensors.push(sensor.clone());
        }
        let parent = if edges == 0 { CLOUD_ID.to_string() } else { edge_id(i % edges) };
        let d = rsu(i, &sensor, class);
        state.subscribe(d, &parent).expect("fresh ids");

        let uri = stream_uri(i);
        let mut s = SemanticStream::new(uri.clone());
        let mut elems = Vec::new();
        for j in 0..rng.gen_range(0..6) {
            let ts = now - rng.gen_range(0..400u64);
            let obs = base(&format!("obs{i}_{j}"));
            let frame = base(&format!("frame{i}_{j}"));
            let cam = base(&sensor);
            let mut add = |t: Triple| elems.push(TimedTriple::new(t, ts));
            add(Triple::new(cam.clone(), rdf_type(), ssr("Camera")));
            add(Triple::new(cam, sosa("madeObservation"), obs.clone()));
            add(Triple::new(obs, sosa("hasResult"), frame.clone()));
            for k in 0..rng.gen_range(0..4) {
                let (v, class) = if rng.gen_bool(0.6) {
                    (base(&format!("truck{}", rng.gen_range(0..12))), "Truck")
                } else {
                    (base(&format!("car{i}_{j}_{k}")), "Car")
                };
                add(Triple::new(v.clone(), rdf_type(), base(class)));
                add(Triple::new(v, ssr("detectedIn"), frame.clone()));
            }
        }
        elems.sort_by_key(|e| e.timestamp);
        s.extend(elems).expect("sorted, ground");
        set.insert(uri, s);
    }
    state.annotate(&mut set);
    TrafficScenario {
        state,
        streams: set,
        graph: KnowledgeGraph::new(),
        now,
        tick_ms: 1_000,
    }
}
