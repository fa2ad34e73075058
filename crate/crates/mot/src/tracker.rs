//! Tracking-by-detection driven by a rule program: the tracker predicts,
//! publishes symbols, lets the reasoner pick associations, then applies them.

use std::collections::{BTreeMap, VecDeque};

use log::debug;
use thoth_core::geometry::format_descriptor;
use thoth_core::query::Rule;
use thoth_core::rdf::vocab::{sosa, ssr};
use thoth_core::rdf::{Iri, KnowledgeGraph, SemanticStream, Term, TimedTriple, Triple};
use thoth_core::reason::{mot_constraints, Engine, StreamSet};

use crate::io::{Assignment, DetectionRecord};
use crate::kalman::{kf_predict, kf_update, KalmanConfig, KalmanState};
use crate::symbolic::{box_iri, by_frame, detection_triples, frame_triples, object_iri, prediction_triples, ssr_stream};
use crate::MotError;

#[derive(Debug, Clone)]
pub struct TrackerConfig {
    /// Minimum score for an unmatched detection to start a tracklet.
    pub spawn_score: f64,
    /// Missed frames after which a tracklet is retired.
    pub max_age: u64,
    pub gallery_capacity: usize,
    /// Milliseconds per frame; sets how windows map to frames.
    pub tick_ms: u64,
    pub kalman: KalmanConfig,
    pub camera: Iri,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            spawn_score: 0.5,
            max_age: 5,
            gallery_capacity: 100,
            tick_ms: 100,
            kalman: KalmanConfig::default(),
            camera: Iri::new(format!("{}cam1", thoth_core::rdf::vocab::BASE)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tracklet {
    pub id: u64,
    pub object: Term,
    pub state: KalmanState,
    pub gallery: VecDeque<Vec<f64>>,
    pub last_update: u64,
}

impl Tracklet {
    fn remember(&mut self, d: &[f64], capacity: usize) {
        if capacity == 0 {
            return;
        }
        while self.gallery.len() >= capacity {
            self.gallery.pop_front();
        }
        self.gallery.push_back(d.to_vec());
    }
}

pub struct Tracker {
    cfg: TrackerConfig,
    engine: Engine,
    streams: StreamSet,
    graph: KnowledgeGraph,
    tracks: BTreeMap<u64, Tracklet>,
    next_track: u64,
    next_object: u64,
}

impl Tracker {
    pub fn new(program: Vec<Rule>, cfg: TrackerConfig) -> Self {
        let engine = Engine::new(program)
            .with_constraints(mot_constraints())
            .with_tick_ms(cfg.tick_ms);
        let mut streams = StreamSet::new();
        streams.insert(ssr_stream(), SemanticStream::new(ssr_stream()));
        Tracker {
            cfg,
            engine,
            streams,
            graph: KnowledgeGraph::new(),
            tracks: BTreeMap::new(),
            next_track: 1,
            next_object: 1,
        }
    }

    pub fn tracklets(&self) -> impl Iterator<Item = &Tracklet> {
        self.tracks.values()
    }

    /// Everything published so far: detections, predictions, feedback.
    pub fn stream(&self) -> &SemanticStream {
        &self.streams[&ssr_stream()]
    }

    fn publish(&mut self, frame: u64, triples: Vec<Triple>) {
        let s = self.streams.get_mut(&ssr_stream()).expect("stream exists");
        s.extend(triples.into_iter().map(|t| TimedTriple::new(t, frame)))
            .expect("frames advance and triples are ground");
    }

    fn spawn(&mut self, object: Term, r: &DetectionRecord, frame: u64) -> u64 {
        let id = self.next_track;
        self.next_track += 1;
        let mut t = Tracklet {
            id,
            object,
            state: KalmanState::from_box(&r.bbox, &self.cfg.kalman),
            gallery: VecDeque::new(),
            last_update: frame,
        };
        if let Some(d) = &r.descriptor {
            t.remember(d, self.cfg.gallery_capacity);
        }
        self.tracks.insert(id, t);
        id
    }

    /// One frame: predict, publish, reason, apply. Returns the frame's
    /// assignments by box index.
    pub fn step(&mut self, frame: u64, records: &[DetectionRecord]) -> Result<Vec<Assignment>, MotError> {
        if let Some(last) = self.stream().last_timestamp() {
            if frame <= last {
                return Err(MotError::Unsorted { frame });
            }
        }
        let mut out = frame_triples(frame, &self.cfg.camera);
        for (i, r) in records.iter().enumerate() {
            out.extend(detection_triples(frame, i, r));
        }
        for t in self.tracks.values_mut() {
            t.state = kf_predict(&t.state, 1, &self.cfg.kalman);
            if let Some(b) = t.state.to_box() {
                out.extend(prediction_triples(frame, t.id, &t.object, &b));
            }
        }
        self.publish(frame, out);

        let tick = self.engine.evaluate_tick(&self.streams, &self.graph, frame)?;
        let boxes: BTreeMap<Term, usize> = (0..records.len()).map(|i| (box_iri(frame, i), i)).collect();
        let sample_of = sosa("isSampleOf");
        let mut matched: BTreeMap<usize, Term> = BTreeMap::new();
        for e in &tick.emitted {
            if e.triple.predicate != sample_of {
                continue;
            }
            if let Some(&i) = boxes.get(&e.triple.subject) {
                matched.insert(i, e.triple.object.clone());
            }
        }

        let mut feedback = Vec::new();
        let mut result = Vec::new();
        for (i, r) in records.iter().enumerate() {
            let object = match matched.get(&i) {
                Some(o) => {
                    let live = self.tracks.values().find(|t| &t.object == o).map(|t| t.id);
                    let id = match live {
                        Some(id) => id,
                        None => {
                            debug!("frame {frame}: reviving {o}");
                            self.spawn(o.clone(), r, frame)
                        }
                    };
                    let cfg = &self.cfg;
                    let t = self.tracks.get_mut(&id).expect("tracklet exists");
                    t.state = kf_update(&t.state, &r.bbox, &cfg.kalman)?;
                    t.last_update = frame;
                    if let Some(d) = &r.descriptor {
                        t.remember(d, cfg.gallery_capacity);
                    }
                    Some(o.clone())
                }
                None if r.score >= self.cfg.spawn_score => {
                    let o = object_iri(self.next_object);
                    self.next_object += 1;
                    self.spawn(o.clone(), r, frame);
                    Some(o)
                }
                None => None,
            };
            if let Some(o) = object {
                feedback.push(Triple::new(box_iri(frame, i), sample_of.clone(), o.clone()));
                if let Some(d) = &r.descriptor {
                    feedback.push(Triple::new(o.clone(), ssr("appearance"), Term::string(format_descriptor(d))));
                }
                let Term::Iri(iri) = o else { unreachable!("objects are IRIs") };
                result.push(Assignment {
                    frame,
                    box_index: i,
                    object: iri,
                });
            }
        }
        self.publish(frame, feedback);
        let max_age = self.cfg.max_age;
        self.tracks.retain(|_, t| frame - t.last_update <= max_age);
        Ok(result)
    }
}

/// Runs the tracker over every frame from the first to the last in the log,
/// including frames without detections.
pub fn run_tracker(
    records: &[DetectionRecord],
    program: Vec<Rule>,
    cfg: TrackerConfig,
) -> Result<Vec<Assignment>, MotError> {
    crate::io::validate_records(records)?;
    let frames = by_frame(records)?;
    let (Some(first), Some(last)) = (frames.first(), frames.last()) else {
        return Ok(Vec::new());
    };
    let (first, last) = (first.0, last.0);
    let mut by: BTreeMap<u64, &[DetectionRecord]> = frames.into_iter().collect();
    let mut tracker = Tracker::new(program, cfg);
    let mut out = Vec::new();
    for f in first..=last {
        let recs = by.remove(&f).unwrap_or(&[]);
        out.extend(tracker.step(f, recs)?);
    }
    Ok(out)
}
