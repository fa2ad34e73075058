//! The event-driven run: cameras, links, the shared cloud uplink and one
//! FIFO detector per compute node.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thoth_core::query::Query;
use thoth_swarm::workload::rsu_id;

use crate::config::{FramePolicy, ScenarioConfig};
use crate::des::{EventKind, EventQueue};
use crate::metrics::{DelaySample, Metrics};
use crate::topology::{deploy, Deployment};
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frame {
    id: u64,
    camera: usize,
    generated_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Content {
    Video,
    Result,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Msg {
    frame: Frame,
    content: Content,
}

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    Camera(usize),
    Msg(Msg),
    Version(u64),
    Tick(u64),
    Nothing,
}

#[derive(Debug, Default)]
struct Server {
    service_ms: f64,
    queue: VecDeque<Frame>,
    current: Option<(Frame, f64)>,
    starting: bool,
    busy_ms: f64,
    served: u64,
}

#[derive(Debug)]
struct Transfer {
    sender: String,
    msg: Msg,
    remaining: f64,
}

#[derive(Debug, Default)]
struct Sender {
    busy: bool,
    waiting: VecDeque<Msg>,
}

/// Fair-shared link into the root: `k` concurrent transfers each get
/// `1/k` of the bandwidth. A sender has one transfer at a time.
#[derive(Debug, Default)]
struct Uplink {
    kbit_per_ms: f64,
    active: Vec<Transfer>,
    senders: BTreeMap<String, Sender>,
    last: f64,
    version: u64,
}

impl Uplink {
    fn advance(&mut self, now: f64) {
        if !self.active.is_empty() {
            let each = (now - self.last) * self.kbit_per_ms / self.active.len() as f64;
            for t in &mut self.active {
                t.remaining -= each;
            }
        }
        self.last = now;
    }

    /// Next completion time, if anything is in flight.
    fn next_completion(&self, now: f64) -> Option<f64> {
        let k = self.active.len() as f64;
        self.active
            .iter()
            .map(|t| t.remaining.max(0.0))
            .min_by(f64::total_cmp)
            .map(|r| now + r * k / self.kbit_per_ms)
    }
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    dep: &'a Deployment,
    q: EventQueue<Payload>,
    servers: BTreeMap<String, Server>,
    uplink: Option<Uplink>,
    next_frame: u64,
    generated: u64,
    dropped: u64,
    samples: Vec<DelaySample>,
    ticks: u64,
    first_tick: BTreeMap<String, f64>,
    rsu_of: Vec<String>,
    path_latency: Vec<f64>,
}

impl<'a> Sim<'a> {
    fn size_of(&self, m: &Msg) -> f64 {
        match m.content {
            Content::Video => self.cfg.frame_size_kbit,
            Content::Result => self.cfg.result_size_kbit,
        }
    }

    fn link_ms(&self, node: &str) -> f64 {
        self.dep.state.member(node).map_or(0.0, |m| m.link_ms)
    }

    /// Puts `item` at the tail of `queue`, evicting a waiting item from the
    /// same camera under drop-oldest.
    fn enqueue<T>(policy: FramePolicy, queue: &mut VecDeque<T>, item: T, camera: impl Fn(&T) -> usize) -> bool {
        let mut dropped = false;
        if policy == FramePolicy::DropOldest {
            let c = camera(&item);
            if let Some(i) = queue.iter().position(|x| camera(x) == c) {
                queue.remove(i);
                dropped = true;
            }
        }
        queue.push_back(item);
        dropped
    }

    fn send_up(&mut self, from: &str, msg: Msg) {
        let Some(parent) = self.dep.state.parent(from).map(String::from) else {
            return;
        };
        let now = self.q.now();
        if parent == self.dep.root() && self.uplink.is_some() && self.size_of(&msg) > 0.0 {
            self.offer(from, msg);
        } else {
            let at = now + self.link_ms(from);
            self.q.push(at, EventKind::MessageDelivery, parent, Payload::Msg(msg));
        }
    }

    fn offer(&mut self, sender: &str, msg: Msg) {
        let now = self.q.now();
        let size = self.size_of(&msg);
        let policy = self.cfg.frame_policy;
        let up = self.uplink.as_mut().expect("uplink");
        up.advance(now);
        let s = up.senders.entry(sender.to_string()).or_default();
        if s.busy {
            if Self::enqueue(policy, &mut s.waiting, msg, |m| m.frame.camera) {
                self.dropped += 1;
            }
            return;
        }
        s.busy = true;
        up.active.push(Transfer {
            sender: sender.to_string(),
            msg,
            remaining: size,
        });
        self.reschedule_uplink();
    }

    fn reschedule_uplink(&mut self) {
        let now = self.q.now();
        let root = self.dep.root().to_string();
        let up = self.uplink.as_mut().expect("uplink");
        up.version += 1;
        if let Some(at) = up.next_completion(now) {
            let v = up.version;
            self.q.push(at, EventKind::TransferEnd, root, Payload::Version(v));
        }
    }

    fn transfer_end(&mut self, version: u64) {
        let now = self.q.now();
        let up = self.uplink.as_mut().expect("uplink");
        if version != up.version {
            return;
        }
        up.advance(now);
        let min = up
            .active
            .iter()
            .map(|t| t.remaining)
            .fold(f64::INFINITY, f64::min);
        let (done, rest): (Vec<Transfer>, Vec<Transfer>) = std::mem::take(&mut up.active)
            .into_iter()
            .partition(|t| t.remaining <= min.max(0.0) + 1e-9);
        up.active = rest;
        let mut finished = Vec::new();
        for t in done {
            let s = up.senders.get_mut(&t.sender).expect("sender");
            s.busy = false;
            finished.push((t.sender, t.msg));
        }
        for (sender, msg) in finished {
            let at = now + self.link_ms(&sender);
            let root = self.dep.root().to_string();
            self.q.push(at, EventKind::MessageDelivery, root, Payload::Msg(msg));
            let next = self
                .uplink
                .as_mut()
                .and_then(|u| u.senders.get_mut(&sender))
                .and_then(|s| s.waiting.pop_front());
            if let Some(m) = next {
                let size = self.size_of(&m);
                let up = self.uplink.as_mut().expect("uplink");
                up.senders.get_mut(&sender).expect("sender").busy = true;
                up.active.push(Transfer {
                    sender,
                    msg: m,
                    remaining: size,
                });
            }
        }
        self.reschedule_uplink();
    }

    fn complete(&mut self, frame: Frame) {
        let done = self.q.now() + self.cfg.merge_epsilon_ms;
        let c = frame.camera;
        self.samples.push(DelaySample {
            camera: c,
            frame: frame.id,
            generated_at: frame.generated_at,
            delay_ms: done - frame.generated_at,
            path_latency_ms: self.path_latency[c],
        });
    }

    fn arrive(&mut self, node: &str, msg: Msg) {
        let cam = msg.frame.camera;
        if msg.content == Content::Video && self.dep.placement[cam] == node {
            let policy = self.cfg.frame_policy;
            let srv = self.servers.get_mut(node).expect("compute node");
            if Self::enqueue(policy, &mut srv.queue, msg.frame, |f| f.camera) {
                self.dropped += 1;
            }
            self.kick(node);
        } else if node == self.dep.root() {
            self.complete(msg.frame);
        } else {
            self.send_up(node, msg);
        }
    }

    fn kick(&mut self, node: &str) {
        let now = self.q.now();
        let srv = self.servers.get_mut(node).expect("compute node");
        if srv.current.is_none() && !srv.starting && !srv.queue.is_empty() {
            srv.starting = true;
            self.q.push(now, EventKind::ServiceStart, node, Payload::Nothing);
        }
    }

    fn service_start(&mut self, node: &str) {
        let now = self.q.now();
        let srv = self.servers.get_mut(node).expect("compute node");
        srv.starting = false;
        if let Some(f) = srv.queue.pop_front() {
            srv.current = Some((f, now));
            let at = now + srv.service_ms;
            self.q.push(at, EventKind::ServiceEnd, node, Payload::Nothing);
        }
    }

    fn service_end(&mut self, node: &str) {
        let srv = self.servers.get_mut(node).expect("compute node");
        let (frame, _) = srv.current.take().expect("in service");
        srv.busy_ms += srv.service_ms;
        srv.served += 1;
        if node == self.dep.root() {
            self.complete(frame);
        } else {
            self.send_up(
                node,
                Msg {
                    frame,
                    content: Content::Result,
                },
            );
        }
        self.kick(node);
    }

    fn timing_tick(&mut self, node: &str, tick: u64) {
        let now = self.q.now();
        self.ticks += 1;
        if tick == 0 {
            self.first_tick.insert(node.to_string(), now);
        }
        for child in self.dep.state.children(node) {
            let at = now + self.link_ms(&child);
            self.q.push(at, EventKind::TimingTick, child, Payload::Tick(tick));
        }
    }

    fn frame_arrival(&mut self, camera: usize) {
        let now = self.q.now();
        let frame = Frame {
            id: self.next_frame,
            camera,
            generated_at: now,
        };
        self.next_frame += 1;
        self.generated += 1;
        let next = now + 1000.0 / self.cfg.fps_per_camera;
        if next < self.cfg.sim_duration as f64 {
            let rsu = self.rsu_of[camera].clone();
            self.q.push(next, EventKind::FrameArrival, rsu, Payload::Camera(camera));
        }
        let rsu = self.rsu_of[camera].clone();
        self.arrive(
            &rsu,
            Msg {
                frame,
                content: Content::Video,
            },
        );
    }
}

/// Simulates `config` with detection placed by federating `query` over the
/// scenario's swarm.
pub fn run_simulation(config: &ScenarioConfig, query: &Query) -> Result<Metrics, SimError> {
    let dep = deploy(config, query)?;
    Ok(simulate(config, &dep))
}

/// Runs a prepared deployment.
pub fn simulate(cfg: &ScenarioConfig, dep: &Deployment) -> Metrics {
    let n = cfg.num_cameras;
    let duration = cfg.sim_duration as f64;
    let servers = dep
        .service_ms
        .iter()
        .map(|(id, &s)| {
            (
                id.clone(),
                Server {
                    service_ms: s,
                    ..Server::default()
                },
            )
        })
        .collect();
    let uplink = cfg.cloud_uplink_mbps.is_finite().then(|| Uplink {
        kbit_per_ms: cfg.cloud_uplink_mbps,
        ..Uplink::default()
    });
    let mut sim = Sim {
        cfg,
        dep,
        q: EventQueue::new(),
        servers,
        uplink,
        next_frame: 0,
        generated: 0,
        dropped: 0,
        samples: Vec::new(),
        ticks: 0,
        first_tick: BTreeMap::new(),
        rsu_of: (0..n).map(rsu_id).collect(),
        path_latency: (0..n).map(|c| dep.path_latency(c)).collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let period = 1000.0 / cfg.fps_per_camera;
    for c in 0..n {
        let phase: f64 = rng.gen_range(0.0..period);
        if phase < duration {
            let rsu = sim.rsu_of[c].clone();
            sim.q.push(phase, EventKind::FrameArrival, rsu, Payload::Camera(c));
        }
    }
    let mut t = 0;
    while (t as f64) < duration {
        sim.q.push(t as f64, EventKind::TimingTick, dep.root(), Payload::Tick(t / cfg.tick_ms));
        t += cfg.tick_ms;
    }

    let mut events = 0u64;
    while sim.q.peek_time().is_some_and(|t| t < duration) {
        let e = sim.q.pop().expect("peeked");
        events += 1;
        match (e.kind, e.payload) {
            (EventKind::FrameArrival, Payload::Camera(c)) => sim.frame_arrival(c),
            (EventKind::MessageDelivery, Payload::Msg(m)) => sim.arrive(&e.node, m),
            (EventKind::ServiceStart, _) => sim.service_start(&e.node),
            (EventKind::ServiceEnd, _) => sim.service_end(&e.node),
            (EventKind::TransferEnd, Payload::Version(v)) => sim.transfer_end(v),
            (EventKind::TimingTick, Payload::Tick(k)) => sim.timing_tick(&e.node, k),
            (k, p) => unreachable!("{k:?} with {p:?}"),
        }
    }

    let utilization = sim
        .servers
        .iter()
        .map(|(id, s)| {
            let partial = s.current.map_or(0.0, |(_, start)| duration - start);
            (id.clone(), ((s.busy_ms + partial) / duration).min(1.0))
        })
        .collect();
    let served = sim.servers.iter().map(|(id, s)| (id.clone(), s.served)).collect();
    let delivered = sim.samples.len() as u64;
    Metrics {
        topology: cfg.topology,
        num_cameras: n,
        generated: sim.generated,
        delivered,
        dropped: sim.dropped,
        in_flight: sim.generated - delivered - sim.dropped,
        samples: sim.samples,
        utilization,
        served,
        timing_ticks: sim.ticks,
        first_tick_ms: sim.first_tick,
        events,
    }
}
