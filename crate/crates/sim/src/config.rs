//! Scenario configuration, read from `key = value` text files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Topology {
    /// RSUs stream straight to the cloud.
    DC,
    /// RSUs attach to edges, edges to the cloud.
    DEC,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::DC => "DC",
            Topology::DEC => "DEC",
        })
    }
}

impl FromStr for Topology {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.to_ascii_uppercase().as_str() {
            "DC" => Ok(Topology::DC),
            "DEC" => Ok(Topology::DEC),
            _ => Err(SimError::Config(format!("unknown topology '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramePolicy {
    /// A newer frame from the same camera evicts its waiting predecessor.
    DropOldest,
    /// Unbounded FIFO.
    Queue,
}

impl fmt::Display for FramePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FramePolicy::DropOldest => "drop-oldest",
            FramePolicy::Queue => "queue",
        })
    }
}

impl FromStr for FramePolicy {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "drop-oldest" => Ok(FramePolicy::DropOldest),
            "queue" => Ok(FramePolicy::Queue),
            _ => Err(SimError::Config(format!("unknown frame policy '{s}'"))),
        }
    }
}

/// Times are virtual milliseconds, rates per second, sizes in kbit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub topology: Topology,
    pub num_cameras: usize,
    pub fps_per_camera: f64,
    pub cloud_fps: f64,
    pub edge_fps: f64,
    pub num_edges: usize,
    pub link_latency_rsu_edge: f64,
    pub link_latency_edge_cloud: f64,
    pub link_latency_rsu_cloud: f64,
    pub frame_policy: FramePolicy,
    pub sim_duration: u64,
    pub seed: u64,
    /// Encoded video frame.
    pub frame_size_kbit: f64,
    /// Detection result sent from an edge.
    pub result_size_kbit: f64,
    /// Shared ingress bandwidth of the cloud, split fairly among concurrent
    /// transfers. `inf` disables the bandwidth model.
    pub cloud_uplink_mbps: f64,
    /// Cost of folding one result into the root's answer.
    pub merge_epsilon_ms: f64,
    pub tick_ms: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            topology: Topology::DEC,
            num_cameras: 40,
            fps_per_camera: 10.0,
            cloud_fps: 175.0,
            edge_fps: 17.5,
            num_edges: 8,
            link_latency_rsu_edge: 2.0,
            link_latency_edge_cloud: 20.0,
            link_latency_rsu_cloud: 22.0,
            frame_policy: FramePolicy::DropOldest,
            sim_duration: 60_000,
            seed: 7,
            frame_size_kbit: 400.0,
            result_size_kbit: 4.0,
            cloud_uplink_mbps: 40.0,
            merge_epsilon_ms: 0.1,
            tick_ms: 1_000,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, SimError> {
    v.parse()
        .map_err(|_| SimError::Config(format!("{key}: cannot parse '{v}'")))
}

impl ScenarioConfig {
    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut c = ScenarioConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SimError::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads a file; `THOTH_SEED` in the environment overrides the seed.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        let mut c = Self::parse(&text)?;
        if let Ok(s) = std::env::var("THOTH_SEED") {
            c.seed = num("THOTH_SEED", &s)?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), SimError> {
        match key {
            "topology" => self.topology = v.parse()?,
            "num_cameras" => self.num_cameras = num(key, v)?,
            "fps_per_camera" => self.fps_per_camera = num(key, v)?,
            "cloud_fps" => self.cloud_fps = num(key, v)?,
            "edge_fps" => self.edge_fps = num(key, v)?,
            "num_edges" => self.num_edges = num(key, v)?,
            "link_latency_rsu_edge" => self.link_latency_rsu_edge = num(key, v)?,
            "link_latency_edge_cloud" => self.link_latency_edge_cloud = num(key, v)?,
            "link_latency_rsu_cloud" => self.link_latency_rsu_cloud = num(key, v)?,
            "frame_policy" => self.frame_policy = v.parse()?,
            "sim_duration" => self.sim_duration = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "frame_size_kbit" => self.frame_size_kbit = num(key, v)?,
            "result_size_kbit" => self.result_size_kbit = num(key, v)?,
            "cloud_uplink_mbps" => self.cloud_uplink_mbps = num(key, v)?,
            "merge_epsilon_ms" => self.merge_epsilon_ms = num(key, v)?,
            "tick_ms" => self.tick_ms = num(key, v)?,
            _ => return Err(SimError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.into()));
        if self.num_cameras == 0 {
            return bad("num_cameras must be at least 1");
        }
        if self.topology == Topology::DEC && self.num_edges == 0 {
            return bad("DEC needs at least one edge");
        }
        for (k, r) in [
            ("fps_per_camera", self.fps_per_camera),
            ("cloud_fps", self.cloud_fps),
            ("edge_fps", self.edge_fps),
            ("cloud_uplink_mbps", self.cloud_uplink_mbps),
        ] {
            if r.is_nan() || r <= 0.0 {
                return bad(&format!("{k} must be > 0"));
            }
        }
        if !self.fps_per_camera.is_finite() {
            return bad("fps_per_camera must be finite");
        }
        for (k, x) in [
            ("link_latency_rsu_edge", self.link_latency_rsu_edge),
            ("link_latency_edge_cloud", self.link_latency_edge_cloud),
            ("link_latency_rsu_cloud", self.link_latency_rsu_cloud),
            ("frame_size_kbit", self.frame_size_kbit),
            ("result_size_kbit", self.result_size_kbit),
            ("merge_epsilon_ms", self.merge_epsilon_ms),
        ] {
            if !x.is_finite() || x < 0.0 {
                return bad(&format!("{k} must be finite and >= 0"));
            }
        }
        if self.sim_duration == 0 || self.tick_ms == 0 {
            return bad("sim_duration and tick_ms must be > 0");
        }
        Ok(())
    }

    /// The same scenario with another camera count and topology.
    pub fn with(&self, topology: Topology, num_cameras: usize) -> Self {
        ScenarioConfig {
            topology,
            num_cameras,
            ..self.clone()
        }
    }

    /// `key = value` text that parses back to `self`.
    pub fn to_text(&self) -> String {
        format!(
            "topology = {}\nnum_cameras = {}\nfps_per_camera = {}\ncloud_fps = {}\nedge_fps = {}\n\
             num_edges = {}\nlink_latency_rsu_edge = {}\nlink_latency_edge_cloud = {}\n\
             link_latency_rsu_cloud = {}\nframe_policy = {}\nsim_duration = {}\nseed = {}\n\
             frame_size_kbit = {}\nresult_size_kbit = {}\ncloud_uplink_mbps = {}\n\
             merge_epsilon_ms = {}\ntick_ms = {}\n",
            self.topology,
            self.num_cameras,
            self.fps_per_camera,
            self.cloud_fps,
            self.edge_fps,
            self.num_edges,
            self.link_latency_rsu_edge,
            self.link_latency_edge_cloud,
            self.link_latency_rsu_cloud,
            self.frame_policy,
            self.sim_duration,
            self.seed,
            self.frame_size_kbit,
            self.result_size_kbit,
            self.cloud_uplink_mbps,
            self.merge_epsilon_ms,
            self.tick_ms,
        )
    }
}
