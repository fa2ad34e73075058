//! Seeded synthetic scenes with exact ground truth.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::BoundingBox;
use crate::io::DetectionRecord;
use crate::MotError;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: String,
    pub label: String,
    /// `(frame, x, y)` of the top-left corner, strictly increasing frames.
    /// The object exists from the first to the last waypoint; positions in
    /// between are linear.
    pub waypoints: Vec<(u64, f64, f64)>,
    pub size: (f64, f64),
    /// Inclusive frame ranges with no detection.
    pub occlusions: Vec<(u64, u64)>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    /// Standard deviation of the box position noise, in pixels.
    pub noise_px: f64,
    /// Descriptor length; 0 disables descriptors.
    pub descriptor_dim: usize,
    pub descriptor_noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frame: u64,
    pub box_index: usize,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub detections: Vec<DetectionRecord>,
    pub truth: Vec<GroundTruth>,
}

fn position(o: &ObjectSpec, f: u64) -> Option<(f64, f64)> {
    let w = &o.waypoints;
    if f < w.first()?.0 || f > w.last()?.0 {
        return None;
    }
    let k = w.partition_point(|p| p.0 <= f);
    let (f0, x0, y0) = w[k - 1];
    if f0 == f || k == w.len() {
        return Some((x0, y0));
    }
    let (f1, x1, y1) = w[k];
    let a = (f - f0) as f64 / (f1 - f0) as f64;
    Some((x0 + a * (x1 - x0), y0 + a * (y1 - y0)))
}

/// Object `k` gets unit vector `e_(k mod dim)` plus per-frame noise.
pub fn generate_synthetic_scene(spec: &SceneSpec) -> Result<Scene, MotError> {
    let mut ids = BTreeSet::new();
    for o in &spec.objects {
        if !ids.insert(o.id.as_str()) {
            return Err(MotError::Scene(format!("duplicate object id {}", o.id)));
        }
        if o.waypoints.is_empty() || o.waypoints.windows(2).any(|p| p[0].0 >= p[1].0) {
            return Err(MotError::Scene(format!("object {}: waypoints need increasing frames", o.id)));
        }
        if !(0.0..=1.0).contains(&o.score) {
            return Err(MotError::Scene(format!("object {}: score outside [0,1]", o.id)));
        }
    }
    let pos_noise = Normal::new(0.0, spec.noise_px.max(0.0)).map_err(|e| MotError::Scene(e.to_string()))?;
    let desc_noise = Normal::new(0.0, spec.descriptor_noise.max(0.0)).map_err(|e| MotError::Scene(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let first = spec.objects.iter().map(|o| o.waypoints[0].0).min().unwrap_or(0);
    let last = spec.objects.iter().map(|o| o.waypoints.last().unwrap().0).max().unwrap_or(0);
    let mut scene = Scene {
        detections: Vec::new(),
        truth: Vec::new(),
    };
    for f in first..=last {
        let mut index = 0;
        for (k, o) in spec.objects.iter().enumerate() {
            let Some((x, y)) = position(o, f) else { continue };
            // Draw noise even when occluded so other objects' noise does not
            // depend on occlusion settings.
            let (nx, ny) = (pos_noise.sample(&mut rng), pos_noise.sample(&mut rng));
            let descriptor = (spec.descriptor_dim > 0).then(|| {
                (0..spec.descriptor_dim)
                    .map(|i| {
                        let base = if i == k % spec.descriptor_dim { 1.0 } else { 0.0 };
                        base + desc_noise.sample(&mut rng)
                    })
                    .collect::<Vec<f64>>()
            });
            if o.occlusions.iter().any(|&(a, b)| a <= f && f <= b) {
                continue;
            }
            let bbox = BoundingBox::new(x + nx, y + ny, o.size.0, o.size.1)
                .map_err(|e| MotError::Scene(e.to_string()))?;
            scene.detections.push(DetectionRecord {
                frame: f,
                bbox,
                label: o.label.clone(),
                score: o.score,
                descriptor,
            });
            scene.truth.push(GroundTruth {
                frame: f,
                box_index: index,
                object: o.id.clone(),
            });
            index += 1;
        }
    }
    Ok(scene)
}

fn car(id: &str, waypoints: Vec<(u64, f64, f64)>, occlusions: Vec<(u64, u64)>) -> ObjectSpec {
    ObjectSpec {
        id: id.into(),
        label: "car".into(),
        waypoints,
        size: (60.0, 40.0),
        occlusions,
        score: 0.9,
    }
}

/// Two cars driving apart; the white one is not detected at frame 3.
pub fn fig2_scene(seed: u64) -> SceneSpec {
    SceneSpec {
        objects: vec![
            car("black", vec![(1, 100.0, 200.0), (6, 130.0, 200.0)], vec![]),
            car("white", vec![(1, 300.0, 190.0), (6, 340.0, 195.0)], vec![(3, 3)]),
        ],
        noise_px: 0.5,
        descriptor_dim: 8,
        descriptor_noise: 0.02,
        seed,
    }
}

/// One car disappears for frames 6 to 8 and slows down while hidden, so the
/// constant-velocity prediction overshoots it.
pub fn occlusion_scene(seed: u64) -> SceneSpec {
    let mut a = car("a", vec![(1, 50.0, 100.0), (5, 90.0, 100.0), (9, 100.0, 100.0), (15, 160.0, 100.0)], vec![(6, 8)]);
    a.size = (40.0, 40.0);
    let mut b = car("b", vec![(1, 400.0, 300.0), (15, 330.0, 300.0)], vec![]);
    b.size = (40.0, 40.0);
    SceneSpec {
        objects: vec![a, b],
        noise_px: 0.5,
        descriptor_dim: 8,
        descriptor_noise: 0.02,
        seed,
    }
}
