//! Axis-aligned boxes and appearance descriptors, as used by the `iou` and
//! `appDist` builtins.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("malformed box '{0}' (want \"x,y,w,h\")")]
    BadBox(String),
    #[error("box must have positive width and height: {0}")]
    Degenerate(String),
    #[error("malformed descriptor '{0}'")]
    BadDescriptor(String),
    #[error("descriptor lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("descriptor has zero norm")]
    ZeroNorm,
}

/// Top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let b = BoundingBox { x, y, w, h };
        if !(w > 0.0 && h > 0.0) || ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::Degenerate(b.to_string()));
        }
        Ok(b)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Parses the `"x,y,w,h"` lexical form.
    pub fn parse(s: &str) -> Result<Self, GeometryError> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| GeometryError::BadBox(s.to_string()))?;
        match v.as_slice() {
            [x, y, w, h] => BoundingBox::new(*x, *y, *w, *h),
            _ => Err(GeometryError::BadBox(s.to_string())),
        }
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

/// Intersection over union, in [0, 1].
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    (inter / (a.area() + b.area() - inter)).clamp(0.0, 1.0)
}

/// `(1 - cos(d1, d2)) / 2`: 0 for parallel, 0.5 for orthogonal, 1 for opposite.
pub fn appearance_distance(d1: &[f64], d2: &[f64]) -> Result<f64, GeometryError> {
    if d1.len() != d2.len() {
        return Err(GeometryError::LengthMismatch(d1.len(), d2.len()));
    }
    let dot: f64 = d1.iter().zip(d2).map(|(a, b)| a * b).sum();
    let n1 = d1.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n2 = d2.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(GeometryError::ZeroNorm);
    }
    let cos = (dot / (n1 * n2)).clamp(-1.0, 1.0);
    Ok((1.0 - cos) / 2.0)
}

/// Parses a whitespace-separated descriptor literal.
pub fn parse_descriptor(s: &str) -> Result<Vec<f64>, GeometryError> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| GeometryError::BadDescriptor(s.to_string()))?;
    if v.is_empty() {
        return Err(GeometryError::BadDescriptor(s.to_string()));
    }
    Ok(v)
}

pub fn format_descriptor(d: &[f64]) -> String {
    d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
