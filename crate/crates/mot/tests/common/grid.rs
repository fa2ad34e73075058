//! Grid-sampling references for IOU. Shared with the acceptance suite.
#![allow(dead_code)]

use thoth_mot::BoundingBox;

fn inside(r: &BoundingBox, x: f64, y: f64) -> bool {
    x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h
}

/// Area estimate by sampling cell centres on a 0.02 grid.
pub fn grid_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let step = 0.02;
    let x0 = a.x.min(b.x);
    let y0 = a.y.min(b.y);
    let x1 = (a.x + a.w).max(b.x + b.w);
    let y1 = (a.y + a.h).max(b.y + b.h);
    let (mut inter, mut union) = (0u64, 0u64);
    let nx = ((x1 - x0) / step).ceil() as usize;
    let ny = ((y1 - y0) / step).ceil() as usize;
    for i in 0..nx {
        let x = x0 + (i as f64 + 0.5) * step;
        for j in 0..ny {
            let y = y0 + (j as f64 + 0.5) * step;
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    inter as f64 / union as f64
}

/// Cell centres on a `step` grid, counted per axis: a box covers the
/// product of its column and row counts.
pub fn counted_iou(a: &BoundingBox, b: &BoundingBox, step: f64) -> f64 {
    let x0 = a.x.min(b.x);
    let y0 = a.y.min(b.y);
    let nx = (((a.x + a.w).max(b.x + b.w) - x0) / step).ceil() as usize;
    let ny = (((a.y + a.h).max(b.y + b.h) - y0) / step).ceil() as usize;
    let count = |n: usize, o: f64, lo: [f64; 2], hi: [f64; 2]| {
        let (mut ca, mut cb, mut both) = (0u64, 0u64, 0u64);
        for i in 0..n {
            let c = o + (i as f64 + 0.5) * step;
            let ia = c >= lo[0] && c < hi[0];
            let ib = c >= lo[1] && c < hi[1];
            ca += ia as u64;
            cb += ib as u64;
            both += (ia && ib) as u64;
        }
        (ca, cb, both)
    };
    let (ax, bx, ix) = count(nx, x0, [a.x, b.x], [a.x + a.w, b.x + b.w]);
    let (ay, by, iy) = count(ny, y0, [a.y, b.y], [a.y + a.h, b.y + b.h]);
    let inter = ix * iy;
    let union = ax * ay + bx * by - inter;
    inter as f64 / union as f64
}
