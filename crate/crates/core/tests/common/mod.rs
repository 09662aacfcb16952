#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;

use rand::Rng;
use spatialplay::raster::{BBox, Mask};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn random_mask<R: Rng>(rng: &mut R, w: usize, h: usize, density: f64) -> Mask {
    let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    Mask::from_bits(w, h, bits).unwrap()
}

pub fn random_nonempty<R: Rng>(rng: &mut R, w: usize, h: usize) -> Mask {
    let density = rng.gen_range(0.05..0.6);
    let mut m = random_mask(rng, w, h, density);
    if m.is_empty() {
        m.set(rng.gen_range(0..w), rng.gen_range(0..h), true);
    }
    m
}

fn on(m: &Mask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                out.push((x, y));
            }
        }
    }
    out
}

pub fn area(m: &Mask) -> usize {
    on(m).len()
}

pub fn centroid(m: &Mask) -> Option<(f64, f64)> {
    let px = on(m);
    if px.is_empty() {
        return None;
    }
    let n = px.len() as f64;
    let sx: f64 = px.iter().map(|p| p.0 as f64).sum();
    let sy: f64 = px.iter().map(|p| p.1 as f64).sum();
    Some((sx / n, sy / n))
}

pub fn bbox(m: &Mask) -> Option<BBox> {
    let px = on(m);
    if px.is_empty() {
        return None;
    }
    Some(BBox::new(
        px.iter().map(|p| p.0).min().unwrap(),
        px.iter().map(|p| p.1).min().unwrap(),
        px.iter().map(|p| p.0).max().unwrap(),
        px.iter().map(|p| p.1).max().unwrap(),
    ))
}

/// Minimum Euclidean distance over every pair of foreground pixels.
pub fn distance(a: &Mask, b: &Mask) -> Option<f64> {
    let (pa, pb) = (on(a), on(b));
    let mut best: Option<f64> = None;
    for &(ax, ay) in &pa {
        for &(bx, by) in &pb {
            let dx = ax as f64 - bx as f64;
            let dy = ay as f64 - by as f64;
            let d = (dx * dx + dy * dy).sqrt();
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}

/// 8-connected components by flood fill, in order of each component's
/// first pixel in row-major order.
pub fn components(m: &Mask) -> Vec<Mask> {
    let (w, h) = (m.width(), m.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) || seen[y * w + x] {
                continue;
            }
            let mut comp = Mask::empty(w, h);
            let mut queue = VecDeque::from([(x, y)]);
            seen[y * w + x] = true;
            while let Some((cx, cy)) = queue.pop_front() {
                comp.set(cx, cy, true);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let nx = cx as i64 + dx;
                        let ny = cy as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if m.get(nx, ny) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Index of the element closest to `query`, lowest index on ties.
pub fn nearest(elements: &[Mask], query: &Mask) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in elements.iter().enumerate() {
        let d = distance(e, query)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}
