//! Deterministic geometric, topological and aggregation operators over masks.
//!
//! Every function here is pure. Ties are always broken toward the lowest
//! index. Distances are measured between pixel centers in pixel units.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::raster::{BBox, ImageRef, Mask, MaskSet, Point};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrimitiveError {
    #[error("mask has no true pixel")]
    EmptyMask,
    #[error("collection is empty")]
    EmptyCollection,
    #[error("mask dimensions differ")]
    DimensionMismatch,
    #[error("centroids coincide; direction undefined")]
    CoincidentCentroids,
    #[error("non-finite number")]
    NonFinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, PrimitiveError>;

/// Eight-way compass direction. Angles are measured in the y-down frame, so
/// E = 0°, SE = 45°, S = 90° and so on clockwise on screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction8 {
    E,
    SE,
    S,
    SW,
    W,
    NW,
    N,
    NE,
}

impl Direction8 {
    const SECTORS: [Direction8; 8] = [
        Direction8::E,
        Direction8::SE,
        Direction8::S,
        Direction8::SW,
        Direction8::W,
        Direction8::NW,
        Direction8::N,
        Direction8::NE,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction8::N => "N",
            Direction8::NE => "NE",
            Direction8::E => "E",
            Direction8::SE => "SE",
            Direction8::S => "S",
            Direction8::SW => "SW",
            Direction8::W => "W",
            Direction8::NW => "NW",
        }
    }

    pub fn opposite(self) -> Direction8 {
        let i = Self::SECTORS.iter().position(|&d| d == self).unwrap();
        Self::SECTORS[(i + 4) % 8]
    }
}

impl fmt::Display for Direction8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrant {
    TL,
    TR,
    BL,
    BR,
}

impl Quadrant {
    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::TL => "TL",
            Quadrant::TR => "TR",
            Quadrant::BL => "BL",
            Quadrant::BR => "BR",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cardinal direction used by [`extreme`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cardinal {
    N,
    S,
    E,
    W,
}

impl FromStr for Cardinal {
    type Err = PrimitiveError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" | "north" | "top" => Ok(Cardinal::N),
            "s" | "south" | "bottom" => Ok(Cardinal::S),
            "e" | "east" | "right" => Ok(Cardinal::E),
            "w" | "west" | "left" => Ok(Cardinal::W),
            other => Err(PrimitiveError::InvalidArgument(format!(
                "unknown direction {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeMode {
    Largest,
    Smallest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKey {
    Area,
    Cx,
    Cy,
}

impl FromStr for FilterKey {
    type Err = PrimitiveError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "area" => Ok(FilterKey::Area),
            "cx" => Ok(FilterKey::Cx),
            "cy" => Ok(FilterKey::Cy),
            other => Err(PrimitiveError::InvalidArgument(format!(
                "unknown filter key {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Comparator {
    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => numbers_close(lhs, rhs),
        }
    }
}

impl FromStr for Comparator {
    type Err = PrimitiveError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "<" => Ok(Comparator::Lt),
            "<=" => Ok(Comparator::Le),
            ">" => Ok(Comparator::Gt),
            ">=" => Ok(Comparator::Ge),
            "=" | "==" => Ok(Comparator::Eq),
            other => Err(PrimitiveError::InvalidArgument(format!(
                "unknown comparator {other:?}"
            ))),
        }
    }
}

/// Absolute/relative tolerance shared with value equality.
pub const NUMERIC_TOLERANCE: f64 = 1e-9;

pub fn numbers_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= NUMERIC_TOLERANCE.max(NUMERIC_TOLERANCE * a.abs().max(b.abs()))
}

fn check_dims(a: &Mask, b: &Mask) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(PrimitiveError::DimensionMismatch)
    }
}

fn non_empty(m: &Mask) -> Result<()> {
    if m.is_empty() {
        Err(PrimitiveError::EmptyMask)
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Geometric

pub fn area(m: &Mask) -> usize {
    m.bits().iter().filter(|&&b| b).count()
}

pub fn bbox(m: &Mask) -> Result<BBox> {
    let mut it = m.pixels();
    let (x0, y0) = it.next().ok_or(PrimitiveError::EmptyMask)?;
    let mut b = BBox::new(x0, y0, x0, y0);
    for (x, y) in it {
        b.xmin = b.xmin.min(x);
        b.xmax = b.xmax.max(x);
        b.ymin = b.ymin.min(y);
        b.ymax = b.ymax.max(y);
    }
    Ok(b)
}

pub fn centroid(m: &Mask) -> Result<Point> {
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (x, y) in m.pixels() {
        sx += x as u64;
        sy += y as u64;
        n += 1;
    }
    if n == 0 {
        return Err(PrimitiveError::EmptyMask);
    }
    Ok(Point::new(sx as f64 / n as f64, sy as f64 / n as f64))
}

/// Principal-axis angle in degrees, `[0, 180)`, measured from +x toward +y.
/// Isotropic shapes (including single pixels) report 0.
pub fn orientation(m: &Mask) -> Result<f64> {
    let c = centroid(m)?;
    let (mut mu20, mut mu02, mut mu11) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in m.pixels() {
        let dx = x as f64 - c.x;
        let dy = y as f64 - c.y;
        mu20 += dx * dx;
        mu02 += dy * dy;
        mu11 += dx * dy;
    }
    let diff = mu20 - mu02;
    if mu11 == 0.0 && diff == 0.0 {
        return Ok(0.0);
    }
    let deg = (0.5 * (2.0 * mu11).atan2(diff)).to_degrees();
    let r = deg.rem_euclid(180.0);
    Ok(if r >= 180.0 { 0.0 } else { r })
}

// ---------------------------------------------------------------------------
// Topological

pub fn overlaps(a: &Mask, b: &Mask) -> Result<bool> {
    check_dims(a, b)?;
    Ok(a.bits().iter().zip(b.bits()).any(|(&p, &q)| p && q))
}

pub fn contains(outer: &Mask, inner: &Mask) -> Result<bool> {
    check_dims(outer, inner)?;
    Ok(outer
        .bits()
        .iter()
        .zip(inner.bits())
        .all(|(&p, &q)| p || !q))
}

/// Disjoint masks that touch under 8-connectivity.
pub fn adjacent(a: &Mask, b: &Mask) -> Result<bool> {
    check_dims(a, b)?;
    non_empty(a)?;
    non_empty(b)?;
    if overlaps(a, b)? {
        return Ok(false);
    }
    let (w, h) = (a.width(), a.height());
    for (x, y) in a.pixels() {
        for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                if b.get(nx, ny) {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

/// Squared Euclidean distance from every pixel to the nearest true pixel of
/// `target`, via the separable lower-envelope transform. `None` marks pixels
/// with no reachable target (only possible when the target is empty).
pub fn squared_distance_transform(target: &Mask) -> Vec<Option<u64>> {
    let (w, h) = (target.width(), target.height());
    let mut cols: Vec<Option<u64>> = vec![None; w * h];
    let mut buf_in = Vec::with_capacity(w.max(h));
    let mut buf_out = Vec::with_capacity(w.max(h));
    for x in 0..w {
        buf_in.clear();
        buf_in.extend((0..h).map(|y| target.get(x, y).then_some(0u64)));
        edt_1d(&buf_in, &mut buf_out);
        for y in 0..h {
            cols[y * w + x] = buf_out[y];
        }
    }
    let mut out = vec![None; w * h];
    for y in 0..h {
        buf_in.clear();
        buf_in.extend_from_slice(&cols[y * w..(y + 1) * w]);
        edt_1d(&buf_in, &mut buf_out);
        out[y * w..(y + 1) * w].copy_from_slice(&buf_out);
    }
    out
}

/// 1-D squared distance transform over sampled heights `f`; `None` entries
/// contribute no parabola.
fn edt_1d(f: &[Option<u64>], out: &mut Vec<Option<u64>>) {
    out.clear();
    let n = f.len();
    // envelope parabola vertices and the left boundaries of their regions
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    for (q, fq) in f.iter().enumerate() {
        let Some(fq) = *fq else { continue };
        let fq = fq as f64;
        let qf = q as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let fp = f[p].unwrap() as f64;
                    let pf = p as f64;
                    let s = ((fq + qf * qf) - (fp + pf * pf)) / (2.0 * qf - 2.0 * pf);
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                        if v.is_empty() {
                            continue;
                        }
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.resize(n, None);
        return;
    }
    let mut k = 0;
    for q in 0..n {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        let d = q.abs_diff(p) as u64;
        out.push(Some(d * d + f[p].unwrap()));
    }
}

fn min_sq_distance_to(dt: &[Option<u64>], m: &Mask) -> Option<u64> {
    let w = m.width();
    m.pixels().filter_map(|(x, y)| dt[y * w + x]).min()
}

/// Minimum Euclidean distance between true pixels of the two masks.
pub fn distance(a: &Mask, b: &Mask) -> Result<f64> {
    check_dims(a, b)?;
    non_empty(a)?;
    non_empty(b)?;
    let dt = squared_distance_transform(b);
    let d2 = min_sq_distance_to(&dt, a).ok_or(PrimitiveError::EmptyMask)?;
    Ok((d2 as f64).sqrt())
}

fn finite_point(pt: Point) -> Result<()> {
    if pt.x.is_finite() && pt.y.is_finite() {
        Ok(())
    } else {
        Err(PrimitiveError::NonFinite)
    }
}

/// Quadrant of a point; the half-way line belongs to the right/bottom half.
pub fn quadrant(pt: Point, img: &ImageRef) -> Result<Quadrant> {
    finite_point(pt)?;
    let half_w = img.width as f64 / 2.0;
    let half_h = img.height as f64 / 2.0;
    Ok(if pt.x < half_w && pt.y < half_h {
        Quadrant::TL
    } else if pt.y < half_h {
        Quadrant::TR
    } else if pt.x < half_w {
        Quadrant::BL
    } else {
        Quadrant::BR
    })
}

/// Direction from the centroid of `from` to the centroid of `to`, bucketed
/// into 45° sectors. A boundary angle rounds into the clockwise sector.
pub fn relpos(from: &Mask, to: &Mask) -> Result<Direction8> {
    check_dims(from, to)?;
    let a = centroid(from)?;
    let b = centroid(to)?;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx == 0.0 && dy == 0.0 {
        return Err(PrimitiveError::CoincidentCentroids);
    }
    let deg = dy.atan2(dx).to_degrees().rem_euclid(360.0);
    let sector = ((deg + 22.5) / 45.0).floor() as usize % 8;
    Ok(Direction8::SECTORS[sector])
}

fn cell_index(pt: Point, width: usize, height: usize, n: i64) -> Result<i64> {
    finite_point(pt)?;
    if n < 1 {
        return Err(PrimitiveError::InvalidArgument(format!(
            "grid size must be >= 1, got {n}"
        )));
    }
    let nf = n as f64;
    let clamp = |v: f64| (v.floor() as i64).clamp(0, n - 1);
    let i = clamp(pt.y * nf / height as f64);
    let j = clamp(pt.x * nf / width as f64);
    Ok(i * n + j)
}

/// Row-major index of the `n`×`n` grid cell containing `pt`.
pub fn grid_cell(pt: Point, img: &ImageRef, n: i64) -> Result<i64> {
    cell_index(pt, img.width, img.height, n)
}

/// Whether the centroid of `m` falls in cell `k` of an `n`×`n` grid.
pub fn in_cell(m: &Mask, k: i64, n: i64) -> Result<bool> {
    let c = centroid(m)?;
    Ok(cell_index(c, m.width(), m.height(), n)? == k)
}

// ---------------------------------------------------------------------------
// Aggregation

/// Index of the element closest (minimum pixel-to-pixel distance) to `query`.
pub fn nearest(ms: &MaskSet, query: &Mask) -> Result<usize> {
    if ms.is_empty() {
        return Err(PrimitiveError::EmptyCollection);
    }
    non_empty(query)?;
    let dt = squared_distance_transform(query);
    let mut best: Option<(usize, u64)> = None;
    for (i, m) in ms.iter().enumerate() {
        check_dims(m, query)?;
        let d = min_sq_distance_to(&dt, m).ok_or(PrimitiveError::EmptyMask)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    Ok(best.unwrap().0)
}

/// 8-connected components ordered by their first pixel in row-major order.
pub fn components(m: &Mask) -> MaskSet {
    let (w, h) = (m.width(), m.height());
    let mut labels = vec![usize::MAX; w * h];
    let mut parent: Vec<usize> = Vec::new();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) {
                continue;
            }
            // previously scanned 8-neighbours: W, NW, N, NE
            let mut neigh = [usize::MAX; 4];
            if x > 0 {
                neigh[0] = labels[y * w + x - 1];
            }
            if y > 0 {
                let row = (y - 1) * w;
                if x > 0 {
                    neigh[1] = labels[row + x - 1];
                }
                neigh[2] = labels[row + x];
                if x + 1 < w {
                    neigh[3] = labels[row + x + 1];
                }
            }
            let mut label = usize::MAX;
            for &l in neigh.iter().filter(|&&l| l != usize::MAX) {
                if label == usize::MAX {
                    label = find(&mut parent, l);
                } else {
                    let (ra, rb) = (find(&mut parent, label), find(&mut parent, l));
                    if ra != rb {
                        let (lo, hi) = (ra.min(rb), ra.max(rb));
                        parent[hi] = lo;
                        label = lo;
                    }
                }
            }
            if label == usize::MAX {
                label = parent.len();
                parent.push(label);
            }
            labels[y * w + x] = label;
        }
    }

    let mut order: Vec<usize> = vec![usize::MAX; parent.len()];
    let mut out: Vec<Mask> = Vec::new();
    for (idx, &label) in labels.iter().enumerate() {
        if label == usize::MAX {
            continue;
        }
        let root = find(&mut parent, label);
        if order[root] == usize::MAX {
            order[root] = out.len();
            out.push(Mask::empty(w, h));
        }
        out[order[root]].set(idx % w, idx / w, true);
    }
    MaskSet::new(w, h, out).expect("components share the source dimensions")
}

pub fn count(ms: &MaskSet) -> usize {
    ms.len()
}

pub fn exists_mask(m: &Mask) -> bool {
    !m.is_empty()
}

pub fn exists_set(ms: &MaskSet) -> bool {
    !ms.is_empty()
}

/// Pixelwise OR; the empty set yields an all-false mask of the set's grid.
pub fn union(ms: &MaskSet) -> Mask {
    let mut out = Mask::empty(ms.width(), ms.height());
    for m in ms.iter() {
        out.or_assign(m);
    }
    out
}

pub fn arg_extremum(vals: &[f64], mode: Extremum) -> Result<usize> {
    if vals.is_empty() {
        return Err(PrimitiveError::EmptyCollection);
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(PrimitiveError::NonFinite);
    }
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate().skip(1) {
        let better = match mode {
            Extremum::Min => v < vals[best],
            Extremum::Max => v > vals[best],
        };
        if better {
            best = i;
        }
    }
    Ok(best)
}

pub fn size_extremum(ms: &MaskSet, mode: SizeMode) -> Result<usize> {
    let areas: Vec<f64> = ms.iter().map(|m| area(m) as f64).collect();
    let mode = match mode {
        SizeMode::Largest => Extremum::Max,
        SizeMode::Smallest => Extremum::Min,
    };
    arg_extremum(&areas, mode)
}

/// Index of the element whose centroid lies furthest toward `dir`.
pub fn extreme(ms: &MaskSet, dir: Cardinal) -> Result<usize> {
    if ms.is_empty() {
        return Err(PrimitiveError::EmptyCollection);
    }
    let cs = ms.iter().map(centroid).collect::<Result<Vec<_>>>()?;
    let (vals, mode): (Vec<f64>, Extremum) = match dir {
        Cardinal::N => (cs.iter().map(|c| c.y).collect(), Extremum::Min),
        Cardinal::S => (cs.iter().map(|c| c.y).collect(), Extremum::Max),
        Cardinal::W => (cs.iter().map(|c| c.x).collect(), Extremum::Min),
        Cardinal::E => (cs.iter().map(|c| c.x).collect(), Extremum::Max),
    };
    arg_extremum(&vals, mode)
}

/// Order-preserving subset whose key satisfies `key cmp threshold`.
pub fn filter_by(ms: &MaskSet, key: FilterKey, cmp: Comparator, threshold: f64) -> Result<MaskSet> {
    if !threshold.is_finite() {
        return Err(PrimitiveError::NonFinite);
    }
    let mut kept = Vec::new();
    for m in ms.iter() {
        let v = match key {
            FilterKey::Area => area(m) as f64,
            FilterKey::Cx => centroid(m)?.x,
            FilterKey::Cy => centroid(m)?.y,
        };
        if cmp.apply(v, threshold) {
            kept.push(m.clone());
        }
    }
    Ok(MaskSet::new(ms.width(), ms.height(), kept).expect("subset keeps dimensions"))
}

/// Mean of the element centroids.
pub fn mean_position(ms: &MaskSet) -> Result<Point> {
    if ms.is_empty() {
        return Err(PrimitiveError::EmptyCollection);
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for m in ms.iter() {
        let c = centroid(m)?;
        sx += c.x;
        sy += c.y;
    }
    let n = ms.len() as f64;
    Ok(Point::new(sx / n, sy / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m4(px: &[(usize, usize)]) -> Mask {
        Mask::from_pixels(4, 4, px).unwrap()
    }
    fn a() -> Mask {
        m4(&[(0, 0), (1, 0), (0, 1), (1, 1)])
    }
    fn b() -> Mask {
        m4(&[(3, 3)])
    }
    fn c() -> Mask {
        m4(&[(2, 1)])
    }
    fn set(ms: Vec<Mask>) -> MaskSet {
        MaskSet::new(4, 4, ms).unwrap()
    }
    fn ab() -> Mask {
        let mut m = a();
        m.or_assign(&b());
        m
    }
    fn img4() -> ImageRef {
        ImageRef::new("t", 4, 4).unwrap()
    }

    #[test]
    fn area_examples() {
        assert_eq!(area(&a()), 4);
        assert_eq!(area(&Mask::empty(4, 4)), 0);
        assert_eq!(area(&Mask::full(4, 4)), 16);
    }

    #[test]
    fn bbox_examples() {
        assert_eq!(bbox(&a()).unwrap(), BBox::new(0, 0, 1, 1));
        assert_eq!(bbox(&b()).unwrap(), BBox::new(3, 3, 3, 3));
        assert_eq!(bbox(&ab()).unwrap(), BBox::new(0, 0, 3, 3));
        assert_eq!(bbox(&Mask::empty(4, 4)), Err(PrimitiveError::EmptyMask));
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&a()).unwrap(), Point::new(0.5, 0.5));
        assert_eq!(centroid(&b()).unwrap(), Point::new(3.0, 3.0));
        assert_eq!(centroid(&ab()).unwrap(), Point::new(1.0, 1.0));
        assert_eq!(centroid(&Mask::empty(4, 4)), Err(PrimitiveError::EmptyMask));
    }

    #[test]
    fn orientation_examples() {
        assert_eq!(orientation(&m4(&[(0, 0), (1, 0), (2, 0)])).unwrap(), 0.0);
        assert_eq!(orientation(&m4(&[(0, 0), (0, 1), (0, 2)])).unwrap(), 90.0);
        assert_eq!(orientation(&b()).unwrap(), 0.0);
        assert_eq!(orientation(&a()).unwrap(), 0.0);
        let diag = orientation(&m4(&[(0, 0), (1, 1), (2, 2)])).unwrap();
        assert!((diag - 45.0).abs() < 1e-12);
        let anti = orientation(&m4(&[(2, 0), (1, 1), (0, 2)])).unwrap();
        assert!((anti - 135.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_and_containment() {
        assert!(overlaps(&a(), &a()).unwrap());
        assert!(!overlaps(&a(), &b()).unwrap());
        assert!(overlaps(&a(), &m4(&[(1, 1), (3, 0)])).unwrap());
        assert_eq!(
            overlaps(&a(), &Mask::empty(3, 3)),
            Err(PrimitiveError::DimensionMismatch)
        );
        assert!(contains(&a(), &a()).unwrap());
        assert!(contains(&a(), &m4(&[(0, 0)])).unwrap());
        assert!(!contains(&m4(&[(0, 0)]), &a()).unwrap());
    }

    #[test]
    fn adjacency() {
        assert!(adjacent(&a(), &c()).unwrap());
        assert!(!adjacent(&a(), &b()).unwrap());
        assert!(!adjacent(&a(), &a()).unwrap());
        // diagonal touch counts
        assert!(adjacent(&m4(&[(0, 0)]), &m4(&[(1, 1)])).unwrap());
        assert_eq!(
            adjacent(&a(), &Mask::empty(4, 4)),
            Err(PrimitiveError::EmptyMask)
        );
    }

    #[test]
    fn distance_examples() {
        assert!((distance(&a(), &b()).unwrap() - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(distance(&a(), &c()).unwrap(), 1.0);
        assert_eq!(distance(&a(), &a()).unwrap(), 0.0);
        assert_eq!(
            distance(&a(), &Mask::empty(4, 4)),
            Err(PrimitiveError::EmptyMask)
        );
    }

    #[test]
    fn quadrant_examples() {
        let img = img4();
        assert_eq!(quadrant(Point::new(0.5, 0.5), &img).unwrap(), Quadrant::TL);
        assert_eq!(quadrant(Point::new(3.0, 3.0), &img).unwrap(), Quadrant::BR);
        assert_eq!(quadrant(Point::new(2.0, 1.0), &img).unwrap(), Quadrant::TR);
        assert_eq!(quadrant(Point::new(1.0, 2.0), &img).unwrap(), Quadrant::BL);
        assert_eq!(
            quadrant(Point::new(f64::NAN, 0.0), &img),
            Err(PrimitiveError::NonFinite)
        );
    }

    #[test]
    fn relpos_examples() {
        assert_eq!(relpos(&a(), &b()).unwrap(), Direction8::SE);
        assert_eq!(relpos(&b(), &a()).unwrap(), Direction8::NW);
        assert_eq!(relpos(&a(), &m4(&[(3, 0), (3, 1)])).unwrap(), Direction8::E);
        assert_eq!(relpos(&a(), &m4(&[(0, 3)])).unwrap(), Direction8::S);
        assert_eq!(relpos(&b(), &m4(&[(3, 0)])).unwrap(), Direction8::N);
        assert_eq!(relpos(&a(), &a()), Err(PrimitiveError::CoincidentCentroids));
    }

    #[test]
    fn grid_examples() {
        let img = img4();
        assert_eq!(grid_cell(Point::new(0.5, 0.5), &img, 2).unwrap(), 0);
        assert_eq!(grid_cell(Point::new(3.0, 3.0), &img, 2).unwrap(), 3);
        assert_eq!(grid_cell(Point::new(3.9, 0.1), &img, 4).unwrap(), 3);
        // clamped at the far edge
        assert_eq!(grid_cell(Point::new(4.0, 4.0), &img, 2).unwrap(), 3);
        assert!(grid_cell(Point::new(0.0, 0.0), &img, 0).is_err());
        assert!(in_cell(&b(), 3, 2).unwrap());
        assert!(!in_cell(&a(), 3, 2).unwrap());
    }

    #[test]
    fn nearest_examples() {
        assert_eq!(nearest(&set(vec![b(), c()]), &a()).unwrap(), 1);
        assert_eq!(nearest(&set(vec![a()]), &a()).unwrap(), 0);
        assert_eq!(nearest(&set(vec![b(), b()]), &a()).unwrap(), 0);
        assert_eq!(
            nearest(&set(vec![]), &a()),
            Err(PrimitiveError::EmptyCollection)
        );
        assert_eq!(
            nearest(&set(vec![b(), Mask::empty(4, 4)]), &a()),
            Err(PrimitiveError::EmptyMask)
        );
    }

    #[test]
    fn components_examples() {
        let two = components(&m4(&[(0, 0), (3, 3)]));
        assert_eq!(two.len(), 2);
        assert_eq!(two.get(0).unwrap(), &m4(&[(0, 0)]));
        assert_eq!(two.get(1).unwrap(), &m4(&[(3, 3)]));
        assert_eq!(components(&a()).elements(), &[a()]);
        assert!(components(&Mask::empty(4, 4)).is_empty());
        // diagonal chain is one component under 8-connectivity
        assert_eq!(components(&m4(&[(0, 0), (1, 1), (2, 2)])).len(), 1);
    }

    #[test]
    fn components_order_by_first_pixel() {
        // U shape: the right arm's top pixel is scanned before the join row
        let u = m4(&[(0, 0), (2, 0), (0, 1), (2, 1), (0, 2), (1, 2), (2, 2), (3, 0)]);
        let cs = components(&u);
        assert_eq!(cs.len(), 1);
        let split = m4(&[(3, 0), (0, 1), (0, 2)]);
        let cs = components(&split);
        assert_eq!(cs.get(0).unwrap(), &m4(&[(3, 0)]));
    }

    #[test]
    fn count_exists_union() {
        assert_eq!(count(&set(vec![])), 0);
        assert_eq!(count(&set(vec![a()])), 1);
        assert_eq!(count(&set(vec![a(), b(), c()])), 3);
        assert!(!exists_mask(&Mask::empty(4, 4)));
        assert!(exists_mask(&a()));
        assert!(!exists_set(&set(vec![])));
        assert_eq!(area(&union(&set(vec![a(), b()]))), 5);
        assert_eq!(union(&set(vec![a(), a()])), a());
        assert_eq!(union(&set(vec![])), Mask::empty(4, 4));
    }

    #[test]
    fn extremum_tie_rules() {
        assert_eq!(arg_extremum(&[3.0, 7.0, 7.0], Extremum::Max).unwrap(), 1);
        assert_eq!(arg_extremum(&[2.0, 2.0, 5.0], Extremum::Min).unwrap(), 0);
        assert_eq!(arg_extremum(&[-1.0], Extremum::Max).unwrap(), 0);
        assert_eq!(
            arg_extremum(&[], Extremum::Max),
            Err(PrimitiveError::EmptyCollection)
        );
        assert_eq!(
            arg_extremum(&[1.0, f64::INFINITY], Extremum::Max),
            Err(PrimitiveError::NonFinite)
        );
        assert_eq!(size_extremum(&set(vec![a(), b()]), SizeMode::Largest).unwrap(), 0);
        assert_eq!(size_extremum(&set(vec![a(), b()]), SizeMode::Smallest).unwrap(), 1);
        assert_eq!(size_extremum(&set(vec![b(), b()]), SizeMode::Largest).unwrap(), 0);
    }

    #[test]
    fn extreme_examples() {
        assert_eq!(extreme(&set(vec![a(), b()]), Cardinal::N).unwrap(), 0);
        assert_eq!(extreme(&set(vec![a(), b()]), Cardinal::E).unwrap(), 1);
        assert_eq!(extreme(&set(vec![a()]), Cardinal::S).unwrap(), 0);
        assert_eq!("north".parse::<Cardinal>().unwrap(), Cardinal::N);
        assert!("up".parse::<Cardinal>().is_err());
    }

    #[test]
    fn filter_examples() {
        let ms = set(vec![a(), b()]);
        let r = filter_by(&ms, FilterKey::Area, Comparator::Gt, 2.0).unwrap();
        assert_eq!(r.elements(), &[a()]);
        let r = filter_by(&ms, FilterKey::Cx, Comparator::Lt, 2.0).unwrap();
        assert_eq!(r.elements(), &[a()]);
        let r = filter_by(&ms, FilterKey::Area, Comparator::Ge, 0.0).unwrap();
        assert_eq!(r, ms);
        let with_empty = set(vec![Mask::empty(4, 4)]);
        assert_eq!(
            filter_by(&with_empty, FilterKey::Cy, Comparator::Lt, 1.0),
            Err(PrimitiveError::EmptyMask)
        );
    }

    #[test]
    fn mean_position_examples() {
        assert_eq!(
            mean_position(&set(vec![a(), b()])).unwrap(),
            Point::new(1.75, 1.75)
        );
        assert_eq!(mean_position(&set(vec![a()])).unwrap(), Point::new(0.5, 0.5));
        assert_eq!(mean_position(&set(vec![b(), b()])).unwrap(), Point::new(3.0, 3.0));
    }

    #[test]
    fn edt_1d_handles_sparse_and_empty_rows() {
        let mut out = Vec::new();
        edt_1d(&[None, None, None], &mut out);
        assert_eq!(out, vec![None, None, None]);
        edt_1d(&[None, Some(0), None, None, Some(0)], &mut out);
        assert_eq!(out, vec![Some(1), Some(0), Some(1), Some(1), Some(0)]);
        edt_1d(&[Some(9), None, Some(0)], &mut out);
        assert_eq!(out, vec![Some(4), Some(1), Some(0)]);
    }
}
