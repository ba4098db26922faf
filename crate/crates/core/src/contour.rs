//! Line-drawing front end: gradient edge detection and edge linking.
//!
//! Edges come from a 3x3 Sobel gradient, thinned by non-maximum suppression
//! along the quantized gradient direction and kept by hysteresis between two
//! thresholds expressed as fractions of the 99th percentile of the thinned
//! magnitudes. Linking groups the surviving pixels into 8-connected chains.

use std::collections::VecDeque;
use std::io::Write;

use crate::error::{Error, Result};
use crate::raster::{reflect, ContourMask, FloatMap, GrayImage, Grid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeParams {
    pub high_threshold: f64,
    pub low_threshold: f64,
    pub min_chain_length: usize,
}

impl Default for EdgeParams {
    fn default() -> Self {
        EdgeParams {
            high_threshold: 0.3,
            low_threshold: 0.1,
            min_chain_length: 10,
        }
    }
}

impl EdgeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.low_threshold > 0.0
            && self.low_threshold < self.high_threshold
            && self.high_threshold <= 1.0)
        {
            return Err(Error::argument(format!(
                "edge thresholds need 0 < low < high <= 1, got low {} high {}",
                self.low_threshold, self.high_threshold
            )));
        }
        if self.min_chain_length < 2 {
            return Err(Error::argument("min_chain_length must be at least 2"));
        }
        Ok(())
    }
}

/// 8-connected run of contour pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeChain {
    pub points: Vec<(usize, usize)>,
    pub closed: bool,
}

impl EdgeChain {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Result of [`link_edges`]: the chains and the mask of their pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedEdges {
    pub chains: Vec<EdgeChain>,
    pub mask: ContourMask,
}

fn sobel(image: &FloatMap) -> (FloatMap, FloatMap) {
    let (w, h) = image.dims();
    let at = |x: i64, y: i64| image.get(reflect(x, w), reflect(y, h));
    let mut gx = FloatMap::zeros(w, h);
    let mut gy = FloatMap::zeros(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            gx.set(x as usize, y as usize, dx);
            gy.set(x as usize, y as usize, dy);
        }
    }
    (gx, gy)
}

/// Gradient step along the quantized direction of `(gx, gy)`.
fn gradient_step(gx: f64, gy: f64) -> (i64, i64) {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        (1, 0)
    } else if angle < 67.5 {
        (1, 1)
    } else if angle < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Thinned, hysteresis-linked edge strength in `[0, 1]`, zero off-edge.
pub fn detect_edges(image: &GrayImage, params: &EdgeParams) -> Result<FloatMap> {
    params.validate()?;
    let map = image.as_map();
    let (w, h) = map.dims();
    let (gx, gy) = sobel(map);
    let magnitude = FloatMap::from_fn(w, h, |x, y| gx.get(x, y).hypot(gy.get(x, y)));
    let mag_at = |x: i64, y: i64| {
        if magnitude.contains(x, y) {
            magnitude.get(x as usize, y as usize)
        } else {
            0.0
        }
    };

    // Ties across the ridge keep the pixel on the negative-gradient side only,
    // so a symmetric step yields a one-pixel line.
    let thinned = FloatMap::from_fn(w, h, |x, y| {
        let m = magnitude.get(x, y);
        if m <= 0.0 {
            return 0.0;
        }
        let (dx, dy) = gradient_step(gx.get(x, y), gy.get(x, y));
        let (x, y) = (x as i64, y as i64);
        if m > mag_at(x - dx, y - dy) && m >= mag_at(x + dx, y + dy) {
            m
        } else {
            0.0
        }
    });

    let mut positive: Vec<f64> = thinned
        .as_slice()
        .iter()
        .copied()
        .filter(|&m| m > 0.0)
        .collect();
    if positive.is_empty() {
        return Ok(FloatMap::zeros(w, h));
    }
    positive.sort_by(f64::total_cmp);
    let rank = ((positive.len() - 1) as f64 * 0.99).round() as usize;
    let reference = positive[rank];
    let high = params.high_threshold * reference;
    let low = params.low_threshold * reference;

    let mut keep = vec![false; w * h];
    let mut queue = VecDeque::new();
    for (i, &m) in thinned.as_slice().iter().enumerate() {
        if m >= high && m > 0.0 {
            keep[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for (dx, dy) in RING {
            let (nx, ny) = (x + dx, y + dy);
            if !thinned.contains(nx, ny) {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            let m = thinned.as_slice()[j];
            if !keep[j] && m > 0.0 && m >= low {
                keep[j] = true;
                queue.push_back(j);
            }
        }
    }

    let mut kept = ContourMask::from_vec(w, h, keep)?;
    remove_staircases(&mut kept);
    let data = thinned
        .as_slice()
        .iter()
        .zip(kept.as_slice())
        .map(|(&m, &k)| if k { (m / reference).min(1.0) } else { 0.0 })
        .collect();
    FloatMap::from_vec(w, h, data)
}

/// 8-neighborhood in circular order N, NE, E, SE, S, SW, W, NW.
const RING: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Number of 8-connected groups formed by the set neighbors of a pixel.
fn neighbor_components(on: impl Fn(i64, i64) -> bool) -> usize {
    let set: Vec<(i64, i64)> = RING
        .iter()
        .copied()
        .filter(|&(dx, dy)| on(dx, dy))
        .collect();
    let mut group: Vec<usize> = (0..set.len()).collect();
    fn root(group: &mut [usize], mut i: usize) -> usize {
        while group[i] != i {
            group[i] = group[group[i]];
            i = group[i];
        }
        i
    }
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            if (set[i].0 - set[j].0).abs() <= 1 && (set[i].1 - set[j].1).abs() <= 1 {
                let (a, b) = (root(&mut group, i), root(&mut group, j));
                group[a] = b;
            }
        }
    }
    (0..set.len()).filter(|&i| root(&mut group, i) == i).count()
}

/// Removes staircase corners: a pixel with two perpendicular 4-neighbors set
/// and the diagonal between them clear, whose neighbors stay 8-connected
/// without it. Turns 4-connected diagonal runs into 8-connected lines.
fn remove_staircases(mask: &mut ContourMask) {
    let (w, h) = mask.dims();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let on = |dx: i64, dy: i64| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                mask.contains(nx, ny) && mask.get(nx as usize, ny as usize)
            };
            let corner = [(0, -1), (1, 0), (0, 1), (-1, 0)]
                .iter()
                .zip([(1, 0), (0, 1), (-1, 0), (0, -1)])
                .any(|(&(ax, ay), (bx, by))| on(ax, ay) && on(bx, by) && !on(ax + bx, ay + by));
            if corner && neighbor_components(on) == 1 {
                mask.set(x, y, false);
            }
        }
    }
}

/// Tracing preference: 4-neighbors first so staircases are walked pixel by pixel.
const STEP_ORDER: [(i64, i64); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

struct Tracer<'a> {
    mask: &'a ContourMask,
    visited: Vec<bool>,
    junction: Vec<bool>,
}

impl Tracer<'_> {
    fn on(&self, x: i64, y: i64) -> bool {
        self.mask.contains(x, y) && self.mask.get(x as usize, y as usize)
    }

    /// Number of separate runs of set pixels around the 8-ring.
    fn branches(&self, x: usize, y: usize) -> usize {
        let set: Vec<bool> = RING
            .iter()
            .map(|&(dx, dy)| self.on(x as i64 + dx, y as i64 + dy))
            .collect();
        (0..8).filter(|&i| set[i] && !set[(i + 7) % 8]).count()
            + usize::from(set.iter().all(|&s| s))
    }

    fn unvisited_neighbor(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        STEP_ORDER.iter().find_map(|&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            (self.on(nx, ny) && !self.visited[ny as usize * self.mask.width() + nx as usize])
                .then_some((nx as usize, ny as usize))
        })
    }

    fn trace(&mut self, start: (usize, usize)) -> Vec<(usize, usize)> {
        let w = self.mask.width();
        let mut chain = vec![start];
        self.visited[start.1 * w + start.0] = true;
        let mut prev = start;
        let mut cur = start;
        loop {
            if cur != start {
                // a junction next to the walk ends the chain, so branches do
                // not slip past it diagonally
                let junction = RING.iter().find_map(|&(dx, dy)| {
                    let (nx, ny) = (cur.0 as i64 + dx, cur.1 as i64 + dy);
                    let n = (nx as usize, ny as usize);
                    (self.on(nx, ny)
                        && n != prev
                        && n != start
                        && self.junction[ny as usize * w + nx as usize])
                        .then_some(n)
                });
                if let Some(j) = junction {
                    if !self.visited[j.1 * w + j.0] {
                        self.visited[j.1 * w + j.0] = true;
                        chain.push(j);
                    }
                    break;
                }
            }
            let Some(next) = self.unvisited_neighbor(cur.0, cur.1) else {
                break;
            };
            self.visited[next.1 * w + next.0] = true;
            chain.push(next);
            if self.junction[next.1 * w + next.0] {
                break;
            }
            prev = cur;
            cur = next;
        }
        chain
    }
}

fn adjacent(a: (usize, usize), b: (usize, usize)) -> bool {
    a != b && a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
}

fn is_closed(points: &[(usize, usize)]) -> bool {
    points.len() >= 4 && adjacent(points[0], points[points.len() - 1])
}

/// Groups contour pixels into 8-connected chains.
///
/// Chains start at endpoints, then at junctions (pixels whose neighbors form
/// three or more separate runs around the 8-ring), then anywhere on the remaining cycles. A trace
/// stops after entering a junction, so each branch becomes its own chain and
/// every pixel lands in exactly one chain. Chains shorter than
/// `min_chain_length` are dropped.
pub fn link_edges(edges: &ContourMask, min_chain_length: usize) -> LinkedEdges {
    let (w, h) = edges.dims();
    let mut tracer = Tracer {
        mask: edges,
        visited: vec![false; w * h],
        junction: vec![false; w * h],
    };
    let pixels: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| edges.get(x, y))
        .collect();
    let branch_count: Vec<usize> = pixels.iter().map(|&(x, y)| tracer.branches(x, y)).collect();
    for (&(x, y), &b) in pixels.iter().zip(&branch_count) {
        tracer.junction[y * w + x] = b >= 3;
    }

    let mut raw: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut run_phase = |tracer: &mut Tracer, select: &dyn Fn(usize) -> bool| {
        for (i, &p) in pixels.iter().enumerate() {
            if select(branch_count[i]) && !tracer.visited[p.1 * w + p.0] {
                raw.push(tracer.trace(p));
            }
        }
    };
    run_phase(&mut tracer, &|b| b <= 1);
    run_phase(&mut tracer, &|b| b >= 3);
    run_phase(&mut tracer, &|_| true);

    let (mut chains, singles): (Vec<_>, Vec<_>) = raw.into_iter().partition(|c| c.len() >= 2);
    // A pixel cut off behind a junction rejoins a chain that ends next to it.
    for single in singles {
        let p = single[0];
        if let Some(c) = chains.iter_mut().find(|c| adjacent(c[c.len() - 1], p)) {
            c.push(p);
        } else if let Some(c) = chains.iter_mut().find(|c| adjacent(c[0], p)) {
            c.insert(0, p);
        }
    }

    let chains: Vec<EdgeChain> = chains
        .into_iter()
        .filter(|c| c.len() >= min_chain_length.max(2))
        .map(|points| EdgeChain {
            closed: is_closed(&points),
            points,
        })
        .collect();
    let mut mask = Grid::filled(w, h, false);
    for c in &chains {
        for &(x, y) in &c.points {
            mask.set(x, y, true);
        }
    }
    LinkedEdges { chains, mask }
}

/// Full front end: detect edges, then link at `params.min_chain_length`.
pub fn extract_contours(image: &GrayImage, params: &EdgeParams) -> Result<LinkedEdges> {
    let edges = detect_edges(image, params)?;
    Ok(link_edges(&edges.to_mask(), params.min_chain_length))
}

/// Writes chains as CSV `chain_id,point_index,x,y,closed`.
pub fn write_chains_csv(chains: &[EdgeChain], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["chain_id", "point_index", "x", "y", "closed"])
        .map_err(err)?;
    for (id, chain) in chains.iter().enumerate() {
        for (i, &(x, y)) in chain.points.iter().enumerate() {
            w.write_record([
                id.to_string(),
                i.to_string(),
                x.to_string(),
                y.to_string(),
                chain.closed.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush()?;
    Ok(())
}
