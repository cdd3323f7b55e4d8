//! Test-side oracles. They evaluate the synthetic fields analytically and
//! never call the library's merge tree, degree or tracking code.

#![allow(dead_code)]

use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::{PI, TAU};

use mrtrack::synth::{self, ElementKind, FlowElement};
use mrtrack::{TimeVaryingField, TriangleMesh, Vec2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent evaluation of the product-form synthetic field.
pub fn analytic(elements: &[FlowElement], p: Vec2) -> Vec2 {
    let mut acc = [1.0, 0.0];
    for e in elements {
        let c = e.position(0.0);
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        let r2 = dx * dx + dy * dy;
        let d2 = e.decay * e.decay;
        let mut s = (1.0 + e.strength.abs() * (-r2 / d2).exp()) / (r2 + d2).sqrt();
        if e.strength < 0.0 {
            s = -s;
        }
        let g = match e.kind {
            ElementKind::Source => [dx, dy],
            ElementKind::Sink => [-dx, -dy],
            ElementKind::Saddle => [dx, -dy],
            ElementKind::Center => [-dy, dx],
        };
        let v = [s * g[0], s * g[1]];
        acc = [acc[0] * v[0] - acc[1] * v[1], acc[0] * v[1] + acc[1] * v[0]];
    }
    acc
}

pub fn magnitude(elements: &[FlowElement], p: Vec2) -> f64 {
    let v = analytic(elements, p);
    v[0].hypot(v[1])
}

/// Steady elements in the unit square, at least `min_sep` apart and `margin`
/// from the boundary. Every second element is a saddle and the others have
/// random index-one kinds, so most critical points have a partner.
pub fn random_elements(
    rng: &mut ChaCha8Rng,
    n: usize,
    margin: f64,
    min_sep: f64,
) -> Vec<FlowElement> {
    const KINDS: [ElementKind; 3] = [ElementKind::Source, ElementKind::Sink, ElementKind::Center];
    let mut out: Vec<FlowElement> = Vec::with_capacity(n);
    while out.len() < n {
        let at = [
            rng.gen_range(margin..1.0 - margin),
            rng.gen_range(margin..1.0 - margin),
        ];
        if out
            .iter()
            .any(|e| mrtrack::field::dist(e.position(0.0), at) < min_sep)
        {
            continue;
        }
        let kind = if out.len() % 2 == 1 {
            ElementKind::Saddle
        } else {
            KINDS[rng.gen_range(0..3)]
        };
        let strength = rng.gen_range(1.0..3.0);
        let decay = rng.gen_range(0.06..0.12);
        out.push(FlowElement::fixed(kind, strength, decay, at));
    }
    out
}

pub struct RandomField {
    pub elements: Vec<FlowElement>,
    pub field: TimeVaryingField,
}

/// A one-frame random field on a `cells x cells` grid over the unit square.
pub fn random_field(seed: u64, n: usize, cells: usize) -> RandomField {
    let mut r = rng(seed);
    let elements = random_elements(&mut r, n, 0.12, 0.14);
    let mesh = TriangleMesh::grid(cells, cells, [0.0, 0.0], 1.0, 1.0).unwrap();
    let field = synth::render(&elements, mesh, &[0.0]).unwrap();
    RandomField { elements, field }
}

/// Largest slope of the piecewise-linear magnitude along any mesh edge.
pub fn max_edge_gradient(mesh: &TriangleMesh, f0: &[f64]) -> f64 {
    mesh.edges()
        .iter()
        .map(|&[a, b]| {
            let len = mrtrack::field::dist(mesh.vertices()[a], mesh.vertices()[b]);
            (f0[a] - f0[b]).abs() / len
        })
        .fold(0.0, f64::max)
}

/// Magnitude sampled at the centers of an `m x m` pixel grid over
/// `[0, w] x [0, h]`.
pub struct DenseGrid {
    pub m: usize,
    pub w: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl DenseGrid {
    pub fn new(elements: &[FlowElement], m: usize, w: f64, h: f64) -> Self {
        let mut values = Vec::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m {
                values.push(magnitude(elements, Self::center(m, w, h, i, j)));
            }
        }
        Self { m, w, h, values }
    }

    fn center(m: usize, w: f64, h: f64, i: usize, j: usize) -> Vec2 {
        [
            w * (i as f64 + 0.5) / m as f64,
            h * (j as f64 + 0.5) / m as f64,
        ]
    }

    pub fn pixel(&self, p: Vec2) -> usize {
        let i = ((p[0] / self.w * self.m as f64) as usize).min(self.m - 1);
        let j = ((p[1] / self.h * self.m as f64) as usize).min(self.m - 1);
        j * self.m + i
    }

    fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = (k % self.m, k / self.m);
        let m = self.m;
        [
            (i > 0).then(|| k - 1),
            (i + 1 < m).then(|| k + 1),
            (j > 0).then(|| k - m),
            (j + 1 < m).then(|| k + m),
        ]
        .into_iter()
        .flatten()
    }

    /// Component labels of `{value <= level}`; `usize::MAX` outside the set.
    fn label(&self, level: f64, forced: &[usize]) -> Vec<usize> {
        let n = self.values.len();
        let mut inside: Vec<bool> = self.values.iter().map(|&v| v <= level).collect();
        for &k in forced {
            inside[k] = true;
        }
        let mut label = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            if !inside[s] || label[s] != usize::MAX {
                continue;
            }
            label[s] = s;
            queue.push_back(s);
            while let Some(k) = queue.pop_front() {
                for q in self.neighbors(k) {
                    if inside[q] && label[q] == usize::MAX {
                        label[q] = s;
                        queue.push_back(q);
                    }
                }
            }
        }
        label
    }

    /// Classic robustness by flood fill: for each seed, the lowest level at
    /// which its sublevel component has zero degree sum. Seeds are forced into
    /// every sublevel set. The first zero is bracketed on `levels` uniform
    /// thresholds, then refined by bisection.
    pub fn flood_robustness(&self, seeds: &[(Vec2, i32)], levels: usize) -> Vec<Option<f64>> {
        let pixels: Vec<usize> = seeds.iter().map(|&(p, _)| self.pixel(p)).collect();
        let zero_at = |level: f64| -> Vec<bool> {
            let label = self.label(level, &pixels);
            pixels
                .iter()
                .map(|&px| {
                    let sum: i32 = pixels
                        .iter()
                        .zip(seeds)
                        .filter(|(&q, _)| label[q] == label[px])
                        .map(|(_, s)| s.1)
                        .sum();
                    sum == 0
                })
                .collect()
        };
        let top = self.values.iter().copied().fold(0.0, f64::max);
        let mut bracket: Vec<Option<(f64, f64)>> = vec![None; seeds.len()];
        let mut prev = 0.0;
        for k in 1..=levels {
            let level = top * k as f64 / levels as f64;
            let zero = zero_at(level);
            for (s, b) in bracket.iter_mut().enumerate() {
                if b.is_none() && zero[s] {
                    *b = Some((prev, level));
                }
            }
            if bracket.iter().all(Option::is_some) {
                break;
            }
            prev = level;
        }
        bracket
            .iter()
            .enumerate()
            .map(|(s, b)| {
                let (mut lo, mut hi) = (*b)?;
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    if zero_at(mid)[s] {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Some(hi)
            })
            .collect()
    }

    /// Smallest `r` such that `a` and `b` are joined inside `{value <= r}`,
    /// restricted to pixels within `radius` of `a`.
    pub fn bottleneck(&self, a: Vec2, b: Vec2, radius: f64) -> f64 {
        let (pa, pb) = (self.pixel(a), self.pixel(b));
        let allowed = |k: usize| {
            let c = Self::center(self.m, self.w, self.h, k % self.m, k / self.m);
            mrtrack::field::dist(c, a) <= radius
        };
        let mut best = vec![f64::INFINITY; self.values.len()];
        let mut heap = BinaryHeap::new();
        best[pa] = 0.0;
        heap.push(Entry(0.0, pa));
        while let Some(Entry(cost, k)) = heap.pop() {
            if k == pb {
                return cost;
            }
            if cost > best[k] {
                continue;
            }
            for q in self.neighbors(k) {
                if !allowed(q) {
                    continue;
                }
                let c = if q == pb {
                    cost
                } else {
                    cost.max(self.values[q])
                };
                if c < best[q] {
                    best[q] = c;
                    heap.push(Entry(c, q));
                }
            }
        }
        f64::INFINITY
    }
}

/// Min-heap entry ordered by cost.
struct Entry(f64, usize);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Winding number of `f` along a closed polyline, sampling every segment
/// `per_segment` times and summing wrapped angle increments.
pub fn winding(f: impl Fn(Vec2) -> Vec2, corners: &[Vec2], per_segment: usize) -> i32 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let n = corners.len();
    for k in 0..n {
        let (a, b) = (corners[k], corners[(k + 1) % n]);
        for s in 0..per_segment {
            let u = s as f64 / per_segment as f64;
            let v = f([a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]);
            let angle = v[1].atan2(v[0]);
            if let Some(p) = prev {
                let mut d = angle - p;
                while d > PI {
                    d -= TAU;
                }
                while d < -PI {
                    d += TAU;
                }
                total += d;
            }
            prev = Some(angle);
        }
    }
    let v = f(corners[0]);
    let mut d = v[1].atan2(v[0]) - prev.unwrap();
    while d > PI {
        d -= TAU;
    }
    while d < -PI {
        d += TAU;
    }
    total += d;
    (total / TAU).round() as i32
}

/// Counterclockwise corners of an axis-aligned rectangle.
pub fn rectangle(lo: Vec2, hi: Vec2) -> Vec<Vec2> {
    vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]]
}
