//! Triangle meshes and per-vertex 2D vector fields sampled over time.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// A point or vector in the plane.
pub type Vec2 = [f64; 2];

/// Barycentric tolerance for point-in-triangle tests.
pub const BARY_TOL: f64 = 1e-12;
/// Degenerate-triangle threshold, relative to the squared domain diameter.
pub const DEGENERATE_AREA_REL: f64 = 1e-14;

#[inline]
pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Twice the signed area of `(a, b, c)`; positive when counterclockwise.
#[inline]
pub(crate) fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(sub(b, a), sub(c, a))
}

/// Planar triangle mesh with counterclockwise triangles and a connected edge graph.
#[derive(Debug)]
pub struct TriangleMesh {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    diameter: f64,
    locator: OnceLock<Locator>,
}

impl Clone for TriangleMesh {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            diameter: self.diameter,
            locator: OnceLock::new(),
        }
    }
}

impl PartialEq for TriangleMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles
    }
}

impl TriangleMesh {
    /// Validates the mesh and normalizes every triangle to counterclockwise order.
    pub fn new(vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some((i, v)) = vertices
            .iter()
            .enumerate()
            .find(|(_, v)| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(Error::InvalidMesh(format!(
                "vertex {i} is not finite: {v:?}"
            )));
        }
        let diameter = bbox_diagonal(&vertices);
        if diameter <= 0.0 {
            return Err(Error::InvalidMesh("domain has zero diameter".into()));
        }
        let min_area2 = 2.0 * DEGENERATE_AREA_REL * diameter * diameter;
        let mut triangles = triangles;
        for (t, tri) in triangles.iter_mut().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references vertex {bad}, but there are only {} vertices",
                    vertices.len()
                )));
            }
            let area2 = orient(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area2.abs() <= min_area2 {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if area2 < 0.0 {
                tri.swap(1, 2);
            }
        }
        check_connected(vertices.len(), &triangles)?;
        Ok(Self {
            vertices,
            triangles,
            diameter,
            locator: OnceLock::new(),
        })
    }

    /// Builds a sub-mesh without re-running validation. Triangles must already be
    /// counterclockwise and reference valid vertices.
    pub(crate) fn from_parts_unchecked(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        diameter: f64,
    ) -> Self {
        Self {
            vertices,
            triangles,
            diameter,
            locator: OnceLock::new(),
        }
    }

    /// Structured triangulation of the rectangle `[x0, x0+width] x [y0, y0+height]`
    /// with `nx` by `ny` cells, each split along its lower-left/upper-right diagonal.
    pub fn grid(nx: usize, ny: usize, origin: Vec2, width: f64, height: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh("grid needs at least one cell".into()));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    origin[0] + width * i as f64 / nx as f64,
                    origin[1] + height * j as f64 / ny as f64,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Domain diameter `L`, the bounding-box diagonal of the vertex set.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn triangle_points(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Length of the longest edge in the mesh.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| dist(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Unique undirected edges, each as `[lo, hi]`, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Vec2) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area = orient(a, b, c);
        [
            orient(p, b, c) / area,
            orient(a, p, c) / area,
            orient(a, b, p) / area,
        ]
    }

    /// Finds a triangle containing `p` (up to [`BARY_TOL`]) and its barycentric coordinates.
    pub fn locate(&self, p: Vec2) -> Option<(usize, [f64; 3])> {
        let locator = self.locator.get_or_init(|| Locator::build(self));
        locator.candidates(p).iter().find_map(|&t| {
            let bary = self.barycentric(t as usize, p);
            bary.iter()
                .all(|&l| l >= -BARY_TOL)
                .then_some((t as usize, bary))
        })
    }
}

fn bbox_diagonal(vertices: &[Vec2]) -> f64 {
    let (lo, hi) = bbox(vertices);
    (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}

fn bbox(vertices: &[Vec2]) -> (Vec2, Vec2) {
    vertices.iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), v| {
            (
                [lo[0].min(v[0]), lo[1].min(v[1])],
                [hi[0].max(v[0]), hi[1].max(v[1])],
            )
        },
    )
}

fn check_connected(n: usize, triangles: &[[usize; 3]]) -> Result<()> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &[a, b, c] in triangles {
        for (u, v) in [(a, b), (b, c)] {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru] = rv;
            }
        }
    }
    let root = find(&mut parent, 0);
    match (1..n).find(|&v| find(&mut parent, v) != root) {
        Some(v) => Err(Error::InvalidMesh(format!(
            "edge graph is disconnected (vertex {v} is not reachable from vertex 0)"
        ))),
        None => Ok(()),
    }
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Debug)]
struct Locator {
    origin: Vec2,
    cell: Vec2,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn build(mesh: &TriangleMesh) -> Self {
        let (lo, hi) = bbox(&mesh.vertices);
        let side = (mesh.triangles.len() as f64).sqrt().ceil().max(1.0) as usize;
        let (nx, ny) = (side, side);
        let cell = [
            ((hi[0] - lo[0]) / nx as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / ny as f64).max(f64::MIN_POSITIVE),
        ];
        let mut locator = Self {
            origin: lo,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for t in 0..mesh.triangles.len() {
            let (tlo, thi) = bbox(&mesh.triangle_points(t));
            let (i0, j0) = locator.cell_of(tlo);
            let (i1, j1) = locator.cell_of(thi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    locator.buckets[j * nx + i].push(t as u32);
                }
            }
        }
        locator
    }

    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (
            clamp((p[0] - self.origin[0]) / self.cell[0], self.nx),
            clamp((p[1] - self.origin[1]) / self.cell[1], self.ny),
        )
    }

    fn candidates(&self, p: Vec2) -> &[u32] {
        let (i, j) = self.cell_of(p);
        &self.buckets[j * self.nx + i]
    }
}

/// A named per-vertex scalar channel, e.g. pressure or wind speed.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarChannel {
    pub name: String,
    pub values: Vec<f64>,
}

/// One time step of the field: a 2D vector per mesh vertex plus optional scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFrame {
    pub frame_index: usize,
    pub time: f64,
    pub vectors: Vec<Vec2>,
    pub scalars: Vec<ScalarChannel>,
}

impl FieldFrame {
    pub fn new(frame_index: usize, time: f64, vectors: Vec<Vec2>) -> Self {
        Self {
            frame_index,
            time,
            vectors,
            scalars: Vec::new(),
        }
    }

    pub fn with_scalar(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.scalars.push(ScalarChannel {
            name: name.into(),
            values,
        });
        self
    }

    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.scalars
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn validate(&self, vertex_count: usize) -> Result<()> {
        if self.vectors.len() != vertex_count {
            return Err(Error::InvalidField(format!(
                "frame {}: row count mismatch: {} vectors for {} vertices",
                self.frame_index,
                self.vectors.len(),
                vertex_count
            )));
        }
        if !self.time.is_finite() {
            return Err(Error::InvalidField(format!(
                "frame {}: non-finite time",
                self.frame_index
            )));
        }
        if let Some(v) = self
            .vectors
            .iter()
            .position(|v| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(Error::InvalidField(format!(
                "frame {}: non-finite vector at vertex {v}",
                self.frame_index
            )));
        }
        for channel in &self.scalars {
            if channel.values.len() != vertex_count {
                return Err(Error::InvalidField(format!(
                    "frame {}: row count mismatch in channel {:?}",
                    self.frame_index, channel.name
                )));
            }
            if let Some(v) = channel.values.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidField(format!(
                    "frame {}: non-finite value in channel {:?} at vertex {v}",
                    self.frame_index, channel.name
                )));
            }
        }
        Ok(())
    }
}

/// A mesh together with its frames, ordered by strictly increasing time.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeVaryingField {
    pub mesh: TriangleMesh,
    pub frames: Vec<FieldFrame>,
}

impl TimeVaryingField {
    pub fn new(mesh: TriangleMesh, frames: Vec<FieldFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidField("at least one frame is required".into()));
        }
        for (i, frame) in frames.iter().enumerate() {
            if frame.frame_index != i {
                return Err(Error::InvalidField(format!(
                    "frame indices must be contiguous from 0; found {} at position {i}",
                    frame.frame_index
                )));
            }
            frame.validate(mesh.vertex_count())?;
        }
        if let Some(w) = frames.windows(2).find(|w| w[1].time <= w[0].time) {
            return Err(Error::InvalidField(format!(
                "frame times must be strictly increasing ({} then {})",
                w[0].time, w[1].time
            )));
        }
        Ok(Self { mesh, frames })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Time between the first and last frame.
    pub fn time_span(&self) -> f64 {
        self.frames.last().unwrap().time - self.frames[0].time
    }
}

/// Evaluates the piecewise-linear field at `p`.
pub fn interpolate(frame: &FieldFrame, mesh: &TriangleMesh, p: Vec2) -> Result<Vec2> {
    let (t, bary) = mesh.locate(p).ok_or(Error::OutsideMesh(p[0], p[1]))?;
    Ok(interpolate_in(frame, mesh, t, bary))
}

pub(crate) fn interpolate_in(
    frame: &FieldFrame,
    mesh: &TriangleMesh,
    t: usize,
    bary: [f64; 3],
) -> Vec2 {
    let tri = mesh.triangles()[t];
    let mut out = [0.0; 2];
    for (&v, &l) in tri.iter().zip(&bary) {
        out[0] += l * frame.vectors[v][0];
        out[1] += l * frame.vectors[v][1];
    }
    out
}

/// Per-vertex Euclidean norm of the field.
pub fn magnitude_field(frame: &FieldFrame) -> Vec<f64> {
    frame.vectors.iter().map(|v| v[0].hypot(v[1])).collect()
}
