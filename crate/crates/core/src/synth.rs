//! Analytic synthetic fields with a known critical structure.
//!
//! Each element is a complex factor `g(z - p) * (1 + |s| exp(-r^2/d^2)) / sqrt(r^2 + d^2)`
//! where `g` is the canonical local field of its kind (source `z`, sink `-z`,
//! saddle `conj(z)`, center `i z`), `s` the strength and `d` the decay length.
//! The rendered field is the complex product of all factors. A product vanishes
//! only where one factor does, so every element contributes exactly one zero
//! with its canonical degree and no other zeros exist. Far from every element
//! the magnitude approaches 1; a large `|s|` raises a rim of height about
//! `0.4 |s|` around the element at radius `~0.66 d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldFrame, TimeVaryingField, TriangleMesh, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Source,
    Sink,
    Saddle,
    Center,
}

impl ElementKind {
    /// Poincaré index of the element's zero.
    pub fn degree(self) -> i32 {
        match self {
            ElementKind::Saddle => -1,
            _ => 1,
        }
    }

    fn local(self, dx: f64, dy: f64) -> Vec2 {
        match self {
            ElementKind::Source => [dx, dy],
            ElementKind::Sink => [-dx, -dy],
            ElementKind::Saddle => [dx, -dy],
            ElementKind::Center => [-dy, dx],
        }
    }
}

#[inline]
fn cmul(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]]
}

/// A flow element following a piecewise-linear path `[t, x, y]` through time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowElement {
    pub kind: ElementKind,
    pub strength: f64,
    pub decay: f64,
    pub path: Vec<[f64; 3]>,
}

impl FlowElement {
    pub fn fixed(kind: ElementKind, strength: f64, decay: f64, at: Vec2) -> Self {
        Self {
            kind,
            strength,
            decay,
            path: vec![[0.0, at[0], at[1]]],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.strength == 0.0 || !self.strength.is_finite() {
            return Err(Error::InvalidArgument(
                "element strength must be nonzero".into(),
            ));
        }
        if self.decay.is_nan() || self.decay <= 0.0 || !self.decay.is_finite() {
            return Err(Error::InvalidArgument(
                "element decay must be positive".into(),
            ));
        }
        if self.path.is_empty() {
            return Err(Error::InvalidArgument("element path is empty".into()));
        }
        if self.path.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::InvalidArgument(
                "element path times must increase".into(),
            ));
        }
        Ok(())
    }

    /// Position at time `t`, held constant outside the path's time range.
    pub fn position(&self, t: f64) -> Vec2 {
        let first = self.path[0];
        if t <= first[0] {
            return [first[1], first[2]];
        }
        for w in self.path.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t <= b[0] {
                let s = (t - a[0]) / (b[0] - a[0]);
                return [a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])];
            }
        }
        let last = self.path[self.path.len() - 1];
        [last[1], last[2]]
    }

    /// This element's complex factor at `p`, time `t`.
    pub fn factor(&self, p: Vec2, t: f64) -> Vec2 {
        let c = self.position(t);
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        let r2 = dx * dx + dy * dy;
        let d2 = self.decay * self.decay;
        let scale = (1.0 + self.strength.abs() * (-r2 / d2).exp()) / (r2 + d2).sqrt();
        let scale = scale.copysign(self.strength);
        let v = self.kind.local(dx, dy);
        [scale * v[0], scale * v[1]]
    }
}

/// Samples an arbitrary analytic field `f(x, y, t)` at the mesh vertices.
pub fn sample_field(
    mesh: TriangleMesh,
    times: &[f64],
    f: impl Fn(f64, f64, f64) -> Vec2,
) -> Result<TimeVaryingField> {
    let frames = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            FieldFrame::new(
                i,
                t,
                mesh.vertices().iter().map(|p| f(p[0], p[1], t)).collect(),
            )
        })
        .collect();
    TimeVaryingField::new(mesh, frames)
}

/// Renders the product of `elements` on `mesh` at each of `times`.
pub fn render(
    elements: &[FlowElement],
    mesh: TriangleMesh,
    times: &[f64],
) -> Result<TimeVaryingField> {
    if elements.is_empty() {
        return Err(Error::InvalidArgument("no flow elements".into()));
    }
    for e in elements {
        e.validate()?;
    }
    sample_field(mesh, times, |x, y, t| {
        elements
            .iter()
            .fold([1.0, 0.0], |acc, e| cmul(acc, e.factor([x, y], t)))
    })
}

pub fn uniform_times(count: usize, dt: f64) -> Vec<f64> {
    (0..count).map(|i| i as f64 * dt).collect()
}

/// Layout of [`boundary_effect_fixture`]; all positions in domain units.
pub mod boundary_effect {
    use super::*;

    pub const WIDTH: f64 = 24.0;
    pub const HEIGHT: f64 = 8.0;
    pub const CENTER_A: Vec2 = [4.0, 4.5];
    pub const CENTER_B: Vec2 = [20.0, 4.5];
    pub const SADDLE_A: Vec2 = [4.0, 0.7];
    pub const SADDLE_B: Vec2 = [20.0, 0.7];
    pub const CELLS: (usize, usize) = (240, 80);
    pub const FRAMES: usize = 4;

    /// Two strong centers (rim ~2.7), each with a weak saddle between it and
    /// the lower boundary. Two weak sources balance the weak saddles, so the
    /// low background has degree zero, and two strong saddles (rim ~4.1) in
    /// the middle are the partners the centers get on the whole domain.
    pub fn elements(with_weak_saddles: bool) -> Vec<FlowElement> {
        use ElementKind::*;
        let mut out = vec![
            FlowElement::fixed(Center, 6.0, 1.0, CENTER_A),
            FlowElement::fixed(Center, 6.0, 1.0, CENTER_B),
            FlowElement::fixed(Saddle, 10.0, 0.6, [12.0, 5.8]),
            FlowElement::fixed(Saddle, 10.0, 0.6, [12.0, 1.7]),
            FlowElement::fixed(Source, 0.1, 0.25, [8.5, 7.3]),
            FlowElement::fixed(Source, 0.1, 0.25, [15.5, 0.7]),
        ];
        if with_weak_saddles {
            out.push(FlowElement::fixed(Saddle, 0.1, 0.25, SADDLE_A));
            out.push(FlowElement::fixed(Saddle, 0.1, 0.25, SADDLE_B));
        }
        out
    }

    pub fn mesh() -> TriangleMesh {
        TriangleMesh::grid(CELLS.0, CELLS.1, [0.0, 0.0], WIDTH, HEIGHT)
            .expect("fixture mesh is valid")
    }
}

/// Steady field exhibiting the boundary effect on classic robustness.
pub fn boundary_effect_fixture() -> TimeVaryingField {
    render(
        &boundary_effect::elements(true),
        boundary_effect::mesh(),
        &uniform_times(boundary_effect::FRAMES, 1.0),
    )
    .expect("fixture renders")
}

/// `cols x rows` elements on a jittered lattice with the given spacing, kinds
/// cycling source, saddle, center, sink.
pub fn lattice_elements(cols: usize, rows: usize, spacing: f64) -> Vec<FlowElement> {
    const KINDS: [ElementKind; 4] = [
        ElementKind::Source,
        ElementKind::Saddle,
        ElementKind::Center,
        ElementKind::Sink,
    ];
    let decay = spacing / 8.0;
    let jitter = spacing / 6.0;
    let mut out = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let k = j * cols + i;
            let (hx, hy) = (halton(k as u64 + 1, 2), halton(k as u64 + 1, 3));
            let at = [
                spacing * (i as f64 + 0.5) + jitter * (2.0 * hx - 1.0),
                spacing * (j as f64 + 0.5) + jitter * (2.0 * hy - 1.0),
            ];
            let strength = 1.0 + 4.0 * halton(k as u64 + 1, 5);
            out.push(FlowElement::fixed(KINDS[k % 4], strength, decay, at));
        }
    }
    out
}

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}
