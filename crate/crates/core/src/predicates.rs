//! Exact sign tests on vertex vectors with simulation of simplicity.
//!
//! Every vertex `i` carries a symbolic perturbation `(e_i,x, e_i,y)` with
//! `e_i,x >> e_i,y >> e_j,x` whenever `i < j`. Determinant signs are evaluated
//! exactly and ties are broken by the leading nonzero coefficient of the
//! perturbation polynomial, so no sign is ever zero and every decision is
//! consistent across all simplices that share the vertices.

use robust::Coord;

use crate::field::Vec2;

/// Sign of `det[a; b] = a.x*b.y - a.y*b.x` for vectors carried by vertices
/// `ia != ib`. Never returns zero.
pub fn det_sign(a: Vec2, ia: u64, b: Vec2, ib: u64) -> i8 {
    debug_assert_ne!(ia, ib);
    let d = robust::orient2d(
        Coord { x: a[0], y: a[1] },
        Coord { x: b[0], y: b[1] },
        Coord { x: 0.0, y: 0.0 },
    );
    if d > 0.0 {
        return 1;
    }
    if d < 0.0 {
        return -1;
    }
    let sign = |x: f64| if x > 0.0 { 1 } else { -1 };
    if ia < ib {
        // Leading terms: e_a,x * b.y, -e_a,y * b.x, -e_b,x * a.y, -e_a,y * e_b,x
        if b[1] != 0.0 {
            sign(b[1])
        } else if b[0] != 0.0 {
            -sign(b[0])
        } else if a[1] != 0.0 {
            -sign(a[1])
        } else {
            -1
        }
    } else {
        // Leading terms: -e_b,x * a.y, e_b,y * a.x, e_a,x * b.y, e_a,x * e_b,y
        if a[1] != 0.0 {
            -sign(a[1])
        } else if a[0] != 0.0 {
            sign(a[0])
        } else if b[1] != 0.0 {
            sign(b[1])
        } else {
            1
        }
    }
}

/// If the (perturbed) image triangle of `vectors` contains the origin, returns
/// its orientation sign.
pub fn origin_in_triangle(vectors: [Vec2; 3], ids: [u64; 3]) -> Option<i8> {
    let s0 = det_sign(vectors[0], ids[0], vectors[1], ids[1]);
    let s1 = det_sign(vectors[1], ids[1], vectors[2], ids[2]);
    if s0 != s1 {
        return None;
    }
    let s2 = det_sign(vectors[2], ids[2], vectors[0], ids[0]);
    (s1 == s2).then_some(s0)
}

/// Barycentric weights `l` with `sum l_i * vectors[i] = 0`, clamped into the
/// simplex. Only meaningful when [`origin_in_triangle`] holds.
pub fn zero_barycentric(vectors: [Vec2; 3]) -> [f64; 3] {
    let det = |a: Vec2, b: Vec2| a[0] * b[1] - a[1] * b[0];
    let raw = [
        det(vectors[1], vectors[2]),
        det(vectors[2], vectors[0]),
        det(vectors[0], vectors[1]),
    ];
    let total: f64 = raw.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return [1.0 / 3.0; 3];
    }
    let mut l = raw.map(|x| (x / total).max(0.0));
    let s: f64 = l.iter().sum();
    if s == 0.0 {
        return [1.0 / 3.0; 3];
    }
    for x in &mut l {
        *x /= s;
    }
    l
}

/// Signed angle swept by the linear path from `a` to `b`, in `[-pi, pi]`.
/// Antiparallel and zero vectors are resolved with the same perturbation as
/// [`det_sign`].
pub fn sweep_angle(a: Vec2, ia: u64, b: Vec2, ib: u64) -> f64 {
    let lift = |v: Vec2| if v == [0.0, 0.0] { [1.0, 0.0] } else { v };
    let (la, lb) = (lift(a), lift(b));
    let c = la[0] * lb[1] - la[1] * lb[0];
    let d = la[0] * lb[0] + la[1] * lb[1];
    if c == 0.0 {
        if d > 0.0 {
            0.0
        } else {
            std::f64::consts::PI * f64::from(det_sign(a, ia, b, ib))
        }
    } else {
        c.atan2(d)
    }
}
