//! Library results checked against the brute-force oracles in `common`.

mod common;

use common::{analytic, random_field, rectangle, winding, DenseGrid};
use mrtrack::synth::{self, ElementKind, FlowElement};
use mrtrack::{
    build_merge_tree, classic_robustness, extract_critical_points, magnitude_field, region_degree,
    RobustnessValue, TriangleMesh,
};

/// Classic robustness of every extracted critical point next to the flood-fill
/// oracle, keyed by the element each critical point sits on.
fn merge_tree_vs_flood(
    seed: u64,
    n: usize,
    cells: usize,
) -> (Vec<(RobustnessValue, Option<f64>)>, f64) {
    let rf = random_field(seed, n, cells);
    let mesh = &rf.field.mesh;
    let frame = &rf.field.frames[0];
    let cps = extract_critical_points(frame, mesh);
    assert_eq!(cps.len(), n, "seed {seed}: one zero per element");
    let f0 = magnitude_field(frame);
    let tree = build_merge_tree(mesh, &f0, &cps);

    let seeds: Vec<_> = rf
        .elements
        .iter()
        .map(|e| (e.position(0.0), e.kind.degree()))
        .collect();
    let grid = DenseGrid::new(&rf.elements, 400, 1.0, 1.0);
    let oracle = grid.flood_robustness(&seeds, 200);

    let pairs = cps
        .iter()
        .map(|cp| {
            let (k, _) = seeds
                .iter()
                .enumerate()
                .map(|(k, s)| (k, mrtrack::field::dist(s.0, cp.position)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert_eq!(cp.degree, seeds[k].1, "seed {seed}: degree of element {k}");
            (classic_robustness(&tree, cp.id).unwrap(), oracle[k])
        })
        .collect();
    let h = mesh.max_edge_length();
    let tol = 2.0 * h * common::max_edge_gradient(mesh, &f0);
    (pairs, tol)
}

#[test]
fn merge_heights_match_flood_fill_on_six_element_fields() {
    for seed in 0..8 {
        let (pairs, tol) = merge_tree_vs_flood(seed, 6, 48);
        for (got, want) in pairs {
            match (got, want) {
                (RobustnessValue::Unbounded, None) => {}
                (RobustnessValue::Finite(g), Some(w)) => {
                    assert!((g - w).abs() <= tol, "seed {seed}: {g} vs {w} (tol {tol})")
                }
                other => panic!("seed {seed}: {other:?}"),
            }
        }
    }
}

#[test]
fn isolated_pair_robustness_is_the_bottleneck_value() {
    let elements = vec![
        FlowElement::fixed(ElementKind::Source, 2.0, 0.08, [0.3, 0.5]),
        FlowElement::fixed(ElementKind::Saddle, 2.0, 0.08, [0.7, 0.5]),
    ];
    let mesh = TriangleMesh::grid(64, 64, [0.0, 0.0], 1.0, 1.0).unwrap();
    let field = synth::render(&elements, mesh, &[0.0]).unwrap();
    let frame = &field.frames[0];
    let cps = extract_critical_points(frame, &field.mesh);
    let f0 = magnitude_field(frame);
    let tree = build_merge_tree(&field.mesh, &f0, &cps);
    let grid = DenseGrid::new(&elements, 400, 1.0, 1.0);
    let want = grid.bottleneck([0.3, 0.5], [0.7, 0.5], f64::INFINITY);
    let tol = 2.0 * field.mesh.max_edge_length() * common::max_edge_gradient(&field.mesh, &f0);
    for cp in &cps {
        let got = classic_robustness(&tree, cp.id).unwrap().finite().unwrap();
        assert!((got - want).abs() <= tol, "{got} vs {want} (tol {tol})");
    }
}

#[test]
fn region_degree_matches_sampled_winding() {
    for seed in 10..15 {
        let rf = random_field(seed, 5, 40);
        let frame = &rf.field.frames[0];
        for (lo, hi) in [([0.05, 0.05], [0.95, 0.95]), ([0.1, 0.3], [0.6, 0.9])] {
            let corners = rectangle(lo, hi);
            let near = rf.elements.iter().any(|e| {
                let p = e.position(0.0);
                let dx = (p[0] - lo[0]).abs().min((p[0] - hi[0]).abs());
                let dy = (p[1] - lo[1]).abs().min((p[1] - hi[1]).abs());
                dx.min(dy) < 0.05
            });
            if near {
                continue;
            }
            let got = region_degree(&corners, frame, &rf.field.mesh).unwrap();
            let want = winding(|p| analytic(&rf.elements, p), &corners, 4000);
            assert_eq!(got, want, "seed {seed} rectangle {lo:?}..{hi:?}");
        }
    }
}

/// Near-tied merges can resolve differently on a coarse mesh; the gap closes
/// as the mesh is refined.
#[test]
fn merge_heights_converge_under_refinement() {
    for seed in 4..8 {
        let (pairs, _) = merge_tree_vs_flood(seed, 6, 160);
        for (got, want) in pairs {
            assert_eq!(got.finite().is_some(), want.is_some(), "seed {seed}");
            if let (Some(g), Some(w)) = (got.finite(), want) {
                assert!((g - w).abs() < 0.02, "seed {seed}: {g} vs {w}");
            }
        }
    }
}
