//! Shared inputs for the benchmarks.

use mrtrack::synth;
use mrtrack::{TimeVaryingField, TriangleMesh};

/// A one-frame lattice field with `cols x rows` elements on a
/// `cells x cells` grid.
pub fn lattice(cols: usize, rows: usize, cells: usize) -> TimeVaryingField {
    let spacing = 4.0;
    let mesh = TriangleMesh::grid(
        cells,
        cells,
        [0.0, 0.0],
        cols as f64 * spacing,
        rows as f64 * spacing,
    )
    .expect("valid grid");
    synth::render(&synth::lattice_elements(cols, rows, spacing), mesh, &[0.0])
        .expect("lattice renders")
}
