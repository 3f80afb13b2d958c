//! Shared fixtures for the criterion benchmarks.

use helmlod::coefficients::{builtin_example, CoefficientSet, ExampleId, ExampleParams};
use helmlod::mesh::{build_hierarchy, BoundaryTags, MeshHierarchy};

/// Standard benchmark scene: oscillatory coefficients on (-1,1)^2.
pub fn fixture(coarse_cells: usize, levels: u32, k: f64) -> (MeshHierarchy, CoefficientSet) {
    let params = ExampleParams { epsilon: 0.25, ..Default::default() };
    let hier = build_hierarchy(
        params.domain_origin,
        params.domain_extent,
        (coarse_cells, coarse_cells),
        levels,
        BoundaryTags::all_robin(),
    )
    .expect("valid benchmark mesh");
    let coeffs = builtin_example(ExampleId::Example1, &params)
        .expect("valid benchmark coefficients")
        .with_wavenumber(k);
    (hier, coeffs)
}
